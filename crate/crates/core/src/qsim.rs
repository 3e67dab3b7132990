//! Dense state-vector engine for the protocol register.
//!
//! The register holds two or three labelled qubits (numbered from 1, matching
//! the order in which they appear in kets such as |↑₁↓₂↓₃⟩) and an optional
//! ancilla of dimension `D` held by the state preparer. Amplitudes are stored
//! densely with qubit 1 as the most significant bit and the ancilla index as
//! the fastest-varying coordinate.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance on normalization and unitarity.
pub const NORM_TOL: f64 = 1e-9;

/// Branches whose probability falls below this carry no post-state.
pub const ZERO_BRANCH: f64 = 1e-12;

pub const MAX_QUBITS: usize = 3;
pub const MAX_ANCILLA_DIM: usize = 64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    fn bit(self) -> usize {
        match self {
            Spin::Up => 0,
            Spin::Down => 1,
        }
    }

    fn from_bit(bit: usize) -> Self {
        if bit == 0 {
            Spin::Up
        } else {
            Spin::Down
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Register {
    qubits: usize,
    ancilla_dim: usize,
}

impl Register {
    pub fn new(qubits: usize, ancilla_dim: usize) -> Result<Self> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(Error::Shape(format!(
                "register must hold 1..={MAX_QUBITS} qubits, got {qubits}"
            )));
        }
        if ancilla_dim == 0 || ancilla_dim > MAX_ANCILLA_DIM {
            return Err(Error::Shape(format!(
                "ancilla dimension must be in 1..={MAX_ANCILLA_DIM}, got {ancilla_dim}"
            )));
        }
        Ok(Self { qubits, ancilla_dim })
    }

    pub fn qubits(self) -> usize {
        self.qubits
    }

    pub fn ancilla_dim(self) -> usize {
        self.ancilla_dim
    }

    pub fn dim(self) -> usize {
        (1 << self.qubits) * self.ancilla_dim
    }

    fn index(self, label: &BasisLabel) -> Result<usize> {
        if label.bits.len() != self.qubits {
            return Err(Error::Shape(format!(
                "label has {} qubits, register has {}",
                label.bits.len(),
                self.qubits
            )));
        }
        if label.ancilla >= self.ancilla_dim {
            return Err(Error::Shape(format!(
                "ancilla index {} out of range for dimension {}",
                label.ancilla, self.ancilla_dim
            )));
        }
        let word = label
            .bits
            .iter()
            .fold(0usize, |acc, spin| (acc << 1) | spin.bit());
        Ok(word * self.ancilla_dim + label.ancilla)
    }

    /// Spin of 1-based `qubit` in the basis state at flat index `idx`.
    fn spin_at(self, idx: usize, qubit: usize) -> Spin {
        let word = idx / self.ancilla_dim;
        Spin::from_bit((word >> (self.qubits - qubit)) & 1)
    }
}

/// A computational basis state: one spin per labelled qubit plus an ancilla index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    bits: Vec<Spin>,
    ancilla: usize,
}

impl BasisLabel {
    pub fn new(bits: impl Into<Vec<Spin>>) -> Self {
        Self {
            bits: bits.into(),
            ancilla: 0,
        }
    }

    pub fn with_ancilla(bits: impl Into<Vec<Spin>>, ancilla: usize) -> Self {
        Self {
            bits: bits.into(),
            ancilla,
        }
    }

    pub fn bits(&self) -> &[Spin] {
        &self.bits
    }

    pub fn ancilla(&self) -> usize {
        self.ancilla
    }
}

/// Normalized pure state of a [`Register`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    register: Register,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wraps a dense amplitude vector, rejecting anything that is not normalized.
    pub fn from_amplitudes(register: Register, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != register.dim() {
            return Err(Error::Shape(format!(
                "expected {} amplitudes, got {}",
                register.dim(),
                amps.len()
            )));
        }
        let state = Self { register, amps };
        let n = state.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(state)
    }

    pub fn from_terms(register: Register, terms: &[(BasisLabel, Complex64)]) -> Result<Self> {
        let mut amps = vec![ZERO; register.dim()];
        for (label, amp) in terms {
            amps[register.index(label)?] += amp;
        }
        Self::from_amplitudes(register, amps)
    }

    pub fn basis(register: Register, label: &BasisLabel) -> Result<Self> {
        Self::from_terms(register, &[(label.clone(), Complex64::new(1.0, 0.0))])
    }

    /// Normalized superposition Σ cᵢ|ψᵢ⟩ of states sharing one register.
    pub fn superpose(terms: &[(Complex64, &StateVector)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Shape("empty superposition".into()))?;
        let register = first.1.register;
        let mut amps = vec![ZERO; register.dim()];
        for (c, state) in terms {
            if state.register != register {
                return Err(Error::Shape("superposed states differ in shape".into()));
            }
            for (dst, src) in amps.iter_mut().zip(&state.amps) {
                *dst += c * src;
            }
        }
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n < ZERO_BRANCH {
            return Err(Error::NotNormalized(0.0));
        }
        amps.iter_mut().for_each(|a| *a /= n);
        Self::from_amplitudes(register, amps)
    }

    pub fn register(&self) -> Register {
        self.register
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, label: &BasisLabel) -> Result<Complex64> {
        Ok(self.amps[self.register.index(label)?])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Probability that 1-based `qubit` is found with the given spin.
    pub fn marginal(&self, qubit: usize, spin: Spin) -> Result<f64> {
        check_qubit(self.register, qubit)?;
        let p = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| self.register.spin_at(*i, qubit) == spin)
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>();
        Ok(clamp_prob(p))
    }

    fn renormalized(register: Register, mut amps: Vec<Complex64>, prob: f64) -> Option<Self> {
        if prob < ZERO_BRANCH {
            return None;
        }
        let scale = prob.sqrt();
        amps.iter_mut().for_each(|a| *a /= scale);
        Some(Self { register, amps })
    }
}

fn check_qubit(register: Register, qubit: usize) -> Result<()> {
    if qubit == 0 || qubit > register.qubits {
        return Err(Error::Shape(format!(
            "qubit {qubit} not in a {}-qubit register",
            register.qubits
        )));
    }
    Ok(())
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Tensors qubit 3 in |↓⟩ onto a two-qubit state.
pub fn attach_down_ancilla_qubit(state: &StateVector) -> Result<StateVector> {
    let reg = state.register;
    if reg.qubits != 2 {
        return Err(Error::Shape(format!(
            "expected a 2-qubit state, got {} qubits",
            reg.qubits
        )));
    }
    let out_reg = Register::new(3, reg.ancilla_dim)?;
    let d = reg.ancilla_dim;
    let mut amps = vec![ZERO; out_reg.dim()];
    for (i, a) in state.amps.iter().enumerate() {
        let (word, anc) = (i / d, i % d);
        let new_word = (word << 1) | Spin::Down.bit();
        amps[new_word * d + anc] = *a;
    }
    Ok(StateVector {
        register: out_reg,
        amps,
    })
}

/// Checks `0 ≤ p ≤ 1`, `0 ≤ η ≤ 1 − p` and `p + η > 0`.
pub fn check_u_eta_params(p: f64, eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || !p.is_finite() {
        return Err(Error::Domain(format!("p = {p} outside [0, 1]")));
    }
    if !(eta >= 0.0 && eta <= 1.0 - p + 1e-12) {
        return Err(Error::Domain(format!(
            "eta = {eta} outside [0, 1 - p] = [0, {}]",
            1.0 - p
        )));
    }
    if p + eta <= 0.0 {
        return Err(Error::DegenerateParameter);
    }
    Ok(())
}

/// The real 2×2 block of U_η on span{|↑₂↓₃⟩, |↓₂↑₃⟩}: `[[c, s], [s, −c]]`.
fn u_eta_block(p: f64, eta: f64) -> (f64, f64) {
    let c = (p / (p + eta)).sqrt();
    let s = (eta / (p + eta)).sqrt();
    (c, s)
}

fn rotate_block(state: &StateVector, m: [[f64; 2]; 2]) -> Result<StateVector> {
    let reg = state.register;
    if reg.qubits != 3 {
        return Err(Error::Shape(format!(
            "U_eta acts on qubits 2 and 3; register has {} qubits",
            reg.qubits
        )));
    }
    let d = reg.ancilla_dim;
    let mut amps = state.amps.clone();
    // qubit 1 and ancilla are spectators
    for q1 in [Spin::Up, Spin::Down] {
        let ud = ((q1.bit() << 2) | (Spin::Up.bit() << 1) | Spin::Down.bit()) * d;
        let du = ((q1.bit() << 2) | (Spin::Down.bit() << 1) | Spin::Up.bit()) * d;
        for anc in 0..d {
            let x = state.amps[ud + anc];
            let y = state.amps[du + anc];
            amps[ud + anc] = x * m[0][0] + y * m[0][1];
            amps[du + anc] = x * m[1][0] + y * m[1][1];
        }
    }
    Ok(StateVector {
        register: reg,
        amps,
    })
}

/// Bob's unitary U_η, identity outside span{|↑₂↓₃⟩, |↓₂↑₃⟩}.
pub fn apply_u_eta(state: &StateVector, p: f64, eta: f64) -> Result<StateVector> {
    check_u_eta_params(p, eta)?;
    let (c, s) = u_eta_block(p, eta);
    // columns are the images of |↑₂↓₃⟩ and |↓₂↑₃⟩
    rotate_block(state, [[c, s], [s, -c]])
}

/// Adjoint of [`apply_u_eta`] (transpose of the real block).
pub fn apply_u_eta_adjoint(state: &StateVector, p: f64, eta: f64) -> Result<StateVector> {
    check_u_eta_params(p, eta)?;
    let (c, s) = u_eta_block(p, eta);
    let m = [[c, s], [s, -c]];
    rotate_block(state, [[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
}

/// What a projective test checks for.
#[derive(Debug, Clone, PartialEq)]
pub enum TestTarget {
    /// Fixed spins on a subset of (1-based) qubits, e.g. `[(2, Up), (3, Down)]`.
    Pattern(Vec<(usize, Spin)>),
    /// A pure state of the qubits. With ancilla dimension 1 it acts as the
    /// identity on any ancilla of the tested state; otherwise its shape must
    /// match the tested register exactly.
    State(StateVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    pub probability: f64,
    pub post_state: Option<StateVector>,
}

/// Projects onto the target subspace and its complement, returning `(pass, fail)`.
pub fn projective_test(
    state: &StateVector,
    target: &TestTarget,
) -> Result<(TestOutcome, TestOutcome)> {
    let reg = state.register;
    let pass_amps = match target {
        TestTarget::Pattern(pattern) => {
            for (q, _) in pattern {
                check_qubit(reg, *q)?;
            }
            state
                .amps
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    if pattern.iter().all(|(q, s)| reg.spin_at(i, *q) == *s) {
                        *a
                    } else {
                        ZERO
                    }
                })
                .collect::<Vec<_>>()
        }
        TestTarget::State(t) => project_onto(state, t)?,
    };
    let fail_amps: Vec<Complex64> = state
        .amps
        .iter()
        .zip(&pass_amps)
        .map(|(a, b)| a - b)
        .collect();
    let p_pass = clamp_prob(pass_amps.iter().map(|a| a.norm_sqr()).sum());
    let p_fail = clamp_prob(fail_amps.iter().map(|a| a.norm_sqr()).sum());
    Ok((
        TestOutcome {
            probability: p_pass,
            post_state: StateVector::renormalized(reg, pass_amps, p_pass),
        },
        TestOutcome {
            probability: p_fail,
            post_state: StateVector::renormalized(reg, fail_amps, p_fail),
        },
    ))
}

fn project_onto(state: &StateVector, target: &StateVector) -> Result<Vec<Complex64>> {
    let reg = state.register;
    let treg = target.register;
    if treg == reg {
        let c = inner(&target.amps, &state.amps);
        return Ok(target.amps.iter().map(|t| t * c).collect());
    }
    if treg.qubits != reg.qubits || treg.ancilla_dim != 1 {
        return Err(Error::Shape(format!(
            "test state has shape ({}, {}), register is ({}, {})",
            treg.qubits, treg.ancilla_dim, reg.qubits, reg.ancilla_dim
        )));
    }
    // (|t⟩⟨t| ⊗ I_anc)|ψ⟩
    let d = reg.ancilla_dim;
    let mut out = vec![ZERO; reg.dim()];
    for anc in 0..d {
        let c: Complex64 = (0..1usize << reg.qubits)
            .map(|w| target.amps[w].conj() * state.amps[w * d + anc])
            .sum();
        for w in 0..1usize << reg.qubits {
            out[w * d + anc] = target.amps[w] * c;
        }
    }
    Ok(out)
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// ⟨a|b⟩.
pub fn overlap(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.register != b.register {
        return Err(Error::Shape(format!(
            "overlap of shapes ({}, {}) and ({}, {})",
            a.register.qubits, a.register.ancilla_dim, b.register.qubits, b.register.ancilla_dim
        )));
    }
    Ok(inner(&a.amps, &b.amps))
}
