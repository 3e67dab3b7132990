//! Optimal cheating probabilities for both parties of the coin flip.
//!
//! Alice's best δ-state gives a success probability of the form
//! `(√(a(1−δ)) + √(bδ))²` with
//!
//! * `a = (1−p−η)/(1−p)`
//! * `b = η²/((1−p)(p+η))`
//!
//! whose maximum over δ is `a + b`, reached at `δ* = b/(a+b)`. The
//! brute-force search in [`brute_force_alice`] evaluates candidate states
//! through the state-vector engine instead and never touches these formulas.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{self, Spin, StateVector, TestTarget};
use crate::wcf::{trial_rng, CheatSpec, GeneralCheat, ProtocolParams};

/// `(√(a(1−δ)) + √(bδ))²` as a function of δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadicalPair {
    pub a: f64,
    pub b: f64,
}

impl RadicalPair {
    /// Coefficients of Alice's success probability for the given protocol.
    pub fn for_params(params: &ProtocolParams) -> Result<Self> {
        let (p, eta) = (params.p(), params.eta());
        if p >= 1.0 {
            return Err(Error::Domain("Alice's cheat value needs p < 1".into()));
        }
        if p + eta <= 0.0 {
            return Err(Error::DegenerateParameter);
        }
        let q = 1.0 - p;
        Ok(Self {
            a: ((q - eta) / q).max(0.0),
            b: eta * eta / (q * (p + eta)),
        })
    }

    pub fn value_at(&self, delta: f64) -> f64 {
        let s = (self.a * (1.0 - delta)).sqrt() + (self.b * delta).sqrt();
        s * s
    }

    /// `(max, argmax)` over δ ∈ [0, 1].
    pub fn maximize(&self) -> (f64, f64) {
        let total = self.a + self.b;
        let delta = if total > 0.0 { self.b / total } else { 0.0 };
        (total, delta)
    }
}

/// What achieves a cheat value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Delta(f64),
    State(GeneralCheat),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheatValue {
    pub value: f64,
    pub optimizer: Option<Optimizer>,
}

impl CheatValue {
    pub fn delta(&self) -> Option<f64> {
        match self.optimizer {
            Some(Optimizer::Delta(d)) => Some(d),
            _ => None,
        }
    }
}

pub fn alice_value_at_delta(params: &ProtocolParams, delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain(format!("delta = {delta} outside [0, 1]")));
    }
    Ok(RadicalPair::for_params(params)?.value_at(delta))
}

/// Alice's maximal probability of winning without being caught.
pub fn alice_optimal_value(params: &ProtocolParams) -> Result<CheatValue> {
    let (value, delta) = RadicalPair::for_params(params)?.maximize();
    Ok(CheatValue {
        value,
        optimizer: Some(Optimizer::Delta(delta)),
    })
}

/// Bob's maximal winning probability, reached by always claiming a win.
pub fn bob_optimal_value(params: &ProtocolParams) -> CheatValue {
    CheatValue {
        value: params.p() + params.eta(),
        optimizer: None,
    }
}

/// Probability that a state prepared by Alice makes Bob lose *and* passes
/// Bob's |ξ⟩ check, computed by evolving the state.
pub fn alice_success_probability(params: &ProtocolParams, prepared: &StateVector) -> Result<f64> {
    let xi = params.xi_state()?;
    let evolved = qsim::apply_u_eta(
        &qsim::attach_down_ancilla_qubit(prepared)?,
        params.p(),
        params.eta(),
    )?;
    let (_, bob_loses) = qsim::projective_test(
        &evolved,
        &TestTarget::Pattern(vec![(2, Spin::Up), (3, Spin::Down)]),
    )?;
    let Some(post) = bob_loses.post_state else {
        return Ok(0.0);
    };
    let (passes, _) = qsim::projective_test(&post, &TestTarget::State(xi))?;
    Ok(bob_loses.probability * passes.probability)
}

/// Spacing of the δ-line search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaSpacing {
    /// δᵢ = i/(n−1).
    Uniform,
    /// δᵢ = sin²θᵢ with θ uniform on [0, π/2], i.e. uniform in the amplitude
    /// angle; resolves optima pinned near δ = 0 or δ = 1.
    AmplitudeAngle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub delta_points: usize,
    pub spacing: DeltaSpacing,
    /// Random general preparations (complex amplitudes, random ancilla when
    /// `ancilla_dim > 1`) evaluated in addition to the δ-line.
    pub random_samples: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            delta_points: 10_000,
            spacing: DeltaSpacing::AmplitudeAngle,
            random_samples: 0,
            seed: 0,
        }
    }
}

impl GridSpec {
    pub fn delta_points(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.delta_points;
        (0..n).map(move |i| {
            let t = i as f64 / (n - 1) as f64;
            match self.spacing {
                DeltaSpacing::Uniform => t,
                DeltaSpacing::AmplitudeAngle => (t * std::f64::consts::FRAC_PI_2).sin().powi(2),
            }
        })
    }
}

pub const MIN_GRID_POINTS: usize = 1_000;

/// Grid and random search for Alice's best preparation, evaluated through
/// [`alice_success_probability`].
pub fn brute_force_alice(
    params: &ProtocolParams,
    grid: &GridSpec,
    ancilla_dim: usize,
) -> Result<CheatValue> {
    if grid.delta_points < MIN_GRID_POINTS {
        return Err(Error::Domain(format!(
            "delta grid needs at least {MIN_GRID_POINTS} points, got {}",
            grid.delta_points
        )));
    }
    if !(1..=2).contains(&ancilla_dim) {
        return Err(Error::Domain(format!(
            "ancilla dimension must be 1 or 2, got {ancilla_dim}"
        )));
    }
    let mut best = CheatValue {
        value: f64::NEG_INFINITY,
        optimizer: None,
    };
    for delta in grid.delta_points() {
        let state = CheatSpec::AliceDelta { delta }.alice_state(params)?;
        let v = alice_success_probability(params, &state)?;
        if v > best.value {
            best = CheatValue {
                value: v,
                optimizer: Some(Optimizer::Delta(delta)),
            };
        }
    }
    let mut rng = trial_rng(grid.seed, 0);
    for _ in 0..grid.random_samples {
        let cheat = random_general_cheat(&mut rng, ancilla_dim);
        let v = alice_success_probability(params, &cheat.prepared_state()?)?;
        if v > best.value {
            best = CheatValue {
                value: v,
                optimizer: Some(Optimizer::State(cheat)),
            };
        }
    }
    Ok(best)
}

/// Haar-random unit vector of the given dimension.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
            .collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|z| z / n).collect();
        }
    }
}

/// Random general preparation with complex amplitudes on all four branches
/// and, for `ancilla_dim > 1`, independent random ancilla states.
pub fn random_general_cheat<R: Rng + ?Sized>(rng: &mut R, ancilla_dim: usize) -> GeneralCheat {
    let a = random_unit_vector(rng, 4);
    let amplitudes = [a[0], a[1], a[2], a[3]];
    let ancilla = (ancilla_dim > 1).then(|| std::array::from_fn(|_| random_unit_vector(rng, ancilla_dim)));
    GeneralCheat::new(amplitudes, ancilla).expect("sampled vectors are normalized")
}
