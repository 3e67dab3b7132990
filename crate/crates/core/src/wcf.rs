//! Three-round weak imbalanced coin flipping between Alice and Bob.
//!
//! Alice prepares `√(1−p−η)|↑₁↓₂⟩ + √(p+η)|↓₁↑₂⟩` and sends qubit 2 to Bob.
//! Bob attaches qubit 3 in |↓⟩, applies U_η and checks qubits 2,3 for ↑↓.
//! If he finds it he announces a win and Alice checks that qubit 1 is |↓⟩;
//! otherwise Alice hands over qubit 1 and Bob checks the three qubits
//! against |ξ⟩. A failed check aborts the run.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{
    self, BasisLabel, Register, Spin, StateVector, TestTarget, NORM_TOL,
};

/// One protocol instance: Bob wins honestly with probability `p`, and `eta`
/// tunes the prepared state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    p: f64,
    eta: f64,
}

impl ProtocolParams {
    pub fn new(p: f64, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("p = {p} outside [0, 1]")));
        }
        // small slack so that values like 1 - p computed in floating point pass
        if !(eta >= 0.0 && eta <= 1.0 - p + 1e-12) {
            return Err(Error::Domain(format!(
                "eta = {eta} outside [0, 1 - p] = [0, {}]",
                1.0 - p
            )));
        }
        Ok(Self {
            p,
            eta: eta.min(1.0 - p),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Alice's winning probability when both parties follow the protocol.
    pub fn honest_win_prob(&self) -> f64 {
        1.0 - self.p
    }

    pub fn honest_state(&self) -> StateVector {
        let reg = Register::new(2, 1).expect("static shape");
        StateVector::from_terms(
            reg,
            &[
                (BasisLabel::new([Spin::Up, Spin::Down]), real((1.0 - self.p - self.eta).sqrt())),
                (BasisLabel::new([Spin::Down, Spin::Up]), real((self.p + self.eta).sqrt())),
            ],
        )
        .expect("honest state is normalized")
    }

    /// |ξ⟩, the state Bob checks for after losing.
    pub fn xi_state(&self) -> Result<StateVector> {
        if self.p >= 1.0 {
            return Err(Error::Domain("|xi> is undefined at p = 1".into()));
        }
        let reg = Register::new(3, 1)?;
        let q = 1.0 - self.p;
        StateVector::from_terms(
            reg,
            &[
                (
                    BasisLabel::new([Spin::Up, Spin::Down, Spin::Down]),
                    real(((q - self.eta) / q).max(0.0).sqrt()),
                ),
                (
                    BasisLabel::new([Spin::Down, Spin::Down, Spin::Up]),
                    real((self.eta / q).sqrt()),
                ),
            ],
        )
    }
}

/// `honest_win_prob` as a free function.
pub fn honest_win_prob(params: &ProtocolParams) -> f64 {
    params.honest_win_prob()
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// An arbitrary cheating preparation Σ αᵢⱼ|ij⟩ ⊗ |Φᵢⱼ⟩ by Alice.
///
/// Amplitudes are ordered ↑↑, ↑↓, ↓↑, ↓↓. An empty ancilla list means no
/// ancilla (dimension 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralCheat {
    amplitudes: [Complex64; 4],
    ancilla: Vec<Vec<Complex64>>,
}

impl GeneralCheat {
    pub fn new(amplitudes: [Complex64; 4], ancilla: Option<[Vec<Complex64>; 4]>) -> Result<Self> {
        let cheat = Self {
            amplitudes,
            ancilla: ancilla.map(|a| a.to_vec()).unwrap_or_default(),
        };
        cheat.validate()?;
        Ok(cheat)
    }

    pub fn amplitudes(&self) -> &[Complex64; 4] {
        &self.amplitudes
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla.first().map_or(1, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        let n: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(n));
        }
        if self.ancilla.is_empty() {
            return Ok(());
        }
        if self.ancilla.len() != 4 {
            return Err(Error::Shape("one ancilla state per branch is required".into()));
        }
        let d = self.ancilla_dim();
        for phi in &self.ancilla {
            if phi.len() != d || d == 0 {
                return Err(Error::Shape("ancilla states differ in dimension".into()));
            }
            let n: f64 = phi.iter().map(|a| a.norm_sqr()).sum();
            if (n - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized(n));
            }
        }
        Ok(())
    }

    pub fn prepared_state(&self) -> Result<StateVector> {
        let d = self.ancilla_dim();
        let reg = Register::new(2, d)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); reg.dim()];
        for (branch, alpha) in self.amplitudes.iter().enumerate() {
            for k in 0..d {
                let phi = if self.ancilla.is_empty() {
                    real(1.0)
                } else {
                    self.ancilla[branch][k]
                };
                amps[branch * d + k] = alpha * phi;
            }
        }
        StateVector::from_amplitudes(reg, amps)
    }
}

/// Who cheats, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CheatSpec {
    Honest,
    /// Alice prepares `√(1−δ)|↑↓⟩ + √δ|↓↑⟩`.
    AliceDelta { delta: f64 },
    AliceGeneral(GeneralCheat),
    /// Bob skips his measurement and always announces that he has won.
    BobClaimWin,
}

impl CheatSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            CheatSpec::AliceDelta { delta } if !(0.0..=1.0).contains(delta) => {
                Err(Error::Domain(format!("delta = {delta} outside [0, 1]")))
            }
            CheatSpec::AliceGeneral(g) => g.validate(),
            _ => Ok(()),
        }
    }

    /// The two-qubit (plus ancilla) state Alice actually prepares.
    pub fn alice_state(&self, params: &ProtocolParams) -> Result<StateVector> {
        self.validate()?;
        match self {
            CheatSpec::Honest | CheatSpec::BobClaimWin => Ok(params.honest_state()),
            CheatSpec::AliceDelta { delta } => StateVector::from_terms(
                Register::new(2, 1)?,
                &[
                    (BasisLabel::new([Spin::Up, Spin::Down]), real((1.0 - delta).sqrt())),
                    (BasisLabel::new([Spin::Down, Spin::Up]), real(delta.sqrt())),
                ],
            ),
            CheatSpec::AliceGeneral(g) => g.prepared_state(),
        }
    }

    pub fn cheater(&self) -> Option<Party> {
        match self {
            CheatSpec::Honest => None,
            CheatSpec::AliceDelta { .. } | CheatSpec::AliceGeneral(_) => Some(Party::Alice),
            CheatSpec::BobClaimWin => Some(Party::Bob),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Alice,
    Bob,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerificationTest {
    /// Alice checks that qubit 1 is |↓⟩ after Bob claims a win.
    AliceQubitOneDown,
    /// Bob checks all three qubits against |ξ⟩ after losing.
    BobXi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Prepared { cheating: bool },
    SentQubitTwo,
    AppliedUEta,
    Announced { bob_wins: bool, measured: bool },
    SentQubitOne,
    NoFurtherMessage,
    Verification { test: VerificationTest, passed: bool },
    Declared { winner: Winner },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    events: Vec<Event>,
}

impl Transcript {
    fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Number of communication rounds recorded; a completed run always has three.
    pub fn rounds(&self) -> usize {
        self.events
            .iter()
            .filter(|e| {
                matches!(
                    e,
                    Event::SentQubitTwo
                        | Event::Announced { .. }
                        | Event::SentQubitOne
                        | Event::NoFurtherMessage
                )
            })
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub winner: Winner,
    pub abort_reason: Option<VerificationTest>,
    pub transcript: Transcript,
}

/// Probability that a verification of qubit 1 finds |↓⟩.
pub fn alice_verification(state: &StateVector) -> Result<f64> {
    state.marginal(1, Spin::Down)
}

fn sample<R: Rng + ?Sized>(rng: &mut R, prob: f64) -> bool {
    rng.gen::<f64>() < prob
}

/// Runs one execution of the protocol, sampling every measurement from `rng`.
pub fn run_protocol<R: Rng + ?Sized>(
    params: &ProtocolParams,
    cheat: &CheatSpec,
    rng: &mut R,
) -> Result<Outcome> {
    let prepared = cheat.alice_state(params)?;
    let xi = params.xi_state();
    let mut transcript = Transcript::default();
    transcript.push(Event::Prepared {
        cheating: cheat.cheater() == Some(Party::Alice),
    });
    transcript.push(Event::SentQubitTwo);
    let state = qsim::apply_u_eta(&qsim::attach_down_ancilla_qubit(&prepared)?, params.p, params.eta)?;
    transcript.push(Event::AppliedUEta);

    let bob_found = |state: &StateVector, rng: &mut R| -> Result<(bool, Option<StateVector>)> {
        let (pass, fail) = qsim::projective_test(
            state,
            &TestTarget::Pattern(vec![(2, Spin::Up), (3, Spin::Down)]),
        )?;
        Ok(if sample(rng, pass.probability) {
            (true, pass.post_state)
        } else {
            (false, fail.post_state)
        })
    };

    let (bob_wins, post, measured) = match cheat {
        CheatSpec::BobClaimWin => (true, Some(state), false),
        _ => {
            let (found, post) = bob_found(&state, rng)?;
            (found, post, true)
        }
    };
    let post = post.ok_or_else(|| Error::Protocol("sampled a zero-probability branch".into()))?;
    transcript.push(Event::Announced { bob_wins, measured });

    let (test, passed) = if bob_wins {
        transcript.push(Event::NoFurtherMessage);
        let passed = sample(rng, alice_verification(&post)?);
        (VerificationTest::AliceQubitOneDown, passed)
    } else {
        transcript.push(Event::SentQubitOne);
        let (pass, _) = qsim::projective_test(&post, &TestTarget::State(xi?))?;
        (VerificationTest::BobXi, sample(rng, pass.probability))
    };
    transcript.push(Event::Verification { test, passed });

    let winner = match (passed, bob_wins) {
        (false, _) => Winner::Abort,
        (true, true) => Winner::Bob,
        (true, false) => Winner::Alice,
    };
    transcript.push(Event::Declared { winner });
    Ok(Outcome {
        winner,
        abort_reason: (!passed).then_some(test),
        transcript,
    })
}

/// Independent random stream for trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Winner counts over a batch of runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub alice: u64,
    pub bob: u64,
    pub aborts: u64,
}

impl Tally {
    fn record(mut self, winner: Winner) -> Self {
        self.trials += 1;
        match winner {
            Winner::Alice => self.alice += 1,
            Winner::Bob => self.bob += 1,
            Winner::Abort => self.aborts += 1,
        }
        self
    }

    fn merge(self, other: Self) -> Self {
        Self {
            trials: self.trials + other.trials,
            alice: self.alice + other.alice,
            bob: self.bob + other.bob,
            aborts: self.aborts + other.aborts,
        }
    }

    pub fn count(&self, winner: Winner) -> u64 {
        match winner {
            Winner::Alice => self.alice,
            Winner::Bob => self.bob,
            Winner::Abort => self.aborts,
        }
    }

    pub fn frequency(&self, winner: Winner) -> f64 {
        self.count(winner) as f64 / self.trials as f64
    }

    pub fn std_error(&self, winner: Winner) -> f64 {
        binomial_std_error(self.frequency(winner), self.trials)
    }
}

/// `√(f(1−f)/n)`.
pub fn binomial_std_error(freq: f64, trials: u64) -> f64 {
    (freq * (1.0 - freq) / trials as f64).sqrt()
}

/// Runs `trials` independent executions; trial `i` draws from `trial_rng(seed, i)`,
/// so the tally does not depend on scheduling.
pub fn monte_carlo(
    params: &ProtocolParams,
    cheat: &CheatSpec,
    trials: u64,
    seed: u64,
) -> Result<Tally> {
    cheat.validate()?;
    (0..trials)
        .into_par_iter()
        .map(|i| run_protocol(params, cheat, &mut trial_rng(seed, i)).map(|o| o.winner))
        .try_fold(Tally::default, |t, w| w.map(|w| t.record(w)))
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BALANCED_ETA: f64 = 0.207_106_781_186_547_5;

    #[test]
    fn honest_win_prob_examples() {
        assert_eq!(ProtocolParams::new(0.5, 0.2071).unwrap().honest_win_prob(), 0.5);
        let third = ProtocolParams::new(1.0 / 3.0, 0.1).unwrap();
        assert!((honest_win_prob(&third) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ProtocolParams::new(1.0, 0.0).unwrap().honest_win_prob(), 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(ProtocolParams::new(-0.1, 0.0).is_err());
        assert!(ProtocolParams::new(0.6, 0.5).is_err());
        assert!(ProtocolParams::new(0.5, -0.01).is_err());
        assert!(ProtocolParams::new(0.4, 0.6).is_ok());
    }

    #[test]
    fn verification_probabilities() {
        let r = Register::new(1, 1).unwrap();
        let down = StateVector::basis(r, &BasisLabel::new([Spin::Down])).unwrap();
        let up = StateVector::basis(r, &BasisLabel::new([Spin::Up])).unwrap();
        assert_eq!(alice_verification(&down).unwrap(), 1.0);
        assert_eq!(alice_verification(&up).unwrap(), 0.0);

        let params = ProtocolParams::new(0.4, 0.25).unwrap();
        let psi1 = qsim::apply_u_eta(
            &qsim::attach_down_ancilla_qubit(&params.honest_state()).unwrap(),
            0.4,
            0.25,
        )
        .unwrap();
        let (pass, _) = qsim::projective_test(
            &psi1,
            &TestTarget::Pattern(vec![(2, Spin::Up), (3, Spin::Down)]),
        )
        .unwrap();
        let branch = pass.post_state.unwrap();
        assert!((alice_verification(&branch).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transcript_has_three_rounds() {
        let params = ProtocolParams::new(0.5, BALANCED_ETA).unwrap();
        for cheat in [
            CheatSpec::Honest,
            CheatSpec::BobClaimWin,
            CheatSpec::AliceDelta { delta: 0.3 },
        ] {
            for i in 0..50 {
                let out = run_protocol(&params, &cheat, &mut trial_rng(3, i)).unwrap();
                assert_eq!(out.transcript.rounds(), 3);
                assert_eq!(out.winner == Winner::Abort, out.abort_reason.is_some());
            }
        }
    }

    #[test]
    fn bob_claim_win_skips_measurement() {
        let params = ProtocolParams::new(0.5, BALANCED_ETA).unwrap();
        let out = run_protocol(&params, &CheatSpec::BobClaimWin, &mut trial_rng(1, 0)).unwrap();
        assert!(out.transcript.events().contains(&Event::Announced {
            bob_wins: true,
            measured: false
        }));
        assert_ne!(out.winner, Winner::Alice);
    }

    #[test]
    fn honest_runs_never_abort() {
        let params = ProtocolParams::new(0.3, 0.4).unwrap();
        let tally = monte_carlo(&params, &CheatSpec::Honest, 20_000, 11).unwrap();
        assert_eq!(tally.aborts, 0);
    }

    #[test]
    fn general_cheat_with_qubit_one_up_is_caught() {
        // α↑↑ = 1 at η = 0: Bob always finds ↑↓ on qubits 2,3 and the
        // qubit-1 check then fails
        let params = ProtocolParams::new(0.5, 0.0).unwrap();
        let g = GeneralCheat::new(
            [real(1.0), real(0.0), real(0.0), real(0.0)],
            None,
        )
        .unwrap();
        let tally = monte_carlo(&params, &CheatSpec::AliceGeneral(g), 2000, 5).unwrap();
        assert_eq!(tally.aborts, 2000);
    }

    #[test]
    fn cheat_validation() {
        let params = ProtocolParams::new(0.5, 0.1).unwrap();
        let bad = CheatSpec::AliceDelta { delta: 1.5 };
        assert!(run_protocol(&params, &bad, &mut trial_rng(0, 0)).is_err());
        assert!(GeneralCheat::new([real(1.0), real(1.0), real(0.0), real(0.0)], None).is_err());
        let phis = [
            vec![real(1.0), real(0.0)],
            vec![real(1.0), real(0.0)],
            vec![real(1.0)],
            vec![real(1.0), real(0.0)],
        ];
        assert!(GeneralCheat::new([real(0.0), real(1.0), real(0.0), real(0.0)], Some(phis)).is_err());
    }

    #[test]
    fn degenerate_params_error() {
        let params = ProtocolParams::new(0.0, 0.0).unwrap();
        assert_eq!(
            run_protocol(&params, &CheatSpec::Honest, &mut trial_rng(0, 0)),
            Err(Error::DegenerateParameter)
        );
    }

    #[test]
    fn same_seed_same_outcomes() {
        let params = ProtocolParams::new(0.5, BALANCED_ETA).unwrap();
        let cheat = CheatSpec::AliceDelta { delta: 0.2 };
        let a: Vec<_> = (0..200)
            .map(|i| run_protocol(&params, &cheat, &mut trial_rng(42, i)).unwrap())
            .collect();
        let b: Vec<_> = (0..200)
            .map(|i| run_protocol(&params, &cheat, &mut trial_rng(42, i)).unwrap())
            .collect();
        assert_eq!(a, b);
        assert_eq!(
            monte_carlo(&params, &cheat, 5000, 9).unwrap(),
            monte_carlo(&params, &cheat, 5000, 9).unwrap()
        );
    }
}
