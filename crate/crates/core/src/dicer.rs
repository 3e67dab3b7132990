//! N-sided dice rolling built as a ladder of imbalanced coin flips.
//!
//! Parties are numbered 1..=N. Stage 1 is a balanced flip between parties
//! 1 and 2; at every later stage the current winner plays the next entrant
//! `m`, who wins an honest flip with probability `1/m`. The entrant takes
//! either protocol role; the incumbent plays the other one.

use num_rational::Ratio;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::adversary::{alice_optimal_value, bob_optimal_value, RadicalPair};
use crate::error::{Error, Result};
use crate::fairness::{self, FairnessSolution, CASE1_BRACKET, CASE2_BRACKET, SOLVE_TOL};
use crate::wcf::{self, trial_rng, CheatSpec, Party, ProtocolParams, Winner};

/// Balanced-stage fair parameter `(√2 − 1)/2`.
pub const BALANCED_ETA: f64 = 0.207_106_781_186_547_5;

const ENTRANT_TOL: f64 = 1e-9;

fn other(role: Party) -> Party {
    match role {
        Party::Alice => Party::Bob,
        Party::Bob => Party::Alice,
    }
}

/// One coin flip of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub params: ProtocolParams,
    /// Role played by the entering party; the incumbent plays the other.
    pub entrant_role: Party,
}

impl Stage {
    fn honest_win(&self, role: Party) -> f64 {
        match role {
            Party::Alice => self.params.honest_win_prob(),
            Party::Bob => self.params.p(),
        }
    }

    /// Best winning probability a cheater in `role` can force.
    fn cheat_value(&self, role: Party) -> Result<f64> {
        Ok(match role {
            Party::Alice => alice_optimal_value(&self.params)?.value,
            Party::Bob => bob_optimal_value(&self.params).value,
        })
    }

    fn optimal_cheat(&self, role: Party) -> Result<CheatSpec> {
        Ok(match role {
            Party::Alice => CheatSpec::AliceDelta {
                delta: alice_optimal_value(&self.params)?.delta().unwrap_or(0.0),
            },
            Party::Bob => CheatSpec::BobClaimWin,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    n_parties: usize,
    stages: Vec<Stage>,
}

impl LadderSpec {
    pub fn new(n_parties: usize, stages: Vec<Stage>) -> Result<Self> {
        if n_parties < 2 {
            return Err(Error::Domain(format!("need at least 2 parties, got {n_parties}")));
        }
        if stages.len() != n_parties - 1 {
            return Err(Error::Domain(format!(
                "{n_parties} parties need {} stages, got {}",
                n_parties - 1,
                stages.len()
            )));
        }
        for (i, stage) in stages.iter().enumerate() {
            let m = i + 2;
            let win = stage.honest_win(stage.entrant_role);
            if (win - 1.0 / m as f64).abs() > ENTRANT_TOL {
                return Err(Error::Domain(format!(
                    "entrant {m} wins stage {} with probability {win}, expected 1/{m}",
                    i + 1
                )));
            }
        }
        Ok(Self { n_parties, stages })
    }

    /// Every entrant plays Bob with `p = 1/m` and the same `eta`.
    pub fn honest_ladder(n_parties: usize, eta: f64) -> Result<Self> {
        let stages = (2..=n_parties.max(2))
            .map(|m| {
                Ok(Stage {
                    params: ProtocolParams::new(1.0 / m as f64, eta)?,
                    entrant_role: Party::Bob,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_parties, stages)
    }

    /// The six-round three-party protocol: a fair balanced flip followed by
    /// the second stage of `case` at `stage_two_eta`.
    pub fn three_sided(case: DiceCase, stage_two_eta: f64) -> Result<Self> {
        let first = Stage {
            params: ProtocolParams::new(0.5, BALANCED_ETA)?,
            entrant_role: Party::Bob,
        };
        let second = match case {
            DiceCase::One => Stage {
                params: ProtocolParams::new(1.0 / 3.0, stage_two_eta)?,
                entrant_role: Party::Bob,
            },
            DiceCase::Two => Stage {
                params: ProtocolParams::new(2.0 / 3.0, stage_two_eta)?,
                entrant_role: Party::Alice,
            },
        };
        Self::new(3, vec![first, second])
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Stage at which party `m ≥ 2` enters.
    pub fn entry_stage(&self, m: usize) -> &Stage {
        &self.stages[m - 2]
    }

    /// Role of party `party` at the stage where `entrant` enters, assuming it
    /// is playing in that stage.
    fn role_of(&self, party: usize, entrant: usize) -> Party {
        let stage = self.entry_stage(entrant);
        if party == entrant {
            stage.entrant_role
        } else {
            other(stage.entrant_role)
        }
    }

    /// Per-stage excess losing probabilities of `party` when every opponent
    /// plays its stage-optimal cheat.
    pub fn stage_biases(&self, party: usize) -> Result<StageBiasVector> {
        check_party(party, self.n_parties)?;
        let first = party.max(2);
        let biases = (first..=self.n_parties)
            .map(|m| {
                let stage = self.entry_stage(m);
                let mine = self.role_of(party, m);
                let lose = stage.cheat_value(other(mine))?;
                let honest_lose = 1.0 - stage.honest_win(mine);
                // rounding can put the two a few ulps apart at η = 0
                Ok((lose - honest_lose).max(0.0))
            })
            .collect::<Result<Vec<_>>>()?;
        StageBiasVector::new(biases)
    }
}

fn check_party(party: usize, n_parties: usize) -> Result<()> {
    if n_parties < 2 {
        return Err(Error::Domain(format!("need at least 2 parties, got {n_parties}")));
    }
    if party == 0 || party > n_parties {
        return Err(Error::Domain(format!("party {party} not in 1..={n_parties}")));
    }
    Ok(())
}

/// Excess losing probability of one party at each stage it can play, from
/// its entry stage through the last entrant's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageBiasVector(Vec<f64>);

impl StageBiasVector {
    pub fn new(biases: Vec<f64>) -> Result<Self> {
        if let Some(b) = biases.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::Domain(format!("stage bias {b} outside [0, 1]")));
        }
        Ok(Self(biases))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Number of stages party `n` can play in an `n_parties` ladder.
pub fn stage_count(n: usize, n_parties: usize) -> usize {
    n_parties + 1 - n.max(2)
}

/// Party `n`'s honest losing probability at each stage it can reach:
/// `(n−1)/n` at its entry (1/2 for party 1), then `1/m` as entrant `m` arrives.
fn honest_stage_losses<T>(n: usize, n_parties: usize, frac: impl Fn(i64, i64) -> T) -> Vec<T> {
    let first = n.max(2);
    (first..=n_parties)
        .map(|m| {
            if m == n {
                frac(m as i64 - 1, m as i64)
            } else {
                frac(1, m as i64)
            }
        })
        .collect()
}

/// `Σₖ ℓₖ Πⱼ<ₖ (1 − ℓⱼ)`: losing at stage k after surviving all earlier ones.
fn compose<T>(honest: &[T], biases: &[T]) -> Result<T>
where
    T: Copy + Zero + One + PartialOrd + std::ops::Sub<Output = T> + std::fmt::Debug,
{
    let mut survive = T::one();
    let mut lose = T::zero();
    for (&h, &d) in honest.iter().zip(biases) {
        let stage = h + d;
        if stage < T::zero() || stage > T::one() {
            return Err(Error::Domain(format!(
                "inflated stage losing probability {stage:?} outside [0, 1]"
            )));
        }
        lose = lose + stage * survive;
        survive = survive * (T::one() - stage);
    }
    Ok(lose)
}

fn check_bias_len(n: usize, n_parties: usize, len: usize) -> Result<()> {
    check_party(n, n_parties)?;
    let want = stage_count(n, n_parties);
    if len != want {
        return Err(Error::Domain(format!(
            "party {n} of {n_parties} plays {want} stages, got {len} biases"
        )));
    }
    Ok(())
}

/// Maximal probability that honest party `n` loses when every stage it
/// plays is inflated by the matching bias.
pub fn worst_case_losing_prob(n: usize, n_parties: usize, biases: &StageBiasVector) -> Result<f64> {
    check_bias_len(n, n_parties, biases.0.len())?;
    let honest = honest_stage_losses(n, n_parties, |a, b| a as f64 / b as f64);
    compose(&honest, &biases.0)
}

/// [`worst_case_losing_prob`] in exact rational arithmetic.
pub fn worst_case_losing_prob_exact(
    n: usize,
    n_parties: usize,
    biases: &[Ratio<i64>],
) -> Result<Ratio<i64>> {
    check_bias_len(n, n_parties, biases.len())?;
    let honest = honest_stage_losses(n, n_parties, Ratio::new);
    compose(&honest, biases)
}

/// Exact per-party winning probabilities when everyone is honest.
pub fn honest_dice_probs_exact(n_parties: usize) -> Result<Vec<Ratio<i64>>> {
    check_party(1, n_parties)?;
    Ok((1..=n_parties)
        .map(|n| {
            let zeros = vec![Ratio::zero(); stage_count(n, n_parties)];
            Ratio::one() - compose(&honest_stage_losses(n, n_parties, Ratio::new), &zeros).expect("honest stages are probabilities")
        })
        .collect())
}

pub fn honest_dice_probs(n_parties: usize) -> Result<Vec<f64>> {
    Ok(honest_dice_probs_exact(n_parties)?
        .into_iter()
        .map(|r| *r.numer() as f64 / *r.denom() as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub epsilon: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Compares party `n`'s bias `P̄ₙ* − (N−1)/N` with `N · maxₖ δ̄ₖ`.
pub fn bias_bound_check(n: usize, n_parties: usize, biases: &StageBiasVector) -> Result<BoundCheck> {
    let losing = worst_case_losing_prob(n, n_parties, biases)?;
    let epsilon = losing - (n_parties - 1) as f64 / n_parties as f64;
    let bound = n_parties as f64 * biases.max();
    Ok(BoundCheck {
        epsilon,
        bound,
        holds: epsilon <= bound,
    })
}

/// The two ways of running the second stage of the three-party protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiceCase {
    /// The incumbent prepares the state (`1 − p = 2/3`).
    One,
    /// Claire prepares the state (`1 − p = 1/3`).
    Two,
}

/// Worst-case losing probabilities in the second stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageLosses {
    /// Π̄*₁/₃: Claire, who wins an honest second stage with probability 1/3.
    pub claire_loses: f64,
    /// Π̄*₂/₃: the first-stage winner.
    pub incumbent_loses: f64,
}

/// How the maximum over δ enters the case-2 fairness constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case2Reading {
    /// `max_δ (√(a(1−δ)) + √(bδ))²`, consistent with the two-party analysis.
    Squared,
    /// The bracket taken without the outer square.
    Unsquared,
}

fn check_eta(eta: f64, max: f64) -> Result<()> {
    if !(0.0..=max + 1e-12).contains(&eta) {
        return Err(Error::Domain(format!("eta = {eta} outside [0, {max}]")));
    }
    Ok(())
}

/// Case 1: the incumbent prepares, Claire plays Bob with `p = 1/3`.
pub fn three_sided_case1(eta: f64) -> Result<StageLosses> {
    check_eta(eta, 2.0 / 3.0)?;
    // ½(√((2−3η)(1−δ)) + √(9η²δ/(1+3η)))²
    let pair = RadicalPair {
        a: ((2.0 - 3.0 * eta) / 2.0).max(0.0),
        b: 9.0 * eta * eta / (2.0 * (1.0 + 3.0 * eta)),
    };
    Ok(StageLosses {
        claire_loses: pair.maximize().0,
        incumbent_loses: 1.0 / 3.0 + eta,
    })
}

/// Case 2: Claire prepares with `1 − p = 1/3`, the incumbent plays Bob.
pub fn three_sided_case2(eta: f64) -> Result<StageLosses> {
    three_sided_case2_with(eta, Case2Reading::Squared)
}

pub fn three_sided_case2_with(eta: f64, reading: Case2Reading) -> Result<StageLosses> {
    check_eta(eta, 1.0 / 3.0)?;
    // (√((1−3η)(1−δ)) + √(9η²δ/(2+3η)))²
    let pair = RadicalPair {
        a: (1.0 - 3.0 * eta).max(0.0),
        b: 9.0 * eta * eta / (2.0 + 3.0 * eta),
    };
    let squared = pair.maximize().0;
    Ok(StageLosses {
        claire_loses: 2.0 / 3.0 + eta,
        incumbent_loses: match reading {
            Case2Reading::Squared => squared,
            Case2Reading::Unsquared => squared.sqrt(),
        },
    })
}

/// Fairness residual: Claire's worst case minus Alice's (equivalently Bob's),
/// who must first survive a fair balanced flip.
fn fairness_gap(losses: StageLosses) -> (f64, f64) {
    let first_stage_loss = FRAC_1_SQRT_2;
    let alice = first_stage_loss + (1.0 - first_stage_loss) * losses.incumbent_loses;
    (losses.claire_loses, alice)
}

pub fn case_residual(case: DiceCase, eta: f64, reading: Case2Reading) -> Result<f64> {
    let losses = match case {
        DiceCase::One => three_sided_case1(eta)?,
        DiceCase::Two => three_sided_case2_with(eta, reading)?,
    };
    let (claire, alice) = fairness_gap(losses);
    Ok(claire - alice)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeSidedSolution {
    pub case: DiceCase,
    pub fairness: FairnessSolution,
    /// Common worst-case losing probability P̄* of the three parties.
    pub worst_case_losing: f64,
    /// `P̄* − 2/3`.
    pub bias: f64,
    pub report: DiceReport,
}

pub fn optimize_three_sided(case: DiceCase) -> Result<ThreeSidedSolution> {
    let bracket = match case {
        DiceCase::One => CASE1_BRACKET,
        DiceCase::Two => CASE2_BRACKET,
    };
    optimize_three_sided_with(case, Case2Reading::Squared, bracket)
}

/// Solves the fairness constraint for `case` on `bracket`. The constraint
/// fixes η uniquely on the bracket, so the constrained minimum is its root.
pub fn optimize_three_sided_with(
    case: DiceCase,
    reading: Case2Reading,
    bracket: (f64, f64),
) -> Result<ThreeSidedSolution> {
    let residual = |eta: f64| case_residual(case, eta, reading).unwrap_or(f64::NAN);
    let eta = fairness::find_root(residual, bracket, SOLVE_TOL)?;
    let losses = match case {
        DiceCase::One => three_sided_case1(eta)?,
        DiceCase::Two => three_sided_case2_with(eta, reading)?,
    };
    let (claire, alice) = fairness_gap(losses);
    let report = analyze_ladder(&LadderSpec::three_sided(case, eta)?)?;
    Ok(ThreeSidedSolution {
        case,
        fairness: FairnessSolution {
            eta_star: eta,
            achieved_values: (claire, alice),
            residual: (claire - alice).abs(),
        },
        worst_case_losing: claire,
        bias: claire - 2.0 / 3.0,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyReport {
    pub party: usize,
    pub honest_win: f64,
    /// P̄ₙ*: losing probability when all other parties cheat optimally.
    pub worst_case_losing: f64,
    /// ε̄ₙ = P̄ₙ* − (N−1)/N.
    pub bias: f64,
    pub stage_biases: Vec<f64>,
    pub bound: f64,
    pub bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceTally {
    pub trials: u64,
    pub wins: Vec<u64>,
}

impl DiceTally {
    pub fn frequency(&self, party: usize) -> f64 {
        self.wins[party - 1] as f64 / self.trials as f64
    }

    pub fn std_error(&self, party: usize) -> f64 {
        wcf::binomial_std_error(self.frequency(party), self.trials)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceReport {
    pub n_parties: usize,
    pub parties: Vec<PartyReport>,
    /// `N · δ̄_max` over every party's stage biases.
    pub bound: f64,
    pub bound_satisfied: bool,
    pub monte_carlo: Option<DiceTally>,
}

/// Honest and worst-case figures for every party of a ladder.
pub fn analyze_ladder(spec: &LadderSpec) -> Result<DiceReport> {
    let n_parties = spec.n_parties;
    let honest = honest_dice_probs(n_parties)?;
    let parties = (1..=n_parties)
        .map(|n| {
            let biases = spec.stage_biases(n)?;
            let worst = worst_case_losing_prob(n, n_parties, &biases)?;
            let check = bias_bound_check(n, n_parties, &biases)?;
            Ok(PartyReport {
                party: n,
                honest_win: honest[n - 1],
                worst_case_losing: worst,
                bias: check.epsilon,
                stage_biases: biases.0,
                bound: check.bound,
                bound_holds: check.holds,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bound = parties.iter().map(|p| p.bound).fold(0.0, f64::max);
    let bound_satisfied = parties.iter().all(|p| p.bound_holds);
    Ok(DiceReport {
        n_parties,
        parties,
        bound,
        bound_satisfied,
        monte_carlo: None,
    })
}

/// Per-stage strategy of a cheating coalition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStrategies {
    /// At each stage against the honest party, the coalition member plays
    /// the stage-optimal cheat for its role.
    Optimal,
    /// Explicit cheat per stage (index 0 is stage 1), used whenever the
    /// honest party is playing that stage.
    Explicit(Vec<CheatSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiceScenario {
    AllHonest,
    /// Everyone except `honest` cooperates against it.
    Coalition { honest: usize, strategies: StageStrategies },
}

impl DiceScenario {
    fn stage_cheats(&self, spec: &LadderSpec) -> Result<Vec<Option<(usize, CheatSpec)>>> {
        let DiceScenario::Coalition { honest, strategies } = self else {
            return Ok(vec![None; spec.stages.len()]);
        };
        check_party(*honest, spec.n_parties)?;
        if let StageStrategies::Explicit(v) = strategies {
            if v.len() != spec.stages.len() {
                return Err(Error::Domain(format!(
                    "{} stage strategies for {} stages",
                    v.len(),
                    spec.stages.len()
                )));
            }
        }
        (2..=spec.n_parties)
            .map(|m| {
                let stage = spec.entry_stage(m);
                if m < *honest {
                    return Ok(None);
                }
                let cheater_role = other(spec.role_of(*honest, m));
                let cheat = match strategies {
                    StageStrategies::Optimal => stage.optimal_cheat(cheater_role)?,
                    StageStrategies::Explicit(v) => {
                        let c = v[m - 2].clone();
                        c.validate()?;
                        if c.cheater().is_some_and(|r| r != cheater_role) {
                            return Err(Error::Domain(format!(
                                "stage {} cheat {c:?} does not match the coalition's role {cheater_role:?}",
                                m - 1
                            )));
                        }
                        c
                    }
                };
                Ok(Some((*honest, cheat)))
            })
            .collect()
    }
}

fn run_ladder_trial(
    spec: &LadderSpec,
    cheats: &[Option<(usize, CheatSpec)>],
    seed: u64,
    index: u64,
) -> Result<usize> {
    let mut rng = trial_rng(seed, index);
    let mut holder = 1;
    for m in 2..=spec.n_parties {
        let stage = spec.entry_stage(m);
        let party_in = |role: Party| if role == stage.entrant_role { m } else { holder };
        // the cheat only applies while the honest party is still playing
        let cheat = match &cheats[m - 2] {
            Some((h, c)) if *h == holder || *h == m => c.clone(),
            _ => CheatSpec::Honest,
        };
        let outcome = wcf::run_protocol(&stage.params, &cheat, &mut rng)?;
        holder = match outcome.winner {
            Winner::Alice => party_in(Party::Alice),
            Winner::Bob => party_in(Party::Bob),
            Winner::Abort => match cheat.cheater() {
                // a detected cheat forfeits the stage
                Some(role) => party_in(other(role)),
                None => {
                    return Err(Error::Protocol(format!(
                        "honest stage {} aborted",
                        m - 1
                    )))
                }
            },
        };
    }
    Ok(holder)
}

/// Monte Carlo over the full ladder; trial `i` uses `trial_rng(seed, i)` for
/// all of its stages.
pub fn simulate_dice(
    spec: &LadderSpec,
    scenario: &DiceScenario,
    trials: u64,
    seed: u64,
) -> Result<DiceReport> {
    if trials == 0 {
        return Err(Error::Domain("trial count must be at least 1".into()));
    }
    let cheats = scenario.stage_cheats(spec)?;
    let n = spec.n_parties;
    let wins = (0..trials)
        .into_par_iter()
        .map(|i| run_ladder_trial(spec, &cheats, seed, i))
        .try_fold(
            || vec![0u64; n],
            |mut acc, w| {
                acc[w? - 1] += 1;
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; n],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;
    let mut report = analyze_ladder(spec)?;
    report.monte_carlo = Some(DiceTally { trials, wins });
    Ok(report)
}
