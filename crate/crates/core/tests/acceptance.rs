//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::Ratio;
use num_traits::Zero;
use rand::Rng;

use qdice::adversary::{
    alice_optimal_value, alice_success_probability, brute_force_alice, random_general_cheat,
    GridSpec,
};
use qdice::dicer::{
    bias_bound_check, optimize_three_sided, optimize_three_sided_with, simulate_dice, stage_count,
    worst_case_losing_prob_exact, Case2Reading, DiceCase, DiceScenario, LadderSpec,
    StageBiasVector, StageStrategies,
};
use qdice::fairness::solve_balanced;
use qdice::wcf::{monte_carlo, trial_rng, CheatSpec, ProtocolParams, Winner};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let mut v = f();
    let elapsed = start.elapsed();
    v.detail = format!("{} [{:.3}s / {:.0}s]", v.detail, elapsed.as_secs_f64(), limit.as_secs_f64());
    if elapsed > limit {
        v.pass = false;
    }
    v
}

fn within_3_sigma(freq: f64, target: f64, trials: u64) -> (bool, f64) {
    let sigma = (target * (1.0 - target) / trials as f64).sqrt();
    ((freq - target).abs() <= 3.0 * sigma, sigma)
}

fn ac1_balanced() -> Verdict {
    timed(Duration::from_secs(1), || {
        let s = solve_balanced().expect("balanced solve");
        let want_eta = (SQRT_2 - 1.0) / 2.0;
        let ok = (s.eta_star - want_eta).abs() < 1e-6
            && (s.achieved_values.0 - FRAC_1_SQRT_2).abs() < 1e-6
            && (s.achieved_values.1 - FRAC_1_SQRT_2).abs() < 1e-6;
        verdict(
            ok,
            format!(
                "eta*={:.9} P_A*={:.9} P_B*={:.9}",
                s.eta_star, s.achieved_values.0, s.achieved_values.1
            ),
        )
    })
}

fn ac2_case1() -> Verdict {
    timed(Duration::from_secs(1), || {
        let s = optimize_three_sided(DiceCase::One).expect("case 1");
        let ok = (s.worst_case_losing - 0.848).abs() <= 0.001 && (s.bias - 0.181).abs() <= 0.001;
        verdict(
            ok,
            format!(
                "P*={:.6} bias={:.6} eta*={:.6}",
                s.worst_case_losing, s.bias, s.fairness.eta_star
            ),
        )
    })
}

fn ac3_case2() -> Verdict {
    timed(Duration::from_secs(1), || {
        let squared = optimize_three_sided(DiceCase::Two).expect("case 2");
        let literal = optimize_three_sided_with(DiceCase::Two, Case2Reading::Unsquared, (0.0, 1.0 / 3.0));
        let literal_bias = literal.as_ref().map(|s| s.bias).unwrap_or(f64::NAN);
        let ok = (squared.bias - 0.199).abs() <= 0.001 && !((literal_bias - 0.199).abs() <= 0.001);
        verdict(
            ok,
            format!("squared bias={:.6}, unsquared bias={:.6}", squared.bias, literal_bias),
        )
    })
}

fn ac4_oracle_grid() -> Verdict {
    timed(Duration::from_secs(60), || {
        let grid = GridSpec::default();
        let mut worst: f64 = 0.0;
        let mut at = (0.0, 0.0);
        for i in 0..50 {
            let p = i as f64 / 50.0;
            for j in 0..50 {
                let eta = (j as f64 + 0.5) / 50.0 * (1.0 - p);
                let pr = ProtocolParams::new(p, eta).unwrap();
                let oracle = brute_force_alice(&pr, &grid, 1).unwrap().value;
                let closed = alice_optimal_value(&pr).unwrap().value;
                let gap = (oracle - closed).abs();
                if gap > worst {
                    worst = gap;
                    at = (p, eta);
                }
            }
        }
        verdict(
            worst < 1e-6,
            format!(
                "max |oracle - closed| = {worst:.3e} at (p, eta) = ({:.3}, {:.4}), {} delta points",
                at.0, at.1, grid.delta_points
            ),
        )
    })
}

fn ac5_no_advantage() -> Verdict {
    let mut rng = trial_rng(55, 0);
    let mut worst_excess = f64::NEG_INFINITY;
    let samples = 10_000;
    for _ in 0..20 {
        let p: f64 = rng.gen_range(0.0..0.99);
        let eta = rng.gen_range(0.0..=1.0) * (1.0 - p);
        let pr = ProtocolParams::new(p, eta).unwrap();
        if p + eta <= 0.0 {
            continue;
        }
        let closed = alice_optimal_value(&pr).unwrap().value;
        for _ in 0..samples {
            let cheat = random_general_cheat(&mut rng, 2);
            let v = alice_success_probability(&pr, &cheat.prepared_state().unwrap()).unwrap();
            worst_excess = worst_excess.max(v - closed);
        }
    }
    verdict(
        worst_excess <= 1e-9,
        format!("20 points x {samples} samples (ancilla dim 2), max excess over closed form = {worst_excess:.3e}"),
    )
}

fn ac6_honest_mc() -> Verdict {
    let trials = 100_000;
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (p, eta)) in [(0.5, 0.2071), (1.0 / 3.0, 0.1465), (2.0 / 3.0, 0.199)]
        .into_iter()
        .enumerate()
    {
        let pr = ProtocolParams::new(p, eta).unwrap();
        let t = monte_carlo(&pr, &CheatSpec::Honest, trials, 600 + i as u64).unwrap();
        let f = t.frequency(Winner::Alice);
        let (inside, sigma) = within_3_sigma(f, 1.0 - p, trials);
        ok &= inside && t.aborts == 0;
        parts.push(format!(
            "p={p:.4}: f={f:.5} vs {:.5} ({:.2} sigma), aborts={}",
            1.0 - p,
            (f - (1.0 - p)) / sigma,
            t.aborts
        ));
    }
    verdict(ok, parts.join("; "))
}

fn ac7_bob_cheat_mc() -> Verdict {
    let trials = 100_000;
    let eta = solve_balanced().unwrap().eta_star;
    let pr = ProtocolParams::new(0.5, eta).unwrap();
    let t = monte_carlo(&pr, &CheatSpec::BobClaimWin, trials, 7).unwrap();
    let f = t.frequency(Winner::Bob);
    let (inside, sigma) = within_3_sigma(f, FRAC_1_SQRT_2, trials);
    verdict(
        inside,
        format!("Bob wins {f:.5} vs {FRAC_1_SQRT_2:.5} ({:.2} sigma)", (f - FRAC_1_SQRT_2) / sigma),
    )
}

fn ac8_composition() -> Verdict {
    let mut exact_ok = true;
    for n_parties in 2..=16usize {
        for n in 1..=n_parties {
            let zeros = vec![Ratio::zero(); stage_count(n, n_parties)];
            let v = worst_case_losing_prob_exact(n, n_parties, &zeros).unwrap();
            exact_ok &= v == Ratio::new(n_parties as i64 - 1, n_parties as i64);
        }
    }
    let mut rng = trial_rng(88, 0);
    let mut holds = 0;
    let instances = 1000;
    for _ in 0..instances {
        let n_parties = rng.gen_range(2..=16usize);
        let n = rng.gen_range(1..=n_parties);
        let cap = 1.0 / n_parties as f64;
        let biases = (0..stage_count(n, n_parties))
            .map(|_| rng.gen_range(0.0..=cap))
            .collect();
        let check = bias_bound_check(n, n_parties, &StageBiasVector::new(biases).unwrap()).unwrap();
        holds += check.holds as usize;
    }
    verdict(
        exact_ok && holds == instances,
        format!("zero-bias identity exact for 2<=N<=16: {exact_ok}; bound holds on {holds}/{instances}"),
    )
}

fn ac9_dice_mc() -> Verdict {
    let trials = 90_000;
    let honest = LadderSpec::honest_ladder(3, qdice::dicer::BALANCED_ETA).unwrap();
    let r = simulate_dice(&honest, &DiceScenario::AllHonest, trials, 1).unwrap();
    let tally = r.monte_carlo.unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for party in 1..=3 {
        let f = tally.frequency(party);
        let (inside, _) = within_3_sigma(f, 1.0 / 3.0, trials);
        ok &= inside;
        parts.push(format!("party {party}: {f:.5}"));
    }
    let case1 = optimize_three_sided(DiceCase::One).unwrap();
    let spec = LadderSpec::three_sided(DiceCase::One, case1.fairness.eta_star).unwrap();
    let coalition = DiceScenario::Coalition {
        honest: 1,
        strategies: StageStrategies::Optimal,
    };
    let r = simulate_dice(&spec, &coalition, trials, 2).unwrap();
    let lose = 1.0 - r.monte_carlo.unwrap().frequency(1);
    let (inside, sigma) = within_3_sigma(lose, 0.848, trials);
    ok &= inside;
    parts.push(format!(
        "coalition vs Alice: loses {lose:.5} vs 0.848 ({:.2} sigma)",
        (lose - 0.848) / sigma
    ));
    verdict(ok, parts.join("; "))
}

fn ac10_determinism() -> Verdict {
    let exe = env!("CARGO_BIN_EXE_qdice");
    let invocations: [&[&str]; 6] = [
        &["simulate", "--p", "0.5", "--eta", "0.2071068", "--cheat", "bob-claim-win", "--trials", "20000", "--seed", "7"],
        &["simulate", "--p", "0.4", "--eta", "0.3", "--cheat", "alice-delta", "--delta", "0.2", "--trials", "20000", "--seed", "9", "--format", "csv"],
        &["simulate", "--dice", "3", "--honest", "--trials", "9000", "--seed", "1"],
        &["simulate", "--dice", "3", "--case", "1", "--honest-party", "1", "--trials", "9000", "--seed", "3"],
        &["cheat", "--p", "0.3333333", "--eta", "0.1465"],
        &["solve", "--target", "dice3-case2"],
    ];
    let mut ok = true;
    for args in invocations {
        let run = || Command::new(exe).args(args).output().expect("spawn qdice");
        let (a, b) = (run(), run());
        ok &= a.status.success() && b.status.success() && a.stdout == b.stdout && !a.stdout.is_empty();
    }
    verdict(ok, format!("{} invocations repeated, reports byte-identical: {ok}", invocations.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("AC-1 balanced fairness", ac1_balanced),
        ("AC-2 three-sided case 1", ac2_case1),
        ("AC-3 three-sided case 2", ac3_case2),
        ("AC-4 oracle equivalence", ac4_oracle_grid),
        ("AC-5 no ancilla/phase advantage", ac5_no_advantage),
        ("AC-6 honest Monte Carlo", ac6_honest_mc),
        ("AC-7 Bob claim-win Monte Carlo", ac7_bob_cheat_mc),
        ("AC-8 composition identities", ac8_composition),
        ("AC-9 dice Monte Carlo", ac9_dice_mc),
        ("AC-10 CLI determinism", ac10_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let v = run();
        println!("[{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as usize;
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
