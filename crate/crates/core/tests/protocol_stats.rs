//! Statistical checks of the protocol state machine against the analytic values.

use num_complex::Complex64;

use qdice::adversary::{alice_optimal_value, alice_value_at_delta, bob_optimal_value};
use qdice::dicer::{
    analyze_ladder, simulate_dice, DiceCase, DiceScenario, LadderSpec, StageStrategies,
    BALANCED_ETA,
};
use qdice::wcf::{monte_carlo, CheatSpec, GeneralCheat, ProtocolParams, Tally, Winner};

fn assert_3_sigma(t: &Tally, winner: Winner, target: f64, label: &str) {
    let f = t.frequency(winner);
    let sigma = (target * (1.0 - target) / t.trials as f64).sqrt();
    assert!(
        (f - target).abs() <= 3.0 * sigma,
        "{label}: frequency {f} vs {target} (sigma {sigma})"
    );
}

#[test]
fn honest_distribution_over_a_grid() {
    let grid = [(0.2, 0.1), (0.5, 0.0), (0.5, 0.5), (0.75, 0.2), (0.9, 0.05)];
    for (i, (p, eta)) in grid.into_iter().enumerate() {
        let pr = ProtocolParams::new(p, eta).unwrap();
        let t = monte_carlo(&pr, &CheatSpec::Honest, 100_000, 1000 + i as u64).unwrap();
        assert_eq!(t.aborts, 0, "honest run aborted at p={p} eta={eta}");
        assert_3_sigma(&t, Winner::Alice, 1.0 - p, &format!("p={p} eta={eta}"));
    }
}

#[test]
fn alice_delta_success_rate() {
    for (p, eta, delta) in [(0.5, BALANCED_ETA, 0.3), (1.0 / 3.0, 0.15, 0.08), (0.6, 0.3, 0.9)] {
        let pr = ProtocolParams::new(p, eta).unwrap();
        let t = monte_carlo(&pr, &CheatSpec::AliceDelta { delta }, 100_000, 21).unwrap();
        let want = alice_value_at_delta(&pr, delta).unwrap();
        assert_3_sigma(&t, Winner::Alice, want, &format!("delta={delta}"));
    }
}

#[test]
fn optimal_alice_reaches_closed_form() {
    let pr = ProtocolParams::new(0.5, BALANCED_ETA).unwrap();
    let cv = alice_optimal_value(&pr).unwrap();
    let t = monte_carlo(&pr, &CheatSpec::AliceDelta { delta: cv.delta().unwrap() }, 100_000, 8).unwrap();
    assert_3_sigma(&t, Winner::Alice, cv.value, "optimal delta");
}

#[test]
fn bob_claim_win_rate() {
    for (p, eta) in [(0.5, BALANCED_ETA), (1.0 / 3.0, 1.0 / 3.0), (0.2, 0.0)] {
        let pr = ProtocolParams::new(p, eta).unwrap();
        let t = monte_carlo(&pr, &CheatSpec::BobClaimWin, 100_000, 31).unwrap();
        assert_eq!(t.alice, 0);
        assert_3_sigma(&t, Winner::Bob, bob_optimal_value(&pr).value, &format!("p={p}"));
    }
}

#[test]
fn general_cheat_matches_amplitude_chain() {
    let r = |x: f64| Complex64::new(x, 0.0);
    let alphas = [r(0.3), Complex64::new(0.5, 0.2), r(0.6), r(0.0)];
    let n: f64 = alphas.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let g = GeneralCheat::new(alphas.map(|a| a / n), None).unwrap();
    let pr = ProtocolParams::new(0.4, 0.25).unwrap();
    let want = qdice::adversary::alice_success_probability(&pr, &g.prepared_state().unwrap()).unwrap();
    let t = monte_carlo(&pr, &CheatSpec::AliceGeneral(g), 100_000, 77).unwrap();
    assert_3_sigma(&t, Winner::Alice, want, "general cheat");
    assert!(t.aborts > 0);
}

#[test]
fn two_party_ladder_with_cheating_bob() {
    let spec = LadderSpec::honest_ladder(2, BALANCED_ETA).unwrap();
    let scenario = DiceScenario::Coalition {
        honest: 1,
        strategies: StageStrategies::Explicit(vec![CheatSpec::BobClaimWin]),
    };
    let r = simulate_dice(&spec, &scenario, 100_000, 12).unwrap();
    let t = r.monte_carlo.unwrap();
    let f = t.frequency(2);
    let sigma = (0.7071 * 0.2929 / 1e5f64).sqrt();
    assert!((f - std::f64::consts::FRAC_1_SQRT_2).abs() <= 3.0 * sigma, "{f}");
}

#[test]
fn coalition_frequencies_match_composed_worst_case() {
    // every honest party of both three-party implementations, plus a longer ladder
    let mut specs = Vec::new();
    for case in [DiceCase::One, DiceCase::Two] {
        let eta = qdice::dicer::optimize_three_sided(case).unwrap().fairness.eta_star;
        specs.push(LadderSpec::three_sided(case, eta).unwrap());
    }
    specs.push(LadderSpec::honest_ladder(5, 0.1).unwrap());
    for (k, spec) in specs.iter().enumerate() {
        let analytic = analyze_ladder(spec).unwrap();
        for honest in 1..=spec.n_parties() {
            let scenario = DiceScenario::Coalition {
                honest,
                strategies: StageStrategies::Optimal,
            };
            let r = simulate_dice(spec, &scenario, 60_000, 40 + k as u64).unwrap();
            let t = r.monte_carlo.unwrap();
            let lose = 1.0 - t.frequency(honest);
            let want = analytic.parties[honest - 1].worst_case_losing;
            let sigma = (want * (1.0 - want) / t.trials as f64).sqrt();
            assert!(
                (lose - want).abs() <= 3.0 * sigma,
                "spec {k} honest {honest}: {lose} vs {want}"
            );
        }
    }
}

#[test]
fn honest_ladders_are_uniform() {
    for n in [2, 4, 6] {
        let spec = LadderSpec::honest_ladder(n, 0.05).unwrap();
        let r = simulate_dice(&spec, &DiceScenario::AllHonest, 60_000, n as u64).unwrap();
        let t = r.monte_carlo.unwrap();
        let target = 1.0 / n as f64;
        let sigma = (target * (1.0 - target) / t.trials as f64).sqrt();
        for party in 1..=n {
            assert!((t.frequency(party) - target).abs() <= 3.0 * sigma, "N={n} party {party}");
        }
    }
}
