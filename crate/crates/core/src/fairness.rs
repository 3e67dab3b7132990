//! Fairness conditions and the bisection solver shared by the dice-rolling
//! optimizations.

use serde::{Deserialize, Serialize};

use crate::adversary::{alice_optimal_value, bob_optimal_value};
use crate::error::{Error, Result};
use crate::wcf::ProtocolParams;

/// Default brackets containing the three known solutions.
pub const BALANCED_BRACKET: (f64, f64) = (0.0, 0.5);
pub const CASE1_BRACKET: (f64, f64) = (0.10, 0.20);
pub const CASE2_BRACKET: (f64, f64) = (0.15, 0.25);

/// Tolerance used for every fairness solve.
pub const SOLVE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bisection {
    pub root: f64,
    pub iterations: usize,
}

/// Bisection on `[lo, hi]`; stops once `|f(x)| ≤ tol` or the bracket is
/// narrower than `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Bisection> {
    if !(tol > 0.0) || !(lo <= hi) {
        return Err(Error::Domain(format!(
            "invalid bisection setup: [{lo}, {hi}], tol {tol}"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    let (mut f_lo, f_hi) = (f(lo), f(hi));
    if f_lo == 0.0 {
        return Ok(Bisection { root: lo, iterations: 0 });
    }
    if f_hi == 0.0 {
        return Ok(Bisection { root: hi, iterations: 0 });
    }
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::Bracketing { lo, hi, f_lo, f_hi });
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid.abs() <= tol || hi - lo <= tol || mid == lo || mid == hi {
            return Ok(Bisection { root: mid, iterations });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

pub fn find_root<F: Fn(f64) -> f64>(f: F, bracket: (f64, f64), tol: f64) -> Result<f64> {
    bisect(f, bracket.0, bracket.1, tol).map(|b| b.root)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessSolution {
    pub eta_star: f64,
    /// `(P_A*, P_B*)` for the two-party problem, or the two sides of the
    /// fairness constraint for the dice problems.
    pub achieved_values: (f64, f64),
    pub residual: f64,
}

/// `P_A*(½, η) − P_B*(½, η)`.
pub fn balanced_residual(eta: f64) -> f64 {
    let pr = ProtocolParams::new(0.5, eta).expect("eta within [0, 1/2]");
    alice_optimal_value(&pr).expect("p < 1").value - bob_optimal_value(&pr).value
}

pub fn solve_balanced() -> Result<FairnessSolution> {
    solve_balanced_in(BALANCED_BRACKET)
}

pub fn solve_balanced_in(bracket: (f64, f64)) -> Result<FairnessSolution> {
    if bracket.0 < 0.0 || bracket.1 > 0.5 {
        return Err(Error::Domain(format!(
            "balanced bracket {bracket:?} leaves [0, 1/2]"
        )));
    }
    let eta = find_root(balanced_residual, bracket, SOLVE_TOL)?;
    let pr = ProtocolParams::new(0.5, eta)?;
    let pa = alice_optimal_value(&pr)?.value;
    let pb = bob_optimal_value(&pr).value;
    Ok(FairnessSolution {
        eta_star: eta,
        achieved_values: (pa, pb),
        residual: (pa - pb).abs(),
    })
}
