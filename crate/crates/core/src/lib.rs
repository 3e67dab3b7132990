//! Simulation and bias analysis for quantum weak imbalanced coin flipping
//! and N-sided quantum dice rolling.
//!
//! * [`qsim`]: dense state vectors for the three-qubit protocol register.
//! * [`wcf`]: the three-round coin flip as a two-party state machine.
//! * [`adversary`]: optimal cheating values and a brute-force oracle.
//! * [`fairness`]: bisection and the balanced fairness condition.
//! * [`dicer`]: ladder composition, bias bounds and the three-party protocol.
//! * [`cli`]: the `qdice` command-line front end and its report schema.

pub mod adversary;
pub mod cli;
pub mod dicer;
pub mod error;
pub mod fairness;
pub mod qsim;
pub mod wcf;

pub use error::{Error, Result};
