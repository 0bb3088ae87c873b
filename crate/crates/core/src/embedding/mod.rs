//! Exact Sobolev index bookkeeping for the admissibility conditions of the
//! coefficient and source identification problems.
//!
//! All arithmetic is rational. Indices `p ∈ [1, ∞]` are handled through their
//! reciprocals, which turns every condition into an affine inequality and lets
//! [`feasible`] decide existence of auxiliary indices exactly.

mod bundles;
mod corollary;
pub mod feasible;
mod query;
pub mod xrat;

pub use bundles::{
    check, check_aprob, check_cprob, check_cubic, check_log, check_nonlinear_source, qhat, qhat_max, ConditionRecord, QHat,
    Verdict,
};
pub use corollary::{corollary_q_range, QRange};
pub use query::{IndexQuery, Problem, SourceCase};
pub use xrat::{dual_index, succeq, Rational, XRat};
