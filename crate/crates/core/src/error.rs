use thiserror::Error;

use crate::equilibrium::BiasCurve;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "quadrature did not converge on [{lo}, {hi}]: last estimate {estimate:e}, \
         change {change:e} after {levels} levels ({evaluations} evaluations)"
    )]
    Quadrature {
        lo: f64,
        hi: f64,
        estimate: f64,
        change: f64,
        levels: u32,
        evaluations: usize,
    },

    /// Anecdotes spread wider than the noise support allows.
    #[error("empty posterior support: spread {spread} exceeds support width {width}")]
    EmptyPosterior { spread: f64, width: f64 },

    #[error(
        "no sign change of H(r) + delta on [{lo}, {hi}] after {expansions} expansions \
         (values {value_lo:.6} at lo, {value_hi:.6} at hi)"
    )]
    Bracket {
        lo: f64,
        hi: f64,
        value_lo: f64,
        value_hi: f64,
        expansions: u32,
    },

    /// The bracket endpoints disagree with a decreasing H beyond noise.
    #[error("H(r) + delta is not decreasing across [{lo}, {hi}] beyond 3 standard errors")]
    NonMonotone { lo: f64, hi: f64, curve: BiasCurve },
}
