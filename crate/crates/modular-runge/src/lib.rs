//! Explicit Runge-method data on modular curves.
//!
//! For a level `N > 2` and a subgroup `G` of `GL2(Z/NZ)` containing `-I`, this
//! crate computes the invariants of the modular curve `X_G` (degree `mu`, genus,
//! cusps with widths, elliptic point counts), exact q-expansions of the weight-1
//! Eisenstein series `E_alpha`, an integral basis of the space `M_{12m,G}` of
//! modular forms with certified coefficient bounds, a nonconstant function
//! `phi = f / Delta^m` regular on a chosen Galois-stable cusp set `Sigma`, and
//! the fully explicit height bound
//!
//! ```text
//!   h(j(P)) <= mu * log(beta * C') + log 3500 <= 4 (mu + 4)^4 log N <= N^12 log N
//! ```
//!
//! for `S`-integral points `P` when `|S|` is smaller than the number of Galois
//! orbits of cusps.  Every inequality that enters the chain is re-verified at
//! run time by an independent oracle: exact combinatorial sums, certified
//! interval arithmetic with outward rounding, and brute-force series expansion.
//!
//! All arithmetic on the exact path is over `Q` and `Q(zeta_N)`; floating point
//! appears only in the numerical transformation oracle for Eisenstein series,
//! which is itself a consistency check and feeds nothing downstream.

pub mod arith;
pub mod bounds;
pub mod cli;
pub mod congruence;
pub mod cyclotomic;
pub mod eisenstein;
pub mod interval;
pub mod linalg;
pub mod modform;
pub mod qexp;
pub mod siegel;

use thiserror::Error;

/// Worker count for the parallel inner loops (group-element sums in the trace
/// products).  `MODULAR_RUNGE_THREADS` overrides the detected parallelism; the
/// value is read once per process.  All parallel reductions are over exact
/// rational arithmetic, so the result is independent of the thread count.
pub fn thread_count() -> usize {
    static COUNT: std::sync::OnceLock<usize> = std::sync::OnceLock::new();
    *COUNT.get_or_init(|| {
        std::env::var("MODULAR_RUNGE_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&c| c >= 1)
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(std::num::NonZeroUsize::get)
                    .unwrap_or(1)
            })
    })
}

/// Errors shared across the crate.  Message wording for precision and
/// separation failures is part of the public contract: callers match on it to
/// decide whether to retry at higher precision.
#[derive(Debug, Error)]
pub enum Error {
    #[error("level mismatch: {0} vs {1}")]
    LevelMismatch(u64, u64),
    #[error("division by zero in Q(zeta_N)")]
    DivisionByZero,
    #[error("{0} is not a unit modulo {1}")]
    NotAUnit(u64, u64),
    #[error("vanishing order undetermined at this precision")]
    Undetermined,
    #[error("values do not separate cusps")]
    NotSeparating,
    #[error("dimension not reached: candidate stream exhausted at rank {got} of {want}")]
    DimensionNotReached { got: usize, want: usize },
    #[error("expansion exponents violate the q_w grid at width {width}")]
    GridViolation { width: u64 },
    #[error("precision shortfall: need exponent {need} but expansion stops at {have}")]
    PrecisionShortfall { need: i64, have: i64 },
    #[error("no admissible kernel vector within the Siegel bound")]
    NoAdmissibleVector,
    #[error("invalid Sigma: {0}")]
    SigmaInvalid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
