//! Central numeric budgets. Every comparison tolerance in the crate is
//! defined here so that a change in one place is a change everywhere.
//!
//! "Exact" anywhere in this crate means equal up to [`EXACT`] in relative
//! terms: all coefficient arithmetic is plain f64 on finite Fourier data, so
//! identities that hold in exact arithmetic are only polluted by rounding.

/// Relative tolerance for identities that are exact in exact arithmetic.
pub const EXACT: f64 = 1e-12;

/// Relative budget for the two-route graded norm cross-check.
pub const NORM_CROSS_CHECK: f64 = 1e-10;

/// Relative residual budget for homological solves, re-applied forward.
pub const SOLVE_RESIDUAL: f64 = 1e-10;

/// Conjugate-symmetry budget for results of arithmetic on real data, where
/// the only pollution is addition order.
pub const REAL_OP: f64 = 1e-12;

/// Conjugate-symmetry budget after a round trip through a complex eigenbasis.
pub const REAL_ROUNDTRIP: f64 = 1e-9;

/// Condition number above which a linear solve is treated as singular.
pub const COND_LIMIT: f64 = 1e12;

/// Truncation budget for the infinite sum defining the convolution constant.
pub const SERIES_TAIL: f64 = 1e-14;

/// Default resonance threshold is this times (1 + spectral radius).
pub const RES_BASE: f64 = 1e-9;

/// Rank decisions (nilpotency index, kernel dimension) use this relative
/// singular value cutoff.
pub const RANK: f64 = 1e-8;

/// Budget for the sampled invariance of the resonant part under the
/// comparison flow.
pub const CRITERIA_SAMPLED: f64 = 1e-9;

/// Budget for the coefficient-level transport identity of the resonant part.
pub const CRITERIA_COEFF: f64 = 1e-10;

/// A negative control (deliberately spoiled input) has to push a criterion
/// residual at least this high, or the criterion has no teeth.
pub const CONTROL_MIN: f64 = 1e-3;

/// Agreement budget between the divisor route and the dense-operator
/// oracle route for the same stage solves.
pub const ORACLE_GAP: f64 = 1e-10;

/// An orbit started on the invariant graph may drift from it by at most
/// this factor times (integration time x certified remainder bound).
pub const DRIFT_FACTOR: f64 = 10.0;

/// Drift budget when the remainder is removed from the transformed system,
/// where the graph is exactly invariant.
pub const ZEROED_DRIFT: f64 = 1e-8;

/// Budget for transporting an orbit of the transformed system through the
/// change of variables and comparing with the original orbit.
pub const PUSHFORWARD: f64 = 1e-6;
