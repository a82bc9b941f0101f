//! Polynomial uncoupling and periodic normal forms for time-periodic
//! analytic vector fields, with certified remainder bounds.
//!
//! Given du/dt = L u + V(u, t) with V at least quadratic at the origin and
//! T-periodic in t, this crate constructs two polynomial changes of
//! variables with explicit, machine-checked error control:
//!
//! - **Uncoupling**: when the linear part splits as L = L0 ⊕ L1 over a
//!   product decomposition u = (u0, u1) and a non-resonance condition holds
//!   between the two spectra, the substitution u1 = v1 + Φ(u0, t) removes
//!   the coupling from the u1-equation up to a remainder whose norm decays
//!   like exp(-ω/δ^b) on the δ-ball.
//! - **Normal form**: for the full system, u = y + Φ(y, t) reduces the
//!   nonlinearity to its resonant part, again with an exponentially small
//!   remainder.
//!
//! Every degree of the construction is solved exactly (finite Fourier data,
//! complex LU per mode), every inequality used by the certified bounds is
//! re-checked numerically on the computed objects, and a slower dense
//! linear-algebra oracle re-derives the low-degree answers independently.
//!
//! The `examples/` directory is the main interface: one runnable program
//! per capability (non-resonance certification, uncoupling, normal form on
//! a Hopf-type system, δ-sweeps of the remainder bound, constant tables,
//! slow-manifold drift checks). A thin `perinorm` binary exposes the same
//! entry points over JSON job files for scripted runs.

pub mod algebra;
pub mod error;
pub mod homological;
pub mod job;
pub mod linalg;
pub mod normalform;
pub mod norms;
pub mod report;
pub mod spectrum;
pub mod tol;
pub mod uncouple;
pub mod verify;

pub use error::{Error, Result};
