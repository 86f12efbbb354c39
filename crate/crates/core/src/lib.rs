//! Pulse-train propagators for multistate quantum systems.
//!
//! A train of `N` identical pulses acts on a system as the `N`-th power of the
//! single-pulse propagator. For systems whose dynamics reduce to one or more
//! two-state problems, that power has a closed form in terms of the
//! Cayley-Klein parameters `(a, b)` of the underlying SU(2) propagator:
//!
//! * [`twostate`] solves the single-pulse two-state problem and raises the
//!   resulting SU(2) matrix to the `N`-th power.
//! * [`majorana`] lifts a Cayley-Klein pair to the `M`-state spin-`j`
//!   representation and evaluates `N`-pass propagators two independent ways.
//! * [`morris_shore`] splits a two-manifold coupling matrix into bright pairs
//!   and dark states and assembles the full single- and multi-pass
//!   propagators, including the closed multipod, Λ and tripod forms.
//! * [`oracle`] holds brute-force references (direct ODE integration and
//!   repeated multiplication) that share no code with the formula modules.
//! * [`tomography`] uses the multi-pass relations to amplify and estimate a
//!   small single-pulse rotation error.
//! * [`cli`] is the config-driven front end behind the `pulsetrain` binary.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod majorana;
pub mod morris_shore;
pub mod oracle;
pub mod pulses;
pub mod tomography;
pub mod twostate;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
