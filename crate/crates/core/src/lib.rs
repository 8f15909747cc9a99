//! Certified region-of-attraction analysis for perturbed nonlinear control
//! systems under state feedback `u = −Kx`.
//!
//! Given a polynomial field `ẋ = f(x, u) + w(x, t)` with a disturbance bound
//! `|w| <= σ|x| + c·e^{γ(t−t0)}`, the toolkit
//!
//! 1. synthesizes `K` by single-input pole placement (or validates a supplied
//!    gain),
//! 2. checks the stabilizability condition `λ_m < −η(Γ₀(1+‖K‖) + σ)` built
//!    from the closed-loop spectrum and the conditioning of its eigenbasis,
//! 3. certifies a ball of radius `δ` inside the region of attraction along
//!    with an exponential decay envelope, and
//! 4. validates the certificate by simulating perturbed trajectories against
//!    that envelope.
//!
//! Module map: [`sysmodel`] holds the field/disturbance types and exact
//! Jacobians, [`linalg`] the dense factorizations, [`synthesis`] the gain
//! design, [`certifier`] the certificate chain, [`gronwall`] a numerical
//! checker for the integral inequality behind the envelope, [`simulator`]
//! the RK4 validator and sweeps, [`report`] the output documents, and
//! [`scenarios`] the bundled demonstration system.

// Parameter validation uses `!(x > 0.0)`-style comparisons on purpose: the
// negated form also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certifier;
pub mod error;
pub mod gronwall;
pub mod linalg;
pub mod report;
pub mod scenarios;
pub mod simulator;
pub mod synthesis;
pub mod sysmodel;

pub use error::{Error, Result};

pub use nalgebra;
