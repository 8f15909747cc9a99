//! Bundled demonstration scenario used by the CLI's `example1` command and
//! throughout the test suites: a planar single-input system with a cubic
//! drift nonlinearity and a decaying cosine disturbance on the second state,
//!
//! ```text
//! ẋ1 = x1³ + x2²·u1 + x2
//! ẋ2 = u1 + w2(x, t),   w2 = 0.001·e^{−10 t}·cos(x1 + x2)
//! ```
//!
//! with requested closed-loop eigenvalues {−0.5, −0.75}.

use nalgebra::{Complex, DVector};

use crate::certifier::{remainder_bound_manual, RemainderModel};
use crate::sysmodel::{
    PerturbationSpec, Phase, PolynomialTerm, PolynomialVectorField, SystemDefinition,
};

/// Initial state used by the bundled simulation scenario.
pub const EXAMPLE1_X0: [f64; 2] = [6.0e-4, 5.0e-4];

/// The bundled system definition.
pub fn example1() -> SystemDefinition {
    let field = PolynomialVectorField::new(
        2,
        1,
        vec![
            vec![
                PolynomialTerm::new(1.0, vec![3, 0], vec![0]),
                PolynomialTerm::new(1.0, vec![0, 2], vec![1]),
                PolynomialTerm::new(1.0, vec![0, 1], vec![0]),
            ],
            vec![PolynomialTerm::new(1.0, vec![0, 0], vec![1])],
        ],
    )
    .expect("bundled field is valid");

    let perturbation = PerturbationSpec::new(
        0.0,
        0.001,
        -10.0,
        0.0,
        Phase::CosineLinearForm {
            weights: DVector::from_vec(vec![1.0, 1.0]),
            component: 1,
        },
    )
    .expect("bundled perturbation is valid");

    SystemDefinition::new(
        field,
        perturbation,
        vec![Complex::new(-0.5, 0.0), Complex::new(-0.75, 0.0)],
        None,
    )
    .expect("bundled definition is valid")
}

/// Hand-derived remainder bound for the bundled field under a gain of norm
/// `k_norm`: second-order partials give `|R₁| <= (max{3, ||K||} + ||K||)·|x|³`.
pub fn example1_manual_remainder(k_norm: f64) -> RemainderModel {
    remainder_bound_manual(3.0_f64.max(k_norm) + k_norm, 3.0)
        .expect("bundled remainder bound is valid")
}
