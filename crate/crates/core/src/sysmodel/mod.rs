//! System models: polynomial vector fields `f(x, u)`, the admissible
//! disturbance class with its catalog of concrete realizations, and the
//! closed-loop dynamics `f(x, −Kx) + w(x, t)`.
//!
//! Fields are restricted to polynomials so Jacobians and Taylor remainders
//! are exact; constant terms are rejected at construction, which enforces
//! `f(0, 0) = 0` structurally.

mod poly;
pub mod schema;

pub use poly::ClosedLoopRemainder;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// A single monomial `coefficient · Π x_i^{a_i} · Π u_j^{b_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialTerm {
    pub coefficient: f64,
    pub x_exponents: Vec<u32>,
    pub u_exponents: Vec<u32>,
}

impl PolynomialTerm {
    pub fn new(coefficient: f64, x_exponents: Vec<u32>, u_exponents: Vec<u32>) -> Self {
        Self {
            coefficient,
            x_exponents,
            u_exponents,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.x_exponents.iter().sum::<u32>() + self.u_exponents.iter().sum::<u32>()
    }

    fn evaluate(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let mut v = self.coefficient;
        for (xi, &e) in x.iter().zip(&self.x_exponents) {
            if e > 0 {
                v *= xi.powi(e as i32);
            }
        }
        for (uj, &e) in u.iter().zip(&self.u_exponents) {
            if e > 0 {
                v *= uj.powi(e as i32);
            }
        }
        v
    }
}

/// Polynomial vector field `f: R^n x R^m -> R^n` stored as monomial lists
/// per component. Degree-0 terms are forbidden, so `f(0, 0) = 0` always.
#[derive(Debug, Clone)]
pub struct PolynomialVectorField {
    n: usize,
    m: usize,
    components: Vec<Vec<PolynomialTerm>>,
}

impl PolynomialVectorField {
    pub fn new(n: usize, m: usize, components: Vec<Vec<PolynomialTerm>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDefinition(
                "state dimension n must be positive".into(),
            ));
        }
        if m == 0 {
            return Err(Error::InvalidDefinition(
                "input dimension m must be positive".into(),
            ));
        }
        if components.len() != n {
            return Err(Error::DimensionMismatch {
                context: "field components",
                expected: n,
                got: components.len(),
            });
        }
        for (i, comp) in components.iter().enumerate() {
            for term in comp {
                if term.x_exponents.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: "x_exponents",
                        expected: n,
                        got: term.x_exponents.len(),
                    });
                }
                if term.u_exponents.len() != m {
                    return Err(Error::DimensionMismatch {
                        context: "u_exponents",
                        expected: m,
                        got: term.u_exponents.len(),
                    });
                }
                if term.total_degree() == 0 {
                    return Err(Error::InvalidDefinition(format!(
                        "component {i} has a constant (degree-0) term; \
                         constant terms are forbidden since f(0,0) must vanish"
                    )));
                }
                if !term.coefficient.is_finite() {
                    return Err(Error::InvalidDefinition(format!(
                        "component {i} has a non-finite coefficient {}",
                        term.coefficient
                    )));
                }
            }
        }
        Ok(Self { n, m, components })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn components(&self) -> &[Vec<PolynomialTerm>] {
        &self.components
    }

    /// Exact evaluation of `f(x, u)`.
    pub fn evaluate(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dims(x, u)?;
        let mut out = DVector::zeros(self.n);
        self.evaluate_into(x, u, &mut out);
        Ok(out)
    }

    pub(crate) fn evaluate_into(&self, x: &DVector<f64>, u: &DVector<f64>, out: &mut DVector<f64>) {
        for (i, comp) in self.components.iter().enumerate() {
            out[i] = comp.iter().map(|t| t.evaluate(x, u)).sum();
        }
    }

    /// Exact Jacobians `(A, B)` of `f` at the origin: `A` collects the
    /// coefficients of degree-1 pure-state terms, `B` those of degree-1
    /// pure-input terms. No finite differencing is involved.
    pub fn jacobians_at_origin(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = DMatrix::zeros(self.n, self.n);
        let mut b = DMatrix::zeros(self.n, self.m);
        for (i, comp) in self.components.iter().enumerate() {
            for term in comp {
                if term.total_degree() != 1 {
                    continue;
                }
                if let Some(j) = term.x_exponents.iter().position(|&e| e == 1) {
                    a[(i, j)] += term.coefficient;
                } else if let Some(j) = term.u_exponents.iter().position(|&e| e == 1) {
                    b[(i, j)] += term.coefficient;
                }
            }
        }
        (a, b)
    }

    fn check_dims(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: self.n,
                got: x.len(),
            });
        }
        if u.len() != self.m {
            return Err(Error::DimensionMismatch {
                context: "input vector",
                expected: self.m,
                got: u.len(),
            });
        }
        Ok(())
    }
}

/// Closed-loop derivative `f(x, −Kx) + w(x, t)`.
pub fn closed_loop_derivative(
    field: &PolynomialVectorField,
    gain: &DMatrix<f64>,
    perturbation: &PerturbationSpec,
    t: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    if gain.nrows() != field.m() || gain.ncols() != field.n() {
        return Err(Error::DimensionMismatch {
            context: "gain matrix",
            expected: field.m() * field.n(),
            got: gain.nrows() * gain.ncols(),
        });
    }
    if x.len() != field.n() {
        return Err(Error::DimensionMismatch {
            context: "state vector",
            expected: field.n(),
            got: x.len(),
        });
    }
    let mut u = DVector::zeros(field.m());
    let mut out = DVector::zeros(field.n());
    let mut w = DVector::zeros(field.n());
    closed_loop_derivative_into(field, gain, perturbation, t, x, &mut u, &mut w, &mut out);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn closed_loop_derivative_into(
    field: &PolynomialVectorField,
    gain: &DMatrix<f64>,
    perturbation: &PerturbationSpec,
    t: f64,
    x: &DVector<f64>,
    u_buf: &mut DVector<f64>,
    w_buf: &mut DVector<f64>,
    out: &mut DVector<f64>,
) {
    u_buf.gemv(-1.0, gain, x, 0.0);
    field.evaluate_into(x, u_buf, out);
    perturbation.disturbance_into(x, t, w_buf);
    *out += &*w_buf;
}

/// Taylor remainder of the closed loop at the origin: every term of
/// `f(x, −Kx)` with total degree >= 2 in `x`. Computed by exact polynomial
/// substitution, equal to `f(x, −Kx) − (A − BK)x`.
pub fn remainder_evaluate(
    field: &PolynomialVectorField,
    gain: &DMatrix<f64>,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let rem = ClosedLoopRemainder::expand(field, gain)?;
    rem.evaluate(x)
}

/// Bounded shape `φ(x, t)` (with `|φ| <= 1`) selecting how the disturbance
/// envelope is realized as a concrete vector signal.
///
/// The catalog is closed so the bound `|w| <= σ|x| + c·e^{γ(t−t0)}` is true
/// by construction for every realization.
#[derive(Debug, Clone, PartialEq)]
pub enum Phase {
    /// `w ≡ 0`.
    Zero,
    /// `w(x, t) = (σ|x| + c·e^{γ(t−t0)}) · d` for a fixed unit vector `d`.
    ConstantDirection { direction: DVector<f64> },
    /// Component `component` receives `(σ|x| + c·e^{γ(t−t0)}) · cos(wᵀx)`,
    /// all other components are zero.
    CosineLinearForm {
        weights: DVector<f64>,
        component: usize,
    },
}

/// Admissible disturbance class `|w(x, t)| <= σ|x| + c·e^{γ(t−t0)}` together
/// with one concrete realization for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSpec {
    pub sigma: f64,
    pub c: f64,
    pub gamma: f64,
    pub t0: f64,
    pub phase: Phase,
}

impl PerturbationSpec {
    pub fn new(sigma: f64, c: f64, gamma: f64, t0: f64, phase: Phase) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be finite and >= 0, got {sigma}"
            )));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "c must be finite and >= 0, got {c}"
            )));
        }
        if !(gamma < 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma must be finite and < 0, got {gamma}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "t0 must be finite, got {t0}"
            )));
        }
        let phase = match phase {
            Phase::ConstantDirection { direction } => {
                let norm = direction.norm();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(Error::InvalidParameter(
                        "constant_direction phase needs a nonzero finite direction".into(),
                    ));
                }
                Phase::ConstantDirection {
                    direction: direction / norm,
                }
            }
            other => other,
        };
        Ok(Self {
            sigma,
            c,
            gamma,
            t0,
            phase,
        })
    }

    /// The class with `w ≡ 0` (used for unperturbed runs).
    pub fn none() -> Self {
        Self {
            sigma: 0.0,
            c: 0.0,
            gamma: -1.0,
            t0: 0.0,
            phase: Phase::Zero,
        }
    }

    /// Envelope value `σ|x| + c·e^{γ(t−t0)}`.
    pub fn envelope_bound(&self, x_norm: f64, t: f64) -> f64 {
        self.sigma * x_norm + self.c * (self.gamma * (t - self.t0)).exp()
    }

    /// Realized disturbance `w(x, t)`.
    pub fn disturbance(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        self.disturbance_into(x, t, &mut out);
        out
    }

    pub(crate) fn disturbance_into(&self, x: &DVector<f64>, t: f64, out: &mut DVector<f64>) {
        match &self.phase {
            Phase::Zero => out.fill(0.0),
            Phase::ConstantDirection { direction } => {
                let mag = self.envelope_bound(x.norm(), t);
                out.copy_from(direction);
                *out *= mag;
            }
            Phase::CosineLinearForm { weights, component } => {
                out.fill(0.0);
                let mag = self.envelope_bound(x.norm(), t);
                out[*component] = mag * weights.dot(x).cos();
            }
        }
    }

    fn validate_dims(&self, n: usize) -> Result<()> {
        match &self.phase {
            Phase::Zero => Ok(()),
            Phase::ConstantDirection { direction } => {
                if direction.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: "phase direction",
                        expected: n,
                        got: direction.len(),
                    });
                }
                Ok(())
            }
            Phase::CosineLinearForm { weights, component } => {
                if weights.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: "phase weights",
                        expected: n,
                        got: weights.len(),
                    });
                }
                if *component >= n {
                    return Err(Error::InvalidDefinition(format!(
                        "phase component index {component} out of range for n = {n}"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Validate a requested closed-loop spectrum: pairwise distinct, closed under
/// conjugation, every real part strictly negative.
pub fn validate_spectrum(values: &[Complex<f64>]) -> Result<()> {
    let scale = values.iter().map(|l| l.norm()).fold(1.0_f64, f64::max);
    let tol = 1e-9 * scale;

    for (i, l) in values.iter().enumerate() {
        if !l.re.is_finite() || !l.im.is_finite() {
            return Err(Error::InvalidDefinition(format!(
                "desired eigenvalue {l} is not finite"
            )));
        }
        if !(l.re < 0.0) {
            return Err(Error::InvalidDefinition(format!(
                "desired eigenvalue {l} has nonnegative real part"
            )));
        }
        for other in values.iter().skip(i + 1) {
            if (l - other).norm() <= tol {
                return Err(Error::InvalidDefinition(format!(
                    "desired eigenvalues must be pairwise distinct; {l} repeats"
                )));
            }
        }
    }
    // Conjugate closure: match each strictly-complex value with an unused partner.
    let mut used = vec![false; values.len()];
    for (i, l) in values.iter().enumerate() {
        if used[i] || l.im == 0.0 {
            continue;
        }
        let conj = l.conj();
        let partner = values
            .iter()
            .enumerate()
            .find(|(j, cand)| !used[*j] && *j != i && (*cand - conj).norm() <= tol);
        match partner {
            Some((j, _)) => {
                used[i] = true;
                used[j] = true;
            }
            None => {
                return Err(Error::InvalidDefinition(format!(
                    "desired eigenvalue {l} lacks its conjugate partner"
                )));
            }
        }
    }
    Ok(())
}

/// A complete problem statement: the field, the disturbance class, the
/// requested closed-loop spectrum, and an optional externally supplied gain
/// (the only route for multi-input systems).
#[derive(Debug, Clone)]
pub struct SystemDefinition {
    pub field: PolynomialVectorField,
    pub perturbation: PerturbationSpec,
    pub desired_eigenvalues: Vec<Complex<f64>>,
    pub gain_override: Option<DMatrix<f64>>,
}

impl SystemDefinition {
    pub fn new(
        field: PolynomialVectorField,
        perturbation: PerturbationSpec,
        desired_eigenvalues: Vec<Complex<f64>>,
        gain_override: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        perturbation.validate_dims(field.n())?;
        if desired_eigenvalues.len() != field.n() {
            return Err(Error::DimensionMismatch {
                context: "desired eigenvalues",
                expected: field.n(),
                got: desired_eigenvalues.len(),
            });
        }
        validate_spectrum(&desired_eigenvalues)?;
        if let Some(k) = &gain_override {
            if k.nrows() != field.m() || k.ncols() != field.n() {
                return Err(Error::InvalidDefinition(format!(
                    "gain_override must be {}x{}, got {}x{}",
                    field.m(),
                    field.n(),
                    k.nrows(),
                    k.ncols()
                )));
            }
            if k.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDefinition(
                    "gain_override has non-finite entries".into(),
                ));
            }
        }
        Ok(Self {
            field,
            perturbation,
            desired_eigenvalues,
            gain_override,
        })
    }

    pub fn n(&self) -> usize {
        self.field.n()
    }

    pub fn m(&self) -> usize {
        self.field.m()
    }
}
