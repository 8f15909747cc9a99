//! Controllability checks and gain synthesis.
//!
//! Single-input gains come from Ackermann's formula
//! `K = e_nᵀ 𝒞⁻¹ p_des(A)` with `𝒞 = [B, AB, …, A^{n−1}B]` and `p_des` the
//! desired characteristic polynomial. Multi-input systems must supply their
//! own gain, which [`adopt_gain`] validates.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenDecomposition};
use crate::sysmodel::{self, SystemDefinition};

/// Default relative tolerance for the controllability rank test.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// A synthesized (or adopted) state-feedback gain together with everything
/// the certifier needs about the closed loop.
#[derive(Debug, Clone)]
pub struct GainSynthesis {
    /// Gain `K` (m x n); the control law is `u = −Kx`.
    pub k: DMatrix<f64>,
    /// Closed-loop matrix `A − BK`.
    pub a_cl: DMatrix<f64>,
    /// Computed closed-loop spectrum, in the decomposition's block order.
    pub spectrum: Vec<Complex<f64>>,
    /// Largest real part of the spectrum (strictly negative).
    pub lambda_m: f64,
    /// Real modal decomposition of `A_cl`.
    pub decomp: EigenDecomposition,
    /// Basis condition number `||T||·||T⁻¹||`.
    pub eta: f64,
}

impl GainSynthesis {
    /// Induced 2-norm of the gain.
    pub fn k_norm(&self) -> f64 {
        linalg::spectral_norm(&self.k)
    }

    fn from_closed_loop(k: DMatrix<f64>, a_cl: DMatrix<f64>) -> Result<Self> {
        let decomp = linalg::eigendecompose(&a_cl)?;
        let lambda_m = decomp.max_real_part();
        if !(lambda_m < 0.0) {
            return Err(Error::UnstableClosedLoop { lambda_m });
        }
        let eta = linalg::eta_condition(&decomp);
        Ok(Self {
            k,
            a_cl,
            spectrum: decomp.eigenvalues.clone(),
            lambda_m,
            decomp,
            eta,
        })
    }
}

/// Block matrix `[B, AB, A²B, …, A^{n−1}B]` (n x n·m).
pub fn controllability_matrix(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = b.ncols();
    assert_eq!(a.ncols(), n, "A must be square");
    assert_eq!(b.nrows(), n, "B must have n rows");
    let mut ctrb = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        ctrb.view_mut((0, i * m), (n, m)).copy_from(&block);
        if i + 1 < n {
            block = a * block;
        }
    }
    ctrb
}

/// Rank test on the controllability matrix.
pub fn is_controllable(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
    linalg::numerical_rank(&controllability_matrix(a, b), tol) == a.nrows()
}

/// Coefficients (ascending, monic) of `Π (s − λ_i)`; the roots must be closed
/// under conjugation so the coefficients are real.
fn real_characteristic_polynomial(roots: &[Complex<f64>]) -> Result<Vec<f64>> {
    let mut coeffs: Vec<Complex<f64>> = vec![Complex::new(1.0, 0.0)];
    for root in roots {
        let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * root;
        }
        coeffs = next;
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(1.0_f64, f64::max);
    let mut real = Vec::with_capacity(coeffs.len());
    for c in &coeffs {
        if c.im.abs() > 1e-9 * scale {
            return Err(Error::InvalidDefinition(
                "requested spectrum is not closed under conjugation".into(),
            ));
        }
        real.push(c.re);
    }
    Ok(real)
}

/// Horner evaluation of a monic polynomial at a matrix argument.
fn polynomial_of_matrix(a: &DMatrix<f64>, coeffs: &[f64]) -> DMatrix<f64> {
    let n = a.nrows();
    let mut p = DMatrix::identity(n, n) * coeffs[coeffs.len() - 1];
    for &c in coeffs.iter().rev().skip(1) {
        p = p * a + DMatrix::identity(n, n) * c;
    }
    p
}

/// Greedy nearest assignment between the computed and requested spectra;
/// returns the worst matched distance.
fn spectrum_assignment_error(computed: &[Complex<f64>], requested: &[Complex<f64>]) -> f64 {
    let mut used = vec![false; computed.len()];
    let mut worst = 0.0_f64;
    for want in requested {
        let mut best: Option<(usize, f64)> = None;
        for (j, got) in computed.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (got - want).norm();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.expect("spectra have equal length");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Single-input pole placement via Ackermann's formula.
pub fn place_poles(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    desired: &[Complex<f64>],
) -> Result<GainSynthesis> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "A must be square");
    assert_eq!(b.nrows(), n, "B must have n rows");
    if b.ncols() != 1 {
        return Err(Error::MultiInput { m: b.ncols() });
    }
    if desired.len() != n {
        return Err(Error::DimensionMismatch {
            context: "desired eigenvalues",
            expected: n,
            got: desired.len(),
        });
    }
    sysmodel::validate_spectrum(desired)?;

    let ctrb = controllability_matrix(a, b);
    let rank = linalg::numerical_rank(&ctrb, DEFAULT_RANK_TOL);
    if rank != n {
        return Err(Error::Uncontrollable { rank, n });
    }

    let coeffs = real_characteristic_polynomial(desired)?;
    let p_of_a = polynomial_of_matrix(a, &coeffs);

    // Row vector e_nᵀ 𝒞⁻¹ obtained from 𝒞ᵀ y = e_n.
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    let y = ctrb
        .transpose()
        .lu()
        .solve(&e_n)
        .ok_or(Error::Uncontrollable { rank, n })?;
    let k_row = y.transpose() * p_of_a;
    let k = DMatrix::from_row_slice(1, n, k_row.as_slice());

    let a_cl = a - b * &k;
    let synth = GainSynthesis::from_closed_loop(k, a_cl)?;

    let mismatch = spectrum_assignment_error(&synth.spectrum, desired);
    if mismatch > 1e-6 {
        return Err(Error::PlacementFailed { mismatch });
    }
    Ok(synth)
}

/// Validate an externally supplied gain: the closed loop must be stable with
/// pairwise distinct eigenvalues.
pub fn adopt_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k_given: &DMatrix<f64>,
) -> Result<GainSynthesis> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "A must be square");
    if k_given.nrows() != b.ncols() || k_given.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "gain matrix",
            expected: b.ncols() * n,
            got: k_given.nrows() * k_given.ncols(),
        });
    }
    let a_cl = a - b * k_given;
    GainSynthesis::from_closed_loop(k_given.clone(), a_cl)
}

/// Dispatch on the system definition: adopt the override if present, else
/// place the requested poles (single-input only).
pub fn synthesize(system: &SystemDefinition) -> Result<GainSynthesis> {
    let (a, b) = system.field.jacobians_at_origin();
    match &system.gain_override {
        Some(k) => adopt_gain(&a, &b, k),
        None => place_poles(&a, &b, &system.desired_eigenvalues),
    }
}
