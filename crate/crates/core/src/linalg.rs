//! Dense real linear algebra used by synthesis and certification: the
//! induced 2-norm, eigendecomposition of general real matrices into a real
//! modal basis, and numerical rank.
//!
//! Eigenvalues come from the real Schur form; eigenvectors are recovered as
//! SVD null vectors of the shifted matrix, so only real factorizations are
//! used even for complex spectra (a conjugate pair is stored as the real and
//! imaginary columns of its eigenvector).

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue gap under which a spectrum counts as coalesced.
pub const EIGEN_GAP_REL: f64 = 1e-8;

/// Allowed reconstruction residual `||T L T^-1 - M||`, relative to `||M||`.
const RECONSTRUCT_REL: f64 = 1e-8;

/// Largest singular value: the matrix norm induced by the Euclidean vector norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().copied().fold(0.0, f64::max)
}

/// Number of singular values exceeding `tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    assert!(tol > 0.0, "rank tolerance must be positive");
    let svd = m.clone().svd(false, false);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.singular_values
        .iter()
        .filter(|&&s| s > tol * max_sv)
        .count()
}

/// One diagonal block of the realified spectral form.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralBlock {
    /// 1x1 block: a real eigenvalue occupying column `col` of the basis.
    Real { col: usize, lambda: f64 },
    /// 2x2 block at columns `col`, `col + 1` for the pair `re ± i·im` (`im > 0`).
    /// The block reads `[[re, im], [-im, re]]`.
    ComplexPair { col: usize, re: f64, im: f64 },
}

/// Real modal decomposition `M = T · Λ · T⁻¹` with `Λ` block diagonal
/// (1x1 real blocks and 2x2 complex-pair blocks).
///
/// Every eigenvector column is normalized to unit Euclidean norm; for a
/// complex pair the *complex* eigenvector has unit norm before it is split
/// into its real and imaginary columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues in block order; a pair contributes `re + i·im` then `re − i·im`.
    pub eigenvalues: Vec<Complex<f64>>,
    /// Modal basis `T` (columns are eigenvectors / pair columns).
    pub basis: DMatrix<f64>,
    /// Cached inverse of `T`.
    pub basis_inv: DMatrix<f64>,
    /// Block layout of the realified diagonal.
    pub blocks: Vec<SpectralBlock>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// The block-diagonal realification of `diag(λ_i)`.
    pub fn lambda_real(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut lam = DMatrix::zeros(n, n);
        for block in &self.blocks {
            match *block {
                SpectralBlock::Real { col, lambda } => lam[(col, col)] = lambda,
                SpectralBlock::ComplexPair { col, re, im } => {
                    lam[(col, col)] = re;
                    lam[(col, col + 1)] = im;
                    lam[(col + 1, col)] = -im;
                    lam[(col + 1, col + 1)] = re;
                }
            }
        }
        lam
    }

    /// Largest real part of the spectrum.
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|l| l.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Basis condition number `η = ||T|| · ||T⁻¹||` under the unit-eigenvector
/// normalization. Submultiplicativity gives `η ≥ 1` for every decomposition.
pub fn eta_condition(decomp: &EigenDecomposition) -> f64 {
    spectral_norm(&decomp.basis) * spectral_norm(&decomp.basis_inv)
}

/// Decompose a general real square matrix with pairwise distinct eigenvalues
/// into its real modal form.
///
/// Fails with [`Error::RepeatedEigenvalues`] when the minimum pairwise gap is
/// at most `1e-8 · ||M||`; near-defective bases make the conditioning `η`
/// explode and the certificate meaningless, so coalescence is a hard error.
pub fn eigendecompose(m: &DMatrix<f64>) -> Result<EigenDecomposition> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "eigendecompose requires a square matrix");
    assert!(n > 0, "eigendecompose requires a nonempty matrix");

    let norm_m = spectral_norm(m);
    let gap_threshold = EIGEN_GAP_REL * norm_m;

    let eig = m.complex_eigenvalues();
    let mut values: Vec<Complex<f64>> = eig.iter().copied().collect();

    if n >= 2 {
        let mut min_gap = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                min_gap = min_gap.min((values[i] - values[j]).norm());
            }
        }
        if min_gap <= gap_threshold {
            return Err(Error::RepeatedEigenvalues {
                gap: min_gap,
                threshold: gap_threshold,
            });
        }
    }

    // Deterministic block order: ascending (re, |im|).
    values.sort_by(|a, b| {
        (a.re, a.im.abs(), a.im)
            .partial_cmp(&(b.re, b.im.abs(), b.im))
            .expect("non-finite eigenvalue")
    });

    // Distinctness guarantees a conjugate pair is separated by 2|im| > gap,
    // so anything closer to the axis than half the gap is a real eigenvalue.
    let im_tol = 0.5 * gap_threshold;

    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut blocks = Vec::new();
    let mut ordered = Vec::with_capacity(n);
    let mut used = vec![false; n];

    for i in 0..n {
        if used[i] {
            continue;
        }
        let lam = values[i];
        if lam.im.abs() <= im_tol {
            used[i] = true;
            let col = columns.len();
            columns.push(real_eigenvector(m, lam.re));
            blocks.push(SpectralBlock::Real {
                col,
                lambda: lam.re,
            });
            ordered.push(Complex::new(lam.re, 0.0));
        } else {
            // Find the conjugate partner.
            let conj = lam.conj();
            let mut best: Option<(usize, f64)> = None;
            for (j, cand) in values.iter().enumerate() {
                if j == i || used[j] {
                    continue;
                }
                let d = (cand - conj).norm();
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
            let (j, d) = best.ok_or_else(|| {
                Error::Eigendecomposition("complex eigenvalue without conjugate partner".into())
            })?;
            if d > gap_threshold.max(1e-12 * lam.norm()) {
                return Err(Error::Eigendecomposition(format!(
                    "complex eigenvalue {lam} has no conjugate partner (closest residual {d:.3e})"
                )));
            }
            used[i] = true;
            used[j] = true;

            let (re, im) = (lam.re, lam.im.abs());
            let col = columns.len();
            let (p, q) = complex_pair_columns(m, re, im)?;
            columns.push(p);
            columns.push(q);
            blocks.push(SpectralBlock::ComplexPair { col, re, im });
            ordered.push(Complex::new(re, im));
            ordered.push(Complex::new(re, -im));
        }
    }

    let basis = DMatrix::from_columns(&columns);
    let basis_inv = basis
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Eigendecomposition("modal basis is numerically singular".into()))?;

    let decomp = EigenDecomposition {
        eigenvalues: ordered,
        basis,
        basis_inv,
        blocks,
    };

    let residual = spectral_norm(&(&decomp.basis * decomp.lambda_real() * &decomp.basis_inv - m));
    if residual > RECONSTRUCT_REL * norm_m && residual > 0.0 {
        return Err(Error::Eigendecomposition(format!(
            "reconstruction residual {residual:.3e} exceeds {:.3e}",
            RECONSTRUCT_REL * norm_m
        )));
    }

    Ok(decomp)
}

/// Unit null vector of `M − λI` via the right singular vector of the smallest
/// singular value, with a deterministic sign (largest-magnitude entry positive).
fn real_eigenvector(m: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
    let n = m.nrows();
    let shifted = m - DMatrix::identity(n, n) * lambda;
    let mut v = smallest_right_singular_vector(&shifted);
    let lead = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    if v[lead] < 0.0 {
        v.neg_mut();
    }
    v
}

/// Real and imaginary columns of the unit complex eigenvector for `re + i·im`.
///
/// A vector `v = p + iq` satisfies `Mv = (re + i·im) v` exactly when the
/// stacked real vector `(p; q)` lies in the null space of the 2n x 2n matrix
/// `[[M − re·I, im·I], [−im·I, M − re·I]]`, so a single real SVD suffices.
/// The phase is fixed by rotating the largest-modulus entry onto the positive
/// real axis.
fn complex_pair_columns(
    m: &DMatrix<f64>,
    re: f64,
    im: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = m.nrows();
    let shifted = m - DMatrix::identity(n, n) * re;
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&shifted);
    big.view_mut((n, n), (n, n)).copy_from(&shifted);
    big.view_mut((0, n), (n, n))
        .copy_from(&(DMatrix::identity(n, n) * im));
    big.view_mut((n, 0), (n, n))
        .copy_from(&(DMatrix::identity(n, n) * (-im)));

    let w = smallest_right_singular_vector(&big);
    let p = DVector::from_iterator(n, w.iter().take(n).copied());
    let q = DVector::from_iterator(n, w.iter().skip(n).copied());

    // |p|^2 + |q|^2 = 1 already (unit singular vector). Fix the phase.
    let lead = (0..n)
        .max_by(|&a, &b| {
            (p[a] * p[a] + q[a] * q[a])
                .partial_cmp(&(p[b] * p[b] + q[b] * q[b]))
                .unwrap()
        })
        .unwrap();
    let r = (p[lead] * p[lead] + q[lead] * q[lead]).sqrt();
    if r == 0.0 {
        return Err(Error::Eigendecomposition(
            "degenerate complex eigenvector".into(),
        ));
    }
    let (cos_t, sin_t) = (p[lead] / r, q[lead] / r);
    // e^{-iθ} (p + iq) = (p cosθ + q sinθ) + i (q cosθ − p sinθ)
    let p_rot = &p * cos_t + &q * sin_t;
    let q_rot = &q * cos_t - &p * sin_t;
    Ok((p_rot, q_rot))
}

fn smallest_right_singular_vector(m: &DMatrix<f64>) -> DVector<f64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("SVD with v_t requested");
    let (idx, _) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |(bi, bv), (i, &s)| {
                    if s < bv {
                        (i, s)
                    } else {
                        (bi, bv)
                    }
                },
            );
    v_t.row(idx).transpose()
}
