//! Exact polynomial substitution `u = −Kx` and the closed-loop Taylor
//! remainder (all resulting monomials of total degree >= 2).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::PolynomialVectorField;

/// Sparse polynomial in the state variables, keyed by exponent vector.
#[derive(Debug, Clone, Default)]
struct XPolynomial {
    terms: BTreeMap<Vec<u32>, f64>,
}

impl XPolynomial {
    fn monomial(exponents: Vec<u32>, coefficient: f64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(exponents, coefficient);
        Self { terms }
    }

    fn add_term(&mut self, exponents: Vec<u32>, coefficient: f64) {
        let entry = self.terms.entry(exponents).or_insert(0.0);
        *entry += coefficient;
    }

    fn add(&mut self, other: &Self) {
        for (e, c) in &other.terms {
            self.add_term(e.clone(), *c);
        }
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Self::default();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let exps: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exps, ca * cb);
            }
        }
        out
    }

    fn prune_zeros(&mut self) {
        self.terms.retain(|_, c| *c != 0.0);
    }

    fn evaluate(&self, x: &DVector<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(exps, c)| {
                let mut v = *c;
                for (xi, &e) in x.iter().zip(exps) {
                    if e > 0 {
                        v *= xi.powi(e as i32);
                    }
                }
                v
            })
            .sum()
    }
}

/// The closed-loop expansion of one field component after `u = −Kx`.
fn substitute_gain(
    field: &PolynomialVectorField,
    gain: &DMatrix<f64>,
    component: usize,
) -> XPolynomial {
    let n = field.n();
    // Linear polynomials for each input channel: u_j = -sum_k K[j,k] x_k.
    let channels: Vec<XPolynomial> = (0..field.m())
        .map(|j| {
            let mut lin = XPolynomial::default();
            for k in 0..n {
                let coeff = -gain[(j, k)];
                if coeff != 0.0 {
                    let mut exps = vec![0u32; n];
                    exps[k] = 1;
                    lin.add_term(exps, coeff);
                }
            }
            lin
        })
        .collect();

    let mut result = XPolynomial::default();
    for term in &field.components()[component] {
        let mut poly = XPolynomial::monomial(term.x_exponents.clone(), term.coefficient);
        for (j, &e) in term.u_exponents.iter().enumerate() {
            for _ in 0..e {
                poly = poly.mul(&channels[j]);
            }
        }
        result.add(&poly);
    }
    result.prune_zeros();
    result
}

/// Exact Taylor remainder of the closed loop: the monomials of
/// `f(x, −Kx)` with total degree >= 2, per component.
#[derive(Debug, Clone)]
pub struct ClosedLoopRemainder {
    n: usize,
    components: Vec<XPolynomial>,
}

impl ClosedLoopRemainder {
    /// Substitute `u = −Kx` and keep everything of total degree >= 2.
    pub fn expand(field: &PolynomialVectorField, gain: &DMatrix<f64>) -> Result<Self> {
        if gain.nrows() != field.m() || gain.ncols() != field.n() {
            return Err(Error::DimensionMismatch {
                context: "gain matrix",
                expected: field.m() * field.n(),
                got: gain.nrows() * gain.ncols(),
            });
        }
        let components = (0..field.n())
            .map(|i| {
                let mut poly = substitute_gain(field, gain, i);
                poly.terms.retain(|exps, _| exps.iter().sum::<u32>() >= 2);
                poly
            })
            .collect();
        Ok(Self {
            n: field.n(),
            components,
        })
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "state vector",
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(DVector::from_iterator(
            self.n,
            self.components.iter().map(|p| p.evaluate(x)),
        ))
    }

    /// True when the closed loop is exactly linear.
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|p| p.terms.is_empty())
    }

    /// Smallest total degree present (>= 2), or `None` for a linear loop.
    pub fn min_degree(&self) -> Option<u32> {
        self.components
            .iter()
            .flat_map(|p| p.terms.keys().map(|e| e.iter().sum::<u32>()))
            .min()
    }

    /// Per-component sums of absolute monomial coefficients.
    pub fn component_abs_sums(&self) -> Vec<f64> {
        self.components
            .iter()
            .map(|p| p.terms.values().map(|c| c.abs()).sum())
            .collect()
    }
}
