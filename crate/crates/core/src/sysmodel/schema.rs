//! On-disk system definition format (JSON).
//!
//! The parser is strict: unknown keys are rejected everywhere, so a typo in a
//! certification input fails loudly instead of silently changing the problem.
//!
//! ```json
//! {
//!   "n": 2,
//!   "m": 1,
//!   "field": [
//!     {"component_index": 0, "coefficient": 1.0, "x_exponents": [3, 0], "u_exponents": [0]}
//!   ],
//!   "perturbation": {
//!     "sigma": 0.0, "c": 0.001, "gamma": -10.0, "t0": 0.0,
//!     "phase": {"kind": "cosine_linear_form", "params": {"weights": [1.0, 1.0], "component": 1}}
//!   },
//!   "desired_eigenvalues": [{"re": -0.5, "im": 0.0}, {"re": -0.75, "im": 0.0}],
//!   "gain_override": null
//! }
//! ```
//!
//! All indices are 0-based. `gain_override` is row-major `m x n` and may be
//! omitted.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{PerturbationSpec, Phase, PolynomialTerm, PolynomialVectorField, SystemDefinition};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub n: usize,
    pub m: usize,
    pub field: Vec<FieldTermEntry>,
    pub perturbation: PerturbationEntry,
    pub desired_eigenvalues: Vec<ComplexEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_override: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldTermEntry {
    pub component_index: usize,
    pub coefficient: f64,
    pub x_exponents: Vec<u32>,
    pub u_exponents: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationEntry {
    pub sigma: f64,
    pub c: f64,
    pub gamma: f64,
    pub t0: f64,
    pub phase: PhaseEntry,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PhaseEntry {
    Zero,
    ConstantDirection(ConstantDirectionParams),
    CosineLinearForm(CosineLinearFormParams),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantDirectionParams {
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineLinearFormParams {
    pub weights: Vec<f64>,
    pub component: usize,
}

impl SystemFile {
    /// Parse the JSON text; errors carry serde's line/column diagnostics.
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidDefinition(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("system file serialization");
        s.push('\n');
        s
    }

    /// Validate and convert into a [`SystemDefinition`].
    pub fn into_system(self) -> Result<SystemDefinition> {
        let mut components: Vec<Vec<PolynomialTerm>> = vec![Vec::new(); self.n];
        for entry in self.field {
            if entry.component_index >= self.n {
                return Err(Error::InvalidDefinition(format!(
                    "field term component_index {} out of range for n = {}",
                    entry.component_index, self.n
                )));
            }
            components[entry.component_index].push(PolynomialTerm::new(
                entry.coefficient,
                entry.x_exponents,
                entry.u_exponents,
            ));
        }
        let field = PolynomialVectorField::new(self.n, self.m, components)?;

        let phase = match self.perturbation.phase {
            PhaseEntry::Zero => Phase::Zero,
            PhaseEntry::ConstantDirection(p) => Phase::ConstantDirection {
                direction: DVector::from_vec(p.direction),
            },
            PhaseEntry::CosineLinearForm(p) => Phase::CosineLinearForm {
                weights: DVector::from_vec(p.weights),
                component: p.component,
            },
        };
        let perturbation = PerturbationSpec::new(
            self.perturbation.sigma,
            self.perturbation.c,
            self.perturbation.gamma,
            self.perturbation.t0,
            phase,
        )?;

        let desired: Vec<Complex<f64>> = self
            .desired_eigenvalues
            .iter()
            .map(|e| Complex::new(e.re, e.im))
            .collect();

        let gain_override = match self.gain_override {
            None => None,
            Some(rows) => {
                if rows.len() != self.m || rows.iter().any(|r| r.len() != self.n) {
                    return Err(Error::InvalidDefinition(format!(
                        "gain_override must be {} rows of {} entries",
                        self.m, self.n
                    )));
                }
                let flat: Vec<f64> = rows.into_iter().flatten().collect();
                Some(DMatrix::from_row_slice(self.m, self.n, &flat))
            }
        };

        SystemDefinition::new(field, perturbation, desired, gain_override)
    }

    /// Echo a [`SystemDefinition`] back into its file representation.
    pub fn from_system(sys: &SystemDefinition) -> Self {
        let mut field = Vec::new();
        for (i, comp) in sys.field.components().iter().enumerate() {
            for term in comp {
                field.push(FieldTermEntry {
                    component_index: i,
                    coefficient: term.coefficient,
                    x_exponents: term.x_exponents.clone(),
                    u_exponents: term.u_exponents.clone(),
                });
            }
        }
        let phase = match &sys.perturbation.phase {
            Phase::Zero => PhaseEntry::Zero,
            Phase::ConstantDirection { direction } => {
                PhaseEntry::ConstantDirection(ConstantDirectionParams {
                    direction: direction.iter().copied().collect(),
                })
            }
            Phase::CosineLinearForm { weights, component } => {
                PhaseEntry::CosineLinearForm(CosineLinearFormParams {
                    weights: weights.iter().copied().collect(),
                    component: *component,
                })
            }
        };
        SystemFile {
            n: sys.n(),
            m: sys.m(),
            field,
            perturbation: PerturbationEntry {
                sigma: sys.perturbation.sigma,
                c: sys.perturbation.c,
                gamma: sys.perturbation.gamma,
                t0: sys.perturbation.t0,
                phase,
            },
            desired_eigenvalues: sys
                .desired_eigenvalues
                .iter()
                .map(|l| ComplexEntry { re: l.re, im: l.im })
                .collect(),
            gain_override: sys.gain_override.as_ref().map(|k| {
                (0..k.nrows())
                    .map(|i| k.row(i).iter().copied().collect())
                    .collect()
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexEntry {
    pub re: f64,
    pub im: f64,
}
