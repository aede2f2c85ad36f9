use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::state::DensityMatrix;
use crate::tolerance;

/// One labeled POVM element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmElement {
    pub label: String,
    pub element: ComplexMatrix,
}

/// Positive operators on the input space that sum to the identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Povm {
    input_dim: usize,
    elements: Vec<PovmElement>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PovmRepr {
    input_dim: usize,
    elements: Vec<PovmElement>,
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = PovmRepr::deserialize(de)?;
        Povm::new(r.input_dim, r.elements).map_err(serde::de::Error::custom)
    }
}

/// Like deserializing, but validation failures keep their own error
/// variant instead of becoming a parse error.
pub(crate) fn povm_from_value(v: serde_json::Value) -> Result<Povm> {
    let r: PovmRepr = serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))?;
    Povm::new(r.input_dim, r.elements)
}

impl Povm {
    pub fn new(input_dim: usize, elements: Vec<PovmElement>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument(
                "input_dim must be at least 1".into(),
            ));
        }
        if elements.is_empty() {
            return Err(Error::Empty("POVM needs at least one element"));
        }
        let mut sum = ComplexMatrix::zeros(input_dim, input_dim);
        for (i, e) in elements.iter().enumerate() {
            if elements[..i].iter().any(|p| p.label == e.label) {
                return Err(Error::DuplicateOutcome(e.label.clone()));
            }
            let m = &e.element;
            if m.shape() != (input_dim, input_dim) {
                return Err(Error::dim(
                    format!("POVM element {:?}", e.label),
                    input_dim,
                    m.rows().max(m.cols()),
                ));
            }
            let herm = m.hermiticity_deviation();
            if herm > tolerance::HERMITIAN * m.max_abs().max(1.0) {
                return Err(Error::NotHermitian { deviation: herm });
            }
            let min = m.min_eigenvalue();
            if min < -tolerance::PSD {
                return Err(Error::NotPositive {
                    min_eigenvalue: min,
                });
            }
            sum = &sum + m;
        }
        let deviation = sum.identity_deviation();
        if deviation > tolerance::COMPLETENESS {
            return Err(Error::NotPovm { deviation });
        }
        Ok(Povm {
            input_dim,
            elements,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&ComplexMatrix> {
        self.elements
            .iter()
            .find(|e| e.label == label)
            .map(|e| &e.element)
    }

    /// `Tr(E_mu rho)` for every element, clamped to `[0, 1]`.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<(String, f64)>> {
        if rho.dim() != self.input_dim {
            return Err(Error::dim("POVM input", self.input_dim, rho.dim()));
        }
        Ok(self
            .elements
            .iter()
            .map(|e| {
                (
                    e.label.clone(),
                    clamp_probability((&e.element * rho.matrix()).trace().re),
                )
            })
            .collect())
    }

    /// Largest elementwise difference between matching elements.
    pub fn max_deviation(&self, other: &Povm) -> Option<f64> {
        if self.len() != other.len() || self.input_dim != other.input_dim {
            return None;
        }
        let mut dev: f64 = 0.0;
        for (a, b) in self.elements.iter().zip(&other.elements) {
            if a.label != b.label {
                return None;
            }
            dev = dev.max(a.element.max_abs_diff(&b.element));
        }
        Some(dev)
    }
}

pub(crate) fn clamp_probability(p: f64) -> f64 {
    if p < 0.0 && p >= -tolerance::PROBABILITY_CLAMP {
        0.0
    } else {
        p.clamp(0.0, 1.0)
    }
}
