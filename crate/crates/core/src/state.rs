//! Validated quantum states: density matrices (normalized or carrying an
//! outcome probability in their trace) and pure state vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, C64};
use crate::tolerance;

/// Hermitian positive semidefinite matrix whose trace is either 1 or, for
/// conditional post-measurement states, the probability of the outcome that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "ComplexMatrix")]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    trace_norm: f64,
}

impl From<DensityMatrix> for ComplexMatrix {
    fn from(d: DensityMatrix) -> Self {
        d.matrix
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(de)?;
        validate_density(m).map_err(serde::de::Error::custom)
    }
}

/// Validates a user-supplied density matrix. The trace must lie in
/// `(0, 1 + TRACE]`.
pub fn validate_density(m: ComplexMatrix) -> Result<DensityMatrix> {
    let d = check_density(m, tolerance::PSD)?;
    if d.trace_norm <= 0.0 {
        return Err(Error::BadTrace {
            trace: d.trace_norm,
        });
    }
    Ok(d)
}

/// Shared check. Zero trace passes so that conditional states of
/// impossible outcomes can be represented.
fn check_density(m: ComplexMatrix, psd_floor: f64) -> Result<DensityMatrix> {
    if !m.is_square() {
        return Err(Error::BadShape {
            rows: m.rows(),
            cols: m.cols(),
            reason: "density matrix must be square",
        });
    }
    let scale = m.max_abs().max(1.0);
    let herm = m.hermiticity_deviation();
    if herm > tolerance::HERMITIAN * scale {
        return Err(Error::NotHermitian { deviation: herm });
    }
    let tr = m.trace();
    if tr.im.abs() > tolerance::TRACE || tr.re < -tolerance::TRACE || tr.re > 1.0 + tolerance::TRACE
    {
        return Err(Error::BadTrace { trace: tr.re });
    }
    let min = m.min_eigenvalue();
    if min < -psd_floor {
        return Err(Error::NotPositive {
            min_eigenvalue: min,
        });
    }
    Ok(DensityMatrix {
        matrix: m,
        trace_norm: tr.re.max(0.0),
    })
}

impl DensityMatrix {
    /// Conditional (unnormalized) state produced by a completely positive
    /// map. Zero trace is allowed.
    pub(crate) fn conditional(m: ComplexMatrix) -> Result<Self> {
        check_density(m, tolerance::PSD)
    }

    /// Validation with a relaxed positivity floor, for integrator output.
    pub(crate) fn with_psd_floor(m: ComplexMatrix, floor: f64) -> Result<Self> {
        match check_density(m, floor) {
            Err(Error::NotPositive { min_eigenvalue }) => {
                Err(Error::PositivityLoss { min_eigenvalue })
            }
            other => other,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Real trace: 1 for normalized states, the outcome probability for
    /// conditional ones.
    pub fn trace_norm(&self) -> f64 {
        self.trace_norm
    }

    pub fn is_normalized(&self) -> bool {
        (self.trace_norm - 1.0).abs() <= tolerance::TRACE
    }

    /// Rescales to unit trace. `None` for (numerically) zero-trace states.
    pub fn normalized(&self) -> Option<DensityMatrix> {
        if self.trace_norm < tolerance::MIN_BRANCH_PROBABILITY {
            return None;
        }
        Some(DensityMatrix {
            matrix: self.matrix.scale_real(1.0 / self.trace_norm),
            trace_norm: 1.0,
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
            trace_norm: 1.0,
        }
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.matrix.min_eigenvalue()
    }
}

/// `(1/2) || a - b ||_1`.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    0.5 * (a - b).hermitian_trace_norm()
}

/// Reduced state over the factors listed in `keep`. `dims` gives the
/// factor dimensions in tensor order (first factor most significant).
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let reduced = partial_trace_matrix(rho.matrix(), dims, keep)?;
    // Partial trace preserves trace and positivity, so skip re-validation.
    let trace_norm = rho.trace_norm;
    Ok(DensityMatrix {
        matrix: reduced.hermitian_part(),
        trace_norm,
    })
}

/// Partial trace on a bare square matrix.
pub fn partial_trace_matrix(
    m: &ComplexMatrix,
    dims: &[usize],
    keep: &[usize],
) -> Result<ComplexMatrix> {
    let total = dims
        .iter()
        .try_fold(
            1usize,
            |acc, &d| if d == 0 { None } else { acc.checked_mul(d) },
        )
        .ok_or_else(|| Error::InvalidArgument("factor dimensions must be positive".into()))?;
    if !m.is_square() || total != m.rows() {
        return Err(Error::dim("partial trace factor product", m.rows(), total));
    }
    if keep.is_empty() {
        return Err(Error::InvalidArgument("keep set must be nonempty".into()));
    }
    let mut kept = vec![false; dims.len()];
    for &k in keep {
        if k >= dims.len() {
            return Err(Error::InvalidArgument(format!(
                "factor index {k} out of range for {} factors",
                dims.len()
            )));
        }
        kept[k] = true;
    }
    let kept_dims: Vec<usize> = (0..dims.len())
        .filter(|&i| kept[i])
        .map(|i| dims[i])
        .collect();
    let traced_dims: Vec<usize> = (0..dims.len())
        .filter(|&i| !kept[i])
        .map(|i| dims[i])
        .collect();
    let out_dim: usize = kept_dims.iter().product();
    let traced_total: usize = traced_dims.iter().product();

    // strides of each factor in the full index
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let kept_strides: Vec<usize> = (0..dims.len())
        .filter(|&i| kept[i])
        .map(|i| strides[i])
        .collect();
    let traced_strides: Vec<usize> = (0..dims.len())
        .filter(|&i| !kept[i])
        .map(|i| strides[i])
        .collect();

    let offsets = |sub_dims: &[usize], sub_strides: &[usize], count: usize| -> Vec<usize> {
        (0..count)
            .map(|mut idx| {
                let mut off = 0;
                for f in (0..sub_dims.len()).rev() {
                    off += (idx % sub_dims[f]) * sub_strides[f];
                    idx /= sub_dims[f];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(&kept_dims, &kept_strides, out_dim);
    let traced_off = offsets(&traced_dims, &traced_strides, traced_total);

    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    for (a, &ka) in kept_off.iter().enumerate() {
        for (b, &kb) in kept_off.iter().enumerate() {
            let mut acc = c(0.0, 0.0);
            for &t in &traced_off {
                acc += m.get(ka + t, kb + t);
            }
            out.set(a, b, acc);
        }
    }
    Ok(out)
}

/// Unit-norm amplitude vector in a fixed basis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PureStateRepr {
    amplitudes: Vec<[f64; 2]>,
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let repr = PureStateRepr::deserialize(de)?;
        let amps = repr
            .amplitudes
            .into_iter()
            .map(|[re, im]| c(re, im))
            .collect();
        PureState::new(amps).map_err(serde::de::Error::custom)
    }
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Empty("pure state needs at least one amplitude"));
        }
        if let Some(i) = amplitudes
            .iter()
            .position(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        let norm_sqr: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > tolerance::UNIT_NORM {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(PureState { amplitudes })
    }

    /// Normalizes a nonzero vector first.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotNormalized {
                norm_sqr: norm * norm,
            });
        }
        Self::new(amplitudes.into_iter().map(|z| z / norm).collect())
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim);
        let mut amps = vec![c(0.0, 0.0); dim];
        amps[index] = c(1.0, 0.0);
        PureState { amplitudes: amps }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn density(&self) -> DensityMatrix {
        let m = ComplexMatrix::projector(&self.amplitudes);
        DensityMatrix {
            matrix: m.hermitian_part(),
            trace_norm: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tensor;

    fn m(rows: &[&[f64]]) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(rows).unwrap()
    }

    #[test]
    fn validate_density_fixtures() {
        let d = validate_density(m(&[&[1.0, 0.0], &[0.0, 0.0]])).unwrap();
        assert_eq!(d.trace_norm(), 1.0);
        assert!(validate_density(m(&[&[0.5, 0.5], &[0.5, 0.5]])).is_ok());
        assert!(matches!(
            validate_density(m(&[&[0.6, 0.5], &[0.5, 0.4]])),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn validate_density_errors() {
        assert!(matches!(
            validate_density(m(&[&[0.5, 0.1], &[0.0, 0.5]])),
            Err(Error::NotHermitian { .. })
        ));
        assert!(matches!(
            validate_density(m(&[&[0.0, 0.0], &[0.0, 0.0]])),
            Err(Error::BadTrace { .. })
        ));
        assert!(matches!(
            validate_density(m(&[&[1.0, 0.0], &[0.0, 0.5]])),
            Err(Error::BadTrace { .. })
        ));
        assert!(matches!(
            validate_density(m(&[&[1.0, 0.0]])),
            Err(Error::BadShape { .. })
        ));
    }

    #[test]
    fn validation_is_idempotent() {
        let d = validate_density(m(&[&[0.7, 0.2], &[0.2, 0.3]])).unwrap();
        let again = validate_density(d.matrix().clone()).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let a = validate_density(m(&[&[0.7, 0.2], &[0.2, 0.3]])).unwrap();
        let b =
            validate_density(m(&[&[0.25, 0.0, 0.1], &[0.0, 0.5, 0.0], &[0.1, 0.0, 0.25]])).unwrap();
        let ab = validate_density(tensor(a.matrix(), b.matrix()).unwrap()).unwrap();
        let ra = partial_trace(&ab, &[2, 3], &[0]).unwrap();
        assert!(ra.matrix().max_abs_diff(a.matrix()) < 1e-12);
        let rb = partial_trace(&ab, &[2, 3], &[1]).unwrap();
        assert!(rb.matrix().max_abs_diff(b.matrix()) < 1e-12);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = PureState::new(vec![c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap();
        let rho = bell.density();
        // Direct index-sum oracle: (rho_A)_{ab} = sum_t rho_{(a,t),(b,t)}.
        let mut oracle = [[0.0f64; 2]; 2];
        for (a, row) in oracle.iter_mut().enumerate() {
            for (b, val) in row.iter_mut().enumerate() {
                for t in 0..2 {
                    *val += rho.matrix().get(2 * a + t, 2 * b + t).re;
                }
            }
        }
        for (a, row) in oracle.iter().enumerate() {
            for (b, val) in row.iter().enumerate() {
                let want = if a == b { 0.5 } else { 0.0 };
                assert!((val - want).abs() < 1e-15);
            }
        }
        let reduced = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert!(
            reduced
                .matrix()
                .max_abs_diff(&ComplexMatrix::identity(2).scale_real(0.5))
                < 1e-15
        );
    }

    #[test]
    fn partial_trace_keep_all_and_errors() {
        let rho = validate_density(m(&[&[0.7, 0.2], &[0.2, 0.3]])).unwrap();
        assert_eq!(partial_trace(&rho, &[2], &[0]).unwrap(), rho);
        assert!(matches!(
            partial_trace(&rho, &[3], &[0]),
            Err(Error::DimMismatch { .. })
        ));
        assert!(partial_trace(&rho, &[2], &[]).is_err());
        assert!(partial_trace(&rho, &[2], &[1]).is_err());
    }

    #[test]
    fn partial_trace_middle_factor() {
        // 2 x 3 x 2 product state; keep factors 0 and 2.
        let a = m(&[&[0.6, 0.1], &[0.1, 0.4]]);
        let b = ComplexMatrix::identity(3).scale_real(1.0 / 3.0);
        let cc = m(&[&[0.2, 0.0], &[0.0, 0.8]]);
        let abc = validate_density(tensor(&tensor(&a, &b).unwrap(), &cc).unwrap()).unwrap();
        let r = partial_trace(&abc, &[2, 3, 2], &[0, 2]).unwrap();
        assert!(r.matrix().max_abs_diff(&tensor(&a, &cc).unwrap()) < 1e-12);
    }

    #[test]
    fn pure_state_norm() {
        assert!(PureState::new(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        let p = PureState::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((p.density().purity() - 1.0).abs() < 1e-14);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.starts_with(r#"{"amplitudes":[[0.7071"#));
        let back: PureState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn trace_distance_orthogonal_states() {
        let a = m(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let b = m(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert!((trace_distance(&a, &b) - 1.0).abs() < 1e-14);
        assert!(trace_distance(&a, &a) < 1e-15);
    }
}
