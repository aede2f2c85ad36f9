//! From POVM to Kraus matrices to the premeasurement isometry and a full
//! unitary, and back through premeasurement and discarding.
//!
//! The isometry `U` has one row per input basis state `s` and one column
//! per composite index `(mu, sigma, m)`: `sigma` labels the kept system
//! after outcome `mu` and `m` the discarded part. Kraus matrices are read
//! off as `(A_mu_m)_{sigma s} = U_{s,(mu sigma m)}`. Columns are ordered
//! lexicographically in `(mu, sigma, m)`, with `mu` in declaration order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::intervention::{join_labels, AdaptiveIntervention, Intervention, Outcome};
use crate::linalg::{c, psd_sqrt, tensor, ComplexMatrix, C64};
use crate::povm::Povm;
use crate::state::{DensityMatrix, PureState};
use crate::tolerance;

/// Separator for outcome pairs of independent subsystems: `"mu|nu"`.
pub const PAIR_SEPARATOR: &str = "|";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnIndex {
    pub mu: String,
    pub sigma: usize,
    pub m: usize,
}

/// Contiguous column range belonging to one outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    /// Range of `sigma` (output dimension).
    pub sigma_dim: usize,
    /// Range of `m` (number of Kraus matrices).
    pub m_dim: usize,
    pub offset: usize,
}

impl Block {
    fn width(&self) -> usize {
        self.sigma_dim * self.m_dim
    }

    fn column(&self, sigma: usize, m: usize) -> usize {
        self.offset + sigma * self.m_dim + m
    }
}

/// Row-orthonormal `input_dim x C` matrix realizing an intervention.
#[derive(Debug, Clone, PartialEq)]
pub struct Dilation {
    input_dim: usize,
    columns: Vec<ColumnIndex>,
    blocks: Vec<Block>,
    matrix: ComplexMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DilationRepr {
    input_dim: usize,
    columns: Vec<ColumnIndex>,
    matrix: ComplexMatrix,
}

impl Serialize for Dilation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DilationRepr {
            input_dim: self.input_dim,
            columns: self.columns.clone(),
            matrix: self.matrix.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Dilation {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = DilationRepr::deserialize(de)?;
        Dilation::new(r.input_dim, r.columns, r.matrix).map_err(serde::de::Error::custom)
    }
}

/// Recovers the block layout from a column list, requiring the canonical
/// lexicographic order.
fn blocks_of(columns: &[ColumnIndex]) -> Result<Vec<Block>> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut i = 0;
    while i < columns.len() {
        let label = &columns[i].mu;
        if blocks.iter().any(|b| &b.label == label) {
            return Err(Error::InvalidArgument(format!(
                "columns of outcome {label:?} are not contiguous"
            )));
        }
        let end = columns[i..]
            .iter()
            .position(|col| &col.mu != label)
            .map_or(columns.len(), |p| i + p);
        let run = &columns[i..end];
        let m_dim = run.iter().map(|col| col.m).max().unwrap_or(0) + 1;
        let sigma_dim = run.iter().map(|col| col.sigma).max().unwrap_or(0) + 1;
        let block = Block {
            label: label.clone(),
            sigma_dim,
            m_dim,
            offset: i,
        };
        if sigma_dim.checked_mul(m_dim) != Some(run.len()) {
            return Err(Error::InvalidArgument(format!(
                "columns of outcome {label:?} do not form a full (sigma, m) grid"
            )));
        }
        for (k, col) in run.iter().enumerate() {
            if block.column(col.sigma, col.m) != i + k {
                return Err(Error::InvalidArgument(format!(
                    "columns of outcome {label:?} are not in (sigma, m) lexicographic order"
                )));
            }
        }
        blocks.push(block);
        i = end;
    }
    Ok(blocks)
}

impl Dilation {
    pub fn new(input_dim: usize, columns: Vec<ColumnIndex>, matrix: ComplexMatrix) -> Result<Self> {
        if matrix.rows() != input_dim {
            return Err(Error::dim("dilation rows", input_dim, matrix.rows()));
        }
        if matrix.cols() != columns.len() {
            return Err(Error::dim("dilation columns", columns.len(), matrix.cols()));
        }
        let blocks = blocks_of(&columns)?;
        let deviation = matrix.row_orthonormality_deviation();
        if deviation > tolerance::COMPLETENESS {
            return Err(Error::NotIsometry { deviation });
        }
        Ok(Dilation {
            input_dim,
            columns,
            blocks,
            matrix,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn columns(&self) -> &[ColumnIndex] {
        &self.columns
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Reads the Kraus matrices back out of the isometry.
    pub fn to_intervention(&self) -> Result<Intervention> {
        let outcomes = self
            .blocks
            .iter()
            .map(|b| Outcome {
                label: b.label.clone(),
                output_dim: b.sigma_dim,
                kraus: (0..b.m_dim)
                    .map(|m| {
                        let mut a = ComplexMatrix::zeros(b.sigma_dim, self.input_dim);
                        for sigma in 0..b.sigma_dim {
                            for s in 0..self.input_dim {
                                a.set(sigma, s, self.matrix.get(s, b.column(sigma, m)));
                            }
                        }
                        a
                    })
                    .collect(),
            })
            .collect();
        Intervention::new(self.input_dim, outcomes)
    }
}

/// `A_mu_m = S_mu_m sqrt(E_mu)`. Without a padding for `mu`, a single
/// `S = I` is used, giving the square Kraus matrix `sqrt(E_mu)`.
/// Paddings are keyed by outcome label; each list must satisfy
/// `sum_m S^dagger S = I`.
pub fn kraus_from_povm(
    p: &Povm,
    paddings: Option<&BTreeMap<String, Vec<ComplexMatrix>>>,
) -> Result<Intervention> {
    let k = p.input_dim();
    if let Some(pads) = paddings {
        if let Some(unknown) = pads.keys().find(|l| p.get(l).is_none()) {
            return Err(Error::UnknownOutcome(unknown.clone()));
        }
    }
    let mut outcomes = Vec::with_capacity(p.len());
    for e in p.elements() {
        let root = psd_sqrt(&e.element)?;
        let pad = paddings.and_then(|pads| pads.get(&e.label));
        let (output_dim, kraus) = match pad {
            None => (k, vec![root]),
            Some(list) => {
                let bad = |deviation| Error::BadPadding {
                    label: e.label.clone(),
                    deviation,
                };
                let first = list.first().ok_or_else(|| bad(f64::INFINITY))?;
                let rows = first.rows();
                let mut gram = ComplexMatrix::zeros(k, k);
                for s in list {
                    if s.cols() != k || s.rows() != rows {
                        return Err(Error::dim(
                            format!("padding shape for outcome {:?}", e.label),
                            k,
                            s.cols(),
                        ));
                    }
                    gram = &gram + &(&s.adjoint() * s);
                }
                let deviation = gram.identity_deviation();
                if deviation > tolerance::COMPLETENESS {
                    return Err(bad(deviation));
                }
                (rows, list.iter().map(|s| s * &root).collect())
            }
        };
        outcomes.push(Outcome {
            label: e.label.clone(),
            output_dim,
            kraus,
        });
    }
    Intervention::new(k, outcomes)
}

/// `U_{s,(mu sigma m)} = (A_mu_m)_{sigma s}`. Row orthonormality of `U` is
/// the completeness relation of `k`, so an incomplete `k` is rejected with
/// [`Error::NotIsometry`].
pub fn isometry_from_kraus(k: &Intervention) -> Result<Dilation> {
    let (columns, matrix) = isometry_matrix(k);
    Dilation::new(k.input_dim(), columns, matrix)
}

/// The raw matrix, with no orthonormality requirement.
pub fn isometry_matrix(k: &Intervention) -> (Vec<ColumnIndex>, ComplexMatrix) {
    let mut columns = Vec::new();
    for o in k.outcomes() {
        for sigma in 0..o.output_dim {
            for m in 0..o.kraus.len() {
                columns.push(ColumnIndex {
                    mu: o.label.clone(),
                    sigma,
                    m,
                });
            }
        }
    }
    let mut matrix = ComplexMatrix::zeros(k.input_dim(), columns.len());
    let mut col = 0;
    for o in k.outcomes() {
        for sigma in 0..o.output_dim {
            for a in &o.kraus {
                for s in 0..k.input_dim() {
                    matrix.set(s, col, a.get(sigma, s));
                }
                col += 1;
            }
        }
    }
    (columns, matrix)
}

/// Extends the dilation rows to a square unitary. Candidate rows are the
/// standard basis vectors in order, orthogonalized (twice) against the rows
/// accumulated so far; candidates with residual norm below
/// `COMPLETION_RESIDUAL` are skipped.
pub fn complete_to_unitary(d: &Dilation) -> Result<ComplexMatrix> {
    let n = d.matrix.cols();
    let mut rows: Vec<Vec<C64>> = (0..d.input_dim)
        .map(|s| (0..n).map(|j| d.matrix.get(s, j)).collect())
        .collect();
    let project_out = |v: &mut [C64], rows: &[Vec<C64>]| {
        for r in rows {
            // <r, v> with the row-space inner product sum r_j^* v_j
            let overlap: C64 = r.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            for (vj, rj) in v.iter_mut().zip(r) {
                *vj -= overlap * rj;
            }
        }
    };
    for k in 0..n {
        if rows.len() == n {
            break;
        }
        let mut v = vec![c(0.0, 0.0); n];
        v[k] = c(1.0, 0.0);
        project_out(&mut v, &rows);
        project_out(&mut v, &rows);
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < tolerance::COMPLETION_RESIDUAL {
            continue;
        }
        rows.push(v.into_iter().map(|z| z / norm).collect());
    }
    if rows.len() != n {
        return Err(Error::CompletionFailure {
            expected: n,
            found: rows.len(),
        });
    }
    let entries = rows.into_iter().flatten().collect();
    let u = ComplexMatrix::from_row_major(n, n, entries)?;
    let deviation = u.row_orthonormality_deviation();
    if deviation > 1e-10 {
        return Err(Error::CompletionFailure {
            expected: n,
            found: n,
        });
    }
    Ok(u)
}

/// System-apparatus state after the premeasurement, with amplitudes on
/// the composite basis `|mu, sigma, m>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    columns: Vec<ColumnIndex>,
    blocks: Vec<Block>,
    amplitudes: Vec<C64>,
}

impl CompositeState {
    pub fn columns(&self) -> &[ColumnIndex] {
        &self.columns
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    fn block(&self, mu: &str) -> Result<&Block> {
        self.blocks
            .iter()
            .find(|b| b.label == mu)
            .ok_or_else(|| Error::UnknownOutcome(mu.to_string()))
    }

    /// Amplitudes of one outcome block (unnormalized `|psi_mu>`).
    pub fn block_amplitudes(&self, mu: &str) -> Result<&[C64]> {
        let b = self.block(mu)?;
        Ok(&self.amplitudes[b.offset..b.offset + b.width()])
    }

    /// Squared norm of each outcome block.
    pub fn block_weights(&self) -> Vec<(String, f64)> {
        self.blocks
            .iter()
            .map(|b| {
                let w = self.amplitudes[b.offset..b.offset + b.width()]
                    .iter()
                    .map(|z| z.norm_sqr())
                    .sum();
                (b.label.clone(), w)
            })
            .collect()
    }

    /// Builds a composite state from explicit amplitudes; used by the
    /// decoherence model and tests.
    pub fn from_parts(columns: Vec<ColumnIndex>, amplitudes: Vec<C64>) -> Result<Self> {
        if columns.len() != amplitudes.len() {
            return Err(Error::dim(
                "composite amplitudes",
                columns.len(),
                amplitudes.len(),
            ));
        }
        let blocks = blocks_of(&columns)?;
        let norm_sqr: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > tolerance::UNIT_NORM {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(CompositeState {
            columns,
            blocks,
            amplitudes,
        })
    }
}

/// `c'_{mu sigma m} = sum_s c_s U_{s,(mu sigma m)}`.
pub fn premeasure(d: &Dilation, psi0: &PureState) -> Result<CompositeState> {
    if psi0.dim() != d.input_dim {
        return Err(Error::dim("premeasurement input", d.input_dim, psi0.dim()));
    }
    let n = d.matrix.cols();
    let amps: Vec<C64> = (0..n)
        .map(|j| {
            psi0.amplitudes()
                .iter()
                .enumerate()
                .map(|(s, cs)| cs * d.matrix.get(s, j))
                .sum()
        })
        .collect();
    let norm_sqr: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    if (norm_sqr - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm_sqr });
    }
    Ok(CompositeState {
        columns: d.columns.clone(),
        blocks: d.blocks.clone(),
        amplitudes: amps,
    })
}

/// Keeps outcome block `mu` and traces out its `m` factor:
/// `(rho'_mu)_{sigma tau} = sum_m c'_{mu sigma m} conj(c'_{mu tau m})`.
pub fn discard(state: &CompositeState, mu: &str) -> Result<DensityMatrix> {
    let b = state.block(mu)?;
    let mut out = ComplexMatrix::zeros(b.sigma_dim, b.sigma_dim);
    for sigma in 0..b.sigma_dim {
        for tau in 0..b.sigma_dim {
            let mut acc = c(0.0, 0.0);
            for m in 0..b.m_dim {
                acc += state.amplitudes[b.column(sigma, m)]
                    * state.amplitudes[b.column(tau, m)].conj();
            }
            out.set(sigma, tau, acc);
        }
    }
    DensityMatrix::conditional(out.hermitian_part())
}

/// Independent interventions on two subsystems. Outcome `"mu|nu"` has
/// Kraus `A1_mu_m (x) A2_nu_n` with `m` outer and `n` inner.
pub fn tensor_intervention(k1: &Intervention, k2: &Intervention) -> Result<Intervention> {
    let mut outcomes = Vec::with_capacity(k1.outcomes().len() * k2.outcomes().len());
    for o1 in k1.outcomes() {
        for o2 in k2.outcomes() {
            let mut kraus = Vec::with_capacity(o1.kraus.len() * o2.kraus.len());
            for a in &o1.kraus {
                for b in &o2.kraus {
                    kraus.push(tensor(a, b)?);
                }
            }
            outcomes.push(Outcome {
                label: format!("{}{}{}", o1.label, PAIR_SEPARATOR, o2.label),
                output_dim: o1.output_dim * o2.output_dim,
                kraus,
            });
        }
    }
    let input = k1
        .input_dim()
        .checked_mul(k2.input_dim())
        .ok_or(Error::DimensionCap {
            dim: usize::MAX,
            cap: tolerance::DEFAULT_DIM_CAP,
        })?;
    Intervention::new(input, outcomes)
}

/// Observer 1 measures `k1`; observer 2, told the outcome `mu`, applies
/// `k2_by_outcome[mu]`. Outcome `"nu.mu"` has Kraus
/// `A1_mu_m (x) A2_nu_mu_n`.
pub fn adaptive_tensor(
    k1: &Intervention,
    k2_by_outcome: &AdaptiveIntervention,
) -> Result<Intervention> {
    let mut input2: Option<usize> = None;
    let mut outcomes = Vec::new();
    for o1 in k1.outcomes() {
        let k2 = k2_by_outcome
            .lookup(&o1.label)
            .ok_or_else(|| Error::MissingBranch(o1.label.clone()))?;
        match input2 {
            None => input2 = Some(k2.input_dim()),
            Some(d) if d != k2.input_dim() => {
                return Err(Error::dim(
                    format!("subsystem 2 after outcome {:?}", o1.label),
                    d,
                    k2.input_dim(),
                ))
            }
            _ => {}
        }
        for o2 in k2.outcomes() {
            let mut kraus = Vec::with_capacity(o1.kraus.len() * o2.kraus.len());
            for a in &o1.kraus {
                for b in &o2.kraus {
                    kraus.push(tensor(a, b)?);
                }
            }
            outcomes.push(Outcome {
                label: join_labels(&[o1.label.as_str(), o2.label.as_str()]),
                output_dim: o1.output_dim * o2.output_dim,
                kraus,
            });
        }
    }
    let input = k1.input_dim() * input2.expect("at least one outcome");
    Intervention::new(input, outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::intervention::{apply_selective, outcome_probabilities, povm_of};

    #[test]
    fn kraus_from_pvm_is_projectors() {
        let k = kraus_from_povm(&computational_povm(2), None).unwrap();
        for (o, want) in k
            .outcomes()
            .iter()
            .zip([basis_projector(2, 0), basis_projector(2, 1)])
        {
            assert!(o.kraus[0].max_abs_diff(&want) < 1e-14);
        }
    }

    #[test]
    fn kraus_from_trine_is_scaled_projectors() {
        let k = kraus_from_povm(&trine_povm(), None).unwrap();
        // sqrt of the rank-1 (2/3)|psi><psi| is sqrt(2/3)|psi><psi|
        for (o, want) in k.outcomes().iter().zip(trine_intervention().outcomes()) {
            assert!(o.kraus[0].max_abs_diff(&want.kraus[0]) < 1e-12);
        }
    }

    #[test]
    fn rectangular_padding_round_trips() {
        // S_0 = [[1,0],[0,1],[0,0]] / sqrt(2) twice: stacked isometry 6x2.
        let s = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]])
            .unwrap()
            .scale_real(std::f64::consts::FRAC_1_SQRT_2);
        let pads = BTreeMap::from([("1".to_string(), vec![s.clone(), s])]);
        let k = kraus_from_povm(&trine_povm(), Some(&pads)).unwrap();
        assert_eq!(k.output_dim("1").unwrap(), 3);
        assert_eq!(k.outcome("1").unwrap().kraus.len(), 2);
        let back = povm_of(&k).unwrap();
        assert!(back.max_deviation(&trine_povm()).unwrap() < 1e-12);
    }

    #[test]
    fn bad_padding_is_rejected() {
        let s = ComplexMatrix::identity(2).scale_real(0.9);
        let pads = BTreeMap::from([("0".to_string(), vec![s])]);
        let err = kraus_from_povm(&trine_povm(), Some(&pads)).unwrap_err();
        match err {
            Error::BadPadding { deviation, .. } => assert!((deviation - 0.19).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pvm_isometry_layout() {
        let d = isometry_from_kraus(&computational_pvm(2)).unwrap();
        // columns: (0,0,0) (0,1,0) (1,0,0) (1,1,0)
        let expected =
            ComplexMatrix::from_real_rows(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(d.matrix(), &expected);
        assert_eq!(
            d.columns()[3],
            ColumnIndex {
                mu: "1".into(),
                sigma: 1,
                m: 0
            }
        );
    }

    #[test]
    fn trine_isometry_and_identity() {
        let d = isometry_from_kraus(&trine_intervention()).unwrap();
        assert_eq!(d.matrix().shape(), (2, 6));
        assert!(d.matrix().row_orthonormality_deviation() < 1e-12);
        let id = isometry_from_kraus(&identity_intervention(3)).unwrap();
        assert_eq!(id.matrix(), &ComplexMatrix::identity(3));
    }

    #[test]
    fn dilation_reads_back_kraus() {
        let k = amplitude_damping(0.3);
        let d = isometry_from_kraus(&k).unwrap();
        assert_eq!(d.to_intervention().unwrap(), k);
    }

    #[test]
    fn completion_fixtures() {
        let id = isometry_from_kraus(&identity_intervention(2)).unwrap();
        assert_eq!(
            complete_to_unitary(&id).unwrap(),
            ComplexMatrix::identity(2)
        );

        let d = isometry_from_kraus(&computational_pvm(2)).unwrap();
        let v = complete_to_unitary(&d).unwrap();
        assert_eq!(v.shape(), (4, 4));
        assert!(v.row_orthonormality_deviation() < 1e-10);
        for s in 0..2 {
            for j in 0..4 {
                assert_eq!(v.get(s, j), d.matrix().get(s, j));
            }
        }
    }

    #[test]
    fn premeasure_block_weights() {
        let d = isometry_from_kraus(&computational_pvm(2)).unwrap();
        let w = premeasure(&d, &PureState::basis(2, 0))
            .unwrap()
            .block_weights();
        assert_eq!(w[0].1, 1.0);
        assert_eq!(w[1].1, 0.0);
        let plus = PureState::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let w = premeasure(&d, &plus).unwrap().block_weights();
        assert!((w[0].1 - 0.5).abs() < 1e-15 && (w[1].1 - 0.5).abs() < 1e-15);

        let d = isometry_from_kraus(&trine_intervention()).unwrap();
        let w = premeasure(&d, &PureState::basis(2, 0))
            .unwrap()
            .block_weights();
        for ((_, got), want) in w.iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(premeasure(&d, &PureState::basis(3, 0)).is_err());
    }

    #[test]
    fn discard_matches_selective_map() {
        let k = amplitude_damping(0.4);
        let psi = PureState::normalized(vec![c(0.3, 0.1), c(0.5, -0.7)]).unwrap();
        let state = premeasure(&isometry_from_kraus(&k).unwrap(), &psi).unwrap();
        let via_discard = discard(&state, "damp").unwrap();
        let via_map = apply_selective(&k, &psi.density(), "damp").unwrap();
        assert!(via_discard.matrix().max_abs_diff(via_map.matrix()) < 1e-14);
        assert!(matches!(
            discard(&state, "x"),
            Err(Error::UnknownOutcome(_))
        ));
    }

    #[test]
    fn full_discard_gives_probability() {
        let k = full_discard_measurement(2);
        let psi = PureState::normalized(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let state = premeasure(&isometry_from_kraus(&k).unwrap(), &psi).unwrap();
        let r = discard(&state, "1").unwrap();
        assert_eq!(r.dim(), 1);
        assert!((r.matrix().get(0, 0).re - 0.64).abs() < 1e-14);
    }

    #[test]
    fn tensor_of_pvms_on_product_state() {
        let k = tensor_intervention(&trine_intervention(), &computational_pvm(2)).unwrap();
        let zero = PureState::basis(2, 0);
        let plus = PureState::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let prod = tensor(zero.density().matrix(), plus.density().matrix()).unwrap();
        let rho = crate::state::validate_density(prod).unwrap();
        let p: BTreeMap<String, f64> = outcome_probabilities(&k, &rho)
            .unwrap()
            .into_iter()
            .collect();
        let trine = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
        for (a, pa) in trine.iter().enumerate() {
            for b in 0..2 {
                assert!((p[&format!("{a}|{b}")] - pa * 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tensor_with_trivial_identity() {
        let k = tensor_intervention(&trine_intervention(), &identity_intervention(1)).unwrap();
        let labels: Vec<&str> = k.labels().collect();
        assert_eq!(labels, vec!["0|id", "1|id", "2|id"]);
        for (a, b) in k.outcomes().iter().zip(trine_intervention().outcomes()) {
            assert_eq!(a.kraus, b.kraus);
        }
    }

    #[test]
    fn degenerate_adaptive_equals_tensor() {
        let k1 = trine_intervention();
        let k2 = computational_pvm(2);
        let adaptive = adaptive_tensor(&k1, &AdaptiveIntervention::uniform(k2.clone())).unwrap();
        let plain = tensor_intervention(&k1, &k2).unwrap();
        for (a, b) in adaptive.outcomes().iter().zip(plain.outcomes()) {
            assert_eq!(a.kraus, b.kraus);
            let (mu, nu) = b.label.split_once(PAIR_SEPARATOR).unwrap();
            assert_eq!(a.label, format!("{nu}.{mu}"));
        }
    }

    #[test]
    fn adaptive_rotated_basis_is_complete() {
        let k1 = computational_pvm(2);
        let b = AdaptiveIntervention::from_pairs([
            ("0", rotated_pvm(0.0)),
            ("1", rotated_pvm(std::f64::consts::FRAC_PI_4)),
        ])
        .unwrap();
        let k = adaptive_tensor(&k1, &b).unwrap();
        assert!(k.completeness_deviation() < 1e-12);
        let povm = povm_of(&k).unwrap();
        // E_{nu mu} = E1_mu (x) E2_{nu mu}
        let e = povm.get("1.1").unwrap();
        let want = tensor(
            &basis_projector(2, 1),
            &rotated_pvm(std::f64::consts::FRAC_PI_4)
                .effect("1")
                .unwrap(),
        )
        .unwrap();
        assert!(e.max_abs_diff(&want) < 1e-12);
    }
}
