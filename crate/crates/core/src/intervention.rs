//! Completely positive maps with labeled outcomes and possibly rectangular
//! Kraus matrices.
//!
//! An [`Intervention`] maps an input state `rho` to one unnormalized state
//! per outcome, `rho'_mu = sum_m A_mu_m rho A_mu_m^dagger`, whose trace is
//! the probability of `mu`. Each outcome may have its own output
//! dimension. Sequential interventions whose choice depends on earlier
//! outcomes are modeled with [`AdaptiveIntervention`].
//!
//! Composite labels list outcomes from latest to earliest, joined by
//! [`LABEL_SEPARATOR`]: outcome `nu` following `mu` is labeled `"nu.mu"`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, tensor, ComplexMatrix};
use crate::povm::{clamp_probability, Povm, PovmElement};
use crate::random::Stream;
use crate::state::DensityMatrix;
use crate::tolerance;

pub const LABEL_SEPARATOR: &str = ".";

/// Key matching any prior outcome in an [`AdaptiveIntervention`].
pub const WILDCARD: &str = "*";

/// Joins a chronological outcome history into a composite label (latest
/// first).
pub fn join_labels<S: AsRef<str>>(chronological: &[S]) -> String {
    let parts: Vec<&str> = chronological.iter().rev().map(|s| s.as_ref()).collect();
    parts.join(LABEL_SEPARATOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub label: String,
    pub output_dim: usize,
    pub kraus: Vec<ComplexMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intervention {
    input_dim: usize,
    outcomes: Vec<Outcome>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InterventionRepr {
    input_dim: usize,
    outcomes: Vec<Outcome>,
}

impl<'de> Deserialize<'de> for Intervention {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = InterventionRepr::deserialize(de)?;
        Intervention::new(r.input_dim, r.outcomes).map_err(serde::de::Error::custom)
    }
}

/// Deserializes without the completeness check, for diagnostics.
pub fn parse_intervention_unchecked(json: &[u8]) -> Result<Intervention> {
    let r: InterventionRepr =
        serde_json::from_slice(json).map_err(|e| Error::Parse(e.to_string()))?;
    Intervention::new_incomplete(r.input_dim, r.outcomes)
}

/// Like deserializing, but validation failures keep their own error
/// variant instead of becoming a parse error.
pub(crate) fn intervention_from_value(v: serde_json::Value) -> Result<Intervention> {
    let r: InterventionRepr = serde_json::from_value(v).map_err(|e| Error::Parse(e.to_string()))?;
    Intervention::new(r.input_dim, r.outcomes)
}

impl Intervention {
    /// Validates shapes and completeness `sum A^dagger A = I`.
    pub fn new(input_dim: usize, outcomes: Vec<Outcome>) -> Result<Self> {
        let k = Self::new_incomplete(input_dim, outcomes)?;
        let deviation = k.completeness_deviation();
        if deviation > tolerance::COMPLETENESS {
            return Err(Error::NotComplete { deviation });
        }
        Ok(k)
    }

    /// Validates shapes only. Such an intervention may be trace-decreasing
    /// or -increasing; it exists so that failing Kraus sets can be
    /// inspected and reported.
    pub fn new_incomplete(input_dim: usize, outcomes: Vec<Outcome>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArgument(
                "input_dim must be at least 1".into(),
            ));
        }
        if outcomes.is_empty() {
            return Err(Error::Empty("intervention needs at least one outcome"));
        }
        for (i, o) in outcomes.iter().enumerate() {
            if outcomes[..i].iter().any(|p| p.label == o.label) {
                return Err(Error::DuplicateOutcome(o.label.clone()));
            }
            if o.output_dim == 0 {
                return Err(Error::InvalidArgument(format!(
                    "outcome {:?} has output_dim 0",
                    o.label
                )));
            }
            if o.kraus.is_empty() {
                return Err(Error::Empty(
                    "every outcome needs at least one Kraus matrix",
                ));
            }
            for a in &o.kraus {
                if a.rows() != o.output_dim {
                    return Err(Error::dim(
                        format!("Kraus rows of outcome {:?}", o.label),
                        o.output_dim,
                        a.rows(),
                    ));
                }
                if a.cols() != input_dim {
                    return Err(Error::dim(
                        format!("Kraus columns of outcome {:?}", o.label),
                        input_dim,
                        a.cols(),
                    ));
                }
            }
        }
        Ok(Intervention {
            input_dim,
            outcomes,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.outcomes.iter().map(|o| o.label.as_str())
    }

    pub fn outcome(&self, label: &str) -> Result<&Outcome> {
        self.outcomes
            .iter()
            .find(|o| o.label == label)
            .ok_or_else(|| Error::UnknownOutcome(label.to_string()))
    }

    pub fn output_dim(&self, label: &str) -> Result<usize> {
        self.outcome(label).map(|o| o.output_dim)
    }

    /// Common output dimension, if all outcomes share one.
    pub fn uniform_output_dim(&self) -> Option<usize> {
        let d = self.outcomes[0].output_dim;
        self.outcomes.iter().all(|o| o.output_dim == d).then_some(d)
    }

    /// `E_mu = sum_m A^dagger A` without validation.
    pub fn effect(&self, label: &str) -> Result<ComplexMatrix> {
        Ok(effect_of(self.outcome(label)?, self.input_dim))
    }

    /// `max |sum_{mu,m} A^dagger A - I|`.
    pub fn completeness_deviation(&self) -> f64 {
        let mut sum = ComplexMatrix::zeros(self.input_dim, self.input_dim);
        for o in &self.outcomes {
            sum = &sum + &effect_of(o, self.input_dim);
        }
        sum.identity_deviation()
    }

    pub fn is_complete(&self) -> bool {
        self.completeness_deviation() <= tolerance::COMPLETENESS
    }

    /// Replaces labels via `f`, keeping Kraus matrices.
    pub fn relabeled(&self, f: impl Fn(&str) -> String) -> Result<Intervention> {
        let outcomes = self
            .outcomes
            .iter()
            .map(|o| Outcome {
                label: f(&o.label),
                ..o.clone()
            })
            .collect();
        Intervention::new_incomplete(self.input_dim, outcomes)
    }
}

fn effect_of(o: &Outcome, input_dim: usize) -> ComplexMatrix {
    let mut e = ComplexMatrix::zeros(input_dim, input_dim);
    for a in &o.kraus {
        e = &e + &(&a.adjoint() * a);
    }
    e
}

fn sandwich(kraus: &[ComplexMatrix], rho: &ComplexMatrix, out_dim: usize) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(out_dim, out_dim);
    for a in kraus {
        out = &out + &(&(a * rho) * &a.adjoint());
    }
    out.hermitian_part()
}

fn check_input(k: &Intervention, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != k.input_dim {
        return Err(Error::dim("intervention input", k.input_dim, rho.dim()));
    }
    Ok(())
}

/// Unnormalized post-measurement state for outcome `mu`; its trace is the
/// probability of `mu`.
pub fn apply_selective(k: &Intervention, rho: &DensityMatrix, mu: &str) -> Result<DensityMatrix> {
    let o = k.outcome(mu)?;
    check_input(k, rho)?;
    DensityMatrix::conditional(sandwich(&o.kraus, rho.matrix(), o.output_dim))
}

/// `p_mu = Tr(E_mu rho)` for each outcome of a normalized state.
pub fn outcome_probabilities(k: &Intervention, rho: &DensityMatrix) -> Result<Vec<(String, f64)>> {
    check_input(k, rho)?;
    if !rho.is_normalized() {
        return Err(Error::BadTrace {
            trace: rho.trace_norm(),
        });
    }
    Ok(k.outcomes
        .iter()
        .map(|o| {
            let p: f64 = o
                .kraus
                .iter()
                .map(|a| (&(a * rho.matrix()) * &a.adjoint()).trace().re)
                .sum();
            (o.label.clone(), clamp_probability(p))
        })
        .collect())
}

/// The POVM `E_mu = sum_m A_mu_m^dagger A_mu_m`.
pub fn povm_of(k: &Intervention) -> Result<Povm> {
    let elements = k
        .outcomes
        .iter()
        .map(|o| PovmElement {
            label: o.label.clone(),
            element: effect_of(o, k.input_dim).hermitian_part(),
        })
        .collect();
    Povm::new(k.input_dim, elements)
}

/// Average over unrecorded outcomes. All outcomes must share an output
/// dimension.
pub fn apply_nonselective(k: &Intervention, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = k
        .uniform_output_dim()
        .ok_or(Error::HeterogeneousOutputDims)?;
    check_input(k, rho)?;
    let mut out = ComplexMatrix::zeros(d, d);
    for o in &k.outcomes {
        out = &out + &sandwich(&o.kraus, rho.matrix(), d);
    }
    DensityMatrix::conditional(out.hermitian_part())
}

/// Choi matrix of outcome `mu`: `(A (x) I)|Omega><Omega|(A (x) I)^dagger`
/// summed over `m`, with `|Omega> = sum_i |i>|i> / sqrt(d)`. Positive
/// semidefinite exactly when the outcome map is completely positive.
pub fn choi_matrix(k: &Intervention, mu: &str) -> Result<ComplexMatrix> {
    let o = k.outcome(mu)?;
    let d = k.input_dim;
    let mut omega = vec![c(0.0, 0.0); d * d];
    let w = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        omega[i * d + i] = c(w, 0.0);
    }
    let omega = ComplexMatrix::projector(&omega);
    let id = ComplexMatrix::identity(d);
    let mut out = ComplexMatrix::zeros(o.output_dim * d, o.output_dim * d);
    for a in &o.kraus {
        let ext = tensor(a, &id)?;
        out = &out + &(&(&ext * &omega) * &ext.adjoint());
    }
    Ok(out.hermitian_part())
}

/// Interventions selected by the outcome of a preceding one.
///
/// Lookup for a prior label tries the exact label, then its most recent
/// component (text before the first [`LABEL_SEPARATOR`]), then
/// [`WILDCARD`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AdaptiveIntervention {
    branches: BTreeMap<String, Intervention>,
}

impl<'de> Deserialize<'de> for AdaptiveIntervention {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let branches = BTreeMap::<String, Intervention>::deserialize(de)?;
        AdaptiveIntervention::new(branches).map_err(serde::de::Error::custom)
    }
}

impl AdaptiveIntervention {
    pub fn new(branches: BTreeMap<String, Intervention>) -> Result<Self> {
        let a = Self::new_unchecked(branches)?;
        for k in a.branches.values() {
            let deviation = k.completeness_deviation();
            if deviation > tolerance::COMPLETENESS {
                return Err(Error::NotComplete { deviation });
            }
        }
        Ok(a)
    }

    /// No completeness requirement on the branches.
    pub fn new_unchecked(branches: BTreeMap<String, Intervention>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::Empty(
                "adaptive intervention needs at least one branch",
            ));
        }
        Ok(AdaptiveIntervention { branches })
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Intervention)>,
        S: Into<String>,
    {
        Self::new(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// The same intervention after every prior outcome.
    pub fn uniform(k: Intervention) -> Self {
        AdaptiveIntervention {
            branches: BTreeMap::from([(WILDCARD.to_string(), k)]),
        }
    }

    pub fn branches(&self) -> &BTreeMap<String, Intervention> {
        &self.branches
    }

    pub fn lookup(&self, prior: &str) -> Option<&Intervention> {
        if let Some(k) = self.branches.get(prior) {
            return Some(k);
        }
        let latest = prior.split(LABEL_SEPARATOR).next().unwrap_or(prior);
        self.branches
            .get(latest)
            .or_else(|| self.branches.get(WILDCARD))
    }

    fn branch(&self, prior: &str) -> Result<&Intervention> {
        self.lookup(prior)
            .ok_or_else(|| Error::MissingBranch(prior.to_string()))
    }
}

/// Sequential composition: `a` first, then `b[mu]` on the state left by
/// outcome `mu`. Outcome `"nu.mu"` has Kraus `B_nu_mu_n A_mu_m`.
pub fn compose(b: &AdaptiveIntervention, a: &Intervention) -> Result<Intervention> {
    let mut outcomes = Vec::new();
    for oa in &a.outcomes {
        let kb = b.branch(&oa.label)?;
        if kb.input_dim != oa.output_dim {
            return Err(Error::dim(
                format!("branch after outcome {:?}", oa.label),
                oa.output_dim,
                kb.input_dim,
            ));
        }
        for ob in &kb.outcomes {
            let mut kraus = Vec::with_capacity(oa.kraus.len() * ob.kraus.len());
            for am in &oa.kraus {
                for bn in &ob.kraus {
                    kraus.push(bn * am);
                }
            }
            outcomes.push(Outcome {
                label: join_labels(&[oa.label.as_str(), ob.label.as_str()]),
                output_dim: ob.output_dim,
                kraus,
            });
        }
    }
    Intervention::new(a.input_dim, outcomes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementBranch {
    /// Outcome of the first intervention.
    pub label: String,
    /// `max |sum_{nu,n} B^dagger B - I|` for the adapted branch.
    pub completeness_deviation: f64,
    /// `max |sum_nu E_nu_mu - E_mu|`.
    pub refinement_deviation: f64,
}

impl RefinementBranch {
    pub fn is_complete(&self) -> bool {
        self.completeness_deviation <= tolerance::COMPLETENESS
    }

    pub fn holds(&self) -> bool {
        self.is_complete() && self.refinement_deviation <= tolerance::COMPLETENESS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementReport {
    pub branches: Vec<RefinementBranch>,
}

impl RefinementReport {
    pub fn holds(&self) -> bool {
        self.branches.iter().all(RefinementBranch::holds)
    }

    pub fn max_completeness_deviation(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.completeness_deviation)
            .fold(0.0, f64::max)
    }
}

/// Checks, per outcome `mu` of `a`, whether the adapted second stage is
/// complete and whether the composed elements split `E_mu`:
/// `sum_nu E_nu_mu = E_mu`. Reports rather than fails.
pub fn check_refinement(b: &AdaptiveIntervention, a: &Intervention) -> Result<RefinementReport> {
    let mut branches = Vec::with_capacity(a.outcomes.len());
    for oa in &a.outcomes {
        let kb = b.branch(&oa.label)?;
        if kb.input_dim != oa.output_dim {
            return Err(Error::dim(
                format!("branch after outcome {:?}", oa.label),
                oa.output_dim,
                kb.input_dim,
            ));
        }
        let e_mu = effect_of(oa, a.input_dim);
        let mut split = ComplexMatrix::zeros(a.input_dim, a.input_dim);
        for ob in &kb.outcomes {
            for am in &oa.kraus {
                for bn in &ob.kraus {
                    let cm = bn * am;
                    split = &split + &(&cm.adjoint() * &cm);
                }
            }
        }
        branches.push(RefinementBranch {
            label: oa.label.clone(),
            completeness_deviation: kb.completeness_deviation(),
            refinement_deviation: split.max_abs_diff(&e_mu),
        });
    }
    Ok(RefinementReport { branches })
}

/// Complete list of outcomes of one run, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub outcome_sequence: Vec<String>,
    pub probability: f64,
}

impl Record {
    /// Composite label, latest outcome first.
    pub fn label(&self) -> String {
        join_labels(&self.outcome_sequence)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub record: Record,
    pub count: u64,
}

impl RecordRow {
    pub fn frequency(&self, shots: u64) -> f64 {
        if shots == 0 {
            0.0
        } else {
            self.count as f64 / shots as f64
        }
    }
}

/// Empirical record counts next to exact record probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordTable {
    pub rows: Vec<RecordRow>,
    pub shots: u64,
}

impl RecordTable {
    /// `(1/2) sum |frequency - probability|`.
    pub fn total_variation(&self) -> f64 {
        0.5 * self
            .rows
            .iter()
            .map(|r| (r.frequency(self.shots) - r.record.probability).abs())
            .sum::<f64>()
    }

    pub fn get(&self, label: &str) -> Option<&RecordRow> {
        self.rows.iter().find(|r| r.record.label() == label)
    }

    /// CSV with header `record_label,exact_probability,empirical_frequency,shots`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("record_label,exact_probability,empirical_frequency,shots\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::io::csv_field(&r.record.label()),
                crate::io::format_sig6(r.record.probability),
                crate::io::format_sig6(r.frequency(self.shots)),
                self.shots
            ));
        }
        out
    }
}

/// Node of the finite tree of possible records.
struct RecordNode {
    /// Chronological outcomes so far.
    history: Vec<String>,
    /// Exact joint probability from chained unnormalized traces.
    probability: f64,
    /// Children with conditional probabilities given this node.
    children: Vec<(usize, f64)>,
    leaf: Option<usize>,
}

/// Enumerates every record of the chain with positive probability.
/// Returns the tree (root at index 0) and the leaf records.
fn record_tree(
    stages: &[AdaptiveIntervention],
    rho0: &DensityMatrix,
) -> Result<(Vec<RecordNode>, Vec<Record>)> {
    let mut nodes = vec![RecordNode {
        history: Vec::new(),
        probability: 1.0,
        children: Vec::new(),
        leaf: None,
    }];
    let mut leaves = Vec::new();
    // (node index, unnormalized state reached along the chain)
    let mut frontier: Vec<(usize, DensityMatrix)> = vec![(0, rho0.clone())];
    for (depth, stage) in stages.iter().enumerate() {
        let mut next = Vec::new();
        for (idx, unnormalized) in frontier {
            let k = if depth == 0 {
                stage.branches.values().next().expect("nonempty")
            } else {
                stage.branch(&join_labels(&nodes[idx].history))?
            };
            let normalized =
                unnormalized
                    .normalized()
                    .ok_or_else(|| Error::ZeroProbabilityBranch {
                        label: join_labels(&nodes[idx].history),
                        probability: unnormalized.trace_norm(),
                    })?;
            let conditional = outcome_probabilities(k, &normalized)?;
            for (o, (_, p_cond)) in k.outcomes.iter().zip(conditional) {
                let child_state = apply_selective(k, &unnormalized, &o.label)?;
                let p_joint = child_state.trace_norm();
                if p_joint < tolerance::MIN_BRANCH_PROBABILITY || p_cond <= 0.0 {
                    continue;
                }
                let mut history = nodes[idx].history.clone();
                history.push(o.label.clone());
                let child = nodes.len();
                nodes.push(RecordNode {
                    history,
                    probability: p_joint,
                    children: Vec::new(),
                    leaf: None,
                });
                nodes[idx].children.push((child, p_cond));
                next.push((child, child_state));
            }
        }
        frontier = next;
    }
    for (idx, _) in frontier {
        nodes[idx].leaf = Some(leaves.len());
        leaves.push(Record {
            outcome_sequence: nodes[idx].history.clone(),
            probability: nodes[idx].probability,
        });
    }
    Ok((nodes, leaves))
}

fn check_chain_shape(stages: &[AdaptiveIntervention], rho0: &DensityMatrix) -> Result<()> {
    let first = stages
        .first()
        .ok_or(Error::Empty("record sampling needs at least one stage"))?;
    if first.branches.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "first stage must have exactly one root branch, found {}",
            first.branches.len()
        )));
    }
    if !rho0.is_normalized() {
        return Err(Error::BadTrace {
            trace: rho0.trace_norm(),
        });
    }
    Ok(())
}

/// Exact probabilities of every record of the chain.
pub fn exact_records(stages: &[AdaptiveIntervention], rho0: &DensityMatrix) -> Result<Vec<Record>> {
    check_chain_shape(stages, rho0)?;
    Ok(record_tree(stages, rho0)?.1)
}

/// Monte-Carlo sampling of measurement records.
///
/// Each shot samples the first outcome from the outcome probabilities,
/// conditions (renormalizing) on it, moves to the adapted next stage, and so
/// on. Shot `i` draws from `stream.substream(i)`, so counts are identical
/// for a given seed however the shots are distributed across threads.
/// Records with zero probability are omitted.
pub fn sample_records(
    stages: &[AdaptiveIntervention],
    rho0: &DensityMatrix,
    shots: u64,
    stream: Stream,
) -> Result<RecordTable> {
    check_chain_shape(stages, rho0)?;
    let (nodes, leaves) = record_tree(stages, rho0)?;

    let walk = |shot: u64| -> usize {
        let mut rng = stream.substream(shot).rng();
        let mut idx = 0;
        loop {
            let node = &nodes[idx];
            if let Some(leaf) = node.leaf {
                return leaf;
            }
            let total: f64 = node.children.iter().map(|&(_, p)| p).sum();
            let u: f64 = rand::Rng::random::<f64>(&mut rng) * total;
            let mut acc = 0.0;
            let mut chosen = node.children[node.children.len() - 1].0;
            for &(child, p) in &node.children {
                acc += p;
                if u < acc {
                    chosen = child;
                    break;
                }
            }
            idx = chosen;
        }
    };

    let counts = (0..shots)
        .into_par_iter()
        .fold(
            || vec![0u64; leaves.len()],
            |mut acc, shot| {
                acc[walk(shot)] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; leaves.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    Ok(RecordTable {
        rows: leaves
            .into_iter()
            .zip(counts)
            .map(|(record, count)| RecordRow { record, count })
            .collect(),
        shots,
    })
}
