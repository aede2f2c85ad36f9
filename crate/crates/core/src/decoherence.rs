//! Decoherence of the apparatus by an uncontrolled environment.
//!
//! Each outcome block `mu` of the system-apparatus state drives the
//! environment with its own evolution `B^(mu)`, so environment state
//! `|e_omega>` becomes `sum_alpha b_{mu omega alpha} |e_alpha>` with
//! `b_{mu omega .}` row `omega` of `B^(mu)`. Tracing out the environment
//! multiplies the `(mu, nu)` block of the system-apparatus density matrix by
//! the overlap
//!
//! ```text
//! G_{mu nu} = sum_omega p_omega sum_alpha b_{mu omega alpha} conj(b_{nu omega alpha})
//! ```
//!
//! which is 1 on the diagonal and small off it: of order `N^-1/2` for a pure
//! environment state and `N^-1` for a maximally mixed one.
//!
//! Two samplers produce `G`:
//!
//! - [`Sampler::HaarUnitaries`] draws every `B^(mu)` as a dense Haar
//!   unitary. Exact, `O(N^3)` per outcome.
//! - [`Sampler::GramRows`] draws, for each `omega` with `p_omega > 0`, the
//!   Gram matrix of the rows `b_{mu omega .}` directly through the complex
//!   Bartlett decomposition, in `O(n_outcomes^2)`. For a pure environment
//!   this has exactly the same distribution as the dense sampler (distinct
//!   `B^(mu)` are independent, and a row of a Haar unitary is a uniform unit
//!   vector). For mixed environments it treats rows of one `B^(mu)` as
//!   independent, which keeps each term's distribution and the second
//!   moment of `G` (`E|G_{mu nu}|^2 = sum_omega p_omega^2 / N`) but drops
//!   higher-order correlations between rows.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use crate::dilation::CompositeState;
use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, C64};
use crate::random::{complex_gaussian, random_haar_unitary, Stream};
use crate::state::{trace_distance, DensityMatrix, PureState};
use crate::tolerance;

#[derive(Debug, Clone, PartialEq)]
pub enum EnvironmentMode {
    /// Environment starts in basis state `|e_omega>`.
    Pure { omega: usize },
    /// Environment starts in `sum_omega p_omega |e_omega><e_omega|`;
    /// `None` means uniform weights `1/N`.
    Mixed { weights: Option<Vec<f64>> },
}

impl EnvironmentMode {
    pub fn pure() -> Self {
        EnvironmentMode::Pure { omega: 0 }
    }

    pub fn mixed() -> Self {
        EnvironmentMode::Mixed { weights: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    HaarUnitaries,
    GramRows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentModel {
    n_outcomes: usize,
    env_dim: usize,
    mode: EnvironmentMode,
    sampler: Sampler,
    identical: bool,
}

impl EnvironmentModel {
    pub fn new(n_outcomes: usize, env_dim: usize, mode: EnvironmentMode) -> Result<Self> {
        if n_outcomes < 2 {
            return Err(Error::BadEnvironment(format!(
                "need at least 2 outcomes, got {n_outcomes}"
            )));
        }
        if env_dim < n_outcomes {
            return Err(Error::BadEnvironment(format!(
                "environment dimension {env_dim} is smaller than the number of outcomes {n_outcomes}"
            )));
        }
        match &mode {
            EnvironmentMode::Pure { omega } if *omega >= env_dim => {
                return Err(Error::BadEnvironment(format!(
                    "initial basis state {omega} out of range"
                )))
            }
            EnvironmentMode::Mixed { weights: Some(w) } => {
                if w.len() != env_dim {
                    return Err(Error::BadEnvironment(format!(
                        "{} weights for dimension {env_dim}",
                        w.len()
                    )));
                }
                if w.iter().any(|&p| !p.is_finite() || p < 0.0) {
                    return Err(Error::BadEnvironment(
                        "weights must be finite and non-negative".into(),
                    ));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > tolerance::TRACE {
                    return Err(Error::BadEnvironment(format!(
                        "weights sum to {total}, not 1"
                    )));
                }
            }
            _ => {}
        }
        Ok(EnvironmentModel {
            n_outcomes,
            env_dim,
            mode,
            sampler: Sampler::GramRows,
            identical: false,
        })
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = sampler;
        self
    }

    /// Test hook: every outcome drives the environment identically, so
    /// nothing decoheres.
    pub fn with_identical_environments(mut self) -> Self {
        self.identical = true;
        self
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn mode(&self) -> &EnvironmentMode {
        &self.mode
    }

    pub fn sampler(&self) -> Sampler {
        self.sampler
    }

    fn weights(&self) -> Vec<(usize, f64)> {
        match &self.mode {
            EnvironmentMode::Pure { omega } => vec![(*omega, 1.0)],
            EnvironmentMode::Mixed { weights: None } => {
                let p = 1.0 / self.env_dim as f64;
                (0..self.env_dim).map(|w| (w, p)).collect()
            }
            EnvironmentMode::Mixed { weights: Some(w) } => w
                .iter()
                .copied()
                .enumerate()
                .filter(|&(_, p)| p > 0.0)
                .collect(),
        }
    }

    fn outcome_stream(&self, stream: Stream, mu: usize) -> Stream {
        stream.substream(if self.identical { 0 } else { mu as u64 })
    }
}

/// Hermitian `n_outcomes x n_outcomes` overlap matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    matrix: ComplexMatrix,
}

impl OverlapMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn get(&self, mu: usize, nu: usize) -> C64 {
        self.matrix.get(mu, nu)
    }

    /// Root mean square of `|G_{mu nu}|` over ordered pairs `mu != nu`.
    pub fn rms_offdiag(&self) -> f64 {
        self.mean_sq_offdiag().sqrt()
    }

    fn mean_sq_offdiag(&self) -> f64 {
        let n = self.matrix.rows();
        let mut acc = 0.0;
        for mu in 0..n {
            for nu in 0..n {
                if mu != nu {
                    acc += self.matrix.get(mu, nu).norm_sqr();
                }
            }
        }
        acc / (n * (n - 1)) as f64
    }

    /// `max |G_{mu mu} - 1|`.
    pub fn diagonal_deviation(&self) -> f64 {
        (0..self.matrix.rows())
            .map(|mu| (self.matrix.get(mu, mu) - c(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }
}

/// Dense Haar unitaries `B^(mu)`, one per outcome.
pub fn sample_unitaries(model: &EnvironmentModel, stream: Stream) -> Vec<ComplexMatrix> {
    (0..model.n_outcomes)
        .map(|mu| random_haar_unitary(model.env_dim, &mut model.outcome_stream(stream, mu).rng()))
        .collect()
}

/// Overlap matrix from explicit evolution matrices.
pub fn overlaps_from_unitaries(
    model: &EnvironmentModel,
    unitaries: &[ComplexMatrix],
) -> Result<OverlapMatrix> {
    if unitaries.len() != model.n_outcomes {
        return Err(Error::dim(
            "environment evolutions",
            model.n_outcomes,
            unitaries.len(),
        ));
    }
    for u in unitaries {
        if u.shape() != (model.env_dim, model.env_dim) {
            return Err(Error::dim("environment evolution", model.env_dim, u.rows()));
        }
    }
    let n = model.n_outcomes;
    let weights = model.weights();
    let mut g = ComplexMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            let mut acc = c(0.0, 0.0);
            for &(omega, p) in &weights {
                let mut row = c(0.0, 0.0);
                for alpha in 0..model.env_dim {
                    row += unitaries[mu].get(omega, alpha) * unitaries[nu].get(omega, alpha).conj();
                }
                acc += row * p;
            }
            g.set(mu, nu, acc);
        }
    }
    Ok(OverlapMatrix { matrix: g })
}

/// Gram matrix of `n` independent uniform unit vectors in `C^dim`, via the
/// complex Bartlett factor `W = L L^dagger` of a Wishart matrix, normalized
/// to unit diagonal.
fn unit_vector_gram<R: Rng + ?Sized>(
    n: usize,
    dim: usize,
    identical: bool,
    rng: &mut R,
) -> Vec<Vec<C64>> {
    if identical {
        return vec![vec![c(1.0, 0.0); n]; n];
    }
    let mut l = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        let shape = (dim - i) as f64;
        let gamma = Gamma::new(shape, 1.0).expect("positive shape");
        l[i][i] = c(gamma.sample(rng).sqrt(), 0.0);
        for j in 0..i {
            // CN(0, 1), unit variance per complex entry
            l[i][j] = complex_gaussian(rng);
        }
    }
    let mut w = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            w[i][j] = (0..n).map(|k| l[i][k] * l[j][k].conj()).sum();
        }
    }
    let diag: Vec<f64> = (0..n).map(|i| w[i][i].re).collect();
    for i in 0..n {
        for j in 0..n {
            w[i][j] /= (diag[i] * diag[j]).sqrt();
        }
        w[i][i] = c(1.0, 0.0);
    }
    w
}

/// Samples the overlap matrix `G` for one realization of the environment.
pub fn environment_overlaps(model: &EnvironmentModel, stream: Stream) -> OverlapMatrix {
    match model.sampler {
        Sampler::HaarUnitaries => {
            let us = sample_unitaries(model, stream);
            overlaps_from_unitaries(model, &us).expect("shapes match by construction")
        }
        Sampler::GramRows => {
            let n = model.n_outcomes;
            let mut g = ComplexMatrix::zeros(n, n);
            for (k, (_, p)) in model.weights().into_iter().enumerate() {
                let mut rng = stream.substream(k as u64).rng();
                let gram = unit_vector_gram(n, model.env_dim, model.identical, &mut rng);
                for mu in 0..n {
                    for nu in 0..n {
                        g.set(mu, nu, g.get(mu, nu) + gram[mu][nu] * p);
                    }
                }
            }
            OverlapMatrix { matrix: g }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub env_dim: usize,
    pub rms_offdiag: f64,
    /// Standard error of `rms_offdiag` (delta method on the mean square).
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingScan {
    pub rows: Vec<ScanRow>,
    /// Weighted least-squares slope of `ln rms` against `ln N`.
    pub slope: f64,
    pub slope_stderr: f64,
}

impl ScalingScan {
    /// CSV with header `N,rms_offdiag,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,rms_offdiag,stderr\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                r.env_dim,
                crate::io::format_sig6(r.rms_offdiag),
                crate::io::format_sig6(r.stderr)
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "slope {} +/- {}",
            crate::io::format_sig6(self.slope),
            crate::io::format_sig6(self.slope_stderr)
        )
    }
}

/// RMS off-diagonal overlap as a function of the environment dimension,
/// with the fitted log-log slope. Trial `t` at dimension index `i` uses
/// `stream.substream(i).substream(t)`.
pub fn scaling_scan(
    env_dims: &[usize],
    trials: usize,
    mode: EnvironmentMode,
    n_outcomes: usize,
    stream: Stream,
) -> Result<ScalingScan> {
    if env_dims.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least 3 environment dimensions".into(),
        ));
    }
    let min = *env_dims.iter().min().expect("nonempty");
    let max = *env_dims.iter().max().expect("nonempty");
    if max < 4 * min {
        return Err(Error::InvalidArgument(
            "environment dimensions must span at least 2 octaves".into(),
        ));
    }
    if trials < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 trials, got {trials}"
        )));
    }
    let pairs = n_outcomes * (n_outcomes - 1);
    let mut rows = Vec::with_capacity(env_dims.len());
    for (i, &dim) in env_dims.iter().enumerate() {
        let model = EnvironmentModel::new(n_outcomes, dim, mode.clone())?;
        let base = stream.substream(i as u64);
        // per-trial, per-pair |G|^2 samples
        let samples: Vec<f64> = (0..trials)
            .into_par_iter()
            .flat_map_iter(|t| {
                let g = environment_overlaps(&model, base.substream(t as u64));
                let mut v = Vec::with_capacity(pairs);
                for mu in 0..n_outcomes {
                    for nu in 0..n_outcomes {
                        if mu != nu {
                            v.push(g.get(mu, nu).norm_sqr());
                        }
                    }
                }
                v
            })
            .collect();
        let count = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / count;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
        let rms = mean.sqrt();
        let se_mean = (var / count).sqrt();
        rows.push(ScanRow {
            env_dim: dim,
            rms_offdiag: rms,
            stderr: se_mean / (2.0 * rms),
        });
    }
    let (slope, slope_stderr) = weighted_loglog_slope(&rows);
    Ok(ScalingScan {
        rows,
        slope,
        slope_stderr,
    })
}

fn weighted_loglog_slope(rows: &[ScanRow]) -> (f64, f64) {
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            let sigma = (r.stderr / r.rms_offdiag).max(1e-300);
            (
                (r.env_dim as f64).ln(),
                r.rms_offdiag.ln(),
                1.0 / (sigma * sigma),
            )
        })
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let xm = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ym = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xm) * (p.1 - ym)).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoheredState {
    /// System-apparatus state with the environment traced out.
    pub exact_reduced: DensityMatrix,
    /// Block-diagonal mixture `sum_mu |psi_mu><psi_mu|`.
    pub ideal_mixture: DensityMatrix,
    pub trace_distance: f64,
    pub overlaps: OverlapMatrix,
}

fn block_of_columns(psi1: &CompositeState) -> Vec<usize> {
    let mut owner = vec![0; psi1.dim()];
    for (b, block) in psi1.blocks().iter().enumerate() {
        for (i, o) in owner.iter_mut().enumerate() {
            if psi1.columns()[i].mu == block.label {
                *o = b;
            }
        }
    }
    owner
}

/// Couples the premeasured state to a sampled environment and compares the
/// reduced state with the ideal block-diagonal mixture.
pub fn decohered_state(
    psi1: &CompositeState,
    model: &EnvironmentModel,
    stream: Stream,
) -> Result<DecoheredState> {
    let overlaps = environment_overlaps(model, stream);
    decohered_with_overlaps(psi1, model, overlaps)
}

/// Same, with an explicit overlap matrix.
pub fn decohered_with_overlaps(
    psi1: &CompositeState,
    model: &EnvironmentModel,
    overlaps: OverlapMatrix,
) -> Result<DecoheredState> {
    if psi1.blocks().len() != model.n_outcomes {
        return Err(Error::dim(
            "outcome blocks",
            model.n_outcomes,
            psi1.blocks().len(),
        ));
    }
    let owner = block_of_columns(psi1);
    let amps = psi1.amplitudes();
    let d = amps.len();
    let mut exact = ComplexMatrix::zeros(d, d);
    let mut ideal = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let base = amps[i] * amps[j].conj();
            exact.set(i, j, base * overlaps.get(owner[i], owner[j]));
            if owner[i] == owner[j] {
                ideal.set(i, j, base);
            }
        }
    }
    let exact = DensityMatrix::conditional(exact.hermitian_part())?;
    let ideal = DensityMatrix::conditional(ideal.hermitian_part())?;
    let dist = trace_distance(exact.matrix(), ideal.matrix());
    Ok(DecoheredState {
        exact_reduced: exact,
        ideal_mixture: ideal,
        trace_distance: dist,
        overlaps,
    })
}

/// The full system-apparatus-environment vector for a pure environment
/// and explicit evolutions `B^(mu)`, ordered as `(composite index) (x)
/// (environment index)`. Used to check the reduced state by an explicit
/// partial trace.
pub fn entangle_with_environment(
    psi1: &CompositeState,
    unitaries: &[ComplexMatrix],
    omega: usize,
) -> Result<PureState> {
    if unitaries.len() != psi1.blocks().len() {
        return Err(Error::dim(
            "environment evolutions",
            psi1.blocks().len(),
            unitaries.len(),
        ));
    }
    let n = unitaries[0].rows();
    let owner = block_of_columns(psi1);
    let mut amps = Vec::with_capacity(psi1.dim() * n);
    for (i, a) in psi1.amplitudes().iter().enumerate() {
        let u = &unitaries[owner[i]];
        for alpha in 0..n {
            amps.push(a * u.get(omega, alpha));
        }
    }
    PureState::normalized(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilation::{isometry_from_kraus, premeasure};
    use crate::fixtures::computational_pvm;
    use crate::state::partial_trace;

    fn plus_premeasured() -> CompositeState {
        let d = isometry_from_kraus(&computational_pvm(2)).unwrap();
        let plus = PureState::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        premeasure(&d, &plus).unwrap()
    }

    #[test]
    fn model_validation() {
        assert!(EnvironmentModel::new(1, 8, EnvironmentMode::pure()).is_err());
        assert!(EnvironmentModel::new(3, 2, EnvironmentMode::pure()).is_err());
        assert!(EnvironmentModel::new(2, 4, EnvironmentMode::Pure { omega: 4 }).is_err());
        let w = Some(vec![0.5, 0.5, 0.5, -0.5]);
        assert!(EnvironmentModel::new(2, 4, EnvironmentMode::Mixed { weights: w }).is_err());
        let w = Some(vec![0.25; 3]);
        assert!(EnvironmentModel::new(2, 4, EnvironmentMode::Mixed { weights: w }).is_err());
    }

    #[test]
    fn identical_environments_never_decohere() {
        for sampler in [Sampler::HaarUnitaries, Sampler::GramRows] {
            let model = EnvironmentModel::new(2, 16, EnvironmentMode::pure())
                .unwrap()
                .with_sampler(sampler)
                .with_identical_environments();
            let g = environment_overlaps(&model, Stream::new(1));
            assert!((g.get(0, 1) - c(1.0, 0.0)).norm() < 1e-12, "{sampler:?}");
        }
    }

    #[test]
    fn diagonal_is_one() {
        for sampler in [Sampler::HaarUnitaries, Sampler::GramRows] {
            for mode in [EnvironmentMode::pure(), EnvironmentMode::mixed()] {
                let model = EnvironmentModel::new(3, 24, mode)
                    .unwrap()
                    .with_sampler(sampler);
                for t in 0..5 {
                    let g = environment_overlaps(&model, Stream::new(t));
                    assert!(g.diagonal_deviation() < 1e-10);
                    assert!(g.matrix().hermiticity_deviation() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampled_unitaries_are_unitary() {
        let model = EnvironmentModel::new(2, 20, EnvironmentMode::mixed()).unwrap();
        for u in sample_unitaries(&model, Stream::new(3)) {
            assert!(u.row_orthonormality_deviation() < 1e-10);
        }
    }

    fn rms_over_trials(model: &EnvironmentModel, trials: u64, seed: u64) -> f64 {
        let s = Stream::new(seed);
        let ms: f64 = (0..trials)
            .map(|t| {
                environment_overlaps(model, s.substream(t))
                    .rms_offdiag()
                    .powi(2)
            })
            .sum::<f64>()
            / trials as f64;
        ms.sqrt()
    }

    #[test]
    fn pure_rms_matches_inverse_sqrt_n() {
        // E|<u, v>|^2 = 1/N for independent uniform unit vectors: N = 256 -> 0.0625.
        let model = EnvironmentModel::new(2, 256, EnvironmentMode::pure()).unwrap();
        let rms = rms_over_trials(&model, 2000, 11);
        assert!((rms - 0.0625).abs() < 0.0625 * 0.05, "{rms}");
    }

    #[test]
    fn samplers_agree_in_rms() {
        // Dense Haar against the Gram sampler at a size where both are cheap.
        let n = 32;
        for (mode, expected) in [
            (EnvironmentMode::pure(), (n as f64).powf(-0.5)),
            (EnvironmentMode::mixed(), 1.0 / n as f64),
        ] {
            let dense = EnvironmentModel::new(2, n, mode.clone())
                .unwrap()
                .with_sampler(Sampler::HaarUnitaries);
            let rows = EnvironmentModel::new(2, n, mode.clone()).unwrap();
            let a = rms_over_trials(&dense, 800, 5);
            let b = rms_over_trials(&rows, 800, 6);
            assert!(
                (a - expected).abs() < expected * 0.1,
                "{mode:?} dense {a} vs {expected}"
            );
            assert!(
                (b - expected).abs() < expected * 0.1,
                "{mode:?} rows {b} vs {expected}"
            );
        }
    }

    #[test]
    fn scan_preconditions() {
        let s = Stream::new(1);
        assert!(scaling_scan(&[16, 64], 100, EnvironmentMode::pure(), 2, s).is_err());
        assert!(scaling_scan(&[16, 20, 32], 100, EnvironmentMode::pure(), 2, s).is_err());
        assert!(scaling_scan(&[16, 64, 256], 50, EnvironmentMode::pure(), 2, s).is_err());
    }

    #[test]
    fn scan_pure_and_mixed_slopes() {
        let dims = [16, 64, 256, 1024];
        let pure = scaling_scan(&dims, 200, EnvironmentMode::pure(), 2, Stream::new(10)).unwrap();
        assert!((pure.slope + 0.5).abs() < 0.1, "{}", pure.summary());
        let mixed = scaling_scan(&dims, 200, EnvironmentMode::mixed(), 2, Stream::new(10)).unwrap();
        assert!((mixed.slope + 1.0).abs() < 0.15, "{}", mixed.summary());
    }

    #[test]
    fn doubling_trials_shrinks_slope_error() {
        let dims = [16, 64, 256];
        let a = scaling_scan(&dims, 200, EnvironmentMode::pure(), 2, Stream::new(1)).unwrap();
        let b = scaling_scan(&dims, 400, EnvironmentMode::pure(), 2, Stream::new(2)).unwrap();
        let ratio = b.slope_stderr / a.slope_stderr;
        assert!(
            (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.1,
            "{ratio}"
        );
    }

    #[test]
    fn scan_is_deterministic() {
        let dims = [16, 64, 256];
        let a = scaling_scan(&dims, 100, EnvironmentMode::mixed(), 3, Stream::new(4)).unwrap();
        let b = scaling_scan(&dims, 100, EnvironmentMode::mixed(), 3, Stream::new(4)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn forced_equal_environment_keeps_coherence() {
        let psi1 = plus_premeasured();
        let model = EnvironmentModel::new(2, 8, EnvironmentMode::pure())
            .unwrap()
            .with_identical_environments();
        let out = decohered_state(&psi1, &model, Stream::new(1)).unwrap();
        let full = ComplexMatrix::projector(psi1.amplitudes());
        assert!(out.exact_reduced.matrix().max_abs_diff(&full) < 1e-12);
        // coherence mass |psi_0| |psi_1| = 0.5 for equal blocks
        assert!((out.trace_distance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reduced_state_matches_explicit_partial_trace() {
        let psi1 = plus_premeasured();
        let model = EnvironmentModel::new(2, 6, EnvironmentMode::pure())
            .unwrap()
            .with_sampler(Sampler::HaarUnitaries);
        let stream = Stream::new(8);
        let out = decohered_state(&psi1, &model, stream).unwrap();
        let us = sample_unitaries(&model, stream);
        let psi2 = entangle_with_environment(&psi1, &us, 0).unwrap();
        let reduced = partial_trace(&psi2.density(), &[psi1.dim(), 6], &[0]).unwrap();
        assert!(reduced.matrix().max_abs_diff(out.exact_reduced.matrix()) < 1e-12);
    }

    #[test]
    fn mixed_reduced_state_is_weighted_average() {
        let psi1 = plus_premeasured();
        let weights = vec![0.5, 0.3, 0.2, 0.0];
        let model = EnvironmentModel::new(
            2,
            4,
            EnvironmentMode::Mixed {
                weights: Some(weights.clone()),
            },
        )
        .unwrap()
        .with_sampler(Sampler::HaarUnitaries);
        let stream = Stream::new(12);
        let out = decohered_state(&psi1, &model, stream).unwrap();
        let us = sample_unitaries(&model, stream);
        let mut avg = ComplexMatrix::zeros(psi1.dim(), psi1.dim());
        for (omega, p) in weights.iter().enumerate() {
            let psi2 = entangle_with_environment(&psi1, &us, omega).unwrap();
            let r = partial_trace(&psi2.density(), &[psi1.dim(), 4], &[0]).unwrap();
            avg = &avg + &r.matrix().scale_real(*p);
        }
        assert!(avg.max_abs_diff(out.exact_reduced.matrix()) < 1e-12);
    }

    #[test]
    fn block_structure_and_validity() {
        let psi1 = plus_premeasured();
        let model = EnvironmentModel::new(2, 64, EnvironmentMode::pure()).unwrap();
        let out = decohered_state(&psi1, &model, Stream::new(2)).unwrap();
        assert!((out.exact_reduced.trace_norm() - 1.0).abs() < 1e-9);
        assert!((out.ideal_mixture.trace_norm() - 1.0).abs() < 1e-9);
        assert!(out.exact_reduced.min_eigenvalue() > -1e-9);
        // block-diagonal part of the exact state is the ideal mixture
        for i in 0..4 {
            for j in 0..4 {
                if psi1.columns()[i].mu == psi1.columns()[j].mu {
                    let diff =
                        out.exact_reduced.matrix().get(i, j) - out.ideal_mixture.matrix().get(i, j);
                    assert!(diff.norm() < 1e-9);
                }
            }
        }
        // ideal block traces equal premeasurement weights
        for (b, (_, w)) in psi1.blocks().iter().zip(psi1.block_weights()) {
            let tr: f64 = (b.offset..b.offset + b.sigma_dim * b.m_dim)
                .map(|i| out.ideal_mixture.matrix().get(i, i).re)
                .sum();
            assert!((tr - w).abs() < 1e-15);
        }
    }

    #[test]
    fn large_pure_environment_is_nearly_ideal() {
        let psi1 = plus_premeasured();
        let model = EnvironmentModel::new(2, 1024, EnvironmentMode::pure()).unwrap();
        let mut ds: Vec<f64> = (0..51)
            .map(|t| {
                decohered_state(&psi1, &model, Stream::new(100 + t))
                    .unwrap()
                    .trace_distance
            })
            .collect();
        ds.sort_by(f64::total_cmp);
        assert!(ds[25] <= 0.05, "median {}", ds[25]);
    }
}
