//! Lindblad master equation as the coarse-time limit of repeated weak
//! interventions.
//!
//! With `hbar = 1`,
//!
//! ```text
//! d rho / dt = i [rho, H0] + sum_j (V_j rho V_j^dagger - 1/2 rho V_j^dagger V_j - 1/2 V_j^dagger V_j rho)
//! ```
//!
//! Evolution runs forward only: every entry point rejects non-positive
//! time steps.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::intervention::{apply_nonselective, Intervention, Outcome};
use crate::linalg::{c, polar_unitary, ComplexMatrix, C64};
use crate::state::{trace_distance, DensityMatrix};
use crate::tolerance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LindbladGenerator {
    dim: usize,
    #[serde(rename = "H0")]
    h0: ComplexMatrix,
    jumps: Vec<ComplexMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorRepr {
    dim: usize,
    #[serde(rename = "H0")]
    h0: ComplexMatrix,
    #[serde(default)]
    jumps: Vec<ComplexMatrix>,
}

impl<'de> Deserialize<'de> for LindbladGenerator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GeneratorRepr::deserialize(d)?;
        LindbladGenerator::new(r.dim, r.h0, r.jumps).map_err(serde::de::Error::custom)
    }
}

impl LindbladGenerator {
    pub fn new(dim: usize, h0: ComplexMatrix, jumps: Vec<ComplexMatrix>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty("generator dimension"));
        }
        if h0.shape() != (dim, dim) {
            return Err(Error::dim("H0", dim, h0.rows()));
        }
        let herm = h0.hermiticity_deviation();
        if herm > tolerance::HERMITIAN * h0.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: herm });
        }
        for v in &jumps {
            if v.shape() != (dim, dim) {
                return Err(Error::dim("jump operator", dim, v.rows()));
            }
        }
        Ok(LindbladGenerator { dim, h0, jumps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h0(&self) -> &ComplexMatrix {
        &self.h0
    }

    pub fn jumps(&self) -> &[ComplexMatrix] {
        &self.jumps
    }

    /// `sum_j V_j^dagger V_j`.
    pub fn jump_rate_operator(&self) -> ComplexMatrix {
        self.jumps
            .iter()
            .fold(ComplexMatrix::zeros(self.dim, self.dim), |acc, v| {
                &acc + &(&v.adjoint() * v)
            })
    }

    fn kernel(&self) -> RhsKernel {
        RhsKernel {
            h: self.h0.as_dmatrix().clone(),
            k_half: self.jump_rate_operator().into_dmatrix() * c(0.5, 0.0),
            jumps: self
                .jumps
                .iter()
                .map(|v| (v.as_dmatrix().clone(), v.as_dmatrix().adjoint()))
                .collect(),
        }
    }
}

/// Precomputed operators for repeated right-hand-side evaluations.
struct RhsKernel {
    h: DMatrix<C64>,
    k_half: DMatrix<C64>,
    jumps: Vec<(DMatrix<C64>, DMatrix<C64>)>,
}

impl RhsKernel {
    fn eval(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let i = c(0.0, 1.0);
        let mut out = (rho * &self.h - &self.h * rho) * i;
        out -= rho * &self.k_half + &self.k_half * rho;
        for (v, vd) in &self.jumps {
            out += v * rho * vd;
        }
        out
    }
}

pub fn lindblad_rhs(g: &LindbladGenerator, rho: &DensityMatrix) -> Result<ComplexMatrix> {
    if rho.dim() != g.dim {
        return Err(Error::dim("density matrix", g.dim, rho.dim()));
    }
    Ok(ComplexMatrix::from_dmatrix(g.kernel().eval(rho.matrix().as_dmatrix()))?.hermitian_part())
}

fn check_times(t: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NegativeTime { dt });
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "final time must be positive, got {t}"
        )));
    }
    if dt > t {
        return Err(Error::InvalidArgument(format!(
            "time step {dt} exceeds final time {t}"
        )));
    }
    Ok(())
}

/// Step sizes covering `[0, t]`: whole steps of `dt` plus a final partial
/// step when `t / dt` is not an integer.
fn step_sizes(t: f64, dt: f64) -> Vec<f64> {
    let whole = (t / dt).floor() as usize;
    let mut steps = vec![dt; whole];
    let rest = t - whole as f64 * dt;
    if rest > 1e-12 * t {
        steps.push(rest);
    }
    steps
}

fn rk4_step(kernel: &RhsKernel, rho: &DMatrix<C64>, h: f64) -> DMatrix<C64> {
    let hc = c(h, 0.0);
    let k1 = kernel.eval(rho);
    let k2 = kernel.eval(&(rho + &k1 * (hc * 0.5)));
    let k3 = kernel.eval(&(rho + &k2 * (hc * 0.5)));
    let k4 = kernel.eval(&(rho + &k3 * hc));
    rho + (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * (hc / 6.0)
}

fn validated(m: DMatrix<C64>, trace0: f64) -> Result<DensityMatrix> {
    let m = ComplexMatrix::from_dmatrix(m)?.hermitian_part();
    let tr = m.trace().re;
    if (tr - trace0).abs() > tolerance::INTEGRATOR_TRACE {
        return Err(Error::BadTrace { trace: tr });
    }
    DensityMatrix::with_psd_floor(m, tolerance::INTEGRATOR_PSD)
}

/// Classical fourth-order Runge-Kutta with fixed step `dt`.
pub fn integrate(
    g: &LindbladGenerator,
    rho0: &DensityMatrix,
    t: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    Ok(trajectory(g, rho0, t, dt, usize::MAX)?
        .pop()
        .expect("trajectory has a final point")
        .1)
}

/// Like [`integrate`], also returning intermediate states every `every`
/// steps. The first point is `(0, rho0)`, the last is always the final
/// time.
pub fn trajectory(
    g: &LindbladGenerator,
    rho0: &DensityMatrix,
    t: f64,
    dt: f64,
    every: usize,
) -> Result<Vec<(f64, DensityMatrix)>> {
    check_times(t, dt)?;
    if rho0.dim() != g.dim {
        return Err(Error::dim("density matrix", g.dim, rho0.dim()));
    }
    let every = every.max(1);
    let kernel = g.kernel();
    let steps = step_sizes(t, dt);
    let trace0 = rho0.trace_norm();
    let mut out = vec![(0.0, rho0.clone())];
    let mut rho = rho0.matrix().as_dmatrix().clone();
    let mut now = 0.0;
    for (n, h) in steps.iter().enumerate() {
        rho = rk4_step(&kernel, &rho, *h);
        now += h;
        let last = n + 1 == steps.len();
        if last || (n + 1) % every == 0 {
            out.push((if last { t } else { now }, validated(rho.clone(), trace0)?));
        }
    }
    Ok(out)
}

pub const SLOW_LABEL: &str = "slow";

pub fn jump_label(j: usize) -> String {
    format!("jump_{j}")
}

/// One coarse time step as an intervention: outcome `"slow"` with
/// `A_0 = W sqrt(I - dt sum_j V_j^dagger V_j)`, where `W` is the unitary
/// polar factor of the first-order `I - i H0 dt - 1/2 sum_j V_j^dagger V_j dt`,
/// and outcomes `"jump_j"` with `A_j = V_j sqrt(dt)`. The correction
/// changes `A_0` at second order and makes completeness exact.
pub fn kraus_step(g: &LindbladGenerator, delta_t: f64) -> Result<Intervention> {
    if !(delta_t > 0.0) || !delta_t.is_finite() {
        return Err(Error::NegativeTime { dt: delta_t });
    }
    let n = g.dim;
    let id = ComplexMatrix::identity(n);
    let k = g.jump_rate_operator();
    let first_order = &(&id - &g.h0.scale(c(0.0, delta_t))) - &k.scale_real(0.5 * delta_t);
    let remainder = &id - &k.scale_real(delta_t);
    let min = remainder.min_eigenvalue();
    if min <= 0.0 {
        return Err(Error::StepTooLarge {
            delta_t,
            min_eigenvalue: min,
        });
    }
    let w = polar_unitary(&first_order).ok_or(Error::StepTooLarge {
        delta_t,
        min_eigenvalue: min,
    })?;
    let a0 = &w * &remainder.hermitian_function(f64::sqrt);
    let mut outcomes = vec![Outcome {
        label: SLOW_LABEL.into(),
        output_dim: n,
        kraus: vec![a0],
    }];
    for (j, v) in g.jumps.iter().enumerate() {
        outcomes.push(Outcome {
            label: jump_label(j),
            output_dim: n,
            kraus: vec![v.scale_real(delta_t.sqrt())],
        });
    }
    Intervention::new(n, outcomes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    pub delta_t: f64,
    pub steps: usize,
    pub trace_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitComparison {
    pub rows: Vec<LimitRow>,
    /// Least-squares slope of `ln distance` against `ln delta_t`.
    pub order: f64,
}

impl LimitComparison {
    pub fn is_monotone(&self) -> bool {
        let mut sorted = self.rows.clone();
        sorted.sort_by(|a, b| b.delta_t.total_cmp(&a.delta_t));
        sorted
            .windows(2)
            .all(|w| w[1].trace_distance < w[0].trace_distance)
    }

    /// CSV with header `delta_t,steps,trace_distance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta_t,steps,trace_distance\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                crate::io::format_sig6(r.delta_t),
                r.steps,
                crate::io::format_sig6(r.trace_distance)
            ));
        }
        out
    }
}

pub const DEFAULT_DT_FINE: f64 = 1e-3;

/// Repeated non-selective Kraus steps against the RK4 reference at time
/// `t`. Each `delta_t` must divide `t` into a whole number of steps.
pub fn compare_limit(
    g: &LindbladGenerator,
    rho0: &DensityMatrix,
    t: f64,
    delta_ts: &[f64],
    dt_fine: f64,
) -> Result<LimitComparison> {
    if delta_ts.is_empty() {
        return Err(Error::Empty("step size list"));
    }
    let reference = integrate(g, rho0, t, dt_fine)?;
    let rows = delta_ts
        .par_iter()
        .map(|&delta_t| {
            if !(delta_t > 0.0) {
                return Err(Error::NegativeTime { dt: delta_t });
            }
            let steps = (t / delta_t).round() as usize;
            if steps == 0 || (steps as f64 * delta_t - t).abs() > 1e-9 * t {
                return Err(Error::InvalidArgument(format!(
                    "step {delta_t} does not divide time {t} evenly"
                )));
            }
            let step = kraus_step(g, delta_t)?;
            let mut rho = rho0.clone();
            for _ in 0..steps {
                rho = apply_nonselective(&step, &rho)?;
            }
            Ok(LimitRow {
                delta_t,
                steps,
                trace_distance: trace_distance(rho.matrix(), reference.matrix()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitComparison {
        order: fitted_order(&rows),
        rows,
    })
}

fn fitted_order(rows: &[LimitRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.trace_distance > 0.0)
        .map(|r| (r.delta_t.ln(), r.trace_distance.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    sxy / sxx
}
