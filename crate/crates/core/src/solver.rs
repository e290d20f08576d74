//! Free evolution, the Picard fixed point for `∂t u + Lu = φ(u)`, lifespan
//! estimation and uniqueness probes.

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::duhamel::{duhamel_source, evolve};
use crate::ensemble;
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, SpaceTimeField, TimeLadder};
use crate::operator::{lp_norm, phi1, DiscreteOperator};
use crate::spaces::{besov_norm, weighted_lp_norm, z_norm, BesovParams, LPLadder, ZParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityKind {
    /// `μ |u|^ρ u` with `μ = ±1`.
    Power { mu: f64 },
    /// `u - u³`, valid for `|u| <= range`.
    AllenCahn { range: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    pub rho: f64,
    /// Growth constant.
    pub c_g: f64,
    /// Lipschitz constant.
    pub c_l: f64,
}

impl NonlinearitySpec {
    pub fn power(rho: f64, mu: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParams(format!("growth exponent {rho} must be positive")));
        }
        if mu != 1.0 && mu != -1.0 {
            return Err(Error::InvalidParams(format!("sign mu = {mu} must be +1 or -1")));
        }
        Ok(Self { kind: NonlinearityKind::Power { mu }, rho, c_g: 1.0, c_l: 1.0 + rho })
    }

    pub fn allen_cahn(range: f64) -> Result<Self> {
        if !(range > 0.0) {
            return Err(Error::InvalidParams("Allen-Cahn range must be positive".into()));
        }
        Ok(Self { kind: NonlinearityKind::AllenCahn { range }, rho: 2.0, c_g: 1.0, c_l: 1.5 })
    }

    pub fn eval(&self, u: f64) -> Result<f64> {
        match self.kind {
            NonlinearityKind::Power { mu } => Ok(mu * u.abs().powf(self.rho) * u),
            NonlinearityKind::AllenCahn { range } => {
                if u.abs() > range {
                    Err(Error::RangeExceeded { value: u, range })
                } else {
                    Ok(u - u * u * u)
                }
            }
        }
    }

    /// Right side of the growth bound. The Allen-Cahn term carries an extra
    /// linear part since `u - u³` is not `O(|u|³)` near zero.
    pub fn growth_bound(&self, u: f64) -> f64 {
        let a = u.abs();
        match self.kind {
            NonlinearityKind::Power { .. } => self.c_g * a.powf(1.0 + self.rho),
            NonlinearityKind::AllenCahn { .. } => self.c_g * (a + a.powf(1.0 + self.rho)),
        }
    }

    pub fn lipschitz_bound(&self, u: f64, v: f64) -> f64 {
        let s = u.abs().powf(self.rho) + v.abs().powf(self.rho);
        let d = (u - v).abs();
        match self.kind {
            NonlinearityKind::Power { .. } => self.c_l * s * d,
            NonlinearityKind::AllenCahn { .. } => (1.0 + self.c_l * s) * d,
        }
    }

    /// Counts sample pairs in `[-R, R]` violating either bound.
    pub fn check_bounds(&self, samples: usize, range: f64, seed: u64) -> Result<usize> {
        let mut rng = ensemble::rng(seed);
        let mut bad = 0;
        for _ in 0..samples {
            let u = rng.random_range(-range..=range);
            let v = rng.random_range(-range..=range);
            let (fu, fv) = (self.eval(u)?, self.eval(v)?);
            let slack = 1e-12 * (1.0 + fu.abs() + fv.abs());
            if fu.abs() > self.growth_bound(u) + slack || (fu - fv).abs() > self.lipschitz_bound(u, v) + slack {
                bad += 1;
            }
        }
        Ok(bad)
    }
}

/// Pointwise `φ(u)`.
pub fn apply_nonlinearity(spec: &NonlinearitySpec, u: &SpaceTimeField) -> Result<SpaceTimeField> {
    let mut out = u.clone();
    for v in out.values_mut() {
        *v = spec.eval(*v)?;
    }
    Ok(out)
}

fn apply_slice(spec: &NonlinearitySpec, u: &[f64]) -> Result<Vec<f64>> {
    u.iter().map(|&v| spec.eval(v)).collect()
}

/// `t ↦ e^{-tL} u0` at the ladder samples.
pub fn free_evolution(op: &DiscreteOperator, u0: &[f64], ladder: &Arc<TimeLadder>) -> Result<SpaceTimeField> {
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite initial datum".into()));
    }
    Ok(evolve(op, ladder, Some(u0), None)?.mids)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PicardInit {
    /// Start from `E_L(u0)`.
    Free,
    Zero,
    /// Start from `c E_L(u0)`.
    Scaled(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    /// Integrability of the contraction metric `L^r_{n/2r - 1/ρ}`.
    pub r: f64,
    pub lambda_ball: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub init: PicardInit,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { r: 5.0, lambda_ball: 1.0, max_iter: 60, tol: 1e-10, init: PicardInit::Free }
    }
}

#[derive(Debug, Clone)]
pub struct MildSolution {
    pub u: SpaceTimeField,
    pub free: SpaceTimeField,
    pub iterations: usize,
    pub converged: bool,
    /// Metric distance between successive iterates.
    pub increments: Vec<f64>,
    /// Ratios of successive increments.
    pub contraction: Vec<f64>,
    /// `‖u - E(u0) - ℒ¹(φ(u))‖ / ‖u‖` in the contraction metric.
    pub residual: f64,
    pub lambda_ball: f64,
    /// Metric norm of `u - E(u0)`.
    pub ball_norm: f64,
    pub inside_ball: bool,
    pub horizon: f64,
    pub metric_r: f64,
    pub metric_beta: f64,
}

impl MildSolution {
    pub fn contraction_max(&self) -> f64 {
        self.contraction.iter().cloned().fold(0.0, f64::max)
    }
}

/// `β = n/(2r) - 1/ρ`.
pub fn metric_weight(n: usize, r: f64, rho: f64) -> f64 {
    n as f64 / (2.0 * r) - 1.0 / rho
}

/// Iterates `Θ(v) = E(u0) + ℒ¹(φ(v))` until the relative increment is below `tol`.
pub fn picard_solve(
    op: &DiscreteOperator,
    u0: &[f64],
    ladder: &Arc<TimeLadder>,
    spec: &NonlinearitySpec,
    opts: &PicardOptions,
) -> Result<MildSolution> {
    if !(opts.r > 1.0 && opts.tol > 0.0 && opts.max_iter >= 1 && opts.lambda_ball > 0.0) {
        return Err(Error::InvalidParams("need r > 1, tol > 0, max_iter >= 1, lambda_ball > 0".into()));
    }
    let beta = metric_weight(op.grid().dim(), opts.r, spec.rho);
    let horizon = ladder.horizon();
    let metric = |u: &SpaceTimeField| weighted_lp_norm(u, opts.r, beta, horizon);
    let free = free_evolution(op, u0, ladder)?;
    let mut v = match opts.init {
        PicardInit::Free => free.clone(),
        PicardInit::Zero => SpaceTimeField::zeros(op.grid(), ladder),
        PicardInit::Scaled(c) => free.scaled(c),
    };
    let mut increments = Vec::new();
    let mut contraction = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let w = free.add(&duhamel_source(op, &apply_nonlinearity(spec, &v)?)?)?;
        if !w.is_finite() {
            return Err(Error::NumericalFailure("Picard iterate is not finite".into()));
        }
        let inc = metric(&w.sub(&v)?);
        if let Some(&prev) = increments.last() {
            if prev > 0.0 {
                contraction.push(inc / prev);
            }
        }
        increments.push(inc);
        v = w;
        if inc <= opts.tol * metric(&v) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: increments.len(), increment: *increments.last().unwrap_or(&f64::NAN) });
    }
    let defect = v.sub(&free)?.sub(&duhamel_source(op, &apply_nonlinearity(spec, &v)?)?)?;
    let size = metric(&v);
    let residual = if size > 0.0 { metric(&defect) / size } else { metric(&defect) };
    let ball_norm = metric(&v.sub(&free)?);
    Ok(MildSolution {
        iterations: increments.len(),
        u: v,
        free,
        converged,
        increments,
        contraction,
        residual,
        lambda_ball: opts.lambda_ball,
        inside_ball: ball_norm <= opts.lambda_ball,
        ball_norm,
        horizon,
        metric_r: opts.r,
        metric_beta: beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifespanOptions {
    pub horizon: f64,
    pub cap: f64,
    pub rtol: f64,
    /// Also record `‖u(t)‖_{L^r}` for this `r`; does not affect the run.
    pub monitor_r: Option<f64>,
    pub max_steps: usize,
}

impl Default for LifespanOptions {
    fn default() -> Self {
        Self { horizon: 1.0, cap: 1e6, rtol: 1e-7, monitor_r: None, max_steps: 200_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    Cap,
    StepFailure,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanEstimate {
    pub tau: f64,
    pub censored: bool,
    pub termination: Termination,
    pub steps: usize,
    /// `(t, ‖u(t)‖_∞)` after every accepted step.
    pub trace: Vec<(f64, f64)>,
    pub monitor: Vec<(f64, f64)>,
}

struct Stepper<'a> {
    op: &'a DiscreteOperator,
    spec: &'a NonlinearitySpec,
    mu: Vec<f64>,
}

impl Stepper<'_> {
    /// Exponential midpoint step in the eigenbasis.
    fn step(&self, u: &[f64], h: f64) -> Result<Vec<f64>> {
        let uh = self.op.to_modes(u)?;
        let n1 = self.op.to_modes(&apply_slice(self.spec, u)?)?;
        let mid: Vec<f64> = (0..uh.len())
            .map(|i| {
                let z = 0.5 * h * self.mu[i];
                (-z).exp() * uh[i] + 0.5 * h * phi1(z) * n1[i]
            })
            .collect();
        let mid = self.op.from_modes(&mid)?;
        let n2 = self.op.to_modes(&apply_slice(self.spec, &mid)?)?;
        let out: Vec<f64> = (0..uh.len())
            .map(|i| {
                let z = h * self.mu[i];
                (-z).exp() * uh[i] + h * phi1(z) * n2[i]
            })
            .collect();
        self.op.from_modes(&out)
    }
}

fn sup(u: &[f64]) -> f64 {
    u.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Integrates until `‖u‖_∞ >= cap`, the step size collapses, or the horizon
/// is reached (censored).
pub fn estimate_lifespan(
    op: &DiscreteOperator,
    u0: &[f64],
    spec: &NonlinearitySpec,
    opts: &LifespanOptions,
) -> Result<LifespanEstimate> {
    if !(opts.horizon > 0.0 && opts.cap > 0.0 && opts.rtol > 0.0) {
        return Err(Error::InvalidParams("horizon, cap and rtol must be positive".into()));
    }
    let stepper = Stepper { op, spec, mu: op.eigenvalues()?.to_vec() };
    let grid = op.grid();
    let mut u = u0.to_vec();
    let mut t = 0.0;
    let mut h = opts.horizon / 64.0;
    let min_step = 1e-14 * opts.horizon;
    let mut trace = vec![(0.0, sup(&u))];
    let mut monitor = Vec::new();
    if let Some(r) = opts.monitor_r {
        monitor.push((0.0, lp_norm(grid, &u, r)));
    }
    let mut steps = 0;
    let finish = |tau: f64, termination, steps, trace, monitor| {
        Ok(LifespanEstimate { tau, censored: termination == Termination::Horizon, termination, steps, trace, monitor })
    };
    loop {
        if sup(&u) >= opts.cap {
            return finish(t, Termination::Cap, steps, trace, monitor);
        }
        if t >= opts.horizon {
            return finish(opts.horizon, Termination::Horizon, steps, trace, monitor);
        }
        if steps >= opts.max_steps {
            return finish(t, Termination::StepLimit, steps, trace, monitor);
        }
        let h_try = h.min(opts.horizon - t);
        let full = stepper.step(&u, h_try)?;
        let half = stepper.step(&stepper.step(&u, 0.5 * h_try)?, 0.5 * h_try)?;
        let size = sup(&half);
        let err = if full.iter().chain(&half).all(|v| v.is_finite()) {
            full.iter().zip(&half).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / size.max(1e-300)
        } else {
            f64::INFINITY
        };
        if err <= opts.rtol {
            u = half;
            t = if h_try == opts.horizon - t { opts.horizon } else { t + h_try };
            steps += 1;
            trace.push((t, size));
            if let Some(r) = opts.monitor_r {
                monitor.push((t, lp_norm(grid, &u, r)));
            }
            let grow = if err == 0.0 { 2.0 } else { (0.9 * (opts.rtol / err).powf(1.0 / 3.0)).clamp(0.2, 2.0) };
            h = h_try * grow;
        } else {
            let shrink = if err.is_finite() { (0.9 * (opts.rtol / err).powf(1.0 / 3.0)).clamp(0.1, 0.5) } else { 0.25 };
            h = h_try * shrink;
            if h < min_step.max(1e-15 * t) {
                return finish(t, Termination::StepFailure, steps, trace, monitor);
            }
        }
    }
}

/// Ratio of lifespans under an eight-fold tighter tolerance.
pub fn lifespan_refinement_ratio(
    op: &DiscreteOperator,
    u0: &[f64],
    spec: &NonlinearitySpec,
    opts: &LifespanOptions,
    base: &LifespanEstimate,
) -> Result<f64> {
    let fine = estimate_lifespan(op, u0, spec, &LifespanOptions { rtol: opts.rtol / 8.0, ..*opts })?;
    Ok(fine.tau / base.tau)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapRow {
    pub r: f64,
    pub q: f64,
    pub beta: f64,
    pub value: f64,
    /// `RD₋ < r < RD₊` and `q > RD₋`.
    pub advisory_ok: bool,
}

/// `‖u‖_{Z^{r,q}_{n/2r - 1/ρ}(T)}` over a grid of `(r, q)`.
pub fn bootstrap_table(sol: &MildSolution, rho: f64, pairs: &[(f64, f64)]) -> Result<Vec<BootstrapRow>> {
    let n = sol.u.grid().dim() as f64;
    let rd_minus = (n + 2.0) * rho / 2.0;
    let rd_plus = n * (1.0 + rho) * rho / 2.0;
    pairs
        .iter()
        .map(|&(r, q)| {
            let beta = metric_weight(sol.u.grid().dim(), r, rho);
            let value = z_norm(&sol.u, &ZParams::new(r, q, beta, sol.horizon)?);
            Ok(BootstrapRow { r, q, beta, value, advisory_ok: rd_minus < r && r < rd_plus && q > rd_minus })
        })
        .collect()
}

/// Max over rungs of the relative `L²` distance between two fields sampled
/// at the same times; `coarse_stride` picks every `stride`-th point of `b`
/// along each axis.
pub fn rung_deviation(a: &SpaceTimeField, b: &SpaceTimeField, stride: usize) -> Result<f64> {
    let ladder = a.ladder();
    if ladder.as_ref() != b.ladder().as_ref() {
        return Err(Error::ShapeError("fields on different ladders".into()));
    }
    let (ga, gb) = (a.grid(), b.grid());
    if gb.points_per_axis() != stride * ga.points_per_axis() || ga.dim() != gb.dim() {
        return Err(Error::ShapeError("grids are not nested with the given stride".into()));
    }
    let map = |i: usize| {
        let m = ga.multi_index(i);
        gb.flat_index([m[0] * stride, m[1] * stride])
    };
    let mut worst = 0.0f64;
    let mut rungs: Vec<std::ops::Range<usize>> = (0..ladder.depth()).map(|m| ladder.rung_range(m)).collect();
    rungs.push(0..ladder.per_rung());
    for range in rungs {
        let (mut num, mut den) = (0.0, 0.0);
        for k in range {
            let (sa, sb) = (a.slice(k), b.slice(k));
            for i in 0..ga.len() {
                let d = sa[i] - sb[map(i)];
                num += d * d;
                den += sa[i] * sa[i];
            }
        }
        if num > 0.0 {
            worst = worst.max(if den > 0.0 { (num / den).sqrt() } else { f64::INFINITY });
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// Free vs reflected (`-E_L(u0)`) initialization on the coarsest grid;
    /// starting from zero would only shift the free sequence by one step.
    pub init_deviation: f64,
    /// Deviation between consecutive resolutions, coarse points only.
    pub resolution_deviations: Vec<f64>,
    /// `log₂` of consecutive deviation ratios.
    pub observed_order: Option<f64>,
}

/// Runs the fixed point from both initializations and across the given
/// resolutions (each with twice the points of the previous one).
pub fn uniqueness_probe(
    levels: &[(&DiscreteOperator, Vec<f64>)],
    ladder: &Arc<TimeLadder>,
    spec: &NonlinearitySpec,
    opts: &PicardOptions,
) -> Result<UniquenessReport> {
    let (op0, u00) = levels.first().ok_or_else(|| Error::InvalidParams("need at least one level".into()))?;
    let a = picard_solve(op0, u00, ladder, spec, &PicardOptions { init: PicardInit::Free, ..*opts })?;
    let b = picard_solve(op0, u00, ladder, spec, &PicardOptions { init: PicardInit::Scaled(-1.0), ..*opts })?;
    let init_deviation = rung_deviation(&a.u, &b.u, 1)?;
    let mut sols = vec![a];
    for (op, u0) in levels.iter().skip(1) {
        sols.push(picard_solve(op, u0, ladder, spec, opts)?);
    }
    let resolution_deviations = sols
        .windows(2)
        .map(|w| rung_deviation(&w[0].u, &w[1].u, 2))
        .collect::<Result<Vec<_>>>()?;
    let observed_order = (resolution_deviations.len() >= 2).then(|| {
        let m = resolution_deviations.len();
        (resolution_deviations[m - 2] / resolution_deviations[m - 1]).log2()
    });
    Ok(UniquenessReport { init_deviation, resolution_deviations, observed_order })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaloricRatio {
    pub z_norm: f64,
    pub besov_norm: f64,
    pub ratio: f64,
}

/// `‖E(u0)‖_{Z^{p,q}_{α/2}} / ‖u0‖_{Ḃ^α_{p,p}}`.
pub fn caloric_ratio(
    op: &DiscreteOperator,
    u0: &[f64],
    ladder: &Arc<TimeLadder>,
    alpha: f64,
    p: f64,
    q: f64,
) -> Result<CaloricRatio> {
    let params = BesovParams::new(alpha, p)?;
    let b = besov_norm(u0, &params, &LPLadder::new(op.grid()));
    let e = free_evolution(op, u0, ladder)?;
    let z = z_norm(&e, &ZParams::new(p, q, 0.5 * alpha, f64::INFINITY)?);
    Ok(CaloricRatio { z_norm: z, besov_norm: b, ratio: if b > 0.0 { z / b } else { f64::NAN } })
}

/// `‖E(u0)‖_{Z^{p,r}_β} / ‖E(u0)‖_{Z^{p,q}_β}`.
pub fn self_improvement_ratio(
    op: &DiscreteOperator,
    u0: &[f64],
    ladder: &Arc<TimeLadder>,
    p: f64,
    q: f64,
    r: f64,
    beta: f64,
) -> Result<f64> {
    let e = free_evolution(op, u0, ladder)?;
    let lo = z_norm(&e, &ZParams::new(p, q, beta, f64::INFINITY)?);
    let hi = z_norm(&e, &ZParams::new(p, r, beta, f64::INFINITY)?);
    Ok(if lo > 0.0 { hi / lo } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub sigma: f64,
    pub lambda: f64,
    /// Relative `L²` distance over all samples.
    pub relative_l2: f64,
}

/// Parabolic scaling with `λ = 2`, `σ = 2/ρ`: the solution for
/// `λ^σ u0(λ·)` on the grid with twice the points and horizon `T/4` against
/// `λ^σ u(λ² t, λ x)`.
pub fn scaling_check(
    coarse: &DiscreteOperator,
    fine: &DiscreteOperator,
    u0: &crate::ensemble::BandLimited,
    ladder: &Arc<TimeLadder>,
    spec: &NonlinearitySpec,
    opts: &PicardOptions,
) -> Result<ScalingReport> {
    let lambda: f64 = 2.0;
    let sigma = 2.0 / spec.rho;
    let (gc, gf) = (coarse.grid(), fine.grid());
    if gf.points_per_axis() != 2 * gc.points_per_axis() || (gf.length() - gc.length()).abs() > 1e-12 {
        return Err(Error::ShapeError("fine grid must double the points of the coarse grid on the same torus".into()));
    }
    let base = picard_solve(coarse, &u0.sample(gc), ladder, spec, opts)?;
    let small = Arc::new(ladder.scaled(1.0 / (lambda * lambda))?);
    let scaled_data = u0.dilated(2).scaled(lambda.powf(sigma));
    let sol = picard_solve(fine, &scaled_data.sample(gf), &small, spec, opts)?;
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..ladder.len() {
        let (a, b) = (sol.u.slice(k), base.u.slice(k));
        for i in 0..gf.len() {
            // λ x_i lands on coarse point i modulo the period.
            let m = gf.multi_index(i);
            let n = gc.points_per_axis();
            let j = gc.flat_index([m[0] % n, m[1] % n]);
            let target = lambda.powf(sigma) * b[j];
            num += (a[i] - target).powi(2);
            den += target * target;
        }
    }
    Ok(ScalingReport { sigma, lambda, relative_l2: if den > 0.0 { (num / den).sqrt() } else { num.sqrt() } })
}

/// Exact solution of `u' = μ u^{1+ρ}` with `u(0) = c > 0`.
pub fn ode_solution(c: f64, rho: f64, mu: f64, t: f64) -> f64 {
    (c.powf(-rho) - mu * rho * t).powf(-1.0 / rho)
}

/// `1 / (ρ c^ρ)`.
pub fn ode_blowup_time(c: f64, rho: f64) -> f64 {
    1.0 / (rho * c.powf(rho))
}

/// Grid function with the same value everywhere.
pub fn constant_datum(grid: &GridSpec, c: f64) -> Vec<f64> {
    vec![c; grid.len()]
}

/// `‖u‖_2` of a grid vector, for quick diagnostics.
pub fn l2(u: &[f64]) -> f64 {
    DVector::from_column_slice(u).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{generate_field, CoefficientField, CoefficientKind, CoefficientSpec};
    use crate::operator::assemble_operator;

    fn checker(dim: usize, n: usize, l: f64) -> DiscreteOperator {
        let g = GridSpec::new(dim, n, l).unwrap();
        let spec = CoefficientSpec {
            kind: CoefficientKind::Checkerboard,
            contrast: (1.0, 10.0),
            cells: 8,
            seed: 7,
            ..Default::default()
        };
        assemble_operator(&generate_field(&g, &spec).unwrap(), &g).unwrap()
    }

    #[test]
    fn nonlinearity_examples() {
        let p = NonlinearitySpec::power(3.0, 1.0).unwrap();
        assert_eq!(p.eval(2.0).unwrap(), 16.0);
        assert_eq!(p.eval(0.0).unwrap(), 0.0);
        let ac = NonlinearitySpec::allen_cahn(3.0).unwrap();
        assert_eq!(ac.eval(2.0).unwrap(), -6.0);
        assert_eq!(ac.eval(0.0).unwrap(), 0.0);
        assert!(matches!(ac.eval(4.0), Err(Error::RangeExceeded { .. })));
        assert_eq!(p.check_bounds(10_000, 3.0, 1).unwrap(), 0);
        assert_eq!(NonlinearitySpec::power(1.5, -1.0).unwrap().check_bounds(10_000, 3.0, 2).unwrap(), 0);
        assert_eq!(ac.check_bounds(10_000, 3.0, 3).unwrap(), 0);
    }

    #[test]
    fn free_evolution_examples() {
        let op = checker(1, 32, 8.0);
        let ladder = Arc::new(TimeLadder::new(1.0, 4, 2).unwrap());
        let zero = free_evolution(&op, &vec![0.0; 32], &ladder).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let c = free_evolution(&op, &vec![2.5; 32], &ladder).unwrap();
        assert!(c.values().iter().all(|v| (v - 2.5).abs() < 1e-11));
    }

    #[test]
    fn zero_data_one_iteration() {
        let op = checker(1, 32, 8.0);
        let ladder = Arc::new(TimeLadder::new(0.1, 4, 2).unwrap());
        let spec = NonlinearitySpec::power(3.0, 1.0).unwrap();
        let sol = picard_solve(&op, &vec![0.0; 32], &ladder, &spec, &PicardOptions::default()).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.u.max_abs(), 0.0);
    }

    #[test]
    fn constant_data_matches_ode() {
        let op = checker(1, 16, 8.0);
        let (c, rho) = (1.0, 3.0);
        let horizon = 0.5 * ode_blowup_time(c, rho);
        let ladder = Arc::new(TimeLadder::new(horizon, 8, 64).unwrap());
        let spec = NonlinearitySpec::power(rho, 1.0).unwrap();
        let opts = PicardOptions { tol: 1e-12, ..Default::default() };
        let sol = picard_solve(&op, &vec![c; 16], &ladder, &spec, &opts).unwrap();
        let worst = ladder
            .samples()
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let exact = ode_solution(c, rho, 1.0, s.time);
                sol.u.slice(k).iter().map(|v| ((v - exact) / exact).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "relative error {worst}");
        assert!(sol.residual < 1e-8);
    }

    #[test]
    fn lifespan_of_constant_data() {
        let op = checker(1, 16, 8.0);
        let spec = NonlinearitySpec::power(3.0, 1.0).unwrap();
        let opts = LifespanOptions { horizon: 1.0, ..Default::default() };
        let est = estimate_lifespan(&op, &vec![1.0; 16], &spec, &opts).unwrap();
        assert!(!est.censored);
        assert!((est.tau - 1.0 / 3.0).abs() < 0.05 / 3.0, "{}", est.tau);
        let zero = estimate_lifespan(&op, &vec![0.0; 16], &spec, &opts).unwrap();
        assert!(zero.censored && zero.tau == 1.0);
    }

    #[test]
    fn init_strategies_agree() {
        let op = checker(1, 32, 8.0);
        let ladder = Arc::new(TimeLadder::new(0.5, 6, 8).unwrap());
        let spec = NonlinearitySpec::power(3.0, 1.0).unwrap();
        let d = crate::ensemble::BandLimited::random(1, 8.0, 1, 3, 3, 5).scaled(0.3);
        let rep = uniqueness_probe(&[(&op, d.sample(op.grid()))], &ladder, &spec, &PicardOptions { tol: 1e-12, ..Default::default() })
            .unwrap();
        assert!(rep.init_deviation < 1e-8, "{rep:?}");
    }

    fn identity(dim: usize, n: usize, l: f64) -> DiscreteOperator {
        let g = GridSpec::new(dim, n, l).unwrap();
        assemble_operator(&CoefficientField::identity(&g), &g).unwrap()
    }

    #[test]
    fn scaling_is_exact_for_constant_coefficients() {
        let (coarse, fine) = (identity(1, 32, 8.0), identity(1, 64, 8.0));
        let ladder = Arc::new(TimeLadder::new(0.5, 6, 8).unwrap());
        let spec = NonlinearitySpec::power(2.0, 1.0).unwrap();
        let d = crate::ensemble::BandLimited::random(1, 8.0, 1, 3, 3, 9).scaled(0.2);
        let opts = PicardOptions { tol: 1e-12, ..Default::default() };
        let rep = scaling_check(&coarse, &fine, &d, &ladder, &spec, &opts).unwrap();
        assert!(rep.relative_l2 < 1e-8, "{rep:?}");
    }

    #[test]
    fn resolution_study_converges() {
        let ladder = Arc::new(TimeLadder::new(0.5, 6, 8).unwrap());
        let spec = NonlinearitySpec::power(3.0, 1.0).unwrap();
        let d = crate::ensemble::BandLimited::random(1, 8.0, 1, 2, 2, 4).scaled(0.3);
        let opts = PicardOptions { tol: 1e-12, ..Default::default() };
        // jumps sit between grid points and move by h/4 under refinement
        let rough: Vec<_> = [32, 64, 128].iter().map(|&n| checker(1, n, 8.0)).collect();
        let smooth: Vec<_> = [32, 64, 128].iter().map(|&n| identity(1, n, 8.0)).collect();
        for (ops, band) in [(rough, 0.8..=1.3), (smooth, 1.8..=2.2)] {
            let levels: Vec<_> = ops.iter().map(|op| (op, d.sample(op.grid()))).collect();
            let rep = uniqueness_probe(&levels, &ladder, &spec, &opts).unwrap();
            let order = rep.observed_order.unwrap();
            assert!(band.contains(&order), "{rep:?}");
        }
    }

    #[test]
    fn lifespan_decreases_with_amplitude() {
        let op = identity(1, 16, 8.0);
        let spec = NonlinearitySpec::power(2.0, 1.0).unwrap();
        let opts = LifespanOptions { horizon: 2.0, monitor_r: Some(4.0), ..Default::default() };
        let taus: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&c| estimate_lifespan(&op, &vec![c; 16], &spec, &opts).unwrap().tau)
            .collect();
        assert!(taus[0] > taus[1] && taus[1] > taus[2], "{taus:?}");
        for (tau, c) in taus.iter().zip([1.0, 2.0, 4.0]) {
            assert!((tau / ode_blowup_time(c, 2.0) - 1.0).abs() < 1e-3);
        }
    }
}
