//! Duhamel operators `ℒ¹` and `ℛ^{1/2}`, scalar fractional integrals and
//! randomized hypercontractivity probes.
//!
//! Time stepping runs in the eigenbasis of `L`. On each ladder cell of length
//! `Δ` the source is frozen at the cell midpoint and integrated exactly:
//! `u⁺ = e^{-ΔL} u + Δ φ₁(ΔL) f(mid)`, with the midpoint value obtained the same
//! way over `Δ/2`.

use std::f64::consts::LN_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{self, EnsembleSpec};
use crate::error::{Error, Result};
use crate::exponents::{duhamel_table_check, DuhamelOp, Exponent, TableQuery};
use crate::geometry::{parabolic_annulus, GridSpec, SpaceTimeField, TimeLadder, VectorField};
use crate::operator::{divergence, gradient, least_squares, lp_norm, phi1, DiscreteOperator};
use crate::spaces::{weighted_lp_norm, z_norm, ZParams};

/// Values at the ladder samples together with the values at the cell edges.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mids: SpaceTimeField,
    /// `nodes[k]` is the state at `ladder.nodes()[k]`; `nodes[0]` is the initial state.
    pub nodes: Vec<Vec<f64>>,
}

fn columns(u: &SpaceTimeField) -> DMatrix<f64> {
    DMatrix::from_column_slice(u.grid().len(), u.n_samples(), u.values())
}

fn matrix_to_field(grid: &GridSpec, ladder: &Arc<TimeLadder>, m: &DMatrix<f64>) -> Result<SpaceTimeField> {
    let slices = (0..m.ncols()).map(|k| m.column(k).iter().copied().collect()).collect();
    SpaceTimeField::from_slices(grid, ladder, slices)
}

/// Solves `u' = -Lu + f`, `u(0) = u0` on the ladder of `ladder`.
pub fn evolve(
    op: &DiscreteOperator,
    ladder: &Arc<TimeLadder>,
    u0: Option<&[f64]>,
    f: Option<&SpaceTimeField>,
) -> Result<Trajectory> {
    let grid = op.grid();
    if let Some(f) = f {
        if f.grid() != grid || f.ladder().as_ref() != ladder.as_ref() {
            return Err(Error::ShapeError("source lives on a different grid or ladder".into()));
        }
        if !f.is_finite() {
            return Err(Error::NumericalFailure("non-finite source".into()));
        }
    }
    if let Some(u0) = u0 {
        if u0.len() != grid.len() {
            return Err(Error::ShapeError("initial datum length".into()));
        }
    }
    let np = grid.len();
    let ns = ladder.len();
    let mu = op.eigenvalues()?.to_vec();
    let fhat = match f {
        Some(f) => Some(op.to_modes_batch(&columns(f))?),
        None => None,
    };
    let mut c = match u0 {
        Some(u0) => op.to_modes(u0)?,
        None => vec![0.0; np],
    };
    let mut mids = DMatrix::<f64>::zeros(np, ns);
    let mut nodes = DMatrix::<f64>::zeros(np, ns + 1);
    nodes.column_mut(0).copy_from_slice(&c);
    let edges = ladder.nodes();
    for k in 0..ns {
        let dt = edges[k + 1] - edges[k];
        for i in 0..np {
            let z = dt * mu[i];
            let src = fhat.as_ref().map_or(0.0, |h| h[(i, k)]);
            mids[(i, k)] = (-0.5 * z).exp() * c[i] + 0.5 * dt * phi1(0.5 * z) * src;
            c[i] = (-z).exp() * c[i] + dt * phi1(z) * src;
        }
        nodes.column_mut(k + 1).copy_from_slice(&c);
    }
    let mids = matrix_to_field(grid, ladder, &op.from_modes_batch(&mids)?)?;
    let nodes_phys = op.from_modes_batch(&nodes)?;
    let nodes = (0..=ns).map(|k| nodes_phys.column(k).iter().copied().collect()).collect();
    Ok(Trajectory { mids, nodes })
}

/// `ℒ¹(f)(t) = ∫_0^t e^{-(t-s)L} f(s) ds` at the ladder samples.
pub fn duhamel_source(op: &DiscreteOperator, f: &SpaceTimeField) -> Result<SpaceTimeField> {
    Ok(evolve(op, f.ladder(), None, Some(f))?.mids)
}

/// Sample-wise centered divergence of a vector field.
pub fn field_divergence(big_f: &VectorField) -> Result<SpaceTimeField> {
    let grid = big_f.grid().clone();
    let ladder = big_f.ladder().clone();
    let slices = (0..ladder.len())
        .map(|k| {
            let comps: Vec<Vec<f64>> = big_f.components.iter().map(|c| c.slice(k).to_vec()).collect();
            divergence(&grid, &comps)
        })
        .collect();
    SpaceTimeField::from_slices(&grid, &ladder, slices)
}

/// Sample-wise centered gradient.
pub fn field_gradient(u: &SpaceTimeField) -> Result<VectorField> {
    let grid = u.grid();
    let grads: Vec<Vec<Vec<f64>>> = (0..u.n_samples()).map(|k| gradient(grid, u.slice(k))).collect();
    let comps = (0..grid.dim())
        .map(|axis| SpaceTimeField::from_slices(grid, u.ladder(), grads.iter().map(|g| g[axis].clone()).collect()))
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(comps)
}

/// `ℛ^{1/2}(F)(t) = ∫_0^t e^{-(t-s)L} div F(s) ds`.
pub fn duhamel_div(op: &DiscreteOperator, big_f: &VectorField) -> Result<SpaceTimeField> {
    duhamel_source(op, &field_divergence(big_f)?)
}

/// Input of one of the four Duhamel operators.
#[derive(Debug, Clone)]
pub enum ProbeInput {
    Scalar(SpaceTimeField),
    Vector(VectorField),
}

impl ProbeInput {
    /// Pointwise magnitude used by every norm.
    pub fn magnitude(&self) -> SpaceTimeField {
        match self {
            Self::Scalar(u) => u.clone(),
            Self::Vector(v) => v.magnitude(),
        }
    }
}

/// Which operator a probe exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SioOperator {
    Identity,
    Source,
    GradSource,
    Div,
    GradDiv,
}

impl SioOperator {
    pub fn duhamel(&self) -> Option<DuhamelOp> {
        match self {
            Self::Identity => None,
            Self::Source => Some(DuhamelOp::Source),
            Self::GradSource => Some(DuhamelOp::GradSource),
            Self::Div => Some(DuhamelOp::Div),
            Self::GradDiv => Some(DuhamelOp::GradDiv),
        }
    }

    pub fn takes_vector(&self) -> bool {
        matches!(self, Self::Div | Self::GradDiv)
    }

    pub fn label(&self) -> &'static str {
        self.duhamel().map_or("identity", |d| d.label())
    }
}

impl std::str::FromStr for SioOperator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(Self::Identity);
        }
        Ok(match s.parse::<DuhamelOp>()? {
            DuhamelOp::Source => Self::Source,
            DuhamelOp::GradSource => Self::GradSource,
            DuhamelOp::Div => Self::Div,
            DuhamelOp::GradDiv => Self::GradDiv,
        })
    }
}

/// Applies the operator and returns the magnitude of the output.
pub fn apply_sio(op: &DiscreteOperator, which: SioOperator, input: &ProbeInput) -> Result<SpaceTimeField> {
    match (which, input) {
        (SioOperator::Identity, i) => Ok(i.magnitude()),
        (SioOperator::Source, ProbeInput::Scalar(f)) => duhamel_source(op, f),
        (SioOperator::GradSource, ProbeInput::Scalar(f)) => Ok(field_gradient(&duhamel_source(op, f)?)?.magnitude()),
        (SioOperator::Div, ProbeInput::Vector(v)) => duhamel_div(op, v),
        (SioOperator::GradDiv, ProbeInput::Vector(v)) => Ok(field_gradient(&duhamel_div(op, v)?)?.magnitude()),
        (w, _) => Err(Error::InvalidParams(format!("operator {} got the wrong input kind", w.label()))),
    }
}

/// Declared SIO type `(q, r, κ, M)` with an optional bootstrap exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SIOSpec {
    pub op: SioOperator,
    pub q: f64,
    pub r: f64,
    pub kappa: f64,
    /// Off-diagonal decay order; `∞` for semigroup kernels.
    pub m: f64,
    pub q_tilde: Option<f64>,
}

fn inv(x: f64) -> f64 {
    if x.is_infinite() { 0.0 } else { 1.0 / x }
}

impl SIOSpec {
    pub fn new(op: SioOperator, q: f64, r: f64, kappa: f64) -> Result<Self> {
        let s = Self { op, q, r, kappa, m: f64::INFINITY, q_tilde: None };
        s.validate()?;
        Ok(s)
    }

    pub fn with_bootstrap(mut self, q_tilde: f64) -> Result<Self> {
        self.q_tilde = Some(q_tilde);
        self.validate()?;
        Ok(self)
    }

    pub fn with_decay(mut self, m: f64) -> Result<Self> {
        self.m = m;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > 1.0 && self.r >= self.q) {
            return Err(Error::InvalidParams(format!("need 1 < q <= r, got q = {}, r = {}", self.q, self.r)));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::InvalidParams(format!("kappa = {} outside [0, 1]", self.kappa)));
        }
        if !(self.m >= 0.0) {
            return Err(Error::InvalidParams("decay order must be >= 0".into()));
        }
        if let Some(qt) = self.q_tilde {
            if !(qt > 1.0 && qt <= self.q) {
                return Err(Error::InvalidParams(format!("bootstrap exponent {qt} outside (1, q]")));
            }
        }
        Ok(())
    }

    /// `(n/2)(1/q - 1/r)`.
    pub fn shift(&self, n: usize) -> f64 {
        0.5 * n as f64 * (inv(self.q) - inv(self.r))
    }

    /// The two decay-order conditions, evaluated for exponent `q` (or `q̃`).
    pub fn decay_conditions(&self, n: usize, q: f64) -> bool {
        let nn = n as f64;
        self.m > nn / (2.0 * q) && self.m > 0.5 * nn * (inv(q) - inv(self.r)) + inv(q) - self.kappa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    ZToZ,
    LpToLp,
    Bootstrap,
}

impl std::str::FromStr for ProbeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z_to_z" => Ok(Self::ZToZ),
            "lp_to_lp" => Ok(Self::LpToLp),
            "bootstrap" => Ok(Self::Bootstrap),
            o => Err(Error::Parse(format!("unknown probe mode `{o}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRow {
    pub probe_id: usize,
    pub input_norm: f64,
    pub output_norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub op: String,
    pub mode: ProbeMode,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub beta: f64,
    pub kappa: f64,
    pub target_beta: f64,
    pub rows: Vec<ProbeRow>,
    pub sup: f64,
    /// Parameters pass the mapping tables for this coefficient class.
    pub theory_backed: bool,
    pub table_warnings: Vec<String>,
    pub decay_conditions: bool,
}

impl ProbeReport {
    /// `max/min` of two ensemble sups; `1` means identical.
    pub fn stability(&self, other: &ProbeReport) -> f64 {
        let (a, b) = (self.sup, other.sup);
        if a == 0.0 && b == 0.0 { 1.0 } else { a.max(b) / a.min(b) }
    }
}

/// Probe ensemble size, seed and data shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ensemble {
    pub count: usize,
    pub seed: u64,
    pub spec: EnsembleSpec,
}

impl Default for Ensemble {
    fn default() -> Self {
        Self { count: 50, seed: 1, spec: EnsembleSpec::default() }
    }
}

fn to_exponent(x: f64) -> Result<Exponent> {
    Exponent::from_f64(x)
}

/// Parameter-table verdict for a probe on `op`'s coefficient class.
pub fn table_verdict(op: &DiscreteOperator, spec: &SIOSpec) -> Result<(bool, Vec<String>)> {
    let Some(d) = spec.op.duhamel() else {
        let ok = spec.q == spec.r && spec.kappa == 0.0;
        return Ok((ok, if ok { vec![] } else { vec!["identity is of type (q, q, 0, inf)".into()] }));
    };
    let field = op.field();
    let v = duhamel_table_check(&TableQuery {
        op: d,
        regular: field.is_regular(),
        kappa: crate::exponents::rational_from_f64(spec.kappa)?,
        q: to_exponent(spec.q)?,
        r: to_exponent(spec.r)?,
        q_tilde: spec.q_tilde.map(to_exponent).transpose()?,
        n: op.grid().dim() as u32,
        q_a: to_exponent(field.q_a())?,
        q_adj_dual: crate::exponents::rational_from_f64(field.q_adj_dual())?,
    })?;
    Ok((v.admissible, v.failed().into_iter().map(String::from).collect()))
}

/// Ensemble sup of output/input norm ratios on the ladder of `ladder`.
pub fn hyper_probe(
    op: &DiscreteOperator,
    ladder: &Arc<TimeLadder>,
    spec: &SIOSpec,
    p: f64,
    beta: f64,
    ensemble: &Ensemble,
    mode: ProbeMode,
) -> Result<ProbeReport> {
    spec.validate()?;
    if !(beta > -1.0) {
        return Err(Error::InvalidParams(format!("beta = {beta} must exceed -1")));
    }
    let n = op.grid().dim();
    let lower = match mode {
        ProbeMode::Bootstrap => spec
            .q_tilde
            .ok_or_else(|| Error::InvalidParams("bootstrap mode needs q~".into()))?,
        _ => spec.q,
    };
    if mode != ProbeMode::LpToLp && !(p >= lower) {
        return Err(Error::InvalidParams(format!("need p >= {lower}, got {p}")));
    }
    op.prepare()?;
    let (theory_backed, table_warnings) = table_verdict(op, spec)?;
    let decay_conditions = spec.decay_conditions(n, spec.q) && spec.q_tilde.is_none_or(|qt| spec.decay_conditions(n, qt));
    let target_beta = match mode {
        ProbeMode::LpToLp => beta + spec.kappa - spec.shift(n),
        _ => beta + spec.kappa,
    };
    let grid = op.grid();
    let inputs: Vec<ProbeInput> = if spec.op.takes_vector() {
        ensemble::vector_ensemble(grid, ladder, &ensemble.spec, ensemble.count, ensemble.seed)
            .into_iter()
            .map(ProbeInput::Vector)
            .collect()
    } else {
        ensemble::scalar_ensemble(grid, ladder, &ensemble.spec, ensemble.count, ensemble.seed)
            .into_iter()
            .map(ProbeInput::Scalar)
            .collect()
    };
    let rows = inputs
        .par_iter()
        .enumerate()
        .map(|(probe_id, input)| {
            let out = apply_sio(op, spec.op, input)?;
            let inp = input.magnitude();
            let (input_norm, output_norm) = match mode {
                ProbeMode::LpToLp => (
                    weighted_lp_norm(&inp, spec.q, beta, f64::INFINITY),
                    weighted_lp_norm(&out, spec.r, target_beta, f64::INFINITY),
                ),
                _ => (
                    z_norm(&inp, &ZParams::new(p, spec.q, beta, f64::INFINITY)?),
                    z_norm(&out, &ZParams::new(p, spec.r, target_beta, f64::INFINITY)?),
                ),
            };
            let ratio = if input_norm > 0.0 { output_norm / input_norm } else { 0.0 };
            Ok(ProbeRow { probe_id, input_norm, output_norm, ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    let sup = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(ProbeReport {
        op: spec.op.label().to_string(),
        mode,
        p,
        q: spec.q,
        r: spec.r,
        beta,
        kappa: spec.kappa,
        target_beta,
        rows,
        sup,
        theory_backed,
        table_warnings,
        decay_conditions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusRow {
    pub j: u32,
    pub distance: f64,
    pub sup_ratio: f64,
    /// `sup_ratio` divided by `(t-s)^{-1+κ-(n/2)(1/q-1/r)} (1 + d²/(t-s))^{-M}`.
    pub constant: f64,
}

/// Off-diagonal spot check of the kernel `e^{-(t-s)L}`: data on `C_j(x,t)`,
/// output measured on `B(x, sqrt t)`.
#[allow(clippy::too_many_arguments)]
pub fn sio_annulus_check(
    op: &DiscreteOperator,
    x: usize,
    t: f64,
    s: f64,
    spec: &SIOSpec,
    js: &[u32],
    probes: usize,
    seed: u64,
) -> Result<Vec<AnnulusRow>> {
    if !(0.0 < s && s < t) {
        return Err(Error::InvalidParams("need 0 < s < t".into()));
    }
    let grid = op.grid();
    let n = grid.dim();
    let ball = grid.ball_points(x, t.sqrt().min(0.5 * grid.length()));
    let dt = t - s;
    let singular = dt.powf(-1.0 + spec.kappa - spec.shift(n));
    let mut rows = Vec::new();
    for &j in js {
        let region = parabolic_annulus(grid, x, t, j)?;
        if region.points.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let distance = region.inner.map_or(0.0, |r| (r - t.sqrt()).max(0.0));
        let mut rng = ensemble::rng(ensemble::split_seed(seed, j as u64));
        let mut sup_ratio = 0.0f64;
        for probe in 0..probes {
            let mut f = vec![0.0; grid.len()];
            for &p in &region.points {
                f[p] = if probe == 0 { 1.0 } else { rng.random_range(-1.0..1.0) };
            }
            let out = op.semigroup_apply(dt, &f)?;
            let mut restricted = vec![0.0; grid.len()];
            for &p in &ball {
                restricted[p] = out[p];
            }
            let denom = lp_norm(grid, &f, spec.q);
            if denom > 0.0 {
                sup_ratio = sup_ratio.max(lp_norm(grid, &restricted, spec.r) / denom);
            }
        }
        let decay = if spec.m.is_infinite() { 1.0 } else { (1.0 + distance * distance / dt).powf(-spec.m) };
        rows.push(AnnulusRow { j, distance, sup_ratio, constant: sup_ratio / (singular * decay) });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub per_rung: Vec<usize>,
    /// Max difference at common nodes between consecutive refinements.
    pub differences: Vec<f64>,
    pub order: f64,
}

/// Observed order of `ℒ¹` under halving of every ladder step.
pub fn time_step_order(
    op: &DiscreteOperator,
    ladder: &TimeLadder,
    levels: usize,
    f: impl Fn(f64, &[f64]) -> f64,
) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::InvalidParams("need at least three levels".into()));
    }
    let grid = op.grid();
    let mut runs = Vec::new();
    let mut per_rung = Vec::new();
    for l in 0..levels {
        let lad = Arc::new(ladder.refined(1 << l)?);
        let src = SpaceTimeField::from_fn(grid, &lad, &f);
        runs.push(evolve(op, &lad, None, Some(&src))?.nodes);
        per_rung.push(lad.per_rung());
    }
    let coarse_nodes = runs[0].len();
    let mut differences = Vec::new();
    for l in 0..levels - 1 {
        let (a, b) = (&runs[l], &runs[l + 1]);
        let mut diff = 0.0f64;
        for k in 0..coarse_nodes {
            let ia = k << l;
            let ib = k << (l + 1);
            for (x, y) in a[ia].iter().zip(&b[ib]) {
                diff = diff.max((x - y).abs());
            }
        }
        differences.push(diff);
    }
    let m = differences.len();
    let order = (differences[m - 2] / differences[m - 1]).log2();
    Ok(ConvergenceReport { per_rung, differences, order })
}

/// Adaptive Simpson quadrature to relative tolerance `rtol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rtol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    // A coarse pre-pass fixes the absolute tolerance scale.
    let scale = {
        let n = 64;
        let h = (b - a) / n as f64;
        (0..n).map(|i| f(a + (i as f64 + 0.5) * h).abs()).sum::<f64>() * h
    };
    let tol = rtol * scale.max(whole.abs()).max(f64::MIN_POSITIVE);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `T_λ f(t) = ∫_0^t (t-s)^{λ-1} f(s) ds`, or with `k` the restricted
/// integral over `(2^{-k-1} t, 2^{-k} t)`. The substitution `y = (t-s)^λ`
/// removes the endpoint singularity.
pub fn fractional_integral(f: &dyn Fn(f64) -> f64, lambda: f64, k: Option<u32>, t: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("order lambda = {lambda} must be positive")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidHeight(t));
    }
    if k == Some(0) {
        return Err(Error::InvalidIndex("restriction index must be >= 1".into()));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let (s_lo, s_hi) = match k {
        None => (0.0, t),
        Some(k) => (t * 2f64.powi(-(k as i32) - 1), t * 2f64.powi(-(k as i32))),
    };
    let (y_lo, y_hi) = ((t - s_hi).powf(lambda), (t - s_lo).powf(lambda));
    let g = |y: f64| f(t - y.powf(1.0 / lambda));
    Ok(adaptive_simpson(&g, y_lo, y_hi, 1e-9) / lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub lambda: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub q: f64,
    pub r: f64,
    pub ks: Vec<u32>,
    /// Probed norm estimates per `k`.
    pub norms: Vec<f64>,
    /// Exact `q = r` norms `∫ (1-σ)^{λ-1} σ^{γ₀} dσ` over the restriction window.
    pub oracle: Vec<f64>,
    pub slope: f64,
    pub oracle_slope: f64,
    /// `-(γ₀ + 1)`.
    pub target: f64,
}

impl DecayReport {
    pub fn relative_error(&self) -> f64 {
        ((self.slope - self.target) / self.target).abs()
    }
}

/// Norms of `T_λ^k : L^q_{γ₀} → L^r_{γ₁}` against `dt/t`, by probing.
///
/// In the variable `log₂ t` the operator is a convolution with kernel
/// `(1-σ)^{λ-1} σ^{γ₀+1}` on the window `σ ∈ (2^{-k-1}, 2^{-k})`; inputs live
/// on a window of `2·octaves` octaves with `per_octave` points each.
#[allow(clippy::too_many_arguments)]
pub fn decay_rate_probe(
    lambda: f64,
    gamma0: f64,
    gamma1: f64,
    q: f64,
    r: f64,
    ks: &[u32],
    probes: usize,
    seed: u64,
) -> Result<DecayReport> {
    if (gamma1 - gamma0 - lambda).abs() > 1e-12 {
        return Err(Error::InvalidParams(format!("need gamma1 = gamma0 + lambda, got {gamma1} vs {}", gamma0 + lambda)));
    }
    if !(q > 1.0 && r >= q) {
        return Err(Error::InvalidParams("need 1 < q <= r".into()));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidParams("restriction indices must be >= 1".into()));
    }
    let per_octave = 16usize;
    let octaves = 12usize;
    let kmax = *ks.iter().max().unwrap() as usize;
    let width = 2 * octaves * per_octave + 1;
    let pad = (kmax + 1) * per_octave;
    let du = LN_2 / per_octave as f64;
    let kernel = |v: f64| (1.0 - 2f64.powf(v)).powf(lambda - 1.0) * 2f64.powf(v * (gamma0 + 1.0));
    let lq = |g: &[f64], e: f64| -> f64 {
        if e.is_infinite() {
            g.iter().fold(0.0, |m, v| m.max(v.abs()))
        } else {
            (g.iter().map(|v| v.abs().powf(e)).sum::<f64>() * du).powf(1.0 / e)
        }
    };
    let inputs: Vec<Vec<f64>> = (0..probes.max(1))
        .map(|i| {
            let mut rng = ensemble::rng(ensemble::split_seed(seed, i as u64));
            if i == 0 {
                return vec![1.0; width];
            }
            let len = rng.random_range(per_octave..=width);
            let start = rng.random_range(0..=width - len);
            let freq = rng.random_range(0.0..0.5);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (0..width)
                .map(|j| {
                    if j < start || j >= start + len {
                        0.0
                    } else {
                        1.0 + 0.5 * (freq * j as f64 + phase).sin()
                    }
                })
                .collect()
        })
        .collect();
    let mut norms = Vec::new();
    let mut oracle = Vec::new();
    for &k in ks {
        let lo = -(k as f64) - 1.0;
        let taps: Vec<f64> = (0..=per_octave)
            .map(|j| {
                let v = lo + j as f64 / per_octave as f64;
                let w = if j == 0 || j == per_octave { 0.5 } else { 1.0 };
                w * du * kernel(v)
            })
            .collect();
        let mut best = 0.0f64;
        for g in &inputs {
            // out(u_i) = Σ_j taps_j g(u_i + v_j) with v_j = lo + j/P.
            let out: Vec<f64> = (0..width + pad)
                .map(|i| {
                    taps.iter()
                        .enumerate()
                        .map(|(j, w)| {
                            let src = i as isize + j as isize - ((k as isize + 1) * per_octave as isize);
                            if (0..width as isize).contains(&src) { w * g[src as usize] } else { 0.0 }
                        })
                        .sum()
                })
                .collect();
            let d = lq(g, q);
            if d > 0.0 {
                best = best.max(lq(&out, r) / d);
            }
        }
        norms.push(best);
        let exact = adaptive_simpson(
            &|s: f64| (1.0 - s).powf(lambda - 1.0) * s.powf(gamma0),
            2f64.powi(-(k as i32) - 1),
            2f64.powi(-(k as i32)),
            1e-10,
        );
        oracle.push(exact);
    }
    let fit = |v: &[f64]| -> f64 {
        let pts: Vec<(f64, f64)> = ks.iter().zip(v).map(|(&k, &n)| (k as f64, n.log2())).collect();
        if pts.len() >= 2 { least_squares(&pts).0 } else { f64::NAN }
    };
    Ok(DecayReport {
        lambda,
        gamma0,
        gamma1,
        q,
        r,
        ks: ks.to_vec(),
        slope: fit(&norms),
        oracle_slope: fit(&oracle),
        norms,
        oracle,
        target: -(gamma0 + 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{generate_field, CoefficientField, CoefficientKind, CoefficientSpec};
    use crate::operator::assemble_operator;

    fn identity_op(n: usize, l: f64) -> DiscreteOperator {
        let g = GridSpec::new(1, n, l).unwrap();
        assemble_operator(&CoefficientField::identity(&g), &g).unwrap()
    }

    fn checker_op(dim: usize, n: usize, l: f64) -> DiscreteOperator {
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
    fn zero_and_constant_sources() {
        let op = checker_op(1, 32, 8.0);
        let ladder = Arc::new(TimeLadder::new(1.0, 5, 4).unwrap());
        let zero = SpaceTimeField::zeros(op.grid(), &ladder);
        assert_eq!(duhamel_source(&op, &zero).unwrap().max_abs(), 0.0);
        let one = SpaceTimeField::from_fn(op.grid(), &ladder, |_, _| 1.0);
        let u = duhamel_source(&op, &one).unwrap();
        for (k, s) in ladder.samples().iter().enumerate() {
            for v in u.slice(k) {
                assert!((v - s.time).abs() < 1e-11, "{v} vs {}", s.time);
            }
        }
    }

    #[test]
    fn causality_of_all_four_operators() {
        let op = checker_op(1, 32, 8.0);
        let ladder = Arc::new(TimeLadder::new(1.0, 5, 2).unwrap());
        let tau = 0.25;
        let spec = EnsembleSpec::default();
        for (i, f) in ensemble::scalar_ensemble(op.grid(), &ladder, &spec, 5, 9).into_iter().enumerate() {
            let f = f.map_with_time(|t, v| if t > tau { v } else { 0.0 });
            let v = VectorField::new(vec![f.clone()]).unwrap();
            for which in [SioOperator::Source, SioOperator::GradSource] {
                let out = apply_sio(&op, which, &ProbeInput::Scalar(f.clone())).unwrap();
                for (k, s) in ladder.samples().iter().enumerate() {
                    if s.time <= tau {
                        assert!(out.slice(k).iter().all(|&x| x == 0.0), "probe {i}");
                    }
                }
            }
            for which in [SioOperator::Div, SioOperator::GradDiv] {
                let out = apply_sio(&op, which, &ProbeInput::Vector(v.clone())).unwrap();
                for (k, s) in ladder.samples().iter().enumerate() {
                    if s.time <= tau {
                        assert!(out.slice(k).iter().all(|&x| x == 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn div_of_constant_vanishes_and_is_linear() {
        let op = checker_op(2, 16, 4.0);
        let ladder = Arc::new(TimeLadder::new(1.0, 4, 2).unwrap());
        let c = SpaceTimeField::from_fn(op.grid(), &ladder, |t, _| 1.0 + t);
        let v = VectorField::new(vec![c.clone(), c.scaled(2.0)]).unwrap();
        assert!(duhamel_div(&op, &v).unwrap().max_abs() < 1e-12);
        let fs = ensemble::vector_ensemble(op.grid(), &ladder, &EnsembleSpec::default(), 2, 4);
        let sum = duhamel_div(&op, &fs[0].add(&fs[1]).unwrap()).unwrap();
        let parts = duhamel_div(&op, &fs[0]).unwrap().add(&duhamel_div(&op, &fs[1]).unwrap()).unwrap();
        assert!(sum.sub(&parts).unwrap().max_abs() < 1e-12 * (1.0 + sum.max_abs()));
    }

    #[test]
    fn static_gradient_against_mode_formula() {
        // F = ∇g, A = Id: each Fourier mode solves u' = -μ u - s² ĝ.
        let n = 64;
        let l = 2.0 * std::f64::consts::PI;
        let op = identity_op(n, l);
        let g = op.grid().clone();
        let h = g.spacing();
        let ladder = Arc::new(TimeLadder::new(0.5, 6, 4).unwrap());
        let modes = [(1usize, 0.7), (3, -0.4), (5, 0.25)];
        let gfun = |x: f64| modes.iter().map(|&(k, a)| a * (k as f64 * x).cos()).sum::<f64>();
        let gs: Vec<f64> = (0..n).map(|i| gfun(g.coords(i)[0])).collect();
        let grad = gradient(&g, &gs);
        let big_f = VectorField::new(vec![SpaceTimeField::from_slices(&g, &ladder, vec![grad[0].clone(); ladder.len()]).unwrap()]).unwrap();
        let u = duhamel_div(&op, &big_f).unwrap();
        for (k, s) in ladder.samples().iter().enumerate() {
            for i in 0..n {
                let x = g.coords(i)[0];
                let exact: f64 = modes
                    .iter()
                    .map(|&(kk, a)| {
                        let kf = kk as f64;
                        let mu = (2.0 - 2.0 * (kf * h).cos()) / (h * h);
                        let s2 = ((kf * h).sin() / h).powi(2);
                        -a * s2 / mu * (1.0 - (-mu * s.time).exp()) * (kf * x).cos()
                    })
                    .sum();
                assert!((u.slice(k)[i] - exact).abs() < 1e-10, "{} vs {exact}", u.slice(k)[i]);
            }
        }
    }

    #[test]
    fn second_order_in_time() {
        let op = checker_op(1, 32, 8.0);
        let ladder = TimeLadder::new(1.0, 4, 2).unwrap();
        let rep = time_step_order(&op, &ladder, 4, |t, x| (3.0 * t).sin() * (1.0 + (0.25 * std::f64::consts::PI * x[0]).cos())).unwrap();
        assert!(rep.order >= 1.8, "{rep:?}");
    }

    #[test]
    fn fractional_integral_examples() {
        let one = |_: f64| 1.0;
        assert!((fractional_integral(&one, 1.0, None, 2.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((fractional_integral(&one, 0.5, None, 2.0).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        assert!((fractional_integral(&one, 1.0, Some(3), 2.0).unwrap() - 2.0 / 16.0).abs() < 1e-12);
        let lin = |s: f64| s;
        // ∫_0^t (t-s)^{-1/2} s ds = (4/3) t^{3/2}
        let v = fractional_integral(&lin, 0.5, None, 1.5).unwrap();
        assert!((v - 4.0 / 3.0 * 1.5f64.powf(1.5)).abs() < 1e-6 * v);
        assert!(fractional_integral(&one, 0.0, None, 1.0).is_err());
    }

    #[test]
    fn decay_slopes() {
        for g0 in [-0.5, 0.0, 1.0] {
            let rep = decay_rate_probe(0.75, g0, g0 + 0.75, 2.0, 2.0, &[1, 2, 3, 4, 5, 6], 8, 3).unwrap();
            assert!(rep.relative_error() < 0.1, "{rep:?}");
            for (n, o) in rep.norms.iter().zip(&rep.oracle) {
                assert!(n <= &(o * (1.0 + 1e-3)) && n >= &(o * 0.9), "{n} vs {o}");
            }
        }
        assert!(decay_rate_probe(0.5, 0.0, 0.4, 2.0, 2.0, &[1], 1, 0).is_err());
    }

    #[test]
    fn identity_probe_ratio_is_one() {
        let op = checker_op(1, 32, 8.0);
        let ladder = Arc::new(TimeLadder::new(1.0, 4, 2).unwrap());
        let spec = SIOSpec::new(SioOperator::Identity, 2.0, 2.0, 0.0).unwrap();
        let ens = Ensemble { count: 5, ..Default::default() };
        let rep = hyper_probe(&op, &ladder, &spec, 4.0, -0.25, &ens, ProbeMode::ZToZ).unwrap();
        assert!(rep.rows.iter().all(|r| (r.ratio - 1.0).abs() < 1e-12));
        assert!(rep.theory_backed);
    }

    #[test]
    fn annulus_constants_do_not_grow() {
        let op = identity_op(128, 32.0);
        let spec = SIOSpec::new(SioOperator::Source, 2.0, 2.0, 1.0).unwrap().with_decay(1.0).unwrap();
        let rows = sio_annulus_check(&op, 0, 1.0, 0.5, &spec, &[1, 2, 3, 4], 10, 5).unwrap();
        let c1 = rows[0].constant;
        assert!(c1.is_finite() && c1 > 0.0);
        assert!(rows.iter().all(|r| r.constant <= c1 * 3.0), "{rows:?}");
    }
}
