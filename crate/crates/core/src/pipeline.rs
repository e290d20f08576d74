//! Scenario configuration and the two end-to-end scenarios: the linear
//! Cauchy problem and the reaction-diffusion fixed point. Sub-checks never
//! abort a scenario; failures are recorded in the report.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coefficients::{generate_field, CoefficientKind, CoefficientSpec};
use crate::duhamel::{duhamel_div, duhamel_source, evolve, field_gradient};
use crate::ensemble::{BandLimited, EnsembleSpec, ProbeField, WhitneyBump};
use crate::error::{Error, Result};
use crate::exponents::{rational_from_f64, rd_wellposed_check, rh_exponents, Exponent, WellposedReport};
use crate::geometry::{GridSpec, SpaceTimeField, TimeLadder, VectorField};
use crate::operator::{assemble_operator, phi1, DiscreteOperator};
use crate::solver::{
    apply_nonlinearity, bootstrap_table, estimate_lifespan, picard_solve, uniqueness_probe, BootstrapRow, LifespanEstimate,
    LifespanOptions, NonlinearitySpec, PicardOptions, UniquenessReport,
};
use crate::spaces::{z_norm, ZParams};
use crate::verify::{
    admissible_whitney_boxes, initial_trace_error, rh_check, rh_improved_check, weak_residual, ResidualRow, RhRow,
    TestFunctionBank, TraceReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityName {
    Power,
    AllenCahn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: NonlinearityName,
    pub rho: f64,
    pub mu: f64,
    /// Allen-Cahn validity range.
    pub range: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self { kind: NonlinearityName::Power, rho: 3.0, mu: 1.0, range: 3.0 }
    }
}

impl NonlinearityConfig {
    pub fn spec(&self) -> Result<NonlinearitySpec> {
        match self.kind {
            NonlinearityName::Power => NonlinearitySpec::power(self.rho, self.mu),
            NonlinearityName::AllenCahn => NonlinearitySpec::allen_cahn(self.range),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentConfig {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(rename = "Q")]
    pub q_adj_dual: f64,
    /// Integrability of the improved reverse Hölder check.
    pub rh_q: Option<f64>,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        Self { p: 3.75, q: 5.0, r: 5.0, beta: -0.25, alpha: -0.4, q_adj_dual: 10.0 / 7.0, rh_q: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Zero,
    Constant,
    BandLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub kind: DataKind,
    pub amplitude: f64,
    pub kmin: i32,
    pub kmax: i32,
    pub modes: usize,
    pub seed: u64,
    /// Replace the datum by `e^{-τL}` of it, making it smooth relative to `L`.
    pub smoothing: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self { kind: DataKind::BandLimited, amplitude: 0.3, kmin: 1, kmax: 3, modes: 3, seed: 2, smoothing: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    None,
    WhitneyBumps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    None,
    /// `F = ∇g` for a static band-limited `g`.
    StaticGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSpec {
    pub source: SourceKind,
    pub divergence: DivergenceKind,
    pub amplitude: f64,
    pub bumps: usize,
    pub seed: u64,
}

impl Default for ForcingSpec {
    fn default() -> Self {
        Self { source: SourceKind::WhitneyBumps, divergence: DivergenceKind::None, amplitude: 1.0, bumps: 3, seed: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub count: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { count: 20, seed: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub picard_tol: f64,
    pub max_iter: usize,
    pub lambda_ball: f64,
    pub residual: f64,
    pub trace_rate: f64,
    pub lifespan_horizon: f64,
    pub lifespan_rtol: f64,
    pub cap: f64,
    pub rh_dilation: f64,
    pub rh_boxes: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            picard_tol: 1e-12,
            max_iter: 60,
            lambda_ball: 1.0,
            residual: 1e-4,
            trace_rate: 0.95,
            lifespan_horizon: 1.0,
            lifespan_rtol: 1e-7,
            cap: 1e6,
            rh_dilation: 1.5,
            rh_boxes: 20,
        }
    }
}

/// One JSON document drives every scenario; missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub dimension: usize,
    pub grid_points: usize,
    pub domain_length: f64,
    pub horizon: f64,
    pub ladder_depth: usize,
    pub per_rung: usize,
    pub coefficient: CoefficientSpec,
    pub nonlinearity: NonlinearityConfig,
    pub exponents: ExponentConfig,
    pub data: DataSpec,
    pub forcing: ForcingSpec,
    pub probes: ProbeConfig,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            dimension: 1,
            grid_points: 64,
            domain_length: 8.0,
            horizon: 0.25,
            ladder_depth: 6,
            per_rung: 64,
            coefficient: CoefficientSpec {
                kind: CoefficientKind::Checkerboard,
                contrast: (1.0, 10.0),
                cells: 8,
                seed: 7,
                ..Default::default()
            },
            nonlinearity: NonlinearityConfig::default(),
            exponents: ExponentConfig::default(),
            data: DataSpec::default(),
            forcing: ForcingSpec::default(),
            probes: ProbeConfig::default(),
            tolerances: Tolerances::default(),
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    /// Parses JSON, reporting the path of the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Parse(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        self.ladder()?;
        self.nonlinearity.spec()?;
        if self.per_rung < 4 {
            return Err(Error::InvalidParams("per_rung must be >= 4".into()));
        }
        if self.grid_points % self.coefficient.cells != 0 {
            return Err(Error::InvalidParams("coefficient.cells must divide grid_points".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        self.grid_with(self.grid_points)
    }

    pub fn grid_with(&self, points: usize) -> Result<GridSpec> {
        GridSpec::new(self.dimension, points, self.domain_length)
    }

    pub fn ladder(&self) -> Result<Arc<TimeLadder>> {
        Ok(Arc::new(TimeLadder::new(self.horizon, self.ladder_depth, self.per_rung)?))
    }

    /// The same coefficient field (same cells and seed) on a grid with `points` per axis.
    pub fn operator_with(&self, points: usize) -> Result<DiscreteOperator> {
        let g = self.grid_with(points)?;
        assemble_operator(&generate_field(&g, &self.coefficient)?, &g)
    }

    pub fn operator(&self) -> Result<DiscreteOperator> {
        self.operator_with(self.grid_points)
    }

    /// Initial datum on the grid of `op`.
    pub fn datum(&self, op: &DiscreteOperator) -> Result<Vec<f64>> {
        let raw = self.raw_datum(op.grid());
        if self.data.smoothing > 0.0 { op.semigroup_apply(self.data.smoothing, &raw) } else { Ok(raw) }
    }

    fn raw_datum(&self, grid: &GridSpec) -> Vec<f64> {
        let d = &self.data;
        match d.kind {
            DataKind::Zero => vec![0.0; grid.len()],
            DataKind::Constant => vec![d.amplitude; grid.len()],
            DataKind::BandLimited => {
                BandLimited::random(grid.dim(), grid.length(), d.kmin, d.kmax, d.modes, d.seed).scaled(d.amplitude).sample(grid)
            }
        }
    }

    fn source(&self, grid: &GridSpec, ladder: &Arc<TimeLadder>) -> Option<ProbeField> {
        let fs = &self.forcing;
        if fs.source == SourceKind::None {
            return None;
        }
        let spec = EnsembleSpec { bumps: fs.bumps, waves: 0, ..Default::default() };
        let mut field = crate::ensemble::probe_field(grid.dim(), grid.length(), ladder, &spec, fs.seed);
        for b in &mut field.bumps {
            b.amplitude *= fs.amplitude;
        }
        Some(field)
    }

    fn static_potential(&self, grid: &GridSpec) -> Option<Vec<f64>> {
        let fs = &self.forcing;
        (fs.divergence == DivergenceKind::StaticGradient)
            .then(|| BandLimited::random(grid.dim(), grid.length(), 1, 3, 3, fs.seed + 1).scaled(fs.amplitude).sample(grid))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub note: Option<String>,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value <= threshold, value: Some(value), threshold: Some(threshold), note: None }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed: value >= threshold, value: Some(value), threshold: Some(threshold), note: None }
    }

    fn flag(name: &str, passed: bool, note: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value: None, threshold: None, note: Some(note.into()) }
    }

    fn failed(name: &str, err: &Error) -> Self {
        Self::flag(name, false, format!("error: {err}"))
    }
}

/// `(norm_kind, p, q, beta, alpha, T, value)` rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormRow {
    pub norm_kind: String,
    pub p: f64,
    pub q: f64,
    pub beta: f64,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub value: f64,
}

/// Heights of the three lowest rungs and dyadic fractions of the bottom interval.
pub fn trace_times(ladder: &TimeLadder) -> Vec<f64> {
    let d = ladder.depth();
    let mut times: Vec<f64> = (d.saturating_sub(2)..=d).map(|m| ladder.height(m)).collect();
    times.extend((1..=4).map(|j| ladder.height(d) * 0.5f64.powi(j)));
    times
}

fn static_field(grid: &GridSpec, ladder: &Arc<TimeLadder>, g: &[f64]) -> SpaceTimeField {
    let mut out = SpaceTimeField::zeros(grid, ladder);
    for k in 0..ladder.len() {
        out.set_slice(k, g);
    }
    out
}

fn record<T>(checks: &mut Vec<Check>, name: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            checks.push(Check::failed(name, &e));
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearReport {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub residuals: Vec<ResidualRow>,
    pub trace: Option<TraceReport>,
    pub norms: Vec<NormRow>,
    pub passed: bool,
}

fn linear_solution(
    op: &DiscreteOperator,
    ladder: &Arc<TimeLadder>,
    u0: &[f64],
    f: Option<&SpaceTimeField>,
    big_f: Option<&VectorField>,
) -> Result<crate::duhamel::Trajectory> {
    let mut traj = evolve(op, ladder, Some(u0), f)?;
    if let Some(big_f) = big_f {
        let div = crate::duhamel::field_divergence(big_f)?;
        let extra = evolve(op, ladder, None, Some(&div))?;
        traj.mids = traj.mids.add(&extra.mids)?;
        for (a, b) in traj.nodes.iter_mut().zip(&extra.nodes) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    Ok(traj)
}

/// `u = E(u0) + ℒ¹(f) + ℛ^{1/2}(F)` with residual, trace, regularity and
/// consistency checks.
pub fn linear_cauchy_scenario(cfg: &ScenarioConfig) -> Result<LinearReport> {
    cfg.validate()?;
    let op = cfg.operator()?;
    let grid = op.grid().clone();
    let ladder = cfg.ladder()?;
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();
    let u0 = cfg.datum(&op)?;
    let source = cfg.source(&grid, &ladder);
    let f = source.as_ref().map(|s| s.sample(&grid, &ladder));
    let potential = cfg.static_potential(&grid);
    let big_f = potential.as_ref().map(|g| field_gradient(&static_field(&grid, &ladder, g)));
    let big_f = match big_f.transpose() {
        Ok(v) => v,
        Err(e) => {
            checks.push(Check::failed("divergence source", &e));
            None
        }
    };
    let traj = linear_solution(&op, &ladder, &u0, f.as_ref(), big_f.as_ref())?;
    let u = traj.mids;

    let mut residuals = Vec::new();
    if let Some(bank) = record(&mut checks, "test function bank", TestFunctionBank::random(&grid, &ladder, 20, cfg.seed)) {
        if let Some(rep) = record(&mut checks, "weak residual", weak_residual(&op, &u, f.as_ref(), big_f.as_ref(), &bank)) {
            checks.push(Check::at_most("weak residual", rep.max, tol.residual));
            residuals = rep.rows;
        }
    }

    let mut trace = None;
    if let Some(bank) = record(&mut checks, "trace bank", TestFunctionBank::random(&grid, &ladder, 10, cfg.seed + 1)) {
        let times = trace_times(&ladder);
        let free = evolve(&op, &ladder, Some(&u0), None).map(|t| t.mids);
        if let Some(rep) = record(&mut checks, "initial trace", free.and_then(|e| initial_trace_error(&e, &u0, &bank, &times))) {
            match rep.rate {
                Some(rate) => checks.push(Check::at_least("initial trace rate", rate, tol.trace_rate)),
                None => checks.push(Check::flag("initial trace rate", true, "pairings vanish identically")),
            }
            trace = Some(rep);
        }
        // |<ℒ(g)(t), ψ>| <= t sup|g| |ψ|_1 for the total source g = f + div F
        let mut total = f.clone().unwrap_or_else(|| SpaceTimeField::zeros(&grid, &ladder));
        if let Some(big_f) = &big_f {
            if let Some(div) = record(&mut checks, "divergence", crate::duhamel::field_divergence(big_f)) {
                total = total.add(&div)?;
            }
        }
        let duhamel = u.sub(&evolve(&op, &ladder, Some(&u0), None)?.mids)?;
        if let Some(rep) = record(&mut checks, "duhamel trace", initial_trace_error(&duhamel, &vec![0.0; grid.len()], &bank, &times)) {
            let mass = bank
                .functions
                .iter()
                .map(|tf| tf.space_samples(&grid).iter().map(|v| v.abs()).sum::<f64>() * grid.cell_volume())
                .fold(0.0, f64::max);
            let worst = rep
                .times
                .iter()
                .zip(&rep.pairings)
                .map(|(t, p)| p / (t * total.max_abs() * mass).max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            checks.push(Check::at_most("duhamel trace bound", worst, 1.0 + 1e-9));
        }
    }

    let mut norms = Vec::new();
    let beta = cfg.exponents.beta;
    for &(p, q) in &[(2.0, 2.0), (2.0, f64::INFINITY), (cfg.exponents.p, cfg.exponents.q), (cfg.exponents.p, 2.0)] {
        if let Some(params) = record(&mut checks, "z-norm parameters", ZParams::new(p, q, beta, cfg.horizon)) {
            let value = z_norm(&u, &params);
            norms.push(NormRow { norm_kind: "z".into(), p, q, beta, alpha: f64::NAN, horizon: cfg.horizon, value });
        }
    }
    checks.push(Check::flag("regularity table finite", norms.iter().all(|r| r.value.is_finite()), format!("{} norms", norms.len())));

    // two time resolutions: coarse midpoints are nodes of the refined ladder
    if let Some(fine_ladder) = record(&mut checks, "refined ladder", ladder.refined(2).map(Arc::new)) {
        let fine_f = source.as_ref().map(|s| s.sample(&grid, &fine_ladder));
        let fine_big_f = potential.as_ref().and_then(|g| field_gradient(&static_field(&grid, &fine_ladder, g)).ok());
        if let Some(fine) = record(
            &mut checks,
            "refined solve",
            linear_solution(&op, &fine_ladder, &u0, fine_f.as_ref(), fine_big_f.as_ref()),
        ) {
            let (mut num, mut den) = (0.0, 0.0);
            for k in 0..ladder.len() {
                let (a, b) = (u.slice(k), &fine.nodes[2 * k + 1]);
                for i in 0..grid.len() {
                    num += (a[i] - b[i]).powi(2);
                    den += b[i] * b[i];
                }
            }
            let dev = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
            checks.push(Check::at_most("time-resolution agreement", dev, 1e-3));
        }
    }

    if let (Some(source), Some(f)) = (&source, &f) {
        if source.bumps.len() >= 2 {
            let (left, right) = source.bumps.split_at(source.bumps.len() / 2);
            let part = |bumps: &[WhitneyBump]| ProbeField { bumps: bumps.to_vec(), ..source.clone() }.sample(&grid, &ladder);
            let sum = duhamel_source(&op, &part(left)).and_then(|a| a.add(&duhamel_source(&op, &part(right))?));
            let whole = duhamel_source(&op, f);
            if let (Ok(sum), Ok(whole)) = (sum, whole) {
                let dev = sum.sub(&whole)?.max_abs() / whole.max_abs().max(f64::MIN_POSITIVE);
                checks.push(Check::at_most("superposition", dev, 1e-10));
            }
        }
    }

    if let (Some(g), Some(big_f)) = (&potential, &big_f) {
        if cfg.coefficient.kind == CoefficientKind::Constant {
            let w = crate::operator::divergence(&grid, &crate::operator::gradient(&grid, g));
            let resp = duhamel_div(&op, big_f)?;
            let mut worst = 0.0f64;
            let mut scale = 0.0f64;
            for (k, s) in ladder.samples().iter().enumerate() {
                let exact = op.spectral_apply(&w, |mu| s.time * phi1(s.time * mu))?;
                for (a, b) in resp.slice(k).iter().zip(&exact) {
                    worst = worst.max((a - b).abs());
                    scale = scale.max(b.abs());
                }
            }
            checks.push(Check::at_most("static gradient vs closed form", worst / scale.max(f64::MIN_POSITIVE), 1e-6));
        }
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(LinearReport { scenario: cfg.scenario.clone(), checks, residuals, trace, norms, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardSummary {
    pub iterations: usize,
    pub contraction_max: f64,
    pub residual: f64,
    pub ball_norm: f64,
    pub inside_ball: bool,
    pub metric_r: f64,
    pub metric_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdReport {
    pub scenario: String,
    pub checks: Vec<Check>,
    /// Outside the proven parameter range.
    pub exploratory: bool,
    pub wellposed: Option<WellposedReport>,
    pub picard: Option<PicardSummary>,
    pub bootstrap: Vec<BootstrapRow>,
    pub residuals: Vec<ResidualRow>,
    pub rh: Vec<RhRow>,
    pub rh_improved: Vec<RhRow>,
    pub uniqueness: Option<UniquenessReport>,
    pub lifespan: Option<LifespanEstimate>,
    pub passed: bool,
}

fn exponent(x: f64) -> Result<Exponent> {
    if x.is_infinite() { Ok(Exponent::Infinite) } else { Ok(Exponent::Finite(rational_from_f64(x)?)) }
}

/// Default integrability for the improved RH check: midpoint of `(RD₋, 2_*(1+ρ))`.
pub fn default_rh_q(n: usize, rho: f64) -> f64 {
    let lower = 2.0 * (n as f64 + 2.0) / (n as f64 + 4.0);
    0.5 * ((n as f64 + 2.0) * rho / 2.0 + lower * (1.0 + rho))
}

/// Picard solve followed by every downstream check.
pub fn rd_wellposedness_scenario(cfg: &ScenarioConfig) -> Result<RdReport> {
    cfg.validate()?;
    let op = cfg.operator()?;
    let grid = op.grid().clone();
    let ladder = cfg.ladder()?;
    let spec = cfg.nonlinearity.spec()?;
    let tol = &cfg.tolerances;
    let ex = &cfg.exponents;
    let n = cfg.dimension;
    let mut checks = Vec::new();

    let wellposed = record(
        &mut checks,
        "parameter relations",
        (|| {
            rd_wellposed_check(
                n as u32,
                rational_from_f64(spec.rho)?,
                exponent(ex.p)?,
                rational_from_f64(ex.alpha)?,
                exponent(ex.r)?,
                exponent(ex.q)?,
                rational_from_f64(ex.q_adj_dual)?,
            )
        })(),
    );
    let exploratory = wellposed.as_ref().is_none_or(|w| !w.verdict.admissible);
    if let Some(w) = &wellposed {
        let failed: Vec<String> = w.verdict.failed().iter().map(|c| c.to_string()).collect();
        checks.push(Check::flag("parameter relations", true, if failed.is_empty() { "admissible".into() } else { format!("exploratory: {}", failed.join("; ")) }));
    }

    let u0 = cfg.datum(&op)?;
    let opts = PicardOptions { r: ex.r, lambda_ball: tol.lambda_ball, max_iter: tol.max_iter, tol: tol.picard_tol, ..Default::default() };
    let sol = record(&mut checks, "picard", picard_solve(&op, &u0, &ladder, &spec, &opts));
    let mut picard = None;
    let mut bootstrap = Vec::new();
    let mut residuals = Vec::new();
    let (mut rh, mut rh_improved) = (Vec::new(), Vec::new());
    let mut uniqueness = None;
    if let Some(sol) = &sol {
        checks.push(Check::at_most("fixed-point residual", sol.residual, 1e-8));
        checks.push(Check::flag("inside ball", true, format!("|u - E(u0)| = {:.3e}, lambda = {}", sol.ball_norm, sol.lambda_ball)));
        picard = Some(PicardSummary {
            iterations: sol.iterations,
            contraction_max: sol.contraction_max(),
            residual: sol.residual,
            ball_norm: sol.ball_norm,
            inside_ball: sol.inside_ball,
            metric_r: sol.metric_r,
            metric_beta: sol.metric_beta,
        });
        let rd_minus = (n as f64 + 2.0) * spec.rho / 2.0;
        let rd_plus = n as f64 * (1.0 + spec.rho) * spec.rho / 2.0;
        let rs = [rd_minus + 0.25 * (rd_plus - rd_minus), 0.5 * (rd_minus + rd_plus), rd_minus + 0.75 * (rd_plus - rd_minus)];
        let pairs: Vec<(f64, f64)> = rs.iter().flat_map(|&r| [(r, r), (r, 2.0 * r), (r, f64::INFINITY)]).collect();
        if let Some(rows) = record(&mut checks, "bootstrap", bootstrap_table(sol, spec.rho, &pairs)) {
            checks.push(Check::flag("bootstrap finite", rows.iter().all(|r| r.value.is_finite()), format!("{} rows", rows.len())));
            bootstrap = rows;
        }
        if let Some(bank) = record(&mut checks, "test function bank", TestFunctionBank::random(&grid, &ladder, 20, cfg.seed)) {
            let rep = apply_nonlinearity(&spec, &sol.u).and_then(|f| weak_residual(&op, &sol.u, Some(&f), None, &bank));
            if let Some(rep) = record(&mut checks, "weak residual", rep) {
                checks.push(Check::at_most("weak residual", rep.max, tol.residual));
                residuals = rep.rows;
            }
        }
        let boxes = record(
            &mut checks,
            "rh boxes",
            admissible_whitney_boxes(&grid, &ladder, tol.rh_dilation, tol.rh_boxes, cfg.seed),
        );
        if let Some(boxes) = boxes {
            if let Some(rep) = record(&mut checks, "rh", rh_check(&sol.u, spec.rho, &boxes, tol.rh_dilation)) {
                checks.push(Check::flag("rh constant finite", rep.constant.is_finite(), format!("C = {:.4}", rep.constant)));
                rh = rep.rows;
            }
            let rhq = ex.rh_q.unwrap_or_else(|| default_rh_q(n, spec.rho));
            let improved = (|| {
                let params = rh_exponents(n as u32, rational_from_f64(spec.rho)?, rational_from_f64(rhq)?, tol.rh_dilation)?;
                rh_improved_check(&sol.u, &params, &boxes)
            })();
            match improved {
                Ok(rep) => {
                    checks.push(Check::flag("improved rh constant finite", rep.constant.is_finite(), format!("C = {:.4}, q = {rhq}", rep.constant)));
                    rh_improved = rep.rows;
                }
                Err(e) => checks.push(Check::flag("improved rh", true, format!("skipped: {e}"))),
            }
        }
        let coarse = op;
        let fine = cfg.operator_with(2 * cfg.grid_points).and_then(|op| cfg.datum(&op).map(|d| (op, d)));
        if let Some((fine, fine_u0)) = record(&mut checks, "refined operator", fine) {
            let levels = vec![(&coarse, u0.clone()), (&fine, fine_u0)];
            if let Some(rep) = record(&mut checks, "uniqueness", uniqueness_probe(&levels, &ladder, &spec, &opts)) {
                checks.push(Check::at_most("initialization agreement", rep.init_deviation, 1e-8));
                uniqueness = Some(rep);
            }
        }
        let lopts = LifespanOptions {
            horizon: tol.lifespan_horizon,
            cap: tol.cap,
            rtol: tol.lifespan_rtol,
            monitor_r: Some(ex.r),
            ..Default::default()
        };
        let lifespan = record(&mut checks, "lifespan", estimate_lifespan(&coarse, &u0, &spec, &lopts));
        if let Some(est) = &lifespan {
            let other = estimate_lifespan(&coarse, &u0, &spec, &LifespanOptions { monitor_r: Some(2.0 * ex.r), ..lopts });
            if let Some(other) = record(&mut checks, "lifespan", other) {
                checks.push(Check::flag("lifespan class independence", other.tau == est.tau, format!("tau = {}", est.tau)));
            }
        }
        let passed = checks.iter().all(|c| c.passed);
        return Ok(RdReport {
            scenario: cfg.scenario.clone(),
            checks,
            exploratory,
            wellposed,
            picard,
            bootstrap,
            residuals,
            rh,
            rh_improved,
            uniqueness,
            lifespan,
            passed,
        });
    }
    Ok(RdReport {
        scenario: cfg.scenario.clone(),
        passed: false,
        checks,
        exploratory,
        wellposed,
        picard,
        bootstrap,
        residuals,
        rh,
        rh_improved,
        uniqueness,
        lifespan: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LifespanRow {
    pub amplitude: f64,
    pub tau: f64,
    pub censored: bool,
    pub refinement_ratio: f64,
}

/// Lifespan of `c·u0` over the given amplitudes.
pub fn lifespan_sweep(
    op: &DiscreteOperator,
    u0: &[f64],
    spec: &NonlinearitySpec,
    opts: &LifespanOptions,
    amplitudes: &[f64],
) -> Result<Vec<LifespanRow>> {
    amplitudes
        .iter()
        .map(|&c| {
            let data: Vec<f64> = u0.iter().map(|v| c * v).collect();
            let est = estimate_lifespan(op, &data, spec, opts)?;
            let ratio = crate::solver::lifespan_refinement_ratio(op, &data, spec, opts, &est)?;
            Ok(LifespanRow { amplitude: c, tau: est.tau, censored: est.censored, refinement_ratio: ratio })
        })
        .collect()
}
