//! Command-line entry point. Every run writes `manifest.json` before and after
//! the work, CSV/JSON outputs into `--out`, and `error.json` on failure.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 a check failed,
//! 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::coefficients::CoefficientKind;
use crate::duhamel::{hyper_probe, Ensemble, ProbeMode, SIOSpec, SioOperator};
use crate::ensemble::{split_seed, BandLimited, EnsembleSpec};
use crate::error::{Error, Result};
use crate::exponents::{admissible_region, parse_rational, rational_from_f64, rh_exponents, to_f64, Rational};
use crate::pipeline::{default_rh_q, lifespan_sweep, linear_cauchy_scenario, rd_wellposedness_scenario, NormRow, ScenarioConfig};
use crate::solver::{caloric_ratio, free_evolution, picard_solve, LifespanOptions, PicardOptions};
use crate::spaces::{besov_norm, weighted_lp_norm, z_norm, BesovParams, LPLadder, ZParams};
use crate::suite::{run_suite, Profile};
use crate::verify::{admissible_whitney_boxes, rh_check, rh_improved_check, RhRow};

#[derive(Debug, Parser)]
#[command(name = "roughheat", version, about = "Rough-coefficient heat and reaction-diffusion experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// JSON scenario file; missing keys take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, default_value = "quick")]
    pub profile: String,
    /// Spatial dimension.
    #[arg(long = "n", global = true)]
    pub dimension: Option<u32>,
    /// Grid points per axis.
    #[arg(long = "N", global = true)]
    pub grid_points: Option<usize>,
    #[arg(long = "L", global = true)]
    pub domain_length: Option<f64>,
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub coeff: Option<String>,
    /// Growth exponent; accepts `a/b`.
    #[arg(long, global = true)]
    pub rho: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// `Q`; accepts `a/b`.
    #[arg(long = "Q", global = true)]
    pub q_adj_dual: Option<String>,
    #[arg(long, global = true)]
    pub p: Option<f64>,
    #[arg(long, global = true)]
    pub q: Option<f64>,
    #[arg(long, global = true)]
    pub r: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub amplitude: Option<f64>,
    /// Probe ensemble size.
    #[arg(long, global = true)]
    pub count: Option<usize>,
}

#[derive(Debug, Subcommand, Clone, Serialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Admissible (1/p, α) region, its vertices and the critical segment.
    Region {
        #[arg(long, default_value_t = 40)]
        resolution: usize,
    },
    /// Z, weighted-Lp and Besov norms of the free evolution of the datum.
    Norms,
    /// Z-to-Besov ratios over band-limited data.
    Caloric,
    /// Hypercontractivity probes at N and 2N.
    Hyper {
        #[arg(long, default_value = "source")]
        op: String,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value = "z_to_z")]
        mode: String,
    },
    /// Linear Cauchy problem with residual and trace checks.
    Linear,
    /// Reaction-diffusion fixed point with every downstream check.
    Solve,
    /// Lifespan sweep over amplitudes of the datum.
    Lifespan {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        amplitudes: Vec<f64>,
    },
    /// Reverse Hölder ratios on Whitney boxes of a converged run.
    Rh,
    /// The acceptance suite.
    Suite,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Region { .. } => "region",
            Self::Norms => "norms",
            Self::Caloric => "caloric",
            Self::Hyper { .. } => "hyper",
            Self::Linear => "linear",
            Self::Solve => "solve",
            Self::Lifespan { .. } => "lifespan",
            Self::Rh => "rh",
            Self::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub run_id: String,
    pub subcommand: String,
    pub command: Command,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub profile: Profile,
    pub version: String,
    pub status: String,
    pub exit_code: Option<i32>,
    pub outputs: Vec<String>,
    pub wall_seconds: Option<f64>,
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    run_id: &'a str,
    exit_code: i32,
    kind: &'a str,
    message: String,
}

/// Failure classes of a run.
#[derive(Debug)]
enum Failure {
    Config(Error),
    Numerical(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NumericalFailure(_)
            | Error::NonConvergence { .. }
            | Error::RangeExceeded { .. }
            | Error::ResolutionError(_)
            | Error::EmptyBox
            | Error::ShapeError(_)
            | Error::InvalidIndex(_) => Failure::Numerical(e),
            _ => Failure::Config(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(Error::Parse(format!("io: {e}")))
    }
}

struct Output {
    dir: PathBuf,
    run_id: String,
    written: Vec<String>,
}

impl Output {
    /// Writes through a temporary file so readers never see partial output.
    fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::File::create(&tmp)?.write_all(bytes)?;
        fs::rename(&tmp, self.dir.join(name))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        self.write(name, text.as_bytes())
    }

    /// CSV with `run_id` prepended to every row.
    fn csv<R: Serialize>(&mut self, name: &str, header: &[&str], rows: &[R]) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let mut head = vec!["run_id"];
        head.extend_from_slice(header);
        w.write_record(&head)?;
        for row in rows {
            w.serialize((&self.run_id, row))?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        self.write(name, &bytes)
    }
}

fn apply_overrides(cfg: &mut ScenarioConfig, c: &Common, region: bool) -> Result<()> {
    if !region {
        if let Some(n) = c.dimension {
            cfg.dimension = n as usize;
        }
    }
    if let Some(v) = c.grid_points {
        cfg.grid_points = v;
    }
    if let Some(v) = c.domain_length {
        cfg.domain_length = v;
    }
    if let Some(v) = c.horizon {
        cfg.horizon = v;
    }
    if let Some(v) = c.depth {
        cfg.ladder_depth = v;
    }
    if let Some(v) = &c.coeff {
        cfg.coefficient.kind = v.parse::<CoefficientKind>()?;
    }
    if let Some(v) = &c.rho {
        cfg.nonlinearity.rho = to_f64(&parse_rational(v)?);
    }
    if let Some(v) = c.mu {
        cfg.nonlinearity.mu = v;
    }
    if let Some(v) = &c.q_adj_dual {
        cfg.exponents.q_adj_dual = to_f64(&parse_rational(v)?);
    }
    let ex = &mut cfg.exponents;
    for (slot, v) in [(&mut ex.p, c.p), (&mut ex.q, c.q), (&mut ex.r, c.r), (&mut ex.beta, c.beta), (&mut ex.alpha, c.alpha)] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if let Some(v) = c.amplitude {
        cfg.data.amplitude = v;
    }
    if let Some(v) = c.count {
        cfg.probes.count = v;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
        cfg.probes.seed = s;
    }
    Ok(())
}

fn run_id(command: &Command, cfg: &ScenarioConfig, profile: Profile, region_n: u32) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&(command, cfg, profile, region_n)).unwrap_or_default());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Parses arguments and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    execute(&cli)
}

pub fn execute(cli: &Cli) -> i32 {
    let start = Instant::now();
    let c = &cli.common;
    let out_dir = c.out.clone();
    let fail_early = |code: i32, kind: &str, message: String| {
        eprintln!("error: {message}");
        if fs::create_dir_all(&out_dir).is_ok() {
            let rec = ErrorRecord { run_id: "", exit_code: code, kind, message };
            let _ = fs::write(out_dir.join("error.json"), serde_json::to_string_pretty(&rec).unwrap_or_default());
        }
        code
    };
    let region = matches!(cli.command, Command::Region { .. });
    let setup = (|| -> Result<(ScenarioConfig, Profile)> {
        let mut cfg = match &c.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
                ScenarioConfig::from_json(&text)?
            }
            None => ScenarioConfig::default(),
        };
        apply_overrides(&mut cfg, c, region)?;
        if !region && !matches!(cli.command, Command::Suite) {
            cfg.validate()?;
        }
        Ok((cfg, c.profile.parse()?))
    })();
    let (cfg, profile) = match setup {
        Ok(v) => v,
        Err(e) => return fail_early(1, "invalid_config", e.to_string()),
    };
    if let Err(e) = fs::create_dir_all(&out_dir) {
        return fail_early(1, "invalid_config", format!("cannot create {}: {e}", out_dir.display()));
    }
    let region_n = c.dimension.unwrap_or(cfg.dimension as u32);
    let id = run_id(&cli.command, &cfg, profile, region_n);
    let mut manifest = RunManifest {
        run_id: id.clone(),
        subcommand: cli.command.name().into(),
        command: cli.command.clone(),
        config: cfg.clone(),
        seed: cfg.seed,
        profile,
        version: env!("CARGO_PKG_VERSION").into(),
        status: "running".into(),
        exit_code: None,
        outputs: Vec::new(),
        wall_seconds: None,
    };
    let mut out = Output { dir: out_dir.clone(), run_id: id.clone(), written: Vec::new() };
    if let Err(e) = out.json("manifest.json", &manifest) {
        return fail_early(1, "io", e.to_string());
    }
    out.written.clear();

    let result = dispatch(&cli.command, c, &cfg, profile, region_n, &mut out);
    let code = match &result {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(Failure::Config(_)) => 1,
        Err(Failure::Numerical(_)) => 3,
    };
    if let Err(f) = &result {
        let (kind, e) = match f {
            Failure::Config(e) => ("invalid_config", e),
            Failure::Numerical(e) => ("numerical_failure", e),
        };
        eprintln!("error: {e}");
        let rec = ErrorRecord { run_id: &id, exit_code: code, kind, message: e.to_string() };
        let _ = out.json("error.json", &rec);
    }
    manifest.status = match code {
        0 => "ok",
        2 => "check_failed",
        _ => "error",
    }
    .into();
    manifest.exit_code = Some(code);
    manifest.outputs = out.written.clone();
    manifest.wall_seconds = Some(start.elapsed().as_secs_f64());
    let _ = out.json("manifest.json", &manifest);
    code
}

/// `Ok(false)` means the run completed but a check failed.
fn dispatch(
    command: &Command,
    c: &Common,
    cfg: &ScenarioConfig,
    profile: Profile,
    region_n: u32,
    out: &mut Output,
) -> std::result::Result<bool, Failure> {
    match command {
        Command::Region { resolution } => region(c, cfg, region_n, *resolution, out),
        Command::Norms => norms(cfg, out),
        Command::Caloric => caloric(cfg, out),
        Command::Hyper { op, kappa, mode } => hyper(cfg, op, *kappa, mode, out),
        Command::Linear => {
            let rep = linear_cauchy_scenario(cfg)?;
            out.json("linear.json", &rep)?;
            out.csv("residuals.csv", &["test_id", "residual"], &rep.residuals)?;
            out.csv("norms.csv", &NORM_HEADER, &rep.norms)?;
            print_checks(rep.checks.iter().map(|c| (c.name.as_str(), c.passed)));
            Ok(rep.passed)
        }
        Command::Solve => solve(cfg, out),
        Command::Lifespan { amplitudes } => lifespan(cfg, amplitudes, out),
        Command::Rh => rh(cfg, out),
        Command::Suite => {
            let results = run_suite(profile);
            let rows: Vec<_> = results.iter().map(|r| (r.id, &r.title, r.passed)).collect();
            out.csv("suite.csv", &["criterion", "title", "passed"], &rows)?;
            let metrics: Vec<_> = results
                .iter()
                .flat_map(|r| r.metrics.iter().map(move |m| (r.id, &m.name, m.value, &m.bound, m.ok)))
                .collect();
            out.csv("suite_metrics.csv", &["criterion", "metric", "value", "bound", "ok"], &metrics)?;
            out.json("suite.json", &results)?;
            for r in &results {
                println!("{}", r.line());
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

const NORM_HEADER: [&str; 7] = ["norm_kind", "p", "q", "beta", "alpha", "T", "value"];

fn print_checks<'a>(checks: impl Iterator<Item = (&'a str, bool)>) {
    for (name, ok) in checks {
        println!("{} {name}", if ok { "ok  " } else { "FAIL" });
    }
}

#[derive(Serialize)]
struct RegionDoc<'a> {
    region: &'a crate::exponents::Region,
    inv_rd_plus: f64,
}

fn region(c: &Common, cfg: &ScenarioConfig, n: u32, resolution: usize, out: &mut Output) -> std::result::Result<bool, Failure> {
    let rho: Rational = match &c.rho {
        Some(s) => parse_rational(s)?,
        None => rational_from_f64(cfg.nonlinearity.rho)?,
    };
    let q: Rational = match &c.q_adj_dual {
        Some(s) => parse_rational(s)?,
        None => parse_rational(&format!("{:.10}", cfg.exponents.q_adj_dual))?,
    };
    let reg = admissible_region(n, rho, q, resolution)?;
    let point = |(x, y): &(Rational, Rational)| (to_f64(x), to_f64(y), x.to_string(), y.to_string());
    let vertices: Vec<_> = reg.vertices.iter().enumerate().map(|(i, v)| (i, point(v))).collect();
    out.csv("region_vertices.csv", &["vertex", "inv_p", "alpha", "inv_p_exact", "alpha_exact"], &vertices)?;
    let segment: Vec<_> = reg
        .critical_segment
        .iter()
        .flat_map(|(a, b)| [("left", point(a)), ("right", point(b))])
        .collect();
    out.csv("region_segment.csv", &["endpoint", "inv_p", "alpha", "inv_p_exact", "alpha_exact"], &segment)?;
    let mask: Vec<_> = reg.mask.iter().map(|m| (m.inv_p, m.alpha, m.admissible)).collect();
    out.csv("region_mask.csv", &["inv_p", "alpha", "admissible"], &mask)?;
    out.json("region.json", &RegionDoc { region: &reg, inv_rd_plus: to_f64(&reg.inv_rd_plus) })?;
    for (i, (x, y, xs, ys)) in &vertices {
        println!("vertex {i}: ({x:.4}, {y:.4}) = ({xs}, {ys})");
    }
    Ok(true)
}

fn norms(cfg: &ScenarioConfig, out: &mut Output) -> std::result::Result<bool, Failure> {
    let op = cfg.operator()?;
    let ladder = cfg.ladder()?;
    let u0 = cfg.datum(&op)?;
    let e = free_evolution(&op, &u0, &ladder)?;
    let ex = &cfg.exponents;
    let t = cfg.horizon;
    let mut rows = Vec::new();
    for q in [ex.q, f64::INFINITY] {
        for horizon in [t, f64::INFINITY] {
            let value = z_norm(&e, &ZParams::new(ex.p, q, ex.beta, horizon)?);
            rows.push(NormRow { norm_kind: "z".into(), p: ex.p, q, beta: ex.beta, alpha: f64::NAN, horizon, value });
        }
    }
    rows.push(NormRow {
        norm_kind: "weighted_lp".into(),
        p: ex.p,
        q: ex.p,
        beta: ex.beta,
        alpha: f64::NAN,
        horizon: t,
        value: weighted_lp_norm(&e, ex.p, ex.beta, t),
    });
    let b = besov_norm(&u0, &BesovParams::new(ex.alpha, ex.p)?, &LPLadder::new(op.grid()));
    rows.push(NormRow { norm_kind: "besov".into(), p: ex.p, q: ex.p, beta: f64::NAN, alpha: ex.alpha, horizon: 0.0, value: b });
    out.csv("norms.csv", &NORM_HEADER, &rows)?;
    out.json("norms.json", &rows)?;
    for r in &rows {
        println!("{} p={} q={} T={}: {:.6e}", r.norm_kind, r.p, r.q, r.horizon, r.value);
    }
    Ok(rows.iter().all(|r| r.value.is_finite()))
}

#[derive(Serialize)]
struct CaloricRow {
    datum_id: usize,
    q: f64,
    z_norm: f64,
    besov_norm: f64,
    ratio: f64,
}

#[derive(Serialize)]
struct CaloricSummary {
    alpha: f64,
    p: f64,
    min_ratio: f64,
    max_ratio: f64,
    rows: usize,
}

fn caloric(cfg: &ScenarioConfig, out: &mut Output) -> std::result::Result<bool, Failure> {
    let op = cfg.operator()?;
    let ladder = cfg.ladder()?;
    let (alpha, p) = (cfg.exponents.alpha, cfg.exponents.p);
    let d = &cfg.data;
    let mut rows = Vec::new();
    for q in [cfg.exponents.q, f64::INFINITY] {
        for i in 0..cfg.probes.count {
            let u0 = BandLimited::random(cfg.dimension, cfg.domain_length, d.kmin, d.kmax, d.modes, split_seed(cfg.probes.seed, i as u64))
                .sample(op.grid());
            let r = caloric_ratio(&op, &u0, &ladder, alpha, p, q)?;
            rows.push(CaloricRow { datum_id: i, q, z_norm: r.z_norm, besov_norm: r.besov_norm, ratio: r.ratio });
        }
    }
    let ratios = rows.iter().map(|r| r.ratio);
    let summary = CaloricSummary {
        alpha,
        p,
        min_ratio: ratios.clone().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.fold(0.0, f64::max),
        rows: rows.len(),
    };
    out.csv("caloric.csv", &["datum_id", "q", "z_norm", "besov_norm", "ratio"], &rows)?;
    out.json("caloric.json", &summary)?;
    println!("ratios in [{:.4}, {:.4}] over {} data", summary.min_ratio, summary.max_ratio, summary.rows);
    Ok(summary.min_ratio.is_finite() && summary.min_ratio > 0.0 && summary.max_ratio.is_finite())
}

#[derive(Serialize)]
struct ProbeCsv<'a> {
    scenario: &'a str,
    seed: u64,
    probe_id: usize,
    op: &'a str,
    p: f64,
    q: f64,
    r: f64,
    beta: f64,
    kappa: f64,
    input_norm: f64,
    output_norm: f64,
    ratio: f64,
    grid_tag: String,
}

#[derive(Serialize)]
struct HyperDoc {
    reports: Vec<crate::duhamel::ProbeReport>,
    stability: f64,
}

fn hyper(cfg: &ScenarioConfig, op_name: &str, kappa: Option<f64>, mode: &str, out: &mut Output) -> std::result::Result<bool, Failure> {
    let which: SioOperator = op_name.parse()?;
    let mode: ProbeMode = mode.parse()?;
    let kappa = kappa.unwrap_or_else(|| which.duhamel().map_or(0.0, |d| to_f64(&d.kappa())));
    let ex = &cfg.exponents;
    let spec = SIOSpec::new(which, ex.q, ex.r, kappa)?;
    let ens = Ensemble { count: cfg.probes.count, seed: cfg.probes.seed, spec: EnsembleSpec::default() };
    let ladder = cfg.ladder()?;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for points in [cfg.grid_points, 2 * cfg.grid_points] {
        let op = cfg.operator_with(points)?;
        let rep = hyper_probe(&op, &ladder, &spec, ex.p, ex.beta, &ens, mode)?;
        for row in &rep.rows {
            rows.push(ProbeCsv {
                scenario: &cfg.scenario,
                seed: cfg.probes.seed,
                probe_id: row.probe_id,
                op: which.label(),
                p: rep.p,
                q: rep.q,
                r: rep.r,
                beta: rep.beta,
                kappa: rep.kappa,
                input_norm: row.input_norm,
                output_norm: row.output_norm,
                ratio: row.ratio,
                grid_tag: format!("N{points}"),
            });
        }
        reports.push(rep);
    }
    let stability = reports[0].stability(&reports[1]);
    let header = [
        "scenario", "seed", "probe_id", "op", "p", "q", "r", "beta", "kappa", "input_norm", "output_norm", "ratio", "grid_tag",
    ];
    out.csv("probes.csv", &header, &rows)?;
    for rep in &reports {
        println!("{} sup = {:.6e} theory_backed = {}", rep.op, rep.sup, rep.theory_backed);
    }
    println!("stability across grids: {stability:.4}");
    let finite = reports.iter().all(|r| r.sup.is_finite());
    out.json("hyper.json", &HyperDoc { reports, stability })?;
    Ok(finite && stability < 2.0)
}

#[derive(Serialize)]
struct RunRow<'a> {
    run_id: &'a str,
    n: usize,
    #[serde(rename = "N")]
    points: usize,
    rho: f64,
    mu: f64,
    coeff_kind: String,
    #[serde(rename = "T")]
    horizon: f64,
    iterations: usize,
    contraction_max: f64,
    residual: f64,
}

fn coeff_label(kind: CoefficientKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn solve(cfg: &ScenarioConfig, out: &mut Output) -> std::result::Result<bool, Failure> {
    let rep = rd_wellposedness_scenario(cfg)?;
    out.json("solve.json", &rep)?;
    if let Some(p) = &rep.picard {
        let row = RunRow {
            run_id: &out.run_id,
            n: cfg.dimension,
            points: cfg.grid_points,
            rho: cfg.nonlinearity.rho,
            mu: cfg.nonlinearity.mu,
            coeff_kind: coeff_label(cfg.coefficient.kind),
            horizon: cfg.horizon,
            iterations: p.iterations,
            contraction_max: p.contraction_max,
            residual: p.residual,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&row).map_err(std::io::Error::other)?;
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        out.write("runs.csv", &bytes)?;
    }
    out.csv("residuals.csv", &["test_id", "residual"], &rep.residuals)?;
    out.csv("rh.csv", &RH_HEADER, &rep.rh)?;
    out.csv("rh_improved.csv", &RH_HEADER, &rep.rh_improved)?;
    out.csv("bootstrap.csv", &["r", "q", "beta", "value", "advisory_ok"], &rep.bootstrap)?;
    print_checks(rep.checks.iter().map(|c| (c.name.as_str(), c.passed)));
    if rep.exploratory {
        println!("parameters outside the proven range (exploratory)");
    }
    Ok(rep.passed)
}

const RH_HEADER: [&str; 8] = ["box_id", "t", "lhs", "rhs1", "rhs2", "ratio", "theta", "q"];

fn lifespan(cfg: &ScenarioConfig, amplitudes: &[f64], out: &mut Output) -> std::result::Result<bool, Failure> {
    let op = cfg.operator()?;
    let u0 = cfg.datum(&op)?;
    let spec = cfg.nonlinearity.spec()?;
    let tol = &cfg.tolerances;
    let opts = LifespanOptions { horizon: tol.lifespan_horizon, cap: tol.cap, rtol: tol.lifespan_rtol, ..Default::default() };
    let rows = lifespan_sweep(&op, &u0, &spec, &opts, amplitudes)?;
    out.csv("lifespan.csv", &["amplitude", "tau", "censored", "refinement_ratio"], &rows)?;
    out.json("lifespan.json", &rows)?;
    for r in &rows {
        println!("amplitude {:>6}: tau = {:.6}{}", r.amplitude, r.tau, if r.censored { " (censored)" } else { "" });
    }
    Ok(true)
}

#[derive(Serialize)]
struct RhDoc {
    constant: f64,
    improved_constant: Option<f64>,
    improved_error: Option<String>,
    boxes: usize,
    dilation: f64,
    rh_q: f64,
}

fn rh(cfg: &ScenarioConfig, out: &mut Output) -> std::result::Result<bool, Failure> {
    let op = cfg.operator()?;
    let ladder = cfg.ladder()?;
    let spec = cfg.nonlinearity.spec()?;
    let tol = &cfg.tolerances;
    let ex = &cfg.exponents;
    let opts = PicardOptions { r: ex.r, lambda_ball: tol.lambda_ball, max_iter: tol.max_iter, tol: tol.picard_tol, ..Default::default() };
    let sol = picard_solve(&op, &cfg.datum(&op)?, &ladder, &spec, &opts)?;
    let boxes = admissible_whitney_boxes(op.grid(), &ladder, tol.rh_dilation, tol.rh_boxes, cfg.seed)?;
    let basic = rh_check(&sol.u, spec.rho, &boxes, tol.rh_dilation)?;
    let rh_q = ex.rh_q.unwrap_or_else(|| default_rh_q(cfg.dimension, spec.rho));
    let improved = rational_from_f64(spec.rho)
        .and_then(|rho| rh_exponents(cfg.dimension as u32, rho, rational_from_f64(rh_q)?, tol.rh_dilation))
        .and_then(|params| rh_improved_check(&sol.u, &params, &boxes));
    out.csv("rh.csv", &RH_HEADER, &basic.rows)?;
    let empty: Vec<RhRow> = Vec::new();
    out.csv("rh_improved.csv", &RH_HEADER, improved.as_ref().map_or(&empty, |r| &r.rows))?;
    let doc = RhDoc {
        constant: basic.constant,
        improved_constant: improved.as_ref().ok().map(|r| r.constant),
        improved_error: improved.as_ref().err().map(|e| e.to_string()),
        boxes: boxes.len(),
        dilation: tol.rh_dilation,
        rh_q,
    };
    out.json("rh.json", &doc)?;
    println!("rh constant {:.4} over {} boxes", doc.constant, doc.boxes);
    match (&doc.improved_constant, &doc.improved_error) {
        (Some(c), _) => println!("improved rh constant {c:.4} at q = {rh_q}"),
        (_, Some(e)) => println!("improved rh skipped: {e}"),
        _ => {}
    }
    Ok(doc.constant.is_finite() && doc.improved_constant.is_none_or(f64::is_finite))
}
