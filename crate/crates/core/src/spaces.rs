//! Weighted Lebesgue, tent-type Z and homogeneous Besov norms on the ladder.
//!
//! The outer `dx dt/t` measure puts weight `ln 2` on each rung; inside a rung
//! sample `k` carries the fraction `w_k / (t_m/2)` of the rung's time measure.
//! Weights `s^{-β}` are evaluated at the sample times, so the `p = q` Z-norm
//! equals the weighted Lebesgue norm exactly on the discrete level.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use num_traits::Zero;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ball_maxima, ball_sums, GridSpec, SpaceTimeField, TimeLadder};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZParams {
    pub p: f64,
    pub q: f64,
    pub beta: f64,
    /// Time horizon; `f64::INFINITY` uses the full ladder.
    pub horizon: f64,
}

impl ZParams {
    pub fn new(p: f64, q: f64, beta: f64, horizon: f64) -> Result<Self> {
        let z = Self { p, q, beta, horizon };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.q > 1.0) {
            return Err(Error::InvalidParams(format!("p = {}, q = {} must exceed 1", self.p, self.q)));
        }
        if !(self.horizon > 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParams("horizon must be positive and beta finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub alpha: f64,
    pub p: f64,
}

impl BesovParams {
    pub fn new(alpha: f64, p: f64) -> Result<Self> {
        if !(alpha < 0.0) {
            return Err(Error::InvalidParams(format!("Besov smoothness {alpha} must be negative")));
        }
        if !(p > 1.0) {
            return Err(Error::InvalidParams(format!("Besov exponent {p} must exceed 1")));
        }
        Ok(Self { alpha, p })
    }
}

fn rungs_up_to(ladder: &TimeLadder, horizon: f64) -> impl Iterator<Item = usize> + '_ {
    (0..ladder.depth()).filter(move |&m| ladder.height(m) <= horizon * (1.0 + 1e-12))
}

/// `( Σ_m ln2 Σ_k (w_k/(t_m/2)) Σ_x h^n |s_k^{-β} u|^p )^{1/p}` over rungs
/// with `t_m <= horizon`; `p = ∞` gives the sup.
pub fn weighted_lp_norm(u: &SpaceTimeField, p: f64, beta: f64, horizon: f64) -> f64 {
    let ladder = u.ladder();
    let cell = u.grid().cell_volume();
    let mut acc = 0.0f64;
    for m in rungs_up_to(ladder, horizon) {
        let half = 0.5 * ladder.height(m);
        for k in ladder.rung_range(m) {
            let s = ladder.samples()[k];
            let w = s.time.powf(-beta);
            let slice = u.slice(k);
            if p.is_infinite() {
                acc = slice.iter().fold(acc, |a, v| a.max((w * v).abs()));
            } else {
                let sum: f64 = slice.iter().map(|v| (w * v).abs().powf(p)).sum();
                acc += LN_2 * (s.weight / half) * cell * sum;
            }
        }
    }
    if p.is_infinite() { acc } else { acc.powf(1.0 / p) }
}

/// Per-point Whitney averages `( ⨏⨏_{W(x,t_m)} |s^{-β}u|^q )^{1/q}` for rung `m`,
/// with the spatial ball dilated by `lambda` but normalized by the undilated
/// ball's measure.
fn rung_averages(u: &SpaceTimeField, m: usize, q: f64, beta: f64, lambda: f64) -> Vec<f64> {
    let grid = u.grid();
    let ladder = u.ladder();
    let half = 0.5 * ladder.height(m);
    let mut g = vec![0.0; grid.len()];
    for k in ladder.rung_range(m) {
        let s = ladder.samples()[k];
        let w = s.time.powf(-beta);
        for (gi, v) in g.iter_mut().zip(u.slice(k)) {
            let a = (w * v).abs();
            if q.is_infinite() {
                *gi = f64::max(*gi, a);
            } else {
                *gi += (s.weight / half) * a.powf(q);
            }
        }
    }
    let radius = ladder.height(m).sqrt();
    let half_period = 0.5 * grid.length();
    if q.is_infinite() {
        return ball_maxima(grid, &g, (lambda * radius).min(half_period));
    }
    let count = grid.ball_points(0, radius.min(half_period)).len() as f64;
    ball_sums(grid, &g, (lambda * radius).min(half_period))
        .into_iter()
        .map(|s| (s / count).powf(1.0 / q))
        .collect()
}

fn outer_norm(u: &SpaceTimeField, params: &ZParams, lambda: f64) -> f64 {
    let ladder = u.ladder();
    let cell = u.grid().cell_volume();
    let mut acc = 0.0f64;
    for m in rungs_up_to(ladder, params.horizon) {
        let avg = rung_averages(u, m, params.q, params.beta, lambda);
        if params.p.is_infinite() {
            acc = avg.iter().fold(acc, |a, &v| a.max(v));
        } else {
            acc += LN_2 * cell * avg.iter().map(|v| v.powf(params.p)).sum::<f64>();
        }
    }
    if params.p.is_infinite() { acc } else { acc.powf(1.0 / params.p) }
}

/// Discrete `Z^{p,q}_β(T)` norm; the field is extended by zero past the horizon.
pub fn z_norm(u: &SpaceTimeField, params: &ZParams) -> f64 {
    outer_norm(u, params, 1.0)
}

/// The change-of-angle functional: spatial balls of radius `λ sqrt t`, still
/// normalized by `|B(x, sqrt t)|`. Equals [`z_norm`] at `λ = 1`.
pub fn z_norm_dilated(u: &SpaceTimeField, params: &ZParams, lambda: f64) -> f64 {
    outer_norm(u, params, lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleReport {
    pub lambdas: Vec<f64>,
    pub ratios: Vec<f64>,
    pub slope: f64,
    /// `n / min(p, q)`.
    pub predicted: f64,
}

/// Log-log slope of the dilated functional against `λ`.
pub fn change_of_angle_probe(u: &SpaceTimeField, params: &ZParams, lambdas: &[f64]) -> Result<AngleReport> {
    if lambdas.iter().any(|&l| !(l >= 1.0)) {
        return Err(Error::InvalidParams("dilations must be >= 1".into()));
    }
    let base = z_norm(u, params);
    if base == 0.0 {
        return Err(Error::InvalidParams("zero field has no angle growth".into()));
    }
    let ratios: Vec<f64> = lambdas.iter().map(|&l| z_norm_dilated(u, params, l) / base).collect();
    let pts: Vec<(f64, f64)> = lambdas.iter().zip(&ratios).map(|(l, r)| (l.ln(), r.ln())).collect();
    let slope = if pts.len() >= 2 { crate::operator::least_squares(&pts).0 } else { 0.0 };
    let n = u.grid().dim() as f64;
    Ok(AngleReport { lambdas: lambdas.to_vec(), ratios, slope, predicted: n / params.p.min(params.q) })
}

/// `τ ↦ ‖u‖_{Z^{∞,q}_β(τ)}`.
pub fn vanishing_profile(u: &SpaceTimeField, q: f64, beta: f64, taus: &[f64]) -> Vec<(f64, f64)> {
    taus.iter()
        .map(|&tau| (tau, z_norm(u, &ZParams { p: f64::INFINITY, q, beta, horizon: tau })))
        .collect()
}

/// `β₁ = β₀ - (n/2)(1/p₀ - 1/p₁)`.
pub fn embedding_target_weight(n: usize, p0: f64, beta0: f64, p1: f64) -> Result<f64> {
    if !(p0 < p1) {
        return Err(Error::InvalidParams(format!("embedding needs p0 < p1, got {p0} >= {p1}")));
    }
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    Ok(beta0 - 0.5 * n as f64 * (inv(p0) - inv(p1)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingReport {
    pub beta1: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Max of `‖u‖_{Z^{p1,q}_{β1}} / ‖u‖_{Z^{p0,q}_{β0}}` over `fields`.
pub fn embedding_probe(fields: &[SpaceTimeField], p0: f64, beta0: f64, p1: f64, q: f64) -> Result<EmbeddingReport> {
    let first = fields.first().ok_or_else(|| Error::InvalidParams("empty ensemble".into()))?;
    let beta1 = embedding_target_weight(first.grid().dim(), p0, beta0, p1)?;
    let src = ZParams::new(p0, q, beta0, f64::INFINITY)?;
    let dst = ZParams::new(p1, q, beta1, f64::INFINITY)?;
    let ratios: Vec<f64> = fields
        .iter()
        .filter_map(|u| {
            let d = z_norm(u, &src);
            (d > 0.0).then(|| z_norm(u, &dst) / d)
        })
        .collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(EmbeddingReport { beta1, ratios, max_ratio })
}

/// Truncated-cylinder average `( ⨏_0^{t_m} ⨏_{B(x, sqrt t_m)} |u|^q )^{1/q}` and
/// the ladder bound `Σ_ℓ 2^{-ℓ/q} ‖u‖_{Z^{∞,q}}` over the rungs below `t_m`.
pub fn local_integrability(u: &SpaceTimeField, x: usize, m: usize, q: f64) -> Result<(f64, f64)> {
    let ladder = u.ladder();
    if m >= ladder.depth() {
        return Err(Error::InvalidIndex(format!("rung {m} beyond ladder depth")));
    }
    let t = ladder.height(m);
    let points = u.grid().ball_points(x, t.sqrt().min(0.5 * u.grid().length()));
    let (mut acc, mut mass) = (0.0, 0.0);
    for (k, s) in ladder.samples().iter().enumerate() {
        if s.time > t {
            continue;
        }
        let slice = u.slice(k);
        for &p in &points {
            acc += s.weight * slice[p].abs().powf(q);
            mass += s.weight;
        }
    }
    let lhs = (acc / mass).powf(1.0 / q);
    let z = z_norm(u, &ZParams { p: f64::INFINITY, q, beta: 0.0, horizon: f64::INFINITY });
    let sum: f64 = (0..=(ladder.depth() - m)).map(|l| 2f64.powf(-(l as f64) / q)).sum();
    Ok((lhs, sum * z))
}

/// Signed wavenumber of FFT index `i` on an axis of `n` points.
pub(crate) fn wavenumber(i: usize, n: usize) -> f64 {
    if i < n / 2 { i as f64 } else { i as f64 - n as f64 }
}

/// Forward FFT of a real grid function (row-major in 2D).
pub(crate) fn fft_forward(grid: &GridSpec, u: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_inplace(grid, &mut data, false);
    data
}

/// Inverse FFT, normalized, real part.
pub(crate) fn fft_inverse_real(grid: &GridSpec, mut data: Vec<Complex64>) -> Vec<f64> {
    fft_inplace(grid, &mut data, true);
    let scale = 1.0 / grid.len() as f64;
    data.into_iter().map(|c| c.re * scale).collect()
}

fn fft_inplace(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = grid.points_per_axis();
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    if grid.dim() == 1 {
        fft.process(data);
        return;
    }
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::zero(); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

/// `|ξ|` for every FFT index of the grid.
pub(crate) fn frequency_magnitudes(grid: &GridSpec) -> Vec<f64> {
    let n = grid.points_per_axis();
    let scale = 2.0 * PI / grid.length();
    (0..grid.len())
        .map(|i| {
            let m = grid.multi_index(i);
            let k0 = wavenumber(m[0], n);
            let k1 = if grid.dim() == 2 { wavenumber(m[1], n) } else { 0.0 };
            scale * (k0 * k0 + k1 * k1).sqrt()
        })
        .collect()
}

fn eta(r: f64) -> f64 {
    if r <= 0.5 || r >= 4.0 {
        0.0
    } else {
        (-1.0 / ((r - 0.5) * (4.0 - r))).exp()
    }
}

/// Dyadic Littlewood-Paley multipliers `χ(2^{-j} |ξ|)` resolvable on a grid.
#[derive(Debug, Clone)]
pub struct LPLadder {
    grid: GridSpec,
    j_min: i32,
    j_max: i32,
    freqs: Vec<f64>,
}

impl LPLadder {
    pub fn new(grid: &GridSpec) -> Self {
        let freqs = frequency_magnitudes(grid);
        let (lo, hi) = freqs
            .iter()
            .filter(|&&f| f > 0.0)
            .fold((f64::INFINITY, 0.0f64), |(a, b), &f| (a.min(f), b.max(f)));
        // χ(2^{-j} ξ) ≠ 0 iff log2 ξ - 2 < j < log2 ξ + 1.
        let j_min = (lo.log2() - 2.0).floor() as i32 + 1;
        let j_max = (hi.log2() + 1.0).ceil() as i32 - 1;
        Self { grid: grid.clone(), j_min, j_max, freqs }
    }

    pub fn range(&self) -> (i32, i32) {
        (self.j_min, self.j_max)
    }

    /// Normalized profile `χ(r) = η(r) / Σ_m η(2^{-m} r)`.
    pub fn chi(r: f64) -> f64 {
        let e = eta(r);
        if e == 0.0 {
            return 0.0;
        }
        let denom: f64 = (-4..=4).map(|m| eta(r * 2f64.powi(-m))).sum();
        e / denom
    }

    pub fn multiplier(&self, j: i32, xi: f64) -> f64 {
        if xi == 0.0 { 0.0 } else { Self::chi(xi * 2f64.powi(-j)) }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }
}

/// `Δ_j u0`.
pub fn lp_project(u0: &[f64], j: i32, ladder: &LPLadder) -> Result<Vec<f64>> {
    let (min, max) = ladder.range();
    if j < min || j > max {
        return Err(Error::IndexOutOfRange { j, min, max });
    }
    Ok(lp_project_hat(&fft_forward(&ladder.grid, u0), j, ladder))
}

fn lp_project_hat(hat: &[Complex64], j: i32, ladder: &LPLadder) -> Vec<f64> {
    let data = hat.iter().zip(&ladder.freqs).map(|(c, &xi)| c * ladder.multiplier(j, xi)).collect();
    fft_inverse_real(&ladder.grid, data)
}

/// `( Σ_j 2^{jαp} ‖Δ_j u0‖_p^p )^{1/p}`; `p = ∞` gives `sup_j 2^{jα} ‖Δ_j u0‖_∞`.
pub fn besov_norm(u0: &[f64], params: &BesovParams, ladder: &LPLadder) -> f64 {
    let hat = fft_forward(&ladder.grid, u0);
    let (min, max) = ladder.range();
    let mut acc = 0.0f64;
    for j in min..=max {
        let piece = lp_project_hat(&hat, j, ladder);
        let norm = crate::operator::lp_norm(&ladder.grid, &piece, params.p);
        let w = 2f64.powf(j as f64 * params.alpha);
        if params.p.is_infinite() {
            acc = acc.max(w * norm);
        } else {
            acc += (w * norm).powf(params.p);
        }
    }
    if params.p.is_infinite() { acc } else { acc.powf(1.0 / params.p) }
}

/// Field with value `f(t)` at every grid point.
pub fn time_profile(grid: &GridSpec, ladder: &Arc<TimeLadder>, f: impl Fn(f64) -> f64) -> SpaceTimeField {
    SpaceTimeField::from_fn(grid, ladder, |t, _| f(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(dim: usize, n: usize) -> (GridSpec, Arc<TimeLadder>) {
        (GridSpec::new(dim, n, 4.0).unwrap(), Arc::new(TimeLadder::new(1.0, 5, 2).unwrap()))
    }

    fn random_field(g: &GridSpec, l: &Arc<TimeLadder>, seed: u64) -> SpaceTimeField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = SpaceTimeField::zeros(g, l);
        u.values_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        u
    }

    #[test]
    fn zero_and_closed_form() {
        let (g, l) = setup(1, 16);
        assert_eq!(weighted_lp_norm(&SpaceTimeField::zeros(&g, &l), 2.0, 0.3, f64::INFINITY), 0.0);
        let ladder = Arc::new(TimeLadder::new(2.0, 6, 1).unwrap());
        let gamma = 0.7;
        let p = 3.0;
        let u = time_profile(&g, &ladder, |t| t.powf(gamma));
        let expected = (g.length() * LN_2 * (0..6).map(|m| (0.75 * ladder.height(m)).powf(gamma * p)).sum::<f64>())
            .powf(1.0 / p);
        let got = weighted_lp_norm(&u, p, 0.0, f64::INFINITY);
        assert!((got - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn weight_shift_identity() {
        let (g, l) = setup(1, 16);
        let u = random_field(&g, &l, 3);
        let shifted = u.map_with_time(|t, v| t.powf(-0.4) * v);
        let a = weighted_lp_norm(&u, 2.5, 0.4, f64::INFINITY);
        let b = weighted_lp_norm(&shifted, 2.5, 0.0, f64::INFINITY);
        assert!((a - b).abs() < 1e-13 * a);
    }

    #[test]
    fn fubini_identity() {
        for dim in [1, 2] {
            let (g, l) = setup(dim, 16);
            let u = random_field(&g, &l, 11);
            for (p, beta) in [(2.0, 0.0), (3.5, -0.3), (1.5, 0.6)] {
                let z = z_norm(&u, &ZParams::new(p, p, beta, f64::INFINITY).unwrap());
                let w = weighted_lp_norm(&u, p, beta, f64::INFINITY);
                assert!((z - w).abs() < 1e-10 * w, "{z} {w}");
            }
        }
    }

    #[test]
    fn power_weight_is_one() {
        let (g, l) = setup(2, 16);
        let u = time_profile(&g, &l, |t| t.powf(0.35));
        let z = z_norm(&u, &ZParams::new(f64::INFINITY, f64::INFINITY, 0.35, f64::INFINITY).unwrap());
        assert!((z - 1.0).abs() < 1e-14);
        let prof = vanishing_profile(&u, 2.0, 0.35, &[0.1, 0.5, 1.0]);
        assert!(prof.iter().all(|(_, v)| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn nesting_in_q() {
        let (g, l) = setup(1, 32);
        for seed in 0..10 {
            let u = random_field(&g, &l, seed);
            let z = |q: f64| z_norm(&u, &ZParams::new(3.0, q, 0.1, f64::INFINITY).unwrap());
            assert!(z(2.0) <= z(4.0) && z(4.0) <= z(f64::INFINITY));
        }
    }

    #[test]
    fn lp_partition_of_unity() {
        for dim in [1, 2] {
            let g = GridSpec::new(dim, 32, 3.0).unwrap();
            let lp = LPLadder::new(&g);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let u: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = u.iter().sum::<f64>() / g.len() as f64;
            let (lo, hi) = lp.range();
            let mut total = vec![0.0; g.len()];
            for j in lo..=hi {
                for (t, v) in total.iter_mut().zip(lp_project(&u, j, &lp).unwrap()) {
                    *t += v;
                }
            }
            for i in 0..g.len() {
                assert!((total[i] - (u[i] - mean)).abs() < 1e-10);
            }
            assert!(lp_project(&vec![2.0; g.len()], lo, &lp).unwrap().iter().all(|v| v.abs() < 1e-14));
            assert!(matches!(lp_project(&u, hi + 1, &lp), Err(Error::IndexOutOfRange { .. })));
        }
    }

    #[test]
    fn single_mode_projection() {
        let g = GridSpec::new(1, 64, 2.0 * PI).unwrap();
        let lp = LPLadder::new(&g);
        let u: Vec<f64> = (0..64).map(|i| g.coords(i)[0].cos()).collect();
        for j in -1..=1 {
            let d = lp_project(&u, j, &lp).unwrap();
            let c = LPLadder::chi(2f64.powi(-j));
            for i in 0..64 {
                assert!((d[i] - c * u[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn besov_dyadic_dilation() {
        let g = GridSpec::new(1, 256, 8.0).unwrap();
        let g2 = g.dilated(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let modes: Vec<(f64, f64)> = (4..=32).map(|k| (k as f64, rng.random_range(-1.0..1.0))).collect();
        let u: Vec<f64> = (0..256)
            .map(|i| modes.iter().map(|(k, a)| a * (2.0 * PI * k * i as f64 / 256.0).cos()).sum())
            .collect();
        for (alpha, p) in [(-0.5, 4.0), (-0.25, 2.0), (-0.7, f64::INFINITY)] {
            let params = BesovParams::new(alpha, p).unwrap();
            let a = besov_norm(&u, &params, &LPLadder::new(&g));
            let b = besov_norm(&u, &params, &LPLadder::new(&g2));
            let inv_p = if p.is_infinite() { 0.0 } else { 1.0 / p };
            assert!((b / a - 2f64.powf(alpha - inv_p)).abs() < 1e-8);
        }
        assert!(BesovParams::new(0.5, 2.0).is_err());
    }

    #[test]
    fn angle_identity_at_one() {
        let (g, l) = setup(1, 32);
        let u = random_field(&g, &l, 9);
        let r = change_of_angle_probe(&u, &ZParams::new(2.0, 2.0, 0.0, f64::INFINITY).unwrap(), &[1.0, 2.0, 4.0, 8.0])
            .unwrap();
        assert!((r.ratios[0] - 1.0).abs() < 1e-12);
        assert!(r.slope <= r.predicted + 0.1, "{r:?}");
    }

    #[test]
    fn embedding_weight() {
        assert!((embedding_target_weight(1, 2.0, 0.5, 4.0).unwrap() - 0.375).abs() < 1e-15);
        assert!(embedding_target_weight(1, 4.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn embedding_on_rung_indicator() {
        // A spatially constant field on one rung: both norms in closed form.
        let (g, l) = setup(1, 32);
        let m = 2;
        let range = l.rung_range(m);
        let u = SpaceTimeField::from_fn(&g, &l, |t, _| {
            if t > 0.5 * l.height(m) && t <= l.height(m) { 1.0 } else { 0.0 }
        });
        let q = 2.0;
        let closed = |p: f64, beta: f64| {
            let avg: f64 = range
                .clone()
                .map(|k| {
                    let s = l.samples()[k];
                    s.weight / (0.5 * l.height(m)) * s.time.powf(-beta * q)
                })
                .sum();
            (g.length() * LN_2).powf(1.0 / p) * avg.powf(1.0 / q)
        };
        let rep = embedding_probe(std::slice::from_ref(&u), 2.0, 0.5, 4.0, q).unwrap();
        let expected = closed(4.0, 0.375) / closed(2.0, 0.5);
        assert!((rep.max_ratio - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn local_integrability_bound() {
        let (g, l) = setup(1, 32);
        for seed in 0..5 {
            let u = random_field(&g, &l, seed);
            for q in [2.0, 4.0] {
                let (lhs, rhs) = local_integrability(&u, 3, 1, q).unwrap();
                assert!(lhs <= 2.0 * rhs);
            }
        }
    }
}
