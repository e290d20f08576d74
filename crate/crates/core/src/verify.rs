//! Weak-form residuals, initial traces and reverse Hölder constants of
//! computed solutions.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{self, mollifier, mollifier_prime};
use crate::error::{Error, Result};
use crate::exponents::{to_f64, two_lower_star, two_star, RHParams};
use crate::geometry::{box_power_sum, GridSpec, ParabolicBox, SpaceTimeField, TimeLadder, VectorField};
use crate::operator::{gradient, least_squares, DiscreteOperator};

/// `φ(t, x) = m(s(t)) ∏ m(|x_i - c_i| / r) / m(0)^{n+1}` with the mollifier `m`
/// and `s` mapping `(t_lo, t_hi)` onto `(-1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    pub center: [f64; 2],
    pub radius: f64,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl TestFunction {
    fn s(&self, t: f64) -> f64 {
        (2.0 * t - self.t_lo - self.t_hi) / (self.t_hi - self.t_lo)
    }

    pub fn time_value(&self, t: f64) -> f64 {
        mollifier(self.s(t)) / mollifier(0.0)
    }

    pub fn time_derivative(&self, t: f64) -> f64 {
        mollifier_prime(self.s(t)) * 2.0 / (self.t_hi - self.t_lo) / mollifier(0.0)
    }

    fn offset(&self, grid: &GridSpec, x: &[f64], i: usize) -> f64 {
        let l = grid.length();
        let d = (x[i] - self.center[i]).rem_euclid(l);
        (if d > 0.5 * l { d - l } else { d }) / self.radius
    }

    pub fn space_value(&self, grid: &GridSpec, x: &[f64]) -> f64 {
        (0..grid.dim())
            .map(|i| mollifier(self.offset(grid, x, i)) / mollifier(0.0))
            .product()
    }

    /// Analytic spatial gradient.
    pub fn space_gradient(&self, grid: &GridSpec, x: &[f64]) -> Vec<f64> {
        let d: Vec<f64> = (0..grid.dim()).map(|i| self.offset(grid, x, i)).collect();
        (0..grid.dim())
            .map(|i| {
                (0..grid.dim())
                    .map(|j| if i == j { mollifier_prime(d[j]) / self.radius } else { mollifier(d[j]) })
                    .product::<f64>()
                    / mollifier(0.0).powi(grid.dim() as i32)
            })
            .collect()
    }

    pub fn space_samples(&self, grid: &GridSpec) -> Vec<f64> {
        (0..grid.len()).map(|i| self.space_value(grid, &grid.coords(i))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunctionBank {
    pub functions: Vec<TestFunction>,
}

impl TestFunctionBank {
    /// Checks supports against the slab and the torus.
    pub fn new(grid: &GridSpec, ladder: &TimeLadder, functions: Vec<TestFunction>) -> Result<Self> {
        for (i, f) in functions.iter().enumerate() {
            if !(f.t_lo > 0.0 && f.t_lo < f.t_hi && f.t_hi < ladder.horizon()) {
                return Err(Error::InvalidTestFunction(format!(
                    "test function {i}: time support ({}, {}) not inside (0, {})",
                    f.t_lo,
                    f.t_hi,
                    ladder.horizon()
                )));
            }
            if !(f.radius > 0.0 && f.radius < 0.5 * grid.length()) {
                return Err(Error::InvalidTestFunction(format!("test function {i}: radius {} does not fit the torus", f.radius)));
            }
            let inside = ladder.samples().iter().filter(|s| s.time > f.t_lo && s.time < f.t_hi).count();
            if inside < 4 {
                return Err(Error::InvalidTestFunction(format!("test function {i}: only {inside} time samples in support")));
            }
        }
        Ok(Self { functions })
    }

    /// Time supports are Whitney intervals `(t_m/2, t_m)` of rungs `1..depth`
    /// (the top rung touches `T`); radii `√t_m`, at least three cells.
    pub fn random(grid: &GridSpec, ladder: &TimeLadder, count: usize, seed: u64) -> Result<Self> {
        if ladder.depth() < 2 {
            return Err(Error::InvalidTestFunction("need at least two rungs".into()));
        }
        let mut rng = ensemble::rng(seed);
        let functions = (0..count)
            .map(|_| {
                let m = rng.random_range(1..ladder.depth());
                let t = ladder.height(m);
                TestFunction {
                    center: [rng.random_range(0.0..grid.length()), if grid.dim() == 2 { rng.random_range(0.0..grid.length()) } else { 0.0 }],
                    radius: t.sqrt().max(3.0 * grid.spacing()).min(0.45 * grid.length()),
                    t_lo: 0.5 * t,
                    t_hi: t,
                }
            })
            .collect();
        Self::new(grid, ladder, functions)
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualRow {
    pub test_id: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakResidualReport {
    pub rows: Vec<ResidualRow>,
    pub max: f64,
}

/// Residual of `∫∫ -u ∂tφ + A∇u·∇φ - fφ + F·∇φ` for `∂t u + Lu = f + div F`,
/// relative to the sum of the absolute values of the four terms.
pub fn weak_residual(
    op: &DiscreteOperator,
    u: &SpaceTimeField,
    f: Option<&SpaceTimeField>,
    big_f: Option<&VectorField>,
    bank: &TestFunctionBank,
) -> Result<WeakResidualReport> {
    let grid = op.grid();
    if u.grid() != grid {
        return Err(Error::ShapeError("solution and operator live on different grids".into()));
    }
    if let Some(f) = f {
        u.check_compatible(f)?;
    }
    if let Some(big_f) = big_f {
        if big_f.grid() != grid || big_f.ladder() != u.ladder() {
            return Err(Error::ShapeError("vector source does not match the solution".into()));
        }
    }
    let ladder = u.ladder().clone();
    TestFunctionBank::new(grid, &ladder, bank.functions.clone())?;
    let lu: Vec<Vec<f64>> = (0..ladder.len()).into_par_iter().map(|k| op.apply(u.slice(k))).collect();
    let h = grid.cell_volume();
    let rows = bank
        .functions
        .par_iter()
        .enumerate()
        .map(|(id, tf)| {
            let psi = tf.space_samples(grid);
            let dpsi = gradient(grid, &psi);
            let mut terms = [0.0f64; 4];
            for (k, s) in ladder.samples().iter().enumerate() {
                if !(s.time > tf.t_lo && s.time < tf.t_hi) {
                    continue;
                }
                let (a, da) = (tf.time_value(s.time), tf.time_derivative(s.time));
                let w = s.weight * h;
                let uk = u.slice(k);
                for i in 0..grid.len() {
                    terms[0] -= w * da * uk[i] * psi[i];
                    terms[1] += w * a * lu[k][i] * psi[i];
                }
                if let Some(f) = f {
                    let fk = f.slice(k);
                    terms[2] -= w * a * (0..grid.len()).map(|i| fk[i] * psi[i]).sum::<f64>();
                }
                if let Some(big_f) = big_f {
                    for (c, g) in big_f.components.iter().zip(&dpsi) {
                        let ck = c.slice(k);
                        terms[3] += w * a * (0..grid.len()).map(|i| ck[i] * g[i]).sum::<f64>();
                    }
                }
            }
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            let total: f64 = terms.iter().sum();
            ResidualRow { test_id: id, residual: if scale > 0.0 { total.abs() / scale } else { 0.0 } }
        })
        .collect::<Vec<_>>();
    let max = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(WeakResidualReport { rows, max })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    /// Sample times actually used (nearest ladder samples).
    pub times: Vec<f64>,
    /// `max_φ |⟨u(t) - u0, φ⟩|` per time.
    pub pairings: Vec<f64>,
    /// Log-log slope of the pairings in `t`; `None` if they vanish.
    pub rate: Option<f64>,
}

/// Pairings of `u(t) - u0` with the spatial parts of the bank.
pub fn initial_trace_error(u: &SpaceTimeField, u0: &[f64], bank: &TestFunctionBank, times: &[f64]) -> Result<TraceReport> {
    let grid = u.grid();
    if u0.len() != grid.len() {
        return Err(Error::ShapeError("initial datum does not match the grid".into()));
    }
    let samples = u.ladder().samples();
    let psis: Vec<Vec<f64>> = bank.functions.iter().map(|f| f.space_samples(grid)).collect();
    let mut used = Vec::new();
    let mut pairings = Vec::new();
    for &t in times {
        let k = (0..samples.len())
            .min_by(|&a, &b| (samples[a].time - t).abs().total_cmp(&(samples[b].time - t).abs()))
            .ok_or(Error::EmptyBox)?;
        let slice = u.slice(k);
        let worst = psis
            .iter()
            .map(|psi| (0..grid.len()).map(|i| (slice[i] - u0[i]) * psi[i]).sum::<f64>().abs() * grid.cell_volume())
            .fold(0.0, f64::max);
        used.push(samples[k].time);
        pairings.push(worst);
    }
    let pts: Vec<(f64, f64)> = used.iter().zip(&pairings).filter(|(_, p)| **p > 0.0).map(|(t, p)| (t.ln(), p.ln())).collect();
    let rate = (pts.len() >= 2).then(|| least_squares(&pts).0);
    Ok(TraceReport { times: used, pairings, rate })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhRow {
    pub box_id: usize,
    pub t: f64,
    pub lhs: f64,
    pub rhs1: f64,
    pub rhs2: f64,
    pub ratio: f64,
    pub theta: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RHReport {
    pub rows: Vec<RhRow>,
    /// Max ratio over boxes.
    pub constant: f64,
    pub boxes: usize,
    /// Boxes where both sides vanish.
    pub trivial_boxes: usize,
    pub dilation: f64,
    pub params: Option<RHParams>,
}

fn weighted_average(u: &SpaceTimeField, b: &ParabolicBox, q: f64, rho: f64) -> Result<f64> {
    let (acc, mass) = box_power_sum(u, b, q, |s| s.powf(1.0 / rho))?;
    Ok((acc / mass).powf(1.0 / q))
}

fn check_box(grid: &GridSpec, horizon: f64, w: &ParabolicBox, big: &ParabolicBox, id: usize) -> Result<()> {
    if !big.inside_slab(horizon) || !big.contains_box(w, grid) {
        return Err(Error::InvalidBox(format!(
            "box {id}: dilation ({}, {}] escapes the slab (0, {horizon}]",
            big.t_lo, big.t_hi
        )));
    }
    Ok(())
}

fn report(rows: Vec<RhRow>, dilation: f64, params: Option<RHParams>) -> RHReport {
    let constant = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let trivial_boxes = rows.iter().filter(|r| r.lhs == 0.0 && r.rhs1 + r.rhs2 == 0.0).count();
    RHReport { boxes: rows.len(), rows, constant, trivial_boxes, dilation, params }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 { 0.0 } else { lhs / rhs }
}

/// Plain RH inequality with `v = s^{1/ρ}|u|` on `B' = (λ/2)W` for each
/// Whitney box `W`, so that `2B' = λW`.
pub fn rh_check(u: &SpaceTimeField, rho: f64, boxes: &[ParabolicBox], dilation: f64) -> Result<RHReport> {
    if !(rho > 0.0 && dilation > 1.0) {
        return Err(Error::InvalidParams("need rho > 0 and dilation > 1".into()));
    }
    let grid = u.grid();
    let n = grid.dim() as u32;
    let upper = to_f64(&two_star(n));
    let lower = to_f64(&two_lower_star(n));
    let horizon = u.ladder().horizon();
    let rows = boxes
        .par_iter()
        .enumerate()
        .map(|(id, w)| {
            let small = w.dilate(grid, 0.5 * dilation);
            let big = w.dilate(grid, dilation);
            check_box(grid, horizon, w, &big, id)?;
            let lhs = weighted_average(u, &small, upper, rho)?;
            let rhs1 = weighted_average(u, &big, 1.0, rho)?;
            let rhs2 = weighted_average(u, &big, lower * (1.0 + rho), rho)?.powf(1.0 + rho);
            Ok(RhRow { box_id: id, t: w.t_hi, lhs, rhs1, rhs2, ratio: ratio(lhs, rhs1 + rhs2), theta: f64::NAN, q: f64::NAN })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(rows, dilation, None))
}

/// Improved RH inequality: `(⨏_W v^{2*})^{1/2*}` against `a^θ + a` with
/// `a = (⨏_{λW} v^q)^{1/q}`.
pub fn rh_improved_check(u: &SpaceTimeField, rh: &RHParams, boxes: &[ParabolicBox]) -> Result<RHReport> {
    rh.validate()?;
    let grid = u.grid();
    if grid.dim() != rh.n as usize {
        return Err(Error::InvalidParams(format!("exponents for n = {} on a grid of dimension {}", rh.n, grid.dim())));
    }
    let (rho, q, theta) = (to_f64(&rh.rho), to_f64(&rh.q), rh.theta_f64());
    let upper = to_f64(&two_star(rh.n));
    let horizon = u.ladder().horizon();
    let rows = boxes
        .par_iter()
        .enumerate()
        .map(|(id, w)| {
            let big = w.dilate(grid, rh.dilation);
            check_box(grid, horizon, w, &big, id)?;
            let lhs = weighted_average(u, w, upper, rho)?;
            let a = weighted_average(u, &big, q, rho)?;
            let (rhs1, rhs2) = (a.powf(theta), a);
            Ok(RhRow { box_id: id, t: w.t_hi, lhs, rhs1, rhs2, ratio: ratio(lhs, rhs1 + rhs2), theta, q })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(rows, rh.dilation, Some(rh.clone())))
}

/// Whitney boxes at `count` random points and heights whose `λ`-dilations
/// stay inside the slab.
pub fn admissible_whitney_boxes(grid: &GridSpec, ladder: &TimeLadder, dilation: f64, count: usize, seed: u64) -> Result<Vec<ParabolicBox>> {
    // λW spans 3t/4 ± λ²t/4
    let l2 = dilation * dilation;
    if l2 >= 3.0 {
        return Err(Error::InvalidParams(format!("dilation {dilation} leaves the slab for every Whitney box")));
    }
    let t_max = ladder.horizon() / (0.75 + 0.25 * l2);
    let t_min = ladder.height(ladder.depth().saturating_sub(2).max(1)).min(0.5 * t_max);
    let mut rng = ensemble::rng(seed);
    (0..count)
        .map(|_| {
            let t = 2f64.powf(rng.random_range(t_min.log2()..=t_max.log2()));
            crate::geometry::whitney_box(grid, rng.random_range(0..grid.len()), t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientField;
    use crate::duhamel::{duhamel_div, duhamel_source};
    use crate::ensemble::BandLimited;
    use crate::operator::assemble_operator;
    use crate::solver::{free_evolution, ode_solution, picard_solve, NonlinearitySpec, PicardOptions, apply_nonlinearity};
    use std::sync::Arc;

    fn identity(dim: usize, n: usize, l: f64) -> DiscreteOperator {
        let g = GridSpec::new(dim, n, l).unwrap();
        assemble_operator(&CoefficientField::identity(&g), &g).unwrap()
    }

    #[test]
    fn derivatives_match_differences() {
        let g = GridSpec::new(2, 16, 4.0).unwrap();
        let tf = TestFunction { center: [1.0, 3.5], radius: 1.2, t_lo: 0.2, t_hi: 0.6 };
        let (t, e) = (0.33, 1e-6);
        let fd = (tf.time_value(t + e) - tf.time_value(t - e)) / (2.0 * e);
        assert!((fd - tf.time_derivative(t)).abs() < 1e-8);
        let x = [1.3, 3.1];
        let grad = tf.space_gradient(&g, &x);
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += e;
            xm[i] -= e;
            let fd = (tf.space_value(&g, &xp) - tf.space_value(&g, &xm)) / (2.0 * e);
            assert!((fd - grad[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn support_must_fit() {
        let g = GridSpec::new(1, 16, 4.0).unwrap();
        let ladder = TimeLadder::new(1.0, 4, 8).unwrap();
        let bad = TestFunction { center: [0.0; 2], radius: 1.0, t_lo: 0.5, t_hi: 1.2 };
        assert!(matches!(TestFunctionBank::new(&g, &ladder, vec![bad]), Err(Error::InvalidTestFunction(_))));
    }

    #[test]
    fn residuals_of_computed_solutions() {
        let op = identity(1, 64, 8.0);
        let g = op.grid().clone();
        let ladder = Arc::new(TimeLadder::new(1.0, 6, 64).unwrap());
        let bank = TestFunctionBank::random(&g, &ladder, 20, 3).unwrap();
        let zero = SpaceTimeField::zeros(&g, &ladder);
        assert_eq!(weak_residual(&op, &zero, None, None, &bank).unwrap().max, 0.0);

        let d = BandLimited::random(1, 8.0, 1, 3, 3, 2).sample(&g);
        let free = free_evolution(&op, &d, &ladder).unwrap();
        let r = weak_residual(&op, &free, None, None, &bank).unwrap();
        assert!(r.max < 1e-4, "free {}", r.max);

        let spec = NonlinearitySpec::power(3.0, 1.0).unwrap();
        let short = Arc::new(TimeLadder::new(1.0 / 6.0, 6, 64).unwrap());
        let bank = TestFunctionBank::random(&g, &short, 20, 4).unwrap();
        let sol = picard_solve(&op, &vec![1.0; 64], &short, &spec, &PicardOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let f = apply_nonlinearity(&spec, &sol.u).unwrap();
        let r = weak_residual(&op, &sol.u, Some(&f), None, &bank).unwrap();
        assert!(r.max < 1e-4, "ode {}", r.max);
        let k = short.len() - 1;
        assert!((sol.u.slice(k)[0] / ode_solution(1.0, 3.0, 1.0, short.samples()[k].time) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn divergence_source_residual() {
        let op = identity(1, 64, 8.0);
        let g = op.grid().clone();
        let ladder = Arc::new(TimeLadder::new(1.0, 6, 64).unwrap());
        let bank = TestFunctionBank::random(&g, &ladder, 20, 5).unwrap();
        let d = BandLimited::random(1, 8.0, 1, 3, 3, 6);
        let big_f = VectorField::new(vec![SpaceTimeField::from_fn(&g, &ladder, |t, x| (1.0 + t) * d.eval(x))]).unwrap();
        let f = SpaceTimeField::from_fn(&g, &ladder, |t, x| t.sin() * d.eval(&[x[0] + 1.0]));
        let u = duhamel_div(&op, &big_f).unwrap().add(&duhamel_source(&op, &f).unwrap()).unwrap();
        let r = weak_residual(&op, &u, Some(&f), Some(&big_f), &bank).unwrap();
        assert!(r.max < 1e-4, "{}", r.max);
    }

    #[test]
    fn trace_rates() {
        let op = identity(1, 64, 8.0);
        let g = op.grid().clone();
        let ladder = Arc::new(TimeLadder::new(1.0, 12, 8).unwrap());
        let bank = TestFunctionBank::random(&g, &ladder, 10, 1).unwrap();
        let times: Vec<f64> = (4..12).map(|m| ladder.height(m)).collect();
        let ones = SpaceTimeField::from_fn(&g, &ladder, |_, _| 1.0);
        let r = initial_trace_error(&ones, &vec![1.0; 64], &bank, &times).unwrap();
        assert!(r.pairings.iter().all(|&p| p == 0.0) && r.rate.is_none());

        let d = BandLimited::random(1, 8.0, 1, 3, 3, 2).sample(&g);
        let free = free_evolution(&op, &d, &ladder).unwrap();
        let r = initial_trace_error(&free, &d, &bank, &times).unwrap();
        assert!(r.rate.unwrap() >= 0.95, "{r:?}");

        let f = SpaceTimeField::from_fn(&g, &ladder, |_, x| (x[0]).cos());
        let duh = duhamel_source(&op, &f).unwrap();
        let r = initial_trace_error(&duh, &vec![0.0; 64], &bank, &times).unwrap();
        assert!(r.rate.unwrap() >= 0.95, "{r:?}");
    }

    #[test]
    fn rh_on_constant_solution() {
        let op = identity(1, 64, 8.0);
        let g = op.grid().clone();
        let ladder = Arc::new(TimeLadder::new(0.5 / 3.0, 6, 16).unwrap());
        let boxes = admissible_whitney_boxes(&g, &ladder, 1.5, 10, 1).unwrap();
        let zero = SpaceTimeField::zeros(&g, &ladder);
        let rep = rh_check(&zero, 3.0, &boxes, 1.5).unwrap();
        assert_eq!((rep.constant, rep.trivial_boxes), (0.0, 10));

        let spec = NonlinearitySpec::power(3.0, 1.0).unwrap();
        let sol = picard_solve(&op, &vec![1.0; 64], &ladder, &spec, &PicardOptions { tol: 1e-12, ..Default::default() }).unwrap();
        let rep = rh_check(&sol.u, 3.0, &boxes, 1.5).unwrap();
        assert!(rep.constant.is_finite() && rep.constant > 0.0 && rep.constant < 10.0, "{}", rep.constant);

        let rh = crate::exponents::rh_exponents(1, crate::exponents::rat(3, 1), crate::exponents::rat(23, 5), 1.5).unwrap();
        let rep = rh_improved_check(&sol.u, &rh, &boxes).unwrap();
        assert!(rep.constant.is_finite() && rep.constant > 0.0);
    }

    #[test]
    fn boxes_outside_the_slab_are_rejected() {
        let g = GridSpec::new(1, 32, 8.0).unwrap();
        let ladder = Arc::new(TimeLadder::new(1.0, 4, 8).unwrap());
        let u = SpaceTimeField::zeros(&g, &ladder);
        let w = crate::geometry::whitney_box(&g, 0, 0.95).unwrap();
        assert!(matches!(rh_check(&u, 2.0, &[w], 1.5), Err(Error::InvalidBox(_))));
    }
}
