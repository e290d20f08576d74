//! Discretization of the parabolic half-space.
//!
//! Space is a periodic torus `[0, L)^n` (n = 1 or 2) sampled at `N` points
//! per axis; grid point `i` sits at the cell center `i * h`. Time is a dyadic
//! ladder below the horizon `T`: rung `m` covers `(T 2^{-m-1}, T 2^{-m}]`, which
//! is exactly the time interval of a Whitney box of height `t_m = T 2^{-m}`.
//! A bottom interval `(0, t_M]` closes the gap to the initial time so that
//! time stepping can start at zero; it carries samples but is not a rung.

use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MEMBERSHIP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    points: usize,
    length: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, length: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} not supported; use 1 or 2"
            )));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("domain length {length} must be positive")));
        }
        Ok(Self { dim, points, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Total number of grid points, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lebesgue measure of one grid cell, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Torus volume `L^n`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.points, idx % self.points]
        }
    }

    pub fn flat_index(&self, m: [usize; 2]) -> usize {
        if self.dim == 1 {
            m[0] % self.points
        } else {
            (m[0] % self.points) * self.points + (m[1] % self.points)
        }
    }

    /// Coordinates of grid point `idx`; unused axes are zero.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        let m = self.multi_index(idx);
        [m[0] as f64 * h, m[1] as f64 * h]
    }

    /// Periodic neighbor of `idx` shifted by `step` along `axis`.
    pub fn neighbor(&self, idx: usize, axis: usize, step: isize) -> usize {
        let n = self.points as isize;
        let mut m = self.multi_index(idx);
        m[axis] = (m[axis] as isize + step).rem_euclid(n) as usize;
        self.flat_index(m)
    }

    /// Minimal periodic separation of two coordinates on one axis.
    pub fn torus_delta(&self, a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(self.length);
        d.min(self.length - d)
    }

    pub fn torus_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.dim)
            .map(|d| self.torus_delta(x[d], y[d]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn point_distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords(i), self.coords(j));
        self.torus_distance(&a[..self.dim], &b[..self.dim])
    }

    /// Same torus, twice the points per axis.
    pub fn refined(&self) -> Self {
        Self { points: self.points * 2, ..self.clone() }
    }

    /// Torus shrunk by `factor` with the same number of points. Samples of
    /// `u0` on `self` are samples of `u0(factor ·)` on the returned grid.
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidGrid(format!("dilation factor {factor} must be positive")));
        }
        Self::new(self.dim, self.points, self.length / factor)
    }

    /// Offsets (along axis 0, then an interval along axis 1) of all grid
    /// points within closed distance `radius` of a center. Every torus point
    /// appears at most once.
    pub(crate) fn ball_stencil(&self, radius: f64) -> BallStencil {
        let h = self.spacing();
        let half = (self.points / 2) as isize;
        let reach = |r: f64| -> (isize, isize) {
            let hw = if r < 0.0 { -1 } else { ((r / h) * (1.0 + MEMBERSHIP_SLACK) + MEMBERSHIP_SLACK).floor() as isize };
            (-(hw.min(half)), hw.min(half - 1))
        };
        let (lo0, hi0) = reach(radius);
        let mut rows = Vec::new();
        if self.dim == 1 {
            if hi0 >= lo0 {
                rows.push((0, lo0, hi0));
            }
        } else {
            for d0 in lo0..=hi0 {
                let dx = (d0.unsigned_abs() as f64) * h;
                let rem = radius * radius * (1.0 + 2.0 * MEMBERSHIP_SLACK) - dx * dx;
                if rem < 0.0 {
                    continue;
                }
                let (lo1, hi1) = reach(rem.sqrt());
                if hi1 >= lo1 {
                    rows.push((d0, lo1, hi1));
                }
            }
        }
        BallStencil { rows }
    }

    /// Indices of grid points within closed torus distance `radius` of `center`.
    pub fn ball_points(&self, center: usize, radius: f64) -> Vec<usize> {
        let stencil = self.ball_stencil(radius);
        let c = self.multi_index(center);
        let n = self.points as isize;
        let mut out = Vec::with_capacity(stencil.count());
        for &(d0, lo, hi) in &stencil.rows {
            for d1 in lo..=hi {
                let m = if self.dim == 1 {
                    [(c[0] as isize + d1).rem_euclid(n) as usize, 0]
                } else {
                    [
                        (c[0] as isize + d0).rem_euclid(n) as usize,
                        (c[1] as isize + d1).rem_euclid(n) as usize,
                    ]
                };
                out.push(self.flat_index(m));
            }
        }
        out
    }
}

/// Row decomposition of a discrete ball: `(offset along axis 0, lo, hi)` where
/// `[lo, hi]` is the offset interval along the contiguous axis. In 1D the single
/// row's interval runs along axis 0.
#[derive(Debug, Clone)]
pub(crate) struct BallStencil {
    rows: Vec<(isize, isize, isize)>,
}

impl BallStencil {
    pub(crate) fn count(&self) -> usize {
        self.rows.iter().map(|&(_, lo, hi)| (hi - lo + 1) as usize).sum()
    }
}

/// Sum of `values` over the ball around every grid point, via circular
/// prefix sums along the contiguous axis.
pub(crate) fn ball_sums(grid: &GridSpec, values: &[f64], radius: f64) -> Vec<f64> {
    let stencil = grid.ball_stencil(radius);
    let n = grid.points_per_axis();
    let rows = if grid.dim() == 1 { 1 } else { n };
    // prefix[r][k] = sum of row r entries 0..k
    let mut prefix = vec![0.0; rows * (n + 1)];
    for r in 0..rows {
        let row = &values[r * n..(r + 1) * n];
        let p = &mut prefix[r * (n + 1)..(r + 1) * (n + 1)];
        for k in 0..n {
            p[k + 1] = p[k] + row[k];
        }
    }
    let range_sum = |r: usize, start: isize, len: usize| -> f64 {
        let p = &prefix[r * (n + 1)..(r + 1) * (n + 1)];
        let s = start.rem_euclid(n as isize) as usize;
        if s + len <= n {
            p[s + len] - p[s]
        } else {
            (p[n] - p[s]) + p[s + len - n]
        }
    };
    let mut out = vec![0.0; grid.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let c = grid.multi_index(idx);
        let mut acc = 0.0;
        for &(d0, lo, hi) in &stencil.rows {
            let len = (hi - lo + 1) as usize;
            if grid.dim() == 1 {
                acc += range_sum(0, c[0] as isize + lo, len);
            } else {
                let r = (c[0] as isize + d0).rem_euclid(n as isize) as usize;
                acc += range_sum(r, c[1] as isize + lo, len);
            }
        }
        *slot = acc;
    }
    out
}

/// Maximum of `values` over the ball around every grid point.
pub(crate) fn ball_maxima(grid: &GridSpec, values: &[f64], radius: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| {
            grid.ball_points(idx, radius)
                .into_iter()
                .map(|j| values[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSample {
    /// Midpoint of the sample's time cell.
    pub time: f64,
    /// Length of the time cell.
    pub weight: f64,
    /// Dyadic rung containing the sample; `None` for the bottom interval.
    pub rung: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeLadder {
    horizon: f64,
    depth: usize,
    per_rung: usize,
    nodes: Vec<f64>,
    samples: Vec<TimeSample>,
    rung_start: Vec<usize>,
}

impl TimeLadder {
    pub fn new(horizon: f64, depth: usize, per_rung: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidLadder(format!("horizon {horizon} must be positive")));
        }
        if depth == 0 || per_rung == 0 {
            return Err(Error::InvalidLadder("depth and samples per rung must be >= 1".into()));
        }
        let height = |m: usize| horizon * 0.5f64.powi(m as i32);
        let mut nodes = vec![0.0];
        let mut samples = Vec::with_capacity((depth + 1) * per_rung);
        let bottom = height(depth);
        for k in 0..per_rung {
            let a = bottom * k as f64 / per_rung as f64;
            let b = bottom * (k + 1) as f64 / per_rung as f64;
            nodes.push(b);
            samples.push(TimeSample { time: 0.5 * (a + b), weight: b - a, rung: None });
        }
        let mut rung_start = vec![0; depth];
        for m in (0..depth).rev() {
            rung_start[m] = samples.len();
            let top = height(m);
            let lo = 0.5 * top;
            let dt = lo / per_rung as f64;
            for k in 0..per_rung {
                let a = lo + dt * k as f64;
                let b = if k + 1 == per_rung { top } else { lo + dt * (k + 1) as f64 };
                nodes.push(b);
                samples.push(TimeSample { time: 0.5 * (a + b), weight: b - a, rung: Some(m) });
            }
        }
        Ok(Self { horizon, depth, per_rung, nodes, samples, rung_start })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn per_rung(&self) -> usize {
        self.per_rung
    }

    /// `t_m = T 2^{-m}` for `m = 0..=depth`.
    pub fn heights(&self) -> Vec<f64> {
        (0..=self.depth).map(|m| self.height(m)).collect()
    }

    pub fn height(&self, m: usize) -> f64 {
        self.horizon * 0.5f64.powi(m as i32)
    }

    pub fn samples(&self) -> &[TimeSample] {
        &self.samples
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample indices of rung `m`.
    pub fn rung_range(&self, m: usize) -> Range<usize> {
        let s = self.rung_start[m];
        s..s + self.per_rung
    }

    /// Same ladder with every time multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.horizon * factor, self.depth, self.per_rung)
    }

    /// Same ladder with `factor` times as many samples per rung.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.horizon, self.depth, self.per_rung * factor)
    }
}

/// A parabolic box `(t_lo, t_hi] x B(center, radius)` on the torus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParabolicBox {
    pub center: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Spatial radius after clipping to the half period.
    pub radius: f64,
    /// Metric radius before clipping.
    pub scale: f64,
}

impl ParabolicBox {
    /// Ball of the dilated parabolic distance `max(2 sqrt|t-s|, |x-y|)`.
    pub fn metric_ball(grid: &GridSpec, center: usize, t_center: f64, radius: f64) -> Self {
        let half = 0.25 * radius * radius;
        Self {
            center,
            t_lo: t_center - half,
            t_hi: t_center + half,
            radius: radius.min(0.5 * grid.length()),
            scale: radius,
        }
    }

    pub fn height(&self) -> f64 {
        self.t_hi
    }

    pub fn time_center(&self) -> f64 {
        0.5 * (self.t_lo + self.t_hi)
    }

    /// `λ·B`: the concentric parabolic ball with radius scaled by `lambda`.
    pub fn dilate(&self, grid: &GridSpec, lambda: f64) -> Self {
        Self::metric_ball(grid, self.center, self.time_center(), lambda * self.scale)
    }

    pub fn inside_slab(&self, horizon: f64) -> bool {
        self.t_lo > 0.0 && self.t_hi <= horizon * (1.0 + MEMBERSHIP_SLACK)
    }

    pub fn contains_box(&self, other: &ParabolicBox, grid: &GridSpec) -> bool {
        let slack = MEMBERSHIP_SLACK * self.t_hi.abs().max(1.0);
        other.t_lo >= self.t_lo - slack
            && other.t_hi <= self.t_hi + slack
            && grid.point_distance(self.center, other.center) + other.radius
                <= self.radius * (1.0 + MEMBERSHIP_SLACK) + MEMBERSHIP_SLACK
    }
}

/// The Whitney box `(t/2, t] x B(x, sqrt t)`, radius clipped to `L/2`.
pub fn whitney_box(grid: &GridSpec, x: usize, t: f64) -> Result<ParabolicBox> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidHeight(t));
    }
    if x >= grid.len() {
        return Err(Error::InvalidIndex(format!("grid point {x} out of range")));
    }
    Ok(ParabolicBox {
        center: x,
        t_lo: 0.5 * t,
        t_hi: t,
        radius: t.sqrt().min(0.5 * grid.length()),
        scale: t.sqrt(),
    })
}

/// A set of grid points together with the radii that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialRegion {
    pub points: Vec<usize>,
    pub inner: Option<f64>,
    pub outer: f64,
}

/// Parabolic annulus `C_j(x, t)`: the ball of radius `2 sqrt t` for `j = 1`,
/// and `B(x, sqrt(2^{j+1} t)) \ B(x, sqrt(2^j t))` for `j >= 2`.
pub fn parabolic_annulus(grid: &GridSpec, x: usize, t: f64, j: u32) -> Result<SpatialRegion> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidHeight(t));
    }
    if j == 0 {
        return Err(Error::InvalidIndex("annulus index must be >= 1".into()));
    }
    let outer = (2f64.powi(j as i32 + 1) * t).sqrt();
    let inner = (j >= 2).then(|| (2f64.powi(j as i32) * t).sqrt());
    let mut points = grid.ball_points(x, outer);
    if let Some(r) = inner {
        let excluded: std::collections::HashSet<usize> = grid.ball_points(x, r).into_iter().collect();
        points.retain(|p| !excluded.contains(p));
    }
    points.sort_unstable();
    Ok(SpatialRegion { points, inner, outer })
}

/// Dilated parabolic distance `max(2 sqrt|t - s|, |x - y|_torus)`.
pub fn parabolic_distance(grid: &GridSpec, p1: (f64, &[f64]), p2: (f64, &[f64])) -> f64 {
    let temporal = 2.0 * (p1.0 - p2.0).abs().sqrt();
    temporal.max(grid.torus_distance(p1.1, p2.1))
}

/// Scalar samples on (time sample, grid point), row-major in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: GridSpec,
    ladder: Arc<TimeLadder>,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: &GridSpec, ladder: &Arc<TimeLadder>) -> Self {
        Self {
            grid: grid.clone(),
            ladder: Arc::clone(ladder),
            values: vec![0.0; grid.len() * ladder.len()],
        }
    }

    pub fn from_fn(grid: &GridSpec, ladder: &Arc<TimeLadder>, f: impl Fn(f64, &[f64]) -> f64) -> Self {
        let mut out = Self::zeros(grid, ladder);
        let np = grid.len();
        for (k, s) in ladder.samples().iter().enumerate() {
            for i in 0..np {
                let x = grid.coords(i);
                out.values[k * np + i] = f(s.time, &x[..grid.dim()]);
            }
        }
        out
    }

    pub fn from_slices(grid: &GridSpec, ladder: &Arc<TimeLadder>, slices: Vec<Vec<f64>>) -> Result<Self> {
        if slices.len() != ladder.len() || slices.iter().any(|s| s.len() != grid.len()) {
            return Err(Error::ShapeError("slices do not match grid and ladder".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            ladder: Arc::clone(ladder),
            values: slices.concat(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn ladder(&self) -> &Arc<TimeLadder> {
        &self.ladder
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn n_samples(&self) -> usize {
        self.ladder.len()
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let np = self.grid.len();
        &self.values[k * np..(k + 1) * np]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let np = self.grid.len();
        &mut self.values[k * np..(k + 1) * np]
    }

    pub fn set_slice(&mut self, k: usize, data: &[f64]) {
        self.slice_mut(k).copy_from_slice(data);
    }

    pub fn check_compatible(&self, other: &SpaceTimeField) -> Result<()> {
        if self.grid != other.grid || self.ladder != other.ladder {
            return Err(Error::ShapeError("fields live on different grids or ladders".into()));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            ladder: Arc::clone(&self.ladder),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise map with access to the sample time.
    pub fn map_with_time(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = self.clone();
        let np = self.grid.len();
        for (k, s) in self.ladder.samples().iter().enumerate() {
            for v in &mut out.values[k * np..(k + 1) * np] {
                *v = f(s.time, *v);
            }
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &SpaceTimeField) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete space-time L2 norm over all samples (including the bottom interval).
    pub fn l2_norm(&self) -> f64 {
        let np = self.grid.len();
        let cell = self.grid.cell_volume();
        self.ladder
            .samples()
            .iter()
            .enumerate()
            .map(|(k, s)| s.weight * cell * self.values[k * np..(k + 1) * np].iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// A vector field stored as one scalar field per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub components: Vec<SpaceTimeField>,
}

impl VectorField {
    pub fn new(components: Vec<SpaceTimeField>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::ShapeError("vector field needs at least one component".into()))?;
        if components.len() != first.grid().dim() {
            return Err(Error::ShapeError("component count must equal the dimension".into()));
        }
        for c in &components[1..] {
            first.check_compatible(c)?;
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: &GridSpec, ladder: &Arc<TimeLadder>) -> Self {
        Self { components: (0..grid.dim()).map(|_| SpaceTimeField::zeros(grid, ladder)).collect() }
    }

    pub fn grid(&self) -> &GridSpec {
        self.components[0].grid()
    }

    pub fn ladder(&self) -> &Arc<TimeLadder> {
        self.components[0].ladder()
    }

    /// Pointwise Euclidean length.
    pub fn magnitude(&self) -> SpaceTimeField {
        let mut out = self.components[0].map(|v| v * v);
        for c in &self.components[1..] {
            out.values.iter_mut().zip(c.values()).for_each(|(a, b)| *a += b * b);
        }
        out.map(f64::sqrt)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { components: self.components.iter().map(|f| f.scaled(c)).collect() }
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { components })
    }
}

/// Per-sample accumulation shared by box averages: sums `w |u|^q` (or the max
/// when `q = ∞`) over the samples of `u` in `b`.
pub(crate) fn box_power_sum(u: &SpaceTimeField, b: &ParabolicBox, q: f64, weight: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let grid = u.grid();
    let points = grid.ball_points(b.center, b.radius);
    let mut acc = 0.0;
    let mut mass = 0.0;
    for (k, s) in u.ladder().samples().iter().enumerate() {
        if !(s.time > b.t_lo && s.time <= b.t_hi) {
            continue;
        }
        let slice = u.slice(k);
        let wt = weight(s.time);
        for &p in &points {
            let v = (wt * slice[p]).abs();
            if q.is_infinite() {
                acc = f64::max(acc, v);
            } else {
                acc += s.weight * v.powf(q);
            }
            mass += s.weight;
        }
    }
    if mass == 0.0 {
        return Err(Error::EmptyBox);
    }
    Ok((acc, mass))
}

/// `( ⨏⨏_box |u|^q )^{1/q}` by midpoint quadrature; `q = ∞` gives the max.
pub fn box_average(u: &SpaceTimeField, b: &ParabolicBox, q: f64) -> Result<f64> {
    weighted_box_average(u, b, q, |_| 1.0)
}

/// Box average of `|w(s) u|` for a time weight `w`.
pub fn weighted_box_average(
    u: &SpaceTimeField,
    b: &ParabolicBox,
    q: f64,
    weight: impl Fn(f64) -> f64,
) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParams(format!("exponent q = {q} must be >= 1")));
    }
    let (acc, mass) = box_power_sum(u, b, q, weight)?;
    Ok(if q.is_infinite() { acc } else { (acc / mass).powf(1.0 / q) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize, l: f64) -> GridSpec {
        GridSpec::new(1, n, l).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 12, 1.0).is_err());
        assert!(GridSpec::new(3, 16, 1.0).is_err());
        assert!(GridSpec::new(1, 4, 1.0).is_err());
        assert!(GridSpec::new(2, 16, 0.0).is_err());
        assert!(GridSpec::new(2, 16, 2.0).is_ok());
    }

    #[test]
    fn ladder_heights_are_dyadic() {
        let l = TimeLadder::new(4.0, 5, 3).unwrap();
        let h = l.heights();
        assert_eq!(h.len(), 6);
        for w in h.windows(2) {
            assert_eq!(w[0] / w[1], 2.0);
        }
        let total: f64 = l.samples().iter().map(|s| s.weight).sum();
        assert!((total - 4.0).abs() < 1e-14);
        for m in 0..5 {
            for k in l.rung_range(m) {
                let s = l.samples()[k];
                assert_eq!(s.rung, Some(m));
                assert!(s.time > 0.5 * h[m] && s.time <= h[m]);
            }
        }
        assert!(l.nodes().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*l.nodes().last().unwrap(), 4.0);
    }

    #[test]
    fn whitney_box_basic() {
        let g = grid1(64, 64.0);
        let b = whitney_box(&g, 0, 4.0).unwrap();
        assert_eq!((b.t_lo, b.t_hi, b.radius), (2.0, 4.0, 2.0));
        assert_eq!(whitney_box(&g, 0, 0.0), Err(Error::InvalidHeight(0.0)));
        let l = g.length();
        let clipped = whitney_box(&g, 0, l * l).unwrap();
        assert_eq!(clipped.radius, l / 2.0);
    }

    #[test]
    fn annuli() {
        let g = grid1(256, 64.0);
        let c1 = parabolic_annulus(&g, 0, 1.0, 1).unwrap();
        assert_eq!(c1.outer, 2.0);
        assert!(c1.inner.is_none());
        let c2 = parabolic_annulus(&g, 0, 1.0, 2).unwrap();
        assert!((c2.outer - 8f64.sqrt()).abs() < 1e-15);
        assert_eq!(c2.inner, Some(2.0));
        assert_eq!(parabolic_annulus(&g, 0, 1.0, 0), Err(Error::InvalidIndex("annulus index must be >= 1".into())));
    }

    #[test]
    fn annuli_partition_torus() {
        for g in [grid1(64, 10.0), GridSpec::new(2, 16, 5.0).unwrap()] {
            let mut count = vec![0usize; g.len()];
            for j in 1..40 {
                for p in parabolic_annulus(&g, 3, 0.05, j).unwrap().points {
                    count[p] += 1;
                }
            }
            assert!(count.iter().all(|&c| c == 1), "{count:?}");
        }
    }

    #[test]
    fn distance_examples() {
        let g = grid1(16, 8.0);
        assert_eq!(parabolic_distance(&g, (1.0, &[0.0]), (0.0, &[0.0])), 2.0);
        assert_eq!(parabolic_distance(&g, (0.3, &[1.5]), (0.3, &[1.5])), 0.0);
        assert_eq!(parabolic_distance(&g, (0.0, &[0.0]), (0.0, &[3.0])), 3.0);
        assert_eq!(parabolic_distance(&g, (0.0, &[0.0]), (0.0, &[7.0])), 1.0);
    }

    #[test]
    fn ball_sums_match_brute_force() {
        for g in [grid1(32, 3.0), GridSpec::new(2, 16, 2.0).unwrap()] {
            let vals: Vec<f64> = (0..g.len()).map(|i| ((i * 37) % 11) as f64 - 3.0).collect();
            for r in [0.0, 0.2, 0.7, 1.0, 5.0] {
                let fast = ball_sums(&g, &vals, r);
                for (i, f) in fast.iter().enumerate() {
                    let brute: f64 = g.ball_points(i, r).iter().map(|&j| vals[j]).sum();
                    assert!((f - brute).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn box_average_examples() {
        let g = grid1(64, 16.0);
        let ladder = Arc::new(TimeLadder::new(4.0, 4, 4).unwrap());
        let c = SpaceTimeField::from_fn(&g, &ladder, |_, _| 2.5);
        let b = whitney_box(&g, 10, 2.0).unwrap();
        for q in [1.0, 2.0, 7.5, f64::INFINITY] {
            assert!((box_average(&c, &b, q).unwrap() - 2.5).abs() < 1e-14);
        }
        let mut spike = SpaceTimeField::zeros(&g, &ladder);
        let k = ladder.rung_range(1).start;
        spike.slice_mut(k)[10] = 7.0;
        assert_eq!(box_average(&spike, &b, f64::INFINITY).unwrap(), 7.0);

        // Left half of the box in time: exactly half the samples.
        let half = SpaceTimeField::from_fn(&g, &ladder, |t, _| if t <= 1.5 { 1.0 } else { 0.0 });
        assert!((box_average(&half, &b, 1.0).unwrap() - 0.5).abs() < 1e-14);

        let empty = ParabolicBox { center: 0, t_lo: 5.0, t_hi: 6.0, radius: 1.0, scale: 1.0 };
        assert_eq!(box_average(&c, &empty, 2.0), Err(Error::EmptyBox));
    }

    #[test]
    fn whitney_boxes_are_metric_balls() {
        use rand::{Rng, SeedableRng};
        let g = GridSpec::new(2, 16, 8.0).unwrap();
        let ladder = TimeLadder::new(4.0, 6, 4).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = rng.random_range(0..g.len());
            let t = rng.random_range(0.05..4.0);
            let b = whitney_box(&g, x, t).unwrap();
            let ball = ParabolicBox::metric_ball(&g, x, 0.75 * t, t.sqrt());
            let xc = g.coords(x);
            for s in ladder.samples() {
                for y in 0..g.len() {
                    let yc = g.coords(y);
                    let in_box = s.time > b.t_lo
                        && s.time <= b.t_hi
                        && g.torus_distance(&xc, &yc) <= b.radius * (1.0 + 1e-12);
                    let in_ball = s.time > ball.t_lo
                        && s.time <= ball.t_hi
                        && g.torus_distance(&xc, &yc) <= ball.radius * (1.0 + 1e-12);
                    let d = parabolic_distance(&g, (s.time, &yc), (0.75 * t, &xc));
                    assert_eq!(in_box, in_ball);
                    if d < 0.999 * t.sqrt().min(0.5 * g.length()) {
                        assert!(in_box);
                    }
                }
            }
        }
    }
}
