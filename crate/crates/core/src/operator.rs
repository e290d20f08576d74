//! The discrete operator `L = -div(A grad)`, its semigroup and heat kernel.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::geometry::GridSpec;

#[derive(Debug, Clone)]
struct Eigensystem {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

/// Symmetric face-flux matrix of `L` with a lazily computed eigensystem.
#[derive(Debug)]
pub struct DiscreteOperator {
    grid: GridSpec,
    field: CoefficientField,
    matrix: DMatrix<f64>,
    eigen: OnceLock<std::result::Result<Eigensystem, String>>,
}

impl Clone for DiscreteOperator {
    fn clone(&self) -> Self {
        let eigen = OnceLock::new();
        if let Some(e) = self.eigen.get() {
            let _ = eigen.set(e.clone());
        }
        Self { grid: self.grid.clone(), field: self.field.clone(), matrix: self.matrix.clone(), eigen }
    }
}

pub fn assemble_operator(field: &CoefficientField, grid: &GridSpec) -> Result<DiscreteOperator> {
    if field.grid() != grid {
        return Err(Error::ShapeError("coefficient field sampled on a different grid".into()));
    }
    let np = grid.len();
    let inv_h2 = 1.0 / grid.spacing().powi(2);
    let mut m = DMatrix::<f64>::zeros(np, np);
    for i in 0..np {
        for axis in 0..grid.dim() {
            let j = grid.neighbor(i, axis, 1);
            let a = field.face(i, axis) * inv_h2;
            m[(i, i)] += a;
            m[(j, j)] += a;
            m[(i, j)] -= a;
            m[(j, i)] -= a;
        }
    }
    Ok(DiscreteOperator { grid: grid.clone(), field: field.clone(), matrix: m, eigen: OnceLock::new() })
}

/// Semigroup evaluation strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SemigroupMethod {
    Eigen,
    /// Sub-stepped backward Euler; the step count doubles until two levels
    /// agree to `rtol` relative.
    BackwardEuler { rtol: f64, max_steps: usize },
}

/// `(1 - e^{-z}) / z`, continuous at 0.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 - z / 2.0 + z * z / 6.0
    } else {
        -(-z).exp_m1() / z
    }
}

impl DiscreteOperator {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn field(&self) -> &CoefficientField {
        &self.field
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let v = &self.matrix * DVector::from_column_slice(u);
        v.as_slice().to_vec()
    }

    /// Computes the eigensystem once. Subsequent calls are free and the
    /// operator is read-only afterwards.
    pub fn prepare(&self) -> Result<()> {
        self.eigensystem().map(|_| ())
    }

    fn eigensystem(&self) -> Result<&Eigensystem> {
        self.eigen
            .get_or_init(|| {
                let sym = self.matrix.clone().symmetric_eigen();
                if sym.eigenvalues.iter().any(|v| !v.is_finite()) {
                    return Err("non-finite eigenvalue".to_string());
                }
                // Clamp roundoff below zero; L is positive semidefinite.
                let values = sym.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
                Ok(Eigensystem { values, vectors: sym.eigenvectors })
            })
            .as_ref()
            .map_err(|e| Error::NumericalFailure(e.clone()))
    }

    pub fn eigenvalues(&self) -> Result<&[f64]> {
        Ok(&self.eigensystem()?.values)
    }

    /// Coordinates of `u` in the orthonormal eigenbasis.
    pub fn to_modes(&self, u: &[f64]) -> Result<Vec<f64>> {
        let e = self.eigensystem()?;
        Ok(e.vectors.tr_mul(&DVector::from_column_slice(u)).as_slice().to_vec())
    }

    pub fn from_modes(&self, c: &[f64]) -> Result<Vec<f64>> {
        let e = self.eigensystem()?;
        Ok((&e.vectors * DVector::from_column_slice(c)).as_slice().to_vec())
    }

    /// Column-wise [`Self::to_modes`] for a batch of grid functions.
    pub(crate) fn to_modes_batch(&self, cols: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(self.eigensystem()?.vectors.tr_mul(cols))
    }

    pub(crate) fn from_modes_batch(&self, cols: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(&self.eigensystem()?.vectors * cols)
    }

    /// Applies `g(μ)` to `u` through the eigenbasis.
    pub fn spectral_apply(&self, u: &[f64], g: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        let e = self.eigensystem()?;
        let mut c = self.to_modes(u)?;
        for (ci, &mu) in c.iter_mut().zip(&e.values) {
            *ci *= g(mu);
        }
        self.from_modes(&c)
    }

    /// `e^{-tL} f`.
    pub fn semigroup_apply(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        self.semigroup_apply_with(t, f, SemigroupMethod::Eigen)
    }

    pub fn semigroup_apply_with(&self, t: f64, f: &[f64], method: SemigroupMethod) -> Result<Vec<f64>> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidHeight(t));
        }
        if f.len() != self.grid.len() {
            return Err(Error::ShapeError("grid function length".into()));
        }
        if t == 0.0 {
            return Ok(f.to_vec());
        }
        match method {
            SemigroupMethod::Eigen => self.spectral_apply(f, |mu| (-t * mu).exp()),
            SemigroupMethod::BackwardEuler { rtol, max_steps } => self.backward_euler(t, f, rtol, max_steps),
        }
    }

    fn backward_euler(&self, t: f64, f: &[f64], rtol: f64, max_steps: usize) -> Result<Vec<f64>> {
        let run = |steps: usize| -> Result<DVector<f64>> {
            let dt = t / steps as f64;
            let np = self.grid.len();
            let m = DMatrix::<f64>::identity(np, np) + &self.matrix * dt;
            let chol = m
                .cholesky()
                .ok_or_else(|| Error::NumericalFailure("backward Euler matrix not positive definite".into()))?;
            let mut u = DVector::from_column_slice(f);
            for _ in 0..steps {
                u = chol.solve(&u);
            }
            Ok(u)
        };
        let mut steps = 4;
        let mut prev = run(steps)?;
        while steps * 2 <= max_steps {
            steps *= 2;
            let next = run(steps)?;
            let scale = next.norm().max(f64::MIN_POSITIVE);
            if (&next - &prev).norm() <= rtol * scale {
                return Ok(next.as_slice().to_vec());
            }
            prev = next;
        }
        Err(Error::NumericalFailure(format!(
            "backward Euler did not reach rtol {rtol:e} within {max_steps} steps"
        )))
    }

    /// `K(t, ., y) = e^{-tL} δ_y / h^n`.
    pub fn kernel_column(&self, t: f64, y: usize) -> Result<KernelSlice> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidHeight(t));
        }
        if y >= self.grid.len() {
            return Err(Error::InvalidIndex(format!("source point {y}")));
        }
        let mut delta = vec![0.0; self.grid.len()];
        delta[y] = 1.0 / self.grid.cell_volume();
        let values = self.semigroup_apply(t, &delta)?;
        Ok(KernelSlice { t, y, values })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSlice {
    pub t: f64,
    pub y: usize,
    pub values: Vec<f64>,
}

impl KernelSlice {
    pub fn mass(&self, grid: &GridSpec) -> f64 {
        self.values.iter().sum::<f64>() * grid.cell_volume()
    }
}

/// Centered differences on the torus, one component per axis.
pub fn gradient(grid: &GridSpec, u: &[f64]) -> Vec<Vec<f64>> {
    let inv = 0.5 / grid.spacing();
    (0..grid.dim())
        .map(|axis| {
            (0..grid.len())
                .map(|i| (u[grid.neighbor(i, axis, 1)] - u[grid.neighbor(i, axis, -1)]) * inv)
                .collect()
        })
        .collect()
}

/// Centered divergence, the negative adjoint of [`gradient`].
pub fn divergence(grid: &GridSpec, components: &[Vec<f64>]) -> Vec<f64> {
    let inv = 0.5 / grid.spacing();
    let mut out = vec![0.0; grid.len()];
    for (axis, c) in components.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            *o += (c[grid.neighbor(i, axis, 1)] - c[grid.neighbor(i, axis, -1)]) * inv;
        }
    }
    out
}

/// Discrete `L^p` norm with cell measure `h^n`; `p = ∞` is the max.
pub fn lp_norm(grid: &GridSpec, u: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        u.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        (u.iter().map(|v| v.abs().powf(p)).sum::<f64>() * grid.cell_volume()).powf(1.0 / p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianFit {
    /// Envelope constant `C` of `K <= C t^{-n/2} e^{-c d^2/t}`.
    pub constant: f64,
    /// Fitted rate `c`.
    pub rate: f64,
    /// Intercept of the plain least-squares fit, before the envelope lift.
    pub ls_constant: f64,
    pub entries_checked: usize,
    /// Fitted-column entries above `1.05 x` the envelope.
    pub violations: usize,
    pub violation_fraction: f64,
    /// Largest entry / envelope ratio over the fitted columns.
    pub max_ratio: f64,
    /// Violations on extra random source points not used by the fit.
    pub held_out_violations: usize,
    pub held_out_max_ratio: f64,
}

/// Fits a Gaussian envelope to heat-kernel columns.
///
/// Columns are taken at `sources` (every grid point when `sources` is
/// `None`). For each column, `(d²/t, ln(K t^{n/2}))` pairs with `d <= L/4`
/// and `K` above `1e-8` of the column peak are binned in `d²/t`; the rate is
/// the least-squares slope through the per-bin maxima, and the constant is
/// lifted to the smallest value covering every fitted pair. Violations are
/// counted at `×1.05` over every entry with `d <= L/4`. `held_out` extra random
/// columns are scored against the same envelope without entering the fit.
pub fn verify_gaussian_bound(
    op: &DiscreteOperator,
    times: &[f64],
    sources: Option<&[usize]>,
    held_out: usize,
    seed: u64,
) -> Result<GaussianFit> {
    let grid = op.grid();
    let h = grid.spacing();
    let lmax = grid.length() / 8.0;
    for &t in times {
        if !(t >= 64.0 * h * h * (1.0 - 1e-12) && t <= lmax * lmax * (1.0 + 1e-12)) {
            return Err(Error::ResolutionError(format!(
                "t = {t} outside [{:e}, {:e}]",
                64.0 * h * h,
                lmax * lmax
            )));
        }
    }
    let all: Vec<usize> = (0..grid.len()).collect();
    let fit_sources = sources.unwrap_or(&all);
    if times.is_empty() || fit_sources.is_empty() {
        return Err(Error::InvalidParams("need at least one time and one source".into()));
    }
    let n = grid.dim() as f64;
    let dmax = grid.length() / 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let test_sources: Vec<usize> = (0..held_out).map(|_| rng.random_range(0..grid.len())).collect();

    struct Column {
        t: f64,
        entries: Vec<(f64, f64)>,
    }
    let collect = |t: f64, y: usize| -> Result<Column> {
        let k = op.kernel_column(t, y)?;
        let entries = (0..grid.len())
            .filter_map(|i| {
                let d = grid.point_distance(i, y);
                (d <= dmax).then(|| (d * d / t, k.values[i]))
            })
            .collect();
        Ok(Column { t, entries })
    };
    let mut fit_cols = Vec::new();
    let mut test_cols = Vec::new();
    for &t in times {
        for &y in fit_sources {
            fit_cols.push(collect(t, y)?);
        }
        for &y in &test_sources {
            test_cols.push(collect(t, y)?);
        }
    }

    const BINS: usize = 32;
    let xmax = fit_cols
        .iter()
        .flat_map(|c| c.entries.iter().map(|e| e.0))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut bin_max = vec![f64::NEG_INFINITY; BINS];
    let mut bin_x = vec![0.0; BINS];
    let mut pts = Vec::new();
    for c in &fit_cols {
        let peak = c.entries.iter().fold(0.0f64, |m, e| m.max(e.1));
        for &(x, k) in &c.entries {
            if k <= 1e-8 * peak {
                continue;
            }
            let yv = (k * c.t.powf(n / 2.0)).ln();
            pts.push((x, yv));
            let b = ((x / xmax) * BINS as f64).min(BINS as f64 - 1.0) as usize;
            if yv > bin_max[b] {
                bin_max[b] = yv;
                bin_x[b] = x;
            }
        }
    }
    let used: Vec<(f64, f64)> = (0..BINS).filter(|&b| bin_max[b].is_finite()).map(|b| (bin_x[b], bin_max[b])).collect();
    if used.len() < 3 {
        return Err(Error::NumericalFailure("too few kernel samples for a Gaussian fit".into()));
    }
    let (slope, intercept) = least_squares(&used);
    let rate = -slope;
    if !(rate > 0.0) {
        return Err(Error::NumericalFailure(format!("fitted Gaussian rate {rate} is not positive")));
    }
    let log_c = pts.iter().map(|&(x, yv)| yv + rate * x).fold(f64::NEG_INFINITY, f64::max);
    let constant = log_c.exp();

    let score = |cols: &[Column]| -> (usize, usize, f64) {
        let (mut checked, mut bad, mut worst) = (0, 0, 0.0f64);
        for c in cols {
            let scale = c.t.powf(-n / 2.0);
            for &(x, k) in &c.entries {
                let ratio = k / (constant * scale * (-rate * x).exp());
                worst = worst.max(ratio);
                checked += 1;
                if ratio > 1.05 {
                    bad += 1;
                }
            }
        }
        (checked, bad, worst)
    };
    let (checked, violations, max_ratio) = score(&fit_cols);
    let (_, held_out_violations, held_out_max_ratio) = score(&test_cols);
    Ok(GaussianFit {
        constant,
        rate,
        ls_constant: intercept.exp(),
        entries_checked: checked,
        violations,
        violation_fraction: violations as f64 / checked as f64,
        max_ratio,
        held_out_violations,
        held_out_max_ratio,
    })
}

/// Ordinary least squares `y = a x + b`; returns `(a, b)`.
pub fn least_squares(pts: &[(f64, f64)]) -> (f64, f64) {
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let a = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    (a, (sy - a * sx) / m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorFamily {
    Semigroup,
    /// `sqrt(t) grad e^{-tL}`.
    GradSemigroup,
    /// `sqrt(t) e^{-tL} div`.
    SemigroupDiv,
}

/// Worst ratio of `‖1_F T_t(f 1_E)‖_q` to the off-diagonal bound over a
/// random probe ensemble.
#[allow(clippy::too_many_arguments)]
pub fn offdiagonal_probe(
    op: &DiscreteOperator,
    family: OperatorFamily,
    e: &[usize],
    f: &[usize],
    t: f64,
    p: f64,
    q: f64,
    rate: f64,
    probes: usize,
    seed: u64,
) -> Result<f64> {
    if e.is_empty() || f.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if !(t > 0.0) {
        return Err(Error::InvalidHeight(t));
    }
    if !(p >= 1.0 && q >= p) {
        return Err(Error::InvalidParams(format!("need 1 <= p <= q, got p = {p}, q = {q}")));
    }
    let grid = op.grid();
    let n = grid.dim() as f64;
    let dist = e
        .iter()
        .flat_map(|&a| f.iter().map(move |&b| (a, b)))
        .map(|(a, b)| grid.point_distance(a, b))
        .fold(f64::INFINITY, f64::min);
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let bound = t.powf(-(n / 2.0) * (inv(p) - inv(q))) * (-rate * dist * dist / t).exp();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let ncomp = if family == OperatorFamily::SemigroupDiv { grid.dim() } else { 1 };
    for probe in 0..probes {
        let inputs: Vec<Vec<f64>> = (0..ncomp)
            .map(|_| {
                let mut v = vec![0.0; grid.len()];
                for &i in e {
                    v[i] = if probe == 0 { 1.0 } else { rng.random_range(-1.0..1.0) };
                }
                v
            })
            .collect();
        let in_norm = if ncomp == 1 {
            lp_norm(grid, &inputs[0], p)
        } else {
            lp_norm(grid, &magnitude(&inputs), p)
        };
        if in_norm == 0.0 {
            continue;
        }
        let out: Vec<f64> = match family {
            OperatorFamily::Semigroup => op.semigroup_apply(t, &inputs[0])?,
            OperatorFamily::GradSemigroup => {
                let g = gradient(grid, &op.semigroup_apply(t, &inputs[0])?);
                magnitude(&g).into_iter().map(|v| v * t.sqrt()).collect()
            }
            OperatorFamily::SemigroupDiv => op
                .semigroup_apply(t, &divergence(grid, &inputs))?
                .into_iter()
                .map(|v| v * t.sqrt())
                .collect(),
        };
        let mut restricted = vec![0.0; grid.len()];
        for &i in f {
            restricted[i] = out[i];
        }
        worst = worst.max(lp_norm(grid, &restricted, q) / (bound * in_norm));
    }
    Ok(worst)
}

pub(crate) fn magnitude(components: &[Vec<f64>]) -> Vec<f64> {
    (0..components[0].len())
        .map(|i| components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{generate_field, CoefficientKind, CoefficientSpec};
    use std::f64::consts::PI;

    fn identity_op(dim: usize, n: usize, l: f64) -> DiscreteOperator {
        let g = GridSpec::new(dim, n, l).unwrap();
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

    fn mode(g: &GridSpec, k: f64) -> Vec<f64> {
        (0..g.len()).map(|i| (2.0 * PI * k * g.coords(i)[0] / g.length()).cos()).collect()
    }

    #[test]
    fn stencil_symbol() {
        let op = identity_op(1, 32, 2.0 * PI);
        let g = op.grid().clone();
        let h = g.spacing();
        for k in 0..5 {
            let u = mode(&g, k as f64);
            let lu = op.apply(&u);
            let mu = (2.0 - 2.0 * (k as f64 * h).cos()) / (h * h);
            for i in 0..g.len() {
                assert!((lu[i] - mu * u[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn constants_in_kernel_and_symmetry() {
        for op in [checker_op(2, 16, 1.0), checker_op(1, 64, 1.0)] {
            let lu = op.apply(&vec![3.0; op.grid().len()]);
            assert!(lu.iter().all(|v| v.abs() < 1e-9));
            let m = op.matrix();
            assert_eq!((m - m.transpose()).abs().max(), 0.0);
        }
    }

    #[test]
    fn semigroup_plane_wave_and_mass() {
        let op = identity_op(1, 64, 2.0 * PI);
        let g = op.grid().clone();
        let h = g.spacing();
        let u = mode(&g, 3.0);
        let mu = (2.0 - 2.0 * (3.0 * h).cos()) / (h * h);
        let out = op.semigroup_apply(0.2, &u).unwrap();
        for i in 0..g.len() {
            assert!((out[i] - (-0.2 * mu).exp() * u[i]).abs() < 1e-12);
        }
        assert_eq!(op.semigroup_apply(0.0, &u).unwrap(), u);
        let cop = checker_op(2, 16, 1.0);
        let f: Vec<f64> = (0..256).map(|i| ((i * 13) % 7) as f64).collect();
        let out = cop.semigroup_apply(0.01, &f).unwrap();
        let (a, b): (f64, f64) = (f.iter().sum(), out.iter().sum());
        assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn backward_euler_agrees_with_eigen() {
        let op = checker_op(1, 32, 1.0);
        let f: Vec<f64> = (0..32).map(|i| 1.0 + (2.0 * PI * i as f64 / 32.0).sin()).collect();
        let a = op.semigroup_apply(0.003, &f).unwrap();
        let b = op
            .semigroup_apply_with(0.003, &f, SemigroupMethod::BackwardEuler { rtol: 1e-5, max_steps: 1 << 16 })
            .unwrap();
        assert!(b.iter().all(|&v| v >= 0.0));
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn kernel_matches_heat_kernel() {
        let op = identity_op(1, 256, 32.0);
        let g = op.grid().clone();
        let h = g.spacing();
        for sqrt_t in [8.0 * h, 2.0, 4.0] {
            let t = sqrt_t * sqrt_t;
            let k = op.kernel_column(t, 0).unwrap();
            let mut err = 0.0;
            let mut total = 0.0;
            for i in 0..g.len() {
                let d = g.point_distance(i, 0);
                let exact = (4.0 * PI * t).powf(-0.5) * (-d * d / (4.0 * t)).exp();
                err += (k.values[i] - exact).abs() * h;
                total += exact * h;
            }
            assert!(err / total < 0.02, "t={t} err={}", err / total);
            assert!((k.mass(&g) - 1.0).abs() < 1e-10);
        }
        assert_eq!(op.kernel_column(0.0, 0), Err(Error::InvalidHeight(0.0)));
    }

    #[test]
    fn kernel_symmetry() {
        let op = checker_op(2, 16, 1.0);
        let t = 0.004;
        let a = op.kernel_column(t, 5).unwrap();
        let b = op.kernel_column(t, 77).unwrap();
        assert!((a.values[77] - b.values[5]).abs() < 1e-10 * a.values[77].abs().max(1.0));
    }

    #[test]
    fn gradient_identities() {
        let g = GridSpec::new(1, 64, 2.0 * PI).unwrap();
        let h = g.spacing();
        let u: Vec<f64> = (0..64).map(|i| (3.0 * g.coords(i)[0]).sin()).collect();
        let du = gradient(&g, &u);
        for i in 0..64 {
            let expected = (3.0 * g.coords(i)[0]).cos() * (3.0 * h).sin() / h;
            assert!((du[0][i] - expected).abs() < 1e-12);
        }
        assert!(gradient(&g, &[2.0; 64])[0].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn divergence_is_negative_adjoint() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let u: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin()).collect();
        let f: Vec<Vec<f64>> = (0..2).map(|a| (0..64).map(|i| ((i + a) as f64 * 0.11).cos()).collect()).collect();
        let gu = gradient(&g, &u);
        let lhs: f64 = (0..2).map(|a| gu[a].iter().zip(&f[a]).map(|(x, y)| x * y).sum::<f64>()).sum();
        let rhs: f64 = divergence(&g, &f).iter().zip(&u).map(|(x, y)| x * y).sum();
        assert!((lhs + rhs).abs() < 1e-12);
    }

    #[test]
    fn gaussian_fit_identity() {
        let op = identity_op(1, 256, 32.0);
        let h = op.grid().spacing();
        let too_small = verify_gaussian_bound(&op, &[h * h], None, 0, 1);
        assert!(matches!(too_small, Err(Error::ResolutionError(_))));
        let fit = verify_gaussian_bound(&op, &[1.0, 4.0, 16.0], Some(&[0, 100]), 0, 1).unwrap();
        assert!((fit.rate - 0.25).abs() < 0.025, "{fit:?}");
        assert_eq!(fit.violations, 0);
    }

    #[test]
    fn offdiagonal_max_principle() {
        let op = checker_op(1, 64, 1.0);
        let all: Vec<usize> = (0..64).collect();
        let c = offdiagonal_probe(&op, OperatorFamily::Semigroup, &all, &all, 0.01, f64::INFINITY, f64::INFINITY, 0.1, 20, 3)
            .unwrap();
        assert!(c <= 1.0 + 1e-8);
        assert_eq!(
            offdiagonal_probe(&op, OperatorFamily::Semigroup, &[], &all, 0.01, 2.0, 2.0, 0.1, 5, 3),
            Err(Error::EmptyRegion)
        );
    }
}
