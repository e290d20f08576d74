//! Rough and smooth elliptic coefficient fields.
//!
//! Fields are diagonal, `A(x) = diag(a_1(x), .., a_n(x))`, and piecewise
//! constant on grid cells. The operator reads face values as the harmonic
//! mean of the two adjacent cells, the usual flux-continuous choice for
//! jump coefficients.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    Constant,
    Checkerboard,
    Layered,
}

impl std::str::FromStr for CoefficientKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "checkerboard" => Ok(Self::Checkerboard),
            "layered" => Ok(Self::Layered),
            other => Err(Error::Parse(format!("unknown coefficient kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for CoefficientKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Checkerboard => "checkerboard",
            Self::Layered => "layered",
        })
    }
}

/// Recipe for [`generate_field`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientSpec {
    pub kind: CoefficientKind,
    /// `(a_low, a_high)`.
    pub contrast: (f64, f64),
    /// Coarse cells per axis; must divide the grid points per axis.
    pub cells: usize,
    pub seed: u64,
    /// `q(A)`; `None` stands for infinity.
    #[serde(default)]
    pub q_a: Option<f64>,
    /// `Q = q(A*)'`.
    #[serde(default = "default_q_adj_dual")]
    pub q_adj_dual: f64,
    #[serde(default)]
    pub regular: Option<bool>,
}

fn default_q_adj_dual() -> f64 {
    10.0 / 7.0
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        Self {
            kind: CoefficientKind::Constant,
            contrast: (1.0, 1.0),
            cells: 8,
            seed: 7,
            q_a: None,
            q_adj_dual: default_q_adj_dual(),
            regular: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityBounds {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    grid: GridSpec,
    kind: CoefficientKind,
    /// Diagonal entries per grid cell; unused axes hold 0.
    diag: Vec<[f64; 2]>,
    q_a: f64,
    q_adj_dual: f64,
    regular: bool,
}

impl CoefficientField {
    pub fn from_diagonal(grid: &GridSpec, kind: CoefficientKind, diag: Vec<[f64; 2]>) -> Result<Self> {
        if diag.len() != grid.len() {
            return Err(Error::ShapeError(format!(
                "{} coefficient samples for a grid of {} points",
                diag.len(),
                grid.len()
            )));
        }
        let field = Self {
            grid: grid.clone(),
            kind,
            diag,
            q_a: f64::INFINITY,
            q_adj_dual: default_q_adj_dual(),
            regular: kind == CoefficientKind::Constant,
        };
        ellipticity_bounds(&field)?;
        Ok(field)
    }

    pub fn identity(grid: &GridSpec) -> Self {
        Self::constant_diagonal(grid, [1.0, 1.0]).expect("identity is elliptic")
    }

    pub fn constant_diagonal(grid: &GridSpec, entries: [f64; 2]) -> Result<Self> {
        let e = if grid.dim() == 1 { [entries[0], 0.0] } else { entries };
        Self::from_diagonal(grid, CoefficientKind::Constant, vec![e; grid.len()])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn diagonal(&self, idx: usize) -> [f64; 2] {
        self.diag[idx]
    }

    /// Coefficient on the face between `idx` and its `+1` neighbor along `axis`.
    pub fn face(&self, idx: usize, axis: usize) -> f64 {
        let j = self.grid.neighbor(idx, axis, 1);
        let (a, b) = (self.diag[idx][axis], self.diag[j][axis]);
        2.0 * a * b / (a + b)
    }

    pub fn q_a(&self) -> f64 {
        self.q_a
    }

    pub fn q_adj_dual(&self) -> f64 {
        self.q_adj_dual
    }

    pub fn is_regular(&self) -> bool {
        self.regular
    }

    pub fn with_exponents(mut self, q_a: f64, q_adj_dual: f64) -> Result<Self> {
        if !(q_a > 2.0) {
            return Err(Error::InvalidParams(format!("q(A) = {q_a} must exceed 2")));
        }
        if !(1.0..2.0).contains(&q_adj_dual) {
            return Err(Error::InvalidParams(format!("Q = {q_adj_dual} must lie in [1, 2)")));
        }
        self.q_a = q_a;
        self.q_adj_dual = q_adj_dual;
        Ok(self)
    }

    pub fn with_regularity(mut self, regular: bool) -> Self {
        self.regular = regular;
        self
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut out = self.clone();
        for d in &mut out.diag {
            for v in d.iter_mut().take(self.grid.dim()) {
                *v *= c;
            }
        }
        ellipticity_bounds(&out)?;
        Ok(out)
    }

    /// Flat text serialization: a header, then `index a_1 [a_2]` per cell.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# roughheat-coefficients v1\n");
        let _ = writeln!(
            s,
            "dim {} points {} length {:e} kind {}",
            self.grid.dim(),
            self.grid.points_per_axis(),
            self.grid.length(),
            self.kind
        );
        let _ = writeln!(s, "q_a {:e} q_adj_dual {:e} regular {}", self.q_a, self.q_adj_dual, self.regular);
        for (i, d) in self.diag.iter().enumerate() {
            if self.grid.dim() == 1 {
                let _ = writeln!(s, "{i} {:e}", d[0]);
            } else {
                let _ = writeln!(s, "{i} {:e} {:e}", d[0], d[1]);
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("coefficient file: {what}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("# roughheat-coefficients v1") {
            return Err(bad("missing header"));
        }
        let kv = |line: Option<&str>| -> Result<Vec<String>> {
            Ok(line.ok_or_else(|| bad("truncated"))?.split_whitespace().map(String::from).collect())
        };
        let g = kv(lines.next())?;
        if g.len() != 8 {
            return Err(bad("grid line"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
        let dim = num(&g[1])? as usize;
        let points = num(&g[3])? as usize;
        let grid = GridSpec::new(dim, points, num(&g[5])?)?;
        let kind: CoefficientKind = g[7].parse()?;
        let e = kv(lines.next())?;
        if e.len() != 6 {
            return Err(bad("exponent line"));
        }
        let (q_a, q_adj_dual) = (num(&e[1])?, num(&e[3])?);
        let regular = e[5].parse::<bool>().map_err(|_| bad("regular flag"))?;
        let mut diag = vec![[0.0; 2]; grid.len()];
        let mut seen = vec![false; grid.len()];
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 1 + dim {
                return Err(bad(&format!("sample line `{line}`")));
            }
            let i: usize = parts[0].parse().map_err(|_| bad("sample index"))?;
            if i >= grid.len() {
                return Err(bad("sample index out of range"));
            }
            for d in 0..dim {
                diag[i][d] = num(parts[1 + d])?;
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("missing samples"));
        }
        Ok(Self::from_diagonal(&grid, kind, diag)?
            .with_exponents(q_a, q_adj_dual)?
            .with_regularity(regular))
    }
}

/// Scalar-isotropic piecewise-constant field on `cells^n` coarse cells.
pub fn generate_field(grid: &GridSpec, spec: &CoefficientSpec) -> Result<CoefficientField> {
    let (lo, hi) = spec.contrast;
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(Error::NotElliptic(format!("contrast ({lo}, {hi}) must be positive")));
    }
    if hi < lo {
        return Err(Error::NotElliptic(format!("a_low = {lo} exceeds a_high = {hi}")));
    }
    let n = grid.points_per_axis();
    if spec.cells == 0 || n % spec.cells != 0 {
        return Err(Error::InvalidParams(format!(
            "cell count {} must divide {n} points per axis",
            spec.cells
        )));
    }
    let width = n / spec.cells;
    let coarse = spec.cells.pow(grid.dim() as u32);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let cell_values: Vec<f64> = match spec.kind {
        CoefficientKind::Constant => vec![lo; coarse],
        CoefficientKind::Checkerboard => (0..coarse).map(|_| if rng.random_bool(0.5) { hi } else { lo }).collect(),
        CoefficientKind::Layered => (0..coarse)
            .map(|c| {
                let stripe = if grid.dim() == 1 { c } else { c / spec.cells };
                if stripe % 2 == 0 { lo } else { hi }
            })
            .collect(),
    };
    let diag = (0..grid.len())
        .map(|i| {
            let m = grid.multi_index(i);
            let c = if grid.dim() == 1 {
                m[0] / width
            } else {
                (m[0] / width) * spec.cells + m[1] / width
            };
            let a = cell_values[c];
            if grid.dim() == 1 { [a, 0.0] } else { [a, a] }
        })
        .collect();
    let field = CoefficientField::from_diagonal(grid, spec.kind, diag)?
        .with_exponents(spec.q_a.unwrap_or(f64::INFINITY), spec.q_adj_dual)?;
    let regular = spec.regular.unwrap_or(spec.kind == CoefficientKind::Constant || lo == hi);
    Ok(field.with_regularity(regular))
}

/// `(min smallest eigenvalue, max operator norm)` over the cell samples.
/// Face values are harmonic means and so lie within the same bounds.
pub fn ellipticity_bounds(field: &CoefficientField) -> Result<EllipticityBounds> {
    let dim = field.grid.dim();
    let mut lambda = f64::INFINITY;
    let mut big = 0.0f64;
    for (i, d) in field.diag.iter().enumerate() {
        for &a in &d[..dim] {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::NotElliptic(format!("cell {i} has entry {a}")));
            }
            lambda = lambda.min(a);
            big = big.max(a);
        }
    }
    Ok(EllipticityBounds { lambda, big_lambda: big })
}

/// Counts directions/cells where the reported bounds fail. Returns the
/// number of violations among `probes` random `(cell, ξ)` pairs.
pub fn certify_bounds(field: &CoefficientField, bounds: &EllipticityBounds, probes: usize, seed: u64) -> usize {
    let dim = field.grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..probes {
        let i = rng.random_range(0..field.grid.len());
        let axis_face = rng.random_range(0..dim);
        let xi: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Check both the cell matrix and one of its face matrices.
        let face_entries: Vec<f64> = (0..dim)
            .map(|d| if d == axis_face { field.face(i, d) } else { field.diag[i][d] })
            .collect();
        for entries in [&field.diag[i][..dim], &face_entries[..]] {
            let quad: f64 = (0..dim).map(|d| entries[d] * xi[d] * xi[d]).sum();
            let lower: f64 = (0..dim).map(|d| bounds.lambda * xi[d] * xi[d]).sum();
            let image: f64 = (0..dim).map(|d| (entries[d] * xi[d]).powi(2)).sum();
            let upper: f64 = (0..dim).map(|d| (bounds.big_lambda * xi[d]).powi(2)).sum();
            if quad < lower || image > upper {
                violations += 1;
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: CoefficientKind, lo: f64, hi: f64) -> CoefficientSpec {
        CoefficientSpec { kind, contrast: (lo, hi), cells: 8, seed: 7, ..Default::default() }
    }

    #[test]
    fn identity_field() {
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        let f = generate_field(&g, &spec(CoefficientKind::Constant, 1.0, 1.0)).unwrap();
        assert!((0..g.len()).all(|i| f.diagonal(i) == [1.0, 1.0]));
        let b = ellipticity_bounds(&f).unwrap();
        assert_eq!((b.lambda, b.big_lambda), (1.0, 1.0));
    }

    #[test]
    fn checkerboard_bounds() {
        let g = GridSpec::new(2, 32, 1.0).unwrap();
        let f = generate_field(&g, &spec(CoefficientKind::Checkerboard, 1.0, 10.0)).unwrap();
        let b = ellipticity_bounds(&f).unwrap();
        assert_eq!((b.lambda, b.big_lambda), (1.0, 10.0));
        assert_eq!(certify_bounds(&f, &b, 1000, 3), 0);
        assert!(!f.is_regular());
    }

    #[test]
    fn degenerate_contrast() {
        let g = GridSpec::new(1, 16, 1.0).unwrap();
        let e = generate_field(&g, &spec(CoefficientKind::Constant, 0.0, 0.0));
        assert!(matches!(e, Err(Error::NotElliptic(_))));
        let bad_cells = CoefficientSpec { cells: 3, ..spec(CoefficientKind::Layered, 1.0, 2.0) };
        assert!(generate_field(&g, &bad_cells).is_err());
    }

    #[test]
    fn diagonal_bounds() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let f = CoefficientField::constant_diagonal(&g, [2.0, 5.0]).unwrap();
        let b = ellipticity_bounds(&f).unwrap();
        assert_eq!((b.lambda, b.big_lambda), (2.0, 5.0));
        let s = ellipticity_bounds(&f.scaled(3.0).unwrap()).unwrap();
        assert_eq!((s.lambda, s.big_lambda), (6.0, 15.0));
    }

    #[test]
    fn layered_alternates() {
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        let f = generate_field(&g, &CoefficientSpec { cells: 4, ..spec(CoefficientKind::Layered, 1.0, 3.0) }).unwrap();
        for i in 0..g.len() {
            let stripe = g.multi_index(i)[0] / 4;
            assert_eq!(f.diagonal(i)[0], if stripe % 2 == 0 { 1.0 } else { 3.0 });
        }
    }

    #[test]
    fn text_roundtrip() {
        let g = GridSpec::new(2, 16, 2.5).unwrap();
        let f = generate_field(&g, &spec(CoefficientKind::Checkerboard, 0.5, 7.25)).unwrap();
        let back = CoefficientField::from_text(&f.to_text()).unwrap();
        assert_eq!(back, f);
        assert!(CoefficientField::from_text("garbage").is_err());
    }

    #[test]
    fn seeds_are_reproducible() {
        let g = GridSpec::new(2, 32, 1.0).unwrap();
        let s = spec(CoefficientKind::Checkerboard, 1.0, 10.0);
        assert_eq!(generate_field(&g, &s).unwrap(), generate_field(&g, &s).unwrap());
        let other = generate_field(&g, &CoefficientSpec { seed: 8, ..s }).unwrap();
        assert_ne!(other, generate_field(&g, &spec(CoefficientKind::Checkerboard, 1.0, 10.0)).unwrap());
    }
}
