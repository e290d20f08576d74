//! Exact exponent algebra: parabolic Sobolev conjugates, admissibility
//! tables, reaction-diffusion parameter ranges, the critical line and the
//! reverse-Hölder exponent system.
//!
//! Everything is computed in `Ratio<i128>`; `∞` is a separate variant.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

pub fn rat(num: i128, den: i128) -> Rational {
    Ratio::new(num, den)
}

/// Best rational approximation of a float (exact for short decimals).
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    Ratio::<i128>::approximate_float(x).ok_or_else(|| Error::InvalidParams(format!("{x} has no rational approximation")))
}

/// Reads `a/b`, integers and decimals. A decimal with four or more fractional
/// digits is taken as a rounded value: the simplest fraction inside its
/// rounding interval (`1.4286` reads as `10/7`).
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("`{s}` is not a rational number"));
    if let Some((a, b)) = s.split_once('/') {
        let (a, b): (i128, i128) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if b == 0 {
            return Err(bad());
        }
        return Ok(rat(a, b));
    }
    let (neg, body) = s.strip_prefix('-').map_or((false, s), |b| (true, b));
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 30 {
        return Err(bad());
    }
    let scale = 10i128.pow(frac.len() as u32);
    let digits: i128 = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let exact = rat(digits, scale);
    let value = if frac.len() >= 4 {
        let half = rat(1, 2 * scale);
        simplest_between(exact - half, exact + half)
    } else {
        exact
    };
    Ok(if neg { -value } else { value })
}

/// Smallest-denominator rational in the open interval `(lo, hi)`, `0 <= lo < hi`.
fn simplest_between(lo: Rational, hi: Rational) -> Rational {
    let fl = lo.floor();
    if fl + 1 < hi {
        return fl + 1;
    }
    if lo == fl {
        return fl + ((hi - fl).recip().floor() + Rational::one()).recip();
    }
    fl + simplest_between((hi - fl).recip(), (lo - fl).recip()).recip()
}

pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// An exponent in `(0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exponent {
    Finite(Rational),
    Infinite,
}

impl Exponent {
    pub fn int(v: i128) -> Self {
        Self::Finite(Rational::from_integer(v))
    }

    pub fn ratio(num: i128, den: i128) -> Self {
        Self::Finite(rat(num, den))
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        if x.is_infinite() && x > 0.0 {
            Ok(Self::Infinite)
        } else {
            Ok(Self::Finite(rational_from_f64(x)?))
        }
    }

    /// `1/q`, with `1/∞ = 0`.
    pub fn recip(&self) -> Rational {
        match self {
            Self::Finite(q) => q.recip(),
            Self::Infinite => Rational::zero(),
        }
    }

    /// Exponent with reciprocal `inv`; nonpositive reciprocals give `∞`.
    pub fn from_recip(inv: Rational) -> Self {
        if inv <= Rational::zero() { Self::Infinite } else { Self::Finite(inv.recip()) }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Self::Finite(q) => to_f64(q),
            Self::Infinite => f64::INFINITY,
        }
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Exponent {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::Finite(a), Self::Finite(b)) => a.cmp(b),
            (Self::Finite(_), Self::Infinite) => Ordering::Less,
            (Self::Infinite, Self::Finite(_)) => Ordering::Greater,
            (Self::Infinite, Self::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(q) => write!(f, "{q}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// `[lo, hi]` or `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Interval {
    pub lo: Exponent,
    pub hi: Exponent,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, r: Exponent) -> bool {
        r >= self.lo && if self.hi_closed { r <= self.hi } else { r < self.hi }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}{}", self.lo, self.hi, if self.hi_closed { "]" } else { ")" })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SobolevIndices {
    /// `q*`: `1/q* = 1/q - 1/(n+2)`.
    pub upper: Exponent,
    /// `q_*`: `1/q_* = 1/q + 1/(n+2)`.
    pub lower: Exponent,
    /// `q**`: `1/q** = 1/q - 2/(n+2)`.
    pub double_upper: Exponent,
    pub i_star: Interval,
    pub i_double_star: Interval,
}

fn conjugate_interval(q: Exponent, threshold: Rational, target: Exponent) -> Interval {
    match q {
        Exponent::Finite(v) if v < threshold => Interval { lo: q, hi: target, hi_closed: true },
        Exponent::Finite(v) if v == threshold => Interval { lo: q, hi: Exponent::Infinite, hi_closed: false },
        _ => Interval { lo: q, hi: Exponent::Infinite, hi_closed: true },
    }
}

pub fn sobolev_indices(q: Exponent, n: u32) -> Result<SobolevIndices> {
    if q < Exponent::int(1) {
        return Err(Error::InvalidParams(format!("q = {q} must be >= 1")));
    }
    if n == 0 {
        return Err(Error::InvalidParams("dimension must be positive".into()));
    }
    let np2 = Rational::from_integer(n as i128 + 2);
    let inv = q.recip();
    let upper = Exponent::from_recip(inv - np2.recip());
    let lower = Exponent::from_recip(inv + np2.recip());
    let double_upper = Exponent::from_recip(inv - rat(2, 1) / np2);
    Ok(SobolevIndices {
        upper,
        lower,
        double_upper,
        i_star: conjugate_interval(q, np2, upper),
        i_double_star: conjugate_interval(q, np2 / 2, double_upper),
    })
}

/// `2* = 2(n+2)/n`.
pub fn two_star(n: u32) -> Rational {
    rat(2 * (n as i128 + 2), n as i128)
}

/// `2_* = 2(n+2)/(n+4)`.
pub fn two_lower_star(n: u32) -> Rational {
    rat(2 * (n as i128 + 2), n as i128 + 4)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RdInterval {
    pub minus: Rational,
    pub plus: Rational,
    pub nonempty: bool,
}

/// `RD₋ = (n+2)ρ/2`, `RD₊ = n(1+ρ)ρ/2`.
pub fn rd_interval(n: u32, rho: Rational) -> Result<RdInterval> {
    if rho <= Rational::zero() {
        return Err(Error::InvalidParams(format!("growth exponent {rho} must be positive")));
    }
    let nn = Rational::from_integer(n as i128);
    let minus = (nn + 2) * rho / 2;
    let plus = nn * (Rational::one() + rho) * rho / 2;
    Ok(RdInterval { nonempty: minus < plus, minus, plus })
}

/// `1/p(α, A) = 1 + α - α/Q`; defined for `α >= -1`.
pub fn inverse_p_critical(alpha: Rational, q_adj_dual: Rational) -> Result<Rational> {
    if q_adj_dual < Rational::one() || q_adj_dual >= rat(2, 1) {
        return Err(Error::InvalidParams(format!("Q = {q_adj_dual} must lie in [1, 2)")));
    }
    if alpha < -Rational::one() {
        return Err(Error::InvalidParams(format!("alpha = {alpha} below -1")));
    }
    Ok(Rational::one() + alpha - alpha / q_adj_dual)
}

/// `p(α, A)` for `α > -1`.
pub fn p_critical(alpha: Rational, q_adj_dual: Rational) -> Result<Exponent> {
    if alpha <= -Rational::one() {
        return Err(Error::InvalidParams(format!("p(alpha, A) needs alpha > -1, got {alpha}")));
    }
    Ok(Exponent::from_recip(inverse_p_critical(alpha, q_adj_dual)?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScalingParams {
    pub sigma: Rational,
    pub alpha: Rational,
    /// `α ∈ (-1, 0)`.
    pub admissible: bool,
}

/// `σ = 2/ρ` and the critical smoothness `α = n/p - 2/ρ`.
pub fn scaling_params(n: u32, p: Exponent, rho: Rational) -> Result<ScalingParams> {
    if rho <= Rational::zero() || p <= Exponent::int(1) {
        return Err(Error::InvalidParams("need p > 1 and rho > 0".into()));
    }
    let sigma = rat(2, 1) / rho;
    let alpha = Rational::from_integer(n as i128) * p.recip() - sigma;
    let admissible = alpha > -Rational::one() && alpha < Rational::zero();
    Ok(ScalingParams { sigma, alpha, admissible })
}

pub type Point = (Rational, Rational);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskCell {
    pub inv_p: f64,
    pub alpha: f64,
    pub admissible: bool,
}

/// Admissible `(1/p, α)` region and the critical segment inside it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Region {
    pub n: u32,
    pub rho: Rational,
    pub q_adj_dual: Rational,
    pub inv_rd_plus: Rational,
    #[serde(serialize_with = "ser_points")]
    pub vertices: Vec<Point>,
    #[serde(serialize_with = "ser_segment")]
    pub critical_segment: Option<(Point, Point)>,
    pub resolution: usize,
    pub mask: Vec<MaskCell>,
}

fn ser_points<S: Serializer>(v: &[Point], s: S) -> std::result::Result<S::Ok, S::Error> {
    let f: Vec<(f64, f64)> = v.iter().map(|(a, b)| (to_f64(a), to_f64(b))).collect();
    f.serialize(s)
}

fn ser_segment<S: Serializer>(v: &Option<(Point, Point)>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let f = v.map(|(a, b)| [(to_f64(&a.0), to_f64(&a.1)), (to_f64(&b.0), to_f64(&b.1))]);
    f.serialize(s)
}

/// Half-plane `a x + b y <= c`.
#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    a: Rational,
    b: Rational,
    c: Rational,
}

impl HalfPlane {
    fn value(&self, p: &Point) -> Rational {
        self.a * p.0 + self.b * p.1 - self.c
    }
}

fn region_constraints(inv_rd_plus: Rational, q_adj_dual: Rational) -> Vec<HalfPlane> {
    let one = Rational::one();
    let zero = Rational::zero();
    vec![
        HalfPlane { a: -one, b: zero, c: -inv_rd_plus }, // x >= 1/RD+
        HalfPlane { a: one, b: zero, c: one },           // x <= 1
        HalfPlane { a: zero, b: -one, c: one },          // y >= -1
        HalfPlane { a: zero, b: one, c: zero },          // y <= 0
        // x <= 1 + y - y/Q
        HalfPlane { a: one, b: -(one - q_adj_dual.recip()), c: one },
    ]
}

fn clip_polygon(poly: &[Point], h: &HalfPlane) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let (vc, vn) = (h.value(&cur), h.value(&next));
        if vc <= Rational::zero() {
            out.push(cur);
        }
        if (vc < Rational::zero() && vn > Rational::zero()) || (vc > Rational::zero() && vn < Rational::zero()) {
            let s = vc / (vc - vn);
            out.push((cur.0 + s * (next.0 - cur.0), cur.1 + s * (next.1 - cur.1)));
        }
    }
    out.dedup();
    if out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    out
}

/// Region `{1/RD₊ < 1/p < 1, -1 < α < 0, 1/p <= 1 + α - α/Q}` as a polygon,
/// the critical segment `α = n/p - 2/ρ` clipped to it, and a
/// `resolution × resolution` cell-center mask over `[0,1] × [-1,0]`.
pub fn admissible_region(n: u32, rho: Rational, q_adj_dual: Rational, resolution: usize) -> Result<Region> {
    let rd = rd_interval(n, rho)?;
    inverse_p_critical(Rational::zero(), q_adj_dual)?;
    let inv_rd_plus = rd.plus.recip();
    let one = Rational::one();
    let zero = Rational::zero();
    let rect = vec![(one, zero), (one, -one), (inv_rd_plus, -one), (inv_rd_plus, zero)];
    let mut poly = if inv_rd_plus < one { rect } else { Vec::new() };
    for h in region_constraints(inv_rd_plus, q_adj_dual).iter().skip(4) {
        if !poly.is_empty() {
            poly = clip_polygon(&poly, h);
        }
    }

    // Cyrus-Beck clip of the critical line y = n x - 2/ρ over x ∈ [0, 1].
    let nn = Rational::from_integer(n as i128);
    let sigma = rat(2, 1) / rho;
    let line = |x: Rational| (x, nn * x - sigma);
    let (p0, p1) = (line(zero), line(one));
    let (mut t0, mut t1) = (zero, one);
    let mut empty = poly.is_empty();
    for h in region_constraints(inv_rd_plus, q_adj_dual) {
        let (v0, v1) = (h.value(&p0), h.value(&p1));
        let denom = v1 - v0;
        if denom.is_zero() {
            if v0 > zero {
                empty = true;
            }
            continue;
        }
        let t = -v0 / denom;
        if denom > zero {
            t1 = t1.min(t);
        } else {
            t0 = t0.max(t);
        }
    }
    let lerp = |t: Rational| (p0.0 + t * (p1.0 - p0.0), p0.1 + t * (p1.1 - p0.1));
    let critical_segment = (!empty && t0 <= t1).then(|| (lerp(t0), lerp(t1)));

    let mut mask = Vec::with_capacity(resolution * resolution);
    if resolution > 0 {
        let res = resolution as i128;
        for j in 0..res {
            for i in 0..res {
                let x = rat(2 * i + 1, 2 * res);
                let y = -rat(2 * j + 1, 2 * res);
                mask.push(MaskCell {
                    inv_p: to_f64(&x),
                    alpha: to_f64(&y),
                    admissible: region_contains(x, y, inv_rd_plus, q_adj_dual),
                });
            }
        }
    }
    Ok(Region {
        n,
        rho,
        q_adj_dual,
        inv_rd_plus,
        vertices: poly,
        critical_segment,
        resolution,
        mask,
    })
}

/// The three defining inequalities of the region (strict where open).
pub fn region_contains(inv_p: Rational, alpha: Rational, inv_rd_plus: Rational, q_adj_dual: Rational) -> bool {
    let one = Rational::one();
    inv_p > inv_rd_plus
        && inv_p < one
        && alpha > -one
        && alpha < Rational::zero()
        && inv_p <= one + alpha - alpha / q_adj_dual
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DuhamelOp {
    /// `ℒ¹`
    Source,
    /// `∇ℒ¹`
    GradSource,
    /// `ℛ^{1/2}`
    Div,
    /// `∇ℛ^{1/2}`
    GradDiv,
}

impl DuhamelOp {
    /// Singularity parameter of the table row.
    pub fn kappa(&self) -> Rational {
        match self {
            Self::Source => Rational::one(),
            Self::GradSource | Self::Div => rat(1, 2),
            Self::GradDiv => Rational::zero(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Source => "L1",
            Self::GradSource => "grad_L1",
            Self::Div => "R1/2",
            Self::GradDiv => "grad_R1/2",
        }
    }
}

impl std::str::FromStr for DuhamelOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L1" | "source" => Ok(Self::Source),
            "grad_L1" | "grad_source" => Ok(Self::GradSource),
            "R1/2" | "div" => Ok(Self::Div),
            "grad_R1/2" | "grad_div" => Ok(Self::GradDiv),
            other => Err(Error::Parse(format!("unknown Duhamel operator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Clause {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub admissible: bool,
    pub clauses: Vec<Clause>,
}

impl Verdict {
    fn from_clauses(clauses: Vec<Clause>) -> Self {
        Self { admissible: clauses.iter().all(|c| c.holds), clauses }
    }

    pub fn failed(&self) -> Vec<&str> {
        self.clauses.iter().filter(|c| !c.holds).map(|c| c.name.as_str()).collect()
    }
}

fn clause(name: impl Into<String>, holds: bool) -> Clause {
    Clause { name: name.into(), holds }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TableQuery {
    pub op: DuhamelOp,
    pub regular: bool,
    pub kappa: Rational,
    pub q: Exponent,
    pub r: Exponent,
    pub q_tilde: Option<Exponent>,
    pub n: u32,
    /// `q(A)`.
    pub q_a: Exponent,
    /// `q(A*)'`.
    pub q_adj_dual: Rational,
}

/// Evaluates the `(κ, q, r)` restrictions of the Duhamel mapping table and,
/// when `q_tilde` is given, the bootstrap table.
pub fn duhamel_table_check(query: &TableQuery) -> Result<Verdict> {
    let TableQuery { op, regular, kappa, q, r, q_tilde, n, q_a, q_adj_dual } = *query;
    let one = Exponent::int(1);
    let two = Exponent::int(2);
    let big_q = Exponent::Finite(q_adj_dual);
    let idx = sobolev_indices(q.max(one), n)?;
    let mut c = vec![
        clause("q in (1, inf]", q > one),
        clause("r in (1, inf]", r > one),
        clause("r >= q", r >= q),
        clause(format!("kappa = {}", op.kappa()), kappa == op.kappa()),
    ];
    match (op, regular) {
        (DuhamelOp::Source, _) => c.push(clause("r in I**(q)", idx.i_double_star.contains(r))),
        (DuhamelOp::GradSource, false) => {
            c.push(clause("r in I*(q)", idx.i_star.contains(r)));
            c.push(clause("r < q(A)", r < q_a));
        }
        (DuhamelOp::Div, false) => {
            c.push(clause("r in I*(q)", idx.i_star.contains(r)));
            c.push(clause("q > q(A*)'", q > big_q));
        }
        (DuhamelOp::GradSource | DuhamelOp::Div, true) => {
            c.push(clause("r in I*(q)", idx.i_star.contains(r)));
            c.push(clause("r < inf", r.is_finite()));
        }
        (DuhamelOp::GradDiv, false) => c.push(clause("q = r = 2", q == two && r == two)),
        (DuhamelOp::GradDiv, true) => c.push(clause("q = r in (1, inf)", q == r && q > one && q.is_finite())),
    }
    if let Some(qt) = q_tilde {
        c.push(clause("1 < q~ <= q", qt > one && qt <= q));
        match (op, regular) {
            (DuhamelOp::Source, _) | (DuhamelOp::Div, true) => {}
            (DuhamelOp::GradSource, false) => c.push(clause("bootstrap: r < q(A)", r < q_a)),
            (DuhamelOp::GradSource, true) => c.push(clause("bootstrap: r < inf", r.is_finite())),
            (DuhamelOp::Div, false) => c.push(clause("bootstrap: q~ > q(A*)'", qt > big_q)),
            (DuhamelOp::GradDiv, false) => c.push(clause("bootstrap: q~ = r = 2", qt == two && r == two)),
            (DuhamelOp::GradDiv, true) => {
                c.push(clause("bootstrap: q~ = r in (1, inf)", qt == r && qt > one && qt.is_finite()))
            }
        }
    }
    Ok(Verdict::from_clauses(c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellposedReport {
    pub beta: Rational,
    pub verdict: Verdict,
}

/// Parameter relations for the reaction-diffusion fixed point, with
/// `β = n(1+ρ)/(2r) - 1/ρ - 1/2`.
pub fn rd_wellposed_check(
    n: u32,
    rho: Rational,
    p: Exponent,
    alpha: Rational,
    r: Exponent,
    q: Exponent,
    q_adj_dual: Rational,
) -> Result<WellposedReport> {
    let rd = rd_interval(n, rho)?;
    let one = Rational::one();
    let half = rat(1, 2);
    let nn = Rational::from_integer(n as i128);
    let beta = nn * (one + rho) * r.recip() / 2 - rho.recip() - half;
    let two_beta_plus_one = beta * 2 + one;
    let inv_p_thr = if two_beta_plus_one > -one { Some(inverse_p_critical(two_beta_plus_one, q_adj_dual)?) } else { None };
    let inv_p_alpha = if alpha > -one { Some(inverse_p_critical(alpha, q_adj_dual)?) } else { None };
    let p_inv = p.recip();
    let clauses = vec![
        clause("rho > 2/n", rho > rat(2, 1) / nn),
        clause("(a) beta > -1/2", beta > -half),
        clause("(b) p >= p(2 beta + 1, A)", inv_p_thr.is_some_and(|t| p_inv <= t)),
        clause("(c) p > r/(1+rho)", match (p, r) {
            (Exponent::Infinite, Exponent::Finite(_)) => true,
            (_, Exponent::Infinite) => false,
            (Exponent::Finite(pv), Exponent::Finite(rv)) => pv > rv / (one + rho),
        }),
        clause("RD- < r < RD+", r > Exponent::Finite(rd.minus) && r < Exponent::Finite(rd.plus)),
        clause("r >= p", r >= p),
        clause("q > RD-", q > Exponent::Finite(rd.minus)),
        clause("1 < p < RD+", p > Exponent::int(1) && p < Exponent::Finite(rd.plus)),
        clause("alpha in (-1, 0)", alpha > -one && alpha < Rational::zero()),
        clause("2/rho = n/p - alpha", rat(2, 1) / rho == nn * p_inv - alpha),
        clause("p >= p(alpha, A)", inv_p_alpha.is_some_and(|t| p_inv <= t)),
    ];
    Ok(WellposedReport { beta, verdict: Verdict::from_clauses(clauses) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RHParams {
    pub n: u32,
    pub rho: Rational,
    pub q: Rational,
    pub p_sharp: Rational,
    pub q_sharp: Rational,
    pub r_sharp: Rational,
    pub s_sharp: Rational,
    pub alpha_sharp: Rational,
    pub beta1: Rational,
    pub beta2: Rational,
    /// `q(4/n - ρ) / (4q/n - 2* ρ)`.
    pub theta: Rational,
    /// `α♯ (1 - β₂) / (1 - β₁)`.
    pub theta_holder: Rational,
    pub dilation: f64,
}

impl RHParams {
    pub fn theta_f64(&self) -> f64 {
        to_f64(&self.theta)
    }

    /// Re-checks every structural relation; used before improved RH checks.
    pub fn validate(&self) -> Result<()> {
        let zero = Rational::zero();
        let one = Rational::one();
        let ok = self.s_sharp < self.r_sharp
            && self.r_sharp < self.p_sharp
            && self.s_sharp < self.q_sharp
            && self.q_sharp < self.p_sharp
            && self.beta1 > zero
            && self.beta1 < one
            && self.beta2 > zero
            && self.beta2 < one
            && self.beta2 * self.alpha_sharp == self.beta1
            && self.theta == self.theta_holder
            && self.theta >= one
            && self.dilation > 1.0
            && self.dilation < 3.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("inconsistent reverse-Hölder exponents: {self:?}")))
        }
    }
}

/// Exponent bundle of the improved reverse-Hölder inequality.
pub fn rh_exponents(n: u32, rho: Rational, q: Rational, dilation: f64) -> Result<RHParams> {
    let nn = Rational::from_integer(n as i128);
    let four_over_n = rat(4, 1) / nn;
    if !(rho > rat(2, 1) / nn && rho < four_over_n) {
        return Err(Error::InvalidParams(format!("rho = {rho} outside (2/n, 4/n)")));
    }
    let rd = rd_interval(n, rho)?;
    let lower = two_lower_star(n);
    let one = Rational::one();
    let upper_q = lower * (one + rho);
    if !(q > rd.minus && q < upper_q) {
        return Err(Error::InvalidParams(format!("q = {q} outside (RD-, 2_*(1+rho)) = ({}, {upper_q})", rd.minus)));
    }
    let p_sharp = two_star(n);
    let q_sharp = upper_q;
    let r_sharp = lower * q / (q - lower * rho);
    let s_sharp = q;
    let alpha_sharp = one + rho;
    let beta1 = p_sharp * (r_sharp - s_sharp) / (r_sharp * (p_sharp - s_sharp));
    let beta2 = p_sharp * (q_sharp - s_sharp) / (q_sharp * (p_sharp - s_sharp));
    let theta = q * (four_over_n - rho) / (q * four_over_n - p_sharp * rho);
    let theta_holder = alpha_sharp * (one - beta2) / (one - beta1);
    let params = RHParams {
        n,
        rho,
        q,
        p_sharp,
        q_sharp,
        r_sharp,
        s_sharp,
        alpha_sharp,
        beta1,
        beta2,
        theta,
        theta_holder,
        dilation,
    };
    params.validate()?;
    Ok(params)
}

/// Float summary of every exponent quantity for one `(n, ρ, q)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentReport {
    pub n: u32,
    pub rho: f64,
    pub sigma: f64,
    pub rd_minus: f64,
    pub rd_plus: f64,
    pub rd_nonempty: bool,
    pub q: String,
    pub q_star: String,
    pub q_lower_star: String,
    pub i_star: String,
    pub i_double_star: String,
}

pub fn exponent_report(n: u32, rho: Rational, q: Exponent) -> Result<ExponentReport> {
    let rd = rd_interval(n, rho)?;
    let idx = sobolev_indices(q, n)?;
    Ok(ExponentReport {
        n,
        rho: to_f64(&rho),
        sigma: to_f64(&(rat(2, 1) / rho)),
        rd_minus: to_f64(&rd.minus),
        rd_plus: to_f64(&rd.plus),
        rd_nonempty: rd.nonempty,
        q: q.to_string(),
        q_star: idx.upper.to_string(),
        q_lower_star: idx.lower.to_string(),
        i_star: idx.i_star.to_string(),
        i_double_star: idx.i_double_star.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("10/7").unwrap(), rat(10, 7));
        assert_eq!(parse_rational("1.4286").unwrap(), rat(10, 7));
        assert_eq!(parse_rational("1.2").unwrap(), rat(6, 5));
        assert_eq!(parse_rational("0.3").unwrap(), rat(3, 10));
        assert_eq!(parse_rational("-0.5").unwrap(), rat(-1, 2));
        assert_eq!(parse_rational("0.2525").unwrap(), rat(25, 99));
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        for bad in ["", "x", "1/0", "1.2.3", "--1"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn sobolev_examples() {
        let s = sobolev_indices(Exponent::int(2), 3).unwrap();
        assert_eq!(s.upper, Exponent::ratio(10, 3));
        assert_eq!(s.lower, Exponent::ratio(10, 7));
        assert_eq!(s.double_upper, Exponent::int(10));
        let at = sobolev_indices(Exponent::int(5), 3).unwrap();
        assert_eq!(at.i_star, Interval { lo: Exponent::int(5), hi: Exponent::Infinite, hi_closed: false });
        let above = sobolev_indices(Exponent::int(6), 3).unwrap();
        assert_eq!(above.i_star, Interval { lo: Exponent::int(6), hi: Exponent::Infinite, hi_closed: true });
        assert!(above.i_star.contains(Exponent::Infinite));
        assert!(!at.i_star.contains(Exponent::Infinite));
    }

    #[test]
    fn rd_examples() {
        let r = rd_interval(3, rat(6, 5)).unwrap();
        assert_eq!((r.minus, r.plus), (rat(3, 1), rat(99, 25)));
        assert!((to_f64(&r.plus.recip()) - 0.2525).abs() < 5e-5);
        let r = rd_interval(3, rat(2, 1)).unwrap();
        assert_eq!((r.minus, r.plus), (rat(5, 1), rat(9, 1)));
        assert!(!rd_interval(3, rat(1, 2)).unwrap().nonempty);
    }

    #[test]
    fn p_critical_examples() {
        assert_eq!(p_critical(rat(0, 1), rat(10, 7)).unwrap(), Exponent::int(1));
        assert_eq!(inverse_p_critical(rat(-1, 1), rat(10, 7)).unwrap(), rat(7, 10));
        assert_eq!(p_critical(rat(-9, 10), rat(1, 1)).unwrap(), Exponent::int(1));
        assert!(p_critical(rat(-1, 1), rat(10, 7)).is_err());
    }

    #[test]
    fn scaling_examples() {
        let s = scaling_params(3, Exponent::int(4), rat(2, 1)).unwrap();
        assert_eq!((s.sigma, s.alpha, s.admissible), (rat(1, 1), rat(-1, 4), true));
        let s = scaling_params(3, Exponent::ratio(9, 5), rat(6, 5)).unwrap();
        assert_eq!(s.alpha, rat(0, 1));
        assert!(!s.admissible);
    }

    #[test]
    fn region_for_six_fifths() {
        let r = admissible_region(3, rat(6, 5), rat(10, 7), 20).unwrap();
        let third = rat(25, 99);
        assert_eq!(
            r.vertices,
            vec![(rat(1, 1), rat(0, 1)), (rat(7, 10), rat(-1, 1)), (third, rat(-1, 1)), (third, rat(0, 1))]
        );
        let (a, b) = r.critical_segment.unwrap();
        assert_eq!(a, (third, rat(-10, 11)));
        assert_eq!(b, (rat(5, 9), rat(0, 1)));
        let low = admissible_region(3, rat(3, 4), rat(10, 7), 0).unwrap();
        assert!((to_f64(&low.inv_rd_plus) - 0.50794).abs() < 5e-5);
        let (a, b) = low.critical_segment.unwrap();
        assert_eq!(a, (rat(5, 9), rat(-1, 1)));
        assert_eq!(b, (rat(8, 9), rat(0, 1)));
    }

    #[test]
    fn table_examples() {
        let base = TableQuery {
            op: DuhamelOp::Div,
            regular: false,
            kappa: rat(1, 2),
            q: Exponent::int(2),
            r: Exponent::int(2),
            q_tilde: None,
            n: 3,
            q_a: Exponent::Infinite,
            q_adj_dual: rat(10, 7),
        };
        assert!(duhamel_table_check(&base).unwrap().admissible);
        let gd = TableQuery { op: DuhamelOp::GradDiv, kappa: rat(0, 1), q: Exponent::int(3), r: Exponent::int(3), ..base };
        let v = duhamel_table_check(&gd).unwrap();
        assert_eq!(v.failed(), vec!["q = r = 2"]);
        let l1 = TableQuery { op: DuhamelOp::Source, kappa: rat(1, 1), r: Exponent::int(10), ..base };
        assert!(duhamel_table_check(&l1).unwrap().admissible);
        let too_far = TableQuery { r: Exponent::int(11), ..l1 };
        assert!(!duhamel_table_check(&too_far).unwrap().admissible);
    }

    #[test]
    fn wellposed_example() {
        let w = rd_wellposed_check(3, rat(2, 1), Exponent::int(4), rat(-1, 4), Exponent::ratio(11, 2), Exponent::int(6), rat(10, 7))
            .unwrap();
        assert_eq!(w.beta, rat(-2, 11));
        assert!(w.verdict.clauses.iter().find(|c| c.name.starts_with("(a)")).unwrap().holds);
        assert!(w.verdict.clauses.iter().find(|c| c.name.starts_with("(c)")).unwrap().holds);
        let edge = rd_wellposed_check(3, rat(2, 1), Exponent::int(4), rat(-1, 4), Exponent::int(9), Exponent::int(6), rat(10, 7))
            .unwrap();
        assert_eq!(edge.beta, rat(-1, 2));
        assert!(edge.verdict.failed().contains(&"(a) beta > -1/2"));
    }

    #[test]
    fn rh_worked_case() {
        let rh = rh_exponents(2, rat(3, 2), rat(16, 5), 1.5).unwrap();
        assert_eq!(rh.p_sharp, rat(4, 1));
        assert_eq!(rh.q_sharp, rat(10, 3));
        assert_eq!(rh.r_sharp, rat(32, 9));
        assert_eq!((rh.beta1, rh.beta2), (rat(1, 2), rat(1, 5)));
        assert_eq!(rh.alpha_sharp, rat(5, 2));
        assert_eq!((rh.theta, rh.theta_holder), (rat(4, 1), rat(4, 1)));
        assert!(rh_exponents(2, rat(3, 2), rat(17, 5), 1.5).is_err());
    }
}
