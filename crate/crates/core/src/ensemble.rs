//! Random probe data defined in the continuum and sampled on any grid, so
//! the same seed gives the same function at every resolution.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::{GridSpec, SpaceTimeField, TimeLadder, VectorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` derived from `seed`.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9)) ^ (index << 17)
}

/// `exp(-1/(1-s^2))` on `|s| < 1`.
pub fn mollifier(s: f64) -> f64 {
    if s.abs() >= 1.0 { 0.0 } else { (-1.0 / (1.0 - s * s)).exp() }
}

/// Derivative of [`mollifier`].
pub fn mollifier_prime(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        let d = 1.0 - s * s;
        mollifier(s) * (-2.0 * s / (d * d))
    }
}

fn torus_offset(x: f64, c: f64, length: f64) -> f64 {
    let d = (x - c).rem_euclid(length);
    if d > 0.5 * length { d - length } else { d }
}

/// Smooth bump filling most of the Whitney box at `(center, time)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WhitneyBump {
    pub center: [f64; 2],
    pub time: f64,
    pub amplitude: f64,
}

impl WhitneyBump {
    pub fn eval(&self, dim: usize, length: f64, t: f64, x: &[f64]) -> f64 {
        let (lo, hi) = (0.5 * self.time, self.time);
        let s = (2.0 * t - lo - hi) / (hi - lo);
        let a = mollifier(s);
        if a == 0.0 {
            return 0.0;
        }
        let r = self.time.sqrt().min(0.5 * length);
        let mut d2 = 0.0;
        for i in 0..dim {
            let d = torus_offset(x[i], self.center[i], length);
            d2 += d * d;
        }
        self.amplitude * a * mollifier(d2.sqrt() / r) / mollifier(0.0) / mollifier(0.0)
    }
}

/// One Fourier mode `cos(2π k·x/L + phase)` with a slow log-periodic time factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Wave {
    pub k: [i32; 2],
    pub phase: f64,
    pub amplitude: f64,
    pub time_phase: f64,
}

impl Wave {
    pub fn eval_space(&self, dim: usize, length: f64, x: &[f64]) -> f64 {
        let mut arg = self.phase;
        for i in 0..dim {
            arg += 2.0 * PI * self.k[i] as f64 * x[i] / length;
        }
        self.amplitude * arg.cos()
    }

    pub fn eval(&self, dim: usize, length: f64, t: f64, x: &[f64]) -> f64 {
        let time = 1.0 + 0.5 * (2.0 * PI * t.log2() / 3.0 + self.time_phase).sin();
        time * self.eval_space(dim, length, x)
    }
}

/// Sum of Whitney bumps plus band-limited noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeField {
    pub dim: usize,
    pub length: f64,
    pub bumps: Vec<WhitneyBump>,
    pub waves: Vec<Wave>,
}

impl ProbeField {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        self.bumps.iter().map(|b| b.eval(self.dim, self.length, t, x)).sum::<f64>()
            + self.waves.iter().map(|w| w.eval(self.dim, self.length, t, x)).sum::<f64>()
    }

    pub fn sample(&self, grid: &GridSpec, ladder: &Arc<TimeLadder>) -> SpaceTimeField {
        SpaceTimeField::from_fn(grid, ladder, |t, x| self.eval(t, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSpec {
    /// Whitney bumps per probe.
    pub bumps: usize,
    /// Noise modes per probe.
    pub waves: usize,
    /// Noise amplitude relative to the bumps.
    pub noise: f64,
    /// Largest integer wavenumber of the noise.
    pub max_wavenumber: i32,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self { bumps: 3, waves: 4, noise: 0.2, max_wavenumber: 4 }
    }
}

/// Random probe field; bump heights are log-uniform within the ladder.
pub fn probe_field(dim: usize, length: f64, ladder: &TimeLadder, spec: &EnsembleSpec, seed: u64) -> ProbeField {
    let mut r = rng(seed);
    let t_hi = ladder.horizon();
    let t_lo = ladder.height(ladder.depth().saturating_sub(1));
    let bumps = (0..spec.bumps)
        .map(|_| {
            let lt = r.random_range(t_lo.log2()..=t_hi.log2());
            WhitneyBump {
                center: [r.random_range(0.0..length), if dim == 2 { r.random_range(0.0..length) } else { 0.0 }],
                time: 2f64.powf(lt),
                amplitude: r.random_range(-1.0..1.0),
            }
        })
        .collect();
    let waves = (0..spec.waves)
        .map(|_| random_wave(&mut r, dim, 1, spec.max_wavenumber.max(1), spec.noise))
        .collect();
    ProbeField { dim, length, bumps, waves }
}

fn random_wave(r: &mut ChaCha8Rng, dim: usize, kmin: i32, kmax: i32, amplitude: f64) -> Wave {
    loop {
        let k0 = r.random_range(-kmax..=kmax);
        let k1 = if dim == 2 { r.random_range(-kmax..=kmax) } else { 0 };
        let mag2 = k0 * k0 + k1 * k1;
        if mag2 >= kmin * kmin && mag2 <= kmax * kmax {
            return Wave {
                k: [k0, k1],
                phase: r.random_range(0.0..2.0 * PI),
                amplitude: amplitude * r.random_range(0.5..1.0),
                time_phase: r.random_range(0.0..2.0 * PI),
            };
        }
    }
}

/// Scalar probe ensemble sampled on one grid.
pub fn scalar_ensemble(
    grid: &GridSpec,
    ladder: &Arc<TimeLadder>,
    spec: &EnsembleSpec,
    count: usize,
    seed: u64,
) -> Vec<SpaceTimeField> {
    (0..count)
        .map(|i| probe_field(grid.dim(), grid.length(), ladder, spec, split_seed(seed, i as u64)).sample(grid, ladder))
        .collect()
}

/// Vector probe ensemble: independent scalar probes per component.
pub fn vector_ensemble(
    grid: &GridSpec,
    ladder: &Arc<TimeLadder>,
    spec: &EnsembleSpec,
    count: usize,
    seed: u64,
) -> Vec<VectorField> {
    (0..count)
        .map(|i| {
            let comps = (0..grid.dim())
                .map(|c| {
                    let s = split_seed(split_seed(seed, i as u64), 1000 + c as u64);
                    probe_field(grid.dim(), grid.length(), ladder, spec, s).sample(grid, ladder)
                })
                .collect();
            VectorField::new(comps).expect("components share grid and ladder")
        })
        .collect()
}

/// Mean-zero band-limited datum with integer wavenumbers in `[kmin, kmax]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandLimited {
    pub dim: usize,
    pub length: f64,
    pub waves: Vec<Wave>,
}

impl BandLimited {
    pub fn random(dim: usize, length: f64, kmin: i32, kmax: i32, modes: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        let waves = (0..modes).map(|_| random_wave(&mut r, dim, kmin, kmax, 1.0)).collect();
        Self { dim, length, waves }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.waves.iter().map(|w| w.eval_space(self.dim, self.length, x)).sum()
    }

    pub fn sample(&self, grid: &GridSpec) -> Vec<f64> {
        (0..grid.len()).map(|i| self.eval(&grid.coords(i)[..grid.dim()])).collect()
    }

    /// The datum `x ↦ u0(factor x)` for an integer factor.
    pub fn dilated(&self, factor: i32) -> Self {
        let waves = self.waves.iter().map(|w| Wave { k: [w.k[0] * factor, w.k[1] * factor], ..w.clone() }).collect();
        Self { waves, ..self.clone() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let waves = self.waves.iter().map(|w| Wave { amplitude: w.amplitude * c, ..w.clone() }).collect();
        Self { waves, ..self.clone() }
    }
}
