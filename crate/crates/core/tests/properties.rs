use std::sync::Arc;

use proptest::prelude::*;

use roughheat::coefficients::{generate_field, CoefficientKind, CoefficientSpec};
use roughheat::ensemble::{probe_field, BandLimited, EnsembleSpec};
use roughheat::exponents::{parse_rational, rat, rd_interval, rh_exponents, sobolev_indices, two_lower_star, Exponent};
use roughheat::geometry::{GridSpec, SpaceTimeField, TimeLadder};
use roughheat::operator::{assemble_operator, DiscreteOperator};
use roughheat::solver::{picard_solve, NonlinearitySpec, PicardOptions};
use roughheat::spaces::{besov_norm, weighted_lp_norm, z_norm, BesovParams, LPLadder, ZParams};

fn checker(dim: usize, n: usize, high: f64, seed: u64) -> DiscreteOperator {
    let g = GridSpec::new(dim, n, 8.0).unwrap();
    let spec = CoefficientSpec { kind: CoefficientKind::Checkerboard, contrast: (1.0, high), cells: 4, seed, ..Default::default() };
    assemble_operator(&generate_field(&g, &spec).unwrap(), &g).unwrap()
}

fn field(seed: u64) -> SpaceTimeField {
    let g = GridSpec::new(1, 16, 8.0).unwrap();
    let ladder = Arc::new(TimeLadder::new(1.0, 4, 4).unwrap());
    probe_field(1, 8.0, &ladder, &EnsembleSpec::default(), seed).sample(&g, &ladder)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn z_norm_with_equal_exponents_is_weighted_lp(seed in 0u64..10_000, p in 1.1f64..6.0, beta in -0.9f64..1.0) {
        let u = field(seed);
        let z = z_norm(&u, &ZParams::new(p, p, beta, 1.0).unwrap());
        prop_assert!(rel(z, weighted_lp_norm(&u, p, beta, 1.0)) < 1e-10);
    }

    #[test]
    fn z_norm_nested_and_homogeneous(seed in 0u64..10_000, p in 1.1f64..6.0, beta in -0.9f64..1.0, c in -5.0f64..5.0) {
        let u = field(seed);
        let z = |q: f64| z_norm(&u, &ZParams::new(p, q, beta, f64::INFINITY).unwrap());
        let (a, b, inf) = (z(2.0), z(4.0), z(f64::INFINITY));
        prop_assert!(a <= b * (1.0 + 1e-12) && b <= inf * (1.0 + 1e-12));
        let params = ZParams::new(p, 2.0, beta, f64::INFINITY).unwrap();
        prop_assert!(rel(z_norm(&u.scaled(c), &params), c.abs() * a) < 1e-12);
    }

    #[test]
    fn semigroup_conserves_mass_and_contracts(seed in 0u64..1000, high in 1.0f64..50.0, t in 1e-3f64..2.0, s in 1e-3f64..2.0) {
        let op = checker(1, 32, high, seed);
        let f = BandLimited::random(1, 8.0, 0, 4, 5, seed).sample(op.grid());
        let a = op.semigroup_apply(t, &f).unwrap();
        let mass: f64 = f.iter().sum();
        let scale: f64 = f.iter().map(|v| v.abs()).sum();
        prop_assert!((a.iter().sum::<f64>() - mass).abs() <= 1e-10 * scale);
        let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(sup(&a) <= sup(&f) * (1.0 + 1e-12));
        let composed = op.semigroup_apply(s, &a).unwrap();
        let direct = op.semigroup_apply(t + s, &f).unwrap();
        let gap = composed.iter().zip(&direct).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-9 * sup(&f));
    }

    #[test]
    fn semigroup_preserves_positivity(seed in 0u64..1000, high in 1.0f64..50.0, t in 1e-3f64..1.0) {
        let op = checker(2, 8, high, seed);
        let f: Vec<f64> = BandLimited::random(2, 8.0, 1, 2, 3, seed).sample(op.grid()).iter().map(|v| v.abs()).collect();
        let a = op.semigroup_apply(t, &f).unwrap();
        let top = f.iter().cloned().fold(0.0, f64::max);
        prop_assert!(a.iter().all(|&v| v >= -1e-12 * top));
    }

    #[test]
    fn operator_is_symmetric_and_nonnegative(seed in 0u64..1000, high in 1.0f64..50.0) {
        let op = checker(2, 8, high, seed);
        let u = BandLimited::random(2, 8.0, 0, 3, 4, seed).sample(op.grid());
        let v = BandLimited::random(2, 8.0, 0, 3, 4, seed + 1).sample(op.grid());
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (lu, lv) = (op.apply(&u), op.apply(&v));
        prop_assert!((dot(&lu, &v) - dot(&u, &lv)).abs() <= 1e-10 * (1.0 + dot(&lu, &lu).sqrt() * dot(&v, &v).sqrt()));
        prop_assert!(dot(&lu, &u) >= -1e-10);
    }

    #[test]
    fn besov_norm_is_homogeneous(seed in 0u64..1000, c in -4.0f64..4.0, alpha in -0.9f64..-0.1, p in 1.5f64..6.0) {
        let g = GridSpec::new(1, 64, 16.0).unwrap();
        let u0 = BandLimited::random(1, 16.0, 1, 8, 3, seed).sample(&g);
        let params = BesovParams::new(alpha, p).unwrap();
        let ladder = LPLadder::new(&g);
        let scaled: Vec<f64> = u0.iter().map(|v| c * v).collect();
        prop_assert!(rel(besov_norm(&scaled, &params, &ladder), c.abs() * besov_norm(&u0, &params, &ladder)) < 1e-10);
    }

    #[test]
    fn power_nonlinearity_bounds_hold(rho in 0.1f64..4.0, u in -5.0f64..5.0, v in -5.0f64..5.0) {
        let f = NonlinearitySpec::power(rho, 1.0).unwrap();
        let (fu, fv) = (f.eval(u).unwrap(), f.eval(v).unwrap());
        let slack = 1e-12 * (1.0 + fu.abs() + fv.abs());
        prop_assert!(fu.abs() <= f.growth_bound(u) + slack);
        prop_assert!((fu - fv).abs() <= f.lipschitz_bound(u, v) + slack);
    }

    #[test]
    fn allen_cahn_bounds_hold(u in -3.0f64..3.0, v in -3.0f64..3.0) {
        let f = NonlinearitySpec::allen_cahn(3.0).unwrap();
        let (fu, fv) = (f.eval(u).unwrap(), f.eval(v).unwrap());
        prop_assert!(fu.abs() <= f.growth_bound(u) + 1e-12);
        prop_assert!((fu - fv).abs() <= f.lipschitz_bound(u, v) + 1e-12);
    }

    #[test]
    fn ladder_partitions_the_slab(horizon in 1e-3f64..10.0, depth in 1usize..10, per_rung in 1usize..12) {
        let l = TimeLadder::new(horizon, depth, per_rung).unwrap();
        let total: f64 = l.samples().iter().map(|s| s.weight).sum();
        prop_assert!(rel(total, horizon) < 1e-12);
        prop_assert!(l.nodes().windows(2).all(|w| w[1] > w[0]));
        for m in 0..depth {
            for k in l.rung_range(m) {
                let t = l.samples()[k].time;
                prop_assert!(t > l.height(m + 1) && t < l.height(m));
            }
        }
    }

    #[test]
    fn picard_is_odd_for_odd_nonlinearity(seed in 0u64..200, amp in 0.05f64..0.3) {
        let op = checker(1, 16, 10.0, 7);
        let ladder = Arc::new(TimeLadder::new(0.25, 4, 8).unwrap());
        let spec = NonlinearitySpec::power(2.0, 1.0).unwrap();
        let u0 = BandLimited::random(1, 8.0, 1, 2, 2, seed).scaled(amp).sample(op.grid());
        let neg: Vec<f64> = u0.iter().map(|v| -v).collect();
        let opts = PicardOptions { tol: 1e-13, ..Default::default() };
        let a = picard_solve(&op, &u0, &ladder, &spec, &opts).unwrap();
        let b = picard_solve(&op, &neg, &ladder, &spec, &opts).unwrap();
        let gap = a.u.values().iter().zip(b.u.values()).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-12 * (1.0 + a.u.max_abs()));
    }

    #[test]
    fn rh_exponent_identities(n in 1u32..=3, a in 1i128..996, b in 1i128..996) {
        let nn = rat(n as i128, 1);
        let rho = rat(2, 1) / nn + (rat(2, 1) / nn) * rat(a, 997);
        let lo = rd_interval(n, rho).unwrap().minus;
        let hi = two_lower_star(n) * (rat(1, 1) + rho);
        let q = lo + (hi - lo) * rat(b, 997);
        let p = rh_exponents(n, rho, q, 1.5).unwrap();
        prop_assert_eq!(p.beta2 * p.alpha_sharp, p.beta1);
        prop_assert_eq!(p.theta, p.theta_holder);
    }

    #[test]
    fn sobolev_conjugates_are_consistent(num in 1i128..200, den in 1i128..200, n in 1u32..=3) {
        prop_assume!(num >= den);
        let q = Exponent::ratio(num, den);
        let s = sobolev_indices(q, n).unwrap();
        let np2 = rat(n as i128 + 2, 1);
        prop_assert_eq!(s.lower.recip(), q.recip() + np2.recip());
        if q.recip() > np2.recip() {
            prop_assert_eq!(s.upper.recip(), q.recip() - np2.recip());
        }
    }

    #[test]
    fn rational_parsing_round_trips(num in -10_000i128..10_000, den in 1i128..10_000) {
        let r = rat(num, den);
        prop_assert_eq!(parse_rational(&format!("{num}/{den}")).unwrap(), r);
    }
}
