// Heat kernel of a checkerboard medium against the identity: Gaussian fits
// and the basic semigroup certificates.
use roughheat::coefficients::{generate_field, CoefficientField, CoefficientKind, CoefficientSpec};
use roughheat::geometry::GridSpec;
use roughheat::operator::{assemble_operator, verify_gaussian_bound};

fn main() -> roughheat::Result<()> {
    let grid = GridSpec::new(1, 256, 32.0)?;
    let id = assemble_operator(&CoefficientField::identity(&grid), &grid)?;
    let spec = CoefficientSpec { kind: CoefficientKind::Checkerboard, contrast: (1.0, 10.0), cells: 16, seed: 7, ..Default::default() };
    let rough = assemble_operator(&generate_field(&grid, &spec)?, &grid)?;

    for (name, op) in [("identity", &id), ("checkerboard", &rough)] {
        let fit = verify_gaussian_bound(op, &[1.0, 4.0, 16.0], None, 16, 1)?;
        println!(
            "{name:>12}: rate {:.4}, C {:.3}, violations {} / {}, held-out max ratio {:.3}",
            fit.rate, fit.constant, fit.violations, fit.entries_checked, fit.held_out_max_ratio
        );
    }

    let f: Vec<f64> = (0..grid.len()).map(|i| if i % 17 == 0 { 1.0 } else { -0.1 }).collect();
    let a = rough.semigroup_apply(0.3, &f)?;
    let b = rough.semigroup_apply(0.2, &rough.semigroup_apply(0.1, &f)?)?;
    let mass: f64 = f.iter().sum();
    println!("mass {:.3e} -> {:.3e}", mass, a.iter().sum::<f64>());
    println!("sup {:.4} -> {:.4}", f.iter().fold(0.0f64, |m, v| m.max(v.abs())), a.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    println!("semigroup law gap {:.2e}", a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    Ok(())
}
