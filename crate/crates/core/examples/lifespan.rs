// Blowup times of c(1 + cos) data in a checkerboard medium.
use std::f64::consts::PI;

use roughheat::coefficients::{generate_field, CoefficientKind, CoefficientSpec};
use roughheat::geometry::GridSpec;
use roughheat::operator::assemble_operator;
use roughheat::pipeline::lifespan_sweep;
use roughheat::solver::{ode_blowup_time, LifespanOptions, NonlinearitySpec};

fn main() -> roughheat::Result<()> {
    let grid = GridSpec::new(1, 32, 8.0)?;
    let spec = CoefficientSpec { kind: CoefficientKind::Checkerboard, contrast: (1.0, 10.0), cells: 8, seed: 7, ..Default::default() };
    let op = assemble_operator(&generate_field(&grid, &spec)?, &grid)?;
    let f = NonlinearitySpec::power(3.0, 1.0)?;
    let u0: Vec<f64> = (0..grid.len()).map(|i| 1.0 + 0.5 * (2.0 * PI * grid.coords(i)[0] / 8.0).cos()).collect();
    let rows = lifespan_sweep(&op, &u0, &f, &LifespanOptions::default(), &[0.25, 0.5, 0.75, 1.0, 1.5, 2.0])?;
    println!("amplitude      tau   mean-ode   refine");
    for r in rows {
        println!("{:>9} {:>8.5} {:>10.5} {:>8.5}{}", r.amplitude, r.tau, ode_blowup_time(r.amplitude, 3.0), r.refinement_ratio, if r.censored { "  censored" } else { "" });
    }
    Ok(())
}
