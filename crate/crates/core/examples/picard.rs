// Constant data: the fixed point against the ODE u' = u^4.
use std::sync::Arc;

use roughheat::coefficients::{generate_field, CoefficientKind, CoefficientSpec};
use roughheat::geometry::{GridSpec, TimeLadder};
use roughheat::operator::assemble_operator;
use roughheat::solver::{ode_blowup_time, ode_solution, picard_solve, NonlinearitySpec, PicardOptions};

fn main() -> roughheat::Result<()> {
    let grid = GridSpec::new(1, 32, 8.0)?;
    let spec = CoefficientSpec { kind: CoefficientKind::Checkerboard, contrast: (1.0, 10.0), cells: 8, seed: 7, ..Default::default() };
    let op = assemble_operator(&generate_field(&grid, &spec)?, &grid)?;
    let f = NonlinearitySpec::power(3.0, 1.0)?;
    let horizon = 0.5 * ode_blowup_time(1.0, 3.0);
    let ladder = Arc::new(TimeLadder::new(horizon, 8, 64)?);
    let sol = picard_solve(&op, &vec![1.0; grid.len()], &ladder, &f, &PicardOptions { tol: 1e-12, ..Default::default() })?;
    println!("{} iterations, residual {:.2e}", sol.iterations, sol.residual);
    for (k, inc) in sol.increments.iter().enumerate() {
        println!("  increment {k}: {inc:.3e}");
    }
    for k in (0..ladder.len()).step_by(ladder.per_rung()) {
        let t = ladder.samples()[k].time;
        let exact = ode_solution(1.0, 3.0, 1.0, t);
        println!("t = {t:.5}: u = {:.8}, ode = {exact:.8}", sol.u.slice(k)[0]);
    }
    Ok(())
}
