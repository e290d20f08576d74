// Reverse Hölder ratios of a small 2D solution, plain and improved.
use std::sync::Arc;

use roughheat::coefficients::{generate_field, CoefficientKind, CoefficientSpec};
use roughheat::ensemble::BandLimited;
use roughheat::exponents::{rat, rh_exponents};
use roughheat::geometry::{GridSpec, TimeLadder};
use roughheat::operator::assemble_operator;
use roughheat::solver::{picard_solve, NonlinearitySpec, PicardOptions};
use roughheat::verify::{admissible_whitney_boxes, rh_check, rh_improved_check};

fn main() -> roughheat::Result<()> {
    let params = rh_exponents(2, rat(3, 2), rat(16, 5), 1.5)?;
    println!("theta = {} (two formulas: {} / {})", params.theta_f64(), params.theta, params.theta_holder);
    let spec = CoefficientSpec { kind: CoefficientKind::Checkerboard, contrast: (1.0, 10.0), cells: 8, seed: 7, ..Default::default() };
    let ladder = Arc::new(TimeLadder::new(0.25, 5, 16)?);
    let data = BandLimited::random(2, 8.0, 1, 2, 3, 142).scaled(0.3);
    for n in [8, 16] {
        let grid = GridSpec::new(2, n, 8.0)?;
        let op = assemble_operator(&generate_field(&grid, &spec)?, &grid)?;
        let sol = picard_solve(&op, &data.sample(&grid), &ladder, &NonlinearitySpec::power(1.5, 1.0)?, &PicardOptions::default())?;
        let boxes = admissible_whitney_boxes(&grid, &ladder, 1.5, 20, 3)?;
        let plain = rh_check(&sol.u, 1.5, &boxes, 1.5)?;
        let improved = rh_improved_check(&sol.u, &params, &boxes)?;
        println!("N = {n:>2}: C = {:.4}, improved C = {:.4} ({} trivial boxes)", plain.constant, improved.constant, improved.trivial_boxes);
    }
    Ok(())
}
