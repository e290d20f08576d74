// Ensemble sups of the Duhamel operators on Z-spaces at two resolutions.
use std::sync::Arc;

use roughheat::coefficients::{generate_field, CoefficientKind, CoefficientSpec};
use roughheat::duhamel::{hyper_probe, Ensemble, ProbeMode, SIOSpec, SioOperator};
use roughheat::geometry::{GridSpec, TimeLadder};
use roughheat::operator::assemble_operator;

fn main() -> roughheat::Result<()> {
    let ladder = Arc::new(TimeLadder::new(1.0, 6, 8)?);
    let spec = CoefficientSpec { kind: CoefficientKind::Checkerboard, contrast: (1.0, 10.0), cells: 8, seed: 7, ..Default::default() };
    let ens = Ensemble { count: 30, seed: 5, ..Default::default() };
    let cases = [
        SIOSpec::new(SioOperator::Source, 2.0, f64::INFINITY, 1.0)?,
        SIOSpec::new(SioOperator::GradSource, 2.0, 2.0, 0.5)?,
        SIOSpec::new(SioOperator::Div, 2.0, 2.0, 0.5)?,
    ];
    for sio in &cases {
        let mut sups = Vec::new();
        for n in [64, 128] {
            let grid = GridSpec::new(1, n, 8.0)?;
            let op = assemble_operator(&generate_field(&grid, &spec)?, &grid)?;
            let rep = hyper_probe(&op, &ladder, sio, 2.0, -0.25, &ens, ProbeMode::ZToZ)?;
            sups.push(rep.sup);
            if n == 64 && !rep.table_warnings.is_empty() {
                println!("  {}: {}", rep.op, rep.table_warnings.join("; "));
            }
        }
        println!("{:>10}: sup {:.4} (N=64), {:.4} (N=128)", sio.op.label(), sups[0], sups[1]);
    }
    Ok(())
}
