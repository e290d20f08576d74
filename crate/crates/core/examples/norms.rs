// Z-norms of one probe field: Fubini, nesting in q, truncation in T.
use std::sync::Arc;

use roughheat::ensemble::{probe_field, EnsembleSpec};
use roughheat::geometry::{GridSpec, TimeLadder};
use roughheat::spaces::{change_of_angle_probe, weighted_lp_norm, z_norm, ZParams};

fn main() -> roughheat::Result<()> {
    let grid = GridSpec::new(1, 64, 8.0)?;
    let ladder = Arc::new(TimeLadder::new(1.0, 6, 8)?);
    let u = probe_field(1, 8.0, &ladder, &EnsembleSpec::default(), 3).sample(&grid, &ladder);

    let (p, beta) = (2.0, -0.25);
    let lp = weighted_lp_norm(&u, p, beta, 1.0);
    let z = z_norm(&u, &ZParams::new(p, p, beta, 1.0)?);
    println!("L^2_beta = {lp:.12}  Z^(2,2) = {z:.12}  gap {:.1e}", (lp - z).abs() / lp);

    for q in [1.5, 2.0, 4.0, 8.0, f64::INFINITY] {
        let full = z_norm(&u, &ZParams::new(p, q, beta, f64::INFINITY)?);
        let short = z_norm(&u, &ZParams::new(p, q, beta, 0.125)?);
        println!("q = {q:>4}: Z = {full:.6}  Z(T=1/8) = {short:.6}");
    }

    let rep = change_of_angle_probe(&u, &ZParams::new(4.0, 2.0, 0.0, f64::INFINITY)?, &[1.0, 2.0, 4.0, 8.0])?;
    println!("change of angle: slope {:.3}, bound {:.3}", rep.slope, rep.predicted);
    Ok(())
}
