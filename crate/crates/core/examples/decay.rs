// Restricted fractional integrals: norm decay in k against -(gamma0 + 1).
use roughheat::duhamel::decay_rate_probe;

fn main() -> roughheat::Result<()> {
    for g0 in [-0.5, 0.0, 1.0, 2.0] {
        let rep = decay_rate_probe(0.75, g0, g0 + 0.75, 2.0, 2.0, &[1, 2, 3, 4, 5, 6], 8, 3)?;
        println!("gamma0 = {g0:>4}: slope {:.4} (oracle {:.4}, target {:.4})", rep.slope, rep.oracle_slope, rep.target);
    }
    Ok(())
}
