use roughheat::pipeline::{linear_cauchy_scenario, ScenarioConfig};

fn main() -> roughheat::Result<()> {
    let mut cfg = ScenarioConfig::default();
    cfg.forcing.divergence = roughheat::pipeline::DivergenceKind::StaticGradient;
    let rep = linear_cauchy_scenario(&cfg)?;
    for c in &rep.checks {
        println!("{:<28} {:<5} {:>12} {}", c.name, c.passed, c.value.map(|v| format!("{v:.3e}")).unwrap_or_default(), c.note.clone().unwrap_or_default());
    }
    if let Some(t) = &rep.trace {
        for (t, p) in t.times.iter().zip(&t.pairings) {
            println!("  t = {t:.3e}: trace pairing {p:.3e}");
        }
    }
    for n in &rep.norms {
        println!("  {} p={} q={} beta={}: {:.4e}", n.norm_kind, n.p, n.q, n.beta, n.value);
    }
    Ok(())
}
