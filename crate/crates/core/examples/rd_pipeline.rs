use roughheat::pipeline::{rd_wellposedness_scenario, ScenarioConfig};

fn main() -> roughheat::Result<()> {
    let rep = rd_wellposedness_scenario(&ScenarioConfig::default())?;
    for c in &rep.checks {
        println!("{:<32} {:<5} {:>12} {}", c.name, c.passed, c.value.map(|v| format!("{v:.3e}")).unwrap_or_default(), c.note.clone().unwrap_or_default());
    }
    if let Some(p) = &rep.picard {
        println!("picard: {} iterations, contraction <= {:.3}, residual {:.2e}", p.iterations, p.contraction_max, p.residual);
    }
    if let Some(u) = &rep.uniqueness {
        println!("uniqueness: init {:.2e}, resolution {:?}", u.init_deviation, u.resolution_deviations);
    }
    println!("exploratory: {}", rep.exploratory);
    Ok(())
}
