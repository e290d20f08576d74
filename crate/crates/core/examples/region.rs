use roughheat::exponents::{admissible_region, rat, to_f64};

fn main() -> roughheat::Result<()> {
    for (rho, label) in [(rat(6, 5), "6/5"), (rat(3, 4), "3/4"), (rat(2, 1), "2")] {
        let r = admissible_region(3, rho, rat(10, 7), 24)?;
        println!("n = 3, rho = {label}, Q = 10/7: 1/RD+ = {} ({:.5})", r.inv_rd_plus, to_f64(&r.inv_rd_plus));
        for (x, y) in &r.vertices {
            println!("  vertex ({x}, {y})");
        }
        match &r.critical_segment {
            Some((a, b)) => println!("  critical segment ({}, {}) -- ({}, {})", a.0, a.1, b.0, b.1),
            None => println!("  critical segment misses the region"),
        }
        let inside = r.mask.iter().filter(|c| c.admissible).count();
        println!("  {inside} of {} mask cells admissible", r.mask.len());
    }
    Ok(())
}
