use roughheat::suite::{run_suite, Profile};

fn main() {
    let full = std::env::args().any(|a| a == "--full");
    let results = run_suite(if full { Profile::Full } else { Profile::Quick });
    for r in &results {
        println!("{}", r.line());
    }
    println!("{} / {} passed", results.iter().filter(|r| r.passed).count(), results.len());
}
