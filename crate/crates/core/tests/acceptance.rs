//! One test per acceptance criterion, quick profile. The full profile runs
//! with `cargo test --test acceptance -- --ignored`.

use roughheat::suite::{run_criterion, Profile};

fn check(id: u32) {
    let r = run_criterion(id, Profile::Quick);
    println!("{}", r.line());
    for m in &r.metrics {
        println!("    {} {} = {:.6e} ({})", if m.ok { "ok  " } else { "MISS" }, m.name, m.value, m.bound);
    }
    assert!(r.passed, "{}", r.line());
}

#[test]
fn criterion_01_fubini() {
    check(1);
}

#[test]
fn criterion_02_nesting_homogeneity() {
    check(2);
}

#[test]
fn criterion_03_embedding() {
    check(3);
}

#[test]
fn criterion_04_change_of_angle() {
    check(4);
}

#[test]
fn criterion_05_decay() {
    check(5);
}

#[test]
fn criterion_06_semigroup() {
    check(6);
}

#[test]
fn criterion_07_hypercontractivity() {
    check(7);
}

#[test]
fn criterion_08_caloric() {
    check(8);
}

#[test]
fn criterion_09_picard() {
    check(9);
}

#[test]
fn criterion_10_lifespan() {
    check(10);
}

#[test]
fn criterion_11_scaling() {
    check(11);
}

#[test]
fn criterion_12_weak_residual_traces() {
    check(12);
}

#[test]
fn criterion_13_uniqueness() {
    check(13);
}

#[test]
fn criterion_14_reverse_holder() {
    check(14);
}

#[test]
fn criterion_15_region() {
    check(15);
}

#[test]
#[ignore = "full profile, about a minute in release"]
fn full_profile() {
    let mut failed = Vec::new();
    for id in 1..=15 {
        let r = run_criterion(id, Profile::Full);
        println!("{}", r.line());
        if !r.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
