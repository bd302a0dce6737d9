//! Runs a scenario script and prints each step and compromise report.
//!
//! cargo run --example run_scenario -- scenarios/strong-authz.toml

use std::path::PathBuf;

use cpabe_dss::harness::{run_scenario, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/weak-eavesdrop.toml")));
    let scenario = Scenario::load(&path)?;
    let outcome = run_scenario(&scenario)?;
    print!("{}", outcome.summary());
    println!(
        "{} frames, transcript digest {}",
        outcome.transcript.len(),
        hex::encode(outcome.transcript.digest())
    );
    println!("faults injected {} detected {}", outcome.faults.injected, outcome.faults.detected);
    if !outcome.passed() {
        return Err("some steps did not end as expected".into());
    }
    Ok(())
}
