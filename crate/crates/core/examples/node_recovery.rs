//! Runs the three scripted compromises and prints what each bought the
//! adversary and how the system recovered without stopping other sessions.
//!
//! cargo run --example node_recovery

use cpabe_dss::harness::{run_scenario, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (script, asset) in [("strong-authz", "an1"), ("strong-service", "sn1"), ("strong-consumer", "alice")] {
        let path = format!("{}/scenarios/{script}.toml", env!("CARGO_MANIFEST_DIR"));
        let outcome = run_scenario(&Scenario::load(path.as_ref())?)?;
        println!("== {script} (all steps as expected: {})", outcome.passed());
        for r in outcome.reports.iter().filter(|r| r.asset == asset && r.occurred) {
            println!(
                "{}/{}: local={} forward={} online-recoverable={}",
                r.asset, r.goal, r.local, r.forward, r.online_recoverable
            );
            for step in &r.recovery_steps {
                println!("  recovery: {step}");
            }
        }
    }
    Ok(())
}
