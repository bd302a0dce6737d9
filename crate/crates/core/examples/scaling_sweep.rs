//! Sweeps every administrative action over growing deployments and fits
//! its ledger cost to the expected growth class.
//!
//! cargo run --release --example scaling_sweep

use cpabe_dss::harness::{measure_scaling, MEASURED_ACTIONS, RATIO_TOLERANCE, SWEEP};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("sizes {SWEEP:?}, tolerance x{RATIO_TOLERANCE}");
    for action in MEASURED_ACTIONS {
        for r in measure_scaling(action, &SWEEP, 1)? {
            let costs: Vec<u64> = r.points.iter().map(|p| p.cost).collect();
            println!(
                "{action:?}/{}: cost {costs:?} ~ {:.2}*bound + {:.2}, worst ratio {:.2}, {}",
                r.series,
                r.alpha,
                r.beta,
                r.max_ratio,
                if r.passed { "pass" } else { "FAIL" }
            );
        }
    }
    Ok(())
}
