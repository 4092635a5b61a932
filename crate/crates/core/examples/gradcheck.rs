//! Finite-difference check of every parameter gradient of a tiny FaSNet, for both
//! training objectives.
//!
//! cargo run --release --example gradcheck

use fasbeam::neural::{gradcheck, FasnetConfig, GradcheckOptions};
use fasbeam::objectives::Objective;

fn main() -> fasbeam::Result<()> {
    let cfg = FasnetConfig::tiny();
    for objective in [Objective::SiSnr, Objective::MelSiMse] {
        let opts = GradcheckOptions {
            objective,
            signal_len: if objective == Objective::MelSiMse { 256 } else { 64 },
            ..GradcheckOptions::default()
        };
        let report = gradcheck(&cfg, &opts)?;
        let worst = report
            .groups
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
            .expect("model has parameters");
        println!(
            "{objective:?}: {} groups, loss {:.4}, worst {} at {:.2e}, {}",
            report.groups.len(),
            report.loss,
            worst.name,
            worst.rel_error,
            if report.passed() { "passed" } else { "FAILED" }
        );
    }
    Ok(())
}
