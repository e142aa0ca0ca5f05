//! Verifies the analytic gradient against central finite differences.
//!
//! Run with `cargo run --release --example gradient_check -- [seed]`.

use hnil::gradcheck::{gradcheck, GradcheckSpec};

fn main() -> anyhow::Result<()> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let report = gradcheck(&GradcheckSpec::default(), seed)?;
    println!(
        "{} parameters, {} triplets, kink gap {:.2e} after {} draw(s)",
        report.parameters, report.triplets, report.kink_gap, report.attempts
    );
    for t in &report.tensors {
        println!("  {:<10} {:>5} entries  max rel {:.2e}", t.name, t.entries, t.max_rel_error);
    }
    println!(
        "max relative error {:.2e} (tolerance {:.0e}): {}",
        report.max_rel_error,
        report.tolerance,
        if report.passed { "ok" } else { "FAILED" }
    );

    let broken = GradcheckSpec {
        perturb_backward: true,
        ..GradcheckSpec::default()
    };
    let caught = gradcheck(&broken, seed)?;
    println!("with a deliberately broken gradient: max relative error {:.2e}", caught.max_rel_error);
    Ok(())
}
