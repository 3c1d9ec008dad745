//! Fit per-activation and per-precharge energies to measured per-op costs.

use buddysim::cost::{calibrate_energy, MEASURED_OP_ENERGY_NJ_PER_KB};
use buddysim::BitwiseOp;

fn main() -> buddysim::Result<()> {
    let fit = calibrate_energy(&MEASURED_OP_ENERGY_NJ_PER_KB)?;
    println!("{:#?}", fit.params.activation);
    for row in &fit.rows {
        println!(
            "{:<5} target {:.2} fitted {:.3} nJ/KB ({:+.1e})",
            row.op, row.target_nj_per_kb, row.fitted_nj_per_kb, row.rel_err
        );
    }

    // Two points are enough for a fit; the others become predictions.
    let partial = calibrate_energy(&[(BitwiseOp::Not, 1.6), (BitwiseOp::And, 3.2)])?;
    println!(
        "fit from not+and only: max relative error {:.2e}",
        partial.max_rel_err
    );
    Ok(())
}
