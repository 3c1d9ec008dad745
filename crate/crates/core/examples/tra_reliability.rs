//! Charge sharing across three cells: majority, the analytic failure point,
//! and the calibrated latency table.

use buddysim::analog::{
    activation_latency, analytic_failure_threshold, calibrated_failure_threshold,
    charge_share_delta, tra_outcome, ActivationKind, ChargeShareConfig, LatencyCalibration,
    TraPattern,
};

fn main() -> buddysim::Result<()> {
    let cfg = ChargeShareConfig::default();
    let cal = LatencyCalibration::default();

    for pattern in TraPattern::ALL {
        let cells = pattern.cells(0.0);
        let delta = charge_share_delta(&cells, &cfg)?;
        println!(
            "{pattern}: deviation {delta:+.4} VDD -> {:?}",
            tra_outcome(&cells, &cfg)
        );
    }

    println!(
        "analytic failure at {:.2}% variation, calibrated at {:.0}%",
        analytic_failure_threshold(&cfg) * 100.0,
        calibrated_failure_threshold(&cal).unwrap_or(f64::NAN) * 100.0
    );

    // Latency between table points is interpolated.
    for pct in [0.0, 12.5, 20.0, 22.0, 25.0] {
        let kind = ActivationKind::Tra {
            pattern: TraPattern::StrongOne,
            variation_pct: pct,
        };
        println!("1s0w0w at {pct:>4}%: {:?}", activation_latency(kind, &cal)?);
    }
    Ok(())
}
