//! A strong cell overpowering two weak ones: the analytic and calibrated
//! reliability modes disagree about where that starts.

use buddysim::analog::{ReliabilityMode, ReliabilityModel};
use buddysim::command::{compile_bitwise, execute};
use buddysim::subarray::{RowSlot, SubarrayConfig, VariationProfile};
use buddysim::{BitRow, BitwiseOp, RowAddress, SubarrayState};

fn main() -> buddysim::Result<()> {
    let bits = 8;
    for mode in [
        ReliabilityMode::Ideal,
        ReliabilityMode::Analytic,
        ReliabilityMode::Calibrated,
    ] {
        for v in [0.20, 0.25, 0.40] {
            let mut sub = SubarrayState::with_reliability(
                SubarrayConfig::with_row_bits(bits),
                ReliabilityModel::new(mode),
            );
            // AND copies its operands into T0 and T1 and the zero row into T2.
            // A charged T0 cell faces two empty cells.
            let mut profile = VariationProfile::default();
            profile.set_row(RowSlot::T(0), vec![1.0 + v; bits]);
            profile.set_row(RowSlot::T(1), vec![1.0 - v; bits]);
            profile.set_row(RowSlot::T(2), vec![1.0 - v; bits]);
            sub.set_variation(Some(profile));
            sub.load_row(RowSlot::D(0), BitRow::ones(bits))?;
            sub.load_row(RowSlot::D(1), BitRow::zeros(bits))?;
            let trace = compile_bitwise(
                BitwiseOp::And,
                RowAddress::D(2),
                RowAddress::D(0),
                Some(RowAddress::D(1)),
            )?;
            let report = execute(&trace, &mut sub)?;
            println!(
                "{mode:?} at {:>2.0}%: 1 AND 0 -> {} ones, {} faulty bits",
                v * 100.0,
                sub.row(RowSlot::D(2))?.count_ones(),
                report.fault_bits
            );
        }
    }
    Ok(())
}
