//! Throughput and energy per operation against a bandwidth-bound host.

use buddysim::cost::{
    op_cost_report, CostReport, EnergyParams, LatencyMode, TimingParams, GTX745_CHANNEL_GBPS,
};
use buddysim::BitwiseOp;

fn main() -> buddysim::Result<()> {
    let t = TimingParams::default();
    let e = EnergyParams::default();
    println!("{}", CostReport::CSV_HEADER);
    for op in BitwiseOp::ALL {
        for banks in [1, 2, 4, 8] {
            let r = op_cost_report(
                op,
                8192,
                banks,
                &t,
                &e,
                LatencyMode::Optimized,
                GTX745_CHANNEL_GBPS,
            )?;
            println!("{}", r.csv_row());
        }
    }
    let naive = op_cost_report(
        BitwiseOp::And,
        8192,
        1,
        &t,
        &e,
        LatencyMode::Naive,
        GTX745_CHANNEL_GBPS,
    )?;
    println!(
        "\nand without overlapped activations: {} ns",
        naive.latency_ns
    );
    Ok(())
}
