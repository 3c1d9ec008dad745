//! `c1 <= v <= c2` over a bit-sliced column, for growing value widths.

use buddysim::analog::ReliabilityModel;
use buddysim::cost::{LatencyMode, TimingParams};
use buddysim::workloads::{bitweaving_scan, report_speedup, BitSlicedColumn, HostCostParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> buddysim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for bits in [1, 2, 4, 8, 16, 32] {
        let col = BitSlicedColumn::random(bits, 1 << 16, &mut rng)?;
        let max = (1u64 << bits) - 1;
        let (c1, c2) = (max / 4, max - max / 4);
        let (res, run) = bitweaving_scan(&col, c1, c2, 8192 * 8, ReliabilityModel::default())?;
        let direct = col
            .values()
            .iter()
            .filter(|&&v| (c1..=c2).contains(&u64::from(v)))
            .count() as u64;
        assert_eq!(res.count, direct);
        let cost = report_speedup(
            &run,
            &HostCostParams::default(),
            &TimingParams::default(),
            LatencyMode::Optimized,
            1,
        );
        println!(
            "b={bits:>2} [{c1}, {c2}]: {} matches, {} ops, {:.2}X",
            res.count,
            run.trace().ops.len(),
            cost.speedup
        );
    }
    Ok(())
}
