//! Weekly active users from daily activity bitmaps.

use buddysim::analog::ReliabilityModel;
use buddysim::cost::{LatencyMode, TimingParams};
use buddysim::workloads::{bitmap_query, report_speedup, BitmapIndexSet, HostCostParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> buddysim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let idx = BitmapIndexSet::random(1 << 20, 4, 0.1, &mut rng);
    for weeks in [1, 2, 4] {
        let (res, run) = bitmap_query(&idx, weeks, 8192 * 8, ReliabilityModel::default())?;
        let s = run.trace().summary();
        let cost = report_speedup(
            &run,
            &HostCostParams::default(),
            &TimingParams::default(),
            LatencyMode::Optimized,
            1,
        );
        println!(
            "n={weeks}: {} active every week, male per week {:?}; {} or, {} and, {} bitcount; {:.2}X",
            res.unique_weekly_active,
            res.male_weekly_active,
            s.op_counts["or"],
            s.op_counts["and"],
            s.host_bitcounts,
            cost.speedup
        );
    }
    Ok(())
}
