//! Union, intersection and difference of sets held as bit vectors.

use std::collections::BTreeSet;

use buddysim::analog::ReliabilityModel;
use buddysim::cost::{LatencyMode, TimingParams};
use buddysim::workloads::{report_speedup, set_ops, sets, HostCostParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> buddysim::Result<()> {
    let small: Vec<BTreeSet<u32>> = vec![[1, 2, 3, 4].into(), [3, 4, 5].into(), [4, 9].into()];
    let (r, _) = set_ops(&small, 8192 * 8, ReliabilityModel::default())?;
    println!(
        "union {:?}, intersection {:?}, difference {:?}",
        r.union, r.intersection, r.difference
    );

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in [2, 15] {
        let input = sets::random_sets(k, 1 << 15, &mut rng);
        let (r, run) = set_ops(&input, 8192 * 8, ReliabilityModel::default())?;
        let cost = report_speedup(
            &run,
            &HostCostParams::default(),
            &TimingParams::default(),
            LatencyMode::Optimized,
            1,
        );
        println!(
            "k={k}: |union| {}, |intersection| {}, |difference| {}, {:.2}X",
            r.union.len(),
            r.intersection.len(),
            r.difference.len(),
            cost.speedup
        );
    }
    Ok(())
}
