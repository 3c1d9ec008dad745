//! Randomized placements through the controller.

use buddysim::analog::ReliabilityModel;
use buddysim::command::Engine;
use buddysim::controller::{
    dispatch, plan, BopRequest, Memory, PlacedRow, Placement, SliceDecision,
};
use buddysim::subarray::SubarrayConfig;
use buddysim::{BitRow, BitwiseOp};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ROW_BYTES: u64 = 64;
const SLICES: u64 = 3;

fn op_strategy() -> impl Strategy<Value = BitwiseOp> {
    prop::sample::select(BitwiseOp::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dispatch_matches_host(op in op_strategy(), subarrays in prop::collection::vec(0u32..3, 9), seed in any::<u64>()) {
        let mut placement = Placement::default();
        for (row, &s) in subarrays.iter().enumerate() {
            placement.pin(row as u64, PlacedRow { bank: s / 2, subarray: s, local: row as u16 });
        }
        let req = BopRequest {
            op,
            dst: 0,
            src1: SLICES * ROW_BYTES,
            src2: op.is_binary().then_some(2 * SLICES * ROW_BYTES),
            size_bytes: SLICES * ROW_BYTES,
        };
        let plan = plan(&req, &placement, ROW_BYTES).unwrap();
        let mut memory = Memory::new(SubarrayConfig::with_row_bits(ROW_BYTES as usize * 8), ReliabilityModel::default());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<BitRow> = (SLICES..3 * SLICES)
            .map(|row| {
                let bits = BitRow::random(ROW_BYTES as usize * 8, &mut rng);
                memory.write(placement.locate(row).unwrap(), bits.clone()).unwrap();
                bits
            })
            .collect();
        let out = dispatch(&plan, &mut memory).unwrap();
        for j in 0..SLICES as usize {
            let want = inputs[j].zip_with(&inputs[SLICES as usize + j], |a, b| op.apply(a, b));
            prop_assert_eq!(memory.read(placement.locate(j as u64).unwrap()).unwrap(), want);
        }
        for slice in &plan.slices {
            let mut locs: Vec<_> = [Some(slice.dst), Some(slice.src1), slice.src2].into_iter().flatten().map(|r| r.location()).collect();
            locs.sort();
            locs.dedup();
            let fallback = matches!(slice.decision, SliceDecision::CpuFallback { .. });
            prop_assert_eq!(fallback, op.is_binary() && locs.len() == 3);
        }
        let engines: Vec<Engine> = out.trace.ops.iter().map(|o| o.engine).collect();
        prop_assert_eq!(engines.contains(&Engine::Buddy), out.buddy_slices > 0);
        prop_assert_eq!(engines.contains(&Engine::CpuFallback), out.fallback_slices > 0);
        prop_assert_eq!(out.coherence.flush_rows, SLICES * op.arity() as u64);
        prop_assert_eq!(out.coherence.invalidate_rows, SLICES);
    }
}
