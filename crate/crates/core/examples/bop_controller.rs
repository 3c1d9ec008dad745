//! The `bop` instruction: placement, RowClone-PSM staging and CPU fallback.

use buddysim::analog::ReliabilityModel;
use buddysim::controller::{
    capacity_fractions, dispatch, estimate_time_ns, plan, BopRequest, Memory, PlacedRow, Placement,
    SliceDecision,
};
use buddysim::cost::{LatencyMode, TimingParams};
use buddysim::subarray::SubarrayConfig;
use buddysim::{BitRow, BitwiseOp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ROW_BYTES: u64 = 1024;

fn main() -> buddysim::Result<()> {
    // Rows 0..3 dst, 3..6 src1, 6..9 src2. Slice 0 is co-located, slice 1
    // has one remote source, slice 2 spans three subarrays.
    let layout = [
        (0, 0),
        (0, 0),
        (0, 0),
        (0, 0),
        (0, 1),
        (0, 1),
        (0, 0),
        (0, 0),
        (0, 2),
    ];
    let mut placement = Placement::default();
    for (row, (bank, subarray)) in layout.into_iter().enumerate() {
        placement.pin(
            row as u64,
            PlacedRow {
                bank,
                subarray,
                local: row as u16,
            },
        );
    }
    let req = BopRequest {
        op: BitwiseOp::And,
        dst: 0,
        src1: 3 * ROW_BYTES,
        src2: Some(6 * ROW_BYTES),
        size_bytes: 3 * ROW_BYTES,
    };
    let plan = plan(&req, &placement, ROW_BYTES)?;
    for (i, s) in plan.slices.iter().enumerate() {
        match &s.decision {
            SliceDecision::Buddy {
                anchor,
                psm_count,
                trace,
            } => {
                println!(
                    "slice {i}: in DRAM at {anchor}, {psm_count} PSM, {} trace items",
                    trace.len()
                )
            }
            SliceDecision::CpuFallback { reason } => println!("slice {i}: CPU ({reason})"),
        }
    }

    let mut memory = Memory::new(
        SubarrayConfig::with_row_bits(ROW_BYTES as usize * 8),
        ReliabilityModel::default(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for row in 3..9 {
        memory.write(
            placement.locate(row)?,
            BitRow::random(ROW_BYTES as usize * 8, &mut rng),
        )?;
    }
    let out = dispatch(&plan, &mut memory)?;
    for j in 0..3 {
        let a = memory.read(placement.locate(3 + j)?)?;
        let b = memory.read(placement.locate(6 + j)?)?;
        assert_eq!(
            memory.read(placement.locate(j)?)?,
            a.zip_with(&b, |x, y| x & y)
        );
    }
    println!(
        "{} DRAM slices, {} fallback, {} PSM copies, flush {} rows, invalidate {}",
        out.buddy_slices,
        out.fallback_slices,
        out.psm_transfers,
        out.coherence.flush_rows,
        out.coherence.invalidate_rows
    );
    println!(
        "modeled time {:.0} ns",
        estimate_time_ns(&out, &TimingParams::default(), LatencyMode::Optimized, 19.2)
    );

    let (visible, reserved) = capacity_fractions();
    println!(
        "visible rows {:.1}%, reserved row area {:.1}%",
        visible * 100.0,
        reserved * 100.0
    );

    let bad = BopRequest {
        size_bytes: ROW_BYTES / 2,
        ..req
    };
    println!("half-row request: {}", plan_err(&bad, &placement));
    Ok(())
}

fn plan_err(req: &BopRequest, placement: &Placement) -> String {
    match plan(req, placement, ROW_BYTES) {
        Ok(_) => "accepted".into(),
        Err(e) => e.to_string(),
    }
}
