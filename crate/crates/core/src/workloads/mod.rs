//! Applications expressed as streams of bulk bitwise operations, each checked
//! against a direct host evaluation.

pub mod bitmap;
pub mod bitweaving;
pub mod sets;

use serde::{Deserialize, Serialize};

use crate::analog::ReliabilityModel;
use crate::bits::BitRow;
use crate::command::{
    execute, rowclone_fpm, CommandKind, CommandTrace, Engine, ExecutionReport, HostWork,
    LocatedRow, RowAddress, TraceEntry, TraceItem, TraceSource,
};
use crate::controller::{
    dispatch, plan, BopRequest, DispatchOutcome, Memory, Placement, PlacementPolicy,
};
use crate::cost::{trace_latency, LatencyMode, TimingParams};
use crate::error::{Error, Result};
use crate::ops::BitwiseOp;
use crate::subarray::{SubarrayConfig, DATA_ROWS};

pub use bitmap::{bitmap_query, BitmapIndexSet, BitmapResult};
pub use bitweaving::{bitweaving_scan, BitSlicedColumn, ScanResult};
pub use sets::{set_ops, SetResult};

/// Host-side rates used by the end-to-end model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostCostParams {
    /// CPU popcount rate over bitmap bytes.
    pub bitcount_gbps: f64,
    /// Memory channel bandwidth available to the baseline.
    pub channel_gbps: f64,
}

impl Default for HostCostParams {
    fn default() -> Self {
        // One DDR4-2400 channel.
        HostCostParams {
            bitcount_gbps: 20.0,
            channel_gbps: 19.2,
        }
    }
}

impl HostCostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bitcount_gbps > 0.0) || !(self.channel_gbps > 0.0) {
            return Err(Error::InvalidParameter(
                "host rates must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Handle to a bit vector held by a [`VectorMachine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vector(u16);

/// Bit vectors striped over `rows` subarrays: slice `j` of every vector sits
/// in subarray `j`, so each operation runs locally in every subarray.
#[derive(Debug, Clone)]
pub struct VectorMachine {
    memory: Memory,
    placement: Placement,
    row_bits: usize,
    rows: u32,
    len: usize,
    next: u16,
    outcome: DispatchOutcome,
    bitcount_bytes: u64,
}

impl VectorMachine {
    /// Machine for vectors of `len` bits, padded to whole rows of `row_bits`.
    pub fn new(len: usize, row_bits: usize, reliability: ReliabilityModel) -> Self {
        let rows = len.div_ceil(row_bits).max(1) as u32;
        VectorMachine {
            memory: Memory::new(SubarrayConfig::with_row_bits(row_bits), reliability),
            placement: Placement::new(PlacementPolicy::Striped {
                stripe: rows,
                subarrays_per_bank: 1 << 16,
            }),
            row_bits,
            rows,
            len,
            next: 0,
            outcome: DispatchOutcome::default(),
            bitcount_bytes: 0,
        }
    }

    pub fn rows_per_vector(&self) -> u32 {
        self.rows
    }

    pub fn row_bytes(&self) -> u64 {
        (self.row_bits / 8) as u64
    }

    pub fn vector_bytes(&self) -> u64 {
        self.row_bytes() * u64::from(self.rows)
    }

    fn addr(&self, v: Vector) -> u64 {
        u64::from(v.0) * self.vector_bytes()
    }

    pub fn alloc(&mut self) -> Result<Vector> {
        if self.next >= DATA_ROWS {
            return Err(Error::Config(format!("more than {DATA_ROWS} live vectors")));
        }
        self.next += 1;
        Ok(Vector(self.next - 1))
    }

    /// Host write of a vector (not traced).
    pub fn store(&mut self, bits: &BitRow) -> Result<Vector> {
        if bits.len() != self.len {
            return Err(Error::RowLength {
                expected: self.len,
                got: bits.len(),
            });
        }
        let v = self.alloc()?;
        for j in 0..self.rows as usize {
            let slice = BitRow::from_bits((0..self.row_bits).map(|i| {
                let k = j * self.row_bits + i;
                k < self.len && bits.get(k)
            }));
            let row = self
                .placement
                .locate(u64::from(v.0) * u64::from(self.rows) + j as u64)?;
            self.memory.write(row, slice)?;
        }
        Ok(v)
    }

    /// Host read of the first `len` bits of a vector (not traced).
    pub fn load(&self, v: Vector) -> Result<BitRow> {
        let mut slices = Vec::with_capacity(self.rows as usize);
        for j in 0..u64::from(self.rows) {
            slices.push(
                self.memory.read(
                    self.placement
                        .locate(u64::from(v.0) * u64::from(self.rows) + j)?,
                )?,
            );
        }
        Ok(BitRow::from_bits(
            (0..self.len).map(|k| slices[k / self.row_bits].get(k % self.row_bits)),
        ))
    }

    /// Fill a fresh vector from the all-zeros or all-ones control row with
    /// one in-subarray copy per slice.
    pub fn constant(&mut self, value: bool) -> Result<Vector> {
        let v = self.alloc()?;
        let mut fill = CommandTrace::new();
        let index = fill.begin_op("rowclone_fpm", Engine::Buddy, self.rows);
        for j in 0..u64::from(self.rows) {
            let row = self
                .placement
                .locate(u64::from(v.0) * u64::from(self.rows) + j)?;
            let loc = row.location();
            let src = LocatedRow {
                location: loc,
                addr: RowAddress::C(u8::from(value)),
            };
            let trace = rowclone_fpm(
                src,
                LocatedRow {
                    location: loc,
                    addr: row.addr(),
                },
            )?;
            let report = execute(&trace, self.memory.subarray_mut(loc))?;
            self.outcome.report.merge(report);
            fill.items
                .extend(trace.items.into_iter().map(|i| TraceItem {
                    op: Some(index),
                    ..i
                }));
        }
        self.outcome.trace.append(fill);
        Ok(v)
    }

    /// `dst = op(a, b)` through the controller.
    pub fn bop(&mut self, op: BitwiseOp, dst: Vector, a: Vector, b: Option<Vector>) -> Result<()> {
        let req = BopRequest {
            op,
            dst: self.addr(dst),
            src1: self.addr(a),
            src2: b.map(|b| self.addr(b)),
            size_bytes: self.vector_bytes(),
        };
        let plan = plan(&req, &self.placement, self.row_bytes())?;
        let out = dispatch(&plan, &mut self.memory)?;
        self.outcome.merge(out);
        Ok(())
    }

    /// Allocate a destination and compute `op(a, b)` into it.
    pub fn apply(&mut self, op: BitwiseOp, a: Vector, b: Option<Vector>) -> Result<Vector> {
        let dst = self.alloc()?;
        self.bop(op, dst, a, b)?;
        Ok(dst)
    }

    /// Population count on the host; traced as host work.
    pub fn bitcount(&mut self, v: Vector) -> Result<u64> {
        let bits = self.load(v)?;
        let bytes = self.vector_bytes();
        let mut t = CommandTrace::new();
        let index = t.begin_op("bitcount", Engine::Host, self.rows);
        t.push(
            TraceEntry::Host(HostWork::Bitcount { bytes }),
            TraceSource::Workload,
            None,
            Some(index),
        );
        self.outcome.trace.append(t);
        self.bitcount_bytes += bytes;
        Ok(bits.count_ones())
    }

    pub fn finish(self) -> WorkloadRun {
        WorkloadRun {
            row_bytes: self.row_bytes(),
            bitcount_bytes: self.bitcount_bytes,
            outcome: self.outcome,
        }
    }
}

/// Everything the cost model needs from a finished workload.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WorkloadRun {
    pub row_bytes: u64,
    pub bitcount_bytes: u64,
    pub outcome: DispatchOutcome,
}

impl WorkloadRun {
    pub fn trace(&self) -> &CommandTrace {
        &self.outcome.trace
    }

    pub fn report(&self) -> &ExecutionReport {
        &self.outcome.report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub buddy_ns: f64,
    pub baseline_ns: f64,
    pub bitcount_ns: f64,
    pub speedup: f64,
}

fn baseline_factor(name: &str) -> Option<f64> {
    match name {
        // Constant fill: one write per byte.
        "rowclone_fpm" => Some(1.0),
        "bitcount" => None,
        other => other
            .parse::<BitwiseOp>()
            .ok()
            .map(|op| op.traffic_factor()),
    }
}

/// Modeled end-to-end speedup: the host streams every operand over the
/// channel; Buddy runs the trace on `banks` banks. Both pay for bitcounts.
pub fn report_speedup(
    run: &WorkloadRun,
    host: &HostCostParams,
    t: &TimingParams,
    mode: LatencyMode,
    banks: u32,
) -> SpeedupReport {
    let banks = banks.max(1);
    let baseline_bytes: f64 = run
        .outcome
        .trace
        .ops
        .iter()
        .filter_map(|o| {
            baseline_factor(&o.name).map(|f| f * f64::from(o.rows) * run.row_bytes as f64)
        })
        .sum();
    let baseline_ns = baseline_bytes / host.channel_gbps;
    let dram_ns = trace_latency(&run.outcome.trace, t, mode);
    let activations = run
        .outcome
        .trace
        .commands()
        .filter(|c| matches!(c.kind, CommandKind::Activate(_)))
        .count();
    let fallback_ns: f64 = run
        .outcome
        .trace
        .items
        .iter()
        .filter_map(|i| match i.entry {
            TraceEntry::Host(HostWork::Fallback { op, bytes }) => {
                Some(bytes as f64 * op.traffic_factor() / host.channel_gbps)
            }
            _ => None,
        })
        .sum();
    let buddy_ns =
        (dram_ns / f64::from(banks)).max(activations as f64 * t.t_faw_ns / 4.0) + fallback_ns;
    let bitcount_ns = run.bitcount_bytes as f64 / host.bitcount_gbps;
    SpeedupReport {
        buddy_ns,
        baseline_ns,
        bitcount_ns,
        speedup: (baseline_ns + bitcount_ns) / (buddy_ns + bitcount_ns),
    }
}
