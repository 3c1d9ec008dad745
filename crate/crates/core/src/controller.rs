//! Memory-controller side of the `bop dst, src1, [src2], size` instruction:
//! alignment checks, subarray placement analysis, RowClone-PSM counting,
//! CPU fallback, and dispatch of the resulting traces.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analog::ReliabilityModel;
use crate::bits::BitRow;
use crate::command::{
    bitwise_steps, execute_command, CommandTrace, Engine, ExecutionReport, HostWork, Location,
    PsmDescriptor, RowAddress, TraceEntry, TraceSource,
};
use crate::cost::{trace_latency, LatencyMode, TimingParams};
use crate::error::{Error, Result};
use crate::ops::BitwiseOp;
use crate::subarray::{RowSlot, SubarrayConfig, SubarrayState, DATA_ROWS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BopRequest {
    pub op: BitwiseOp,
    /// Physical byte addresses, row-aligned.
    pub dst: u64,
    pub src1: u64,
    pub src2: Option<u64>,
    pub size_bytes: u64,
}

/// Where an OS-visible row lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlacedRow {
    pub bank: u32,
    pub subarray: u32,
    pub local: u16,
}

impl PlacedRow {
    pub fn location(&self) -> Location {
        Location {
            bank: self.bank,
            subarray: self.subarray,
        }
    }

    pub fn addr(&self) -> RowAddress {
        RowAddress::D(self.local)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlacementPolicy {
    /// Data rows of each subarray are contiguous in the physical row space:
    /// row `g` is local row `g % 1006` of global subarray `g / 1006`.
    Interleaved { subarrays_per_bank: u32 },
    /// Row `g` is slice `g % stripe` of vector `g / stripe`; slice `j` of
    /// every vector shares subarray `j`, so equal slices are row-aligned.
    Striped {
        stripe: u32,
        subarrays_per_bank: u32,
    },
}

impl Default for PlacementPolicy {
    fn default() -> Self {
        PlacementPolicy::Interleaved {
            subarrays_per_bank: 64,
        }
    }
}

/// Physical row index to subarray map: explicit entries override a policy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Placement {
    pub policy: PlacementPolicy,
    pub explicit: BTreeMap<u64, PlacedRow>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementEntry {
    bank: u32,
    subarray: u32,
    #[serde(default)]
    local: Option<u16>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementFile {
    schema_version: u32,
    #[serde(default)]
    policy: Option<PlacementPolicy>,
    rows: BTreeMap<String, PlacementEntry>,
}

impl Placement {
    pub fn new(policy: PlacementPolicy) -> Self {
        Placement {
            policy,
            explicit: BTreeMap::new(),
        }
    }

    pub fn pin(&mut self, row: u64, placed: PlacedRow) {
        self.explicit.insert(row, placed);
    }

    pub fn locate(&self, row: u64) -> Result<PlacedRow> {
        if let Some(p) = self.explicit.get(&row) {
            return Ok(*p);
        }
        let (global_subarray, local, spb) = match self.policy {
            PlacementPolicy::Interleaved { subarrays_per_bank } => (
                row / u64::from(DATA_ROWS),
                row % u64::from(DATA_ROWS),
                subarrays_per_bank,
            ),
            PlacementPolicy::Striped {
                stripe,
                subarrays_per_bank,
            } => {
                let vector = row / u64::from(stripe);
                if vector >= u64::from(DATA_ROWS) {
                    return Err(Error::UnplacedRow(row));
                }
                (row % u64::from(stripe), vector, subarrays_per_bank)
            }
        };
        let spb = u64::from(spb.max(1));
        Ok(PlacedRow {
            bank: u32::try_from(global_subarray / spb).map_err(|_| Error::UnplacedRow(row))?,
            subarray: (global_subarray % spb) as u32,
            local: local as u16,
        })
    }

    /// Loads `{"schema_version": 1, "rows": {"<row>": {"bank": b, "subarray": s}}}`;
    /// `local` defaults to the row's index within its subarray.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PlacementFile = serde_json::from_str(text)?;
        let mut placement = Placement::new(file.policy.unwrap_or_default());
        for (key, e) in file.rows {
            let row: u64 = key
                .parse()
                .map_err(|_| Error::Config(format!("placement key `{key}` is not a row index")))?;
            let local = e.local.unwrap_or((row % u64::from(DATA_ROWS)) as u16);
            if local >= DATA_ROWS {
                return Err(Error::Config(format!("local row {local} out of range")));
            }
            placement.pin(
                row,
                PlacedRow {
                    bank: e.bank,
                    subarray: e.subarray,
                    local,
                },
            );
        }
        Ok(placement)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SliceDecision {
    Buddy {
        anchor: Location,
        psm_count: u8,
        trace: CommandTrace,
    },
    CpuFallback {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlicePlan {
    pub dst: PlacedRow,
    pub src1: PlacedRow,
    pub src2: Option<PlacedRow>,
    pub decision: SliceDecision,
}

impl SlicePlan {
    pub fn psm_count(&self) -> Option<u8> {
        match self.decision {
            SliceDecision::Buddy { psm_count, .. } => Some(psm_count),
            SliceDecision::CpuFallback { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coherence {
    /// Source rows whose dirty lines are flushed before the operation.
    pub flush_rows: u64,
    /// Destination rows invalidated, overlapped with the operation.
    pub invalidate_rows: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionPlan {
    pub op: BitwiseOp,
    pub row_bytes: u64,
    pub slices: Vec<SlicePlan>,
    pub coherence: Coherence,
}

/// Number of RowClone-PSM copies needed for one slice, and the subarray that
/// performs the computation.
///
/// The computation runs where most operands already live (the destination's
/// subarray on ties); each operand elsewhere costs one PSM. A binary slice
/// with all three rows in distinct subarrays has no shared subarray and needs
/// all three copies.
pub fn psm_analysis(dst: PlacedRow, src1: PlacedRow, src2: Option<PlacedRow>) -> (Location, u8) {
    let locs: Vec<Location> = [Some(dst), Some(src1), src2]
        .iter()
        .flatten()
        .map(|p| p.location())
        .collect();
    let count = |l: Location| locs.iter().filter(|&&x| x == l).count();
    if locs.len() == 3 && count(locs[0]) == 1 && count(locs[1]) == 1 {
        return (dst.location(), 3);
    }
    let mut anchor = dst.location();
    for &l in &locs {
        if count(l) > count(anchor) {
            anchor = l;
        }
    }
    let outside = locs.iter().filter(|&&l| l != anchor).count() as u8;
    (anchor, outside)
}

fn slot_of(addr: RowAddress) -> RowSlot {
    match addr {
        RowAddress::B(i) if i < 4 => RowSlot::T(i),
        RowAddress::D(i) => RowSlot::D(i),
        other => unreachable!("operands are data or designated rows, got {other}"),
    }
}

fn psm(
    bytes: u64,
    src: Location,
    src_row: RowAddress,
    dst: Location,
    dst_row: RowAddress,
) -> PsmDescriptor {
    PsmDescriptor {
        bytes,
        src,
        src_row: src_row.to_string(),
        dst,
        dst_row: dst_row.to_string(),
    }
}

fn slice_trace(
    op: BitwiseOp,
    row_bytes: u64,
    dst: PlacedRow,
    src1: PlacedRow,
    src2: Option<PlacedRow>,
    anchor: Location,
) -> Result<CommandTrace> {
    let mut trace = CommandTrace::new();
    let index = trace.begin_op(op.name(), Engine::Buddy, 1);
    let stage = |src: PlacedRow, slot: RowAddress, trace: &mut CommandTrace| -> RowAddress {
        if src.location() == anchor {
            src.addr()
        } else {
            let d = psm(row_bytes, src.location(), src.addr(), anchor, slot);
            trace.push(
                TraceEntry::Psm(d),
                TraceSource::Controller,
                None,
                Some(index),
            );
            slot
        }
    };
    let a1 = stage(src1, RowAddress::B(3), &mut trace);
    let a2 = match src2 {
        Some(s2) if s2 == src1 => Some(a1),
        Some(s2) => Some(stage(s2, RowAddress::B(2), &mut trace)),
        None => None,
    };
    let remote_dst = dst.location() != anchor;
    let target = if !remote_dst {
        dst.addr()
    } else if matches!(op, BitwiseOp::Xor | BitwiseOp::Xnor) {
        RowAddress::B(0)
    } else {
        RowAddress::B(3)
    };
    for step in bitwise_steps(op, target, a1, a2)? {
        trace.push_step(step, TraceSource::Compiler, Some(anchor), Some(index))?;
    }
    if remote_dst {
        let d = psm(row_bytes, anchor, target, dst.location(), dst.addr());
        trace.push(
            TraceEntry::Psm(d),
            TraceSource::Controller,
            None,
            Some(index),
        );
    }
    Ok(trace)
}

/// Validate a request and decide, per row slice, whether it runs in DRAM or
/// on the CPU.
pub fn plan(req: &BopRequest, placement: &Placement, row_bytes: u64) -> Result<ExecutionPlan> {
    if req.src2.is_some() != req.op.is_binary() {
        return Err(Error::Arity {
            op: req.op.name(),
            expected: req.op.arity(),
        });
    }
    for addr in [Some(req.dst), Some(req.src1), req.src2]
        .into_iter()
        .flatten()
    {
        if addr % row_bytes != 0 {
            return Err(Error::Misaligned(addr));
        }
    }
    if req.size_bytes < row_bytes {
        return Err(Error::SizeTooSmall {
            size: req.size_bytes,
            row: row_bytes,
        });
    }
    if req.size_bytes % row_bytes != 0 {
        return Err(Error::Misaligned(req.size_bytes));
    }
    let rows = req.size_bytes / row_bytes;
    let mut slices = Vec::with_capacity(rows as usize);
    for j in 0..rows {
        let dst = placement.locate(req.dst / row_bytes + j)?;
        let src1 = placement.locate(req.src1 / row_bytes + j)?;
        let src2 = req
            .src2
            .map(|s| placement.locate(s / row_bytes + j))
            .transpose()?;
        let (anchor, psm_count) = psm_analysis(dst, src1, src2);
        let decision = if psm_count >= 3 {
            SliceDecision::CpuFallback {
                reason: "operation needs three RowClone-PSM copies".into(),
            }
        } else {
            SliceDecision::Buddy {
                anchor,
                psm_count,
                trace: slice_trace(req.op, row_bytes, dst, src1, src2, anchor)?,
            }
        };
        slices.push(SlicePlan {
            dst,
            src1,
            src2,
            decision,
        });
    }
    Ok(ExecutionPlan {
        op: req.op,
        row_bytes,
        slices,
        coherence: Coherence {
            flush_rows: rows * req.op.arity() as u64,
            invalidate_rows: rows,
        },
    })
}

/// Subarrays of a memory system, created on first touch.
#[derive(Debug, Clone)]
pub struct Memory {
    config: SubarrayConfig,
    reliability: ReliabilityModel,
    subarrays: BTreeMap<Location, SubarrayState>,
}

impl Memory {
    pub fn new(config: SubarrayConfig, reliability: ReliabilityModel) -> Self {
        Memory {
            config,
            reliability,
            subarrays: BTreeMap::new(),
        }
    }

    pub fn row_bits(&self) -> usize {
        self.config.row_bits
    }

    pub fn subarray_mut(&mut self, loc: Location) -> &mut SubarrayState {
        let (config, reliability) = (&self.config, &self.reliability);
        self.subarrays
            .entry(loc)
            .or_insert_with(|| SubarrayState::with_reliability(config.clone(), reliability.clone()))
    }

    pub fn subarray(&self, loc: Location) -> Option<&SubarrayState> {
        self.subarrays.get(&loc)
    }

    pub fn subarray_count(&self) -> usize {
        self.subarrays.len()
    }

    pub fn read(&self, row: PlacedRow) -> Result<BitRow> {
        match self.subarrays.get(&row.location()) {
            Some(s) => s.row(RowSlot::D(row.local)),
            None => Ok(BitRow::zeros(self.row_bits())),
        }
    }

    pub fn write(&mut self, row: PlacedRow, bits: BitRow) -> Result<()> {
        self.subarray_mut(row.location())
            .load_row(RowSlot::D(row.local), bits)
    }

    fn copy(&mut self, d: &PsmDescriptor) -> Result<()> {
        let src_slot = slot_of(d.src_row.parse()?);
        let dst_slot = slot_of(d.dst_row.parse()?);
        let bits = self.subarray_mut(d.src).row(src_slot)?;
        self.subarray_mut(d.dst).load_row(dst_slot, bits)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DispatchOutcome {
    pub trace: CommandTrace,
    pub report: ExecutionReport,
    pub buddy_slices: u64,
    pub fallback_slices: u64,
    pub psm_transfers: u64,
    pub fallback_bytes: u64,
    pub coherence: Coherence,
}

impl DispatchOutcome {
    pub fn merge(&mut self, other: DispatchOutcome) {
        self.trace.append(other.trace);
        self.report.merge(other.report);
        self.buddy_slices += other.buddy_slices;
        self.fallback_slices += other.fallback_slices;
        self.psm_transfers += other.psm_transfers;
        self.fallback_bytes += other.fallback_bytes;
        self.coherence.flush_rows += other.coherence.flush_rows;
        self.coherence.invalidate_rows += other.coherence.invalidate_rows;
    }
}

/// Execute a plan: DRAM slices through their command traces, fallback slices
/// with the host reference.
pub fn dispatch(plan: &ExecutionPlan, memory: &mut Memory) -> Result<DispatchOutcome> {
    let mut out = DispatchOutcome {
        coherence: plan.coherence,
        ..Default::default()
    };
    // One operation record per engine, covering all of its slices.
    let mut records: [Option<u32>; 2] = [None, None];
    let mut record = |trace: &mut CommandTrace, engine: Engine| -> u32 {
        let slot = usize::from(engine == Engine::CpuFallback);
        let index = *records[slot].get_or_insert_with(|| trace.begin_op(plan.op.name(), engine, 0));
        trace.ops[index as usize].rows += 1;
        index
    };
    for slice in &plan.slices {
        match &slice.decision {
            SliceDecision::Buddy { anchor, trace, .. } => {
                trace.validate()?;
                let base = out.trace.items.len();
                for (i, item) in trace.items.iter().enumerate() {
                    match &item.entry {
                        TraceEntry::Command(cmd) => {
                            let state = memory.subarray_mut(item.location.unwrap_or(*anchor));
                            if let Some(rep) = execute_command(state, cmd)? {
                                out.report.note(base + i, cmd, &rep);
                            }
                            out.report.commands += 1;
                        }
                        TraceEntry::Psm(d) => {
                            memory.copy(d)?;
                            out.psm_transfers += 1;
                        }
                        TraceEntry::Host(_) => {
                            return Err(Error::MalformedTrace(
                                "host work inside a DRAM slice".into(),
                            ))
                        }
                    }
                }
                let index = record(&mut out.trace, Engine::Buddy);
                for item in &trace.items {
                    out.trace.items.push(crate::command::TraceItem {
                        op: Some(index),
                        ..item.clone()
                    });
                }
                out.buddy_slices += 1;
            }
            SliceDecision::CpuFallback { .. } => {
                let a = memory.read(slice.src1)?;
                let b = match slice.src2 {
                    Some(s) => memory.read(s)?,
                    None => BitRow::zeros(a.len()),
                };
                memory.write(slice.dst, a.zip_with(&b, |x, y| plan.op.apply(x, y)))?;
                let index = record(&mut out.trace, Engine::CpuFallback);
                out.trace.push(
                    TraceEntry::Host(HostWork::Fallback {
                        op: plan.op,
                        bytes: plan.row_bytes,
                    }),
                    TraceSource::Controller,
                    None,
                    Some(index),
                );
                out.fallback_slices += 1;
                out.fallback_bytes += plan.row_bytes;
            }
        }
    }
    Ok(out)
}

/// Modeled time of a dispatched plan: DRAM trace latency, fallback slices at
/// channel bandwidth, and the source-row flush.
pub fn estimate_time_ns(
    out: &DispatchOutcome,
    t: &TimingParams,
    mode: LatencyMode,
    channel_gbps: f64,
) -> f64 {
    let dram = trace_latency(&out.trace, t, mode);
    let fallback: f64 = out
        .trace
        .items
        .iter()
        .filter_map(|i| match i.entry {
            TraceEntry::Host(HostWork::Fallback { op, bytes }) => {
                Some(bytes as f64 * op.traffic_factor() / channel_gbps)
            }
            _ => None,
        })
        .sum();
    dram + fallback + out.coherence.flush_rows as f64 * t.flush_ns_per_row
}

/// OS-visible fraction of row addresses, and the fraction of row-equivalents
/// lost to the reserved rows.
pub fn capacity_fractions() -> (f64, f64) {
    let visible = f64::from(DATA_ROWS) / f64::from(crate::subarray::ROW_ADDRESSES);
    let reserved = f64::from(crate::subarray::RESERVED_ROW_EQUIVALENTS)
        / f64::from(crate::subarray::ROW_ADDRESSES);
    (visible, reserved)
}
