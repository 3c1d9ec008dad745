//! Row address groups, the `AAP`/`AP` command primitives, compilation of
//! bitwise operations into DRAM command traces, and trace execution against
//! a subarray.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::BitwiseOp;
use crate::subarray::{
    ActivationReport, Phase, RowSlot, SubarrayState, Wordline, WordlineSet, DATA_ROWS,
};

/// Group-tagged row address as seen on the command bus.
///
/// * `B(0..16)`: bitwise group, decoded to one to three reserved wordlines.
/// * `C(0..2)`: control rows, all zeros and all ones.
/// * `D(0..1006)`: ordinary data rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowAddress {
    B(u8),
    C(u8),
    D(u16),
}

impl RowAddress {
    pub fn is_bitwise_group(self) -> bool {
        matches!(self, RowAddress::B(_))
    }

    /// Wordlines raised by an ACTIVATE to this address.
    pub fn resolve(self) -> Result<WordlineSet> {
        use Wordline::*;
        let lines = match self {
            RowAddress::B(i) => match i {
                0 => vec![T(0)],
                1 => vec![T(1)],
                2 => vec![T(2)],
                3 => vec![T(3)],
                4 => vec![DccD(0)],
                5 => vec![DccN(0)],
                6 => vec![DccD(1)],
                7 => vec![DccN(1)],
                8 => vec![DccN(0), T(0)],
                9 => vec![DccN(1), T(1)],
                10 => vec![T(2), T(3)],
                11 => vec![T(0), T(3)],
                12 => vec![T(0), T(1), T(2)],
                13 => vec![T(1), T(2), T(3)],
                14 => vec![DccD(0), T(1), T(2)],
                15 => vec![DccD(1), T(0), T(3)],
                _ => return Err(Error::InvalidAddress(self.to_string())),
            },
            RowAddress::C(0) => vec![C0],
            RowAddress::C(1) => vec![C1],
            RowAddress::C(_) => return Err(Error::InvalidAddress(self.to_string())),
            RowAddress::D(i) if i < DATA_ROWS => vec![D(i)],
            RowAddress::D(_) => return Err(Error::InvalidAddress(self.to_string())),
        };
        WordlineSet::new(lines)
    }

    /// Physical rows touched by an ACTIVATE to this address.
    pub fn rows(self) -> Result<Vec<RowSlot>> {
        Ok(self.resolve()?.lines().iter().map(|w| w.row()).collect())
    }
}

impl fmt::Display for RowAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowAddress::B(i) => write!(f, "B{i}"),
            RowAddress::C(i) => write!(f, "C{i}"),
            RowAddress::D(i) => write!(f, "D{i}"),
        }
    }
}

impl FromStr for RowAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidAddress(s.to_string());
        let (group, idx) = s.split_at(1.min(s.len()));
        let idx: u16 = idx.parse().map_err(|_| bad())?;
        let addr = match group {
            "B" | "b" => RowAddress::B(u8::try_from(idx).map_err(|_| bad())?),
            "C" | "c" => RowAddress::C(u8::try_from(idx).map_err(|_| bad())?),
            "D" | "d" => RowAddress::D(idx),
            _ => return Err(bad()),
        };
        addr.resolve()?;
        Ok(addr)
    }
}

/// Position of a subarray in the memory system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub bank: u32,
    pub subarray: u32,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}.s{}", self.bank, self.subarray)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Activate(RowAddress),
    Precharge,
    Read,
    Write,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Annotation {
    AapFirst,
    AapSecond,
    AapPrecharge,
    ApActivate,
    ApPrecharge,
    Standalone,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DramCommand {
    pub kind: CommandKind,
    pub annotation: Annotation,
    /// Resolved wordlines; empty for anything but ACTIVATE.
    pub wordlines: Vec<Wordline>,
}

impl DramCommand {
    fn activate(addr: RowAddress, annotation: Annotation) -> Result<Self> {
        Ok(DramCommand {
            kind: CommandKind::Activate(addr),
            annotation,
            wordlines: addr.resolve()?.lines().to_vec(),
        })
    }

    fn bare(kind: CommandKind, annotation: Annotation) -> Self {
        DramCommand {
            kind,
            annotation,
            wordlines: Vec::new(),
        }
    }

    pub fn wordline_count(&self) -> usize {
        self.wordlines.len()
    }

    pub fn address(&self) -> Option<RowAddress> {
        match self.kind {
            CommandKind::Activate(a) => Some(a),
            _ => None,
        }
    }
}

/// Row copy between subarrays over the shared internal bus. Cost-only from
/// the command engine's perspective; the controller performs the data move.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsmDescriptor {
    pub bytes: u64,
    pub src: Location,
    pub src_row: String,
    pub dst: Location,
    pub dst_row: String,
}

/// Work done on the host processor rather than in DRAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HostWork {
    Bitcount { bytes: u64 },
    Fallback { op: BitwiseOp, bytes: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEntry {
    Command(DramCommand),
    Psm(PsmDescriptor),
    Host(HostWork),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Compiler,
    RowClone,
    Controller,
    Workload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceItem {
    pub entry: TraceEntry,
    pub source: TraceSource,
    /// Subarray the command targets, when known.
    pub location: Option<Location>,
    /// Index into [`CommandTrace::ops`].
    pub op: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Buddy,
    CpuFallback,
    Host,
}

/// One logical operation recorded in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpRecord {
    pub index: u32,
    pub name: String,
    pub engine: Engine,
    pub rows: u32,
}

/// Ordered command stream plus the logical operations it implements.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommandTrace {
    pub items: Vec<TraceItem>,
    pub ops: Vec<OpRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Aap(RowAddress, RowAddress),
    Ap(RowAddress),
}

/// `ACTIVATE addr1; ACTIVATE addr2; PRECHARGE`: copies the result of
/// activating `addr1` into the rows of `addr2`.
pub fn aap(addr1: RowAddress, addr2: RowAddress) -> Result<[DramCommand; 3]> {
    Ok([
        DramCommand::activate(addr1, Annotation::AapFirst)?,
        DramCommand::activate(addr2, Annotation::AapSecond)?,
        DramCommand::bare(CommandKind::Precharge, Annotation::AapPrecharge),
    ])
}

/// `ACTIVATE addr; PRECHARGE`.
pub fn ap(addr: RowAddress) -> Result<[DramCommand; 2]> {
    Ok([
        DramCommand::activate(addr, Annotation::ApActivate)?,
        DramCommand::bare(CommandKind::Precharge, Annotation::ApPrecharge),
    ])
}

impl CommandTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn commands(&self) -> impl Iterator<Item = &DramCommand> {
        self.items.iter().filter_map(|i| match &i.entry {
            TraceEntry::Command(c) => Some(c),
            _ => None,
        })
    }

    pub fn begin_op(&mut self, name: impl Into<String>, engine: Engine, rows: u32) -> u32 {
        let index = self.ops.len() as u32;
        self.ops.push(OpRecord {
            index,
            name: name.into(),
            engine,
            rows,
        });
        index
    }

    pub fn push(
        &mut self,
        entry: TraceEntry,
        source: TraceSource,
        location: Option<Location>,
        op: Option<u32>,
    ) {
        self.items.push(TraceItem {
            entry,
            source,
            location,
            op,
        });
    }

    pub fn push_step(
        &mut self,
        step: Step,
        source: TraceSource,
        location: Option<Location>,
        op: Option<u32>,
    ) -> Result<()> {
        let commands: Vec<DramCommand> = match step {
            Step::Aap(a, b) => aap(a, b)?.into(),
            Step::Ap(a) => ap(a)?.into(),
        };
        for c in commands {
            self.push(TraceEntry::Command(c), source, location, op);
        }
        Ok(())
    }

    /// Append `other`, renumbering its operation indices.
    pub fn append(&mut self, other: CommandTrace) {
        let base = self.ops.len() as u32;
        self.ops.extend(other.ops.into_iter().map(|mut o| {
            o.index += base;
            o
        }));
        self.items.extend(other.items.into_iter().map(|mut i| {
            i.op = i.op.map(|o| o + base);
            i
        }));
    }

    /// Set the subarray of every item that has none yet.
    pub fn locate(&mut self, location: Location) {
        for item in &mut self.items {
            item.location.get_or_insert(location);
        }
    }

    /// Checks AAP/AP grouping and that the trace ends precharged.
    pub fn validate(&self) -> Result<()> {
        use Annotation::*;
        let mut expect: Option<Annotation> = None;
        let mut open = false;
        for (i, item) in self.items.iter().enumerate() {
            let bad = |why: &str| Err(Error::MalformedTrace(format!("item {i}: {why}")));
            match &item.entry {
                TraceEntry::Command(c) => {
                    if let Some(want) = expect {
                        if c.annotation != want {
                            return bad(&format!("expected {want:?}, got {:?}", c.annotation));
                        }
                    }
                    let kind_ok = match c.annotation {
                        AapFirst | AapSecond | ApActivate => {
                            matches!(c.kind, CommandKind::Activate(_))
                        }
                        AapPrecharge | ApPrecharge => c.kind == CommandKind::Precharge,
                        Standalone => true,
                    };
                    if !kind_ok {
                        return bad("annotation does not match command kind");
                    }
                    if matches!(c.kind, CommandKind::Activate(_))
                        && !(1..=3).contains(&c.wordline_count())
                    {
                        return bad("ACTIVATE without resolved wordlines");
                    }
                    expect = match c.annotation {
                        AapFirst => Some(AapSecond),
                        AapSecond => Some(AapPrecharge),
                        ApActivate => Some(ApPrecharge),
                        _ => None,
                    };
                    if matches!(c.annotation, AapFirst | ApActivate) && open {
                        return bad("bank already activated");
                    }
                    open = match c.kind {
                        CommandKind::Activate(_) => true,
                        CommandKind::Precharge => false,
                        _ => open,
                    };
                }
                _ => {
                    if expect.is_some() || open {
                        return bad("host/PSM work inside an open command group");
                    }
                }
            }
        }
        if expect.is_some() || open {
            return Err(Error::MalformedTrace(
                "trace does not end precharged".into(),
            ));
        }
        Ok(())
    }

    pub fn summary(&self) -> TraceSummary {
        let mut s = TraceSummary::default();
        for item in &self.items {
            match &item.entry {
                TraceEntry::Command(c) => match (c.kind, c.annotation) {
                    (CommandKind::Activate(_), a) => {
                        s.activates += 1;
                        match a {
                            Annotation::AapFirst => s.aaps += 1,
                            Annotation::ApActivate => s.aps += 1,
                            _ => {}
                        }
                    }
                    (CommandKind::Precharge, _) => s.precharges += 1,
                    _ => s.reads_writes += 1,
                },
                TraceEntry::Psm(_) => s.psm += 1,
                TraceEntry::Host(HostWork::Bitcount { .. }) => s.host_bitcounts += 1,
                TraceEntry::Host(HostWork::Fallback { .. }) => s.cpu_fallbacks += 1,
            }
        }
        for op in &self.ops {
            *s.op_counts.entry(op.name.clone()).or_default() += 1;
        }
        s
    }

    /// One JSON object per line, one line per trace item.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (seq, item) in self.items.iter().enumerate() {
            let record = TraceRecord::from_item(seq, item);
            out.push_str(&serde_json::to_string(&record).expect("trace record serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub aaps: u64,
    pub aps: u64,
    pub activates: u64,
    pub precharges: u64,
    pub reads_writes: u64,
    pub psm: u64,
    pub host_bitcounts: u64,
    pub cpu_fallbacks: u64,
    pub op_counts: BTreeMap<String, u64>,
}

/// Line format of the JSON-lines trace export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seq: usize,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub addr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wordlines: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wordline_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotation: Option<Annotation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub src: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dst: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bitwise_op: Option<BitwiseOp>,
    pub source: TraceSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op: Option<u32>,
}

impl TraceRecord {
    fn from_item(seq: usize, item: &TraceItem) -> Self {
        let mut r = TraceRecord {
            seq,
            kind: String::new(),
            addr: None,
            wordlines: None,
            wordline_count: None,
            annotation: None,
            bytes: None,
            src: None,
            dst: None,
            bitwise_op: None,
            source: item.source,
            location: item.location.map(|l| l.to_string()),
            op: item.op,
        };
        match &item.entry {
            TraceEntry::Command(c) => {
                r.kind = match c.kind {
                    CommandKind::Activate(_) => "ACTIVATE",
                    CommandKind::Precharge => "PRECHARGE",
                    CommandKind::Read => "READ",
                    CommandKind::Write => "WRITE",
                }
                .into();
                r.annotation = Some(c.annotation);
                if let Some(a) = c.address() {
                    r.addr = Some(a.to_string());
                    r.wordlines = Some(c.wordlines.iter().map(|w| w.to_string()).collect());
                    r.wordline_count = Some(c.wordline_count());
                }
            }
            TraceEntry::Psm(p) => {
                r.kind = "PSM".into();
                r.bytes = Some(p.bytes);
                r.src = Some(format!("{}.{}", p.src, p.src_row));
                r.dst = Some(format!("{}.{}", p.dst, p.dst_row));
            }
            TraceEntry::Host(HostWork::Bitcount { bytes }) => {
                r.kind = "HOST_BITCOUNT".into();
                r.bytes = Some(*bytes);
            }
            TraceEntry::Host(HostWork::Fallback { op, bytes }) => {
                r.kind = "CPU_FALLBACK".into();
                r.bytes = Some(*bytes);
                r.bitwise_op = Some(*op);
            }
        }
        r
    }
}

fn check_operand(addr: RowAddress, role: &str) -> Result<()> {
    match addr {
        RowAddress::D(i) if i < DATA_ROWS => Ok(()),
        RowAddress::B(i) if i < 4 => Ok(()),
        _ => Err(Error::InvalidAddress(format!(
            "{addr} cannot be a {role} operand (data rows or T0-T3 only)"
        ))),
    }
}

/// Command steps for `dst = op(src1, src2)`.
pub fn bitwise_steps(
    op: BitwiseOp,
    dst: RowAddress,
    src1: RowAddress,
    src2: Option<RowAddress>,
) -> Result<Vec<Step>> {
    use RowAddress::{B, C};
    use Step::{Aap, Ap};
    if src2.is_some() != op.is_binary() {
        return Err(Error::Arity {
            op: op.name(),
            expected: op.arity(),
        });
    }
    check_operand(dst, "destination")?;
    check_operand(src1, "source")?;
    if let Some(s2) = src2 {
        check_operand(s2, "source")?;
    }
    let s2 = src2.unwrap_or(src1);
    let steps = match op {
        BitwiseOp::Not => vec![Aap(src1, B(5)), Aap(B(4), dst)],
        BitwiseOp::And | BitwiseOp::Or => {
            let ctrl = if op == BitwiseOp::And { C(0) } else { C(1) };
            vec![
                Aap(src1, B(0)),
                Aap(s2, B(1)),
                Aap(ctrl, B(2)),
                Aap(B(12), dst),
            ]
        }
        BitwiseOp::Nand | BitwiseOp::Nor => {
            let ctrl = if op == BitwiseOp::Nand { C(0) } else { C(1) };
            vec![
                Aap(src1, B(0)),
                Aap(s2, B(1)),
                Aap(ctrl, B(2)),
                Aap(B(12), B(5)),
                Aap(B(4), dst),
            ]
        }
        // xor:  (!a & b) | (a & !b), built with C0 then combined with C1.
        // xnor: (!a | b) & (a | !b), the same steps with the controls swapped.
        BitwiseOp::Xor | BitwiseOp::Xnor => {
            let (first, second) = if op == BitwiseOp::Xor {
                (C(0), C(1))
            } else {
                (C(1), C(0))
            };
            vec![
                Aap(src1, B(8)),
                Aap(s2, B(9)),
                Aap(first, B(10)),
                Ap(B(14)),
                Ap(B(15)),
                Aap(second, B(2)),
                Aap(B(13), dst),
            ]
        }
    };
    check_aliasing(&steps, dst, src1, src2)?;
    Ok(steps)
}

/// Every source must still hold its original value when first read.
fn check_aliasing(
    steps: &[Step],
    dst: RowAddress,
    src1: RowAddress,
    src2: Option<RowAddress>,
) -> Result<()> {
    let mut written: Vec<RowSlot> = Vec::new();
    let mut pending: Vec<RowAddress> = std::iter::once(src1).chain(src2).collect();
    for step in steps {
        let (first, second) = match *step {
            Step::Aap(a, b) => (a, Some(b)),
            Step::Ap(a) => (a, None),
        };
        if pending.contains(&first) {
            let rows = first.rows()?;
            if rows.iter().any(|r| written.contains(r)) {
                return Err(Error::SameRow(format!(
                    "{first} is overwritten before it is read"
                )));
            }
            pending.retain(|p| *p != first);
        }
        let first_rows = first.rows()?;
        if first_rows.len() > 1 {
            written.extend(first_rows);
        }
        if let Some(b) = second {
            written.extend(b.rows()?);
        }
    }
    if !pending.is_empty() {
        return Err(Error::SameRow(format!(
            "{} never read; destination {dst}",
            pending[0]
        )));
    }
    Ok(())
}

/// Compile `dst = op(src1, src2)` into a command trace.
///
/// Sources are copied into the designated rows before anything is
/// overwritten, so `dst` may alias a data-row source.
pub fn compile_bitwise(
    op: BitwiseOp,
    dst: RowAddress,
    src1: RowAddress,
    src2: Option<RowAddress>,
) -> Result<CommandTrace> {
    let steps = bitwise_steps(op, dst, src1, src2)?;
    let mut trace = CommandTrace::new();
    let index = trace.begin_op(op.name(), Engine::Buddy, 1);
    for step in steps {
        trace.push_step(step, TraceSource::Compiler, None, Some(index))?;
    }
    Ok(trace)
}

/// Row address inside a specific subarray.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocatedRow {
    pub location: Location,
    pub addr: RowAddress,
}

/// In-subarray row copy: a single `AAP`.
pub fn rowclone_fpm(src: LocatedRow, dst: LocatedRow) -> Result<CommandTrace> {
    if src.location != dst.location {
        return Err(Error::CrossSubarray);
    }
    let mut trace = CommandTrace::new();
    let index = trace.begin_op("rowclone_fpm", Engine::Buddy, 1);
    trace.push_step(
        Step::Aap(src.addr, dst.addr),
        TraceSource::RowClone,
        Some(src.location),
        Some(index),
    )?;
    Ok(trace)
}

/// Row copy across subarrays over the internal bus.
pub fn rowclone_psm(src: LocatedRow, dst: LocatedRow, row_bytes: u64) -> PsmDescriptor {
    PsmDescriptor {
        bytes: row_bytes,
        src: src.location,
        src_row: src.addr.to_string(),
        dst: dst.location,
        dst_row: dst.addr.to_string(),
    }
}

/// Notes recorded while executing a trace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub commands: usize,
    pub fault_bits: usize,
    pub faults: Vec<ExecutionNote>,
    pub stale: Vec<ExecutionNote>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionNote {
    pub item: usize,
    pub addr: String,
    pub detail: String,
}

impl ExecutionReport {
    pub fn has_faults(&self) -> bool {
        self.fault_bits > 0
    }

    pub fn merge(&mut self, other: ExecutionReport) {
        self.commands += other.commands;
        self.fault_bits += other.fault_bits;
        self.faults.extend(other.faults);
        self.stale.extend(other.stale);
    }

    pub(crate) fn note(&mut self, item: usize, cmd: &DramCommand, rep: &ActivationReport) {
        let addr = cmd.address().map(|a| a.to_string()).unwrap_or_default();
        if rep.fault_bits > 0 {
            self.fault_bits += rep.fault_bits;
            self.faults.push(ExecutionNote {
                item,
                addr: addr.clone(),
                detail: format!("RELIABILITY_FAULT on {} bit(s)", rep.fault_bits),
            });
        }
        if !rep.stale_rows.is_empty() {
            self.stale.push(ExecutionNote {
                item,
                addr,
                detail: format!("STALE_SOURCE {}", rep.stale_rows.join(",")),
            });
        }
    }
}

/// Apply one DRAM command to a subarray.
pub fn execute_command(
    state: &mut SubarrayState,
    cmd: &DramCommand,
) -> Result<Option<ActivationReport>> {
    match cmd.kind {
        CommandKind::Activate(addr) => Ok(Some(state.activate(&addr.resolve()?)?)),
        CommandKind::Precharge => {
            state.precharge();
            Ok(None)
        }
        // Bitwise sequences carry no data transfer; READ/WRITE only check protocol.
        CommandKind::Read => state.read_row().map(|_| None),
        CommandKind::Write => {
            if state.phase() == Phase::Precharged {
                Err(Error::NotActivated)
            } else {
                Ok(None)
            }
        }
    }
}

/// Run a well-formed trace of DRAM commands against one subarray.
pub fn execute(trace: &CommandTrace, state: &mut SubarrayState) -> Result<ExecutionReport> {
    trace.validate()?;
    let mut report = ExecutionReport::default();
    for (i, item) in trace.items.iter().enumerate() {
        match &item.entry {
            TraceEntry::Command(cmd) => {
                if let Some(rep) = execute_command(state, cmd)? {
                    report.note(i, cmd, &rep);
                }
                report.commands += 1;
            }
            _ => {
                return Err(Error::MalformedTrace(format!(
                    "item {i} needs the controller (PSM or host work)"
                )))
            }
        }
    }
    Ok(report)
}
