//! Functional state machine of one DRAM subarray.
//!
//! A subarray holds the ordinary data rows plus the reserved rows used for
//! bulk bitwise operations: four designated rows `T0..T3` for triple-row
//! activation, two rows of dual-contact cells (each reachable through a
//! d-wordline on the bitline side and an n-wordline on the bitline-bar side),
//! and the constant rows `C0` (all zeros) and `C1` (all ones).

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analog::{ReliabilityMode, ReliabilityModel};
use crate::bits::BitRow;
use crate::error::{Error, Result};

/// Data rows exposed per 1024-row subarray.
pub const DATA_ROWS: u16 = 1006;
/// Row addresses per subarray: 16 bitwise + 2 control + 1006 data.
pub const ROW_ADDRESSES: u16 = 1024;
/// Row-equivalents reserved for the bitwise machinery: 4 designated rows,
/// 2 dual-contact rows at two cells each, and 2 control rows.
pub const RESERVED_ROW_EQUIVALENTS: u16 = 10;
pub const DEFAULT_ROW_BITS: usize = 8 * 1024 * 8;

/// Physical row of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowSlot {
    T(u8),
    Dcc(u8),
    C0,
    C1,
    D(u16),
}

impl fmt::Display for RowSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowSlot::T(i) => write!(f, "T{i}"),
            RowSlot::Dcc(i) => write!(f, "DCC{i}"),
            RowSlot::C0 => f.write_str("C0"),
            RowSlot::C1 => f.write_str("C1"),
            RowSlot::D(i) => write!(f, "D{i}"),
        }
    }
}

/// A single wordline. Dual-contact rows have two: `DccD` gates the
/// bitline-side transistor, `DccN` the bitline-bar side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Wordline {
    T(u8),
    DccD(u8),
    DccN(u8),
    C0,
    C1,
    D(u16),
}

impl Wordline {
    pub fn row(self) -> RowSlot {
        match self {
            Wordline::T(i) => RowSlot::T(i),
            Wordline::DccD(i) | Wordline::DccN(i) => RowSlot::Dcc(i),
            Wordline::C0 => RowSlot::C0,
            Wordline::C1 => RowSlot::C1,
            Wordline::D(i) => RowSlot::D(i),
        }
    }

    /// Connected to bitline-bar rather than the bitline.
    pub fn is_negated(self) -> bool {
        matches!(self, Wordline::DccN(_))
    }
}

impl fmt::Display for Wordline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Wordline::T(i) => write!(f, "T{i}"),
            Wordline::DccD(i) => write!(f, "DCC{i}"),
            Wordline::DccN(i) => write!(f, "DCC{i}_N"),
            Wordline::C0 => f.write_str("C0"),
            Wordline::C1 => f.write_str("C1"),
            Wordline::D(i) => write!(f, "D{i}"),
        }
    }
}

impl FromStr for Wordline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidAddress(s.to_string());
        let idx = |t: &str| t.parse::<u16>().map_err(|_| bad());
        match s {
            "C0" => Ok(Wordline::C0),
            "C1" => Ok(Wordline::C1),
            _ if s.starts_with("DCC") && s.ends_with("_N") => {
                Ok(Wordline::DccN(idx(&s[3..s.len() - 2])? as u8))
            }
            _ if s.starts_with("DCC") => Ok(Wordline::DccD(idx(&s[3..])? as u8)),
            _ if s.starts_with('T') => Ok(Wordline::T(idx(&s[1..])? as u8)),
            _ if s.starts_with('D') => Ok(Wordline::D(idx(&s[1..])?)),
            _ => Err(bad()),
        }
    }
}

/// One to three wordlines raised by a single ACTIVATE, no two on the same
/// physical row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WordlineSet(Vec<Wordline>);

impl WordlineSet {
    pub fn new(lines: Vec<Wordline>) -> Result<Self> {
        if lines.is_empty() || lines.len() > 3 {
            return Err(Error::Protocol(format!(
                "an ACTIVATE raises 1 to 3 wordlines, got {}",
                lines.len()
            )));
        }
        for (i, a) in lines.iter().enumerate() {
            if lines[i + 1..].iter().any(|b| a.row() == b.row()) {
                return Err(Error::Protocol(format!("row {} raised twice", a.row())));
            }
        }
        Ok(WordlineSet(lines))
    }

    pub fn single(line: Wordline) -> Self {
        WordlineSet(vec![line])
    }

    pub fn lines(&self) -> &[Wordline] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for WordlineSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        f.write_str(&names.join("+"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    Precharged,
    Activated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubarrayConfig {
    pub row_bits: usize,
    pub data_rows: u16,
    /// Operation-counter distance after which an untouched row counts as
    /// stale; `None` disables staleness.
    pub stale_window: Option<u64>,
}

impl Default for SubarrayConfig {
    fn default() -> Self {
        SubarrayConfig {
            row_bits: DEFAULT_ROW_BITS,
            data_rows: DATA_ROWS,
            stale_window: None,
        }
    }
}

impl SubarrayConfig {
    pub fn with_row_bits(row_bits: usize) -> Self {
        SubarrayConfig {
            row_bits,
            ..Default::default()
        }
    }

    pub fn row_bytes(&self) -> usize {
        self.row_bits / 8
    }
}

/// Per-cell capacitance multipliers; rows without an entry are nominal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariationProfile {
    caps: HashMap<RowSlot, Vec<f64>>,
}

impl VariationProfile {
    pub fn set_row(&mut self, row: RowSlot, caps: Vec<f64>) {
        self.caps.insert(row, caps);
    }

    pub fn cap(&self, row: RowSlot, bit: usize) -> f64 {
        self.caps.get(&row).map_or(1.0, |c| c[bit])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationType {
    Single,
    Double,
    Triple,
    /// A second ACTIVATE into an already activated bank: raised rows are
    /// overwritten with the latched value.
    ForcedCopy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationReport {
    pub wordlines: usize,
    pub kind: ActivationType,
    /// Bit positions whose outcome was a tie or a calibrated failure.
    pub fault_bits: usize,
    pub stale_rows: Vec<String>,
}

impl ActivationReport {
    pub fn check(&self, lines: &WordlineSet) -> Result<()> {
        if self.fault_bits > 0 {
            return Err(Error::ReliabilityFault {
                bits: self.fault_bits,
                wordlines: lines.to_string(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SubarrayState {
    config: SubarrayConfig,
    reliability: ReliabilityModel,
    designated: [BitRow; 4],
    dcc: [BitRow; 2],
    c0: BitRow,
    c1: BitRow,
    data: Vec<Option<BitRow>>,
    latch: Option<BitRow>,
    raised: Vec<Wordline>,
    tick: u64,
    touched: HashMap<RowSlot, u64>,
    variation: Option<VariationProfile>,
}

impl SubarrayState {
    pub fn new(config: SubarrayConfig) -> Self {
        Self::with_reliability(config, ReliabilityModel::default())
    }

    pub fn with_reliability(config: SubarrayConfig, reliability: ReliabilityModel) -> Self {
        let n = config.row_bits;
        SubarrayState {
            designated: std::array::from_fn(|_| BitRow::zeros(n)),
            dcc: std::array::from_fn(|_| BitRow::zeros(n)),
            c0: BitRow::zeros(n),
            c1: BitRow::ones(n),
            data: vec![None; usize::from(config.data_rows)],
            latch: None,
            raised: Vec::new(),
            tick: 0,
            touched: HashMap::new(),
            variation: None,
            config,
            reliability,
        }
    }

    pub fn config(&self) -> &SubarrayConfig {
        &self.config
    }

    pub fn reliability(&self) -> &ReliabilityModel {
        &self.reliability
    }

    pub fn set_reliability(&mut self, reliability: ReliabilityModel) {
        self.reliability = reliability;
    }

    pub fn set_variation(&mut self, variation: Option<VariationProfile>) {
        self.variation = variation;
    }

    pub fn row_bits(&self) -> usize {
        self.config.row_bits
    }

    pub fn phase(&self) -> Phase {
        if self.latch.is_some() {
            Phase::Activated
        } else {
            Phase::Precharged
        }
    }

    pub fn latch(&self) -> Option<&BitRow> {
        self.latch.as_ref()
    }

    pub fn raised(&self) -> &[Wordline] {
        &self.raised
    }

    /// Logical command counter used for staleness.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    fn check_slot(&self, slot: RowSlot) -> Result<()> {
        let ok = match slot {
            RowSlot::T(i) => i < 4,
            RowSlot::Dcc(i) => i < 2,
            RowSlot::C0 | RowSlot::C1 => true,
            RowSlot::D(i) => i < self.config.data_rows,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidAddress(slot.to_string()))
        }
    }

    /// Contents of a physical row. Data rows never written read as zeros.
    pub fn row(&self, slot: RowSlot) -> Result<BitRow> {
        self.check_slot(slot)?;
        Ok(self
            .row_ref(slot)
            .cloned()
            .unwrap_or_else(|| BitRow::zeros(self.row_bits())))
    }

    fn row_ref(&self, slot: RowSlot) -> Option<&BitRow> {
        match slot {
            RowSlot::T(i) => Some(&self.designated[usize::from(i)]),
            RowSlot::Dcc(i) => Some(&self.dcc[usize::from(i)]),
            RowSlot::C0 => Some(&self.c0),
            RowSlot::C1 => Some(&self.c1),
            RowSlot::D(i) => self.data[usize::from(i)].as_ref(),
        }
    }

    fn store(&mut self, slot: RowSlot, bits: BitRow) {
        match slot {
            RowSlot::T(i) => self.designated[usize::from(i)] = bits,
            RowSlot::Dcc(i) => self.dcc[usize::from(i)] = bits,
            RowSlot::C0 | RowSlot::C1 => unreachable!("constant rows are never stored"),
            RowSlot::D(i) => self.data[usize::from(i)] = Some(bits),
        }
        self.touched.insert(slot, self.tick);
    }

    /// Host-side initialization of a row, outside the DRAM command protocol
    /// (test setup, RowClone-PSM landing).
    pub fn load_row(&mut self, slot: RowSlot, bits: BitRow) -> Result<()> {
        self.check_slot(slot)?;
        self.check_len(&bits)?;
        if matches!(slot, RowSlot::C0 | RowSlot::C1) {
            return Err(Error::Protocol(format!("constant row {slot} is read-only")));
        }
        if self.phase() == Phase::Activated {
            return Err(Error::Protocol(
                "cannot load a row while the bank is activated".into(),
            ));
        }
        self.store(slot, bits);
        Ok(())
    }

    fn check_len(&self, bits: &BitRow) -> Result<()> {
        if bits.len() != self.row_bits() {
            return Err(Error::RowLength {
                expected: self.row_bits(),
                got: bits.len(),
            });
        }
        Ok(())
    }

    fn is_stale(&self, slot: RowSlot) -> bool {
        if matches!(slot, RowSlot::C0 | RowSlot::C1) {
            return false;
        }
        match self.config.stale_window {
            Some(window) => self.tick - self.touched.get(&slot).copied().unwrap_or(0) > window,
            None => false,
        }
    }

    /// ACTIVATE the given wordlines.
    ///
    /// From the precharged state the bitlines share charge with every raised
    /// cell and the sense amplifiers latch the outcome, which is then written
    /// back into every connected cell (complemented through n-wordlines).
    /// From the activated state the latched value is forced into the newly
    /// raised rows without recomputation.
    pub fn activate(&mut self, lines: &WordlineSet) -> Result<ActivationReport> {
        for line in lines.lines() {
            self.check_slot(line.row())?;
        }
        let report = match self.latch.take() {
            None => self.activate_precharged(lines),
            Some(latch) => {
                let r = self.activate_forced(lines, &latch);
                self.latch = Some(latch);
                r
            }
        }?;
        self.tick += 1;
        Ok(report)
    }

    fn activate_precharged(&mut self, lines: &WordlineSet) -> Result<ActivationReport> {
        let stale_rows: Vec<String> = lines
            .lines()
            .iter()
            .filter(|l| self.is_stale(l.row()))
            .map(|l| l.row().to_string())
            .collect();

        let n = self.row_bits();
        let inputs: Vec<BitRow> = lines
            .lines()
            .iter()
            .map(|&l| {
                let row = self
                    .row_ref(l.row())
                    .cloned()
                    .unwrap_or_else(|| BitRow::zeros(n));
                if l.is_negated() {
                    row.not()
                } else {
                    row
                }
            })
            .collect();

        let slow = self.variation.is_some() && self.reliability.mode != ReliabilityMode::Ideal;
        let (latch, fault_bits) = if slow {
            self.resolve_per_bit(lines, &inputs)
        } else {
            resolve_nominal(&inputs)
        };

        // Constant rows must come out of the activation unchanged.
        for (&line, _) in lines.lines().iter().zip(&inputs) {
            if let Some(expected) = constant_row_value(line.row(), n) {
                if latch != expected {
                    return Err(Error::Protocol(format!(
                        "activation of {lines} would overwrite constant row {}",
                        line.row()
                    )));
                }
            }
        }

        for &line in lines.lines() {
            if !matches!(line.row(), RowSlot::C0 | RowSlot::C1) {
                let value = if line.is_negated() {
                    latch.not()
                } else {
                    latch.clone()
                };
                self.store(line.row(), value);
            }
        }
        self.raised = lines.lines().to_vec();
        self.latch = Some(latch);
        let kind = match lines.len() {
            1 => ActivationType::Single,
            2 => ActivationType::Double,
            _ => ActivationType::Triple,
        };
        Ok(ActivationReport {
            wordlines: lines.len(),
            kind,
            fault_bits,
            stale_rows,
        })
    }

    fn resolve_per_bit(&self, lines: &WordlineSet, inputs: &[BitRow]) -> (BitRow, usize) {
        let profile = self.variation.as_ref().expect("slow path has a profile");
        let mut latch = BitRow::zeros(self.row_bits());
        let mut faults = 0;
        let mut bits = Vec::with_capacity(3);
        let mut caps = Vec::with_capacity(3);
        for i in 0..self.row_bits() {
            bits.clear();
            caps.clear();
            for (line, row) in lines.lines().iter().zip(inputs) {
                bits.push(row.get(i));
                caps.push(profile.cap(line.row(), i));
            }
            let out = self.reliability.resolve(&bits, &caps);
            latch.set(i, out.value);
            faults += usize::from(out.fault);
        }
        (latch, faults)
    }

    fn activate_forced(&mut self, lines: &WordlineSet, latch: &BitRow) -> Result<ActivationReport> {
        if lines.len() == 3 {
            return Err(Error::Protocol(format!(
                "triple-row activation {lines} issued to an activated bank"
            )));
        }
        for &line in lines.lines() {
            if matches!(line.row(), RowSlot::C0 | RowSlot::C1) {
                return Err(Error::Protocol(format!(
                    "constant row {} used as an overwrite target",
                    line.row()
                )));
            }
            if let Some(&other) = self.raised.iter().find(|r| r.row() == line.row()) {
                if other.is_negated() != line.is_negated() {
                    return Err(Error::Protocol(format!(
                        "{line} raised while {other} drives the same cells"
                    )));
                }
            }
        }
        for &line in lines.lines() {
            let value = if line.is_negated() {
                latch.not()
            } else {
                latch.clone()
            };
            self.store(line.row(), value);
            if !self.raised.contains(&line) {
                self.raised.push(line);
            }
        }
        Ok(ActivationReport {
            wordlines: lines.len(),
            kind: ActivationType::ForcedCopy,
            fault_bits: 0,
            stale_rows: Vec::new(),
        })
    }

    /// PRECHARGE: lower all wordlines and release the sense amplifiers.
    pub fn precharge(&mut self) {
        self.latch = None;
        self.raised.clear();
        self.tick += 1;
    }

    /// READ the latched row.
    pub fn read_row(&self) -> Result<BitRow> {
        self.latch.clone().ok_or(Error::NotActivated)
    }

    /// WRITE through the sense amplifiers into every raised row.
    pub fn write_row(&mut self, bits: BitRow) -> Result<()> {
        if self.latch.is_none() {
            return Err(Error::NotActivated);
        }
        self.check_len(&bits)?;
        if let Some(c) = self
            .raised
            .iter()
            .find(|l| matches!(l.row(), RowSlot::C0 | RowSlot::C1))
        {
            return Err(Error::Protocol(format!(
                "WRITE into constant row {}",
                c.row()
            )));
        }
        for line in self.raised.clone() {
            let value = if line.is_negated() {
                bits.not()
            } else {
                bits.clone()
            };
            self.store(line.row(), value);
        }
        self.latch = Some(bits);
        Ok(())
    }

    pub fn snapshot(&self) -> SubarraySnapshot {
        let mut touched: BTreeMap<String, u64> = BTreeMap::new();
        for (slot, t) in &self.touched {
            touched.insert(slot.to_string(), *t);
        }
        SubarraySnapshot {
            schema_version: crate::SCHEMA_VERSION,
            row_bits: self.row_bits(),
            data_rows: self.config.data_rows,
            tick: self.tick,
            phase: self.phase(),
            latch: self.latch.as_ref().map(BitRow::to_hex),
            raised: self.raised.iter().map(|w| w.to_string()).collect(),
            designated: self.designated.iter().map(BitRow::to_hex).collect(),
            dcc: self.dcc.iter().map(BitRow::to_hex).collect(),
            data: self
                .data
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.as_ref().map(|r| (i as u16, r.to_hex())))
                .collect(),
            touched,
        }
    }

    pub fn restore(snapshot: &SubarraySnapshot, stale_window: Option<u64>) -> Result<Self> {
        let config = SubarrayConfig {
            row_bits: snapshot.row_bits,
            data_rows: snapshot.data_rows,
            stale_window,
        };
        let n = config.row_bits;
        let mut state = SubarrayState::new(config);
        if snapshot.designated.len() != 4 || snapshot.dcc.len() != 2 {
            return Err(Error::Json(
                "snapshot needs 4 designated and 2 DCC rows".into(),
            ));
        }
        for (i, h) in snapshot.designated.iter().enumerate() {
            state.designated[i] = BitRow::from_hex(n, h)?;
        }
        for (i, h) in snapshot.dcc.iter().enumerate() {
            state.dcc[i] = BitRow::from_hex(n, h)?;
        }
        for (&i, h) in &snapshot.data {
            state.check_slot(RowSlot::D(i))?;
            state.data[usize::from(i)] = Some(BitRow::from_hex(n, h)?);
        }
        state.latch = snapshot
            .latch
            .as_deref()
            .map(|h| BitRow::from_hex(n, h))
            .transpose()?;
        state.raised = snapshot
            .raised
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<Wordline>>>()?;
        if (snapshot.phase == Phase::Activated) != state.latch.is_some() {
            return Err(Error::Json("snapshot phase disagrees with latch".into()));
        }
        state.tick = snapshot.tick;
        for (name, &t) in &snapshot.touched {
            let slot = name.parse::<Wordline>()?.row();
            state.touched.insert(slot, t);
        }
        Ok(state)
    }
}

fn constant_row_value(slot: RowSlot, n: usize) -> Option<BitRow> {
    match slot {
        RowSlot::C0 => Some(BitRow::zeros(n)),
        RowSlot::C1 => Some(BitRow::ones(n)),
        _ => None,
    }
}

/// Word-parallel resolution for nominal cells: one cell passes through, two
/// cells tie wherever they disagree, three cells resolve to the majority.
fn resolve_nominal(inputs: &[BitRow]) -> (BitRow, usize) {
    match inputs {
        [a] => (a.clone(), 0),
        [a, b] => {
            let ties = a.zip_with(b, |x, y| x ^ y).count_ones() as usize;
            (a.zip_with(b, |x, y| x & y), ties)
        }
        [a, b, c] => {
            let ab = a.zip_with(b, |x, y| x & y);
            let or_ab = a.zip_with(b, |x, y| x | y);
            let maj = ab.zip_with(&or_ab.zip_with(c, |x, y| x & y), |x, y| x | y);
            (maj, 0)
        }
        _ => unreachable!("wordline sets hold 1 to 3 lines"),
    }
}

/// JSON snapshot of a subarray with rows as little-endian hex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubarraySnapshot {
    pub schema_version: u32,
    pub row_bits: usize,
    pub data_rows: u16,
    pub tick: u64,
    pub phase: Phase,
    pub latch: Option<String>,
    pub raised: Vec<String>,
    pub designated: Vec<String>,
    pub dcc: Vec<String>,
    pub data: BTreeMap<u16, String>,
    pub touched: BTreeMap<String, u64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const BITS: usize = 1024;

    fn small() -> SubarrayState {
        SubarrayState::new(SubarrayConfig::with_row_bits(BITS))
    }

    fn set(lines: &[Wordline]) -> WordlineSet {
        WordlineSet::new(lines.to_vec()).unwrap()
    }

    #[test]
    fn single_activation_latches_and_preserves() {
        let mut s = small();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let row = BitRow::random(BITS, &mut rng);
        s.load_row(RowSlot::D(5), row.clone()).unwrap();
        let rep = s.activate(&WordlineSet::single(Wordline::D(5))).unwrap();
        assert_eq!(rep.kind, ActivationType::Single);
        assert_eq!(s.read_row().unwrap(), row);
        s.precharge();
        assert_eq!(s.row(RowSlot::D(5)).unwrap(), row);
    }

    #[test]
    fn triple_activation_overwrites_all_three() {
        let mut s = small();
        let a = BitRow::from_bits((0..BITS).map(|i| i % 2 == 0));
        let b = BitRow::from_bits((0..BITS).map(|i| i % 3 == 0));
        let c = BitRow::from_bits((0..BITS).map(|i| i % 5 == 0));
        s.load_row(RowSlot::T(0), a.clone()).unwrap();
        s.load_row(RowSlot::T(1), b.clone()).unwrap();
        s.load_row(RowSlot::T(2), c.clone()).unwrap();
        let rep = s
            .activate(&set(&[Wordline::T(0), Wordline::T(1), Wordline::T(2)]))
            .unwrap();
        assert_eq!(rep.kind, ActivationType::Triple);
        assert_eq!(rep.fault_bits, 0);
        s.precharge();
        let expect = BitRow::from_bits((0..BITS).map(|i| {
            [a.get(i), b.get(i), c.get(i)]
                .iter()
                .filter(|&&x| x)
                .count()
                >= 2
        }));
        for t in 0..3 {
            assert_eq!(s.row(RowSlot::T(t)).unwrap(), expect);
        }
        assert_eq!(s.phase(), Phase::Precharged);
    }

    #[test]
    fn n_wordline_stores_complement() {
        let mut s = small();
        s.load_row(RowSlot::D(1), BitRow::ones(BITS)).unwrap();
        s.activate(&WordlineSet::single(Wordline::D(1))).unwrap();
        s.activate(&WordlineSet::single(Wordline::DccN(0))).unwrap();
        s.precharge();
        assert_eq!(s.row(RowSlot::Dcc(0)).unwrap(), BitRow::zeros(BITS));
    }

    #[test]
    fn four_step_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut s = small();
            let src = BitRow::random(BITS, &mut rng);
            s.load_row(RowSlot::D(9), src.clone()).unwrap();
            s.activate(&WordlineSet::single(Wordline::D(9))).unwrap();
            s.activate(&WordlineSet::single(Wordline::DccN(1))).unwrap();
            s.precharge();
            s.activate(&WordlineSet::single(Wordline::DccD(1))).unwrap();
            assert_eq!(s.read_row().unwrap(), src.not());
            s.precharge();
            assert_eq!(s.row(RowSlot::D(9)).unwrap(), src);
        }
    }

    #[test]
    fn double_activation_conflict_faults() {
        let mut s = small();
        s.load_row(RowSlot::T(2), BitRow::ones(BITS)).unwrap();
        let lines = set(&[Wordline::T(2), Wordline::T(3)]);
        let rep = s.activate(&lines).unwrap();
        assert_eq!(rep.fault_bits, BITS);
        assert!(matches!(
            rep.check(&lines),
            Err(Error::ReliabilityFault { .. })
        ));
    }

    #[test]
    fn precharge_idempotent() {
        let mut s = small();
        s.precharge();
        s.precharge();
        assert_eq!(s.phase(), Phase::Precharged);
        assert!(s.raised().is_empty());
    }

    #[test]
    fn read_write_need_activation() {
        let mut s = small();
        assert_eq!(s.read_row(), Err(Error::NotActivated));
        assert_eq!(s.write_row(BitRow::ones(BITS)), Err(Error::NotActivated));
        s.activate(&WordlineSet::single(Wordline::D(7))).unwrap();
        s.write_row(BitRow::ones(BITS)).unwrap();
        s.precharge();
        assert_eq!(s.row(RowSlot::D(7)).unwrap(), BitRow::ones(BITS));
        assert_eq!(s.read_row(), Err(Error::NotActivated));
    }

    #[test]
    fn second_triple_activation_rejected() {
        let mut s = small();
        s.activate(&WordlineSet::single(Wordline::D(0))).unwrap();
        let err = s.activate(&set(&[Wordline::T(0), Wordline::T(1), Wordline::T(2)]));
        assert!(matches!(err, Err(Error::Protocol(_))));
    }

    #[test]
    fn constant_rows_cannot_be_overwritten() {
        let mut s = small();
        s.load_row(RowSlot::D(0), BitRow::ones(BITS)).unwrap();
        s.activate(&WordlineSet::single(Wordline::D(0))).unwrap();
        assert!(s.activate(&WordlineSet::single(Wordline::C0)).is_err());
        s.precharge();
        s.activate(&WordlineSet::single(Wordline::C1)).unwrap();
        assert!(s.write_row(BitRow::zeros(BITS)).is_err());
        s.precharge();
        assert_eq!(s.row(RowSlot::C0).unwrap(), BitRow::zeros(BITS));
        assert_eq!(s.row(RowSlot::C1).unwrap(), BitRow::ones(BITS));
        assert!(s.load_row(RowSlot::C1, BitRow::zeros(BITS)).is_err());
    }

    #[test]
    fn staleness_reported() {
        let mut s = SubarrayState::new(SubarrayConfig {
            row_bits: 64,
            data_rows: DATA_ROWS,
            stale_window: Some(3),
        });
        s.load_row(RowSlot::D(1), BitRow::ones(64)).unwrap();
        for _ in 0..4 {
            s.activate(&WordlineSet::single(Wordline::D(2))).unwrap();
            s.precharge();
        }
        let rep = s.activate(&WordlineSet::single(Wordline::D(1))).unwrap();
        assert_eq!(rep.stale_rows, vec!["D1".to_string()]);
        s.precharge();
        let rep = s.activate(&WordlineSet::single(Wordline::D(1))).unwrap();
        assert!(rep.stale_rows.is_empty());
    }

    #[test]
    fn variation_breaks_majority_in_analytic_mode() {
        let mut s = SubarrayState::with_reliability(
            SubarrayConfig::with_row_bits(64),
            ReliabilityModel::new(ReliabilityMode::Analytic),
        );
        let mut profile = VariationProfile::default();
        profile.set_row(RowSlot::T(0), vec![1.4; 64]);
        profile.set_row(RowSlot::T(1), vec![0.6; 64]);
        profile.set_row(RowSlot::T(2), vec![0.6; 64]);
        s.set_variation(Some(profile));
        s.load_row(RowSlot::T(0), BitRow::ones(64)).unwrap();
        s.activate(&set(&[Wordline::T(0), Wordline::T(1), Wordline::T(2)]))
            .unwrap();
        // Majority says 0; the strong cell wins at ±40%.
        assert_eq!(s.read_row().unwrap(), BitRow::ones(64));
    }

    #[test]
    fn calibrated_mode_faults_at_25_percent() {
        let mut s = SubarrayState::new(SubarrayConfig::with_row_bits(64));
        let mut profile = VariationProfile::default();
        profile.set_row(RowSlot::T(0), vec![1.25; 64]);
        profile.set_row(RowSlot::T(1), vec![0.75; 64]);
        profile.set_row(RowSlot::T(2), vec![0.75; 64]);
        s.set_variation(Some(profile));
        s.load_row(RowSlot::T(0), BitRow::ones(64)).unwrap();
        let lines = set(&[Wordline::T(0), Wordline::T(1), Wordline::T(2)]);
        let rep = s.activate(&lines).unwrap();
        assert_eq!(rep.fault_bits, 64);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut s = small();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        s.load_row(RowSlot::D(3), BitRow::random(BITS, &mut rng))
            .unwrap();
        s.load_row(RowSlot::T(1), BitRow::random(BITS, &mut rng))
            .unwrap();
        s.activate(&WordlineSet::single(Wordline::D(3))).unwrap();
        s.activate(&WordlineSet::single(Wordline::DccN(0))).unwrap();
        let snap = s.snapshot();
        let text = serde_json::to_string(&snap).unwrap();
        let back: SubarraySnapshot = serde_json::from_str(&text).unwrap();
        let restored = SubarrayState::restore(&back, None).unwrap();
        assert_eq!(restored.snapshot(), snap);
        assert_eq!(restored.read_row().unwrap(), s.read_row().unwrap());
    }

    #[test]
    fn wordline_names_parse() {
        for w in [
            Wordline::T(3),
            Wordline::DccD(1),
            Wordline::DccN(0),
            Wordline::C0,
            Wordline::C1,
            Wordline::D(1005),
        ] {
            assert_eq!(w.to_string().parse::<Wordline>().unwrap(), w);
        }
    }

    proptest! {
        #[test]
        fn tra_leaves_identical_rows(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = SubarrayState::new(SubarrayConfig::with_row_bits(256));
            for t in 0..3 {
                s.load_row(RowSlot::T(t), BitRow::random(256, &mut rng)).unwrap();
            }
            s.activate(&set(&[Wordline::T(0), Wordline::T(1), Wordline::T(2)])).unwrap();
            s.precharge();
            let t0 = s.row(RowSlot::T(0)).unwrap();
            prop_assert_eq!(&s.row(RowSlot::T(1)).unwrap(), &t0);
            prop_assert_eq!(&s.row(RowSlot::T(2)).unwrap(), &t0);
        }
    }
}
