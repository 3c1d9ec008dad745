//! Analytic charge-sharing model for single-, double-, and triple-row
//! activation, and a latency/reliability lookup calibrated against circuit
//! simulation under process variation.
//!
//! All voltages are fractions of V_DD. A bitline precharged to ½V_DD that
//! shares charge with cells of capacitance Cᵢ holding charge fractions qᵢ
//! settles at
//!
//! ```text
//! V = (Σ qᵢ·Cᵢ + ½·C_b) / (Σ Cᵢ + C_b)
//! ```
//!
//! and the sense amplifier resolves the sign of the deviation `V − ½`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Electrical state of one cell taking part in charge sharing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellElectrical {
    /// 1.0 is fully charged to V_DD, 0.0 is empty.
    pub charge_fraction: f64,
    /// Capacitance relative to the nominal cell capacitance.
    pub cap_multiplier: f64,
}

impl CellElectrical {
    pub fn new(charge_fraction: f64, cap_multiplier: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&charge_fraction) {
            return Err(Error::InvalidParameter(format!(
                "charge fraction {charge_fraction} outside [0, 1]"
            )));
        }
        if !(cap_multiplier > 0.0 && cap_multiplier < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "capacitance multiplier {cap_multiplier} outside (0, 2)"
            )));
        }
        Ok(CellElectrical {
            charge_fraction,
            cap_multiplier,
        })
    }

    /// Fully charged (bit 1) or empty (bit 0) cell with nominal capacitance.
    pub fn nominal(bit: bool) -> Self {
        CellElectrical {
            charge_fraction: if bit { 1.0 } else { 0.0 },
            cap_multiplier: 1.0,
        }
    }

    pub fn with_cap(bit: bool, cap_multiplier: f64) -> Self {
        CellElectrical {
            cap_multiplier,
            ..CellElectrical::nominal(bit)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeShareConfig {
    /// Nominal cell capacitance in fF.
    pub cell_cap_ff: f64,
    /// Bitline capacitance in fF.
    pub bitline_cap_ff: f64,
    /// Deviations with magnitude at or below this fraction of V_DD are ties.
    pub tie_epsilon: f64,
}

impl Default for ChargeShareConfig {
    fn default() -> Self {
        ChargeShareConfig {
            cell_cap_ff: 22.0,
            bitline_cap_ff: 88.0,
            tie_epsilon: 1e-9,
        }
    }
}

impl ChargeShareConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cell_cap_ff > 0.0) || !(self.bitline_cap_ff > 0.0) {
            return Err(Error::InvalidParameter(
                "cell and bitline capacitance must be positive".into(),
            ));
        }
        if !(self.tie_epsilon >= 0.0) {
            return Err(Error::InvalidParameter("tie epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Bitline deviation from ½V_DD after 1–3 cells share charge with it.
pub fn charge_share_delta(cells: &[CellElectrical], cfg: &ChargeShareConfig) -> Result<f64> {
    if cells.is_empty() || cells.len() > 3 {
        return Err(Error::CellCount(cells.len()));
    }
    let mut charge = 0.5 * cfg.bitline_cap_ff;
    let mut cap = cfg.bitline_cap_ff;
    for cell in cells {
        let c = cell.cap_multiplier * cfg.cell_cap_ff;
        charge += cell.charge_fraction * c;
        cap += c;
    }
    Ok(charge / cap - 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraOutcome {
    One,
    Zero,
    FailTie,
}

/// Value the sense amplifier latches after a triple-row activation.
pub fn tra_outcome(cells: &[CellElectrical; 3], cfg: &ChargeShareConfig) -> TraOutcome {
    let delta = charge_share_delta(cells, cfg).expect("three cells");
    classify_delta(delta, cfg.tie_epsilon)
}

pub(crate) fn classify_delta(delta: f64, eps: f64) -> TraOutcome {
    if delta > eps {
        TraOutcome::One
    } else if delta < -eps {
        TraOutcome::Zero
    } else {
        TraOutcome::FailTie
    }
}

/// Smallest symmetric variation `v` at which one strong charged cell
/// (capacitance `1+v`) overrides two weak empty cells (`1−v`), found by
/// bisection on the sign of the charge-sharing deviation.
pub fn analytic_failure_threshold(cfg: &ChargeShareConfig) -> f64 {
    let fails = |v: f64| {
        let cells = [
            CellElectrical::with_cap(true, 1.0 + v),
            CellElectrical::with_cap(false, 1.0 - v),
            CellElectrical::with_cap(false, 1.0 - v),
        ];
        charge_share_delta(&cells, cfg).expect("three cells") >= 0.0
    };
    let (mut lo, mut hi) = (0.0_f64, 0.999_f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if fails(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Triple-row activation data pattern: which value the strong cell holds
/// and which value the two weak cells hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TraPattern {
    #[serde(rename = "0s0w0w")]
    AllZero,
    #[serde(rename = "1s0w0w")]
    StrongOne,
    #[serde(rename = "0s1w1w")]
    StrongZero,
    #[serde(rename = "1s1w1w")]
    AllOne,
}

impl TraPattern {
    pub const ALL: [TraPattern; 4] = [
        TraPattern::AllZero,
        TraPattern::StrongOne,
        TraPattern::StrongZero,
        TraPattern::AllOne,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TraPattern::AllZero => "0s0w0w",
            TraPattern::StrongOne => "1s0w0w",
            TraPattern::StrongZero => "0s1w1w",
            TraPattern::AllOne => "1s1w1w",
        }
    }

    /// Strong cell bit followed by the two weak cell bits.
    pub fn bits(self) -> [bool; 3] {
        match self {
            TraPattern::AllZero => [false; 3],
            TraPattern::StrongOne => [true, false, false],
            TraPattern::StrongZero => [false, true, true],
            TraPattern::AllOne => [true; 3],
        }
    }

    /// Cells for this pattern at symmetric variation `v` (fraction).
    pub fn cells(self, v: f64) -> [CellElectrical; 3] {
        let [s, w1, w2] = self.bits();
        [
            CellElectrical::with_cap(s, 1.0 + v),
            CellElectrical::with_cap(w1, 1.0 - v),
            CellElectrical::with_cap(w2, 1.0 - v),
        ]
    }
}

impl fmt::Display for TraPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TraPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TraPattern::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::Calibration(format!("unknown pattern `{s}`")))
    }
}

/// Pattern and variation (percent) of three cells: the minority cell is the
/// strong one, and variation is the largest capacitance deviation.
pub fn classify_tra(bits: [bool; 3], caps: [f64; 3]) -> (TraPattern, f64) {
    let ones = bits.iter().filter(|&&b| b).count();
    let pattern = match ones {
        0 => TraPattern::AllZero,
        1 => TraPattern::StrongOne,
        2 => TraPattern::StrongZero,
        _ => TraPattern::AllOne,
    };
    let variation = caps.iter().map(|c| (c - 1.0).abs()).fold(0.0, f64::max);
    (pattern, variation * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Latency {
    Ns(f64),
    Fail,
}

impl Latency {
    pub fn ns(self) -> Option<f64> {
        match self {
            Latency::Ns(v) => Some(v),
            Latency::Fail => None,
        }
    }

    pub fn is_fail(self) -> bool {
        matches!(self, Latency::Fail)
    }
}

impl fmt::Display for Latency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Latency::Ns(v) => write!(f, "{v:.1}"),
            Latency::Fail => f.write_str("FAIL"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    SingleCharged,
    SingleEmpty,
    SingleStandard,
    Tra {
        pattern: TraPattern,
        variation_pct: f64,
    },
}

/// End-to-end activation latencies measured under process variation.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyCalibration {
    /// Per pattern, grid points sorted by variation percent.
    pub table: BTreeMap<TraPattern, Vec<(u32, Latency)>>,
    pub single_act_charged_ns: f64,
    pub single_act_empty_ns: f64,
    pub standard_act_ns: f64,
}

const DEFAULT_GRID: [u32; 6] = [0, 5, 10, 15, 20, 25];
const DEFAULT_TRA_NS: [(TraPattern, [f64; 6]); 4] = [
    (TraPattern::AllZero, [16.4, 16.3, 16.3, 16.4, 16.3, 16.2]),
    (
        TraPattern::StrongOne,
        [18.3, 18.6, 18.8, 19.1, 19.7, f64::NAN],
    ),
    (TraPattern::StrongZero, [24.9, 25.0, 25.2, 25.3, 25.4, 25.7]),
    (TraPattern::AllOne, [22.5, 22.3, 22.2, 22.2, 22.2, 22.1]),
];

impl Default for LatencyCalibration {
    fn default() -> Self {
        let table = DEFAULT_TRA_NS
            .iter()
            .map(|(pattern, row)| {
                let points = DEFAULT_GRID
                    .iter()
                    .zip(row)
                    .map(|(&pct, &ns)| {
                        (
                            pct,
                            if ns.is_nan() {
                                Latency::Fail
                            } else {
                                Latency::Ns(ns)
                            },
                        )
                    })
                    .collect();
                (*pattern, points)
            })
            .collect();
        LatencyCalibration {
            table,
            single_act_charged_ns: 20.9,
            single_act_empty_ns: 13.5,
            standard_act_ns: 35.0,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CalValue {
    Ns(f64),
    Marker(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    schema_version: u32,
    single_act_charged_ns: f64,
    single_act_empty_ns: f64,
    standard_act_ns: f64,
    tra: BTreeMap<String, BTreeMap<String, CalValue>>,
}

impl LatencyCalibration {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: CalibrationFile = serde_json::from_str(text)?;
        let mut table = BTreeMap::new();
        for (label, points) in file.tra {
            let pattern: TraPattern = label.parse()?;
            let mut grid = Vec::with_capacity(points.len());
            for (pct, value) in points {
                let pct: u32 = pct
                    .parse()
                    .map_err(|_| Error::Calibration(format!("bad variation key `{pct}`")))?;
                let latency = match value {
                    CalValue::Ns(ns) if ns > 0.0 => Latency::Ns(ns),
                    CalValue::Ns(ns) => {
                        return Err(Error::Calibration(format!("non-positive latency {ns}")))
                    }
                    CalValue::Marker(m) if m.eq_ignore_ascii_case("fail") => Latency::Fail,
                    CalValue::Marker(m) => {
                        return Err(Error::Calibration(format!("unknown marker `{m}`")))
                    }
                };
                grid.push((pct, latency));
            }
            grid.sort_by_key(|&(pct, _)| pct);
            if grid.is_empty() {
                return Err(Error::Calibration(format!(
                    "pattern {pattern} has no points"
                )));
            }
            table.insert(pattern, grid);
        }
        for pattern in TraPattern::ALL {
            if !table.contains_key(&pattern) {
                return Err(Error::Calibration(format!("missing pattern {pattern}")));
            }
        }
        Ok(LatencyCalibration {
            table,
            single_act_charged_ns: file.single_act_charged_ns,
            single_act_empty_ns: file.single_act_empty_ns,
            standard_act_ns: file.standard_act_ns,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let tra = self
            .table
            .iter()
            .map(|(pattern, grid)| {
                let points = grid
                    .iter()
                    .map(|&(pct, lat)| {
                        let v = match lat {
                            Latency::Ns(ns) => CalValue::Ns(ns),
                            Latency::Fail => CalValue::Marker("FAIL".into()),
                        };
                        (pct.to_string(), v)
                    })
                    .collect();
                (pattern.label().to_string(), points)
            })
            .collect();
        let file = CalibrationFile {
            schema_version: crate::SCHEMA_VERSION,
            single_act_charged_ns: self.single_act_charged_ns,
            single_act_empty_ns: self.single_act_empty_ns,
            standard_act_ns: self.standard_act_ns,
            tra,
        };
        serde_json::to_string_pretty(&file).expect("calibration serializes")
    }

    /// Variation percents on the grid, across all patterns.
    pub fn grid(&self) -> Vec<u32> {
        let mut pcts: Vec<u32> = self
            .table
            .values()
            .flat_map(|g| g.iter().map(|&(p, _)| p))
            .collect();
        pcts.sort_unstable();
        pcts.dedup();
        pcts
    }

    fn tra_latency(&self, pattern: TraPattern, pct: f64) -> Result<Latency> {
        let grid = &self.table[&pattern];
        if !(pct >= 0.0) {
            return Err(Error::OutOfCalibrationDomain { pct });
        }
        // Beyond the last good point before the first FAIL: FAIL.
        if let Some(first_fail) = grid.iter().position(|(_, l)| l.is_fail()) {
            let last_good = first_fail.checked_sub(1).map(|i| f64::from(grid[i].0));
            if last_good.map_or(true, |p| pct > p) {
                return Ok(Latency::Fail);
            }
        }
        for pair in grid.windows(2) {
            let (p0, l0) = pair[0];
            let (p1, l1) = pair[1];
            let (p0f, p1f) = (f64::from(p0), f64::from(p1));
            if pct >= p0f && pct <= p1f {
                return Ok(match (l0, l1) {
                    _ if pct == p0f => l0,
                    _ if pct == p1f => l1,
                    (Latency::Ns(a), Latency::Ns(b)) => {
                        Latency::Ns(a + (b - a) * (pct - p0f) / (p1f - p0f))
                    }
                    _ => Latency::Fail,
                });
            }
        }
        match grid.as_slice() {
            [(p, l)] if f64::from(*p) == pct => Ok(*l),
            _ => Err(Error::OutOfCalibrationDomain { pct }),
        }
    }
}

/// Calibrated activation latency; TRA latencies are interpolated linearly
/// between grid points.
pub fn activation_latency(kind: ActivationKind, cal: &LatencyCalibration) -> Result<Latency> {
    match kind {
        ActivationKind::SingleCharged => Ok(Latency::Ns(cal.single_act_charged_ns)),
        ActivationKind::SingleEmpty => Ok(Latency::Ns(cal.single_act_empty_ns)),
        ActivationKind::SingleStandard => Ok(Latency::Ns(cal.standard_act_ns)),
        ActivationKind::Tra {
            pattern,
            variation_pct,
        } => cal.tra_latency(pattern, variation_pct),
    }
}

/// First variation (as a fraction) at which the strong-one pattern fails in
/// the calibrated table.
pub fn calibrated_failure_threshold(cal: &LatencyCalibration) -> Option<f64> {
    cal.table[&TraPattern::StrongOne]
        .iter()
        .find(|(_, l)| l.is_fail())
        .map(|&(pct, _)| f64::from(pct) / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReliabilityMode {
    /// Pure boolean majority; capacitance variation is ignored.
    Ideal,
    /// Sign of the analytic charge-sharing deviation decides the outcome.
    Analytic,
    /// Majority unless the calibrated table reports FAIL for the pattern.
    #[default]
    Calibrated,
}

impl FromStr for ReliabilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ideal" => Ok(ReliabilityMode::Ideal),
            "analytic" => Ok(ReliabilityMode::Analytic),
            "calibrated" => Ok(ReliabilityMode::Calibrated),
            other => Err(Error::Config(format!("unknown reliability mode `{other}`"))),
        }
    }
}

/// What a sense amplifier resolves for one bit position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitOutcome {
    pub value: bool,
    pub fault: bool,
}

/// Reliability mode plus the parameters it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityModel {
    pub mode: ReliabilityMode,
    pub charge: ChargeShareConfig,
    pub calibration: LatencyCalibration,
}

impl Default for ReliabilityModel {
    fn default() -> Self {
        ReliabilityModel::new(ReliabilityMode::default())
    }
}

impl ReliabilityModel {
    pub fn new(mode: ReliabilityMode) -> Self {
        ReliabilityModel {
            mode,
            charge: ChargeShareConfig::default(),
            calibration: LatencyCalibration::default(),
        }
    }

    /// Resolve one bitline given the bit each connected cell presents to it
    /// (already complemented for bitline-bar connections) and the cell
    /// capacitance multipliers.
    pub fn resolve(&self, bits: &[bool], caps: &[f64]) -> BitOutcome {
        debug_assert_eq!(bits.len(), caps.len());
        let ones = bits.iter().filter(|&&b| b).count();
        match bits.len() {
            1 => BitOutcome {
                value: bits[0],
                fault: false,
            },
            2 if self.mode != ReliabilityMode::Analytic => {
                let agree = bits[0] == bits[1];
                BitOutcome {
                    value: agree && bits[0],
                    fault: !agree,
                }
            }
            3 if self.mode == ReliabilityMode::Ideal => BitOutcome {
                value: ones >= 2,
                fault: false,
            },
            3 if self.mode == ReliabilityMode::Calibrated => {
                let (pattern, pct) =
                    classify_tra([bits[0], bits[1], bits[2]], [caps[0], caps[1], caps[2]]);
                match self.calibration.tra_latency(pattern, pct) {
                    Ok(Latency::Ns(_)) => BitOutcome {
                        value: ones >= 2,
                        fault: false,
                    },
                    // Failing activations latch the strong (minority) cell.
                    Ok(Latency::Fail) => BitOutcome {
                        value: ones < 2,
                        fault: true,
                    },
                    Err(_) => BitOutcome {
                        value: ones >= 2,
                        fault: true,
                    },
                }
            }
            _ => {
                let cells: Vec<CellElectrical> = bits
                    .iter()
                    .zip(caps)
                    .map(|(&b, &c)| CellElectrical::with_cap(b, c))
                    .collect();
                let delta = charge_share_delta(&cells, &self.charge).expect("1-3 cells");
                // A flip against the majority, or a resolved conflict between
                // two cells, is a wrong answer even though sensing succeeded.
                let intended = match bits.len() {
                    3 => Some(ones >= 2),
                    _ if ones == 0 || ones == bits.len() => Some(bits[0]),
                    _ => None,
                };
                let value = match classify_delta(delta, self.charge.tie_epsilon) {
                    TraOutcome::One => true,
                    TraOutcome::Zero => false,
                    TraOutcome::FailTie => {
                        return BitOutcome {
                            value: false,
                            fault: true,
                        }
                    }
                };
                BitOutcome {
                    value,
                    fault: intended != Some(value),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn analytic_flip_is_a_fault() {
        let m = ReliabilityModel::new(ReliabilityMode::Analytic);
        let ok = m.resolve(&[true, false, false], &[1.2, 0.8, 0.8]);
        assert_eq!(
            ok,
            BitOutcome {
                value: false,
                fault: false
            }
        );
        let flipped = m.resolve(&[true, false, false], &[1.4, 0.6, 0.6]);
        assert_eq!(
            flipped,
            BitOutcome {
                value: true,
                fault: true
            }
        );
        assert!(m.resolve(&[true, false], &[1.5, 1.0]).fault);
        assert!(!m.resolve(&[true, true], &[1.5, 0.5]).fault);
    }

    fn unit_cfg(cb: f64) -> ChargeShareConfig {
        ChargeShareConfig {
            cell_cap_ff: 1.0,
            bitline_cap_ff: cb,
            tie_epsilon: 1e-9,
        }
    }

    #[test]
    fn delta_all_charged() {
        let cells = [CellElectrical::nominal(true); 3];
        let d = charge_share_delta(&cells, &unit_cfg(4.0)).unwrap();
        assert!((d - 3.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn delta_two_of_three() {
        let cells = [
            CellElectrical::nominal(true),
            CellElectrical::nominal(true),
            CellElectrical::nominal(false),
        ];
        let d = charge_share_delta(&cells, &unit_cfg(4.0)).unwrap();
        assert!((d - 1.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn strong_cell_overrides_past_one_third() {
        let cells = [
            CellElectrical::with_cap(true, 1.34),
            CellElectrical::with_cap(false, 0.66),
            CellElectrical::with_cap(false, 0.66),
        ];
        assert!(charge_share_delta(&cells, &unit_cfg(4.0)).unwrap() > 0.0);
        assert_eq!(tra_outcome(&cells, &unit_cfg(4.0)), TraOutcome::One);
    }

    #[test]
    fn cell_count_checked() {
        assert_eq!(
            charge_share_delta(&[], &ChargeShareConfig::default()),
            Err(Error::CellCount(0))
        );
        let four = [CellElectrical::nominal(true); 4];
        assert!(charge_share_delta(&four, &ChargeShareConfig::default()).is_err());
    }

    #[test]
    fn cell_validation() {
        assert!(CellElectrical::new(1.2, 1.0).is_err());
        assert!(CellElectrical::new(0.5, 0.0).is_err());
        assert!(CellElectrical::new(0.5, 2.0).is_err());
        assert!(CellElectrical::new(0.5, 1.9).is_ok());
    }

    #[test]
    fn all_empty_is_zero_under_any_caps() {
        let cells = [
            CellElectrical::with_cap(false, 1.9),
            CellElectrical::with_cap(false, 0.1),
            CellElectrical::with_cap(false, 1.0),
        ];
        assert_eq!(
            tra_outcome(&cells, &ChargeShareConfig::default()),
            TraOutcome::Zero
        );
    }

    #[test]
    fn threshold_is_one_third() {
        for cb in [0.5, 4.0, 40.0] {
            let v = analytic_failure_threshold(&unit_cfg(cb));
            assert!((v - 1.0 / 3.0).abs() < 1e-9, "cb={cb} v={v}");
        }
        let cal = LatencyCalibration::default();
        assert_eq!(calibrated_failure_threshold(&cal), Some(0.25));
    }

    #[test]
    fn table_lookups() {
        let cal = LatencyCalibration::default();
        let tra = |pattern, variation_pct| {
            activation_latency(
                ActivationKind::Tra {
                    pattern,
                    variation_pct,
                },
                &cal,
            )
            .unwrap()
        };
        assert_eq!(
            activation_latency(ActivationKind::SingleCharged, &cal).unwrap(),
            Latency::Ns(20.9)
        );
        assert_eq!(
            activation_latency(ActivationKind::SingleEmpty, &cal).unwrap(),
            Latency::Ns(13.5)
        );
        assert_eq!(
            activation_latency(ActivationKind::SingleStandard, &cal).unwrap(),
            Latency::Ns(35.0)
        );
        assert_eq!(tra(TraPattern::AllOne, 0.0), Latency::Ns(22.5));
        assert_eq!(tra(TraPattern::StrongZero, 20.0), Latency::Ns(25.4));
        assert_eq!(tra(TraPattern::StrongOne, 25.0), Latency::Fail);
        assert_eq!(tra(TraPattern::StrongOne, 22.0), Latency::Fail);
        assert_eq!(tra(TraPattern::StrongOne, 40.0), Latency::Fail);
        let mid = tra(TraPattern::StrongOne, 17.5).ns().unwrap();
        assert!((mid - 19.4).abs() < 1e-9);
        assert!(activation_latency(
            ActivationKind::Tra {
                pattern: TraPattern::AllOne,
                variation_pct: 30.0
            },
            &cal
        )
        .is_err());
    }

    #[test]
    fn uniform_patterns_are_stable() {
        let cal = LatencyCalibration::default();
        // Table spreads: 16.4 - 16.2 and 22.5 - 22.1.
        for (pattern, limit) in [(TraPattern::AllZero, 0.2), (TraPattern::AllOne, 0.4)] {
            let ns: Vec<f64> = cal.table[&pattern]
                .iter()
                .filter_map(|(_, l)| l.ns())
                .collect();
            let spread = ns.iter().cloned().fold(f64::MIN, f64::max)
                - ns.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= limit + 1e-9, "{pattern}: spread {spread}");
        }
    }

    #[test]
    fn mixed_patterns_monotone() {
        let cal = LatencyCalibration::default();
        for pattern in [TraPattern::StrongOne, TraPattern::StrongZero] {
            let mut prev = 0.0;
            for step in 0..=50 {
                let pct = step as f64 * 0.5;
                match activation_latency(
                    ActivationKind::Tra {
                        pattern,
                        variation_pct: pct,
                    },
                    &cal,
                )
                .unwrap()
                {
                    Latency::Ns(ns) => {
                        assert!(ns >= prev, "{pattern} at {pct}");
                        prev = ns;
                    }
                    Latency::Fail => prev = f64::INFINITY,
                }
            }
        }
    }

    #[test]
    fn calibration_json_round_trip() {
        let cal = LatencyCalibration::default();
        let text = cal.to_json();
        assert!(text.contains("\"FAIL\""));
        assert_eq!(LatencyCalibration::from_json(&text).unwrap(), cal);
        assert!(LatencyCalibration::from_json(&text.replace("1s1w1w", "2s2w2w")).is_err());
    }

    #[test]
    fn calibrated_resolve_latches_strong_cell_on_fail() {
        let model = ReliabilityModel::new(ReliabilityMode::Calibrated);
        let out = model.resolve(&[true, false, false], &[1.25, 0.75, 0.75]);
        assert_eq!(
            out,
            BitOutcome {
                value: true,
                fault: true
            }
        );
        let ok = model.resolve(&[true, false, false], &[1.2, 0.8, 0.8]);
        assert_eq!(
            ok,
            BitOutcome {
                value: false,
                fault: false
            }
        );
    }

    proptest! {
        #[test]
        fn sign_law(cb in 0.01f64..100.0, pattern in 0u8..8) {
            let bits = [pattern & 1 != 0, pattern & 2 != 0, pattern & 4 != 0];
            let k = bits.iter().filter(|&&b| b).count() as i32;
            let cells = bits.map(CellElectrical::nominal);
            let cfg = unit_cfg(cb);
            let d = charge_share_delta(&cells, &cfg).unwrap();
            // Closed form for equal caps: (2k − 3)·C_c / (6·C_c + 2·C_b).
            let closed = f64::from(2 * k - 3) / (6.0 + 2.0 * cb);
            prop_assert!((d - closed).abs() < 1e-12);
            prop_assert_eq!(d > 0.0, k >= 2);
        }

        #[test]
        fn delta_monotone_in_charge(
            q in proptest::collection::vec(0.0f64..1.0, 3),
            caps in proptest::collection::vec(0.1f64..1.9, 3),
            which in 0usize..3,
            bump in 0.0f64..1.0,
        ) {
            let cfg = ChargeShareConfig::default();
            let cells: Vec<CellElectrical> =
                q.iter().zip(&caps).map(|(&q, &c)| CellElectrical::new(q, c).unwrap()).collect();
            let mut raised = cells.clone();
            raised[which].charge_fraction = (raised[which].charge_fraction + bump).min(1.0);
            prop_assert!(charge_share_delta(&raised, &cfg).unwrap() >= charge_share_delta(&cells, &cfg).unwrap());
        }
    }
}
