//! Latency, energy, and throughput accounting for command traces, and the
//! bandwidth-bound host baseline they are compared against.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::command::{
    compile_bitwise, Annotation, CommandKind, CommandTrace, RowAddress, TraceEntry,
};
use crate::error::{Error, Result};
use crate::ops::BitwiseOp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingParams {
    pub t_ras_ns: f64,
    pub t_rp_ns: f64,
    /// Extra time over tRAS for the overlapped second ACTIVATE of an AAP.
    pub aap_overlap_extra_ns: f64,
    /// Rolling window that may contain at most four ACTIVATEs per rank.
    pub t_faw_ns: f64,
    pub psm_bus_bytes_per_ns: f64,
    /// Cost of flushing dirty lines of one source row before a `bop`.
    pub flush_ns_per_row: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            t_ras_ns: 35.0,
            t_rp_ns: 10.0,
            aap_overlap_extra_ns: 4.0,
            t_faw_ns: 40.0,
            psm_bus_bytes_per_ns: 6.4,
            flush_ns_per_row: 0.0,
        }
    }
}

impl TimingParams {
    pub fn naive_aap_ns(&self) -> f64 {
        2.0 * self.t_ras_ns + self.t_rp_ns
    }

    pub fn optimized_aap_ns(&self) -> f64 {
        self.t_ras_ns + self.aap_overlap_extra_ns + self.t_rp_ns
    }

    pub fn ap_ns(&self) -> f64 {
        self.t_ras_ns + self.t_rp_ns
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.t_ras_ns,
            self.t_rp_ns,
            self.aap_overlap_extra_ns,
            self.t_faw_ns,
            self.psm_bus_bytes_per_ns,
            self.flush_ns_per_row,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.psm_bus_bytes_per_ns == 0.0 {
            return Err(Error::Config(
                "timing parameters must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatencyMode {
    /// ACTIVATE, ACTIVATE, PRECHARGE back to back.
    Naive,
    /// Split row decoder overlaps the two ACTIVATEs.
    #[default]
    Optimized,
}

impl std::str::FromStr for LatencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(LatencyMode::Naive),
            "optimized" => Ok(LatencyMode::Optimized),
            other => Err(Error::Config(format!("unknown latency mode `{other}`"))),
        }
    }
}

/// DRAM-side latency of a trace in ns. Host work is not included.
pub fn trace_latency(trace: &CommandTrace, t: &TimingParams, mode: LatencyMode) -> f64 {
    let commands: Vec<&TraceEntry> = trace.items.iter().map(|i| &i.entry).collect();
    let mut total = 0.0;
    for (i, entry) in commands.iter().enumerate() {
        match entry {
            TraceEntry::Command(c) => match (c.kind, c.annotation) {
                (CommandKind::Activate(first), Annotation::AapFirst) => {
                    let second = match commands.get(i + 1) {
                        Some(TraceEntry::Command(n)) => n.address(),
                        _ => None,
                    };
                    let overlappable = first.is_bitwise_group()
                        || second.is_some_and(RowAddress::is_bitwise_group);
                    total += match mode {
                        LatencyMode::Optimized if overlappable => t.optimized_aap_ns(),
                        _ => t.naive_aap_ns(),
                    };
                }
                (CommandKind::Activate(_), Annotation::ApActivate) => total += t.ap_ns(),
                (CommandKind::Activate(_), Annotation::Standalone) => total += t.t_ras_ns,
                (CommandKind::Precharge, Annotation::Standalone) => total += t.t_rp_ns,
                _ => {}
            },
            TraceEntry::Psm(p) => total += p.bytes as f64 / t.psm_bus_bytes_per_ns,
            TraceEntry::Host(_) => {}
        }
    }
    total
}

/// Fitted per-command energies, all in nJ per KB of row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationEnergies {
    /// First (sense-amplifying) ACTIVATE raising one wordline.
    pub e_act_nj: f64,
    pub e_pre_nj: f64,
    /// Overlapped second ACTIVATE of an AAP, one wordline.
    pub e_act_second_nj: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyParams {
    pub activation: Option<ActivationEnergies>,
    /// Fractional activation energy added per extra wordline raised.
    pub wordline_increment: f64,
    /// Channel energy to move one KB over the DDR interface.
    pub ddr_transfer_nj_per_kb: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        let fit = calibrate_energy(&MEASURED_OP_ENERGY_NJ_PER_KB).expect("shipped targets fit");
        fit.params
    }
}

/// Energy targets per operation group (not, and/or, nand/nor, xor/xnor).
pub const MEASURED_OP_ENERGY_NJ_PER_KB: [(BitwiseOp, f64); 4] = [
    (BitwiseOp::Not, 1.6),
    (BitwiseOp::And, 3.2),
    (BitwiseOp::Nand, 4.0),
    (BitwiseOp::Xor, 5.5),
];
pub const DDR3_NOT_NJ_PER_KB: f64 = 93.7;
pub const DDR3_BINARY_NJ_PER_KB: f64 = 137.9;
pub const DEFAULT_WORDLINE_INCREMENT: f64 = 0.22;
pub const MAX_FIT_REL_ERR: f64 = 0.25;

impl EnergyParams {
    pub fn uncalibrated() -> Self {
        EnergyParams {
            activation: None,
            wordline_increment: DEFAULT_WORDLINE_INCREMENT,
            ddr_transfer_nj_per_kb: DDR3_NOT_NJ_PER_KB / BitwiseOp::Not.traffic_factor(),
        }
    }

    pub fn wordline_factor(&self, wordlines: usize) -> f64 {
        1.0 + self.wordline_increment * (wordlines.saturating_sub(1)) as f64
    }
}

/// Weighted command counts: first activations and second activations
/// scaled by the wordline factor, and precharges.
pub fn energy_features(trace: &CommandTrace, wordline_increment: f64) -> [f64; 3] {
    let wf = |n: usize| 1.0 + wordline_increment * n.saturating_sub(1) as f64;
    let mut f = [0.0; 3];
    for c in trace.commands() {
        match (c.kind, c.annotation) {
            (CommandKind::Activate(_), Annotation::AapSecond) => f[1] += wf(c.wordline_count()),
            (CommandKind::Activate(_), _) => f[0] += wf(c.wordline_count()),
            (CommandKind::Precharge, _) => f[2] += 1.0,
            _ => {}
        }
    }
    f
}

/// DRAM energy of a trace in nJ per KB of row.
pub fn trace_energy(trace: &CommandTrace, e: &EnergyParams) -> Result<f64> {
    let act = e.activation.ok_or(Error::Uncalibrated)?;
    let [first, second, pre] = energy_features(trace, e.wordline_increment);
    let psm = trace
        .items
        .iter()
        .filter(|i| matches!(i.entry, TraceEntry::Psm(_)))
        .count() as f64;
    Ok(first * act.e_act_nj
        + second * act.e_act_second_nj
        + pre * act.e_pre_nj
        + psm * e.ddr_transfer_nj_per_kb)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyFit {
    pub params: EnergyParams,
    pub max_rel_err: f64,
    pub rows: Vec<FitRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub op: BitwiseOp,
    pub target_nj_per_kb: f64,
    pub fitted_nj_per_kb: f64,
    pub rel_err: f64,
}

/// `D2 = op(D0, D1)` in one subarray.
pub fn canonical_trace(op: BitwiseOp) -> CommandTrace {
    let src2 = op.is_binary().then_some(RowAddress::D(1));
    compile_bitwise(op, RowAddress::D(2), RowAddress::D(0), src2)
        .expect("canonical operands compile")
}

/// Non-negative least squares on relative error: find `(e_act, e_second,
/// e_pre) >= 0` minimizing `Σ ((model_i − target_i) / target_i)²` over the
/// compiled command sequences of the target operations.
pub fn calibrate_energy(targets: &[(BitwiseOp, f64)]) -> Result<EnergyFit> {
    if targets.len() < 2 {
        return Err(Error::Config(
            "energy calibration needs at least two targets".into(),
        ));
    }
    if targets.iter().any(|&(_, t)| !(t > 0.0)) {
        return Err(Error::Config("energy targets must be positive".into()));
    }
    let base = EnergyParams::uncalibrated();
    let features: Vec<[f64; 3]> = targets
        .iter()
        .map(|&(op, _)| energy_features(&canonical_trace(op), base.wordline_increment))
        .collect();
    let n = targets.len();
    let weighted = DMatrix::from_fn(n, 3, |r, c| features[r][c] / targets[r].1);
    let ones = DVector::from_element(n, 1.0);

    // Active-set enumeration: three unknowns, so try every support.
    let mut best: Option<(f64, usize, [f64; 3])> = None;
    for mask in 1u8..8 {
        let cols: Vec<usize> = (0..3).filter(|c| mask >> c & 1 == 1).collect();
        let sub = weighted.select_columns(&cols);
        let svd = sub.svd(true, true);
        let Ok(x) = svd.solve(&ones, 1e-12) else {
            continue;
        };
        if x.iter().any(|&v| v < -1e-12) {
            continue;
        }
        let mut full = [0.0; 3];
        for (k, &c) in cols.iter().enumerate() {
            full[c] = x[k].max(0.0);
        }
        let resid = (&weighted * DVector::from_row_slice(&full) - &ones).norm();
        let better = match best {
            None => true,
            Some((r, size, _)) => resid < r - 1e-12 || (resid <= r + 1e-12 && cols.len() > size),
        };
        if better {
            best = Some((resid, cols.len(), full));
        }
    }
    let (_, _, [e_act_nj, e_act_second_nj, e_pre_nj]) =
        best.ok_or_else(|| Error::Config("no feasible energy fit".into()))?;
    let params = EnergyParams {
        activation: Some(ActivationEnergies {
            e_act_nj,
            e_pre_nj,
            e_act_second_nj,
        }),
        ..base
    };
    let rows: Vec<FitRow> = targets
        .iter()
        .zip(&features)
        .map(|(&(op, target), f)| {
            let fitted = f[0] * e_act_nj + f[1] * e_act_second_nj + f[2] * e_pre_nj;
            FitRow {
                op,
                target_nj_per_kb: target,
                fitted_nj_per_kb: fitted,
                rel_err: (fitted - target).abs() / target,
            }
        })
        .collect();
    let max_rel_err = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    if max_rel_err > MAX_FIT_REL_ERR {
        return Err(Error::FitDiverged {
            max_rel_err,
            limit: MAX_FIT_REL_ERR,
        });
    }
    Ok(EnergyFit {
        params,
        max_rel_err,
        rows,
    })
}

/// Activation-rate ceiling from tFAW: four ACTIVATEs per window, in GB/s of
/// result for an operation issuing `activations` ACTIVATEs per row.
pub fn tfaw_cap_gbps(activations: usize, row_bytes: usize, t: &TimingParams) -> f64 {
    if activations == 0 || t.t_faw_ns == 0.0 {
        return f64::INFINITY;
    }
    4.0 * row_bytes as f64 / (t.t_faw_ns * activations as f64)
}

/// Result throughput in GB/s (bytes per ns) with `banks` banks operating in
/// parallel, clamped by tFAW.
pub fn throughput(
    latency_ns: f64,
    activations: usize,
    row_bytes: usize,
    banks: u32,
    t: &TimingParams,
) -> f64 {
    assert!(banks >= 1, "at least one bank");
    let single = row_bytes as f64 / latency_ns;
    (f64::from(banks) * single).min(tfaw_cap_gbps(activations, row_bytes, t))
}

/// Bandwidth-bound host throughput in GB/s of result.
pub fn baseline_throughput(op: BitwiseOp, channel_gbps: f64) -> f64 {
    channel_gbps / op.traffic_factor()
}

/// Channel energy of the host baseline, nJ per KB of result.
pub fn baseline_energy(op: BitwiseOp, e: &EnergyParams) -> f64 {
    op.traffic_factor() * e.ddr_transfer_nj_per_kb
}

/// GPU-like baseline: one 128-bit DDR3-1800 channel.
pub const GTX745_CHANNEL_GBPS: f64 = 28.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub op: String,
    pub banks: u32,
    pub latency_ns: f64,
    pub energy_nj_per_kb: f64,
    pub throughput_gbps: f64,
    pub baseline_throughput_gbps: f64,
    pub baseline_energy_nj_per_kb: f64,
    pub speedup: f64,
    pub energy_reduction: f64,
}

impl CostReport {
    pub const CSV_HEADER: &'static str = "schema_version,op,banks,latency_ns,energy_nj_per_kb,throughput_gbps,baseline_throughput_gbps,baseline_energy_nj_per_kb,speedup,energy_reduction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.3},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            crate::SCHEMA_VERSION,
            self.op,
            self.banks,
            self.latency_ns,
            self.energy_nj_per_kb,
            self.throughput_gbps,
            self.baseline_throughput_gbps,
            self.baseline_energy_nj_per_kb,
            self.speedup,
            self.energy_reduction
        )
    }
}

/// Cost of one bulk bitwise operation on a full row.
pub fn op_cost_report(
    op: BitwiseOp,
    row_bytes: usize,
    banks: u32,
    t: &TimingParams,
    e: &EnergyParams,
    mode: LatencyMode,
    channel_gbps: f64,
) -> Result<CostReport> {
    let trace = canonical_trace(op);
    let latency_ns = trace_latency(&trace, t, mode);
    let activations = trace.summary().activates as usize;
    let energy = trace_energy(&trace, e)?;
    let tput = throughput(latency_ns, activations, row_bytes, banks, t);
    let base_tput = baseline_throughput(op, channel_gbps);
    let base_energy = baseline_energy(op, e);
    Ok(CostReport {
        op: op.name().to_string(),
        banks,
        latency_ns,
        energy_nj_per_kb: energy,
        throughput_gbps: tput,
        baseline_throughput_gbps: base_tput,
        baseline_energy_nj_per_kb: base_energy,
        speedup: tput / base_tput,
        energy_reduction: base_energy / energy,
    })
}
