//! Batch front end behind the `buddysim` binary: configuration, reliability
//! sweeps, per-op benchmarks, workloads and trace dumps.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analog::{
    activation_latency, analytic_failure_threshold, tra_outcome, ActivationKind, ChargeShareConfig,
    Latency, LatencyCalibration, ReliabilityMode, ReliabilityModel, TraOutcome, TraPattern,
};
use crate::cost::{
    calibrate_energy, canonical_trace, op_cost_report, CostReport, EnergyParams, LatencyMode,
    TimingParams, GTX745_CHANNEL_GBPS, MEASURED_OP_ENERGY_NJ_PER_KB,
};
use crate::error::{Error, Result};
use crate::ops::BitwiseOp;
use crate::workloads::{
    bitmap_query, bitweaving_scan, report_speedup, set_ops, sets, BitSlicedColumn, BitmapIndexSet,
    HostCostParams, SpeedupReport, WorkloadRun,
};
use crate::SCHEMA_VERSION;

pub const CONFIG_ENV: &str = "BUDDYSIM_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReliabilitySweep {
    pub patterns: Vec<TraPattern>,
    pub variations_pct: Vec<f64>,
}

impl Default for ReliabilitySweep {
    fn default() -> Self {
        ReliabilitySweep {
            patterns: TraPattern::ALL.to_vec(),
            variations_pct: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub ops: Vec<BitwiseOp>,
    pub banks: Vec<u32>,
    /// Baseline channel bandwidth for the per-op comparison.
    pub channel_gbps: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ops: BitwiseOp::ALL.to_vec(),
            banks: vec![1, 2, 4],
            channel_gbps: GTX745_CHANNEL_GBPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BitmapConfig {
    pub users: usize,
    pub weeks: usize,
    pub activity: f64,
}

impl Default for BitmapConfig {
    fn default() -> Self {
        BitmapConfig {
            users: 1 << 20,
            weeks: 4,
            activity: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BitweavingConfig {
    pub bits: u32,
    pub rows: usize,
    pub predicates: usize,
}

impl Default for BitweavingConfig {
    fn default() -> Self {
        BitweavingConfig {
            bits: 8,
            rows: 1 << 16,
            predicates: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SetsConfig {
    pub k: usize,
    pub set_size: usize,
}

impl Default for SetsConfig {
    fn default() -> Self {
        SetsConfig {
            k: 15,
            set_size: 1 << 14,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadConfigs {
    pub bitmap: BitmapConfig,
    pub bitweaving: BitweavingConfig,
    pub sets: SetsConfig,
}

/// Everything a run depends on. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub timing: TimingParams,
    pub energy: EnergyParams,
    pub latency_mode: LatencyMode,
    pub reliability: ReliabilityMode,
    pub charge: ChargeShareConfig,
    /// Optional latency table replacing the built-in one.
    pub calibration_path: Option<PathBuf>,
    pub row_bytes: usize,
    /// Banks working in parallel in workload cost estimates.
    pub banks: u32,
    pub host: HostCostParams,
    pub sweep: ReliabilitySweep,
    pub bench: BenchConfig,
    pub workloads: WorkloadConfigs,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            seed: 0,
            timing: TimingParams::default(),
            energy: EnergyParams::default(),
            latency_mode: LatencyMode::default(),
            reliability: ReliabilityMode::default(),
            charge: ChargeShareConfig::default(),
            calibration_path: None,
            row_bytes: 8192,
            banks: 1,
            host: HostCostParams::default(),
            sweep: ReliabilitySweep::default(),
            bench: BenchConfig::default(),
            workloads: WorkloadConfigs::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        self.timing.validate()?;
        self.charge.validate()?;
        self.host.validate()?;
        if self.row_bytes == 0 || self.row_bytes % 8 != 0 {
            return Err(Error::Config(
                "row_bytes must be a positive multiple of 8".into(),
            ));
        }
        if self.banks == 0 || self.bench.banks.contains(&0) {
            return Err(Error::Config("bank counts must be >= 1".into()));
        }
        if !(self.bench.channel_gbps > 0.0) {
            return Err(Error::Config(
                "bench channel bandwidth must be positive".into(),
            ));
        }
        if let Some(v) = self
            .sweep
            .variations_pct
            .iter()
            .find(|v| !(0.0..100.0).contains(*v))
        {
            return Err(Error::Config(format!("variation {v}% outside [0, 100)")));
        }
        let w = &self.workloads;
        if w.bitmap.users == 0 || w.bitmap.weeks == 0 || !(0.0..=1.0).contains(&w.bitmap.activity) {
            return Err(Error::Config(
                "bitmap workload needs users, weeks >= 1 and activity in [0, 1]".into(),
            ));
        }
        if w.bitweaving.bits == 0 || w.bitweaving.bits > 32 || w.bitweaving.rows == 0 {
            return Err(Error::Config(
                "bitweaving workload needs 1..=32 bits and rows >= 1".into(),
            ));
        }
        if w.sets.k < 2 {
            return Err(Error::Config("sets workload needs k >= 2".into()));
        }
        Ok(())
    }

    pub fn reliability_model(&self) -> Result<ReliabilityModel> {
        let calibration = match &self.calibration_path {
            Some(p) => LatencyCalibration::load(p)?,
            None => LatencyCalibration::default(),
        };
        Ok(ReliabilityModel {
            mode: self.reliability,
            charge: self.charge,
            calibration,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Naive,
    Optimized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReliabilityArg {
    Analytic,
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WorkloadName {
    Bitmap,
    Bitweaving,
    Sets,
}

#[derive(Debug, Parser)]
#[command(
    name = "buddysim",
    version,
    about = "In-DRAM bulk bitwise operation simulator"
)]
pub struct Cli {
    /// JSON run configuration; falls back to $BUDDYSIM_CONFIG.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, global = true, value_enum)]
    pub reliability: Option<ReliabilityArg>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exit 0 even when reliability faults occurred.
    #[arg(long, global = true)]
    pub allow_faults: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Outcome and latency of triple-row activation per pattern and variation.
    Reliability {
        /// Comma-separated patterns, e.g. 1s0w0w,0s1w1w; empty for none.
        #[arg(long, value_delimiter = ',')]
        patterns: Option<Vec<String>>,
        /// Comma-separated variation percentages.
        #[arg(long, value_delimiter = ',')]
        variations: Option<Vec<f64>>,
    },
    /// Throughput and energy of each operation against the channel baseline.
    Bench {
        #[arg(long, value_delimiter = ',')]
        ops: Option<Vec<BitwiseOp>>,
        #[arg(long, value_delimiter = ',')]
        banks: Option<Vec<u32>>,
    },
    /// Run an application workload and check it against its oracle.
    Workload {
        #[arg(value_enum)]
        name: WorkloadName,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        weeks: Option<usize>,
        #[arg(long)]
        bits: Option<u32>,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Print the command trace of one operation as JSON lines.
    TraceDump { op: BitwiseOp },
}

impl Cli {
    /// Config file (if any) with command-line overrides applied.
    pub fn resolve_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(mode) = self.mode {
            cfg.latency_mode = match mode {
                ModeArg::Naive => LatencyMode::Naive,
                ModeArg::Optimized => LatencyMode::Optimized,
            };
        }
        if let Some(r) = self.reliability {
            cfg.reliability = match r {
                ReliabilityArg::Analytic => ReliabilityMode::Analytic,
                ReliabilityArg::Calibrated => ReliabilityMode::Calibrated,
            };
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        match &self.command {
            Command::Reliability {
                patterns,
                variations,
            } => {
                if let Some(p) = patterns {
                    cfg.sweep.patterns = p
                        .iter()
                        .filter(|s| !s.is_empty())
                        .map(|s| s.parse())
                        .collect::<Result<_>>()?;
                }
                if let Some(v) = variations {
                    cfg.sweep.variations_pct = v.clone();
                }
            }
            Command::Bench { ops, banks } => {
                if let Some(o) = ops {
                    cfg.bench.ops = o.clone();
                }
                if let Some(b) = banks {
                    cfg.bench.banks = b.clone();
                }
            }
            Command::Workload {
                users,
                weeks,
                bits,
                rows,
                k,
                ..
            } => {
                let w = &mut cfg.workloads;
                w.bitmap.users = users.unwrap_or(w.bitmap.users);
                w.bitmap.weeks = weeks.unwrap_or(w.bitmap.weeks);
                w.bitweaving.bits = bits.unwrap_or(w.bitweaving.bits);
                w.bitweaving.rows = rows.unwrap_or(w.bitweaving.rows);
                w.sets.k = k.unwrap_or(w.sets.k);
            }
            Command::TraceDump { .. } => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Files written by a command plus its verdict.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<(String, String)>,
    /// Human-readable lines for stdout.
    pub log: Vec<String>,
    pub oracle_pass: bool,
    pub faults: usize,
}

impl CommandOutput {
    fn new() -> Self {
        CommandOutput {
            oracle_pass: true,
            ..Default::default()
        }
    }

    pub fn success(&self, allow_faults: bool) -> bool {
        self.oracle_pass && (allow_faults || self.faults == 0)
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

pub const RELIABILITY_CSV_HEADER: &str =
    "schema_version,pattern,variation_pct,mode,outcome,latency_ns,analytic_threshold_pct";

fn fmt_latency(l: Result<Latency>) -> String {
    match l {
        Ok(Latency::Ns(ns)) => format!("{ns:.1}"),
        Ok(Latency::Fail) => "FAIL".into(),
        Err(_) => String::new(),
    }
}

/// Reliability grid as CSV. Calibrated mode reads the latency table;
/// analytic mode decides each point by the sign of the charge-sharing
/// deviation and adds the analytic failure threshold.
pub fn cmd_reliability(cfg: &RunConfig) -> Result<CommandOutput> {
    let model = cfg.reliability_model()?;
    let threshold_pct = analytic_failure_threshold(&cfg.charge) * 100.0;
    let mut csv = String::from(RELIABILITY_CSV_HEADER);
    csv.push('\n');
    for &pattern in &cfg.sweep.patterns {
        for &pct in &cfg.sweep.variations_pct {
            let latency = activation_latency(
                ActivationKind::Tra {
                    pattern,
                    variation_pct: pct,
                },
                &model.calibration,
            );
            let (mode, outcome, threshold) = match cfg.reliability {
                ReliabilityMode::Analytic => {
                    let [s, w1, w2] = pattern.bits();
                    let majority = (u8::from(s) + u8::from(w1) + u8::from(w2)) >= 2;
                    let ok = match tra_outcome(&pattern.cells(pct / 100.0), &cfg.charge) {
                        TraOutcome::One => majority,
                        TraOutcome::Zero => !majority,
                        TraOutcome::FailTie => false,
                    };
                    ("analytic", ok, format!("{threshold_pct:.3}"))
                }
                other => {
                    let ok = matches!(latency, Ok(Latency::Ns(_)));
                    (
                        if other == ReliabilityMode::Ideal {
                            "ideal"
                        } else {
                            "calibrated"
                        },
                        ok,
                        String::new(),
                    )
                }
            };
            writeln!(
                csv,
                "{SCHEMA_VERSION},{pattern},{pct},{mode},{},{},{threshold}",
                if outcome { "OK" } else { "FAIL" },
                fmt_latency(latency)
            )
            .expect("write to string");
        }
    }
    let mut out = CommandOutput::new();
    out.log.push(format!(
        "{} points; analytic threshold {threshold_pct:.3}%",
        cfg.sweep.patterns.len() * cfg.sweep.variations_pct.len()
    ));
    out.files.push(("reliability.csv".into(), csv));
    Ok(out)
}

/// Per-op cost table over the configured bank counts, plus the energy fit.
pub fn cmd_bench(cfg: &RunConfig) -> Result<CommandOutput> {
    let mut csv = format!("{}\n", CostReport::CSV_HEADER);
    let mut out = CommandOutput::new();
    for &op in &cfg.bench.ops {
        for &banks in &cfg.bench.banks {
            let r = op_cost_report(
                op,
                cfg.row_bytes,
                banks,
                &cfg.timing,
                &cfg.energy,
                cfg.latency_mode,
                cfg.bench.channel_gbps,
            )?;
            out.log.push(format!(
                "{:>5} x{banks}: {:7.2} GB/s vs {:6.2} GB/s ({:.2}X), {:.2} nJ/KB ({:.1}X less)",
                r.op,
                r.throughput_gbps,
                r.baseline_throughput_gbps,
                r.speedup,
                r.energy_nj_per_kb,
                r.energy_reduction
            ));
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
    }
    let fit = calibrate_energy(&MEASURED_OP_ENERGY_NJ_PER_KB)?;
    out.log.push(format!(
        "energy fit max relative error {:.2e}",
        fit.max_rel_err
    ));
    out.files.push(("bench.csv".into(), csv));
    out.files.push((
        "energy_fit.json".into(),
        serde_json::to_string_pretty(&json!({"schema_version": SCHEMA_VERSION, "fit": fit}))?
            + "\n",
    ));
    Ok(out)
}

fn workload_files(
    name: &str,
    cfg: &RunConfig,
    params: serde_json::Value,
    result: serde_json::Value,
    oracle_pass: bool,
    run: &WorkloadRun,
) -> Result<CommandOutput> {
    let speedup: SpeedupReport =
        report_speedup(run, &cfg.host, &cfg.timing, cfg.latency_mode, cfg.banks);
    let summary = run.trace().summary();
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "workload": name,
        "seed": cfg.seed,
        "params": params,
        "oracle": if oracle_pass { "PASS" } else { "FAIL" },
        "result": result,
        "trace_summary": summary,
        "reliability_faults": run.report().faults.len(),
        "fault_bits": run.report().fault_bits,
        "cost": speedup,
    });
    let mut out = CommandOutput::new();
    out.oracle_pass = oracle_pass;
    out.faults = run.report().faults.len();
    out.log.push(format!(
        "{name} oracle: {}",
        if oracle_pass { "PASS" } else { "FAIL" }
    ));
    out.log.push(format!(
        "modeled speedup {:.2}X (buddy {:.0} ns, baseline {:.0} ns, bitcount {:.0} ns)",
        speedup.speedup, speedup.buddy_ns, speedup.baseline_ns, speedup.bitcount_ns
    ));
    let mut csv =
        String::from("schema_version,workload,buddy_ns,baseline_ns,bitcount_ns,speedup\n");
    writeln!(
        csv,
        "{SCHEMA_VERSION},{name},{:.3},{:.3},{:.3},{:.4}",
        speedup.buddy_ns, speedup.baseline_ns, speedup.bitcount_ns, speedup.speedup
    )
    .expect("write to string");
    out.files.push((
        "results.json".into(),
        serde_json::to_string_pretty(&report)? + "\n",
    ));
    out.files
        .push(("trace.jsonl".into(), run.trace().to_jsonl()));
    out.files.push(("cost.csv".into(), csv));
    Ok(out)
}

pub fn cmd_workload(cfg: &RunConfig, name: WorkloadName) -> Result<CommandOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let model = cfg.reliability_model()?;
    let row_bits = cfg.row_bytes * 8;
    match name {
        WorkloadName::Bitmap => {
            let p = &cfg.workloads.bitmap;
            let idx = BitmapIndexSet::random(p.users, p.weeks, p.activity, &mut rng);
            let (res, run) = bitmap_query(&idx, p.weeks, row_bits, model)?;
            let expect = oracle::bitmap(&idx, p.weeks);
            let pass = res.unique_weekly_active == expect.0 && res.male_weekly_active == expect.1;
            workload_files("bitmap", cfg, json!(p), json!(res), pass, &run)
        }
        WorkloadName::Bitweaving => {
            let p = &cfg.workloads.bitweaving;
            let col = BitSlicedColumn::random(p.bits, p.rows, &mut rng)?;
            let values = col.values();
            let max = (1u64 << p.bits) - 1;
            let mut merged: Option<WorkloadRun> = None;
            let mut results = Vec::new();
            let mut pass = true;
            for _ in 0..p.predicates.max(1) {
                let a = rand::Rng::gen_range(&mut rng, 0..=max);
                let b = rand::Rng::gen_range(&mut rng, 0..=max);
                let (c1, c2) = (a.min(b), a.max(b));
                let (res, run) = bitweaving_scan(&col, c1, c2, row_bits, model.clone())?;
                let expect = values
                    .iter()
                    .filter(|&&v| (c1..=c2).contains(&u64::from(v)))
                    .count() as u64;
                let rows_ok = values
                    .iter()
                    .enumerate()
                    .all(|(i, &v)| res.matches.get(i) == (c1..=c2).contains(&u64::from(v)));
                pass &= rows_ok && res.count == expect;
                results.push(json!({"c1": c1, "c2": c2, "count": res.count}));
                match &mut merged {
                    Some(m) => {
                        m.bitcount_bytes += run.bitcount_bytes;
                        m.outcome.merge(run.outcome);
                    }
                    None => merged = Some(run),
                }
            }
            let run = merged.expect("at least one predicate");
            workload_files("bitweaving", cfg, json!(p), json!(results), pass, &run)
        }
        WorkloadName::Sets => {
            let p = &cfg.workloads.sets;
            let input = sets::random_sets(p.k, p.set_size, &mut rng);
            let (res, run) = set_ops(&input, row_bits, model)?;
            let pass = res == oracle::sets(&input);
            let summary = json!({
                "union_len": res.union.len(),
                "intersection_len": res.intersection.len(),
                "difference_len": res.difference.len(),
            });
            workload_files("sets", cfg, json!(p), summary, pass, &run)
        }
    }
}

/// Direct host evaluations used to check workload results.
mod oracle {
    use super::*;
    use crate::workloads::SetResult;

    pub fn bitmap(idx: &BitmapIndexSet, weeks: usize) -> (u64, Vec<u64>) {
        let recent = &idx.days[idx.weeks() - weeks..];
        let week_rows: Vec<_> = recent
            .iter()
            .map(|days| {
                days[1..]
                    .iter()
                    .fold(days[0].clone(), |acc, d| acc.zip_with(d, |a, b| a | b))
            })
            .collect();
        let every = week_rows[1..]
            .iter()
            .fold(week_rows[0].clone(), |acc, w| acc.zip_with(w, |a, b| a & b));
        let male = week_rows
            .iter()
            .map(|w| w.zip_with(&idx.male, |a, b| a & b).count_ones())
            .collect();
        (every.count_ones(), male)
    }

    pub fn sets(input: &[BTreeSet<u32>]) -> SetResult {
        let union: BTreeSet<u32> = input.iter().flatten().copied().collect();
        let intersection = input[0]
            .iter()
            .filter(|e| input.iter().all(|s| s.contains(e)))
            .copied()
            .collect();
        let difference = input[0]
            .iter()
            .filter(|e| input[1..].iter().all(|s| !s.contains(e)))
            .copied()
            .collect();
        SetResult {
            union: union.into_iter().collect(),
            intersection,
            difference,
        }
    }
}

pub fn cmd_trace_dump(cfg: &RunConfig, op: BitwiseOp) -> Result<CommandOutput> {
    let trace = canonical_trace(op);
    let latency = crate::cost::trace_latency(&trace, &cfg.timing, cfg.latency_mode);
    let mut out = CommandOutput::new();
    out.log.push(trace.to_jsonl().trim_end().to_string());
    out.log.push(format!(
        "# {op}: {} commands, {latency} ns",
        trace.commands().count()
    ));
    out.files
        .push((format!("trace_{op}.jsonl"), trace.to_jsonl()));
    Ok(out)
}

/// Run one command; `Ok(true)` when every oracle passed and no unallowed
/// fault occurred.
pub fn run(cli: &Cli) -> Result<bool> {
    let cfg = cli.resolve_config()?;
    let out = match &cli.command {
        Command::Reliability { .. } => cmd_reliability(&cfg)?,
        Command::Bench { .. } => cmd_bench(&cfg)?,
        Command::Workload { name, .. } => cmd_workload(&cfg, *name)?,
        Command::TraceDump { op } => cmd_trace_dump(&cfg, *op)?,
    };
    out.write_to(&cfg.out_dir)?;
    for line in &out.log {
        println!("{line}");
    }
    if out.faults > 0 {
        eprintln!("RELIABILITY_FAULT: {} fault event(s)", out.faults);
    }
    Ok(out.success(cli.allow_faults))
}
