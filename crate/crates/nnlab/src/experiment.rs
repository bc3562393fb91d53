//! Batch experiment front-end: a flat key-value config format, presets
//! named after the claims they reproduce, command implementations behind the
//! CLI subcommands, and the self-test suite.
//!
//! Config resolution order: preset defaults, then file keys, then CLI flag
//! overrides. Every output embeds the crate version, the seed, and a hash of
//! the canonical config text, and is byte-identical across repeated runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::harness::{
    crf_frequency, default_checkpoints, path_inequality_check, run_monte_carlo, run_trajectory,
    tree_points, AggregateReport, DyadicInterval, HarnessError, RunReport,
};
use crate::learners::{
    KnnSchedule, Learner, LearnerRule, OnlinePredictor, ReferenceLearner, TieBreak,
};
use crate::partitions::{
    cells_visited_curve, smv_ratio_report, PartitionError, PartitionSpec, SmvReport,
};
use crate::processes::{
    gen_1nn_adversarial, gen_enumerated_fresh, gen_finite_support, gen_iid_uniform,
    gen_knn_adversarial, ProcessError, ScheduleParams, SchedulePreset, Trajectory,
};
use crate::rng::SeededStream;
use crate::spaces::{Label, TargetFunction};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// Anything wrong with the configuration itself (exit code 1).
    #[error("config error: {0}")]
    Config(String),
    /// Failures while running a valid configuration (exit code 2).
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

fn cfg_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

/// Input process selection.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProcessConfig {
    Adversarial1nn {
        preset: SchedulePreset,
    },
    AdversarialKnn {
        preset: SchedulePreset,
        epsilon: f64,
        delta: f64,
    },
    IidUniform {
        bits: u64,
    },
    EnumeratedFresh,
    FiniteSupport {
        support: Vec<Dyadic>,
    },
}

impl ProcessConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ProcessConfig::Adversarial1nn { .. } => "adversarial-1nn",
            ProcessConfig::AdversarialKnn { .. } => "adversarial-knn",
            ProcessConfig::IidUniform { .. } => "iid-uniform",
            ProcessConfig::EnumeratedFresh => "enumerated-fresh",
            ProcessConfig::FiniteSupport { .. } => "finite-support",
        }
    }

    /// Schedule parameters for the adversarial kinds.
    pub fn schedule(&self, horizon: u64) -> Option<ScheduleParams> {
        match self {
            ProcessConfig::Adversarial1nn { preset } => Some(match preset {
                SchedulePreset::Desk => ScheduleParams::one_nn_desk(horizon),
                SchedulePreset::PaperExact => ScheduleParams::one_nn_paper_exact(horizon),
            }),
            ProcessConfig::AdversarialKnn {
                preset,
                epsilon,
                delta,
            } => Some(match preset {
                SchedulePreset::Desk => ScheduleParams::knn_desk(horizon),
                SchedulePreset::PaperExact => {
                    ScheduleParams::knn_paper_exact(horizon, *epsilon, *delta)
                }
            }),
            _ => None,
        }
    }

    pub fn generate(
        &self,
        seed: u64,
        horizon: u64,
        target: &TargetFunction,
    ) -> Result<Trajectory, ProcessError> {
        match self {
            ProcessConfig::Adversarial1nn { .. } => {
                let params = self.schedule(horizon).expect("adversarial");
                gen_1nn_adversarial(seed, &params)
            }
            ProcessConfig::AdversarialKnn { .. } => {
                let params = self.schedule(horizon).expect("adversarial");
                gen_knn_adversarial(seed, &params)
            }
            ProcessConfig::IidUniform { bits } => gen_iid_uniform(seed, horizon, *bits, target),
            ProcessConfig::EnumeratedFresh => gen_enumerated_fresh(horizon, target),
            ProcessConfig::FiniteSupport { support } => {
                gen_finite_support(seed, support, horizon, target)
            }
        }
    }
}

/// One experiment: process, target, learners, horizon, trials, outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub seed: u64,
    pub horizon: u64,
    pub trials: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Explicit checkpoint grid; `None` means log-spaced defaults.
    pub checkpoints: Option<Vec<u64>>,
    pub default_label: Label,
    pub process: ProcessConfig,
    pub target: TargetFunction,
    pub learners: Vec<LearnerRule>,
    pub partition: PartitionSpec,
    pub crf_set: Vec<DyadicInterval>,
}

impl ExperimentConfig {
    fn base() -> ExperimentConfig {
        ExperimentConfig {
            preset: None,
            seed: 1,
            horizon: 20_000,
            trials: 1,
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            out_dir: PathBuf::from("out"),
            checkpoints: None,
            default_label: Label(0),
            process: ProcessConfig::Adversarial1nn {
                preset: SchedulePreset::Desk,
            },
            target: TargetFunction::IndicatorDyadics,
            learners: vec![LearnerRule::kc1nn(2)],
            partition: PartitionSpec::Grid {
                eta: Dyadic::pow2_neg(10),
            },
            crf_set: vec![half_interval()],
        }
    }

    pub fn effective_checkpoints(&self) -> Vec<u64> {
        self.checkpoints
            .clone()
            .unwrap_or_else(|| default_checkpoints(self.horizon))
    }

    /// Full validation: schedule invariants, learner/process pairing,
    /// checkpoint sanity.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(cfg_err("trials must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(cfg_err("horizon must be at least 1"));
        }
        if self.learners.is_empty() {
            return Err(cfg_err("at least one learner is required"));
        }
        let checkpoints = self.effective_checkpoints();
        if checkpoints.is_empty()
            || checkpoints[0] == 0
            || checkpoints.windows(2).any(|w| w[0] >= w[1])
            || *checkpoints.last().expect("non-empty") > self.horizon
        {
            return Err(cfg_err(
                "checkpoints must be sorted, positive, and within the horizon",
            ));
        }
        if let Some(params) = self.process.schedule(self.horizon) {
            params
                .blocks()
                .map_err(|e| cfg_err(format!("schedule: {e}")))?;
            // A neighbor-count schedule paired with the planted-run process
            // must fit inside every block's planted run.
            if params.process == crate::processes::AdversarialKind::Knn {
                for rule in &self.learners {
                    if let LearnerRule::KNearest { schedule } = rule {
                        params
                            .validate_knn_pairing(schedule)
                            .map_err(|e| cfg_err(format!("schedule pairing: {e}")))?;
                    }
                }
            }
        }
        if let PartitionSpec::Grid { eta } = &self.partition {
            if eta.is_zero() {
                return Err(cfg_err("partition grid width must be positive"));
            }
        }
        Ok(())
    }

    /// Canonical flat key-value text; parsing it back yields an equal config.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(p) = &self.preset {
            put("preset", p.clone());
        }
        put("seed", self.seed.to_string());
        put("horizon", self.horizon.to_string());
        put("trials", self.trials.to_string());
        put("workers", self.workers.to_string());
        put("out_dir", self.out_dir.display().to_string());
        if let Some(cp) = &self.checkpoints {
            put(
                "checkpoints",
                cp.iter()
                    .map(|t| t.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        put("default_label", self.default_label.0.to_string());
        put("process.kind", self.process.kind().to_string());
        match &self.process {
            ProcessConfig::Adversarial1nn { preset } => {
                put("process.preset", preset_str(*preset).to_string());
            }
            ProcessConfig::AdversarialKnn {
                preset,
                epsilon,
                delta,
            } => {
                put("process.preset", preset_str(*preset).to_string());
                put("process.epsilon", epsilon.to_string());
                put("process.delta", delta.to_string());
            }
            ProcessConfig::IidUniform { bits } => put("process.bits", bits.to_string()),
            ProcessConfig::EnumeratedFresh => {}
            ProcessConfig::FiniteSupport { support } => put(
                "process.support",
                support
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        }
        put("target.kind", self.target.name().to_string());
        match &self.target {
            TargetFunction::IndicatorDyadics => {}
            TargetFunction::IndicatorIntervalBelow { s, closed } => {
                put("target.s", s.to_string());
                put("target.closed", closed.to_string());
            }
            TargetFunction::IndicatorBall { center, radius } => {
                put("target.center", center.to_string());
                put("target.radius", radius.to_string());
            }
            TargetFunction::Constant { label } => put("target.label", label.0.to_string()),
            TargetFunction::CustomTable { table } => put(
                "target.table",
                table
                    .iter()
                    .map(|(x, y)| format!("{x}={}", y.0))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
        }
        put(
            "learners",
            self.learners
                .iter()
                .map(format_learner)
                .collect::<Vec<_>>()
                .join(","),
        );
        match &self.partition {
            PartitionSpec::Centered { s } => {
                put("partition.kind", "centered".to_string());
                put("partition.center", s.to_string());
            }
            PartitionSpec::Grid { eta } => {
                put("partition.kind", "grid".to_string());
                put("partition.eta", eta.to_string());
            }
            PartitionSpec::DistinctPoints => put("partition.kind", "distinct".to_string()),
            PartitionSpec::Product { .. } => put("partition.kind", "product".to_string()),
        }
        put(
            "crf.set",
            self.crf_set
                .iter()
                .map(format_interval)
                .collect::<Vec<_>>()
                .join(","),
        );
        out
    }

    /// Parses the flat key-value format; `#` starts a comment, unknown keys
    /// are rejected. A `preset` key seeds the defaults before other keys
    /// apply.
    pub fn from_kv(text: &str) -> Result<ExperimentConfig, ExperimentError> {
        let mut map: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected key = value", lineno + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut cfg = match map.get("preset") {
            Some(name) => {
                preset_config(name).ok_or_else(|| cfg_err(format!("unknown preset {name:?}")))?
            }
            None => {
                if !map.contains_key("process.kind") {
                    return Err(cfg_err("process.kind is required when no preset is given"));
                }
                ExperimentConfig::base()
            }
        };
        apply_kv(&mut cfg, &map)?;
        Ok(cfg)
    }

    /// The config text with execution-only keys (output directory, worker
    /// bound) removed; they do not affect results. This is what gets hashed
    /// and echoed into reports.
    pub fn canonical_kv(&self) -> String {
        self.to_kv()
            .lines()
            .filter(|l| !l.starts_with("out_dir =") && !l.starts_with("workers ="))
            .map(|l| format!("{l}\n"))
            .collect()
    }

    /// Short hash of the canonical config text, embedded in every output.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_kv().as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}

fn preset_str(p: SchedulePreset) -> &'static str {
    match p {
        SchedulePreset::Desk => "desk",
        SchedulePreset::PaperExact => "paper-exact",
    }
}

fn parse_preset(s: &str) -> Result<SchedulePreset, ExperimentError> {
    match s {
        "desk" => Ok(SchedulePreset::Desk),
        "paper-exact" => Ok(SchedulePreset::PaperExact),
        other => Err(cfg_err(format!("unknown schedule preset {other:?}"))),
    }
}

pub fn format_learner(rule: &LearnerRule) -> String {
    match rule {
        LearnerRule::Memorize => "memo".to_string(),
        LearnerRule::NearestNeighbor => "1nn".to_string(),
        LearnerRule::CappedNearestNeighbor { cap } => format!("{cap}c1nn"),
        LearnerRule::KNearest { schedule } => match schedule {
            KnnSchedule::Constant { k } => format!("knn:{k}"),
            KnnSchedule::FloorLog2 => "knn:floor_log2".to_string(),
            KnnSchedule::FloorSqrt => "knn:floor_sqrt".to_string(),
            KnnSchedule::Table { entries } => format!(
                "knn:table:{}",
                entries
                    .iter()
                    .map(|(t, k)| format!("{t}={k}"))
                    .collect::<Vec<_>>()
                    .join(";")
            ),
        },
    }
}

pub fn parse_learner(s: &str) -> Result<LearnerRule, ExperimentError> {
    let s = s.trim();
    if s == "memo" {
        return Ok(LearnerRule::Memorize);
    }
    if s == "1nn" {
        return Ok(LearnerRule::NearestNeighbor);
    }
    if let Some(cap) = s.strip_suffix("c1nn") {
        let cap: u32 = cap
            .parse()
            .map_err(|_| cfg_err(format!("bad capped rule {s:?}")))?;
        if cap == 0 {
            return Err(cfg_err("cap must be at least 1"));
        }
        return Ok(LearnerRule::kc1nn(cap));
    }
    if let Some(arg) = s.strip_prefix("kc1nn:") {
        let cap: u32 = arg
            .parse()
            .map_err(|_| cfg_err(format!("bad capped rule {s:?}")))?;
        if cap == 0 {
            return Err(cfg_err("cap must be at least 1"));
        }
        return Ok(LearnerRule::kc1nn(cap));
    }
    if let Some(arg) = s.strip_prefix("knn:") {
        let schedule = match arg {
            "floor_log2" => KnnSchedule::FloorLog2,
            "floor_sqrt" => KnnSchedule::FloorSqrt,
            other => {
                if let Some(table) = other.strip_prefix("table:") {
                    let entries = table
                        .split(';')
                        .map(|item| {
                            let (t, k) = item
                                .split_once('=')
                                .ok_or_else(|| cfg_err(format!("bad table entry {item:?}")))?;
                            Ok((
                                t.parse()
                                    .map_err(|_| cfg_err(format!("bad table time {t:?}")))?,
                                k.parse()
                                    .map_err(|_| cfg_err(format!("bad table k {k:?}")))?,
                            ))
                        })
                        .collect::<Result<Vec<(u64, u32)>, ExperimentError>>()?;
                    KnnSchedule::Table { entries }
                } else {
                    let k: u32 = other
                        .parse()
                        .map_err(|_| cfg_err(format!("bad neighbor count {other:?}")))?;
                    KnnSchedule::Constant { k }
                }
            }
        };
        return Ok(LearnerRule::KNearest { schedule });
    }
    Err(cfg_err(format!(
        "unknown learner {s:?} (expected memo, 1nn, <k>c1nn, knn:...)"
    )))
}

fn format_interval(iv: &DyadicInterval) -> String {
    format!(
        "{}{};{}{}",
        if iv.lo_closed { '[' } else { '(' },
        iv.lo,
        iv.hi,
        if iv.hi_closed { ']' } else { ')' },
    )
}

/// Public alias used by the CLI's `--set` flag.
pub fn parse_interval_str(s: &str) -> Result<DyadicInterval, ExperimentError> {
    parse_interval(s)
}

fn parse_interval(s: &str) -> Result<DyadicInterval, ExperimentError> {
    let s = s.trim();
    let bad = || cfg_err(format!("bad interval {s:?}, expected like [0/2^0;1/2^1)"));
    let lo_closed = match s.chars().next() {
        Some('[') => true,
        Some('(') => false,
        _ => return Err(bad()),
    };
    let hi_closed = match s.chars().last() {
        Some(']') => true,
        Some(')') => false,
        _ => return Err(bad()),
    };
    let inner = &s[1..s.len() - 1];
    let (lo, hi) = inner.split_once(';').ok_or_else(bad)?;
    let lo: Dyadic = lo.trim().parse().map_err(|_| bad())?;
    let hi: Dyadic = hi.trim().parse().map_err(|_| bad())?;
    DyadicInterval::new(lo, hi, lo_closed, hi_closed)
        .map_err(|e| cfg_err(format!("bad interval: {e}")))
}

fn parse_dyadic(s: &str) -> Result<Dyadic, ExperimentError> {
    s.trim()
        .parse()
        .map_err(|e| cfg_err(format!("bad dyadic {s:?}: {e}")))
}

fn apply_kv(
    cfg: &mut ExperimentConfig,
    map: &BTreeMap<String, String>,
) -> Result<(), ExperimentError> {
    // Process selection first: other process.* keys refine it.
    if let Some(kind) = map.get("process.kind") {
        cfg.process = match kind.as_str() {
            "adversarial-1nn" => ProcessConfig::Adversarial1nn {
                preset: SchedulePreset::Desk,
            },
            "adversarial-knn" => ProcessConfig::AdversarialKnn {
                preset: SchedulePreset::Desk,
                epsilon: 0.05,
                delta: 1.0,
            },
            "iid-uniform" => ProcessConfig::IidUniform { bits: 32 },
            "enumerated-fresh" => ProcessConfig::EnumeratedFresh,
            "finite-support" => ProcessConfig::FiniteSupport {
                support: vec![
                    Dyadic::from_u64_ratio(1, 2).expect("1/4"),
                    Dyadic::from_u64_ratio(3, 2).expect("3/4"),
                ],
            },
            other => return Err(cfg_err(format!("unknown process.kind {other:?}"))),
        };
    }
    if let Some(kind) = map.get("target.kind") {
        cfg.target = match kind.as_str() {
            "indicator-dyadics" => TargetFunction::IndicatorDyadics,
            "interval-below" => TargetFunction::IndicatorIntervalBelow {
                s: Dyadic::one_half(),
                closed: false,
            },
            "ball" => TargetFunction::IndicatorBall {
                center: Dyadic::one_half(),
                radius: Dyadic::from_u64_ratio(1, 2).expect("1/4"),
            },
            "constant" => TargetFunction::Constant { label: Label(0) },
            "custom-table" => TargetFunction::CustomTable {
                table: BTreeMap::new(),
            },
            other => return Err(cfg_err(format!("unknown target.kind {other:?}"))),
        };
    }
    if let Some(kind) = map.get("partition.kind") {
        cfg.partition = match kind.as_str() {
            "grid" => PartitionSpec::Grid {
                eta: Dyadic::pow2_neg(10),
            },
            "centered" => PartitionSpec::Centered {
                s: Dyadic::one_half(),
            },
            "distinct" => PartitionSpec::DistinctPoints,
            other => return Err(cfg_err(format!("unknown partition.kind {other:?}"))),
        };
    }
    for (key, value) in map {
        match key.as_str() {
            "preset" | "process.kind" | "target.kind" | "partition.kind" => {}
            "seed" => cfg.seed = parse_num(key, value)?,
            "horizon" => cfg.horizon = parse_num(key, value)?,
            "trials" => cfg.trials = parse_num(key, value)?,
            "workers" => cfg.workers = parse_num(key, value)? as usize,
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "checkpoints" => {
                let cp = value
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<u64>()
                            .map_err(|_| cfg_err(format!("bad checkpoint {t:?}")))
                    })
                    .collect::<Result<Vec<u64>, _>>()?;
                cfg.checkpoints = Some(cp);
            }
            "default_label" => cfg.default_label = Label(parse_num(key, value)? as u32),
            "process.preset" => {
                let preset = parse_preset(value)?;
                match &mut cfg.process {
                    ProcessConfig::Adversarial1nn { preset: p } => *p = preset,
                    ProcessConfig::AdversarialKnn { preset: p, .. } => *p = preset,
                    _ => return Err(cfg_err("process.preset needs an adversarial process")),
                }
            }
            "process.epsilon" => match &mut cfg.process {
                ProcessConfig::AdversarialKnn { epsilon, .. } => {
                    *epsilon = parse_float(key, value)?;
                }
                _ => return Err(cfg_err("process.epsilon needs adversarial-knn")),
            },
            "process.delta" => match &mut cfg.process {
                ProcessConfig::AdversarialKnn { delta, .. } => {
                    *delta = parse_float(key, value)?;
                }
                _ => return Err(cfg_err("process.delta needs adversarial-knn")),
            },
            "process.bits" => match &mut cfg.process {
                ProcessConfig::IidUniform { bits } => *bits = parse_num(key, value)?,
                _ => return Err(cfg_err("process.bits needs iid-uniform")),
            },
            "process.support" => match &mut cfg.process {
                ProcessConfig::FiniteSupport { support } => {
                    *support = value
                        .split(',')
                        .map(parse_dyadic)
                        .collect::<Result<Vec<_>, _>>()?;
                }
                _ => return Err(cfg_err("process.support needs finite-support")),
            },
            "target.s" => match &mut cfg.target {
                TargetFunction::IndicatorIntervalBelow { s, .. } => *s = parse_dyadic(value)?,
                _ => return Err(cfg_err("target.s needs interval-below")),
            },
            "target.closed" => match &mut cfg.target {
                TargetFunction::IndicatorIntervalBelow { closed, .. } => {
                    *closed = parse_bool(key, value)?;
                }
                _ => return Err(cfg_err("target.closed needs interval-below")),
            },
            "target.center" => match &mut cfg.target {
                TargetFunction::IndicatorBall { center, .. } => *center = parse_dyadic(value)?,
                _ => return Err(cfg_err("target.center needs ball")),
            },
            "target.radius" => match &mut cfg.target {
                TargetFunction::IndicatorBall { radius, .. } => *radius = parse_dyadic(value)?,
                _ => return Err(cfg_err("target.radius needs ball")),
            },
            "target.label" => match &mut cfg.target {
                TargetFunction::Constant { label } => {
                    *label = Label(parse_num(key, value)? as u32);
                }
                _ => return Err(cfg_err("target.label needs constant")),
            },
            "target.table" => match &mut cfg.target {
                TargetFunction::CustomTable { table } => {
                    table.clear();
                    for item in value.split(',') {
                        let (x, y) = item
                            .split_once('=')
                            .ok_or_else(|| cfg_err(format!("bad table entry {item:?}")))?;
                        table.insert(
                            parse_dyadic(x)?,
                            Label(parse_num("target.table", y)? as u32),
                        );
                    }
                }
                _ => return Err(cfg_err("target.table needs custom-table")),
            },
            "learners" => {
                cfg.learners = value
                    .split(',')
                    .map(parse_learner)
                    .collect::<Result<Vec<_>, _>>()?;
            }
            "partition.eta" => match &mut cfg.partition {
                PartitionSpec::Grid { eta } => *eta = parse_dyadic(value)?,
                _ => return Err(cfg_err("partition.eta needs grid")),
            },
            "partition.center" => match &mut cfg.partition {
                PartitionSpec::Centered { s } => *s = parse_dyadic(value)?,
                _ => return Err(cfg_err("partition.center needs centered")),
            },
            "crf.set" => {
                cfg.crf_set = value
                    .split(',')
                    .map(parse_interval)
                    .collect::<Result<Vec<_>, _>>()?;
            }
            other => return Err(cfg_err(format!("unknown config key {other:?}"))),
        }
    }
    Ok(())
}

fn parse_num(key: &str, value: &str) -> Result<u64, ExperimentError> {
    value
        .parse()
        .map_err(|_| cfg_err(format!("bad number for {key}: {value:?}")))
}

fn parse_float(key: &str, value: &str) -> Result<f64, ExperimentError> {
    value
        .parse()
        .map_err(|_| cfg_err(format!("bad float for {key}: {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ExperimentError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(cfg_err(format!("bad bool for {key}: {value:?}"))),
    }
}

fn half_interval() -> DyadicInterval {
    DyadicInterval::new(Dyadic::zero(), Dyadic::one_half(), true, false).expect("[0, 1/2)")
}

/// Built-in presets, named after the claims they exercise.
pub const PRESET_NAMES: [&str; 5] = [
    "thm4-1nn-fails",
    "thm4-2c1nn-succeeds",
    "thm3-knn-fails",
    "crf-check",
    "smv-grid",
];

pub fn preset_config(name: &str) -> Option<ExperimentConfig> {
    let mut cfg = ExperimentConfig::base();
    cfg.preset = Some(name.to_string());
    match name {
        // Plain nearest neighbor degrades on the anchor-collapse process.
        "thm4-1nn-fails" => {
            cfg.trials = 20;
            cfg.learners = vec![LearnerRule::NearestNeighbor];
        }
        // The cap-2 variant stays consistent on the very same runs.
        "thm4-2c1nn-succeeds" => {
            cfg.trials = 20;
            cfg.learners = vec![LearnerRule::kc1nn(2), LearnerRule::NearestNeighbor];
        }
        // Majority votes fail on the planted-run process while cap-2 does not.
        "thm3-knn-fails" => {
            cfg.trials = 10;
            cfg.process = ProcessConfig::AdversarialKnn {
                preset: SchedulePreset::Desk,
                epsilon: 0.05,
                delta: 1.0,
            };
            cfg.learners = vec![
                LearnerRule::KNearest {
                    schedule: KnnSchedule::FloorLog2,
                },
                LearnerRule::kc1nn(2),
            ];
        }
        // Relative frequency of [0, 1/2) converges to 1/2 on the
        // anchor-collapse process.
        "crf-check" => {
            cfg.trials = 20;
            cfg.learners = vec![LearnerRule::NearestNeighbor];
            cfg.crf_set = vec![half_interval()];
        }
        // Visited cells of a 2^-10 grid stay sublinear on the same process.
        "smv-grid" => {
            cfg.trials = 1;
            cfg.learners = vec![LearnerRule::kc1nn(2)];
            cfg.partition = PartitionSpec::Grid {
                eta: Dyadic::pow2_neg(10),
            };
        }
        _ => return None,
    }
    Some(cfg)
}

/// Everything `run` writes, echoed back to the caller.
#[derive(Debug, Serialize)]
pub struct RunOutputs {
    pub config_hash: String,
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: PathBuf,
}

#[derive(Serialize)]
struct RunJson<'a> {
    version: &'a str,
    seed: u64,
    config_hash: String,
    config: String,
    loss: crate::spaces::LossSpec,
    aggregates: Vec<AggregateReport>,
    per_learner_trials: Vec<Vec<RunReport>>,
}

fn output_header(cfg: &ExperimentConfig, hash: &str) -> String {
    format!("# nnlab {VERSION}\n# seed={} config={hash}\n", cfg.seed)
}

/// Runs the configured experiment and writes `report.csv`, `report.json`,
/// and `plot.svg` into the output directory.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunOutputs, ExperimentError> {
    cfg.validate()?;
    let hash = cfg.hash();
    let checkpoints = cfg.effective_checkpoints();
    let target = cfg.target.clone();
    let process = cfg.process.clone();
    let horizon = cfg.horizon;
    let results = run_monte_carlo(
        |seed| process.generate(seed, horizon, &target),
        &cfg.target,
        &cfg.learners,
        cfg.default_label,
        cfg.trials,
        cfg.seed,
        &checkpoints,
        cfg.workers,
    )?;

    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("report.csv");
    let mut csv = output_header(cfg, &hash);
    csv.push_str("T,learner,mean_loss,q10,q90\n");
    for (agg, _) in &results {
        for (i, &t) in agg.checkpoints.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{t},{},{},{},{}",
                agg.learner, agg.mean_loss[i], agg.q10[i], agg.q90[i]
            );
        }
    }
    fs::write(&csv_path, csv)?;

    let aggregates: Vec<AggregateReport> = results.iter().map(|(a, _)| a.clone()).collect();
    let per_learner_trials: Vec<Vec<RunReport>> =
        results.into_iter().map(|(_, reports)| reports).collect();
    let json_path = cfg.out_dir.join("report.json");
    let doc = RunJson {
        version: VERSION,
        seed: cfg.seed,
        config_hash: hash.clone(),
        config: cfg.canonical_kv(),
        loss: crate::spaces::ZERO_ONE,
        aggregates: aggregates.clone(),
        per_learner_trials,
    };
    fs::write(&json_path, serde_json::to_string_pretty(&doc)?)?;

    let svg_path = cfg.out_dir.join("plot.svg");
    let title = format!(
        "nnlab {VERSION} {} seed={} trials={} config={}",
        cfg.preset.as_deref().unwrap_or(cfg.process.kind()),
        cfg.seed,
        cfg.trials,
        hash
    );
    fs::write(&svg_path, crate::svg::render_loss_plot(&aggregates, &title))?;

    Ok(RunOutputs {
        config_hash: hash,
        csv: csv_path,
        json: json_path,
        svg: svg_path,
    })
}

#[derive(Serialize)]
struct SmvJson<'a> {
    version: &'a str,
    seed: u64,
    config_hash: String,
    partition: &'a PartitionSpec,
    verdict: &'a str,
    points: &'a [(u64, u64, f64)],
}

/// Cells-visited curve and verdict for the configured process + partition.
pub fn cmd_smv(cfg: &ExperimentConfig) -> Result<(SmvReport, PathBuf), ExperimentError> {
    cfg.validate()?;
    let hash = cfg.hash();
    let traj = cfg.process.generate(cfg.seed, cfg.horizon, &cfg.target)?;
    let curve = cells_visited_curve(&traj, &cfg.partition, &cfg.effective_checkpoints())?;
    let report = smv_ratio_report(&curve)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("smv.csv");
    let mut buf = output_header(cfg, &hash).into_bytes();
    report.write_csv(&mut buf)?;
    fs::write(&csv_path, buf)?;
    let doc = SmvJson {
        version: VERSION,
        seed: cfg.seed,
        config_hash: hash,
        partition: &cfg.partition,
        verdict: report.verdict.as_str(),
        points: &report.points,
    };
    fs::write(
        cfg.out_dir.join("smv.json"),
        serde_json::to_string_pretty(&doc)?,
    )?;
    Ok((report, csv_path))
}

#[derive(Serialize)]
struct CrfJson<'a> {
    version: &'a str,
    seed: u64,
    config_hash: String,
    set: &'a [DyadicInterval],
    checkpoints: &'a [u64],
    mean_frequency: &'a [f64],
    per_trial_final: &'a [f64],
}

/// Mean relative-frequency curve of the configured interval set over
/// independent trials.
pub fn cmd_crf(cfg: &ExperimentConfig) -> Result<(Vec<f64>, PathBuf), ExperimentError> {
    cfg.validate()?;
    if cfg.crf_set.is_empty() {
        return Err(cfg_err("crf.set must not be empty"));
    }
    let hash = cfg.hash();
    let checkpoints = cfg.effective_checkpoints();
    let mut counts = vec![0u64; checkpoints.len()];
    let mut finals = Vec::with_capacity(cfg.trials as usize);
    for i in 0..cfg.trials {
        let seed = cfg.seed.wrapping_add(i);
        let traj = cfg.process.generate(seed, cfg.horizon, &cfg.target)?;
        let curve = crf_frequency(&traj, &cfg.crf_set, &checkpoints)?;
        for (slot, point) in counts.iter_mut().zip(&curve) {
            *slot += point.count;
        }
        finals.push(curve.last().expect("non-empty checkpoints").frequency);
    }
    let mean: Vec<f64> = counts
        .iter()
        .zip(&checkpoints)
        .map(|(&c, &t)| c as f64 / (cfg.trials * t) as f64)
        .collect();
    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("crf.csv");
    let mut csv = output_header(cfg, &hash);
    csv.push_str("T,mean_frequency\n");
    for (&t, &f) in checkpoints.iter().zip(&mean) {
        let _ = writeln!(csv, "{t},{f}");
    }
    fs::write(&csv_path, csv)?;
    let doc = CrfJson {
        version: VERSION,
        seed: cfg.seed,
        config_hash: hash,
        set: &cfg.crf_set,
        checkpoints: &checkpoints,
        mean_frequency: &mean,
        per_trial_final: &finals,
    };
    fs::write(
        cfg.out_dir.join("crf.json"),
        serde_json::to_string_pretty(&doc)?,
    )?;
    Ok((mean, csv_path))
}

/// Dumps one trajectory as CSV and as the binary cache.
pub fn cmd_trace(cfg: &ExperimentConfig) -> Result<(PathBuf, PathBuf), ExperimentError> {
    cfg.validate()?;
    let hash = cfg.hash();
    let traj = cfg.process.generate(cfg.seed, cfg.horizon, &cfg.target)?;
    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("trace.csv");
    let mut buf = output_header(cfg, &hash).into_bytes();
    traj.write_csv(&mut buf)?;
    fs::write(&csv_path, buf)?;
    let bin_path = cfg.out_dir.join("trace.bin");
    let mut buf = Vec::new();
    traj.write_bin(&mut buf)?;
    fs::write(&bin_path, buf)?;
    Ok((csv_path, bin_path))
}

/// One self-test line: name, pass flag, detail.
pub struct SelftestLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Runs the built-in invariant suites. All lines must pass; the corrupted
/// tie-break line passes when the corruption is *detected*.
pub fn cmd_selftest() -> Vec<SelftestLine> {
    let mut lines = Vec::new();

    // Exact-comparison filter against the pure big-integer path, including
    // deep near-ties.
    {
        let mut stream = SeededStream::new(0xC0FFEE, 1);
        let mut cases = 0u64;
        let mut bad = 0u64;
        for round in 0..25_000u64 {
            let bits = 1 + stream.next_u64() % 96;
            let a_num = stream.random_biguint(bits);
            let a = Dyadic::new(a_num, bits + stream.next_u64() % 64).expect("in range");
            let deep = 1 + stream.next_u64() % 4096;
            let eps = Dyadic::pow2_neg(deep);
            let mut pairs = vec![(a.clone(), a.clone())];
            if let Ok(b) = a.add(&eps) {
                pairs.push((a.clone(), b));
            }
            if let Ok(c) = a.sub(&eps) {
                pairs.push((c, a.clone()));
            }
            let other_bits = 1 + (stream.next_u64() + round) % 96;
            let other =
                Dyadic::new(stream.random_biguint(other_bits), other_bits + 8).expect("in range");
            pairs.push((a.clone(), other));
            for (x, y) in pairs {
                cases += 1;
                if x.compare(&y) != x.compare_exact(&y) {
                    bad += 1;
                }
            }
        }
        lines.push(SelftestLine {
            name: "dyadic-compare-filter",
            passed: bad == 0,
            detail: format!("{cases} comparisons, {bad} disagreements"),
        });
    }

    // Incremental learners against the linear-scan reference.
    {
        let rules = [
            LearnerRule::Memorize,
            LearnerRule::NearestNeighbor,
            LearnerRule::kc1nn(1),
            LearnerRule::kc1nn(2),
            LearnerRule::kc1nn(4),
            LearnerRule::KNearest {
                schedule: KnnSchedule::FloorLog2,
            },
        ];
        let mut mismatches = 0u64;
        let mut runs = 0u64;
        for seed in 0..10u64 {
            let stream = grid_stream(seed, 100);
            for rule in &rules {
                runs += 1;
                if !equivalent(rule.clone(), TieBreak::MinTime, &stream) {
                    mismatches += 1;
                }
            }
        }
        lines.push(SelftestLine {
            name: "learner-oracle-equivalence",
            passed: mismatches == 0,
            detail: format!("{runs} runs, {mismatches} mismatches"),
        });
    }

    // Cap and deletion law on random sequences.
    {
        let mut violations = 0u64;
        for seed in 0..70u64 {
            for cap in [1u32, 2, 4] {
                let stream = grid_stream(seed, 160);
                let mut learner = Learner::new(LearnerRule::kc1nn(cap), Label(0)).expect("cap>0");
                for (x, y) in &stream {
                    learner.predict(x).expect("predict");
                    learner.reveal(*y).expect("reveal");
                }
                let snap = learner.snapshot_state();
                let tree = learner.snapshot_tree();
                for n in &tree.nodes {
                    let in_dataset = snap.dataset.binary_search(&n.time).is_ok();
                    if n.child_count > cap
                        || in_dataset != (n.child_count < cap)
                        || n.deleted != (n.child_count == cap)
                    {
                        violations += 1;
                    }
                }
            }
        }
        lines.push(SelftestLine {
            name: "cap-invariant",
            passed: violations == 0,
            detail: format!("210 runs, {violations} violations"),
        });
    }

    // Path inequality on a canned capped run.
    {
        let params = ScheduleParams::one_nn_desk(1_500);
        let detail;
        let passed;
        match gen_1nn_adversarial(1, &params) {
            Ok(traj) => {
                match run_trajectory(
                    &traj,
                    &TargetFunction::IndicatorDyadics,
                    &LearnerRule::kc1nn(2),
                    Label(0),
                    &[1_500],
                ) {
                    Ok((_, tree)) => {
                        let points = tree_points(&traj, &tree);
                        let report = path_inequality_check(&tree, &points, 10_000, 5);
                        passed = report.violations.is_empty() && report.pairs_checked > 0;
                        detail = format!(
                            "{} pairs checked, {} violations",
                            report.pairs_checked,
                            report.violations.len()
                        );
                    }
                    Err(e) => {
                        passed = false;
                        detail = format!("run failed: {e}");
                    }
                }
            }
            Err(e) => {
                passed = false;
                detail = format!("generation failed: {e}");
            }
        }
        lines.push(SelftestLine {
            name: "path-inequality",
            passed,
            detail,
        });
    }

    // Negative control: a corrupted argmin tie-break must be caught by the
    // equivalence check.
    {
        let mut detected = false;
        for seed in 0..20u64 {
            let stream = grid_stream(seed, 160);
            if !equivalent(LearnerRule::kc1nn(2), TieBreak::MaxTime, &stream) {
                detected = true;
                break;
            }
        }
        lines.push(SelftestLine {
            name: "corrupted-tie-break-control",
            passed: detected,
            detail: if detected {
                "corruption detected as an equivalence failure".to_string()
            } else {
                "corruption went unnoticed".to_string()
            },
        });
    }

    lines
}

/// Random labeled points on a coarse grid (ties and duplicates likely).
fn grid_stream(seed: u64, len: usize) -> Vec<(Dyadic, Label)> {
    let mut s = SeededStream::new(seed, 0x5E1F);
    (0..len)
        .map(|_| {
            let m = s.index_below(1 << 4);
            let y = Label((s.next_u64() & 1) as u32);
            (Dyadic::from_u64_ratio(m, 4).expect("grid point"), y)
        })
        .collect()
}

fn equivalent(rule: LearnerRule, tie_break: TieBreak, stream: &[(Dyadic, Label)]) -> bool {
    let mut fast = Learner::with_tie_break(rule.clone(), Label(0), tie_break).expect("rule ok");
    let mut slow = ReferenceLearner::new(rule, Label(0)).expect("rule ok");
    for (x, y) in stream {
        let pf = fast.predict(x).expect("predict");
        let ps = slow.predict(x).expect("predict");
        if pf != ps {
            return false;
        }
        fast.reveal(*y).expect("reveal");
        slow.reveal(*y).expect("reveal");
    }
    fast.snapshot_state() == slow.snapshot_state()
}

/// Loads trajectories back from the `trace` binary cache.
pub fn load_trace(path: &Path) -> Result<Trajectory, ExperimentError> {
    let bytes = fs::read(path)?;
    Ok(Trajectory::read_bin(bytes.as_slice())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_exist_and_validate() {
        for name in PRESET_NAMES {
            let cfg = preset_config(name).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.preset.as_deref(), Some(name));
        }
        assert!(preset_config("nope").is_none());
    }

    #[test]
    fn kv_round_trip_for_presets() {
        for name in PRESET_NAMES {
            let cfg = preset_config(name).unwrap();
            let text = cfg.to_kv();
            let back = ExperimentConfig::from_kv(&text).unwrap();
            assert_eq!(back, cfg, "{name} round trip");
            assert_eq!(back.hash(), cfg.hash());
        }
    }

    #[test]
    fn kv_round_trip_custom() {
        let mut cfg = ExperimentConfig::base();
        cfg.process = ProcessConfig::FiniteSupport {
            support: vec![
                Dyadic::from_u64_ratio(1, 2).unwrap(),
                Dyadic::from_u64_ratio(3, 2).unwrap(),
            ],
        };
        cfg.target = TargetFunction::IndicatorIntervalBelow {
            s: Dyadic::from_u64_ratio(3, 3).unwrap(),
            closed: true,
        };
        cfg.learners = vec![
            LearnerRule::Memorize,
            LearnerRule::KNearest {
                schedule: KnnSchedule::Constant { k: 3 },
            },
        ];
        cfg.checkpoints = Some(vec![10, 100, 1000]);
        cfg.partition = PartitionSpec::Centered {
            s: Dyadic::one_half(),
        };
        let back = ExperimentConfig::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn kv_rejects_unknown_and_malformed() {
        assert!(
            ExperimentConfig::from_kv("bogus_key = 1\nprocess.kind = enumerated-fresh").is_err()
        );
        assert!(ExperimentConfig::from_kv("no equals sign").is_err());
        assert!(ExperimentConfig::from_kv("seed = 5").is_err()); // no process
        let ok = ExperimentConfig::from_kv(
            "# comment\nprocess.kind = enumerated-fresh\nseed = 5 # trailing\n",
        )
        .unwrap();
        assert_eq!(ok.seed, 5);
    }

    #[test]
    fn learner_spec_round_trip() {
        for s in [
            "memo",
            "1nn",
            "2c1nn",
            "4c1nn",
            "knn:floor_log2",
            "knn:floor_sqrt",
            "knn:7",
        ] {
            let rule = parse_learner(s).unwrap();
            assert_eq!(format_learner(&rule), s);
        }
        assert_eq!(parse_learner("kc1nn:2").unwrap(), LearnerRule::kc1nn(2));
        assert!(parse_learner("0c1nn").is_err());
        assert!(parse_learner("5nn").is_err());
    }

    #[test]
    fn interval_spec_round_trip() {
        let iv = half_interval();
        let s = format_interval(&iv);
        assert_eq!(s, "[0/2^0;1/2^1)");
        assert_eq!(parse_interval(&s).unwrap(), iv);
        assert!(parse_interval("[1/2^1;0/2^0)").is_err());
        assert!(parse_interval("0/2^0;1/2^1").is_err());
    }

    #[test]
    fn validation_rejects_bad_pairing() {
        let mut cfg = preset_config("thm3-knn-fails").unwrap();
        cfg.learners = vec![LearnerRule::KNearest {
            schedule: KnnSchedule::Constant { k: 500 },
        }];
        assert!(matches!(cfg.validate(), Err(ExperimentError::Config(_))));
    }

    #[test]
    fn selftest_all_pass() {
        for line in cmd_selftest() {
            assert!(line.passed, "{}: {}", line.name, line.detail);
        }
    }

    #[test]
    fn run_and_outputs_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset_config("thm4-1nn-fails").unwrap();
        cfg.horizon = 600;
        cfg.trials = 2;
        cfg.workers = 1;
        cfg.checkpoints = Some(vec![256, 600]);
        cfg.out_dir = dir.path().join("a");
        let out1 = cmd_run(&cfg).unwrap();
        let first_csv = fs::read(&out1.csv).unwrap();
        let first_json = fs::read(&out1.json).unwrap();
        let first_svg = fs::read(&out1.svg).unwrap();
        cfg.out_dir = dir.path().join("b");
        let out2 = cmd_run(&cfg).unwrap();
        assert_eq!(first_csv, fs::read(&out2.csv).unwrap());
        assert_eq!(first_json, fs::read(&out2.json).unwrap());
        assert_eq!(first_svg, fs::read(&out2.svg).unwrap());
        let text = String::from_utf8(first_csv).unwrap();
        assert!(text.contains("T,learner,mean_loss,q10,q90"));
        assert!(text.lines().next().unwrap().starts_with("# nnlab"));
    }

    #[test]
    fn smv_verdicts_separate_processes() {
        let dir = tempfile::tempdir().unwrap();
        // Fresh enumeration under the identity partition reads linear.
        let mut cfg = ExperimentConfig::from_kv(
            "process.kind = enumerated-fresh\ntarget.kind = constant\npartition.kind = distinct",
        )
        .unwrap();
        cfg.horizon = 2048;
        cfg.out_dir = dir.path().join("fresh");
        let (report, _) = cmd_smv(&cfg).unwrap();
        assert_eq!(report.verdict, crate::partitions::SmvVerdict::Linear);
        // A two-point support under a grid saturates immediately.
        let mut cfg = ExperimentConfig::from_kv(
            "process.kind = finite-support\ntarget.kind = constant\npartition.kind = grid",
        )
        .unwrap();
        cfg.horizon = 2048;
        cfg.out_dir = dir.path().join("support");
        let (report, _) = cmd_smv(&cfg).unwrap();
        assert_eq!(report.verdict, crate::partitions::SmvVerdict::Shrinking);
    }

    #[test]
    fn smv_and_crf_commands() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = preset_config("smv-grid").unwrap();
        cfg.horizon = 512;
        cfg.checkpoints = Some(vec![256, 512]);
        cfg.out_dir = dir.path().to_path_buf();
        let (report, csv) = cmd_smv(&cfg).unwrap();
        assert!(csv.exists());
        assert_eq!(report.points.len(), 2);

        let mut cfg = preset_config("crf-check").unwrap();
        cfg.horizon = 512;
        cfg.trials = 2;
        cfg.checkpoints = Some(vec![256, 512]);
        cfg.out_dir = dir.path().to_path_buf();
        let (mean, csv) = cmd_crf(&cfg).unwrap();
        assert!(csv.exists());
        assert_eq!(mean.len(), 2);
        assert!(mean.iter().all(|f| (0.0..=1.0).contains(f)));
    }

    #[test]
    fn trace_round_trips_through_cache() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::from_kv("process.kind = enumerated-fresh").unwrap();
        cfg.horizon = 32;
        cfg.out_dir = dir.path().to_path_buf();
        let (csv, bin) = cmd_trace(&cfg).unwrap();
        let text = fs::read_to_string(csv).unwrap();
        assert!(text.lines().next().unwrap().starts_with("# nnlab"));
        assert!(text.lines().nth(2).unwrap().starts_with("t,x,y,provenance"));
        let traj = load_trace(&bin).unwrap();
        assert_eq!(traj.len(), 32);
    }
}
