//! Seeded generators for adversarial input processes, i.i.d. baselines, and
//! degenerate streams. Every emitted point is an exact dyadic and every label
//! is evaluated symbolically, so runs can be replayed bit for bit.
//!
//! The two adversarial processes proceed in blocks. Block `k` starts at time
//! `n_k` with a uniformly random odd-numerator dyadic anchor of order `p_k`
//! and then emits points `anchor + (U_k - anchor) / 2^(n_k + 2i)` that
//! collapse onto the anchor geometrically; the nearest-neighbor-misleading
//! variant additionally plants the `d_k + 1` closest order-`p_k` dyadics
//! before the collapse. `U_k` is a fresh uniform dyadic of `p_k + guard`
//! bits standing in for a continuous uniform draw at exact precision.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::{nth_closest_dyadic, Dyadic, DyadicError, DEFAULT_PRECISION_CAP};
use crate::learners::KnnSchedule;
use crate::rng::SeededStream;
use crate::spaces::{eval_target, Label, Provenance, SpacesError, TargetFunction};

/// Stream label tags; block streams depend only on `(seed, tag, k)`.
const TAG_ANCHOR: u64 = 1;
const TAG_UNIFORM: u64 = 2;
const TAG_IID: u64 = 3;
const TAG_SUPPORT: u64 = 4;

fn stream_label(tag: u64, k: u64) -> u64 {
    (tag << 56) | k
}

/// Soft ceiling on the quadratic order term in the desk schedule; beyond it
/// the guard lower bound takes over and orders grow linearly with time.
const DESK_ORDER_SOFT_CAP: u64 = 1 << 14;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error("schedule invalid at block {block}: {reason}")]
    InvalidSchedule { block: u64, reason: String },
    #[error("precision cap exceeded at block {block}: needs {required} bits, cap is {cap}")]
    PrecisionCap { block: u64, required: u64, cap: u64 },
    #[error(
        "epsilon/delta out of range: need (1+2e)/(1-2e) < 1 + d/2, got e={epsilon}, d={delta}"
    )]
    EpsilonDelta { epsilon: f64, delta: f64 },
    #[error(
        "neighbor schedule exceeds planted run at block {block}: max k_n {max_kn} > d_k {d_k}"
    )]
    ScheduleExceedsPlanted { block: u64, max_kn: u32, d_k: u64 },
    #[error("support set must not be empty")]
    EmptySupport,
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("iid precision must be at least 1")]
    ZeroPrecision,
    #[error(transparent)]
    Dyadic(#[from] DyadicError),
    #[error(transparent)]
    Spaces(#[from] SpacesError),
    #[error("malformed trajectory cache")]
    Decode,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversarialKind {
    /// Anchor-plus-collapse blocks that mislead plain nearest neighbor.
    OneNn,
    /// Planted-run blocks that mislead majority votes over `k_n` neighbors.
    Knn,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulePreset {
    /// The literal block schedules; feasible only for short horizons before
    /// the precision cap trips.
    PaperExact,
    /// Desk-scale schedules preserving every inequality the block analysis
    /// needs while keeping point exponents linear in time.
    Desk,
}

/// Block schedule parameters plus the standing conditions checked at
/// construction: `n_k` strictly increasing, `p_k > n_k`,
/// `p_k >= 2 n_(k+1) + k + guard`, and for the planted-run process
/// `d_k < n_(k+1) - n_k`, with the worst block exponent under the cap.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub process: AdversarialKind,
    pub preset: SchedulePreset,
    pub horizon: u64,
    /// Planted-run process only.
    pub epsilon: f64,
    /// Planted-run process only.
    pub delta: f64,
    /// Extra uniform bits beyond the anchor order.
    pub u_guard: u64,
    /// Slack in `p_k >= 2 n_(k+1) + k + guard`; the literal schedules need a
    /// small negative slack at their earliest blocks.
    pub schedule_guard: i64,
    pub precision_cap: u64,
}

impl ScheduleParams {
    pub fn one_nn_desk(horizon: u64) -> ScheduleParams {
        ScheduleParams {
            process: AdversarialKind::OneNn,
            preset: SchedulePreset::Desk,
            horizon,
            epsilon: 0.0,
            delta: 0.0,
            u_guard: 64,
            schedule_guard: 16,
            precision_cap: DEFAULT_PRECISION_CAP,
        }
    }

    pub fn one_nn_paper_exact(horizon: u64) -> ScheduleParams {
        ScheduleParams {
            schedule_guard: -14,
            preset: SchedulePreset::PaperExact,
            ..ScheduleParams::one_nn_desk(horizon)
        }
    }

    pub fn knn_desk(horizon: u64) -> ScheduleParams {
        ScheduleParams {
            process: AdversarialKind::Knn,
            preset: SchedulePreset::Desk,
            horizon,
            epsilon: 0.05,
            delta: 1.0,
            u_guard: 64,
            schedule_guard: 16,
            precision_cap: DEFAULT_PRECISION_CAP,
        }
    }

    pub fn knn_paper_exact(horizon: u64, epsilon: f64, delta: f64) -> ScheduleParams {
        ScheduleParams {
            epsilon,
            delta,
            schedule_guard: -3,
            preset: SchedulePreset::PaperExact,
            ..ScheduleParams::knn_desk(horizon)
        }
    }

    fn n_of(&self, k: u64) -> u64 {
        let kf = k as f64;
        match (self.process, self.preset) {
            // n_k = floor(k (1 + ln k)), shared by both presets of the
            // anchor-collapse process.
            (AdversarialKind::OneNn, _) => (kf * (1.0 + kf.ln())).floor() as u64,
            (AdversarialKind::Knn, SchedulePreset::Desk) => k * k,
            (AdversarialKind::Knn, SchedulePreset::PaperExact) => {
                (kf.powf(0.5 - self.epsilon)).exp().floor() as u64
            }
        }
    }

    fn guard_bound(&self, k: u64, n_next: u64) -> i128 {
        2 * n_next as i128 + k as i128 + self.schedule_guard as i128
    }

    fn p_of(&self, k: u64, n_k: u64, n_next: u64) -> u64 {
        let guard = self.guard_bound(k, n_next).max(1) as u64;
        match (self.process, self.preset) {
            (AdversarialKind::OneNn, SchedulePreset::Desk) => {
                (k * k).min(DESK_ORDER_SOFT_CAP).max(guard)
            }
            // The literal quadratic order, lifted at block 1 where it would
            // tie the block start (p_1 = n_1 = 1).
            (AdversarialKind::OneNn, SchedulePreset::PaperExact) => (k * k).max(n_k + 1),
            (AdversarialKind::Knn, SchedulePreset::Desk) => guard,
            (AdversarialKind::Knn, SchedulePreset::PaperExact) => {
                if k >= 32 {
                    u64::MAX // 4^k; forced over any realistic cap
                } else {
                    1u64 << (2 * k)
                }
            }
        }
    }

    fn d_of(&self, k: u64, n_k: u64, block_len: u64) -> (u64, bool) {
        let rule = match self.preset {
            SchedulePreset::Desk => (4.0 * ((k + 2) as f64).log2()).ceil() as u64,
            SchedulePreset::PaperExact => {
                let nf = n_k as f64;
                (nf / nf.ln().powf(1.0 + self.delta)).floor() as u64
            }
        };
        let max_d = block_len.saturating_sub(1);
        (rule.min(max_d), rule > max_d)
    }

    /// Expands and validates every block whose start lies in the horizon.
    pub fn blocks(&self) -> Result<Vec<BlockSchedule>, ProcessError> {
        if self.horizon == 0 {
            return Err(ProcessError::EmptyHorizon);
        }
        if self.process == AdversarialKind::Knn && self.preset == SchedulePreset::PaperExact {
            // (1+2e)/(1-2e) < 1 + d/2 rearranged to e (8 + 2d) < d, which
            // floats decide correctly at the boundary (e = 0.1, d = 1 is a
            // violation, not a pass).
            let ok = self.epsilon > 0.0
                && self.epsilon < 0.5
                && self.delta > 0.0
                && self.epsilon * (8.0 + 2.0 * self.delta) < self.delta;
            if !ok {
                return Err(ProcessError::EpsilonDelta {
                    epsilon: self.epsilon,
                    delta: self.delta,
                });
            }
        }
        let mut out = Vec::new();
        let mut k = 1u64;
        loop {
            let n_k = self.n_of(k);
            if k == 1 && n_k < 1 {
                return Err(ProcessError::InvalidSchedule {
                    block: 1,
                    reason: format!("n_1 = {n_k} < 1"),
                });
            }
            if n_k > self.horizon {
                break;
            }
            let n_next = self.n_of(k + 1);
            if n_next <= n_k {
                return Err(ProcessError::InvalidSchedule {
                    block: k,
                    reason: format!(
                        "n_{} = {} does not increase past n_{} = {}",
                        k + 1,
                        n_next,
                        k,
                        n_k
                    ),
                });
            }
            let p_k = self.p_of(k, n_k, n_next);
            if p_k <= n_k {
                return Err(ProcessError::InvalidSchedule {
                    block: k,
                    reason: format!("p_{k} = {p_k} <= n_{k} = {n_k}"),
                });
            }
            if (p_k as i128) < self.guard_bound(k, n_next) {
                return Err(ProcessError::InvalidSchedule {
                    block: k,
                    reason: format!(
                        "p_{k} = {p_k} < 2 n_{} + {k} + {}",
                        k + 1,
                        self.schedule_guard
                    ),
                });
            }
            let block_len = n_next - n_k;
            let (d_k, truncated) = match self.process {
                AdversarialKind::Knn => {
                    let (d, truncated) = self.d_of(k, n_k, block_len);
                    (Some(d), truncated)
                }
                AdversarialKind::OneNn => (None, false),
            };
            // Worst exponent emitted by this block.
            let required = p_k
                .saturating_add(self.u_guard)
                .saturating_add(n_k)
                .saturating_add(2 * block_len);
            if required > self.precision_cap {
                return Err(ProcessError::PrecisionCap {
                    block: k,
                    required,
                    cap: self.precision_cap,
                });
            }
            out.push(BlockSchedule {
                k,
                n_k,
                n_next,
                p_k,
                d_k,
                truncated,
            });
            k += 1;
        }
        Ok(out)
    }

    /// Checks that a paired neighbor-count schedule stays within every
    /// block's planted run.
    pub fn validate_knn_pairing(&self, schedule: &KnnSchedule) -> Result<(), ProcessError> {
        for b in self.blocks()? {
            let d_k = b.d_k.unwrap_or(0);
            let end = b.n_next.min(self.horizon + 1);
            let max_kn = (b.n_k..end).map(|t| schedule.k_at(t)).max().unwrap_or(1);
            if u64::from(max_kn) > d_k {
                return Err(ProcessError::ScheduleExceedsPlanted {
                    block: b.k,
                    max_kn,
                    d_k,
                });
            }
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub k: u64,
    pub n_k: u64,
    pub n_next: u64,
    pub p_k: u64,
    /// Planted-run length minus one; `None` for the anchor-collapse process.
    pub d_k: Option<u64>,
    /// True when the planted run had to be cut to fit the block.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub t: u64,
    pub x: Dyadic,
    pub y: Label,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub generator: String,
    pub seed: u64,
    pub horizon: u64,
    pub samples: Vec<LabeledSample>,
    pub blocks: Vec<BlockSchedule>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> u64 {
        self.samples.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// CSV export: `t,x,y,provenance` with exact `m/2^e` points.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y,provenance")?;
        for s in &self.samples {
            writeln!(w, "{},{},{},{}", s.t, s.x, s.y.0, s.provenance.as_str())?;
        }
        Ok(())
    }

    /// Compact binary cache for re-runs; round-trips exactly.
    pub fn write_bin<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        let mut buf = Vec::new();
        put_varint(&mut buf, self.seed);
        put_varint(&mut buf, self.horizon);
        put_bytes(&mut buf, self.generator.as_bytes());
        put_varint(&mut buf, self.warnings.len() as u64);
        for warning in &self.warnings {
            put_bytes(&mut buf, warning.as_bytes());
        }
        put_varint(&mut buf, self.blocks.len() as u64);
        for b in &self.blocks {
            put_varint(&mut buf, b.k);
            put_varint(&mut buf, b.n_k);
            put_varint(&mut buf, b.n_next);
            put_varint(&mut buf, b.p_k);
            match b.d_k {
                Some(d) => {
                    buf.push(1);
                    put_varint(&mut buf, d);
                }
                None => buf.push(0),
            }
            buf.push(b.truncated as u8);
        }
        put_varint(&mut buf, self.samples.len() as u64);
        for s in &self.samples {
            put_varint(&mut buf, s.t);
            put_varint(&mut buf, u64::from(s.y.0));
            buf.push(provenance_code(s.provenance));
            buf.extend_from_slice(&s.x.to_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_bin<R: Read>(mut r: R) -> Result<Trajectory, ProcessError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let mut pos = 0usize;
        if buf.len() < MAGIC.len() || &buf[..MAGIC.len()] != MAGIC {
            return Err(ProcessError::Decode);
        }
        pos += MAGIC.len();
        let seed = get_varint(&buf, &mut pos)?;
        let horizon = get_varint(&buf, &mut pos)?;
        let generator = get_string(&buf, &mut pos)?;
        let n_warnings = get_varint(&buf, &mut pos)?;
        let mut warnings = Vec::new();
        for _ in 0..n_warnings {
            warnings.push(get_string(&buf, &mut pos)?);
        }
        let n_blocks = get_varint(&buf, &mut pos)?;
        let mut blocks = Vec::new();
        for _ in 0..n_blocks {
            let k = get_varint(&buf, &mut pos)?;
            let n_k = get_varint(&buf, &mut pos)?;
            let n_next = get_varint(&buf, &mut pos)?;
            let p_k = get_varint(&buf, &mut pos)?;
            let has_d = get_byte(&buf, &mut pos)?;
            let d_k = match has_d {
                0 => None,
                1 => Some(get_varint(&buf, &mut pos)?),
                _ => return Err(ProcessError::Decode),
            };
            let truncated = match get_byte(&buf, &mut pos)? {
                0 => false,
                1 => true,
                _ => return Err(ProcessError::Decode),
            };
            blocks.push(BlockSchedule {
                k,
                n_k,
                n_next,
                p_k,
                d_k,
                truncated,
            });
        }
        let n_samples = get_varint(&buf, &mut pos)?;
        let mut samples = Vec::with_capacity(n_samples.min(1 << 24) as usize);
        for _ in 0..n_samples {
            let t = get_varint(&buf, &mut pos)?;
            let y = Label(
                u32::try_from(get_varint(&buf, &mut pos)?).map_err(|_| ProcessError::Decode)?,
            );
            let provenance = provenance_from_code(get_byte(&buf, &mut pos)?)?;
            let (x, used) = Dyadic::from_bytes(&buf[pos..]).map_err(|_| ProcessError::Decode)?;
            pos += used;
            samples.push(LabeledSample {
                t,
                x,
                y,
                provenance,
            });
        }
        if pos != buf.len() {
            return Err(ProcessError::Decode);
        }
        Ok(Trajectory {
            generator,
            seed,
            horizon,
            samples,
            blocks,
            warnings,
        })
    }
}

const MAGIC: &[u8] = b"NNLTRAJ1";

fn provenance_code(p: Provenance) -> u8 {
    match p {
        Provenance::AnchorDyadic => 0,
        Provenance::PlantedNeighbor => 1,
        Provenance::Perturbed => 2,
        Provenance::Iid => 3,
        Provenance::Enumerated => 4,
    }
}

fn provenance_from_code(c: u8) -> Result<Provenance, ProcessError> {
    Ok(match c {
        0 => Provenance::AnchorDyadic,
        1 => Provenance::PlantedNeighbor,
        2 => Provenance::Perturbed,
        3 => Provenance::Iid,
        4 => Provenance::Enumerated,
        _ => return Err(ProcessError::Decode),
    })
}

fn put_varint(buf: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            buf.push(byte);
            return;
        }
        buf.push(byte | 0x80);
    }
}

fn put_bytes(buf: &mut Vec<u8>, bytes: &[u8]) {
    put_varint(buf, bytes.len() as u64);
    buf.extend_from_slice(bytes);
}

fn get_varint(buf: &[u8], pos: &mut usize) -> Result<u64, ProcessError> {
    let mut v = 0u64;
    for i in 0..10 {
        let byte = *buf.get(*pos + i).ok_or(ProcessError::Decode)?;
        v |= u64::from(byte & 0x7f) << (7 * i);
        if byte & 0x80 == 0 {
            *pos += i + 1;
            return Ok(v);
        }
    }
    Err(ProcessError::Decode)
}

fn get_byte(buf: &[u8], pos: &mut usize) -> Result<u8, ProcessError> {
    let b = *buf.get(*pos).ok_or(ProcessError::Decode)?;
    *pos += 1;
    Ok(b)
}

fn get_string(buf: &[u8], pos: &mut usize) -> Result<String, ProcessError> {
    let len = get_varint(buf, pos)? as usize;
    let end = pos.checked_add(len).ok_or(ProcessError::Decode)?;
    if buf.len() < end {
        return Err(ProcessError::Decode);
    }
    let s = String::from_utf8(buf[*pos..end].to_vec()).map_err(|_| ProcessError::Decode)?;
    *pos = end;
    Ok(s)
}

/// `anchor + (u - anchor) / 2^(n + 2i)`, exactly, staying in `[0, 1]`.
pub fn perturbed_point(anchor: &Dyadic, u: &Dyadic, n: u64, i: u64) -> Dyadic {
    let shift = n + 2 * i;
    let offset = u.abs_diff(anchor).shift_right(shift);
    if u.compare(anchor) == std::cmp::Ordering::Less {
        anchor.sub(&offset).expect("offset below anchor")
    } else {
        anchor.add(&offset).expect("perturbation stays in range")
    }
}

fn draw_block_randomness(seed: u64, b: &BlockSchedule, u_guard: u64) -> (Dyadic, Dyadic) {
    let mut anchor_stream = SeededStream::new(seed, stream_label(TAG_ANCHOR, b.k));
    let anchor = anchor_stream.uniform_dyadic_order(b.p_k);
    let q = b.p_k + u_guard;
    let mut u_stream = SeededStream::new(seed, stream_label(TAG_UNIFORM, b.k));
    // An exact coincidence u = anchor would inject a dyadic into the collapse
    // run and break label consistency; redraw (probability 2^-q per draw).
    let u = loop {
        let u = u_stream.uniform_dyadic_bits(q);
        if u != anchor {
            break u;
        }
    };
    (anchor, u)
}

fn check_cap(x: &Dyadic, cap: u64, block: u64) -> Result<(), ProcessError> {
    if x.exponent() > cap {
        return Err(ProcessError::PrecisionCap {
            block,
            required: x.exponent(),
            cap,
        });
    }
    Ok(())
}

fn push_sample(
    samples: &mut Vec<LabeledSample>,
    target: &TargetFunction,
    t: u64,
    x: Dyadic,
    provenance: Provenance,
) -> Result<(), ProcessError> {
    let y = eval_target(target, &x, provenance)?;
    samples.push(LabeledSample {
        t,
        x,
        y,
        provenance,
    });
    Ok(())
}

/// Anchor-collapse process: block `k` emits its anchor at `n_k` and then
/// points collapsing onto it by factors of 4, labeled by the all-dyadics
/// indicator (anchors 1, collapse points 0).
pub fn gen_1nn_adversarial(seed: u64, params: &ScheduleParams) -> Result<Trajectory, ProcessError> {
    debug_assert_eq!(params.process, AdversarialKind::OneNn);
    let blocks = params.blocks()?;
    let target = TargetFunction::IndicatorDyadics;
    let mut samples = Vec::with_capacity(params.horizon as usize);
    let warnings = fill_before_first_block(&blocks, params, seed, &target, &mut samples)?;
    for b in &blocks {
        let (anchor, u) = draw_block_randomness(seed, b, params.u_guard);
        check_cap(&anchor, params.precision_cap, b.k)?;
        if b.n_k <= params.horizon {
            push_sample(
                &mut samples,
                &target,
                b.n_k,
                anchor.clone(),
                Provenance::AnchorDyadic,
            )?;
        }
        for i in 1..(b.n_next - b.n_k) {
            let t = b.n_k + i;
            if t > params.horizon {
                break;
            }
            let x = perturbed_point(&anchor, &u, b.n_k, i);
            check_cap(&x, params.precision_cap, b.k)?;
            push_sample(&mut samples, &target, t, x, Provenance::Perturbed)?;
        }
    }
    Ok(Trajectory {
        generator: "adversarial-1nn".to_string(),
        seed,
        horizon: params.horizon,
        samples,
        blocks,
        warnings,
    })
}

/// Planted-run process: block `k` emits the `d_k + 1` closest order-`p_k`
/// dyadics to the anchor (labels 1), then the collapse points (labels 0).
pub fn gen_knn_adversarial(seed: u64, params: &ScheduleParams) -> Result<Trajectory, ProcessError> {
    debug_assert_eq!(params.process, AdversarialKind::Knn);
    let blocks = params.blocks()?;
    let target = TargetFunction::IndicatorDyadics;
    let mut samples = Vec::with_capacity(params.horizon as usize);
    let mut warnings = fill_before_first_block(&blocks, params, seed, &target, &mut samples)?;
    for b in &blocks {
        let d_k = b.d_k.expect("planted-run block");
        if b.truncated {
            let msg = format!(
                "block {}: planted run truncated to {} to fit block length {}",
                b.k,
                d_k,
                b.n_next - b.n_k
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let (anchor, u) = draw_block_randomness(seed, b, params.u_guard);
        check_cap(&anchor, params.precision_cap, b.k)?;
        for i in 0..=d_k {
            let t = b.n_k + i;
            if t > params.horizon {
                break;
            }
            let x = nth_closest_dyadic(&anchor, b.p_k, i + 1)?;
            let provenance = if i == 0 {
                Provenance::AnchorDyadic
            } else {
                Provenance::PlantedNeighbor
            };
            push_sample(&mut samples, &target, t, x, provenance)?;
        }
        for j in 1..(b.n_next - b.n_k - d_k) {
            let t = b.n_k + d_k + j;
            if t > params.horizon {
                break;
            }
            let x = perturbed_point(&anchor, &u, b.n_k, j);
            check_cap(&x, params.precision_cap, b.k)?;
            push_sample(&mut samples, &target, t, x, Provenance::Perturbed)?;
        }
    }
    Ok(Trajectory {
        generator: "adversarial-knn".to_string(),
        seed,
        horizon: params.horizon,
        samples,
        blocks,
        warnings,
    })
}

/// The literal schedules may start their first block after time 1; earlier
/// times get independent uniform filler so trajectories always cover
/// `1..=horizon`.
fn fill_before_first_block(
    blocks: &[BlockSchedule],
    params: &ScheduleParams,
    seed: u64,
    target: &TargetFunction,
    samples: &mut Vec<LabeledSample>,
) -> Result<Vec<String>, ProcessError> {
    let mut warnings = Vec::new();
    let first = blocks.first().map(|b| b.n_k).unwrap_or(params.horizon + 1);
    if first > 1 {
        warnings.push(format!(
            "first block starts at {first}; times 1..{first} are uniform filler"
        ));
        let q = blocks.first().map(|b| b.p_k).unwrap_or(128) + params.u_guard;
        let mut s = SeededStream::new(seed, stream_label(TAG_IID, 0));
        for t in 1..first.min(params.horizon + 1) {
            let x = s.uniform_dyadic_bits(q);
            push_sample(samples, target, t, x, Provenance::Iid)?;
        }
    }
    Ok(warnings)
}

/// I.i.d. uniform draws at `q` bits of precision.
pub fn gen_iid_uniform(
    seed: u64,
    horizon: u64,
    q: u64,
    target: &TargetFunction,
) -> Result<Trajectory, ProcessError> {
    if horizon == 0 {
        return Err(ProcessError::EmptyHorizon);
    }
    if q == 0 {
        return Err(ProcessError::ZeroPrecision);
    }
    let mut s = SeededStream::new(seed, stream_label(TAG_IID, 0));
    let mut samples = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let x = s.uniform_dyadic_bits(q);
        push_sample(&mut samples, target, t, x, Provenance::Iid)?;
    }
    Ok(Trajectory {
        generator: "iid-uniform".to_string(),
        seed,
        horizon,
        samples,
        blocks: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Deterministic stream of pairwise-distinct points: 0, 1, then the
/// odd-numerator dyadics order by order. Visits a fresh point every step, so
/// it is the built-in negative exemplar for sublinear cell visits.
pub fn gen_enumerated_fresh(
    horizon: u64,
    target: &TargetFunction,
) -> Result<Trajectory, ProcessError> {
    if horizon == 0 {
        return Err(ProcessError::EmptyHorizon);
    }
    let mut samples = Vec::with_capacity(horizon as usize);
    let mut order = 0u64;
    let mut numerator = 0u64;
    for t in 1..=horizon {
        let x = match order {
            0 => {
                let x = if numerator == 0 {
                    Dyadic::zero()
                } else {
                    Dyadic::one()
                };
                numerator += 1;
                if numerator == 2 {
                    order = 1;
                    numerator = 1;
                }
                x
            }
            p => {
                let x = Dyadic::from_u64_ratio(numerator, p).expect("odd numerator below 2^p");
                numerator += 2;
                if numerator >= (1 << p) {
                    order += 1;
                    numerator = 1;
                }
                x
            }
        };
        push_sample(&mut samples, target, t, x, Provenance::Enumerated)?;
    }
    Ok(Trajectory {
        generator: "enumerated-fresh".to_string(),
        seed: 0,
        horizon,
        samples,
        blocks: Vec::new(),
        warnings: Vec::new(),
    })
}

/// I.i.d. picks from a finite support set.
pub fn gen_finite_support(
    seed: u64,
    support: &[Dyadic],
    horizon: u64,
    target: &TargetFunction,
) -> Result<Trajectory, ProcessError> {
    if support.is_empty() {
        return Err(ProcessError::EmptySupport);
    }
    if horizon == 0 {
        return Err(ProcessError::EmptyHorizon);
    }
    let mut s = SeededStream::new(seed, stream_label(TAG_SUPPORT, 0));
    let mut samples = Vec::with_capacity(horizon as usize);
    for t in 1..=horizon {
        let x = support[s.index_below(support.len() as u64) as usize].clone();
        push_sample(&mut samples, target, t, x, Provenance::Iid)?;
    }
    Ok(Trajectory {
        generator: "finite-support".to_string(),
        seed,
        horizon,
        samples,
        blocks: Vec::new(),
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{Learner, LearnerRule, OnlinePredictor};
    use std::cmp::Ordering;

    fn dy(m: u64, e: u64) -> Dyadic {
        Dyadic::from_u64_ratio(m, e).unwrap()
    }

    #[test]
    fn one_nn_block_starts() {
        let params = ScheduleParams::one_nn_desk(100);
        let blocks = params.blocks().unwrap();
        let starts: Vec<u64> = blocks.iter().take(5).map(|b| b.n_k).collect();
        assert_eq!(starts, vec![1, 3, 6, 9, 13]);
    }

    #[test]
    fn perturbed_point_formula() {
        // Anchor 3/16 of order 4, u = 1/2, block start 3, first collapse
        // point: 3/16 + (5/16) / 2^5 = 101/512.
        let x = perturbed_point(&dy(3, 4), &Dyadic::one_half(), 3, 1);
        assert_eq!(x, dy(101, 9));
        // Below the anchor.
        let x = perturbed_point(&dy(3, 2), &dy(1, 2), 1, 1);
        assert_eq!(x, dy(3, 2).sub(&dy(1, 1).shift_right(3)).unwrap());
    }

    #[test]
    fn desk_knn_schedule_example() {
        let params = ScheduleParams::knn_desk(20_000);
        let blocks = params.blocks().unwrap();
        let b10 = blocks.iter().find(|b| b.k == 10).unwrap();
        assert_eq!(b10.n_k, 100);
        assert_eq!(b10.n_next - b10.n_k, 21);
        assert_eq!(b10.d_k, Some(15));
        assert!(!b10.truncated);
    }

    #[test]
    fn knn_planted_points_are_nearest_dyadics() {
        let params = ScheduleParams::knn_desk(60);
        let traj = gen_knn_adversarial(9, &params).unwrap();
        let blocks = &traj.blocks;
        for b in blocks.iter().filter(|b| b.n_next <= traj.horizon) {
            let d_k = b.d_k.unwrap();
            let anchor = &traj.samples[(b.n_k - 1) as usize].x;
            assert_eq!(anchor.order().unwrap(), b.p_k);
            for i in 0..=d_k {
                let s = &traj.samples[(b.n_k + i - 1) as usize];
                assert_eq!(s.x, nth_closest_dyadic(anchor, b.p_k, i + 1).unwrap());
                assert_eq!(s.y, Label(1));
            }
            // First collapse point is within 2^-(n_k + 2) of the anchor.
            if b.n_next - b.n_k > d_k + 1 {
                let first = &traj.samples[(b.n_k + d_k) as usize];
                assert_eq!(first.y, Label(0));
                let bound = Dyadic::pow2_neg(b.n_k + 2);
                assert_eq!(first.x.abs_diff(anchor).compare(&bound), Ordering::Less);
            }
        }
    }

    #[test]
    fn one_nn_anchor_spacing_and_events() {
        let params = ScheduleParams::one_nn_desk(400);
        let traj = gen_1nn_adversarial(3, &params).unwrap();
        // Labels follow provenance throughout.
        for s in &traj.samples {
            let want = eval_target(&TargetFunction::IndicatorDyadics, &s.x, s.provenance).unwrap();
            assert_eq!(s.y, want);
        }
        // Collapse points stay strictly within 2^-n_k of their anchor.
        for b in &traj.blocks {
            let anchor = &traj.samples[(b.n_k - 1) as usize].x;
            let bound = Dyadic::pow2_neg(b.n_k);
            for t in (b.n_k + 1)..b.n_next.min(traj.horizon + 1) {
                let x = &traj.samples[(t - 1) as usize].x;
                assert_eq!(x.abs_diff(anchor).compare(&bound), Ordering::Less);
            }
        }
        // Where the anchor-isolation event holds, plain nearest neighbor
        // answers 1 on every collapse point of the block.
        let mut learner = Learner::new(LearnerRule::NearestNeighbor, Label(0)).unwrap();
        let mut preds = Vec::new();
        for s in &traj.samples {
            preds.push(learner.predict(&s.x).unwrap());
            learner.reveal(s.y).unwrap();
        }
        let mut blocks_checked = 0;
        for b in &traj.blocks {
            let anchor = &traj.samples[(b.n_k - 1) as usize].x;
            let bound = Dyadic::pow2_neg(b.n_k);
            let isolated = traj.samples[..(b.n_k - 1) as usize]
                .iter()
                .all(|s| s.x.abs_diff(anchor).compare(&bound) != Ordering::Less);
            if isolated {
                for t in (b.n_k + 1)..b.n_next.min(traj.horizon + 1) {
                    assert_eq!(preds[(t - 1) as usize], Label(1), "block {} t={}", b.k, t);
                }
                blocks_checked += 1;
            }
        }
        assert!(blocks_checked > 10, "isolation event should be common");
    }

    #[test]
    fn reproducibility_is_byte_exact() {
        let params = ScheduleParams::one_nn_desk(300);
        let a = gen_1nn_adversarial(42, &params).unwrap();
        let b = gen_1nn_adversarial(42, &params).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write_bin(&mut buf_a).unwrap();
        b.write_bin(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        let c = gen_1nn_adversarial(43, &params).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn binary_cache_round_trips() {
        let params = ScheduleParams::knn_desk(80);
        let traj = gen_knn_adversarial(7, &params).unwrap();
        let mut buf = Vec::new();
        traj.write_bin(&mut buf).unwrap();
        let back = Trajectory::read_bin(buf.as_slice()).unwrap();
        assert_eq!(back, traj);
        assert!(Trajectory::read_bin(&buf[..buf.len() - 1]).is_err());
        assert!(Trajectory::read_bin(b"bogus".as_slice()).is_err());
    }

    #[test]
    fn csv_has_expected_shape() {
        let traj = gen_enumerated_fresh(4, &TargetFunction::Constant { label: Label(0) }).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,y,provenance");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("1,0/2^0,0,enumerated"));
    }

    #[test]
    fn enumerated_fresh_is_pairwise_distinct() {
        let traj = gen_enumerated_fresh(64, &TargetFunction::Constant { label: Label(0) }).unwrap();
        let mut seen = std::collections::HashSet::new();
        for s in &traj.samples {
            assert!(seen.insert(s.x.clone()), "repeat at t={}", s.t);
        }
        assert_eq!(traj.samples[0].x, Dyadic::zero());
        assert_eq!(traj.samples[1].x, Dyadic::one());
        assert_eq!(traj.samples[2].x, Dyadic::one_half());
    }

    #[test]
    fn finite_support_stays_on_support() {
        let support = vec![dy(1, 2), dy(3, 2)];
        let target = TargetFunction::interval_below(Dyadic::one_half(), false);
        let traj = gen_finite_support(5, &support, 50, &target).unwrap();
        for s in &traj.samples {
            assert!(support.contains(&s.x));
        }
        assert!(gen_finite_support(5, &[], 50, &target).is_err());
    }

    #[test]
    fn iid_uniform_respects_precision() {
        let target = TargetFunction::interval_below(Dyadic::one_half(), false);
        let traj = gen_iid_uniform(11, 40, 16, &target).unwrap();
        for s in &traj.samples {
            assert!(s.x.exponent() <= 16);
        }
    }

    #[test]
    fn paper_exact_trips_precision_cap() {
        // The literal planted-run schedule wants 4^k order bits; past the cap
        // the offending block is reported.
        let params = ScheduleParams::knn_paper_exact(10_000, 0.05, 1.0);
        match params.blocks() {
            Err(ProcessError::PrecisionCap { block, .. }) => assert!(block > 1),
            other => panic!("expected precision cap error, got {other:?}"),
        }
        // Short horizons stay under it.
        let short = ScheduleParams::knn_paper_exact(15, 0.05, 1.0);
        assert!(short.blocks().is_ok());
    }

    #[test]
    fn paper_exact_one_nn_validates() {
        let params = ScheduleParams::one_nn_paper_exact(2_000);
        let blocks = params.blocks().unwrap();
        assert!(blocks.len() > 100);
        for b in &blocks {
            assert!(b.p_k > b.n_k);
        }
    }

    #[test]
    fn epsilon_delta_constraint_enforced() {
        // (1+2e)/(1-2e) = 1.5 is not < 1.5: the boundary pair is rejected.
        let params = ScheduleParams::knn_paper_exact(16, 0.1, 1.0);
        assert!(matches!(
            params.blocks(),
            Err(ProcessError::EpsilonDelta { .. })
        ));
    }

    #[test]
    fn knn_pairing_validation() {
        let params = ScheduleParams::knn_desk(2_000);
        params
            .validate_knn_pairing(&KnnSchedule::FloorLog2)
            .unwrap();
        let too_big = KnnSchedule::Constant { k: 1000 };
        assert!(matches!(
            params.validate_knn_pairing(&too_big),
            Err(ProcessError::ScheduleExceedsPlanted { .. })
        ));
    }

    /// Brute-force the `k` nearest earlier samples (distance, then time) —
    /// independent of any learner code.
    fn nearest_by_scan(traj: &Trajectory, t: u64, k: usize) -> Vec<usize> {
        let x = &traj.samples[(t - 1) as usize].x;
        let mut idx: Vec<usize> = (0..(t - 1) as usize).collect();
        idx.sort_by(|&a, &b| {
            let da = traj.samples[a].x.abs_diff(x);
            let db = traj.samples[b].x.abs_diff(x);
            da.compare(&db).then(a.cmp(&b))
        });
        idx.truncate(k);
        idx
    }

    fn block_is_isolated(traj: &Trajectory, b: &BlockSchedule) -> bool {
        let anchor = &traj.samples[(b.n_k - 1) as usize].x;
        let bound = Dyadic::pow2_neg(b.n_k);
        traj.samples[..(b.n_k - 1) as usize]
            .iter()
            .all(|s| s.x.abs_diff(anchor).compare(&bound) != Ordering::Less)
    }

    /// Per-block oracle for the planted-run process: in every isolated
    /// block, the `k_n` nearest prior points of each collapse time are all
    /// planted (label 1), so a majority vote errs on every one of them.
    #[test]
    fn knn_isolated_blocks_vote_wrong_on_every_collapse_point() {
        let params = ScheduleParams::knn_desk(700);
        let schedule = KnnSchedule::FloorLog2;
        for seed in [2u64, 13, 77] {
            let traj = gen_knn_adversarial(seed, &params).unwrap();
            let mut learner = Learner::new(
                LearnerRule::KNearest {
                    schedule: schedule.clone(),
                },
                Label(0),
            )
            .unwrap();
            let mut preds = Vec::new();
            for s in &traj.samples {
                preds.push(learner.predict(&s.x).unwrap());
                learner.reveal(s.y).unwrap();
            }
            let mut collapse_times = 0u64;
            for b in traj.blocks.iter().filter(|b| b.n_next <= traj.horizon) {
                if !block_is_isolated(&traj, b) {
                    continue;
                }
                let d_k = b.d_k.unwrap();
                for t in (b.n_k + d_k + 1)..b.n_next {
                    let k_n = schedule.k_at(t) as usize;
                    let neighbors = nearest_by_scan(&traj, t, k_n);
                    for &n in &neighbors {
                        let s = &traj.samples[n];
                        assert!(
                            s.t >= b.n_k && s.t <= b.n_k + d_k,
                            "seed {seed} t={t}: neighbor at {} is not planted",
                            s.t
                        );
                        assert_eq!(s.y, Label(1));
                    }
                    assert_eq!(preds[(t - 1) as usize], Label(1), "seed {seed} t={t}");
                    assert_eq!(traj.samples[(t - 1) as usize].y, Label(0));
                    collapse_times += 1;
                }
            }
            assert!(collapse_times > 50, "seed {seed}: only {collapse_times}");
        }
    }

    /// Per-block oracle for the capped rule on the anchor-collapse process:
    /// an isolated block costs at most 3 errors (the anchor and the first
    /// two collapse points), which is what keeps its average loss falling.
    #[test]
    fn capped_rule_errs_at_most_three_times_per_isolated_block() {
        let params = ScheduleParams::one_nn_desk(1_000);
        for seed in [4u64, 21] {
            let traj = gen_1nn_adversarial(seed, &params).unwrap();
            let mut learner = Learner::new(LearnerRule::kc1nn(2), Label(0)).unwrap();
            let mut errs_at = vec![false; traj.samples.len()];
            for (i, s) in traj.samples.iter().enumerate() {
                let p = learner.predict(&s.x).unwrap();
                errs_at[i] = p != s.y;
                learner.reveal(s.y).unwrap();
            }
            let mut isolated_blocks = 0;
            for b in traj.blocks.iter().filter(|b| b.n_next <= traj.horizon) {
                if !block_is_isolated(&traj, b) {
                    continue;
                }
                let errors: usize = (b.n_k..b.n_next)
                    .filter(|&t| errs_at[(t - 1) as usize])
                    .count();
                assert!(errors <= 3, "seed {seed} block {}: {errors} errors", b.k);
                isolated_blocks += 1;
            }
            assert!(isolated_blocks > 20, "seed {seed}: {isolated_blocks}");
        }
    }
}
