//! Online learning rules sharing one two-phase step interface.
//!
//! The rules: memorization, plain nearest neighbor, `(k_n)`-nearest-neighbor
//! with majority vote, and capped 1-nearest-neighbor (a dataset point is
//! deleted once it has served as nearest neighbor `k` times). The state
//! machine per step: a repeated input is answered from memory and changes
//! nothing; otherwise the nearest dataset point (ties to the minimum time
//! index) supplies the prediction, its child counter is incremented, the new
//! point joins the dataset, and the representant is deleted when its counter
//! reaches the cap.
//!
//! [`Learner`] keeps the dataset in an ordered map keyed by the exact point,
//! so nearest lookups are predecessor/successor probes. [`ReferenceLearner`]
//! recomputes every decision by linear scan over plain vectors and exists to
//! audit the incremental path.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::ops::Bound;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::spaces::Label;

/// How many neighbors a `(k_n)`-NN learner consults at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum KnnSchedule {
    Constant {
        k: u32,
    },
    FloorLog2,
    FloorSqrt,
    /// Piecewise-constant: `(from_time, k)` entries, sorted by time; the last
    /// entry at or before `t` applies.
    Table {
        entries: Vec<(u64, u32)>,
    },
}

impl KnnSchedule {
    /// `k_n` at time `t`, clamped to at least 1.
    pub fn k_at(&self, t: u64) -> u32 {
        let raw = match self {
            KnnSchedule::Constant { k } => *k,
            KnnSchedule::FloorLog2 => {
                if t == 0 {
                    0
                } else {
                    t.ilog2()
                }
            }
            KnnSchedule::FloorSqrt => (t as f64).sqrt().floor() as u32,
            KnnSchedule::Table { entries } => entries
                .iter()
                .take_while(|(from, _)| *from <= t)
                .last()
                .map(|(_, k)| *k)
                .unwrap_or(1),
        };
        raw.max(1)
    }

    pub fn name(&self) -> String {
        match self {
            KnnSchedule::Constant { k } => k.to_string(),
            KnnSchedule::FloorLog2 => "floor_log2".to_string(),
            KnnSchedule::FloorSqrt => "floor_sqrt".to_string(),
            KnnSchedule::Table { .. } => "table".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum LearnerRule {
    /// Answer repeats from memory, default otherwise.
    Memorize,
    /// Nearest neighbor with an unbounded dataset.
    NearestNeighbor,
    /// Nearest neighbor over the capped dataset: a point is deleted after
    /// serving as representant `cap` times.
    CappedNearestNeighbor { cap: u32 },
    /// Majority vote over the `k_n` nearest points; never deletes.
    KNearest { schedule: KnnSchedule },
}

impl LearnerRule {
    pub fn kc1nn(cap: u32) -> LearnerRule {
        LearnerRule::CappedNearestNeighbor { cap }
    }

    pub fn name(&self) -> String {
        match self {
            LearnerRule::Memorize => "memo".to_string(),
            LearnerRule::NearestNeighbor => "1nn".to_string(),
            LearnerRule::CappedNearestNeighbor { cap } => format!("{cap}c1nn"),
            LearnerRule::KNearest { schedule } => format!("knn:{}", schedule.name()),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LearnerError {
    #[error("cap must be at least 1")]
    CapZero,
    #[error("predict called while a reveal is outstanding")]
    PredictTwice,
    #[error("reveal called without a pending prediction")]
    RevealWithoutPredict,
    #[error("dataset unexpectedly empty at time {t}")]
    EmptyDataset { t: u64 },
}

/// Argmin tie handling. The shipped rule is minimum time index; the maximum
/// variant exists only as a corruption hook for the self-test's negative
/// control.
#[doc(hidden)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TieBreak {
    MinTime,
    MaxTime,
}

/// Anything the harness can drive one step at a time. The label reaches the
/// learner only through `reveal`, after the prediction has been returned.
pub trait OnlinePredictor {
    fn predict(&mut self, x: &Dyadic) -> Result<Label, LearnerError>;
    fn reveal(&mut self, y: Label) -> Result<(), LearnerError>;

    /// Current dataset size, when the predictor tracks one.
    fn dataset_size_hint(&self) -> Option<u64> {
        None
    }
}

type NodeIdx = u32;

#[derive(Clone, Debug)]
struct Node {
    time: u64,
    point: Dyadic,
    label: Label,
    parent: Option<NodeIdx>,
    children: Vec<NodeIdx>,
    child_count: u32,
    deleted: bool,
    erred: bool,
}

#[derive(Clone, Debug)]
enum Decision {
    Duplicate,
    NewPoint { x: Dyadic, parent: Option<NodeIdx> },
}

#[derive(Clone, Debug)]
struct Pending {
    prediction: Label,
    decision: Decision,
}

/// Incremental learner state for one trajectory.
#[derive(Debug)]
pub struct Learner {
    rule: LearnerRule,
    default_label: Label,
    tie_break: TieBreak,
    t: u64,
    nodes: Vec<Node>,
    dataset: BTreeMap<Dyadic, NodeIdx>,
    seen: HashMap<Dyadic, NodeIdx>,
    deletions: Vec<(u64, u64)>,
    error_times: Vec<u64>,
    pending: Option<Pending>,
}

impl Learner {
    pub fn new(rule: LearnerRule, default_label: Label) -> Result<Learner, LearnerError> {
        if let LearnerRule::CappedNearestNeighbor { cap: 0 } = rule {
            return Err(LearnerError::CapZero);
        }
        Ok(Learner {
            rule,
            default_label,
            tie_break: TieBreak::MinTime,
            t: 1,
            nodes: Vec::new(),
            dataset: BTreeMap::new(),
            seen: HashMap::new(),
            deletions: Vec::new(),
            error_times: Vec::new(),
            pending: None,
        })
    }

    #[doc(hidden)]
    pub fn with_tie_break(
        rule: LearnerRule,
        default_label: Label,
        tie_break: TieBreak,
    ) -> Result<Learner, LearnerError> {
        let mut l = Learner::new(rule, default_label)?;
        l.tie_break = tie_break;
        Ok(l)
    }

    /// Time index of the next step (1-based).
    pub fn next_time(&self) -> u64 {
        self.t
    }

    pub fn rule(&self) -> &LearnerRule {
        &self.rule
    }

    pub fn dataset_size(&self) -> u64 {
        match self.rule {
            LearnerRule::Memorize => self.nodes.len() as u64,
            _ => self.dataset.len() as u64,
        }
    }

    pub fn deletion_count(&self) -> u64 {
        self.deletions.len() as u64
    }

    pub fn deletions(&self) -> &[(u64, u64)] {
        &self.deletions
    }

    pub fn error_times(&self) -> &[u64] {
        &self.error_times
    }

    fn tie_pick(&self, a: NodeIdx, b: NodeIdx) -> NodeIdx {
        let (ta, tb) = (self.nodes[a as usize].time, self.nodes[b as usize].time);
        match self.tie_break {
            TieBreak::MinTime => {
                if ta <= tb {
                    a
                } else {
                    b
                }
            }
            TieBreak::MaxTime => {
                if ta >= tb {
                    a
                } else {
                    b
                }
            }
        }
    }

    /// Nearest dataset point to `x` (absent from the dataset), ties by time.
    fn nearest(&self, x: &Dyadic) -> Option<NodeIdx> {
        let below = self
            .dataset
            .range((Bound::Unbounded, Bound::Included(x)))
            .next_back()
            .map(|(_, &i)| i);
        let above = self
            .dataset
            .range((Bound::Excluded(x), Bound::Unbounded))
            .next()
            .map(|(_, &i)| i);
        match (below, above) {
            (Some(b), Some(a)) => {
                let db = x.abs_diff(&self.nodes[b as usize].point);
                let da = x.abs_diff(&self.nodes[a as usize].point);
                Some(match db.compare(&da) {
                    Ordering::Less => b,
                    Ordering::Greater => a,
                    Ordering::Equal => self.tie_pick(b, a),
                })
            }
            (Some(b), None) => Some(b),
            (None, Some(a)) => Some(a),
            (None, None) => None,
        }
    }

    /// The `k` nearest dataset points, by (distance, time), via alternating
    /// predecessor/successor pulls.
    fn k_nearest(&self, x: &Dyadic, k: usize) -> Vec<NodeIdx> {
        let mut below = self
            .dataset
            .range((Bound::Unbounded, Bound::Included(x)))
            .rev()
            .map(|(_, &i)| i);
        let mut above = self
            .dataset
            .range((Bound::Excluded(x), Bound::Unbounded))
            .map(|(_, &i)| i);
        let mut b = below.next();
        let mut a = above.next();
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            match (b, a) {
                (Some(bi), Some(ai)) => {
                    let db = x.abs_diff(&self.nodes[bi as usize].point);
                    let da = x.abs_diff(&self.nodes[ai as usize].point);
                    let pick_below = match db.compare(&da) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => self.tie_pick(bi, ai) == bi,
                    };
                    if pick_below {
                        out.push(bi);
                        b = below.next();
                    } else {
                        out.push(ai);
                        a = above.next();
                    }
                }
                (Some(bi), None) => {
                    out.push(bi);
                    b = below.next();
                }
                (None, Some(ai)) => {
                    out.push(ai);
                    a = above.next();
                }
                (None, None) => break,
            }
        }
        out
    }

    fn vote(&self, neighbors: &[NodeIdx]) -> Label {
        majority_vote(neighbors.iter().map(|&i| self.nodes[i as usize].label))
    }
}

/// Plurality vote; ties go to the smallest label (label 0 in the binary
/// setting).
fn majority_vote(labels: impl Iterator<Item = Label>) -> Label {
    let mut counts: BTreeMap<Label, u32> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_insert(0) += 1;
    }
    counts
        .iter()
        .max_by(|(la, ca), (lb, cb)| ca.cmp(cb).then(lb.cmp(la)))
        .map(|(l, _)| *l)
        .unwrap_or_default()
}

impl OnlinePredictor for Learner {
    fn dataset_size_hint(&self) -> Option<u64> {
        Some(self.dataset_size())
    }

    fn predict(&mut self, x: &Dyadic) -> Result<Label, LearnerError> {
        if self.pending.is_some() {
            return Err(LearnerError::PredictTwice);
        }
        let pending = if let Some(&idx) = self.seen.get(x) {
            Pending {
                prediction: self.nodes[idx as usize].label,
                decision: Decision::Duplicate,
            }
        } else {
            match &self.rule {
                LearnerRule::Memorize => Pending {
                    prediction: self.default_label,
                    decision: Decision::NewPoint {
                        x: x.clone(),
                        parent: None,
                    },
                },
                LearnerRule::NearestNeighbor | LearnerRule::CappedNearestNeighbor { .. } => {
                    match self.nearest(x) {
                        Some(idx) => Pending {
                            prediction: self.nodes[idx as usize].label,
                            decision: Decision::NewPoint {
                                x: x.clone(),
                                parent: Some(idx),
                            },
                        },
                        None => {
                            if self.t > 1 {
                                return Err(LearnerError::EmptyDataset { t: self.t });
                            }
                            Pending {
                                prediction: self.default_label,
                                decision: Decision::NewPoint {
                                    x: x.clone(),
                                    parent: None,
                                },
                            }
                        }
                    }
                }
                LearnerRule::KNearest { schedule } => {
                    let k = schedule.k_at(self.t) as usize;
                    let neighbors = self.k_nearest(x, k);
                    if neighbors.is_empty() {
                        if self.t > 1 {
                            return Err(LearnerError::EmptyDataset { t: self.t });
                        }
                        Pending {
                            prediction: self.default_label,
                            decision: Decision::NewPoint {
                                x: x.clone(),
                                parent: None,
                            },
                        }
                    } else {
                        Pending {
                            prediction: self.vote(&neighbors),
                            decision: Decision::NewPoint {
                                x: x.clone(),
                                parent: Some(neighbors[0]),
                            },
                        }
                    }
                }
            }
        };
        let prediction = pending.prediction;
        self.pending = Some(pending);
        Ok(prediction)
    }

    fn reveal(&mut self, y: Label) -> Result<(), LearnerError> {
        let pending = self
            .pending
            .take()
            .ok_or(LearnerError::RevealWithoutPredict)?;
        let erred = pending.prediction != y;
        match pending.decision {
            Decision::Duplicate => {}
            Decision::NewPoint { x, parent } => {
                let idx = self.nodes.len() as NodeIdx;
                self.nodes.push(Node {
                    time: self.t,
                    point: x.clone(),
                    label: y,
                    parent,
                    children: Vec::new(),
                    child_count: 0,
                    deleted: false,
                    erred,
                });
                self.seen.insert(x.clone(), idx);
                if !matches!(self.rule, LearnerRule::Memorize) {
                    self.dataset.insert(x, idx);
                }
                if let Some(p) = parent {
                    self.nodes[p as usize].children.push(idx);
                    self.nodes[p as usize].child_count += 1;
                    if let LearnerRule::CappedNearestNeighbor { cap } = self.rule {
                        if self.nodes[p as usize].child_count == cap {
                            let parent_node = &mut self.nodes[p as usize];
                            parent_node.deleted = true;
                            let time = parent_node.time;
                            let point = parent_node.point.clone();
                            self.dataset.remove(&point);
                            self.deletions.push((time, self.t));
                        }
                    }
                }
            }
        }
        if erred {
            self.error_times.push(self.t);
        }
        self.t += 1;
        Ok(())
    }
}

/// Forest over non-duplicate times: edges point to the representant that
/// produced each prediction. Roots are time 1 and every error time.
#[derive(Clone, Debug, Serialize)]
pub struct PredictionTree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeNode {
    pub time: u64,
    pub parent: Option<u64>,
    pub children: Vec<u64>,
    pub child_count: u32,
    pub deleted: bool,
    pub erred: bool,
    pub in_dataset: bool,
}

impl Learner {
    pub fn snapshot_tree(&self) -> PredictionTree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| TreeNode {
                time: n.time,
                parent: n.parent.map(|p| self.nodes[p as usize].time),
                children: n
                    .children
                    .iter()
                    .map(|&c| self.nodes[c as usize].time)
                    .collect(),
                child_count: n.child_count,
                deleted: n.deleted,
                erred: n.erred,
                in_dataset: !n.deleted && !matches!(self.rule, LearnerRule::Memorize),
            })
            .collect();
        PredictionTree { nodes }
    }

    /// Structural fingerprint used by the oracle-equivalence checks.
    pub fn snapshot_state(&self) -> StateSnapshot {
        let mut dataset: Vec<u64> = self
            .dataset
            .values()
            .map(|&i| self.nodes[i as usize].time)
            .collect();
        dataset.sort_unstable();
        StateSnapshot {
            next_time: self.t,
            dataset,
            child_counts: self.nodes.iter().map(|n| (n.time, n.child_count)).collect(),
            deleted: self
                .nodes
                .iter()
                .filter(|n| n.deleted)
                .map(|n| n.time)
                .collect(),
            seen_count: self.seen.len() as u64,
        }
    }
}

impl PredictionTree {
    fn idx_of(&self, time: u64) -> Option<usize> {
        self.nodes.binary_search_by_key(&time, |n| n.time).ok()
    }

    pub fn node(&self, time: u64) -> Option<&TreeNode> {
        self.idx_of(time).map(|i| &self.nodes[i])
    }

    pub fn max_child_count(&self) -> u32 {
        self.nodes.iter().map(|n| n.child_count).max().unwrap_or(0)
    }

    /// Histogram of node depths measured from the parentless roots.
    pub fn depth_histogram(&self) -> Vec<u64> {
        let mut depths = vec![0u64; self.nodes.len()];
        let mut hist: Vec<u64> = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let d = match n.parent {
                // Parents precede children in time order, so their depth is
                // already computed.
                Some(p) => depths[self.idx_of(p).expect("parent present")] + 1,
                None => 0,
            };
            depths[i] = d;
            let d = d as usize;
            if hist.len() <= d {
                hist.resize(d + 1, 0);
            }
            hist[d] += 1;
        }
        hist
    }

    /// Times of nodes still in the dataset.
    pub fn dataset_times(&self) -> Vec<u64> {
        self.nodes
            .iter()
            .filter(|n| n.in_dataset)
            .map(|n| n.time)
            .collect()
    }

    /// Path from the error-forest root down to `time`: climbs parents until a
    /// node that erred (or a parentless node) is reached. The returned list
    /// starts at the root and ends at `time`.
    pub fn root_path(&self, time: u64) -> Vec<u64> {
        let mut path = vec![time];
        let mut cur = self.node(time).expect("time is a tree node");
        while !cur.erred {
            match cur.parent {
                Some(p) => {
                    path.push(p);
                    cur = self.node(p).expect("parent present");
                }
                None => break,
            }
        }
        path.reverse();
        path
    }
}

/// Naive re-implementation of every rule with linear scans over plain
/// vectors; the equivalence oracle for [`Learner`].
pub struct ReferenceLearner {
    rule: LearnerRule,
    default_label: Label,
    t: u64,
    history: Vec<(Dyadic, Label)>,
    entries: Vec<RefEntry>,
    deleted_times: Vec<u64>,
    pending: Option<(Label, Option<Dyadic>)>,
}

struct RefEntry {
    time: u64,
    point: Dyadic,
    label: Label,
    child_count: u32,
    in_dataset: bool,
}

impl ReferenceLearner {
    pub fn new(rule: LearnerRule, default_label: Label) -> Result<ReferenceLearner, LearnerError> {
        if let LearnerRule::CappedNearestNeighbor { cap: 0 } = rule {
            return Err(LearnerError::CapZero);
        }
        Ok(ReferenceLearner {
            rule,
            default_label,
            t: 1,
            history: Vec::new(),
            entries: Vec::new(),
            deleted_times: Vec::new(),
            pending: None,
        })
    }

    fn scan_duplicate(&self, x: &Dyadic) -> Option<Label> {
        self.history.iter().find(|(p, _)| p == x).map(|(_, y)| *y)
    }

    /// All dataset entries ordered by (distance to `x`, time).
    fn scan_by_distance(&self, x: &Dyadic) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.in_dataset)
            .map(|(i, _)| i)
            .collect();
        idx.sort_by(|&a, &b| {
            let da = x.abs_diff(&self.entries[a].point);
            let db = x.abs_diff(&self.entries[b].point);
            da.compare(&db)
                .then(self.entries[a].time.cmp(&self.entries[b].time))
        });
        idx
    }

    pub fn snapshot_state(&self) -> StateSnapshot {
        let mut dataset: Vec<u64> = self
            .entries
            .iter()
            .filter(|e| e.in_dataset && !matches!(self.rule, LearnerRule::Memorize))
            .map(|e| e.time)
            .collect();
        dataset.sort_unstable();
        let mut deleted = self.deleted_times.clone();
        deleted.sort_unstable();
        StateSnapshot {
            next_time: self.t,
            dataset,
            child_counts: self
                .entries
                .iter()
                .map(|e| (e.time, e.child_count))
                .collect(),
            deleted,
            seen_count: self.entries.len() as u64,
        }
    }
}

impl OnlinePredictor for ReferenceLearner {
    fn predict(&mut self, x: &Dyadic) -> Result<Label, LearnerError> {
        if self.pending.is_some() {
            return Err(LearnerError::PredictTwice);
        }
        if let Some(y) = self.scan_duplicate(x) {
            self.pending = Some((y, None));
            return Ok(y);
        }
        let prediction = match &self.rule {
            LearnerRule::Memorize => self.default_label,
            LearnerRule::NearestNeighbor | LearnerRule::CappedNearestNeighbor { .. } => {
                let order = self.scan_by_distance(x);
                match order.first() {
                    Some(&i) => self.entries[i].label,
                    None => self.default_label,
                }
            }
            LearnerRule::KNearest { schedule } => {
                let order = self.scan_by_distance(x);
                if order.is_empty() {
                    self.default_label
                } else {
                    let k = schedule.k_at(self.t) as usize;
                    majority_vote(order.iter().take(k).map(|&i| self.entries[i].label))
                }
            }
        };
        self.pending = Some((prediction, Some(x.clone())));
        Ok(prediction)
    }

    fn reveal(&mut self, y: Label) -> Result<(), LearnerError> {
        let (_prediction, new_point) = self
            .pending
            .take()
            .ok_or(LearnerError::RevealWithoutPredict)?;
        if let Some(x) = new_point {
            // Update counters exactly as the rule dictates, via fresh scans.
            match &self.rule {
                LearnerRule::Memorize => {}
                LearnerRule::NearestNeighbor => {
                    let order = self.scan_by_distance(&x);
                    if let Some(&i) = order.first() {
                        self.entries[i].child_count += 1;
                    }
                }
                LearnerRule::CappedNearestNeighbor { cap } => {
                    let order = self.scan_by_distance(&x);
                    if let Some(&i) = order.first() {
                        self.entries[i].child_count += 1;
                        if self.entries[i].child_count == *cap {
                            self.entries[i].in_dataset = false;
                            self.deleted_times.push(self.entries[i].time);
                        }
                    }
                }
                LearnerRule::KNearest { .. } => {
                    let order = self.scan_by_distance(&x);
                    if let Some(&i) = order.first() {
                        self.entries[i].child_count += 1;
                    }
                }
            }
            self.entries.push(RefEntry {
                time: self.t,
                point: x.clone(),
                label: y,
                child_count: 0,
                in_dataset: true,
            });
            self.history.push((x, y));
        }
        self.t += 1;
        Ok(())
    }
}

/// Comparable structural view of a learner's state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSnapshot {
    pub next_time: u64,
    pub dataset: Vec<u64>,
    pub child_counts: Vec<(u64, u32)>,
    pub deleted: Vec<u64>,
    pub seen_count: u64,
}
