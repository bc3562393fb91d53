//! Runs learner-vs-process experiments and turns them into reports: loss
//! curves with exact rational accumulation, Monte-Carlo aggregates over
//! independent seeds, relative-frequency curves for interval sets, and the
//! path-inequality diagnostic on recorded prediction trees.
//!
//! The harness drives any [`OnlinePredictor`] strictly in prediction-before-
//! reveal order; the label for time `t` only reaches the learner after the
//! prediction for time `t` has been recorded.

use std::collections::HashMap;
use std::io::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::learners::{Learner, LearnerError, LearnerRule, OnlinePredictor, PredictionTree};
use crate::processes::Trajectory;
use crate::rng::SeededStream;
use crate::spaces::{eval_target, Label, SpacesError, TargetFunction};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("trajectory covers {have} steps but checkpoints need {need}")]
    HorizonShortfall { have: u64, need: u64 },
    #[error("checkpoints must be sorted, positive, and non-empty")]
    BadCheckpoints,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("trial failed: {0}")]
    TrialFailed(String),
    #[error("interval has {lo} > {hi}")]
    MalformedInterval { lo: String, hi: String },
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Spaces(#[from] SpacesError),
}

fn check_checkpoints(checkpoints: &[u64], horizon: u64) -> Result<(), HarnessError> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(HarnessError::BadCheckpoints);
    }
    let need = *checkpoints.last().expect("non-empty");
    if horizon < need {
        return Err(HarnessError::HorizonShortfall {
            have: horizon,
            need,
        });
    }
    Ok(())
}

/// Log-spaced default: powers of two from 256 up to the horizon, plus the
/// horizon itself.
pub fn default_checkpoints(horizon: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = 256u64.min(horizon);
    while t < horizon {
        out.push(t);
        t = t.saturating_mul(2);
    }
    out.push(horizon);
    out.dedup();
    out
}

/// Per-trajectory run record.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub learner: String,
    pub seed: u64,
    pub checkpoints: Vec<u64>,
    /// Cumulative prediction errors at each checkpoint.
    pub cum_errors: Vec<u64>,
    /// `cum_errors[i] / checkpoints[i]`, rounded only here.
    pub avg_loss: Vec<f64>,
    pub error_times: Vec<u64>,
    /// Dataset size at each checkpoint.
    pub dataset_size: Vec<u64>,
    pub deletion_count: u64,
    pub tree: TreeSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeSummary {
    pub nodes: u64,
    pub deleted: u64,
    pub max_child_count: u32,
    pub depth_histogram: Vec<u64>,
}

/// Feeds the trajectory to a fresh learner, labelling each point with the
/// target at prediction time. Returns the report and the recorded tree.
pub fn run_trajectory(
    traj: &Trajectory,
    target: &TargetFunction,
    rule: &LearnerRule,
    default_label: Label,
    checkpoints: &[u64],
) -> Result<(RunReport, PredictionTree), HarnessError> {
    check_checkpoints(checkpoints, traj.len())?;
    let mut learner = Learner::new(rule.clone(), default_label)?;
    let curve = drive(traj, target, &mut learner, checkpoints)?;
    let tree = learner.snapshot_tree();
    let summary = TreeSummary {
        nodes: tree.nodes.len() as u64,
        deleted: tree.nodes.iter().filter(|n| n.deleted).count() as u64,
        max_child_count: tree.max_child_count(),
        depth_histogram: tree.depth_histogram(),
    };
    let report = RunReport {
        learner: rule.name(),
        seed: traj.seed,
        checkpoints: checkpoints.to_vec(),
        cum_errors: curve.cum_errors,
        avg_loss: curve.avg_loss,
        error_times: learner.error_times().to_vec(),
        dataset_size: curve.dataset_size,
        deletion_count: learner.deletion_count(),
        tree: summary,
    };
    Ok((report, tree))
}

struct Curve {
    cum_errors: Vec<u64>,
    avg_loss: Vec<f64>,
    dataset_size: Vec<u64>,
}

/// Core loop over any predictor: predict, record, then reveal.
fn drive(
    traj: &Trajectory,
    target: &TargetFunction,
    learner: &mut dyn OnlinePredictor,
    checkpoints: &[u64],
) -> Result<Curve, HarnessError> {
    let mut errors = 0u64;
    let mut cum_errors = Vec::with_capacity(checkpoints.len());
    let mut avg_loss = Vec::with_capacity(checkpoints.len());
    let mut dataset_size = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    for s in &traj.samples {
        if next >= checkpoints.len() {
            break;
        }
        let prediction = learner.predict(&s.x)?;
        let truth = eval_target(target, &s.x, s.provenance)?;
        errors += crate::spaces::zero_one_loss(prediction, truth);
        learner.reveal(truth)?;
        if checkpoints[next] == s.t {
            cum_errors.push(errors);
            avg_loss.push(errors as f64 / s.t as f64);
            dataset_size.push(learner.dataset_size_hint().unwrap_or(0));
            next += 1;
        }
    }
    Ok(Curve {
        cum_errors,
        avg_loss,
        dataset_size,
    })
}

/// Aggregate over independent trials of one configuration.
#[derive(Clone, Debug, Serialize)]
pub struct AggregateReport {
    pub learner: String,
    pub trials: u64,
    pub trial_seeds: Vec<u64>,
    pub checkpoints: Vec<u64>,
    /// Mean average loss per checkpoint; numerator kept exact until here.
    pub mean_loss: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Final-checkpoint loss per trial, in trial order.
    pub per_trial_final: Vec<f64>,
}

/// Deterministically aggregates per-trial run reports (sequential reduce in
/// trial order; exact error counts, division only at output).
pub fn aggregate(reports: &[RunReport]) -> Result<AggregateReport, HarnessError> {
    if reports.is_empty() {
        return Err(HarnessError::NoTrials);
    }
    let checkpoints = reports[0].checkpoints.clone();
    let n = reports.len();
    let mut mean_loss = Vec::with_capacity(checkpoints.len());
    let mut q10 = Vec::with_capacity(checkpoints.len());
    let mut q90 = Vec::with_capacity(checkpoints.len());
    let mut min = Vec::with_capacity(checkpoints.len());
    let mut max = Vec::with_capacity(checkpoints.len());
    for (i, &t) in checkpoints.iter().enumerate() {
        let total: u64 = reports.iter().map(|r| r.cum_errors[i]).sum();
        mean_loss.push(total as f64 / (n as u64 * t) as f64);
        let mut losses: Vec<f64> = reports.iter().map(|r| r.avg_loss[i]).collect();
        losses.sort_by(|a, b| a.partial_cmp(b).expect("losses are finite"));
        q10.push(nearest_rank(&losses, 0.10));
        q90.push(nearest_rank(&losses, 0.90));
        min.push(losses[0]);
        max.push(losses[n - 1]);
    }
    Ok(AggregateReport {
        learner: reports[0].learner.clone(),
        trials: n as u64,
        trial_seeds: reports.iter().map(|r| r.seed).collect(),
        checkpoints,
        mean_loss,
        q10,
        q90,
        min,
        max,
        per_trial_final: reports
            .iter()
            .map(|r| *r.avg_loss.last().expect("non-empty"))
            .collect(),
    })
}

/// Nearest-rank quantile on sorted data.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Independent seeded trials of one generator against several learners.
/// Trial `i` uses seed `base_seed + i`; every learner replays the same
/// trajectory of a trial. Trials fan out over at most `workers` threads and
/// aggregation is a deterministic reduce in trial order.
#[allow(clippy::type_complexity, clippy::too_many_arguments)]
pub fn run_monte_carlo<G, E>(
    generate: G,
    target: &TargetFunction,
    rules: &[LearnerRule],
    default_label: Label,
    trials: u64,
    base_seed: u64,
    checkpoints: &[u64],
    workers: usize,
) -> Result<Vec<(AggregateReport, Vec<RunReport>)>, HarnessError>
where
    G: Fn(u64) -> Result<Trajectory, E> + Sync,
    E: std::fmt::Display + Send,
{
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let per_trial: Vec<Result<Vec<RunReport>, String>> = pool.install(|| {
        use rayon::prelude::*;
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let seed = base_seed.wrapping_add(i);
                let traj = generate(seed).map_err(|e| e.to_string())?;
                rules
                    .iter()
                    .map(|rule| {
                        run_trajectory(&traj, target, rule, default_label, checkpoints)
                            .map(|(report, _)| report)
                            .map_err(|e| e.to_string())
                    })
                    .collect()
            })
            .collect()
    });
    let mut by_rule: Vec<Vec<RunReport>> = vec![Vec::with_capacity(trials as usize); rules.len()];
    for trial in per_trial {
        let reports = trial.map_err(HarnessError::TrialFailed)?;
        for (slot, report) in by_rule.iter_mut().zip(reports) {
            slot.push(report);
        }
    }
    by_rule
        .into_iter()
        .map(|reports| aggregate(&reports).map(|agg| (agg, reports)))
        .collect()
}

/// A closed/open interval with exact dyadic endpoints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DyadicInterval {
    pub lo: Dyadic,
    pub hi: Dyadic,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl DyadicInterval {
    pub fn new(
        lo: Dyadic,
        hi: Dyadic,
        lo_closed: bool,
        hi_closed: bool,
    ) -> Result<DyadicInterval, HarnessError> {
        if lo > hi {
            return Err(HarnessError::MalformedInterval {
                lo: lo.to_string(),
                hi: hi.to_string(),
            });
        }
        Ok(DyadicInterval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        let lo_ok = match x.cmp(&self.lo) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Equal => self.lo_closed,
            std::cmp::Ordering::Less => false,
        };
        let hi_ok = match x.cmp(&self.hi) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => self.hi_closed,
            std::cmp::Ordering::Greater => false,
        };
        lo_ok && hi_ok
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CrfPoint {
    pub t: u64,
    pub count: u64,
    pub frequency: f64,
}

/// Empirical relative frequency of a finite union of intervals along the
/// trajectory, counted with exact comparisons.
pub fn crf_frequency(
    traj: &Trajectory,
    set: &[DyadicInterval],
    checkpoints: &[u64],
) -> Result<Vec<CrfPoint>, HarnessError> {
    check_checkpoints(checkpoints, traj.len())?;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut count = 0u64;
    let mut next = 0usize;
    for s in &traj.samples {
        if next >= checkpoints.len() {
            break;
        }
        if set.iter().any(|iv| iv.contains(&s.x)) {
            count += 1;
        }
        if checkpoints[next] == s.t {
            out.push(CrfPoint {
                t: s.t,
                count,
                frequency: count as f64 / s.t as f64,
            });
            next += 1;
        }
    }
    Ok(out)
}

/// CSV export for frequency curves: `T,count,frequency`.
pub fn write_crf_csv<W: Write>(points: &[CrfPoint], mut w: W) -> io::Result<()> {
    writeln!(w, "T,count,frequency")?;
    for p in points {
        writeln!(w, "{},{},{}", p.t, p.count, p.frequency)?;
    }
    Ok(())
}

/// One failed path pair from [`path_inequality_check`].
#[derive(Clone, Debug, Serialize)]
pub struct PathViolation {
    pub p_path: Vec<u64>,
    pub q_path: Vec<u64>,
    pub v0: u64,
    pub which: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathCheckReport {
    pub pairs_checked: u64,
    pub pairs_skipped: u64,
    pub violations: Vec<PathViolation>,
}

/// Checks the doubling inequality along recorded prediction paths: for two
/// distinct root paths `p` (length `d+1`) and `q` (length `f+1`) with
/// `p_0 < q_0` and both endpoints still in the dataset, the points satisfy
///
/// ```text
/// |x[p_v0] - x[q_0]|  <=  2^(d+f+1) |x[p_d] - x[q_f]|
/// |x[p_v0] - x[p_d]|  <=  2^(d+f+1) |x[p_d] - x[q_f]|
/// ```
///
/// where `v0` indexes the last `p`-node before `q_0`. Pairs failing the
/// preconditions (shared root, same node twice) are skipped, not reported.
/// Only trees recorded from cap-2 runs qualify; the guarantee leans on a
/// node surviving until its second child arrives.
pub fn path_inequality_check(
    tree: &PredictionTree,
    point_of: &HashMap<u64, Dyadic>,
    max_pairs: u64,
    seed: u64,
) -> PathCheckReport {
    let dataset = tree.dataset_times();
    let mut report = PathCheckReport {
        pairs_checked: 0,
        pairs_skipped: 0,
        violations: Vec::new(),
    };
    let m = dataset.len() as u64;
    if m < 2 {
        return report;
    }
    let total = m * (m - 1) / 2;
    let mut stream = SeededStream::new(seed, 0x50_41_54); // path sampling
    let check = |a: u64, b: u64, report: &mut PathCheckReport| {
        let (pa, pb) = (tree.root_path(a), tree.root_path(b));
        // Distinct error-forest roots; otherwise p_0 < q_0 cannot hold.
        if pa[0] == pb[0] {
            report.pairs_skipped += 1;
            return;
        }
        let (p, q) = if pa[0] < pb[0] {
            (&pa, &pb)
        } else {
            (&pb, &pa)
        };
        let q0 = q[0];
        // Path times increase from root to leaf, so the last p-node before
        // q_0 is found by reverse scan.
        let v0 = p.iter().rposition(|&t| t < q0).expect("p_0 < q_0");
        let d = p.len() - 1;
        let f = q.len() - 1;
        let x = |t: u64| point_of.get(&t).expect("point recorded for tree node");
        let rhs = x(p[d]).abs_diff(x(q[f]));
        let shift = (d + f + 1) as u64;
        // lhs <= 2^shift * rhs, tested as lhs / 2^shift <= rhs (exact).
        let first = x(p[v0]).abs_diff(x(q0));
        let second = x(p[v0]).abs_diff(x(p[d]));
        report.pairs_checked += 1;
        if first.shift_right(shift) > rhs {
            report.violations.push(PathViolation {
                p_path: p.to_vec(),
                q_path: q.to_vec(),
                v0: p[v0],
                which: "across-paths",
            });
        }
        if second.shift_right(shift) > rhs {
            report.violations.push(PathViolation {
                p_path: p.to_vec(),
                q_path: q.to_vec(),
                v0: p[v0],
                which: "within-path",
            });
        }
    };
    if total <= max_pairs {
        for i in 0..dataset.len() {
            for j in (i + 1)..dataset.len() {
                check(dataset[i], dataset[j], &mut report);
            }
        }
    } else {
        for _ in 0..max_pairs {
            let i = stream.index_below(m) as usize;
            let j = stream.index_below(m) as usize;
            if i == j {
                report.pairs_skipped += 1;
                continue;
            }
            check(dataset[i], dataset[j], &mut report);
        }
    }
    report
}

/// Builds the time-to-point map a tree check needs from a trajectory.
pub fn tree_points(traj: &Trajectory, tree: &PredictionTree) -> HashMap<u64, Dyadic> {
    let mut map = HashMap::with_capacity(tree.nodes.len());
    for n in &tree.nodes {
        let s = &traj.samples[(n.time - 1) as usize];
        debug_assert_eq!(s.t, n.time);
        map.insert(n.time, s.x.clone());
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{gen_1nn_adversarial, gen_finite_support, ScheduleParams};
    use crate::spaces::Provenance;

    fn dy(m: u64, e: u64) -> Dyadic {
        Dyadic::from_u64_ratio(m, e).unwrap()
    }

    #[test]
    fn default_checkpoints_shape() {
        assert_eq!(
            default_checkpoints(20_000),
            vec![256, 512, 1024, 2048, 4096, 8192, 16384, 20_000]
        );
        assert_eq!(default_checkpoints(256), vec![256]);
        assert_eq!(default_checkpoints(100), vec![100]);
    }

    #[test]
    fn memorization_on_finite_support() {
        let target = TargetFunction::interval_below(Dyadic::one_half(), true);
        let traj = gen_finite_support(1, &[dy(1, 2), dy(3, 2)], 200, &target).unwrap();
        let (report, _) = run_trajectory(
            &traj,
            &target,
            &LearnerRule::Memorize,
            Label(0),
            &[100, 200],
        )
        .unwrap();
        // Memorization errs at most once per distinct point.
        assert!(report.cum_errors[1] <= 2);
        assert!(report.avg_loss[1] <= 2.0 / 200.0);
    }

    fn sample(t: u64, x: Dyadic) -> crate::processes::LabeledSample {
        let target = TargetFunction::interval_below(Dyadic::one_half(), false);
        let y = eval_target(&target, &x, Provenance::Iid).unwrap();
        crate::processes::LabeledSample {
            t,
            x,
            y,
            provenance: Provenance::Iid,
        }
    }

    #[test]
    fn capped_trace_cumulative_errors() {
        let target = TargetFunction::interval_below(Dyadic::one_half(), false);
        let traj = Trajectory {
            generator: "test".into(),
            seed: 0,
            horizon: 3,
            samples: vec![
                sample(1, dy(1, 2)),
                sample(2, dy(3, 2)),
                sample(3, dy(5, 4)),
            ],
            blocks: vec![],
            warnings: vec![],
        };
        let (report, _) =
            run_trajectory(&traj, &target, &LearnerRule::kc1nn(2), Label(0), &[1, 2, 3]).unwrap();
        assert_eq!(report.cum_errors, vec![1, 2, 2]);
        assert_eq!(report.deletion_count, 1);
    }

    #[test]
    fn constant_target_zero_loss() {
        let target = TargetFunction::Constant { label: Label(0) };
        let traj = gen_finite_support(2, &[dy(1, 2), dy(3, 2)], 64, &target).unwrap();
        let (report, _) =
            run_trajectory(&traj, &target, &LearnerRule::kc1nn(2), Label(0), &[64]).unwrap();
        assert_eq!(report.cum_errors, vec![0]);
    }

    #[test]
    fn loss_curve_matches_error_times() {
        let target = TargetFunction::interval_below(dy(3, 2), false);
        let traj = gen_finite_support(9, &[dy(1, 3), dy(5, 3), dy(7, 3)], 128, &target).unwrap();
        let checkpoints = [16, 64, 128];
        let (report, _) = run_trajectory(
            &traj,
            &target,
            &LearnerRule::NearestNeighbor,
            Label(0),
            &checkpoints,
        )
        .unwrap();
        for (i, &t) in checkpoints.iter().enumerate() {
            let replayed = report.error_times.iter().filter(|&&e| e <= t).count() as u64;
            assert_eq!(report.cum_errors[i], replayed);
        }
    }

    #[test]
    fn countable_labels_beyond_binary() {
        // Three well-separated points with classes {0, 3, 7}: the capped rule
        // answers repeats from memory, so errors stop after the first visits.
        let mut table = std::collections::BTreeMap::new();
        table.insert(dy(1, 3), Label(0));
        table.insert(dy(1, 1), Label(3));
        table.insert(dy(7, 3), Label(7));
        let target = TargetFunction::CustomTable { table };
        let support = [dy(1, 3), dy(1, 1), dy(7, 3)];
        let traj = gen_finite_support(6, &support, 120, &target).unwrap();
        let (report, _) =
            run_trajectory(&traj, &target, &LearnerRule::kc1nn(2), Label(0), &[120]).unwrap();
        assert!(report.cum_errors[0] <= 3, "errors {:?}", report.cum_errors);
    }

    #[test]
    fn horizon_shortfall_rejected() {
        let target = TargetFunction::Constant { label: Label(0) };
        let traj = gen_finite_support(2, &[dy(1, 2)], 10, &target).unwrap();
        assert!(matches!(
            run_trajectory(&traj, &target, &LearnerRule::Memorize, Label(0), &[20]),
            Err(HarnessError::HorizonShortfall { .. })
        ));
    }

    #[test]
    fn aggregate_single_trial_is_identity() {
        let target = TargetFunction::interval_below(Dyadic::one_half(), false);
        let traj = gen_finite_support(4, &[dy(1, 2), dy(3, 2)], 64, &target).unwrap();
        let (report, _) =
            run_trajectory(&traj, &target, &LearnerRule::kc1nn(2), Label(0), &[32, 64]).unwrap();
        let agg = aggregate(std::slice::from_ref(&report)).unwrap();
        assert_eq!(agg.mean_loss, report.avg_loss);
        assert_eq!(agg.q10, report.avg_loss);
        assert_eq!(agg.q90, report.avg_loss);
        assert_eq!(agg.per_trial_final, vec![*report.avg_loss.last().unwrap()]);
    }

    #[test]
    fn aggregate_degenerate_zero_variance() {
        let target = TargetFunction::Constant { label: Label(1) };
        let reports: Vec<RunReport> = (0..5)
            .map(|seed| {
                let traj = gen_finite_support(seed, &[dy(1, 2)], 32, &target).unwrap();
                run_trajectory(&traj, &target, &LearnerRule::Memorize, Label(0), &[32])
                    .unwrap()
                    .0
            })
            .collect();
        let agg = aggregate(&reports).unwrap();
        // Every trial errs exactly once: the single point's first visit.
        assert_eq!(agg.mean_loss, vec![1.0 / 32.0]);
        assert_eq!(agg.min, agg.max);
    }

    #[test]
    fn aggregate_mean_is_exact_rational() {
        // Two trials with 1 and 2 errors at T = 4: mean is exactly 3/8.
        let mk = |errs: u64, seed: u64| RunReport {
            learner: "t".into(),
            seed,
            checkpoints: vec![4],
            cum_errors: vec![errs],
            avg_loss: vec![errs as f64 / 4.0],
            error_times: vec![],
            dataset_size: vec![0],
            deletion_count: 0,
            tree: TreeSummary {
                nodes: 0,
                deleted: 0,
                max_child_count: 0,
                depth_histogram: vec![],
            },
        };
        let agg = aggregate(&[mk(1, 0), mk(2, 1)]).unwrap();
        assert_eq!(agg.mean_loss, vec![3.0 / 8.0]);
        // The mean always sits inside the per-trial envelope.
        assert!(agg.min[0] <= agg.mean_loss[0] && agg.mean_loss[0] <= agg.max[0]);
        assert_eq!((agg.min[0], agg.max[0]), (0.25, 0.5));
    }

    #[test]
    fn crf_examples() {
        let target = TargetFunction::Constant { label: Label(0) };
        let traj = gen_finite_support(0, &[dy(1, 2)], 50, &target).unwrap();
        let half = DyadicInterval::new(Dyadic::zero(), Dyadic::one_half(), true, false).unwrap();
        let curve = crf_frequency(&traj, &[half], &[10, 50]).unwrap();
        assert!(curve.iter().all(|p| p.frequency == 1.0));
        let all = DyadicInterval::new(Dyadic::zero(), Dyadic::one(), true, true).unwrap();
        let curve = crf_frequency(&traj, &[all], &[50]).unwrap();
        assert_eq!(curve[0].frequency, 1.0);
        assert!(DyadicInterval::new(Dyadic::one(), Dyadic::zero(), true, true).is_err());
    }

    #[test]
    fn path_check_vacuous_cases() {
        let target = TargetFunction::interval_below(Dyadic::one_half(), false);
        let traj = gen_finite_support(1, &[dy(1, 2)], 5, &target).unwrap();
        let (_, tree) =
            run_trajectory(&traj, &target, &LearnerRule::kc1nn(2), Label(0), &[5]).unwrap();
        // Single node: no qualifying pairs at all.
        let points = tree_points(&traj, &tree);
        let report = path_inequality_check(&tree, &points, 1000, 7);
        assert_eq!(report.pairs_checked, 0);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn path_check_skips_shared_roots() {
        // Constant-zero target with default label 0: no errors ever, so all
        // nodes live in the single tree rooted at time 1 and every pair
        // fails the distinct-roots precondition.
        let target = TargetFunction::Constant { label: Label(0) };
        let traj =
            gen_finite_support(8, &[dy(1, 3), dy(3, 3), dy(5, 3), dy(7, 3)], 40, &target).unwrap();
        let (_, tree) = run_trajectory(
            &traj,
            &target,
            &LearnerRule::NearestNeighbor,
            Label(0),
            &[40],
        )
        .unwrap();
        let points = tree_points(&traj, &tree);
        let report = path_inequality_check(&tree, &points, 1000, 3);
        assert_eq!(report.pairs_checked, 0);
        assert!(report.pairs_skipped > 0);
        assert!(report.violations.is_empty());
    }

    #[test]
    fn path_check_on_adversarial_run_is_clean() {
        let params = ScheduleParams::one_nn_desk(600);
        let traj = gen_1nn_adversarial(5, &params).unwrap();
        let target = TargetFunction::IndicatorDyadics;
        let (_, tree) =
            run_trajectory(&traj, &target, &LearnerRule::kc1nn(2), Label(0), &[600]).unwrap();
        let points = tree_points(&traj, &tree);
        let report = path_inequality_check(&tree, &points, 4000, 11);
        assert!(
            report.pairs_checked > 500,
            "checked {}",
            report.pairs_checked
        );
        assert!(report.violations.is_empty(), "{:?}", report.violations);
    }

    /// Spy predictor recording the call order; lookahead would show up as a
    /// reveal sentinel before its predict.
    struct SpyLearner {
        log: Vec<(char, u64)>,
        t: u64,
    }

    impl OnlinePredictor for SpyLearner {
        fn predict(&mut self, _x: &Dyadic) -> Result<Label, LearnerError> {
            self.log.push(('p', self.t));
            Ok(Label(0))
        }
        fn reveal(&mut self, _y: Label) -> Result<(), LearnerError> {
            self.log.push(('r', self.t));
            self.t += 1;
            Ok(())
        }
    }

    #[test]
    fn prediction_precedes_reveal() {
        let target = TargetFunction::Constant { label: Label(0) };
        let traj = gen_finite_support(3, &[dy(1, 2), dy(3, 2)], 20, &target).unwrap();
        let mut spy = SpyLearner {
            log: Vec::new(),
            t: 1,
        };
        drive(&traj, &target, &mut spy, &[20]).unwrap();
        assert_eq!(spy.log.len(), 40);
        for t in 1..=20u64 {
            let p = spy.log.iter().position(|&e| e == ('p', t)).unwrap();
            let r = spy.log.iter().position(|&e| e == ('r', t)).unwrap();
            assert!(p < r, "prediction for {t} must precede its reveal");
        }
    }
}
