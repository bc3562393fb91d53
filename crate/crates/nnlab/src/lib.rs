//! Simulation laboratory for online nearest-neighbor learning on `[0, 1]`
//! with exact dyadic-rational arithmetic.
//!
//! The crate builds adversarial and baseline input processes, runs
//! memorization / 1NN / `(k_n)`-NN / capped-1NN learners over them with
//! prediction-before-reveal accounting, and estimates consistency through
//! loss curves, cell-visit counts of measurable partitions, and relative
//! frequencies of interval sets. Everything is seeded and reproducible.

pub mod dyadic;
pub mod experiment;
pub mod harness;
pub mod learners;
pub mod partitions;
pub mod processes;
pub mod rng;
pub mod spaces;
pub mod svg;

pub use dyadic::{nth_closest_dyadic, ApproxFloat, Dyadic, DyadicError};
pub use harness::{
    aggregate, crf_frequency, default_checkpoints, path_inequality_check, run_trajectory,
    tree_points, AggregateReport, CrfPoint, DyadicInterval, HarnessError, PathCheckReport,
    RunReport,
};
pub use learners::{
    KnnSchedule, Learner, LearnerError, LearnerRule, OnlinePredictor, PredictionTree,
    ReferenceLearner,
};
pub use partitions::{
    cell_id, cells_visited_curve, smv_ratio_report, CellId, PartitionSpec, SmvReport, SmvVerdict,
};
pub use processes::{
    gen_1nn_adversarial, gen_enumerated_fresh, gen_finite_support, gen_iid_uniform,
    gen_knn_adversarial, AdversarialKind, LabeledSample, ProcessError, ScheduleParams,
    SchedulePreset, Trajectory,
};
pub use rng::SeededStream;
pub use spaces::{eval_target, zero_one_loss, Label, Provenance, TargetFunction};
