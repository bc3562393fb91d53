//! Countable measurable partitions of `[0, 1]` as total cell-id functions,
//! and visited-cell counting for empirical sublinear-visit estimates.
//!
//! A process satisfies the sublinear-visits condition when, for every
//! countable measurable partition, the number of distinct cells met by its
//! first `T` points is `o(T)`. That is unobservable at finite `T`; the
//! report here is a diagnostic readout over fixed partition families, not a
//! proof. Verdict thresholds are pinned: shrinking when the last ratio is
//! below half the first and below 0.1, linear when the last ratio exceeds
//! 0.5, flat otherwise.

use std::collections::HashSet;
use std::io::{self, Write};

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;
use crate::processes::Trajectory;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PartitionError {
    #[error("grid width must be positive")]
    ZeroGrid,
    #[error("checkpoints must be sorted, positive, and non-empty")]
    BadCheckpoints,
    #[error("curve must be non-empty")]
    EmptyCurve,
}

/// A countable measurable partition given as a total cell-id function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PartitionSpec {
    /// Cells accumulate toward `s` from both sides: the singleton `{s}`,
    /// left cells `[s(1-1/k), s(1-1/(k+1)))`, and right cells
    /// `(s + (1-s)/(k+1), s + (1-s)/k]`.
    Centered { s: Dyadic },
    /// Half-open width-`eta` cells `[j eta, (j+1) eta)`, the final cell
    /// closed at 1.
    Grid { eta: Dyadic },
    /// Every point is its own cell.
    DistinctPoints,
    /// Common refinement: the cell of `x` is the tuple of factor cells.
    Product { factors: Vec<PartitionSpec> },
}

/// Opaque discrete cell identifier; equality means same cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CellId {
    Center,
    Left(BigUint),
    Right(BigUint),
    Grid(BigUint),
    Point(Dyadic),
    Product(Vec<CellId>),
}

/// Floor of `a / b` for dyadics with `b > 0`, via aligned integer division.
fn floor_ratio(a: &Dyadic, b: &Dyadic) -> BigUint {
    let (na, ea) = (a.numerator(), a.exponent());
    let (nb, eb) = (b.numerator(), b.exponent());
    if ea >= eb {
        na / (nb << (ea - eb))
    } else {
        (na << (eb - ea)) / nb
    }
}

/// Total cell-id function of the partition.
pub fn cell_id(spec: &PartitionSpec, x: &Dyadic) -> CellId {
    match spec {
        PartitionSpec::Centered { s } => match x.cmp(s) {
            std::cmp::Ordering::Equal => CellId::Center,
            std::cmp::Ordering::Less => {
                // x in [s(1-1/k), s(1-1/(k+1))) iff k <= s/(s-x) < k+1.
                CellId::Left(floor_ratio(s, &s.sub(x).expect("x < s")))
            }
            std::cmp::Ordering::Greater => {
                // x in (s + (1-s)/(k+1), s + (1-s)/k] iff k <= (1-s)/(x-s) < k+1.
                let above = Dyadic::one().sub(s).expect("s <= 1");
                CellId::Right(floor_ratio(&above, &x.sub(s).expect("x > s")))
            }
        },
        PartitionSpec::Grid { eta } => {
            let q = floor_ratio(x, eta);
            // Close the final cell at 1: when eta = 2^-g divides 1 exactly,
            // x = 1 would otherwise index one past the last cell.
            let q_max = if eta.numerator().is_one() {
                (BigUint::one() << eta.exponent()) - 1u32
            } else {
                floor_ratio(&Dyadic::one(), eta)
            };
            CellId::Grid(q.min(q_max))
        }
        PartitionSpec::DistinctPoints => CellId::Point(x.clone()),
        PartitionSpec::Product { factors } => {
            CellId::Product(factors.iter().map(|f| cell_id(f, x)).collect())
        }
    }
}

/// Distinct cells visited among the first `T` samples, for each checkpoint.
pub fn cells_visited_curve(
    traj: &Trajectory,
    spec: &PartitionSpec,
    checkpoints: &[u64],
) -> Result<Vec<(u64, u64)>, PartitionError> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0
    {
        return Err(PartitionError::BadCheckpoints);
    }
    let mut seen: HashSet<CellId> = HashSet::new();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0usize;
    for s in &traj.samples {
        while next < checkpoints.len() && checkpoints[next] < s.t {
            out.push((checkpoints[next], seen.len() as u64));
            next += 1;
        }
        if next >= checkpoints.len() {
            break;
        }
        seen.insert(cell_id(spec, &s.x));
        if checkpoints[next] == s.t {
            out.push((s.t, seen.len() as u64));
            next += 1;
        }
    }
    while next < checkpoints.len() {
        out.push((checkpoints[next], seen.len() as u64));
        next += 1;
    }
    Ok(out)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmvVerdict {
    Shrinking,
    Flat,
    Linear,
}

impl SmvVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            SmvVerdict::Shrinking => "shrinking",
            SmvVerdict::Flat => "flat",
            SmvVerdict::Linear => "linear",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SmvReport {
    /// `(T, count, count / T)` per checkpoint.
    pub points: Vec<(u64, u64, f64)>,
    pub verdict: SmvVerdict,
}

/// Ratio readout and trend verdict for a visited-cells curve.
pub fn smv_ratio_report(curve: &[(u64, u64)]) -> Result<SmvReport, PartitionError> {
    if curve.is_empty() {
        return Err(PartitionError::EmptyCurve);
    }
    let points: Vec<(u64, u64, f64)> = curve
        .iter()
        .map(|&(t, c)| (t, c, c as f64 / t as f64))
        .collect();
    let first = points.first().expect("non-empty").2;
    let last = points.last().expect("non-empty").2;
    let verdict = if last < 0.5 * first && last < 0.1 {
        SmvVerdict::Shrinking
    } else if last > 0.5 {
        SmvVerdict::Linear
    } else {
        SmvVerdict::Flat
    };
    Ok(SmvReport { points, verdict })
}

impl SmvReport {
    /// CSV export: `T,count,ratio`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "T,count,ratio")?;
        for (t, c, r) in &self.points {
            writeln!(w, "{t},{c},{r}")?;
        }
        Ok(())
    }
}
