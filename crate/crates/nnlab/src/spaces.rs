//! Instance space `([0,1], |.|)`, classification value spaces with 0-1 loss,
//! and symbolic target functions evaluated exactly.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dyadic::Dyadic;

/// Class id. Binary classification uses `{0, 1}`; countable-label mode
/// allows any tag.
#[derive(
    Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct Label(pub u32);

/// 0-1 loss: 0 iff the labels agree. Symmetric, discernible, and a metric
/// (relaxed triangle constant 1).
pub fn zero_one_loss(y_hat: Label, y: Label) -> u64 {
    u64::from(y_hat != y)
}

/// Loss description recorded in reports.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: &'static str,
    pub c_ell: f64,
    pub sup_loss: f64,
}

pub const ZERO_ONE: LossSpec = LossSpec {
    kind: "zero-one",
    c_ell: 1.0,
    sup_loss: 1.0,
};

/// Where a sample point came from. Labels for the all-dyadics indicator are
/// assigned from this flag: it records whether the generator's idealized
/// point is a dyadic (anchors, planted neighbors, the fixed enumeration) or
/// almost surely not (perturbations and uniform draws standing in for
/// continuous samples).
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AnchorDyadic,
    PlantedNeighbor,
    Perturbed,
    Iid,
    Enumerated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::AnchorDyadic => "anchor_dyadic",
            Provenance::PlantedNeighbor => "planted_neighbor",
            Provenance::Perturbed => "perturbed",
            Provenance::Iid => "iid",
            Provenance::Enumerated => "enumerated",
        }
    }

    pub fn parse(s: &str) -> Option<Provenance> {
        match s {
            "anchor_dyadic" => Some(Provenance::AnchorDyadic),
            "planted_neighbor" => Some(Provenance::PlantedNeighbor),
            "perturbed" => Some(Provenance::Perturbed),
            "iid" => Some(Provenance::Iid),
            "enumerated" => Some(Provenance::Enumerated),
            _ => None,
        }
    }

    fn idealized_point_is_dyadic(self) -> bool {
        matches!(
            self,
            Provenance::AnchorDyadic | Provenance::PlantedNeighbor | Provenance::Enumerated
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpacesError {
    #[error("custom table has no entry for {point}")]
    TableMiss { point: String },
}

/// Deterministic target function, total on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetFunction {
    /// Indicator of the set of all dyadic rationals, realized through sample
    /// provenance (see [`Provenance`]).
    IndicatorDyadics,
    /// Indicator of `[0, s)`, or `[0, s]` with `closed`.
    IndicatorIntervalBelow {
        s: Dyadic,
        closed: bool,
    },
    /// Indicator of the open ball `(center - radius, center + radius)`.
    IndicatorBall {
        center: Dyadic,
        radius: Dyadic,
    },
    Constant {
        label: Label,
    },
    /// Explicit point table; evaluation misses are errors.
    CustomTable {
        table: BTreeMap<Dyadic, Label>,
    },
}

impl TargetFunction {
    pub fn interval_below(s: Dyadic, closed: bool) -> TargetFunction {
        TargetFunction::IndicatorIntervalBelow { s, closed }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetFunction::IndicatorDyadics => "indicator-dyadics",
            TargetFunction::IndicatorIntervalBelow { .. } => "interval-below",
            TargetFunction::IndicatorBall { .. } => "ball",
            TargetFunction::Constant { .. } => "constant",
            TargetFunction::CustomTable { .. } => "custom-table",
        }
    }
}

/// Evaluates the target at an exact point. Pure: the same `(f, x, provenance)`
/// always yields the same label.
pub fn eval_target(
    f: &TargetFunction,
    x: &Dyadic,
    provenance: Provenance,
) -> Result<Label, SpacesError> {
    let label = match f {
        TargetFunction::IndicatorDyadics => Label(provenance.idealized_point_is_dyadic() as u32),
        TargetFunction::IndicatorIntervalBelow { s, closed } => match x.compare(s) {
            Ordering::Less => Label(1),
            Ordering::Equal => Label(*closed as u32),
            Ordering::Greater => Label(0),
        },
        TargetFunction::IndicatorBall { center, radius } => {
            Label((x.abs_diff(center).compare(radius) == Ordering::Less) as u32)
        }
        TargetFunction::Constant { label } => *label,
        TargetFunction::CustomTable { table } => {
            *table.get(x).ok_or_else(|| SpacesError::TableMiss {
                point: x.to_string(),
            })?
        }
    };
    Ok(label)
}
