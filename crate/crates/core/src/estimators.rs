//! Point estimators of the average treatment effect from one realized sample.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::population::SampleObservation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Treated,
    Control,
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Treated => "treated",
            Arm::Control => "control",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("sample has no {0} observations")]
    EmptyArm(Arm),

    #[error("observation {index} has treatment probability {p}, outside (0, 1)")]
    PositivityViolation { index: usize, p: f64 },

    #[error("propensity score for x={x}: {reason}")]
    Score { x: u32, reason: String },

    #[error("sample is empty")]
    EmptySample,
}

impl EstimateError {
    /// Whether this failure is a chance event of the sample rather than a
    /// defect of the design.
    pub fn is_empty_arm(&self) -> bool {
        matches!(self, EstimateError::EmptyArm(_))
    }
}

/// A non-empty realized sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    observations: Vec<SampleObservation>,
}

impl Sample {
    pub fn new(observations: Vec<SampleObservation>) -> Result<Self, EstimateError> {
        if observations.is_empty() {
            return Err(EstimateError::EmptySample);
        }
        Ok(Self { observations })
    }

    pub fn observations(&self) -> &[SampleObservation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn treated_count(&self) -> usize {
        self.observations.iter().filter(|o| o.w).count()
    }

    fn check_arms(&self) -> Result<(), EstimateError> {
        let treated = self.treated_count();
        if treated == 0 {
            return Err(EstimateError::EmptyArm(Arm::Treated));
        }
        if treated == self.len() {
            return Err(EstimateError::EmptyArm(Arm::Control));
        }
        Ok(())
    }

    fn check_positivity(&self) -> Result<(), EstimateError> {
        match self
            .observations
            .iter()
            .position(|o| !(o.p > 0.0 && o.p < 1.0))
        {
            Some(index) => Err(EstimateError::PositivityViolation {
                index,
                p: self.observations[index].p,
            }),
            None => Ok(()),
        }
    }
}

/// Mean outcome among treated minus mean outcome among controls.
pub fn diff_in_means(s: &Sample) -> Result<f64, EstimateError> {
    s.check_arms()?;
    let (mut sum1, mut n1, mut sum0, mut n0) = (0.0, 0usize, 0.0, 0usize);
    for o in s.observations() {
        if o.w {
            sum1 += o.y;
            n1 += 1;
        } else {
            sum0 += o.y;
            n0 += 1;
        }
    }
    Ok(sum1 / n1 as f64 - sum0 / n0 as f64)
}

fn weighted_difference(
    s: &Sample,
    score: impl Fn(&SampleObservation) -> f64,
) -> f64 {
    let total: f64 = s
        .observations()
        .iter()
        .map(|o| {
            let p = score(o);
            if o.w {
                o.y / p
            } else {
                -o.y / (1.0 - p)
            }
        })
        .sum();
    total / s.len() as f64
}

/// Inverse-probability weighting with the true treatment probabilities.
pub fn horvitz_thompson(s: &Sample) -> Result<f64, EstimateError> {
    s.check_positivity()?;
    Ok(weighted_difference(s, |o| o.p))
}

/// The Horvitz-Thompson formula with `score[x]` in place of each unit's
/// treatment probability.
pub fn ipw_propensity(s: &Sample, score: &BTreeMap<u32, f64>) -> Result<f64, EstimateError> {
    for o in s.observations() {
        match score.get(&o.x) {
            Some(p) if *p > 0.0 && *p < 1.0 => {}
            Some(p) => {
                return Err(EstimateError::Score {
                    x: o.x,
                    reason: format!("{p} is outside (0, 1)"),
                })
            }
            None => {
                return Err(EstimateError::Score {
                    x: o.x,
                    reason: "level missing from score table".into(),
                })
            }
        }
    }
    Ok(weighted_difference(s, |o| score[&o.x]))
}

/// Ratio-normalized inverse-probability weighting: each arm's weighted mean
/// is divided by its realized total weight.
pub fn hajek(s: &Sample) -> Result<f64, EstimateError> {
    s.check_arms()?;
    s.check_positivity()?;
    let (mut num1, mut den1, mut num0, mut den0) = (0.0, 0.0, 0.0, 0.0);
    for o in s.observations() {
        if o.w {
            num1 += o.y / o.p;
            den1 += 1.0 / o.p;
        } else {
            num0 += o.y / (1.0 - o.p);
            den0 += 1.0 / (1.0 - o.p);
        }
    }
    Ok(num1 / den1 - num0 / den0)
}

/// Treated fraction within each observed covariate level.
pub fn estimate_propensity(s: &Sample) -> BTreeMap<u32, f64> {
    let mut counts: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for o in s.observations() {
        let c = counts.entry(o.x).or_default();
        c.0 += usize::from(o.w);
        c.1 += 1;
    }
    counts
        .into_iter()
        .map(|(x, (t, n))| (x, t as f64 / n as f64))
        .collect()
}

/// Stable estimator identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorId {
    #[serde(rename = "dim")]
    DiffInMeans,
    #[serde(rename = "ht")]
    HorvitzThompson,
    /// Propensity weighting with the design's exact propensity by `x`.
    #[serde(rename = "ipw_x")]
    IpwTrueScore,
    /// Propensity weighting with the in-sample treated fraction by `x`.
    #[serde(rename = "ipw_xhat")]
    IpwEstimatedScore,
    #[serde(rename = "hajek")]
    Hajek,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 5] = [
        EstimatorId::DiffInMeans,
        EstimatorId::HorvitzThompson,
        EstimatorId::IpwTrueScore,
        EstimatorId::IpwEstimatedScore,
        EstimatorId::Hajek,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::DiffInMeans => "dim",
            EstimatorId::HorvitzThompson => "ht",
            EstimatorId::IpwTrueScore => "ipw_x",
            EstimatorId::IpwEstimatedScore => "ipw_xhat",
            EstimatorId::Hajek => "hajek",
        }
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EstimatorId::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| format!("unknown estimator {s:?}; expected one of dim, ht, ipw_x, ipw_xhat, hajek"))
    }
}
