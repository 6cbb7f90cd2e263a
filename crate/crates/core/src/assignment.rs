//! Treatment-assignment mechanisms.
//!
//! A mechanism maps a unit's latent tuple to its treatment probability and
//! says whether units are assigned independently or by one shared draw.
//! Mechanisms are tables rather than closures so the oracle can enumerate
//! them exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::DesignError;
use crate::population::{Latents, PopulationSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dependence {
    #[serde(rename = "independent")]
    IndependentAcrossUnits,
    #[serde(rename = "shared_global_draw")]
    SharedGlobalDraw,
}

impl Dependence {
    fn wire_name(self) -> &'static str {
        match self {
            Dependence::IndependentAcrossUnits => "independent",
            Dependence::SharedGlobalDraw => "shared_global_draw",
        }
    }

    fn from_wire(s: &str) -> Option<Self> {
        match s {
            "independent" | "independent_across_units" => Some(Dependence::IndependentAcrossUnits),
            "shared_global_draw" | "shared" => Some(Dependence::SharedGlobalDraw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateProb {
    pub x: u32,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentProb {
    pub y1: f64,
    pub y0: f64,
    pub x: u32,
    pub u: u32,
    pub p: f64,
}

impl LatentProb {
    fn latents(&self) -> Latents {
        Latents::new(self.y1, self.y0, self.x, self.u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentTreatment {
    pub y1: f64,
    pub y0: f64,
    pub x: u32,
    pub u: u32,
    pub w: u8,
}

impl LatentTreatment {
    fn latents(&self) -> Latents {
        Latents::new(self.y1, self.y0, self.x, self.u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MechanismKind {
    /// Every unit treated with probability `p`.
    ConstantProb { p: f64 },
    /// Probability depends on the observed covariate only.
    CovariateFn { table: Vec<CovariateProb> },
    /// Probability depends on the full latent tuple.
    LatentFn { table: Vec<LatentProb> },
    /// Treatment is a fixed function of the latent tuple.
    Deterministic { table: Vec<LatentTreatment> },
    /// One coin with success probability `p` treats everyone or no one.
    GlobalCoin { p: f64 },
    /// `p = y1 / (2 * mean)` where `mean` is `E[Y(1)]`.
    OutcomeProportional { mean: f64 },
}

impl MechanismKind {
    pub fn name(&self) -> &'static str {
        match self {
            MechanismKind::ConstantProb { .. } => "constant_prob",
            MechanismKind::CovariateFn { .. } => "covariate_fn",
            MechanismKind::LatentFn { .. } => "latent_fn",
            MechanismKind::Deterministic { .. } => "deterministic",
            MechanismKind::GlobalCoin { .. } => "global_coin",
            MechanismKind::OutcomeProportional { .. } => "outcome_proportional",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MechanismDoc", into = "MechanismDoc")]
pub struct Mechanism {
    kind: MechanismKind,
}

fn open_unit(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

impl Mechanism {
    pub fn new(kind: MechanismKind) -> Result<Self, DesignError> {
        let bad = |msg: String| Err(DesignError::InvalidMechanism(msg));
        match &kind {
            MechanismKind::ConstantProb { p } | MechanismKind::GlobalCoin { p } => {
                if !open_unit(*p) {
                    return bad(format!("{} requires 0 < p < 1, got {p}", kind.name()));
                }
            }
            MechanismKind::CovariateFn { table } => {
                for (i, e) in table.iter().enumerate() {
                    if !open_unit(e.p) {
                        return bad(format!("covariate_fn entry x={} has p={} outside (0, 1)", e.x, e.p));
                    }
                    if table[..i].iter().any(|o| o.x == e.x) {
                        return bad(format!("covariate_fn has duplicate level x={}", e.x));
                    }
                }
            }
            MechanismKind::LatentFn { table } => {
                for (i, e) in table.iter().enumerate() {
                    if !(0.0..=1.0).contains(&e.p) {
                        return bad(format!("latent_fn entry {i} has p={} outside [0, 1]", e.p));
                    }
                    if table[..i].iter().any(|o| o.latents().same_tuple(&e.latents())) {
                        return bad(format!("latent_fn entry {i} duplicates an earlier tuple"));
                    }
                }
            }
            MechanismKind::Deterministic { table } => {
                for (i, e) in table.iter().enumerate() {
                    if e.w > 1 {
                        return bad(format!("deterministic entry {i} has w={}, expected 0 or 1", e.w));
                    }
                    if table[..i].iter().any(|o| o.latents().same_tuple(&e.latents())) {
                        return bad(format!("deterministic entry {i} duplicates an earlier tuple"));
                    }
                }
            }
            MechanismKind::OutcomeProportional { mean } => {
                if !(mean.is_finite() && *mean > 0.0) {
                    return bad(format!("outcome_proportional requires a positive mean, got {mean}"));
                }
            }
        }
        Ok(Self { kind })
    }

    pub fn constant(p: f64) -> Result<Self, DesignError> {
        Self::new(MechanismKind::ConstantProb { p })
    }

    pub fn global_coin(p: f64) -> Result<Self, DesignError> {
        Self::new(MechanismKind::GlobalCoin { p })
    }

    pub fn covariate_fn(levels: impl IntoIterator<Item = (u32, f64)>) -> Result<Self, DesignError> {
        Self::new(MechanismKind::CovariateFn {
            table: levels.into_iter().map(|(x, p)| CovariateProb { x, p }).collect(),
        })
    }

    /// Probability table over every stratum of `spec`, computed by `f`.
    pub fn latent_fn(spec: &PopulationSpec, f: impl Fn(&Latents) -> f64) -> Result<Self, DesignError> {
        let table = spec
            .strata()
            .iter()
            .map(|s| {
                let l = s.latents;
                LatentProb { y1: l.y1, y0: l.y0, x: l.x, u: l.u, p: f(&l) }
            })
            .collect();
        Self::new(MechanismKind::LatentFn { table })
    }

    /// Treatment table over every stratum of `spec`, decided by `f`.
    pub fn deterministic(spec: &PopulationSpec, f: impl Fn(&Latents) -> bool) -> Result<Self, DesignError> {
        let table = spec
            .strata()
            .iter()
            .map(|s| {
                let l = s.latents;
                LatentTreatment { y1: l.y1, y0: l.y0, x: l.x, u: l.u, w: u8::from(f(&l)) }
            })
            .collect();
        Self::new(MechanismKind::Deterministic { table })
    }

    /// Outcome-proportional mechanism with the mean taken from `spec`.
    /// Fails if some positive-weight stratum has `y1` outside `(0, 2 E[Y(1)])`.
    pub fn outcome_proportional(spec: &PopulationSpec) -> Result<Self, DesignError> {
        let mech = Self::new(MechanismKind::OutcomeProportional { mean: spec.mean_y1() })?;
        mech.validate_for(spec)?;
        Ok(mech)
    }

    pub fn kind(&self) -> &MechanismKind {
        &self.kind
    }

    pub fn dependence(&self) -> Dependence {
        match self.kind {
            MechanismKind::GlobalCoin { .. } => Dependence::SharedGlobalDraw,
            _ => Dependence::IndependentAcrossUnits,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, MechanismKind::Deterministic { .. })
    }

    /// Unit-level probability of treatment.
    pub fn treatment_probability(&self, l: &Latents) -> Result<f64, DesignError> {
        let unknown = || DesignError::UnknownLatents { y1: l.y1, y0: l.y0, x: l.x, u: l.u };
        match &self.kind {
            MechanismKind::ConstantProb { p } | MechanismKind::GlobalCoin { p } => Ok(*p),
            MechanismKind::CovariateFn { table } => table
                .iter()
                .find(|e| e.x == l.x)
                .map(|e| e.p)
                .ok_or_else(unknown),
            MechanismKind::LatentFn { table } => table
                .iter()
                .find(|e| e.latents().same_tuple(l))
                .map(|e| e.p)
                .ok_or_else(unknown),
            MechanismKind::Deterministic { table } => table
                .iter()
                .find(|e| e.latents().same_tuple(l))
                .map(|e| f64::from(e.w))
                .ok_or_else(unknown),
            MechanismKind::OutcomeProportional { mean } => {
                let p = l.y1 / (2.0 * mean);
                if open_unit(p) {
                    Ok(p)
                } else {
                    Err(DesignError::InvalidMechanism(format!(
                        "outcome_proportional requires 0 < y1 < 2*mean = {}, got y1 = {}",
                        2.0 * mean,
                        l.y1
                    )))
                }
            }
        }
    }

    /// Checks that every positive-weight stratum of `spec` has a probability.
    pub fn validate_for(&self, spec: &PopulationSpec) -> Result<(), DesignError> {
        for (_, l, _) in spec.positive() {
            self.treatment_probability(l)?;
        }
        Ok(())
    }

    /// Treatment probability per stratum, in stratum order. Zero-weight
    /// strata the mechanism cannot place get `NaN`; they are never drawn.
    pub fn stratum_probabilities(&self, spec: &PopulationSpec) -> Result<Vec<f64>, DesignError> {
        spec.strata()
            .iter()
            .zip(spec.weights())
            .map(|(s, &w)| match self.treatment_probability(&s.latents) {
                Ok(p) => Ok(p),
                Err(_) if w == 0.0 => Ok(f64::NAN),
                Err(e) => Err(e),
            })
            .collect()
    }

    /// Realizes treatments for `units`. Independent mechanisms make one draw
    /// per unit, the global coin makes one draw for everyone, deterministic
    /// mechanisms make none.
    pub fn assign<R: Rng + ?Sized>(&self, units: &[Latents], rng: &mut R) -> Result<Vec<bool>, DesignError> {
        let probs = units
            .iter()
            .map(|l| self.treatment_probability(l))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(match (&self.kind, self.dependence()) {
            (MechanismKind::Deterministic { .. }, _) => probs.iter().map(|&p| p == 1.0).collect(),
            (_, Dependence::SharedGlobalDraw) => {
                let coin = match &self.kind {
                    MechanismKind::GlobalCoin { p } => *p,
                    _ => unreachable!("only the global coin shares a draw"),
                };
                vec![draw(coin, rng); units.len()]
            }
            _ => probs.iter().map(|&p| draw(p, rng)).collect(),
        })
    }

    /// Returns whether every positive-weight stratum has `0 < p < 1`, and
    /// the attained bound `min(p, 1 - p)` over those strata.
    pub fn is_randomized(&self, spec: &PopulationSpec) -> Result<(bool, f64), DesignError> {
        let mut gamma = f64::INFINITY;
        for (_, l, _) in spec.positive() {
            let p = self.treatment_probability(l)?;
            gamma = gamma.min(p.min(1.0 - p));
        }
        Ok(if gamma > 0.0 { (true, gamma) } else { (false, 0.0) })
    }
}

/// One Bernoulli draw consuming a single uniform.
#[inline]
pub fn draw<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p
}

/// `p = (3 - y1) / 4`: treatment is likelier when the treated outcome is low.
pub fn outcome_dependent(spec: &PopulationSpec) -> Mechanism {
    Mechanism::latent_fn(spec, |l| (3.0 - l.y1) / 4.0).expect("probabilities lie in [0, 1] for y1 in {0, 1}")
}

/// `w = u`: treatment follows the unobserved covariate.
pub fn treat_by_unobserved(spec: &PopulationSpec) -> Mechanism {
    Mechanism::deterministic(spec, |l| l.u == 1).expect("deterministic table is valid")
}

/// `w = 1[y1 = 1]`: treatment follows the treated outcome.
pub fn treat_by_outcome(spec: &PopulationSpec) -> Mechanism {
    Mechanism::deterministic(spec, |l| l.y1 == 1.0).expect("deterministic table is valid")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MechanismDoc {
    #[serde(flatten)]
    kind: MechanismKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dependence: Option<String>,
}

impl TryFrom<MechanismDoc> for Mechanism {
    type Error = DesignError;

    fn try_from(doc: MechanismDoc) -> Result<Self, Self::Error> {
        let mech = Mechanism::new(doc.kind)?;
        if let Some(text) = doc.dependence {
            let dep = Dependence::from_wire(&text).ok_or_else(|| {
                DesignError::InvalidMechanism(format!("unknown dependence {text:?}"))
            })?;
            if dep != mech.dependence() {
                return Err(DesignError::InvalidMechanism(format!(
                    "{} requires dependence {:?}, got {text:?}",
                    mech.kind.name(),
                    mech.dependence().wire_name()
                )));
            }
        }
        Ok(mech)
    }
}

impl From<Mechanism> for MechanismDoc {
    fn from(m: Mechanism) -> Self {
        let dependence = Some(m.dependence().wire_name().to_string());
        MechanismDoc { kind: m.kind, dependence }
    }
}
