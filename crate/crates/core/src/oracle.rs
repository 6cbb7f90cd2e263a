//! Exact analysis of a design by enumerating strata and assignment outcomes.
//!
//! Everything here is a finite sum over the joint law of one sampled
//! observation `(Y(1), Y(0), X, U, W)`. No randomness is involved.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::{Dependence, Mechanism, MechanismKind};
use crate::error::DesignError;
use crate::population::{Latents, PopulationSpec};

/// Tolerance for comparing enumerated probabilities.
pub const EXACT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointEntry {
    pub stratum: usize,
    pub latents: Latents,
    pub w: bool,
    pub prob: f64,
}

/// Joint law conditional on one outcome of a shared draw, or the whole law
/// for independent mechanisms.
#[derive(Debug, Clone, PartialEq)]
pub struct JointComponent {
    /// Mixture weight of this component.
    pub weight: f64,
    /// Outcome of the shared coin, `None` for independent mechanisms.
    pub coin: Option<bool>,
    pub entries: Vec<JointEntry>,
}

/// Joint law of one sample observation, as a mixture of components.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub dependence: Dependence,
    pub components: Vec<JointComponent>,
}

impl JointTable {
    /// The single-observation law with the mixture folded in.
    pub fn marginal(&self) -> impl Iterator<Item = JointEntry> + '_ {
        self.components.iter().flat_map(|c| {
            c.entries.iter().map(move |e| JointEntry {
                prob: c.weight * e.prob,
                ..*e
            })
        })
    }

    pub fn total(&self) -> f64 {
        self.marginal().map(|e| e.prob).sum()
    }

    /// `Pr(W = 1)`.
    pub fn treated_share(&self) -> f64 {
        self.marginal().filter(|e| e.w).map(|e| e.prob).sum()
    }

    /// `E[f(latents, w)]` under the marginal law.
    pub fn expect(&self, f: impl Fn(&Latents, bool) -> f64) -> f64 {
        self.marginal()
            .filter(|e| e.prob > 0.0)
            .map(|e| e.prob * f(&e.latents, e.w))
            .sum()
    }
}

/// Exact joint law of one sample observation under `mech`.
pub fn joint_distribution(spec: &PopulationSpec, mech: &Mechanism) -> Result<JointTable, DesignError> {
    let dependence = mech.dependence();
    let components = match (dependence, mech.kind()) {
        (Dependence::SharedGlobalDraw, MechanismKind::GlobalCoin { p }) => [(true, *p), (false, 1.0 - p)]
            .into_iter()
            .map(|(coin, weight)| JointComponent {
                weight,
                coin: Some(coin),
                entries: spec
                    .positive()
                    .map(|(stratum, l, w)| JointEntry { stratum, latents: *l, w: coin, prob: w })
                    .collect(),
            })
            .collect(),
        (Dependence::SharedGlobalDraw, _) => {
            return Err(DesignError::SharedDraw("unsupported shared mechanism".into()))
        }
        (Dependence::IndependentAcrossUnits, _) => {
            let mut entries = Vec::with_capacity(2 * spec.len());
            for (stratum, l, w) in spec.positive() {
                let p = mech.treatment_probability(l)?;
                entries.push(JointEntry { stratum, latents: *l, w: true, prob: w * p });
                entries.push(JointEntry { stratum, latents: *l, w: false, prob: w * (1.0 - p) });
            }
            vec![JointComponent { weight: 1.0, coin: None, entries }]
        }
    };
    Ok(JointTable { dependence, components })
}

/// `Pr(X = x)`.
pub fn covariate_mass(spec: &PopulationSpec, x: u32) -> f64 {
    spec.positive().filter(|(_, l, _)| l.x == x).map(|(_, _, w)| w).sum()
}

/// Propensity score `Pr(W = 1 | X = x)`.
pub fn propensity(spec: &PopulationSpec, mech: &Mechanism, x: u32) -> Result<f64, DesignError> {
    let table = joint_distribution(spec, mech)?;
    propensity_from(&table, x)
}

fn propensity_from(table: &JointTable, x: u32) -> Result<f64, DesignError> {
    let (mut treated, mut mass) = (0.0, 0.0);
    for e in table.marginal().filter(|e| e.latents.x == x) {
        mass += e.prob;
        if e.w {
            treated += e.prob;
        }
    }
    if mass <= 0.0 {
        return Err(DesignError::ZeroMassCovariate(x));
    }
    Ok(treated / mass)
}

/// Propensity score for every covariate level with positive mass.
pub fn propensity_by_x(spec: &PopulationSpec, mech: &Mechanism) -> Result<BTreeMap<u32, f64>, DesignError> {
    let table = joint_distribution(spec, mech)?;
    spec.covariate_levels()
        .into_iter()
        .map(|x| Ok((x, propensity_from(&table, x)?)))
        .collect()
}

/// Discrete law of the potential-outcome pair `(y1, y0)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutcomeDistribution {
    /// `((y1, y0), probability)` with distinct pairs.
    pub support: Vec<((f64, f64), f64)>,
}

impl OutcomeDistribution {
    fn add(&mut self, key: (f64, f64), prob: f64) {
        match self.support.iter_mut().find(|(k, _)| *k == key) {
            Some((_, p)) => *p += prob,
            None => self.support.push((key, prob)),
        }
    }

    fn normalized(mut self) -> Self {
        let total: f64 = self.support.iter().map(|(_, p)| p).sum();
        for (_, p) in &mut self.support {
            *p /= total;
        }
        self
    }

    pub fn prob(&self, y1: f64, y0: f64) -> f64 {
        self.support
            .iter()
            .filter(|(k, _)| *k == (y1, y0))
            .map(|(_, p)| p)
            .sum()
    }

    /// `Pr(Y(1) = y1)`.
    pub fn prob_y1(&self, y1: f64) -> f64 {
        self.support.iter().filter(|(k, _)| k.0 == y1).map(|(_, p)| p).sum()
    }

    /// Entrywise equality within `tol` over the union of supports.
    pub fn approx_eq(&self, other: &OutcomeDistribution, tol: f64) -> bool {
        self.support
            .iter()
            .chain(&other.support)
            .all(|((y1, y0), _)| (self.prob(*y1, *y0) - other.prob(*y1, *y0)).abs() <= tol)
    }
}

fn conditional_outcomes(
    table: &JointTable,
    keep: impl Fn(&JointEntry) -> bool,
) -> Option<(OutcomeDistribution, f64)> {
    let mut dist = OutcomeDistribution::default();
    let mut mass = 0.0;
    for e in table.marginal().filter(|e| e.prob > 0.0 && keep(e)) {
        dist.add((e.latents.y1, e.latents.y0), e.prob);
        mass += e.prob;
    }
    (mass > 0.0).then(|| (dist.normalized(), mass))
}

/// Law of `(Y(1), Y(0))` given `W = w`, by Bayes' theorem over the joint table.
pub fn outcome_given_treatment(
    spec: &PopulationSpec,
    mech: &Mechanism,
    w: bool,
) -> Result<OutcomeDistribution, DesignError> {
    let table = joint_distribution(spec, mech)?;
    conditional_outcomes(&table, |e| e.w == w)
        .map(|(d, _)| d)
        .ok_or(DesignError::ZeroMassArm(u8::from(w)))
}

/// Three-valued independence verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Option<bool>", into = "Option<bool>")]
pub enum Verdict {
    Holds,
    Fails,
    /// Some arm has zero probability, so the conditional laws do not exist.
    Undefined,
}

impl Verdict {
    pub fn as_option(self) -> Option<bool> {
        self.into()
    }
}

impl From<Verdict> for Option<bool> {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Holds => Some(true),
            Verdict::Fails => Some(false),
            Verdict::Undefined => None,
        }
    }
}

impl From<Option<bool>> for Verdict {
    fn from(v: Option<bool>) -> Self {
        match v {
            Some(true) => Verdict::Holds,
            Some(false) => Verdict::Fails,
            None => Verdict::Undefined,
        }
    }
}

/// Whether `(Y(1), Y(0))` is independent of `W`, optionally given `X`.
pub fn check_unconfounded(spec: &PopulationSpec, mech: &Mechanism, conditional: bool) -> Result<Verdict, DesignError> {
    let table = joint_distribution(spec, mech)?;
    Ok(unconfounded_from(&table, spec, conditional))
}

fn unconfounded_from(table: &JointTable, spec: &PopulationSpec, conditional: bool) -> Verdict {
    let strata: Vec<Option<u32>> = if conditional {
        spec.covariate_levels().into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let mut verdict = Verdict::Holds;
    for x in strata {
        let in_stratum = |e: &JointEntry| x.is_none_or(|x| e.latents.x == x);
        let treated = conditional_outcomes(table, |e| e.w && in_stratum(e));
        let control = conditional_outcomes(table, |e| !e.w && in_stratum(e));
        match (treated, control) {
            (Some((t, _)), Some((c, _))) => {
                if !t.approx_eq(&c, EXACT_TOL) {
                    verdict = Verdict::Fails;
                }
            }
            _ => return Verdict::Undefined,
        }
    }
    verdict
}

fn require_independent(mech: &Mechanism, what: &str) -> Result<(), DesignError> {
    match mech.dependence() {
        Dependence::IndependentAcrossUnits => Ok(()),
        Dependence::SharedGlobalDraw => Err(DesignError::SharedDraw(format!(
            "{what} is undefined because no realized sample mixes treated and control units"
        ))),
    }
}

/// Probability limit of the difference in means: `E[Y | W=1] - E[Y | W=0]`.
pub fn dim_limit(spec: &PopulationSpec, mech: &Mechanism) -> Result<f64, DesignError> {
    require_independent(mech, "the difference-in-means limit")?;
    let table = joint_distribution(spec, mech)?;
    let arm_mean = |w: bool| -> Result<f64, DesignError> {
        let (mut num, mut den) = (0.0, 0.0);
        for e in table.marginal().filter(|e| e.w == w) {
            num += e.prob * if w { e.latents.y1 } else { e.latents.y0 };
            den += e.prob;
        }
        if den <= 0.0 {
            return Err(DesignError::ZeroMassArm(u8::from(w)));
        }
        Ok(num / den)
    };
    Ok(arm_mean(true)? - arm_mean(false)?)
}

fn require_positivity(spec: &PopulationSpec, mech: &Mechanism) -> Result<(), DesignError> {
    for (index, l, _) in spec.positive() {
        let p = mech.treatment_probability(l)?;
        if !(p > 0.0 && p < 1.0) {
            return Err(DesignError::Positivity { index, p });
        }
    }
    Ok(())
}

/// Mean and variance of one Horvitz-Thompson term
/// `W Y / P - (1 - W) Y / (1 - P)`.
fn ht_term_moments(spec: &PopulationSpec, mech: &Mechanism) -> Result<(f64, f64), DesignError> {
    require_positivity(spec, mech)?;
    let table = joint_distribution(spec, mech)?;
    let term = |l: &Latents, w: bool| {
        let p = mech.treatment_probability(l).expect("checked by positivity");
        if w {
            l.y1 / p
        } else {
            -l.y0 / (1.0 - p)
        }
    };
    let mean = table.expect(term);
    let var = table.expect(|l, w| (term(l, w) - mean).powi(2));
    Ok((mean, var))
}

/// `E` of one Horvitz-Thompson term, which equals the ATE whenever
/// positivity holds.
pub fn ht_expectation(spec: &PopulationSpec, mech: &Mechanism) -> Result<f64, DesignError> {
    ht_term_moments(spec, mech).map(|(m, _)| m)
}

/// `n Var(τ̂_HT)` for i.i.d. sampling with independent assignment, i.e. the
/// variance of a single Horvitz-Thompson term.
pub fn ht_normalized_variance(spec: &PopulationSpec, mech: &Mechanism) -> Result<f64, DesignError> {
    require_independent(mech, "the Horvitz-Thompson normalized variance")?;
    ht_term_moments(spec, mech).map(|(_, v)| v)
}

/// Probability limit of inverse-propensity weighting with `score` in place
/// of the treatment probability.
pub fn ipw_limit(spec: &PopulationSpec, mech: &Mechanism, score: &BTreeMap<u32, f64>) -> Result<f64, DesignError> {
    for x in spec.covariate_levels() {
        match score.get(&x) {
            Some(s) if *s > 0.0 && *s < 1.0 => {}
            Some(s) => return Err(DesignError::InvalidMechanism(format!("score {s} at x={x} outside (0, 1)"))),
            None => return Err(DesignError::ZeroMassCovariate(x)),
        }
    }
    let table = joint_distribution(spec, mech)?;
    Ok(table.expect(|l, w| {
        let s = score[&l.x];
        if w {
            l.y1 / s
        } else {
            -l.y0 / (1.0 - s)
        }
    }))
}

/// Every classification and limit for one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub mechanism: String,
    pub dependence: Dependence,
    pub randomized: bool,
    pub gamma: f64,
    pub positivity: bool,
    pub overlap: bool,
    pub unconditionally_unconfounded: Verdict,
    pub conditionally_unconfounded: Verdict,
    pub ate: f64,
    pub propensity_by_x: BTreeMap<u32, f64>,
    pub unconditional_propensity: f64,
    /// Distinct unit-level treatment probabilities over positive-weight strata.
    pub treatment_probabilities: Vec<f64>,
    pub dim_limit: Option<f64>,
    pub ht_normalized_variance: Option<f64>,
    /// Reason for each field reported as null.
    pub undefined: BTreeMap<String, String>,
}

pub fn build_report(spec: &PopulationSpec, mech: &Mechanism) -> Result<DesignReport, DesignError> {
    mech.validate_for(spec)?;
    let table = joint_distribution(spec, mech)?;
    let (randomized, gamma) = mech.is_randomized(spec)?;
    let positivity = require_positivity(spec, mech).is_ok();
    let propensity_by_x = propensity_by_x(spec, mech)?;
    let overlap = propensity_by_x.values().all(|&s| s > 0.0 && s < 1.0);

    let mut treatment_probabilities: Vec<f64> = spec
        .positive()
        .map(|(_, l, _)| mech.treatment_probability(l))
        .collect::<Result<_, _>>()?;
    treatment_probabilities.sort_by(f64::total_cmp);
    treatment_probabilities.dedup();

    let mut undefined = BTreeMap::new();
    let unconditionally_unconfounded = unconfounded_from(&table, spec, false);
    if unconditionally_unconfounded == Verdict::Undefined {
        undefined.insert(
            "unconditionally_unconfounded".into(),
            "one treatment arm has zero probability".into(),
        );
    }
    let conditionally_unconfounded = unconfounded_from(&table, spec, true);
    if conditionally_unconfounded == Verdict::Undefined {
        undefined.insert(
            "conditionally_unconfounded".into(),
            "some covariate level has a treatment arm with zero probability".into(),
        );
    }
    let dim = dim_limit(spec, mech)
        .map_err(|e| undefined.insert("dim_limit".into(), e.to_string()))
        .ok();
    let ht = ht_normalized_variance(spec, mech)
        .map_err(|e| undefined.insert("ht_normalized_variance".into(), e.to_string()))
        .ok();

    Ok(DesignReport {
        mechanism: mech.kind().name().to_string(),
        dependence: mech.dependence(),
        randomized,
        gamma,
        positivity,
        overlap,
        unconditionally_unconfounded,
        conditionally_unconfounded,
        ate: spec.ate(),
        propensity_by_x,
        unconditional_propensity: table.treated_share(),
        treatment_probabilities,
        dim_limit: dim,
        ht_normalized_variance: ht,
        undefined,
    })
}
