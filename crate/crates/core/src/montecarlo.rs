//! Replicated experiments: sample, assign, estimate, summarize.
//!
//! Replication `i` of an experiment with master seed `s` always draws from
//! the ChaCha8 stream `(s, i)`, so results do not depend on how replications
//! are scheduled across threads. Moments are reduced in replication order.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{draw, Dependence, Mechanism, MechanismKind};
use crate::error::DesignError;
use crate::estimators::{self, Arm, EstimateError, EstimatorId, Sample};
use crate::oracle;
use crate::population::{Latents, PopulationSpec, SampleObservation, StratumSampler};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error(transparent)]
    Design(#[from] DesignError),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("sample has no {0} observations")]
    EmptyArm(Arm),

    #[error(transparent)]
    Estimate(EstimateError),

    #[error("all {replications} replications failed with an empty arm")]
    AllFailed { replications: usize },

    #[error("only {successes} of {replications} replications succeeded; need at least 2 for a variance")]
    TooFewSuccesses { successes: usize, replications: usize },

    #[error("need at least 2 replications, got {0}")]
    TooFewReplications(usize),

    #[error("probe sizes must be strictly increasing")]
    SizesNotIncreasing,

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

impl From<EstimateError> for McError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::EmptyArm(arm) => McError::EmptyArm(arm),
            other => McError::Estimate(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `n` units drawn i.i.d. from the population, then assigned.
    Iid { n: usize },
    /// Exactly `treated` draws from the law given `W = 1` and `control`
    /// draws from the law given `W = 0`.
    FixedCounts { treated: usize, control: usize },
}

impl Sampling {
    pub fn sample_size(&self) -> usize {
        match *self {
            Sampling::Iid { n } => n,
            Sampling::FixedCounts { treated, control } => treated + control,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub population: PopulationSpec,
    pub mechanism: Mechanism,
    pub sampling: Sampling,
}

impl Design {
    pub fn new(population: PopulationSpec, mechanism: Mechanism, sampling: Sampling) -> Result<Self, McError> {
        mechanism.validate_for(&population)?;
        match sampling {
            Sampling::Iid { n } if n < 2 => {
                return Err(McError::InvalidDesign(format!("i.i.d. sampling needs n >= 2, got {n}")))
            }
            Sampling::FixedCounts { treated, control } if treated == 0 || control == 0 => {
                return Err(McError::InvalidDesign("fixed counts need at least one unit per arm".into()))
            }
            Sampling::FixedCounts { .. } => {
                let share = oracle::joint_distribution(&population, &mechanism)?.treated_share();
                if !(share > 0.0 && share < 1.0) {
                    return Err(McError::InvalidDesign(format!(
                        "fixed counts need both arms to have positive probability, Pr(W=1) = {share}"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { population, mechanism, sampling })
    }

    pub fn iid(population: PopulationSpec, mechanism: Mechanism, n: usize) -> Result<Self, McError> {
        Self::new(population, mechanism, Sampling::Iid { n })
    }

    pub fn fixed_counts(
        population: PopulationSpec,
        mechanism: Mechanism,
        treated: usize,
        control: usize,
    ) -> Result<Self, McError> {
        Self::new(population, mechanism, Sampling::FixedCounts { treated, control })
    }

    pub fn sample_size(&self) -> usize {
        self.sampling.sample_size()
    }
}

/// The stream for replication `index` of an experiment seeded with `master_seed`.
pub fn replication_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

enum Draws {
    Iid(StratumSampler),
    Fixed {
        treated: StratumSampler,
        control: StratumSampler,
    },
}

/// A design with its per-stratum quantities precomputed.
pub struct Simulator {
    sampling: Sampling,
    latents: Vec<Latents>,
    probs: Vec<f64>,
    deterministic: bool,
    coin: Option<f64>,
    draws: Draws,
    positivity: Result<(), DesignError>,
    true_score: Result<BTreeMap<u32, f64>, DesignError>,
}

impl Simulator {
    pub fn new(design: &Design) -> Result<Self, McError> {
        let pop = &design.population;
        let mech = &design.mechanism;
        let probs = mech.stratum_probabilities(pop)?;
        let draws = match design.sampling {
            Sampling::Iid { .. } => Draws::Iid(StratumSampler::new(pop.weights())),
            Sampling::FixedCounts { .. } => {
                let table = oracle::joint_distribution(pop, mech)?;
                let mut treated = vec![0.0; pop.len()];
                let mut control = vec![0.0; pop.len()];
                for e in table.marginal() {
                    let arm = if e.w { &mut treated } else { &mut control };
                    arm[e.stratum] += e.prob;
                }
                Draws::Fixed {
                    treated: StratumSampler::new(&treated),
                    control: StratumSampler::new(&control),
                }
            }
        };
        let positivity = pop
            .positive()
            .find(|&(i, _, _)| !(probs[i] > 0.0 && probs[i] < 1.0))
            .map_or(Ok(()), |(index, _, _)| Err(DesignError::Positivity { index, p: probs[index] }));
        let true_score = oracle::propensity_by_x(pop, mech);
        let coin = match (mech.dependence(), mech.kind()) {
            (Dependence::SharedGlobalDraw, MechanismKind::GlobalCoin { p }) => Some(*p),
            _ => None,
        };
        Ok(Self {
            sampling: design.sampling,
            latents: pop.strata().iter().map(|s| s.latents).collect(),
            probs,
            deterministic: mech.is_deterministic(),
            coin,
            draws,
            positivity,
            true_score,
        })
    }

    pub fn sample_size(&self) -> usize {
        self.sampling.sample_size()
    }

    /// Errors that would abort every replication of `estimator`.
    pub fn check_estimator(&self, estimator: EstimatorId) -> Result<(), McError> {
        match estimator {
            EstimatorId::HorvitzThompson | EstimatorId::Hajek => self.positivity.clone().map_err(Into::into),
            EstimatorId::IpwTrueScore => {
                let score = self.true_score.as_ref().map_err(|e| McError::Design(e.clone()))?;
                match score.iter().find(|(_, s)| !(**s > 0.0 && **s < 1.0)) {
                    Some((&x, &s)) => Err(McError::Estimate(EstimateError::Score {
                        x,
                        reason: format!("true propensity {s} is outside (0, 1)"),
                    })),
                    None => Ok(()),
                }
            }
            EstimatorId::DiffInMeans | EstimatorId::IpwEstimatedScore => Ok(()),
        }
    }

    fn observe(&self, stratum: usize, w: bool) -> SampleObservation {
        SampleObservation::new(self.latents[stratum], self.probs[stratum], w)
    }

    fn treat<R: Rng + ?Sized>(&self, stratum: usize, rng: &mut R) -> bool {
        let p = self.probs[stratum];
        if self.deterministic {
            p == 1.0
        } else {
            draw(p, rng)
        }
    }

    /// Draws one realized sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        let obs = match (&self.draws, self.sampling) {
            (Draws::Iid(strata), Sampling::Iid { n }) => match self.coin {
                Some(p) => {
                    let w = draw(p, rng);
                    (0..n)
                        .map(|_| {
                            let s = strata.draw(rng);
                            self.observe(s, w)
                        })
                        .collect()
                }
                None => (0..n)
                    .map(|_| {
                        let s = strata.draw(rng);
                        let w = self.treat(s, rng);
                        self.observe(s, w)
                    })
                    .collect(),
            },
            (Draws::Fixed { treated: t, control: c }, Sampling::FixedCounts { treated, control }) => {
                let mut obs = Vec::with_capacity(treated + control);
                obs.extend((0..treated).map(|_| self.observe(t.draw(rng), true)));
                obs.extend((0..control).map(|_| self.observe(c.draw(rng), false)));
                obs
            }
            _ => unreachable!("draws are built from the sampling scheme"),
        };
        Sample::new(obs).expect("sample size is at least 2")
    }

    /// One replication: sample, assign, estimate.
    pub fn replicate<R: Rng + ?Sized>(&self, estimator: EstimatorId, rng: &mut R) -> Result<f64, McError> {
        let s = self.sample(rng);
        let value = match estimator {
            EstimatorId::DiffInMeans => estimators::diff_in_means(&s)?,
            EstimatorId::HorvitzThompson => estimators::horvitz_thompson(&s)?,
            EstimatorId::Hajek => estimators::hajek(&s)?,
            EstimatorId::IpwTrueScore => {
                let score = self.true_score.as_ref().map_err(|e| McError::Design(e.clone()))?;
                estimators::ipw_propensity(&s, score)?
            }
            EstimatorId::IpwEstimatedScore => {
                let score = estimators::estimate_propensity(&s);
                // A level seen in only one arm is an empty arm within that level.
                if let Some(&share) = score.values().find(|&&v| v == 0.0 || v == 1.0) {
                    return Err(McError::EmptyArm(if share == 0.0 { Arm::Treated } else { Arm::Control }));
                }
                estimators::ipw_propensity(&s, &score)?
            }
        };
        Ok(value)
    }
}

/// One replication of `design` with the given stream. `McError::EmptyArm`
/// is the only failure that depends on the draw.
pub fn run_replication<R: Rng + ?Sized>(design: &Design, estimator: EstimatorId, rng: &mut R) -> Result<f64, McError> {
    let sim = Simulator::new(design)?;
    sim.check_estimator(estimator)?;
    sim.replicate(estimator, rng)
}

/// Summary of a replicated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub estimator_id: EstimatorId,
    /// Units per replication.
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    pub mean: f64,
    pub variance: f64,
    pub normalized_variance: f64,
    pub std_error_of_mean: f64,
    pub master_seed: u64,
}

pub const CSV_HEADER: &str = "estimator_id,n,R,failures,mean,variance,normalized_variance,se,seed";

impl McResult {
    pub fn successes(&self) -> usize {
        self.replications - self.failures
    }

    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / self.replications as f64
    }

    /// Number of standard errors between the mean and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_error_of_mean
    }

    /// One CSV record in `CSV_HEADER` column order, without a line break.
    pub fn to_csv_row(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record([
            self.estimator_id.as_str().to_string(),
            self.n.to_string(),
            self.replications.to_string(),
            self.failures.to_string(),
            self.mean.to_string(),
            self.variance.to_string(),
            self.normalized_variance.to_string(),
            self.std_error_of_mean.to_string(),
            self.master_seed.to_string(),
        ])
        .expect("writing to memory");
        let bytes = w.into_inner().expect("flushing to memory");
        String::from_utf8(bytes).expect("csv output is utf-8").trim_end().to_string()
    }
}

/// Runs every replication and returns the raw outcomes in replication order.
pub fn run_replications(
    design: &Design,
    estimator: EstimatorId,
    replications: usize,
    master_seed: u64,
) -> Result<Vec<Result<f64, Arm>>, McError> {
    let sim = Simulator::new(design)?;
    sim.check_estimator(estimator)?;
    (0..replications)
        .into_par_iter()
        .map(|i| {
            let mut rng = replication_rng(master_seed, i as u64);
            match sim.replicate(estimator, &mut rng) {
                Ok(v) => Ok(Ok(v)),
                Err(McError::EmptyArm(arm)) => Ok(Err(arm)),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Replicates `design` `replications` times on the current rayon pool.
pub fn run_experiment(
    design: &Design,
    estimator: EstimatorId,
    replications: usize,
    master_seed: u64,
) -> Result<McResult, McError> {
    if replications < 2 {
        return Err(McError::TooFewReplications(replications));
    }
    let outcomes = run_replications(design, estimator, replications, master_seed)?;
    let values: Vec<f64> = outcomes.iter().filter_map(|o| o.ok()).collect();
    let failures = replications - values.len();
    if values.is_empty() {
        return Err(McError::AllFailed { replications });
    }
    if values.len() < 2 {
        return Err(McError::TooFewSuccesses { successes: values.len(), replications });
    }
    let (mean, variance) = mean_and_variance(&values);
    let n = design.sample_size();
    Ok(McResult {
        estimator_id: estimator,
        n,
        replications,
        failures,
        mean,
        variance,
        normalized_variance: n as f64 * variance,
        std_error_of_mean: (variance / values.len() as f64).sqrt(),
        master_seed,
    })
}

/// As [`run_experiment`], on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(
    design: &Design,
    estimator: EstimatorId,
    replications: usize,
    master_seed: u64,
    threads: usize,
) -> Result<McResult, McError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| McError::ThreadPool(e.to_string()))?;
    pool.install(|| run_experiment(design, estimator, replications, master_seed))
}

/// Neumaier-compensated mean and two-pass sample variance.
fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / k;
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, ss / (k - 1.0))
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Runs the same experiment at each sample size in `sizes`.
pub fn variance_scaling_probe(
    family: impl Fn(usize) -> Result<Design, McError>,
    estimator: EstimatorId,
    sizes: &[usize],
    replications: usize,
    master_seed: u64,
) -> Result<BTreeMap<usize, McResult>, McError> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(McError::SizesNotIncreasing);
    }
    sizes
        .iter()
        .map(|&n| Ok((n, run_experiment(&family(n)?, estimator, replications, master_seed)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{outcome_dependent, treat_by_unobserved};
    use crate::population::{make_paper_population, make_proportional_population};

    #[test]
    fn design_validation() {
        let pop = make_paper_population();
        let half = Mechanism::constant(0.5).unwrap();
        assert!(Design::iid(pop.clone(), half.clone(), 1).is_err());
        assert!(Design::fixed_counts(pop.clone(), half.clone(), 0, 3).is_err());
        let all = Mechanism::deterministic(&pop, |_| true).unwrap();
        assert!(Design::fixed_counts(pop.clone(), all, 2, 2).is_err());
        assert!(Design::fixed_counts(pop, half, 2, 2).is_ok());
    }

    #[test]
    fn global_coin_dim_always_fails() {
        let pop = make_paper_population();
        let d = Design::iid(pop, Mechanism::global_coin(0.5).unwrap(), 50).unwrap();
        for i in 0..20 {
            let r = run_replication(&d, EstimatorId::DiffInMeans, &mut replication_rng(1, i));
            assert!(matches!(r, Err(McError::EmptyArm(_))));
        }
        assert_eq!(
            run_experiment(&d, EstimatorId::DiffInMeans, 20, 1).unwrap_err(),
            McError::AllFailed { replications: 20 }
        );
    }

    #[test]
    fn fixed_counts_proportional_ht_is_exact() {
        let pop = make_proportional_population();
        let mech = Mechanism::outcome_proportional(&pop).unwrap();
        let d = Design::fixed_counts(pop, mech, 50, 50).unwrap();
        for i in 0..50 {
            let v = run_replication(&d, EstimatorId::HorvitzThompson, &mut replication_rng(7, i)).unwrap();
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn replication_is_deterministic() {
        let pop = make_paper_population();
        let d = Design::iid(pop.clone(), outcome_dependent(&pop), 200).unwrap();
        let a = run_replication(&d, EstimatorId::HorvitzThompson, &mut replication_rng(5, 3)).unwrap();
        let b = run_replication(&d, EstimatorId::HorvitzThompson, &mut replication_rng(5, 3)).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let sim = Simulator::new(&d).unwrap();
        let s3 = sim.sample(&mut replication_rng(5, 3));
        assert_eq!(s3, sim.sample(&mut replication_rng(5, 3)));
        assert_ne!(s3, sim.sample(&mut replication_rng(5, 4)));
        assert_ne!(s3, sim.sample(&mut replication_rng(6, 3)));
    }

    #[test]
    fn positivity_violations_abort() {
        let pop = make_paper_population();
        let d = Design::iid(pop.clone(), treat_by_unobserved(&pop), 100).unwrap();
        assert!(matches!(
            run_experiment(&d, EstimatorId::HorvitzThompson, 10, 0),
            Err(McError::Design(DesignError::Positivity { .. }))
        ));
        assert!(run_experiment(&d, EstimatorId::DiffInMeans, 10, 0).is_ok());
    }

    #[test]
    fn too_few_replications() {
        let pop = make_paper_population();
        let d = Design::iid(pop, Mechanism::constant(0.5).unwrap(), 10).unwrap();
        assert_eq!(
            run_experiment(&d, EstimatorId::DiffInMeans, 1, 0).unwrap_err(),
            McError::TooFewReplications(1)
        );
    }

    #[test]
    fn probe_requires_increasing_sizes() {
        let pop = make_paper_population();
        let family = |n| Design::iid(pop.clone(), Mechanism::constant(0.5).unwrap(), n);
        assert_eq!(
            variance_scaling_probe(family, EstimatorId::HorvitzThompson, &[100, 100], 10, 0).unwrap_err(),
            McError::SizesNotIncreasing
        );
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v.into_iter()), 2.0);
    }

    #[test]
    fn csv_row_layout() {
        let r = McResult {
            estimator_id: EstimatorId::HorvitzThompson,
            n: 10,
            replications: 4,
            failures: 1,
            mean: 0.5,
            variance: 0.25,
            normalized_variance: 2.5,
            std_error_of_mean: 0.125,
            master_seed: 42,
        };
        assert_eq!(r.to_csv_row(), "ht,10,4,1,0.5,0.25,2.5,0.125,42");
        assert_eq!(CSV_HEADER.split(',').count(), 9);
    }

    #[test]
    fn estimated_score_on_small_sample_counts_failures() {
        let pop = make_paper_population();
        let d = Design::iid(pop.clone(), outcome_dependent(&pop), 4).unwrap();
        let r = run_experiment(&d, EstimatorId::IpwEstimatedScore, 400, 9).unwrap();
        assert!(r.failures > 0);
        assert_eq!(r.failures + r.successes(), 400);
    }
}
