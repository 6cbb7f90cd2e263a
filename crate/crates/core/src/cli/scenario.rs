//! Built-in scenarios and the claims each one checks.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assignment::{outcome_dependent, treat_by_unobserved, Mechanism};
use crate::estimators::EstimatorId;
use crate::montecarlo::{self, Design, McError, McResult, Sampling};
use crate::oracle::{self, DesignReport, Verdict, EXACT_TOL};
use crate::population::{make_paper_population, make_proportional_population, PopulationSpec};

use super::CliError;

/// Mean checks are made at this many standard errors.
const Z_MAX: f64 = 5.0;
/// Relative tolerance for normalized variances against their targets.
const VAR_REL_TOL: f64 = 0.10;
/// Relative tolerance for the gap between two normalized variances.
const GAP_REL_TOL: f64 = 0.15;
/// Accepted range of the variance ratio between the smallest and largest
/// probe size under the global coin.
const COIN_RATIO_RANGE: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    S3ConfoundedRandom,
    S4DeterministicUnconfounded,
    S5Constant,
    S5Covariate,
    S5GlobalCoin,
    S6ProportionalVsConstant,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::S3ConfoundedRandom,
        Scenario::S4DeterministicUnconfounded,
        Scenario::S5Constant,
        Scenario::S5Covariate,
        Scenario::S5GlobalCoin,
        Scenario::S6ProportionalVsConstant,
        Scenario::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::S3ConfoundedRandom => "s3_confounded_random",
            Scenario::S4DeterministicUnconfounded => "s4_deterministic_unconfounded",
            Scenario::S5Constant => "s5_constant",
            Scenario::S5Covariate => "s5_covariate",
            Scenario::S5GlobalCoin => "s5_global_coin",
            Scenario::S6ProportionalVsConstant => "s6_proportional_vs_constant",
            Scenario::Custom => "custom",
        }
    }

    /// `(n, replications)` used when not given on the command line.
    pub fn default_size(self) -> (usize, usize) {
        match self {
            Scenario::S3ConfoundedRandom | Scenario::S5GlobalCoin => (10_000, 1_000),
            Scenario::S6ProportionalVsConstant => (1_000, 4_000),
            _ => (1_000, 1_000),
        }
    }

    fn default_estimators(self) -> Vec<EstimatorId> {
        use EstimatorId::*;
        match self {
            Scenario::S3ConfoundedRandom => vec![DiffInMeans, HorvitzThompson],
            Scenario::S4DeterministicUnconfounded => vec![DiffInMeans],
            Scenario::S5Constant => vec![DiffInMeans, HorvitzThompson, Hajek],
            Scenario::S5Covariate => vec![IpwTrueScore, HorvitzThompson],
            Scenario::S5GlobalCoin => vec![DiffInMeans, HorvitzThompson],
            Scenario::S6ProportionalVsConstant => vec![HorvitzThompson],
            Scenario::Custom => vec![DiffInMeans, HorvitzThompson],
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|c| c.as_str()).collect();
                format!("unknown scenario {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingChoice {
    Iid,
    FixedCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub population: Option<PathBuf>,
    pub mechanism: Option<PathBuf>,
    pub n: usize,
    pub replications: usize,
    pub master_seed: u64,
    /// `None` selects the scenario defaults.
    pub estimators: Option<Vec<EstimatorId>>,
    pub sampling: SamplingChoice,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ScenarioConfig {
    /// A built-in scenario at its default sizes and seed 42.
    pub fn builtin(scenario: Scenario) -> Self {
        let (n, replications) = scenario.default_size();
        Self {
            scenario,
            population: None,
            mechanism: None,
            n,
            replications,
            master_seed: 42,
            estimators: None,
            sampling: SamplingChoice::Iid,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let custom = self.scenario == Scenario::Custom;
        let files = (self.population.is_some(), self.mechanism.is_some());
        if custom && files != (true, true) {
            return Err(CliError::Config("custom scenario needs --population and --mechanism".into()));
        }
        if !custom && (files.0 || files.1) {
            return Err(CliError::Config(format!(
                "built-in scenario {} does not take --population or --mechanism",
                self.scenario
            )));
        }
        if self.n < 2 {
            return Err(CliError::Config(format!("--n must be at least 2, got {}", self.n)));
        }
        if self.replications < 2 {
            return Err(CliError::Config(format!("--reps must be at least 2, got {}", self.replications)));
        }
        if self.sampling == SamplingChoice::FixedCounts
            && !matches!(self.scenario, Scenario::S6ProportionalVsConstant | Scenario::Custom)
        {
            return Err(CliError::Config(format!(
                "fixed_counts sampling is only available for s6_proportional_vs_constant and custom, not {}",
                self.scenario
            )));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        Ok(())
    }

    fn sampling(&self) -> Sampling {
        match self.sampling {
            SamplingChoice::Iid => Sampling::Iid { n: self.n },
            SamplingChoice::FixedCounts => Sampling::FixedCounts {
                treated: self.n / 2,
                control: self.n - self.n / 2,
            },
        }
    }
}

/// One estimator's outcome: a summary, or the reason every replication failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EstimatorRun {
    Summary(McResult),
    Failed {
        estimator_id: EstimatorId,
        replications: usize,
        failures: usize,
        error: String,
    },
}

impl EstimatorRun {
    pub fn summary(&self) -> Option<&McResult> {
        match self {
            EstimatorRun::Summary(r) => Some(r),
            EstimatorRun::Failed { .. } => None,
        }
    }

    pub fn estimator_id(&self) -> EstimatorId {
        match self {
            EstimatorRun::Summary(r) => r.estimator_id,
            EstimatorRun::Failed { estimator_id, .. } => *estimator_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSection {
    pub label: String,
    pub report: DesignReport,
    pub results: Vec<EstimatorRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSection {
    pub label: String,
    pub estimator_id: EstimatorId,
    pub results: Vec<McResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub n: usize,
    pub replications: usize,
    pub master_seed: u64,
    pub sampling: SamplingChoice,
    pub designs: Vec<DesignSection>,
    pub probes: Vec<ProbeSection>,
    pub claims: Vec<Claim>,
}

impl RunReport {
    pub fn all_claims_pass(&self) -> bool {
        self.claims.iter().all(|c| c.passed)
    }

    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }
}

struct Runner<'a> {
    cfg: &'a ScenarioConfig,
    estimators: Vec<EstimatorId>,
    explicit: bool,
}

impl Runner<'_> {
    fn experiment(&self, design: &Design, est: EstimatorId) -> Result<McResult, McError> {
        let run = || montecarlo::run_experiment(design, est, self.cfg.replications, self.cfg.master_seed);
        match self.cfg.threads {
            Some(t) => montecarlo::run_experiment_with_threads(
                design,
                est,
                self.cfg.replications,
                self.cfg.master_seed,
                t,
            ),
            None => run(),
        }
    }

    fn section(&self, label: &str, pop: &PopulationSpec, mech: &Mechanism) -> Result<DesignSection, CliError> {
        let report = oracle::build_report(pop, mech).map_err(|e| CliError::Design(e.to_string()))?;
        let design = Design::new(pop.clone(), mech.clone(), self.cfg.sampling())
            .map_err(|e| CliError::Design(e.to_string()))?;
        let sim = montecarlo::Simulator::new(&design).map_err(|e| CliError::Design(e.to_string()))?;
        let mut results = Vec::new();
        for &est in &self.estimators {
            if let Err(e) = sim.check_estimator(est) {
                if self.explicit {
                    return Err(CliError::Design(format!("{label}: estimator {est}: {e}")));
                }
                continue;
            }
            let run = match self.experiment(&design, est) {
                Ok(r) => EstimatorRun::Summary(r),
                Err(e @ (McError::AllFailed { .. } | McError::TooFewSuccesses { .. })) => {
                    let failures = match e {
                        McError::AllFailed { replications } => replications,
                        McError::TooFewSuccesses { successes, replications } => replications - successes,
                        _ => unreachable!(),
                    };
                    EstimatorRun::Failed {
                        estimator_id: est,
                        replications: self.cfg.replications,
                        failures,
                        error: e.to_string(),
                    }
                }
                Err(e) => return Err(CliError::Design(format!("{label}: estimator {est}: {e}"))),
            };
            results.push(run);
        }
        Ok(DesignSection { label: label.to_string(), report, results })
    }
}

fn find(section: &DesignSection, est: EstimatorId) -> Option<&EstimatorRun> {
    section.results.iter().find(|r| r.estimator_id() == est)
}

fn claim(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Claim {
    Claim { name: name.into(), passed, detail: detail.into() }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= EXACT_TOL
}

fn within_rel(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol * target.abs()
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "true",
        Verdict::Fails => "false",
        Verdict::Undefined => "undefined",
    }
}

fn mean_claim(claims: &mut Vec<Claim>, section: &DesignSection, est: EstimatorId, target: f64, what: &str) {
    if let Some(r) = find(section, est).and_then(EstimatorRun::summary) {
        let z = r.z_score(target);
        claims.push(claim(
            format!("{est} mean matches {what} {target}"),
            z.abs() < Z_MAX,
            format!("mean {} (se {}), z = {z:.3}", r.mean, r.std_error_of_mean),
        ));
    }
}

fn report_claims(claims: &mut Vec<Claim>, r: &DesignReport, randomized: bool, unconfounded: Verdict) {
    claims.push(claim(
        format!("randomized = {randomized}"),
        r.randomized == randomized,
        format!("randomized {} (gamma {})", r.randomized, r.gamma),
    ));
    claims.push(claim(
        format!("unconfounded = {}", verdict_str(unconfounded)),
        r.unconditionally_unconfounded == unconfounded,
        format!(
            "unconditional {}, conditional {}",
            verdict_str(r.unconditionally_unconfounded),
            verdict_str(r.conditionally_unconfounded)
        ),
    ));
}

fn load<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        let msg = if e.line() == 0 {
            format!("{}: {e} (document at lines 1-{})", path.display(), text.lines().count().max(1))
        } else {
            format!("{}: {e}", path.display())
        };
        CliError::Config(msg)
    })
}

/// Loads and validates a population file.
pub fn load_population(path: &PathBuf) -> Result<PopulationSpec, CliError> {
    load(path)
}

/// Loads and validates a mechanism file.
pub fn load_mechanism(path: &PathBuf) -> Result<Mechanism, CliError> {
    load(path)
}

/// Runs a scenario. Claim failures are reported in the returned report, not
/// as errors.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let explicit = cfg.estimators.is_some();
    let runner = Runner {
        cfg,
        estimators: cfg.estimators.clone().unwrap_or_else(|| cfg.scenario.default_estimators()),
        explicit,
    };
    let mut designs = Vec::new();
    let mut probes = Vec::new();
    let mut claims = Vec::new();
    let base = make_paper_population();

    match cfg.scenario {
        Scenario::S3ConfoundedRandom => {
            let mech = outcome_dependent(&base);
            let s = runner.section("outcome-dependent random assignment, p = (3 - y1)/4", &base, &mech)?;
            let r = &s.report;
            report_claims(&mut claims, r, true, Verdict::Fails);
            claims.push(claim(
                "conditioning on x leaves the design confounded",
                r.conditionally_unconfounded == Verdict::Fails,
                format!("conditional {}", verdict_str(r.conditionally_unconfounded)),
            ));
            let five_eighths = 5.0 / 8.0;
            claims.push(claim(
                "propensity score is 5/8 at every x",
                r.propensity_by_x.values().all(|&s| close(s, five_eighths)),
                format!("{:?}", r.propensity_by_x),
            ));
            claims.push(claim(
                "propensity 5/8 is not a treatment probability",
                !r.treatment_probabilities.contains(&five_eighths)
                    && r.treatment_probabilities == [0.5, 0.75],
                format!("treatment probabilities {:?}", r.treatment_probabilities),
            ));
            let dim = r.dim_limit.unwrap_or(f64::NAN);
            claims.push(claim(
                "DiM limit 0.4 != ATE 0.5",
                close(dim, 0.4) && close(r.ate, 0.5),
                format!("DiM limit {dim}, ATE {}", r.ate),
            ));
            if let Some(m) = find(&s, EstimatorId::DiffInMeans).and_then(EstimatorRun::summary) {
                let (z_limit, z_ate) = (m.z_score(0.4), m.z_score(0.5));
                claims.push(claim(
                    "dim concentrates at 0.4, away from ATE 0.5",
                    z_limit.abs() < Z_MAX && z_ate.abs() > Z_MAX,
                    format!("mean {}, z(0.4) = {z_limit:.3}, z(0.5) = {z_ate:.3}", m.mean),
                ));
            }
            mean_claim(&mut claims, &s, EstimatorId::HorvitzThompson, 0.5, "ATE");
            designs.push(s);
        }
        Scenario::S4DeterministicUnconfounded => {
            let mech = treat_by_unobserved(&base);
            let s = runner.section("deterministic assignment, w = u", &base, &mech)?;
            let r = &s.report;
            report_claims(&mut claims, r, false, Verdict::Holds);
            claims.push(claim(
                "overlap without positivity",
                r.overlap && !r.positivity,
                format!("overlap {}, positivity {}", r.overlap, r.positivity),
            ));
            claims.push(claim(
                "propensity score is 1/2 at every x",
                r.propensity_by_x.values().all(|&s| close(s, 0.5)) && close(r.unconditional_propensity, 0.5),
                format!("{:?}", r.propensity_by_x),
            ));
            let dim = r.dim_limit.unwrap_or(f64::NAN);
            claims.push(claim(
                "DiM limit equals ATE 0.5",
                close(dim, 0.5) && close(r.ate, 0.5),
                format!("DiM limit {dim}, ATE {}", r.ate),
            ));
            mean_claim(&mut claims, &s, EstimatorId::DiffInMeans, 0.5, "ATE");
            designs.push(s);
        }
        Scenario::S5Constant => {
            let p = 0.5;
            let mech = Mechanism::constant(p).expect("valid probability");
            let s = runner.section("constant probability 1/2", &base, &mech)?;
            let r = &s.report;
            report_claims(&mut claims, r, true, Verdict::Holds);
            claims.push(claim(
                "propensity equals the treatment probability",
                r.propensity_by_x.values().all(|&s| close(s, p)) && close(r.unconditional_propensity, p),
                format!("{:?}", r.propensity_by_x),
            ));
            for est in [EstimatorId::DiffInMeans, EstimatorId::HorvitzThompson, EstimatorId::Hajek] {
                mean_claim(&mut claims, &s, est, r.ate, "ATE");
            }
            designs.push(s);
        }
        Scenario::S5Covariate => {
            let f = BTreeMap::from([(0u32, 0.25), (1u32, 0.75)]);
            let mech = Mechanism::covariate_fn(f.clone()).expect("valid table");
            let s = runner.section("covariate-driven probability f(0) = 1/4, f(1) = 3/4", &base, &mech)?;
            let r = &s.report;
            report_claims(&mut claims, r, true, Verdict::Holds);
            claims.push(claim(
                "conditionally unconfounded given x",
                r.conditionally_unconfounded == Verdict::Holds,
                verdict_str(r.conditionally_unconfounded),
            ));
            claims.push(claim(
                "propensity equals f(x)",
                f.iter().all(|(x, p)| r.propensity_by_x.get(x).is_some_and(|s| close(*s, *p))),
                format!("{:?}", r.propensity_by_x),
            ));
            for est in [EstimatorId::IpwTrueScore, EstimatorId::HorvitzThompson] {
                mean_claim(&mut claims, &s, est, r.ate, "ATE");
            }
            designs.push(s);
        }
        Scenario::S5GlobalCoin => {
            let mech = Mechanism::global_coin(0.5).expect("valid probability");
            let s = runner.section("one fair coin for all units", &base, &mech)?;
            let r = &s.report;
            report_claims(&mut claims, r, true, Verdict::Holds);
            claims.push(claim(
                "overlap holds with propensity 1/2",
                r.overlap && r.propensity_by_x.values().all(|&s| close(s, 0.5)),
                format!("{:?}", r.propensity_by_x),
            ));
            if let Some(run) = find(&s, EstimatorId::DiffInMeans) {
                let (failures, reps) = match run {
                    EstimatorRun::Summary(m) => (m.failures, m.replications),
                    EstimatorRun::Failed { failures, replications, .. } => (*failures, *replications),
                };
                claims.push(claim(
                    "dim fails with an empty arm on every replication",
                    failures == reps,
                    format!("{failures} of {reps} replications failed"),
                ));
            }
            if runner.estimators.contains(&EstimatorId::HorvitzThompson) {
                let small = (cfg.n / 100).max(2);
                let sizes = if small < cfg.n { vec![small, cfg.n] } else { vec![cfg.n] };
                let probe = montecarlo::variance_scaling_probe(
                    |n| Design::iid(base.clone(), mech.clone(), n),
                    EstimatorId::HorvitzThompson,
                    &sizes,
                    cfg.replications,
                    cfg.master_seed,
                )
                .map_err(|e| CliError::Design(e.to_string()))?;
                let results: Vec<McResult> = probe.into_values().collect();
                if let [first, .., last] = results.as_slice() {
                    let ratio = first.variance / last.variance;
                    claims.push(claim(
                        "ht variance does not shrink with n",
                        (COIN_RATIO_RANGE.0..=COIN_RATIO_RANGE.1).contains(&ratio),
                        format!(
                            "variance {} at n={}, {} at n={}, ratio {ratio:.4}",
                            first.variance, first.n, last.variance, last.n
                        ),
                    ));
                }
                probes.push(ProbeSection {
                    label: "ht variance across sample sizes".into(),
                    estimator_id: EstimatorId::HorvitzThompson,
                    results,
                });
            }
            designs.push(s);
        }
        Scenario::S6ProportionalVsConstant => {
            let pop = make_proportional_population();
            let prop = Mechanism::outcome_proportional(&pop).expect("population satisfies 0 < y1 < 2m");
            let half = Mechanism::constant(0.5).expect("valid probability");
            let a = runner.section("outcome-proportional, p = y1 / (2 E[Y(1)])", &pop, &prop)?;
            let b = runner.section("constant probability 1/2", &pop, &half)?;
            let (mean, var) = (pop.mean_y1(), pop.var_y1());
            let ey2 = pop.expect(|l| l.y1 * l.y1);
            let (v1, v2) = (
                a.report.ht_normalized_variance.unwrap_or(f64::NAN),
                b.report.ht_normalized_variance.unwrap_or(f64::NAN),
            );
            claims.push(claim(
                "oracle: proportional design has n Var = E[Y(1)]^2",
                close(v1, mean * mean),
                format!("{v1} vs {}", mean * mean),
            ));
            claims.push(claim(
                "oracle: constant design has n Var = Var(Y(1)) + E[Y(1)^2]",
                close(v2, var + ey2),
                format!("{v2} vs {}", var + ey2),
            ));
            claims.push(claim(
                "oracle: variance gap equals 2 Var(Y(1))",
                close(v2 - v1, 2.0 * var),
                format!("{} vs {}", v2 - v1, 2.0 * var),
            ));
            let ht_a = find(&a, EstimatorId::HorvitzThompson).and_then(EstimatorRun::summary);
            let ht_b = find(&b, EstimatorId::HorvitzThompson).and_then(EstimatorRun::summary);
            if let (Some(ra), Some(rb)) = (ht_a, ht_b) {
                match cfg.sampling {
                    SamplingChoice::Iid => {
                        claims.push(claim(
                            "proportional design: empirical n Var within 10% of oracle",
                            within_rel(ra.normalized_variance, v1, VAR_REL_TOL),
                            format!("{} vs {v1}", ra.normalized_variance),
                        ));
                        claims.push(claim(
                            "constant design: empirical n Var within 10% of oracle",
                            within_rel(rb.normalized_variance, v2, VAR_REL_TOL),
                            format!("{} vs {v2}", rb.normalized_variance),
                        ));
                        let gap = rb.normalized_variance - ra.normalized_variance;
                        claims.push(claim(
                            "empirical variance gap within 15% of 2 Var(Y(1))",
                            within_rel(gap, 2.0 * var, GAP_REL_TOL),
                            format!("{gap} vs {}", 2.0 * var),
                        ));
                    }
                    SamplingChoice::FixedCounts => {
                        claims.push(claim(
                            "fixed counts: proportional design estimates without error",
                            ra.variance == 0.0 && close(ra.mean, pop.ate()),
                            format!("mean {}, variance {}", ra.mean, ra.variance),
                        ));
                        claims.push(claim(
                            "fixed counts: constant design n Var within 10% of 2 Var(Y(1))",
                            within_rel(rb.normalized_variance, 2.0 * var, VAR_REL_TOL),
                            format!("{} vs {}", rb.normalized_variance, 2.0 * var),
                        ));
                    }
                }
            }
            designs.push(a);
            designs.push(b);
        }
        Scenario::Custom => {
            let pop = load_population(cfg.population.as_ref().expect("validated"))?;
            let mech = load_mechanism(cfg.mechanism.as_ref().expect("validated"))?;
            designs.push(runner.section("custom design", &pop, &mech)?);
        }
    }

    Ok(RunReport {
        scenario: cfg.scenario,
        n: cfg.n,
        replications: cfg.replications,
        master_seed: cfg.master_seed,
        sampling: cfg.sampling,
        designs,
        probes,
        claims,
    })
}
