//! Superpopulations represented as finite strata with exact rational weights.
//!
//! Every variable in scope is discrete, so a population is a finite list of
//! latent tuples `(y1, y0, x, u)` together with the share of units carrying
//! each tuple. Weights are kept as exact rationals so normalization can be
//! checked without rounding; everything downstream works in `f64`.

use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::DesignError;

/// The latent description of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latents {
    /// Potential outcome under treatment.
    pub y1: f64,
    /// Potential outcome under control.
    pub y0: f64,
    /// Observed covariate level.
    pub x: u32,
    /// Unobserved covariate level.
    pub u: u32,
}

impl Latents {
    pub fn new(y1: f64, y0: f64, x: u32, u: u32) -> Self {
        Self { y1, y0, x, u }
    }

    /// Tuple equality with `0.0 == -0.0`.
    pub fn same_tuple(&self, other: &Latents) -> bool {
        self.y1 == other.y1 && self.y0 == other.y0 && self.x == other.x && self.u == other.u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratum {
    pub latents: Latents,
    pub weight: BigRational,
}

impl Stratum {
    pub fn new(latents: Latents, weight: BigRational) -> Self {
        Self { latents, weight }
    }

    pub fn weight_f64(&self) -> f64 {
        self.weight.to_f64().unwrap_or(f64::NAN)
    }
}

/// A validated population: non-empty, unique tuples, non-negative weights
/// summing to exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PopulationDoc", into = "PopulationDoc")]
pub struct PopulationSpec {
    strata: Vec<Stratum>,
    weights: Vec<f64>,
}

impl PopulationSpec {
    pub fn new(strata: Vec<Stratum>) -> Result<Self, DesignError> {
        if strata.is_empty() {
            return Err(DesignError::EmptyPopulation);
        }
        let mut sum = BigRational::zero();
        for (index, s) in strata.iter().enumerate() {
            if s.weight.is_negative() {
                return Err(DesignError::NegativeWeight {
                    index,
                    weight: s.weight.to_string(),
                });
            }
            if !s.latents.y1.is_finite() || !s.latents.y0.is_finite() {
                return Err(DesignError::NonFiniteOutcome { index });
            }
            if let Some(prev) = strata[..index]
                .iter()
                .find(|t| t.latents.same_tuple(&s.latents))
            {
                let l = prev.latents;
                return Err(DesignError::DuplicateStratum {
                    index,
                    y1: l.y1,
                    y0: l.y0,
                    x: l.x,
                    u: l.u,
                });
            }
            sum += &s.weight;
        }
        if !sum.is_one() {
            return Err(DesignError::NotNormalized {
                sum: sum.to_string(),
            });
        }
        if strata.iter().all(|s| s.weight.is_zero()) {
            return Err(DesignError::NoPositiveWeight);
        }
        let weights = strata.iter().map(Stratum::weight_f64).collect();
        Ok(Self { strata, weights })
    }

    /// Builds a population from `(latents, numerator, denominator)` triples.
    pub fn from_fractions(
        rows: impl IntoIterator<Item = (Latents, i64, i64)>,
    ) -> Result<Self, DesignError> {
        let strata = rows
            .into_iter()
            .enumerate()
            .map(|(index, (l, num, den))| {
                if den == 0 {
                    return Err(DesignError::InvalidWeight {
                        index,
                        text: format!("{num}/{den}"),
                    });
                }
                Ok(Stratum::new(
                    l,
                    BigRational::new(num.into(), den.into()),
                ))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(strata)
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    /// Weights as `f64`, in stratum order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    /// Iterates `(index, latents, weight)` over strata with positive weight.
    pub fn positive(&self) -> impl Iterator<Item = (usize, &Latents, f64)> + '_ {
        self.strata
            .iter()
            .zip(&self.weights)
            .enumerate()
            .filter(|(_, (_, &w))| w > 0.0)
            .map(|(i, (s, &w))| (i, &s.latents, w))
    }

    /// Average treatment effect `E[Y(1) - Y(0)]`.
    pub fn ate(&self) -> f64 {
        self.expect(|l| l.y1 - l.y0)
    }

    /// `E[Y(1)]`.
    pub fn mean_y1(&self) -> f64 {
        self.expect(|l| l.y1)
    }

    /// `Var(Y(1))`.
    pub fn var_y1(&self) -> f64 {
        let m = self.mean_y1();
        self.expect(|l| (l.y1 - m).powi(2))
    }

    /// Distinct observed covariate levels with positive mass, ascending.
    pub fn covariate_levels(&self) -> Vec<u32> {
        let mut levels: Vec<u32> = self.positive().map(|(_, l, _)| l.x).collect();
        levels.sort_unstable();
        levels.dedup();
        levels
    }

    /// Population expectation of `f` over the latent tuple.
    pub fn expect(&self, f: impl Fn(&Latents) -> f64) -> f64 {
        self.positive().map(|(_, l, w)| w * f(l)).sum()
    }

    /// Draws `n` latent tuples independently with stratum probabilities equal
    /// to the weights.
    pub fn sample_iid<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Latents> {
        let sampler = StratumSampler::new(self.weights());
        (0..n)
            .map(|_| self.strata[sampler.draw(rng)].latents)
            .collect()
    }
}

/// Draws stratum indices from a fixed discrete law.
#[derive(Debug, Clone)]
pub struct StratumSampler {
    index: Option<WeightedIndex<f64>>,
}

impl StratumSampler {
    /// Panics if `weights` is empty or has no positive entry.
    pub fn new(weights: &[f64]) -> Self {
        // A single stratum needs no randomness.
        let index = if weights.len() == 1 {
            None
        } else {
            Some(WeightedIndex::new(weights).expect("weights must contain a positive entry"))
        };
        Self { index }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.index {
            Some(ix) => ix.sample(rng),
            None => 0,
        }
    }
}

/// One sampled unit together with its assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleObservation {
    pub y1: f64,
    pub y0: f64,
    pub x: u32,
    pub u: u32,
    /// True treatment probability of the unit.
    pub p: f64,
    pub w: bool,
    /// Realized outcome, `y1` if treated and `y0` otherwise.
    pub y: f64,
}

impl SampleObservation {
    pub fn new(latents: Latents, p: f64, w: bool) -> Self {
        Self {
            y1: latents.y1,
            y0: latents.y0,
            x: latents.x,
            u: latents.u,
            p,
            w,
            y: if w { latents.y1 } else { latents.y0 },
        }
    }

    pub fn latents(&self) -> Latents {
        Latents::new(self.y1, self.y0, self.x, self.u)
    }
}

/// The eight-stratum population: `y0 = 0` and `(y1, u, x)` uniform over
/// `{0, 1}^3`.
pub fn make_paper_population() -> PopulationSpec {
    let mut rows = Vec::with_capacity(8);
    for y1 in [0.0, 1.0] {
        for u in 0..2 {
            for x in 0..2 {
                rows.push((Latents::new(y1, 0.0, x, u), 1, 8));
            }
        }
    }
    PopulationSpec::from_fractions(rows).expect("paper population is valid")
}

/// Three equally weighted strata with `y1 ∈ {0.5, 1.0, 1.5}` and `y0 = 0`,
/// so that `0 < y1 < 2 E[Y(1)] = 2`.
pub fn make_proportional_population() -> PopulationSpec {
    PopulationSpec::from_fractions(
        [0.5, 1.0, 1.5].map(|y1| (Latents::new(y1, 0.0, 0, 0), 1, 3)),
    )
    .expect("proportional population is valid")
}

/// `ate` as a free function over a population.
pub fn ate(spec: &PopulationSpec) -> f64 {
    spec.ate()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StratumDoc {
    y1: f64,
    y0: f64,
    x: u32,
    u: u32,
    weight: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PopulationDoc {
    #[serde(deserialize_with = "checked_strata")]
    strata: Vec<StratumDoc>,
}

// Validating here, inside the document, lets serde_json attach a position.
fn checked_strata<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<StratumDoc>, D::Error> {
    let strata = Vec::<StratumDoc>::deserialize(d)?;
    spec_from_docs(strata.clone()).map_err(serde::de::Error::custom)?;
    Ok(strata)
}

fn spec_from_docs(strata: Vec<StratumDoc>) -> Result<PopulationSpec, DesignError> {
    let strata = strata
        .into_iter()
        .enumerate()
        .map(|(index, s)| {
            let weight = parse_weight(&s.weight).ok_or(DesignError::InvalidWeight {
                index,
                text: s.weight.clone(),
            })?;
            Ok(Stratum::new(Latents::new(s.y1, s.y0, s.x, s.u), weight))
        })
        .collect::<Result<Vec<_>, DesignError>>()?;
    PopulationSpec::new(strata)
}

impl TryFrom<PopulationDoc> for PopulationSpec {
    type Error = DesignError;

    fn try_from(doc: PopulationDoc) -> Result<Self, Self::Error> {
        spec_from_docs(doc.strata)
    }
}

impl From<PopulationSpec> for PopulationDoc {
    fn from(spec: PopulationSpec) -> Self {
        PopulationDoc {
            strata: spec
                .strata
                .into_iter()
                .map(|s| StratumDoc {
                    y1: s.latents.y1,
                    y0: s.latents.y0,
                    x: s.latents.x,
                    u: s.latents.u,
                    weight: s.weight.to_string(),
                })
                .collect(),
        }
    }
}

fn parse_weight(text: &str) -> Option<BigRational> {
    let text = text.trim();
    let r = BigRational::from_str(text).ok()?;
    if r.denom().is_zero() {
        return None;
    }
    Some(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn base_population_shape() {
        let pop = make_paper_population();
        assert_eq!(pop.len(), 8);
        let eighth = BigRational::new(1.into(), 8.into());
        assert!(pop.strata().iter().all(|s| s.weight == eighth));
        assert!(pop.strata().iter().all(|s| s.latents.y0 == 0.0));
        let total: BigRational = pop.strata().iter().map(|s| s.weight.clone()).sum();
        assert!(total.is_one());
        for y1 in [0.0, 1.0] {
            for u in 0..2 {
                for x in 0..2 {
                    let l = Latents::new(y1, 0.0, x, u);
                    assert!(pop.strata().iter().any(|s| s.latents.same_tuple(&l)));
                }
            }
        }
    }

    #[test]
    fn proportional_population_moments() {
        let pop = make_proportional_population();
        assert!((pop.mean_y1() - 1.0).abs() < 1e-12);
        assert!((pop.var_y1() - 1.0 / 6.0).abs() < 1e-12);
        let max = pop.strata().iter().map(|s| s.latents.y1).fold(f64::MIN, f64::max);
        assert!(max < 2.0 * pop.mean_y1());
    }

    #[test]
    fn ate_values() {
        assert!((ate(&make_paper_population()) - 0.5).abs() < 1e-12);
        assert!((ate(&make_proportional_population()) - 1.0).abs() < 1e-12);
        let single =
            PopulationSpec::from_fractions([(Latents::new(3.0, 3.0, 0, 0), 1, 1)]).unwrap();
        assert_eq!(single.ate(), 0.0);
    }

    #[test]
    fn rejects_bad_populations() {
        let l = Latents::new(1.0, 0.0, 0, 0);
        assert!(matches!(
            PopulationSpec::from_fractions([(l, 7, 8)]),
            Err(DesignError::NotNormalized { .. })
        ));
        assert!(matches!(
            PopulationSpec::from_fractions([(l, 1, 2), (l, 1, 2)]),
            Err(DesignError::DuplicateStratum { index: 1, .. })
        ));
        assert!(matches!(
            PopulationSpec::from_fractions([(l, 3, 2), (Latents::new(0.0, 0.0, 0, 0), -1, 2)]),
            Err(DesignError::NegativeWeight { index: 1, .. })
        ));
        assert!(matches!(
            PopulationSpec::new(vec![]),
            Err(DesignError::EmptyPopulation)
        ));
    }

    #[test]
    fn single_stratum_sample_is_constant() {
        let l = Latents::new(2.0, 1.0, 3, 1);
        let pop = PopulationSpec::from_fractions([(l, 1, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = pop.sample_iid(5, &mut rng);
        assert_eq!(draws, vec![l; 5]);
    }

    #[test]
    fn sampling_is_deterministic() {
        let pop = make_paper_population();
        let a = pop.sample_iid(100, &mut ChaCha8Rng::seed_from_u64(9));
        let b = pop.sample_iid(100, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn stratum_frequencies_match_weights() {
        let pop = make_paper_population();
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let draws = pop.sample_iid(n, &mut rng);
        let se = (0.125 * 0.875 / n as f64).sqrt();
        for s in pop.strata() {
            let count = draws.iter().filter(|d| d.same_tuple(&s.latents)).count();
            let freq = count as f64 / n as f64;
            assert!((freq - 0.125).abs() < 5.0 * se, "freq {freq}");
        }
    }

    #[test]
    fn json_round_trip_keeps_exact_weights() {
        let pop = make_paper_population();
        let text = serde_json::to_string(&pop).unwrap();
        assert!(text.contains("\"weight\":\"1/8\""));
        let back: PopulationSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, pop);
    }

    #[test]
    fn json_rejects_unnormalized_weights() {
        let text = r#"{"strata":[{"y1":1,"y0":0,"x":0,"u":0,"weight":"1/3"},
                                 {"y1":0,"y0":0,"x":0,"u":0,"weight":"1/3"}]}"#;
        let err = serde_json::from_str::<PopulationSpec>(text).unwrap_err();
        assert!(err.to_string().contains("weights sum to 2/3"), "{err}");
    }
}
