//! Exact analysis and Monte Carlo simulation of treatment-assignment designs.
//!
//! A design is a superpopulation of latent tuples `(y1, y0, x, u)`, a
//! treatment-assignment mechanism, and a sampling scheme. The [`oracle`]
//! enumerates the joint law of one sampled observation to classify the
//! design (randomized, unconfounded, overlap) and compute estimator limits
//! exactly; [`montecarlo`] replicates the whole experiment to check those
//! numbers empirically.
//!
//! ```
//! use designbench::{assignment, oracle, population};
//!
//! let pop = population::make_paper_population();
//! let mech = assignment::outcome_dependent(&pop);
//! let report = oracle::build_report(&pop, &mech).unwrap();
//! assert!(report.randomized);
//! assert_eq!(report.unconditionally_unconfounded, oracle::Verdict::Fails);
//! assert!((report.dim_limit.unwrap() - 0.4).abs() < 1e-12);
//! ```

pub mod assignment;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod montecarlo;
pub mod oracle;
pub mod population;

pub use assignment::{Dependence, Mechanism, MechanismKind};
pub use error::DesignError;
pub use estimators::{EstimateError, EstimatorId, Sample};
pub use montecarlo::{Design, McError, McResult, Sampling};
pub use oracle::{DesignReport, JointTable, Verdict};
pub use population::{Latents, PopulationSpec, SampleObservation, Stratum};
