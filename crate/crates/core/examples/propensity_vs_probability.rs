// Units are treated with probability 1/2 or 3/4, yet the propensity score
// is 5/8 at every covariate level. Weighting by the propensity score does
// not remove the bias; weighting by the unit probabilities does.

use designbench::assignment::outcome_dependent;
use designbench::estimators::{self, EstimatorId};
use designbench::montecarlo::{replication_rng, run_experiment, Design, Simulator};
use designbench::oracle;
use designbench::population::make_paper_population;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let pop = make_paper_population();
    let mech = outcome_dependent(&pop);
    let report = oracle::build_report(&pop, &mech)?;
    println!("unit treatment probabilities: {:?}", report.treatment_probabilities);
    println!("propensity score by x:        {:?}", report.propensity_by_x);

    let score = oracle::propensity_by_x(&pop, &mech)?;
    println!("IPW limit with the true score: {}", oracle::ipw_limit(&pop, &mech, &score)?);

    let design = Design::iid(pop, mech, 4000)?;
    let sample = Simulator::new(&design)?.sample(&mut replication_rng(3, 0));
    println!("estimated score in one sample: {:?}", estimators::estimate_propensity(&sample));

    for est in [EstimatorId::IpwTrueScore, EstimatorId::IpwEstimatedScore, EstimatorId::HorvitzThompson] {
        let r = run_experiment(&design, est, 200, 3)?;
        println!("{:>8}: mean {:.4} +/- {:.4}", est.as_str(), r.mean, r.std_error_of_mean);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
