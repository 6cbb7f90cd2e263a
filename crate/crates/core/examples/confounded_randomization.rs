// A randomized design that is still confounded: treatment probabilities
// depend on y(1), so the difference in means converges to 0.4 while the
// effect is 0.5. Horvitz-Thompson with the true probabilities recovers it.

use designbench::assignment::outcome_dependent;
use designbench::estimators::EstimatorId;
use designbench::montecarlo::{run_experiment, Design};
use designbench::oracle::build_report;
use designbench::population::make_paper_population;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let pop = make_paper_population();
    let mech = outcome_dependent(&pop);
    let report = build_report(&pop, &mech)?;
    println!("randomized:               {} (gamma = {})", report.randomized, report.gamma);
    println!("unconfounded:             {:?}", report.unconditionally_unconfounded);
    println!("ATE:                      {}", report.ate);
    println!("difference-in-means limit {:?}", report.dim_limit);

    let design = Design::iid(pop, mech, 2000)?;
    for est in [EstimatorId::DiffInMeans, EstimatorId::HorvitzThompson, EstimatorId::Hajek] {
        let r = run_experiment(&design, est, 300, 7)?;
        println!("{:>6}: mean {:.4} +/- {:.4}", est.as_str(), r.mean, r.std_error_of_mean);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
