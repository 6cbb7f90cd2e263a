// One shared coin assigns every unit. Each unit is treated with
// probability 1/2, but every sample has an empty arm and the HT variance
// does not shrink with n.

use designbench::assignment::Mechanism;
use designbench::estimators::EstimatorId;
use designbench::montecarlo::{run_replications, variance_scaling_probe, Design};
use designbench::oracle::build_report;
use designbench::population::make_paper_population;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let pop = make_paper_population();
    let coin = Mechanism::global_coin(0.5)?;
    let report = build_report(&pop, &coin)?;
    println!("randomized: {}, undefined: {:?}", report.randomized, report.undefined);

    let design = Design::iid(pop.clone(), coin.clone(), 500)?;
    let dim = run_replications(&design, EstimatorId::DiffInMeans, 200, 1)?;
    let failed = dim.iter().filter(|o| o.is_err()).count();
    println!("difference in means: {failed}/{} replications had an empty arm", dim.len());

    let family = |n| Design::iid(pop.clone(), coin.clone(), n);
    let probe = variance_scaling_probe(family, EstimatorId::HorvitzThompson, &[50, 500, 5000], 300, 1)?;
    for (n, r) in &probe {
        println!("HT n = {n:>5}: variance {:.4}", r.variance);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
