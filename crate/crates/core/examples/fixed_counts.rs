// Sampling a fixed number of treated and control units. With
// p proportional to y(1), every treated term y1/p is the same constant, so
// HT returns the effect exactly on every replication.

use designbench::assignment::Mechanism;
use designbench::estimators::EstimatorId;
use designbench::montecarlo::{run_experiment, Design};
use designbench::population::make_proportional_population;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let pop = make_proportional_population();
    for (label, mech) in [
        ("p = y1 / 2", Mechanism::outcome_proportional(&pop)?),
        ("p = 1/2", Mechanism::constant(0.5)?),
    ] {
        let design = Design::fixed_counts(pop.clone(), mech, 500, 500)?;
        let r = run_experiment(&design, EstimatorId::HorvitzThompson, 500, 11)?;
        println!(
            "{label:<10} mean {:.6}, variance {:.3e}, n Var {:.4}",
            r.mean, r.variance, r.normalized_variance
        );
    }
    println!("2 Var(y1) = {}", 2.0 * pop.var_y1());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
