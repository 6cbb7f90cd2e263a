// Treating with probability proportional to y(1) lowers the HT variance
// compared with a fair coin, by 2 Var(y(1)) in normalized units.

use designbench::assignment::Mechanism;
use designbench::estimators::EstimatorId;
use designbench::montecarlo::{run_experiment, Design};
use designbench::oracle::ht_normalized_variance;
use designbench::population::make_proportional_population;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let pop = make_proportional_population();
    println!("E[y1] = {}, Var(y1) = {}", pop.mean_y1(), pop.var_y1());
    let designs = [
        ("p = y1 / 2", Mechanism::outcome_proportional(&pop)?),
        ("p = 1/2", Mechanism::constant(0.5)?),
    ];
    for (label, mech) in designs {
        let exact = ht_normalized_variance(&pop, &mech)?;
        let design = Design::iid(pop.clone(), mech, 1000)?;
        let ht = run_experiment(&design, EstimatorId::HorvitzThompson, 500, 5)?;
        let hajek = run_experiment(&design, EstimatorId::Hajek, 500, 5)?;
        println!(
            "{label:<10} n Var(HT): exact {exact:.4}, simulated {:.4}; n Var(Hajek) {:.4}",
            ht.normalized_variance, hajek.normalized_variance
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
