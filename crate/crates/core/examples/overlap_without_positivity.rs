// Four designs on the same population, one per cell of the
// randomized x unconfounded table.

use designbench::assignment::{outcome_dependent, treat_by_outcome, treat_by_unobserved, Mechanism};
use designbench::oracle::build_report;
use designbench::population::make_paper_population;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let pop = make_paper_population();
    let designs = [
        ("p = (3 - y1)/4", outcome_dependent(&pop)),
        ("w = u", treat_by_unobserved(&pop)),
        ("p = 1/2", Mechanism::constant(0.5)?),
        ("w = 1[y1 = 1]", treat_by_outcome(&pop)),
    ];
    println!("{:<16} {:>10} {:>12} {:>8} {:>10}", "design", "randomized", "unconfounded", "overlap", "positivity");
    for (label, mech) in designs {
        let r = build_report(&pop, &mech)?;
        println!(
            "{label:<16} {:>10} {:>12} {:>8} {:>10}",
            r.randomized,
            format!("{:?}", r.unconditionally_unconfounded),
            r.overlap,
            r.positivity
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
