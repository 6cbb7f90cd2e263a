// Loading a population and a mechanism from JSON, classifying the design
// and simulating it, with results written as CSV rows.

use designbench::estimators::EstimatorId;
use designbench::montecarlo::{self, Design, CSV_HEADER};
use designbench::oracle::build_report;
use designbench::{Mechanism, PopulationSpec};

const POPULATION: &str = r#"{
  "strata": [
    {"y1": 2.0, "y0": 1.0, "x": 0, "u": 0, "weight": "1/6"},
    {"y1": 1.0, "y0": 1.0, "x": 0, "u": 1, "weight": "1/3"},
    {"y1": 3.0, "y0": 0.0, "x": 1, "u": 0, "weight": "1/4"},
    {"y1": 0.0, "y0": 0.5, "x": 1, "u": 1, "weight": "1/4"}
  ]
}"#;

const MECHANISM: &str = r#"{
  "kind": "covariate_fn",
  "dependence": "independent",
  "table": [{"x": 0, "p": 0.3}, {"x": 1, "p": 0.6}]
}"#;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let pop: PopulationSpec = serde_json::from_str(POPULATION)?;
    let mech: Mechanism = serde_json::from_str(MECHANISM)?;
    let report = build_report(&pop, &mech)?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    let design = Design::iid(pop, mech, 800)?;
    println!("{CSV_HEADER}");
    for est in EstimatorId::ALL {
        let r = montecarlo::run_experiment_with_threads(&design, est, 200, 2024, 2)?;
        println!("{}", r.to_csv_row());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
