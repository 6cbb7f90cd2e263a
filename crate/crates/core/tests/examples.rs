mod confounded_randomization {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/confounded_randomization.rs"));
}

mod propensity_vs_probability {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/propensity_vs_probability.rs"));
}

mod overlap_without_positivity {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/overlap_without_positivity.rs"));
}

mod global_coin {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/global_coin.rs"));
}

mod variance_gain {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/variance_gain.rs"));
}

mod fixed_counts {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fixed_counts.rs"));
}

mod custom_design {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/custom_design.rs"));
}

#[test]
fn confounded_randomization_runs() {
    confounded_randomization::run_example().expect("confounded_randomization example should run");
}

#[test]
fn propensity_vs_probability_runs() {
    propensity_vs_probability::run_example().expect("propensity_vs_probability example should run");
}

#[test]
fn overlap_without_positivity_runs() {
    overlap_without_positivity::run_example().expect("overlap_without_positivity example should run");
}

#[test]
fn global_coin_runs() {
    global_coin::run_example().expect("global_coin example should run");
}

#[test]
fn variance_gain_runs() {
    variance_gain::run_example().expect("variance_gain example should run");
}

#[test]
fn fixed_counts_runs() {
    fixed_counts::run_example().expect("fixed_counts example should run");
}

#[test]
fn custom_design_runs() {
    custom_design::run_example().expect("custom_design example should run");
}
