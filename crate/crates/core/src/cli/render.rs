use std::fmt::Write;

use crate::montecarlo::CSV_HEADER;
use crate::oracle::{DesignReport, Verdict};

use super::scenario::{EstimatorRun, RunReport, SamplingChoice};

pub fn render_json(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("run report serializes");
    s.push('\n');
    s
}

/// Header plus one row per estimator summary, prefixed by the design label.
pub fn render_csv(report: &RunReport) -> String {
    let mut s = format!("design,{CSV_HEADER}\n");
    for d in &report.designs {
        for r in &d.results {
            let row = match r {
                EstimatorRun::Summary(m) => m.to_csv_row(),
                EstimatorRun::Failed { estimator_id, replications, failures, .. } => format!(
                    "{estimator_id},{},{replications},{failures},,,,,{}",
                    report.n, report.master_seed
                ),
            };
            let _ = writeln!(s, "\"{}\",{row}", d.label.replace('"', "\"\""));
        }
    }
    s
}

fn verdict(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "true",
        Verdict::Fails => "false",
        Verdict::Undefined => "undefined",
    }
}

fn opt(v: Option<f64>, key: &str, r: &DesignReport) -> String {
    match v {
        Some(x) => x.to_string(),
        None => format!("undefined ({})", r.undefined.get(key).map_or("", String::as_str)),
    }
}

fn write_report(s: &mut String, r: &DesignReport) {
    let rows = [
        ("mechanism", format!("{} ({:?})", r.mechanism, r.dependence)),
        ("randomized", format!("{} (gamma {})", r.randomized, r.gamma)),
        ("positivity", r.positivity.to_string()),
        ("overlap", r.overlap.to_string()),
        ("unconditionally unconfounded", verdict(r.unconditionally_unconfounded).into()),
        ("conditionally unconfounded", verdict(r.conditionally_unconfounded).into()),
        ("ATE", r.ate.to_string()),
        (
            "propensity by x",
            r.propensity_by_x
                .iter()
                .map(|(x, p)| format!("x={x}: {p}"))
                .collect::<Vec<_>>()
                .join(", "),
        ),
        ("unconditional propensity", r.unconditional_propensity.to_string()),
        (
            "treatment probabilities",
            r.treatment_probabilities
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(", "),
        ),
        ("DiM limit", opt(r.dim_limit, "dim_limit", r)),
        ("HT normalized variance", opt(r.ht_normalized_variance, "ht_normalized_variance", r)),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "  {k:<30} {v}");
    }
}

pub fn render_table(report: &RunReport) -> String {
    let mut s = String::new();
    let sampling = match report.sampling {
        SamplingChoice::Iid => "iid",
        SamplingChoice::FixedCounts => "fixed_counts",
    };
    let _ = writeln!(
        s,
        "scenario {}  n={} R={} seed={} sampling={}",
        report.scenario, report.n, report.replications, report.master_seed, sampling
    );
    for d in &report.designs {
        let _ = writeln!(s, "\ndesign: {}", d.label);
        write_report(&mut s, &d.report);
        if !d.results.is_empty() {
            let _ = writeln!(
                s,
                "\n  {:<9} {:>7} {:>8} {:>14} {:>14} {:>14} {:>12}",
                "estimator", "R", "failures", "mean", "variance", "n*variance", "se"
            );
        }
        for r in &d.results {
            match r {
                EstimatorRun::Summary(m) => {
                    let _ = writeln!(
                        s,
                        "  {:<9} {:>7} {:>8} {:>14.6} {:>14.6e} {:>14.6} {:>12.4e}",
                        m.estimator_id.as_str(),
                        m.replications,
                        m.failures,
                        m.mean,
                        m.variance,
                        m.normalized_variance,
                        m.std_error_of_mean
                    );
                }
                EstimatorRun::Failed { estimator_id, replications, failures, error } => {
                    let _ = writeln!(
                        s,
                        "  {:<9} {:>7} {:>8} {error}",
                        estimator_id.as_str(),
                        replications,
                        failures
                    );
                }
            }
        }
    }
    for p in &report.probes {
        let _ = writeln!(s, "\nprobe: {} ({})", p.label, p.estimator_id);
        for m in &p.results {
            let _ = writeln!(s, "  n={:<8} variance {:.6e}  n*variance {:.6}", m.n, m.variance, m.normalized_variance);
        }
    }
    if !report.claims.is_empty() {
        let _ = writeln!(s, "\nclaims:");
        for c in &report.claims {
            let status = if c.passed { "CONFIRMED" } else { "FAILED" };
            let _ = writeln!(s, "  {}: {status}  [{}]", c.name, c.detail);
        }
    }
    s
}
