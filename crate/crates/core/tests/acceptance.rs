//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use hypoflow::config::{ExperimentConfig, ExperimentName};
use hypoflow::experiments::{run_named, ALL};
use hypoflow::report::Check;

const CRITERIA: [&str; 11] = [
    "certificate arithmetic",
    "mode-by-mode bound",
    "torus rate",
    "whole-space rate",
    "improved rates",
    "moment conservation",
    "macroscopic machinery",
    "Green oracle",
    "factorization",
    "diffusion ladder",
    "structural properties",
];

fn main() -> ExitCode {
    let cfg = ExperimentConfig::new(ExperimentName::All);
    let mut by_criterion: BTreeMap<u8, Vec<Check>> = BTreeMap::new();
    let mut errors: BTreeMap<u8, String> = BTreeMap::new();
    let mut elapsed: BTreeMap<u8, f64> = BTreeMap::new();
    for name in ALL {
        let start = Instant::now();
        let owners: &[u8] = match name {
            ExperimentName::Certify => &[1],
            ExperimentName::ModeDecay => &[2],
            ExperimentName::Torus => &[3],
            ExperimentName::Wholespace => &[4],
            ExperimentName::Improved => &[5, 6],
            ExperimentName::NashEntropy => &[7],
            ExperimentName::GreenValidate => &[8],
            ExperimentName::Duhamel => &[9],
            ExperimentName::DiffusionLadder => &[10],
            _ => &[11],
        };
        match run_named(name, &cfg) {
            Ok(outcomes) => {
                for o in outcomes {
                    for c in o.checks {
                        by_criterion.entry(c.criterion).or_default().push(c);
                    }
                }
            }
            Err(e) => {
                for id in owners {
                    errors.insert(*id, format!("{}: {e}", name.as_str()));
                }
            }
        }
        elapsed.insert(owners[0], start.elapsed().as_secs_f64());
    }
    let mut failed = 0;
    for (k, title) in CRITERIA.iter().enumerate() {
        let id = k as u8 + 1;
        let checks = by_criterion.get(&id).map(Vec::as_slice).unwrap_or(&[]);
        let error = errors.get(&id);
        let passed = error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.passed);
        if !passed {
            failed += 1;
        }
        let detail = match error {
            Some(e) => format!("error {e}"),
            None => {
                let bad: Vec<String> = checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| format!("{} = {:.4e} (target {:.4e})", c.name, c.value, c.target))
                    .collect();
                if bad.is_empty() {
                    format!("{} checks", checks.len())
                } else {
                    bad.join("; ")
                }
            }
        };
        let secs = elapsed.get(&id).map_or(String::new(), |s| format!(" [{s:.1}s]"));
        println!("criterion {id:>2} {} {title}: {detail}{secs}", if passed { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
