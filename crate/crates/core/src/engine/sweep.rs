//! Parallel runs of one scenario over a list of values for a single key.

use std::path::Path;

use rayon::prelude::*;

use super::config::Scenario;
use super::metrics::{compute_metrics, Metrics};
use super::run::{run_scenario_with, RunOptions};
use super::trajectory::{format_sig17, Trajectory};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SweepRun {
    pub value: String,
    pub scenario: Scenario,
    pub trajectory: Trajectory,
    pub metrics: Metrics,
}

/// Scenarios for each value of `key`; run `i` gets seed `base ⊕ i`.
pub fn sweep_scenarios(
    base: &Scenario,
    base_dir: &Path,
    key: &str,
    values: &[String],
) -> Result<Vec<Scenario>> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let text = base.to_config_string();
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut s = Scenario::parse_with(&text, base_dir, &[(key.to_string(), v.clone())])?;
            s.sim.seed = base.sim.seed ^ i as u64;
            s.noise.seed = s.sim.seed;
            Ok(s)
        })
        .collect()
}

pub fn run_sweep(
    base: &Scenario,
    base_dir: &Path,
    key: &str,
    values: &[String],
    opts: RunOptions,
) -> Result<Vec<SweepRun>> {
    let scenarios = sweep_scenarios(base, base_dir, key, values)?;
    scenarios
        .into_par_iter()
        .zip(values.par_iter())
        .map(|(scenario, value)| {
            let trajectory = run_scenario_with::<f64>(&scenario, opts)?;
            let metrics = compute_metrics(&trajectory, scenario.sim.t_settle, scenario.epsilon())?;
            Ok(SweepRun {
                value: value.clone(),
                scenario,
                trajectory,
                metrics,
            })
        })
        .collect()
}

/// One row per run: the swept value, every metric, and for each `*_sup` and
/// `*_rms` metric the ratio to the previous row (blank on the first row).
pub fn summary_csv(key: &str, runs: &[SweepRun]) -> String {
    let mut names: Vec<String> = Vec::new();
    for r in runs {
        for (n, _) in &r.metrics.entries {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    let ratios: Vec<&String> = names
        .iter()
        .filter(|n| n.ends_with("_sup") || n.ends_with("_rms"))
        .collect();
    let mut out = String::from(key);
    for n in &names {
        out.push(',');
        out.push_str(n);
    }
    for n in &ratios {
        out.push_str(",ratio_");
        out.push_str(n);
    }
    out.push('\n');
    for (i, r) in runs.iter().enumerate() {
        out.push_str(&r.value);
        for n in &names {
            out.push(',');
            if let Some(v) = r.metrics.get(n) {
                out.push_str(&format_sig17(v));
            }
        }
        for n in &ratios {
            out.push(',');
            let prev = i.checked_sub(1).and_then(|j| runs[j].metrics.get(n));
            if let (Some(p), Some(v)) = (prev, r.metrics.get(n)) {
                if p != 0.0 {
                    out.push_str(&format_sig17(v / p));
                }
            }
        }
        out.push('\n');
    }
    out
}
