//! Parallel experiment execution.
//!
//! Replications run on the rayon pool and are collected in index order
//! before aggregation, so the report is bit-identical to a serial run.

use fairtoss_core::sim::{comparison_plan, ComparisonTable, Experiment, ExperimentReport, ScenarioConfig};
use rayon::prelude::*;

use crate::error::Result;

pub fn run_experiment_parallel(config: &ScenarioConfig) -> Result<ExperimentReport> {
    let experiment = Experiment::new(config.clone())?;
    log::info!(
        "running {} replications of {} (seed {})",
        config.replications,
        config.mechanism,
        config.seed
    );
    let records = (0..config.replications)
        .into_par_iter()
        .map(|i| experiment.replicate(i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(experiment.report(&records))
}

/// Parallel counterpart of [`fairtoss_core::sim::compare_mechanisms`].
pub fn compare_mechanisms_parallel(configs: &[ScenarioConfig]) -> Result<ComparisonTable> {
    let plan = comparison_plan(configs)?;
    let reports = plan.iter().map(run_experiment_parallel).collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        base_seed: plan[0].seed,
        reports,
    })
}
