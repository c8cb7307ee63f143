//! Subcommand bodies: each runs its studies and writes its tables.

use std::path::Path;
use std::time::Instant;

use ctdr_core::dgp::CovariateLaw;
use ctdr_core::montecarlo::{
    decomposition_study, dr_matrix, norm_decay_study, rate_condition_study, run_scenario, tv_gap_smooth, tv_gap_study,
    ScenarioConfig,
};
use ctdr_core::nuisance::ConditionalHazardModel;

use crate::config::RunConfig;
use crate::output::{self, RunManifest};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    DrMatrix,
    Diagnose,
    Decompose,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::DrMatrix => "dr-matrix",
            CommandKind::Diagnose => "diagnose",
            CommandKind::Decompose => "decompose",
        }
    }
}

fn per_n(config: &RunConfig) -> impl Iterator<Item = ScenarioConfig> + '_ {
    config.n_grid.iter().map(|&n| ScenarioConfig { n, ..config.scenario })
}

/// Runs `kind` and writes its tables plus `manifest.json` into `out`;
/// returns the names of the files written.
pub fn run_command(kind: CommandKind, config: &RunConfig, out: &Path) -> Result<Vec<String>, CliError> {
    let start = Instant::now();
    let mut files: Vec<(&str, String)> = Vec::new();
    match kind {
        CommandKind::Simulate => {
            let reports = per_n(config).map(|c| run_scenario(&c)).collect::<Result<Vec<_>, _>>()?;
            files.push(("report.csv", output::report_csv(&reports)));
        }
        CommandKind::DrMatrix => {
            let mut reports = Vec::new();
            for c in per_n(config) {
                reports.extend(dr_matrix(&c)?);
            }
            files.push(("report.csv", output::report_csv(&reports)));
        }
        CommandKind::Diagnose => {
            let seed = config.scenario.master_seed;
            let tv = &config.tv;
            let rows = tv_gap_study(&tv.n_grid, tv.low, tv.high, tv.replications, seed)?;
            files.push(("tv_gap.csv", output::tv_gap_csv(&rows)));

            let dgp = config.scenario.dgp;
            let s = &config.smooth;
            let truth = ConditionalHazardModel::constant(dgp.event.rate, dgp.event.coefficient);
            let rows = tv_gap_smooth(&truth, s.z, s.alpha, s.amplitude, s.shape_seed, dgp.tau_max, &s.n_grid)?;
            files.push(("tv_gap_smooth.csv", output::tv_gap_csv(&rows)));

            let mut binary = dgp;
            binary.covariate = CovariateLaw::Bernoulli(config.norm.bernoulli_p);
            let rows = norm_decay_study(
                &binary,
                config.norm.upper,
                &config.norm.n_grid,
                config.norm.replications,
                seed,
            )?;
            files.push(("norm_decay.csv", output::norm_decay_csv(&rows)));

            let rows = rate_condition_study(&config.rates)?;
            files.push(("rates.csv", output::rates_csv(&rows)));
            files.push(("rates_detail.csv", output::rates_detail_csv(&rows)));
        }
        CommandKind::Decompose => {
            if config.n_grid.len() != 1 {
                return Err(CliError::Config("decompose takes a single `run.n`".into()));
            }
            let report = decomposition_study(&config.scenario)?;
            files.push(("decomposition.csv", output::decomposition_csv(&report.rows)));
        }
    }
    for (name, contents) in &files {
        output::write_file(out, name, contents)?;
    }
    let mut outputs: Vec<String> = files.iter().map(|(name, _)| name.to_string()).collect();
    output::write_manifest(
        out,
        &RunManifest {
            command: kind.name().to_string(),
            config_digest: config.raw.digest(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.scenario.master_seed,
            wall_time_seconds: start.elapsed().as_secs_f64(),
            outputs: outputs.clone(),
        },
    )?;
    outputs.push("manifest.json".to_string());
    Ok(outputs)
}
