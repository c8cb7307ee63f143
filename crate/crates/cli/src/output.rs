//! CSV tables and the run manifest.

use std::fmt::Write as _;
use std::path::Path;

use ctdr_core::montecarlo::{DecompositionRow, NormDecayRow, RateRow, ScenarioReport, TvGapRow};
use ctdr_core::numeric::format_float;
use serde::Serialize;

use crate::CliError;

pub const REPORT_HEADER: &str = "cell,n,R,bias,sd,mean_se,coverage,mcse,failures";
pub const TV_GAP_HEADER: &str = "n,sup_err,tv_err";
pub const NORM_DECAY_HEADER: &str = "estimator,n,sup_err,tv_err";
pub const RATES_HEADER: &str = "alpha_sum,n,sqrtn_bias,cross_integral";
pub const RATES_DETAIL_HEADER: &str =
    "alpha_event,alpha_coarsening,alpha_sum,n,sqrtn_bias,sqrtn_bias_mcse,cross_integral,predicted_cross,coverage";
pub const DECOMPOSITION_HEADER: &str = "rep,T1,T2,T3,T4,T5,T6,reconstruction_residual";

fn f(x: f64) -> String {
    format_float(x)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), format_float)
}

fn table(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

pub fn report_csv(reports: &[ScenarioReport]) -> String {
    table(
        REPORT_HEADER,
        reports.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{},{}",
                r.label,
                r.n,
                r.replications,
                f(r.bias),
                opt(r.sd),
                f(r.mean_se),
                f(r.coverage),
                opt(r.mcse),
                r.failures
            )
        }),
    )
}

pub fn tv_gap_csv(rows: &[TvGapRow]) -> String {
    table(
        TV_GAP_HEADER,
        rows.iter().map(|r| format!("{},{},{}", r.n, f(r.sup_err), f(r.tv_err))),
    )
}

pub fn norm_decay_csv(rows: &[NormDecayRow]) -> String {
    table(
        NORM_DECAY_HEADER,
        rows.iter()
            .map(|r| format!("{},{},{},{}", r.estimator, r.n, f(r.sup_err), f(r.tv_err))),
    )
}

pub fn rates_csv(rows: &[RateRow]) -> String {
    table(
        RATES_HEADER,
        rows.iter()
            .map(|r| format!("{},{},{},{}", f(r.alpha_sum), r.n, f(r.sqrtn_bias), f(r.cross_integral))),
    )
}

pub fn rates_detail_csv(rows: &[RateRow]) -> String {
    table(
        RATES_DETAIL_HEADER,
        rows.iter().map(|r| {
            let mut s = String::new();
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                f(r.alpha_event),
                f(r.alpha_coarsening),
                f(r.alpha_sum),
                r.n,
                f(r.sqrtn_bias),
                f(r.sqrtn_bias_mcse),
                f(r.cross_integral),
                f(r.predicted_cross),
                f(r.coverage)
            );
            s
        }),
    )
}

pub fn decomposition_csv(rows: &[DecompositionRow]) -> String {
    table(
        DECOMPOSITION_HEADER,
        rows.iter().map(|r| {
            let terms: Vec<String> = r.terms.iter().map(|t| f(*t)).collect();
            format!("{},{},{}", r.rep, terms.join(","), f(r.reconstruction_residual))
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(manifest).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(dir, "manifest.json", &(json + "\n"))
}
