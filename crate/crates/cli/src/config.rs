//! Flat `key=value` run configurations.

use std::collections::BTreeMap;
use std::str::FromStr;

use ctdr_core::dgp::{CovariateLaw, DgpSpec, Scenario};
use ctdr_core::montecarlo::{EstimatorKind, RateStudyConfig, ScenarioConfig};
use ctdr_core::nuisance::{NuisanceMode, NuisanceSpec, Target};
use sha2::{Digest, Sha256};

use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "dgp.scenario",
    "dgp.covariate",
    "dgp.event_rate",
    "dgp.event_coefficient",
    "dgp.coarsening_rate",
    "dgp.coarsening_coefficient",
    "dgp.horizon",
    "dgp.tau_max",
    "run.n",
    "run.replications",
    "run.seed",
    "estimator.kind",
    "estimator.folds",
    "nuisance.event",
    "nuisance.coarsening",
    "synthetic.event.alpha",
    "synthetic.event.amplitude",
    "synthetic.event.shape_seed",
    "synthetic.coarsening.alpha",
    "synthetic.coarsening.amplitude",
    "synthetic.coarsening.shape_seed",
    "tv.n_grid",
    "tv.replications",
    "tv.low",
    "tv.high",
    "smooth.alpha",
    "smooth.amplitude",
    "smooth.shape_seed",
    "smooth.z",
    "smooth.n_grid",
    "norm.n_grid",
    "norm.replications",
    "norm.bernoulli_p",
    "norm.upper",
    "rates.alphas",
    "rates.n_grid",
    "rates.replications",
    "rates.amplitude_event",
    "rates.amplitude_coarsening",
    "rates.shape_seed_event",
    "rates.shape_seed_coarsening",
    "rates.kappa_n",
    "rates.kappa_epsilon",
    "rates.kappa_seed",
];

/// Parsed `key=value` pairs, keys unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Self { entries })
    }

    /// Sorted `key=value` lines; insensitive to whitespace, comments and order.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// First 64 bits of the SHA-256 of the canonical form, as hex.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn list<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>, CliError> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|item| {
                    item.trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{item}`")))
                })
                .collect(),
        }
    }
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub raw: RawConfig,
    pub scenario: ScenarioConfig,
    pub n_grid: Vec<usize>,
    pub tv: TvConfig,
    pub smooth: SmoothConfig,
    pub norm: NormConfig,
    pub rates: RateStudyConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvConfig {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothConfig {
    pub alpha: f64,
    pub amplitude: f64,
    pub shape_seed: u64,
    pub z: f64,
    pub n_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormConfig {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub bernoulli_p: f64,
    pub upper: f64,
}

fn parse_covariate(v: &str) -> Result<CovariateLaw, CliError> {
    if v == "uniform" {
        return Ok(CovariateLaw::Uniform);
    }
    if let Some(p) = v.strip_prefix("bernoulli:") {
        let p: f64 = p
            .parse()
            .map_err(|_| CliError::Config(format!("key `dgp.covariate`: bad probability `{p}`")))?;
        return Ok(CovariateLaw::Bernoulli(p));
    }
    Err(CliError::Config(format!(
        "key `dgp.covariate`: expected `uniform` or `bernoulli:<p>`, got `{v}`"
    )))
}

fn parse_alpha_pairs(raw: &RawConfig) -> Result<Vec<(f64, f64)>, CliError> {
    let Some(v) = raw.get("rates.alphas") else {
        return Ok(vec![(0.2, 0.2), (0.25, 0.25), (0.3, 0.3), (0.4, 0.4)]);
    };
    v.split(',')
        .map(|pair| {
            let bad = || CliError::Config(format!("key `rates.alphas`: expected `a_H:a_Q`, got `{pair}`"));
            let (h, q) = pair.trim().split_once(':').ok_or_else(bad)?;
            Ok((
                h.trim().parse().map_err(|_| bad())?,
                q.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

impl RunConfig {
    /// Resolves `raw` with `seed` overriding `run.seed` when given.
    pub fn resolve(raw: RawConfig, seed: Option<u64>) -> Result<Self, CliError> {
        let scenario = match raw.required("dgp.scenario")? {
            "censoring" => Scenario::Censoring,
            "truncation" => Scenario::Truncation,
            other => {
                return Err(CliError::Config(format!(
                    "key `dgp.scenario`: expected `censoring` or `truncation`, got `{other}`"
                )))
            }
        };
        let mut dgp = match scenario {
            Scenario::Censoring => DgpSpec::censoring_default(),
            Scenario::Truncation => DgpSpec::truncation_default(),
        };
        if let Some(v) = raw.get("dgp.covariate") {
            dgp.covariate = parse_covariate(v)?;
        }
        dgp.event.rate = raw.parsed("dgp.event_rate", dgp.event.rate)?;
        dgp.event.coefficient = raw.parsed("dgp.event_coefficient", dgp.event.coefficient)?;
        dgp.coarsening.rate = raw.parsed("dgp.coarsening_rate", dgp.coarsening.rate)?;
        dgp.coarsening.coefficient = raw.parsed("dgp.coarsening_coefficient", dgp.coarsening.coefficient)?;
        dgp.horizon = raw.parsed("dgp.horizon", dgp.horizon)?;
        dgp.tau_max = raw.parsed("dgp.tau_max", dgp.tau_max)?;

        let master_seed = match seed {
            Some(s) => s,
            None => raw.parsed("run.seed", 1u64)?,
        };
        let n_grid: Vec<usize> = raw.list("run.n", &[2000])?;
        if n_grid.is_empty() {
            return Err(CliError::Config("key `run.n` is empty".into()));
        }
        let estimator = match raw.get("estimator.kind").unwrap_or("mdr") {
            "mdr" => EstimatorKind::Mdr,
            "rdr" => EstimatorKind::Rdr {
                folds: raw.parsed("estimator.folds", ctdr_core::crossfit::DEFAULT_FOLDS)?,
            },
            other => {
                return Err(CliError::Config(format!(
                    "key `estimator.kind`: expected `mdr` or `rdr`, got `{other}`"
                )))
            }
        };
        let mode = |which: &str| -> Result<NuisanceMode, CliError> {
            let key = format!("nuisance.{which}");
            match raw.get(&key).unwrap_or("correct") {
                "oracle" => Ok(NuisanceMode::Oracle),
                "correct" => Ok(NuisanceMode::FittedCorrect),
                "misspecified" => Ok(NuisanceMode::FittedMisspecified),
                "synthetic" => Ok(NuisanceMode::SyntheticRate {
                    alpha: raw.parsed(&format!("synthetic.{which}.alpha"), 0.3)?,
                    amplitude: raw.parsed(&format!("synthetic.{which}.amplitude"), 1.0)?,
                    shape_seed: raw.parsed(&format!("synthetic.{which}.shape_seed"), 1)?,
                }),
                other => Err(CliError::Config(format!(
                    "key `{key}`: expected oracle, correct, misspecified or synthetic, got `{other}`"
                ))),
            }
        };
        let scenario_config = ScenarioConfig {
            dgp,
            estimator,
            event: NuisanceSpec::new(Target::Event, mode("event")?),
            coarsening: NuisanceSpec::new(Target::Coarsening, mode("coarsening")?),
            n: n_grid[0],
            replications: raw.parsed("run.replications", 200)?,
            master_seed,
        };
        for &n in &n_grid {
            ScenarioConfig { n, ..scenario_config }.validate()?;
        }

        let tv = TvConfig {
            n_grid: raw.list("tv.n_grid", &[100, 1000, 10_000])?,
            replications: raw.parsed("tv.replications", 200)?,
            low: raw.parsed("tv.low", 0.0)?,
            high: raw.parsed("tv.high", 1.0)?,
        };
        let smooth = SmoothConfig {
            alpha: raw.parsed("smooth.alpha", 0.3)?,
            amplitude: raw.parsed("smooth.amplitude", 1.0)?,
            shape_seed: raw.parsed("smooth.shape_seed", 1)?,
            z: raw.parsed("smooth.z", 0.5)?,
            n_grid: raw.list("smooth.n_grid", &tv.n_grid)?,
        };
        let norm = NormConfig {
            n_grid: raw.list("norm.n_grid", &[250, 1000, 4000])?,
            replications: raw.parsed("norm.replications", 50)?,
            bernoulli_p: raw.parsed("norm.bernoulli_p", 0.5)?,
            upper: raw.parsed("norm.upper", dgp.horizon)?,
        };
        let rates = RateStudyConfig {
            dgp,
            alphas: parse_alpha_pairs(&raw)?,
            n_grid: raw.list("rates.n_grid", &[1000, 4000, 16_000])?,
            replications: raw.parsed("rates.replications", 200)?,
            master_seed,
            amplitude_event: raw.parsed("rates.amplitude_event", 2.0)?,
            amplitude_coarsening: raw.parsed("rates.amplitude_coarsening", 2.0)?,
            shape_seed_event: raw.parsed("rates.shape_seed_event", 1)?,
            shape_seed_coarsening: raw.parsed("rates.shape_seed_coarsening", 2)?,
            kappa_n: raw.parsed("rates.kappa_n", 200_000)?,
            kappa_epsilon: raw.parsed("rates.kappa_epsilon", 0.1)?,
            kappa_seed: raw.parsed("rates.kappa_seed", 11)?,
        };
        Ok(Self {
            raw,
            scenario: scenario_config,
            n_grid,
            tv,
            smooth,
            norm,
            rates,
        })
    }
}
