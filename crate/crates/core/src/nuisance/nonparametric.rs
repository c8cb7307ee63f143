use super::fit::{risk_records, RiskRecord};
use super::Target;
use crate::dgp::Sample;
use crate::error::{Error, Result};
use crate::stepfun::StepPath;

/// Nelson–Aalen cumulative hazards within covariate strata.
///
/// Stratum `s` holds `z` in `(b_{s-1}, b_s]` for the sorted boundaries
/// `b_1 < ... < b_{S-1}`, with the outer strata unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedNPEstimate {
    pub boundaries: Vec<f64>,
    pub cumulative_hazards: Vec<StepPath>,
}

impl StratifiedNPEstimate {
    pub fn stratum_of(&self, z: f64) -> usize {
        self.boundaries.partition_point(|b| *b < z)
    }

    pub fn cumulative_hazard(&self, z: f64) -> &StepPath {
        &self.cumulative_hazards[self.stratum_of(z)]
    }
}

/// Nelson–Aalen estimate per stratum: jumps `d_j / r_j` at each distinct
/// event time, with subjects at risk on `(entry, exit]`.
pub fn nelson_aalen(records: &[RiskRecord]) -> Result<StepPath> {
    let mut events: Vec<f64> = records.iter().filter(|r| r.event).map(|r| r.exit).collect();
    events.sort_by(f64::total_cmp);
    let mut exits: Vec<f64> = records.iter().map(|r| r.exit).collect();
    let mut entries: Vec<f64> = records.iter().map(|r| r.entry).collect();
    exits.sort_by(f64::total_cmp);
    entries.sort_by(f64::total_cmp);
    let count_at_least = |v: &[f64], t: f64| v.len() - v.partition_point(|x| *x < t);

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut acc = 0.0;
    let mut j = 0;
    while j < events.len() {
        let t = events[j];
        let mut d = 0;
        while j < events.len() && events[j] == t {
            d += 1;
            j += 1;
        }
        let at_risk = count_at_least(&exits, t) - count_at_least(&entries, t);
        if at_risk == 0 {
            return Err(Error::InvalidInput(format!("event at {t} with an empty risk set")));
        }
        acc += d as f64 / at_risk as f64;
        times.push(t);
        values.push(acc);
    }
    StepPath::new(0.0, times, values)
}

pub fn nelson_aalen_stratified(sample: &Sample, target: Target, boundaries: &[f64]) -> Result<StratifiedNPEstimate> {
    if boundaries.windows(2).any(|w| w[1] <= w[0]) || boundaries.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidInput(
            "stratum boundaries must be finite and increasing".into(),
        ));
    }
    let records = risk_records(sample, target)?;
    let mut strata: Vec<Vec<RiskRecord>> = vec![Vec::new(); boundaries.len() + 1];
    for r in records {
        strata[boundaries.partition_point(|b| *b < r.z)].push(r);
    }
    let cumulative_hazards = strata
        .iter()
        .enumerate()
        .map(|(s, recs)| {
            if recs.is_empty() {
                Err(Error::EmptyStratum { stratum: s })
            } else {
                nelson_aalen(recs)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StratifiedNPEstimate {
        boundaries: boundaries.to_vec(),
        cumulative_hazards,
    })
}
