//! Kaplan-Meier product-limit estimator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivalObs {
    pub time: i32,
    /// `false` marks a right-censored observation.
    pub event: bool,
}

impl SurvivalObs {
    pub fn event(time: i32) -> Self {
        SurvivalObs { time, event: true }
    }

    pub fn censored(time: i32) -> Self {
        SurvivalObs { time, event: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmPoint {
    pub time: i32,
    pub survival: f64,
    pub at_risk: usize,
    pub events: usize,
    pub censored: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    /// Starts with `(0, 1.0)`; afterwards one point per distinct observed time.
    pub points: Vec<KmPoint>,
}

impl KmCurve {
    /// S(t): the survival estimate just after time `t`.
    pub fn survival_at(&self, t: i32) -> f64 {
        let idx = self.points.partition_point(|p| p.time <= t);
        if idx == 0 {
            1.0
        } else {
            self.points[idx - 1].survival
        }
    }

    pub fn n(&self) -> usize {
        self.points.first().map_or(0, |p| p.at_risk)
    }
}

/// Deaths at a given time are removed from the risk set before censorings
/// at the same time.
pub fn kaplan_meier(obs: &[SurvivalObs]) -> Result<KmCurve> {
    if obs.is_empty() {
        return Err(Error::EmptyInput("survival observations"));
    }
    if let Some(bad) = obs.iter().find(|o| o.time < 0) {
        return Err(Error::InvalidParams(format!("negative survival time {}", bad.time)));
    }
    let mut by_time: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    for o in obs {
        let e = by_time.entry(o.time).or_default();
        if o.event {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let mut at_risk = obs.len();
    let mut s = 1.0;
    let mut points = vec![KmPoint { time: 0, survival: 1.0, at_risk, events: 0, censored: 0 }];
    for (time, (events, censored)) in by_time {
        if events > 0 {
            s *= 1.0 - events as f64 / at_risk as f64;
        }
        points.push(KmPoint { time, survival: s, at_risk, events, censored });
        at_risk -= events + censored;
    }
    Ok(KmCurve { points })
}
