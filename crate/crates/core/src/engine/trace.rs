use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{RequestId, SetId};

/// How much per-step detail a run keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceLevel {
    /// Costs, integral purchases, service times.
    #[default]
    Summary,
    /// Also fractional purchase events and per-step delay samples.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Purchase {
    pub time: f64,
    pub set: SetId,
    /// Fraction of the set bought; 1 for integral purchases.
    pub amount: f64,
    pub integral: bool,
}

/// Outcome of one simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub algorithm: String,
    pub instance_digest: String,
    pub dt: f64,
    pub seed: u64,
    pub horizon: f64,
    pub purchases: Vec<Purchase>,
    /// Total amount bought per set (integral purchases count 1 each).
    pub bought: Vec<f64>,
    /// Total momentary delay rate at each step start; empty unless the trace level is full.
    pub delay_samples: Vec<f64>,
    pub cost_buy: f64,
    /// Accrued delay including deadline penalties.
    pub cost_delay: f64,
    pub penalty_cost: f64,
    /// Service time per request; `None` if the request was never served.
    pub served_at: Vec<Option<f64>>,
    pub request_delay: Vec<f64>,
    /// Requests left pending past an announced deadline.
    pub expired: Vec<RequestId>,
}

impl Trace {
    pub fn total(&self) -> f64 {
        self.cost_buy + self.cost_delay
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }
}

/// Ratio of total costs; 0/0 is 1 and a positive cost against 0 is infinite.
pub fn competitive_ratio(alg: &Trace, opt: &Trace) -> Result<f64> {
    if alg.instance_digest != opt.instance_digest {
        return Err(Error::DigestMismatch(
            alg.instance_digest.clone(),
            opt.instance_digest.clone(),
        ));
    }
    Ok(cost_ratio(alg.total(), opt.total()))
}

pub fn cost_ratio(alg: f64, opt: f64) -> f64 {
    if opt == 0.0 {
        if alg == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        alg / opt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(digest: &str, buy: f64, delay: f64) -> Trace {
        Trace {
            algorithm: "t".into(),
            instance_digest: digest.into(),
            dt: 0.1,
            seed: 0,
            horizon: 1.0,
            purchases: vec![],
            bought: vec![],
            delay_samples: vec![],
            cost_buy: buy,
            cost_delay: delay,
            penalty_cost: 0.0,
            served_at: vec![None, Some(0.5)],
            request_delay: vec![],
            expired: vec![],
        }
    }

    #[test]
    fn ratio_conventions() {
        let a = trace("x", 1.0, 2.0);
        assert_eq!(competitive_ratio(&a, &a).unwrap(), 1.0);
        assert_eq!(competitive_ratio(&trace("x", 0.0, 0.0), &trace("x", 0.0, 0.0)).unwrap(), 1.0);
        assert!(competitive_ratio(&a, &trace("x", 0.0, 0.0)).unwrap().is_infinite());
        assert_eq!(competitive_ratio(&trace("x", 3.0, 1.0), &trace("x", 1.0, 0.0)).unwrap(), 4.0);
        assert!(matches!(
            competitive_ratio(&a, &trace("y", 1.0, 2.0)),
            Err(Error::DigestMismatch(..))
        ));
    }

    #[test]
    fn json_round_trip() {
        let a = trace("x", 1.25, 0.1);
        assert_eq!(Trace::from_json(&a.to_json()).unwrap(), a);
    }
}
