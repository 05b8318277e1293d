//! Post-hoc certificate checks for fractional and counter runs.

use serde::{Deserialize, Serialize};

use crate::engine::Trace;
use crate::error::{Error, Result};
use crate::model::{snap, Instance, RequestId};
use crate::onf::OnfSamples;

/// Relative tolerance `10 dt` plus a fixed absolute slack.
pub fn tolerance(dt: f64) -> (f64, f64) {
    (10.0 * dt, 1e-9)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    /// Smallest relative slack `(c - lhs) / c` over the per-set constraints at release times.
    pub set_slack: f64,
    pub set_slack_at: Option<(usize, RequestId)>,
    /// Smallest slack `d - y` over the per-request delay constraints.
    pub delay_slack: f64,
    pub dual_objective: f64,
    /// Dual objective scaled down to make the assignment feasible.
    pub lower_bound: f64,
    pub passed: bool,
}

fn check_samples(inst: &Instance, samples: &OnfSamples) -> Result<()> {
    if samples.steps.is_empty() && !inst.requests.is_empty() {
        return Err(Error::MissingData("the trace has no per-step fractional samples".into()));
    }
    let n = inst.requests.len();
    let m = inst.system.set_count();
    for step in &samples.steps {
        if step.residuals.iter().any(|&(j, _)| j >= n) || step.sets.iter().any(|r| r.set >= m || r.witness >= n) {
            return Err(Error::Domain("samples refer to requests or sets outside the instance".into()));
        }
    }
    Ok(())
}

/// Check the dual assignment `y_j(t) = d_j(t) (1 - gamma_j(t))` recorded by a fractional run.
pub fn check_dual_certificate(inst: &Instance, samples: &OnfSamples, dt: f64) -> Result<DualReport> {
    check_samples(inst, samples)?;
    let (rel, abs) = tolerance(dt);
    let n = inst.requests.len();
    let order = inst.arrival_order();

    let mut dual_objective = 0.0;
    let mut delay_slack = f64::INFINITY;
    let mut dense = vec![0.0; n];
    // Per set, accumulated prefix sums for each member request since its release.
    let members: Vec<Vec<RequestId>> = (0..inst.system.set_count())
        .map(|i| {
            order
                .iter()
                .copied()
                .filter(|&j| inst.system.set(i).elements.binary_search(&inst.requests[j].element).is_ok())
                .collect()
        })
        .collect();
    let mut acc: Vec<Vec<f64>> = members.iter().map(|m| vec![0.0; m.len()]).collect();

    for step in &samples.steps {
        for &(j, y) in &step.residuals {
            dense[j] = y;
            dual_objective += y * step.dt;
            let d = inst.requests[j].delay.rate_at(snap(step.time));
            delay_slack = delay_slack.min(d - y);
        }
        for (i, list) in members.iter().enumerate() {
            let mut prefix = 0.0;
            for (pos, &j) in list.iter().enumerate() {
                prefix += dense[j];
                if snap(step.time) >= inst.requests[j].release {
                    acc[i][pos] += prefix * step.dt;
                }
            }
        }
        for &(j, _) in &step.residuals {
            dense[j] = 0.0;
        }
    }
    if delay_slack == f64::INFINITY {
        delay_slack = 0.0;
    }

    let mut set_slack = f64::INFINITY;
    let mut set_slack_at = None;
    for (i, list) in members.iter().enumerate() {
        let c = inst.system.cost(i);
        for (pos, &j) in list.iter().enumerate() {
            let slack = (c - acc[i][pos]) / c;
            if slack < set_slack {
                set_slack = slack;
                set_slack_at = Some((i, j));
            }
        }
    }
    if set_slack == f64::INFINITY {
        set_slack = 1.0;
    }
    let violation = (-set_slack).max(0.0);
    Ok(DualReport {
        set_slack,
        set_slack_at,
        delay_slack,
        dual_objective,
        lower_bound: dual_objective / (1.0 + violation),
        passed: set_slack >= -rel - abs && delay_slack >= -abs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargingReport {
    /// Largest relative gap between a set's charges and its buying rate times cost.
    pub identity_gap: f64,
    /// Largest ratio of a request's total charge to `2 ln(1+k)` times its residual delay.
    pub request_ratio: f64,
    pub passed: bool,
}

/// Recompute the per-request charges of the buying cost and check both charging identities.
pub fn check_charging(inst: &Instance, samples: &OnfSamples, dt: f64) -> Result<ChargingReport> {
    check_samples(inst, samples)?;
    let (rel, abs) = tolerance(dt);
    let k = inst.system.max_membership() as f64;
    let log = (1.0 + k).ln();
    let n = inst.requests.len();
    let order = inst.arrival_order();
    let mut rank = vec![0usize; n];
    for (pos, &j) in order.iter().enumerate() {
        rank[j] = pos;
    }
    let mut charge = vec![0.0; n];
    let mut identity_gap: f64 = 0.0;
    let mut request_ratio: f64 = 0.0;

    for step in &samples.steps {
        for rate in &step.sets {
            if rate.rate <= 0.0 {
                continue;
            }
            let set = inst.system.set(rate.set);
            let cost = set.cost;
            let scale = log / k * rate.growth;
            let mut total = 0.0;
            for &(j, y) in &step.residuals {
                let r = &inst.requests[j];
                if rank[j] <= rank[rate.witness] && set.elements.binary_search(&r.element).is_ok() {
                    let z = scale * y;
                    charge[j] += z;
                    total += z;
                }
            }
            let target = cost * rate.rate;
            identity_gap = identity_gap.max((total - target).abs() / target);
        }
        for &(j, y) in &step.residuals {
            if charge[j] > 0.0 {
                request_ratio = request_ratio.max(charge[j] / (2.0 * log * y));
            }
            charge[j] = 0.0;
        }
    }
    Ok(ChargingReport {
        identity_gap,
        request_ratio,
        passed: identity_gap <= rel + abs && request_ratio <= 1.0 + rel + abs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterReport {
    /// `cost_buy / (k * cost_delay)`.
    pub buy_to_delay: f64,
    /// Largest `(future delay of requests pending on a set) / cost` over release times.
    pub pending_delay_ratio: f64,
    pub passed: bool,
}

/// Checks for a counter run: buying is at most `k` times delay, and the delay
/// requests pending on a set accrue afterwards never exceeds the set's cost.
pub fn check_counter(inst: &Instance, trace: &Trace) -> Result<CounterReport> {
    if trace.served_at.len() != inst.requests.len() {
        return Err(Error::MissingData("trace service times do not match the instance".into()));
    }
    let k = inst.system.max_membership() as f64;
    let dt = trace.dt;
    let buy_to_delay = if trace.cost_delay > 0.0 {
        trace.cost_buy / (k * trace.cost_delay)
    } else if trace.cost_buy > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let mut pending_delay_ratio: f64 = 0.0;
    let mut passed = buy_to_delay <= 1.0 + 1e-9;
    let mut times: Vec<f64> = inst.requests.iter().map(|r| r.release).collect();
    times.push(0.0);
    for set in inst.system.sets() {
        for &t in &times {
            let mut future = 0.0;
            let mut rate_sum = 0.0;
            for (j, r) in inst.requests.iter().enumerate() {
                if set.elements.binary_search(&r.element).is_err() || r.release > snap(t) {
                    continue;
                }
                let end = trace.served_at[j].unwrap_or(inst.horizon);
                if end > t {
                    future += r.delay.integral(t, end);
                    rate_sum += r.delay.max_rate();
                }
            }
            let slack = rate_sum * dt + 1e-9 * set.cost;
            pending_delay_ratio = pending_delay_ratio.max(future / set.cost);
            if future > set.cost + slack {
                passed = false;
            }
        }
    }
    Ok(CounterReport {
        buy_to_delay,
        pending_delay_ratio,
        passed,
    })
}
