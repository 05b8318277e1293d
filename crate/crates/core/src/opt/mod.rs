//! Offline optimum for small instances, LP export and certificate checks.

pub mod certify;
pub mod lp;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::engine::{Purchase, Trace};
use crate::error::{Error, Result};
use crate::model::{snap, Instance, SetId};

pub const MAX_OPT_SETS: usize = 10;
pub const MAX_OPT_REQUESTS: usize = 14;
pub const MAX_OPT_CANDIDATES: usize = 24;

/// Integral purchases at fixed times.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PurchaseSchedule {
    pub purchases: Vec<(f64, SetId)>,
}

/// Cost breakdown of a schedule on an instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleCost {
    pub buy: f64,
    pub delay: f64,
    pub penalty: f64,
    pub served_at: Vec<Option<f64>>,
    pub request_delay: Vec<f64>,
    pub expired: Vec<usize>,
}

impl ScheduleCost {
    pub fn total(&self) -> f64 {
        self.buy + self.delay
    }
}

impl PurchaseSchedule {
    pub fn new(mut purchases: Vec<(f64, SetId)>) -> Self {
        purchases.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        PurchaseSchedule { purchases }
    }

    /// Exact continuous-time cost. A purchase serves every request on its
    /// elements released at or before the purchase time.
    pub fn evaluate(&self, inst: &Instance, penalty: Option<f64>) -> Result<ScheduleCost> {
        let m = inst.system.set_count();
        let penalty_value = penalty.unwrap_or(1e6 * inst.system.max_cost());
        let mut buy = 0.0;
        for &(t, set) in &self.purchases {
            if set >= m {
                return Err(Error::Domain(format!("schedule buys unknown set {set}")));
            }
            if !(0.0..=snap(inst.horizon)).contains(&t) {
                return Err(Error::Domain(format!("purchase time {t} outside [0, {}]", inst.horizon)));
            }
            buy += inst.system.cost(set);
        }
        let mut delay = 0.0;
        let mut penalty_total = 0.0;
        let mut served_at = Vec::with_capacity(inst.requests.len());
        let mut request_delay = Vec::with_capacity(inst.requests.len());
        let mut expired = Vec::new();
        for r in &inst.requests {
            let tau = self
                .purchases
                .iter()
                .find(|&&(t, set)| {
                    snap(t) >= r.release && inst.system.set(set).elements.binary_search(&r.element).is_ok()
                })
                .map(|&(t, _)| t);
            let deadline = r.delay.hard_deadline();
            let missed = deadline.is_some_and(|d| tau.is_none_or(|t| t > snap(d)));
            let end = tau
                .unwrap_or(inst.horizon)
                .min(deadline.unwrap_or(f64::INFINITY))
                .min(inst.horizon)
                .max(r.release);
            let mut d = r.delay.integral(r.release, end);
            if missed {
                d += penalty_value;
                penalty_total += penalty_value;
                expired.push(r.id);
            }
            delay += d;
            request_delay.push(d);
            served_at.push(if missed { None } else { tau });
        }
        Ok(ScheduleCost {
            buy,
            delay,
            penalty: penalty_total,
            served_at,
            request_delay,
            expired,
        })
    }

    pub fn to_trace(&self, inst: &Instance, name: &str) -> Result<Trace> {
        let cost = self.evaluate(inst, None)?;
        let mut bought = vec![0.0; inst.system.set_count()];
        for &(_, s) in &self.purchases {
            bought[s] += 1.0;
        }
        Ok(Trace {
            algorithm: name.to_string(),
            instance_digest: inst.digest(),
            dt: 0.0,
            seed: 0,
            horizon: inst.horizon,
            purchases: self
                .purchases
                .iter()
                .map(|&(time, set)| Purchase {
                    time,
                    set,
                    amount: 1.0,
                    integral: true,
                })
                .collect(),
            bought,
            delay_samples: Vec::new(),
            cost_buy: cost.buy,
            cost_delay: cost.delay,
            penalty_cost: cost.penalty,
            served_at: cost.served_at,
            request_delay: cost.request_delay,
            expired: cost.expired,
        })
    }
}

/// Times at which an optimal schedule may buy: releases, breakpoints, deadlines, 0 and the horizon.
pub fn candidate_times(inst: &Instance) -> Vec<f64> {
    inst.event_times()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptSolution {
    pub schedule: PurchaseSchedule,
    pub cost: f64,
}

/// Exact optimum over schedules buying only at the candidate times.
pub fn solve_opt(inst: &Instance) -> Result<OptSolution> {
    solve_opt_with(inst, &[])
}

/// Exact optimum over schedules buying only at the candidate times or at `extra` times.
pub fn solve_opt_with(inst: &Instance, extra: &[f64]) -> Result<OptSolution> {
    let m = inst.system.set_count();
    let n_req = inst.requests.len();
    let mut times: Vec<f64> = extra
        .iter()
        .copied()
        .filter(|t| (0.0..=inst.horizon).contains(t))
        .chain(candidate_times(inst))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    if m > MAX_OPT_SETS || n_req > MAX_OPT_REQUESTS || times.len() > MAX_OPT_CANDIDATES {
        return Err(Error::Guard(format!(
            "exact optimum limited to {MAX_OPT_SETS} sets, {MAX_OPT_REQUESTS} requests and \
             {MAX_OPT_CANDIDATES} candidate times (got {m}, {n_req}, {}); use the heuristic schedule instead",
            times.len()
        )));
    }
    Solver::new(inst, times).solve()
}

struct PurchaseOption {
    served: u32,
    cost: f64,
    sets: u32,
}

struct Solver<'a> {
    inst: &'a Instance,
    times: Vec<f64>,
    options: Vec<PurchaseOption>,
    /// Requests released at each candidate index.
    arrivals: Vec<u32>,
    /// Requests whose deadline falls on each candidate index.
    due: Vec<u32>,
    interval_delay: Vec<Vec<f64>>,
    penalty: f64,
    memo: HashMap<(usize, u32), (f64, u32)>,
}

impl<'a> Solver<'a> {
    fn new(inst: &'a Instance, times: Vec<f64>) -> Self {
        let m = inst.system.set_count();
        let nt = times.len();
        // Index of the first candidate at or after t.
        let index_at = |t: f64| times.iter().position(|&c| snap(c) >= t).unwrap_or(nt - 1);

        let mut arrivals = vec![0u32; nt];
        let mut due = vec![0u32; nt];
        for (j, r) in inst.requests.iter().enumerate() {
            arrivals[index_at(r.release)] |= 1 << j;
            if let Some(d) = r.delay.hard_deadline() {
                due[index_at(d)] |= 1 << j;
            }
        }
        let interval_delay = (0..nt)
            .map(|k| {
                inst.requests
                    .iter()
                    .map(|r| {
                        if k + 1 < nt {
                            r.delay.integral(times[k].max(r.release), times[k + 1])
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();

        // Cheapest set combination for every distinct served-request mask.
        let mut best: HashMap<u32, (f64, u32)> = HashMap::new();
        for subset in 1u32..(1 << m) {
            let mut served = 0u32;
            let mut cost = 0.0;
            for i in 0..m {
                if subset & (1 << i) != 0 {
                    cost += inst.system.cost(i);
                    for (j, r) in inst.requests.iter().enumerate() {
                        if inst.system.set(i).elements.binary_search(&r.element).is_ok() {
                            served |= 1 << j;
                        }
                    }
                }
            }
            if served == 0 {
                continue;
            }
            let entry = best.entry(served).or_insert((f64::INFINITY, 0));
            if cost < entry.0 {
                *entry = (cost, subset);
            }
        }
        let mut options: Vec<PurchaseOption> = best
            .into_iter()
            .map(|(served, (cost, sets))| PurchaseOption { served, cost, sets })
            .collect();
        // Drop options dominated by a cheaper option serving a superset.
        let snapshot: Vec<(u32, f64)> = options.iter().map(|o| (o.served, o.cost)).collect();
        options.retain(|o| {
            !snapshot
                .iter()
                .any(|&(s, c)| s != o.served && s & o.served == o.served && c <= o.cost)
        });
        options.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.served.cmp(&b.served)));

        Solver {
            inst,
            times,
            options,
            arrivals,
            due,
            interval_delay,
            penalty: 1e6 * inst.system.max_cost(),
            memo: HashMap::new(),
        }
    }

    /// Minimum cost from candidate `k` with `pending` requests (arrivals at `k` included).
    fn cost_from(&mut self, k: usize, pending: u32) -> f64 {
        if let Some(&(c, _)) = self.memo.get(&(k, pending)) {
            return c;
        }
        let mut best = self.after_purchase(k, pending);
        let mut choice = 0u32;
        for idx in 0..self.options.len() {
            let (served, cost, sets) = {
                let o = &self.options[idx];
                (o.served, o.cost, o.sets)
            };
            if served & pending == 0 || cost >= best {
                continue;
            }
            let total = cost + self.after_purchase(k, pending & !served);
            if total < best {
                best = total;
                choice = sets;
            }
        }
        self.memo.insert((k, pending), (best, choice));
        best
    }

    fn after_purchase(&mut self, k: usize, pending: u32) -> f64 {
        let mut cost = 0.0;
        let mut left = pending;
        let missed = left & self.due[k];
        if missed != 0 {
            cost += self.penalty * missed.count_ones() as f64;
            left &= !missed;
        }
        if k + 1 == self.times.len() {
            return cost;
        }
        let mut bits = left;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            cost += self.interval_delay[k][j];
            bits &= bits - 1;
        }
        cost + self.cost_from(k + 1, left | self.arrivals[k + 1])
    }

    fn solve(mut self) -> Result<OptSolution> {
        let cost = self.cost_from(0, self.arrivals[0]);
        let mut purchases = Vec::new();
        let mut pending = self.arrivals[0];
        for k in 0..self.times.len() {
            let (_, sets) = self.memo[&(k, pending)];
            let mut served = 0u32;
            for i in 0..self.inst.system.set_count() {
                if sets & (1 << i) != 0 {
                    purchases.push((self.times[k], i));
                    for (j, r) in self.inst.requests.iter().enumerate() {
                        if self.inst.system.set(i).elements.binary_search(&r.element).is_ok() {
                            served |= 1 << j;
                        }
                    }
                }
            }
            pending &= !served;
            pending &= !self.due[k];
            if k + 1 < self.times.len() {
                pending |= self.arrivals[k + 1];
            }
        }
        Ok(OptSolution {
            schedule: PurchaseSchedule::new(purchases),
            cost,
        })
    }
}

/// Cheap upper bound for instances beyond the exact solver: the better of
/// never buying and buying each request's cheapest set when its delay would
/// otherwise exceed that set's cost.
pub fn heuristic_schedule(inst: &Instance) -> Result<OptSolution> {
    let idle = PurchaseSchedule::default();
    let mut greedy = Vec::new();
    for r in &inst.requests {
        let set = inst.system.cheapest_containing(r.element);
        let end = r.delay.hard_deadline().unwrap_or(inst.horizon);
        let total = r.delay.integral(r.release, end);
        if r.delay.hard_deadline().is_some() || total > inst.system.cost(set) {
            greedy.push((r.release, set));
        }
    }
    let greedy = PurchaseSchedule::new(greedy);
    let a = idle.evaluate(inst, None)?.total();
    let b = greedy.evaluate(inst, None)?.total();
    Ok(if a <= b {
        OptSolution { schedule: idle, cost: a }
    } else {
        OptSolution { schedule: greedy, cost: b }
    })
}
