//! Non-clairvoyant fractional algorithm with exponential buying rates.
//!
//! Each set `S` buys at rate `max_j x_S^j` where, for a request `j` on an
//! element of `S`, `D` is the residual delay summed over requests of `S` that
//! precede `j` and `A` is the integral of `D` since `j` arrived:
//!
//! `x_S^j = (1/k) * (ln(1+k)/c(S)) * D * exp((ln(1+k)/c(S)) * A)`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::engine::{Decision, OnlineAlgorithm, RequestInfo, TickView, SERVED_EPS};
use crate::error::Result;
use crate::model::{ElementId, RequestId, SetId, SetSystem};

/// Residual delay `d (1 - gamma)`, zero once covered.
pub fn residual_delay(rate: f64, gamma: f64) -> f64 {
    if gamma >= 1.0 {
        0.0
    } else {
        rate * (1.0 - gamma)
    }
}

/// Instantaneous buying rate induced by one request on a set.
pub fn request_rate(k: usize, cost: f64, prefix: f64, acc: f64) -> f64 {
    let kf = k as f64;
    let lambda = (1.0 + kf).ln() / cost;
    lambda * prefix * (lambda * acc).exp() / kf
}

/// Amount bought over a step of length `h` when `prefix` is held constant.
///
/// This integrates the rate exactly, so the bought amount always equals
/// `(exp(lambda * A) - 1) / k` for the accumulator `A`.
pub fn step_amount(k: usize, cost: f64, prefix: f64, acc: f64, h: f64) -> f64 {
    let kf = k as f64;
    let lambda = (1.0 + kf).ln() / cost;
    (lambda * acc).exp() * (lambda * prefix * h).exp_m1() / kf
}

#[derive(Clone, Debug)]
struct Entry {
    request: RequestId,
    acc: f64,
    bought: f64,
}

#[derive(Clone, Debug)]
struct OnfRequest {
    element: ElementId,
    release: f64,
    gamma: f64,
    served: bool,
    half_time: Option<f64>,
}

/// Per-set rate with the request that attained the maximum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetRate {
    pub set: SetId,
    pub rate: f64,
    pub witness: RequestId,
    /// Residual delay summed over requests up to the witness.
    pub prefix: f64,
    /// Effective `exp(lambda * A)` of the witness over the step.
    pub growth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnfStep {
    pub time: f64,
    pub dt: f64,
    /// Nonzero residual delays `(request, d (1 - gamma))` at the step start.
    pub residuals: Vec<(RequestId, f64)>,
    pub sets: Vec<SetRate>,
}

/// Per-step record of a fractional run, enough to re-check the dual and charging certificates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OnfSamples {
    pub steps: Vec<OnfStep>,
}

/// The fractional algorithm. Usable directly with the engine or as the
/// background process of the randomized roundings.
#[derive(Clone, Debug, Default)]
pub struct Onf {
    k: usize,
    costs: Vec<f64>,
    set_elements: Vec<Vec<ElementId>>,
    containing: Vec<Vec<SetId>>,
    requests: Vec<OnfRequest>,
    ledgers: Vec<VecDeque<Entry>>,
    pending: Vec<RequestId>,
    rates: Vec<f64>,
    element_rate: Vec<f64>,
    residual: Vec<f64>,
    cost_buy: f64,
    cost_delay: f64,
    closed_form_gap: f64,
    record: bool,
    samples: OnfSamples,
}

impl Onf {
    pub fn new() -> Self {
        Onf::default()
    }

    /// Keep per-step samples for certificate checks.
    pub fn recording(mut self) -> Self {
        self.record = true;
        self
    }

    pub fn init(&mut self, system: &SetSystem) {
        let m = system.set_count();
        let n = system.element_count();
        *self = Onf {
            record: self.record,
            k: system.max_membership(),
            costs: system.sets().iter().map(|s| s.cost).collect(),
            set_elements: system.sets().iter().map(|s| s.elements.clone()).collect(),
            containing: (0..n).map(|e| system.containing(e).to_vec()).collect(),
            ledgers: vec![VecDeque::new(); m],
            rates: vec![0.0; m],
            element_rate: vec![0.0; n],
            ..Onf::default()
        };
    }

    pub fn add_request(&mut self, info: RequestInfo) {
        debug_assert_eq!(info.id, self.requests.len());
        self.requests.push(OnfRequest {
            element: info.element,
            release: info.release,
            gamma: 0.0,
            served: false,
            half_time: None,
        });
        self.residual.push(0.0);
        self.pending.push(info.id);
        for &i in &self.containing[info.element] {
            self.ledgers[i].push_back(Entry {
                request: info.id,
                acc: 0.0,
                bought: 0.0,
            });
        }
    }

    pub fn max_membership(&self) -> usize {
        self.k
    }

    pub fn coverage(&self, id: RequestId) -> f64 {
        self.requests[id].gamma
    }

    pub fn is_served(&self, id: RequestId) -> bool {
        self.requests[id].served
    }

    /// First time the request reached coverage 1/2.
    pub fn half_time(&self, id: RequestId) -> Option<f64> {
        self.requests[id].half_time
    }

    pub fn release(&self, id: RequestId) -> f64 {
        self.requests[id].release
    }

    /// Requests with coverage below 1, in release order.
    pub fn pending(&self) -> &[RequestId] {
        &self.pending
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn cost_buy(&self) -> f64 {
        self.cost_buy
    }

    /// Euler-sum delay on the uncovered fractions.
    pub fn cost_delay(&self) -> f64 {
        self.cost_delay
    }

    /// Largest relative gap between the accumulated per-request buying and its closed form.
    pub fn closed_form_gap(&self) -> f64 {
        self.closed_form_gap
    }

    pub fn samples(&self) -> &OnfSamples {
        &self.samples
    }

    pub fn take_samples(&mut self) -> OnfSamples {
        std::mem::take(&mut self.samples)
    }

    fn serve(&mut self, id: RequestId, time: f64) {
        let r = &mut self.requests[id];
        r.gamma = 1.0;
        r.served = true;
        if r.half_time.is_none() {
            r.half_time = Some(time);
        }
    }

    fn drop_served_fronts(&mut self) {
        let requests = &self.requests;
        for ledger in &mut self.ledgers {
            while ledger.front().is_some_and(|e| requests[e.request].served) {
                ledger.pop_front();
            }
        }
        self.pending.retain(|&j| !requests[j].served);
    }

    /// Record an integral purchase (used for deadline handling).
    pub fn apply_integral(&mut self, set: SetId, time: f64) {
        self.cost_buy += self.costs[set];
        let covered: Vec<RequestId> = self
            .pending
            .iter()
            .copied()
            .filter(|&j| self.set_elements[set].binary_search(&self.requests[j].element).is_ok())
            .collect();
        for j in covered {
            self.serve(j, time);
        }
        self.drop_served_fronts();
    }

    /// Compute the rates for the current step and advance coverage over it.
    pub fn step(&mut self, view: &TickView) -> &[f64] {
        let t = view.time();
        let h = view.dt();
        let k = self.k;
        for x in self.rates.iter_mut() {
            *x = 0.0;
        }
        if h <= 0.0 {
            return &self.rates;
        }

        let mut residuals = Vec::new();
        for &j in &self.pending {
            let d = residual_delay(view.momentary_delay(j), self.requests[j].gamma);
            self.residual[j] = d;
            self.cost_delay += d * h;
            if self.record && d > 0.0 {
                residuals.push((j, d));
            }
        }

        let mut set_rates = Vec::new();
        for (i, ledger) in self.ledgers.iter_mut().enumerate() {
            let cost = self.costs[i];
            let lambda = (1.0 + k as f64).ln() / cost;
            let mut prefix = 0.0;
            let mut best = 0.0;
            let mut witness = None;
            for entry in ledger.iter_mut() {
                let r = &self.requests[entry.request];
                if !r.served {
                    prefix += self.residual[entry.request];
                }
                if prefix <= 0.0 {
                    continue;
                }
                let amount = step_amount(k, cost, prefix, entry.acc, h);
                if amount > best {
                    best = amount;
                    witness = Some((entry.request, prefix, entry.acc));
                }
                entry.acc += prefix * h;
                entry.bought += amount;
                let closed = (lambda * entry.acc).exp_m1() / k as f64;
                let gap = (entry.bought - closed).abs() / closed.max(f64::MIN_POSITIVE);
                if gap > self.closed_form_gap {
                    self.closed_form_gap = gap;
                }
            }
            if let Some((w, prefix, _)) = witness {
                let rate = best / h;
                self.rates[i] = rate;
                self.cost_buy += cost * best;
                if self.record {
                    let growth = cost * rate * k as f64 / ((1.0 + k as f64).ln() * prefix);
                    set_rates.push(SetRate {
                        set: i,
                        rate,
                        witness: w,
                        prefix,
                        growth,
                    });
                }
            }
        }

        // Credit coverage at the end of the step, summing in set order like the engine.
        for v in self.element_rate.iter_mut() {
            *v = 0.0;
        }
        for (i, &x) in self.rates.iter().enumerate() {
            if x > 0.0 {
                for &e in &self.set_elements[i] {
                    self.element_rate[e] += x;
                }
            }
        }
        let t_end = t + h;
        let mut any_served = false;
        for idx in 0..self.pending.len() {
            let j = self.pending[idx];
            let r = &mut self.requests[j];
            let rate = self.element_rate[r.element];
            if rate > 0.0 {
                r.gamma = (r.gamma + rate * h).min(1.0);
                if r.half_time.is_none() && r.gamma >= 0.5 {
                    r.half_time = Some(t_end);
                }
                if r.gamma >= 1.0 - SERVED_EPS {
                    r.gamma = 1.0;
                    r.served = true;
                    any_served = true;
                }
            }
        }
        if any_served {
            self.drop_served_fronts();
        }
        if self.record {
            self.samples.steps.push(OnfStep {
                time: t,
                dt: h,
                residuals,
                sets: set_rates,
            });
        }
        &self.rates
    }
}

impl OnlineAlgorithm for Onf {
    fn name(&self) -> &str {
        "onf"
    }

    fn start(&mut self, system: &SetSystem, _seed: u64) -> Result<()> {
        self.init(system);
        Ok(())
    }

    fn on_request_arrival(&mut self, request: RequestInfo, _view: &TickView) -> Result<()> {
        self.add_request(request);
        Ok(())
    }

    fn on_deadline_announced(&mut self, id: RequestId, view: &TickView) -> Result<Vec<SetId>> {
        let set = view.system().cheapest_containing(self.requests[id].element);
        self.apply_integral(set, view.time());
        Ok(vec![set])
    }

    fn on_tick(&mut self, view: &TickView) -> Result<Decision> {
        Ok(Decision::rates(self.step(view).to_vec()))
    }
}

/// Buys each set at the plain sum of residual delays of its pending requests.
///
/// Exists to exhibit why the maximum in the fractional algorithm matters.
#[derive(Clone, Debug, Default)]
pub struct LinearBuying;

impl OnlineAlgorithm for LinearBuying {
    fn name(&self) -> &str {
        "linear-buying-test"
    }

    fn start(&mut self, _system: &SetSystem, _seed: u64) -> Result<()> {
        Ok(())
    }

    fn on_request_arrival(&mut self, _request: RequestInfo, _view: &TickView) -> Result<()> {
        Ok(())
    }

    fn on_deadline_announced(&mut self, id: RequestId, view: &TickView) -> Result<Vec<SetId>> {
        Ok(vec![view.system().cheapest_containing(view.info(id).element)])
    }

    fn on_tick(&mut self, view: &TickView) -> Result<Decision> {
        let system = view.system();
        let mut rates = vec![0.0; system.set_count()];
        for &j in view.pending() {
            let d = residual_delay(view.momentary_delay(j), view.coverage(j));
            for &i in system.containing(view.info(j).element) {
                rates[i] += d;
            }
        }
        Ok(Decision::rates(rates))
    }
}
