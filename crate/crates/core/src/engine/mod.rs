//! Fixed-step simulation loop shared by every algorithm and request source.

mod trace;

pub use trace::{competitive_ratio, cost_ratio, Purchase, Trace, TraceLevel};

use crate::error::{Error, Result};
use crate::model::{snap, ElementId, Instance, Request, RequestId, SetId, SetSystem};

/// Coverage at or above `1 - SERVED_EPS` counts as served.
pub const SERVED_EPS: f64 = 1e-9;

/// Largest number of steps a single run may take.
pub const MAX_STEPS: u64 = 100_000_000;

/// What an algorithm learns when a request arrives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RequestInfo {
    pub id: RequestId,
    pub element: ElementId,
    pub release: f64,
}

/// Purchases emitted at one tick.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Decision {
    /// Sets bought integrally at the current time.
    pub buy: Vec<SetId>,
    /// Fractional buying rates, one per set; empty for integral algorithms.
    pub rates: Vec<f64>,
}

impl Decision {
    pub fn none() -> Self {
        Decision::default()
    }

    pub fn buy(sets: Vec<SetId>) -> Self {
        Decision {
            buy: sets,
            rates: Vec::new(),
        }
    }

    pub fn rates(rates: Vec<f64>) -> Self {
        Decision {
            buy: Vec::new(),
            rates,
        }
    }
}

/// An online algorithm driven by the engine.
pub trait OnlineAlgorithm {
    fn name(&self) -> &str;

    /// Called once before the first step.
    fn start(&mut self, system: &SetSystem, seed: u64) -> Result<()>;

    fn on_request_arrival(&mut self, request: RequestInfo, view: &TickView) -> Result<()>;

    /// A pending request reached its hard deadline; returned sets are bought immediately.
    fn on_deadline_announced(&mut self, id: RequestId, view: &TickView) -> Result<Vec<SetId>>;

    fn on_tick(&mut self, view: &TickView) -> Result<Decision>;
}

/// What a request source may observe about the running algorithm.
#[derive(Clone, Copy, Debug)]
pub struct Observed<'a> {
    pub time: f64,
    /// Cumulative amount bought per set before any purchase at `time`.
    pub bought: &'a [f64],
}

/// Supplies requests to the engine, possibly adapting to the algorithm's purchases.
pub trait RequestSource {
    fn system(&self) -> &SetSystem;

    fn horizon(&self) -> f64;

    /// Requests released at or before `t` that were not returned earlier.
    /// Ids must continue the sequence `0, 1, 2, ...`.
    fn poll(&mut self, t: f64, observed: &Observed) -> Result<Vec<Request>>;

    /// The instance as realized so far.
    fn realized(&self) -> Instance;
}

/// A fixed instance replayed as a request source.
pub struct StaticSource<'a> {
    instance: &'a Instance,
    order: Vec<RequestId>,
    next: usize,
}

impl<'a> StaticSource<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        StaticSource {
            instance,
            order: instance.arrival_order(),
            next: 0,
        }
    }
}

impl RequestSource for StaticSource<'_> {
    fn system(&self) -> &SetSystem {
        &self.instance.system
    }

    fn horizon(&self) -> f64 {
        self.instance.horizon
    }

    fn poll(&mut self, t: f64, _observed: &Observed) -> Result<Vec<Request>> {
        let mut out = Vec::new();
        while self.next < self.order.len() {
            let r = &self.instance.requests[self.order[self.next]];
            if r.release > snap(t) {
                break;
            }
            out.push(r.clone());
            self.next += 1;
        }
        Ok(out)
    }

    fn realized(&self) -> Instance {
        self.instance.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Pending,
    Served,
    Expired,
}

/// Read-only view of the simulation handed to algorithms.
///
/// Delay information is available only up to the current time.
pub struct TickView<'a> {
    time: f64,
    dt: f64,
    system: &'a SetSystem,
    requests: &'a [Request],
    status: &'a [Status],
    gamma: &'a [f64],
    charged_last: &'a [f64],
    pending: &'a [RequestId],
}

impl<'a> TickView<'a> {
    pub fn time(&self) -> f64 {
        self.time
    }

    /// Length of the current step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn system(&self) -> &'a SetSystem {
        self.system
    }

    /// Number of requests released so far.
    pub fn released_count(&self) -> usize {
        self.requests.len()
    }

    pub fn info(&self, id: RequestId) -> RequestInfo {
        let r = &self.requests[id];
        RequestInfo {
            id,
            element: r.element,
            release: r.release,
        }
    }

    /// Pending requests in release order.
    pub fn pending(&self) -> &'a [RequestId] {
        self.pending
    }

    pub fn is_pending(&self, id: RequestId) -> bool {
        self.status[id] == Status::Pending
    }

    /// Fraction of the request covered so far (1 once served integrally).
    pub fn coverage(&self, id: RequestId) -> f64 {
        self.gamma[id]
    }

    /// Momentary delay of the request at the current time.
    pub fn momentary_delay(&self, id: RequestId) -> f64 {
        self.requests[id].delay.rate_at(snap(self.time))
    }

    /// Momentary delay at an earlier time `t`.
    pub fn delay_rate_at(&self, id: RequestId, t: f64) -> Result<f64> {
        self.check_past(t)?;
        self.requests[id].momentary_delay(t)
    }

    /// Delay accumulated over `[t1, t2]`, with `t2` not beyond the current time.
    pub fn accumulated_delay(&self, id: RequestId, t1: f64, t2: f64) -> Result<f64> {
        self.check_past(t2)?;
        self.requests[id].accumulated_delay(t1, t2)
    }

    /// Delay the engine charged this request over the step that ended now.
    pub fn charged_last_step(&self, id: RequestId) -> f64 {
        self.charged_last[id]
    }

    fn check_past(&self, t: f64) -> Result<()> {
        if t > snap(self.time) {
            return Err(Error::Clairvoyance {
                requested: t,
                now: self.time,
            });
        }
        Ok(())
    }
}

/// Per-step snapshot passed to an observer after the step completes.
pub struct StepInfo<'a> {
    pub time: f64,
    pub dt: f64,
    /// Fractional rates used this step; empty for integral algorithms.
    pub rates: &'a [f64],
    /// Sets bought integrally this step.
    pub bought_now: &'a [SetId],
    pub coverage: &'a [f64],
    pub pending: &'a [RequestId],
    pub bought: &'a [f64],
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub dt: f64,
    pub seed: u64,
    pub level: TraceLevel,
    /// Penalty for a request left pending past its deadline; defaults to 10^6 times the largest set cost.
    pub deadline_penalty: Option<f64>,
}

impl RunOptions {
    pub fn new(dt: f64, seed: u64) -> Self {
        RunOptions {
            dt,
            seed,
            level: TraceLevel::Summary,
            deadline_penalty: None,
        }
    }

    pub fn full(mut self) -> Self {
        self.level = TraceLevel::Full;
        self
    }
}

pub fn run_instance(inst: &Instance, algo: &mut dyn OnlineAlgorithm, opts: &RunOptions) -> Result<Trace> {
    run(&mut StaticSource::new(inst), algo, opts)
}

pub fn run(source: &mut dyn RequestSource, algo: &mut dyn OnlineAlgorithm, opts: &RunOptions) -> Result<Trace> {
    run_observed(source, algo, opts, &mut |_| {})
}

struct Sim {
    system: SetSystem,
    requests: Vec<Request>,
    status: Vec<Status>,
    gamma: Vec<f64>,
    charged_last: Vec<f64>,
    delay: Vec<f64>,
    served_at: Vec<Option<f64>>,
    pending: Vec<RequestId>,
    pending_by_element: Vec<Vec<RequestId>>,
    bought: Vec<f64>,
    purchases: Vec<Purchase>,
    cost_buy: f64,
    cost_delay: f64,
    penalty_cost: f64,
    expired: Vec<RequestId>,
    level: TraceLevel,
}

impl Sim {
    fn view(&self, time: f64, dt: f64) -> TickView<'_> {
        TickView {
            time,
            dt,
            system: &self.system,
            requests: &self.requests,
            status: &self.status,
            gamma: &self.gamma,
            charged_last: &self.charged_last,
            pending: &self.pending,
        }
    }

    fn check_set(&self, set: SetId, who: &str) -> Result<()> {
        if set >= self.system.set_count() {
            return Err(Error::Contract(format!(
                "{who} bought unknown set {set} (only {} sets)",
                self.system.set_count()
            )));
        }
        Ok(())
    }

    fn buy(&mut self, set: SetId, time: f64) {
        self.bought[set] += 1.0;
        self.cost_buy += self.system.cost(set);
        self.purchases.push(Purchase {
            time,
            set,
            amount: 1.0,
            integral: true,
        });
        let system = &self.system;
        for &e in &system.set(set).elements {
            for j in self.pending_by_element[e].drain(..) {
                self.status[j] = Status::Served;
                self.gamma[j] = 1.0;
                self.served_at[j] = Some(time);
            }
        }
    }

    fn register(&mut self, mut batch: Vec<Request>, time: f64) -> Result<Vec<RequestId>> {
        let first = self.requests.len();
        batch.sort_by_key(|r| r.id);
        if batch.iter().enumerate().any(|(k, r)| r.id != first + k) {
            let ids: Vec<RequestId> = batch.iter().map(|r| r.id).collect();
            return Err(Error::Contract(format!(
                "source request ids {ids:?} do not continue from {first}"
            )));
        }
        let n = self.system.element_count();
        for r in batch {
            if r.element >= n {
                return Err(Error::Contract(format!(
                    "source released request {} on unknown element {}",
                    r.id, r.element
                )));
            }
            if r.release > snap(time) {
                return Err(Error::Contract(format!(
                    "source released request {} at t={time} before its release time {}",
                    r.id, r.release
                )));
            }
            let pre = r.delay.integral(r.release, time);
            self.status.push(Status::Pending);
            self.gamma.push(0.0);
            self.charged_last.push(pre);
            self.delay.push(pre);
            self.served_at.push(None);
            self.cost_delay += pre;
            self.pending_by_element[r.element].push(r.id);
            self.requests.push(r);
        }
        let mut ids: Vec<RequestId> = (first..self.requests.len()).collect();
        ids.sort_by(|&a, &b| self.requests[a].precedence(&self.requests[b]));
        self.pending.extend_from_slice(&ids);
        Ok(ids)
    }

    fn prune_pending(&mut self) {
        let status = &self.status;
        self.pending.retain(|&j| status[j] == Status::Pending);
    }
}

/// Run with a callback invoked after every step.
pub fn run_observed(
    source: &mut dyn RequestSource,
    algo: &mut dyn OnlineAlgorithm,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&StepInfo),
) -> Result<Trace> {
    let dt = opts.dt;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("step length must be positive, got {dt}")));
    }
    let horizon = source.horizon();
    let steps_f = (horizon / dt - 1e-9).ceil().max(0.0);
    if steps_f > MAX_STEPS as f64 {
        return Err(Error::Guard(format!(
            "horizon {horizon} at step {dt} needs {steps_f} steps (limit {MAX_STEPS})"
        )));
    }
    let steps = steps_f as u64;
    let system = source.system().clone();
    let m = system.set_count();
    let penalty = opts
        .deadline_penalty
        .unwrap_or(1e6 * system.max_cost());
    algo.start(&system, opts.seed)?;
    let mut sim = Sim {
        pending_by_element: vec![Vec::new(); system.element_count()],
        system,
        requests: Vec::new(),
        status: Vec::new(),
        gamma: Vec::new(),
        charged_last: Vec::new(),
        delay: Vec::new(),
        served_at: Vec::new(),
        pending: Vec::new(),
        bought: vec![0.0; m],
        purchases: Vec::new(),
        cost_buy: 0.0,
        cost_delay: 0.0,
        penalty_cost: 0.0,
        expired: Vec::new(),
        level: opts.level,
    };
    let mut delay_samples = Vec::new();
    let mut element_rate = vec![0.0; sim.system.element_count()];
    let mut bought_now = Vec::new();

    for s in 0..=steps {
        let t = if s == steps { horizon } else { s as f64 * dt };
        let t_end = if s + 1 >= steps { horizon } else { (s + 1) as f64 * dt };
        let h = if s == steps { 0.0 } else { (t_end - t).max(0.0) };
        bought_now.clear();

        // Arrivals.
        let batch = source.poll(
            t,
            &Observed {
                time: t,
                bought: &sim.bought,
            },
        )?;
        let arrived = sim.register(batch, t)?;
        for &id in &arrived {
            let info = sim.view(t, h).info(id);
            algo.on_request_arrival(info, &sim.view(t, h))?;
        }

        // Deadline announcements.
        let due: Vec<RequestId> = sim
            .pending
            .iter()
            .copied()
            .filter(|&j| {
                sim.requests[j]
                    .delay
                    .hard_deadline()
                    .is_some_and(|d| d <= snap(t))
            })
            .collect();
        for &j in &due {
            if sim.status[j] != Status::Pending {
                continue;
            }
            let sets = algo.on_deadline_announced(j, &sim.view(t, h))?;
            for set in sets {
                sim.check_set(set, algo.name())?;
                sim.buy(set, t);
                bought_now.push(set);
            }
        }
        sim.prune_pending();

        // Algorithm decision.
        let decision = algo.on_tick(&sim.view(t, h))?;
        for &set in &decision.buy {
            sim.check_set(set, algo.name())?;
            sim.buy(set, t);
            bought_now.push(set);
        }
        let fractional = !decision.rates.is_empty();
        if fractional {
            if decision.rates.len() != m {
                return Err(Error::Contract(format!(
                    "{} returned {} rates for {m} sets",
                    algo.name(),
                    decision.rates.len()
                )));
            }
            if let Some((i, r)) = decision
                .rates
                .iter()
                .enumerate()
                .find(|(_, r)| !(r.is_finite() && **r >= 0.0))
            {
                return Err(Error::Contract(format!("{} returned rate {r} for set {i}", algo.name())));
            }
            for (i, &x) in decision.rates.iter().enumerate() {
                if x > 0.0 && h > 0.0 {
                    let amount = x * h;
                    sim.bought[i] += amount;
                    sim.cost_buy += sim.system.cost(i) * amount;
                    if sim.level == TraceLevel::Full {
                        sim.purchases.push(Purchase {
                            time: t,
                            set: i,
                            amount,
                            integral: false,
                        });
                    }
                }
            }
        }
        sim.prune_pending();

        // Deadline penalties for requests the algorithm left pending.
        for &j in &due {
            if sim.status[j] == Status::Pending {
                sim.status[j] = Status::Expired;
                sim.cost_delay += penalty;
                sim.penalty_cost += penalty;
                sim.delay[j] += penalty;
                sim.expired.push(j);
                let e = sim.requests[j].element;
                sim.pending_by_element[e].retain(|&q| q != j);
            }
        }
        sim.prune_pending();

        // Delay accrual over [t, t_end] on the uncovered fraction.
        for c in sim.charged_last.iter_mut() {
            *c = 0.0;
        }
        if h > 0.0 {
            let mut sample = 0.0;
            for &j in &sim.pending {
                let r = &sim.requests[j];
                let uncovered = 1.0 - sim.gamma[j];
                let d = uncovered * r.delay.integral(t, t_end);
                sim.charged_last[j] = d;
                sim.delay[j] += d;
                sim.cost_delay += d;
                if sim.level == TraceLevel::Full {
                    sample += r.delay.rate_at(snap(t));
                }
            }
            if sim.level == TraceLevel::Full {
                delay_samples.push(sample);
            }
        }

        // Fractional coverage is credited at the end of the step.
        if fractional && h > 0.0 {
            for v in element_rate.iter_mut() {
                *v = 0.0;
            }
            for (i, &x) in decision.rates.iter().enumerate() {
                if x > 0.0 {
                    for &e in &sim.system.set(i).elements {
                        element_rate[e] += x;
                    }
                }
            }
            let mut any_served = false;
            for &j in &sim.pending {
                let e = sim.requests[j].element;
                if element_rate[e] > 0.0 {
                    let g = (sim.gamma[j] + element_rate[e] * h).min(1.0);
                    sim.gamma[j] = g;
                    if g >= 1.0 - SERVED_EPS {
                        sim.gamma[j] = 1.0;
                        sim.status[j] = Status::Served;
                        sim.served_at[j] = Some(t_end);
                        any_served = true;
                    }
                }
            }
            if any_served {
                let status = &sim.status;
                for list in sim.pending_by_element.iter_mut() {
                    list.retain(|&j| status[j] == Status::Pending);
                }
                sim.prune_pending();
            }
        }

        observer(&StepInfo {
            time: t,
            dt: h,
            rates: &decision.rates,
            bought_now: &bought_now,
            coverage: &sim.gamma,
            pending: &sim.pending,
            bought: &sim.bought,
        });
    }

    let realized = source.realized();
    Ok(Trace {
        algorithm: algo.name().to_string(),
        instance_digest: realized.digest(),
        dt,
        seed: opts.seed,
        horizon,
        purchases: sim.purchases,
        bought: sim.bought,
        delay_samples,
        cost_buy: sim.cost_buy,
        cost_delay: sim.cost_delay,
        penalty_cost: sim.penalty_cost,
        served_at: pad(sim.served_at, realized.requests.len()),
        request_delay: pad_f(sim.delay, realized.requests.len()),
        expired: sim.expired,
    })
}

fn pad(mut v: Vec<Option<f64>>, len: usize) -> Vec<Option<f64>> {
    v.resize(len.max(v.len()), None);
    v
}

fn pad_f(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    v.resize(len.max(v.len()), 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayFunction, WeightedSet};

    /// Buys a fixed list of sets at given times.
    struct Scripted {
        plan: Vec<(f64, SetId)>,
    }

    impl OnlineAlgorithm for Scripted {
        fn name(&self) -> &str {
            "scripted"
        }
        fn start(&mut self, _: &SetSystem, _: u64) -> Result<()> {
            Ok(())
        }
        fn on_request_arrival(&mut self, _: RequestInfo, _: &TickView) -> Result<()> {
            Ok(())
        }
        fn on_deadline_announced(&mut self, _: RequestId, _: &TickView) -> Result<Vec<SetId>> {
            Ok(vec![])
        }
        fn on_tick(&mut self, view: &TickView) -> Result<Decision> {
            let now = view.time();
            let buy = self
                .plan
                .iter()
                .filter(|(t, _)| (t - now).abs() < view.dt().max(1e-12) / 2.0)
                .map(|&(_, s)| s)
                .collect();
            Ok(Decision::buy(buy))
        }
    }

    /// Tries to read the delay one step into the future.
    struct Peeker;

    impl OnlineAlgorithm for Peeker {
        fn name(&self) -> &str {
            "peeker"
        }
        fn start(&mut self, _: &SetSystem, _: u64) -> Result<()> {
            Ok(())
        }
        fn on_request_arrival(&mut self, _: RequestInfo, _: &TickView) -> Result<()> {
            Ok(())
        }
        fn on_deadline_announced(&mut self, _: RequestId, _: &TickView) -> Result<Vec<SetId>> {
            Ok(vec![])
        }
        fn on_tick(&mut self, view: &TickView) -> Result<Decision> {
            for &j in view.pending() {
                view.delay_rate_at(j, view.time() + 0.5)?;
            }
            Ok(Decision::none())
        }
    }

    struct FixedRates(Vec<f64>);

    impl OnlineAlgorithm for FixedRates {
        fn name(&self) -> &str {
            "fixed"
        }
        fn start(&mut self, _: &SetSystem, _: u64) -> Result<()> {
            Ok(())
        }
        fn on_request_arrival(&mut self, _: RequestInfo, _: &TickView) -> Result<()> {
            Ok(())
        }
        fn on_deadline_announced(&mut self, _: RequestId, _: &TickView) -> Result<Vec<SetId>> {
            Ok(vec![])
        }
        fn on_tick(&mut self, _: &TickView) -> Result<Decision> {
            Ok(Decision::rates(self.0.clone()))
        }
    }

    fn single(rate: f64, cost: f64, horizon: f64) -> Instance {
        let sys = SetSystem::new(vec![WeightedSet::new(cost, vec![0])]).unwrap();
        let req = Request::new(0, 0, 0.0, DelayFunction::constant(rate));
        Instance::new(sys, vec![req], horizon).unwrap()
    }

    #[test]
    fn empty_instance_costs_nothing() {
        let sys = SetSystem::new(vec![WeightedSet::new(1.0, vec![0])]).unwrap();
        let inst = Instance::new(sys, vec![], 3.0).unwrap();
        let tr = run_instance(&inst, &mut Scripted { plan: vec![] }, &RunOptions::new(0.1, 0)).unwrap();
        assert_eq!(tr.cost_buy, 0.0);
        assert_eq!(tr.cost_delay, 0.0);
    }

    #[test]
    fn buy_at_zero() {
        let inst = single(1.0, 1.0, 3.0);
        let tr = run_instance(&inst, &mut Scripted { plan: vec![(0.0, 0)] }, &RunOptions::new(0.01, 0)).unwrap();
        assert_eq!(tr.cost_buy, 1.0);
        assert_eq!(tr.cost_delay, 0.0);
        assert_eq!(tr.served_at, vec![Some(0.0)]);
    }

    #[test]
    fn delay_accrues_until_purchase() {
        let inst = single(2.0, 1.0, 3.0);
        let tr = run_instance(&inst, &mut Scripted { plan: vec![(1.0, 0)] }, &RunOptions::new(0.25, 0)).unwrap();
        assert!((tr.cost_delay - 2.0).abs() < 1e-12);
        assert_eq!(tr.served_at, vec![Some(1.0)]);
    }

    #[test]
    fn unserved_request_accrues_to_horizon() {
        let inst = single(1.0, 3.0, 2.0);
        let tr = run_instance(&inst, &mut Scripted { plan: vec![] }, &RunOptions::new(0.3, 0)).unwrap();
        assert!((tr.cost_delay - 2.0).abs() < 1e-12);
        assert_eq!(tr.served_at, vec![None]);
    }

    #[test]
    fn clairvoyant_probe_rejected() {
        let inst = single(1.0, 1.0, 2.0);
        let err = run_instance(&inst, &mut Peeker, &RunOptions::new(0.1, 0)).unwrap_err();
        assert!(matches!(err, Error::Clairvoyance { .. }));
    }

    #[test]
    fn bad_decisions_rejected() {
        let inst = single(1.0, 1.0, 2.0);
        let err = run_instance(&inst, &mut Scripted { plan: vec![(0.0, 5)] }, &RunOptions::new(0.1, 0)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        let err = run_instance(&inst, &mut FixedRates(vec![-1.0]), &RunOptions::new(0.1, 0)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        let err = run_instance(&inst, &mut FixedRates(vec![1.0, 1.0]), &RunOptions::new(0.1, 0)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn fractional_coverage_reduces_delay() {
        // Constant rate 0.5 covers the request at t=2; delay is the integral of 1 - t/2.
        let inst = single(1.0, 1.0, 4.0);
        let tr = run_instance(&inst, &mut FixedRates(vec![0.5]), &RunOptions::new(1e-3, 0)).unwrap();
        assert!((tr.cost_delay - 1.0).abs() < 2e-3, "{}", tr.cost_delay);
        assert!((tr.cost_buy - 2.0).abs() < 1e-9);
        assert!((tr.served_at[0].unwrap() - 2.0).abs() < 2e-3);
    }

    #[test]
    fn deadline_penalty_applies() {
        let sys = SetSystem::new(vec![WeightedSet::new(1.0, vec![0])]).unwrap();
        let req = Request::new(0, 0, 0.0, DelayFunction::new(vec![(0.0, 0.0)], Some(1.0)).unwrap());
        let inst = Instance::new(sys, vec![req], 2.0).unwrap();
        let tr = run_instance(&inst, &mut Scripted { plan: vec![] }, &RunOptions::new(0.1, 0)).unwrap();
        assert_eq!(tr.expired, vec![0]);
        assert_eq!(tr.penalty_cost, 1e6);
    }

    #[test]
    fn deterministic_traces() {
        let inst = single(1.0, 1.0, 4.0);
        let opts = RunOptions::new(1e-2, 7).full();
        let a = run_instance(&inst, &mut FixedRates(vec![0.3]), &opts).unwrap();
        let b = run_instance(&inst, &mut FixedRates(vec![0.3]), &opts).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn off_grid_release_charges_pre_arrival_delay() {
        let sys = SetSystem::new(vec![WeightedSet::new(1.0, vec![0])]).unwrap();
        let req = Request::new(0, 0, 0.05, DelayFunction::constant(1.0));
        let inst = Instance::new(sys, vec![req], 1.0).unwrap();
        let tr = run_instance(&inst, &mut Scripted { plan: vec![] }, &RunOptions::new(0.1, 0)).unwrap();
        assert!((tr.cost_delay - 0.95).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn more_buying_never_delays_service(times in prop::collection::vec(0u32..20, 0..4), extra in 0u32..20) {
                let inst = single(1.0, 1.0, 2.0);
                let plan: Vec<(f64, SetId)> = times.iter().map(|&s| (s as f64 * 0.1, 0)).collect();
                let mut more = plan.clone();
                more.push((extra as f64 * 0.1, 0));
                let opts = RunOptions::new(0.1, 0);
                let a = run_instance(&inst, &mut Scripted { plan }, &opts).unwrap();
                let b = run_instance(&inst, &mut Scripted { plan: more }, &opts).unwrap();
                let ta = a.served_at[0].unwrap_or(f64::INFINITY);
                let tb = b.served_at[0].unwrap_or(f64::INFINITY);
                prop_assert!(tb <= ta);
            }
        }
    }
}
