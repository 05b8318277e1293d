//! Randomized rounding of the fractional algorithm.
//!
//! Both variants run the fractional algorithm in the background. Type-a
//! purchases buy a set whenever the fraction the background bought since the
//! set's last purchase crosses a random threshold. Type-b purchases buy the
//! cheapest set of a request that has stayed pending for too long: in the
//! request variant once its fractional coverage reaches 1/2, in the element
//! variant once its batch has been pending for three coverage quarters.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{run_observed, Decision, OnlineAlgorithm, RequestInfo, RunOptions, StaticSource, TickView, SERVED_EPS};
use crate::error::{Error, Result};
use crate::model::{ElementId, Instance, RequestId, SetId, SetSystem};
use crate::onf::Onf;

/// Slack allowed on the coverage invariants.
pub const INVARIANT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Thresholds scaled by the declared request count.
    Request,
    /// Thresholds scaled by the universe size, with batch-based safety purchases.
    Element,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "request" => Ok(Variant::Request),
            "element" => Ok(Variant::Element),
            other => Err(Error::Domain(format!("unknown variant {other:?} (expected request or element)"))),
        }
    }
}

/// Random thresholds, one independent stream per set.
#[derive(Clone, Debug)]
pub struct ThresholdState {
    range: f64,
    thresholds: Vec<f64>,
    acc: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
}

impl ThresholdState {
    /// Thresholds uniform on `[0, range)`; an infinite range disables purchases.
    pub fn new(set_count: usize, seed: u64, range: f64) -> Self {
        let mut rngs: Vec<ChaCha8Rng> = (0..set_count)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                rng
            })
            .collect();
        let thresholds = rngs.iter_mut().map(|rng| draw(rng, range)).collect();
        ThresholdState {
            range,
            thresholds,
            acc: vec![0.0; set_count],
            rngs,
        }
    }

    pub fn threshold(&self, set: SetId) -> f64 {
        self.thresholds[set]
    }

    /// Fraction accumulated since the set's last purchase.
    pub fn accumulated(&self, set: SetId) -> f64 {
        self.acc[set]
    }

    #[cfg(test)]
    pub(crate) fn force(&mut self, set: SetId, threshold: f64) {
        self.thresholds[set] = threshold;
    }

    /// Add `amount` to the set's accumulation and return how many thresholds it crossed.
    pub fn advance(&mut self, set: SetId, amount: f64) -> usize {
        if !self.range.is_finite() {
            return 0;
        }
        self.acc[set] += amount;
        let mut crossings = 0;
        while self.acc[set] >= self.thresholds[set] {
            self.acc[set] -= self.thresholds[set];
            self.thresholds[set] = draw(&mut self.rngs[set], self.range);
            crossings += 1;
        }
        crossings
    }
}

fn draw(rng: &mut ChaCha8Rng, range: f64) -> f64 {
    if range.is_finite() {
        rng.gen::<f64>() * range
    } else {
        f64::INFINITY
    }
}

/// Upper end of the threshold range, `1 / (2 ln size)`; infinite when `size <= 1`.
pub fn threshold_range(size: usize) -> f64 {
    if size <= 1 {
        f64::INFINITY
    } else {
        1.0 / (2.0 * (size as f64).ln())
    }
}

/// Per-step buying rates of a recorded fractional run, replayed instead of
/// recomputing the background process in every trial.
#[derive(Clone, Debug, PartialEq)]
pub struct OnfTape {
    digest: String,
    times: Vec<f64>,
    rates: Vec<Vec<(SetId, f64)>>,
    cost: f64,
}

impl OnfTape {
    /// Record the fractional algorithm on a static instance without deadlines.
    pub fn record(inst: &Instance, dt: f64) -> Result<Self> {
        if inst.requests.iter().any(|r| r.delay.hard_deadline().is_some()) {
            return Err(Error::Domain("rate tapes do not support deadline requests".into()));
        }
        let mut times = Vec::new();
        let mut rates = Vec::new();
        let trace = run_observed(
            &mut StaticSource::new(inst),
            &mut Onf::new(),
            &RunOptions::new(dt, 0),
            &mut |s| {
                times.push(s.time);
                rates.push(
                    s.rates
                        .iter()
                        .enumerate()
                        .filter(|(_, &x)| x > 0.0)
                        .map(|(i, &x)| (i, x))
                        .collect(),
                );
            },
        )?;
        Ok(OnfTape {
            digest: inst.digest(),
            times,
            rates,
            cost: trace.total(),
        })
    }

    /// Total cost of the recorded fractional run.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }
}

#[derive(Clone, Debug)]
enum Background {
    Live(Box<Onf>),
    Tape { tape: Arc<OnfTape>, tick: usize },
}

/// Fractional coverage of the background process, maintained from its rates.
#[derive(Clone, Debug, Default)]
struct Coverage {
    gamma: Vec<f64>,
    element: Vec<ElementId>,
    /// Cumulative fractional coverage of each element since time 0.
    cumulative: Vec<f64>,
    element_rate: Vec<f64>,
}

impl Coverage {
    fn advance(&mut self, system: &SetSystem, rates: &[f64], h: f64) {
        for v in self.element_rate.iter_mut() {
            *v = 0.0;
        }
        for (i, &x) in rates.iter().enumerate() {
            if x > 0.0 {
                for &e in &system.set(i).elements {
                    self.element_rate[e] += x;
                }
            }
        }
        for (e, c) in self.cumulative.iter_mut().enumerate() {
            *c += self.element_rate[e] * h;
        }
        for (j, g) in self.gamma.iter_mut().enumerate() {
            let rate = self.element_rate[self.element[j]];
            if rate > 0.0 && *g < 1.0 {
                *g = (*g + rate * h).min(1.0);
                if *g >= 1.0 - SERVED_EPS {
                    *g = 1.0;
                }
            }
        }
    }

    fn cover_set(&mut self, system: &SetSystem, set: SetId) {
        let elements = &system.set(set).elements;
        for (j, g) in self.gamma.iter_mut().enumerate() {
            if elements.binary_search(&self.element[j]).is_ok() {
                *g = 1.0;
            }
        }
    }

    /// Number of completed quarters of cumulative coverage on `e`.
    fn level(&self, e: ElementId) -> u64 {
        (4.0 * self.cumulative[e] + INVARIANT_EPS).floor() as u64
    }
}

/// Counters collected during a rounding run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OnrStats {
    pub type_a_purchases: u64,
    pub type_a_cost: f64,
    pub type_b_purchases: u64,
    pub type_b_cost: f64,
    pub deadline_cost: f64,
    /// Steps at which a pending request exceeded the coverage bound of its variant.
    pub invariant_violations: u64,
    /// Largest background coverage of a request left pending after a step's purchases.
    pub max_pending_coverage: f64,
}

/// The randomized rounding algorithm.
#[derive(Clone, Debug)]
pub struct Onr {
    variant: Variant,
    declared_requests: usize,
    background: Background,
    thresholds: Option<ThresholdState>,
    coverage: Coverage,
    batch: Vec<u64>,
    stats: OnrStats,
    scratch: Vec<f64>,
    name: String,
}

impl Onr {
    /// Request variant with the a-priori request count `declared_requests`.
    pub fn request_variant(declared_requests: usize) -> Self {
        Self::build(Variant::Request, declared_requests, Background::Live(Box::default()))
    }

    pub fn element_variant() -> Self {
        Self::build(Variant::Element, 0, Background::Live(Box::default()))
    }

    /// Replay background rates from a tape recorded on the same instance and step.
    pub fn with_tape(mut self, tape: Arc<OnfTape>) -> Self {
        self.background = Background::Tape { tape, tick: 0 };
        self
    }

    fn build(variant: Variant, declared_requests: usize, background: Background) -> Self {
        let name = match variant {
            Variant::Request => "onr-request",
            Variant::Element => "onr-element",
        };
        Onr {
            variant,
            declared_requests,
            background,
            thresholds: None,
            coverage: Coverage::default(),
            batch: Vec::new(),
            stats: OnrStats::default(),
            scratch: Vec::new(),
            name: name.to_string(),
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn stats(&self) -> &OnrStats {
        &self.stats
    }

    /// Background coverage of a request.
    pub fn background_coverage(&self, id: RequestId) -> f64 {
        self.coverage.gamma[id]
    }

    fn coverage_bound(&self) -> f64 {
        match self.variant {
            Variant::Request => 0.5,
            Variant::Element => 0.75,
        }
    }

    fn background_rates(&mut self, view: &TickView) -> Result<()> {
        match &mut self.background {
            Background::Live(onf) => {
                let rates = onf.step(view);
                self.scratch.clear();
                self.scratch.extend_from_slice(rates);
            }
            Background::Tape { tape, tick } => {
                let s = *tick;
                *tick += 1;
                let recorded = tape.times.get(s).copied();
                if recorded.is_none_or(|t| (t - view.time()).abs() > 1e-9 * view.time().max(1.0)) {
                    return Err(Error::Contract(format!(
                        "rate tape does not match the run at t={} (step {s})",
                        view.time()
                    )));
                }
                for v in self.scratch.iter_mut() {
                    *v = 0.0;
                }
                for &(i, x) in &tape.rates[s] {
                    self.scratch[i] = x;
                }
            }
        }
        Ok(())
    }
}

impl OnlineAlgorithm for Onr {
    fn name(&self) -> &str {
        &self.name
    }

    fn start(&mut self, system: &SetSystem, seed: u64) -> Result<()> {
        let m = system.set_count();
        let range = match self.variant {
            Variant::Request => {
                if self.declared_requests == 0 {
                    return Err(Error::Domain("declared request count must be at least 1".into()));
                }
                threshold_range(self.declared_requests)
            }
            Variant::Element => threshold_range(system.element_count()),
        };
        self.thresholds = Some(ThresholdState::new(m, seed, range));
        self.coverage = Coverage {
            cumulative: vec![0.0; system.element_count()],
            element_rate: vec![0.0; system.element_count()],
            ..Coverage::default()
        };
        self.batch.clear();
        self.stats = OnrStats::default();
        self.scratch = vec![0.0; m];
        match &mut self.background {
            Background::Live(onf) => onf.init(system),
            Background::Tape { tick, .. } => *tick = 0,
        }
        Ok(())
    }

    fn on_request_arrival(&mut self, request: RequestInfo, _view: &TickView) -> Result<()> {
        if let Background::Live(onf) = &mut self.background {
            onf.add_request(request);
        }
        self.coverage.gamma.push(0.0);
        self.coverage.element.push(request.element);
        self.batch.push(self.coverage.level(request.element));
        Ok(())
    }

    fn on_deadline_announced(&mut self, id: RequestId, view: &TickView) -> Result<Vec<SetId>> {
        let set = view.system().cheapest_containing(self.coverage.element[id]);
        if let Background::Live(onf) = &mut self.background {
            onf.apply_integral(set, view.time());
        }
        self.coverage.cover_set(view.system(), set);
        self.stats.deadline_cost += view.system().cost(set);
        Ok(vec![set])
    }

    fn on_tick(&mut self, view: &TickView) -> Result<Decision> {
        let system = view.system();
        let mut buy: Vec<SetId> = Vec::new();

        // Type-b purchases use the background coverage at the current time.
        match self.variant {
            Variant::Request => {
                for &j in view.pending() {
                    if self.coverage.gamma[j] >= 0.5 {
                        let set = system.cheapest_containing(self.coverage.element[j]);
                        if !buy.contains(&set) {
                            buy.push(set);
                        }
                    }
                }
            }
            Variant::Element => {
                for &j in view.pending() {
                    let e = self.coverage.element[j];
                    if self.coverage.level(e) >= self.batch[j] + 3 {
                        let set = system.cheapest_containing(e);
                        if !buy.contains(&set) {
                            buy.push(set);
                        }
                    }
                }
            }
        }
        for &set in &buy {
            self.stats.type_b_purchases += 1;
            self.stats.type_b_cost += system.cost(set);
        }

        // Type-a purchases from the background rates over this step.
        self.background_rates(view)?;
        let h = view.dt();
        let thresholds = self.thresholds.as_mut().expect("start() initializes thresholds");
        for (i, &x) in self.scratch.iter().enumerate() {
            if x > 0.0 {
                let crossings = thresholds.advance(i, x * h);
                for _ in 0..crossings {
                    buy.push(i);
                    self.stats.type_a_purchases += 1;
                    self.stats.type_a_cost += system.cost(i);
                }
            }
        }

        // Coverage invariant on requests that stay pending after this step's purchases.
        let bound = self.coverage_bound();
        let mut violated = false;
        for &j in view.pending() {
            let e = self.coverage.element[j];
            if buy.iter().any(|&i| system.set(i).elements.binary_search(&e).is_ok()) {
                continue;
            }
            let g = self.coverage.gamma[j];
            if g > self.stats.max_pending_coverage {
                self.stats.max_pending_coverage = g;
            }
            if g > bound + INVARIANT_EPS {
                violated = true;
            }
        }
        if violated {
            self.stats.invariant_violations += 1;
        }

        self.coverage.advance(system, &self.scratch, h);
        Ok(Decision::buy(buy))
    }
}
