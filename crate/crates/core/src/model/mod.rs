//! Instance representation: set systems, requests and their delay functions.

mod format;

pub use format::{
    instance_to_json, load_instance, parse_instance, save_instance, Decimal, InstanceFile,
    RequestEntry, SetEntry,
};

use std::cmp::Ordering;

use crate::error::{Error, Result};

pub type ElementId = usize;
pub type SetId = usize;
pub type RequestId = usize;

/// Breakpoints closer than this to a queried time are treated as reached.
pub const TIME_EPS: f64 = 1e-9;

/// Snap a time forward by the breakpoint tolerance, scaled to its magnitude.
pub(crate) fn snap(t: f64) -> f64 {
    t + TIME_EPS * t.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSet {
    pub cost: f64,
    pub elements: Vec<ElementId>,
}

impl WeightedSet {
    pub fn new(cost: f64, elements: Vec<ElementId>) -> Self {
        WeightedSet { cost, elements }
    }
}

/// Family of priced sets over the element universe `0..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SetSystem {
    sets: Vec<WeightedSet>,
    element_count: usize,
    max_membership: usize,
    containing: Vec<Vec<SetId>>,
}

impl SetSystem {
    /// Builds a system whose universe is `0..=max element id`.
    pub fn new(sets: Vec<WeightedSet>) -> Result<Self> {
        let n = sets
            .iter()
            .flat_map(|s| s.elements.iter())
            .max()
            .map_or(0, |&e| e + 1);
        Self::with_element_count(sets, n)
    }

    pub fn with_element_count(mut sets: Vec<WeightedSet>, element_count: usize) -> Result<Self> {
        if sets.is_empty() {
            return Err(Error::validation("sets", "at least one set is required"));
        }
        let mut containing = vec![Vec::new(); element_count];
        for (i, set) in sets.iter_mut().enumerate() {
            if !set.cost.is_finite() {
                return Err(Error::validation(format!("sets[{i}].cost"), "cost is not finite"));
            }
            if set.cost < 1.0 {
                return Err(Error::validation(
                    format!("sets[{i}].cost"),
                    format!("cost below 1 ({})", set.cost),
                ));
            }
            set.elements.sort_unstable();
            if set.elements.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::validation(format!("sets[{i}].elements"), "duplicate element"));
            }
            for &e in &set.elements {
                if e >= element_count {
                    return Err(Error::validation(
                        format!("sets[{i}].elements"),
                        format!("element {e} outside universe of size {element_count}"),
                    ));
                }
                containing[e].push(i);
            }
        }
        if let Some(e) = containing.iter().position(Vec::is_empty) {
            return Err(Error::validation(
                format!("element {e}"),
                "element is not contained in any set",
            ));
        }
        let max_membership = containing.iter().map(Vec::len).max().unwrap_or(0);
        Ok(SetSystem {
            sets,
            element_count,
            max_membership,
            containing,
        })
    }

    pub fn sets(&self) -> &[WeightedSet] {
        &self.sets
    }

    pub fn set(&self, i: SetId) -> &WeightedSet {
        &self.sets[i]
    }

    pub fn cost(&self, i: SetId) -> f64 {
        self.sets[i].cost
    }

    /// n
    pub fn element_count(&self) -> usize {
        self.element_count
    }

    /// m
    pub fn set_count(&self) -> usize {
        self.sets.len()
    }

    /// k: the largest number of sets sharing one element.
    pub fn max_membership(&self) -> usize {
        self.max_membership
    }

    /// Sets containing `e`, ascending by id.
    pub fn containing(&self, e: ElementId) -> &[SetId] {
        &self.containing[e]
    }

    /// Cheapest set containing `e`; ties go to the lowest set id.
    pub fn cheapest_containing(&self, e: ElementId) -> SetId {
        let mut best = self.containing[e][0];
        for &i in &self.containing[e][1..] {
            if self.sets[i].cost < self.sets[best].cost {
                best = i;
            }
        }
        best
    }

    pub fn max_cost(&self) -> f64 {
        self.sets.iter().map(|s| s.cost).fold(0.0, f64::max)
    }

    pub fn total_cost(&self) -> f64 {
        self.sets.iter().map(|s| s.cost).sum()
    }
}

/// Piecewise-constant momentary delay `d(t)`.
///
/// The rate `rates[k]` applies on `[breakpoints[k], breakpoints[k + 1])`, the
/// last rate extends to infinity and the rate before the first breakpoint is 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayFunction {
    breakpoints: Vec<f64>,
    rates: Vec<f64>,
    cumulative: Vec<f64>,
    hard_deadline: Option<f64>,
}

impl DelayFunction {
    pub fn new(segments: Vec<(f64, f64)>, hard_deadline: Option<f64>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::validation("rates", "at least one [t_start, rate] segment is required"));
        }
        let mut breakpoints = Vec::with_capacity(segments.len());
        let mut rates = Vec::with_capacity(segments.len());
        for (k, (t, r)) in segments.into_iter().enumerate() {
            if !t.is_finite() || !r.is_finite() {
                return Err(Error::validation(format!("rates[{k}]"), "non-finite value"));
            }
            if r < 0.0 {
                return Err(Error::validation(format!("rates[{k}]"), format!("negative rate {r}")));
            }
            if let Some(&prev) = breakpoints.last() {
                if t <= prev {
                    return Err(Error::validation(
                        format!("rates[{k}]"),
                        "breakpoints must be strictly ascending",
                    ));
                }
            }
            breakpoints.push(t);
            rates.push(r);
        }
        if let Some(d) = hard_deadline {
            if !d.is_finite() {
                return Err(Error::validation("deadline", "deadline is not finite"));
            }
        }
        let mut cumulative = Vec::with_capacity(breakpoints.len());
        cumulative.push(0.0);
        for k in 1..breakpoints.len() {
            let prev = cumulative[k - 1];
            cumulative.push(prev + rates[k - 1] * (breakpoints[k] - breakpoints[k - 1]));
        }
        Ok(DelayFunction {
            breakpoints,
            rates,
            cumulative,
            hard_deadline,
        })
    }

    /// Constant rate from time 0 onwards.
    pub fn constant(rate: f64) -> Self {
        Self::new(vec![(0.0, rate)], None).expect("constant delay with a nonnegative rate")
    }

    pub fn segments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.iter().copied().zip(self.rates.iter().copied())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn hard_deadline(&self) -> Option<f64> {
        self.hard_deadline
    }

    pub fn with_deadline(mut self, deadline: Option<f64>) -> Self {
        self.hard_deadline = deadline;
        self
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// Rate of the interval containing `t`.
    pub fn rate_at(&self, t: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        if idx == 0 {
            0.0
        } else {
            self.rates[idx - 1]
        }
    }

    /// Antiderivative measured from the first breakpoint.
    fn primitive(&self, t: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b <= t);
        if idx == 0 {
            0.0
        } else {
            self.cumulative[idx - 1] + self.rates[idx - 1] * (t - self.breakpoints[idx - 1])
        }
    }

    /// Exact integral of the rate over `[t1, t2]`.
    pub fn integral(&self, t1: f64, t2: f64) -> f64 {
        if t2 <= t1 {
            return 0.0;
        }
        let lo = self.breakpoints.partition_point(|&b| b <= t1);
        let hi = self.breakpoints.partition_point(|&b| b <= t2);
        if lo == hi {
            // Same piece: avoid cancellation in the primitive difference.
            return if lo == 0 { 0.0 } else { self.rates[lo - 1] * (t2 - t1) };
        }
        (self.primitive(t2) - self.primitive(t1)).max(0.0)
    }

    /// Multiply every rate by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let segments = self.segments().map(|(t, r)| (t, r * factor)).collect();
        Self::new(segments, self.hard_deadline).expect("scaling keeps rates valid")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Request {
    pub id: RequestId,
    pub element: ElementId,
    pub release: f64,
    pub delay: DelayFunction,
}

impl Request {
    pub fn new(id: RequestId, element: ElementId, release: f64, delay: DelayFunction) -> Self {
        Request {
            id,
            element,
            release,
            delay,
        }
    }

    /// Momentary delay at `t >= release`.
    pub fn momentary_delay(&self, t: f64) -> Result<f64> {
        if t < self.release {
            return Err(Error::Domain(format!(
                "request {} queried at t={t} before its release {}",
                self.id, self.release
            )));
        }
        Ok(self.delay.rate_at(t))
    }

    /// Delay accumulated over `[t1, t2]` with `release <= t1 <= t2`.
    pub fn accumulated_delay(&self, t1: f64, t2: f64) -> Result<f64> {
        if t1 < self.release {
            return Err(Error::Domain(format!(
                "interval start {t1} precedes the release {} of request {}",
                self.release, self.id
            )));
        }
        if t2 < t1 {
            return Err(Error::Domain(format!("reversed interval [{t1}, {t2}]")));
        }
        Ok(self.delay.integral(t1, t2))
    }

    /// The total order used by the fractional algorithm: release, then id.
    pub fn precedence(&self, other: &Request) -> Ordering {
        self.release
            .total_cmp(&other.release)
            .then(self.id.cmp(&other.id))
    }
}

/// A complete static instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub system: SetSystem,
    pub requests: Vec<Request>,
    pub horizon: f64,
}

impl Instance {
    pub fn new(system: SetSystem, requests: Vec<Request>, horizon: f64) -> Result<Self> {
        let inst = Instance {
            system,
            requests,
            horizon,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(Error::validation("horizon", "horizon must be positive and finite"));
        }
        let n = self.system.element_count();
        for (idx, r) in self.requests.iter().enumerate() {
            let loc = format!("requests[{idx}]");
            if r.id != idx {
                return Err(Error::validation(loc, format!("id {} does not match position", r.id)));
            }
            if r.element >= n {
                return Err(Error::validation(
                    format!("{loc}.element"),
                    format!("element {} outside universe of size {n}", r.element),
                ));
            }
            if !r.release.is_finite() || r.release < 0.0 || r.release > self.horizon {
                return Err(Error::validation(
                    format!("{loc}.release"),
                    format!("release {} outside [0, {}]", r.release, self.horizon),
                ));
            }
            if let Some(d) = r.delay.hard_deadline() {
                if d < r.release || d > self.horizon {
                    return Err(Error::validation(
                        format!("{loc}.deadline"),
                        format!("deadline {d} outside [{}, {}]", r.release, self.horizon),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Request ids sorted by the precedence order.
    pub fn arrival_order(&self) -> Vec<RequestId> {
        let mut ids: Vec<RequestId> = (0..self.requests.len()).collect();
        ids.sort_by(|&a, &b| self.requests[a].precedence(&self.requests[b]));
        ids
    }

    /// All times at which something happens: releases, breakpoints, deadlines and the horizon.
    pub fn event_times(&self) -> Vec<f64> {
        let mut times = vec![0.0, self.horizon];
        for r in &self.requests {
            times.push(r.release);
            times.extend(
                r.delay
                    .breakpoints()
                    .iter()
                    .copied()
                    .filter(|&b| b > r.release && b < self.horizon),
            );
            if let Some(d) = r.delay.hard_deadline() {
                times.push(d);
            }
        }
        times.sort_by(f64::total_cmp);
        times.dedup_by(|a, b| (*a - *b).abs() <= TIME_EPS * b.abs().max(1.0));
        times
    }

    /// Hex SHA-256 of the canonical file form.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(&InstanceFile::from_instance(self))
            .expect("instance file serialization is infallible");
        format!("{:x}", Sha256::digest(canonical.as_bytes()))
    }
}

/// Default step: 10^-3 of the shortest gap between events, capped at 10^-2.
pub fn default_dt(inst: &Instance) -> f64 {
    let times = inst.event_times();
    let gap = times
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if gap.is_finite() {
        (gap * 1e-3).min(1e-2)
    } else {
        1e-2
    }
}
