//! Instance generators: the adaptive lower bound, reductions and random families.

pub mod lower_bound;
pub mod osc;
pub mod random;
pub mod unweighted;

pub use lower_bound::{build_universe, lower_bound_constants, make_qab, Branch, BranchOutcome, LowerBoundSource};
pub use osc::{osc_instance, osc_to_scd, OscReport};
pub use random::{gen_random, RandomInstanceSpec};
pub use unweighted::{fractional_cost, round_costs, unweighted_convert, UnweightedConversion};

use crate::engine::{Decision, OnlineAlgorithm, RequestInfo, TickView};
use crate::error::{Error, Result};
use crate::model::{DelayFunction, Instance, Request, RequestId, SetId, SetSystem, WeightedSet};

/// `k - 1` elements, one central set holding all of them and `k - 1` private
/// unit sets per element; a rate-1 request on every element at time 0.
/// Every element lies in exactly `k` sets.
pub fn hub_instance(k: usize, horizon: f64) -> Result<Instance> {
    if k < 2 {
        return Err(Error::Domain(format!("hub instance needs k >= 2, got {k}")));
    }
    let n = k - 1;
    let mut sets = vec![WeightedSet::new(1.0, (0..n).collect())];
    for e in 0..n {
        for _ in 0..n {
            sets.push(WeightedSet::new(1.0, vec![e]));
        }
    }
    let system = SetSystem::with_element_count(sets, n)?;
    let requests = (0..n)
        .map(|e| Request::new(e, e, 0.0, DelayFunction::constant(1.0)))
        .collect();
    Instance::new(system, requests, horizon)
}

/// `k` unit sets over a single element with one rate-1 request at time 0.
pub fn parallel_instance(k: usize, horizon: f64) -> Result<Instance> {
    if k == 0 {
        return Err(Error::Domain("parallel instance needs at least one set".into()));
    }
    let sets = (0..k).map(|_| WeightedSet::new(1.0, vec![0])).collect();
    let system = SetSystem::new(sets)?;
    let req = Request::new(0, 0, 0.0, DelayFunction::constant(1.0));
    Instance::new(system, vec![req], horizon)
}

/// Never buys anything.
#[derive(Clone, Debug, Default)]
pub struct Idle;

impl OnlineAlgorithm for Idle {
    fn name(&self) -> &str {
        "idle"
    }

    fn start(&mut self, _: &SetSystem, _: u64) -> Result<()> {
        Ok(())
    }

    fn on_request_arrival(&mut self, _: RequestInfo, _: &TickView) -> Result<()> {
        Ok(())
    }

    fn on_deadline_announced(&mut self, _: RequestId, _: &TickView) -> Result<Vec<SetId>> {
        Ok(Vec::new())
    }

    fn on_tick(&mut self, _: &TickView) -> Result<Decision> {
        Ok(Decision::none())
    }
}

/// Buys every set containing a request's element when the request arrives.
#[derive(Clone, Debug, Default)]
pub struct Eager {
    queue: Vec<SetId>,
}

impl OnlineAlgorithm for Eager {
    fn name(&self) -> &str {
        "eager"
    }

    fn start(&mut self, _: &SetSystem, _: u64) -> Result<()> {
        self.queue.clear();
        Ok(())
    }

    fn on_request_arrival(&mut self, info: RequestInfo, view: &TickView) -> Result<()> {
        self.queue.extend_from_slice(view.system().containing(info.element));
        Ok(())
    }

    fn on_deadline_announced(&mut self, _: RequestId, _: &TickView) -> Result<Vec<SetId>> {
        Ok(Vec::new())
    }

    fn on_tick(&mut self, _: &TickView) -> Result<Decision> {
        let mut buy = std::mem::take(&mut self.queue);
        buy.sort_unstable();
        buy.dedup();
        Ok(Decision::buy(buy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hub_shape() {
        let inst = hub_instance(4, 3.0).unwrap();
        assert_eq!(inst.system.element_count(), 3);
        assert_eq!(inst.system.set_count(), 10);
        assert_eq!(inst.system.max_membership(), 4);
        assert_eq!(inst.requests.len(), 3);
        assert!(hub_instance(1, 3.0).is_err());
    }

    #[test]
    fn parallel_shape() {
        let inst = parallel_instance(3, 2.0).unwrap();
        assert_eq!(inst.system.max_membership(), 3);
    }
}
