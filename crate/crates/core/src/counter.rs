//! Deterministic counter algorithm: every set accumulates the delay of its
//! pending requests and is bought when the counter reaches its cost.

use crate::engine::{Decision, OnlineAlgorithm, RequestInfo, TickView};
use crate::error::Result;
use crate::model::{RequestId, SetId, SetSystem};

/// Relative slack under which a counter counts as having reached its cost.
pub const TRIGGER_EPS: f64 = 1e-9;

#[derive(Clone, Debug, Default)]
pub struct Counter {
    counters: Vec<f64>,
    live: Vec<RequestId>,
}

impl Counter {
    pub fn new() -> Self {
        Counter::default()
    }

    pub fn counters(&self) -> &[f64] {
        &self.counters
    }
}

impl OnlineAlgorithm for Counter {
    fn name(&self) -> &str {
        "counter"
    }

    fn start(&mut self, system: &SetSystem, _seed: u64) -> Result<()> {
        self.counters = vec![0.0; system.set_count()];
        self.live.clear();
        Ok(())
    }

    fn on_request_arrival(&mut self, request: RequestInfo, _view: &TickView) -> Result<()> {
        self.live.push(request.id);
        Ok(())
    }

    fn on_deadline_announced(&mut self, id: RequestId, view: &TickView) -> Result<Vec<SetId>> {
        let set = view.system().cheapest_containing(view.info(id).element);
        self.counters[set] = 0.0;
        Ok(vec![set])
    }

    fn on_tick(&mut self, view: &TickView) -> Result<Decision> {
        let system = view.system();
        for &j in &self.live {
            let d = view.charged_last_step(j);
            if d > 0.0 {
                for &i in system.containing(view.info(j).element) {
                    self.counters[i] += d;
                }
            }
        }
        self.live.retain(|&j| view.is_pending(j));

        let mut buy = Vec::new();
        while let Some(i) = (0..self.counters.len())
            .find(|&i| self.counters[i] >= system.cost(i) * (1.0 - TRIGGER_EPS))
        {
            self.counters[i] = 0.0;
            buy.push(i);
        }
        Ok(Decision::buy(buy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_instance, RunOptions};
    use crate::model::{DelayFunction, Instance, Request, WeightedSet};

    fn unit_sets(k: usize) -> Instance {
        let sets = (0..k).map(|_| WeightedSet::new(1.0, vec![0])).collect();
        let sys = SetSystem::new(sets).unwrap();
        let req = Request::new(0, 0, 0.0, DelayFunction::constant(1.0));
        Instance::new(sys, vec![req], 3.0).unwrap()
    }

    #[test]
    fn tcp_ack_costs_two() {
        let dt = 1e-3;
        let tr = run_instance(&unit_sets(1), &mut Counter::new(), &RunOptions::new(dt, 0)).unwrap();
        assert!((tr.total() - 2.0).abs() <= 10.0 * dt, "{}", tr.total());
        assert!((tr.served_at[0].unwrap() - 1.0).abs() <= dt);
    }

    #[test]
    fn k_unit_sets_cost_k_plus_one() {
        for k in [2, 3, 5] {
            let tr = run_instance(&unit_sets(k), &mut Counter::new(), &RunOptions::new(1e-3, 0)).unwrap();
            assert!((tr.cost_buy - k as f64).abs() < 1e-12);
            assert!((tr.total() - (k + 1) as f64).abs() < 1e-9, "{}", tr.total());
        }
    }

    #[test]
    fn idle_without_requests() {
        let sys = SetSystem::new(vec![WeightedSet::new(1.0, vec![0])]).unwrap();
        let inst = Instance::new(sys, vec![], 2.0).unwrap();
        let mut c = Counter::new();
        let tr = run_instance(&inst, &mut c, &RunOptions::new(1e-2, 0)).unwrap();
        assert_eq!(tr.cost_buy, 0.0);
        assert_eq!(c.counters(), &[0.0]);
    }
}
