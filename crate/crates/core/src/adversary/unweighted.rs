//! Reduction from weighted to unit-cost instances.

use crate::error::{Error, Result};
use crate::model::{Instance, Request, SetId, SetSystem, WeightedSet};

/// Largest element count a conversion may produce.
pub const MAX_CONVERTED_ELEMENTS: usize = 100_000;

/// A weighted instance together with its unit-cost equivalent.
#[derive(Clone, Debug)]
pub struct UnweightedConversion {
    /// The input with costs rounded up to powers of two, smallest cost 1.
    pub rounded: Instance,
    pub converted: Instance,
    /// Copies per element; equals the largest rounded cost.
    pub copies: usize,
    /// Unit sets generated from each rounded set.
    pub set_copies: Vec<Vec<SetId>>,
}

fn power_of_two_at_least(c: f64) -> f64 {
    let mut p = 1.0;
    while p < c {
        p *= 2.0;
    }
    p
}

/// Round every cost up to a power of two, then divide costs and delays by the
/// smallest rounded cost.
pub fn round_costs(inst: &Instance) -> Result<Instance> {
    let rounded: Vec<f64> = inst.system.sets().iter().map(|s| power_of_two_at_least(s.cost)).collect();
    let min = rounded.iter().copied().fold(f64::INFINITY, f64::min);
    let sets = inst
        .system
        .sets()
        .iter()
        .zip(&rounded)
        .map(|(s, &c)| WeightedSet::new(c / min, s.elements.clone()))
        .collect();
    let system = SetSystem::with_element_count(sets, inst.system.element_count())?;
    let requests = inst
        .requests
        .iter()
        .map(|r| Request::new(r.id, r.element, r.release, r.delay.scaled(1.0 / min)))
        .collect();
    Instance::new(system, requests, inst.horizon)
}

/// Replace each element by `C` copies and each set of cost `c` by `c` unit
/// sets; copy `l` of an element lies in unit set `j` iff `l = j mod c`.
pub fn unweighted_convert(inst: &Instance) -> Result<UnweightedConversion> {
    let rounded = round_costs(inst)?;
    let n = rounded.system.element_count();
    let max = rounded.system.max_cost();
    if n as f64 * max > MAX_CONVERTED_ELEMENTS as f64 {
        return Err(Error::Guard(format!(
            "conversion needs {n} x {max} elements (limit {MAX_CONVERTED_ELEMENTS})"
        )));
    }
    let copies = max as usize;
    let mut sets = Vec::new();
    let mut set_copies = Vec::new();
    for set in rounded.system.sets() {
        let c = set.cost as usize;
        let mut ids = Vec::with_capacity(c);
        for j in 0..c {
            let elements = set
                .elements
                .iter()
                .flat_map(|&e| (j..copies).step_by(c).map(move |l| e * copies + l))
                .collect();
            ids.push(sets.len());
            sets.push(WeightedSet::new(1.0, elements));
        }
        set_copies.push(ids);
    }
    let system = SetSystem::with_element_count(sets, n * copies)?;
    let scale = 1.0 / copies as f64;
    let mut requests = Vec::with_capacity(rounded.requests.len() * copies);
    for r in &rounded.requests {
        for l in 0..copies {
            requests.push(Request::new(
                requests.len(),
                r.element * copies + l,
                r.release,
                r.delay.scaled(scale),
            ));
        }
    }
    let converted = Instance::new(system, requests, rounded.horizon)?;
    Ok(UnweightedConversion {
        rounded,
        converted,
        copies,
        set_copies,
    })
}

impl UnweightedConversion {
    /// Map per-step amounts on the unit sets back to the rounded sets by
    /// averaging over each set's copies.
    pub fn average_back(&self, amounts: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let steps = amounts.first().map_or(0, Vec::len);
        self.set_copies
            .iter()
            .map(|ids| {
                let mut avg = vec![0.0; steps];
                for &id in ids {
                    for (a, &x) in avg.iter_mut().zip(&amounts[id]) {
                        *a += x;
                    }
                }
                let c = ids.len() as f64;
                avg.iter_mut().for_each(|a| *a /= c);
                avg
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FractionalCost {
    pub buy: f64,
    pub delay: f64,
}

impl FractionalCost {
    pub fn total(&self) -> f64 {
        self.buy + self.delay
    }
}

/// Cost of a fractional schedule given as `amounts[set][step]` on the grid
/// `s * dt`. Coverage from a step counts from the end of that step, as in the
/// engine. Hard deadlines are ignored.
pub fn fractional_cost(inst: &Instance, dt: f64, amounts: &[Vec<f64>]) -> Result<FractionalCost> {
    let m = inst.system.set_count();
    if amounts.len() != m {
        return Err(Error::Domain(format!("expected amounts for {m} sets, got {}", amounts.len())));
    }
    let steps = (inst.horizon / dt - 1e-9).ceil().max(0.0) as usize;
    if let Some(bad) = amounts.iter().position(|a| a.len() != steps) {
        return Err(Error::Domain(format!("set {bad} has the wrong number of steps (need {steps})")));
    }
    let buy = amounts
        .iter()
        .enumerate()
        .map(|(i, a)| inst.system.cost(i) * a.iter().sum::<f64>())
        .sum();
    let mut delay = 0.0;
    for r in &inst.requests {
        let sets = inst.system.containing(r.element);
        let mut gamma: f64 = 0.0;
        for s in 0..steps {
            let t = s as f64 * dt;
            let end = ((s + 1) as f64 * dt).min(inst.horizon);
            if end <= r.release {
                continue;
            }
            let uncovered = (1.0 - gamma).max(0.0);
            delay += uncovered * r.delay.integral(t.max(r.release), end);
            if t >= r.release - 1e-9 * r.release.abs().max(1.0) {
                gamma += sets.iter().map(|&i| amounts[i][s]).sum::<f64>();
            }
        }
    }
    Ok(FractionalCost { buy, delay })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DelayFunction;

    fn instance(costs: &[f64], members: &[Vec<usize>]) -> Instance {
        let sets = costs
            .iter()
            .zip(members)
            .map(|(&c, m)| WeightedSet::new(c, m.clone()))
            .collect();
        let sys = SetSystem::new(sets).unwrap();
        let reqs = vec![Request::new(0, 0, 0.0, DelayFunction::constant(1.0))];
        Instance::new(sys, reqs, 2.0).unwrap()
    }

    #[test]
    fn cost_four_set_becomes_a_matching() {
        let inst = instance(&[1.0, 4.0], &[vec![0], vec![0]]);
        let conv = unweighted_convert(&inst).unwrap();
        assert_eq!(conv.copies, 4);
        assert_eq!(conv.converted.system.element_count(), 4);
        assert_eq!(conv.converted.system.set_count(), 5);
        assert_eq!(conv.converted.system.set(0).elements, vec![0, 1, 2, 3]);
        for j in 0..4 {
            assert_eq!(conv.converted.system.set(1 + j).elements, vec![j]);
        }
        assert_eq!(conv.converted.requests.len(), 4);
        assert_eq!(conv.converted.requests[2].delay.rate_at(1.0), 0.25);
    }

    #[test]
    fn mixed_costs() {
        let inst = instance(&[1.0, 2.0], &[vec![0], vec![0]]);
        let conv = unweighted_convert(&inst).unwrap();
        assert_eq!(conv.copies, 2);
        let sys = &conv.converted.system;
        assert_eq!(sys.set(0).elements, vec![0, 1]);
        assert_eq!(sys.set(1).elements, vec![0]);
        assert_eq!(sys.set(2).elements, vec![1]);
        assert_eq!(conv.set_copies, vec![vec![0], vec![1, 2]]);
    }

    #[test]
    fn rounding_scales_to_unit_minimum() {
        let inst = instance(&[3.0, 5.0], &[vec![0], vec![0]]);
        let r = round_costs(&inst).unwrap();
        assert_eq!(r.system.cost(0), 1.0);
        assert_eq!(r.system.cost(1), 2.0);
        assert_eq!(r.requests[0].delay.rate_at(0.0), 0.25);
        let single = round_costs(&instance(&[4.0], &[vec![0]])).unwrap();
        assert_eq!(single.system.cost(0), 1.0);
        assert_eq!(unweighted_convert(&single).unwrap().copies, 1);
    }

    #[test]
    fn guard_on_size() {
        let inst = instance(&[1.0, 1e6], &[vec![0], vec![0]]);
        assert!(matches!(unweighted_convert(&inst), Err(Error::Guard(_))));
    }

    #[test]
    fn averaging_back_preserves_uniform_schedules() {
        let inst = instance(&[1.0, 2.0], &[vec![0], vec![0]]);
        let conv = unweighted_convert(&inst).unwrap();
        let dt = 0.5;
        let amounts = vec![vec![0.2, 0.0, 0.0, 0.0], vec![0.1, 0.1, 0.0, 0.0], vec![0.1, 0.1, 0.0, 0.0]];
        let back = conv.average_back(&amounts);
        assert_eq!(back, vec![vec![0.2, 0.0, 0.0, 0.0], vec![0.1, 0.1, 0.0, 0.0]]);
        let a = fractional_cost(&conv.converted, dt, &amounts).unwrap();
        let b = fractional_cost(&conv.rounded, dt, &back).unwrap();
        assert!((a.total() - b.total()).abs() < 1e-12);
    }
}
