//! Seeded random instances.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DelayFunction, Instance, Request, SetSystem, WeightedSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceSpec {
    pub elements: usize,
    pub sets: usize,
    /// Every element lies in between 1 and this many sets.
    pub max_membership: usize,
    pub requests: usize,
    pub rate_range: (f64, f64),
    pub cost_range: (f64, f64),
    pub horizon: f64,
    /// Releases and breakpoints are multiples of this.
    pub grid: f64,
    pub seed: u64,
}

impl Default for RandomInstanceSpec {
    fn default() -> Self {
        RandomInstanceSpec {
            elements: 4,
            sets: 4,
            max_membership: 2,
            requests: 6,
            rate_range: (0.25, 2.0),
            cost_range: (1.0, 4.0),
            horizon: 8.0,
            grid: 0.5,
            seed: 0,
        }
    }
}

/// Rates and costs are drawn on multiples of this.
const VALUE_GRID: f64 = 0.25;

fn on_grid(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    let slots = ((hi - lo) / VALUE_GRID).floor() as u64;
    lo + VALUE_GRID * rng.gen_range(0..=slots) as f64
}

pub fn gen_random(spec: &RandomInstanceSpec) -> Result<Instance> {
    let bad = |msg: &str| Err(Error::Domain(msg.to_string()));
    if spec.elements == 0 || spec.sets == 0 || spec.max_membership == 0 {
        return bad("elements, sets and membership must be positive");
    }
    if !(spec.rate_range.0 >= 0.0 && spec.rate_range.0 <= spec.rate_range.1) {
        return bad("rate range must satisfy 0 <= lo <= hi");
    }
    if !(spec.cost_range.0 >= 1.0 && spec.cost_range.0 <= spec.cost_range.1) {
        return bad("cost range must satisfy 1 <= lo <= hi");
    }
    if !(spec.grid > 0.0 && spec.horizon >= 2.0 * spec.grid) {
        return bad("horizon must span at least two grid steps");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut members = vec![Vec::new(); spec.sets];
    let k = spec.max_membership.min(spec.sets);
    for e in 0..spec.elements {
        let count = rng.gen_range(1..=k);
        for s in sample(&mut rng, spec.sets, count) {
            members[s].push(e);
        }
    }
    let sets = members
        .into_iter()
        .map(|m| WeightedSet::new(on_grid(&mut rng, spec.cost_range), m))
        .collect();
    let system = SetSystem::with_element_count(sets, spec.elements)?;

    let slots = (spec.horizon / spec.grid).round() as usize;
    let mut raw = Vec::with_capacity(spec.requests);
    for _ in 0..spec.requests {
        let element = rng.gen_range(0..spec.elements);
        let start = rng.gen_range(0..=slots / 2);
        let later = slots - start - 1;
        let extra = rng.gen_range(0..=2usize).min(later);
        let mut points: Vec<usize> = sample(&mut rng, later, extra).into_iter().map(|p| start + 1 + p).collect();
        points.sort_unstable();
        let mut segments = vec![(start as f64 * spec.grid, on_grid(&mut rng, spec.rate_range))];
        for p in points {
            segments.push((p as f64 * spec.grid, on_grid(&mut rng, spec.rate_range)));
        }
        raw.push((element, start as f64 * spec.grid, DelayFunction::new(segments, None)?));
    }
    raw.sort_by(|a, b| a.1.total_cmp(&b.1));
    let requests = raw
        .into_iter()
        .enumerate()
        .map(|(id, (e, release, delay))| Request::new(id, e, release, delay))
        .collect();
    Instance::new(system, requests, spec.horizon)
}
