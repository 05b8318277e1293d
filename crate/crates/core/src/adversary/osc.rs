//! Online set cover expressed as a deadline-only delay instance.

use serde::{Deserialize, Serialize};

use crate::engine::{run_instance, OnlineAlgorithm, RunOptions, Trace};
use crate::error::{Error, Result};
use crate::model::{snap, DelayFunction, ElementId, Instance, Request, SetId, SetSystem};

/// One zero-rate request per element released at 0. The element at stream
/// position `i` (1-based, first occurrence) gets a hard deadline at `i`.
pub fn osc_instance(system: &SetSystem, stream: &[ElementId]) -> Result<Instance> {
    let n = system.element_count();
    let mut deadline = vec![None; n];
    for (pos, &e) in stream.iter().enumerate() {
        if e >= n {
            return Err(Error::validation(format!("stream[{pos}]"), format!("unknown element {e}")));
        }
        deadline[e].get_or_insert((pos + 1) as f64);
    }
    let requests = deadline
        .iter()
        .enumerate()
        .map(|(e, &d)| {
            let delay = DelayFunction::new(vec![(0.0, 0.0)], d).expect("zero rate with a finite deadline");
            Request::new(e, e, 0.0, delay)
        })
        .collect();
    Instance::new(system.clone(), requests, stream.len() as f64 + 1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OscReport {
    /// Sets bought integrally, in order of first purchase.
    pub cover: Vec<SetId>,
    pub cover_cost: f64,
    pub run_cost: f64,
    /// Stream positions whose element was uncovered at its arrival.
    pub uncovered: Vec<usize>,
    pub trace: Trace,
}

impl OscReport {
    pub fn feasible(&self) -> bool {
        self.uncovered.is_empty()
    }
}

pub fn osc_to_scd(
    system: &SetSystem,
    stream: &[ElementId],
    algo: &mut dyn OnlineAlgorithm,
    opts: &RunOptions,
) -> Result<OscReport> {
    let inst = osc_instance(system, stream)?;
    let trace = run_instance(&inst, algo, opts)?;
    let mut cover: Vec<SetId> = Vec::new();
    for p in trace.purchases.iter().filter(|p| p.integral) {
        if !cover.contains(&p.set) {
            cover.push(p.set);
        }
    }
    let uncovered = stream
        .iter()
        .enumerate()
        .filter(|&(pos, &e)| {
            let arrival = (pos + 1) as f64;
            !trace
                .purchases
                .iter()
                .any(|p| p.integral && p.time <= snap(arrival) && system.containing(e).contains(&p.set))
        })
        .map(|(pos, _)| pos)
        .collect();
    Ok(OscReport {
        cover_cost: cover.iter().map(|&s| system.cost(s)).sum(),
        run_cost: trace.total(),
        cover,
        uncovered,
        trace,
    })
}
