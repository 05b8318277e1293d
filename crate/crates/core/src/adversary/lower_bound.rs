//! Recursive adaptive instance forcing every fractional algorithm above the
//! optimum by a factor that grows with the recursion depth.
//!
//! Level `d` has `2^d` sets over `3^d` elements. Its elements are three copies
//! `E1, E2, E3` of level `d-1`; every set `S` of level `d-1` yields a cheap copy
//! on `E1 + E2` and an expensive copy on `E1 + E3`. A run of level `d` starting
//! at `t0` releases a late request on each expensive copy, runs level `d-1` on
//! `E1`, and at `t0 + 3^(d-1)` continues on `E3` (if the algorithm already spent
//! enough on expensive copies) or on `E2` (otherwise).

use serde::{Deserialize, Serialize};

use crate::engine::{Observed, RequestSource};
use crate::error::{Error, Result};
use crate::model::{snap, DelayFunction, ElementId, Instance, Request, SetId, SetSystem, WeightedSet};
use crate::opt::PurchaseSchedule;

pub const MAX_DEPTH: usize = 8;

/// Recurrence constants of one level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelConstants {
    pub depth: usize,
    /// Ratio forced at this level.
    pub ratio: f64,
    /// Price markup of the expensive copies introduced at this level.
    pub markup: f64,
    /// Cost of the reference schedule.
    pub reference_cost: f64,
}

/// Constants for levels `0..=depth`.
pub fn lower_bound_constants(depth: usize) -> Vec<LevelConstants> {
    let mut out = vec![LevelConstants {
        depth: 0,
        ratio: 1.0,
        markup: 0.0,
        reference_cost: 1.0,
    }];
    for d in 1..=depth {
        let prev = out[d - 1];
        let markup = 1.0 / (2.0 * prev.ratio);
        out.push(LevelConstants {
            depth: d,
            ratio: prev.ratio + 1.0 / (12.0 * prev.ratio),
            markup,
            reference_cost: (2.0 + markup) * prev.reference_cost,
        });
    }
    out
}

/// Concrete set system of one level with a unique element per set.
#[derive(Clone, Debug)]
pub struct Universe {
    pub depth: usize,
    pub system: SetSystem,
    /// An element contained in no other set, per set.
    pub unique: Vec<ElementId>,
}

pub fn build_universe(depth: usize) -> Result<Universe> {
    if depth > MAX_DEPTH {
        return Err(Error::Guard(format!("lower-bound depth {depth} exceeds {MAX_DEPTH}")));
    }
    let levels = build_levels(depth);
    let top = levels.last().expect("at least level 0");
    let sets = top
        .costs
        .iter()
        .zip(&top.members)
        .map(|(&c, m)| WeightedSet::new(c, m.clone()))
        .collect();
    Ok(Universe {
        depth,
        system: SetSystem::with_element_count(sets, 3usize.pow(depth as u32))?,
        unique: top.unique.clone(),
    })
}

#[derive(Clone, Debug)]
struct Level {
    costs: Vec<f64>,
    members: Vec<Vec<ElementId>>,
    unique: Vec<ElementId>,
}

fn build_levels(depth: usize) -> Vec<Level> {
    let constants = lower_bound_constants(depth);
    let mut levels = vec![Level {
        costs: vec![1.0],
        members: vec![vec![0]],
        unique: vec![0],
    }];
    for d in 1..=depth {
        let prev = &levels[d - 1];
        let n_prev = 3usize.pow(d as u32 - 1);
        let factor = 1.0 + constants[d].markup;
        let mut costs = prev.costs.clone();
        costs.extend(prev.costs.iter().map(|c| c * factor));
        let mut members = Vec::new();
        let mut unique = Vec::new();
        for offset in [n_prev, 2 * n_prev] {
            for (s, m) in prev.members.iter().enumerate() {
                let mut set: Vec<ElementId> = m.clone();
                set.extend(m.iter().map(|e| e + offset));
                members.push(set);
                unique.push(prev.unique[s] + offset);
            }
        }
        levels.push(Level { costs, members, unique });
    }
    levels
}

/// A request that is free until `a` and accrues exactly `cost` by `b`.
pub fn make_qab(system: &SetSystem, set: SetId, a: f64, b: f64, release: f64, id: usize) -> Result<Request> {
    if set >= system.set_count() {
        return Err(Error::Domain(format!("unknown set {set}")));
    }
    if !(release <= a && a < b) {
        return Err(Error::Domain(format!("need release <= a < b, got {release}, {a}, {b}")));
    }
    let element = system
        .set(set)
        .elements
        .iter()
        .copied()
        .find(|&e| system.containing(e).len() == 1)
        .ok_or_else(|| Error::Domain(format!("set {set} has no element unique to it")))?;
    Ok(qab_request(id, element, system.cost(set), a, b, release, false))
}

fn qab_request(id: usize, element: ElementId, cost: f64, a: f64, b: f64, release: f64, deadline: bool) -> Request {
    let delay = if deadline {
        DelayFunction::new(vec![(release, 0.0)], Some(b))
    } else if release < a {
        DelayFunction::new(vec![(release, 0.0), (a, cost / (b - a)), (b, 0.0)], None)
    } else {
        DelayFunction::new(vec![(a, cost / (b - a)), (b, 0.0)], None)
    }
    .expect("request segments are ascending with nonnegative rates");
    Request::new(id, element, release, delay)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// The algorithm spent enough on expensive copies; continue on `E3`.
    Expensive,
    /// Continue on `E2`.
    Cheap,
}

/// Decision taken by one recursion node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchOutcome {
    pub depth: usize,
    pub start: f64,
    pub scale: f64,
    pub spend: f64,
    pub threshold: f64,
    pub branch: Branch,
}

#[derive(Clone, Debug)]
struct Node {
    depth: usize,
    start: f64,
    scale: f64,
    element_offset: usize,
    /// Concrete sets realizing each set of this node's level.
    set_map: Vec<Vec<SetId>>,
    baseline: Vec<f64>,
    first_child: Option<usize>,
    second_child: Option<usize>,
    outcome: Option<BranchOutcome>,
}

#[derive(Clone, Copy, Debug)]
enum Event {
    Start(usize),
    Decide(usize),
}

/// The adaptive instance as a request source.
#[derive(Clone, Debug)]
pub struct LowerBoundSource {
    depth: usize,
    deadline_mode: bool,
    levels: Vec<Level>,
    constants: Vec<LevelConstants>,
    system: SetSystem,
    nodes: Vec<Node>,
    events: Vec<(f64, usize, Event)>,
    next_event_seq: usize,
    requests: Vec<Request>,
}

impl LowerBoundSource {
    pub fn new(depth: usize, deadline_mode: bool) -> Result<Self> {
        let universe = build_universe(depth)?;
        let levels = build_levels(depth);
        let m = universe.system.set_count();
        let root = Node {
            depth,
            start: 0.0,
            scale: 1.0,
            element_offset: 0,
            set_map: (0..m).map(|s| vec![s]).collect(),
            baseline: Vec::new(),
            first_child: None,
            second_child: None,
            outcome: None,
        };
        Ok(LowerBoundSource {
            depth,
            deadline_mode,
            levels,
            constants: lower_bound_constants(depth),
            system: universe.system,
            nodes: vec![root],
            events: vec![(0.0, 0, Event::Start(0))],
            next_event_seq: 1,
            requests: Vec::new(),
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn constants(&self) -> LevelConstants {
        self.constants[self.depth]
    }

    /// Branch decisions in the order they were taken.
    pub fn outcomes(&self) -> Vec<BranchOutcome> {
        let mut v: Vec<BranchOutcome> = self.nodes.iter().filter_map(|n| n.outcome.clone()).collect();
        v.sort_by(|a, b| a.start.total_cmp(&b.start).then(b.depth.cmp(&a.depth)));
        v
    }

    fn schedule(&mut self, time: f64, event: Event) {
        self.events.push((time, self.next_event_seq, event));
        self.next_event_seq += 1;
    }

    fn push_request(&mut self, element: ElementId, cost: f64, a: f64, b: f64, release: f64) {
        let id = self.requests.len();
        self.requests
            .push(qab_request(id, element, cost, a, b, release, self.deadline_mode));
    }

    fn start_node(&mut self, idx: usize, bought: &[f64]) {
        self.nodes[idx].baseline = bought.to_vec();
        let node = self.nodes[idx].clone();
        let d = node.depth;
        if d == 0 {
            let element = node.element_offset + self.levels[0].unique[0];
            self.push_request(element, node.scale, node.start, node.start + 1.0, node.start);
            return;
        }
        let third = 3f64.powi(d as i32 - 1);
        let half = 1usize << (d - 1);
        let level = &self.levels[d];
        let late: Vec<(ElementId, f64)> = (half..2 * half)
            .map(|t| (node.element_offset + level.unique[t], node.scale * level.costs[t]))
            .collect();
        for (element, cost) in late {
            self.push_request(element, cost, node.start + 2.0 * third, node.start + 3.0 * third, node.start);
        }
        let child = Node {
            depth: d - 1,
            start: node.start,
            scale: node.scale,
            element_offset: node.element_offset,
            set_map: (0..half)
                .map(|s| {
                    let mut v = node.set_map[s].clone();
                    v.extend_from_slice(&node.set_map[half + s]);
                    v
                })
                .collect(),
            baseline: Vec::new(),
            first_child: None,
            second_child: None,
            outcome: None,
        };
        let child_idx = self.nodes.len();
        self.nodes.push(child);
        self.nodes[idx].first_child = Some(child_idx);
        self.start_node(child_idx, bought);
        self.schedule(node.start + third, Event::Decide(idx));
    }

    fn decide(&mut self, idx: usize, bought: &[f64]) {
        let node = self.nodes[idx].clone();
        let d = node.depth;
        let third = 3f64.powi(d as i32 - 1);
        let half = 1usize << (d - 1);
        let level = &self.levels[d];
        let spend: f64 = (half..2 * half)
            .map(|t| {
                let amount: f64 = node.set_map[t].iter().map(|&s| bought[s] - node.baseline[s]).sum();
                node.scale * level.costs[t] * amount
            })
            .sum();
        let markup = self.constants[d].markup;
        let threshold = 0.5 * (1.0 + markup) * node.scale * self.constants[d - 1].reference_cost;
        let (branch, scale, offset, sets) = if spend >= threshold {
            (
                Branch::Expensive,
                node.scale * (1.0 + markup),
                node.element_offset + 2 * 3usize.pow(d as u32 - 1),
                (0..half).map(|s| node.set_map[half + s].clone()).collect(),
            )
        } else {
            (
                Branch::Cheap,
                node.scale,
                node.element_offset + 3usize.pow(d as u32 - 1),
                (0..half).map(|s| node.set_map[s].clone()).collect(),
            )
        };
        self.nodes[idx].outcome = Some(BranchOutcome {
            depth: d,
            start: node.start,
            scale: node.scale,
            spend,
            threshold,
            branch,
        });
        let child = Node {
            depth: d - 1,
            start: node.start + third,
            scale,
            element_offset: offset,
            set_map: sets,
            baseline: Vec::new(),
            first_child: None,
            second_child: None,
            outcome: None,
        };
        let child_idx = self.nodes.len();
        self.nodes.push(child);
        self.nodes[idx].second_child = Some(child_idx);
        self.start_node(child_idx, bought);
    }

    /// Purchases buying every set of the realized recursion once, at the start
    /// of the sub-run that needs it. Requires the run to have reached the horizon.
    pub fn reference_schedule(&self) -> Result<PurchaseSchedule> {
        let mut purchases = Vec::new();
        let root_map: Vec<SetId> = (0..self.system.set_count()).collect();
        self.reference_node(0, &root_map, &mut purchases)?;
        Ok(PurchaseSchedule::new(purchases))
    }

    fn reference_node(&self, idx: usize, chosen: &[SetId], out: &mut Vec<(f64, SetId)>) -> Result<()> {
        let node = &self.nodes[idx];
        if node.depth == 0 {
            out.push((node.start, chosen[0]));
            return Ok(());
        }
        let half = 1usize << (node.depth - 1);
        let (Some(first), Some(second), Some(outcome)) = (node.first_child, node.second_child, &node.outcome) else {
            return Err(Error::MissingData("the adaptive run did not reach every branch decision".into()));
        };
        let cheap: Vec<SetId> = chosen[..half].to_vec();
        let expensive: Vec<SetId> = chosen[half..].to_vec();
        match outcome.branch {
            Branch::Expensive => {
                self.reference_node(first, &cheap, out)?;
                self.reference_node(second, &expensive, out)?;
            }
            Branch::Cheap => {
                self.reference_node(first, &expensive, out)?;
                self.reference_node(second, &cheap, out)?;
            }
        }
        Ok(())
    }
}

impl RequestSource for LowerBoundSource {
    fn system(&self) -> &SetSystem {
        &self.system
    }

    fn horizon(&self) -> f64 {
        3f64.powi(self.depth as i32)
    }

    fn poll(&mut self, t: f64, observed: &Observed) -> Result<Vec<Request>> {
        let before = self.requests.len();
        loop {
            let next = self
                .events
                .iter()
                .enumerate()
                .filter(|(_, e)| e.0 <= snap(t))
                .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.1 .1.cmp(&b.1 .1)))
                .map(|(i, _)| i);
            let Some(pos) = next else { break };
            let (_, _, event) = self.events.swap_remove(pos);
            match event {
                Event::Start(idx) => self.start_node(idx, observed.bought),
                Event::Decide(idx) => self.decide(idx, observed.bought),
            }
        }
        Ok(self.requests[before..].to_vec())
    }

    fn realized(&self) -> Instance {
        Instance::new(self.system.clone(), self.requests.clone(), self.horizon())
            .expect("generated requests lie inside the horizon")
    }
}
