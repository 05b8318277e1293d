//! Time-discretized covering LP and its dual.
//!
//! With steps `s = 0..S` of length `dt`, let `w[j][s]` be the delay request `j`
//! accrues over step `s` and `first[j]` the step containing its release.
//!
//! Primal: minimize `sum c_i x[i][s] + sum w[j][s] p[j][s]` subject to
//! `p[j][s] + sum_{i contains j} sum_{first[j] <= s' <= s} x[i][s'] >= 1`
//! for every request `j` and step `s >= first[j]`.
//!
//! Dual: maximize `sum y[j][s]` subject to
//! `sum_{j in i, first[j] <= s'} sum_{s >= s'} y[j][s] <= c_i` for every set
//! `i` and step `s'`, and `y[j][s] <= w[j][s]`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::Instance;

pub const MAX_LP_VARIABLES: usize = 100_000;

#[derive(Clone, Debug)]
pub struct DiscreteLp {
    pub dt: f64,
    pub steps: usize,
    pub costs: Vec<f64>,
    /// Sets containing each request's element.
    pub request_sets: Vec<Vec<usize>>,
    pub first_step: Vec<usize>,
    /// Delay accrued by each request over each step.
    pub weights: Vec<Vec<f64>>,
}

/// Worst constraint violation of a candidate solution (0 when feasible).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Violation {
    pub worst: f64,
    pub row: Option<String>,
}

impl Violation {
    fn note(&mut self, amount: f64, row: impl FnOnce() -> String) {
        if amount > self.worst {
            self.worst = amount;
            self.row = Some(row());
        }
    }
}

impl DiscreteLp {
    pub fn new(inst: &Instance, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("step length must be positive, got {dt}")));
        }
        let steps_f = (inst.horizon / dt - 1e-9).ceil().max(1.0);
        let m = inst.system.set_count();
        let n = inst.requests.len();
        let vars = steps_f * (m + n) as f64;
        if vars > MAX_LP_VARIABLES as f64 {
            return Err(Error::Guard(format!(
                "discretized LP would have {vars} primal variables (limit {MAX_LP_VARIABLES})"
            )));
        }
        let steps = steps_f as usize;
        let step_start = |s: usize| s as f64 * dt;
        let step_end = |s: usize| if s + 1 == steps { inst.horizon } else { (s + 1) as f64 * dt };
        let first_step: Vec<usize> = inst
            .requests
            .iter()
            .map(|r| (((r.release / dt) + 1e-9).floor() as usize).min(steps - 1))
            .collect();
        let weights = inst
            .requests
            .iter()
            .zip(&first_step)
            .map(|(r, &f)| {
                (0..steps)
                    .map(|s| {
                        if s < f {
                            0.0
                        } else {
                            r.delay.integral(step_start(s).max(r.release), step_end(s))
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(DiscreteLp {
            dt,
            steps,
            costs: inst.system.sets().iter().map(|s| s.cost).collect(),
            request_sets: inst
                .requests
                .iter()
                .map(|r| inst.system.containing(r.element).to_vec())
                .collect(),
            first_step,
            weights,
        })
    }

    pub fn set_count(&self) -> usize {
        self.costs.len()
    }

    pub fn request_count(&self) -> usize {
        self.first_step.len()
    }

    pub fn cover_row_count(&self) -> usize {
        self.first_step.iter().map(|&f| self.steps - f).sum()
    }

    pub fn primal_objective(&self, x: &[Vec<f64>], p: &[Vec<f64>]) -> f64 {
        let buy: f64 = x
            .iter()
            .zip(&self.costs)
            .map(|(row, c)| c * row.iter().sum::<f64>())
            .sum();
        let delay: f64 = p
            .iter()
            .zip(&self.weights)
            .map(|(row, w)| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        buy + delay
    }

    pub fn primal_violation(&self, x: &[Vec<f64>], p: &[Vec<f64>]) -> Violation {
        let mut v = Violation::default();
        for (i, row) in x.iter().enumerate() {
            for (s, &val) in row.iter().enumerate() {
                v.note(-val, || format!("x_{i}_{s} >= 0"));
            }
        }
        for (j, sets) in self.request_sets.iter().enumerate() {
            let mut bought = 0.0;
            for s in self.first_step[j]..self.steps {
                bought += sets.iter().map(|&i| x[i][s]).sum::<f64>();
                v.note(-p[j][s], || format!("p_{j}_{s} >= 0"));
                v.note(1.0 - p[j][s] - bought, || format!("cover_{j}_{s}"));
            }
        }
        v
    }

    pub fn dual_objective(&self, y: &[Vec<f64>]) -> f64 {
        y.iter().map(|row| row.iter().sum::<f64>()).sum()
    }

    /// Largest violation of the dual constraints, relative to the right-hand side.
    pub fn dual_violation(&self, y: &[Vec<f64>]) -> Violation {
        let mut v = Violation::default();
        for (j, row) in y.iter().enumerate() {
            for (s, &val) in row.iter().enumerate() {
                v.note(-val, || format!("y_{j}_{s} >= 0"));
                let w = self.weights[j][s];
                v.note((val - w) / w.max(1e-300), || format!("delay_{j}_{s}"));
            }
        }
        for (i, &c) in self.costs.iter().enumerate() {
            for (start, lhs) in self.set_row_sums(i, y).into_iter().enumerate() {
                v.note((lhs - c) / c, || format!("set_{i}_{start}"));
            }
        }
        v
    }

    /// Left-hand sides of the per-set dual rows of set `i`, one per step.
    fn set_row_sums(&self, i: usize, y: &[Vec<f64>]) -> Vec<f64> {
        let members: Vec<usize> = (0..self.request_count())
            .filter(|&j| self.request_sets[j].contains(&i))
            .collect();
        let mut out = vec![0.0; self.steps];
        for &j in &members {
            // Suffix sums of y[j]: row s' includes sum_{s >= s'} y[j][s] when first[j] <= s'.
            let mut suffix = 0.0;
            for s in (self.first_step[j]..self.steps).rev() {
                suffix += y[j][s];
                out[s] += suffix;
            }
        }
        out
    }

    pub fn primal_text(&self) -> String {
        let mut out = String::new();
        out.push_str("\\ primal covering program\nMinimize\n obj:");
        let mut first = true;
        for (i, &c) in self.costs.iter().enumerate() {
            for s in 0..self.steps {
                push_term(&mut out, &mut first, c, &format!("x_{i}_{s}"));
            }
        }
        for (j, w) in self.weights.iter().enumerate() {
            for s in self.first_step[j]..self.steps {
                push_term(&mut out, &mut first, w[s], &format!("p_{j}_{s}"));
            }
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (j, sets) in self.request_sets.iter().enumerate() {
            for s in self.first_step[j]..self.steps {
                let _ = write!(out, " cover_{j}_{s}: p_{j}_{s}");
                for &i in sets {
                    for s2 in self.first_step[j]..=s {
                        let _ = write!(out, " + x_{i}_{s2}");
                    }
                }
                out.push_str(" >= 1\n");
            }
        }
        out.push_str("End\n");
        out
    }

    pub fn dual_text(&self) -> String {
        let mut out = String::new();
        out.push_str("\\ dual packing program\nMaximize\n obj:");
        let mut first = true;
        for j in 0..self.request_count() {
            for s in self.first_step[j]..self.steps {
                push_term(&mut out, &mut first, 1.0, &format!("y_{j}_{s}"));
            }
        }
        if first {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (i, &c) in self.costs.iter().enumerate() {
            for s in 0..self.steps {
                let mut terms = Vec::new();
                for j in 0..self.request_count() {
                    if self.request_sets[j].contains(&i) && self.first_step[j] <= s {
                        for s2 in s..self.steps {
                            terms.push(format!("y_{j}_{s2}"));
                        }
                    }
                }
                if terms.is_empty() {
                    continue;
                }
                let _ = writeln!(out, " set_{i}_{s}: {} <= {}", terms.join(" + "), fixed(c));
            }
        }
        out.push_str("Bounds\n");
        for (j, w) in self.weights.iter().enumerate() {
            for s in self.first_step[j]..self.steps {
                let _ = writeln!(out, " 0 <= y_{j}_{s} <= {}", fixed(w[s]));
            }
        }
        out.push_str("End\n");
        out
    }
}

fn fixed(v: f64) -> String {
    format!("{v:.12}")
}

fn push_term(out: &mut String, first: &mut bool, coef: f64, var: &str) {
    if *first {
        let _ = write!(out, " {} {var}", fixed(coef));
        *first = false;
    } else {
        let _ = write!(out, " + {} {var}", fixed(coef));
    }
}

/// Dual values `y[j][s]` from per-step residual delays of a fractional run on the same grid.
pub fn dual_from_residuals(lp: &DiscreteLp, samples: &crate::onf::OnfSamples) -> Vec<Vec<f64>> {
    let mut y = vec![vec![0.0; lp.steps]; lp.request_count()];
    for (s, step) in samples.steps.iter().enumerate().take(lp.steps) {
        for &(j, d) in &step.residuals {
            y[j][s] += d * step.dt;
        }
    }
    y
}
