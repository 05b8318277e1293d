//! Acceptance suite: one PASS/FAIL line per criterion.

use std::sync::Arc;
use std::time::Instant;

use scd_core::adversary::{
    fractional_cost, gen_random, hub_instance, lower_bound_constants, osc_to_scd, parallel_instance,
    unweighted_convert, Eager, Idle, LowerBoundSource, RandomInstanceSpec,
};
use scd_core::counter::Counter;
use scd_core::engine::{run, run_instance, run_observed, OnlineAlgorithm, RequestSource, RunOptions, StaticSource};
use scd_core::model::{DelayFunction, Instance, Request, SetSystem, WeightedSet};
use scd_core::onf::{LinearBuying, Onf};
use scd_core::onr::{OnfTape, Onr};
use scd_core::opt::certify::check_dual_certificate;
use scd_core::opt::{solve_opt, PurchaseSchedule};

/// Step length used unless a criterion pins another one.
const DT: f64 = 1e-3;
/// Relative slack `10 dt` granted to discretized bounds.
fn rel_tol(dt: f64) -> f64 {
    10.0 * dt
}
const ABS_TOL: f64 = 1e-9;
const TANH_DT: f64 = 1e-4;
const TANH_TOL: f64 = 1e-3;
const FIGURE_TOL: f64 = 0.05;
const ONR_TRIALS: u64 = 1000;
/// One-sided 99% normal quantile.
const Z99: f64 = 2.326;
const CONVERGENCE_TOL: f64 = 0.02;

struct Report {
    lines: Vec<(usize, bool, String)>,
}

impl Report {
    fn record(&mut self, id: usize, name: &str, start: Instant, result: Result<String, String>) {
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let line = format!("{} {:>2} {name}: {detail} ({secs:.2}s)", if ok { "PASS" } else { "FAIL" }, id);
        println!("{line}");
        self.lines.push((id, ok, line));
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// 50 random instances with at most 12 elements and 10 sets; every one is small
/// enough for the exact optimum.
fn random_suite() -> Vec<Instance> {
    (0..50u64)
        .map(|i| {
            let spec = RandomInstanceSpec {
                elements: 4 + (i as usize % 9),
                sets: 2 + (i as usize * 7 % 9),
                max_membership: 1 + (i as usize % 4),
                requests: 4 + (i as usize * 5 % 9),
                seed: 1000 + i,
                ..RandomInstanceSpec::default()
            };
            gen_random(&spec).expect("suite spec is valid")
        })
        .collect()
}

/// Five fixed instances with at most 9 elements.
fn fixed_suite() -> Vec<Instance> {
    (0..5u64)
        .map(|i| {
            let spec = RandomInstanceSpec {
                elements: 5 + i as usize,
                sets: 4 + i as usize,
                max_membership: 3,
                requests: 6 + i as usize,
                seed: 77 + i,
                ..RandomInstanceSpec::default()
            };
            gen_random(&spec).expect("suite spec is valid")
        })
        .collect()
}

fn log_k(inst: &Instance) -> f64 {
    (1.0 + inst.system.max_membership() as f64).ln()
}

fn tanh_oracle() -> Result<String, String> {
    let sys = SetSystem::new(vec![WeightedSet::new(1.0, vec![0])]).unwrap();
    let inst = Instance::new(sys, vec![Request::new(0, 0, 0.0, DelayFunction::constant(1.0))], 2.0).unwrap();
    let mut gamma_at_one = None;
    run_observed(&mut StaticSource::new(&inst), &mut Onf::new(), &RunOptions::new(TANH_DT, 0), &mut |s| {
        if gamma_at_one.is_none() && s.time + s.dt >= 1.0 - 1e-12 {
            gamma_at_one = Some(s.coverage[0]);
        }
    })
    .map_err(|e| e.to_string())?;
    let g = gamma_at_one.ok_or("never reached t = 1")?;
    let exact = (2f64.ln()).tanh();
    check((g - 0.6).abs() <= TANH_TOL, || format!("gamma(1) = {g}"))?;
    Ok(format!("gamma(1) = {g:.6}, tanh(ln 2) = {exact}"))
}

/// The adaptive lower-bound run of ONF at each depth, returning the realized
/// instance, its trace and the recorded samples.
fn onf_on_lower_bound(depth: usize) -> (Instance, scd_core::engine::Trace, scd_core::onf::OnfSamples) {
    let mut src = LowerBoundSource::new(depth, false).unwrap();
    let mut onf = Onf::new().recording();
    let tr = run(&mut src, &mut onf, &RunOptions::new(DT, 0)).unwrap();
    (src.realized(), tr, onf.take_samples())
}

fn buying_vs_delay(suite: &[Instance]) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    let mut check_one = |label: String, inst: &Instance, buy: f64, delay: f64| -> Result<(), String> {
        let bound = 2.0 * log_k(inst) * delay;
        if bound > 0.0 {
            worst = worst.max(buy / bound);
        }
        check(buy <= bound * (1.0 + rel_tol(DT)) + ABS_TOL, || format!("{label}: buy {buy} > {bound}"))
    };
    for (i, inst) in suite.iter().enumerate() {
        let tr = run_instance(inst, &mut Onf::new(), &RunOptions::new(DT, 0)).map_err(|e| e.to_string())?;
        check_one(format!("random {i}"), inst, tr.cost_buy, tr.cost_delay)?;
    }
    for depth in 0..=4 {
        let (inst, tr, _) = onf_on_lower_bound(depth);
        check_one(format!("depth {depth}"), &inst, tr.cost_buy, tr.cost_delay)?;
    }
    Ok(format!("worst buy / (2 ln(1+k) delay) = {worst:.4} over 55 instances"))
}

fn dual_certificates(suite: &[Instance]) -> Result<String, String> {
    let mut worst_slack = f64::INFINITY;
    let mut compared = 0;
    let mut check_one = |label: String, inst: &Instance, samples: &scd_core::onf::OnfSamples| -> Result<(), String> {
        let rep = check_dual_certificate(inst, samples, DT).map_err(|e| e.to_string())?;
        worst_slack = worst_slack.min(rep.set_slack);
        check(rep.set_slack >= -rel_tol(DT) - ABS_TOL, || format!("{label}: set slack {}", rep.set_slack))?;
        check(rep.delay_slack >= -ABS_TOL, || format!("{label}: delay slack {}", rep.delay_slack))?;
        match solve_opt(inst) {
            Ok(opt) => {
                compared += 1;
                check(rep.lower_bound <= opt.cost * (1.0 + ABS_TOL) + ABS_TOL, || {
                    format!("{label}: certified {} above opt {}", rep.lower_bound, opt.cost)
                })
            }
            Err(scd_core::Error::Guard(_)) => Ok(()),
            Err(e) => Err(e.to_string()),
        }
    };
    for (i, inst) in suite.iter().enumerate() {
        let mut onf = Onf::new().recording();
        run_instance(inst, &mut onf, &RunOptions::new(DT, 0)).map_err(|e| e.to_string())?;
        check_one(format!("random {i}"), inst, onf.samples())?;
    }
    for depth in 0..=4 {
        let (inst, _, samples) = onf_on_lower_bound(depth);
        check_one(format!("depth {depth}"), &inst, &samples)?;
    }
    Ok(format!("worst relative set slack {worst_slack:.3e}; lower bound below opt on {compared} instances"))
}

fn competitive_bound(suite: &[Instance]) -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for (i, inst) in suite.iter().take(30).enumerate() {
        let opt = solve_opt(inst).map_err(|e| e.to_string())?.cost;
        let tr = run_instance(inst, &mut Onf::new(), &RunOptions::new(DT, 0)).map_err(|e| e.to_string())?;
        let bound = (2.0 * log_k(inst) + 1.0) * opt;
        worst = worst.max(tr.total() / bound);
        check(tr.total() <= bound * (1.0 + rel_tol(DT)) + ABS_TOL, || {
            format!("random {i}: total {} > {bound}", tr.total())
        })?;
    }
    Ok(format!("worst total / ((2 ln(1+k)+1) opt) = {worst:.4} over 30 instances"))
}

fn hub_pathology() -> Result<String, String> {
    let k = 8;
    let inst = hub_instance(k, 4.0).map_err(|e| e.to_string())?;
    let dt = 1e-4;
    let mut at_half = None;
    run_observed(&mut StaticSource::new(&inst), &mut LinearBuying, &RunOptions::new(dt, 0), &mut |s| {
        if at_half.is_none() && s.coverage.iter().all(|&g| g >= 0.5) {
            at_half = Some(s.bought.iter().sum::<f64>());
        }
    })
    .map_err(|e| e.to_string())?;
    let bought = at_half.ok_or("coverage never reached 1/2")?;
    let target = k as f64 / 4.0;
    check((bought - target).abs() <= FIGURE_TOL * target, || format!("bought {bought}, expected {target}"))?;

    let central = PurchaseSchedule::new(vec![(0.0, 0)]).evaluate(&inst, None).map_err(|e| e.to_string())?;
    let idle_delay: f64 = inst.requests.iter().map(|r| r.delay.integral(0.0, inst.horizon)).sum();
    let opt_lower = inst.system.sets().iter().map(|s| s.cost).fold(f64::INFINITY, f64::min).min(idle_delay);
    check(central.total() == 1.0 && opt_lower == 1.0, || {
        format!("central schedule {} vs lower bound {opt_lower}", central.total())
    })?;
    Ok(format!("bought {bought:.4} of unit sets at half coverage (k/4 = {target}); opt = 1"))
}

fn upper_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, mean + Z99 * (var / n).sqrt())
}

fn onr_bounds() -> Result<String, String> {
    let mut worst_element: f64 = 0.0;
    let mut worst_request: f64 = 0.0;
    for (i, inst) in fixed_suite().iter().enumerate() {
        let dt = DT;
        let tape = Arc::new(OnfTape::record(inst, dt).map_err(|e| e.to_string())?);
        let onf = tape.cost();
        let n = inst.system.element_count() as f64;
        let big_n = inst.requests.len() as f64;
        for element_variant in [true, false] {
            let mut totals = Vec::with_capacity(ONR_TRIALS as usize);
            for seed in 0..ONR_TRIALS {
                let mut onr = if element_variant {
                    Onr::element_variant()
                } else {
                    Onr::request_variant(inst.requests.len())
                }
                .with_tape(tape.clone());
                let tr = run_instance(inst, &mut onr, &RunOptions::new(dt, seed)).map_err(|e| e.to_string())?;
                let stats = onr.stats();
                let cap = if element_variant { 0.75 } else { 0.5 };
                check(stats.invariant_violations == 0 && stats.max_pending_coverage <= cap + ABS_TOL, || {
                    format!(
                        "instance {i} seed {seed}: pending coverage {} above {cap}",
                        stats.max_pending_coverage
                    )
                })?;
                totals.push(tr.total());
            }
            let (mean, upper) = upper_ci(&totals);
            let bound = if element_variant {
                (4.0 * n.ln() + 8.0) * onf
            } else {
                (4.0 * big_n.ln() + 4.0) * onf
            };
            let label = if element_variant { "element" } else { "request" };
            check(upper <= bound, || {
                format!("instance {i} {label}: mean {mean}, 99% upper {upper} > {bound}")
            })?;
            if element_variant {
                worst_element = worst_element.max(upper / bound);
            } else {
                worst_request = worst_request.max(upper / bound);
            }
        }
    }
    Ok(format!(
        "99% upper mean / bound: element {worst_element:.3}, request {worst_request:.3}; coverage caps held"
    ))
}

fn counter_checks(suite: &[Instance]) -> Result<String, String> {
    let sys = SetSystem::new(vec![WeightedSet::new(1.0, vec![0])]).unwrap();
    let tcp = Instance::new(sys, vec![Request::new(0, 0, 0.0, DelayFunction::constant(1.0))], 4.0).unwrap();
    let tr = run_instance(&tcp, &mut Counter::new(), &RunOptions::new(DT, 0)).map_err(|e| e.to_string())?;
    check((tr.total() - 2.0).abs() <= 10.0 * DT, || format!("tcp total {}", tr.total()))?;
    for k in [2, 3, 5] {
        let inst = parallel_instance(k, 4.0).map_err(|e| e.to_string())?;
        let tr = run_instance(&inst, &mut Counter::new(), &RunOptions::new(DT, 0)).map_err(|e| e.to_string())?;
        let opt = solve_opt(&inst).map_err(|e| e.to_string())?.cost;
        let ratio = tr.total() / opt;
        check((ratio - (k as f64 + 1.0)).abs() <= ABS_TOL, || format!("k = {k}: ratio {ratio}"))?;
    }
    let mut worst: f64 = 0.0;
    for (i, inst) in suite.iter().enumerate() {
        let opt = solve_opt(inst).map_err(|e| e.to_string())?.cost;
        let tr = run_instance(inst, &mut Counter::new(), &RunOptions::new(DT, 0)).map_err(|e| e.to_string())?;
        let k = inst.system.max_membership() as f64;
        let bound = (k + 1.0) * opt;
        worst = worst.max(tr.total() / bound);
        check(tr.total() <= bound * (1.0 + rel_tol(DT)) + ABS_TOL, || {
            format!("random {i}: total {} > (k+1) opt {bound}", tr.total())
        })?;
    }
    Ok(format!("tcp total {:.4}; tight ratios k+1 for k = 2,3,5; worst total/((k+1) opt) = {worst:.4}", tr.total()))
}

fn lower_bound_family() -> Result<String, String> {
    let mut details = Vec::new();
    for depth in 0..=5 {
        let c = lower_bound_constants(depth)[depth];
        let stubs: [Box<dyn OnlineAlgorithm>; 2] = [Box::new(Idle), Box::<Eager>::default()];
        for mut stub in stubs {
            let mut src = LowerBoundSource::new(depth, false).unwrap();
            run(&mut src, stub.as_mut(), &RunOptions::new(0.5, 0)).map_err(|e| e.to_string())?;
            let inst = src.realized();
            let cost = src
                .reference_schedule()
                .and_then(|s| s.evaluate(&inst, None))
                .map_err(|e| e.to_string())?;
            check(cost.delay == 0.0 && (cost.buy - c.reference_cost).abs() <= ABS_TOL * c.reference_cost, || {
                format!("depth {depth} against {}: reference {cost:?}", stub.name())
            })?;
        }
        let algos: [Box<dyn OnlineAlgorithm>; 2] = [Box::new(Onf::new()), Box::new(Counter::new())];
        for mut algo in algos {
            let mut src = LowerBoundSource::new(depth, false).unwrap();
            let tr = run(&mut src, algo.as_mut(), &RunOptions::new(DT, 0)).map_err(|e| e.to_string())?;
            let ratio = tr.total() / c.reference_cost;
            check(ratio >= c.ratio * (1.0 - rel_tol(DT)), || {
                format!("depth {depth} {}: ratio {ratio} below {}", algo.name(), c.ratio)
            })?;
            if depth == 5 {
                details.push(format!("{} {ratio:.3}", algo.name()));
            }
        }
    }
    Ok(format!(
        "reference cost exact for depths 0..5 under both branch outcomes; depth 5 ratios {} vs c_5 = {:.4}",
        details.join(", "),
        lower_bound_constants(5)[5].ratio
    ))
}

fn unweighted_reduction(suite: &[Instance]) -> Result<String, String> {
    use rand::{Rng, SeedableRng};
    let dt = 1e-2;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for (i, inst) in suite.iter().take(10).enumerate() {
        let conv = unweighted_convert(inst).map_err(|e| e.to_string())?;
        let n = inst.system.element_count();
        let total_cost: f64 = conv.rounded.system.sets().iter().map(|s| s.cost).sum();
        check(
            conv.converted.system.element_count() == conv.copies * n
                && conv.converted.system.set_count() as f64 == total_cost
                && conv.converted.requests.len() == conv.copies * inst.requests.len(),
            || format!("instance {i}: converted sizes do not match"),
        )?;
        let m = conv.converted.system.set_count();
        let steps = (conv.converted.horizon / dt - 1e-9).ceil() as usize;
        let mut schedules = vec![vec![vec![0.0; steps]; m]];
        run_observed(&mut StaticSource::new(&conv.converted), &mut Onf::new(), &RunOptions::new(dt, 0), &mut |s| {
            let idx = (s.time / dt).round() as usize;
            if idx < steps {
                for (set, &x) in s.rates.iter().enumerate() {
                    schedules[0][set][idx] = x * s.dt;
                }
            }
        })
        .map_err(|e| e.to_string())?;
        schedules.push(
            (0..m)
                .map(|_| (0..steps).map(|_| if rng.gen_bool(0.05) { rng.gen_range(0.0..0.2) } else { 0.0 }).collect())
                .collect(),
        );
        for sched in &schedules {
            let converted = fractional_cost(&conv.converted, dt, sched).map_err(|e| e.to_string())?;
            let back = fractional_cost(&conv.rounded, dt, &conv.average_back(sched)).map_err(|e| e.to_string())?;
            worst = worst.max(back.total() / converted.total());
            check(back.total() <= converted.total() * (1.0 + 1e-12) + ABS_TOL, || {
                format!("instance {i}: averaged {} > converted {}", back.total(), converted.total())
            })?;
        }
    }
    Ok(format!("worst averaged / converted cost = {worst:.4} over 20 schedules; sizes match"))
}

fn osc_reduction() -> Result<String, String> {
    use rand::{Rng, SeedableRng};
    let mut checked = 0;
    for seed in 0..1000u64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let spec = RandomInstanceSpec {
            elements: rng.gen_range(2..=8),
            sets: rng.gen_range(1..=6),
            max_membership: rng.gen_range(1..=3),
            requests: 0,
            seed,
            ..RandomInstanceSpec::default()
        };
        let universe = gen_random(&spec).map_err(|e| e.to_string())?;
        let len = rng.gen_range(1..=10);
        let stream: Vec<usize> = (0..len).map(|_| rng.gen_range(0..spec.elements)).collect();
        let mut algo: Box<dyn OnlineAlgorithm> = if seed % 2 == 0 {
            Box::new(Onr::element_variant())
        } else {
            Box::new(Counter::new())
        };
        let rep = osc_to_scd(&universe.system, &stream, algo.as_mut(), &RunOptions::new(0.25, seed))
            .map_err(|e| e.to_string())?;
        check(rep.feasible(), || format!("seed {seed}: uncovered arrivals {:?}", rep.uncovered))?;
        check(rep.cover_cost <= rep.run_cost + ABS_TOL, || {
            format!("seed {seed}: cover {} above run {}", rep.cover_cost, rep.run_cost)
        })?;
        checked += 1;
    }
    Ok(format!("{checked} streams: covers feasible at every arrival and no dearer than the runs"))
}

fn determinism_and_convergence() -> Result<String, String> {
    let suite = fixed_suite();
    for inst in &suite {
        for seed in [0, 5] {
            let a = run_instance(inst, &mut Onr::element_variant(), &RunOptions::new(DT, seed).full())
                .map_err(|e| e.to_string())?;
            let b = run_instance(inst, &mut Onr::element_variant(), &RunOptions::new(DT, seed).full())
                .map_err(|e| e.to_string())?;
            check(a.to_json() == b.to_json(), || format!("seed {seed}: rounding traces differ"))?;
        }
        let a = run_instance(inst, &mut Onf::new(), &RunOptions::new(DT, 0).full()).map_err(|e| e.to_string())?;
        let b = run_instance(inst, &mut Onf::new(), &RunOptions::new(DT, 0).full()).map_err(|e| e.to_string())?;
        check(a.to_json() == b.to_json(), || "fractional traces differ".to_string())?;
    }
    let mut worst: f64 = 0.0;
    for (i, inst) in suite.iter().enumerate() {
        let coarse = run_instance(inst, &mut Onf::new(), &RunOptions::new(DT, 0)).map_err(|e| e.to_string())?;
        let fine = run_instance(inst, &mut Onf::new(), &RunOptions::new(DT / 2.0, 0)).map_err(|e| e.to_string())?;
        let change = (coarse.total() - fine.total()).abs() / fine.total();
        worst = worst.max(change);
        check(change <= CONVERGENCE_TOL, || format!("instance {i}: halving dt changed cost by {change}"))?;
    }
    Ok(format!("bit-identical reruns; worst relative change when halving dt {worst:.2e}"))
}

#[test]
fn acceptance() {
    let suite = random_suite();
    let mut report = Report { lines: Vec::new() };

    let t = Instant::now();
    report.record(1, "closed-form fractional oracle", t, tanh_oracle());
    let t = Instant::now();
    report.record(2, "buying at most 2 ln(1+k) times delay", t, buying_vs_delay(&suite));
    let t = Instant::now();
    report.record(3, "dual certificate", t, dual_certificates(&suite));
    let t = Instant::now();
    report.record(4, "fractional competitive bound", t, competitive_bound(&suite));
    let t = Instant::now();
    report.record(5, "hub pathology of linear buying", t, hub_pathology());
    let t = Instant::now();
    report.record(6, "rounding statistical bounds", t, onr_bounds());
    let t = Instant::now();
    report.record(7, "counter algorithm", t, counter_checks(&suite));
    let t = Instant::now();
    report.record(8, "lower-bound family", t, lower_bound_family());
    let t = Instant::now();
    report.record(9, "unweighted conversion", t, unweighted_reduction(&suite));
    let t = Instant::now();
    report.record(10, "online set cover reduction", t, osc_reduction());
    let t = Instant::now();
    report.record(11, "determinism and convergence", t, determinism_and_convergence());

    let failed: Vec<&str> = report.lines.iter().filter(|l| !l.1).map(|l| l.2.as_str()).collect();
    println!("{} of {} criteria passed", report.lines.len() - failed.len(), report.lines.len());
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
