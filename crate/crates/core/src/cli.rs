//! Command-line harness behind the `scd` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{
    gen_random, hub_instance, lower_bound_constants, unweighted_convert, BranchOutcome, LowerBoundSource,
    RandomInstanceSpec,
};
use crate::engine::{
    cost_ratio, run_observed, OnlineAlgorithm, RequestSource, RunOptions, StaticSource, StepInfo, Trace,
};
use crate::error::{Error, Result};
use crate::model::{default_dt, instance_to_json, load_instance, Instance, InstanceFile};
use crate::onf::{Onf, OnfSamples};
use crate::onr::{OnfTape, Onr};
use crate::opt::certify::{check_charging, check_counter, check_dual_certificate};
use crate::opt::lp::DiscreteLp;
use crate::opt::solve_opt;
use crate::algorithm_by_name;

/// Revision tag embedded in every run record.
pub const REVISION: &str = "scd-1";

#[derive(Debug, Parser)]
#[command(name = "scd", version, about = "Simulate online set cover with delay")]
pub struct Cli {
    /// Step length of the simulation grid.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Relative tolerance for certificate checks (default 10 dt).
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm and write a run record.
    Run(RunArgs),
    /// Generate an instance file.
    Gen(GenArgs),
    /// Sweep instances and algorithms into a CSV table.
    Bench(BenchArgs),
    /// Check the certificates stored in a run record.
    Verify(VerifyArgs),
    /// Write the discretized LP of an instance.
    ExportLp(ExportLpArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Onf,
    OnrRequest,
    OnrElement,
    Counter,
    LinearBuyingTest,
    Opt,
    Idle,
    Eager,
}

impl Algo {
    fn id(self) -> &'static str {
        match self {
            Algo::Onf => "onf",
            Algo::OnrRequest => "onr-request",
            Algo::OnrElement => "onr-element",
            Algo::Counter => "counter",
            Algo::LinearBuyingTest => "linear-buying-test",
            Algo::Opt => "opt",
            Algo::Idle => "idle",
            Algo::Eager => "eager",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    LowerBound,
    Random,
    Hub,
    Unweighted,
}

#[derive(Clone, Debug, PartialEq, Args, Serialize, Deserialize)]
pub struct GenParams {
    /// Recursion depth of the lower-bound family.
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Lower-bound requests use hard deadlines instead of delay.
    #[arg(long)]
    pub deadline_mode: bool,
    /// Sets per element of the hub instance.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub elements: usize,
    #[arg(long, default_value_t = 4)]
    pub sets: usize,
    #[arg(long, default_value_t = 2)]
    pub max_membership: usize,
    #[arg(long, default_value_t = 6)]
    pub requests: usize,
    #[arg(long, default_value_t = 8.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.25)]
    pub rate_lo: f64,
    #[arg(long, default_value_t = 2.0)]
    pub rate_hi: f64,
    /// Seed of the random generator (defaults to --seed).
    #[arg(long)]
    pub gen_seed: Option<u64>,
    /// Input of the unweighted conversion.
    #[arg(long)]
    pub from: Option<PathBuf>,
}

impl GenParams {
    fn random_spec(&self, seed: u64) -> RandomInstanceSpec {
        RandomInstanceSpec {
            elements: self.elements,
            sets: self.sets,
            max_membership: self.max_membership,
            requests: self.requests,
            rate_range: (self.rate_lo, self.rate_hi),
            horizon: self.horizon,
            seed: self.gen_seed.unwrap_or(seed),
            ..RandomInstanceSpec::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum InstanceSource {
    File { path: PathBuf },
    Generator { kind: GenKind, params: GenParams },
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance: InstanceSource,
    pub algo: Algo,
    pub dt: Option<f64>,
    pub seed: u64,
    pub trials: usize,
    pub declared_n: Option<usize>,
    pub with_opt: bool,
    pub tolerance: Option<f64>,
    pub record_certificate: bool,
    pub full_trace: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    #[arg(long, conflicts_with = "gen")]
    pub instance: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub gen: Option<GenKind>,
    #[command(flatten)]
    pub params: GenParams,
    /// Seeds `seed, seed + 1, ...`; randomized algorithms only.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Request count announced to the request variant of the rounding algorithm.
    #[arg(long)]
    pub declared_n: Option<usize>,
    /// Also solve the offline optimum.
    #[arg(long)]
    pub with_opt: bool,
    /// Keep the per-step samples needed by `verify`.
    #[arg(long)]
    pub record_certificate: bool,
    #[arg(long)]
    pub full_trace: bool,
    /// Write one CSV row per step to this file.
    #[arg(long)]
    pub dump_steps: Option<PathBuf>,
    /// Rerun the configuration stored in a run record.
    #[arg(long, conflicts_with_all = ["algo", "instance", "gen"])]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    #[command(flatten)]
    pub params: GenParams,
    /// Algorithm the adaptive lower bound is realized against.
    #[arg(long, value_enum, default_value = "onf")]
    pub against: Algo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    /// Lower-bound family for depths `0..=max-depth`.
    Depth,
    /// Random instances against the offline optimum.
    Random,
    /// Rounding trials against the fractional cost.
    Onr,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub kind: BenchKind,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["onf", "counter"])]
    pub algos: Vec<Algo>,
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    /// Number of random instances.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, value_enum, default_value = "onr-element")]
    pub variant: Algo,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub params: GenParams,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run record written by `run`.
    pub record: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportLpArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Write the dual program instead of the primal.
    #[arg(long)]
    pub dual: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algo: String,
    pub instance: String,
    pub cost_buy: f64,
    pub cost_delay: f64,
    pub total: f64,
    pub opt: Option<f64>,
    /// `exact` from the solver, `reference` for the lower-bound schedule.
    pub opt_kind: Option<String>,
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    pub cost_buy: f64,
    pub cost_delay: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub revision: String,
    pub config: RunConfig,
    pub instance_digest: String,
    pub summary: SummaryRow,
    pub trials: Vec<TrialRow>,
    pub branches: Vec<BranchOutcome>,
    pub instance: InstanceFile,
    pub trace: Trace,
    pub certificate: Option<OnfSamples>,
}

impl RunRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            location: format!("{}: line {} column {}", path.display(), e.line(), e.column()),
            message: e.to_string(),
        })
    }
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run(args) => cmd_run(cli, args),
        Command::Gen(args) => cmd_gen(cli, args),
        Command::Bench(args) => cmd_bench(cli, args),
        Command::Verify(args) => cmd_verify(cli, args),
        Command::ExportLp(args) => cmd_export_lp(cli, args),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn make_algorithm(algo: Algo, declared_n: usize, tape: Option<Arc<OnfTape>>) -> Result<Box<dyn OnlineAlgorithm>> {
    match (algo, tape) {
        (Algo::OnrRequest, Some(t)) => Ok(Box::new(Onr::request_variant(declared_n).with_tape(t))),
        (Algo::OnrElement, Some(t)) => Ok(Box::new(Onr::element_variant().with_tape(t))),
        (Algo::Opt, _) => Err(Error::Domain("the offline optimum is not an online algorithm".into())),
        _ => algorithm_by_name(algo.id(), declared_n),
    }
}

/// A static instance or the adaptive lower-bound source.
enum Prepared {
    Static { inst: Instance, name: String },
    Adaptive { depth: usize, deadline_mode: bool },
}

fn prepare(source: &InstanceSource, seed: u64) -> Result<Prepared> {
    Ok(match source {
        InstanceSource::File { path } => Prepared::Static {
            inst: load_instance(path)?,
            name: path.file_stem().map_or("instance".into(), |s| s.to_string_lossy().into_owned()),
        },
        InstanceSource::Generator { kind, params } => match kind {
            GenKind::LowerBound => Prepared::Adaptive {
                depth: params.depth,
                deadline_mode: params.deadline_mode,
            },
            GenKind::Random => {
                let spec = params.random_spec(seed);
                Prepared::Static {
                    name: format!("random-{}", spec.seed),
                    inst: gen_random(&spec)?,
                }
            }
            GenKind::Hub => Prepared::Static {
                inst: hub_instance(params.k, params.horizon)?,
                name: format!("hub-{}", params.k),
            },
            GenKind::Unweighted => {
                let from = params
                    .from
                    .as_ref()
                    .ok_or_else(|| Error::Domain("the unweighted generator needs --from".into()))?;
                Prepared::Static {
                    inst: unweighted_convert(&load_instance(from)?)?.converted,
                    name: format!(
                        "unweighted-{}",
                        from.file_stem().map_or("instance".into(), |s| s.to_string_lossy().into_owned())
                    ),
                }
            }
        },
    })
}

struct Outcome {
    trace: Trace,
    instance: Instance,
    branches: Vec<BranchOutcome>,
    reference: Option<f64>,
    certificate: Option<OnfSamples>,
}

fn single_run(
    prepared: &Prepared,
    algo: &mut dyn OnlineAlgorithm,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&StepInfo),
) -> Result<Outcome> {
    match prepared {
        Prepared::Static { inst, .. } => {
            let trace = run_observed(&mut StaticSource::new(inst), algo, opts, observer)?;
            Ok(Outcome {
                trace,
                instance: inst.clone(),
                branches: Vec::new(),
                reference: None,
                certificate: None,
            })
        }
        Prepared::Adaptive { depth, deadline_mode } => {
            let mut src = LowerBoundSource::new(*depth, *deadline_mode)?;
            let trace = run_observed(&mut src, algo, opts, observer)?;
            let instance = src.realized();
            let reference = src.reference_schedule()?.evaluate(&instance, opts.deadline_penalty)?.total();
            Ok(Outcome {
                trace,
                instance,
                branches: src.outcomes(),
                reference: Some(reference),
                certificate: None,
            })
        }
    }
}

fn step_dt(cli_dt: Option<f64>, prepared: &Prepared) -> f64 {
    cli_dt.unwrap_or_else(|| match prepared {
        Prepared::Static { inst, .. } => default_dt(inst),
        Prepared::Adaptive { .. } => 1e-3,
    })
}

/// Execute a run configuration.
pub fn run_config(config: &RunConfig, dump_steps: Option<&Path>) -> Result<RunRecord> {
    let prepared = prepare(&config.instance, config.seed)?;
    let dt = step_dt(config.dt, &prepared);
    let instance_name = match &prepared {
        Prepared::Static { name, .. } => name.clone(),
        Prepared::Adaptive { depth, .. } => format!("lower-bound-{depth}"),
    };
    let mut opts = RunOptions::new(dt, config.seed);
    if config.full_trace {
        opts = opts.full();
    }
    if config.trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }

    let mut trials = Vec::new();
    let mut outcome = if config.algo == Algo::Opt {
        let Prepared::Static { inst, .. } = &prepared else {
            return Err(Error::Domain("the offline optimum needs a static instance".into()));
        };
        let sol = solve_opt(inst)?;
        Outcome {
            trace: sol.schedule.to_trace(inst, "opt")?,
            instance: inst.clone(),
            branches: Vec::new(),
            reference: None,
            certificate: None,
        }
    } else {
        let declared_n = match (&prepared, config.declared_n) {
            (_, Some(n)) => n,
            (Prepared::Static { inst, .. }, None) => inst.requests.len(),
            (Prepared::Adaptive { .. }, None) if config.algo == Algo::OnrRequest => {
                return Err(Error::Domain("adaptive runs of the request variant need --declared-n".into()))
            }
            _ => 0,
        };
        let randomized = matches!(config.algo, Algo::OnrRequest | Algo::OnrElement);
        if config.trials > 1 && !randomized {
            return Err(Error::Domain(format!("{} is deterministic; use a single trial", config.algo.id())));
        }
        let tape = match &prepared {
            Prepared::Static { inst, .. }
                if randomized
                    && config.trials > 1
                    && inst.requests.iter().all(|r| r.delay.hard_deadline().is_none()) =>
            {
                Some(Arc::new(OnfTape::record(inst, dt)?))
            }
            _ => None,
        };

        let mut rows = Vec::new();
        let mut first = {
            let mut out = dump_steps.map(|_| Vec::<StepRow>::new());
            let mut observer = |s: &StepInfo| {
                if let Some(rows) = out.as_mut() {
                    rows.push(StepRow::from_step(s));
                }
            };
            let outcome = if config.record_certificate && config.algo == Algo::Onf {
                let mut onf = Onf::new().recording();
                let mut o = single_run(&prepared, &mut onf, &opts, &mut observer)?;
                o.certificate = Some(onf.take_samples());
                o
            } else {
                let mut algo = make_algorithm(config.algo, declared_n, tape.clone())?;
                single_run(&prepared, algo.as_mut(), &opts, &mut observer)?
            };
            if let Some(path) = dump_steps {
                write_step_rows(path, out.as_deref().unwrap_or_default())?;
            }
            outcome
        };
        rows.push(TrialRow::from_trace(config.seed, &first.trace));
        let more: Vec<Result<TrialRow>> = (1..config.trials as u64)
            .into_par_iter()
            .map(|i| {
                let seed = config.seed.wrapping_add(i);
                let mut algo = make_algorithm(config.algo, declared_n, tape.clone())?;
                let o = single_run(&prepared, algo.as_mut(), &RunOptions { seed, ..opts.clone() }, &mut |_| {})?;
                Ok(TrialRow::from_trace(seed, &o.trace))
            })
            .collect();
        for r in more {
            rows.push(r?);
        }
        trials = rows;
        first.trace.algorithm = config.algo.id().to_string();
        first
    };

    let (opt, opt_kind) = if config.with_opt {
        (Some(solve_opt(&outcome.instance)?.cost), Some("exact".to_string()))
    } else if let Some(r) = outcome.reference {
        (Some(r), Some("reference".to_string()))
    } else {
        (None, None)
    };
    let trace = &outcome.trace;
    let summary = SummaryRow {
        algo: config.algo.id().to_string(),
        instance: instance_name,
        cost_buy: trace.cost_buy,
        cost_delay: trace.cost_delay,
        total: trace.total(),
        opt,
        opt_kind,
        ratio: opt.map(|o| cost_ratio(trace.total(), o)),
    };
    if trials.is_empty() {
        trials.push(TrialRow::from_trace(config.seed, trace));
    }
    Ok(RunRecord {
        revision: REVISION.to_string(),
        config: config.clone(),
        instance_digest: outcome.instance.digest(),
        summary,
        trials,
        branches: std::mem::take(&mut outcome.branches),
        instance: InstanceFile::from_instance(&outcome.instance),
        trace: outcome.trace,
        certificate: outcome.certificate,
    })
}

impl TrialRow {
    fn from_trace(seed: u64, t: &Trace) -> Self {
        TrialRow {
            seed,
            cost_buy: t.cost_buy,
            cost_delay: t.cost_delay,
            total: t.total(),
        }
    }
}

#[derive(Debug, Serialize)]
struct StepRow {
    time: f64,
    dt: f64,
    pending: usize,
    rate_sum: f64,
    bought_now: usize,
    min_pending_coverage: Option<f64>,
}

impl StepRow {
    fn from_step(s: &StepInfo) -> Self {
        StepRow {
            time: s.time,
            dt: s.dt,
            pending: s.pending.len(),
            rate_sum: s.rates.iter().sum(),
            bought_now: s.bought_now.len(),
            min_pending_coverage: s.pending.iter().map(|&j| s.coverage[j]).min_by(f64::total_cmp),
        }
    }
}

fn write_step_rows(path: &Path, rows: &[StepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["algo", "instance", "cost_buy", "cost_delay", "total", "opt", "ratio"])
        .map_err(csv_error)?;
    for r in rows {
        let opt = r.opt.map(|v| v.to_string()).unwrap_or_default();
        let ratio = r.ratio.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            r.algo.clone(),
            r.instance.clone(),
            r.cost_buy.to_string(),
            r.cost_delay.to_string(),
            r.total.to_string(),
            opt,
            ratio,
        ])
        .map_err(csv_error)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?)
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> Result<i32> {
    let config = if let Some(path) = &args.replay {
        RunRecord::load(path)?.config
    } else {
        let instance = match (&args.instance, args.gen) {
            (Some(path), _) => InstanceSource::File { path: path.clone() },
            (None, Some(kind)) => InstanceSource::Generator {
                kind,
                params: args.params.clone(),
            },
            (None, None) => return Err(Error::Domain("give --instance or --gen".into())),
        };
        RunConfig {
            instance,
            algo: args
                .algo
                .ok_or_else(|| Error::Domain("--algo is required".into()))?,
            dt: cli.dt,
            seed: cli.seed,
            trials: args.trials,
            declared_n: args.declared_n,
            with_opt: args.with_opt,
            tolerance: cli.tolerance,
            record_certificate: args.record_certificate,
            full_trace: args.full_trace,
        }
    };
    let record = run_config(&config, args.dump_steps.as_deref())?;
    let text = serde_json::to_string_pretty(&record).expect("run records serialize");
    if let Some(path) = &cli.out {
        fs::write(path, text + "\n")?;
    }
    print!("{}", summary_csv(std::slice::from_ref(&record.summary))?);
    if record.trials.len() > 1 {
        let (mean, lo, hi) = mean_ci(&record.trials.iter().map(|t| t.total).collect::<Vec<_>>());
        println!("# trials={} mean_total={mean} ci95=[{lo}, {hi}]", record.trials.len());
    }
    Ok(0)
}

/// Mean with a normal-approximation 95% confidence interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let half = 1.96 * (var / n).sqrt();
    (mean, mean - half, mean + half)
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<i32> {
    let inst = match args.kind {
        GenKind::LowerBound => {
            let mut src = LowerBoundSource::new(args.params.depth, args.params.deadline_mode)?;
            let mut algo = make_algorithm(args.against, 0, None)?;
            let dt = cli.dt.unwrap_or(1e-3);
            run_observed(&mut src, algo.as_mut(), &RunOptions::new(dt, cli.seed), &mut |_| {})?;
            for o in src.outcomes() {
                eprintln!(
                    "depth {} at t={}: spend {} vs threshold {} -> {:?}",
                    o.depth, o.start, o.spend, o.threshold, o.branch
                );
            }
            src.realized()
        }
        kind => match prepare(
            &InstanceSource::Generator {
                kind,
                params: args.params.clone(),
            },
            cli.seed,
        )? {
            Prepared::Static { inst, .. } => inst,
            Prepared::Adaptive { .. } => unreachable!("only the lower bound is adaptive"),
        },
    };
    emit(cli.out.as_deref(), &(instance_to_json(&inst) + "\n"))?;
    Ok(0)
}

#[derive(Clone, Debug, Serialize)]
struct BenchRow {
    kind: String,
    instance: String,
    algo: String,
    seed: String,
    dt: f64,
    cost_buy: Option<f64>,
    cost_delay: Option<f64>,
    total: Option<f64>,
    opt: Option<f64>,
    ratio: Option<f64>,
    ratio_ci_low: Option<f64>,
    ratio_ci_high: Option<f64>,
    status: String,
}

impl BenchRow {
    fn new(kind: &str, instance: &str, algo: &str, seed: String, dt: f64) -> Self {
        BenchRow {
            kind: kind.to_string(),
            instance: instance.to_string(),
            algo: algo.to_string(),
            seed,
            dt,
            cost_buy: None,
            cost_delay: None,
            total: None,
            opt: None,
            ratio: None,
            ratio_ci_low: None,
            ratio_ci_high: None,
            status: "ok".to_string(),
        }
    }

    fn fill(mut self, result: Result<(Trace, Option<f64>)>) -> Self {
        match result {
            Ok((t, opt)) => {
                self.cost_buy = Some(t.cost_buy);
                self.cost_delay = Some(t.cost_delay);
                self.total = Some(t.total());
                self.opt = opt;
                self.ratio = opt.map(|o| cost_ratio(t.total(), o));
            }
            Err(Error::Guard(m)) => self.status = format!("guard: {m}"),
            Err(e) => self.status = format!("error: {e}"),
        }
        self
    }
}

/// Append one aggregate row per algorithm with the mean ratio and its interval.
fn aggregate(rows: &mut Vec<BenchRow>, kind: &str, dt: f64) {
    let mut algos: Vec<String> = Vec::new();
    for r in rows.iter() {
        if !algos.contains(&r.algo) {
            algos.push(r.algo.clone());
        }
    }
    for algo in algos {
        let ratios: Vec<f64> = rows
            .iter()
            .filter(|r| r.algo == algo)
            .filter_map(|r| r.ratio)
            .filter(|r| r.is_finite())
            .collect();
        if ratios.is_empty() {
            continue;
        }
        let (mean, lo, hi) = mean_ci(&ratios);
        let mut row = BenchRow::new(kind, "all", &algo, "mean".into(), dt);
        row.ratio = Some(mean);
        row.ratio_ci_low = Some(lo);
        row.ratio_ci_high = Some(hi);
        rows.push(row);
    }
}

fn run_static(inst: &Instance, algo: Algo, seed: u64, dt: f64) -> Result<Trace> {
    let mut a = make_algorithm(algo, inst.requests.len(), None)?;
    run_observed(&mut StaticSource::new(inst), a.as_mut(), &RunOptions::new(dt, seed), &mut |_| {})
}

pub fn bench_rows(cli: &Cli, args: &BenchArgs) -> Result<String> {
    let seed = cli.seed;
    let mut rows: Vec<BenchRow>;
    let kind_name = match args.kind {
        BenchKind::Depth => "depth",
        BenchKind::Random => "random",
        BenchKind::Onr => "onr",
    };
    let mut dt_used = cli.dt.unwrap_or(1e-3);
    match args.kind {
        BenchKind::Depth => {
            let cells: Vec<(usize, Algo)> = (0..=args.max_depth)
                .flat_map(|d| args.algos.iter().map(move |&a| (d, a)))
                .collect();
            rows = cells
                .par_iter()
                .map(|&(depth, algo)| {
                    let row = BenchRow::new(kind_name, &format!("lower-bound-{depth}"), algo.id(), seed.to_string(), dt_used);
                    row.fill((|| {
                        let prepared = Prepared::Adaptive {
                            depth,
                            deadline_mode: args.params.deadline_mode,
                        };
                        let mut a = make_algorithm(algo, 0, None)?;
                        let o = single_run(&prepared, a.as_mut(), &RunOptions::new(dt_used, seed), &mut |_| {})?;
                        let reference = lower_bound_constants(depth)[depth].reference_cost;
                        Ok((o.trace, Some(reference)))
                    })())
                })
                .collect();
        }
        BenchKind::Random => {
            let cells: Vec<(u64, Algo)> = (0..args.count as u64)
                .flat_map(|i| args.algos.iter().map(move |&a| (seed + i, a)))
                .collect();
            rows = cells
                .par_iter()
                .map(|&(s, algo)| {
                    let spec = RandomInstanceSpec {
                        seed: s,
                        ..args.params.random_spec(s)
                    };
                    let dt = cli.dt.unwrap_or(1e-3);
                    let row = BenchRow::new(kind_name, &format!("random-{s}"), algo.id(), s.to_string(), dt);
                    row.fill((|| {
                        let inst = gen_random(&spec)?;
                        let opt = solve_opt(&inst)?;
                        let trace = if algo == Algo::Opt {
                            opt.schedule.to_trace(&inst, "opt")?
                        } else {
                            run_static(&inst, algo, s, dt)?
                        };
                        Ok((trace, Some(opt.cost)))
                    })())
                })
                .collect();
        }
        BenchKind::Onr => {
            if !matches!(args.variant, Algo::OnrElement | Algo::OnrRequest) {
                return Err(Error::Domain("--variant must be onr-element or onr-request".into()));
            }
            let (inst, name) = match &args.instance {
                Some(p) => (
                    load_instance(p)?,
                    p.file_stem().map_or("instance".into(), |s| s.to_string_lossy().into_owned()),
                ),
                None => {
                    let spec = args.params.random_spec(seed);
                    (gen_random(&spec)?, format!("random-{}", spec.seed))
                }
            };
            let dt = cli.dt.unwrap_or_else(|| default_dt(&inst));
            dt_used = dt;
            let tape = Arc::new(OnfTape::record(&inst, dt)?);
            let onf_cost = tape.cost();
            rows = (0..args.trials as u64)
                .into_par_iter()
                .map(|i| {
                    let s = seed + i;
                    let row = BenchRow::new(kind_name, &name, args.variant.id(), s.to_string(), dt);
                    row.fill((|| {
                        let mut a = make_algorithm(args.variant, inst.requests.len(), Some(tape.clone()))?;
                        let t = run_observed(&mut StaticSource::new(&inst), a.as_mut(), &RunOptions::new(dt, s), &mut |_| {})?;
                        Ok((t, Some(onf_cost)))
                    })())
                })
                .collect();
        }
    }
    aggregate(&mut rows, kind_name, dt_used);
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record([
        "kind",
        "instance",
        "algo",
        "seed",
        "dt",
        "cost_buy",
        "cost_delay",
        "total",
        "opt",
        "ratio",
        "ratio_ci_low",
        "ratio_ci_high",
        "status",
    ])
    .map_err(csv_error)?;
    for r in &rows {
        w.serialize(r).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<i32> {
    let text = bench_rows(cli, args)?;
    emit(cli.out.as_deref(), &text)?;
    Ok(0)
}

/// One line of a verification report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Check a run record; returns one line per certificate.
pub fn verify_record(record: &RunRecord, tolerance: Option<f64>) -> Result<Vec<CheckLine>> {
    if record.revision != REVISION {
        return Err(Error::Domain(format!("unsupported record revision {}", record.revision)));
    }
    let inst = record.instance.clone().into_instance()?;
    let digest = inst.digest();
    if digest != record.instance_digest {
        return Err(Error::DigestMismatch(digest, record.instance_digest.clone()));
    }
    if record.trace.instance_digest != digest {
        return Err(Error::DigestMismatch(digest, record.trace.instance_digest.clone()));
    }
    let trace = &record.trace;
    let tol = tolerance.unwrap_or(10.0 * trace.dt);
    let k = inst.system.max_membership().max(1) as f64;
    let log = (1.0 + k).ln();
    let mut lines = Vec::new();
    let opt = record.summary.opt.filter(|_| record.summary.opt_kind.as_deref() == Some("exact"));
    match record.config.algo {
        Algo::Onf => {
            let samples = record
                .certificate
                .as_ref()
                .ok_or_else(|| Error::MissingData("record has no fractional samples; rerun with --record-certificate".into()))?;
            let dual = check_dual_certificate(&inst, samples, trace.dt)?;
            lines.push(CheckLine {
                name: "dual-feasibility".into(),
                passed: dual.set_slack >= -tol - 1e-9 && dual.delay_slack >= -1e-9,
                detail: format!(
                    "worst set slack {:.3e}, worst delay slack {:.3e}, lower bound {}",
                    dual.set_slack, dual.delay_slack, dual.lower_bound
                ),
            });
            let charging = check_charging(&inst, samples, trace.dt)?;
            lines.push(CheckLine {
                name: "charging".into(),
                passed: charging.identity_gap <= tol + 1e-9 && charging.request_ratio <= 1.0 + tol + 1e-9,
                detail: format!(
                    "identity gap {:.3e}, worst request ratio {:.6}",
                    charging.identity_gap, charging.request_ratio
                ),
            });
            let bound = 2.0 * log * trace.cost_delay;
            lines.push(CheckLine {
                name: "buying-vs-delay".into(),
                passed: trace.cost_buy <= bound * (1.0 + tol) + 1e-9,
                detail: format!("buy {} vs 2 ln(1+k) delay {}", trace.cost_buy, bound),
            });
            if let Some(opt) = opt {
                lines.push(CheckLine {
                    name: "lower-bound-vs-opt".into(),
                    passed: dual.lower_bound <= opt * (1.0 + tol) + 1e-9,
                    detail: format!("certified {} vs opt {opt}", dual.lower_bound),
                });
                lines.push(CheckLine {
                    name: "competitive-bound".into(),
                    passed: trace.total() <= (2.0 * log + 1.0) * opt * (1.0 + tol) + 1e-9,
                    detail: format!("total {} vs (2 ln(1+k) + 1) opt {}", trace.total(), (2.0 * log + 1.0) * opt),
                });
            }
        }
        Algo::Counter => {
            let rep = check_counter(&inst, trace)?;
            lines.push(CheckLine {
                name: "counter-invariants".into(),
                passed: rep.passed,
                detail: format!(
                    "buy/(k delay) {:.6}, worst pending delay/cost {:.6}",
                    rep.buy_to_delay, rep.pending_delay_ratio
                ),
            });
            if let Some(opt) = opt {
                lines.push(CheckLine {
                    name: "competitive-bound".into(),
                    passed: trace.total() <= (k + 1.0) * opt * (1.0 + tol) + 1e-9,
                    detail: format!("total {} vs (k+1) opt {}", trace.total(), (k + 1.0) * opt),
                });
            }
        }
        other => {
            return Err(Error::MissingData(format!("no certificate is defined for {}", other.id())));
        }
    }
    Ok(lines)
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> Result<i32> {
    let record = RunRecord::load(&args.record)?;
    let lines = verify_record(&record, cli.tolerance.or(record.config.tolerance))?;
    let mut text = String::new();
    for l in &lines {
        text.push_str(&format!("{} {}: {}\n", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail));
    }
    emit(cli.out.as_deref(), &text)?;
    Ok(if lines.iter().all(|l| l.passed) { 0 } else { 1 })
}

fn cmd_export_lp(cli: &Cli, args: &ExportLpArgs) -> Result<i32> {
    let inst = load_instance(&args.instance)?;
    let dt = cli.dt.unwrap_or_else(|| default_dt(&inst));
    let lp = DiscreteLp::new(&inst, dt)?;
    let text = if args.dual { lp.dual_text() } else { lp.primal_text() };
    emit(cli.out.as_deref(), &text)?;
    Ok(0)
}
