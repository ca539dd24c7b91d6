//! The `evosir` command line.
//!
//! Every subcommand produces one table, written as CSV (with a leading
//! `# evosir <version> config=<json>` comment) or as a JSON document. Options
//! can come from a JSON file given with `--config`; flags take precedence
//! over the file. Trial `i` of any campaign is seeded with
//! `derive(seed, i)`, so output depends only on the resolved configuration
//! and never on `--jobs`.

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::analytic::{base_transmissibility, AnalyticReport};
use crate::error::{Error, Result};
use crate::graph::generate_er;
use crate::ode::{self, PoissonPgf, SkOptions};
use crate::params::{EpidemicParams, InfectionModel, Variant};
use crate::percolation::{self, StopRule};
use crate::seed;
use crate::sim::{self, TrajectoryMode, TrialConfig};
use crate::VERSION;

pub const EXIT_BAD_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "evosir", version, about = "SIR epidemics on Erdős–Rényi graphs with edge deletion or rewiring")]
pub struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file for the main table (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// JSON file with subcommand options; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analytic predictions, optionally along a sweep axis.
    Analytic(AnalyticArgs),
    /// Monte-Carlo campaign at every point of a sweep axis.
    Sweep(SweepArgs),
    /// Monte-Carlo campaign at one point.
    Run(RunArgs),
    /// Integrate one of the deterministic systems.
    Ode(OdeArgs),
    /// Trace an exploration process.
    Explore(ExploreArgs),
    /// Cluster sizes of random vertices in percolated G(n, μ/n).
    Percolate(PercolateArgs),
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
pub struct PointArgs {
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// fixed | exponential
    #[arg(long)]
    pub model: Option<String>,
    /// static | del | evo
    #[arg(long)]
    pub variant: Option<String>,
}

impl PointArgs {
    fn params(&self) -> Result<EpidemicParams> {
        let model: InfectionModel = self.model.as_deref().unwrap_or("exponential").parse()?;
        let variant: Variant = self.variant.as_deref().unwrap_or("evo").parse()?;
        let p = EpidemicParams::new(
            self.mu.unwrap_or(5.0),
            self.lambda.unwrap_or(1.0),
            self.rho.unwrap_or(0.0),
            model,
            variant,
        );
        p.validate()?;
        Ok(p)
    }
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
pub struct AxisArgs {
    /// Parameter to sweep: mu | lambda | rho
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Mu,
    Lambda,
    Rho,
}

impl AxisArgs {
    /// Parameter points along the axis; just `base` when no axis is given.
    fn points(&self, base: EpidemicParams, required: bool) -> Result<Vec<EpidemicParams>> {
        let Some(name) = self.sweep.as_deref() else {
            if required {
                return Err(Error::param("a sweep needs --sweep, --from, --to and --steps"));
            }
            return Ok(vec![base]);
        };
        let axis = match name {
            "mu" => Axis::Mu,
            "lambda" => Axis::Lambda,
            "rho" => Axis::Rho,
            other => return Err(Error::param(format!("cannot sweep `{other}`; use mu, lambda or rho"))),
        };
        let (Some(from), Some(to), Some(steps)) = (self.from, self.to, self.steps) else {
            return Err(Error::param("a sweep needs --from, --to and --steps"));
        };
        if !from.is_finite() || !to.is_finite() || steps == 0 {
            return Err(Error::param("sweep bounds must be finite and steps >= 1"));
        }
        (0..steps)
            .map(|k| {
                let x = if steps == 1 {
                    from
                } else {
                    from + (to - from) * k as f64 / (steps - 1) as f64
                };
                let mut p = base;
                match axis {
                    Axis::Mu => p.mu = x,
                    Axis::Lambda => p.lambda = x,
                    Axis::Rho => p.rho = x,
                }
                p.validate()?;
                Ok(p)
            })
            .collect()
    }
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
pub struct AnalyticArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub axis: AxisArgs,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
pub struct CampaignArgs {
    /// Population size (default 10000).
    #[arg(long)]
    pub n: Option<usize>,
    /// Trials per point (default 200).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Large-epidemic threshold as a fraction of n (default (1−z0)/2).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also write the per-trial table here.
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub axis: AxisArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub campaign: CampaignArgs,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
pub struct RunArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub campaign: CampaignArgs,
    /// Also write every trial's (t, S, I, R) trajectory here.
    #[arg(long)]
    pub trajectories_out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
pub struct OdeArgs {
    /// homogeneous | sk | sk-rewire | miller-volz | ml-pair
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub i0: Option<f64>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Initial infected fraction for Miller–Volz.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// For `sk`: number of StaticSIR simulations to overlay.
    #[arg(long)]
    pub sim_trials: Option<usize>,
    /// For `sk`: where to write the aligned simulation/ODE overlay.
    #[arg(long)]
    pub sim_out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
pub struct ExploreArgs {
    /// fixed | exponential | rewiring
    #[arg(long)]
    pub process: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Mean degree of the thinned graph (fixed process).
    #[arg(long)]
    pub mu_bar: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// default | full | <m> (stop at the first empty active set after step m)
    #[arg(long)]
    pub stop: Option<String>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
pub struct PercolateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
    /// Retention probability; defaults to 1 − e^{−λ}.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Independent graphs, one random vertex each.
    #[arg(long)]
    pub draws: Option<usize>,
}

/// A table cell. Floats print with Rust's shortest round-trip formatting.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    Empty,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::F(x) => write!(f, "{x}"),
            Cell::U(x) => write!(f, "{x}"),
            Cell::S(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::F(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::U(x) => json!(x),
            Cell::S(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::F)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::S(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write<W: Write + ?Sized>(&self, out: &mut W, format: Format, config: &Value) -> Result<()> {
        match format {
            Format::Csv => {
                writeln!(out, "# evosir {VERSION} config={config}")?;
                writeln!(out, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
                    writeln!(out, "{}", cells.join(","))?;
                }
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let obj: Map<String, Value> = self
                            .columns
                            .iter()
                            .zip(r)
                            .map(|(c, v)| (c.to_string(), v.to_json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let doc = json!({ "version": VERSION, "config": config, "rows": rows });
                serde_json::to_writer_pretty(&mut *out, &doc)?;
                writeln!(out)?;
            }
        }
        Ok(())
    }
}

/// Overlays non-null flag values onto the options read from the config
/// file. Keys in the file that the subcommand does not know are rejected.
fn merge<T: Serialize + DeserializeOwned + Default>(flags: &T, file: Option<&Map<String, Value>>) -> Result<T> {
    let known = match serde_json::to_value(T::default())? {
        Value::Object(m) => m,
        _ => unreachable!("argument structs serialize to objects"),
    };
    let mut merged = Map::new();
    if let Some(file) = file {
        for (k, v) in file {
            if !known.contains_key(k) {
                return Err(Error::param(format!("unknown config key `{k}`")));
            }
            merged.insert(k.clone(), v.clone());
        }
    }
    if let Value::Object(f) = serde_json::to_value(flags)? {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::param(format!("bad config: {e}")))
}

fn read_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path)?;
    match serde_json::from_str(&text).map_err(|e| Error::param(format!("config {}: {e}", path.display())))? {
        Value::Object(m) => Ok(m),
        _ => Err(Error::param("config file must hold a JSON object")),
    }
}

struct Ctx {
    seed: u64,
    format: Format,
}

/// Writes a side table (always CSV) next to the main output.
fn write_side(path: &Path, table: &Table, config: &Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    table.write(&mut w, Format::Csv, config)?;
    w.flush()?;
    Ok(())
}

/// Parses and runs one invocation, writing the main table to `--out` or to
/// `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut file = match &cli.config {
        Some(p) => Some(read_config(p)?),
        None => None,
    };
    let file_seed = match file.as_mut().and_then(|m| m.remove("seed")) {
        Some(v) => Some(v.as_u64().ok_or_else(|| Error::param("config `seed` must be an unsigned integer"))?),
        None => None,
    };
    let ctx = Ctx {
        seed: cli.seed.or(file_seed).unwrap_or(1),
        format: cli.format,
    };
    let file = file.as_ref();
    let work = || -> Result<(Table, Value)> {
        match &cli.command {
            Command::Analytic(a) => cmd_analytic(&merge(a, file)?, &ctx),
            Command::Sweep(a) => cmd_sweep(&merge(a, file)?, &ctx),
            Command::Run(a) => cmd_run(&merge(a, file)?, &ctx),
            Command::Ode(a) => cmd_ode(&merge(a, file)?, &ctx),
            Command::Explore(a) => cmd_explore(&merge(a, file)?, &ctx),
            Command::Percolate(a) => cmd_percolate(&merge(a, file)?, &ctx),
        }
    };
    let (table, config) = match cli.jobs {
        Some(0) => return Err(Error::param("--jobs must be >= 1")),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::param(format!("cannot start {j} workers: {e}")))?
            .install(work)?,
        None => work()?,
    };
    match &cli.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write(&mut w, ctx.format, &config)?;
            w.flush()?;
        }
        None => table.write(stdout, ctx.format, &config)?,
    }
    Ok(())
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Param(_) | Error::Json(_) => EXIT_BAD_CONFIG,
        Error::Numeric { .. } | Error::NoEpidemic(_) => EXIT_NUMERIC,
        Error::Io(_) | Error::Consistency(_) => 1,
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("evosir: {e}");
            exit_code(&e)
        }
    }
}

fn config_echo<T: Serialize>(command: &str, args: &T, ctx: &Ctx) -> Result<Value> {
    Ok(json!({ "command": command, "seed": ctx.seed, "options": serde_json::to_value(args)? }))
}

const ANALYTIC_COLUMNS: &[&str] = &[
    "model",
    "variant",
    "mu",
    "lambda",
    "rho",
    "tau",
    "alpha",
    "lambda_c",
    "z0",
    "p_large",
    "final_size",
    "evo_final_size_approx",
];

fn cmd_analytic(a: &AnalyticArgs, ctx: &Ctx) -> Result<(Table, Value)> {
    let points = a.axis.points(a.point.params()?, false)?;
    let mut table = Table::new(ANALYTIC_COLUMNS);
    for p in points {
        let r = AnalyticReport::compute(&p)?;
        table.push(vec![
            p.infection_model.to_string().into(),
            p.variant.to_string().into(),
            r.mu.into(),
            r.lambda.into(),
            r.rho.into(),
            r.tau.into(),
            r.alpha.into(),
            r.lambda_c.into(),
            r.z0.into(),
            r.p_large.into(),
            r.final_size.into(),
            r.evo_final_size_approx.into(),
        ]);
    }
    Ok((table, config_echo("analytic", a, ctx)?))
}

const SUMMARY_COLUMNS: &[&str] = &[
    "point",
    "mu",
    "lambda",
    "rho",
    "model",
    "variant",
    "n",
    "trials",
    "threshold",
    "large_count",
    "large_fraction",
    "large_fraction_se",
    "mean_final",
    "mean_final_se",
    "large_mean_final",
    "large_mean_final_se",
    "p_large_analytic",
    "final_size_analytic",
    "evo_approx",
    "error",
];

const TRIAL_COLUMNS: &[&str] = &[
    "point",
    "trial",
    "seed",
    "n",
    "mu",
    "lambda",
    "rho",
    "model",
    "variant",
    "final_removed",
    "peak_infected",
    "rewires",
    "deletions",
    "extinction_time",
];

/// Runs the campaign at every point. A point whose campaign fails keeps
/// its row with the error recorded; the remaining points still run.
fn campaign(
    points: &[EpidemicParams],
    c: &CampaignArgs,
    ctx: &Ctx,
    trajectory: TrajectoryMode,
) -> Result<(Table, Table, Vec<Option<sim::TrialReport>>)> {
    let n = c.n.unwrap_or(10_000);
    let trials = c.trials.unwrap_or(200);
    if trials == 0 {
        return Err(Error::param("trials must be >= 1"));
    }
    if let Some(t) = c.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::param(format!("threshold {t} not in [0, 1]")));
        }
    }
    let mut summary = Table::new(SUMMARY_COLUMNS);
    let mut rows = Table::new(TRIAL_COLUMNS);
    let mut reports = Vec::new();
    for (k, p) in points.iter().enumerate() {
        let p = p.with_n(n);
        let cfg = TrialConfig {
            n,
            trials,
            // Each point gets its own seed stream.
            base_seed: seed::derive(ctx.seed, k as u64),
            large_threshold: c.threshold,
            trajectory,
        };
        let head: Vec<Cell> = vec![
            k.into(),
            p.mu.into(),
            p.lambda.into(),
            p.rho.into(),
            p.infection_model.to_string().into(),
            p.variant.to_string().into(),
            n.into(),
            trials.into(),
        ];
        let analytic = AnalyticReport::compute(&p);
        let (p_large, fs, evo) = match &analytic {
            Ok(r) => (Cell::from(r.p_large), Cell::from(r.final_size), Cell::from(r.evo_final_size_approx)),
            Err(_) => (Cell::Empty, Cell::Empty, Cell::Empty),
        };
        match sim::run_trials(&p, &cfg) {
            Ok(rep) => {
                let s = &rep.summary;
                let mut row = head;
                row.extend([
                    s.threshold.into(),
                    s.large_count.into(),
                    s.large_fraction.into(),
                    s.large_fraction_se.into(),
                    s.final_fraction.mean.into(),
                    s.final_fraction.se.into(),
                    Cell::from((s.large_count > 0).then_some(s.large_final_fraction.mean)),
                    Cell::from((s.large_count > 0).then_some(s.large_final_fraction.se)),
                    p_large,
                    fs,
                    evo,
                    analytic.err().map_or(Cell::Empty, |e| Cell::S(csv_safe(&e.to_string()))),
                ]);
                summary.push(row);
                for r in &rep.records {
                    let o = &r.outcome;
                    rows.push(vec![
                        k.into(),
                        r.trial.into(),
                        r.seed.into(),
                        n.into(),
                        p.mu.into(),
                        p.lambda.into(),
                        p.rho.into(),
                        p.infection_model.to_string().into(),
                        p.variant.to_string().into(),
                        o.final_removed.into(),
                        o.peak_infected.into(),
                        o.rewire_events.into(),
                        o.delete_events.into(),
                        o.extinction_time.into(),
                    ]);
                }
                reports.push(Some(rep));
            }
            Err(e) => {
                let mut row = head;
                row.extend(std::iter::repeat_n(Cell::Empty, 8));
                row.extend([p_large, fs, evo, Cell::S(csv_safe(&e.to_string()))]);
                summary.push(row);
                reports.push(None);
            }
        }
    }
    Ok((summary, rows, reports))
}

fn csv_safe(s: &str) -> String {
    s.replace([',', '\n'], ";")
}

fn cmd_sweep(a: &SweepArgs, ctx: &Ctx) -> Result<(Table, Value)> {
    let points = a.axis.points(a.point.params()?, true)?;
    let config = config_echo("sweep", a, ctx)?;
    let (summary, rows, _) = campaign(&points, &a.campaign, ctx, TrajectoryMode::Off)?;
    if let Some(path) = &a.campaign.trials_out {
        write_side(path, &rows, &config)?;
    }
    Ok((summary, config))
}

fn cmd_run(a: &RunArgs, ctx: &Ctx) -> Result<(Table, Value)> {
    let p = a.point.params()?;
    let config = config_echo("run", a, ctx)?;
    let mode = if a.trajectories_out.is_some() {
        TrajectoryMode::Auto
    } else {
        TrajectoryMode::Off
    };
    let (summary, rows, reports) = campaign(&[p], &a.campaign, ctx, mode)?;
    if let Some(path) = &a.campaign.trials_out {
        write_side(path, &rows, &config)?;
    }
    if let Some(path) = &a.trajectories_out {
        let mut tr = Table::new(&["trial", "t", "S", "I", "R"]);
        if let Some(Some(rep)) = reports.first() {
            for r in &rep.records {
                for s in &r.outcome.trajectory {
                    tr.push(vec![r.trial.into(), s.t.into(), s.s.into(), s.i.into(), s.r.into()]);
                }
            }
        }
        write_side(path, &tr, &config)?;
    }
    Ok((summary, config))
}

fn trajectory_table(tr: &ode::OdeTrajectory) -> Table {
    let mut cols = vec!["t", "S", "I", "R"];
    if let Some(x) = tr.extra_name {
        cols.push(x);
    }
    let mut table = Table::new(&cols);
    for s in &tr.samples {
        let mut row: Vec<Cell> = vec![s.t.into(), s.s.into(), s.i.into(), s.r.into()];
        if tr.extra_name.is_some() {
            row.push(s.extra.into());
        }
        table.push(row);
    }
    table
}

/// Fraction of n at which simulation and ODE clocks are aligned.
pub const OVERLAY_ALIGN_FRACTION: f64 = 0.01;

fn cmd_ode(a: &OdeArgs, ctx: &Ctx) -> Result<(Table, Value)> {
    let config = config_echo("ode", a, ctx)?;
    let system = a.system.as_deref().unwrap_or("sk");
    let dt = a.dt.unwrap_or(ode::DEFAULT_DT);
    let t_end = a.t_end.unwrap_or(30.0);
    let mu = a.mu.unwrap_or(5.0);
    let n = a.n.unwrap_or(10_000);
    if a.sim_trials.is_some() != a.sim_out.is_some() {
        return Err(Error::param("--sim-trials and --sim-out go together"));
    }
    if a.sim_trials.is_some() && system != "sk" {
        return Err(Error::param("the simulation overlay is only available for the sk system"));
    }
    let table = match system {
        "homogeneous" => {
            let tr = ode::integrate_homogeneous(a.beta.unwrap_or(2.0), n as f64, a.i0.unwrap_or(10.0), t_end, dt)?;
            trajectory_table(&tr)
        }
        "sk" | "sk-rewire" => {
            let rewire = system == "sk-rewire";
            let variant = if rewire { Variant::EvoSir } else { Variant::StaticSir };
            let p = EpidemicParams::new(
                mu,
                a.lambda.unwrap_or(2.0),
                if rewire { a.rho.unwrap_or(0.0) } else { 0.0 },
                InfectionModel::ExponentialUnitMean,
                variant,
            )
            .with_n(n);
            let opts = SkOptions {
                i0: a.i0,
                k_max: a.k_max,
                dt,
                t_end,
            };
            let run = if rewire {
                ode::integrate_sk_rewire(&p, &opts)?
            } else {
                ode::integrate_sk(&p, &opts)?
            };
            if let (Some(trials), Some(path)) = (a.sim_trials, &a.sim_out) {
                let overlay = overlay_table(&p, n, trials, ctx.seed, &run.trajectory)?;
                write_side(path, &overlay, &config)?;
            }
            trajectory_table(&run.trajectory)
        }
        "miller-volz" => {
            let tr = ode::integrate_miller_volz(
                a.beta.or(a.lambda).unwrap_or(2.0),
                a.gamma.unwrap_or(1.0),
                &PoissonPgf { mu },
                a.eps.unwrap_or(1e-4),
                dt,
                t_end,
            )?;
            trajectory_table(&tr)
        }
        "ml-pair" => {
            let pair = ode::integrate_ml_pair(mu, a.tau.unwrap_or(0.5), a.alpha.unwrap_or(0.0), dt)?;
            let mut table = Table::new(&["s", "u", "v"]);
            for k in 0..pair.s.len() {
                table.push(vec![pair.s[k].into(), pair.u[k].into(), pair.v[k].into()]);
            }
            table
        }
        other => {
            return Err(Error::param(format!(
                "unknown system `{other}`; use homogeneous, sk, sk-rewire, miller-volz or ml-pair"
            )))
        }
    };
    Ok((table, config))
}

/// Aligned mean simulated `I/n` against the class-system `I/n`, both
/// measured from the time `I + R` first reaches 1% of n.
fn overlay_table(
    p: &EpidemicParams,
    n: usize,
    trials: usize,
    base_seed: u64,
    tr: &ode::OdeTrajectory,
) -> Result<Table> {
    let level = OVERLAY_ALIGN_FRACTION * n as f64;
    let start = tr
        .first_time(|s| s.i + s.r, level)
        .ok_or_else(|| Error::numeric("the ODE never reached the alignment level", 0.0))?;
    let horizon = tr.last().t - start;
    let grid: Vec<f64> = (0..)
        .map(|k| -start + 0.05 * k as f64)
        .take_while(|&g| g <= horizon)
        .collect();
    let threshold = sim::default_large_threshold(p)?;
    let curve = sim::aligned_infected_curve(p, n, trials, base_seed, threshold, OVERLAY_ALIGN_FRACTION, &grid, None)?;
    let mut table = Table::new(&["t_aligned", "sim_I", "ode_I", "runs"]);
    for (k, &g) in grid.iter().enumerate() {
        table.push(vec![
            g.into(),
            curve.mean_infected[k].into(),
            (tr.at(start + g).i / n as f64).into(),
            curve.runs.into(),
        ]);
    }
    Ok(table)
}

fn cmd_explore(a: &ExploreArgs, ctx: &Ctx) -> Result<(Table, Value)> {
    let config = config_echo("explore", a, ctx)?;
    let n = a.n.unwrap_or(100_000);
    let stop = match a.stop.as_deref().unwrap_or("default") {
        "default" => StopRule::Default,
        "full" => StopRule::Full,
        m => StopRule::EmptyAfter(
            m.parse()
                .map_err(|_| Error::param(format!("stop rule `{m}` is not default, full or a step count")))?,
        ),
    };
    let mu = a.mu.unwrap_or(5.0);
    let trace = match a.process.as_deref().unwrap_or("fixed") {
        "fixed" => {
            let mu_bar = match (a.mu_bar, a.lambda) {
                (Some(m), _) => m,
                (None, Some(l)) => mu * base_transmissibility(l, InfectionModel::FixedUnitTime),
                (None, None) => 2.0,
            };
            percolation::explore_fixed(n, mu_bar, ctx.seed, stop)?
        }
        "exponential" => percolation::explore_exponential(n, mu, a.lambda.unwrap_or(1.0), ctx.seed, stop)?,
        "rewiring" => {
            percolation::explore_rewiring(n, mu, a.tau.unwrap_or(0.5), a.alpha.unwrap_or(0.0), ctx.seed, stop)?
        }
        other => {
            return Err(Error::param(format!("unknown process `{other}`; use fixed, exponential or rewiring")))
        }
    };
    let mut table = Table::new(&["step", "U", "A", "R", "v"]);
    for t in 0..trace.u.len() {
        table.push(vec![
            t.into(),
            trace.u[t].into(),
            trace.a[t].into(),
            t.into(),
            trace.v.as_ref().map(|v| v[t]).into(),
        ]);
    }
    Ok((table, config))
}

fn cmd_percolate(a: &PercolateArgs, ctx: &Ctx) -> Result<(Table, Value)> {
    let config = config_echo("percolate", a, ctx)?;
    let n = a.n.unwrap_or(10_000);
    let mu = a.mu.unwrap_or(5.0);
    let tau = match (a.tau, a.lambda) {
        (Some(t), _) => t,
        (None, Some(l)) => base_transmissibility(l, InfectionModel::FixedUnitTime),
        (None, None) => 1.0,
    };
    let draws = a.draws.unwrap_or(200);
    if draws == 0 {
        return Err(Error::param("draws must be >= 1"));
    }
    let sizes = (0..draws)
        .into_par_iter()
        .map(|i| {
            let s = seed::derive(ctx.seed, i as u64);
            cluster_draw(n, mu, tau, s).map(|size| (s, size))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(&["draw", "seed", "n", "mu", "tau", "cluster_size"]);
    for (i, (s, size)) in sizes.into_iter().enumerate() {
        table.push(vec![i.into(), s.into(), n.into(), mu.into(), tau.into(), size.into()]);
    }
    Ok((table, config))
}

/// One G(n, μ/n), percolated with retention `tau`, and the cluster of a
/// uniformly random vertex.
pub fn cluster_draw(n: usize, mu: f64, tau: f64, draw_seed: u64) -> Result<usize> {
    let mut rng = seed::rng(draw_seed);
    let g = generate_er(n, mu, &mut rng)?;
    let h = percolation::percolate(&g, tau, &mut rng)?;
    percolation::cluster_size_of_random_vertex(&h, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Result<String> {
        let mut argv = vec!["evosir"];
        argv.extend_from_slice(args);
        let cli = Cli::try_parse_from(argv).expect("arguments parse");
        let mut buf = Vec::new();
        execute(cli, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    fn body(csv: &str) -> Vec<Vec<String>> {
        csv.lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect()
    }

    fn column(rows: &[Vec<String>], name: &str) -> Vec<String> {
        let idx = rows[0].iter().position(|c| c == name).unwrap();
        rows[1..].iter().map(|r| r[idx].clone()).collect()
    }

    #[test]
    fn analytic_sweep_crosses_threshold() {
        let out = run(&[
            "analytic", "--mu", "5", "--rho", "4", "--model", "exponential", "--sweep", "lambda", "--from", "0.5",
            "--to", "2.5", "--steps", "41",
        ])
        .unwrap();
        assert!(out.starts_with(&format!("# evosir {VERSION} config=")));
        let rows = body(&out);
        assert_eq!(rows.len(), 42);
        let lambdas: Vec<f64> = column(&rows, "lambda").iter().map(|x| x.parse().unwrap()).collect();
        let p: Vec<f64> = column(&rows, "p_large").iter().map(|x| x.parse().unwrap()).collect();
        let at = lambdas.iter().position(|&l| (l - 1.25).abs() < 1e-9).unwrap();
        assert_eq!(p[at], 0.0);
        assert!(p[..=at].iter().all(|&x| x == 0.0));
        assert!(p[at + 1..].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn analytic_subcritical_point_is_zero() {
        let rows = body(&run(&["analytic", "--mu", "5", "--lambda", "0.5", "--rho", "4"]).unwrap());
        assert_eq!(column(&rows, "p_large"), vec!["0"]);
        assert_eq!(column(&rows, "final_size"), vec!["0"]);
    }

    #[test]
    fn analytic_without_rho_matches_static() {
        let a = body(&run(&["analytic", "--lambda", "1.5", "--rho", "0", "--variant", "del"]).unwrap());
        let b = body(&run(&["analytic", "--lambda", "1.5", "--rho", "3", "--variant", "static"]).unwrap());
        for col in ["tau", "z0", "p_large", "final_size"] {
            assert_eq!(column(&a, col), column(&b, col));
        }
    }

    #[test]
    fn json_format() {
        let out = run(&["--format", "json", "analytic", "--lambda", "2", "--rho", "4"]).unwrap();
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["version"], VERSION);
        assert_eq!(v["rows"][0]["lambda"], 2.0);
        assert!(v["rows"][0]["p_large"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn runs_are_byte_identical() {
        let args = ["--seed", "7", "run", "--n", "2000", "--trials", "8", "--lambda", "2", "--rho", "4"];
        let a = run(&args).unwrap();
        let b = run(&args).unwrap();
        assert_eq!(a, b);
        let mut more = args.to_vec();
        more.extend(["--jobs", "1"]);
        assert_eq!(a, run(&more).unwrap());
    }

    #[test]
    fn sweep_with_one_step_equals_run() {
        let common = ["--n", "1000", "--trials", "5", "--lambda", "2", "--rho", "4"];
        let mut sweep = vec!["--seed", "3", "sweep", "--sweep", "lambda", "--from", "2", "--to", "9", "--steps", "1"];
        sweep.extend(common);
        let mut single = vec!["--seed", "3", "run"];
        single.extend(common);
        assert_eq!(body(&run(&sweep).unwrap()), body(&run(&single).unwrap()));
    }

    #[test]
    fn side_tables_and_config_file() {
        let dir = std::env::temp_dir().join(format!("evosir-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("cfg.json");
        std::fs::write(&cfg, r#"{"n": 500, "trials": 4, "lambda": 3.0, "rho": 1.0, "seed": 11}"#).unwrap();
        let trials = dir.join("trials.csv");
        let trajs = dir.join("traj.csv");
        let out = run(&[
            "--config",
            cfg.to_str().unwrap(),
            "run",
            "--lambda",
            "2",
            "--trials-out",
            trials.to_str().unwrap(),
            "--trajectories-out",
            trajs.to_str().unwrap(),
        ])
        .unwrap();
        let rows = body(&out);
        assert_eq!(column(&rows, "lambda"), vec!["2"]);
        assert_eq!(column(&rows, "rho"), vec!["1"]);
        assert_eq!(column(&rows, "n"), vec!["500"]);
        assert!(out.contains("\"seed\":11"));
        let t = body(&std::fs::read_to_string(&trials).unwrap());
        assert_eq!(t[0].join(","), TRIAL_COLUMNS.join(","));
        assert_eq!(t.len(), 5);
        let tr = body(&std::fs::read_to_string(&trajs).unwrap());
        assert_eq!(tr[0].join(","), "trial,t,S,I,R");
        assert_eq!(tr[1].join(","), "0,0,499,1,0");

        std::fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
        let err = run(&["--config", cfg.to_str().unwrap(), "run"]).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_BAD_CONFIG);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn bad_parameters_exit_with_config_code() {
        for args in [
            vec!["analytic", "--lambda=-1"],
            vec!["analytic", "--model", "gamma"],
            vec!["sweep", "--lambda", "1"],
            vec!["analytic", "--sweep", "lambda", "--from", "1", "--to", "2", "--steps", "0"],
            vec!["ode", "--system", "nope"],
            vec!["explore", "--stop", "soon"],
            vec!["run", "--jobs", "0"],
        ] {
            let err = run(&args).unwrap_err();
            assert_eq!(exit_code(&err), EXIT_BAD_CONFIG, "{args:?}");
        }
    }

    #[test]
    fn ode_numeric_failure_code() {
        let err = run(&["ode", "--system", "sk", "--k-max", "3"]).unwrap_err();
        assert_eq!(exit_code(&err), EXIT_NUMERIC);
    }

    #[test]
    fn ode_outputs() {
        let rows = body(&run(&["ode", "--system", "homogeneous", "--beta", "0", "--t-end", "1"]).unwrap());
        assert_eq!(rows[0].join(","), "t,S,I,R");
        assert!(column(&rows, "S").iter().all(|s| s == "9990"));
        let rows = body(&run(&["ode", "--system", "ml-pair", "--tau", "0.4", "--alpha", "0"]).unwrap());
        let u: Vec<f64> = column(&rows, "u").iter().map(|x| x.parse().unwrap()).collect();
        assert!((u.last().unwrap() - (-2.0f64).exp()).abs() < 1e-6);
        let rows = body(&run(&["ode", "--system", "sk-rewire", "--rho", "4", "--t-end", "2"]).unwrap());
        assert_eq!(rows[0].last().unwrap(), "mu_t");
        let rows = body(&run(&["ode", "--system", "miller-volz", "--t-end", "1"]).unwrap());
        assert_eq!(rows[0].last().unwrap(), "theta");
    }

    #[test]
    fn explore_outputs() {
        let rows = body(&run(&["explore", "--n", "100", "--mu-bar", "0", "--stop", "full"]).unwrap());
        assert_eq!(rows[0].join(","), "step,U,A,R,v");
        for (t, u) in column(&rows, "U").iter().enumerate() {
            assert_eq!(u.parse::<usize>().unwrap(), 100 - t);
        }
        assert!(column(&rows, "v").iter().all(String::is_empty));
        let rows = body(&run(&["explore", "--process", "rewiring", "--n", "200", "--alpha", "0.3"]).unwrap());
        assert_eq!(column(&rows, "v")[0], "5");
    }

    #[test]
    fn percolate_outputs() {
        let a = run(&["--seed", "5", "percolate", "--n", "500", "--tau", "1", "--draws", "3"]).unwrap();
        assert_eq!(a, run(&["--seed", "5", "percolate", "--n", "500", "--tau", "1", "--draws", "3"]).unwrap());
        let rows = body(&a);
        assert_eq!(rows.len(), 4);
        let rows = body(&run(&["percolate", "--n", "50", "--tau", "0", "--draws", "4"]).unwrap());
        assert!(column(&rows, "cluster_size").iter().all(|s| s == "1"));
    }
}
