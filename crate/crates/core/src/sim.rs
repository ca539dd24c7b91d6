//! Exact event-driven simulation of StaticSIR, delSIR and evoSIR.
//!
//! Every S–I adjacency races an infection clock (rate λ) against a removal
//! clock (rate ρ) and the infected endpoint's recovery time, which is known
//! as soon as the vertex is infected. Only the first of the two exponential
//! clocks is drawn (`Exp(λ+ρ)`, then a biased coin for its kind) and it is
//! enqueued only if it beats the recovery. Events are invalidated lazily:
//! each edge carries a version counter bumped whenever its S–I episode
//! starts or ends, and a popped event whose version is out of date is
//! dropped.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::OffspringLaw;
use crate::error::{Error, Result};
use crate::graph::{generate_er, EdgeId, EvolvingGraph, Vertex};
use crate::params::{EpidemicParams, InfectionModel, Variant};
use crate::seed::{self, SimRng};
use crate::stats::{binomial_se, mean_se, MeanSe};

/// Populations up to this size record every event in [`TrajectoryMode::Auto`].
pub const FULL_TRAJECTORY_MAX_N: usize = 10_000;
/// Sampling interval of [`TrajectoryMode::Auto`] for larger populations.
pub const GRID_DT: f64 = 0.05;
/// Large-epidemic threshold (fraction of n) used when the branching
/// approximation is subcritical and `(1 − z₀)/2` would be zero.
pub const SUBCRITICAL_LARGE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryMode {
    /// Every event for `n ≤ 10⁴`, otherwise a `Δt = 0.05` grid.
    Auto,
    Off,
    EveryEvent,
    Grid(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Susceptible,
    Infected,
    Removed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub s: usize,
    pub i: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpidemicOutcome {
    pub final_removed: usize,
    pub peak_infected: usize,
    pub rewire_events: usize,
    pub delete_events: usize,
    pub trajectory: Vec<Sample>,
    pub seed: u64,
    /// Time of the last recovery.
    pub extinction_time: f64,
    pub initial_infected: Vertex,
    /// Largest number of S–I episodes any single edge went through.
    pub max_edge_episodes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Infect,
    /// The removal clock: deletes the edge (delSIR) or rewires its
    /// susceptible end (evoSIR).
    Rewire,
    Recover,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeClockEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Edge id for clock events, vertex id for recoveries.
    pub target: usize,
    /// Susceptible endpoint of the edge when the clock was set.
    pub susceptible: Vertex,
    pub version: u32,
}

struct Queued {
    event: EdgeClockEvent,
    seq: u64,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // Reversed: BinaryHeap is a max-heap and we want the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .event
            .time
            .total_cmp(&self.event.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub s: usize,
    pub i: usize,
    pub r: usize,
}

/// Hook called after every event that takes effect.
pub trait Observer {
    fn on_event(&mut self, _event: &EdgeClockEvent, _counts: Counts, _graph: &EvolvingGraph) {}
}

impl Observer for () {}

struct Sim<'g> {
    g: &'g mut EvolvingGraph,
    rng: SimRng,
    model: InfectionModel,
    variant: Variant,
    lambda: f64,
    rho: f64,
    status: Vec<Status>,
    recovery: Vec<f64>,
    version: Vec<u32>,
    episodes: Vec<u32>,
    queue: BinaryHeap<Queued>,
    seq: u64,
    counts: Counts,
    scratch: Vec<EdgeId>,
}

impl Sim<'_> {
    fn push(&mut self, event: EdgeClockEvent) {
        self.seq += 1;
        self.queue.push(Queued { event, seq: self.seq });
    }

    fn infect(&mut self, v: Vertex, t: f64) {
        debug_assert_eq!(self.status[v], Status::Susceptible);
        self.status[v] = Status::Infected;
        self.counts.s -= 1;
        self.counts.i += 1;
        let duration = match self.model {
            InfectionModel::FixedUnitTime => 1.0,
            InfectionModel::ExponentialUnitMean => self.rng.sample::<f64, _>(Exp1),
        };
        let r = t + duration;
        self.recovery[v] = r;
        self.push(EdgeClockEvent {
            time: r,
            kind: EventKind::Recover,
            target: v,
            susceptible: v,
            version: 0,
        });

        self.scratch.clear();
        self.scratch.extend_from_slice(self.g.incident_edges(v));
        let edges = std::mem::take(&mut self.scratch);
        for &e in &edges {
            let x = self.g.other_end(e, v);
            match self.status[x] {
                Status::Susceptible => self.start_episode(e, x, v, t),
                // The edge was S–I with v susceptible; its clock dies.
                Status::Infected => self.version[e] = self.version[e].wrapping_add(1),
                Status::Removed => {}
            }
        }
        self.scratch = edges;
    }

    fn start_episode(&mut self, e: EdgeId, s: Vertex, i: Vertex, t: f64) {
        self.version[e] = self.version[e].wrapping_add(1);
        self.episodes[e] += 1;
        let rate = self.lambda + self.rho;
        if rate == 0.0 {
            return;
        }
        let fire = t + self.rng.sample::<f64, _>(Exp1) / rate;
        if fire >= self.recovery[i] {
            return;
        }
        let kind = if self.rho == 0.0 || self.rng.random::<f64>() * rate < self.lambda {
            EventKind::Infect
        } else {
            EventKind::Rewire
        };
        self.push(EdgeClockEvent {
            time: fire,
            kind,
            target: e,
            susceptible: s,
            version: self.version[e],
        });
    }
}

struct Recorder {
    mode: TrajectoryMode,
    samples: Vec<Sample>,
    next_grid: usize,
}

impl Recorder {
    fn new(mode: TrajectoryMode, n: usize) -> Self {
        let mode = match mode {
            TrajectoryMode::Auto if n <= FULL_TRAJECTORY_MAX_N => TrajectoryMode::EveryEvent,
            TrajectoryMode::Auto => TrajectoryMode::Grid(GRID_DT),
            m => m,
        };
        Recorder {
            mode,
            samples: Vec::new(),
            next_grid: 1,
        }
    }

    fn start(&mut self, c: Counts) {
        if self.mode != TrajectoryMode::Off {
            self.samples.push(Sample { t: 0.0, s: c.s, i: c.i, r: c.r });
        }
    }

    /// Called before applying an event at time `t` to state `c`.
    fn before(&mut self, t: f64, c: Counts) {
        if let TrajectoryMode::Grid(dt) = self.mode {
            loop {
                let g = self.next_grid as f64 * dt;
                if g > t {
                    break;
                }
                self.samples.push(Sample { t: g, s: c.s, i: c.i, r: c.r });
                self.next_grid += 1;
            }
        }
    }

    fn after(&mut self, t: f64, c: Counts) {
        if self.mode == TrajectoryMode::EveryEvent {
            self.samples.push(Sample { t, s: c.s, i: c.i, r: c.r });
        }
    }

    fn finish(mut self, t: f64, c: Counts) -> Vec<Sample> {
        if let TrajectoryMode::Grid(_) = self.mode {
            self.samples.push(Sample { t, s: c.s, i: c.i, r: c.r });
        }
        self.samples
    }
}

/// Runs one epidemic from a single uniformly chosen infective until no
/// infectives remain. `g` is modified in place by deletions and rewirings.
pub fn run_epidemic(p: &EpidemicParams, g: &mut EvolvingGraph, seed: u64) -> Result<EpidemicOutcome> {
    run_epidemic_with(p, g, seed, TrajectoryMode::Auto, &mut ())
}

pub fn run_epidemic_with<O: Observer>(
    p: &EpidemicParams,
    g: &mut EvolvingGraph,
    seed: u64,
    trajectory: TrajectoryMode,
    observer: &mut O,
) -> Result<EpidemicOutcome> {
    p.validate()?;
    let n = g.n();
    if n == 0 {
        return Err(Error::param("cannot run an epidemic on an empty graph"));
    }
    if let Some(pn) = p.n {
        if pn != n {
            return Err(Error::param(format!("params say n={pn} but the graph has {n} vertices")));
        }
    }
    let slots = g.edge_slots();
    let mut sim = Sim {
        g,
        rng: seed::rng(seed),
        model: p.infection_model,
        variant: p.variant,
        lambda: p.lambda,
        rho: p.effective_rho(),
        status: vec![Status::Susceptible; n],
        recovery: vec![f64::INFINITY; n],
        version: vec![0; slots],
        episodes: vec![0; slots],
        queue: BinaryHeap::new(),
        seq: 0,
        counts: Counts { s: n, i: 0, r: 0 },
        scratch: Vec::new(),
    };
    let mut rec = Recorder::new(trajectory, n);

    let first = sim.rng.random_range(0..n);
    sim.infect(first, 0.0);
    rec.start(sim.counts);
    let mut peak = 1;
    let mut rewires = 0;
    let mut deletions = 0;
    let mut last_time = 0.0;

    while let Some(Queued { event, .. }) = sim.queue.pop() {
        let t = event.time;
        match event.kind {
            EventKind::Recover => {
                rec.before(t, sim.counts);
                let v = event.target;
                sim.status[v] = Status::Removed;
                sim.counts.i -= 1;
                sim.counts.r += 1;
            }
            EventKind::Infect | EventKind::Rewire => {
                let e = event.target;
                if sim.version[e] != event.version {
                    continue;
                }
                rec.before(t, sim.counts);
                let s = event.susceptible;
                debug_assert_eq!(sim.status[s], Status::Susceptible);
                if event.kind == EventKind::Infect {
                    sim.infect(s, t);
                    peak = peak.max(sim.counts.i);
                } else {
                    sim.version[e] = sim.version[e].wrapping_add(1);
                    match sim.variant {
                        Variant::DelSir => {
                            sim.g.delete_edge_id(e)?;
                            deletions += 1;
                        }
                        Variant::EvoSir => {
                            let w = sim.g.rewire_edge(e, s, &mut sim.rng)?;
                            rewires += 1;
                            if sim.status[w] == Status::Infected {
                                sim.start_episode(e, s, w, t);
                            }
                        }
                        Variant::StaticSir => {
                            return Err(Error::Consistency("removal clock fired in StaticSIR".into()))
                        }
                    }
                }
            }
        }
        last_time = t;
        rec.after(t, sim.counts);
        observer.on_event(&event, sim.counts, sim.g);
    }
    debug_assert_eq!(sim.counts.i, 0);

    Ok(EpidemicOutcome {
        final_removed: sim.counts.r,
        peak_infected: peak,
        rewire_events: rewires,
        delete_events: deletions,
        trajectory: rec.finish(last_time, sim.counts),
        seed,
        extinction_time: last_time,
        initial_infected: first,
        max_edge_episodes: sim.episodes.iter().copied().max().unwrap_or(0),
    })
}

/// `(1 − z₀)/2`, or [`SUBCRITICAL_LARGE_FRACTION`] when `z₀ = 1`.
pub fn default_large_threshold(p: &EpidemicParams) -> Result<f64> {
    let z0 = OffspringLaw::for_params(p).extinction_probability()?;
    Ok(if z0 < 1.0 {
        0.5 * (1.0 - z0)
    } else {
        SUBCRITICAL_LARGE_FRACTION
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub n: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// Fraction of n; defaults to [`default_large_threshold`].
    pub large_threshold: Option<f64>,
    pub trajectory: TrajectoryMode,
}

impl TrialConfig {
    pub fn new(n: usize, trials: usize, base_seed: u64) -> Self {
        TrialConfig {
            n,
            trials,
            base_seed,
            large_threshold: None,
            trajectory: TrajectoryMode::Off,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    /// Trial seed; graph and epidemic seeds are derived from it.
    pub seed: u64,
    pub outcome: EpidemicOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub threshold: f64,
    pub large_count: usize,
    pub large_fraction: f64,
    pub large_fraction_se: f64,
    /// Final fraction removed over all trials.
    pub final_fraction: MeanSe,
    /// Final fraction removed over large trials only.
    pub large_final_fraction: MeanSe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub params: EpidemicParams,
    pub n: usize,
    pub records: Vec<TrialRecord>,
    pub summary: TrialSummary,
}

/// Seeds for the graph and the epidemic of one trial.
pub fn trial_seeds(trial_seed: u64) -> (u64, u64) {
    (seed::derive(trial_seed, 0), seed::derive(trial_seed, 1))
}

/// A fresh G(n, μ/n) and one epidemic on it.
pub fn run_single_trial(
    p: &EpidemicParams,
    n: usize,
    trial_seed: u64,
    trajectory: TrajectoryMode,
) -> Result<EpidemicOutcome> {
    let (graph_seed, sim_seed) = trial_seeds(trial_seed);
    let mut g = generate_er(n, p.mu, &mut seed::rng(graph_seed))?;
    run_epidemic_with(p, &mut g, sim_seed, trajectory, &mut ())
}

pub fn summarize(outcomes: &[&EpidemicOutcome], n: usize, threshold: f64) -> TrialSummary {
    let trials = outcomes.len();
    let cut = threshold * n as f64;
    let fractions: Vec<f64> = outcomes.iter().map(|o| o.final_removed as f64 / n as f64).collect();
    let large: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.final_removed as f64 >= cut)
        .map(|o| o.final_removed as f64 / n as f64)
        .collect();
    let large_fraction = if trials == 0 { 0.0 } else { large.len() as f64 / trials as f64 };
    TrialSummary {
        trials,
        threshold,
        large_count: large.len(),
        large_fraction,
        large_fraction_se: if trials == 0 { 0.0 } else { binomial_se(large_fraction, trials) },
        final_fraction: mean_se(fractions),
        large_final_fraction: mean_se(large),
    }
}

/// Independent trials, each on its own freshly generated graph. Trials run
/// on the current rayon pool; results are in trial order regardless.
pub fn run_trials(p: &EpidemicParams, cfg: &TrialConfig) -> Result<TrialReport> {
    p.validate()?;
    if cfg.trials == 0 {
        return Err(Error::param("trials must be >= 1"));
    }
    let threshold = match cfg.large_threshold {
        Some(t) if (0.0..=1.0).contains(&t) => t,
        Some(t) => return Err(Error::param(format!("large threshold {t} not in [0, 1]"))),
        None => default_large_threshold(p)?,
    };
    let records = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let trial_seed = seed::derive(cfg.base_seed, i as u64);
            run_single_trial(p, cfg.n, trial_seed, cfg.trajectory).map(|outcome| TrialRecord {
                trial: i,
                seed: trial_seed,
                outcome,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<&EpidemicOutcome> = records.iter().map(|r| &r.outcome).collect();
    let summary = summarize(&outcomes, cfg.n, threshold);
    Ok(TrialReport {
        params: *p,
        n: cfg.n,
        records,
        summary,
    })
}

pub const TRIAL_CSV_HEADER: &str =
    "trial,seed,n,mu,lambda,rho,model,variant,final_removed,peak_infected,rewires,deletions,extinction_time";

impl TrialReport {
    pub fn write_trials_csv<W: Write>(&self, out: &mut W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "{TRIAL_CSV_HEADER}")?;
        }
        let p = &self.params;
        for r in &self.records {
            let o = &r.outcome;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.trial,
                r.seed,
                self.n,
                p.mu,
                p.lambda,
                p.rho,
                p.infection_model,
                p.variant,
                o.final_removed,
                o.peak_infected,
                o.rewire_events,
                o.delete_events,
                o.extinction_time
            )?;
        }
        Ok(())
    }

    pub fn write_trajectories_csv<W: Write>(&self, out: &mut W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "trial,t,S,I,R")?;
        }
        for r in &self.records {
            for s in &r.outcome.trajectory {
                writeln!(out, "{},{},{},{},{}", r.trial, s.t, s.s, s.i, s.r)?;
            }
        }
        Ok(())
    }
}

/// delSIR against evoSIR on the same graphs with the same epidemic seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedSummary {
    pub trials: usize,
    /// Final fraction removed.
    pub del: MeanSe,
    pub evo: MeanSe,
    /// evo − del, per pair.
    pub diff: MeanSe,
    pub pairs: Vec<(usize, usize)>,
}

pub fn compare_variants(p: &EpidemicParams, n: usize, trials: usize, base_seed: u64) -> Result<PairedSummary> {
    p.validate()?;
    if trials == 0 {
        return Err(Error::param("trials must be >= 1"));
    }
    let del_p = EpidemicParams { variant: Variant::DelSir, ..*p };
    let evo_p = EpidemicParams { variant: Variant::EvoSir, ..*p };
    let pairs = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (graph_seed, sim_seed) = trial_seeds(seed::derive(base_seed, i as u64));
            let g = generate_er(n, p.mu, &mut seed::rng(graph_seed))?;
            let mut g_del = g.clone();
            let mut g_evo = g;
            let d = run_epidemic_with(&del_p, &mut g_del, sim_seed, TrajectoryMode::Off, &mut ())?;
            let e = run_epidemic_with(&evo_p, &mut g_evo, sim_seed, TrajectoryMode::Off, &mut ())?;
            Ok((d.final_removed, e.final_removed))
        })
        .collect::<Result<Vec<_>>>()?;
    let nf = n as f64;
    Ok(PairedSummary {
        trials,
        del: mean_se(pairs.iter().map(|&(d, _)| d as f64 / nf)),
        evo: mean_se(pairs.iter().map(|&(_, e)| e as f64 / nf)),
        diff: mean_se(pairs.iter().map(|&(d, e)| (e as f64 - d as f64) / nf)),
        pairs,
    })
}

/// Mean infected fraction over the large runs of a campaign, on a time grid
/// measured from the moment cumulative infections `I + R` first reach
/// `align_fraction · n` in each run. Aligning removes the random delay of
/// the early stochastic phase, which a deterministic limit cannot capture.
/// With `max_runs`, only the first that many large runs (in trial order)
/// are averaged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignedCurve {
    pub t: Vec<f64>,
    pub mean_infected: Vec<f64>,
    /// Large runs that entered the mean.
    pub runs: usize,
    pub trials: usize,
}

pub fn aligned_infected_curve(
    p: &EpidemicParams,
    n: usize,
    trials: usize,
    base_seed: u64,
    large_threshold: f64,
    align_fraction: f64,
    grid: &[f64],
    max_runs: Option<usize>,
) -> Result<AlignedCurve> {
    p.validate()?;
    if trials == 0 {
        return Err(Error::param("trials must be >= 1"));
    }
    let level = align_fraction * n as f64;
    let curves = (0..trials)
        .into_par_iter()
        .map(|i| {
            let o = run_single_trial(p, n, seed::derive(base_seed, i as u64), TrajectoryMode::EveryEvent)?;
            if (o.final_removed as f64) < large_threshold * n as f64 {
                return Ok(None);
            }
            let tr = &o.trajectory;
            let Some(start) = tr.iter().find(|s| (n - s.s) as f64 >= level).map(|s| s.t) else {
                return Ok(None);
            };
            let values = grid
                .iter()
                .map(|&g| {
                    let t = start + g;
                    let k = tr.partition_point(|s| s.t <= t);
                    tr[k.saturating_sub(1)].i as f64 / n as f64
                })
                .collect::<Vec<_>>();
            Ok(Some(values))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean = vec![0.0; grid.len()];
    let mut runs = 0;
    for c in curves.into_iter().flatten().take(max_runs.unwrap_or(usize::MAX)) {
        runs += 1;
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    if runs > 0 {
        mean.iter_mut().for_each(|m| *m /= runs as f64);
    }
    Ok(AlignedCurve {
        t: grid.to_vec(),
        mean_infected: mean,
        runs,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use InfectionModel::*;

    fn params(model: InfectionModel, variant: Variant, lambda: f64, rho: f64) -> EpidemicParams {
        EpidemicParams::new(5.0, lambda, rho, model, variant)
    }

    #[test]
    fn no_transmission_removes_only_the_seed() {
        for variant in [Variant::StaticSir, Variant::DelSir, Variant::EvoSir] {
            for model in [FixedUnitTime, ExponentialUnitMean] {
                let p = params(model, variant, 0.0, 2.0);
                let mut g = generate_er(2000, 5.0, &mut seed::rng(1)).unwrap();
                let o = run_epidemic(&p, &mut g, 3).unwrap();
                assert_eq!(o.final_removed, 1);
                assert_eq!(o.peak_infected, 1);
            }
        }
    }

    #[test]
    fn isolated_seed_stays_put() {
        let mut g = EvolvingGraph::empty(1);
        let p = params(FixedUnitTime, Variant::EvoSir, 3.0, 1.0);
        let o = run_epidemic(&p, &mut g, 0).unwrap();
        assert_eq!(o.final_removed, 1);
        assert_eq!(o.extinction_time, 1.0);
    }

    #[test]
    fn rejects_mismatched_population() {
        let mut g = EvolvingGraph::empty(10);
        let p = params(FixedUnitTime, Variant::DelSir, 1.0, 1.0).with_n(11);
        assert!(matches!(run_epidemic(&p, &mut g, 0), Err(Error::Param(_))));
        let mut empty = EvolvingGraph::empty(0);
        assert!(run_epidemic(&params(FixedUnitTime, Variant::DelSir, 1.0, 1.0), &mut empty, 0).is_err());
    }

    #[test]
    fn path_with_huge_rate_infects_everyone() {
        let mut g = EvolvingGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        let p = params(FixedUnitTime, Variant::StaticSir, 1e9, 0.0);
        let o = run_epidemic(&p, &mut g, 11).unwrap();
        assert_eq!(o.final_removed, 5);
    }

    #[test]
    fn deterministic_given_seeds() {
        let p = params(ExponentialUnitMean, Variant::EvoSir, 2.0, 4.0);
        let a = run_single_trial(&p, 3000, 77, TrajectoryMode::Auto).unwrap();
        let b = run_single_trial(&p, 3000, 77, TrajectoryMode::Auto).unwrap();
        assert_eq!(a, b);
        let c = run_single_trial(&p, 3000, 78, TrajectoryMode::Auto).unwrap();
        assert_ne!(a.trajectory, c.trajectory);
    }

    #[test]
    fn trajectory_is_consistent() {
        let p = params(ExponentialUnitMean, Variant::EvoSir, 2.0, 1.0);
        for trial in 0..20 {
            let o = run_single_trial(&p, 2000, trial, TrajectoryMode::Auto).unwrap();
            assert_eq!(o.trajectory[0], Sample { t: 0.0, s: 1999, i: 1, r: 0 });
            assert!(o.final_removed >= 1);
            for w in o.trajectory.windows(2) {
                assert!(w[1].t >= w[0].t);
                assert!(w[1].r >= w[0].r);
            }
            for s in &o.trajectory {
                assert_eq!(s.s + s.i + s.r, 2000);
            }
            let last = o.trajectory.last().unwrap();
            assert_eq!(last.i, 0);
            assert_eq!(last.r, o.final_removed);
            assert_eq!(o.peak_infected, o.trajectory.iter().map(|s| s.i).max().unwrap());
        }
    }

    #[test]
    fn grid_trajectory() {
        let p = params(FixedUnitTime, Variant::StaticSir, 1.0, 0.0);
        let o = run_single_trial(&p, 2000, 5, TrajectoryMode::Grid(0.25)).unwrap();
        let tr = &o.trajectory;
        for (k, s) in tr[..tr.len() - 1].iter().enumerate() {
            assert!((s.t - 0.25 * k as f64).abs() < 1e-12);
        }
        assert_eq!(tr.last().unwrap().t, o.extinction_time);
        let off = run_single_trial(&p, 2000, 5, TrajectoryMode::Off).unwrap();
        assert!(off.trajectory.is_empty());
        assert_eq!(off.final_removed, o.final_removed);
    }

    #[test]
    fn variants_coincide_without_removal() {
        let base = params(FixedUnitTime, Variant::DelSir, 1.2, 0.0);
        for trial in 0..10 {
            let d = run_single_trial(&base, 3000, trial, TrajectoryMode::Auto).unwrap();
            let e = run_single_trial(&EpidemicParams { variant: Variant::EvoSir, ..base }, 3000, trial, TrajectoryMode::Auto)
                .unwrap();
            let s = run_single_trial(
                &EpidemicParams { variant: Variant::StaticSir, rho: 3.0, ..base },
                3000,
                trial,
                TrajectoryMode::Auto,
            )
            .unwrap();
            assert_eq!(d, e);
            assert_eq!(d, s);
        }
    }

    #[test]
    fn static_edges_are_si_at_most_once() {
        for model in [FixedUnitTime, ExponentialUnitMean] {
            let p = params(model, Variant::StaticSir, 1.5, 0.0);
            for trial in 0..10 {
                let o = run_single_trial(&p, 3000, trial, TrajectoryMode::Off).unwrap();
                assert!(o.max_edge_episodes <= 1);
            }
        }
    }

    #[test]
    fn removal_events_are_counted_by_variant() {
        let del = params(ExponentialUnitMean, Variant::DelSir, 2.0, 4.0);
        let evo = EpidemicParams { variant: Variant::EvoSir, ..del };
        let cfg = TrialConfig::new(2000, 20, 9);
        let d = run_trials(&del, &cfg).unwrap();
        let e = run_trials(&evo, &cfg).unwrap();
        assert!(d.records.iter().all(|r| r.outcome.rewire_events == 0));
        assert!(e.records.iter().all(|r| r.outcome.delete_events == 0));
        assert!(d.records.iter().map(|r| r.outcome.delete_events).sum::<usize>() > 0);
        assert!(e.records.iter().map(|r| r.outcome.rewire_events).sum::<usize>() > 0);
    }

    #[test]
    fn single_trial_summary() {
        let p = params(ExponentialUnitMean, Variant::EvoSir, 2.0, 4.0);
        let mut cfg = TrialConfig::new(1000, 1, 4);
        cfg.large_threshold = Some(0.0);
        let rep = run_trials(&p, &cfg).unwrap();
        let f = rep.records[0].outcome.final_removed as f64 / 1000.0;
        assert_eq!(rep.summary.trials, 1);
        assert_eq!(rep.summary.large_count, 1);
        assert_eq!(rep.summary.final_fraction.mean, f);
        assert_eq!(rep.summary.large_final_fraction.mean, f);
        assert!(run_trials(&p, &TrialConfig::new(1000, 0, 4)).is_err());
    }

    #[test]
    fn aligned_curve_starts_at_the_alignment_level() {
        let p = params(ExponentialUnitMean, Variant::StaticSir, 2.0, 0.0);
        let grid = [-100.0, 0.0, 1.0, 1e6];
        let c = aligned_infected_curve(&p, 2000, 20, 3, 0.1, 0.01, &grid, None).unwrap();
        assert!(c.runs > 0 && c.runs <= 20);
        // Before any event only the seed is infected; long after, nobody is.
        assert!((c.mean_infected[0] - 1.0 / 2000.0).abs() < 1e-12);
        assert!(c.mean_infected[1] > 0.0 && c.mean_infected[1] <= 0.01 + 1e-12);
        assert_eq!(c.mean_infected[3], 0.0);
    }

    #[test]
    fn trial_csv_shape() {
        let p = params(FixedUnitTime, Variant::DelSir, 1.0, 4.0);
        let mut cfg = TrialConfig::new(500, 3, 1);
        cfg.trajectory = TrajectoryMode::EveryEvent;
        let rep = run_trials(&p, &cfg).unwrap();
        let mut buf = Vec::new();
        rep.write_trials_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], TRIAL_CSV_HEADER);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[1].contains(",fixed,del,"));
        let mut buf = Vec::new();
        rep.write_trajectories_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("trial,t,S,I,R\n0,0,499,1,0\n"));
    }
}
