//! Bond percolation and the sequential exploration processes on implicit
//! Erdős–Rényi graphs.
//!
//! The explorations keep three sets: unexplored (U), active (A) and
//! explored (R). Each step explores one active vertex, so `R_t = t`. When
//! the active set is empty an unexplored vertex is moved into it first,
//! which is how a new component is started. Neighbours among the
//! unexplored vertices are revealed by a single binomial draw against
//! `U_t`, so no graph is ever materialised.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::EvolvingGraph;
use crate::seed;

/// Each edge survives independently with probability `tau`.
pub fn percolate<R: Rng + ?Sized>(g: &EvolvingGraph, tau: f64, rng: &mut R) -> Result<EvolvingGraph> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::param(format!("retention probability {tau} not in [0, 1]")));
    }
    let mut out = EvolvingGraph::empty(g.n());
    for (a, b) in g.edges() {
        if tau == 1.0 || rng.random::<f64>() < tau {
            out.add_edge(a, b)?;
        }
    }
    Ok(out)
}

/// Size of the component containing a uniformly random vertex.
pub fn cluster_size_of_random_vertex<R: Rng + ?Sized>(g: &EvolvingGraph, rng: &mut R) -> Result<usize> {
    if g.n() == 0 {
        return Err(Error::param("graph has no vertices"));
    }
    Ok(g.component_size_of(rng.random_range(0..g.n())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExplorationVariant {
    FixedThinned,
    ExponentialPerVertex,
    RewiringAugmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    /// First `t > √n` at which the active set is empty.
    #[default]
    Default,
    /// First `t > m` at which the active set is empty.
    EmptyAfter(usize),
    /// Run until every vertex is explored.
    Full,
}

impl StopRule {
    fn threshold(self, n: usize) -> Option<usize> {
        match self {
            StopRule::Default => Some((n as f64).sqrt().floor() as usize),
            StopRule::EmptyAfter(m) => Some(m),
            StopRule::Full => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplorationTrace {
    pub variant: ExplorationVariant,
    pub n: usize,
    /// `U_t` for `t = 0..=stop`.
    pub u: Vec<usize>,
    /// `A_t` for `t = 0..=stop`.
    pub a: Vec<usize>,
    /// Mean weight of the unexplored vertices (rewiring variant only).
    pub v: Option<Vec<f64>>,
    /// Steps `t ≥ 1` with `A_t = 0`.
    pub a_zero_times: Vec<usize>,
}

impl ExplorationTrace {
    pub fn stop(&self) -> usize {
        self.u.len() - 1
    }

    pub fn u_series(&self) -> Vec<f64> {
        self.u.iter().map(|&x| x as f64 / self.n as f64).collect()
    }

    pub fn r_series(&self) -> Vec<f64> {
        (0..self.u.len()).map(|t| t as f64 / self.n as f64).collect()
    }

    /// Fraction explored when the trace stopped.
    pub fn crossing(&self) -> f64 {
        self.stop() as f64 / self.n as f64
    }

    /// `max_t |U_t/n − f(t/n)|` over the traced steps.
    pub fn sup_deviation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let nf = self.n as f64;
        self.u
            .iter()
            .enumerate()
            .map(|(t, &u)| (u as f64 / nf - f(t as f64 / nf)).abs())
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "step,U,A,R,v")?;
        }
        for t in 0..self.u.len() {
            match &self.v {
                Some(v) => writeln!(out, "{},{},{},{},{}", t, self.u[t], self.a[t], t, v[t])?,
                None => writeln!(out, "{},{},{},{},", t, self.u[t], self.a[t], t)?,
            }
        }
        Ok(())
    }
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, trials: usize, p: f64) -> usize {
    if trials == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return trials;
    }
    Binomial::new(trials as u64, p)
        .expect("probability checked above")
        .sample(rng) as usize
}

struct Walk {
    n: usize,
    u: usize,
    a: usize,
    t: usize,
    stop_after: Option<usize>,
    trace: ExplorationTrace,
}

impl Walk {
    fn new(n: usize, variant: ExplorationVariant, stop: StopRule) -> Self {
        let mut trace = ExplorationTrace {
            variant,
            n,
            u: Vec::with_capacity(n + 1),
            a: Vec::with_capacity(n + 1),
            v: None,
            a_zero_times: Vec::new(),
        };
        trace.u.push(n);
        trace.a.push(0);
        Walk {
            n,
            u: n,
            a: 0,
            t: 0,
            stop_after: stop.threshold(n),
            trace,
        }
    }

    fn running(&self) -> bool {
        self.t < self.n
    }

    /// Ensures there is an active vertex to explore; true if one had to be
    /// drawn from the unexplored set.
    fn restart_if_empty(&mut self) -> bool {
        if self.a == 0 {
            self.u -= 1;
            self.a = 1;
            true
        } else {
            false
        }
    }

    /// Finishes a step in which `found` unexplored vertices became active.
    /// Returns false once the stop rule fires.
    fn advance(&mut self, found: usize) -> bool {
        self.u -= found;
        self.a = self.a + found - 1;
        self.t += 1;
        assert_eq!(self.u + self.a + self.t, self.n, "exploration lost mass");
        self.trace.u.push(self.u);
        self.trace.a.push(self.a);
        if self.a == 0 {
            self.trace.a_zero_times.push(self.t);
            if let Some(m) = self.stop_after {
                if self.t > m {
                    return false;
                }
            }
        }
        true
    }
}

/// Exploration of an implicit G(n, μ̄/n).
pub fn explore_fixed(n: usize, mu_bar: f64, seed: u64, stop: StopRule) -> Result<ExplorationTrace> {
    check_n(n)?;
    if !(mu_bar >= 0.0 && mu_bar.is_finite()) {
        return Err(Error::param(format!("mean degree {mu_bar} must be finite and >= 0")));
    }
    let p = mu_bar / n as f64;
    let mut rng = seed::rng(seed);
    let mut w = Walk::new(n, ExplorationVariant::FixedThinned, stop);
    while w.running() {
        w.restart_if_empty();
        let found = binomial(&mut rng, w.u, p);
        if !w.advance(found) {
            break;
        }
    }
    Ok(w.trace)
}

/// Exploration in which every explored vertex draws its own infectious
/// period `T ~ Exp(1)` and reaches each unexplored vertex with probability
/// `μ(1 − e^{−λT})/n`.
pub fn explore_exponential(n: usize, mu: f64, lambda: f64, seed: u64, stop: StopRule) -> Result<ExplorationTrace> {
    check_n(n)?;
    if !(mu > 0.0 && mu.is_finite()) || !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("need mu > 0 and lambda >= 0, got {mu}, {lambda}")));
    }
    let mut rng = seed::rng(seed);
    let mut w = Walk::new(n, ExplorationVariant::ExponentialPerVertex, stop);
    while w.running() {
        w.restart_if_empty();
        let period: f64 = rng.sample(Exp1);
        let tau = -(-lambda * period).exp_m1();
        let found = binomial(&mut rng, w.u, mu * tau / n as f64);
        if !w.advance(found) {
            break;
        }
    }
    Ok(w.trace)
}

/// Exploration with rewiring. Unexplored vertices are grouped by the number
/// `j` of edges they have gained through rewiring; a vertex in class `j` is
/// reached with probability `(μ + j)/n`. Each contact infects with
/// probability `τ(1 − α)`, is rewired with probability `τα`, and lapses
/// otherwise. A rewired edge lands on an unexplored vertex with probability
/// `U/n` and promotes that vertex one class up.
pub fn explore_rewiring(
    n: usize,
    mu: f64,
    tau: f64,
    alpha: f64,
    seed: u64,
    stop: StopRule,
) -> Result<ExplorationTrace> {
    check_n(n)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param(format!("mean degree {mu} must be > 0")));
    }
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::param(format!("tau {tau} not in (0, 1]")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::param(format!("alpha {alpha} not in [0, 1)")));
    }
    let nf = n as f64;
    let p_inf = tau * (1.0 - alpha);
    // Rewire probability conditional on not infecting.
    let p_rew = if p_inf < 1.0 { tau * alpha / (1.0 - p_inf) } else { 0.0 };
    let mut rng = seed::rng(seed);
    let mut w = Walk::new(n, ExplorationVariant::RewiringAugmented, stop);
    let mut classes: Vec<usize> = vec![n];
    // Σ_j j·U_j
    let mut extra: usize = 0;
    let mut v_series = Vec::with_capacity(n + 1);
    v_series.push(mu);
    while w.running() {
        if w.restart_if_empty() {
            let j = pick_class(&classes, w.u + 1, &mut rng);
            classes[j] -= 1;
            extra -= j;
        }
        let mut found = 0;
        let mut rewires = 0;
        for j in 0..classes.len() {
            let contacts = binomial(&mut rng, classes[j], (mu + j as f64) / nf);
            let infected = binomial(&mut rng, contacts, p_inf);
            rewires += binomial(&mut rng, contacts - infected, p_rew);
            classes[j] -= infected;
            extra -= j * infected;
            found += infected;
        }
        let remaining = w.u - found;
        for _ in 0..rewires {
            if remaining == 0 || rng.random::<f64>() * nf >= remaining as f64 {
                continue;
            }
            let j = pick_class(&classes, remaining, &mut rng);
            classes[j] -= 1;
            if j + 1 == classes.len() {
                classes.push(0);
            }
            classes[j + 1] += 1;
            extra += 1;
        }
        let keep_going = w.advance(found);
        v_series.push(if w.u == 0 { mu } else { mu + extra as f64 / w.u as f64 });
        if !keep_going {
            break;
        }
    }
    let mut trace = w.trace;
    trace.v = Some(v_series);
    Ok(trace)
}

/// Class of a uniformly random unexplored vertex.
fn pick_class<R: Rng + ?Sized>(classes: &[usize], total: usize, rng: &mut R) -> usize {
    let mut k = rng.random_range(0..total);
    for (j, &c) in classes.iter().enumerate() {
        if k < c {
            return j;
        }
        k -= c;
    }
    unreachable!("class counts do not add up to {total}")
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::param("n must be >= 1"))
    } else {
        Ok(())
    }
}
