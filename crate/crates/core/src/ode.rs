//! Deterministic limits: homogeneous mixing, the susceptible-class system
//! on Erdős–Rényi graphs (with and without rewiring), the Miller–Volz
//! edge-based equation, and the exploration pair for rewiring.
//!
//! Everything is integrated with fixed-step RK4. Compartment counts in the
//! class system are in units of individuals (they sum to `n`); Miller–Volz
//! works with fractions.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::Rk4;
use crate::params::{EpidemicParams, InfectionModel};

pub const DEFAULT_DT: f64 = 1e-3;
/// Relative conservation tolerance, as a fraction of the population.
pub const CONSERVATION_TOL: f64 = 1e-6;
/// Largest tolerated negative excursion, as a fraction of the population.
pub const NEGATIVITY_TOL: f64 = 1e-9;
/// Mass allowed in the top susceptible class, as a fraction of n.
pub const TAIL_TOL: f64 = 1e-8;
/// Trajectories are sampled at most this often.
pub const SAMPLE_DT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeSample {
    pub t: f64,
    pub s: f64,
    pub i: f64,
    pub r: f64,
    /// μ_t or θ, depending on the system.
    pub extra: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeTrajectory {
    /// Column name of [`OdeSample::extra`], if the system has one.
    pub extra_name: Option<&'static str>,
    pub samples: Vec<OdeSample>,
}

impl OdeTrajectory {
    pub fn last(&self) -> &OdeSample {
        self.samples.last().expect("trajectories always hold the initial state")
    }

    /// First time at which `f` reaches `level`, interpolated linearly
    /// between samples.
    pub fn first_time<F: Fn(&OdeSample) -> f64>(&self, f: F, level: f64) -> Option<f64> {
        let first = self.samples.first()?;
        if f(first) >= level {
            return Some(first.t);
        }
        self.samples.windows(2).find_map(|w| {
            let (a, b) = (f(&w[0]), f(&w[1]));
            (b >= level).then(|| w[0].t + (w[1].t - w[0].t) * (level - a) / (b - a))
        })
    }

    /// State at time `t`, interpolated linearly; clamps outside the range.
    pub fn at(&self, t: f64) -> OdeSample {
        let s = &self.samples;
        let k = s.partition_point(|x| x.t <= t);
        if k == 0 {
            return s[0];
        }
        if k == s.len() {
            return s[k - 1];
        }
        let (a, b) = (&s[k - 1], &s[k]);
        let w = (t - a.t) / (b.t - a.t);
        let lerp = |x: f64, y: f64| x + w * (y - x);
        OdeSample {
            t,
            s: lerp(a.s, b.s),
            i: lerp(a.i, b.i),
            r: lerp(a.r, b.r),
            extra: a.extra.zip(b.extra).map(|(x, y)| lerp(x, y)),
        }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W, header: bool) -> Result<()> {
        if header {
            match self.extra_name {
                Some(x) => writeln!(out, "t,S,I,R,{x}")?,
                None => writeln!(out, "t,S,I,R")?,
            }
        }
        for s in &self.samples {
            match s.extra {
                Some(x) => writeln!(out, "{},{},{},{},{}", s.t, s.s, s.i, s.r, x)?,
                None => writeln!(out, "{},{},{},{}", s.t, s.s, s.i, s.r)?,
            }
        }
        Ok(())
    }
}

fn check_step(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::param(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param(format!("t_end must be finite and >= 0, got {t_end}")));
    }
    Ok((t_end / dt).round() as usize)
}

fn stride(dt: f64) -> usize {
    ((SAMPLE_DT / dt).round() as usize).max(1)
}

/// `dS/dt = −βSI/n`, `dI/dt = βSI/n − I`, `dR/dt = I`, started from
/// `(n − i0, i0, 0)`.
pub fn integrate_homogeneous(beta: f64, n: f64, i0: f64, t_end: f64, dt: f64) -> Result<OdeTrajectory> {
    let steps = check_step(dt, t_end)?;
    if !(beta >= 0.0) || !(n > 0.0) || !(i0 > 0.0 && i0 <= n) {
        return Err(Error::param(format!("need beta >= 0, n > 0, 0 < i0 <= n; got {beta}, {n}, {i0}")));
    }
    let mut y = [n - i0, i0, 0.0];
    let mut rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
        let inf = beta * y[0] * y[1] / n;
        d[0] = -inf;
        d[1] = inf - y[1];
        d[2] = y[1];
    };
    let sample = |t: f64, y: &[f64]| OdeSample { t, s: y[0], i: y[1], r: y[2], extra: None };
    let mut rk = Rk4::new(3);
    let every = stride(dt);
    let mut samples = vec![sample(0.0, &y)];
    for k in 1..=steps {
        rk.step(&mut rhs, (k - 1) as f64 * dt, &mut y, dt);
        let drift = (y.iter().sum::<f64>() - n).abs();
        if drift > CONSERVATION_TOL * n {
            return Err(Error::numeric(format!("conservation drift at step {k}; reduce dt"), drift));
        }
        if k % every == 0 || k == steps {
            samples.push(sample(k as f64 * dt, &y));
        }
    }
    Ok(OdeTrajectory { extra_name: None, samples })
}

/// State of the susceptible-class system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeState {
    /// `S_k`: susceptibles with `k` infected neighbours, `k = 0..=k_max`.
    pub s_hist: Vec<f64>,
    pub i: f64,
    pub r: f64,
    /// Tracked `Σ k S_k`.
    pub f: f64,
    pub mu_t: Option<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkRun {
    pub trajectory: OdeTrajectory,
    pub final_state: OdeState,
    /// `max_t |Σ S_k + I + R − n|`
    pub max_conservation_error: f64,
    /// `max_t |F − Σ k S_k|`
    pub max_f_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkOptions {
    /// Initial infecteds; default `10⁻⁴ n`.
    pub i0: Option<f64>,
    /// Largest class; default `⌈8μ⌉`.
    pub k_max: Option<usize>,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for SkOptions {
    fn default() -> Self {
        SkOptions { i0: None, k_max: None, dt: DEFAULT_DT, t_end: 30.0 }
    }
}

/// The susceptible-class system on G(n, μ/n) with exponential infectious
/// periods. Requires `p.n` and no removal clock.
pub fn integrate_sk(p: &EpidemicParams, opts: &SkOptions) -> Result<SkRun> {
    if p.effective_rho() > 0.0 {
        return Err(Error::param("integrate_sk has no removal clock; use integrate_sk_rewire"));
    }
    sk_system(p, opts, false)
}

/// The class system with rewiring: S–I edges break at rate ρ, a rewired
/// edge that lands on an infective keeps its class, and the mean degree of
/// susceptibles `μ_t` grows as rewired edges land on them.
pub fn integrate_sk_rewire(p: &EpidemicParams, opts: &SkOptions) -> Result<SkRun> {
    sk_system(p, opts, true)
}

fn sk_system(p: &EpidemicParams, opts: &SkOptions, rewire: bool) -> Result<SkRun> {
    p.validate()?;
    if p.infection_model != InfectionModel::ExponentialUnitMean {
        return Err(Error::param("the class system assumes exponential infectious periods"));
    }
    let n = p.n.ok_or_else(|| Error::param("the class system needs a population size n"))? as f64;
    let steps = check_step(opts.dt, opts.t_end)?;
    let i0 = opts.i0.unwrap_or(1e-4 * n);
    let (mu, lambda) = (p.mu, p.lambda);
    let rho = if rewire { p.effective_rho() } else { 0.0 };
    if !(i0 > 0.0 && i0 + mu * i0 <= n) {
        return Err(Error::param(format!("initial infecteds {i0} out of range for n={n}")));
    }
    let kmax = opts.k_max.unwrap_or((8.0 * mu).ceil() as usize).max(2);

    // Layout: S_0..=S_kmax, I, R, F, μ_t.
    let (ii, ri, fi, mi) = (kmax + 1, kmax + 2, kmax + 3, kmax + 4);
    let dim = kmax + 5;
    let mut y = vec![0.0; dim];
    y[1] = mu * i0;
    y[0] = n - i0 - y[1];
    y[ii] = i0;
    y[fi] = y[1];
    y[mi] = mu;

    let mut rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
        let f: f64 = (1..=kmax).map(|k| k as f64 * y[k]).sum();
        let mu_t = y[mi];
        let promote = lambda * f * mu_t / n;
        let demote = 1.0 + rho * (1.0 - y[ii] / n);
        let mut df = 0.0;
        for k in 0..=kmax {
            let kf = k as f64;
            let mut dk = -(lambda + demote) * kf * y[k];
            if k > 0 {
                dk += promote * y[k - 1];
            }
            if k < kmax {
                dk -= promote * y[k];
                dk += demote * (kf + 1.0) * y[k + 1];
            }
            d[k] = dk;
            df += kf * dk;
        }
        d[ii] = lambda * f - y[ii];
        d[ri] = y[ii];
        d[fi] = df;
        d[mi] = rho * f / n * (1.0 - (y[ii] + y[ri]) / n);
    };

    let state = |t: f64, y: &[f64]| OdeState {
        s_hist: y[..=kmax].to_vec(),
        i: y[ii],
        r: y[ri],
        f: y[fi],
        mu_t: rewire.then_some(y[mi]),
        t,
    };
    let sample = |t: f64, y: &[f64]| OdeSample {
        t,
        s: y[..=kmax].iter().sum(),
        i: y[ii],
        r: y[ri],
        extra: rewire.then_some(y[mi]),
    };

    let mut rk = Rk4::new(dim);
    let every = stride(opts.dt);
    let mut samples = vec![sample(0.0, &y)];
    let mut max_cons: f64 = 0.0;
    let mut max_f: f64 = 0.0;
    for k in 1..=steps {
        rk.step(&mut rhs, (k - 1) as f64 * opts.dt, &mut y, opts.dt);
        let total: f64 = y[..=ri].iter().sum();
        let cons = (total - n).abs();
        max_cons = max_cons.max(cons);
        if cons > CONSERVATION_TOL * n {
            return Err(Error::numeric(format!("conservation drift at t={}; reduce dt", k as f64 * opts.dt), cons));
        }
        let f: f64 = (1..=kmax).map(|j| j as f64 * y[j]).sum();
        max_f = max_f.max((f - y[fi]).abs());
        if y[kmax] > TAIL_TOL * n {
            return Err(Error::numeric(
                format!("mass {:.3e} reached the top class k_max={kmax}; increase k_max", y[kmax]),
                y[kmax],
            ));
        }
        if let Some(bad) = y[..=ri].iter().position(|&v| v < -NEGATIVITY_TOL * n) {
            return Err(Error::numeric(format!("component {bad} went negative; reduce dt"), y[bad]));
        }
        if k % every == 0 || k == steps {
            samples.push(sample(k as f64 * opts.dt, &y));
        }
    }
    Ok(SkRun {
        trajectory: OdeTrajectory {
            extra_name: rewire.then_some("mu_t"),
            samples,
        },
        final_state: state(steps as f64 * opts.dt, &y),
        max_conservation_error: max_cons,
        max_f_error: max_f,
    })
}

/// Probability generating function of a degree law.
pub trait DegreePgf {
    fn psi(&self, x: f64) -> f64;
    fn dpsi(&self, x: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonPgf {
    pub mu: f64,
}

impl DegreePgf for PoissonPgf {
    fn psi(&self, x: f64) -> f64 {
        (-self.mu * (1.0 - x)).exp()
    }

    fn dpsi(&self, x: f64) -> f64 {
        self.mu * self.psi(x)
    }
}

/// Edge-based Miller–Volz equation,
/// `dθ/dt = −βθ + β(1−ε)ψ'(θ)/ψ'(1) + γ(1−θ)`, with `θ(0) = 1`,
/// `S = (1−ε)ψ(θ)`, `dR/dt = γI`, `I = 1 − S − R` and `I(0) = ε`.
/// Samples carry θ in the extra column.
pub fn integrate_miller_volz<P: DegreePgf>(
    beta: f64,
    gamma: f64,
    psi: &P,
    eps: f64,
    dt: f64,
    t_end: f64,
) -> Result<OdeTrajectory> {
    let steps = check_step(dt, t_end)?;
    if !(beta >= 0.0 && gamma > 0.0) {
        return Err(Error::param(format!("need beta >= 0 and gamma > 0, got {beta}, {gamma}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(format!("initial infected fraction {eps} not in (0, 1)")));
    }
    let d1 = psi.dpsi(1.0);
    if !(d1 > 0.0) {
        return Err(Error::param("degree law must have positive mean"));
    }
    let sus = |theta: f64| (1.0 - eps) * psi.psi(theta);
    // State: θ, R.
    let mut y = [1.0, 0.0];
    let mut rhs = |_t: f64, y: &[f64], d: &mut [f64]| {
        let theta = y[0];
        d[0] = -beta * theta + beta * (1.0 - eps) * psi.dpsi(theta) / d1 + gamma * (1.0 - theta);
        d[1] = gamma * (1.0 - sus(theta) - y[1]);
    };
    let sample = |t: f64, y: &[f64]| {
        let s = sus(y[0]);
        OdeSample { t, s, i: 1.0 - s - y[1], r: y[1], extra: Some(y[0]) }
    };
    let mut rk = Rk4::new(2);
    let every = stride(dt);
    let mut samples = vec![sample(0.0, &y)];
    let mut prev_theta = 1.0;
    for k in 1..=steps {
        rk.step(&mut rhs, (k - 1) as f64 * dt, &mut y, dt);
        let theta = y[0];
        if !(theta > 0.0 && theta <= 1.0 + 1e-12) || theta > prev_theta + 1e-12 {
            return Err(Error::numeric(format!("theta left (0, 1] or increased at step {k}"), theta));
        }
        prev_theta = theta;
        if k % every == 0 || k == steps {
            samples.push(sample(k as f64 * dt, &y));
        }
    }
    Ok(OdeTrajectory { extra_name: Some("theta"), samples })
}

/// `(s, u(s), v(s))` on a uniform grid of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlPair {
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl MlPair {
    pub fn write_csv<W: Write>(&self, out: &mut W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "s,u,v")?;
        }
        for k in 0..self.s.len() {
            writeln!(out, "{},{},{}", self.s[k], self.u[k], self.v[k])?;
        }
        Ok(())
    }
}

/// RK4 on `du/ds = −vτu(1−α)`, `dv/ds = vτuα` from `(1, μ)` over `[0, 1]`.
pub fn integrate_ml_pair(mu: f64, tau: f64, alpha: f64, dt: f64) -> Result<MlPair> {
    let steps = check_step(dt, 1.0)?;
    if !(mu > 0.0) || !(0.0..=1.0).contains(&tau) || !(0.0..1.0).contains(&alpha) {
        return Err(Error::param(format!("need mu > 0, tau in [0,1], alpha in [0,1); got {mu}, {tau}, {alpha}")));
    }
    let mut y = [1.0, mu];
    let mut rhs = |_s: f64, y: &[f64], d: &mut [f64]| {
        let flow = y[1] * tau * y[0];
        d[0] = -flow * (1.0 - alpha);
        d[1] = flow * alpha;
    };
    let mut rk = Rk4::new(2);
    let mut out = MlPair {
        s: vec![0.0],
        u: vec![1.0],
        v: vec![mu],
    };
    for k in 1..=steps {
        rk.step(&mut rhs, (k - 1) as f64 * dt, &mut y, dt);
        out.s.push(k as f64 * dt);
        out.u.push(y[0]);
        out.v.push(y[1]);
    }
    Ok(out)
}
