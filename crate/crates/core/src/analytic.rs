//! Closed-form and fixed-point quantities: transmissibilities, critical
//! values, offspring generating functions, large-epidemic probabilities and
//! final sizes.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, bisect, bisect_expanding};
use crate::params::{EpidemicParams, InfectionModel, Variant};

/// Iteration budget for [`gf_fixed_point`].
pub const ITERATION_CAP: usize = 100_000;
/// Upper end of the bisection bracket for subunit fixed points.
const TOP: f64 = 1.0 - 1e-12;
/// Residual tolerance used by the high-level operations.
pub const GF_TOL: f64 = 1e-10;
/// Absolute tolerance of the quadrature inside the mixed-Poisson generating
/// function.
const QUAD_TOL: f64 = 1e-12;
const ROOT_XTOL: f64 = 1e-12;

/// P(infection crosses an S–I edge), no removal: `1-e^{-λ}` or `λ/(1+λ)`.
pub fn base_transmissibility(lambda: f64, model: InfectionModel) -> f64 {
    match model {
        InfectionModel::FixedUnitTime => -(-lambda).exp_m1(),
        InfectionModel::ExponentialUnitMean => lambda / (1.0 + lambda),
    }
}

/// P(infection crosses an S–I edge before recovery and before the edge is
/// removed at rate ρ).
pub fn removal_transmissibility(lambda: f64, rho: f64, model: InfectionModel) -> f64 {
    let total = lambda + rho;
    match model {
        InfectionModel::FixedUnitTime => {
            if total == 0.0 {
                0.0
            } else {
                lambda / total * -(-total).exp_m1()
            }
        }
        InfectionModel::ExponentialUnitMean => lambda / (total + 1.0),
    }
}

/// Transmissibility for `p`, with ρ ignored for StaticSIR.
pub fn transmissibility(p: &EpidemicParams) -> Result<f64> {
    p.validate()?;
    Ok(removal_transmissibility(p.lambda, p.effective_rho(), p.infection_model))
}

/// Probability that removal pre-empts an infection that would otherwise
/// have happened: `1 - τ_r/τ`.
pub fn rewiring_loss(lambda: f64, rho: f64, model: InfectionModel) -> f64 {
    match model {
        InfectionModel::ExponentialUnitMean => rho / (rho + 1.0 + lambda),
        InfectionModel::FixedUnitTime => {
            if rho == 0.0 {
                0.0
            } else if lambda == 0.0 {
                // λ → 0 limit of 1 − τ_r/τ.
                1.0 + (-rho).exp_m1() / rho
            } else {
                1.0 - removal_transmissibility(lambda, rho, model) / base_transmissibility(lambda, model)
            }
        }
    }
}

/// Infection rate at which `μ τ_r = 1`.
pub fn critical_lambda(mu: f64, rho: f64, model: InfectionModel) -> Result<f64> {
    if !(mu.is_finite() && rho.is_finite() && rho >= 0.0) {
        return Err(Error::param(format!("bad arguments mu={mu}, rho={rho}")));
    }
    if mu <= 1.0 {
        return Err(Error::NoEpidemic(format!(
            "mean degree {mu} <= 1: no infection rate gives a large epidemic"
        )));
    }
    match model {
        InfectionModel::ExponentialUnitMean => Ok((1.0 + rho) / (mu - 1.0)),
        InfectionModel::FixedUnitTime => bisect_expanding(
            |lambda| mu * removal_transmissibility(lambda, rho, model) - 1.0,
            0.0,
            1.0,
            ROOT_XTOL,
        ),
    }
}

/// Removal rate at which `μ τ_r = 1` for fixed λ.
pub fn critical_rho(mu: f64, lambda: f64, model: InfectionModel) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0 && lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param(format!("bad arguments mu={mu}, lambda={lambda}")));
    }
    let subcritical = || {
        Error::NoEpidemic(format!(
            "mu={mu}, lambda={lambda} is subcritical even without removal"
        ))
    };
    match model {
        InfectionModel::ExponentialUnitMean => {
            let rho_c = mu * lambda - lambda - 1.0;
            if rho_c < 0.0 {
                Err(subcritical())
            } else {
                Ok(rho_c)
            }
        }
        InfectionModel::FixedUnitTime => {
            let excess = mu * base_transmissibility(lambda, model) - 1.0;
            if excess < 0.0 {
                return Err(subcritical());
            }
            if excess == 0.0 {
                return Ok(0.0);
            }
            // μτ_r is decreasing in ρ; negate to get an increasing function.
            bisect_expanding(
                |rho| 1.0 - mu * removal_transmissibility(lambda, rho, model),
                0.0,
                1.0,
                ROOT_XTOL,
            )
        }
    }
}

/// Smallest fixed point of a probability generating function on `[0, 1]`.
///
/// Iterates `z ← G(z)` from 0, which increases monotonically to the
/// smallest fixed point. When the iteration contracts too slowly it falls
/// back to bisection on `G(z) − z` over `[z_k, 1 − 10⁻¹²]`. If there is no
/// sign change there the answer is 1.
///
/// Degenerate case: when every point is fixed (`G(z) = z`) the result is
/// 0, the smallest of them.
pub fn gf_fixed_point<G: Fn(f64) -> f64>(gf: G, tol: f64) -> Result<f64> {
    let h = |z: f64| gf(z) - z;
    let no_subunit_root = || h(TOP) >= 0.0;

    let mut z = 0.0;
    let mut prev = f64::INFINITY;
    for k in 0..ITERATION_CAP {
        let gz = gf(z);
        if !gz.is_finite() {
            return Err(Error::numeric("generating function returned a non-finite value", f64::NAN));
        }
        let res = (gz - z).abs();
        if res < tol {
            if z > 1.0 - 1e-6 && no_subunit_root() {
                return Ok(1.0);
            }
            return Ok(z);
        }
        if k >= 50 && res > 0.99 * prev {
            break;
        }
        prev = res;
        z = gz.clamp(0.0, 1.0);
    }

    if no_subunit_root() {
        return Ok(1.0);
    }
    let root = bisect(h, z.min(TOP), TOP, 1e-16)?;
    let res = h(root).abs();
    if res < tol {
        Ok(root)
    } else {
        Err(Error::numeric("fixed-point search did not converge", res))
    }
}

/// Offspring distribution of one infective in the branching approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffspringLaw {
    /// Poisson with the given mean.
    Poisson { mean: f64 },
    /// Poisson with mean `mu_r (1 − e^{−c T})`, T ~ Exp(1).
    MixedPoisson { mu_r: f64, c: f64 },
}

impl OffspringLaw {
    /// The law governing the early stage of an epidemic with parameters `p`.
    pub fn for_params(p: &EpidemicParams) -> Self {
        let rho = p.effective_rho();
        match p.infection_model {
            InfectionModel::FixedUnitTime => OffspringLaw::Poisson {
                mean: p.mu * removal_transmissibility(p.lambda, rho, p.infection_model),
            },
            InfectionModel::ExponentialUnitMean => {
                let c = p.lambda + rho;
                let mu_r = if c == 0.0 { 0.0 } else { p.mu * p.lambda / c };
                OffspringLaw::MixedPoisson { mu_r, c }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            OffspringLaw::Poisson { mean } => mean,
            OffspringLaw::MixedPoisson { mu_r, c } => mu_r * c / (c + 1.0),
        }
    }

    /// `E z^N`.
    ///
    /// The mixed case is `∫_0^∞ e^{-t} exp(−a(1 − e^{−ct})) dt` with
    /// `a = μ_r(1 − z)`; substituting `w = e^{−t}` gives a bounded
    /// integrand on `[0, 1]`.
    pub fn pgf(&self, z: f64) -> f64 {
        match *self {
            OffspringLaw::Poisson { mean } => (-mean * (1.0 - z)).exp(),
            OffspringLaw::MixedPoisson { mu_r, c } => {
                let a = mu_r * (1.0 - z);
                if a == 0.0 || c == 0.0 {
                    return 1.0;
                }
                1.0 + adaptive_simpson(|w| (-a * (1.0 - w.powf(c))).exp_m1(), 0.0, 1.0, QUAD_TOL)
            }
        }
    }

    /// Extinction probability of the branching process.
    pub fn extinction_probability(&self) -> Result<f64> {
        if self.mean() <= 1.0 {
            return Ok(1.0);
        }
        gf_fixed_point(|z| self.pgf(z), GF_TOL)
    }
}

/// Probability of a large epidemic, `1 − z₀` of the offspring generating
/// function. The same value holds for delSIR and evoSIR.
pub fn epidemic_probability(p: &EpidemicParams) -> Result<f64> {
    p.validate()?;
    Ok(1.0 - OffspringLaw::for_params(p).extinction_probability()?)
}

/// Fraction infected in a large epidemic for StaticSIR and delSIR: `1 − z₀`
/// for `z = exp(−μ τ_r (1 − z))`. For evoSIR parameters this is the delSIR
/// value, a lower bound; see [`evo_final_size_approx`].
pub fn final_size(p: &EpidemicParams) -> Result<f64> {
    p.validate()?;
    let m = p.mu * removal_transmissibility(p.lambda, p.effective_rho(), p.infection_model);
    Ok(1.0 - OffspringLaw::Poisson { mean: m }.extinction_probability()?)
}

/// Solution of the reduced exploration ODE with rewiring,
/// `du/ds = −u(A − Bu)`, `u(0) = 1`, where `A = τ[μ(1−α)+α]`, `B = τα`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewiringExploration {
    pub mu: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
}

impl RewiringExploration {
    pub fn new(mu: f64, tau: f64, alpha: f64) -> Self {
        RewiringExploration {
            mu,
            alpha,
            a: tau * (mu * (1.0 - alpha) + alpha),
            b: tau * alpha,
        }
    }

    /// Unexplored fraction after `s n` exploration steps.
    pub fn u(&self, s: f64) -> f64 {
        self.a / (self.b + (self.a - self.b) * (self.a * s).exp())
    }

    /// Mean degree of unexplored vertices, from the conserved combination
    /// `αu + (1−α)v = α + (1−α)μ`.
    pub fn v(&self, s: f64) -> f64 {
        self.mu + self.alpha * (1.0 - self.u(s)) / (1.0 - self.alpha)
    }

    /// Smallest `t > 0` with `u(t) = 1 − t`, or `None` when the initial
    /// slope `−(A − B)` is not steeper than −1.
    pub fn crossing(&self) -> Option<f64> {
        if self.a - self.b <= 1.0 {
            return None;
        }
        let g = |t: f64| self.u(t) - (1.0 - t);
        const GRID: usize = 4096;
        let mut lo = 0.0;
        let mut hi = None;
        for i in 1..=GRID {
            let t = i as f64 / GRID as f64;
            if g(t) >= 0.0 {
                hi = Some(t);
                break;
            }
            lo = t;
        }
        let hi = hi?;
        if lo == 0.0 {
            // Root below the first grid point: walk down to a negative value.
            let mut t = hi;
            for _ in 0..80 {
                t *= 0.5;
                if g(t) < 0.0 {
                    lo = t;
                    break;
                }
            }
            if lo == 0.0 {
                return Some(0.0);
            }
        }
        bisect(g, lo, hi, 1e-14).ok()
    }
}

/// Result of [`evo_final_size_approx`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvoApprox {
    pub fraction: f64,
    pub below_critical: bool,
}

/// Heuristic evoSIR final size: the crossing of the rewiring exploration
/// curve with the diagonal. Zero (flagged) at or below the critical value.
pub fn evo_final_size_approx(p: &EpidemicParams) -> Result<EvoApprox> {
    p.validate()?;
    let rho = p.effective_rho();
    let tau = base_transmissibility(p.lambda, p.infection_model);
    let alpha = rewiring_loss(p.lambda, rho, p.infection_model);
    let below = EvoApprox {
        fraction: 0.0,
        below_critical: true,
    };
    if p.mu * tau * (1.0 - alpha) <= 1.0 {
        return Ok(below);
    }
    Ok(match RewiringExploration::new(p.mu, tau, alpha).crossing() {
        Some(t) => EvoApprox {
            fraction: t,
            below_critical: false,
        },
        None => below,
    })
}

/// Branching approximation to R₀ on a graph with degree mean μ and
/// variance σ².
pub fn r0_branching(mu: f64, sigma2: f64, lambda: f64, rho: f64) -> Result<f64> {
    if !(mu > 0.0 && sigma2 >= 0.0 && lambda >= 0.0 && rho >= 0.0) {
        return Err(Error::param(format!(
            "need mu>0, sigma2>=0, lambda>=0, rho>=0; got {mu}, {sigma2}, {lambda}, {rho}"
        )));
    }
    Ok(lambda / (lambda + 1.0 + rho) * (mu - 1.0 + sigma2 / mu))
}

/// Everything the analytic layer predicts for one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticReport {
    pub mu: f64,
    pub lambda: f64,
    pub rho: f64,
    /// Transmissibility including removal.
    pub tau: f64,
    /// Probability removal pre-empts an infection.
    pub alpha: f64,
    /// `None` when μ ≤ 1.
    pub lambda_c: Option<f64>,
    pub z0: f64,
    pub p_large: f64,
    /// StaticSIR/delSIR final size.
    pub final_size: f64,
    /// Heuristic evoSIR final size; `None` except for evoSIR.
    pub evo_final_size_approx: Option<f64>,
}

impl AnalyticReport {
    pub fn compute(p: &EpidemicParams) -> Result<Self> {
        p.validate()?;
        let rho = p.effective_rho();
        let z0 = OffspringLaw::for_params(p).extinction_probability()?;
        let lambda_c = match critical_lambda(p.mu, rho, p.infection_model) {
            Ok(l) => Some(l),
            Err(Error::NoEpidemic(_)) => None,
            Err(e) => return Err(e),
        };
        let evo = match p.variant {
            Variant::EvoSir => Some(evo_final_size_approx(p)?.fraction),
            _ => None,
        };
        Ok(AnalyticReport {
            mu: p.mu,
            lambda: p.lambda,
            rho,
            tau: removal_transmissibility(p.lambda, rho, p.infection_model),
            alpha: rewiring_loss(p.lambda, rho, p.infection_model),
            lambda_c,
            z0,
            p_large: 1.0 - z0,
            final_size: final_size(p)?,
            evo_final_size_approx: evo,
        })
    }

    /// Flat `key → number` JSON object; missing values are `null`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report is plain data")
    }
}
