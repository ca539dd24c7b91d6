use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Distribution of the time an individual stays infected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfectionModel {
    /// Every infection lasts exactly one time unit.
    FixedUnitTime,
    /// Infection durations are exponential with mean one.
    ExponentialUnitMean,
}

/// What happens to an S–I edge when its removal clock fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Plain SIR; the removal rate is ignored.
    StaticSir,
    /// The edge is deleted.
    DelSir,
    /// The susceptible endpoint reattaches to a uniformly random vertex.
    EvoSir,
}

impl fmt::Display for InfectionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InfectionModel::FixedUnitTime => "fixed",
            InfectionModel::ExponentialUnitMean => "exponential",
        })
    }
}

impl FromStr for InfectionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" | "fixed-unit-time" | "f" => Ok(InfectionModel::FixedUnitTime),
            "exponential" | "exp" | "exponential-unit-mean" | "e" => {
                Ok(InfectionModel::ExponentialUnitMean)
            }
            other => Err(Error::param(format!("unknown infection model `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::StaticSir => "static",
            Variant::DelSir => "del",
            Variant::EvoSir => "evo",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "static" | "sir" | "static-sir" => Ok(Variant::StaticSir),
            "del" | "delsir" | "del-sir" => Ok(Variant::DelSir),
            "evo" | "evosir" | "evo-sir" => Ok(Variant::EvoSir),
            other => Err(Error::param(format!("unknown variant `{other}`"))),
        }
    }
}

/// The single source of every rate used by the analytic, simulation and
/// ODE layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    /// Population size; absent for pure analytics.
    pub n: Option<usize>,
    /// Mean degree of the Erdős–Rényi graph.
    pub mu: f64,
    /// Infection rate along an S–I edge.
    pub lambda: f64,
    /// Deletion/rewiring rate of an S–I edge.
    pub rho: f64,
    pub infection_model: InfectionModel,
    pub variant: Variant,
}

impl EpidemicParams {
    pub fn new(
        mu: f64,
        lambda: f64,
        rho: f64,
        infection_model: InfectionModel,
        variant: Variant,
    ) -> Self {
        EpidemicParams {
            n: None,
            mu,
            lambda,
            rho,
            infection_model,
            variant,
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(Error::param(format!("mean degree must be > 0, got {}", self.mu)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::param(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return Err(Error::param(format!("rho must be >= 0, got {}", self.rho)));
        }
        Ok(())
    }

    /// The removal rate the dynamics actually use: StaticSIR ignores ρ.
    pub fn effective_rho(&self) -> f64 {
        match self.variant {
            Variant::StaticSir => 0.0,
            Variant::DelSir | Variant::EvoSir => self.rho,
        }
    }
}
