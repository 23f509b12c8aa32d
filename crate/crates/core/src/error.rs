use std::fmt;

use serde::Serialize;

/// Why a scenario admits no dimensioning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InfeasibilityKind {
    /// Accuracy target at or above the detector's asymptote.
    Accuracy,
    /// Deadline unreachable at any bandwidth or at the resource bounds.
    Deadline,
    /// Load cap and delay-violation target cannot be met together.
    Load,
    /// Compactification box too small for the scenario.
    Bounds,
}

impl fmt::Display for InfeasibilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InfeasibilityKind::Accuracy => "ACCURACY",
            InfeasibilityKind::Deadline => "DEADLINE",
            InfeasibilityKind::Load => "LOAD",
            InfeasibilityKind::Bounds => "BOUNDS",
        };
        f.write_str(s)
    }
}

/// Certificate attached to an infeasible verdict: the named constraint
/// that cannot be met and the quantities that show it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: InfeasibilityKind,
    pub constraint: String,
    pub detail: String,
    /// Normalized uplink burden at infinite bandwidth, when it could be computed.
    pub omega1: Option<f64>,
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.kind, self.constraint, self.detail)?;
        if let Some(o) = self.omega1 {
            write!(f, " [omega1 = {o:.6e}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error in {func}: {arg} = {value} ({reason})")]
    Domain {
        func: &'static str,
        arg: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("infeasible: {0}")]
    Infeasible(Box<Certificate>),

    #[error("solver stalled after {iterations} Newton steps (t = {barrier_t:.3e}, gap = {gap:.3e}): {detail}")]
    SolverStall {
        iterations: usize,
        barrier_t: f64,
        gap: f64,
        detail: String,
    },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("config error at key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(
        func: &'static str,
        arg: &'static str,
        value: f64,
        reason: &'static str,
    ) -> Self {
        Error::Domain {
            func,
            arg,
            value,
            reason,
        }
    }

    pub(crate) fn infeasible(
        kind: InfeasibilityKind,
        constraint: impl Into<String>,
        detail: impl Into<String>,
        omega1: Option<f64>,
    ) -> Self {
        Error::Infeasible(Box::new(Certificate {
            kind,
            constraint: constraint.into(),
            detail: detail.into(),
            omega1,
        }))
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Error::Infeasible(c) => Some(c),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
