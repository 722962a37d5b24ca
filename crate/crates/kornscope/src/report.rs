//! Shared result types: constant estimates and JSON certificate export.

use crate::Result;
use serde::Serialize;
use std::fmt;
use std::path::Path;

/// Which constant an estimate refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstantName {
    #[serde(rename = "K_p")]
    KornP,
    #[serde(rename = "K_hat_p")]
    KornHatP,
    #[serde(rename = "C_d")]
    DivergenceConstant,
    #[serde(rename = "beta_infsup")]
    BetaInfSup,
    #[serde(rename = "C_K_lower_from_end")]
    KornLowerFromEnd,
}

impl fmt::Display for ConstantName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstantName::KornP => "K_p",
            ConstantName::KornHatP => "K_hat_p",
            ConstantName::DivergenceConstant => "C_d",
            ConstantName::BetaInfSup => "beta_infsup",
            ConstantName::KornLowerFromEnd => "C_K_lower_from_end",
        };
        f.write_str(s)
    }
}

/// Direction in which the numeric value bounds the true constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Lower,
    Upper,
    TwoSided,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Bound::Lower => "lower",
            Bound::Upper => "upper",
            Bound::TwoSided => "two_sided",
        };
        f.write_str(s)
    }
}

/// One estimated constant. `resolution` is the grid spacing h the estimate
/// was computed at; `method` is a short tag naming the algorithm and its
/// norm convention.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantEstimate {
    pub name: ConstantName,
    pub p: f64,
    pub value: f64,
    pub bound: Bound,
    pub method: String,
    pub resolution: f64,
}

impl ConstantEstimate {
    pub fn new(
        name: ConstantName,
        p: f64,
        value: f64,
        bound: Bound,
        method: impl Into<String>,
        resolution: f64,
    ) -> ConstantEstimate {
        ConstantEstimate { name, p, value, bound, method: method.into(), resolution }
    }
}

/// Write any serializable report as pretty JSON, newline-terminated.
pub fn write_json<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| crate::Error::InvalidParameter(format!("serialize report: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
