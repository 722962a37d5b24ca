//! One-shot analyses over a rasterized domain, each producing exactly one
//! result row keyed by (domain, parameters, resolution, constant).
//!
//! This is the shared middle layer between the command line and the sweep
//! runner: both funnel through `run_analysis` so a constant is computed
//! the same way no matter how it was requested. Failures never abort a
//! batch; they become marker rows with a NaN value and the error message
//! in the method column.

use serde::{Deserialize, Serialize};

use crate::distance::DistanceField;
use crate::diveq::{default_test_load, infsup_constant, solve_divergence};
use crate::domain::RasterDomain;
use crate::duality::duality_cross_check;
use crate::generate::DomainSpec;
use crate::grid::Cell;
use crate::john::{end_measure_ratio, john_constant_direct, EndVerdict};
use crate::korn::{estimate_korn, KornMode};
use crate::separation::check_separation_property;
use crate::whitney::{verify_whitney_invariants, whitney_decompose};
use crate::Result;

/// Default sampling budget for curve and ball analyses.
pub const DEFAULT_BUDGET: usize = 1024;

/// Ball-factor ladder tried in ascending order for certificates.
pub const CS_LADDER: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// What to compute. Exponents ride along for the Korn and divergence
/// families, so each kind maps to exactly one constant column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AnalysisKind {
    Whitney,
    Separation,
    John,
    EndMeasure,
    Korn { p: f64 },
    KornHat { p: f64 },
    Divergence { p: f64 },
    InfSup,
    Duality,
}

impl AnalysisKind {
    /// Parse a config token like `korn(2)` or `end-measure`.
    pub fn parse(token: &str) -> Result<Self> {
        let t = token.trim();
        let (name, arg) = match t.find('(') {
            Some(i) if t.ends_with(')') => (&t[..i], Some(&t[i + 1..t.len() - 1])),
            Some(_) => {
                return Err(crate::Error::InvalidParameter(format!(
                    "unbalanced parentheses in analysis token {t:?}"
                )))
            }
            None => (t, None),
        };
        let p = |arg: Option<&str>| -> Result<f64> {
            let a = arg.ok_or_else(|| {
                crate::Error::InvalidParameter(format!("analysis {name:?} needs an exponent"))
            })?;
            let v: f64 = a.trim().parse().map_err(|_| {
                crate::Error::InvalidParameter(format!("bad exponent {a:?} in {t:?}"))
            })?;
            if !(v.is_finite() && v > 1.0) {
                return Err(crate::Error::InvalidParameter(format!(
                    "exponent must lie in (1, inf), got {v}"
                )));
            }
            Ok(v)
        };
        match name {
            "whitney" => Ok(AnalysisKind::Whitney),
            "separation" => Ok(AnalysisKind::Separation),
            "john" => Ok(AnalysisKind::John),
            "end-measure" | "end_measure" => Ok(AnalysisKind::EndMeasure),
            "korn" => Ok(AnalysisKind::Korn { p: p(arg)? }),
            "khat" | "korn_hat" => Ok(AnalysisKind::KornHat { p: p(arg)? }),
            "divergence" | "div" => Ok(AnalysisKind::Divergence { p: p(arg)? }),
            "infsup" => Ok(AnalysisKind::InfSup),
            "duality" => Ok(AnalysisKind::Duality),
            other => Err(crate::Error::InvalidParameter(format!(
                "unknown analysis {other:?}"
            ))),
        }
    }

    /// The constant column this analysis fills.
    pub fn constant_label(&self) -> String {
        match self {
            AnalysisKind::Whitney => "whitney_violations".into(),
            AnalysisKind::Separation => "C_s_certified".into(),
            AnalysisKind::John => "C_J_lower".into(),
            AnalysisKind::EndMeasure => "end_ratio_max".into(),
            AnalysisKind::Korn { p } => format!("K_{p}"),
            AnalysisKind::KornHat { p } => format!("K_hat_{p}"),
            AnalysisKind::Divergence { p } => format!("C_d_{p}"),
            AnalysisKind::InfSup => "beta_infsup".into(),
            AnalysisKind::Duality => "duality_margin".into(),
        }
    }
}

/// Options shared by all analyses in one invocation.
#[derive(Debug, Clone)]
pub struct AnalysisContext {
    /// Override for the ball-factor ladder (a single factor when set).
    pub cs: Option<f64>,
    /// Base cell override; the deepest cell when unset.
    pub x0: Option<Cell>,
    pub budget: usize,
    pub seed: u64,
}

impl Default for AnalysisContext {
    fn default() -> Self {
        AnalysisContext { cs: None, x0: None, budget: DEFAULT_BUDGET, seed: 0 }
    }
}

/// One CSV row. `wall_ms` stays empty unless timings were requested, so
/// output bytes do not depend on machine speed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub domain: String,
    pub parameters: String,
    pub resolution: usize,
    pub constant: String,
    pub value: f64,
    pub bound: String,
    pub method: String,
    pub wall_ms: Option<u64>,
}

impl ResultRow {
    /// Resume and sort key.
    pub fn key(&self) -> (String, String, usize, String) {
        (
            self.domain.clone(),
            self.parameters.clone(),
            self.resolution,
            self.constant.clone(),
        )
    }
}

/// Split a canonical spec id like `rooms(neck=0.25,count=4)` into the
/// family name and the parameter string.
pub fn split_id(id: &str) -> (String, String) {
    match id.find('(') {
        Some(i) if id.ends_with(')') => (id[..i].to_string(), id[i + 1..id.len() - 1].to_string()),
        _ => (id.to_string(), String::new()),
    }
}

/// Identity columns of a row: where the domain came from.
#[derive(Debug, Clone)]
pub struct RowIdent {
    pub domain: String,
    pub parameters: String,
    pub resolution: usize,
}

impl RowIdent {
    pub fn from_spec(spec: &DomainSpec, resolution: usize) -> Self {
        let (domain, parameters) = split_id(&spec.id());
        RowIdent { domain, parameters, resolution }
    }

    /// Identity for a domain loaded from a file: the file stem names it
    /// and the resolution is recovered from the grid spacing.
    pub fn from_file(path: &std::path::Path, h: f64) -> Self {
        let domain = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "domain".to_string());
        RowIdent {
            domain,
            parameters: String::new(),
            resolution: (1.0 / h).round() as usize,
        }
    }
}

fn ladder(ctx: &AnalysisContext) -> Vec<f64> {
    match ctx.cs {
        Some(c) => vec![c],
        None => CS_LADDER.to_vec(),
    }
}

/// Run one analysis and shape its headline number into a row.
pub fn run_analysis(
    ident: &RowIdent,
    domain: &RasterDomain,
    kind: &AnalysisKind,
    ctx: &AnalysisContext,
) -> Result<ResultRow> {
    let (value, bound, method) = match kind {
        AnalysisKind::Whitney => {
            let dist = DistanceField::compute(domain)?;
            let dec = whitney_decompose(domain, &dist);
            let rep = verify_whitney_invariants(domain, &dist, &dec);
            (
                rep.violations.len() as f64,
                "two_sided".to_string(),
                format!(
                    "dyadic-decomposition(cubes={},saturated={})",
                    rep.cube_count, rep.saturated_count
                ),
            )
        }
        AnalysisKind::Separation => {
            let dist = DistanceField::compute(domain)?;
            let steps = ladder(ctx);
            let mut found: Option<(f64, usize)> = None;
            let mut last_violations = 0usize;
            for &cs in &steps {
                let cert = check_separation_property(domain, &dist, cs, ctx.x0, ctx.budget)?;
                last_violations = cert.violations.len();
                if cert.passed {
                    found = Some((cs, cert.samples_checked));
                    break;
                }
            }
            match found {
                Some((cs, samples)) => (
                    cs,
                    "upper".to_string(),
                    format!("sampled-certificate(budget={},samples={samples})", ctx.budget),
                ),
                None => (
                    f64::INFINITY,
                    "upper".to_string(),
                    format!(
                        "no certificate up to factor {} (budget={},violations={last_violations})",
                        steps.last().copied().unwrap_or(f64::NAN),
                        ctx.budget
                    ),
                ),
            }
        }
        AnalysisKind::John => {
            let dist = DistanceField::compute(domain)?;
            let est = john_constant_direct(domain, &dist, ctx.x0, ctx.budget)?;
            (
                est.c_lower,
                "lower".to_string(),
                format!("carrot-curve-sampling(budget={},samples={})", ctx.budget, est.samples),
            )
        }
        AnalysisKind::EndMeasure => {
            let dist = DistanceField::compute(domain)?;
            let rep = end_measure_ratio(domain, &dist, ctx.x0, ctx.budget, &ladder(ctx))?;
            let verdict = match rep.verdict {
                EndVerdict::JohnConsistent => "john_consistent",
                EndVerdict::NotJohnAtScale => "not_john_at_scale",
            };
            (
                rep.max_ratio,
                "lower".to_string(),
                format!(
                    "separating-balls(verdict={verdict},balls={},tau={})",
                    rep.separating_balls, rep.tau
                ),
            )
        }
        AnalysisKind::Korn { p } => {
            let sol = estimate_korn(domain, *p, KornMode::Standard, None, None, ctx.seed)?;
            (
                sol.estimate.value,
                sol.estimate.bound.to_string(),
                sol.estimate.method.clone(),
            )
        }
        AnalysisKind::KornHat { p } => {
            let sol = estimate_korn(domain, *p, KornMode::FixedCube, None, None, ctx.seed)?;
            (
                sol.estimate.value,
                sol.estimate.bound.to_string(),
                sol.estimate.method.clone(),
            )
        }
        AnalysisKind::Divergence { p } => {
            let load = default_test_load(domain)?;
            let sol = solve_divergence(domain, &load, *p)?;
            (
                sol.estimate.value,
                sol.estimate.bound.to_string(),
                format!("{} (residual={:.1e})", sol.estimate.method, sol.residual),
            )
        }
        AnalysisKind::InfSup => {
            let res = infsup_constant(domain)?;
            (
                res.estimate.value,
                res.estimate.bound.to_string(),
                res.estimate.method.clone(),
            )
        }
        AnalysisKind::Duality => {
            let rep = duality_cross_check(domain, 2.0, ctx.seed)?;
            (
                rep.margin,
                "two_sided".to_string(),
                format!(
                    "frobenius-l2-chain(lhs={:.6},rhs={:.6},holds={})",
                    rep.korn_value, rep.chain_rhs, rep.chain_holds
                ),
            )
        }
    };
    Ok(ResultRow {
        domain: ident.domain.clone(),
        parameters: ident.parameters.clone(),
        resolution: ident.resolution,
        constant: kind.constant_label(),
        value,
        bound,
        method,
        wall_ms: None,
    })
}

/// A marker row recording a failed analysis: NaN value, the message where
/// the method would be.
pub fn error_row(ident: &RowIdent, kind: &AnalysisKind, err: &crate::Error) -> ResultRow {
    ResultRow {
        domain: ident.domain.clone(),
        parameters: ident.parameters.clone(),
        resolution: ident.resolution,
        constant: kind.constant_label(),
        value: f64::NAN,
        bound: "error".to_string(),
        method: err.to_string(),
        wall_ms: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::rasterize;

    #[test]
    fn tokens_round_trip_to_labels() {
        let cases = [
            ("whitney", "whitney_violations"),
            ("separation", "C_s_certified"),
            ("john", "C_J_lower"),
            ("end-measure", "end_ratio_max"),
            ("korn(2)", "K_2"),
            ("korn(1.5)", "K_1.5"),
            ("khat(2)", "K_hat_2"),
            ("divergence(2)", "C_d_2"),
            ("div(3)", "C_d_3"),
            ("infsup", "beta_infsup"),
            ("duality", "duality_margin"),
        ];
        for (tok, label) in cases {
            assert_eq!(AnalysisKind::parse(tok).unwrap().constant_label(), label);
        }
        assert!(AnalysisKind::parse("korn").is_err());
        assert!(AnalysisKind::parse("korn(1)").is_err());
        assert!(AnalysisKind::parse("mystery").is_err());
    }

    #[test]
    fn id_splitting() {
        assert_eq!(split_id("disk"), ("disk".into(), String::new()));
        assert_eq!(
            split_id("rooms(neck=0.25,count=4)"),
            ("rooms".into(), "neck=0.25,count=4".into())
        );
    }

    #[test]
    fn whitney_row_on_disk() {
        let spec = DomainSpec::Disk;
        let d = rasterize(&spec, 24).unwrap();
        let ident = RowIdent::from_spec(&spec, 24);
        let row =
            run_analysis(&ident, &d, &AnalysisKind::Whitney, &AnalysisContext::default()).unwrap();
        assert_eq!(row.domain, "disk");
        assert_eq!(row.constant, "whitney_violations");
        assert_eq!(row.value, 0.0);
        assert!(row.wall_ms.is_none());
    }

    #[test]
    fn korn_row_carries_bound_and_method() {
        let spec = DomainSpec::Square;
        let d = rasterize(&spec, 10).unwrap();
        let ident = RowIdent::from_spec(&spec, 10);
        let row = run_analysis(
            &ident,
            &d,
            &AnalysisKind::Korn { p: 2.0 },
            &AnalysisContext::default(),
        )
        .unwrap();
        assert_eq!(row.constant, "K_2");
        assert_eq!(row.bound, "two_sided");
        assert!(row.value > 1.0);
        assert!(row.method.contains("eig"));
    }

    #[test]
    fn error_rows_mark_failures() {
        let ident = RowIdent {
            domain: "square".into(),
            parameters: String::new(),
            resolution: 32,
        };
        let err = crate::Error::InvalidParameter("boom".into());
        let row = error_row(&ident, &AnalysisKind::InfSup, &err);
        assert!(row.value.is_nan());
        assert_eq!(row.bound, "error");
        assert!(row.method.contains("boom"));
    }

    #[test]
    fn file_identity_recovers_resolution() {
        let ident = RowIdent::from_file(std::path::Path::new("/tmp/neck.kdl"), 1.0 / 128.0);
        assert_eq!(ident.domain, "neck");
        assert_eq!(ident.resolution, 128);
        assert_eq!(ident.parameters, "");
    }
}
