//! Command-line front end: generate raster domains, run analyses on a
//! domain file, or drive a parameter sweep from a config file.
//!
//! Exit codes: 0 on success, 1 when an analysis failed (the failure is
//! recorded as a marker row in the CSV), 2 on I/O, parse, or usage
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use kornscope::analyze::{
    error_row, run_analysis, AnalysisContext, AnalysisKind, ResultRow, RowIdent, CS_LADDER,
    DEFAULT_BUDGET,
};
use kornscope::distance::DistanceField;
use kornscope::domain::RasterDomain;
use kornscope::generate::{rasterize, DomainSpec};
use kornscope::grid::Cell;
use kornscope::io::{read_domain_file, write_domain_file};
use kornscope::john::{ball_end_cell_list, end_measure_ratio};
use kornscope::korn::build_counterexample_field;
use kornscope::svg::{render_svg, BallOverlay, QuiverOverlay, SvgLayers};
use kornscope::sweep::{format_csv, run_sweep, SweepConfig};
use kornscope::whitney::whitney_decompose;
use kornscope::{Error, Result};

#[derive(Parser)]
#[command(
    name = "kornscope",
    version,
    about = "Raster-domain geometry certificates and functional constants"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Rasterize an analytic domain family to a KDL1 file.
    Generate(GenerateArgs),
    /// Run analyses on a domain file and print a CSV table.
    Analyze(AnalyzeArgs),
    /// Run a parameter sweep described by a config file.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Unit disk.
    #[arg(long)]
    disk: bool,
    /// Unit square.
    #[arg(long)]
    square: bool,
    /// L-shaped domain.
    #[arg(long)]
    lshape: bool,
    /// Power cusp, sharpness from --alpha.
    #[arg(long)]
    cusp: bool,
    /// Three-dimensional flat cusp, sharpness from --alpha.
    #[arg(long = "flat-cusp")]
    flat_cusp: bool,
    /// Rooms joined by narrow corridors; see --neck and --rooms-count.
    #[arg(long)]
    rooms: bool,
    /// Disk with point punctures on nested circles; see --levels.
    #[arg(long = "punctured-disk")]
    punctured_disk: bool,
    /// Slab with line punctures; see --levels.
    #[arg(long = "punctured-slab")]
    punctured_slab: bool,
    /// Cusp sharpness exponent.
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Corridor half-height for --rooms.
    #[arg(long, default_value_t = 0.25)]
    neck: f64,
    /// Number of rooms for --rooms.
    #[arg(long = "rooms-count", default_value_t = 4)]
    rooms_count: usize,
    /// Puncture levels for the punctured families.
    #[arg(long, default_value_t = 3)]
    levels: usize,
    /// Cells per unit length.
    #[arg(long)]
    res: usize,
    /// Output file.
    #[arg(short, long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Domain file (KDL1 or PBM).
    #[arg(value_name = "DOMAIN")]
    file: PathBuf,
    /// Verify the dyadic cube decomposition invariants.
    #[arg(long)]
    whitney: bool,
    /// Search the ball-factor ladder for a separation certificate.
    #[arg(long)]
    separation: bool,
    /// Lower-bound the John constant from sampled curves.
    #[arg(long)]
    john: bool,
    /// Worst end-to-ball measure ratio over separating balls.
    #[arg(long = "end-measure")]
    end_measure: bool,
    /// Korn constant at exponent P (repeatable).
    #[arg(long, value_name = "P")]
    korn: Vec<f64>,
    /// Fixed-cube Korn constant at exponent P (repeatable).
    #[arg(long, value_name = "P")]
    khat: Vec<f64>,
    /// Divergence-equation constant sample at exponent P (repeatable).
    #[arg(long = "div", value_name = "P")]
    div: Vec<f64>,
    /// Inf-sup constant of the discrete divergence operator.
    #[arg(long)]
    infsup: bool,
    /// Cross-check the divergence-to-Korn constant chain.
    #[arg(long)]
    duality: bool,
    /// Single ball factor instead of the default ladder.
    #[arg(long, value_name = "C_S")]
    cs: Option<f64>,
    /// Base cell override, comma-separated indices like 12,34.
    #[arg(long, value_name = "CELL")]
    x0: Option<String>,
    /// Write an SVG figure of the domain with overlays.
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,
    /// Sampling budget for curve and ball analyses.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Seed for randomized solvers.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record wall-clock milliseconds per row (off keeps output
    /// byte-deterministic).
    #[arg(long)]
    timings: bool,
    /// Grid spacing to assume for PBM input.
    #[arg(long = "pbm-h", value_name = "H", default_value_t = 1.0 / 128.0)]
    pbm_h: f64,
    /// Write the CSV here instead of stdout.
    #[arg(short, long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config file.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Worker count override (falls back to the config, then KDL_WORKERS).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Seed override.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match cli.cmd {
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Analyze(a) => cmd_analyze(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn spec_from_flags(a: &GenerateArgs) -> Result<DomainSpec> {
    let mut chosen: Vec<DomainSpec> = Vec::new();
    if a.disk {
        chosen.push(DomainSpec::Disk);
    }
    if a.square {
        chosen.push(DomainSpec::Square);
    }
    if a.lshape {
        chosen.push(DomainSpec::LShape);
    }
    if a.cusp {
        chosen.push(DomainSpec::Cusp { alpha: a.alpha });
    }
    if a.flat_cusp {
        chosen.push(DomainSpec::FlatCusp { alpha: a.alpha });
    }
    if a.rooms {
        chosen.push(DomainSpec::Rooms { neck: a.neck, count: a.rooms_count });
    }
    if a.punctured_disk {
        chosen.push(DomainSpec::PuncturedDisk { levels: a.levels });
    }
    if a.punctured_slab {
        chosen.push(DomainSpec::PuncturedSlab { levels: a.levels });
    }
    match chosen.len() {
        1 => Ok(chosen.pop().unwrap()),
        0 => Err(Error::InvalidParameter(
            "pick one domain family flag (--disk, --square, ...)".into(),
        )),
        _ => Err(Error::InvalidParameter(
            "domain family flags are mutually exclusive".into(),
        )),
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<ExitCode> {
    let spec = spec_from_flags(&a)?;
    spec.validate()?;
    let domain = rasterize(&spec, a.res)?;
    write_domain_file(&a.out, &domain)?;
    let (lo, hi) = spec.bbox();
    let g = domain.grid();
    if spec.dim() == 3 {
        println!(
            "cells {}  h {}  bbox [{}, {}, {}] .. [{}, {}, {}]",
            domain.true_count(),
            g.h,
            lo[0],
            lo[1],
            lo[2],
            hi[0],
            hi[1],
            hi[2]
        );
    } else {
        println!(
            "cells {}  h {}  bbox [{}, {}] .. [{}, {}]",
            domain.true_count(),
            g.h,
            lo[0],
            lo[1],
            hi[0],
            hi[1]
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_cell(text: &str) -> Result<Cell> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 && parts.len() != 3 {
        return Err(Error::InvalidParameter(format!(
            "cell must be 2 or 3 comma-separated indices, got {text:?}"
        )));
    }
    let mut c: Cell = [0, 0, 0];
    for (i, p) in parts.iter().enumerate() {
        c[i] = p.trim().parse().map_err(|_| {
            Error::InvalidParameter(format!("bad cell index {p:?} in {text:?}"))
        })?;
    }
    Ok(c)
}

fn analysis_kinds(a: &AnalyzeArgs) -> Result<Vec<AnalysisKind>> {
    let mut kinds = Vec::new();
    if a.whitney {
        kinds.push(AnalysisKind::Whitney);
    }
    if a.separation {
        kinds.push(AnalysisKind::Separation);
    }
    if a.john {
        kinds.push(AnalysisKind::John);
    }
    if a.end_measure {
        kinds.push(AnalysisKind::EndMeasure);
    }
    for &p in &a.korn {
        kinds.push(AnalysisKind::Korn { p });
    }
    for &p in &a.khat {
        kinds.push(AnalysisKind::KornHat { p });
    }
    for &p in &a.div {
        kinds.push(AnalysisKind::Divergence { p });
    }
    if a.infsup {
        kinds.push(AnalysisKind::InfSup);
    }
    if a.duality {
        kinds.push(AnalysisKind::Duality);
    }
    for kind in &kinds {
        if let AnalysisKind::Korn { p }
        | AnalysisKind::KornHat { p }
        | AnalysisKind::Divergence { p } = kind
        {
            if !(p.is_finite() && *p > 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "exponent must lie in (1, inf), got {p}"
                )));
            }
        }
    }
    if kinds.is_empty() {
        return Err(Error::InvalidParameter(
            "no analyses requested; pass at least one analysis flag".into(),
        ));
    }
    Ok(kinds)
}

/// Best-effort figure; failures warn instead of changing the exit code.
fn write_figure(
    path: &PathBuf,
    domain: &RasterDomain,
    args: &AnalyzeArgs,
    ctx: &AnalysisContext,
) {
    let result = (|| -> Result<()> {
        let mut layers = SvgLayers::default();
        let needs_dist = args.whitney || args.end_measure;
        let dist = if needs_dist {
            Some(DistanceField::compute(domain)?)
        } else {
            None
        };
        let dec = match (&dist, args.whitney) {
            (Some(d), true) => Some(whitney_decompose(domain, d)),
            _ => None,
        };
        if let Some(d) = &dec {
            layers.whitney = Some(d);
        }
        let mut counterexample = None;
        if let (Some(dist), true) = (&dist, args.end_measure) {
            let ladder = match ctx.cs {
                Some(c) => vec![c],
                None => CS_LADDER.to_vec(),
            };
            let rep = end_measure_ratio(domain, dist, ctx.x0, ctx.budget, &ladder)?;
            if let Some(ball) = rep.worst {
                if !ball.degenerate {
                    let g = domain.grid();
                    let base = match ctx.x0 {
                        Some(c) => c,
                        None => g.cell(dist.deepest_cell().0),
                    };
                    let cells = ball_end_cell_list(domain, ball.center_cell, ball.radius, base)?;
                    // The quiver shows the rotation-style test field when
                    // the end supports one; skipping it is fine.
                    counterexample = build_counterexample_field(domain, &ball, &cells).ok();
                    layers.ball = Some(BallOverlay {
                        center: ball.center,
                        radius: ball.radius,
                        end_cells: cells,
                    });
                }
            }
        }
        if let Some(f) = &counterexample {
            layers.quiver = Some(QuiverOverlay { space: &f.space, u: &f.u });
        }
        std::fs::write(path, render_svg(domain, &layers))?;
        Ok(())
    })();
    if let Err(e) = result {
        eprintln!("warning: figure not written: {e}");
    }
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    let kinds = analysis_kinds(&a)?;
    let domain = read_domain_file(&a.file, a.pbm_h)?;
    let ident = RowIdent::from_file(&a.file, domain.grid().h);
    let ctx = AnalysisContext {
        cs: a.cs,
        x0: match &a.x0 {
            Some(s) => Some(parse_cell(s)?),
            None => None,
        },
        budget: a.budget,
        seed: a.seed,
    };
    let mut rows: Vec<ResultRow> = Vec::with_capacity(kinds.len());
    for kind in &kinds {
        let t0 = Instant::now();
        let mut row = match run_analysis(&ident, &domain, kind, &ctx) {
            Ok(row) => row,
            Err(e) => error_row(&ident, kind, &e),
        };
        if a.timings {
            row.wall_ms = Some(t0.elapsed().as_millis() as u64);
        }
        rows.push(row);
    }
    let csv = format_csv(&rows);
    match &a.out {
        Some(path) => std::fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(svg_path) = &a.svg {
        write_figure(svg_path, &domain, &a, &ctx);
    }
    if rows.iter().any(|r| r.bound == "error") {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&a.config)?;
    let mut cfg = SweepConfig::parse(&text)?;
    if let Some(w) = a.workers {
        cfg.workers = w;
    } else if cfg.workers == 0 {
        if let Some(w) = std::env::var("KDL_WORKERS")
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
        {
            cfg.workers = w;
        }
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let outcome = run_sweep(&cfg)?;
    println!(
        "sweep: {} rows ({} computed, {} skipped, {} failures) -> {}",
        outcome.rows.len(),
        outcome.computed,
        outcome.skipped,
        outcome.failures,
        outcome.path.display()
    );
    if outcome.failures > 0 {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}
