//! Parameter sweeps: a flat key/value config expands to a cross product of
//! domains, resolutions, and analyses, and the results land in one CSV
//! table with a stable sort order.
//!
//! Rows are keyed by (domain, parameters, resolution, constant). A rerun
//! parses the existing table, computes only the missing keys, merges, and
//! rewrites the file atomically, so interrupted sweeps resume and a
//! completed sweep rewrites byte-identical output. Wall times are never
//! recorded here for the same reason. Failures are recorded as marker
//! rows and reported in the outcome rather than aborting the batch.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analyze::{error_row, run_analysis, AnalysisContext, AnalysisKind, ResultRow, RowIdent};
use crate::generate::{rasterize, DomainSpec};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "domain,parameters,resolution,constant,value,bound,method,wall_ms";

/// A parsed sweep: domain families with their parameter grids, the
/// resolution list, the analyses, and runner knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub families: Vec<String>,
    pub alphas: Vec<f64>,
    pub necks: Vec<f64>,
    pub counts: Vec<usize>,
    pub levels: Vec<usize>,
    pub resolutions: Vec<usize>,
    pub analyses: Vec<AnalysisKind>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker count; zero means unset (the runner treats it as one, the
    /// command line may fill it from its flag or the environment).
    pub workers: usize,
}

fn parse_num<T: std::str::FromStr>(key: &str, val: &str, line: usize) -> Result<T> {
    val.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("bad value {val:?} for key {key:?}"),
    })
}

impl SweepConfig {
    /// Parse the flat key/value format: one `key value` pair per line,
    /// repeated keys forming lists, `#` starting a comment.
    pub fn parse(text: &str) -> Result<SweepConfig> {
        let mut cfg = SweepConfig {
            families: Vec::new(),
            alphas: Vec::new(),
            necks: Vec::new(),
            counts: Vec::new(),
            levels: Vec::new(),
            resolutions: Vec::new(),
            analyses: Vec::new(),
            out_dir: PathBuf::from("."),
            seed: 0,
            workers: 0,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let s = stripped.trim();
            if s.is_empty() {
                continue;
            }
            let (key, val) = s.split_once(char::is_whitespace).ok_or(Error::Parse {
                line,
                msg: format!("expected `key value`, got {s:?}"),
            })?;
            let val = val.trim();
            match key {
                "family" => cfg.families.push(val.to_string()),
                "alpha" => cfg.alphas.push(parse_num(key, val, line)?),
                "neck" => cfg.necks.push(parse_num(key, val, line)?),
                "count" => cfg.counts.push(parse_num(key, val, line)?),
                "levels" => cfg.levels.push(parse_num(key, val, line)?),
                "res" => cfg.resolutions.push(parse_num(key, val, line)?),
                "analysis" => cfg
                    .analyses
                    .push(AnalysisKind::parse(val).map_err(|e| Error::Parse {
                        line,
                        msg: e.to_string(),
                    })?),
                "out_dir" => cfg.out_dir = PathBuf::from(val),
                "seed" => cfg.seed = parse_num(key, val, line)?,
                "workers" => cfg.workers = parse_num(key, val, line)?,
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::InvalidParameter("config lists no families".into()));
        }
        if self.resolutions.is_empty() {
            return Err(Error::InvalidParameter("config lists no resolutions".into()));
        }
        if !self.resolutions.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter(
                "resolutions must be strictly increasing".into(),
            ));
        }
        if self.analyses.is_empty() {
            return Err(Error::InvalidParameter("config lists no analyses".into()));
        }
        for f in &self.families {
            known_family(f)?;
        }
        Ok(())
    }

    /// Expand families and parameter lists into concrete domain specs, in
    /// listed order.
    pub fn expand(&self) -> Result<Vec<DomainSpec>> {
        let alphas = if self.alphas.is_empty() { vec![2.0] } else { self.alphas.clone() };
        let necks = if self.necks.is_empty() { vec![0.25] } else { self.necks.clone() };
        let counts = if self.counts.is_empty() { vec![4] } else { self.counts.clone() };
        let levels = if self.levels.is_empty() { vec![3] } else { self.levels.clone() };
        let mut out = Vec::new();
        for f in &self.families {
            match known_family(f)? {
                "disk" => out.push(DomainSpec::Disk),
                "square" => out.push(DomainSpec::Square),
                "l_shape" => out.push(DomainSpec::LShape),
                "cusp" => {
                    for &a in &alphas {
                        out.push(DomainSpec::Cusp { alpha: a });
                    }
                }
                "flat_cusp" => {
                    for &a in &alphas {
                        out.push(DomainSpec::FlatCusp { alpha: a });
                    }
                }
                "rooms" => {
                    for &c in &counts {
                        for &nk in &necks {
                            out.push(DomainSpec::Rooms { neck: nk, count: c });
                        }
                    }
                }
                "punctured_disk" => {
                    for &l in &levels {
                        out.push(DomainSpec::PuncturedDisk { levels: l });
                    }
                }
                "punctured_slab" => {
                    for &l in &levels {
                        out.push(DomainSpec::PuncturedSlab { levels: l });
                    }
                }
                _ => unreachable!(),
            }
        }
        for spec in &out {
            spec.validate()?;
        }
        Ok(out)
    }
}

fn known_family(name: &str) -> Result<&'static str> {
    Ok(match name {
        "disk" => "disk",
        "square" => "square",
        "l_shape" | "lshape" | "l-shape" => "l_shape",
        "cusp" => "cusp",
        "flat_cusp" | "flat-cusp" => "flat_cusp",
        "rooms" => "rooms",
        "punctured_disk" | "punctured-disk" => "punctured_disk",
        "punctured_slab" | "punctured-slab" => "punctured_slab",
        other => {
            return Err(Error::InvalidParameter(format!("unknown family {other:?}")))
        }
    })
}

/// Quote a CSV field per RFC 4180 when it contains a comma, quote, or
/// line break.
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') || s.contains('\r') {
        let mut out = String::with_capacity(s.len() + 2);
        out.push('"');
        for ch in s.chars() {
            if ch == '"' {
                out.push('"');
            }
            out.push(ch);
        }
        out.push('"');
        out
    } else {
        s.to_string()
    }
}

/// Render rows (assumed sorted) to a full CSV document.
pub fn format_csv(rows: &[ResultRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let wall = match r.wall_ms {
            Some(ms) => ms.to_string(),
            None => String::new(),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            csv_field(&r.domain),
            csv_field(&r.parameters),
            r.resolution,
            csv_field(&r.constant),
            r.value,
            csv_field(&r.bound),
            csv_field(&r.method),
            wall
        );
    }
    s
}

/// Split one RFC 4180 document into records of fields. Handles quoted
/// fields, doubled quotes, and line breaks inside quotes; accepts LF and
/// CRLF endings.
fn csv_records(text: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut records = Vec::new();
    let mut field = String::new();
    let mut record: Vec<String> = Vec::new();
    let mut in_quotes = false;
    let mut line = 1usize;
    let mut record_line = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(ch) = chars.next() {
        if in_quotes {
            match ch {
                '"' => {
                    if chars.peek() == Some(&'"') {
                        chars.next();
                        field.push('"');
                    } else {
                        in_quotes = false;
                    }
                }
                '\n' => {
                    line += 1;
                    field.push(ch);
                }
                _ => field.push(ch),
            }
            continue;
        }
        match ch {
            '"' => {
                if field.is_empty() {
                    in_quotes = true;
                } else {
                    return Err(Error::Parse {
                        line,
                        msg: "quote inside unquoted field".into(),
                    });
                }
            }
            ',' => {
                record.push(std::mem::take(&mut field));
                fieldguard(&record, record_line)?;
            }
            '\r' => {
                if chars.peek() == Some(&'\n') {
                    continue;
                }
                return Err(Error::Parse {
                    line,
                    msg: "bare carriage return".into(),
                });
            }
            '\n' => {
                record.push(std::mem::take(&mut field));
                if !(record.len() == 1 && record[0].is_empty()) {
                    records.push((record_line, std::mem::take(&mut record)));
                } else {
                    record.clear();
                }
                line += 1;
                record_line = line;
            }
            _ => field.push(ch),
        }
    }
    if in_quotes {
        return Err(Error::Parse {
            line,
            msg: "unterminated quoted field".into(),
        });
    }
    if !field.is_empty() || !record.is_empty() {
        record.push(field);
        records.push((record_line, record));
    }
    Ok(records)
}

// Guard against unbounded record growth on hostile input.
fn fieldguard(record: &[String], line: usize) -> Result<()> {
    if record.len() > 64 {
        return Err(Error::Parse {
            line,
            msg: "too many fields in record".into(),
        });
    }
    Ok(())
}

/// Parse a CSV document previously produced by `format_csv`.
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let records = csv_records(text)?;
    let mut rows = Vec::new();
    let mut iter = records.into_iter();
    match iter.next() {
        Some((line, header)) => {
            let expected: Vec<&str> = CSV_HEADER.split(',').collect();
            if header.len() != expected.len()
                || header.iter().zip(&expected).any(|(a, b)| a != b)
            {
                return Err(Error::Parse {
                    line,
                    msg: format!("unexpected header {:?}", header.join(",")),
                });
            }
        }
        None => return Ok(rows),
    }
    for (line, rec) in iter {
        if rec.len() != 8 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 8 fields, got {}", rec.len()),
            });
        }
        let resolution: usize = rec[2].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad resolution {:?}", rec[2]),
        })?;
        let value: f64 = rec[4].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad value {:?}", rec[4]),
        })?;
        let wall_ms = if rec[7].is_empty() {
            None
        } else {
            Some(rec[7].parse().map_err(|_| Error::Parse {
                line,
                msg: format!("bad wall_ms {:?}", rec[7]),
            })?)
        };
        rows.push(ResultRow {
            domain: rec[0].clone(),
            parameters: rec[1].clone(),
            resolution,
            constant: rec[3].clone(),
            value,
            bound: rec[5].clone(),
            method: rec[6].clone(),
            wall_ms,
        });
    }
    Ok(rows)
}

/// Outcome summary of one sweep run.
#[derive(Debug)]
pub struct SweepOutcome {
    pub path: PathBuf,
    pub rows: Vec<ResultRow>,
    pub computed: usize,
    pub skipped: usize,
    pub failures: usize,
}

/// Write `content` to `path` through a sibling temp file and rename, so a
/// crash never leaves a half-written table.
fn atomic_write(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Run the sweep: cross product of specs, resolutions, and analyses, with
/// completed keys skipped and results merged into `out_dir/sweep.csv`.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    let specs = cfg.expand()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("sweep.csv");
    let mut existing: BTreeMap<(String, String, usize, String), ResultRow> = BTreeMap::new();
    if path.exists() {
        let text = std::fs::read_to_string(&path)?;
        for row in parse_csv(&text)? {
            existing.insert(row.key(), row);
        }
    }
    let ctx = AnalysisContext {
        cs: None,
        x0: None,
        budget: crate::analyze::DEFAULT_BUDGET,
        seed: cfg.seed,
    };
    let mut jobs: Vec<(&DomainSpec, usize, &AnalysisKind)> = Vec::new();
    let mut skipped = 0usize;
    for spec in &specs {
        let ident = RowIdent::from_spec(spec, 0);
        for &res in &cfg.resolutions {
            for kind in &cfg.analyses {
                let key = (
                    ident.domain.clone(),
                    ident.parameters.clone(),
                    res,
                    kind.constant_label(),
                );
                if existing.contains_key(&key) {
                    skipped += 1;
                } else {
                    jobs.push((spec, res, kind));
                }
            }
        }
    }
    let workers = cfg.workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    use rayon::prelude::*;
    let computed_rows: Vec<ResultRow> = pool.install(|| {
        jobs.par_iter()
            .map(|&(spec, res, kind)| {
                let ident = RowIdent::from_spec(spec, res);
                match rasterize(spec, res) {
                    Ok(domain) => match run_analysis(&ident, &domain, kind, &ctx) {
                        Ok(row) => row,
                        Err(e) => error_row(&ident, kind, &e),
                    },
                    Err(e) => error_row(&ident, kind, &e),
                }
            })
            .collect()
    });
    let computed = computed_rows.len();
    let failures = computed_rows.iter().filter(|r| r.bound == "error").count();
    for row in computed_rows {
        existing.insert(row.key(), row);
    }
    let rows: Vec<ResultRow> = existing.into_values().collect();
    atomic_write(&path, &format_csv(&rows))?;
    Ok(SweepOutcome { path, rows, computed, skipped, failures })
}
