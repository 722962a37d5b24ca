//! Raster mask serialization.
//!
//! The native format, KDL1, is a plain-text run-length encoding:
//!
//! ```text
//! KDL1 <dim> <nx> <ny> [<nz>] <h> <ox> <oy> [<oz>]
//! <run> <run> <run> ...
//! ```
//!
//! Runs alternate false/true starting with false and cover the cells in
//! index order (x fastest, then y, then z); they must sum to exactly
//! `nx*ny*nz`. The format round-trips bit-exactly and diffs cleanly.
//!
//! Portable bitmaps (PBM, magic `P1` or `P4`) are accepted as imports for
//! masks produced elsewhere: black pixels become domain cells, rows are
//! flipped so the image's bottom row is the first grid row, and the mask is
//! embedded with a two-cell false margin so border validation holds.

use crate::domain::RasterDomain;
use crate::grid::Grid;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

/// Cap on total cells accepted from untrusted headers.
const MAX_CELLS: usize = 1 << 28;

/// Parse a KDL1 document.
pub fn parse_kdl(text: &str) -> Result<RasterDomain> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty input"))?;
    let mut it = header.split_whitespace();
    let magic = it.next().ok_or_else(|| parse_err(1, "missing magic"))?;
    if magic != "KDL1" {
        return Err(parse_err(1, format!("bad magic {magic:?}, expected \"KDL1\"")));
    }
    let dim: usize = field(&mut it, 1, "dim")?;
    if dim != 2 && dim != 3 {
        return Err(parse_err(1, format!("dim must be 2 or 3, got {dim}")));
    }
    let nx: usize = field(&mut it, 1, "nx")?;
    let ny: usize = field(&mut it, 1, "ny")?;
    let nz: usize = if dim == 3 { field(&mut it, 1, "nz")? } else { 1 };
    let h: f64 = field(&mut it, 1, "h")?;
    let ox: f64 = field(&mut it, 1, "ox")?;
    let oy: f64 = field(&mut it, 1, "oy")?;
    let oz: f64 = if dim == 3 { field(&mut it, 1, "oz")? } else { 0.0 };
    if let Some(extra) = it.next() {
        return Err(parse_err(1, format!("unexpected trailing header field {extra:?}")));
    }
    if !(h.is_finite() && h > 0.0) || !ox.is_finite() || !oy.is_finite() || !oz.is_finite() {
        return Err(parse_err(1, "h must be positive and finite, origin finite"));
    }
    let ncells = nx
        .checked_mul(ny)
        .and_then(|v| v.checked_mul(nz))
        .filter(|&v| v > 0 && v <= MAX_CELLS)
        .ok_or_else(|| parse_err(1, format!("cell count out of range (max {MAX_CELLS})")))?;

    let mut mask = vec![false; ncells];
    let mut filled = 0usize;
    let mut value = false;
    for (lineno, line) in lines {
        for tok in line.split_whitespace() {
            let run: usize = tok
                .parse()
                .map_err(|_| parse_err(lineno + 1, format!("bad run length {tok:?}")))?;
            let end = filled
                .checked_add(run)
                .filter(|&e| e <= ncells)
                .ok_or_else(|| parse_err(lineno + 1, "runs exceed cell count"))?;
            if value {
                mask[filled..end].fill(true);
            }
            filled = end;
            value = !value;
        }
    }
    if filled != ncells {
        return Err(parse_err(
            0,
            format!("runs cover {filled} of {ncells} cells"),
        ));
    }
    let grid = if dim == 2 {
        Grid::new2d(nx, ny, h, [ox, oy])
    } else {
        Grid::new3d(nx, ny, nz, h, [ox, oy, oz])
    };
    RasterDomain::new(grid, mask)
}

fn field<T: std::str::FromStr>(
    it: &mut std::str::SplitWhitespace,
    line: usize,
    name: &str,
) -> Result<T> {
    let tok = it
        .next()
        .ok_or_else(|| parse_err(line, format!("missing header field {name}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad header field {name}: {tok:?}")))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Serialize a domain as KDL1. Output is deterministic.
pub fn format_kdl(domain: &RasterDomain) -> String {
    let g = domain.grid();
    let mut out = String::new();
    if g.dim == 2 {
        let _ = writeln!(
            out,
            "KDL1 2 {} {} {} {} {}",
            g.nx, g.ny, g.h, g.origin[0], g.origin[1]
        );
    } else {
        let _ = writeln!(
            out,
            "KDL1 3 {} {} {} {} {} {} {}",
            g.nx, g.ny, g.nz, g.h, g.origin[0], g.origin[1], g.origin[2]
        );
    }
    let mask = domain.mask();
    let mut runs: Vec<usize> = Vec::new();
    let mut value = false;
    let mut len = 0usize;
    for &b in mask {
        if b == value {
            len += 1;
        } else {
            runs.push(len);
            value = b;
            len = 1;
        }
    }
    runs.push(len);
    for chunk in runs.chunks(20) {
        let line: Vec<String> = chunk.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// Parse a PBM image (P1 ascii or P4 packed). Black pixels (value 1) become
/// domain cells at spacing `h`, with the image's bottom row first.
pub fn parse_pbm(bytes: &[u8], h: f64) -> Result<RasterDomain> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("cell size must be positive, got {h}")));
    }
    let mut pos = 0usize;
    let magic = take_token(bytes, &mut pos).ok_or_else(|| parse_err(1, "missing magic"))?;
    let packed = match magic.as_slice() {
        b"P1" => false,
        b"P4" => true,
        other => {
            return Err(parse_err(
                1,
                format!("unsupported magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
    };
    let w = take_usize(bytes, &mut pos, "width")?;
    let ht = take_usize(bytes, &mut pos, "height")?;
    if w == 0 || ht == 0 || w.saturating_mul(ht) > MAX_CELLS {
        return Err(parse_err(1, format!("image size {w}x{ht} out of range")));
    }

    // Row-major, top row first, as stored in the file.
    let mut pixels = vec![false; w * ht];
    if packed {
        // One whitespace byte separates the header from the raster.
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(parse_err(1, "missing raster separator"));
        }
        pos += 1;
        let stride = (w + 7) / 8;
        if bytes.len() - pos < stride * ht {
            return Err(parse_err(1, "truncated raster"));
        }
        for row in 0..ht {
            for col in 0..w {
                let byte = bytes[pos + row * stride + col / 8];
                pixels[row * w + col] = (byte >> (7 - col % 8)) & 1 == 1;
            }
        }
    } else {
        let mut count = 0usize;
        while count < w * ht {
            if pos >= bytes.len() {
                return Err(parse_err(0, "truncated raster"));
            }
            let b = bytes[pos];
            pos += 1;
            match b {
                b'0' => {
                    pixels[count] = false;
                    count += 1;
                }
                b'1' => {
                    pixels[count] = true;
                    count += 1;
                }
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => {}
                c => return Err(parse_err(0, format!("unexpected raster byte {c:#04x}"))),
            }
        }
    }

    // Embed with a two-cell margin, flipping rows so y increases upward.
    let nx = w + 4;
    let ny = ht + 4;
    if nx * ny > MAX_CELLS {
        return Err(parse_err(1, "image too large after padding"));
    }
    let grid = Grid::new2d(nx, ny, h, [-2.0 * h, -2.0 * h]);
    let mut mask = vec![false; grid.len()];
    for row in 0..ht {
        for col in 0..w {
            if pixels[row * w + col] {
                let y = ht - 1 - row + 2;
                mask[grid.idx([col + 2, y, 0])] = true;
            }
        }
    }
    RasterDomain::new(grid, mask)
}

/// Skip whitespace and comments, then read one token.
fn take_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(bytes[start..*pos].to_vec())
}

fn take_usize(bytes: &[u8], pos: &mut usize, name: &str) -> Result<usize> {
    let tok = take_token(bytes, pos).ok_or_else(|| parse_err(1, format!("missing {name}")))?;
    std::str::from_utf8(&tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(1, format!("bad {name}")))
}

/// Read a domain from a file, dispatching on extension: `.kdl` for the native
/// format, `.pbm` for portable bitmaps (`h` applies only to PBM).
pub fn read_domain_file(path: &Path, pbm_h: f64) -> Result<RasterDomain> {
    let bytes = std::fs::read(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("kdl") => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|_| parse_err(0, "file is not valid UTF-8"))?;
            parse_kdl(text)
        }
        Some("pbm") => parse_pbm(&bytes, pbm_h),
        other => Err(Error::Unsupported(format!(
            "unknown mask extension {other:?}; expected .kdl or .pbm"
        ))),
    }
}

/// Write a domain to a KDL1 file.
pub fn write_domain_file(path: &Path, domain: &RasterDomain) -> Result<()> {
    std::fs::write(path, format_kdl(domain))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{rasterize, DomainSpec};

    #[test]
    fn kdl_round_trips_all_generators() {
        for spec in [
            DomainSpec::Disk,
            DomainSpec::LShape,
            DomainSpec::Rooms { neck: 0.25, count: 2 },
            DomainSpec::PuncturedSlab { levels: 1 },
        ] {
            let d = rasterize(&spec, 16).unwrap();
            let text = format_kdl(&d);
            let back = parse_kdl(&text).unwrap();
            assert_eq!(back.mask(), d.mask(), "{}", spec.id());
            assert_eq!(back.grid().h, d.grid().h);
            assert_eq!(back.grid().origin, d.grid().origin);
        }
    }

    #[test]
    fn kdl_rejects_run_overflow() {
        let text = "KDL1 2 10 10 0.1 0 0\n50 18446744073709551615 1\n";
        assert!(matches!(parse_kdl(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn kdl_rejects_short_runs() {
        let text = "KDL1 2 10 10 0.1 0 0\n30 20\n";
        assert!(matches!(parse_kdl(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn kdl_rejects_bad_header() {
        for text in [
            "",
            "KDL2 2 4 4 0.1 0 0\n16\n",
            "KDL1 4 4 4 0.1 0 0\n16\n",
            "KDL1 2 4 4 0 0 0\n16\n",
            "KDL1 2 4 4 0.1 0 0 9\n16\n",
            "KDL1 2 0 4 0.1 0 0\n0\n",
        ] {
            assert!(parse_kdl(text).is_err(), "{text:?}");
        }
    }

    #[test]
    fn pbm_ascii_and_packed_agree() {
        // 8x4 block with a notch, embedded by the parser with margin 2.
        let ascii = b"P1\n# comment\n8 4\n11111111\n11111111\n11101111\n11111111\n";
        let mut packed = b"P4\n8 4\n".to_vec();
        packed.extend_from_slice(&[0xff, 0xff, 0b1110_1111, 0xff]);
        let a = parse_pbm(ascii, 0.5).unwrap();
        let b = parse_pbm(&packed, 0.5).unwrap();
        assert_eq!(a.mask(), b.mask());
        assert_eq!(a.true_count(), 31);
        // Row flip: the notch row (third from top) sits at grid y = 2 + 1.
        let g = a.grid();
        assert!(!a.is_true_cell([2 + 3, 3, 0]));
        assert_eq!(g.nx, 12);
        assert_eq!(g.ny, 8);
    }

    #[test]
    fn pbm_rejects_truncated_raster() {
        assert!(parse_pbm(b"P4\n16 2\n\xff", 1.0).is_err());
        assert!(parse_pbm(b"P1\n4 4\n1111 1111 11", 1.0).is_err());
    }

    #[test]
    fn kdl_output_is_stable() {
        let d = rasterize(&DomainSpec::Square, 8).unwrap();
        assert_eq!(format_kdl(&d), format_kdl(&d));
        assert!(format_kdl(&d).starts_with("KDL1 2 12 12 0.125 -0.25 -0.25\n"));
    }
}
