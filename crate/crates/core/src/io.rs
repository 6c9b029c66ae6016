//! Versioned CSV encoding of kernel measures.
//!
//! ```text
//! # schema=1
//! # grid T=<horizon> N=<steps> n=<dim>
//! j,k,row,col,re,im
//! ```
//! followed by the nonzero entries of each block `(j, k)`. Reals are printed
//! with 17 significant digits so that a write/read roundtrip is exact.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{CMat, C64};
use crate::measure::KernelMeasure;

pub const SCHEMA_VERSION: u32 = 1;
pub const MEASURE_HEADER: &str = "j,k,row,col,re,im";

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_measure_csv<W: Write>(q: &KernelMeasure, mut out: W) -> Result<()> {
    let g = q.grid();
    writeln!(out, "# schema={SCHEMA_VERSION}")?;
    writeln!(out, "# grid T={} N={} n={}", fmt_f64(g.horizon()), g.steps(), q.n())?;
    writeln!(out, "{MEASURE_HEADER}")?;
    let n = q.n();
    let lead = q.lead();
    for j in 0..lead.nrows() / n {
        for k in 0..lead.ncols() / n {
            for r in 0..n {
                for c in 0..n {
                    let z = lead[[j * n + r, k * n + c]];
                    if z != C64::new(0.0, 0.0) {
                        writeln!(out, "{j},{k},{r},{c},{},{}", fmt_f64(z.re), fmt_f64(z.im))?;
                    }
                }
            }
        }
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("measure CSV line {line}: {msg}"))
}

fn header_value<'a>(fields: &'a str, key: &str, line: usize) -> Result<&'a str> {
    fields
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
        .ok_or_else(|| parse_err(line, format!("missing `{key}=`")))
}

pub fn read_measure_csv<R: BufRead>(input: R) -> Result<KernelMeasure> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, l)) => Ok((i, l?)),
            None => Err(Error::Parse(format!("measure CSV ends before {what}"))),
        }
    };
    let (i, schema) = next("schema line")?;
    let version = schema.trim().strip_prefix("# schema=").ok_or_else(|| parse_err(i, "expected `# schema=`"))?;
    if version.trim() != SCHEMA_VERSION.to_string() {
        return Err(parse_err(i, format!("unsupported schema {version}")));
    }
    let (i, grid_line) = next("grid line")?;
    let fields = grid_line.trim().strip_prefix("# grid").ok_or_else(|| parse_err(i, "expected `# grid`"))?;
    let horizon: f64 = header_value(fields, "T", i)?.parse().map_err(|e| parse_err(i, e))?;
    let steps: usize = header_value(fields, "N", i)?.parse().map_err(|e| parse_err(i, e))?;
    let n: usize = header_value(fields, "n", i)?.parse().map_err(|e| parse_err(i, e))?;
    if n == 0 {
        return Err(parse_err(i, "n must be positive"));
    }
    let grid = if steps == 0 { TimeGrid::single_time() } else { TimeGrid::new(horizon, steps)? };
    let (i, header) = next("column header")?;
    if header.trim() != MEASURE_HEADER {
        return Err(parse_err(i, format!("expected header `{MEASURE_HEADER}`")));
    }
    let dim = n * grid.len();
    let mut w = CMat::zeros((dim, dim));
    for (i, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(parse_err(i, format!("expected 6 fields, got {}", cols.len())));
        }
        let idx = cols[..4]
            .iter()
            .map(|s| s.trim().parse::<usize>().map_err(|e| parse_err(i, e)))
            .collect::<Result<Vec<_>>>()?;
        let (j, k, r, c) = (idx[0], idx[1], idx[2], idx[3]);
        if j >= grid.len() || k >= grid.len() || r >= n || c >= n {
            return Err(parse_err(i, format!("entry ({j},{k},{r},{c}) outside the grid")));
        }
        let re: f64 = cols[4].trim().parse().map_err(|e| parse_err(i, e))?;
        let im: f64 = cols[5].trim().parse().map_err(|e| parse_err(i, e))?;
        w[[j * n + r, k * n + c]] = C64::new(re, im);
    }
    KernelMeasure::from_weights(grid, n, &w)
}
