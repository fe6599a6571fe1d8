//! Plain-text exchange format for single-system preparations.
//!
//! ```text
//! # erps preparation v1
//! q_min = -8.0000000000000000e0
//! q_max = 8.0000000000000000e0
//! n = 2048
//! hbar = 1.0000000000000000e0
//! nodes = S rho
//! <S_0> <rho_0>
//! ...
//! ```
//!
//! Reals are written with 17 significant digits so a round trip is exact.

use std::fmt::Write as _;

use super::Preparation;
use crate::error::{Error, Result};
use crate::grid::{Field1D, Grid1D};

const MAGIC: &str = "# erps preparation v1";

pub fn export_text(prep: &Preparation) -> String {
    let g = prep.grid();
    let mut out = String::with_capacity(48 * g.len() + 128);
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "q_min = {:.16e}", g.q_min());
    let _ = writeln!(out, "q_max = {:.16e}", g.q_max());
    let _ = writeln!(out, "n = {}", g.len());
    let _ = writeln!(out, "hbar = {:.16e}", prep.hbar());
    let _ = writeln!(out, "nodes = S rho");
    for (s, r) in prep.action().values().iter().zip(prep.density().values()) {
        let _ = writeln!(out, "{s:.16e} {r:.16e}");
    }
    out
}

fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{what}: {e}")))
}

pub fn import_text(text: &str) -> Result<Preparation> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some(MAGIC) {
        return Err(Error::Parse("missing preparation header".into()));
    }
    let mut header = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing `{key}`")))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected `{key} = ...`, got `{line}`")))?;
        if k.trim() != key {
            return Err(Error::Parse(format!(
                "expected `{key}`, got `{}`",
                k.trim()
            )));
        }
        Ok(v.trim().to_string())
    };
    let q_min = parse_f64(&header("q_min")?, "q_min")?;
    let q_max = parse_f64(&header("q_max")?, "q_max")?;
    let n: usize = header("n")?
        .parse()
        .map_err(|e| Error::Parse(format!("n: {e}")))?;
    let hbar = parse_f64(&header("hbar")?, "hbar")?;
    if header("nodes")? != "S rho" {
        return Err(Error::Parse("node columns must be `S rho`".into()));
    }
    let grid = Grid1D::new(q_min, q_max, n)?;
    let mut action = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    for (k, line) in lines.enumerate() {
        let mut cols = line.split_whitespace();
        match (cols.next(), cols.next(), cols.next()) {
            (Some(s), Some(r), None) => {
                action.push(parse_f64(s, &format!("S at node {k}"))?);
                density.push(parse_f64(r, &format!("rho at node {k}"))?);
            }
            _ => return Err(Error::Parse(format!("node {k}: expected two columns"))),
        }
    }
    if action.len() != n {
        return Err(Error::Parse(format!(
            "expected {n} nodes, found {}",
            action.len()
        )));
    }
    Preparation::new(
        Field1D::new(grid, action)?,
        Field1D::new(grid, density)?,
        hbar,
    )
}
