//! Plain-text reference files.
//!
//! ```text
//! # svrg-admm reference
//! d = 3
//! rows = 2
//! rho = 1e0
//! quality = 3.1e-11
//! iterations = 412
//! x_star
//! <d values, one per line>
//! y_star
//! <rows values>
//! u_star
//! <rows values>
//! g_subgrad
//! <rows values>
//! ```
//!
//! Values are written in the shortest round-tripping exponent form, so a
//! write/read cycle is lossless.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use svrg_admm::ReferenceSolution;

use crate::error::{CliError, CliResult};

const BLOCKS: [&str; 4] = ["x_star", "y_star", "u_star", "g_subgrad"];

pub fn write_to<W: Write>(r: &ReferenceSolution, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# svrg-admm reference")?;
    writeln!(out, "d = {}", r.x_star.len())?;
    writeln!(out, "rows = {}", r.y_star.len())?;
    writeln!(out, "rho = {:e}", r.rho)?;
    writeln!(out, "quality = {:e}", r.quality)?;
    writeln!(out, "iterations = {}", r.iterations)?;
    for (name, v) in BLOCKS.iter().zip([&r.x_star, &r.y_star, &r.u_star, &r.g_subgrad]) {
        writeln!(out, "{name}")?;
        for x in v.iter() {
            writeln!(out, "{x:e}")?;
        }
    }
    out.flush()
}

pub fn write(r: &ReferenceSolution, path: &Path) -> CliResult<()> {
    let file = File::create(path)?;
    write_to(r, BufWriter::new(file))?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(format!("reference file: {}", msg.into()))
}

pub fn parse(text: &str) -> CliResult<ReferenceSolution> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut header = |key: &str| -> CliResult<String> {
        let line = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
        match line.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok(v.trim().to_string()),
            _ => Err(bad(format!("expected `{key} = ...`, got {line:?}"))),
        }
    };
    let num = |key: &str, v: String| -> CliResult<f64> { v.parse().map_err(|_| bad(format!("bad {key} {v:?}"))) };
    let count = |key: &str, v: String| -> CliResult<usize> { v.parse().map_err(|_| bad(format!("bad {key} {v:?}"))) };
    let d = count("d", header("d")?)?;
    let rows = count("rows", header("rows")?)?;
    let rho = num("rho", header("rho")?)?;
    let quality = num("quality", header("quality")?)?;
    let iterations = count("iterations", header("iterations")?)?;
    let mut blocks = Vec::with_capacity(4);
    for (name, len) in BLOCKS.iter().zip([d, rows, rows, rows]) {
        match lines.next() {
            Some(l) if l == *name => {}
            other => return Err(bad(format!("expected block {name}, got {other:?}"))),
        }
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            let l = lines.next().ok_or_else(|| bad(format!("block {name} is short")))?;
            v.push(l.parse::<f64>().map_err(|_| bad(format!("bad value {l:?} in {name}")))?);
        }
        blocks.push(DVector::from_vec(v));
    }
    if let Some(extra) = lines.next() {
        return Err(bad(format!("trailing content {extra:?}")));
    }
    let g_subgrad = blocks.pop().unwrap();
    let u_star = blocks.pop().unwrap();
    let y_star = blocks.pop().unwrap();
    let x_star = blocks.pop().unwrap();
    Ok(ReferenceSolution {
        x_star,
        y_star,
        u_star,
        g_subgrad,
        rho,
        quality,
        iterations,
    })
}

/// Reads and checks dimensions against the problem at hand.
pub fn read(path: &Path, d: usize, rows: usize) -> CliResult<ReferenceSolution> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let r = parse(&text)?;
    if r.x_star.len() != d || r.y_star.len() != rows {
        return Err(bad(format!(
            "dimensions {}x{} do not match the problem ({d}x{rows})",
            r.x_star.len(),
            r.y_star.len()
        )));
    }
    Ok(r)
}
