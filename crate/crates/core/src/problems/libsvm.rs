//! LIBSVM text format: `<label> <index>:<value> ...`, 1-based indices,
//! strictly increasing within a line.

use std::io::{BufRead, Write};

use super::data::SampleSet;
use crate::error::{Error, Result};

/// Parses a LIBSVM stream. `d` defaults to the largest index seen.
///
/// When the file holds exactly two distinct labels they are mapped to
/// `{-1, +1}` (smaller to −1).
pub fn parse_libsvm<R: BufRead>(reader: R, d: Option<usize>) -> Result<SampleSet> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap_or_default();
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label {label_tok:?}"),
        })?;
        if !label.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                msg: "non-finite label".into(),
            });
        }
        let mut row = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("malformed token {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad index in {tok:?}"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad value in {tok:?}"),
            })?;
            if idx == 0 || idx <= prev {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("indices must be 1-based and strictly increasing (at {tok:?})"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite value in {tok:?}"),
                });
            }
            prev = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(prev);
        rows.push(row);
        labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "empty file".into(),
        });
    }
    let d = match d {
        Some(d) if d < max_index => {
            return Err(Error::Input(format!("feature index {max_index} exceeds d = {d}")))
        }
        Some(d) => d,
        None => max_index.max(1),
    };

    let mut distinct: Vec<f64> = labels.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() == 2 {
        let low = distinct[0];
        for l in &mut labels {
            *l = if *l == low { -1.0 } else { 1.0 };
        }
    }
    SampleSet::from_sparse_rows(d, rows, labels)
}

/// Writes every stored entry; values use the shortest round-tripping form.
pub fn write_libsvm<W: Write>(data: &SampleSet, mut out: W) -> Result<()> {
    for i in 0..data.n() {
        let label = data.label(i);
        if label == 1.0 {
            write!(out, "+1")?;
        } else {
            write!(out, "{label}")?;
        }
        let (idx, val) = data.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            write!(out, " {}:{}", j + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
