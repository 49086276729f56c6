//! Feature graphs for graph-guided penalties.
//!
//! Edges are 0-based `(i, j)` pairs in memory; the edge-list file format is
//! one 1-based `i j` pair per line.

use std::io::{BufRead, Write};

use super::data::SampleSet;
use crate::error::{Error, Result};

/// Edges `(i, j)`, `i < j`, whose absolute Pearson correlation is at least
/// `threshold`. Constant columns are skipped. Ordered by `(i, j)`.
pub fn graph_from_correlation(data: &SampleSet, threshold: f64) -> Result<Vec<(usize, usize)>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Input(format!("threshold {threshold} outside (0, 1)")));
    }
    let n = data.n();
    if n < 2 {
        return Err(Error::Input("correlation graph needs n >= 2".into()));
    }
    let d = data.d();
    // centered, unit-norm columns; None for constant columns
    let columns: Vec<Option<Vec<f64>>> = (0..d)
        .map(|j| {
            let col = data.column(j);
            let mean = col.iter().sum::<f64>() / n as f64;
            let centered: Vec<f64> = col.iter().map(|v| v - mean).collect();
            let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm > 1e-12 * (1.0 + mean.abs()) * (n as f64).sqrt())
                .then(|| centered.into_iter().map(|v| v / norm).collect())
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..d {
        let Some(ci) = &columns[i] else { continue };
        for j in i + 1..d {
            let Some(cj) = &columns[j] else { continue };
            let corr: f64 = ci.iter().zip(cj).map(|(a, b)| a * b).sum();
            if corr.abs() >= threshold {
                edges.push((i, j));
            }
        }
    }
    Ok(edges)
}

/// Rejects self loops, out-of-range endpoints and duplicate (undirected) edges.
pub fn validate_edges(d: usize, edges: &[(usize, usize)]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for &(i, j) in edges {
        if i >= d || j >= d {
            return Err(Error::Input(format!("edge ({i}, {j}) outside 0..{d}")));
        }
        if i == j {
            return Err(Error::Input(format!("self-loop on feature {i}")));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::Input(format!("duplicate edge ({i}, {j})")));
        }
    }
    Ok(())
}

pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.parse::<usize>().ok())
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected two 1-based indices, got {content:?}"),
                })
        };
        let mut it = content.split_whitespace();
        let i = parse(it.next())?;
        let j = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: "trailing tokens".into(),
            });
        }
        edges.push((i - 1, j - 1));
    }
    Ok(edges)
}

pub fn write_edge_list<W: Write>(edges: &[(usize, usize)], mut out: W) -> Result<()> {
    for &(i, j) in edges {
        writeln!(out, "{} {}", i + 1, j + 1)?;
    }
    Ok(())
}

/// Spanning forest of `edges` (kept in the given order, union-find), plus one
/// root per connected component (its smallest feature index).
pub fn spanning_forest(d: usize, edges: &[(usize, usize)]) -> Result<(Vec<(usize, usize)>, Vec<usize>)> {
    validate_edges(d, edges)?;
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut forest = Vec::new();
    for &(i, j) in edges {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            // keep the smaller index as the representative
            let (lo, hi) = (ri.min(rj), ri.max(rj));
            parent[hi] = lo;
            forest.push((i, j));
        }
    }
    let roots = (0..d).filter(|&k| find(&mut parent, k) == k).collect();
    Ok((forest, roots))
}
