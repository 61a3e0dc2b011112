//! Plain-text edge-list format.
//!
//! ```text
//! graph v=3 e=3 d=2
//! 0 1
//! 1 2
//! 0 2
//! boundary: 0
//! coord 0 0 0
//! ```
//!
//! `coord` lines are optional; when present every coordinate has `d` entries.
//! Blank lines and lines starting with `#` are ignored.

use super::{Embedding, FiniteGraph};
use crate::error::{Error, Result};

pub(super) fn write(g: &FiniteGraph) -> String {
    let dim = g.embedding().map_or(0, |e| e.dim);
    let mut out = format!("graph v={} e={} d={}\n", g.n_vertices(), g.n_edges(), dim);
    for &(u, v) in g.edges() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out.push_str("boundary:");
    for b in g.boundary() {
        out.push_str(&format!(" {b}"));
    }
    out.push('\n');
    if let Some(emb) = g.embedding() {
        for (v, p) in emb.points.iter().enumerate() {
            if let Some(p) = p {
                out.push_str(&format!("coord {v}"));
                for c in p {
                    out.push_str(&format!(" {c}"));
                }
                out.push('\n');
            }
        }
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn header_field(token: &str, key: &str, line: usize) -> Result<usize> {
    token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| parse_err(line, format!("expected {key}=<int>, found {token:?}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad integer in {token:?}")))
}

pub(super) fn parse(input: &str) -> Result<FiniteGraph> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != "graph" {
        return Err(parse_err(hline, "header must read `graph v=<n> e=<m> d=<dim>`"));
    }
    let n = header_field(tokens[1], "v", hline)?;
    let m = header_field(tokens[2], "e", hline)?;
    let dim = header_field(tokens[3], "d", hline)?;

    let mut edges = Vec::with_capacity(m);
    let mut boundary = Vec::new();
    let mut points: Vec<Option<Vec<i64>>> = vec![None; n];
    let mut any_coord = false;
    for (ln, line) in lines {
        if let Some(rest) = line.strip_prefix("boundary:") {
            for t in rest.split_whitespace() {
                boundary.push(t.parse().map_err(|_| parse_err(ln, format!("bad vertex {t:?}")))?);
            }
        } else if let Some(rest) = line.strip_prefix("coord") {
            let nums: Vec<i64> = rest
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(ln, format!("bad integer {t:?}"))))
                .collect::<Result<_>>()?;
            if nums.len() != dim + 1 || nums[0] < 0 || nums[0] as usize >= n {
                return Err(parse_err(ln, "coord line must be `coord <vertex> <x_1> .. <x_d>`"));
            }
            points[nums[0] as usize] = Some(nums[1..].to_vec());
            any_coord = true;
        } else {
            let ends: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(ln, format!("bad vertex {t:?}"))))
                .collect::<Result<_>>()?;
            if ends.len() != 2 {
                return Err(parse_err(ln, "edge line must hold two vertex ids"));
            }
            edges.push((ends[0], ends[1]));
        }
    }
    if edges.len() != m {
        return Err(parse_err(hline, format!("header announces {m} edges, found {}", edges.len())));
    }
    let g = FiniteGraph::new(n, edges, boundary)?;
    if any_coord {
        g.with_embedding(Embedding { dim, points })
    } else {
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_box, triangle};
    use super::*;

    #[test]
    fn writes_and_reads_back() {
        for g in [triangle(), build_box(2, 2, true).unwrap(), build_box(3, 1, false).unwrap()] {
            let text = write(&g);
            assert_eq!(parse(&text).unwrap(), g);
        }
    }

    #[test]
    fn reports_bad_input() {
        assert!(matches!(parse(""), Err(Error::Parse { .. })));
        assert!(matches!(parse("graph v=2 e=2 d=0\n0 1\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("graph v=2 e=1 d=0\n0 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("graph v=3 e=1 d=0\n0 1\n"), Err(Error::Disconnected)));
    }
}
