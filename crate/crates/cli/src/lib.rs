//! Command-line plumbing for `detcond`: configuration files, parameter
//! sweeps with checkpoints, and the individual commands.

pub mod commands;
pub mod config;
pub mod sweep;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use detcond::graph::{build_free_box, build_wired_box, builtin, central_edge, EdgeId, FiniteGraph};
use detcond::model::{BoundaryCondition, MeasureSpec};

/// Exit code plus message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<detcond::Error> for CliError {
    fn from(e: detcond::Error) -> Self {
        let code = match e {
            detcond::Error::SizeCap { .. } => 2,
            detcond::Error::Checkpoint(_) => 3,
            _ => 1,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: 1, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// A builtin name, or a path to a graph text file.
pub fn load_graph(source: &str) -> CliResult<FiniteGraph> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return Ok(FiniteGraph::from_text(&text)?);
    }
    Ok(builtin(source)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Free,
    Wired,
}

impl Bc {
    pub fn as_str(self) -> &'static str {
        match self {
            Bc::Free => "free",
            Bc::Wired => "wired",
        }
    }
}

impl std::str::FromStr for Bc {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "free" => Ok(Bc::Free),
            "wired" => Ok(Bc::Wired),
            _ => Err(CliError::usage(format!("unknown boundary condition {s:?}"))),
        }
    }
}

/// The box of radius `n` with the given boundary condition, and its central edge.
pub fn box_spec(d: usize, n: usize, bc: Bc, p: f64, q: f64) -> CliResult<(MeasureSpec, EdgeId)> {
    let free = build_free_box(d, n)?;
    let e = central_edge(&free).ok_or_else(|| CliError::usage("box has no central edge"))?;
    Ok(match bc {
        Bc::Free => (MeasureSpec::new(Arc::new(free), p, q)?.with_bc(BoundaryCondition::Free), e),
        Bc::Wired => {
            let w = build_wired_box(d, n)?;
            let ew = w.edge_map[e].ok_or_else(|| CliError::usage("central edge is a loop in the wired box"))?;
            (MeasureSpec::new(Arc::new(w.graph), p, q)?.with_bc(BoundaryCondition::Wired), ew)
        }
    })
}

/// Seventeen significant digits, so that values round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rayon pool capped by `DETCOND_THREADS` when it is set.
pub fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("DETCOND_THREADS") {
        let n: usize = v.parse().map_err(|_| CliError::usage(format!("DETCOND_THREADS={v:?} is not a number")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| CliError::usage(e.to_string()))
}
