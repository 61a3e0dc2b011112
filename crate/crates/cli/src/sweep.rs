//! Grid sweeps: one heat-bath chain per cell, checkpointed and resumable.
//!
//! Layout of the output directory:
//! `cells/cell_NNNN.csv` (one row each), `checkpoints/cell_NNNN.ck`,
//! optional `cells/cell_NNNN_contours.json`, and `summary.csv`, written
//! once every cell is complete.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use detcond::duality::estimate_contour_frequency;
use detcond::mcmc::{Chain, ChainConfig};
use rayon::prelude::*;

use crate::config::SweepConfig;
use crate::{box_spec, fmt_f64, thread_pool, Bc, CliError, CliResult};

pub const CSV_HEADER: &str = "n,p,q,bc,seed,sweeps,marginal,stderr,h_density,tau_int";

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub bc: Bc,
    pub seed: u64,
}

impl Cell {
    fn name(&self) -> String {
        format!("cell_{:04}", self.index)
    }
}

/// Cells in canonical order: `n`, then `p`, `q`, `bc`, `seed`.
pub fn cells(cfg: &SweepConfig) -> CliResult<Vec<Cell>> {
    let mut out = Vec::new();
    for &n in &cfg.n {
        for p in &cfg.p {
            for &q in &cfg.q {
                for bc in cfg.bcs() {
                    for &seed in &cfg.seeds {
                        out.push(Cell { index: out.len(), n, p: p.resolve(q)?, q, bc, seed });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    pub resume: bool,
    /// Stop every unfinished cell after this many sweeps in this invocation,
    /// leaving its checkpoint behind. Used to exercise resumption.
    pub halt_after: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepOutcome {
    Complete { summary: PathBuf, cells: usize },
    Halted { unfinished: usize },
}

fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn run_cell(cfg: &SweepConfig, cell: &Cell, opts: &SweepOptions, writer: &Mutex<()>) -> CliResult<Option<String>> {
    let cells_dir = cfg.out.join("cells");
    let row_path = cells_dir.join(format!("{}.csv", cell.name()));
    if opts.resume && row_path.is_file() {
        let text = fs::read_to_string(&row_path)?;
        let row = text.lines().nth(1).ok_or_else(|| CliError::usage(format!("{} is empty", row_path.display())))?;
        return Ok(Some(row.to_string()));
    }
    let (spec, e) = box_spec(cfg.d, cell.n, cell.bc, cell.p, cell.q)?;
    let ck_path = cfg.out.join("checkpoints").join(format!("{}.ck", cell.name()));
    let mut chain = if opts.resume && ck_path.is_file() {
        let blob = fs::read(&ck_path)?;
        Chain::restore(spec.clone(), &blob).map_err(|err| CliError {
            code: 3,
            message: format!("{}: {err}", ck_path.display()),
        })?
    } else {
        Chain::new(spec.clone(), ChainConfig::new(cell.seed).burnin(cfg.burnin).observe(e))?
    };
    let total = cfg.burnin + cfg.sweeps;
    let mut budget = opts.halt_after.unwrap_or(u64::MAX);
    while chain.sweep_count() < total {
        let step = cfg.checkpoint_every.min(total - chain.sweep_count()).min(budget);
        if step == 0 {
            return Ok(None);
        }
        chain.run(step)?;
        budget -= step;
        let _guard = writer.lock().expect("writer lock");
        write_atomic(&ck_path, &chain.checkpoint())?;
    }
    let r = chain.report();
    let m = r.marginal.expect("central edge is observed");
    let row = format!(
        "{},{},{},{},{},{},{},{},{},{}",
        cell.n,
        fmt_f64(cell.p),
        fmt_f64(cell.q),
        cell.bc.as_str(),
        cell.seed,
        cfg.sweeps,
        fmt_f64(m.mean),
        fmt_f64(m.stderr),
        fmt_f64(r.h_density.mean),
        fmt_f64(m.tau_int),
    );
    let contours = if cfg.contours {
        let rep = estimate_contour_frequency(
            cell.n,
            cell.bc == Bc::Wired,
            cell.p,
            cell.q,
            cfg.contour_max_len,
            cfg.sweeps,
            cfg.burnin,
            cell.seed,
        )?;
        Some(serde_json::to_string_pretty(&rep).map_err(|e| CliError::usage(e.to_string()))?)
    } else {
        None
    };
    let _guard = writer.lock().expect("writer lock");
    if let Some(json) = contours {
        write_atomic(&cells_dir.join(format!("{}_contours.json", cell.name())), json.as_bytes())?;
    }
    write_atomic(&row_path, format!("{CSV_HEADER}\n{row}\n").as_bytes())?;
    Ok(Some(row))
}

/// Runs every cell of the grid, in parallel across cells.
pub fn run_sweep(cfg: &SweepConfig, opts: &SweepOptions) -> CliResult<SweepOutcome> {
    cfg.validate()?;
    let cells = cells(cfg)?;
    fs::create_dir_all(cfg.out.join("cells"))?;
    fs::create_dir_all(cfg.out.join("checkpoints"))?;
    if !opts.resume {
        for dir in ["cells", "checkpoints"] {
            for entry in fs::read_dir(cfg.out.join(dir))? {
                fs::remove_file(entry?.path())?;
            }
        }
        let _ = fs::remove_file(cfg.out.join("summary.csv"));
    }
    let writer = Mutex::new(());
    let pool = thread_pool()?;
    let rows: Vec<CliResult<Option<String>>> =
        pool.install(|| cells.par_iter().map(|c| run_cell(cfg, c, opts, &writer)).collect());
    let mut done = Vec::with_capacity(rows.len());
    let mut unfinished = 0;
    for r in rows {
        match r? {
            Some(row) => done.push(row),
            None => unfinished += 1,
        }
    }
    if unfinished > 0 {
        return Ok(SweepOutcome::Halted { unfinished });
    }
    let summary = cfg.out.join("summary.csv");
    let mut f = fs::File::create(&summary)?;
    writeln!(f, "{CSV_HEADER}")?;
    for row in &done {
        writeln!(f, "{row}")?;
    }
    Ok(SweepOutcome::Complete { summary, cells: done.len() })
}
