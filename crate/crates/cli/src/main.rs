use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use detcond_cli::commands::*;
use detcond_cli::config::SweepConfig;
use detcond_cli::sweep::{run_sweep, SweepOptions, SweepOutcome};
use detcond_cli::{Bc, CliError, CliResult};

#[derive(Parser)]
#[command(name = "detcond", version, about = "Determinantal random conductance model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_bc(s: &str) -> Result<Bc, String> {
    s.parse().map_err(|e: CliError| e.message)
}

#[derive(Subcommand)]
enum Command {
    /// Exact distribution of a small graph.
    Enumerate {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One heat-bath chain on a box.
    Sample {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_bc, default_value = "free")]
        bc: Bc,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 1000)]
        sweeps: u64,
        #[arg(long, default_value_t = 1000)]
        burnin: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Checkpoint file written at the end.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        resume: bool,
    },
    /// Parameter grid from a configuration file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resume: bool,
        /// Stop each cell after this many sweeps, keeping its checkpoint.
        #[arg(long)]
        halt_after: Option<u64>,
    },
    /// Correlation-inequality and duality audits; exit 0 iff no violations.
    Audit {
        /// two-edge, fkg, holley, holley-free-wired, contraction, duality, bulk
        which: String,
        #[arg(long, default_value = "triangle")]
        graph: String,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long)]
        p2: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Dual parameter, self-dual point and the pushforward check.
    Duality {
        #[arg(long)]
        graph: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
    },
    /// Contour frequencies around the central edge, or the free/wired gap.
    Contours {
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_bc, default_value = "free")]
        bc: Bc,
        /// A number, or "psd" for the self-dual point.
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 8)]
        max_len: usize,
        #[arg(long, default_value_t = 10_000)]
        sweeps: u64,
        #[arg(long, default_value_t = 1000)]
        burnin: u64,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seed: Vec<u64>,
        #[arg(long)]
        gap: bool,
    },
    /// Two-layer round trip on a wired box, or fields for fixed conductances.
    Gaussian {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 1000)]
        burnin: u64,
        #[arg(long, default_value_t = 100_000)]
        sweeps: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        fields: Option<usize>,
        #[arg(long)]
        hard: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dobrushin row for the central edge, or the Green-kernel decay fit.
    Dobrushin {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_parser = parse_bc, default_value = "wired")]
        bc: Bc,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long)]
        q: f64,
        /// all, extremal, random:<count>; for --decay also soft or hard
        #[arg(long, default_value = "extremal")]
        probes: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        decay: Option<Vec<usize>>,
    },
    /// Per-cell means of a finished sweep, or the contents of a checkpoint.
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, value_parser = parse_bc, default_value = "free")]
        bc: Bc,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
    },
}

fn parse_p(s: &str, q: f64) -> CliResult<f64> {
    if s == "psd" {
        return Ok(detcond::model::self_dual_point(q));
    }
    s.parse().map_err(|_| CliError::usage(format!("bad p {s:?}")))
}

/// Standard output and exit code.
fn run(cli: Cli) -> CliResult<(String, i32)> {
    Ok(match cli.command {
        Command::Enumerate { graph, p, q, out } => (enumerate_cmd(&graph, p, q, out.as_deref())?, 0),
        Command::Sample { d, n, bc, p, q, sweeps, burnin, seed, out, resume } => {
            let a = SampleArgs { d, n, bc, p, q, sweeps, burnin, seed, checkpoint: out, resume };
            (sample_cmd(&a)?, 0)
        }
        Command::Sweep { config, resume, halt_after } => {
            let cfg = SweepConfig::parse(&std::fs::read_to_string(&config)?)?;
            match run_sweep(&cfg, &SweepOptions { resume, halt_after })? {
                SweepOutcome::Complete { summary, cells } => (format!("{cells} cells, summary in {}\n", summary.display()), 0),
                SweepOutcome::Halted { unfinished } => (format!("halted with {unfinished} unfinished cells\n"), 0),
            }
        }
        Command::Audit { which, graph, p, q, p2, samples, seed } => {
            let (json, ok) = audit_cmd(&AuditArgs { which, graph, p, q, p2, samples, seed })?;
            (json + "\n", if ok { 0 } else { 4 })
        }
        Command::Duality { graph, p, q } => {
            let (json, ok) = duality_cmd(&graph, p, q)?;
            (json + "\n", if ok { 0 } else { 4 })
        }
        Command::Contours { n, bc, p, q, max_len, sweeps, burnin, seed, gap } => {
            let p = parse_p(&p, q)?;
            (contours_cmd(&ContourArgs { n, bc, p, q, max_len, sweeps, burnin, seeds: seed, gap })? + "\n", 0)
        }
        Command::Gaussian { n, p, q, burnin, sweeps, seed, fields, hard, out } => {
            let a = GaussianArgs { n, p, q, burnin, samples: sweeps, seed, fields, hard, out };
            (gaussian_cmd(&a)? + "\n", 0)
        }
        Command::Dobrushin { d, n, bc, p, q, probes, seed, decay } => {
            (dobrushin_cmd(&DobrushinArgs { d, n, bc, p, q, probes, seed, decay })? + "\n", 0)
        }
        Command::Report { out, checkpoint, d, n, bc, p, q } => match (out, checkpoint) {
            (_, Some(ck)) => (inspect_cmd(&ck, d, n, bc, p, q)? + "\n", 0),
            (Some(out), None) => (report_cmd(&out)?, 0),
            (None, None) => return Err(CliError::usage("report needs --out or --checkpoint")),
        },
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors exit 1; 2 is reserved for the size cap
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok((out, code)) => {
            print!("{out}");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
