//! The individual commands. Each returns the text for standard output; the
//! binary only parses arguments and maps errors to exit codes.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use detcond::audit::{
    audit_bulk_vs_boundary, audit_fkg_lattice, audit_holley_free_wired, audit_holley_pair, audit_subgraph_contraction,
    audit_two_edge_determinant, AuditReport,
};
use detcond::dobrushin::{dobrushin_on_box, green_decay_fit, KappaStrategy, Probes};
use detcond::duality::{check_duality_pushforward, estimate_contour_frequency, free_wired_gap};
use detcond::gaussian::{sample_field_given_kappa, two_layer_roundtrip, PinnedGaussianSampler};
use detcond::laplacian::Conductances;
use detcond::mcmc::{Chain, ChainConfig};
use detcond::model::{dual_parameter, enumerate, self_dual_point, MeasureSpec};
use serde::Serialize;
use serde_json::json;

use crate::{box_spec, fmt_f64, load_graph, Bc, CliError, CliResult};

fn to_json<T: Serialize>(x: &T) -> CliResult<String> {
    serde_json::to_string_pretty(x).map_err(|e| CliError::usage(e.to_string()))
}

fn ensure_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

/// Exact distribution CSV; with `out`, also `marginals.json` next to it.
pub fn enumerate_cmd(graph: &str, p: f64, q: f64, out: Option<&Path>) -> CliResult<String> {
    let g = Arc::new(load_graph(graph)?);
    let dist = enumerate(&MeasureSpec::new(g, p, q)?)?;
    let csv = dist.to_csv();
    if let Some(out) = out {
        ensure_dir(out)?;
        fs::write(out.join("distribution.csv"), &csv)?;
        let m: Vec<String> = dist.marginals().iter().map(|&x| fmt_f64(x)).collect();
        let body = json!({ "p": fmt_f64(p), "q": fmt_f64(q), "log_z": fmt_f64(dist.log_z()), "marginals": m });
        fs::write(out.join("marginals.json"), to_json(&body)?)?;
    }
    Ok(csv)
}

#[derive(Clone, Debug)]
pub struct SampleArgs {
    pub d: usize,
    pub n: usize,
    pub bc: Bc,
    pub p: f64,
    pub q: f64,
    pub sweeps: u64,
    pub burnin: u64,
    pub seed: u64,
    pub checkpoint: Option<std::path::PathBuf>,
    pub resume: bool,
}

/// One chain on a box; prints a sweep CSV row.
pub fn sample_cmd(a: &SampleArgs) -> CliResult<String> {
    let (spec, e) = box_spec(a.d, a.n, a.bc, a.p, a.q)?;
    let mut chain = match (&a.checkpoint, a.resume) {
        (Some(path), true) if path.is_file() => Chain::restore(spec, &fs::read(path)?)
            .map_err(|err| CliError { code: 3, message: format!("{}: {err}", path.display()) })?,
        _ => Chain::new(spec, ChainConfig::new(a.seed).burnin(a.burnin).observe(e))?,
    };
    let total = a.burnin + a.sweeps;
    if chain.sweep_count() < total {
        chain.run(total - chain.sweep_count())?;
    }
    if let Some(path) = &a.checkpoint {
        fs::write(path, chain.checkpoint())?;
    }
    let r = chain.report();
    let m = r.marginal.expect("observed");
    Ok(format!(
        "{}\n{},{},{},{},{},{},{},{},{},{}\n",
        crate::sweep::CSV_HEADER,
        a.n,
        fmt_f64(a.p),
        fmt_f64(a.q),
        a.bc.as_str(),
        a.seed,
        a.sweeps,
        fmt_f64(m.mean),
        fmt_f64(m.stderr),
        fmt_f64(r.h_density.mean),
        fmt_f64(m.tau_int)
    ))
}

#[derive(Clone, Debug)]
pub struct AuditArgs {
    pub which: String,
    pub graph: String,
    pub p: f64,
    pub q: f64,
    pub p2: Option<f64>,
    pub samples: u64,
    pub seed: u64,
}

/// JSON report and whether the audit passed.
pub fn audit_cmd(a: &AuditArgs) -> CliResult<(String, bool)> {
    let report: AuditReport = match a.which.as_str() {
        "two-edge" => audit_two_edge_determinant(&load_graph(&a.graph)?, a.q)?,
        "fkg" => audit_fkg_lattice(&MeasureSpec::new(Arc::new(load_graph(&a.graph)?), a.p, a.q)?, a.samples, a.seed)?,
        "holley" => {
            let g = Arc::new(load_graph(&a.graph)?);
            let p2 = a.p2.ok_or_else(|| CliError::usage("holley needs --p2"))?;
            audit_holley_pair(&MeasureSpec::new(g.clone(), a.p, a.q)?, &MeasureSpec::new(g, p2, a.q)?)?
        }
        "holley-free-wired" => audit_holley_free_wired(a.p, a.q)?,
        "contraction" => {
            let g = load_graph(&a.graph)?;
            let all: Vec<usize> = (0..g.n_edges()).collect();
            let mut rep: Option<AuditReport> = None;
            // every single-edge deletion and contraction
            for &x in &all {
                let sub: Vec<usize> = all.iter().copied().filter(|&e| e != x).collect();
                if g.edge_subgraph(&sub).map(|(s, _)| s.is_connected()).unwrap_or(false) {
                    let r = audit_subgraph_contraction(&g, &sub, &[x], a.q)?;
                    rep = Some(match rep {
                        None => r,
                        Some(acc) => acc.merge(r),
                    });
                }
            }
            rep.ok_or_else(|| CliError::usage("graph has no deletable edge"))?
        }
        "duality" => {
            let tv = check_duality_pushforward(&load_graph(&a.graph)?, a.p, a.q)?;
            let ok = tv <= 1e-10;
            let body = json!({ "id": "duality", "graph": a.graph, "p": a.p, "q": a.q, "tv": tv, "passed": ok });
            return Ok((to_json(&body)?, ok));
        }
        "bulk" => {
            let p2 = a.p2.ok_or_else(|| CliError::usage("bulk needs --p2"))?;
            let rep = audit_bulk_vs_boundary(a.q, a.p, p2, &[1, 2], a.samples, a.seed)?;
            let ok = rep.bracket.passed();
            return Ok((to_json(&rep)?, ok));
        }
        other => return Err(CliError::usage(format!("unknown audit {other:?}"))),
    };
    let ok = report.passed();
    Ok((report.to_json(), ok))
}

pub fn duality_cmd(graph: &str, p: f64, q: f64) -> CliResult<(String, bool)> {
    let tv = check_duality_pushforward(&load_graph(graph)?, p, q)?;
    let body = json!({
        "p": p,
        "q": q,
        "p_star": dual_parameter(p, q),
        "p_sd": self_dual_point(q),
        "tv": tv,
    });
    Ok((to_json(&body)?, tv <= 1e-10))
}

#[derive(Clone, Debug)]
pub struct ContourArgs {
    pub n: usize,
    pub bc: Bc,
    pub p: f64,
    pub q: f64,
    pub max_len: usize,
    pub sweeps: u64,
    pub burnin: u64,
    pub seeds: Vec<u64>,
    pub gap: bool,
}

pub fn contours_cmd(a: &ContourArgs) -> CliResult<String> {
    if a.gap {
        return to_json(&free_wired_gap(a.n, a.p, a.q, a.sweeps, a.burnin, &a.seeds)?);
    }
    let seed = *a.seeds.first().ok_or_else(|| CliError::usage("need a seed"))?;
    to_json(&estimate_contour_frequency(a.n, a.bc == Bc::Wired, a.p, a.q, a.max_len, a.sweeps, a.burnin, seed)?)
}

#[derive(Clone, Debug)]
pub struct GaussianArgs {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    pub burnin: u64,
    pub samples: u64,
    pub seed: u64,
    /// Instead of the round trip, write this many fields for fixed `κ`.
    pub fields: Option<usize>,
    pub hard: bool,
    pub out: Option<std::path::PathBuf>,
}

pub fn gaussian_cmd(a: &GaussianArgs) -> CliResult<String> {
    let (spec, _) = box_spec(2, a.n, Bc::Wired, a.p, a.q)?;
    if let Some(count) = a.fields {
        let m = spec.graph().n_edges();
        let cond = if a.hard { Conductances::all_hard(a.q, m)? } else { Conductances::all_soft(a.q, m)? };
        let sampler = PinnedGaussianSampler::new(spec.graph().clone(), &cond)?;
        let fields = sample_field_given_kappa(&sampler, a.seed, count);
        if let Some(out) = &a.out {
            ensure_dir(out)?;
            for (i, f) in fields.iter().enumerate() {
                fs::write(out.join(format!("field_{i:04}.csv")), f.to_csv())?;
            }
        }
        return Ok(fields.first().map(|f| f.to_csv()).unwrap_or_default());
    }
    let rep = two_layer_roundtrip(&spec, a.burnin, a.samples, a.seed)?;
    let body = to_json(&rep)?;
    if let Some(out) = &a.out {
        ensure_dir(out)?;
        fs::write(out.join("roundtrip.json"), &body)?;
    }
    Ok(body)
}

#[derive(Clone, Debug)]
pub struct DobrushinArgs {
    pub d: usize,
    pub n: usize,
    pub bc: Bc,
    pub p: f64,
    pub q: f64,
    pub probes: String,
    pub seed: u64,
    /// With distances, fit the Green-kernel decay instead.
    pub decay: Option<Vec<usize>>,
}

pub fn parse_probes(s: &str, seed: u64) -> CliResult<Probes> {
    match s {
        "all" => Ok(Probes::AllConfigs),
        "extremal" => Ok(Probes::Extremal),
        _ => match s.strip_prefix("random:").map(str::parse::<usize>) {
            Some(Ok(count)) => Ok(Probes::Random { count, seed }),
            _ => Err(CliError::usage(format!("probes must be all, extremal or random:<count>, got {s:?}"))),
        },
    }
}

pub fn dobrushin_cmd(a: &DobrushinArgs) -> CliResult<String> {
    if let Some(radii) = &a.decay {
        let kappa = match a.probes.as_str() {
            "soft" | "extremal" => KappaStrategy::AllSoft,
            "hard" => KappaStrategy::AllHard,
            s => match parse_probes(s, a.seed)? {
                Probes::Random { count, seed } => KappaStrategy::Random { count, seed },
                _ => KappaStrategy::AllSoft,
            },
        };
        return Ok(green_decay_fit(a.d, a.n, radii, a.q, &kappa)?.to_csv());
    }
    let rep = dobrushin_on_box(a.d, a.n, a.bc == Bc::Wired, a.p, a.q, &parse_probes(&a.probes, a.seed)?)?;
    Ok(rep.to_json())
}

/// Mean marginal per `(n, p, q, bc)` across seeds of a finished sweep.
pub fn report_cmd(out: &Path) -> CliResult<String> {
    let text = fs::read_to_string(out.join("summary.csv"))?;
    let mut groups: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 10 {
            return Err(CliError::usage(format!("summary.csv line {}: expected 10 columns", i + 1)));
        }
        let key = cols[..4].join(",");
        let num = |s: &str| s.parse::<f64>().map_err(|_| CliError::usage(format!("summary.csv line {}: bad number", i + 1)));
        let (m, se) = (num(cols[6])?, num(cols[7])?);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                g.1.push(m);
                g.2.push(se);
            }
            None => groups.push((key, vec![m], vec![se])),
        }
    }
    let mut s = String::from("n,p,q,bc,seeds,marginal,stderr\n");
    for (key, m, se) in groups {
        let k = m.len() as f64;
        let mean = m.iter().sum::<f64>() / k;
        let err = se.iter().map(|x| x * x).sum::<f64>().sqrt() / k;
        s.push_str(&format!("{key},{},{},{}\n", m.len(), fmt_f64(mean), fmt_f64(err)));
    }
    Ok(s)
}

/// Checkpoint contents as JSON.
pub fn inspect_cmd(path: &Path, d: usize, n: usize, bc: Bc, p: f64, q: f64) -> CliResult<String> {
    let (spec, _) = box_spec(d, n, bc, p, q)?;
    let blob = fs::read(path)?;
    let summary = Chain::inspect_checkpoint(spec, &blob)
        .map_err(|err| CliError { code: 3, message: format!("{}: {err}", path.display()) })?;
    to_json(&summary)
}
