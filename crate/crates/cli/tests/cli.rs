use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use detcond_cli::config::SweepConfig;
use detcond_cli::sweep::{run_sweep, SweepOptions, SweepOutcome};

fn detcond(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_detcond")).args(args).output().expect("binary runs")
}

fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

#[test]
fn enumerate_triangle_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = detcond(&["enumerate", "--graph", "triangle", "--p", "0.5", "--q", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv, golden("enumerate_triangle.csv"));
    assert_eq!(fs::read_to_string(dir.path().join("marginals.json")).unwrap(), golden("marginals_triangle.json"));
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    let total: f64 = rows.iter().map(|r| r.split(',').nth(2).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn q_one_marginals_equal_p() {
    let dir = tempfile::tempdir().unwrap();
    let out = detcond(&["enumerate", "--graph", "k4", "--p", "0.3", "--q", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("marginals.json")).unwrap()).unwrap();
    for m in v["marginals"].as_array().unwrap() {
        assert!((m.as_str().unwrap().parse::<f64>().unwrap() - 0.3).abs() < 1e-12);
    }
}

#[test]
fn exit_codes() {
    // 40 edges exceeds the enumeration cap
    assert_eq!(detcond(&["enumerate", "--graph", "box:2:2", "--p", "0.5", "--q", "2"]).status.code(), Some(2));
    assert_eq!(detcond(&["enumerate", "--graph", "no-such-graph", "--p", "0.5", "--q", "2"]).status.code(), Some(1));
    assert_eq!(detcond(&["enumerate", "--graph", "triangle", "--p", "x"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.graph");
    fs::write(&bad, "graph v=3 e=2 d=0\n0 1\n1 7\n").unwrap();
    assert_eq!(detcond(&["enumerate", "--graph", bad.to_str().unwrap(), "--p", "0.5", "--q", "2"]).status.code(), Some(1));
    fs::write(&bad, "graph v=3 e=3 d=0\n0 1\n1 2\n0 2\n").unwrap();
    let out = detcond(&["enumerate", "--graph", bad.to_str().unwrap(), "--p", "0.5", "--q", "2"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden("enumerate_triangle.csv"));
}

#[test]
fn audits_from_the_command_line() {
    let fkg = detcond(&["audit", "fkg", "--graph", "grid2x2", "--p", "0.5", "--q", "2"]);
    assert_eq!(fkg.status.code(), Some(0));
    let dual = detcond(&["audit", "duality", "--graph", "grid2x2", "--p", "0.5", "--q", "4"]);
    assert_eq!(dual.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&dual.stdout).unwrap();
    assert!(v["tv"].as_f64().unwrap() <= 1e-10);
    let two = detcond(&["audit", "two-edge", "--graph", "triangle", "--q", "1"]);
    assert_eq!(two.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&two.stdout).unwrap();
    assert!(v["worst_margin"].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn sample_row_matches_golden() {
    let out = detcond(&["sample", "--n", "1", "--bc", "wired", "--p", "0.5", "--q", "2", "--sweeps", "200", "--burnin", "20", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), golden("sample_wired1.csv"));
}

fn config(out: &Path, extra: &str) -> SweepConfig {
    let text = format!(
        "p = [0.4, \"psd\"]\nq = [1.0, 9.0]\nn = [1]\nbc = [\"free\", \"wired\"]\nsweeps = 300\nburnin = 30\nseeds = [1, 2]\ncheckpoint_every = 70\nout = {:?}\n{extra}",
        out.to_str().unwrap()
    );
    SweepConfig::parse(&text).unwrap()
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![("summary.csv".to_string(), fs::read(dir.join("summary.csv")).unwrap())];
    let mut cells: Vec<_> = fs::read_dir(dir.join("cells")).unwrap().map(|e| e.unwrap().path()).collect();
    cells.sort();
    for c in cells {
        out.push((c.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&c).unwrap()));
    }
    out
}

#[test]
fn sweep_is_reproducible_across_kill_and_resume() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let ca = config(a.path(), "");
    let full = run_sweep(&ca, &SweepOptions::default()).unwrap();
    assert!(matches!(full, SweepOutcome::Complete { cells: 16, .. }));
    let cb = config(b.path(), "");
    run_sweep(&cb, &SweepOptions::default()).unwrap();
    assert_eq!(read_tree(a.path()), read_tree(b.path()));

    let cc = config(c.path(), "");
    let halted = run_sweep(&cc, &SweepOptions { resume: false, halt_after: Some(150) }).unwrap();
    assert_eq!(halted, SweepOutcome::Halted { unfinished: 16 });
    assert!(!c.path().join("summary.csv").exists());
    let again = run_sweep(&cc, &SweepOptions { resume: true, halt_after: Some(100) }).unwrap();
    assert!(matches!(again, SweepOutcome::Halted { .. }));
    run_sweep(&cc, &SweepOptions { resume: true, halt_after: None }).unwrap();
    assert_eq!(read_tree(a.path()), read_tree(c.path()));

    // the q = 1 cells sample p exactly
    let summary = String::from_utf8(read_tree(a.path())[0].1.clone()).unwrap();
    for line in summary.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (p, q): (f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        let (m, se): (f64, f64) = (f[6].parse().unwrap(), f[7].parse().unwrap());
        if q == 1.0 {
            assert!((m - p).abs() <= 3.0 * se.max(1e-3), "{line}");
        }
    }
}

#[test]
fn sweep_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("sweep.toml");
    let text = format!(
        "p = [0.5]\nq = [2.0]\nn = [1]\nbc = \"free\"\nsweeps = 50\nburnin = 5\nseeds = [4, 4]\nout = {:?}\n",
        dir.path().join("out").to_str().unwrap()
    );
    fs::write(&cfg_path, &text).unwrap();
    assert_eq!(detcond(&["sweep", "--config", cfg_path.to_str().unwrap()]).status.code(), Some(1));

    fs::write(&cfg_path, text.replace("[4, 4]", "[4]").replace("burnin = 5", "burnin = 5\ncheckpoint_every = 10")).unwrap();
    let out = detcond(&["sweep", "--config", cfg_path.to_str().unwrap(), "--halt-after", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let ck = dir.path().join("out/checkpoints/cell_0000.ck");
    let mut blob = fs::read(&ck).unwrap();
    let mid = blob.len() / 2;
    blob[mid] ^= 0xff;
    fs::write(&ck, blob).unwrap();
    assert_eq!(detcond(&["sweep", "--config", cfg_path.to_str().unwrap(), "--resume"]).status.code(), Some(3));
}

#[test]
fn checkpoint_report() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("chain.ck");
    let ck_s = ck.to_str().unwrap();
    let base = ["--n", "1", "--p", "0.5", "--q", "2"];
    let mut args = vec!["sample", "--sweeps", "40", "--burnin", "4", "--out", ck_s];
    args.extend_from_slice(&base);
    assert_eq!(detcond(&args).status.code(), Some(0));
    let mut args = vec!["report", "--checkpoint", ck_s];
    args.extend_from_slice(&base);
    let out = detcond(&args);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["sweep"].as_u64(), Some(44));
    assert_eq!(v["version"].as_u64(), Some(1));
}
