#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_laborflow");

pub fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn laborflow")
}

pub fn run_ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(
        o.status.success(),
        "laborflow {:?} failed: {}",
        args,
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

/// Every file under `dir`, keyed by name.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries {
            let e = e.unwrap();
            out.insert(e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap());
        }
    }
    out
}

/// Synthetic inputs shared by the seeded commands.
pub struct Fixtures {
    pub dir: tempfile::TempDir,
}

impl Fixtures {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let f = Self { dir };
        for (kind, extra) in [
            ("incidence", vec![]),
            ("graph", vec!["--n", "40", "--ties", "150", "--reciprocal", "70"]),
            ("panel", vec![]),
            ("cdr", vec!["--n", "60", "--days", "7"]),
        ] {
            let out = f.path(kind);
            let mut args = vec!["synth", "--kind", kind, "--seed", "11", "--out", out.to_str().unwrap()];
            args.extend(extra);
            run_ok(&args);
        }
        let panel = fs::read_to_string(f.path("panel/panel.csv")).unwrap();
        let mut rdr = csv::Reader::from_reader(panel.as_bytes());
        let h = rdr.headers().unwrap().clone();
        let col = |n: &str| h.iter().position(|c| c == n).unwrap();
        let (o, e, g) = (col("outcome"), col("eci"), col("gdp_log"));
        let recs: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        let mut outcomes: Vec<f64> = recs.iter().map(|r| r[o].parse().unwrap()).collect();
        outcomes.sort_by(f64::total_cmp);
        let median = outcomes[outcomes.len() / 2];
        let mut table = String::from("id,y,eci,gdp_log\n");
        for (i, r) in recs.iter().enumerate() {
            let y = if r[o].parse::<f64>().unwrap() >= median { 1 } else { 0 };
            table.push_str(&format!("{i},{y},{},{}\n", &r[e], &r[g]));
        }
        fs::write(f.path("binary.csv"), table).unwrap();
        f
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn arg(&self, rel: &str) -> String {
        self.path(rel).to_string_lossy().into_owned()
    }

    /// Seeded invocations (without `--out`, `--seed`, `--threads`).
    pub fn seeded_commands(&self) -> Vec<(&'static str, Vec<String>)> {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let graph = self.arg("graph/graph.csv");
        let panel = self.arg("panel/panel.csv");
        let binary = self.arg("binary.csv");
        vec![
            ("synth_incidence", s(&["synth", "--kind", "incidence"])),
            ("synth_cdr", s(&["synth", "--kind", "cdr", "--n", "30", "--days", "3"])),
            ("synth_panel", s(&["synth", "--kind", "panel"])),
            ("synth_graph", s(&["synth", "--kind", "graph"])),
            ("diffuse", s(&["diffuse", "--graph", &graph, "--trials", "40"])),
            ("percolate", s(&["percolate", "--graph", &graph, "--trials", "30", "--f-grid", "0,0.5,1"])),
            ("som", s(&["som", "--input", &binary, "--features", "eci,gdp_log", "--width", "3", "--height", "3", "--epochs", "5"])),
            ("cv_ols", s(&["cv", "--input", &panel, "--target", "outcome", "--features", "eci,gdp_log,life_expectancy"])),
            ("cv_logit", s(&["cv", "--input", &binary, "--target", "y", "--model", "logit", "--metric", "auc", "--k", "4"])),
            ("simulate", s(&["simulate", "--input", &binary, "--target", "y", "--scenario", "eci=1", "--lo", "eci=-1", "--hi", "eci=1", "--n-sims", "300"])),
            ("match", s(&["match", "--panel", &panel])),
        ]
    }
}

/// Runs a command into a fresh directory and returns stdout plus the files.
pub fn capture(args: &[String], seed: &str, threads: Option<&str>) -> (Vec<u8>, BTreeMap<String, Vec<u8>>) {
    let out = tempfile::tempdir().unwrap();
    let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
    full.extend(["--seed", seed, "--out", out.path().to_str().unwrap()]);
    if let Some(t) = threads {
        full.extend(["--threads", t]);
    }
    let o = run_ok(&full);
    (o.stdout, snapshot(out.path()))
}

/// Names of commands whose outputs differ across repeated runs or thread
/// counts.
pub fn nondeterministic(f: &Fixtures) -> Vec<String> {
    let mut bad = Vec::new();
    for (name, args) in f.seeded_commands() {
        let a = capture(&args, "7", None);
        let b = capture(&args, "7", None);
        let t1 = capture(&args, "7", Some("1"));
        let t8 = capture(&args, "7", Some("8"));
        if a.1.is_empty() || a != b || t1 != t8 || a != t1 {
            bad.push(name.to_string());
        }
    }
    bad
}
