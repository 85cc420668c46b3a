#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub fn hcoal() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hcoal"))
}

pub fn run(args: &[&str]) -> Output {
    hcoal().args(args).output().expect("failed to start hcoal")
}

pub fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "hcoal {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes a spec, then runs gen, corrupt and rank. Returns (ai corpus, rank file).
pub fn prepare(dir: &Path, n: usize, strategy: &str) -> (PathBuf, PathBuf) {
    let spec = dir.join("spec.json");
    std::fs::write(
        &spec,
        format!(
            r#"{{"n_examples": {n}, "min_len": 6, "max_len": 20, "entity_types": ["PROBLEM", "TEST", "TREATMENT"],
                "entities_per_example": 2.0, "vocab_size": 300, "seed": 11}}"#
        ),
    )
    .unwrap();
    let noise = dir.join("noise.json");
    std::fs::write(&noise, r#"{"p_miss": 0.1, "p_type": 0.1, "p_boundary": 0.1, "p_spurious": 0.3, "seed": 5}"#)
        .unwrap();
    let gold = dir.join("gold.conll");
    let ai = dir.join("ai.conll");
    let rank = dir.join("rank.json");
    run_ok(&["gen", "--spec", p(&spec), "--out", p(&gold)]);
    run_ok(&["corrupt", "--in", p(&gold), "--noise", p(&noise), "--out", p(&ai)]);
    run_ok(&["rank", "--in", p(&ai), "--strategy", strategy, "--out", p(&rank)]);
    (ai, rank)
}

/// A running `hcoal serve` process bound to an ephemeral port.
pub struct Server {
    pub child: Child,
    pub base: String,
}

impl Server {
    pub fn start(ai: &Path, rank: &Path, budget: f64, journal: &Path, export: &Path) -> Server {
        let mut child = hcoal()
            .args([
                "serve", "--in", p(ai), "--rank", p(rank), "--budget", &budget.to_string(),
                "--port", "0", "--journal", p(journal), "--export", p(export),
            ])
            .stderr(Stdio::piped())
            .stdout(Stdio::null())
            .spawn()
            .unwrap();
        let stderr = child.stderr.take().unwrap();
        let mut line = String::new();
        BufReader::new(stderr).read_line(&mut line).unwrap();
        let base = line
            .split_whitespace()
            .find(|w| w.starts_with("http://"))
            .unwrap_or_else(|| panic!("no address in `{line}`"))
            .to_string();
        Server { child, base }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    /// SIGKILL, no graceful shutdown.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
