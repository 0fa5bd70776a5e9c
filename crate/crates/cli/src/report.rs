//! Run outputs. `result.json` and the artifacts are pure functions of the inputs,
//! parameters and seed; `report.json` adds the config echo, input hashes and timing.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError};

pub const RESULT_FILE: &str = "result.json";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub result: Value,
    /// (file name, contents), written next to `result.json`.
    pub artifacts: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn new(result: Value) -> Self {
        Outcome {
            result,
            artifacts: Vec::new(),
        }
    }

    pub fn artifact(mut self, name: &str, contents: impl Into<Vec<u8>>) -> Self {
        self.artifacts.push((name.to_string(), contents.into()));
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub bytes: usize,
    /// SHA-256 over `blob <len>\0<contents>`, the git object framing.
    pub blob_sha256: String,
}

pub fn blob_hash(contents: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", contents.len()).as_bytes());
    h.update(contents);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn digest_inputs(paths: &[PathBuf]) -> Result<Vec<InputDigest>, CliError> {
    paths
        .iter()
        .map(|p| {
            let data = std::fs::read(p).map_err(io_err(p))?;
            Ok(InputDigest {
                path: p.clone(),
                bytes: data.len(),
                blob_sha256: blob_hash(&data),
            })
        })
        .collect()
}

pub fn to_pretty(v: &impl Serialize) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("values serialize");
    s.push(b'\n');
    s
}

pub struct RunMeta<'a> {
    pub command: &'a str,
    pub seed: u64,
    pub workers: usize,
    pub params: Value,
    pub inputs: Vec<InputDigest>,
    pub wall_seconds: f64,
}

pub fn write_outputs(out: &Path, meta: RunMeta<'_>, outcome: &Outcome) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let write = |name: &str, data: &[u8]| {
        let p = out.join(name);
        std::fs::write(&p, data).map_err(io_err(p))
    };
    write(RESULT_FILE, &to_pretty(&outcome.result))?;
    for (name, data) in &outcome.artifacts {
        write(name, data)?;
    }
    let report = json!({
        "command": meta.command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": meta.seed,
        "config": meta.params,
        "inputs": meta.inputs,
        "artifacts": outcome.artifacts.iter().map(|(n, d)| json!({"file": n, "blob_sha256": blob_hash(d)})).collect::<Vec<_>>(),
        "timing": { "wall_seconds": meta.wall_seconds, "workers": meta.workers },
        "result": outcome.result,
    });
    write(REPORT_FILE, &to_pretty(&report))
}
