use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{input, runtime, CliError, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

fn sha256(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Run state shared by subcommands: the base seed and every input read.
pub struct Ctx {
    pub seed: u64,
    inputs: Vec<FileDigest>,
}

impl Ctx {
    pub fn new(seed: u64) -> Self {
        Self { seed, inputs: Vec::new() }
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256(&bytes), bytes: bytes.len() });
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String> {
        String::from_utf8(self.read(path)?).map_err(|_| input(format!("{} is not UTF-8", path.display())))
    }
}

/// Files and summary values produced by a subcommand, held in memory until
/// the whole run has succeeded.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    summary: Map<String, Value>,
}

impl Outputs {
    pub fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn csv<F>(&mut self, name: &str, header: &[&str], fill: F) -> Result<()>
    where
        F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        fill(&mut w)?;
        let bytes = w.into_inner().map_err(|e| runtime(e.to_string()))?;
        self.file(name, bytes);
        Ok(())
    }

    pub fn with<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> laborflow::Result<()>,
    {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.file(name, buf);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| runtime(e.to_string()))?;
        bytes.push(b'\n');
        self.file(name, bytes);
        Ok(())
    }

    pub fn note<T: Serialize>(&mut self, key: &str, value: T) {
        self.summary.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

pub fn num(v: f64) -> String {
    v.to_string()
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes every output (then the manifest) under `out`, each through a
/// temporary file; on failure removes whatever was written.
pub fn commit(out: &Path, command: &str, params: Value, ctx: Ctx, outputs: Outputs) -> Result<Value> {
    let digests: Vec<FileDigest> = outputs
        .files
        .iter()
        .map(|(name, bytes)| FileDigest { path: name.clone(), sha256: sha256(bytes), bytes: bytes.len() })
        .collect();
    let manifest = json!({
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "seed": ctx.seed,
        "parameters": params,
        "inputs": ctx.inputs,
        "outputs": digests,
        "summary": outputs.summary,
    });
    let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| runtime(e.to_string()))?;
    text.push(b'\n');

    fs::create_dir_all(out).map_err(|e| runtime(format!("cannot create {}: {e}", out.display())))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut all = outputs.files;
    all.push((MANIFEST_FILE.to_string(), text));
    for (name, bytes) in &all {
        let target = out.join(name);
        let tmp = out.join(format!(".{name}.tmp"));
        let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, &target));
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(CliError::Runtime(format!("cannot write {}: {e}", target.display())));
        }
        written.push(target);
    }
    Ok(manifest)
}
