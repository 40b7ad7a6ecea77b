//! Writing CSV/JSON artifacts with their provenance sidecars, and checking
//! them again.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::error::{CliError, CliResult};

pub const TOOL_NAME: &str = "timeorder";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SIDECAR_SUFFIX: &str = ".meta.json";

/// Command output: a body plus, for CSV bodies, sidecar metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub format: Format,
    pub body: Vec<u8>,
    pub meta: Option<Value>,
}

impl Artifact {
    pub fn json(value: &Value) -> Self {
        let mut body = serde_json::to_vec_pretty(value).expect("JSON value serialises");
        body.push(b'\n');
        Artifact { format: Format::Json, body, meta: None }
    }

    pub fn csv(body: Vec<u8>, meta: Value) -> Self {
        Artifact { format: Format::Csv, body, meta: Some(meta) }
    }
}

/// Fields shared by every report and sidecar.
pub fn provenance(command: &str, run: &RunConfig) -> Value {
    json!({
        "tool": TOOL_NAME,
        "version": TOOL_VERSION,
        "command": command,
        "config_hash": run.hash(),
        "config": run,
    })
}

/// Merges the keys of `extra` into the object `base`.
pub fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

/// RFC 4180 table with LF line endings; floats in shortest round-trip
/// exponent form.
pub fn csv_table(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> CliResult<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    let to_err = |e: csv::Error| CliError::io("<csv>", std::io::Error::other(e));
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| CliError::io("<csv>", std::io::Error::other(e.to_string())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sidecar_path(data: &Path) -> PathBuf {
    let mut s = data.as_os_str().to_owned();
    s.push(SIDECAR_SUFFIX);
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes the artifact to `out` (and its sidecar next to it), or the body to
/// stdout when `out` is `None`. Returns the files written.
pub fn write_artifact(artifact: &Artifact, out: Option<&Path>) -> CliResult<Vec<PathBuf>> {
    let Some(path) = out else {
        std::io::stdout().write_all(&artifact.body).map_err(|e| CliError::io("<stdout>", e))?;
        return Ok(vec![]);
    };
    write_file(path, &artifact.body)?;
    let mut written = vec![path.to_path_buf()];
    if let Some(meta) = &artifact.meta {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let meta = merge(meta.clone(), json!({"data_file": name, "data_sha256": sha256_hex(&artifact.body)}));
        let side = sidecar_path(path);
        write_file(&side, &Artifact::json(&meta).body)?;
        written.push(side);
    }
    Ok(written)
}

/// Outcome of [`verify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub config_hash: String,
    pub data_checked: bool,
}

/// Recomputes the config hash of a report or sidecar and, for sidecars, the
/// digest of the data file. A CSV path is resolved to its sidecar.
pub fn verify(path: &Path) -> CliResult<Verification> {
    let meta_path = if path.extension().is_some_and(|e| e == "csv") { sidecar_path(path) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Verify(format!("{}: {e}", meta_path.display())))?;
    let stored = doc["config_hash"].as_str().ok_or_else(|| CliError::Verify("no config_hash field".into()))?;
    let run: RunConfig = serde_json::from_value(doc["config"].clone())
        .map_err(|e| CliError::Verify(format!("embedded config does not parse: {e}")))?;
    let actual = run.hash();
    if actual != stored {
        return Err(CliError::Verify(format!("config hash {stored} does not match recomputed {actual}")));
    }
    let mut data_checked = false;
    if let Some(name) = doc["data_file"].as_str() {
        let data = meta_path.parent().unwrap_or(Path::new(".")).join(name);
        let bytes = std::fs::read(&data).map_err(|e| CliError::io(&data, e))?;
        let want = doc["data_sha256"].as_str().unwrap_or_default();
        let got = sha256_hex(&bytes);
        if got != want {
            return Err(CliError::Verify(format!("{} has digest {got}, sidecar records {want}", data.display())));
        }
        data_checked = true;
    }
    Ok(Verification { config_hash: actual, data_checked })
}
