//! Config resolution, input checks and the `run.json` echo.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::{Globals, UsageError};

pub fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(UsageError(format!("{what} {} is not a file", path.display())).into())
    }
}

pub fn require_dir(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(UsageError(format!("{what} {} is not a directory", path.display())).into())
    }
}

/// Starts from `base` (defaults with flags applied) and replaces every key
/// present in the JSON object at `path`.
pub fn overlay<T: Serialize + DeserializeOwned>(base: T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(base) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let Value::Object(file) = file else {
        anyhow::bail!(UsageError(format!("{} must hold a JSON object", path.display())));
    };
    let mut merged = serde_json::to_value(base)?;
    let obj = merged.as_object_mut().expect("configs serialize to objects");
    for (k, v) in file {
        obj.insert(k, v);
    }
    serde_json::from_value(merged).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Writes `run.json` into `dir`: command, tool version, globals, resolved
/// configuration and any results worth keeping next to the outputs.
///
/// Runs of other commands already recorded in the directory (a dataset is
/// written by `build` and then by `decoys`) move to `history`; a rerun of
/// the same command replaces its earlier record.
pub fn echo(dir: &Path, command: &str, g: Globals, config: Value, results: Value) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("run.json");
    let mut history = Vec::new();
    if let Some(Value::Object(mut prev)) =
        std::fs::read_to_string(&path).ok().and_then(|t| serde_json::from_str::<Value>(&t).ok())
    {
        if let Some(Value::Array(h)) = prev.remove("history") {
            history = h;
        }
        history.push(Value::Object(prev));
        history.retain(|r| r.get("command").and_then(Value::as_str) != Some(command));
    }
    let run = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": g.seed,
        "workers": g.workers,
        "config": config,
        "results": results,
        "history": history,
    });
    write_json(&path, &run)
}

/// Writes to stdout; a closed pipe (`| head`) ends output quietly.
pub fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

pub fn print(g: Globals, value: &impl Serialize, text: impl FnOnce() -> String) -> Result<()> {
    if g.json {
        emit(&(serde_json::to_string_pretty(value)? + "\n"))
    } else {
        emit(&text())
    }
}
