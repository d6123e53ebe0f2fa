//! Artifact writing: `<stem>.<command>.json` plus `<stem>.<command>.<field>.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use twisted_hj::grid::ScalarFieldPath;

use crate::commands::Outcome;
use crate::error::CliError;

pub const OUT_DIR_VAR: &str = "TWISTED_HJ_OUT_DIR";

/// `--out`, then the environment override, then the config, then `out`.
pub fn resolve_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_VAR).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    config.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("out"))
}

pub fn write_csv(path: &Path, field: &ScalarFieldPath) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "vertex", "value"])?;
    for (t, x, v) in field.rows() {
        w.serialize((t, x, v))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes all artifacts and returns the pretty-printed summary.
pub fn write(dir: &Path, stem: &str, command: &str, outcome: &Outcome, csv: bool) -> Result<String, CliError> {
    fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(&outcome.summary)?;
    text.push('\n');
    let json_path = dir.join(format!("{stem}.{command}.json"));
    fs::write(&json_path, &text)?;
    log::info!("wrote {}", json_path.display());
    if csv {
        for (name, field) in &outcome.fields {
            let path = dir.join(format!("{stem}.{command}.{name}.csv"));
            write_csv(&path, field)?;
            log::info!("wrote {}", path.display());
        }
    }
    Ok(text)
}
