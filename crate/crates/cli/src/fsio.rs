//! File helpers shared by the commands.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use harmonic_extract::eval::{GroundTruthPage, Prediction};

use crate::{CliError, CliResult};

/// Write through a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn files_with_ext(dir: &Path, exts: &[&str]) -> CliResult<Vec<PathBuf>> {
    let entries =
        fs::read_dir(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| exts.iter().any(|e| x.eq_ignore_ascii_case(e)))
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Expand files and directories into a sorted list of HTML files.
pub fn collect_html(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(files_with_ext(p, &["html", "htm"])?);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::usage(format!("no such input: {}", p.display())));
        }
    }
    Ok(out)
}

/// Page id of an input file: its file stem.
pub fn page_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Load every `*.json` ground-truth file in a directory, keyed by page id.
pub fn load_truth_dir(dir: &Path) -> CliResult<BTreeMap<String, GroundTruthPage>> {
    let mut out = BTreeMap::new();
    for path in files_with_ext(dir, &["json"])? {
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let page = GroundTruthPage::from_json(&text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if out.insert(page.page_id.clone(), page).is_some() {
            return Err(CliError::data(format!(
                "{}: duplicate page_id",
                path.display()
            )));
        }
    }
    Ok(out)
}

/// Load every `*.json` prediction file in a directory, keyed by page id.
pub fn load_prediction_dir(dir: &Path) -> CliResult<BTreeMap<String, Prediction>> {
    let mut out = BTreeMap::new();
    for path in files_with_ext(dir, &["json"])? {
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let pred: Prediction = serde_json::from_str(&text)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        if out.insert(pred.page_id.clone(), pred).is_some() {
            return Err(CliError::data(format!(
                "{}: duplicate page_id",
                path.display()
            )));
        }
    }
    Ok(out)
}
