//! `extract`: run the pipeline over a set of snapshots.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use harmonic_extract::embeddings::load_table;
use harmonic_extract::eval::GroundTruthPage;
use harmonic_extract::json::to_canonical_string;
use harmonic_extract::pipeline::{run_page, PipelineConfig, SeedMode};
use harmonic_extract::Table;
use rayon::prelude::*;
use serde_json::json;

use crate::args::ExtractArgs;
use crate::fsio::{collect_html, load_truth_dir, page_id, write_atomic};
use crate::{CliError, CliResult, ExitKind};

#[derive(Debug)]
pub struct PageFailure {
    pub page_id: String,
    pub kind: ExitKind,
    pub message: String,
}

impl PageFailure {
    /// One-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        let kind = match self.kind {
            ExitKind::Convergence => "convergence",
            ExitKind::Usage => "usage",
            ExitKind::Data => "data",
        };
        json!({ "page": self.page_id, "kind": kind, "error": self.message }).to_string()
    }
}

#[derive(Debug, Default)]
pub struct ExtractSummary {
    pub written: Vec<PathBuf>,
    pub failures: Vec<PageFailure>,
}

impl ExtractSummary {
    /// The error to exit with, if any page failed. Data errors outrank
    /// convergence failures.
    pub fn exit_error(&self) -> Option<CliError> {
        if self.failures.is_empty() {
            return None;
        }
        let kind = if self
            .failures
            .iter()
            .any(|f| f.kind != ExitKind::Convergence)
        {
            ExitKind::Data
        } else {
            ExitKind::Convergence
        };
        Some(CliError {
            kind,
            message: format!("{} page(s) failed", self.failures.len()),
        })
    }
}

/// Shared, read-only inputs for every page.
pub struct ExtractContext {
    pub config: PipelineConfig,
    pub table: Table,
    pub truth: BTreeMap<String, GroundTruthPage>,
    pub out: PathBuf,
}

impl ExtractContext {
    pub fn from_args(args: &ExtractArgs) -> CliResult<Self> {
        let config = args.pipeline_config()?;
        let table = load_table(&args.embeddings)
            .map_err(|e| CliError::data(format!("{}: {e}", args.embeddings.display())))?;
        let truth = match &args.truth {
            Some(dir) => load_truth_dir(dir)?,
            None if config.seed_mode == SeedMode::Truth => {
                return Err(CliError::usage("--seed-mode truth needs --truth <dir>"))
            }
            None => BTreeMap::new(),
        };
        Ok(Self {
            config,
            table,
            truth,
            out: args.out.clone(),
        })
    }

    /// Process one snapshot and write `<out>/<page_id>.json`.
    pub fn process(&self, path: &Path) -> Result<PathBuf, PageFailure> {
        let id = page_id(path);
        let fail = |kind, message: String| PageFailure {
            page_id: id.clone(),
            kind,
            message,
        };
        let bytes = fs::read(path).map_err(|e| fail(ExitKind::Data, e.to_string()))?;
        let output = run_page(&id, &bytes, &self.table, &self.config, self.truth.get(&id))
            .map_err(|e| {
                let kind = if e.is_convergence() {
                    ExitKind::Convergence
                } else {
                    ExitKind::Data
                };
                fail(kind, e.to_string())
            })?;
        let text = to_canonical_string(&output.prediction)
            .map_err(|e| fail(ExitKind::Data, e.to_string()))?;
        let dest = self.out.join(format!("{id}.json"));
        write_atomic(&dest, text.as_bytes()).map_err(|e| fail(ExitKind::Data, e.to_string()))?;
        Ok(dest)
    }
}

pub fn run(args: &ExtractArgs) -> CliResult<ExtractSummary> {
    let ctx = ExtractContext::from_args(args)?;
    let files = collect_html(&args.inputs)?;
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(format!("{}: {e}", args.out.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;

    let halted = AtomicBool::new(false);
    let results: Vec<Option<Result<PathBuf, PageFailure>>> = pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                if halted.load(Ordering::Relaxed) {
                    return None;
                }
                let r = ctx.process(f);
                if r.is_err() && !args.continue_on_error {
                    halted.store(true, Ordering::Relaxed);
                }
                Some(r)
            })
            .collect()
    });

    let mut summary = ExtractSummary::default();
    for r in results.into_iter().flatten() {
        match r {
            Ok(p) => summary.written.push(p),
            Err(f) => summary.failures.push(f),
        }
    }
    Ok(summary)
}
