//! `evaluate`: the file-to-file test bed.

use std::fmt::Write as _;

use harmonic_extract::eval::{aggregate, compare, Averaging, EvalReport, Summary};
use harmonic_extract::json::to_canonical_string;
use serde::Serialize;

use crate::args::EvaluateArgs;
use crate::fsio::{load_prediction_dir, load_truth_dir, write_atomic};
use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationOutput {
    pub pages: Vec<EvalReport>,
    pub summary: Summary,
}

pub fn run(args: &EvaluateArgs) -> CliResult<EvaluationOutput> {
    let preds = load_prediction_dir(&args.pred)?;
    let truths = load_truth_dir(&args.truth)?;

    let missing_truth: Vec<&str> = preds
        .keys()
        .filter(|k| !truths.contains_key(*k))
        .map(String::as_str)
        .collect();
    let missing_pred: Vec<&str> = truths
        .keys()
        .filter(|k| !preds.contains_key(*k))
        .map(String::as_str)
        .collect();
    if !missing_truth.is_empty() || !missing_pred.is_empty() {
        return Err(CliError::data(format!(
            "page ids do not match: no truth for [{}], no prediction for [{}]",
            missing_truth.join(", "),
            missing_pred.join(", ")
        )));
    }

    let reports = preds
        .values()
        .map(|p| compare(p, &truths[&p.page_id], !args.include_seeds))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::data(e.to_string()))?;
    let averaging = if args.micro {
        Averaging::Micro
    } else {
        Averaging::Macro
    };
    let summary = aggregate(&reports, averaging).map_err(|e| CliError::data(e.to_string()))?;
    let output = EvaluationOutput {
        pages: reports,
        summary,
    };

    if let Some(path) = &args.out {
        let text = to_canonical_string(&output).map_err(|e| CliError::data(e.to_string()))?;
        write_atomic(path, text.as_bytes())
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    }
    Ok(output)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.4}"))
}

/// Human-readable table of per-page metrics and the aggregate.
pub fn render_table(out: &EvaluationOutput) -> String {
    let width = out
        .pages
        .iter()
        .map(|r| r.page_id.len())
        .max()
        .unwrap_or(4)
        .max(9);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<width$}  {:>7}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}",
        "page", "matched", "precision", "recall", "f1", "accuracy", "unmatched"
    );
    for r in &out.pages {
        let _ = writeln!(
            s,
            "{:<width$}  {:>7}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}",
            r.page_id,
            r.matched,
            cell(r.precision),
            cell(r.recall),
            cell(r.f1),
            cell(r.accuracy),
            r.unmatched_pred + r.unmatched_truth
        );
    }
    let m = &out.summary;
    let label = match m.averaging {
        Averaging::Macro => "macro-avg",
        Averaging::Micro => "micro-avg",
    };
    let _ = writeln!(
        s,
        "{:<width$}  {:>7}  {:>9}  {:>9}  {:>9}  {:>9}",
        label,
        m.tp + m.fp + m.fn_ + m.tn,
        cell(m.precision.mean),
        cell(m.recall.mean),
        cell(m.f1.mean),
        cell(m.accuracy.mean),
    );
    s
}
