//! Test bed: score predicted block labels against human ground truth.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::Label;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("page {0}: no predicted block matches the ground truth")]
    NoOverlap(String),
    #[error("no reports to aggregate")]
    Empty,
    #[error("invalid ground truth: {0}")]
    Schema(String),
}

/// One human-labeled block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthBlock {
    pub dom_path: String,
    pub text_hash: String,
    pub label: Label,
}

/// Human labels for one page, as written by the tagging tool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthPage {
    pub page_id: String,
    pub blocks: Vec<TruthBlock>,
}

impl GroundTruthPage {
    /// Parse and validate a ground-truth document.
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let page: Self =
            serde_json::from_str(text).map_err(|e| EvalError::Schema(e.to_string()))?;
        page.validate()?;
        Ok(page)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let mut seen = HashSet::new();
        for b in &self.blocks {
            if !seen.insert(b.dom_path.as_str()) {
                return Err(EvalError::Schema(format!(
                    "duplicate dom_path {}",
                    b.dom_path
                )));
            }
            let hex_ok = b.text_hash.len() == 16
                && b.text_hash
                    .bytes()
                    .all(|c| c.is_ascii_digit() || (b'a'..=b'f').contains(&c));
            if !hex_ok {
                return Err(EvalError::Schema(format!(
                    "text_hash {:?} is not 16 lowercase hex digits",
                    b.text_hash
                )));
            }
        }
        Ok(())
    }
}

/// Per-block output of the extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedBlock {
    pub dom_path: String,
    pub text_hash: String,
    pub score: f64,
    pub label: Label,
    pub seed: bool,
}

/// Prediction document for one page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub page_id: String,
    /// Resolved configuration that produced this output.
    pub config: serde_json::Value,
    pub blocks: Vec<PredictedBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<serde_json::Value>,
}

/// Confusion counts and metrics for one page. Undefined ratios are `None`
/// (`null` in JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub page_id: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub matched: usize,
    pub unmatched_pred: usize,
    pub unmatched_truth: usize,
    pub seeds_excluded: bool,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl EvalReport {
    /// Build a report from raw counts.
    pub fn from_counts(
        page_id: impl Into<String>,
        tp: usize,
        fp: usize,
        fn_: usize,
        tn: usize,
    ) -> Self {
        let matched = tp + fp + fn_ + tn;
        Self {
            page_id: page_id.into(),
            tp,
            fp,
            fn_,
            tn,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            accuracy: ratio(tp + tn, matched),
            matched,
            unmatched_pred: 0,
            unmatched_truth: 0,
            seeds_excluded: false,
        }
    }
}

/// Match predicted blocks to truth on `(dom_path, text_hash)` and count.
/// Relevant (1) is the positive class.
pub fn compare(
    pred: &Prediction,
    truth: &GroundTruthPage,
    exclude_seeds: bool,
) -> Result<EvalReport, EvalError> {
    let lookup: HashMap<(&str, &str), Label> = truth
        .blocks
        .iter()
        .map(|b| ((b.dom_path.as_str(), b.text_hash.as_str()), b.label))
        .collect();

    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    let mut unmatched_pred = 0;
    let mut hit: HashSet<(&str, &str)> = HashSet::new();
    for b in &pred.blocks {
        let key = (b.dom_path.as_str(), b.text_hash.as_str());
        let Some(&actual) = lookup.get(&key) else {
            unmatched_pred += 1;
            continue;
        };
        hit.insert(key);
        if exclude_seeds && b.seed {
            continue;
        }
        match (b.label, actual) {
            (Label::Relevant, Label::Relevant) => tp += 1,
            (Label::Relevant, Label::Noise) => fp += 1,
            (Label::Noise, Label::Relevant) => fn_ += 1,
            (Label::Noise, Label::Noise) => tn += 1,
        }
    }

    let mut report = EvalReport::from_counts(pred.page_id.clone(), tp, fp, fn_, tn);
    if report.matched == 0 {
        return Err(EvalError::NoOverlap(pred.page_id.clone()));
    }
    report.unmatched_pred = unmatched_pred;
    report.unmatched_truth = lookup.len() - hit.len();
    report.seeds_excluded = exclude_seeds;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Unweighted mean over pages.
    #[default]
    Macro,
    /// Metrics of the pooled counts.
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMean {
    pub mean: Option<f64>,
    /// Pages left out because the metric was undefined there.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub pages: usize,
    pub averaging: Averaging,
    pub precision: MetricMean,
    pub recall: MetricMean,
    pub f1: MetricMean,
    pub accuracy: MetricMean,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> MetricMean {
    let (mut sum, mut count, mut excluded) = (0.0, 0usize, 0usize);
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                count += 1;
            }
            None => excluded += 1,
        }
    }
    MetricMean {
        mean: (count > 0).then(|| sum / count as f64),
        excluded,
    }
}

/// Average page reports.
pub fn aggregate(reports: &[EvalReport], averaging: Averaging) -> Result<Summary, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Empty);
    }
    let tp = reports.iter().map(|r| r.tp).sum();
    let fp = reports.iter().map(|r| r.fp).sum();
    let fn_ = reports.iter().map(|r| r.fn_).sum();
    let tn = reports.iter().map(|r| r.tn).sum();

    let (precision, recall, f1, accuracy) = match averaging {
        Averaging::Macro => (
            mean_defined(reports.iter().map(|r| r.precision)),
            mean_defined(reports.iter().map(|r| r.recall)),
            mean_defined(reports.iter().map(|r| r.f1)),
            mean_defined(reports.iter().map(|r| r.accuracy)),
        ),
        Averaging::Micro => {
            let pooled = EvalReport::from_counts("", tp, fp, fn_, tn);
            let one = |v: Option<f64>| MetricMean {
                mean: v,
                excluded: 0,
            };
            (
                one(pooled.precision),
                one(pooled.recall),
                one(pooled.f1),
                one(pooled.accuracy),
            )
        }
    };

    Ok(Summary {
        pages: reports.len(),
        averaging,
        precision,
        recall,
        f1,
        accuracy,
        tp,
        fp,
        fn_,
        tn,
    })
}
