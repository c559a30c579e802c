//! End-to-end extraction for one page: ingest, embed, build the graph, seed,
//! propagate, threshold.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::dom::{extract_text_blocks, parse_document_bytes, IngestError, TextBlock};
use crate::embeddings::{embed_block, EmbeddingTable};
use crate::eval::{GroundTruthPage, PredictedBlock, Prediction};
use crate::graph::{build_graph, resolve_rbf, GraphError, KernelSpec, SigmaSpec};
use crate::seeds::{apply_heuristics, sample_seeds, RuleSet, SeedError, SeedStrategy};
use crate::solver::{
    solve_direct, solve_iterative, IterativeOptions, PropagationResult, SeedSet, SolverError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Inner,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Iterative,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedMode {
    /// DOM rules; falls back to truth sampling when no rule fires and truth
    /// is available.
    Heuristic,
    /// Sample a fraction of the ground truth.
    Truth,
}

/// Everything that determines a page's prediction. Echoed into every
/// prediction document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub kernel: KernelChoice,
    pub sigma: SigmaSpec,
    pub knn: Option<usize>,
    pub solver: SolverKind,
    pub tol: f64,
    pub max_iters: Option<usize>,
    pub threshold: f64,
    pub seed_mode: SeedMode,
    pub seed_fraction: f64,
    pub seed_strategy: SeedStrategy,
    pub rules: RuleSet,
    pub embeddings: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kernel: KernelChoice::Rbf,
            sigma: SigmaSpec::Median,
            knn: None,
            solver: SolverKind::Iterative,
            tol: 1e-8,
            max_iters: None,
            threshold: 0.5,
            seed_mode: SeedMode::Heuristic,
            seed_fraction: 0.2,
            seed_strategy: SeedStrategy::First,
            rules: RuleSet::defaults(),
            embeddings: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_owned()));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol must be positive");
        }
        if self.max_iters == Some(0) {
            return bad("max-iters must be positive");
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1)");
        }
        if !(self.seed_fraction > 0.0 && self.seed_fraction <= 1.0) {
            return bad("seed fraction must lie in (0, 1]");
        }
        if self.knn == Some(0) {
            return bad("knn must be positive");
        }
        if let SigmaSpec::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad("sigma must be positive");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Seed(#[from] SeedError),
    #[error(transparent)]
    Solver(#[from] SolverError<f64>),
    #[error("truth seeding requested but no ground truth for this page")]
    MissingTruth,
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl PipelineError {
    pub fn is_convergence(&self) -> bool {
        matches!(self, PipelineError::Solver(SolverError::NotConverged(_)))
    }
}

/// Full output for one page.
#[derive(Debug, Clone)]
pub struct PageOutput {
    pub prediction: Prediction,
    pub blocks: Vec<TextBlock>,
    /// `None` for pages without text blocks.
    pub propagation: Option<PropagationResult<f64>>,
}

/// Run the whole pipeline on one page.
pub fn run_page(
    page_id: &str,
    html: &[u8],
    table: &EmbeddingTable<f64>,
    config: &PipelineConfig,
    truth: Option<&GroundTruthPage>,
) -> Result<PageOutput, PipelineError> {
    config.validate()?;
    let config_echo = serde_json::to_value(config).expect("config serializes");
    let tree = parse_document_bytes(html)?;
    let blocks = extract_text_blocks(&tree);
    if blocks.is_empty() {
        return Ok(PageOutput {
            prediction: Prediction {
                page_id: page_id.to_owned(),
                config: config_echo,
                blocks: Vec::new(),
                diagnostics: Some(json!({ "blocks": 0 })),
            },
            blocks,
            propagation: None,
        });
    }

    let vectors: Vec<_> = blocks.iter().map(|b| embed_block(&b.text, table)).collect();
    let oov_blocks = vectors.iter().filter(|v| v.is_oov()).count();
    let kernel = match config.kernel {
        KernelChoice::Inner => KernelSpec::InnerProduct,
        KernelChoice::Rbf => resolve_rbf(&vectors, config.sigma)?,
    };
    let graph = build_graph(&vectors, kernel, config.knn)?;

    let (seeds, seed_source) = choose_seeds(&blocks, config, truth)?;

    let mut result = match config.solver {
        SolverKind::Iterative => {
            let opts = IterativeOptions {
                tol: config.tol,
                max_iters: config.max_iters,
                init: 1.0,
            };
            solve_iterative(&graph, &seeds, &opts)?
        }
        SolverKind::Direct => solve_direct(&graph, &seeds)?,
    };
    result.relabel(config.threshold);

    let predicted = blocks
        .iter()
        .map(|b| PredictedBlock {
            dom_path: b.dom_path.clone(),
            text_hash: b.text_hash.clone(),
            score: result.scores[b.index],
            label: result.labels[b.index],
            seed: seeds.contains(b.index),
        })
        .collect();

    let sigma = match kernel {
        KernelSpec::Rbf { sigma } => Some(sigma),
        KernelSpec::InnerProduct => None,
    };
    let diagnostics = json!({
        "blocks": blocks.len(),
        "oov_blocks": oov_blocks,
        "sigma": sigma,
        "seed_source": seed_source,
        "seeds": seeds.len(),
        "iterations": result.iterations,
        "residual": result.residual,
        "energy": result.energy,
        "isolated": result.isolated,
        "warnings": result.warnings,
    });

    Ok(PageOutput {
        prediction: Prediction {
            page_id: page_id.to_owned(),
            config: config_echo,
            blocks: predicted,
            diagnostics: Some(diagnostics),
        },
        blocks,
        propagation: Some(result),
    })
}

fn choose_seeds(
    blocks: &[TextBlock],
    config: &PipelineConfig,
    truth: Option<&GroundTruthPage>,
) -> Result<(SeedSet, &'static str), PipelineError> {
    let from_truth = |truth: Option<&GroundTruthPage>| {
        let truth = truth.ok_or(PipelineError::MissingTruth)?;
        Ok::<_, PipelineError>(sample_seeds(
            truth,
            blocks,
            config.seed_fraction,
            config.seed_strategy,
        )?)
    };
    match config.seed_mode {
        SeedMode::Truth => Ok((from_truth(truth)?, "truth")),
        SeedMode::Heuristic => match apply_heuristics(blocks, &config.rules) {
            Ok(s) => Ok((s, "heuristic")),
            Err(SeedError::Empty) if truth.is_some() => {
                log::warn!("no heuristic rule fired; seeding from ground truth");
                Ok((from_truth(truth)?, "truth-fallback"))
            }
            Err(e) => Err(e.into()),
        },
    }
}
