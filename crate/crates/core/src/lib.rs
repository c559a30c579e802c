//! Boilerplate removal by harmonic label propagation.
//!
//! Every leaf text node of an HTML page becomes a node in a similarity graph
//! whose edge weights come from averaged word embeddings. A handful of nodes
//! receive seed labels (heuristic rules or sampled ground truth) and the rest
//! are labeled with the minimum-energy harmonic function over the graph,
//! thresholded into relevant / noise.
//!
//! The numeric modules ([`embeddings`], [`graph`], [`solver`]) are generic over
//! the [`Scalar`] type; the aliases below pin them to `f64` or `f32`.

pub mod dom;
pub mod embeddings;
pub mod eval;
pub mod graph;
pub mod json;
mod linalg;
pub mod pipeline;
pub mod scalar;
pub mod seeds;
pub mod solver;
pub mod synthetic;

pub use dom::{extract_text_blocks, normalize_text, parse_document, DomTree, TextBlock};
pub use embeddings::{embed_block, tokenize, EmbeddingTable, FeatureVector};
pub use eval::{aggregate, compare, EvalReport, GroundTruthPage, Prediction, Summary};
pub use graph::{build_graph, similarity, KernelSpec, SigmaSpec, SimilarityGraph};
pub use scalar::Scalar;
pub use seeds::{apply_heuristics, sample_seeds, HeuristicRule, SeedStrategy};
pub use solver::{
    binarize, energy, solve_direct, solve_iterative, IterativeOptions, Label, PropagationResult,
    SeedSet, SolverError,
};

/// Double-precision similarity graph.
pub type Graph = SimilarityGraph<f64>;
/// Single-precision similarity graph.
pub type GraphF32 = SimilarityGraph<f32>;
/// Double-precision embedding table.
pub type Table = EmbeddingTable<f64>;
/// Single-precision embedding table.
pub type TableF32 = EmbeddingTable<f32>;
/// Double-precision block vector.
pub type Vector = FeatureVector<f64>;
/// Double-precision propagation output.
pub type Propagation = PropagationResult<f64>;
/// Single-precision propagation output.
pub type PropagationF32 = PropagationResult<f32>;
