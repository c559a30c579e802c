//! `synth`: write the synthetic news corpus to disk.

use std::path::Path;

use harmonic_extract::json::to_canonical_string;
use harmonic_extract::synthetic::generate;

use crate::args::SynthArgs;
use crate::fsio::write_atomic;
use crate::{CliError, CliResult};

/// Seed of the bundled corpus.
pub const DEFAULT_SEED: u64 = 20190101;

/// Writes `embeddings.txt`, `pages/<id>.html` and `truth/<id>.json`.
pub fn write_corpus(out: &Path, pages: usize, seed: u64) -> CliResult<()> {
    let corpus = generate(seed, pages);
    let io = |e: std::io::Error| CliError::data(format!("{}: {e}", out.display()));
    write_atomic(&out.join("embeddings.txt"), corpus.embeddings.as_bytes()).map_err(io)?;
    for page in &corpus.pages {
        write_atomic(
            &out.join("pages").join(format!("{}.html", page.id)),
            page.html.as_bytes(),
        )
        .map_err(io)?;
        let truth = to_canonical_string(&page.truth).map_err(|e| CliError::data(e.to_string()))?;
        write_atomic(
            &out.join("truth").join(format!("{}.json", page.id)),
            truth.as_bytes(),
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    write_corpus(&args.out, args.pages, args.seed)
}
