//! Deterministic generator for a small news-like evaluation corpus.
//!
//! Article text draws its words from one vocabulary and page chrome (menus,
//! related links, footers) from a disjoint one. The bundled word-vector table
//! places each vocabulary around its own centre, so the two kinds of block
//! form separate clusters in embedding space.

use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dom::{extract_text_blocks, parse_document};
use crate::eval::{GroundTruthPage, TruthBlock};
use crate::solver::Label;

pub const DIM: usize = 16;

const CONTENT_SYLLABLES: [&str; 10] = [
    "ka", "lo", "mi", "ren", "to", "sa", "vu", "dra", "pel", "no",
];
const CHROME_SYLLABLES: [&str; 8] = ["zix", "qua", "bex", "fyr", "jot", "wek", "hux", "gry"];

#[derive(Debug, Clone)]
pub struct SyntheticPage {
    pub id: String,
    pub html: String,
    pub truth: GroundTruthPage,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    /// GloVe-format word vectors covering both vocabularies.
    pub embeddings: String,
    pub pages: Vec<SyntheticPage>,
}

fn vocabulary(syllables: &[&str], size: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut words: Vec<String> = Vec::with_capacity(size);
    while words.len() < size {
        let parts = rng.random_range(2..=3);
        let w: String = (0..parts)
            .map(|_| *syllables.choose(rng).expect("non-empty"))
            .collect();
        if !words.contains(&w) {
            words.push(w);
        }
    }
    words
}

fn sentence(vocab: &[String], len: usize, rng: &mut ChaCha8Rng) -> String {
    (0..len)
        .map(|_| vocab.choose(rng).expect("non-empty").as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generate `pages` pages plus the embedding table, reproducibly from `seed`.
pub fn generate(seed: u64, pages: usize) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let content = vocabulary(&CONTENT_SYLLABLES, 60, &mut rng);
    let chrome = vocabulary(&CHROME_SYLLABLES, 40, &mut rng);

    let mut embeddings = String::new();
    for (vocab, centre) in [(&content, 0.6), (&chrome, -0.6)] {
        for w in vocab {
            embeddings.push_str(w);
            for _ in 0..DIM {
                let v: f64 = centre + rng.random_range(-0.5..0.5);
                let _ = write!(embeddings, " {v:.6}");
            }
            embeddings.push('\n');
        }
    }

    let pages = (0..pages)
        .map(|i| page(&format!("news-{:02}", i + 1), &content, &chrome, &mut rng))
        .collect();
    SyntheticCorpus { embeddings, pages }
}

fn page(id: &str, content: &[String], chrome: &[String], rng: &mut ChaCha8Rng) -> SyntheticPage {
    // (text, label) in document order, checked against extraction below
    let mut expected: Vec<(String, Label)> = Vec::new();
    let mut html = String::from("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n");

    let title = sentence(content, rng.random_range(4..=8), rng);
    let _ = writeln!(html, "<meta charset=\"utf-8\">\n<title>{title}</title>");
    html.push_str("<style>body { font-family: serif; }</style>\n</head>\n<body>\n");
    expected.push((title.clone(), Label::Relevant));

    let lede = sentence(content, rng.random_range(10..=18), rng);
    let _ = writeln!(
        html,
        "<div class=\"masthead\">\n  <h1>{title}</h1>\n  <p class=\"lede\">{lede}</p>\n</div>"
    );
    expected.push((title, Label::Relevant));
    expected.push((lede, Label::Relevant));

    html.push_str("<nav>\n  <ul>\n");
    for _ in 0..rng.random_range(2..=3) {
        let link = sentence(chrome, rng.random_range(1..=3), rng);
        let _ = writeln!(html, "    <li><a href=\"#\">{link}</a></li>");
        expected.push((link, Label::Noise));
    }
    html.push_str("  </ul>\n</nav>\n<div class=\"story\">\n");

    for _ in 0..rng.random_range(11..=15) {
        let mut para = sentence(content, rng.random_range(8..=16), rng);
        if rng.random_bool(0.3) {
            // out-of-vocabulary token
            let _ = write!(para, " {}", rng.random_range(1990..2030));
        }
        let _ = writeln!(html, "  <p>{para}</p>");
        expected.push((para, Label::Relevant));
    }
    html.push_str("</div>\n<aside class=\"related\">\n");

    let heading = sentence(chrome, 2, rng);
    let _ = writeln!(html, "  <h3>{heading}</h3>\n  <ul>");
    expected.push((heading, Label::Noise));
    for _ in 0..rng.random_range(1..=2) {
        let link = sentence(chrome, rng.random_range(2..=4), rng);
        let _ = writeln!(html, "    <li><a href=\"#\">{link}</a></li>");
        expected.push((link, Label::Noise));
    }
    html.push_str("  </ul>\n</aside>\n<footer>\n");

    for _ in 0..rng.random_range(1..=2) {
        let line = sentence(chrome, rng.random_range(2..=5), rng);
        let _ = writeln!(html, "  <p>{line}</p>");
        expected.push((line, Label::Noise));
    }
    html.push_str(
        "</footer>\n<script>window.analytics = { page: 1 };</script>\n</body>\n</html>\n",
    );

    let blocks = extract_text_blocks(&parse_document(&html));
    assert_eq!(blocks.len(), expected.len(), "generator layout drifted");
    let truth = GroundTruthPage {
        page_id: id.to_owned(),
        blocks: blocks
            .iter()
            .zip(&expected)
            .map(|(b, (text, label))| {
                assert_eq!(&b.text, text, "generator layout drifted");
                TruthBlock {
                    dom_path: b.dom_path.clone(),
                    text_hash: b.text_hash.clone(),
                    label: *label,
                }
            })
            .collect(),
    };

    SyntheticPage {
        id: id.to_owned(),
        html,
        truth,
    }
}
