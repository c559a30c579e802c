//! Initial labels: heuristic DOM rules or a sample of ground truth.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::TextBlock;
use crate::eval::GroundTruthPage;
use crate::solver::{Label, SeedSet};

#[derive(Debug, Error)]
pub enum SeedError {
    #[error("no block matched any seed rule")]
    Empty,
    #[error("rule set is empty")]
    NoRules,
    #[error("duplicate rule priority {0}")]
    DuplicatePriority(i64),
    #[error("ground truth covers {matched} blocks, {needed} seeds needed")]
    Coverage { needed: usize, matched: usize },
    #[error("seed fraction must lie in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("rule file: {0}")]
    RuleFile(String),
}

/// A labeling rule. A block matches when any ancestor's tag is listed in
/// `ancestor_tags`, or any ancestor's `class`/`id` contains one of
/// `attr_substrings` (case-insensitive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicRule {
    pub name: String,
    #[serde(default)]
    pub ancestor_tags: Vec<String>,
    #[serde(default)]
    pub attr_substrings: Vec<String>,
    pub label: Label,
    /// Lower wins.
    pub priority: i64,
}

impl HeuristicRule {
    pub fn matches(&self, block: &TextBlock) -> bool {
        let tag_hit = block
            .tag_chain
            .iter()
            .any(|t| self.ancestor_tags.iter().any(|r| r.eq_ignore_ascii_case(t)));
        if tag_hit {
            return true;
        }
        block.ancestors.iter().any(|a| {
            [a.class.as_deref(), a.id.as_deref()]
                .into_iter()
                .flatten()
                .map(str::to_lowercase)
                .any(|v| {
                    self.attr_substrings
                        .iter()
                        .any(|s| !s.is_empty() && v.contains(&s.to_lowercase()))
                })
        })
    }
}

/// Validated, priority-sorted rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct RuleSet(Vec<HeuristicRule>);

impl RuleSet {
    pub fn new(mut rules: Vec<HeuristicRule>) -> Result<Self, SeedError> {
        if rules.is_empty() {
            return Err(SeedError::NoRules);
        }
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.priority) {
                return Err(SeedError::DuplicatePriority(r.priority));
            }
        }
        rules.sort_by_key(|r| r.priority);
        Ok(Self(rules))
    }

    /// `article` ancestors are relevant; page chrome and
    /// comment/sidebar/footer/ad containers are noise.
    pub fn defaults() -> Self {
        let strs = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self::new(vec![
            HeuristicRule {
                name: "article".into(),
                ancestor_tags: strs(&["article"]),
                attr_substrings: vec![],
                label: Label::Relevant,
                priority: 1,
            },
            HeuristicRule {
                name: "page-chrome".into(),
                ancestor_tags: strs(&["nav", "footer", "header", "aside", "form"]),
                attr_substrings: vec![],
                label: Label::Noise,
                priority: 2,
            },
            HeuristicRule {
                name: "noise-attributes".into(),
                ancestor_tags: vec![],
                attr_substrings: strs(&["comment", "sidebar", "footer", "ad-"]),
                label: Label::Noise,
                priority: 3,
            },
        ])
        .expect("default rules are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SeedError> {
        let rules: Vec<HeuristicRule> =
            serde_json::from_str(text).map_err(|e| SeedError::RuleFile(e.to_string()))?;
        Self::new(rules)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SeedError> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| SeedError::RuleFile(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn rules(&self) -> &[HeuristicRule] {
        &self.0
    }
}

/// Seed every block matched by a rule with the label of its best
/// (lowest-priority-number) matching rule.
pub fn apply_heuristics(blocks: &[TextBlock], rules: &RuleSet) -> Result<SeedSet, SeedError> {
    let seeds: SeedSet = blocks
        .iter()
        .filter_map(|b| {
            rules
                .rules()
                .iter()
                .find(|r| r.matches(b))
                .map(|r| (b.index, r.label))
        })
        .collect();
    if seeds.is_empty() {
        return Err(SeedError::Empty);
    }
    Ok(seeds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum SeedStrategy {
    /// First blocks in document order.
    First,
    /// Uniform sample reproducible from the seed.
    Random { seed: u64 },
}

impl fmt::Display for SeedStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeedStrategy::First => f.write_str("first"),
            SeedStrategy::Random { seed } => write!(f, "random({seed})"),
        }
    }
}

/// Number of seeds for `n` blocks: `ceil(fraction * n)`.
pub fn seed_count(n: usize, fraction: f64) -> usize {
    // absorb products like 0.7 * 10 = 7.000000000000001
    let raw = fraction * n as f64;
    let snapped = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    snapped as usize
}

/// Seed `ceil(fraction * n)` blocks with their ground-truth labels. Blocks
/// are matched to truth by `(dom_path, text_hash)`.
pub fn sample_seeds(
    truth: &GroundTruthPage,
    blocks: &[TextBlock],
    fraction: f64,
    strategy: SeedStrategy,
) -> Result<SeedSet, SeedError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SeedError::BadFraction(fraction));
    }
    let needed = seed_count(blocks.len(), fraction);
    let lookup: HashMap<(&str, &str), Label> = truth
        .blocks
        .iter()
        .map(|b| ((b.dom_path.as_str(), b.text_hash.as_str()), b.label))
        .collect();
    let matched: Vec<(usize, Label)> = blocks
        .iter()
        .filter_map(|b| {
            lookup
                .get(&(b.dom_path.as_str(), b.text_hash.as_str()))
                .map(|&l| (b.index, l))
        })
        .collect();
    if matched.len() < needed {
        return Err(SeedError::Coverage {
            needed,
            matched: matched.len(),
        });
    }
    Ok(match strategy {
        SeedStrategy::First => matched.into_iter().take(needed).collect(),
        SeedStrategy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index::sample(&mut rng, matched.len(), needed)
                .into_iter()
                .map(|k| matched[k])
                .collect()
        }
    })
}
