//! Word-vector tables in GloVe text format and averaged block vectors.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("line {0}: wrong number of vector components")]
    DimMismatch(usize),
    #[error("line {0}: unparseable or non-finite number")]
    BadFloat(usize),
    #[error("embedding file is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercase token to d-dimensional vector.
#[derive(Debug, Clone)]
pub struct EmbeddingTable<T> {
    dim: usize,
    entries: HashMap<String, Vec<T>>,
}

impl<T: Scalar> EmbeddingTable<T> {
    /// Build a table from in-memory entries. Tokens are lowercased; the first
    /// occurrence of a token wins.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self, LoadError>
    where
        I: IntoIterator<Item = (S, Vec<T>)>,
        S: AsRef<str>,
    {
        let mut map = HashMap::new();
        for (line, (token, vec)) in entries.into_iter().enumerate() {
            if vec.len() != dim {
                return Err(LoadError::DimMismatch(line + 1));
            }
            if vec.iter().any(|v| !v.is_finite()) {
                return Err(LoadError::BadFloat(line + 1));
            }
            map.entry(token.as_ref().to_lowercase()).or_insert(vec);
        }
        if map.is_empty() || dim == 0 {
            return Err(LoadError::Empty);
        }
        Ok(Self { dim, entries: map })
    }

    /// Parse GloVe text format: `token v1 ... vd` per line, no header.
    /// The dimension is taken from the first line.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self, LoadError> {
        let mut dim = None;
        let mut entries = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ').filter(|p| !p.is_empty());
            let Some(token) = parts.next() else { continue };
            let values = parts
                .map(|p| match p.parse::<T>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(LoadError::BadFloat(line_no)),
                })
                .collect::<Result<Vec<T>, _>>()?;
            let d = *dim.get_or_insert(values.len());
            if values.len() != d || d == 0 {
                return Err(LoadError::DimMismatch(line_no));
            }
            entries.entry(token.to_lowercase()).or_insert(values);
        }
        match dim {
            Some(dim) => Ok(Self { dim, entries }),
            None => Err(LoadError::Empty),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[T]> {
        self.entries.get(token).map(Vec::as_slice)
    }
}

/// Load a GloVe-format table from disk.
pub fn load_table<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingTable<T>, LoadError> {
    EmbeddingTable::parse(BufReader::new(File::open(path)?))
}

/// Averaged word vector of one text block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    /// Tokens found in the table; zero means `values` is the zero vector.
    pub in_vocab_count: usize,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self {
            values,
            in_vocab_count: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_oov(&self) -> bool {
        self.in_vocab_count == 0
    }
}

/// Lowercase and split on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Mean of the in-vocabulary token vectors; out-of-vocabulary tokens are skipped.
pub fn embed_block<T: Scalar>(text: &str, table: &EmbeddingTable<T>) -> FeatureVector<T> {
    let mut tokens = tokenize(text);
    // canonical summation order makes the mean bit-identical under reordering
    tokens.sort_unstable();

    let hits: Vec<&[T]> = tokens.iter().filter_map(|t| table.get(t)).collect();
    let mut values = vec![T::zero(); table.dim()];
    if hits.is_empty() {
        return FeatureVector {
            values,
            in_vocab_count: 0,
        };
    }

    let count = T::of(hits.len() as f64);
    for (k, out) in values.iter_mut().enumerate() {
        let (mut lo, mut hi, mut sum) = (T::infinity(), T::neg_infinity(), T::zero());
        for v in &hits {
            lo = lo.min(v[k]);
            hi = hi.max(v[k]);
            sum = sum + v[k];
        }
        // rounding may push the mean an ulp past the extremes
        *out = (sum / count).max(lo).min(hi);
    }
    FeatureVector {
        values,
        in_vocab_count: hits.len(),
    }
}
