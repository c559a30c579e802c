//! Weighted similarity graph over text blocks.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::FeatureVector;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("vector dimension mismatch: {0} vs {1}")]
    Dim(usize, usize),
    #[error("rbf sigma must be positive and finite")]
    BadSigma,
    #[error("graph needs at least one node")]
    Empty,
    #[error("knn must be positive")]
    BadKnn,
    #[error("invalid weight matrix: {0}")]
    Invalid(String),
}

/// Edge-weight kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec<T> {
    /// `max(0, u·v)`
    InnerProduct,
    /// `exp(-|u-v|^2 / (2 sigma^2))`
    Rbf { sigma: T },
}

/// How the RBF bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaSpec {
    /// Median pairwise Euclidean distance of the page, 1 when that is 0.
    Median,
    Fixed(f64),
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaSpec::Median => f.write_str("median"),
            SigmaSpec::Fixed(s) => write!(f, "{s}"),
        }
    }
}

/// Symmetric, non-negative, zero-diagonal weight matrix plus row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph<T> {
    n: usize,
    weights: Vec<T>,
    degrees: Vec<T>,
}

impl<T: Scalar> SimilarityGraph<T> {
    /// Wrap a row-major `n x n` weight matrix, checking every invariant.
    pub fn from_weights(n: usize, weights: Vec<T>) -> Result<Self, GraphError> {
        if weights.len() != n * n {
            return Err(GraphError::Invalid(format!(
                "expected {} entries, got {}",
                n * n,
                weights.len()
            )));
        }
        for i in 0..n {
            if weights[i * n + i] != T::zero() {
                return Err(GraphError::Invalid(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if !w.is_finite() || w < T::zero() {
                    return Err(GraphError::Invalid(format!("bad weight at ({i},{j})")));
                }
                if w != weights[j * n + i] {
                    return Err(GraphError::Invalid(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self::from_weights_unchecked(n, weights))
    }

    fn from_weights_unchecked(n: usize, weights: Vec<T>) -> Self {
        let degrees = (0..n)
            .map(|i| {
                weights[i * n..(i + 1) * n]
                    .iter()
                    .fold(T::zero(), |acc, &w| acc + w)
            })
            .collect();
        Self {
            n,
            weights,
            degrees,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        self.weights[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> T {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[T] {
        &self.degrees
    }

    /// Neighbors of `i` reachable through strictly positive weights.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > T::zero())
            .map(|(j, _)| j)
    }
}

/// Edge weight between two block vectors.
pub fn similarity<T: Scalar>(
    u: &FeatureVector<T>,
    v: &FeatureVector<T>,
    kernel: KernelSpec<T>,
) -> Result<T, GraphError> {
    if u.dim() != v.dim() {
        return Err(GraphError::Dim(u.dim(), v.dim()));
    }
    match kernel {
        KernelSpec::InnerProduct => {
            let dot = u
                .values
                .iter()
                .zip(&v.values)
                .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
            Ok(dot.max(T::zero()))
        }
        KernelSpec::Rbf { sigma } => {
            if !(sigma > T::zero() && sigma.is_finite()) {
                return Err(GraphError::BadSigma);
            }
            let d2 = squared_distance(&u.values, &v.values);
            let two = T::one() + T::one();
            Ok((-d2 / (two * sigma * sigma)).exp())
        }
    }
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Median of all pairwise Euclidean distances; 1 when there are no pairs or
/// the median is 0.
pub fn median_sigma<T: Scalar>(vectors: &[FeatureVector<T>]) -> Result<T, GraphError> {
    check_dims(vectors)?;
    let mut dists = Vec::with_capacity(vectors.len() * vectors.len().saturating_sub(1) / 2);
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            dists.push(squared_distance(&vectors[i].values, &vectors[j].values).sqrt());
        }
    }
    if dists.is_empty() {
        return Ok(T::one());
    }
    dists.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        (dists[mid - 1] + dists[mid]) / (T::one() + T::one())
    };
    Ok(if median > T::zero() { median } else { T::one() })
}

/// Turn a sigma spec into a concrete kernel for this page.
pub fn resolve_rbf<T: Scalar>(
    vectors: &[FeatureVector<T>],
    sigma: SigmaSpec,
) -> Result<KernelSpec<T>, GraphError> {
    let sigma = match sigma {
        SigmaSpec::Median => median_sigma(vectors)?,
        SigmaSpec::Fixed(s) if s > 0.0 && s.is_finite() => T::of(s),
        SigmaSpec::Fixed(_) => return Err(GraphError::BadSigma),
    };
    Ok(KernelSpec::Rbf { sigma })
}

fn check_dims<T: Scalar>(vectors: &[FeatureVector<T>]) -> Result<(), GraphError> {
    if let Some(first) = vectors.first() {
        if let Some(bad) = vectors.iter().find(|v| v.dim() != first.dim()) {
            return Err(GraphError::Dim(first.dim(), bad.dim()));
        }
    }
    Ok(())
}

/// Build the similarity graph. With `knn = Some(k)` an edge survives when
/// either endpoint has the other among its `k` heaviest edges.
pub fn build_graph<T: Scalar>(
    vectors: &[FeatureVector<T>],
    kernel: KernelSpec<T>,
    knn: Option<usize>,
) -> Result<SimilarityGraph<T>, GraphError> {
    if vectors.is_empty() {
        return Err(GraphError::Empty);
    }
    check_dims(vectors)?;
    if knn == Some(0) {
        return Err(GraphError::BadKnn);
    }

    let n = vectors.len();
    let mut weights = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let w = similarity(&vectors[i], &vectors[j], kernel)?;
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }

    if let Some(k) = knn {
        let mut keep = vec![false; n * n];
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for i in 0..n {
            order.clear();
            order.extend((0..n).filter(|&j| j != i));
            // heaviest first, ties to the lower index
            order.sort_by(|&a, &b| {
                weights[i * n + b]
                    .partial_cmp(&weights[i * n + a])
                    .expect("finite weights")
                    .then(a.cmp(&b))
            });
            for &j in order.iter().take(k) {
                keep[i * n + j] = true;
                keep[j * n + i] = true;
            }
        }
        for (w, kept) in weights.iter_mut().zip(keep) {
            if !kept {
                *w = T::zero();
            }
        }
    }

    Ok(SimilarityGraph::from_weights_unchecked(n, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fv(v: &[f64]) -> FeatureVector<f64> {
        FeatureVector::new(v.to_vec())
    }

    #[test]
    fn similarity_examples() {
        let ip = KernelSpec::InnerProduct;
        assert_eq!(similarity(&fv(&[1.0, 0.0]), &fv(&[1.0, 0.0]), ip), Ok(1.0));
        assert_eq!(similarity(&fv(&[1.0, 0.0]), &fv(&[0.0, 1.0]), ip), Ok(0.0));
        assert_eq!(similarity(&fv(&[1.0, 0.0]), &fv(&[-1.0, 0.0]), ip), Ok(0.0));
        let rbf = KernelSpec::Rbf { sigma: 1.0 };
        assert_eq!(
            similarity(&fv(&[0.3, -2.0]), &fv(&[0.3, -2.0]), rbf),
            Ok(1.0)
        );
        let w = similarity(&fv(&[0.0, 0.0]), &fv(&[1.0, 1.0]), rbf).unwrap();
        assert!((w - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn similarity_errors() {
        let ip = KernelSpec::InnerProduct;
        assert_eq!(
            similarity(&fv(&[1.0]), &fv(&[1.0, 0.0]), ip),
            Err(GraphError::Dim(1, 2))
        );
        for sigma in [0.0, -1.0, f64::NAN] {
            assert_eq!(
                similarity(&fv(&[1.0]), &fv(&[1.0]), KernelSpec::Rbf { sigma }),
                Err(GraphError::BadSigma)
            );
        }
    }

    #[test]
    fn build_examples() {
        let g = build_graph(
            &[fv(&[1.0, 0.0]), fv(&[1.0, 0.0])],
            KernelSpec::InnerProduct,
            None,
        )
        .unwrap();
        assert_eq!(g.row(0), [0.0, 1.0]);
        assert_eq!(g.row(1), [1.0, 0.0]);
        assert_eq!(g.degrees(), [1.0, 1.0]);

        let g = build_graph(
            &[fv(&[1.0, 0.0]), fv(&[0.0, 1.0]), fv(&[1.0, 0.0])],
            KernelSpec::InnerProduct,
            None,
        )
        .unwrap();
        assert_eq!(g.weight(0, 2), 1.0);
        assert_eq!(g.weight(0, 1), 0.0);
        assert_eq!(g.weight(1, 2), 0.0);
        assert_eq!(g.degree(1), 0.0);
    }

    #[test]
    fn build_errors() {
        assert_eq!(
            build_graph::<f64>(&[], KernelSpec::InnerProduct, None),
            Err(GraphError::Empty)
        );
        assert_eq!(
            build_graph(
                &[fv(&[1.0]), fv(&[1.0, 2.0])],
                KernelSpec::InnerProduct,
                None
            ),
            Err(GraphError::Dim(1, 2))
        );
        assert_eq!(
            build_graph(&[fv(&[1.0])], KernelSpec::InnerProduct, Some(0)),
            Err(GraphError::BadKnn)
        );
    }

    #[test]
    fn zero_vectors_isolated_under_inner_product_but_not_rbf() {
        let vs = [fv(&[0.0, 0.0]), fv(&[1.0, 0.0]), fv(&[0.5, 0.5])];
        let ip = build_graph(&vs, KernelSpec::InnerProduct, None).unwrap();
        assert_eq!(ip.degree(0), 0.0);
        let rbf = build_graph(&vs, KernelSpec::Rbf { sigma: 1.0 }, None).unwrap();
        assert!(rbf.degree(0) > 0.0);
    }

    #[test]
    fn median_sigma_cases() {
        // distances 1, 2, sqrt(5): median 2
        let vs = [fv(&[0.0, 0.0]), fv(&[1.0, 0.0]), fv(&[0.0, 2.0])];
        assert_eq!(median_sigma(&vs), Ok(2.0));
        // even count averages the middle pair
        let line = [fv(&[0.0]), fv(&[1.0]), fv(&[3.0]), fv(&[7.0])];
        // 1,3,7,2,6,4 -> sorted 1,2,3,4,6,7
        assert_eq!(median_sigma(&line), Ok(3.5));
        assert_eq!(median_sigma(&[fv(&[1.0])]), Ok(1.0));
        assert_eq!(median_sigma(&[fv(&[1.0]), fv(&[1.0]), fv(&[1.0])]), Ok(1.0));
        assert_eq!(
            resolve_rbf(&[fv(&[1.0])], SigmaSpec::Fixed(-2.0)),
            Err(GraphError::BadSigma)
        );
    }

    #[test]
    fn from_weights_validation() {
        assert!(SimilarityGraph::from_weights(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(SimilarityGraph::from_weights(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(SimilarityGraph::from_weights(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(SimilarityGraph::from_weights(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(SimilarityGraph::from_weights(2, vec![0.0; 3]).is_err());
    }

    /// Brute-force kNN union: an edge survives if its weight is strictly
    /// greater than the k-th heaviest weight at either endpoint, or ties it
    /// and the endpoint's tie-break ranks it within k.
    fn brute_knn(dense: &SimilarityGraph<f64>, k: usize) -> Vec<f64> {
        let n = dense.n();
        let in_top = |i: usize, j: usize| {
            // rank of j in i's list: count of others strictly ahead of j
            let ahead = (0..n)
                .filter(|&m| m != i && m != j)
                .filter(|&m| {
                    dense.weight(i, m) > dense.weight(i, j)
                        || (dense.weight(i, m) == dense.weight(i, j) && m < j)
                })
                .count();
            ahead < k
        };
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j && (in_top(i, j) || in_top(j, i)) {
                    out[i * n + j] = dense.weight(i, j);
                }
            }
        }
        out
    }

    #[test]
    fn knn_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..40 {
            let n = if trial == 0 {
                5
            } else {
                rng.random_range(2..12)
            };
            let vs: Vec<_> = (0..n)
                .map(|_| fv(&[rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
                .collect();
            for kernel in [KernelSpec::InnerProduct, KernelSpec::Rbf { sigma: 0.7 }] {
                let dense = build_graph(&vs, kernel, None).unwrap();
                for k in 1..n {
                    let sparse = build_graph(&vs, kernel, Some(k)).unwrap();
                    let expect = brute_knn(&dense, k);
                    for i in 0..n {
                        assert_eq!(sparse.row(i), &expect[i * n..(i + 1) * n]);
                        assert_eq!(sparse.weight(i, i), 0.0);
                        let row_sum: f64 = sparse.row(i).iter().sum();
                        assert_eq!(sparse.degree(i), row_sum);
                        for j in 0..n {
                            assert_eq!(sparse.weight(i, j), sparse.weight(j, i));
                            let w = sparse.weight(i, j);
                            assert!(w == 0.0 || w == dense.weight(i, j));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dense_invariants_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vs: Vec<_> = (0..15)
            .map(|_| {
                fv(&(0..4)
                    .map(|_| rng.random_range(-2.0..2.0))
                    .collect::<Vec<_>>())
            })
            .collect();
        let rbf = build_graph(&vs, resolve_rbf(&vs, SigmaSpec::Median).unwrap(), None).unwrap();
        let ip = build_graph(&vs, KernelSpec::InnerProduct, None).unwrap();
        for i in 0..15 {
            for j in 0..15 {
                if i == j {
                    continue;
                }
                let w = rbf.weight(i, j);
                assert!(w > 0.0 && w <= 1.0);
                let dot: f64 = vs[i]
                    .values
                    .iter()
                    .zip(&vs[j].values)
                    .map(|(a, b)| a * b)
                    .sum();
                assert_eq!(
                    ip.weight(i, j),
                    similarity(&vs[i], &vs[j], KernelSpec::InnerProduct).unwrap()
                );
                assert!((ip.weight(i, j) - dot.max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn f32_graph() {
        let vs = [
            FeatureVector::new(vec![1.0f32, 0.0]),
            FeatureVector::new(vec![0.0f32, 1.0]),
        ];
        let g = build_graph(&vs, KernelSpec::Rbf { sigma: 1.0f32 }, None).unwrap();
        assert!((g.weight(0, 1) - (-1.0f32).exp()).abs() < 1e-6);
    }
}
