//! Harmonic label propagation on a similarity graph.
//!
//! Seeded nodes are clamped to their label (0 or 1). Every other node that
//! is connected to a seed gets the value of the minimum-energy function
//! `E(f) = 1/2 * sum_ij w_ij (f_i - f_j)^2`, which is harmonic: each
//! unlabeled value is the weighted mean of its neighbors. Nodes that no seed
//! can reach get score 0 and are reported as isolated.
//!
//! Two routes produce the same function: Gauss-Seidel sweeps
//! ([`solve_iterative`]) and a direct solve of the reduced Laplacian system
//! ([`solve_direct`]).

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::SimilarityGraph;
use crate::linalg::lu_solve;
use crate::scalar::Scalar;

/// Binary block label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Noise = 0,
    Relevant = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn value<T: Scalar>(self) -> T {
        match self {
            Label::Noise => T::zero(),
            Label::Relevant => T::one(),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Noise => Label::Relevant,
            Label::Relevant => Label::Noise,
        }
    }
}

impl TryFrom<u8> for Label {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Noise),
            1 => Ok(Label::Relevant),
            other => Err(format!("label must be 0 or 1, got {other}")),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = u64::deserialize(d)?;
        u8::try_from(raw)
            .map_err(|_| format!("label must be 0 or 1, got {raw}"))
            .and_then(Label::try_from)
            .map_err(serde::de::Error::custom)
    }
}

/// Seed labels keyed by node index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSet {
    labels: BTreeMap<usize, Label>,
}

impl SeedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, index: usize, label: Label) {
        self.labels.insert(index, label);
    }

    pub fn get(&self, index: usize) -> Option<Label> {
        self.labels.get(&index).copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.labels.contains_key(&index)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Label)> + '_ {
        self.labels.iter().map(|(&i, &l)| (i, l))
    }

    /// The shared label when every seed agrees.
    pub fn single_class(&self) -> Option<Label> {
        let mut it = self.labels.values();
        let first = *it.next()?;
        it.all(|&l| l == first).then_some(first)
    }
}

impl FromIterator<(usize, Label)> for SeedSet {
    fn from_iter<I: IntoIterator<Item = (usize, Label)>>(iter: I) -> Self {
        Self {
            labels: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult<T> {
    /// Harmonic score per node, in `[0, 1]`.
    pub scores: Vec<T>,
    pub labels: Vec<Label>,
    /// Gauss-Seidel sweeps performed (0 for the direct solver).
    pub iterations: usize,
    /// Largest harmonic defect over non-isolated unlabeled nodes.
    pub residual: T,
    pub energy: T,
    /// Unlabeled nodes no seed can reach; they score 0.
    pub isolated: Vec<usize>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> PropagationResult<T> {
    /// Re-threshold the scores.
    pub fn relabel(&mut self, threshold: T) {
        self.labels = binarize(&self.scores, threshold);
    }
}

#[derive(Debug, Error)]
pub enum SolverError<T: Scalar = f64> {
    #[error("no seed labels given")]
    NoSeeds,
    #[error("seed index {index} out of range for {n} nodes")]
    SeedOutOfRange { index: usize, n: usize },
    #[error("expected a vector of length {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("bad solver options: {0}")]
    BadOptions(String),
    #[error(
        "no convergence after {} sweeps (residual {})",
        .0.iterations,
        .0.residual
    )]
    NotConverged(Box<PropagationResult<T>>),
    #[error("reduced system is numerically singular")]
    Singular,
}

/// Dirichlet energy, `1/2` times the sum over ordered pairs.
pub fn energy<T: Scalar>(graph: &SimilarityGraph<T>, f: &[T]) -> Result<T, SolverError<T>> {
    if f.len() != graph.n() {
        return Err(SolverError::Shape {
            expected: graph.n(),
            got: f.len(),
        });
    }
    Ok(energy_unchecked(graph, f))
}

fn energy_unchecked<T: Scalar>(graph: &SimilarityGraph<T>, f: &[T]) -> T {
    // each unordered pair once; equals half the ordered-pair sum.
    // Neumaier-compensated.
    let mut total = T::zero();
    let mut carry = T::zero();
    for i in 0..graph.n() {
        let row = graph.row(i);
        for j in i + 1..graph.n() {
            let d = f[i] - f[j];
            let term = row[j] * d * d;
            let next = total + term;
            carry = carry
                + if total.abs() >= term.abs() {
                    (total - next) + term
                } else {
                    (term - next) + total
                };
            total = next;
        }
    }
    total + carry
}

/// Label 1 iff the score is strictly above `threshold`.
pub fn binarize<T: Scalar>(scores: &[T], threshold: T) -> Vec<Label> {
    scores
        .iter()
        .map(|&s| {
            if s > threshold {
                Label::Relevant
            } else {
                Label::Noise
            }
        })
        .collect()
}

/// Node roles for one solve.
#[derive(Debug, Clone)]
struct Partition<T> {
    seed_value: Vec<Option<T>>,
    /// Unlabeled nodes reachable from a seed, ascending.
    active: Vec<usize>,
    isolated: Vec<usize>,
    lo: T,
    hi: T,
    warnings: Vec<String>,
}

impl<T: Scalar> Partition<T> {
    fn new(graph: &SimilarityGraph<T>, seeds: &SeedSet) -> Result<Self, SolverError<T>> {
        let n = graph.n();
        if seeds.is_empty() {
            return Err(SolverError::NoSeeds);
        }
        let mut seed_value = vec![None; n];
        for (index, label) in seeds.iter() {
            if index >= n {
                return Err(SolverError::SeedOutOfRange { index, n });
            }
            seed_value[index] = Some(label.value::<T>());
        }

        let mut reached = vec![false; n];
        let mut queue: VecDeque<usize> = seeds.iter().map(|(i, _)| i).collect();
        for &s in &queue {
            reached[s] = true;
        }
        while let Some(u) = queue.pop_front() {
            for v in graph.neighbors(u) {
                if !reached[v] {
                    reached[v] = true;
                    queue.push_back(v);
                }
            }
        }

        let (active, isolated): (Vec<usize>, Vec<usize>) = (0..n)
            .filter(|&i| seed_value[i].is_none())
            .partition(|&i| reached[i]);

        let mut warnings = Vec::new();
        if let Some(label) = seeds.single_class() {
            let msg = format!("all seeds carry label {label}; propagation is constant");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        if !isolated.is_empty() {
            let msg = format!(
                "{} node(s) unreachable from any seed scored 0",
                isolated.len()
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }

        let (lo, hi) = seed_value
            .iter()
            .flatten()
            .fold((T::one(), T::zero()), |(lo, hi), &v| (lo.min(v), hi.max(v)));

        Ok(Self {
            seed_value,
            active,
            isolated,
            lo,
            hi,
            warnings,
        })
    }

    fn initial_scores(&self, init: T) -> Vec<T> {
        self.seed_value
            .iter()
            .map(|s| s.unwrap_or(T::zero()))
            .enumerate()
            .map(|(i, v)| {
                if self.seed_value[i].is_none() && self.active.binary_search(&i).is_ok() {
                    init
                } else {
                    v
                }
            })
            .collect()
    }
}

#[inline]
fn neighbor_mean<T: Scalar>(graph: &SimilarityGraph<T>, f: &[T], j: usize) -> T {
    // same terms in the same order as the degree sum, so with f in [0,1]
    // the rounded mean stays in [0,1]
    let sum = graph
        .row(j)
        .iter()
        .zip(f)
        .fold(T::zero(), |acc, (&w, &v)| acc + w * v);
    sum / graph.degree(j)
}

/// Largest `|f_j - (1/d_j) sum_i w_ij f_i|` over the given nodes.
pub fn harmonic_defect<T: Scalar>(graph: &SimilarityGraph<T>, f: &[T], nodes: &[usize]) -> T {
    nodes
        .iter()
        .map(|&j| (f[j] - neighbor_mean(graph, f, j)).abs())
        .fold(T::zero(), T::max)
}

/// Options for [`solve_iterative`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeOptions<T> {
    pub tol: T,
    /// Sweep limit; `None` means `max(10 n, 1000)`.
    pub max_iters: Option<usize>,
    /// Starting value for unlabeled nodes.
    pub init: T,
}

impl<T: Scalar> Default for IterativeOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::of(1e-8),
            max_iters: None,
            init: T::one(),
        }
    }
}

impl<T: Scalar> IterativeOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn sweep_limit(&self, n: usize) -> usize {
        self.max_iters.unwrap_or_else(|| (10 * n).max(1000))
    }
}

/// Gauss-Seidel state, exposed so callers can observe individual sweeps.
#[derive(Debug, Clone)]
pub struct GaussSeidel<'g, T> {
    graph: &'g SimilarityGraph<T>,
    part: Partition<T>,
    f: Vec<T>,
    sweeps: usize,
}

impl<'g, T: Scalar> GaussSeidel<'g, T> {
    pub fn new(
        graph: &'g SimilarityGraph<T>,
        seeds: &SeedSet,
        init: T,
    ) -> Result<Self, SolverError<T>> {
        if !(init >= T::zero() && init <= T::one()) {
            return Err(SolverError::BadOptions(format!(
                "initial value {init} outside [0, 1]"
            )));
        }
        let part = Partition::new(graph, seeds)?;
        let f = part.initial_scores(init);
        Ok(Self {
            graph,
            part,
            f,
            sweeps: 0,
        })
    }

    /// One pass over the unlabeled nodes in ascending order, each update
    /// using the latest values. Returns the largest change made.
    pub fn sweep(&mut self) -> T {
        let mut step = T::zero();
        for &j in &self.part.active {
            let next = neighbor_mean(self.graph, &self.f, j);
            step = step.max((next - self.f[j]).abs());
            self.f[j] = next;
        }
        self.sweeps += 1;
        step
    }

    pub fn residual(&self) -> T {
        harmonic_defect(self.graph, &self.f, &self.part.active)
    }

    pub fn energy(&self) -> T {
        energy_unchecked(self.graph, &self.f)
    }

    pub fn scores(&self) -> &[T] {
        &self.f
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Unlabeled nodes the sweeps update.
    pub fn active(&self) -> &[usize] {
        &self.part.active
    }

    pub fn into_result(self) -> PropagationResult<T> {
        let residual = self.residual();
        let energy = self.energy();
        PropagationResult {
            labels: binarize(&self.f, T::of(0.5)),
            scores: self.f,
            iterations: self.sweeps,
            residual,
            energy,
            isolated: self.part.isolated,
            warnings: self.part.warnings,
        }
    }
}

/// Gauss-Seidel iteration until the harmonic defect drops below `tol`.
///
/// Sweeping also continues until the distance to the fixed point, estimated
/// from the geometric decay of successive steps, is below `tol / 8`. Once the
/// defect is below `tol` the result counts as converged; with the default
/// sweep limit this refinement may run to ten times that limit, while an
/// explicit `max_iters` is a hard cap.
pub fn solve_iterative<T: Scalar>(
    graph: &SimilarityGraph<T>,
    seeds: &SeedSet,
    opts: &IterativeOptions<T>,
) -> Result<PropagationResult<T>, SolverError<T>> {
    if opts.tol.is_nan() || opts.tol <= T::zero() {
        return Err(SolverError::BadOptions("tol must be positive".into()));
    }
    if opts.max_iters == Some(0) {
        return Err(SolverError::BadOptions("max_iters must be positive".into()));
    }
    let limit = opts.sweep_limit(graph.n());
    let mut gs = GaussSeidel::new(graph, seeds, opts.init)?;
    if gs.active().is_empty() {
        return Ok(gs.into_result());
    }
    let margin = opts.tol / T::of(8.0);
    let floor = T::of(4.0) * T::epsilon();
    let mut residual = gs.residual();
    let mut prev_step: Option<T> = None;
    let mut settled = residual == T::zero();
    let refine_limit = if opts.max_iters.is_some() {
        limit
    } else {
        limit * 10
    };
    while residual >= opts.tol || !settled {
        if residual < opts.tol {
            if gs.sweeps() >= refine_limit {
                break;
            }
        } else if gs.sweeps() >= limit {
            return Err(SolverError::NotConverged(Box::new(gs.into_result())));
        }
        let step = gs.sweep();
        residual = gs.residual();
        settled = residual == T::zero()
            || step <= floor
            || prev_step.is_some_and(|p| {
                let rate = step / p;
                rate < T::one() && step * rate / (T::one() - rate) < margin
            });
        prev_step = Some(step);
    }
    Ok(gs.into_result())
}

/// Exact harmonic solution: `(D_uu - W_uu) f_u = W_ul f_l` over the
/// seed-reachable unlabeled nodes.
pub fn solve_direct<T: Scalar>(
    graph: &SimilarityGraph<T>,
    seeds: &SeedSet,
) -> Result<PropagationResult<T>, SolverError<T>> {
    let part = Partition::new(graph, seeds)?;
    let mut f = part.initial_scores(T::zero());
    let active = &part.active;
    let m = active.len();

    if m > 0 {
        let mut a = vec![T::zero(); m * m];
        let mut b = vec![T::zero(); m];
        for (p, &j) in active.iter().enumerate() {
            let row = graph.row(j);
            a[p * m + p] = graph.degree(j);
            for (q, &k) in active.iter().enumerate() {
                if q != p {
                    a[p * m + q] = -row[k];
                }
            }
            b[p] = part
                .seed_value
                .iter()
                .enumerate()
                .filter_map(|(i, s)| s.map(|v| row[i] * v))
                .fold(T::zero(), |acc, x| acc + x);
        }
        let x = lu_solve(m, a, b).ok_or(SolverError::Singular)?;
        for (&j, v) in active.iter().zip(x) {
            // LU round-off can leave the seed range by a few ulps
            f[j] = v.max(part.lo).min(part.hi);
        }
    }

    Ok(PropagationResult {
        labels: binarize(&f, T::of(0.5)),
        residual: harmonic_defect(graph, &f, active),
        energy: energy_unchecked(graph, &f),
        scores: f,
        iterations: 0,
        isolated: part.isolated,
        warnings: part.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> SimilarityGraph<f64> {
        let mut w = vec![0.0; n * n];
        for &(i, j, x) in edges {
            w[i * n + j] = x;
            w[j * n + i] = x;
        }
        SimilarityGraph::from_weights(n, w).unwrap()
    }

    fn seeds(pairs: &[(usize, u8)]) -> SeedSet {
        pairs
            .iter()
            .map(|&(i, l)| (i, Label::try_from(l).unwrap()))
            .collect()
    }

    #[test]
    fn energy_examples() {
        let g = graph(2, &[(0, 1, 1.0)]);
        assert_eq!(energy(&g, &[0.0, 1.0]).unwrap(), 1.0);
        let g = graph(4, &[(0, 1, 0.3), (1, 2, 2.0), (0, 3, 1.5)]);
        assert_eq!(energy(&g, &[0.7; 4]).unwrap(), 0.0);
        assert!(matches!(
            energy(&g, &[0.0; 3]),
            Err(SolverError::Shape {
                expected: 4,
                got: 3
            })
        ));
    }

    #[test]
    fn path_midpoint() {
        // s0 - u - s1
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let s = seeds(&[(0, 0), (2, 1)]);
        let it = solve_iterative(&g, &s, &IterativeOptions::with_tol(1e-12)).unwrap();
        assert!((it.scores[1] - 0.5).abs() < 1e-12);
        let direct = solve_direct(&g, &s).unwrap();
        assert_eq!(direct.scores[1], 0.5);
        assert_eq!(direct.labels[1], Label::Noise);
        assert_eq!(direct.labels, [Label::Noise, Label::Noise, Label::Relevant]);
    }

    #[test]
    fn star_center() {
        // center 0, leaves 1..=3 seeded {1,1,0}
        let g = graph(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]);
        let s = seeds(&[(1, 1), (2, 1), (3, 0)]);
        let r = solve_direct(&g, &s).unwrap();
        assert!((r.scores[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.labels[0], Label::Relevant);
        let it = solve_iterative(&g, &s, &IterativeOptions::default()).unwrap();
        assert!((it.scores[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(it.iterations, 1);
    }

    #[test]
    fn all_relevant_seeds_give_constant_one() {
        let g = graph(
            5,
            &[
                (0, 1, 0.5),
                (1, 2, 0.9),
                (2, 3, 0.1),
                (3, 4, 1.0),
                (0, 4, 0.2),
            ],
        );
        let s = seeds(&[(0, 1), (3, 1)]);
        for r in [
            solve_iterative(&g, &s, &IterativeOptions::default()).unwrap(),
            solve_direct(&g, &s).unwrap(),
        ] {
            assert!(r.scores.iter().all(|&x| x == 1.0));
            assert_eq!(r.energy, 0.0);
            assert_eq!(r.warnings.len(), 1);
        }
    }

    #[test]
    fn all_seeded_returned_verbatim() {
        let g = graph(2, &[(0, 1, 1.0)]);
        let s = seeds(&[(0, 1), (1, 0)]);
        let r = solve_iterative(&g, &s, &IterativeOptions::default()).unwrap();
        assert_eq!(r.scores, [1.0, 0.0]);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.energy, 1.0);
    }

    #[test]
    fn isolated_nodes_default_to_noise() {
        // 0-1 seeded component, 2 has no edges, 3-4 component with no seed
        let g = graph(5, &[(0, 1, 1.0), (3, 4, 1.0)]);
        let s = seeds(&[(0, 1)]);
        for r in [
            solve_iterative(&g, &s, &IterativeOptions::default()).unwrap(),
            solve_direct(&g, &s).unwrap(),
        ] {
            assert_eq!(r.scores, [1.0, 1.0, 0.0, 0.0, 0.0]);
            assert_eq!(r.isolated, [2, 3, 4]);
            assert_eq!(r.labels[3], Label::Noise);
        }
    }

    #[test]
    fn seed_errors() {
        let g = graph(2, &[(0, 1, 1.0)]);
        assert!(matches!(
            solve_direct(&g, &SeedSet::new()),
            Err(SolverError::NoSeeds)
        ));
        assert!(matches!(
            solve_iterative(&g, &seeds(&[(5, 1)]), &IterativeOptions::default()),
            Err(SolverError::SeedOutOfRange { index: 5, n: 2 })
        ));
        let bad = IterativeOptions {
            init: 2.0,
            ..IterativeOptions::default()
        };
        assert!(matches!(
            solve_iterative(&g, &seeds(&[(0, 1)]), &bad),
            Err(SolverError::BadOptions(_))
        ));
    }

    #[test]
    fn not_converged_carries_partial() {
        // long path converges slowly
        let n = 40;
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        let g = graph(n, &edges);
        let s = seeds(&[(0, 0), (n - 1, 1)]);
        let opts = IterativeOptions {
            tol: 1e-12,
            max_iters: Some(3),
            init: 1.0,
        };
        match solve_iterative(&g, &s, &opts) {
            Err(SolverError::NotConverged(partial)) => {
                assert_eq!(partial.iterations, 3);
                assert!(partial.residual >= 1e-12);
                assert_eq!(partial.scores[0], 0.0);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn binarize_is_strict() {
        assert_eq!(
            binarize(&[0.5, 0.5000001, 0.0, 1.0], 0.5),
            [Label::Noise, Label::Relevant, Label::Noise, Label::Relevant]
        );
    }

    #[test]
    fn label_serde() {
        assert_eq!(serde_json::to_string(&Label::Relevant).unwrap(), "1");
        assert_eq!(serde_json::from_str::<Label>("0").unwrap(), Label::Noise);
        assert!(serde_json::from_str::<Label>("2").is_err());
        assert!(serde_json::from_str::<Label>("-1").is_err());
        assert!(serde_json::from_str::<Label>("\"1\"").is_err());
    }

    #[test]
    fn f32_solve() {
        let mut w = vec![0.0f32; 9];
        for (i, j) in [(0, 1), (1, 2)] {
            w[i * 3 + j] = 1.0;
            w[j * 3 + i] = 1.0;
        }
        let g = SimilarityGraph::from_weights(3, w).unwrap();
        let s: SeedSet = [(0, Label::Noise), (2, Label::Relevant)]
            .into_iter()
            .collect();
        let r = solve_iterative(&g, &s, &IterativeOptions::with_tol(1e-6f32)).unwrap();
        assert!((r.scores[1] - 0.5).abs() < 1e-6);
        assert_eq!(solve_direct(&g, &s).unwrap().scores[1], 0.5f32);
    }
}
