//! Network covariates Ẑ extracted from `(A, X)`.
//!
//! Every extractor here is *permutation-equivariant*: relabeling the nodes of
//! the input relabels the output rows the same way,
//!
//! ```text
//! ζ(A^(σ), X^(σ)) = ζ(A, X)^(σ),    A^(σ)_ij = A_{σ(i)σ(j)}.
//! ```
//!
//! Equivariance is what lets graph-derived covariates enter a conformal
//! pipeline without breaking exchangeability. The combinatorial extractors
//! (degrees, neighborhood averages, k-hop statistics, split statistics,
//! neighbor-weighted responses) are exactly equivariant; the adjacency
//! spectral embedding is equivariant up to eigenvector sign, which a
//! deterministic sign convention resolves whenever the relevant spectrum is
//! simple. [`check_equivariance`] verifies the property on concrete inputs.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::graphgen::WeightRule;
use crate::linalg;

/// Eigenvalues within this distance of zero count as neither positive nor
/// negative when selecting spectral-embedding blocks.
pub const EIG_ZERO_TOL: f64 = 1e-9;

/// Replacement rule for statistics with an empty neighborhood (zero degree
/// or zero total weight).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// Mean of the statistic's base set — a symmetric function of the
    /// inputs, so equivariance is preserved.
    #[default]
    GlobalMean,
    /// Constant zero.
    Zero,
    /// Refuse: return a degenerate-input error.
    Error,
}

/// Node degrees `D_i = Σ_{j≠i} A_ij` (weighted degree on weighted graphs).
pub fn degrees(graph: &Graph) -> Vec<f64> {
    graph.degrees()
}

/// Order-insensitive sum: sorts the terms under the IEEE total order before
/// adding, so every permutation of the same multiset rounds identically.
/// This is what makes the neighborhood statistics *bit-exactly* equivariant
/// rather than equivariant up to accumulation order.
fn invariant_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

/// A bijection σ on `{0, …, n−1}` stored as an index array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    sigma: Vec<usize>,
}

impl Permutation {
    /// Validating constructor: a sorted copy must equal `0..n`.
    pub fn new(sigma: Vec<usize>) -> Result<Self> {
        let n = sigma.len();
        let mut hit = vec![false; n];
        for &s in &sigma {
            if s >= n || hit[s] {
                return Err(Error::Parameter(format!(
                    "index array is not a permutation at value {s}"
                )));
            }
            hit[s] = true;
        }
        Ok(Permutation { sigma })
    }

    pub fn identity(n: usize) -> Self {
        Permutation { sigma: (0..n).collect() }
    }

    /// Uniformly random permutation (Fisher–Yates).
    pub fn random(n: usize, rng: &mut impl rand::Rng) -> Self {
        use rand::seq::SliceRandom;
        let mut sigma: Vec<usize> = (0..n).collect();
        sigma.shuffle(rng);
        Permutation { sigma }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.sigma
    }

    /// Row-permute a matrix: row `i` of the result is row `σ(i)` of `x`.
    pub fn apply_rows(&self, x: ArrayView2<f64>) -> Array2<f64> {
        Array2::from_shape_fn((self.sigma.len(), x.ncols()), |(i, c)| x[[self.sigma[i], c]])
    }

    /// Permute a vector: entry `i` of the result is entry `σ(i)`.
    pub fn apply_vec<T: Clone>(&self, v: &[T]) -> Vec<T> {
        self.sigma.iter().map(|&s| v[s].clone()).collect()
    }

    /// New labels of an old-label node set: `{i : σ(i) ∈ set}`, ascending.
    pub fn preimage(&self, set: &[usize]) -> Vec<usize> {
        let mut member = vec![false; self.sigma.len()];
        for &s in set {
            member[s] = true;
        }
        (0..self.sigma.len()).filter(|&i| member[self.sigma[i]]).collect()
    }
}

/// Positive and negative spectral blocks of a symmetric adjacency matrix.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    /// λ̂_1 ≥ … ≥ λ̂_p > 0.
    pub pos_values: Vec<f64>,
    /// |γ̂_1| ≥ … ≥ |γ̂_q| > 0 (stored as magnitudes).
    pub neg_magnitudes: Vec<f64>,
    /// n×p orthonormal columns, sign convention applied.
    pub pos_vectors: Array2<f64>,
    /// n×q orthonormal columns, sign convention applied.
    pub neg_vectors: Array2<f64>,
}

/// Flip a vector in place so its entry of largest absolute value is
/// positive; ties broken by lowest index.
pub(crate) fn apply_sign_convention(mut col: ndarray::ArrayViewMut1<f64>) {
    let mut best = 0usize;
    for (i, &v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    if col[best] < 0.0 {
        col.mapv_inplace(|v| -v);
    }
}

/// Adjacency spectral embedding.
///
/// Computes the symmetric eigendecomposition of A and returns
/// `Uhat[i,r] = λ̂_r^{1/2}·u_r[i]` over the `p` largest positive eigenvalues
/// and `Vhat[i,s] = |γ̂_s|^{1/2}·v_s[i]` over the `q` negative eigenvalues of
/// largest magnitude, with the deterministic sign convention applied to each
/// eigenvector. Requesting more components than the spectrum supports yields
/// a rank error reporting the available counts.
pub fn adjacency_spectral_embedding(
    graph: &Graph,
    p: usize,
    q: usize,
) -> Result<(Array2<f64>, Array2<f64>, EigenSystem)> {
    let n = graph.num_nodes();
    if p + q > n {
        return Err(Error::Parameter(format!(
            "embedding dimension p+q = {} exceeds {n} nodes",
            p + q
        )));
    }
    let a = graph.to_dense();

    // The p algebraically-largest eigenvalues are the p largest positive ones
    // exactly when they are all positive (and symmetrically for the most
    // negative ones), so two range queries cover the common case; the full
    // spectrum is only computed to report counts when a sign check fails.
    let rank_error = |a: ArrayView2<f64>| -> Error {
        match linalg::eigh_full(a) {
            Ok((vals, _)) => {
                let pos = vals.iter().filter(|&&v| v > EIG_ZERO_TOL).count();
                let neg = vals.iter().filter(|&&v| v < -EIG_ZERO_TOL).count();
                Error::Rank(format!(
                    "requested (p={p}, q={q}) spectral components but only \
                     {pos} positive and {neg} negative eigenvalues are available"
                ))
            }
            Err(e) => e,
        }
    };

    let (pos_values, mut pos_vectors) = if p > 0 {
        let (vals, vecs) = linalg::eigh_range(a.view(), n - p, n - 1)?;
        if vals.iter().any(|&v| v <= EIG_ZERO_TOL) {
            return Err(rank_error(a.view()));
        }
        // Ascending from the solver; store descending.
        let order: Vec<usize> = (0..p).rev().collect();
        let vals: Vec<f64> = order.iter().map(|&k| vals[k]).collect();
        let vecs = Array2::from_shape_fn((n, p), |(i, r)| vecs[[i, order[r]]]);
        (vals, vecs)
    } else {
        (Vec::new(), Array2::zeros((n, 0)))
    };

    let (neg_values, mut neg_vectors) = if q > 0 {
        let (vals, vecs) = linalg::eigh_range(a.view(), 0, q - 1)?;
        if vals.iter().any(|&v| v >= -EIG_ZERO_TOL) {
            return Err(rank_error(a.view()));
        }
        // Already most-negative first = descending magnitude.
        (vals.to_vec(), vecs)
    } else {
        (Vec::new(), Array2::zeros((n, 0)))
    };

    for r in 0..p {
        apply_sign_convention(pos_vectors.column_mut(r));
    }
    for s in 0..q {
        apply_sign_convention(neg_vectors.column_mut(s));
    }

    let mut uhat = Array2::zeros((n, p));
    for r in 0..p {
        let scale = pos_values[r].sqrt();
        for i in 0..n {
            uhat[[i, r]] = scale * pos_vectors[[i, r]];
        }
    }
    let mut vhat = Array2::zeros((n, q));
    let neg_magnitudes: Vec<f64> = neg_values.iter().map(|v| v.abs()).collect();
    for s in 0..q {
        let scale = neg_magnitudes[s].sqrt();
        for i in 0..n {
            vhat[[i, s]] = scale * neg_vectors[[i, s]];
        }
    }

    let system = EigenSystem { pos_values, neg_magnitudes, pos_vectors, neg_vectors };
    Ok((uhat, vhat, system))
}

/// Column means of selected rows (all rows when `rows` is `None`),
/// accumulated order-insensitively.
fn column_means(x: ArrayView2<f64>, rows: Option<&[usize]>) -> Vec<f64> {
    let p = x.ncols();
    let collect = |c: usize| -> Vec<f64> {
        match rows {
            None => x.column(c).to_vec(),
            Some(rows) => rows.iter().map(|&i| x[[i, c]]).collect(),
        }
    };
    let count = rows.map_or(x.nrows(), |r| r.len()) as f64;
    (0..p).map(|c| invariant_sum(collect(c)) / count).collect()
}

/// Edge-weighted neighborhood average
/// `Ẑ_i = Σ_j A_ij X_j / Σ_j A_ij`, with `fallback` for isolated nodes
/// (global mean is taken over all rows of `X`).
pub fn neighborhood_average(
    graph: &Graph,
    x: ArrayView2<f64>,
    fallback: Fallback,
) -> Result<Array2<f64>> {
    let n = graph.num_nodes();
    let p = x.ncols();
    if x.nrows() != n {
        return Err(Error::Parameter(format!(
            "covariate rows {} do not match {n} nodes",
            x.nrows()
        )));
    }
    let global = column_means(x, None);
    let mut out = Array2::zeros((n, p));
    for i in 0..n {
        let mut weights = Vec::new();
        let mut acc: Vec<Vec<f64>> = vec![Vec::new(); p];
        for (j, w) in graph.neighbors(i) {
            weights.push(w);
            for c in 0..p {
                acc[c].push(w * x[[j, c]]);
            }
        }
        let total = invariant_sum(weights);
        if total > 0.0 {
            for c in 0..p {
                out[[i, c]] = invariant_sum(std::mem::take(&mut acc[c])) / total;
            }
        } else {
            match fallback {
                Fallback::GlobalMean => {
                    for c in 0..p {
                        out[[i, c]] = global[c];
                    }
                }
                Fallback::Zero => {}
                Fallback::Error => {
                    return Err(Error::Degenerate(format!(
                        "node {i} has no neighbors and fallback is `error`"
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// Per-node, per-distance shortest-path statistics.
#[derive(Debug, Clone)]
pub struct KHopProfile {
    /// `counts[[i, k-1]]` = number of nodes at shortest-path distance
    /// exactly `k` from node `i`.
    pub counts: Array2<u32>,
    /// `averages[k-1][[i, c]]` = mean of `X[·, c]` over nodes at distance
    /// exactly `k`; `NaN` where that level is empty (see `reach`).
    pub averages: Vec<Array2<f64>>,
    /// `reach[[i, k-1]]` = whether level `k` is nonempty for node `i`.
    pub reach: Array2<bool>,
}

/// Exact-distance neighborhood statistics from a breadth-first search rooted
/// at every node: level counts `D̃_i^(k)` and level covariate means
/// `X̃_i^(k)` for `k = 1, …, kmax`.
pub fn khop_stats(graph: &Graph, x: ArrayView2<f64>, kmax: usize) -> Result<KHopProfile> {
    if kmax == 0 {
        return Err(Error::Parameter("kmax must be ≥ 1".into()));
    }
    let n = graph.num_nodes();
    let p = x.ncols();
    if x.nrows() != n {
        return Err(Error::Parameter(format!(
            "covariate rows {} do not match {n} nodes",
            x.nrows()
        )));
    }
    let mut counts = Array2::zeros((n, kmax));
    let mut averages = vec![Array2::from_elem((n, p), f64::NAN); kmax];
    let mut reach = Array2::from_elem((n, kmax), false);
    for i in 0..n {
        let dist = graph.bfs_distances(i, kmax);
        let mut acc: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); p]; kmax];
        let mut cnt = vec![0u32; kmax];
        for (j, &d) in dist.iter().enumerate() {
            if d >= 1 && (d as usize) <= kmax {
                let lvl = d as usize - 1;
                cnt[lvl] += 1;
                for c in 0..p {
                    acc[lvl][c].push(x[[j, c]]);
                }
            }
        }
        for k in 0..kmax {
            counts[[i, k]] = cnt[k];
            if cnt[k] > 0 {
                reach[[i, k]] = true;
                for c in 0..p {
                    averages[k][[i, c]] =
                        invariant_sum(std::mem::take(&mut acc[k][c])) / cnt[k] as f64;
                }
            }
        }
    }
    Ok(KHopProfile { counts, averages, reach })
}

/// Weighted response average `Ỹ_i = Σ_j β_ij Y_j / Σ_j β_ij` with the sums
/// restricted to non-excluded `j`. Values are produced for every node
/// (including excluded ones — only their *responses* are masked). The
/// global-mean fallback uses the mean of `y` over non-excluded nodes.
pub fn neighbor_weighted_response(
    graph: &Graph,
    y: &[f64],
    rule: &WeightRule,
    exclude: &[usize],
    fallback: Fallback,
) -> Result<Vec<f64>> {
    let n = graph.num_nodes();
    if y.len() != n {
        return Err(Error::Parameter(format!(
            "response length {} does not match {n} nodes",
            y.len()
        )));
    }
    let mut masked = vec![false; n];
    for &e in exclude {
        if e >= n {
            return Err(Error::Parameter(format!("excluded node {e} out of range")));
        }
        masked[e] = true;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| !masked[i]).collect();
    if kept.is_empty() {
        return Err(Error::Parameter("every node is excluded".into()));
    }
    let global = invariant_sum(kept.iter().map(|&i| y[i]).collect()) / kept.len() as f64;
    let mut out = vec![0.0; n];
    for i in 0..n {
        let w = rule.weights_from(graph, i);
        let mut num = Vec::new();
        let mut den = Vec::new();
        for j in 0..n {
            if !masked[j] && w[j] != 0.0 {
                num.push(w[j] * y[j]);
                den.push(w[j]);
            }
        }
        let den = invariant_sum(den);
        out[i] = if den > 0.0 {
            invariant_sum(num) / den
        } else {
            match fallback {
                Fallback::GlobalMean => global,
                Fallback::Zero => 0.0,
                Fallback::Error => {
                    return Err(Error::Degenerate(format!(
                        "node {i} has zero total response weight and fallback is `error`"
                    )));
                }
            }
        };
    }
    Ok(out)
}

/// Split-statistic neighborhood average: for each target node `k`,
/// `Z̃_k = Σ_{j∈base} A_kj X_j / Σ_{j∈base} A_kj`. Rows of the result follow
/// the order of `targets`. Reads only `X` rows in `base` and edges between
/// each target and `base`, so the statistic is local to `base ∪ {k}` — the
/// property that lets calibration-set statistics stay exchangeable. The
/// global-mean fallback uses the mean of `X` over `base`.
pub fn split_neighborhood_average(
    graph: &Graph,
    x: ArrayView2<f64>,
    base: &[usize],
    targets: &[usize],
    fallback: Fallback,
) -> Result<Array2<f64>> {
    let n = graph.num_nodes();
    let p = x.ncols();
    if x.nrows() != n {
        return Err(Error::Parameter(format!(
            "covariate rows {} do not match {n} nodes",
            x.nrows()
        )));
    }
    if base.is_empty() {
        return Err(Error::Parameter("split-statistic base set is empty".into()));
    }
    for &b in base.iter().chain(targets) {
        if b >= n {
            return Err(Error::Parameter(format!("node {b} out of range")));
        }
    }
    let base_mean = column_means(x, Some(base));
    let mut out = Array2::zeros((targets.len(), p));
    for (row, &k) in targets.iter().enumerate() {
        let mut weights = Vec::new();
        let mut acc: Vec<Vec<f64>> = vec![Vec::new(); p];
        for &j in base {
            let w = graph.weight(k, j);
            if w != 0.0 {
                weights.push(w);
                for c in 0..p {
                    acc[c].push(w * x[[j, c]]);
                }
            }
        }
        let total = invariant_sum(weights);
        if total > 0.0 {
            for c in 0..p {
                out[[row, c]] = invariant_sum(std::mem::take(&mut acc[c])) / total;
            }
        } else {
            match fallback {
                Fallback::GlobalMean => {
                    for c in 0..p {
                        out[[row, c]] = base_mean[c];
                    }
                }
                Fallback::Zero => {}
                Fallback::Error => {
                    return Err(Error::Degenerate(format!(
                        "target node {k} has no base neighbors and fallback is `error`"
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// One covariate extractor. `columns: None` means all columns of `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extractor {
    /// Node degree, one column.
    Degree,
    /// Adjacency spectral embedding with `p` positive and `q` negative
    /// components, `p + q` columns.
    Ase { p: usize, q: usize },
    /// Edge-weighted neighborhood average of selected `X` columns.
    NeighborhoodAverage {
        columns: Option<Vec<usize>>,
        #[serde(default)]
        fallback: Fallback,
    },
    /// Exact-distance level counts and level means up to `kmax` hops.
    Khop {
        kmax: usize,
        columns: Option<Vec<usize>>,
        #[serde(default)]
        fallback: Fallback,
    },
    /// Neighborhood average restricted to the context's base split.
    SplitNeighborhoodAverage {
        columns: Option<Vec<usize>>,
        #[serde(default)]
        fallback: Fallback,
    },
    /// Neighborhood average of the observed response restricted to the
    /// context's base split — the response analogue of
    /// [`Extractor::SplitNeighborhoodAverage`], safe to attach to
    /// calibration and test nodes because it never reads their responses.
    SplitResponseAverage {
        #[serde(default)]
        fallback: Fallback,
    },
    /// Weighted average of observed neighbor responses, excluding the
    /// context's held-out nodes.
    NeighborWeightedResponse {
        #[serde(default)]
        rule: WeightRule,
        #[serde(default)]
        fallback: Fallback,
    },
}

/// An ordered list of extractors; outputs are column-concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub extractors: Vec<Extractor>,
}

impl CovariateSpec {
    pub fn new(extractors: Vec<Extractor>) -> Self {
        CovariateSpec { extractors }
    }

    /// Validate against a covariate matrix with `x_cols` columns.
    pub fn validate(&self, x_cols: usize) -> Result<()> {
        let check_columns = |columns: &Option<Vec<usize>>| -> Result<()> {
            if let Some(cols) = columns {
                for &c in cols {
                    if c >= x_cols {
                        return Err(Error::Parameter(format!(
                            "extractor references column {c} but X has {x_cols} columns"
                        )));
                    }
                }
            }
            Ok(())
        };
        for ex in &self.extractors {
            match ex {
                Extractor::Degree => {}
                Extractor::Ase { p, q } => {
                    if p + q == 0 {
                        return Err(Error::Parameter(
                            "spectral embedding needs p + q ≥ 1".into(),
                        ));
                    }
                }
                Extractor::NeighborhoodAverage { columns, .. }
                | Extractor::SplitNeighborhoodAverage { columns, .. } => check_columns(columns)?,
                Extractor::Khop { kmax, columns, .. } => {
                    if *kmax == 0 {
                        return Err(Error::Parameter("k-hop extractor needs kmax ≥ 1".into()));
                    }
                    check_columns(columns)?;
                }
                Extractor::SplitResponseAverage { .. } => {}
                Extractor::NeighborWeightedResponse { rule, .. } => rule.validate()?,
            }
        }
        Ok(())
    }

    /// Whether any extractor is spectral (equivariant only up to tolerance).
    pub fn has_spectral(&self) -> bool {
        self.extractors.iter().any(|e| matches!(e, Extractor::Ase { .. }))
    }
}

/// Split information extractors may depend on.
#[derive(Debug, Clone, Copy, Default)]
pub struct SplitContext<'a> {
    /// Base rows (typically the training split) for split statistics.
    pub base: Option<&'a [usize]>,
    /// Nodes whose responses must not leak into response-based extractors
    /// (typically the held-out test nodes).
    pub exclude: &'a [usize],
    /// Observed responses, required by response-based extractors.
    pub response: Option<&'a [f64]>,
}

fn select_columns(x: ArrayView2<f64>, columns: &Option<Vec<usize>>) -> (Array2<f64>, Vec<usize>) {
    match columns {
        None => (x.to_owned(), (0..x.ncols()).collect()),
        Some(cols) => (
            Array2::from_shape_fn((x.nrows(), cols.len()), |(i, c)| x[[i, cols[c]]]),
            cols.clone(),
        ),
    }
}

/// Run every extractor in `spec` and column-concatenate the results, in spec
/// order. Returns the n×p' matrix and one name per output column.
pub fn apply_covariate_spec(
    spec: &CovariateSpec,
    graph: &Graph,
    x: ArrayView2<f64>,
    context: &SplitContext,
) -> Result<(Array2<f64>, Vec<String>)> {
    spec.validate(x.ncols())?;
    let n = graph.num_nodes();
    if x.nrows() != n {
        return Err(Error::Parameter(format!(
            "covariate rows {} do not match {n} nodes",
            x.nrows()
        )));
    }
    let mut blocks: Vec<Array2<f64>> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for ex in &spec.extractors {
        match ex {
            Extractor::Degree => {
                let d = graph.degrees();
                blocks.push(Array2::from_shape_vec((n, 1), d).expect("degree length"));
                names.push("degree".into());
            }
            Extractor::Ase { p, q } => {
                let (uhat, vhat, _) = adjacency_spectral_embedding(graph, *p, *q)?;
                for r in 0..*p {
                    names.push(format!("ase_u{}", r + 1));
                }
                for s in 0..*q {
                    names.push(format!("ase_v{}", s + 1));
                }
                blocks.push(uhat);
                blocks.push(vhat);
            }
            Extractor::NeighborhoodAverage { columns, fallback } => {
                let (xs, idx) = select_columns(x, columns);
                blocks.push(neighborhood_average(graph, xs.view(), *fallback)?);
                names.extend(idx.iter().map(|c| format!("nbr_avg_x{c}")));
            }
            Extractor::Khop { kmax, columns, fallback } => {
                let (xs, idx) = select_columns(x, columns);
                let profile = khop_stats(graph, xs.view(), *kmax)?;
                let global = column_means(xs.view(), None);
                let p = xs.ncols();
                let mut block = Array2::zeros((n, kmax * (1 + p)));
                let mut col = 0usize;
                for k in 0..*kmax {
                    for i in 0..n {
                        block[[i, col]] = profile.counts[[i, k]] as f64;
                    }
                    names.push(format!("khop{}_count", k + 1));
                    col += 1;
                    for (c, &xc) in idx.iter().enumerate() {
                        for i in 0..n {
                            block[[i, col]] = if profile.reach[[i, k]] {
                                profile.averages[k][[i, c]]
                            } else {
                                match fallback {
                                    Fallback::GlobalMean => global[c],
                                    Fallback::Zero => 0.0,
                                    Fallback::Error => {
                                        return Err(Error::Degenerate(format!(
                                            "node {i} reaches no node at distance {} \
                                             and fallback is `error`",
                                            k + 1
                                        )));
                                    }
                                }
                            };
                        }
                        names.push(format!("khop{}_avg_x{xc}", k + 1));
                        col += 1;
                    }
                }
                blocks.push(block);
            }
            Extractor::SplitNeighborhoodAverage { columns, fallback } => {
                let base = context.base.ok_or_else(|| {
                    Error::Config(
                        "split neighborhood average needs a base split in the context".into(),
                    )
                })?;
                let (xs, idx) = select_columns(x, columns);
                let targets: Vec<usize> = (0..n).collect();
                blocks.push(split_neighborhood_average(
                    graph,
                    xs.view(),
                    base,
                    &targets,
                    *fallback,
                )?);
                names.extend(idx.iter().map(|c| format!("split_avg_x{c}")));
            }
            Extractor::SplitResponseAverage { fallback } => {
                let base = context.base.ok_or_else(|| {
                    Error::Config(
                        "split response average needs a base split in the context".into(),
                    )
                })?;
                let y = context.response.ok_or_else(|| {
                    Error::Config(
                        "split response average needs observed responses in the context".into(),
                    )
                })?;
                let col = Array2::from_shape_vec((n, 1), y.to_vec())
                    .map_err(|_| Error::Parameter("response length mismatch".into()))?;
                let targets: Vec<usize> = (0..n).collect();
                blocks.push(split_neighborhood_average(
                    graph,
                    col.view(),
                    base,
                    &targets,
                    *fallback,
                )?);
                names.push("split_resp".into());
            }
            Extractor::NeighborWeightedResponse { rule, fallback } => {
                let y = context.response.ok_or_else(|| {
                    Error::Config(
                        "neighbor-weighted response needs observed responses in the context"
                            .into(),
                    )
                })?;
                let v = neighbor_weighted_response(graph, y, rule, context.exclude, *fallback)?;
                blocks.push(Array2::from_shape_vec((n, 1), v).expect("length checked"));
                names.push("nbr_resp".into());
            }
        }
    }
    let total: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Array2::zeros((n, total));
    let mut col = 0usize;
    for b in blocks {
        for c in 0..b.ncols() {
            for i in 0..n {
                out[[i, col]] = b[[i, c]];
            }
            col += 1;
        }
    }
    debug_assert_eq!(names.len(), total);
    Ok((out, names))
}

/// Result of one equivariance check.
#[derive(Debug, Clone)]
pub struct EquivarianceReport {
    /// Max row-aligned absolute discrepancy, or `None` when the check was
    /// skipped by the eigengap screen.
    pub discrepancy: Option<f64>,
    pub tol: f64,
}

impl EquivarianceReport {
    pub fn passed(&self) -> bool {
        self.discrepancy.map_or(true, |d| d <= self.tol)
    }

    pub fn skipped(&self) -> bool {
        self.discrepancy.is_none()
    }
}

/// Minimum gap between consecutive sorted eigenvalues.
fn min_eigengap(graph: &Graph) -> Result<f64> {
    let (vals, _) = linalg::eigh_full(graph.to_dense().view())?;
    let mut gap = f64::INFINITY;
    for w in vals.as_slice().expect("contiguous").windows(2) {
        gap = gap.min(w[1] - w[0]);
    }
    Ok(gap)
}

/// Verify `ζ(A^(σ), X^(σ)) = ζ(A, X)^(σ)` for one `(graph, σ)` pair: apply
/// the spec to the original and to the relabeled inputs (with the context's
/// index sets relabeled consistently) and report the max absolute
/// discrepancy after aligning rows through σ.
///
/// Specs containing a spectral extractor are only checked when the adjacency
/// spectrum is simple (minimum eigengap > 1e-6); otherwise eigenvectors are
/// not identified up to sign and the report comes back skipped.
pub fn check_equivariance(
    spec: &CovariateSpec,
    graph: &Graph,
    x: ArrayView2<f64>,
    sigma: &Permutation,
    context: &SplitContext,
    tol: f64,
) -> Result<EquivarianceReport> {
    if sigma.len() != graph.num_nodes() {
        return Err(Error::Parameter("permutation length mismatch".into()));
    }
    if spec.has_spectral() && min_eigengap(graph)? <= 1e-6 {
        return Ok(EquivarianceReport { discrepancy: None, tol });
    }

    let base_store;
    let exclude_store = sigma.preimage(context.exclude);
    let response_store;
    let permuted_context = SplitContext {
        base: match context.base {
            Some(b) => {
                base_store = sigma.preimage(b);
                Some(base_store.as_slice())
            }
            None => None,
        },
        exclude: &exclude_store,
        response: match context.response {
            Some(r) => {
                response_store = sigma.apply_vec(r);
                Some(response_store.as_slice())
            }
            None => None,
        },
    };

    let (z, _) = apply_covariate_spec(spec, graph, x, context)?;
    let gp = graph.permuted(sigma.as_slice())?;
    let xp = sigma.apply_rows(x);
    let (zp, _) = apply_covariate_spec(spec, &gp, xp.view(), &permuted_context)?;

    let mut worst = 0.0f64;
    for i in 0..sigma.len() {
        for c in 0..z.ncols() {
            worst = worst.max((zp[[i, c]] - z[[sigma.as_slice()[i], c]]).abs());
        }
    }
    Ok(EquivarianceReport { discrepancy: Some(worst), tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphgen::{sample_graphon_graph, GraphonSpec};
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn stream() -> RngStream {
        RngStream::new(7_070_707)
    }

    fn random_graph(n: usize, density: f64, salt: u64) -> Graph {
        let s = stream().substream(salt);
        let xi: Vec<f64> = vec![0.5; n];
        sample_graphon_graph(&GraphonSpec::Constant(density), 1.0, &xi, &s).unwrap()
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degrees(&Graph::empty(3)), vec![0.0, 0.0, 0.0]);
        let path = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(degrees(&path), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn mean_degree_of_a_homogeneous_graph_matches_its_expectation() {
        // Each of the 199 potential edges per node is present with
        // probability 0.1, so the expected degree is 19.9.
        let reps = 20;
        let mut total = 0.0;
        for r in 0..reps {
            let g = random_graph(200, 0.1, 1000 + r);
            total += degrees(&g).iter().sum::<f64>() / 200.0;
        }
        let mean = total / reps as f64;
        // Per-replicate sd of the mean degree is ≈ 0.42; 3 SE over 20 reps.
        assert!((mean - 19.9).abs() < 3.0 * 0.423 / (reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn ase_recovers_the_complete_graph_spectrum() {
        // K4 adjacency J − I has eigenvalues {3, −1, −1, −1}.
        let k4 = Graph::from_pair_fn(4, |_, _| true);
        let (uhat, vhat, sys) = adjacency_spectral_embedding(&k4, 1, 3).unwrap();
        assert_abs_diff_eq!(sys.pos_values[0], 3.0, epsilon = 1e-10);
        for s in 0..3 {
            assert_abs_diff_eq!(sys.neg_magnitudes[s], 1.0, epsilon = 1e-10);
        }
        // Uhat column = √3 · (1/2, 1/2, 1/2, 1/2), positive by convention.
        for i in 0..4 {
            assert_abs_diff_eq!(uhat[[i, 0]], 3.0f64.sqrt() * 0.5, epsilon = 1e-10);
        }
        // Full (p,q) reconstruction is exact: A = UUᵀ − VVᵀ.
        let recon = uhat.dot(&uhat.t()) - vhat.dot(&vhat.t());
        let a = k4.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(recon[[i, j]], a[[i, j]], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn ase_rank_errors_report_available_counts() {
        let k4 = Graph::from_pair_fn(4, |_, _| true);
        match adjacency_spectral_embedding(&k4, 2, 0) {
            Err(Error::Rank(msg)) => {
                assert!(msg.contains("1 positive"), "message: {msg}");
                assert!(msg.contains("3 negative"), "message: {msg}");
            }
            other => panic!("expected rank error, got {other:?}"),
        }
        assert!(adjacency_spectral_embedding(&k4, 0, 4).is_err());
        assert!(adjacency_spectral_embedding(&k4, 3, 2).is_err()); // p+q > n
    }

    #[test]
    fn ase_with_q_zero_matches_the_positive_truncation() {
        let g = random_graph(20, 0.4, 3);
        let (uhat, vhat, sys) = adjacency_spectral_embedding(&g, 2, 0).unwrap();
        assert_eq!(vhat.ncols(), 0);
        assert!(sys.pos_values[0] >= sys.pos_values[1]);

        // Oracle: full decomposition, top-2 positive eigenpairs.
        let (vals, vecs) = linalg::eigh_full(g.to_dense().view()).unwrap();
        let n = 20;
        let mut recon = Array2::<f64>::zeros((n, n));
        for r in [n - 1, n - 2] {
            let lam = vals[r];
            assert!(lam > 0.0);
            for i in 0..n {
                for j in 0..n {
                    recon[[i, j]] += lam * vecs[[i, r]] * vecs[[j, r]];
                }
            }
        }
        let ase_recon = uhat.dot(&uhat.t());
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!(ase_recon[[i, j]], recon[[i, j]], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn ase_vectors_are_orthonormal() {
        let g = random_graph(25, 0.4, 4);
        let (_, _, sys) = adjacency_spectral_embedding(&g, 3, 2).unwrap();
        let gram_u = sys.pos_vectors.t().dot(&sys.pos_vectors);
        let gram_v = sys.neg_vectors.t().dot(&sys.neg_vectors);
        for (gram, k) in [(gram_u, 3), (gram_v, 2)] {
            for i in 0..k {
                for j in 0..k {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(gram[[i, j]], expect, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn neighborhood_average_star_weighted_and_fallbacks() {
        // Star: center 0 with leaves carrying X = 1, 2, 3.
        let star = Graph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let avg = neighborhood_average(&star, x.view(), Fallback::GlobalMean).unwrap();
        assert_abs_diff_eq!(avg[[0, 0]], 2.0, epsilon = 1e-15);

        // Weighted: node 0 sees 3 with weight 2 and 0 with weight 1.
        let wg = Graph::from_edges(3, &[(0, 1, 2.0), (0, 2, 1.0)]).unwrap();
        let wx = array![[0.0], [3.0], [0.0]];
        let wavg = neighborhood_average(&wg, wx.view(), Fallback::Zero).unwrap();
        assert_abs_diff_eq!(wavg[[0, 0]], 2.0, epsilon = 1e-15);

        // Isolated node 3: global-mean fallback averages all of X.
        let iso = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap();
        let ix = array![[1.0], [2.0], [3.0], [10.0]];
        let a = neighborhood_average(&iso, ix.view(), Fallback::GlobalMean).unwrap();
        assert_abs_diff_eq!(a[[3, 0]], 4.0, epsilon = 1e-15);
        let z = neighborhood_average(&iso, ix.view(), Fallback::Zero).unwrap();
        assert_eq!(z[[3, 0]], 0.0);
        assert!(neighborhood_average(&iso, ix.view(), Fallback::Error).is_err());
    }

    #[test]
    fn khop_stats_hand_cases() {
        let path = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let x = array![[10.0], [20.0], [30.0]];
        let prof = khop_stats(&path, x.view(), 2).unwrap();
        assert_eq!(prof.counts[[0, 0]], 1);
        assert_eq!(prof.counts[[0, 1]], 1);
        assert_abs_diff_eq!(prof.averages[1][[0, 0]], 30.0, epsilon = 1e-15);

        let k4 = Graph::from_pair_fn(4, |_, _| true);
        let x4 = Array2::zeros((4, 1));
        let prof = khop_stats(&k4, x4.view(), 2).unwrap();
        for i in 0..4 {
            assert_eq!(prof.counts[[i, 0]], 3);
            assert_eq!(prof.counts[[i, 1]], 0);
            assert!(!prof.reach[[i, 1]]);
            assert!(prof.averages[1][[i, 0]].is_nan());
        }

        assert!(khop_stats(&k4, x4.view(), 0).is_err());
    }

    #[test]
    fn neighbor_weighted_response_uniform_exclusion_and_decay() {
        let tri = Graph::from_pair_fn(3, |_, _| true);
        let y = [1.0, 2.0, 3.0];
        let v = neighbor_weighted_response(&tri, &y, &WeightRule::OneHop, &[], Fallback::Error)
            .unwrap();
        assert_abs_diff_eq!(v[0], 2.5, epsilon = 1e-15);

        // Excluding node 2 removes it from numerator and denominator.
        let v = neighbor_weighted_response(&tri, &y, &WeightRule::OneHop, &[2], Fallback::Error)
            .unwrap();
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-15);
        // The excluded node still gets its own average over the others.
        assert_abs_diff_eq!(v[2], 1.5, epsilon = 1e-15);

        // Geometric decay on a path: hand-weighted mean.
        let path = Graph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let y = [0.0, 1.0, 2.0, 4.0];
        let rule = WeightRule::GeometricDecay { gamma: 0.5, kmax: 3 };
        let v = neighbor_weighted_response(&path, &y, &rule, &[], Fallback::Error).unwrap();
        let expect = (0.5 * 1.0 + 0.25 * 2.0 + 0.125 * 4.0) / 0.875;
        assert_abs_diff_eq!(v[0], expect, epsilon = 1e-12);

        // Zero-weight fallback: isolated node takes the kept-response mean.
        let iso = Graph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        let v =
            neighbor_weighted_response(&iso, &[1.0, 3.0, 9.0], &WeightRule::OneHop, &[], Fallback::GlobalMean)
                .unwrap();
        assert_abs_diff_eq!(v[2], 13.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn split_average_hand_cases_and_reduction_to_full_average() {
        // Target 2 adjacent to base {0,1} carrying X = 4, 6.
        let g = Graph::from_edges(3, &[(0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        let x = array![[4.0], [6.0], [0.0]];
        let s = split_neighborhood_average(&g, x.view(), &[0, 1], &[2], Fallback::Error).unwrap();
        assert_abs_diff_eq!(s[[0, 0]], 5.0, epsilon = 1e-15);

        // Target with no base neighbors falls back to the base mean.
        let s = split_neighborhood_average(&g, x.view(), &[0], &[1], Fallback::GlobalMean).unwrap();
        assert_abs_diff_eq!(s[[0, 0]], 4.0, epsilon = 1e-15);
        assert!(split_neighborhood_average(&g, x.view(), &[0], &[1], Fallback::Error).is_err());

        // With base = all-other-nodes the split statistic equals the plain
        // neighborhood average (connected graph: no fallback involved).
        let g = random_graph(15, 0.6, 8);
        let x = Array2::from_shape_fn((15, 2), |(i, c)| ((i * 2 + c * 5) % 11) as f64);
        let full = neighborhood_average(&g, x.view(), Fallback::Error).unwrap();
        for k in 0..15 {
            let base: Vec<usize> = (0..15).filter(|&j| j != k).collect();
            let s =
                split_neighborhood_average(&g, x.view(), &base, &[k], Fallback::Error).unwrap();
            for c in 0..2 {
                assert_abs_diff_eq!(s[[0, c]], full[[k, c]], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn split_average_reads_only_base_rows_and_base_target_edges() {
        // Locality: mutate things outside base ∪ {targets} and assert the
        // output is bit-identical.
        let n = 12;
        let base: Vec<usize> = (0..4).collect();
        let targets: Vec<usize> = (8..12).collect();
        let edges_a = vec![
            (0usize, 8usize, 1.0f64),
            (1, 8, 1.0),
            (2, 9, 1.0),
            (3, 10, 1.0),
            (0, 11, 1.0),
            (5, 6, 1.0), // outside edge
            (4, 9, 1.0), // non-base neighbor of a target: ignored
        ];
        let mut edges_b = edges_a.clone();
        edges_b.push((9, 10, 1.0)); // target–target edge: ignored
        edges_b.push((5, 7, 1.0)); // another outside edge
        let ga = Graph::from_edges(n, &edges_a).unwrap();
        let gb = Graph::from_edges(n, &edges_b).unwrap();

        let xa = Array2::from_shape_fn((n, 2), |(i, c)| (i * 3 + c) as f64 * 0.25);
        let mut xb = xa.clone();
        for i in 4..n {
            // Rows outside the base (including target rows) may change freely.
            xb[[i, 0]] = -99.0;
            xb[[i, 1]] = 42.0;
        }

        let sa =
            split_neighborhood_average(&ga, xa.view(), &base, &targets, Fallback::GlobalMean)
                .unwrap();
        let sb =
            split_neighborhood_average(&gb, xb.view(), &base, &targets, Fallback::GlobalMean)
                .unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn apply_spec_concatenates_named_columns() {
        let path = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let x = array![[1.0, 5.0], [2.0, 6.0], [3.0, 7.0]];
        let spec = CovariateSpec::new(vec![Extractor::Degree]);
        let (z, names) = apply_covariate_spec(&spec, &path, x.view(), &SplitContext::default())
            .unwrap();
        assert_eq!(names, vec!["degree"]);
        assert_eq!(z.column(0).to_vec(), vec![1.0, 2.0, 1.0]);

        let spec = CovariateSpec::new(vec![
            Extractor::Degree,
            Extractor::NeighborhoodAverage { columns: None, fallback: Fallback::GlobalMean },
        ]);
        let (z, names) = apply_covariate_spec(&spec, &path, x.view(), &SplitContext::default())
            .unwrap();
        assert_eq!(z.ncols(), 3);
        assert_eq!(names, vec!["degree", "nbr_avg_x0", "nbr_avg_x1"]);
        assert_abs_diff_eq!(z[[1, 1]], 2.0, epsilon = 1e-15); // mean of X0 over {0,2}

        // Split extractors demand their context.
        let spec = CovariateSpec::new(vec![Extractor::SplitNeighborhoodAverage {
            columns: None,
            fallback: Fallback::GlobalMean,
        }]);
        assert!(apply_covariate_spec(&spec, &path, x.view(), &SplitContext::default()).is_err());

        let spec = CovariateSpec::new(vec![Extractor::NeighborWeightedResponse {
            rule: WeightRule::OneHop,
            fallback: Fallback::GlobalMean,
        }]);
        assert!(apply_covariate_spec(&spec, &path, x.view(), &SplitContext::default()).is_err());
    }

    #[test]
    fn combinatorial_extractors_are_exactly_equivariant() {
        let mut rng = stream().substream(40).rng(crate::rng::Purpose::Splits);
        let spec = CovariateSpec::new(vec![
            Extractor::Degree,
            Extractor::NeighborhoodAverage { columns: None, fallback: Fallback::GlobalMean },
            Extractor::Khop { kmax: 2, columns: Some(vec![0]), fallback: Fallback::GlobalMean },
            Extractor::SplitNeighborhoodAverage { columns: None, fallback: Fallback::GlobalMean },
            Extractor::NeighborWeightedResponse {
                rule: WeightRule::GeometricDecay { gamma: 0.5, kmax: 2 },
                fallback: Fallback::GlobalMean,
            },
        ]);
        for salt in 0..5 {
            let n = 18;
            let g = random_graph(n, 0.3, 60 + salt);
            let x = Array2::from_shape_fn((n, 2), |(i, c)| ((i * 7 + c * 3) % 13) as f64 - 6.0);
            let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.61).cos()).collect();
            let base: Vec<usize> = (0..n / 2).collect();
            let ctx = SplitContext { base: Some(&base), exclude: &[n - 1], response: Some(&y) };
            let sigma = Permutation::random(n, &mut rng);
            let report = check_equivariance(&spec, &g, x.view(), &sigma, &ctx, 0.0).unwrap();
            assert!(!report.skipped());
            assert_eq!(report.discrepancy, Some(0.0));
        }
    }

    #[test]
    fn spectral_embedding_is_equivariant_on_simple_spectra() {
        let mut rng = stream().substream(41).rng(crate::rng::Purpose::Splits);
        let spec = CovariateSpec::new(vec![Extractor::Ase { p: 3, q: 0 }]);
        let mut checked = 0;
        for salt in 0..8 {
            let n = 20;
            let g = random_graph(n, 0.4, 80 + salt);
            let x = Array2::zeros((n, 1));
            let sigma = Permutation::random(n, &mut rng);
            let report =
                check_equivariance(&spec, &g, x.view(), &sigma, &SplitContext::default(), 1e-8)
                    .unwrap();
            if !report.skipped() {
                checked += 1;
                assert!(report.passed(), "discrepancy {:?}", report.discrepancy);
            }
        }
        assert!(checked >= 3, "eigengap screen rejected almost every graph");
    }

    #[test]
    fn permutation_validates_and_inverts_sets() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        let sigma = Permutation::new(vec![2, 0, 1]).unwrap();
        // σ(0)=2, σ(1)=0, σ(2)=1; old set {2} is new label {0}.
        assert_eq!(sigma.preimage(&[2]), vec![0]);
        assert_eq!(sigma.apply_vec(&[10, 20, 30]), vec![30, 10, 20]);
    }
}
