//! Independent oracles shared by the test binaries.
//!
//! Everything here reimplements a numerical core from first principles —
//! dense Gaussian elimination instead of the library's solvers, repeated
//! minimum extraction instead of sorting, Floyd–Warshall instead of BFS —
//! so that agreement between the two is evidence, not tautology.
#![allow(dead_code)] // each test binary links this module and uses a subset

use ndarray::{Array2, ArrayView2};
use netconform::covariates;
use netconform::graph::Graph;
use netconform::regress::KernelSpec;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

// ---------------------------------------------------------------------------
// Conformal quantile oracle
// ---------------------------------------------------------------------------

/// `k`-th smallest (1-based) by repeated minimum extraction; no sorting.
pub fn kth_smallest_by_extraction(scores: &[f64], k: usize) -> f64 {
    assert!(k >= 1 && k <= scores.len());
    let mut pool = scores.to_vec();
    let mut last = f64::NAN;
    for _ in 0..k {
        let (pos, _) = pool
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("pool is nonempty");
        last = pool.swap_remove(pos);
    }
    last
}

/// The calibration threshold computed from the definition: the k-th order
/// statistic with k = ⌈(1−α)(n+1)⌉, +∞ when k exceeds n. `k_true` lets the
/// caller supply k from exact integer arithmetic when α was constructed as
/// 1 − j/(n+1); otherwise the caller derives it from the float formula.
pub fn oracle_quantile(scores: &[f64], k_true: usize) -> (f64, usize) {
    let n = scores.len();
    if k_true > n {
        (f64::INFINITY, k_true)
    } else {
        (kth_smallest_by_extraction(scores, k_true), k_true)
    }
}

// ---------------------------------------------------------------------------
// Dense linear algebra oracle
// ---------------------------------------------------------------------------

/// Gaussian elimination with partial pivoting on a dense system; `None` when
/// a pivot collapses. Deliberately naive — O(m³), row swaps, no packing.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    assert!(a.len() == m && a.iter().all(|row| row.len() == m));
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[pivot][col].abs() < 1e-12 {
            return None;
        }
        aug.swap(col, pivot);
        for row in col + 1..m {
            let f = aug[row][col] / aug[col][col];
            for c in col..=m {
                aug[row][c] -= f * aug[col][c];
            }
        }
    }
    let mut x = vec![0.0; m];
    for col in (0..m).rev() {
        let mut s = aug[col][m];
        for c in col + 1..m {
            s -= aug[col][c] * x[c];
        }
        x[col] = s / aug[col][col];
    }
    Some(x)
}

/// Least squares via the normal equations: minimise ‖[1 X]β − y‖² by solving
/// (DᵀD)β = Dᵀy with D = [1 X]. Returns (intercept, coefficients).
pub fn ols_normal_equations(design: ArrayView2<f64>, y: &[f64]) -> Option<(f64, Vec<f64>)> {
    let n = design.nrows();
    let p = design.ncols();
    assert_eq!(y.len(), n);
    let m = p + 1;
    let d = |i: usize, c: usize| if c == 0 { 1.0 } else { design[[i, c - 1]] };
    let mut dtd = vec![vec![0.0; m]; m];
    let mut dty = vec![0.0; m];
    for r in 0..m {
        for c in 0..m {
            dtd[r][c] = (0..n).map(|i| d(i, r) * d(i, c)).sum();
        }
        dty[r] = (0..n).map(|i| d(i, r) * y[i]).sum();
    }
    let beta = solve_dense(&dtd, &dty)?;
    Some((beta[0], beta[1..].to_vec()))
}

// ---------------------------------------------------------------------------
// Kernel CDF oracle
// ---------------------------------------------------------------------------

/// Weighted empirical CDF straight from the definition:
/// F̂(y | x, z) = Σᵢ wᵢ·1{yᵢ ≤ y} / Σᵢ wᵢ with
/// wᵢ = H((‖Xᵢ−x‖ + ‖Ẑᵢ−z‖)/h), summed in row order with absolute weights.
pub fn weighted_cdf_oracle(
    xt: ArrayView2<f64>,
    zt: ArrayView2<f64>,
    yt: &[f64],
    kernel: KernelSpec,
    bandwidth: f64,
    y: f64,
    xq: &[f64],
    zq: &[f64],
) -> f64 {
    let norm = |row: ndarray::ArrayView1<f64>, q: &[f64]| -> f64 {
        row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..yt.len() {
        let t = (norm(xt.row(i), xq) + norm(zt.row(i), zq)) / bandwidth;
        let w = kernel.weight_at(t);
        den += w;
        if yt[i] <= y {
            num += w;
        }
    }
    num / den
}

// ---------------------------------------------------------------------------
// Principal-components oracle
// ---------------------------------------------------------------------------

/// Full symmetric eigendecomposition by cyclic Jacobi rotations; returns
/// (eigenvalues, eigenvector columns) in no particular order.
pub fn jacobi_eigh(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = a.len();
    let mut s: Vec<Vec<f64>> = a.to_vec();
    let mut v = vec![vec![0.0; m]; m];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|p| (p + 1..m).map(move |q| (p, q)))
            .map(|(p, q)| s[p][q] * s[p][q])
            .sum();
        if off <= 1e-28 {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                if s[p][q].abs() <= 1e-15 {
                    continue;
                }
                let theta = (s[q][q] - s[p][p]) / (2.0 * s[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let snt = t * c;
                for k in 0..m {
                    let (skp, skq) = (s[k][p], s[k][q]);
                    s[k][p] = c * skp - snt * skq;
                    s[k][q] = snt * skp + c * skq;
                }
                for k in 0..m {
                    let (spk, sqk) = (s[p][k], s[q][k]);
                    s[p][k] = c * spk - snt * sqk;
                    s[q][k] = snt * spk + c * sqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - snt * vq;
                    row[q] = snt * vp + c * vq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..m).map(|i| s[i][i]).collect();
    (vals, v)
}

/// PCA scores straight from the definition: column-center, form the sample
/// covariance (divisor n−1), Jacobi-decompose it, and project onto the `k`
/// leading eigenvectors. Column signs are arbitrary.
pub fn pca_scores_oracle(x: ArrayView2<f64>, k: usize) -> Array2<f64> {
    let (n, m) = x.dim();
    let mut centered = x.to_owned();
    for c in 0..m {
        let mean = centered.column(c).sum() / n as f64;
        centered.column_mut(c).mapv_inplace(|v| v - mean);
    }
    let mut cov = vec![vec![0.0; m]; m];
    for (r, row) in cov.iter_mut().enumerate() {
        for c in 0..m {
            row[c] = (0..n).map(|i| centered[[i, r]] * centered[[i, c]]).sum::<f64>()
                / (n as f64 - 1.0);
        }
    }
    let (vals, vecs) = jacobi_eigh(&cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut scores = Array2::zeros((n, k));
    for (r, &col) in order.iter().take(k).enumerate() {
        for i in 0..n {
            scores[[i, r]] = (0..m).map(|c| centered[[i, c]] * vecs[c][col]).sum();
        }
    }
    scores
}

// ---------------------------------------------------------------------------
// Shortest-path oracle
// ---------------------------------------------------------------------------

/// All-pairs shortest paths by Floyd–Warshall on the unweighted skeleton;
/// `u32::MAX` marks unreachable pairs. O(n³) — keep n small.
pub fn floyd_warshall(graph: &Graph) -> Vec<Vec<u32>> {
    let n = graph.num_nodes();
    const INF: u32 = u32::MAX;
    let mut dist = vec![vec![INF; n]; n];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0;
    }
    for (i, j, _) in graph.edges() {
        dist[i][j] = 1;
        dist[j][i] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            if dist[i][k] == INF {
                continue;
            }
            for j in 0..n {
                if dist[k][j] == INF {
                    continue;
                }
                let via = dist[i][k] + dist[k][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                }
            }
        }
    }
    dist
}

/// Level counts and level covariate means from an all-pairs distance matrix:
/// `(counts[[i, k-1]], means[k-1][[i, c]])` over nodes at distance exactly k.
pub fn khop_oracle(
    dist: &[Vec<u32>],
    x: ArrayView2<f64>,
    kmax: usize,
) -> (Array2<u32>, Vec<Array2<f64>>) {
    let n = dist.len();
    let p = x.ncols();
    let mut counts = Array2::zeros((n, kmax));
    let mut means = vec![Array2::from_elem((n, p), f64::NAN); kmax];
    for i in 0..n {
        for k in 1..=kmax {
            let level: Vec<usize> =
                (0..n).filter(|&j| dist[i][j] != u32::MAX && dist[i][j] as usize == k).collect();
            counts[[i, k - 1]] = level.len() as u32;
            if !level.is_empty() {
                for c in 0..p {
                    let s: f64 = level.iter().map(|&j| x[[j, c]]).sum();
                    means[k - 1][[i, c]] = s / level.len() as f64;
                }
            }
        }
    }
    (counts, means)
}

// ---------------------------------------------------------------------------
// Autoregressive system oracle
// ---------------------------------------------------------------------------

/// Row-normalized one-hop weight matrix taken straight from the adjacency
/// weights: wᵢⱼ = aᵢⱼ / Σⱼ aᵢⱼ, rows of isolated nodes left at zero.
pub fn row_normalized_dense(graph: &Graph) -> Vec<Vec<f64>> {
    let n = graph.num_nodes();
    let mut w = vec![vec![0.0; n]; n];
    for (i, row) in w.iter_mut().enumerate() {
        let total: f64 = (0..n).map(|j| graph.weight(i, j)).sum();
        if total > 0.0 {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = graph.weight(i, j) / total;
            }
        }
    }
    w
}

/// Solve (I − ρW)y = c densely by Gaussian elimination.
pub fn sar_oracle_solve(graph: &Graph, c: &[f64], rho: f64) -> Option<Vec<f64>> {
    let n = graph.num_nodes();
    let w = row_normalized_dense(graph);
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = if i == j { 1.0 } else { 0.0 } - rho * w[i][j];
        }
    }
    solve_dense(&a, c)
}

// ---------------------------------------------------------------------------
// Random test inputs
// ---------------------------------------------------------------------------

/// Erdős–Rényi graph on `n` nodes with edge probability `p`.
pub fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> Graph {
    Graph::from_pair_fn(n, |_, _| rng.random::<f64>() < p)
}

// ---------------------------------------------------------------------------
// Equivariance sweep
// ---------------------------------------------------------------------------

/// Outcome of [`equivariance_sweep`]: how many pairs were actually compared,
/// how many the eigengap screen set aside, and the worst discrepancy among
/// the compared ones.
pub struct EquivSummary {
    pub checked: usize,
    pub skipped: usize,
    pub worst: f64,
}

/// Run `pairs` random (graph, permutation) relabeling checks for one
/// extractor: random graphs of 20–40 nodes, two base covariate columns, a
/// synthetic response, and a 60/20/20 base/other/held-out split.
pub fn equivariance_sweep(
    extractor: covariates::Extractor,
    pairs: usize,
    tol: f64,
    seed: u64,
) -> EquivSummary {
    use covariates::{check_equivariance, CovariateSpec, Permutation, SplitContext};
    let mut rng = StdRng::seed_from_u64(seed);
    let spec = CovariateSpec::new(vec![extractor]);
    let mut summary = EquivSummary { checked: 0, skipped: 0, worst: 0.0 };
    for _ in 0..pairs {
        let n = rng.random_range(20..=40);
        let graph = random_graph(n, rng.random_range(0.2..0.5), &mut rng);
        let x = random_matrix(n, 2, &mut rng);
        let response: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order_shuffle(&mut order, &mut rng);
        let base = &order[..(3 * n) / 5];
        let exclude = &order[(4 * n) / 5..];
        let context = SplitContext {
            base: Some(base),
            exclude,
            response: Some(&response),
        };
        let sigma = Permutation::random(n, &mut rng);
        let report = check_equivariance(&spec, &graph, x.view(), &sigma, &context, tol)
            .expect("equivariance check is well-posed on these inputs");
        match report.discrepancy {
            None => summary.skipped += 1,
            Some(d) => {
                summary.checked += 1;
                summary.worst = summary.worst.max(d);
            }
        }
    }
    summary
}

fn order_shuffle(order: &mut [usize], rng: &mut impl Rng) {
    use rand::seq::SliceRandom;
    order.shuffle(rng);
}

/// n×p matrix of independent Uniform(−1, 1) entries.
pub fn random_matrix(n: usize, p: usize, rng: &mut impl Rng) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..1.0))
}
