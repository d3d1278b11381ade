//! Undirected graphs as symmetric hollow adjacency matrices.
//!
//! Binary graphs store one byte per entry (an n = 6001 node graph costs
//! 36 MB instead of the 288 MB a dense f64 matrix would take); weighted
//! graphs store f64. Both enforce the structural invariants — symmetry and a
//! zero diagonal — at every construction from untrusted input; the internal
//! samplers construct by mirroring and are covered by tests instead.

use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Store {
    Binary(Vec<u8>),
    Weighted(Vec<f64>),
}

/// A symmetric, hollow adjacency matrix over `n` nodes.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    store: Store,
}

impl Graph {
    /// Graph with no edges.
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            store: Store::Binary(vec![0u8; n * n]),
        }
    }

    /// Build a binary graph by evaluating `edge(i, j)` on every pair `i < j`.
    pub fn from_pair_fn(n: usize, mut edge: impl FnMut(usize, usize) -> bool) -> Self {
        let mut a = vec![0u8; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                if edge(i, j) {
                    a[i * n + j] = 1;
                    a[j * n + i] = 1;
                }
            }
        }
        Graph {
            n,
            store: Store::Binary(a),
        }
    }

    /// Validating constructor from a dense matrix. Accepts binary or
    /// non-negative weighted entries; rejects asymmetry, nonzero diagonals,
    /// negative weights, and non-finite values.
    pub fn from_dense(a: ArrayView2<f64>) -> Result<Self> {
        let (r, c) = a.dim();
        if r != c {
            return Err(Error::Parameter(format!("adjacency must be square, got {r}x{c}")));
        }
        let n = r;
        let mut binary = true;
        for i in 0..n {
            if a[[i, i]] != 0.0 {
                return Err(Error::Parameter(format!("nonzero diagonal entry at node {i}")));
            }
            for j in (i + 1)..n {
                let v = a[[i, j]];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Parameter(format!(
                        "invalid weight {v} between nodes {i} and {j}"
                    )));
                }
                if v != a[[j, i]] {
                    return Err(Error::Parameter(format!(
                        "asymmetric entries between nodes {i} and {j}"
                    )));
                }
                if v != 0.0 && v != 1.0 {
                    binary = false;
                }
            }
        }
        let store = if binary {
            Store::Binary(a.iter().map(|&v| v as u8).collect())
        } else {
            Store::Weighted(a.iter().copied().collect())
        };
        Ok(Graph { n, store })
    }

    /// Build from an undirected edge list. Each pair may appear once in
    /// either orientation (or both, with equal weights); self-loops and
    /// conflicting duplicates are rejected. `n` must cover every endpoint.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = vec![0.0f64; n * n];
        let mut seen = vec![false; n * n];
        let mut binary = true;
        for &(i, j, v) in edges {
            if i >= n || j >= n {
                return Err(Error::Parameter(format!(
                    "edge ({i},{j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::Parameter(format!("self-loop at node {i}")));
            }
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Parameter(format!(
                    "invalid weight {v} on edge ({i},{j})"
                )));
            }
            let (lo, hi) = (i.min(j), i.max(j));
            let key = lo * n + hi;
            if seen[key] && w[key] != v {
                return Err(Error::Parameter(format!(
                    "conflicting duplicate edge ({lo},{hi})"
                )));
            }
            seen[key] = true;
            w[key] = v;
            w[hi * n + lo] = v;
            if v != 1.0 {
                binary = false;
            }
        }
        let store = if binary {
            Store::Binary(w.iter().map(|&v| v as u8).collect())
        } else {
            Store::Weighted(w)
        };
        Ok(Graph { n, store })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// True when all weights are 0/1.
    pub fn is_binary(&self) -> bool {
        matches!(self.store, Store::Binary(_))
    }

    /// Edge weight (0.0 when absent).
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match &self.store {
            Store::Binary(a) => a[i * self.n + j] as f64,
            Store::Weighted(w) => w[i * self.n + j],
        }
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.weight(i, j) != 0.0
    }

    /// Weighted degree of every node (edge count for binary graphs). Weighted
    /// rows are summed in value order so the result is invariant under node
    /// relabeling (binary rows are exact integer sums in any order).
    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| match &self.store {
                Store::Binary(a) => a[i * self.n..(i + 1) * self.n]
                    .iter()
                    .map(|&v| v as f64)
                    .sum(),
                Store::Weighted(w) => {
                    let mut row = w[i * self.n..(i + 1) * self.n].to_vec();
                    row.sort_unstable_by(f64::total_cmp);
                    row.iter().sum()
                }
            })
            .collect()
    }

    /// Neighbors of node `i` with weights, ascending by index.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let row = i * self.n;
        (0..self.n).filter_map(move |j| {
            let w = match &self.store {
                Store::Binary(a) => a[row + j] as f64,
                Store::Weighted(w) => w[row + j],
            };
            (w != 0.0).then_some((j, w))
        })
    }

    /// Edges as `(i, j, weight)` with `i < j`, lexicographic.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            ((i + 1)..self.n).filter_map(move |j| {
                let w = self.weight(i, j);
                (w != 0.0).then_some((i, j, w))
            })
        })
    }

    pub fn num_edges(&self) -> usize {
        self.edges().count()
    }

    /// Dense f64 copy (the form the eigensolvers consume).
    pub fn to_dense(&self) -> Array2<f64> {
        let data = match &self.store {
            Store::Binary(a) => a.iter().map(|&v| v as f64).collect(),
            Store::Weighted(w) => w.clone(),
        };
        Array2::from_shape_vec((self.n, self.n), data).expect("store length is n*n")
    }

    /// Induced subgraph on `nodes[0..k]` keeping their order as new labels.
    pub fn induced(&self, nodes: &[usize]) -> Result<Graph> {
        let k = nodes.len();
        for &v in nodes {
            if v >= self.n {
                return Err(Error::Parameter(format!(
                    "node {v} out of range for {} nodes",
                    self.n
                )));
            }
        }
        match &self.store {
            Store::Binary(a) => {
                let mut sub = vec![0u8; k * k];
                for (bi, &i) in nodes.iter().enumerate() {
                    for (bj, &j) in nodes.iter().enumerate() {
                        sub[bi * k + bj] = a[i * self.n + j];
                    }
                }
                Ok(Graph { n: k, store: Store::Binary(sub) })
            }
            Store::Weighted(w) => {
                let mut sub = vec![0.0f64; k * k];
                for (bi, &i) in nodes.iter().enumerate() {
                    for (bj, &j) in nodes.iter().enumerate() {
                        sub[bi * k + bj] = w[i * self.n + j];
                    }
                }
                Ok(Graph { n: k, store: Store::Weighted(sub) })
            }
        }
    }

    /// Relabel nodes: entry `(i, j)` of the result is `(σ(i), σ(j))` of this
    /// graph, i.e. new node `i` is old node `sigma[i]`.
    pub fn permuted(&self, sigma: &[usize]) -> Result<Graph> {
        if sigma.len() != self.n {
            return Err(Error::Parameter("permutation length mismatch".into()));
        }
        let mut hit = vec![false; self.n];
        for &s in sigma {
            if s >= self.n || hit[s] {
                return Err(Error::Parameter(format!("sigma is not a permutation at value {s}")));
            }
            hit[s] = true;
        }
        self.induced(sigma)
    }

    /// Unweighted shortest-path lengths from `src`, breadth-first, capped at
    /// `kmax` hops. Nodes farther than `kmax` (or unreachable) get `u32::MAX`.
    pub fn bfs_distances(&self, src: usize, kmax: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n];
        dist[src] = 0;
        let mut frontier = vec![src];
        let mut depth = 0u32;
        while !frontier.is_empty() && (depth as usize) < kmax {
            depth += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for (v, _) in self.neighbors(u) {
                    if dist[v] == u32::MAX {
                        dist[v] = depth;
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    /// Write the edge list as TSV: one `i<TAB>j` line per edge (`i < j`,
    /// 0-indexed), with a third weight column for non-unit weights.
    pub fn write_edge_list(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (i, j, w) in self.edges() {
            if w == 1.0 {
                writeln!(out, "{i}\t{j}")?;
            } else {
                writeln!(out, "{i}\t{j}\t{w}")?;
            }
        }
        Ok(())
    }

    /// Read an edge list written by [`Graph::write_edge_list`]. `n` fixes the
    /// node count (needed to preserve isolated trailing nodes); pass `None`
    /// to infer `max index + 1`.
    pub fn read_edge_list(input: impl BufRead, n: Option<usize>) -> Result<Graph> {
        let mut edges: Vec<(usize, usize, f64)> = Vec::new();
        let mut max_node = 0usize;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let mut parts = t.split('\t');
            let parse_node = |s: Option<&str>, what: &str| -> Result<usize> {
                s.ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: format!("missing {what}"),
                })?
                .trim()
                .parse()
                .map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("invalid {what}"),
                })
            };
            let i = parse_node(parts.next(), "source node")?;
            let j = parse_node(parts.next(), "target node")?;
            let w = match parts.next() {
                None => 1.0,
                Some(s) => s.trim().parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: "invalid weight".into(),
                })?,
            };
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "too many fields".into(),
                });
            }
            max_node = max_node.max(i).max(j);
            edges.push((i, j, w));
        }
        let n = match n {
            Some(n) => n,
            None => {
                if edges.is_empty() {
                    return Err(Error::Parameter(
                        "cannot infer node count from an empty edge list".into(),
                    ));
                }
                max_node + 1
            }
        };
        Graph::from_edges(n, &edges)
    }

    /// Write the dense adjacency as CSV with a header row `v0,v1,…`.
    pub fn write_dense_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.n).map(|j| format!("v{j}")).collect();
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|j| self.weight(i, j).to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Read a dense adjacency CSV produced by [`Graph::write_dense_csv`]
    /// (any header names accepted; the row/column count must match).
    pub fn read_dense_csv(input: impl BufRead) -> Result<Graph> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if lineno == 1 {
                width = Some(line.split(',').count());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| Error::Parse {
                        line: lineno,
                        msg: format!("invalid number {s:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if Some(row.len()) != width {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "inconsistent column count".into(),
                });
            }
            rows.push(row);
        }
        let n = rows.len();
        if width != Some(n) {
            return Err(Error::Parameter(format!(
                "dense CSV is {n} rows by {} columns, expected square",
                width.unwrap_or(0)
            )));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let a = Array2::from_shape_vec((n, n), flat).expect("checked dimensions");
        Graph::from_dense(a.view())
    }
}
