//! Datasets binding a graph to node covariates, a response, and index
//! splits, with directory persistence and a loader for citation-corpus
//! files (one content row per paper, one cite row per reference).

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Node responses: real-valued for regression, categorical (indices into a
/// recorded class alphabet) for classification.
#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Real(Vec<f64>),
    Categorical { labels: Vec<usize>, classes: Vec<String> },
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Real(v) => v.len(),
            Response::Categorical { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Real response values, or a config error for categorical data.
    pub fn as_real(&self) -> Result<&[f64]> {
        match self {
            Response::Real(v) => Ok(v),
            Response::Categorical { .. } => Err(Error::Config(
                "operation needs a real-valued response, got categorical".into(),
            )),
        }
    }

    /// Label indices and alphabet, or a config error for real data.
    pub fn as_categorical(&self) -> Result<(&[usize], &[String])> {
        match self {
            Response::Categorical { labels, classes } => Ok((labels, classes)),
            Response::Real(_) => Err(Error::Config(
                "operation needs a categorical response, got real".into(),
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Response::Categorical { labels, classes } = self {
            if classes.is_empty() {
                return Err(Error::Parameter("class alphabet is empty".into()));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= classes.len()) {
                return Err(Error::Parameter(format!(
                    "label index {bad} outside alphabet of {} classes",
                    classes.len()
                )));
            }
        }
        Ok(())
    }
}

/// Disjoint node-index sets for model fitting, score calibration, and
/// held-out evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub calibration: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for (name, set) in [
            ("train", &self.train),
            ("calibration", &self.calibration),
            ("test", &self.test),
        ] {
            for &i in set {
                if i >= n {
                    return Err(Error::Parameter(format!(
                        "{name} index {i} out of range for {n} nodes"
                    )));
                }
                if seen[i] {
                    return Err(Error::Parameter(format!(
                        "node {i} appears in more than one split"
                    )));
                }
                seen[i] = true;
            }
        }
        Ok(())
    }
}

/// Requested split sizes, either absolute or as fractions of `n`
/// (fractions round down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSpec {
    Counts { train: usize, calibration: usize, test: usize },
    Fractions { train: f64, calibration: f64, test: f64 },
}

/// Seeded uniform partition without replacement; each returned set is
/// sorted ascending.
pub fn make_splits(n: usize, spec: &SplitSpec, rng: &mut impl Rng) -> Result<Splits> {
    let (t, c, s) = match *spec {
        SplitSpec::Counts { train, calibration, test } => (train, calibration, test),
        SplitSpec::Fractions { train, calibration, test } => {
            for f in [train, calibration, test] {
                if !(0.0..=1.0).contains(&f) {
                    return Err(Error::Parameter(format!("fraction {f} outside [0,1]")));
                }
            }
            (
                (train * n as f64).floor() as usize,
                (calibration * n as f64).floor() as usize,
                (test * n as f64).floor() as usize,
            )
        }
    };
    if t + c + s > n {
        return Err(Error::Parameter(format!(
            "requested split sizes {t}+{c}+{s} exceed {n} nodes"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let take = |k: usize, from: &mut usize| {
        let mut v: Vec<usize> = idx[*from..*from + k].to_vec();
        *from += k;
        v.sort_unstable();
        v
    };
    let mut at = 0usize;
    Ok(Splits {
        train: take(t, &mut at),
        calibration: take(c, &mut at),
        test: take(s, &mut at),
    })
}

/// A graph with aligned node covariates, a response, and splits.
///
/// `x` holds observed covariates; `zhat` holds network covariates appended
/// by extraction (empty until then). All row counts equal the node count.
#[derive(Debug, Clone)]
pub struct NodeDataset {
    pub graph: Graph,
    pub x: Array2<f64>,
    pub x_names: Vec<String>,
    pub zhat: Array2<f64>,
    pub zhat_names: Vec<String>,
    pub y: Response,
    pub splits: Splits,
}

impl NodeDataset {
    /// Dataset with no network covariates and empty splits.
    pub fn new(graph: Graph, x: Array2<f64>, x_names: Vec<String>, y: Response) -> Result<Self> {
        let n = graph.num_nodes();
        let ds = NodeDataset {
            graph,
            zhat: Array2::zeros((n, 0)),
            zhat_names: Vec::new(),
            x,
            x_names,
            y,
            splits: Splits::default(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    /// Attach extracted network covariates (replacing any previous block).
    pub fn set_network_covariates(&mut self, zhat: Array2<f64>, names: Vec<String>) -> Result<()> {
        if zhat.nrows() != self.num_nodes() {
            return Err(Error::Parameter(format!(
                "network covariate rows {} do not match {} nodes",
                zhat.nrows(),
                self.num_nodes()
            )));
        }
        if names.len() != zhat.ncols() {
            return Err(Error::Parameter("network covariate name count mismatch".into()));
        }
        self.zhat = zhat;
        self.zhat_names = names;
        Ok(())
    }

    pub fn set_splits(&mut self, splits: Splits) -> Result<()> {
        splits.validate(self.num_nodes())?;
        self.splits = splits;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.x.nrows() != n || self.zhat.nrows() != n || self.y.len() != n {
            return Err(Error::Parameter(format!(
                "row counts (x {}, zhat {}, y {}) do not all match {n} nodes",
                self.x.nrows(),
                self.zhat.nrows(),
                self.y.len()
            )));
        }
        if self.x_names.len() != self.x.ncols() || self.zhat_names.len() != self.zhat.ncols() {
            return Err(Error::Parameter("column name counts do not match widths".into()));
        }
        self.y.validate()?;
        self.splits.validate(n)
    }

    /// Observed-covariate rows, in the order given.
    pub fn x_rows(&self, rows: &[usize]) -> Array2<f64> {
        select_rows(&self.x, rows)
    }

    /// Network-covariate rows, in the order given.
    pub fn zhat_rows(&self, rows: &[usize]) -> Array2<f64> {
        select_rows(&self.zhat, rows)
    }

    /// Concatenated `[x | zhat]` design rows for linear models.
    pub fn design_rows(&self, rows: &[usize]) -> Array2<f64> {
        let (px, pz) = (self.x.ncols(), self.zhat.ncols());
        let mut d = Array2::zeros((rows.len(), px + pz));
        for (r, &i) in rows.iter().enumerate() {
            for c in 0..px {
                d[[r, c]] = self.x[[i, c]];
            }
            for c in 0..pz {
                d[[r, px + c]] = self.zhat[[i, c]];
            }
        }
        d
    }

    /// Real responses at the given rows.
    pub fn real_y_rows(&self, rows: &[usize]) -> Result<Vec<f64>> {
        let y = self.y.as_real()?;
        Ok(rows.iter().map(|&i| y[i]).collect())
    }

    /// Label indices at the given rows.
    pub fn label_rows(&self, rows: &[usize]) -> Result<Vec<usize>> {
        let (labels, _) = self.y.as_categorical()?;
        Ok(rows.iter().map(|&i| labels[i]).collect())
    }
}

fn select_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), m.ncols()), |(r, c)| m[[rows[r], c]])
}

/// Write `bytes` to `path` atomically: the content lands under a temporary
/// name in the same directory and is renamed into place, so a crash or
/// failure can never leave a partially written file at `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let base = path
        .file_name()
        .ok_or_else(|| Error::Parameter(format!("invalid output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", base.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ResponseMeta {
    Real,
    Categorical { classes: Vec<String> },
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetMeta {
    format: u32,
    num_nodes: usize,
    x_names: Vec<String>,
    zhat_names: Vec<String>,
    response: ResponseMeta,
}

/// Persist a dataset as a directory: `graph.tsv` (edge list), `nodes.csv`
/// (covariates and response), `meta.json`, and `splits.json`. All files are
/// written atomically; floats use shortest round-trip formatting so a
/// reload is bit-identical.
pub fn save_dataset(ds: &NodeDataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    fs::create_dir_all(dir)?;

    let mut edge_bytes = Vec::new();
    ds.graph.write_edge_list(&mut edge_bytes)?;
    atomic_write(&dir.join("graph.tsv"), &edge_bytes)?;

    let meta = DatasetMeta {
        format: 1,
        num_nodes: ds.num_nodes(),
        x_names: ds.x_names.clone(),
        zhat_names: ds.zhat_names.clone(),
        response: match &ds.y {
            Response::Real(_) => ResponseMeta::Real,
            Response::Categorical { classes, .. } => {
                ResponseMeta::Categorical { classes: classes.clone() }
            }
        },
    };
    let meta_bytes = serde_json::to_vec_pretty(&meta)
        .map_err(|e| Error::Config(format!("meta serialization: {e}")))?;
    atomic_write(&dir.join("meta.json"), &meta_bytes)?;

    let splits_bytes = serde_json::to_vec_pretty(&ds.splits)
        .map_err(|e| Error::Config(format!("splits serialization: {e}")))?;
    atomic_write(&dir.join("splits.json"), &splits_bytes)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = ds
        .x_names
        .iter()
        .chain(&ds.zhat_names)
        .cloned()
        .chain(std::iter::once("y".to_string()))
        .collect();
    w.write_record(&header)
        .map_err(|e| Error::Config(format!("nodes.csv: {e}")))?;
    for i in 0..ds.num_nodes() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        for c in 0..ds.x.ncols() {
            rec.push(format!("{:?}", ds.x[[i, c]]));
        }
        for c in 0..ds.zhat.ncols() {
            rec.push(format!("{:?}", ds.zhat[[i, c]]));
        }
        rec.push(match &ds.y {
            Response::Real(v) => format!("{:?}", v[i]),
            Response::Categorical { labels, classes } => classes[labels[i]].clone(),
        });
        w.write_record(&rec)
            .map_err(|e| Error::Config(format!("nodes.csv: {e}")))?;
    }
    let node_bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("nodes.csv: {e}")))?;
    atomic_write(&dir.join("nodes.csv"), &node_bytes)?;
    Ok(())
}

/// Load a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<NodeDataset> {
    let meta_bytes = fs::read(dir.join("meta.json"))?;
    let meta: DatasetMeta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| Error::Config(format!("meta.json: {e}")))?;
    if meta.format != 1 {
        return Err(Error::Config(format!("unsupported dataset format {}", meta.format)));
    }
    let n = meta.num_nodes;

    let graph_file = fs::File::open(dir.join("graph.tsv"))?;
    let graph = Graph::read_edge_list(BufReader::new(graph_file), Some(n))?;

    let splits_bytes = fs::read(dir.join("splits.json"))?;
    let splits: Splits = serde_json::from_slice(&splits_bytes)
        .map_err(|e| Error::Config(format!("splits.json: {e}")))?;

    let px = meta.x_names.len();
    let pz = meta.zhat_names.len();
    let mut rdr = csv::Reader::from_path(dir.join("nodes.csv"))
        .map_err(|e| Error::Config(format!("nodes.csv: {e}")))?;
    let mut x = Array2::zeros((n, px));
    let mut zhat = Array2::zeros((n, pz));
    let mut y_real: Vec<f64> = Vec::new();
    let mut y_labels: Vec<usize> = Vec::new();
    let class_index: HashMap<&str, usize> = match &meta.response {
        ResponseMeta::Real => HashMap::new(),
        ResponseMeta::Categorical { classes } => {
            classes.iter().enumerate().map(|(k, c)| (c.as_str(), k)).collect()
        }
    };
    let mut count = 0usize;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            line: row + 2, // header is line 1
            msg: format!("nodes.csv: {e}"),
        })?;
        if row >= n {
            return Err(Error::Parse {
                line: row + 2,
                msg: format!("nodes.csv has more rows than the declared {n} nodes"),
            });
        }
        if rec.len() != px + pz + 1 {
            return Err(Error::Parse {
                line: row + 2,
                msg: format!("expected {} fields, got {}", px + pz + 1, rec.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: row + 2,
                msg: format!("invalid {what} value {s:?}"),
            })
        };
        for c in 0..px {
            x[[row, c]] = parse(&rec[c], "covariate")?;
        }
        for c in 0..pz {
            zhat[[row, c]] = parse(&rec[px + c], "network covariate")?;
        }
        let ystr = &rec[px + pz];
        match &meta.response {
            ResponseMeta::Real => y_real.push(parse(ystr, "response")?),
            ResponseMeta::Categorical { .. } => match class_index.get(ystr) {
                Some(&k) => y_labels.push(k),
                None => {
                    return Err(Error::Parse {
                        line: row + 2,
                        msg: format!("label {ystr:?} not in the recorded alphabet"),
                    })
                }
            },
        }
        count += 1;
    }
    if count != n {
        return Err(Error::Config(format!(
            "nodes.csv has {count} rows but meta declares {n} nodes"
        )));
    }
    let y = match meta.response {
        ResponseMeta::Real => Response::Real(y_real),
        ResponseMeta::Categorical { classes } => {
            Response::Categorical { labels: y_labels, classes }
        }
    };
    let mut ds = NodeDataset::new(graph, x, meta.x_names, y)?;
    ds.set_network_covariates(zhat, meta.zhat_names)?;
    ds.set_splits(splits)?;
    Ok(ds)
}

/// Read a dense numeric matrix from CSV with a header row.
pub fn read_named_matrix_csv(reader: impl std::io::Read) -> Result<(Array2<f64>, Vec<String>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, msg: format!("header: {e}") })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    let p = names.len();
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { line: idx + 2, msg: e.to_string() })?;
        if rec.len() != p {
            return Err(Error::Parse {
                line: idx + 2,
                msg: format!("expected {p} fields, got {}", rec.len()),
            });
        }
        for s in rec.iter() {
            values.push(s.parse().map_err(|_| Error::Parse {
                line: idx + 2,
                msg: format!("invalid number {s:?}"),
            })?);
        }
        rows += 1;
    }
    let m = Array2::from_shape_vec((rows, p), values)
        .map_err(|e| Error::Parameter(format!("matrix shape: {e}")))?;
    Ok((m, names))
}

/// Write a dense numeric matrix as CSV with a header row (shortest
/// round-trip float formatting).
pub fn write_named_matrix_csv(
    out: &mut impl Write,
    m: &Array2<f64>,
    names: &[String],
) -> Result<()> {
    if names.len() != m.ncols() {
        return Err(Error::Parameter("column name count mismatch".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(names)
        .map_err(|e| Error::Config(format!("matrix csv: {e}")))?;
    for i in 0..m.nrows() {
        let rec: Vec<String> = (0..m.ncols()).map(|c| format!("{:?}", m[[i, c]])).collect();
        w.write_record(&rec)
            .map_err(|e| Error::Config(format!("matrix csv: {e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Counters from citation-corpus ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoraStats {
    pub nodes: usize,
    pub edges: usize,
    /// Cite rows whose endpoints were not in the content file.
    pub skipped_unknown: usize,
    /// Self-citations dropped.
    pub dropped_self: usize,
    /// Duplicate (symmetrized) edges collapsed.
    pub dropped_duplicate: usize,
}

/// Load a citation corpus: a content file with rows
/// `id<TAB>w₁…w_m<TAB>label` and a cites file with rows `cited<TAB>citing`.
///
/// Nodes are indexed by first appearance in the content file; citations are
/// symmetrized and deduplicated, self-citations dropped, and rows naming
/// unknown ids skipped (counted in the stats). The response is the binary
/// indicator of `target_class` (class 1) against everything else (class 0).
pub fn load_cora_format(
    content_path: &Path,
    cites_path: &Path,
    target_class: &str,
) -> Result<(NodeDataset, CoraStats)> {
    let content = fs::File::open(content_path)?;
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut words: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in BufReader::new(content).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected id, word indicators, and label; got {} fields", fields.len()),
            });
        }
        let id = fields[0].trim().to_string();
        let label = fields[fields.len() - 1].trim();
        let row_words = &fields[1..fields.len() - 1];
        match width {
            None => width = Some(row_words.len()),
            Some(w) if w != row_words.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {w} word indicators, got {}", row_words.len()),
                });
            }
            _ => {}
        }
        let next = id_index.len();
        if id_index.insert(id.clone(), next).is_some() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate node id {id:?}"),
            });
        }
        for s in row_words {
            words.push(s.trim().parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid word indicator {s:?}"),
            })?);
        }
        labels.push(if label == target_class { 1 } else { 0 });
    }
    let n = id_index.len();
    if n == 0 {
        return Err(Error::Degenerate("content file has no rows".into()));
    }
    let m = width.unwrap_or(0);
    let x = Array2::from_shape_vec((n, m), words)
        .map_err(|e| Error::Parameter(format!("word matrix shape: {e}")))?;

    let mut stats = CoraStats { nodes: n, ..CoraStats::default() };
    let cites = fs::File::open(cites_path)?;
    let mut seen = std::collections::HashSet::new();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (idx, line) in BufReader::new(cites).lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected `cited<TAB>citing`, got {} fields", fields.len()),
            });
        }
        let (a, b) = (fields[0].trim(), fields[1].trim());
        let (ia, ib) = match (id_index.get(a), id_index.get(b)) {
            (Some(&ia), Some(&ib)) => (ia, ib),
            _ => {
                stats.skipped_unknown += 1;
                continue;
            }
        };
        if ia == ib {
            stats.dropped_self += 1;
            continue;
        }
        let key = (ia.min(ib), ia.max(ib));
        if seen.insert(key) {
            edges.push((key.0, key.1, 1.0));
        } else {
            stats.dropped_duplicate += 1;
        }
    }
    stats.edges = edges.len();
    let graph = Graph::from_edges(n, &edges)?;
    let x_names: Vec<String> = (0..m).map(|k| format!("w{k}")).collect();
    let classes = vec!["other".to_string(), target_class.to_string()];
    let ds = NodeDataset::new(graph, x, x_names, Response::Categorical { labels, classes })?;
    Ok((ds, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn splits_fractions_sizes_and_determinism() {
        let s = make_splits(
            10,
            &SplitSpec::Fractions { train: 0.5, calibration: 0.5, test: 0.0 },
            &mut rng(),
        )
        .unwrap();
        assert_eq!((s.train.len(), s.calibration.len(), s.test.len()), (5, 5, 0));
        let mut all: Vec<usize> = s.train.iter().chain(&s.calibration).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());

        let s2 = make_splits(
            10,
            &SplitSpec::Fractions { train: 0.5, calibration: 0.5, test: 0.0 },
            &mut rng(),
        )
        .unwrap();
        assert_eq!(s, s2);

        assert!(make_splits(
            4,
            &SplitSpec::Counts { train: 3, calibration: 2, test: 0 },
            &mut rng()
        )
        .is_err());
    }

    fn sample_dataset() -> NodeDataset {
        // 5 nodes, one isolated, one weighted edge.
        let graph = Graph::from_edges(
            5,
            &[(0, 1, 1.0), (1, 2, 0.25), (0, 3, 1.0)],
        )
        .unwrap();
        let x = array![
            [0.1, -1.5],
            [2.25, 0.0],
            [std::f64::consts::PI, 3.5],
            [-0.75, 1.0 / 3.0],
            [1e-12, 9.0],
        ];
        let mut ds = NodeDataset::new(
            graph,
            x,
            vec!["age".into(), "income".into()],
            Response::Real(vec![1.5, -2.25, 0.1 + 0.2, 4.0, 0.0]),
        )
        .unwrap();
        ds.set_network_covariates(
            array![[0.5], [0.25], [0.125], [1.0 / 7.0], [0.0]],
            vec!["ase_u0".into()],
        )
        .unwrap();
        ds.set_splits(Splits { train: vec![0, 1], calibration: vec![2, 3], test: vec![4] })
            .unwrap();
        ds
    }

    #[test]
    fn dataset_round_trip_is_bit_identical() {
        let ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();

        assert_eq!(ds.graph.to_dense(), back.graph.to_dense());
        assert_eq!(ds.x, back.x);
        assert_eq!(ds.zhat, back.zhat);
        assert_eq!(ds.x_names, back.x_names);
        assert_eq!(ds.zhat_names, back.zhat_names);
        assert_eq!(ds.y, back.y);
        assert_eq!(ds.splits, back.splits);
    }

    #[test]
    fn categorical_round_trip_preserves_alphabet() {
        let graph = Graph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        let ds = NodeDataset::new(
            graph,
            Array2::zeros((3, 1)),
            vec!["f".into()],
            Response::Categorical {
                labels: vec![1, 0, 1],
                classes: vec!["other".into(), "target, with comma".into()],
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.y, back.y);
    }

    #[test]
    fn dataset_validation_rejects_bad_shapes_and_splits() {
        let graph = Graph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(NodeDataset::new(
            graph.clone(),
            Array2::zeros((2, 1)),
            vec!["f".into()],
            Response::Real(vec![0.0; 3]),
        )
        .is_err());

        let mut ds = NodeDataset::new(
            graph,
            Array2::zeros((3, 1)),
            vec!["f".into()],
            Response::Real(vec![0.0; 3]),
        )
        .unwrap();
        // Overlapping splits rejected.
        assert!(ds
            .set_splits(Splits { train: vec![0, 1], calibration: vec![1], test: vec![] })
            .is_err());
        // Out-of-range index rejected.
        assert!(ds
            .set_splits(Splits { train: vec![5], calibration: vec![], test: vec![] })
            .is_err());
        // Label outside alphabet rejected.
        assert!(Response::Categorical { labels: vec![2], classes: vec!["a".into(), "b".into()] }
            .validate()
            .is_err());
    }

    #[test]
    fn atomic_write_fault_leaves_no_partial_file() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.csv");
        atomic_write(&target, b"first").unwrap();
        assert_eq!(fs::read(&target).unwrap(), b"first");

        // Fault injection: make the rename step fail by occupying the target
        // path with a non-empty directory.
        let blocked = dir.path().join("blocked");
        fs::create_dir(&blocked).unwrap();
        fs::write(blocked.join("occupant"), b"x").unwrap();
        assert!(atomic_write(&blocked, b"second").is_err());
        // The directory is untouched and no temp file lingers.
        assert!(blocked.is_dir());
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|name| name.contains("tmp"))
            .collect();
        assert!(leftovers.is_empty(), "leftover temp files: {leftovers:?}");
    }

    fn write_fixture(dir: &Path, content: &str, cites: &str) -> (std::path::PathBuf, std::path::PathBuf) {
        let cp = dir.join("corpus.content");
        let ci = dir.join("corpus.cites");
        fs::write(&cp, content).unwrap();
        fs::write(&ci, cites).unwrap();
        (cp, ci)
    }

    #[test]
    fn citation_loader_builds_symmetric_deduplicated_graph() {
        let dir = tempfile::tempdir().unwrap();
        let (cp, ci) = write_fixture(
            dir.path(),
            "paper_a\t1\t0\t1\tNeural_Networks\n\
             paper_b\t0\t1\t0\tTheory\n\
             paper_c\t1\t1\t0\tNeural_Networks\n",
            "paper_a\tpaper_b\n\
             paper_b\tpaper_a\n\
             paper_b\tpaper_c\n\
             paper_c\tpaper_c\n\
             paper_x\tpaper_a\n",
        );
        let (ds, stats) = load_cora_format(&cp, &ci, "Neural_Networks").unwrap();
        assert_eq!(ds.num_nodes(), 3);
        assert_eq!(stats.edges, 2);
        assert_eq!(stats.skipped_unknown, 1);
        assert_eq!(stats.dropped_self, 1);
        assert_eq!(stats.dropped_duplicate, 1);
        // Node order follows first appearance; edges are symmetric.
        assert!(ds.graph.has_edge(0, 1) && ds.graph.has_edge(1, 0));
        assert!(ds.graph.has_edge(1, 2) && !ds.graph.has_edge(0, 2));
        assert_eq!(ds.x.nrows(), 3);
        assert_eq!(ds.x.ncols(), 3);
        assert_eq!(ds.x[[2, 0]], 1.0);
        let (labels, classes) = ds.y.as_categorical().unwrap();
        assert_eq!(labels, &[1, 0, 1]);
        assert_eq!(classes, &["other".to_string(), "Neural_Networks".to_string()]);
    }

    #[test]
    fn citation_loader_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let (cp, ci) = write_fixture(
            dir.path(),
            "a\t1\t0\tT\nb\t1\tT\n", // second row has too few word columns
            "",
        );
        match load_cora_format(&cp, &ci, "T") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let (cp, ci) = write_fixture(dir.path(), "a\t1\tT\na\t0\tT\n", "");
        match load_cora_format(&cp, &ci, "T") {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("duplicate"));
            }
            other => panic!("expected duplicate-id error, got {other:?}"),
        }
    }

    #[test]
    fn matrix_csv_round_trips() {
        let m = array![[1.5, -0.25], [std::f64::consts::E, 1e-300]];
        let names = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_named_matrix_csv(&mut buf, &m, &names).unwrap();
        let (back, back_names) = read_named_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(m, back);
        assert_eq!(names, back_names);
    }
}
