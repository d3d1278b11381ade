//! End-to-end citation-corpus pipeline: ingest, extract, classify.
//!
//! Builds a small synthetic corpus in Cora's on-disk format — a `.content`
//! file of `id<TAB>word indicators<TAB>label` rows and a `.cites` file of
//! `cited<TAB>citing` pairs — then runs the full pipeline the CLI wires
//! together: symmetrized ingestion with dropped-row accounting, PCA
//! compression of the word matrix, network-covariate extraction (degree and
//! the training-split average of neighbor labels — safe to attach anywhere
//! because it never reads calibration or test responses), and conformal
//! label sets at level α = 0.1.

use std::fmt::Write as _;
use std::fs;

use netconform::conformal::{split_conformal, ModelRecipe, ScoreSpec};
use netconform::covariates::{apply_covariate_spec, CovariateSpec, Extractor, Fallback, SplitContext};
use netconform::data::{load_cora_format, make_splits, SplitSpec};
use netconform::regress::pca_top_k;
use netconform::{Purpose, Result, RngStream};
use rand::Rng;

const TARGET: &str = "genetic_algorithms";
const OTHER: &str = "theory";

/// Write a corpus with class-correlated words and homophilous citations,
/// plus one unknown-id row, one self-citation, and one duplicate so the
/// ingestion counters have something to count.
fn write_corpus(dir: &std::path::Path, stream: &RngStream) -> Result<(std::path::PathBuf, std::path::PathBuf)> {
    let n = 150;
    let mut rng = stream.rng(Purpose::Covariates);
    let mut content = String::new();
    let classes: Vec<usize> = (0..n).map(|i| i % 2).collect();
    for (i, &c) in classes.iter().enumerate() {
        write!(content, "paper{i}").unwrap();
        for w in 0..10 {
            let p = if (w < 5) == (c == 1) { 0.5 } else { 0.04 };
            write!(content, "\t{}", u8::from(rng.random::<f64>() < p)).unwrap();
        }
        content.push('\t');
        content.push_str(if c == 1 { TARGET } else { OTHER });
        content.push('\n');
    }

    let mut rng = stream.rng(Purpose::EdgeNoise);
    let mut cites = String::new();
    for _ in 0..700 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let p = if classes[a] == classes[b] { 0.5 } else { 0.05 };
        if a != b && rng.random::<f64>() < p {
            writeln!(cites, "paper{a}\tpaper{b}").unwrap();
        }
    }
    cites.push_str("paper0\tpaper9999\n"); // unknown id: skipped
    cites.push_str("paper3\tpaper3\n"); // self-citation: dropped
    cites.push_str("paper0\tpaper2\npaper2\tpaper0\n"); // duplicate once symmetrized

    let content_path = dir.join("papers.content");
    let cites_path = dir.join("papers.cites");
    fs::write(&content_path, content)?;
    fs::write(&cites_path, cites)?;
    Ok((content_path, cites_path))
}

fn main() -> Result<()> {
    let stream = RngStream::new(1433);
    let dir = tempfile::tempdir()?;
    let (content_path, cites_path) = write_corpus(dir.path(), &stream)?;

    let (mut ds, stats) = load_cora_format(&content_path, &cites_path, TARGET)?;
    println!(
        "ingested {} papers, {} edges (skipped {} unknown-id rows, dropped {} self / {} duplicate)",
        stats.nodes, stats.edges, stats.skipped_unknown, stats.dropped_self, stats.dropped_duplicate
    );

    let mut rng = stream.rng(Purpose::Splits);
    let splits = make_splits(
        ds.num_nodes(),
        &SplitSpec::Fractions { train: 0.4, calibration: 0.3, test: 0.3 },
        &mut rng,
    )?;
    ds.set_splits(splits)?;

    // Compress the raw word indicators before modeling, as one would with
    // Cora's 1433-word matrix.
    let (scores, _) = pca_top_k(ds.x.view(), 4)?;
    ds.x = scores;
    ds.x_names = (1..=4).map(|i| format!("pc{i}")).collect();

    let labels: Vec<f64> = match &ds.y {
        netconform::data::Response::Categorical { labels, .. } => {
            labels.iter().map(|&l| l as f64).collect()
        }
        _ => unreachable!("corpus loader produces categorical responses"),
    };
    let (zhat, names) = {
        let context = SplitContext {
            base: Some(&ds.splits.train),
            exclude: &ds.splits.test,
            response: Some(&labels),
        };
        let spec = CovariateSpec::new(vec![
            Extractor::Degree,
            Extractor::SplitResponseAverage { fallback: Fallback::GlobalMean },
        ]);
        apply_covariate_spec(&spec, &ds.graph, ds.x.view(), &context)?
    };
    println!("network covariates: {names:?}");
    ds.set_network_covariates(zhat, names)?;

    // With a binary response every calibration miss scores exactly 1, so at
    // this calibration size the deterministic threshold saturates and every
    // set keeps both labels; the randomized score smooths the atom away.
    let alpha = 0.1;
    let spec = ScoreSpec::new(ModelRecipe::ClassAdaptive { randomized: true });
    let outcome = split_conformal(&ds, &spec, alpha, &ds.splits.test, &stream)?;
    let (true_labels, classes) = ds.y.as_categorical()?;
    let mut hits = 0usize;
    let mut size = 0usize;
    for (&i, pred) in ds.splits.test.iter().zip(&outcome.predictions) {
        let set = pred.as_set().expect("classification yields sets");
        hits += usize::from(set.contains(true_labels[i]));
        size += set.len();
    }
    let m = ds.splits.test.len();
    println!(
        "label sets at alpha = {alpha}: coverage {:.3}, mean size {:.2} over {m} held-out papers",
        hits as f64 / m as f64,
        size as f64 / m as f64
    );
    for (&i, pred) in ds.splits.test.iter().zip(&outcome.predictions).take(5) {
        let set = pred.as_set().expect("classification yields sets");
        let names: Vec<&str> = (0..classes.len())
            .filter(|&c| set.contains(c))
            .map(|c| classes[c].as_str())
            .collect();
        println!("  paper{i}: true = {}, set = {names:?}", classes[true_labels[i]]);
    }
    Ok(())
}
