//! File-driven command layer behind the `netconform` binary.
//!
//! Five commands cover the pipeline end to end:
//!
//! * `simulate` — draw one dataset from a scenario configuration and save it,
//!   together with the latent per-node values the scenario hides from fitted
//!   models.
//! * `extract` — load a dataset (a saved directory or a citation corpus),
//!   append network covariates, and save the result.
//! * `conform` — split-conformal prediction intervals for a real response.
//! * `classify` — split-conformal label sets for a categorical response.
//! * `experiment` — a full Monte Carlo study: `report.csv` and `curves.csv`.
//!
//! Configs are TOML or JSON and must carry an explicit `seed`; nothing here
//! reads the clock, so rerunning a command with the same config and seed
//! writes byte-identical outputs. Every output file is staged to a temporary
//! sibling and renamed into place, and `manifest.json` — the machine-readable
//! record of the run, including its error code on failure — is written last.
//! A crash can therefore leave stale files behind, but never torn ones.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::conformal::{split_conformal, CalibrationRecord, ModelRecipe, Prediction, ScoreSpec};
use crate::covariates::{apply_covariate_spec, CovariateSpec, SplitContext};
use crate::data::{
    atomic_write, load_cora_format, load_dataset, make_splits, save_dataset,
    write_named_matrix_csv, NodeDataset, Response, SplitSpec,
};
use crate::error::{Error, Result};
use crate::experiments::{run_experiment, simulate_scenario, ExperimentConfig};
use crate::regress::pca_top_k;
use crate::rng::{Purpose, RngStream};

/// Version of the output-file layout, stamped into every manifest.
const FORMAT_VERSION: u32 = 1;

/// The five commands the binary exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Simulate,
    Extract,
    Conform,
    Experiment,
    Classify,
}

impl CommandKind {
    /// Stable name used in manifests and error messages.
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Extract => "extract",
            CommandKind::Conform => "conform",
            CommandKind::Experiment => "experiment",
            CommandKind::Classify => "classify",
        }
    }
}

/// One requested run: a command, its config file, the output directory, and
/// any command-line overrides.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub command: CommandKind,
    /// Path to a TOML or JSON config file.
    pub config: PathBuf,
    /// Output directory, created if missing.
    pub out: PathBuf,
    /// Replaces the config's `seed` when set.
    pub seed: Option<u64>,
    /// Replaces the config's `replicates` when set (experiment only).
    pub replicates: Option<usize>,
}

/// Where a command reads its dataset from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    /// A directory previously written by `simulate` or `extract`.
    Dataset { dir: PathBuf },
    /// A citation corpus: a tab-separated content file (`id`, word
    /// indicators, label) and cites file (`cited`, `citing`). The response
    /// becomes the indicator of `target_class`.
    Cora {
        content: PathBuf,
        cites: PathBuf,
        target_class: String,
    },
}

/// Configuration for `extract`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    /// Recorded in the manifest; extraction itself draws no randomness.
    pub seed: u64,
    pub input: InputSpec,
    /// Extractors to run, in order; their columns become the dataset's
    /// network-covariate block.
    pub covariates: CovariateSpec,
    /// Replace the observed covariates with their top principal components
    /// before extraction (useful for wide indicator matrices).
    #[serde(default)]
    pub pca_components: Option<usize>,
}

/// Configuration for `conform` and `classify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictConfig {
    pub seed: u64,
    pub input: InputSpec,
    /// Model recipe and jitter policy for the nonconformity score.
    pub score: ScoreSpec,
    /// Miscoverage level.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Redraw the train/calibration/test partition before running;
    /// otherwise the dataset's stored splits are used.
    #[serde(default)]
    pub splits: Option<SplitSpec>,
}

fn default_alpha() -> f64 {
    0.1
}

/// Crate and output-format versions stamped into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub netconform: String,
    pub format: u32,
}

/// Final status of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// The stable error code (see [`Error::code`]) and human-readable
    /// message of the failure.
    Error { code: String, message: String },
}

/// Machine-readable record of a run, written into the output directory last
/// so its presence with `outcome = "ok"` certifies the other files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Which command ran.
    pub command: String,
    /// Effective seed after any command-line override; absent only when the
    /// config could not be parsed.
    pub seed: Option<u64>,
    /// Echo of the effective configuration (defaults filled, overrides
    /// applied).
    pub config: Option<serde_json::Value>,
    pub versions: Versions,
    /// Non-fatal incident counters: solver failures skipped, vacuous
    /// thresholds, ingestion rows dropped.
    pub error_counts: BTreeMap<String, usize>,
    pub status: RunStatus,
}

/// Per-node predictions written by `conform` and `classify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionsFile {
    pub alpha: f64,
    /// Stable method name from the score spec.
    pub method: String,
    /// Class alphabet that set entries index into (classification only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
    /// Calibration scores and threshold behind every prediction.
    pub record: CalibrationRecord,
    pub predictions: Vec<NodePrediction>,
}

/// One held-out node and its prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePrediction {
    pub node: usize,
    pub prediction: Prediction,
}

/// Run one command end to end: parse its config, execute, write outputs
/// atomically, and leave a `manifest.json` recording the outcome. The
/// manifest is written on failure too, carrying the error's stable code, and
/// the error is returned so callers can exit nonzero.
pub fn run_command(spec: &RunSpec) -> Result<()> {
    fs::create_dir_all(&spec.out)?;
    let mut manifest = RunManifest {
        command: spec.command.name().to_string(),
        seed: None,
        config: None,
        versions: Versions {
            netconform: env!("CARGO_PKG_VERSION").to_string(),
            format: FORMAT_VERSION,
        },
        error_counts: BTreeMap::new(),
        status: RunStatus::Ok,
    };
    let result = execute(spec, &mut manifest);
    if let Err(e) = &result {
        manifest.status = RunStatus::Error {
            code: e.code().to_string(),
            message: e.to_string(),
        };
    }
    atomic_write(&spec.out.join("manifest.json"), &to_json_bytes(&manifest)?)?;
    result
}

fn execute(spec: &RunSpec, manifest: &mut RunManifest) -> Result<()> {
    if spec.replicates.is_some() && spec.command != CommandKind::Experiment {
        return Err(Error::Config(format!(
            "--replicates applies only to the experiment command, not {}",
            spec.command.name()
        )));
    }
    match spec.command {
        CommandKind::Simulate => {
            let cfg = experiment_config(spec, manifest)?;
            run_simulate(&cfg, &spec.out)
        }
        CommandKind::Experiment => {
            let cfg = experiment_config(spec, manifest)?;
            run_study(&cfg, &spec.out, manifest)
        }
        CommandKind::Extract => {
            let mut cfg: ExtractConfig = parse_config(&spec.config)?;
            if let Some(s) = spec.seed {
                cfg.seed = s;
            }
            note_config(manifest, cfg.seed, &cfg)?;
            run_extract(&cfg, &spec.out, manifest)
        }
        CommandKind::Conform => {
            let cfg = predict_config(spec, manifest)?;
            run_predict(&cfg, false, &spec.out, manifest)
        }
        CommandKind::Classify => {
            let cfg = predict_config(spec, manifest)?;
            run_predict(&cfg, true, &spec.out, manifest)
        }
    }
}

fn experiment_config(spec: &RunSpec, manifest: &mut RunManifest) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = parse_config(&spec.config)?;
    if let Some(s) = spec.seed {
        cfg.seed = s;
    }
    if let Some(r) = spec.replicates {
        cfg.replicates = r;
    }
    note_config(manifest, cfg.seed, &cfg)?;
    Ok(cfg)
}

fn predict_config(spec: &RunSpec, manifest: &mut RunManifest) -> Result<PredictConfig> {
    let mut cfg: PredictConfig = parse_config(&spec.config)?;
    if let Some(s) = spec.seed {
        cfg.seed = s;
    }
    note_config(manifest, cfg.seed, &cfg)?;
    Ok(cfg)
}

fn note_config<T: Serialize>(manifest: &mut RunManifest, seed: u64, cfg: &T) -> Result<()> {
    manifest.seed = Some(seed);
    manifest.config = Some(
        serde_json::to_value(cfg).map_err(|e| Error::Config(format!("config echo: {e}")))?,
    );
    Ok(())
}

/// Parse a config file, dispatching on extension; files with any other
/// extension are tried as TOML first, then JSON.
fn parse_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let from_toml = |t: &str| toml::from_str::<T>(t);
    let from_json = |t: &str| serde_json::from_str::<T>(t);
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => {
            from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        Some("json") => {
            from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        _ => from_toml(&text).or_else(|te| {
            from_json(&text).map_err(|je| {
                Error::Config(format!(
                    "{} parses as neither TOML ({te}) nor JSON ({je})",
                    path.display()
                ))
            })
        }),
    }
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Config(format!("serializing output: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Serialize rows to CSV with an explicit header, so an empty table still
/// round-trips as a header-only file.
fn csv_bytes<T: Serialize>(header: &[&str], rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    for row in rows {
        w.serialize(row)
            .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))
}

fn load_input(input: &InputSpec, errors: &mut BTreeMap<String, usize>) -> Result<NodeDataset> {
    match input {
        InputSpec::Dataset { dir } => load_dataset(dir),
        InputSpec::Cora {
            content,
            cites,
            target_class,
        } => {
            let (ds, stats) = load_cora_format(content, cites, target_class)?;
            for (key, count) in [
                ("ingest_skipped_unknown", stats.skipped_unknown),
                ("ingest_dropped_self", stats.dropped_self),
                ("ingest_dropped_duplicate", stats.dropped_duplicate),
            ] {
                if count > 0 {
                    errors.insert(key.to_string(), count);
                }
            }
            Ok(ds)
        }
    }
}

/// `simulate`: one realization of the configured scenario — the draw that
/// the first replicate of the first sparsity cell would make — saved as a
/// dataset directory plus `latent.csv`.
fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let sim = simulate_scenario(cfg, 0, 0)?;
    save_dataset(&sim.dataset, out)?;
    let lat = Array2::from_shape_vec((sim.latent.len(), 1), sim.latent.clone())
        .map_err(|e| Error::Parameter(format!("latent column: {e}")))?;
    let mut bytes = Vec::new();
    write_named_matrix_csv(&mut bytes, &lat, &["latent".to_string()])?;
    atomic_write(&out.join("latent.csv"), &bytes)
}

/// `extract`: append network covariates to a dataset and save the result.
///
/// Split-aware extractors see the stored training split as their base set
/// and the stored test split as held out; response-based extractors receive
/// the real response, or label indices cast to float for categorical data
/// (the indicator of the target class for two-class corpora).
fn run_extract(cfg: &ExtractConfig, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let mut ds = load_input(&cfg.input, &mut manifest.error_counts)?;
    if let Some(k) = cfg.pca_components {
        let (scores, _loadings) = pca_top_k(ds.x.view(), k)?;
        ds.x = scores;
        ds.x_names = (1..=k).map(|i| format!("pc{i}")).collect();
        ds.validate()?;
    }
    let response: Option<Vec<f64>> = match &ds.y {
        Response::Real(v) => Some(v.clone()),
        Response::Categorical { labels, .. } => {
            Some(labels.iter().map(|&l| l as f64).collect())
        }
    };
    let (zhat, names) = {
        let context = SplitContext {
            base: (!ds.splits.train.is_empty()).then_some(ds.splits.train.as_slice()),
            exclude: &ds.splits.test,
            response: response.as_deref(),
        };
        apply_covariate_spec(&cfg.covariates, &ds.graph, ds.x.view(), &context)?
    };
    ds.set_network_covariates(zhat, names)?;
    save_dataset(&ds, out)
}

/// `conform` and `classify`: calibrate the configured score and predict at
/// every test node, writing `predictions.json`.
fn run_predict(
    cfg: &PredictConfig,
    classify: bool,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<()> {
    let mut ds = load_input(&cfg.input, &mut manifest.error_counts)?;
    if let Some(split_spec) = &cfg.splits {
        let stream = RngStream::new(cfg.seed);
        let mut rng = stream.rng(Purpose::Splits);
        let splits = make_splits(ds.num_nodes(), split_spec, &mut rng)?;
        ds.set_splits(splits)?;
    }
    let classes = match (&ds.y, classify) {
        (Response::Real(_), false) => None,
        (Response::Categorical { classes, .. }, true) => Some(classes.clone()),
        (Response::Real(_), true) => {
            return Err(Error::Config(
                "classify needs a categorical response, but this dataset's is real-valued; use conform".into(),
            ))
        }
        (Response::Categorical { .. }, false) => {
            return Err(Error::Config(
                "conform needs a real-valued response, but this dataset's is categorical; use classify".into(),
            ))
        }
    };
    let class_recipe = matches!(cfg.score.recipe, ModelRecipe::ClassAdaptive { .. });
    if classify && !class_recipe {
        return Err(Error::Config(format!(
            "classify requires the class_adaptive method, not {}",
            cfg.score.recipe.method_name()
        )));
    }
    if !classify && class_recipe {
        return Err(Error::Config(
            "class_adaptive builds label sets; use classify".into(),
        ));
    }
    let stream = RngStream::new(cfg.seed);
    let outcome = split_conformal(&ds, &cfg.score, cfg.alpha, &ds.splits.test, &stream)?;
    let file = PredictionsFile {
        alpha: cfg.alpha,
        method: cfg.score.recipe.method_name().to_string(),
        classes,
        record: outcome.record,
        predictions: ds
            .splits
            .test
            .iter()
            .copied()
            .zip(outcome.predictions)
            .map(|(node, prediction)| NodePrediction { node, prediction })
            .collect(),
    };
    atomic_write(&out.join("predictions.json"), &to_json_bytes(&file)?)
}

/// `experiment`: run the configured Monte Carlo study and write its
/// coverage table and conditional-coverage curves.
fn run_study(cfg: &ExperimentConfig, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let outcome = run_experiment(cfg)?;
    manifest.error_counts.extend(
        outcome
            .error_counts
            .iter()
            .map(|(k, v)| (k.clone(), *v)),
    );
    let report = csv_bytes(
        &["method", "cell", "coverage", "ci_lo", "ci_hi", "mean_width", "replicates"],
        &outcome.reports,
    )?;
    atomic_write(&out.join("report.csv"), &report)?;
    let curves = csv_bytes(&["method", "z", "coverage_smooth"], &outcome.curves)?;
    atomic_write(&out.join("curves.csv"), &curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Splits;
    use crate::Graph;

    fn write(path: &Path, text: &str) {
        fs::write(path, text).unwrap();
    }

    fn read_manifest(dir: &Path) -> RunManifest {
        let bytes = fs::read(dir.join("manifest.json")).unwrap();
        serde_json::from_slice(&bytes).unwrap()
    }

    #[test]
    fn config_parses_from_toml_json_and_unknown_extensions() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        write(
            &toml_path,
            "seed = 9\nalpha = 0.2\n[input.dataset]\ndir = \"d\"\n[score]\nmethod = \"resid_linear\"\n",
        );
        let from_toml: PredictConfig = parse_config(&toml_path).unwrap();
        assert_eq!(from_toml.alpha, 0.2);
        assert_eq!(from_toml.seed, 9);
        assert!(from_toml.splits.is_none());

        let json_path = dir.path().join("run.json");
        write(
            &json_path,
            r#"{"seed": 9, "alpha": 0.2, "input": {"dataset": {"dir": "d"}}, "score": {"method": "resid_linear"}}"#,
        );
        let from_json: PredictConfig = parse_config(&json_path).unwrap();
        assert_eq!(from_json, from_toml);

        let bare_path = dir.path().join("run.cfg");
        write(
            &bare_path,
            r#"{"seed": 9, "alpha": 0.2, "input": {"dataset": {"dir": "d"}}, "score": {"method": "resid_linear"}}"#,
        );
        let from_bare: PredictConfig = parse_config(&bare_path).unwrap();
        assert_eq!(from_bare, from_toml);

        write(&bare_path, "not a config at all {{{");
        let err = parse_config::<PredictConfig>(&bare_path).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
        assert!(err.to_string().contains("neither TOML"));
    }

    #[test]
    fn unknown_fields_and_missing_seed_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        write(
            &path,
            "seed = 1\nbogus = true\n[input.dataset]\ndir = \"d\"\n[score]\nmethod = \"resid_linear\"\n",
        );
        assert!(parse_config::<PredictConfig>(&path).is_err());
        write(
            &path,
            "[input.dataset]\ndir = \"d\"\n[score]\nmethod = \"resid_linear\"\n",
        );
        assert!(parse_config::<PredictConfig>(&path).is_err());
    }

    #[test]
    fn replicates_override_is_experiment_only() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("sim.toml");
        write(&config, "scenario = \"rdpg_linear\"\nseed = 3\nn = 12\n");
        let spec = RunSpec {
            command: CommandKind::Simulate,
            config,
            out: dir.path().join("out"),
            seed: None,
            replicates: Some(4),
        };
        let err = run_command(&spec).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
        let manifest = read_manifest(&spec.out);
        match manifest.status {
            RunStatus::Error { code, message } => {
                assert_eq!(code, "config");
                assert!(message.contains("experiment"));
            }
            RunStatus::Ok => panic!("expected error status"),
        }
    }

    #[test]
    fn failed_runs_still_leave_a_manifest_with_the_error_code() {
        let dir = tempfile::tempdir().unwrap();
        let spec = RunSpec {
            command: CommandKind::Experiment,
            config: dir.path().join("missing.toml"),
            out: dir.path().join("out"),
            seed: None,
            replicates: None,
        };
        let err = run_command(&spec).unwrap_err();
        assert_eq!(err.code(), "io");
        let manifest = read_manifest(&spec.out);
        assert_eq!(manifest.command, "experiment");
        assert_eq!(manifest.seed, None);
        assert!(manifest.config.is_none());
        match manifest.status {
            RunStatus::Error { code, .. } => assert_eq!(code, "io"),
            RunStatus::Ok => panic!("expected error status"),
        }
    }

    #[test]
    fn simulate_writes_a_loadable_dataset_and_echoes_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("sim.toml");
        write(
            &config,
            "scenario = \"rdpg_linear\"\nseed = 3\nn = 12\nsparsity_exponent = 0.25\n",
        );
        let out = dir.path().join("out");
        let spec = RunSpec {
            command: CommandKind::Simulate,
            config,
            out: out.clone(),
            seed: Some(11),
            replicates: None,
        };
        run_command(&spec).unwrap();
        let manifest = read_manifest(&out);
        assert_eq!(manifest.status, RunStatus::Ok);
        assert_eq!(manifest.seed, Some(11));
        assert_eq!(manifest.config.unwrap()["seed"], serde_json::json!(11));

        let ds = load_dataset(&out).unwrap();
        assert_eq!(ds.num_nodes(), 25);
        assert_eq!(ds.splits.train.len(), 12);
        let latent = fs::read_to_string(out.join("latent.csv")).unwrap();
        assert_eq!(latent.lines().count(), 26);
        assert_eq!(latent.lines().next(), Some("latent"));

        let cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
            "scenario": "rdpg_linear", "seed": 11, "n": 12, "sparsity_exponent": 0.25
        }))
        .unwrap();
        let sim = simulate_scenario(&cfg, 0, 0).unwrap();
        assert_eq!(sim.dataset.y, ds.y);
    }

    #[test]
    fn predict_rejects_mismatched_response_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let graph = Graph::from_edges(6, &[(0, 1, 1.0), (2, 3, 1.0), (4, 5, 1.0)]).unwrap();
        let x = Array2::from_shape_fn((6, 1), |(i, _)| i as f64);
        let mut ds = NodeDataset::new(
            graph,
            x,
            vec!["x1".into()],
            Response::Real((0..6).map(|i| i as f64).collect()),
        )
        .unwrap();
        ds.set_splits(Splits {
            train: vec![0, 1, 2],
            calibration: vec![3, 4],
            test: vec![5],
        })
        .unwrap();
        let data_dir = dir.path().join("data");
        save_dataset(&ds, &data_dir).unwrap();

        let config = dir.path().join("run.toml");
        write(
            &config,
            &format!(
                "seed = 5\n[input.dataset]\ndir = {:?}\n[score]\nmethod = \"class_adaptive\"\n",
                data_dir
            ),
        );
        let spec = RunSpec {
            command: CommandKind::Classify,
            config: config.clone(),
            out: dir.path().join("out"),
            seed: None,
            replicates: None,
        };
        let err = run_command(&spec).unwrap_err();
        assert_eq!(err.code(), "config");
        assert!(err.to_string().contains("use conform"));

        let spec = RunSpec {
            command: CommandKind::Conform,
            config,
            out: dir.path().join("out2"),
            seed: None,
            replicates: None,
        };
        let err = run_command(&spec).unwrap_err();
        assert_eq!(err.code(), "config");
        assert!(err.to_string().contains("use classify"));
    }

    #[test]
    fn empty_tables_round_trip_as_header_only_csv() {
        let rows: Vec<crate::experiments::CurvePoint> = Vec::new();
        let bytes = csv_bytes(&["method", "z", "coverage_smooth"], &rows).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "method,z,coverage_smooth\n");
    }
}
