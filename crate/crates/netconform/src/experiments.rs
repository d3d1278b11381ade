//! Monte Carlo coverage experiments for network-assisted conformal prediction.
//!
//! Four synthetic data-generating processes exercise the full pipeline —
//! graph sampling, covariate extraction, model fitting, and split-conformal
//! calibration — and report marginal coverage, exact binomial confidence
//! intervals, and mean interval width (or mean set size) per experimental
//! cell:
//!
//! * `rdpg_linear` — a linear response on rank-3 latent positions of the
//!   `min(x, y)` graphon, observed only through adjacency spectral embeddings
//!   of a random dot product graph with mean matrix `ν_n Z Zᵀ`; conformal
//!   intervals are compared with parametric normal intervals on the same
//!   design.
//! * `sar` — a spatial autoregressive response solved on a Gaussian latent
//!   space graph over an ambient population, fit with three nested designs of
//!   increasing network awareness (own covariates; plus neighborhood
//!   averages; plus the neighbor-averaged response).
//! * `heteroscedastic` — a nonlinear response whose noise scale grows
//!   exponentially across the covariate range, contrasting CDF-distance
//!   scores with absolute-residual scores through smoothed conditional
//!   coverage curves.
//! * `synthetic_classification` — a two-block stochastic block model with
//!   block-dependent labels, producing adaptive prediction sets under three
//!   covariate sets of increasing network awareness.
//!
//! Sparsity is parameterized as `ν_n = n^{−e}` over a grid of exponents
//! `e ≥ 0`. Replicates are embarrassingly parallel: replicate `r` of cell `c`
//! draws from the dedicated stream `seed → substream(c) → substream(r)`, and
//! per-cell results are reduced in replicate order, so a fixed seed gives
//! bit-identical output regardless of thread count.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::conformal::{split_conformal, ModelRecipe, Prediction, PredictionInterval, ScoreSpec};
use crate::covariates::{
    adjacency_spectral_embedding, degrees, neighborhood_average, neighbor_weighted_response,
    split_neighborhood_average, Fallback,
};
use crate::data::{NodeDataset, Response, Splits};
use crate::error::{Error, Result};
use crate::graphgen::{
    gaussian_latent_space_probs, min_graphon_eigenpairs, rdpg_mean_matrix, sample_bernoulli_graph,
    sample_graphon_graph, sample_latent_positions, GraphonEigenpairs, GraphonSpec, SarModelSpec,
    WeightRule,
};
use crate::linalg::set_blas_threads;
use crate::regress::{fit_ols, kernel_smoother_curve, parametric_normal_interval};
use crate::rng::{Purpose, RngStream};

/// Confidence level of the exact binomial intervals attached to every
/// coverage estimate.
const CI_LEVEL: f64 = 0.95;

/// Ambient population size for the autoregressive scenario when the
/// configuration does not name one. The working sample `2n + 1` is carved out
/// of this larger coupled system (and the population is grown to `2n + 1`
/// when that is larger).
const DEFAULT_SAR_POPULATION: usize = 3000;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which data-generating process an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Linear response on latent positions, observed via spectral embeddings.
    RdpgLinear,
    /// Spatial autoregressive response on a Gaussian latent space graph.
    Sar,
    /// Nonlinear response with sharply covariate-dependent noise scale.
    Heteroscedastic,
    /// Two-block stochastic block model with label-dependent features.
    SyntheticClassification,
}

/// Covariate sets for the classification scenario, in increasing order of
/// network awareness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateSet {
    /// Node features only.
    Features,
    /// Features plus normalized degree and a rank-2 spectral embedding.
    FeaturesSpectral,
    /// Features plus the neighborhood label average computed from training
    /// nodes only.
    FeaturesLabelAvg,
}

impl CovariateSet {
    /// Stable name used in report cells.
    pub fn name(self) -> &'static str {
        match self {
            CovariateSet::Features => "features",
            CovariateSet::FeaturesSpectral => "features_spectral",
            CovariateSet::FeaturesLabelAvg => "features_label_avg",
        }
    }
}

/// Knobs specific to the autoregressive scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SarKnobs {
    /// Ambient population size; defaults to `max(3000, 2n + 1)`. The stated
    /// value is likewise grown to at least `2n + 1`.
    #[serde(default)]
    pub population: Option<usize>,
    /// Which of the three nested regression designs to fit (ids 1–3).
    #[serde(default = "default_sar_models")]
    pub models: Vec<u8>,
    /// Autoregressive coefficient on the neighbor-averaged response.
    #[serde(default = "default_sar_rho")]
    pub rho: f64,
}

fn default_sar_models() -> Vec<u8> {
    vec![1, 2, 3]
}

fn default_sar_rho() -> f64 {
    0.7
}

impl Default for SarKnobs {
    fn default() -> Self {
        SarKnobs { population: None, models: default_sar_models(), rho: default_sar_rho() }
    }
}

/// Knobs specific to the heteroscedastic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroKnobs {
    /// Held-out nodes scored per replicate; each contributes one
    /// conditional-coverage record per method.
    #[serde(default = "default_test_nodes")]
    pub test_nodes: usize,
    /// Replace the exponential noise scale by a constant 1, giving a
    /// homoscedastic control variant.
    #[serde(default)]
    pub constant_variance: bool,
    /// Bandwidth of the Gaussian smoother applied to the hit indicators;
    /// defaults to 12% of the observed covariate range.
    #[serde(default)]
    pub curve_bandwidth: Option<f64>,
    /// Number of evenly spaced grid points in the smoothed coverage curve.
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

fn default_test_nodes() -> usize {
    25
}

fn default_curve_points() -> usize {
    101
}

impl Default for HeteroKnobs {
    fn default() -> Self {
        HeteroKnobs {
            test_nodes: default_test_nodes(),
            constant_variance: false,
            curve_bandwidth: None,
            curve_points: default_curve_points(),
        }
    }
}

/// Knobs specific to the classification scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassKnobs {
    /// Distance between the two class-conditional feature means; 0 makes the
    /// features pure noise.
    #[serde(default = "default_feature_signal")]
    pub feature_signal: f64,
    /// Within-block edge probability before sparsity scaling.
    #[serde(default = "default_within_block")]
    pub within_block: f64,
    /// Between-block edge probability before sparsity scaling.
    #[serde(default = "default_between_block")]
    pub between_block: f64,
    /// Probability of label 1 in block 0 and block 1 respectively.
    #[serde(default = "default_label_probs")]
    pub label_probs: (f64, f64),
    /// Use the randomized adaptive score (exact 1−α coverage in the i.i.d.
    /// limit) instead of the conservative deterministic one.
    #[serde(default)]
    pub randomized: bool,
    /// Held-out nodes scored per replicate.
    #[serde(default = "default_test_nodes")]
    pub test_nodes: usize,
    /// Covariate sets to evaluate; each gets its own report cell.
    #[serde(default = "default_covariate_sets")]
    pub covariate_sets: Vec<CovariateSet>,
}

fn default_feature_signal() -> f64 {
    1.5
}

fn default_within_block() -> f64 {
    0.6
}

fn default_between_block() -> f64 {
    0.15
}

fn default_label_probs() -> (f64, f64) {
    (0.2, 0.8)
}

fn default_covariate_sets() -> Vec<CovariateSet> {
    vec![CovariateSet::Features, CovariateSet::FeaturesSpectral, CovariateSet::FeaturesLabelAvg]
}

impl Default for ClassKnobs {
    fn default() -> Self {
        ClassKnobs {
            feature_signal: default_feature_signal(),
            within_block: default_within_block(),
            between_block: default_between_block(),
            label_probs: default_label_probs(),
            randomized: false,
            test_nodes: default_test_nodes(),
            covariate_sets: default_covariate_sets(),
        }
    }
}

/// Full description of one experiment: scenario, scale, sparsity grid, level,
/// replication, and the seed that makes the run reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Data-generating process to simulate.
    pub scenario: Scenario,
    /// Sample scale: `n` training and `n` calibration nodes per replicate.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Sparsity exponents `e`; each spawns a cell with `ν_n = n^{−e}`. A bare
    /// scalar (also accepted under the singular alias `sparsity_exponent`)
    /// is treated as a one-element grid.
    #[serde(
        default = "default_exponents",
        alias = "sparsity_exponent",
        deserialize_with = "one_or_many"
    )]
    pub sparsity_exponents: Vec<f64>,
    /// Miscoverage level α of every prediction interval or set.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Monte Carlo replicates per cell.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Root seed; runs with equal configs and seeds are bit-identical.
    pub seed: u64,
    /// Autoregressive scenario knobs.
    #[serde(default)]
    pub sar: SarKnobs,
    /// Heteroscedastic scenario knobs.
    #[serde(default)]
    pub heteroscedastic: HeteroKnobs,
    /// Classification scenario knobs.
    #[serde(default)]
    pub classification: ClassKnobs,
}

fn default_n() -> usize {
    1000
}

fn default_exponents() -> Vec<f64> {
    vec![0.1, 0.25, 0.5, 0.75]
}

fn default_alpha() -> f64 {
    0.1
}

fn default_replicates() -> usize {
    200
}

/// Accept either a bare number or a list of numbers.
fn one_or_many<'de, D>(de: D) -> std::result::Result<Vec<f64>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

impl ExperimentConfig {
    /// Check the cross-field invariants that serde defaults cannot enforce.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("need at least one replicate".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0,1)", self.alpha)));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("sample scale n = {} is too small", self.n)));
        }
        if self.sparsity_exponents.is_empty() {
            return Err(Error::Config("sparsity exponent grid is empty".into()));
        }
        for &e in &self.sparsity_exponents {
            if !(e >= 0.0) || !e.is_finite() {
                return Err(Error::Config(format!("sparsity exponent {e} must be ≥ 0")));
            }
        }
        match self.scenario {
            Scenario::Sar => {
                if self.sar.models.is_empty() {
                    return Err(Error::Config("autoregressive model list is empty".into()));
                }
                let mut seen = [false; 4];
                for &m in &self.sar.models {
                    if !(1..=3).contains(&m) {
                        return Err(Error::Config(format!("model id {m} outside 1–3")));
                    }
                    if seen[m as usize] {
                        return Err(Error::Config(format!("model id {m} listed twice")));
                    }
                    seen[m as usize] = true;
                }
                if !(self.sar.rho.abs() < 1.0) {
                    return Err(Error::Config(format!(
                        "autoregressive coefficient {} must satisfy |rho| < 1",
                        self.sar.rho
                    )));
                }
            }
            Scenario::Heteroscedastic => {
                let k = &self.heteroscedastic;
                if k.test_nodes == 0 {
                    return Err(Error::Config("need at least one test node".into()));
                }
                if k.curve_points < 2 {
                    return Err(Error::Config("coverage curve needs at least two grid points".into()));
                }
                if let Some(b) = k.curve_bandwidth {
                    if !(b > 0.0) || !b.is_finite() {
                        return Err(Error::Config(format!("curve bandwidth {b} must be > 0")));
                    }
                }
            }
            Scenario::SyntheticClassification => {
                let k = &self.classification;
                if k.test_nodes == 0 {
                    return Err(Error::Config("need at least one test node".into()));
                }
                if k.covariate_sets.is_empty() {
                    return Err(Error::Config("covariate set list is empty".into()));
                }
                for (p, name) in [(k.label_probs.0, "block 0"), (k.label_probs.1, "block 1")] {
                    if !(p > 0.0 && p < 1.0) {
                        return Err(Error::Config(format!("label probability {p} for {name} outside (0,1)")));
                    }
                }
                for (p, name) in [(k.within_block, "within-block"), (k.between_block, "between-block")] {
                    if !(p > 0.0 && p <= 1.0) {
                        return Err(Error::Config(format!("{name} edge probability {p} outside (0,1]")));
                    }
                }
                if !(k.feature_signal >= 0.0) || !k.feature_signal.is_finite() {
                    return Err(Error::Config(format!(
                        "feature signal {} must be a finite value ≥ 0",
                        k.feature_signal
                    )));
                }
            }
            Scenario::RdpgLinear => {}
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// Marginal coverage and width summary for one (method, cell) pair. The
/// `replicates` field counts the Bernoulli trials behind the coverage
/// estimate — one per replicate when each replicate scores a single node,
/// `replicates × test_nodes` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Method name, e.g. `conformal` or `parametric_normal`.
    pub method: String,
    /// Experimental cell, e.g. `model2/nu=n^-0.25`.
    pub cell: String,
    /// Fraction of trials whose prediction covered the truth.
    pub coverage: f64,
    /// Lower end of the exact (Clopper–Pearson) 95% interval for coverage.
    pub ci_lo: f64,
    /// Upper end of the same interval.
    pub ci_hi: f64,
    /// Mean interval width, or mean set size for classification; infinite
    /// when any replicate produced a vacuous threshold.
    pub mean_width: f64,
    /// Number of Bernoulli coverage trials summarized.
    pub replicates: usize,
}

/// One held-out node's outcome, tagged with the population covariate value
/// that conditional coverage is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRecord {
    /// True (population) covariate of the node.
    pub z_true: f64,
    /// Whether the prediction covered the realized response.
    pub hit: bool,
    /// Interval width or set size.
    pub width: f64,
}

/// A smoothed conditional-coverage estimate at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Method the curve belongs to (suffixed with the cell when the run has
    /// several sparsity cells).
    pub method: String,
    /// Covariate grid point.
    pub z: f64,
    /// Kernel-smoothed coverage at `z`.
    pub coverage_smooth: f64,
}

/// All conditional records for one (method, cell) pair, in replicate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRecords {
    /// Method name.
    pub method: String,
    /// Experimental cell.
    pub cell: String,
    /// Per-node outcomes.
    pub records: Vec<ConditionalRecord>,
}

/// Everything a finished experiment produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    /// Echo of the configuration that produced the results.
    pub config: ExperimentConfig,
    /// One row per (method, cell), in deterministic order.
    pub reports: Vec<CoverageReport>,
    /// Smoothed conditional-coverage curves (heteroscedastic scenario only).
    pub curves: Vec<CurvePoint>,
    /// Raw per-node records backing the curves, where the scenario keeps
    /// them.
    pub records: Vec<MethodRecords>,
    /// Counts of non-fatal incidents (solver failures skipped, vacuous
    /// infinite-width thresholds), keyed by `kind:method:cell`.
    pub error_counts: BTreeMap<String, usize>,
}

// ---------------------------------------------------------------------------
// Coverage arithmetic
// ---------------------------------------------------------------------------

/// Exact (Clopper–Pearson) two-sided confidence interval for a binomial
/// proportion: with `x` hits out of `m` trials and miscoverage `a = 1 −
/// level`, the bounds are Beta quantiles
///
/// ```text
/// lo = Beta(x, m − x + 1).quantile(a/2)        (0 when x = 0)
/// hi = Beta(x + 1, m − x).quantile(1 − a/2)    (1 when x = m)
/// ```
pub fn binomial_ci(hits: usize, total: usize, level: f64) -> Result<(f64, f64)> {
    if total == 0 {
        return Err(Error::Degenerate("binomial interval needs at least one trial".into()));
    }
    if hits > total {
        return Err(Error::Parameter(format!("{hits} hits exceed {total} trials")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(format!("confidence level {level} outside (0,1)")));
    }
    let a = 1.0 - level;
    let beta_quantile = |shape_a: f64, shape_b: f64, p: f64| -> Result<f64> {
        Ok(Beta::new(shape_a, shape_b)
            .map_err(|e| Error::Parameter(format!("beta quantile: {e}")))?
            .inverse_cdf(p))
    };
    let lo = if hits == 0 {
        0.0
    } else {
        beta_quantile(hits as f64, (total - hits + 1) as f64, a / 2.0)?
    };
    let hi = if hits == total {
        1.0
    } else {
        beta_quantile((hits + 1) as f64, (total - hits) as f64, 1.0 - a / 2.0)?
    };
    Ok((lo, hi))
}

/// Kernel-smoothed conditional coverage: Gaussian-weighted average of the hit
/// indicators as a function of the true covariate. Grid points too far from
/// every record to accumulate weight come back as `None`.
pub fn conditional_coverage_curve(
    records: &[ConditionalRecord],
    grid: &[f64],
    bandwidth: f64,
) -> Result<Vec<Option<f64>>> {
    if records.is_empty() {
        return Err(Error::Degenerate("conditional coverage curve needs at least one record".into()));
    }
    let xs: Vec<f64> = records.iter().map(|r| r.z_true).collect();
    let hits: Vec<bool> = records.iter().map(|r| r.hit).collect();
    kernel_smoother_curve(&xs, &hits, grid, bandwidth)
}

fn coverage_report(method: &str, cell: &str, hits: usize, widths: &[f64]) -> Result<CoverageReport> {
    let total = widths.len();
    let (ci_lo, ci_hi) = binomial_ci(hits, total, CI_LEVEL)?;
    Ok(CoverageReport {
        method: method.into(),
        cell: cell.into(),
        coverage: hits as f64 / total as f64,
        ci_lo,
        ci_hi,
        mean_width: widths.iter().sum::<f64>() / total as f64,
        replicates: total,
    })
}

/// Record vacuous (infinite-width) predictions so a report whose mean width
/// is infinite can be traced back to the thresholds that caused it.
fn note_infinite_widths(
    errors: &mut BTreeMap<String, usize>,
    method: &str,
    cell: &str,
    widths: &[f64],
) {
    let inf = widths.iter().filter(|w| w.is_infinite()).count();
    if inf > 0 {
        errors.insert(format!("infinite_width:{method}:{cell}"), inf);
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Run the configured experiment to completion and return every report,
/// curve, and record it produced.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    // Replicates already saturate the worker threads; nested BLAS threading
    // inside the eigensolvers would only oversubscribe.
    set_blas_threads(1);
    match cfg.scenario {
        Scenario::RdpgLinear => run_rdpg_linear(cfg),
        Scenario::Sar => run_sar(cfg),
        Scenario::Heteroscedastic => run_heteroscedastic(cfg),
        Scenario::SyntheticClassification => run_synthetic_classification(cfg),
    }
}

/// A single simulated realization of a scenario: the observable dataset
/// (graph, covariates, response, splits) plus the latent per-node values the
/// fitted models never see.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    /// Graph, covariates, response, and splits — what an analyst observes.
    pub dataset: NodeDataset,
    /// Latent value per node: the uniform coordinate `ξ` for the
    /// latent-position scenarios, the Gaussian position `ζ` for the
    /// autoregressive one, the population covariate `z` for the
    /// heteroscedastic one.
    pub latent: Vec<f64>,
}

/// Simulate one realization of the configured scenario — the same draw that
/// replicate `replicate` of sparsity cell `cell` makes inside
/// [`run_experiment`], so a simulated dataset can be cross-examined against
/// the experiment that contains it.
pub fn simulate_scenario(
    cfg: &ExperimentConfig,
    cell: usize,
    replicate: usize,
) -> Result<SimulatedData> {
    cfg.validate()?;
    let Some(&e) = cfg.sparsity_exponents.get(cell) else {
        return Err(Error::Parameter(format!(
            "cell {cell} outside the {}-cell sparsity grid",
            cfg.sparsity_exponents.len()
        )));
    };
    let nu = (cfg.n as f64).powf(-e);
    let stream = RngStream::new(cfg.seed).substream(cell as u64).substream(replicate as u64);
    match cfg.scenario {
        Scenario::RdpgLinear => {
            let eig = min_graphon_eigenpairs(3)?;
            rdpg_dataset(cfg.n, &eig, nu, &stream)
        }
        Scenario::Sar => sar_dataset(cfg.n, &cfg.sar, nu, &stream)?.ok_or_else(|| {
            Error::Solve("autoregressive response solve failed for this draw".into())
        }),
        Scenario::Heteroscedastic => hetero_dataset(cfg.n, &cfg.heteroscedastic, nu, &stream),
        Scenario::SyntheticClassification => class_dataset(cfg.n, &cfg.classification, nu, &stream),
    }
}

fn unit_normal() -> Normal<f64> {
    Normal::new(0.0, 1.0).expect("unit normal parameters are valid")
}

fn interval_of(p: &Prediction) -> Result<&PredictionInterval> {
    p.as_interval()
        .ok_or_else(|| Error::Config("regression experiment produced a set prediction".into()))
}

fn cell_name(e: f64) -> String {
    format!("nu=n^-{e}")
}

/// Paired conformal/parametric outcome at one held-out node.
struct PairedInterval {
    conf_hit: bool,
    conf_width: f64,
    par_hit: bool,
    par_width: f64,
}

/// Score one held-out node with both a split-conformal interval (absolute
/// residual, linear fit) and the parametric normal interval from the same
/// training design.
fn conformal_and_parametric(
    data: &NodeDataset,
    alpha: f64,
    test: usize,
    stream: &RngStream,
) -> Result<PairedInterval> {
    let spec = ScoreSpec::new(ModelRecipe::ResidLinear);
    let out = split_conformal(data, &spec, alpha, &[test], stream)?;
    let iv = interval_of(&out.predictions[0])?;
    let y_test = data.real_y_rows(&[test])?[0];

    let train = data.splits.train.as_slice();
    let design = data.design_rows(train);
    let model = fit_ols(design.view(), &data.real_y_rows(train)?)?;
    let test_row = data.design_rows(&[test]).row(0).to_vec();
    let piv = parametric_normal_interval(&model, &test_row, alpha)?;

    Ok(PairedInterval {
        conf_hit: iv.contains(y_test),
        conf_width: iv.width(),
        par_hit: piv.contains(y_test),
        par_width: piv.width(),
    })
}

// ---------------------------------------------------------------------------
// Scenario: linear model on latent positions
// ---------------------------------------------------------------------------

/// One realization of the latent-position regression scenario.
///
/// The response is `y = 3 + 2x + 10 z₁ + 15 z₂ − 17 z₃ + ε` with
/// `x = u·z₁ + w`, `u ~ Uniform[1,2]`, `w, ε ~ N(0,1)`, where `z` is the
/// rank-3 latent position; the dataset's design sees only `x` and the
/// spectral embedding of a graph with mean `ν ZZᵀ`. Splits: `n` train, `n`
/// calibration, one held-out node. Latent value: the uniform coordinate `ξ`.
fn rdpg_dataset(
    n: usize,
    eig: &GraphonEigenpairs,
    nu: f64,
    stream: &RngStream,
) -> Result<SimulatedData> {
    let total = 2 * n + 1;
    let lat = sample_latent_positions(total, stream)?;
    let z = eig.position_matrix(&lat.xi);

    let gauss = unit_normal();
    let mut crng = stream.rng(Purpose::Covariates);
    let mut x = Array2::zeros((total, 1));
    for i in 0..total {
        let slope = 1.0 + crng.random::<f64>();
        x[[i, 0]] = slope * z[[i, 0]] + gauss.sample(&mut crng);
    }
    let mut nrng = stream.rng(Purpose::ResponseNoise);
    let y: Vec<f64> = (0..total)
        .map(|i| {
            3.0 + 2.0 * x[[i, 0]] + 10.0 * z[[i, 0]] + 15.0 * z[[i, 1]] - 17.0 * z[[i, 2]]
                + gauss.sample(&mut nrng)
        })
        .collect();

    let probs = rdpg_mean_matrix(z.view(), nu)?;
    let graph = sample_bernoulli_graph(probs.view(), stream)?;
    drop(probs);
    let (uhat, _, _) = adjacency_spectral_embedding(&graph, 3, 0)?;

    let mut data = NodeDataset::new(graph, x, vec!["x".into()], Response::Real(y))?;
    data.set_network_covariates(uhat, vec!["ase1".into(), "ase2".into(), "ase3".into()])?;
    data.set_splits(Splits {
        train: (0..n).collect(),
        calibration: (n..2 * n).collect(),
        test: vec![2 * n],
    })?;
    Ok(SimulatedData { dataset: data, latent: lat.xi })
}

/// One replicate of the latent-position regression: simulate, embed, and
/// score the single held-out node `2n` with both interval methods.
fn rdpg_replicate(
    n: usize,
    alpha: f64,
    eig: &GraphonEigenpairs,
    nu: f64,
    stream: &RngStream,
) -> Result<PairedInterval> {
    let sim = rdpg_dataset(n, eig, nu, stream)?;
    conformal_and_parametric(&sim.dataset, alpha, 2 * n, stream)
}

fn run_rdpg_linear(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let eig = min_graphon_eigenpairs(3)?;
    let root = RngStream::new(cfg.seed);
    let mut reports = Vec::new();
    let mut errors = BTreeMap::new();

    for (ci, &e) in cfg.sparsity_exponents.iter().enumerate() {
        let nu = (cfg.n as f64).powf(-e);
        let cell_stream = root.substream(ci as u64);
        let results: Vec<Result<PairedInterval>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| rdpg_replicate(cfg.n, cfg.alpha, &eig, nu, &cell_stream.substream(r as u64)))
            .collect();

        let cell = cell_name(e);
        let mut conf = (0usize, Vec::with_capacity(cfg.replicates));
        let mut par = (0usize, Vec::with_capacity(cfg.replicates));
        for r in results {
            let p = r?;
            conf.0 += usize::from(p.conf_hit);
            conf.1.push(p.conf_width);
            par.0 += usize::from(p.par_hit);
            par.1.push(p.par_width);
        }
        note_infinite_widths(&mut errors, "conformal", &cell, &conf.1);
        note_infinite_widths(&mut errors, "parametric_normal", &cell, &par.1);
        reports.push(coverage_report("conformal", &cell, conf.0, &conf.1)?);
        reports.push(coverage_report("parametric_normal", &cell, par.0, &par.1)?);
    }

    Ok(ExperimentOutcome {
        config: cfg.clone(),
        reports,
        curves: Vec::new(),
        records: Vec::new(),
        error_counts: errors,
    })
}

// ---------------------------------------------------------------------------
// Scenario: spatial autoregression
// ---------------------------------------------------------------------------

/// One realization of the autoregressive scenario, or `None` when the
/// response solve fails.
///
/// Covariates `(x₁, x₂, ζ) ~ N(μ, Σ)` with `μ = (1, 3, 0)` and
///
/// ```text
///     ⎡ 1    0.6   0.3 ⎤
/// Σ = ⎢ 0.6  4    −0.4 ⎥ ,
///     ⎣ 0.3 −0.4   1   ⎦
/// ```
///
/// the graph has edge probabilities `ν · exp(−(ζᵢ − ζⱼ)²/4)`, and the
/// response solves `y = 4x₁ + 5x₂ + ρ·ỹ + 2x̄₁ + 3x̄₂ + ε` over the whole
/// population, where bars denote one-hop neighborhood averages. The dataset's
/// design carries the richest (model-3) columns
/// `[x₁, x₂, x̄₁, x̄₂, ỹ]` — the nested model-1/2 designs are its column
/// prefixes — with the response average ỹ computed without the held-out
/// node. Latent value: the Gaussian position `ζ`.
fn sar_dataset(
    n: usize,
    knobs: &SarKnobs,
    nu: f64,
    stream: &RngStream,
) -> Result<Option<SimulatedData>> {
    let population = knobs.population.unwrap_or(DEFAULT_SAR_POPULATION).max(2 * n + 1);
    let test = 2 * n;

    // Lower Cholesky factor of Σ, hard-coded from its entries.
    let l21 = 0.6;
    let l31 = 0.3;
    let l22 = (4.0f64 - l21 * l21).sqrt();
    let l32 = (-0.4 - l31 * l21) / l22;
    let l33 = (1.0f64 - l31 * l31 - l32 * l32).sqrt();

    let gauss = unit_normal();
    let mut crng = stream.rng(Purpose::Covariates);
    let mut x = Array2::zeros((population, 2));
    let mut zeta = vec![0.0; population];
    for i in 0..population {
        let g1 = gauss.sample(&mut crng);
        let g2 = gauss.sample(&mut crng);
        let g3 = gauss.sample(&mut crng);
        x[[i, 0]] = 1.0 + g1;
        x[[i, 1]] = 3.0 + l21 * g1 + l22 * g2;
        zeta[i] = l31 * g1 + l32 * g2 + l33 * g3;
    }

    let probs = gaussian_latent_space_probs(&zeta, nu)?;
    let graph = sample_bernoulli_graph(probs.view(), stream)?;
    drop(probs);

    let sar = SarModelSpec {
        beta_x: vec![4.0, 5.0],
        beta_xbar: vec![2.0, 3.0],
        rho: knobs.rho,
        noise_sd: 1.0,
        weight_rule: WeightRule::OneHop,
    };
    let y = match crate::graphgen::generate_sar_response(&graph, x.view(), &sar, stream) {
        Ok(y) => y,
        Err(Error::Solve(_)) => return Ok(None),
        Err(e) => return Err(e),
    };

    let xbar = neighborhood_average(&graph, x.view(), Fallback::Zero)?;
    let ytilde = neighbor_weighted_response(&graph, &y, &WeightRule::OneHop, &[test], Fallback::Zero)?;
    let mut design = Array2::zeros((population, 5));
    for i in 0..population {
        design[[i, 0]] = x[[i, 0]];
        design[[i, 1]] = x[[i, 1]];
        design[[i, 2]] = xbar[[i, 0]];
        design[[i, 3]] = xbar[[i, 1]];
        design[[i, 4]] = ytilde[i];
    }
    let names =
        ["x1", "x2", "x1_bar", "x2_bar", "y_tilde"].map(String::from).to_vec();

    let mut data = NodeDataset::new(graph, design, names, Response::Real(y))?;
    data.set_splits(Splits {
        train: (0..n).collect(),
        calibration: (n..2 * n).collect(),
        test: vec![test],
    })?;
    Ok(Some(SimulatedData { dataset: data, latent: zeta }))
}

/// Number of design columns each nested autoregressive model uses.
fn sar_model_cols(m: u8) -> usize {
    match m {
        1 => 2,
        2 => 4,
        _ => 5,
    }
}

/// One replicate of the autoregressive scenario, or `None` when the response
/// solve fails (counted, not fatal). Each requested nested model is fit on
/// the corresponding column prefix of the full design.
fn sar_replicate(
    n: usize,
    alpha: f64,
    knobs: &SarKnobs,
    nu: f64,
    stream: &RngStream,
) -> Result<Option<Vec<(u8, PairedInterval)>>> {
    let Some(sim) = sar_dataset(n, knobs, nu, stream)? else {
        return Ok(None);
    };
    let full = &sim.dataset;
    let population = full.num_nodes();
    let test = 2 * n;

    let mut out = Vec::with_capacity(knobs.models.len());
    for &m in &knobs.models {
        let ncols = sar_model_cols(m);
        let xm = Array2::from_shape_fn((population, ncols), |(i, c)| full.x[[i, c]]);
        let names = full.x_names[..ncols].to_vec();
        let mut data =
            NodeDataset::new(full.graph.clone(), xm, names, full.y.clone())?;
        data.set_splits(full.splits.clone())?;
        out.push((m, conformal_and_parametric(&data, alpha, test, stream)?));
    }
    Ok(Some(out))
}

fn run_sar(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let root = RngStream::new(cfg.seed);
    let mut reports = Vec::new();
    let mut errors = BTreeMap::new();

    for (ci, &e) in cfg.sparsity_exponents.iter().enumerate() {
        let nu = (cfg.n as f64).powf(-e);
        let cell_stream = root.substream(ci as u64);
        let results: Vec<Result<Option<Vec<(u8, PairedInterval)>>>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| sar_replicate(cfg.n, cfg.alpha, &cfg.sar, nu, &cell_stream.substream(r as u64)))
            .collect();

        let mut solve_failures = 0usize;
        let mut per_model: BTreeMap<u8, (usize, Vec<f64>, usize, Vec<f64>)> = BTreeMap::new();
        for r in results {
            match r? {
                Some(v) => {
                    for (m, p) in v {
                        let slot = per_model.entry(m).or_insert_with(|| (0, Vec::new(), 0, Vec::new()));
                        slot.0 += usize::from(p.conf_hit);
                        slot.1.push(p.conf_width);
                        slot.2 += usize::from(p.par_hit);
                        slot.3.push(p.par_width);
                    }
                }
                None => solve_failures += 1,
            }
        }
        if solve_failures > 0 {
            errors.insert(format!("sar_solve_failed:{}", cell_name(e)), solve_failures);
        }
        for &m in &cfg.sar.models {
            let cell = format!("model{m}/{}", cell_name(e));
            let Some((ch, cw, ph, pw)) = per_model.get(&m) else {
                return Err(Error::Degenerate(format!(
                    "every replicate of cell {cell} failed the autoregressive solve"
                )));
            };
            note_infinite_widths(&mut errors, "conformal", &cell, cw);
            note_infinite_widths(&mut errors, "parametric_normal", &cell, pw);
            reports.push(coverage_report("conformal", &cell, *ch, cw)?);
            reports.push(coverage_report("parametric_normal", &cell, *ph, pw)?);
        }
    }

    Ok(ExperimentOutcome {
        config: cfg.clone(),
        reports,
        curves: Vec::new(),
        records: Vec::new(),
        error_counts: errors,
    })
}

// ---------------------------------------------------------------------------
// Scenario: heteroscedastic nonlinear response
// ---------------------------------------------------------------------------

/// The three scoring methods contrasted in the conditional-coverage study.
fn hetero_recipes() -> [ModelRecipe; 3] {
    [
        ModelRecipe::CdfKernel { kernel: Default::default(), bandwidth: Default::default() },
        ModelRecipe::ResidLinear,
        ModelRecipe::ResidFlexible { kernel: Default::default(), bandwidth: Default::default() },
    ]
}

/// One realization of the heteroscedastic scenario.
///
/// With `ξ ~ Uniform[0,1]`, the population covariate is the expected-degree
/// function of the graphon `w(ξᵢ, ξⱼ) = |ξᵢ − ξⱼ|`,
///
/// ```text
/// z = E[w(ξ, ·) | ξ] = ξ² − ξ + 1/2 ∈ [1/4, 1/2],
/// ```
///
/// and the response is `y = 4 + 5 sin(3πz) + (exp(15z)/250)·ε` — the noise
/// scale grows ~40× across the covariate range. The dataset never carries
/// `z`; its single observed covariate is the normalized degree of a `ν·w`
/// graph. Latent value: `z`.
fn hetero_dataset(
    n: usize,
    knobs: &HeteroKnobs,
    nu: f64,
    stream: &RngStream,
) -> Result<SimulatedData> {
    let total = 2 * n + knobs.test_nodes;
    let lat = sample_latent_positions(total, stream)?;
    let z_true: Vec<f64> = lat.xi.iter().map(|&t| t * t - t + 0.5).collect();

    let gauss = unit_normal();
    let mut nrng = stream.rng(Purpose::ResponseNoise);
    let y: Vec<f64> = z_true
        .iter()
        .map(|&z| {
            let scale = if knobs.constant_variance { 1.0 } else { (15.0 * z).exp() / 250.0 };
            4.0 + 5.0 * (3.0 * PI * z).sin() + scale * gauss.sample(&mut nrng)
        })
        .collect();

    let graph = sample_graphon_graph(&GraphonSpec::AbsDiff, nu, &lat.xi, stream)?;
    let deg = degrees(&graph);
    let x = Array2::from_shape_fn((total, 1), |(i, _)| deg[i] / (total - 1) as f64);

    let mut data = NodeDataset::new(graph, x, vec!["degree_norm".into()], Response::Real(y))?;
    data.set_splits(Splits {
        train: (0..n).collect(),
        calibration: (n..2 * n).collect(),
        test: (2 * n..total).collect(),
    })?;
    Ok(SimulatedData { dataset: data, latent: z_true })
}

/// One replicate of the heteroscedastic study: per method, one conditional
/// record for each held-out node.
fn hetero_replicate(
    n: usize,
    alpha: f64,
    knobs: &HeteroKnobs,
    nu: f64,
    stream: &RngStream,
) -> Result<Vec<Vec<ConditionalRecord>>> {
    let sim = hetero_dataset(n, knobs, nu, stream)?;
    let data = &sim.dataset;
    let y = data.y.as_real()?;
    let test = data.splits.test.clone();

    let mut per_method = Vec::with_capacity(3);
    for recipe in hetero_recipes() {
        let spec = ScoreSpec::new(recipe);
        let out = split_conformal(data, &spec, alpha, &test, stream)?;
        let recs = test
            .iter()
            .zip(&out.predictions)
            .map(|(&i, p)| {
                let iv = interval_of(p)?;
                Ok(ConditionalRecord {
                    z_true: sim.latent[i],
                    hit: iv.contains(y[i]),
                    width: iv.width(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        per_method.push(recs);
    }
    Ok(per_method)
}

fn run_heteroscedastic(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let knobs = &cfg.heteroscedastic;
    let method_names: Vec<&'static str> = hetero_recipes().iter().map(|r| r.method_name()).collect();
    let root = RngStream::new(cfg.seed);
    let mut reports = Vec::new();
    let mut curves = Vec::new();
    let mut records_out = Vec::new();
    let mut errors = BTreeMap::new();
    let single_cell = cfg.sparsity_exponents.len() == 1;

    for (ci, &e) in cfg.sparsity_exponents.iter().enumerate() {
        let nu = (cfg.n as f64).powf(-e);
        let cell_stream = root.substream(ci as u64);
        let results: Vec<Result<Vec<Vec<ConditionalRecord>>>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| hetero_replicate(cfg.n, cfg.alpha, knobs, nu, &cell_stream.substream(r as u64)))
            .collect();

        let mut per_method: Vec<Vec<ConditionalRecord>> = vec![Vec::new(); method_names.len()];
        for r in results {
            for (slot, recs) in per_method.iter_mut().zip(r?) {
                slot.extend(recs);
            }
        }

        let cell = cell_name(e);
        // Shared covariate grid over the observed range, so the per-method
        // curves are directly comparable.
        let (zmin, zmax) = per_method
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.z_true), hi.max(r.z_true))
            });
        let range = zmax - zmin;
        let bandwidth = knobs.curve_bandwidth.unwrap_or(0.12 * range);
        let grid: Vec<f64> = (0..knobs.curve_points)
            .map(|i| zmin + range * i as f64 / (knobs.curve_points - 1) as f64)
            .collect();

        for (method, recs) in method_names.iter().zip(per_method) {
            let hits = recs.iter().filter(|r| r.hit).count();
            let widths: Vec<f64> = recs.iter().map(|r| r.width).collect();
            note_infinite_widths(&mut errors, method, &cell, &widths);
            reports.push(coverage_report(method, &cell, hits, &widths)?);

            if range > 0.0 && bandwidth > 0.0 {
                let curve_method =
                    if single_cell { method.to_string() } else { format!("{method}[{cell}]") };
                for (z, cov) in grid.iter().zip(conditional_coverage_curve(&recs, &grid, bandwidth)?) {
                    if let Some(c) = cov {
                        curves.push(CurvePoint {
                            method: curve_method.clone(),
                            z: *z,
                            coverage_smooth: c,
                        });
                    }
                }
            }
            records_out.push(MethodRecords { method: method.to_string(), cell: cell.clone(), records: recs });
        }
    }

    Ok(ExperimentOutcome {
        config: cfg.clone(),
        reports,
        curves,
        records: records_out,
        error_counts: errors,
    })
}

// ---------------------------------------------------------------------------
// Scenario: classification on a stochastic block model
// ---------------------------------------------------------------------------

/// One realization of the classification scenario, with feature columns only
/// (each covariate set later derives its own network columns).
///
/// Nodes split into two blocks by `ξ > 1/2`; labels are Bernoulli with a
/// block-dependent success probability; features are an isotropic Gaussian
/// pair whose mean sits at `±signal/√2·(1,1)` by label; edges appear with
/// probability `ν·p_within` inside a block and `ν·p_between` across. Latent
/// value: the block coordinate `ξ`.
fn class_dataset(
    n: usize,
    knobs: &ClassKnobs,
    nu: f64,
    stream: &RngStream,
) -> Result<SimulatedData> {
    let total = 2 * n + knobs.test_nodes;
    let lat = sample_latent_positions(total, stream)?;
    let block: Vec<bool> = lat.xi.iter().map(|&t| t > 0.5).collect();

    let mut lrng = stream.rng(Purpose::Labels);
    let labels: Vec<usize> = block
        .iter()
        .map(|&b| {
            let p = if b { knobs.label_probs.1 } else { knobs.label_probs.0 };
            usize::from(lrng.random::<f64>() < p)
        })
        .collect();

    let gauss = unit_normal();
    let mut crng = stream.rng(Purpose::Covariates);
    let mut x = Array2::zeros((total, 2));
    for i in 0..total {
        let shift = knobs.feature_signal * FRAC_1_SQRT_2 * if labels[i] == 1 { 1.0 } else { -1.0 };
        x[[i, 0]] = shift + gauss.sample(&mut crng);
        x[[i, 1]] = shift + gauss.sample(&mut crng);
    }

    let probs = Array2::from_shape_fn((total, total), |(i, j)| {
        if i == j {
            0.0
        } else if block[i] == block[j] {
            nu * knobs.within_block
        } else {
            nu * knobs.between_block
        }
    });
    let graph = sample_bernoulli_graph(probs.view(), stream)?;
    drop(probs);

    let response = Response::Categorical {
        labels,
        classes: vec!["class0".into(), "class1".into()],
    };
    let mut data =
        NodeDataset::new(graph, x, vec!["f1".into(), "f2".into()], response)?;
    data.set_splits(Splits {
        train: (0..n).collect(),
        calibration: (n..2 * n).collect(),
        test: (2 * n..total).collect(),
    })?;
    Ok(SimulatedData { dataset: data, latent: lat.xi })
}

/// One replicate of the classification study: per covariate set, one record
/// for each held-out node (`width` is the prediction-set size).
fn class_replicate(
    n: usize,
    alpha: f64,
    knobs: &ClassKnobs,
    nu: f64,
    stream: &RngStream,
) -> Result<Vec<(CovariateSet, Vec<ConditionalRecord>)>> {
    let sim = class_dataset(n, knobs, nu, stream)?;
    let base = &sim.dataset;
    let total = base.num_nodes();
    let (labels, _) = base.y.as_categorical()?;
    let train = base.splits.train.clone();
    let test = base.splits.test.clone();

    let mut out = Vec::with_capacity(knobs.covariate_sets.len());
    for &set in &knobs.covariate_sets {
        let (zhat, znames): (Array2<f64>, Vec<String>) = match set {
            CovariateSet::Features => (Array2::zeros((total, 0)), Vec::new()),
            CovariateSet::FeaturesSpectral => {
                let deg = degrees(&base.graph);
                let (uhat, _, _) = adjacency_spectral_embedding(&base.graph, 2, 0)?;
                let mut zh = Array2::zeros((total, 3));
                for i in 0..total {
                    zh[[i, 0]] = deg[i] / (total - 1) as f64;
                    zh[[i, 1]] = uhat[[i, 0]];
                    zh[[i, 2]] = uhat[[i, 1]];
                }
                (zh, vec!["degree_norm".into(), "ase1".into(), "ase2".into()])
            }
            CovariateSet::FeaturesLabelAvg => {
                // Label averages read only training labels, so calibration
                // and test nodes stay exchangeable.
                let ind = Array2::from_shape_fn((total, 1), |(i, _)| labels[i] as f64);
                let targets: Vec<usize> = (0..total).collect();
                let avg = split_neighborhood_average(
                    &base.graph,
                    ind.view(),
                    &train,
                    &targets,
                    Fallback::GlobalMean,
                )?;
                (avg, vec!["label_avg".into()])
            }
        };
        let mut data = base.clone();
        if zhat.ncols() > 0 {
            data.set_network_covariates(zhat, znames)?;
        }

        let spec = ScoreSpec::new(ModelRecipe::ClassAdaptive { randomized: knobs.randomized });
        let outcome = split_conformal(&data, &spec, alpha, &test, stream)?;
        let recs = test
            .iter()
            .zip(&outcome.predictions)
            .map(|(&i, p)| {
                let s = p
                    .as_set()
                    .ok_or_else(|| Error::Config("classification produced an interval".into()))?;
                Ok(ConditionalRecord {
                    z_true: sim.latent[i],
                    hit: s.contains(labels[i]),
                    width: s.len() as f64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((set, recs));
    }
    Ok(out)
}

fn run_synthetic_classification(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let knobs = &cfg.classification;
    let root = RngStream::new(cfg.seed);
    let mut reports = Vec::new();
    let mut records_out = Vec::new();

    for (ci, &e) in cfg.sparsity_exponents.iter().enumerate() {
        let nu = (cfg.n as f64).powf(-e);
        let cell_stream = root.substream(ci as u64);
        let results: Vec<Result<Vec<(CovariateSet, Vec<ConditionalRecord>)>>> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| class_replicate(cfg.n, cfg.alpha, knobs, nu, &cell_stream.substream(r as u64)))
            .collect();

        let mut per_set: Vec<Vec<ConditionalRecord>> = vec![Vec::new(); knobs.covariate_sets.len()];
        for r in results {
            for (slot, (_, recs)) in per_set.iter_mut().zip(r?) {
                slot.extend(recs);
            }
        }

        for (set, recs) in knobs.covariate_sets.iter().zip(per_set) {
            let cell = format!("{}/{}", set.name(), cell_name(e));
            let hits = recs.iter().filter(|r| r.hit).count();
            let widths: Vec<f64> = recs.iter().map(|r| r.width).collect();
            reports.push(coverage_report("class_adaptive", &cell, hits, &widths)?);
            records_out.push(MethodRecords {
                method: "class_adaptive".into(),
                cell,
                records: recs,
            });
        }
    }
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        reports,
        curves: Vec::new(),
        records: records_out,
        error_counts: BTreeMap::new(),
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
