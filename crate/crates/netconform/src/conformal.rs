//! Split conformal prediction: nonconformity scores, finite-sample
//! calibration thresholds, and their inversion into prediction intervals or
//! label sets.
//!
//! Given scores S₁, …, Sₙ on a calibration set exchangeable with a test
//! point and a miscoverage level α ∈ (0, 1), the threshold d is the k-th
//! smallest calibration score with k = ⌈(1−α)(n+1)⌉, taken as +∞ when
//! k > n. The region {y : S(y) ≤ d} then satisfies
//!
//! > P(Y ∈ region) ≥ 1 − α,
//!
//! and, when score ties have probability zero (which [`jitter_scores`] can
//! force), also P(Y ∈ region) ≤ 1 − α + 1/(n+1). No assumption is made
//! about the fitted model beyond its being a function of the training rows
//! only.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::NodeDataset;
use crate::error::{Error, Result};
use crate::regress::{
    default_bandwidth_grid, fit_logistic, fit_ols, kernel_cdf_eval, select_bandwidth_cv,
    select_mean_bandwidth_cv, ConditionalCdfModel, KernelMeanModel, KernelSpec, LinearModel,
    LogisticModel,
};
use crate::rng::{Purpose, RngStream};

/// Serialize possibly-infinite `f64` values as JSON-safe tokens: finite
/// numbers pass through, ±∞ become the strings `"inf"` / `"-inf"`.
pub(crate) mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            Err(serde::ser::Error::custom("NaN has no serialized form"))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number, \"inf\", or \"-inf\", got {other:?}"
                ))),
            },
        }
    }
}

/// A real prediction interval; either endpoint may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    #[serde(with = "extended_real")]
    pub lower: f64,
    #[serde(with = "extended_real")]
    pub upper: f64,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }
}

/// A set-valued class prediction (label indices, ascending).
///
/// When the threshold sits below every achievable score the raw set would
/// be empty; the set then falls back to the single most probable label and
/// `fallback_used` is set so downstream reports can flag it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub labels: Vec<usize>,
    pub fallback_used: bool,
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: usize) -> bool {
        self.labels.binary_search(&label).is_ok()
    }
}

/// Everything the calibration step produced: the (possibly jittered)
/// calibration scores, the level, and the threshold actually used.
///
/// `threshold` equals the `quantile_index`-th smallest score when that
/// index is within range, and +∞ otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub scores: Vec<f64>,
    pub alpha: f64,
    #[serde(with = "extended_real")]
    pub threshold: f64,
    pub quantile_index: usize,
}

/// One prediction: an interval for real responses, a label set for
/// categorical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Interval(PredictionInterval),
    Set(PredictionSet),
}

impl Prediction {
    pub fn as_interval(&self) -> Option<&PredictionInterval> {
        match self {
            Prediction::Interval(iv) => Some(iv),
            Prediction::Set(_) => None,
        }
    }

    pub fn as_set(&self) -> Option<&PredictionSet> {
        match self {
            Prediction::Set(s) => Some(s),
            Prediction::Interval(_) => None,
        }
    }
}

/// Result of a full split-conformal pass: one prediction per requested
/// node, plus the calibration record behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub predictions: Vec<Prediction>,
    pub record: CalibrationRecord,
}

// ---------------------------------------------------------------------------
// Nonconformity scores
// ---------------------------------------------------------------------------

/// Absolute residual |y − μ̂|.
pub fn score_abs_residual(y: f64, mu_hat: f64) -> f64 {
    (y - mu_hat).abs()
}

/// Median distance of the conditional CDF value: |1/2 − F̂(y | x, z)|,
/// which lies in [0, 1/2] and is small exactly when y is near the
/// conditional median.
pub fn score_cdf_distance(cdf_at_y: f64) -> f64 {
    (0.5 - cdf_at_y).abs()
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Parameter("class probability vector is empty".into()));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Parameter("class probabilities must be finite and ≥ 0".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Parameter(format!(
            "class probabilities sum to {total}, expected 1"
        )));
    }
    Ok(())
}

fn check_randomizer(u: Option<f64>) -> Result<()> {
    if let Some(u) = u {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Parameter(format!("randomizer {u} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Label ranks by descending probability; ties break toward the smaller
/// label index.
fn descending_order(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    idx
}

/// Adaptive classification score: rank the class probabilities in
/// descending order and accumulate them through the true label's rank, so
/// the score is the probability mass the model places on labels it
/// considers at least as likely as the truth. Lies in (0, 1]; small means
/// the model ranked the true label highly.
///
/// With `u = Some(u)` the true label's own mass enters only fractionally
/// (`cum_before + u·p_true`), which makes the score continuously
/// distributed and the resulting prediction sets exactly calibrated rather
/// than conservative.
pub fn score_classification_adaptive(probs: &[f64], label: usize, u: Option<f64>) -> Result<f64> {
    check_probs(probs)?;
    check_randomizer(u)?;
    if label >= probs.len() {
        return Err(Error::Parameter(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let mut cum_before = 0.0;
    for &l in &descending_order(probs) {
        if l == label {
            return Ok(cum_before + u.unwrap_or(1.0) * probs[l]);
        }
        cum_before += probs[l];
    }
    unreachable!("label verified to be in range");
}

/// Add independent Uniform(0, ε) noise to each score, breaking ties almost
/// surely. Requires ε > 0; jittered scores are never smaller than the
/// originals, so a threshold computed from them is conservative.
pub fn jitter_scores(scores: &mut [f64], epsilon: f64, rng: &mut impl Rng) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Parameter(format!(
            "jitter width {epsilon} must be positive and finite"
        )));
    }
    for s in scores.iter_mut() {
        *s += epsilon * rng.random::<f64>();
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Threshold
// ---------------------------------------------------------------------------

/// The conformal threshold: the k-th smallest score with
/// k = ⌈(1−α)(n+1)⌉, or +∞ when k exceeds n (the guarantee is then
/// vacuous and the region is the whole space). Returns `(threshold, k)`.
///
/// The ceiling is taken with a relative 1e-9 guard so that levels like
/// (1−α)(n+1) = 9 land on 9 even when the product is computed as
/// 9.000000000000002.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<(f64, usize)> {
    let n = scores.len();
    if n == 0 {
        return Err(Error::Degenerate("empty calibration set".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha {alpha} outside (0, 1)")));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Parameter("calibration scores must not be NaN".into()));
    }
    let t = (1.0 - alpha) * (n as f64 + 1.0);
    let k = ((t - 1e-9 * t.max(1.0)).ceil()).max(1.0) as usize;
    if k > n {
        return Ok((f64::INFINITY, k));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok((sorted[k - 1], k))
}

// ---------------------------------------------------------------------------
// Inversion
// ---------------------------------------------------------------------------

/// Invert the absolute-residual score at a point prediction:
/// {y : |y − μ̂| ≤ d} = [μ̂ − d, μ̂ + d].
pub fn invert_abs_residual(mu_hat: f64, d: f64) -> Result<PredictionInterval> {
    if !mu_hat.is_finite() {
        return Err(Error::Parameter(format!("point prediction {mu_hat} is not finite")));
    }
    if d.is_nan() || d < 0.0 {
        return Err(Error::Parameter(format!("threshold {d} must be ≥ 0")));
    }
    Ok(PredictionInterval { lower: mu_hat - d, upper: mu_hat + d })
}

/// Invert the CDF-distance score at a query point: the raw region is
/// {y : 1/2 − d ≤ F̂(y | x, z) ≤ 1/2 + d}, and since F̂ is a nondecreasing
/// step function on the training responses this convexifies to the
/// interval from the smallest response with F̂ ≥ 1/2 − d (−∞ when
/// 1/2 − d ≤ 0) to the smallest response with F̂ ≥ 1/2 + d (+∞ when the
/// CDF never gets there). Thresholds above 1/2 — possible when the
/// calibration scores were jittered — simply give an unbounded interval.
pub fn invert_cdf_distance(
    model: &ConditionalCdfModel,
    x: &[f64],
    z: &[f64],
    d: f64,
) -> Result<PredictionInterval> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::Parameter(format!("threshold {d} must be ≥ 0")));
    }
    if d.is_infinite() {
        return Ok(PredictionInterval { lower: f64::NEG_INFINITY, upper: f64::INFINITY });
    }
    let cum = model.cdf_curve(x, z)?;
    let ys = model.sorted_responses();
    let tau_lo = 0.5 - d;
    let tau_hi = 0.5 + d;
    let lower = if tau_lo <= 0.0 {
        f64::NEG_INFINITY
    } else {
        // Always found: the final cumulative value is exactly 1 ≥ tau_lo.
        ys[cum.partition_point(|&v| v < tau_lo)]
    };
    let upper = {
        let i = cum.partition_point(|&v| v < tau_hi);
        if i == cum.len() {
            f64::INFINITY
        } else {
            ys[i]
        }
    };
    Ok(PredictionInterval { lower, upper })
}

/// Invert the adaptive classification score: keep every label whose score
/// is ≤ d. With `u = Some(u)` the same randomizer is shared across labels,
/// matching the randomized score. An empty set falls back to the single
/// most probable label, flagged via `fallback_used`.
pub fn classification_set(probs: &[f64], d: f64, u: Option<f64>) -> Result<PredictionSet> {
    check_probs(probs)?;
    check_randomizer(u)?;
    if d.is_nan() {
        return Err(Error::Parameter("threshold must not be NaN".into()));
    }
    let order = descending_order(probs);
    let mut labels = Vec::new();
    let mut cum_before = 0.0;
    for &l in &order {
        if cum_before + u.unwrap_or(1.0) * probs[l] <= d {
            labels.push(l);
        }
        cum_before += probs[l];
    }
    let fallback_used = labels.is_empty();
    if fallback_used {
        labels.push(order[0]);
    }
    labels.sort_unstable();
    Ok(PredictionSet { labels, fallback_used })
}

// ---------------------------------------------------------------------------
// Score / model configuration
// ---------------------------------------------------------------------------

/// Kernel bandwidth: fixed, or chosen by K-fold cross-validation (on an
/// explicit grid, or a data-driven default around the median pairwise
/// distance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    Fixed(f64),
    CrossValidated {
        #[serde(default)]
        grid: Option<Vec<f64>>,
        #[serde(default = "default_folds")]
        folds: usize,
    },
}

fn default_folds() -> usize {
    5
}

impl Default for BandwidthChoice {
    fn default() -> Self {
        BandwidthChoice::CrossValidated { grid: None, folds: default_folds() }
    }
}

/// Whether and how to jitter the calibration scores.
///
/// `Default` leaves interval scores untouched (their score distributions
/// are already continuous when the response is) and adds ε = 1e-9 × the
/// calibration score range to classification scores, whose point masses
/// would otherwise make thresholds tie-sensitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterChoice {
    Default,
    Off,
    Fixed { epsilon: f64 },
}

impl Default for JitterChoice {
    fn default() -> Self {
        JitterChoice::Default
    }
}

/// Which working model to fit on the training split and which score to
/// derive from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ModelRecipe {
    /// Least squares on `[x | zhat]`; absolute-residual score.
    ResidLinear,
    /// Kernel regression mean; absolute-residual score.
    ResidFlexible {
        #[serde(default)]
        kernel: KernelSpec,
        #[serde(default)]
        bandwidth: BandwidthChoice,
    },
    /// Kernel conditional CDF; median-distance score, interval by CDF
    /// inversion.
    CdfKernel {
        #[serde(default)]
        kernel: KernelSpec,
        #[serde(default)]
        bandwidth: BandwidthChoice,
    },
    /// Logistic class probabilities; adaptive classification score.
    ClassAdaptive {
        #[serde(default)]
        randomized: bool,
    },
}

impl ModelRecipe {
    /// Stable name used in reports and output files.
    pub fn method_name(&self) -> &'static str {
        match self {
            ModelRecipe::ResidLinear => "resid_linear",
            ModelRecipe::ResidFlexible { .. } => "resid_flexible",
            ModelRecipe::CdfKernel { .. } => "cdf_kernel",
            ModelRecipe::ClassAdaptive { .. } => "class_adaptive",
        }
    }
}

/// A model recipe plus the jitter policy for its calibration scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSpec {
    #[serde(flatten)]
    pub recipe: ModelRecipe,
    #[serde(default)]
    pub jitter: JitterChoice,
}

impl ScoreSpec {
    pub fn new(recipe: ModelRecipe) -> Self {
        ScoreSpec { recipe, jitter: JitterChoice::Default }
    }
}

// ---------------------------------------------------------------------------
// Split-conformal orchestration
// ---------------------------------------------------------------------------

enum Fitted {
    Linear(LinearModel),
    KernelMean(KernelMeanModel),
    Cdf(ConditionalCdfModel),
    Logistic { model: LogisticModel, randomized: bool },
}

fn x_row(data: &NodeDataset, i: usize) -> Vec<f64> {
    data.x.row(i).to_vec()
}

fn z_row(data: &NodeDataset, i: usize) -> Vec<f64> {
    data.zhat.row(i).to_vec()
}

fn design_row(data: &NodeDataset, i: usize) -> Vec<f64> {
    let mut v = x_row(data, i);
    v.extend(z_row(data, i));
    v
}

impl Fitted {
    fn score(&self, data: &NodeDataset, i: usize, rng: &mut impl Rng) -> Result<f64> {
        match self {
            Fitted::Linear(m) => {
                let y = data.y.as_real()?[i];
                Ok(score_abs_residual(y, m.predict(&design_row(data, i))?))
            }
            Fitted::KernelMean(m) => {
                let y = data.y.as_real()?[i];
                Ok(score_abs_residual(y, m.eval(&x_row(data, i), &z_row(data, i))?))
            }
            Fitted::Cdf(m) => {
                let y = data.y.as_real()?[i];
                let f = kernel_cdf_eval(m, y, &x_row(data, i), &z_row(data, i))?;
                Ok(score_cdf_distance(f))
            }
            Fitted::Logistic { model, randomized } => {
                let (labels, _) = data.y.as_categorical()?;
                let p = model.predict_prob(&design_row(data, i))?;
                let u = if *randomized { Some(rng.random::<f64>()) } else { None };
                score_classification_adaptive(&[1.0 - p, p], labels[i], u)
            }
        }
    }

    fn predict(
        &self,
        data: &NodeDataset,
        i: usize,
        d: f64,
        rng: &mut impl Rng,
    ) -> Result<Prediction> {
        match self {
            Fitted::Linear(m) => Ok(Prediction::Interval(invert_abs_residual(
                m.predict(&design_row(data, i))?,
                d,
            )?)),
            Fitted::KernelMean(m) => Ok(Prediction::Interval(invert_abs_residual(
                m.eval(&x_row(data, i), &z_row(data, i))?,
                d,
            )?)),
            Fitted::Cdf(m) => Ok(Prediction::Interval(invert_cdf_distance(
                m,
                &x_row(data, i),
                &z_row(data, i),
                d,
            )?)),
            Fitted::Logistic { model, randomized } => {
                let p = model.predict_prob(&design_row(data, i))?;
                let u = if *randomized { Some(rng.random::<f64>()) } else { None };
                Ok(Prediction::Set(classification_set(&[1.0 - p, p], d, u)?))
            }
        }
    }
}

fn fit_recipe(data: &NodeDataset, recipe: &ModelRecipe, stream: &RngStream) -> Result<Fitted> {
    let train = &data.splits.train;
    match recipe {
        ModelRecipe::ResidLinear => {
            let design = data.design_rows(train);
            let y = data.real_y_rows(train)?;
            Ok(Fitted::Linear(fit_ols(design.view(), &y)?))
        }
        ModelRecipe::ResidFlexible { kernel, bandwidth } => {
            let xt = data.x_rows(train);
            let zt = data.zhat_rows(train);
            let y = data.real_y_rows(train)?;
            let h = match bandwidth {
                BandwidthChoice::Fixed(h) => *h,
                BandwidthChoice::CrossValidated { grid, folds } => {
                    let g = match grid {
                        Some(g) => g.clone(),
                        None => default_bandwidth_grid(xt.view(), zt.view())?,
                    };
                    let mut rng = stream.rng(Purpose::CvFolds);
                    select_mean_bandwidth_cv(xt.view(), zt.view(), &y, *kernel, &g, *folds, &mut rng)?
                }
            };
            Ok(Fitted::KernelMean(KernelMeanModel::new(xt, zt, y, *kernel, h)?))
        }
        ModelRecipe::CdfKernel { kernel, bandwidth } => {
            let xt = data.x_rows(train);
            let zt = data.zhat_rows(train);
            let y = data.real_y_rows(train)?;
            let h = match bandwidth {
                BandwidthChoice::Fixed(h) => *h,
                BandwidthChoice::CrossValidated { grid, folds } => {
                    let g = match grid {
                        Some(g) => g.clone(),
                        None => default_bandwidth_grid(xt.view(), zt.view())?,
                    };
                    let mut rng = stream.rng(Purpose::CvFolds);
                    select_bandwidth_cv(xt.view(), zt.view(), &y, *kernel, &g, *folds, &mut rng)?
                }
            };
            Ok(Fitted::Cdf(ConditionalCdfModel::new(xt, zt, y, *kernel, h)?))
        }
        ModelRecipe::ClassAdaptive { randomized } => {
            let labels = data.label_rows(train)?;
            if labels.iter().any(|&l| l > 1) {
                return Err(Error::Parameter(
                    "adaptive classification currently supports exactly two classes".into(),
                ));
            }
            let flags: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
            let design = data.design_rows(train);
            Ok(Fitted::Logistic {
                model: fit_logistic(design.view(), &flags)?,
                randomized: *randomized,
            })
        }
    }
}

fn resolve_jitter(
    choice: &JitterChoice,
    recipe: &ModelRecipe,
    scores: &[f64],
) -> Result<Option<f64>> {
    match choice {
        JitterChoice::Off => Ok(None),
        JitterChoice::Fixed { epsilon } => {
            if !(*epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::Parameter(format!(
                    "jitter width {epsilon} must be positive and finite"
                )));
            }
            Ok(Some(*epsilon))
        }
        JitterChoice::Default => match recipe {
            ModelRecipe::ClassAdaptive { .. } => {
                let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let range = hi - lo;
                // Classification scores live in (0, 1]; use that scale when
                // every calibration score coincides.
                let scale = if range > 0.0 && range.is_finite() { range } else { 1.0 };
                Ok(Some(1e-9 * scale))
            }
            _ => Ok(None),
        },
    }
}

/// Run split conformal prediction on a dataset with disjoint train and
/// calibration splits: fit the recipe's model on the training rows, score
/// the calibration rows, take the conformal threshold at level `alpha`,
/// and invert the score at each node in `new_points`.
///
/// All randomness (cross-validation folds, score jitter, randomized
/// classification scores) derives from `stream`, so identical inputs give
/// bit-identical outcomes. Jitter is applied to the calibration scores
/// only, which can only raise the threshold and therefore never costs
/// coverage.
pub fn split_conformal(
    data: &NodeDataset,
    spec: &ScoreSpec,
    alpha: f64,
    new_points: &[usize],
    stream: &RngStream,
) -> Result<SplitOutcome> {
    data.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha {alpha} outside (0, 1)")));
    }
    if data.splits.train.is_empty() {
        return Err(Error::Degenerate("empty training split".into()));
    }
    if data.splits.calibration.is_empty() {
        return Err(Error::Degenerate("empty calibration split".into()));
    }
    let n = data.num_nodes();
    if let Some(&bad) = new_points.iter().find(|&&i| i >= n) {
        return Err(Error::Parameter(format!(
            "prediction node {bad} out of range for {n} nodes"
        )));
    }

    let fitted = fit_recipe(data, &spec.recipe, stream)?;
    // One sequential generator covers randomized calibration scores, then
    // jitter, then randomized test scores, in that fixed order.
    let mut jrng = stream.rng(Purpose::Jitter);

    let mut scores = Vec::with_capacity(data.splits.calibration.len());
    for &i in &data.splits.calibration {
        scores.push(fitted.score(data, i, &mut jrng)?);
    }
    if let Some(eps) = resolve_jitter(&spec.jitter, &spec.recipe, &scores)? {
        jitter_scores(&mut scores, eps, &mut jrng)?;
    }

    let (threshold, quantile_index) = conformal_quantile(&scores, alpha)?;

    let mut predictions = Vec::with_capacity(new_points.len());
    for &i in new_points {
        predictions.push(fitted.predict(data, i, threshold, &mut jrng)?);
    }

    Ok(SplitOutcome {
        predictions,
        record: CalibrationRecord { scores, alpha, threshold, quantile_index },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Response, Splits};
    use crate::graph::Graph;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adaptive_score_matches_hand_computations() {
        // Top-ranked true label: score is its own probability.
        assert_eq!(
            score_classification_adaptive(&[0.5, 0.3, 0.2], 0, None).unwrap(),
            0.5
        );
        // Second-ranked: 0.5 + 0.3.
        assert_eq!(
            score_classification_adaptive(&[0.5, 0.3, 0.2], 1, None).unwrap(),
            0.8
        );
        // Uniform probabilities: ties rank by label index, so the last
        // label accumulates everything.
        assert_eq!(
            score_classification_adaptive(&[0.25; 4], 3, None).unwrap(),
            1.0
        );
        // Randomized variant counts only u of the true label's mass.
        assert_eq!(
            score_classification_adaptive(&[0.5, 0.3, 0.2], 1, Some(0.5)).unwrap(),
            0.5 + 0.5 * 0.3
        );
        assert_eq!(
            score_classification_adaptive(&[0.5, 0.3, 0.2], 0, Some(0.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn adaptive_score_validates_inputs() {
        assert!(score_classification_adaptive(&[0.5, 0.4], 0, None).is_err()); // sums to 0.9
        assert!(score_classification_adaptive(&[0.5, 0.5], 2, None).is_err()); // label range
        assert!(score_classification_adaptive(&[1.5, -0.5], 0, None).is_err()); // negative
        assert!(score_classification_adaptive(&[0.5, 0.5], 0, Some(1.5)).is_err()); // u range
        assert!(score_classification_adaptive(&[], 0, None).is_err());
    }

    #[test]
    fn quantile_index_matches_worked_examples() {
        // n = 9, α = 0.1: k = ⌈0.9 · 10⌉ = 9, the largest score.
        let scores: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(conformal_quantile(&scores, 0.1).unwrap(), (9.0, 9));
        // n = 4, α = 0.5: k = ⌈0.5 · 5⌉ = 3.
        let scores = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(conformal_quantile(&scores, 0.5).unwrap(), (3.0, 3));
        // n = 3, α = 0.1: k = 4 > n, threshold +∞.
        let scores = [1.0, 2.0, 3.0];
        let (d, k) = conformal_quantile(&scores, 0.1).unwrap();
        assert!(d.is_infinite() && d > 0.0);
        assert_eq!(k, 4);
    }

    #[test]
    fn quantile_matches_brute_force_counting() {
        // d must be the smallest calibration score t with
        // #{i : S_i ≤ t} ≥ k, exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for trial in 0..200 {
            let n = 1 + (trial % 37);
            let scores: Vec<f64> = (0..n)
                .map(|_| {
                    // Coarse grid to force ties.
                    (rng.random::<f64>() * 8.0).floor() / 4.0
                })
                .collect();
            for alpha in [0.05, 0.1, 0.25, 0.5, 0.9] {
                let (d, k) = conformal_quantile(&scores, alpha).unwrap();
                if k > n {
                    assert!(d.is_infinite());
                    continue;
                }
                let brute = scores
                    .iter()
                    .copied()
                    .filter(|t| scores.iter().filter(|s| *s <= t).count() >= k)
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(d, brute, "n={n} alpha={alpha}");
            }
        }
    }

    #[test]
    fn quantile_is_permutation_invariant_and_monotone_in_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scores: Vec<f64> = (0..50).map(|_| rng.random::<f64>() * 3.0).collect();
        let mut shuffled = scores.clone();
        shuffled.reverse();
        shuffled.swap(3, 40);
        for alpha in [0.05, 0.2, 0.8] {
            let (d1, k1) = conformal_quantile(&scores, alpha).unwrap();
            let (d2, k2) = conformal_quantile(&shuffled, alpha).unwrap();
            assert_eq!(d1.to_bits(), d2.to_bits());
            assert_eq!(k1, k2);
        }
        let mut last = f64::INFINITY;
        for alpha in [0.01, 0.05, 0.1, 0.2, 0.5, 0.9] {
            let (d, _) = conformal_quantile(&scores, alpha).unwrap();
            assert!(d <= last, "threshold must not increase with alpha");
            last = d;
        }
    }

    #[test]
    fn residual_inversion_handles_degenerate_thresholds() {
        let iv = invert_abs_residual(2.0, 0.5).unwrap();
        assert_eq!((iv.lower, iv.upper), (1.5, 2.5));
        assert_eq!(iv.width(), 1.0);
        assert!(iv.contains(1.5) && iv.contains(2.5) && !iv.contains(2.6));

        let point = invert_abs_residual(2.0, 0.0).unwrap();
        assert_eq!(point.width(), 0.0);
        assert!(point.contains(2.0));

        let unbounded = invert_abs_residual(2.0, f64::INFINITY).unwrap();
        assert!(!unbounded.is_bounded());
        assert!(unbounded.contains(1e300) && unbounded.contains(-1e300));

        assert!(invert_abs_residual(2.0, -0.1).is_err());
        assert!(invert_abs_residual(2.0, f64::NAN).is_err());
        assert!(invert_abs_residual(f64::NAN, 1.0).is_err());
    }

    /// Uniform-weight CDF model on responses 1, 2, 3, 4 (boxcar kernel with
    /// a bandwidth wide enough that every weight is 1), so F̂ steps through
    /// exactly 0.25, 0.5, 0.75, 1.
    fn uniform_cdf_model() -> ConditionalCdfModel {
        ConditionalCdfModel::new(
            Array2::zeros((4, 1)),
            Array2::zeros((4, 0)),
            vec![1.0, 2.0, 3.0, 4.0],
            KernelSpec::Boxcar,
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn cdf_inversion_matches_step_scan() {
        let m = uniform_cdf_model();
        let q = [0.0];
        // d = 0.3: thresholds 0.2 and 0.8 → first steps at y = 1 and y = 4.
        let iv = invert_cdf_distance(&m, &q, &[], 0.3).unwrap();
        assert_eq!((iv.lower, iv.upper), (1.0, 4.0));
        // d = 0: both thresholds 0.5 → the median step y = 2.
        let iv = invert_cdf_distance(&m, &q, &[], 0.0).unwrap();
        assert_eq!((iv.lower, iv.upper), (2.0, 2.0));
        // d = 0.5: lower threshold hits 0 → −∞; upper threshold 1 is
        // attained at the last response.
        let iv = invert_cdf_distance(&m, &q, &[], 0.5).unwrap();
        assert_eq!(iv.lower, f64::NEG_INFINITY);
        assert_eq!(iv.upper, 4.0);
        // d just above 1/2 (as jitter can produce): fully unbounded, not an
        // error.
        let iv = invert_cdf_distance(&m, &q, &[], 0.5 + 1e-9).unwrap();
        assert!(!iv.is_bounded());

        assert!(invert_cdf_distance(&m, &q, &[], -0.01).is_err());
        assert!(invert_cdf_distance(&m, &q, &[], f64::NAN).is_err());
    }

    #[test]
    fn cdf_inversion_agrees_with_direct_score_on_the_response_grid() {
        // On generic continuous data: every response with score < d lies in
        // the interval, and everything outside it has score ≥ d.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 30;
        let x = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>() * 2.0 - 1.0);
        let z = Array2::from_shape_fn((n, 1), |_| rng.random::<f64>());
        let y: Vec<f64> = (0..n).map(|i| x[[i, 0]] + 0.3 * rng.random::<f64>()).collect();
        let m = ConditionalCdfModel::new(x, z, y, KernelSpec::Gaussian, 0.7).unwrap();
        let q = ([0.1, -0.4], [0.5]);
        for d in [0.05, 0.15, 0.3, 0.45] {
            let iv = invert_cdf_distance(&m, &q.0, &q.1, d).unwrap();
            for &y in m.sorted_responses() {
                let score = score_cdf_distance(kernel_cdf_eval(&m, y, &q.0, &q.1).unwrap());
                if score < d {
                    assert!(iv.contains(y), "score {score} < {d} but {y} outside {iv:?}");
                }
                if !iv.contains(y) {
                    assert!(score >= d, "outside point {y} has score {score} < {d}");
                }
            }
        }
    }

    #[test]
    fn classification_sets_grow_with_threshold_and_flag_fallback() {
        let probs = [0.5, 0.3, 0.2];
        let set = |d: f64| classification_set(&probs, d, None).unwrap();
        assert_eq!(set(0.5).labels, vec![0]);
        assert_eq!(set(0.79).labels, vec![0]);
        assert_eq!(set(0.8).labels, vec![0, 1]);
        assert_eq!(set(1.0).labels, vec![0, 1, 2]);
        assert!(!set(0.5).fallback_used);

        // Threshold below every achievable score: singleton fallback.
        let fb = set(0.2);
        assert_eq!(fb.labels, vec![0]);
        assert!(fb.fallback_used);

        // Infinite threshold admits every label.
        assert_eq!(set(f64::INFINITY).labels, vec![0, 1, 2]);

        // Shared randomizer shrinks boundary scores.
        let rand_set = classification_set(&probs, 0.65, Some(0.5)).unwrap();
        assert_eq!(rand_set.labels, vec![0, 1]); // 0.5·0.5 ≤ 0.65 and 0.5+0.5·0.3 = 0.65
    }

    #[test]
    fn jitter_breaks_ties_within_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut scores = vec![1.0; 64];
        jitter_scores(&mut scores, 1e-6, &mut rng).unwrap();
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        for w in sorted.windows(2) {
            assert!(w[0] < w[1], "ties must be broken almost surely");
        }
        for &s in &scores {
            assert!((1.0..1.0 + 1e-6).contains(&s));
        }
        assert!(jitter_scores(&mut scores, 0.0, &mut rng).is_err());
        assert!(jitter_scores(&mut scores, f64::NAN, &mut rng).is_err());
    }

    #[test]
    fn calibration_coverage_sits_in_the_finite_sample_sandwich() {
        // Pure threshold-level check on iid continuous scores: with
        // n = 99 and α = 0.1, k = 90 and the hit rate over replicates is
        // k/(n+1) = 0.9 exactly in expectation, within
        // [1−α − 3·SE, 1−α + 1/(n+1) + 3·SE] with high probability.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let reps = 2000;
        let mut hits = 0usize;
        for _ in 0..reps {
            let cal: Vec<f64> = (0..99).map(|_| rng.random::<f64>()).collect();
            let (d, _) = conformal_quantile(&cal, 0.1).unwrap();
            if rng.random::<f64>() <= d {
                hits += 1;
            }
        }
        let coverage = hits as f64 / reps as f64;
        let se = (0.1 * 0.9 / reps as f64).sqrt();
        assert!(
            coverage >= 0.9 - 3.0 * se && coverage <= 0.9 + 1.0 / 100.0 + 3.0 * se,
            "coverage {coverage} escaped the sandwich"
        );
    }

    fn line_dataset(n: usize) -> NodeDataset {
        // Exactly linear response on a path graph; thirds split.
        let graph = Graph::from_edges(
            n,
            &(0..n - 1).map(|i| (i, i + 1, 1.0)).collect::<Vec<_>>(),
        )
        .unwrap();
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / n as f64);
        let y: Vec<f64> = (0..n).map(|i| 1.0 + 2.0 * x[[i, 0]]).collect();
        let mut ds =
            NodeDataset::new(graph, x, vec!["x0".into()], Response::Real(y)).unwrap();
        let third = n / 3;
        ds.set_splits(Splits {
            train: (0..third).collect(),
            calibration: (third..2 * third).collect(),
            test: (2 * third..n).collect(),
        })
        .unwrap();
        ds
    }

    #[test]
    fn split_conformal_on_noiseless_data_gives_point_intervals() {
        let ds = line_dataset(30);
        let stream = RngStream::new(9);
        let spec = ScoreSpec::new(ModelRecipe::ResidLinear);
        let test = ds.splits.test.clone();
        let out = split_conformal(&ds, &spec, 0.2, &test, &stream).unwrap();
        assert_eq!(out.predictions.len(), test.len());
        let y = ds.y.as_real().unwrap();
        for (&i, p) in test.iter().zip(&out.predictions) {
            let iv = p.as_interval().unwrap();
            assert!(iv.width() < 1e-6, "noiseless fit should give near-point intervals");
            // Exact containment of a width-~1e-16 interval is at the mercy
            // of rounding; the interval must still sit on the true value.
            let center = 0.5 * (iv.lower + iv.upper);
            assert!((center - y[i]).abs() < 1e-9);
        }
        assert!(out.record.threshold < 1e-8);
        assert_eq!(out.record.scores.len(), ds.splits.calibration.len());
    }

    #[test]
    fn split_conformal_is_deterministic_per_stream() {
        let n = 40;
        let graph = Graph::from_edges(n, &[(0, 1, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>() * 2.0 - 1.0);
        let labels: Vec<usize> =
            (0..n).map(|i| usize::from(x[[i, 0]] + 0.2 * rng.random::<f64>() > 0.0)).collect();
        let y = Response::Categorical {
            labels,
            classes: vec!["neg".into(), "pos".into()],
        };
        let mut ds = NodeDataset::new(graph, x, vec!["a".into(), "b".into()], y).unwrap();
        ds.set_splits(Splits {
            train: (0..20).collect(),
            calibration: (20..36).collect(),
            test: (36..40).collect(),
        })
        .unwrap();
        let spec = ScoreSpec::new(ModelRecipe::ClassAdaptive { randomized: true });
        let test = ds.splits.test.clone();
        let a = split_conformal(&ds, &spec, 0.3, &test, &RngStream::new(4)).unwrap();
        let b = split_conformal(&ds, &spec, 0.3, &test, &RngStream::new(4)).unwrap();
        assert_eq!(a, b);
        for p in &a.predictions {
            let s = p.as_set().unwrap();
            assert!(!s.labels.is_empty());
            assert!(s.labels.iter().all(|&l| l < 2));
        }
        // Jitter (on by default for classification) made the calibration
        // scores pairwise distinct.
        let mut sorted = a.record.scores.clone();
        sorted.sort_by(|x, y| x.total_cmp(y));
        for w in sorted.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn split_conformal_rejects_bad_setups() {
        let mut ds = line_dataset(30);
        assert!(split_conformal(
            &ds,
            &ScoreSpec::new(ModelRecipe::ResidLinear),
            1.2,
            &[29],
            &RngStream::new(0)
        )
        .is_err());
        assert!(split_conformal(
            &ds,
            &ScoreSpec::new(ModelRecipe::ResidLinear),
            0.1,
            &[99],
            &RngStream::new(0)
        )
        .is_err());
        ds.splits.calibration.clear();
        assert!(split_conformal(
            &ds,
            &ScoreSpec::new(ModelRecipe::ResidLinear),
            0.1,
            &[29],
            &RngStream::new(0)
        )
        .is_err());
    }

    #[test]
    fn extended_reals_round_trip_through_json() {
        let iv = PredictionInterval { lower: f64::NEG_INFINITY, upper: 3.5 };
        let s = serde_json::to_string(&iv).unwrap();
        assert!(s.contains("\"-inf\""));
        let back: PredictionInterval = serde_json::from_str(&s).unwrap();
        assert_eq!(iv, back);

        let rec = CalibrationRecord {
            scores: vec![0.25, 1.5],
            alpha: 0.1,
            threshold: f64::INFINITY,
            quantile_index: 4,
        };
        let s = serde_json::to_string(&rec).unwrap();
        let back: CalibrationRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(rec, back);

        let finite = PredictionInterval { lower: -1.25, upper: 2.5 };
        let back: PredictionInterval =
            serde_json::from_str(&serde_json::to_string(&finite).unwrap()).unwrap();
        assert_eq!(finite, back);
    }

    #[test]
    fn recipes_serialize_with_method_tags() {
        let spec = ScoreSpec::new(ModelRecipe::CdfKernel {
            kernel: KernelSpec::Gaussian,
            bandwidth: BandwidthChoice::Fixed(0.5),
        });
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"method\":\"cdf_kernel\""), "{json}");
        let back: ScoreSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);

        // Terse configs work: method name alone, defaults fill the rest.
        let from_toml: ScoreSpec =
            toml::from_str("method = \"resid_flexible\"").unwrap();
        assert_eq!(from_toml.recipe.method_name(), "resid_flexible");
        assert_eq!(from_toml.jitter, JitterChoice::Default);
        match from_toml.recipe {
            ModelRecipe::ResidFlexible { kernel, bandwidth } => {
                assert_eq!(kernel, KernelSpec::Gaussian);
                assert_eq!(bandwidth, BandwidthChoice::default());
            }
            other => panic!("unexpected recipe {other:?}"),
        }
    }
}
