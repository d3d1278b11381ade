//! Predictive models wrapped by conformal calibration.
//!
//! Linear and logistic regression supply point predictions and class
//! probabilities; PCA compresses wide covariate blocks; and the kernel
//! conditional-CDF regressor estimates
//!
//! ```text
//! F̂(y | x, z) = Σ_i K((‖X_i − x‖ + ‖Ẑ_i − z‖)/h) · 1(Y_i ≤ y)
//!               ───────────────────────────────────────────────
//!               Σ_i K((‖X_i − x‖ + ‖Ẑ_i − z‖)/h)
//! ```
//!
//! whose distance to 1/2 is a nonconformity score that adapts to
//! heteroscedastic noise. Bandwidths are chosen by K-fold cross-validation
//! under a Brier-type loss on the conditional CDF (squared-error loss for the
//! kernel mean), with fold assignment derived from a canonical sort of the
//! data so that relabeling rows cannot change the selection.

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::conformal::PredictionInterval;
use crate::error::{Error, Result};
use crate::linalg;

/// Fitted linear regression with a residual scale for the Gaussian
/// comparator interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// σ̂ = √(RSS/(n − p − 1)); zero when the fit interpolates.
    pub residual_sd: f64,
}

impl LinearModel {
    /// Point prediction `intercept + ⟨coefficients, x⟩`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict_linear(self, x)
    }
}

/// Fitted logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// False when the gradient never reached sup-norm ≤ 1e-8 (iteration cap
    /// or separation); predictions stay valid — conformal calibration does
    /// not require a converged fit.
    pub converged: bool,
    pub iterations: usize,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Linear predictors are clamped to this magnitude when producing
/// probabilities, bounding fitted probabilities away from 0 and 1 even under
/// perfect separation.
const LOGIT_CLAMP: f64 = 30.0;

impl LogisticModel {
    /// Class-1 probability; always strictly inside (0, 1).
    pub fn predict_prob(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::Parameter(format!(
                "input length {} does not match {} coefficients",
                x.len(),
                self.coefficients.len()
            )));
        }
        let eta: f64 =
            self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>();
        Ok(sigmoid(eta.clamp(-LOGIT_CLAMP, LOGIT_CLAMP)))
    }
}

/// Prepend an intercept column of ones.
fn with_intercept(design: ArrayView2<f64>) -> Array2<f64> {
    let (n, p) = design.dim();
    let mut d = Array2::ones((n, p + 1));
    for i in 0..n {
        for j in 0..p {
            d[[i, j + 1]] = design[[i, j]];
        }
    }
    d
}

fn dependent_column_names(cols: &[usize]) -> String {
    cols.iter()
        .map(|&c| if c == 0 { "intercept".to_string() } else { format!("x{}", c - 1) })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Ordinary least squares with an implicit intercept.
///
/// `design` holds the covariates only (no column of ones). The residual
/// scale uses `n − p − 1` degrees of freedom and is 0 when the system
/// interpolates exactly (`n = p + 1`).
pub fn fit_ols(design: ArrayView2<f64>, y: &[f64]) -> Result<LinearModel> {
    let (n, p) = design.dim();
    if y.len() != n {
        return Err(Error::Parameter(format!(
            "response length {} does not match {n} rows",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::Parameter(format!(
            "need more observations than covariates, got n={n}, p={p}"
        )));
    }
    let d = with_intercept(design);
    let fit = linalg::lstsq(d.view(), y, 1e-10)?;
    if fit.rank < p + 1 {
        return Err(Error::Fit(format!(
            "design is rank deficient (rank {} of {}); dependent columns: {}",
            fit.rank,
            p + 1,
            dependent_column_names(&fit.dependent_columns)
        )));
    }
    let mut rss = 0.0;
    for i in 0..n {
        let pred: f64 = d.row(i).iter().zip(&fit.solution).map(|(a, b)| a * b).sum();
        rss += (y[i] - pred).powi(2);
    }
    let df = n - p - 1;
    let residual_sd = if df == 0 { 0.0 } else { (rss / df as f64).sqrt() };
    Ok(LinearModel {
        intercept: fit.solution[0],
        coefficients: fit.solution[1..].to_vec(),
        residual_sd,
    })
}

/// Point prediction `intercept + ⟨coefficients, x⟩`.
pub fn predict_linear(model: &LinearModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.coefficients.len() {
        return Err(Error::Parameter(format!(
            "input length {} does not match {} coefficients",
            x.len(),
            model.coefficients.len()
        )));
    }
    Ok(model.intercept + model.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>())
}

/// Gaussian comparator interval
/// `[μ̂(x) − z_{1−α/2}·σ̂, μ̂(x) + z_{1−α/2}·σ̂]`. Valid only when the noise
/// really is normal with constant variance — the baseline conformal methods
/// are benchmarked against.
pub fn parametric_normal_interval(
    model: &LinearModel,
    x: &[f64],
    alpha: f64,
) -> Result<PredictionInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha {alpha} outside (0,1)")));
    }
    let mu = predict_linear(model, x)?;
    let z = statrs::distribution::Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - alpha / 2.0);
    let half = z * model.residual_sd;
    Ok(PredictionInterval { lower: mu - half, upper: mu + half })
}

/// Logistic regression by iteratively reweighted least squares.
///
/// Stops when the log-likelihood gradient has sup-norm ≤ 1e-8 or after 100
/// iterations. Under perfect separation the working linear predictor is
/// clamped at ±30, keeping parameters finite; the model is then returned
/// with `converged = false` (the gradient criterion only counts when every
/// training predictor is strictly inside the clamp) rather than an error.
pub fn fit_logistic(design: ArrayView2<f64>, labels: &[bool]) -> Result<LogisticModel> {
    let (n, p) = design.dim();
    if labels.len() != n {
        return Err(Error::Parameter(format!(
            "label length {} does not match {n} rows",
            labels.len()
        )));
    }
    if n <= p {
        return Err(Error::Parameter(format!(
            "need more observations than covariates, got n={n}, p={p}"
        )));
    }
    let ones = labels.iter().filter(|&&l| l).count();
    if ones == 0 || ones == n {
        return Err(Error::Fit("labels contain a single class".into()));
    }
    let d = with_intercept(design);
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut beta = vec![0.0; p + 1];
    let mut converged = false;
    let mut iterations = 0usize;
    for _ in 0..100 {
        let eta: Vec<f64> = (0..n)
            .map(|i| d.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum())
            .collect();
        // Convergence is judged on the exact likelihood gradient — but a
        // gradient that vanishes only because predictors sit at the clamp
        // is the signature of separation, not of an interior optimum.
        let grad_sup = (0..=p)
            .map(|j| {
                (0..n)
                    .map(|i| d[[i, j]] * (y[i] - sigmoid(eta[i])))
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0f64, f64::max);
        if grad_sup <= 1e-8 {
            converged = eta.iter().all(|e| e.abs() < LOGIT_CLAMP);
            break;
        }
        iterations += 1;
        // The working response uses the clamped predictor so separation
        // cannot push the parameters to infinity.
        let mut a = Array2::zeros((n, p + 1));
        let mut b = vec![0.0; n];
        for i in 0..n {
            let eta_c = eta[i].clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            let mu = sigmoid(eta_c);
            let w = (mu * (1.0 - mu)).max(1e-10);
            let sw = w.sqrt();
            let z = eta_c + (y[i] - mu) / w;
            for j in 0..=p {
                a[[i, j]] = sw * d[[i, j]];
            }
            b[i] = sw * z;
        }
        let fit = linalg::lstsq(a.view(), &b, 1e-12)?;
        if fit.rank < p + 1 {
            return Err(Error::Fit(format!(
                "working design is rank deficient; dependent columns: {}",
                dependent_column_names(&fit.dependent_columns)
            )));
        }
        beta = fit.solution;
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("logistic parameters diverged".into()));
    }
    Ok(LogisticModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        converged,
        iterations,
    })
}

/// Principal components: column-center, eigendecompose the sample
/// covariance, and return the top-`k` scores and loadings (descending
/// variance, deterministic sign convention).
pub fn pca_top_k(x: ArrayView2<f64>, k: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, m) = x.dim();
    if k > n.min(m) {
        return Err(Error::Parameter(format!(
            "k = {k} exceeds min(n, m) = {}",
            n.min(m)
        )));
    }
    if n < 2 {
        return Err(Error::Parameter("PCA needs at least two rows".into()));
    }
    let mut centered = x.to_owned();
    for c in 0..m {
        let mean = centered.column(c).sum() / n as f64;
        for i in 0..n {
            centered[[i, c]] -= mean;
        }
    }
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let (_, vecs) = linalg::eigh_range(cov.view(), m - k, m - 1)?;
    // Ascending from the solver; we want descending variance.
    let mut loadings = Array2::zeros((m, k));
    for r in 0..k {
        for i in 0..m {
            loadings[[i, r]] = vecs[[i, k - 1 - r]];
        }
    }
    for r in 0..k {
        crate::covariates::apply_sign_convention(loadings.column_mut(r));
    }
    let scores = centered.dot(&loadings);
    Ok((scores, loadings))
}

/// Kernel profile `H` applied to scaled distances. All profiles are
/// decreasing on `[0, ∞)` with `H(0) = 1`; the Gaussian and Epanechnikov
/// profiles are Lipschitz, the boxcar is not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    /// `H(t) = exp(−t²/2)` — positive everywhere, light tails.
    #[default]
    Gaussian,
    /// `H(t) = max(0, 1 − t²)`.
    Epanechnikov,
    /// `H(t) = 1(t ≤ 1)`.
    Boxcar,
}

impl KernelSpec {
    /// Profile value `H(t)` for `t ≥ 0`.
    pub fn weight_at(&self, t: f64) -> f64 {
        match self {
            KernelSpec::Gaussian => (-t * t / 2.0).exp(),
            KernelSpec::Epanechnikov => (1.0 - t * t).max(0.0),
            KernelSpec::Boxcar => {
                if t <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Upper bound on `|H'|`, where one exists.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self {
            KernelSpec::Gaussian => Some((-0.5f64).exp()), // |H'| peaks at t = 1
            KernelSpec::Epanechnikov => Some(2.0),
            KernelSpec::Boxcar => None,
        }
    }

    /// Kernel weights for scaled distances, or `None` when every weight is
    /// zero (outside a finite support, or Gaussian underflow).
    ///
    /// Gaussian weights are computed relative to the closest point,
    /// `exp(−(t_i² − t_min²)/2)`, which leaves the weighted-CDF ratio
    /// unchanged while keeping the arithmetic away from the subnormal range;
    /// terms more than e⁻⁶⁰ below the leading weight are dropped (they are
    /// smaller than one part in 10²⁶ of the total).
    fn weights(&self, ts: &[f64]) -> Option<Vec<f64>> {
        let tmin = ts.iter().copied().fold(f64::INFINITY, f64::min);
        if self.weight_at(tmin) == 0.0 {
            return None;
        }
        match self {
            KernelSpec::Gaussian => {
                let base = tmin * tmin;
                Some(
                    ts.iter()
                        .map(|&t| {
                            let e = (t * t - base) / 2.0;
                            if e > 60.0 {
                                0.0
                            } else {
                                (-e).exp()
                            }
                        })
                        .collect(),
                )
            }
            _ => Some(ts.iter().map(|&t| self.weight_at(t)).collect()),
        }
    }
}

/// Summed-norm distances `‖X_i − x‖ + ‖Ẑ_i − z‖` from one query to every
/// training row.
fn summed_norm_distances(
    xt: ArrayView2<f64>,
    zt: ArrayView2<f64>,
    x: &[f64],
    z: &[f64],
) -> Vec<f64> {
    let n = xt.nrows();
    (0..n)
        .map(|i| {
            let dx: f64 = xt
                .row(i)
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let dz: f64 = zt
                .row(i)
                .iter()
                .zip(z)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dx + dz
        })
        .collect()
}

/// Cumulative weighted CDF along responses sorted ascending.
///
/// `ys_sorted` and `weights_by_y` run in response-sorted order. Within each
/// tie block the weights are added in value order, and the normalizer is the
/// final running total, so the block-end values — the only entries consumers
/// read — are invariant to row relabeling and the last entry is exactly 1.
/// Returns `None` when the total weight is zero.
fn cumulative_cdf(ys_sorted: &[f64], weights_by_y: &[f64]) -> Option<Vec<f64>> {
    let n = ys_sorted.len();
    let mut cum = vec![0.0; n];
    let mut running = 0.0;
    let mut start = 0usize;
    while start < n {
        let mut end = start + 1;
        while end < n && ys_sorted[end] == ys_sorted[start] {
            end += 1;
        }
        let mut block: Vec<f64> = weights_by_y[start..end].to_vec();
        block.sort_unstable_by(f64::total_cmp);
        for w in block {
            running += w;
        }
        for slot in cum.iter_mut().take(end).skip(start) {
            *slot = running;
        }
        start = end;
    }
    if running <= 0.0 {
        return None;
    }
    for v in cum.iter_mut() {
        *v /= running;
    }
    // The final entry is running/running; make the saturation exact.
    cum[n - 1] = 1.0;
    Some(cum)
}

/// Kernel estimator of the conditional CDF `F̂(y | x, z)` built from
/// training triples `(Y_i, X_i, Ẑ_i)`.
#[derive(Debug, Clone)]
pub struct ConditionalCdfModel {
    x: Array2<f64>,
    z: Array2<f64>,
    /// Responses in original row order.
    y: Vec<f64>,
    /// Row indices sorting `y` ascending.
    order: Vec<usize>,
    /// `y` in ascending order (cache of `y[order]`).
    ys_sorted: Vec<f64>,
    kernel: KernelSpec,
    bandwidth: f64,
}

impl ConditionalCdfModel {
    pub fn new(
        x: Array2<f64>,
        z: Array2<f64>,
        y: Vec<f64>,
        kernel: KernelSpec,
        bandwidth: f64,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Parameter("conditional CDF needs training data".into()));
        }
        if x.nrows() != n || z.nrows() != n {
            return Err(Error::Parameter(format!(
                "covariate rows ({}, {}) do not match {n} responses",
                x.nrows(),
                z.nrows()
            )));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Parameter(format!("bandwidth {bandwidth} must be > 0")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));
        let ys_sorted: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        Ok(ConditionalCdfModel { x, z, y, order, ys_sorted, kernel, bandwidth })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty training sets
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    /// Training responses in ascending order (the response grid on which the
    /// estimated CDF steps).
    pub fn sorted_responses(&self) -> &[f64] {
        &self.ys_sorted
    }

    /// The full step function `F̂(· | x, z)`: cumulative values parallel to
    /// [`ConditionalCdfModel::sorted_responses`]. Falls back to the
    /// unconditional empirical CDF when every kernel weight underflows.
    pub fn cdf_curve(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        self.check_query(x, z)?;
        let ts: Vec<f64> = summed_norm_distances(self.x.view(), self.z.view(), x, z)
            .into_iter()
            .map(|d| d / self.bandwidth)
            .collect();
        let n = self.len();
        match self.kernel.weights(&ts) {
            Some(w) => {
                let weights_by_y: Vec<f64> = self.order.iter().map(|&i| w[i]).collect();
                match cumulative_cdf(&self.ys_sorted, &weights_by_y) {
                    Some(cum) => Ok(cum),
                    None => Ok(self.unconditional_cum()),
                }
            }
            None => Ok(self.unconditional_cum()),
        }
        .map(|cum| {
            debug_assert_eq!(cum.len(), n);
            cum
        })
    }

    fn unconditional_cum(&self) -> Vec<f64> {
        let n = self.len();
        let mut cum: Vec<f64> = (0..n).map(|k| (k + 1) as f64 / n as f64).collect();
        // Tie blocks share the block-end value.
        let mut k = n;
        while k > 1 {
            k -= 1;
            if self.ys_sorted[k - 1] == self.ys_sorted[k] {
                cum[k - 1] = cum[k];
            }
        }
        cum
    }

    fn check_query(&self, x: &[f64], z: &[f64]) -> Result<()> {
        if x.len() != self.x.ncols() || z.len() != self.z.ncols() {
            return Err(Error::Parameter(format!(
                "query dimensions ({}, {}) do not match training ({}, {})",
                x.len(),
                z.len(),
                self.x.ncols(),
                self.z.ncols()
            )));
        }
        Ok(())
    }
}

/// Evaluate `F̂(y | x, z)`: the weighted fraction of training responses at or
/// below `y`. Exactly 0 below the smallest training response and exactly 1
/// from the largest onward; nondecreasing in `y` by construction.
pub fn kernel_cdf_eval(model: &ConditionalCdfModel, y: f64, x: &[f64], z: &[f64]) -> Result<f64> {
    let cum = model.cdf_curve(x, z)?;
    let pos = model.ys_sorted.partition_point(|&v| v <= y);
    if pos == 0 {
        Ok(0.0)
    } else {
        Ok(cum[pos - 1])
    }
}

/// Canonical row order: sort by `(y, x row, z row)` under the IEEE total
/// order. Relabeling the rows leaves this order (up to exchanges of fully
/// identical triples) and everything derived from it unchanged.
fn canonical_order(x: ArrayView2<f64>, z: ArrayView2<f64>, y: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| {
        y[a].total_cmp(&y[b])
            .then_with(|| {
                for c in 0..x.ncols() {
                    let o = x[[a, c]].total_cmp(&x[[b, c]]);
                    if o != std::cmp::Ordering::Equal {
                        return o;
                    }
                }
                std::cmp::Ordering::Equal
            })
            .then_with(|| {
                for c in 0..z.ncols() {
                    let o = z[[a, c]].total_cmp(&z[[b, c]]);
                    if o != std::cmp::Ordering::Equal {
                        return o;
                    }
                }
                std::cmp::Ordering::Equal
            })
    });
    idx
}

/// Balanced fold labels laid along the canonical order, shuffled by `rng`:
/// `fold_of[row]` for every row.
fn fold_assignment(
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    y: &[f64],
    folds: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let n = y.len();
    let mut slots: Vec<usize> = (0..n).map(|k| k % folds).collect();
    slots.shuffle(rng);
    let order = canonical_order(x, z, y);
    let mut fold_of = vec![0usize; n];
    for (rank, &row) in order.iter().enumerate() {
        fold_of[row] = slots[rank];
    }
    fold_of
}

/// Evaluation levels: the sorted set of distinct responses, thinned to at
/// most 200 evenly spaced values.
fn evaluation_levels(y: &[f64]) -> Vec<f64> {
    let mut levels = y.to_vec();
    levels.sort_unstable_by(f64::total_cmp);
    levels.dedup();
    let m = levels.len();
    if m <= 200 {
        return levels;
    }
    (0..200).map(|j| levels[j * (m - 1) / 199]).collect()
}

/// Median of the pairwise summed-norm distances `‖X_i−X_j‖ + ‖Ẑ_i−Ẑ_j‖`.
pub fn median_pairwise_distance(x: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<f64> {
    let n = x.nrows();
    if z.nrows() != n {
        return Err(Error::Parameter("row count mismatch".into()));
    }
    if n < 2 {
        return Err(Error::Parameter("need at least two rows".into()));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx: f64 = (0..x.ncols())
                .map(|c| (x[[i, c]] - x[[j, c]]).powi(2))
                .sum::<f64>()
                .sqrt();
            let dz: f64 = (0..z.ncols())
                .map(|c| (z[[i, c]] - z[[j, c]]).powi(2))
                .sum::<f64>()
                .sqrt();
            dists.push(dx + dz);
        }
    }
    dists.sort_unstable_by(f64::total_cmp);
    let m = dists.len();
    Ok(if m % 2 == 1 { dists[m / 2] } else { 0.5 * (dists[m / 2 - 1] + dists[m / 2]) })
}

/// Default bandwidth grid: 15 logarithmically spaced values spanning
/// `[0.05, 2] ×` the median pairwise summed-norm distance.
pub fn default_bandwidth_grid(x: ArrayView2<f64>, z: ArrayView2<f64>) -> Result<Vec<f64>> {
    let med = median_pairwise_distance(x, z)?;
    if med <= 0.0 {
        return Err(Error::Degenerate(
            "all rows coincide; pairwise distances give no bandwidth scale".into(),
        ));
    }
    let (lo, hi) = (0.05 * med, 2.0 * med);
    let ratio = (hi / lo).ln();
    Ok((0..15).map(|k| lo * (ratio * k as f64 / 14.0).exp()).collect())
}

/// Shared CV loop: returns, for each bandwidth, the mean held-out loss and
/// whether every evaluation for that bandwidth was degenerate.
fn cross_validate(
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    y: &[f64],
    grid: &[f64],
    folds: usize,
    rng: &mut impl Rng,
    // loss of one held-out point given (training arrays, distances-to-train
    // scaled by h, held-out response); None marks a degenerate evaluation.
    point_loss: impl Fn(&[f64], &[f64], f64, KernelSpec, f64) -> Option<f64>,
    kernel: KernelSpec,
) -> Result<Vec<(f64, bool)>> {
    let n = y.len();
    if grid.is_empty() {
        return Err(Error::Parameter("bandwidth grid is empty".into()));
    }
    for &h in grid {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Parameter(format!("grid bandwidth {h} must be > 0")));
        }
    }
    if folds < 2 {
        return Err(Error::Parameter("cross-validation needs at least 2 folds".into()));
    }
    if folds > n {
        return Err(Error::Parameter(format!("{folds} folds exceed {n} rows")));
    }
    let fold_of = fold_assignment(x, z, y, folds, rng);
    let order = canonical_order(x, z, y);

    // point_losses[h_index][canonical rank] — summed in rank order at the end
    // so the total is invariant to row relabeling.
    let mut point_losses = vec![vec![f64::NAN; n]; grid.len()];
    let mut degenerate = vec![0usize; grid.len()];

    for fold in 0..folds {
        let train_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let train_y: Vec<f64> = train_rows.iter().map(|&i| y[i]).collect();
        let mut train_order: Vec<usize> = (0..train_rows.len()).collect();
        train_order.sort_by(|&a, &b| train_y[a].total_cmp(&train_y[b]));
        let train_y_sorted: Vec<f64> = train_order.iter().map(|&k| train_y[k]).collect();

        for (rank, &i) in order.iter().enumerate() {
            if fold_of[i] != fold {
                continue;
            }
            let xq: Vec<f64> = x.row(i).to_vec();
            let zq: Vec<f64> = z.row(i).to_vec();
            let dists: Vec<f64> = train_rows
                .iter()
                .map(|&j| {
                    summed_norm_distances(
                        x.select(ndarray::Axis(0), &[j]).view(),
                        z.select(ndarray::Axis(0), &[j]).view(),
                        &xq,
                        &zq,
                    )[0]
                })
                .collect();
            let dists_by_y: Vec<f64> = train_order.iter().map(|&k| dists[k]).collect();
            for (hi, &h) in grid.iter().enumerate() {
                match point_loss(&train_y_sorted, &dists_by_y, h, kernel, y[i]) {
                    Some(loss) => point_losses[hi][rank] = loss,
                    None => {
                        degenerate[hi] += 1;
                        point_losses[hi][rank] = f64::NAN;
                    }
                }
            }
        }
    }

    Ok((0..grid.len())
        .map(|hi| {
            let all_degenerate = degenerate[hi] == n;
            let mean = if all_degenerate {
                f64::INFINITY
            } else {
                let vals: Vec<f64> =
                    point_losses[hi].iter().copied().filter(|v| !v.is_nan()).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            };
            (mean, all_degenerate)
        })
        .collect())
}

/// Pick the best bandwidth from the per-grid losses; ties go to the larger
/// bandwidth. Errors when every bandwidth was degenerate.
fn select_from_losses(grid: &[f64], losses: &[(f64, bool)]) -> Result<f64> {
    let mut pairs: Vec<(f64, f64, bool)> =
        grid.iter().zip(losses).map(|(&h, &(l, d))| (h, l, d)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best: Option<(f64, f64)> = None;
    for (h, loss, degenerate) in pairs {
        if degenerate {
            continue;
        }
        best = match best {
            // `<=` keeps the later (larger) bandwidth on ties.
            Some((bh, bl)) if loss > bl => Some((bh, bl)),
            _ => Some((h, loss)),
        };
    }
    best.map(|(h, _)| h).ok_or_else(|| {
        Error::Selection("every candidate bandwidth produced a degenerate fit".into())
    })
}

/// Brier-type loss of one held-out point for the conditional-CDF model:
/// mean over evaluation levels of `(1(Y_i ≤ y) − F̂(y))²`.
fn cdf_point_loss(
    train_y_sorted: &[f64],
    dists_by_y: &[f64],
    h: f64,
    kernel: KernelSpec,
    levels: &[f64],
    yi: f64,
) -> Option<f64> {
    let ts: Vec<f64> = dists_by_y.iter().map(|&d| d / h).collect();
    let weights = kernel.weights(&ts)?;
    let cum = cumulative_cdf(train_y_sorted, &weights)?;
    let mut total = 0.0;
    for &level in levels {
        let pos = train_y_sorted.partition_point(|&v| v <= level);
        let fhat = if pos == 0 { 0.0 } else { cum[pos - 1] };
        let ind = if yi <= level { 1.0 } else { 0.0 };
        total += (ind - fhat) * (ind - fhat);
    }
    Some(total / levels.len() as f64)
}

/// Cross-validated bandwidth for the kernel conditional CDF.
///
/// Minimizes the K-fold mean Brier loss over evaluation levels drawn from
/// the sorted distinct responses (≤ 200 of them); ties break toward the
/// larger bandwidth. Fold assignment is derived from the canonical row order
/// and `rng`, so the selection is invariant to relabeling the rows when the
/// rng is seeded identically.
pub fn select_bandwidth_cv(
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    y: &[f64],
    kernel: KernelSpec,
    grid: &[f64],
    folds: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let levels = evaluation_levels(y);
    let losses = cross_validate(
        x,
        z,
        y,
        grid,
        folds,
        rng,
        |train_y_sorted, dists_by_y, h, kernel, yi| {
            cdf_point_loss(train_y_sorted, dists_by_y, h, kernel, &levels, yi)
        },
        kernel,
    )?;
    select_from_losses(grid, &losses)
}

/// Nadaraya–Watson regression `μ̂(x, z) = Σ w_i Y_i / Σ w_i` on the summed
/// norms, with the same kernels and underflow fallback (to the global
/// response mean) as the conditional-CDF model.
#[derive(Debug, Clone)]
pub struct KernelMeanModel {
    x: Array2<f64>,
    z: Array2<f64>,
    y: Vec<f64>,
    kernel: KernelSpec,
    bandwidth: f64,
}

impl KernelMeanModel {
    pub fn new(
        x: Array2<f64>,
        z: Array2<f64>,
        y: Vec<f64>,
        kernel: KernelSpec,
        bandwidth: f64,
    ) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Parameter("kernel mean needs training data".into()));
        }
        if x.nrows() != y.len() || z.nrows() != y.len() {
            return Err(Error::Parameter("training dimension mismatch".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Parameter(format!("bandwidth {bandwidth} must be > 0")));
        }
        Ok(KernelMeanModel { x, z, y, kernel, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Weighted response mean at a query point.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if x.len() != self.x.ncols() || z.len() != self.z.ncols() {
            return Err(Error::Parameter("query dimension mismatch".into()));
        }
        let ts: Vec<f64> = summed_norm_distances(self.x.view(), self.z.view(), x, z)
            .into_iter()
            .map(|d| d / self.bandwidth)
            .collect();
        match self.kernel.weights(&ts) {
            Some(w) => {
                let den: f64 = w.iter().sum();
                if den > 0.0 {
                    let num: f64 = w.iter().zip(&self.y).map(|(wi, yi)| wi * yi).sum();
                    Ok(num / den)
                } else {
                    Ok(self.global_mean())
                }
            }
            None => Ok(self.global_mean()),
        }
    }

    fn global_mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }
}

/// Cross-validated bandwidth for the kernel mean, minimizing K-fold
/// held-out squared error (same fold construction and tie rule as
/// [`select_bandwidth_cv`]).
pub fn select_mean_bandwidth_cv(
    x: ArrayView2<f64>,
    z: ArrayView2<f64>,
    y: &[f64],
    kernel: KernelSpec,
    grid: &[f64],
    folds: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let losses = cross_validate(
        x,
        z,
        y,
        grid,
        folds,
        rng,
        |train_y_sorted, dists_by_y, h, kernel, yi| {
            let ts: Vec<f64> = dists_by_y.iter().map(|&d| d / h).collect();
            let w = kernel.weights(&ts)?;
            let den: f64 = w.iter().sum();
            if den <= 0.0 {
                return None;
            }
            let num: f64 = w.iter().zip(train_y_sorted).map(|(wi, yi)| wi * yi).sum();
            let diff = yi - num / den;
            Some(diff * diff)
        },
        kernel,
    )?;
    select_from_losses(grid, &losses)
}

/// Nadaraya–Watson smooth of a binary indicator over a one-dimensional grid
/// (Gaussian profile). The entry for a grid point is `None` when every
/// kernel weight underflows there — an effectively empty neighborhood.
pub fn kernel_smoother_curve(
    xs: &[f64],
    hits: &[bool],
    grid: &[f64],
    bandwidth: f64,
) -> Result<Vec<Option<f64>>> {
    if xs.len() != hits.len() {
        return Err(Error::Parameter(format!(
            "{} positions vs {} indicators",
            xs.len(),
            hits.len()
        )));
    }
    if xs.is_empty() {
        return Err(Error::Parameter("smoother needs data".into()));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Parameter(format!("bandwidth {bandwidth} must be > 0")));
    }
    let kernel = KernelSpec::Gaussian;
    Ok(grid
        .iter()
        .map(|&g| {
            let ts: Vec<f64> = xs.iter().map(|&v| (v - g).abs() / bandwidth).collect();
            kernel.weights(&ts).map(|w| {
                let den: f64 = w.iter().sum();
                let num: f64 =
                    w.iter().zip(hits).map(|(wi, &h)| if h { *wi } else { 0.0 }).sum();
                (num / den).clamp(0.0, 1.0)
            })
        })
        .collect())
}
