//! Generate a network-autoregressive response and recover its coefficients.
//!
//! The response solves Y = ρBY + Xβ + X̄β̄ + ε exactly, where B holds
//! row-normalized neighbor weights and X̄ the neighborhood averages of X; a
//! node's outcome therefore mixes covariates from its entire component.
//! Regressing Y on [X, X̄, Ỹ] — own covariates, neighborhood averages, and
//! the weighted neighbor response — approximately recovers (β, β̄, ρ).
//! Ỹ = BY is correlated with ε, so least squares carries a simultaneity
//! bias; the fit is aimed at prediction, where that bias is harmless, not
//! at structural inference.

use ndarray::Array2;
use netconform::covariates::{neighbor_weighted_response, neighborhood_average, Fallback};
use netconform::graphgen::{
    gaussian_latent_space_probs, generate_sar_response, sample_bernoulli_graph, SarModelSpec,
    WeightRule,
};
use netconform::regress::fit_ols;
use netconform::{Purpose, Result, RngStream};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<()> {
    let n = 600;
    let stream = RngStream::new(31);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    // Latent positions drive the graph; covariates are independent noise.
    // Keep the graph sparse (mean degree ≈ 20): on a dense graph every
    // neighborhood average collapses toward the global mean, and the
    // near-collinear design makes the coefficients unidentifiable even
    // though predictions stay fine.
    let mut rng = stream.rng(Purpose::LatentPositions);
    let zeta: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let graph = sample_bernoulli_graph(gaussian_latent_space_probs(&zeta, 0.05)?.view(), &stream)?;

    let mut rng = stream.rng(Purpose::Covariates);
    let x = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>() * 2.0 - 1.0);

    let spec = SarModelSpec {
        beta_x: vec![4.0, 5.0],
        beta_xbar: vec![2.0, 3.0],
        rho: 0.7,
        noise_sd: 1.0,
        weight_rule: WeightRule::OneHop,
    };
    let y = generate_sar_response(&graph, x.view(), &spec, &stream)?;

    // Rebuild the structural regressors the generator used.
    let xbar = neighborhood_average(&graph, x.view(), Fallback::Zero)?;
    let ytilde = neighbor_weighted_response(&graph, &y, &spec.weight_rule, &[], Fallback::Zero)?;
    let design = Array2::from_shape_fn((n, 5), |(i, c)| match c {
        0 | 1 => x[[i, c]],
        2 | 3 => xbar[[i, c - 2]],
        _ => ytilde[i],
    });
    let model = fit_ols(design.view(), &y)?;

    println!("n = {n}, mean degree = {:.1}", 2.0 * graph.num_edges() as f64 / n as f64);
    println!("{:>12} {:>8} {:>10}", "coefficient", "truth", "estimate");
    let truth = [4.0, 5.0, 2.0, 3.0, 0.7];
    let names = ["x1", "x2", "x1_bar", "x2_bar", "y_tilde"];
    for ((name, t), est) in names.iter().zip(truth).zip(&model.coefficients) {
        println!("{name:>12} {t:>8.2} {est:>10.3}");
    }
    println!("{:>12} {:>8.2} {:>10.3}", "intercept", 0.0, model.intercept);
    println!("residual sd = {:.3} (noise sd was {})", model.residual_sd, spec.noise_sd);
    println!("(own-covariate coefficients recover cleanly; the network terms absorb");
    println!(" each other's simultaneity bias, yet the fit predicts well — which is");
    println!(" all conformal calibration asks of it)");
    Ok(())
}
