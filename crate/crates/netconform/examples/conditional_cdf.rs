//! Conditional-CDF scores adapt interval width to heteroscedastic noise.
//!
//! The response's spread varies tenfold across the covariate range. An
//! absolute-residual score can only produce intervals of one width, so it
//! over-covers where the noise is small and under-covers where it is large —
//! while staying exactly calibrated on average. The median-distance score
//! |1/2 − F̂(y|x)| built on a kernel estimate of the conditional CDF adapts:
//! its inverted intervals are narrow in the quiet region and wide in the
//! noisy one, keeping coverage near the target within each band.

use ndarray::Array2;
use netconform::conformal::{split_conformal, ModelRecipe, ScoreSpec};
use netconform::data::{NodeDataset, Response, Splits};
use netconform::{Graph, Purpose, Result, RngStream};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<()> {
    let (n_train, n_cal, n_test) = (600, 600, 600);
    let n = n_train + n_cal + n_test;
    let alpha = 0.1;
    let stream = RngStream::new(99);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let mut rng = stream.rng(Purpose::Covariates);
    let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut rng = stream.rng(Purpose::ResponseNoise);
    let scale = |v: f64| 0.2 + 2.0 * v * v;
    let y: Vec<f64> = x
        .iter()
        .map(|&v| 4.0 + 5.0 * (3.0 * std::f64::consts::PI * v).sin() + scale(v) * normal.sample(&mut rng))
        .collect();

    // The recipes condition on [x | zhat] only; the graph plays no role
    // here, so an empty one keeps the dataset honest.
    let xmat = Array2::from_shape_vec((n, 1), x.clone())
        .expect("n values fill an n-by-1 column");
    let mut data = NodeDataset::new(Graph::empty(n), xmat, vec!["x1".into()], Response::Real(y.clone()))?;
    data.set_splits(Splits {
        train: (0..n_train).collect(),
        calibration: (n_train..n_train + n_cal).collect(),
        test: (n_train + n_cal..n).collect(),
    })?;
    let test = data.splits.test.clone();

    println!("noise sd ranges {:.2}..{:.2}; target coverage {:.2}", scale(0.0), scale(1.0), 1.0 - alpha);
    println!(
        "{:>13} {:>18} {:>18} {:>18}",
        "method", "x in [0,1/3)", "x in [1/3,2/3)", "x in [2/3,1]"
    );
    for recipe in [ModelRecipe::CdfKernel { kernel: Default::default(), bandwidth: Default::default() }, ModelRecipe::ResidLinear] {
        let name = recipe.method_name();
        let outcome = split_conformal(&data, &ScoreSpec::new(recipe), alpha, &test, &stream)?;
        // Per-tercile hit rates and widths.
        let mut hits = [0usize; 3];
        let mut widths = [0.0f64; 3];
        let mut counts = [0usize; 3];
        for (&i, pred) in test.iter().zip(&outcome.predictions) {
            let b = ((x[i] * 3.0) as usize).min(2);
            let iv = pred.as_interval().expect("regression yields intervals");
            hits[b] += usize::from(iv.contains(y[i]));
            widths[b] += iv.width();
            counts[b] += 1;
        }
        print!("{name:>13}");
        for b in 0..3 {
            print!(
                " {:>6.3} (w {:>6.2})",
                hits[b] as f64 / counts[b] as f64,
                widths[b] / counts[b] as f64
            );
        }
        println!();
    }
    println!("(both methods cover ~90% marginally; only cdf_kernel covers within each band)");
    Ok(())
}
