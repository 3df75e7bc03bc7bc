use latreg::neural::MlpParams;
use latreg::training::{composite_loss, composite_loss_and_gradient, init_autoencoder, TrainConfig};
use latreg::Parallelism;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const STEP: f64 = 1e-5;

fn problem(seed: u64) -> (Array2<f64>, Array1<f64>, MlpParams, MlpParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((20, 8), |_| StandardNormal.sample(&mut rng));
    let y = Array1::from_shape_fn(20, |i| {
        let e: f64 = StandardNormal.sample(&mut rng);
        x[[i, 0]] - 0.5 * x[[i, 3]] + 0.3 * e
    });
    let (enc, dec) = init_autoencoder(8, 2, seed).unwrap();
    (x, y, enc, dec)
}

fn total(x: &Array2<f64>, y: &Array1<f64>, flat: &[f64], enc: &MlpParams, dec: &MlpParams, cfg: &TrainConfig) -> f64 {
    let mut e = enc.clone();
    let mut d = dec.clone();
    let used = e.assign_flat(flat);
    d.assign_flat(&flat[used..]);
    composite_loss(x.view(), y.view(), &e, &d, cfg, Parallelism::Sequential)
        .unwrap()
        .0
        .total
}

/// Largest `|analytic − numeric| / max(|analytic|, |numeric|, 1e-6)` over all
/// parameters; the floor keeps exactly-zero gradients from dividing by zero.
fn max_relative_error(cfg: &TrainConfig, seed: u64) -> f64 {
    let (x, y, enc, dec) = problem(seed);
    let (_, ge, gd) = composite_loss_and_gradient(x.view(), y.view(), &enc, &dec, cfg, Parallelism::Sequential).unwrap();
    let mut analytic = ge.to_flat();
    analytic.extend(gd.to_flat());
    let mut flat = enc.to_flat();
    flat.extend(dec.to_flat());
    let mut worst: f64 = 0.0;
    for k in 0..flat.len() {
        let orig = flat[k];
        flat[k] = orig + STEP;
        let up = total(&x, &y, &flat, &enc, &dec, cfg);
        flat[k] = orig - STEP;
        let down = total(&x, &y, &flat, &enc, &dec, cfg);
        flat[k] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

fn weights(rec: f64, pred: f64, reg: f64) -> TrainConfig {
    TrainConfig {
        lambda_rec: rec,
        lambda_pred: pred,
        lambda_reg: reg,
        d: 2,
        ..TrainConfig::default()
    }
}

#[test]
fn reconstruction_term_matches_central_differences() {
    let e = max_relative_error(&weights(1.0, 0.0, 0.0), 1);
    assert!(e < 1e-4, "max relative error {e}");
}

#[test]
fn prediction_term_matches_central_differences() {
    let e = max_relative_error(&weights(0.0, 1.0, 0.0), 2);
    assert!(e < 1e-4, "max relative error {e}");
}

#[test]
fn correlation_term_matches_central_differences() {
    let e = max_relative_error(&weights(0.0, 0.0, 1.0), 3);
    assert!(e < 1e-4, "max relative error {e}");
}

#[test]
fn composite_matches_central_differences() {
    for seed in [4, 5] {
        let e = max_relative_error(&weights(1.0, 0.06, 0.3), seed);
        assert!(e < 1e-4, "seed {seed}: max relative error {e}");
    }
}

#[test]
fn gradient_is_linear_in_term_weights() {
    let (x, y, enc, dec) = problem(6);
    let grad = |cfg: TrainConfig| {
        let (_, ge, gd) = composite_loss_and_gradient(x.view(), y.view(), &enc, &dec, &cfg, Parallelism::Sequential).unwrap();
        let mut g = ge.to_flat();
        g.extend(gd.to_flat());
        g
    };
    let all = grad(weights(1.0, 0.06, 0.3));
    let parts = [grad(weights(1.0, 0.0, 0.0)), grad(weights(0.0, 0.06, 0.0)), grad(weights(0.0, 0.0, 0.3))];
    for k in 0..all.len() {
        let sum: f64 = parts.iter().map(|p| p[k]).sum();
        assert!((all[k] - sum).abs() < 1e-10, "param {k}: {} vs {sum}", all[k]);
    }
}

#[test]
fn saturated_inputs_stay_finite() {
    let (x, y, enc, dec) = problem(7);
    let x = x * 1e3;
    let (c, ge, gd) =
        composite_loss_and_gradient(x.view(), y.view(), &enc, &dec, &weights(1.0, 0.0, 0.3), Parallelism::Sequential).unwrap();
    assert!(c.total.is_finite());
    assert!(ge.all_finite() && gd.all_finite());
}
