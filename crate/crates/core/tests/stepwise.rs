use latreg::benchmarks::{stepwise, StepAction, StepwiseConfig};
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn cohort(seed: u64) -> (Array2<f64>, Array1<f64>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((200, 42), |_| StandardNormal.sample(&mut rng));
    let noise = Normal::new(0.0, 0.5).unwrap();
    let y = Array1::from_shape_fn(200, |i| {
        let (a, b) = (x[[i, 0]], x[[i, 1]]);
        a + b + 2.0 * a * b + noise.sample(&mut rng)
    });
    let names = (1..=42).map(|j| format!("x{j}")).collect();
    (x, y, names)
}

#[test]
fn recovers_planted_interaction() {
    let cfg = StepwiseConfig {
        screening_p: 0.10,
        backward_threshold: 1.0,
        forward_threshold: 2.0,
    };
    let mut hits = 0;
    for seed in 0..5 {
        let (x, y, names) = cohort(seed);
        let m = stepwise(x.view(), y.view(), &names, &cfg).unwrap();
        if m.interactions.contains(&("x1".to_string(), "x2".to_string())) {
            hits += 1;
        }
        for step in &m.selection_trace {
            assert!(step.aic_after < step.aic_before, "{step:?}");
        }
        assert!(m.selection_trace.iter().any(|s| s.action == StepAction::Add));
        assert_eq!(m.terms.len() + 1, m.final_ols.coefficients.len());
    }
    assert!(hits >= 4, "interaction found in {hits} of 5 seeds");
}

#[test]
fn screening_threshold_one_keeps_all_columns() {
    let (x, y, names) = cohort(9);
    let cfg = StepwiseConfig { screening_p: 1.0, ..StepwiseConfig::default() };
    let m = stepwise(x.view(), y.view(), &names, &cfg).unwrap();
    assert_eq!(m.screened.len(), 42);
}
