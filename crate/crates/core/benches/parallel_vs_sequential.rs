use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use latreg::dataio::{generate_synthetic, split_standardize, SplitSpec, SynthConfig};
use latreg::localreg::{llr_gradient, local_fit_bundle, KernelConfig};
use latreg::training::{seed_study, TrainConfig};
use latreg::Parallelism;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const MODES: [(&str, Parallelism); 2] = [
    ("sequential", Parallelism::Sequential),
    ("parallel", Parallelism::Parallel),
];

fn latent(n: usize, d: usize) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let y = Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut rng));
    (z, y)
}

fn local_fits(c: &mut Criterion) {
    let mut g = c.benchmark_group("local_fit_bundle");
    let cfg = KernelConfig::default();
    for n in [100, 400] {
        let (z, y) = latent(n, 4);
        for (name, par) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| local_fit_bundle(z.view(), y.view(), &cfg, par).unwrap())
            });
        }
    }
    g.finish();
}

fn gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("llr_gradient");
    let cfg = KernelConfig::default();
    for n in [100, 400] {
        let (z, y) = latent(n, 4);
        let bundle = local_fit_bundle(z.view(), y.view(), &cfg, Parallelism::Sequential).unwrap();
        let upstream = Array1::from_elem(n, 1.0 / n as f64);
        for (name, par) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| llr_gradient(&bundle, y.view(), &cfg, upstream.view(), par).unwrap())
            });
        }
    }
    g.finish();
}

fn study(c: &mut Criterion) {
    let synth = generate_synthetic(&SynthConfig {
        n: 120,
        p: 30,
        d_true: 3,
        noise_sd: 0.5,
        subgroups: Vec::new(),
        seed: 2,
        factor_strengths: None,
        outcome_weights: None,
        outcome_noise_sd: None,
    })
    .unwrap();
    let (train, _) = split_standardize(&synth.table, SplitSpec { train_fraction: 1.0, seed: 0 }, None).unwrap();
    let cfg = TrainConfig { epochs: 20, ..TrainConfig::default() };
    let seeds: Vec<u64> = (0..4).collect();
    let mut g = c.benchmark_group("seed_study");
    g.sample_size(10);
    for (name, par) in MODES {
        g.bench_function(name, |b| b.iter(|| seed_study(&train, None, &cfg, &seeds, par).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, local_fits, gradient, study);
criterion_main!(benches);
