use dermalight::colorimetry::RgbAlbedo;
use dermalight::neural::*;
use dermalight::space::{gen_dataset, AlbedoLut, AlbedoSource, Dataset, ParamWarp, Record, Sampler, Split};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A smooth synthetic table, so LUT-interpolated datasets are cheap.
fn smooth_lut() -> AlbedoLut {
    let res = [4, 4, 2, 2, 2];
    let n: usize = res.iter().product();
    let warp = ParamWarp::default();
    let mut values = Vec::with_capacity(n);
    for flat in 0..n {
        let mut idx = [0usize; 5];
        let mut r = flat;
        for a in (0..5).rev() {
            idx[a] = r % res[a];
            r /= res[a];
        }
        let u: [f64; 5] = std::array::from_fn(|a| idx[a] as f64 / (res[a] - 1) as f64);
        let rgb = [
            0.7 - 0.4 * u[0] - 0.1 * u[1] + 0.05 * u[2],
            0.65 - 0.3 * u[0] - 0.3 * u[1] + 0.03 * u[3],
            0.45 - 0.35 * u[0] - 0.05 * u[1] + 0.04 * u[4],
        ];
        values.push(RgbAlbedo::from_array(rgb.map(|c| c as f32 as f64)));
    }
    AlbedoLut::from_parts(res, warp, values, Vec::new()).unwrap()
}

fn dataset(n: usize, seed: u64) -> Dataset {
    gen_dataset(n, &AlbedoSource::LutInterp(&smooth_lut()), &Sampler::Halton, seed).unwrap()
}

#[test]
fn mlp_shapes_and_output_range() {
    let net = Mlp::new(&[3, 8, 8, 5], 1).unwrap();
    assert_eq!(net.param_count(), 3 * 8 + 8 + 8 * 8 + 8 + 8 * 5 + 5);
    let x = Array2::from_shape_fn((10, 3), |(i, j)| (i * 3 + j) as f64 / 30.0 - 0.5);
    let y = net.forward(x.view());
    assert_eq!(y.dim(), (10, 5));
    assert!(y.iter().all(|v| *v > 0.0 && *v < 1.0));
    assert!(Mlp::new(&[3], 0).is_err());
}

#[test]
fn initialization_is_seeded() {
    assert_eq!(Mlp::new(&[3, 6, 5], 4).unwrap(), Mlp::new(&[3, 6, 5], 4).unwrap());
    assert_ne!(Mlp::new(&[3, 6, 5], 4).unwrap(), Mlp::new(&[3, 6, 5], 5).unwrap());
}

#[test]
fn gradients_are_additive_over_sub_batches() {
    let ds = dataset(200, 1);
    let recs: Vec<Record> = ds.records[..64].to_vec();
    let net = EncoderDecoder::new(10, 3).unwrap();
    let w = LossWeights::default();
    let (_, full) = loss_and_grad(&recs, &net, &w);
    let (_, a) = loss_and_grad(&recs[..32], &net, &w);
    let (_, b) = loss_and_grad(&recs[32..], &net, &w);
    for ((f, x), y) in full.params().iter().zip(a.params()).zip(b.params()) {
        for i in 0..f.len() {
            let mean = 0.5 * (x[i] + y[i]);
            assert!((f[i] - mean).abs() <= 1e-12 * (1.0 + f[i].abs()), "{} vs {mean}", f[i]);
        }
    }
}

#[test]
fn loss_terms_respond_to_weights() {
    let ds = dataset(100, 2);
    let net = EncoderDecoder::new(8, 0).unwrap();
    let l = loss(&ds.records, &net, &LossWeights::default());
    assert!((l.total - (l.param + l.albedo + l.cycle)).abs() < 1e-12);
    let only_cycle = loss(&ds.records, &net, &LossWeights { param: 0.0, albedo: 0.0, cycle: 2.0 });
    assert!((only_cycle.total - 2.0 * l.cycle).abs() < 1e-12);
}

#[test]
fn first_adam_step_moves_by_learning_rate() {
    let net = EncoderDecoder::new(4, 0).unwrap();
    let mut grads = net.zeros_like();
    for p in grads.params_mut() {
        p.iter_mut().for_each(|g| *g = 0.37);
    }
    let cfg = TrainConfig::default();
    let mut state = AdamState::new(&net);
    let mut stepped = net.clone();
    adam_step(&mut stepped, &grads, &mut state, &cfg);
    for (before, after) in net.params().iter().zip(stepped.params()) {
        for (b, a) in before.iter().zip(after) {
            let expected = -cfg.learning_rate * 0.37 / (0.37 + cfg.epsilon);
            assert!((a - b - expected).abs() < 1e-15, "{}", a - b);
        }
    }
}

#[test]
fn smoke_run_records_history() {
    let ds = dataset(1_000, 5);
    let cfg = TrainConfig { epochs: 2, batch_size: 128, hidden_width: 16, ..TrainConfig::default() };
    let out = train(&ds, &cfg).unwrap();
    assert_eq!(out.history.len(), 2);
    assert_eq!(out.history[1].epoch, 2);
    assert!(out.history.iter().all(|e| e.train.is_finite() && e.val.is_finite()));
    assert!((1..=2).contains(&out.best_epoch));
}

#[test]
fn training_is_deterministic_and_improves() {
    let ds = dataset(4_000, 6);
    let cfg = TrainConfig { epochs: 20, batch_size: 256, hidden_width: 24, learning_rate: 1e-3, ..TrainConfig::default() };
    let a = train(&ds, &cfg).unwrap();
    let b = train(&ds, &cfg).unwrap();
    assert_eq!(a.last.encoder, b.last.encoder);
    assert_eq!(a.history, b.history);
    assert!(a.history[19].train.total < a.history[0].train.total);
    let best = evaluate(&ds.split(Split::Val).copied().collect::<Vec<_>>(), &a.best, &cfg.loss_weights);
    assert!((best.total - a.history[a.best_epoch - 1].val.total).abs() < 1e-12);
}

#[test]
fn invalid_train_config_rejected() {
    let ds = dataset(100, 0);
    for cfg in [
        TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { beta1: 1.0, ..TrainConfig::default() },
        TrainConfig { hidden_width: 0, ..TrainConfig::default() },
    ] {
        assert!(train(&ds, &cfg).is_err());
    }
}

#[test]
fn lipschitz_bound_dominates_observed_slopes() {
    let net = Mlp::new(&[3, 12, 12, 5], 9).unwrap();
    let bound = net.lipschitz_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let a: [f64; 3] = std::array::from_fn(|_| rng.random());
        let b: [f64; 3] = std::array::from_fn(|_| rng.random());
        let x = Array2::from_shape_vec((2, 3), a.iter().chain(&b).copied().collect()).unwrap();
        let y = net.forward(x.view());
        let dy = (0..5).map(|j| (y[[0, j]] - y[[1, j]]).powi(2)).sum::<f64>().sqrt();
        let dx = (0..3).map(|j| (a[j] - b[j]).powi(2)).sum::<f64>().sqrt();
        assert!(dy <= bound * dx * (1.0 + 1e-6));
    }
}
