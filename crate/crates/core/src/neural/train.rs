use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss, loss_and_grad, EncoderDecoder, LossBreakdown, LossWeights};
use crate::error::{Error, Result};
use crate::space::{Dataset, Record, Split};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub hidden_width: usize,
    pub loss_weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 4096,
            epochs: 400,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            hidden_width: 70,
            loss_weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("epsilon", self.epsilon),
            ("batch_size", self.batch_size as f64),
            ("epochs", self.epochs as f64),
            ("hidden_width", self.hidden_width as f64),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        let w = self.loss_weights;
        if [w.param, w.albedo, w.cycle].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("loss weights must be non-negative, got {w:?}")));
        }
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        vec![
            ("learning_rate".into(), self.learning_rate.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("beta1".into(), self.beta1.to_string()),
            ("beta2".into(), self.beta2.to_string()),
            ("epsilon".into(), self.epsilon.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("hidden_width".into(), self.hidden_width.to_string()),
            ("loss_weight_param".into(), self.loss_weights.param.to_string()),
            ("loss_weight_albedo".into(), self.loss_weights.albedo.to_string()),
            ("loss_weight_cycle".into(), self.loss_weights.cycle.to_string()),
            ("param_space".into(), "warped_unit_cube".into()),
        ]
    }
}

/// First and second moment estimates.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: EncoderDecoder,
    pub v: EncoderDecoder,
    pub step: u64,
}

impl AdamState {
    pub fn new(net: &EncoderDecoder) -> Self {
        AdamState { m: net.zeros_like(), v: net.zeros_like(), step: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(net: &mut EncoderDecoder, grads: &EncoderDecoder, state: &mut AdamState, cfg: &TrainConfig) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.epsilon);
    let params = net.params_mut();
    let g = grads.params();
    let m = state.m.params_mut();
    let v = state.v.params_mut();
    for (((p, g), m), v) in params.into_iter().zip(g).zip(m).zip(v) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub val: LossBreakdown,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Weights at the epoch with the lowest validation loss.
    pub best: EncoderDecoder,
    pub best_epoch: usize,
    /// Weights after the last epoch.
    pub last: EncoderDecoder,
    pub history: Vec<EpochLoss>,
}

/// Mean loss over `records` evaluated in chunks.
pub fn evaluate(records: &[Record], net: &EncoderDecoder, w: &LossWeights) -> LossBreakdown {
    let mut acc = LossBreakdown::default();
    if records.is_empty() {
        return acc;
    }
    for chunk in records.chunks(8192) {
        let l = loss(chunk, net, w);
        let k = chunk.len() as f64;
        acc.param += l.param * k;
        acc.albedo += l.albedo * k;
        acc.cycle += l.cycle * k;
        acc.total += l.total * k;
    }
    let n = records.len() as f64;
    LossBreakdown { param: acc.param / n, albedo: acc.albedo / n, cycle: acc.cycle / n, total: acc.total / n }
}

pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(ds, cfg, |_| {})
}

/// Trains with seeded shuffling; `on_epoch` sees each history entry.
pub fn train_with(ds: &Dataset, cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochLoss)) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_set: Vec<Record> = ds.split(Split::Train).copied().collect();
    let val_set: Vec<Record> = ds.split(Split::Val).copied().collect();
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config(format!(
            "training needs both splits (train {}, val {})",
            train_set.len(),
            val_set.len()
        )));
    }
    let mut net = EncoderDecoder::new(cfg.hidden_width, cfg.seed)?;
    let mut state = AdamState::new(&net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5417_f1e5);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0, net.clone());

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut acc = LossBreakdown::default();
        for idx in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(idx.iter().map(|&i| train_set[i]));
            let (l, grads) = loss_and_grad(&batch, &net, &cfg.loss_weights);
            if !l.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            let k = batch.len() as f64;
            acc.param += l.param * k;
            acc.albedo += l.albedo * k;
            acc.cycle += l.cycle * k;
            acc.total += l.total * k;
            adam_step(&mut net, &grads, &mut state, cfg);
        }
        let n = train_set.len() as f64;
        let train_loss = LossBreakdown {
            param: acc.param / n,
            albedo: acc.albedo / n,
            cycle: acc.cycle / n,
            total: acc.total / n,
        };
        let val = evaluate(&val_set, &net, &cfg.loss_weights);
        if !val.is_finite() || net.encoder.check_finite().is_err() || net.decoder.check_finite().is_err() {
            return Err(Error::Divergence { epoch });
        }
        if val.total < best.0 {
            best = (val.total, epoch, net.clone());
        }
        let entry = EpochLoss { epoch, train: train_loss, val };
        log::info!(
            "epoch {epoch}: train {:.5} (param {:.5}, albedo {:.5}, cycle {:.5}), val {:.5}",
            train_loss.total,
            train_loss.param,
            train_loss.albedo,
            train_loss.cycle,
            val.total
        );
        on_epoch(&entry);
        history.push(entry);
    }
    Ok(TrainOutcome { best: best.2, best_epoch: best.1, last: net, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Mlp;

    fn scalar_net() -> EncoderDecoder {
        EncoderDecoder { encoder: Mlp::zeros(&[1, 1]).unwrap(), decoder: Mlp::zeros(&[1, 1]).unwrap() }
    }

    #[test]
    fn first_adam_step_moves_by_learning_rate() {
        let mut net = scalar_net();
        let mut grads = net.zeros_like();
        grads.encoder.params_mut()[0][0] = 0.3;
        let mut state = AdamState::new(&net);
        let cfg = TrainConfig::default();
        adam_step(&mut net, &grads, &mut state, &cfg);
        let w = net.encoder.params()[0][0];
        // m̂ = g, v̂ = g², update = -lr·g/(|g| + ε).
        assert!((w - (-1e-4 * 0.3 / (0.3 + 1e-8))).abs() < 1e-18);
        // Untouched parameters with zero gradient stay put.
        assert_eq!(net.decoder.params()[0][0], 0.0);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = TrainConfig::default();
        c.batch_size = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.beta2 = 1.0;
        assert!(c.validate().is_err());
    }
}
