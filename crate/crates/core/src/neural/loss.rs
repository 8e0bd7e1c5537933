use ndarray::{Array2, ArrayView2};

use super::Mlp;
use crate::colorimetry::RgbAlbedo;
use crate::error::Result;
use crate::space::{Record, UnitPoint, AXES};

/// Encoder (RGB → unit-cube parameters) and decoder (parameters → RGB).
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderDecoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
}

impl EncoderDecoder {
    pub fn new(hidden_width: usize, seed: u64) -> Result<Self> {
        Ok(EncoderDecoder {
            encoder: Mlp::new(&[3, hidden_width, hidden_width, AXES], seed)?,
            decoder: Mlp::new(&[AXES, hidden_width, hidden_width, 3], seed.wrapping_add(1))?,
        })
    }

    /// Same shapes, all zeros. Used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        EncoderDecoder {
            encoder: Mlp::zeros(self.encoder.dims()).unwrap(),
            decoder: Mlp::zeros(self.decoder.dims()).unwrap(),
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }

    pub fn encode(&self, rgb: &RgbAlbedo) -> UnitPoint {
        let x = Array2::from_shape_vec((1, 3), rgb.to_array().to_vec()).unwrap();
        let y = self.encoder.forward(x.view());
        std::array::from_fn(|i| y[[0, i]])
    }

    pub fn decode(&self, u: &UnitPoint) -> RgbAlbedo {
        let x = Array2::from_shape_vec((1, AXES), u.to_vec()).unwrap();
        let y = self.decoder.forward(x.view());
        RgbAlbedo::new(y[[0, 0]], y[[0, 1]], y[[0, 2]])
    }

    pub fn encode_batch(&self, rgb: ArrayView2<f64>) -> Array2<f64> {
        self.encoder.forward(rgb)
    }

    pub fn decode_batch(&self, u: ArrayView2<f64>) -> Array2<f64> {
        self.decoder.forward(u)
    }
}

/// Relative weights of the three loss terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub param: f64,
    pub albedo: f64,
    pub cycle: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { param: 1.0, albedo: 1.0, cycle: 1.0 }
    }
}

/// The three terms and their weighted sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    /// Mean squared error of encoded parameters in unit-cube space.
    pub param: f64,
    /// Mean absolute error of decoded albedo.
    pub albedo: f64,
    /// Mean absolute error of decode(encode(albedo)).
    pub cycle: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn new(param: f64, albedo: f64, cycle: f64, w: &LossWeights) -> Self {
        LossBreakdown { param, albedo, cycle, total: w.param * param + w.albedo * albedo + w.cycle * cycle }
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

/// Row-stacked inputs `(rgb, u)` of a batch.
pub fn batch_arrays(batch: &[Record]) -> (Array2<f64>, Array2<f64>) {
    let n = batch.len();
    let rgb = Array2::from_shape_fn((n, 3), |(i, c)| batch[i].albedo.to_array()[c]);
    let u = Array2::from_shape_fn((n, AXES), |(i, c)| batch[i].u[c]);
    (rgb, u)
}

fn mean_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).mapv(f64::abs).mean().unwrap_or(0.0)
}

fn mean_sq(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).mapv(|v| v * v).mean().unwrap_or(0.0)
}

/// Gradient of the mean absolute error; the subgradient at 0 is 0.
fn d_mean_abs(pred: &Array2<f64>, target: &Array2<f64>, scale: f64) -> Array2<f64> {
    let k = scale / pred.len() as f64;
    (pred - target).mapv(|d| if d > 0.0 { k } else if d < 0.0 { -k } else { 0.0 })
}

pub fn loss(batch: &[Record], net: &EncoderDecoder, w: &LossWeights) -> LossBreakdown {
    if batch.is_empty() {
        return LossBreakdown::default();
    }
    let (rgb, u) = batch_arrays(batch);
    let e = net.encoder.forward(rgb.view());
    let d = net.decoder.forward(u.view());
    let c = net.decoder.forward(e.view());
    LossBreakdown::new(mean_sq(&e, &u), mean_abs(&d, &rgb), mean_abs(&c, &rgb), w)
}

/// Loss and exact gradients of `total` with respect to every parameter.
pub fn loss_and_grad(batch: &[Record], net: &EncoderDecoder, w: &LossWeights) -> (LossBreakdown, EncoderDecoder) {
    let mut grads = net.zeros_like();
    if batch.is_empty() {
        return (LossBreakdown::default(), grads);
    }
    let (rgb, u) = batch_arrays(batch);
    let enc = net.encoder.forward_cached(rgb.view());
    let e = enc.output().clone();
    let dec = net.decoder.forward_cached(u.view());
    let cyc = net.decoder.forward_cached(e.view());
    let breakdown = LossBreakdown::new(
        mean_sq(&e, &u),
        mean_abs(dec.output(), &rgb),
        mean_abs(cyc.output(), &rgb),
        w,
    );

    let d_albedo = d_mean_abs(dec.output(), &rgb, w.albedo);
    net.decoder.backward(&dec, &d_albedo, &mut grads.decoder);

    let d_cycle = d_mean_abs(cyc.output(), &rgb, w.cycle);
    let d_e_cycle = net.decoder.backward(&cyc, &d_cycle, &mut grads.decoder);

    let k = 2.0 * w.param / e.len() as f64;
    let d_e = (&e - &u) * k + d_e_cycle;
    net.encoder.backward(&enc, &d_e, &mut grads.encoder);
    (breakdown, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::SkinParams;
    use crate::space::Split;

    fn record(u: UnitPoint, rgb: [f64; 3]) -> Record {
        Record { u, p: SkinParams::from_array(u), albedo: RgbAlbedo::from_array(rgb), split: Split::Train }
    }

    #[test]
    fn zero_network_loss_arithmetic() {
        let net = EncoderDecoder {
            encoder: Mlp::zeros(&[3, 4, 4, 5]).unwrap(),
            decoder: Mlp::zeros(&[5, 4, 4, 3]).unwrap(),
        };
        // Encoder emits 0.5 everywhere; target 0.6 → L_param = 0.01.
        // Decoder emits 0.5; target 0.7 → L_albedo = L_cycle = 0.2.
        let b = [record([0.6; 5], [0.7; 3])];
        let l = loss(&b, &net, &LossWeights::default());
        assert!((l.param - 0.01).abs() < 1e-15);
        assert!((l.albedo - 0.2).abs() < 1e-15);
        assert!((l.cycle - 0.2).abs() < 1e-15);
        assert_eq!(l.total, l.param + l.albedo + l.cycle);
    }

    #[test]
    fn perfect_fixture_has_zero_loss_and_gradient() {
        let net = EncoderDecoder {
            encoder: Mlp::zeros(&[3, 4, 4, 5]).unwrap(),
            decoder: Mlp::zeros(&[5, 4, 4, 3]).unwrap(),
        };
        let b = [record([0.5; 5], [0.5; 3]), record([0.5; 5], [0.5; 3])];
        let (l, g) = loss_and_grad(&b, &net, &LossWeights::default());
        assert_eq!(l.total, 0.0);
        assert!(g.params().iter().all(|p| p.iter().all(|&v| v == 0.0)));
    }
}
