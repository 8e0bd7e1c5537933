use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fully connected network: rectifier on hidden layers, logistic output.
///
/// Weight `i` has shape `(dims[i], dims[i + 1])`, so a batch `X` (one row
/// per sample) maps to `X·W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
}

/// Per-layer outputs of a forward pass, input first.
pub struct Activations {
    pub layers: Vec<Array2<f64>>,
}

impl Activations {
    pub fn output(&self) -> &Array2<f64> {
        self.layers.last().expect("activations are never empty")
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Mlp {
    /// Uniform fan-in/fan-out initialization, biases at zero.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = dims
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-limit..limit))
            })
            .collect();
        let biases = dims[1..].iter().map(|&n| Array1::zeros(n)).collect();
        Ok(Mlp { dims: dims.to_vec(), weights, biases })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Mlp {
            dims: dims.to_vec(),
            weights: dims.windows(2).map(|w| Array2::zeros((w[0], w[1]))).collect(),
            biases: dims[1..].iter().map(|&n| Array1::zeros(n)).collect(),
        })
    }

    pub fn from_parts(dims: Vec<usize>, weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        check_dims(&dims)?;
        if weights.len() != dims.len() - 1 || biases.len() != dims.len() - 1 {
            return Err(Error::Invariant(format!("{} layers need {} weight matrices", dims.len(), dims.len() - 1)));
        }
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.dim() != (dims[i], dims[i + 1]) || b.len() != dims[i + 1] {
                return Err(Error::Invariant(format!(
                    "layer {i}: weight {:?} / bias {} do not match dims {:?}",
                    w.dim(),
                    b.len(),
                    &dims[i..i + 2]
                )));
            }
        }
        let mlp = Mlp { dims, weights, biases };
        mlp.check_finite()?;
        Ok(mlp)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Invariant("network holds non-finite weights".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Every parameter array as a flat slice: weights then bias, per layer.
    pub fn params(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice().unwrap(), b.as_slice().unwrap()])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_slice_mut().unwrap(), b.as_slice_mut().unwrap()])
            .collect()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut a = x.to_owned();
        let last = self.weights.len() - 1;
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            a = a.dot(w) + b;
            if i == last {
                a.mapv_inplace(sigmoid);
            } else {
                a.mapv_inplace(|v| v.max(0.0));
            }
        }
        a
    }

    pub fn forward_cached(&self, x: ArrayView2<f64>) -> Activations {
        let mut layers = vec![x.to_owned()];
        let last = self.weights.len() - 1;
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = layers[i].dot(w) + b;
            if i == last {
                z.mapv_inplace(sigmoid);
            } else {
                z.mapv_inplace(|v| v.max(0.0));
            }
            layers.push(z);
        }
        Activations { layers }
    }

    /// Accumulates parameter gradients into `grads` given `d_out`, the loss
    /// gradient with respect to the network output, and returns the
    /// gradient with respect to the input.
    pub fn backward(&self, acts: &Activations, d_out: &Array2<f64>, grads: &mut Mlp) -> Array2<f64> {
        let n = self.weights.len();
        let y = acts.output();
        let mut delta = d_out * &y.mapv(|s| s * (1.0 - s));
        for i in (0..n).rev() {
            let input = &acts.layers[i];
            grads.weights[i] += &input.t().dot(&delta);
            grads.biases[i] += &delta.sum_axis(Axis(0));
            let mut d_in = delta.dot(&self.weights[i].t());
            if i > 0 {
                ndarray::Zip::from(&mut d_in).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
            delta = d_in;
        }
        delta
    }

    /// Product of the layers' spectral norms, an upper bound on the
    /// Lipschitz constant of the pre-logistic map (the logistic adds 1/4).
    pub fn lipschitz_bound(&self) -> f64 {
        self.weights.iter().map(spectral_norm).product::<f64>() * 0.25
    }
}

/// Largest singular value by power iteration on `WᵀW`.
pub fn spectral_norm(w: &Array2<f64>) -> f64 {
    let wtw = w.t().dot(w);
    let mut v = Array1::from_elem(wtw.nrows(), 1.0 / (wtw.nrows() as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..200 {
        let next = wtw.dot(&v);
        let norm = next.dot(&next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = next / norm;
    }
    // Power iteration converges from below; pad slightly so the bound holds.
    lambda.sqrt() * (1.0 + 1e-6)
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::Invariant(format!("invalid layer dims {dims:?}")));
    }
    Ok(())
}
