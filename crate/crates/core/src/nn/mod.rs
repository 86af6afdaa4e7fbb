//! Dense feed-forward Q-network: ReLU hidden layers, linear output,
//! trained by SGD with momentum on the squared TD error of the taken
//! action only.

mod optim;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use optim::{LrSchedule, OptimizerConfig, SgdMomentum};

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("input has length {got}, network expects {expected}")]
    InputSize { expected: usize, got: usize },
    #[error("action {action} out of range for {outputs} outputs")]
    Action { action: usize, outputs: usize },
    #[error("invalid layer sizes {0:?}")]
    Topology(Vec<usize>),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("non-finite training loss {0}")]
    NonFiniteLoss(f64),
    #[error("optimizer state does not match the network")]
    OptimizerShape,
}

/// Weight scaling for hidden layers. The output layer is always Glorot-uniform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightInit {
    /// U(-sqrt(6 / fan_in), +sqrt(6 / fan_in))
    #[default]
    HeUniform,
    /// U(-sqrt(6 / (fan_in + fan_out)), +sqrt(6 / (fan_in + fan_out)))
    GlorotUniform,
}

/// One affine layer; `weights` is `inputs x outputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weights: Array2::zeros((inputs, outputs)), bias: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Dense>,
}

/// One regression sample: push `Q(input)[action]` towards `target`.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl DenseNet {
    /// Random network; hidden layers use He-uniform weights, the output
    /// layer Glorot-uniform, biases start at zero.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self, NnError> {
        Self::init_with(layer_sizes, WeightInit::HeUniform, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn init_with<R: Rng>(layer_sizes: &[usize], scheme: WeightInit, rng: &mut R) -> Result<Self, NnError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(NnError::Topology(layer_sizes.to_vec()));
        }
        let last = layer_sizes.len() - 2;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let glorot = i == last || scheme == WeightInit::GlorotUniform;
                let limit =
                    if glorot { (6.0 / (fan_in + fan_out) as f64).sqrt() } else { (6.0 / fan_in as f64).sqrt() };
                let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-limit..limit));
                Dense { weights, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, NnError> {
        let sizes: Vec<usize> = layers.iter().map(Dense::inputs).chain(layers.last().map(Dense::outputs)).collect();
        let chained = layers.windows(2).all(|w| w[0].outputs() == w[1].inputs());
        let biases = layers.iter().all(|l| l.bias.len() == l.outputs());
        if layers.is_empty() || !chained || !biases || sizes.contains(&0) {
            return Err(NnError::Topology(sizes));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_size()).chain(self.layers.iter().map(Dense::outputs)).collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let input = ArrayView2::from_shape((1, x.len()), x).expect("row vector shape");
        Ok(self.forward_batch(input)?.into_raw_vec_and_offset().0)
    }

    /// Forward pass over the rows of `x`.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, NnError> {
        if x.ncols() != self.input_size() {
            return Err(NnError::InputSize { expected: self.input_size(), got: x.ncols() });
        }
        let last = self.layers.len() - 1;
        let mut a = self.affine(0, x);
        if last > 0 {
            a.mapv_inplace(relu);
        }
        for (i, _) in self.layers.iter().enumerate().skip(1) {
            a = self.affine(i, a.view());
            if i < last {
                a.mapv_inplace(relu);
            }
        }
        Ok(a)
    }

    fn affine(&self, i: usize, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let layer = &self.layers[i];
        let mut z = x.dot(&layer.weights);
        z += &layer.bias;
        z
    }

    /// Mean squared error over the batch and its gradient. Only the output
    /// unit of each sample's action receives error.
    pub fn loss_and_gradients(&self, batch: &[Sample<'_>]) -> Result<(f64, Gradients), NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyBatch);
        }
        let n_in = self.input_size();
        let n_out = self.output_size();
        let k = batch.len();
        let mut x = Array2::zeros((k, n_in));
        for (j, s) in batch.iter().enumerate() {
            if s.input.len() != n_in {
                return Err(NnError::InputSize { expected: n_in, got: s.input.len() });
            }
            if s.action >= n_out {
                return Err(NnError::Action { action: s.action, outputs: n_out });
            }
            x.row_mut(j).assign(&ndarray::aview1(s.input));
        }

        // activations[0] is the input, activations[l] the output of layer l
        let last = self.layers.len() - 1;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x);
        for i in 0..self.layers.len() {
            let mut z = self.affine(i, activations[i].view());
            if i < last {
                z.mapv_inplace(relu);
            }
            activations.push(z);
        }

        let out = &activations[self.layers.len()];
        let mut delta = Array2::zeros((k, n_out));
        let mut loss = 0.0;
        for (j, s) in batch.iter().enumerate() {
            let err = out[[j, s.action]] - s.target;
            loss += err * err;
            delta[[j, s.action]] = 2.0 * err / k as f64;
        }
        loss /= k as f64;

        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = &activations[i];
            let g_w = input.t().dot(&delta);
            let g_b = delta.sum_axis(Axis(0));
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                ndarray::Zip::from(&mut back).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push(Dense { weights: g_w, bias: g_b });
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }

    /// Pre-update batch loss without touching the parameters.
    pub fn loss(&self, batch: &[Sample<'_>]) -> Result<f64, NnError> {
        Ok(self.loss_and_gradients(batch)?.0)
    }
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// One SGD-with-momentum step on `batch`; returns the loss measured
/// before the update.
pub fn train_step(net: &mut DenseNet, opt: &mut SgdMomentum, batch: &[Sample<'_>]) -> Result<f64, NnError> {
    let (loss, grads) = net.loss_and_gradients(batch)?;
    if !loss.is_finite() {
        return Err(NnError::NonFiniteLoss(loss));
    }
    opt.apply(net, &grads)?;
    Ok(loss)
}

/// Self-describing network checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetCheckpoint {
    pub layer_sizes: Vec<usize>,
    pub net: DenseNet,
    pub optimizer: SgdMomentum,
}

impl NetCheckpoint {
    pub fn new(net: &DenseNet, optimizer: &SgdMomentum) -> Self {
        Self { layer_sizes: net.layer_sizes(), net: net.clone(), optimizer: optimizer.clone() }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.layer_sizes != self.net.layer_sizes() {
            return Err(NnError::Topology(self.layer_sizes.clone()));
        }
        DenseNet::from_layers(self.net.layers.clone())?;
        self.optimizer.check_shape(&self.net)
    }
}
