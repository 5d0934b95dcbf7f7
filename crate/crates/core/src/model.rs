//! From-scratch feed-forward detector: 39 -> 12 -> 6 -> 3 -> 1 with ReLU
//! hidden activations, a sigmoid output, inverted dropout after the first
//! two hidden layers, binary cross-entropy loss, and Adam.
//!
//! Everything is plain `f64` ndarray math — no autodiff. `backward` computes
//! the exact gradient of the clipped loss that `loss_bce` evaluates, which is
//! what makes finite-difference checking meaningful.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::measure_time;
use crate::preprocess::PreparedDataset;

/// Layer widths of the detector, input to output.
pub const LAYER_SIZES: [usize; 5] = [39, 12, 6, 3, 1];

/// Probabilities are clipped to [PROB_CLIP, 1 - PROB_CLIP] inside the loss.
pub const PROB_CLIP: f64 = 1e-7;

/// Dropout is applied to the outputs of the first two hidden layers only.
const DROPOUT_SITES: usize = 2;

/// One dense layer: `weights` is (fan_in x fan_out), `biases` has fan_out.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// An ordered chain of dense layers with compatible shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    layers: Vec<DenseLayer>,
}

impl ModelParameters {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("a model needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.biases.len() != layer.weights.ncols() {
                return Err(Error::Dimension {
                    context: "layer biases vs weight columns",
                    expected: layer.weights.ncols(),
                    actual: layer.biases.len(),
                });
            }
            if i + 1 < layers.len() && layers[i + 1].weights.nrows() != layer.weights.ncols() {
                return Err(Error::Dimension {
                    context: "consecutive layer shapes",
                    expected: layer.weights.ncols(),
                    actual: layers[i + 1].weights.nrows(),
                });
            }
            if layer.weights.iter().any(|v| !v.is_finite())
                || layer.biases.iter().any(|v| !v.is_finite())
            {
                return Err(Error::invalid(format!("non-finite parameter in layer {i}")));
            }
        }
        Ok(ModelParameters { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.ncols()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.dim() == b.weights.dim())
    }

    pub fn zeros_like(&self) -> Self {
        ModelParameters {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weights: Array2::zeros(l.weights.dim()),
                    biases: Array1::zeros(l.biases.len()),
                })
                .collect(),
        }
    }

    /// `self += coeff * other`, layer by layer.
    pub fn add_scaled(&mut self, coeff: f64, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::invalid("cannot combine models of different shapes"));
        }
        for (mine, theirs) in self.layers.iter_mut().zip(&other.layers) {
            Zip::from(&mut mine.weights)
                .and(&theirs.weights)
                .for_each(|a, &b| *a += coeff * b);
            Zip::from(&mut mine.biases)
                .and(&theirs.biases)
                .for_each(|a, &b| *a += coeff * b);
        }
        Ok(())
    }

    /// `self - other`, shaped as a gradient (the server-side pseudo-gradient).
    pub fn delta(&self, other: &Self) -> Result<GradientSet> {
        if !self.same_shape(other) {
            return Err(Error::invalid("cannot diff models of different shapes"));
        }
        Ok(GradientSet {
            weights: self
                .layers
                .iter()
                .zip(&other.layers)
                .map(|(a, b)| &a.weights - &b.weights)
                .collect(),
            biases: self
                .layers
                .iter()
                .zip(&other.layers)
                .map(|(a, b)| &a.biases - &b.biases)
                .collect(),
        })
    }

    /// Serializes to per-layer (fan_in, fan_out) shapes plus one flat value
    /// list: for each layer, row-major weights then biases. Used by the
    /// checkpoint files.
    pub fn flatten(&self) -> (Vec<(usize, usize)>, Vec<f64>) {
        let shapes = self
            .layers
            .iter()
            .map(|l| (l.weights.nrows(), l.weights.ncols()))
            .collect();
        let mut values = Vec::new();
        for layer in &self.layers {
            values.extend(layer.weights.iter().copied());
            values.extend(layer.biases.iter().copied());
        }
        (shapes, values)
    }

    /// Inverse of [`ModelParameters::flatten`].
    pub fn from_flat(shapes: &[(usize, usize)], values: &[f64]) -> Result<Self> {
        let expected: usize = shapes.iter().map(|&(r, c)| r * c + c).sum();
        if values.len() != expected {
            return Err(Error::Dimension {
                context: "flat parameter vector",
                expected,
                actual: values.len(),
            });
        }
        let mut layers = Vec::with_capacity(shapes.len());
        let mut cursor = 0;
        for &(rows, cols) in shapes {
            let weights =
                Array2::from_shape_vec((rows, cols), values[cursor..cursor + rows * cols].to_vec())
                    .expect("shape matches slice length");
            cursor += rows * cols;
            let biases = Array1::from_vec(values[cursor..cursor + cols].to_vec());
            cursor += cols;
            layers.push(DenseLayer { weights, biases });
        }
        ModelParameters::new(layers)
    }
}

/// Per-layer gradients, shaped exactly like the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl GradientSet {
    pub fn matches(&self, params: &ModelParameters) -> bool {
        self.weights.len() == params.layers.len()
            && self
                .weights
                .iter()
                .zip(params.layers())
                .all(|(g, l)| g.dim() == l.weights.dim())
            && self
                .biases
                .iter()
                .zip(params.layers())
                .all(|(g, l)| g.len() == l.biases.len())
    }
}

/// Local training hyper-parameters. Defaults are the experiment values:
/// 3 epochs, batch 2048, learning rate 0.001, Adam (0.9, 0.999, 1e-7),
/// dropout 0.4.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 3,
            batch_size: 2048,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            dropout_rate: 0.4,
            seed: 42,
        }
    }
}

/// Adam hyper-parameters for a single optimizer instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl From<&TrainingConfig> for AdamHyper {
    fn from(config: &TrainingConfig) -> Self {
        AdamHyper {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    m_weights: Vec<Array2<f64>>,
    v_weights: Vec<Array2<f64>>,
    m_biases: Vec<Array1<f64>>,
    v_biases: Vec<Array1<f64>>,
    step_count: u64,
}

impl OptimizerState {
    pub fn zeros_for(params: &ModelParameters) -> Self {
        OptimizerState {
            m_weights: params
                .layers()
                .iter()
                .map(|l| Array2::zeros(l.weights.dim()))
                .collect(),
            v_weights: params
                .layers()
                .iter()
                .map(|l| Array2::zeros(l.weights.dim()))
                .collect(),
            m_biases: params
                .layers()
                .iter()
                .map(|l| Array1::zeros(l.biases.len()))
                .collect(),
            v_biases: params
                .layers()
                .iter()
                .map(|l| Array1::zeros(l.biases.len()))
                .collect(),
            step_count: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// Glorot-uniform weights, zero biases, drawn layer by layer from one
/// ChaCha stream seeded with `seed`.
pub fn init_model(seed: u64) -> ModelParameters {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(LAYER_SIZES.len() - 1);
    for pair in LAYER_SIZES.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights =
            Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit));
        layers.push(DenseLayer {
            weights,
            biases: Array1::zeros(fan_out),
        });
    }
    ModelParameters::new(layers).expect("fixed layer sizes form a valid chain")
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn validate_batch(params: &ModelParameters, batch: &ArrayView2<'_, f64>) -> Result<()> {
    if batch.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    if batch.ncols() != params.input_dim() {
        return Err(Error::Dimension {
            context: "batch columns vs model input",
            expected: params.input_dim(),
            actual: batch.ncols(),
        });
    }
    if batch.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in input batch"));
    }
    Ok(())
}

/// Inverted dropout: each entry is zeroed with probability `rate`, survivors
/// are scaled by 1/(1-rate) so the expectation is unchanged.
fn sample_dropout_mask<R: Rng>(shape: (usize, usize), rate: f64, rng: &mut R) -> Array2<f64> {
    let keep_scale = 1.0 / (1.0 - rate);
    Array2::from_shape_fn(shape, |_| {
        if rng.random_range(0.0..1.0) < rate {
            0.0
        } else {
            keep_scale
        }
    })
}

/// Activations and dropout masks saved by a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Post-activation (and post-dropout, where a site applies) output of
    /// each hidden layer, in order.
    activations: Vec<Array2<f64>>,
    /// One entry per hidden layer; `Some` only at active dropout sites.
    masks: Vec<Option<Array2<f64>>>,
    pub probabilities: Array1<f64>,
}

/// Inference-mode forward pass: no dropout, returns attack probabilities.
pub fn forward_inference(params: &ModelParameters, batch: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    validate_batch(params, &batch)?;
    let mut a = batch.to_owned();
    let last = params.layers.len() - 1;
    for (i, layer) in params.layers.iter().enumerate() {
        let z = a.dot(&layer.weights) + &layer.biases;
        a = if i == last {
            z.mapv(sigmoid)
        } else {
            z.mapv(|v| v.max(0.0))
        };
    }
    Ok(a.index_axis(Axis(1), 0).to_owned())
}

/// Training-mode forward pass. Dropout masks for the first two hidden layers
/// are drawn from `rng`; `dropout_rate` 0 disables them and then the
/// probabilities match [`forward_inference`] exactly.
pub fn forward_train<R: Rng>(
    params: &ModelParameters,
    batch: ArrayView2<'_, f64>,
    dropout_rate: f64,
    rng: &mut R,
) -> Result<ForwardCache> {
    validate_batch(params, &batch)?;
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::invalid(format!(
            "dropout rate must be in [0, 1), got {dropout_rate}"
        )));
    }
    let last = params.layers.len() - 1;
    let mut activations = Vec::with_capacity(last);
    let mut masks = Vec::with_capacity(last);
    let mut a = batch.to_owned();
    for (i, layer) in params.layers.iter().enumerate() {
        let z = a.dot(&layer.weights) + &layer.biases;
        if i == last {
            let probabilities = z.mapv(sigmoid).index_axis(Axis(1), 0).to_owned();
            return Ok(ForwardCache {
                activations,
                masks,
                probabilities,
            });
        }
        a = z.mapv(|v| v.max(0.0));
        if i < DROPOUT_SITES && dropout_rate > 0.0 {
            let mask = sample_dropout_mask(a.dim(), dropout_rate, rng);
            a *= &mask;
            masks.push(Some(mask));
        } else {
            masks.push(None);
        }
        activations.push(a.clone());
    }
    unreachable!("loop returns at the output layer")
}

/// Mean binary cross-entropy over the batch, with probabilities clipped to
/// [PROB_CLIP, 1 - PROB_CLIP] before the logs.
pub fn loss_bce(probabilities: &[f64], labels: &[u8]) -> Result<f64> {
    if probabilities.is_empty() {
        return Err(Error::invalid("empty batch in loss"));
    }
    if probabilities.len() != labels.len() {
        return Err(Error::Dimension {
            context: "probabilities vs labels",
            expected: labels.len(),
            actual: probabilities.len(),
        });
    }
    let mut total = 0.0;
    for (&p, &y) in probabilities.iter().zip(labels) {
        let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        total += if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
    }
    Ok(total / probabilities.len() as f64)
}

/// Exact gradients of the clipped mean BCE with respect to every weight and
/// bias, using the activations and masks cached by [`forward_train`].
pub fn backward(
    params: &ModelParameters,
    batch: ArrayView2<'_, f64>,
    labels: &[u8],
    cache: &ForwardCache,
) -> Result<GradientSet> {
    validate_batch(params, &batch)?;
    let n = batch.nrows();
    if labels.len() != n || cache.probabilities.len() != n {
        return Err(Error::Dimension {
            context: "labels vs batch rows",
            expected: n,
            actual: labels.len(),
        });
    }
    if cache.activations.len() != params.layers.len() - 1 {
        return Err(Error::invalid(
            "forward cache does not match the model depth",
        ));
    }

    // d(loss)/d(z_out); zero where the clip saturates the loss.
    let mut dz = Array2::zeros((n, 1));
    for (i, (&p, &y)) in cache.probabilities.iter().zip(labels).enumerate() {
        dz[[i, 0]] = if p < PROB_CLIP || p > 1.0 - PROB_CLIP {
            0.0
        } else {
            (p - f64::from(y)) / n as f64
        };
    }

    let mut weight_grads = Vec::with_capacity(params.layers.len());
    let mut bias_grads = Vec::with_capacity(params.layers.len());
    for i in (0..params.layers.len()).rev() {
        let input = if i == 0 {
            batch.view()
        } else {
            cache.activations[i - 1].view()
        };
        weight_grads.push(input.t().dot(&dz));
        bias_grads.push(dz.sum_axis(Axis(0)));
        if i > 0 {
            let mut da = dz.dot(&params.layers[i].weights.t());
            if let Some(mask) = &cache.masks[i - 1] {
                da *= mask;
            }
            // ReLU gate: the cached activation is zero exactly where the
            // pre-activation was non-positive or the mask dropped the unit
            // (and in the latter case `da` is already zero).
            Zip::from(&mut da)
                .and(&cache.activations[i - 1])
                .for_each(|g, &a| {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                });
            dz = da;
        }
    }
    weight_grads.reverse();
    bias_grads.reverse();
    Ok(GradientSet {
        weights: weight_grads,
        biases: bias_grads,
    })
}

/// One Adam update over every parameter tensor. Moment estimates and the
/// step counter live in `state` and persist across calls.
pub fn adam_step(
    state: &mut OptimizerState,
    params: &mut ModelParameters,
    grads: &GradientSet,
    hyper: &AdamHyper,
) -> Result<()> {
    if !grads.matches(params) {
        return Err(Error::invalid("gradient shapes do not match parameters"));
    }
    if state.m_weights.len() != params.layers.len() {
        return Err(Error::invalid("optimizer state does not match parameters"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let m_correction = 1.0 - hyper.beta1.powi(t);
    let v_correction = 1.0 - hyper.beta2.powi(t);

    for i in 0..params.layers.len() {
        update_tensor(
            &mut params.layers[i].weights,
            &mut state.m_weights[i],
            &mut state.v_weights[i],
            &grads.weights[i],
            hyper,
            m_correction,
            v_correction,
        );
        update_vector(
            &mut params.layers[i].biases,
            &mut state.m_biases[i],
            &mut state.v_biases[i],
            &grads.biases[i],
            hyper,
            m_correction,
            v_correction,
        );
    }
    Ok(())
}

fn update_tensor(
    theta: &mut Array2<f64>,
    m: &mut Array2<f64>,
    v: &mut Array2<f64>,
    g: &Array2<f64>,
    hyper: &AdamHyper,
    m_correction: f64,
    v_correction: f64,
) {
    Zip::from(m).and(v).and(g).and(theta).for_each(|m, v, &g, t| {
        *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
        *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
        let m_hat = *m / m_correction;
        let v_hat = *v / v_correction;
        *t -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
    });
}

fn update_vector(
    theta: &mut Array1<f64>,
    m: &mut Array1<f64>,
    v: &mut Array1<f64>,
    g: &Array1<f64>,
    hyper: &AdamHyper,
    m_correction: f64,
    v_correction: f64,
) {
    Zip::from(m).and(v).and(g).and(theta).for_each(|m, v, &g, t| {
        *m = hyper.beta1 * *m + (1.0 - hyper.beta1) * g;
        *v = hyper.beta2 * *v + (1.0 - hyper.beta2) * g * g;
        let m_hat = *m / m_correction;
        let v_hat = *v / v_correction;
        *t -= hyper.learning_rate * m_hat / (v_hat.sqrt() + hyper.epsilon);
    });
}

/// Local training: a fresh Adam state, then `epochs` passes over the data in
/// seeded-shuffled batches of `batch_size` (a final short batch is trained
/// on like any other). Shuffles and dropout masks come from one ChaCha
/// stream seeded with `config.seed`, so the result is a pure function of
/// (params, data, config). Returns the trained parameters and the
/// wall-clock seconds spent.
pub fn train_local(
    params: &ModelParameters,
    data: &PreparedDataset,
    config: &TrainingConfig,
) -> Result<(ModelParameters, f64)> {
    if data.n_rows() == 0 {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if data.feature_dim() != params.input_dim() {
        return Err(Error::Dimension {
            context: "dataset features vs model input",
            expected: params.input_dim(),
            actual: data.feature_dim(),
        });
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }

    let hyper = AdamHyper::from(config);
    let (result, seconds) = measure_time(|| -> Result<ModelParameters> {
        let mut trained = params.clone();
        let mut state = OptimizerState::zeros_for(&trained);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..data.n_rows()).collect();
        for _ in 0..config.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(config.batch_size) {
                let batch = data.features.select(Axis(0), chunk);
                let labels: Vec<u8> = chunk.iter().map(|&i| data.labels[i]).collect();
                let cache = forward_train(&trained, batch.view(), config.dropout_rate, &mut rng)?;
                let grads = backward(&trained, batch.view(), &labels, &cache)?;
                adam_step(&mut state, &mut trained, &grads, &hyper)?;
            }
        }
        Ok(trained)
    });
    Ok((result?, seconds))
}
