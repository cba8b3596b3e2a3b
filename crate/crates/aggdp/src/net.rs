//! Small dense feed-forward network fit to state costs, used as a trainable
//! feature extractor: the outputs of the last nonlinear layer are features,
//! combined linearly into a scalar cost estimate.
//!
//! Everything is hand-rolled and exact: forward pass, reverse-mode
//! gradients, and plain incremental gradient descent with per-epoch
//! shuffling. The gradients are validated against central finite differences
//! in the test suite.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

/// Componentwise nonlinearity of a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigma {
    /// Smoothed rectifier `ln(1 + e^x)`, evaluated overflow-safely.
    Softplus,
    /// Hyperbolic tangent (the default).
    Tanh,
    /// Logistic `1 / (1 + e^(-x))`.
    Logistic,
}

impl Sigma {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Sigma::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Sigma::Tanh => x.tanh(),
            Sigma::Logistic => logistic(x),
        }
    }

    /// Derivative at `x` (every provided nonlinearity is smooth).
    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            Sigma::Softplus => logistic(x),
            Sigma::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Sigma::Logistic => {
                let s = logistic(x);
                s * (1.0 - s)
            }
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// How states are turned into input vectors.
#[derive(Clone, Copy, Debug)]
pub enum Encoder {
    /// Indicator vector of length `n` (the default).
    OneHot(usize),
    /// Caller-supplied encoding of known dimension.
    Custom {
        dim: usize,
        encode: fn(usize) -> Vec<f64>,
    },
}

impl Encoder {
    pub fn dim(&self) -> usize {
        match self {
            Encoder::OneHot(n) => *n,
            Encoder::Custom { dim, .. } => *dim,
        }
    }

    pub fn encode(&self, state: usize) -> Vec<f64> {
        match self {
            Encoder::OneHot(n) => {
                let mut y = vec![0.0; *n];
                y[state - 1] = 1.0;
                y
            }
            Encoder::Custom { encode, .. } => encode(state),
        }
    }
}

/// One nonlinear layer's shape.
#[derive(Clone, Copy, Debug)]
pub struct LayerSpec {
    pub width: usize,
    pub sigma: Sigma,
}

/// Architecture: an encoder, one or more nonlinear layers, and an implicit
/// final linear combination of the last layer's outputs.
#[derive(Clone, Debug)]
pub struct NetworkSpec {
    pub encoder: Encoder,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// All layers share one nonlinearity.
    pub fn uniform(encoder: Encoder, widths: &[usize], sigma: Sigma) -> Result<Self> {
        let spec = NetworkSpec {
            encoder,
            layers: widths
                .iter()
                .map(|&width| LayerSpec { width, sigma })
                .collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.dim() == 0 {
            return Err(Error::InvalidArgument("encoder dimension must be ≥ 1".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one nonlinear layer".into(),
            ));
        }
        if self.layers.iter().any(|l| l.width == 0) {
            return Err(Error::InvalidArgument("layer widths must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Feature dimension: width of the last nonlinear layer.
    pub fn feature_dim(&self) -> usize {
        self.layers.last().map(|l| l.width).unwrap_or(0)
    }
}

/// One layer's parameters: output = σ(A·input + b) row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// All trainable parameters: the nonlinear layers plus the final linear
/// weights over the features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub layers: Vec<Layer>,
    pub r: Vec<f64>,
}

impl NetworkParams {
    /// Seeded initialization, uniform in ±1/√fan-in per layer.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = SplitMix64::stream(seed, 0);
        let mut fan_in = spec.encoder.dim();
        let mut layers = Vec::with_capacity(spec.layers.len());
        for layer in &spec.layers {
            let scale = 1.0 / (fan_in as f64).sqrt();
            let a = (0..layer.width)
                .map(|_| (0..fan_in).map(|_| rng.uniform(-scale, scale)).collect())
                .collect();
            let b = (0..layer.width).map(|_| rng.uniform(-scale, scale)).collect();
            layers.push(Layer { a, b });
            fan_in = layer.width;
        }
        let scale = 1.0 / (fan_in as f64).sqrt();
        let r = (0..fan_in).map(|_| rng.uniform(-scale, scale)).collect();
        Ok(NetworkParams { layers, r })
    }

    fn check_shapes(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} layers, got {}",
                spec.layers.len(),
                self.layers.len()
            )));
        }
        let mut fan_in = spec.encoder.dim();
        for (at, (layer, shape)) in self.layers.iter().zip(&spec.layers).enumerate() {
            if layer.a.len() != shape.width
                || layer.b.len() != shape.width
                || layer.a.iter().any(|row| row.len() != fan_in)
            {
                return Err(Error::InvalidArgument(format!(
                    "layer {at} shapes do not match the architecture"
                )));
            }
            fan_in = shape.width;
        }
        if self.r.len() != fan_in {
            return Err(Error::InvalidArgument(format!(
                "final weights have {} entries, features have {fan_in}",
                self.r.len()
            )));
        }
        Ok(())
    }
}

struct ForwardTrace {
    /// Activations per layer, index 0 = encoded input.
    activations: Vec<Vec<f64>>,
    /// Pre-nonlinearity sums per layer.
    pre: Vec<Vec<f64>>,
    output: f64,
}

fn forward_trace(spec: &NetworkSpec, params: &NetworkParams, state: usize) -> ForwardTrace {
    let mut activations = vec![spec.encoder.encode(state)];
    let mut pre = Vec::with_capacity(spec.layers.len());
    for (layer, shape) in params.layers.iter().zip(&spec.layers) {
        let input = activations.last().unwrap();
        let z: Vec<f64> = layer
            .a
            .iter()
            .zip(&layer.b)
            .map(|(row, b)| b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>())
            .collect();
        activations.push(z.iter().map(|&v| shape.sigma.eval(v)).collect());
        pre.push(z);
    }
    let output = params
        .r
        .iter()
        .zip(activations.last().unwrap())
        .map(|(w, f)| w * f)
        .sum();
    ForwardTrace {
        activations,
        pre,
        output,
    }
}

/// Evaluates the network at a state: the feature vector (last nonlinear
/// layer's outputs) and the scalar estimate `r·features`.
pub fn forward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    state: usize,
) -> Result<(Vec<f64>, f64)> {
    params.check_shapes(spec)?;
    let trace = forward_trace(spec, params, state);
    Ok((trace.activations.last().unwrap().clone(), trace.output))
}

/// Gradient of the squared residual `(output − target)²` with respect to
/// every parameter, via reverse-mode accumulation.
pub fn gradient(
    spec: &NetworkSpec,
    params: &NetworkParams,
    state: usize,
    target: f64,
) -> Result<NetworkParams> {
    params.check_shapes(spec)?;
    Ok(gradient_unchecked(spec, params, state, target))
}

fn gradient_unchecked(
    spec: &NetworkSpec,
    params: &NetworkParams,
    state: usize,
    target: f64,
) -> NetworkParams {
    let trace = forward_trace(spec, params, state);
    let scale = 2.0 * (trace.output - target);
    let features = trace.activations.last().unwrap();
    let grad_r: Vec<f64> = features.iter().map(|f| scale * f).collect();
    // Sensitivity of the output to each layer's pre-nonlinearity sums,
    // walked backward from the features.
    let mut delta: Vec<f64> = params
        .r
        .iter()
        .zip(&trace.pre[spec.layers.len() - 1])
        .map(|(w, &z)| scale * w * spec.layers.last().unwrap().sigma.deriv(z))
        .collect();
    let mut grad_layers: Vec<Layer> = Vec::with_capacity(params.layers.len());
    for at in (0..params.layers.len()).rev() {
        let input = &trace.activations[at];
        grad_layers.push(Layer {
            a: delta
                .iter()
                .map(|&d| input.iter().map(|&x| d * x).collect())
                .collect(),
            b: delta.clone(),
        });
        if at > 0 {
            let layer = &params.layers[at];
            delta = (0..input.len())
                .map(|col| {
                    let back: f64 = delta
                        .iter()
                        .zip(&layer.a)
                        .map(|(d, row)| d * row[col])
                        .sum();
                    back * spec.layers[at - 1].sigma.deriv(trace.pre[at - 1][col])
                })
                .collect();
        }
    }
    grad_layers.reverse();
    NetworkParams {
        layers: grad_layers,
        r: grad_r,
    }
}

/// Stepsize schedule for [`train_incremental`].
#[derive(Clone, Copy, Debug)]
pub enum TrainStep {
    Const(f64),
    /// `initial / (1 + epoch)`.
    Decay { initial: f64 },
}

impl TrainStep {
    fn at_epoch(&self, epoch: usize) -> f64 {
        match self {
            TrainStep::Const(g) => *g,
            TrainStep::Decay { initial } => initial / (1.0 + epoch as f64),
        }
    }

    fn validate(&self) -> Result<()> {
        let g = match self {
            TrainStep::Const(g) => *g,
            TrainStep::Decay { initial } => *initial,
        };
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidArgument("stepsize must be positive".into()));
        }
        Ok(())
    }
}

/// Training output: final parameters and the exact full-set mean squared
/// error re-evaluated after every epoch (entry 0 is the pre-training loss).
#[derive(Clone, Debug)]
pub struct TrainResult {
    pub params: NetworkParams,
    pub loss_trace: Vec<f64>,
}

/// Loss the trace reports beyond which training aborts as divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Mean squared residual of the network over the whole data set.
pub fn mean_loss(
    spec: &NetworkSpec,
    params: &NetworkParams,
    data: &[(usize, f64)],
) -> Result<f64> {
    params.check_shapes(spec)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut acc = 0.0;
    for &(state, target) in data {
        let out = forward_trace(spec, params, state).output;
        let e = out - target;
        acc += e * e;
    }
    Ok(acc / data.len() as f64)
}

/// Incremental gradient descent on the summed squared residuals plus
/// `ridge·‖params‖²`: one single-sample step per datum per epoch, samples
/// shuffled each epoch from the seed. Aborts with an error advising a
/// smaller stepsize once the epoch loss exceeds [`DIVERGENCE_LIMIT`].
pub fn train_incremental(
    spec: &NetworkSpec,
    params0: &NetworkParams,
    data: &[(usize, f64)],
    epochs: usize,
    step: TrainStep,
    seed: u64,
    ridge: f64,
) -> Result<TrainResult> {
    params0.check_shapes(spec)?;
    step.validate()?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument("ridge must be nonnegative".into()));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut params = params0.clone();
    let mut rng = SplitMix64::stream(seed, 0);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut loss_trace = vec![mean_loss(spec, &params, data)?];
    for epoch in 0..epochs {
        let gamma = step.at_epoch(epoch);
        rng.shuffle(&mut order);
        for &at in &order {
            let (state, target) = data[at];
            let grad = gradient_unchecked(spec, &params, state, target);
            for (layer, glayer) in params.layers.iter_mut().zip(&grad.layers) {
                for (row, grow) in layer.a.iter_mut().zip(&glayer.a) {
                    for (w, g) in row.iter_mut().zip(grow) {
                        *w -= gamma * (g + 2.0 * ridge * *w);
                    }
                }
                for (w, g) in layer.b.iter_mut().zip(&glayer.b) {
                    *w -= gamma * (g + 2.0 * ridge * *w);
                }
            }
            for (w, g) in params.r.iter_mut().zip(&grad.r) {
                *w -= gamma * (g + 2.0 * ridge * *w);
            }
        }
        let loss = mean_loss(spec, &params, data)?;
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            return Err(Error::Diverged(format!(
                "training loss reached {loss:e} at epoch {epoch}; reduce the stepsize"
            )));
        }
        loss_trace.push(loss);
    }
    Ok(TrainResult { params, loss_trace })
}

/// The trained feature extractor: evaluates the last nonlinear layer.
#[derive(Clone, Debug)]
pub struct FeatureMapping {
    spec: NetworkSpec,
    params: NetworkParams,
}

/// Packages trained parameters as a reusable feature mapping.
pub fn extract_feature_mapping(
    spec: &NetworkSpec,
    params: &NetworkParams,
) -> Result<FeatureMapping> {
    params.check_shapes(spec)?;
    Ok(FeatureMapping {
        spec: spec.clone(),
        params: params.clone(),
    })
}

impl FeatureMapping {
    pub fn feature_dim(&self) -> usize {
        self.spec.feature_dim()
    }

    /// Feature vector of one state.
    pub fn eval(&self, state: usize) -> Vec<f64> {
        forward_trace(&self.spec, &self.params, state)
            .activations
            .pop()
            .unwrap()
    }

    /// Feature rows for states `1..=n`, ready for a score-vector partition.
    pub fn matrix(&self, n: usize) -> Vec<Vec<f64>> {
        (1..=n).map(|i| self.eval(i)).collect()
    }

    /// The network's scalar estimate at one state.
    pub fn output(&self, state: usize) -> f64 {
        forward_trace(&self.spec, &self.params, state).output
    }
}
