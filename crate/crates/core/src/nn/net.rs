use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
    /// Logistic sigmoid, maps the real line monotonically onto (0, 1).
    BoundedUnit,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Linear => 1,
            Activation::Softmax => 2,
            Activation::BoundedUnit => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::Linear,
            2 => Activation::Softmax,
            3 => Activation::BoundedUnit,
            _ => return None,
        })
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Linear => {}
            Activation::Relu => z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 }),
            Activation::BoundedUnit => z.mapv_inplace(sigmoid),
            Activation::Softmax => {
                for mut row in z.rows_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|v| v / sum);
                }
            }
        }
    }

    /// Turns dL/d(activation) into dL/d(pre-activation), given the activation output.
    fn backprop(self, out: &Array2<f64>, mut grad: Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Linear => {}
            // Subgradient 0 at the kink: out == 0 exactly when z <= 0.
            Activation::Relu => grad.zip_mut_with(out, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0
                }
            }),
            Activation::BoundedUnit => grad.zip_mut_with(out, |g, &a| *g *= a * (1.0 - a)),
            Activation::Softmax => {
                for (mut g, a) in grad.rows_mut().into_iter().zip(out.rows()) {
                    let dot = g.dot(&a);
                    g.zip_mut_with(&a, |gi, &ai| *gi = ai * (*gi - dot));
                }
            }
        }
        grad
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input_width: usize,
    pub output_width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_width: usize, output_width: usize, activation: Activation) -> Self {
        Self {
            input_width,
            output_width,
            activation,
        }
    }

    /// Chains `widths[0] -> widths[1] -> ...` with one activation per layer.
    pub fn chain(input_width: usize, layers: &[(usize, Activation)]) -> Vec<LayerSpec> {
        let mut width = input_width;
        layers
            .iter()
            .map(|&(out, act)| {
                let spec = LayerSpec::new(width, out, act);
                width = out;
                spec
            })
            .collect()
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Shape("network needs at least one layer".into()));
    }
    for (i, spec) in specs.iter().enumerate() {
        if spec.input_width == 0 || spec.output_width == 0 {
            return Err(Error::Shape(format!("layer {i} has a zero width")));
        }
        if spec.activation == Activation::Softmax && i + 1 != specs.len() {
            return Err(Error::Shape(format!(
                "softmax allowed only as the final layer (found at layer {i})"
            )));
        }
        if i > 0 && specs[i - 1].output_width != spec.input_width {
            return Err(Error::Shape(format!(
                "layer {i} expects {} inputs but layer {} produces {}",
                spec.input_width,
                i - 1,
                specs[i - 1].output_width
            )));
        }
    }
    Ok(())
}

/// One affine layer followed by an activation. Weights are `output x input`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    weights: Array2<f64>,
    biases: Array1<f64>,
    activation: Activation,
}

impl Dense {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::Shape(format!(
                "weights have {} rows but biases have {} entries",
                weights.nrows(),
                biases.len()
            )));
        }
        Ok(Self {
            weights: weights.as_standard_layout().into_owned(),
            biases,
            activation,
        })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.weights.ncols(), self.weights.nrows(), self.activation)
    }
}

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn fresh_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Feed-forward stack of dense layers.
#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<Dense>,
    // Changes on every parameter mutation; ties caches to the parameters they saw.
    revision: u64,
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Activations retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    revision: u64,
    // activations[0] is the input, activations[l + 1] the output of layer l.
    activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> ArrayView2<'_, f64> {
        self.activations.last().expect("cache is never empty").view()
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.activations.pop().expect("cache is never empty")
    }

    pub fn batch_size(&self) -> usize {
        self.activations[0].nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Parameter gradients, laid out like the network they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_for(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    biases: Array1::zeros(l.biases.len()),
                })
                .collect(),
        }
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.biases += &b.biases;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights *= factor;
            l.biases *= factor;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }

    /// Entries in the same order as [`DenseNet::parameters`].
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().collect()
    }
}

impl DenseNet {
    /// Builds a network with uniform Glorot initialization and zero biases.
    pub fn new(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        validate_specs(specs)?;
        let layers = specs
            .iter()
            .map(|spec| {
                let limit = (6.0 / (spec.input_width + spec.output_width) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((spec.output_width, spec.input_width), || {
                    rng.uniform_range(-limit, limit)
                });
                Dense {
                    weights,
                    biases: Array1::zeros(spec.output_width),
                    activation: spec.activation,
                }
            })
            .collect();
        Ok(Self {
            layers,
            revision: fresh_revision(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let specs: Vec<_> = layers.iter().map(Dense::spec).collect();
        validate_specs(&specs)?;
        let net = Self {
            layers,
            revision: fresh_revision(),
        };
        if !net.parameters().all(f64::is_finite) {
            return Err(Error::Domain("network parameters must be finite".into()));
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Dense::spec).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.ncols()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("nonempty").weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|p| {
                *p = it.next().expect("length checked");
            });
        }
        self.revision = fresh_revision();
        Ok(())
    }

    /// Mutable parameter segments in [`DenseNet::parameters`] order.
    pub(crate) fn parameter_segments_mut(&mut self) -> Vec<&mut [f64]> {
        self.revision = fresh_revision();
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.biases.as_slice_mut().expect("contiguous"),
                ]
            })
            .collect()
    }

    fn check_input(&self, cols: usize) -> Result<()> {
        if cols != self.input_width() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_width(),
                cols
            )));
        }
        Ok(())
    }

    /// Evaluates a batch (one example per row), keeping activations for backprop.
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        self.check_input(input.ncols())?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_owned());
        for layer in &self.layers {
            let x = activations.last().expect("nonempty");
            let mut z = x.dot(&layer.weights.t());
            z += &layer.biases;
            layer.activation.apply(&mut z);
            activations.push(z);
        }
        Ok(ForwardCache {
            revision: self.revision,
            activations,
        })
    }

    /// Batch evaluation without retaining a cache.
    pub fn predict_batch(&self, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(input.ncols())?;
        let mut x: Option<Array2<f64>> = None;
        for layer in &self.layers {
            let mut z = match &x {
                None => input.dot(&layer.weights.t()),
                Some(prev) => prev.dot(&layer.weights.t()),
            };
            z += &layer.biases;
            layer.activation.apply(&mut z);
            x = Some(z);
        }
        Ok(x.expect("nonempty"))
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let view = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::Shape(e.to_string()))?;
        let cache = self.forward_batch(view)?;
        let out = cache.output().row(0).to_vec();
        Ok((out, cache))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    fn check_cache(&self, cache: &ForwardCache, grad_out: &ArrayView2<'_, f64>) -> Result<()> {
        if cache.revision != self.revision || cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::Usage(
                "forward cache does not belong to this network state".into(),
            ));
        }
        let out = cache.output();
        if grad_out.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "output gradient {:?} does not match output {:?}",
                grad_out.dim(),
                out.dim()
            )));
        }
        Ok(())
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache,
        grad_out: ArrayView2<'_, f64>,
        want_params: bool,
        pre_activation: bool,
    ) -> Result<(Option<Gradients>, Array2<f64>)> {
        self.check_cache(cache, &grad_out)?;
        let mut grad = grad_out.to_owned();
        let mut layer_grads = Vec::with_capacity(if want_params { self.layers.len() } else { 0 });
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let dz = if pre_activation && l == last {
                grad
            } else {
                layer.activation.backprop(&cache.activations[l + 1], grad)
            };
            if want_params {
                layer_grads.push(LayerGradient {
                    weights: dz.t().dot(&cache.activations[l]),
                    biases: dz.sum_axis(Axis(0)),
                });
            }
            grad = dz.dot(&layer.weights);
        }
        let params = want_params.then(|| {
            layer_grads.reverse();
            Gradients { layers: layer_grads }
        });
        Ok((params, grad))
    }

    /// Reverse-mode pass: parameter gradients summed over the batch, and
    /// per-row gradients with respect to the input.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        grad_out: ArrayView2<'_, f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let (params, input) = self.backward_impl(cache, grad_out, true, false)?;
        Ok((params.expect("requested"), input))
    }

    /// As [`DenseNet::backward_batch`], but `grad_pre` is the gradient with
    /// respect to the last layer's pre-activation (the logits of a softmax head).
    pub fn backward_batch_pre_activation(
        &self,
        cache: &ForwardCache,
        grad_pre: ArrayView2<'_, f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let (params, input) = self.backward_impl(cache, grad_pre, true, true)?;
        Ok((params.expect("requested"), input))
    }

    /// Input gradients only; skips parameter-gradient work for frozen networks.
    pub fn input_gradient_batch(&self, cache: &ForwardCache, grad_out: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.backward_impl(cache, grad_out, false, false)?.1)
    }

    pub fn input_gradient_batch_pre_activation(
        &self,
        cache: &ForwardCache,
        grad_pre: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>> {
        Ok(self.backward_impl(cache, grad_pre, false, true)?.1)
    }

    pub fn backward(&self, cache: &ForwardCache, grad_out: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let view = ArrayView1::from(grad_out)
            .into_shape_with_order((1, grad_out.len()))
            .map_err(|e| Error::Shape(e.to_string()))?;
        let (grads, input) = self.backward_batch(cache, view)?;
        Ok((grads, input.row(0).to_vec()))
    }
}
