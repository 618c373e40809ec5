use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Dual2, ParamVector, Real};
use crate::error::{Error, Result};

thread_local! {
    static SECOND_ORDER_PASSES: Cell<usize> = const { Cell::new(0) };
}

/// Number of forward passes on this thread that propagated second-order
/// spatial channels.
pub fn second_order_passes() -> usize {
    SECOND_ORDER_PASSES.with(|c| c.get())
}

pub fn reset_second_order_passes() {
    SECOND_ORDER_PASSES.with(|c| c.set(0));
}

pub(crate) fn count_second_order_pass() {
    SECOND_ORDER_PASSES.with(|c| c.set(c.get() + 1));
}

/// Fully connected feed-forward network: tanh on hidden layers, affine
/// output layer.
///
/// Parameters are stored flat, layer by layer: the weight matrix of layer
/// `l` (shape `sizes[l] x sizes[l-1]`, row-major) followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Offsets of one layer inside the flat parameter vector.
#[derive(Clone, Copy, Debug)]
pub(crate) struct LayerSlice {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: usize,
    pub bias: usize,
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::structural(format!(
            "an MLP needs at least input and output sizes, got {sizes:?}"
        )));
    }
    if sizes.iter().any(|&n| n == 0) {
        return Err(Error::structural(format!(
            "layer sizes must be positive, got {sizes:?}"
        )));
    }
    Ok(())
}

/// Draw weights uniformly in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> Result<Mlp> {
    validate_sizes(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(param_count(layer_sizes));
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            params.push(rng.random_range(-limit..limit));
        }
        params.extend(std::iter::repeat_n(0.0, fan_out));
    }
    Ok(Mlp {
        sizes: layer_sizes.to_vec(),
        params,
    })
}

impl Mlp {
    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Result<Self> {
        validate_sizes(&sizes)?;
        let expected = param_count(&sizes);
        if params.len() != expected {
            return Err(Error::structural(format!(
                "expected {expected} parameters for sizes {sizes:?}, got {}",
                params.len()
            )));
        }
        Ok(Mlp { sizes, params })
    }

    /// All-zero network of the given shape.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::from_params(sizes.to_vec(), vec![0.0; param_count(sizes)])
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_vector(&self) -> ParamVector {
        ParamVector(self.params.clone())
    }

    pub(crate) fn layer(&self, l: usize) -> LayerSlice {
        let mut offset = 0;
        for w in self.sizes.windows(2).take(l) {
            offset += w[0] * w[1] + w[1];
        }
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        LayerSlice {
            fan_in,
            fan_out,
            weights: offset,
            bias: offset + fan_in * fan_out,
        }
    }

    pub(crate) fn layers(&self) -> Vec<LayerSlice> {
        (0..self.num_layers()).map(|l| self.layer(l)).collect()
    }

    /// Forward pass on duals using an externally supplied parameter vector
    /// (for instance tape variables).
    pub fn forward_with<T: Real>(&self, params: &[T], input: &[Dual2<T>]) -> Result<Vec<Dual2<T>>> {
        if input.len() != self.input_dim() {
            return Err(Error::structural(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        if params.len() != self.num_params() {
            return Err(Error::structural(format!(
                "network has {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        if input.iter().any(|d| d.is_second_order()) {
            count_second_order_pass();
        }
        let last = self.num_layers() - 1;
        let mut z: Vec<Dual2<T>> = input.to_vec();
        for (l, layer) in self.layers().into_iter().enumerate() {
            let mut next = Vec::with_capacity(layer.fan_out);
            for m in 0..layer.fan_out {
                let row = layer.weights + m * layer.fan_in;
                let mut acc = Dual2::constant(params[layer.bias + m]);
                for (n, zn) in z.iter().enumerate() {
                    acc = acc + zn.scale(params[row + n]);
                }
                next.push(if l == last { acc } else { acc.tanh() });
            }
            z = next;
        }
        Ok(z)
    }

    pub fn forward(&self, input: &[Dual2<f64>]) -> Result<Vec<Dual2<f64>>> {
        self.forward_with(&self.params, input)
    }

    /// Convenience: evaluate at a 2-D point, seeding spatial derivatives.
    pub fn forward_point(&self, point: [f64; 2], second_order: bool) -> Result<Vec<Dual2<f64>>> {
        let input = self.seed_input(point, second_order);
        self.forward(&input)
    }

    pub(crate) fn seed_input<T: Real>(&self, point: [T; 2], second_order: bool) -> Vec<Dual2<T>> {
        let mut input = vec![Dual2::var_x(point[0], second_order)];
        if self.input_dim() > 1 {
            input.push(Dual2::var_y(point[1], second_order));
        }
        input
    }

    /// Scale the output layer's weights and biases by `c`.
    pub fn scale_output_layer(&mut self, c: f64) {
        let layer = self.layer(self.num_layers() - 1);
        let end = layer.bias + layer.fan_out;
        for p in &mut self.params[layer.weights..end] {
            *p *= c;
        }
    }

    /// Text snapshot: a `sizes` header line, then per layer one line per
    /// weight row followed by one bias line. Values use shortest round-trip
    /// formatting, so reading back is bit-exact.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::new();
        out.push_str("sizes");
        for s in &self.sizes {
            out.push_str(&format!(" {s}"));
        }
        out.push('\n');
        for layer in self.layers() {
            for m in 0..layer.fan_out {
                let row = &self.params[layer.weights + m * layer.fan_in..][..layer.fan_in];
                out.push_str(&join(row));
                out.push('\n');
            }
            out.push_str(&join(&self.params[layer.bias..layer.bias + layer.fan_out]));
            out.push('\n');
        }
        out
    }

    /// Parse a snapshot produced by [`Mlp::to_snapshot`] from a line iterator.
    pub fn read_snapshot<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<Self> {
        let header = lines
            .next()
            .ok_or_else(|| Error::structural("missing sizes header"))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("sizes") {
            return Err(Error::structural(format!("bad snapshot header: {header}")));
        }
        let sizes = parts
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::structural(format!("bad layer size: {e}")))?;
        validate_sizes(&sizes)?;
        let mut params = Vec::with_capacity(param_count(&sizes));
        for w in sizes.windows(2) {
            for _ in 0..=w[1] {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::structural("truncated snapshot"))?;
                for tok in line.split_whitespace() {
                    params.push(
                        tok.parse::<f64>()
                            .map_err(|e| Error::structural(format!("bad value {tok}: {e}")))?,
                    );
                }
            }
        }
        Self::from_params(sizes, params)
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(" ")
}
