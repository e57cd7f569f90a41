//! Layer specifications, a sequential network over `[channel][z][y][x]`
//! tensors, and exact reverse-mode gradients.
//!
//! Convolutions are lowered to matrix products (im2col): the forward pass
//! keeps the column matrix so the backward pass can form weight gradients
//! without recomputing it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gemm::{gemm, View};
use crate::seeding::{self, STREAM_INIT_WEIGHTS};
use crate::volume::Volume;
use crate::{Error, Result};

/// Tensor shape as `[channels, depth (z), height (y), width (x)]`.
pub type Shape = [usize; 4];

fn numel(s: Shape) -> usize {
    s.iter().product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Stride 1, zero padding `(kernel − 1)/2`, so spatial size is kept.
    Conv3d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    Relu,
    /// Non-overlapping max pooling with a cubic window; trailing voxels that
    /// do not fill a window are dropped.
    MaxPool { size: usize },
    Flatten,
    Dense { inputs: usize, outputs: usize },
    Sigmoid,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv3d { .. } => "conv3d",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Sigmoid => "sigmoid",
        }
    }

    /// Weights followed by biases.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv3d { in_channels, out_channels, kernel } => {
                out_channels * in_channels * kernel.pow(3) + out_channels
            }
            LayerSpec::Dense { inputs, outputs } => outputs * inputs + outputs,
            _ => 0,
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let [c, d, h, w] = input;
        match *self {
            LayerSpec::Conv3d { in_channels, out_channels, kernel } => {
                if kernel % 2 == 0 || kernel == 0 || in_channels == 0 || out_channels == 0 {
                    return Err(Error::invalid("conv3d needs an odd kernel and nonzero channels"));
                }
                if c != in_channels {
                    return Err(Error::invalid(format!(
                        "conv3d expects {in_channels} input channels, got {c}"
                    )));
                }
                Ok([out_channels, d, h, w])
            }
            LayerSpec::MaxPool { size } => {
                if size == 0 || d < size || h < size || w < size {
                    return Err(Error::invalid(format!(
                        "maxpool window {size} does not fit a {d}×{h}×{w} input"
                    )));
                }
                Ok([c, d / size, h / size, w / size])
            }
            LayerSpec::Flatten => Ok([numel(input), 1, 1, 1]),
            LayerSpec::Dense { inputs, outputs } => {
                if input != [inputs, 1, 1, 1] || outputs == 0 {
                    return Err(Error::invalid(format!(
                        "dense expects a flat input of {inputs}, got shape {input:?}"
                    )));
                }
                Ok([outputs, 1, 1, 1])
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok(input),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(Error::invalid(format!(
                "tensor shape {shape:?} needs {} values, got {}",
                numel(shape),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: [data.len(), 1, 1, 1], data }
    }

    /// One-channel tensor from a volume, `(v − shift)/scale` per voxel.
    pub fn from_volume(v: &Volume, shift: f64, scale: f64) -> Self {
        let [nx, ny, nz] = v.dims();
        Tensor {
            shape: [1, nz, ny, nx],
            data: v.data().iter().map(|&x| (x as f64 - shift) / scale).collect(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Per-layer state saved by the forward pass.
#[derive(Debug, Clone)]
enum Saved {
    Conv { col: Vec<f64> },
    Relu { output: Vec<f64> },
    MaxPool { argmax: Vec<usize> },
    Flatten,
    Dense { input: Vec<f64> },
    Sigmoid { output: Vec<f64> },
}

/// Activations from [`Network::forward`], consumed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerSpec>,
    /// Input shape of every layer, then the output shape.
    shapes: Vec<Shape>,
    saved: Vec<Saved>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Which side of every relu kink and which pooling winner each activation
    /// took. Finite differences are only meaningful while this stays fixed.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let mut pattern = Vec::new();
        for s in &self.saved {
            match s {
                Saved::Relu { output } => pattern.extend(output.iter().map(|&v| (v > 0.0) as usize)),
                Saved::MaxPool { argmax } => pattern.extend_from_slice(argmax),
                _ => {}
            }
        }
        pattern
    }
}

/// A feed-forward stack of layers with one flat parameter array per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    input_shape: Shape,
    layers: Vec<LayerSpec>,
    #[serde(rename = "parameters")]
    params: Vec<Vec<f64>>,
}

impl Network {
    /// Network with all parameters zero.
    pub fn new(input_shape: Shape, layers: Vec<LayerSpec>) -> Result<Self> {
        let params = layers.iter().map(|l| vec![0.0; l.param_count()]).collect();
        Self::with_parameters(input_shape, layers, params)
    }

    pub fn with_parameters(input_shape: Shape, layers: Vec<LayerSpec>, params: Vec<Vec<f64>>) -> Result<Self> {
        let net = Network { input_shape, layers, params };
        net.validate()?;
        Ok(net)
    }

    /// Checks that layer shapes chain and parameter arrays match the specs.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("network has no layers"));
        }
        if numel(self.input_shape) == 0 {
            return Err(Error::invalid("network input shape is empty"));
        }
        if self.params.len() != self.layers.len() {
            return Err(Error::invalid(format!(
                "{} parameter arrays for {} layers",
                self.params.len(),
                self.layers.len()
            )));
        }
        let mut shape = self.input_shape;
        for (i, (layer, p)) in self.layers.iter().zip(&self.params).enumerate() {
            shape = layer
                .output_shape(shape)
                .map_err(|e| Error::invalid(format!("layer {i} ({}): {e}", layer.kind())))?;
            if p.len() != layer.param_count() {
                return Err(Error::invalid(format!(
                    "layer {i} ({}) expects {} parameters, got {}",
                    layer.kind(),
                    layer.param_count(),
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(())
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn output_len(&self) -> usize {
        let mut shape = self.input_shape;
        for l in &self.layers {
            shape = l.output_shape(shape).expect("validated network");
        }
        numel(shape)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Vec::len).sum()
    }

    /// Human-readable layer name, e.g. `conv3d#1 (layer 3)`.
    pub fn layer_name(&self, index: usize) -> String {
        let kind = self.layers[index].kind();
        let ordinal = self.layers[..index].iter().filter(|l| l.kind() == kind).count();
        format!("{kind}#{ordinal} (layer {index})")
    }

    pub fn zero_gradients(&self) -> Vec<Vec<f64>> {
        self.params.iter().map(|p| vec![0.0; p.len()]).collect()
    }

    /// Seeded initialization: He-uniform for layers feeding a relu,
    /// Xavier-uniform otherwise; biases start at zero.
    pub fn initialize(&mut self, seed: u64) {
        let mut rng = seeding::rng(seed, 0, STREAM_INIT_WEIGHTS);
        for i in 0..self.layers.len() {
            let (fan_in, fan_out, weights) = match self.layers[i] {
                LayerSpec::Conv3d { in_channels, out_channels, kernel } => {
                    let k3 = kernel.pow(3);
                    (in_channels * k3, out_channels * k3, out_channels * in_channels * k3)
                }
                LayerSpec::Dense { inputs, outputs } => (inputs, outputs, inputs * outputs),
                _ => continue,
            };
            let feeds_relu = matches!(self.layers.get(i + 1), Some(LayerSpec::Relu));
            let limit = if feeds_relu {
                (6.0 / fan_in as f64).sqrt()
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            };
            let p = &mut self.params[i];
            for v in &mut p[..weights] {
                *v = rng.random_range(-limit..limit);
            }
            p[weights..].fill(0.0);
        }
    }

    pub fn predict(&self, input: &Tensor) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.output)
    }

    pub fn forward(&self, input: &Tensor) -> Result<ForwardCache> {
        if input.shape != self.input_shape {
            return Err(Error::invalid(format!(
                "input shape {:?} does not match network input {:?}",
                input.shape, self.input_shape
            )));
        }
        let mut shapes = vec![input.shape];
        let mut saved = Vec::with_capacity(self.layers.len());
        let mut x = input.data.clone();
        let mut shape = input.shape;
        for (layer, p) in self.layers.iter().zip(&self.params) {
            let out_shape = layer.output_shape(shape)?;
            match *layer {
                LayerSpec::Conv3d { out_channels, kernel, .. } => {
                    let [c, d, h, w] = shape;
                    let n = d * h * w;
                    let kk = c * kernel.pow(3);
                    let mut col = vec![0.0; kk * n];
                    im2col(&x, c, [d, h, w], kernel, &mut col);
                    let (weights, bias) = p.split_at(out_channels * kk);
                    let mut y = vec![0.0; out_channels * n];
                    for (row, &b) in y.chunks_exact_mut(n).zip(bias) {
                        row.fill(b);
                    }
                    gemm(View::rows(weights, out_channels, kk), View::rows(&col, kk, n), 1.0, &mut y);
                    saved.push(Saved::Conv { col });
                    x = y;
                }
                LayerSpec::Relu => {
                    for v in &mut x {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                    saved.push(Saved::Relu { output: x.clone() });
                }
                LayerSpec::MaxPool { size } => {
                    let (y, argmax) = maxpool(&x, shape, out_shape, size);
                    saved.push(Saved::MaxPool { argmax });
                    x = y;
                }
                LayerSpec::Flatten => saved.push(Saved::Flatten),
                LayerSpec::Dense { inputs, outputs } => {
                    let (weights, bias) = p.split_at(outputs * inputs);
                    let y = weights
                        .chunks_exact(inputs)
                        .zip(bias)
                        .map(|(row, &b)| b + row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>())
                        .collect();
                    saved.push(Saved::Dense { input: std::mem::replace(&mut x, y) });
                }
                LayerSpec::Sigmoid => {
                    for v in &mut x {
                        *v = sigmoid(*v);
                    }
                    saved.push(Saved::Sigmoid { output: x.clone() });
                }
            }
            shape = out_shape;
            shapes.push(shape);
        }
        Ok(ForwardCache {
            layers: self.layers.clone(),
            shapes,
            saved,
            output: x,
        })
    }

    /// Parameter gradients of `upstream · output` given the forward cache;
    /// `upstream` is the loss gradient with respect to the network output.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<Vec<Vec<f64>>> {
        if cache.layers != self.layers
            || cache.shapes.first() != Some(&self.input_shape)
            || cache.saved.len() != self.layers.len()
        {
            return Err(Error::invalid("stale or mismatched forward cache"));
        }
        if upstream.len() != cache.output.len() {
            return Err(Error::invalid(format!(
                "upstream gradient has {} entries, network output has {}",
                upstream.len(),
                cache.output.len()
            )));
        }
        let mut grads = self.zero_gradients();
        let mut g = upstream.to_vec();
        for i in (0..self.layers.len()).rev() {
            let in_shape = cache.shapes[i];
            match (&self.layers[i], &cache.saved[i]) {
                (&LayerSpec::Conv3d { out_channels, kernel, .. }, Saved::Conv { col }) => {
                    let [c, d, h, w] = in_shape;
                    let n = d * h * w;
                    let kk = c * kernel.pow(3);
                    let (gw, gb) = grads[i].split_at_mut(out_channels * kk);
                    gemm(View::rows(&g, out_channels, n), View::transposed(col, kk, n), 0.0, gw);
                    for (b, row) in gb.iter_mut().zip(g.chunks_exact(n)) {
                        *b = row.iter().sum();
                    }
                    if i > 0 {
                        let weights = &self.params[i][..out_channels * kk];
                        let mut gcol = vec![0.0; kk * n];
                        gemm(
                            View::transposed(weights, out_channels, kk),
                            View::rows(&g, out_channels, n),
                            0.0,
                            &mut gcol,
                        );
                        let mut gin = vec![0.0; c * n];
                        col2im(&gcol, c, [d, h, w], kernel, &mut gin);
                        g = gin;
                    }
                }
                (LayerSpec::Relu, Saved::Relu { output }) => {
                    for (gv, &o) in g.iter_mut().zip(output) {
                        if o <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                }
                (LayerSpec::MaxPool { .. }, Saved::MaxPool { argmax }) => {
                    let mut gin = vec![0.0; numel(in_shape)];
                    for (&a, &gv) in argmax.iter().zip(&g) {
                        gin[a] += gv;
                    }
                    g = gin;
                }
                (LayerSpec::Flatten, Saved::Flatten) => {}
                (&LayerSpec::Dense { inputs, outputs }, Saved::Dense { input }) => {
                    let (gw, gb) = grads[i].split_at_mut(outputs * inputs);
                    for ((row, b), &gv) in gw.chunks_exact_mut(inputs).zip(gb.iter_mut()).zip(&g) {
                        for (r, &x) in row.iter_mut().zip(input) {
                            *r = gv * x;
                        }
                        *b = gv;
                    }
                    if i > 0 {
                        let weights = &self.params[i][..outputs * inputs];
                        let mut gin = vec![0.0; inputs];
                        for (row, &gv) in weights.chunks_exact(inputs).zip(&g) {
                            for (acc, &wv) in gin.iter_mut().zip(row) {
                                *acc += wv * gv;
                            }
                        }
                        g = gin;
                    }
                }
                (LayerSpec::Sigmoid, Saved::Sigmoid { output }) => {
                    for (gv, &y) in g.iter_mut().zip(output) {
                        *gv *= y * (1.0 - y);
                    }
                }
                _ => return Err(Error::invalid("stale or mismatched forward cache")),
            }
        }
        Ok(grads)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Visits every (column-matrix row, destination span, source span) for a
/// zero-padded `kernel³` window over a `[channels][d][h][w]` tensor.
fn for_each_patch_row(
    channels: usize,
    [d, h, w]: [usize; 3],
    kernel: usize,
    mut f: impl FnMut(std::ops::Range<usize>, usize),
) {
    let pad = (kernel - 1) / 2;
    let n = d * h * w;
    for ci in 0..channels {
        for kz in 0..kernel {
            for ky in 0..kernel {
                for kx in 0..kernel {
                    let row = ((ci * kernel + kz) * kernel + ky) * kernel + kx;
                    // Output x reads input x + kx − pad, which must lie in [0, w).
                    let x0 = pad.saturating_sub(kx);
                    let x1 = (w + pad).saturating_sub(kx).min(w);
                    if x0 >= x1 {
                        continue;
                    }
                    for z in 0..d {
                        let zs = z + kz;
                        if zs < pad || zs - pad >= d {
                            continue;
                        }
                        for y in 0..h {
                            let ys = y + ky;
                            if ys < pad || ys - pad >= h {
                                continue;
                            }
                            let dst = row * n + (z * h + y) * w;
                            let src = ((ci * d + zs - pad) * h + ys - pad) * w + x0 + kx - pad;
                            f(dst + x0..dst + x1, src);
                        }
                    }
                }
            }
        }
    }
}

fn im2col(input: &[f64], channels: usize, dims: [usize; 3], kernel: usize, col: &mut [f64]) {
    for_each_patch_row(channels, dims, kernel, |dst, src| {
        let len = dst.len();
        col[dst].copy_from_slice(&input[src..src + len]);
    });
}

fn col2im(col: &[f64], channels: usize, dims: [usize; 3], kernel: usize, out: &mut [f64]) {
    for_each_patch_row(channels, dims, kernel, |dst, src| {
        let len = dst.len();
        for (o, &c) in out[src..src + len].iter_mut().zip(&col[dst]) {
            *o += c;
        }
    });
}

fn maxpool(x: &[f64], [c, d, h, w]: Shape, [_, od, oh, ow]: Shape, size: usize) -> (Vec<f64>, Vec<usize>) {
    let mut y = Vec::with_capacity(c * od * oh * ow);
    let mut argmax = Vec::with_capacity(y.capacity());
    for ch in 0..c {
        for oz in 0..od {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = ((ch * d + oz * size) * h + oy * size) * w + ox * size;
                    for dz in 0..size {
                        for dy in 0..size {
                            let base = ((ch * d + oz * size + dz) * h + oy * size + dy) * w + ox * size;
                            for (dx, &v) in x[base..base + size].iter().enumerate() {
                                // First maximum wins ties.
                                if v > best {
                                    best = v;
                                    arg = base + dx;
                                }
                            }
                        }
                    }
                    y.push(best);
                    argmax.push(arg);
                }
            }
        }
    }
    (y, argmax)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(cin: usize, cout: usize, k: usize) -> LayerSpec {
        LayerSpec::Conv3d { in_channels: cin, out_channels: cout, kernel: k }
    }

    #[test]
    fn identity_kernel_passes_input_through() {
        let net = Network::with_parameters([1, 3, 4, 5], vec![conv(1, 1, 1)], vec![vec![1.0, 0.0]]).unwrap();
        let data: Vec<f64> = (0..60).map(|i| i as f64 * 0.5 - 3.0).collect();
        let out = net.predict(&Tensor::new([1, 3, 4, 5], data.clone()).unwrap()).unwrap();
        assert_eq!(out, data);
    }

    #[test]
    fn ones_kernel_impulse_response_is_the_neighbourhood() {
        let mut p = vec![1.0; 27];
        p.push(0.0);
        let net = Network::with_parameters([1, 5, 5, 5], vec![conv(1, 1, 3)], vec![p]).unwrap();
        let mut data = vec![0.0; 125];
        data[(2 * 5 + 1) * 5 + 3] = 1.0; // z=2, y=1, x=3
        let out = net.predict(&Tensor::new([1, 5, 5, 5], data).unwrap()).unwrap();
        for z in 0..5usize {
            for y in 0..5usize {
                for x in 0..5usize {
                    let inside = z.abs_diff(2) <= 1 && y.abs_diff(1) <= 1 && x.abs_diff(3) <= 1;
                    assert_eq!(out[(z * 5 + y) * 5 + x], inside as u8 as f64);
                }
            }
        }
    }

    #[test]
    fn shape_chain_is_validated() {
        assert!(Network::new([1, 8, 8, 8], vec![conv(2, 4, 3)]).is_err());
        assert!(Network::new([1, 8, 8, 8], vec![LayerSpec::Dense { inputs: 512, outputs: 2 }]).is_err());
        assert!(Network::new([1, 8, 8, 8], vec![conv(1, 1, 2)]).is_err());
        let net = Network::new(
            [1, 8, 8, 8],
            vec![conv(1, 2, 3), LayerSpec::MaxPool { size: 2 }, LayerSpec::Flatten, LayerSpec::Dense { inputs: 128, outputs: 3 }],
        )
        .unwrap();
        assert_eq!(net.output_len(), 3);
        assert_eq!(net.parameter_count(), 2 * 27 + 2 + 128 * 3 + 3);
        assert!(Network::with_parameters([1, 4, 4, 4], vec![conv(1, 1, 1)], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn maxpool_picks_window_maximum_and_routes_gradient() {
        let data: Vec<f64> = (0..64).map(|i| ((i * 37) % 64) as f64).collect();
        let net = Network::new([1, 4, 4, 4], vec![LayerSpec::MaxPool { size: 2 }]).unwrap();
        let input = Tensor::new([1, 4, 4, 4], data.clone()).unwrap();
        let cache = net.forward(&input).unwrap();
        for (o, &v) in cache.output().iter().enumerate() {
            let (oz, oy, ox) = (o / 4, (o / 2) % 2, o % 2);
            let mut m = f64::MIN;
            for dz in 0..2 {
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(data[((oz * 2 + dz) * 4 + oy * 2 + dy) * 4 + ox * 2 + dx]);
                    }
                }
            }
            assert_eq!(v, m);
        }
    }

    #[test]
    fn relu_blocks_gradient_at_negative_preactivation() {
        let net = Network::with_parameters(
            [2, 1, 1, 1],
            vec![LayerSpec::Dense { inputs: 2, outputs: 2 }, LayerSpec::Relu, LayerSpec::Dense { inputs: 2, outputs: 1 }],
            vec![vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![], vec![1.0, 1.0, 0.0]],
        )
        .unwrap();
        let cache = net.forward(&Tensor::vector(vec![-2.0, 3.0])).unwrap();
        assert_eq!(cache.output(), &[3.0]);
        let g = net.backward(&cache, &[1.0]).unwrap();
        // Only the unit with positive pre-activation carries gradient.
        assert_eq!(g[0], vec![0.0, 0.0, -2.0, 3.0, 0.0, 1.0]);
        assert_eq!(g[2], vec![0.0, 3.0, 1.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut net = Network::new(
            [1, 4, 4, 4],
            vec![conv(1, 2, 3), LayerSpec::Relu, LayerSpec::Flatten, LayerSpec::Dense { inputs: 128, outputs: 2 }, LayerSpec::Sigmoid],
        )
        .unwrap();
        net.initialize(3);
        let input = Tensor::new([1, 4, 4, 4], (0..64).map(|i| (i as f64).sin()).collect()).unwrap();
        let cache = net.forward(&input).unwrap();
        let g = net.backward(&cache, &[0.0, 0.0]).unwrap();
        assert!(g.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_cache_is_rejected() {
        let a = Network::new([3, 1, 1, 1], vec![LayerSpec::Dense { inputs: 3, outputs: 1 }]).unwrap();
        let b = Network::new([3, 1, 1, 1], vec![LayerSpec::Dense { inputs: 3, outputs: 1 }, LayerSpec::Sigmoid]).unwrap();
        let cache = a.forward(&Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        assert!(b.backward(&cache, &[1.0]).is_err());
        assert!(a.backward(&cache, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn initialization_is_seeded_and_bounded() {
        let layers = vec![conv(1, 4, 3), LayerSpec::Relu, LayerSpec::Flatten, LayerSpec::Dense { inputs: 256, outputs: 3 }];
        let mut a = Network::new([1, 4, 4, 4], layers.clone()).unwrap();
        let mut b = Network::new([1, 4, 4, 4], layers).unwrap();
        a.initialize(11);
        b.initialize(11);
        assert_eq!(a, b);
        let he = (6.0f64 / 27.0).sqrt();
        assert!(a.params()[0][..108].iter().all(|v| v.abs() <= he));
        assert!(a.params()[0][108..].iter().all(|&v| v == 0.0));
        let xavier = (6.0f64 / 259.0).sqrt();
        assert!(a.params()[3][..768].iter().all(|v| v.abs() <= xavier));
        b.initialize(12);
        assert_ne!(a, b);
    }

    #[test]
    fn layer_names_count_per_kind() {
        let net = Network::new([1, 4, 4, 4], vec![conv(1, 1, 3), LayerSpec::Relu, conv(1, 1, 3)]).unwrap();
        assert_eq!(net.layer_name(0), "conv3d#0 (layer 0)");
        assert_eq!(net.layer_name(2), "conv3d#1 (layer 2)");
    }
}
