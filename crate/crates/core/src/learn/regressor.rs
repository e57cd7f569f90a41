//! Volumetric CNN mapping an image volume to PCA loadings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::l2_loss;
use super::network::{ForwardCache, LayerSpec, Network, Tensor};
use super::train::{train_network, TrainConfig};
use crate::shape::{Loadings, ShapeSpace};
use crate::volume::Volume;
use crate::{Error, Result, FORMAT_VERSION};

/// Eigenvalues below this are not whitened.
pub const WHITEN_GUARD: f64 = 1e-12;

/// Three conv(3³)–relu–maxpool(2³) blocks with 8, 16 and 32 channels, then
/// dense(128)–relu–dense(`k`). `dims` is the volume size as `[x, y, z]`.
pub fn default_regressor_layers(dims: [usize; 3], k: usize) -> Result<Vec<LayerSpec>> {
    if dims.iter().any(|&n| n < 8) {
        return Err(Error::invalid(format!("regressor input must be at least 8 voxels per axis, got {dims:?}")));
    }
    if k == 0 {
        return Err(Error::invalid("regressor needs at least one output mode"));
    }
    let mut layers = Vec::new();
    let mut channels = 1;
    for out in [8, 16, 32] {
        layers.push(LayerSpec::Conv3d { in_channels: channels, out_channels: out, kernel: 3 });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::MaxPool { size: 2 });
        channels = out;
    }
    let flat = channels * dims.iter().map(|n| n / 8).product::<usize>();
    layers.push(LayerSpec::Flatten);
    layers.push(LayerSpec::Dense { inputs: flat, outputs: 128 });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::Dense { inputs: 128, outputs: k });
    Ok(layers)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    network: Network,
    /// Network output `j` times `target_scales[j]` is loading `j`.
    target_scales: Vec<f64>,
    /// Voxels enter the network as `(v − input_shift)/input_scale`.
    input_shift: f64,
    input_scale: f64,
}

#[derive(Serialize, Deserialize)]
struct RegressorFile {
    format_version: u32,
    kind: String,
    #[serde(flatten)]
    network: Network,
    target_scales: Vec<f64>,
    input_shift: f64,
    input_scale: f64,
}

impl RegressorModel {
    /// Default architecture with seeded initial weights and identity scalings.
    pub fn new(dims: [usize; 3], k: usize, seed: u64) -> Result<Self> {
        let [nx, ny, nz] = dims;
        let mut network = Network::new([1, nz, ny, nx], default_regressor_layers(dims, k)?)?;
        network.initialize(seed);
        Self::from_network(network, vec![1.0; k], 0.0, 1.0)
    }

    pub fn from_network(network: Network, target_scales: Vec<f64>, input_shift: f64, input_scale: f64) -> Result<Self> {
        network.validate()?;
        if network.input_shape()[0] != 1 {
            return Err(Error::invalid("regressor input must have a single channel"));
        }
        if target_scales.len() != network.output_len() {
            return Err(Error::invalid(format!(
                "{} target scales for {} network outputs",
                target_scales.len(),
                network.output_len()
            )));
        }
        if target_scales.iter().any(|s| !(*s > 0.0 && s.is_finite()))
            || !input_shift.is_finite()
            || !(input_scale > 0.0 && input_scale.is_finite())
        {
            return Err(Error::invalid("regressor scalings must be finite and positive"));
        }
        Ok(Self { network, target_scales, input_shift, input_scale })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn mode_count(&self) -> usize {
        self.target_scales.len()
    }

    pub fn target_scales(&self) -> &[f64] {
        &self.target_scales
    }

    pub fn input_normalization(&self) -> (f64, f64) {
        (self.input_shift, self.input_scale)
    }

    /// Expected volume size as `[x, y, z]`.
    pub fn input_dims(&self) -> [usize; 3] {
        let [_, d, h, w] = self.network.input_shape();
        [w, h, d]
    }

    pub fn input_tensor(&self, v: &Volume) -> Result<Tensor> {
        if v.dims() != self.input_dims() {
            return Err(Error::invalid(format!(
                "volume dims {:?} do not match regressor input {:?}",
                v.dims(),
                self.input_dims()
            )));
        }
        Ok(Tensor::from_volume(v, self.input_shift, self.input_scale))
    }

    /// Loadings from network outputs (undoes target whitening).
    pub fn unscale(&self, output: &[f64]) -> Loadings {
        Loadings(output.iter().zip(&self.target_scales).map(|(o, s)| o * s).collect())
    }

    pub fn predict(&self, v: &Volume) -> Result<Loadings> {
        Ok(self.unscale(&self.network.predict(&self.input_tensor(v)?)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&RegressorFile {
            format_version: FORMAT_VERSION,
            kind: "regressor".into(),
            network: self.network.clone(),
            target_scales: self.target_scales.clone(),
            input_shift: self.input_shift,
            input_scale: self.input_scale,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: RegressorFile = serde_json::from_str(text)?;
        if f.format_version != FORMAT_VERSION || f.kind != "regressor" {
            return Err(Error::data(format!(
                "expected a version {FORMAT_VERSION} regressor, found {} version {}",
                f.kind, f.format_version
            )));
        }
        Self::from_network(f.network, f.target_scales, f.input_shift, f.input_scale)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Forward pass returning the loadings and the cache for
/// [`Network::backward`]; the cache's output is in whitened units.
pub fn forward_regressor(m: &RegressorModel, v: &Volume) -> Result<(Loadings, ForwardCache)> {
    let cache = m.network.forward(&m.input_tensor(v)?)?;
    Ok((m.unscale(cache.output()), cache))
}

/// Per-mode target scale: `√eigenvalue` when whitening, guarded at
/// [`WHITEN_GUARD`].
pub fn target_scales(eigenvalues: &[f64], whiten: bool) -> Vec<f64> {
    eigenvalues
        .iter()
        .map(|&l| if whiten && l >= WHITEN_GUARD { l.sqrt() } else { 1.0 })
        .collect()
}

/// Trains the default regressor on `(volume, loadings)` pairs under L2 loss.
///
/// Inputs are standardized with the training set's voxel mean and standard
/// deviation; both are stored in the model. Returns the model and the mean
/// training loss of each epoch (in whitened units when whitening).
pub fn train_regressor(
    dataset: &[(Volume, Loadings)],
    cfg: &TrainConfig,
    space: &ShapeSpace,
) -> Result<(RegressorModel, Vec<f64>)> {
    cfg.validate()?;
    let Some((first, _)) = dataset.first() else {
        return Err(Error::invalid("training set is empty"));
    };
    let dims = first.dims();
    let k = space.mode_count();
    for (i, (v, l)) in dataset.iter().enumerate() {
        if v.dims() != dims {
            return Err(Error::invalid(format!("sample {i}: volume dims {:?} differ from {dims:?}", v.dims())));
        }
        if l.len() != k {
            return Err(Error::invalid(format!("sample {i}: {} loadings for {k} shape modes", l.len())));
        }
    }

    let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0usize);
    for (v, _) in dataset {
        for &x in v.data() {
            sum += x as f64;
            sum_sq += (x as f64) * (x as f64);
        }
        count += v.data().len();
    }
    let shift = sum / count as f64;
    let sd = (sum_sq / count as f64 - shift * shift).max(0.0).sqrt();
    let scale = if sd > 1e-12 { sd } else { 1.0 };

    let mut model = RegressorModel::new(dims, k, cfg.seed)?;
    model.input_shift = shift;
    model.input_scale = scale;
    model.target_scales = target_scales(space.eigenvalues(), cfg.whiten_targets);

    let targets: Vec<Vec<f64>> = dataset
        .iter()
        .map(|(_, l)| l.values().iter().zip(&model.target_scales).map(|(v, s)| v / s).collect())
        .collect();
    let curve = train_network(&mut model.network, dataset.len(), cfg, |net, i| {
        let input = Tensor::from_volume(&dataset[i].0, shift, scale);
        let cache = net.forward(&input)?;
        let (loss, grad) = l2_loss(cache.output(), &targets[i])?;
        Ok((loss, net.backward(&cache, &grad)?))
    })?;
    Ok((model, curve))
}
