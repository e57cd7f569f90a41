//! Two-layer perceptron predicting a recurrence probability from loadings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::bce_loss;
use super::network::{LayerSpec, Network, Tensor};
use super::train::{train_network, TrainConfig};
use crate::shape::Loadings;
use crate::{Error, Result, FORMAT_VERSION};

pub const HIDDEN_UNITS: usize = 16;

pub fn recurrence_layers(k: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Dense { inputs: k, outputs: HIDDEN_UNITS },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: HIDDEN_UNITS, outputs: 1 },
        LayerSpec::Sigmoid,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceModel {
    network: Network,
    /// Loading `j` enters the network divided by `input_scales[j]`.
    input_scales: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RecurrenceFile {
    format_version: u32,
    kind: String,
    #[serde(flatten)]
    network: Network,
    input_scales: Vec<f64>,
}

impl RecurrenceModel {
    /// Seeded initial weights and unit input scales.
    pub fn new(k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("recurrence model needs at least one loading"));
        }
        let mut network = Network::new([k, 1, 1, 1], recurrence_layers(k))?;
        network.initialize(seed);
        Self::from_network(network, vec![1.0; k])
    }

    /// Wraps a network that must be a `k → 1` stack ending in a sigmoid.
    pub fn from_network(network: Network, input_scales: Vec<f64>) -> Result<Self> {
        network.validate()?;
        let k = input_scales.len();
        if network.input_shape() != [k, 1, 1, 1] || network.output_len() != 1 {
            return Err(Error::invalid(format!("recurrence network must map {k} loadings to one output")));
        }
        if network.layers().last() != Some(&LayerSpec::Sigmoid) {
            return Err(Error::invalid("recurrence network must end in a sigmoid"));
        }
        if input_scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("recurrence input scales must be finite and positive"));
        }
        Ok(Self { network, input_scales })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn mode_count(&self) -> usize {
        self.input_scales.len()
    }

    pub fn input_scales(&self) -> &[f64] {
        &self.input_scales
    }

    pub fn input_tensor(&self, l: &[f64]) -> Result<Tensor> {
        if l.len() != self.mode_count() {
            return Err(Error::invalid(format!(
                "{} loadings given, recurrence model expects {}",
                l.len(),
                self.mode_count()
            )));
        }
        Ok(Tensor::vector(l.iter().zip(&self.input_scales).map(|(v, s)| v / s).collect()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RecurrenceFile {
            format_version: FORMAT_VERSION,
            kind: "recurrence".into(),
            network: self.network.clone(),
            input_scales: self.input_scales.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: RecurrenceFile = serde_json::from_str(text)?;
        if f.format_version != FORMAT_VERSION || f.kind != "recurrence" {
            return Err(Error::data(format!(
                "expected a version {FORMAT_VERSION} recurrence model, found {} version {}",
                f.kind, f.format_version
            )));
        }
        Self::from_network(f.network, f.input_scales)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Recurrence probability, strictly inside (0, 1).
pub fn predict_recurrence(m: &RecurrenceModel, l: &Loadings) -> Result<f64> {
    let p = m.network.predict(&m.input_tensor(l.values())?)?[0];
    Ok(p.clamp(f64::EPSILON, 1.0 - f64::EPSILON))
}

/// Trains the MLP under mean binary cross-entropy.
///
/// Each loading is divided by its training-set standard deviation (1 when
/// that is zero) so the default learning rate suits loadings in mm.
/// Returns the model and the mean training loss of each epoch.
pub fn train_recurrence(loadings: &[Vec<f64>], labels: &[bool], cfg: &TrainConfig) -> Result<(RecurrenceModel, Vec<f64>)> {
    cfg.validate()?;
    let n = loadings.len();
    if n != labels.len() {
        return Err(Error::invalid(format!("{n} loading rows but {} labels", labels.len())));
    }
    if n < 2 {
        return Err(Error::invalid("recurrence training needs at least 2 samples"));
    }
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(Error::data("degenerate labels: both classes must be present"));
    }
    let k = loadings[0].len();
    if k == 0 || loadings.iter().any(|l| l.len() != k) {
        return Err(Error::invalid("loading rows must share a nonzero length"));
    }
    if loadings.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("loadings must be finite"));
    }
    let scales = (0..k)
        .map(|j| {
            let mean = loadings.iter().map(|l| l[j]).sum::<f64>() / n as f64;
            let var = loadings.iter().map(|l| (l[j] - mean).powi(2)).sum::<f64>() / n as f64;
            if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 }
        })
        .collect();
    let mut model = RecurrenceModel::new(k, cfg.seed)?;
    model.input_scales = scales;
    let inputs: Vec<Tensor> = loadings.iter().map(|l| model.input_tensor(l)).collect::<Result<_>>()?;
    let curve = train_network(&mut model.network, n, cfg, |net, i| {
        let cache = net.forward(&inputs[i])?;
        let (loss, grad) = bce_loss(cache.output()[0], labels[i]);
        Ok((loss, net.backward(&cache, &[grad])?))
    })?;
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_predicts_one_half() {
        let net = Network::new([3, 1, 1, 1], recurrence_layers(3)).unwrap();
        let m = RecurrenceModel::from_network(net, vec![1.0; 3]).unwrap();
        assert_eq!(predict_recurrence(&m, &Loadings(vec![1.0, -2.0, 3.0])).unwrap(), 0.5);
        assert!(predict_recurrence(&m, &Loadings(vec![1.0])).is_err());
    }

    #[test]
    fn pinned_two_parameter_model() {
        // One path: hidden unit 0 gets weight a on loading 0, output weight b.
        let (a, b) = (1.5, -0.8);
        let mut net = Network::new([1, 1, 1, 1], recurrence_layers(1)).unwrap();
        net.params_mut()[0][0] = a;
        net.params_mut()[2][0] = b;
        let m = RecurrenceModel::from_network(net, vec![1.0]).unwrap();
        for x in [-2.0, 0.0, 0.7, 3.0] {
            let expected = 1.0 / (1.0 + (-(b * f64::max(a * x, 0.0))).exp());
            let got = predict_recurrence(&m, &Loadings(vec![x])).unwrap();
            assert!((got - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn monotone_along_a_positive_path() {
        let mut net = Network::new([2, 1, 1, 1], recurrence_layers(2)).unwrap();
        net.params_mut()[0][0] = 0.9;
        net.params_mut()[2][0] = 1.3;
        let m = RecurrenceModel::from_network(net, vec![1.0; 2]).unwrap();
        let mut last = 0.0;
        for i in -20..20 {
            let p = predict_recurrence(&m, &Loadings(vec![i as f64 * 0.25, 0.4])).unwrap();
            assert!(p >= last);
            last = p;
        }
    }

    #[test]
    fn separable_data_is_learned() {
        let loadings: Vec<Vec<f64>> = (0..20).map(|i| vec![if i % 2 == 0 { -1.0 } else { 1.0 }]).collect();
        let labels: Vec<bool> = (0..20).map(|i| i % 2 == 1).collect();
        let cfg = TrainConfig { epochs: 500, seed: 2, ..Default::default() };
        let (m, curve) = train_recurrence(&loadings, &labels, &cfg).unwrap();
        assert!(curve[499] < curve[0]);
        for (l, &y) in loadings.iter().zip(&labels) {
            let p = predict_recurrence(&m, &Loadings(l.clone())).unwrap();
            assert_eq!(p > 0.5, y);
        }
    }

    #[test]
    fn uninformative_features_give_class_prior() {
        let loadings = vec![vec![0.0, 0.0]; 40];
        let labels: Vec<bool> = (0..40).map(|i| i % 4 == 0).collect();
        let cfg = TrainConfig { epochs: 400, learning_rate: 0.05, seed: 1, ..Default::default() };
        let (m, _) = train_recurrence(&loadings, &labels, &cfg).unwrap();
        let p = predict_recurrence(&m, &Loadings(vec![0.0, 0.0])).unwrap();
        assert!((p - 0.25).abs() < 0.01, "{p}");
    }

    #[test]
    fn rejects_single_class() {
        let err = train_recurrence(&[vec![1.0], vec![2.0]], &[true, true], &TrainConfig::default()).unwrap_err();
        assert!(err.to_string().contains("degenerate labels"));
    }

    #[test]
    fn json_roundtrip() {
        let m = RecurrenceModel::new(4, 3).unwrap();
        assert_eq!(RecurrenceModel::from_json(&m.to_json().unwrap()).unwrap(), m);
        // A recurrence file is not a regressor file.
        assert!(crate::learn::RegressorModel::from_json(&m.to_json().unwrap()).is_err());
    }
}
