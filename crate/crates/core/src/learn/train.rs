//! Shared minibatch training loop.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adagrad::{adagrad_step, AdagradState};
use super::network::Network;
use crate::seeding::{self, STREAM_SHUFFLE};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adagrad_epsilon: f64,
    /// Divide regression targets per mode by √eigenvalue.
    pub whiten_targets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 240,
            batch_size: 16,
            seed: 0,
            adagrad_epsilon: 1e-8,
            whiten_targets: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be at least 1"));
        }
        if !(self.adagrad_epsilon > 0.0 && self.adagrad_epsilon.is_finite()) {
            return Err(Error::invalid("adagrad epsilon must be positive"));
        }
        Ok(())
    }
}

/// Runs `cfg.epochs` of shuffled minibatch Adagrad. `sample_grad(net, i)`
/// returns sample `i`'s loss and parameter gradients.
///
/// Samples within a batch may be evaluated on any worker, but their gradients
/// are summed in batch order, so the result does not depend on scheduling.
/// Returns the mean per-sample loss of every epoch.
pub(crate) fn train_network<F>(net: &mut Network, samples: usize, cfg: &TrainConfig, sample_grad: F) -> Result<Vec<f64>>
where
    F: Fn(&Network, usize) -> Result<(f64, Vec<Vec<f64>>)> + Sync,
{
    cfg.validate()?;
    if samples == 0 {
        return Err(Error::invalid("training set is empty"));
    }
    let mut state = AdagradState::new(net.params());
    let mut rng = seeding::rng(cfg.seed, 0, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..samples).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let frozen = &*net;
            let results: Vec<(f64, Vec<Vec<f64>>)> = batch
                .par_iter()
                .map(|&i| sample_grad(frozen, i))
                .collect::<Result<_>>()?;
            let mut sum = net.zero_gradients();
            for (loss, grads) in &results {
                total += loss;
                for (s, g) in sum.iter_mut().zip(grads) {
                    for (a, b) in s.iter_mut().zip(g) {
                        *a += b;
                    }
                }
            }
            let inv = 1.0 / batch.len() as f64;
            sum.iter_mut().flatten().for_each(|v| *v *= inv);
            adagrad_step(net.params_mut(), &sum, &mut state, cfg.learning_rate, cfg.adagrad_epsilon)?;
        }
        let mean = total / samples as f64;
        if !mean.is_finite() {
            return Err(Error::numeric(format!("non-finite training loss at epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: mean loss {mean:.6e}");
        curve.push(mean);
    }
    if net.params().iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numeric("training produced non-finite parameters"));
    }
    Ok(curve)
}

/// Loss curve as CSV with header `epoch,loss`, epochs numbered from 1.
pub fn format_loss_curve(curve: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        out.push_str(&format!("{},{:.16e}\n", i + 1, l));
    }
    out
}

pub fn write_loss_curve(path: &std::path::Path, curve: &[f64]) -> Result<()> {
    std::fs::write(path, format_loss_curve(curve)).map_err(|e| Error::io(path, e))
}
