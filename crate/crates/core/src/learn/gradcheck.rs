//! Central-difference verification of analytic parameter gradients.

use rand::seq::index::sample;
use serde::Serialize;

use super::loss::{bce_loss, l2_loss};
use super::network::{Network, Tensor};
use crate::seeding::{self, STREAM_GRADCHECK};
use crate::{Error, Result};

/// Gradients smaller than this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Scalar objective on the network output.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    L2 { target: Vec<f64> },
    CrossEntropy { label: bool },
}

impl Objective {
    /// Loss and its gradient with respect to the network output.
    pub fn evaluate(&self, output: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            Objective::L2 { target } => l2_loss(output, target),
            Objective::CrossEntropy { label } => {
                if output.len() != 1 {
                    return Err(Error::invalid("cross-entropy needs a single network output"));
                }
                let (l, g) = bce_loss(output[0], *label);
                Ok((l, vec![g]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckOptions {
    pub step: f64,
    pub threshold: f64,
    /// Check at most this many seeded-random parameters per layer.
    pub max_per_layer: Option<usize>,
    pub seed: u64,
}

impl Default for GradientCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            threshold: 1e-4,
            max_per_layer: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterLocation {
    pub layer: usize,
    pub layer_name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientCheckReport {
    pub max_relative_error: f64,
    /// Parameter with the largest relative error.
    pub worst: Option<ParameterLocation>,
    pub checked: usize,
    /// Parameters whose perturbation moved a relu or pooling decision; their
    /// finite differences straddle a kink and are not comparable.
    pub skipped_at_kinks: usize,
    pub threshold: f64,
    pub passed: bool,
}

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares backpropagated gradients of `objective` at `input` with central
/// differences of step `opts.step`.
pub fn gradient_check(
    net: &Network,
    input: &Tensor,
    objective: &Objective,
    opts: &GradientCheckOptions,
) -> Result<GradientCheckReport> {
    check_step(opts)?;
    let cache = net.forward(input)?;
    let (_, upstream) = objective.evaluate(cache.output())?;
    let analytic = net.backward(&cache, &upstream)?;
    compare_gradients(net, input, objective, &analytic, opts)
}

/// Like [`gradient_check`] but against caller-supplied analytic gradients.
pub fn compare_gradients(
    net: &Network,
    input: &Tensor,
    objective: &Objective,
    analytic: &[Vec<f64>],
    opts: &GradientCheckOptions,
) -> Result<GradientCheckReport> {
    check_step(opts)?;
    if analytic.len() != net.params().len() || analytic.iter().zip(net.params()).any(|(a, p)| a.len() != p.len()) {
        return Err(Error::invalid("analytic gradients do not match the network parameters"));
    }
    let base = net.forward(input)?.activation_pattern();
    let mut rng = seeding::rng(opts.seed, 0, STREAM_GRADCHECK);
    let mut probe = net.clone();
    let mut report = GradientCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
        skipped_at_kinks: 0,
        threshold: opts.threshold,
        passed: false,
    };
    for layer in 0..net.params().len() {
        let count = net.params()[layer].len();
        let indices: Vec<usize> = match opts.max_per_layer {
            Some(m) if m < count => {
                let mut v = sample(&mut rng, count, m).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..count).collect(),
        };
        for index in indices {
            let original = net.params()[layer][index];
            let mut eval = |value: f64| -> Result<(f64, bool)> {
                probe.params_mut()[layer][index] = value;
                let cache = probe.forward(input)?;
                let same = cache.activation_pattern() == base;
                Ok((objective.evaluate(cache.output())?.0, same))
            };
            let (up, same_up) = eval(original + opts.step)?;
            let (down, same_down) = eval(original - opts.step)?;
            probe.params_mut()[layer][index] = original;
            if !(same_up && same_down) {
                report.skipped_at_kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * opts.step);
            let a = analytic[layer][index];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if !(err <= report.max_relative_error) || report.worst.is_none() {
                report.max_relative_error = err;
                report.worst = Some(ParameterLocation {
                    layer,
                    layer_name: net.layer_name(layer),
                    index,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    report.passed = report.checked > 0 && report.max_relative_error < opts.threshold;
    Ok(report)
}

fn check_step(opts: &GradientCheckOptions) -> Result<()> {
    if !(opts.step > 0.0 && opts.step.is_finite()) {
        return Err(Error::invalid(format!("invalid step {}", opts.step)));
    }
    if !(opts.threshold > 0.0) {
        return Err(Error::invalid(format!("invalid threshold {}", opts.threshold)));
    }
    Ok(())
}
