//! Adagrad: each parameter's step is divided by the root of its accumulated
//! squared gradients.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdagradState {
    accum: Vec<Vec<f64>>,
}

impl AdagradState {
    /// Zero accumulators shaped like `params`.
    pub fn new(params: &[Vec<f64>]) -> Self {
        AdagradState {
            accum: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn accumulators(&self) -> &[Vec<f64>] {
        &self.accum
    }
}

/// `G += g²; θ −= lr·g/(√G + eps)`, elementwise.
pub fn adagrad_step(
    params: &mut [Vec<f64>],
    grads: &[Vec<f64>],
    state: &mut AdagradState,
    lr: f64,
    eps: f64,
) -> Result<()> {
    let same = params.len() == grads.len()
        && params.len() == state.accum.len()
        && params
            .iter()
            .zip(grads)
            .zip(&state.accum)
            .all(|((p, g), a)| p.len() == g.len() && p.len() == a.len());
    if !same {
        return Err(Error::invalid("parameter, gradient and accumulator shapes differ"));
    }
    for ((p, g), a) in params.iter_mut().zip(grads).zip(&mut state.accum) {
        for ((theta, &gv), acc) in p.iter_mut().zip(g).zip(a.iter_mut()) {
            *acc += gv * gv;
            *theta -= lr * gv / (acc.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_closed_form() {
        let mut p = vec![vec![0.0]];
        let mut s = AdagradState::new(&p);
        adagrad_step(&mut p, &[vec![1.0]], &mut s, 0.1, 1e-8).unwrap();
        assert_eq!(p[0][0], -0.1 / (1.0 + 1e-8));
        assert!((p[0][0] + 0.0999999990).abs() < 1e-10);
        assert_eq!(s.accumulators()[0][0], 1.0);
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut p = vec![vec![0.5, -2.0]];
        let mut s = AdagradState::new(&p);
        adagrad_step(&mut p, &[vec![0.0, 0.0]], &mut s, 0.1, 1e-8).unwrap();
        assert_eq!(p, vec![vec![0.5, -2.0]]);
        assert_eq!(s.accumulators(), &[vec![0.0, 0.0]]);
    }

    #[test]
    fn two_unit_steps() {
        let (lr, eps) = (0.05, 1e-8);
        let mut p = vec![vec![0.0]];
        let mut s = AdagradState::new(&p);
        for _ in 0..2 {
            adagrad_step(&mut p, &[vec![1.0]], &mut s, lr, eps).unwrap();
        }
        let expected = -lr * (1.0 / (1.0 + eps) + 1.0 / (2f64.sqrt() + eps));
        assert!((p[0][0] - expected).abs() < 1e-15);
    }

    #[test]
    fn accumulators_never_decrease() {
        let mut p = vec![vec![0.0; 3]];
        let mut s = AdagradState::new(&p);
        let mut last = vec![0.0; 3];
        for step in 0..20 {
            let g: Vec<f64> = (0..3).map(|i| ((step * 7 + i) as f64).sin()).collect();
            adagrad_step(&mut p, &[g], &mut s, 0.01, 1e-8).unwrap();
            for (a, l) in s.accumulators()[0].iter().zip(&last) {
                assert!(a >= l);
            }
            last = s.accumulators()[0].clone();
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![vec![0.0; 2]];
        let mut s = AdagradState::new(&p);
        assert!(adagrad_step(&mut p, &[vec![1.0]], &mut s, 0.1, 1e-8).is_err());
    }
}
