//! Training objectives and their gradients with respect to the prediction.

use crate::{Error, Result};

/// Probabilities are clamped to `[P_CLAMP, 1 − P_CLAMP]` inside the log.
pub const P_CLAMP: f64 = 1e-7;

/// Mean squared error `(1/K)·Σ(predᵢ − targetᵢ)²` and its gradient
/// `(2/K)(pred − target)`.
pub fn l2_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::invalid(format!(
            "prediction has {} values, target has {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("l2 loss of empty vectors"));
    }
    let k = pred.len() as f64;
    let diff: Vec<f64> = pred.iter().zip(target).map(|(p, t)| p - t).collect();
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / k;
    Ok((loss, diff.into_iter().map(|d| 2.0 * d / k).collect()))
}

/// Binary cross-entropy `−[y·ln p + (1−y)·ln(1−p)]` and its derivative in
/// `p`. Inside the clamp zone the loss is flat, so the derivative is 0.
pub fn bce_loss(p: f64, label: bool) -> (f64, f64) {
    let clamped = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    let active = clamped == p;
    if label {
        (-clamped.ln(), if active { -1.0 / p } else { 0.0 })
    } else {
        (-(1.0 - clamped).ln(), if active { 1.0 / (1.0 - p) } else { 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_examples() {
        let (l, g) = l2_loss(&[1.0, -2.0], &[1.0, -2.0]).unwrap();
        assert_eq!((l, g), (0.0, vec![0.0, 0.0]));
        let (l, g) = l2_loss(&[3.0], &[1.0]).unwrap();
        assert_eq!((l, g), (4.0, vec![4.0]));
        assert!(l2_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn l2_gradient_matches_central_differences() {
        let pred = [0.3, -1.7, 2.5, 0.01];
        let target = [1.0, -1.0, 0.5, 0.0];
        let (_, g) = l2_loss(&pred, &target).unwrap();
        for i in 0..4 {
            let h = 1e-6;
            let mut up = pred;
            let mut down = pred;
            up[i] += h;
            down[i] -= h;
            let fd = (l2_loss(&up, &target).unwrap().0 - l2_loss(&down, &target).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-8 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn bce_values_and_clamp() {
        let (l, g) = bce_loss(0.25, true);
        assert!((l - 4f64.ln()).abs() < 1e-15 && (g + 4.0).abs() < 1e-12);
        let (l, g) = bce_loss(0.25, false);
        assert!((l - (4.0f64 / 3.0).ln()).abs() < 1e-15 && (g - 4.0 / 3.0).abs() < 1e-12);
        let (l, g) = bce_loss(0.0, true);
        assert!((l + P_CLAMP.ln()).abs() < 1e-12 && g == 0.0);
    }
}
