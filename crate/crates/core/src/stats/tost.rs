use serde::{Deserialize, Serialize};

use super::mean_sd;
use super::special::t_cdf;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceResult {
    pub n: usize,
    pub mean_diff: f64,
    pub sd: f64,
    pub bounds: (f64, f64),
    pub t_lower: f64,
    pub t_upper: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    pub alpha: f64,
    pub equivalent: bool,
}

/// Two one-sided t-tests of `lower < mean(diffs) < upper`.
///
/// With zero spread the decision is whether the mean lies strictly inside the
/// bounds; each side's p-value is then 0 when its null is rejected and 1
/// otherwise.
pub fn tost(diffs: &[f64], lower: f64, upper: f64, alpha: f64) -> Result<EquivalenceResult> {
    if !(lower < upper) {
        return Err(Error::invalid(format!("invalid bounds: lower {lower} >= upper {upper}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha {alpha} outside (0, 1)")));
    }
    let n = diffs.len();
    if n < 2 {
        return Err(Error::invalid(format!("TOST needs at least 2 differences, got {n}")));
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("differences must be finite"));
    }
    let (mean, sd) = mean_sd(diffs);
    let se = sd / (n as f64).sqrt();
    let (t_lower, t_upper, p_lower, p_upper) = if se > 0.0 {
        let tl = (mean - lower) / se;
        let tu = (mean - upper) / se;
        let nu = (n - 1) as f64;
        (tl, tu, t_cdf(-tl, nu)?, t_cdf(tu, nu)?)
    } else {
        let side = |rejected: bool| if rejected { 0.0 } else { 1.0 };
        let inf = |d: f64| if d == 0.0 { 0.0 } else { d.signum() * f64::INFINITY };
        (inf(mean - lower), inf(mean - upper), side(mean > lower), side(mean < upper))
    };
    Ok(EquivalenceResult {
        n,
        mean_diff: mean,
        sd,
        bounds: (lower, upper),
        t_lower,
        t_upper,
        p_lower,
        p_upper,
        alpha,
        equivalent: p_lower.max(p_upper) < alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_differences_are_equivalent() {
        let r = tost(&[0.0; 10], -0.06, 0.06, 0.05).unwrap();
        assert!(r.equivalent);
        assert_eq!(r.mean_diff, 0.0);
        assert_eq!((r.p_lower, r.p_upper), (0.0, 0.0));
    }

    #[test]
    fn constant_difference_outside_bounds() {
        let r = tost(&[0.1; 5], -0.06, 0.06, 0.05).unwrap();
        assert!(!r.equivalent);
        assert_eq!(r.p_upper, 1.0);
    }

    #[test]
    fn mean_far_outside() {
        let r = tost(&[0.2, 0.3, 0.25], -0.06, 0.06, 0.05).unwrap();
        assert!(!r.equivalent);
        assert!(r.p_upper > 0.05);
    }

    #[test]
    fn invalid_inputs() {
        assert!(tost(&[0.0, 1.0], 0.1, -0.1, 0.05).is_err());
        assert!(tost(&[0.0], -0.1, 0.1, 0.05).is_err());
        assert!(tost(&[0.0, 1.0], -0.1, 0.1, 1.5).is_err());
    }

    #[test]
    fn hand_computed_statistics() {
        // mean 0.01, sd² = 4e-4/3, se = sd/2.
        let d = [0.0, 0.0, 0.02, 0.02];
        let r = tost(&d, -0.05, 0.05, 0.05).unwrap();
        let se = (4e-4f64 / 3.0).sqrt() / 2.0;
        assert!((r.t_lower - 0.06 / se).abs() < 1e-9);
        assert!((r.t_upper + 0.04 / se).abs() < 1e-9);
        assert!(r.equivalent);
    }
}
