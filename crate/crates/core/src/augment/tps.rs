//! 3D thin-plate splines with the biharmonic kernel `U(r) = r`.
//!
//! For landmarks `sᵢ → tᵢ` the map is `f(x) = A·(1, x, y, z) + Σ wᵢ U(‖x − sᵢ‖)`.
//! Weights and affine part solve
//!
//! ```text
//! [ K + λI  P ] [ w ]   [ t ]
//! [ Pᵀ      0 ] [ a ] = [ 0 ]
//! ```
//!
//! with `K_ij = U(‖sᵢ − sⱼ‖)` and `P` rows `(1, x, y, z)`. The zero block
//! forces `Σ wᵢ = 0` and `Σ wᵢ sᵢ = 0`, so affine maps are reproduced exactly.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::shape::Point3;
use crate::{Error, Result};

/// Pivot ratios beyond this mean the landmark system is singular.
const MAX_PIVOT_RATIO: f64 = 1e13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpsTransform {
    source: Vec<Point3>,
    /// Row `c` maps `(1, x, y, z)` to output coordinate `c`.
    affine: [[f64; 4]; 3],
    weights: Vec<Point3>,
    kernel: String,
}

#[inline]
fn kernel(r: f64) -> f64 {
    r
}

#[inline]
fn dist(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl TpsTransform {
    pub fn source_landmarks(&self) -> &[Point3] {
        &self.source
    }

    pub fn affine(&self) -> &[[f64; 4]; 3] {
        &self.affine
    }

    pub fn weights(&self) -> &[Point3] {
        &self.weights
    }

    pub fn kernel(&self) -> &str {
        &self.kernel
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        let mut out: Point3 =
            std::array::from_fn(|c| {
                let a = &self.affine[c];
                a[0] + a[1] * p[0] + a[2] * p[1] + a[3] * p[2]
            });
        for (s, w) in self.source.iter().zip(&self.weights) {
            let u = kernel(dist(&p, s));
            out[0] += w[0] * u;
            out[1] += w[1] * u;
            out[2] += w[2] * u;
        }
        out
    }
}

/// Fits the spline taking `source[i]` to `target[i]`; `lambda > 0` relaxes
/// exact interpolation.
pub fn fit_tps(source: &[Point3], target: &[Point3], lambda: f64) -> Result<TpsTransform> {
    let m = source.len();
    if m != target.len() {
        return Err(Error::invalid(format!(
            "landmark counts differ: {m} source vs {} target",
            target.len()
        )));
    }
    if m < 4 {
        return Err(Error::invalid(format!("TPS needs at least 4 landmarks, got {m}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("TPS lambda must be >= 0, got {lambda}")));
    }
    if source.iter().chain(target).flatten().any(|c| !c.is_finite()) {
        return Err(Error::invalid("TPS landmarks must be finite"));
    }
    check_not_coplanar(source)?;

    let n = m + 4;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..m {
        for j in 0..i {
            let u = kernel(dist(&source[i], &source[j]));
            a[(i, j)] = u;
            a[(j, i)] = u;
        }
        a[(i, i)] = lambda;
        let row = [1.0, source[i][0], source[i][1], source[i][2]];
        for (c, v) in row.into_iter().enumerate() {
            a[(i, m + c)] = v;
            a[(m + c, i)] = v;
        }
    }
    let mut rhs = DMatrix::<f64>::zeros(n, 3);
    for (i, t) in target.iter().enumerate() {
        for c in 0..3 {
            rhs[(i, c)] = t[c];
        }
    }

    let lu = a.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    if !(ratio < MAX_PIVOT_RATIO) {
        return Err(Error::numeric(format!(
            "singular TPS system (pivot-ratio condition estimate {ratio:.3e}); duplicate or coplanar landmarks?"
        )));
    }
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::numeric("singular TPS system"))?;
    // One step of iterative refinement.
    let residual = &rhs - &a * &sol;
    if let Some(correction) = lu.solve(&residual) {
        sol += correction;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("TPS solve produced non-finite coefficients"));
    }

    let weights = (0..m).map(|i| [sol[(i, 0)], sol[(i, 1)], sol[(i, 2)]]).collect();
    let affine = std::array::from_fn(|c| std::array::from_fn(|r| sol[(m + r, c)]));
    Ok(TpsTransform {
        source: source.to_vec(),
        affine,
        weights,
        kernel: "r".into(),
    })
}

/// Rejects landmark sets whose spread has (numerically) no extent along
/// some axis: the affine block of the system is then rank deficient.
fn check_not_coplanar(points: &[Point3]) -> Result<()> {
    let n = points.len() as f64;
    let mean: Point3 = std::array::from_fn(|c| points.iter().map(|p| p[c]).sum::<f64>() / n);
    let cov = DMatrix::from_fn(3, 3, |r, c| {
        points.iter().map(|p| (p[r] - mean[r]) * (p[c] - mean[c])).sum::<f64>() / n
    });
    let eig = SymmetricEigen::new(cov);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= 1e-12 * max {
        return Err(Error::numeric(format!(
            "coplanar or collinear TPS landmarks (spread eigenvalue ratio {:.3e})",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(m: usize, seed: u64) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| std::array::from_fn(|_| rng.random_range(-10.0..10.0))).collect()
    }

    #[test]
    fn identity_when_target_equals_source() {
        let s = cloud(12, 1);
        let t = fit_tps(&s, &s, 0.0).unwrap();
        for w in t.weights() {
            assert!(w.iter().all(|v| v.abs() < 1e-12), "{w:?}");
        }
        let expected = [[0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        for (row, exp) in t.affine().iter().zip(expected) {
            for (a, e) in row.iter().zip(exp) {
                assert!((a - e).abs() < 1e-12);
            }
        }
        let p = t.apply([1.0, 2.0, 3.0]);
        assert!(p.iter().zip([1.0, 2.0, 3.0]).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn translation_is_reproduced_everywhere() {
        let s = cloud(10, 2);
        let target: Vec<Point3> = s.iter().map(|p| [p[0] + 5.0, p[1], p[2]]).collect();
        let t = fit_tps(&s, &target, 0.0).unwrap();
        let origin = t.apply([0.0; 3]);
        assert!((origin[0] - 5.0).abs() < 1e-9 && origin[1].abs() < 1e-9 && origin[2].abs() < 1e-9);
        for p in cloud(50, 3) {
            let q = t.apply(p);
            assert!((q[0] - p[0] - 5.0).abs() < 1e-9);
            assert!((q[1] - p[1]).abs() < 1e-9 && (q[2] - p[2]).abs() < 1e-9);
        }
    }

    #[test]
    fn side_conditions_hold() {
        let s = cloud(20, 4);
        let target = cloud(20, 5);
        let t = fit_tps(&s, &target, 0.0).unwrap();
        for c in 0..3 {
            let sum: f64 = t.weights().iter().map(|w| w[c]).sum();
            assert!(sum.abs() < 1e-8);
            for axis in 0..3 {
                let moment: f64 = t.weights().iter().zip(&s).map(|(w, p)| w[c] * p[axis]).sum();
                assert!(moment.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn smoothing_relaxes_interpolation() {
        let s = cloud(15, 6);
        let target = cloud(15, 7);
        let t = fit_tps(&s, &target, 5.0).unwrap();
        let miss: f64 = s.iter().zip(&target).map(|(p, q)| dist(&t.apply(*p), q)).sum();
        assert!(miss > 1e-3);
    }

    #[test]
    fn rejects_degenerate_landmarks() {
        let planar: Vec<Point3> = cloud(8, 8).iter().map(|p| [p[0], p[1], 0.0]).collect();
        let err = fit_tps(&planar, &planar, 0.0).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));

        let mut dup = cloud(8, 9);
        dup[5] = dup[2];
        let target = cloud(8, 10);
        assert!(matches!(fit_tps(&dup, &target, 0.0), Err(Error::Numeric(_))));

        assert!(fit_tps(&cloud(3, 11), &cloud(3, 12), 0.0).is_err());
        assert!(fit_tps(&cloud(5, 11), &cloud(4, 12), 0.0).is_err());
    }

    #[test]
    fn kernel_identifier() {
        let s = cloud(6, 13);
        assert_eq!(fit_tps(&s, &s, 0.0).unwrap().kernel(), "r");
    }
}
