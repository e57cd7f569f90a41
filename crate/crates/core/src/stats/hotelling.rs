use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::special::f_cdf;
use crate::{Error, Result};

/// Covariances with a condition number above this are treated as singular.
const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HotellingVariant {
    /// One-sample test on per-row differences `X − Y`.
    Paired,
    /// Pooled-covariance two-sample test between the rows of `X` and `Y`.
    TwoSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotellingResult {
    pub variant: HotellingVariant,
    pub t_squared: f64,
    pub f_statistic: f64,
    /// Numerator and denominator degrees of freedom of `f_statistic`.
    pub dof: (f64, f64),
    pub p_value: f64,
    pub n: usize,
    pub p: usize,
    pub condition_number: f64,
}

impl HotellingResult {
    /// `1 − p_value`, the figure reported as "confidence".
    pub fn confidence(&self) -> f64 {
        1.0 - self.p_value
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n == 0 || p == 0 {
        return Err(Error::invalid(format!("{name} is empty")));
    }
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::invalid(format!("{name} rows have inconsistent lengths")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

/// Sample covariance (1/(n−1) unless `denom` overrides) of centered rows.
fn scatter(data: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    centered.transpose() * centered
}

/// `vᵀ S⁻¹ v`, refusing ill-conditioned `S`.
fn quadratic_form(cov: DMatrix<f64>, v: &DVector<f64>) -> Result<(f64, f64)> {
    let sv = cov.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if v.iter().all(|&x| x == 0.0) {
        return Ok((0.0, condition));
    }
    if !(condition <= MAX_CONDITION) {
        return Err(Error::numeric(format!(
            "singular covariance of differences (condition number {condition:.3e})"
        )));
    }
    let chol = cov.cholesky().ok_or_else(|| {
        Error::numeric(format!(
            "covariance of differences is not positive definite (condition number {condition:.3e})"
        ))
    })?;
    Ok((v.dot(&chol.solve(v)), condition))
}

/// Paired Hotelling T² on the rows of `x − y`.
///
/// `T² = n·d̄ᵀS⁻¹d̄` with `S` the sample covariance of the differences and
/// `F = T²(n−p)/(p(n−1))` on `(p, n−p)` degrees of freedom. A zero mean
/// difference gives `T² = 0` even when `S` is singular.
pub fn hotelling_paired(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<HotellingResult> {
    let xm = rows_to_matrix(x, "X")?;
    let ym = rows_to_matrix(y, "Y")?;
    if xm.shape() != ym.shape() {
        return Err(Error::invalid(format!(
            "paired samples differ in shape: {:?} vs {:?}",
            xm.shape(),
            ym.shape()
        )));
    }
    let (n, p) = xm.shape();
    if n <= p {
        return Err(Error::invalid(format!(
            "insufficient samples for dimension: n = {n}, p = {p}"
        )));
    }
    let diffs = xm - ym;
    let mean = diffs.row_mean().transpose();
    let cov = scatter(&diffs, &mean) / (n - 1) as f64;
    let (q, condition_number) = quadratic_form(cov, &mean)?;
    let t_squared = n as f64 * q;
    let (d1, d2) = (p as f64, (n - p) as f64);
    let f_statistic = t_squared * d2 / (d1 * (n - 1) as f64);
    Ok(HotellingResult {
        variant: HotellingVariant::Paired,
        t_squared,
        f_statistic,
        dof: (d1, d2),
        p_value: 1.0 - f_cdf(f_statistic, d1, d2)?,
        n,
        p,
        condition_number,
    })
}

/// Two-sample Hotelling T² with pooled covariance.
pub fn hotelling_two_sample(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<HotellingResult> {
    let xm = rows_to_matrix(x, "X")?;
    let ym = rows_to_matrix(y, "Y")?;
    if xm.ncols() != ym.ncols() {
        return Err(Error::invalid("samples differ in dimension"));
    }
    let (n1, n2, p) = (xm.nrows(), ym.nrows(), xm.ncols());
    let n = n1 + n2;
    if n < p + 2 {
        return Err(Error::invalid(format!(
            "insufficient samples for dimension: n = {n}, p = {p}"
        )));
    }
    let mx = xm.row_mean().transpose();
    let my = ym.row_mean().transpose();
    let pooled = (scatter(&xm, &mx) + scatter(&ym, &my)) / (n - 2) as f64;
    let diff = mx - my;
    let (q, condition_number) = quadratic_form(pooled, &diff)?;
    let t_squared = (n1 * n2) as f64 / n as f64 * q;
    let (d1, d2) = (p as f64, (n - p - 1) as f64);
    let f_statistic = t_squared * d2 / (d1 * (n - 2) as f64);
    Ok(HotellingResult {
        variant: HotellingVariant::TwoSample,
        t_squared,
        f_statistic,
        dof: (d1, d2),
        p_value: 1.0 - f_cdf(f_statistic, d1, d2)?,
        n,
        p,
        condition_number,
    })
}
