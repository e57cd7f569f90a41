//! Full-covariance Gaussian mixtures: EM fitting, BIC model selection and
//! sampling.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seeding::{self, STREAM_GMM_INIT, STREAM_MAIN};
use crate::{Error, Result, FORMAT_VERSION};

/// Components whose responsibility mass drops below this have collapsed.
const MIN_COMPONENT_MASS: f64 = 1e-8;
/// Lloyd iterations run after k-means++ seeding.
const KMEANS_ITERS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<DMatrix<f64>>,
    /// Lower-triangular factors of the covariances (zero columns where the
    /// covariance is only semidefinite).
    factors: Vec<DMatrix<f64>>,
    fitted_log_likelihood: f64,
}

impl GmmModel {
    pub fn new(
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<DMatrix<f64>>,
        fitted_log_likelihood: f64,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(Error::invalid("mixture needs matching weights, means and covariances"));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::invalid("mixture dimension must be at least 1"));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::invalid("mixture weights must be positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        let mut factors = Vec::with_capacity(k);
        for (j, (m, c)) in means.iter().zip(&covariances).enumerate() {
            if m.len() != dim || c.shape() != (dim, dim) {
                return Err(Error::invalid(format!("component {j} has inconsistent dimensions")));
            }
            if (c - c.transpose()).amax() > 1e-9 * c.amax().max(1e-300) {
                return Err(Error::invalid(format!("covariance {j} is not symmetric")));
            }
            factors.push(
                semidefinite_cholesky(c)
                    .ok_or_else(|| Error::numeric(format!("covariance {j} is not positive semidefinite")))?,
            );
        }
        Ok(Self {
            weights,
            means: means.into_iter().map(DVector::from_vec).collect(),
            covariances,
            factors,
            fitted_log_likelihood,
        })
    }

    pub fn component_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dimension(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, j: usize) -> &DVector<f64> {
        &self.means[j]
    }

    pub fn covariance(&self, j: usize) -> &DMatrix<f64> {
        &self.covariances[j]
    }

    pub fn fitted_log_likelihood(&self) -> f64 {
        self.fitted_log_likelihood
    }

    /// Free parameters of a full-covariance mixture.
    pub fn parameter_count(k: usize, dim: usize) -> usize {
        (k - 1) + k * dim + k * dim * (dim + 1) / 2
    }

    /// `p·ln N − 2·ln L̂` for the fitted log-likelihood.
    pub fn bic(&self, n: usize) -> f64 {
        let p = Self::parameter_count(self.component_count(), self.dimension()) as f64;
        p * (n as f64).ln() - 2.0 * self.fitted_log_likelihood
    }

    /// Mahalanobis distance of `x` to component `j`.
    pub fn mahalanobis(&self, j: usize, x: &[f64]) -> Result<f64> {
        let diff = DVector::from_column_slice(x) - &self.means[j];
        let chol = self.covariances[j]
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numeric(format!("covariance {j} is singular")))?;
        Ok(diff.dot(&chol.solve(&diff)).sqrt())
    }

    /// Draws one sample: a weight-categorical component, then `mean + L·z`.
    pub fn sample_one<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, usize) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut component = self.weights.len() - 1;
        for (j, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                component = j;
                break;
            }
        }
        let z = DVector::from_fn(self.dimension(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.means[component] + &self.factors[component] * z;
        (x.as_slice().to_vec(), component)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = GmmFile {
            format_version: FORMAT_VERSION,
            k: self.component_count(),
            weights: self.weights.clone(),
            means: self.means.iter().map(|m| m.as_slice().to_vec()).collect(),
            covariances: self
                .covariances
                .iter()
                .map(|c| c.row_iter().map(|r| r.iter().copied().collect()).collect())
                .collect(),
            fitted_log_likelihood: self.fitted_log_likelihood,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GmmFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::data(format!("unsupported GMM format_version {}", file.format_version)));
        }
        if file.k != file.weights.len() {
            return Err(Error::data("GMM k does not match the number of weights"));
        }
        let covariances = file
            .covariances
            .iter()
            .map(|rows| {
                let d = rows.len();
                if rows.iter().any(|r| r.len() != d) {
                    return Err(Error::data("GMM covariance is not square"));
                }
                Ok(DMatrix::from_fn(d, d, |r, c| rows[r][c]))
            })
            .collect::<Result<_>>()?;
        Self::new(file.weights, file.means, covariances, file.fitted_log_likelihood)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct GmmFile {
    format_version: u32,
    k: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Row-major, one matrix per component.
    covariances: Vec<Vec<Vec<f64>>>,
    fitted_log_likelihood: f64,
}

/// Cholesky factor that tolerates semidefinite input: pivots at or below a
/// relative tolerance produce zero columns.
fn semidefinite_cholesky(c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = c.nrows();
    let scale = (0..n).map(|i| c[(i, i)].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = c[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -1e-9 * scale.max(1e-300) {
            return None;
        }
        if d <= tol {
            continue;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in j + 1..n {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / root;
        }
    }
    Some(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmOptions {
    pub max_iter: usize,
    /// Stop once the log-likelihood gain per iteration falls below this.
    pub tol: f64,
    /// Covariances get `reg_scale·(trace/K)·I` added at every M-step.
    pub reg_scale: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            reg_scale: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Data log-likelihood after each EM iteration.
    pub log_likelihood_trace: Vec<f64>,
    pub converged: bool,
}

fn validate_data(data: &[Vec<f64>]) -> Result<usize> {
    let dim = data.first().map_or(0, Vec::len);
    if data.is_empty() || dim == 0 {
        return Err(Error::invalid("mixture data is empty"));
    }
    if data.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid("mixture data rows have inconsistent lengths"));
    }
    if data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("mixture data has non-finite entries"));
    }
    Ok(dim)
}

/// Fits a `k`-component mixture by EM from a seeded k-means++ start.
pub fn fit_gmm_em(data: &[Vec<f64>], k: usize, seed: u64, options: &EmOptions) -> Result<GmmFit> {
    let dim = validate_data(data)?;
    let n = data.len();
    if k == 0 {
        return Err(Error::invalid("mixture needs at least one component"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} data points")));
    }
    let points: Vec<DVector<f64>> = data.iter().map(|r| DVector::from_column_slice(r)).collect();
    // Fallback ridge for data with no spread at all (only reachable with k = 1).
    let scale = points.iter().map(|p| p.norm_squared()).sum::<f64>() / (n * dim) as f64;
    let ridge_floor = 1e-12 * scale.max(1.0);

    let mut resp = if k == 1 {
        DMatrix::from_element(n, 1, 1.0)
    } else {
        kmeans_responsibilities(&points, k, seed)?
    };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut params = m_step(&points, &resp, options.reg_scale, ridge_floor)?;
    for _ in 0..options.max_iter {
        let (ll, new_resp) = e_step(&points, &params)?;
        resp = new_resp;
        let gain = trace.last().map(|&prev| ll - prev);
        trace.push(ll);
        if gain.is_some_and(|g| g < options.tol) {
            converged = true;
            break;
        }
        params = m_step(&points, &resp, options.reg_scale, ridge_floor)?;
    }
    let final_ll = *trace.last().expect("at least one EM iteration");
    let (weights, means, covs) = params;
    let model = GmmModel::new(
        weights,
        means.into_iter().map(|m| m.as_slice().to_vec()).collect(),
        covs,
        final_ll,
    )?;
    Ok(GmmFit {
        model,
        log_likelihood_trace: trace,
        converged,
    })
}

type Params = (Vec<f64>, Vec<DVector<f64>>, Vec<DMatrix<f64>>);

fn m_step(points: &[DVector<f64>], resp: &DMatrix<f64>, reg_scale: f64, ridge_floor: f64) -> Result<Params> {
    let n = points.len();
    let dim = points[0].len();
    let k = resp.ncols();
    let mut weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut covs = Vec::with_capacity(k);
    for j in 0..k {
        let mass: f64 = resp.column(j).sum();
        if mass < MIN_COMPONENT_MASS * n as f64 {
            return Err(Error::numeric(format!("mixture component {j} collapsed")));
        }
        let mut mean = DVector::zeros(dim);
        for (i, p) in points.iter().enumerate() {
            mean.axpy(resp[(i, j)], p, 1.0);
        }
        mean /= mass;
        let mut cov = DMatrix::zeros(dim, dim);
        for (i, p) in points.iter().enumerate() {
            let d = p - &mean;
            cov.ger(resp[(i, j)], &d, &d, 1.0);
        }
        cov /= mass;
        let ridge = reg_scale * (cov.trace() / dim as f64);
        let ridge = if ridge > 0.0 { ridge } else { ridge_floor };
        for a in 0..dim {
            cov[(a, a)] += ridge;
        }
        weights.push(mass / n as f64);
        means.push(mean);
        covs.push(cov);
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok((weights, means, covs))
}

/// Returns the total log-likelihood and the responsibilities.
fn e_step(points: &[DVector<f64>], (weights, means, covs): &Params) -> Result<(f64, DMatrix<f64>)> {
    let n = points.len();
    let k = weights.len();
    let dim = points[0].len() as f64;
    let mut chols = Vec::with_capacity(k);
    for (j, c) in covs.iter().enumerate() {
        let chol = c
            .clone()
            .cholesky()
            .ok_or_else(|| Error::numeric(format!("covariance of component {j} is not positive definite")))?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        chols.push((chol, log_det));
    }
    let mut resp = DMatrix::zeros(n, k);
    let mut total = 0.0;
    let mut logs = vec![0.0; k];
    for (i, p) in points.iter().enumerate() {
        for (j, (chol, log_det)) in chols.iter().enumerate() {
            let d = p - &means[j];
            let maha = d.dot(&chol.solve(&d));
            logs[j] = weights[j].ln() - 0.5 * (dim * (2.0 * PI).ln() + log_det + maha);
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse;
        for j in 0..k {
            resp[(i, j)] = (logs[j] - lse).exp();
        }
    }
    if !total.is_finite() {
        return Err(Error::numeric("mixture log-likelihood is not finite"));
    }
    Ok((total, resp))
}

/// k-means++ seeding plus a few Lloyd iterations, returned as hard
/// responsibilities.
fn kmeans_responsibilities(points: &[DVector<f64>], k: usize, seed: u64) -> Result<DMatrix<f64>> {
    let n = points.len();
    let mut rng = seeding::rng(seed, 0, STREAM_GMM_INIT);
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| (p - &centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(Error::data(format!(
                "insufficient spread: fewer than {k} distinct points for {k} components"
            )));
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            acc += d;
            if acc > target && d > 0.0 {
                pick = i;
                break;
            }
        }
        if d2[pick] == 0.0 {
            pick = d2.iter().rposition(|&d| d > 0.0).expect("positive total");
        }
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min((p - &centers[centers.len() - 1]).norm_squared());
        }
    }

    let mut assign = vec![0usize; n];
    for _ in 0..KMEANS_ITERS {
        for (i, p) in points.iter().enumerate() {
            assign[i] = nearest_center(p, &centers);
        }
        for (j, c) in centers.iter_mut().enumerate() {
            let members: Vec<&DVector<f64>> =
                points.iter().zip(&assign).filter(|(_, &a)| a == j).map(|(p, _)| p).collect();
            if !members.is_empty() {
                *c = members.iter().fold(DVector::zeros(c.len()), |acc, p| acc + *p) / members.len() as f64;
            }
        }
    }
    for (i, p) in points.iter().enumerate() {
        assign[i] = nearest_center(p, &centers);
    }
    let mut resp = DMatrix::zeros(n, k);
    for (i, &a) in assign.iter().enumerate() {
        resp[(i, a)] = 1.0;
    }
    // Give any empty cluster a single point so the first M-step is defined.
    for j in 0..k {
        if resp.column(j).sum() == 0.0 {
            let donor = (0..n)
                .max_by(|&x, &y| {
                    (&points[x] - &centers[assign[x]])
                        .norm_squared()
                        .total_cmp(&(&points[y] - &centers[assign[y]]).norm_squared())
                })
                .expect("nonempty data");
            resp.row_mut(donor).fill(0.0);
            resp[(donor, j)] = 1.0;
        }
    }
    Ok(resp)
}

fn nearest_center(p: &DVector<f64>, centers: &[DVector<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centers.iter().enumerate() {
        let d = (p - c).norm_squared();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionReport {
    /// `(k, BIC)` for every candidate that produced a fit.
    pub bic_table: Vec<(usize, f64)>,
    pub selected_k: usize,
}

/// Fits every `k` in `k_range` with `restarts` seeded restarts, keeps the
/// best likelihood per `k`, and returns the minimum-BIC model (ties go to the
/// smaller `k`). Rows are put in a canonical order first, so the result does
/// not depend on how the data is permuted.
pub fn select_gmm_bic(
    data: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
    restarts: usize,
    options: &EmOptions,
) -> Result<(GmmModel, SelectionReport)> {
    validate_data(data)?;
    if k_range.is_empty() || *k_range.start() == 0 {
        return Err(Error::invalid("k range must be nonempty and start at 1 or more"));
    }
    if *k_range.end() > data.len() {
        return Err(Error::invalid(format!(
            "largest k = {} exceeds the {} data points",
            k_range.end(),
            data.len()
        )));
    }
    let restarts = restarts.max(1);
    let mut sorted = data.to_vec();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut table = Vec::new();
    let mut best: Option<(f64, GmmModel)> = None;
    for k in k_range {
        let mut best_k: Option<GmmModel> = None;
        let mut last_err = None;
        for r in 0..restarts {
            let run_seed = seeding::rng(seed, ((k as u64) << 32) | r as u64, STREAM_MAIN).random();
            match fit_gmm_em(&sorted, k, run_seed, options) {
                Ok(fit) => {
                    if best_k
                        .as_ref()
                        .is_none_or(|b| fit.model.fitted_log_likelihood() > b.fitted_log_likelihood())
                    {
                        best_k = Some(fit.model);
                    }
                }
                Err(e) => {
                    log::debug!("GMM k={k} restart {r} failed: {e}");
                    last_err = Some(e);
                }
            }
        }
        let Some(model) = best_k else {
            return Err(last_err.expect("a failed restart recorded its error"));
        };
        let bic = model.bic(sorted.len());
        table.push((k, bic));
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, model));
        }
    }
    let (_, model) = best.expect("nonempty k range");
    let selected_k = model.component_count();
    Ok((
        model,
        SelectionReport {
            bic_table: table,
            selected_k,
        },
    ))
}

/// Draws `n` samples from one seeded stream; returns samples and component labels.
pub fn sample_loadings(model: &GmmModel, n: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = seeding::rng(seed, 0, seeding::STREAM_AUGMENT);
    Ok((0..n).map(|_| model.sample_one(&mut rng)).unzip())
}

/// Index of the Euclidean-nearest row of `originals`; ties go to the lower index.
pub fn nearest_original(sample: &[f64], originals: &[Vec<f64>]) -> Result<usize> {
    if originals.is_empty() {
        return Err(Error::invalid("no originals to search"));
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, row) in originals.iter().enumerate() {
        if row.len() != sample.len() {
            return Err(Error::invalid(format!(
                "original {i} has dimension {}, sample has {}",
                row.len(),
                sample.len()
            )));
        }
        let d: f64 = row.iter().zip(sample).map(|(a, b)| (a - b).powi(2)).sum();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;
    use rand::SeedableRng;

    fn gaussian_blob(rng: &mut ChaCha8Rng, n: usize, mean: &[f64], sd: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| mean.iter().map(|m| m + sd * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn single_component_is_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = gaussian_blob(&mut rng, 50, &[1.0, -2.0], 1.5);
        let opts = EmOptions::default();
        let fit = fit_gmm_em(&data, 1, 7, &opts).unwrap();
        let m = &fit.model;
        assert_eq!(m.weights(), &[1.0]);
        let n = data.len() as f64;
        let mean: Vec<f64> = (0..2).map(|c| data.iter().map(|r| r[c]).sum::<f64>() / n).collect();
        for c in 0..2 {
            assert!((m.mean(0)[c] - mean[c]).abs() < 1e-12);
        }
        let mut cov = DMatrix::from_fn(2, 2, |a, b| {
            data.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / n
        });
        let ridge = opts.reg_scale * cov.trace() / 2.0;
        cov[(0, 0)] += ridge;
        cov[(1, 1)] += ridge;
        assert!((m.covariance(0) - cov).amax() < 1e-12);
    }

    #[test]
    fn recovers_two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut data = gaussian_blob(&mut rng, 100, &[-10.0, 0.0, 0.0], 1.0);
        data.extend(gaussian_blob(&mut rng, 100, &[10.0, 0.0, 0.0], 1.0));
        let fit = fit_gmm_em(&data, 2, 3, &EmOptions::default()).unwrap();
        let m = &fit.model;
        let mut xs: Vec<(f64, f64)> = (0..2).map(|j| (m.mean(j)[0], m.weights()[j])).collect();
        xs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!((xs[0].0 + 10.0).abs() < 0.5 && (xs[1].0 - 10.0).abs() < 0.5);
        assert!((xs[0].1 - 0.5).abs() < 0.1 && (xs[1].1 - 0.5).abs() < 0.1);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut data = gaussian_blob(&mut rng, 80, &[0.0, 0.0], 1.0);
        data.extend(gaussian_blob(&mut rng, 60, &[2.0, 1.0], 0.7));
        data.extend(gaussian_blob(&mut rng, 40, &[-1.5, 2.0], 0.5));
        for k in 1..=4 {
            let fit = fit_gmm_em(&data, k, 11, &EmOptions { tol: 0.0, max_iter: 200, ..Default::default() }).unwrap();
            for w in fit.log_likelihood_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "k={k}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn identical_points_have_no_spread() {
        let data = vec![vec![1.0, 2.0]; 10];
        let err = fit_gmm_em(&data, 2, 0, &EmOptions::default()).unwrap_err();
        assert!(err.to_string().contains("insufficient spread"));
        assert!(fit_gmm_em(&data, 1, 0, &EmOptions::default()).is_ok());
        assert!(fit_gmm_em(&data, 11, 0, &EmOptions::default()).is_err());
    }

    #[test]
    fn zero_covariance_samples_are_the_mean() {
        let m = GmmModel::new(vec![1.0], vec![vec![3.0, -1.0]], vec![DMatrix::zeros(2, 2)], 0.0).unwrap();
        let (s, labels) = sample_loadings(&m, 20, 5).unwrap();
        assert!(s.iter().all(|x| x == &vec![3.0, -1.0]));
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = GmmModel::new(
            vec![0.3, 0.7],
            vec![vec![0.0, 0.0], vec![5.0, 5.0]],
            vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2) * 2.0],
            0.0,
        )
        .unwrap();
        assert_eq!(sample_loadings(&m, 50, 9).unwrap(), sample_loadings(&m, 50, 9).unwrap());
        assert_ne!(sample_loadings(&m, 50, 9).unwrap(), sample_loadings(&m, 50, 10).unwrap());
    }

    #[test]
    fn nearest_with_ties() {
        let originals = vec![vec![0.0, 0.0], vec![10.0, 0.0]];
        assert_eq!(nearest_original(&[4.0, 0.0], &originals).unwrap(), 0);
        assert_eq!(nearest_original(&[5.0, 0.0], &originals).unwrap(), 0);
        assert_eq!(nearest_original(&[6.0, 0.0], &originals).unwrap(), 1);
        assert!(nearest_original(&[0.0], &[]).is_err());
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        assert_eq!(nearest_original(&rows[7], &rows).unwrap(), 7);
    }

    #[test]
    fn model_validation() {
        let eye = DMatrix::identity(2, 2);
        assert!(GmmModel::new(vec![0.5, 0.4], vec![vec![0.0; 2]; 2], vec![eye.clone(); 2], 0.0).is_err());
        assert!(GmmModel::new(vec![1.0, 0.0], vec![vec![0.0; 2]; 2], vec![eye.clone(); 2], 0.0).is_err());
        assert!(GmmModel::new(vec![1.0], vec![vec![0.0; 2]], vec![-eye], 0.0).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let m = GmmModel::new(
            vec![0.25, 0.75],
            vec![vec![1.0, 2.0], vec![-1.0, 0.5]],
            vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]), DMatrix::identity(2, 2)],
            -12.5,
        )
        .unwrap();
        let back = GmmModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["k"], 2);
        assert_eq!(v["format_version"], 1);
    }

    #[test]
    fn bic_parameter_count() {
        assert_eq!(GmmModel::parameter_count(1, 1), 2);
        assert_eq!(GmmModel::parameter_count(3, 15), 2 + 45 + 360);
    }
}
