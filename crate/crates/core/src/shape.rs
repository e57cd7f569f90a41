//! Correspondence populations and their PCA shape space.
//!
//! A shape is a fixed-length list of 3D landmarks; landmark `j` refers to the
//! same anatomical location on every shape. Stacking the coordinates as
//! `(x0, y0, z0, x1, ...)` turns each shape into a vector of length `3M`, and
//! the shape space is the principal subspace of that population.
//!
//! Inputs are assumed to be registered already: no Procrustes or rigid
//! alignment happens here.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, FORMAT_VERSION};

pub type Point3 = [f64; 3];

/// A population of landmark sets with consistent cardinality.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    shapes: Vec<Vec<Point3>>,
}

impl CorrespondenceSet {
    pub fn new(shapes: Vec<Vec<Point3>>) -> Result<Self> {
        let Some(first) = shapes.first() else {
            return Err(Error::invalid("correspondence set needs at least one shape"));
        };
        let m = first.len();
        if m == 0 {
            return Err(Error::invalid("shapes need at least one point"));
        }
        for (i, shape) in shapes.iter().enumerate() {
            if shape.len() != m {
                return Err(Error::data(format!(
                    "point count mismatch: shape {i} has {} points, expected {m}",
                    shape.len()
                )));
            }
            if shape.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::data(format!("shape {i} has non-finite coordinates")));
            }
        }
        Ok(Self { shapes })
    }

    /// Builds a set from stacked shape vectors of length `3M`.
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let shapes = vectors
            .iter()
            .map(|v| {
                if v.len() % 3 != 0 {
                    return Err(Error::invalid("shape vector length is not a multiple of 3"));
                }
                Ok(v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(shapes)
    }

    pub fn shape_count(&self) -> usize {
        self.shapes.len()
    }

    pub fn points_per_shape(&self) -> usize {
        self.shapes[0].len()
    }

    pub fn shapes(&self) -> &[Vec<Point3>] {
        &self.shapes
    }

    pub fn shape(&self, i: usize) -> &[Point3] {
        &self.shapes[i]
    }

    pub fn shape_vector(&self, i: usize) -> Vec<f64> {
        self.shapes[i].iter().flatten().copied().collect()
    }

    /// Subset in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.shapes[i].clone()).collect())
    }

    /// S×3M data matrix, one shape per row.
    pub fn data_matrix(&self) -> DMatrix<f64> {
        let s = self.shape_count();
        let d = 3 * self.points_per_shape();
        DMatrix::from_fn(s, d, |i, j| self.shapes[i][j / 3][j % 3])
    }
}

/// Parses one particle file: one whitespace-separated `x y z` triple per line.
pub fn read_particle_file(path: &Path) -> Result<Vec<Point3>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut coords = [0.0f64; 3];
        let mut tokens = line.split_whitespace();
        for c in coords.iter_mut() {
            let tok = tokens.next().ok_or_else(|| {
                Error::format(path, format!("line {}: expected 3 coordinates", lineno + 1))
            })?;
            *c = tok.parse().map_err(|_| {
                Error::format(path, format!("line {}: non-numeric token {tok:?}", lineno + 1))
            })?;
            if !c.is_finite() {
                return Err(Error::format(
                    path,
                    format!("line {}: non-finite coordinate", lineno + 1),
                ));
            }
        }
        if tokens.next().is_some() {
            return Err(Error::format(
                path,
                format!("line {}: more than 3 coordinates", lineno + 1),
            ));
        }
        points.push(coords);
    }
    if points.is_empty() {
        return Err(Error::format(path, "empty particle file"));
    }
    Ok(points)
}

/// Loads one shape per file, in the order given.
pub fn load_particles<P: AsRef<Path>>(paths: &[P]) -> Result<CorrespondenceSet> {
    if paths.is_empty() {
        return Err(Error::invalid("no particle files given"));
    }
    let mut shapes = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let points = read_particle_file(path)?;
        if let Some(first) = shapes.first() {
            let first: &Vec<Point3> = first;
            if first.len() != points.len() {
                return Err(Error::data(format!(
                    "point count mismatch: {} has {} points, expected {}",
                    path.display(),
                    points.len(),
                    first.len()
                )));
            }
        }
        shapes.push(points);
    }
    CorrespondenceSet::new(shapes)
}

/// Renders points with 17 significant digits, which round-trips any f64.
pub fn format_particles(points: &[Point3]) -> String {
    let mut out = String::with_capacity(points.len() * 72);
    for p in points {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
    }
    out
}

pub fn write_particle_file(path: &Path, points: &[Point3]) -> Result<()> {
    fs::write(path, format_particles(points)).map_err(|e| Error::io(path, e))
}

/// Writes `<prefix>_<index>.particles` files into `dir` and returns the paths.
pub fn write_particles(set: &CorrespondenceSet, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let width = set.shape_count().to_string().len().max(3);
    set.shapes()
        .iter()
        .enumerate()
        .map(|(i, shape)| {
            let path = dir.join(format!("{prefix}_{i:0width$}.particles"));
            write_particle_file(&path, shape)?;
            Ok(path)
        })
        .collect()
}

/// Sorted `*.particles` files of a directory.
pub fn list_particle_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|ext| ext == "particles") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Coefficients of a shape along the modes of a [`ShapeSpace`] (mm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Loadings(pub Vec<f64>);

impl Loadings {
    pub fn zeros(k: usize) -> Self {
        Loadings(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Loadings {
    fn from(v: Vec<f64>) -> Self {
        Loadings(v)
    }
}

/// PCA model of a correspondence population.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSpace {
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    captured_fraction: f64,
    points_per_shape: usize,
}

/// Eigenvalues below this fraction of the largest are numerically zero.
const RANK_TOLERANCE: f64 = 1e-12;

impl ShapeSpace {
    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn points_per_shape(&self) -> usize {
        self.points_per_shape
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn captured_fraction(&self) -> f64 {
        self.captured_fraction
    }

    /// `basisᵀ·(shape − mean)`.
    pub fn project(&self, shape: &[f64]) -> Result<Loadings> {
        if shape.len() != self.dimension() {
            return Err(Error::invalid(format!(
                "shape vector has length {}, shape space expects {}",
                shape.len(),
                self.dimension()
            )));
        }
        let centered = DVector::from_iterator(
            shape.len(),
            shape.iter().zip(self.mean.iter()).map(|(x, m)| x - m),
        );
        Ok(Loadings((self.basis.transpose() * centered).as_slice().to_vec()))
    }

    /// `mean + basis·loadings`.
    pub fn reconstruct(&self, loadings: &Loadings) -> Result<Vec<f64>> {
        if loadings.len() != self.mode_count() {
            return Err(Error::invalid(format!(
                "got {} loadings, shape space has {} modes",
                loadings.len(),
                self.mode_count()
            )));
        }
        let l = DVector::from_column_slice(loadings.values());
        Ok((&self.mean + &self.basis * l).as_slice().to_vec())
    }

    pub fn reconstruct_points(&self, loadings: &Loadings) -> Result<Vec<Point3>> {
        let v = self.reconstruct(loadings)?;
        Ok(v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
    }

    /// Loadings of every shape of a population, one row per shape.
    pub fn project_set(&self, set: &CorrespondenceSet) -> Result<Vec<Loadings>> {
        (0..set.shape_count())
            .map(|i| self.project(&set.shape_vector(i)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ShapeSpaceFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ShapeSpaceFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}

/// Fits the PCA shape space keeping the fewest modes whose eigenvalues
/// reach `variance_threshold` of the total variance.
///
/// Eigenvalues follow the `1/(S−1)` sample-covariance convention. When there
/// are fewer shapes than coordinates the decomposition goes through the S×S
/// Gram matrix. Each mode is signed so its largest-magnitude entry is positive.
pub fn fit_shape_space(set: &CorrespondenceSet, variance_threshold: f64) -> Result<ShapeSpace> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "variance threshold {variance_threshold} outside (0, 1]"
        )));
    }
    let s = set.shape_count();
    if s < 2 {
        return Err(Error::invalid("fitting a shape space needs at least 2 shapes"));
    }
    let data = set.data_matrix();
    let d = data.ncols();
    let mean = data.row_mean().transpose();
    let mut centered = data;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let denom = (s - 1) as f64;

    let (eigenvalues, vectors) = if s < d {
        let gram = (&centered * centered.transpose()) / denom;
        let (vals, vecs) = sorted_eigen(gram);
        // v = Xcᵀu / sqrt((S−1)λ) maps Gram eigenvectors to covariance ones.
        let lift = centered.transpose() * vecs;
        (vals, lift)
    } else {
        let cov = (centered.transpose() * &centered) / denom;
        sorted_eigen(cov)
    };

    // Centering identical shapes still leaves rounding residue of order
    // eps·|x|; variance at that level is treated as none at all.
    let scale = set.data_matrix().amax();
    let noise_floor = d as f64 * (64.0 * f64::EPSILON * scale).powi(2);
    let mut total: f64 = eigenvalues.iter().sum();
    if total <= noise_floor {
        total = 0.0;
    }
    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0);
    let rank = eigenvalues
        .iter()
        .take_while(|&&l| total > 0.0 && lambda_max > 0.0 && l > RANK_TOLERANCE * lambda_max)
        .count();

    let mut k = 0;
    let mut captured = 0.0;
    if total > 0.0 {
        let target = variance_threshold * total * (1.0 - 1e-12);
        while k < rank && captured < target {
            captured += eigenvalues[k];
            k += 1;
        }
    }

    let mut basis = DMatrix::zeros(d, k);
    for j in 0..k {
        let mut col = vectors.column(j).into_owned();
        if s < d {
            col /= (denom * eigenvalues[j]).sqrt();
        }
        // Renormalizing removes the rounding left by the Gram lift.
        let norm = col.norm();
        col /= norm;
        let pivot = col
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            col.neg_mut();
        }
        basis.set_column(j, &col);
    }

    Ok(ShapeSpace {
        mean,
        basis,
        eigenvalues: eigenvalues[..k].to_vec(),
        captured_fraction: if total > 0.0 { (captured / total).min(1.0) } else { 1.0 },
        points_per_shape: set.points_per_shape(),
    })
}

/// Eigen-decomposition with eigenvalues sorted descending and clamped at 0.
fn sorted_eigen(matrix: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

#[derive(Serialize, Deserialize)]
struct ShapeSpaceFile {
    format_version: u32,
    points_per_shape: usize,
    captured_fraction: f64,
    eigenvalues: Vec<f64>,
    mean: Vec<f64>,
    /// One inner array per mode.
    basis: Vec<Vec<f64>>,
}

impl From<&ShapeSpace> for ShapeSpaceFile {
    fn from(space: &ShapeSpace) -> Self {
        ShapeSpaceFile {
            format_version: FORMAT_VERSION,
            points_per_shape: space.points_per_shape,
            captured_fraction: space.captured_fraction,
            eigenvalues: space.eigenvalues.clone(),
            mean: space.mean.as_slice().to_vec(),
            basis: space
                .basis
                .column_iter()
                .map(|c| c.as_slice().to_vec())
                .collect(),
        }
    }
}

impl TryFrom<ShapeSpaceFile> for ShapeSpace {
    type Error = Error;

    fn try_from(file: ShapeSpaceFile) -> Result<Self> {
        if file.format_version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "unsupported shape space format_version {}",
                file.format_version
            )));
        }
        let d = file.mean.len();
        if d != 3 * file.points_per_shape {
            return Err(Error::data("mean length does not match points_per_shape"));
        }
        if file.basis.len() != file.eigenvalues.len() || file.basis.iter().any(|c| c.len() != d) {
            return Err(Error::data("basis shape does not match mean and eigenvalues"));
        }
        let k = file.basis.len();
        let flat: Vec<f64> = file.basis.into_iter().flatten().collect();
        Ok(ShapeSpace {
            mean: DVector::from_vec(file.mean),
            basis: DMatrix::from_vec(d, k, flat),
            eigenvalues: file.eigenvalues,
            captured_fraction: file.captured_fraction,
            points_per_shape: file.points_per_shape,
        })
    }
}
