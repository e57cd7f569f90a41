//! Triangle meshes: OBJ I/O, template warping and surface distances.

mod distance;
mod obj;
pub mod sphere;

pub use distance::{point_to_triangle, surface_distance, Bvh, SurfaceDistance};
pub use obj::{read_obj, write_obj};

use crate::augment::tps::fit_tps;
use crate::shape::Point3;
use crate::{Error, Result};

/// Triangles smaller than this (mm²) are reported as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let v = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= v)) {
            return Err(Error::data(format!(
                "triangle {t:?} references a vertex outside 0..{v}"
            )));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::data("mesh vertices must be finite"));
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [Point3; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    /// Indices of triangles with area below [`DEGENERATE_AREA`].
    pub fn degenerate_triangles(&self) -> Vec<usize> {
        (0..self.triangles.len())
            .filter(|&t| self.triangle_area(t) < DEGENERATE_AREA)
            .collect()
    }

    pub fn map_vertices(&self, f: impl FnMut(&Point3) -> Point3) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

/// Warps a template mesh with the TPS taking `template_corr` onto
/// `subject_corr`. Connectivity is untouched.
pub fn warp_mesh_tps(
    template: &TriangleMesh,
    template_corr: &[Point3],
    subject_corr: &[Point3],
) -> Result<TriangleMesh> {
    if template_corr.len() != subject_corr.len() {
        return Err(Error::invalid(format!(
            "correspondence counts differ: {} vs {}",
            template_corr.len(),
            subject_corr.len()
        )));
    }
    let tps = fit_tps(template_corr, subject_corr, 0.0)?;
    Ok(template.map_vertices(|v| tps.apply(*v)))
}

pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: Point3) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_index() {
        assert!(TriangleMesh::new(vec![[0.0; 3]; 3], vec![[0, 1, 9]]).is_err());
    }

    #[test]
    fn flags_degenerate_triangles() {
        let m = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2], [0, 1, 3]],
        )
        .unwrap();
        assert_eq!(m.degenerate_triangles(), vec![1]);
        assert!((m.triangle_area(0) - 0.5).abs() < 1e-15);
    }

    fn sphere_with_landmarks() -> (TriangleMesh, Vec<Point3>, Vec<usize>) {
        let (dirs, tris) = sphere::ring_sphere(200).unwrap();
        let verts: Vec<Point3> = dirs.iter().map(|d| d.map(|c| 10.0 * c)).collect();
        let mesh = TriangleMesh::new(verts.clone(), tris).unwrap();
        let picks: Vec<usize> = (0..200).step_by(9).collect();
        let corr = picks.iter().map(|&i| verts[i]).collect();
        (mesh, corr, picks)
    }

    #[test]
    fn identity_warp_leaves_mesh_unchanged() {
        let (mesh, corr, _) = sphere_with_landmarks();
        let warped = warp_mesh_tps(&mesh, &corr, &corr).unwrap();
        assert_eq!(warped.triangles(), mesh.triangles());
        for (a, b) in warped.vertices().iter().zip(mesh.vertices()) {
            assert!(norm(sub(*a, *b)) < 1e-9);
        }
    }

    #[test]
    fn scaling_warp_scales_vertices() {
        let (mesh, corr, _) = sphere_with_landmarks();
        let scaled: Vec<Point3> = corr.iter().map(|p| p.map(|c| 2.0 * c)).collect();
        let warped = warp_mesh_tps(&mesh, &corr, &scaled).unwrap();
        for (a, b) in warped.vertices().iter().zip(mesh.vertices()) {
            assert!(norm(sub(*a, b.map(|c| 2.0 * c))) < 1e-9);
        }
    }

    #[test]
    fn warped_mesh_passes_through_displaced_landmark() {
        let (mesh, corr, picks) = sphere_with_landmarks();
        let mut subject = corr.clone();
        subject[3] = [subject[3][0] * 1.3, subject[3][1] * 1.3, subject[3][2] * 1.3];
        let warped = warp_mesh_tps(&mesh, &corr, &subject).unwrap();
        for (k, &vi) in picks.iter().enumerate() {
            assert!(norm(sub(warped.vertices()[vi], subject[k])) < 1e-9);
        }
        assert_eq!(warped.triangles().len(), mesh.triangles().len());
    }
}
