//! Point-to-triangle distance and vertex-to-surface distance between meshes.

use super::{cross, dot, norm, sub, TriangleMesh, DEGENERATE_AREA};
use crate::shape::Point3;
use crate::stats::{summarize, BoxStats};
use crate::{Error, Result};

/// Exact Euclidean distance from `p` to the closed triangle `abc`.
///
/// Uses the Voronoi-region walk (vertex, edge, then face regions). Degenerate
/// triangles fall back to the nearest of their edges.
pub fn point_to_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> f64 {
    if 0.5 * norm(cross(sub(b, a), sub(c, a))) < DEGENERATE_AREA {
        return point_to_segment(p, a, b)
            .min(point_to_segment(p, b, c))
            .min(point_to_segment(p, c, a));
    }
    norm(sub(p, closest_point_on_triangle(p, a, b, c)))
}

fn closest_point_on_triangle(p: Point3, a: Point3, b: Point3, c: Point3) -> Point3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return axpy(a, v, ab);
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return axpy(a, w, ac);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return axpy(b, w, sub(c, b));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    axpy(axpy(a, v, ab), w, ac)
}

fn point_to_segment(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 > 0.0 { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    norm(sub(p, axpy(a, t, ab)))
}

fn axpy(a: Point3, t: f64, d: Point3) -> Point3 {
    [a[0] + t * d[0], a[1] + t * d[1], a[2] + t * d[2]]
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Point3,
    hi: Point3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: [f64::INFINITY; 3],
            hi: [f64::NEG_INFINITY; 3],
        }
    }

    fn grow(&mut self, p: Point3) {
        for a in 0..3 {
            self.lo[a] = self.lo[a].min(p[a]);
            self.hi[a] = self.hi[a].max(p[a]);
        }
    }

    fn merge(&mut self, other: &Aabb) {
        self.grow(other.lo);
        self.grow(other.hi);
    }

    fn distance_sq(&self, p: Point3) -> f64 {
        (0..3)
            .map(|a| {
                let d = (self.lo[a] - p[a]).max(0.0).max(p[a] - self.hi[a]);
                d * d
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Axis-aligned bounding-volume hierarchy over a mesh's triangles for exact
/// nearest-surface queries.
#[derive(Debug, Clone)]
pub struct Bvh<'m> {
    mesh: &'m TriangleMesh,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'m> Bvh<'m> {
    pub fn build(mesh: &'m TriangleMesh) -> Result<Self> {
        if mesh.triangles().is_empty() {
            return Err(Error::invalid("mesh has no triangles"));
        }
        let boxes: Vec<Aabb> = (0..mesh.triangles().len())
            .map(|t| {
                let mut b = Aabb::empty();
                mesh.triangle(t).iter().for_each(|&p| b.grow(p));
                b
            })
            .collect();
        let mut bvh = Bvh {
            mesh,
            order: (0..boxes.len()).collect(),
            nodes: Vec::new(),
        };
        bvh.split(&boxes, 0, boxes.len());
        Ok(bvh)
    }

    /// Builds the subtree over `order[start..end]` and returns its node index.
    fn split(&mut self, boxes: &[Aabb], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut centroids = Aabb::empty();
        for &t in &self.order[start..end] {
            bounds.merge(&boxes[t]);
            centroids.grow(center(&boxes[t]));
        }
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return self.nodes.len() - 1;
        }
        let axis = (0..3)
            .max_by(|&x, &y| {
                (centroids.hi[x] - centroids.lo[x]).total_cmp(&(centroids.hi[y] - centroids.lo[y]))
            })
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&x, &y| {
            center(&boxes[x])[axis].total_cmp(&center(&boxes[y])[axis])
        });
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.split(boxes, start, mid);
        let right = self.split(boxes, mid, end);
        self.nodes[slot] = Node::Inner { bounds, left, right };
        slot
    }

    /// Distance from `p` to the nearest triangle, identical to the
    /// brute-force minimum over all triangles.
    pub fn nearest_distance(&self, p: Point3) -> f64 {
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            // Slack keeps round-off in the box bound from pruning an exact tie.
            if node.bounds().distance_sq(p) > best * best * (1.0 + 1e-9) {
                continue;
            }
            match *node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[start..end] {
                        let [a, b, c] = self.mesh.triangle(t);
                        best = best.min(point_to_triangle(p, a, b, c));
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().distance_sq(p);
                    let dr = self.nodes[right].bounds().distance_sq(p);
                    // Visit the nearer child first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}

fn center(b: &Aabb) -> Point3 {
    std::array::from_fn(|a| 0.5 * (b.lo[a] + b.hi[a]))
}

/// Vertex-to-surface distances between two meshes.
#[derive(Debug, Clone)]
pub struct SurfaceDistance {
    /// Per vertex of `A`, distance to the surface of `B`.
    pub a_to_b: Vec<f64>,
    pub a_to_b_summary: BoxStats,
    /// Per vertex of `B`, distance to the surface of `A` (symmetric mode only).
    pub b_to_a: Option<Vec<f64>>,
    pub b_to_a_summary: Option<BoxStats>,
}

impl SurfaceDistance {
    /// Larger of the two one-sided means (one-sided mean otherwise).
    pub fn max_of_means(&self) -> f64 {
        let m = self.a_to_b_summary.mean;
        self.b_to_a_summary.map_or(m, |s| m.max(s.mean))
    }

    /// Hausdorff distance over vertices (one-sided unless symmetric).
    pub fn hausdorff(&self) -> f64 {
        let m = self.a_to_b_summary.max;
        self.b_to_a_summary.map_or(m, |s| m.max(s.max))
    }

    /// `vertex_index,distance_mm` rows for the `A` side.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vertex_index,distance_mm\n");
        for (i, d) in self.a_to_b.iter().enumerate() {
            out.push_str(&format!("{i},{d}\n"));
        }
        out
    }
}

pub fn surface_distance(a: &TriangleMesh, b: &TriangleMesh, symmetric: bool) -> Result<SurfaceDistance> {
    if a.vertices().is_empty() || b.vertices().is_empty() {
        return Err(Error::invalid("surface distance needs nonempty meshes"));
    }
    let one_sided = |from: &TriangleMesh, to: &TriangleMesh| -> Result<Vec<f64>> {
        let bvh = Bvh::build(to)?;
        Ok(from.vertices().iter().map(|&p| bvh.nearest_distance(p)).collect())
    };
    let a_to_b = one_sided(a, b)?;
    let a_to_b_summary = summarize(&a_to_b)?;
    let (b_to_a, b_to_a_summary) = if symmetric {
        let d = one_sided(b, a)?;
        let s = summarize(&d)?;
        (Some(d), Some(s))
    } else {
        (None, None)
    };
    Ok(SurfaceDistance {
        a_to_b,
        a_to_b_summary,
        b_to_a,
        b_to_a_summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::sphere::ring_sphere;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(offset: Point3) -> TriangleMesh {
        let mut v = Vec::new();
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    v.push([i as f64 + offset[0], j as f64 + offset[1], k as f64 + offset[2]]);
                }
            }
        }
        // Two triangles per face.
        let quads = [
            [0, 2, 3, 1],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 4, 6, 2],
            [1, 3, 7, 5],
        ];
        let tris = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriangleMesh::new(v, tris).unwrap()
    }

    #[test]
    fn above_centroid() {
        let (a, b, c) = ([0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0]);
        assert!((point_to_triangle([1.0, 1.0, 2.5], a, b, c) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn vertex_and_edge_regions() {
        let (a, b, c) = ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let p = [-1.0, -2.0, 2.0];
        assert!((point_to_triangle(p, a, b, c) - 3.0).abs() < 1e-15);
        assert!((point_to_triangle([0.5, -1.0, 0.0], a, b, c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_triangle_falls_back_to_segments() {
        let (a, b, c) = ([0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert!((point_to_triangle([1.0, 3.0, 4.0], a, b, c) - 5.0).abs() < 1e-15);
        assert!((point_to_triangle([0.0, 0.0, 2.0], a, a, a) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn identical_meshes_are_zero() {
        let (dirs, tris) = ring_sphere(300).unwrap();
        let m = TriangleMesh::new(dirs, tris).unwrap();
        let d = surface_distance(&m, &m, true).unwrap();
        assert!(d.a_to_b.iter().all(|&x| x == 0.0));
        assert_eq!(d.hausdorff(), 0.0);
    }

    #[test]
    fn cube_shifted_up_by_half() {
        let a = cube([0.0; 3]);
        let b = cube([0.0, 0.0, 0.5]);
        let d = surface_distance(&a, &b, true).unwrap();
        // Bottom corners of A sit 0.5 below B; top corners lie on B's side faces.
        for (i, &dist) in d.a_to_b.iter().enumerate() {
            let expected = if i < 4 { 0.5 } else { 0.0 };
            assert!((dist - expected).abs() < 1e-15, "vertex {i}: {dist}");
        }
        assert!((d.a_to_b_summary.mean - 0.25).abs() < 1e-15);
        let back = d.b_to_a.clone().unwrap();
        for (i, &dist) in back.iter().enumerate() {
            let expected = if i < 4 { 0.0 } else { 0.5 };
            assert!((dist - expected).abs() < 1e-15, "vertex {i}: {dist}");
        }
        assert!((d.max_of_means() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn bvh_matches_brute_force_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..5 {
            let (dirs, tris) = ring_sphere(100 + 60 * trial).unwrap();
            let bumpy: Vec<Point3> = dirs
                .iter()
                .map(|d| d.map(|c| c * rng.random_range(8.0..12.0)))
                .collect();
            let target = TriangleMesh::new(bumpy, tris).unwrap();
            let bvh = Bvh::build(&target).unwrap();
            for _ in 0..200 {
                let p: Point3 = std::array::from_fn(|_| rng.random_range(-15.0..15.0));
                let brute = (0..target.triangles().len())
                    .map(|t| {
                        let [a, b, c] = target.triangle(t);
                        point_to_triangle(p, a, b, c)
                    })
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(bvh.nearest_distance(p), brute);
            }
        }
    }

    #[test]
    fn csv_export() {
        let a = cube([0.0; 3]);
        let d = surface_distance(&a, &a, false).unwrap();
        let csv = d.to_csv();
        assert!(csv.starts_with("vertex_index,distance_mm\n0,0\n"));
        assert_eq!(csv.lines().count(), 9);
    }
}
