//! Property tests over the public API.

use proptest::prelude::*;
use voxshape_core::augment::fit_tps;
use voxshape_core::learn::{adagrad_step, AdagradState};
use voxshape_core::mesh::{point_to_triangle, read_obj, write_obj, TriangleMesh};
use voxshape_core::shape::{fit_shape_space, CorrespondenceSet, Point3};
use voxshape_core::stats::{summarize, t_cdf, tost};
use voxshape_core::volume::{read_metaimage, write_metaimage, Grid, OutsidePolicy, Volume};

fn point() -> impl Strategy<Value = Point3> {
    prop::array::uniform3(-50.0..50.0f64)
}

fn dist(a: Point3, b: Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn shape_space_basis_is_orthonormal_and_reconstructs_training_shapes(
        shapes in prop::collection::vec(prop::collection::vec(point(), 6), 4..12)
    ) {
        let set = CorrespondenceSet::new(shapes).unwrap();
        let space = fit_shape_space(&set, 1.0).unwrap();
        let b = space.basis();
        let gram = b.transpose() * b;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((gram[(i, j)] - want).abs() < 1e-10);
            }
        }
        // At a threshold of 1 every training shape lies in the space.
        for i in 0..set.shape_count() {
            let x = set.shape_vector(i);
            let back = space.reconstruct(&space.project(&x).unwrap()).unwrap();
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (a, c) in x.iter().zip(&back) {
                prop_assert!((a - c).abs() < 1e-9 * scale);
            }
        }
        let eig = space.eigenvalues();
        prop_assert!(eig.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn tps_interpolates_its_landmarks(
        pts in prop::collection::vec(point(), 8..24),
        shift in prop::collection::vec(prop::array::uniform3(-3.0..3.0f64), 24),
    ) {
        let target: Vec<Point3> = pts.iter().zip(&shift).map(|(p, s)| [p[0] + s[0], p[1] + s[1], p[2] + s[2]]).collect();
        // Random draws can be (near) coplanar; such inputs are rejected, not mis-fit.
        if let Ok(tps) = fit_tps(&pts, &target, 0.0) {
            for (s, t) in pts.iter().zip(&target) {
                prop_assert!(dist(tps.apply(*s), *t) < 1e-7);
            }
        }
    }

    #[test]
    fn point_to_triangle_is_bounded_by_vertex_distances(p in point(), a in point(), b in point(), c in point()) {
        let d = point_to_triangle(p, a, b, c);
        prop_assert!(d >= 0.0);
        let nearest_vertex = dist(p, a).min(dist(p, b)).min(dist(p, c));
        prop_assert!(d <= nearest_vertex + 1e-9);
    }

    #[test]
    fn box_stats_are_ordered(values in prop::collection::vec(-1e3..1e3f64, 1..60)) {
        let s = summarize(&values).unwrap();
        prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        prop_assert!(s.min <= s.mean && s.mean <= s.max);
        prop_assert_eq!(s.count, values.len());
    }

    #[test]
    fn t_cdf_is_symmetric_and_monotone(x in -40.0..40.0f64, nu in 0.5..200.0f64) {
        let lo = t_cdf(x, nu).unwrap();
        let hi = t_cdf(-x, nu).unwrap();
        prop_assert!((lo + hi - 1.0).abs() < 1e-12);
        prop_assert!(t_cdf(x + 0.1, nu).unwrap() >= lo);
    }

    #[test]
    fn tost_is_never_equivalent_when_the_mean_is_outside(diffs in prop::collection::vec(0.2..1.0f64, 2..30)) {
        let r = tost(&diffs, -0.1, 0.1, 0.05).unwrap();
        prop_assert!(!r.equivalent);
    }

    #[test]
    fn trilinear_sampling_hits_voxel_values_and_stays_in_range(
        values in prop::collection::vec(-100.0..100.0f32, 27),
        frac in prop::array::uniform3(0.0..2.0f64),
    ) {
        let grid = Grid::new([3, 3, 3], [1.5, 2.0, 0.5], [-1.0, 4.0, 2.0]).unwrap();
        let v = Volume::new(grid, values.clone()).unwrap();
        for k in 0..3 {
            for j in 0..3 {
                for i in 0..3 {
                    let got = v.sample_trilinear(grid.voxel_center(i, j, k), OutsidePolicy::Constant(0.0));
                    prop_assert!((got - v.get(i, j, k) as f64).abs() < 1e-9);
                }
            }
        }
        let p = grid.index_to_physical(frac);
        let got = v.sample_trilinear(p, OutsidePolicy::Clamp);
        let lo = values.iter().cloned().fold(f32::INFINITY, f32::min) as f64;
        let hi = values.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
        prop_assert!(got >= lo - 1e-9 && got <= hi + 1e-9);
    }

    #[test]
    fn adagrad_with_zero_gradient_is_a_no_op(params in prop::collection::vec(-5.0..5.0f64, 1..20)) {
        let mut p = vec![params.clone()];
        let mut state = AdagradState::new(&p);
        let g = vec![vec![0.0; params.len()]];
        adagrad_step(&mut p, &g, &mut state, 0.1, 1e-8).unwrap();
        prop_assert_eq!(&p[0], &params);
    }
}

#[test]
fn metaimage_and_obj_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new([4, 3, 2], [1.0, 2.0, 3.0], [0.5, -1.0, 7.0]).unwrap();
    let v = Volume::from_fn(grid, |p| p[0] * 10.0 - p[1] + p[2] * 0.25).unwrap();
    let path = dir.path().join("v.mhd");
    write_metaimage(&v, &path).unwrap();
    assert!(dir.path().join("v.raw").is_file());
    assert_eq!(read_metaimage(&path).unwrap(), v);

    let mesh = TriangleMesh::new(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.1, 0.2, 1.0 / 3.0]],
        vec![[0, 1, 2], [0, 1, 3], [1, 2, 3], [0, 2, 3]],
    )
    .unwrap();
    let obj = dir.path().join("m.obj");
    write_obj(&mesh, &obj).unwrap();
    let back = read_obj(&obj).unwrap();
    assert_eq!(back.vertices(), mesh.vertices());
    assert_eq!(back.triangles(), mesh.triangles());
}
