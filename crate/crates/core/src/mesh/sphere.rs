//! Unit-sphere point sets with a matching triangulation.
//!
//! Points are two poles plus latitude rings; ring sizes follow `sin θ` so the
//! sampling is roughly uniform. Adjacent rings are stitched by walking both
//! rings in longitude order, which closes every band with `n_a + n_b`
//! triangles and yields a closed genus-0 surface.

use std::f64::consts::PI;

use crate::shape::Point3;
use crate::{Error, Result};

/// Returns `count` unit directions and outward-facing triangles over them.
pub fn ring_sphere(count: usize) -> Result<(Vec<Point3>, Vec<[usize; 3]>)> {
    if count < 5 {
        return Err(Error::invalid(format!("ring sphere needs at least 5 points, got {count}")));
    }
    let ring_points = count - 2;
    let rings = ((PI * ring_points as f64 / 4.0).sqrt().round() as usize)
        .clamp(1, ring_points / 3);
    let thetas: Vec<f64> = (0..rings).map(|i| PI * (i + 1) as f64 / (rings + 1) as f64).collect();
    let sizes = apportion(ring_points, &thetas.iter().map(|t| t.sin()).collect::<Vec<_>>(), 3);

    let mut dirs = vec![[0.0, 0.0, 1.0]];
    let mut ring_start = Vec::with_capacity(rings);
    for (r, (&theta, &n)) in thetas.iter().zip(&sizes).enumerate() {
        ring_start.push(dirs.len());
        let offset = if r % 2 == 0 { 0.0 } else { 0.5 };
        for k in 0..n {
            let phi = 2.0 * PI * (k as f64 + offset) / n as f64;
            dirs.push([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
        }
    }
    let south = dirs.len();
    dirs.push([0.0, 0.0, -1.0]);

    let mut tris = Vec::with_capacity(2 * count - 4);
    let first = ring_start[0];
    for k in 0..sizes[0] {
        tris.push([0, first + k, first + (k + 1) % sizes[0]]);
    }
    for r in 0..rings - 1 {
        stitch(
            (ring_start[r], sizes[r], if r % 2 == 0 { 0.0 } else { 0.5 }),
            (ring_start[r + 1], sizes[r + 1], if (r + 1) % 2 == 0 { 0.0 } else { 0.5 }),
            &mut tris,
        );
    }
    let last = ring_start[rings - 1];
    let n_last = sizes[rings - 1];
    for k in 0..n_last {
        tris.push([south, last + (k + 1) % n_last, last + k]);
    }
    Ok((dirs, tris))
}

/// Triangulates the band between an upper ring `a` and a lower ring `b`,
/// each given as (first index, size, phase offset in steps).
fn stitch(a: (usize, usize, f64), b: (usize, usize, f64), tris: &mut Vec<[usize; 3]>) {
    let (sa, na, oa) = a;
    let (sb, nb, ob) = b;
    let angle = |k: usize, n: usize, o: f64| (k as f64 + o) / n as f64;
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let advance_a = j == nb || (i < na && angle(i + 1, na, oa) <= angle(j + 1, nb, ob));
        let (ai, bj) = (sa + i % na, sb + j % nb);
        if advance_a {
            tris.push([ai, bj, sa + (i + 1) % na]);
            i += 1;
        } else {
            tris.push([ai, bj, sb + (j + 1) % nb]);
            j += 1;
        }
    }
}

/// Splits `total` into integer parts proportional to `weights`, each at
/// least `min`, by largest remainder.
fn apportion(total: usize, weights: &[f64], min: usize) -> Vec<usize> {
    let spare = total - min * weights.len();
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| spare as f64 * w / sum).collect();
    let mut parts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut left = spare - parts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&x, &y| (exact[y] - exact[y].floor()).total_cmp(&(exact[x] - exact[x].floor())));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        parts[i] += 1;
        left -= 1;
    }
    parts.iter().map(|p| p + min).collect()
}
