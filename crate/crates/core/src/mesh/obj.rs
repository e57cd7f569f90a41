use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::TriangleMesh;
use crate::{Error, Result};

/// Reads `v` and `f` records. Polygonal faces are fan-triangulated from their
/// first vertex; other record types are ignored.
pub fn read_obj(path: &Path) -> Result<TriangleMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let bad = |msg: &str| Error::format(path, format!("line {}: {msg}", lineno + 1));
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|_| bad("malformed vertex record")))
                    .collect::<Result<_>>()?;
                if coords.len() != 3 || coords.iter().any(|c| !c.is_finite()) {
                    return Err(bad("malformed vertex record"));
                }
                vertices.push([coords[0], coords[1], coords[2]]);
            }
            Some("f") => {
                let corners = tokens
                    .map(|t| {
                        let idx: i64 = t
                            .split('/')
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| bad("malformed face record"))?;
                        resolve_index(idx, vertices.len())
                            .ok_or_else(|| bad(&format!("face index {idx} out of range")))
                    })
                    .collect::<Result<Vec<usize>>>()?;
                if corners.len() < 3 {
                    return Err(bad("face with fewer than 3 vertices"));
                }
                for w in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[w], corners[w + 1]]);
                }
            }
            _ => {}
        }
    }
    let mesh = TriangleMesh::new(vertices, triangles).map_err(|e| Error::format(path, e.to_string()))?;
    let degenerate = mesh.degenerate_triangles();
    if !degenerate.is_empty() {
        log::warn!(
            "{}: {} degenerate triangles (first: {})",
            path.display(),
            degenerate.len(),
            degenerate[0]
        );
    }
    Ok(mesh)
}

/// OBJ indices are 1-based; negative ones count back from the latest vertex.
fn resolve_index(idx: i64, seen: usize) -> Option<usize> {
    let seen = seen as i64;
    let zero_based = match idx {
        i if i > 0 => i - 1,
        i if i < 0 => seen + i,
        _ => return None,
    };
    (0..seen).contains(&zero_based).then_some(zero_based as usize)
}

pub fn write_obj(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_str(text: &str) -> Result<TriangleMesh> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.obj");
        fs::write(&path, text).unwrap();
        read_obj(&path)
    }

    #[test]
    fn single_triangle() {
        let m = read_str("# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert_eq!(m.vertices().len(), 3);
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn quad_is_fan_triangulated() {
        let m = read_str("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n").unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn negative_indices() {
        let m = read_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n").unwrap();
        assert_eq!(m.triangles(), &[[0, 1, 2]]);
    }

    #[test]
    fn out_of_range_face() {
        let err = read_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn malformed_records() {
        assert!(read_str("v 0 0\n").is_err());
        assert!(read_str("v 0 0 x\n").is_err());
        assert!(read_str("v 0 0 0\nv 1 0 0\nf 1 2\n").is_err());
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.obj");
        let m = TriangleMesh::new(
            vec![[0.1, -2.0 / 3.0, 1e-7], [1.0, 0.0, 3.25], [std::f64::consts::PI, 1.0, 0.0]],
            vec![[0, 1, 2], [2, 1, 0]],
        )
        .unwrap();
        write_obj(&m, &path).unwrap();
        assert_eq!(read_obj(&path).unwrap(), m);
    }
}
