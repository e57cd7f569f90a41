//! MetaImage (`.mhd` + `.raw`) subset: 3D, `MET_FLOAT`, little-endian.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Grid, Volume};
use crate::{Error, Result};

const REQUIRED_KEYS: [&str; 8] = [
    "ObjectType",
    "NDims",
    "DimSize",
    "ElementSpacing",
    "Offset",
    "ElementType",
    "ElementByteOrderMSB",
    "ElementDataFile",
];

/// Writes `header_path` plus a sibling `<stem>.raw` payload.
pub fn write_metaimage(volume: &Volume, header_path: &Path) -> Result<()> {
    let stem = header_path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::invalid(format!("bad header path {}", header_path.display())))?;
    let raw_name = format!("{stem}.raw");
    let raw_path = header_path.with_file_name(&raw_name);
    let g = volume.grid();

    let mut header = String::new();
    let _ = writeln!(header, "ObjectType = Image");
    let _ = writeln!(header, "NDims = 3");
    let _ = writeln!(header, "DimSize = {} {} {}", g.dims[0], g.dims[1], g.dims[2]);
    let _ = writeln!(
        header,
        "ElementSpacing = {:?} {:?} {:?}",
        g.spacing[0], g.spacing[1], g.spacing[2]
    );
    let _ = writeln!(header, "Offset = {:?} {:?} {:?}", g.origin[0], g.origin[1], g.origin[2]);
    let _ = writeln!(header, "ElementType = MET_FLOAT");
    let _ = writeln!(header, "ElementByteOrderMSB = False");
    let _ = writeln!(header, "ElementDataFile = {raw_name}");

    let mut payload = Vec::with_capacity(volume.data().len() * 4);
    for v in volume.data() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&raw_path, payload).map_err(|e| Error::io(&raw_path, e))?;
    fs::write(header_path, header).map_err(|e| Error::io(header_path, e))
}

pub fn read_metaimage(header_path: &Path) -> Result<Volume> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let bad = |msg: String| Error::format(header_path, msg);

    let mut fields = HashMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
        fields.insert(key.trim(), value.trim());
    }
    for key in REQUIRED_KEYS {
        if !fields.contains_key(key) {
            return Err(bad(format!("missing header key {key}")));
        }
    }
    if fields["ObjectType"] != "Image" {
        return Err(bad(format!("unsupported ObjectType {}", fields["ObjectType"])));
    }
    if fields["NDims"] != "3" {
        return Err(bad(format!("unsupported NDims {}", fields["NDims"])));
    }
    if fields["ElementType"] != "MET_FLOAT" {
        return Err(bad(format!("unsupported element type {}", fields["ElementType"])));
    }
    if !fields["ElementByteOrderMSB"].eq_ignore_ascii_case("false") {
        return Err(bad("unsupported big-endian payload".into()));
    }

    let dims: [usize; 3] = parse_triple(fields["DimSize"]).ok_or_else(|| bad("bad DimSize".into()))?;
    let spacing: [f64; 3] =
        parse_triple(fields["ElementSpacing"]).ok_or_else(|| bad("bad ElementSpacing".into()))?;
    let origin: [f64; 3] = parse_triple(fields["Offset"]).ok_or_else(|| bad("bad Offset".into()))?;
    let grid = Grid::new(dims, spacing, origin).map_err(|e| bad(e.to_string()))?;

    let raw_path = header_path.with_file_name(fields["ElementDataFile"]);
    let payload = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    if payload.len() != 4 * grid.voxel_count() {
        return Err(Error::format(
            &raw_path,
            format!(
                "payload size mismatch: {} bytes, header needs {}",
                payload.len(),
                4 * grid.voxel_count()
            ),
        ));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Volume::new(grid, data).map_err(|e| bad(e.to_string()))
}

fn parse_triple<T: std::str::FromStr>(value: &str) -> Option<[T; 3]> {
    let mut parts = value.split_whitespace().map(|t| t.parse::<T>().ok());
    let triple = [parts.next()??, parts.next()??, parts.next()??];
    parts.next().is_none().then_some(triple)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(dir: &Path, element_type: &str, dims: &str) -> std::path::PathBuf {
        let path = dir.join("v.mhd");
        let text = format!(
            "ObjectType = Image\nNDims = 3\nDimSize = {dims}\nElementSpacing = 1 1 1\nOffset = 0 0 0\n\
             ElementType = {element_type}\nElementByteOrderMSB = False\nElementDataFile = v.raw\n"
        );
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn zero_volume_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new([2, 2, 2], [0.7, 2.0, 1.1], [-1.25, 0.1, 3.0]).unwrap();
        let v = Volume::zeros(grid);
        let path = dir.path().join("zeros.mhd");
        write_metaimage(&v, &path).unwrap();
        assert_eq!(read_metaimage(&path).unwrap(), v);
        assert!(dir.path().join("zeros.raw").exists());
    }

    #[test]
    fn header_lists_exact_keys() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new([3, 2, 1], [2.0; 3], [0.0; 3]).unwrap();
        let path = dir.path().join("a.mhd");
        write_metaimage(&Volume::zeros(grid), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let keys: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
        assert_eq!(keys, REQUIRED_KEYS);
        assert!(text.contains("DimSize = 3 2 1\n"));
        assert!(text.contains("ElementDataFile = a.raw\n"));
    }

    #[test]
    fn payload_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = header(dir.path(), "MET_FLOAT", "2 2 2");
        fs::write(dir.path().join("v.raw"), [0u8; 28]).unwrap();
        let err = read_metaimage(&path).unwrap_err();
        assert!(err.to_string().contains("payload size mismatch"), "{err}");
    }

    #[test]
    fn unsupported_element_type() {
        let dir = tempfile::tempdir().unwrap();
        let path = header(dir.path(), "MET_UCHAR", "2 2 2");
        fs::write(dir.path().join("v.raw"), [0u8; 8]).unwrap();
        let err = read_metaimage(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported element type"), "{err}");
    }

    #[test]
    fn missing_raw_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = header(dir.path(), "MET_FLOAT", "1 1 1");
        assert!(matches!(read_metaimage(&path), Err(Error::Io { .. })));
    }
}
