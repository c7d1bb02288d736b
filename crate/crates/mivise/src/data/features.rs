//! Binary feature-file format.
//!
//! Layout: magic "MVFT", version u32 LE, item count u32 LE, then per item:
//! id byte-length u32 + UTF-8 id, T u32, D u32, T·D float32 LE row-major.
//! Round-trips are bit-exact.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MVFT";
const VERSION: u32 = 1;

/// One named feature sequence: T steps of width D.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureItem {
    pub id: String,
    /// T×D tensor, one row per frame/word.
    pub features: Tensor<f32>,
}

pub fn write_features(path: &Path, items: &[FeatureItem]) -> Result<()> {
    let mut seen = HashMap::new();
    for item in items {
        if seen.insert(item.id.as_str(), ()).is_some() {
            return Err(Error::DuplicateId(item.id.clone()));
        }
    }
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(&display, e);
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(items.len() as u32).to_le_bytes()).map_err(io_err)?;
    for item in items {
        let id = item.id.as_bytes();
        w.write_all(&(id.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(id).map_err(io_err)?;
        let t = item.features.rows() as u32;
        let d = item.features.cols() as u32;
        w.write_all(&t.to_le_bytes()).map_err(io_err)?;
        w.write_all(&d.to_le_bytes()).map_err(io_err)?;
        for &v in item.features.data() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureItem>> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    if r.read_exact(&mut magic).is_err() || &magic != MAGIC {
        return Err(Error::BadMagic {
            path: display,
            expected: String::from_utf8_lossy(MAGIC).into_owned(),
        });
    }
    let version = read_u32(&mut r, &display, 0)?;
    if version != VERSION {
        return Err(Error::Contract(format!(
            "{display}: unsupported feature-file version {version}"
        )));
    }
    let count = read_u32(&mut r, &display, 0)? as usize;
    let mut items = Vec::with_capacity(count);
    let mut ids = HashMap::new();
    for idx in 0..count {
        let id_len = read_u32(&mut r, &display, idx)? as usize;
        let mut id_bytes = vec![0u8; id_len];
        r.read_exact(&mut id_bytes)
            .map_err(|_| Error::Truncated { path: display.clone(), item: idx })?;
        let id = String::from_utf8(id_bytes)
            .map_err(|_| Error::Contract(format!("{display}: item {idx} id is not UTF-8")))?;
        if ids.insert(id.clone(), ()).is_some() {
            return Err(Error::DuplicateId(id));
        }
        let t = read_u32(&mut r, &display, idx)? as usize;
        let d = read_u32(&mut r, &display, idx)? as usize;
        if t == 0 || d == 0 {
            return Err(Error::Contract(format!(
                "{display}: item {idx} ({id}) has empty shape {t}x{d}"
            )));
        }
        let mut data = vec![0f32; t * d];
        let mut buf = [0u8; 4];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Truncated { path: display.clone(), item: idx })?;
            *v = f32::from_le_bytes(buf);
        }
        items.push(FeatureItem {
            id,
            features: Tensor::new(vec![t, d], data)?,
        });
    }
    Ok(items)
}

fn read_u32(r: &mut impl Read, path: &str, item: usize) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| Error::Truncated {
        path: path.to_string(),
        item,
    })?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items() -> Vec<FeatureItem> {
        vec![
            FeatureItem {
                id: "clip_a".into(),
                features: Tensor::new(vec![2, 3], vec![1.0, -2.5, 0.0, 4.25, 1e-7, -3.5]).unwrap(),
            },
            FeatureItem {
                id: "clip_b".into(),
                features: Tensor::new(vec![1, 3], vec![0.125, 7.0, -0.0]).unwrap(),
            },
        ]
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.mvft");
        let original = items();
        write_features(&path, &original).unwrap();
        let loaded = read_features(&path).unwrap();
        assert_eq!(original.len(), loaded.len());
        for (a, b) in original.iter().zip(&loaded) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.features.shape(), b.features.shape());
            for (x, y) in a.features.data().iter().zip(b.features.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn empty_item_list_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.mvft");
        write_features(&path, &[]).unwrap();
        assert!(read_features(&path).unwrap().is_empty());
    }

    #[test]
    fn truncation_names_the_item() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cut.mvft");
        write_features(&path, &items()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // cut into the second item's float payload
        std::fs::write(&path, &bytes[..bytes.len() - 6]).unwrap();
        match read_features(&path).unwrap_err() {
            Error::Truncated { item, .. } => assert_eq!(item, 1),
            other => panic!("expected truncation, got {other}"),
        }
    }

    #[test]
    fn bad_magic_is_a_distinct_diagnostic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.mvft");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(
            read_features(&path).unwrap_err(),
            Error::BadMagic { .. }
        ));
    }

    #[test]
    fn duplicate_ids_rejected_on_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.mvft");
        let mut dup = items();
        dup[1].id = dup[0].id.clone();
        assert!(matches!(
            write_features(&path, &dup).unwrap_err(),
            Error::DuplicateId(_)
        ));
    }
}
