//! Checkpoint format.
//!
//! Layout: magic "MVCK", version u32 LE, parameter count u32 LE, then per
//! parameter: name length u32 + UTF-8 name, rank u32, dims (u32 LE each),
//! raw float32 LE row-major; followed by a length-prefixed UTF-8 JSON block
//! holding the config snapshot, epoch, and running loss. Reload reproduces
//! bit-identical forward outputs.

use super::{Model, TrainConfig};
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MVCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Snapshot {
    config: TrainConfig,
    epoch: usize,
    running_loss: f64,
}

pub fn save_checkpoint(
    model: &Model<f32>,
    epoch: usize,
    running_loss: f64,
    path: &Path,
) -> Result<()> {
    let display = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(&display, e);

    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(model.store.len() as u32).to_le_bytes())
        .map_err(io_err)?;
    for (name, tensor) in model.store.iter() {
        let bytes = name.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(bytes).map_err(io_err)?;
        w.write_all(&(tensor.shape().len() as u32).to_le_bytes())
            .map_err(io_err)?;
        for &dim in tensor.shape() {
            w.write_all(&(dim as u32).to_le_bytes()).map_err(io_err)?;
        }
        for &v in tensor.data() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    let snapshot = Snapshot {
        config: model.cfg.clone(),
        epoch,
        running_loss,
    };
    let json = serde_json::to_vec(&snapshot)?;
    w.write_all(&(json.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&json).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Load a checkpoint; returns the model plus the saved (epoch, running loss).
pub fn load_checkpoint(path: &Path) -> Result<(Model<f32>, usize, f64)> {
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
            "{display}: unsupported checkpoint version {version}"
        )));
    }
    let count = read_u32(&mut r, &display, 0)? as usize;
    let mut store: ParamStore<f32> = ParamStore::new();
    for idx in 0..count {
        let name_len = read_u32(&mut r, &display, idx)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes)
            .map_err(|_| Error::Truncated { path: display.clone(), item: idx })?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::Contract(format!("{display}: parameter {idx} name is not UTF-8")))?;
        let rank = read_u32(&mut r, &display, idx)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(&mut r, &display, idx)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = vec![0f32; n];
        let mut buf = [0u8; 4];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Truncated { path: display.clone(), item: idx })?;
            *v = f32::from_le_bytes(buf);
        }
        store.register(&name, Tensor::new(shape, data)?)?;
    }
    let json_len = read_u32(&mut r, &display, count)? as usize;
    let mut json = vec![0u8; json_len];
    r.read_exact(&mut json)
        .map_err(|_| Error::Truncated { path: display.clone(), item: count })?;
    let snapshot: Snapshot = serde_json::from_slice(&json)?;
    snapshot.config.validate()?;
    Ok((
        Model {
            store,
            cfg: snapshot.config,
        },
        snapshot.epoch,
        snapshot.running_loss,
    ))
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
    use crate::numerics::Tensor;
    use crate::trainer::PoolingKind;

    fn small_model() -> Model<f32> {
        let mut cfg = TrainConfig::new(3, 4);
        cfg.video.d = 4;
        cfg.video.u = 4;
        cfg.video.k = 2;
        cfg.sentence.d = 4;
        cfg.sentence.u = 4;
        cfg.sentence.k = 2;
        cfg.seed = 7;
        Model::init(cfg).unwrap()
    }

    #[test]
    fn round_trip_reproduces_bit_identical_embeddings() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mvck");
        save_checkpoint(&model, 42, 0.125, &path).unwrap();
        let (loaded, epoch, loss) = load_checkpoint(&path).unwrap();
        assert_eq!(epoch, 42);
        assert_eq!(loss, 0.125);
        assert_eq!(loaded.cfg, model.cfg);

        let features = Tensor::new(
            vec![5, 3],
            (0..15).map(|v| v as f32 * 0.1 - 0.6).collect(),
        )
        .unwrap();
        let a = model.embed_video(&features).unwrap();
        let b = loaded.embed_video(&features).unwrap();
        assert_eq!(a.phi.shape(), b.phi.shape());
        for (x, y) in a.phi.data().iter().zip(b.phi.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.attention.data().iter().zip(b.attention.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn loss_kind_swap_changes_no_parameter_shapes() {
        // the hinge and pseudo-Huber configurations share the model layout
        let mut cfg_hinge = TrainConfig::new(3, 4);
        cfg_hinge.video.k = 1;
        cfg_hinge.sentence.k = 1;
        cfg_hinge.pooling = PoolingKind::LastStates;
        cfg_hinge.loss.loss_kind = crate::objective::LossKind::Hinge;
        let mut cfg_huber = cfg_hinge.clone();
        cfg_huber.loss.loss_kind = crate::objective::LossKind::PseudoHuber;

        let a = Model::<f32>::init(cfg_hinge).unwrap();
        let b = Model::<f32>::init(cfg_huber).unwrap();
        assert_eq!(a.store.names(), b.store.names());
        for (name, t) in a.store.iter() {
            assert_eq!(t.shape(), b.store.get(name).unwrap().shape());
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.mvck");
        std::fs::write(&path, b"WRONG123").unwrap();
        match load_checkpoint(&path) {
            Err(Error::BadMagic { .. }) => {}
            Err(other) => panic!("expected bad magic, got {other}"),
            Ok(_) => panic!("expected bad magic error"),
        }
    }
}
