//! Binary checkpoint layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes  "MVMIFTCK"
//! version    u32      1
//! config     u32 length + UTF-8 JSON of the training config
//! dataset    u32 length + ASCII fingerprint
//! history    u32 count, then count × 5 f32 (l_mmi, l_cmi, l_r, l_d, total)
//! tensors    u32 count, then per tensor:
//!            u32 name length + name, u32 rows, u32 cols, rows·cols f32 row-major
//! ```

use std::fs;
use std::path::Path;

use super::{TrainConfig, TrainedModel};
use crate::error::{Error, Result};
use crate::graphdata::write_file;
use crate::model::ModelParams;
use crate::numerics::Matrix;
use crate::objectives::LossBreakdown;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MVMIFTCK";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::contract(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) -> Result<()> {
    put_u32(out, b.len())?;
    out.extend_from_slice(b);
    Ok(())
}

pub(crate) fn encode(model: &TrainedModel) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_bytes(&mut out, serde_json::to_string(&model.config)?.as_bytes())?;
    put_bytes(&mut out, model.fingerprint.as_bytes())?;
    put_u32(&mut out, model.history.len())?;
    for b in &model.history {
        for v in [b.l_mmi, b.l_cmi, b.l_r, b.l_d, b.total] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tensors = model.params.tensors();
    put_u32(&mut out, tensors.len())?;
    for (name, m) in tensors {
        put_bytes(&mut out, name.as_bytes())?;
        put_u32(&mut out, m.rows())?;
        put_u32(&mut out, m.cols())?;
        for v in m.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::contract(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f32(&mut self) -> Result<f32> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::contract("checkpoint string is not UTF-8"))
    }
}

pub(crate) fn decode(buf: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::contract("not a checkpoint file (bad magic)"));
    }
    let version = r.u32()? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::contract(format!("unsupported checkpoint version {version}")));
    }
    let config: TrainConfig = serde_json::from_str(&r.string()?)?;
    let fingerprint = r.string()?;
    let epochs = r.u32()?;
    let mut history = Vec::with_capacity(epochs.min(1 << 20));
    for _ in 0..epochs {
        history.push(LossBreakdown {
            l_mmi: r.f32()?,
            l_cmi: r.f32()?,
            l_r: r.f32()?,
            l_d: r.f32()?,
            total: r.f32()?,
        });
    }
    let count = r.u32()?;
    let mut tensors = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let name = r.string()?;
        let (rows, cols) = (r.u32()?, r.u32()?);
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::contract("tensor size overflows"))?;
        let bytes = r.take(len.checked_mul(4).ok_or_else(|| Error::contract("tensor size overflows"))?)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    if r.pos != buf.len() {
        return Err(Error::contract("trailing bytes after checkpoint"));
    }
    let params = ModelParams::from_tensors(config.model, tensors)?;
    Ok(TrainedModel {
        params,
        history,
        config,
        fingerprint,
    })
}

pub fn save_checkpoint(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode(model)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelKind;
    use crate::numerics::seeded_rng;

    fn model(kind: ModelKind) -> TrainedModel {
        TrainedModel {
            params: ModelParams::init(kind, 3, 4, &mut seeded_rng(2)).unwrap(),
            history: vec![LossBreakdown {
                l_mmi: -1.0,
                l_cmi: -0.5,
                l_r: 2.5,
                l_d: -0.25,
                total: 0.125,
            }],
            config: TrainConfig {
                model: kind,
                ..TrainConfig::default()
            },
            fingerprint: "abc".into(),
        }
    }

    #[test]
    fn round_trip() {
        for kind in [ModelKind::Mvmift, ModelKind::Dgi] {
            let m = model(kind);
            let bytes = encode(&m).unwrap();
            assert_eq!(decode(&bytes).unwrap(), m);
            assert_eq!(encode(&decode(&bytes).unwrap()).unwrap(), bytes);
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = encode(&model(ModelKind::Dgi)).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(decode(&extra).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("model.ckpt");
        let m = model(ModelKind::Mvmift);
        save_checkpoint(&m, &p).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), m);
        assert!(matches!(load_checkpoint(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
