//! Inference-time embeddings and their on-disk forms.
//!
//! Binary layout: 8-byte magic `MVMIFTEM`, u32 rows, u32 cols, then
//! rows·cols little-endian f32 in row-major order. The CSV form has one
//! row per node and no header.

use std::fs;
use std::path::{Path, PathBuf};

use super::{prepare_inputs, TrainedModel};
use crate::error::{Error, Result};
use crate::graphdata::{write_file, GraphDataset};
use crate::model::{aggregate_inference, forward_dgi, forward_mvmift, BoundParams, ModelParams};
use crate::numerics::{Matrix, Tape};

pub const EMBEDDING_MAGIC: &[u8; 8] = b"MVMIFTEM";

/// Forward pass without corruption. The multi-view model returns the mean
/// of its three representations; the baseline returns its single one.
pub fn embed(model: &TrainedModel, dataset: &GraphDataset) -> Result<Matrix> {
    let fp = dataset.fingerprint();
    if fp != model.fingerprint {
        return Err(Error::contract(format!(
            "model was trained on dataset {} but got {}",
            model.fingerprint, fp
        )));
    }
    let (inputs, _) = prepare_inputs(dataset, &model.config)?;
    let mut tape = Tape::new();
    let bound = BoundParams::bind(&mut tape, &model.params);
    match &model.params {
        ModelParams::Mvmift(_) => {
            let fw = forward_mvmift(&mut tape, &inputs, &bound, None)?;
            aggregate_inference(tape.value(fw.z_f), tape.value(fw.z_t), tape.value(fw.z_c))
        }
        ModelParams::Dgi(_) => {
            let fw = forward_dgi(&mut tape, &inputs, &bound, None)?;
            Ok(tape.value(fw.z).clone())
        }
    }
}

pub fn write_embeddings_csv(z: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::with_capacity(z.data().len() * 12);
    for r in 0..z.rows() {
        for (j, v) in z.row(r).iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            s.push_str(&v.to_string());
        }
        s.push('\n');
    }
    write_file(path.as_ref(), s.as_bytes())
}

pub fn write_embeddings_bin(z: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 4 * z.data().len());
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&(z.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(z.cols() as u32).to_le_bytes());
    for v in z.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    write_file(path.as_ref(), &out)
}

/// Writes `<stem>.csv` and `<stem>.bin`, returning both paths.
pub fn write_embeddings(z: &Matrix, stem: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let stem = stem.as_ref();
    let csv = stem.with_extension("csv");
    let bin = stem.with_extension("bin");
    write_embeddings_csv(z, &csv)?;
    write_embeddings_bin(z, &bin)?;
    Ok((csv, bin))
}

/// Reads either form, chosen by the `.bin` extension or the magic bytes.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    if buf.starts_with(EMBEDDING_MAGIC) {
        if buf.len() < 16 {
            return Err(Error::parse(path, 1, "truncated embedding header"));
        }
        let rows = u32::from_le_bytes(buf[8..12].try_into().expect("4 bytes")) as usize;
        let cols = u32::from_le_bytes(buf[12..16].try_into().expect("4 bytes")) as usize;
        if buf.len() != 16 + 4 * rows * cols {
            return Err(Error::parse(path, 1, "embedding payload size does not match header"));
        }
        let data = buf[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        return Matrix::from_vec(rows, cols, data);
    }
    let text = String::from_utf8(buf).map_err(|_| Error::parse(path, 1, "not UTF-8 text"))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f32 = tok
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, ln + 1, format!("bad float {tok:?}")))?;
            data.push(v);
        }
        let c = data.len() - before;
        if *cols.get_or_insert(c) != c {
            return Err(Error::parse(path, ln + 1, "ragged embedding row"));
        }
        rows += 1;
    }
    Matrix::from_vec(rows, cols.unwrap_or(0), data)
}
