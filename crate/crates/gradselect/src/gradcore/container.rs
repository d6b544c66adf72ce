//! Binary container for cached batches, optimizer checkpoints and corpora.
//!
//! Every file starts with the magic `GSEL`, a `u32` format version and a
//! `u32` record kind; integers are little-endian `u32` unless noted and all
//! matrix payloads are row-major little-endian `f64`.
//!
//! Projected-batch records continue with the shared shape header
//! `{L, k1, k2, T}`, then `n`, the `L` layer ids, and per sample a `u64`
//! sample id followed by the â (k1×T) and ĝ (k2×T) matrices of each layer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gradcore::factor::{FactorPair, ProjectedSample};
use crate::linalg::Mat;

pub const MAGIC: [u8; 4] = *b"GSEL";
pub const FORMAT_VERSION: u32 = 1;

pub const RECORD_PROJECTED_BATCH: u32 = 1;
pub const RECORD_OPTIMIZER_CHECKPOINT: u32 = 2;
pub const RECORD_CORPUS: u32 = 3;

pub fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

pub fn write_mat(w: &mut impl Write, m: &Mat) -> Result<()> {
    for &v in m.as_slice() {
        write_f64(w, v)?;
    }
    Ok(())
}

pub fn read_mat(r: &mut impl Read, rows: usize, cols: usize) -> Result<Mat> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(read_f64(r)?);
    }
    Ok(Mat::from_vec(rows, cols, data))
}

/// Write `magic, version, kind` and return the writer.
pub fn write_header(w: &mut impl Write, kind: u32) -> Result<()> {
    w.write_all(&MAGIC)?;
    write_u32(w, FORMAT_VERSION)?;
    write_u32(w, kind)?;
    Ok(())
}

/// Validate `magic, version` and the expected record kind.
pub fn read_header(r: &mut impl Read, expected_kind: u32) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected GSEL")));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported container version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let kind = read_u32(r)?;
    if kind != expected_kind {
        return Err(Error::Format(format!(
            "record kind {kind} where {expected_kind} was expected"
        )));
    }
    Ok(())
}

/// Dump a batch of projected samples. All samples must share layer ids and
/// shapes, including sequence length.
pub fn dump_projected_batch(w: &mut impl Write, batch: &[ProjectedSample]) -> Result<()> {
    let first = batch
        .first()
        .ok_or(Error::EmptyInput("cannot dump an empty batch"))?;
    let l = first.layers.len();
    if l == 0 {
        return Err(Error::EmptyInput("samples carry no layers"));
    }
    let (k1, k2, t) = (
        first.layers[0].d1(),
        first.layers[0].d2(),
        first.layers[0].seq_len(),
    );
    for s in batch {
        if s.layers.len() != l {
            return Err(Error::ShapeMismatch("batch layer counts differ".into()));
        }
        for (a, b) in s.layers.iter().zip(&first.layers) {
            if a.layer_id != b.layer_id || a.d1() != k1 || a.d2() != k2 || a.seq_len() != t {
                return Err(Error::ShapeMismatch(format!(
                    "sample {} layer {} has a different shape",
                    s.sample_id, a.layer_id
                )));
            }
        }
    }

    write_header(w, RECORD_PROJECTED_BATCH)?;
    write_u32(w, l as u32)?;
    write_u32(w, k1 as u32)?;
    write_u32(w, k2 as u32)?;
    write_u32(w, t as u32)?;
    write_u32(w, batch.len() as u32)?;
    for pair in &first.layers {
        write_u32(w, pair.layer_id as u32)?;
    }
    for s in batch {
        write_u64(w, s.sample_id as u64)?;
        for pair in &s.layers {
            write_mat(w, &pair.activations)?;
            write_mat(w, &pair.out_grads)?;
        }
    }
    Ok(())
}

pub fn load_projected_batch(r: &mut impl Read) -> Result<Vec<ProjectedSample>> {
    read_header(r, RECORD_PROJECTED_BATCH)?;
    let l = read_u32(r)? as usize;
    let k1 = read_u32(r)? as usize;
    let k2 = read_u32(r)? as usize;
    let t = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    if l == 0 || k1 == 0 || k2 == 0 || t == 0 {
        return Err(Error::Format("zero dimension in batch header".into()));
    }
    let mut layer_ids = Vec::with_capacity(l);
    for _ in 0..l {
        layer_ids.push(read_u32(r)? as usize);
    }
    let mut batch = Vec::with_capacity(n);
    for _ in 0..n {
        let sample_id = read_u64(r)? as usize;
        let mut layers = Vec::with_capacity(l);
        for &layer_id in &layer_ids {
            let activations = read_mat(r, k1, t)?;
            let out_grads = read_mat(r, k2, t)?;
            layers.push(FactorPair {
                layer_id,
                activations,
                out_grads,
            });
        }
        batch.push(ProjectedSample { sample_id, layers });
    }
    Ok(batch)
}

pub fn dump_projected_batch_file(path: &Path, batch: &[ProjectedSample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    dump_projected_batch(&mut w, batch)?;
    w.flush()?;
    Ok(())
}

pub fn load_projected_batch_file(path: &Path) -> Result<Vec<ProjectedSample>> {
    let mut r = BufReader::new(File::open(path)?);
    load_projected_batch(&mut r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(n: usize) -> Vec<ProjectedSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..n)
            .map(|i| ProjectedSample {
                sample_id: i,
                layers: vec![
                    FactorPair::new(
                        0,
                        Mat::from_fn(3, 2, |_, _| rng.random::<f64>() - 0.5),
                        Mat::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5),
                    )
                    .unwrap(),
                    FactorPair::new(
                        2,
                        Mat::from_fn(3, 2, |_, _| rng.random::<f64>() - 0.5),
                        Mat::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5),
                    )
                    .unwrap(),
                ],
            })
            .collect()
    }

    #[test]
    fn batch_roundtrip_is_exact() {
        let original = batch(5);
        let mut buf = Vec::new();
        dump_projected_batch(&mut buf, &original).unwrap();
        let loaded = load_projected_batch(&mut buf.as_slice()).unwrap();
        assert_eq!(original, loaded);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let original = batch(1);
        let mut buf = Vec::new();
        dump_projected_batch(&mut buf, &original).unwrap();
        buf[0] = b'X';
        let err = load_projected_batch(&mut buf.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let original = batch(2);
        let mut buf = Vec::new();
        dump_projected_batch(&mut buf, &original).unwrap();
        buf.truncate(buf.len() - 7);
        assert!(load_projected_batch(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn mixed_shapes_refuse_to_dump() {
        let mut b = batch(2);
        b[1].layers[0] = FactorPair::new(0, Mat::zeros(4, 2), Mat::zeros(2, 2)).unwrap();
        let mut buf = Vec::new();
        assert!(dump_projected_batch(&mut buf, &b).is_err());
    }
}
