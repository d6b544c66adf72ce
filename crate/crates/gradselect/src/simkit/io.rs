//! Corpus export/import in the shared binary container format.
//!
//! Record layout after the common header: `n_train (u32)`, `n_target (u32)`,
//! `d0 (u32)`, `t (u32)`, `out_dim (u32)`, `label_kind (u32: 0 classes,
//! 1 regression)`, then each sample as `{id (u64), quality (u32), tokens
//! (d0×T f64), target}` with class targets as `T` u32 labels and regression
//! targets as an out_dim×T matrix. The generating teacher is not part of
//! the record; re-derive it from the corpus seed when needed.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gradcore::container::{
    read_header, read_mat, read_u32, read_u64, write_header, write_mat, write_u32, write_u64,
    RECORD_CORPUS,
};
use crate::simkit::corpus::{LabelKind, Quality, Sample, Target};

fn quality_code(q: Quality) -> u32 {
    match q {
        Quality::Clean => 0,
        Quality::NoisyLabel => 1,
        Quality::OffDistribution => 2,
    }
}

fn quality_from(code: u32) -> Result<Quality> {
    match code {
        0 => Ok(Quality::Clean),
        1 => Ok(Quality::NoisyLabel),
        2 => Ok(Quality::OffDistribution),
        other => Err(Error::Format(format!("unknown quality code {other}"))),
    }
}

fn infer_label_kind(samples: &[Sample]) -> Result<LabelKind> {
    match samples.first().map(|s| &s.target) {
        Some(Target::Classes(_)) => Ok(LabelKind::Classes),
        Some(Target::Values(_)) => Ok(LabelKind::Regression),
        None => Err(Error::EmptyInput("cannot export an empty corpus")),
    }
}

fn write_sample(
    w: &mut impl Write,
    s: &Sample,
    d0: usize,
    t: usize,
    out_dim: usize,
    kind: LabelKind,
) -> Result<()> {
    if s.tokens.shape() != (d0, t) {
        return Err(Error::ShapeMismatch(format!(
            "sample {} tokens are {:?}, corpus is ({d0}, {t})",
            s.id,
            s.tokens.shape()
        )));
    }
    write_u64(w, s.id as u64)?;
    write_u32(w, quality_code(s.quality))?;
    write_mat(w, &s.tokens)?;
    match (&s.target, kind) {
        (Target::Classes(labels), LabelKind::Classes) => {
            if labels.len() != t {
                return Err(Error::ShapeMismatch(format!(
                    "sample {} has {} labels for {t} positions",
                    s.id,
                    labels.len()
                )));
            }
            for &y in labels {
                write_u32(w, y as u32)?;
            }
        }
        (Target::Values(v), LabelKind::Regression) => {
            if v.shape() != (out_dim, t) {
                return Err(Error::ShapeMismatch(format!(
                    "sample {} regression target is {:?}",
                    s.id,
                    v.shape()
                )));
            }
            write_mat(w, v)?;
        }
        _ => {
            return Err(Error::InvalidArgument(
                "mixed label kinds within one corpus".into(),
            ))
        }
    }
    Ok(())
}

fn read_sample(
    r: &mut impl Read,
    d0: usize,
    t: usize,
    out_dim: usize,
    kind: LabelKind,
) -> Result<Sample> {
    let id = read_u64(r)? as usize;
    let quality = quality_from(read_u32(r)?)?;
    let tokens = read_mat(r, d0, t)?;
    let target = match kind {
        LabelKind::Classes => {
            let mut labels = Vec::with_capacity(t);
            for _ in 0..t {
                labels.push(read_u32(r)? as usize);
            }
            Target::Classes(labels)
        }
        LabelKind::Regression => Target::Values(read_mat(r, out_dim, t)?),
    };
    Ok(Sample {
        id,
        tokens,
        target,
        quality,
    })
}

pub fn export_corpus(w: &mut impl Write, train: &[Sample], target_set: &[Sample]) -> Result<()> {
    let kind = infer_label_kind(train)?;
    let d0 = train[0].tokens.rows();
    let t = train[0].tokens.cols();
    let out_dim = match &train[0].target {
        Target::Classes(_) => 0,
        Target::Values(v) => v.rows(),
    };
    write_header(w, RECORD_CORPUS)?;
    write_u32(w, train.len() as u32)?;
    write_u32(w, target_set.len() as u32)?;
    write_u32(w, d0 as u32)?;
    write_u32(w, t as u32)?;
    write_u32(w, out_dim as u32)?;
    write_u32(
        w,
        match kind {
            LabelKind::Classes => 0,
            LabelKind::Regression => 1,
        },
    )?;
    for s in train.iter().chain(target_set) {
        write_sample(w, s, d0, t, out_dim, kind)?;
    }
    Ok(())
}

pub fn import_corpus(r: &mut impl Read) -> Result<(Vec<Sample>, Vec<Sample>)> {
    read_header(r, RECORD_CORPUS)?;
    let n_train = read_u32(r)? as usize;
    let n_target = read_u32(r)? as usize;
    let d0 = read_u32(r)? as usize;
    let t = read_u32(r)? as usize;
    let out_dim = read_u32(r)? as usize;
    let kind = match read_u32(r)? {
        0 => LabelKind::Classes,
        1 => LabelKind::Regression,
        other => return Err(Error::Format(format!("unknown label kind {other}"))),
    };
    let mut train = Vec::with_capacity(n_train);
    for _ in 0..n_train {
        train.push(read_sample(r, d0, t, out_dim, kind)?);
    }
    let mut target_set = Vec::with_capacity(n_target);
    for _ in 0..n_target {
        target_set.push(read_sample(r, d0, t, out_dim, kind)?);
    }
    Ok((train, target_set))
}

pub fn export_corpus_file(path: &Path, train: &[Sample], target_set: &[Sample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    export_corpus(&mut w, train, target_set)?;
    w.flush()?;
    Ok(())
}

pub fn import_corpus_file(path: &Path) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let mut r = BufReader::new(File::open(path)?);
    import_corpus(&mut r)
}
