//! Optimizer state checkpoints in the shared binary container format.
//!
//! Record layout after the common header: `t (u64)`, `beta1`, `beta2`, `eps`
//! (f64), parameter count `n (u64)`, `m[n]`, `v[n]`, then the projected
//! moment block: `pm_t (u64)`, `pm_beta2`, `pm_eps` (f64), layer count
//! `L (u32)` and per layer `{k1 (u32), k2 (u32), V (k1×k2 f64)}`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gradcore::container::{
    read_f64, read_header, read_mat, read_u32, read_u64, write_f64, write_header, write_mat,
    write_u32, write_u64, RECORD_OPTIMIZER_CHECKPOINT,
};
use crate::optstate::{AdamState, ProjectedMoment};

/// Parameter-space Adam state plus the projected moments, as one record.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerCheckpoint {
    pub adam: AdamState,
    pub projected: ProjectedMoment,
}

impl OptimizerCheckpoint {
    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, RECORD_OPTIMIZER_CHECKPOINT)?;
        write_u64(w, self.adam.t)?;
        write_f64(w, self.adam.beta1)?;
        write_f64(w, self.adam.beta2)?;
        write_f64(w, self.adam.eps)?;
        write_u64(w, self.adam.m.len() as u64)?;
        for &x in &self.adam.m {
            write_f64(w, x)?;
        }
        for &x in &self.adam.v {
            write_f64(w, x)?;
        }
        write_u64(w, self.projected.t)?;
        write_f64(w, self.projected.beta2)?;
        write_f64(w, self.projected.eps)?;
        write_u32(w, self.projected.per_layer.len() as u32)?;
        for m in &self.projected.per_layer {
            write_u32(w, m.rows() as u32)?;
            write_u32(w, m.cols() as u32)?;
            write_mat(w, m)?;
        }
        Ok(())
    }

    pub fn read(r: &mut impl Read) -> Result<Self> {
        read_header(r, RECORD_OPTIMIZER_CHECKPOINT)?;
        let t = read_u64(r)?;
        let beta1 = read_f64(r)?;
        let beta2 = read_f64(r)?;
        let eps = read_f64(r)?;
        let n = read_u64(r)? as usize;
        let mut m = Vec::with_capacity(n);
        for _ in 0..n {
            m.push(read_f64(r)?);
        }
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(read_f64(r)?);
        }
        if v.iter().any(|&x| x < 0.0) {
            return Err(Error::Format(
                "second moment contains negative entries".into(),
            ));
        }
        let adam = AdamState {
            m,
            v,
            t,
            beta1,
            beta2,
            eps,
        };

        let pm_t = read_u64(r)?;
        let pm_beta2 = read_f64(r)?;
        let pm_eps = read_f64(r)?;
        let layers = read_u32(r)? as usize;
        let mut per_layer = Vec::with_capacity(layers);
        for _ in 0..layers {
            let k1 = read_u32(r)? as usize;
            let k2 = read_u32(r)? as usize;
            per_layer.push(read_mat(r, k1, k2)?);
        }
        let projected = ProjectedMoment {
            per_layer,
            t: pm_t,
            beta2: pm_beta2,
            eps: pm_eps,
        };
        Ok(OptimizerCheckpoint { adam, projected })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read(&mut r)
    }
}
