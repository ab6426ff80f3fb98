//! Named parameter tensors with per-parameter optimizer state and a
//! binary checkpoint format.
//!
//! All model components share one store and are distinguished by name
//! prefix ("theta", "phi", "phi_target", "theta_out", "decoder"), which is
//! what lets the two training stages update disjoint subsets and the soft
//! target update blend one prefix into another.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::tensor::Tensor;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

const CKPT_MAGIC: &[u8; 8] = b"WGNNCKPT";
const CKPT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
struct ParamEntry {
    value: Tensor,
    /// First and second Adam moments, plus the per-parameter step count
    /// driving bias correction. Moments are not checkpointed.
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    entries: BTreeMap<String, ParamEntry>,
}

impl ParameterStore {
    pub fn new() -> Self {
        ParameterStore::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.entries.contains_key(name) {
            return Err(Error::contract(format!("parameter {name} already exists")));
        }
        if !value.is_finite() {
            return Err(Error::contract(format!("parameter {name} is not finite")));
        }
        let n = value.len();
        self.entries.insert(
            name.to_string(),
            ParamEntry {
                value,
                m: vec![0.0; n],
                v: vec![0.0; n],
                step: 0,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .map(|e| &e.value)
            .ok_or_else(|| Error::contract(format!("unknown parameter {name}")))
    }

    pub fn set_value(&mut self, name: &str, value: Tensor) -> Result<()> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter {name}")))?;
        if entry.value.shape() != value.shape() {
            return Err(Error::contract(format!(
                "parameter {name}: shape {:?} cannot replace {:?}",
                value.shape(),
                entry.value.shape()
            )));
        }
        entry.value = value;
        Ok(())
    }

    pub(crate) fn set_coord(&mut self, name: &str, idx: usize, x: f64) -> Result<()> {
        let entry = self
            .entries
            .get_mut(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter {name}")))?;
        entry.value.data_mut()[idx] = x;
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn names_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.entries
            .keys()
            .filter(|n| n.starts_with(prefix))
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One adaptive-moment update (bias-corrected) restricted to `subset`.
    /// Every name in the subset must have a gradient; parameters outside
    /// the subset are left bit-identical, moments included.
    pub fn adam_step(
        &mut self,
        grads: &BTreeMap<String, Tensor>,
        subset: &[String],
        lr: f64,
    ) -> Result<()> {
        for name in subset {
            let grad = grads
                .get(name)
                .ok_or_else(|| Error::contract(format!("no gradient for parameter {name}")))?;
            let entry = self
                .entries
                .get_mut(name)
                .ok_or_else(|| Error::contract(format!("unknown parameter {name}")))?;
            if grad.shape() != entry.value.shape() {
                return Err(Error::contract(format!(
                    "gradient shape {:?} mismatches parameter {name} {:?}",
                    grad.shape(),
                    entry.value.shape()
                )));
            }
            entry.step += 1;
            let c1 = 1.0 - ADAM_BETA1.powi(entry.step as i32);
            let c2 = 1.0 - ADAM_BETA2.powi(entry.step as i32);
            let values = entry.value.data_mut();
            for (i, &g) in grad.data().iter().enumerate() {
                entry.m[i] = ADAM_BETA1 * entry.m[i] + (1.0 - ADAM_BETA1) * g;
                entry.v[i] = ADAM_BETA2 * entry.v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = entry.m[i] / c1;
                let v_hat = entry.v[i] / c2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
            if !entry.value.is_finite() {
                return Err(Error::contract(format!(
                    "parameter {name} became non-finite after update"
                )));
            }
        }
        Ok(())
    }

    /// For every `src_prefix.rest`, sets
    /// `dst_prefix.rest = beta * src + (1 - beta) * dst` elementwise.
    pub fn blend_prefix(&mut self, src_prefix: &str, dst_prefix: &str, beta: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::input(format!("smoothing factor {beta} outside [0, 1]")));
        }
        for src_name in self.names_with_prefix(&format!("{src_prefix}.")) {
            let dst_name = format!("{dst_prefix}{}", &src_name[src_prefix.len()..]);
            let src = self.get(&src_name)?.clone();
            let dst = self
                .entries
                .get_mut(&dst_name)
                .ok_or_else(|| Error::contract(format!("no counterpart {dst_name}")))?;
            if dst.value.shape() != src.shape() {
                return Err(Error::contract(format!(
                    "{src_name} and {dst_name} differ in shape"
                )));
            }
            for (d, &s) in dst.value.data_mut().iter_mut().zip(src.data()) {
                *d = beta * s + (1.0 - beta) * *d;
            }
        }
        Ok(())
    }

    /// Copies every `src_prefix.rest` value into a fresh `dst_prefix.rest`.
    pub fn copy_prefix(&mut self, src_prefix: &str, dst_prefix: &str) -> Result<()> {
        for src_name in self.names_with_prefix(&format!("{src_prefix}.")) {
            let dst_name = format!("{dst_prefix}{}", &src_name[src_prefix.len()..]);
            let value = self.get(&src_name)?.clone();
            self.insert(&dst_name, value)?;
        }
        Ok(())
    }

    /// FNV-1a hash over names, shapes, and value bits under a prefix.
    /// Used to assert that a training stage left a component untouched.
    pub fn fingerprint_prefix(&self, prefix: &str) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for (name, entry) in &self.entries {
            if !name.starts_with(prefix) {
                continue;
            }
            eat(name.as_bytes());
            for &d in entry.value.shape() {
                eat(&(d as u64).to_le_bytes());
            }
            for &x in entry.value.data() {
                eat(&x.to_bits().to_le_bytes());
            }
        }
        h
    }

    /// Writes all parameter values (not optimizer moments) as named
    /// little-endian f64 arrays. Layout:
    /// magic "WGNNCKPT", version u32, entry count u32, then per entry
    /// name length u32 + UTF-8 name, ndim u32, dims as u64 each, raw f64
    /// data. All integers little-endian. Round-trips bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(CKPT_MAGIC)?;
        w.write_all(&CKPT_VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, entry) in &self.entries {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(entry.value.shape().len() as u32).to_le_bytes())?;
            for &d in entry.value.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &x in entry.value.data() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a checkpoint written by [`ParameterStore::save`]. Optimizer
    /// moments start fresh.
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, path, "magic")?;
        if &magic != CKPT_MAGIC {
            return Err(Error::Checkpoint(format!(
                "{}: not a parameter checkpoint (bad magic)",
                path.display()
            )));
        }
        let version = read_u32(&mut r, path, "version")?;
        if version != CKPT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: unsupported checkpoint version {version}",
                path.display()
            )));
        }
        let count = read_u32(&mut r, path, "entry count")?;
        let mut store = ParameterStore::new();
        for _ in 0..count {
            let name_len = read_u32(&mut r, path, "name length")? as usize;
            let mut name_bytes = vec![0u8; name_len];
            read_exact(&mut r, &mut name_bytes, path, "name")?;
            let name = String::from_utf8(name_bytes).map_err(|_| {
                Error::Checkpoint(format!("{}: parameter name is not UTF-8", path.display()))
            })?;
            let ndim = read_u32(&mut r, path, "rank")? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                let mut buf = [0u8; 8];
                read_exact(&mut r, &mut buf, path, "dimension")?;
                shape.push(u64::from_le_bytes(buf) as usize);
            }
            let len: usize = shape.iter().product();
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                let mut buf = [0u8; 8];
                read_exact(&mut r, &mut buf, path, "value data")?;
                data.push(f64::from_le_bytes(buf));
            }
            store.insert(&name, Tensor::new(shape, data)?)?;
        }
        Ok(store)
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|_| {
        Error::Checkpoint(format!("{}: truncated while reading {what}", path.display()))
    })
}

fn read_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(r, &mut buf, path, what)?;
    Ok(u32::from_le_bytes(buf))
}
