//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `LLCKPT01`, `u32` version, `u32`-prefixed
//! TOML config, `u64` trainer step, `u64` step counts of both optimizers,
//! `u32` tensor count, then per tensor a `u32`-prefixed name, `u32` rank,
//! `u64` dims and `f32` payload. A CRC-32 of everything before it closes the file.

use std::path::Path;

use super::tensor::Scalar;
use super::train::{TrainConfig, Trainer};
use super::NetError;

pub const MAGIC: &[u8; 8] = b"LLCKPT01";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint checksum mismatch (truncated or corrupted)")]
    ChecksumMismatch,
    #[error("checkpoint version {0} is not supported")]
    VersionUnsupported(u32),
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn tensor<T: Scalar>(&mut self, name: &str, dims: &[usize], data: &[T]) {
        self.str(name);
        self.u32(dims.len() as u32);
        for &d in dims {
            self.u64(d as u64);
        }
        for v in data {
            self.0.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| CheckpointError::Format("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn str(&mut self) -> Result<String, CheckpointError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| CheckpointError::Format("non-UTF-8 string".into()))
    }
}

/// Every tensor of a trainer, by name, in a fixed order.
fn collect<T: Scalar>(tr: &mut Trainer<T>) -> Vec<(String, Vec<usize>, Vec<T>)> {
    let mut out = Vec::new();
    let mut nets: Vec<(&str, Vec<(String, Vec<usize>, Vec<T>)>, Vec<(String, Vec<T>)>)> = Vec::new();
    let m_params = tr.mnet.params().into_iter().map(|p| (p.name.clone(), p.value.shape().to_vec(), p.value.data().to_vec())).collect();
    let m_bufs = tr.mnet.buffers().into_iter().map(|(n, b)| (n, b.clone())).collect();
    nets.push(("opt_m", m_params, m_bufs));
    let a_params = tr.anet.params().into_iter().map(|p| (p.name.clone(), p.value.shape().to_vec(), p.value.data().to_vec())).collect();
    let a_bufs = tr.anet.buffers().into_iter().map(|(n, b)| (n, b.clone())).collect();
    nets.push(("opt_a", a_params, a_bufs));
    for (opt_name, params, bufs) in nets {
        let opt = if opt_name == "opt_m" { &tr.opt_m } else { &tr.opt_a };
        for (i, (name, shape, data)) in params.into_iter().enumerate() {
            if let (Some(m), Some(v)) = (opt.m.get(i), opt.v.get(i)) {
                out.push((format!("{opt_name}.m.{name}"), shape.clone(), m.clone()));
                out.push((format!("{opt_name}.v.{name}"), shape.clone(), v.clone()));
            }
            out.push((name, shape, data));
        }
        for (name, b) in bufs {
            let len = b.len();
            out.push((name, vec![len], b));
        }
    }
    out
}

pub fn checkpoint_bytes<T: Scalar>(tr: &mut Trainer<T>) -> Result<Vec<u8>, CheckpointError> {
    let cfg = toml::to_string(&tr.cfg).map_err(|e| CheckpointError::Format(e.to_string()))?;
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.str(&cfg);
    w.u64(tr.step);
    w.u64(tr.opt_m.t);
    w.u64(tr.opt_a.t);
    let tensors = collect(tr);
    w.u32(tensors.len() as u32);
    for (name, dims, data) in &tensors {
        w.tensor(name, dims, data);
    }
    let crc = crc32fast::hash(&w.0);
    w.u32(crc);
    Ok(w.0)
}

pub fn save_checkpoint<T: Scalar>(tr: &mut Trainer<T>, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, checkpoint_bytes(tr)?)?;
    Ok(())
}

pub fn trainer_from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Trainer<T>, CheckpointError> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 8 {
        return Err(CheckpointError::ChecksumMismatch);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(CheckpointError::ChecksumMismatch);
    }
    let mut r = Reader { buf: body, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::VersionUnsupported(version));
    }
    let cfg: TrainConfig = toml::from_str(&r.str()?).map_err(|e| CheckpointError::Format(e.to_string()))?;
    let mut tr = Trainer::<T>::new(cfg)?;
    tr.step = r.u64()?;
    let (tm, ta) = (r.u64()?, r.u64()?);
    let count = r.u32()? as usize;
    let mut stored = std::collections::HashMap::with_capacity(count);
    for _ in 0..count {
        let name = r.str()?;
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let n: usize = dims.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or_else(|| CheckpointError::Format("tensor too large".into()))?)?;
        let data: Vec<T> = raw
            .chunks_exact(4)
            .map(|c| T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        stored.insert(name, (dims, data));
    }
    if r.pos != body.len() {
        return Err(CheckpointError::Format("trailing bytes".into()));
    }

    let mut take = |name: &str, shape: &[usize]| -> Result<Vec<T>, CheckpointError> {
        let (dims, data) = stored.remove(name).ok_or_else(|| CheckpointError::Format(format!("missing tensor {name}")))?;
        if dims != shape {
            return Err(CheckpointError::Format(format!("tensor {name}: shape {dims:?}, expected {shape:?}")));
        }
        Ok(data)
    };

    let mut m_moments = (Vec::new(), Vec::new());
    for p in tr.mnet.params() {
        let shape = p.value.shape().to_vec();
        if tm > 0 {
            m_moments.0.push(take(&format!("opt_m.m.{}", p.name), &shape)?);
            m_moments.1.push(take(&format!("opt_m.v.{}", p.name), &shape)?);
        }
        p.value.data_mut().copy_from_slice(&take(&p.name, &shape)?);
    }
    for (name, b) in tr.mnet.buffers() {
        let len = b.len();
        *b = take(&name, &[len])?;
    }
    let mut a_moments = (Vec::new(), Vec::new());
    for p in tr.anet.params() {
        let shape = p.value.shape().to_vec();
        if ta > 0 {
            a_moments.0.push(take(&format!("opt_a.m.{}", p.name), &shape)?);
            a_moments.1.push(take(&format!("opt_a.v.{}", p.name), &shape)?);
        }
        p.value.data_mut().copy_from_slice(&take(&p.name, &shape)?);
    }
    for (name, b) in tr.anet.buffers() {
        let len = b.len();
        *b = take(&name, &[len])?;
    }
    if let Some(extra) = stored.keys().next() {
        return Err(CheckpointError::Format(format!("unexpected tensor {extra}")));
    }
    tr.opt_m.t = tm;
    (tr.opt_m.m, tr.opt_m.v) = m_moments;
    tr.opt_a.t = ta;
    (tr.opt_a.m, tr.opt_a.v) = a_moments;
    Ok(tr)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Trainer<T>, CheckpointError> {
    trainer_from_bytes(&std::fs::read(path)?)
}
