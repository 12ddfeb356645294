//! Binary checkpoint container. Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "SPTMCKPT"
//! version u32      1
//! config  u64 length + UTF-8 JSON of the model config
//! nodes   u64
//! count   u32      number of entries
//! entry*  u8 kind (0 real parameter, 1 complex parameter, 2 buffer)
//!         u32 name length + UTF-8 name
//!         u32 rank + rank × u64 extents
//!         product(extents) × f64 values, row-major
//! ```
//!
//! Complex parameters carry a trailing extent of 2 holding (re, im).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64 as C64;

use super::config::ModelConfig;
use super::state::ModelState;
use crate::autodiff::Param;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SPTMCKPT";
pub const VERSION: u32 = 1;

const KIND_REAL: u8 = 0;
const KIND_COMPLEX: u8 = 1;
const KIND_BUFFER: u8 = 2;

fn write_array<W: Write>(w: &mut W, kind: u8, name: &str, shape: &[usize], values: impl Iterator<Item = f64>) -> Result<()> {
    w.write_all(&[kind])?;
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &e in shape {
        w.write_all(&(e as u64).to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(mut w: W, state: &ModelState) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let config = serde_json::to_vec(&state.config)?;
    w.write_all(&(config.len() as u64).to_le_bytes())?;
    w.write_all(&config)?;
    w.write_all(&(state.nodes as u64).to_le_bytes())?;
    w.write_all(&((state.params.len() + state.buffers.len()) as u32).to_le_bytes())?;
    for (name, p) in &state.params {
        if p.complex {
            let mut shape = p.value.shape().to_vec();
            shape.push(2);
            write_array(&mut w, KIND_COMPLEX, name, &shape, p.value.iter().flat_map(|z| [z.re, z.im]))?;
        } else {
            write_array(&mut w, KIND_REAL, name, p.value.shape(), p.value.iter().map(|z| z.re))?;
        }
    }
    for (name, b) in &state.buffers {
        write_array(&mut w, KIND_BUFFER, name, b.shape(), b.iter().copied())?;
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, state: &ModelState) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, state)?;
    std::fs::write(path, buf)?;
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0; n];
        self.inner.read_exact(&mut buf).map_err(|e| Error::Data(format!("truncated checkpoint: {e}")))?;
        Ok(buf)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
    fn len(&mut self, limit: u64) -> Result<usize> {
        let n = self.u64()?;
        if n > limit {
            return Err(Error::Data(format!("checkpoint length field {n} is implausible")));
        }
        Ok(n as usize)
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.bytes(n)?).map_err(|_| Error::Data("checkpoint name is not UTF-8".into()))
    }
}

const MAX_ELEMENTS: u64 = 1 << 32;

pub fn read_checkpoint<R: Read>(r: R) -> Result<ModelState> {
    let mut r = Reader { inner: r };
    if r.bytes(8)? != MAGIC {
        return Err(Error::Data("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Data(format!("unsupported checkpoint version {version}")));
    }
    let clen = r.len(1 << 24)?;
    let config: ModelConfig = serde_json::from_slice(&r.bytes(clen)?)?;
    let nodes = r.len(MAX_ELEMENTS)?;
    let count = r.u32()?;
    let mut params = BTreeMap::new();
    let mut buffers = BTreeMap::new();
    for _ in 0..count {
        let kind = r.u8()?;
        let name = r.string()?;
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(Error::Data(format!("entry {name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.len(MAX_ELEMENTS)?);
        }
        let total: usize = shape.iter().product();
        if total as u64 > MAX_ELEMENTS {
            return Err(Error::Data(format!("entry {name} is too large")));
        }
        let raw = r.bytes(total * 8)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let array = ArrayD::from_shape_vec(IxDyn(&shape), values).map_err(|e| Error::Data(e.to_string()))?;
        match kind {
            KIND_REAL => {
                params.insert(name, Param::real(array));
            }
            KIND_COMPLEX => {
                if shape.last() != Some(&2) {
                    return Err(Error::Data(format!("complex entry {name} lacks a trailing extent of 2")));
                }
                let re = array.index_axis(Axis(rank - 1), 0).to_owned();
                let im = array.index_axis(Axis(rank - 1), 1);
                let mut z = re.mapv(|v| C64::new(v, 0.0));
                z.zip_mut_with(&im, |a, b| a.im = *b);
                params.insert(name, Param::complex(z));
            }
            KIND_BUFFER => {
                buffers.insert(name, array);
            }
            other => return Err(Error::Data(format!("unknown entry kind {other} for {name}"))),
        }
    }
    let state = ModelState { config, nodes, params, buffers };
    state.validate()?;
    Ok(state)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}
