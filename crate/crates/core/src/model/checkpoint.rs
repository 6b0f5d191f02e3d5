//! Binary checkpoint format (little-endian):
//!
//! ```text
//! "RFCK" | version u16
//! variant u8 | base u32 | depth u32 | attention u8 | cond u32 | time_dim u32
//! online section, then EMA section; each is
//!   count u32, then per tensor:
//!   name_len u32 | name bytes | ndim u32 | dims u32×ndim | f64×numel
//! ```
//!
//! An EMA count of zero means the shadow was not tracked.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::config::{ModelConfig, Variant};
use crate::model::params::ParamSet;
use crate::model::ModelState;
use crate::numeric::Tensor;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"RFCK";
pub const VERSION: u16 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("value {v} exceeds u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_section<S: Scalar>(buf: &mut Vec<u8>, set: Option<&ParamSet<S>>) -> Result<()> {
    let Some(set) = set else {
        return put_u32(buf, 0);
    };
    put_u32(buf, set.len())?;
    for (name, t) in set.iter() {
        put_u32(buf, name.len())?;
        buf.extend_from_slice(name.as_bytes());
        put_u32(buf, t.shape().len())?;
        for &d in t.shape() {
            put_u32(buf, d)?;
        }
        for v in t.data() {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    Ok(())
}

pub fn encode<S: Scalar>(state: &ModelState<S>) -> Result<Vec<u8>> {
    let c = &state.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(match c.variant {
        Variant::Lite => 0,
        Variant::Full => 1,
    });
    put_u32(&mut buf, c.base_channels)?;
    put_u32(&mut buf, c.depth)?;
    buf.push(c.use_spatial_attention as u8);
    put_u32(&mut buf, c.cond_channels)?;
    put_u32(&mut buf, c.time_embed_dim)?;
    put_section(&mut buf, Some(&state.params))?;
    put_section(&mut buf, state.ema.as_ref())?;
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!("truncated: needed {n} bytes at offset {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn section<S: Scalar>(&mut self) -> Result<ParamSet<S>> {
        let count = self.u32()?;
        let mut set = ParamSet::new();
        for _ in 0..count {
            let len = self.u32()?;
            let name = std::str::from_utf8(self.take(len)?)
                .map_err(|e| Error::Checkpoint(format!("parameter name is not UTF-8: {e}")))?
                .to_owned();
            let ndim = self.u32()?;
            let shape = (0..ndim).map(|_| self.u32()).collect::<Result<Vec<_>>>()?;
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| self.f64().map(S::lit)).collect::<Result<Vec<_>>>()?;
            set.push(name, Tensor::new(shape, data)?);
        }
        Ok(set)
    }
}

pub fn decode<S: Scalar>(bytes: &[u8]) -> Result<ModelState<S>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let variant = match r.u8()? {
        0 => Variant::Lite,
        1 => Variant::Full,
        v => return Err(Error::Checkpoint(format!("unknown variant tag {v}"))),
    };
    let config = ModelConfig {
        variant,
        base_channels: r.u32()?,
        depth: r.u32()?,
        use_spatial_attention: r.u8()? != 0,
        cond_channels: r.u32()?,
        time_embed_dim: r.u32()?,
    };
    let params = r.section()?;
    let ema = r.section()?;
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let ema = if ema.is_empty() { None } else { Some(ema) };
    ModelState::from_parts(config, params, ema)
}

/// Write via a temporary sibling and rename, so a reader never sees a partial file.
pub fn save<S: Scalar>(state: &ModelState<S>, path: &Path) -> Result<()> {
    let bytes = encode(state)?;
    write_atomic(path, &bytes)
}

pub fn load<S: Scalar>(path: &Path) -> Result<ModelState<S>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| crate::error::load_err(path, e))?;
    decode(&bytes)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
