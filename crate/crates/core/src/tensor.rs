//! `PSTN1` tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"PSTN1" | rank: u32 | dims: rank × u32 | dtype: u8 | payload (row-major)
//! ```
//!
//! dtype tags: 0 = u8, 1 = f32, 2 = f64. Float payloads are stored as their
//! raw IEEE bits, so round-trips are bit-exact (NaN payloads included).

use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::ChannelStack;

pub const MAGIC: &[u8; 5] = b"PSTN1";

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    U8(Vec<u8>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::U8(v) => v.len(),
            TensorData::F32(v) => v.len(),
            TensorData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn tag(&self) -> u8 {
        match self {
            TensorData::U8(_) => 0,
            TensorData::F32(_) => 1,
            TensorData::F64(_) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<u32>,
    data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: TensorData) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::Container {
                offset: 0,
                msg: "rank must be at least 1".into(),
            });
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(Error::Container {
                offset: 0,
                msg: format!("dimension {i} is zero"),
            });
        }
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
        if n != Some(data.len()) {
            return Err(Error::Container {
                offset: 0,
                msg: format!("dims {dims:?} do not match {} elements", data.len()),
            });
        }
        Ok(Tensor { dims, data })
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &TensorData {
        &self.data
    }

    /// Bit-level equality (distinguishes NaN payloads and signed zeros).
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        self.dims == other.dims && self.encode() == other.encode()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + 4 * self.dims.len() + 8 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.push(self.data.tag());
        match &self.data {
            TensorData::U8(v) => out.extend_from_slice(v),
            TensorData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_bits().to_le_bytes())),
            TensorData::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_bits().to_le_bytes())),
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(5, "magic")?;
        if magic != MAGIC {
            return Err(Error::Container {
                offset: 0,
                msg: format!("bad magic {magic:?}"),
            });
        }
        let rank_at = r.pos;
        let rank = r.u32("rank")?;
        if rank == 0 {
            return Err(r.err_at(rank_at, "rank must be at least 1"));
        }
        let mut dims = Vec::with_capacity(rank.min(64) as usize);
        for i in 0..rank {
            let at = r.pos;
            let d = r.u32("dimension")?;
            if d == 0 {
                return Err(r.err_at(at, &format!("dimension {i} is zero")));
            }
            dims.push(d);
        }
        let n = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
            .ok_or_else(|| r.err_at(rank_at, "element count overflows"))?;
        let tag_at = r.pos;
        let tag = r.take(1, "dtype")?[0];
        let width = match tag {
            0 => 1,
            1 => 4,
            2 => 8,
            t => return Err(r.err_at(tag_at, &format!("unknown dtype tag {t}"))),
        };
        let payload_len = n
            .checked_mul(width)
            .ok_or_else(|| r.err_at(tag_at, "payload size overflows"))?;
        let payload = r.take(payload_len, "payload")?;
        if r.pos != bytes.len() {
            return Err(r.err_at(r.pos, &format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        let data = match tag {
            0 => TensorData::U8(payload.to_vec()),
            1 => TensorData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
                    .collect(),
            ),
            _ => TensorData::F64(
                payload
                    .chunks_exact(8)
                    .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
                    .collect(),
            ),
        };
        Ok(Tensor { dims, data })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err_at(&self, offset: usize, msg: &str) -> Error {
        Error::Container {
            offset: offset as u64,
            msg: msg.to_string(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(self.err_at(
                self.bytes.len(),
                &format!("truncated {what}: need {n} bytes at {}", self.pos),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    std::fs::write(path, t.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::decode(&bytes).map_err(|e| match e {
        Error::Container { offset, msg } => Error::Container {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        e => e,
    })
}

impl From<&ChannelStack> for Tensor {
    fn from(s: &ChannelStack) -> Self {
        Tensor::new(
            vec![s.channels() as u32, s.height(), s.width()],
            TensorData::U8(s.data().to_vec()),
        )
        .expect("stack dims are positive")
    }
}

impl TryFrom<Tensor> for ChannelStack {
    type Error = Error;

    fn try_from(t: Tensor) -> Result<Self> {
        match (t.dims.as_slice(), t.data) {
            (&[c, h, w], TensorData::U8(data)) => ChannelStack::from_vec(c as usize, w, h, data),
            (dims, _) => Err(Error::Schema(format!(
                "expected a rank-3 u8 tensor, found dims {dims:?}"
            ))),
        }
    }
}
