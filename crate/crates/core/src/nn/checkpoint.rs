//! Binary checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "BDNN"
//! 4       2     version (u16) = 1
//! 6       2     layer count L (u16): layers carrying parameters
//! 8       ...   2·L tensors (weight, then bias, per layer in order):
//!                 rank           u8
//!                 extents        rank × u32
//!                 values         Π extents × f64
//! ```
//!
//! A file must end exactly after the last tensor.

use std::io::Write;

use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"BDNN";
pub const VERSION: u16 = 1;

pub fn encode(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let layers = u16::try_from(net.parameterized_layers()).expect("fewer than 65536 layers");
    out.extend_from_slice(&layers.to_le_bytes());
    for t in net.params() {
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save<W: Write>(net: &Network, mut out: W) -> Result<()> {
    out.write_all(&encode(net))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end =
            end.ok_or_else(|| Error::format(format!("checkpoint truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }
}

/// Parse a checkpoint into its parameter tensors.
pub fn decode(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::format("bad checkpoint magic"));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let layers = c.u16()? as usize;
    let mut tensors = Vec::with_capacity(2 * layers);
    for _ in 0..2 * layers {
        let rank = c.u8()? as usize;
        let shape = (0..rank)
            .map(|_| c.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::format("tensor extent overflow"))?;
        let raw = c.take(
            count
                .checked_mul(8)
                .ok_or_else(|| Error::format("tensor too large"))?,
        )?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        tensors.push(Tensor::new(shape, data).map_err(|e| Error::format(e.to_string()))?);
    }
    if c.pos != bytes.len() {
        return Err(Error::format(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    Ok(tensors)
}

/// Load parameters into a network of matching architecture.
pub fn load_into(net: &mut Network, bytes: &[u8]) -> Result<()> {
    net.set_params(decode(bytes)?)
}
