//! Flat binary parameter container.
//!
//! ```text
//! "RSTPTR1\n"
//! repeated: u32 name_len | name (UTF-8) | u32 rank | u32 dims[rank] | f64 values[prod(dims)]
//! ```
//! All integers and floats are little-endian.

use std::io::Write;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"RSTPTR1\n";

pub fn write_checkpoint<W: Write>(mut out: W, entries: &[(String, Tensor)]) -> Result<()> {
    out.write_all(MAGIC)?;
    for (name, t) in entries {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

pub fn encode_checkpoint(entries: &[(String, Tensor)]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, entries).expect("writing to a Vec cannot fail");
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Checkpoint(format!(
                "truncated {what} at byte {} (need {n}, have {})",
                self.pos,
                self.bytes.len() - self.pos
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let name_len = r.u32("name length")?;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|e| Error::Checkpoint(format!("name is not UTF-8: {e}")))?
            .to_string();
        let rank = r.u32("rank")?;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")?);
        }
        let count = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::Checkpoint(format!("`{name}` is too large")))?;
        let raw = r.take(count, "values")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}
