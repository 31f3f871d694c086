//! Binary descriptor container.
//!
//! ```text
//! magic            4 octets  "HBDC"
//! version          u32 LE    1
//! descriptor_bits  u32 LE
//! descriptor_count u64 LE
//! group_count      u64 LE
//! payload          descriptor_count * descriptor_bits / 8 octets
//! group table      group_count * u64 LE exclusive end offsets
//! ```

use std::fs;
use std::path::Path;

use crate::descriptor::{BinaryDescriptor, DescriptorSet};
use crate::error::{FormatError, Result};

const MAGIC: [u8; 4] = *b"HBDC";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

pub fn encode_descriptors(set: &DescriptorSet) -> Vec<u8> {
    let octets = set.bits() / 8;
    let mut out = Vec::with_capacity(HEADER_LEN + set.len() * octets + set.group_ends().len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(set.bits() as u32).to_le_bytes());
    out.extend_from_slice(&(set.len() as u64).to_le_bytes());
    out.extend_from_slice(&(set.group_ends().len() as u64).to_le_bytes());
    for d in set.descriptors() {
        out.extend_from_slice(d.as_bytes());
    }
    for &end in set.group_ends() {
        out.extend_from_slice(&(end as u64).to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], FormatError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(FormatError::Truncated { field })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }

    fn u64(&mut self, field: &'static str) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8, field)?.try_into().unwrap()))
    }
}

pub fn decode_descriptors(bytes: &[u8]) -> Result<DescriptorSet> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic).into());
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let bits = r.u32("descriptor_bits")?;
    if bits == 0 || bits % 8 != 0 {
        return Err(FormatError::BadDescriptorBits(bits).into());
    }
    let count = r.u64("descriptor_count")?;
    let group_count = r.u64("group_count")?;
    let octets = bits as usize / 8;
    let payload_len = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(octets))
        .ok_or(FormatError::Truncated { field: "payload" })?;
    let payload = r.take(payload_len, "payload")?;
    let table_len = usize::try_from(group_count)
        .ok()
        .and_then(|g| g.checked_mul(8))
        .ok_or(FormatError::Truncated {
            field: "group table",
        })?;
    let table = r.take(table_len, "group table")?;
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - r.pos).into());
    }
    let descriptors: Vec<_> = payload
        .chunks_exact(octets)
        .map(BinaryDescriptor::from_bytes)
        .collect();
    let mut ends = Vec::with_capacity(group_count as usize);
    let mut prev = 0u64;
    for (i, chunk) in table.chunks_exact(8).enumerate() {
        let end = u64::from_le_bytes(chunk.try_into().unwrap());
        if end < prev || end > count {
            return Err(FormatError::Inconsistent {
                field: "group table",
                detail: format!("offset {i} = {end} (previous {prev}, descriptor_count {count})"),
            }
            .into());
        }
        prev = end;
        ends.push(end as usize);
    }
    if group_count > 0 && prev != count {
        return Err(FormatError::Inconsistent {
            field: "group table",
            detail: format!("last offset {prev} != descriptor_count {count}"),
        }
        .into());
    }
    DescriptorSet::new(bits as usize, descriptors, ends)
}

pub fn write_descriptors(path: &Path, set: &DescriptorSet) -> Result<()> {
    super::write_atomic(path, &encode_descriptors(set))
}

pub fn read_descriptors(path: &Path) -> Result<DescriptorSet> {
    decode_descriptors(&fs::read(path)?)
}
