//! `HDTT` binary time-tag files.
//!
//! All integers little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "HDTT"
//!      4     2  format version (1)
//!      6     8  tick length, femtoseconds
//!     14     4  frame_ticks
//!     18     4  imbalance_ticks
//!     22     8  record count N
//!     30  16*N  records: timestamp u64, channel u8, origin u8, 6 zero bytes
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::config::{Channel, ClockConfig, Origin, TagRecord, TagStream};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HDTT";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 30;
pub const RECORD_LEN: usize = 16;

pub fn encode_header(clock: &ClockConfig, count: u64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(MAGIC);
    h[4..6].copy_from_slice(&VERSION.to_le_bytes());
    h[6..14].copy_from_slice(&clock.tick_fs.to_le_bytes());
    h[14..18].copy_from_slice(&clock.frame_ticks.to_le_bytes());
    h[18..22].copy_from_slice(&clock.imbalance_ticks.to_le_bytes());
    h[22..30].copy_from_slice(&count.to_le_bytes());
    h
}

pub fn encode_record(r: &TagRecord) -> [u8; RECORD_LEN] {
    let mut b = [0u8; RECORD_LEN];
    b[0..8].copy_from_slice(&r.timestamp.to_le_bytes());
    b[8] = r.channel as u8;
    b[9] = r.origin as u8;
    b
}

pub fn write_tags_to<W: Write>(stream: &TagStream, mut w: W) -> Result<()> {
    w.write_all(&encode_header(stream.clock(), stream.len() as u64))?;
    for r in stream.records() {
        w.write_all(&encode_record(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tags(stream: &TagStream, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_tags_to(stream, BufWriter::new(file))
}

pub fn to_bytes(stream: &TagStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * stream.len());
    write_tags_to(stream, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        reason: reason.into(),
    }
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().unwrap())
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().unwrap())
}

pub fn from_bytes(bytes: &[u8]) -> Result<TagStream> {
    if bytes.len() < 4 || &bytes[0..4] != MAGIC {
        return Err(format_err(0, "bad magic"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let clock = ClockConfig {
        tick_fs: le_u64(&bytes[6..14]),
        frame_ticks: le_u32(&bytes[14..18]),
        imbalance_ticks: le_u32(&bytes[18..22]),
    };
    clock.validate().map_err(|e| format_err(6, e.to_string()))?;
    let count = le_u64(&bytes[22..30]);
    let body = &bytes[HEADER_LEN..];
    let expected = count
        .checked_mul(RECORD_LEN as u64)
        .filter(|&n| n <= body.len() as u64)
        .ok_or_else(|| {
            let complete = body.len() / RECORD_LEN;
            format_err(
                HEADER_LEN + complete * RECORD_LEN,
                format!("truncated: header declares {count} records, file holds {complete}"),
            )
        })?;
    if expected < body.len() as u64 {
        return Err(format_err(
            HEADER_LEN + expected as usize,
            "trailing bytes after last record",
        ));
    }

    let mut records = Vec::with_capacity(count as usize);
    let mut prev: Option<(u64, Channel, Origin)> = None;
    for (i, chunk) in body.chunks_exact(RECORD_LEN).enumerate() {
        let offset = HEADER_LEN + i * RECORD_LEN;
        let timestamp = le_u64(&chunk[0..8]);
        let channel = Channel::from_u8(chunk[8])
            .ok_or_else(|| format_err(offset + 8, format!("invalid channel {}", chunk[8])))?;
        let origin = Origin::from_u8(chunk[9])
            .ok_or_else(|| format_err(offset + 9, format!("invalid origin {}", chunk[9])))?;
        if let Some(k) = chunk[10..].iter().position(|&b| b != 0) {
            return Err(format_err(offset + 10 + k, "reserved byte is nonzero"));
        }
        let key = (timestamp, channel, origin);
        if prev.is_some_and(|p| key < p) {
            return Err(format_err(offset, "timestamps not sorted"));
        }
        prev = Some(key);
        records.push(TagRecord {
            timestamp,
            channel,
            origin,
        });
    }
    TagStream::new(clock, records)
}

pub fn read_tags_from<R: Read>(mut r: R) -> Result<TagStream> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

pub fn read_tags(path: impl AsRef<Path>) -> Result<TagStream> {
    from_bytes(&std::fs::read(path)?)
}
