//! Byte-level packet and container framing.
//!
//! A coded packet travels as a small header plus the packed coefficient
//! vector and the payload:
//!
//! ```text
//! gen_id: u16 BE | n: u16 BE | f: u8 | coeffs: ceil(n*f/8) bytes | payload
//! ```
//!
//! Coefficients are packed MSB-first, f bits each; pad bits in the final
//! byte must be zero. The file container prefixes a 20-byte header
//!
//! ```text
//! "RLNC" | version: u8 | f: u8 | n: u16 BE | fragment_size: u32 BE | original_len: u64 BE
//! ```
//!
//! followed by packet records back to back. All records in a file share
//! n, f, and fragment_size, so every record has the same size and a file
//! with whole records removed still parses; the redundant per-packet n
//! and f keep each record meaningful on its own.

use super::{CodedPacket, CodecError};
use crate::gf::Symbol;
use std::io::{Read, Write};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"RLNC";
pub const VERSION: u8 = 1;
pub const FILE_HEADER_LEN: usize = 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("malformed data at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(offset: usize, reason: impl Into<String>) -> WireError {
    WireError::Malformed { offset, reason: reason.into() }
}

/// Bytes needed for `n` coefficients of `f` bits each.
pub fn packed_len(n: usize, f: u8) -> usize {
    (n * f as usize + 7) / 8
}

/// Packs symbols MSB-first into `f`-bit slots.
pub fn pack_symbols(coeffs: &[Symbol], f: u8) -> Vec<u8> {
    debug_assert!((1..=16).contains(&f));
    let mut out = Vec::with_capacity(packed_len(coeffs.len(), f));
    let mut acc: u32 = 0;
    let mut bits: u32 = 0;
    for &c in coeffs {
        debug_assert!(u32::from(c) < (1u32 << f));
        acc = (acc << f) | u32::from(c);
        bits += u32::from(f);
        while bits >= 8 {
            bits -= 8;
            out.push((acc >> bits) as u8);
        }
    }
    if bits > 0 {
        out.push((acc << (8 - bits)) as u8);
    }
    out
}

/// Inverse of [`pack_symbols`]. `base` is the position of `bytes[0]` in the
/// enclosing buffer and only shifts reported error offsets. Rejects length
/// mismatches and nonzero pad bits.
pub fn unpack_symbols(bytes: &[u8], n: usize, f: u8, base: usize) -> Result<Vec<Symbol>, WireError> {
    let want = packed_len(n, f);
    if bytes.len() != want {
        return Err(malformed(
            base,
            format!("coefficient block is {} bytes, expected {want}", bytes.len()),
        ));
    }
    let mut out = Vec::with_capacity(n);
    let mut acc: u32 = 0;
    let mut bits: u32 = 0;
    let mut iter = bytes.iter();
    for _ in 0..n {
        while bits < u32::from(f) {
            acc = (acc << 8) | u32::from(*iter.next().expect("length checked above"));
            bits += 8;
        }
        bits -= u32::from(f);
        out.push((acc >> bits) as u16 & ((1u32 << f) - 1) as u16);
    }
    if bits > 0 && (acc & ((1u32 << bits) - 1)) != 0 {
        return Err(malformed(base + want - 1, "nonzero pad bits after last coefficient"));
    }
    Ok(out)
}

/// Serializes one packet. Packet size is `5 + packed_len(n, f) +
/// payload.len()`; the payload length is not framed here and must be known
/// to the reader (the file container fixes it per file).
pub fn packet_to_bytes(pkt: &CodedPacket, f: u8) -> Vec<u8> {
    let n = u16::try_from(pkt.coeffs.len()).expect("coefficient count fits the header");
    let mut out = Vec::with_capacity(5 + packed_len(pkt.coeffs.len(), f) + pkt.payload.len());
    out.extend_from_slice(&pkt.gen_id.to_be_bytes());
    out.extend_from_slice(&n.to_be_bytes());
    out.push(f);
    out.extend_from_slice(&pack_symbols(&pkt.coeffs, f));
    out.extend_from_slice(&pkt.payload);
    out
}

/// Parses one packet from `buf`, which must hold exactly one record; the
/// payload is everything after the coefficient block. `base` shifts error
/// offsets to the enclosing buffer.
pub fn packet_from_bytes(buf: &[u8], base: usize) -> Result<CodedPacket, WireError> {
    if buf.len() < 5 {
        return Err(malformed(base, format!("packet record is {} bytes, header needs 5", buf.len())));
    }
    let gen_id = u16::from_be_bytes([buf[0], buf[1]]);
    let n = u16::from_be_bytes([buf[2], buf[3]]);
    let f = buf[4];
    if n == 0 {
        return Err(malformed(base + 2, "packet declares zero coefficients"));
    }
    if !(1..=16).contains(&f) {
        return Err(malformed(base + 4, format!("symbol width {f} outside 1..=16")));
    }
    let clen = packed_len(n as usize, f);
    if buf.len() < 5 + clen {
        return Err(malformed(
            base + 5,
            format!("record too short for {n} coefficients of {f} bits"),
        ));
    }
    let coeffs = unpack_symbols(&buf[5..5 + clen], n as usize, f, base + 5)?;
    Ok(CodedPacket { gen_id, coeffs, payload: buf[5 + clen..].to_vec() })
}

/// File-level coding metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileHeader {
    pub f: u8,
    pub n: u16,
    pub fragment_size: u32,
    pub original_len: u64,
}

impl FileHeader {
    pub fn record_len(&self) -> usize {
        5 + packed_len(self.n as usize, self.f) + self.fragment_size as usize
    }

    pub fn to_bytes(&self) -> [u8; FILE_HEADER_LEN] {
        let mut out = [0u8; FILE_HEADER_LEN];
        out[0..4].copy_from_slice(&MAGIC);
        out[4] = VERSION;
        out[5] = self.f;
        out[6..8].copy_from_slice(&self.n.to_be_bytes());
        out[8..12].copy_from_slice(&self.fragment_size.to_be_bytes());
        out[12..20].copy_from_slice(&self.original_len.to_be_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<FileHeader, WireError> {
        if buf.len() < FILE_HEADER_LEN {
            return Err(malformed(0, format!("file is {} bytes, header needs {FILE_HEADER_LEN}", buf.len())));
        }
        if buf[0..4] != MAGIC {
            return Err(malformed(0, "bad magic, expected \"RLNC\""));
        }
        if buf[4] != VERSION {
            return Err(malformed(4, format!("unsupported container version {}", buf[4])));
        }
        let f = buf[5];
        if !(1..=16).contains(&f) {
            return Err(malformed(5, format!("symbol width {f} outside 1..=16")));
        }
        let n = u16::from_be_bytes([buf[6], buf[7]]);
        if n == 0 {
            return Err(malformed(6, "header declares n=0"));
        }
        let fragment_size = u32::from_be_bytes([buf[8], buf[9], buf[10], buf[11]]);
        if fragment_size == 0 {
            return Err(malformed(8, "header declares fragment_size=0"));
        }
        let original_len = u64::from_be_bytes(buf[12..20].try_into().expect("length checked"));
        if original_len == 0 {
            return Err(malformed(12, "header declares an empty original file"));
        }
        Ok(FileHeader { f, n, fragment_size, original_len })
    }
}

/// Writes header and packets as one container stream.
pub fn write_file<W: Write>(
    w: &mut W,
    header: &FileHeader,
    packets: &[CodedPacket],
) -> Result<(), WireError> {
    w.write_all(&header.to_bytes())?;
    for pkt in packets {
        let bytes = packet_to_bytes(pkt, header.f);
        if bytes.len() != header.record_len() {
            return Err(malformed(
                0,
                format!(
                    "packet for generation {} serializes to {} bytes, header fixes records at {}",
                    pkt.gen_id,
                    bytes.len(),
                    header.record_len()
                ),
            ));
        }
        w.write_all(&bytes)?;
    }
    Ok(())
}

/// Reads a whole container. Every record must agree with the header;
/// missing records are fine (fewer packets come back), but a trailing
/// partial record is reported with its offset.
pub fn read_file<R: Read>(r: &mut R) -> Result<(FileHeader, Vec<CodedPacket>), WireError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let header = FileHeader::from_bytes(&buf)?;
    let rec = header.record_len();
    let body = &buf[FILE_HEADER_LEN..];
    if body.len() % rec != 0 {
        let tail = FILE_HEADER_LEN + body.len() - body.len() % rec;
        return Err(malformed(tail, format!("trailing partial record of {} bytes", body.len() % rec)));
    }
    let mut packets = Vec::with_capacity(body.len() / rec);
    for (i, chunk) in body.chunks_exact(rec).enumerate() {
        let base = FILE_HEADER_LEN + i * rec;
        let n = u16::from_be_bytes([chunk[2], chunk[3]]);
        if n != header.n {
            return Err(malformed(
                base + 2,
                format!("record declares n={n}, header fixes n={}", header.n),
            ));
        }
        if chunk[4] != header.f {
            return Err(malformed(
                base + 4,
                format!("record declares f={}, header fixes f={}", chunk[4], header.f),
            ));
        }
        packets.push(packet_from_bytes(chunk, base)?);
    }
    Ok((header, packets))
}

/// Bridges wire errors into the codec error space for callers that do not
/// care which layer failed.
impl From<WireError> for CodecError {
    fn from(e: WireError) -> CodecError {
        CodecError::ShapeMismatch(e.to_string())
    }
}
