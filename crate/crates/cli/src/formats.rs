//! Binary file formats. All integers are little-endian.
//!
//! ```text
//! codes     "HCOD" 0x01 | u32 N | u32 Q    | N × ⌈Q/8⌉ bytes, bit q in bit q%8 of byte q/8
//! labels    "HLBL" 0x01 | u32 N            | N × u32 class id
//! features  "HFEA" 0x01 | u32 rows | u32 dim | rows × dim × f32 (IEEE-754)
//! ```

use std::fs;
use std::path::Path;

use hashlookup_core::{BinaryCode, CodeSet, FeatureMatrix, Labels, MAX_CODE_LEN};

use crate::CliError;

pub const CODE_MAGIC: &[u8; 4] = b"HCOD";
pub const LABEL_MAGIC: &[u8; 4] = b"HLBL";
pub const FEATURE_MAGIC: &[u8; 4] = b"HFEA";
pub const VERSION: u8 = 1;

fn format_err(path: &Path, msg: impl Into<String>) -> CliError {
    CliError::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Header<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn open(path: &'a Path, bytes: &'a [u8], magic: &[u8; 4]) -> Result<Self, CliError> {
        if bytes.len() < 5 {
            return Err(format_err(path, format!("truncated header: {} bytes", bytes.len())));
        }
        if &bytes[..4] != magic {
            return Err(format_err(
                path,
                format!(
                    "bad magic: expected {:?}, found {:?}",
                    String::from_utf8_lossy(magic),
                    String::from_utf8_lossy(&bytes[..4])
                ),
            ));
        }
        if bytes[4] != VERSION {
            return Err(format_err(
                path,
                format!("unsupported version: {} (expected {VERSION})", bytes[4]),
            ));
        }
        Ok(Self { path, bytes, pos: 5 })
    }

    fn u32(&mut self, field: &str) -> Result<usize, CliError> {
        let raw = self
            .bytes
            .get(self.pos..self.pos + 4)
            .ok_or_else(|| format_err(self.path, format!("truncated header: missing field {field}")))?;
        self.pos += 4;
        Ok(u32::from_le_bytes(raw.try_into().expect("4 bytes")) as usize)
    }

    fn body(&self, expected: usize, fields: &str) -> Result<&'a [u8], CliError> {
        let body = &self.bytes[self.pos..];
        if body.len() != expected {
            return Err(format_err(
                self.path,
                format!(
                    "file length {} does not match header ({fields}): expected {}",
                    self.bytes.len(),
                    self.pos + expected
                ),
            ));
        }
        Ok(body)
    }
}

fn as_u32(path: &Path, field: &str, v: usize) -> Result<[u8; 4], CliError> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| format_err(path, format!("{field} = {v} does not fit in u32")))
}

pub fn code_to_bytes(code: &BinaryCode, out: &mut Vec<u8>) {
    let n_bytes = code.len().div_ceil(8);
    out.extend(
        (0..n_bytes).map(|b| (code.words()[b / 8] >> (8 * (b % 8))) as u8),
    );
}

pub fn code_from_bytes(bytes: &[u8], len: usize) -> Option<BinaryCode> {
    let mut words = vec![0u64; len.div_ceil(64)];
    for (b, &byte) in bytes.iter().enumerate() {
        words[b / 8] |= u64::from(byte) << (8 * (b % 8));
    }
    BinaryCode::from_words(words, len).ok()
}

pub fn encode_codes(path: &Path, codes: &CodeSet) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::with_capacity(13 + codes.len() * codes.code_len().div_ceil(8));
    out.extend_from_slice(CODE_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&as_u32(path, "N", codes.len())?);
    out.extend_from_slice(&as_u32(path, "Q", codes.code_len())?);
    for code in codes.iter() {
        code_to_bytes(code, &mut out);
    }
    Ok(out)
}

pub fn decode_codes(path: &Path, bytes: &[u8]) -> Result<CodeSet, CliError> {
    let mut h = Header::open(path, bytes, CODE_MAGIC)?;
    let n = h.u32("N")?;
    let q = h.u32("Q")?;
    if n == 0 {
        return Err(format_err(path, "header field N is 0; a code file needs at least one code"));
    }
    if q == 0 || q > MAX_CODE_LEN {
        return Err(format_err(
            path,
            format!("header field Q = {q} outside 1..={MAX_CODE_LEN}"),
        ));
    }
    let record = q.div_ceil(8);
    let body = h.body(n * record, "N, Q")?;
    let codes = body
        .chunks_exact(record)
        .enumerate()
        .map(|(i, chunk)| {
            code_from_bytes(chunk, q)
                .ok_or_else(|| format_err(path, format!("record {i}: padding bits past Q = {q} are set")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CodeSet::new(q, codes)?)
}

pub fn read_codes(path: &Path) -> Result<CodeSet, CliError> {
    decode_codes(path, &read(path)?)
}

pub fn write_codes(path: &Path, codes: &CodeSet) -> Result<(), CliError> {
    write(path, &encode_codes(path, codes)?)
}

pub fn encode_labels(path: &Path, labels: &Labels) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::with_capacity(9 + 4 * labels.len());
    out.extend_from_slice(LABEL_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&as_u32(path, "N", labels.len())?);
    for &l in labels.as_slice() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_labels(path: &Path, bytes: &[u8]) -> Result<Labels, CliError> {
    let mut h = Header::open(path, bytes, LABEL_MAGIC)?;
    let n = h.u32("N")?;
    let body = h.body(4 * n, "N")?;
    Ok(Labels::new(
        body.chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect(),
    ))
}

pub fn read_labels(path: &Path) -> Result<Labels, CliError> {
    decode_labels(path, &read(path)?)
}

pub fn write_labels(path: &Path, labels: &Labels) -> Result<(), CliError> {
    write(path, &encode_labels(path, labels)?)
}

pub fn encode_features(path: &Path, feats: &FeatureMatrix) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::with_capacity(13 + 4 * feats.values().len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&as_u32(path, "rows", feats.rows())?);
    out.extend_from_slice(&as_u32(path, "dim", feats.dim())?);
    for v in feats.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_features(path: &Path, bytes: &[u8]) -> Result<FeatureMatrix, CliError> {
    let mut h = Header::open(path, bytes, FEATURE_MAGIC)?;
    let rows = h.u32("rows")?;
    let dim = h.u32("dim")?;
    if rows == 0 || dim == 0 {
        return Err(format_err(path, format!("header fields rows = {rows}, dim = {dim} must be non-zero")));
    }
    let body = h.body(4 * rows * dim, "rows, dim")?;
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    Ok(FeatureMatrix::new(rows, dim, values)?)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix, CliError> {
    decode_features(path, &read(path)?)
}

pub fn write_features(path: &Path, feats: &FeatureMatrix) -> Result<(), CliError> {
    write(path, &encode_features(path, feats)?)
}
