//! Mask encodings used by ground-truth files.
//!
//! RLE text is row-major `value:length` runs separated by commas. Values
//! alternate and the first run has value 0 (its length may be zero).
//! The bitmap form is base64 of row-major bits packed most significant bit first.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaskCodecError {
    Syntax(String),
    LengthMismatch { expected: usize, found: usize },
}

impl std::fmt::Display for MaskCodecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Syntax(msg) => f.write_str(msg),
            Self::LengthMismatch { expected, found } => write!(f, "decodes to {found} pixels, image has {expected}"),
        }
    }
}

/// Decodes RLE text into exactly `len` bits.
pub fn decode_rle(text: &str, len: usize) -> Result<Vec<bool>, MaskCodecError> {
    let mut bits = Vec::with_capacity(len);
    let mut found = 0usize;
    let text = text.trim();
    if text.is_empty() {
        return if len == 0 { Ok(bits) } else { Err(MaskCodecError::LengthMismatch { expected: len, found: 0 }) };
    }
    for (i, run) in text.split(',').enumerate() {
        let (value, count) = run
            .trim()
            .split_once(':')
            .ok_or_else(|| MaskCodecError::Syntax(format!("run {i} `{run}` is not value:length")))?;
        let value: u8 = value.trim().parse().map_err(|_| MaskCodecError::Syntax(format!("run {i}: bad value `{value}`")))?;
        let count: usize = count.trim().parse().map_err(|_| MaskCodecError::Syntax(format!("run {i}: bad length `{count}`")))?;
        if usize::from(value) != i % 2 {
            return Err(MaskCodecError::Syntax(format!("run {i} has value {value}, expected {}", i % 2)));
        }
        found = found.saturating_add(count);
        if found <= len {
            bits.resize(found, value == 1);
        }
    }
    if found != len {
        return Err(MaskCodecError::LengthMismatch { expected: len, found });
    }
    Ok(bits)
}

/// Encodes bits as RLE text; inverse of [`decode_rle`].
pub fn encode_rle(bits: impl IntoIterator<Item = bool>) -> String {
    let mut runs: Vec<usize> = vec![0];
    let mut current = false;
    for b in bits {
        if b != current {
            runs.push(0);
            current = b;
        }
        *runs.last_mut().unwrap() += 1;
    }
    runs.iter().enumerate().map(|(i, n)| format!("{}:{n}", i % 2)).collect::<Vec<_>>().join(",")
}

pub fn decode_bitmap(text: &str, len: usize) -> Result<Vec<bool>, MaskCodecError> {
    let bytes = STANDARD.decode(text.trim()).map_err(|e| MaskCodecError::Syntax(format!("bitmap: {e}")))?;
    let expected_bytes = len.div_ceil(8);
    if bytes.len() != expected_bytes {
        return Err(MaskCodecError::LengthMismatch { expected: len, found: bytes.len() * 8 });
    }
    Ok((0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect())
}

pub fn encode_bitmap(bits: &[bool]) -> String {
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
        bytes[i / 8] |= 0x80 >> (i % 8);
    }
    STANDARD.encode(bytes)
}
