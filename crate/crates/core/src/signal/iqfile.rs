//! Binary IQ container.
//!
//! Little-endian layout:
//!
//! | offset | size | field                     |
//! |--------|------|---------------------------|
//! | 0      | 4    | magic `IQF1`              |
//! | 4      | 4    | u32 version (= 1)         |
//! | 8      | 8    | u64 sample count N        |
//! | 16     | 8    | f64 sample rate (Hz)      |
//! | 24     | 16N  | N records of (f64 I, f64 Q) |

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use super::IqSignal;
use crate::error::{Error, Result};

pub const IQ_MAGIC: &[u8; 4] = b"IQF1";
pub const IQ_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

pub fn write_iq(signal: &IqSignal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(signal)).map_err(|e| Error::io(path, e))
}

pub fn read_iq(path: impl AsRef<Path>) -> Result<IqSignal> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn encode(signal: &IqSignal) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * signal.len());
    out.extend_from_slice(IQ_MAGIC);
    out.extend_from_slice(&IQ_VERSION.to_le_bytes());
    out.extend_from_slice(&(signal.len() as u64).to_le_bytes());
    out.extend_from_slice(&signal.sample_rate_hz().to_le_bytes());
    for z in signal.samples() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn le_u32(b: &[u8]) -> u32 {
    u32::from_le_bytes(b.try_into().expect("4 bytes"))
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().expect("8 bytes"))
}

fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().expect("8 bytes"))
}

pub(crate) fn decode(bytes: &[u8]) -> Result<IqSignal> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file too short for header ({} of {HEADER_LEN} bytes)", bytes.len()),
        ));
    }
    if &bytes[0..4] != IQ_MAGIC {
        return Err(Error::format(0, "bad magic, expected IQF1"));
    }
    let version = le_u32(&bytes[4..8]);
    if version != IQ_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let count = le_u64(&bytes[8..16]);
    let rate = le_f64(&bytes[16..24]);
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::format(16, format!("invalid sample rate {rate}")));
    }
    if count == 0 {
        return Err(Error::format(8, "sample count is zero"));
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = count.checked_mul(16).filter(|&n| n <= usize::MAX as u64);
    match expected {
        Some(n) if n == payload.len() as u64 => {}
        _ => {
            return Err(Error::format(
                HEADER_LEN as u64 + payload.len() as u64,
                format!(
                    "header declares {count} samples but payload holds {} bytes ({} whole samples)",
                    payload.len(),
                    payload.len() / 16
                ),
            ))
        }
    }
    let samples = payload
        .chunks_exact(16)
        .map(|c| Complex64::new(le_f64(&c[..8]), le_f64(&c[8..])))
        .collect::<Vec<_>>();
    IqSignal::new(samples, rate).map_err(|e| Error::format(HEADER_LEN as u64, e.to_string()))
}
