//! Binary I/Q capture file format.
//!
//! Layout, all little-endian:
//!
//! | bytes  | field                          |
//! |--------|--------------------------------|
//! | 0-7    | magic `IQCAP\0\0\0`            |
//! | 8-11   | version (u32), currently 1     |
//! | 12-19  | sample rate in Hz (f64)        |
//! | 20-27  | centre frequency note (f64)    |
//! | 28-35  | sample count (u64)             |
//! | 36-    | count x (I, Q) pairs, f32 each |

use num_complex::Complex64;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::dsp::SampleBuffer;
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"IQCAP\0\0\0";
pub const VERSION: u32 = 1;
const HEADER_BYTES: usize = 36;

/// An I/Q recording with rate and centre-frequency metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IqCapture {
    pub sample_rate: f64,
    /// Informational: where the baseband was centred, Hz.
    pub center_freq: f64,
    /// Interleaved-on-disk sample pairs.
    pub samples: Vec<(f32, f32)>,
}

impl IqCapture {
    /// Capture a sample buffer, narrowing to f32.
    pub fn from_buffer(buf: &SampleBuffer, center_freq: f64) -> Self {
        Self {
            sample_rate: buf.sample_rate,
            center_freq,
            samples: buf
                .samples
                .iter()
                .map(|s| (s.re as f32, s.im as f32))
                .collect(),
        }
    }

    /// Widen back to a sample buffer.
    pub fn to_buffer(&self) -> SampleBuffer {
        SampleBuffer::new(
            self.samples
                .iter()
                .map(|&(i, q)| Complex64::new(f64::from(i), f64::from(q)))
                .collect(),
            self.sample_rate,
        )
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&self.sample_rate.to_le_bytes())?;
        out.write_all(&self.center_freq.to_le_bytes())?;
        out.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for &(i, q) in &self.samples {
            out.write_all(&i.to_le_bytes())?;
            out.write_all(&q.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut file = BufWriter::new(File::create(path)?);
        self.write(&mut file)?;
        file.flush()?;
        Ok(())
    }

    /// Parse a capture, validating magic, version and payload completeness.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(Error::TruncatedHeader {
                got: bytes.len(),
                needed: HEADER_BYTES,
            });
        }
        if bytes[0..8] != MAGIC {
            let mut found = [0u8; 8];
            found.copy_from_slice(&bytes[0..8]);
            return Err(Error::BadMagic { found });
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let sample_rate = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let center_freq = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let declared = u64::from_le_bytes(bytes[28..36].try_into().unwrap());
        let payload = &bytes[HEADER_BYTES..];
        let actual = (payload.len() / 8) as u64;
        if actual < declared || payload.len() % 8 != 0 {
            return Err(Error::TruncatedPayload {
                offset: bytes.len() as u64,
                declared,
                actual,
            });
        }
        let samples = (0..declared as usize)
            .map(|n| {
                let at = n * 8;
                (
                    f32::from_le_bytes(payload[at..at + 4].try_into().unwrap()),
                    f32::from_le_bytes(payload[at + 4..at + 8].try_into().unwrap()),
                )
            })
            .collect();
        Ok(Self {
            sample_rate,
            center_freq,
            samples,
        })
    }

    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        Self::parse(&bytes)
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read(path)?)
    }
}

/// Write a buffer to a capture file.
pub fn capture_write(buf: &SampleBuffer, center_freq: f64, path: &Path) -> Result<()> {
    IqCapture::from_buffer(buf, center_freq).write_to(path)
}

/// Read a capture file back into a buffer plus its metadata.
pub fn capture_read(path: &Path) -> Result<(SampleBuffer, IqCapture)> {
    let capture = IqCapture::read_from(path)?;
    Ok((capture.to_buffer(), capture))
}
