//! PN-sequence generation and XOR spreading with zero padding.
//!
//! The generator is a Fibonacci LFSR described by its connection polynomial:
//! tap bit `d-1` set means the output delayed by `d` chips feeds back. The
//! default is the 802.16 randomizer, 1 + x^14 + x^15 with an all-ones seed.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Linear-feedback shift register PN source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnGenerator {
    /// Feedback delays as a bit mask (bit d-1 = delay d).
    taps: u32,
    /// Last `degree` output chips; bit d-1 holds the chip d steps back.
    state: u32,
    degree: u32,
}

impl PnGenerator {
    pub fn new(degree: u32, taps: u32, seed: u32) -> Result<Self> {
        assert!(
            (1..=31).contains(&degree),
            "degree must be in 1..=31, got {degree}"
        );
        let mask = (1u32 << degree) - 1;
        assert!(taps & !mask == 0, "tap mask {taps:#x} exceeds degree {degree}");
        if seed & mask == 0 {
            return Err(Error::DegenerateSeed);
        }
        Ok(Self {
            taps,
            state: seed & mask,
            degree,
        })
    }

    /// 802.16 randomizer: x^15 + x^14 + 1, seed all ones.
    pub fn default_scrambler() -> Self {
        Self::new(15, (1 << 14) | (1 << 13), 0x7fff).expect("nonzero seed")
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn state(&self) -> u32 {
        self.state
    }

    /// Next chip: the feedback bit, which also enters the register.
    pub fn next_chip(&mut self) -> u8 {
        let fb = (self.state & self.taps).count_ones() as u8 & 1;
        let mask = (1u32 << self.degree) - 1;
        self.state = ((self.state << 1) | fb as u32) & mask;
        fb
    }

    /// Draw `n` chips, advancing the register.
    pub fn take_chips(&mut self, n: usize) -> Vec<u8> {
        (0..n).map(|_| self.next_chip()).collect()
    }
}

/// A fixed-length chip frame: spread payload bits followed by a zero pad.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipFrame {
    pub chips: Vec<u8>,
    pub chip_rate_hz: f64,
    /// Number of chips before the pad region.
    pub payload_len: usize,
}

/// Default frame length in chips.
pub const DEFAULT_FRAME_LEN: usize = 288;
/// Default chip rate metadata, Hz.
pub const DEFAULT_CHIP_RATE_HZ: f64 = 1000.0;

/// XOR `data` with the next PN chips and zero-pad to `frame_len`.
pub fn spread(data: &[u8], gen: &mut PnGenerator, frame_len: usize) -> Result<ChipFrame> {
    spread_with_rate(data, gen, frame_len, DEFAULT_CHIP_RATE_HZ)
}

pub fn spread_with_rate(
    data: &[u8],
    gen: &mut PnGenerator,
    frame_len: usize,
    chip_rate_hz: f64,
) -> Result<ChipFrame> {
    if data.len() > frame_len {
        return Err(Error::Geometry(format!(
            "data of {} bits exceeds frame length {frame_len}",
            data.len()
        )));
    }
    let mut chips = Vec::with_capacity(frame_len);
    for &bit in data {
        chips.push((bit & 1) ^ gen.next_chip());
    }
    chips.resize(frame_len, 0);
    Ok(ChipFrame {
        chips,
        chip_rate_hz,
        payload_len: data.len(),
    })
}

/// Recover the payload bits of a frame with an identically-seeded generator.
pub fn despread(frame: &ChipFrame, gen: &mut PnGenerator) -> Result<Vec<u8>> {
    if frame.payload_len > frame.chips.len() {
        return Err(Error::Geometry(format!(
            "payload length {} exceeds frame length {}",
            frame.payload_len,
            frame.chips.len()
        )));
    }
    Ok(frame.chips[..frame.payload_len]
        .iter()
        .map(|&c| (c & 1) ^ gen.next_chip())
        .collect())
}

impl ChipFrame {
    /// Fixture text: one line `frame_len payload_len chip_rate_hz`, then the
    /// chips as hex digits (MSB-first nibbles, zero-padded).
    pub fn to_fixture(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{} {} {}",
            self.chips.len(),
            self.payload_len,
            self.chip_rate_hz
        )
        .unwrap();
        for chunk in self.chips.chunks(4) {
            let mut nibble = 0u8;
            for (i, &b) in chunk.iter().enumerate() {
                nibble |= (b & 1) << (3 - i);
            }
            write!(out, "{nibble:x}").unwrap();
        }
        out.push('\n');
        out
    }

    pub fn from_fixture(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Geometry("empty chip fixture".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Geometry(format!(
                "chip fixture header needs 3 fields, got {}",
                fields.len()
            )));
        }
        let frame_len: usize = fields[0]
            .parse()
            .map_err(|e| Error::Geometry(format!("bad frame_len: {e}")))?;
        let payload_len: usize = fields[1]
            .parse()
            .map_err(|e| Error::Geometry(format!("bad payload_len: {e}")))?;
        let chip_rate_hz: f64 = fields[2]
            .parse()
            .map_err(|e| Error::Geometry(format!("bad chip_rate_hz: {e}")))?;
        let hex = lines
            .next()
            .ok_or_else(|| Error::Geometry("chip fixture missing hex line".into()))?;
        let mut chips = Vec::with_capacity(frame_len);
        for ch in hex.trim().chars() {
            let nibble = ch
                .to_digit(16)
                .ok_or_else(|| Error::Geometry(format!("bad hex digit {ch:?}")))?
                as u8;
            for shift in (0..4).rev() {
                chips.push((nibble >> shift) & 1);
            }
        }
        if chips.len() < frame_len {
            return Err(Error::Geometry(format!(
                "chip fixture holds {} chips, header declares {frame_len}",
                chips.len()
            )));
        }
        chips.truncate(frame_len);
        if payload_len > frame_len {
            return Err(Error::Geometry(format!(
                "payload_len {payload_len} exceeds frame_len {frame_len}"
            )));
        }
        Ok(Self {
            chips,
            chip_rate_hz,
            payload_len,
        })
    }
}
