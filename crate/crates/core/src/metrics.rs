//! Link-quality measurement: BER/SER counting and error vector magnitude.

use num_complex::Complex64;
use std::io::Write;

use crate::error::{Error, Result};

/// Exact bit-error tally between two equal-length streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerCount {
    pub bits_compared: usize,
    pub bit_errors: usize,
    pub ber: f64,
}

/// Hamming distance and ratio between transmitted and received bits.
pub fn ber_count(tx_bits: &[u8], rx_bits: &[u8]) -> Result<BerCount> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::Geometry(format!(
            "bit streams differ in length: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    let bit_errors = tx_bits
        .iter()
        .zip(rx_bits.iter())
        .filter(|(a, b)| (*a & 1) != (*b & 1))
        .count();
    let ber = if tx_bits.is_empty() {
        0.0
    } else {
        bit_errors as f64 / tx_bits.len() as f64
    };
    Ok(BerCount {
        bits_compared: tx_bits.len(),
        bit_errors,
        ber,
    })
}

/// Symbol-error tally: a symbol of `bits_per_symbol` bits errs if any bit does.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerCount {
    pub symbols_compared: usize,
    pub symbol_errors: usize,
    pub ser: f64,
}

pub fn ser_count(tx_bits: &[u8], rx_bits: &[u8], bits_per_symbol: usize) -> Result<SerCount> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::Geometry(format!(
            "bit streams differ in length: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    if bits_per_symbol == 0 {
        return Err(Error::Geometry("bits_per_symbol must be positive".into()));
    }
    let mut symbol_errors = 0usize;
    let mut symbols = 0usize;
    for (a, b) in tx_bits
        .chunks(bits_per_symbol)
        .zip(rx_bits.chunks(bits_per_symbol))
    {
        symbols += 1;
        if a.iter().zip(b.iter()).any(|(x, y)| (x & 1) != (y & 1)) {
            symbol_errors += 1;
        }
    }
    let ser = if symbols == 0 {
        0.0
    } else {
        symbol_errors as f64 / symbols as f64
    };
    Ok(SerCount {
        symbols_compared: symbols,
        symbol_errors,
        ser,
    })
}

/// RMS error vector magnitude in percent, normalized to the reference RMS.
pub fn evm_rms(equalized: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if equalized.is_empty() {
        return Err(Error::Geometry("EVM of empty input".into()));
    }
    if equalized.len() != reference.len() {
        return Err(Error::Geometry(format!(
            "EVM inputs differ in length: {} vs {}",
            equalized.len(),
            reference.len()
        )));
    }
    let err_power: f64 = equalized
        .iter()
        .zip(reference.iter())
        .map(|(e, r)| (e - r).norm_sqr())
        .sum();
    let ref_power: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    if ref_power == 0.0 {
        return Err(Error::Geometry("EVM reference has zero power".into()));
    }
    Ok(100.0 * (err_power / ref_power).sqrt())
}

/// Per-run link quality summary and config echo.
#[derive(Debug, Clone)]
pub struct LinkReport {
    pub seed: u64,
    pub ebn0_db: Option<f64>,
    pub bits_compared: usize,
    pub bit_errors: usize,
    pub ber: f64,
    pub symbol_errors: usize,
    pub ser: f64,
    pub evm_rms_percent: f64,
    pub pdus_sent: usize,
    pub pdus_ok: usize,
    pub erasures: usize,
    /// Resolved run configuration, echoed verbatim.
    pub config_echo: String,
}

impl LinkReport {
    /// Gray-mapped QPSK keeps SER between BER and 2*BER.
    pub fn ber_ser_consistent(&self) -> bool {
        let tol = 1e-12;
        self.ser + tol >= self.ber && self.ser <= 2.0 * self.ber + tol
    }

    /// Flat `key = value` block followed by the config echo.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "seed = {}", self.seed)?;
        match self.ebn0_db {
            Some(db) => writeln!(out, "ebn0_db = {db}")?,
            None => writeln!(out, "ebn0_db = none")?,
        }
        writeln!(out, "bits_compared = {}", self.bits_compared)?;
        writeln!(out, "bit_errors = {}", self.bit_errors)?;
        writeln!(out, "ber = {:e}", self.ber)?;
        writeln!(out, "symbol_errors = {}", self.symbol_errors)?;
        writeln!(out, "ser = {:e}", self.ser)?;
        writeln!(out, "evm_rms_percent = {}", self.evm_rms_percent)?;
        writeln!(out, "pdus_sent = {}", self.pdus_sent)?;
        writeln!(out, "pdus_ok = {}", self.pdus_ok)?;
        writeln!(out, "erasures = {}", self.erasures)?;
        writeln!(out)?;
        writeln!(out, "# resolved configuration")?;
        for line in self.config_echo.lines() {
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn csv_header() -> &'static str {
        "seed,ebn0_db,bits,bit_errors,ber,ser,evm_rms_percent,pdus_sent,pdus_ok,erasures"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:e},{:e},{},{},{},{}",
            self.seed,
            self.ebn0_db.map_or("none".to_string(), |v| v.to_string()),
            self.bits_compared,
            self.bit_errors,
            self.ber,
            self.ser,
            self.evm_rms_percent,
            self.pdus_sent,
            self.pdus_ok,
            self.erasures
        )
    }
}
