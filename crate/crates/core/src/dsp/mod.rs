//! Complex-sample containers, FFT, spectral estimation and seeded randomness.

mod fft;
mod psd;
mod rng;

pub use fft::{fft, fft_in_place};
pub use psd::{occupied_bandwidth, psd_estimate, PsdConfig, Window, FLOOR_DB};
pub use rng::RandomSource;

use num_complex::Complex64;
use std::io::Write;

use crate::error::{Error, Result};

/// A finite sequence of complex baseband samples at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBuffer {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
}

impl SampleBuffer {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        assert!(
            sample_rate > 0.0,
            "sample_rate must be positive, got {sample_rate}"
        );
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean per-sample power, `sum |x|^2 / n`.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Averaged-periodogram spectrum on a uniform frequency grid.
#[derive(Debug, Clone)]
pub struct SpectrumEstimate {
    /// Bin centre frequencies in Hz, strictly increasing, uniformly spaced.
    pub bin_freqs: Vec<f64>,
    /// Per-bin power in dB relative to a unit-power full-scale signal.
    pub power_db: Vec<f64>,
    /// Equivalent noise bandwidth of the analysis window, Hz.
    pub resolution_bw: f64,
}

impl SpectrumEstimate {
    /// Frequency spacing between adjacent bins, Hz.
    pub fn bin_spacing(&self) -> f64 {
        if self.bin_freqs.len() < 2 {
            return 0.0;
        }
        self.bin_freqs[1] - self.bin_freqs[0]
    }

    /// Total linear power summed over all bins.
    pub fn total_power(&self) -> f64 {
        self.power_db.iter().map(|db| 10f64.powf(db / 10.0)).sum()
    }

    /// Write as CSV: header `freq_hz,power_db`, one row per bin.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "freq_hz,power_db")?;
        for (f, p) in self.bin_freqs.iter().zip(self.power_db.iter()) {
            writeln!(out, "{f},{p}")?;
        }
        Ok(())
    }
}

/// Dense complex matrix indexed `[symbol k][subcarrier q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Geometry("ragged rows in grid".into()));
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, k: usize, q: usize) -> Complex64 {
        self.data[k * self.cols + q]
    }

    pub fn set(&mut self, k: usize, q: usize, v: Complex64) {
        self.data[k * self.cols + q] = v;
    }

    pub fn row(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.cols..(k + 1) * self.cols]
    }
}
