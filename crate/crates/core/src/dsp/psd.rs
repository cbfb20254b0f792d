//! Welch averaged-periodogram PSD and occupied-bandwidth measurement.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::{fft_in_place, SampleBuffer, SpectrumEstimate};
use crate::error::{Error, Result};

/// Power floor reported for empty bins (dB relative to full scale).
pub const FLOOR_DB: f64 = -300.0;

/// Analysis window applied to each segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Hamming,
    Rectangular,
}

impl Window {
    fn coefficient(self, i: usize, n: usize) -> f64 {
        let x = 2.0 * PI * i as f64 / n as f64;
        match self {
            Window::Hann => 0.5 * (1.0 - x.cos()),
            Window::Hamming => 0.54 - 0.46 * x.cos(),
            Window::Rectangular => 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PsdConfig {
    /// Segment/FFT length, a power of two.
    pub segment_len: usize,
    /// Overlap fraction in [0, 1).
    pub overlap: f64,
    pub window: Window,
}

impl Default for PsdConfig {
    fn default() -> Self {
        Self {
            segment_len: 256,
            overlap: 0.5,
            window: Window::Hann,
        }
    }
}

/// Welch PSD estimate of a complex baseband buffer.
///
/// The spectrum is two-sided and centred on 0 Hz; bin powers are normalized
/// so that their linear sum equals the buffer's mean sample power, and are
/// reported in dB relative to a unit-power full-scale signal.
pub fn psd_estimate(buf: &SampleBuffer, cfg: &PsdConfig) -> Result<SpectrumEstimate> {
    let n = cfg.segment_len;
    if buf.is_empty() {
        return Err(Error::Geometry("psd of empty buffer".into()));
    }
    if !n.is_power_of_two() {
        return Err(Error::Geometry(format!(
            "segment length must be a power of two, got {n}"
        )));
    }
    if n > buf.len() {
        return Err(Error::Geometry(format!(
            "segment length {n} exceeds buffer length {}",
            buf.len()
        )));
    }
    if !(0.0..1.0).contains(&cfg.overlap) {
        return Err(Error::Geometry(format!(
            "overlap must be in [0, 1), got {}",
            cfg.overlap
        )));
    }

    let window: Vec<f64> = (0..n).map(|i| cfg.window.coefficient(i, n)).collect();
    let window_energy: f64 = window.iter().map(|w| w * w).sum();
    let window_sum: f64 = window.iter().sum();

    let hop = ((n as f64 * (1.0 - cfg.overlap)) as usize).max(1);
    let n_segments = (buf.len() - n) / hop + 1;

    let mut accum = vec![0.0f64; n];
    let mut seg = vec![Complex64::new(0.0, 0.0); n];
    for s in 0..n_segments {
        let start = s * hop;
        for i in 0..n {
            seg[i] = buf.samples[start + i] * window[i];
        }
        fft_in_place(&mut seg, false)?;
        for (a, v) in accum.iter_mut().zip(seg.iter()) {
            *a += v.norm_sqr();
        }
    }

    // Bin power normalized so the linear sum equals mean sample power.
    let norm = 1.0 / (n_segments as f64 * n as f64 * window_energy);
    let half = n / 2;
    let df = buf.sample_rate / n as f64;
    let mut bin_freqs = Vec::with_capacity(n);
    let mut power_db = Vec::with_capacity(n);
    for k in 0..n {
        // fftshift: map output index to signed bin.
        let signed = k as isize - half as isize;
        let src = ((signed + n as isize) % n as isize) as usize;
        bin_freqs.push(signed as f64 * df);
        let p = accum[src] * norm;
        power_db.push(if p > 0.0 {
            (10.0 * p.log10()).max(FLOOR_DB)
        } else {
            FLOOR_DB
        });
    }

    Ok(SpectrumEstimate {
        bin_freqs,
        power_db,
        resolution_bw: buf.sample_rate * window_energy / (window_sum * window_sum),
    })
}

/// Width of the smallest contiguous frequency span holding `fraction` of the
/// total power.
pub fn occupied_bandwidth(spectrum: &SpectrumEstimate, fraction: f64) -> Result<f64> {
    if !(0.0 < fraction && fraction < 1.0) {
        return Err(Error::Geometry(format!(
            "power fraction must be in (0, 1), got {fraction}"
        )));
    }
    if spectrum.bin_freqs.len() < 2 {
        return Err(Error::Geometry(
            "occupied bandwidth of a single-bin spectrum is undefined".into(),
        ));
    }

    let linear: Vec<f64> = spectrum
        .power_db
        .iter()
        .map(|db| 10f64.powf(db / 10.0))
        .collect();
    let total: f64 = linear.iter().sum();
    let target = fraction * total;

    // Two-pointer sweep for the shortest window with enough power.
    let mut best = linear.len();
    let mut sum = 0.0;
    let mut lo = 0usize;
    for hi in 0..linear.len() {
        sum += linear[hi];
        while sum - linear[lo] >= target && lo < hi {
            sum -= linear[lo];
            lo += 1;
        }
        if sum >= target {
            best = best.min(hi - lo + 1);
        }
    }
    Ok(best as f64 * spectrum.bin_spacing())
}
