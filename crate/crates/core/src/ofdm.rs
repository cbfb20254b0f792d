//! QPSK mapping, subcarrier packing, OFDM synthesis and demodulation.
//!
//! Subcarrier layout follows the 256-point OFDM profile: 200 used bins at
//! DC-centred indices -100..=100 (DC excluded), of which 8 are BPSK pilots at
//! {-88,-63,-38,-13,13,38,63,88} and 192 carry data; the remaining bins are
//! guard nulls. Synthesis is the inverse FFT (1/N convention) with the last
//! `guard_len` samples copied in front as a cyclic prefix.

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use crate::dsp::{fft, ComplexGrid, SampleBuffer};
use crate::error::{Error, Result};
use crate::par;
use crate::spreading::PnGenerator;

/// OFDM frame geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    /// FFT size, a power of two.
    pub n_fft: usize,
    /// Number of data subcarriers.
    pub n_data: usize,
    /// Pilot subcarrier indices, DC-centred (negative = upper FFT bins).
    pub pilot_indices: Vec<i32>,
    /// Cyclic prefix length in samples.
    pub guard_len: usize,
    /// Sample rate in Hz.
    pub sample_rate: f64,
    /// Modulate pilots with a per-symbol +-1 PRBS instead of fixed +1.
    pub pilot_prbs: bool,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            n_fft: 256,
            n_data: 192,
            pilot_indices: vec![-88, -63, -38, -13, 13, 38, 63, 88],
            guard_len: 64,
            sample_rate: 2.24e6,
            pilot_prbs: false,
        }
    }
}

impl FrameConfig {
    pub fn n_pilots(&self) -> usize {
        self.pilot_indices.len()
    }

    /// Used (data + pilot) subcarrier count.
    pub fn n_used(&self) -> usize {
        self.n_data + self.n_pilots()
    }

    /// Half-width of the used band: used indices are -half..=half without DC.
    pub fn used_half_span(&self) -> i32 {
        (self.n_used() / 2) as i32
    }

    /// OFDM symbol length in samples, prefix included.
    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.guard_len
    }

    /// Useful symbol duration T in seconds.
    pub fn symbol_time(&self) -> f64 {
        self.n_fft as f64 / self.sample_rate
    }

    /// Map a DC-centred index to an FFT bin.
    pub fn bin_for_index(&self, idx: i32) -> usize {
        let n = self.n_fft as i32;
        (((idx % n) + n) % n) as usize
    }

    /// Data subcarrier indices in increasing DC-centred order.
    pub fn data_indices(&self) -> Vec<i32> {
        let half = self.used_half_span();
        (-half..=half)
            .filter(|&i| i != 0 && !self.pilot_indices.contains(&i))
            .collect()
    }

    /// Pilot values for symbols `0..n_symbols`; all pilots of a symbol share
    /// one value. Fixed +1 unless `pilot_prbs`, in which case an 11-stage
    /// PRBS (1 + x^9 + x^11, all-ones seed) supplies 1-2w_k.
    pub fn pilot_sequence(&self, n_symbols: usize) -> Vec<f64> {
        if !self.pilot_prbs {
            return vec![1.0; n_symbols];
        }
        let mut gen =
            PnGenerator::new(11, (1 << 10) | (1 << 8), 0x7ff).expect("nonzero seed");
        (0..n_symbols)
            .map(|_| 1.0 - 2.0 * gen.next_chip() as f64)
            .collect()
    }

    /// Pilot value for one symbol index.
    pub fn pilot_value(&self, symbol: usize) -> f64 {
        self.pilot_sequence(symbol + 1)[symbol]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_fft.is_power_of_two() {
            return Err(Error::Geometry(format!(
                "n_fft must be a power of two, got {}",
                self.n_fft
            )));
        }
        if self.sample_rate <= 0.0 {
            return Err(Error::Geometry("sample_rate must be positive".into()));
        }
        if self.guard_len >= self.n_fft {
            return Err(Error::Geometry(format!(
                "guard length {} must be below n_fft {}",
                self.guard_len, self.n_fft
            )));
        }
        if self.n_used() % 2 != 0 || self.n_used() >= self.n_fft {
            return Err(Error::Geometry(format!(
                "used carrier count {} must be even and below n_fft {}",
                self.n_used(),
                self.n_fft
            )));
        }
        let half = self.used_half_span();
        let mut seen = std::collections::HashSet::new();
        for &p in &self.pilot_indices {
            if p == 0 || p.abs() > half {
                return Err(Error::Geometry(format!(
                    "pilot index {p} outside the used band +-{half}"
                )));
            }
            if !seen.insert(p) {
                return Err(Error::Geometry(format!("duplicate pilot index {p}")));
            }
        }
        Ok(())
    }
}

/// One synthesized OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSymbol {
    /// Frequency bins in FFT order (length n_fft).
    pub freq_bins: Vec<Complex64>,
    /// Cyclic prefix followed by the IFFT body (length n_fft + guard_len).
    pub time_samples: Vec<Complex64>,
    /// Symbol index k within its stream.
    pub index: usize,
}

/// Per-symbol, per-subcarrier demodulator outputs with aligned references.
#[derive(Debug, Clone)]
pub struct DemodOutput {
    /// Demodulated grid s[k][q], q an FFT bin index.
    pub s: ComplexGrid,
    /// Transmitted reference grid c[k][q], when the caller knows it.
    pub c: Option<ComplexGrid>,
    /// Channel response per grid point, when known.
    pub h_used: Option<ComplexGrid>,
}

impl DemodOutput {
    pub fn n_symbols(&self) -> usize {
        self.s.rows()
    }

    pub fn with_reference(mut self, c: ComplexGrid) -> Self {
        assert_eq!(c.rows(), self.s.rows());
        assert_eq!(c.cols(), self.s.cols());
        self.c = Some(c);
        self
    }

    pub fn with_channel(mut self, h: ComplexGrid) -> Self {
        assert_eq!(h.rows(), self.s.rows());
        assert_eq!(h.cols(), self.s.cols());
        self.h_used = Some(h);
        self
    }

    /// CSV rows `k,q,re_s,im_s,re_c,im_c` over the used bins.
    pub fn write_csv<W: Write>(&self, cfg: &FrameConfig, mut out: W) -> Result<()> {
        writeln!(out, "k,q,re_s,im_s,re_c,im_c")?;
        let mut used: Vec<i32> = cfg.data_indices();
        used.extend_from_slice(&cfg.pilot_indices);
        used.sort_unstable();
        for k in 0..self.s.rows() {
            for &idx in &used {
                let q = cfg.bin_for_index(idx);
                let s = self.s.get(k, q);
                let c = self
                    .c
                    .as_ref()
                    .map_or(Complex64::new(0.0, 0.0), |c| c.get(k, q));
                writeln!(out, "{k},{q},{},{},{},{}", s.re, s.im, c.re, c.im)?;
            }
        }
        Ok(())
    }
}

/// Gray-map bit pairs onto unit-energy QPSK: (b0,b1) -> ((1-2b0)+j(1-2b1))/sqrt(2).
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if bits.len() % 2 != 0 {
        return Err(Error::Geometry(format!(
            "QPSK needs an even bit count, got {}",
            bits.len()
        )));
    }
    Ok(bits
        .chunks(2)
        .map(|pair| {
            Complex64::new(
                (1.0 - 2.0 * f64::from(pair[0] & 1)) * FRAC_1_SQRT_2,
                (1.0 - 2.0 * f64::from(pair[1] & 1)) * FRAC_1_SQRT_2,
            )
        })
        .collect())
}

/// Hard-decision QPSK demap by quadrant; boundary components decode as bit 0.
pub fn qpsk_demap(symbols: &[Complex64]) -> Vec<u8> {
    let mut bits = Vec::with_capacity(symbols.len() * 2);
    for s in symbols {
        bits.push(u8::from(s.re < 0.0));
        bits.push(u8::from(s.im < 0.0));
    }
    bits
}

/// Place `n_data` data symbols and the symbol-`k` pilots onto an FFT grid.
///
/// Data fills the data indices in increasing DC-centred order; DC and guard
/// bins stay zero.
pub fn pack_subcarriers(
    data: &[Complex64],
    cfg: &FrameConfig,
    k: usize,
) -> Result<Vec<Complex64>> {
    if data.len() != cfg.n_data {
        return Err(Error::Geometry(format!(
            "expected {} data symbols, got {}",
            cfg.n_data,
            data.len()
        )));
    }
    let mut bins = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
    let pilot = Complex64::new(cfg.pilot_value(k), 0.0);
    for &p in &cfg.pilot_indices {
        bins[cfg.bin_for_index(p)] = pilot;
    }
    for (&idx, &sym) in cfg.data_indices().iter().zip(data.iter()) {
        bins[cfg.bin_for_index(idx)] = sym;
    }
    Ok(bins)
}

/// Read the data subcarriers back out of an FFT grid in pack order.
pub fn unpack_subcarriers(bins: &[Complex64], cfg: &FrameConfig) -> Vec<Complex64> {
    cfg.data_indices()
        .iter()
        .map(|&idx| bins[cfg.bin_for_index(idx)])
        .collect()
}

/// Synthesize one OFDM symbol: IFFT plus cyclic prefix.
pub fn ofdm_modulate(packed: &[Complex64], cfg: &FrameConfig, k: usize) -> Result<OfdmSymbol> {
    if packed.len() != cfg.n_fft {
        return Err(Error::Geometry(format!(
            "expected {} bins, got {}",
            cfg.n_fft,
            packed.len()
        )));
    }
    let body = fft(packed, true)?;
    let mut time_samples = Vec::with_capacity(cfg.symbol_len());
    time_samples.extend_from_slice(&body[cfg.n_fft - cfg.guard_len..]);
    time_samples.extend_from_slice(&body);
    Ok(OfdmSymbol {
        freq_bins: packed.to_vec(),
        time_samples,
        index: k,
    })
}

/// Synthesize a stream of packed grids into one contiguous sample buffer.
pub fn modulate_stream(grids: &[Vec<Complex64>], cfg: &FrameConfig) -> Result<SampleBuffer> {
    let symbols = par::map_indices(grids.len(), |k| ofdm_modulate(&grids[k], cfg, k));
    let mut samples = Vec::with_capacity(grids.len() * cfg.symbol_len());
    for sym in symbols {
        samples.extend_from_slice(&sym?.time_samples);
    }
    Ok(SampleBuffer::new(samples, cfg.sample_rate))
}

/// Demodulate `n_symbols` OFDM symbols assuming an ideal frame start at
/// sample 0: strip each prefix, forward-FFT the body, emit s[k][q].
pub fn ofdm_demodulate(
    received: &SampleBuffer,
    cfg: &FrameConfig,
    n_symbols: usize,
) -> Result<DemodOutput> {
    let needed = n_symbols * cfg.symbol_len();
    if received.len() < needed {
        return Err(Error::TruncatedStream {
            needed,
            got: received.len(),
        });
    }
    let rows = par::map_indices(n_symbols, |k| {
        let start = k * cfg.symbol_len() + cfg.guard_len;
        fft(&received.samples[start..start + cfg.n_fft], false)
    });
    let mut grid = ComplexGrid::zeros(n_symbols, cfg.n_fft);
    for (k, row) in rows.into_iter().enumerate() {
        grid.row_mut(k).copy_from_slice(&row?);
    }
    Ok(DemodOutput {
        s: grid,
        c: None,
        h_used: None,
    })
}
