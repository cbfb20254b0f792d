//! Pilot-based channel estimation and zero-forcing equalization.
//!
//! The least-squares path divides each received pilot by its known value and
//! extends the result across the band, either by linear interpolation in
//! subcarrier index (`ls-linear`, edge bins held from the nearest pilot) or
//! by nearest-pilot hold throughout (`ls-hold`). The genie path copies the
//! ground-truth response and isolates estimator error from channel effects.

use num_complex::Complex64;
use std::io::Write;

use crate::channel::ChannelResponse;
use crate::dsp::ComplexGrid;
use crate::error::{Error, Result};
use crate::ofdm::{DemodOutput, FrameConfig};

/// Magnitude floor below which a bin is treated as an erasure instead of
/// being divided through.
pub const CONDITIONING_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimatorMethod {
    /// Ground-truth channel response.
    Genie,
    /// LS at pilots, linear interpolation across subcarriers.
    #[default]
    LsLinear,
    /// LS at pilots, nearest-pilot hold.
    LsHold,
}

impl EstimatorMethod {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorMethod::Genie => "genie",
            EstimatorMethod::LsLinear => "ls-linear",
            EstimatorMethod::LsHold => "ls-hold",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "genie" => Some(Self::Genie),
            "ls-linear" => Some(Self::LsLinear),
            "ls-hold" => Some(Self::LsHold),
            _ => None,
        }
    }
}

/// Estimated channel response over the demodulation grid.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// H_hat[k][q], q an FFT bin index.
    pub h_hat: ComplexGrid,
    pub method: EstimatorMethod,
    /// Per-symbol leave-one-out residual at interior pilots (diagnostic).
    pub pilot_mse: Vec<f64>,
}

impl ChannelEstimate {
    /// Wrap the ground-truth response as a genie estimate.
    pub fn genie(truth: &ChannelResponse) -> Self {
        Self {
            h_hat: truth.h.clone(),
            method: EstimatorMethod::Genie,
            pilot_mse: vec![0.0; truth.h.rows()],
        }
    }

    /// CSV rows `k,q,re_H,im_H` over all bins.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,q,re_H,im_H")?;
        for k in 0..self.h_hat.rows() {
            for q in 0..self.h_hat.cols() {
                let v = self.h_hat.get(k, q);
                writeln!(out, "{k},{q},{},{}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Least-squares pilot estimation extended over the whole grid.
pub fn estimate_ls(
    demod: &DemodOutput,
    cfg: &FrameConfig,
    method: EstimatorMethod,
) -> Result<ChannelEstimate> {
    if method == EstimatorMethod::Genie {
        return Err(Error::Geometry(
            "genie estimates come from ChannelEstimate::genie".into(),
        ));
    }
    if demod.s.cols() != cfg.n_fft {
        return Err(Error::Geometry(format!(
            "demod grid has {} bins, config expects {}",
            demod.s.cols(),
            cfg.n_fft
        )));
    }
    let mut pilots: Vec<i32> = cfg.pilot_indices.clone();
    pilots.sort_unstable();
    if pilots.is_empty() {
        return Err(Error::Geometry("no pilot subcarriers configured".into()));
    }

    let n_symbols = demod.s.rows();
    let half = cfg.n_fft as i32 / 2;
    let mut h_hat = ComplexGrid::zeros(n_symbols, cfg.n_fft);
    let mut pilot_mse = Vec::with_capacity(n_symbols);

    for k in 0..n_symbols {
        let value = cfg.pilot_value(k);
        if value == 0.0 {
            return Err(Error::Geometry("pilot value is zero".into()));
        }
        let raw: Vec<Complex64> = pilots
            .iter()
            .map(|&p| demod.s.get(k, cfg.bin_for_index(p)) / value)
            .collect();

        for idx in -half..half {
            let h = match method {
                EstimatorMethod::LsLinear => interp_linear(&pilots, &raw, idx),
                EstimatorMethod::LsHold => hold_nearest(&pilots, &raw, idx),
                EstimatorMethod::Genie => unreachable!(),
            };
            h_hat.set(k, cfg.bin_for_index(idx), h);
        }

        // Leave-one-out residual at interior pilots.
        let mut mse = 0.0;
        let mut count = 0usize;
        for i in 1..pilots.len().saturating_sub(1) {
            let span = (pilots[i + 1] - pilots[i - 1]) as f64;
            let alpha = (pilots[i] - pilots[i - 1]) as f64 / span;
            let predicted = raw[i - 1] * (1.0 - alpha) + raw[i + 1] * alpha;
            mse += (raw[i] - predicted).norm_sqr();
            count += 1;
        }
        pilot_mse.push(if count > 0 { mse / count as f64 } else { 0.0 });
    }

    Ok(ChannelEstimate {
        h_hat,
        method,
        pilot_mse,
    })
}

fn interp_linear(pilots: &[i32], raw: &[Complex64], idx: i32) -> Complex64 {
    if idx <= pilots[0] {
        return raw[0];
    }
    if idx >= pilots[pilots.len() - 1] {
        return raw[raw.len() - 1];
    }
    // idx is strictly inside [pilots[0], pilots[last]]
    let hi = pilots.partition_point(|&p| p < idx);
    if pilots[hi] == idx {
        return raw[hi];
    }
    let lo = hi - 1;
    let alpha = (idx - pilots[lo]) as f64 / (pilots[hi] - pilots[lo]) as f64;
    raw[lo] * (1.0 - alpha) + raw[hi] * alpha
}

fn hold_nearest(pilots: &[i32], raw: &[Complex64], idx: i32) -> Complex64 {
    let mut best = 0usize;
    let mut best_dist = i32::MAX;
    for (i, &p) in pilots.iter().enumerate() {
        let d = (p - idx).abs();
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    raw[best]
}

/// Zero-forced data stream with per-symbol erasure flags.
#[derive(Debug, Clone)]
pub struct EqualizedStream {
    /// Data-subcarrier decisions in pack order, all symbols concatenated.
    pub symbols: Vec<Complex64>,
    /// True where the estimate was under the conditioning floor; those
    /// entries are zeroed (hard decision 0,0).
    pub erasures: Vec<bool>,
}

impl EqualizedStream {
    pub fn n_erasures(&self) -> usize {
        self.erasures.iter().filter(|&&e| e).count()
    }
}

/// Divide the demodulated data bins by the estimate, in pack order.
pub fn equalize(
    demod: &DemodOutput,
    est: &ChannelEstimate,
    cfg: &FrameConfig,
) -> Result<EqualizedStream> {
    if est.h_hat.rows() != demod.s.rows() || est.h_hat.cols() != demod.s.cols() {
        return Err(Error::Geometry(format!(
            "estimate grid {}x{} does not match demod grid {}x{}",
            est.h_hat.rows(),
            est.h_hat.cols(),
            demod.s.rows(),
            demod.s.cols()
        )));
    }
    let data_bins: Vec<usize> = cfg
        .data_indices()
        .iter()
        .map(|&i| cfg.bin_for_index(i))
        .collect();
    let n_symbols = demod.s.rows();
    let mut symbols = Vec::with_capacity(n_symbols * data_bins.len());
    let mut erasures = Vec::with_capacity(n_symbols * data_bins.len());
    for k in 0..n_symbols {
        for &q in &data_bins {
            let h = est.h_hat.get(k, q);
            if h.norm() < CONDITIONING_FLOOR {
                symbols.push(Complex64::new(0.0, 0.0));
                erasures.push(true);
            } else {
                symbols.push(demod.s.get(k, q) / h);
                erasures.push(false);
            }
        }
    }
    Ok(EqualizedStream { symbols, erasures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::RandomSource;
    use crate::ofdm::{pack_subcarriers, qpsk_map};

    /// Build a synthetic demod grid s = c .* H for a given response.
    fn synthetic_demod(
        cfg: &FrameConfig,
        n_symbols: usize,
        response: impl Fn(usize, i32) -> Complex64,
        noise_var: f64,
        rng: &mut RandomSource,
    ) -> (DemodOutput, ComplexGrid, ComplexGrid) {
        let half = cfg.n_fft as i32 / 2;
        let mut s = ComplexGrid::zeros(n_symbols, cfg.n_fft);
        let mut c = ComplexGrid::zeros(n_symbols, cfg.n_fft);
        let mut h = ComplexGrid::zeros(n_symbols, cfg.n_fft);
        for k in 0..n_symbols {
            let bits = rng.bits(2 * cfg.n_data);
            let data = qpsk_map(&bits).unwrap();
            let packed = pack_subcarriers(&data, cfg, k).unwrap();
            for idx in -half..half {
                let q = cfg.bin_for_index(idx);
                let hval = response(k, idx);
                let noise = if noise_var > 0.0 {
                    rng.complex_normal(noise_var)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                c.set(k, q, packed[q]);
                h.set(k, q, hval);
                s.set(k, q, packed[q] * hval + noise);
            }
        }
        (
            DemodOutput {
                s,
                c: None,
                h_used: None,
            },
            c,
            h,
        )
    }

    #[test]
    fn flat_channel_estimated_exactly() {
        let cfg = FrameConfig::default();
        let mut rng = RandomSource::new(31);
        let gain = Complex64::new(0.6, -1.1);
        let (demod, _, _) = synthetic_demod(&cfg, 4, |_, _| gain, 0.0, &mut rng);
        for method in [EstimatorMethod::LsLinear, EstimatorMethod::LsHold] {
            let est = estimate_ls(&demod, &cfg, method).unwrap();
            for k in 0..4 {
                for q in 0..cfg.n_fft {
                    assert!(
                        (est.h_hat.get(k, q) - gain).norm() < 1e-12,
                        "{method:?} k={k} q={q}"
                    );
                }
                assert!(est.pilot_mse[k] < 1e-24);
            }
        }
    }

    #[test]
    fn linear_response_reproduced_between_pilots() {
        let cfg = FrameConfig::default();
        let mut rng = RandomSource::new(32);
        let slope = Complex64::new(0.004, -0.002);
        let base = Complex64::new(1.0, 0.3);
        let (demod, _, h) =
            synthetic_demod(&cfg, 2, |_, idx| base + slope * idx as f64, 0.0, &mut rng);
        let est = estimate_ls(&demod, &cfg, EstimatorMethod::LsLinear).unwrap();
        let first = *cfg.pilot_indices.iter().min().unwrap();
        let last = *cfg.pilot_indices.iter().max().unwrap();
        for k in 0..2 {
            for idx in first..=last {
                if idx == 0 {
                    continue;
                }
                let q = cfg.bin_for_index(idx);
                let err = (est.h_hat.get(k, q) - h.get(k, q)).norm();
                assert!(err < 1e-10, "k={k} idx={idx} err={err}");
            }
        }
    }

    #[test]
    fn ls_is_exact_at_pilots_without_noise() {
        let cfg = FrameConfig::default();
        let mut rng = RandomSource::new(33);
        let (demod, _, h) = synthetic_demod(
            &cfg,
            3,
            |k, idx| Complex64::new(1.0 + 0.01 * idx as f64, 0.05 * k as f64),
            0.0,
            &mut rng,
        );
        let est = estimate_ls(&demod, &cfg, EstimatorMethod::LsLinear).unwrap();
        for k in 0..3 {
            for &p in &cfg.pilot_indices {
                let q = cfg.bin_for_index(p);
                assert!((est.h_hat.get(k, q) - h.get(k, q)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn estimation_mse_decreases_with_snr() {
        let cfg = FrameConfig::default();
        let gain = Complex64::new(0.9, 0.2);
        let mut mses = Vec::new();
        for (i, snr_db) in (0..=30).step_by(5).enumerate() {
            let mut rng = RandomSource::new(1000 + i as u64);
            let noise_var = 10f64.powf(-(snr_db as f64) / 10.0);
            let (demod, _, h) =
                synthetic_demod(&cfg, 100, |_, _| gain, noise_var, &mut rng);
            let est = estimate_ls(&demod, &cfg, EstimatorMethod::LsLinear).unwrap();
            let mut mse = 0.0;
            let mut n = 0usize;
            for k in 0..100 {
                for &idx in &cfg.data_indices() {
                    let q = cfg.bin_for_index(idx);
                    mse += (est.h_hat.get(k, q) - h.get(k, q)).norm_sqr();
                    n += 1;
                }
            }
            mses.push(mse / n as f64);
        }
        for pair in mses.windows(2) {
            assert!(
                pair[1] < pair[0],
                "MSE should fall with SNR: {mses:?}"
            );
        }
    }

    #[test]
    fn genie_equalization_recovers_reference_exactly() {
        let cfg = FrameConfig::default();
        let mut rng = RandomSource::new(34);
        let (demod, c, h) = synthetic_demod(
            &cfg,
            3,
            |_, idx| Complex64::new(1.2, 0.0) + Complex64::new(0.0, 0.006) * idx as f64,
            0.0,
            &mut rng,
        );
        let est = ChannelEstimate {
            h_hat: h,
            method: EstimatorMethod::Genie,
            pilot_mse: vec![0.0; 3],
        };
        let eq = equalize(&demod, &est, &cfg).unwrap();
        assert_eq!(eq.n_erasures(), 0);
        let data_bins: Vec<usize> = cfg
            .data_indices()
            .iter()
            .map(|&i| cfg.bin_for_index(i))
            .collect();
        for k in 0..3 {
            for (j, &q) in data_bins.iter().enumerate() {
                let err = (eq.symbols[k * data_bins.len() + j] - c.get(k, q)).norm();
                assert!(err < 1e-9, "k={k} q={q} err={err}");
            }
        }
    }

    #[test]
    fn phase_rotation_removed_exactly() {
        let cfg = FrameConfig::default();
        let mut rng = RandomSource::new(35);
        let theta = 1.1f64;
        let gain = Complex64::new(theta.cos(), theta.sin());
        let (demod, c, _) = synthetic_demod(&cfg, 2, |_, _| gain, 0.0, &mut rng);
        let est = estimate_ls(&demod, &cfg, EstimatorMethod::LsLinear).unwrap();
        let eq = equalize(&demod, &est, &cfg).unwrap();
        let data_bins: Vec<usize> = cfg
            .data_indices()
            .iter()
            .map(|&i| cfg.bin_for_index(i))
            .collect();
        for k in 0..2 {
            for (j, &q) in data_bins.iter().enumerate() {
                let err = (eq.symbols[k * data_bins.len() + j] - c.get(k, q)).norm();
                assert!(err < 1e-12);
            }
        }
    }

    #[test]
    fn zero_estimate_becomes_erasure_not_overflow() {
        let cfg = FrameConfig::default();
        let mut rng = RandomSource::new(36);
        let (demod, _, mut h) = synthetic_demod(&cfg, 1, |_, _| Complex64::new(1.0, 0.0), 0.0, &mut rng);
        // Null out one data bin of the estimate.
        let dead = cfg.bin_for_index(cfg.data_indices()[10]);
        h.set(0, dead, Complex64::new(0.0, 0.0));
        let est = ChannelEstimate {
            h_hat: h,
            method: EstimatorMethod::Genie,
            pilot_mse: vec![0.0],
        };
        let eq = equalize(&demod, &est, &cfg).unwrap();
        assert_eq!(eq.n_erasures(), 1);
        assert!(eq.erasures[10]);
        assert_eq!(eq.symbols[10], Complex64::new(0.0, 0.0));
        assert!(eq.symbols.iter().all(|s| s.re.is_finite() && s.im.is_finite()));
    }

    #[test]
    fn estimator_method_labels_round_trip() {
        for m in [
            EstimatorMethod::Genie,
            EstimatorMethod::LsLinear,
            EstimatorMethod::LsHold,
        ] {
            assert_eq!(EstimatorMethod::parse(m.label()), Some(m));
        }
        assert_eq!(EstimatorMethod::parse("mmse"), None);
    }
}
