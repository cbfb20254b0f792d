//! Radix-2 FFT with the unnormalized-forward convention.
//!
//! Forward transform: `X[k] = sum_n x[n] e^{-j2pi kn/N}`; the inverse carries
//! the `1/N` factor, so `ifft(fft(x)) = x`. Lengths must be powers of two.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// In-place radix-2 decimation-in-time FFT.
///
/// `inverse` selects the inverse transform (conjugate twiddles, 1/N scaling).
/// Twiddles come from a per-call table indexed directly, so butterfly order
/// and rounding are fixed for a given length.
pub fn fft_in_place(buf: &mut [Complex64], inverse: bool) -> Result<()> {
    let n = buf.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Geometry(format!(
            "FFT length must be a nonzero power of two, got {n}"
        )));
    }
    if n == 1 {
        return Ok(());
    }

    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            buf.swap(i, j);
        }
    }

    // Twiddle table: w[t] = e^{±j 2 pi t / n}, t < n/2.
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|t| {
            let angle = sign * 2.0 * PI * t as f64 / n as f64;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect();

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        let mut start = 0;
        while start < n {
            for k in 0..half {
                let w = twiddles[k * stride];
                let u = buf[start + k];
                let t = w * buf[start + k + half];
                buf[start + k] = u + t;
                buf[start + k + half] = u - t;
            }
            start += len;
        }
        len <<= 1;
    }

    if inverse {
        let inv_n = 1.0 / n as f64;
        for x in buf.iter_mut() {
            *x *= inv_n;
        }
    }
    Ok(())
}

/// FFT returning a new vector; `inverse` selects the inverse transform.
pub fn fft(input: &[Complex64], inverse: bool) -> Result<Vec<Complex64>> {
    let mut buf = input.to_vec();
    fft_in_place(&mut buf, inverse)?;
    Ok(buf)
}
