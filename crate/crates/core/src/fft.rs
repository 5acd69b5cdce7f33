//! Iterative radix-2 FFT on interleaved `(re, im)` pairs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

/// In-place FFT. `inverse` applies the conjugate transform and the `1/n`
/// scale. The length must be a power of two.
pub fn fft_in_place(data: &mut [Complex], inverse: bool) -> Result<()> {
    let n = data.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(contract!("FFT length {n} is not a power of two"));
    }
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let angle = sign * 2.0 * core::f64::consts::PI / len as f64;
        let half = len / 2;
        // Twiddles from direct evaluation; the recurrence drifts for long transforms.
        let twiddles: Vec<Complex> = (0..half)
            .map(|k| {
                let a = angle * k as f64;
                Complex::new(libm::cos(a), libm::sin(a))
            })
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let u = data[start + k];
                let v = data[start + k + half].mul(twiddles[k]);
                data[start + k] = Complex::new(u.re + v.re, u.im + v.im);
                data[start + k + half] = Complex::new(u.re - v.re, u.im - v.im);
            }
        }
        len <<= 1;
    }
    if inverse {
        let scale = 1.0 / n as f64;
        for c in data.iter_mut() {
            c.re *= scale;
            c.im *= scale;
        }
    }
    Ok(())
}

/// Magnitudes of bins `0..=n_fft/2` of the zero-padded real `frame`.
pub fn magnitude_spectrum(frame: &[f64], n_fft: usize) -> Result<Vec<f64>> {
    if frame.len() > n_fft {
        return Err(contract!("frame of {} samples exceeds FFT size {n_fft}", frame.len()));
    }
    let mut buf = vec![Complex::default(); n_fft];
    for (b, &v) in buf.iter_mut().zip(frame) {
        b.re = v;
    }
    fft_in_place(&mut buf, false)?;
    Ok(buf[..=n_fft / 2].iter().map(|c| c.norm()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(x: &[f64]) -> Vec<Complex> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex::default();
                for (t, &v) in x.iter().enumerate() {
                    let a = -2.0 * core::f64::consts::PI * (k * t) as f64 / n as f64;
                    acc.re += v * libm::cos(a);
                    acc.im += v * libm::sin(a);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let x: Vec<f64> = (0..64).map(|i| libm::sin(i as f64 * 0.37) + 0.1 * i as f64).collect();
        let mut buf: Vec<Complex> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft_in_place(&mut buf, false).unwrap();
        for (a, b) in buf.iter().zip(naive_dft(&x)) {
            assert!((a.re - b.re).abs() < 1e-9 && (a.im - b.im).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_round_trip() {
        let orig: Vec<Complex> = (0..32).map(|i| Complex::new(i as f64, -(i as f64) * 0.5)).collect();
        let mut buf = orig.clone();
        fft_in_place(&mut buf, false).unwrap();
        fft_in_place(&mut buf, true).unwrap();
        for (a, b) in buf.iter().zip(&orig) {
            assert!((a.re - b.re).abs() < 1e-10 && (a.im - b.im).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let mut buf = vec![Complex::default(); 12];
        assert!(fft_in_place(&mut buf, false).is_err());
    }
}
