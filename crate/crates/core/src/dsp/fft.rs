//! Real-input FFT of power-of-two length.

use std::fmt;
use std::sync::Arc;

use realfft::num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};

/// Forward and inverse plans for one length. `inverse` is normalized so that
/// `inverse(forward(x)) == x`.
#[derive(Clone)]
pub struct RealFft {
    len: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl fmt::Debug for RealFft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RealFft").field("len", &self.len).finish()
    }
}

impl RealFft {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::FftLength(len));
        }
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bins(&self) -> usize {
        self.len / 2 + 1
    }

    /// Unnormalized DFT of `input` (length N) into `out` (length N/2+1).
    pub fn forward_into(&self, input: &[f64], out: &mut [Complex64]) -> Result<()> {
        if input.len() != self.len || out.len() != self.bins() {
            return Err(Error::Shape(format!(
                "rfft of length {} got {} inputs and {} output bins",
                self.len,
                input.len(),
                out.len()
            )));
        }
        let mut buf = input.to_vec();
        self.forward
            .process(&mut buf, out)
            .map_err(|e| Error::Shape(e.to_string()))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<Complex64>> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.bins()];
        self.forward_into(input, &mut out)?;
        Ok(out)
    }

    /// Inverse of a Hermitian half spectrum, scaled by 1/N. The imaginary
    /// parts of the DC and Nyquist bins have no real-signal counterpart and
    /// are ignored.
    pub fn inverse_into(&self, spectrum: &[Complex64], out: &mut [f64]) -> Result<()> {
        if spectrum.len() != self.bins() || out.len() != self.len {
            return Err(Error::Shape(format!(
                "irfft of length {} got {} bins and {} outputs",
                self.len,
                spectrum.len(),
                out.len()
            )));
        }
        let mut buf = spectrum.to_vec();
        buf[0].im = 0.0;
        let last = buf.len() - 1;
        buf[last].im = 0.0;
        self.inverse
            .process(&mut buf, out)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let scale = 1.0 / self.len as f64;
        out.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }

    pub fn inverse(&self, spectrum: &[Complex64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len];
        self.inverse_into(spectrum, &mut out)?;
        Ok(out)
    }
}

/// One-shot forward transform.
pub fn rfft(x: &[f64]) -> Result<Vec<Complex64>> {
    RealFft::new(x.len())?.forward(x)
}

/// One-shot inverse transform; the output length is `2 * (bins - 1)`.
pub fn irfft(spectrum: &[Complex64]) -> Result<Vec<f64>> {
    let n = spectrum.len().saturating_sub(1) * 2;
    RealFft::new(n)?.inverse(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_has_flat_spectrum() {
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let spec = rfft(&x).unwrap();
        assert!(spec.iter().all(|c| (c.re - 1.0).abs() < 1e-15 && c.im.abs() < 1e-15));
    }

    #[test]
    fn constant_concentrates_in_dc() {
        let c = 0.75;
        let spec = rfft(&[c; 32]).unwrap();
        assert!((spec[0].re - c * 32.0).abs() < 1e-12);
        assert!(spec[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn round_trip() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let back = irfft(&rfft(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(rfft(&[0.0; 12]), Err(Error::FftLength(12))));
        assert!(matches!(RealFft::new(1), Err(Error::FftLength(1))));
    }
}
