//! Pulse spectra to time-domain fragments.

use realfft::num_complex::Complex64;

use crate::dsp::fft::RealFft;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Per-pulse complex spectra: the first half of the projection channels are
/// real parts, the second half imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentSpectra {
    re: Matrix,
    im: Matrix,
}

impl FragmentSpectra {
    pub fn new(re: Matrix, im: Matrix) -> Result<Self> {
        if re.rows() != im.rows() || re.cols() != im.cols() {
            return Err(Error::Shape("real and imaginary parts differ in shape".into()));
        }
        Ok(Self { re, im })
    }

    /// Splits P×C_out projection output into its two halves.
    pub fn from_projection(proj: &Matrix) -> Result<Self> {
        if !proj.cols().is_multiple_of(2) {
            return Err(Error::Shape(format!("odd projection width {}", proj.cols())));
        }
        let half = proj.cols() / 2;
        let mut re = Matrix::zeros(proj.rows(), half);
        let mut im = Matrix::zeros(proj.rows(), half);
        for p in 0..proj.rows() {
            let row = proj.row(p);
            re.row_mut(p).copy_from_slice(&row[..half]);
            im.row_mut(p).copy_from_slice(&row[half..]);
        }
        Ok(Self { re, im })
    }

    pub fn n_pulses(&self) -> usize {
        self.re.rows()
    }

    pub fn bins(&self) -> usize {
        self.re.cols()
    }

    pub fn re(&self) -> &Matrix {
        &self.re
    }

    pub fn im(&self) -> &Matrix {
        &self.im
    }
}

/// Reusable inverse-FFT state for one fragment length.
#[derive(Debug, Clone)]
pub struct FragmentSynth {
    fft: RealFft,
    spectrum: Vec<Complex64>,
    time: Vec<f64>,
}

impl FragmentSynth {
    pub fn new(fft_len: usize) -> Result<Self> {
        let fft = RealFft::new(fft_len)?;
        Ok(Self {
            spectrum: vec![Complex64::new(0.0, 0.0); fft.bins()],
            time: vec![0.0; fft_len],
            fft,
        })
    }

    pub fn fft_len(&self) -> usize {
        self.fft.len()
    }

    /// Inverse real FFT of one half spectrum, then a circular rotation by F/2
    /// so that time zero lands on the fragment center.
    pub fn fragment(&mut self, re: &[f64], im: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.fft.len();
        if re.len() != self.fft.bins() || im.len() != self.fft.bins() || out.len() != n {
            return Err(Error::Shape(format!(
                "fragment of length {n} needs {} bins, got {}",
                self.fft.bins(),
                re.len()
            )));
        }
        for ((c, &r), &i) in self.spectrum.iter_mut().zip(re).zip(im) {
            *c = Complex64::new(r, i);
        }
        self.fft.inverse_into(&self.spectrum, &mut self.time)?;
        let half = n / 2;
        out[half..].copy_from_slice(&self.time[..n - half]);
        out[..half].copy_from_slice(&self.time[n - half..]);
        Ok(())
    }
}

/// P×F fragments from P pulse spectra of width F/2 + 1.
pub fn fragments_from_spectra(spectra: &FragmentSpectra, fft_len: usize) -> Result<Matrix> {
    if spectra.bins() != fft_len / 2 + 1 {
        return Err(Error::Shape(format!(
            "spectrum width {} does not match F/2 + 1 = {}",
            spectra.bins(),
            fft_len / 2 + 1
        )));
    }
    let mut synth = FragmentSynth::new(fft_len)?;
    let mut out = Matrix::zeros(spectra.n_pulses(), fft_len);
    for p in 0..spectra.n_pulses() {
        synth.fragment(spectra.re.row(p), spectra.im.row(p), out.row_mut(p))?;
    }
    Ok(out)
}
