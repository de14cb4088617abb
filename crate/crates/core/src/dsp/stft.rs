//! Short-time Fourier analysis and weighted overlap-add synthesis.
//!
//! Frames start at sample 0 with no centering or padding, so the first frame
//! covers `[0, fft_size)`. When `win_length < fft_size` the window is
//! zero-padded symmetrically inside the FFT frame. Synthesis multiplies every
//! inverse-transformed frame by the same window and divides the overlap-added
//! result by the summed squared window (WOLA). Samples whose envelope falls
//! below the steady-state minimum (the first and last partial overlaps) are
//! divided by that minimum instead, which fades the edges rather than
//! amplifying numerical noise.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    #[default]
    HannPeriodic,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::HannPeriodic => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub win_length: usize,
    pub hop_length: usize,
    pub window: Window,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    /// 20 ms Hann window with 50% overlap at 48 kHz.
    fn default() -> Self {
        Self {
            fft_size: 960,
            win_length: 960,
            hop_length: 480,
            window: Window::HannPeriodic,
            sample_rate: 48_000,
        }
    }
}

impl StftConfig {
    pub fn new(fft_size: usize, hop_length: usize, win_length: usize) -> Result<Self> {
        let cfg = Self {
            fft_size,
            win_length,
            hop_length,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0 {
            return Err(Error::InvalidStftConfig(
                "hop_length must be positive".into(),
            ));
        }
        if self.win_length <= self.hop_length {
            return Err(Error::InvalidStftConfig(format!(
                "win_length {} must exceed hop_length {}",
                self.win_length, self.hop_length
            )));
        }
        if self.fft_size < self.win_length {
            return Err(Error::InvalidStftConfig(format!(
                "fft_size {} is smaller than win_length {}",
                self.fft_size, self.win_length
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidStftConfig(
                "sample_rate must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Checks the half-overlap pairing used by the streaming model
    /// (`2 * hop == win == fft`).
    pub fn validate_half_overlap(&self) -> Result<()> {
        self.validate()?;
        if self.hop_length * 2 != self.win_length || self.fft_size != self.win_length {
            return Err(Error::InvalidStftConfig(format!(
                "streaming requires fft_size == win_length == 2 * hop_length, got {}/{}/{}",
                self.fft_size, self.win_length, self.hop_length
            )));
        }
        Ok(())
    }

    /// Number of one-sided bins, `fft_size / 2 + 1`.
    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn n_frames(&self, n_samples: usize) -> usize {
        if n_samples < self.fft_size {
            0
        } else {
            (n_samples - self.fft_size) / self.hop_length + 1
        }
    }

    /// Length of the overlap-add output for `n_frames` frames.
    pub fn synthesis_len(&self, n_frames: usize) -> usize {
        if n_frames == 0 {
            0
        } else {
            (n_frames - 1) * self.hop_length + self.fft_size
        }
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.fft_size as f64
    }
}

/// One-sided complex spectrogram stored frame-major: element `(f, t)` lives
/// at `t * n_bins + f`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    pub real: Vec<f64>,
    pub imag: Vec<f64>,
    pub n_bins: usize,
    pub n_frames: usize,
    pub config: StftConfig,
}

impl ComplexSpectrogram {
    pub fn zeros(config: StftConfig, n_frames: usize) -> Self {
        let n_bins = config.n_bins();
        Self {
            real: vec![0.0; n_bins * n_frames],
            imag: vec![0.0; n_bins * n_frames],
            n_bins,
            n_frames,
            config,
        }
    }

    pub fn frame(&self, t: usize) -> (&[f64], &[f64]) {
        let r = t * self.n_bins..(t + 1) * self.n_bins;
        (&self.real[r.clone()], &self.imag[r])
    }

    pub fn frame_mut(&mut self, t: usize) -> (&mut [f64], &mut [f64]) {
        let r = t * self.n_bins..(t + 1) * self.n_bins;
        (&mut self.real[r.clone()], &mut self.imag[r])
    }

    pub fn magnitude(&self, f: usize, t: usize) -> f64 {
        let i = t * self.n_bins + f;
        self.real[i].hypot(self.imag[i])
    }

    fn check(&self) -> Result<()> {
        let expected = self.n_bins * self.n_frames;
        if self.n_bins != self.config.n_bins()
            || self.real.len() != expected
            || self.imag.len() != expected
        {
            return Err(Error::ShapeMismatch(format!(
                "spectrogram {}x{} with {} real / {} imag values does not match fft_size {}",
                self.n_bins,
                self.n_frames,
                self.real.len(),
                self.imag.len(),
                self.config.fft_size
            )));
        }
        Ok(())
    }
}

/// Reusable analysis/synthesis plan for one [`StftConfig`].
#[derive(Clone)]
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    window_sq: Vec<f64>,
    envelope_floor: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Stft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stft")
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.fft_size;
        let mut window = vec![0.0; n];
        let offset = (n - cfg.win_length) / 2;
        window[offset..offset + cfg.win_length]
            .copy_from_slice(&cfg.window.coefficients(cfg.win_length));
        let window_sq: Vec<f64> = window.iter().map(|w| w * w).collect();

        // Minimum of the fully overlapped envelope over one hop period.
        let envelope_floor = (0..cfg.hop_length)
            .map(|j| {
                window_sq
                    .iter()
                    .skip(j)
                    .step_by(cfg.hop_length)
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        if envelope_floor <= 0.0 {
            return Err(Error::InvalidStftConfig(
                "window/hop pair leaves gaps in the overlap-add envelope".into(),
            ));
        }

        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window,
            window_sq,
            envelope_floor,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    /// Analysis window, zero-padded to `fft_size`.
    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn envelope_floor(&self) -> f64 {
        self.envelope_floor
    }

    /// Transforms one `fft_size` block of samples into `n_bins` complex bins.
    pub fn analyze_frame(&self, samples: &[f64], re: &mut [f64], im: &mut [f64]) {
        let n = self.cfg.fft_size;
        debug_assert_eq!(samples.len(), n);
        let mut buf: Vec<Complex64> = samples
            .iter()
            .zip(&self.window)
            .map(|(&x, &w)| Complex64::new(x * w, 0.0))
            .collect();
        self.forward.process(&mut buf);
        for (f, c) in buf.iter().take(self.cfg.n_bins()).enumerate() {
            re[f] = c.re;
            im[f] = c.im;
        }
    }

    /// Inverse-transforms one one-sided frame and applies the synthesis
    /// window. The result still needs envelope normalization.
    pub fn synthesize_frame(&self, re: &[f64], im: &[f64], out: &mut [f64]) {
        let n = self.cfg.fft_size;
        let bins = self.cfg.n_bins();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for f in 0..bins {
            buf[f] = Complex64::new(re[f], im[f]);
        }
        // DC and (for even n) Nyquist must be real for a real signal.
        buf[0].im = 0.0;
        if n.is_multiple_of(2) {
            buf[n / 2].im = 0.0;
        }
        for f in 1..n - bins + 1 {
            buf[n - f] = buf[f].conj();
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        for ((o, c), w) in out.iter_mut().zip(&buf).zip(&self.window) {
            *o = c.re * scale * w;
        }
    }

    /// Divides an overlap-added sample by its envelope, flooring the envelope
    /// at the steady-state minimum.
    #[inline]
    pub fn normalize(&self, acc: f64, envelope: f64) -> f64 {
        acc / envelope.max(self.envelope_floor)
    }

    /// Squared window coefficient at offset `n` inside a frame.
    #[inline]
    pub fn window_sq(&self, n: usize) -> f64 {
        self.window_sq[n]
    }

    pub fn forward(&self, signal: &[f64]) -> Result<ComplexSpectrogram> {
        let n = self.cfg.fft_size;
        if signal.len() < n {
            return Err(Error::InsufficientSamples {
                needed: n,
                got: signal.len(),
            });
        }
        let frames = self.cfg.n_frames(signal.len());
        let mut spec = ComplexSpectrogram::zeros(self.cfg, frames);
        for t in 0..frames {
            let start = t * self.cfg.hop_length;
            let (re, im) = spec.frame_mut(t);
            self.analyze_frame(&signal[start..start + n], re, im);
        }
        Ok(spec)
    }

    pub fn inverse(&self, spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
        spec.check()?;
        if spec.config != self.cfg {
            return Err(Error::ShapeMismatch(
                "spectrogram config differs from the synthesis plan".into(),
            ));
        }
        let n = self.cfg.fft_size;
        let hop = self.cfg.hop_length;
        let len = self.cfg.synthesis_len(spec.n_frames);
        let mut acc = vec![0.0; len];
        let mut env = vec![0.0; len];
        let mut seg = vec![0.0; n];
        for t in 0..spec.n_frames {
            let (re, im) = spec.frame(t);
            self.synthesize_frame(re, im, &mut seg);
            let start = t * hop;
            for (k, &s) in seg.iter().enumerate() {
                acc[start + k] += s;
                env[start + k] += self.window_sq[k];
            }
        }
        Ok(acc
            .iter()
            .zip(&env)
            .map(|(&a, &e)| self.normalize(a, e))
            .collect())
    }
}

pub fn stft(signal: &[f64], cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    Stft::new(*cfg)?.forward(signal)
}

pub fn istft(spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
    Stft::new(spec.config)?.inverse(spec)
}

/// Frame-major magnitude matrix, `n_frames * n_bins` values.
#[derive(Clone, Debug, PartialEq)]
pub struct MagnitudeSpectrogram {
    pub data: Vec<f64>,
    pub n_bins: usize,
    pub n_frames: usize,
}

impl MagnitudeSpectrogram {
    pub fn from_complex(spec: &ComplexSpectrogram) -> Self {
        Self {
            data: spec
                .real
                .iter()
                .zip(&spec.imag)
                .map(|(r, i)| r.hypot(*i))
                .collect(),
            n_bins: spec.n_bins,
            n_frames: spec.n_frames,
        }
    }
}

/// `|STFT(signal)|^alpha` elementwise.
pub fn compressed_magnitude(
    signal: &[f64],
    alpha: f64,
    cfg: &StftConfig,
) -> Result<MagnitudeSpectrogram> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidExponent(alpha));
    }
    let mut mag = MagnitudeSpectrogram::from_complex(&stft(signal, cfg)?);
    if alpha != 1.0 {
        mag.data.iter_mut().for_each(|m| *m = m.powf(alpha));
    }
    Ok(mag)
}
