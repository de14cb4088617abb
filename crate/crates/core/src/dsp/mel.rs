//! Triangular filterbank on the HTK Mel scale.

use crate::error::{Error, Result};

pub const DEFAULT_LOG_FLOOR: f64 = 1e-8;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    /// Number of linear-frequency bins the filterbank consumes.
    pub n_bins: usize,
    /// FFT size the bins come from; bin `k` sits at `k * sample_rate / fft_size`.
    pub fft_size: usize,
    pub sample_rate: u32,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 64,
            n_bins: 480,
            fft_size: 960,
            sample_rate: 48_000,
            f_min: 0.0,
            f_max: 24_000.0,
        }
    }
}

/// Row-major `n_mels x n_bins` nonnegative weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    pub weights: Vec<f64>,
    pub n_mels: usize,
    pub n_bins: usize,
    pub sample_rate: u32,
    pub f_min: f64,
    pub f_max: f64,
}

pub fn build_mel_filterbank(cfg: &MelConfig) -> Result<MelFilterbank> {
    if cfg.n_mels == 0 || cfg.n_mels >= cfg.n_bins {
        return Err(Error::InvalidConfig(format!(
            "n_mels ({}) must be positive and below the bin count ({})",
            cfg.n_mels, cfg.n_bins
        )));
    }
    if !(cfg.f_min >= 0.0 && cfg.f_max > cfg.f_min) {
        return Err(Error::InvalidConfig(format!(
            "bad Mel range [{}, {}]",
            cfg.f_min, cfg.f_max
        )));
    }
    let (lo, hi) = (hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * cfg.sample_rate as f64 / cfg.fft_size as f64;

    let mut weights = vec![0.0; cfg.n_mels * cfg.n_bins];
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = &mut weights[m * cfg.n_bins..(m + 1) * cfg.n_bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = bin_hz(k);
            let up = (f - left) / (center - left);
            let down = (right - f) / (right - center);
            *w = up.min(down).max(0.0);
        }
        // Narrow low-frequency triangles can fall between bin centres; give
        // such a row its nearest bin so every Mel band sees some energy.
        if row.iter().all(|&w| w == 0.0) {
            let nearest = ((center * cfg.fft_size as f64 / cfg.sample_rate as f64).round()
                as usize)
                .min(cfg.n_bins - 1);
            row[nearest] = 1.0;
        }
    }
    Ok(MelFilterbank {
        weights,
        n_mels: cfg.n_mels,
        n_bins: cfg.n_bins,
        sample_rate: cfg.sample_rate,
        f_min: cfg.f_min,
        f_max: cfg.f_max,
    })
}

impl MelFilterbank {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    /// `fb . magnitude` without the log.
    pub fn apply(&self, magnitude: &[f64], out: &mut [f64]) {
        for (m, o) in out.iter_mut().enumerate().take(self.n_mels) {
            *o = self.row(m).iter().zip(magnitude).map(|(w, x)| w * x).sum();
        }
    }
}

/// `ln(fb . magnitude + floor)` for one frame.
pub fn log_mel(magnitude: &[f64], fb: &MelFilterbank, floor: f64) -> Result<Vec<f64>> {
    if magnitude.len() != fb.n_bins {
        return Err(Error::ShapeMismatch(format!(
            "magnitude frame has {} bins, filterbank expects {}",
            magnitude.len(),
            fb.n_bins
        )));
    }
    if let Some(bin) = magnitude.iter().position(|&m| m < 0.0) {
        return Err(Error::NegativeMagnitude { bin });
    }
    let mut out = vec![0.0; fb.n_mels];
    fb.apply(magnitude, &mut out);
    out.iter_mut().for_each(|v| *v = (*v + floor).ln());
    Ok(out)
}
