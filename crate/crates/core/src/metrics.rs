//! Spectral evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::dsp::{compressed_magnitude, StftConfig};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.3;
pub const LSD_EPS: f64 = 1e-8;

/// One STFT resolution `(fft_size, hop, win_length)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub fft_size: usize,
    pub hop: usize,
    pub win_length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSet(pub Vec<Resolution>);

impl Default for ResolutionSet {
    /// The common three-resolution default: 1024/120/600, 2048/240/1200,
    /// 512/50/240.
    fn default() -> Self {
        Self(vec![
            Resolution {
                fft_size: 1024,
                hop: 120,
                win_length: 600,
            },
            Resolution {
                fft_size: 2048,
                hop: 240,
                win_length: 1200,
            },
            Resolution {
                fft_size: 512,
                hop: 50,
                win_length: 240,
            },
        ])
    }
}

impl ResolutionSet {
    pub fn stft_configs(&self, sample_rate: u32) -> Result<Vec<StftConfig>> {
        if self.0.is_empty() {
            return Err(Error::InvalidConfig("resolution set is empty".into()));
        }
        self.0
            .iter()
            .map(|r| {
                let cfg = StftConfig {
                    sample_rate,
                    ..StftConfig::new(r.fft_size, r.hop, r.win_length)?
                };
                Ok(cfg)
            })
            .collect()
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    Ok(())
}

/// Per-resolution terms of the multi-resolution loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionTerms {
    pub spectral_convergence: f64,
    pub magnitude_l1: f64,
}

pub fn mr_stft_terms(
    est: &[f64],
    reference: &[f64],
    res: &ResolutionSet,
    alpha: f64,
) -> Result<Vec<ResolutionTerms>> {
    check_lengths(est, reference)?;
    res.stft_configs(48_000)?
        .iter()
        .map(|cfg| {
            let y = compressed_magnitude(reference, alpha, cfg)?;
            let y_hat = compressed_magnitude(est, alpha, cfg)?;
            let ref_norm = y.data.iter().map(|v| v * v).sum::<f64>().sqrt();
            if ref_norm == 0.0 {
                return Err(Error::UndefinedSpectralConvergence);
            }
            let (mut sq, mut abs) = (0.0, 0.0);
            for (a, b) in y.data.iter().zip(&y_hat.data) {
                let d = a - b;
                sq += d * d;
                abs += d.abs();
            }
            Ok(ResolutionTerms {
                spectral_convergence: sq.sqrt() / ref_norm,
                magnitude_l1: abs / y.data.len() as f64,
            })
        })
        .collect()
}

/// Multi-resolution compressed-magnitude STFT loss: the mean over
/// resolutions of spectral convergence plus mean absolute magnitude error.
pub fn mr_stft_loss(
    est: &[f64],
    reference: &[f64],
    res: &ResolutionSet,
    alpha: f64,
) -> Result<f64> {
    let terms = mr_stft_terms(est, reference, res, alpha)?;
    Ok(terms
        .iter()
        .map(|t| t.spectral_convergence + t.magnitude_l1)
        .sum::<f64>()
        / terms.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsdConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub eps: f64,
}

impl Default for LsdConfig {
    fn default() -> Self {
        Self {
            fft_size: 2048,
            hop: 512,
            eps: LSD_EPS,
        }
    }
}

/// Log-spectral distance in dB: per frame, the RMS over bins of
/// `20 log10((|S| + eps) / (|S_hat| + eps))`, averaged over frames.
pub fn lsd(reference: &[f64], est: &[f64], cfg: &LsdConfig) -> Result<f64> {
    check_lengths(reference, est)?;
    let stft_cfg = StftConfig::new(cfg.fft_size, cfg.hop, cfg.fft_size)?;
    let s = compressed_magnitude(reference, 1.0, &stft_cfg)?;
    let s_hat = compressed_magnitude(est, 1.0, &stft_cfg)?;
    let n_bins = s.n_bins;
    let total: f64 = s
        .data
        .chunks_exact(n_bins)
        .zip(s_hat.data.chunks_exact(n_bins))
        .map(|(a, b)| {
            let mean_sq = a
                .iter()
                .zip(b)
                .map(|(x, y)| (20.0 * ((x + cfg.eps) / (y + cfg.eps)).log10()).powi(2))
                .sum::<f64>()
                / n_bins as f64;
            mean_sq.sqrt()
        })
        .sum();
    Ok(total / s.n_frames as f64)
}
