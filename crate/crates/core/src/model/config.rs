use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::{MelConfig, StftConfig};
use crate::error::{Error, Result};
use crate::nn::ArchiveError;

/// Recurrent cell used inside each encoder block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RnnCell {
    #[default]
    Gru,
    Lstm,
}

impl RnnCell {
    pub fn gates(self) -> usize {
        match self {
            RnnCell::Gru => 3,
            RnnCell::Lstm => 4,
        }
    }
}

impl fmt::Display for RnnCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RnnCell::Gru => "gru",
            RnnCell::Lstm => "lstm",
        })
    }
}

impl FromStr for RnnCell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gru" => Ok(RnnCell::Gru),
            "lstm" => Ok(RnnCell::Lstm),
            other => Err(Error::InvalidConfig(format!(
                "unknown encoder cell {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrnConfig {
    /// Model-facing frequency bins per frame (F). The STFT uses `2 * F`
    /// points with hop `F`; the Nyquist bin is dropped.
    pub n_bins: usize,
    pub dim: usize,
    pub mlp_hidden: usize,
    pub n_blocks: usize,
    pub n_mels: usize,
    pub predictor_hidden: usize,
    pub encoder_cell: RnnCell,
    pub joiner_hidden: usize,
    pub joiner_groups: usize,
    pub joiner_kernel_freq: usize,
    pub joiner_kernel_time: usize,
    pub sample_rate: u32,
}

impl Default for FrnConfig {
    fn default() -> Self {
        Self {
            n_bins: 480,
            dim: 384,
            mlp_hidden: 768,
            n_blocks: 4,
            n_mels: 64,
            predictor_hidden: 512,
            encoder_cell: RnnCell::Gru,
            joiner_hidden: 9,
            joiner_groups: 3,
            joiner_kernel_freq: 3,
            joiner_kernel_time: 3,
            sample_rate: 48_000,
        }
    }
}

const META_PREFIX: &str = "frn.";

impl FrnConfig {
    /// A small configuration for tests and examples (F = 32, 64-point STFT).
    pub fn tiny() -> Self {
        Self {
            n_bins: 32,
            dim: 16,
            mlp_hidden: 24,
            n_blocks: 2,
            n_mels: 8,
            predictor_hidden: 12,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("n_bins", self.n_bins),
            ("dim", self.dim),
            ("mlp_hidden", self.mlp_hidden),
            ("n_blocks", self.n_blocks),
            ("n_mels", self.n_mels),
            ("predictor_hidden", self.predictor_hidden),
            ("joiner_hidden", self.joiner_hidden),
            ("joiner_groups", self.joiner_groups),
            ("joiner_kernel_time", self.joiner_kernel_time),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if self.n_mels >= self.n_bins {
            return Err(Error::InvalidConfig(format!(
                "n_mels {} must be below n_bins {}",
                self.n_mels, self.n_bins
            )));
        }
        if 3 % self.joiner_groups != 0 || !self.joiner_hidden.is_multiple_of(self.joiner_groups) {
            return Err(Error::InvalidConfig(format!(
                "joiner groups {} must divide 3 input and {} hidden channels",
                self.joiner_groups, self.joiner_hidden
            )));
        }
        if self.joiner_kernel_freq.is_multiple_of(2) {
            return Err(Error::InvalidConfig(
                "joiner frequency kernel must be odd".into(),
            ));
        }
        Ok(())
    }

    pub fn stft(&self) -> StftConfig {
        StftConfig {
            fft_size: 2 * self.n_bins,
            win_length: 2 * self.n_bins,
            hop_length: self.n_bins,
            sample_rate: self.sample_rate,
            ..StftConfig::default()
        }
    }

    pub fn mel(&self) -> MelConfig {
        MelConfig {
            n_mels: self.n_mels,
            n_bins: self.n_bins,
            fft_size: 2 * self.n_bins,
            sample_rate: self.sample_rate,
            f_min: 0.0,
            f_max: self.sample_rate as f64 / 2.0,
        }
    }

    /// Length of one model frame: real parts followed by imaginary parts.
    pub fn frame_len(&self) -> usize {
        2 * self.n_bins
    }

    /// Closed-form parameter count of the network this config describes.
    pub fn param_count(&self) -> usize {
        let (f2, d, m, h) = (
            2 * self.n_bins,
            self.dim,
            self.mlp_hidden,
            self.predictor_hidden,
        );
        let gates = self.encoder_cell.gates();
        let rnn = 2 * gates * d * d + 2 * gates * d;
        let block = 2 * d + rnn + 2 * d + (m * d + m) + (d * m + d);
        let encoder = (d * f2 + d) + self.n_blocks * block + (f2 * d + f2);
        let lstm = 4 * h * self.n_mels + 4 * h * h + 8 * h;
        let predictor =
            lstm + (self.n_mels * h + self.n_mels) + (self.n_bins * self.n_mels + self.n_bins);
        let k = self.joiner_kernel_freq * self.joiner_kernel_time;
        let conv1 = self.joiner_hidden * (3 / self.joiner_groups) * k + self.joiner_hidden;
        let conv2 = 2 * self.joiner_hidden * k + 2;
        encoder + predictor + conv1 + conv2
    }

    pub fn to_metadata(&self, meta: &mut BTreeMap<String, String>) {
        let mut put = |k: &str, v: String| {
            meta.insert(format!("{META_PREFIX}{k}"), v);
        };
        put("n_bins", self.n_bins.to_string());
        put("dim", self.dim.to_string());
        put("mlp_hidden", self.mlp_hidden.to_string());
        put("n_blocks", self.n_blocks.to_string());
        put("n_mels", self.n_mels.to_string());
        put("predictor_hidden", self.predictor_hidden.to_string());
        put("encoder_cell", self.encoder_cell.to_string());
        put("joiner_hidden", self.joiner_hidden.to_string());
        put("joiner_groups", self.joiner_groups.to_string());
        put("joiner_kernel_freq", self.joiner_kernel_freq.to_string());
        put("joiner_kernel_time", self.joiner_kernel_time.to_string());
        put("sample_rate", self.sample_rate.to_string());
    }

    pub fn from_metadata(meta: &BTreeMap<String, String>) -> Result<Self> {
        fn get<T: FromStr>(meta: &BTreeMap<String, String>, k: &str) -> Result<T> {
            let key = format!("{META_PREFIX}{k}");
            let raw = meta
                .get(&key)
                .ok_or_else(|| ArchiveError::MissingMetadata(key.clone()))?;
            raw.parse()
                .map_err(|_| Error::InvalidConfig(format!("metadata {key}={raw:?} is not valid")))
        }
        let cfg = Self {
            n_bins: get(meta, "n_bins")?,
            dim: get(meta, "dim")?,
            mlp_hidden: get(meta, "mlp_hidden")?,
            n_blocks: get(meta, "n_blocks")?,
            n_mels: get(meta, "n_mels")?,
            predictor_hidden: get(meta, "predictor_hidden")?,
            encoder_cell: get(meta, "encoder_cell")?,
            joiner_hidden: get(meta, "joiner_hidden")?,
            joiner_groups: get(meta, "joiner_groups")?,
            joiner_kernel_freq: get(meta, "joiner_kernel_freq")?,
            joiner_kernel_time: get(meta, "joiner_kernel_time")?,
            sample_rate: get(meta, "sample_rate")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
