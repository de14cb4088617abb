//! 48 kHz mono WAV input and output.

use std::path::Path;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 48_000;

/// Reads a mono 48 kHz WAV (16-bit PCM or 32-bit float) as `f32` samples in
/// `[-1, 1]`. Other rates are refused rather than resampled.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Vec<f32>> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let unsupported = |reason: String| Error::UnsupportedWav {
        path: path.to_path_buf(),
        reason,
    };
    if spec.sample_rate != SAMPLE_RATE {
        return Err(unsupported(format!(
            "sample rate {} Hz, expected {SAMPLE_RATE} Hz",
            spec.sample_rate
        )));
    }
    if spec.channels != 1 {
        return Err(unsupported(format!(
            "{} channels, expected mono",
            spec.channels
        )));
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| Ok(s? as f32 / 32768.0))
            .collect(),
        (hound::SampleFormat::Float, 32) => reader.samples::<f32>().map(|s| Ok(s?)).collect(),
        (fmt, bits) => Err(unsupported(format!("{bits}-bit {fmt:?} samples"))),
    }
}

/// Writes mono 48 kHz 32-bit float samples.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f32]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        writer.write_sample(s)?;
    }
    writer.finalize()?;
    Ok(())
}

/// Writes mono 48 kHz 16-bit PCM, clipping to `[-1, 1]`.
pub fn write_wav_pcm16(path: impl AsRef<Path>, samples: &[f32]) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        writer.write_sample((s.clamp(-1.0, 1.0) * 32767.0).round() as i16)?;
    }
    writer.finalize()?;
    Ok(())
}
