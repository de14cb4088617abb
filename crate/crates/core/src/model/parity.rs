//! Recorded input/output sequences for checking another implementation of
//! the network (typically the training code) against this one.
//!
//! Every sequence starts from [`Frn::new_state`], so its first frame covers
//! the zero-state, zero-previous-output case.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Frn, FrnConfig, Mode};
use crate::error::{Error, Result};

pub const PARITY_SCHEMA: &str = "parity-v1";
pub const PARITY_REL_TOL: f64 = 1e-4;
pub const PARITY_ABS_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParitySequence {
    pub name: String,
    /// Model frames fed to the full network, `[re.., im..]`.
    pub inputs: Vec<Vec<f32>>,
    pub encoder: Vec<Vec<f32>>,
    pub predictor: Vec<Vec<f32>>,
    pub joiner: Vec<Vec<f32>>,
    pub output: Vec<Vec<f32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityVectors {
    pub schema: String,
    pub seed: u64,
    pub config: FrnConfig,
    pub sequences: Vec<ParitySequence>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentError {
    pub max_abs: f64,
    /// Largest `|a - e| / max(rel * |e|, floor)`; at most 1 when passing.
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParityReport {
    pub components: BTreeMap<String, ComponentError>,
    pub frames: usize,
    pub passed: bool,
}

impl ParityVectors {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("parity vectors: {e}")))?;
        if v.schema != PARITY_SCHEMA {
            return Err(Error::InvalidConfig(format!(
                "parity schema {:?}, expected {PARITY_SCHEMA:?}",
                v.schema
            )));
        }
        Ok(v)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Runs each input sequence through every component and records the results.
pub fn record_parity(
    frn: &Frn,
    seed: u64,
    inputs: Vec<(String, Vec<Vec<f32>>)>,
) -> Result<ParityVectors> {
    let mut sequences = Vec::with_capacity(inputs.len());
    for (name, frames) in inputs {
        let mut state = frn.new_state();
        let mut seq = ParitySequence {
            name,
            inputs: Vec::new(),
            encoder: Vec::new(),
            predictor: Vec::new(),
            joiner: Vec::new(),
            output: Vec::new(),
        };
        for frame in frames {
            let mut enc_state = state.encoder.clone();
            let mut pred_state = state.predictor.clone();
            let mut ctx = state.joiner.clone();
            let enc = frn.encoder_step(&frame, &mut enc_state)?;
            let pred = frn.predictor_step(&state.prev_output, &mut pred_state)?;
            let joined = frn.joiner_step(&enc, &pred, &mut ctx)?;
            let out = frn.step(&frame, &mut state, Mode::Full)?;
            seq.inputs.push(frame);
            seq.encoder.push(enc);
            seq.predictor.push(pred);
            seq.joiner.push(joined);
            seq.output.push(out);
        }
        sequences.push(seq);
    }
    Ok(ParityVectors {
        schema: PARITY_SCHEMA.into(),
        seed,
        config: frn.config,
        sequences,
    })
}

/// Seeded random sequences: one of loud frames, one with a run of zeroed
/// (lost) frames in the middle.
pub fn export_parity_vectors(frn: &Frn, seed: u64, n_frames: usize) -> Result<ParityVectors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = frn.config.frame_len();
    let mut random = |amp: f32| -> Vec<Vec<f32>> {
        (0..n_frames)
            .map(|_| (0..len).map(|_| rng.random_range(-amp..amp)).collect())
            .collect()
    };
    let loud = random(20.0);
    let mut lossy = random(5.0);
    let third = n_frames / 3;
    for frame in &mut lossy[third..(2 * third).max(third + 1).min(n_frames)] {
        frame.fill(0.0);
    }
    record_parity(
        frn,
        seed,
        vec![("random".into(), loud), ("zeroed-run".into(), lossy)],
    )
}

fn compare(err: &mut ComponentError, actual: &[f32], expected: &[f32]) -> Result<()> {
    if actual.len() != expected.len() {
        return Err(Error::LengthMismatch {
            a: actual.len(),
            b: expected.len(),
        });
    }
    for (&a, &e) in actual.iter().zip(expected) {
        let diff = (a as f64 - e as f64).abs();
        let tol = (PARITY_REL_TOL * (e as f64).abs()).max(PARITY_ABS_FLOOR);
        err.max_abs = err.max_abs.max(diff);
        err.max_ratio = err.max_ratio.max(diff / tol);
    }
    Ok(())
}

/// Replays recorded vectors. Each component is fed the *recorded* inputs of
/// that component, so errors do not compound across components; the full
/// step is replayed end to end.
pub fn replay_parity(frn: &Frn, vectors: &ParityVectors) -> Result<ParityReport> {
    if vectors.config != frn.config {
        return Err(Error::InvalidConfig(
            "parity vectors were recorded for a different config".into(),
        ));
    }
    let mut errs: BTreeMap<String, ComponentError> = ["encoder", "predictor", "joiner", "frn_step"]
        .into_iter()
        .map(|k| (k.to_string(), ComponentError::default()))
        .collect();
    let mut frames = 0;
    for seq in &vectors.sequences {
        let mut full = frn.new_state();
        let mut enc_state = frn.encoder.new_state();
        let mut pred_state = frn.predictor.new_state();
        let mut ctx = frn.joiner.new_context();
        let mut prev = vec![0.0f32; frn.config.frame_len()];
        for (i, input) in seq.inputs.iter().enumerate() {
            let enc = frn.encoder_step(input, &mut enc_state)?;
            compare(errs.get_mut("encoder").unwrap(), &enc, &seq.encoder[i])?;
            let pred = frn.predictor_step(&prev, &mut pred_state)?;
            compare(errs.get_mut("predictor").unwrap(), &pred, &seq.predictor[i])?;
            let joined = frn.joiner_step(&seq.encoder[i], &seq.predictor[i], &mut ctx)?;
            compare(errs.get_mut("joiner").unwrap(), &joined, &seq.joiner[i])?;
            let out = frn.step(input, &mut full, Mode::Full)?;
            compare(errs.get_mut("frn_step").unwrap(), &out, &seq.output[i])?;
            prev.clone_from(&seq.output[i]);
            frames += 1;
        }
    }
    let passed = errs.values().all(|e| e.max_ratio <= 1.0);
    Ok(ParityReport {
        components: errs,
        frames,
        passed,
    })
}
