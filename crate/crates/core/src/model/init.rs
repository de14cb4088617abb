//! Random initialization of a complete weight archive.
//!
//! Linear and recurrent weights are uniform in `±1/sqrt(fan_in)` (recurrent
//! layers use the hidden width as fan-in). Affine norms start near identity.
//! The inverse-Mel layer starts at the transpose of the Mel filterbank.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::build_mel_filterbank;
use crate::error::Result;
use crate::model::FrnConfig;
use crate::nn::rnn::{GRU_GATE_ORDER, GRU_VARIANT, LSTM_GATE_ORDER};
use crate::nn::{Tensor, WeightArchive};

struct Init {
    rng: ChaCha8Rng,
    archive: WeightArchive,
}

impl Init {
    fn uniform(&mut self, name: String, shape: Vec<usize>, bound: f32) {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| self.rng.random_range(-bound..=bound))
            .collect();
        self.archive
            .insert(name, Tensor::new(shape, data).expect("shape matches"));
    }

    fn linear(&mut self, name: &str, n_out: usize, n_in: usize) {
        let bound = 1.0 / (n_in as f32).sqrt();
        self.uniform(format!("{name}.weight"), vec![n_out, n_in], bound);
        self.uniform(format!("{name}.bias"), vec![n_out], bound);
    }

    fn affine(&mut self, name: &str, d: usize) {
        let scale = (0..d)
            .map(|_| 1.0 + self.rng.random_range(-0.1..=0.1))
            .collect();
        let bias = (0..d).map(|_| self.rng.random_range(-0.1..=0.1)).collect();
        self.archive
            .insert(format!("{name}.scale"), Tensor::from_vec(scale));
        self.archive
            .insert(format!("{name}.bias"), Tensor::from_vec(bias));
    }

    fn rnn(&mut self, name: &str, gates: usize, n_in: usize, hidden: usize) {
        let bound = 1.0 / (hidden as f32).sqrt();
        self.uniform(format!("{name}.w_ih"), vec![gates * hidden, n_in], bound);
        self.uniform(format!("{name}.w_hh"), vec![gates * hidden, hidden], bound);
        self.uniform(format!("{name}.b_ih"), vec![gates * hidden], bound);
        self.uniform(format!("{name}.b_hh"), vec![gates * hidden], bound);
    }

    fn conv(&mut self, name: &str, c_out: usize, per_group: usize, kf: usize, kt: usize) {
        let bound = 1.0 / ((per_group * kf * kt) as f32).sqrt();
        self.uniform(
            format!("{name}.weight"),
            vec![c_out, per_group, kf, kt],
            bound,
        );
        self.uniform(format!("{name}.bias"), vec![c_out], bound);
    }
}

/// Builds a randomly initialized archive for `cfg`, reproducible from `seed`.
pub fn random_archive(cfg: &FrnConfig, seed: u64) -> Result<WeightArchive> {
    cfg.validate()?;
    let mut init = Init {
        rng: ChaCha8Rng::seed_from_u64(seed),
        archive: WeightArchive::new(),
    };
    let (f, f2, d) = (cfg.n_bins, cfg.frame_len(), cfg.dim);

    init.linear("encoder.proj_in", d, f2);
    for i in 0..cfg.n_blocks {
        let p = format!("encoder.blocks.{i}");
        init.affine(&format!("{p}.norm1"), d);
        init.rnn(&format!("{p}.rnn"), cfg.encoder_cell.gates(), d, d);
        init.affine(&format!("{p}.norm2"), d);
        init.linear(&format!("{p}.mlp.fc1"), cfg.mlp_hidden, d);
        init.linear(&format!("{p}.mlp.fc2"), d, cfg.mlp_hidden);
    }
    init.linear("encoder.proj_out", f2, d);

    init.rnn("predictor.lstm", 4, cfg.n_mels, cfg.predictor_hidden);
    init.linear("predictor.proj", cfg.n_mels, cfg.predictor_hidden);
    let fb = build_mel_filterbank(&cfg.mel())?;
    let mut inv = vec![0.0f32; f * cfg.n_mels];
    for m in 0..cfg.n_mels {
        for (k, &w) in fb.row(m).iter().enumerate() {
            inv[k * cfg.n_mels + m] = w as f32;
        }
    }
    init.archive.insert(
        "predictor.inv_mel.weight",
        Tensor::new(vec![f, cfg.n_mels], inv)?,
    );
    init.archive
        .insert("predictor.inv_mel.bias", Tensor::zeros(vec![f]));

    let (kf, kt) = (cfg.joiner_kernel_freq, cfg.joiner_kernel_time);
    init.conv(
        "joiner.conv1",
        cfg.joiner_hidden,
        3 / cfg.joiner_groups,
        kf,
        kt,
    );
    init.conv("joiner.conv2", 2, cfg.joiner_hidden, kf, kt);

    let meta = &mut init.archive.metadata;
    cfg.to_metadata(meta);
    meta.insert("gate_order.lstm".into(), LSTM_GATE_ORDER.into());
    meta.insert("gate_order.gru".into(), GRU_GATE_ORDER.into());
    meta.insert("gru_variant".into(), GRU_VARIANT.into());
    meta.insert("init_seed".into(), seed.to_string());
    Ok(init.archive)
}
