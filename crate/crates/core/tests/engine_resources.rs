use std::sync::Arc;

use frn::engine::{benchmark_rtf, Stream};
use frn::model::{random_archive, Frn, FrnConfig, Mode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn frn(cfg: &FrnConfig, seed: u64) -> Arc<Frn> {
    Arc::new(Frn::from_archive(&random_archive(cfg, seed).unwrap()).unwrap())
}

#[test]
fn footprint_is_constant_over_a_minute() {
    let model = frn(&FrnConfig::default(), 1);
    let mut stream = Stream::new(model, Mode::Full).unwrap();
    let hop = stream.hop();
    let before = stream.footprint();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut chunk = vec![0.0f32; hop];
    for i in 0..(60 * 48_000 / hop) {
        chunk
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-0.5..0.5));
        let out = stream.push_chunk(&chunk).unwrap();
        assert_eq!(out.len(), hop);
        if i % 500 == 0 {
            assert_eq!(stream.footprint(), before, "hop {i}");
        }
    }
    assert_eq!(stream.footprint(), before);
    assert!(!stream.is_poisoned());
}

#[test]
fn encoder_only_is_not_slower_than_full() {
    let model = frn(&FrnConfig::default(), 3);
    let full = benchmark_rtf(model.clone(), 2.0, Mode::Full).unwrap();
    let enc = benchmark_rtf(model, 2.0, Mode::EncoderOnly).unwrap();
    // Loose margin for timer noise on shared machines.
    assert!(
        enc.rtf <= full.rtf * 1.25,
        "encoder-only {} vs full {}",
        enc.rtf,
        full.rtf
    );
}

#[test]
fn lstm_encoder_variant_streams_like_batch() {
    let cfg = FrnConfig {
        encoder_cell: frn::model::RnnCell::Lstm,
        ..FrnConfig::tiny()
    };
    let model = frn(&cfg, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f32> = (0..32 * 40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let batch = model.conceal_utterance(&x, Mode::Full).unwrap();
    let mut stream = Stream::new(model, Mode::Full).unwrap();
    let mut out = stream.push_samples(&x).unwrap();
    out.extend(stream.flush());
    assert_eq!(&out[stream.latency_offset()..], &batch[..]);
}
