use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use frn::lossgen::PACKET_SIZES;
use frn::wav;
use serde_json::Value;

#[path = "../src/manifest.rs"]
#[allow(dead_code)]
mod manifest;

use manifest::RunManifest;

fn frn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frn"))
        .args(args)
        .output()
        .expect("spawn frn")
}

fn ok(args: &[&str]) -> String {
    let out = frn(args);
    assert!(
        out.status.success(),
        "frn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Harmonic tone with a slow vibrato plus a little noise, seeded.
fn voiced(len: usize, seed: u64) -> Vec<f32> {
    let f0 = 110.0 + 15.0 * seed as f32;
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
    (0..len)
        .map(|n| {
            let t = n as f32 / 48_000.0;
            let phase = 2.0 * std::f32::consts::PI * f0 * (t + 0.002 * (3.0 * t).sin());
            let tone: f32 = (1..=12).map(|h| (h as f32 * phase).sin() / h as f32).sum();
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            let noise = ((state >> 33) as f32 / (1u64 << 31) as f32) - 0.5;
            0.2 * tone + 0.01 * noise
        })
        .collect()
}

fn corpus(dir: &Path, files: usize, seconds: f32) -> PathBuf {
    let d = dir.join("clean");
    fs::create_dir_all(&d).unwrap();
    for i in 0..files {
        let n = (seconds * 48_000.0) as usize + 37 * i;
        wav::write_wav(d.join(format!("utt{i:02}.wav")), &voiced(n, i as u64)).unwrap();
    }
    d
}

fn manifest(path: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn tiny_weights(dir: &Path) -> PathBuf {
    let w = dir.join("tiny.frnw");
    ok(&[
        "gen-weights",
        "--seed",
        "3",
        "--preset",
        "tiny",
        "--out",
        s(&w),
    ]);
    w
}

#[test]
fn simulate_chain_hits_expected_loss_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = corpus(tmp.path(), 8, 20.0);
    let out = tmp.path().join("lossy");
    ok(&[
        "simulate",
        "--in",
        s(&clean),
        "--out",
        s(&out),
        "--chain",
        "0.9,0.1",
        "--seed",
        "11",
    ]);
    let m = manifest(&out.join("manifest.json"));
    let rate = m.aggregate["loss_rate"];
    assert!((rate - 0.10).abs() < 0.02, "aggregate loss {rate}");
    for i in 0..8 {
        assert!(out.join(format!("utt{i:02}.wav")).exists());
        assert!(out.join(format!("utt{i:02}.trace.txt")).exists());
    }
}

#[test]
fn simulate_is_seed_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = corpus(tmp.path(), 2, 2.0);
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "simulate",
            "--in",
            s(&clean),
            "--out",
            s(&out),
            "--chain",
            "0.5,0.5",
            "--packet-size",
            "random",
            "--seed",
            seed,
        ]);
        (
            fs::read(out.join("utt00.wav")).unwrap(),
            fs::read(out.join("utt01.trace.txt")).unwrap(),
        )
    };
    assert_eq!(run("a", "5"), run("b", "5"));
    assert_ne!(run("c", "5"), run("d", "6"));
}

#[test]
fn recorded_trace_ignores_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = corpus(tmp.path(), 1, 1.0);
    let trace = tmp.path().join("real_trace.txt");
    fs::write(&trace, "0\n1\n1\n0\n".repeat(20)).unwrap();
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "simulate",
            "--in",
            s(&clean),
            "--out",
            s(&out),
            "--trace",
            s(&trace),
            "--seed",
            seed,
        ]);
        fs::read(out.join("utt00.wav")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "999"));
    let lossy = wav::read_wav(tmp.path().join("a/utt00.wav")).unwrap();
    assert!(lossy[960..2880].iter().all(|&v| v == 0.0));
    assert!(lossy[..960].iter().any(|&v| v != 0.0));
}

#[test]
fn random_packet_sizes_come_from_the_set() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = corpus(tmp.path(), 12, 0.5);
    let out = tmp.path().join("lossy");
    ok(&[
        "simulate",
        "--in",
        s(&clean),
        "--out",
        s(&out),
        "--chain",
        "0.9,0.5",
        "--packet-size",
        "random",
        "--seed",
        "2",
    ]);
    let m = manifest(&out.join("manifest.json"));
    let sizes: Vec<usize> = m
        .rows
        .iter()
        .map(|r| r["packet_size"].as_u64().unwrap() as usize)
        .collect();
    assert!(sizes.iter().all(|p| PACKET_SIZES.contains(p)), "{sizes:?}");
    assert!(
        sizes
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len()
            > 1
    );
}

#[test]
fn conceal_streaming_matches_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = corpus(tmp.path(), 2, 1.0);
    let w = tiny_weights(tmp.path());
    for mode in ["full", "encoder-only"] {
        let a = tmp.path().join(format!("batch-{mode}"));
        let b = tmp.path().join(format!("stream-{mode}"));
        ok(&[
            "conceal",
            "--in",
            s(&clean),
            "--out",
            s(&a),
            "--weights",
            s(&w),
            "--mode",
            mode,
            "--batch",
        ]);
        ok(&[
            "conceal",
            "--in",
            s(&clean),
            "--out",
            s(&b),
            "--weights",
            s(&w),
            "--mode",
            mode,
            "--streaming",
        ]);
        for i in 0..2 {
            let name = format!("utt{i:02}.wav");
            let x = wav::read_wav(clean.join(&name)).unwrap();
            let ya = wav::read_wav(a.join(&name)).unwrap();
            let yb = wav::read_wav(b.join(&name)).unwrap();
            assert_eq!(ya.len(), x.len());
            assert_eq!(yb.len(), x.len());
            let diff = ya
                .iter()
                .zip(&yb)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f32::max);
            assert!(diff < 1e-5, "{mode}: {diff}");
        }
        let m = manifest(&a.join("manifest.json"));
        assert_eq!(m.weights_sha256.as_deref().map(str::len), Some(64));
    }
}

#[test]
fn evaluate_identical_dirs_gives_zero_and_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = corpus(tmp.path(), 3, 1.0);
    let report = tmp.path().join("report.json");
    ok(&[
        "evaluate",
        "--ref",
        s(&clean),
        "--est",
        s(&clean),
        "--out",
        s(&report),
        "--seed",
        "4",
    ]);
    let text = fs::read_to_string(&report).unwrap();
    let m: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(m.schema, "report-v1");
    assert_eq!(m.seed, Some(4));
    assert_eq!(m.rows.len(), 3);
    assert_eq!(m.aggregate["lsd"], 0.0);
    assert_eq!(m.aggregate["mrstft"], 0.0);
    assert_eq!(serde_json::to_string_pretty(&m).unwrap() + "\n", text);
}

#[test]
fn evaluate_is_reproducible_and_exports_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = corpus(tmp.path(), 2, 1.0);
    let lossy = tmp.path().join("lossy");
    ok(&[
        "simulate",
        "--in",
        s(&clean),
        "--out",
        s(&lossy),
        "--chain",
        "0.9,0.5",
        "--seed",
        "8",
    ]);
    let args = ["evaluate", "--ref", s(&clean), "--est", s(&lossy)];
    let a: RunManifest = serde_json::from_str(&ok(&args)).unwrap();
    let b: RunManifest = serde_json::from_str(&ok(&args)).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        let d = (ra["lsd"].as_f64().unwrap() - rb["lsd"].as_f64().unwrap()).abs();
        assert!(d <= 1e-6);
    }
    let csv = ok(&[
        "evaluate",
        "--ref",
        s(&clean),
        "--est",
        s(&lossy),
        "--report",
        "csv",
        "--metrics",
        "lsd",
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "file,lsd");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("mean,"));
}

#[test]
fn zero_fill_lsd_grows_with_loss_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = corpus(tmp.path(), 3, 4.0);
    // Chains with p_l = 0.5 and stationary loss 10%, 20%, 40%.
    let chains = ["0.94444444,0.5", "0.875,0.5", "0.66666667,0.5"];
    let mut lsds = Vec::new();
    for (i, chain) in chains.iter().enumerate() {
        let out = tmp.path().join(format!("loss{i}"));
        ok(&[
            "simulate",
            "--in",
            s(&clean),
            "--out",
            s(&out),
            "--chain",
            chain,
            "--seed",
            "21",
        ]);
        let m: RunManifest = serde_json::from_str(&ok(&[
            "evaluate",
            "--ref",
            s(&clean),
            "--est",
            s(&out),
            "--metrics",
            "lsd",
        ]))
        .unwrap();
        lsds.push(m.aggregate["lsd"]);
    }
    assert!(lsds.windows(2).all(|w| w[0] < w[1]), "{lsds:?}");
}

#[test]
fn evaluate_lists_missing_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = corpus(tmp.path(), 3, 0.5);
    let est = tmp.path().join("est");
    fs::create_dir_all(&est).unwrap();
    fs::copy(clean.join("utt00.wav"), est.join("utt00.wav")).unwrap();
    fs::copy(clean.join("utt00.wav"), est.join("extra.wav")).unwrap();
    let out = frn(&["evaluate", "--ref", s(&clean), "--est", s(&est)]);
    assert_eq!(out.status.code(), Some(3));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    let msg = diag["message"].as_str().unwrap();
    for name in ["est/utt01.wav", "est/utt02.wav", "ref/extra.wav"] {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn exit_codes_and_parsable_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let usage = frn(&["simulate", "--in", "x.wav", "--out", "y"]);
    assert_eq!(usage.status.code(), Some(2));
    let diag: Value = serde_json::from_slice(&usage.stderr).unwrap();
    assert_eq!(diag["kind"], "usage");

    let bad_chain = frn(&["simulate", "--in", "x", "--out", "y", "--chain", "1.0,1.0"]);
    assert_eq!(bad_chain.status.code(), Some(2));

    let wav44 = tmp.path().join("cd.wav");
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: 44_100,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(&wav44, spec).unwrap();
    for _ in 0..4410 {
        w.write_sample(0i16).unwrap();
    }
    w.finalize().unwrap();
    let data = frn(&[
        "simulate",
        "--in",
        s(&wav44),
        "--out",
        s(&tmp.path().join("o")),
        "--chain",
        "0.9,0.1",
    ]);
    assert_eq!(data.status.code(), Some(3));
    let diag: Value = serde_json::from_slice(&data.stderr).unwrap();
    assert_eq!(diag["kind"], "data");
    assert!(diag["message"].as_str().unwrap().contains("44100"));

    let garbage = tmp.path().join("garbage.frnw");
    fs::write(&garbage, b"not an archive").unwrap();
    let clean = corpus(tmp.path(), 1, 0.2);
    let out = frn(&[
        "conceal",
        "--in",
        s(&clean),
        "--out",
        s(&tmp.path().join("c")),
        "--weights",
        s(&garbage),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn gen_weights_is_seeded_and_bench_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.frnw");
    let b = tmp.path().join("b.frnw");
    let ia: Value = serde_json::from_str(&ok(&[
        "gen-weights",
        "--seed",
        "9",
        "--preset",
        "tiny",
        "--out",
        s(&a),
    ]))
    .unwrap();
    let ib: Value = serde_json::from_str(&ok(&[
        "gen-weights",
        "--seed",
        "9",
        "--preset",
        "tiny",
        "--out",
        s(&b),
    ]))
    .unwrap();
    assert_eq!(ia["sha256"], ib["sha256"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let report: Value =
        serde_json::from_str(&ok(&["bench", "--weights", s(&a), "--seconds", "0.5"])).unwrap();
    assert_eq!(report["schema"], "bench-v1");
    assert!(report["rtf"].as_f64().unwrap() > 0.0);
    assert!(report["machine"]["cpu"].is_string());
}

#[test]
fn trace_stats_summarizes_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("traces");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("a.txt"), "0\n0\n0\n1\n").unwrap();
    fs::write(dir.join("b.txt"), "1\n1\n0\n0\n0\n0\n0\n0\n").unwrap();
    let m: RunManifest = serde_json::from_str(&ok(&["trace-stats", "--trace", s(&dir)])).unwrap();
    assert_eq!(m.rows.len(), 2);
    assert!((m.aggregate["mean_loss_rate"] - 0.25).abs() < 1e-12);
    assert!((m.aggregate["pooled_loss_rate"] - 0.25).abs() < 1e-12);
    assert_eq!(m.rows[1]["mean_loss_run"], 2.0);
}

#[test]
fn parity_export_and_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let w = tiny_weights(tmp.path());
    let v = tmp.path().join("parity.json");
    let a: Value = serde_json::from_str(&ok(&[
        "parity",
        "--weights",
        s(&w),
        "--vectors",
        s(&v),
        "--export",
        "--seed",
        "2",
    ]))
    .unwrap();
    let b: Value = serde_json::from_str(&ok(&[
        "parity",
        "--weights",
        s(&w),
        "--vectors",
        s(&v),
        "--export",
        "--seed",
        "2",
    ]))
    .unwrap();
    assert_eq!(a["sha256"], b["sha256"]);
    let report: Value =
        serde_json::from_str(&ok(&["parity", "--weights", s(&w), "--vectors", s(&v)])).unwrap();
    assert_eq!(report["passed"], true);

    let other = tmp.path().join("other.frnw");
    ok(&[
        "gen-weights",
        "--seed",
        "4",
        "--preset",
        "tiny",
        "--out",
        s(&other),
    ]);
    let out = frn(&["parity", "--weights", s(&other), "--vectors", s(&v)]);
    assert_eq!(out.status.code(), Some(3));
}
