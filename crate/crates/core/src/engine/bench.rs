//! Single-threaded real-time-factor measurement.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::Stream;
use crate::error::Result;
use crate::model::{Frn, Mode};

pub const BENCH_SCHEMA: &str = "bench-v1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineInfo {
    pub cpu: String,
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
}

impl MachineInfo {
    pub fn detect() -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo")
            .ok()
            .and_then(|s| {
                s.lines()
                    .find(|l| l.starts_with("model name"))
                    .and_then(|l| l.split(':').nth(1))
                    .map(|v| v.trim().to_string())
            })
            .unwrap_or_else(|| "unknown".into());
        Self {
            cpu,
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            logical_cpus: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchReport {
    pub schema: String,
    pub mode: Mode,
    pub threads: usize,
    pub hops: usize,
    pub hop_ms: f64,
    pub mean_hop_ms: f64,
    pub p95_hop_ms: f64,
    pub max_hop_ms: f64,
    /// Mean processing time per hop divided by the hop duration.
    pub rtf: f64,
    pub param_count: usize,
    pub machine: MachineInfo,
}

/// Streams `duration_s` seconds of seeded noise hop by hop on the calling
/// thread and times every `push_chunk`. The warmup hop is not timed.
pub fn benchmark_rtf(frn: Arc<Frn>, duration_s: f64, mode: Mode) -> Result<BenchReport> {
    let cfg = frn.config.stft();
    let hop = cfg.hop_length;
    let hop_ms = 1000.0 * hop as f64 / cfg.sample_rate as f64;
    let n_hops = ((duration_s * cfg.sample_rate as f64) / hop as f64)
        .ceil()
        .max(1.0) as usize;
    let param_count = frn.param_count();
    let mut stream = Stream::new(frn, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut chunk = vec![0.0f32; hop];

    chunk
        .iter_mut()
        .for_each(|v| *v = rng.random_range(-0.5..0.5));
    stream.push_chunk(&chunk)?;

    let mut times = Vec::with_capacity(n_hops);
    for _ in 0..n_hops {
        chunk
            .iter_mut()
            .for_each(|v| *v = rng.random_range(-0.5..0.5));
        let start = Instant::now();
        let out = stream.push_chunk(&chunk)?;
        times.push(start.elapsed().as_secs_f64() * 1000.0);
        std::hint::black_box(out);
    }
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    let mut sorted = times.clone();
    sorted.sort_by(f64::total_cmp);
    let p95 = sorted[((sorted.len() as f64 * 0.95).ceil() as usize).clamp(1, sorted.len()) - 1];
    Ok(BenchReport {
        schema: BENCH_SCHEMA.into(),
        mode,
        threads: 1,
        hops: times.len(),
        hop_ms,
        mean_hop_ms: mean,
        p95_hop_ms: p95,
        max_hop_ms: *sorted.last().unwrap(),
        rtf: mean / hop_ms,
        param_count,
        machine: MachineInfo::detect(),
    })
}
