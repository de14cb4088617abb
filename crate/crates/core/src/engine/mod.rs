//! Real-time streaming wrapper and benchmarking.

mod bench;
mod stream;

pub use bench::{benchmark_rtf, BenchReport, MachineInfo, BENCH_SCHEMA};
pub use stream::Stream;
