mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use frn::engine::{benchmark_rtf, Stream};
use frn::lossgen::{self, LossTrace, MarkovChain, DEFAULT_PACKET_SIZE};
use frn::metrics::{self, LsdConfig, ResolutionSet, DEFAULT_ALPHA};
use frn::model::{
    export_parity_vectors, random_archive, replay_parity, Frn, FrnConfig, Mode, ParityVectors,
    RnnCell,
};
use frn::nn::{load_weights, save_weights};
use frn::wav;

use manifest::{Format, RunManifest};

#[derive(Parser, Debug)]
#[command(
    name = "frn",
    version,
    about = "Blind packet loss concealment for 48 kHz speech"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Apply simulated or recorded packet loss to clean WAVs.
    #[command(group(ArgGroup::new("loss").required(true).args(["chain", "trace"])))]
    Simulate {
        /// A WAV file or a directory of WAVs.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Markov chain as `p_n,p_l`.
        #[arg(long, value_parser = parse_chain)]
        chain: Option<MarkovChain>,
        /// Recorded trace, one 0/1 flag per packet. Used for every file.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Samples per packet, or `random` for a per-file draw from 256..1536.
        #[arg(long, default_value = "960", value_parser = parse_packet_size)]
        packet_size: PacketSize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Conceal lossy WAVs with a weight archive.
    #[command(group(ArgGroup::new("path").args(["streaming", "batch"])))]
    Conceal {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        /// Feed audio hop by hop through the real-time engine.
        #[arg(long)]
        streaming: bool,
        /// Process each file as one utterance (default).
        #[arg(long)]
        batch: bool,
    },
    /// Score estimates against references.
    Evaluate {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        est: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "lsd,mrstft")]
        metrics: Vec<MetricArg>,
        #[arg(long, value_enum, default_value = "json")]
        report: Format,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Archive whose checksum and config are recorded in the report.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Seed recorded in the report.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Measure single-threaded real-time factor.
    Bench {
        /// Archive to benchmark; a seeded random default model otherwise.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        #[arg(long, value_enum, default_value = "full")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a randomly initialized weight archive.
    GenWeights {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "default")]
        preset: Preset,
        #[arg(long, value_enum)]
        encoder_cell: Option<CellArg>,
    },
    /// Export parity vectors for an archive, or replay a vector file against it.
    Parity {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        /// Write vectors instead of checking them.
        #[arg(long)]
        export: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        frames: usize,
    },
    /// Loss statistics of recorded traces.
    TraceStats {
        /// Trace files or directories of `.txt` traces.
        #[arg(long, required = true, num_args = 1..)]
        trace: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PacketSize {
    Fixed(usize),
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Full,
    EncoderOnly,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Full => Mode::Full,
            ModeArg::EncoderOnly => Mode::EncoderOnly,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Lsd,
    Mrstft,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Default,
    Tiny,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CellArg {
    Gru,
    Lstm,
}

fn parse_chain(s: &str) -> Result<MarkovChain, String> {
    let (a, b) = s.split_once(',').ok_or("expected p_n,p_l")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    MarkovChain::new(p(a)?, p(b)?).map_err(|e| e.to_string())
}

fn parse_packet_size(s: &str) -> Result<PacketSize, String> {
    if s == "random" {
        return Ok(PacketSize::Random);
    }
    match s.parse::<usize>() {
        Ok(0) => Err("packet size must be positive".into()),
        Ok(n) => Ok(PacketSize::Fixed(n)),
        Err(e) => Err(format!("expected a sample count or `random`: {e}")),
    }
}

/// Failures split by exit code.
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<frn::Error> for Failure {
    fn from(e: frn::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<frn::nn::ArchiveError> for Failure {
    fn from(e: frn::nn::ArchiveError) -> Self {
        Failure::Data(e.into())
    }
}

fn diagnostic(kind: &str, code: u8, message: &str) {
    eprintln!(
        "{}",
        json!({"level": "error", "kind": kind, "exit_code": code, "message": message})
    );
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ");
            diagnostic("usage", 2, first);
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            diagnostic("usage", 2, &msg);
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            diagnostic("data", 3, &format!("{e:#}"));
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate {
            input,
            out,
            chain,
            trace,
            packet_size,
            seed,
        } => simulate(&input, &out, chain, trace.as_deref(), packet_size, seed),
        Command::Conceal {
            input,
            out,
            weights,
            mode,
            streaming,
            batch: _,
        } => conceal(&input, &out, &weights, mode.into(), streaming),
        Command::Evaluate {
            reference,
            est,
            metrics,
            report,
            out,
            weights,
            seed,
        } => {
            if metrics.is_empty() {
                return Err(Failure::Usage(
                    "--metrics must name at least one metric".into(),
                ));
            }
            evaluate(
                &reference,
                &est,
                &metrics,
                report,
                out.as_deref(),
                weights.as_deref(),
                seed,
            )
        }
        Command::Bench {
            weights,
            seconds,
            mode,
            seed,
        } => {
            if !(seconds > 0.0 && seconds.is_finite()) {
                return Err(Failure::Usage("--seconds must be positive".into()));
            }
            let frn = match weights {
                Some(p) => Frn::from_archive(&load_weights(&p)?)?,
                None => Frn::from_archive(&random_archive(&FrnConfig::default(), seed)?)?,
            };
            let report = benchmark_rtf(Arc::new(frn), seconds, mode.into())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?
            );
            Ok(())
        }
        Command::GenWeights {
            seed,
            out,
            preset,
            encoder_cell,
        } => {
            let mut cfg = match preset {
                Preset::Default => FrnConfig::default(),
                Preset::Tiny => FrnConfig::tiny(),
            };
            if let Some(cell) = encoder_cell {
                cfg.encoder_cell = match cell {
                    CellArg::Gru => RnnCell::Gru,
                    CellArg::Lstm => RnnCell::Lstm,
                };
            }
            let archive = random_archive(&cfg, seed)?;
            save_weights(&archive, &out)?;
            println!(
                "{}",
                json!({
                    "out": out,
                    "seed": seed,
                    "param_count": archive.param_count(),
                    "sha256": sha256_file(&out)?,
                })
            );
            Ok(())
        }
        Command::Parity {
            weights,
            vectors,
            export,
            seed,
            frames,
        } => {
            let frn = Frn::from_archive(&load_weights(&weights)?)?;
            if export {
                export_parity_vectors(&frn, seed, frames)?.save(&vectors)?;
                println!(
                    "{}",
                    json!({"out": vectors, "sha256": sha256_file(&vectors)?})
                );
                return Ok(());
            }
            let report = replay_parity(&frn, &ParityVectors::load(&vectors)?)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?
            );
            if report.passed {
                Ok(())
            } else {
                Err(anyhow!("parity tolerance exceeded").into())
            }
        }
        Command::TraceStats { trace } => trace_stats(&trace),
    }
}

/// A single WAV, or the sorted `.wav` files of a directory.
fn list_files(path: &Path, ext: &str) -> anyhow::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case(ext)))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .{ext} files in {}", path.display());
    }
    Ok(files)
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn simulate(
    input: &Path,
    out: &Path,
    chain: Option<MarkovChain>,
    trace_path: Option<&Path>,
    packet_size: PacketSize,
    seed: u64,
) -> Result<(), Failure> {
    let files = list_files(input, "wav")?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let recorded = match trace_path {
        Some(p) => Some(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let (mut lost_total, mut packets_total) = (0usize, 0usize);
    for file in &files {
        let file_seed: u64 = rng.random();
        let size = match packet_size {
            PacketSize::Fixed(n) => n,
            PacketSize::Random => lossgen::random_packet_size(&mut rng),
        };
        let x = wav::read_wav(file)?;
        let needed = lossgen::packets_needed(x.len(), size).max(1);
        let trace = match (&recorded, chain) {
            (Some(text), _) => {
                let mut t = LossTrace::parse(text, size)?;
                if t.len() < needed {
                    return Err(frn::Error::TraceUnderrun {
                        needed,
                        available: t.len(),
                    }
                    .into());
                }
                t.lost.truncate(needed);
                t
            }
            (None, Some(c)) => lossgen::generate_trace(&c, needed, file_seed, size)?,
            (None, None) => unreachable!("clap requires --chain or --trace"),
        };
        let y = lossgen::packetize_and_apply(&x, &trace)?;
        let stem = file.file_stem().unwrap_or_default().to_string_lossy();
        wav::write_wav(out.join(format!("{stem}.wav")), &y)?;
        lossgen::write_trace_file(&trace, out.join(format!("{stem}.trace.txt")))?;
        let lost = trace.lost.iter().filter(|&&l| l).count();
        lost_total += lost;
        packets_total += trace.len();
        rows.push(BTreeMap::from([
            ("file".to_string(), json!(file_name(file))),
            ("packet_size".to_string(), json!(size)),
            ("packets".to_string(), json!(trace.len())),
            ("loss_rate".to_string(), json!(trace.loss_rate())),
            ("mean_loss_run".to_string(), json!(trace.mean_loss_run())),
        ]));
    }
    let mut m = RunManifest::new("simulate");
    m.seed = Some(seed);
    m.config = json!({
        "chain": chain,
        "trace": trace_path,
        "packet_size": match packet_size {
            PacketSize::Fixed(n) => json!(n),
            PacketSize::Random => json!("random"),
        },
    });
    m.rows = rows;
    m.aggregate
        .insert("loss_rate".into(), lost_total as f64 / packets_total as f64);
    m.aggregate.insert("files".into(), files.len() as f64);
    m.write_json(&out.join("manifest.json"))?;
    println!(
        "{}",
        serde_json::to_string(&m.aggregate).map_err(anyhow::Error::from)?
    );
    Ok(())
}

/// Zero-pads to a whole number of hops covering at least one frame, so
/// every input sample is resynthesized.
fn pad_for_frames(x: &[f32], hop: usize, frame: usize) -> Vec<f32> {
    let len = x.len().max(frame).div_ceil(hop) * hop;
    let mut v = x.to_vec();
    v.resize(len, 0.0);
    v
}

fn conceal_one(frn: &Arc<Frn>, x: &[f32], mode: Mode, streaming: bool) -> frn::Result<Vec<f32>> {
    let cfg = frn.config.stft();
    let padded = pad_for_frames(x, cfg.hop_length, cfg.fft_size);
    let mut y = if streaming {
        let mut stream = Stream::new(frn.clone(), mode)?;
        let mut out = stream.push_samples(&padded)?;
        out.extend(stream.flush());
        out.split_off(stream.latency_offset())
    } else {
        frn.conceal_utterance(&padded, mode)?
    };
    y.truncate(x.len());
    Ok(y)
}

fn conceal(
    input: &Path,
    out: &Path,
    weights: &Path,
    mode: Mode,
    streaming: bool,
) -> Result<(), Failure> {
    let archive = load_weights(weights)?;
    let frn = Arc::new(Frn::from_archive(&archive)?);
    let files = list_files(input, "wav")?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut rows = Vec::new();
    for file in &files {
        let x = wav::read_wav(file)?;
        let y =
            conceal_one(&frn, &x, mode, streaming).with_context(|| file.display().to_string())?;
        wav::write_wav(out.join(file_name(file)), &y)?;
        rows.push(BTreeMap::from([
            ("file".to_string(), json!(file_name(file))),
            ("samples".to_string(), json!(y.len())),
        ]));
    }
    let mut m = RunManifest::new("conceal");
    m.weights_sha256 = Some(sha256_file(weights)?);
    m.config = json!({
        "mode": mode,
        "path": if streaming { "streaming" } else { "batch" },
        "model": frn.config,
    });
    m.rows = rows;
    m.aggregate.insert("files".into(), files.len() as f64);
    m.write_json(&out.join("manifest.json"))?;
    Ok(())
}

fn evaluate(
    reference: &Path,
    est: &Path,
    which: &[MetricArg],
    format: Format,
    out: Option<&Path>,
    weights: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    let refs = list_files(reference, "wav")?;
    let ests = list_files(est, "wav")?;
    let names = |v: &[PathBuf]| v.iter().map(|p| file_name(p)).collect::<Vec<_>>();
    let (ref_names, est_names) = (names(&refs), names(&ests));
    let missing: Vec<String> = ref_names
        .iter()
        .filter(|n| !est_names.contains(n))
        .map(|n| format!("est/{n}"))
        .chain(
            est_names
                .iter()
                .filter(|n| !ref_names.contains(n))
                .map(|n| format!("ref/{n}")),
        )
        .collect();
    if !missing.is_empty() {
        return Err(anyhow!("missing pairs: {}", missing.join(", ")).into());
    }

    let res = ResolutionSet::default();
    let lsd_cfg = LsdConfig::default();
    let mut rows = Vec::new();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for name in &ref_names {
        let load = |dir: &Path| -> anyhow::Result<Vec<f64>> {
            let path = if dir.is_file() {
                dir.to_path_buf()
            } else {
                dir.join(name)
            };
            Ok(wav::read_wav(&path)?.into_iter().map(f64::from).collect())
        };
        let (r, e) = (load(reference)?, load(est)?);
        let mut row = BTreeMap::from([("file".to_string(), json!(name))]);
        for m in which {
            let (key, value) = match m {
                MetricArg::Lsd => ("lsd", metrics::lsd(&r, &e, &lsd_cfg)),
                MetricArg::Mrstft => ("mrstft", metrics::mr_stft_loss(&e, &r, &res, DEFAULT_ALPHA)),
            };
            let value = value.with_context(|| name.clone())?;
            *sums.entry(key.into()).or_default() += value;
            row.insert(key.into(), json!(value));
        }
        rows.push(row);
    }

    let mut m = RunManifest::new("evaluate");
    m.seed = seed;
    let mut model = Value::Null;
    if let Some(w) = weights {
        m.weights_sha256 = Some(sha256_file(w)?);
        model = json!(FrnConfig::from_metadata(&load_weights(w)?.metadata)?);
    }
    m.config = json!({
        "metrics": which.iter().map(|m| format!("{m:?}").to_lowercase()).collect::<Vec<_>>(),
        "alpha": DEFAULT_ALPHA,
        "resolutions": res,
        "lsd": lsd_cfg,
        "model": model,
    });
    let n = rows.len() as f64;
    m.aggregate = sums.into_iter().map(|(k, v)| (k, v / n)).collect();
    m.aggregate.insert("files".into(), n);
    m.rows = rows;
    let text = m.render(format)?;
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn trace_stats(paths: &[PathBuf]) -> Result<(), Failure> {
    let mut files = Vec::new();
    for p in paths {
        files.extend(list_files(p, "txt")?);
    }
    let mut m = RunManifest::new("trace-stats");
    let (mut lost, mut total, mut rate_sum) = (0usize, 0usize, 0.0);
    for f in &files {
        let t = lossgen::parse_trace_file(f, DEFAULT_PACKET_SIZE)
            .with_context(|| f.display().to_string())?;
        lost += t.lost.iter().filter(|&&l| l).count();
        total += t.len();
        rate_sum += t.loss_rate();
        m.rows.push(BTreeMap::from([
            ("file".to_string(), json!(f.display().to_string())),
            ("packets".to_string(), json!(t.len())),
            ("loss_rate".to_string(), json!(t.loss_rate())),
            ("mean_loss_run".to_string(), json!(t.mean_loss_run())),
        ]));
    }
    m.aggregate.insert("files".into(), files.len() as f64);
    m.aggregate
        .insert("mean_loss_rate".into(), rate_sum / files.len() as f64);
    m.aggregate
        .insert("pooled_loss_rate".into(), lost as f64 / total as f64);
    print!("{}", m.render(Format::Json)?);
    Ok(())
}
