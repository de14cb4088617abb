//! Packet-loss simulation with a two-state Markov chain.
//!
//! State `N` (received) stays in `N` with probability `p_n`; state `L`
//! (lost) stays in `L` with probability `p_l`. The stationary loss rate is
//! `(1 - p_n) / (2 - p_n - p_l)`.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Packet sizes (in samples) used for randomized packetization.
pub const PACKET_SIZES: [usize; 5] = [256, 512, 768, 1024, 1536];

/// 20 ms at 48 kHz.
pub const DEFAULT_PACKET_SIZE: usize = 960;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovChain {
    pub p_n: f64,
    pub p_l: f64,
}

impl MarkovChain {
    pub fn new(p_n: f64, p_l: f64) -> Result<Self> {
        let chain = Self { p_n, p_l };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason| {
            Err(Error::InvalidChain {
                p_n: self.p_n,
                p_l: self.p_l,
                reason,
            })
        };
        if !(0.0..=1.0).contains(&self.p_n) || !(0.0..=1.0).contains(&self.p_l) {
            return bad("probabilities must lie in [0, 1]");
        }
        if self.p_n == 1.0 && self.p_l == 1.0 {
            return bad("both states absorbing");
        }
        Ok(())
    }

    /// Stationary probability of the loss state.
    pub fn expected_loss_rate(&self) -> Result<f64> {
        self.validate()?;
        Ok((1.0 - self.p_n) / (2.0 - self.p_n - self.p_l))
    }

    /// Expected length of a run of consecutive losses.
    pub fn expected_loss_run(&self) -> f64 {
        1.0 / (1.0 - self.p_l)
    }

    /// The four chains used for dataset generation, as `(p_n, p_l)`.
    pub fn table() -> [MarkovChain; 4] {
        [
            MarkovChain { p_n: 0.9, p_l: 0.1 },
            MarkovChain { p_n: 0.9, p_l: 0.5 },
            MarkovChain { p_n: 0.5, p_l: 0.1 },
            MarkovChain { p_n: 0.5, p_l: 0.5 },
        ]
    }
}

pub fn expected_loss_rate(chain: &MarkovChain) -> Result<f64> {
    chain.expected_loss_rate()
}

/// Per-packet loss flags (`true` = lost) and the packet length in samples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossTrace {
    pub lost: Vec<bool>,
    pub packet_size: usize,
}

impl LossTrace {
    pub fn new(lost: Vec<bool>, packet_size: usize) -> Result<Self> {
        if lost.is_empty() {
            return Err(Error::InvalidConfig("loss trace must not be empty".into()));
        }
        if packet_size == 0 {
            return Err(Error::InvalidConfig("packet size must be positive".into()));
        }
        Ok(Self { lost, packet_size })
    }

    pub fn len(&self) -> usize {
        self.lost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lost.is_empty()
    }

    pub fn loss_rate(&self) -> f64 {
        self.lost.iter().filter(|&&l| l).count() as f64 / self.lost.len() as f64
    }

    /// Lengths of maximal runs of lost packets.
    pub fn loss_runs(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = 0;
        for &l in &self.lost {
            if l {
                current += 1;
            } else if current > 0 {
                runs.push(current);
                current = 0;
            }
        }
        if current > 0 {
            runs.push(current);
        }
        runs
    }

    pub fn mean_loss_run(&self) -> f64 {
        let runs = self.loss_runs();
        if runs.is_empty() {
            0.0
        } else {
            runs.iter().sum::<usize>() as f64 / runs.len() as f64
        }
    }

    /// One `0`/`1` token per line.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.lost.len() * 2);
        for &l in &self.lost {
            s.push(if l { '1' } else { '0' });
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str, packet_size: usize) -> Result<Self> {
        let mut lost = Vec::new();
        for (i, line) in text.lines().enumerate() {
            match line.trim() {
                "0" => lost.push(false),
                "1" => lost.push(true),
                "" if i + 1 == text.lines().count() => {}
                other => {
                    return Err(Error::TraceParse {
                        line: i + 1,
                        message: format!("expected 0 or 1, found {other:?}"),
                    })
                }
            }
        }
        if lost.is_empty() {
            return Err(Error::TraceParse {
                line: 0,
                message: "empty trace".into(),
            });
        }
        Self::new(lost, packet_size)
    }
}

/// Samples a loss trace. The first state is drawn from the stationary
/// distribution.
pub fn generate_trace(
    chain: &MarkovChain,
    n_packets: usize,
    seed: u64,
    packet_size: usize,
) -> Result<LossTrace> {
    let stationary = chain.expected_loss_rate()?;
    if n_packets == 0 {
        return Err(Error::InvalidConfig("n_packets must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lost = Vec::with_capacity(n_packets);
    let mut state = rng.random_bool(stationary);
    lost.push(state);
    for _ in 1..n_packets {
        let stay = if state { chain.p_l } else { chain.p_n };
        if !rng.random_bool(stay) {
            state = !state;
        }
        lost.push(state);
    }
    LossTrace::new(lost, packet_size)
}

/// Draws one packet size uniformly from [`PACKET_SIZES`].
pub fn random_packet_size<R: Rng + ?Sized>(rng: &mut R) -> usize {
    PACKET_SIZES[rng.random_range(0..PACKET_SIZES.len())]
}

pub fn random_packet_size_seeded(seed: u64) -> usize {
    random_packet_size(&mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn packets_needed(n_samples: usize, packet_size: usize) -> usize {
    n_samples.div_ceil(packet_size)
}

/// Zeroes the samples of every lost packet. A partial final packet follows
/// its trace bit.
pub fn packetize_and_apply(signal: &[f32], trace: &LossTrace) -> Result<Vec<f32>> {
    let needed = packets_needed(signal.len(), trace.packet_size);
    if trace.lost.len() < needed {
        return Err(Error::TraceUnderrun {
            needed,
            available: trace.lost.len(),
        });
    }
    let mut out = signal.to_vec();
    for (chunk, &lost) in out.chunks_mut(trace.packet_size).zip(&trace.lost) {
        if lost {
            chunk.fill(0.0);
        }
    }
    Ok(out)
}

pub fn parse_trace_file(path: impl AsRef<Path>, packet_size: usize) -> Result<LossTrace> {
    LossTrace::parse(&fs::read_to_string(path)?, packet_size)
}

pub fn write_trace_file(trace: &LossTrace, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, trace.to_text())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_rates() {
        let expected = [0.10, 1.0 / 6.0, 0.357, 0.50];
        for (chain, e) in MarkovChain::table().iter().zip(expected) {
            assert!((chain.expected_loss_rate().unwrap() - e).abs() < 1e-3);
        }
        assert_eq!(
            MarkovChain::new(1.0, 0.0)
                .unwrap()
                .expected_loss_rate()
                .unwrap(),
            0.0
        );
        assert!(MarkovChain::new(1.0, 1.0).is_err());
        assert!(MarkovChain::new(1.1, 0.0).is_err());
    }

    #[test]
    fn generation_is_seeded() {
        let chain = MarkovChain::new(0.9, 0.5).unwrap();
        let a = generate_trace(&chain, 1000, 3, 960).unwrap();
        assert_eq!(a, generate_trace(&chain, 1000, 3, 960).unwrap());
        assert_ne!(a, generate_trace(&chain, 1000, 4, 960).unwrap());
        assert!(generate_trace(&chain, 0, 3, 960).is_err());
    }

    #[test]
    fn absorbing_non_loss_state_never_loses() {
        let t = generate_trace(&MarkovChain::new(1.0, 0.0).unwrap(), 10_000, 1, 960).unwrap();
        assert_eq!(t.loss_rate(), 0.0);
    }

    #[test]
    fn run_statistics() {
        let t = LossTrace::new(
            vec![true, true, false, true, false, false, true, true, true],
            1,
        )
        .unwrap();
        assert_eq!(t.loss_runs(), vec![2, 1, 3]);
        assert_eq!(t.mean_loss_run(), 2.0);
    }

    #[test]
    fn zero_fill_cases() {
        let x: Vec<f32> = (1..=10).map(|v| v as f32).collect();
        let keep = LossTrace::new(vec![false; 4], 3).unwrap();
        assert_eq!(packetize_and_apply(&x, &keep).unwrap(), x);
        let drop = LossTrace::new(vec![true; 4], 3).unwrap();
        assert!(packetize_and_apply(&x, &drop)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));

        // Partial last packet follows its bit.
        let last = LossTrace::new(vec![false, false, false, true], 3).unwrap();
        let y = packetize_and_apply(&x, &last).unwrap();
        assert_eq!(&y[..9], &x[..9]);
        assert_eq!(y[9], 0.0);

        let short = LossTrace::new(vec![false; 3], 3).unwrap();
        assert!(matches!(
            packetize_and_apply(&x, &short),
            Err(Error::TraceUnderrun {
                needed: 4,
                available: 3
            })
        ));
        assert_eq!(packets_needed(144_000, 960), 150);
    }

    #[test]
    fn parse_text() {
        let t = LossTrace::parse("0\n1\n0\n", 960).unwrap();
        assert_eq!(t.lost, vec![false, true, false]);
        assert_eq!(t.packet_size, 960);

        let err = LossTrace::parse("0\n0\n1\n0\n2\n0\n", 960).unwrap_err();
        match err {
            Error::TraceParse { line, .. } => assert_eq!(line, 5),
            e => panic!("unexpected {e}"),
        }
        assert!(LossTrace::parse("", 960).is_err());
        assert!(LossTrace::parse("0\n\n1\n", 960).is_err());
    }

    #[test]
    fn trace_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        let t = generate_trace(&MarkovChain::new(0.5, 0.5).unwrap(), 200, 9, 512).unwrap();
        write_trace_file(&t, &path).unwrap();
        assert_eq!(parse_trace_file(&path, 512).unwrap(), t);
    }

    #[test]
    fn packet_sizes_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            let s = random_packet_size(&mut rng);
            counts[PACKET_SIZES.iter().position(|&p| p == s).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.2).abs() < 0.01);
        }
        assert_eq!(random_packet_size_seeded(3), random_packet_size_seeded(3));
    }

    proptest! {
        #[test]
        fn zero_fill_is_idempotent_and_passes_received_packets(
            signal in prop::collection::vec(-1.0f32..1.0, 1..400),
            bits in prop::collection::vec(any::<bool>(), 400),
            packet in 1usize..64,
        ) {
            let n = packets_needed(signal.len(), packet);
            let trace = LossTrace::new(bits[..n].to_vec(), packet).unwrap();
            let once = packetize_and_apply(&signal, &trace).unwrap();
            let twice = packetize_and_apply(&once, &trace).unwrap();
            prop_assert_eq!(&once, &twice);
            for (i, (a, b)) in once.iter().zip(&signal).enumerate() {
                if !trace.lost[i / packet] {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
