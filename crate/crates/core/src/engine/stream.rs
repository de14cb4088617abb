use std::sync::Arc;

use crate::dsp::Stft;
use crate::error::{Error, Result};
use crate::model::{from_model_frame, to_model_frame, Frn, FrnState, Mode};

/// Hop-by-hop concealment of one audio stream.
///
/// Every `hop` input samples produce `hop` output samples. The very first
/// call only fills the analysis window and returns `hop` zeros (warmup);
/// afterwards the output lags the input by one hop, and output block `k`
/// (for `k >= 1`) equals samples `[(k - 1) * hop, k * hop)` of
/// [`Frn::conceal_utterance`] on the concatenated input. [`Stream::flush`]
/// releases the final overlap-add tail.
#[derive(Debug)]
pub struct Stream {
    frn: Arc<Frn>,
    plan: Stft,
    mode: Mode,
    state: FrnState,
    /// Last `win` input samples, oldest first.
    window: Vec<f64>,
    /// Overlap-add carry for the next hop.
    tail: Vec<f64>,
    /// Unconsumed input when callers push arbitrary block sizes.
    pending: Vec<f32>,
    chunks: u64,
    poisoned: bool,
    re: Vec<f64>,
    im: Vec<f64>,
    frame: Vec<f32>,
    segment: Vec<f64>,
}

impl Stream {
    pub fn new(frn: Arc<Frn>, mode: Mode) -> Result<Self> {
        let cfg = frn.config.stft();
        cfg.validate_half_overlap()?;
        let plan = Stft::new(cfg)?;
        let (win, hop, bins) = (cfg.win_length, cfg.hop_length, cfg.n_bins());
        Ok(Self {
            state: frn.new_state(),
            plan,
            mode,
            window: vec![0.0; win],
            tail: vec![0.0; hop],
            pending: Vec::with_capacity(hop),
            chunks: 0,
            poisoned: false,
            re: vec![0.0; bins],
            im: vec![0.0; bins],
            frame: vec![0.0; frn.config.frame_len()],
            segment: vec![0.0; win],
            frn,
        })
    }

    pub fn hop(&self) -> usize {
        self.plan.config().hop_length
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Output lag relative to the batch path, in samples.
    pub fn latency_offset(&self) -> usize {
        self.hop()
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    pub fn reset(&mut self) {
        self.state = self.frn.new_state();
        self.window.fill(0.0);
        self.tail.fill(0.0);
        self.pending.clear();
        self.chunks = 0;
        self.poisoned = false;
    }

    /// Bytes held by all per-stream buffers; constant once constructed.
    pub fn footprint(&self) -> usize {
        let f64s = self.window.capacity()
            + self.tail.capacity()
            + self.re.capacity()
            + self.im.capacity()
            + self.segment.capacity();
        let f32s = self.pending.capacity() + self.frame.capacity();
        self.state.footprint()
            + f64s * std::mem::size_of::<f64>()
            + f32s * std::mem::size_of::<f32>()
    }

    /// Processes exactly one hop of input and returns one hop of output.
    pub fn push_chunk(&mut self, samples: &[f32]) -> Result<Vec<f32>> {
        let hop = self.hop();
        if samples.len() != hop {
            return Err(Error::ShapeMismatch(format!(
                "push_chunk takes {hop} samples, got {}",
                samples.len()
            )));
        }
        if self.poisoned {
            return Err(Error::StreamPoisoned);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            self.poisoned = true;
            return Err(Error::StreamPoisoned);
        }
        self.window.copy_within(hop.., 0);
        for (w, &s) in self.window[hop..].iter_mut().zip(samples) {
            *w = s as f64;
        }
        let first = self.chunks == 0;
        self.chunks += 1;
        if first {
            return Ok(vec![0.0; hop]);
        }

        self.plan
            .analyze_frame(&self.window, &mut self.re, &mut self.im);
        to_model_frame(&self.re, &self.im, &mut self.frame);
        let y = match self.frn.step(&self.frame, &mut self.state, self.mode) {
            Ok(y) if y.iter().all(|v| v.is_finite()) => y,
            _ => {
                self.poisoned = true;
                return Err(Error::StreamPoisoned);
            }
        };
        from_model_frame(&y, &mut self.re, &mut self.im);
        self.plan
            .synthesize_frame(&self.re, &self.im, &mut self.segment);

        // Sample j of this hop overlaps the previous frame (offset hop + j)
        // unless this is the first analysis frame.
        let second = self.chunks == 2;
        let mut out = Vec::with_capacity(hop);
        for j in 0..hop {
            let acc = self.tail[j] + self.segment[j];
            let env = if second {
                0.0 + self.plan.window_sq(j)
            } else {
                0.0 + self.plan.window_sq(hop + j) + self.plan.window_sq(j)
            };
            out.push(self.plan.normalize(acc, env) as f32);
            self.tail[j] = 0.0 + self.segment[hop + j];
        }
        Ok(out)
    }

    /// Accepts any number of samples, rebuffering into hops. Returns the
    /// output for every complete hop consumed.
    pub fn push_samples(&mut self, samples: &[f32]) -> Result<Vec<f32>> {
        let hop = self.hop();
        let mut out = Vec::with_capacity(samples.len() + hop);
        let mut rest = samples;
        if !self.pending.is_empty() {
            let take = (hop - self.pending.len()).min(rest.len());
            self.pending.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
            if self.pending.len() == hop {
                let chunk = std::mem::take(&mut self.pending);
                out.extend(self.push_chunk(&chunk)?);
                self.pending = chunk;
                self.pending.clear();
            }
        }
        let mut blocks = rest.chunks_exact(hop);
        for block in &mut blocks {
            out.extend(self.push_chunk(block)?);
        }
        self.pending.extend_from_slice(blocks.remainder());
        Ok(out)
    }

    /// Emits the pending overlap-add tail (one hop) that a batch run would
    /// place after the last frame. The stream should be reset afterwards.
    pub fn flush(&mut self) -> Vec<f32> {
        if self.chunks < 2 {
            return Vec::new();
        }
        let hop = self.hop();
        (0..hop)
            .map(|j| {
                let env = 0.0 + self.plan.window_sq(hop + j);
                self.plan.normalize(self.tail[j], env) as f32
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_archive, FrnConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (Arc<Frn>, Vec<f32>) {
        let frn = Arc::new(
            Frn::from_archive(&random_archive(&FrnConfig::tiny(), seed).unwrap()).unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let x = (0..32 * 50).map(|_| rng.random_range(-1.0..1.0)).collect();
        (frn, x)
    }

    #[test]
    fn matches_batch_and_flushes_tail() {
        let (frn, x) = setup(1);
        for mode in [Mode::Full, Mode::EncoderOnly] {
            let batch = frn.conceal_utterance(&x, mode).unwrap();
            let mut s = Stream::new(frn.clone(), mode).unwrap();
            let mut out = Vec::new();
            for chunk in x.chunks(32) {
                out.extend(s.push_chunk(chunk).unwrap());
            }
            assert_eq!(out.len(), x.len());
            assert!(out[..32].iter().all(|&v| v == 0.0));
            out.extend(s.flush());
            assert_eq!(&out[32..], &batch[..]);
        }
    }

    #[test]
    fn arbitrary_chunking_matches_hop_chunking() {
        let (frn, x) = setup(2);
        let mut a = Stream::new(frn.clone(), Mode::Full).unwrap();
        let hop_out: Vec<f32> = x
            .chunks(32)
            .flat_map(|c| a.push_chunk(c).unwrap())
            .collect();
        let mut b = Stream::new(frn, Mode::Full).unwrap();
        let mut odd = Vec::new();
        let mut i = 0;
        for size in [1, 45, 7, 64, 100, 3].iter().cycle() {
            if i >= x.len() {
                break;
            }
            let end = (i + size).min(x.len());
            odd.extend(b.push_samples(&x[i..end]).unwrap());
            i = end;
        }
        assert_eq!(odd, hop_out);
    }

    #[test]
    fn wrong_chunk_size_and_poisoning() {
        let (frn, _) = setup(3);
        let mut s = Stream::new(frn, Mode::Full).unwrap();
        assert!(matches!(
            s.push_chunk(&[0.0; 31]),
            Err(Error::ShapeMismatch(_))
        ));
        let mut bad = vec![0.0; 32];
        bad[3] = f32::INFINITY;
        assert!(matches!(s.push_chunk(&bad), Err(Error::StreamPoisoned)));
        assert!(matches!(
            s.push_chunk(&[0.0; 32]),
            Err(Error::StreamPoisoned)
        ));
        s.reset();
        assert!(s.push_chunk(&[0.0; 32]).is_ok());
    }

    #[test]
    fn reset_reproduces_output() {
        let (frn, x) = setup(4);
        let mut s = Stream::new(frn, Mode::Full).unwrap();
        let a: Vec<f32> = x
            .chunks(32)
            .flat_map(|c| s.push_chunk(c).unwrap())
            .collect();
        s.reset();
        let b: Vec<f32> = x
            .chunks(32)
            .flat_map(|c| s.push_chunk(c).unwrap())
            .collect();
        assert_eq!(a, b);
    }
}
