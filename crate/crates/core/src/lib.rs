//! Frame-causal, blind packet loss concealment for 48 kHz speech.
//!
//! The network works on 20 ms STFT frames with 10 ms hop. An encoder
//! enhances each incoming frame, a log-Mel LSTM predictor estimates the
//! current magnitude from the *previous output* frame, and a small causal
//! convolutional joiner fuses the two. No loss mask is needed at inference.
//!
//! ```
//! use std::sync::Arc;
//! use frn::model::{random_archive, Frn, FrnConfig, Mode};
//! use frn::engine::Stream;
//!
//! let archive = random_archive(&FrnConfig::tiny(), 7)?;
//! let frn = Arc::new(Frn::from_archive(&archive)?);
//! let mut stream = Stream::new(frn, Mode::Full)?;
//! let hop = stream.hop();
//! let out = stream.push_chunk(&vec![0.0; hop])?;
//! assert_eq!(out.len(), hop);
//! # Ok::<(), frn::Error>(())
//! ```
//!
//! The accompanying guide lives in `book/` at the repository root.

pub mod dsp;
pub mod engine;
mod error;
pub mod lossgen;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod wav;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/signal.md")]
    mod signal {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/streaming.md")]
    mod streaming {}
    #[doc = include_str!("../../../book/src/loss.md")]
    mod loss {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/weights.md")]
    mod weights {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
