//! Data-engineering and evaluation toolkit for small-data masked-LM pretraining.
//!
//! The crate is organised as one module per pipeline stage:
//!
//! * [`midi`] parses Standard MIDI Files and converts note timelines to and from
//!   a space-delimited event-code text (`c0n71`, `t18`, ...).
//! * [`unigram`] trains and applies a unigram-LM subword tokenizer.
//! * [`mask`] plans targeted masks (every occurrence of category words, random
//!   fill up to a budget) and computes corpus mask statistics.
//! * [`pack`] builds curriculum stage presets and packs token streams into
//!   fixed-length blocks with deterministic manifests.
//! * [`pll`] scores sentences by masked-LM pseudo-log-likelihood and evaluates
//!   grammatical minimal pairs against any [`pll::LogitProvider`].
//! * [`pipeline`] wires everything together from a TOML config.

pub mod error;
pub mod hashing;
pub mod mask;
pub mod midi;
pub mod pack;
pub mod pipeline;
pub mod pll;
pub mod unigram;

pub use error::{Error, Result};
