//! Frame loss concealment toolkit for softbit serial speech streams.
//!
//! Speech codecs that ship frames in the softbit serial format spend two
//! bytes per payload bit: an informative byte and a fully redundant one.
//! This crate treats the redundant byte as free transport: the sender
//! copies frame N-1's informative bytes into frame N's redundant bytes
//! ([`interleave`]), and the receiver rebuilds a lost frame bit-exactly
//! from its successor, at zero added bitrate ([`conceal`]). A burst-loss
//! channel simulator ([`channel`]), an XOR-parity FEC baseline ([`fec`])
//! and an experiment harness with CSV output ([`sweep`]) reproduce the
//! whole evaluation pipeline end to end.
//!
//! All frame types are immutable values; the per-stream operations are
//! sequential folds, and distinct streams can be processed concurrently.

pub mod channel;
pub mod conceal;
pub mod config;
pub mod error;
pub mod fec;
pub mod frame;
pub mod interleave;
pub mod sweep;

pub use error::{Error, Result};
pub use frame::{BitVector, Frame, FrameForm, SoftbitWord, StreamConfig};
