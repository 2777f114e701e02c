//! Sender-side embedding.
//!
//! Every payload word's redundant low byte in frame N is overwritten with
//! the informative high byte of the same-position word of frame N-1, held
//! in a one-frame FIFO. The frame keeps its size and its own decoded bits,
//! so the receiver can rebuild a lost frame from its successor at zero
//! added bitrate.

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameForm, SoftbitWord};

/// What to do with the very first frame, which has no predecessor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstFramePolicy {
    /// Embed frame 0 into itself so every emitted frame is embedded-form.
    #[default]
    SelfEmbed,
    /// Emit frame 0 unmodified (canonical) for strict prefix compatibility.
    PassThrough,
}

/// Embed `prev`'s informative bytes into `curr`'s redundant bytes.
///
/// Both frames must be canonical and share one geometry. The output keeps
/// `curr`'s header and decoded bits and is exactly as large as the input.
pub fn embed(prev: &Frame, curr: &Frame) -> Result<Frame> {
    if prev.form() != FrameForm::Canonical || curr.form() != FrameForm::Canonical {
        return Err(Error::NotCanonical);
    }
    if prev.header().len() != curr.header().len() || prev.payload().len() != curr.payload().len() {
        return Err(Error::ConfigMismatch(format!(
            "embed needs identical geometry, got {}+{} words vs {}+{} words",
            prev.header().len() / 2,
            prev.payload().len(),
            curr.header().len() / 2,
            curr.payload().len()
        )));
    }
    let payload = curr
        .payload()
        .iter()
        .zip(prev.payload())
        .map(|(c, p)| SoftbitWord::new(c.hi, p.hi))
        .collect();
    Ok(Frame::from_valid_parts(curr.header().to_vec(), payload))
}

/// One-frame FIFO driving [`embed`] over a live stream.
#[derive(Debug, Clone, Default)]
pub struct Embedder {
    previous: Option<Frame>,
    policy: FirstFramePolicy,
}

impl Embedder {
    pub fn new(policy: FirstFramePolicy) -> Self {
        Self {
            previous: None,
            policy,
        }
    }

    /// Feed the next canonical frame; returns the frame to transmit.
    pub fn push(&mut self, frame: Frame) -> Result<Frame> {
        if frame.form() != FrameForm::Canonical {
            return Err(Error::NotCanonical);
        }
        let out = match &self.previous {
            Some(prev) => embed(prev, &frame)?,
            None => match self.policy {
                FirstFramePolicy::SelfEmbed => embed(&frame, &frame)?,
                FirstFramePolicy::PassThrough => frame.clone(),
            },
        };
        self.previous = Some(frame);
        Ok(out)
    }
}

/// Embed a whole canonical stream.
pub fn process_stream(frames: &[Frame], policy: FirstFramePolicy) -> Result<Vec<Frame>> {
    if frames.is_empty() {
        return Err(Error::EmptyStream);
    }
    let mut embedder = Embedder::new(policy);
    frames.iter().map(|f| embedder.push(f.clone())).collect()
}
