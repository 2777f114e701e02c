//! Softbit serial frame format.
//!
//! Each payload bit occupies a 16-bit word: an informative high byte
//! (`0x7F` for 1, `0x81` for 0) and a redundant low byte that in canonical
//! form is fully determined by the high byte (`0x00` for 1, `0xFF` for 0).
//! A frame is a fixed-size record of opaque header bytes followed by a
//! fixed number of payload words; streams are plain concatenations of
//! frames with the high byte written first in every word.
//!
//! The redundant low byte is the carrier exploited by the embedding and
//! recovery operations in [`crate::interleave`] and [`crate::conceal`]:
//! after embedding it holds the previous frame's high byte instead of its
//! canonical value. Everything here therefore decodes from high bytes
//! only and round-trips low bytes verbatim.

use crate::error::{Error, Result};

/// Informative high byte encoding bit 1.
pub const HI_ONE: u8 = 0x7F;
/// Informative high byte encoding bit 0.
pub const HI_ZERO: u8 = 0x81;
/// Canonical redundant low byte paired with [`HI_ONE`].
pub const LO_ONE: u8 = 0x00;
/// Canonical redundant low byte paired with [`HI_ZERO`].
pub const LO_ZERO: u8 = 0xFF;

/// One payload bit as a (high, low) byte pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SoftbitWord {
    pub hi: u8,
    pub lo: u8,
}

impl SoftbitWord {
    pub fn new(hi: u8, lo: u8) -> Self {
        Self { hi, lo }
    }

    /// True when the high byte is inside the softbit alphabet.
    pub fn has_valid_hi(&self) -> bool {
        self.hi == HI_ONE || self.hi == HI_ZERO
    }

    /// True when the low byte matches the canonical value for the high byte.
    pub fn is_canonical(&self) -> bool {
        matches!((self.hi, self.lo), (HI_ONE, LO_ONE) | (HI_ZERO, LO_ZERO))
    }
}

/// Encode one bit as a canonical softbit word.
pub fn encode_bit(bit: bool) -> SoftbitWord {
    if bit {
        SoftbitWord::new(HI_ONE, LO_ONE)
    } else {
        SoftbitWord::new(HI_ZERO, LO_ZERO)
    }
}

/// Decode a word to its bit. Only the high byte is read; the low byte may
/// be a piggyback carrier and is ignored.
pub fn decode_word(word: SoftbitWord) -> Result<bool> {
    match word.hi {
        HI_ONE => Ok(true),
        HI_ZERO => Ok(false),
        other => Err(Error::InvalidSoftbit(other)),
    }
}

/// Canonical low byte for a given high byte.
pub fn canonical_lo(hi: u8) -> Result<u8> {
    match hi {
        HI_ONE => Ok(LO_ONE),
        HI_ZERO => Ok(LO_ZERO),
        other => Err(Error::InvalidSoftbit(other)),
    }
}

/// Stream geometry: how many header and payload words each frame carries.
///
/// Defaults describe the 6.60 kbps mode: 3 header words plus 132 payload
/// words, 270 bytes per frame, 20 ms per frame. Geometry is always supplied
/// externally (flags or config file), never inferred from file content.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamConfig {
    pub header_words: usize,
    pub payload_words: usize,
    pub frame_duration_ms: u32,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            header_words: 3,
            payload_words: 132,
            frame_duration_ms: 20,
        }
    }
}

impl StreamConfig {
    pub fn new(header_words: usize, payload_words: usize, frame_duration_ms: u32) -> Result<Self> {
        let config = Self {
            header_words,
            payload_words,
            frame_duration_ms,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.payload_words == 0 {
            return Err(Error::InvalidConfig(
                "payload_words must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Header size in bytes.
    pub fn header_bytes(&self) -> usize {
        2 * self.header_words
    }

    /// Total frame size in bytes.
    pub fn frame_bytes(&self) -> usize {
        2 * (self.header_words + self.payload_words)
    }
}

/// Classification of a frame's low bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameForm {
    /// Every low byte carries its canonical value.
    Canonical,
    /// Every low byte carries a high byte from the previous frame.
    Embedded,
    /// Mixed or foreign low bytes; treated as corruption.
    Unknown,
}

/// Classify a payload from its low bytes. The verdict is per-frame and
/// strict: a single nonconforming word makes the whole frame `Unknown`.
pub(crate) fn classify_payload(payload: &[SoftbitWord]) -> FrameForm {
    if payload.iter().all(SoftbitWord::is_canonical) {
        FrameForm::Canonical
    } else if payload
        .iter()
        .all(|w| w.lo == HI_ONE || w.lo == HI_ZERO)
    {
        FrameForm::Embedded
    } else {
        FrameForm::Unknown
    }
}

/// A fixed-size frame: opaque header bytes plus softbit payload words.
///
/// Construction validates every payload high byte, so a `Frame` value
/// always decodes cleanly; the stored form is derived from the payload at
/// construction and frames are immutable afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    header: Vec<u8>,
    payload: Vec<SoftbitWord>,
    form: FrameForm,
}

impl Frame {
    /// Build a frame from raw parts, validating the payload alphabet.
    pub fn new(header: Vec<u8>, payload: Vec<SoftbitWord>) -> Result<Self> {
        if payload.is_empty() {
            return Err(Error::ConfigMismatch(
                "frame payload must contain at least one word".into(),
            ));
        }
        for (word, w) in payload.iter().enumerate() {
            if !w.has_valid_hi() {
                return Err(Error::InvalidSoftbitAt {
                    hi: w.hi,
                    frame: 0,
                    word,
                });
            }
        }
        Ok(Self::from_valid_parts(header, payload))
    }

    /// Construction path for operations that only produce alphabet-valid
    /// words (embed, recover, normalize).
    pub(crate) fn from_valid_parts(header: Vec<u8>, payload: Vec<SoftbitWord>) -> Self {
        debug_assert!(payload.iter().all(SoftbitWord::has_valid_hi));
        let form = classify_payload(&payload);
        Self {
            header,
            payload,
            form,
        }
    }

    /// Build a canonical frame from packed payload bits, checked against
    /// the stream geometry.
    pub fn from_payload_bits(bits: &BitVector, header: &[u8], config: &StreamConfig) -> Result<Self> {
        if bits.len() != config.payload_words {
            return Err(Error::LengthMismatch {
                expected: config.payload_words,
                found: bits.len(),
            });
        }
        if header.len() != config.header_bytes() {
            return Err(Error::ConfigMismatch(format!(
                "header is {} bytes, geometry expects {}",
                header.len(),
                config.header_bytes()
            )));
        }
        Ok(Self::canonical_from_bits(bits, header.to_vec()))
    }

    /// Build a canonical frame from bits without a geometry check; the
    /// geometry is taken from the inputs.
    pub fn canonical_from_bits(bits: &BitVector, header: Vec<u8>) -> Self {
        let payload = bits.bits().iter().map(|&b| encode_bit(b)).collect();
        Self::from_valid_parts(header, payload)
    }

    pub fn header(&self) -> &[u8] {
        &self.header
    }

    pub fn payload(&self) -> &[SoftbitWord] {
        &self.payload
    }

    pub fn form(&self) -> FrameForm {
        self.form
    }

    /// True when the frame matches the given geometry.
    pub fn matches_config(&self, config: &StreamConfig) -> bool {
        self.header.len() == config.header_bytes() && self.payload.len() == config.payload_words
    }

    /// Pack the payload to bits. Reads high bytes only, so embedded and
    /// canonical frames with the same informative bytes pack identically.
    pub fn payload_bits(&self) -> BitVector {
        self.payload
            .iter()
            .map(|&w| decode_word(w).expect("payload validated at construction"))
            .collect()
    }

    /// Frame size in bytes when serialized.
    pub fn byte_len(&self) -> usize {
        self.header.len() + 2 * self.payload.len()
    }
}

/// Packed payload bits of one frame.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitVector(Vec<bool>);

impl BitVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Elementwise XOR with another vector of the same length.
    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a ^ b)
            .collect())
    }

    /// Number of positions where the two vectors disagree.
    pub fn count_diff(&self, other: &BitVector) -> Result<usize> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .filter(|(a, b)| a != b)
            .count())
    }
}

impl FromIterator<bool> for BitVector {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Split a byte stream into frames at fixed offsets.
///
/// Headers are copied verbatim; payload high bytes are validated and each
/// frame's form is classified. An empty input yields an empty stream.
pub fn parse_stream(data: &[u8], config: &StreamConfig) -> Result<Vec<Frame>> {
    config.validate()?;
    let frame_bytes = config.frame_bytes();
    if !data.len().is_multiple_of(frame_bytes) {
        return Err(Error::TruncatedStream {
            len: data.len(),
            frame_bytes,
        });
    }
    let header_bytes = config.header_bytes();
    let mut frames = Vec::with_capacity(data.len() / frame_bytes);
    for (index, chunk) in data.chunks_exact(frame_bytes).enumerate() {
        let header = chunk[..header_bytes].to_vec();
        let payload = chunk[header_bytes..]
            .chunks_exact(2)
            .map(|pair| SoftbitWord::new(pair[0], pair[1]))
            .collect();
        let frame = Frame::new(header, payload).map_err(|e| e.in_frame(index))?;
        frames.push(frame);
    }
    Ok(frames)
}

/// Serialize frames back to bytes; the exact inverse of [`parse_stream`].
pub fn serialize_stream(frames: &[Frame], config: &StreamConfig) -> Result<Vec<u8>> {
    config.validate()?;
    let mut out = Vec::with_capacity(frames.len() * config.frame_bytes());
    for (index, frame) in frames.iter().enumerate() {
        if !frame.matches_config(config) {
            return Err(Error::ConfigMismatch(format!(
                "frame {index} has {} header bytes and {} payload words, geometry expects {} and {}",
                frame.header.len(),
                frame.payload.len(),
                config.header_bytes(),
                config.payload_words
            )));
        }
        out.extend_from_slice(&frame.header);
        for w in &frame.payload {
            out.push(w.hi);
            out.push(w.lo);
        }
    }
    Ok(out)
}
