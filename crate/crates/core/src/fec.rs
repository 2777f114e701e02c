//! XOR-parity forward error correction baseline.
//!
//! One parity frame is appended after every 4 data frames; any single data
//! loss within a 4+1 group is rebuilt as the XOR of the parity payload
//! with the three surviving data payloads. Parity is computed over packed
//! payload bits and re-encoded as canonical softbits, so every transmitted
//! frame stays format-valid. A tail shorter than 4 frames forms a smaller
//! final group (1-4 data frames plus parity). Group alignment is purely
//! positional; the simulator delivers slots in order with known indices.

use crate::conceal::{normalize, RecoveryReport, ReceivedSlot};
use crate::error::{Error, Result};
use crate::frame::{BitVector, Frame, FrameForm, StreamConfig};

/// Data frames per parity group.
pub const GROUP_DATA_FRAMES: usize = 4;

/// One encode-side group: up to 4 data payloads and their XOR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityGroup {
    pub data: Vec<BitVector>,
    pub parity: BitVector,
    pub group_index: usize,
}

impl ParityGroup {
    /// Build a group from 1-4 equally long payloads; parity is their XOR.
    pub fn from_data(data: Vec<BitVector>, group_index: usize) -> Result<Self> {
        if data.is_empty() || data.len() > GROUP_DATA_FRAMES {
            return Err(Error::LayoutMismatch(format!(
                "a parity group holds 1 to {GROUP_DATA_FRAMES} data frames, got {}",
                data.len()
            )));
        }
        let mut parity = data[0].clone();
        for bits in &data[1..] {
            parity = parity.xor(bits)?;
        }
        Ok(Self {
            data,
            parity,
            group_index,
        })
    }
}

/// Insert a parity frame after every group of 4 data frames.
///
/// The parity frame copies the last data header of its group. Output
/// length is `n + ceil(n / 4)`.
pub fn fec_encode(frames: &[Frame]) -> Result<Vec<Frame>> {
    if frames.is_empty() {
        return Err(Error::EmptyStream);
    }
    if frames.iter().any(|f| f.form() != FrameForm::Canonical) {
        return Err(Error::NotCanonical);
    }
    let mut out = Vec::with_capacity(frames.len() + frames.len().div_ceil(GROUP_DATA_FRAMES));
    for (group_index, chunk) in frames.chunks(GROUP_DATA_FRAMES).enumerate() {
        let group = ParityGroup::from_data(
            chunk.iter().map(Frame::payload_bits).collect(),
            group_index,
        )?;
        out.extend(chunk.iter().cloned());
        let header = chunk.last().expect("chunks are non-empty").header().to_vec();
        out.push(Frame::canonical_from_bits(&group.parity, header));
    }
    Ok(out)
}

/// Number of frames on the wire for `n` data frames.
pub fn encoded_len(data_frames: usize) -> usize {
    data_frames + data_frames.div_ceil(GROUP_DATA_FRAMES)
}

/// Data-frame count recovered from an encoded length, if the length is a
/// valid 4+1 group layout.
fn data_len(encoded: usize) -> Result<usize> {
    let full_groups = encoded / (GROUP_DATA_FRAMES + 1);
    let remainder = encoded % (GROUP_DATA_FRAMES + 1);
    if remainder == 1 {
        return Err(Error::LayoutMismatch(format!(
            "{encoded} slots cannot be split into 4+1 groups with a 1-4 frame tail"
        )));
    }
    let tail_data = remainder.saturating_sub(1);
    Ok(full_groups * GROUP_DATA_FRAMES + tail_data)
}

/// Decode a received timeline of an encoded stream back to data frames.
///
/// Per group: no data loss passes frames through; exactly one data loss
/// with the parity received is rebuilt bit-exactly (header copied from
/// the parity frame); anything else conceals the lost data frames by
/// repeating the last emitted frame. Lost parity frames are counted as
/// unrecovered but never affect the output. The report covers every slot
/// of the encoded stream, including parity.
pub fn fec_decode(
    slots: &[ReceivedSlot],
    config: &StreamConfig,
) -> Result<(Vec<Frame>, RecoveryReport)> {
    config.validate()?;
    if slots.is_empty() {
        return Err(Error::EmptyStream);
    }
    for (i, slot) in slots.iter().enumerate() {
        let expected = slots[0].seq + i;
        if slot.seq != expected {
            return Err(Error::SequenceGap {
                expected,
                found: slot.seq,
            });
        }
        if let Some(frame) = slot.frame() {
            if !frame.matches_config(config) {
                return Err(Error::ConfigMismatch(format!(
                    "received frame at seq {} does not match the stream geometry",
                    slot.seq
                )));
            }
        }
    }
    let expected_data = data_len(slots.len())?;

    let mut out: Vec<Frame> = Vec::with_capacity(expected_data);
    let mut report = RecoveryReport::new(slots.len());
    let mut recovered_slots = vec![false; slots.len()];
    let mut offset = 0usize;

    while offset < slots.len() {
        let group_len = (slots.len() - offset).min(GROUP_DATA_FRAMES + 1);
        let group = &slots[offset..offset + group_len];
        let (data_slots, parity_slot) = group.split_at(group_len - 1);
        let parity_slot = &parity_slot[0];

        let lost_data: Vec<usize> = data_slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_lost())
            .map(|(i, _)| i)
            .collect();
        report.lost += lost_data.len();

        let rebuilt = if lost_data.len() == 1 {
            parity_slot.frame().map(|parity| {
                let mut bits = parity.payload_bits();
                for slot in data_slots.iter().filter(|s| !s.is_lost()) {
                    bits = bits
                        .xor(&slot.frame().expect("received slot carries a frame").payload_bits())
                        .expect("group frames share one geometry");
                }
                Frame::canonical_from_bits(&bits, parity.header().to_vec())
            })
        } else {
            None
        };

        for (i, slot) in data_slots.iter().enumerate() {
            match slot.frame() {
                Some(frame) => out.push(normalize(frame)),
                None => match &rebuilt {
                    Some(frame) => {
                        out.push(frame.clone());
                        report.recovered_exact += 1;
                        recovered_slots[offset + i] = true;
                    }
                    None => {
                        let filler = out
                            .last()
                            .cloned()
                            .unwrap_or_else(|| leading_filler(slots, config));
                        out.push(filler);
                        report.unrecovered += 1;
                    }
                },
            }
        }
        if parity_slot.is_lost() {
            report.lost += 1;
            report.unrecovered += 1;
        }
        offset += group_len;
    }

    record_bursts(slots, &recovered_slots, &mut report);
    debug_assert!(report.is_consistent());
    debug_assert_eq!(out.len(), expected_data);
    Ok((out, report))
}

/// Burst histogram over the encoded timeline: each maximal loss run maps
/// to how many of its slots were rebuilt bit-exactly.
fn record_bursts(slots: &[ReceivedSlot], recovered: &[bool], report: &mut RecoveryReport) {
    let mut run = 0usize;
    let mut run_recovered = 0usize;
    for (i, slot) in slots.iter().enumerate() {
        if slot.is_lost() {
            run += 1;
            if recovered[i] {
                run_recovered += 1;
            }
        } else if run > 0 {
            report.record_burst(run, run_recovered);
            run = 0;
            run_recovered = 0;
        }
    }
    if run > 0 {
        report.record_burst(run, run_recovered);
    }
}

fn leading_filler(slots: &[ReceivedSlot], config: &StreamConfig) -> Frame {
    let header = slots
        .iter()
        .find_map(ReceivedSlot::frame)
        .map(|f| f.header().to_vec())
        .unwrap_or_else(|| vec![0u8; config.header_bytes()]);
    Frame::canonical_from_bits(&BitVector::new(vec![false; config.payload_words]), header)
}
