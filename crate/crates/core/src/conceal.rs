//! Receiver-side processing.
//!
//! Incoming embedded frames are normalized back to canonical form before
//! playout. When frame N-1 was lost and frame N arrives in embedded form,
//! N's low bytes reproduce N-1's informative bytes bit-exactly. When the
//! sender is an unmodified coder (canonical frames), the receiver falls
//! back to repeating the next frame, the common repetition method. The
//! playout model is a fixed one-frame lookahead: the decision for a lost
//! slot depends only on its immediate successor.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::frame::{canonical_lo, classify_payload, BitVector, Frame, FrameForm, SoftbitWord, StreamConfig};

/// One slot of the receive timeline: a frame or a loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedSlot {
    pub seq: usize,
    pub status: SlotStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotStatus {
    Received(Frame),
    Lost,
}

impl ReceivedSlot {
    pub fn received(seq: usize, frame: Frame) -> Self {
        Self {
            seq,
            status: SlotStatus::Received(frame),
        }
    }

    pub fn lost(seq: usize) -> Self {
        Self {
            seq,
            status: SlotStatus::Lost,
        }
    }

    pub fn frame(&self) -> Option<&Frame> {
        match &self.status {
            SlotStatus::Received(frame) => Some(frame),
            SlotStatus::Lost => None,
        }
    }

    pub fn is_lost(&self) -> bool {
        matches!(self.status, SlotStatus::Lost)
    }
}

/// Per-session recovery accounting.
///
/// `lost` always splits exactly into `recovered_exact` (rebuilt bit-exactly
/// from the successor's carrier bytes), `concealed_repetition` (replaced by
/// the next frame on canonical streams), and `unrecovered` (mid-burst or
/// end-of-stream losses, concealed by repeating the last emitted frame).
/// `per_burst` maps each observed maximal loss-run length to the number of
/// frames recovered bit-exactly inside runs of that length. `unknown_form`
/// counts received frames whose low bytes fit neither form; they are
/// normalized for playout but never trusted for recovery.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecoveryReport {
    pub total: usize,
    pub lost: usize,
    pub recovered_exact: usize,
    pub concealed_repetition: usize,
    pub unrecovered: usize,
    pub unknown_form: usize,
    pub per_burst: BTreeMap<usize, usize>,
}

impl RecoveryReport {
    pub(crate) fn new(total: usize) -> Self {
        Self {
            total,
            ..Self::default()
        }
    }

    pub(crate) fn record_burst(&mut self, length: usize, recovered: usize) {
        *self.per_burst.entry(length).or_insert(0) += recovered;
    }

    /// Count conservation: every lost frame lands in exactly one bucket.
    pub fn is_consistent(&self) -> bool {
        self.lost == self.recovered_exact + self.concealed_repetition + self.unrecovered
    }

    /// Lost frames that were not rebuilt bit-exactly.
    pub fn residual_frames(&self) -> usize {
        self.lost - self.recovered_exact
    }
}

/// Restore every low byte to its canonical value; idempotent.
pub fn normalize(frame: &Frame) -> Frame {
    let payload = frame
        .payload()
        .iter()
        .map(|w| {
            let lo = canonical_lo(w.hi).expect("payload validated at construction");
            SoftbitWord::new(w.hi, lo)
        })
        .collect();
    Frame::from_valid_parts(frame.header().to_vec(), payload)
}

/// Rebuild the previous frame from an embedded frame's low bytes.
///
/// The carrier holds only payload bytes, so the lost frame's header is
/// reconstructed by copying the current frame's header (headers are
/// constant per stream under a fixed mode).
pub fn recover_previous(curr: &Frame) -> Result<Frame> {
    if curr.form() != FrameForm::Embedded {
        return Err(Error::NotEmbedded);
    }
    let payload = curr
        .payload()
        .iter()
        .map(|w| {
            let lo = canonical_lo(w.lo).expect("embedded form implies carrier alphabet");
            SoftbitWord::new(w.lo, lo)
        })
        .collect();
    Ok(Frame::from_valid_parts(curr.header().to_vec(), payload))
}

/// Classify a frame's low bytes, independently of the form cached at
/// construction.
pub fn detect_form(frame: &Frame) -> FrameForm {
    classify_payload(frame.payload())
}

/// Conceal a slot timeline into a gapless canonical stream.
///
/// Every received frame is normalized and emitted at its slot. For a lost
/// slot the one-frame lookahead decides: an embedded successor rebuilds it
/// bit-exactly, a canonical successor stands in for it (repetition), and
/// anything else (another loss, end of stream, corrupt successor) repeats
/// the last emitted frame. Leading losses with nothing emitted yet are
/// padded with an all-zero-bit frame so the output stays time-aligned.
pub fn conceal_stream(
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

    let mut out: Vec<Frame> = Vec::with_capacity(slots.len());
    let mut report = RecoveryReport::new(slots.len());
    let mut burst_len = 0usize;
    let mut burst_recovered = 0usize;

    for (i, slot) in slots.iter().enumerate() {
        match &slot.status {
            SlotStatus::Received(frame) => {
                if detect_form(frame) == FrameForm::Unknown {
                    report.unknown_form += 1;
                }
                out.push(normalize(frame));
                if burst_len > 0 {
                    report.record_burst(burst_len, burst_recovered);
                    burst_len = 0;
                    burst_recovered = 0;
                }
            }
            SlotStatus::Lost => {
                report.lost += 1;
                burst_len += 1;
                let successor = slots.get(i + 1).and_then(ReceivedSlot::frame);
                match successor.map(|f| (f, f.form())) {
                    Some((next, FrameForm::Embedded)) => {
                        out.push(recover_previous(next)?);
                        report.recovered_exact += 1;
                        burst_recovered += 1;
                    }
                    Some((next, FrameForm::Canonical)) => {
                        out.push(normalize(next));
                        report.concealed_repetition += 1;
                    }
                    _ => {
                        // mid-burst, end of stream, or corrupt successor
                        let filler = out
                            .last()
                            .cloned()
                            .unwrap_or_else(|| leading_filler(slots, config));
                        out.push(filler);
                        report.unrecovered += 1;
                    }
                }
            }
        }
    }
    if burst_len > 0 {
        report.record_burst(burst_len, burst_recovered);
    }

    debug_assert!(report.is_consistent());
    debug_assert_eq!(out.len(), slots.len());
    Ok((out, report))
}

/// Stand-in for losses before anything was emitted: all-zero payload bits
/// under the session header (taken from the first received frame, or zero
/// bytes if the whole session was lost).
fn leading_filler(slots: &[ReceivedSlot], config: &StreamConfig) -> Frame {
    let header = slots
        .iter()
        .find_map(ReceivedSlot::frame)
        .map(|f| f.header().to_vec())
        .unwrap_or_else(|| vec![0u8; config.header_bytes()]);
    let bits = BitVector::new(vec![false; config.payload_words]);
    Frame::canonical_from_bits(&bits, header)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::BitVector;
    use crate::interleave::{embed, process_stream, FirstFramePolicy};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const WORDS: usize = 8;

    fn config() -> StreamConfig {
        StreamConfig::new(1, WORDS, 20).unwrap()
    }

    fn random_frame(rng: &mut ChaCha8Rng) -> Frame {
        let bits: BitVector = (0..WORDS).map(|_| rng.random::<bool>()).collect();
        Frame::canonical_from_bits(&bits, vec![0xC0, 0xC1])
    }

    fn word_frame(pairs: &[(u8, u8)]) -> Frame {
        let payload = pairs.iter().map(|&(hi, lo)| SoftbitWord::new(hi, lo)).collect();
        Frame::new(vec![0xC0, 0xC1], payload).unwrap()
    }

    fn slots_for(frames: &[Frame], lost: &[bool]) -> Vec<ReceivedSlot> {
        frames
            .iter()
            .zip(lost)
            .enumerate()
            .map(|(i, (f, &l))| {
                if l {
                    ReceivedSlot::lost(i)
                } else {
                    ReceivedSlot::received(i, f.clone())
                }
            })
            .collect()
    }

    #[test]
    fn normalize_restores_canonical_lo() {
        let frame = word_frame(&[(0x81, 0x7F), (0x81, 0x81), (0x7F, 0x7F)]);
        let out = normalize(&frame);
        let words: Vec<(u8, u8)> = out.payload().iter().map(|w| (w.hi, w.lo)).collect();
        assert_eq!(words, vec![(0x81, 0xFF), (0x81, 0xFF), (0x7F, 0x00)]);
        assert_eq!(out.form(), FrameForm::Canonical);
    }

    #[test]
    fn normalize_is_idempotent() {
        let frame = word_frame(&[(0x7F, 0x81), (0x81, 0x7F)]);
        let once = normalize(&frame);
        assert_eq!(normalize(&once), once);
    }

    #[test]
    fn recover_previous_inverts_embed_example() {
        let curr = word_frame(&[(0x81, 0x7F), (0x81, 0x81), (0x7F, 0x7F)]);
        let prev = recover_previous(&curr).unwrap();
        let words: Vec<(u8, u8)> = prev.payload().iter().map(|w| (w.hi, w.lo)).collect();
        assert_eq!(words, vec![(0x7F, 0x00), (0x81, 0xFF), (0x7F, 0x00)]);
        assert_eq!(prev.payload_bits(), BitVector::new(vec![true, false, true]));
    }

    #[test]
    fn recover_previous_rejects_canonical() {
        let frame = word_frame(&[(0x7F, 0x00), (0x81, 0xFF)]);
        assert!(matches!(recover_previous(&frame), Err(Error::NotEmbedded)));
    }

    #[test]
    fn detect_form_matches_construction() {
        let canonical = word_frame(&[(0x7F, 0x00)]);
        let embedded = word_frame(&[(0x7F, 0x81)]);
        let unknown = word_frame(&[(0x7F, 0x55)]);
        assert_eq!(detect_form(&canonical), FrameForm::Canonical);
        assert_eq!(detect_form(&embedded), FrameForm::Embedded);
        assert_eq!(detect_form(&unknown), FrameForm::Unknown);
        for f in [&canonical, &embedded, &unknown] {
            assert_eq!(detect_form(f), f.form());
        }
    }

    #[test]
    fn no_loss_is_identity_after_normalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<Frame> = (0..6).map(|_| random_frame(&mut rng)).collect();
        let sent = process_stream(&frames, FirstFramePolicy::SelfEmbed).unwrap();
        let slots = slots_for(&sent, &[false; 6]);
        let (out, report) = conceal_stream(&slots, &config()).unwrap();
        assert_eq!(out, frames);
        assert_eq!(report.lost, 0);
        assert_eq!(report.total, 6);
        assert!(report.per_burst.is_empty());
    }

    #[test]
    fn isolated_loss_recovered_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let frames: Vec<Frame> = (0..3).map(|_| random_frame(&mut rng)).collect();
        let sent = process_stream(&frames, FirstFramePolicy::SelfEmbed).unwrap();
        let slots = slots_for(&sent, &[false, true, false]);
        let (out, report) = conceal_stream(&slots, &config()).unwrap();
        assert_eq!(out[1], frames[1]);
        assert_eq!(report.recovered_exact, 1);
        assert_eq!(report.unrecovered, 0);
        assert_eq!(report.per_burst[&1], 1);
    }

    #[test]
    fn burst_recovers_only_last_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let frames: Vec<Frame> = (0..5).map(|_| random_frame(&mut rng)).collect();
        let sent = process_stream(&frames, FirstFramePolicy::SelfEmbed).unwrap();
        let slots = slots_for(&sent, &[false, true, true, true, false]);
        let (out, report) = conceal_stream(&slots, &config()).unwrap();
        assert_eq!(report.recovered_exact, 1);
        assert_eq!(report.unrecovered, 2);
        assert_eq!(out[3], frames[3]); // last of the run, from frame 4's carrier
        assert_eq!(out[1], frames[0]); // repetition of the last emitted frame
        assert_eq!(out[2], frames[0]);
        assert_eq!(report.per_burst[&3], 1);
    }

    #[test]
    fn end_of_stream_burst_recovers_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let frames: Vec<Frame> = (0..4).map(|_| random_frame(&mut rng)).collect();
        let sent = process_stream(&frames, FirstFramePolicy::SelfEmbed).unwrap();
        let slots = slots_for(&sent, &[false, false, true, true]);
        let (out, report) = conceal_stream(&slots, &config()).unwrap();
        assert_eq!(report.recovered_exact, 0);
        assert_eq!(report.unrecovered, 2);
        assert_eq!(out[2], frames[1]);
        assert_eq!(out[3], frames[1]);
        assert_eq!(report.per_burst[&2], 0);
    }

    #[test]
    fn canonical_stream_concealed_by_repetition() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let frames: Vec<Frame> = (0..4).map(|_| random_frame(&mut rng)).collect();
        let slots = slots_for(&frames, &[false, true, false, false]);
        let (out, report) = conceal_stream(&slots, &config()).unwrap();
        assert_eq!(report.recovered_exact, 0);
        assert_eq!(report.concealed_repetition, 1);
        assert_eq!(out[1], frames[2]); // next frame stands in
        assert_eq!(out[0], frames[0]);
    }

    #[test]
    fn leading_loss_recovered_from_first_embedded_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let frames: Vec<Frame> = (0..2).map(|_| random_frame(&mut rng)).collect();
        let sent = process_stream(&frames, FirstFramePolicy::SelfEmbed).unwrap();
        let slots = slots_for(&sent, &[true, false]);
        let (out, report) = conceal_stream(&slots, &config()).unwrap();
        assert_eq!(out[0], frames[0]);
        assert_eq!(report.recovered_exact, 1);
    }

    #[test]
    fn leading_unrecoverable_loss_uses_zero_filler() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let frames: Vec<Frame> = (0..3).map(|_| random_frame(&mut rng)).collect();
        let sent = process_stream(&frames, FirstFramePolicy::SelfEmbed).unwrap();
        let slots = slots_for(&sent, &[true, true, false]);
        let (out, report) = conceal_stream(&slots, &config()).unwrap();
        assert_eq!(report.unrecovered, 1);
        assert_eq!(report.recovered_exact, 1);
        assert_eq!(out[0].payload_bits(), BitVector::new(vec![false; WORDS]));
        assert_eq!(out[0].header(), sent[2].header());
        assert_eq!(out[1], frames[1]);
    }

    #[test]
    fn sequence_gap_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let f = random_frame(&mut rng);
        let slots = vec![
            ReceivedSlot::received(0, f.clone()),
            ReceivedSlot::received(2, f),
        ];
        assert!(matches!(
            conceal_stream(&slots, &config()),
            Err(Error::SequenceGap {
                expected: 1,
                found: 2
            })
        ));
    }

    #[test]
    fn unknown_form_successor_never_trusted() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let good = random_frame(&mut rng);
        let mut words: Vec<SoftbitWord> = good.payload().to_vec();
        words[0] = SoftbitWord::new(words[0].hi, 0x55);
        for w in words.iter_mut().skip(1) {
            w.lo = 0x7F;
        }
        let corrupt = Frame::new(good.header().to_vec(), words).unwrap();
        assert_eq!(corrupt.form(), FrameForm::Unknown);

        let slots = vec![
            ReceivedSlot::received(0, good.clone()),
            ReceivedSlot::lost(1),
            ReceivedSlot::received(2, corrupt),
        ];
        let (out, report) = conceal_stream(&slots, &config()).unwrap();
        assert_eq!(report.unrecovered, 1);
        assert_eq!(report.unknown_form, 1);
        assert_eq!(out[1], good);
    }

    #[test]
    fn report_conservation_on_all_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let frames: Vec<Frame> = (0..8).map(|_| random_frame(&mut rng)).collect();
        let sent = process_stream(&frames, FirstFramePolicy::SelfEmbed).unwrap();
        for mask in 0u32..256 {
            let lost: Vec<bool> = (0..8).map(|i| mask & (1 << i) != 0).collect();
            let slots = slots_for(&sent, &lost);
            let (out, report) = conceal_stream(&slots, &config()).unwrap();
            assert!(report.is_consistent(), "mask {mask:#010b}");
            assert_eq!(out.len(), 8);
            assert_eq!(report.lost, lost.iter().filter(|&&l| l).count());
        }
    }

    proptest! {
        #[test]
        fn normalize_embed_round_trip(prev_bits in proptest::collection::vec(any::<bool>(), WORDS),
                                      curr_bits in proptest::collection::vec(any::<bool>(), WORDS)) {
            let prev = Frame::canonical_from_bits(&BitVector::new(prev_bits), vec![0xC0, 0xC1]);
            let curr = Frame::canonical_from_bits(&BitVector::new(curr_bits), vec![0xC0, 0xC1]);
            let sent = embed(&prev, &curr).unwrap();
            prop_assert_eq!(normalize(&sent), curr);
            prop_assert_eq!(recover_previous(&sent).unwrap(), prev);
        }
    }
}
