//! Burst-loss channel simulation.
//!
//! Two models are exposed: the classic 2-state Gilbert chain and its
//! m-state extension that assigns a separate persistence probability to
//! each burst length up to `m` (bursts past `m` keep the last value).
//! Both walk starts in the Good state and draw exactly one uniform value
//! per frame step from a `ChaCha8Rng` seeded with `seed_from_u64`, so a
//! pattern is fully determined by `(frame count, params, seed)` and
//! reproducible across platforms. The first transition happens before
//! frame 0's flag is drawn, so `p_gb = 1` loses frame 0 already.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conceal::ReceivedSlot;
use crate::error::{Error, Result};
use crate::frame::Frame;

fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(Error::InvalidParams(format!(
            "{name} = {value} is not a probability"
        )));
    }
    Ok(())
}

/// 2-state Gilbert chain: `p_gb` starts a burst, `p_bb` sustains one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GilbertParams {
    pub p_gb: f64,
    pub p_bb: f64,
}

impl GilbertParams {
    pub fn new(p_gb: f64, p_bb: f64) -> Result<Self> {
        check_probability("p_gb", p_gb)?;
        check_probability("p_bb", p_bb)?;
        Ok(Self { p_gb, p_bb })
    }

    /// Stationary loss rate `p_gb / (p_gb + 1 - p_bb)`.
    pub fn stationary_loss_rate(&self) -> f64 {
        if self.p_gb + (1.0 - self.p_bb) == 0.0 {
            return 0.0; // degenerate all-good chain started in Good
        }
        self.p_gb / (self.p_gb + 1.0 - self.p_bb)
    }
}

/// Solve for the Gilbert `p_gb` that hits a target stationary loss rate
/// at a given burst persistence.
pub fn params_for_flr(target_flr: f64, p_bb: f64) -> Result<GilbertParams> {
    if !(0.0..1.0).contains(&target_flr) || target_flr.is_nan() {
        return Err(Error::InvalidParams(format!(
            "target FLR {target_flr} must lie in [0, 1)"
        )));
    }
    if !(0.0..1.0).contains(&p_bb) || p_bb.is_nan() {
        return Err(Error::InvalidParams(format!(
            "p_bb {p_bb} must lie in [0, 1)"
        )));
    }
    let p_gb = target_flr * (1.0 - p_bb) / (1.0 - target_flr);
    if p_gb > 1.0 {
        return Err(Error::InvalidParams(format!(
            "target FLR {target_flr} with p_bb {p_bb} needs p_gb {p_gb} > 1"
        )));
    }
    GilbertParams::new(p_gb, p_bb)
}

/// m-state extension: `persistence[k]` is the probability of stretching a
/// burst from length `k+1` to `k+2`; the last entry also rules bursts that
/// already reached length `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct EgmParams {
    pub p_gb: f64,
    pub persistence: Vec<f64>,
}

impl EgmParams {
    pub fn new(p_gb: f64, persistence: Vec<f64>) -> Result<Self> {
        check_probability("p_gb", p_gb)?;
        if persistence.is_empty() {
            return Err(Error::InvalidParams(
                "persistence must contain at least one probability".into(),
            ));
        }
        for (i, &p) in persistence.iter().enumerate() {
            check_probability(&format!("persistence[{i}]"), p)?;
        }
        Ok(Self { p_gb, persistence })
    }

    /// Longest burst length with its own persistence value.
    pub fn max_modeled_burst(&self) -> usize {
        self.persistence.len()
    }

    /// Probability of extending a burst that currently has `len` losses.
    fn extend_probability(&self, len: usize) -> f64 {
        debug_assert!(len >= 1);
        self.persistence[len.min(self.persistence.len()) - 1]
    }

    /// Stationary loss rate of the chain.
    pub fn stationary_loss_rate(&self) -> f64 {
        match self.occupancy_factor() {
            Some(c) => self.p_gb * c / (1.0 + self.p_gb * c),
            None => 1.0, // terminal persistence 1 absorbs every burst
        }
    }

    /// Solve for the `p_gb` that hits a target stationary loss rate with
    /// the given persistence profile.
    pub fn for_target_flr(target_flr: f64, persistence: Vec<f64>) -> Result<Self> {
        if !(0.0..1.0).contains(&target_flr) || target_flr.is_nan() {
            return Err(Error::InvalidParams(format!(
                "target FLR {target_flr} must lie in [0, 1)"
            )));
        }
        let probe = Self::new(0.0, persistence)?;
        let c = probe.occupancy_factor().ok_or_else(|| {
            Error::InvalidParams("terminal persistence of 1 never ends a burst".into())
        })?;
        let p_gb = target_flr / ((1.0 - target_flr) * c);
        if p_gb > 1.0 {
            return Err(Error::InvalidParams(format!(
                "target FLR {target_flr} needs p_gb {p_gb} > 1 with this persistence profile"
            )));
        }
        Ok(Self { p_gb, ..probe })
    }

    /// Expected time spent in loss states per burst start, relative to
    /// `p_gb`: sum over burst states of the product of persistences, with
    /// the terminal state weighted by `1 / (1 - q_last)`.
    fn occupancy_factor(&self) -> Option<f64> {
        let m = self.persistence.len();
        let last = self.persistence[m - 1];
        if last >= 1.0 {
            return None;
        }
        let mut product = 1.0;
        let mut sum = 0.0;
        for &q in &self.persistence[..m - 1] {
            sum += product;
            product *= q;
        }
        sum += product / (1.0 - last);
        Some(sum)
    }
}

/// Parameters accepted by [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelParams {
    Gilbert(GilbertParams),
    Egm(EgmParams),
}

impl ChannelParams {
    pub fn stationary_loss_rate(&self) -> f64 {
        match self {
            ChannelParams::Gilbert(p) => p.stationary_loss_rate(),
            ChannelParams::Egm(p) => p.stationary_loss_rate(),
        }
    }

    fn model_name(&self) -> &'static str {
        match self {
            ChannelParams::Gilbert(_) => "gilbert",
            ChannelParams::Egm(_) => "egm",
        }
    }
}

impl fmt::Display for ChannelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelParams::Gilbert(p) => write!(f, "p_gb:{},p_bb:{}", p.p_gb, p.p_bb),
            ChannelParams::Egm(p) => {
                let persistence: Vec<String> =
                    p.persistence.iter().map(|q| q.to_string()).collect();
                write!(f, "p_gb:{},persistence:{}", p.p_gb, persistence.join("|"))
            }
        }
    }
}

/// Per-frame channel verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossFlag {
    Received,
    Lost,
}

impl LossFlag {
    pub fn is_lost(self) -> bool {
        matches!(self, LossFlag::Lost)
    }
}

/// A reproducible loss pattern together with what generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPattern {
    pub flags: Vec<LossFlag>,
    pub seed: u64,
    pub params: ChannelParams,
}

impl LossPattern {
    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    /// Wrap bare flags (e.g. read back from a pattern file) in a pattern.
    /// The generating parameters are unknown, so the empirical rate is
    /// recorded as a Bernoulli placeholder.
    pub fn from_flags(flags: Vec<LossFlag>) -> Self {
        let rate = if flags.is_empty() {
            0.0
        } else {
            flags.iter().filter(|f| f.is_lost()).count() as f64 / flags.len() as f64
        };
        Self {
            flags,
            seed: 0,
            params: ChannelParams::Gilbert(GilbertParams { p_gb: rate, p_bb: rate }),
        }
    }
}

/// Walk the chosen chain for `n` frames.
pub fn simulate(n: usize, params: &ChannelParams, seed: u64) -> Result<LossPattern> {
    if n == 0 {
        return Err(Error::InvalidParams("frame count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flags = match params {
        ChannelParams::Gilbert(p) => {
            GilbertParams::new(p.p_gb, p.p_bb)?;
            let mut lost_prev = false;
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let lost = u < if lost_prev { p.p_bb } else { p.p_gb };
                    lost_prev = lost;
                    if lost {
                        LossFlag::Lost
                    } else {
                        LossFlag::Received
                    }
                })
                .collect()
        }
        ChannelParams::Egm(p) => {
            EgmParams::new(p.p_gb, p.persistence.clone())?;
            let mut burst_len = 0usize;
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let threshold = if burst_len == 0 {
                        p.p_gb
                    } else {
                        p.extend_probability(burst_len)
                    };
                    if u < threshold {
                        burst_len += 1;
                        LossFlag::Lost
                    } else {
                        burst_len = 0;
                        LossFlag::Received
                    }
                })
                .collect()
        }
    };
    Ok(LossPattern {
        flags,
        seed,
        params: params.clone(),
    })
}

/// Pair a stream with a pattern, producing the receive timeline.
pub fn apply_channel(frames: &[Frame], pattern: &LossPattern) -> Result<Vec<ReceivedSlot>> {
    if frames.len() != pattern.flags.len() {
        return Err(Error::LengthMismatch {
            expected: frames.len(),
            found: pattern.flags.len(),
        });
    }
    Ok(frames
        .iter()
        .zip(&pattern.flags)
        .enumerate()
        .map(|(seq, (frame, flag))| match flag {
            LossFlag::Received => ReceivedSlot::received(seq, frame.clone()),
            LossFlag::Lost => ReceivedSlot::lost(seq),
        })
        .collect())
}

/// Empirical statistics of one pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternStats {
    /// Fraction of frames lost.
    pub flr: f64,
    /// Count of maximal loss runs by length.
    pub burst_histogram: std::collections::BTreeMap<usize, usize>,
    /// Mean maximal-run length, 0 when nothing was lost.
    pub mean_burst: f64,
}

pub fn pattern_stats(pattern: &LossPattern) -> PatternStats {
    let mut histogram = std::collections::BTreeMap::new();
    let mut lost = 0usize;
    let mut run = 0usize;
    for flag in &pattern.flags {
        if flag.is_lost() {
            lost += 1;
            run += 1;
        } else if run > 0 {
            *histogram.entry(run).or_insert(0) += 1;
            run = 0;
        }
    }
    if run > 0 {
        *histogram.entry(run).or_insert(0) += 1;
    }
    let bursts: usize = histogram.values().sum();
    PatternStats {
        flr: if pattern.flags.is_empty() {
            0.0
        } else {
            lost as f64 / pattern.flags.len() as f64
        },
        mean_burst: if bursts == 0 {
            0.0
        } else {
            lost as f64 / bursts as f64
        },
        burst_histogram: histogram,
    }
}

/// Metadata recovered from a pattern file's header line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatternFileHeader {
    pub flr: Option<f64>,
    pub seed: Option<u64>,
    pub model: Option<String>,
    pub params: Option<String>,
}

/// Write a pattern file: a `#` header line, then one `R`/`L` character per
/// frame on a single newline-terminated line.
pub fn write_pattern_file(path: &Path, pattern: &LossPattern, target_flr: f64) -> Result<()> {
    let mut text = format!(
        "# flr={} seed={} model={} params={}\n",
        target_flr,
        pattern.seed,
        pattern.params.model_name(),
        pattern.params
    );
    text.reserve(pattern.flags.len() + 1);
    for flag in &pattern.flags {
        text.push(if flag.is_lost() { 'L' } else { 'R' });
    }
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Read a pattern file back. Header fields are parsed leniently (they are
/// provenance, not inputs); flags are parsed strictly.
pub fn read_pattern_file(path: &Path) -> Result<(Vec<LossFlag>, PatternFileHeader)> {
    let text = fs::read_to_string(path)?;
    let mut header = PatternFileHeader::default();
    let mut flags = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            for token in rest.split_whitespace() {
                if let Some((key, value)) = token.split_once('=') {
                    match key {
                        "flr" => header.flr = value.parse().ok(),
                        "seed" => header.seed = value.parse().ok(),
                        "model" => header.model = Some(value.to_string()),
                        "params" => header.params = Some(value.to_string()),
                        _ => {}
                    }
                }
            }
            continue;
        }
        for c in line.chars() {
            match c {
                'R' => flags.push(LossFlag::Received),
                'L' => flags.push(LossFlag::Lost),
                c if c.is_whitespace() => {}
                other => {
                    return Err(Error::InvalidPattern(format!(
                        "unexpected character {other:?}; expected 'R' or 'L'"
                    )));
                }
            }
        }
    }
    if flags.is_empty() {
        return Err(Error::InvalidPattern("file contains no loss flags".into()));
    }
    Ok((flags, header))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gilbert(p_gb: f64, p_bb: f64) -> ChannelParams {
        ChannelParams::Gilbert(GilbertParams::new(p_gb, p_bb).unwrap())
    }

    #[test]
    fn absorbing_good_state_never_loses() {
        let pattern = simulate(1000, &gilbert(0.0, 0.9), 1).unwrap();
        assert!(pattern.flags.iter().all(|f| !f.is_lost()));
    }

    #[test]
    fn absorbing_bad_state_loses_everything() {
        let pattern = simulate(1000, &gilbert(1.0, 1.0), 1).unwrap();
        assert!(pattern.flags.iter().all(|f| f.is_lost()));
    }

    #[test]
    fn deterministic_given_seed() {
        let params = gilbert(0.1, 0.5);
        let a = simulate(5000, &params, 99).unwrap();
        let b = simulate(5000, &params, 99).unwrap();
        let c = simulate(5000, &params, 100).unwrap();
        assert_eq!(a.flags, b.flags);
        assert_ne!(a.flags, c.flags);
    }

    #[test]
    fn params_for_flr_closed_form() {
        let p = params_for_flr(0.2, 0.5).unwrap();
        assert!((p.p_gb - 0.125).abs() < 1e-12);
        assert!((p.stationary_loss_rate() - 0.2).abs() < 1e-12);

        let zero = params_for_flr(0.0, 0.5).unwrap();
        assert_eq!(zero.p_gb, 0.0);

        let bernoulli = params_for_flr(0.2, 0.0).unwrap();
        assert!((bernoulli.p_gb - 0.25).abs() < 1e-12);
    }

    #[test]
    fn params_for_flr_rejects_impossible_targets() {
        assert!(params_for_flr(0.9, 0.0).is_err());
        assert!(params_for_flr(1.0, 0.5).is_err());
        assert!(params_for_flr(-0.1, 0.5).is_err());
    }

    #[test]
    fn empirical_flr_matches_stationary_rate() {
        let params = params_for_flr(0.2, 0.5).unwrap();
        let n = 1_000_000usize;
        let pattern = simulate(n, &ChannelParams::Gilbert(params), 7).unwrap();
        let stats = pattern_stats(&pattern);
        // Markov correlation shrinks the effective sample: n_eff = n(1-r)/(1+r)
        let r = params.p_bb - params.p_gb;
        let n_eff = n as f64 * (1.0 - r) / (1.0 + r);
        let sigma = (0.2f64 * 0.8 / n_eff).sqrt();
        assert!(
            (stats.flr - 0.2).abs() < 3.0 * sigma,
            "flr {} outside 3 sigma ({})",
            stats.flr,
            sigma
        );
    }

    #[test]
    fn bernoulli_channel_hits_target() {
        let params = params_for_flr(0.2, 0.0).unwrap();
        let pattern = simulate(1_000_000, &ChannelParams::Gilbert(params), 21).unwrap();
        let stats = pattern_stats(&pattern);
        let sigma = (0.2f64 * 0.8 / 1e6).sqrt();
        assert!((stats.flr - 0.2).abs() < 3.0 * sigma);
    }

    #[test]
    fn pattern_stats_counting_example() {
        let flags = vec![
            LossFlag::Received,
            LossFlag::Lost,
            LossFlag::Lost,
            LossFlag::Received,
            LossFlag::Lost,
        ];
        let pattern = LossPattern {
            flags,
            seed: 0,
            params: gilbert(0.5, 0.5),
        };
        let stats = pattern_stats(&pattern);
        assert!((stats.flr - 0.6).abs() < 1e-12);
        assert_eq!(stats.burst_histogram[&2], 1);
        assert_eq!(stats.burst_histogram[&1], 1);
        assert!((stats.mean_burst - 1.5).abs() < 1e-12);
    }

    #[test]
    fn no_loss_pattern_has_empty_histogram() {
        let pattern = simulate(100, &gilbert(0.0, 0.0), 3).unwrap();
        let stats = pattern_stats(&pattern);
        assert_eq!(stats.flr, 0.0);
        assert!(stats.burst_histogram.is_empty());
        assert_eq!(stats.mean_burst, 0.0);
    }

    #[test]
    fn egm_uniform_persistence_matches_gilbert_walk() {
        // same seed, one draw per frame: distinct code paths must agree
        let q = 0.37;
        let two_state = simulate(20_000, &gilbert(0.08, q), 5).unwrap();
        let egm = simulate(
            20_000,
            &ChannelParams::Egm(EgmParams::new(0.08, vec![q; 4]).unwrap()),
            5,
        )
        .unwrap();
        assert_eq!(two_state.flags, egm.flags);
    }

    #[test]
    fn egm_rejects_bad_params() {
        assert!(EgmParams::new(0.5, vec![]).is_err());
        assert!(EgmParams::new(0.5, vec![1.2]).is_err());
        assert!(EgmParams::new(-0.1, vec![0.5]).is_err());
    }

    #[test]
    fn egm_target_flr_round_trips() {
        let params = EgmParams::for_target_flr(0.12, vec![0.6, 0.4, 0.2]).unwrap();
        assert!((params.stationary_loss_rate() - 0.12).abs() < 1e-12);
        // uniform persistence must reduce to the Gilbert closed form
        let uniform = EgmParams::for_target_flr(0.2, vec![0.5; 3]).unwrap();
        let reference = params_for_flr(0.2, 0.5).unwrap();
        assert!((uniform.p_gb - reference.p_gb).abs() < 1e-12);
    }

    #[test]
    fn egm_empirical_rate_matches_solver() {
        let params = EgmParams::for_target_flr(0.15, vec![0.7, 0.5, 0.25]).unwrap();
        let pattern = simulate(1_000_000, &ChannelParams::Egm(params), 13).unwrap();
        let stats = pattern_stats(&pattern);
        // conservative tolerance: bursty chains correlate samples
        assert!(
            (stats.flr - 0.15).abs() < 0.005,
            "flr {} too far from 0.15",
            stats.flr
        );
    }

    #[test]
    fn egm_burst_lengths_follow_persistence_products() {
        // P(len = k) = prod(q_1..q_{k-1}) * (1 - q_k), q clamped at the tail
        let persistence = [0.7, 0.4, 0.2];
        let params = EgmParams::new(0.1, persistence.to_vec()).unwrap();
        let pattern = simulate(1_000_000, &ChannelParams::Egm(params), 23).unwrap();
        let stats = pattern_stats(&pattern);
        let bursts: usize = stats.burst_histogram.values().sum();

        let q = |len: usize| persistence[len.min(persistence.len()) - 1];
        for k in 1..=8usize {
            let mut expected = 1.0 - q(k);
            for i in 1..k {
                expected *= q(i);
            }
            let observed = stats.burst_histogram.get(&k).copied().unwrap_or(0) as f64
                / bursts as f64;
            let sigma = (expected * (1.0 - expected) / bursts as f64).sqrt();
            assert!(
                (observed - expected).abs() < 4.0 * sigma,
                "burst length {k}: observed {observed:.5}, expected {expected:.5}"
            );
        }
    }

    #[test]
    fn apply_channel_round_trips_received_frames() {
        use crate::frame::BitVector;
        let frames: Vec<Frame> = (0..4)
            .map(|i| {
                Frame::canonical_from_bits(
                    &BitVector::new(vec![i % 2 == 0; 6]),
                    vec![0xAA, 0xBB],
                )
            })
            .collect();
        let pattern = LossPattern {
            flags: vec![
                LossFlag::Received,
                LossFlag::Lost,
                LossFlag::Received,
                LossFlag::Lost,
            ],
            seed: 0,
            params: gilbert(0.5, 0.5),
        };
        let slots = apply_channel(&frames, &pattern).unwrap();
        assert_eq!(slots[0].frame(), Some(&frames[0]));
        assert!(slots[1].is_lost());
        assert_eq!(slots[2].frame(), Some(&frames[2]));
        assert_eq!(slots[2].seq, 2);

        let short = LossPattern {
            flags: vec![LossFlag::Received],
            seed: 0,
            params: gilbert(0.5, 0.5),
        };
        assert!(apply_channel(&frames, &short).is_err());
    }

    #[test]
    fn pattern_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.pattern");
        let params = ChannelParams::Gilbert(params_for_flr(0.2, 0.5).unwrap());
        let pattern = simulate(64, &params, 17).unwrap();
        write_pattern_file(&path, &pattern, 0.2).unwrap();

        let (flags, header) = read_pattern_file(&path).unwrap();
        assert_eq!(flags, pattern.flags);
        assert_eq!(header.flr, Some(0.2));
        assert_eq!(header.seed, Some(17));
        assert_eq!(header.model.as_deref(), Some("gilbert"));
    }

    #[test]
    fn pattern_file_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pattern");
        std::fs::write(&path, "# flr=0.1\nRLX\n").unwrap();
        assert!(matches!(
            read_pattern_file(&path),
            Err(Error::InvalidPattern(_))
        ));
    }
}
