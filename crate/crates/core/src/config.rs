//! Flat key-value configuration files.
//!
//! One `key = value` pair per line; blank lines and `#` comments are
//! ignored. Unknown and duplicate keys are errors so typos surface
//! immediately. This covers both the stream geometry handed to the frame
//! tools and the full sweep description.
//!
//! Sweep keys:
//!
//! ```text
//! flr_points       = 0.0:0.2:0.02          # start:stop:step, or a comma list
//! runs_per_point   = 10
//! base_seed        = 1
//! p_bb             = 0.5
//! egm_persistence  = 0.7,0.5,0.25          # optional; switches to the m-state model
//! methods          = piggyback,fec_parity,repetition
//! stream           = synthetic             # or a path to a .cod file
//! frames           = 400                   # synthetic stream length
//! stream_seed      = 7                     # synthetic stream seed
//! header_words     = 3
//! payload_words    = 132
//! frame_duration_ms = 20
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::frame::StreamConfig;
use crate::sweep::{Method, StreamSource, SweepConfig};

/// Parsed key-value pairs, keys unique.
#[derive(Debug, Clone, Default)]
pub struct KeyValueFile {
    values: BTreeMap<String, String>,
    consumed: std::cell::RefCell<Vec<String>>,
}

impl KeyValueFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected 'key = value'", number + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if values.insert(key.clone(), value).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate key '{key}'")));
            }
        }
        Ok(Self {
            values,
            consumed: std::cell::RefCell::new(Vec::new()),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        let value = self.values.get(key).map(String::as_str);
        if value.is_some() {
            self.consumed.borrow_mut().push(key.to_string());
        }
        value
    }

    fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                Error::InvalidConfig(format!("key '{key}': cannot parse '{raw}'"))
            }),
        }
    }

    /// Error on any key that was never consumed.
    pub fn reject_unknown_keys(&self) -> Result<()> {
        let consumed = self.consumed.borrow();
        for key in self.values.keys() {
            if !consumed.iter().any(|c| c == key) {
                return Err(Error::InvalidConfig(format!("unknown key '{key}'")));
            }
        }
        Ok(())
    }
}

/// Stream geometry from a key-value file; missing keys keep defaults.
pub fn stream_config_from_kv(kv: &KeyValueFile) -> Result<StreamConfig> {
    let defaults = StreamConfig::default();
    let config = StreamConfig {
        header_words: kv.parse_value("header_words")?.unwrap_or(defaults.header_words),
        payload_words: kv
            .parse_value("payload_words")?
            .unwrap_or(defaults.payload_words),
        frame_duration_ms: kv
            .parse_value("frame_duration_ms")?
            .unwrap_or(defaults.frame_duration_ms),
    };
    config.validate()?;
    Ok(config)
}

/// Load a stream geometry file, rejecting keys that are not geometry.
pub fn load_stream_config(path: &Path) -> Result<StreamConfig> {
    let kv = KeyValueFile::load(path)?;
    let config = stream_config_from_kv(&kv)?;
    kv.reject_unknown_keys()?;
    Ok(config)
}

/// Load a full sweep description.
pub fn load_sweep_config(path: &Path) -> Result<SweepConfig> {
    let kv = KeyValueFile::load(path)?;
    let defaults = SweepConfig::default();

    let flr_points = match kv.get("flr_points") {
        None => defaults.flr_points,
        Some(raw) => parse_flr_points(raw)?,
    };
    let methods = match kv.get("methods") {
        None => defaults.methods,
        Some(raw) => raw
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<Method>>>()?,
    };
    let egm_persistence = match kv.get("egm_persistence") {
        None => None,
        Some(raw) => Some(parse_f64_list(raw, "egm_persistence")?),
    };
    let stream = match kv.get("stream") {
        None | Some("synthetic") => StreamSource::Synthetic {
            frames: kv.parse_value("frames")?.unwrap_or(400),
            seed: kv.parse_value("stream_seed")?.unwrap_or(7),
        },
        Some(path) => StreamSource::File(PathBuf::from(path)),
    };
    // consume stream keys even for file sources so they are not "unknown"
    let _ = kv.get("frames");
    let _ = kv.get("stream_seed");

    let config = SweepConfig {
        flr_points,
        runs_per_point: kv
            .parse_value("runs_per_point")?
            .unwrap_or(defaults.runs_per_point),
        base_seed: kv.parse_value("base_seed")?.unwrap_or(defaults.base_seed),
        p_bb: kv.parse_value("p_bb")?.unwrap_or(defaults.p_bb),
        egm_persistence,
        methods,
        stream,
        stream_config: stream_config_from_kv(&kv)?,
    };
    kv.reject_unknown_keys()?;
    config.validate()?;
    Ok(config)
}

/// Either `start:stop:step` or a comma-separated list.
fn parse_flr_points(raw: &str) -> Result<Vec<f64>> {
    if raw.contains(':') {
        let parts = parse_separated(raw, ':', "flr_points")?;
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(
                "flr_points range must be start:stop:step".into(),
            ));
        }
        let (start, stop, step) = (parts[0], parts[1], parts[2]);
        if step <= 0.0 || stop < start {
            return Err(Error::InvalidConfig(
                "flr_points range must have step > 0 and stop >= start".into(),
            ));
        }
        let count = ((stop - start) / step).round() as usize;
        Ok((0..=count).map(|i| start + i as f64 * step).collect())
    } else {
        parse_f64_list(raw, "flr_points")
    }
}

fn parse_f64_list(raw: &str, key: &str) -> Result<Vec<f64>> {
    parse_separated(raw, ',', key)
}

fn parse_separated(raw: &str, separator: char, key: &str) -> Result<Vec<f64>> {
    raw.split(separator)
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("key '{key}': cannot parse '{s}'")))
        })
        .collect()
}
