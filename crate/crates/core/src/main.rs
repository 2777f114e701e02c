//! Command line front end: embed/conceal, FEC encode/decode, channel
//! pattern generation, synthetic streams and full sweeps.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use softbit_plc::channel::{
    apply_channel, params_for_flr, pattern_stats, read_pattern_file, simulate, write_pattern_file,
    ChannelParams, EgmParams, LossPattern,
};
use softbit_plc::conceal::{conceal_stream, RecoveryReport};
use softbit_plc::config::{load_stream_config, load_sweep_config};
use softbit_plc::fec::{fec_decode, fec_encode};
use softbit_plc::frame::{parse_stream, serialize_stream, StreamConfig};
use softbit_plc::interleave::{process_stream, FirstFramePolicy};
use softbit_plc::sweep::{generate_synthetic_stream, run_sweep_with_export, write_csv, write_summary};

#[derive(Parser)]
#[command(
    name = "softbit-plc",
    version,
    about = "Frame loss concealment toolkit for softbit serial speech streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Stream geometry flags shared by the frame-level commands. Explicit
/// flags override values from `--config`; defaults cover the 6.60 kbps
/// mode (3 header words, 132 payload words, 20 ms frames).
#[derive(Args, Debug)]
struct GeometryArgs {
    /// Key-value geometry file (header_words, payload_words, frame_duration_ms)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Header words per frame
    #[arg(long)]
    header_words: Option<usize>,
    /// Payload words per frame
    #[arg(long)]
    payload_words: Option<usize>,
    /// Frame duration in milliseconds
    #[arg(long)]
    frame_duration_ms: Option<u32>,
}

impl GeometryArgs {
    fn resolve(&self) -> anyhow::Result<StreamConfig> {
        let mut config = match &self.config {
            Some(path) => load_stream_config(path)
                .with_context(|| format!("reading geometry from {}", path.display()))?,
            None => StreamConfig::default(),
        };
        if let Some(words) = self.header_words {
            config.header_words = words;
        }
        if let Some(words) = self.payload_words {
            config.payload_words = words;
        }
        if let Some(ms) = self.frame_duration_ms {
            config.frame_duration_ms = ms;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum FirstFrameArg {
    /// Embed the first frame into itself
    #[default]
    Self_,
    /// Pass the first frame through unmodified
    Pass,
}

impl From<FirstFrameArg> for FirstFramePolicy {
    fn from(arg: FirstFrameArg) -> Self {
        match arg {
            FirstFrameArg::Self_ => FirstFramePolicy::SelfEmbed,
            FirstFrameArg::Pass => FirstFramePolicy::PassThrough,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum ModelArg {
    #[default]
    Gilbert,
    Egm,
}

#[derive(Subcommand)]
enum Command {
    /// Embed each frame's predecessor into its redundant low bytes
    Embed {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// First-frame handling
        #[arg(long, value_enum, default_value = "self")]
        first_frame: FirstFrameArg,
        /// Input softbit stream (.cod)
        input: PathBuf,
        /// Output softbit stream (.cod)
        output: PathBuf,
    },
    /// Conceal losses: normalize received frames, rebuild lost ones
    Conceal {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Loss pattern file ('R'/'L' per frame)
        #[arg(long)]
        loss: PathBuf,
        /// Write per-session counts as CSV
        #[arg(long)]
        report: Option<PathBuf>,
        /// Pre-channel softbit stream (.cod)
        input: PathBuf,
        /// Concealed output stream (.cod)
        output: PathBuf,
    },
    /// Insert an XOR parity frame after every 4 data frames
    FecEncode {
        #[command(flatten)]
        geometry: GeometryArgs,
        input: PathBuf,
        output: PathBuf,
    },
    /// Decode a 4+1 parity stream back to data frames
    FecDecode {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Loss pattern over the encoded stream
        #[arg(long)]
        loss: PathBuf,
        /// Write per-session counts as CSV
        #[arg(long)]
        report: Option<PathBuf>,
        /// Encoded softbit stream (.cod)
        input: PathBuf,
        /// Recovered data stream (.cod)
        output: PathBuf,
    },
    /// Generate a burst-loss pattern file
    SimulateLoss {
        /// Number of frames
        #[arg(long)]
        frames: usize,
        /// Target stationary frame loss rate
        #[arg(long)]
        flr: f64,
        /// Burst persistence of the 2-state model
        #[arg(long, default_value_t = 0.5)]
        p_bb: f64,
        /// Channel model
        #[arg(long, value_enum, default_value = "gilbert")]
        model: ModelArg,
        /// Per-length persistence profile for the m-state model
        #[arg(long, value_delimiter = ',')]
        persistence: Vec<f64>,
        /// RNG seed
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output pattern file
        output: PathBuf,
    },
    /// Generate a deterministic synthetic softbit stream
    GenStream {
        #[command(flatten)]
        geometry: GeometryArgs,
        /// Number of frames
        #[arg(long)]
        frames: usize,
        /// RNG seed
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output softbit stream (.cod)
        output: PathBuf,
    },
    /// Run a full loss-rate sweep and write CSV + summary
    Sweep {
        /// Key-value sweep description
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV path (a .summary.dat is written alongside)
        #[arg(long)]
        out: PathBuf,
        /// Export reference and recovered streams as .cod files
        #[arg(long)]
        export_dir: Option<PathBuf>,
    },
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Embed {
            geometry,
            first_frame,
            input,
            output,
        } => {
            let config = geometry.resolve()?;
            let frames = read_stream(&input, &config)?;
            let embedded = process_stream(&frames, first_frame.into())?;
            write_stream(&output, &embedded, &config)?;
            eprintln!("embedded {} frames -> {}", embedded.len(), output.display());
        }
        Command::Conceal {
            geometry,
            loss,
            report,
            input,
            output,
        } => {
            let config = geometry.resolve()?;
            let frames = read_stream(&input, &config)?;
            let pattern = read_pattern(&loss, frames.len())?;
            let slots = apply_channel(&frames, &pattern)?;
            let (concealed, counts) = conceal_stream(&slots, &config)?;
            write_stream(&output, &concealed, &config)?;
            finish_report(&counts, report.as_deref())?;
        }
        Command::FecEncode {
            geometry,
            input,
            output,
        } => {
            let config = geometry.resolve()?;
            let frames = read_stream(&input, &config)?;
            let encoded = fec_encode(&frames)?;
            write_stream(&output, &encoded, &config)?;
            eprintln!(
                "encoded {} data frames as {} frames -> {}",
                frames.len(),
                encoded.len(),
                output.display()
            );
        }
        Command::FecDecode {
            geometry,
            loss,
            report,
            input,
            output,
        } => {
            let config = geometry.resolve()?;
            let frames = read_stream(&input, &config)?;
            let pattern = read_pattern(&loss, frames.len())?;
            let slots = apply_channel(&frames, &pattern)?;
            let (decoded, counts) = fec_decode(&slots, &config)?;
            write_stream(&output, &decoded, &config)?;
            finish_report(&counts, report.as_deref())?;
        }
        Command::SimulateLoss {
            frames,
            flr,
            p_bb,
            model,
            persistence,
            seed,
            output,
        } => {
            let params = match model {
                ModelArg::Gilbert => ChannelParams::Gilbert(params_for_flr(flr, p_bb)?),
                ModelArg::Egm => {
                    if persistence.is_empty() {
                        anyhow::bail!("--model egm needs --persistence q1,q2,...");
                    }
                    ChannelParams::Egm(EgmParams::for_target_flr(flr, persistence)?)
                }
            };
            let pattern = simulate(frames, &params, seed)?;
            write_pattern_file(&output, &pattern, flr)?;
            let stats = pattern_stats(&pattern);
            eprintln!(
                "wrote {} flags (empirical flr {:.4}, {} bursts) -> {}",
                frames,
                stats.flr,
                stats.burst_histogram.values().sum::<usize>(),
                output.display()
            );
        }
        Command::GenStream {
            geometry,
            frames,
            seed,
            output,
        } => {
            let config = geometry.resolve()?;
            let stream = generate_synthetic_stream(frames, seed, &config)?;
            write_stream(&output, &stream, &config)?;
            eprintln!(
                "wrote {} frames ({} bytes) -> {}",
                frames,
                frames * config.frame_bytes(),
                output.display()
            );
        }
        Command::Sweep {
            config,
            out,
            export_dir,
        } => {
            let sweep_config = match config {
                Some(path) => load_sweep_config(&path)
                    .with_context(|| format!("reading sweep config {}", path.display()))?,
                None => Default::default(),
            };
            let rows = run_sweep_with_export(&sweep_config, export_dir.as_deref())?;
            write_csv(&rows, &out)?;
            let summary = out.with_extension("summary.dat");
            write_summary(&rows, &summary)?;
            eprintln!(
                "wrote {} rows -> {} (summary: {})",
                rows.len(),
                out.display(),
                summary.display()
            );
        }
    }
    Ok(())
}

fn read_stream(path: &Path, config: &StreamConfig) -> anyhow::Result<Vec<softbit_plc::Frame>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let frames =
        parse_stream(&bytes, config).with_context(|| format!("parsing {}", path.display()))?;
    anyhow::ensure!(!frames.is_empty(), "{} contains no frames", path.display());
    Ok(frames)
}

fn write_stream(
    path: &Path,
    frames: &[softbit_plc::Frame],
    config: &StreamConfig,
) -> anyhow::Result<()> {
    let bytes = serialize_stream(frames, config)?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Load a pattern file and check it covers the stream.
fn read_pattern(path: &Path, frames: usize) -> anyhow::Result<LossPattern> {
    let (flags, _header) = read_pattern_file(path)?;
    anyhow::ensure!(
        flags.len() == frames,
        "pattern {} has {} flags but the stream has {} frames",
        path.display(),
        flags.len(),
        frames
    );
    Ok(LossPattern::from_flags(flags))
}

fn finish_report(counts: &RecoveryReport, report: Option<&Path>) -> anyhow::Result<()> {
    eprintln!(
        "total {} lost {} recovered_exact {} concealed_repetition {} unrecovered {}",
        counts.total,
        counts.lost,
        counts.recovered_exact,
        counts.concealed_repetition,
        counts.unrecovered
    );
    if let Some(path) = report {
        let text = format!(
            "total,lost,recovered_exact,concealed_repetition,unrecovered\n{},{},{},{},{}\n",
            counts.total,
            counts.lost,
            counts.recovered_exact,
            counts.concealed_repetition,
            counts.unrecovered
        );
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
