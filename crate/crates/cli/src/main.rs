//! Command-line front end for the link simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime or data error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wimax60_core::capture::IqCapture;
use wimax60_core::channel::{ChannelProfile, TapSpec};
use wimax60_core::config::RunConfig;
use wimax60_core::dsp::{occupied_bandwidth, psd_estimate, PsdConfig};
use wimax60_core::link::{run_loopback, run_sweep};
use wimax60_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "wimax60",
    about = "Link-level simulator for a WiMAX OFDM chain over a multipath fading channel",
    version
)]
struct Cli {
    /// Run configuration file (key = value with [section] groups).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full chain once and write report, captures and CSV data.
    Loopback,
    /// Run a BER/EVM sweep over the configured Eb/N0 points.
    Sweep,
    /// Summarize an I/Q capture file and write its spectrum as CSV.
    Inspect {
        /// Capture file to read.
        capture: PathBuf,
    },
    /// Write an example channel profile.
    MakeProfile {
        /// Destination path.
        path: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A reader closing the pipe mid-print is not an error.
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config { .. } => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.run.out_dir = out;
    }

    match cli.command {
        Command::Loopback => loopback(&cfg),
        Command::Sweep => sweep(&cfg),
        Command::Inspect { capture } => inspect(&cfg, &capture),
        Command::MakeProfile { path } => make_profile(&path),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
                line: 0,
                msg: format!("cannot read {}: {e}", path.display()),
            })?;
            RunConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
        }
        None => Ok(RunConfig::default()),
    }
}

fn print_warnings(cfg: &RunConfig) {
    for warning in cfg.channel.profile.warnings(cfg.frame.sample_rate) {
        eprintln!("warning: {warning}");
    }
}

fn loopback(cfg: &RunConfig) -> Result<()> {
    print_warnings(cfg);
    let run = run_loopback(cfg)?;
    let paths = run.write_artifacts(cfg, &cfg.run.out_dir)?;

    let mut out = std::io::stdout().lock();
    run.report.write_text(&mut out)?;

    let spectrum = psd_estimate(&run.tx.buffer, &PsdConfig::default())?;
    let obw = occupied_bandwidth(&spectrum, 0.99)?;
    writeln!(out, "occupied_bw_99_hz = {obw}")?;
    for path in paths {
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<()> {
    print_warnings(cfg);
    let result = run_sweep(cfg)?;
    std::fs::create_dir_all(&cfg.run.out_dir)?;
    let path = cfg.run.out_dir.join("sweep.csv");
    std::fs::write(&path, result.to_csv())?;
    let mut out = std::io::stdout().lock();
    write!(out, "{}", result.to_csv())?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn inspect(cfg: &RunConfig, capture_path: &Path) -> Result<()> {
    let capture = IqCapture::read_from(capture_path)?;
    let buf = capture.to_buffer();
    let mut out = std::io::stdout().lock();
    writeln!(out, "file = {}", capture_path.display())?;
    writeln!(out, "sample_rate_hz = {}", capture.sample_rate)?;
    writeln!(out, "center_freq_hz = {}", capture.center_freq)?;
    writeln!(out, "sample_count = {}", capture.samples.len())?;
    writeln!(
        out,
        "duration_s = {}",
        capture.samples.len() as f64 / capture.sample_rate
    )?;
    writeln!(out, "mean_power = {}", buf.mean_power())?;
    let peak = buf
        .samples
        .iter()
        .map(|s| s.norm())
        .fold(0.0f64, f64::max);
    writeln!(out, "peak_magnitude = {peak}")?;

    // Spectrum with a segment that fits the capture.
    let segment_len = (buf.len().next_power_of_two() / 2).clamp(8, 256);
    if buf.len() >= segment_len {
        let psd_cfg = PsdConfig {
            segment_len,
            ..Default::default()
        };
        let spectrum = psd_estimate(&buf, &psd_cfg)?;
        std::fs::create_dir_all(&cfg.run.out_dir)?;
        let path = cfg.run.out_dir.join("inspect_spectrum.csv");
        let mut csv = Vec::new();
        spectrum.write_csv(&mut csv)?;
        std::fs::write(&path, csv)?;
        writeln!(out, "wrote {}", path.display())?;
    } else {
        writeln!(out, "capture too short for a spectrum estimate")?;
    }
    Ok(())
}

fn make_profile(path: &Path) -> Result<()> {
    // Three taps on the default 2.24 MHz sample grid, unit total power.
    let period_ns = 1e9 / 2.24e6;
    let profile = ChannelProfile {
        taps: vec![
            TapSpec {
                delay_s: 0.0,
                power: 0.5,
                doppler_hz: 60.0,
            },
            TapSpec {
                delay_s: 2.0 * period_ns * 1e-9,
                power: 0.3,
                doppler_hz: 60.0,
            },
            TapSpec {
                delay_s: 5.0 * period_ns * 1e-9,
                power: 0.2,
                doppler_hz: 60.0,
            },
        ],
        noise_variance: 0.0,
    };
    let mut text = String::from("# example multipath profile\n");
    text.push_str("# delays sit on the 2.24 MHz sample grid (446.43 ns period)\n");
    text.push_str(&profile.to_text());
    std::fs::write(path, text)?;
    writeln!(std::io::stdout().lock(), "wrote {}", path.display())?;
    Ok(())
}
