//! Run configuration: a line-oriented `key = value` format with `[section]`
//! groups and `#` comments. Unknown sections or keys are rejected with the
//! offending line number, as are duplicate keys (`tap` may repeat).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::chanest::EstimatorMethod;
use crate::channel::{noise_variance_for_ebn0, ChannelProfile, TapSpec};
use crate::error::{Error, Result};
use crate::mac::{MacFlags, HEADER_BYTES, MAX_PDU_BYTES};
use crate::ofdm::FrameConfig;
use crate::spreading::{DEFAULT_CHIP_RATE_HZ, DEFAULT_FRAME_LEN};

/// How tap gains evolve during a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FadingMode {
    /// Deterministic gains sqrt(power): an exactly-known channel.
    #[default]
    Static,
    /// Independent Jakes-fading Rayleigh processes per tap.
    Rayleigh,
}

impl FadingMode {
    pub fn label(&self) -> &'static str {
        match self {
            FadingMode::Static => "static",
            FadingMode::Rayleigh => "rayleigh",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingConfig {
    /// Chip frame length after zero padding.
    pub frame_len: usize,
    /// Data bits spread into each frame.
    pub payload_bits: usize,
    pub chip_rate_hz: f64,
}

impl Default for SpreadingConfig {
    fn default() -> Self {
        Self {
            frame_len: DEFAULT_FRAME_LEN,
            payload_bits: 192,
            chip_rate_hz: DEFAULT_CHIP_RATE_HZ,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacConfig {
    /// Payload bytes per PDU.
    pub payload_bytes: usize,
    pub cid: u16,
    pub flags: MacFlags,
    /// Optional payload source; random bytes when absent.
    pub payload_file: Option<PathBuf>,
}

impl Default for MacConfig {
    fn default() -> Self {
        Self {
            payload_bytes: 64,
            cid: 1,
            flags: MacFlags {
                ci: true,
                ..Default::default()
            },
            payload_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub profile: ChannelProfile,
    pub fading: FadingMode,
    /// Detector-level Eb/N0 target; when set it determines the profile's
    /// noise variance for the frame geometry.
    pub ebn0_db: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            profile: ChannelProfile::awgn(0.0),
            fading: FadingMode::Static,
            ebn0_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    /// Payload bit budget per run.
    pub bits: usize,
    pub estimator: EstimatorMethod,
    /// Eb/N0 points for sweeps, dB.
    pub snr_list_db: Vec<f64>,
    pub out_dir: PathBuf,
    /// Centre-frequency note recorded in captures, Hz.
    pub center_freq_hz: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            bits: 100_000,
            estimator: EstimatorMethod::default(),
            snr_list_db: Vec::new(),
            out_dir: PathBuf::from("out"),
            center_freq_hz: 60.0e9,
        }
    }
}

/// Everything a run needs, resolved and validated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub frame: FrameConfig,
    pub spreading: SpreadingConfig,
    pub mac: MacConfig,
    pub channel: ChannelConfig,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parse config text; `base_dir` anchors relative file references.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        let mut seen: HashSet<String> = HashSet::new();
        let mut inline_taps: Vec<TapSpec> = Vec::new();
        let mut profile_path: Option<PathBuf> = None;
        let mut noise_variance: Option<f64> = None;

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(Error::Config {
                    line,
                    msg: "unterminated section header".into(),
                })?;
                if !["frame", "spreading", "mac", "channel", "run"].contains(&name) {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown section [{name}]"),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(Error::Config {
                line,
                msg: "expected key = value".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let sec = section.as_deref().ok_or(Error::Config {
                line,
                msg: format!("key {key:?} before any [section]"),
            })?;
            let qualified = format!("{sec}.{key}");
            if qualified != "channel.tap" && !seen.insert(qualified.clone()) {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key {key:?} in [{sec}]"),
                });
            }

            match (sec, key) {
                ("frame", "n_fft") => cfg.frame.n_fft = parse_num(value, line)?,
                ("frame", "n_data") => cfg.frame.n_data = parse_num(value, line)?,
                ("frame", "guard_len") => cfg.frame.guard_len = parse_num(value, line)?,
                ("frame", "sample_rate_hz") => cfg.frame.sample_rate = parse_num(value, line)?,
                ("frame", "pilot_prbs") => cfg.frame.pilot_prbs = parse_bool(value, line)?,
                ("frame", "pilot_indices") => {
                    cfg.frame.pilot_indices = value
                        .split(',')
                        .map(|s| parse_num::<i32>(s.trim(), line))
                        .collect::<Result<_>>()?;
                }
                ("spreading", "frame_len") => cfg.spreading.frame_len = parse_num(value, line)?,
                ("spreading", "payload_bits") => {
                    cfg.spreading.payload_bits = parse_num(value, line)?
                }
                ("spreading", "chip_rate_hz") => {
                    cfg.spreading.chip_rate_hz = parse_num(value, line)?
                }
                ("mac", "payload_bytes") => cfg.mac.payload_bytes = parse_num(value, line)?,
                ("mac", "cid") => cfg.mac.cid = parse_num(value, line)?,
                ("mac", "ptype") => cfg.mac.flags.ptype = parse_num(value, line)?,
                ("mac", "crc") => cfg.mac.flags.ci = parse_bool(value, line)?,
                ("mac", "ht") => cfg.mac.flags.ht = parse_bool(value, line)?,
                ("mac", "ec") => cfg.mac.flags.ec = parse_bool(value, line)?,
                ("mac", "eks") => cfg.mac.flags.eks = parse_num(value, line)?,
                ("mac", "payload_file") => {
                    cfg.mac.payload_file = Some(base_dir.join(value));
                }
                ("channel", "profile") => profile_path = Some(base_dir.join(value)),
                ("channel", "tap") => {
                    let fields: Vec<&str> = value.split(',').map(str::trim).collect();
                    if fields.len() != 3 {
                        return Err(Error::Config {
                            line,
                            msg: "tap needs delay_ns,power_db,doppler_hz".into(),
                        });
                    }
                    inline_taps.push(TapSpec {
                        delay_s: parse_num::<f64>(fields[0], line)? * 1e-9,
                        power: 10f64.powf(parse_num::<f64>(fields[1], line)? / 10.0),
                        doppler_hz: parse_num(fields[2], line)?,
                    });
                }
                ("channel", "noise_variance") => {
                    noise_variance = Some(parse_num(value, line)?)
                }
                ("channel", "ebn0_db") => cfg.channel.ebn0_db = Some(parse_num(value, line)?),
                ("channel", "fading") => {
                    cfg.channel.fading = match value {
                        "static" => FadingMode::Static,
                        "rayleigh" => FadingMode::Rayleigh,
                        other => {
                            return Err(Error::Config {
                                line,
                                msg: format!(
                                    "fading must be static or rayleigh, got {other:?}"
                                ),
                            })
                        }
                    }
                }
                ("run", "seed") => cfg.run.seed = parse_num(value, line)?,
                ("run", "bits") => cfg.run.bits = parse_num(value, line)?,
                ("run", "estimator") => {
                    cfg.run.estimator =
                        EstimatorMethod::parse(value).ok_or_else(|| Error::Config {
                            line,
                            msg: format!("unknown estimator {value:?}"),
                        })?
                }
                ("run", "snr_list_db") => {
                    cfg.run.snr_list_db = value
                        .split(',')
                        .map(|s| parse_num::<f64>(s.trim(), line))
                        .collect::<Result<_>>()?;
                }
                // Output goes where the invocation says, not where the
                // config file lives.
                ("run", "out_dir") => cfg.run.out_dir = PathBuf::from(value),
                ("run", "center_freq_hz") => {
                    cfg.run.center_freq_hz = parse_num(value, line)?
                }
                (sec, key) => {
                    return Err(Error::Config {
                        line,
                        msg: format!("unknown key {key:?} in [{sec}]"),
                    });
                }
            }
        }

        if profile_path.is_some() && !inline_taps.is_empty() {
            return Err(Error::Config {
                line: 0,
                msg: "[channel] cannot mix profile = <path> with inline tap lines".into(),
            });
        }
        if let Some(path) = profile_path {
            cfg.channel.profile = ChannelProfile::from_file(&path)?;
            if let Some(nv) = noise_variance {
                cfg.channel.profile.noise_variance = nv;
            }
        } else {
            if !inline_taps.is_empty() {
                cfg.channel.profile.taps = inline_taps;
            }
            cfg.channel.profile.noise_variance = noise_variance.unwrap_or(0.0);
        }
        if cfg.channel.ebn0_db.is_some() && noise_variance.is_some() {
            return Err(Error::Config {
                line: 0,
                msg: "[channel] ebn0_db and noise_variance are mutually exclusive".into(),
            });
        }
        cfg.resolve_noise();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply the Eb/N0 target to the profile's noise variance.
    pub fn resolve_noise(&mut self) {
        if let Some(db) = self.channel.ebn0_db {
            self.channel.profile.noise_variance = noise_variance_for_ebn0(db, &self.frame);
        }
    }

    /// Clone with a different Eb/N0 operating point.
    pub fn with_ebn0(&self, ebn0_db: f64) -> Self {
        let mut cfg = self.clone();
        cfg.channel.ebn0_db = Some(ebn0_db);
        cfg.resolve_noise();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.channel.profile.validate()?;
        if self.spreading.frame_len == 0 || self.spreading.frame_len % 2 != 0 {
            return Err(Error::Config {
                line: 0,
                msg: format!(
                    "spreading frame_len {} must be even and nonzero",
                    self.spreading.frame_len
                ),
            });
        }
        if self.spreading.payload_bits == 0
            || self.spreading.payload_bits > self.spreading.frame_len
        {
            return Err(Error::Config {
                line: 0,
                msg: format!(
                    "spreading payload_bits {} must be in 1..={}",
                    self.spreading.payload_bits, self.spreading.frame_len
                ),
            });
        }
        let pdu_len = HEADER_BYTES
            + self.mac.payload_bytes
            + if self.mac.flags.ci { 4 } else { 0 };
        if self.mac.payload_bytes == 0 || pdu_len > MAX_PDU_BYTES {
            return Err(Error::Config {
                line: 0,
                msg: format!(
                    "mac payload_bytes {} gives PDU length {pdu_len}, outside 7..=2047",
                    self.mac.payload_bytes
                ),
            });
        }
        if self.run.bits == 0 {
            return Err(Error::Config {
                line: 0,
                msg: "run bits must be positive".into(),
            });
        }
        Ok(())
    }

    /// Canonical render of every resolved setting; `parse` accepts it back.
    pub fn resolved_text(&self) -> String {
        let mut s = String::new();
        s.push_str("[frame]\n");
        s.push_str(&format!("n_fft = {}\n", self.frame.n_fft));
        s.push_str(&format!("n_data = {}\n", self.frame.n_data));
        let pilots: Vec<String> = self
            .frame
            .pilot_indices
            .iter()
            .map(|p| p.to_string())
            .collect();
        s.push_str(&format!("pilot_indices = {}\n", pilots.join(",")));
        s.push_str(&format!("guard_len = {}\n", self.frame.guard_len));
        s.push_str(&format!("sample_rate_hz = {}\n", self.frame.sample_rate));
        s.push_str(&format!("pilot_prbs = {}\n", self.frame.pilot_prbs));
        s.push_str("\n[spreading]\n");
        s.push_str(&format!("frame_len = {}\n", self.spreading.frame_len));
        s.push_str(&format!("payload_bits = {}\n", self.spreading.payload_bits));
        s.push_str(&format!("chip_rate_hz = {}\n", self.spreading.chip_rate_hz));
        s.push_str("\n[mac]\n");
        s.push_str(&format!("payload_bytes = {}\n", self.mac.payload_bytes));
        s.push_str(&format!("cid = {}\n", self.mac.cid));
        s.push_str(&format!("ptype = {}\n", self.mac.flags.ptype));
        s.push_str(&format!("crc = {}\n", self.mac.flags.ci));
        s.push_str(&format!("ht = {}\n", self.mac.flags.ht));
        s.push_str(&format!("ec = {}\n", self.mac.flags.ec));
        s.push_str(&format!("eks = {}\n", self.mac.flags.eks));
        if let Some(path) = &self.mac.payload_file {
            s.push_str(&format!("payload_file = {}\n", path.display()));
        }
        s.push_str("\n[channel]\n");
        for tap in &self.channel.profile.taps {
            s.push_str(&format!(
                "tap = {},{},{}\n",
                tap.delay_s * 1e9,
                10.0 * tap.power.log10(),
                tap.doppler_hz
            ));
        }
        match self.channel.ebn0_db {
            Some(db) => s.push_str(&format!("ebn0_db = {db}\n")),
            None => s.push_str(&format!(
                "noise_variance = {}\n",
                self.channel.profile.noise_variance
            )),
        }
        s.push_str(&format!("fading = {}\n", self.channel.fading.label()));
        s.push_str("\n[run]\n");
        s.push_str(&format!("seed = {}\n", self.run.seed));
        s.push_str(&format!("bits = {}\n", self.run.bits));
        s.push_str(&format!("estimator = {}\n", self.run.estimator.label()));
        if !self.run.snr_list_db.is_empty() {
            let points: Vec<String> = self
                .run
                .snr_list_db
                .iter()
                .map(|p| p.to_string())
                .collect();
            s.push_str(&format!("snr_list_db = {}\n", points.join(",")));
        }
        s.push_str(&format!("out_dir = {}\n", self.run.out_dir.display()));
        s.push_str(&format!("center_freq_hz = {}\n", self.run.center_freq_hz));
        s
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Config {
        line,
        msg: format!("bad value {value:?}: {e}"),
    })
}

fn parse_bool(value: &str, line: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Config {
            line,
            msg: format!("expected true or false, got {other:?}"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.frame.n_fft, 256);
        assert_eq!(cfg.channel.profile.taps.len(), 1);
        assert_eq!(cfg.channel.fading, FadingMode::Static);
    }

    #[test]
    fn parse_round_trips_resolved_text() {
        let mut cfg = RunConfig::default();
        cfg.run.snr_list_db = vec![0.0, 2.0, 4.0];
        cfg.channel.ebn0_db = Some(6.0);
        cfg.resolve_noise();
        let text = cfg.resolved_text();
        let reparsed = RunConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(reparsed, cfg);
    }

    #[test]
    fn unknown_key_rejected_with_line_number() {
        let text = "[run]\nseed = 1\nspeed = 9\n";
        match RunConfig::parse(text, Path::new(".")) {
            Err(Error::Config { line, msg }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("speed"));
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_section_rejected() {
        assert!(matches!(
            RunConfig::parse("[radio]\nx = 1\n", Path::new(".")),
            Err(Error::Config { line: 1, .. })
        ));
    }

    #[test]
    fn key_outside_section_rejected() {
        assert!(matches!(
            RunConfig::parse("seed = 1\n", Path::new(".")),
            Err(Error::Config { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_key_rejected() {
        let text = "[run]\nseed = 1\nseed = 2\n";
        assert!(matches!(
            RunConfig::parse(text, Path::new(".")),
            Err(Error::Config { line: 3, .. })
        ));
    }

    #[test]
    fn inline_taps_and_noise() {
        let text = "\
[channel]
tap = 0,0,40
tap = 900,-3,40
noise_variance = 0.01
fading = rayleigh
";
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.channel.profile.taps.len(), 2);
        assert_eq!(cfg.channel.fading, FadingMode::Rayleigh);
        assert!((cfg.channel.profile.noise_variance - 0.01).abs() < 1e-15);
        assert!((cfg.channel.profile.taps[1].delay_s - 900e-9).abs() < 1e-18);
    }

    #[test]
    fn ebn0_and_noise_variance_conflict() {
        let text = "[channel]\nebn0_db = 4\nnoise_variance = 0.1\n";
        assert!(matches!(
            RunConfig::parse(text, Path::new(".")),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn ebn0_sets_noise_variance() {
        let text = "[channel]\nebn0_db = 0\n";
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        assert!((cfg.channel.profile.noise_variance - 1.0 / 512.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_assignments_name_their_line() {
        for (text, bad_line) in [
            ("[frame]\nn_fft 256\n", 2),
            ("[frame]\nn_fft = many\n", 2),
            ("[frame\nn_fft = 256\n", 1),
            ("[channel]\ntap = 1,2\n", 2),
            ("[channel]\nfading = maybe\n", 2),
            ("[run]\nestimator = mmse\n", 2),
        ] {
            match RunConfig::parse(text, Path::new(".")) {
                Err(Error::Config { line, .. }) => assert_eq!(line, bad_line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn oversize_mac_payload_rejected() {
        let text = "[mac]\npayload_bytes = 2100\n";
        assert!(RunConfig::parse(text, Path::new(".")).is_err());
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let text = "\n# top comment\n[run]\nseed = 9 # trailing\n\n";
        let cfg = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!(cfg.run.seed, 9);
    }
}
