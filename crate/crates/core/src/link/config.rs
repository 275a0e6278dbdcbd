use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::baseline::Equalizer;
use crate::channel::TdlProfile;
use crate::ofdm::FrameConfig;
use crate::receiver::{Activation, ReceiverConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverKind {
    BaselineLs,
    PerfectCsi,
    Neural,
}

impl ReceiverKind {
    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::BaselineLs => "baseline-ls",
            ReceiverKind::PerfectCsi => "perfect-csi",
            ReceiverKind::Neural => "neural",
        }
    }
}

impl FromStr for ReceiverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline-ls" => Ok(ReceiverKind::BaselineLs),
            "perfect-csi" => Ok(ReceiverKind::PerfectCsi),
            "neural" => Ok(ReceiverKind::Neural),
            _ => Err("expected baseline-ls, perfect-csi or neural".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdpcParams {
    pub n: usize,
    pub col_weight: usize,
    pub row_weight: usize,
    pub seed: u64,
}

/// Network dimensions of the neural receiver; frame-dependent sizes are
/// filled in from the rest of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn: usize,
    pub residual: bool,
    pub learnable_lambda: bool,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingParams {
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    /// Per-frame SNR is drawn uniformly from this range (dB).
    pub snr_min_db: f64,
    pub snr_max_db: f64,
}

/// Everything needed to run the link. [`LinkConfig::default`] is the
/// 128-subcarrier, 64-QAM setup.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig {
    pub frame: FrameConfig,
    pub qam_order: usize,
    pub ldpc: LdpcParams,
    pub channel_profile: String,
    pub receiver: ReceiverKind,
    pub equalizer: Equalizer,
    pub model_path: Option<PathBuf>,
    pub bp_iters: usize,
    pub seed: u64,
    pub model: ModelParams,
    pub training: TrainingParams,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            frame: FrameConfig::default(),
            qam_order: 64,
            ldpc: LdpcParams {
                n: 1296,
                col_weight: 3,
                row_weight: 6,
                seed: 1,
            },
            channel_profile: "uma-low".into(),
            receiver: ReceiverKind::BaselineLs,
            equalizer: Equalizer::Mmse,
            model_path: None,
            bp_iters: 20,
            seed: 1,
            model: ModelParams {
                d_model: 128,
                heads: 4,
                blocks: 4,
                ffn: 128,
                residual: true,
                learnable_lambda: false,
                activation: Activation::Relu,
            },
            training: TrainingParams {
                steps: 1000,
                lr: 1e-3,
                batch: 8,
                snr_min_db: 0.0,
                snr_max_db: 20.0,
            },
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            reason: "expected true or false".into(),
        }),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// Keys understood by [`LinkConfig::parse`], in the order
/// [`LinkConfig::to_text`] writes them.
pub const KEYS: &[&str] = &[
    "num_subcarriers",
    "subcarrier_spacing_hz",
    "num_symbols",
    "fft_size",
    "cp_len",
    "pilot_symbols",
    "pilot_seed",
    "qam_order",
    "ldpc_n",
    "ldpc_col_weight",
    "ldpc_row_weight",
    "ldpc_seed",
    "channel_profile",
    "receiver",
    "equalizer",
    "model_path",
    "bp_iters",
    "seed",
    "d_model",
    "heads",
    "blocks",
    "ffn",
    "residual",
    "learnable_lambda",
    "activation",
    "train_steps",
    "train_lr",
    "train_batch",
    "train_snr_min_db",
    "train_snr_max_db",
];

impl LinkConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a
    /// comment; blank lines are ignored. The result is validated.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = LinkConfig::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                });
            }
            if seen.contains(&key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.into(),
                });
            }
            seen.push(key);
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        LinkConfig::parse(&text)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "num_subcarriers" => self.frame.num_subcarriers = parse(key, v)?,
            "subcarrier_spacing_hz" => self.frame.subcarrier_spacing_hz = parse(key, v)?,
            "num_symbols" => self.frame.num_symbols = parse(key, v)?,
            "fft_size" => self.frame.fft_size = parse(key, v)?,
            "cp_len" => self.frame.cp_len = parse(key, v)?,
            "pilot_symbols" => self.frame.pilot_symbols = parse_list(key, v)?,
            "pilot_seed" => self.frame.pilot_seed = parse(key, v)?,
            "qam_order" => self.qam_order = parse(key, v)?,
            "ldpc_n" => self.ldpc.n = parse(key, v)?,
            "ldpc_col_weight" => self.ldpc.col_weight = parse(key, v)?,
            "ldpc_row_weight" => self.ldpc.row_weight = parse(key, v)?,
            "ldpc_seed" => self.ldpc.seed = parse(key, v)?,
            "channel_profile" => self.channel_profile = v.to_string(),
            "receiver" => self.receiver = parse(key, v)?,
            "equalizer" => {
                self.equalizer = match v {
                    "mmse" => Equalizer::Mmse,
                    "zf" => Equalizer::Zf,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: v.into(),
                            reason: "expected mmse or zf".into(),
                        })
                    }
                }
            }
            "model_path" => self.model_path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "bp_iters" => self.bp_iters = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "d_model" => self.model.d_model = parse(key, v)?,
            "heads" => self.model.heads = parse(key, v)?,
            "blocks" => self.model.blocks = parse(key, v)?,
            "ffn" => self.model.ffn = parse(key, v)?,
            "residual" => self.model.residual = parse_bool(key, v)?,
            "learnable_lambda" => self.model.learnable_lambda = parse_bool(key, v)?,
            "activation" => {
                self.model.activation = Activation::parse(v).ok_or_else(|| ConfigError::BadValue {
                    key: key.into(),
                    value: v.into(),
                    reason: "expected relu or sigmoid".into(),
                })?
            }
            "train_steps" => self.training.steps = parse(key, v)?,
            "train_lr" => self.training.lr = parse(key, v)?,
            "train_batch" => self.training.batch = parse(key, v)?,
            "train_snr_min_db" => self.training.snr_min_db = parse(key, v)?,
            "train_snr_max_db" => self.training.snr_max_db = parse(key, v)?,
            _ => unreachable!("key list and setter out of sync: {key}"),
        }
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.qam_order.trailing_zeros() as usize
    }

    pub fn receiver_config(&self) -> ReceiverConfig {
        let m = &self.model;
        ReceiverConfig {
            num_symbols: self.frame.num_symbols,
            bits_per_symbol: self.bits_per_symbol(),
            d_model: m.d_model,
            heads: m.heads,
            blocks: m.blocks,
            ffn: m.ffn,
            residual: m.residual,
            learnable_lambda: m.learnable_lambda,
            activation: m.activation,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.frame.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if ![4, 16, 64].contains(&self.qam_order) {
            return invalid(format!("qam_order {} not one of 4, 16, 64", self.qam_order));
        }
        let q = self.bits_per_symbol();
        if self.ldpc.n == 0 || self.ldpc.n % q != 0 {
            return invalid(format!("ldpc_n {} must be a positive multiple of {q} bits per symbol", self.ldpc.n));
        }
        let capacity = self.frame.data_count() * q;
        if self.ldpc.n > capacity {
            return invalid(format!("a {}-bit codeword does not fit in {capacity} data bits", self.ldpc.n));
        }
        let profile = TdlProfile::preset(&self.channel_profile).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if profile.max_delay() > self.frame.cp_len {
            return invalid(format!(
                "profile {} spans {} samples, longer than cp_len {}",
                profile.name,
                profile.max_delay(),
                self.frame.cp_len
            ));
        }
        if self.bp_iters == 0 {
            return invalid("bp_iters must be at least 1".into());
        }
        self.receiver_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let t = &self.training;
        if !(t.snr_min_db <= t.snr_max_db) {
            return invalid("train_snr_min_db must not exceed train_snr_max_db".into());
        }
        if !(t.lr > 0.0) || t.batch == 0 {
            return invalid("train_lr and train_batch must be positive".into());
        }
        Ok(())
    }

    /// Every key with its resolved value, in a form [`LinkConfig::parse`]
    /// reads back to the same configuration.
    pub fn to_text(&self) -> String {
        let f = &self.frame;
        let pilots: Vec<String> = f.pilot_symbols.iter().map(usize::to_string).collect();
        let values: Vec<String> = vec![
            f.num_subcarriers.to_string(),
            f.subcarrier_spacing_hz.to_string(),
            f.num_symbols.to_string(),
            f.fft_size.to_string(),
            f.cp_len.to_string(),
            pilots.join(","),
            f.pilot_seed.to_string(),
            self.qam_order.to_string(),
            self.ldpc.n.to_string(),
            self.ldpc.col_weight.to_string(),
            self.ldpc.row_weight.to_string(),
            self.ldpc.seed.to_string(),
            self.channel_profile.clone(),
            self.receiver.name().into(),
            match self.equalizer {
                Equalizer::Mmse => "mmse".into(),
                Equalizer::Zf => "zf".into(),
            },
            self.model_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            self.bp_iters.to_string(),
            self.seed.to_string(),
            self.model.d_model.to_string(),
            self.model.heads.to_string(),
            self.model.blocks.to_string(),
            self.model.ffn.to_string(),
            self.model.residual.to_string(),
            self.model.learnable_lambda.to_string(),
            self.model.activation.name().into(),
            self.training.steps.to_string(),
            self.training.lr.to_string(),
            self.training.batch.to_string(),
            self.training.snr_min_db.to_string(),
            self.training.snr_max_db.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
