//! End-to-end link: configuration, frame chain, Monte-Carlo sweeps, CSV
//! output and payload transport.

mod config;
mod payload;
mod sweep;

pub use config::{ConfigError, LdpcParams, LinkConfig, ModelParams, ReceiverKind, TrainingParams, KEYS};
pub use payload::{bytes_to_bits, bits_to_bytes, payload_roundtrip, PayloadOutcome};
pub use sweep::{
    parse_csv, run_ber_sweep, snr_points, write_csv, CsvError, StopRule, SweepRow, CSV_HEADER,
};

use std::path::PathBuf;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::baseline::{self, BaselineKind};
use crate::channel::{self, ChannelRealization, TdlProfile};
use crate::exec::Exec;
use crate::ldpc::{DecoderConfig, LdpcCode};
use crate::modem::{Constellation, LlrGrid};
use crate::ofdm::{Ofdm, ResourceGrid};
use crate::receiver::{
    self, check_compatible, llr_indices, load_model, ModelFileError, ReceiverError, ReceiverModel,
    TrainConfig, TrainingSample,
};
use crate::seed::{self, Stream};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("the neural receiver needs a model (set model_path or pass --model)")]
    MissingModel,
    #[error("model {path}: {source}")]
    ModelFile {
        path: PathBuf,
        source: ModelFileError,
    },
    #[error("model does not fit this link: {0}")]
    Incompatible(ReceiverError),
    #[error("training: {0}")]
    Training(ReceiverError),
    #[error("{0}")]
    Usage(String),
}

fn stage<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> LinkError {
    move |e| LinkError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// How the data bits of one frame are split between codewords and filler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub codewords: usize,
    pub n: usize,
    pub k: usize,
    /// Data resource elements times bits per symbol.
    pub data_bits: usize,
    /// Seeded random bits after the last codeword; sent but not scored.
    pub filler_bits: usize,
}

impl FrameLayout {
    pub fn info_bits(&self) -> usize {
        self.codewords * self.k
    }

    pub fn coded_bits(&self) -> usize {
        self.codewords * self.n
    }
}

/// Size of each intermediate signal of one frame, for debugging.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageTrace {
    pub stage: &'static str,
    pub len: usize,
}

/// Channel output of one frame, ready for a receiver.
#[derive(Debug, Clone)]
pub struct Received {
    pub grid: ResourceGrid,
    pub channel: ChannelRealization,
    pub noise_var: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    pub tx_info: Vec<u8>,
    pub rx_info: Vec<u8>,
    pub bit_errors: usize,
    pub block_errors: usize,
    pub codewords: usize,
    pub noise_var: f64,
    pub trace: Vec<StageTrace>,
}

/// A configured link with its code, modem, OFDM plans and, for the neural
/// receiver, a model.
#[derive(Debug, Clone)]
pub struct Link {
    cfg: LinkConfig,
    code: Arc<LdpcCode>,
    constellation: Constellation,
    ofdm: Ofdm,
    profile: TdlProfile,
    layout: FrameLayout,
    model: Option<Arc<ReceiverModel>>,
    llr_select: Vec<usize>,
}

impl Link {
    /// Builds the link; for the neural receiver the model is read from
    /// `model_path`.
    pub fn new(cfg: LinkConfig) -> Result<Self, LinkError> {
        let mut link = Link::without_model(cfg)?;
        if link.cfg.receiver == ReceiverKind::Neural {
            let path = link.cfg.model_path.clone().ok_or(LinkError::MissingModel)?;
            let model = load_model(&path).map_err(|source| LinkError::ModelFile { path, source })?;
            link.set_model(model)?;
        }
        Ok(link)
    }

    /// Builds the link without loading a model, whatever the receiver kind.
    pub fn without_model(cfg: LinkConfig) -> Result<Self, LinkError> {
        cfg.validate()?;
        let l = &cfg.ldpc;
        let code = LdpcCode::regular(l.n, l.col_weight, l.row_weight, l.seed).map_err(stage("ldpc"))?;
        let constellation = Constellation::qam(cfg.qam_order).map_err(stage("modem"))?;
        let ofdm = Ofdm::new(cfg.frame.clone()).map_err(stage("ofdm"))?;
        let profile = TdlProfile::preset(&cfg.channel_profile).map_err(stage("channel"))?;
        let q = constellation.bits_per_symbol();
        let data_bits = cfg.frame.data_count() * q;
        let codewords = data_bits / code.n();
        let layout = FrameLayout {
            codewords,
            n: code.n(),
            k: code.k(),
            data_bits,
            filler_bits: data_bits - codewords * code.n(),
        };
        let llr_select = llr_indices(ofdm.pilots(), q);
        Ok(Link {
            cfg,
            code: Arc::new(code),
            constellation,
            ofdm,
            profile,
            layout,
            model: None,
            llr_select,
        })
    }

    pub fn with_model(cfg: LinkConfig, model: ReceiverModel) -> Result<Self, LinkError> {
        let mut link = Link::without_model(cfg)?;
        link.set_model(model)?;
        Ok(link)
    }

    pub fn set_model(&mut self, model: ReceiverModel) -> Result<(), LinkError> {
        check_compatible(&model, &self.cfg.frame, self.constellation.bits_per_symbol())
            .map_err(LinkError::Incompatible)?;
        self.model = Some(Arc::new(model));
        Ok(())
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn ofdm(&self) -> &Ofdm {
        &self.ofdm
    }

    pub fn profile(&self) -> &TdlProfile {
        &self.profile
    }

    pub fn layout(&self) -> FrameLayout {
        self.layout
    }

    pub fn model(&self) -> Option<&ReceiverModel> {
        self.model.as_deref()
    }

    /// Switches the receiver used by [`Link::run_frame`].
    pub fn with_receiver(mut self, kind: ReceiverKind) -> Self {
        self.cfg.receiver = kind;
        self
    }

    fn random_bits(n: usize, seed: u64) -> Vec<u8> {
        let mut rng = seed::rng(seed);
        (0..n).map(|_| rng.gen_range(0..2u8)).collect()
    }

    /// Encodes `info` (exactly [`FrameLayout::info_bits`] bits) and appends
    /// the frame's filler, giving every data bit in transmit order.
    pub fn frame_bits(&self, info: &[u8], frame_seed: u64) -> Result<Vec<u8>, LinkError> {
        let l = self.layout;
        if info.len() != l.info_bits() {
            return Err(LinkError::Stage {
                stage: "encode",
                message: format!("expected {} info bits, got {}", l.info_bits(), info.len()),
            });
        }
        let mut bits = Vec::with_capacity(l.data_bits);
        for block in info.chunks(l.k) {
            bits.extend(self.code.encode(block).map_err(stage("encode"))?);
        }
        bits.extend(Link::random_bits(
            l.filler_bits,
            seed::stream_seed(frame_seed, Stream::Filler),
        ));
        Ok(bits)
    }

    /// Maps, modulates, passes through the channel and adds noise.
    pub fn front_end(&self, bits: &[u8], snr_db: f64, frame_seed: u64) -> Result<Received, LinkError> {
        let symbols = self.constellation.map_stream(bits).map_err(stage("map"))?;
        let tx = self.ofdm.build_grid(&symbols).map_err(stage("grid"))?;
        let signal = self.ofdm.modulate(&tx);
        let channel = channel::generate_realization(
            &self.profile,
            &self.cfg.frame,
            seed::stream_seed(frame_seed, Stream::Channel),
        )
        .map_err(stage("channel"))?;
        let faded = channel::apply_channel(&channel, &self.cfg.frame, &signal).map_err(stage("channel"))?;
        let (noisy, noise_var) = channel::add_awgn(&faded, snr_db, seed::stream_seed(frame_seed, Stream::Noise));
        let grid = self.ofdm.demodulate(&noisy).map_err(stage("demodulate"))?;
        Ok(Received {
            grid,
            channel,
            noise_var,
        })
    }

    /// LLRs of every data bit with the configured receiver.
    pub fn receive(&self, rx: &Received) -> Result<LlrGrid, LinkError> {
        self.receive_with(self.cfg.receiver, rx)
    }

    pub fn receive_with(&self, kind: ReceiverKind, rx: &Received) -> Result<LlrGrid, LinkError> {
        let baseline_kind = match kind {
            ReceiverKind::BaselineLs => BaselineKind::LsEstimate,
            ReceiverKind::PerfectCsi => BaselineKind::PerfectCsi,
            ReceiverKind::Neural => {
                let model = self.model.as_deref().ok_or(LinkError::MissingModel)?;
                return receiver::receive_frame(model, &self.cfg.frame, &rx.grid, rx.noise_var)
                    .map_err(stage("neural receiver"));
            }
        };
        baseline::receive_frame(
            baseline_kind,
            &rx.grid,
            Some(&rx.channel),
            rx.noise_var,
            &self.constellation,
            self.cfg.equalizer,
        )
        .map_err(stage("baseline receiver"))
    }

    /// Sends caller-provided information bits through one frame.
    pub fn transmit_info(&self, info: &[u8], snr_db: f64, frame_seed: u64) -> Result<FrameOutcome, LinkError> {
        let l = self.layout;
        let mut trace = vec![StageTrace { stage: "info", len: info.len() }];
        let bits = self.frame_bits(info, frame_seed)?;
        trace.push(StageTrace { stage: "coded+filler", len: bits.len() });
        let rx = self.front_end(&bits, snr_db, frame_seed)?;
        trace.push(StageTrace { stage: "rx grid", len: rx.grid.values().len() });
        let llrs = self.receive(&rx)?;
        trace.push(StageTrace { stage: "llrs", len: llrs.len() });
        if llrs.len() != l.data_bits {
            return Err(LinkError::Stage {
                stage: "receiver",
                message: format!("produced {} LLRs for {} data bits", llrs.len(), l.data_bits),
            });
        }
        let dec_cfg = DecoderConfig {
            max_iters: self.cfg.bp_iters,
            ..Default::default()
        };
        let mut rx_info = Vec::with_capacity(info.len());
        let mut block_errors = 0;
        let mut bit_errors = 0;
        for (c, tx_block) in info.chunks(l.k).enumerate() {
            let r = self
                .code
                .decode(&llrs.llrs[c * l.n..(c + 1) * l.n], &dec_cfg)
                .map_err(stage("decode"))?;
            let block = self.code.extract_info(&r.bits);
            let e = block.iter().zip(tx_block).filter(|(a, b)| a != b).count();
            bit_errors += e;
            block_errors += (e > 0) as usize;
            rx_info.extend(block);
        }
        trace.push(StageTrace { stage: "decoded", len: rx_info.len() });
        Ok(FrameOutcome {
            tx_info: info.to_vec(),
            rx_info,
            bit_errors,
            block_errors,
            codewords: l.codewords,
            noise_var: rx.noise_var,
            trace,
        })
    }

    /// One frame with seeded random information bits.
    pub fn run_frame(&self, snr_db: f64, frame_seed: u64) -> Result<FrameOutcome, LinkError> {
        let info = Link::random_bits(self.layout.info_bits(), seed::stream_seed(frame_seed, Stream::Bits));
        self.transmit_info(&info, snr_db, frame_seed)
    }

    /// Tokens and target bits of one frame at an SNR drawn uniformly from
    /// the training range.
    pub fn training_sample(&self, sample_seed: u64) -> Result<TrainingSample, LinkError> {
        let t = &self.cfg.training;
        let snr = if t.snr_max_db > t.snr_min_db {
            seed::rng(seed::stream_seed(sample_seed, Stream::Snr)).gen_range(t.snr_min_db..t.snr_max_db)
        } else {
            t.snr_min_db
        };
        let info = Link::random_bits(self.layout.info_bits(), seed::stream_seed(sample_seed, Stream::Bits));
        let bits = self.frame_bits(&info, sample_seed)?;
        let rx = self.front_end(&bits, snr, sample_seed)?;
        let tokens = receiver::tokenize(&self.cfg.frame, &rx.grid, rx.noise_var).map_err(stage("tokenize"))?;
        Ok(TrainingSample {
            tokens,
            targets: bits.iter().map(|&b| b as f64).collect(),
        })
    }

    /// Flat head-output indices of the data bits, in transmit order.
    pub fn llr_select(&self) -> &[usize] {
        &self.llr_select
    }

    /// Trains `model` on frames of this link. Returns the per-step loss.
    pub fn train(
        &self,
        model: &mut ReceiverModel,
        steps: usize,
        seed: u64,
        exec: Exec,
        progress: impl FnMut(usize, f64),
    ) -> Result<Vec<f64>, LinkError> {
        check_compatible(model, &self.cfg.frame, self.constellation.bits_per_symbol())
            .map_err(LinkError::Incompatible)?;
        let t = &self.cfg.training;
        let cfg = TrainConfig {
            steps,
            batch: t.batch,
            adam: receiver::AdamConfig {
                lr: t.lr,
                ..Default::default()
            },
            seed,
            exec,
        };
        receiver::train_with_progress(
            model,
            &self.llr_select,
            &cfg,
            |s| self.training_sample(s).map_err(|e| ReceiverError::Sample(e.to_string())),
            progress,
        )
        .map_err(LinkError::Training)
    }
}

impl Link {
    /// Initializes a model from the configured dimensions and trains it.
    /// Initialization and frame sampling use seeds derived from `seed`.
    pub fn train_new_model(
        &self,
        steps: usize,
        seed: u64,
        exec: Exec,
        progress: impl FnMut(usize, f64),
    ) -> Result<(ReceiverModel, Vec<f64>), LinkError> {
        let mut model = ReceiverModel::new(self.cfg.receiver_config(), seed::derive(seed, 0, 0))
            .map_err(LinkError::Training)?;
        let trace = self.train(&mut model, steps, seed::derive(seed, 1, 0), exec, progress)?;
        Ok((model, trace))
    }
}

/// Perfect-CSI one-tap equalized data symbols of a received frame, for
/// uncoded symbol-level measurements.
pub fn equalize_perfect(rx: &Received) -> Result<Vec<Complex64>, LinkError> {
    let est = baseline::perfect_estimate(&rx.channel, rx.noise_var);
    let (x, _) = baseline::equalize(&rx.grid, &est, rx.noise_var, baseline::Equalizer::Zf)
        .map_err(stage("equalize"))?;
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(receiver: ReceiverKind, profile: &str) -> LinkConfig {
        LinkConfig::parse(&format!(
            "num_subcarriers = 16\nfft_size = 16\ncp_len = 10\nqam_order = 4\nldpc_n = 192\n\
             channel_profile = {profile}\nreceiver = {}\n",
            receiver.name()
        ))
        .unwrap()
    }

    #[test]
    fn default_frame_capacity() {
        let link = Link::without_model(LinkConfig::default()).unwrap();
        let l = link.layout();
        assert_eq!(l.data_bits, 1536 * 6);
        assert_eq!(l.codewords, 7);
        assert_eq!(l.filler_bits, 144);
        assert_eq!(l.codewords * l.n + l.filler_bits, l.data_bits);
    }

    #[test]
    fn noiseless_flat_frames_decode_exactly() {
        for kind in [ReceiverKind::BaselineLs, ReceiverKind::PerfectCsi] {
            let link = Link::without_model(small(kind, "flat")).unwrap();
            for s in 0..5 {
                let out = link.run_frame(f64::INFINITY, s).unwrap();
                assert_eq!(out.rx_info, out.tx_info);
                assert_eq!(out.bit_errors, 0);
            }
        }
    }

    #[test]
    fn frames_are_deterministic() {
        let link = Link::without_model(small(ReceiverKind::BaselineLs, "uma-low")).unwrap();
        let a = link.run_frame(3.0, 42).unwrap();
        let b = link.run_frame(3.0, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.tx_info, link.run_frame(3.0, 43).unwrap().tx_info);
    }

    #[test]
    fn trace_records_sizes() {
        let link = Link::without_model(small(ReceiverKind::PerfectCsi, "uma-low")).unwrap();
        let out = link.run_frame(20.0, 1).unwrap();
        let l = link.layout();
        let sizes: Vec<usize> = out.trace.iter().map(|t| t.len).collect();
        assert_eq!(sizes, vec![l.info_bits(), 384, 16 * 14, 384, l.info_bits()]);
    }

    #[test]
    fn neural_without_model_is_an_error() {
        let cfg = small(ReceiverKind::Neural, "flat");
        assert!(matches!(Link::new(cfg.clone()), Err(LinkError::MissingModel)));
        let link = Link::without_model(cfg).unwrap();
        assert!(matches!(link.run_frame(10.0, 1), Err(LinkError::MissingModel)));
    }

    #[test]
    fn mismatched_model_rejected() {
        let cfg = small(ReceiverKind::Neural, "flat");
        let wrong = ReceiverModel::new(
            crate::receiver::ReceiverConfig {
                d_model: 8,
                heads: 2,
                blocks: 1,
                ffn: 4,
                ..crate::receiver::ReceiverConfig::new(14, 6)
            },
            1,
        )
        .unwrap();
        assert!(matches!(Link::with_model(cfg, wrong), Err(LinkError::Incompatible(_))));
    }

    #[test]
    fn wrong_info_length_names_stage() {
        let link = Link::without_model(small(ReceiverKind::PerfectCsi, "flat")).unwrap();
        match link.transmit_info(&[0, 1], 10.0, 1) {
            Err(LinkError::Stage { stage, .. }) => assert_eq!(stage, "encode"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn training_sample_targets_are_frame_bits() {
        let link = Link::without_model(small(ReceiverKind::Neural, "uma-low")).unwrap();
        let s = link.training_sample(5).unwrap();
        assert_eq!(s.tokens.shape(), &[16, 57]);
        assert_eq!(s.targets.len(), 384);
        assert!(s.tokens.get(0, 56) > 0.0);
        assert_eq!(s, link.training_sample(5).unwrap());
    }
}
