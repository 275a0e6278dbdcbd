//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 unreadable
//! or invalid config, 4 model file or model/link shape mismatch.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::exec::Exec;
use crate::link::{run_ber_sweep, snr_points, write_csv, Link, LinkConfig, LinkError, ReceiverKind, StopRule};
use crate::ofdm::kronecker_pilot_pattern;
use crate::receiver::{model_grad_check, save_model, ReceiverConfig};

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_MODEL: i32 = 4;

/// Gradient-check tolerance used by `gradcheck`.
pub const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "diffrx", version, about = "OFDM link simulator with a differential-attention neural receiver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// BER/BLER sweep with the configured receiver.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// baseline-ls, perfect-csi or neural.
        #[arg(long)]
        receiver: Option<String>,
        /// Model file for the neural receiver.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Train the neural receiver and write a model file.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        /// Output model path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-step loss, one value per line.
        #[arg(long)]
        loss_out: Option<PathBuf>,
    },
    /// BER/BLER sweep with the neural receiver.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        sweep: SweepArgs,
    },
    /// Finite-difference check of the full receiver network.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        probes: usize,
    },
    /// Print the resolved configuration.
    Info {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate frames on one thread.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, allow_hyphen_values = true)]
    snr_start: f64,
    #[arg(long, allow_hyphen_values = true)]
    snr_stop: f64,
    #[arg(long, default_value_t = 1.0)]
    snr_step: f64,
    #[arg(long, default_value_t = 100)]
    target_errors: usize,
    #[arg(long, default_value_t = 10)]
    min_frames: usize,
    #[arg(long, default_value_t = 1000)]
    max_frames: usize,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<LinkError> for Failure {
    fn from(e: LinkError) -> Self {
        let code = match &e {
            LinkError::Config(_) => EXIT_CONFIG,
            LinkError::ModelFile { .. } | LinkError::Incompatible(_) => EXIT_MODEL,
            LinkError::Usage(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

fn load_config(common: &Common) -> Result<LinkConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => LinkConfig::load(p).map_err(LinkError::from)?,
        None => LinkConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn exec(common: &Common) -> Exec {
    if common.serial {
        Exec::Serial
    } else {
        Exec::default()
    }
}

fn sweep(link: &Link, args: &SweepArgs, exec: Exec, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let snrs = snr_points(args.snr_start, args.snr_stop, args.snr_step);
    if snrs.is_empty() {
        return Err(usage(format!(
            "empty SNR range: start {} stop {} step {}",
            args.snr_start, args.snr_stop, args.snr_step
        )));
    }
    let stop = StopRule {
        min_frames: args.min_frames,
        max_frames: args.max_frames,
        target_errors: args.target_errors,
    };
    let rows = run_ber_sweep(link, &snrs, stop, exec)?;
    for r in &rows {
        let _ = writeln!(err, "{:>6} dB  ber {:.3e}  bler {:.3e}  ({} frames)", r.snr_db, r.ber, r.bler, r.frames);
    }
    match &args.out {
        Some(p) => write_csv(&rows, BufWriter::new(File::create(p)?))?,
        None => write_csv(&rows, &mut *out)?,
    }
    Ok(())
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    match cmd {
        Command::Simulate { common, receiver, model, sweep: s } => {
            let mut cfg = load_config(&common)?;
            if let Some(r) = receiver {
                cfg.receiver = r.parse().map_err(|e: String| usage(format!("--receiver {r}: {e}")))?;
            }
            if model.is_some() {
                cfg.model_path = model;
            }
            let link = Link::new(cfg)?;
            sweep(&link, &s, exec(&common), out, err)
        }
        Command::Eval { common, model, sweep: s } => {
            let mut cfg = load_config(&common)?;
            cfg.receiver = ReceiverKind::Neural;
            cfg.model_path = Some(model);
            let link = Link::new(cfg)?;
            sweep(&link, &s, exec(&common), out, err)
        }
        Command::Train { common, steps, lr, batch, out: path, loss_out } => {
            let mut cfg = load_config(&common)?;
            if let Some(lr) = lr {
                cfg.training.lr = lr;
            }
            if let Some(b) = batch {
                cfg.training.batch = b;
            }
            cfg.validate().map_err(LinkError::from)?;
            let steps = steps.unwrap_or(cfg.training.steps);
            if steps == 0 {
                return Err(usage("--steps must be at least 1"));
            }
            let link = Link::without_model(cfg.clone())?;
            let every = (steps / 20).max(1);
            let (model, trace) = link.train_new_model(steps, cfg.seed, exec(&common), |s, l| {
                if (s + 1) % every == 0 {
                    let _ = writeln!(err, "step {:>6}  loss {l:.5}", s + 1);
                }
            })?;
            save_model(&model, &path).map_err(|source| LinkError::ModelFile { path: path.clone(), source })?;
            if let Some(p) = loss_out {
                let mut w = BufWriter::new(File::create(p)?);
                for l in &trace {
                    writeln!(w, "{l}")?;
                }
            }
            let _ = writeln!(
                out,
                "trained {} parameters for {steps} steps, final loss {:.5}, saved {}",
                model.num_scalars(),
                trace.last().copied().unwrap_or(f64::NAN),
                path.display()
            );
            Ok(())
        }
        Command::Gradcheck { seed, probes } => {
            let cfg = LinkConfig::default();
            let rc = ReceiverConfig::new(cfg.frame.num_symbols, cfg.bits_per_symbol());
            let pattern = kronecker_pilot_pattern(&cfg.frame);
            let e = model_grad_check(&rc, &pattern, seed, probes, 1e-5).map_err(|e| Failure {
                code: EXIT_RUNTIME,
                message: e.to_string(),
            })?;
            let _ = writeln!(out, "max relative error {e:.3e} over {probes} parameters (seed {seed})");
            if e < GRADCHECK_TOL {
                Ok(())
            } else {
                Err(Failure {
                    code: EXIT_RUNTIME,
                    message: format!("gradient check failed: {e:.3e} >= {GRADCHECK_TOL:e}"),
                })
            }
        }
        Command::Info { config } => {
            let cfg = match config {
                Some(p) => LinkConfig::load(p).map_err(LinkError::from)?,
                None => LinkConfig::default(),
            };
            let link = Link::without_model(cfg.clone())?;
            let f = &cfg.frame;
            let l = link.layout();
            let _ = writeln!(
                out,
                "frame: {} subcarriers, {} kHz spacing, {} symbols, FFT {}, CP {}, pilots on symbols {:?}",
                f.num_subcarriers,
                f.subcarrier_spacing_hz / 1e3,
                f.num_symbols,
                f.fft_size,
                f.cp_len,
                f.pilot_symbols
            );
            let _ = writeln!(out, "modulation: {}-QAM", cfg.qam_order);
            let _ = writeln!(
                out,
                "code: LDPC n={} k={} rate {:.4}, {} codewords + {} filler bits per frame",
                l.n,
                l.k,
                link.code().rate(),
                l.codewords,
                l.filler_bits
            );
            let _ = writeln!(out, "channel: {}, receiver: {}", cfg.channel_profile, cfg.receiver.name());
            let _ = writeln!(out, "--- resolved config ---");
            let _ = write!(out, "{}", cfg.to_text());
            Ok(())
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
