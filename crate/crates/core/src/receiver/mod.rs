//! Neural receiver: a stack of differential-attention blocks mapping one
//! received resource grid to per-bit LLRs.

mod io;
mod model;
mod tokenize;
mod train;

pub use io::{decode_model, encode_model, load_model, save_model, ModelFileError, MAGIC, VERSION};
pub use model::{
    diff_attention, diff_attention_map, forward_graph, llr_indices, Activation, HeadVars,
    ReceiverConfig, ReceiverModel, LAMBDA_INIT, LN_EPS,
};
pub use tokenize::tokenize;
pub use train::{train, train_with_progress, Adam, AdamConfig, TrainConfig, TrainingSample};

use thiserror::Error;

use crate::autodiff::TensorError;
use crate::modem::LlrGrid;
use crate::ofdm::{FrameConfig, ResourceGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReceiverError {
    #[error("invalid receiver configuration: {0}")]
    Config(String),
    #[error("expected {expected} parameter tensors, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("parameter {name}: expected shape {expected:?}, got {got:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("tokens must be [N × {expected}], got {got:?}")]
    TokenShape { expected: usize, got: Vec<usize> },
    #[error("grid is {got:?} (subcarriers, symbols), expected {expected:?}")]
    GridShape {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("model emits {got} LLRs per token but the frame needs {expected}")]
    FrameMismatch { expected: usize, got: usize },
    #[error("training needs at least one step")]
    NoSteps,
    #[error("training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },
    #[error("training sample: {0}")]
    Sample(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Checks that `model` fits frames of `cfg` with `bits_per_symbol` bits
/// per element.
pub fn check_compatible(
    model: &ReceiverModel,
    cfg: &FrameConfig,
    bits_per_symbol: usize,
) -> Result<(), ReceiverError> {
    let c = model.config();
    let expected = cfg.num_symbols * bits_per_symbol;
    if c.num_symbols != cfg.num_symbols || c.bits_per_symbol != bits_per_symbol {
        return Err(ReceiverError::FrameMismatch {
            expected,
            got: c.out_dim(),
        });
    }
    Ok(())
}

/// LLRs of every data bit of `grid`, in transmit order.
pub fn receive_frame(
    model: &ReceiverModel,
    cfg: &FrameConfig,
    grid: &ResourceGrid,
    noise_var: f64,
) -> Result<LlrGrid, ReceiverError> {
    let q = model.config().bits_per_symbol;
    check_compatible(model, cfg, q)?;
    let tokens = tokenize(cfg, grid, noise_var)?;
    let llrs = model.forward(&tokens, &llr_indices(grid.pilots(), q))?;
    Ok(LlrGrid {
        bits_per_symbol: q,
        llrs,
    })
}

/// Central-difference check of the full network at `probes` randomly drawn
/// parameter entries, on random tokens and random target bits over the
/// data positions of `pattern`. Returns the worst relative error.
pub fn model_grad_check(
    cfg: &ReceiverConfig,
    pattern: &crate::ofdm::PilotPattern,
    seed: u64,
    probes: usize,
    step: f64,
) -> Result<f64, ReceiverError> {
    use rand::Rng;
    let model = ReceiverModel::new(cfg.clone(), seed)?;
    let mut rng = crate::seed::rng(crate::seed::derive(seed, 1, 0));
    let s = pattern.num_subcarriers();
    let tokens = crate::autodiff::Tensor::new(
        vec![s, cfg.n_feat()],
        (0..s * cfg.n_feat()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )?;
    let select = llr_indices(pattern, cfg.bits_per_symbol);
    let targets: Vec<f64> = select.iter().map(|_| rng.gen_range(0..2u8) as f64).collect();
    let mut inputs = model.params().to_vec();
    inputs.push(tokens);
    let total: usize = model.num_scalars();
    let picks: Vec<(usize, usize)> = (0..probes)
        .map(|_| {
            // uniform over all parameter scalars
            let mut flat = rng.gen_range(0..total);
            let mut i = 0;
            while flat >= inputs[i].len() {
                flat -= inputs[i].len();
                i += 1;
            }
            (i, flat)
        })
        .collect();
    let err = crate::autodiff::grad_check_probes(
        |tape, vars| {
            let (p, t) = vars.split_at(vars.len() - 1);
            let out = forward_graph(cfg, tape, p, t[0], Some(&select))?;
            tape.bce_llr(out, &targets)
        },
        &inputs,
        &picks,
        step,
    )?;
    Ok(err)
}
