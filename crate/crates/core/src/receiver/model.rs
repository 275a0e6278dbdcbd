use rand::Rng;

use super::ReceiverError;
use crate::autodiff::{Tape, Tensor, TensorError, Var};
use crate::ofdm::PilotPattern;
use crate::seed;

/// Layer-norm variance floor.
pub const LN_EPS: f64 = 1e-5;
/// Initial value of the learnable attention-map weight.
pub const LAMBDA_INIT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }

    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    /// OFDM symbols per frame; each token spans all of them.
    pub num_symbols: usize,
    pub bits_per_symbol: usize,
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn: usize,
    /// Pre-norm residual blocks with a feed-forward sublayer. When off, each
    /// block is `φ(Wo·DiffAttn(H) + bo)` with nothing else.
    pub residual: bool,
    /// Scales the second attention map by a learned scalar per block.
    pub learnable_lambda: bool,
    pub activation: Activation,
}

impl ReceiverConfig {
    pub fn new(num_symbols: usize, bits_per_symbol: usize) -> Self {
        ReceiverConfig {
            num_symbols,
            bits_per_symbol,
            d_model: 128,
            heads: 4,
            blocks: 4,
            ffn: 128,
            residual: true,
            learnable_lambda: false,
            activation: Activation::Relu,
        }
    }

    /// Re/Im of received symbols, Re/Im of pilots, noise variance.
    pub fn n_feat(&self) -> usize {
        4 * self.num_symbols + 1
    }

    pub fn out_dim(&self) -> usize {
        self.num_symbols * self.bits_per_symbol
    }

    /// Query/key width; values are twice as wide so that the heads
    /// concatenate back to `d_model`.
    pub fn d_head(&self) -> usize {
        self.d_model / (2 * self.heads)
    }

    pub fn validate(&self) -> Result<(), ReceiverError> {
        let bad = |m: String| Err(ReceiverError::Config(m));
        if self.num_symbols == 0 || self.bits_per_symbol == 0 {
            return bad("frame must have symbols and bits".into());
        }
        if self.heads == 0 || self.blocks == 0 || self.ffn == 0 {
            return bad("heads, blocks and ffn width must be positive".into());
        }
        if self.d_model == 0 || self.d_model % (2 * self.heads) != 0 {
            return bad(format!(
                "d_model {} must be a positive multiple of 2·heads = {}",
                self.d_model,
                2 * self.heads
            ));
        }
        Ok(())
    }

    /// Parameter names and shapes in storage order. The forward graph
    /// consumes parameters in exactly this order.
    pub fn param_specs(&self) -> Vec<(String, Vec<usize>)> {
        let (d, dh, f) = (self.d_model, self.d_head(), self.ffn);
        let mut s = vec![
            ("w0".to_string(), vec![d, self.n_feat()]),
            ("b0".to_string(), vec![d]),
        ];
        for l in 0..self.blocks {
            if self.residual {
                s.push((format!("block{l}.ln1.gain"), vec![d]));
                s.push((format!("block{l}.ln1.bias"), vec![d]));
            }
            for h in 0..self.heads {
                for w in ["wq1", "wq2", "wk1", "wk2"] {
                    s.push((format!("block{l}.head{h}.{w}"), vec![dh, d]));
                }
                s.push((format!("block{l}.head{h}.wv"), vec![2 * dh, d]));
            }
            if self.learnable_lambda {
                s.push((format!("block{l}.lambda"), vec![1]));
            }
            s.push((format!("block{l}.wo"), vec![d, d]));
            s.push((format!("block{l}.bo"), vec![d]));
            if self.residual {
                s.push((format!("block{l}.ln2.gain"), vec![d]));
                s.push((format!("block{l}.ln2.bias"), vec![d]));
                s.push((format!("block{l}.w1"), vec![f, d]));
                s.push((format!("block{l}.b1"), vec![f]));
                s.push((format!("block{l}.w2"), vec![d, f]));
                s.push((format!("block{l}.b2"), vec![d]));
            }
        }
        s.push(("w_llr".to_string(), vec![self.out_dim(), d]));
        s.push(("b_llr".to_string(), vec![self.out_dim()]));
        s
    }
}

/// Query, key and value projections of one attention head.
#[derive(Debug, Clone, Copy)]
pub struct HeadVars {
    pub wq1: Var,
    pub wq2: Var,
    pub wk1: Var,
    pub wk2: Var,
    pub wv: Var,
}

/// `softmax(Q1K1ᵀ/√d) − λ·softmax(Q2K2ᵀ/√d)` with λ = 1 when `lambda` is
/// `None`. Every row sums to `1 − λ`.
pub fn diff_attention_map(
    tape: &mut Tape,
    h: Var,
    head: &HeadVars,
    lambda: Option<Var>,
    d_head: usize,
) -> Result<Var, TensorError> {
    let scale = 1.0 / (d_head as f64).sqrt();
    let map = |tape: &mut Tape, wq: Var, wk: Var| -> Result<Var, TensorError> {
        let q = tape.matmul_nt(h, wq)?;
        let k = tape.matmul_nt(h, wk)?;
        let s = tape.matmul_nt(q, k)?;
        let s = tape.scale(s, scale);
        Ok(tape.softmax_rows(s))
    };
    let a1 = map(tape, head.wq1, head.wk1)?;
    let mut a2 = map(tape, head.wq2, head.wk2)?;
    if let Some(l) = lambda {
        a2 = tape.scale_by(a2, l)?;
    }
    tape.sub(a1, a2)
}

/// One differential-attention head: `[N×d_model] → [N×2·d_head]`.
pub fn diff_attention(
    tape: &mut Tape,
    h: Var,
    head: &HeadVars,
    lambda: Option<Var>,
    d_head: usize,
) -> Result<Var, TensorError> {
    let a = diff_attention_map(tape, h, head, lambda, d_head)?;
    let v = tape.matmul_nt(h, head.wv)?;
    tape.matmul(a, v)
}

/// Records the full network on `tape`. `params` must follow
/// [`ReceiverConfig::param_specs`]; `tokens` is `[S × n_feat]`. Returns
/// `[S × out_dim]` LLRs, or the gathered entries when `select` is given.
pub fn forward_graph(
    cfg: &ReceiverConfig,
    tape: &mut Tape,
    params: &[Var],
    tokens: Var,
    select: Option<&[usize]>,
) -> Result<Var, TensorError> {
    let mut it = params.iter().copied();
    let mut next = || {
        it.next().ok_or(TensorError::InvalidShape {
            shape: vec![params.len()],
            len: 0,
        })
    };
    let linear = |tape: &mut Tape, x: Var, w: Var, b: Var| -> Result<Var, TensorError> {
        let y = tape.matmul_nt(x, w)?;
        tape.add_row(y, b)
    };

    let (w0, b0) = (next()?, next()?);
    let x = linear(tape, tokens, w0, b0)?;
    let mut h = cfg.activation.apply(tape, x);

    for _ in 0..cfg.blocks {
        let ln1 = if cfg.residual { Some((next()?, next()?)) } else { None };
        let mut heads = Vec::with_capacity(cfg.heads);
        for _ in 0..cfg.heads {
            heads.push(HeadVars {
                wq1: next()?,
                wq2: next()?,
                wk1: next()?,
                wk2: next()?,
                wv: next()?,
            });
        }
        let lambda = if cfg.learnable_lambda { Some(next()?) } else { None };
        let (wo, bo) = (next()?, next()?);

        let attn_in = match ln1 {
            Some((g, b)) => tape.layer_norm(h, g, b, LN_EPS)?,
            None => h,
        };
        let outs = heads
            .iter()
            .map(|hv| diff_attention(tape, attn_in, hv, lambda, cfg.d_head()))
            .collect::<Result<Vec<_>, _>>()?;
        let cat = tape.concat_cols(&outs)?;
        let proj = linear(tape, cat, wo, bo)?;

        if cfg.residual {
            let (g2, b2n, w1, b1, w2, b2) = (next()?, next()?, next()?, next()?, next()?, next()?);
            let x = tape.add(h, proj)?;
            let n = tape.layer_norm(x, g2, b2n, LN_EPS)?;
            let f = linear(tape, n, w1, b1)?;
            let f = cfg.activation.apply(tape, f);
            let f = linear(tape, f, w2, b2)?;
            h = tape.add(x, f)?;
        } else {
            h = cfg.activation.apply(tape, proj);
        }
    }

    let (wl, bl) = (next()?, next()?);
    let out = linear(tape, h, wl, bl)?;
    match select {
        Some(idx) => tape.select(out, idx.to_vec()),
        None => Ok(out),
    }
}

/// Flat indices into the `[S × T·q]` head output of each data bit, in
/// transmit order: element `(m, n)` bit `b` sits at `m·T·q + n·q + b`.
pub fn llr_indices(pattern: &PilotPattern, bits_per_symbol: usize) -> Vec<usize> {
    let s = pattern.num_subcarriers();
    let out_dim = pattern.num_symbols() * bits_per_symbol;
    let mut idx = Vec::with_capacity(pattern.data_positions().len() * bits_per_symbol);
    for &p in pattern.data_positions() {
        let (n, m) = (p / s, p % s);
        for b in 0..bits_per_symbol {
            idx.push(m * out_dim + n * bits_per_symbol + b);
        }
    }
    idx
}

/// Parameters of the neural receiver, stored in the order given by
/// [`ReceiverConfig::param_specs`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverModel {
    config: ReceiverConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
}

impl ReceiverModel {
    /// Xavier-uniform projections, zero biases, unit layer-norm gains.
    pub fn new(config: ReceiverConfig, seed: u64) -> Result<Self, ReceiverError> {
        config.validate()?;
        let mut rng = seed::rng(seed);
        let specs = config.param_specs();
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for (name, shape) in specs {
            let len: usize = shape.iter().product();
            let data = if name.ends_with("gain") {
                vec![1.0; len]
            } else if name.ends_with("lambda") {
                vec![LAMBDA_INIT]
            } else if shape.len() == 2 {
                let a = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                (0..len).map(|_| rng.gen_range(-a..a)).collect()
            } else {
                vec![0.0; len]
            };
            params.push(Tensor::new(shape, data)?);
            names.push(name);
        }
        Ok(ReceiverModel {
            config,
            names,
            params,
        })
    }

    /// Assembles a model from named tensors, checking names and shapes
    /// against the configuration.
    pub fn from_parts(
        config: ReceiverConfig,
        named: Vec<(String, Tensor)>,
    ) -> Result<Self, ReceiverError> {
        config.validate()?;
        let specs = config.param_specs();
        if specs.len() != named.len() {
            return Err(ReceiverError::ParamCount {
                expected: specs.len(),
                got: named.len(),
            });
        }
        let mut names = Vec::with_capacity(specs.len());
        let mut params = Vec::with_capacity(specs.len());
        for ((name, shape), (got_name, t)) in specs.into_iter().zip(named) {
            if name != got_name || shape != t.shape() {
                return Err(ReceiverError::ParamShape {
                    name,
                    expected: shape,
                    got: t.shape().to_vec(),
                });
            }
            names.push(name);
            params.push(t);
        }
        Ok(ReceiverModel {
            config,
            names,
            params,
        })
    }

    pub fn config(&self) -> &ReceiverConfig {
        &self.config
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(Tensor::is_finite)
    }

    fn check_tokens(&self, tokens: &Tensor) -> Result<(), ReceiverError> {
        if tokens.shape().len() != 2 || tokens.cols() != self.config.n_feat() {
            return Err(ReceiverError::TokenShape {
                expected: self.config.n_feat(),
                got: tokens.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Head output for the selected bit positions.
    pub fn forward(&self, tokens: &Tensor, select: &[usize]) -> Result<Vec<f64>, ReceiverError> {
        self.check_tokens(tokens)?;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let t = tape.leaf(tokens.clone());
        let out = forward_graph(&self.config, &mut tape, &vars, t, Some(select))?;
        Ok(tape.value(out).data().to_vec())
    }

    /// Full `[S × T·q]` head output.
    pub fn forward_all(&self, tokens: &Tensor) -> Result<Tensor, ReceiverError> {
        self.check_tokens(tokens)?;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let t = tape.leaf(tokens.clone());
        let out = forward_graph(&self.config, &mut tape, &vars, t, None)?;
        Ok(tape.value(out).clone())
    }

    /// Mean BCE of the selected LLRs against `targets` and its gradient
    /// with respect to every parameter.
    pub fn loss_and_grads(
        &self,
        tokens: &Tensor,
        select: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Vec<Tensor>), ReceiverError> {
        self.check_tokens(tokens)?;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.leaf(p.clone())).collect();
        let t = tape.leaf(tokens.clone());
        let llr = forward_graph(&self.config, &mut tape, &vars, t, Some(select))?;
        let loss = tape.bce_llr(llr, targets)?;
        let grads = tape.backward(loss)?;
        let g = vars
            .iter()
            .zip(&self.params)
            .map(|(&v, p)| grads.get_or_zeros(v, p.shape()))
            .collect();
        Ok((tape.value(loss).data()[0], g))
    }
}
