use super::{ReceiverError, ReceiverModel};
use crate::autodiff::Tensor;
use crate::exec::Exec;
use crate::seed;

/// Tokens of one received frame and the transmitted bits its LLRs should
/// predict, in transmit order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub tokens: Tensor,
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &[Tensor]) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
        Adam {
            cfg,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        self.t += 1;
        let c = self.cfg;
        let bc1 = 1.0 - c.beta1.powi(self.t);
        let bc2 = 1.0 - c.beta2.powi(self.t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &g)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
                *w -= c.lr * (m[j] / bc1) / ((v[j] / bc2).sqrt() + c.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 1000,
            batch: 8,
            adam: AdamConfig::default(),
            seed: 1,
            exec: Exec::default(),
        }
    }
}

/// See [`train_with_progress`].
pub fn train<F>(
    model: &mut ReceiverModel,
    select: &[usize],
    cfg: &TrainConfig,
    sample: F,
) -> Result<Vec<f64>, ReceiverError>
where
    F: Fn(u64) -> Result<TrainingSample, ReceiverError> + Sync + Send,
{
    train_with_progress(model, select, cfg, sample, |_, _| {})
}

/// Minimizes the batch-mean BCE with Adam. Item `i` of step `s` is drawn
/// with `sample(derive(seed, s, i))`; per-item gradients are computed
/// independently and summed in item order, so the result does not depend
/// on `cfg.exec`. Returns the per-step mean loss.
pub fn train_with_progress<F, P>(
    model: &mut ReceiverModel,
    select: &[usize],
    cfg: &TrainConfig,
    sample: F,
    mut progress: P,
) -> Result<Vec<f64>, ReceiverError>
where
    F: Fn(u64) -> Result<TrainingSample, ReceiverError> + Sync + Send,
    P: FnMut(usize, f64),
{
    if cfg.steps == 0 {
        return Err(ReceiverError::NoSteps);
    }
    if cfg.batch == 0 {
        return Err(ReceiverError::Config("batch size must be positive".into()));
    }
    let mut adam = Adam::new(cfg.adam, model.params());
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let snapshot = &*model;
        let items = cfg.exec.map_range(0, cfg.batch, |i| {
            let s = sample(seed::derive(cfg.seed, step as u64, i as u64))?;
            snapshot.loss_and_grads(&s.tokens, select, &s.targets)
        });
        let mut loss = 0.0;
        let mut total: Option<Vec<Tensor>> = None;
        for item in items {
            let (l, g) = item?;
            loss += l;
            match &mut total {
                None => total = Some(g),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&g) {
                        for (x, y) in a.data_mut().iter_mut().zip(g.data()) {
                            *x += y;
                        }
                    }
                }
            }
        }
        let scale = 1.0 / cfg.batch as f64;
        loss *= scale;
        if !loss.is_finite() {
            return Err(ReceiverError::Diverged { step, loss });
        }
        let mut grads = total.expect("batch is nonempty");
        for g in &mut grads {
            g.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        adam.step(model.params_mut(), &grads);
        if !model.is_finite() {
            return Err(ReceiverError::Diverged { step, loss: f64::NAN });
        }
        trace.push(loss);
        progress(step, loss);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::receiver::{ReceiverConfig, ReceiverModel};
    use rand::Rng;

    fn tiny() -> ReceiverModel {
        let cfg = ReceiverConfig {
            d_model: 8,
            heads: 2,
            blocks: 1,
            ffn: 8,
            ..ReceiverConfig::new(2, 1)
        };
        ReceiverModel::new(cfg, 3).unwrap()
    }

    // target bit is the sign of the first feature of each token
    fn sample(seed: u64) -> Result<TrainingSample, ReceiverError> {
        let mut rng = seed::rng(seed);
        let x: Vec<f64> = (0..4 * 9).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let targets = x.chunks(9).map(|r| (r[0] < 0.0) as u8 as f64).collect();
        Ok(TrainingSample {
            tokens: Tensor::new(vec![4, 9], x).unwrap(),
            targets,
        })
    }

    const SELECT: [usize; 4] = [0, 2, 4, 6];

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = vec![Tensor::vector(vec![1.0, -2.0, 0.5])];
        let g = vec![Tensor::vector(vec![0.3, -4.0, 0.0])];
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.step(&mut p, &g);
        let d = p[0].data();
        assert!((d[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((d[1] - (-2.0 + 1e-3)).abs() < 1e-9);
        assert_eq!(d[2], 0.5);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = vec![Tensor::vector(vec![3.0, -1.5])];
        let mut adam = Adam::new(AdamConfig { lr: 0.05, ..Default::default() }, &p);
        for _ in 0..2000 {
            let g = vec![Tensor::vector(p[0].data().iter().map(|x| 2.0 * x).collect())];
            adam.step(&mut p, &g);
        }
        assert!(p[0].data().iter().all(|x| x.abs() < 1e-2));
    }

    #[test]
    fn zero_steps_rejected() {
        let mut m = tiny();
        let cfg = TrainConfig { steps: 0, ..Default::default() };
        assert!(matches!(train(&mut m, &SELECT, &cfg, sample), Err(ReceiverError::NoSteps)));
    }

    #[test]
    fn learns_sign_task() {
        let mut m = tiny();
        let cfg = TrainConfig {
            steps: 300,
            batch: 4,
            adam: AdamConfig { lr: 1e-2, ..Default::default() },
            ..Default::default()
        };
        let trace = train(&mut m, &SELECT, &cfg, sample).unwrap();
        let head: f64 = trace[..20].iter().sum::<f64>() / 20.0;
        let tail: f64 = trace[280..].iter().sum::<f64>() / 20.0;
        assert!(tail < 0.5 * head, "{head} -> {tail}");
    }

    #[test]
    fn serial_and_parallel_are_identical() {
        let run = |exec| {
            let mut m = tiny();
            let cfg = TrainConfig { steps: 5, batch: 6, exec, ..Default::default() };
            let t = train(&mut m, &SELECT, &cfg, sample).unwrap();
            (t, m)
        };
        let (ta, ma) = run(Exec::Serial);
        let (tb, mb) = run(Exec::Parallel);
        assert_eq!(ta, tb);
        assert_eq!(ma, mb);
    }

    #[test]
    fn nan_input_reports_divergence() {
        let mut m = tiny();
        let cfg = TrainConfig { steps: 3, batch: 2, ..Default::default() };
        let bad = |_| {
            Ok(TrainingSample {
                tokens: Tensor::new(vec![4, 9], vec![f64::NAN; 36]).unwrap(),
                targets: vec![0.0; 4],
            })
        };
        let r = train(&mut m, &SELECT, &cfg, bad);
        assert!(matches!(r, Err(ReceiverError::Diverged { step: 0, .. })), "{r:?}");
    }
}
