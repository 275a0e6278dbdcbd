use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{kronecker_pilot_pattern, FrameConfig, OfdmError, PilotPattern, ResourceGrid};

/// CP-OFDM modulator and demodulator for one frame configuration. Both
/// directions use a unitary `1/√N` DFT scaling. Subcarrier `m` occupies FFT
/// bin `m`; bins `S..N` are left empty.
#[derive(Clone)]
pub struct Ofdm {
    cfg: FrameConfig,
    pilots: Arc<PilotPattern>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Ofdm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ofdm").field("cfg", &self.cfg).finish()
    }
}

impl Ofdm {
    pub fn new(cfg: FrameConfig) -> Result<Self, OfdmError> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(cfg.fft_size);
        let inverse = planner.plan_fft_inverse(cfg.fft_size);
        let pilots = Arc::new(kronecker_pilot_pattern(&cfg));
        Ok(Ofdm {
            cfg,
            pilots,
            forward,
            inverse,
        })
    }

    pub fn config(&self) -> &FrameConfig {
        &self.cfg
    }

    pub fn pilots(&self) -> &Arc<PilotPattern> {
        &self.pilots
    }

    pub fn build_grid(&self, data: &[Complex64]) -> Result<ResourceGrid, OfdmError> {
        ResourceGrid::build(self.pilots.clone(), data)
    }

    /// Time-domain frame of `T·(N + cp)` samples.
    pub fn modulate(&self, grid: &ResourceGrid) -> Vec<Complex64> {
        let (n, cp, s) = (self.cfg.fft_size, self.cfg.cp_len, self.cfg.num_subcarriers);
        let scale = 1.0 / (n as f64).sqrt();
        let mut out = Vec::with_capacity(self.cfg.frame_samples());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for sym in 0..self.cfg.num_symbols {
            buf.fill(Complex64::new(0.0, 0.0));
            buf[..s].copy_from_slice(grid.symbol(sym));
            self.inverse.process(&mut buf);
            for v in buf.iter_mut() {
                *v *= scale;
            }
            out.extend_from_slice(&buf[n - cp..]);
            out.extend_from_slice(&buf);
        }
        out
    }

    /// Drops each cyclic prefix, transforms, and keeps the first `S` bins.
    pub fn demodulate(&self, signal: &[Complex64]) -> Result<ResourceGrid, OfdmError> {
        let expected = self.cfg.frame_samples();
        if signal.len() != expected {
            return Err(OfdmError::LengthMismatch {
                what: "time samples",
                expected,
                got: signal.len(),
            });
        }
        let (n, cp, s) = (self.cfg.fft_size, self.cfg.cp_len, self.cfg.num_subcarriers);
        let scale = 1.0 / (n as f64).sqrt();
        let mut values = Vec::with_capacity(self.cfg.resource_elements());
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for block in signal.chunks(n + cp) {
            buf.copy_from_slice(&block[cp..]);
            self.forward.process(&mut buf);
            values.extend(buf[..s].iter().map(|v| v * scale));
        }
        ResourceGrid::from_values(self.pilots.clone(), values)
    }
}
