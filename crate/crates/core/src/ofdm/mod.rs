//! Resource grids, pilot layout and CP-OFDM (de)modulation.

mod grid;
mod modulator;

pub use grid::{kronecker_pilot_pattern, PilotPattern, ResourceGrid};
pub use modulator::Ofdm;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OfdmError {
    #[error("invalid frame configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Dimensions of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig {
    pub num_subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub num_symbols: usize,
    pub fft_size: usize,
    pub cp_len: usize,
    /// OFDM symbols that carry pilots on every subcarrier.
    pub pilot_symbols: Vec<usize>,
    pub pilot_seed: u64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            num_subcarriers: 128,
            subcarrier_spacing_hz: 240e3,
            num_symbols: 14,
            fft_size: 128,
            cp_len: 16,
            pilot_symbols: vec![2, 11],
            pilot_seed: 1,
        }
    }
}

impl FrameConfig {
    pub fn validate(&self) -> Result<(), OfdmError> {
        let bad = |m: String| Err(OfdmError::InvalidConfig(m));
        if self.num_subcarriers == 0 || self.num_symbols == 0 {
            return bad("frame must have at least one subcarrier and one symbol".into());
        }
        if self.num_subcarriers > self.fft_size {
            return bad(format!(
                "{} subcarriers exceed FFT size {}",
                self.num_subcarriers, self.fft_size
            ));
        }
        if self.cp_len >= self.fft_size {
            return bad(format!(
                "cyclic prefix {} must be shorter than FFT size {}",
                self.cp_len, self.fft_size
            ));
        }
        if let Some(&p) = self.pilot_symbols.iter().find(|&&p| p >= self.num_symbols) {
            return bad(format!("pilot symbol {p} outside 0..{}", self.num_symbols));
        }
        let mut sorted = self.pilot_symbols.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.pilot_symbols.len() {
            return bad("pilot symbol indices repeat".into());
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            return bad("subcarrier spacing must be positive".into());
        }
        Ok(())
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_len
    }

    pub fn frame_samples(&self) -> usize {
        self.num_symbols * self.samples_per_symbol()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fft_size as f64 * self.subcarrier_spacing_hz
    }

    /// Duration of one OFDM symbol including its cyclic prefix.
    pub fn symbol_duration_s(&self) -> f64 {
        self.samples_per_symbol() as f64 / self.sample_rate_hz()
    }

    pub fn resource_elements(&self) -> usize {
        self.num_subcarriers * self.num_symbols
    }

    pub fn pilot_count(&self) -> usize {
        self.pilot_symbols.len() * self.num_subcarriers
    }

    pub fn data_count(&self) -> usize {
        self.resource_elements() - self.pilot_count()
    }
}
