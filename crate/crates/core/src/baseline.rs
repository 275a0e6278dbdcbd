//! Conventional comparator receivers.
//!
//! `baseline-ls` estimates the channel by least squares on the pilot
//! symbols, interpolates linearly in time per subcarrier, equalizes with a
//! one-tap MMSE filter and demaps with max-log. `perfect-csi` skips the
//! estimation and uses the true frequency response.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelRealization;
use crate::modem::{Constellation, LlrGrid, ModemError};
use crate::ofdm::ResourceGrid;

/// Upper bound on the post-equalization noise variance.
pub const MAX_EFFECTIVE_NOISE: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("least-squares estimation needs at least one pilot symbol")]
    NoPilots,
    #[error("the perfect-CSI receiver needs the true channel")]
    MissingChannel,
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateSource {
    LsInterpolated,
    Perfect,
}

/// Channel estimate at every resource element, indexed like a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub values: Vec<Complex64>,
    pub source: EstimateSource,
    pub noise_var: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Equalizer {
    #[default]
    Mmse,
    Zf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    LsEstimate,
    PerfectCsi,
}

/// Least-squares estimate `y/p` on the pilot symbols, linearly
/// interpolated between pilot symbols and held constant before the first
/// and after the last.
pub fn ls_estimate(grid: &ResourceGrid, noise_var: f64) -> Result<ChannelEstimate, BaselineError> {
    let pilots = grid.pilots();
    let pilot_symbols = pilots.pilot_symbols();
    if pilot_symbols.is_empty() {
        return Err(BaselineError::NoPilots);
    }
    let (s, t) = (grid.num_subcarriers(), grid.num_symbols());
    let mut values = vec![Complex64::new(0.0, 0.0); s * t];
    let pv = pilots.values();
    for m in 0..s {
        let at = |n: usize| grid.get(m, n) / pv[n * s + m];
        for n in 0..t {
            let h = match pilot_symbols.binary_search(&n) {
                Ok(_) => at(n),
                Err(0) => at(pilot_symbols[0]),
                Err(i) if i == pilot_symbols.len() => at(pilot_symbols[i - 1]),
                Err(i) => {
                    let (a, b) = (pilot_symbols[i - 1], pilot_symbols[i]);
                    let w = (n - a) as f64 / (b - a) as f64;
                    at(a) * (1.0 - w) + at(b) * w
                }
            };
            values[n * s + m] = h;
        }
    }
    Ok(ChannelEstimate {
        values,
        source: EstimateSource::LsInterpolated,
        noise_var,
    })
}

pub fn perfect_estimate(channel: &ChannelRealization, noise_var: f64) -> ChannelEstimate {
    ChannelEstimate {
        values: channel.response().to_vec(),
        source: EstimateSource::Perfect,
        noise_var,
    }
}

/// One-tap equalization of the data elements (transmit order). MMSE uses
/// `conj(H)·y / (|H|² + σ²)`, ZF uses `y/H`; both report the effective
/// noise variance `σ²/|H|²`, capped at [`MAX_EFFECTIVE_NOISE`].
pub fn equalize(
    grid: &ResourceGrid,
    estimate: &ChannelEstimate,
    noise_var: f64,
    equalizer: Equalizer,
) -> Result<(Vec<Complex64>, Vec<f64>), BaselineError> {
    if !(noise_var > 0.0) {
        return Err(BaselineError::NonPositiveNoise(noise_var));
    }
    let positions = grid.pilots().data_positions();
    let mut symbols = Vec::with_capacity(positions.len());
    let mut noise = Vec::with_capacity(positions.len());
    for &p in positions {
        let (y, h) = (grid.values()[p], estimate.values[p]);
        let g = h.norm_sqr();
        let x = match equalizer {
            Equalizer::Mmse => h.conj() * y / (g + noise_var),
            Equalizer::Zf if g > 0.0 => y / h,
            Equalizer::Zf => Complex64::new(0.0, 0.0),
        };
        symbols.push(x);
        noise.push(if g > 0.0 {
            (noise_var / g).min(MAX_EFFECTIVE_NOISE)
        } else {
            MAX_EFFECTIVE_NOISE
        });
    }
    Ok((symbols, noise))
}

/// MMSE equalization; see [`equalize`].
pub fn mmse_equalize(
    grid: &ResourceGrid,
    estimate: &ChannelEstimate,
    noise_var: f64,
) -> Result<(Vec<Complex64>, Vec<f64>), BaselineError> {
    equalize(grid, estimate, noise_var, Equalizer::Mmse)
}

/// Estimation (or genie), equalization and max-log demapping of one
/// received grid.
///
/// The MMSE output is biased by `|H|²/(|H|²+σ²)`; the demapper is given
/// that factor as its gain so decision regions stay centred. With the
/// effective noise `σ²/|H|²` this yields the same LLRs as ZF.
pub fn receive_frame(
    kind: BaselineKind,
    grid: &ResourceGrid,
    channel: Option<&ChannelRealization>,
    noise_var: f64,
    constellation: &Constellation,
    equalizer: Equalizer,
) -> Result<LlrGrid, BaselineError> {
    let estimate = match kind {
        BaselineKind::LsEstimate => ls_estimate(grid, noise_var)?,
        BaselineKind::PerfectCsi => {
            perfect_estimate(channel.ok_or(BaselineError::MissingChannel)?, noise_var)
        }
    };
    let (symbols, noise) = equalize(grid, &estimate, noise_var, equalizer)?;
    let positions = grid.pilots().data_positions();
    let q = constellation.bits_per_symbol();
    let mut llrs = Vec::with_capacity(symbols.len() * q);
    for ((&x, &nv), &p) in symbols.iter().zip(&noise).zip(positions) {
        let g = estimate.values[p].norm_sqr();
        let bias = match equalizer {
            Equalizer::Mmse => g / (g + noise_var),
            Equalizer::Zf => 1.0,
        };
        if g == 0.0 || bias == 0.0 {
            llrs.extend(std::iter::repeat(0.0).take(q));
            continue;
        }
        // x = bias·s + bias·w/h: gain `bias`, noise variance bias²·σ²/|H|²
        let l = constellation.demap_maxlog(x, Complex64::new(bias, 0.0), bias * bias * nv)?;
        llrs.extend(l);
    }
    Ok(LlrGrid {
        bits_per_symbol: q,
        llrs,
    })
}
