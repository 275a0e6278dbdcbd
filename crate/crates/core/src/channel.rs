//! Tapped-delay-line fading with speed-driven Doppler, plus AWGN.
//!
//! Each tap fades independently following a 16-term sum-of-sinusoids Jakes
//! model. Gains are sampled at the start of every OFDM symbol and held for
//! the whole symbol, so after cyclic-prefix removal every resource element
//! sees a single complex gain `H(m, n) = Σ_l g_l(n)·e^{−j2π m d_l / N}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::ofdm::FrameConfig;
use crate::seed;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;
const SINUSOIDS: usize = 16;
/// Noise variance reported when no noise is added.
pub const NOISELESS_VAR: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("unknown channel profile '{0}' (known: uma-low, uma-high, flat, awgn)")]
    UnknownProfile(String),
    #[error("invalid channel profile: {0}")]
    InvalidProfile(String),
    #[error("realization was generated for {expected_symbols} symbols of {expected_fft} samples, frame has {symbols} and {fft}")]
    ConfigMismatch {
        expected_symbols: usize,
        expected_fft: usize,
        symbols: usize,
        fft: usize,
    },
    #[error("expected {expected} time samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TdlProfile {
    pub name: String,
    /// Tap delays in samples, strictly increasing.
    pub delays: Vec<usize>,
    /// Average tap powers (linear), summing to one.
    pub powers: Vec<f64>,
    pub carrier_hz: f64,
    /// Speed range in km/h, sampled uniformly per realization.
    pub speed_kmh: (f64, f64),
    /// When false, taps are fixed at `√power` instead of fading.
    pub fading: bool,
}

impl TdlProfile {
    pub fn new(
        name: &str,
        delays: Vec<usize>,
        powers: Vec<f64>,
        carrier_hz: f64,
        speed_kmh: (f64, f64),
        fading: bool,
    ) -> Result<Self, ChannelError> {
        let p = TdlProfile {
            name: name.to_string(),
            delays,
            powers,
            carrier_hz,
            speed_kmh,
            fading,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: &str| Err(ChannelError::InvalidProfile(m.to_string()));
        if self.delays.is_empty() || self.delays.len() != self.powers.len() {
            return bad("need one power per tap and at least one tap");
        }
        if self.delays.windows(2).any(|w| w[0] >= w[1]) {
            return bad("tap delays must be strictly increasing");
        }
        if self.powers.iter().any(|&p| !(p >= 0.0)) {
            return bad("tap powers must be nonnegative");
        }
        if (self.powers.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("tap powers must sum to 1");
        }
        if !(self.speed_kmh.0 >= 0.0 && self.speed_kmh.0 <= self.speed_kmh.1) {
            return bad("speed range must satisfy 0 <= min <= max");
        }
        Ok(())
    }

    /// Named presets.
    ///
    /// * `uma-low` / `uma-high`: four taps at delays {0, 2, 5, 9} with powers
    ///   {0.5, 0.25, 0.15, 0.10}, 28 GHz carrier, 0–60 and 60–120 km/h.
    /// * `flat`: one static Rayleigh tap.
    /// * `awgn`: unit gain, no fading.
    pub fn preset(name: &str) -> Result<Self, ChannelError> {
        let uma = |speeds| {
            TdlProfile::new(
                name,
                vec![0, 2, 5, 9],
                vec![0.5, 0.25, 0.15, 0.10],
                28e9,
                speeds,
                true,
            )
        };
        match name {
            "uma-low" => uma((0.0, 60.0)),
            "uma-high" => uma((60.0, 120.0)),
            "flat" => TdlProfile::new(name, vec![0], vec![1.0], 28e9, (0.0, 0.0), true),
            "awgn" => TdlProfile::new(name, vec![0], vec![1.0], 28e9, (0.0, 0.0), false),
            _ => Err(ChannelError::UnknownProfile(name.to_string())),
        }
    }

    pub fn max_delay(&self) -> usize {
        *self.delays.last().unwrap()
    }
}

/// One draw of the time-varying channel for a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    delays: Vec<usize>,
    /// `gains[tap * T + symbol]`
    gains: Vec<Complex64>,
    /// `response[symbol * S + subcarrier]`
    response: Vec<Complex64>,
    num_symbols: usize,
    num_subcarriers: usize,
    fft_size: usize,
    pub speed_kmh: f64,
    pub doppler_hz: f64,
    pub seed: u64,
}

impl ChannelRealization {
    /// Builds a realization from explicit per-symbol tap gains.
    pub fn from_gains(
        cfg: &FrameConfig,
        delays: Vec<usize>,
        gains: Vec<Complex64>,
    ) -> Result<Self, ChannelError> {
        if gains.len() != delays.len() * cfg.num_symbols {
            return Err(ChannelError::InvalidProfile(
                "need one gain per tap and symbol".into(),
            ));
        }
        if delays.iter().any(|&d| d > cfg.cp_len) {
            return Err(ChannelError::InvalidProfile(format!(
                "tap delay exceeds cyclic prefix of {} samples",
                cfg.cp_len
            )));
        }
        let t = cfg.num_symbols;
        let (s, n) = (cfg.num_subcarriers, cfg.fft_size);
        let mut response = vec![Complex64::new(0.0, 0.0); s * t];
        for sym in 0..t {
            for m in 0..s {
                response[sym * s + m] = delays
                    .iter()
                    .enumerate()
                    .map(|(l, &d)| {
                        gains[l * t + sym]
                            * Complex64::from_polar(1.0, -2.0 * PI * ((m * d) % n) as f64 / n as f64)
                    })
                    .sum();
            }
        }
        Ok(ChannelRealization {
            delays,
            gains,
            response,
            num_symbols: t,
            num_subcarriers: s,
            fft_size: n,
            speed_kmh: 0.0,
            doppler_hz: 0.0,
            seed: 0,
        })
    }

    pub fn num_taps(&self) -> usize {
        self.delays.len()
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn gain(&self, tap: usize, symbol: usize) -> Complex64 {
        self.gains[tap * self.num_symbols + symbol]
    }

    /// Frequency response at every resource element, indexed like a grid.
    pub fn response(&self) -> &[Complex64] {
        &self.response
    }

    pub fn response_at(&self, subcarrier: usize, symbol: usize) -> Complex64 {
        self.response[symbol * self.num_subcarriers + subcarrier]
    }

    /// Σ over taps of |gain|² for one symbol.
    pub fn symbol_power(&self, symbol: usize) -> f64 {
        (0..self.num_taps())
            .map(|l| self.gain(l, symbol).norm_sqr())
            .sum()
    }
}

/// Draws a realization. Speed is uniform over the profile range and the
/// maximum Doppler is `v·f_c/c`.
pub fn generate_realization(
    profile: &TdlProfile,
    cfg: &FrameConfig,
    seed: u64,
) -> Result<ChannelRealization, ChannelError> {
    if profile.max_delay() > cfg.cp_len {
        return Err(ChannelError::InvalidProfile(format!(
            "profile '{}' delay spread {} exceeds cyclic prefix {}",
            profile.name,
            profile.max_delay(),
            cfg.cp_len
        )));
    }
    let mut rng = seed::rng(seed);
    let (lo, hi) = profile.speed_kmh;
    let speed_kmh = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    let doppler_hz = speed_kmh / 3.6 * profile.carrier_hz / SPEED_OF_LIGHT;
    let t = cfg.num_symbols;
    let t_sym = cfg.symbol_duration_s();

    let mut gains = Vec::with_capacity(profile.delays.len() * t);
    for &power in &profile.powers {
        let amp = power.sqrt();
        if !profile.fading {
            gains.extend(std::iter::repeat(Complex64::new(amp, 0.0)).take(t));
            continue;
        }
        let theta: f64 = rng.gen_range(-PI..PI);
        let phases: Vec<f64> = (0..SINUSOIDS).map(|_| rng.gen_range(-PI..PI)).collect();
        let freqs: Vec<f64> = (0..SINUSOIDS)
            .map(|i| {
                let alpha = (2.0 * PI * (i + 1) as f64 - PI + theta) / SINUSOIDS as f64;
                2.0 * PI * doppler_hz * alpha.cos()
            })
            .collect();
        let norm = amp / (SINUSOIDS as f64).sqrt();
        for sym in 0..t {
            let time = sym as f64 * t_sym;
            let g: Complex64 = freqs
                .iter()
                .zip(&phases)
                .map(|(&w, &phi)| Complex64::from_polar(1.0, w * time + phi))
                .sum();
            gains.push(g * norm);
        }
    }
    let mut real = ChannelRealization::from_gains(cfg, profile.delays.clone(), gains)?;
    real.speed_kmh = speed_kmh;
    real.doppler_hz = doppler_hz;
    real.seed = seed;
    Ok(real)
}

/// Convolves `signal` with the tap gains of the symbol each output sample
/// belongs to.
pub fn apply_channel(
    realization: &ChannelRealization,
    cfg: &FrameConfig,
    signal: &[Complex64],
) -> Result<Vec<Complex64>, ChannelError> {
    if realization.num_symbols != cfg.num_symbols || realization.fft_size != cfg.fft_size {
        return Err(ChannelError::ConfigMismatch {
            expected_symbols: realization.num_symbols,
            expected_fft: realization.fft_size,
            symbols: cfg.num_symbols,
            fft: cfg.fft_size,
        });
    }
    if signal.len() != cfg.frame_samples() {
        return Err(ChannelError::LengthMismatch {
            expected: cfg.frame_samples(),
            got: signal.len(),
        });
    }
    let per_symbol = cfg.samples_per_symbol();
    let out = (0..signal.len())
        .map(|i| {
            let sym = i / per_symbol;
            realization
                .delays
                .iter()
                .enumerate()
                .filter(|(_, &d)| d <= i)
                .map(|(l, &d)| realization.gain(l, sym) * signal[i - d])
                .sum()
        })
        .collect();
    Ok(out)
}

/// Adds circular complex Gaussian noise with variance
/// `N0 = Es·10^(−snr/10)`, where `Es` is the mean energy per sample of
/// `signal`. An infinite SNR adds nothing and reports [`NOISELESS_VAR`].
pub fn add_awgn(signal: &[Complex64], es_n0_db: f64, seed: u64) -> (Vec<Complex64>, f64) {
    if es_n0_db == f64::INFINITY || signal.is_empty() {
        return (signal.to_vec(), NOISELESS_VAR);
    }
    let es = signal.iter().map(|v| v.norm_sqr()).sum::<f64>() / signal.len() as f64;
    let noise_var = (es * 10f64.powf(-es_n0_db / 10.0)).max(NOISELESS_VAR);
    let sigma = (noise_var / 2.0).sqrt();
    let mut rng = seed::rng(seed);
    let noisy = signal
        .iter()
        .map(|&v| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            v + Complex64::new(re, im) * sigma
        })
        .collect();
    (noisy, noise_var)
}
