use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FrameConfig, OfdmError};

/// Which resource elements carry pilots, and their values.
///
/// Both vectors are indexed `symbol * num_subcarriers + subcarrier`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPattern {
    num_subcarriers: usize,
    num_symbols: usize,
    mask: Vec<bool>,
    values: Vec<Complex64>,
    /// Data positions in transmit order: symbol by symbol, subcarrier
    /// first within a symbol, pilots skipped.
    data_positions: Vec<usize>,
}

impl PilotPattern {
    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn is_pilot(&self, subcarrier: usize, symbol: usize) -> bool {
        self.mask[symbol * self.num_subcarriers + subcarrier]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Pilot values; zero at data positions.
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn pilot_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn data_positions(&self) -> &[usize] {
        &self.data_positions
    }

    /// Symbols whose every subcarrier is a pilot.
    pub fn pilot_symbols(&self) -> Vec<usize> {
        (0..self.num_symbols)
            .filter(|&n| (0..self.num_subcarriers).all(|m| self.is_pilot(m, n)))
            .collect()
    }
}

/// Full pilot OFDM symbols at the configured indices, i.e. the outer
/// product of a symbol indicator with an all-ones subcarrier vector. Pilot
/// values are seeded unit-modulus QPSK points.
pub fn kronecker_pilot_pattern(cfg: &FrameConfig) -> PilotPattern {
    let (s, t) = (cfg.num_subcarriers, cfg.num_symbols);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.pilot_seed);
    let mut mask = vec![false; s * t];
    let mut values = vec![Complex64::new(0.0, 0.0); s * t];
    let mut symbols = cfg.pilot_symbols.clone();
    symbols.sort_unstable();
    for &n in &symbols {
        for m in 0..s {
            let phase = rng.gen_range(0..4u8);
            let angle = std::f64::consts::FRAC_PI_4 + phase as f64 * std::f64::consts::FRAC_PI_2;
            mask[n * s + m] = true;
            values[n * s + m] = Complex64::from_polar(1.0, angle);
        }
    }
    let data_positions = (0..s * t).filter(|&i| !mask[i]).collect();
    PilotPattern {
        num_subcarriers: s,
        num_symbols: t,
        mask,
        values,
        data_positions,
    }
}

/// Frequency-domain frame: `num_subcarriers × num_symbols` complex values
/// plus the pilot layout they were built with.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pilots: Arc<PilotPattern>,
    values: Vec<Complex64>,
}

impl ResourceGrid {
    /// Places `data` on the data elements in transmit order and the pilot
    /// values everywhere else.
    pub fn build(pilots: Arc<PilotPattern>, data: &[Complex64]) -> Result<Self, OfdmError> {
        let positions = pilots.data_positions();
        if data.len() != positions.len() {
            return Err(OfdmError::LengthMismatch {
                what: "data symbols",
                expected: positions.len(),
                got: data.len(),
            });
        }
        let mut values = pilots.values().to_vec();
        for (&pos, &x) in positions.iter().zip(data) {
            values[pos] = x;
        }
        Ok(ResourceGrid { pilots, values })
    }

    /// Wraps raw values, e.g. the output of a demodulator.
    pub fn from_values(pilots: Arc<PilotPattern>, values: Vec<Complex64>) -> Result<Self, OfdmError> {
        let expected = pilots.num_subcarriers() * pilots.num_symbols();
        if values.len() != expected {
            return Err(OfdmError::LengthMismatch {
                what: "grid values",
                expected,
                got: values.len(),
            });
        }
        Ok(ResourceGrid { pilots, values })
    }

    pub fn pilots(&self) -> &Arc<PilotPattern> {
        &self.pilots
    }

    pub fn num_subcarriers(&self) -> usize {
        self.pilots.num_subcarriers()
    }

    pub fn num_symbols(&self) -> usize {
        self.pilots.num_symbols()
    }

    pub fn get(&self, subcarrier: usize, symbol: usize) -> Complex64 {
        self.values[symbol * self.num_subcarriers() + subcarrier]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// One OFDM symbol across all subcarriers.
    pub fn symbol(&self, n: usize) -> &[Complex64] {
        let s = self.num_subcarriers();
        &self.values[n * s..(n + 1) * s]
    }

    /// Data elements read back in transmit order.
    pub fn data(&self) -> Vec<Complex64> {
        self.pilots
            .data_positions()
            .iter()
            .map(|&p| self.values[p])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_pattern_counts() {
        let p = kronecker_pilot_pattern(&FrameConfig::default());
        assert_eq!(p.pilot_count(), 256);
        assert_eq!(p.data_positions().len(), 1536);
        assert_eq!(p.pilot_symbols(), vec![2, 11]);
        for (i, v) in p.values().iter().enumerate() {
            if p.mask()[i] {
                assert!((v.norm() - 1.0).abs() < 1e-15);
            } else {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn no_pilots_means_all_data() {
        let cfg = FrameConfig {
            pilot_symbols: vec![],
            ..Default::default()
        };
        let p = kronecker_pilot_pattern(&cfg);
        assert_eq!(p.pilot_count(), 0);
        assert_eq!(p.data_positions().len(), 128 * 14);
    }

    #[test]
    fn pilot_values_are_seeded() {
        let cfg = FrameConfig::default();
        assert_eq!(kronecker_pilot_pattern(&cfg), kronecker_pilot_pattern(&cfg));
        let other = FrameConfig {
            pilot_seed: 2,
            ..Default::default()
        };
        assert_ne!(
            kronecker_pilot_pattern(&cfg).values(),
            kronecker_pilot_pattern(&other).values()
        );
    }

    #[test]
    fn zero_data_leaves_pilots() {
        let p = Arc::new(kronecker_pilot_pattern(&FrameConfig::default()));
        let g = ResourceGrid::build(p.clone(), &vec![Complex64::new(0.0, 0.0); 1536]).unwrap();
        for (i, v) in g.values().iter().enumerate() {
            if p.mask()[i] {
                assert_eq!(*v, p.values()[i]);
            } else {
                assert_eq!(v.norm(), 0.0);
            }
        }
    }

    #[test]
    fn enumeration_reads_back_in_order() {
        let p = Arc::new(kronecker_pilot_pattern(&FrameConfig::default()));
        let data: Vec<Complex64> = (0..1536).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let g = ResourceGrid::build(p, &data).unwrap();
        assert_eq!(g.data(), data);
        // first data element is subcarrier 0 of symbol 0, the 129th is
        // subcarrier 0 of symbol 1
        assert_eq!(g.get(0, 0).re, 0.0);
        assert_eq!(g.get(0, 1).re, 128.0);
        assert_eq!(g.get(0, 3).re, 256.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let p = Arc::new(kronecker_pilot_pattern(&FrameConfig::default()));
        assert!(matches!(
            ResourceGrid::build(p, &[Complex64::new(0.0, 0.0); 10]),
            Err(OfdmError::LengthMismatch { expected: 1536, got: 10, .. })
        ));
    }
}
