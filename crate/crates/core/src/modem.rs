//! Gray-labelled square QAM, bit mapping and soft demapping.
//!
//! Labels are read most-significant bit first: bit 0 of a symbol is the
//! in-phase sign bit, bit 1 the quadrature sign bit, and further bits
//! alternate between the axes. Amplitudes per axis are the odd integers
//! `±1, ±3, …` scaled to unit average symbol energy. Every LLR in this crate
//! is `ln P(0)/P(1)`.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModemError {
    #[error("unsupported constellation order {0} (expected 4, 16 or 64)")]
    UnsupportedOrder(usize),
    #[error("expected {expected} bits, got {got}")]
    BitCount { expected: usize, got: usize },
    #[error("channel gain is zero")]
    ZeroGain,
    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("malformed golden vector line {line}: {reason}")]
    Golden { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits_per_symbol: usize,
    /// Indexed by label; the label's bit `i` is symbol bit `q-1-i`.
    points: Vec<Complex64>,
}

/// Amplitude of one axis for the Gray bits `a` (sign bit first), before
/// energy scaling.
fn axis_level(a: &[u8]) -> f64 {
    let p = a.len();
    let mut inner = 1.0;
    for i in (1..p).rev() {
        inner = (1u32 << (p - i)) as f64 - (1.0 - 2.0 * a[i] as f64) * inner;
    }
    (1.0 - 2.0 * a[0] as f64) * inner
}

impl Constellation {
    /// Square Gray QAM of order 4, 16 or 64.
    pub fn qam(order: usize) -> Result<Self, ModemError> {
        let q = match order {
            4 => 2,
            16 => 4,
            64 => 6,
            _ => return Err(ModemError::UnsupportedOrder(order)),
        };
        let scale = (2.0 * (order as f64 - 1.0) / 3.0).sqrt();
        let points = (0..order)
            .map(|label| {
                let bits = label_bits(label, q);
                let i_bits: Vec<u8> = bits.iter().step_by(2).copied().collect();
                let q_bits: Vec<u8> = bits.iter().skip(1).step_by(2).copied().collect();
                Complex64::new(axis_level(&i_bits), axis_level(&q_bits)) / scale
            })
            .collect();
        Ok(Constellation {
            bits_per_symbol: q,
            points,
        })
    }

    /// Antipodal two-point map, label 0 → +1. Used as a closed-form oracle.
    pub fn bpsk() -> Self {
        Constellation {
            bits_per_symbol: 1,
            points: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
        }
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn map_bits(&self, bits: &[u8]) -> Result<Complex64, ModemError> {
        if bits.len() != self.bits_per_symbol {
            return Err(ModemError::BitCount {
                expected: self.bits_per_symbol,
                got: bits.len(),
            });
        }
        let label = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        Ok(self.points[label])
    }

    /// Maps a bit stream whose length is a multiple of the bits per symbol.
    pub fn map_stream(&self, bits: &[u8]) -> Result<Vec<Complex64>, ModemError> {
        let q = self.bits_per_symbol;
        if bits.len() % q != 0 {
            return Err(ModemError::BitCount {
                expected: bits.len().div_ceil(q) * q,
                got: bits.len(),
            });
        }
        bits.chunks(q).map(|c| self.map_bits(c)).collect()
    }

    fn distances(
        &self,
        y: Complex64,
        h: Complex64,
        noise_var: f64,
    ) -> Result<Vec<f64>, ModemError> {
        if h == Complex64::new(0.0, 0.0) {
            return Err(ModemError::ZeroGain);
        }
        if !(noise_var > 0.0) {
            return Err(ModemError::NonPositiveNoise(noise_var));
        }
        Ok(self
            .points
            .iter()
            .map(|&x| (y - h * x).norm_sqr() / noise_var)
            .collect())
    }

    /// Max-log LLRs: `min_{x:b=1} d(x) − min_{x:b=0} d(x)` with
    /// `d(x) = |y − h·x|² / noise_var`.
    pub fn demap_maxlog(
        &self,
        y: Complex64,
        h: Complex64,
        noise_var: f64,
    ) -> Result<Vec<f64>, ModemError> {
        let d = self.distances(y, h, noise_var)?;
        let q = self.bits_per_symbol;
        let mut out = Vec::with_capacity(q);
        for bit in 0..q {
            let shift = q - 1 - bit;
            let (mut min0, mut min1) = (f64::INFINITY, f64::INFINITY);
            for (label, &dist) in d.iter().enumerate() {
                if (label >> shift) & 1 == 0 {
                    min0 = min0.min(dist);
                } else {
                    min1 = min1.min(dist);
                }
            }
            out.push(min1 - min0);
        }
        Ok(out)
    }

    /// Exact a-posteriori LLRs with equiprobable symbols, summed over the
    /// whole constellation with log-sum-exp.
    pub fn exact_app_demap(
        &self,
        y: Complex64,
        h: Complex64,
        noise_var: f64,
    ) -> Result<Vec<f64>, ModemError> {
        let d = self.distances(y, h, noise_var)?;
        let q = self.bits_per_symbol;
        let mut out = Vec::with_capacity(q);
        for bit in 0..q {
            let shift = q - 1 - bit;
            let (zero, one): (Vec<f64>, Vec<f64>) = {
                let mut z = Vec::new();
                let mut o = Vec::new();
                for (label, &dist) in d.iter().enumerate() {
                    if (label >> shift) & 1 == 0 {
                        z.push(-dist);
                    } else {
                        o.push(-dist);
                    }
                }
                (z, o)
            };
            out.push(log_sum_exp(&zero) - log_sum_exp(&one));
        }
        Ok(out)
    }

    /// Index of the nearest point to `y`.
    pub fn nearest(&self, y: Complex64) -> usize {
        self.points
            .iter()
            .enumerate()
            .map(|(i, &x)| (i, (y - x).norm_sqr()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap()
    }

    /// Text table with one `bits re im` line per label, floats printed in
    /// shortest round-trip form.
    pub fn golden_text(&self) -> String {
        let mut s = String::new();
        for (label, p) in self.points.iter().enumerate() {
            let bits: String = label_bits(label, self.bits_per_symbol)
                .iter()
                .map(|b| char::from(b'0' + b))
                .collect();
            s.push_str(&format!("{bits} {:?} {:?}\n", p.re, p.im));
        }
        s
    }

    /// Parses a table produced by [`Constellation::golden_text`].
    pub fn parse_golden(text: &str) -> Result<Vec<(Vec<u8>, Complex64)>, ModemError> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|(i, line)| {
                let err = |reason: &str| ModemError::Golden {
                    line: i + 1,
                    reason: reason.to_string(),
                };
                let mut parts = line.split_whitespace();
                let bits = parts.next().ok_or_else(|| err("missing bits"))?;
                let bits: Vec<u8> = bits
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        _ => Err(err("bad bit character")),
                    })
                    .collect::<Result<_, _>>()?;
                let mut num = || -> Result<f64, ModemError> {
                    parts
                        .next()
                        .ok_or_else(|| err("missing value"))?
                        .parse()
                        .map_err(|_| err("bad float"))
                };
                let re = num()?;
                let im = num()?;
                Ok((bits, Complex64::new(re, im)))
            })
            .collect()
    }
}

fn label_bits(label: usize, q: usize) -> Vec<u8> {
    (0..q).map(|i| ((label >> (q - 1 - i)) & 1) as u8).collect()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Per-bit LLRs of the data resource elements in transmit order, `q`
/// consecutive values per element.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrGrid {
    pub bits_per_symbol: usize,
    pub llrs: Vec<f64>,
}

impl LlrGrid {
    pub fn len(&self) -> usize {
        self.llrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llrs.is_empty()
    }

    pub fn hard_bits(&self) -> Vec<u8> {
        crate::ldpc::hard_decision(&self.llrs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn all_labels(q: usize) -> impl Iterator<Item = Vec<u8>> {
        (0..1usize << q).map(move |l| label_bits(l, q))
    }

    #[test]
    fn qpsk_origin_label() {
        let c = Constellation::qam(4).unwrap();
        let x = c.map_bits(&[0, 0]).unwrap();
        assert!((x - Complex64::new(1.0, 1.0) / SQRT_2).norm() < 1e-15);
    }

    #[test]
    fn qam64_origin_label() {
        let c = Constellation::qam(64).unwrap();
        let x = c.map_bits(&[0; 6]).unwrap();
        let want = Complex64::new(3.0, 3.0) / 42f64.sqrt();
        assert!((x - want).norm() < 1e-15);
    }

    #[test]
    fn unit_energy_for_every_order() {
        for m in [4, 16, 64] {
            let c = Constellation::qam(m).unwrap();
            let e: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
            assert!((e - 1.0).abs() < 1e-12, "order {m}: {e}");
        }
    }

    #[test]
    fn neighbours_differ_in_one_bit() {
        for m in [4, 16, 64] {
            let c = Constellation::qam(m).unwrap();
            let spacing = 2.0 / (2.0 * (m as f64 - 1.0) / 3.0).sqrt();
            for (a, pa) in c.points().iter().enumerate() {
                for (b, pb) in c.points().iter().enumerate() {
                    if ((pa - pb).norm() - spacing).abs() < 1e-9 {
                        assert_eq!((a ^ b).count_ones(), 1, "order {m}: {a} {b}");
                    }
                }
            }
            let mut distinct: Vec<(i64, i64)> = c
                .points()
                .iter()
                .map(|p| ((p.re * 1e9) as i64, (p.im * 1e9) as i64))
                .collect();
            distinct.sort();
            distinct.dedup();
            assert_eq!(distinct.len(), m);
        }
    }

    #[test]
    fn wrong_bit_count_rejected() {
        let c = Constellation::qam(16).unwrap();
        assert_eq!(
            c.map_bits(&[0, 1, 0]),
            Err(ModemError::BitCount { expected: 4, got: 3 })
        );
        assert!(Constellation::qam(8).is_err());
    }

    #[test]
    fn noiseless_round_trip_all_labels() {
        for m in [4, 16, 64] {
            let c = Constellation::qam(m).unwrap();
            let h = Complex64::from_polar(0.7, 1.1);
            for bits in all_labels(c.bits_per_symbol()) {
                let y = h * c.map_bits(&bits).unwrap();
                let llr = c.demap_maxlog(y, h, 1e-6).unwrap();
                let hard: Vec<u8> = llr.iter().map(|&l| (l < 0.0) as u8).collect();
                assert_eq!(hard, bits);
            }
        }
    }

    #[test]
    fn common_rotation_leaves_llrs_unchanged() {
        let c = Constellation::qam(16).unwrap();
        let (y, h) = (Complex64::new(0.3, -0.8), Complex64::new(0.9, 0.2));
        let r = Complex64::from_polar(1.0, 2.3);
        let a = c.demap_maxlog(y, h, 0.2).unwrap();
        let b = c.demap_maxlog(y * r, h * r, 0.2).unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert!((x - z).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_gain_and_bad_noise_rejected() {
        let c = Constellation::qam(4).unwrap();
        let y = Complex64::new(1.0, 0.0);
        assert_eq!(
            c.demap_maxlog(y, Complex64::new(0.0, 0.0), 1.0),
            Err(ModemError::ZeroGain)
        );
        assert!(c.exact_app_demap(y, Complex64::new(1.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn bpsk_closed_form() {
        let c = Constellation::bpsk();
        let (y, h, nv) = (Complex64::new(0.4, -0.3), Complex64::new(0.8, 0.5), 0.7);
        let llr = c.exact_app_demap(y, h, nv).unwrap();
        let closed = 4.0 * (h.conj() * y).re / nv;
        assert!((llr[0] - closed).abs() < 1e-9);
        // for two points max-log is exact too
        assert!((c.demap_maxlog(y, h, nv).unwrap()[0] - closed).abs() < 1e-9);
    }

    #[test]
    fn qpsk_maxlog_sign_agrees_with_exact() {
        let c = Constellation::qam(4).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let y = Complex64::new(1.0, 1.0) / SQRT_2;
        let a = c.demap_maxlog(y, h, 1.0).unwrap();
        let b = c.exact_app_demap(y, h, 1.0).unwrap();
        for (x, z) in a.iter().zip(&b) {
            assert_eq!(x.signum(), z.signum());
        }
        // For QPSK both bits separate per axis: max-log LLR = 4·Re/σ²·(1/√2)
        assert!((a[0] - 4.0 * (1.0 / SQRT_2) / SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn equidistant_point_gives_zero_llr() {
        let c = Constellation::qam(16).unwrap();
        // y on the imaginary axis is equidistant from both in-phase halves
        let y = Complex64::new(0.0, 0.37);
        let h = Complex64::new(1.0, 0.0);
        assert!(c.exact_app_demap(y, h, 0.3).unwrap()[0].abs() < 1e-9);
        assert!(c.demap_maxlog(y, h, 0.3).unwrap()[0].abs() < 1e-9);
    }

    #[test]
    fn maxlog_close_to_exact_at_high_snr() {
        let c = Constellation::qam(64).unwrap();
        let h = Complex64::new(1.0, 0.0);
        for (i, bits) in all_labels(6).enumerate() {
            let x = c.map_bits(&bits).unwrap();
            let y = x + Complex64::from_polar(0.02, i as f64);
            let a = c.demap_maxlog(y, h, 1e-3).unwrap();
            let b = c.exact_app_demap(y, h, 1e-3).unwrap();
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 0.1, "{p} {q}");
            }
        }
    }

    #[test]
    fn mirroring_flips_only_the_sign_bits() {
        let c = Constellation::qam(64).unwrap();
        let h = Complex64::new(1.0, 0.0);
        let y = Complex64::new(0.41, -0.77);
        let base = c.demap_maxlog(y, h, 0.05).unwrap();
        let mirror_i = c.demap_maxlog(Complex64::new(-y.re, y.im), h, 0.05).unwrap();
        let mirror_q = c.demap_maxlog(y.conj(), h, 0.05).unwrap();
        for b in 0..6 {
            let (flip_i, flip_q) = (b == 0, b == 1);
            let want_i = if flip_i { -base[b] } else { base[b] };
            let want_q = if flip_q { -base[b] } else { base[b] };
            assert!((mirror_i[b] - want_i).abs() < 1e-9);
            assert!((mirror_q[b] - want_q).abs() < 1e-9);
        }
    }

    #[test]
    fn golden_vectors_match() {
        for (m, text) in [
            (4, include_str!("../golden/qam4.txt")),
            (16, include_str!("../golden/qam16.txt")),
            (64, include_str!("../golden/qam64.txt")),
        ] {
            let c = Constellation::qam(m).unwrap();
            let table = Constellation::parse_golden(text).unwrap();
            assert_eq!(table.len(), m);
            for (bits, p) in table {
                let x = c.map_bits(&bits).unwrap();
                assert_eq!(x.re.to_bits(), p.re.to_bits());
                assert_eq!(x.im.to_bits(), p.im.to_bits());
            }
        }
    }
}
