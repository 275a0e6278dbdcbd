use super::ReceiverError;
use crate::autodiff::Tensor;
use crate::ofdm::{FrameConfig, ResourceGrid};

/// One token per subcarrier. Features, with `T` symbols per frame:
/// `Re y[0..T]`, `Im y[0..T]`, `Re p[0..T]`, `Im p[0..T]`, noise variance,
/// where `p` is zero at data elements.
pub fn tokenize(cfg: &FrameConfig, grid: &ResourceGrid, noise_var: f64) -> Result<Tensor, ReceiverError> {
    let (s, t) = (cfg.num_subcarriers, cfg.num_symbols);
    if grid.num_subcarriers() != s || grid.num_symbols() != t {
        return Err(ReceiverError::GridShape {
            expected: (s, t),
            got: (grid.num_subcarriers(), grid.num_symbols()),
        });
    }
    let width = 4 * t + 1;
    let pilots = grid.pilots().values();
    let mut data = vec![0.0; s * width];
    for (m, row) in data.chunks_mut(width).enumerate() {
        for n in 0..t {
            let y = grid.get(m, n);
            let p = pilots[n * s + m];
            row[n] = y.re;
            row[t + n] = y.im;
            row[2 * t + n] = p.re;
            row[3 * t + n] = p.im;
        }
        row[4 * t] = noise_var;
    }
    Ok(Tensor::new(vec![s, width], data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ofdm::{kronecker_pilot_pattern, Ofdm};
    use num_complex::Complex64;
    use std::sync::Arc;

    #[test]
    fn zero_grid_zero_pilots() {
        let cfg = FrameConfig {
            pilot_symbols: vec![],
            ..Default::default()
        };
        let p = Arc::new(kronecker_pilot_pattern(&cfg));
        let g = ResourceGrid::from_values(p, vec![Complex64::new(0.0, 0.0); 128 * 14]).unwrap();
        let t = tokenize(&cfg, &g, 0.25).unwrap();
        assert_eq!(t.shape(), &[128, 57]);
        for row in t.data().chunks(57) {
            assert!(row[..56].iter().all(|&v| v == 0.0));
            assert_eq!(row[56], 0.25);
        }
    }

    #[test]
    fn features_land_in_place() {
        let cfg = FrameConfig::default();
        let ofdm = Ofdm::new(cfg.clone()).unwrap();
        let data: Vec<Complex64> = (0..1536).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let g = ofdm.build_grid(&data).unwrap();
        let t = tokenize(&cfg, &g, 1.0).unwrap();
        // subcarrier 5, symbol 3 carries data element 256 + 5
        assert_eq!(t.get(5, 3), 261.0);
        assert_eq!(t.get(5, 14 + 3), -261.0);
        assert_eq!(t.get(5, 28 + 3), 0.0);
        let pv = g.pilots().values()[2 * 128 + 5];
        assert_eq!(t.get(5, 2), pv.re);
        assert_eq!(t.get(5, 28 + 2), pv.re);
        assert_eq!(t.get(5, 42 + 2), pv.im);
    }

    #[test]
    fn subcarrier_swap_swaps_tokens() {
        let cfg = FrameConfig::default();
        let ofdm = Ofdm::new(cfg.clone()).unwrap();
        let data: Vec<Complex64> = (0..1536).map(|i| Complex64::new((i % 17) as f64, (i % 5) as f64)).collect();
        let g = ofdm.build_grid(&data).unwrap();
        let mut v = g.values().to_vec();
        for n in 0..14 {
            v.swap(n * 128 + 3, n * 128 + 40);
        }
        let swapped = ResourceGrid::from_values(Arc::clone(g.pilots()), v).unwrap();
        let (a, b) = (tokenize(&cfg, &g, 0.1).unwrap(), tokenize(&cfg, &swapped, 0.1).unwrap());
        for m in 0..128 {
            let src = match m {
                3 => 40,
                40 => 3,
                _ => m,
            };
            for c in 0..28 {
                assert_eq!(b.get(m, c), a.get(src, c));
            }
        }
    }

    #[test]
    fn wrong_grid_rejected() {
        let cfg = FrameConfig::default();
        let small = FrameConfig {
            num_subcarriers: 16,
            fft_size: 16,
            cp_len: 4,
            ..Default::default()
        };
        let ofdm = Ofdm::new(small).unwrap();
        let g = ofdm.build_grid(&vec![Complex64::new(0.0, 0.0); ofdm.config().data_count()]).unwrap();
        assert!(matches!(tokenize(&cfg, &g, 1.0), Err(ReceiverError::GridShape { .. })));
    }
}
