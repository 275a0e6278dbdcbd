use std::sync::OnceLock;

use diffrx::autodiff::{Tape, Tensor};
use diffrx::ldpc::{hard_decision, LdpcCode};
use diffrx::link::{parse_csv, write_csv, Link, LinkConfig, ReceiverKind, SweepRow};
use diffrx::modem::Constellation;
use diffrx::ofdm::{FrameConfig, Ofdm};
use num_complex::Complex64;
use proptest::prelude::*;

fn code() -> &'static LdpcCode {
    static CODE: OnceLock<LdpcCode> = OnceLock::new();
    CODE.get_or_init(|| LdpcCode::regular(96, 3, 6, 5).unwrap())
}

fn small_frame(fft_size: usize) -> FrameConfig {
    FrameConfig {
        num_subcarriers: 16,
        fft_size,
        cp_len: 4,
        ..FrameConfig::default()
    }
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encoded_words_have_zero_syndrome(seed in any::<u64>()) {
        use rand::Rng;
        let c = code();
        let mut rng = diffrx::seed::rng(seed);
        let info: Vec<u8> = (0..c.k()).map(|_| rng.gen_range(0..2u8)).collect();
        let word = c.encode(&info).unwrap();
        prop_assert!(word.len() == c.n());
        prop_assert!(c.parity_check().syndrome(&word).iter().all(|&s| s == 0));
        prop_assert_eq!(c.extract_info(&word), info);
    }

    #[test]
    fn negated_llrs_flip_hard_decisions(llrs in prop::collection::vec(-50.0..50.0f64, 1..200)) {
        prop_assume!(llrs.iter().all(|&l| l != 0.0));
        let neg: Vec<f64> = llrs.iter().map(|l| -l).collect();
        let a = hard_decision(&llrs);
        let b = hard_decision(&neg);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x ^ y == 1));
    }

    #[test]
    fn ofdm_round_trip(seed in any::<u64>(), wide in any::<bool>()) {
        let ofdm = Ofdm::new(small_frame(if wide { 32 } else { 16 })).unwrap();
        let mut rng = diffrx::seed::rng(seed);
        let data: Vec<Complex64> = (0..ofdm.config().data_count())
            .map(|_| {
                use rand::Rng;
                Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let grid = ofdm.build_grid(&data).unwrap();
        let back = ofdm.demodulate(&ofdm.modulate(&grid)).unwrap();
        for (a, b) in grid.values().iter().zip(back.values()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn ofdm_preserves_energy(values in prop::collection::vec(complex(), 16 * 14)) {
        let ofdm = Ofdm::new(small_frame(16)).unwrap();
        let grid = diffrx::ofdm::ResourceGrid::from_values(ofdm.pilots().clone(), values).unwrap();
        let signal = ofdm.modulate(&grid);
        let per = ofdm.config().samples_per_symbol();
        let cp = ofdm.config().cp_len;
        let time: f64 = signal
            .chunks(per)
            .flat_map(|s| s[cp..].iter())
            .map(|x| x.norm_sqr())
            .sum();
        let freq: f64 = grid.values().iter().map(|x| x.norm_sqr()).sum();
        prop_assert!((time - freq).abs() < 1e-9 * freq.max(1.0));
    }

    #[test]
    fn softmax_rows_sum_to_one(
        rows in 1usize..6,
        data in prop::collection::vec(-30.0..30.0f64, 36),
    ) {
        let cols = data.len() / rows;
        let t = Tensor::matrix(rows, cols, data[..rows * cols].to_vec()).unwrap();
        let mut tape = Tape::new();
        let x = tape.leaf(t);
        let s = tape.softmax_rows(x);
        for r in 0..rows {
            let sum: f64 = (0..cols).map(|c| tape.value(s).get(r, c)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn llrs_antisymmetric_per_axis(
        order in prop::sample::select(vec![4usize, 16, 64]),
        y in complex(),
        h in 0.2..2.0f64,
        nv in 0.01..2.0f64,
    ) {
        let c = Constellation::qam(order).unwrap();
        let h = Complex64::new(h, 0.0);
        let base = c.demap_maxlog(y, h, nv).unwrap();
        // mirroring one axis complements that axis' sign bit only
        let mirror_i = c.demap_maxlog(Complex64::new(-y.re, y.im), h, nv).unwrap();
        let mirror_q = c.demap_maxlog(Complex64::new(y.re, -y.im), h, nv).unwrap();
        for b in 0..c.bits_per_symbol() {
            let (flip_i, flip_q) = if b == 0 { (-1.0, 1.0) } else if b == 1 { (1.0, -1.0) } else { (1.0, 1.0) };
            prop_assert!((mirror_i[b] - flip_i * base[b]).abs() < 1e-9);
            prop_assert!((mirror_q[b] - flip_q * base[b]).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_rows_round_trip(
        rows in prop::collection::vec(
            (-20.0..40.0f64, 1usize..10_000, 0usize..1_000_000, 0usize..1000, any::<u64>(),
             prop::sample::select(vec!["baseline-ls", "perfect-csi", "neural"])),
            1..8,
        )
    ) {
        let rows: Vec<SweepRow> = rows
            .into_iter()
            .map(|(snr_db, frames, bit_errors, block_errors, seed, rx)| {
                let bits = frames * 1000;
                let blocks = frames * 7;
                SweepRow {
                    snr_db,
                    frames,
                    bits,
                    bit_errors: bit_errors.min(bits),
                    ber: bit_errors.min(bits) as f64 / bits as f64,
                    block_errors: block_errors.min(blocks),
                    bler: block_errors.min(blocks) as f64 / blocks as f64,
                    receiver: rx.to_string(),
                    seed,
                }
            })
            .collect();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back = parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn config_text_round_trip(
        seed in any::<u64>(),
        ldpc_seed in any::<u64>(),
        bp_iters in 1usize..60,
        receiver in prop::sample::select(vec![ReceiverKind::BaselineLs, ReceiverKind::PerfectCsi, ReceiverKind::Neural]),
        lr in 1e-5..1e-1f64,
        snr_lo in -10.0..10.0f64,
        span in 0.0..20.0f64,
        d_model in prop::sample::select(vec![32usize, 64, 128]),
    ) {
        let mut cfg = LinkConfig::default();
        cfg.seed = seed;
        cfg.ldpc.seed = ldpc_seed;
        cfg.bp_iters = bp_iters;
        cfg.receiver = receiver;
        cfg.training.lr = lr;
        cfg.training.snr_min_db = snr_lo;
        cfg.training.snr_max_db = snr_lo + span;
        cfg.model.d_model = d_model;
        let back = LinkConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn frame_capacity_arithmetic(
        subcarriers in prop::sample::select(vec![12usize, 16, 24, 32, 48]),
        order in prop::sample::select(vec![4usize, 16, 64]),
        n in prop::sample::select(vec![96usize, 192, 288]),
    ) {
        let mut cfg = LinkConfig::default();
        cfg.frame.num_subcarriers = subcarriers;
        cfg.frame.fft_size = 64;
        cfg.qam_order = order;
        cfg.ldpc.n = n;
        cfg.receiver = ReceiverKind::PerfectCsi;
        let q = cfg.bits_per_symbol();
        prop_assume!(n % q == 0 && n <= cfg.frame.data_count() * q);
        let link = Link::without_model(cfg.clone()).unwrap();
        let layout = link.layout();
        prop_assert_eq!(layout.codewords * layout.n + layout.filler_bits, cfg.frame.data_count() * q);
        prop_assert!(layout.filler_bits < layout.n);
    }
}
