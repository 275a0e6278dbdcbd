//! Flooding-schedule belief propagation.

use super::{LdpcCode, LdpcError};

const TANH_CLIP: f64 = 1.0 - 1e-12;

/// Check-node update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckRule {
    /// `2·atanh(∏ tanh(L/2))`
    #[default]
    SumProduct,
    /// Sign product times the smallest magnitude.
    MinSum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderConfig {
    pub max_iters: usize,
    pub rule: CheckRule,
    /// Stop as soon as the hard decision satisfies every check.
    pub early_exit: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            max_iters: 20,
            rule: CheckRule::SumProduct,
            early_exit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Hard decision on the final posterior LLRs.
    pub bits: Vec<u8>,
    pub iterations: usize,
    /// Whether `bits` has an all-zero syndrome.
    pub converged: bool,
    /// Posterior LLRs after the last iteration.
    pub llrs: Vec<f64>,
}

/// Hard decision: negative LLR decides 1, everything else (including 0)
/// decides 0.
pub fn hard_decision(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| (l < 0.0) as u8).collect()
}

/// Sum-product (or min-sum) decoding of `llrs` on the Tanner graph of
/// `code`. At least one iteration always runs, so the returned posterior is
/// never just the channel input.
pub fn bp_decode(
    code: &LdpcCode,
    llrs: &[f64],
    config: &DecoderConfig,
) -> Result<DecodeResult, LdpcError> {
    let h = code.parity_check();
    let n = h.cols();
    if llrs.len() != n {
        return Err(LdpcError::LengthMismatch {
            expected: n,
            got: llrs.len(),
        });
    }

    // Edges are numbered check by check.
    let mut edge_var = Vec::with_capacity(h.num_ones());
    let mut check_start = Vec::with_capacity(h.rows() + 1);
    for r in 0..h.rows() {
        check_start.push(edge_var.len());
        edge_var.extend_from_slice(h.row(r));
    }
    check_start.push(edge_var.len());
    let edges = edge_var.len();

    let mut check_to_var = vec![0.0; edges];
    let mut var_to_check = vec![0.0; edges];
    let mut posterior = llrs.to_vec();
    let mut bits = hard_decision(&posterior);
    let mut iterations = 0;
    let mut converged = false;
    let mut scratch = Vec::new();

    for _ in 0..config.max_iters.max(1) {
        iterations += 1;
        for e in 0..edges {
            var_to_check[e] = posterior[edge_var[e]] - check_to_var[e];
        }
        for r in 0..h.rows() {
            let range = check_start[r]..check_start[r + 1];
            let incoming = &var_to_check[range.clone()];
            let outgoing = &mut check_to_var[range];
            match config.rule {
                CheckRule::SumProduct => sum_product_check(incoming, outgoing, &mut scratch),
                CheckRule::MinSum => min_sum_check(incoming, outgoing),
            }
        }
        posterior.copy_from_slice(llrs);
        for e in 0..edges {
            posterior[edge_var[e]] += check_to_var[e];
        }
        bits = hard_decision(&posterior);
        converged = h.syndrome(&bits).iter().all(|&s| s == 0);
        if converged && config.early_exit {
            break;
        }
    }

    Ok(DecodeResult {
        bits,
        iterations,
        converged,
        llrs: posterior,
    })
}

/// Extrinsic outputs via prefix/suffix products, so a zero input never
/// needs a division.
fn sum_product_check(incoming: &[f64], outgoing: &mut [f64], scratch: &mut Vec<f64>) {
    let d = incoming.len();
    scratch.clear();
    scratch.extend(incoming.iter().map(|&l| (l / 2.0).tanh()));
    let mut prefix = 1.0;
    for i in 0..d {
        outgoing[i] = prefix;
        prefix *= scratch[i];
    }
    let mut suffix = 1.0;
    for i in (0..d).rev() {
        let p = (outgoing[i] * suffix).clamp(-TANH_CLIP, TANH_CLIP);
        outgoing[i] = 2.0 * p.atanh();
        suffix *= scratch[i];
    }
}

fn min_sum_check(incoming: &[f64], outgoing: &mut [f64]) {
    let mut sign = 1.0;
    let (mut min1, mut min2, mut argmin) = (f64::INFINITY, f64::INFINITY, usize::MAX);
    for (i, &l) in incoming.iter().enumerate() {
        if l < 0.0 {
            sign = -sign;
        }
        let a = l.abs();
        if a < min1 {
            min2 = min1;
            min1 = a;
            argmin = i;
        } else if a < min2 {
            min2 = a;
        }
    }
    for (i, (&l, o)) in incoming.iter().zip(outgoing.iter_mut()).enumerate() {
        let own_sign = if l < 0.0 { -1.0 } else { 1.0 };
        let mag = if i == argmin { min2 } else { min1 };
        *o = sign * own_sign * mag;
    }
}

#[cfg(test)]
mod tests {
    use super::super::{hamming_7_4, single_parity_check};
    use super::*;

    /// Exact bitwise a-posteriori LLRs by enumerating the codebook.
    fn map_llrs(code: &LdpcCode, llrs: &[f64]) -> Vec<f64> {
        let k = code.k();
        let n = code.n();
        let mut p0 = vec![0.0; n];
        let mut p1 = vec![0.0; n];
        for v in 0..1u32 << k {
            let b: Vec<u8> = (0..k).map(|i| ((v >> i) & 1) as u8).collect();
            let c = code.encode(&b).unwrap();
            // P(c | y) ∝ Π exp(−c_i·L_i)
            let w: f64 = c
                .iter()
                .zip(llrs)
                .map(|(&ci, &l)| if ci == 1 { -l } else { 0.0 })
                .sum::<f64>()
                .exp();
            for i in 0..n {
                if c[i] == 1 {
                    p1[i] += w;
                } else {
                    p0[i] += w;
                }
            }
        }
        p0.iter().zip(&p1).map(|(a, b)| (a / b).ln()).collect()
    }

    #[test]
    fn strong_zero_llrs_decode_immediately() {
        let code = LdpcCode::regular(96, 3, 6, 3).unwrap();
        let r = bp_decode(&code, &vec![10.0; 96], &DecoderConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.iterations <= 1);
        assert!(r.bits.iter().all(|&b| b == 0));
    }

    #[test]
    fn spc_matches_brute_force_map() {
        let code = LdpcCode::from_parity_check(single_parity_check(3)).unwrap();
        let llrs = [2.0, 3.0, -1.0];
        let r = bp_decode(&code, &llrs, &DecoderConfig::default()).unwrap();
        let exact = map_llrs(&code, &llrs);
        for (a, b) in r.llrs.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let extrinsic3 = 2.0 * ((1.0f64).tanh() * (1.5f64).tanh()).atanh();
        assert!((r.llrs[2] - (-1.0 + extrinsic3)).abs() < 1e-12);
    }

    #[test]
    fn min_sum_matches_rule() {
        let code = LdpcCode::from_parity_check(single_parity_check(3)).unwrap();
        let cfg = DecoderConfig {
            rule: CheckRule::MinSum,
            ..Default::default()
        };
        let r = bp_decode(&code, &[2.0, 3.0, -1.0], &cfg).unwrap();
        assert_eq!(r.llrs, vec![2.0 - 1.0, 3.0 - 1.0, -1.0 + 2.0]);
    }

    #[test]
    fn hamming_corrects_single_error() {
        let code = LdpcCode::from_parity_check(hamming_7_4()).unwrap();
        let c = code.encode(&[1, 0, 1, 1]).unwrap();
        let mut llrs: Vec<f64> = c.iter().map(|&b| if b == 1 { -3.0 } else { 3.0 }).collect();
        llrs[4] = -llrs[4] * 0.3;
        let r = bp_decode(&code, &llrs, &DecoderConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.bits, c);
    }

    #[test]
    fn non_convergence_reported() {
        let code = LdpcCode::from_parity_check(single_parity_check(3)).unwrap();
        let cfg = DecoderConfig {
            max_iters: 3,
            ..Default::default()
        };
        // an odd number of confident ones cannot satisfy the check
        let r = bp_decode(&code, &[-20.0, -20.0, -20.0], &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn length_checked() {
        let code = LdpcCode::from_parity_check(hamming_7_4()).unwrap();
        assert!(bp_decode(&code, &[0.0; 6], &DecoderConfig::default()).is_err());
    }

    #[test]
    fn ties_decide_zero() {
        assert_eq!(hard_decision(&[0.0, -0.0, -1e-300, 1e-300]), vec![0, 0, 1, 0]);
    }
}
