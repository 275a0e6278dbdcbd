//! LDPC codes: regular parity-check construction, systematic encoding and
//! belief-propagation decoding.
//!
//! LLRs follow the convention `L = ln P(0)/P(1)` everywhere, so a
//! nonnegative value decides bit 0.

mod construct;
mod decode;
pub mod gf2;

pub use construct::construct_regular;
pub use decode::{bp_decode, hard_decision, CheckRule, DecodeResult, DecoderConfig};

use gf2::{pack, unpack, BitMatrix};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LdpcError {
    #[error("column weight {col_weight} and row weight {row_weight} must both be at least 2")]
    WeightTooSmall { col_weight: usize, row_weight: usize },
    #[error("n·col_weight = {product} is not divisible by row weight {row_weight}")]
    NotDivisible { product: usize, row_weight: usize },
    #[error("row weight {row_weight} / column weight {col_weight} impossible for n = {n}, m = {m}")]
    WeightTooLarge {
        n: usize,
        m: usize,
        col_weight: usize,
        row_weight: usize,
    },
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("entry ({row}, {col}) outside a {rows}×{cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("parity-check matrix has rank 0")]
    ZeroRank,
    #[error("parity-check matrix leaves no information bits")]
    NoInformationBits,
}

/// Sparse parity-check matrix with row and column adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheckMatrix {
    rows: usize,
    cols: usize,
    /// Column indices of the ones in each row, ascending.
    row_cols: Vec<Vec<usize>>,
    /// Row indices of the ones in each column, ascending.
    col_rows: Vec<Vec<usize>>,
}

impl ParityCheckMatrix {
    /// Builds a matrix from the positions of its ones. Duplicate positions
    /// collapse to a single one.
    pub fn from_ones(
        rows: usize,
        cols: usize,
        ones: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, LdpcError> {
        let mut row_cols = vec![Vec::new(); rows];
        let mut col_rows = vec![Vec::new(); cols];
        for (r, c) in ones {
            if r >= rows || c >= cols {
                return Err(LdpcError::OutOfBounds {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
            row_cols[r].push(c);
            col_rows[c].push(r);
        }
        for l in row_cols.iter_mut().chain(col_rows.iter_mut()) {
            l.sort_unstable();
            l.dedup();
        }
        Ok(ParityCheckMatrix {
            rows,
            cols,
            row_cols,
            col_rows,
        })
    }

    pub fn from_dense(dense: &[Vec<u8>]) -> Result<Self, LdpcError> {
        let cols = dense.first().map_or(0, Vec::len);
        let ones = dense.iter().enumerate().flat_map(|(r, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &v)| v & 1 == 1)
                .map(move |(c, _)| (r, c))
        });
        Self::from_ones(dense.len(), cols, ones)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.row_cols[r]
    }

    pub fn col(&self, c: usize) -> &[usize] {
        &self.col_rows[c]
    }

    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_cols
            .iter()
            .enumerate()
            .flat_map(|(r, cs)| cs.iter().map(move |&c| (r, c)))
    }

    pub fn num_ones(&self) -> usize {
        self.row_cols.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> BitMatrix {
        let mut m = BitMatrix::zeros(self.rows, self.cols);
        for (r, c) in self.ones() {
            m.set(r, c, true);
        }
        m
    }

    pub fn syndrome(&self, bits: &[u8]) -> Vec<u8> {
        self.row_cols
            .iter()
            .map(|cs| cs.iter().fold(0u8, |acc, &c| acc ^ (bits[c] & 1)))
            .collect()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.cols && self.syndrome(bits).iter().all(|&s| s == 0)
    }

    /// Number of length-4 cycles in the Tanner graph.
    pub fn count_four_cycles(&self) -> usize {
        let mut count = 0;
        for r1 in 0..self.rows {
            for r2 in r1 + 1..self.rows {
                let shared = intersect_count(&self.row_cols[r1], &self.row_cols[r2]);
                count += shared * shared.saturating_sub(1) / 2;
            }
        }
        count
    }
}

fn intersect_count(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// A linear block code with parity-check matrix `H` and a generator `G`
/// that is systematic on `info_positions`.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    h: ParityCheckMatrix,
    generator: BitMatrix,
    info_positions: Vec<usize>,
}

impl LdpcCode {
    /// Derives a generator by Gauss-Jordan elimination of `H` over GF(2).
    /// Dependent rows of `H` are dropped, so `k = n − rank(H)`.
    pub fn from_parity_check(h: ParityCheckMatrix) -> Result<Self, LdpcError> {
        let n = h.cols();
        let mut reduced = h.to_dense();
        let pivots = reduced.reduce();
        if pivots.is_empty() {
            return Err(LdpcError::ZeroRank);
        }
        let mut is_pivot = vec![false; n];
        for &p in &pivots {
            is_pivot[p] = true;
        }
        let info_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
        if info_positions.is_empty() {
            return Err(LdpcError::NoInformationBits);
        }

        // Reduced row i reads c[pivot_i] = Σ_f R[i][f]·c[f] over free columns f.
        let mut generator = BitMatrix::zeros(info_positions.len(), n);
        for (j, &f) in info_positions.iter().enumerate() {
            generator.set(j, f, true);
            for (i, &p) in pivots.iter().enumerate() {
                if reduced.get(i, f) {
                    generator.set(j, p, true);
                }
            }
        }
        Ok(LdpcCode {
            h,
            generator,
            info_positions,
        })
    }

    /// Convenience wrapper: regular construction followed by generator
    /// derivation.
    pub fn regular(
        n: usize,
        col_weight: usize,
        row_weight: usize,
        seed: u64,
    ) -> Result<Self, LdpcError> {
        Self::from_parity_check(construct_regular(n, col_weight, row_weight, seed)?)
    }

    pub fn n(&self) -> usize {
        self.h.cols()
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    pub fn parity_check(&self) -> &ParityCheckMatrix {
        &self.h
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.generator
    }

    /// Codeword positions that carry the information bits, in order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// `c = Gᵀ·b`: XOR of the generator rows selected by `info`.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>, LdpcError> {
        if info.len() != self.k() {
            return Err(LdpcError::LengthMismatch {
                expected: self.k(),
                got: info.len(),
            });
        }
        let mut acc = pack(&vec![0u8; self.n()]);
        for (j, &b) in info.iter().enumerate() {
            if b & 1 == 1 {
                for (a, g) in acc.iter_mut().zip(self.generator.row_words(j)) {
                    *a ^= g;
                }
            }
        }
        Ok(unpack(&acc, self.n()))
    }

    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }

    pub fn decode(&self, llrs: &[f64], config: &DecoderConfig) -> Result<DecodeResult, LdpcError> {
        bp_decode(self, llrs, config)
    }
}

/// Parity-check matrix of the (7,4) Hamming code.
pub fn hamming_7_4() -> ParityCheckMatrix {
    ParityCheckMatrix::from_dense(&[
        vec![1, 1, 0, 1, 1, 0, 0],
        vec![1, 0, 1, 1, 0, 1, 0],
        vec![0, 1, 1, 1, 0, 0, 1],
    ])
    .expect("static matrix")
}

/// Single parity check over `n` bits.
pub fn single_parity_check(n: usize) -> ParityCheckMatrix {
    ParityCheckMatrix::from_ones(1, n, (0..n).map(|c| (0, c))).expect("static matrix")
}
