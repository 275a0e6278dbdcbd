use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LdpcError, ParityCheckMatrix};

const REPAIR_PASSES: usize = 60;
const SWAP_TRIES: usize = 64;

/// Random `(col_weight, row_weight)`-regular parity-check matrix.
///
/// Edge sockets are paired by a seeded shuffle, then repaired by swapping
/// the row endpoints of edge pairs, which keeps every degree fixed. Repeated
/// edges are always removed; length-4 cycles are removed where a bounded
/// number of swaps finds a way.
pub fn construct_regular(
    n: usize,
    col_weight: usize,
    row_weight: usize,
    seed: u64,
) -> Result<ParityCheckMatrix, LdpcError> {
    if col_weight < 2 || row_weight < 2 {
        return Err(LdpcError::WeightTooSmall {
            col_weight,
            row_weight,
        });
    }
    if (n * col_weight) % row_weight != 0 {
        return Err(LdpcError::NotDivisible {
            product: n * col_weight,
            row_weight,
        });
    }
    let m = n * col_weight / row_weight;
    if row_weight > n || col_weight > m {
        return Err(LdpcError::WeightTooLarge {
            n,
            m,
            col_weight,
            row_weight,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row_of: Vec<usize> = (0..m)
        .flat_map(|r| std::iter::repeat(r).take(row_weight))
        .collect();
    row_of.shuffle(&mut rng);

    let mut g = SocketGraph::new(m, col_weight, row_of);
    g.repair(&mut rng, true);
    if g.has_duplicates() {
        g.repair(&mut rng, false);
    }
    assert!(!g.has_duplicates(), "failed to remove repeated edges");

    let ones = (0..g.row_of.len()).map(|e| (g.row_of[e], e / col_weight));
    ParityCheckMatrix::from_ones(m, n, ones)
}

/// Edge `e` joins column `e / col_weight` with row `row_of[e]`.
struct SocketGraph {
    col_weight: usize,
    row_of: Vec<usize>,
    row_cols: Vec<Vec<usize>>,
}

impl SocketGraph {
    fn new(m: usize, col_weight: usize, row_of: Vec<usize>) -> Self {
        let mut row_cols = vec![Vec::new(); m];
        for (e, &r) in row_of.iter().enumerate() {
            row_cols[r].push(e / col_weight);
        }
        SocketGraph {
            col_weight,
            row_of,
            row_cols,
        }
    }

    fn col(&self, e: usize) -> usize {
        e / self.col_weight
    }

    fn col_edges(&self, c: usize) -> std::ops::Range<usize> {
        c * self.col_weight..(c + 1) * self.col_weight
    }

    fn is_duplicate(&self, e: usize) -> bool {
        let r = self.row_of[e];
        self.col_edges(self.col(e))
            .any(|o| o != e && self.row_of[o] == r)
    }

    fn has_duplicates(&self) -> bool {
        (0..self.row_of.len()).any(|e| self.is_duplicate(e))
    }

    /// True when edge `e = (r, c)` lies on a 4-cycle `r–c–r2–c2–r`.
    fn on_four_cycle(&self, e: usize) -> bool {
        let (r, c) = (self.row_of[e], self.col(e));
        let cols_r = &self.row_cols[r];
        self.col_edges(c).filter(|&o| o != e).any(|o| {
            let r2 = self.row_of[o];
            r2 != r
                && self.row_cols[r2]
                    .iter()
                    .any(|&c2| c2 != c && cols_r.contains(&c2))
        })
    }

    fn is_bad(&self, e: usize, strict: bool) -> bool {
        self.is_duplicate(e) || (strict && self.on_four_cycle(e))
    }

    fn swap(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.row_of[a], self.row_of[b]);
        let (ca, cb) = (self.col(a), self.col(b));
        replace_one(&mut self.row_cols[ra], ca, cb);
        replace_one(&mut self.row_cols[rb], cb, ca);
        self.row_of.swap(a, b);
    }

    fn repair(&mut self, rng: &mut ChaCha8Rng, strict: bool) {
        let edges = self.row_of.len();
        for _ in 0..REPAIR_PASSES {
            let bad: Vec<usize> = (0..edges).filter(|&e| self.is_bad(e, strict)).collect();
            if bad.is_empty() {
                return;
            }
            for e in bad {
                if !self.is_bad(e, strict) {
                    continue;
                }
                for _ in 0..SWAP_TRIES {
                    let other = rng.gen_range(0..edges);
                    if self.col(other) == self.col(e) || self.row_of[other] == self.row_of[e] {
                        continue;
                    }
                    let other_was_bad = self.is_bad(other, strict);
                    self.swap(e, other);
                    let fixed = !self.is_bad(e, strict) && (!self.is_bad(other, strict) || other_was_bad);
                    if fixed {
                        break;
                    }
                    self.swap(e, other);
                }
            }
        }
    }
}

fn replace_one(list: &mut [usize], from: usize, to: usize) {
    if let Some(slot) = list.iter_mut().find(|v| **v == from) {
        *slot = to;
    }
}
