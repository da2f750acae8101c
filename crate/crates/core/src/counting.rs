//! Triple counting for the Hölder lower bound on `γ₂(RankOne_n)`.
//!
//! With `M` the RankOne communication matrix on `N = 2^{n²}` inputs, every row
//! has `c₁` ones, so `‖M‖²_F = N·c₁`, and `tr((MᵀM)²) = N·c₃`, where `c₃` counts
//! triples `(R₁, R₂, R₃)` of rank-≤1 matrices with `rank(R₁ ⊕ R₂ ⊕ R₃) ≤ 1`.
//! The Hölder bound `γ₂(M) ≥ ‖M‖³_F / (N √tr((MᵀM)²))` then becomes
//! `√(c₁³ / c₃)`.
//!
//! A nonzero rank-1 matrix is a rectangle `A × B` with both sides nonempty;
//! the zero matrix is the empty rectangle `(∅, ∅)`. A pair `(R₁, R₂)` is in
//! general position when both `A₁, A₂` and `B₁, B₂` are.

use num_bigint::BigInt;

use crate::error::{guard, Result, XorError};
use crate::f2::{packed_outer, packed_rank_le1, rank_le1_count};
use crate::fourier::Rational;
use crate::par;
use crate::problems::Problem;

/// Largest `n` for the full enumeration.
pub const MAX_NAIVE_N: usize = 4;
/// Largest `n` for the fast census.
pub const MAX_FAST_N: usize = 6;
/// Largest `n` for the direct trace computation.
pub const MAX_TRACE_N: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TripleCensus {
    pub n: usize,
    pub c1: u64,
    pub c3: u64,
    pub structured_pairs: u64,
    pub general_pairs: u64,
    pub structured_triples: u64,
    pub general_triples: u64,
    /// Largest number of valid `R₃` for a single general-position pair.
    pub max_general_r3: u64,
    /// The same counts with the zero matrix excluded everywhere.
    pub c1_nonzero: u64,
    pub c3_nonzero: u64,
}

impl TripleCensus {
    fn merge(mut self, o: TripleCensus) -> TripleCensus {
        self.c3 += o.c3;
        self.structured_pairs += o.structured_pairs;
        self.general_pairs += o.general_pairs;
        self.structured_triples += o.structured_triples;
        self.general_triples += o.general_triples;
        self.max_general_r3 = self.max_general_r3.max(o.max_general_r3);
        self.c3_nonzero += o.c3_nonzero;
        self
    }

    /// `√(c₁³ / c₃)`.
    pub fn holder_bound(&self) -> f64 {
        ((self.c1 as f64).powi(3) / self.c3 as f64).sqrt()
    }

    /// Whether `√(c₁³ / c₃) ≤ gamma`, decided exactly.
    pub fn holder_at_most(&self, gamma: Rational) -> bool {
        let c1 = BigInt::from(self.c1);
        let lhs = &c1 * &c1 * &c1 * BigInt::from(*gamma.denom()).pow(2);
        let rhs = BigInt::from(self.c3) * BigInt::from(*gamma.numer()).pow(2);
        gamma.numer() >= &0 && lhs <= rhs
    }
}

/// `6 · 3ⁿ · 2^{4n}`.
pub fn structured_bound(n: usize) -> u128 {
    6 * 3u128.pow(n as u32) * (1u128 << (4 * n))
}

/// `9 · 2^{4n}`.
pub fn general_bound(n: usize) -> u128 {
    9 * (1u128 << (4 * n))
}

/// `A \ B`, `A ∩ B` and `B \ A` are all nonempty.
pub fn is_general_position(a: u64, b: u64) -> bool {
    a & !b != 0 && a & b != 0 && b & !a != 0
}

/// Rectangle sides `(rows, cols)` of every rank-≤1 matrix, in the order of
/// [`crate::f2::rank_le1_packed`].
fn rectangles(n: usize) -> Vec<(u64, u64)> {
    let side = 1u64 << n;
    let mut out = vec![(0, 0)];
    for a in 1..side {
        for b in 1..side {
            out.push((a, b));
        }
    }
    out
}

fn check_n(n: usize, max: usize) -> Result<()> {
    if n == 0 {
        return Err(XorError::Domain("n must be at least 1".into()));
    }
    guard("census n", n as u64, max as u64)
}

/// Enumerates all `c₁³` triples.
pub fn count_triples_naive(n: usize) -> Result<TripleCensus> {
    check_n(n, MAX_NAIVE_N)?;
    let rects = rectangles(n);
    let packed: Vec<u64> = rects.iter().map(|&(a, b)| packed_outer(n, a, b)).collect();
    let c1 = packed.len() as u64;
    let per_r1 = |i: usize| {
        let mut acc = TripleCensus::default();
        let (a1, b1) = rects[i];
        for (j, &(a2, b2)) in rects.iter().enumerate() {
            let d = packed[i] ^ packed[j];
            let general = is_general_position(a1, a2) && is_general_position(b1, b2);
            let mut valid = 0;
            let mut valid_nonzero = 0;
            for &r3 in &packed {
                let r4 = d ^ r3;
                if packed_rank_le1(r4, n) {
                    valid += 1;
                    if packed[i] != 0 && packed[j] != 0 && r3 != 0 && r4 != 0 {
                        valid_nonzero += 1;
                    }
                }
            }
            acc.c3 += valid;
            acc.c3_nonzero += valid_nonzero;
            if general {
                acc.general_pairs += 1;
                acc.general_triples += valid;
                acc.max_general_r3 = acc.max_general_r3.max(valid);
            } else {
                acc.structured_pairs += 1;
                acc.structured_triples += valid;
            }
        }
        acc
    };
    let census = par::map_reduce(
        0..packed.len(),
        TripleCensus::default(),
        per_r1,
        TripleCensus::merge,
    );
    Ok(TripleCensus {
        n,
        c1,
        c1_nonzero: c1 - 1,
        ..census
    })
}

/// Venn counts `[|A₁ \ A₂|, |A₁ ∩ A₂|, |A₂ \ A₁|]` as a table index.
fn venn_index(a1: u64, a2: u64, n: usize) -> usize {
    let k = n + 1;
    let only1 = (a1 & !a2).count_ones() as usize;
    let both = (a1 & a2).count_ones() as usize;
    let only2 = (a2 & !a1).count_ones() as usize;
    (only1 * k + both) * k + only2
}

/// Sets realizing Venn counts: the regions take consecutive elements.
fn venn_sets(only1: usize, both: usize, only2: usize) -> (u64, u64) {
    let range = |lo: usize, len: usize| ((1u64 << len) - 1) << lo;
    let a1 = range(0, only1) | range(only1, both);
    let a2 = range(only1, both) | range(only1 + both, only2);
    (a1, a2)
}

/// Valid `R₃` counts `(all, nonzero variant)` for a pair class.
fn class_counts(n: usize, rows: (u64, u64), cols: (u64, u64), all: &[u64]) -> (u64, u64) {
    let r1 = if rows.0 == 0 || cols.0 == 0 {
        0
    } else {
        packed_outer(n, rows.0, cols.0)
    };
    let r2 = if rows.1 == 0 || cols.1 == 0 {
        0
    } else {
        packed_outer(n, rows.1, cols.1)
    };
    let d = r1 ^ r2;
    let mut valid = 0;
    let mut valid_nonzero = 0;
    for &r3 in all {
        let r4 = d ^ r3;
        if packed_rank_le1(r4, n) {
            valid += 1;
            if r1 != 0 && r2 != 0 && r3 != 0 && r4 != 0 {
                valid_nonzero += 1;
            }
        }
    }
    (valid, valid_nonzero)
}

/// Census without enumerating triples.
///
/// General-position pairs test only the nine targets `a·bᵀ` with `a` a
/// nonzero column of `R₁ ⊕ R₂` (one of `A₁, A₂, A₁ ⊕ A₂`) and `b` a nonzero
/// row (one of `B₁, B₂, B₁ ⊕ B₂`). Structured pairs are grouped by the Venn
/// counts of their row and column sides: row and column permutations preserve
/// rank, so the number of valid `R₃` is constant on each group and is counted
/// once per group.
pub fn count_triples_fast(n: usize) -> Result<TripleCensus> {
    check_n(n, MAX_FAST_N)?;
    let rects = rectangles(n);
    let packed: Vec<u64> = rects.iter().map(|&(a, b)| packed_outer(n, a, b)).collect();
    let k = n + 1;

    // every Venn triple with only1 + both + only2 ≤ n
    let mut triples = Vec::new();
    for only1 in 0..=n {
        for both in 0..=n - only1 {
            for only2 in 0..=n - only1 - both {
                triples.push((only1, both, only2));
            }
        }
    }
    let class_of = |t: (usize, usize, usize)| (t.0 * k + t.1) * k + t.2;
    let size = k * k * k;
    let classes: Vec<(usize, usize)> = triples
        .iter()
        .flat_map(|&r| triples.iter().map(move |&c| (r, c)))
        .filter(|&(r, c)| !(is_general_venn(r) && is_general_venn(c)))
        .map(|(r, c)| (class_of(r), class_of(c)))
        .collect();
    let counts = par::map_collect(0..classes.len(), |i| {
        let (r, c) = classes[i];
        let decode = |idx: usize| venn_sets(idx / (k * k), idx / k % k, idx % k);
        class_counts(n, decode(r), decode(c), &packed)
    });
    let mut table = vec![(u64::MAX, u64::MAX); size * size];
    for (&(r, c), &v) in classes.iter().zip(&counts) {
        table[r * size + c] = v;
    }

    let per_r1 = |i: usize| {
        let mut acc = TripleCensus::default();
        let (a1, b1) = rects[i];
        for (j, &(a2, b2)) in rects.iter().enumerate() {
            if is_general_position(a1, a2) && is_general_position(b1, b2) {
                let d = packed[i] ^ packed[j];
                let mut valid = 0;
                for a in [a1, a2, a1 ^ a2] {
                    for b in [b1, b2, b1 ^ b2] {
                        if packed_rank_le1(d ^ packed_outer(n, a, b), n) {
                            valid += 1;
                        }
                    }
                }
                acc.general_pairs += 1;
                acc.general_triples += valid;
                acc.max_general_r3 = acc.max_general_r3.max(valid);
                acc.c3 += valid;
                // R₁, R₂ are nonzero and R₃ = D ⊕ a·bᵀ cannot vanish, as D has rank 2
                acc.c3_nonzero += valid;
            } else {
                let (valid, valid_nonzero) =
                    table[venn_index(a1, a2, n) * size + venn_index(b1, b2, n)];
                debug_assert!(valid != u64::MAX);
                acc.structured_pairs += 1;
                acc.structured_triples += valid;
                acc.c3 += valid;
                acc.c3_nonzero += valid_nonzero;
            }
        }
        acc
    };
    let census = par::map_reduce(
        0..packed.len(),
        TripleCensus::default(),
        per_r1,
        TripleCensus::merge,
    );
    Ok(TripleCensus {
        n,
        c1: packed.len() as u64,
        c1_nonzero: packed.len() as u64 - 1,
        ..census
    })
}

fn is_general_venn((only1, both, only2): (usize, usize, usize)) -> bool {
    only1 > 0 && both > 0 && only2 > 0
}

/// `holder_bound(n) = √(c₁³ / c₃)` from the fast census.
pub fn holder_bound(n: usize) -> Result<f64> {
    Ok(count_triples_fast(n)?.holder_bound())
}

/// Direct matrix algebra on the materialized RankOne matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceCheck {
    pub n: usize,
    pub big_n: u64,
    /// `‖M‖²_F`, counted entry by entry.
    pub frobenius_sq: u64,
    /// `tr((MᵀM)²)`.
    pub trace: u64,
    pub n_c1: u64,
    pub n_c3: u64,
}

impl TraceCheck {
    pub fn ok(&self) -> bool {
        self.frobenius_sq == self.n_c1 && self.trace == self.n_c3
    }
}

/// Computes `G = MᵀM` entrywise, then `tr(G²) = Σ G_{zw}²` (G is symmetric),
/// and compares with `N·c₁` and `N·c₃`.
pub fn direct_trace_check(n: usize) -> Result<TraceCheck> {
    check_n(n, MAX_TRACE_N)?;
    let m = Problem::rankone(n)?.materialize()?;
    let big_n = m.n();
    let t = m.transpose();
    // G[z][w] = Σ_x M[x][z] M[x][w] = |col_z ∩ col_w|
    let trace = par::sum_u64(0..big_n, |z| {
        let cz = t.row_words(z);
        (0..big_n)
            .map(|w| {
                let g: u64 = cz
                    .iter()
                    .zip(t.row_words(w))
                    .map(|(a, b)| (a & b).count_ones() as u64)
                    .sum();
                g * g
            })
            .sum()
    });
    let census = count_triples_fast(n)?;
    let big = big_n as u64;
    Ok(TraceCheck {
        n,
        big_n: big,
        frobenius_sq: m.count_ones(),
        trace,
        n_c1: big * rank_le1_count(n),
        n_c3: big * census.c3,
    })
}
