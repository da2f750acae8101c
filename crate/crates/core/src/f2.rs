//! Bit-packed linear algebra over F₂.
//!
//! Rows are stored as `u64` words (bit `j` of `rows[i]` is entry `(i, j)`), so
//! both dimensions are capped at 64. Square matrices with `n ≤ 8` can also be
//! packed into a single `u64` (bit `i * n + j`), which is the index encoding
//! used for the inputs of RankOne.

use std::fmt;
use std::str::FromStr;

use crate::error::{guard, Result, XorError};

pub const MAX_DIM: usize = 64;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct F2Matrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<u64>,
}

/// `left · rightᵀ` factorization of a matrix of rank at most one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RankOneDecomposition {
    /// Bit `i` set iff row `i` is nonzero.
    pub left: u64,
    /// The common value of the nonzero rows.
    pub right: u64,
}

#[inline]
fn col_mask(n_cols: usize) -> u64 {
    if n_cols == 64 {
        u64::MAX
    } else {
        (1u64 << n_cols) - 1
    }
}

impl F2Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(XorError::Domain(
                "matrix dimensions must be at least 1".into(),
            ));
        }
        guard("matrix rows", n_rows as u64, MAX_DIM as u64)?;
        guard("matrix columns", n_cols as u64, MAX_DIM as u64)?;
        Ok(F2Matrix {
            n_rows,
            n_cols,
            rows: vec![0; n_rows],
        })
    }

    pub fn from_rows(n_cols: usize, rows: Vec<u64>) -> Result<Self> {
        let mut m = F2Matrix::zeros(rows.len(), n_cols)?;
        let mask = col_mask(n_cols);
        if rows.iter().any(|&r| r & !mask != 0) {
            return Err(XorError::Domain(format!("row wider than {n_cols} columns")));
        }
        m.rows = rows;
        Ok(m)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let rows = (0..n).map(|i| 1u64 << i).collect();
        F2Matrix::from_rows(n, rows)
    }

    pub fn ones(n_rows: usize, n_cols: usize) -> Result<Self> {
        F2Matrix::from_rows(n_cols, vec![col_mask(n_cols); n_rows])
    }

    /// `left · rightᵀ` as an `n_rows × n_cols` matrix.
    pub fn outer(n_rows: usize, n_cols: usize, left: u64, right: u64) -> Result<Self> {
        let right = right & col_mask(n_cols);
        let rows = (0..n_rows)
            .map(|i| if left >> i & 1 == 1 { right } else { 0 })
            .collect();
        F2Matrix::from_rows(n_cols, rows)
    }

    /// Unpacks a square matrix from the `i * n + j` bit layout.
    pub fn from_packed(n: usize, bits: u64) -> Result<Self> {
        guard("packed dimension", n as u64, 8)?;
        let mask = col_mask(n);
        let rows = (0..n).map(|i| (bits >> (i * n)) & mask).collect();
        F2Matrix::from_rows(n, rows)
    }

    /// Packs a square matrix with `n ≤ 8` into one word.
    pub fn to_packed(&self) -> Result<u64> {
        if self.n_rows != self.n_cols {
            return Err(XorError::Domain("only square matrices pack".into()));
        }
        guard("packed dimension", self.n_rows as u64, 8)?;
        Ok(self
            .rows
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &r)| acc | r << (i * self.n_cols)))
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> u64 {
        self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i] >> j & 1 == 1
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        if value {
            self.rows[i] |= 1 << j;
        } else {
            self.rows[i] &= !(1 << j);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(|&r| r == 0)
    }

    pub fn count_ones(&self) -> u32 {
        self.rows.iter().map(|r| r.count_ones()).sum()
    }

    pub fn xor(&self, other: &F2Matrix) -> Result<F2Matrix> {
        self.check_shape(other)?;
        Ok(F2Matrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            rows: self
                .rows
                .iter()
                .zip(&other.rows)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    pub fn transpose(&self) -> F2Matrix {
        let mut rows = vec![0u64; self.n_cols];
        for (i, &r) in self.rows.iter().enumerate() {
            let mut bits = r;
            while bits != 0 {
                let j = bits.trailing_zeros() as usize;
                rows[j] |= 1 << i;
                bits &= bits - 1;
            }
        }
        F2Matrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            rows,
        }
    }

    fn check_shape(&self, other: &F2Matrix) -> Result<()> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(XorError::Domain(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        Ok(())
    }
}

/// Rank over F₂ of a list of row words.
pub fn rank_of_rows(rows: &[u64]) -> usize {
    // basis[b] holds a vector whose highest set bit is b
    let mut basis = [0u64; 64];
    let mut rank = 0;
    for &r in rows {
        let mut v = r;
        while v != 0 {
            let top = 63 - v.leading_zeros() as usize;
            if basis[top] == 0 {
                basis[top] = v;
                rank += 1;
                break;
            }
            v ^= basis[top];
        }
    }
    rank
}

pub fn rank_f2(m: &F2Matrix) -> usize {
    rank_of_rows(&m.rows)
}

/// Returns `ℓ, r` with `ℓ · rᵀ = m` when `rank(m) ≤ 1`. The zero matrix counts
/// as rank ≤ 1 and decomposes as `(0, 0)`.
pub fn decompose_rank_le1(m: &F2Matrix) -> Option<RankOneDecomposition> {
    let mut right = 0u64;
    let mut left = 0u64;
    for (i, &r) in m.rows.iter().enumerate() {
        if r == 0 {
            continue;
        }
        if right == 0 {
            right = r;
        } else if r != right {
            return None;
        }
        left |= 1 << i;
    }
    Some(RankOneDecomposition { left, right })
}

/// Rank-≤1 test on a packed `n × n` matrix.
#[inline]
pub fn packed_rank_le1(bits: u64, n: usize) -> bool {
    let mask = col_mask(n);
    let mut common = 0u64;
    let mut rest = bits;
    while rest != 0 {
        let r = rest & mask;
        if r != 0 {
            if common == 0 {
                common = r;
            } else if r != common {
                return false;
            }
        }
        rest >>= n;
    }
    true
}

/// Packed `left · rightᵀ` for `n ≤ 8`.
#[inline]
pub fn packed_outer(n: usize, left: u64, right: u64) -> u64 {
    (0..n)
        .filter(|i| left >> i & 1 == 1)
        .fold(0u64, |acc, i| acc | right << (i * n))
}

/// Packed forms of all distinct rank-≤1 `n × n` matrices in canonical order:
/// zero first, then by `(left, right)` as integers.
pub fn rank_le1_packed(n: usize) -> Result<Vec<u64>> {
    if n == 0 {
        return Err(XorError::Domain("n must be at least 1".into()));
    }
    guard("rank-1 enumeration n", n as u64, 8)?;
    let side = 1u64 << n;
    let mut out = Vec::with_capacity(((side - 1) * (side - 1) + 1) as usize);
    out.push(0);
    for left in 1..side {
        for right in 1..side {
            out.push(packed_outer(n, left, right));
        }
    }
    Ok(out)
}

/// All distinct `n × n` matrices of rank ≤ 1, `n ≤ 6`, in canonical order.
pub fn enumerate_rank_le1(n: usize) -> Result<Vec<F2Matrix>> {
    guard("rank-1 enumeration n", n as u64, 6)?;
    rank_le1_packed(n)?
        .into_iter()
        .map(|bits| F2Matrix::from_packed(n, bits))
        .collect()
}

/// `(2ⁿ − 1)² + 1`, the number of distinct rank-≤1 `n × n` matrices.
pub fn rank_le1_count(n: usize) -> u64 {
    let side = (1u64 << n) - 1;
    side * side + 1
}

impl fmt::Display for F2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.n_rows, self.n_cols)?;
        for &r in &self.rows {
            let line: String = (0..self.n_cols)
                .map(|j| if r >> j & 1 == 1 { '1' } else { '0' })
                .collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for F2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|&r| {
                (0..self.n_cols)
                    .map(|j| if r >> j & 1 == 1 { '1' } else { '0' })
                    .collect()
            })
            .collect();
        write!(f, "F2Matrix[{}]", rows.join(","))
    }
}

/// Parses the text format: a header `n_rows n_cols`, then one 0/1 string per row.
pub(crate) fn parse_bit_rows(text: &str) -> Result<(usize, usize, Vec<Vec<bool>>)> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| XorError::Parse("missing header line".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| XorError::Parse(format!("bad dimension {t:?}")))
        })
        .collect::<Result<_>>()?;
    let [n_rows, n_cols] = dims[..] else {
        return Err(XorError::Parse("header must be `n_rows n_cols`".into()));
    };
    let mut rows = Vec::with_capacity(n_rows);
    for line in lines {
        if line.len() != n_cols {
            return Err(XorError::Parse(format!(
                "row {} has {} entries, expected {n_cols}",
                rows.len(),
                line.len()
            )));
        }
        let bits = line
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(XorError::Parse(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(bits);
    }
    if rows.len() != n_rows {
        return Err(XorError::Parse(format!(
            "expected {n_rows} rows, found {}",
            rows.len()
        )));
    }
    Ok((n_rows, n_cols, rows))
}

impl FromStr for F2Matrix {
    type Err = XorError;

    fn from_str(s: &str) -> Result<Self> {
        let (n_rows, n_cols, bits) = parse_bit_rows(s)?;
        let mut m = F2Matrix::zeros(n_rows, n_cols)?;
        for (i, row) in bits.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                m.set(i, j, b);
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rank_examples() {
        assert_eq!(rank_f2(&F2Matrix::identity(2).unwrap()), 2);
        assert_eq!(rank_f2(&F2Matrix::zeros(3, 3).unwrap()), 0);
        // J3 xor I3: rows 011, 101, 110 with 011 ^ 101 = 110
        let p = F2Matrix::ones(3, 3)
            .unwrap()
            .xor(&F2Matrix::identity(3).unwrap())
            .unwrap();
        assert_eq!(rank_f2(&p), 2);
        assert_eq!(rank_f2(&F2Matrix::identity(64).unwrap()), 64);
    }

    #[test]
    fn decomposition_examples() {
        let e11 = F2Matrix::outer(3, 3, 1, 1).unwrap();
        assert_eq!(
            decompose_rank_le1(&e11),
            Some(RankOneDecomposition { left: 1, right: 1 })
        );
        assert_eq!(
            decompose_rank_le1(&F2Matrix::zeros(3, 3).unwrap()),
            Some(RankOneDecomposition { left: 0, right: 0 })
        );
        assert_eq!(decompose_rank_le1(&F2Matrix::identity(2).unwrap()), None);
    }

    /// Keeps every matrix whose rank is ≤ 1 by brute force over all 2^(n²).
    fn brute_force_rank_le1(n: usize) -> Vec<u64> {
        (0..1u64 << (n * n))
            .filter(|&bits| rank_f2(&F2Matrix::from_packed(n, bits).unwrap()) <= 1)
            .collect()
    }

    #[test]
    fn enumeration_matches_brute_force() {
        assert_eq!(enumerate_rank_le1(1).unwrap().len(), 2);
        for n in 1..=3 {
            let mut fast = rank_le1_packed(n).unwrap();
            assert_eq!(fast.len() as u64, rank_le1_count(n));
            fast.sort_unstable();
            fast.dedup();
            assert_eq!(fast, brute_force_rank_le1(n), "n = {n}");
        }
        assert_eq!(rank_le1_packed(2).unwrap().len(), 10);
        assert_eq!(rank_le1_packed(3).unwrap().len(), 50);
    }

    #[test]
    fn enumeration_order_is_canonical() {
        let list = enumerate_rank_le1(2).unwrap();
        assert!(list[0].is_zero());
        let keys: Vec<(u64, u64)> = list[1..]
            .iter()
            .map(|m| {
                let d = decompose_rank_le1(m).unwrap();
                (d.left, d.right)
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        assert_eq!(keys, sorted);
        assert!(matches!(
            enumerate_rank_le1(7),
            Err(XorError::SizeLimit { .. })
        ));
    }

    #[test]
    fn text_format_round_trip() {
        let m: F2Matrix = "2 3\n101\n011\n".parse().unwrap();
        assert!(m.get(0, 0) && !m.get(0, 1) && m.get(1, 2));
        assert_eq!(m.to_string(), "2 3\n101\n011\n");
        assert!("2 2\n10\n".parse::<F2Matrix>().is_err());
        assert!("1 2\n1x\n".parse::<F2Matrix>().is_err());
    }

    #[test]
    fn packed_and_row_forms_agree() {
        for bits in 0..1u64 << 9 {
            let m = F2Matrix::from_packed(3, bits).unwrap();
            assert_eq!(m.to_packed().unwrap(), bits);
            assert_eq!(packed_rank_le1(bits, 3), rank_f2(&m) <= 1);
        }
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = F2Matrix> {
        proptest::collection::vec(0u64..(1 << n), n)
            .prop_map(move |rows| F2Matrix::from_rows(n, rows).unwrap())
    }

    proptest! {
        #[test]
        fn decomposition_iff_rank_le1(m in (1usize..=10).prop_flat_map(arb_matrix)) {
            let d = decompose_rank_le1(&m);
            prop_assert_eq!(d.is_some(), rank_f2(&m) <= 1);
            if let Some(d) = d {
                prop_assert_eq!(F2Matrix::outer(m.n_rows(), m.n_cols(), d.left, d.right).unwrap(), m);
            }
        }

        #[test]
        fn rank_is_subadditive((a, b) in (1usize..=12).prop_flat_map(|n| (arb_matrix(n), arb_matrix(n)))) {
            let sum = a.xor(&b).unwrap();
            prop_assert!(rank_f2(&sum) <= rank_f2(&a) + rank_f2(&b));
            prop_assert_eq!(rank_f2(&a), rank_f2(&a.transpose()));
        }
    }
}
