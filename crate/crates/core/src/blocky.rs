//! Blocky matrices and fractional blocky covers.
//!
//! A blocky matrix is a disjoint union of combinatorial rectangles whose row
//! and column supports are pairwise disjoint. It is stored by labels: entry
//! `(x, y)` is 1 iff `row[x] = col[y] ≠ 0`. Labels are kept dense (`1..=k`)
//! and canonical, numbered by first appearance among the rows; a label used
//! on only one side is replaced by 0.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;

use crate::eqproto::{EqProtocolTree, EqQuery, NdEqProtocol};
use crate::error::{guard, Result, XorError};
use crate::lpsolve::{self, LinearProgram, Relation, Status};
use crate::par;
use crate::problems::{BoolMatrix, MAX_MATERIALIZED};
use crate::rng;

/// Exact cover weights.
pub type Weight = Ratio<i128>;

/// Largest number of blocks accepted by [`complement_cover`].
pub const MAX_COMPLEMENT_BLOCKS: usize = 20;
/// Largest protocol depth accepted by [`tree_to_fbc`].
pub const MAX_TREE_DEPTH: usize = 5;
/// Largest `N` for [`exact_fbc`] and [`exact_bc`].
pub const MAX_EXACT_N: usize = 4;
/// Largest `N` for the exhaustive rectangle search.
pub const MAX_EXHAUSTIVE_RECT_N: usize = 16;
/// Resampling budget of [`round_to_bc`].
pub const ROUNDING_ATTEMPTS: u32 = 100;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BlockyMatrix {
    row: Vec<u64>,
    col: Vec<u64>,
}

impl std::fmt::Debug for BlockyMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Blocky(rows {:?}, cols {:?})", self.row, self.col)
    }
}

impl BlockyMatrix {
    /// Builds a blocky matrix from arbitrary labels, where 0 means "no block".
    pub fn new(row: Vec<u64>, col: Vec<u64>) -> Result<Self> {
        if row.len() != col.len() || row.is_empty() {
            return Err(XorError::Structural(
                "label arrays must be nonempty and of equal length".into(),
            ));
        }
        guard("blocky N", row.len() as u64, 1 << 20)?;
        let col_labels: std::collections::HashSet<u64> =
            col.iter().copied().filter(|&l| l != 0).collect();
        let mut dense: HashMap<u64, u64> = HashMap::new();
        let row: Vec<u64> = row
            .into_iter()
            .map(|l| {
                if l == 0 || !col_labels.contains(&l) {
                    0
                } else {
                    let next = dense.len() as u64 + 1;
                    *dense.entry(l).or_insert(next)
                }
            })
            .collect();
        let col = col
            .into_iter()
            .map(|l| dense.get(&l).copied().unwrap_or(0))
            .collect();
        Ok(BlockyMatrix { row, col })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let labels: Vec<u64> = (1..=n as u64).collect();
        BlockyMatrix::new(labels.clone(), labels)
    }

    /// The all-ones matrix `J`: one block.
    pub fn ones(n: usize) -> Result<Self> {
        BlockyMatrix::new(vec![1; n], vec![1; n])
    }

    pub fn zeros(n: usize) -> Result<Self> {
        BlockyMatrix::new(vec![0; n], vec![0; n])
    }

    /// The rectangle `rows × cols`.
    pub fn rectangle(rows: &[bool], cols: &[bool]) -> Result<Self> {
        let lift = |s: &[bool]| s.iter().map(|&b| b as u64).collect();
        BlockyMatrix::new(lift(rows), lift(cols))
    }

    /// The blocky matrix of an Eq query: `1` iff the labels agree.
    pub fn from_query(q: &EqQuery) -> Result<Self> {
        let mut ids: HashMap<u64, u64> = HashMap::new();
        let mut intern = |l: u64| {
            let next = ids.len() as u64 + 1;
            *ids.entry(l).or_insert(next)
        };
        let row = q.row.iter().map(|&l| intern(l)).collect();
        let col = q.col.iter().map(|&l| intern(l)).collect();
        BlockyMatrix::new(row, col)
    }

    pub fn n(&self) -> usize {
        self.row.len()
    }

    pub fn row_labels(&self) -> &[u64] {
        &self.row
    }

    pub fn col_labels(&self) -> &[u64] {
        &self.col
    }

    /// Number of blocks `k`.
    pub fn blocks(&self) -> usize {
        self.row.iter().copied().max().unwrap_or(0) as usize
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.row[x] != 0 && self.row[x] == self.col[y]
    }

    pub fn is_zero(&self) -> bool {
        self.blocks() == 0
    }

    pub fn count_ones(&self) -> u64 {
        let k = self.blocks();
        let mut rows = vec![0u64; k + 1];
        let mut cols = vec![0u64; k + 1];
        self.row.iter().for_each(|&l| rows[l as usize] += 1);
        self.col.iter().for_each(|&l| cols[l as usize] += 1);
        (1..=k).map(|l| rows[l] * cols[l]).sum()
    }

    pub fn materialize(&self) -> Result<BoolMatrix> {
        BoolMatrix::from_fn(self.n() as u64, |x, y| self.get(x as usize, y as usize))
    }

    /// Column indices of every block, indexed by label.
    fn col_groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.blocks() + 1];
        for (y, &l) in self.col.iter().enumerate() {
            if l != 0 {
                groups[l as usize].push(y);
            }
        }
        groups
    }

    /// Packed bit pattern, bit `x * n + y` (`n ≤ 8`).
    pub fn pattern(&self) -> u64 {
        let n = self.n();
        debug_assert!(n <= 8);
        let mut bits = 0;
        for x in 0..n {
            for y in 0..n {
                if self.get(x, y) {
                    bits |= 1 << (x * n + y);
                }
            }
        }
        bits
    }
}

/// Recovers labels for `m` if it is blocky.
///
/// Identical nonzero rows form one block; the matrix is blocky iff the row
/// supports of different blocks are disjoint. A row is never split across
/// two blocks, so duplicated rows always carry one label.
pub fn is_blocky(m: &BoolMatrix) -> Option<BlockyMatrix> {
    let n = m.n();
    let mut classes: HashMap<&[u64], u64> = HashMap::new();
    let mut row = vec![0u64; n];
    for (x, label) in row.iter_mut().enumerate() {
        let words = m.row_words(x);
        if words.iter().all(|&w| w == 0) {
            continue;
        }
        let next = classes.len() as u64 + 1;
        *label = *classes.entry(words).or_insert(next);
    }
    let mut col = vec![0u64; n];
    for (support, &label) in &classes {
        for y in 0..n {
            if support[y / 64] >> (y % 64) & 1 == 1 {
                if col[y] != 0 {
                    return None;
                }
                col[y] = label;
            }
        }
    }
    BlockyMatrix::new(row, col).ok()
}

fn same_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(XorError::Domain(format!("sizes differ: {a} vs {b}")));
    }
    Ok(())
}

/// Entrywise AND: labels become pairs.
pub fn blocky_and(a: &BlockyMatrix, b: &BlockyMatrix) -> Result<BlockyMatrix> {
    same_n(a.n(), b.n())?;
    let k = b.blocks() as u64 + 1;
    let pair = |l1: u64, l2: u64| if l1 == 0 || l2 == 0 { 0 } else { l1 * k + l2 };
    BlockyMatrix::new(
        a.row
            .iter()
            .zip(&b.row)
            .map(|(&p, &q)| pair(p, q))
            .collect(),
        a.col
            .iter()
            .zip(&b.col)
            .map(|(&p, &q)| pair(p, q))
            .collect(),
    )
}

/// A weighted family of blocky matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionalCover {
    pub n: usize,
    pub terms: Vec<(Weight, BlockyMatrix)>,
}

impl FractionalCover {
    pub fn empty(n: usize) -> Self {
        FractionalCover {
            n,
            terms: Vec::new(),
        }
    }

    pub fn single(b: BlockyMatrix) -> Self {
        FractionalCover {
            n: b.n(),
            terms: vec![(Weight::one(), b)],
        }
    }

    /// Total weight `Σ λ_i`.
    pub fn weight(&self) -> Weight {
        self.terms.iter().map(|(w, _)| *w).sum()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Merges repeated matrices and drops zero weights.
    fn merged(n: usize, terms: impl IntoIterator<Item = (Weight, BlockyMatrix)>) -> Self {
        let mut index: HashMap<BlockyMatrix, usize> = HashMap::new();
        let mut out: Vec<(Weight, BlockyMatrix)> = Vec::new();
        for (w, b) in terms {
            if w.is_zero() {
                continue;
            }
            match index.get(&b) {
                Some(&i) => out[i].0 += w,
                None => {
                    index.insert(b.clone(), out.len());
                    out.push((w, b));
                }
            }
        }
        FractionalCover { n, terms: out }
    }

    /// Weighted coverage of every entry, row by row.
    pub fn coverage(&self) -> Vec<Vec<Weight>> {
        let groups: Vec<Vec<Vec<usize>>> = self.terms.iter().map(|(_, b)| b.col_groups()).collect();
        par::map_collect(0..self.n, |x| {
            let mut row = vec![Weight::zero(); self.n];
            for ((w, b), groups) in self.terms.iter().zip(&groups) {
                let l = b.row[x] as usize;
                if l != 0 {
                    for &y in &groups[l] {
                        row[y] += *w;
                    }
                }
            }
            row
        })
    }

    /// Coverage is 0 on the zeros of `target` and at least 1 on its ones.
    pub fn verify(&self, target: &BoolMatrix) -> bool {
        if target.n() != self.n
            || self
                .terms
                .iter()
                .any(|(w, b)| w.is_negative() || b.n() != self.n)
        {
            return false;
        }
        let one = Weight::one();
        self.coverage().iter().enumerate().all(|(x, row)| {
            row.iter().enumerate().all(|(y, c)| {
                if target.get(x, y) {
                    *c >= one
                } else {
                    c.is_zero()
                }
            })
        })
    }
}

/// A fractional cover of `J − B` of total weight exactly 4.
///
/// Work over the label universe `U`: the blocks of `B`, plus one element for
/// the zero rows and one for the zero columns. For each `X ⊆ U` take the
/// rectangle (rows with label in `X`) × (columns with label outside `X`), with
/// weight `4 / 2^|U|`. An entry `(x, y)` with different labels lies in a
/// quarter of these rectangles; an entry inside a block lies in none.
pub fn complement_cover(b: &BlockyMatrix) -> Result<FractionalCover> {
    let k = b.blocks();
    guard(
        "complement cover blocks",
        k as u64,
        MAX_COMPLEMENT_BLOCKS as u64,
    )?;
    let zero_row = b.row.contains(&0);
    let zero_col = b.col.contains(&0);
    let row_elem: Vec<usize> = b
        .row
        .iter()
        .map(|&l| if l == 0 { k } else { l as usize - 1 })
        .collect();
    let col_elem: Vec<usize> = b
        .col
        .iter()
        .map(|&l| {
            if l == 0 {
                k + zero_row as usize
            } else {
                l as usize - 1
            }
        })
        .collect();
    let universe = k + zero_row as usize + zero_col as usize;
    let weight = Weight::new(4, 1i128 << universe);
    let terms = (0..1u64 << universe).map(|set| {
        let rows: Vec<bool> = row_elem.iter().map(|&e| set >> e & 1 == 1).collect();
        let cols: Vec<bool> = col_elem.iter().map(|&e| set >> e & 1 == 0).collect();
        (
            weight,
            BlockyMatrix::rectangle(&rows, &cols).expect("same length"),
        )
    });
    Ok(FractionalCover::merged(b.n(), terms))
}

/// Cover of the entrywise AND: all pairwise ANDs with multiplied weights.
pub fn fbc_and(c1: &FractionalCover, c2: &FractionalCover) -> Result<FractionalCover> {
    same_n(c1.n, c2.n)?;
    let mut terms = Vec::with_capacity(c1.len() * c2.len());
    for (w1, b1) in &c1.terms {
        for (w2, b2) in &c2.terms {
            terms.push((*w1 * *w2, blocky_and(b1, b2)?));
        }
    }
    Ok(FractionalCover::merged(c1.n, terms))
}

/// Cover of the entrywise OR: the union of both families.
pub fn fbc_or(c1: &FractionalCover, c2: &FractionalCover) -> Result<FractionalCover> {
    same_n(c1.n, c2.n)?;
    Ok(FractionalCover::merged(
        c1.n,
        c1.terms.iter().chain(&c2.terms).cloned(),
    ))
}

/// Fractional cover of the matrix accepted by `t`, of weight at most
/// `5^depth`: at a query with blocky matrix `B`, the accepted set is
/// `(B ∧ M_equal) ∨ ((J − B) ∧ M_unequal)`.
pub fn tree_to_fbc(t: &EqProtocolTree, n: usize) -> Result<FractionalCover> {
    guard("protocol depth", t.depth() as u64, MAX_TREE_DEPTH as u64)?;
    t.check_domain(n)?;
    tree_cover(t, n)
}

fn tree_cover(t: &EqProtocolTree, n: usize) -> Result<FractionalCover> {
    match t {
        EqProtocolTree::Leaf(false) => Ok(FractionalCover::empty(n)),
        EqProtocolTree::Leaf(true) => Ok(FractionalCover::single(BlockyMatrix::ones(n)?)),
        EqProtocolTree::Query {
            query,
            equal,
            unequal,
        } => {
            let b = BlockyMatrix::from_query(query)?;
            let on_equal = fbc_and(&FractionalCover::single(b.clone()), &tree_cover(equal, n)?)?;
            let unequal_cover = tree_cover(unequal, n)?;
            let on_unequal = if unequal_cover.is_empty() {
                unequal_cover
            } else {
                fbc_and(&complement_cover(&b)?, &unequal_cover)?
            };
            fbc_or(&on_equal, &on_unequal)
        }
    }
}

/// Union of the covers of all trees; weight at most `2^m · 5^d`.
pub fn nd_to_fbc(p: &NdEqProtocol) -> Result<FractionalCover> {
    let mut acc = FractionalCover::empty(p.n);
    for t in &p.trees {
        acc = fbc_or(&acc, &tree_to_fbc(t, p.n)?)?;
    }
    Ok(acc)
}

/// A family whose entrywise OR should equal a target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    pub n: usize,
    pub matrices: Vec<BlockyMatrix>,
}

impl Cover {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn union(&self) -> Result<BoolMatrix> {
        let mut acc = BoolMatrix::zeros(self.n as u64)?;
        for b in &self.matrices {
            acc = acc.or(&b.materialize()?)?;
        }
        Ok(acc)
    }

    pub fn verify(&self, target: &BoolMatrix) -> bool {
        target.n() == self.n && self.union().is_ok_and(|u| &u == target)
    }
}

/// Result of randomized rounding.
#[derive(Debug, Clone)]
pub struct Rounding {
    pub cover: Cover,
    /// Samples drawn per attempt, `⌈W(2 ln N + 1)⌉`.
    pub samples: u64,
    pub attempts: u32,
}

/// Sample budget `⌈W(2 ln N + 1)⌉`.
pub fn rounding_samples(weight: f64, n: usize) -> u64 {
    (weight * (2.0 * (n as f64).ln() + 1.0)).ceil() as u64
}

/// Rounds a fractional cover to a cover by sampling matrices with
/// probability proportional to weight, retrying until every 1-entry is hit.
pub fn round_to_bc(c: &FractionalCover, target: &BoolMatrix, seed: u64) -> Result<Rounding> {
    if !c.verify(target) {
        return Err(XorError::Contract(
            "fractional cover does not cover the target".into(),
        ));
    }
    let n = target.n();
    let total = c.weight().to_f64().unwrap_or(f64::INFINITY);
    let samples = rounding_samples(total, n);
    if target.count_ones() == 0 {
        return Ok(Rounding {
            cover: Cover {
                n,
                matrices: Vec::new(),
            },
            samples,
            attempts: 1,
        });
    }
    guard("rounding samples", samples, 1 << 24)?;
    let weights: Vec<f64> = c
        .terms
        .iter()
        .map(|(w, _)| w.to_f64().unwrap_or(0.0))
        .collect();
    let dist = WeightedIndex::new(&weights)
        .map_err(|e| XorError::Contract(format!("cover weights unusable: {e}")))?;
    let mut r = rng::stream(seed, 0);
    for attempt in 1..=ROUNDING_ATTEMPTS {
        let mut picked = vec![false; c.len()];
        for _ in 0..samples {
            picked[dist.sample(&mut r)] = true;
        }
        let matrices: Vec<BlockyMatrix> = c
            .terms
            .iter()
            .zip(&picked)
            .filter(|(t, &p)| p && !t.1.is_zero())
            .map(|(t, _)| t.1.clone())
            .collect();
        let cover = Cover { n, matrices };
        if cover.verify(target) {
            return Ok(Rounding {
                cover,
                samples,
                attempts: attempt,
            });
        }
    }
    Err(XorError::RandomizedFailure {
        attempts: ROUNDING_ATTEMPTS,
    })
}

/// Every distinct blocky matrix on `[n]` (`n ≤ 4`), in a fixed order.
pub fn all_blocky(n: usize) -> Result<Vec<BlockyMatrix>> {
    if n == 0 {
        return Err(XorError::Domain("n must be at least 1".into()));
    }
    guard("blocky enumeration N", n as u64, MAX_EXACT_N as u64)?;
    let maps = (n as u64 + 1).pow(n as u32);
    let decode = |mut code: u64| {
        (0..n)
            .map(|_| {
                let l = code % (n as u64 + 1);
                code /= n as u64 + 1;
                l
            })
            .collect::<Vec<u64>>()
    };
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for r in 0..maps {
        for c in 0..maps {
            let b = BlockyMatrix::new(decode(r), decode(c))?;
            if seen.insert(b.pattern(), ()).is_none() {
                out.push(b);
            }
        }
    }
    Ok(out)
}

fn target_pattern(target: &BoolMatrix) -> u64 {
    let n = target.n();
    let mut bits = 0;
    for x in 0..n {
        for y in 0..n {
            if target.get(x, y) {
                bits |= 1 << (x * n + y);
            }
        }
    }
    bits
}

/// Maximal blocky matrices inside `target`; every cover and every fractional
/// cover can be assumed to use only these.
fn maximal_blocky_within(target: &BoolMatrix) -> Result<Vec<BlockyMatrix>> {
    let t = target_pattern(target);
    let inside: Vec<BlockyMatrix> = all_blocky(target.n())?
        .into_iter()
        .filter(|b| !b.is_zero() && b.pattern() & !t == 0)
        .collect();
    let patterns: Vec<u64> = inside.iter().map(BlockyMatrix::pattern).collect();
    Ok(inside
        .into_iter()
        .zip(&patterns)
        .filter(|(_, &p)| !patterns.iter().any(|&q| q != p && q & p == p))
        .map(|(b, _)| b)
        .collect())
}

/// Exact fractional blocky cover number of a tiny target.
#[derive(Debug, Clone)]
pub struct ExactFbc {
    pub value: BigRational,
    /// Optimal weights over maximal blocky submatrices of the target.
    pub cover: Vec<(BigRational, BlockyMatrix)>,
}

impl ExactFbc {
    /// The optimal weights as a [`FractionalCover`].
    pub fn to_cover(&self, n: usize) -> Result<FractionalCover> {
        let terms = self
            .cover
            .iter()
            .map(|(w, b)| {
                let num = w.numer().to_i128();
                let den = w.denom().to_i128();
                match (num, den) {
                    (Some(num), Some(den)) => Ok((Weight::new(num, den), b.clone())),
                    _ => Err(XorError::Lp("optimal weight does not fit in i128".into())),
                }
            })
            .collect::<Result<_>>()?;
        Ok(FractionalCover { n, terms })
    }
}

/// Covering LP over the maximal blocky submatrices of the target.
fn fbc_program(target: &BoolMatrix) -> Result<(LinearProgram<BigRational>, Vec<BlockyMatrix>)> {
    let vars = maximal_blocky_within(target)?;
    let one = BigRational::one();
    let mut lp = LinearProgram::minimize(vec![one.clone(); vars.len()]);
    for (x, y) in target.ones_positions() {
        let row = vars
            .iter()
            .map(|b| {
                if b.get(x, y) {
                    one.clone()
                } else {
                    BigRational::zero()
                }
            })
            .collect();
        lp.constrain(row, Relation::Ge, one.clone());
    }
    Ok((lp, vars))
}

/// `fbc(target)` for `N ≤ 4`, by an exact rational LP.
pub fn exact_fbc(target: &BoolMatrix) -> Result<ExactFbc> {
    guard("exact fbc N", target.n() as u64, MAX_EXACT_N as u64)?;
    if target.count_ones() == 0 {
        return Ok(ExactFbc {
            value: BigRational::zero(),
            cover: Vec::new(),
        });
    }
    let (lp, vars) = fbc_program(target)?;
    let sol = lpsolve::solve_exact(&lp)?;
    if sol.status != Status::Optimal {
        return Err(XorError::Lp(format!(
            "covering LP ended as {:?}",
            sol.status
        )));
    }
    let cover = sol
        .x
        .iter()
        .zip(&vars)
        .filter(|(w, _)| !w.is_zero())
        .map(|(w, b)| (w.clone(), b.clone()))
        .collect();
    Ok(ExactFbc {
        value: sol.objective,
        cover,
    })
}

/// The same LP solved in floating point.
pub fn float_fbc(target: &BoolMatrix) -> Result<f64> {
    guard("float fbc N", target.n() as u64, MAX_EXACT_N as u64)?;
    if target.count_ones() == 0 {
        return Ok(0.0);
    }
    let (lp, _) = fbc_program(target)?;
    let sol = lpsolve::solve(&lpsolve::to_float(&lp))?;
    if sol.status != Status::Optimal {
        return Err(XorError::Lp(format!(
            "covering LP ended as {:?}",
            sol.status
        )));
    }
    Ok(sol.objective)
}

/// `bc(target)` for `N ≤ 4`, with an optimal cover.
pub fn exact_bc(target: &BoolMatrix) -> Result<Cover> {
    guard("exact bc N", target.n() as u64, MAX_EXACT_N as u64)?;
    let n = target.n();
    let vars = maximal_blocky_within(target)?;
    let patterns: Vec<u64> = vars.iter().map(BlockyMatrix::pattern).collect();
    let goal = target_pattern(target);
    let mut best: Option<Vec<usize>> = None;
    set_cover(&patterns, goal, 0, &mut Vec::new(), &mut best);
    let chosen = best.expect("the single entries of the target are blocky");
    Ok(Cover {
        n,
        matrices: chosen.into_iter().map(|i| vars[i].clone()).collect(),
    })
}

/// Branch and bound: cover the lowest uncovered entry in every possible way.
fn set_cover(
    patterns: &[u64],
    goal: u64,
    covered: u64,
    chosen: &mut Vec<usize>,
    best: &mut Option<Vec<usize>>,
) {
    if covered == goal {
        if best.as_ref().is_none_or(|b| chosen.len() < b.len()) {
            *best = Some(chosen.clone());
        }
        return;
    }
    if best.as_ref().is_some_and(|b| chosen.len() + 1 >= b.len()) {
        return;
    }
    let entry = (goal & !covered).trailing_zeros();
    for (i, &p) in patterns.iter().enumerate() {
        if p >> entry & 1 == 1 {
            chosen.push(i);
            set_cover(patterns, goal, covered | p, chosen, best);
            chosen.pop();
        }
    }
}

/// A 1-chromatic rectangle `rows × cols`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rectangle {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Rectangle {
    pub fn area(&self) -> u64 {
        (self.rows.len() * self.cols.len()) as u64
    }

    pub fn min_side(&self) -> usize {
        self.rows.len().min(self.cols.len())
    }

    pub fn is_one_chromatic(&self, m: &BoolMatrix) -> bool {
        self.rows
            .iter()
            .all(|&x| self.cols.iter().all(|&y| m.get(x, y)))
    }
}

/// What the rectangle search maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RectObjective {
    Area,
    MinSide,
}

impl RectObjective {
    fn score(self, rows: usize, cols: usize) -> usize {
        match self {
            RectObjective::Area => rows * cols,
            RectObjective::MinSide => rows.min(cols),
        }
    }
}

struct RectSearch<'a> {
    rows: Vec<Vec<u64>>,
    objective: RectObjective,
    best: (usize, Vec<usize>, Vec<u64>),
    deadline: Option<(Instant, Duration)>,
    steps: u64,
    m: &'a BoolMatrix,
}

fn popcount(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

impl RectSearch<'_> {
    fn run(&mut self, next: usize, chosen: &mut Vec<usize>, cols: &[u64]) -> Result<()> {
        self.steps += 1;
        if let Some((deadline, budget)) = self.deadline {
            if self.steps.is_multiple_of(4096) && Instant::now() > deadline {
                return Err(XorError::Timeout {
                    millis: budget.as_millis() as u64,
                });
            }
        }
        let width = popcount(cols);
        let remaining = self.rows.len() - next;
        if self.objective.score(chosen.len() + remaining, width) <= self.best.0 {
            return Ok(());
        }
        if !chosen.is_empty() {
            let score = self.objective.score(chosen.len(), width);
            if score > self.best.0 {
                self.best = (score, chosen.clone(), cols.to_vec());
            }
        }
        for x in next..self.rows.len() {
            let inter: Vec<u64> = cols.iter().zip(&self.rows[x]).map(|(a, b)| a & b).collect();
            let w = popcount(&inter);
            if w == 0 {
                continue;
            }
            chosen.push(x);
            self.run(x + 1, chosen, &inter)?;
            chosen.pop();
        }
        Ok(())
    }
}

fn rect_search(
    m: &BoolMatrix,
    objective: RectObjective,
    budget: Option<Duration>,
) -> Result<Rectangle> {
    let n = m.n();
    let rows: Vec<Vec<u64>> = (0..n).map(|x| m.row_words(x).to_vec()).collect();
    let full = BoolMatrix::ones(n as u64)?;
    let mut s = RectSearch {
        rows,
        objective,
        best: (0, Vec::new(), Vec::new()),
        deadline: budget.map(|b| (Instant::now() + b, b)),
        steps: 0,
        m,
    };
    let all_cols = full.row_words(0).to_vec();
    s.run(0, &mut Vec::new(), &all_cols)?;
    let (_, rows, cols) = s.best;
    let cols = (0..n)
        .filter(|&y| cols.get(y / 64).is_some_and(|w| w >> (y % 64) & 1 == 1))
        .collect();
    let rect = Rectangle { rows, cols };
    debug_assert!(rect.is_one_chromatic(s.m));
    Ok(rect)
}

/// Largest-area 1-chromatic rectangle. Exhaustive for `N ≤ 16`; larger
/// matrices use the same branch and bound under a time budget.
pub fn max_mono_rectangle(m: &BoolMatrix, budget: Option<Duration>) -> Result<Rectangle> {
    let budget = if m.n() <= MAX_EXHAUSTIVE_RECT_N {
        None
    } else {
        budget
    };
    rect_search(m, RectObjective::Area, budget)
}

/// 1-chromatic rectangle maximizing `min(|U|, |V|)`.
pub fn max_min_side_rectangle(m: &BoolMatrix, budget: Option<Duration>) -> Result<Rectangle> {
    let budget = if m.n() <= MAX_EXHAUSTIVE_RECT_N {
        None
    } else {
        budget
    };
    rect_search(m, RectObjective::MinSide, budget)
}

/// `maxrect(A) = α / (N √β)`, with `α` the number of ones and `β` the largest
/// 1-chromatic rectangle area.
#[derive(Debug, Clone)]
pub struct MaxRect {
    pub alpha: u64,
    pub beta: u64,
    pub value: f64,
    pub witness: Rectangle,
}

pub fn maxrect(m: &BoolMatrix, budget: Option<Duration>) -> Result<MaxRect> {
    guard("maxrect N", m.n() as u64, MAX_MATERIALIZED)?;
    let witness = max_mono_rectangle(m, budget)?;
    let alpha = m.count_ones();
    let beta = witness.area();
    let value = if beta == 0 {
        0.0
    } else {
        alpha as f64 / (m.n() as f64 * (beta as f64).sqrt())
    };
    Ok(MaxRect {
        alpha,
        beta,
        value,
        witness,
    })
}

/// Weight as an exact big rational, for reports.
pub fn weight_to_big(w: &Weight) -> BigRational {
    BigRational::new(BigInt::from(*w.numer()), BigInt::from(*w.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eqproto::{cover_to_nd, eval_tree, rankone_tree, verify_nd};
    use crate::problems::Problem;
    use proptest::prelude::*;
    use rand::Rng;

    fn j_minus_i(n: u64) -> BoolMatrix {
        BoolMatrix::identity(n).unwrap().complement()
    }

    #[test]
    fn recognition_examples() {
        let i4 = BoolMatrix::identity(4).unwrap();
        assert_eq!(is_blocky(&i4).unwrap().row_labels(), &[1, 2, 3, 4]);
        assert!(is_blocky(&j_minus_i(2)).is_some());
        assert!(is_blocky(&j_minus_i(3)).is_none());
        assert!(is_blocky(&BoolMatrix::zeros(3).unwrap()).unwrap().is_zero());
    }

    /// Exhaustive label search: is there any labeling realizing `m`?
    fn blocky_by_labels(m: &BoolMatrix) -> bool {
        let p = target_pattern(m);
        all_blocky(m.n()).unwrap().iter().any(|b| b.pattern() == p)
    }

    #[test]
    fn recognition_agrees_with_label_search() {
        for n in 1..=3usize {
            for bits in 0..1u64 << (n * n) {
                let m = BoolMatrix::from_fn(n as u64, |x, y| {
                    bits >> (x as usize * n + y as usize) & 1 == 1
                })
                .unwrap();
                let found = is_blocky(&m);
                assert_eq!(found.is_some(), blocky_by_labels(&m), "{m:?}");
                if let Some(b) = found {
                    assert_eq!(b.materialize().unwrap(), m);
                }
            }
        }
    }

    #[test]
    fn blocky_counts() {
        assert_eq!(all_blocky(1).unwrap().len(), 2);
        // of the 16 patterns, only two distinct overlapping nonzero rows fail
        assert_eq!(all_blocky(2).unwrap().len(), 12);
    }

    fn arb_blocky(n: usize, k: u64) -> impl Strategy<Value = BlockyMatrix> {
        (
            proptest::collection::vec(0..=k, n),
            proptest::collection::vec(0..=k, n),
        )
            .prop_map(|(r, c)| BlockyMatrix::new(r, c).unwrap())
    }

    proptest! {
        #[test]
        fn round_trip(b in arb_blocky(9, 4)) {
            let m = b.materialize().unwrap();
            prop_assert_eq!(is_blocky(&m).unwrap(), b.clone());
            prop_assert_eq!(m.count_ones(), b.count_ones());
        }

        #[test]
        fn and_is_entrywise(a in arb_blocky(8, 3), b in arb_blocky(8, 3)) {
            let c = blocky_and(&a, &b).unwrap();
            prop_assert_eq!(c.materialize().unwrap(), a.materialize().unwrap().and(&b.materialize().unwrap()).unwrap());
        }

        #[test]
        fn complement_is_exact(b in arb_blocky(7, 4)) {
            let c = complement_cover(&b).unwrap();
            prop_assert_eq!(c.weight(), Weight::from_integer(4));
            let target = b.materialize().unwrap().complement();
            for (x, row) in c.coverage().iter().enumerate() {
                for (y, v) in row.iter().enumerate() {
                    prop_assert_eq!(*v, Weight::from_integer(target.get(x, y) as i128));
                }
            }
        }
    }

    #[test]
    fn and_examples() {
        let b = BlockyMatrix::new(vec![1, 2, 0, 1], vec![2, 1, 1, 0]).unwrap();
        assert_eq!(blocky_and(&b, &b).unwrap(), b);
        assert_eq!(blocky_and(&b, &BlockyMatrix::ones(4).unwrap()).unwrap(), b);
        let shift = BlockyMatrix::new(vec![1, 2, 3, 4], vec![2, 3, 4, 1]).unwrap();
        assert!(blocky_and(&BlockyMatrix::identity(4).unwrap(), &shift)
            .unwrap()
            .is_zero());
    }

    #[test]
    fn complement_examples() {
        let c = complement_cover(&BlockyMatrix::identity(2).unwrap()).unwrap();
        assert_eq!(c.weight(), Weight::from_integer(4));
        assert!(c.verify(&j_minus_i(2)));
        let j = BlockyMatrix::ones(3).unwrap();
        let c = complement_cover(&j).unwrap();
        assert_eq!(c.weight(), Weight::from_integer(4));
        assert!(c.verify(&BoolMatrix::zeros(3).unwrap()));
        let i3 = complement_cover(&BlockyMatrix::identity(3).unwrap()).unwrap();
        // direct summation over all 2^3 subsets
        for x in 0..3 {
            for y in 0..3 {
                let hits = (0..8u32)
                    .filter(|s| s >> x & 1 == 1 && s >> y & 1 == 0)
                    .count();
                assert_eq!(i3.coverage()[x][y], Weight::new(4 * hits as i128, 8));
            }
        }
        let wide = BlockyMatrix::identity(21).unwrap();
        assert!(matches!(
            complement_cover(&wide),
            Err(XorError::SizeLimit { .. })
        ));
    }

    #[test]
    fn and_or_weights() {
        let c = complement_cover(&BlockyMatrix::identity(4).unwrap()).unwrap();
        let j = FractionalCover::single(BlockyMatrix::ones(4).unwrap());
        assert_eq!(fbc_and(&c, &j).unwrap().weight(), c.weight());
        assert_eq!(fbc_or(&c, &FractionalCover::empty(4)).unwrap(), c);
        let shift = BlockyMatrix::new(vec![1, 2, 3, 4, 5, 6], vec![2, 3, 1, 5, 6, 4]).unwrap();
        let c1 = complement_cover(&BlockyMatrix::identity(6).unwrap()).unwrap();
        let c2 = complement_cover(&shift).unwrap();
        let both = fbc_and(&c1, &c2).unwrap();
        assert_eq!(both.weight(), Weight::from_integer(16));
        let target = BoolMatrix::identity(6)
            .unwrap()
            .complement()
            .and(&shift.materialize().unwrap().complement())
            .unwrap();
        assert!(both.verify(&target));
        assert!(fbc_or(&c1, &FractionalCover::empty(5)).is_err());
    }

    pub(crate) fn random_tree<R: Rng>(
        r: &mut R,
        n: usize,
        depth: usize,
        labels: u64,
    ) -> EqProtocolTree {
        if depth == 0 || r.gen_bool(0.2) {
            return EqProtocolTree::Leaf(r.gen());
        }
        let row = (0..n).map(|_| r.gen_range(0..labels)).collect();
        let col = (0..n).map(|_| r.gen_range(0..labels)).collect();
        EqProtocolTree::query(
            EqQuery { row, col },
            random_tree(r, n, depth - 1, labels),
            random_tree(r, n, depth - 1, labels),
        )
    }

    #[test]
    fn tree_covers() {
        let eq = EqProtocolTree::query(
            EqQuery::identity(4),
            EqProtocolTree::Leaf(true),
            EqProtocolTree::Leaf(false),
        );
        let c = tree_to_fbc(&eq, 4).unwrap();
        assert_eq!(c.weight(), Weight::one());
        let ne = EqProtocolTree::query(
            EqQuery::identity(4),
            EqProtocolTree::Leaf(false),
            EqProtocolTree::Leaf(true),
        );
        let c = tree_to_fbc(&ne, 4).unwrap();
        assert_eq!(c.weight(), Weight::from_integer(4));
        assert!(c.verify(&j_minus_i(4)));
        let mut r = rng::stream(3, 0);
        for _ in 0..100 {
            let t = random_tree(&mut r, 16, 2, 3);
            let c = tree_to_fbc(&t, 16).unwrap();
            assert!(c.weight() <= Weight::from_integer(25));
            assert!(c.verify(&t.to_matrix(16).unwrap()));
        }
        let deep = (0..6).fold(EqProtocolTree::Leaf(true), |t, _| {
            EqProtocolTree::query(EqQuery::identity(2), t, EqProtocolTree::Leaf(false))
        });
        assert!(tree_to_fbc(&deep, 2).is_err());
    }

    #[test]
    fn nd_covers() {
        let eq = EqProtocolTree::query(
            EqQuery::identity(4),
            EqProtocolTree::Leaf(true),
            EqProtocolTree::Leaf(false),
        );
        let single = NdEqProtocol::deterministic(eq.clone(), 4);
        assert_eq!(nd_to_fbc(&single).unwrap(), tree_to_fbc(&eq, 4).unwrap());
        let ne = EqProtocolTree::query(
            EqQuery::identity(4),
            EqProtocolTree::Leaf(false),
            EqProtocolTree::Leaf(true),
        );
        let p = NdEqProtocol::new(1, 1, 4, vec![eq, ne]).unwrap();
        let c = nd_to_fbc(&p).unwrap();
        assert!(c.weight() <= Weight::from_integer(10));
        assert!(c.verify(&BoolMatrix::ones(4).unwrap()));
    }

    #[test]
    fn rounding() {
        let b = BlockyMatrix::identity(4).unwrap();
        let r = round_to_bc(
            &FractionalCover::single(b.clone()),
            &b.materialize().unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(r.cover.matrices, vec![b.clone()]);
        let c = complement_cover(&b).unwrap();
        let target = j_minus_i(4);
        for seed in 0..20 {
            let r = round_to_bc(&c, &target, seed).unwrap();
            assert!(r.cover.verify(&target));
            assert!(r.cover.len() as u64 <= rounding_samples(4.0, 4));
        }
        assert_eq!(rounding_samples(4.0, 4), 16);
        let zero = BoolMatrix::zeros(4).unwrap();
        assert!(round_to_bc(&FractionalCover::empty(4), &zero, 0)
            .unwrap()
            .cover
            .is_empty());
        assert!(matches!(
            round_to_bc(&FractionalCover::empty(4), &target, 0),
            Err(XorError::Contract(_))
        ));
        let a = round_to_bc(&c, &target, 9).unwrap();
        let b2 = round_to_bc(&c, &target, 9).unwrap();
        assert_eq!(a.cover, b2.cover);
    }

    fn big(n: i64, d: i64) -> BigRational {
        lpsolve::rational(n, d)
    }

    #[test]
    fn tiny_optima() {
        for n in 1..=4u64 {
            let i = BoolMatrix::identity(n).unwrap();
            let j = BoolMatrix::ones(n).unwrap();
            assert_eq!(exact_fbc(&i).unwrap().value, big(1, 1));
            assert_eq!(exact_bc(&i).unwrap().len(), 1);
            assert_eq!(exact_fbc(&j).unwrap().value, big(1, 1));
            assert_eq!(exact_bc(&j).unwrap().len(), 1);
        }
        assert_eq!(exact_fbc(&j_minus_i(2)).unwrap().value, big(1, 1));
        for n in 3..=4 {
            let t = j_minus_i(n);
            let f = exact_fbc(&t).unwrap();
            assert!(f.value >= big(1, 1) && f.value <= big(4, 1));
            let bc = exact_bc(&t).unwrap();
            assert!(bc.verify(&t));
            assert!(big(bc.len() as i64, 1) >= f.value);
        }
        assert!(exact_fbc(&BoolMatrix::identity(5).unwrap()).is_err());
    }

    #[test]
    fn complement_of_identity_fixtures() {
        for n in 3..=4 {
            let t = j_minus_i(n);
            assert_eq!(exact_fbc(&t).unwrap().value, big(3, 2));
            assert_eq!(exact_bc(&t).unwrap().len(), 2);
        }
    }

    #[test]
    fn exact_and_float_lp_agree() {
        for n in 1..=3u64 {
            for bits in 0..1u64 << (n * n) {
                let t = BoolMatrix::from_fn(n, |x, y| bits >> (x * n + y) & 1 == 1).unwrap();
                let exact = exact_fbc(&t).unwrap().value.to_f64().unwrap();
                let float = float_fbc(&t).unwrap();
                assert!(
                    (exact - float).abs() <= 1e-6,
                    "{bits:b}: {exact} vs {float}"
                );
            }
        }
    }

    /// Oracle: brute-force set cover over all blocky matrices by BFS on
    /// covered sets.
    fn bc_by_bfs(target: &BoolMatrix) -> usize {
        let goal = target_pattern(target);
        let pats: Vec<u64> = all_blocky(target.n())
            .unwrap()
            .iter()
            .map(BlockyMatrix::pattern)
            .filter(|p| p & !goal == 0)
            .collect();
        let mut frontier = vec![0u64];
        let mut seen = std::collections::HashSet::from([0u64]);
        let mut depth = 0;
        while !frontier.contains(&goal) {
            depth += 1;
            frontier = frontier
                .iter()
                .flat_map(|&s| pats.iter().map(move |&p| s | p))
                .filter(|s| seen.insert(*s))
                .collect();
        }
        depth
    }

    #[test]
    fn exact_bc_matches_bfs_on_all_3x3_targets() {
        for bits in (0..512u64).step_by(7) {
            let t = BoolMatrix::from_fn(3, |x, y| bits >> (x * 3 + y) & 1 == 1).unwrap();
            let bc = exact_bc(&t).unwrap();
            assert!(bc.verify(&t));
            assert_eq!(bc.len(), bc_by_bfs(&t));
            let f = exact_fbc(&t).unwrap();
            assert!(f.value <= big(bc.len() as i64, 1));
        }
    }

    #[test]
    fn rectangles() {
        for n in [1u64, 3, 8, 16] {
            let j = maxrect(&BoolMatrix::ones(n).unwrap(), None).unwrap();
            assert_eq!((j.alpha, j.beta, j.value), (n * n, n * n, 1.0));
            let i = maxrect(&BoolMatrix::identity(n).unwrap(), None).unwrap();
            assert_eq!((i.alpha, i.beta, i.value), (n, 1, 1.0));
        }
        assert_eq!(
            maxrect(&BoolMatrix::zeros(4).unwrap(), None).unwrap().value,
            0.0
        );
    }

    /// Oracle: every row subset with its common column support.
    fn beta_brute(m: &BoolMatrix) -> (u64, usize) {
        let n = m.n();
        let (mut area, mut side) = (0, 0);
        for set in 1u32..1 << n {
            let cols = (0..n)
                .filter(|&y| (0..n).filter(|&x| set >> x & 1 == 1).all(|x| m.get(x, y)))
                .count();
            let rows = set.count_ones() as usize;
            area = area.max((rows * cols) as u64);
            side = side.max(rows.min(cols));
        }
        (area, side)
    }

    #[test]
    fn rectangle_search_matches_brute_force() {
        let mut r = rng::stream(17, 0);
        for _ in 0..40 {
            let n = r.gen_range(1..=9u64);
            let density = r.gen_range(0.3..0.95);
            let m = BoolMatrix::from_fn(n, |_, _| false).unwrap();
            let mut m = m;
            for x in 0..n as usize {
                for y in 0..n as usize {
                    m.set(x, y, r.gen_bool(density));
                }
            }
            let area = max_mono_rectangle(&m, None).unwrap();
            let side = max_min_side_rectangle(&m, None).unwrap();
            assert!(area.is_one_chromatic(&m) && side.is_one_chromatic(&m));
            assert_eq!((area.area(), side.min_side()), beta_brute(&m));
        }
    }

    #[test]
    fn rankone2_rectangles() {
        let m = Problem::rankone(2).unwrap().materialize().unwrap();
        let best = maxrect(&m, None).unwrap();
        assert_eq!(best.alpha, 160);
        assert!(best.witness.is_one_chromatic(&m));
        assert!(best.witness.min_side() <= 15);
        let side = max_min_side_rectangle(&m, None).unwrap();
        assert!(side.min_side() <= 15);
        assert_eq!((best.beta, side.min_side()), beta_brute(&m));
    }

    #[test]
    fn large_search_times_out() {
        let mut r = rng::stream(5, 0);
        let mut m = BoolMatrix::zeros(400).unwrap();
        for x in 0..400 {
            for y in 0..400 {
                m.set(x, y, r.gen_bool(0.9));
            }
        }
        let err = max_mono_rectangle(&m, Some(Duration::from_millis(50))).unwrap_err();
        assert!(matches!(err, XorError::Timeout { .. }));
    }

    #[test]
    fn pipeline_on_rankone2() {
        let target = Problem::rankone(2).unwrap().materialize().unwrap();
        let t = rankone_tree(2).unwrap();
        for x in 0..16 {
            assert!(eval_tree(&t, x, x).0);
        }
        let p = NdEqProtocol::deterministic(t, 16);
        let c = nd_to_fbc(&p).unwrap();
        assert!(c.verify(&target));
        assert!(c.weight() <= Weight::from_integer(5i128.pow(p.d)));
        let r = round_to_bc(&c, &target, 2).unwrap();
        let back = cover_to_nd(&r.cover.matrices, &target).unwrap();
        assert!(verify_nd(&back, &target).ok);
    }
}
