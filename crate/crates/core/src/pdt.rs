//! Parity decision trees.
//!
//! A parity decision tree on `{0,1}^m` queries parities `⊕_{i∈S} x_i` (the
//! mask `S`) and branches on the answer. Trees are stored in an arena so that
//! externally supplied trees can be validated before evaluation.
//!
//! The randomized tester for `rank(M) ≤ 1` draws `A₁, A₂, B₁, B₂ ⊆ [n]`,
//! queries the four parities `C_{αβ} = ⊕_{(i,j) ∈ A_α × B_β} M_ij` and accepts
//! iff the 2×2 matrix `C` has rank ≤ 1. It never rejects a rank-≤1 input and
//! rejects every rank-≥2 input with probability at least 9/64.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{guard, Result, XorError};
use crate::f2::F2Matrix;
use crate::fourier::{spectral_norm, wht_table, Rational};
use crate::par;
use crate::rng;

/// Repetitions for the amplified tester: the least `t` with `(55/64)^t < 1/3`.
pub const AMPLIFY_REPS: u32 = 8;

/// Largest `m` for the exhaustive minimum-size search.
pub const MAX_SEARCH_M: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdtNode {
    Leaf(bool),
    Query {
        mask: u64,
        on_zero: usize,
        on_one: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityDecisionTree {
    m: usize,
    nodes: Vec<PdtNode>,
    root: usize,
}

impl ParityDecisionTree {
    pub fn from_nodes(m: usize, nodes: Vec<PdtNode>, root: usize) -> Self {
        ParityDecisionTree { m, nodes, root }
    }

    pub fn constant(m: usize, value: bool) -> Self {
        ParityDecisionTree {
            m,
            nodes: vec![PdtNode::Leaf(value)],
            root: 0,
        }
    }

    /// Tree querying `mask` once, with constant leaves on each side.
    pub fn single_query(m: usize, mask: u64, on_zero: bool, on_one: bool) -> Self {
        ParityDecisionTree {
            m,
            nodes: vec![
                PdtNode::Query {
                    mask,
                    on_zero: 1,
                    on_one: 2,
                },
                PdtNode::Leaf(on_zero),
                PdtNode::Leaf(on_one),
            ],
            root: 0,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> &[PdtNode] {
        &self.nodes
    }

    fn node(&self, idx: usize) -> Result<PdtNode> {
        self.nodes
            .get(idx)
            .copied()
            .ok_or_else(|| XorError::Structural(format!("node {idx} does not exist")))
    }

    /// Checks child indices, mask widths, depth ≤ m and that no path repeats a
    /// mask.
    pub fn validate(&self) -> Result<()> {
        let width = if self.m >= 64 {
            u64::MAX
        } else {
            (1u64 << self.m) - 1
        };
        let mut stack = vec![(self.root, Vec::<u64>::new())];
        while let Some((idx, path)) = stack.pop() {
            match self.node(idx)? {
                PdtNode::Leaf(_) => {}
                PdtNode::Query {
                    mask,
                    on_zero,
                    on_one,
                } => {
                    if mask == 0 || mask & !width != 0 {
                        return Err(XorError::Structural(format!(
                            "mask {mask:#b} is not a nonempty subset of [{}]",
                            self.m
                        )));
                    }
                    if path.contains(&mask) {
                        return Err(XorError::Structural(format!(
                            "mask {mask:#b} queried twice on one path"
                        )));
                    }
                    if path.len() >= self.m {
                        return Err(XorError::Structural("depth exceeds m".into()));
                    }
                    let mut next = path.clone();
                    next.push(mask);
                    stack.push((on_zero, next.clone()));
                    stack.push((on_one, next));
                }
            }
        }
        Ok(())
    }

    fn count_leaves(&self, pred: impl Fn(bool) -> bool) -> Result<u64> {
        let mut stack = vec![(self.root, 0usize)];
        let mut count = 0;
        while let Some((idx, depth)) = stack.pop() {
            if depth > self.m {
                return Err(XorError::Structural("depth exceeds m".into()));
            }
            match self.node(idx)? {
                PdtNode::Leaf(b) => count += pred(b) as u64,
                PdtNode::Query {
                    on_zero, on_one, ..
                } => {
                    stack.push((on_zero, depth + 1));
                    stack.push((on_one, depth + 1));
                }
            }
        }
        Ok(count)
    }

    pub fn leaves(&self) -> Result<u64> {
        self.count_leaves(|_| true)
    }

    /// Number of 1-labeled leaves: the size measure bounded below by `‖f̂‖₁`.
    pub fn one_leaves(&self) -> Result<u64> {
        self.count_leaves(|b| b)
    }

    pub fn depth(&self) -> Result<usize> {
        let mut stack = vec![(self.root, 0usize)];
        let mut best = 0;
        while let Some((idx, depth)) = stack.pop() {
            if depth > self.m {
                return Err(XorError::Structural("depth exceeds m".into()));
            }
            best = best.max(depth);
            if let PdtNode::Query {
                on_zero, on_one, ..
            } = self.node(idx)?
            {
                stack.push((on_zero, depth + 1));
                stack.push((on_one, depth + 1));
            }
        }
        Ok(best)
    }

    /// Whether the tree computes the function with this truth table.
    pub fn computes(&self, table: &[bool]) -> Result<bool> {
        if table.len() != 1usize << self.m {
            return Err(XorError::Domain("truth table size does not match m".into()));
        }
        for (x, &fx) in table.iter().enumerate() {
            if eval_pdt(self, x as u64)?.0 != fx {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Evaluates the tree on `x`; returns the output and the number of queries.
pub fn eval_pdt(t: &ParityDecisionTree, x: u64) -> Result<(bool, u32)> {
    let mut idx = t.root;
    let mut queries = 0u32;
    loop {
        match t.node(idx)? {
            PdtNode::Leaf(b) => return Ok((b, queries)),
            PdtNode::Query {
                mask,
                on_zero,
                on_one,
            } => {
                queries += 1;
                if queries as usize > t.m.max(1) + 1 {
                    return Err(XorError::Structural("evaluation path longer than m".into()));
                }
                idx = if (mask & x).count_ones() % 2 == 1 {
                    on_one
                } else {
                    on_zero
                };
            }
        }
    }
}

/// The random sets of one tester run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RpdtTrial {
    pub n: usize,
    pub row_sets: [u64; 2],
    pub col_sets: [u64; 2],
}

impl RpdtTrial {
    /// Draws `A₁, A₂, B₁, B₂ ⊆ [n]` uniformly and independently.
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mask = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut draw = || rng.gen::<u64>() & mask;
        RpdtTrial {
            n,
            row_sets: [draw(), draw()],
            col_sets: [draw(), draw()],
        }
    }

    /// The 2×2 matrix `C`, as `[[C11, C12], [C21, C22]]`.
    pub fn sketch(&self, m: &F2Matrix) -> [[bool; 2]; 2] {
        let mut c = [[false; 2]; 2];
        for (a, row_set) in self.row_sets.iter().enumerate() {
            // C' column β restricted to rows in A_α, then summed
            let folded = (0..self.n)
                .filter(|i| row_set >> i & 1 == 1)
                .fold(0u64, |acc, i| acc ^ m.row(i));
            for (b, col_set) in self.col_sets.iter().enumerate() {
                c[a][b] = (folded & col_set).count_ones() % 2 == 1;
            }
        }
        c
    }

    pub fn accepts(&self, m: &F2Matrix) -> bool {
        let c = self.sketch(m);
        // a 2×2 matrix over F₂ has rank ≤ 1 iff its determinant vanishes
        !((c[0][0] & c[1][1]) ^ (c[0][1] & c[1][0]))
    }

    /// The four parity masks over the packed `n × n` input (`n ≤ 8`).
    pub fn query_masks(&self) -> [u64; 4] {
        let outer = |rows: u64, cols: u64| crate::f2::packed_outer(self.n, rows, cols);
        [
            outer(self.row_sets[0], self.col_sets[0]),
            outer(self.row_sets[0], self.col_sets[1]),
            outer(self.row_sets[1], self.col_sets[0]),
            outer(self.row_sets[1], self.col_sets[1]),
        ]
    }

    /// The trial as an explicit depth-4 parity decision tree on the packed
    /// input. Masks that are empty or repeated are answered from the values
    /// already known, so the tree stays valid.
    pub fn to_pdt(&self) -> Result<ParityDecisionTree> {
        guard("packed tester n", self.n as u64, 8)?;
        let masks = self.query_masks();
        let m = self.n * self.n;
        let mut nodes = Vec::new();
        build_sketch_tree(&masks, 0, &mut Vec::new(), &mut nodes);
        let root = nodes.len() - 1;
        Ok(ParityDecisionTree::from_nodes(m, nodes, root))
    }
}

fn build_sketch_tree(
    masks: &[u64; 4],
    k: usize,
    answers: &mut Vec<(u64, bool)>,
    nodes: &mut Vec<PdtNode>,
) -> usize {
    if k == 4 {
        let value = |mask: u64| {
            answers
                .iter()
                .find(|(m, _)| *m == mask)
                .map(|(_, v)| *v)
                .unwrap_or(false)
        };
        let c = [
            value(masks[0]),
            value(masks[1]),
            value(masks[2]),
            value(masks[3]),
        ];
        nodes.push(PdtNode::Leaf(!((c[0] & c[3]) ^ (c[1] & c[2]))));
        return nodes.len() - 1;
    }
    let mask = masks[k];
    if mask == 0 || answers.iter().any(|(m, _)| *m == mask) {
        if mask == 0 {
            answers.push((0, false));
            let idx = build_sketch_tree(masks, k + 1, answers, nodes);
            answers.pop();
            return idx;
        }
        return build_sketch_tree(masks, k + 1, answers, nodes);
    }
    answers.push((mask, false));
    let on_zero = build_sketch_tree(masks, k + 1, answers, nodes);
    answers.pop();
    answers.push((mask, true));
    let on_one = build_sketch_tree(masks, k + 1, answers, nodes);
    answers.pop();
    nodes.push(PdtNode::Query {
        mask,
        on_zero,
        on_one,
    });
    nodes.len() - 1
}

fn check_tester_input(m: &F2Matrix) -> Result<()> {
    if m.n_rows() != m.n_cols() {
        return Err(XorError::Domain("tester input must be square".into()));
    }
    if m.n_rows() < 2 {
        return Err(XorError::Domain("tester needs n >= 2".into()));
    }
    Ok(())
}

/// One run of the constant-query tester with randomness from `rng`.
pub fn rpdt_rankone_trial_with<R: Rng + ?Sized>(m: &F2Matrix, rng: &mut R) -> Result<bool> {
    check_tester_input(m)?;
    Ok(RpdtTrial::sample(m.n_rows(), rng).accepts(m))
}

/// One run of the tester, deterministic in `seed`.
pub fn rpdt_rankone_trial(m: &F2Matrix, seed: u64) -> Result<bool> {
    rpdt_rankone_trial_with(m, &mut rng::stream(seed, 0))
}

/// `reps` independent runs; rejects iff any run rejects.
pub fn rpdt_rankone_with<R: Rng + ?Sized>(m: &F2Matrix, reps: u32, rng: &mut R) -> Result<bool> {
    check_tester_input(m)?;
    if reps == 0 {
        return Err(XorError::Domain("reps must be at least 1".into()));
    }
    let mut accept = true;
    for _ in 0..reps {
        // draw every repetition so the stream position does not depend on M
        accept &= RpdtTrial::sample(m.n_rows(), rng).accepts(m);
    }
    Ok(accept)
}

pub fn rpdt_rankone(m: &F2Matrix, reps: u32, seed: u64) -> Result<bool> {
    rpdt_rankone_with(m, reps, &mut rng::stream(seed, 0))
}

/// Generator for macro-trial `trial` of stream `stream`: each macro-trial owns
/// a fixed block of the ChaCha keystream, so results do not depend on how
/// trials are scheduled across threads.
fn trial_rng(seed: u64, stream: u64, trial: u64, reps: u32) -> rng::StreamRng {
    let mut r = rng::stream(seed, stream);
    // each repetition consumes four u64 draws = eight 32-bit words
    r.set_word_pos(trial as u128 * reps as u128 * 8);
    r
}

/// Number of accepting macro-trials among `trials` runs of the `reps`-fold
/// tester on `m`.
pub fn monte_carlo_accepts(
    m: &F2Matrix,
    reps: u32,
    trials: u64,
    seed: u64,
    stream: u64,
) -> Result<u64> {
    check_tester_input(m)?;
    if reps == 0 {
        return Err(XorError::Domain("reps must be at least 1".into()));
    }
    Ok(par::sum_u64(0..trials as usize, |t| {
        let mut r = trial_rng(seed, stream, t as u64, reps);
        rpdt_rankone_with(m, reps, &mut r).unwrap_or(false) as u64
    }))
}

/// Rejection rate guaranteed for rank-≥2 inputs: `1 − (55/64)^reps`.
pub fn rejection_bound(reps: u32) -> f64 {
    1.0 - (55f64 / 64.0).powi(reps as i32)
}

/// Monte Carlo statistics for all matrices of one rank.
#[derive(Debug, Clone, PartialEq)]
pub struct RankClassStats {
    pub rank: usize,
    pub matrices: u64,
    pub trials_per_matrix: u64,
    pub accepts: u64,
    /// Lowest per-matrix rejection frequency.
    pub min_reject_rate: f64,
    /// Matrices whose rejection frequency falls below
    /// `rejection_bound − 3·√(p̂(1 − p̂)/trials)` (rank ≥ 2 only).
    pub below_bound: u64,
}

impl RankClassStats {
    pub fn accept_rate(&self) -> f64 {
        self.accepts as f64 / (self.matrices * self.trials_per_matrix) as f64
    }

    /// Standard error of the pooled acceptance rate.
    pub fn stderr(&self) -> f64 {
        let p = self.accept_rate();
        (p * (1.0 - p) / (self.matrices * self.trials_per_matrix) as f64).sqrt()
    }
}

/// Runs the `reps`-fold tester `trials` times on every `n × n` matrix
/// (`2 ≤ n ≤ 3`); matrix `k` (packed form) uses stream `k` of `seed`.
pub fn rpdt_exhaustive(n: usize, reps: u32, trials: u64, seed: u64) -> Result<Vec<RankClassStats>> {
    if n < 2 {
        return Err(XorError::Domain("tester needs n >= 2".into()));
    }
    guard("exhaustive tester n", n as u64, 3)?;
    let inputs = (0..1u64 << (n * n))
        .map(|bits| Ok((bits, F2Matrix::from_packed(n, bits)?)))
        .collect::<Result<Vec<_>>>()?;
    rpdt_rank_classes(&inputs, reps, trials, seed)
}

/// Like [`rpdt_exhaustive`] on `count` random `n × n` matrices (`n ≤ 8`):
/// even-indexed samples are uniform, odd-indexed ones are random outer
/// products, so both sides of the promise are represented. Sample `i` uses
/// stream `i` of `seed` for its tester runs.
pub fn rpdt_sampled(
    n: usize,
    count: u64,
    reps: u32,
    trials: u64,
    seed: u64,
) -> Result<Vec<RankClassStats>> {
    if n < 2 {
        return Err(XorError::Domain("tester needs n >= 2".into()));
    }
    guard("sampled tester n", n as u64, 8)?;
    let mut r = rng::stream(seed, u64::MAX);
    let mask = (1u64 << n) - 1;
    let inputs = (0..count)
        .map(|i| {
            let m = if i % 2 == 0 {
                let rows = (0..n).map(|_| r.gen::<u64>() & mask).collect();
                F2Matrix::from_rows(n, rows)?
            } else {
                F2Matrix::outer(n, n, r.gen::<u64>() & mask, r.gen::<u64>() & mask)?
            };
            Ok((i, m))
        })
        .collect::<Result<Vec<_>>>()?;
    rpdt_rank_classes(&inputs, reps, trials, seed)
}

/// Per-rank statistics for `(stream, matrix)` inputs.
pub fn rpdt_rank_classes(
    inputs: &[(u64, F2Matrix)],
    reps: u32,
    trials: u64,
    seed: u64,
) -> Result<Vec<RankClassStats>> {
    if trials == 0 {
        return Err(XorError::Domain("trials must be at least 1".into()));
    }
    let bound = rejection_bound(reps);
    let per_matrix: Vec<(usize, u64)> = inputs
        .iter()
        .map(|(stream, m)| {
            Ok((
                crate::f2::rank_f2(m),
                monte_carlo_accepts(m, reps, trials, seed, *stream)?,
            ))
        })
        .collect::<Result<_>>()?;
    let max_rank = per_matrix.iter().map(|(r, _)| *r).max().unwrap_or(0);
    let mut classes: Vec<RankClassStats> = Vec::new();
    for rank in 0..=max_rank {
        let members: Vec<u64> = per_matrix
            .iter()
            .filter(|(r, _)| *r == rank)
            .map(|(_, a)| *a)
            .collect();
        if members.is_empty() {
            continue;
        }
        let reject_rates = members.iter().map(|&a| 1.0 - a as f64 / trials as f64);
        let below_bound = if rank >= 2 {
            reject_rates
                .clone()
                .filter(|&p| {
                    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
                    p < bound - 3.0 * sigma
                })
                .count() as u64
        } else {
            0
        };
        classes.push(RankClassStats {
            rank,
            matrices: members.len() as u64,
            trials_per_matrix: trials,
            accepts: members.iter().sum(),
            min_reject_rate: reject_rates.fold(1.0, f64::min),
            below_bound,
        });
    }
    Ok(classes)
}

/// Result of the exhaustive minimum-size search.
#[derive(Debug, Clone)]
pub struct MinPdt {
    pub one_leaves: u64,
    pub tree: ParityDecisionTree,
}

/// An affine subspace `{x : ⟨mask_k, x⟩ = value_k}` kept in reduced row
/// echelon form: pivots are the highest bits, and no other row has a pivot
/// bit set. Equal subspaces therefore have equal keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
struct AffineKey(Vec<(u64, bool)>);

impl AffineKey {
    fn reduce(&self, mut mask: u64, mut value: bool) -> (u64, bool) {
        for &(row, v) in &self.0 {
            let pivot = 63 - row.leading_zeros();
            if mask >> pivot & 1 == 1 {
                mask ^= row;
                value ^= v;
            }
        }
        (mask, value)
    }

    /// Adds a constraint; `None` if it contradicts the existing ones.
    fn with(&self, mask: u64, value: bool) -> Option<AffineKey> {
        let (mask, value) = self.reduce(mask, value);
        if mask == 0 {
            return if value { None } else { Some(self.clone()) };
        }
        let pivot = 63 - mask.leading_zeros();
        let mut rows: Vec<(u64, bool)> = self
            .0
            .iter()
            .map(|&(r, v)| {
                if r >> pivot & 1 == 1 {
                    (r ^ mask, v ^ value)
                } else {
                    (r, v)
                }
            })
            .collect();
        rows.push((mask, value));
        rows.sort_unstable_by_key(|&(r, _)| std::cmp::Reverse(63 - r.leading_zeros()));
        Some(AffineKey(rows))
    }

    fn contains(&self, x: u64) -> bool {
        self.0
            .iter()
            .all(|&(r, v)| ((r & x).count_ones() % 2 == 1) == v)
    }
}

struct Search<'a> {
    m: usize,
    table: &'a [bool],
    memo: HashMap<AffineKey, (u64, Option<u64>)>,
}

impl Search<'_> {
    fn solve(&mut self, key: &AffineKey) -> u64 {
        if let Some(&(cost, _)) = self.memo.get(key) {
            return cost;
        }
        let points: Vec<u64> = (0..1u64 << self.m).filter(|&x| key.contains(x)).collect();
        let first = self.table[points[0] as usize];
        if points.iter().all(|&x| self.table[x as usize] == first) {
            let cost = first as u64;
            self.memo.insert(key.clone(), (cost, None));
            return cost;
        }
        let mut best = (u64::MAX, None);
        for mask in 1..1u64 << self.m {
            // masks with the same reduced form split the subspace identically
            let (reduced, _) = key.reduce(mask, false);
            if reduced != mask {
                continue;
            }
            let zero = key.with(mask, false).expect("independent mask");
            let one = key.with(mask, true).expect("independent mask");
            let cost = self.solve(&zero) + self.solve(&one);
            if cost < best.0 {
                best = (cost, Some(mask));
            }
        }
        self.memo.insert(key.clone(), best);
        best.0
    }

    fn build(&self, key: &AffineKey, nodes: &mut Vec<PdtNode>) -> usize {
        match self.memo[key] {
            (cost, None) => nodes.push(PdtNode::Leaf(cost == 1)),
            (_, Some(mask)) => {
                let on_zero = self.build(&key.with(mask, false).expect("memoized"), nodes);
                let on_one = self.build(&key.with(mask, true).expect("memoized"), nodes);
                nodes.push(PdtNode::Query {
                    mask,
                    on_zero,
                    on_one,
                });
            }
        }
        nodes.len() - 1
    }
}

/// Minimum number of 1-labeled leaves over all parity decision trees computing
/// `table` (`m ≤ 4`), together with an optimal tree.
pub fn min_pdt(table: &[bool]) -> Result<MinPdt> {
    if !table.len().is_power_of_two() {
        return Err(XorError::Domain(
            "truth table length must be a power of two".into(),
        ));
    }
    let m = table.len().trailing_zeros() as usize;
    guard("PDT search m", m as u64, MAX_SEARCH_M as u64)?;
    let mut search = Search {
        m,
        table,
        memo: HashMap::new(),
    };
    let root = AffineKey::default();
    let one_leaves = search.solve(&root);
    let mut nodes = Vec::new();
    let root_idx = search.build(&root, &mut nodes);
    Ok(MinPdt {
        one_leaves,
        tree: ParityDecisionTree::from_nodes(m, nodes, root_idx),
    })
}

pub fn min_pdt_one_leaves(table: &[bool]) -> Result<u64> {
    Ok(min_pdt(table)?.one_leaves)
}

/// `true` iff the 1-leaf count of `t` is at least `‖f̂‖₁`. A correct tree always
/// passes; a tree that does not compute `f` is a contract error.
pub fn pdt_size_spectral_check(t: &ParityDecisionTree, table: &[bool]) -> Result<bool> {
    guard("spectral check m", t.m() as u64, 16)?;
    t.validate()?;
    if !t.computes(table)? {
        return Err(XorError::Contract(
            "tree does not compute the function".into(),
        ));
    }
    let norm = spectral_norm(&wht_table(table)?);
    Ok(Rational::from_integer(t.one_leaves()? as i64) >= norm)
}
