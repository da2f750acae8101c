//! Equality-oracle protocols.
//!
//! In this model each step of a deterministic protocol asks the oracle whether
//! `a(x) = b(y)`, where Alice computes `a` from her input and Bob computes `b`
//! from his, and both may depend on the answers so far. Adaptive protocols are
//! written as [`EqStrategy`] objects and run lazily; [`strategy_to_tree`]
//! materializes one into an explicit [`EqProtocolTree`] over `[N]`.
//!
//! Costs are reported in two figures: oracle queries, and plain bits that a
//! player sends outright. A plain bit is simulated by an Eq query against a
//! constant, so in tree form both count towards depth.

use std::collections::HashMap;

use crate::blocky::BlockyMatrix;
use crate::error::{guard, Result, XorError};
use crate::f2::F2Matrix;
use crate::par;
use crate::problems::{BoolMatrix, MAX_MATERIALIZED};

/// An oracle query label: a string of arbitrary length.
pub type Label = Vec<u64>;

/// A query over `[N]`: the answer on `(x, y)` is `row[x] == col[y]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqQuery {
    pub row: Vec<u64>,
    pub col: Vec<u64>,
}

impl EqQuery {
    pub fn new(row: Vec<u64>, col: Vec<u64>) -> Result<Self> {
        if row.len() != col.len() || row.is_empty() {
            return Err(XorError::Structural(
                "query label tables must be nonempty and of equal length".into(),
            ));
        }
        Ok(EqQuery { row, col })
    }

    /// The plain Equality query on `[n]`.
    pub fn identity(n: usize) -> Self {
        let labels: Vec<u64> = (0..n as u64).collect();
        EqQuery {
            row: labels.clone(),
            col: labels,
        }
    }

    pub fn n(&self) -> usize {
        self.row.len()
    }

    pub fn answer(&self, x: usize, y: usize) -> bool {
        self.row[x] == self.col[y]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EqProtocolTree {
    Leaf(bool),
    Query {
        query: EqQuery,
        equal: Box<EqProtocolTree>,
        unequal: Box<EqProtocolTree>,
    },
}

impl EqProtocolTree {
    pub fn query(query: EqQuery, equal: EqProtocolTree, unequal: EqProtocolTree) -> Self {
        EqProtocolTree::Query {
            query,
            equal: Box::new(equal),
            unequal: Box::new(unequal),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            EqProtocolTree::Leaf(_) => 0,
            EqProtocolTree::Query { equal, unequal, .. } => 1 + equal.depth().max(unequal.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            EqProtocolTree::Leaf(_) => 1,
            EqProtocolTree::Query { equal, unequal, .. } => equal.leaves() + unequal.leaves(),
        }
    }

    /// Domain size `N` fixed by the queries, or `None` for a single leaf.
    pub fn domain(&self) -> Option<usize> {
        match self {
            EqProtocolTree::Leaf(_) => None,
            EqProtocolTree::Query { query, .. } => Some(query.n()),
        }
    }

    /// Checks that every query lives on `[n]`.
    pub fn check_domain(&self, n: usize) -> Result<()> {
        match self {
            EqProtocolTree::Leaf(_) => Ok(()),
            EqProtocolTree::Query {
                query,
                equal,
                unequal,
            } => {
                if query.row.len() != n || query.col.len() != n {
                    return Err(XorError::Structural(format!(
                        "query on [{}] inside a protocol on [{n}]",
                        query.n()
                    )));
                }
                equal.check_domain(n)?;
                unequal.check_domain(n)
            }
        }
    }

    /// The set of accepted pairs.
    pub fn to_matrix(&self, n: usize) -> Result<BoolMatrix> {
        self.check_domain(n)?;
        BoolMatrix::from_fn(n as u64, |x, y| eval_tree(self, x as usize, y as usize).0)
    }
}

/// Follows the oracle answers on `(x, y)`; returns the output and the number
/// of queries made.
pub fn eval_tree(t: &EqProtocolTree, x: usize, y: usize) -> (bool, u32) {
    let mut node = t;
    let mut queries = 0;
    loop {
        match node {
            EqProtocolTree::Leaf(b) => return (*b, queries),
            EqProtocolTree::Query {
                query,
                equal,
                unequal,
            } => {
                queries += 1;
                node = if query.answer(x, y) { equal } else { unequal };
            }
        }
    }
}

/// The next move of a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Output(bool),
    /// An oracle query.
    Query,
    /// Alice sends one bit; answered "equal" iff the bit is 1.
    AliceBit,
}

/// An adaptive Equality-oracle protocol. Every method sees the answers given
/// so far (`true` = equal).
pub trait EqStrategy: Sync {
    type Input: Sync;

    fn step(&self, history: &[bool]) -> Step;
    fn alice_label(&self, history: &[bool], x: &Self::Input) -> Label;
    fn bob_label(&self, history: &[bool], y: &Self::Input) -> Label;
}

/// Outcome of one protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Run {
    pub output: bool,
    pub queries: u32,
    pub plain_bits: u32,
}

impl Run {
    /// Oracle queries plus plain bits.
    pub fn cost(&self) -> u32 {
        self.queries + self.plain_bits
    }
}

pub fn run_strategy<S: EqStrategy>(s: &S, x: &S::Input, y: &S::Input) -> Run {
    let mut history = Vec::new();
    let (mut queries, mut plain_bits) = (0, 0);
    loop {
        match s.step(&history) {
            Step::Output(output) => {
                return Run {
                    output,
                    queries,
                    plain_bits,
                }
            }
            step => {
                if step == Step::Query {
                    queries += 1;
                } else {
                    plain_bits += 1;
                }
                let answer = s.alice_label(&history, x) == s.bob_label(&history, y);
                history.push(answer);
            }
        }
    }
}

/// The RankOne protocol on `n × n` matrices.
///
/// Phase one compares every row pair `(a_k, b_k)`. If all are equal then
/// `A ⊕ B = 0`. Otherwise, with `i` the first differing row, phase two checks
/// `a_j ⊕ a_i = b_j ⊕ b_i` for every other differing row `j`, which holds iff
/// `(A ⊕ B)_j = (A ⊕ B)_i`. When all checks pass, every nonzero row of
/// `A ⊕ B` equals the same vector, so the rank is exactly 1.
#[derive(Debug, Clone, Copy)]
pub struct RankOneStrategy {
    pub n: usize,
}

impl RankOneStrategy {
    /// `(i, rows to compare with i)` once phase one is over.
    fn plan(&self, history: &[bool]) -> (usize, Vec<usize>) {
        let differing: Vec<usize> = (0..self.n).filter(|&k| !history[k]).collect();
        (differing[0], differing[1..].to_vec())
    }
}

impl EqStrategy for RankOneStrategy {
    type Input = F2Matrix;

    fn step(&self, history: &[bool]) -> Step {
        let n = self.n;
        if history.len() < n {
            return Step::Query;
        }
        if history[..n].iter().all(|&e| e) {
            return Step::Output(true);
        }
        if history[n..].iter().any(|&e| !e) {
            return Step::Output(false);
        }
        let (_, others) = self.plan(history);
        if history.len() - n < others.len() {
            Step::Query
        } else {
            Step::Output(true)
        }
    }

    fn alice_label(&self, history: &[bool], a: &F2Matrix) -> Label {
        if history.len() < self.n {
            return vec![a.row(history.len())];
        }
        let (i, others) = self.plan(history);
        vec![a.row(others[history.len() - self.n]) ^ a.row(i)]
    }

    fn bob_label(&self, history: &[bool], b: &F2Matrix) -> Label {
        self.alice_label(history, b)
    }
}

pub fn run_rankone_protocol(a: &F2Matrix, b: &F2Matrix) -> Result<Run> {
    if a.n_rows() != a.n_cols() || a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols() {
        return Err(XorError::Domain(
            "rankone protocol needs two square matrices of one shape".into(),
        ));
    }
    Ok(run_strategy(&RankOneStrategy { n: a.n_rows() }, a, b))
}

pub(crate) fn ceil_log2(n: usize) -> u32 {
    n.max(1).next_power_of_two().trailing_zeros()
}

/// Greater-Than on `bits`-bit integers (`x > y`): binary search for the
/// longest common prefix, then Alice sends her bit at the first difference.
#[derive(Debug, Clone, Copy)]
pub struct GreaterThanStrategy {
    pub bits: usize,
}

enum GtState {
    Done(bool),
    /// Compare the prefixes of this length (the whole string first).
    Ask(usize),
    /// Alice sends her bit at this position, counted from the top.
    Bit(usize),
}

impl GreaterThanStrategy {
    fn prefix(&self, x: u64, len: usize) -> u64 {
        if len == 0 {
            0
        } else {
            x >> (self.bits - len)
        }
    }

    fn state(&self, history: &[bool]) -> GtState {
        let Some((&equal, rest)) = history.split_first() else {
            return GtState::Ask(self.bits);
        };
        if equal {
            return GtState::Done(false);
        }
        // prefixes of length lo agree, prefixes of length hi + 1 differ
        let (mut lo, mut hi) = (0, self.bits - 1);
        let mut answers = rest.iter();
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            match answers.next() {
                None => return GtState::Ask(mid),
                Some(true) => lo = mid,
                Some(false) => hi = mid - 1,
            }
        }
        match answers.next() {
            None => GtState::Bit(lo),
            Some(&bit) => GtState::Done(bit),
        }
    }
}

impl EqStrategy for GreaterThanStrategy {
    type Input = u64;

    fn step(&self, history: &[bool]) -> Step {
        match self.state(history) {
            GtState::Done(b) => Step::Output(b),
            GtState::Ask(_) => Step::Query,
            GtState::Bit(_) => Step::AliceBit,
        }
    }

    fn alice_label(&self, history: &[bool], x: &u64) -> Label {
        match self.state(history) {
            GtState::Ask(len) => vec![self.prefix(*x, len)],
            GtState::Bit(pos) => vec![x >> (self.bits - 1 - pos) & 1],
            GtState::Done(_) => Vec::new(),
        }
    }

    fn bob_label(&self, history: &[bool], y: &u64) -> Label {
        match self.state(history) {
            GtState::Ask(len) => vec![self.prefix(*y, len)],
            GtState::Bit(_) => vec![1],
            GtState::Done(_) => Vec::new(),
        }
    }
}

pub fn run_gt_protocol(x: u64, y: u64, bits: usize) -> Result<Run> {
    check_bits(bits)?;
    if bits < 64 && (x >> bits != 0 || y >> bits != 0) {
        return Err(XorError::Domain(format!("inputs must be below 2^{bits}")));
    }
    Ok(run_strategy(&GreaterThanStrategy { bits }, &x, &y))
}

/// Hamming distance at most one on `bits`-bit strings, by recursive halving.
#[derive(Debug, Clone, Copy)]
pub struct HammingOneStrategy {
    pub bits: usize,
}

enum HdState {
    Done(bool),
    /// Next query compares positions `lo..hi`.
    Ask(usize, usize),
}

impl HammingOneStrategy {
    fn padded(&self) -> usize {
        self.bits.next_power_of_two()
    }

    fn state(&self, history: &[bool]) -> HdState {
        let Some((&whole, rest)) = history.split_first() else {
            return HdState::Ask(0, self.padded());
        };
        if whole {
            return HdState::Done(true);
        }
        // the interval [lo, lo + len) is known to differ
        let (mut lo, mut len) = (0, self.padded());
        let mut answers = rest.chunks(2);
        loop {
            if len == 1 {
                return HdState::Done(true);
            }
            let half = len / 2;
            match answers.next() {
                None => return HdState::Ask(lo, lo + half),
                Some([_]) => return HdState::Ask(lo + half, lo + len),
                Some(&[left_eq, right_eq]) => match (left_eq, right_eq) {
                    (false, false) | (true, true) => return HdState::Done(false),
                    (false, true) => len = half,
                    (true, false) => {
                        lo += half;
                        len = half;
                    }
                },
                Some(_) => unreachable!("chunks of two"),
            }
        }
    }

    fn label(&self, history: &[bool], x: u64) -> Label {
        match self.state(history) {
            HdState::Ask(lo, hi) => {
                let width = hi - lo;
                let mask = if width >= 64 {
                    u64::MAX
                } else {
                    (1u64 << width) - 1
                };
                // padding positions are zero on both sides
                vec![if lo >= 64 { 0 } else { (x >> lo) & mask }]
            }
            HdState::Done(_) => Vec::new(),
        }
    }
}

impl EqStrategy for HammingOneStrategy {
    type Input = u64;

    fn step(&self, history: &[bool]) -> Step {
        match self.state(history) {
            HdState::Done(b) => Step::Output(b),
            HdState::Ask(..) => Step::Query,
        }
    }

    fn alice_label(&self, history: &[bool], x: &u64) -> Label {
        self.label(history, *x)
    }

    fn bob_label(&self, history: &[bool], y: &u64) -> Label {
        self.label(history, *y)
    }
}

pub fn run_hd1_protocol(x: u64, y: u64, bits: usize) -> Result<Run> {
    check_bits(bits)?;
    if bits < 64 && (x >> bits != 0 || y >> bits != 0) {
        return Err(XorError::Domain(format!("inputs must be below 2^{bits}")));
    }
    Ok(run_strategy(&HammingOneStrategy { bits }, &x, &y))
}

fn check_bits(bits: usize) -> Result<()> {
    if bits == 0 {
        return Err(XorError::Domain("bit length must be at least 1".into()));
    }
    guard("bit length", bits as u64, 64)
}

/// Query bound of the RankOne protocol.
pub fn rankone_query_bound(n: usize) -> u32 {
    2 * n as u32 - 1
}

/// Query bound of the Greater-Than protocol (the final plain bit excluded).
pub fn gt_query_bound(bits: usize) -> u32 {
    ceil_log2(bits) + 1
}

/// Query bound of the HD₁ protocol.
pub fn hd1_query_bound(bits: usize) -> u32 {
    2 * ceil_log2(bits) + 1
}

/// Materializes a strategy over `[n]`, with `decode` mapping an index to the
/// strategy's input. Branches no input pair reaches are pruned.
pub fn strategy_to_tree<S, D>(s: &S, n: u64, decode: D) -> Result<EqProtocolTree>
where
    S: EqStrategy,
    D: Fn(u64) -> S::Input,
{
    if n == 0 {
        return Err(XorError::Domain("domain must be nonempty".into()));
    }
    guard("strategy domain", n, MAX_MATERIALIZED)?;
    let inputs: Vec<S::Input> = (0..n).map(&decode).collect();
    let pairs: Vec<(u32, u32)> = (0..n as u32)
        .flat_map(|x| (0..n as u32).map(move |y| (x, y)))
        .collect();
    Ok(build_tree(s, &inputs, &mut Vec::new(), pairs))
}

fn build_tree<S: EqStrategy>(
    s: &S,
    inputs: &[S::Input],
    history: &mut Vec<bool>,
    pairs: Vec<(u32, u32)>,
) -> EqProtocolTree {
    if let Step::Output(b) = s.step(history) {
        return EqProtocolTree::Leaf(b);
    }
    let mut ids: HashMap<Label, u64> = HashMap::new();
    let mut intern = |label: Label| {
        let next = ids.len() as u64;
        *ids.entry(label).or_insert(next)
    };
    let row: Vec<u64> = inputs
        .iter()
        .map(|x| intern(s.alice_label(history, x)))
        .collect();
    let col: Vec<u64> = inputs
        .iter()
        .map(|y| intern(s.bob_label(history, y)))
        .collect();
    let (eq_pairs, ne_pairs): (Vec<_>, Vec<_>) = pairs
        .into_iter()
        .partition(|&(x, y)| row[x as usize] == col[y as usize]);
    let mut child = |answer: bool, pairs: Vec<(u32, u32)>| {
        history.push(answer);
        let t = build_tree(s, inputs, history, pairs);
        history.pop();
        t
    };
    match (eq_pairs.is_empty(), ne_pairs.is_empty()) {
        (false, true) => child(true, eq_pairs),
        (true, false) => child(false, ne_pairs),
        (true, true) => EqProtocolTree::Leaf(false),
        (false, false) => {
            let equal = child(true, eq_pairs);
            let unequal = child(false, ne_pairs);
            EqProtocolTree::query(EqQuery { row, col }, equal, unequal)
        }
    }
}

/// Explicit tree for the RankOne protocol over packed `n × n` matrices.
pub fn rankone_tree(n: usize) -> Result<EqProtocolTree> {
    guard("rankone tree n", n as u64, 3)?;
    strategy_to_tree(&RankOneStrategy { n }, 1 << (n * n), |bits| {
        F2Matrix::from_packed(n, bits).expect("n <= 3")
    })
}

/// Summary of an exhaustive protocol check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sweep {
    pub pairs_checked: u64,
    pub max_queries: u32,
    pub max_plain_bits: u32,
    pub correct: bool,
}

impl Sweep {
    fn merge(self, other: Sweep) -> Sweep {
        Sweep {
            pairs_checked: self.pairs_checked + other.pairs_checked,
            max_queries: self.max_queries.max(other.max_queries),
            max_plain_bits: self.max_plain_bits.max(other.max_plain_bits),
            correct: self.correct && other.correct,
        }
    }

    const EMPTY: Sweep = Sweep {
        pairs_checked: 0,
        max_queries: 0,
        max_plain_bits: 0,
        correct: true,
    };
}

/// Runs a strategy on every pair of `[n]²` and compares with `truth`.
pub fn sweep<S, D, T>(s: &S, n: u64, decode: D, truth: T) -> Sweep
where
    S: EqStrategy,
    S::Input: Send,
    D: Fn(u64) -> S::Input + Sync,
    T: Fn(u64, u64) -> bool + Sync,
{
    let inputs: Vec<S::Input> = (0..n).map(&decode).collect();
    par::map_reduce(
        0..n as usize,
        Sweep::EMPTY,
        |x| {
            let mut acc = Sweep::EMPTY;
            for y in 0..n as usize {
                let run = run_strategy(s, &inputs[x], &inputs[y]);
                acc = acc.merge(Sweep {
                    pairs_checked: 1,
                    max_queries: run.queries,
                    max_plain_bits: run.plain_bits,
                    correct: run.output == truth(x as u64, y as u64),
                });
            }
            acc
        },
        Sweep::merge,
    )
}

/// Exhaustive check of the RankOne protocol on all `4^{n²}` pairs.
pub fn sweep_rankone(n: usize) -> Result<Sweep> {
    if n == 0 {
        return Err(XorError::Domain("n must be at least 1".into()));
    }
    guard("rankone sweep n", n as u64, 3)?;
    let s = RankOneStrategy { n };
    Ok(sweep(
        &s,
        1 << (n * n),
        |b| F2Matrix::from_packed(n, b).expect("n <= 3"),
        |x, y| crate::f2::packed_rank_le1(x ^ y, n),
    ))
}

pub fn sweep_gt(bits: usize) -> Result<Sweep> {
    check_bits(bits)?;
    guard("gt sweep bits", bits as u64, 10)?;
    Ok(sweep(
        &GreaterThanStrategy { bits },
        1 << bits,
        |x| x,
        |x, y| x > y,
    ))
}

pub fn sweep_hd1(bits: usize) -> Result<Sweep> {
    check_bits(bits)?;
    guard("hd1 sweep bits", bits as u64, 10)?;
    Ok(sweep(
        &HammingOneStrategy { bits },
        1 << bits,
        |x| x,
        |x, y| (x ^ y).count_ones() <= 1,
    ))
}

/// A union of `2^m` trees of depth at most `d`, accepting iff some tree does.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NdEqProtocol {
    pub m: u32,
    pub d: u32,
    pub n: usize,
    pub trees: Vec<EqProtocolTree>,
}

impl NdEqProtocol {
    pub fn new(m: u32, d: u32, n: usize, trees: Vec<EqProtocolTree>) -> Result<Self> {
        guard("nondeterministic bits m", m as u64, 20)?;
        if trees.len() != 1usize << m {
            return Err(XorError::Structural(format!(
                "expected {} trees, got {}",
                1u64 << m,
                trees.len()
            )));
        }
        Ok(NdEqProtocol { m, d, n, trees })
    }

    /// A deterministic protocol viewed as a nondeterministic one (`m = 0`).
    pub fn deterministic(tree: EqProtocolTree, n: usize) -> Self {
        let d = tree.depth() as u32;
        NdEqProtocol {
            m: 0,
            d,
            n,
            trees: vec![tree],
        }
    }

    pub fn cost(&self) -> u32 {
        self.m + self.d
    }

    pub fn accepts(&self, x: usize, y: usize) -> bool {
        self.trees.iter().any(|t| eval_tree(t, x, y).0)
    }
}

/// Outcome of [`verify_nd`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NdCheck {
    pub ok: bool,
    /// A pair on which the union disagrees with the target.
    pub counterexample: Option<(usize, usize)>,
    /// Set when the structural condition (tree count, depth, domain) fails.
    pub structural: Option<String>,
}

/// Checks the tree count and depth bound, then every pair of `[N]²`.
pub fn verify_nd(p: &NdEqProtocol, target: &BoolMatrix) -> NdCheck {
    let fail = |msg: String| NdCheck {
        ok: false,
        counterexample: None,
        structural: Some(msg),
    };
    if p.trees.len() != 1usize << p.m {
        return fail(format!("{} trees for m = {}", p.trees.len(), p.m));
    }
    let n = target.n();
    if p.n != n {
        return fail(format!("protocol on [{}], target on [{n}]", p.n));
    }
    for (i, t) in p.trees.iter().enumerate() {
        if t.depth() > p.d as usize {
            return fail(format!("tree {i} has depth {} > {}", t.depth(), p.d));
        }
        if let Err(e) = t.check_domain(n) {
            return fail(format!("tree {i}: {e}"));
        }
    }
    let bad_row = par::find_first(0..n, |x| {
        (0..n).any(|y| p.accepts(x, y) != target.get(x, y))
    });
    let counterexample = bad_row.map(|x| {
        (
            x,
            (0..n)
                .find(|&y| p.accepts(x, y) != target.get(x, y))
                .expect("row fails"),
        )
    });
    NdCheck {
        ok: counterexample.is_none(),
        counterexample,
        structural: None,
    }
}

/// Labels for the query realizing a blocky matrix: label 0 means "no block",
/// so it becomes a row sentinel and a distinct column sentinel.
fn blocky_query(b: &BlockyMatrix) -> EqQuery {
    let map = |labels: &[u64], sentinel: u64| {
        labels
            .iter()
            .map(|&l| if l == 0 { sentinel } else { l })
            .collect()
    };
    EqQuery {
        row: map(b.row_labels(), u64::MAX),
        col: map(b.col_labels(), u64::MAX - 1),
    }
}

/// One depth-1 tree per blocky matrix, accepting on "equal", padded to a
/// power of two with rejecting leaves.
pub fn cover_to_nd(cover: &[BlockyMatrix], target: &BoolMatrix) -> Result<NdEqProtocol> {
    let n = target.n();
    let mut union = BoolMatrix::zeros(n as u64)?;
    for b in cover {
        if b.n() != n {
            return Err(XorError::Contract(format!(
                "cover matrix on [{}], target on [{n}]",
                b.n()
            )));
        }
        union = union.or(&b.materialize()?)?;
    }
    if &union != target {
        return Err(XorError::Contract("cover does not equal the target".into()));
    }
    let m = ceil_log2(cover.len());
    let mut trees: Vec<EqProtocolTree> = cover
        .iter()
        .map(|b| {
            EqProtocolTree::query(
                blocky_query(b),
                EqProtocolTree::Leaf(true),
                EqProtocolTree::Leaf(false),
            )
        })
        .collect();
    trees.resize(1 << m, EqProtocolTree::Leaf(false));
    NdEqProtocol::new(m, 1, n, trees)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::f2::{packed_rank_le1, rank_f2};
    use proptest::prelude::*;

    #[test]
    fn eval_examples() {
        assert_eq!(eval_tree(&EqProtocolTree::Leaf(true), 0, 0), (true, 0));
        let eq = EqProtocolTree::query(
            EqQuery::identity(4),
            EqProtocolTree::Leaf(true),
            EqProtocolTree::Leaf(false),
        );
        assert_eq!(eval_tree(&eq, 2, 2), (true, 1));
        assert_eq!(eval_tree(&eq, 2, 3), (false, 1));
        assert_eq!(eq.to_matrix(4).unwrap(), BoolMatrix::identity(4).unwrap());
        assert!(eq.to_matrix(5).is_err());
        assert!(EqQuery::new(vec![1], vec![1, 2]).is_err());
    }

    fn m2(rows: [u64; 2]) -> F2Matrix {
        F2Matrix::from_rows(2, rows.to_vec()).unwrap()
    }

    #[test]
    fn rankone_examples() {
        let a = m2([0b01, 0b10]);
        let r = run_rankone_protocol(&a, &a).unwrap();
        assert_eq!((r.output, r.queries), (true, 2));
        // A ⊕ B = e₁e₁ᵀ
        let r = run_rankone_protocol(&a, &m2([0b00, 0b10])).unwrap();
        assert!(r.output && r.queries <= 3);
        // A ⊕ B = I₂
        let r = run_rankone_protocol(&a, &m2([0b00, 0b00])).unwrap();
        assert!(!r.output && r.queries <= 3);
        let three = F2Matrix::zeros(3, 3).unwrap();
        assert!(run_rankone_protocol(&a, &three).is_err());
    }

    #[test]
    fn rankone_exhaustive_small() {
        for n in 1..=2 {
            let s = sweep_rankone(n).unwrap();
            assert!(s.correct);
            assert_eq!(s.pairs_checked, 1 << (2 * n * n));
            assert!(s.max_queries <= rankone_query_bound(n));
            assert_eq!(s.max_plain_bits, 0);
        }
    }

    #[test]
    fn gt_examples() {
        let r = run_gt_protocol(5, 5, 3).unwrap();
        assert!(!r.output && r.queries <= gt_query_bound(3));
        let r = run_gt_protocol(2, 1, 2).unwrap();
        assert!(r.output && r.queries <= 2 && r.plain_bits == 1);
        assert!(!run_gt_protocol(0, 1, 1).unwrap().output);
        assert!(run_gt_protocol(4, 1, 2).is_err());
    }

    #[test]
    fn gt_exhaustive() {
        for bits in 1..=8 {
            let s = sweep_gt(bits).unwrap();
            assert!(s.correct, "bits = {bits}");
            assert!(s.max_queries <= gt_query_bound(bits));
            assert!(s.max_plain_bits <= 1);
        }
    }

    #[test]
    fn hd1_examples() {
        assert_eq!(run_hd1_protocol(0b1010, 0b1010, 4).unwrap().queries, 1);
        let r = run_hd1_protocol(0b1010, 0b1000, 4).unwrap();
        assert!(r.output && r.queries <= hd1_query_bound(4));
        // one difference in each half
        let r = run_hd1_protocol(0b0000, 0b1001, 4).unwrap();
        assert_eq!((r.output, r.queries), (false, 3));
    }

    #[test]
    fn hd1_exhaustive() {
        for bits in 1..=10 {
            let s = sweep_hd1(bits).unwrap();
            assert!(s.correct, "bits = {bits}");
            assert!(s.max_queries <= hd1_query_bound(bits));
        }
    }

    proptest! {
        #[test]
        fn hd1_wide(x in 0u64..1 << 16, flips in proptest::collection::vec(0usize..16, 0..3)) {
            let y = flips.iter().fold(x, |acc, &i| acc ^ (1 << i));
            let r = run_hd1_protocol(x, y, 16).unwrap();
            prop_assert_eq!(r.output, (x ^ y).count_ones() <= 1);
            prop_assert!(r.queries <= hd1_query_bound(16));
        }

        #[test]
        fn gt_wide(x in any::<u32>(), y in any::<u32>()) {
            let r = run_gt_protocol(x as u64, y as u64, 32).unwrap();
            prop_assert_eq!(r.output, x > y);
            prop_assert!(r.queries <= gt_query_bound(32));
        }

        #[test]
        fn rankone_wide(rows_a in proptest::collection::vec(0u64..64, 6), delta in proptest::collection::vec(0u64..64, 6)) {
            let a = F2Matrix::from_rows(6, rows_a.clone()).unwrap();
            let b_rows: Vec<u64> = rows_a.iter().zip(&delta).map(|(r, d)| r ^ d).collect();
            let b = F2Matrix::from_rows(6, b_rows).unwrap();
            let r = run_rankone_protocol(&a, &b).unwrap();
            prop_assert_eq!(r.output, rank_f2(&a.xor(&b).unwrap()) <= 1);
            prop_assert!(r.queries <= rankone_query_bound(6));
        }
    }

    #[test]
    fn trees_match_strategies() {
        let t = rankone_tree(2).unwrap();
        assert!(t.depth() <= 3);
        for x in 0..16 {
            for y in 0..16 {
                assert_eq!(eval_tree(&t, x, y).0, packed_rank_le1((x ^ y) as u64, 2));
            }
        }
        let gt = strategy_to_tree(&GreaterThanStrategy { bits: 4 }, 16, |x| x).unwrap();
        assert!(gt.depth() as u32 <= gt_query_bound(4) + 1);
        let hd = strategy_to_tree(&HammingOneStrategy { bits: 4 }, 16, |x| x).unwrap();
        for x in 0..16 {
            for y in 0..16 {
                assert_eq!(eval_tree(&gt, x, y).0, x > y);
                assert_eq!(eval_tree(&hd, x, y).0, (x ^ y).count_ones() <= 1);
            }
        }
        assert!(strategy_to_tree(&HammingOneStrategy { bits: 11 }, 2048, |x| x).is_err());
    }

    /// Every leaf of a pruned tree is reached by some pair.
    #[test]
    fn pruned_trees_have_reachable_leaves() {
        fn walk(t: &EqProtocolTree, path: &mut Vec<(EqQuery, bool)>, n: usize) {
            match t {
                EqProtocolTree::Leaf(_) => {
                    let reached = (0..n)
                        .any(|x| (0..n).any(|y| path.iter().all(|(q, a)| q.answer(x, y) == *a)));
                    assert!(reached);
                }
                EqProtocolTree::Query {
                    query,
                    equal,
                    unequal,
                } => {
                    path.push((query.clone(), true));
                    walk(equal, path, n);
                    path.pop();
                    path.push((query.clone(), false));
                    walk(unequal, path, n);
                    path.pop();
                }
            }
        }
        walk(&rankone_tree(2).unwrap(), &mut Vec::new(), 16);
        let hd = strategy_to_tree(&HammingOneStrategy { bits: 3 }, 8, |x| x).unwrap();
        walk(&hd, &mut Vec::new(), 8);
    }

    #[test]
    fn nd_verification() {
        let target = BoolMatrix::identity(4).unwrap();
        let eq = EqProtocolTree::query(
            EqQuery::identity(4),
            EqProtocolTree::Leaf(true),
            EqProtocolTree::Leaf(false),
        );
        assert!(verify_nd(&NdEqProtocol::deterministic(eq.clone(), 4), &target).ok);
        let bad = NdEqProtocol::new(1, 1, 4, vec![eq, EqProtocolTree::Leaf(true)]).unwrap();
        let check = verify_nd(&bad, &target);
        assert!(!check.ok);
        assert_eq!(check.counterexample, Some((0, 1)));
        assert!(NdEqProtocol::new(1, 1, 4, vec![EqProtocolTree::Leaf(true)]).is_err());
        let shallow = NdEqProtocol {
            m: 0,
            d: 0,
            n: 4,
            trees: vec![EqProtocolTree::query(
                EqQuery::identity(4),
                EqProtocolTree::Leaf(true),
                EqProtocolTree::Leaf(false),
            )],
        };
        assert!(verify_nd(&shallow, &target).structural.is_some());
    }

    #[test]
    fn covers_become_nd_protocols() {
        let i4 = BlockyMatrix::identity(4).unwrap();
        let target = BoolMatrix::identity(4).unwrap();
        let p = cover_to_nd(std::slice::from_ref(&i4), &target).unwrap();
        assert_eq!((p.m, p.d, p.trees.len()), (0, 1, 1));
        assert!(verify_nd(&p, &target).ok);

        // three blocks of J − I₃, padded to four trees
        let target = BoolMatrix::identity(3).unwrap().complement();
        let cover: Vec<BlockyMatrix> = (0..3)
            .map(|s| {
                let mut row = vec![0; 3];
                let mut col = vec![0; 3];
                row[s] = 1;
                for (y, c) in col.iter_mut().enumerate() {
                    *c = (y != s) as u64;
                }
                BlockyMatrix::new(row, col).unwrap()
            })
            .collect();
        let p = cover_to_nd(&cover, &target).unwrap();
        assert_eq!((p.m, p.trees.len()), (2, 4));
        assert!(verify_nd(&p, &target).ok);
        assert!(matches!(
            cover_to_nd(&cover[..2], &target),
            Err(XorError::Contract(_))
        ));
        let empty = cover_to_nd(&[], &BoolMatrix::zeros(3).unwrap()).unwrap();
        assert!(verify_nd(&empty, &BoolMatrix::zeros(3).unwrap()).ok);
    }
}
