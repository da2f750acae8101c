//! Composite experiments and the self-check suite.

use std::time::Duration;

use num_traits::ToPrimitive;
use rand::Rng;

use crate::blocky::{
    complement_cover, exact_bc, exact_fbc, max_min_side_rectangle, max_mono_rectangle, maxrect,
    nd_to_fbc, round_to_bc, rounding_samples, tree_to_fbc, BlockyMatrix, Weight,
};
use crate::counting::{
    count_triples_fast, count_triples_naive, direct_trace_check, general_bound, structured_bound,
};
use crate::eqproto::{
    ceil_log2, cover_to_nd, eval_tree, rankone_tree, strategy_to_tree, sweep_rankone, verify_nd,
    EqProtocolTree, EqQuery, GreaterThanStrategy, HammingOneStrategy, NdEqProtocol,
};
use crate::error::{Result, XorError};
use crate::fourier::{
    approx_spectral_norm_invariant, gamma2_deq_sanity, gamma2_xor, rankone_symmetries,
    spectral_norm, wht_table, Rational,
};
use crate::pdt::{min_pdt, pdt_size_spectral_check, rpdt_exhaustive};
use crate::problems::{rankone_problem, BoolMatrix, Problem};
use crate::rng;

/// One named pass/fail outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// How the nondeterministic protocol is obtained from a deterministic tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    /// The tree itself (`m = 0`).
    Tree,
    /// One tree per accepting leaf, checking that leaf's path.
    Paths,
}

impl std::str::FromStr for Construction {
    type Err = XorError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(Construction::Tree),
            "paths" => Ok(Construction::Paths),
            _ => Err(XorError::Parse(format!("unknown construction {s:?}"))),
        }
    }
}

/// Deterministic Eq-oracle tree for a problem with a known protocol.
pub fn protocol_tree(p: &Problem) -> Result<EqProtocolTree> {
    match *p {
        Problem::RankOne { n } => rankone_tree(n),
        Problem::Equality { size } => {
            crate::error::guard("equality size", size, crate::problems::MAX_MATERIALIZED)?;
            Ok(EqProtocolTree::query(
                EqQuery::identity(size as usize),
                EqProtocolTree::Leaf(true),
                EqProtocolTree::Leaf(false),
            ))
        }
        Problem::GreaterThan { bits } => {
            crate::error::guard("gt tree bits", bits as u64, 10)?;
            strategy_to_tree(&GreaterThanStrategy { bits }, 1 << bits, |x| x)
        }
        Problem::HammingOne { bits } => {
            crate::error::guard("hd1 tree bits", bits as u64, 10)?;
            strategy_to_tree(&HammingOneStrategy { bits }, 1 << bits, |x| x)
        }
    }
}

/// A tree per accepting leaf of `t`: it asks the queries on that leaf's path,
/// rejecting on any other answer.
pub fn paths_protocol(t: &EqProtocolTree, n: usize) -> Result<NdEqProtocol> {
    fn collect(t: &EqProtocolTree, path: &mut Vec<(EqQuery, bool)>, out: &mut Vec<EqProtocolTree>) {
        match t {
            EqProtocolTree::Leaf(false) => {}
            EqProtocolTree::Leaf(true) => {
                let chain = path
                    .iter()
                    .rev()
                    .fold(EqProtocolTree::Leaf(true), |acc, (q, eq)| {
                        if *eq {
                            EqProtocolTree::query(q.clone(), acc, EqProtocolTree::Leaf(false))
                        } else {
                            EqProtocolTree::query(q.clone(), EqProtocolTree::Leaf(false), acc)
                        }
                    });
                out.push(chain);
            }
            EqProtocolTree::Query {
                query,
                equal,
                unequal,
            } => {
                path.push((query.clone(), true));
                collect(equal, path, out);
                path.pop();
                path.push((query.clone(), false));
                collect(unequal, path, out);
                path.pop();
            }
        }
    }
    let mut trees = Vec::new();
    collect(t, &mut Vec::new(), &mut trees);
    let m = ceil_log2(trees.len());
    trees.resize(1 << m, EqProtocolTree::Leaf(false));
    NdEqProtocol::new(m, t.depth() as u32, n, trees)
}

/// Every stage of protocol → fractional cover → cover → protocol.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub n: usize,
    pub m: u32,
    pub d: u32,
    pub protocol_ok: bool,
    pub fbc_weight: Weight,
    pub fbc_terms: usize,
    pub weight_bound: u128,
    pub fbc_ok: bool,
    pub samples: u64,
    pub attempts: u32,
    pub cover_size: usize,
    pub cover_ok: bool,
    pub back_m: u32,
    pub back_d: u32,
    pub back_ok: bool,
    /// `3(m + d) + log₂(2 ln N + 1) + 1`.
    pub log_size_bound: f64,
}

impl PipelineReport {
    pub fn checks(&self) -> Vec<Check> {
        let log_size = (self.cover_size.max(1) as f64).log2();
        vec![
            Check::new("protocol_verifies", self.protocol_ok, ""),
            Check::new("fbc_verifies", self.fbc_ok, ""),
            Check::new(
                "fbc_weight_within_2m_5d",
                self.fbc_weight <= Weight::from_integer(self.weight_bound as i128),
                format!("{} <= {}", self.fbc_weight, self.weight_bound),
            ),
            Check::new("rounded_cover_verifies", self.cover_ok, ""),
            Check::new(
                "rounded_size_within_samples",
                self.cover_size as u64 <= self.samples,
                format!("{} <= {}", self.cover_size, self.samples),
            ),
            Check::new("cover_protocol_verifies", self.back_ok, ""),
            Check::new(
                "log_cover_size_bound",
                log_size <= self.log_size_bound,
                format!("{log_size:.4} <= {:.4}", self.log_size_bound),
            ),
        ]
    }
}

pub fn nd_pipeline(
    p: &Problem,
    construction: Construction,
    max_depth: Option<u32>,
    seed: u64,
) -> Result<PipelineReport> {
    let target = p.materialize()?;
    let n = target.n();
    let tree = protocol_tree(p)?;
    let protocol = match construction {
        Construction::Tree => NdEqProtocol::deterministic(tree, n),
        Construction::Paths => paths_protocol(&tree, n)?,
    };
    if let Some(limit) = max_depth {
        crate::error::guard("protocol depth", protocol.d as u64, limit as u64)?;
    }
    let protocol_ok = verify_nd(&protocol, &target).ok;
    let fbc = nd_to_fbc(&protocol)?;
    let fbc_ok = fbc.verify(&target);
    let rounding = round_to_bc(&fbc, &target, seed)?;
    let back = cover_to_nd(&rounding.cover.matrices, &target)?;
    let back_ok = verify_nd(&back, &target).ok;
    Ok(PipelineReport {
        n,
        m: protocol.m,
        d: protocol.d,
        protocol_ok,
        fbc_weight: fbc.weight(),
        fbc_terms: fbc.len(),
        weight_bound: (1u128 << protocol.m) * 5u128.pow(protocol.d),
        fbc_ok,
        samples: rounding.samples,
        attempts: rounding.attempts,
        cover_size: rounding.cover.len(),
        cover_ok: rounding.cover.verify(&target),
        back_m: back.m,
        back_d: back.d,
        back_ok,
        log_size_bound: 3.0 * (protocol.m + protocol.d) as f64
            + (2.0 * (n as f64).ln() + 1.0).log2()
            + 1.0,
    })
}

fn random_tree<R: Rng>(r: &mut R, n: usize, depth: usize, labels: u64) -> EqProtocolTree {
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

/// The acceptance checks at a scale set by `max_n` (clamped to 2..=4).
pub fn verify_all(max_n: usize, seed: u64) -> Result<Vec<Check>> {
    let max_n = max_n.clamp(2, 4);
    let small = max_n.min(3);
    let mut out = Vec::new();

    // randomized tester
    let trials = 10_000;
    let mut one_sided = true;
    let mut below = 0;
    for n in 2..=small {
        for class in rpdt_exhaustive(n, 1, trials, seed)? {
            if class.rank <= 1 {
                one_sided &= class.accepts == class.matrices * trials;
            }
            below += class.below_bound;
        }
    }
    out.push(Check::new(
        "rpdt_one_sided",
        one_sided,
        format!("2 <= n <= {small}, {trials} trials"),
    ));
    out.push(Check::new(
        "rpdt_rejection_rate",
        below == 0,
        format!("{below} matrices below 9/64 - 3 sigma"),
    ));

    // Eq protocol
    let mut eq_ok = true;
    let mut detail = String::new();
    for n in 1..=small {
        let s = sweep_rankone(n)?;
        eq_ok &= s.correct && s.max_queries <= crate::eqproto::rankone_query_bound(n);
        detail += &format!(
            "n={n}: {} pairs, max {} queries; ",
            s.pairs_checked, s.max_queries
        );
    }
    out.push(Check::new(
        "eq_protocol_exhaustive",
        eq_ok,
        detail.trim_end_matches("; "),
    ));

    // counting identities and bounds
    let mut trace_ok = true;
    for n in 1..=small {
        trace_ok &= direct_trace_check(n)?.ok();
    }
    out.push(Check::new(
        "trace_identities",
        trace_ok,
        format!("n <= {small}"),
    ));
    let mut bounds_ok = true;
    let mut engines_ok = true;
    for n in 1..=max_n {
        let fast = count_triples_fast(n)?;
        bounds_ok &= (fast.structured_triples as u128) < structured_bound(n)
            && (fast.general_triples as u128) < general_bound(n)
            && fast.max_general_r3 <= 9;
        if n <= small {
            engines_ok &= count_triples_naive(n)? == fast;
        }
    }
    out.push(Check::new(
        "counting_bounds",
        bounds_ok,
        format!("n <= {max_n}"),
    ));
    out.push(Check::new(
        "fast_equals_naive",
        engines_ok,
        format!("n <= {small}"),
    ));

    // Hölder vs γ₂
    let mut holder_ok = count_triples_fast(1)?.holder_bound() == 1.0;
    let mut last = (0.0f64, Rational::from_integer(0));
    for n in 1..=max_n {
        let c = count_triples_fast(n)?;
        let g = gamma2_xor(&rankone_problem(n)?)?;
        let h = c.holder_bound();
        holder_ok &= c.holder_at_most(g) && h > last.0 && g > last.1;
        last = (h, g);
    }
    out.push(Check::new(
        "holder_below_gamma2_and_growing",
        holder_ok,
        format!("n <= {max_n}"),
    ));

    // spectral machinery
    let mut r = rng::stream(seed, 1);
    let mut spectral_ok = true;
    for m in 1..=10usize {
        let table: Vec<bool> = (0..1 << m).map(|_| r.gen()).collect();
        let s = wht_table(&table)?;
        let ones = table.iter().filter(|&&b| b).count() as i64;
        spectral_ok &= s
            .inverse()
            .iter()
            .zip(&table)
            .all(|(v, &b)| *v == Rational::from_integer(b as i64))
            && s.sum_of_squares() == Rational::new(ones, 1 << m);
    }
    let table = rankone_problem(2)?.truth_table()?;
    let best = min_pdt(&table)?;
    let norm2 = spectral_norm(&wht_table(&table)?);
    spectral_ok &= best.one_leaves as i64 >= norm2.ceil().to_integer()
        && pdt_size_spectral_check(&best.tree, &table)?;
    let third = Rational::new(1, 3);
    let mut ratios = Vec::new();
    for n in 2..=small {
        let t = rankone_problem(n)?.truth_table()?;
        let exact = spectral_norm(&wht_table(&t)?).to_f64().unwrap_or(f64::NAN);
        let approx = approx_spectral_norm_invariant(&t, third, &rankone_symmetries(n))?.value;
        spectral_ok &= approx <= exact + 1e-9;
        ratios.push(exact / approx);
    }
    spectral_ok &= ratios.windows(2).all(|w| w[1] > w[0]);
    out.push(Check::new(
        "spectral",
        spectral_ok,
        format!("ratios {ratios:.4?}"),
    ));

    // blocky calculus
    let mut blocky_ok = true;
    for k in 1..=16usize.min(4 * max_n) {
        let b = BlockyMatrix::identity(k)?;
        let c = complement_cover(&b)?;
        blocky_ok &=
            c.weight() == Weight::from_integer(4) && c.verify(&b.materialize()?.complement());
    }
    let mut r = rng::stream(seed, 2);
    let mut worst: Weight = Weight::from_integer(0);
    for _ in 0..1000 {
        let depth = r.gen_range(1..=3);
        let t = random_tree(&mut r, 16, depth, 3);
        let c = tree_to_fbc(&t, 16)?;
        let target = t.to_matrix(16)?;
        blocky_ok &=
            c.weight() <= Weight::from_integer(5i128.pow(t.depth() as u32)) && c.verify(&target);
        worst = worst.max(c.weight());
        if target.count_ones() > 0 {
            let rounded = round_to_bc(&c, &target, r.gen())?;
            blocky_ok &= rounded.cover.verify(&target)
                && rounded.cover.len() as u64
                    <= rounding_samples(c.weight().to_f64().unwrap_or(f64::NAN), 16);
        }
    }
    out.push(Check::new(
        "blocky_calculus",
        blocky_ok,
        format!("max tree cover weight {worst}"),
    ));

    // tiny optima
    let one = num_rational::BigRational::from_integer(1.into());
    let four = num_rational::BigRational::from_integer(4.into());
    let mut tiny_ok = true;
    for n in 1..=4u64 {
        for t in [BoolMatrix::identity(n)?, BoolMatrix::ones(n)?] {
            tiny_ok &= exact_fbc(&t)?.value == one && exact_bc(&t)?.len() == 1;
        }
    }
    let jmi = |n: u64| BoolMatrix::identity(n).map(|m| m.complement());
    tiny_ok &= exact_fbc(&jmi(2)?)?.value == one;
    for n in 3..=4 {
        let v = exact_fbc(&jmi(n)?)?.value;
        tiny_ok &= v >= one && v <= four;
    }
    out.push(Check::new("tiny_optima", tiny_ok, ""));

    // pipeline
    let report = nd_pipeline(&Problem::rankone(2)?, Construction::Tree, None, seed)?;
    let all = report.checks().iter().all(|c| c.passed);
    out.push(Check::new(
        "nd_pipeline_rankone2",
        all,
        format!(
            "cover size {}, weight {}",
            report.cover_size, report.fbc_weight
        ),
    ));

    // γ₂ versus the protocol cost
    let mut deq_ok = true;
    for n in 1..=max_n {
        deq_ok &= gamma2_deq_sanity(&rankone_problem(n)?, 2 * n as u32 - 1)?;
    }
    out.push(Check::new("gamma2_deq", deq_ok, format!("n <= {max_n}")));

    // rectangles
    let mut rect_ok = true;
    for n in [1u64, 4, 16] {
        rect_ok &= maxrect(&BoolMatrix::ones(n)?, None)?.value == 1.0
            && maxrect(&BoolMatrix::identity(n)?, None)?.value == 1.0;
    }
    let m = Problem::rankone(2)?.materialize()?;
    let budget = Some(Duration::from_secs(10));
    let area = max_mono_rectangle(&m, budget)?;
    let side = max_min_side_rectangle(&m, budget)?;
    rect_ok &= area.is_one_chromatic(&m) && area.min_side() <= 15 && side.min_side() <= 15;
    out.push(Check::new(
        "maxrect",
        rect_ok,
        format!(
            "rankone(2): beta {}, best min side {}",
            area.area(),
            side.min_side()
        ),
    ));

    // tree evaluation sanity on the rankone(2) protocol
    let t = rankone_tree(2)?;
    let tree_ok = (0..16).all(|x| (0..16).all(|y| eval_tree(&t, x, y).0 == m.get(x, y)));
    out.push(Check::new(
        "rankone_tree_matches_matrix",
        tree_ok,
        format!("depth {}", t.depth()),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_protocol_is_valid() {
        let target = Problem::rankone(2).unwrap().materialize().unwrap();
        let p = paths_protocol(&rankone_tree(2).unwrap(), 16).unwrap();
        assert!(verify_nd(&p, &target).ok);
        let r = nd_pipeline(&Problem::rankone(2).unwrap(), Construction::Paths, None, 4).unwrap();
        assert!(r.checks().iter().all(|c| c.passed), "{r:?}");
        assert!(matches!(
            nd_pipeline(
                &Problem::rankone(2).unwrap(),
                Construction::Tree,
                Some(2),
                0
            ),
            Err(XorError::SizeLimit { .. })
        ));
    }

    #[test]
    fn suite_passes_at_small_scale() {
        let checks = verify_all(2, 7).unwrap();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
        assert!(checks.len() >= 12);
    }
}
