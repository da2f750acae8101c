//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xorlab::blocky::{
    complement_cover, exact_bc, exact_fbc, max_min_side_rectangle, maxrect, nd_to_fbc, round_to_bc,
    rounding_samples, tree_to_fbc, BlockyMatrix, Weight,
};
use xorlab::counting::{count_triples_fast, count_triples_naive, TripleCensus};
use xorlab::eqproto::{
    cover_to_nd, rankone_tree, run_rankone_protocol, verify_nd, EqProtocolTree, EqQuery,
    NdEqProtocol,
};
use xorlab::fourier::{
    approx_spectral_norm, approx_spectral_norm_invariant, gamma2_xor, rankone_symmetries,
    spectral_norm, wht_table, Rational,
};
use xorlab::pdt::{min_pdt_one_leaves, monte_carlo_accepts};
use xorlab::problems::rankone_problem;
use xorlab::{BoolMatrix, F2Matrix, Problem};

const SEED: u64 = 7;

// ---------- independent oracles ----------

/// Rank over F₂ of the packed `n × n` matrix (bit `i·n + j`), by elimination
/// on rows held as plain integers.
fn rank_oracle(n: usize, bits: u64) -> usize {
    let mut rows: Vec<u64> = (0..n).map(|i| bits >> (i * n) & ((1 << n) - 1)).collect();
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..n).find(|&r| rows[r] >> col & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        for r in 0..n {
            if r != rank && rows[r] >> col & 1 == 1 {
                rows[r] ^= rows[rank];
            }
        }
        rank += 1;
    }
    rank
}

/// `(N, ‖M‖²_F, tr((MᵀM)²))` for the RankOne matrix, by direct matrix algebra.
fn trace_oracle(n: usize) -> (u64, u64, u128) {
    let big = 1usize << (n * n);
    let words = big.div_ceil(64);
    let cols: Vec<Vec<u64>> = (0..big)
        .map(|b| {
            let mut col = vec![0u64; words];
            for a in 0..big {
                if rank_oracle(n, (a ^ b) as u64) <= 1 {
                    col[a / 64] |= 1 << (a % 64);
                }
            }
            col
        })
        .collect();
    let frob: u64 = cols.iter().flatten().map(|w| w.count_ones() as u64).sum();
    let mut trace = 0u128;
    for a in 0..big {
        for b in 0..big {
            let g: u64 = cols[a]
                .iter()
                .zip(&cols[b])
                .map(|(x, y)| (x & y).count_ones() as u64)
                .sum();
            trace += (g as u128) * (g as u128);
        }
    }
    (big as u64, frob, trace)
}

/// `f̂(s) = 2^{-m} Σ_x f(x)(−1)^{s·x}`, summed directly.
fn naive_fourier(table: &[bool]) -> Vec<Rational> {
    let size = table.len() as i64;
    (0..table.len())
        .map(|s| {
            let sum: i64 = table
                .iter()
                .enumerate()
                .filter(|(_, &v)| v)
                .map(|(x, _)| if (s & x).count_ones() % 2 == 0 { 1 } else { -1 })
                .sum();
            Rational::new(sum, size)
        })
        .collect()
}

fn rankone_table(n: usize) -> Vec<bool> {
    (0..1u64 << (n * n))
        .map(|b| rank_oracle(n, b) <= 1)
        .collect()
}

fn eval_tree_oracle(t: &EqProtocolTree, x: usize, y: usize) -> bool {
    match t {
        EqProtocolTree::Leaf(v) => *v,
        EqProtocolTree::Query {
            query,
            equal,
            unequal,
        } => {
            if query.row[x] == query.col[y] {
                eval_tree_oracle(equal, x, y)
            } else {
                eval_tree_oracle(unequal, x, y)
            }
        }
    }
}

fn random_tree(r: &mut ChaCha8Rng, n: usize, depth: usize) -> EqProtocolTree {
    if depth == 0 || r.gen_bool(0.2) {
        return EqProtocolTree::Leaf(r.gen());
    }
    let row = (0..n).map(|_| r.gen_range(0..3)).collect();
    let col = (0..n).map(|_| r.gen_range(0..3)).collect();
    EqProtocolTree::query(
        EqQuery { row, col },
        random_tree(r, n, depth - 1),
        random_tree(r, n, depth - 1),
    )
}

/// Weighted coverage of every entry, summed term by term.
fn coverage_oracle(terms: &[(Weight, BlockyMatrix)], n: usize) -> Vec<Vec<Weight>> {
    let mut cov = vec![vec![Weight::zero(); n]; n];
    for (w, b) in terms {
        for (x, row) in cov.iter_mut().enumerate() {
            for (y, c) in row.iter_mut().enumerate() {
                let (r, l) = (b.row_labels()[x], b.col_labels()[y]);
                if r != 0 && r == l {
                    *c += *w;
                }
            }
        }
    }
    cov
}

fn union_is(cover: &[BlockyMatrix], target: &BoolMatrix) -> bool {
    let n = target.n();
    (0..n).all(|x| (0..n).all(|y| cover.iter().any(|b| b.get(x, y)) == target.get(x, y)))
}

/// Least number of blocky matrices inside `target` whose union is `target`,
/// by breadth-first search over covered sets (`N ≤ 4`).
fn bc_oracle(target: &BoolMatrix) -> usize {
    let n = target.n();
    let cell = |x: usize, y: usize| 1u64 << (x * n + y);
    let goal: u64 = target
        .ones_positions()
        .iter()
        .map(|&(x, y)| cell(x, y))
        .sum();
    // label every row and column with 0..=n; label 0 means "no block"
    let mut pats = HashSet::new();
    let total = (n + 1).pow(2 * n as u32);
    for code in 0..total {
        let mut c = code;
        let mut labels = vec![0; 2 * n];
        for l in labels.iter_mut() {
            *l = c % (n + 1);
            c /= n + 1;
        }
        let mut p = 0u64;
        for x in 0..n {
            for y in 0..n {
                if labels[x] != 0 && labels[x] == labels[n + y] {
                    p |= cell(x, y);
                }
            }
        }
        if p != 0 && p & !goal == 0 {
            pats.insert(p);
        }
    }
    let mut frontier = HashSet::from([0u64]);
    let mut depth = 0;
    while !frontier.contains(&goal) {
        depth += 1;
        frontier = frontier
            .iter()
            .flat_map(|&s| pats.iter().map(move |&p| s | p))
            .collect();
    }
    depth
}

/// `(β, best min side)` over all 1-chromatic rectangles, enumerating row sets.
fn rect_oracle(m: &BoolMatrix) -> (u64, usize) {
    let n = m.n();
    let mut beta = 0;
    let mut side = 0;
    for rows in 1u64..1 << n {
        let cols = (0..n)
            .filter(|&y| (0..n).all(|x| rows >> x & 1 == 0 || m.get(x, y)))
            .count();
        let r = rows.count_ones() as usize;
        beta = beta.max(r as u64 * cols as u64);
        side = side.max(r.min(cols));
    }
    (beta, side)
}

// ---------- criteria ----------

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn c1_rpdt() -> Outcome {
    let start = Instant::now();
    let trials = 10_000u64;
    let mut one_sided = true;
    let mut below = Vec::new();
    let mut worst = f64::INFINITY;
    for n in 2..=3usize {
        for bits in 0..1u64 << (n * n) {
            let m = F2Matrix::from_packed(n, bits).unwrap();
            let acc = monte_carlo_accepts(&m, 1, trials, SEED, bits).unwrap();
            if rank_oracle(n, bits) <= 1 {
                one_sided &= acc == trials;
            } else {
                let p = 1.0 - acc as f64 / trials as f64;
                let sigma = (p * (1.0 - p) / trials as f64).sqrt();
                worst = worst.min(p);
                if p < 9.0 / 64.0 - 3.0 * sigma {
                    below.push((n, bits, p));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    (
        one_sided && below.is_empty() && elapsed < Duration::from_secs(30),
        format!(
            "one-sided {one_sided}, min rejection {worst:.4}, below bound {below:?}, {elapsed:.2?}"
        ),
    )
}

fn c2_eq_protocol() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for n in 2..=3usize {
        let size = 1u64 << (n * n);
        let mats: Vec<F2Matrix> = (0..size)
            .map(|b| F2Matrix::from_packed(n, b).unwrap())
            .collect();
        let bound = 2 * n as u32 - 1;
        let mut pairs = 0u64;
        let mut max_q = 0;
        for a in 0..size {
            for b in 0..size {
                let run = run_rankone_protocol(&mats[a as usize], &mats[b as usize]).unwrap();
                ok &= run.output == (rank_oracle(n, a ^ b) <= 1) && run.queries <= bound;
                max_q = max_q.max(run.queries);
                pairs += 1;
            }
        }
        detail.push(format!("n={n}: {pairs} pairs, max {max_q} queries"));
    }
    let elapsed = start.elapsed();
    (
        ok && elapsed < Duration::from_secs(60),
        format!("{}, {elapsed:.2?}", detail.join("; ")),
    )
}

fn c3_trace() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in 1..=3 {
        let c = count_triples_fast(n).unwrap();
        let (big, frob, trace) = trace_oracle(n);
        ok &= frob == big * c.c1 && trace == big as u128 * c.c3 as u128;
        detail.push(format!(
            "n={n}: {frob}={big}*{}, {trace}={big}*{}",
            c.c1, c.c3
        ));
    }
    (ok, detail.join("; "))
}

fn c4_bounds() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in 1..=4u32 {
        let c = count_triples_fast(n as usize).unwrap();
        let structured = 6 * 3u128.pow(n) * 2u128.pow(4 * n);
        let general = 9 * 2u128.pow(4 * n);
        ok &= (c.structured_triples as u128) < structured
            && (c.general_triples as u128) < general
            && c.max_general_r3 <= 9;
        detail.push(format!(
            "n={n}: {}<{structured}, {}<{general}, r3<={}",
            c.structured_triples, c.general_triples, c.max_general_r3
        ));
    }
    (ok, detail.join("; "))
}

fn c5_census() -> Outcome {
    let mut ok = true;
    for n in 1..=3 {
        ok &= count_triples_naive(n).unwrap() == count_triples_fast(n).unwrap();
    }
    let start = Instant::now();
    let c5: TripleCensus = count_triples_fast(5).unwrap();
    let elapsed = start.elapsed();
    (
        ok && elapsed < Duration::from_secs(60),
        format!(
            "naive == fast for n<=3: {ok}; n=5 c3={} in {elapsed:.2?}",
            c5.c3
        ),
    )
}

fn c6_holder() -> Outcome {
    let h1 = count_triples_fast(1).unwrap().holder_bound();
    let mut ok = h1 == 1.0;
    // small γ₂ values cross-checked against the direct Fourier sum
    for n in 1..=2 {
        let direct: Rational = naive_fourier(&rankone_table(n))
            .iter()
            .map(|c| c.abs())
            .sum();
        ok &= gamma2_xor(&rankone_problem(n).unwrap()).unwrap() == direct;
    }
    let mut hs = vec![h1];
    let mut gs = vec![gamma2_xor(&rankone_problem(1).unwrap()).unwrap()];
    for n in 2..=4 {
        let h = count_triples_fast(n).unwrap().holder_bound();
        let g = gamma2_xor(&rankone_problem(n).unwrap()).unwrap();
        ok &= h <= g.to_f64().unwrap() + 1e-9;
        hs.push(h);
        gs.push(g);
    }
    ok &= hs.windows(2).all(|w| w[1] > w[0]) && gs.windows(2).all(|w| w[1] > w[0]);
    let gs: Vec<String> = gs.iter().map(|g| g.to_string()).collect();
    (ok, format!("holder {hs:.4?}, gamma2 [{}]", gs.join(", ")))
}

fn c7_spectral() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    let mut ok = true;
    for m in 1..=10usize {
        let table: Vec<bool> = (0..1 << m).map(|_| r.gen()).collect();
        let s = wht_table(&table).unwrap();
        let back = s.inverse();
        ok &= back
            .iter()
            .zip(&table)
            .all(|(v, &b)| *v == Rational::from_integer(b as i64));
        let ones = table.iter().filter(|&&b| b).count() as i64;
        let squares: Rational = (0..1 << m)
            .map(|k| s.coefficient(k) * s.coefficient(k))
            .sum();
        ok &= squares == Rational::new(ones, 1 << m);
        if m <= 8 {
            let direct = naive_fourier(&table);
            ok &= (0..1 << m).all(|k| s.coefficient(k) == direct[k]);
        }
    }
    let table = rankone_table(2);
    let norm: Rational = naive_fourier(&table).iter().map(|c| c.abs()).sum();
    let leaves = min_pdt_one_leaves(&table).unwrap();
    ok &= leaves as i64 >= norm.ceil().to_integer();
    let third = Rational::new(1, 3);
    let full2 = approx_spectral_norm(&table, third).unwrap().value;
    let inv2 = approx_spectral_norm_invariant(&table, third, &rankone_symmetries(2))
        .unwrap()
        .value;
    ok &= (full2 - inv2).abs() <= 1e-7;
    let t3 = rankone_table(3);
    let exact3 = spectral_norm(&wht_table(&t3).unwrap()).to_f64().unwrap();
    let inv3 = approx_spectral_norm_invariant(&t3, third, &rankone_symmetries(3))
        .unwrap()
        .value;
    let exact2 = norm.to_f64().unwrap();
    ok &= full2 <= exact2 + 1e-9 && inv3 <= exact3 + 1e-9;
    let (r2, r3) = (exact2 / full2, exact3 / inv3);
    ok &= r3 > r2;
    (
        ok,
        format!("one-leaves {leaves} >= ceil({norm}); ratio n=2 {r2:.4}, n=3 {r3:.4}"),
    )
}

fn c8_blocky() -> Outcome {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    let mut ok = true;
    // complements of blocky matrices with up to 16 label classes
    for k in 1..=16usize {
        for _ in 0..4 {
            let n = 16;
            let row: Vec<u64> = (0..n).map(|_| r.gen_range(0..=k as u64)).collect();
            let col: Vec<u64> = (0..n).map(|_| r.gen_range(0..=k as u64)).collect();
            let b = BlockyMatrix::new(row, col).unwrap();
            let c = complement_cover(&b).unwrap();
            let cov = coverage_oracle(&c.terms, n);
            ok &= c.weight() == Weight::from_integer(4);
            ok &= (0..n)
                .all(|x| (0..n).all(|y| cov[x][y] == Weight::from_integer((!b.get(x, y)) as i128)));
        }
    }
    let mut worst = Weight::zero();
    let mut rounded = 0;
    for _ in 0..1000 {
        let depth = r.gen_range(1..=3);
        let t = random_tree(&mut r, 16, depth);
        let d = t.depth() as u32;
        let c = tree_to_fbc(&t, 16).unwrap();
        let cov = coverage_oracle(&c.terms, 16);
        ok &= c.weight() <= Weight::from_integer(5i128.pow(d));
        ok &= (0..16).all(|x| {
            (0..16).all(|y| {
                let want = eval_tree_oracle(&t, x, y);
                if want {
                    cov[x][y] >= Weight::from_integer(1)
                } else {
                    cov[x][y].is_zero()
                }
            })
        });
        worst = worst.max(c.weight());
        let target =
            BoolMatrix::from_fn(16, |x, y| eval_tree_oracle(&t, x as usize, y as usize)).unwrap();
        if target.count_ones() > 0 {
            let w = c.weight().to_f64().unwrap();
            let limit = (w * (2.0 * 16f64.ln() + 1.0)).ceil() as u64;
            ok &= rounding_samples(w, 16) == limit;
            match round_to_bc(&c, &target, r.gen()) {
                Ok(res) => {
                    ok &= union_is(&res.cover.matrices, &target)
                        && res.cover.len() as u64 <= limit
                        && res.attempts <= 100;
                    rounded += 1;
                }
                Err(_) => ok = false,
            }
        }
    }
    (
        ok,
        format!("max tree cover weight {worst}, {rounded} covers rounded"),
    )
}

fn c9_tiny() -> Outcome {
    let one = BigRational::from_integer(1.into());
    let four = BigRational::from_integer(4.into());
    let mut ok = true;
    for n in 1..=4u64 {
        for t in [
            BoolMatrix::identity(n).unwrap(),
            BoolMatrix::ones(n).unwrap(),
        ] {
            let bc = exact_bc(&t).unwrap();
            ok &= exact_fbc(&t).unwrap().value == one && bc.len() == 1 && bc_oracle(&t) == 1;
        }
    }
    let jmi = |n: u64| BoolMatrix::identity(n).unwrap().complement();
    ok &= exact_fbc(&jmi(2)).unwrap().value == one;
    let mut detail = Vec::new();
    for n in 3..=4 {
        let t = jmi(n);
        let v = exact_fbc(&t).unwrap().value;
        let bc = bc_oracle(&t);
        ok &= v >= one && v <= four && exact_bc(&t).unwrap().len() == bc;
        detail.push(format!("fbc(J-I{n}) = {v}, bc = {bc}"));
    }
    (ok, detail.join("; "))
}

fn c10_pipeline() -> Outcome {
    let tree = rankone_tree(2).unwrap();
    let target = BoolMatrix::from_fn(16, |x, y| rank_oracle(2, x ^ y) <= 1).unwrap();
    let protocol = NdEqProtocol::deterministic(tree, 16);
    let (m, d) = (protocol.m, protocol.d);
    let mut ok = verify_nd(&protocol, &target).ok;
    let fbc = nd_to_fbc(&protocol).unwrap();
    let bound = Weight::from_integer((1i128 << m) * 5i128.pow(d));
    ok &= fbc.weight() <= bound && fbc.verify(&target);
    let rounding = round_to_bc(&fbc, &target, SEED).unwrap();
    ok &= union_is(&rounding.cover.matrices, &target);
    let back = cover_to_nd(&rounding.cover.matrices, &target).unwrap();
    ok &= verify_nd(&back, &target).ok;
    ok &= (0..16).all(|x| (0..16).all(|y| back.accepts(x, y) == target.get(x, y)));
    let log_size = (rounding.cover.len() as f64).log2();
    let limit = 3.0 * (m + d) as f64 + (2.0 * 16f64.ln() + 1.0).log2() + 1.0;
    ok &= log_size <= limit;
    (
        ok,
        format!(
            "m={m} d={d}, fbc weight {} <= {bound}, cover size {} (log {log_size:.3} <= {limit:.3})",
            fbc.weight(),
            rounding.cover.len()
        ),
    )
}

fn c11_gamma2_deq() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for n in 1..=4usize {
        let g = gamma2_xor(&rankone_problem(n).unwrap())
            .unwrap()
            .to_f64()
            .unwrap();
        let lhs = 0.5 * g.log2();
        ok &= lhs <= (2 * n - 1) as f64;
        detail.push(format!("n={n}: {lhs:.3} <= {}", 2 * n - 1));
    }
    (ok, detail.join("; "))
}

fn c12_maxrect() -> Outcome {
    let mut ok = true;
    for n in [1u64, 2, 3, 8, 16, 64] {
        ok &= maxrect(&BoolMatrix::ones(n).unwrap(), None).unwrap().value == 1.0;
        ok &= maxrect(&BoolMatrix::identity(n).unwrap(), None)
            .unwrap()
            .value
            == 1.0;
    }
    let m = Problem::rankone(2).unwrap().materialize().unwrap();
    let (beta, side) = rect_oracle(&m);
    let found = maxrect(&m, Some(Duration::from_secs(30))).unwrap();
    let best_side = max_min_side_rectangle(&m, Some(Duration::from_secs(30))).unwrap();
    ok &= found.beta == beta && found.witness.is_one_chromatic(&m);
    ok &= best_side.min_side() == side && found.witness.min_side() <= 15 && side <= 15;
    (
        ok,
        format!(
            "rankone(2): beta {beta}, witness min side {}, best min side {side}",
            found.witness.min_side()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("rpdt one-sidedness and rejection rate", c1_rpdt),
        ("eq protocol exhaustive correctness", c2_eq_protocol),
        ("exact counting identities", c3_trace),
        ("counting bounds", c4_bounds),
        ("fast vs naive census", c5_census),
        ("holder vs gamma2", c6_holder),
        ("spectral machinery", c7_spectral),
        ("blocky calculus", c8_blocky),
        ("exact tiny optima", c9_tiny),
        ("nd pipeline on rankone(2)", c10_pipeline),
        ("gamma2 vs deterministic cost", c11_gamma2_deq),
        ("maxrect fixtures", c12_maxrect),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (ok, detail) = run();
        failed += !ok as u32;
        println!(
            "{} {:>2} {name}: {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
