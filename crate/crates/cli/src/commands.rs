//! One function per command: run the library operation, record every
//! computed quantity and the checks it exercised.

use std::fs;
use std::path::Path;
use std::time::Duration;

use clap::Args;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use xorlab::blocky::{self, FractionalCover};
use xorlab::checks::{self, Construction};
use xorlab::counting;
use xorlab::eqproto::{self, Sweep};
use xorlab::fourier::{self, Rational};
use xorlab::pdt::{self, RankClassStats};
use xorlab::{rng, BoolMatrix, F2Matrix, Problem, XorError};

use crate::report::Report;
use crate::CliError;

type Out = Result<Report, CliError>;

/// A problem id (`rankone:n`, `eq:N`, `gt:n`, `hd1:n`), a named matrix
/// (`identity:N`, `ones:N`, `jmi:N` for J − I), or a matrix file.
pub enum Target {
    Problem(Problem),
    Matrix(BoolMatrix),
}

impl Target {
    pub fn parse(id: &str) -> Result<Target, CliError> {
        if let Some((kind, arg)) = id.split_once(':') {
            let named = match kind {
                "identity" | "ones" | "jmi" => {
                    let n: u64 = arg
                        .parse()
                        .map_err(|_| CliError::Usage(format!("bad size in {id:?}")))?;
                    Some(match kind {
                        "identity" => BoolMatrix::identity(n)?,
                        "ones" => BoolMatrix::ones(n)?,
                        _ => BoolMatrix::identity(n)?.complement(),
                    })
                }
                _ => None,
            };
            if let Some(m) = named {
                return Ok(Target::Matrix(m));
            }
            if !Path::new(id).exists() {
                return Ok(Target::Problem(id.parse()?));
            }
        }
        let text = fs::read_to_string(id)
            .map_err(|e| CliError::Usage(format!("cannot read target {id}: {e}")))?;
        Ok(Target::Matrix(text.parse()?))
    }

    pub fn materialize(&self) -> Result<BoolMatrix, CliError> {
        match self {
            Target::Problem(p) => Ok(p.materialize()?),
            Target::Matrix(m) => Ok(m.clone()),
        }
    }
}

fn problem(id: &str) -> Result<Problem, CliError> {
    Ok(id.parse()?)
}

// ---------- rpdt-sim ----------

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct RpdtSim {
    /// Matrix dimension; all matrices for n ≤ 3, a random sample for n ≤ 8.
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Independent repetitions per run (rejects if any rejects).
    #[arg(long, default_value_t = pdt::AMPLIFY_REPS)]
    pub reps: u32,
    /// Runs per matrix.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Sampled matrices when n > 3.
    #[arg(long, default_value_t = 64)]
    pub matrices: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn class_json(c: &RankClassStats) -> Value {
    json!({
        "matrix_class": format!("rank:{}", c.rank),
        "matrices": c.matrices,
        "trials": c.trials_per_matrix,
        "accept_rate": c.accept_rate(),
        "stderr": c.stderr(),
        "min_reject_rate": c.min_reject_rate,
        "below_bound": c.below_bound,
    })
}

pub fn rpdt_sim(a: &RpdtSim, config: Value) -> Out {
    let mut r = Report::new("rpdt-sim", config);
    let (mode, classes) = if a.n <= 3 {
        (
            "exhaustive",
            pdt::rpdt_exhaustive(a.n, a.reps, a.trials, a.seed)?,
        )
    } else {
        (
            "sampled",
            pdt::rpdt_sampled(a.n, a.matrices, a.reps, a.trials, a.seed)?,
        )
    };
    let tree = pdt::RpdtTrial::sample(a.n, &mut rng::stream(a.seed, u64::MAX - 1)).to_pdt()?;
    r.set("mode", mode);
    r.set("queries_per_trial", 4);
    r.set("queries_per_run", 4 * a.reps);
    r.set("trial_tree_depth", tree.depth()?);
    r.set("trial_tree_leaves", tree.leaves()?);
    r.set("rejection_bound", pdt::rejection_bound(a.reps));
    r.set(
        "classes",
        classes.iter().map(class_json).collect::<Vec<_>>(),
    );
    r.check(
        "one_sided",
        classes
            .iter()
            .filter(|c| c.rank <= 1)
            .all(|c| c.accepts == c.matrices * c.trials_per_matrix),
    );
    r.check("rejection_rate", classes.iter().all(|c| c.below_bound == 0));
    Ok(r)
}

// ---------- eq-protocol ----------

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct EqProtocolArgs {
    /// Problem id: rankone:n, gt:n, hd1:n or eq:N.
    #[arg(long)]
    pub problem: String,
    /// Check every input pair instead of a sample.
    #[arg(long)]
    pub exhaustive: bool,
    /// Sampled pairs when not exhaustive.
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn sample_sweep(p: &Problem, samples: u64, seed: u64) -> Result<Sweep, CliError> {
    let mut r = rng::stream(seed, 0);
    let mut sweep = Sweep {
        pairs_checked: 0,
        max_queries: 0,
        max_plain_bits: 0,
        correct: true,
    };
    let eq_tree = match p {
        Problem::Equality { .. } => Some(checks::protocol_tree(p)?),
        _ => None,
    };
    for i in 0..samples {
        // every other pair is drawn close to the diagonal so both outputs occur
        let near = i % 2 == 1;
        let (run, truth) = match *p {
            Problem::RankOne { n } => {
                let mask = (1u64 << n) - 1;
                let a_rows: Vec<u64> = (0..n).map(|_| r.gen::<u64>() & mask).collect();
                let a = F2Matrix::from_rows(n, a_rows)?;
                let b = if near {
                    a.xor(&F2Matrix::outer(
                        n,
                        n,
                        r.gen::<u64>() & mask,
                        r.gen::<u64>() & mask,
                    )?)?
                } else {
                    F2Matrix::from_rows(n, (0..n).map(|_| r.gen::<u64>() & mask).collect())?
                };
                let truth = xorlab::f2::rank_f2(&a.xor(&b)?) <= 1;
                (eqproto::run_rankone_protocol(&a, &b)?, truth)
            }
            Problem::GreaterThan { bits } | Problem::HammingOne { bits } => {
                let mask = if bits == 64 {
                    u64::MAX
                } else {
                    (1u64 << bits) - 1
                };
                let x = r.gen::<u64>() & mask;
                let y = if near {
                    let flip = r.gen_range(0..=bits);
                    if flip == bits {
                        x
                    } else {
                        x ^ (1 << flip)
                    }
                } else {
                    r.gen::<u64>() & mask
                };
                let run = if matches!(p, Problem::GreaterThan { .. }) {
                    eqproto::run_gt_protocol(x, y, bits)?
                } else {
                    eqproto::run_hd1_protocol(x, y, bits)?
                };
                (run, p.eval(x, y))
            }
            Problem::Equality { size } => {
                let x = r.gen_range(0..size);
                let y = if near { x } else { r.gen_range(0..size) };
                let tree = eq_tree.as_ref().expect("built above");
                let (output, queries) = eqproto::eval_tree(tree, x as usize, y as usize);
                let run = eqproto::Run {
                    output,
                    queries,
                    plain_bits: 0,
                };
                (run, p.eval(x, y))
            }
        };
        sweep.pairs_checked += 1;
        sweep.max_queries = sweep.max_queries.max(run.queries);
        sweep.max_plain_bits = sweep.max_plain_bits.max(run.plain_bits);
        sweep.correct &= run.output == truth;
    }
    Ok(sweep)
}

fn query_bound(p: &Problem) -> u32 {
    match *p {
        Problem::RankOne { n } => eqproto::rankone_query_bound(n),
        Problem::GreaterThan { bits } => eqproto::gt_query_bound(bits),
        Problem::HammingOne { bits } => eqproto::hd1_query_bound(bits),
        Problem::Equality { .. } => 1,
    }
}

pub fn eq_protocol(a: &EqProtocolArgs, config: Value) -> Out {
    let mut r = Report::new("eq-protocol", config);
    let p = problem(&a.problem)?;
    let sweep = if a.exhaustive {
        match p {
            Problem::RankOne { n } => eqproto::sweep_rankone(n)?,
            Problem::GreaterThan { bits } => eqproto::sweep_gt(bits)?,
            Problem::HammingOne { bits } => eqproto::sweep_hd1(bits)?,
            Problem::Equality { .. } => {
                let m = p.materialize()?;
                let t = checks::protocol_tree(&p)?;
                let n = m.n();
                let mut s = Sweep {
                    pairs_checked: 0,
                    max_queries: 0,
                    max_plain_bits: 0,
                    correct: true,
                };
                for x in 0..n {
                    for y in 0..n {
                        let (out, q) = eqproto::eval_tree(&t, x, y);
                        s.pairs_checked += 1;
                        s.max_queries = s.max_queries.max(q);
                        s.correct &= out == m.get(x, y);
                    }
                }
                s
            }
        }
    } else {
        sample_sweep(&p, a.samples, a.seed)?
    };
    let bound = query_bound(&p);
    r.set(
        "mode",
        if a.exhaustive {
            "exhaustive"
        } else {
            "sampled"
        },
    );
    r.set("pairs_checked", sweep.pairs_checked);
    r.set("max_queries", sweep.max_queries);
    r.set("max_plain_bits", sweep.max_plain_bits);
    r.set("query_bound", bound);
    r.set("correct", sweep.correct);
    r.check("correct", sweep.correct);
    r.check("queries_within_bound", sweep.max_queries <= bound);
    Ok(r)
}

// ---------- spectral ----------

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct Spectral {
    /// XOR problem id: rankone:n (n ≤ 4), hd1:n or eq:N with N a power of two.
    #[arg(long)]
    pub problem: String,
    /// Also compute the ε-approximate norm, ε given as a fraction like 1/3.
    #[arg(long)]
    pub approx: Option<String>,
}

pub fn spectral(a: &Spectral, config: Value) -> Out {
    let mut r = Report::new("spectral", config);
    let p = problem(&a.problem)?;
    let xp = p
        .as_xor()
        .ok_or_else(|| CliError::Usage(format!("{} is not an XOR problem", a.problem)))?;
    let table = xp.truth_table()?;
    let spectrum = fourier::wht_table(&table)?;
    let exact = fourier::spectral_norm(&spectrum);
    let exact_f = *exact.numer() as f64 / *exact.denom() as f64;
    let ones = table.iter().filter(|&&b| b).count() as i64;
    r.set("m", xp.m());
    r.set("exact_norm_num", *exact.numer());
    r.set("exact_norm_den", *exact.denom());
    r.set("exact_norm", exact_f);
    r.set("half_log2_gamma2", 0.5 * exact_f.log2());
    r.check(
        "parseval",
        spectrum.sum_of_squares() == Rational::new(ones, table.len() as i64),
    );
    if let Problem::RankOne { n } = p {
        r.check(
            "gamma2_within_deterministic_cost",
            fourier::gamma2_deq_sanity(&xp, eqproto::rankone_query_bound(n))?,
        );
    }
    if let Some(eps) = &a.approx {
        let eps: Rational = eps
            .parse()
            .map_err(|_| CliError::Usage(format!("bad fraction {eps:?}")))?;
        let (method, approx) = match p {
            Problem::RankOne { n } => (
                "invariant",
                fourier::approx_spectral_norm_invariant(
                    &table,
                    eps,
                    &fourier::rankone_symmetries(n),
                )?,
            ),
            _ => ("full", fourier::approx_spectral_norm(&table, eps)?),
        };
        r.set("approx_method", method);
        r.set("approx_norm", approx.value);
        r.set("approx_duality_gap", approx.duality_gap);
        r.set("approx_max_violation", approx.max_violation);
        r.set("ratio", exact_f / approx.value);
        r.check("approx_below_exact", approx.value <= exact_f + 1e-9);
    }
    Ok(r)
}

// ---------- holder / triples ----------

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct Holder {
    #[arg(long = "max-n", default_value_t = 5)]
    pub max_n: usize,
}

/// CSV header and rows.
pub type Table = (Vec<&'static str>, Vec<Vec<String>>);

pub fn holder(a: &Holder, config: Value) -> Result<(Report, Table), CliError> {
    let mut r = Report::new("holder", config);
    if a.max_n == 0 {
        return Err(CliError::Usage("max-n must be at least 1".into()));
    }
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut below_gamma2 = true;
    for n in 1..=a.max_n {
        let c = counting::count_triples_fast(n)?;
        let b = c.holder_bound();
        if n <= 4 {
            below_gamma2 &=
                c.holder_at_most(fourier::gamma2_xor(&xorlab::problems::rankone_problem(n)?)?);
        }
        rows.push(vec![
            n.to_string(),
            c.c1.to_string(),
            c.c3.to_string(),
            format!("{b:.12}"),
        ]);
        bounds.push(b);
    }
    r.set("bounds", &bounds);
    r.check("bound_at_1_is_1", bounds[0] == 1.0);
    r.check("bound_increasing", bounds.windows(2).all(|w| w[1] > w[0]));
    r.check("bound_below_gamma2", below_gamma2);
    r.set(
        "rows",
        rows.iter()
            .map(|row| json!({"n": row[0], "c1": row[1], "c3": row[2], "bound": row[3]}))
            .collect::<Vec<_>>(),
    );
    Ok((r, (vec!["n", "c1", "c3", "bound"], rows)))
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct Triples {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Use the direct enumeration instead of the class-based count.
    #[arg(long)]
    pub naive: bool,
}

pub fn triples(a: &Triples, config: Value) -> Out {
    let mut r = Report::new("triples", config);
    let c = if a.naive {
        counting::count_triples_naive(a.n)?
    } else {
        counting::count_triples_fast(a.n)?
    };
    let structured = counting::structured_bound(a.n);
    let general = counting::general_bound(a.n);
    r.set("engine", if a.naive { "naive" } else { "fast" });
    r.set("c1", c.c1);
    r.set("c3", c.c3);
    r.set("c1_nonzero", c.c1_nonzero);
    r.set("c3_nonzero", c.c3_nonzero);
    r.set("structured_pairs", c.structured_pairs);
    r.set("general_pairs", c.general_pairs);
    r.set("structured_triples", c.structured_triples);
    r.set("general_triples", c.general_triples);
    r.set("max_general_r3", c.max_general_r3);
    r.set("structured_bound", structured.to_string());
    r.set("general_bound", general.to_string());
    r.set("holder_bound", c.holder_bound());
    r.check(
        "c1_matches_enumeration",
        c.c1 == xorlab::f2::rank_le1_count(a.n),
    );
    r.check(
        "structured_below_bound",
        (c.structured_triples as u128) < structured,
    );
    r.check("general_below_bound", (c.general_triples as u128) < general);
    r.check("general_r3_at_most_9", c.max_general_r3 <= 9);
    Ok(r)
}

// ---------- fbc / round ----------

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct Fbc {
    /// Problem id, identity:N, ones:N, jmi:N or a matrix file.
    #[arg(long)]
    pub target: String,
}

pub fn fbc(a: &Fbc, config: Value) -> Out {
    let mut r = Report::new("fbc", config);
    let target = Target::parse(&a.target)?.materialize()?;
    r.set("n", target.n());
    r.set("ones", target.count_ones());
    if target.n() <= blocky::MAX_EXACT_N {
        let f = blocky::exact_fbc(&target)?;
        let bc = blocky::exact_bc(&target)?;
        let cover = f.to_cover(target.n())?;
        r.set("method", "exact");
        r.set("fbc", f.value.to_string());
        r.set("fbc_terms", f.cover.len());
        r.set("bc", bc.len());
        r.check(
            "fractional_cover_verifies",
            target.count_ones() == 0 || cover.verify(&target),
        );
        r.check("cover_verifies", bc.verify(&target));
    } else if let Some(b) = blocky::is_blocky(&target) {
        r.set("method", "blocky");
        r.set("fbc", if target.count_ones() == 0 { "0" } else { "1" });
        r.set("bc", (target.count_ones() > 0) as u8);
        r.check("cover_verifies", FractionalCover::single(b).verify(&target));
    } else if let Some(b) = blocky::is_blocky(&target.complement()) {
        let c = blocky::complement_cover(&b)?;
        r.set("method", "complement-blocky");
        r.set("fbc_upper", c.weight().to_string());
        r.set("fbc_terms", c.len());
        r.check("cover_verifies", c.verify(&target));
    } else {
        return Err(XorError::SizeLimit {
            what: "exact fbc N",
            value: target.n() as u64,
            max: blocky::MAX_EXACT_N as u64,
        }
        .into());
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Exact LP for N ≤ 4, else complement cover, else the protocol tree.
    Auto,
    Exact,
    Complement,
    Tree,
}

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct Round {
    #[arg(long)]
    pub target: String,
    /// Where the fractional cover comes from.
    #[arg(long, value_enum, default_value_t = Source::Auto)]
    pub source: Source,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn fractional_source(
    t: &Target,
    target: &BoolMatrix,
    source: Source,
) -> Result<(&'static str, FractionalCover), CliError> {
    let exact = || -> Result<FractionalCover, CliError> {
        Ok(blocky::exact_fbc(target)?.to_cover(target.n())?)
    };
    let complement = || -> Result<Option<FractionalCover>, CliError> {
        match blocky::is_blocky(&target.complement()) {
            Some(b) => Ok(Some(blocky::complement_cover(&b)?)),
            None => Ok(None),
        }
    };
    let tree = || -> Result<Option<FractionalCover>, CliError> {
        match t {
            Target::Problem(p) => Ok(Some(blocky::tree_to_fbc(
                &checks::protocol_tree(p)?,
                target.n(),
            )?)),
            Target::Matrix(_) => Ok(None),
        }
    };
    let missing = |what: &str| CliError::Usage(format!("no {what} cover for this target"));
    match source {
        Source::Exact => Ok(("exact", exact()?)),
        Source::Complement => Ok((
            "complement",
            complement()?.ok_or_else(|| missing("complement"))?,
        )),
        Source::Tree => Ok(("tree", tree()?.ok_or_else(|| missing("protocol tree"))?)),
        Source::Auto => {
            if target.n() <= blocky::MAX_EXACT_N {
                return Ok(("exact", exact()?));
            }
            if let Some(c) = complement()? {
                return Ok(("complement", c));
            }
            match tree()? {
                Some(c) => Ok(("tree", c)),
                None => Err(XorError::SizeLimit {
                    what: "exact fbc N",
                    value: target.n() as u64,
                    max: blocky::MAX_EXACT_N as u64,
                }
                .into()),
            }
        }
    }
}

pub fn round(a: &Round, config: Value) -> Out {
    let mut r = Report::new("round", config);
    let t = Target::parse(&a.target)?;
    let target = t.materialize()?;
    let (source, c) = fractional_source(&t, &target, a.source)?;
    r.set("n", target.n());
    r.set("source", source);
    r.set("fractional_weight", c.weight().to_string());
    r.set("fractional_terms", c.len());
    r.check("fractional_cover_verifies", c.verify(&target));
    if target.count_ones() == 0 {
        r.set("cover_size", 0);
        return Ok(r);
    }
    let rounding = blocky::round_to_bc(&c, &target, a.seed)?;
    r.set("samples", rounding.samples);
    r.set("attempts", rounding.attempts);
    r.set("cover_size", rounding.cover.len());
    r.check("cover_verifies", rounding.cover.verify(&target));
    r.check(
        "size_within_samples",
        rounding.cover.len() as u64 <= rounding.samples,
    );
    Ok(r)
}

// ---------- nd-pipeline ----------

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct NdPipelineArgs {
    #[arg(long, default_value = "rankone:2")]
    pub problem: String,
    /// tree (the deterministic protocol) or paths (one tree per accepting leaf).
    #[arg(long, default_value = "tree")]
    pub construction: String,
    /// Refuse protocols deeper than this.
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn nd_pipeline(a: &NdPipelineArgs, config: Value) -> Out {
    let mut r = Report::new("nd-pipeline", config);
    let p = problem(&a.problem)?;
    let construction: Construction = a.construction.parse()?;
    let rep = checks::nd_pipeline(&p, construction, a.depth, a.seed)?;
    r.set("n", rep.n);
    r.set("m", rep.m);
    r.set("d", rep.d);
    r.set("fbc_weight", rep.fbc_weight.to_string());
    r.set("fbc_terms", rep.fbc_terms);
    r.set("fbc_weight_bound", rep.weight_bound.to_string());
    r.set("samples", rep.samples);
    r.set("attempts", rep.attempts);
    r.set("cover_size", rep.cover_size);
    r.set("cover_protocol_m", rep.back_m);
    r.set("cover_protocol_d", rep.back_d);
    r.set("log2_cover_size_bound", rep.log_size_bound);
    for c in rep.checks() {
        r.check(&c.name, c.passed);
    }
    Ok(r)
}

// ---------- maxrect ----------

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct Maxrect {
    #[arg(long)]
    pub target: String,
    /// Time budget for the exact rectangle search.
    #[arg(long = "budget-ms", default_value_t = 10_000)]
    pub budget_ms: u64,
}

pub fn maxrect(a: &Maxrect, config: Value) -> Out {
    let mut r = Report::new("maxrect", config);
    let target = Target::parse(&a.target)?.materialize()?;
    let m = blocky::maxrect(&target, Some(Duration::from_millis(a.budget_ms)))?;
    r.set("n", target.n());
    r.set("alpha", m.alpha);
    r.set("beta", m.beta);
    r.set("maxrect", m.value);
    r.set("witness_rows", &m.witness.rows);
    r.set("witness_cols", &m.witness.cols);
    r.set("witness_min_side", m.witness.min_side());
    r.check("witness_one_chromatic", m.witness.is_one_chromatic(&target));
    r.check("witness_area_is_beta", m.witness.area() == m.beta);
    Ok(r)
}

// ---------- verify-all ----------

#[derive(Debug, Args, Serialize)]
#[command(args_override_self = true)]
pub struct VerifyAll {
    #[arg(long = "max-n", default_value_t = 3)]
    pub max_n: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

pub fn verify_all(a: &VerifyAll, config: Value) -> Out {
    let mut r = Report::new("verify-all", config);
    let results = checks::verify_all(a.max_n, a.seed)?;
    r.set(
        "details",
        results
            .iter()
            .map(|c| (c.name.clone(), Value::String(c.detail.clone())))
            .collect::<serde_json::Map<_, _>>(),
    );
    for c in &results {
        r.check(&c.name, c.passed);
    }
    Ok(r)
}
