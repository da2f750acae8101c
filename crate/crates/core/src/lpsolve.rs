//! Dense two-phase simplex.
//!
//! Generic over the scalar type: `f64` for speed, [`BigRational`] for exact
//! answers on small instances. The entering column is chosen by the most
//! negative reduced cost (ties to the smallest index); after a run of
//! degenerate pivots the solver switches to Bland's smallest-index rule, which
//! cannot cycle. The leaving row is always chosen by minimum ratio with ties
//! broken by the smallest basic variable index. Every choice is deterministic.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

use crate::error::{guard, Result, XorError};
use crate::par;

/// Largest number of variables or constraints accepted.
pub const MAX_DIM: usize = 4000;
/// Largest number of variables accepted in exact rational mode.
pub const MAX_EXACT_VARS: usize = 200;

const DEGENERATE_SWITCH: usize = 2000;

pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync {
    /// Values with absolute value at most this are treated as zero.
    fn tolerance() -> Self;
    /// Largest phase-one objective still accepted as feasible.
    fn feasibility_tolerance() -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }
    fn feasibility_tolerance() -> Self {
        1e-7
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        BigRational::zero()
    }
    fn feasibility_tolerance() -> Self {
        BigRational::zero()
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `minimize objective · x` subject to the constraints and variable bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub bounds: Vec<VarBound>,
}

impl<T: Scalar> LinearProgram<T> {
    /// A program over `n_vars` nonnegative variables with the given objective.
    pub fn minimize(objective: Vec<T>) -> Self {
        let bounds = vec![VarBound::NonNegative; objective.len()];
        LinearProgram {
            objective,
            constraints: Vec::new(),
            bounds,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.bounds[var] = VarBound::Free;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub status: Status,
    pub x: Vec<T>,
    pub objective: T,
    /// One multiplier per constraint (valid when optimal).
    pub duals: Vec<T>,
    pub dual_objective: T,
    /// Largest constraint violation of `x`, evaluated in `f64`.
    pub max_violation: f64,
    pub pivots: usize,
}

impl<T: Scalar> Solution<T> {
    pub fn duality_gap(&self) -> f64 {
        (self.objective.to_f64() - self.dual_objective.to_f64()).abs()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        self.rhs[r] = self.rhs[r].clone() / p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        let mut pairs: Vec<(&mut Vec<T>, &mut T)> =
            self.rows.iter_mut().zip(self.rhs.iter_mut()).collect();
        par::for_each_mut(&mut pairs, |i, (row, rhs)| {
            if i == r {
                return;
            }
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
            **rhs = rhs.clone() - f * pivot_rhs.clone();
        });
        self.basis[r] = c;
        self.pivots += 1;
    }

    fn reduced_costs(&self, costs: &[T]) -> (Vec<T>, T) {
        let mut d = costs.to_vec();
        let mut value = T::zero();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &costs[b];
            if cb.is_zero() {
                continue;
            }
            for (dj, a) in d.iter_mut().zip(&self.rows[i]) {
                *dj = dj.clone() - cb.clone() * a.clone();
            }
            value = value + cb.clone() * self.rhs[i].clone();
        }
        (d, value)
    }

    /// Runs simplex iterations for `costs`; returns false if unbounded.
    fn optimize(&mut self, costs: &[T], allow: impl Fn(usize) -> bool) -> Result<bool> {
        let tol = T::tolerance();
        let (mut d, _) = self.reduced_costs(costs);
        let mut degenerate_run = 0usize;
        let limit = 50 * (self.rows.len() + self.kinds.len()) + 1000;
        let switch = DEGENERATE_SWITCH.min(limit / 4);
        loop {
            if self.pivots > limit {
                return Err(XorError::Lp(
                    "pivot limit exceeded (numerical failure)".into(),
                ));
            }
            let bland = degenerate_run >= switch;
            let mut enter: Option<usize> = None;
            for (j, dj) in d.iter().enumerate() {
                if !allow(j) || *dj >= -tol.clone() {
                    continue;
                }
                match enter {
                    None => {
                        enter = Some(j);
                        if bland {
                            break;
                        }
                    }
                    Some(e) if *dj < d[e] => enter = Some(j),
                    _ => {}
                }
            }
            let Some(c) = enter else {
                return Ok(true);
            };
            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = &row[c];
                if *a <= tol {
                    continue;
                }
                let ratio = self.rhs[i].clone() / a.clone();
                let better = match &leave {
                    None => true,
                    Some((l, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*l])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(false);
            };
            if ratio.abs() <= tol {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            // update the reduced-cost row alongside the tableau
            let dc = d[c].clone();
            self.pivot(r, c);
            for (dj, a) in d.iter_mut().zip(&self.rows[r]) {
                if !a.is_zero() {
                    *dj = dj.clone() - dc.clone() * a.clone();
                }
            }
            // clean exact zeros in the float path
            for v in self.rhs.iter_mut() {
                if v.abs() <= tol && *v < T::zero() {
                    *v = T::zero();
                }
            }
        }
    }
}

pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<Solution<T>> {
    let n = lp.n_vars();
    guard("LP variables", n as u64, MAX_DIM as u64)?;
    guard(
        "LP constraints",
        lp.constraints.len() as u64,
        MAX_DIM as u64,
    )?;
    if lp.bounds.len() != n {
        return Err(XorError::Lp(
            "bounds length differs from objective length".into(),
        ));
    }
    for (k, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(XorError::Lp(format!(
                "constraint {k} has {} coefficients, expected {n}",
                c.coeffs.len()
            )));
        }
    }
    let tol = T::tolerance();

    // expanded structural columns: free variables become x+ - x-
    let mut col_of: Vec<(usize, Option<usize>)> = Vec::with_capacity(n);
    let mut n_struct = 0;
    for b in &lp.bounds {
        match b {
            VarBound::NonNegative => {
                col_of.push((n_struct, None));
                n_struct += 1;
            }
            VarBound::Free => {
                col_of.push((n_struct, Some(n_struct + 1)));
                n_struct += 2;
            }
        }
    }

    let m = lp.constraints.len();
    let mut negated = vec![false; m];
    let mut relations = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut rel = c.relation;
        if c.rhs < T::zero() {
            negated[i] = true;
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        relations.push(rel);
    }
    let n_slack = relations.iter().filter(|r| **r != Relation::Eq).count();
    let n_art = relations.iter().filter(|r| **r != Relation::Le).count();
    let width = n_struct + n_slack + n_art;

    let mut kinds = vec![ColKind::Structural; n_struct];
    kinds.extend(std::iter::repeat_n(ColKind::Slack, n_slack));
    kinds.extend(std::iter::repeat_n(ColKind::Artificial, n_art));

    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    // column carrying +e_i for row i in the original tableau
    let mut unit_col = Vec::with_capacity(m);
    let (mut next_slack, mut next_art) = (n_struct, n_struct + n_slack);
    for (i, c) in lp.constraints.iter().enumerate() {
        let sign = if negated[i] { -T::one() } else { T::one() };
        let mut row = vec![T::zero(); width];
        for (j, a) in c.coeffs.iter().enumerate() {
            let (pos, neg) = col_of[j];
            let v = sign.clone() * a.clone();
            if let Some(neg) = neg {
                row[neg] = -v.clone();
            }
            row[pos] = v;
        }
        match relations[i] {
            Relation::Le => {
                row[next_slack] = T::one();
                basis.push(next_slack);
                unit_col.push(next_slack);
                next_slack += 1;
            }
            Relation::Ge => {
                row[next_slack] = -T::one();
                row[next_art] = T::one();
                basis.push(next_art);
                unit_col.push(next_art);
                next_slack += 1;
                next_art += 1;
            }
            Relation::Eq => {
                row[next_art] = T::one();
                basis.push(next_art);
                unit_col.push(next_art);
                next_art += 1;
            }
        }
        rows.push(row);
        rhs.push(sign * c.rhs.clone());
    }

    let mut tab = Tableau {
        rows,
        rhs,
        basis,
        kinds,
        pivots: 0,
    };

    let empty = |status| Solution {
        status,
        x: vec![T::zero(); n],
        objective: T::zero(),
        duals: vec![T::zero(); m],
        dual_objective: T::zero(),
        max_violation: f64::INFINITY,
        pivots: 0,
    };

    if n_art > 0 {
        let phase1: Vec<T> = tab
            .kinds
            .iter()
            .map(|k| {
                if *k == ColKind::Artificial {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect();
        tab.optimize(&phase1, |_| true)?;
        let (_, infeas) = tab.reduced_costs(&phase1);
        if infeas > T::feasibility_tolerance() {
            let mut s = empty(Status::Infeasible);
            s.pivots = tab.pivots;
            return Ok(s);
        }
        // drive zero-level artificials out of the basis where possible
        for i in 0..m {
            if tab.kinds[tab.basis[i]] != ColKind::Artificial {
                continue;
            }
            let col = (0..width)
                .find(|&j| tab.kinds[j] != ColKind::Artificial && tab.rows[i][j].abs() > tol);
            if let Some(j) = col {
                tab.pivot(i, j);
            }
        }
    }

    let mut costs = vec![T::zero(); width];
    for (j, c) in lp.objective.iter().enumerate() {
        let (pos, neg) = col_of[j];
        costs[pos] = c.clone();
        if let Some(neg) = neg {
            costs[neg] = -c.clone();
        }
    }
    let kinds = tab.kinds.clone();
    let bounded = tab.optimize(&costs, |j| kinds[j] != ColKind::Artificial)?;
    if !bounded {
        let mut s = empty(Status::Unbounded);
        s.pivots = tab.pivots;
        return Ok(s);
    }

    let mut expanded = vec![T::zero(); width];
    for (i, &b) in tab.basis.iter().enumerate() {
        expanded[b] = tab.rhs[i].clone();
    }
    let x: Vec<T> = col_of
        .iter()
        .map(|&(pos, neg)| match neg {
            Some(neg) => expanded[pos].clone() - expanded[neg].clone(),
            None => expanded[pos].clone(),
        })
        .collect();
    let objective = lp
        .objective
        .iter()
        .zip(&x)
        .fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone());

    let (d, _) = tab.reduced_costs(&costs);
    let duals: Vec<T> = (0..m)
        .map(|i| {
            let y = -d[unit_col[i]].clone();
            if negated[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    let dual_objective = lp
        .constraints
        .iter()
        .zip(&duals)
        .fold(T::zero(), |acc, (c, y)| acc + c.rhs.clone() * y.clone());

    let max_violation = max_violation(lp, &x);
    if max_violation > 1e-6 {
        return Err(XorError::Lp(format!(
            "numerical failure: constraint violation {max_violation:e} after {} pivots",
            tab.pivots
        )));
    }
    Ok(Solution {
        status: Status::Optimal,
        x,
        objective,
        duals,
        dual_objective,
        max_violation,
        pivots: tab.pivots,
    })
}

/// Largest violation of any constraint or sign bound by `x`, in `f64`.
pub fn max_violation<T: Scalar>(lp: &LinearProgram<T>, x: &[T]) -> f64 {
    let xf: Vec<f64> = x.iter().map(Scalar::to_f64).collect();
    let mut worst: f64 = 0.0;
    for c in &lp.constraints {
        let lhs: f64 = c.coeffs.iter().zip(&xf).map(|(a, v)| a.to_f64() * v).sum();
        let rhs = c.rhs.to_f64();
        let viol = match c.relation {
            Relation::Le => lhs - rhs,
            Relation::Ge => rhs - lhs,
            Relation::Eq => (lhs - rhs).abs(),
        };
        worst = worst.max(viol);
    }
    for (b, v) in lp.bounds.iter().zip(&xf) {
        if *b == VarBound::NonNegative {
            worst = worst.max(-v);
        }
    }
    worst
}

/// Float copy of an exact program.
pub fn to_float(lp: &LinearProgram<BigRational>) -> LinearProgram<f64> {
    let conv = |v: &BigRational| Scalar::to_f64(v);
    LinearProgram {
        objective: lp.objective.iter().map(conv).collect(),
        constraints: lp
            .constraints
            .iter()
            .map(|c| Constraint {
                coeffs: c.coeffs.iter().map(conv).collect(),
                relation: c.relation,
                rhs: conv(&c.rhs),
            })
            .collect(),
        bounds: lp.bounds.clone(),
    }
}

/// Solves exactly over the rationals; refuses programs with more than
/// [`MAX_EXACT_VARS`] variables.
pub fn solve_exact(lp: &LinearProgram<BigRational>) -> Result<Solution<BigRational>> {
    guard(
        "exact LP variables",
        lp.n_vars() as u64,
        MAX_EXACT_VARS as u64,
    )?;
    solve(lp)
}

/// Rational from an `f64` (exact binary expansion).
pub fn rational_from_f64(v: f64) -> Option<BigRational> {
    BigRational::from_f64(v)
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rational_one() -> BigRational {
    BigRational::one()
}
