//! Exact Fourier analysis of boolean functions on `{0,1}^m`.
//!
//! Coefficients are `f̂(S) = 2^{-m} Σ_x f(x)(-1)^{|S ∩ x|}`. The transform
//! works on integer numerators (the unnormalized Walsh–Hadamard transform),
//! so every coefficient and every spectral norm is an exact dyadic rational.

use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::error::{guard, Result, XorError};
use crate::lpsolve::{self, LinearProgram, Relation, Status};
use crate::problems::XorProblem;

pub type Rational = Ratio<i64>;

pub const MAX_WHT_M: usize = 16;
pub const MAX_APPROX_M: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FourierSpectrum {
    m: usize,
    /// `2^m · f̂(S)`, indexed by the subset mask `S`.
    numerators: Vec<i64>,
}

/// In-place unnormalized Walsh–Hadamard butterfly.
fn butterfly(values: &mut [i64]) {
    let mut h = 1;
    while h < values.len() {
        for block in values.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Spectrum of the function given by its truth table (length `2^m`, `m ≤ 16`).
pub fn wht_table(table: &[bool]) -> Result<FourierSpectrum> {
    if !table.len().is_power_of_two() {
        return Err(XorError::Domain(
            "truth table length must be a power of two".into(),
        ));
    }
    let m = table.len().trailing_zeros() as usize;
    guard("Fourier transform m", m as u64, MAX_WHT_M as u64)?;
    let mut numerators: Vec<i64> = table.iter().map(|&b| b as i64).collect();
    butterfly(&mut numerators);
    Ok(FourierSpectrum { m, numerators })
}

/// Spectrum of the inner function of an XOR problem.
pub fn wht(p: &XorProblem) -> Result<FourierSpectrum> {
    guard("Fourier transform m", p.m() as u64, MAX_WHT_M as u64)?;
    wht_table(&p.truth_table()?)
}

impl FourierSpectrum {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn denominator(&self) -> i64 {
        1i64 << self.m
    }

    pub fn numerators(&self) -> &[i64] {
        &self.numerators
    }

    pub fn coefficient(&self, mask: usize) -> Rational {
        Rational::new(self.numerators[mask], self.denominator())
    }

    /// Reconstructs `f(x) = Σ_S f̂(S)(-1)^{|S ∩ x|}` exactly.
    pub fn inverse(&self) -> Vec<Rational> {
        let mut values = self.numerators.clone();
        butterfly(&mut values);
        // numerators = H f and H·H = 2^m I
        let den = self.denominator();
        values.into_iter().map(|v| Rational::new(v, den)).collect()
    }

    /// `Σ_S f̂(S)²`.
    pub fn sum_of_squares(&self) -> Rational {
        let total: i64 = self.numerators.iter().map(|v| v * v).sum();
        Rational::new(total, self.denominator() * self.denominator())
    }
}

/// `‖f̂‖₁ = Σ_S |f̂(S)|`, exact.
pub fn spectral_norm(s: &FourierSpectrum) -> Rational {
    let total: i64 = s.numerators.iter().map(|v| v.abs()).sum();
    Rational::new(total, s.denominator())
}

/// γ₂ of the communication matrix `F(x, y) = f(x ⊕ y)`, which equals `‖f̂‖₁`.
pub fn gamma2_xor(p: &XorProblem) -> Result<Rational> {
    Ok(spectral_norm(&wht(p)?))
}

/// Checks `½ log₂ γ₂ ≤ deq_upper`, i.e. `γ₂ ≤ 4^deq_upper`, exactly.
pub fn gamma2_deq_sanity(p: &XorProblem, deq_upper: u32) -> Result<bool> {
    let g = gamma2_xor(p)?;
    if deq_upper >= 31 {
        return Ok(true);
    }
    Ok(g <= Rational::from_integer(1i64 << (2 * deq_upper)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxNorm {
    pub value: f64,
    pub duality_gap: f64,
    pub max_violation: f64,
    pub pivots: usize,
}

/// `‖f̂‖_{1,ε}`: the least `‖ĝ‖₁` over real `g` with `|g(x) − f(x)| ≤ ε`
/// everywhere (the closure of the strict constraint; the infimum is the same).
///
/// Solved as an LP with `ĝ = u − v`, `u, v ≥ 0`, for `m ≤ 9`.
pub fn approx_spectral_norm(table: &[bool], eps: Rational) -> Result<ApproxNorm> {
    if !table.len().is_power_of_two() {
        return Err(XorError::Domain(
            "truth table length must be a power of two".into(),
        ));
    }
    let m = table.len().trailing_zeros() as usize;
    guard("approximate spectral norm m", m as u64, MAX_APPROX_M as u64)?;
    if !eps.is_positive() {
        return Err(XorError::Domain("epsilon must be positive".into()));
    }
    let eps = *eps.numer() as f64 / *eps.denom() as f64;
    let size = table.len();
    let mut lp = LinearProgram::minimize(vec![1.0; 2 * size]);
    for (x, &fx) in table.iter().enumerate() {
        let row: Vec<f64> = (0..2 * size)
            .map(|k| {
                let s = k % size;
                let chi = if (s & x).count_ones().is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                if k < size {
                    chi
                } else {
                    -chi
                }
            })
            .collect();
        let f = fx as u8 as f64;
        lp.constrain(row.clone(), Relation::Le, f + eps);
        lp.constrain(row, Relation::Ge, f - eps);
    }
    let sol = lpsolve::solve(&lp)?;
    if sol.status != Status::Optimal {
        return Err(XorError::Lp(format!(
            "approximate spectral norm LP ended with {:?}",
            sol.status
        )));
    }
    Ok(ApproxNorm {
        value: sol.objective,
        duality_gap: sol.duality_gap(),
        max_violation: sol.max_violation,
        pivots: sol.pivots,
    })
}

/// A linear map on `F₂^m`, stored as the images of the unit vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearMap {
    images: Vec<u64>,
}

impl LinearMap {
    pub fn from_images(images: Vec<u64>) -> Self {
        LinearMap { images }
    }

    /// The map sending input bit `i` to output bit `perm[i]`.
    pub fn permutation(perm: &[usize]) -> Self {
        LinearMap {
            images: perm.iter().map(|&p| 1u64 << p).collect(),
        }
    }

    pub fn apply(&self, x: u64) -> u64 {
        self.images
            .iter()
            .enumerate()
            .filter(|(i, _)| x >> i & 1 == 1)
            .fold(0, |acc, (_, &img)| acc ^ img)
    }

    pub fn transpose(&self) -> LinearMap {
        let m = self.images.len();
        let images = (0..m)
            .map(|j| {
                (0..m)
                    .filter(|&i| self.images[i] >> j & 1 == 1)
                    .fold(0u64, |acc, i| acc | 1 << i)
            })
            .collect();
        LinearMap { images }
    }
}

/// Generators of the symmetries of `[rank(M) ≤ 1]` on packed `n × n`
/// matrices: adjacent row and column swaps, adding row 0 to row 1, adding
/// column 0 to column 1, and transposition. Together they generate
/// `GL_n × GL_n` acting by `M ↦ P M Q` plus `M ↦ Mᵀ`.
pub fn rankone_symmetries(n: usize) -> Vec<LinearMap> {
    let bit = |i: usize, j: usize| i * n + j;
    let mut gens = Vec::new();
    let transpose: Vec<usize> = (0..n * n).map(|k| bit(k % n, k / n)).collect();
    gens.push(LinearMap::permutation(&transpose));
    for a in 0..n.saturating_sub(1) {
        let swap_rows: Vec<usize> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let i = if i == a {
                    a + 1
                } else if i == a + 1 {
                    a
                } else {
                    i
                };
                bit(i, j)
            })
            .collect();
        gens.push(LinearMap::permutation(&swap_rows));
        let swap_cols: Vec<usize> = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let j = if j == a {
                    a + 1
                } else if j == a + 1 {
                    a
                } else {
                    j
                };
                bit(i, j)
            })
            .collect();
        gens.push(LinearMap::permutation(&swap_cols));
    }
    if n >= 2 {
        // row 1 += row 0: entry (0, j) also feeds (1, j)
        let add_row = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let mut img = 1u64 << k;
                if i == 0 {
                    img |= 1 << bit(1, j);
                }
                img
            })
            .collect();
        gens.push(LinearMap::from_images(add_row));
        let add_col = (0..n * n)
            .map(|k| {
                let (i, j) = (k / n, k % n);
                let mut img = 1u64 << k;
                if j == 0 {
                    img |= 1 << bit(i, 1);
                }
                img
            })
            .collect();
        gens.push(LinearMap::from_images(add_col));
    }
    gens
}

/// Orbits of `{0,1}^m` under the group generated by `gens`, as a label per
/// point (the smallest point of its orbit).
pub fn orbits(m: usize, gens: &[LinearMap]) -> Vec<usize> {
    let size = 1usize << m;
    let mut label = vec![usize::MAX; size];
    for start in 0..size {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = start;
        let mut stack = vec![start];
        while let Some(x) = stack.pop() {
            for g in gens {
                let y = g.apply(x as u64) as usize;
                if label[y] == usize::MAX {
                    label[y] = start;
                    stack.push(y);
                }
            }
        }
    }
    label
}

/// [`approx_spectral_norm`] for a function invariant under the linear maps
/// `gens`. Averaging any feasible `g` over the group keeps it feasible and
/// does not increase `‖ĝ‖₁`, so the optimum is attained by an invariant `g`,
/// whose spectrum is constant on the orbits of the transposed maps. The LP then
/// has one variable per spectral orbit and one constraint pair per input
/// orbit, with the same optimal value.
pub fn approx_spectral_norm_invariant(
    table: &[bool],
    eps: Rational,
    gens: &[LinearMap],
) -> Result<ApproxNorm> {
    if !table.len().is_power_of_two() {
        return Err(XorError::Domain(
            "truth table length must be a power of two".into(),
        ));
    }
    let m = table.len().trailing_zeros() as usize;
    guard("approximate spectral norm m", m as u64, MAX_WHT_M as u64)?;
    if !eps.is_positive() {
        return Err(XorError::Domain("epsilon must be positive".into()));
    }
    for (k, g) in gens.iter().enumerate() {
        if g.images.len() != m {
            return Err(XorError::Domain(format!(
                "generator {k} acts on the wrong dimension"
            )));
        }
        if let Some(x) = (0..table.len()).find(|&x| table[g.apply(x as u64) as usize] != table[x]) {
            return Err(XorError::Contract(format!(
                "function is not invariant under generator {k} (input {x})"
            )));
        }
    }
    let dual: Vec<LinearMap> = gens.iter().map(LinearMap::transpose).collect();
    let x_orbit = orbits(m, gens);
    let s_orbit = orbits(m, &dual);
    let reps = |labels: &[usize]| {
        let mut r: Vec<usize> = labels.to_vec();
        r.sort_unstable();
        r.dedup();
        r
    };
    let x_reps = reps(&x_orbit);
    let s_reps = reps(&s_orbit);
    let s_index = |s: usize| s_reps.binary_search(&s_orbit[s]).expect("orbit label");
    let k = s_reps.len();
    let mut sizes = vec![0f64; k];
    for s in 0..table.len() {
        sizes[s_index(s)] += 1.0;
    }
    let mut objective = sizes.clone();
    objective.extend_from_slice(&sizes);
    let mut lp = LinearProgram::minimize(objective);
    let eps = *eps.numer() as f64 / *eps.denom() as f64;
    for &x in &x_reps {
        let mut kernel = vec![0f64; k];
        for s in 0..table.len() {
            kernel[s_index(s)] += if (s & x).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
        }
        let mut row = kernel.clone();
        row.extend(kernel.iter().map(|v| -v));
        let f = table[x] as u8 as f64;
        lp.constrain(row.clone(), Relation::Le, f + eps);
        lp.constrain(row, Relation::Ge, f - eps);
    }
    let sol = lpsolve::solve(&lp)?;
    if sol.status != Status::Optimal {
        return Err(XorError::Lp(format!(
            "reduced approximate spectral norm LP ended with {:?}",
            sol.status
        )));
    }
    Ok(ApproxNorm {
        value: sol.objective,
        duality_gap: sol.duality_gap(),
        max_violation: sol.max_violation,
        pivots: sol.pivots,
    })
}

/// `true` iff the rational is an integer multiple of `2^-m`.
pub fn is_dyadic(r: &Rational, m: usize) -> bool {
    (1i64 << m) % r.denom() == 0 || r.is_zero()
}
