//! Maximizing a quadratic form over products of unit vectors, and its
//! symmetric-extension relaxation.
//!
//! Variant O1 optimizes `⟨α_1 ⊗ … ⊗ α_k| M |α_1 ⊗ … ⊗ α_k⟩` over independent
//! unit vectors; O2 optimizes `⟨β^{⊗k}| M |β^{⊗k}⟩` over one unit vector. The
//! level-`ℓ` relaxation maximizes `tr((M ⊗ 1) ρ)` over states invariant under
//! the relevant permutation group, which is `λ_max` of the twirled objective.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, index, CMat, CVec, HermitianEigen};
use crate::rng;
use crate::state::{DensityOperator, DEFAULT_MAX_DIM};
use crate::symmetry::{self, Permutation, Twirl};

/// Bound violations of `0 ≤ M ≤ 1` tolerated on input.
pub const OBJECTIVE_TOL: f64 = 1e-10;
pub const SOUNDNESS_TOL: f64 = 1e-8;
pub const GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Independent unit vectors, one per factor.
    O1,
    /// One unit vector repeated in every factor.
    O2,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "o1" => Ok(Self::O1),
            "o2" => Ok(Self::O2),
            _ => invalid(format!("unknown variant '{s}' (expected o1 or o2)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SphereProblem {
    objective: CMat,
    d: usize,
    k: usize,
    variant: Variant,
    /// Whether `{M, 1 - M}` is asserted to be implementable one-way; the
    /// additive-error guarantee is conditional on it and it is not checked.
    one_way_measurable: bool,
}

impl SphereProblem {
    pub fn new(objective: CMat, d: usize, k: usize, variant: Variant, one_way_measurable: bool) -> Result<Self> {
        if d == 0 || k == 0 {
            return invalid("local dimension and fold count must be positive");
        }
        let dim = d.checked_pow(k as u32).unwrap_or(usize::MAX);
        if objective.nrows() != dim || objective.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "objective is {}x{}, expected {dim}x{dim} for d = {d}, k = {k}",
                objective.nrows(),
                objective.ncols()
            )));
        }
        if !linalg::is_hermitian(&objective, OBJECTIVE_TOL) {
            return invalid("objective is not Hermitian");
        }
        let objective = linalg::hermitian_part(&objective);
        let eig = HermitianEigen::new(&objective);
        if eig.min() < -OBJECTIVE_TOL || eig.max() > 1.0 + OBJECTIVE_TOL {
            return invalid(format!(
                "objective spectrum [{}, {}] is outside [0, 1]",
                eig.min(),
                eig.max()
            ));
        }
        Ok(Self {
            objective,
            d,
            k,
            variant,
            one_way_measurable,
        })
    }

    pub fn objective(&self) -> &CMat {
        &self.objective
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn one_way_measurable(&self) -> bool {
        self.one_way_measurable
    }

    /// Subsystem dims of the level-`ℓ` relaxation and its symmetry group.
    /// O2 uses `ℓ` copies of `C^d` under `S_ℓ`; O1 uses `ℓ` blocks of `k`
    /// factors (factor `j` of block `i` at `i k + j`) with each factor's copies
    /// permuted independently. The objective acts on the first `k` subsystems.
    pub fn relaxation_layout(&self, level: usize) -> (Vec<usize>, Vec<Permutation>) {
        match self.variant {
            Variant::O2 => (
                vec![self.d; level],
                symmetry::symmetric_group_on(level, &(0..level).collect::<Vec<_>>()),
            ),
            Variant::O1 => {
                let n = self.k * level;
                let gens = (0..self.k)
                    .flat_map(|j| {
                        let copies: Vec<usize> = (0..level).map(|i| i * self.k + j).collect();
                        symmetry::symmetric_group_on(n, &copies)
                    })
                    .collect();
                (vec![self.d; n], gens)
            }
        }
    }

    /// Objective value at a product of unit vectors (one per factor).
    pub fn evaluate(&self, vectors: &[CVec]) -> f64 {
        let v = kron_all(vectors);
        (v.adjoint() * &self.objective * &v)[(0, 0)].re
    }
}

fn kron_all(vectors: &[CVec]) -> CVec {
    let mut out = CVec::from_element(1, c(1.0));
    for v in vectors {
        out = out.kronecker(v);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct RelaxResult {
    pub level: usize,
    pub value: f64,
    /// `λ_max` recomputed by power iteration on the twirled objective.
    pub power_value: f64,
    pub cross_check_residual: f64,
    #[serde(skip)]
    pub optimizer: DensityOperator,
}

pub fn relax(p: &SphereProblem, level: usize) -> Result<RelaxResult> {
    relax_capped(p, level, DEFAULT_MAX_DIM)
}

pub fn relax_capped(p: &SphereProblem, level: usize, max_dim: usize) -> Result<RelaxResult> {
    if level < p.k {
        return invalid(format!("relaxation level {level} is below k = {}", p.k));
    }
    let (dims, gens) = p.relaxation_layout(level);
    let total = (p.d as u128).checked_pow(dims.len() as u32).unwrap_or(u128::MAX);
    if total > max_dim as u128 {
        return Err(Error::Resource {
            what: format!("relaxation dimension at level {level}"),
            required: total,
            available: max_dim as u128,
        });
    }
    let rest = index::product(&dims) / p.objective.nrows();
    let lifted = linalg::kron(&p.objective, &linalg::identity(rest));
    let twirl = Twirl::new(&dims, &gens)?;
    let t = linalg::hermitian_part(&twirl.apply(&lifted));
    let eig = HermitianEigen::new(&t);
    let value = eig.max();
    let top = eig.vectors.column(eig.values.len() - 1).into_owned();
    let optimizer = linalg::hermitian_part(&twirl.apply(&linalg::outer(&top)));
    let optimizer = DensityOperator::from_matrix(dims, optimizer, crate::state::Repair::Clamp)?;
    let power_value = power_iteration(&t, 0);
    Ok(RelaxResult {
        level,
        value,
        power_value,
        cross_check_residual: (value - power_value).abs(),
        optimizer,
    })
}

/// Rayleigh quotient after power iteration on a PSD operator.
fn power_iteration(t: &CMat, seed: u64) -> f64 {
    let n = t.nrows();
    let mut v = rng::gaussian_matrix(&mut rng::stream(seed, 0), n, 1).column(0).into_owned();
    v /= c(v.norm());
    let mut value = 0.0;
    for _ in 0..100_000 {
        let w = t * &v;
        let next = v.dotc(&w).re;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / c(norm);
        if (next - value).abs() <= 1e-15 * next.abs().max(1.0) {
            return next;
        }
        value = next;
    }
    value
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            restarts: 100,
            iterations: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleResult {
    /// Objective at `vectors`, recomputed; a lower bound on the optimum.
    pub value: f64,
    #[serde(skip)]
    pub vectors: Vec<CVec>,
    pub best_restart: usize,
}

/// `⟨φ_a| M |φ_b⟩` where `φ_a` is the product of `vectors` with slot `j`
/// replaced by the basis vector `e_a`.
fn slot_operator(m: &CMat, vectors: &[CVec], j: usize) -> CMat {
    let d = vectors[j].len();
    let phis: Vec<CVec> = (0..d)
        .map(|a| {
            let mut vs = vectors.to_vec();
            vs[j] = CVec::from_fn(d, |i, _| if i == a { c(1.0) } else { c(0.0) });
            kron_all(&vs)
        })
        .collect();
    let images: Vec<CVec> = phis.iter().map(|p| m * p).collect();
    CMat::from_fn(d, d, |a, b| phis[a].dotc(&images[b]))
}

fn expand(p: &SphereProblem, point: &[CVec]) -> Vec<CVec> {
    match p.variant {
        Variant::O1 => point.to_vec(),
        Variant::O2 => vec![point[0].clone(); p.k],
    }
}

/// Ascent direction per free vector: `H_j α_j` for O1, `Σ_j H_j β` for O2.
fn direction(p: &SphereProblem, point: &[CVec]) -> Vec<CVec> {
    let full = expand(p, point);
    match p.variant {
        Variant::O1 => (0..p.k).map(|j| slot_operator(&p.objective, &full, j) * &full[j]).collect(),
        Variant::O2 => {
            let mut g = CVec::zeros(p.d);
            for j in 0..p.k {
                g += slot_operator(&p.objective, &full, j) * &point[0];
            }
            vec![g]
        }
    }
}

fn normalized(v: CVec) -> CVec {
    let n = v.norm();
    v / c(n)
}

fn ascend(p: &SphereProblem, mut point: Vec<CVec>, iterations: usize) -> (f64, Vec<CVec>) {
    let mut value = p.evaluate(&expand(p, &point));
    let mut t = 1.0;
    for _ in 0..iterations {
        let g = direction(p, &point);
        let mut improved = false;
        let mut first = true;
        while t > 1e-12 {
            let trial: Vec<CVec> = point
                .iter()
                .zip(&g)
                .map(|(x, gx)| normalized(x + gx * c(t)))
                .collect();
            let v = p.evaluate(&expand(p, &trial));
            if v > value {
                let gain = v - value;
                point = trial;
                value = v;
                improved = gain > 1e-15 * value.abs().max(1.0);
                if first {
                    t *= 2.0;
                }
                break;
            }
            first = false;
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (value, point)
}

/// Best product value over random restarts of projected gradient ascent.
pub fn product_oracle(p: &SphereProblem, opts: &OracleOptions) -> Result<OracleResult> {
    if opts.restarts == 0 {
        return invalid("at least one restart is needed");
    }
    let free = match p.variant {
        Variant::O1 => p.k,
        Variant::O2 => 1,
    };
    let runs: Vec<(f64, Vec<CVec>)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::stream(opts.seed, r as u64);
            let start: Vec<CVec> = (0..free)
                .map(|_| normalized(rng::gaussian_matrix(&mut g, p.d, 1).column(0).into_owned()))
                .collect();
            ascend(p, start, opts.iterations)
        })
        .collect();
    let (best_restart, (_, point)) = runs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(b.0.cmp(&a.0)))
        .expect("non-empty");
    let vectors = expand(p, point);
    Ok(OracleResult {
        value: p.evaluate(&vectors),
        vectors,
        best_restart,
    })
}

/// `sqrt((k-1)^2 ln d / (2 (ℓ-k)))`.
pub fn gap_bound(k: usize, d: usize, level: usize) -> Result<f64> {
    if level <= k {
        return invalid(format!("gap bound needs level > k, got level {level}, k {k}"));
    }
    if d == 0 {
        return invalid("local dimension must be positive");
    }
    let f = ((k - 1) * (k - 1)) as f64;
    Ok((f * (d as f64).ln() / (2.0 * (level - k) as f64)).sqrt())
}

/// Level whose gap bound is at most `epsilon`: `⌈ε^{-2} (k-1)^2 ln d / 2⌉ + k`.
pub fn level_for_gap(k: usize, d: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let f = ((k - 1) * (k - 1)) as f64;
    Ok(((0.5 * f * (d as f64).ln() / (epsilon * epsilon) - 1e-12).ceil().max(1.0)) as usize + k)
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub level: usize,
    pub relax: f64,
    pub oracle: f64,
    /// `None` when `ℓ = k`.
    pub gap_bound: Option<f64>,
    /// `oracle ≤ relax + 1e-8`.
    pub sound: bool,
    /// `relax - oracle ≤ gap_bound + 1e-6`.
    pub within_gap: Option<bool>,
    pub pass: bool,
    /// The gap guarantee assumes `{M, 1 - M}` is one-way implementable.
    pub guarantee_conditional: bool,
    pub cross_check_residual: f64,
}

pub fn sandwich_check(p: &SphereProblem, level: usize, opts: &OracleOptions) -> Result<SandwichReport> {
    let r = relax(p, level)?;
    let o = product_oracle(p, opts)?;
    let gap = if level > p.k { Some(gap_bound(p.k, p.d, level)?) } else { None };
    let sound = o.value <= r.value + SOUNDNESS_TOL;
    let within_gap = gap.map(|g| r.value - o.value <= g + GAP_TOL);
    Ok(SandwichReport {
        level,
        relax: r.value,
        oracle: o.value,
        gap_bound: gap,
        sound,
        within_gap,
        pass: sound && within_gap.unwrap_or(true),
        guarantee_conditional: !p.one_way_measurable,
        cross_check_residual: r.cross_check_residual,
    })
}

/// Projector onto the maximally entangled state of two `d`-level systems.
pub fn max_entangled_projector(d: usize) -> CMat {
    let v = CVec::from_fn(d * d, |g, _| if g / d == g % d { c(1.0 / (d as f64).sqrt()) } else { c(0.0) });
    linalg::outer(&v)
}
