//! Symmetric-extension feasibility and entanglement detection.
//!
//! An extension of a `k`-party state `ρ` to level `ℓ` lives on `ℓ` blocks
//! `Ā_i = A_1^i … A_k^i`, laid out block-major: subsystem `i k + j` is
//! `A_j^i`. The affine part of the constraint set (group invariance plus
//! marginals) is handled exactly in the orthonormal orbit basis of the
//! invariant operators, so every affine iterate is invariant by
//! construction.

use std::f64::consts::LN_2;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::definetti::{build_candidate, find_qstar, make_grouping};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, index, CMat, CVec, HermitianEigen};
use crate::rng;
use crate::state::{partial_trace_matrix, random_state, reorder_matrix, DensityOperator, Ensemble, DEFAULT_MAX_DIM};
use crate::symmetry::{self, Permutation, Twirl};

/// Tolerance used to re-validate a returned extension.
pub const EXTENSION_CHECK_TOL: f64 = 1e-7;
const GRAM_CUTOFF: f64 = 1e-10;
const STALL_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionMode {
    /// Invariance under permutations of whole blocks; `ρ̃_{A_1^1 A_2^2 … A_k^k} = ρ`.
    FullMarginal,
    /// Independent permutations of each party's copies; every
    /// `ρ̃_{A_1^{i_1} … A_k^{i_k}} = ρ`.
    PerParty,
}

impl FromStr for ExtensionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-marginal" | "full" => Ok(Self::FullMarginal),
            "per-party" => Ok(Self::PerParty),
            _ => invalid(format!("unknown extension mode '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Norm,
    Relent,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" => Ok(Self::Norm),
            "relent" => Ok(Self::Relent),
            _ => invalid(format!("unknown metric '{s}' (expected norm or relent)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtensionProblem {
    target: DensityOperator,
    k: usize,
    level: usize,
    mode: ExtensionMode,
    dims: Vec<usize>,
    tuples: Vec<Vec<usize>>,
    representatives: Vec<Vec<usize>>,
    twirl: Twirl,
    /// Constraint rows in orbit coordinates: representative marginals, then the trace.
    a: CMat,
    b: CVec,
    /// Pseudo-inverse of `A A†`.
    gram_pinv: CMat,
}

impl ExtensionProblem {
    pub fn target(&self) -> &DensityOperator {
        &self.target
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn mode(&self) -> ExtensionMode {
        self.mode
    }

    /// Subsystem dimensions of the extension, block-major.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        index::product(&self.dims)
    }

    /// Every constrained index tuple `(i_1, …, i_k)`, zero-based.
    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    /// Number of invariant (complex) coordinates the search runs over.
    pub fn num_orbits(&self) -> usize {
        self.twirl.num_orbits()
    }

    pub fn group_generators(&self) -> Vec<Permutation> {
        generators(self.k, self.level, self.mode)
    }

    fn positions(&self, tuple: &[usize]) -> Vec<usize> {
        tuple.iter().enumerate().map(|(j, &i)| i * self.k + j).collect()
    }

    /// `ρ̃_{A_1^{i_1} … A_k^{i_k}}` in party order.
    pub fn marginal(&self, x: &CMat, tuple: &[usize]) -> Result<CMat> {
        marginal_at(x, &self.dims, &self.positions(tuple))
    }

    /// Orthogonal projection onto the invariant operators satisfying every
    /// marginal constraint and unit trace.
    pub fn project_affine(&self, x: &CMat) -> CMat {
        let coeffs = CVec::from_vec(self.twirl.coefficients(x));
        let r = &self.a * &coeffs - &self.b;
        let corrected = &coeffs - self.a.adjoint() * (&self.gram_pinv * r);
        linalg::hermitian_part(&self.twirl.from_coefficients(corrected.as_slice()))
    }

    /// Component of an invariant `w` lying in the row space of the constraints.
    fn normal_component(&self, w: &CMat) -> CMat {
        let coeffs = CVec::from_vec(self.twirl.coefficients(w));
        let n = self.a.adjoint() * (&self.gram_pinv * (&self.a * coeffs));
        linalg::hermitian_part(&self.twirl.from_coefficients(n.as_slice()))
    }

    /// Residuals of a candidate extension: invariance, worst marginal gap over
    /// all tuples, trace error and `λ_min`.
    pub fn check(&self, x: &CMat) -> Result<ExtensionCheck> {
        let invariance = self.twirl.invariance_residual(x);
        let mut marginal = 0.0f64;
        for t in &self.tuples {
            let m = self.marginal(x, t)?;
            marginal = marginal.max(linalg::frobenius(&(m - self.target.matrix())));
        }
        let trace = (linalg::trace(x).re - 1.0).abs();
        let lambda_min = HermitianEigen::new(&linalg::hermitian_part(x)).min();
        let tol = EXTENSION_CHECK_TOL;
        Ok(ExtensionCheck {
            invariance,
            marginal,
            trace,
            lambda_min,
            valid: invariance <= tol && marginal <= tol && trace <= tol && lambda_min >= -tol,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionCheck {
    pub invariance: f64,
    pub marginal: f64,
    pub trace: f64,
    pub lambda_min: f64,
    pub valid: bool,
}

fn marginal_at(x: &CMat, dims: &[usize], positions: &[usize]) -> Result<CMat> {
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    let (kept_dims, m) = partial_trace_matrix(x, dims, &sorted)?;
    let order: Vec<usize> = positions
        .iter()
        .map(|p| sorted.iter().position(|s| s == p).expect("kept"))
        .collect();
    Ok(reorder_matrix(&m, &kept_dims, &order)?.1)
}

fn generators(k: usize, level: usize, mode: ExtensionMode) -> Vec<Permutation> {
    let n = k * level;
    match mode {
        ExtensionMode::FullMarginal => {
            let blocks: Vec<Vec<usize>> = (0..level).map(|i| (i * k..(i + 1) * k).collect()).collect();
            symmetry::block_permutation_group(n, &blocks)
        }
        ExtensionMode::PerParty => (0..k)
            .flat_map(|j| {
                let copies: Vec<usize> = (0..level).map(|i| i * k + j).collect();
                symmetry::symmetric_group_on(n, &copies)
            })
            .collect(),
    }
}

/// Orbit representatives of `tuples` under `gens`.
fn representatives(tuples: &[Vec<usize>], gens: &[Permutation], k: usize) -> Vec<Vec<usize>> {
    let mut label: Vec<usize> = (0..tuples.len()).collect();
    fn find(label: &mut [usize], mut x: usize) -> usize {
        while label[x] != x {
            label[x] = label[label[x]];
            x = label[x];
        }
        x
    }
    for (a, t) in tuples.iter().enumerate() {
        for g in gens {
            let image: Vec<usize> = t.iter().enumerate().map(|(j, &i)| g[i * k + j] / k).collect();
            if let Some(b) = tuples.iter().position(|u| *u == image) {
                let (ra, rb) = (find(&mut label, a), find(&mut label, b));
                label[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    (0..tuples.len())
        .filter(|&a| find(&mut label, a) == a)
        .map(|a| tuples[a].clone())
        .collect()
}

pub fn build_problem(
    rho: &DensityOperator,
    k: usize,
    level: usize,
    mode: ExtensionMode,
) -> Result<ExtensionProblem> {
    build_problem_capped(rho, k, level, mode, DEFAULT_MAX_DIM)
}

pub fn build_problem_capped(
    rho: &DensityOperator,
    k: usize,
    level: usize,
    mode: ExtensionMode,
    max_dim: usize,
) -> Result<ExtensionProblem> {
    if k != rho.num_subsystems() || k == 0 {
        return invalid(format!("k = {k} but the state has {} parties", rho.num_subsystems()));
    }
    if level < k {
        return invalid(format!("extension level {level} is below the party count {k}"));
    }
    let dt = rho.dim();
    let total = (dt as u128).checked_pow(level as u32).unwrap_or(u128::MAX);
    if total > max_dim as u128 {
        return Err(Error::Resource {
            what: format!("extension dimension at level {level}"),
            required: total,
            available: max_dim as u128,
        });
    }
    let dims: Vec<usize> = (0..level).flat_map(|_| rho.dims().iter().copied()).collect();
    let gens = generators(k, level, mode);
    let twirl = Twirl::new(&dims, &gens)?;

    let tuples: Vec<Vec<usize>> = match mode {
        ExtensionMode::FullMarginal => vec![(0..k).collect()],
        ExtensionMode::PerParty => (0..level.pow(k as u32))
            .map(|t| {
                let mut d = vec![0; k];
                index::digits(t, &vec![level; k], &mut d);
                d
            })
            .collect(),
    };
    let reps = representatives(&tuples, &gens, k);

    let d = index::product(&dims);
    let strides = index::strides(&dims);
    let rows = reps.len() * dt * dt + 1;
    let mut a = CMat::zeros(rows, twirl.num_orbits());
    let mut b = CVec::zeros(rows);
    let tdims = rho.dims().to_vec();
    let mut digits = vec![0; level * k];
    let mut ydig = vec![0; k];
    for (r, t) in reps.iter().enumerate() {
        let pos: Vec<usize> = t.iter().enumerate().map(|(j, &i)| i * k + j).collect();
        for g in 0..d {
            index::digits(g, &dims, &mut digits);
            let xdig: Vec<usize> = pos.iter().map(|&p| digits[p]).collect();
            let x = index::compose(&xdig, &tdims);
            let base = g - pos.iter().map(|&p| digits[p] * strides[p]).sum::<usize>();
            for y in 0..dt {
                index::digits(y, &tdims, &mut ydig);
                let h = base + pos.iter().zip(&ydig).map(|(&p, &v)| v * strides[p]).sum::<usize>();
                let o = twirl.orbit_of(g, h);
                a[(r * dt * dt + x * dt + y, o)] += c(1.0 / (twirl.orbit_size(o) as f64).sqrt());
            }
        }
        for x in 0..dt {
            for y in 0..dt {
                b[r * dt * dt + x * dt + y] = rho.matrix()[(x, y)];
            }
        }
    }
    for g in 0..d {
        let o = twirl.orbit_of(g, g);
        a[(rows - 1, o)] += c(1.0 / (twirl.orbit_size(o) as f64).sqrt());
    }
    b[rows - 1] = c(1.0);

    let gram = linalg::hermitian_part(&(&a * a.adjoint()));
    let eig = HermitianEigen::new(&gram);
    let cutoff = GRAM_CUTOFF * eig.max().max(1.0);
    let gram_pinv = eig.map(|l| if l > cutoff { 1.0 / l } else { 0.0 });

    Ok(ExtensionProblem {
        target: rho.clone(),
        k,
        level,
        mode,
        dims,
        tuples,
        representatives: reps,
        twirl,
        a,
        b,
        gram_pinv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Feasible once the affine residual is below `affine_tol` and the cone
    /// residual below `cone_tol`.
    pub affine_tol: f64,
    pub cone_tol: f64,
    pub max_iter: usize,
    /// Seeds the sampled validation of infeasibility certificates.
    pub seed: u64,
    /// Consecutive stalled iterations needed before certifying infeasibility.
    pub stall_window: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            affine_tol: 1e-8,
            cone_tol: 1e-8,
            max_iter: 20_000,
            seed: 0,
            stall_window: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeasibilityStatus {
    Feasible,
    Infeasible,
    Undecided,
}

#[derive(Debug, Clone, Serialize)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    pub iterations: usize,
    /// Distance of the PSD iterate from the affine set.
    pub affine_residual: f64,
    /// Norm of the negative part of the affine iterate.
    pub cone_residual: f64,
    /// `λ_min(W) - ⟨W, X⟩` for the unit-norm separating operator `W`; positive
    /// values prove infeasibility.
    pub separation_residual: Option<f64>,
    /// Whether sampled points of both sets fall on the expected sides of `W`.
    pub certificate_validated: Option<bool>,
    #[serde(skip)]
    pub extension: Option<CMat>,
    #[serde(skip)]
    pub certificate: Option<CMat>,
}

/// Dykstra alternating projections between the PSD cone and the affine set,
/// started from the affine projection of `ρ^{⊗ℓ}`.
pub fn solve_feasibility(p: &ExtensionProblem, opts: &SolveOptions) -> Result<FeasibilityResult> {
    if !(opts.affine_tol > 0.0) || !(opts.cone_tol > 0.0) || opts.max_iter == 0 || opts.stall_window == 0 {
        return invalid("tolerance, iteration cap and stall window must be positive");
    }
    let start = p.target.power(p.level)?;
    let mut x = p.project_affine(start.matrix());
    let d = x.nrows();
    let mut corr = CMat::zeros(d, d);
    let mut prev = f64::INFINITY;
    let mut stalled = 0;
    let mut affine_residual = f64::INFINITY;
    let mut cone_residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let shifted = &x + &corr;
        let (y, _) = linalg::psd_projection(&shifted);
        corr = shifted - &y;
        let next = p.project_affine(&y);
        affine_residual = linalg::frobenius(&(&y - &next));
        x = next;
        if affine_residual < opts.affine_tol {
            cone_residual = negative_part(&x);
            if cone_residual < opts.cone_tol {
                return Ok(FeasibilityResult {
                    status: FeasibilityStatus::Feasible,
                    iterations: it,
                    affine_residual,
                    cone_residual,
                    separation_residual: None,
                    certificate_validated: None,
                    extension: Some(x),
                    certificate: None,
                });
            }
        }
        if affine_residual > 10.0 * opts.affine_tol && (affine_residual - prev).abs() <= STALL_REL * affine_residual {
            stalled += 1;
        } else {
            stalled = 0;
        }
        prev = affine_residual;
        if stalled >= opts.stall_window {
            let (w, s) = certificate(p, &y, &x);
            if s > 0.0 {
                let validated = validate_certificate(p, &w, &x, opts.seed)?;
                return Ok(FeasibilityResult {
                    status: FeasibilityStatus::Infeasible,
                    iterations: it,
                    affine_residual,
                    cone_residual: negative_part(&x),
                    separation_residual: Some(s),
                    certificate_validated: Some(validated),
                    extension: None,
                    certificate: Some(w),
                });
            }
            stalled = 0;
        }
    }
    cone_residual = cone_residual.min(negative_part(&x));
    Ok(FeasibilityResult {
        status: FeasibilityStatus::Undecided,
        iterations: opts.max_iter,
        affine_residual,
        cone_residual,
        separation_residual: None,
        certificate_validated: None,
        extension: None,
        certificate: None,
    })
}

fn negative_part(x: &CMat) -> f64 {
    HermitianEigen::new(x)
        .values
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|l| l * l)
        .sum::<f64>()
        .sqrt()
}

/// Unit-norm `W` along the gap from the affine iterate `x` to the cone
/// iterate `y`, restricted so that `⟨W, ·⟩` is constant on the affine set.
fn certificate(p: &ExtensionProblem, y: &CMat, x: &CMat) -> (CMat, f64) {
    let w = p.normal_component(&(y - x));
    let n = linalg::frobenius(&w);
    if n == 0.0 {
        return (w, f64::NEG_INFINITY);
    }
    let w = w * c(1.0 / n);
    let s = HermitianEigen::new(&w).min() - linalg::inner(&w, x).re;
    (w, s)
}

fn validate_certificate(p: &ExtensionProblem, w: &CMat, x: &CMat, seed: u64) -> Result<bool> {
    let level = linalg::inner(w, x).re;
    let floor = HermitianEigen::new(w).min();
    let mut ok = true;
    for s in 0..16 {
        let z = random_state(&[p.dim()], rng::derive_seed(seed, s), Ensemble::HilbertSchmidtMixed)?;
        let v = linalg::inner(w, z.matrix()).re;
        ok &= v >= floor - 1e-12 && v > level;
        // a random point of the affine set
        let h = rng::gaussian_matrix(&mut rng::stream(seed, 1000 + s), p.dim(), p.dim());
        let a = p.project_affine(&linalg::hermitian_part(&(x + h)));
        ok &= (linalg::inner(w, &a).re - level).abs() <= 1e-8 * (1.0 + linalg::frobenius(&a));
    }
    Ok(ok)
}

/// `⌈2 (k-1)^2 ε^{-2} Σ_i ln|A_i| + k⌉` (norm) or `⌈(k-1)^2 ε^{-1} Σ_i log2|A_i| + k⌉` (relent).
pub fn required_level(k: usize, dims: &[usize], epsilon: f64, metric: Metric) -> Result<usize> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return invalid(format!("epsilon must be positive and finite, got {epsilon}"));
    }
    if k == 0 || dims.len() != k || dims.contains(&0) {
        return invalid(format!("need k = {k} positive party dimensions, got {dims:?}"));
    }
    let f = ((k - 1) * (k - 1)) as f64;
    let raw = match metric {
        Metric::Norm => 2.0 * f / (epsilon * epsilon) * dims.iter().map(|&d| (d as f64).ln()).sum::<f64>(),
        Metric::Relent => f / epsilon * dims.iter().map(|&d| (d as f64).log2()).sum::<f64>(),
    } + k as f64;
    Ok(((raw - 1e-12).ceil() as usize).max(k))
}

/// Distance bounds for any `ℓ`-extendible state, as `(bits, norm)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtendibleBounds {
    /// `(k-1)^2 Σ_i log2|A_i| / (ℓ-k)`.
    pub relent_bits: f64,
    /// `sqrt(2 (k-1)^2 Σ_i ln|A_i| / (ℓ-k))`.
    pub norm: f64,
}

pub fn extendible_distance_bounds(k: usize, level: usize, dims: &[usize]) -> Result<ExtendibleBounds> {
    if level <= k {
        return invalid(format!("bounds need level > k, got level {level}, k {k}"));
    }
    if dims.len() != k || dims.contains(&0) {
        return invalid(format!("need k = {k} positive party dimensions, got {dims:?}"));
    }
    let f = ((k - 1) * (k - 1)) as f64 / (level - k) as f64;
    let log2: f64 = dims.iter().map(|&d| (d as f64).log2()).sum();
    Ok(ExtendibleBounds {
        relent_bits: f * log2,
        norm: (2.0 * f * log2 * LN_2).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SeparableWithinEpsilon,
    Entangled,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub solve: SolveOptions,
    /// Overrides the level derived from `ε`.
    pub level: Option<usize>,
    pub max_dim: usize,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            level: None,
            max_dim: DEFAULT_MAX_DIM,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectionReport {
    pub verdict: Verdict,
    pub required_level: usize,
    pub level: usize,
    pub epsilon: f64,
    pub metric: Metric,
    pub result: FeasibilityResult,
}

/// Full-marginal extension test at the level that makes a feasible answer
/// imply `ε`-closeness to the separable states.
pub fn detect_entanglement(
    rho: &DensityOperator,
    epsilon: f64,
    metric: Metric,
    opts: &DetectOptions,
) -> Result<DetectionReport> {
    let k = rho.num_subsystems();
    let required = required_level(k, rho.dims(), epsilon, metric)?;
    let level = opts.level.unwrap_or(required);
    let problem = match build_problem_capped(rho, k, level, ExtensionMode::FullMarginal, opts.max_dim) {
        Err(Error::Resource { required: need, available, .. }) => {
            return Err(Error::Resource {
                what: format!(
                    "extension at level {level} of total dimension {}^{level} (level unreachable at desk scale)",
                    rho.dim()
                ),
                required: need,
                available,
            })
        }
        other => other?,
    };
    let result = solve_feasibility(&problem, &opts.solve)?;
    let verdict = match result.status {
        FeasibilityStatus::Feasible => Verdict::SeparableWithinEpsilon,
        FeasibilityStatus::Infeasible => Verdict::Entangled,
        FeasibilityStatus::Undecided => Verdict::Undecided,
    };
    Ok(DetectionReport {
        verdict,
        required_level: required,
        level,
        epsilon,
        metric,
        result,
    })
}

/// Separable state `Σ_x p_x ⊗_j σ_{x,j}` read off a full-marginal extension
/// by the de Finetti construction on its blocks.
pub fn separable_candidate(
    p: &ExtensionProblem,
    extension: &CMat,
    restarts: usize,
    seed: u64,
) -> Result<DensityOperator> {
    if p.mode != ExtensionMode::FullMarginal {
        return invalid("separable candidates are read off full-marginal extensions");
    }
    let x = DensityOperator::from_matrix(p.dims.clone(), extension.clone(), crate::state::Repair::Clamp)?;
    let blocks = x.regroup(&vec![p.k; p.level])?;
    let layout = make_grouping(p.level, p.k)?;
    let q = find_qstar(&blocks, &layout, restarts, seed)?;
    let cand = build_candidate(&blocks, p.k, &layout, &q)?;
    let parts = cand
        .components
        .iter()
        .map(|s| {
            let s = s.with_dims(p.target.dims().to_vec())?;
            let mut prod = s.partial_trace(&[0])?;
            for j in 1..p.k {
                prod = prod.tensor(&s.partial_trace(&[j])?)?;
            }
            Ok(prod)
        })
        .collect::<Result<Vec<_>>>()?;
    DensityOperator::mixture(&cand.weights, &parts)
}

/// `p Φ_d + (1 - p) 1/d^2`.
pub fn isotropic(d: usize, p: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("isotropic parameter {p} outside [0, 1]"));
    }
    let phi = DensityOperator::max_entangled(d)?;
    let mixed = DensityOperator::maximally_mixed(vec![d, d]);
    DensityOperator::mixture(&[p, 1.0 - p], &[phi, mixed])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdReport {
    /// Largest parameter certified feasible.
    pub threshold: f64,
    /// Smallest parameter not certified feasible.
    pub upper: f64,
    pub undecided: usize,
}

/// Bisection for the largest `t ∈ [lo, hi]` with `family(t)` extendible,
/// assuming feasibility is monotone in `t`; undecided solves count as
/// not feasible.
pub fn feasibility_threshold(
    family: impl Fn(f64) -> Result<DensityOperator>,
    level: usize,
    mode: ExtensionMode,
    lo: f64,
    hi: f64,
    resolution: f64,
    opts: &SolveOptions,
) -> Result<ThresholdReport> {
    let (mut lo, mut hi) = (lo, hi);
    let mut undecided = 0;
    let mut feasible = |t: f64| -> Result<bool> {
        let rho = family(t)?;
        let p = build_problem(&rho, rho.num_subsystems(), level, mode)?;
        let r = solve_feasibility(&p, opts)?;
        if r.status == FeasibilityStatus::Undecided {
            undecided += 1;
        }
        Ok(r.status == FeasibilityStatus::Feasible)
    };
    if feasible(hi)? {
        return Ok(ThresholdReport {
            threshold: hi,
            upper: hi,
            undecided,
        });
    }
    if !feasible(lo)? {
        return invalid(format!("family is not extendible even at {lo}"));
    }
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdReport {
        threshold: lo,
        upper: hi,
        undecided,
    })
}

impl ExtensionProblem {
    /// Orbit representatives of the constrained tuples.
    pub fn representative_tuples(&self) -> &[Vec<usize>] {
        &self.representatives
    }

    /// The extension restricted to its first `level` blocks, as a point of
    /// the level-`level` problem.
    pub fn restrict(&self, x: &CMat, level: usize) -> Result<CMat> {
        if level == 0 || level > self.level {
            return invalid(format!("cannot restrict level {} to {level}", self.level));
        }
        let keep: Vec<usize> = (0..level * self.k).collect();
        Ok(partial_trace_matrix(x, &self.dims, &keep)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{restricted_relative_entropy, MeasurementClass, SeesawOptions};

    fn product(seed: u64) -> DensityOperator {
        let a = DensityOperator::random(&[2], seed, Ensemble::HilbertSchmidtMixed).unwrap();
        let b = DensityOperator::random(&[2], seed + 100, Ensemble::HilbertSchmidtMixed).unwrap();
        a.tensor(&b).unwrap()
    }

    #[test]
    fn extension_dimensions() {
        let rho = product(1);
        assert_eq!(build_problem(&rho, 2, 2, ExtensionMode::FullMarginal).unwrap().dim(), 16);
        assert_eq!(build_problem(&rho, 2, 3, ExtensionMode::FullMarginal).unwrap().dim(), 64);
        let p = build_problem(&rho, 2, 2, ExtensionMode::PerParty).unwrap();
        assert_eq!(p.tuples(), &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(p.representative_tuples().len(), 1);
        match build_problem(&rho, 2, 7, ExtensionMode::FullMarginal) {
            Err(Error::Resource { required, available, .. }) => {
                assert_eq!((required, available), (16384, 4096));
            }
            other => panic!("expected a resource error, got {other:?}"),
        }
        assert!(build_problem(&rho, 2, 1, ExtensionMode::FullMarginal).is_err());
    }

    #[test]
    fn affine_projection_is_idempotent_and_exact() {
        let rho = DensityOperator::random(&[2, 2], 5, Ensemble::HilbertSchmidtMixed).unwrap();
        for mode in [ExtensionMode::FullMarginal, ExtensionMode::PerParty] {
            let p = build_problem(&rho, 2, 3, mode).unwrap();
            let h = rng::gaussian_matrix(&mut rng::stream(2, 0), 64, 64);
            let x = p.project_affine(&linalg::hermitian_part(&h));
            let again = p.project_affine(&x);
            assert!(linalg::frobenius(&(&again - &x)) < 1e-10);
            let chk = p.check(&x).unwrap();
            assert!(chk.invariance < 1e-10 && chk.marginal < 1e-10 && chk.trace < 1e-10);
        }
    }

    #[test]
    fn product_states_extend_at_every_level() {
        for (i, level) in [2, 3, 4].into_iter().enumerate() {
            let rho = product(i as u64);
            for mode in [ExtensionMode::FullMarginal, ExtensionMode::PerParty] {
                let p = build_problem(&rho, 2, level, mode).unwrap();
                let r = solve_feasibility(&p, &SolveOptions::default()).unwrap();
                assert_eq!(r.status, FeasibilityStatus::Feasible);
                assert!(p.check(r.extension.as_ref().unwrap()).unwrap().valid);
            }
        }
    }

    #[test]
    fn separable_mixtures_extend() {
        let a = product(3);
        let b = DensityOperator::basis(vec![2, 2], 3).unwrap();
        let rho = DensityOperator::mixture(&[0.5, 0.5], &[a, b]).unwrap();
        let p = build_problem(&rho, 2, 3, ExtensionMode::FullMarginal).unwrap();
        let r = solve_feasibility(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible, "{r:?}");
        let x = r.extension.unwrap();
        assert!(p.check(&x).unwrap().valid);
        // every lower level is reached by tracing out blocks
        let q = build_problem(&rho, 2, 2, ExtensionMode::FullMarginal).unwrap();
        assert!(q.check(&p.restrict(&x, 2).unwrap()).unwrap().valid);
    }

    #[test]
    fn maximally_entangled_state_has_no_two_copy_extension() {
        let phi = DensityOperator::max_entangled(2).unwrap();
        let p = build_problem(&phi, 2, 2, ExtensionMode::PerParty).unwrap();
        let r = solve_feasibility(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Infeasible);
        assert!(r.separation_residual.unwrap() > 1e-3);
        assert_eq!(r.certificate_validated, Some(true));
    }

    #[test]
    fn block_invariant_two_copy_extension_of_phi_exists() {
        // Φ on (A_1^1, A_2^2) and on (A_1^2, A_2^1) is swap invariant; it is
        // the only extension, so the solver may stall short of certifying it
        let phi = DensityOperator::max_entangled(2).unwrap();
        let p = build_problem(&phi, 2, 2, ExtensionMode::FullMarginal).unwrap();
        let both = phi.tensor(&phi).unwrap().reorder(&[0, 3, 2, 1]).unwrap();
        assert!(p.check(both.matrix()).unwrap().valid);
        let opts = SolveOptions {
            max_iter: 2000,
            ..Default::default()
        };
        let r = solve_feasibility(&p, &opts).unwrap();
        assert_ne!(r.status, FeasibilityStatus::Infeasible);
        let p3 = build_problem(&phi, 2, 3, ExtensionMode::FullMarginal).unwrap();
        let r3 = solve_feasibility(&p3, &SolveOptions::default()).unwrap();
        assert_eq!(r3.status, FeasibilityStatus::Infeasible);
        assert_eq!(r3.certificate_validated, Some(true));
    }

    #[test]
    fn level_formulas() {
        assert_eq!(required_level(2, &[2, 2], 1.0, Metric::Norm).unwrap(), 5);
        assert_eq!(required_level(2, &[2, 2], 1.0, Metric::Relent).unwrap(), 4);
        assert_eq!(required_level(2, &[2, 2], 1e9, Metric::Norm).unwrap(), 2);
        assert_eq!(required_level(3, &[2, 2, 2], 1e15, Metric::Relent).unwrap(), 3);
        assert_eq!(required_level(1, &[5], 0.1, Metric::Norm).unwrap(), 1);
        assert!(required_level(2, &[2, 2], 0.0, Metric::Norm).is_err());
        let b = extendible_distance_bounds(2, 4, &[2, 2]).unwrap();
        assert!((b.relent_bits - 1.0).abs() < 1e-15);
        assert!((b.norm - 1.1774).abs() < 1e-4);
        let b = extendible_distance_bounds(2, 6, &[3, 3]).unwrap();
        assert!((b.relent_bits - 0.7925).abs() < 1e-4);
        assert!(extendible_distance_bounds(2, 2, &[2, 2]).is_err());
        let far = extendible_distance_bounds(2, 1_000_000, &[2, 2]).unwrap();
        assert!(far.relent_bits < 1e-5 && far.norm < 1e-2);
    }

    #[test]
    fn detection_verdicts() {
        let opts = DetectOptions::default();
        let r = detect_entanglement(&product(7), 2.0, Metric::Relent, &opts).unwrap();
        assert_eq!((r.level, r.verdict), (3, Verdict::SeparableWithinEpsilon));
        let mixed = DensityOperator::maximally_mixed(vec![2, 2]);
        let r = detect_entanglement(&mixed, 2.0, Metric::Relent, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::SeparableWithinEpsilon);
        let phi = DensityOperator::max_entangled(2).unwrap();
        let r = detect_entanglement(&phi, 2.0, Metric::Relent, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::Entangled);
        match detect_entanglement(&phi, 0.01, Metric::Norm, &opts) {
            Err(Error::Resource { what, .. }) => assert!(what.contains("unreachable")),
            other => panic!("expected a resource error, got {other:?}"),
        }
    }

    #[test]
    fn extendible_states_are_close_to_their_separable_candidate() {
        let a = product(11);
        let b = product(12);
        let rho = DensityOperator::mixture(&[0.3, 0.7], &[a, b]).unwrap();
        let level = 4;
        let p = build_problem(&rho, 2, level, ExtensionMode::FullMarginal).unwrap();
        let r = solve_feasibility(&p, &SolveOptions::default()).unwrap();
        assert_eq!(r.status, FeasibilityStatus::Feasible);
        let sep = separable_candidate(&p, r.extension.as_ref().unwrap(), 2, 0).unwrap();
        let opts = SeesawOptions {
            restarts: 4,
            ..Default::default()
        };
        let d = restricted_relative_entropy(&rho, &sep, MeasurementClass::OneWayFull, &opts).unwrap();
        let bound = extendible_distance_bounds(2, level, &[2, 2]).unwrap();
        assert!(d.value <= bound.relent_bits + 1e-6);
    }
}
