//! De Finetti approximations of permutation-invariant states.
//!
//! Of `n` identical subsystems one (`A`) is isolated and the next
//! `m (k-1)` are cut into `m` blocks of `k-1`; leftovers are discarded.
//! Measuring every block but one with a product measurement `Q` leaves the
//! isolated system and the unmeasured block in an ensemble `{p_x, ρ^x}`,
//! and `Σ_x p_x (ρ^x_A)^{⊗k}` is the candidate.

use serde::Serialize;

use crate::entropy::{
    conditional_mutual_information, holevo_information, matrix_relative_entropy, mutual_information,
    EntropyValue,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, CMat, HermitianEigen, EIG_CUTOFF};
use crate::measurement::{
    best_projective_response, classical_quantum_state, conditional_operators, contract_tail,
    measure_leading, restricted_norm, restricted_relative_entropy, AdaptiveMeasurementTree,
    MeasurementClass, Povm, SeesawOptions,
};
use crate::rng;
use crate::state::{DensityOperator, Repair};
use crate::symmetry;

/// Invariance residual (Frobenius) tolerated on symmetric inputs.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Ensemble members with smaller weight are dropped.
pub const WEIGHT_CUTOFF: f64 = 1e-12;
const MARGINAL_TOL: f64 = 1e-8;
const MIXTURE_TOL: f64 = 1e-9;
const LOG_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupingLayout {
    pub n: usize,
    pub k: usize,
    /// Number of blocks, `⌊(n-1)/(k-1)⌋` (`n-1` when `k = 1`).
    pub m: usize,
    /// The system `A` that the candidate is built on.
    pub isolated: usize,
    /// `m` blocks of `k-1` consecutive indices.
    pub groups: Vec<Vec<usize>>,
    pub discarded: Vec<usize>,
}

impl GroupingLayout {
    /// Indices that survive discarding, ascending.
    pub fn kept(&self) -> Vec<usize> {
        let mut kept = vec![self.isolated];
        kept.extend(self.groups.iter().flatten());
        kept.sort_unstable();
        kept
    }
}

pub fn make_grouping(n: usize, k: usize) -> Result<GroupingLayout> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if k > n {
        return invalid(format!("k = {k} exceeds n = {n}"));
    }
    let size = k - 1;
    let m = if size == 0 { n - 1 } else { (n - 1) / size };
    let groups: Vec<Vec<usize>> = (0..m)
        .map(|g| (1 + g * size..1 + (g + 1) * size).collect())
        .collect();
    let discarded = (1 + m * size..n).collect();
    Ok(GroupingLayout {
        n,
        k,
        m,
        isolated: 0,
        groups,
        discarded,
    })
}

/// Product measurement on the blocks found by the greedy chain-rule search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QStar {
    /// One rank-one projective measurement per block, in block order.
    #[serde(skip)]
    pub povms: Vec<Povm>,
    /// `I(A;Z_ℓ|Z_{<ℓ})` in bits, in block order.
    pub chain: Vec<f64>,
    /// `I(A;Z_1…Z_m)`, the sum of `chain`.
    pub total: f64,
    /// Block left unmeasured (`B_1`); `Q` measures every other block.
    pub block_star: usize,
    /// `chain[block_star]`, the smallest chain term.
    pub score: f64,
}

fn kept_state(rho: &DensityOperator, layout: &GroupingLayout) -> Result<DensityOperator> {
    if rho.num_subsystems() != layout.n {
        return Err(Error::DimensionMismatch(format!(
            "layout for {} subsystems, state has {}",
            layout.n,
            rho.num_subsystems()
        )));
    }
    rho.partial_trace(&layout.kept())
}

fn check_group_symmetry(kept: &DensityOperator, layout: &GroupingLayout) -> Result<()> {
    let gens = symmetry::block_permutation_group(kept.num_subsystems(), &layout.groups);
    if gens.is_empty() {
        return Ok(());
    }
    let r = kept.permutation_residual(&gens)?;
    if r > SYMMETRY_TOL {
        return invalid(format!(
            "state is not invariant under block permutations (residual {r:.3e})"
        ));
    }
    Ok(())
}

/// `Σ_z p_z I(A;Z)_{ρ^z}` for conditional operators `tau[z]` on `A ⊗ B`
/// measured on `B` by the rank-one projectors of `(u, outcome_of)`.
struct BlockObjective<'a> {
    tau: &'a [CMat],
    da: usize,
    outcomes: usize,
}

impl BlockObjective<'_> {
    fn conditionals(&self, u: &CMat, outcome_of: &[usize]) -> Vec<Vec<CMat>> {
        let p = Povm::from_basis(u, outcome_of, self.outcomes);
        self.tau
            .iter()
            .map(|t| p.effects().iter().map(|e| contract_tail(t, self.da, e)).collect())
            .collect()
    }

    fn value(&self, omega: &[Vec<CMat>]) -> f64 {
        omega
            .iter()
            .map(|w| {
                let pz: f64 = w.iter().map(|x| linalg::trace(x).re).sum();
                if pz <= EIG_CUTOFF {
                    0.0
                } else {
                    holevo_information(w) + pz * pz.log2()
                }
            })
            .sum()
    }

    /// Derivative with respect to each projector: `Σ_z tr_A[(log2(ω_zb/p_zb) ⊗ 1) τ_z]`.
    fn coefficients(&self, omega: &[Vec<CMat>]) -> Vec<CMat> {
        let db = self.tau[0].nrows() / self.da;
        let mut g = vec![CMat::zeros(db, db); self.outcomes];
        for (t, w) in self.tau.iter().zip(omega) {
            for (b, wb) in w.iter().enumerate() {
                let p = linalg::trace(wb).re;
                if p <= EIG_CUTOFF {
                    continue;
                }
                let log = HermitianEigen::new(wb).map(|l| (l.max(LOG_FLOOR * p) / p).log2());
                g[b] += measure_leading(t, self.da, &log);
            }
        }
        g
    }

    /// Convex in the measurement, so each linearized best response is an ascent step.
    fn maximize(&self, mut u: CMat, mut outcome_of: Vec<usize>) -> (CMat, Vec<usize>, f64) {
        let mut omega = self.conditionals(&u, &outcome_of);
        let mut f = self.value(&omega);
        for _ in 0..200 {
            let g = self.coefficients(&omega);
            let Some((nu, no)) = best_projective_response(&u, &outcome_of, &g) else {
                break;
            };
            let nomega = self.conditionals(&nu, &no);
            let nf = self.value(&nomega);
            let stalled = nf <= f + 1e-13;
            if nf > f {
                (u, outcome_of, omega, f) = (nu, no, nomega, nf);
            }
            if stalled {
                break;
            }
        }
        (u, outcome_of, f)
    }
}

/// Greedy chain-rule construction: block `ℓ` gets the rank-one projective
/// measurement maximizing `I(A;Z_ℓ|Z_{<ℓ})` given the earlier blocks, then
/// the block with the smallest term is left unmeasured.
pub fn find_qstar(
    rho: &DensityOperator,
    layout: &GroupingLayout,
    restarts: usize,
    seed: u64,
) -> Result<QStar> {
    let kept = kept_state(rho, layout)?;
    check_group_symmetry(&kept, layout)?;
    if restarts == 0 {
        return invalid("at least one restart is needed");
    }
    if layout.k == 1 {
        return Ok(QStar {
            povms: vec![Povm::trivial(1); layout.m],
            chain: vec![0.0; layout.m],
            total: 0.0,
            block_star: 0,
            score: 0.0,
        });
    }
    let dims = kept.dims().to_vec();
    let da = dims[layout.isolated];
    let mut povms: Vec<Povm> = Vec::with_capacity(layout.m);
    let mut chain = Vec::with_capacity(layout.m);
    for l in 0..layout.m {
        let mut keep = vec![layout.isolated];
        keep.extend(layout.groups[..=l].iter().flatten());
        keep.sort_unstable();
        let prefix = kept.partial_trace(&keep)?;
        // groups are consecutive from index 1, so block j keeps its indices in `prefix`
        let tau = conditional_operators(&prefix, &layout.groups[..l], &povms)?;
        let db: usize = layout.groups[l].iter().map(|&i| dims[i]).product();
        let objective = BlockObjective {
            tau: &tau,
            da,
            outcomes: db,
        };
        let mut best: Option<(CMat, Vec<usize>, f64)> = None;
        for r in 0..restarts {
            let mut g = rng::stream(rng::derive_seed(seed, l as u64), r as u64);
            let u = if r == 0 {
                linalg::identity(db)
            } else {
                rng::haar_unitary(&mut g, db)
            };
            let cand = objective.maximize(u, (0..db).collect());
            if best.as_ref().is_none_or(|b| cand.2 > b.2) {
                best = Some(cand);
            }
        }
        let (u, outcome_of, f) = best.expect("restarts > 0");
        povms.push(Povm::from_basis(&u, &outcome_of, db));
        chain.push(f.max(0.0));
    }
    let (block_star, score) = chain
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    Ok(QStar {
        povms,
        total: chain.iter().sum(),
        chain,
        block_star,
        score,
    })
}

/// The terms of `I(A;Z_1…Z_m) = Σ_ℓ I(A;Z_ℓ|Z_{<ℓ})` computed on the
/// classical-quantum state, where `A` is everything not in `blocks`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRuleReport {
    pub terms: Vec<f64>,
    pub total: f64,
    /// `|Σ terms - total|`.
    pub residual: f64,
    pub min_term: f64,
    /// `log2 |A| / m`.
    pub pigeonhole_bound: f64,
    /// `min_term ≤ total/m ≤ log2|A|/m`, each to `1e-9`.
    pub holds: bool,
}

pub fn chain_rule_check(
    rho: &DensityOperator,
    blocks: &[Vec<usize>],
    povms: &[Povm],
) -> Result<ChainRuleReport> {
    let m = blocks.len();
    if m == 0 {
        return invalid("need at least one measured block");
    }
    let cq = classical_quantum_state(rho, blocks, povms)?;
    let na = cq.num_subsystems() - m;
    if na == 0 {
        return invalid("no unmeasured subsystem left");
    }
    let a: Vec<usize> = (0..na).collect();
    let da: usize = cq.dims()[..na].iter().product();
    let terms = (0..m)
        .map(|l| {
            let cond: Vec<usize> = (na..na + l).collect();
            conditional_mutual_information(&cq, &a, &[na + l], &cond)
        })
        .collect::<Result<Vec<_>>>()?;
    let z: Vec<usize> = (na..na + m).collect();
    let total = mutual_information(&cq, &a, &z)?;
    let min_term = terms.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = (da as f64).log2() / m as f64;
    let avg = total / m as f64;
    Ok(ChainRuleReport {
        residual: (terms.iter().sum::<f64>() - total).abs(),
        holds: min_term <= avg + 1e-9 && avg <= bound + 1e-9,
        terms,
        total,
        min_term,
        pigeonhole_bound: bound,
    })
}

/// `Σ_x p_x σ_x^{⊗k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeFinettiCandidate {
    pub k: usize,
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub components: Vec<DensityOperator>,
    /// Post-measurement states `ρ^x` on `A B_1`, aligned with `weights`.
    #[serde(skip)]
    pub conditionals: Vec<DensityOperator>,
    /// Largest Frobenius gap between single-system marginals of any `ρ^x`.
    pub marginal_residual: f64,
    /// `||Σ_x p_x ρ^x - ρ_{A B_1}||_F`.
    pub mixture_residual: f64,
}

impl DeFinettiCandidate {
    pub fn new(k: usize, weights: Vec<f64>, components: Vec<DensityOperator>) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return invalid("need one component per weight, and at least one");
        }
        if weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
            return invalid("weights must form a probability vector");
        }
        for s in &components {
            s.validate(crate::state::STATE_TOL)?;
            if s.dims() != components[0].dims() {
                return Err(Error::DimensionMismatch("components differ in dims".into()));
            }
        }
        Ok(Self {
            k,
            weights,
            components,
            conditionals: Vec::new(),
            marginal_residual: 0.0,
            mixture_residual: 0.0,
        })
    }

    pub fn assemble(&self) -> Result<DensityOperator> {
        let powers = self
            .components
            .iter()
            .map(|s| s.power(self.k))
            .collect::<Result<Vec<_>>>()?;
        DensityOperator::mixture(&self.weights, &powers)
    }
}

/// Candidate from measuring every block except `q.block_star` with `q`.
pub fn build_candidate(
    rho: &DensityOperator,
    k: usize,
    layout: &GroupingLayout,
    q: &QStar,
) -> Result<DeFinettiCandidate> {
    if layout.k != k {
        return invalid(format!("layout built for k = {}, asked for k = {k}", layout.k));
    }
    if q.povms.len() != layout.m {
        return invalid(format!("{} block measurements for {} blocks", q.povms.len(), layout.m));
    }
    let kept = kept_state(rho, layout)?;
    let (blocks, povms): (Vec<Vec<usize>>, Vec<Povm>) = layout
        .groups
        .iter()
        .zip(&q.povms)
        .enumerate()
        .filter(|(i, _)| *i != q.block_star)
        .map(|(_, (g, p))| (g.clone(), p.clone()))
        .unzip();
    let mut keep = vec![layout.isolated];
    if k > 1 {
        keep.extend(&layout.groups[q.block_star]);
    }
    keep.sort_unstable();
    let target = kept.partial_trace(&keep)?;
    let ops = if blocks.is_empty() {
        vec![target.matrix().clone()]
    } else {
        let mut all = keep.clone();
        all.extend(blocks.iter().flatten());
        all.sort_unstable();
        let sub = kept.partial_trace(&all)?;
        let rel: Vec<Vec<usize>> = blocks
            .iter()
            .map(|b| b.iter().map(|i| all.iter().position(|x| x == i).expect("kept")).collect())
            .collect();
        conditional_operators(&sub, &rel, &povms)?
    };

    let dims = target.dims().to_vec();
    let mut mixture = CMat::zeros(target.dim(), target.dim());
    let mut weights = Vec::new();
    let mut conditionals = Vec::new();
    for op in &ops {
        mixture += op;
        let p = linalg::trace(op).re;
        if p < WEIGHT_CUTOFF {
            continue;
        }
        let state = DensityOperator::from_matrix(
            dims.clone(),
            linalg::hermitian_part(&(op * c(1.0 / p))),
            Repair::Clamp,
        )?;
        weights.push(p);
        conditionals.push(state);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let mixture_residual = linalg::frobenius(&(mixture - target.matrix()));
    if mixture_residual > MIXTURE_TOL {
        return invalid(format!("ensemble does not average back to the state ({mixture_residual:.3e})"));
    }

    let a_pos = keep.iter().position(|&i| i == layout.isolated).expect("isolated kept");
    let mut marginal_residual = 0.0f64;
    let mut components = Vec::with_capacity(conditionals.len());
    for s in &conditionals {
        let a = s.partial_trace(&[a_pos])?;
        for j in 0..s.num_subsystems() {
            let other = s.partial_trace(&[j])?;
            marginal_residual = marginal_residual.max(linalg::frobenius(&(other.matrix() - a.matrix())));
        }
        components.push(a);
    }
    if marginal_residual > MARGINAL_TOL {
        return invalid(format!(
            "post-measurement marginals differ by {marginal_residual:.3e}; input is not symmetric"
        ));
    }
    Ok(DeFinettiCandidate {
        k,
        weights,
        components,
        conditionals,
        marginal_residual,
        mixture_residual,
    })
}

/// Right-hand sides of the de Finetti bounds for `n` systems of dimension `d_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremBounds {
    /// `(k-1)^2 log2 d_a / (n-k)` bits.
    pub relent_bits: f64,
    /// `sqrt(2 (k-1)^2 ln d_a / (n-k))`.
    pub norm: f64,
}

pub fn theorem_bounds(n: usize, k: usize, da: usize) -> Result<TheoremBounds> {
    if k == 0 || da == 0 {
        return invalid("k and the local dimension must be positive");
    }
    if k >= n {
        return invalid(format!("bounds need k < n, got k = {k}, n = {n}"));
    }
    let f = ((k - 1) * (k - 1)) as f64 / (n - k) as f64;
    Ok(TheoremBounds {
        relent_bits: f * (da as f64).log2(),
        norm: (2.0 * f * (da as f64).ln()).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random starts for each seesaw.
    pub restarts: usize,
    pub iterations: usize,
    /// Random starts for each block of the greedy measurement search.
    pub qstar_restarts: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 8,
            iterations: 200,
            qstar_restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub n: usize,
    pub k: usize,
    pub dim: usize,
    pub layout: GroupingLayout,
    pub qstar: QStar,
    pub candidate: DeFinettiCandidate,
    /// Seesaw lower bound on the one-way norm distance to the candidate.
    pub distance_estimate: f64,
    /// Seesaw lower bound on the one-way relative entropy to the candidate.
    pub relent_estimate: EntropyValue,
    pub bounds: TheoremBounds,
    pub pass: bool,
}

/// Checks that `ρ` is invariant under every permutation of its subsystems.
pub fn check_symmetric(rho: &DensityOperator) -> Result<()> {
    let dims = rho.dims();
    if dims.iter().any(|&d| d != dims[0]) {
        return invalid(format!("subsystems must be identical, got dims {dims:?}"));
    }
    let n = dims.len();
    let pts: Vec<usize> = (0..n).collect();
    let r = rho.permutation_residual(&symmetry::symmetric_group_on(n, &pts))?;
    if r > SYMMETRY_TOL {
        return invalid(format!("state is not permutation-invariant (residual {r:.3e})"));
    }
    Ok(())
}

pub fn verify_theorem(rho: &DensityOperator, k: usize, opts: &VerifyOptions) -> Result<TheoremReport> {
    check_symmetric(rho)?;
    let n = rho.num_subsystems();
    let dim = rho.dims()[0];
    let bounds = theorem_bounds(n, k, dim)?;
    let layout = make_grouping(n, k)?;
    let qstar = find_qstar(rho, &layout, opts.qstar_restarts, opts.seed)?;
    let candidate = build_candidate(rho, k, &layout, &qstar)?;
    let approx = candidate.assemble()?;
    let reduced = rho.partial_trace(&(0..k).collect::<Vec<_>>())?;
    let seesaw = SeesawOptions {
        restarts: opts.restarts,
        iterations: opts.iterations,
        seed: opts.seed,
        ..Default::default()
    };
    let distance = restricted_norm(&reduced, &approx, MeasurementClass::OneWayFull, &seesaw)?.value;
    let relent = restricted_relative_entropy(&reduced, &approx, MeasurementClass::OneWayFull, &seesaw)?.value;
    let relent_estimate = if relent.is_finite() {
        EntropyValue::Finite(relent)
    } else {
        EntropyValue::Infinite
    };
    let pass = distance <= bounds.norm + 1e-6 && relent <= bounds.relent_bits + 1e-6;
    Ok(TheoremReport {
        n,
        k,
        dim,
        layout,
        qstar,
        candidate,
        distance_estimate: distance,
        relent_estimate,
        bounds,
        pass,
    })
}

/// Both sides of the symmetry step for a `k`-party symmetric state `ρ^x`
/// and one-way measurement `Λ`:
/// `(k-1) D_k ≥ Σ_{ℓ=2}^k D_ℓ` with
/// `D_ℓ = D(Λ^{ℓ-1}⊗id(ρ_{1..ℓ}) ‖ Λ^{ℓ-1}(ρ_{1..ℓ-1}) ⊗ ρ_ℓ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryStepReport {
    pub lhs: f64,
    pub rhs: f64,
    pub terms: Vec<f64>,
    pub holds: bool,
}

pub fn symmetry_step_check(
    rho: &DensityOperator,
    tree: &AdaptiveMeasurementTree,
) -> Result<SymmetryStepReport> {
    if tree.dims() != rho.dims() {
        return Err(Error::DimensionMismatch(format!(
            "tree on {:?}, state on {:?}",
            tree.dims(),
            rho.dims()
        )));
    }
    let k = rho.num_subsystems();
    if k < 2 {
        return invalid("the step needs at least two parties");
    }
    let mut terms = Vec::with_capacity(k - 1);
    for l in 2..=k {
        let head = rho.partial_trace(&(0..l).collect::<Vec<_>>())?;
        let last = rho.partial_trace(&[l - 1])?;
        let mut d = 0.0;
        for (_, _, omega) in tree.frontier(head.matrix(), head.dims(), l - 1) {
            let p = linalg::trace(&omega).re;
            if p <= EIG_CUTOFF {
                continue;
            }
            d += p * matrix_relative_entropy(&(omega * c(1.0 / p)), last.matrix()).bits();
        }
        terms.push(d);
    }
    let lhs = (k - 1) as f64 * terms[k - 2];
    let rhs: f64 = terms.iter().sum();
    Ok(SymmetryStepReport {
        holds: lhs >= rhs - 1e-9,
        lhs,
        rhs,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;
    use crate::linalg::CVec;
    use crate::state::Ensemble;

    fn ghz(n: usize) -> DensityOperator {
        let d = 1 << n;
        let v = CVec::from_fn(d, |g, _| if g == 0 || g == d - 1 { c(1.0) } else { c(0.0) });
        DensityOperator::pure(vec![2; n], &v).unwrap()
    }

    fn symmetric_mixed(n: usize, seed: u64) -> DensityOperator {
        let pts: Vec<usize> = (0..n).collect();
        DensityOperator::random(&vec![2; n], seed, Ensemble::HilbertSchmidtMixed)
            .unwrap()
            .twirl(&symmetry::symmetric_group_on(n, &pts))
            .unwrap()
    }

    #[test]
    fn grouping_counts() {
        let g = make_grouping(7, 3).unwrap();
        assert_eq!((g.m, g.discarded.len()), (3, 0));
        assert_eq!(g.groups, vec![vec![1, 2], vec![3, 4], vec![5, 6]]);
        let g = make_grouping(8, 3).unwrap();
        assert_eq!((g.m, g.discarded.clone()), (3, vec![7]));
        for k in 2..6 {
            assert_eq!(make_grouping(k, k).unwrap().m, 1);
        }
        let g = make_grouping(5, 1).unwrap();
        assert_eq!((g.m, g.discarded.len()), (4, 4));
        assert!(make_grouping(3, 4).is_err());
    }

    #[test]
    fn grouping_invariants_hold_for_all_small_sizes() {
        for n in 1..20 {
            for k in 1..=n {
                let g = make_grouping(n, k).unwrap();
                assert_eq!(1 + g.m * (k - 1) + g.discarded.len(), n);
                if k > 1 {
                    assert!(g.m as f64 >= (n - k) as f64 / (k - 1) as f64);
                }
            }
        }
    }

    #[test]
    fn bound_values() {
        let b = theorem_bounds(4, 2, 2).unwrap();
        assert!((b.relent_bits - 0.5).abs() < 1e-15);
        assert!((b.norm - LN_2.sqrt()).abs() < 1e-15);
        assert!((b.norm - 0.83255).abs() < 1e-5);
        let b = theorem_bounds(10, 2, 2).unwrap();
        assert!((b.relent_bits - 0.125).abs() < 1e-15);
        assert!((b.norm - 0.41628).abs() < 1e-5);
        let b = theorem_bounds(5, 1, 3).unwrap();
        assert_eq!((b.relent_bits, b.norm), (0.0, 0.0));
        assert!(theorem_bounds(4, 4, 2).is_err());
    }

    #[test]
    fn decoupled_system_scores_zero() {
        let a = DensityOperator::random(&[2], 1, Ensemble::HilbertSchmidtMixed).unwrap();
        let t = DensityOperator::random(&[2], 2, Ensemble::HilbertSchmidtMixed).unwrap();
        let rho = a.tensor(&t.power(3).unwrap()).unwrap();
        let layout = make_grouping(4, 2).unwrap();
        let q = find_qstar(&rho, &layout, 2, 0).unwrap();
        assert!(q.chain.iter().all(|&v| v.abs() < 1e-10), "{q:?}");
        assert!(q.score.abs() < 1e-10);
    }

    #[test]
    fn greedy_chain_matches_classical_quantum_oracle() {
        let layout = make_grouping(4, 2).unwrap();
        for seed in 0..5 {
            let rho = symmetric_mixed(4, seed);
            let q = find_qstar(&rho, &layout, 3, seed).unwrap();
            assert!(q.score <= 1.0 / 3.0 + 1e-9);
            let oracle = chain_rule_check(&rho, &layout.groups, &q.povms).unwrap();
            for (a, b) in q.chain.iter().zip(&oracle.terms) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            assert!(oracle.residual < 1e-9 && oracle.holds);
        }
    }

    #[test]
    fn ghz_score_obeys_pigeonhole() {
        let layout = make_grouping(4, 2).unwrap();
        let q = find_qstar(&ghz(4), &layout, 3, 1).unwrap();
        assert!(q.score <= 1.0 / 3.0 + 1e-9);
        // measuring Z on the first block reveals A completely
        assert!((q.chain[0] - 1.0).abs() < 1e-8, "{q:?}");
    }

    #[test]
    fn non_invariant_input_is_rejected() {
        let rho = DensityOperator::random(&[2, 2, 2], 3, Ensemble::HilbertSchmidtMixed).unwrap();
        let layout = make_grouping(3, 2).unwrap();
        assert!(find_qstar(&rho, &layout, 1, 0).is_err());
    }

    #[test]
    fn product_input_gives_exact_candidate() {
        let s = DensityOperator::random(&[2], 4, Ensemble::HilbertSchmidtMixed).unwrap();
        let rho = s.power(5).unwrap();
        let layout = make_grouping(5, 2).unwrap();
        let q = find_qstar(&rho, &layout, 2, 0).unwrap();
        let cand = build_candidate(&rho, 2, &layout, &q).unwrap();
        for comp in &cand.components {
            assert!(linalg::frobenius(&(comp.matrix() - s.matrix())) < 1e-10);
        }
        let target = s.power(2).unwrap();
        assert!(linalg::frobenius(&(cand.assemble().unwrap().matrix() - target.matrix())) < 1e-10);
    }

    #[test]
    fn random_symmetric_candidates_are_valid_states() {
        for seed in 0..4 {
            let rho = DensityOperator::random(&[2; 4], seed, Ensemble::bose_symmetric()).unwrap();
            let layout = make_grouping(4, 2).unwrap();
            let q = find_qstar(&rho, &layout, 2, seed).unwrap();
            let cand = build_candidate(&rho, 2, &layout, &q).unwrap();
            assert!((cand.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            cand.assemble().unwrap().validate(crate::state::STATE_TOL).unwrap();
            assert!(cand.mixture_residual <= 1e-9 && cand.marginal_residual <= 1e-8);
        }
    }

    #[test]
    fn three_fold_candidates_from_pair_blocks() {
        let rho = DensityOperator::random(&[2; 5], 9, Ensemble::bose_symmetric()).unwrap();
        let layout = make_grouping(5, 3).unwrap();
        let q = find_qstar(&rho, &layout, 2, 0).unwrap();
        assert!(q.score <= 0.5 + 1e-9);
        let cand = build_candidate(&rho, 3, &layout, &q).unwrap();
        assert_eq!(cand.components[0].dims(), &[2]);
        assert_eq!(cand.assemble().unwrap().dims(), &[2, 2, 2]);
    }

    #[test]
    fn product_states_verify_with_zero_estimates() {
        let s = DensityOperator::random(&[2], 11, Ensemble::HilbertSchmidtMixed).unwrap();
        let r = verify_theorem(&s.power(4).unwrap(), 2, &VerifyOptions::default()).unwrap();
        assert!(r.distance_estimate < 1e-9 && r.relent_estimate.bits() < 1e-9);
        assert!(r.pass);
    }

    #[test]
    fn ghz5_verifies() {
        let r = verify_theorem(&ghz(5), 2, &VerifyOptions::default()).unwrap();
        assert!(r.pass, "{r:?}");
        let b = theorem_bounds(5, 2, 2).unwrap();
        assert_eq!(r.bounds, b);
    }

    #[test]
    fn symmetry_step_holds_on_candidate_conditionals() {
        let rho = DensityOperator::random(&[2; 5], 2, Ensemble::bose_symmetric()).unwrap();
        let layout = make_grouping(5, 3).unwrap();
        let q = find_qstar(&rho, &layout, 2, 0).unwrap();
        let cand = build_candidate(&rho, 3, &layout, &q).unwrap();
        for (i, s) in cand.conditionals.iter().enumerate() {
            let tree = AdaptiveMeasurementTree::random(&[2, 2, 2], 2, i as u64).unwrap();
            let r = symmetry_step_check(s, &tree).unwrap();
            assert!(r.holds, "{r:?}");
        }
    }
}
