//! Seesaw lower bounds on restricted norms and restricted relative entropy.
//!
//! Non-leaf nodes are rank-one projective measurements `{u_i u_i†}` whose
//! columns are grouped into outcomes; each distinct node (a "slot") is moved
//! along the unitary group by Riemannian gradient steps with backtracking
//! on the true objective. For the norm objective every history-dependent
//! leaf is replaced by the Helstrom measurement of its conditional
//! difference, which is optimal given the upstream nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    best_projective_response, contract_tail, measure_leading, AdaptiveMeasurementTree, MeasurementClass, MeasurementNode,
    Povm, Witness, DEFAULT_OUTCOME_CAP,
};
use crate::entropy::{kl_divergence, EntropyValue};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, index, CMat, HermitianEigen};
use crate::rng;
use crate::state::DensityOperator;

/// Stand-in for `+∞` inside the ascent when a measured divergence has a
/// support violation; reported values are always recomputed exactly.
pub const INFINITE_SURROGATE: f64 = 1e3;

const MAX_LEAVES: usize = 1 << 20;
const PROB_FLOOR: f64 = 1e-15;
const ARMIJO: f64 = 1e-4;
const MAX_STEP: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `||p - q||_1`
    Norm,
    /// `D(p ‖ q)` in bits
    RelativeEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeesawOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub outcome_cap: usize,
    /// Relative improvement below which an ascent is considered converged.
    pub tol: f64,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            iterations: 200,
            seed: 0,
            outcome_cap: DEFAULT_OUTCOME_CAP,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeesawResult {
    /// Value of `witness` recomputed from its own statistics; `+∞` for a
    /// divergence with a support violation.
    pub value: f64,
    pub witness: Witness,
    /// Whether the best run stopped before exhausting its iteration budget.
    pub converged: bool,
    /// `None` when the seeded run won.
    pub best_restart: Option<usize>,
    pub iterations: usize,
}

pub fn restricted_norm(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    class: MeasurementClass,
    opts: &SeesawOptions,
) -> Result<SeesawResult> {
    seesaw(rho, sigma, class, Objective::Norm, opts, None)
}

pub fn restricted_relative_entropy(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    class: MeasurementClass,
    opts: &SeesawOptions,
) -> Result<SeesawResult> {
    seesaw(rho, sigma, class, Objective::RelativeEntropy, opts, None)
}

/// Best witness found over `opts.restarts` random starts, plus one run
/// started from `seed_tree` (one-way-full class only).
pub fn seesaw(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    class: MeasurementClass,
    objective: Objective,
    opts: &SeesawOptions,
    seed_tree: Option<&AdaptiveMeasurementTree>,
) -> Result<SeesawResult> {
    if rho.dims() != sigma.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            rho.dims(),
            sigma.dims()
        )));
    }
    if rho.num_subsystems() == 0 {
        return invalid("states need at least one subsystem");
    }
    if opts.outcome_cap < 2 {
        return invalid("outcome cap must be at least 2");
    }
    if seed_tree.is_some() && class != MeasurementClass::OneWayFull {
        return invalid("seeding is supported for the one-way-full class only");
    }
    if class == MeasurementClass::All {
        return global(rho, sigma, objective, opts);
    }
    let problem = Problem {
        dims: rho.dims().to_vec(),
        rho: rho.matrix(),
        sigma: sigma.matrix(),
        objective,
        class,
        helstrom_leaf: objective == Objective::Norm && class != MeasurementClass::Lo,
    };

    let mut runs: Vec<(Option<usize>, Run)> = Vec::new();
    if let Some(tree) = seed_tree {
        if tree.dims() != rho.dims() {
            return Err(Error::DimensionMismatch(format!(
                "seed tree on {:?}, states on {:?}",
                tree.dims(),
                rho.dims()
            )));
        }
        let start = problem.seeded_start(tree)?;
        runs.push((None, problem.ascend(start, opts)));
    }
    let random: Vec<Result<Run>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(opts.seed, r as u64);
            let start = problem.random_start(opts.outcome_cap, &mut rng)?;
            Ok(problem.ascend(start, opts))
        })
        .collect();
    for (r, run) in random.into_iter().enumerate() {
        runs.push((Some(r), run?));
    }

    let mut best: Option<SeesawResult> = None;
    for (restart, run) in runs {
        let witness = problem.witness(&run.start)?;
        let value = problem.exact_value(&witness, rho, sigma)?;
        let better = match &best {
            None => true,
            Some(b) => value > b.value,
        };
        if better {
            best = Some(SeesawResult {
                value,
                witness,
                converged: run.converged,
                best_restart: restart,
                iterations: run.iterations,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("no restarts requested".into()))
}

fn global(
    rho: &DensityOperator,
    sigma: &DensityOperator,
    objective: Objective,
    opts: &SeesawOptions,
) -> Result<SeesawResult> {
    match objective {
        Objective::Norm => {
            let witness = Witness::Global(Povm::helstrom(&(rho.matrix() - sigma.matrix())));
            let value = witness.norm_value(rho, sigma)?;
            Ok(SeesawResult {
                value,
                witness,
                converged: true,
                best_restart: None,
                iterations: 0,
            })
        }
        Objective::RelativeEntropy => {
            let d = rho.dim();
            let r = rho.with_dims(vec![d])?;
            let s = sigma.with_dims(vec![d])?;
            let inner = seesaw(&r, &s, MeasurementClass::OneWayFull, objective, opts, None)?;
            let Witness::Tree(tree) = inner.witness else {
                unreachable!("one-way-full runs produce trees")
            };
            Ok(SeesawResult {
                witness: Witness::Global(tree.root().povm.clone()),
                ..inner
            })
        }
    }
}

#[derive(Clone)]
struct Slot {
    u: CMat,
    outcome_of: Vec<usize>,
}

impl Slot {
    fn projectors(&self, outcomes: usize) -> Vec<CMat> {
        let d = self.u.nrows();
        let mut p = vec![CMat::zeros(d, d); outcomes];
        for (i, &a) in self.outcome_of.iter().enumerate() {
            let col = self.u.column(i);
            p[a] += &col * col.adjoint();
        }
        p
    }
}

/// Slot assignment and unitaries for one ascent.
#[derive(Clone)]
struct Start {
    radix: Vec<usize>,
    /// `slot_of[level][history]`; empty for Helstrom leaves.
    slot_of: Vec<Vec<usize>>,
    slots: Vec<Slot>,
}

struct Run {
    start: Start,
    converged: bool,
    iterations: usize,
}

struct Problem<'a> {
    dims: Vec<usize>,
    rho: &'a CMat,
    sigma: &'a CMat,
    objective: Objective,
    class: MeasurementClass,
    helstrom_leaf: bool,
}

struct Eval {
    /// `omega[s][level][history]` for `s = 0` (ρ) and `s = 1` (σ).
    omega: [Vec<Vec<CMat>>; 2],
    /// Leaf projectors per history, when Helstrom leaves are in use.
    leaves: Vec<Vec<CMat>>,
    p: Vec<f64>,
    q: Vec<f64>,
    value: f64,
}

impl Problem<'_> {
    fn k(&self) -> usize {
        self.dims.len()
    }

    fn layout(&self, radix: &[usize]) -> Result<Vec<Vec<usize>>> {
        let k = self.k();
        if index::product(radix) > MAX_LEAVES {
            return Err(Error::Resource {
                what: "measurement tree leaves".into(),
                required: radix.iter().map(|&r| r as u128).product(),
                available: MAX_LEAVES as u128,
            });
        }
        let mut next = 0;
        let mut slot_of = Vec::with_capacity(k);
        for j in 0..k {
            let histories = index::product(&radix[..j]);
            let row: Vec<usize> = if j == k - 1 && self.helstrom_leaf {
                Vec::new()
            } else {
                match self.class {
                    MeasurementClass::Lo => vec![j; histories],
                    MeasurementClass::OneWayParallel if j < k - 1 => vec![j; histories],
                    MeasurementClass::OneWayParallel => (0..histories).map(|h| k - 1 + h).collect(),
                    _ => (0..histories).map(|h| next + h).collect(),
                }
            };
            next = match self.class {
                MeasurementClass::OneWayFull => next + row.len(),
                _ => row.iter().map(|s| s + 1).max().unwrap_or(next).max(next),
            };
            slot_of.push(row);
        }
        Ok(slot_of)
    }

    fn random_start(&self, cap: usize, rng: &mut rng::Rng) -> Result<Start> {
        let k = self.k();
        let radix: Vec<usize> = (0..k)
            .map(|j| {
                if j == k - 1 && self.helstrom_leaf {
                    2
                } else {
                    self.dims[j].min(cap)
                }
            })
            .collect();
        let slot_of = self.layout(&radix)?;
        let level_of = slot_levels(&slot_of);
        let slots = level_of
            .iter()
            .map(|&j| {
                let d = self.dims[j];
                Slot {
                    u: rng::haar_unitary(rng, d),
                    outcome_of: (0..d).map(|i| i % radix[j]).collect(),
                }
            })
            .collect();
        Ok(Start {
            radix,
            slot_of,
            slots,
        })
    }

    fn seeded_start(&self, tree: &AdaptiveMeasurementTree) -> Result<Start> {
        let k = self.k();
        let mut radix = tree.radices();
        if self.helstrom_leaf {
            radix[k - 1] = 2;
        }
        let slot_of = self.layout(&radix)?;
        let mut slots = vec![None; slot_levels(&slot_of).len()];
        let mut digits = Vec::new();
        for (j, row) in slot_of.iter().enumerate() {
            for (h, &s) in row.iter().enumerate() {
                digits.resize(j, 0);
                index::digits(h, &radix[..j], &mut digits);
                let slot = match tree.node(&digits) {
                    Some(node) => slot_from_povm(&node.povm)?,
                    None => Slot {
                        u: linalg::identity(self.dims[j]),
                        outcome_of: vec![0; self.dims[j]],
                    },
                };
                slots[s] = Some(slot);
            }
        }
        Ok(Start {
            radix,
            slot_of,
            slots: slots.into_iter().map(|s| s.expect("every slot visited")).collect(),
        })
    }

    fn projectors(&self, start: &Start, eval_leaves: &[Vec<CMat>], j: usize, h: usize) -> Vec<CMat> {
        if j == self.k() - 1 && self.helstrom_leaf {
            eval_leaves[h].clone()
        } else {
            start.slots[start.slot_of[j][h]].projectors(start.radix[j])
        }
    }

    fn evaluate(&self, start: &Start) -> Eval {
        let k = self.k();
        let mut omega: [Vec<Vec<CMat>>; 2] = [vec![vec![self.rho.clone()]], vec![vec![self.sigma.clone()]]];
        for j in 0..k - 1 {
            let histories = omega[0][j].len();
            let mut next = [Vec::new(), Vec::new()];
            for h in 0..histories {
                let proj = self.projectors(start, &[], j, h);
                for (s, out) in next.iter_mut().enumerate() {
                    for p in &proj {
                        out.push(measure_leading(&omega[s][j][h], self.dims[j], p));
                    }
                }
            }
            let [a, b] = next;
            omega[0].push(a);
            omega[1].push(b);
        }
        let last = k - 1;
        let histories = omega[0][last].len();
        let leaves: Vec<Vec<CMat>> = if self.helstrom_leaf {
            (0..histories)
                .map(|h| {
                    let delta = &omega[0][last][h] - &omega[1][last][h];
                    Povm::helstrom(&delta).effects().to_vec()
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut p = Vec::with_capacity(histories * start.radix[last]);
        let mut q = Vec::with_capacity(histories * start.radix[last]);
        for h in 0..histories {
            for e in self.projectors(start, &leaves, last, h) {
                p.push(linalg::inner(&e, &omega[0][last][h]).re);
                q.push(linalg::inner(&e, &omega[1][last][h]).re);
            }
        }
        let value = match self.objective {
            Objective::Norm => p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum(),
            Objective::RelativeEntropy => match kl_divergence(&p, &q) {
                EntropyValue::Finite(v) => v,
                EntropyValue::Infinite => INFINITE_SURROGATE,
            },
        };
        Eval {
            omega,
            leaves,
            p,
            q,
            value,
        }
    }

    /// `∂f/∂p` and `∂f/∂q` per leaf outcome.
    fn weights(&self, eval: &Eval) -> [Vec<f64>; 2] {
        match self.objective {
            Objective::Norm => {
                let wp: Vec<f64> = eval
                    .p
                    .iter()
                    .zip(&eval.q)
                    .map(|(a, b)| {
                        let d = a - b;
                        if d > 0.0 {
                            1.0
                        } else if d < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let wq = wp.iter().map(|w| -w).collect();
                [wp, wq]
            }
            Objective::RelativeEntropy => {
                let ln2 = std::f64::consts::LN_2;
                let mut wp = Vec::with_capacity(eval.p.len());
                let mut wq = Vec::with_capacity(eval.p.len());
                for (&a, &b) in eval.p.iter().zip(&eval.q) {
                    let a = a.max(PROB_FLOOR);
                    let b = b.max(PROB_FLOOR);
                    wp.push((a / b).log2() + 1.0 / ln2);
                    wq.push(-a / (b * ln2));
                }
                [wp, wq]
            }
        }
    }

    /// Coefficient `G_a` of each slot projector `P_a` in the linearized
    /// objective `Σ_i w_p(i) p_i + w_q(i) q_i`, summed over every node of the slot.
    fn coefficients(&self, start: &Start, eval: &Eval) -> Vec<Vec<CMat>> {
        let k = self.k();
        let weights = self.weights(eval);
        let mut coeff: Vec<Vec<CMat>> = start
            .slots
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let r = start.radix[slot_level(&start.slot_of, i)];
                vec![CMat::zeros(s.u.nrows(), s.u.nrows()); r]
            })
            .collect();
        for (s, w) in weights.iter().enumerate() {
            // back[h'] for histories h' at level j+1: Σ over tails of weight ⊗ projectors
            let mut back: Vec<CMat> = w.iter().map(|&x| CMat::from_element(1, 1, c(x))).collect();
            for j in (0..k).rev() {
                let histories = eval.omega[s][j].len();
                let r = start.radix[j];
                let has_slots = !start.slot_of[j].is_empty();
                let mut up = Vec::with_capacity(if j > 0 { histories } else { 0 });
                for h in 0..histories {
                    let proj = self.projectors(start, &eval.leaves, j, h);
                    if has_slots {
                        let slot = start.slot_of[j][h];
                        for a in 0..proj.len() {
                            let g = contract_tail(&eval.omega[s][j][h], self.dims[j], &back[h * r + a]);
                            coeff[slot][a] += linalg::hermitian_part(&g);
                        }
                    }
                    if j > 0 {
                        let mut acc = linalg::kron(&proj[0], &back[h * r]);
                        for (a, p) in proj.iter().enumerate().skip(1) {
                            acc += linalg::kron(p, &back[h * r + a]);
                        }
                        up.push(acc);
                    }
                }
                back = up;
            }
        }
        coeff
    }

    /// Riemannian gradient `K_s = Σ_a [G_a, P_a]` per slot.
    fn gradient(&self, start: &Start, eval: &Eval) -> Vec<CMat> {
        self.coefficients(start, eval)
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let slot = &start.slots[i];
                let proj = slot.projectors(g.len());
                let d = slot.u.nrows();
                let mut k = CMat::zeros(d, d);
                for (ga, pa) in g.iter().zip(&proj) {
                    k += ga * pa - pa * ga;
                }
                k
            })
            .collect()
    }

    /// Block-coordinate sweep for the norm objective: with the signs of
    /// `p - q` frozen the objective is bounded below by a function linear
    /// in each slot, which is maximized slot by slot. Never decreases the value.
    fn linear_sweep(&self, mut start: Start, mut eval: Eval) -> (Start, Eval) {
        for i in 0..start.slots.len() {
            let coeff = self.coefficients(&start, &eval);
            let cur = &start.slots[i];
            let Some((u, outcome_of)) = best_projective_response(&cur.u, &cur.outcome_of, &coeff[i]) else {
                continue;
            };
            let mut trial = start.clone();
            trial.slots[i] = Slot { u, outcome_of };
            let e = self.evaluate(&trial);
            if e.value >= eval.value {
                start = trial;
                eval = e;
            }
        }
        (start, eval)
    }

    fn step(&self, start: &Start, grads: &[CMat], t: f64) -> Start {
        let mut next = start.clone();
        for (slot, g) in next.slots.iter_mut().zip(grads) {
            slot.u = linalg::cayley(&(g * c(t))) * &slot.u;
        }
        next
    }

    fn ascend(&self, mut start: Start, opts: &SeesawOptions) -> Run {
        let mut eval = self.evaluate(&start);
        let mut t = 1.0;
        let mut converged = false;
        let mut iterations = 0;
        for _ in 0..opts.iterations {
            iterations += 1;
            if self.objective == Objective::RelativeEntropy && eval.value >= INFINITE_SURROGATE {
                converged = true;
                break;
            }
            let before = eval.value;
            if self.objective == Objective::Norm {
                (start, eval) = self.linear_sweep(start, eval);
            }
            let grads = self.gradient(&start, &eval);
            let gnorm: f64 = grads.iter().map(|g| linalg::frobenius(g).powi(2)).sum::<f64>().sqrt();
            if gnorm < 1e-12 && eval.value <= before {
                converged = true;
                break;
            }
            // Armijo backtracking; the slope along the step is |K|^2
            let mut accepted = None;
            for attempt in 0..50 {
                let trial = self.step(&start, &grads, t);
                let e = self.evaluate(&trial);
                if e.value - eval.value >= ARMIJO * t * gnorm * gnorm && e.value > eval.value {
                    accepted = Some((trial, e));
                    if attempt == 0 {
                        t = (t * 2.0).min(MAX_STEP);
                    }
                    break;
                }
                t *= 0.5;
            }
            if let Some((trial, e)) = accepted {
                start = trial;
                eval = e;
            }
            let gain = eval.value - before;
            if gain <= opts.tol * (1.0 + eval.value.abs()) {
                converged = true;
                break;
            }
        }
        // freeze Helstrom leaves of the final iterate into the witness
        if self.helstrom_leaf {
            start = self.freeze_leaves(start, &eval);
        }
        Run {
            start,
            converged,
            iterations,
        }
    }

    fn freeze_leaves(&self, mut start: Start, eval: &Eval) -> Start {
        let k = self.k();
        let base = start.slots.len();
        let mut row = Vec::with_capacity(eval.leaves.len());
        for (h, leaf) in eval.leaves.iter().enumerate() {
            let d = self.dims[k - 1];
            let eig = HermitianEigen::new(&leaf[0]);
            let outcome_of = eig.values.iter().map(|&l| if l > 0.5 { 0 } else { 1 }).collect();
            start.slots.push(Slot {
                u: eig.vectors,
                outcome_of,
            });
            row.push(base + h);
            debug_assert_eq!(start.slots[base + h].u.nrows(), d);
        }
        start.slot_of[k - 1] = row;
        start
    }

    fn witness(&self, start: &Start) -> Result<Witness> {
        let k = self.k();
        let povm = |j: usize, h: usize| -> Povm {
            let s = &start.slots[start.slot_of[j][h]];
            Povm::from_basis(&s.u, &s.outcome_of, start.radix[j])
        };
        Ok(match self.class {
            MeasurementClass::Lo => Witness::Product((0..k).map(|j| povm(j, 0)).collect()),
            MeasurementClass::OneWayParallel => Witness::Parallel {
                upstream: (0..k - 1).map(|j| povm(j, 0)).collect(),
                last: (0..start.slot_of[k - 1].len()).map(|h| povm(k - 1, h)).collect(),
            },
            MeasurementClass::OneWayFull => {
                fn build(
                    j: usize,
                    h: usize,
                    k: usize,
                    start: &Start,
                    povm: &dyn Fn(usize, usize) -> Povm,
                ) -> MeasurementNode {
                    MeasurementNode {
                        povm: povm(j, h),
                        children: if j + 1 == k {
                            Vec::new()
                        } else {
                            (0..start.radix[j])
                                .map(|a| build(j + 1, h * start.radix[j] + a, k, start, povm))
                                .collect()
                        },
                    }
                }
                let cap = start.radix.iter().copied().max().unwrap_or(1);
                Witness::Tree(AdaptiveMeasurementTree::with_outcome_cap(
                    self.dims.clone(),
                    build(0, 0, k, start, &povm),
                    cap,
                )?)
            }
            MeasurementClass::All => unreachable!("handled by the global path"),
        })
    }

    fn exact_value(&self, w: &Witness, rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
        match self.objective {
            Objective::Norm => w.norm_value(rho, sigma),
            Objective::RelativeEntropy => Ok(w.relative_entropy_value(rho, sigma)?.bits()),
        }
    }
}

fn slot_level(slot_of: &[Vec<usize>], slot: usize) -> usize {
    slot_of
        .iter()
        .position(|row| row.contains(&slot))
        .expect("slot belongs to some level")
}

/// Level of each slot, in slot order.
fn slot_levels(slot_of: &[Vec<usize>]) -> Vec<usize> {
    let n = slot_of.iter().flatten().map(|s| s + 1).max().unwrap_or(0);
    let mut level = vec![0; n];
    for (j, row) in slot_of.iter().enumerate() {
        for &s in row {
            level[s] = j;
        }
    }
    level
}

/// Eigenbasis of a projective POVM with each vector tagged by its effect.
fn slot_from_povm(povm: &Povm) -> Result<Slot> {
    if !povm.is_projective(1e-8) {
        return invalid("seed measurements must be projective");
    }
    let d = povm.dim();
    let mut cols = Vec::with_capacity(d);
    let mut outcome_of = Vec::with_capacity(d);
    for (a, e) in povm.effects().iter().enumerate() {
        let eig = HermitianEigen::new(e);
        for (i, &l) in eig.values.iter().enumerate() {
            if l > 0.5 {
                cols.push(eig.vectors.column(i).into_owned());
                outcome_of.push(a);
            }
        }
    }
    if cols.len() != d {
        return invalid(format!("projective seed has total rank {} on dimension {d}", cols.len()));
    }
    let u = CMat::from_columns(&cols);
    Ok(Slot { u, outcome_of })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{trace_distance, Ensemble};

    fn opts(restarts: usize) -> SeesawOptions {
        SeesawOptions {
            restarts,
            iterations: 200,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn equal_states_give_zero() {
        let rho = DensityOperator::random(&[2, 2], 1, Ensemble::HilbertSchmidtMixed).unwrap();
        for class in [MeasurementClass::Lo, MeasurementClass::OneWayParallel, MeasurementClass::OneWayFull] {
            let r = restricted_norm(&rho, &rho, class, &opts(3)).unwrap();
            assert!(r.value.abs() < 1e-12);
            let d = restricted_relative_entropy(&rho, &rho, class, &opts(3)).unwrap();
            assert!(d.value.abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_product_states_are_perfectly_distinguished_locally() {
        let a = DensityOperator::basis(vec![2, 2], 0).unwrap();
        let b = DensityOperator::basis(vec![2, 2], 3).unwrap();
        let r = restricted_norm(&a, &b, MeasurementClass::Lo, &opts(5)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{} {} {}", r.value, r.iterations, r.converged);
    }

    #[test]
    fn global_class_is_trace_norm() {
        let rho = DensityOperator::random(&[2, 2], 4, Ensemble::HilbertSchmidtMixed).unwrap();
        let sigma = DensityOperator::random(&[2, 2], 5, Ensemble::HilbertSchmidtMixed).unwrap();
        let r = restricted_norm(&rho, &sigma, MeasurementClass::All, &opts(1)).unwrap();
        assert!((r.value - trace_distance(&rho, &sigma).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn values_are_below_trace_norm_and_reproduced_by_witness() {
        let rho = DensityOperator::random(&[2, 2], 6, Ensemble::HilbertSchmidtMixed).unwrap();
        let sigma = DensityOperator::random(&[2, 2], 7, Ensemble::HilbertSchmidtMixed).unwrap();
        let tn = trace_distance(&rho, &sigma).unwrap();
        for class in [MeasurementClass::Lo, MeasurementClass::OneWayParallel, MeasurementClass::OneWayFull] {
            let r = restricted_norm(&rho, &sigma, class, &opts(4)).unwrap();
            assert!(r.value <= tn + 1e-9);
            assert_eq!(r.witness.class(), class);
            assert!((r.witness.norm_value(&rho, &sigma).unwrap() - r.value).abs() < 1e-15);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let rho = DensityOperator::random(&[2, 2], 8, Ensemble::HilbertSchmidtMixed).unwrap();
        let sigma = DensityOperator::maximally_mixed(vec![2, 2]);
        let a = restricted_relative_entropy(&rho, &sigma, MeasurementClass::OneWayFull, &opts(4)).unwrap();
        let b = restricted_relative_entropy(&rho, &sigma, MeasurementClass::OneWayFull, &opts(4)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.witness, b.witness);
    }

    #[test]
    fn maximally_entangled_vs_mixed_matches_grid_search() {
        // grid over Alice's projective qubit basis; Bob answers with the
        // Helstrom measurement of each conditional difference
        let phi = DensityOperator::max_entangled(2).unwrap();
        let mixed = DensityOperator::maximally_mixed(vec![2, 2]);
        let mut oracle: f64 = 0.0;
        let steps = 24;
        for ti in 0..=steps {
            for pi in 0..steps {
                let th = std::f64::consts::PI * ti as f64 / steps as f64;
                let ph = 2.0 * std::f64::consts::PI * pi as f64 / steps as f64;
                let v0 = crate::linalg::CVec::from_vec(vec![
                    c((th / 2.0).cos()),
                    crate::linalg::C64::from_polar((th / 2.0).sin(), ph),
                ]);
                let p0 = crate::linalg::outer(&v0);
                let p1 = linalg::identity(2) - &p0;
                let mut total = 0.0;
                for e in [p0, p1] {
                    let big = linalg::kron(&e, &linalg::identity(2));
                    let cond = |m: &CMat| {
                        crate::state::partial_trace_matrix(&(&big * m), &[2, 2], &[1]).unwrap().1
                    };
                    total += linalg::trace_norm(&linalg::hermitian_part(
                        &(cond(phi.matrix()) - cond(mixed.matrix())),
                    ));
                }
                oracle = oracle.max(total);
            }
        }
        let r = restricted_norm(&phi, &mixed, MeasurementClass::OneWayFull, &opts(5)).unwrap();
        assert!(r.value > 0.0 && r.value <= 1.5 + 1e-12);
        assert!(r.value >= oracle - 1e-6, "{} vs {oracle}", r.value);
    }

    #[test]
    fn relative_entropy_obeys_pinsker_and_data_processing() {
        for s in 0..4 {
            let rho = DensityOperator::random(&[2, 2], 20 + s, Ensemble::HilbertSchmidtMixed).unwrap();
            let sigma = DensityOperator::random(&[2, 2], 40 + s, Ensemble::HilbertSchmidtMixed).unwrap();
            let n = restricted_norm(&rho, &sigma, MeasurementClass::OneWayFull, &opts(4)).unwrap();
            let d_same = n.witness.relative_entropy_value(&rho, &sigma).unwrap().bits();
            assert!(d_same >= n.value.powi(2) / (2.0 * std::f64::consts::LN_2) - 1e-9);
            let d = restricted_relative_entropy(&rho, &sigma, MeasurementClass::OneWayFull, &opts(4)).unwrap();
            let full = crate::entropy::relative_entropy(&rho, &sigma).unwrap().bits();
            assert!(d.value <= full + 1e-9);
        }
    }

    #[test]
    fn seeded_full_run_does_not_lose_to_its_seed() {
        let rho = DensityOperator::random(&[2, 2, 2], 31, Ensemble::HilbertSchmidtMixed).unwrap();
        let sigma = DensityOperator::random(&[2, 2, 2], 32, Ensemble::HilbertSchmidtMixed).unwrap();
        let par = restricted_norm(&rho, &sigma, MeasurementClass::OneWayParallel, &opts(3)).unwrap();
        let tree = par.witness.to_tree(rho.dims()).unwrap();
        assert!((Witness::Tree(tree.clone()).norm_value(&rho, &sigma).unwrap() - par.value).abs() < 1e-12);
        let full = seesaw(&rho, &sigma, MeasurementClass::OneWayFull, Objective::Norm, &opts(0), Some(&tree)).unwrap();
        assert!(full.value >= par.value - 1e-12);
    }
}

#[cfg(test)]
mod gradient_tests {
    use super::*;
    use crate::state::Ensemble;

    fn check(class: MeasurementClass, objective: Objective, dims: &[usize]) {
        let rho = DensityOperator::random(dims, 1, Ensemble::HilbertSchmidtMixed).unwrap();
        let sigma = DensityOperator::random(dims, 2, Ensemble::HilbertSchmidtMixed).unwrap();
        let problem = Problem {
            dims: dims.to_vec(),
            rho: rho.matrix(),
            sigma: sigma.matrix(),
            objective,
            class,
            helstrom_leaf: objective == Objective::Norm && class != MeasurementClass::Lo,
        };
        let mut r = rng::stream(5, 0);
        let start = problem.random_start(DEFAULT_OUTCOME_CAP, &mut r).unwrap();
        let eval = problem.evaluate(&start);
        let grads = problem.gradient(&start, &eval);
        let predicted: f64 = grads.iter().map(|g| linalg::frobenius(g).powi(2)).sum();
        let h = 1e-6;
        let up = problem.evaluate(&problem.step(&start, &grads, h)).value;
        let down = problem.evaluate(&problem.step(&start, &grads, -h)).value;
        let fd = (up - down) / (2.0 * h);
        assert!(
            (fd - predicted).abs() <= 1e-5 * (1.0 + predicted),
            "{class:?} {objective:?}: finite difference {fd} vs {predicted}"
        );
    }

    #[test]
    fn riemannian_gradient_matches_finite_differences() {
        for class in [MeasurementClass::Lo, MeasurementClass::OneWayParallel, MeasurementClass::OneWayFull] {
            for objective in [Objective::Norm, Objective::RelativeEntropy] {
                check(class, objective, &[2, 2]);
                check(class, objective, &[2, 3, 2]);
            }
        }
    }
}
