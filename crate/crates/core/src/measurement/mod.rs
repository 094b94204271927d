//! POVMs, measurement channels, one-way LOCC trees and restricted norms.
//!
//! A [`Povm`] doubles as its measurement channel `ω ↦ Σ_x |x⟩⟨x| tr(ω M_x)`.
//! Trees measure the subsystems of a state in index order, party `j` being
//! subsystem `j`.

mod chain;
mod seesaw;
mod tree;
mod witness;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, CMat, HermitianEigen};
use crate::rng::{self, Rng};
use crate::state::{reorder_matrix, DensityOperator, STATE_TOL};

pub use chain::{chain_identity_residual, ChainIdentityReport};
pub use seesaw::{
    restricted_norm, restricted_relative_entropy, seesaw, Objective, SeesawOptions, SeesawResult,
    INFINITE_SURROGATE,
};
pub use tree::{AdaptiveMeasurementTree, MeasurementNode, OutcomeDistribution};
pub use witness::{parallel_to_full_embedding, read_witness, write_witness, Witness};

/// Default cap on the number of outcomes of a single tree node.
pub const DEFAULT_OUTCOME_CAP: usize = 6;

/// Tolerance on `Σ_x M_x = 1`.
pub const COMPLETENESS_TOL: f64 = 1e-9;

/// Measurement classes, ordered by inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasurementClass {
    /// Local measurements, outcomes combined classically.
    Lo,
    /// All but the last party measure independently; the last one adapts.
    OneWayParallel,
    /// Every party adapts to all earlier outcomes.
    OneWayFull,
    /// Every global measurement.
    All,
}

impl MeasurementClass {
    pub fn contains(self, other: Self) -> bool {
        other <= self
    }

    pub fn name(self) -> &'static str {
        match self {
            MeasurementClass::Lo => "lo",
            MeasurementClass::OneWayParallel => "one-way-parallel",
            MeasurementClass::OneWayFull => "one-way-full",
            MeasurementClass::All => "all",
        }
    }
}

impl std::str::FromStr for MeasurementClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lo" => Ok(Self::Lo),
            "one-way-parallel" | "parallel" => Ok(Self::OneWayParallel),
            "one-way-full" | "full" => Ok(Self::OneWayFull),
            "all" => Ok(Self::All),
            _ => invalid(format!("unknown measurement class `{s}`")),
        }
    }
}

/// Finite list of PSD effects summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<CMat>,
}

impl Povm {
    pub fn new(effects: Vec<CMat>) -> Result<Self> {
        let povm = Self { effects };
        povm.validate()?;
        Ok(povm)
    }

    pub(crate) fn from_parts(effects: Vec<CMat>) -> Self {
        Self { effects }
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.effects.first() else {
            return invalid("POVM has no effects");
        };
        let d = first.nrows();
        let mut sum = CMat::zeros(d, d);
        for (a, e) in self.effects.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "effect {a} is {}x{}, expected {d}x{d}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            if !linalg::is_hermitian(e, STATE_TOL) {
                return invalid(format!("effect {a} is not Hermitian"));
            }
            let lmin = HermitianEigen::new(e).min();
            if lmin < -STATE_TOL {
                return invalid(format!("effect {a} has eigenvalue {lmin:e}"));
            }
            sum += e;
        }
        let dev = linalg::frobenius(&(sum - linalg::identity(d)));
        if dev > COMPLETENESS_TOL {
            return invalid(format!("effects sum to identity only within {dev:e}"));
        }
        Ok(())
    }

    /// Single-outcome measurement `{1}`.
    pub fn trivial(d: usize) -> Self {
        Self::from_parts(vec![linalg::identity(d)])
    }

    pub fn computational(d: usize) -> Self {
        Self::from_parts(
            (0..d)
                .map(|i| {
                    let mut e = CMat::zeros(d, d);
                    e[(i, i)] = c(1.0);
                    e
                })
                .collect(),
        )
    }

    /// Rank-one projectors onto the columns of the unitary `u`; column `i`
    /// is reported as outcome `outcome_of[i]`.
    pub fn from_basis(u: &CMat, outcome_of: &[usize], outcomes: usize) -> Self {
        let d = u.nrows();
        let mut effects = vec![CMat::zeros(d, d); outcomes];
        for (i, &a) in outcome_of.iter().enumerate() {
            let col = u.column(i);
            effects[a] += &col * col.adjoint();
        }
        Self::from_parts(effects)
    }

    /// Two-outcome measurement `{P, 1 - P}`.
    pub fn binary(p: CMat) -> Self {
        let q = linalg::identity(p.nrows()) - &p;
        Self::from_parts(vec![p, q])
    }

    /// Optimal two-outcome measurement for the sign of `delta`; the zero
    /// eigenspace goes to outcome 0.
    pub fn helstrom(delta: &CMat) -> Self {
        Self::binary(linalg::nonnegative_projector(delta))
    }

    /// Random POVM: `E_a = S^{-1/2} G_a S^{-1/2}` for Wishart `G_a`.
    pub fn random(d: usize, outcomes: usize, rng: &mut Rng) -> Self {
        let gs: Vec<CMat> = (0..outcomes)
            .map(|_| {
                let x = rng::gaussian_matrix(rng, d, d);
                &x * x.adjoint()
            })
            .collect();
        let s = gs.iter().fold(CMat::zeros(d, d), |acc, g| acc + g);
        let s_inv_half = HermitianEigen::new(&s).map(|l| 1.0 / l.sqrt());
        Self::from_parts(
            gs.iter()
                .map(|g| linalg::hermitian_part(&(&s_inv_half * g * &s_inv_half)))
                .collect(),
        )
    }

    /// Rank-one projective measurement in a Haar-random basis, columns
    /// assigned round-robin to `outcomes` outcomes.
    pub fn random_projective(d: usize, outcomes: usize, rng: &mut Rng) -> Self {
        let u = rng::haar_unitary(rng, d);
        let outcome_of: Vec<usize> = (0..d).map(|i| i % outcomes).collect();
        Self::from_basis(&u, &outcome_of, outcomes)
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[CMat] {
        &self.effects
    }

    /// Whether every effect is an orthogonal projector.
    pub fn is_projective(&self, tol: f64) -> bool {
        self.effects
            .iter()
            .all(|e| linalg::frobenius(&(e * e - e)) <= tol)
    }

    /// `tr(ω M_x)` for an operator on the POVM's space.
    pub fn probabilities_of(&self, omega: &CMat) -> Vec<f64> {
        self.effects
            .iter()
            .map(|e| linalg::inner(e, omega).re)
            .collect()
    }

    pub fn probabilities(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        self.check_dim(rho.dim())?;
        Ok(self.probabilities_of(rho.matrix()))
    }

    /// The measurement channel: a diagonal state on the outcome register.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let p = self.probabilities(rho)?;
        DensityOperator::diagonal(vec![p.len()], &clip_probabilities(&p))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "POVM on dimension {} applied to dimension {d}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Round tiny negative probabilities from floating-point error up to zero.
pub(crate) fn clip_probabilities(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&x| x.max(0.0)).collect()
}

/// `tr_1[(E ⊗ 1) ω]` where the first tensor factor has dimension `d0`.
pub fn measure_leading(omega: &CMat, d0: usize, effect: &CMat) -> CMat {
    let r = omega.nrows() / d0;
    let mut out = CMat::zeros(r, r);
    for i in 0..d0 {
        for j in 0..d0 {
            let e = effect[(j, i)];
            if e.norm_sqr() == 0.0 {
                continue;
            }
            out += omega.view((i * r, j * r), (r, r)) * e;
        }
    }
    out
}

/// `tr_rest[(1 ⊗ B) ω]` where the first factor has dimension `d0`.
pub(crate) fn contract_tail(omega: &CMat, d0: usize, b: &CMat) -> CMat {
    let r = omega.nrows() / d0;
    CMat::from_fn(d0, d0, |x, y| {
        let block = omega.view((x * r, y * r), (r, r));
        let mut s = linalg::ZERO;
        for u in 0..r {
            for v in 0..r {
                s += b[(u, v)] * block[(v, u)];
            }
        }
        s
    })
}

/// Rank-one projective measurement `{u_i u_i†}` (column `i` in outcome
/// `outcome_of[i]`) with larger `Σ_a tr(P_a G_a)`, reached by pairwise
/// re-diagonalization; `None` if no sweep improves the score.
pub(crate) fn best_projective_response(
    u: &CMat,
    outcome_of: &[usize],
    g: &[CMat],
) -> Option<(CMat, Vec<usize>)> {
    let score = |u: &CMat, outcome_of: &[usize]| -> f64 {
        outcome_of
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let col = u.column(i);
                (col.adjoint() * &g[a] * col)[(0, 0)].re
            })
            .sum()
    };
    let initial = score(u, outcome_of);
    let mut cur = (u.clone(), outcome_of.to_vec());
    let mut best = initial;
    let r = g.len();
    for _ in 0..4 {
        let mut changed = false;
        for a in 0..r {
            for b in a + 1..r {
                let idx: Vec<usize> = (0..cur.1.len())
                    .filter(|&i| cur.1[i] == a || cur.1[i] == b)
                    .collect();
                if idx.is_empty() {
                    continue;
                }
                let v = CMat::from_columns(&idx.iter().map(|&i| cur.0.column(i).into_owned()).collect::<Vec<_>>());
                let diff = v.adjoint() * (&g[a] - &g[b]) * &v;
                let eig = HermitianEigen::new(&linalg::hermitian_part(&diff));
                let w = &v * &eig.vectors;
                let mut next = cur.clone();
                for (n, &i) in idx.iter().enumerate() {
                    next.0.set_column(i, &w.column(n));
                    next.1[i] = if eig.values[n] > 0.0 { a } else { b };
                }
                let s = score(&next.0, &next.1);
                if s > best + 1e-15 {
                    cur = next;
                    best = s;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (best > initial + 1e-15).then_some(cur)
}

/// Unnormalized conditional operators `tr_S[(E_z ⊗ 1) ρ]` on the
/// unmeasured subsystems (in ascending order), one per joint outcome of
/// `povms[i]` acting on `blocks[i]`. Joint outcomes are row-major.
pub fn conditional_operators(
    rho: &DensityOperator,
    blocks: &[Vec<usize>],
    povms: &[Povm],
) -> Result<Vec<CMat>> {
    if blocks.len() != povms.len() {
        return invalid(format!("{} blocks but {} POVMs", blocks.len(), povms.len()));
    }
    let dims = rho.dims();
    let mut measured: Vec<usize> = Vec::new();
    for (b, povm) in blocks.iter().zip(povms) {
        let bd: usize = b.iter().map(|&i| dims.get(i).copied().unwrap_or(0)).product();
        if b.is_empty() || bd != povm.dim() {
            return Err(Error::DimensionMismatch(format!(
                "block {b:?} of dimension {bd} measured by a POVM on dimension {}",
                povm.dim()
            )));
        }
        measured.extend(b);
    }
    let rest: Vec<usize> = (0..dims.len()).filter(|i| !measured.contains(i)).collect();
    let mut order = measured.clone();
    order.extend(&rest);
    let (_, m) = reorder_matrix(rho.matrix(), dims, &order)?;
    let mut ops = vec![m];
    for povm in povms {
        let mut next = Vec::with_capacity(ops.len() * povm.num_outcomes());
        for omega in &ops {
            for e in povm.effects() {
                next.push(measure_leading(omega, povm.dim(), e));
            }
        }
        ops = next;
    }
    Ok(ops)
}

/// The classical-quantum state `Σ_z ω_z ⊗ |z⟩⟨z|` with the unmeasured
/// subsystems first and one classical register per block.
pub fn classical_quantum_state(
    rho: &DensityOperator,
    blocks: &[Vec<usize>],
    povms: &[Povm],
) -> Result<DensityOperator> {
    let ops = conditional_operators(rho, blocks, povms)?;
    let q = ops[0].nrows();
    let radices: Vec<usize> = povms.iter().map(Povm::num_outcomes).collect();
    let nz: usize = radices.iter().product();
    let mut m = CMat::zeros(q * nz, q * nz);
    // row-major over (quantum, z): index = x * nz + z
    for (z, w) in ops.iter().enumerate() {
        for x in 0..q {
            for y in 0..q {
                m[(x * nz + z, y * nz + z)] = w[(x, y)];
            }
        }
    }
    let measured: Vec<usize> = blocks.iter().flatten().copied().collect();
    let mut dims: Vec<usize> = (0..rho.num_subsystems())
        .filter(|i| !measured.contains(i))
        .map(|i| rho.dims()[i])
        .collect();
    dims.extend(&radices);
    DensityOperator::from_matrix(dims, linalg::hermitian_part(&m), crate::state::Repair::Reject)
}
