//! Randomized sweeps over the exact identities and inequalities, one
//! independent seed per trial.

use rayon::prelude::*;
use serde::Serialize;

use crate::definetti::{chain_rule_check, verify_theorem, VerifyOptions};
use crate::entropy::{pinsker_check, relative_entropy, EntropyValue};
use crate::error::{invalid, Result};
use crate::measurement::{
    chain_identity_residual, parallel_to_full_embedding, seesaw, AdaptiveMeasurementTree, MeasurementClass, Objective,
    Povm, SeesawOptions, Witness,
};
use crate::rng;
use crate::state::{random_state, DensityOperator, Ensemble};

/// Tolerance of every exact identity checked here.
pub const IDENTITY_TOL: f64 = 1e-9;

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return invalid("at least one trial is needed");
    }
    Ok(())
}

fn max_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainIdentitySweep {
    pub trials: usize,
    /// Trials with an infinite side, where no comparison is made.
    pub skipped: usize,
    pub max_residual: f64,
    pub max_split_residual: f64,
    pub max_conditional_residual: f64,
    pub pass: bool,
}

/// Random three-qubit states against random depth-3 binary one-way trees.
pub fn chain_identity_sweep(trials: usize, seed: u64) -> Result<ChainIdentitySweep> {
    check_trials(trials)?;
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive_seed(seed, t);
            let rho = random_state(&[2, 2, 2], s, Ensemble::HilbertSchmidtMixed)?;
            let tree = AdaptiveMeasurementTree::random(&[2, 2, 2], 2, rng::derive_seed(s, 1))?;
            chain_identity_residual(&tree, &rho)
        })
        .collect::<Result<Vec<_>>>()?;
    let compared: Vec<_> = reports.iter().filter(|r| r.residual.is_some()).collect();
    let max_residual = max_of(compared.iter().filter_map(|r| r.residual));
    let max_split_residual = max_of(compared.iter().filter_map(|r| r.split_residual));
    let max_conditional_residual = max_of(compared.iter().filter_map(|r| r.conditional_residual));
    Ok(ChainIdentitySweep {
        trials,
        skipped: trials - compared.len(),
        max_residual,
        max_split_residual,
        max_conditional_residual,
        pass: max_residual <= IDENTITY_TOL
            && max_split_residual <= IDENTITY_TOL
            && max_conditional_residual <= IDENTITY_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PigeonholeSweep {
    pub trials: usize,
    pub blocks: usize,
    /// `log2 |A| / m`.
    pub bound: f64,
    pub max_min_term: f64,
    pub max_chain_residual: f64,
    pub pass: bool,
}

/// Random permutation-invariant states on `A` plus `blocks` single-qubit
/// blocks, each block measured by an independent random projective
/// measurement.
pub fn pigeonhole_sweep(trials: usize, blocks: usize, seed: u64) -> Result<PigeonholeSweep> {
    check_trials(trials)?;
    if blocks == 0 {
        return invalid("at least one block is needed");
    }
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive_seed(seed, t);
            let rho = random_state(&vec![2; blocks + 1], s, Ensemble::bose_symmetric())?;
            let mut g = rng::stream(s, 1);
            let povms: Vec<Povm> = (0..blocks).map(|_| Povm::random_projective(2, 2, &mut g)).collect();
            let groups: Vec<Vec<usize>> = (1..=blocks).map(|b| vec![b]).collect();
            chain_rule_check(&rho, &groups, &povms)
        })
        .collect::<Result<Vec<_>>>()?;
    let bound = 1.0 / blocks as f64;
    let max_min_term = reports.iter().map(|r| r.min_term).fold(f64::NEG_INFINITY, f64::max);
    let max_chain_residual = max_of(reports.iter().map(|r| r.residual));
    Ok(PigeonholeSweep {
        trials,
        blocks,
        bound,
        max_min_term,
        max_chain_residual,
        pass: max_min_term <= bound + IDENTITY_TOL && max_chain_residual <= IDENTITY_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PinskerSweep {
    pub trials: usize,
    /// Smallest `D(ρ‖σ) - ||ρ-σ||_1^2 / (2 ln 2)`.
    pub min_pinsker_slack: f64,
    /// Largest `D(M(ρ)‖M(σ)) - D(ρ‖σ)`.
    pub max_processing_gain: f64,
    pub pass: bool,
}

/// Random full-rank pairs on one or two qubits (alternating) with a random
/// POVM of 2 to 4 outcomes.
pub fn pinsker_sweep(trials: usize, seed: u64) -> Result<PinskerSweep> {
    check_trials(trials)?;
    let rows = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive_seed(seed, t);
            let dims: Vec<usize> = if t % 2 == 0 { vec![2] } else { vec![2, 2] };
            let rho = random_state(&dims, rng::derive_seed(s, 0), Ensemble::HilbertSchmidtMixed)?;
            let sigma = random_state(&dims, rng::derive_seed(s, 1), Ensemble::HilbertSchmidtMixed)?;
            let p = pinsker_check(&rho, &sigma)?;
            let povm = Povm::random(rho.dim(), 2 + (t as usize % 3), &mut rng::stream(s, 2));
            let whole = DensityOperator::from_matrix(vec![rho.dim()], rho.matrix().clone(), crate::state::Repair::Reject)?;
            let whole_s = DensityOperator::from_matrix(vec![rho.dim()], sigma.matrix().clone(), crate::state::Repair::Reject)?;
            let measured = relative_entropy(&povm.apply(&whole)?, &povm.apply(&whole_s)?)?;
            let gain = match measured {
                EntropyValue::Finite(v) => v - p.lhs,
                EntropyValue::Infinite => f64::INFINITY,
            };
            Ok((p.lhs - p.rhs, gain))
        })
        .collect::<Result<Vec<_>>>()?;
    let min_pinsker_slack = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let max_processing_gain = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(PinskerSweep {
        trials,
        min_pinsker_slack,
        max_processing_gain,
        pass: min_pinsker_slack >= -IDENTITY_TOL && max_processing_gain <= IDENTITY_TOL,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NestingSweep {
    pub trials: usize,
    /// Largest `|parallel value on ρ⊗|0⟩⟨0| - LO value on ρ|`.
    pub max_embedding_gap: f64,
    /// Smallest seeded one-way-full value minus the parallel value.
    pub min_full_excess: f64,
    pub pass: bool,
}

/// Random two-qubit pairs: the LO seesaw witness, extended by a trivially
/// measured ancilla, is a parallel witness for `ρ⊗|0⟩⟨0|` vs `σ⊗|0⟩⟨0|`;
/// its embedding seeds the one-way-full seesaw.
pub fn nesting_sweep(trials: usize, seed: u64, opts: &SeesawOptions) -> Result<NestingSweep> {
    check_trials(trials)?;
    let ancilla = DensityOperator::basis(vec![2], 0)?;
    let rows = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive_seed(seed, t);
            let rho = random_state(&[2, 2], rng::derive_seed(s, 0), Ensemble::HilbertSchmidtMixed)?;
            let sigma = random_state(&[2, 2], rng::derive_seed(s, 1), Ensemble::HilbertSchmidtMixed)?;
            let o = SeesawOptions { seed: s, ..*opts };
            let lo = seesaw(&rho, &sigma, MeasurementClass::Lo, Objective::Norm, &o, None)?;
            let Witness::Product(povms) = lo.witness.clone() else {
                return invalid("LO seesaw returned a non-product witness");
            };
            let parallel = Witness::product_with_trivial_last_party(povms, 2);
            let rho3 = rho.tensor(&ancilla)?;
            let sigma3 = sigma.tensor(&ancilla)?;
            let par_value = parallel.norm_value(&rho3, &sigma3)?;
            let Witness::Parallel { upstream, last } = &parallel else { unreachable!() };
            let tree = parallel_to_full_embedding(upstream, last, rho3.dims())?;
            let full = seesaw(&rho3, &sigma3, MeasurementClass::OneWayFull, Objective::Norm, &o, Some(&tree))?;
            Ok(((par_value - lo.value).abs(), full.value - par_value))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_embedding_gap = max_of(rows.iter().map(|r| r.0));
    let min_full_excess = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(NestingSweep {
        trials,
        max_embedding_gap,
        min_full_excess,
        pass: max_embedding_gap <= IDENTITY_TOL && min_full_excess >= 0.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremSweep {
    pub trials: usize,
    pub n: usize,
    pub k: usize,
    pub failures: usize,
    pub max_distance: f64,
    pub max_relent_bits: f64,
    pub norm_bound: f64,
    pub relent_bound_bits: f64,
    pub pass: bool,
}

/// Random Bose-symmetric qubit states on `n` systems against the candidate
/// built for `k`.
pub fn theorem_sweep(trials: usize, n: usize, k: usize, opts: &VerifyOptions) -> Result<TheoremSweep> {
    check_trials(trials)?;
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = rng::derive_seed(opts.seed, t);
            let rho = random_state(&vec![2; n], s, Ensemble::bose_symmetric())?;
            verify_theorem(&rho, k, &VerifyOptions { seed: s, ..*opts })
        })
        .collect::<Result<Vec<_>>>()?;
    let bounds = &reports[0].bounds;
    Ok(TheoremSweep {
        trials,
        n,
        k,
        failures: reports.iter().filter(|r| !r.pass).count(),
        max_distance: max_of(reports.iter().map(|r| r.distance_estimate)),
        max_relent_bits: max_of(reports.iter().map(|r| r.relent_estimate.bits())),
        norm_bound: bounds.norm,
        relent_bound_bits: bounds.relent_bits,
        pass: reports.iter().all(|r| r.pass),
    })
}
