use serde::Serialize;

use super::AdaptiveMeasurementTree;
use crate::entropy::{kl_divergence, EntropyValue};
use crate::error::{Error, Result};
use crate::linalg::{self, c, EIG_CUTOFF};
use crate::state::DensityOperator;

/// Both sides of the chain identity for a one-way measurement `Λ^k` and
/// its reductions `Λ^ℓ`:
///
/// `D(Λ^k(ρ) ‖ Λ^k(ρ_1⊗…⊗ρ_k)) = Σ_{ℓ=2}^k D(Λ^ℓ(ρ_{1..ℓ}) ‖ Λ^ℓ(ρ_{1..ℓ-1}⊗ρ_ℓ))`,
///
/// together with the two per-step identities it is assembled from. Each
/// residual is `None` when an infinite term makes the comparison
/// meaningless.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainIdentityReport {
    pub lhs: EntropyValue,
    pub rhs: EntropyValue,
    pub residual: Option<f64>,
    /// Max over `ℓ` of `|D(Λ^ℓ ‖ ⊗_{i≤ℓ}) - D(Λ^{ℓ-1} ‖ ⊗_{i<ℓ}) - Σ_x p_x D(M_x(ρ^x_ℓ) ‖ M_x(ρ_ℓ))|`.
    pub split_residual: Option<f64>,
    /// Max over `ℓ` of `|D(Λ^ℓ(ρ_{1..ℓ}) ‖ Λ^ℓ(ρ_{1..ℓ-1}⊗ρ_ℓ)) - Σ_x p_x D(M_x(ρ^x_ℓ) ‖ M_x(ρ_ℓ))|`.
    pub conditional_residual: Option<f64>,
}

fn add(a: EntropyValue, b: EntropyValue) -> EntropyValue {
    match (a, b) {
        (EntropyValue::Finite(x), EntropyValue::Finite(y)) => EntropyValue::Finite(x + y),
        _ => EntropyValue::Infinite,
    }
}

fn gap(a: EntropyValue, b: EntropyValue) -> Option<f64> {
    Some((a.finite()? - b.finite()?).abs())
}

fn worst(acc: Option<Option<f64>>, r: Option<f64>) -> Option<Option<f64>> {
    // outer None: no comparison made yet; inner None: a comparison was skipped
    match (acc, r) {
        (None, r) => Some(r),
        (Some(Some(a)), Some(b)) => Some(Some(a.max(b))),
        (Some(a), None) => Some(a),
        (Some(None), Some(b)) => Some(Some(b)),
    }
}

fn measured_divergence(
    tree: &AdaptiveMeasurementTree,
    rho: &DensityOperator,
    sigma: &DensityOperator,
) -> Result<EntropyValue> {
    let p = tree.distribution(rho)?;
    let q = tree.distribution(sigma)?;
    Ok(kl_divergence(&p.probs, &q.probs))
}

/// `ρ_{0..l}` with `l = 0` giving the trivial scalar state.
fn prefix(rho: &DensityOperator, l: usize) -> Result<DensityOperator> {
    rho.partial_trace(&(0..l).collect::<Vec<_>>())
}

pub fn chain_identity_residual(
    tree: &AdaptiveMeasurementTree,
    rho: &DensityOperator,
) -> Result<ChainIdentityReport> {
    if tree.dims() != rho.dims() {
        return Err(Error::DimensionMismatch(format!(
            "tree on parties {:?}, state on {:?}",
            tree.dims(),
            rho.dims()
        )));
    }
    let k = tree.parties();
    let singles: Vec<DensityOperator> = (0..k)
        .map(|i| rho.partial_trace(&[i]))
        .collect::<Result<_>>()?;

    // full[ℓ] = D(Λ^ℓ(ρ_{1..ℓ}) ‖ Λ^ℓ(ρ_1⊗…⊗ρ_ℓ)), ℓ = 1..k
    let mut full = Vec::with_capacity(k);
    let mut product = singles[0].clone();
    for l in 1..=k {
        if l > 1 {
            product = product.tensor(&singles[l - 1])?;
        }
        full.push(measured_divergence(&tree.reduced(l)?, &prefix(rho, l)?, &product)?);
    }

    let mut rhs = EntropyValue::Finite(0.0);
    let mut split = None;
    let mut conditional = None;
    for l in 2..=k {
        let head = prefix(rho, l)?;
        let reduced = tree.reduced(l)?;
        let cond_ref = prefix(rho, l - 1)?.tensor(&singles[l - 1])?;
        let d_cond = measured_divergence(&reduced, &head, &cond_ref)?;
        rhs = add(rhs, d_cond);

        // Σ_x p_x D(M_x(ρ^x_ℓ) ‖ M_x(ρ_ℓ)) over histories x of the first ℓ-1 steps
        let mut per_history = EntropyValue::Finite(0.0);
        let last = &singles[l - 1];
        for (_, node, omega) in reduced.frontier(head.matrix(), head.dims(), l - 1) {
            let p = linalg::trace(&omega).re;
            if p <= EIG_CUTOFF {
                continue;
            }
            let cond = omega * c(1.0 / p);
            let d = kl_divergence(
                &node.povm.probabilities_of(&cond),
                &node.povm.probabilities_of(last.matrix()),
            );
            per_history = add(per_history, match d {
                EntropyValue::Finite(v) => EntropyValue::Finite(p * v),
                EntropyValue::Infinite => EntropyValue::Infinite,
            });
        }
        conditional = worst(conditional, gap(d_cond, per_history));
        split = worst(split, gap(full[l - 1], add(full[l - 2], per_history)));
    }

    let lhs = full[k - 1];
    Ok(ChainIdentityReport {
        lhs,
        rhs,
        residual: gap(lhs, rhs),
        split_residual: split.unwrap_or(Some(0.0)),
        conditional_residual: conditional.unwrap_or(Some(0.0)),
    })
}
