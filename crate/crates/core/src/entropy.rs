//! Entropies, relative entropy and mutual informations, all in bits.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMat, HermitianEigen, EIG_CUTOFF};
use crate::state::DensityOperator;

/// Support leakage `tr(ρ (1 - Π_σ))` above which `D(ρ‖σ)` is infinite.
pub const SUPPORT_TOL: f64 = 1e-9;

/// A value in bits that may be `+∞` when a support condition fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "bits", rename_all = "lowercase")]
pub enum EntropyValue {
    Finite(f64),
    Infinite,
}

impl EntropyValue {
    pub fn bits(self) -> f64 {
        match self {
            EntropyValue::Finite(v) => v,
            EntropyValue::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, EntropyValue::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            EntropyValue::Finite(v) => Some(v),
            EntropyValue::Infinite => None,
        }
    }
}

fn eta(x: f64) -> f64 {
    if x > EIG_CUTOFF {
        -x * x.log2()
    } else {
        0.0
    }
}

/// `S(ρ) = -Σ λ log2 λ` over eigenvalues above the cutoff.
pub fn von_neumann(rho: &DensityOperator) -> f64 {
    matrix_entropy(rho.matrix())
}

/// Entropy of an unnormalized PSD matrix's spectrum, `-Σ λ log2 λ`.
pub fn matrix_entropy(m: &CMat) -> f64 {
    HermitianEigen::new(m).values.into_iter().map(eta).sum()
}

pub fn shannon(p: &[f64]) -> f64 {
    p.iter().copied().map(eta).sum()
}

/// Classical relative entropy `Σ p log2(p/q)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> EntropyValue {
    debug_assert_eq!(p.len(), q.len());
    let mut leak = 0.0;
    let mut d = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if qi <= EIG_CUTOFF {
            leak += pi.max(0.0);
        } else if pi > EIG_CUTOFF {
            d += pi * (pi / qi).log2();
        }
    }
    if leak > SUPPORT_TOL {
        EntropyValue::Infinite
    } else {
        EntropyValue::Finite(d)
    }
}

/// `D(ρ‖σ) = tr ρ (log ρ - log σ)`, evaluated in the eigenbasis of `σ`.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> Result<EntropyValue> {
    if rho.dims() != sigma.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            rho.dims(),
            sigma.dims()
        )));
    }
    Ok(matrix_relative_entropy(rho.matrix(), sigma.matrix()))
}

pub(crate) fn matrix_relative_entropy(rho: &CMat, sigma: &CMat) -> EntropyValue {
    let es = HermitianEigen::new(sigma);
    let mut leak = 0.0;
    let mut cross = 0.0;
    for (j, &mu) in es.values.iter().enumerate() {
        let v = es.vectors.column(j);
        let w = (v.adjoint() * rho * v)[(0, 0)].re;
        if mu <= EIG_CUTOFF {
            leak += w;
        } else {
            cross += w * mu.log2();
        }
    }
    if leak > SUPPORT_TOL {
        return EntropyValue::Infinite;
    }
    let neg_s = -matrix_entropy(rho);
    EntropyValue::Finite(neg_s - cross)
}

fn check_disjoint(parts: &[&[usize]], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for part in parts {
        for &i in *part {
            if i >= n {
                return invalid(format!("subsystem {i} out of range for {n} subsystems"));
            }
            if seen[i] {
                return invalid(format!("subsystem {i} appears in more than one part"));
            }
            seen[i] = true;
        }
    }
    Ok(())
}

fn union(parts: &[&[usize]]) -> Vec<usize> {
    let mut u: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    u.sort_unstable();
    u
}

fn entropy_of(rho: &DensityOperator, part: &[usize]) -> Result<f64> {
    Ok(von_neumann(&rho.partial_trace(part)?))
}

/// `I(A;B) = S(A) + S(B) - S(AB)`.
pub fn mutual_information(rho: &DensityOperator, a: &[usize], b: &[usize]) -> Result<f64> {
    check_disjoint(&[a, b], rho.num_subsystems())?;
    Ok(entropy_of(rho, a)? + entropy_of(rho, b)? - entropy_of(rho, &union(&[a, b]))?)
}

/// `I(A;B|C) = I(A;BC) - I(A;C)`.
pub fn conditional_mutual_information(
    rho: &DensityOperator,
    a: &[usize],
    b: &[usize],
    c: &[usize],
) -> Result<f64> {
    check_disjoint(&[a, b, c], rho.num_subsystems())?;
    let bc = union(&[b, c]);
    Ok(mutual_information(rho, a, &bc)? - mutual_information(rho, a, c)?)
}

/// `I(A_1;…;A_k) = Σ_i S(A_i) - S(A_1…A_k)`.
pub fn multipartite_mutual_information(rho: &DensityOperator, parts: &[Vec<usize>]) -> Result<f64> {
    let refs: Vec<&[usize]> = parts.iter().map(|p| p.as_slice()).collect();
    check_disjoint(&refs, rho.num_subsystems())?;
    let mut total = -entropy_of(rho, &union(&refs))?;
    for p in parts {
        total += entropy_of(rho, p)?;
    }
    Ok(total)
}

/// `⊗_i ρ_{A_i}` laid out in the sorted order of the union of the parts.
pub fn product_of_marginals(rho: &DensityOperator, parts: &[Vec<usize>]) -> Result<DensityOperator> {
    let refs: Vec<&[usize]> = parts.iter().map(|p| p.as_slice()).collect();
    check_disjoint(&refs, rho.num_subsystems())?;
    let mut prod = rho.partial_trace(&[])?;
    let mut order = Vec::new();
    for p in parts {
        let mut sorted = p.clone();
        sorted.sort_unstable();
        prod = prod.tensor(&rho.partial_trace(&sorted)?)?;
        order.extend(sorted);
    }
    // position j of `prod` holds subsystem order[j]; move it to its rank
    let target = union(&refs);
    let src: Vec<usize> = target
        .iter()
        .map(|t| order.iter().position(|o| o == t).expect("in union"))
        .collect();
    prod.reorder(&src)
}

/// The relative-entropy form `D(ρ_{A…} ‖ ⊗_i ρ_{A_i})`.
pub fn multipartite_mutual_information_relative(
    rho: &DensityOperator,
    parts: &[Vec<usize>],
) -> Result<EntropyValue> {
    let refs: Vec<&[usize]> = parts.iter().map(|p| p.as_slice()).collect();
    let joint = rho.partial_trace(&union(&refs))?;
    relative_entropy(&joint, &product_of_marginals(rho, parts)?)
}

/// `I(A;Z)` of the classical-quantum state `Σ_z |z⟩⟨z| ⊗ ω_z`, given the
/// unnormalized conditional operators `ω_z`.
pub fn holevo_information(conditionals: &[CMat]) -> f64 {
    let Some(first) = conditionals.first() else {
        return 0.0;
    };
    let mut avg = CMat::zeros(first.nrows(), first.ncols());
    let mut cond = 0.0;
    for w in conditionals {
        avg += w;
        let p = crate::linalg::trace(w).re;
        if p > EIG_CUTOFF {
            // p S(ω/p) = S_unnorm(ω) + p log p
            cond += matrix_entropy(w) + p * p.log2();
        }
    }
    matrix_entropy(&avg) - cond
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinskerReport {
    /// `D(ρ‖σ)` in bits.
    pub lhs: f64,
    /// `||ρ - σ||_1^2 / (2 ln 2)` in bits.
    pub rhs: f64,
    pub holds: bool,
}

/// Check `D(ρ‖σ) ≥ ||ρ-σ||_1^2 / (2 ln 2)`.
pub fn pinsker_check(rho: &DensityOperator, sigma: &DensityOperator) -> Result<PinskerReport> {
    let lhs = relative_entropy(rho, sigma)?.bits();
    let tn = crate::state::trace_distance(rho, sigma)?;
    let rhs = tn * tn / (2.0 * LN_2);
    Ok(PinskerReport {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CVec};
    use crate::state::{random_state, Ensemble};

    fn ghz(n: usize) -> DensityOperator {
        let d = 1 << n;
        let v = CVec::from_fn(d, |g, _| if g == 0 || g == d - 1 { c(1.0) } else { c(0.0) });
        DensityOperator::pure(vec![2; n], &v).unwrap()
    }

    #[test]
    fn entropy_extremes() {
        let pure = random_state(&[2, 2], 1, Ensemble::HaarPure).unwrap();
        assert!(von_neumann(&pure).abs() < 1e-10);
        let mixed = DensityOperator::maximally_mixed(vec![3]);
        assert!((von_neumann(&mixed) - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_examples() {
        let zero = DensityOperator::basis(vec![2], 0).unwrap();
        let one = DensityOperator::basis(vec![2], 1).unwrap();
        let mixed = DensityOperator::maximally_mixed(vec![2]);
        assert!((relative_entropy(&zero, &mixed).unwrap().bits() - 1.0).abs() < 1e-12);
        assert_eq!(relative_entropy(&zero, &one).unwrap(), EntropyValue::Infinite);
        let r = random_state(&[2, 2], 4, Ensemble::HilbertSchmidtMixed).unwrap();
        assert!(relative_entropy(&r, &r).unwrap().bits().abs() < 1e-10);
        assert!(relative_entropy(&zero, &random_state(&[2, 2], 1, Ensemble::HaarPure).unwrap()).is_err());
    }

    #[test]
    fn mutual_information_examples() {
        let phi = DensityOperator::max_entangled(2).unwrap();
        assert!((mutual_information(&phi, &[0], &[1]).unwrap() - 2.0).abs() < 1e-10);
        let cc = DensityOperator::diagonal(vec![2, 2], &[0.5, 0.0, 0.0, 0.5]).unwrap();
        assert!((mutual_information(&cc, &[0], &[1]).unwrap() - 1.0).abs() < 1e-12);
        let a = random_state(&[2], 1, Ensemble::HilbertSchmidtMixed).unwrap();
        let b = random_state(&[3], 2, Ensemble::HilbertSchmidtMixed).unwrap();
        let prod = a.tensor(&b).unwrap();
        assert!(mutual_information(&prod, &[0], &[1]).unwrap().abs() < 1e-10);
        assert!(mutual_information(&prod, &[0], &[0]).is_err());
    }

    #[test]
    fn ghz_values() {
        let g = ghz(3);
        assert!((conditional_mutual_information(&g, &[0], &[1], &[2]).unwrap() - 1.0).abs() < 1e-10);
        let parts = vec![vec![0], vec![1], vec![2]];
        assert!((multipartite_mutual_information(&g, &parts).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn decoupled_conditioner() {
        let ab = random_state(&[2, 2], 8, Ensemble::HilbertSchmidtMixed).unwrap();
        let cst = random_state(&[2], 9, Ensemble::HilbertSchmidtMixed).unwrap();
        let abc = ab.tensor(&cst).unwrap();
        let cmi = conditional_mutual_information(&abc, &[0], &[1], &[2]).unwrap();
        let mi = mutual_information(&ab, &[0], &[1]).unwrap();
        assert!((cmi - mi).abs() < 1e-10);
    }

    #[test]
    fn pinsker_examples() {
        let zero = DensityOperator::basis(vec![2], 0).unwrap();
        let mixed = DensityOperator::maximally_mixed(vec![2]);
        let rep = pinsker_check(&zero, &mixed).unwrap();
        assert!((rep.lhs - 1.0).abs() < 1e-12);
        assert!((rep.rhs - 1.0 / (2.0 * LN_2)).abs() < 1e-12);
        assert!(rep.holds);
        let same = pinsker_check(&mixed, &mixed).unwrap();
        assert!(same.lhs.abs() < 1e-12 && same.rhs.abs() < 1e-12 && same.holds);
    }

    #[test]
    fn holevo_matches_cq_mutual_information() {
        // ω_AZ with Z classical: build the full state and compare
        let r0 = random_state(&[2], 3, Ensemble::HilbertSchmidtMixed).unwrap();
        let r1 = random_state(&[2], 4, Ensemble::HilbertSchmidtMixed).unwrap();
        let w0 = r0.matrix() * c(0.3);
        let w1 = r1.matrix() * c(0.7);
        let mut full = CMat::zeros(4, 4);
        full.view_mut((0, 0), (2, 2)).copy_from(&w0);
        full.view_mut((2, 2), (2, 2)).copy_from(&w1);
        let zq = DensityOperator::new(vec![2, 2], full).unwrap();
        let mi = mutual_information(&zq, &[0], &[1]).unwrap();
        assert!((holevo_information(&[w0, w1]) - mi).abs() < 1e-10);
    }
}
