//! Density operators over multipartite Hilbert spaces.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, index, CMat, CVec, HermitianEigen, C64};
use crate::rng;
use crate::symmetry::{self, Permutation, Twirl};

/// Relative tolerance for Hermiticity, PSD and unit-trace checks.
pub const STATE_TOL: f64 = 1e-10;

/// Default cap on the total Hilbert-space dimension.
pub const DEFAULT_MAX_DIM: usize = 4096;

/// Hermitian, PSD, unit-trace matrix over a list of subsystem dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    dims: Vec<usize>,
    matrix: CMat,
}

/// How `DensityOperator::from_matrix` treats a matrix that fails validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Repair {
    #[default]
    Reject,
    /// Hermitize, zero negative eigenvalues and renormalize.
    Clamp,
}

impl DensityOperator {
    /// Validated constructor.
    pub fn new(dims: Vec<usize>, matrix: CMat) -> Result<Self> {
        Self::from_matrix(dims, matrix, Repair::Reject)
    }

    pub fn from_matrix(dims: Vec<usize>, matrix: CMat, repair: Repair) -> Result<Self> {
        check_shape(&dims, &matrix)?;
        let state = Self { dims, matrix };
        match (state.validate(STATE_TOL), repair) {
            (Ok(()), _) => Ok(state),
            (Err(e), Repair::Reject) => Err(e),
            (Err(_), Repair::Clamp) => state.clamped(),
        }
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts(dims: Vec<usize>, matrix: CMat) -> Self {
        debug_assert_eq!(index::product(&dims), matrix.nrows());
        Self { dims, matrix }
    }

    fn clamped(self) -> Result<Self> {
        let (psd, _) = linalg::psd_projection(&self.matrix);
        let tr = linalg::trace(&psd).re;
        if tr <= 0.0 {
            return Err(Error::InvalidState(
                "matrix has no positive spectrum to renormalize".into(),
            ));
        }
        Ok(Self {
            dims: self.dims,
            matrix: psd * c(1.0 / tr),
        })
    }

    pub fn pure(dims: Vec<usize>, vector: &CVec) -> Result<Self> {
        if vector.len() != index::product(&dims) {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for dims {dims:?}",
                vector.len()
            )));
        }
        let norm = vector.norm();
        if norm == 0.0 {
            return invalid("zero state vector");
        }
        let v = vector / c(norm);
        Ok(Self::from_parts(dims, linalg::outer(&v)))
    }

    /// `|g⟩⟨g|` for the computational basis state with global index `g`.
    pub fn basis(dims: Vec<usize>, g: usize) -> Result<Self> {
        let d = index::product(&dims);
        if g >= d {
            return invalid(format!("basis index {g} out of range for dimension {d}"));
        }
        let mut m = CMat::zeros(d, d);
        m[(g, g)] = c(1.0);
        Ok(Self::from_parts(dims, m))
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let d = index::product(&dims);
        Self::from_parts(dims, linalg::identity(d) * c(1.0 / d as f64))
    }

    /// Classical state `Σ_x p_x |x⟩⟨x|`.
    pub fn diagonal(dims: Vec<usize>, probs: &[f64]) -> Result<Self> {
        let d = index::product(&dims);
        if probs.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for dimension {d}",
                probs.len()
            )));
        }
        let m = CMat::from_fn(d, d, |i, j| if i == j { c(probs[i]) } else { linalg::ZERO });
        Self::new(dims, m)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_subsystems(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        check_shape(&self.dims, &self.matrix)?;
        let m = &self.matrix;
        let herm = linalg::frobenius(&(m - m.adjoint()));
        if herm > tol * linalg::frobenius(m).max(1.0) {
            return Err(Error::InvalidState(format!(
                "not Hermitian: ||M - M^dag||_F = {herm:e}"
            )));
        }
        let tr = linalg::trace(m);
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let lmin = HermitianEigen::new(m).min();
        if lmin < -tol {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite: min eigenvalue {lmin:e}"
            )));
        }
        Ok(())
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        HermitianEigen::new(&self.matrix).values
    }

    pub fn purity(&self) -> f64 {
        linalg::inner(&self.matrix, &self.matrix).re
    }

    /// `tr(O ρ)` for an operator on the full space.
    pub fn expectation(&self, op: &CMat) -> Result<C64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator {}x{} on state of dimension {}",
                op.nrows(),
                op.ncols(),
                self.dim()
            )));
        }
        Ok(linalg::inner(&op.adjoint(), &self.matrix))
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        self.tensor_capped(other, DEFAULT_MAX_DIM)
    }

    pub fn tensor_capped(&self, other: &Self, max_dim: usize) -> Result<Self> {
        let total = (self.dim() as u128) * (other.dim() as u128);
        if total > max_dim as u128 {
            return Err(Error::Resource {
                what: "tensor product dimension".into(),
                required: total,
                available: max_dim as u128,
            });
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Ok(Self::from_parts(dims, linalg::kron(&self.matrix, &other.matrix)))
    }

    /// `ρ^{⊗k}`.
    pub fn power(&self, k: usize) -> Result<Self> {
        let mut out = Self::from_parts(Vec::new(), CMat::from_element(1, 1, c(1.0)));
        for _ in 0..k {
            out = out.tensor(self)?;
        }
        Ok(out)
    }

    /// Reduced state on `keep`; subsystem order follows the original order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let (dims, matrix) = partial_trace_matrix(&self.matrix, &self.dims, keep)?;
        Ok(Self::from_parts(dims, matrix))
    }

    /// Conjugation by the permutation unitary; `perm[i]` is where subsystem
    /// `i` ends up.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let m = symmetry::permute_matrix(&self.matrix, &self.dims, perm)?;
        Ok(Self::from_parts(self.dims.clone(), m))
    }

    /// Reorder subsystems (dims may differ): new subsystem `j` is old
    /// subsystem `order[j]`.
    pub fn reorder(&self, order: &[usize]) -> Result<Self> {
        let (dims, m) = reorder_matrix(&self.matrix, &self.dims, order)?;
        Ok(Self::from_parts(dims, m))
    }

    /// Group average over the subsystem permutations generated by `generators`.
    pub fn twirl(&self, generators: &[Permutation]) -> Result<Self> {
        let tw = Twirl::new(&self.dims, generators)?;
        Ok(self.twirl_with(&tw))
    }

    pub fn twirl_with(&self, tw: &Twirl) -> Self {
        Self::from_parts(self.dims.clone(), tw.apply(&self.matrix))
    }

    /// Largest Frobenius deviation `||π(ρ) - ρ||_F` over the given permutations.
    pub fn permutation_residual(&self, perms: &[Permutation]) -> Result<f64> {
        let mut worst = 0.0f64;
        for p in perms {
            let m = symmetry::permute_matrix(&self.matrix, &self.dims, p)?;
            worst = worst.max(linalg::frobenius(&(m - &self.matrix)));
        }
        Ok(worst)
    }

    /// Merge adjacent subsystems: `sizes` lists how many consecutive
    /// subsystems form each new subsystem.
    pub fn regroup(&self, sizes: &[usize]) -> Result<Self> {
        if sizes.iter().sum::<usize>() != self.dims.len() || sizes.contains(&0) {
            return invalid(format!(
                "group sizes {sizes:?} do not partition {} subsystems",
                self.dims.len()
            ));
        }
        let mut dims = Vec::with_capacity(sizes.len());
        let mut at = 0;
        for &s in sizes {
            dims.push(index::product(&self.dims[at..at + s]));
            at += s;
        }
        Ok(Self::from_parts(dims, self.matrix.clone()))
    }

    /// Same matrix, new dimension list with the same total dimension.
    pub fn with_dims(&self, dims: Vec<usize>) -> Result<Self> {
        check_shape(&dims, &self.matrix)?;
        Ok(Self::from_parts(dims, self.matrix.clone()))
    }

    /// `Σ p_i ρ_i` for states of identical dims.
    pub fn mixture(weights: &[f64], states: &[Self]) -> Result<Self> {
        let Some(first) = states.first() else {
            return invalid("empty mixture");
        };
        if weights.len() != states.len() {
            return invalid("weights and states differ in length");
        }
        let mut m = CMat::zeros(first.dim(), first.dim());
        for (w, s) in weights.iter().zip(states) {
            if s.dims != first.dims {
                return Err(Error::DimensionMismatch(format!(
                    "mixture of {:?} and {:?}",
                    first.dims, s.dims
                )));
            }
            m += &s.matrix * c(*w);
        }
        Self::new(first.dims.clone(), m)
    }

    /// Maximally entangled state `|φ⟩ = d^{-1/2} Σ_i |ii⟩` on dims `[d, d]`.
    pub fn max_entangled(d: usize) -> Result<Self> {
        if d < 2 {
            return invalid("maximally entangled state needs d >= 2");
        }
        let v = CVec::from_fn(d * d, |g, _| if g % (d + 1) == 0 { c(1.0) } else { linalg::ZERO });
        Self::pure(vec![d, d], &v)
    }

    pub fn random(dims: &[usize], seed: u64, ensemble: Ensemble) -> Result<Self> {
        random_state(dims, seed, ensemble)
    }
}

fn check_shape(dims: &[usize], m: &CMat) -> Result<()> {
    if dims.contains(&0) {
        return invalid("subsystem dimensions must be positive");
    }
    let d = index::product(dims);
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, dims {dims:?} need {d}x{d}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn reorder_matrix(m: &CMat, dims: &[usize], order: &[usize]) -> Result<(Vec<usize>, CMat)> {
    if order.len() != dims.len() || !symmetry::is_permutation(order) {
        return invalid(format!("{order:?} is not an ordering of {} subsystems", dims.len()));
    }
    let n = dims.len();
    let new_dims: Vec<usize> = order.iter().map(|&o| dims[o]).collect();
    let total = index::product(dims);
    let mut x = vec![0; n];
    let mut y = vec![0; n];
    let map: Vec<usize> = (0..total)
        .map(|g| {
            index::digits(g, dims, &mut x);
            for j in 0..n {
                y[j] = x[order[j]];
            }
            index::compose(&y, &new_dims)
        })
        .collect();
    let mut out = CMat::zeros(total, total);
    for g in 0..total {
        for h in 0..total {
            out[(map[g], map[h])] = m[(g, h)];
        }
    }
    Ok((new_dims, out))
}

/// Partial trace of an arbitrary operator, keeping `keep` (sorted, unique).
pub fn partial_trace_matrix(m: &CMat, dims: &[usize], keep: &[usize]) -> Result<(Vec<usize>, CMat)> {
    let n = dims.len();
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() {
        return invalid(format!("duplicate subsystem in {keep:?}"));
    }
    if let Some(&bad) = keep_sorted.iter().find(|&&k| k >= n) {
        return invalid(format!("subsystem {bad} out of range for {n} subsystems"));
    }
    let mut is_kept = vec![false; n];
    for &k in &keep_sorted {
        is_kept[k] = true;
    }
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = (0..n).filter(|&i| !is_kept[i]).map(|i| dims[i]).collect();
    let dk = index::product(&kept_dims);
    let dt = index::product(&traced_dims);
    let total = index::product(dims);

    // slot[t * dk + k] = global index with kept digits k and traced digits t
    let mut slot = vec![0usize; total];
    let mut digits = vec![0; n];
    let mut kd = vec![0; kept_dims.len()];
    let mut td = vec![0; traced_dims.len()];
    for g in 0..total {
        index::digits(g, dims, &mut digits);
        let (mut a, mut b) = (0, 0);
        for i in 0..n {
            if is_kept[i] {
                kd[a] = digits[i];
                a += 1;
            } else {
                td[b] = digits[i];
                b += 1;
            }
        }
        let k = index::compose(&kd, &kept_dims);
        let t = index::compose(&td, &traced_dims);
        slot[t * dk + k] = g;
    }
    let mut out = CMat::zeros(dk, dk);
    for t in 0..dt {
        let row = &slot[t * dk..(t + 1) * dk];
        for (a, &ga) in row.iter().enumerate() {
            for (b, &gb) in row.iter().enumerate() {
                out[(a, b)] += m[(ga, gb)];
            }
        }
    }
    Ok((kept_dims, out))
}

/// Random test-state ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    HaarPure,
    HilbertSchmidtMixed,
    /// Average of `mix` Haar-random pure states drawn inside the symmetric
    /// subspace of `[d]^n`.
    BoseSymmetric { mix: usize },
}

impl Ensemble {
    pub const DEFAULT_BOSE_MIX: usize = 3;

    pub fn bose_symmetric() -> Self {
        Ensemble::BoseSymmetric {
            mix: Self::DEFAULT_BOSE_MIX,
        }
    }
}

fn gaussian_vector(rng: &mut impl Rng, d: usize) -> CVec {
    CVec::from_fn(d, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_state(dims: &[usize], seed: u64, ensemble: Ensemble) -> Result<DensityOperator> {
    if dims.is_empty() || dims.contains(&0) {
        return invalid("random state needs non-empty positive dims");
    }
    let d = index::product(dims);
    if d > DEFAULT_MAX_DIM {
        return Err(Error::Resource {
            what: "random state dimension".into(),
            required: d as u128,
            available: DEFAULT_MAX_DIM as u128,
        });
    }
    let mut rng = rng::stream(seed, 0);
    match ensemble {
        Ensemble::HaarPure => DensityOperator::pure(dims.to_vec(), &gaussian_vector(&mut rng, d)),
        Ensemble::HilbertSchmidtMixed => {
            let g = CMat::from_fn(d, d, |_, _| {
                C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let m = &g * g.adjoint();
            let tr = linalg::trace(&m).re;
            Ok(DensityOperator::from_parts(
                dims.to_vec(),
                linalg::hermitian_part(&(m * c(1.0 / tr))),
            ))
        }
        Ensemble::BoseSymmetric { mix } => {
            if mix == 0 {
                return invalid("bose-symmetric mixing count must be positive");
            }
            if dims.iter().any(|&x| x != dims[0]) {
                return invalid(format!("bose-symmetric states need equal dims, got {dims:?}"));
            }
            let n = dims.len();
            let pts: Vec<usize> = (0..n).collect();
            let gens = symmetry::symmetric_group_on(n, &pts);
            let mut acc = CMat::zeros(d, d);
            for _ in 0..mix {
                let v = symmetry::symmetrize_vector(dims, &gens, &gaussian_vector(&mut rng, d))?;
                let v = &v / c(v.norm());
                acc += linalg::outer(&v);
            }
            Ok(DensityOperator::from_parts(
                dims.to_vec(),
                linalg::hermitian_part(&(acc * c(1.0 / mix as f64))),
            ))
        }
    }
}

/// Trace norm `||ρ - σ||_1`.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    Ok(linalg::trace_norm(&(&a.matrix - &b.matrix)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx_eq(a: &CMat, b: &CMat, tol: f64) -> bool {
        linalg::frobenius(&(a - b)) <= tol
    }

    #[test]
    fn tensor_of_maximally_mixed() {
        let a = DensityOperator::maximally_mixed(vec![2]);
        let t = a.tensor(&a).unwrap();
        assert_eq!(t.dims(), &[2, 2]);
        assert!(approx_eq(t.matrix(), DensityOperator::maximally_mixed(vec![2, 2]).matrix(), 1e-15));
    }

    #[test]
    fn tensor_of_basis_states() {
        let z = DensityOperator::basis(vec![2], 0).unwrap();
        let o = DensityOperator::basis(vec![2], 1).unwrap();
        let t = z.tensor(&o).unwrap();
        assert!(approx_eq(t.matrix(), DensityOperator::basis(vec![2, 2], 1).unwrap().matrix(), 0.0));
    }

    #[test]
    fn tensor_respects_dimension_cap() {
        let a = DensityOperator::maximally_mixed(vec![64]);
        assert!(matches!(a.tensor(&a), Ok(_)));
        assert!(matches!(a.tensor_capped(&a, 1000), Err(Error::Resource { .. })));
    }

    #[test]
    fn marginals_of_max_entangled() {
        let phi = DensityOperator::max_entangled(2).unwrap();
        for k in 0..2 {
            let r = phi.partial_trace(&[k]).unwrap();
            assert!(approx_eq(r.matrix(), DensityOperator::maximally_mixed(vec![2]).matrix(), 1e-15));
        }
        assert!((phi.purity() - 1.0).abs() < 1e-14);
        let phi3 = DensityOperator::max_entangled(3).unwrap();
        // ⟨00|φ⟩⟨φ|00⟩ = 1/3
        assert!((phi3.matrix()[(0, 0)].re - 1.0 / 3.0).abs() < 1e-15);
        assert!(DensityOperator::max_entangled(1).is_err());
    }

    #[test]
    fn partial_trace_edge_cases() {
        let r = random_state(&[2, 2], 3, Ensemble::HilbertSchmidtMixed).unwrap();
        let scalar = r.partial_trace(&[]).unwrap();
        assert!(scalar.dims().is_empty());
        assert!((scalar.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(r.partial_trace(&[2]).is_err());
        assert!(r.partial_trace(&[0, 0]).is_err());
    }

    #[test]
    fn swap_moves_basis_state() {
        let s = DensityOperator::basis(vec![2, 2], 1).unwrap(); // |01>
        let p = s.permute(&[1, 0]).unwrap();
        assert!((p.matrix()[(2, 2)].re - 1.0).abs() < 1e-15); // |10>
        assert!(s.with_dims(vec![2, 3]).is_err());
    }

    #[test]
    fn validation_and_repair() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 0)] = c(1.2);
        m[(1, 1)] = c(-0.2);
        assert!(DensityOperator::new(vec![2], m.clone()).is_err());
        let fixed = DensityOperator::from_matrix(vec![2], m, Repair::Clamp).unwrap();
        assert!((fixed.matrix()[(0, 0)].re - 1.0).abs() < 1e-12);
        fixed.validate(STATE_TOL).unwrap();
    }

    #[test]
    fn random_states_are_valid_and_deterministic() {
        for ens in [Ensemble::HaarPure, Ensemble::HilbertSchmidtMixed, Ensemble::bose_symmetric()] {
            let a = random_state(&[2, 2, 2], 11, ens).unwrap();
            let b = random_state(&[2, 2, 2], 11, ens).unwrap();
            assert_eq!(a.matrix(), b.matrix());
            a.validate(STATE_TOL).unwrap();
        }
        let pure = random_state(&[2], 5, Ensemble::HaarPure).unwrap();
        assert!((pure.purity() - 1.0).abs() < 1e-12);
        assert!(random_state(&[2, 3], 1, Ensemble::bose_symmetric()).is_err());
    }
}
