//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's symmetry, projection or solver code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type M = DMatrix<Complex64>;

fn perm_operator(perm: &[usize; 4]) -> M {
    // |i_0 i_1 i_2 i_3⟩ ↦ basis state with digit i_s moved to position perm[s]
    let mut v = M::zeros(16, 16);
    for g in 0..16 {
        let d: Vec<usize> = (0..4).map(|s| (g >> (3 - s)) & 1).collect();
        let mut out = [0usize; 4];
        for s in 0..4 {
            out[perm[s]] = d[s];
        }
        let h = out.iter().fold(0, |acc, &b| acc * 2 + b);
        v[(h, g)] = Complex64::new(1.0, 0.0);
    }
    v
}

/// Transpose on qubits 1 and 3 of a four-qubit operator.
fn partial_transpose_odd(x: &M) -> M {
    let mut y = M::zeros(16, 16);
    let mask = 0b0101;
    for r in 0..16 {
        for c in 0..16 {
            let rr = (r & !mask) | (c & mask);
            let cc = (c & !mask) | (r & mask);
            y[(rr, cc)] = x[(r, c)];
        }
    }
    y
}

fn all_perms() -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let p = [a, b, c, d];
                    let mut seen = [false; 4];
                    p.iter().for_each(|&i| seen[i] = true);
                    if seen.iter().all(|&s| s) {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

fn frob_inner(a: &M, b: &M) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Orthonormal real basis of the Hermitian four-qubit operators (order
/// `A_1 B_1 A_2 B_2`) invariant under `U ⊗ Ū ⊗ U ⊗ Ū` and the copy swaps
/// `A_1 ↔ A_2`, `B_1 ↔ B_2`.
pub fn invariant_basis() -> Vec<M> {
    let swap_a = perm_operator(&[2, 1, 0, 3]);
    let swap_b = perm_operator(&[0, 3, 2, 1]);
    let group = [M::identity(16, 16), swap_a.clone(), swap_b.clone(), &swap_a * &swap_b];
    let i = Complex64::new(0.0, 1.0);
    let mut basis: Vec<M> = Vec::new();
    for p in all_perms() {
        let x = partial_transpose_odd(&perm_operator(&p));
        let mut y = M::zeros(16, 16);
        for g in &group {
            y += g * &x * g.adjoint();
        }
        for mut h in [&y + y.adjoint(), (&y - y.adjoint()) * i] {
            for e in &basis {
                let proj = frob_inner(e, &h);
                h -= e * Complex64::new(proj, 0.0);
            }
            let n = frob_inner(&h, &h).sqrt();
            if n > 1e-9 {
                basis.push(h / Complex64::new(n, 0.0));
            }
        }
    }
    basis
}

/// `ρ_p = p Φ + (1-p) 1/4` on two qubits, built from its matrix entries.
pub fn isotropic_matrix(p: f64) -> M {
    M::from_fn(4, 4, |r, c| {
        let phi = if (r == 0 || r == 3) && (c == 0 || c == 3) { 0.5 } else { 0.0 };
        let mix = if r == c { 0.25 } else { 0.0 };
        Complex64::new(p * phi + (1.0 - p) * mix, 0.0)
    })
}

/// `tr_{A_2 B_2}` of a four-qubit operator, by index summation.
fn first_pair_marginal(x: &M) -> M {
    M::from_fn(4, 4, |r, c| {
        (0..4).map(|t| x[(r * 4 + t, c * 4 + t)]).sum()
    })
}

fn lambda_min(x: &M) -> f64 {
    let h = (x + x.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

struct Reduced {
    basis: Vec<M>,
    /// Real linear map from basis coordinates to the marginal's entries.
    map: DMatrix<f64>,
    pinv: DMatrix<f64>,
    null: Vec<DVector<f64>>,
}

impl Reduced {
    fn new() -> Self {
        let basis = invariant_basis();
        let mut map = DMatrix::<f64>::zeros(32, basis.len());
        for (j, e) in basis.iter().enumerate() {
            let m = first_pair_marginal(e);
            for (r, z) in m.iter().enumerate() {
                map[(2 * r, j)] = z.re;
                map[(2 * r + 1, j)] = z.im;
            }
        }
        let svd = map.clone().svd(true, true);
        let v_t = svd.v_t.clone().expect("v_t");
        let singular = svd.singular_values.clone();
        let pinv = svd.pseudo_inverse(1e-10).expect("svd");
        let rank = singular.iter().filter(|&&s| s > 1e-10).count();
        // rows of v_t beyond the rank span the kernel; singular values are unsorted in general
        let mut order: Vec<usize> = (0..singular.len()).collect();
        order.sort_by(|&a, &b| singular[b].total_cmp(&singular[a]));
        let null = order[rank..].iter().map(|&i| v_t.row(i).transpose()).collect();
        Self { basis, map, pinv, null }
    }

    fn assemble(&self, c: &DVector<f64>) -> M {
        let mut x = M::zeros(16, 16);
        for (e, &w) in self.basis.iter().zip(c.iter()) {
            x += e * Complex64::new(w, 0.0);
        }
        x
    }

    /// `max_θ λ_min(X_0 + Σ θ_i N_i)` by a zooming grid over `[-1, 1]^q`,
    /// or `None` when the marginal constraint is inconsistent.
    fn best_min_eigenvalue(&self, p: f64) -> Option<f64> {
        let target = isotropic_matrix(p);
        let mut b = DVector::<f64>::zeros(32);
        for (r, z) in target.iter().enumerate() {
            b[2 * r] = z.re;
            b[2 * r + 1] = z.im;
        }
        let c0 = &self.pinv * &b;
        if (&self.map * &c0 - &b).norm() > 1e-9 {
            return None;
        }
        let q = self.null.len();
        let x0 = self.assemble(&c0);
        let dirs: Vec<M> = self.null.iter().map(|n| self.assemble(n)).collect();
        let eval = |theta: &[f64]| {
            let mut x = x0.clone();
            for (d, &t) in dirs.iter().zip(theta) {
                x += d * Complex64::new(t, 0.0);
            }
            lambda_min(&x)
        };
        let steps = 7usize;
        let mut center = vec![0.0; q];
        let mut half = 1.0;
        let mut best = eval(&center);
        for _ in 0..25 {
            let mut best_point = center.clone();
            for code in 0..steps.pow(q as u32) {
                let mut rest = code;
                let theta: Vec<f64> = (0..q)
                    .map(|i| {
                        let s = rest % steps;
                        rest /= steps;
                        center[i] + half * (2.0 * s as f64 / (steps - 1) as f64 - 1.0)
                    })
                    .collect();
                let v = eval(&theta);
                if v > best {
                    best = v;
                    best_point = theta;
                }
            }
            center = best_point;
            half *= 0.5;
        }
        Some(best)
    }
}

/// Largest isotropic parameter whose two-copy-per-party extension exists,
/// by bisection on the reduced grid search.
pub fn isotropic_two_copy_threshold(resolution: f64) -> f64 {
    let red = Reduced::new();
    let feasible = |p: f64| red.best_min_eigenvalue(p).is_some_and(|v| v >= -1e-7);
    let (mut lo, mut hi) = (0.0, 1.0);
    assert!(feasible(lo) && !feasible(hi));
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Dimension of the invariant real subspace and of the marginal-free directions.
pub fn reduced_dimensions() -> (usize, usize) {
    let red = Reduced::new();
    (red.basis.len(), red.null.len())
}
