//! Dense complex helpers shared by every module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Multipartite indices are
//! row-major over the subsystem list: subsystem 0 is the most significant
//! digit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Eigenvalues below this magnitude are treated as exact zeros.
pub const EIG_CUTOFF: f64 = 1e-12;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`.
    pub vectors: CMat,
}

impl HermitianEigen {
    pub fn new(m: &CMat) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self {
                values: Vec::new(),
                vectors: CMat::zeros(0, 0),
            };
        }
        let h = hermitian_part(m);
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
        Self { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// Rebuild `Σ f(λ_i) |v_i⟩⟨v_i|`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5)
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().copied().sum()
}

/// `tr(a† b)`.
pub fn inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Trace norm of a Hermitian matrix (sum of absolute eigenvalues).
pub fn trace_norm(m: &CMat) -> f64 {
    HermitianEigen::new(m).values.iter().map(|l| l.abs()).sum()
}

/// Projector onto the eigenspace with eigenvalues `>= -EIG_CUTOFF`.
///
/// Zero eigenvalues go to the returned (non-negative) projector.
pub fn nonnegative_projector(m: &CMat) -> CMat {
    HermitianEigen::new(m).map(|l| if l >= -EIG_CUTOFF { 1.0 } else { 0.0 })
}

/// Nearest PSD matrix in Frobenius norm; also returns `λ_min` of the input.
pub fn psd_projection(m: &CMat) -> (CMat, f64) {
    let eig = HermitianEigen::new(m);
    (eig.map(|l| l.max(0.0)), eig.min())
}

/// Cayley map `(I - K/2)^{-1} (I + K/2)` of an anti-Hermitian `K`; unitary.
pub fn cayley(k: &CMat) -> CMat {
    let n = k.nrows();
    let half = k * c(0.5);
    let lhs = identity(n) - &half;
    let rhs = identity(n) + &half;
    lhs.lu().solve(&rhs).expect("I - K/2 is invertible for anti-Hermitian K")
}

/// Gram–Schmidt via QR; the result has orthonormal columns.
pub fn orthonormalize(m: &CMat) -> CMat {
    let qr = m.clone().qr();
    qr.q()
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

pub fn is_hermitian(m: &CMat, rel_tol: f64) -> bool {
    let scale = frobenius(m).max(1.0);
    frobenius(&(m - m.adjoint())) <= rel_tol * scale
}

/// Mixed-radix helpers for row-major multipartite indices.
pub mod index {
    pub fn strides(dims: &[usize]) -> Vec<usize> {
        let mut s = vec![1; dims.len()];
        for i in (0..dims.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * dims[i + 1];
        }
        s
    }

    pub fn digits(mut g: usize, dims: &[usize], out: &mut [usize]) {
        for i in (0..dims.len()).rev() {
            out[i] = g % dims[i];
            g /= dims[i];
        }
    }

    pub fn compose(digits: &[usize], dims: &[usize]) -> usize {
        digits.iter().zip(dims).fold(0, |acc, (&d, &n)| acc * n + d)
    }

    pub fn product(dims: &[usize]) -> usize {
        dims.iter().product()
    }
}
