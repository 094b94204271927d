//! Seeded random streams.
//!
//! Every stochastic routine takes a 64-bit seed; independent work items
//! (restarts, trials) draw from separate ChaCha streams of the same key.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed for trial `index` of a sweep keyed by `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, index.wrapping_add(1 << 32)).next_u64()
}

/// Matrix of i.i.d. standard complex Gaussians (real and imaginary parts
/// each `N(0, 1)`).
pub fn gaussian_matrix(rng: &mut Rng, rows: usize, cols: usize) -> crate::linalg::CMat {
    use rand::Rng as _;
    use rand_distr::StandardNormal;
    crate::linalg::CMat::from_fn(rows, cols, |_, _| {
        crate::linalg::C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-distributed unitary: QR of a Gaussian matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn haar_unitary(rng: &mut Rng, d: usize) -> crate::linalg::CMat {
    let qr = gaussian_matrix(rng, d, d).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { crate::linalg::ONE };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}
