//! Subsystem permutations, permutation-group orders, and twirling.
//!
//! A permutation is a `Vec<usize>` where `perm[i]` is the position that
//! subsystem `i` moves to. Composition follows function composition:
//! `compose(p2, p1)` applies `p1` first.

use crate::error::{invalid, Error, Result};
use crate::linalg::{index, CMat, CVec, C64, ZERO};

/// Default cap on the order of a twirling group (10!).
pub const DEFAULT_MAX_GROUP_ORDER: u128 = 3_628_800;

pub type Permutation = Vec<usize>;

pub fn identity_perm(n: usize) -> Permutation {
    (0..n).collect()
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &x in p {
        if x >= p.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

/// `outer ∘ inner`: apply `inner`, then `outer`.
pub fn compose(outer: &[usize], inner: &[usize]) -> Permutation {
    inner.iter().map(|&i| outer[i]).collect()
}

pub fn inverse(p: &[usize]) -> Permutation {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

pub fn transposition(n: usize, a: usize, b: usize) -> Permutation {
    let mut p = identity_perm(n);
    p.swap(a, b);
    p
}

/// Generators of the symmetric group on `points` (adjacent transpositions),
/// embedded in permutations of `n` points.
pub fn symmetric_group_on(n: usize, points: &[usize]) -> Vec<Permutation> {
    points
        .windows(2)
        .map(|w| transposition(n, w[0], w[1]))
        .collect()
}

/// Generators permuting `blocks` (equal-length lists of subsystem indices)
/// as wholes: block `i` and block `i+1` are exchanged position-wise.
pub fn block_permutation_group(n: usize, blocks: &[Vec<usize>]) -> Vec<Permutation> {
    blocks
        .windows(2)
        .map(|w| {
            let mut p = identity_perm(n);
            for (&a, &b) in w[0].iter().zip(&w[1]) {
                p[a] = b;
                p[b] = a;
            }
            p
        })
        .collect()
}

/// Order of the group generated by `gens` on `n` points (Schreier–Sims).
pub fn group_order(gens: &[Permutation], n: usize) -> u128 {
    StabilizerChain::new(gens, n).order()
}

struct Level {
    base: usize,
    /// `transversal[p] = Some(u)` with `u(base) = p` for each orbit point.
    transversal: Vec<Option<Permutation>>,
    orbit: Vec<usize>,
}

struct StabilizerChain {
    n: usize,
    strong: Vec<Permutation>,
    levels: Vec<Level>,
}

impl StabilizerChain {
    fn new(gens: &[Permutation], n: usize) -> Self {
        let strong: Vec<Permutation> = gens
            .iter()
            .filter(|g| g.iter().enumerate().any(|(i, &x)| i != x))
            .cloned()
            .collect();
        let mut chain = Self {
            n,
            strong,
            levels: Vec::new(),
        };
        let gens = chain.strong.clone();
        for g in &gens {
            if chain.levels.iter().all(|l| g[l.base] == l.base) {
                let moved = first_moved(g).expect("non-identity");
                chain.push_level(moved);
            }
        }
        for i in 0..chain.levels.len() {
            chain.rebuild_orbit(i);
        }
        chain.complete();
        chain
    }

    fn push_level(&mut self, base: usize) {
        self.levels.push(Level {
            base,
            transversal: vec![None; self.n],
            orbit: Vec::new(),
        });
    }

    fn level_gens(&self, i: usize) -> Vec<&Permutation> {
        let bases: Vec<usize> = self.levels[..i].iter().map(|l| l.base).collect();
        self.strong
            .iter()
            .filter(|g| bases.iter().all(|&b| g[b] == b))
            .collect()
    }

    fn rebuild_orbit(&mut self, i: usize) {
        let base = self.levels[i].base;
        let gens: Vec<Permutation> = self.level_gens(i).into_iter().cloned().collect();
        let mut transversal = vec![None; self.n];
        transversal[base] = Some(identity_perm(self.n));
        let mut orbit = vec![base];
        let mut head = 0;
        while head < orbit.len() {
            let p = orbit[head];
            head += 1;
            for g in &gens {
                let q = g[p];
                if transversal[q].is_none() {
                    let up = transversal[p].as_ref().expect("orbit point");
                    transversal[q] = Some(compose(g, up));
                    orbit.push(q);
                }
            }
        }
        self.levels[i].transversal = transversal;
        self.levels[i].orbit = orbit;
    }

    /// Returns the residue and the level at which sifting stopped.
    fn strip(&self, mut g: Permutation, from: usize) -> (Permutation, usize) {
        for (i, level) in self.levels.iter().enumerate().skip(from) {
            let beta = g[level.base];
            match &level.transversal[beta] {
                Some(u) => g = compose(&inverse(u), &g),
                None => return (g, i),
            }
        }
        (g, self.levels.len())
    }

    fn complete(&mut self) {
        let mut i = self.levels.len();
        while i > 0 {
            let lvl = i - 1;
            let mut extended = None;
            'search: for &beta in &self.levels[lvl].orbit.clone() {
                for x in self.level_gens(lvl) {
                    let gamma = x[beta];
                    let u_beta = self.levels[lvl].transversal[beta].as_ref().unwrap();
                    let u_gamma = self.levels[lvl].transversal[gamma].as_ref().unwrap();
                    let y = compose(&inverse(u_gamma), &compose(x, u_beta));
                    let (h, j) = self.strip(y, lvl + 1);
                    if first_moved(&h).is_some() {
                        extended = Some((h, j));
                        break 'search;
                    }
                }
            }
            match extended {
                None => i -= 1,
                Some((h, j)) => {
                    if j == self.levels.len() {
                        let moved = first_moved(&h).expect("non-identity residue");
                        self.push_level(moved);
                    }
                    self.strong.push(h);
                    for l in (lvl + 1)..=j {
                        self.rebuild_orbit(l);
                    }
                    i = j + 1;
                }
            }
        }
    }

    fn order(&self) -> u128 {
        self.levels.iter().map(|l| l.orbit.len() as u128).product()
    }
}

fn first_moved(g: &[usize]) -> Option<usize> {
    g.iter().enumerate().find(|(i, &x)| *i != x).map(|(i, _)| i)
}

/// Global basis-index map of a subsystem permutation: basis state `g` is
/// sent to `map[g]`.
pub fn basis_map(dims: &[usize], perm: &[usize]) -> Result<Vec<usize>> {
    check_perm(dims, perm)?;
    let n = dims.len();
    let total = index::product(dims);
    let mut x = vec![0; n];
    let mut y = vec![0; n];
    let mut map = Vec::with_capacity(total);
    for g in 0..total {
        index::digits(g, dims, &mut x);
        for i in 0..n {
            y[perm[i]] = x[i];
        }
        map.push(index::compose(&y, dims));
    }
    Ok(map)
}

fn check_perm(dims: &[usize], perm: &[usize]) -> Result<()> {
    if perm.len() != dims.len() || !is_permutation(perm) {
        return invalid(format!(
            "{perm:?} is not a permutation of {} subsystems",
            dims.len()
        ));
    }
    for (i, &p) in perm.iter().enumerate() {
        if dims[i] != dims[p] {
            return invalid(format!(
                "permutation moves subsystem {i} (dim {}) onto subsystem {p} (dim {})",
                dims[i], dims[p]
            ));
        }
    }
    Ok(())
}

/// Conjugate `m` by the unitary of a subsystem permutation.
pub fn permute_matrix(m: &CMat, dims: &[usize], perm: &[usize]) -> Result<CMat> {
    let map = basis_map(dims, perm)?;
    let n = map.len();
    let mut out = CMat::zeros(n, n);
    for g in 0..n {
        for h in 0..n {
            out[(map[g], map[h])] = m[(g, h)];
        }
    }
    Ok(out)
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }

    /// Dense labels `0..k` for the components, plus component sizes.
    fn labels(mut self) -> (Vec<u32>, Vec<u32>) {
        let n = self.parent.len();
        let mut label = vec![u32::MAX; n];
        let mut out = vec![0u32; n];
        let mut sizes = Vec::new();
        for x in 0..n as u32 {
            let r = self.find(x) as usize;
            if label[r] == u32::MAX {
                label[r] = sizes.len() as u32;
                sizes.push(0);
            }
            out[x as usize] = label[r];
            sizes[label[r] as usize] += 1;
        }
        (out, sizes)
    }
}

/// Precomputed twirl over a subsystem-permutation group.
///
/// The group average of `U_π X U_π†` equals the average of `X` over each
/// orbit of index pairs `(g, h)`, so the group is never enumerated; orbits
/// are found from the generators alone.
#[derive(Debug, Clone)]
pub struct Twirl {
    dims: Vec<usize>,
    dim: usize,
    orbit_of: Vec<u32>,
    orbit_sizes: Vec<u32>,
    group_order: u128,
}

impl Twirl {
    pub fn new(dims: &[usize], generators: &[Permutation]) -> Result<Self> {
        Self::with_cap(dims, generators, DEFAULT_MAX_GROUP_ORDER)
    }

    pub fn with_cap(dims: &[usize], generators: &[Permutation], max_order: u128) -> Result<Self> {
        let maps = generators
            .iter()
            .map(|p| basis_map(dims, p))
            .collect::<Result<Vec<_>>>()?;
        let order = group_order(generators, dims.len());
        if order > max_order {
            return Err(Error::Resource {
                what: "twirling group order".into(),
                required: order,
                available: max_order,
            });
        }
        let dim = index::product(dims);
        let pairs = dim.checked_mul(dim).filter(|&p| p < u32::MAX as usize);
        let Some(pairs) = pairs else {
            return Err(Error::Resource {
                what: "twirl index pairs".into(),
                required: (dim as u128) * (dim as u128),
                available: u32::MAX as u128,
            });
        };
        let mut uf = UnionFind::new(pairs);
        for map in &maps {
            for g in 0..dim {
                for h in 0..dim {
                    uf.union((g * dim + h) as u32, (map[g] * dim + map[h]) as u32);
                }
            }
        }
        let (orbit_of, orbit_sizes) = uf.labels();
        Ok(Self {
            dims: dims.to_vec(),
            dim,
            orbit_of,
            orbit_sizes,
            group_order: order,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_order(&self) -> u128 {
        self.group_order
    }

    /// Dimension of the space of invariant operators.
    pub fn num_orbits(&self) -> usize {
        self.orbit_sizes.len()
    }

    pub fn orbit_of(&self, g: usize, h: usize) -> usize {
        self.orbit_of[g * self.dim + h] as usize
    }

    pub fn orbit_size(&self, o: usize) -> usize {
        self.orbit_sizes[o] as usize
    }

    /// Coordinates of the projection onto invariant operators in the
    /// orthonormal basis `1_O / sqrt|O|`.
    pub fn coefficients(&self, m: &CMat) -> Vec<C64> {
        let mut sums = vec![ZERO; self.orbit_sizes.len()];
        for g in 0..self.dim {
            for h in 0..self.dim {
                sums[self.orbit_of[g * self.dim + h] as usize] += m[(g, h)];
            }
        }
        sums.iter()
            .zip(&self.orbit_sizes)
            .map(|(s, &n)| s / (n as f64).sqrt())
            .collect()
    }

    pub fn from_coefficients(&self, coeffs: &[C64]) -> CMat {
        let scaled: Vec<C64> = coeffs
            .iter()
            .zip(&self.orbit_sizes)
            .map(|(c, &n)| c / (n as f64).sqrt())
            .collect();
        CMat::from_fn(self.dim, self.dim, |g, h| {
            scaled[self.orbit_of[g * self.dim + h] as usize]
        })
    }

    pub fn apply(&self, m: &CMat) -> CMat {
        self.from_coefficients(&self.coefficients(m))
    }

    /// Largest `|X[g,h] - X[π g, π h]|` over the generators' orbits.
    pub fn invariance_residual(&self, m: &CMat) -> f64 {
        frob_diff(m, &self.apply(m))
    }
}

fn frob_diff(a: &CMat, b: &CMat) -> f64 {
    crate::linalg::frobenius(&(a - b))
}

/// Project a vector onto the permutation-invariant subspace: each amplitude
/// is replaced by its average over the basis-index orbit.
pub fn symmetrize_vector(dims: &[usize], generators: &[Permutation], v: &CVec) -> Result<CVec> {
    let dim = index::product(dims);
    if v.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} on dims {dims:?}",
            v.len()
        )));
    }
    let mut uf = UnionFind::new(dim);
    for p in generators {
        let map = basis_map(dims, p)?;
        for (g, &mg) in map.iter().enumerate() {
            uf.union(g as u32, mg as u32);
        }
    }
    let (label, sizes) = uf.labels();
    let mut sums = vec![ZERO; sizes.len()];
    for g in 0..dim {
        sums[label[g] as usize] += v[g];
    }
    Ok(CVec::from_fn(dim, |g, _| {
        sums[label[g] as usize] / sizes[label[g] as usize] as f64
    }))
}
