use serde::Serialize;

use super::{clip_probabilities, measure_leading, Povm, DEFAULT_OUTCOME_CAP};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, index, CMat};
use crate::rng;
use crate::state::DensityOperator;

/// One step of a one-way protocol: a POVM and, unless it is a leaf, one
/// child per outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementNode {
    pub povm: Povm,
    pub children: Vec<MeasurementNode>,
}

impl MeasurementNode {
    pub fn leaf(povm: Povm) -> Self {
        Self {
            povm,
            children: Vec::new(),
        }
    }
}

/// Fully adaptive one-way LOCC measurement on parties `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveMeasurementTree {
    dims: Vec<usize>,
    root: MeasurementNode,
}

/// Joint outcome distribution, row-major over per-level radices.
///
/// A node with fewer outcomes than its level's radix leaves the missing
/// entries at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeDistribution {
    pub radices: Vec<usize>,
    pub probs: Vec<f64>,
}

impl OutcomeDistribution {
    /// Marginal on the first `levels` outcome registers.
    pub fn marginal(&self, levels: usize) -> Self {
        let radices = self.radices[..levels].to_vec();
        let head = index::product(&radices);
        let tail = self.probs.len() / head;
        let probs = (0..head)
            .map(|h| self.probs[h * tail..(h + 1) * tail].iter().sum())
            .collect();
        Self { radices, probs }
    }
}

impl AdaptiveMeasurementTree {
    pub fn new(dims: Vec<usize>, root: MeasurementNode) -> Result<Self> {
        Self::with_outcome_cap(dims, root, DEFAULT_OUTCOME_CAP)
    }

    pub fn with_outcome_cap(dims: Vec<usize>, root: MeasurementNode, cap: usize) -> Result<Self> {
        if dims.is_empty() {
            return invalid("a measurement tree needs at least one party");
        }
        check_node(&root, &dims, 0, cap)?;
        Ok(Self { dims, root })
    }

    pub(crate) fn from_parts(dims: Vec<usize>, root: MeasurementNode) -> Self {
        Self { dims, root }
    }

    /// Tree with independent random POVMs of `outcomes` outcomes at every
    /// node.
    pub fn random(dims: &[usize], outcomes: usize, seed: u64) -> Result<Self> {
        if outcomes == 0 {
            return invalid("nodes need at least one outcome");
        }
        let mut rng = rng::stream(seed, 0);
        fn build(dims: &[usize], outcomes: usize, rng: &mut rng::Rng) -> MeasurementNode {
            let povm = Povm::random(dims[0], outcomes, rng);
            let children = if dims.len() == 1 {
                Vec::new()
            } else {
                (0..outcomes).map(|_| build(&dims[1..], outcomes, rng)).collect()
            };
            MeasurementNode { povm, children }
        }
        let root = build(dims, outcomes, &mut rng);
        Self::with_outcome_cap(dims.to_vec(), root, outcomes.max(DEFAULT_OUTCOME_CAP))
    }

    pub fn parties(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn root(&self) -> &MeasurementNode {
        &self.root
    }

    /// Largest outcome count at each level.
    pub fn radices(&self) -> Vec<usize> {
        let mut r = vec![0; self.dims.len()];
        fn visit(node: &MeasurementNode, level: usize, r: &mut [usize]) {
            r[level] = r[level].max(node.povm.num_outcomes());
            for c in &node.children {
                visit(c, level + 1, r);
            }
        }
        visit(&self.root, 0, &mut r);
        r
    }

    /// Node reached by the outcome sequence `path`.
    pub fn node(&self, path: &[usize]) -> Option<&MeasurementNode> {
        let mut node = &self.root;
        for &a in path {
            node = node.children.get(a)?;
        }
        Some(node)
    }

    /// The measurement made of the first `levels` steps.
    pub fn reduced(&self, levels: usize) -> Result<Self> {
        if levels == 0 || levels > self.parties() {
            return invalid(format!(
                "reduced measurement needs 1 <= l <= {}, got {levels}",
                self.parties()
            ));
        }
        fn cut(node: &MeasurementNode, left: usize) -> MeasurementNode {
            MeasurementNode {
                povm: node.povm.clone(),
                children: if left == 1 {
                    Vec::new()
                } else {
                    node.children.iter().map(|c| cut(c, left - 1)).collect()
                },
            }
        }
        Ok(Self::from_parts(
            self.dims[..levels].to_vec(),
            cut(&self.root, levels),
        ))
    }

    pub fn distribution(&self, rho: &DensityOperator) -> Result<OutcomeDistribution> {
        if rho.dims() != self.dims.as_slice() {
            return Err(Error::DimensionMismatch(format!(
                "tree on parties {:?} applied to state on {:?}",
                self.dims,
                rho.dims()
            )));
        }
        Ok(self.distribution_of(rho.matrix()))
    }

    /// Distribution for an arbitrary (possibly unnormalized) operator on the
    /// parties.
    pub fn distribution_of(&self, omega: &CMat) -> OutcomeDistribution {
        let radices = self.radices();
        let mut probs = vec![0.0; index::product(&radices)];
        walk(&self.root, omega, &self.dims, &radices, 0, &mut probs);
        OutcomeDistribution { radices, probs }
    }

    /// The measurement channel: a diagonal state on the outcome registers.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        let dist = self.distribution(rho)?;
        DensityOperator::diagonal(dist.radices, &clip_probabilities(&dist.probs))
    }

    /// Nodes at `depth` with their history index (row-major over the first
    /// `depth` radices) and the unnormalized conditional operator that the
    /// parties `depth..` are left in.
    pub fn frontier<'a>(
        &'a self,
        omega: &CMat,
        dims: &[usize],
        depth: usize,
    ) -> Vec<(usize, &'a MeasurementNode, CMat)> {
        let radices = self.radices();
        let mut out = Vec::new();
        fn go<'a>(
            node: &'a MeasurementNode,
            omega: CMat,
            dims: &[usize],
            radices: &[usize],
            left: usize,
            hist: usize,
            out: &mut Vec<(usize, &'a MeasurementNode, CMat)>,
        ) {
            if left == 0 {
                out.push((hist, node, omega));
                return;
            }
            for (a, e) in node.povm.effects().iter().enumerate() {
                let next = measure_leading(&omega, dims[0], e);
                go(
                    &node.children[a],
                    next,
                    &dims[1..],
                    &radices[1..],
                    left - 1,
                    hist * radices[0] + a,
                    out,
                );
            }
        }
        go(&self.root, omega.clone(), dims, &radices, depth, 0, &mut out);
        out
    }
}

fn check_node(node: &MeasurementNode, dims: &[usize], level: usize, cap: usize) -> Result<()> {
    let here = || format!("node at level {level}");
    node.povm
        .validate()
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", here())))?;
    if node.povm.dim() != dims[level] {
        return Err(Error::DimensionMismatch(format!(
            "{} acts on dimension {}, party has {}",
            here(),
            node.povm.dim(),
            dims[level]
        )));
    }
    if node.povm.num_outcomes() > cap {
        return invalid(format!(
            "{} has {} outcomes, cap is {cap}",
            here(),
            node.povm.num_outcomes()
        ));
    }
    let is_last = level + 1 == dims.len();
    match (is_last, node.children.len()) {
        (true, 0) => Ok(()),
        (true, n) => invalid(format!("{} is on the last party but has {n} children", here())),
        (false, n) if n == node.povm.num_outcomes() => node
            .children
            .iter()
            .try_for_each(|c| check_node(c, dims, level + 1, cap)),
        (false, n) => invalid(format!(
            "{} has {} outcomes but {n} children",
            here(),
            node.povm.num_outcomes()
        )),
    }
}

fn walk(
    node: &MeasurementNode,
    omega: &CMat,
    dims: &[usize],
    radices: &[usize],
    prefix: usize,
    out: &mut [f64],
) {
    for (a, e) in node.povm.effects().iter().enumerate() {
        let idx = prefix * radices[0] + a;
        if dims.len() == 1 {
            out[idx] = linalg::inner(e, omega).re;
        } else {
            let next = measure_leading(omega, dims[0], e);
            walk(&node.children[a], &next, &dims[1..], &radices[1..], idx, out);
        }
    }
}
