use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdaptiveMeasurementTree, MeasurementClass, MeasurementNode, Povm};
use crate::entropy::{kl_divergence, EntropyValue};
use crate::error::{invalid, Error, Result};
use crate::io;
use crate::linalg::index;
use crate::state::DensityOperator;

/// A measurement strategy certifying a restricted-norm lower bound.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// One POVM on the whole space.
    Global(Povm),
    /// One POVM per party.
    Product(Vec<Povm>),
    /// Independent POVMs on parties `0..k-1`, then one POVM on the last
    /// party per joint upstream outcome (row-major over upstream outcomes).
    Parallel { upstream: Vec<Povm>, last: Vec<Povm> },
    Tree(AdaptiveMeasurementTree),
}

impl Witness {
    pub fn class(&self) -> MeasurementClass {
        match self {
            Witness::Global(_) => MeasurementClass::All,
            Witness::Product(_) => MeasurementClass::Lo,
            Witness::Parallel { .. } => MeasurementClass::OneWayParallel,
            Witness::Tree(_) => MeasurementClass::OneWayFull,
        }
    }

    /// The equivalent one-way tree on parties with dimensions `dims`.
    pub fn to_tree(&self, dims: &[usize]) -> Result<AdaptiveMeasurementTree> {
        match self {
            Witness::Global(p) if dims.len() == 1 => {
                AdaptiveMeasurementTree::new(dims.to_vec(), MeasurementNode::leaf(p.clone()))
            }
            Witness::Global(_) => invalid("a global measurement is not one-way on several parties"),
            Witness::Product(povms) => {
                let (last, upstream) = povms
                    .split_last()
                    .ok_or_else(|| Error::InvalidArgument("empty product witness".into()))?;
                let n: usize = upstream.iter().map(Povm::num_outcomes).product();
                parallel_to_full_embedding(upstream, &vec![last.clone(); n], dims)
            }
            Witness::Parallel { upstream, last } => parallel_to_full_embedding(upstream, last, dims),
            Witness::Tree(t) if t.dims() == dims => Ok(t.clone()),
            Witness::Tree(t) => Err(Error::DimensionMismatch(format!(
                "tree on {:?}, parties {dims:?}",
                t.dims()
            ))),
        }
    }

    /// Outcome distribution on `rho`.
    pub fn distribution(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        match self {
            Witness::Global(p) => p.probabilities(rho),
            _ => Ok(self.to_tree(rho.dims())?.distribution(rho)?.probs),
        }
    }

    /// `||M(ρ) - M(σ)||_1`.
    pub fn norm_value(&self, rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
        let p = self.distribution(rho)?;
        let q = self.distribution(sigma)?;
        Ok(p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum())
    }

    /// `D(M(ρ) ‖ M(σ))`.
    pub fn relative_entropy_value(
        &self,
        rho: &DensityOperator,
        sigma: &DensityOperator,
    ) -> Result<EntropyValue> {
        Ok(kl_divergence(&self.distribution(rho)?, &self.distribution(sigma)?))
    }

    /// Append a party measured trivially after every upstream history.
    pub fn product_with_trivial_last_party(povms: Vec<Povm>, d: usize) -> Witness {
        let n: usize = povms.iter().map(Povm::num_outcomes).product();
        Witness::Parallel {
            upstream: povms,
            last: vec![Povm::trivial(d); n],
        }
    }
}

/// Re-express a parallel strategy as an adaptive tree whose upstream nodes
/// ignore the history.
pub fn parallel_to_full_embedding(
    upstream: &[Povm],
    last: &[Povm],
    dims: &[usize],
) -> Result<AdaptiveMeasurementTree> {
    if dims.len() != upstream.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} upstream POVMs for {} parties",
            upstream.len(),
            dims.len()
        )));
    }
    let radices: Vec<usize> = upstream.iter().map(Povm::num_outcomes).collect();
    if last.len() != index::product(&radices) {
        return invalid(format!(
            "{} last-party POVMs for {} upstream histories",
            last.len(),
            index::product(&radices)
        ));
    }
    fn build(upstream: &[Povm], last: &[Povm], hist: usize) -> MeasurementNode {
        match upstream.split_first() {
            None => MeasurementNode::leaf(last[hist].clone()),
            Some((p, rest)) => MeasurementNode {
                povm: p.clone(),
                children: (0..p.num_outcomes())
                    .map(|a| build(rest, last, hist * p.num_outcomes() + a))
                    .collect(),
            },
        }
    }
    let cap = upstream
        .iter()
        .chain(last)
        .map(Povm::num_outcomes)
        .max()
        .unwrap_or(1)
        .max(super::DEFAULT_OUTCOME_CAP);
    AdaptiveMeasurementTree::with_outcome_cap(dims.to_vec(), build(upstream, last, 0), cap)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    class: MeasurementClass,
    /// Party dimensions; a single entry for a global measurement.
    dims: Vec<usize>,
    nodes: Vec<ManifestNode>,
}

#[derive(Serialize, Deserialize)]
struct ManifestNode {
    /// `upstream`, `last`, `party` or `tree`.
    role: String,
    /// Party index, or the upstream history for `last`.
    index: usize,
    /// Outcome path from the root, for `tree` nodes.
    #[serde(default)]
    path: Vec<usize>,
    effects: Vec<String>,
}

pub const MANIFEST_FILE: &str = "witness.json";

/// Write `witness` into `dir`: a manifest plus one operator file per effect.
pub fn write_witness(dir: impl AsRef<Path>, witness: &Witness, dims: &[usize]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut nodes = Vec::new();
    let mut emit = |role: &str, index: usize, path: Vec<usize>, povm: &Povm| -> Result<()> {
        let mut files = Vec::new();
        let tag = if role == "tree" {
            std::iter::once("tree-r".to_string())
                .chain(path.iter().map(|a| a.to_string()))
                .collect::<Vec<_>>()
                .join("-")
        } else {
            format!("{role}-{index}")
        };
        for (a, e) in povm.effects().iter().enumerate() {
            let name = format!("{tag}-e{a}.json");
            io::write_operator(dir.join(&name), &[e.nrows()], e)?;
            files.push(name);
        }
        nodes.push(ManifestNode {
            role: role.into(),
            index,
            path,
            effects: files,
        });
        Ok(())
    };
    match witness {
        Witness::Global(p) => emit("global", 0, Vec::new(), p)?,
        Witness::Product(ps) => {
            for (i, p) in ps.iter().enumerate() {
                emit("party", i, Vec::new(), p)?;
            }
        }
        Witness::Parallel { upstream, last } => {
            for (i, p) in upstream.iter().enumerate() {
                emit("upstream", i, Vec::new(), p)?;
            }
            for (h, p) in last.iter().enumerate() {
                emit("last", h, Vec::new(), p)?;
            }
        }
        Witness::Tree(t) => {
            fn visit(
                node: &MeasurementNode,
                path: &mut Vec<usize>,
                emit: &mut dyn FnMut(&str, usize, Vec<usize>, &Povm) -> Result<()>,
            ) -> Result<()> {
                emit("tree", path.len(), path.clone(), &node.povm)?;
                for (a, c) in node.children.iter().enumerate() {
                    path.push(a);
                    visit(c, path, emit)?;
                    path.pop();
                }
                Ok(())
            }
            visit(t.root(), &mut Vec::new(), &mut emit)?;
        }
    }
    let manifest = Manifest {
        class: witness.class(),
        dims: dims.to_vec(),
        nodes,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;
    std::fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

/// Read a witness written by [`write_witness`]; returns it with the party
/// dimensions.
pub fn read_witness(dir: impl AsRef<Path>) -> Result<(Witness, Vec<usize>)> {
    let dir = dir.as_ref();
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        Error::Format(format!("{MANIFEST_FILE} line {} column {}: {e}", e.line(), e.column()))
    })?;
    let load = |node: &ManifestNode| -> Result<Povm> {
        let effects = node
            .effects
            .iter()
            .map(|f| io::read_operator(dir.join(f)).map(|(_, m)| m))
            .collect::<Result<Vec<_>>>()?;
        Povm::new(effects).map_err(|e| Error::Format(format!("effects {:?}: {e}", node.effects)))
    };
    let of_role = |role: &str| -> Result<Vec<Povm>> {
        manifest
            .nodes
            .iter()
            .filter(|n| n.role == role)
            .map(load)
            .collect()
    };
    let witness = match manifest.class {
        MeasurementClass::All => Witness::Global(
            of_role("global")?
                .pop()
                .ok_or_else(|| Error::Format("no `global` node".into()))?,
        ),
        MeasurementClass::Lo => Witness::Product(of_role("party")?),
        MeasurementClass::OneWayParallel => Witness::Parallel {
            upstream: of_role("upstream")?,
            last: of_role("last")?,
        },
        MeasurementClass::OneWayFull => {
            let mut by_path: Vec<(Vec<usize>, Povm)> = manifest
                .nodes
                .iter()
                .filter(|n| n.role == "tree")
                .map(|n| load(n).map(|p| (n.path.clone(), p)))
                .collect::<Result<_>>()?;
            by_path.sort_by(|a, b| a.0.cmp(&b.0));
            fn build(path: &mut Vec<usize>, nodes: &[(Vec<usize>, Povm)]) -> Result<MeasurementNode> {
                let povm = nodes
                    .iter()
                    .find(|(p, _)| p == path)
                    .map(|(_, p)| p.clone())
                    .ok_or_else(|| Error::Format(format!("missing tree node {path:?}")))?;
                let has_children = nodes.iter().any(|(p, _)| p.len() == path.len() + 1 && p.starts_with(path));
                let mut children = Vec::new();
                if has_children {
                    for a in 0..povm.num_outcomes() {
                        path.push(a);
                        children.push(build(path, nodes)?);
                        path.pop();
                    }
                }
                Ok(MeasurementNode { povm, children })
            }
            let root = build(&mut Vec::new(), &by_path)?;
            let cap = by_path.iter().map(|(_, p)| p.num_outcomes()).max().unwrap_or(1);
            Witness::Tree(
                AdaptiveMeasurementTree::with_outcome_cap(manifest.dims.clone(), root, cap)
                    .map_err(|e| Error::Format(format!("tree: {e}")))?,
            )
        }
    };
    Ok((witness, manifest.dims))
}
