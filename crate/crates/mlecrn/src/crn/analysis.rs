//! Structural analysis of reaction networks: stoichiometric subspace,
//! siphons and their criticality, weak reversibility, balance residuals.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DMatrix;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::{monomial, CrnError, ReactionNetwork};
#[cfg(test)]
use super::Reaction;

/// Default cap on species count for exhaustive siphon enumeration.
pub const DEFAULT_SIPHON_SPECIES_BOUND: usize = 20;

/// Criticality LP optimum below this is treated as exactly zero. The LP is
/// scaled so any nonzero optimum equals 1.
const CRITICAL_LP_TOL: f64 = 1e-9;

/// Relative eigenvalue cutoff separating the reaction span from its
/// orthogonal complement.
const SUBSPACE_EIG_TOL: f64 = 1e-12;

/// Orthonormal bases for the span of the reaction vectors and its
/// orthogonal complement.
#[derive(Debug, Clone)]
pub struct StoichiometricSubspace {
    basis: Vec<Vec<f64>>,
    complement: Vec<Vec<f64>>,
}

impl StoichiometricSubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Orthonormal basis of `span{y' - y}`.
    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> &[Vec<f64>] {
        &self.complement
    }
}

/// Spectral splitting of `D Dᵀ` where `D` stacks the net vectors as columns;
/// eigenvectors with nonzero eigenvalue span the same space as the columns.
pub fn stoichiometric_subspace(net: &ReactionNetwork) -> StoichiometricSubspace {
    let s = net.n_species();
    if s == 0 || net.n_reactions() == 0 {
        return StoichiometricSubspace {
            basis: Vec::new(),
            complement: (0..s)
                .map(|i| {
                    let mut e = vec![0.0; s];
                    e[i] = 1.0;
                    e
                })
                .collect(),
        };
    }
    let nets = net.net_vectors();
    let d = DMatrix::from_fn(s, nets.len(), |i, j| nets[j][i] as f64);
    let gram = &d * d.transpose();
    let eig = gram.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = lambda_max * SUBSPACE_EIG_TOL;
    let mut basis = Vec::new();
    let mut complement = Vec::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v: Vec<f64> = eig.eigenvectors.column(k).iter().cloned().collect();
        if lambda > cutoff {
            basis.push(v);
        } else {
            complement.push(v);
        }
    }
    StoichiometricSubspace { basis, complement }
}

/// Nonempty species subset closed under the siphon condition: whenever a
/// reaction produces a member, it also consumes a member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Siphon {
    /// Sorted 0-based species indices.
    pub members: Vec<usize>,
    pub minimal: bool,
    /// Unset until checked by [`is_critical_siphon`].
    pub critical: Option<bool>,
}

impl Siphon {
    pub fn member_names<'a>(&self, net: &'a ReactionNetwork) -> Vec<&'a str> {
        self.members
            .iter()
            .map(|&i| net.species()[i].as_str())
            .collect()
    }

    fn from_mask(mut mask: u32, minimal: bool) -> Siphon {
        let mut members = Vec::new();
        while mask != 0 {
            let i = mask.trailing_zeros() as usize;
            members.push(i);
            mask &= mask - 1;
        }
        Siphon { members, minimal, critical: None }
    }

    #[cfg(test)]
    fn to_mask(&self) -> u32 {
        self.members.iter().fold(0u32, |m, &i| m | (1 << i))
    }
}

fn support_mask(coeffs: &[u64]) -> u32 {
    coeffs
        .iter()
        .enumerate()
        .fold(0u32, |m, (i, &c)| if c > 0 { m | (1 << i) } else { m })
}

fn mask_is_siphon(mask: u32, supports: &[(u32, u32)]) -> bool {
    supports
        .iter()
        .all(|&(reac, prod)| prod & mask == 0 || reac & mask != 0)
}

fn reaction_supports(net: &ReactionNetwork) -> Vec<(u32, u32)> {
    net.reactions()
        .iter()
        .map(|r| (support_mask(r.reactant()), support_mask(r.product())))
        .collect()
}

/// True iff the sorted index set satisfies the siphon condition.
pub fn is_siphon(net: &ReactionNetwork, members: &[usize]) -> bool {
    if members.is_empty() || members.iter().any(|&i| i >= net.n_species()) {
        return false;
    }
    let mask = members.iter().fold(0u32, |m, &i| m | (1 << i));
    mask_is_siphon(mask, &reaction_supports(net))
}

/// All inclusion-minimal nonempty siphons, ordered by cardinality then by
/// lowest member indices.
pub fn enumerate_siphons(net: &ReactionNetwork) -> Result<Vec<Siphon>, CrnError> {
    enumerate_siphons_bounded(net, DEFAULT_SIPHON_SPECIES_BOUND)
}

/// Exhaustive subset scan in order of ascending cardinality. A candidate
/// containing an already-found siphon is skipped: it cannot be minimal, and
/// every minimal siphon contains no smaller siphon, so it is never skipped
/// itself.
pub fn enumerate_siphons_bounded(
    net: &ReactionNetwork,
    bound: usize,
) -> Result<Vec<Siphon>, CrnError> {
    let s = net.n_species();
    // Masks are u32, so 31 species is a hard ceiling regardless of the bound.
    let effective = bound.min(31);
    if s > effective {
        return Err(CrnError::TooManySpecies { n_species: s, bound: effective });
    }
    let supports = reaction_supports(net);
    let mut found_masks: Vec<u32> = Vec::new();
    for k in 1..=s {
        // Gosper's hack: walk all masks of popcount k in increasing order.
        let mut mask: u32 = (1 << k) - 1;
        let limit: u32 = 1 << s;
        while mask < limit {
            if !found_masks.iter().any(|&f| f & !mask == 0)
                && mask_is_siphon(mask, &supports)
            {
                found_masks.push(mask);
            }
            let c = mask & mask.wrapping_neg();
            let r = mask + c;
            if r >= limit {
                break;
            }
            mask = ((r ^ mask) >> (c.trailing_zeros() + 2)) | r;
        }
    }
    found_masks.sort_by_key(|&m| (m.count_ones(), m));
    Ok(found_masks
        .into_iter()
        .map(|m| Siphon::from_mask(m, true))
        .collect())
}

/// A siphon `T` is critical when no nonzero `v ≥ 0` supported inside `T`
/// is orthogonal to every reaction vector.
///
/// Solved as an LP: maximize `Σ_{i∈T} v_i` subject to `v ⊥ (y'-y)` for all
/// reactions, `0 ≤ v_i ≤ 1`, `Σ v_i ≤ 1`. The scaling constraint makes the
/// optimum exactly 0 (critical) or 1 (witness found).
pub fn is_critical_siphon(net: &ReactionNetwork, siphon: &Siphon) -> Result<bool, CrnError> {
    if !is_siphon(net, &siphon.members) {
        return Err(CrnError::NotASiphon);
    }
    let directions: BTreeSet<Vec<i64>> = net.net_vectors().into_iter().collect();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = siphon
        .members
        .iter()
        .map(|_| problem.add_var(1.0, (0.0, 1.0)))
        .collect();
    for d in &directions {
        let terms: Vec<_> = siphon
            .members
            .iter()
            .zip(&vars)
            .filter(|(&i, _)| d[i] != 0)
            .map(|(&i, &v)| (v, d[i] as f64))
            .collect();
        if !terms.is_empty() {
            problem.add_constraint(&terms, ComparisonOp::Eq, 0.0);
        }
    }
    let scale: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
    problem.add_constraint(&scale, ComparisonOp::Le, 1.0);
    let outcome = problem.solve().map_err(|e| CrnError::Lp(e.to_string()))?;
    let solution = outcome
        .into_solution()
        .map_err(|_| CrnError::Lp("solver interrupted".into()))?;
    Ok(solution.objective() <= CRITICAL_LP_TOL)
}

/// True iff each reaction's reactant and product complexes lie in the same
/// strongly connected component of the complex graph.
pub fn is_weakly_reversible(net: &ReactionNetwork) -> bool {
    let mut complex_ids: BTreeMap<&[u64], usize> = BTreeMap::new();
    let mut graph: DiGraph<(), ()> = DiGraph::new();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for r in net.reactions() {
        for side in [r.reactant(), r.product()] {
            if !complex_ids.contains_key(side) {
                complex_ids.insert(side, nodes.len());
                nodes.push(graph.add_node(()));
            }
        }
        edges.push((complex_ids[r.reactant()], complex_ids[r.product()]));
    }
    for &(a, b) in &edges {
        graph.add_edge(nodes[a], nodes[b], ());
    }
    let sccs = tarjan_scc(&graph);
    let mut component = vec![0usize; nodes.len()];
    for (ci, comp) in sccs.iter().enumerate() {
        for &node in comp {
            component[node.index()] = ci;
        }
    }
    edges.iter().all(|&(a, b)| component[a] == component[b])
}

/// How far `alpha` is from balancing the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceResiduals {
    /// Max mismatch of forward vs backward flow over reversible pairs;
    /// infinite when some reaction has no reverse.
    pub detailed: f64,
    /// Max over complexes of |total outflow - total inflow|.
    pub complex: f64,
}

pub fn balance_residuals(
    net: &ReactionNetwork,
    alpha: &[f64],
) -> Result<BalanceResiduals, CrnError> {
    if alpha.len() != net.n_species() {
        return Err(CrnError::DimensionMismatch {
            expected: net.n_species(),
            found: alpha.len(),
        });
    }
    if alpha.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
        return Err(CrnError::NonPositiveAlpha);
    }

    // Duplicate (y, y') reactions act as one reaction with summed rate.
    let mut aggregated: BTreeMap<(&[u64], &[u64]), f64> = BTreeMap::new();
    for r in net.reactions() {
        *aggregated.entry((r.reactant(), r.product())).or_insert(0.0) += r.rate();
    }

    let mut detailed = 0.0f64;
    for (&(y, yp), &kf) in &aggregated {
        match aggregated.get(&(yp, y)) {
            Some(&kr) => {
                if (y, yp) < (yp, y) {
                    let gap = (kf * monomial(alpha, y) - kr * monomial(alpha, yp)).abs();
                    detailed = detailed.max(gap);
                }
            }
            None => {
                detailed = f64::INFINITY;
            }
        }
    }

    let mut flow: BTreeMap<&[u64], (f64, f64)> = BTreeMap::new();
    for (&(y, yp), &k) in &aggregated {
        let f = k * monomial(alpha, y);
        flow.entry(y).or_insert((0.0, 0.0)).0 += f;
        flow.entry(yp).or_insert((0.0, 0.0)).1 += f;
    }
    let complex = flow
        .values()
        .map(|&(out, inn)| (out - inn).abs())
        .fold(0.0f64, f64::max);

    Ok(BalanceResiduals { detailed, complex })
}
