//! Reaction network construction from design matrices.
//!
//! Two constructors, both driven by the exact lattice data from
//! [`crate::matrix`]:
//!
//! * [`build_mld_network`] turns each kernel-lattice generator into one
//!   reversible mass-action reaction with unit rates. Its equilibria (within
//!   a positive stoichiometric compatibility class) are maximum-likelihood
//!   distributions.
//! * [`build_mle_network`] extends that net with one catalytic producer and
//!   one decay reaction per independent column, over extra parameter species
//!   `T1..Tm` whose equilibrium values are maximum-likelihood parameters.
//!
//! Both take the generating vectors as a plain slice. Any lattice basis of
//! `Z^n ∩ ker A` produces a network with the right equilibria, but only a
//! *saturated* generating set ([`crate::matrix::DesignMatrix::markov_basis`])
//! guarantees the structural property the convergence theory needs: no
//! critical siphons, hence no boundary face that can trap a trajectory.
//! The pipeline therefore builds networks from the Markov basis.

mod analysis;
pub mod textfmt;

pub use analysis::{
    balance_residuals, enumerate_siphons, enumerate_siphons_bounded, is_critical_siphon,
    is_siphon, is_weakly_reversible, stoichiometric_subspace, StoichiometricSubspace,
    DEFAULT_SIPHON_SPECIES_BOUND,
};

use crate::matrix::{ColumnSet, DesignMatrix};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CrnError {
    #[error("reaction must change at least one species count")]
    TrivialReaction,
    #[error("reaction rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("reaction references {found} species but the network declares {expected}")]
    SpeciesCountMismatch { expected: usize, found: usize },
    #[error("duplicate species name {0:?}")]
    DuplicateSpecies(String),
    #[error(
        "column {column} of the design matrix has a negative entry; \
         estimator reactions need nonnegative stoichiometry"
    )]
    NegativeStoichiometry {
        /// 1-based column index.
        column: usize,
    },
    #[error("{n_species} species exceed the siphon enumeration bound of {bound}")]
    TooManySpecies { n_species: usize, bound: usize },
    #[error("the given species set is not a siphon of this network")]
    NotASiphon,
    #[error("concentration vector must be strictly positive in every coordinate")]
    NonPositiveAlpha,
    #[error("expected a vector of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("linear program solver failed: {0}")]
    Lp(String),
}

/// One irreversible mass-action reaction `y -> y'` with rate constant `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    reactant: Vec<u64>,
    product: Vec<u64>,
    rate: f64,
}

impl Reaction {
    pub fn new(reactant: Vec<u64>, product: Vec<u64>, rate: f64) -> Result<Self, CrnError> {
        if reactant.len() != product.len() {
            return Err(CrnError::DimensionMismatch {
                expected: reactant.len(),
                found: product.len(),
            });
        }
        if reactant == product {
            return Err(CrnError::TrivialReaction);
        }
        if !(rate.is_finite() && rate > 0.0) {
            return Err(CrnError::InvalidRate(rate));
        }
        Ok(Reaction { reactant, product, rate })
    }

    pub fn reactant(&self) -> &[u64] {
        &self.reactant
    }

    pub fn product(&self) -> &[u64] {
        &self.product
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `y' - y`.
    pub fn net_vector(&self) -> Vec<i64> {
        self.reactant
            .iter()
            .zip(&self.product)
            .map(|(&y, &yp)| yp as i64 - y as i64)
            .collect()
    }

    /// Sum of reactant coefficients (total molecules consumed).
    pub fn reactant_size(&self) -> u64 {
        self.reactant.iter().sum()
    }

    pub fn with_rate(&self, rate: f64) -> Result<Self, CrnError> {
        Reaction::new(self.reactant.clone(), self.product.clone(), rate)
    }
}

/// Where a generated reaction came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReactionTag {
    /// Forward direction of kernel basis vector `i` (positive part consumed).
    KernelForward(usize),
    /// Backward direction of kernel basis vector `i`.
    KernelBackward(usize),
    /// Decay of the theta monomial for column `j` (0-based).
    ThetaDecay(usize),
    /// Catalytic production of the theta monomial for column `j` (0-based).
    ThetaProduction(usize),
    /// Parsed from text or assembled by hand.
    Unspecified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reactions: Vec<Reaction>,
    tags: Vec<ReactionTag>,
}

impl ReactionNetwork {
    pub fn new(species: Vec<String>, reactions: Vec<Reaction>) -> Result<Self, CrnError> {
        let tags = vec![ReactionTag::Unspecified; reactions.len()];
        Self::with_tags(species, reactions, tags)
    }

    pub fn with_tags(
        species: Vec<String>,
        reactions: Vec<Reaction>,
        tags: Vec<ReactionTag>,
    ) -> Result<Self, CrnError> {
        for (i, name) in species.iter().enumerate() {
            if species[..i].contains(name) {
                return Err(CrnError::DuplicateSpecies(name.clone()));
            }
        }
        assert_eq!(reactions.len(), tags.len(), "one tag per reaction");
        for r in &reactions {
            if r.reactant.len() != species.len() {
                return Err(CrnError::SpeciesCountMismatch {
                    expected: species.len(),
                    found: r.reactant.len(),
                });
            }
        }
        Ok(ReactionNetwork { species, reactions, tags })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn n_reactions(&self) -> usize {
        self.reactions.len()
    }

    pub fn tags(&self) -> &[ReactionTag] {
        &self.tags
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// Net change vectors `y' - y`, one per reaction.
    pub fn net_vectors(&self) -> Vec<Vec<i64>> {
        self.reactions.iter().map(Reaction::net_vector).collect()
    }

    /// Replaces every rate constant. `rates` must match the reaction count.
    pub fn with_rates(&self, rates: &[f64]) -> Result<Self, CrnError> {
        if rates.len() != self.reactions.len() {
            return Err(CrnError::DimensionMismatch {
                expected: self.reactions.len(),
                found: rates.len(),
            });
        }
        let reactions = self
            .reactions
            .iter()
            .zip(rates)
            .map(|(r, &k)| r.with_rate(k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ReactionNetwork {
            species: self.species.clone(),
            reactions,
            tags: self.tags.clone(),
        })
    }

    pub fn rates(&self) -> Vec<f64> {
        self.reactions.iter().map(Reaction::rate).collect()
    }
}

/// `x^y = prod_i x_i^{y_i}`, with the convention `0^0 = 1`.
pub(crate) fn monomial(x: &[f64], y: &[u64]) -> f64 {
    x.iter()
        .zip(y)
        .filter(|(_, &e)| e > 0)
        .map(|(&b, &e)| b.powi(e as i32))
        .product()
}

fn species_names(n: usize, m: usize) -> Vec<String> {
    let mut names: Vec<String> = (1..=n).map(|j| format!("X{j}")).collect();
    names.extend((1..=m).map(|i| format!("T{i}")));
    names
}

/// Distribution network: species `X1..Xn`, one reversible unit-rate reaction
/// per kernel-lattice generator, positive part against negated negative part.
///
/// `generators` must be nonzero vectors in `ker A`; both a plain kernel
/// basis and a Markov basis qualify (see the module docs for why the
/// pipeline uses the latter).
pub fn build_mld_network(a: &DesignMatrix, generators: &[Vec<i64>]) -> ReactionNetwork {
    let n = a.cols();
    let mut reactions = Vec::with_capacity(2 * generators.len());
    let mut tags = Vec::with_capacity(2 * generators.len());
    for (i, b) in generators.iter().enumerate() {
        assert_eq!(b.len(), n, "generator does not match matrix width");
        debug_assert!(
            a.apply_int(b).iter().all(|&x| x == 0),
            "generator {b:?} is not a kernel vector"
        );
        let pos: Vec<u64> = b.iter().map(|&v| v.max(0) as u64).collect();
        let neg: Vec<u64> = b.iter().map(|&v| (-v).max(0) as u64).collect();
        let fwd = Reaction::new(pos.clone(), neg.clone(), 1.0)
            .expect("kernel vector is nonzero with disjoint sign supports");
        let bwd = Reaction::new(neg, pos, 1.0).expect("mirror of a valid reaction");
        reactions.push(fwd);
        tags.push(ReactionTag::KernelForward(i));
        reactions.push(bwd);
        tags.push(ReactionTag::KernelBackward(i));
    }
    ReactionNetwork::with_tags(species_names(n, 0), reactions, tags)
        .expect("generated reactions are well formed")
}

/// Estimator network: the distribution net plus, for each independent column
/// `j`, a decay `sum_i a_ij T_i -> 0` and a catalytic producer
/// `X_j -> X_j + sum_i a_ij T_i`, all at rate 1.
///
/// Requires nonnegative entries in the selected columns; a negative
/// coefficient has no reading as a molecule count.
pub fn build_mle_network(
    a: &DesignMatrix,
    generators: &[Vec<i64>],
    columns: &ColumnSet,
) -> Result<ReactionNetwork, CrnError> {
    let n = a.cols();
    let m = a.rows();
    for &j in columns.indices() {
        if a.column(j).iter().any(|&v| v < 0) {
            return Err(CrnError::NegativeStoichiometry { column: j + 1 });
        }
    }
    let mld = build_mld_network(a, generators);
    let mut reactions: Vec<Reaction> = mld
        .reactions
        .iter()
        .map(|r| {
            let mut reactant = r.reactant.clone();
            let mut product = r.product.clone();
            reactant.resize(n + m, 0);
            product.resize(n + m, 0);
            Reaction { reactant, product, rate: r.rate }
        })
        .collect();
    let mut tags = mld.tags.clone();
    for &j in columns.indices() {
        let mut theta = vec![0u64; n + m];
        for i in 0..m {
            theta[n + i] = a.entry(i, j) as u64;
        }
        let decay = Reaction::new(theta.clone(), vec![0; n + m], 1.0)
            .expect("column sum is nonzero, so the monomial is nonempty");
        let mut catalyst = vec![0u64; n + m];
        catalyst[j] = 1;
        let mut with_theta = theta;
        with_theta[j] += 1;
        let produce =
            Reaction::new(catalyst, with_theta, 1.0).expect("theta side is nonempty");
        reactions.push(decay);
        tags.push(ReactionTag::ThetaDecay(j));
        reactions.push(produce);
        tags.push(ReactionTag::ThetaProduction(j));
    }
    debug_assert_eq!(reactions.len(), 2 * (generators.len() + columns.len()));
    ReactionNetwork::with_tags(species_names(n, m), reactions, tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_matrix() -> DesignMatrix {
        DesignMatrix::new(vec![vec![2, 1, 0], vec![0, 1, 2]]).unwrap()
    }

    fn paper_mld() -> ReactionNetwork {
        let a = paper_matrix();
        let b = a.kernel_basis().unwrap();
        build_mld_network(&a, b.vectors())
    }

    #[test]
    fn reaction_validation() {
        assert!(Reaction::new(vec![1, 0], vec![0, 1], 1.0).is_ok());
        assert_eq!(
            Reaction::new(vec![1, 0], vec![1, 0], 1.0).unwrap_err(),
            CrnError::TrivialReaction
        );
        assert_eq!(
            Reaction::new(vec![1], vec![2], 0.0).unwrap_err(),
            CrnError::InvalidRate(0.0)
        );
        assert!(Reaction::new(vec![1], vec![2], -3.0).is_err());
        assert!(Reaction::new(vec![1], vec![2], f64::NAN).is_err());
    }

    #[test]
    fn mld_network_for_paper_matrix() {
        let net = paper_mld();
        assert_eq!(net.species(), &["X1", "X2", "X3"]);
        assert_eq!(net.n_reactions(), 2);
        // X1 + X3 -> 2 X2 and back, both at rate 1.
        assert_eq!(net.reactions()[0].reactant(), &[1, 0, 1]);
        assert_eq!(net.reactions()[0].product(), &[0, 2, 0]);
        assert_eq!(net.reactions()[1].reactant(), &[0, 2, 0]);
        assert_eq!(net.reactions()[1].product(), &[1, 0, 1]);
        assert!(net.rates().iter().all(|&k| k == 1.0));
        assert_eq!(
            net.tags(),
            &[ReactionTag::KernelForward(0), ReactionTag::KernelBackward(0)]
        );
    }

    #[test]
    fn mld_network_for_identity_has_no_reactions() {
        let a = DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let b = a.kernel_basis().unwrap();
        let net = build_mld_network(&a, b.vectors());
        assert_eq!(net.n_species(), 2);
        assert_eq!(net.n_reactions(), 0);
    }

    #[test]
    fn mld_network_isomerization() {
        let a = DesignMatrix::new(vec![vec![1, 1]]).unwrap();
        let b = a.kernel_basis().unwrap();
        let net = build_mld_network(&a, b.vectors());
        assert_eq!(net.n_reactions(), 2);
        assert_eq!(net.reactions()[0].reactant(), &[1, 0]);
        assert_eq!(net.reactions()[0].product(), &[0, 1]);
    }

    #[test]
    fn mld_reactions_conserve_molecule_count() {
        let a = DesignMatrix::new(vec![vec![2, 1, 0, 3], vec![1, 2, 3, 0]]).unwrap();
        let b = a.kernel_basis().unwrap();
        let net = build_mld_network(&a, b.vectors());
        assert!(net.n_reactions() > 0);
        for r in net.reactions() {
            assert_eq!(
                r.reactant().iter().sum::<u64>(),
                r.product().iter().sum::<u64>()
            );
        }
    }

    #[test]
    fn mle_network_for_paper_matrix() {
        let a = paper_matrix();
        let b = a.kernel_basis().unwrap();
        let bp = a.independent_columns();
        let net = build_mle_network(&a, b.vectors(), &bp).unwrap();
        assert_eq!(net.species(), &["X1", "X2", "X3", "T1", "T2"]);
        // Twice the number of columns of A.
        assert_eq!(net.n_reactions(), 2 * a.cols());
        let r = net.reactions();
        // Kernel pair first, padded with theta zeros.
        assert_eq!(r[0].reactant(), &[1, 0, 1, 0, 0]);
        assert_eq!(r[0].product(), &[0, 2, 0, 0, 0]);
        // 2 T1 -> 0 and X1 -> X1 + 2 T1.
        assert_eq!(r[2].reactant(), &[0, 0, 0, 2, 0]);
        assert_eq!(r[2].product(), &[0, 0, 0, 0, 0]);
        assert_eq!(r[3].reactant(), &[1, 0, 0, 0, 0]);
        assert_eq!(r[3].product(), &[1, 0, 0, 2, 0]);
        // T1 + T2 -> 0 and X2 -> X2 + T1 + T2.
        assert_eq!(r[4].reactant(), &[0, 0, 0, 1, 1]);
        assert_eq!(r[4].product(), &[0, 0, 0, 0, 0]);
        assert_eq!(r[5].reactant(), &[0, 1, 0, 0, 0]);
        assert_eq!(r[5].product(), &[0, 1, 0, 1, 1]);
        assert_eq!(
            net.tags()[2..],
            [
                ReactionTag::ThetaDecay(0),
                ReactionTag::ThetaProduction(0),
                ReactionTag::ThetaDecay(1),
                ReactionTag::ThetaProduction(1),
            ]
        );
    }

    #[test]
    fn mle_network_for_identity() {
        let a = DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let b = a.kernel_basis().unwrap();
        let net = build_mle_network(&a, b.vectors(), &a.independent_columns()).unwrap();
        assert_eq!(net.species(), &["X1", "X2", "T1", "T2"]);
        let r = net.reactions();
        assert_eq!(r.len(), 4);
        assert_eq!(r[0].reactant(), &[0, 0, 1, 0]); // T1 -> 0
        assert_eq!(r[0].product(), &[0, 0, 0, 0]);
        assert_eq!(r[1].reactant(), &[1, 0, 0, 0]); // X1 -> X1 + T1
        assert_eq!(r[1].product(), &[1, 0, 1, 0]);
        assert_eq!(r[2].reactant(), &[0, 0, 0, 1]); // T2 -> 0
        assert_eq!(r[3].product(), &[0, 1, 0, 1]); // X2 -> X2 + T2
    }

    #[test]
    fn mle_network_single_row() {
        let a = DesignMatrix::new(vec![vec![1, 1]]).unwrap();
        let b = a.kernel_basis().unwrap();
        let net = build_mle_network(&a, b.vectors(), &a.independent_columns()).unwrap();
        assert_eq!(net.n_reactions(), 4);
        assert_eq!(net.reactions()[2].reactant(), &[0, 0, 1]); // T1 -> 0
        assert_eq!(net.reactions()[3].reactant(), &[1, 0, 0]); // X1 -> X1 + T1
        assert_eq!(net.reactions()[3].product(), &[1, 0, 1]);
    }

    #[test]
    fn mle_network_rejects_negative_columns() {
        let a = DesignMatrix::new(vec![vec![3, 1, 2], vec![-1, 1, 0]]).unwrap();
        let b = a.kernel_basis().unwrap();
        let err = build_mle_network(&a, b.vectors(), &a.independent_columns()).unwrap_err();
        assert_eq!(err, CrnError::NegativeStoichiometry { column: 1 });
    }

    #[test]
    fn theta_reactions_never_change_x_counts() {
        let a = paper_matrix();
        let b = a.kernel_basis().unwrap();
        let net = build_mle_network(&a, b.vectors(), &a.independent_columns()).unwrap();
        let mld = build_mld_network(&a, b.vectors());
        let n = a.cols();
        for (r, tag) in net.reactions().iter().zip(net.tags()) {
            let net_vec = r.net_vector();
            match tag {
                ReactionTag::ThetaDecay(_) | ReactionTag::ThetaProduction(_) => {
                    assert!(net_vec[..n].iter().all(|&d| d == 0));
                }
                ReactionTag::KernelForward(i) => {
                    assert_eq!(net_vec[..n], mld.reactions()[2 * i].net_vector());
                }
                ReactionTag::KernelBackward(i) => {
                    assert_eq!(net_vec[..n], mld.reactions()[2 * i + 1].net_vector());
                }
                ReactionTag::Unspecified => panic!("generated reaction left untagged"),
            }
        }
    }

    /// The structural reason the pipeline builds networks from a Markov
    /// basis: for this matrix, the plain lattice-basis network has a
    /// *critical* minimal siphon ({X1, X4, X5} supports no conservation
    /// relation), so its boundary can attract trajectories, while the
    /// saturated generating set yields a network with no critical siphon.
    #[test]
    fn markov_generators_remove_critical_siphons() {
        let a = DesignMatrix::new(vec![
            vec![0, 0, 3, 0, 2, 2],
            vec![3, 2, 2, 3, 3, 1],
            vec![2, 3, 0, 2, 0, 2],
        ])
        .unwrap();

        let kb = a.kernel_basis().unwrap();
        let lattice_net = build_mld_network(&a, kb.vectors());
        let lattice_critical = enumerate_siphons(&lattice_net)
            .unwrap()
            .into_iter()
            .filter(|s| is_critical_siphon(&lattice_net, s).unwrap())
            .count();
        assert!(lattice_critical > 0, "expected a critical siphon witness");

        let mb = a.markov_basis().unwrap();
        assert!(mb.len() > kb.dim(), "saturation must add generators here");
        let markov_net = build_mld_network(&a, &mb);
        for siphon in enumerate_siphons(&markov_net).unwrap() {
            assert!(
                !is_critical_siphon(&markov_net, &siphon).unwrap(),
                "critical siphon {siphon:?} in a saturated network"
            );
        }
    }

    #[test]
    fn network_validation() {
        let r = Reaction::new(vec![1, 0], vec![0, 1], 1.0).unwrap();
        assert!(ReactionNetwork::new(vec!["A".into(), "B".into()], vec![r.clone()]).is_ok());
        assert_eq!(
            ReactionNetwork::new(vec!["A".into()], vec![r.clone()]).unwrap_err(),
            CrnError::SpeciesCountMismatch { expected: 1, found: 2 }
        );
        assert_eq!(
            ReactionNetwork::new(vec!["A".into(), "A".into()], vec![r]).unwrap_err(),
            CrnError::DuplicateSpecies("A".into())
        );
    }

    #[test]
    fn with_rates_replaces_all() {
        let net = paper_mld();
        let scaled = net.with_rates(&[2.0, 0.5]).unwrap();
        assert_eq!(scaled.rates(), vec![2.0, 0.5]);
        assert!(net.with_rates(&[1.0]).is_err());
        assert!(net.with_rates(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn monomial_convention() {
        assert_eq!(monomial(&[2.0, 3.0], &[2, 1]), 12.0);
        assert_eq!(monomial(&[0.0, 3.0], &[0, 2]), 9.0);
        assert_eq!(monomial(&[0.0], &[0]), 1.0);
        assert_eq!(monomial(&[], &[]), 1.0);
    }
}
