//! Ground-truth maximum-likelihood computation by convex optimization.
//!
//! The distribution estimate is the maximum-entropy point of the affine
//! slice `{p in ri(simplex) : A p = A u/|u|1}`, found by damped Newton on
//! the smooth strictly convex log-partition dual. This route shares no code
//! with the reaction-network simulation, so the two can certify each other.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::matrix::{ColumnSet, DesignMatrix, KernelBasis, MatrixError};

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("data vector must contain at least one positive count")]
    EmptyData,
    #[error("expected a vector of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("frequencies must be nonnegative and sum to 1, got sum {0}")]
    InvalidFrequencies(f64),
    #[error(
        "the sufficient polytope has empty interior for this data; \
         the maximum likelihood distribution lies on the simplex boundary"
    )]
    PolytopeEmptyOrBoundary,
    #[error("dual Newton did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("probability vector must be strictly positive")]
    NonPositiveProbability,
    #[error("theta must be strictly positive")]
    NonPositiveTheta,
    #[error("vector must be strictly positive")]
    NonPositiveX,
    #[error("log p is {residual:e} off the row span of the design matrix")]
    NotInToricVariety { residual: f64 },
    #[error("feasibility solve failed: {0}")]
    Lp(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Observed counts, one per outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataVector {
    counts: Vec<u64>,
    total: u64,
}

impl DataVector {
    pub fn new(counts: Vec<u64>) -> Result<Self, InferenceError> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(InferenceError::EmptyData);
        }
        Ok(DataVector { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `u / |u|1`, a point of the simplex.
    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.total as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }
}

const NEWTON_MAX_ITERS: usize = 200;
const MOMENT_TOL: f64 = 1e-12;
/// Below this the dual is running off to infinity, i.e. the optimum sits on
/// the simplex boundary rather than in the relative interior.
const BOUNDARY_P_MIN: f64 = 1e-280;
/// A max-min coordinate below this means no strictly positive point
/// satisfies the moment constraints.
const INTERIOR_LP_TOL: f64 = 1e-11;
const VARIETY_LOG_TOL: f64 = 1e-6;
const MONOMIAL_TOL: f64 = 1e-8;
pub const DEFAULT_VERIFY_TOL: f64 = 1e-5;

fn design_to_dmatrix(a: &DesignMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.entry(i, j) as f64)
}

/// Log-partition value and the model distribution for natural parameter `y`:
/// `p_j = exp(z_j - lse(z))` with `z = A^T y`.
fn partition(amat: &DMatrix<f64>, y: &DVector<f64>) -> (f64, DVector<f64>) {
    let z = amat.transpose() * y;
    let zmax = z.max();
    let sum: f64 = z.iter().map(|&v| (v - zmax).exp()).sum();
    let lse = zmax + sum.ln();
    let p = DVector::from_iterator(z.len(), z.iter().map(|&v| (v - lse).exp()));
    (lse, p)
}

/// Decides whether `{p > 0 : A p = b}` is nonempty by maximizing the
/// smallest coordinate over the closed polytope. The moment residual of the
/// dual iteration cannot make this call: it vanishes along the divergent
/// path toward a boundary optimum as well.
fn interior_point_exists(a: &DesignMatrix, b: &DVector<f64>) -> Result<bool, InferenceError> {
    let n = a.cols();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let floor = problem.add_var(1.0, (0.0, 1.0));
    let p_vars: Vec<_> = (0..n).map(|_| problem.add_var(0.0, (0.0, 1.0))).collect();
    for i in 0..a.rows() {
        let terms: Vec<_> = (0..n)
            .map(|j| (p_vars[j], a.entry(i, j) as f64))
            .filter(|&(_, c)| c != 0.0)
            .collect();
        problem.add_constraint(&terms, ComparisonOp::Eq, b[i]);
    }
    for &pj in &p_vars {
        problem.add_constraint([(pj, 1.0), (floor, -1.0)], ComparisonOp::Ge, 0.0);
    }
    let outcome = match problem.solve() {
        Ok(outcome) => outcome,
        Err(microlp::Error::Infeasible) => return Ok(false),
        Err(e) => return Err(InferenceError::Lp(e.to_string())),
    };
    let solution = outcome
        .into_solution()
        .map_err(|_| InferenceError::Lp("solver interrupted".into()))?;
    Ok(solution.objective() > INTERIOR_LP_TOL)
}

/// Maximum-likelihood distribution for observed counts.
pub fn mld_oracle(a: &DesignMatrix, u: &DataVector) -> Result<Vec<f64>, InferenceError> {
    if u.len() != a.cols() {
        return Err(InferenceError::DimensionMismatch {
            expected: a.cols(),
            found: u.len(),
        });
    }
    mld_oracle_frequencies(a, &u.frequencies())
}

/// Same computation with the simplex point given directly.
///
/// Finds `y` such that `p_j ∝ exp((A^T y)_j)` matches the moments `A q`;
/// by strict convexity of the log-partition function that `p` is the
/// entropy maximizer over the polytope.
pub fn mld_oracle_frequencies(a: &DesignMatrix, q: &[f64]) -> Result<Vec<f64>, InferenceError> {
    if q.len() != a.cols() {
        return Err(InferenceError::DimensionMismatch {
            expected: a.cols(),
            found: q.len(),
        });
    }
    let sum: f64 = q.iter().sum();
    if q.iter().any(|&v| !(v.is_finite() && v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(InferenceError::InvalidFrequencies(sum));
    }

    let amat = design_to_dmatrix(a);
    let m = a.rows();
    let b = &amat * DVector::from_column_slice(q);
    if !interior_point_exists(a, &b)? {
        return Err(InferenceError::PolytopeEmptyOrBoundary);
    }
    let gtol = MOMENT_TOL * (1.0 + b.amax());

    let mut y = DVector::zeros(m);
    let (mut f, mut p) = {
        let (lse, p) = partition(&amat, &y);
        (lse - b.dot(&y), p)
    };

    for _ in 0..NEWTON_MAX_ITERS {
        let mu = &amat * &p;
        let g = &mu - &b;
        if g.amax() <= gtol {
            return Ok(p.iter().cloned().collect());
        }
        if p.min() < BOUNDARY_P_MIN {
            return Err(InferenceError::PolytopeEmptyOrBoundary);
        }

        // H = A diag(p) A^T - mu mu^T, the moment covariance.
        let scaled = &amat * DMatrix::from_diagonal(&p);
        let h = &scaled * amat.transpose() - &mu * mu.transpose();
        let hscale = h.diagonal().amax().max(1e-300);

        // Newton direction, with an identity shift escalated until the
        // factorization succeeds (needed when rank A < m).
        let mut lambda = 0.0;
        let direction = loop {
            let shifted = &h + DMatrix::identity(m, m) * lambda;
            if let Some(chol) = shifted.cholesky() {
                break chol.solve(&(-&g));
            }
            lambda = if lambda == 0.0 { hscale * 1e-12 } else { lambda * 100.0 };
            if lambda > hscale * 1e6 {
                return Err(InferenceError::NonConvergence(NEWTON_MAX_ITERS));
            }
        };

        // Armijo backtracking on the dual objective.
        let slope = g.dot(&direction);
        let mut t = 1.0;
        loop {
            let y_try = &y + &direction * t;
            let (lse, p_try) = partition(&amat, &y_try);
            let f_try = lse - b.dot(&y_try);
            if f_try <= f + 1e-4 * t * slope || t < 1e-12 {
                y = y_try;
                f = f_try;
                p = p_try;
                break;
            }
            t *= 0.5;
        }
    }

    if p.min() < 1e-12 {
        Err(InferenceError::PolytopeEmptyOrBoundary)
    } else {
        Err(InferenceError::NonConvergence(NEWTON_MAX_ITERS))
    }
}

/// Parameter estimate recovered from a distribution on the model variety.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaReadout {
    /// Positive parameter vector with `sum_j theta^{a_j} = 1`.
    pub theta: Vec<f64>,
    /// True iff rank A = m, making theta the only solution; otherwise this
    /// is the minimum-norm representative in log space.
    pub theta_unique: bool,
    /// `max_j |theta^{a_j} - p_j|` over all columns.
    pub monomial_residual: f64,
}

/// Solves `A^T log theta = log p_hat` (minimum-norm least squares), then
/// rescales so the monomials sum to 1. The `columns` are the ones realized
/// by estimator reactions; their monomial identities are enforced at 1e-8.
pub fn theta_readout(
    a: &DesignMatrix,
    columns: &ColumnSet,
    p_hat: &[f64],
) -> Result<ThetaReadout, InferenceError> {
    if p_hat.len() != a.cols() {
        return Err(InferenceError::DimensionMismatch {
            expected: a.cols(),
            found: p_hat.len(),
        });
    }
    if p_hat.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(InferenceError::NonPositiveProbability);
    }
    let amat = design_to_dmatrix(a);
    let z = DVector::from_iterator(p_hat.len(), p_hat.iter().map(|&v| v.ln()));
    let at = amat.transpose();
    let svd = at.clone().svd(true, true);
    let w = svd
        .solve(&z, 1e-12)
        .map_err(|_| InferenceError::NotInToricVariety { residual: f64::INFINITY })?;
    let residual = (&at * &w - &z).amax();
    if residual > VARIETY_LOG_TOL {
        return Err(InferenceError::NotInToricVariety { residual });
    }

    // Shift log theta along the all-ones direction; every monomial picks up
    // the same factor s^{-1} because all column sums equal c.
    let c = a.column_sum() as f64;
    let s: f64 = (&at * &w).iter().map(|&v| v.exp()).sum();
    let shift = s.ln() / c;
    let theta: Vec<f64> = w.iter().map(|&v| (v - shift).exp()).collect();

    let monomials: Vec<f64> = (0..a.cols())
        .map(|j| {
            (0..a.rows())
                .map(|i| theta[i].powi(a.entry(i, j) as i32))
                .product()
        })
        .collect();
    let monomial_residual = monomials
        .iter()
        .zip(p_hat)
        .map(|(m, p)| (m - p).abs())
        .fold(0.0f64, f64::max);
    for &j in columns.indices() {
        let gap = (monomials[j] - p_hat[j]).abs();
        if gap > MONOMIAL_TOL {
            return Err(InferenceError::NotInToricVariety { residual: gap });
        }
    }

    Ok(ThetaReadout {
        theta,
        theta_unique: a.rank() == a.rows(),
        monomial_residual,
    })
}

/// `sum_j u_j log p_j(theta)` with `p_j = theta^{a_j}` normalized by the
/// partition function. The multinomial coefficient is omitted.
pub fn log_likelihood(
    a: &DesignMatrix,
    theta: &[f64],
    u: &DataVector,
) -> Result<f64, InferenceError> {
    if u.len() != a.cols() {
        return Err(InferenceError::DimensionMismatch {
            expected: a.cols(),
            found: u.len(),
        });
    }
    let weights: Vec<f64> = u.counts().iter().map(|&c| c as f64).collect();
    log_likelihood_weighted(a, theta, &weights)
}

/// Likelihood with real-valued observation weights; with frequencies as
/// weights this is the per-observation expected log-likelihood.
pub fn log_likelihood_weighted(
    a: &DesignMatrix,
    theta: &[f64],
    weights: &[f64],
) -> Result<f64, InferenceError> {
    if theta.len() != a.rows() {
        return Err(InferenceError::DimensionMismatch {
            expected: a.rows(),
            found: theta.len(),
        });
    }
    if weights.len() != a.cols() {
        return Err(InferenceError::DimensionMismatch {
            expected: a.cols(),
            found: weights.len(),
        });
    }
    if theta.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(InferenceError::NonPositiveTheta);
    }
    let log_theta: Vec<f64> = theta.iter().map(|&v| v.ln()).collect();
    let z: Vec<f64> = (0..a.cols())
        .map(|j| {
            (0..a.rows())
                .map(|i| a.entry(i, j) as f64 * log_theta[i])
                .sum()
        })
        .collect();
    let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = zmax + z.iter().map(|&v| (v - zmax).exp()).sum::<f64>().ln();
    Ok(weights
        .iter()
        .zip(&z)
        .map(|(&wj, &zj)| wj * (zj - lse))
        .sum())
}

/// `max_b |sum_j b_j log x_j|`: zero exactly on the model variety.
pub fn birch_residual(basis: &KernelBasis, x: &[f64]) -> Result<f64, InferenceError> {
    if x.len() != basis.ambient_dim() {
        return Err(InferenceError::DimensionMismatch {
            expected: basis.ambient_dim(),
            found: x.len(),
        });
    }
    if x.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(InferenceError::NonPositiveX);
    }
    let logs: Vec<f64> = x.iter().map(|&v| v.ln()).collect();
    Ok(basis
        .vectors()
        .iter()
        .map(|b| {
            b.iter()
                .zip(&logs)
                .map(|(&bj, &lj)| bj as f64 * lj)
                .sum::<f64>()
                .abs()
        })
        .fold(0.0f64, f64::max))
}

/// Residual diagnostics for one candidate equilibrium state.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StateDiagnostics {
    /// Distance from the model variety in log coordinates; infinite when the
    /// state has nonpositive entries.
    pub birch_residual: f64,
    /// `max_i |(A x)_i - (A u/|u|1)_i|`.
    pub moment_residual: f64,
}

/// Side-by-side comparison of a simulated equilibrium and the optimization
/// oracle's answer for the same data.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub linf_distance: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub simulated: StateDiagnostics,
    pub oracle: StateDiagnostics,
}

fn diagnostics(a: &DesignMatrix, basis: &KernelBasis, q: &[f64], x: &[f64]) -> StateDiagnostics {
    let birch = birch_residual(basis, x).unwrap_or(f64::INFINITY);
    let target = a.apply(q);
    let moment = a
        .apply(x)
        .iter()
        .zip(&target)
        .map(|(got, want)| (got - want).abs())
        .fold(0.0f64, f64::max);
    StateDiagnostics { birch_residual: birch, moment_residual: moment }
}

/// Compares the two routes to the maximum-likelihood distribution.
/// Failures are carried in the report, never raised.
pub fn verify_equivalence(
    a: &DesignMatrix,
    basis: &KernelBasis,
    u: &DataVector,
    sim_equilibrium: &[f64],
    oracle_p: &[f64],
    tolerance: f64,
) -> VerifyReport {
    verify_equivalence_frequencies(a, basis, &u.frequencies(), sim_equilibrium, oracle_p, tolerance)
}

/// Same comparison with the data point given as frequencies.
pub fn verify_equivalence_frequencies(
    a: &DesignMatrix,
    basis: &KernelBasis,
    q: &[f64],
    sim_equilibrium: &[f64],
    oracle_p: &[f64],
    tolerance: f64,
) -> VerifyReport {
    let linf_distance = sim_equilibrium
        .iter()
        .zip(oracle_p)
        .map(|(s, o)| (s - o).abs())
        .fold(0.0f64, f64::max)
        .max(if sim_equilibrium.len() == oracle_p.len() {
            0.0
        } else {
            f64::INFINITY
        });
    VerifyReport {
        linf_distance,
        tolerance,
        pass: linf_distance <= tolerance,
        simulated: diagnostics(a, basis, q, sim_equilibrium),
        oracle: diagnostics(a, basis, q, oracle_p),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MleResiduals {
    pub birch: f64,
    pub moment: f64,
    pub monomial: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MleFlags {
    pub theta_unique: bool,
}

/// Full maximum-likelihood solution for one data vector.
#[derive(Debug, Clone, Serialize)]
pub struct MleResult {
    pub p_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub log_likelihood: f64,
    pub residuals: MleResiduals,
    pub flags: MleFlags,
}

/// Distribution, parameters, likelihood, and certificates in one call.
pub fn solve_mle(a: &DesignMatrix, u: &DataVector) -> Result<MleResult, InferenceError> {
    if u.len() != a.cols() {
        return Err(InferenceError::DimensionMismatch {
            expected: a.cols(),
            found: u.len(),
        });
    }
    let weights: Vec<f64> = u.counts().iter().map(|&c| c as f64).collect();
    assemble_mle(a, &u.frequencies(), &weights)
}

/// Same solve for a simplex point; the likelihood is reported per
/// observation since the total count is unknown.
pub fn solve_mle_from_frequencies(a: &DesignMatrix, q: &[f64]) -> Result<MleResult, InferenceError> {
    assemble_mle(a, q, q)
}

fn assemble_mle(a: &DesignMatrix, q: &[f64], weights: &[f64]) -> Result<MleResult, InferenceError> {
    let p_hat = mld_oracle_frequencies(a, q)?;
    let readout = theta_readout(a, &a.independent_columns(), &p_hat)?;
    let ll = log_likelihood_weighted(a, &readout.theta, weights)?;
    let basis = a.kernel_basis()?;
    let birch = birch_residual(&basis, &p_hat)?;
    let target = a.apply(q);
    let moment = a
        .apply(&p_hat)
        .iter()
        .zip(&target)
        .map(|(got, want)| (got - want).abs())
        .fold(0.0f64, f64::max);
    Ok(MleResult {
        p_hat,
        theta_hat: readout.theta,
        log_likelihood: ll,
        residuals: MleResiduals {
            birch,
            moment,
            monomial: readout.monomial_residual,
        },
        flags: MleFlags { theta_unique: readout.theta_unique },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn paper_matrix() -> DesignMatrix {
        DesignMatrix::new(vec![vec![2, 1, 0], vec![0, 1, 2]]).unwrap()
    }

    fn data(counts: &[u64]) -> DataVector {
        DataVector::new(counts.to_vec()).unwrap()
    }

    fn entropy(p: &[f64]) -> f64 {
        -p.iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum::<f64>()
    }

    #[test]
    fn data_vector_validation() {
        assert_eq!(DataVector::new(vec![0, 0]).unwrap_err(), InferenceError::EmptyData);
        let u = data(&[3, 1, 0]);
        assert_eq!(u.total(), 4);
        assert_eq!(u.frequencies(), vec![0.75, 0.25, 0.0]);
    }

    #[test]
    fn oracle_symmetric_data() {
        let p = mld_oracle(&paper_matrix(), &data(&[2, 0, 2])).unwrap();
        let third = 1.0 / 3.0;
        for (got, want) in p.iter().zip([third, third, third]) {
            assert!((got - want).abs() < 1e-10, "{p:?}");
        }
    }

    #[test]
    fn oracle_identity_design_returns_frequencies() {
        let a = DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let p = mld_oracle(&a, &data(&[3, 1])).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12);
        assert!((p[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn oracle_paper_data_closed_form() {
        let p = mld_oracle(&paper_matrix(), &data(&[3, 1, 0])).unwrap();
        let p2 = (37.0f64.sqrt() - 4.0) / 12.0;
        let expected = [(1.75 - p2) / 2.0, p2, (0.25 - p2) / 2.0];
        for (got, want) in p.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10, "{p:?}");
        }
    }

    #[test]
    fn oracle_is_scale_invariant() {
        let a = paper_matrix();
        let p1 = mld_oracle(&a, &data(&[3, 1, 0])).unwrap();
        let p2 = mld_oracle(&a, &data(&[9, 3, 0])).unwrap();
        for (x, y) in p1.iter().zip(&p2) {
            assert!((x - y).abs() <= 1e-14);
        }
    }

    #[test]
    fn oracle_certificates() {
        let cases = [
            (paper_matrix(), data(&[3, 1, 0])),
            (paper_matrix(), data(&[1, 2, 1])),
            (paper_matrix(), data(&[5, 2, 9])),
            (
                DesignMatrix::new(vec![vec![1, 1, 0, 2], vec![1, 0, 2, 0], vec![0, 1, 0, 0]])
                    .unwrap(),
                data(&[4, 3, 2, 1]),
            ),
        ];
        for (a, u) in cases {
            let p = mld_oracle(&a, &u).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let q = u.frequencies();
            let target = a.apply(&q);
            for (got, want) in a.apply(&p).iter().zip(&target) {
                assert!((got - want).abs() <= 1e-10, "moment mismatch");
            }
            let basis = a.kernel_basis().unwrap();
            assert!(birch_residual(&basis, &p).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn oracle_entropy_dominates_polytope_samples() {
        let a = paper_matrix();
        let u = data(&[3, 1, 0]);
        let p = mld_oracle(&a, &u).unwrap();
        let h_opt = entropy(&p);
        let basis = a.kernel_basis().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tested = 0;
        while tested < 100 {
            let eps: Vec<f64> = basis
                .vectors()
                .iter()
                .map(|_| 0.2 * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            let mut q: Vec<f64> = p.clone();
            for (b, &e) in basis.vectors().iter().zip(&eps) {
                for (qi, &bi) in q.iter_mut().zip(b) {
                    *qi += e * bi as f64;
                }
            }
            if q.iter().any(|&v| v <= 0.0) {
                continue;
            }
            tested += 1;
            assert!(h_opt + 1e-12 >= entropy(&q), "entropy not maximal");
        }
    }

    #[test]
    fn oracle_reports_boundary_optimum() {
        assert_eq!(
            mld_oracle(&paper_matrix(), &data(&[4, 0, 0])).unwrap_err(),
            InferenceError::PolytopeEmptyOrBoundary
        );
        let a = DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(
            mld_oracle(&a, &data(&[0, 4])).unwrap_err(),
            InferenceError::PolytopeEmptyOrBoundary
        );
    }

    #[test]
    fn oracle_validates_input() {
        assert_eq!(
            mld_oracle(&paper_matrix(), &data(&[1, 2])).unwrap_err(),
            InferenceError::DimensionMismatch { expected: 3, found: 2 }
        );
        assert!(matches!(
            mld_oracle_frequencies(&paper_matrix(), &[0.5, 0.2, 0.2]).unwrap_err(),
            InferenceError::InvalidFrequencies(_)
        ));
    }

    #[test]
    fn theta_readout_paper_uniform() {
        let a = paper_matrix();
        let third = 1.0 / 3.0;
        let r = theta_readout(&a, &a.independent_columns(), &[third, third, third]).unwrap();
        let expected = 3.0f64.powf(-0.5);
        assert!((r.theta[0] - expected).abs() < 1e-12);
        assert!((r.theta[1] - expected).abs() < 1e-12);
        assert!(r.theta_unique);
        assert!(r.monomial_residual < 1e-12);
    }

    #[test]
    fn theta_readout_identity_design() {
        let a = DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let r = theta_readout(&a, &a.independent_columns(), &[0.75, 0.25]).unwrap();
        assert!((r.theta[0] - 0.75).abs() < 1e-12);
        assert!((r.theta[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn theta_readout_rank_deficient_flags_non_uniqueness() {
        let a = DesignMatrix::new(vec![vec![1, 0, 1], vec![1, 0, 1], vec![0, 2, 0]]).unwrap();
        let u = data(&[1, 1, 2]);
        let p = mld_oracle(&a, &u).unwrap();
        assert!((p[0] - 0.375).abs() < 1e-10);
        assert!((p[1] - 0.25).abs() < 1e-10);
        assert!((p[2] - 0.375).abs() < 1e-10);
        let r = theta_readout(&a, &a.independent_columns(), &p).unwrap();
        assert!(!r.theta_unique);
        assert!(r.monomial_residual <= 1e-8, "identities must still hold");
    }

    #[test]
    fn theta_readout_rejects_off_variety_points() {
        let a = paper_matrix();
        let err = theta_readout(&a, &a.independent_columns(), &[0.5, 0.25, 0.25]).unwrap_err();
        assert!(matches!(err, InferenceError::NotInToricVariety { .. }));
        assert!(matches!(
            theta_readout(&a, &a.independent_columns(), &[0.5, 0.5, 0.0]).unwrap_err(),
            InferenceError::NonPositiveProbability
        ));
    }

    #[test]
    fn theta_round_trip_recovers_distribution() {
        let a = paper_matrix();
        let u = data(&[3, 1, 0]);
        let p = mld_oracle(&a, &u).unwrap();
        let r = theta_readout(&a, &a.independent_columns(), &p).unwrap();
        let monomials: Vec<f64> = (0..a.cols())
            .map(|j| (0..a.rows()).map(|i| r.theta[i].powi(a.entry(i, j) as i32)).product())
            .collect();
        let z: f64 = monomials.iter().sum();
        for (mj, pj) in monomials.iter().zip(&p) {
            assert!((mj / z - pj).abs() <= 1e-8);
        }
    }

    #[test]
    fn likelihood_of_symmetric_data() {
        let a = paper_matrix();
        let t = 3.0f64.powf(-0.5);
        let ll = log_likelihood(&a, &[t, t], &data(&[2, 0, 2])).unwrap();
        assert!((ll - 4.0 * (1.0f64 / 3.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_single_outcome() {
        let a = DesignMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let ll = log_likelihood(&a, &[0.3, 0.7], &data(&[0, 5])).unwrap();
        assert!((ll - 5.0 * 0.7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn likelihood_is_scale_invariant() {
        let a = paper_matrix();
        let u = data(&[3, 1, 0]);
        let l1 = log_likelihood(&a, &[0.4, 0.8], &u).unwrap();
        let l2 = log_likelihood(&a, &[0.4 * 7.0, 0.8 * 7.0], &u).unwrap();
        assert!((l1 - l2).abs() < 1e-10);
        assert_eq!(
            log_likelihood(&a, &[0.4, 0.0], &u).unwrap_err(),
            InferenceError::NonPositiveTheta
        );
    }

    #[test]
    fn likelihood_is_maximal_at_estimate() {
        let a = paper_matrix();
        let u = data(&[3, 1, 0]);
        let result = solve_mle(&a, &u).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let theta: Vec<f64> = (0..a.rows()).map(|_| 0.05 + 2.0 * rng.gen::<f64>()).collect();
            let ll = log_likelihood(&a, &theta, &u).unwrap();
            assert!(
                ll <= result.log_likelihood + 1e-10,
                "sampled theta beats the estimate"
            );
        }
    }

    #[test]
    fn birch_residual_examples() {
        let basis = paper_matrix().kernel_basis().unwrap();
        assert_eq!(birch_residual(&basis, &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        let third = 1.0 / 3.0;
        assert!(birch_residual(&basis, &[third, third, third]).unwrap() < 1e-15);
        let r = birch_residual(&basis, &[0.5, 0.25, 0.25]).unwrap();
        assert!((r - 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(
            birch_residual(&basis, &[1.0, 0.0, 1.0]).unwrap_err(),
            InferenceError::NonPositiveX
        );
    }

    #[test]
    fn verify_equivalence_report() {
        let a = paper_matrix();
        let basis = a.kernel_basis().unwrap();
        let u = data(&[3, 1, 0]);
        let p = mld_oracle(&a, &u).unwrap();

        let matched = verify_equivalence(&a, &basis, &u, &p, &p, DEFAULT_VERIFY_TOL);
        assert!(matched.pass);
        assert_eq!(matched.linf_distance, 0.0);
        assert!(matched.simulated.moment_residual <= 1e-10);

        let third = 1.0 / 3.0;
        let wrong = verify_equivalence(
            &a,
            &basis,
            &u,
            &[third, third, third],
            &p,
            DEFAULT_VERIFY_TOL,
        );
        assert!(!wrong.pass);
        assert!(wrong.simulated.moment_residual > 0.1);
    }

    #[test]
    fn solve_mle_assembles_result() {
        let a = paper_matrix();
        let r = solve_mle(&a, &data(&[3, 1, 0])).unwrap();
        assert!((r.p_hat.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r.residuals.moment <= 1e-10);
        assert!(r.residuals.birch <= 1e-8);
        assert!(r.residuals.monomial <= 1e-8);
        assert!(r.flags.theta_unique);
        assert!(r.log_likelihood < 0.0);
        let json = serde_json::to_string(&r).unwrap();
        let keys = ["p_hat", "theta_hat", "log_likelihood", "residuals", "flags"];
        let mut last = 0;
        for k in keys {
            let pos = json.find(&format!("\"{k}\"")).expect("field present");
            assert!(pos >= last, "field order not deterministic");
            last = pos;
        }
    }
}
