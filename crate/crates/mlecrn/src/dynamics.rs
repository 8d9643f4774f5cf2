//! Deterministic mass-action kinetics.
//!
//! The velocity field is `dx/dt = Σ_{y→y'} k x^y (y' − y)` over all
//! reactions. Integration uses an adaptive embedded Runge–Kutta 5(4) pair
//! (Dormand–Prince) with per-species error weighting; these systems are
//! smooth and non-stiff at the scales treated here, so no implicit fallback
//! is provided and `t_max` acts as the guard.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crn::ReactionNetwork;
use crate::matrix::DesignMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("expected a vector of length {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("initial state has negative entry {value} at index {index}")]
    NegativeInitialState { index: usize, value: f64 },
    #[error("state or velocity became non-finite at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("reference point must be strictly positive in every coordinate")]
    NonPositiveAlpha,
    #[error("delta {delta} outside [0, {min_rate}); rates must stay positive")]
    DeltaTooLarge { delta: f64, min_rate: f64 },
    #[error("invalid simulation options: {0}")]
    InvalidOptions(String),
}

/// Which accepted integration steps land in the trajectory record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordMode {
    EveryStep,
    /// Record the first accepted step at or past each multiple of the
    /// interval. No interpolation between steps.
    TimeInterval(f64),
    EveryNSteps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub equilibrium_tol: f64,
    pub t_max: f64,
    pub max_steps: u64,
    pub record: RecordMode,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            equilibrium_tol: 1e-10,
            t_max: 1e6,
            max_steps: 10_000_000,
            record: RecordMode::EveryStep,
        }
    }
}

impl SimOptions {
    fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("equilibrium_tol", self.equilibrium_tol),
            ("t_max", self.t_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(DynamicsError::InvalidOptions(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.max_steps == 0 {
            return Err(DynamicsError::InvalidOptions("max_steps must be nonzero".into()));
        }
        match self.record {
            RecordMode::TimeInterval(dt) if !(dt.is_finite() && dt > 0.0) => Err(
                DynamicsError::InvalidOptions(format!("record interval must be positive, got {dt}")),
            ),
            RecordMode::EveryNSteps(0) => Err(DynamicsError::InvalidOptions(
                "record stride must be nonzero".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SimStatus {
    /// Velocity dropped below `equilibrium_tol · (1 + ‖x‖∞)`.
    Converged,
    /// Hit `t_max` or exhausted the step budget first.
    MaxTimeReached,
    /// Step size underflowed; the recorded prefix is still valid.
    StepFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    /// Strictly increasing sample times starting at 0.
    pub times: Vec<f64>,
    /// One nonnegative concentration vector per sample time.
    pub states: Vec<Vec<f64>>,
    pub status: SimStatus,
    /// Final state, present iff `status == Converged`.
    pub equilibrium: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory always has the initial sample")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory always has the initial sample")
    }
}

struct CompiledReaction {
    rate: f64,
    /// Nonzero reactant exponents.
    exps: Vec<(usize, i32)>,
    /// Nonzero entries of y' - y.
    deltas: Vec<(usize, f64)>,
}

/// Reaction list flattened for repeated right-hand-side evaluation.
struct MassActionSystem {
    terms: Vec<CompiledReaction>,
}

impl MassActionSystem {
    fn compile(net: &ReactionNetwork) -> Self {
        let terms = net
            .reactions()
            .iter()
            .map(|r| CompiledReaction {
                rate: r.rate(),
                exps: r
                    .reactant()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| (i, e as i32))
                    .collect(),
                deltas: r
                    .net_vector()
                    .iter()
                    .enumerate()
                    .filter(|(_, &d)| d != 0)
                    .map(|(i, &d)| (i, d as f64))
                    .collect(),
            })
            .collect();
        MassActionSystem { terms }
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for term in &self.terms {
            let mut v = term.rate;
            for &(i, e) in &term.exps {
                v *= x[i].powi(e);
            }
            for &(i, d) in &term.deltas {
                out[i] += v * d;
            }
        }
    }
}

/// `Σ_{y→y'} k x^y (y' − y)` with the convention `0^0 = 1`.
pub fn mass_action_rhs(net: &ReactionNetwork, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    if x.len() != net.n_species() {
        return Err(DynamicsError::DimensionMismatch {
            expected: net.n_species(),
            found: x.len(),
        });
    }
    let sys = MassActionSystem::compile(net);
    let mut out = vec![0.0; x.len()];
    sys.eval_into(x, &mut out);
    Ok(out)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn at_equilibrium(rhs: &[f64], x: &[f64], tol: f64) -> bool {
    inf_norm(rhs) <= tol * (1.0 + inf_norm(x))
}

// Dormand-Prince 5(4) tableau. Row i of A holds the coefficients for stage
// i+1; B5 is the 5th-order solution weight vector (FSAL: equal to the last
// A row extended with 0), B4 the embedded 4th-order one.
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const STEP_SAFETY: f64 = 0.9;
const STEP_SHRINK_MIN: f64 = 0.2;
const STEP_GROW_MAX: f64 = 5.0;

// Near equilibrium the usual weights admit per-step errors far above the
// equilibrium threshold, so the state would hover at the controller's noise
// floor and never pass the velocity test. Once the velocity is within
// EQ_APPROACH_FACTOR of the threshold, the error weights are capped at
// 1/EQ_WEIGHT_MARGIN of the equilibrium scale so the final decay is resolved.
const EQ_APPROACH_FACTOR: f64 = 1e4;
const EQ_WEIGHT_MARGIN: f64 = 50.0;

/// Integrates the mass-action equations from `x0`.
///
/// Stops when the velocity passes the relative equilibrium test, at `t_max`,
/// or on the step budget (both reported as `MaxTimeReached`). A step whose
/// candidate state dips below `-abs_tol` or turns non-finite is rejected and
/// retried smaller; if the step size underflows, the trajectory is returned
/// with `StepFailure` and every sample accepted so far intact. Rejected
/// round-off dips in `[-abs_tol, 0)` are clamped to 0.
pub fn simulate(
    net: &ReactionNetwork,
    x0: &[f64],
    opts: &SimOptions,
) -> Result<Trajectory, DynamicsError> {
    opts.validate()?;
    let n = net.n_species();
    if x0.len() != n {
        return Err(DynamicsError::DimensionMismatch { expected: n, found: x0.len() });
    }
    for (i, &v) in x0.iter().enumerate() {
        if !v.is_finite() {
            return Err(DynamicsError::NonFiniteState { t: 0.0 });
        }
        if v < 0.0 {
            return Err(DynamicsError::NegativeInitialState { index: i, value: v });
        }
    }

    let sys = MassActionSystem::compile(net);
    let mut x = x0.to_vec();
    let mut t = 0.0f64;

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    sys.eval_into(&x, &mut k[0]);
    if !k[0].iter().all(|v| v.is_finite()) {
        return Err(DynamicsError::NonFiniteState { t: 0.0 });
    }

    fn record_state(times: &mut Vec<f64>, states: &mut Vec<Vec<f64>>, t: f64, x: &[f64]) {
        if *times.last().unwrap() < t {
            times.push(t);
            states.push(x.to_vec());
        }
    }

    let mut times = vec![0.0];
    let mut states = vec![x.clone()];

    if at_equilibrium(&k[0], &x, opts.equilibrium_tol) {
        return Ok(Trajectory {
            times,
            states,
            status: SimStatus::Converged,
            equilibrium: Some(x),
        });
    }

    let mut h = (1e-3 * (1.0 + inf_norm(&x)) / (1.0 + inf_norm(&k[0]))).min(opts.t_max);
    let mut next_record_time = match opts.record {
        RecordMode::TimeInterval(dt) => dt,
        _ => 0.0,
    };

    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut accepted: u64 = 0;
    let status;

    'outer: loop {
        if t >= opts.t_max || accepted >= opts.max_steps {
            status = SimStatus::MaxTimeReached;
            break;
        }
        h = h.min(opts.t_max - t);
        let h_floor = 4.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_floor {
            status = SimStatus::StepFailure;
            break;
        }

        let eq_scale = opts.equilibrium_tol * (1.0 + inf_norm(&x));
        let weight_cap = if inf_norm(&k[0]) <= EQ_APPROACH_FACTOR * eq_scale {
            eq_scale / EQ_WEIGHT_MARGIN
        } else {
            f64::INFINITY
        };

        // Stages 2..=7; k[0] is f(x) carried over from the last step (FSAL).
        for s in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    let a = DP_A[s][j];
                    if a != 0.0 {
                        acc += a * kj[i];
                    }
                }
                y_stage[i] = x[i] + h * acc;
            }
            sys.eval_into(&y_stage, &mut k[s + 1]);
        }

        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                if DP_B5[j] != 0.0 {
                    acc += DP_B5[j] * kj[i];
                }
            }
            y_new[i] = x[i] + h * acc;
        }

        let finite = y_new.iter().all(|v| v.is_finite())
            && k.iter().all(|kj| kj.iter().all(|v| v.is_finite()));
        let dipped_too_low = y_new.iter().any(|&v| v < -opts.abs_tol);
        let mut err = 0.0f64;
        if finite {
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    let d = DP_B5[j] - DP_B4[j];
                    if d != 0.0 {
                        e += d * kj[i];
                    }
                }
                e *= h;
                let w = (opts.abs_tol + opts.rel_tol * x[i].abs().max(y_new[i].abs()))
                    .min(weight_cap);
                err += (e / w) * (e / w);
            }
            err = (err / n as f64).sqrt();
        }

        if !finite || !err.is_finite() || err > 1.0 || dipped_too_low {
            let factor = if finite && err.is_finite() && !dipped_too_low {
                (STEP_SAFETY * err.powf(-0.2)).max(STEP_SHRINK_MIN)
            } else {
                0.5
            };
            h *= factor.min(1.0);
            // Restore k[0] = f(x); the stage loop left later stages dirty
            // but k[0] was never touched, so nothing to do.
            continue;
        }

        // Accept: clamp round-off dips, refresh the FSAL stage if clamping
        // moved the state.
        let mut clamped = false;
        for v in y_new.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clamped = true;
            }
        }
        t += h;
        x.copy_from_slice(&y_new);
        if clamped {
            sys.eval_into(&x, &mut k[6]);
            if !k[6].iter().all(|v| v.is_finite()) {
                status = SimStatus::StepFailure;
                break 'outer;
            }
        }
        k.swap(0, 6);
        accepted += 1;

        match opts.record {
            RecordMode::EveryStep => record_state(&mut times, &mut states, t, &x),
            RecordMode::EveryNSteps(stride) => {
                if accepted.is_multiple_of(stride as u64) {
                    record_state(&mut times, &mut states, t, &x);
                }
            }
            RecordMode::TimeInterval(dt) => {
                if t >= next_record_time {
                    record_state(&mut times, &mut states, t, &x);
                    next_record_time = t + dt;
                }
            }
        }

        if at_equilibrium(&k[0], &x, opts.equilibrium_tol) {
            status = SimStatus::Converged;
            break;
        }

        h *= (STEP_SAFETY * err.max(1e-10).powf(-0.2)).clamp(STEP_SHRINK_MIN, STEP_GROW_MAX);
    }

    record_state(&mut times, &mut states, t, &x);
    let equilibrium = (status == SimStatus::Converged).then(|| x.clone());
    Ok(Trajectory { times, states, status, equilibrium })
}

/// `g(x) = Σ x_i ln x_i − x_i − x_i ln α_i`, with `0 ln 0 = 0`.
pub fn lyapunov_g(x: &[f64], alpha: &[f64]) -> Result<f64, DynamicsError> {
    if x.len() != alpha.len() {
        return Err(DynamicsError::DimensionMismatch {
            expected: alpha.len(),
            found: x.len(),
        });
    }
    if alpha.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
        return Err(DynamicsError::NonPositiveAlpha);
    }
    Ok(x.iter()
        .zip(alpha)
        .map(|(&xi, &ai)| if xi == 0.0 { 0.0 } else { xi * ((xi / ai).ln() - 1.0) })
        .sum())
}

/// Lyapunov values along a trajectory and the worst consecutive increase.
#[derive(Debug, Clone, Serialize)]
pub struct LyapunovReport {
    /// Max of `g(x_{k+1}) − g(x_k)`; zero or negative on monotone runs,
    /// 0.0 when fewer than two samples exist.
    pub max_increase: f64,
    pub values: Vec<f64>,
}

pub fn monitor_lyapunov(
    traj: &Trajectory,
    alpha: &[f64],
) -> Result<LyapunovReport, DynamicsError> {
    let values = traj
        .states
        .iter()
        .map(|x| lyapunov_g(x, alpha))
        .collect::<Result<Vec<_>, _>>()?;
    let max_increase = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0f64, f64::max);
    Ok(LyapunovReport { max_increase, values })
}

/// Record of a rate perturbation: every realized rate sits strictly inside
/// the open delta-interval of its base rate.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbedRates {
    pub base: Vec<f64>,
    pub delta: f64,
    pub realized: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PerturbedNetwork {
    pub network: ReactionNetwork,
    pub rates: PerturbedRates,
}

/// Replaces each rate by a uniform draw from its open delta-interval,
/// deterministically in the seed. `delta = 0` returns the network unchanged.
pub fn perturb_rates(
    net: &ReactionNetwork,
    delta: f64,
    seed: u64,
) -> Result<PerturbedNetwork, DynamicsError> {
    let base = net.rates();
    let min_rate = base.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(delta >= 0.0 && delta < min_rate) || !delta.is_finite() {
        return Err(DynamicsError::DeltaTooLarge { delta, min_rate });
    }
    if delta == 0.0 {
        return Ok(PerturbedNetwork {
            network: net.clone(),
            rates: PerturbedRates { base: base.clone(), delta, realized: base },
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let realized: Vec<f64> = base
        .iter()
        .map(|&k| {
            // gen::<f64>() covers [0, 1); reject 0 to keep the interval open.
            let mut u = rng.gen::<f64>();
            while u == 0.0 {
                u = rng.gen::<f64>();
            }
            k + delta * (2.0 * u - 1.0)
        })
        .collect();
    let network = net
        .with_rates(&realized)
        .expect("perturbed rates stay positive because delta < min rate");
    Ok(PerturbedNetwork {
        network,
        rates: PerturbedRates { base, delta, realized },
    })
}

/// Max over samples of `‖A·x(t) − A·x(0)‖∞`; zero for an exact integrator
/// because rows of A are conserved by the distribution network.
pub fn conserved_drift(traj: &Trajectory, a: &DesignMatrix) -> Result<f64, DynamicsError> {
    let first = match traj.states.first() {
        Some(s) => s,
        None => return Ok(0.0),
    };
    if first.len() != a.cols() {
        return Err(DynamicsError::DimensionMismatch {
            expected: a.cols(),
            found: first.len(),
        });
    }
    let reference = a.apply(first);
    let mut drift = 0.0f64;
    for state in &traj.states {
        for (lhs, rhs) in a.apply(state).iter().zip(&reference) {
            drift = drift.max((lhs - rhs).abs());
        }
    }
    Ok(drift)
}
