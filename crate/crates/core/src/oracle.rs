//! Independent reference machinery: a fine-step classical RK4 integrator,
//! finite-difference Jacobians, power iteration and a dense-grid scanner.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::solver::{max_norm, OdeProblem, State};

/// Fraction of the stability scale `1/λ_max` used as the RK4 step.
pub const ORACLE_STEP_FACTOR: f64 = 0.05;
/// Lower bound on the RK4 step, relative to the final time.
pub const ORACLE_MIN_STEP_FRACTION: f64 = 1e-8;
/// Steps between re-estimates of `λ_max` when the problem gives no hint.
const RESTIMATE_INTERVAL: usize = 200;
const POWER_MAX_ITER: usize = 1000;
const POWER_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("reference state became nonfinite at t = {t}")]
    NonFinite { t: f64 },
    #[error("sample times must be sorted and lie in [0, {t_end}]")]
    InvalidSamples { t_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMethod {
    Analytic,
    Rk4,
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub method: ReferenceMethod,
    /// Smallest RK4 step taken, `None` for analytic references.
    pub step: Option<f64>,
}

impl ReferenceSolution {
    pub fn last(&self) -> Option<&State> {
        self.states.last()
    }
}

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step(problem: &OdeProblem, u: &State, t: f64, k: f64) -> State {
    let k1 = problem.rhs(u, t);
    let k2 = problem.rhs(&(u + &k1 * (k / 2.0)), t + k / 2.0);
    let k3 = problem.rhs(&(u + &k2 * (k / 2.0)), t + k / 2.0);
    let k4 = problem.rhs(&(u + &k3 * k), t + k);
    u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (k / 6.0)
}

/// Reference states at `samples`, from `analytic` if given, else by RK4.
pub fn reference_solve(
    problem: &OdeProblem,
    analytic: Option<&(dyn Fn(f64) -> State + Send + Sync)>,
    samples: &[f64],
) -> Result<ReferenceSolution, OracleError> {
    let t_end = problem.t_end();
    let sorted = samples.windows(2).all(|w| w[0] <= w[1]);
    let in_range = samples.iter().all(|&t| (0.0..=t_end).contains(&t));
    if !sorted || !in_range {
        return Err(OracleError::InvalidSamples { t_end });
    }
    if let Some(f) = analytic {
        return Ok(ReferenceSolution {
            times: samples.to_vec(),
            states: samples.iter().map(|&t| f(t)).collect(),
            method: ReferenceMethod::Analytic,
            step: None,
        });
    }
    rk4_reference(problem, samples, None)
}

/// RK4 reference, optionally at a fixed step instead of `0.05/λ_max`.
pub fn rk4_reference(
    problem: &OdeProblem,
    samples: &[f64],
    fixed_step: Option<f64>,
) -> Result<ReferenceSolution, OracleError> {
    let t_end = problem.t_end();
    let floor = ORACLE_MIN_STEP_FRACTION * t_end;
    let step_for = |u: &State, t: f64| -> f64 {
        if let Some(k) = fixed_step {
            return k;
        }
        let lambda = problem
            .spectral_hint()
            .unwrap_or_else(|| jacobian_spectral_radius(problem, u, t));
        if lambda > 0.0 {
            (ORACLE_STEP_FACTOR / lambda).max(floor)
        } else {
            t_end / 1000.0
        }
    };

    let mut u = problem.initial().clone();
    let mut t = 0.0;
    let mut k = step_for(&u, t);
    let mut smallest = k;
    let mut since_estimate = 0;
    let mut states = Vec::with_capacity(samples.len());
    for &target in samples {
        while t < target {
            let step = k.min(target - t);
            u = rk4_step(problem, &u, t, step);
            t = if target - t <= k { target } else { t + step };
            if !u.iter().all(|x| x.is_finite()) {
                return Err(OracleError::NonFinite { t });
            }
            since_estimate += 1;
            if fixed_step.is_none()
                && problem.spectral_hint().is_none()
                && since_estimate >= RESTIMATE_INTERVAL
            {
                k = step_for(&u, t);
                smallest = smallest.min(k);
                since_estimate = 0;
            }
        }
        states.push(u.clone());
    }
    Ok(ReferenceSolution {
        times: samples.to_vec(),
        states,
        method: ReferenceMethod::Rk4,
        step: Some(smallest),
    })
}

/// Central-difference Jacobian with perturbation `max(1e-7, 1e-7 |u_i|)`.
pub fn finite_difference_jacobian(problem: &OdeProblem, u: &State, t: f64) -> DMatrix<f64> {
    let n = u.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = u.clone();
    for i in 0..n {
        let delta = (1e-7 * u[i].abs()).max(1e-7);
        probe[i] = u[i] + delta;
        let plus = problem.rhs(&probe, t);
        probe[i] = u[i] - delta;
        let minus = problem.rhs(&probe, t);
        probe[i] = u[i];
        jac.set_column(i, &((plus - minus) / (2.0 * delta)));
    }
    jac
}

/// Dominant eigenvalue magnitude of the finite-difference Jacobian.
pub fn jacobian_spectral_radius(problem: &OdeProblem, u: &State, t: f64) -> f64 {
    let jac = finite_difference_jacobian(problem, u, t);
    power_iteration_lambda_max(&jac)
}

pub fn power_iteration_lambda_max(matrix: &DMatrix<f64>) -> f64 {
    power_iteration_action(matrix.nrows(), |v| matrix * v)
}

/// Dominant eigenvalue magnitude of a linear map given by its action.
///
/// Falls back to the two-step estimate `sqrt(|A²v| / |v|)` when the
/// one-step estimate fails to settle, as happens for a complex pair.
pub fn power_iteration_action(dim: usize, action: impl Fn(&DVector<f64>) -> DVector<f64>) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    // a fixed, generic start vector keeps the estimate deterministic
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    v /= v.norm();
    let mut previous = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let w = action(&v);
        let norm = w.norm();
        if norm == 0.0 || !norm.is_finite() {
            return if norm == 0.0 { 0.0 } else { f64::INFINITY };
        }
        let rayleigh = v.dot(&w).abs();
        let estimate = if rayleigh > 0.5 * norm { rayleigh } else { norm };
        if (estimate - previous).abs() <= POWER_TOL * estimate {
            return estimate;
        }
        previous = estimate;
        v = w / norm;
    }
    let w = action(&v);
    let ww = action(&w);
    (ww.norm() / v.norm()).sqrt()
}

/// Largest Jacobian spectral radius along the RK4 reference trajectory.
///
/// Samples `points` uniform times on `[0, T]` plus as many on `[0, T/100]`,
/// where fast transients peak. Uses the spectral hint when the problem has one.
pub fn trajectory_lambda_max(problem: &OdeProblem, points: usize) -> Result<f64, OracleError> {
    if let Some(lambda) = problem.spectral_hint() {
        return Ok(lambda);
    }
    let t_end = problem.t_end();
    let n = points.max(2);
    let mut samples: Vec<f64> = (0..n)
        .flat_map(|i| {
            let s = i as f64 / (n - 1) as f64;
            [t_end * s, 0.01 * t_end * s]
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples.dedup();
    let reference = rk4_reference(problem, &samples, None)?;
    Ok(reference
        .states
        .iter()
        .zip(&reference.times)
        .map(|(u, &t)| jacobian_spectral_radius(problem, u, t))
        .fold(0.0, f64::max))
}

/// Maximum of `|f|` on `points` equally spaced nodes of `[a, b]`.
pub fn dense_scan_max(f: impl Fn(f64) -> f64, a: f64, b: f64, points: usize) -> f64 {
    let n = points.max(2);
    (0..n)
        .map(|i| f(a + (b - a) * i as f64 / (n - 1) as f64).abs())
        .fold(0.0, f64::max)
}

/// Max-norm distance between two states.
pub fn max_error(a: &State, b: &State) -> f64 {
    max_norm(&(a - b))
}
