//! Adaptive outer loop: residual-based step selection, divergence detection
//! and injection of stabilizing explicit Euler steps.
//!
//! Per interval the controller
//!
//! 1. evaluates the continuous residual `R` of the previous interval,
//! 2. proposes `k̃ = TOL/(S‖R‖)` and regulates it against the last accepted
//!    step with the harmonic mean `2 k̃ k_prev/(k̃ + k_prev)`,
//! 3. solves the cG(1) equations by fixed-point iteration,
//! 4. if the iteration diverges, estimates the divergence rate `L` from the
//!    residual history and takes a burst of small Euler steps sized from `L`,
//!    then starts over at 1.
//!
//! Cost is counted in right-hand side evaluations.

use thiserror::Error;

use crate::damping::{
    self, DampingParams, DampingSequence, DyadicParams, SimpleDampingParams,
};
use crate::solver::{
    continuous_residual_from, divergence_rate, euler_update, FixedPointIteration, OdeProblem,
    SolverError, State, StepKind, Trajectory, TrajectoryNode,
};

/// Shape of the stabilizing burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DampingMode {
    /// `ceil(ln(k L))` equal steps `c/L`; suited to spectra with a gap.
    Gap,
    /// Dyadic ramp starting at `c/L`; suited to spectra filling `[0, λ_N]`.
    Parabolic,
}

impl DampingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DampingMode::Gap => "gap",
            DampingMode::Parabolic => "parabolic",
        }
    }
}

impl std::str::FromStr for DampingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gap" => Ok(DampingMode::Gap),
            "parabolic" => Ok(DampingMode::Parabolic),
            other => Err(format!("unknown damping mode `{other}` (expected gap|parabolic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Target scale of the final-time error.
    pub tol: f64,
    /// Stop tolerance on the discrete residual.
    pub discrete_tol: f64,
    pub k_max: f64,
    pub k_init: f64,
    /// Damping steps have size `c/L`.
    pub damping_constant: f64,
    pub mode: DampingMode,
    /// Weight `S` of the continuous residual.
    pub stability_factor: f64,
    /// Weight `S⁰` of the discrete residual; kept for reporting.
    pub discrete_stability_factor: f64,
    pub max_iterations: usize,
    /// Steps below `min_step_fraction * T` abort the integration.
    pub min_step_fraction: f64,
}

impl SolverConfig {
    /// Defaults: `tol = TOL`, `c = 0.9`, gap mode, `S = S⁰ = 1`, ten
    /// iterations, `k_init = min(k_max, T/1000)`.
    pub fn new(tol: f64, k_max: f64, t_end: f64) -> Self {
        Self {
            tol,
            discrete_tol: tol,
            k_max,
            k_init: k_max.min(t_end / 1000.0),
            damping_constant: 0.9,
            mode: DampingMode::Gap,
            stability_factor: 1.0,
            discrete_stability_factor: 1.0,
            max_iterations: 10,
            min_step_fraction: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |what: &str| Err(ControllerError::InvalidConfig(what.to_string()));
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("TOL must be positive");
        }
        if !(self.discrete_tol > 0.0 && self.discrete_tol.is_finite()) {
            return bad("discrete tolerance must be positive");
        }
        if !(self.k_init > 0.0 && self.k_init <= self.k_max && self.k_max.is_finite()) {
            return bad("need 0 < k_init <= k_max");
        }
        if !(self.damping_constant > 0.0 && self.damping_constant <= 1.0) {
            return bad("damping constant must lie in (0, 1]");
        }
        if !(self.stability_factor > 0.0 && self.discrete_stability_factor > 0.0) {
            return bad("stability factors must be positive");
        }
        if self.max_iterations < 2 {
            return bad("need at least two fixed-point iterations");
        }
        if !(self.min_step_fraction > 0.0 && self.min_step_fraction < 1.0) {
            return bad("minimum step fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    /// Right-hand side evaluations per unit time.
    pub alpha: f64,
    /// Baseline cost of a standard explicit method.
    pub alpha0: f64,
    pub ratio: f64,
    pub regular_steps: usize,
    pub stabilizing_steps: usize,
    pub total_fp_iterations: usize,
    pub function_evaluations: usize,
    pub rejected_attempts: usize,
    /// Largest divergence rate met during the run, 0 if none.
    pub max_divergence_rate: f64,
    /// Dominant eigenvalue magnitude behind `alpha0`.
    pub lambda_max: f64,
}

impl CostReport {
    /// The same report with the baseline taken from `lambda_max`.
    ///
    /// A run without stabilizing steps keeps `α₀ = α`.
    pub fn with_lambda_max(mut self, lambda_max: f64) -> Self {
        self.lambda_max = lambda_max;
        if self.stabilizing_steps > 0 {
            self.alpha0 = baseline_cost(lambda_max);
            self.ratio = self.alpha / self.alpha0;
        }
        self
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveSolution {
    pub trajectory: Trajectory,
    pub cost: CostReport,
}

#[derive(Debug, Error, Clone)]
pub enum ControllerError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("integration failed at t = {t}: {reason}")]
    IntegrationFailure {
        t: f64,
        reason: String,
        partial: Box<Trajectory>,
    },
}

impl ControllerError {
    pub fn partial_trajectory(&self) -> Option<&Trajectory> {
        match self {
            ControllerError::IntegrationFailure { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

/// `k_n = 2 k̃ k_prev/(k̃ + k_prev)`, clamped to `k_max`. Never exceeds `2 k_prev`.
pub fn regulated_step(k_tilde: f64, k_prev: f64, k_max: f64) -> f64 {
    let k = if k_tilde.is_infinite() {
        2.0 * k_prev
    } else {
        2.0 * k_tilde * k_prev / (k_tilde + k_prev)
    };
    k.min(k_max)
}

/// `k̃ = TOL/(S‖R‖)`, or `k_max` when the residual vanishes.
pub fn proposed_step(tol: f64, stability_factor: f64, residual_norm: f64, k_max: f64) -> f64 {
    if residual_norm > 0.0 {
        tol / (stability_factor * residual_norm)
    } else {
        k_max
    }
}

/// Damping burst after a failed step of size `k_n` with divergence rate `L`.
///
/// Empty when `k_n L <= 1`.
pub fn stabilization_plan(
    divergence_rate: f64,
    k_n: f64,
    damping_constant: f64,
    mode: DampingMode,
) -> DampingSequence {
    let kl = k_n * divergence_rate;
    if !(divergence_rate > 0.0 && kl.is_finite() && kl > 1.0) {
        return DampingSequence::empty();
    }
    let small = damping_constant / divergence_rate;
    match mode {
        DampingMode::Gap => {
            let m = kl.ln().ceil().max(1.0) as usize;
            match SimpleDampingParams::new(k_n, small, m, damping_constant) {
                Ok(params) => DampingSequence::new(vec![small; m], DampingParams::Simple(params)),
                Err(_) => DampingSequence::empty(),
            }
        }
        DampingMode::Parabolic => {
            let p = kl.log2().ceil().max(0.0) as u32;
            let q = damping::min_q_for_p(p);
            match DyadicParams::new(p, q, divergence_rate / damping_constant) {
                Ok(params) => DampingSequence::new(
                    damping::dyadic_steps_interleaved(&params),
                    DampingParams::Dyadic(params),
                ),
                Err(_) => DampingSequence::empty(),
            }
        }
    }
}

/// `λ_max/2`: cost per unit time of an explicit method held at `k = 2/λ_max`.
pub fn baseline_cost(lambda_max: f64) -> f64 {
    lambda_max / 2.0
}

/// Cost report for a finished trajectory.
///
/// When the run took no stabilizing steps it was the standard method itself,
/// so the baseline equals the measured cost.
pub fn cost_report(
    trajectory: &Trajectory,
    t_end: f64,
    function_evaluations: usize,
    total_fp_iterations: usize,
    rejected_attempts: usize,
    max_divergence_rate: f64,
    lambda_max: f64,
) -> CostReport {
    let regular_steps = trajectory.count(StepKind::Regular);
    let stabilizing_steps = trajectory.count(StepKind::Stabilizing);
    let alpha = function_evaluations as f64 / t_end;
    let alpha0 = if stabilizing_steps == 0 {
        alpha
    } else {
        baseline_cost(lambda_max)
    };
    CostReport {
        alpha,
        alpha0,
        ratio: alpha / alpha0,
        regular_steps,
        stabilizing_steps,
        total_fp_iterations,
        function_evaluations,
        rejected_attempts,
        max_divergence_rate,
        lambda_max,
    }
}

struct Integrator<'a> {
    problem: &'a OdeProblem,
    trajectory: Trajectory,
    t: f64,
    u: State,
    /// `f(u, t)` for the current node.
    f_current: Option<State>,
    /// `(U^{n-1}, k)` of the last interval, for the continuous residual.
    last_interval: Option<(State, f64)>,
    evaluations: usize,
    fp_iterations: usize,
    rejected: usize,
    max_rate: f64,
}

impl<'a> Integrator<'a> {
    fn rhs_here(&mut self) -> State {
        if let Some(f) = &self.f_current {
            return f.clone();
        }
        let f = self.problem.rhs(&self.u, self.t);
        self.evaluations += 1;
        self.f_current = Some(f.clone());
        f
    }

    fn advance(&mut self, next: State, k: f64, kind: StepKind, iterations: usize) {
        let t_end = self.problem.t_end();
        let mut t_next = self.t + k;
        if (t_end - t_next).abs() <= 1e-12 * t_end {
            t_next = t_end;
        }
        let previous = std::mem::replace(&mut self.u, next);
        self.t = t_next;
        self.f_current = None;
        self.last_interval = Some((previous, k));
        self.trajectory.push(TrajectoryNode {
            t: t_next,
            state: self.u.clone(),
            step: k,
            kind,
            iterations,
            residual: 0.0,
        });
    }

    /// Residual of the interval ending at the current node; stores it on the node.
    fn interval_residual(&mut self, f_here: &State) -> Option<f64> {
        let (u_old, k) = self.last_interval.as_ref()?;
        let r = continuous_residual_from(u_old, &self.u, f_here, *k);
        if let Some(node) = self.trajectory_last_mut() {
            node.residual = r;
        }
        Some(r)
    }

    fn trajectory_last_mut(&mut self) -> Option<&mut TrajectoryNode> {
        // only the initial node may not be touched
        let nodes = &mut self.trajectory;
        if nodes.len() > 1 {
            Some(nodes.last_mut())
        } else {
            None
        }
    }

    fn fail(self, reason: impl Into<String>) -> ControllerError {
        ControllerError::IntegrationFailure {
            t: self.t,
            reason: reason.into(),
            partial: Box::new(self.trajectory),
        }
    }
}

/// Integrates `problem` on `[0, T]` with stabilized cG(1).
pub fn adaptive_solve(
    problem: &OdeProblem,
    config: &SolverConfig,
) -> Result<AdaptiveSolution, ControllerError> {
    config.validate()?;
    let t_end = problem.t_end();
    let floor = config.min_step_fraction * t_end;
    let iteration = FixedPointIteration::new(config.discrete_tol, config.max_iterations);

    let mut it = Integrator {
        problem,
        trajectory: Trajectory::new(problem.initial().clone()),
        t: 0.0,
        u: problem.initial().clone(),
        f_current: None,
        last_interval: None,
        evaluations: 0,
        fp_iterations: 0,
        rejected: 0,
        max_rate: 0.0,
    };
    // last accepted regular step: the regulator's k_{n-1}
    let mut k_accepted = config.k_init;
    // cap imposed by halving after an unusable divergence estimate
    let mut k_cap = f64::INFINITY;

    while it.t < t_end {
        let f_here = it.rhs_here();
        let residual = it.interval_residual(&f_here);
        let mut k = match residual {
            None => config.k_init,
            Some(r) => {
                let k_tilde = proposed_step(config.tol, config.stability_factor, r, config.k_max);
                regulated_step(k_tilde, k_accepted, config.k_max)
            }
        };
        k = k.min(k_cap);
        let remaining = t_end - it.t;
        if k >= remaining * (1.0 - 1e-12) {
            k = remaining;
        }
        if !(k >= floor || k == remaining) {
            return Err(it.fail(format!("step size {k:e} fell below the floor {floor:e}")));
        }

        let f_start = if problem.is_autonomous() {
            Some(&f_here)
        } else {
            None
        };
        let outcome = iteration.solve(problem, &it.u, it.t, k, f_start);
        it.evaluations += outcome.evaluations;
        it.fp_iterations += outcome.iterations;

        if outcome.converged {
            it.advance(outcome.final_state, k, StepKind::Regular, outcome.iterations);
            k_accepted = k;
            k_cap = f64::INFINITY;
            continue;
        }

        it.rejected += 1;
        let plan = match divergence_rate(&outcome.residual_norms, k) {
            Ok(rate) => {
                it.max_rate = it.max_rate.max(rate);
                stabilization_plan(rate, k, config.damping_constant, config.mode)
            }
            Err(_) => DampingSequence::empty(),
        };
        if plan.is_empty() || plan.steps()[0] < floor {
            k_cap = 0.5 * k;
            k_accepted = k_accepted.min(k_cap);
            continue;
        }

        for &step in plan.steps() {
            let remaining = t_end - it.t;
            if remaining <= 0.0 {
                break;
            }
            let step = step.min(remaining);
            let f = it.rhs_here();
            if it.last_interval.is_some() {
                it.interval_residual(&f);
            }
            let next = match euler_update(&it.u, &f, it.t, step) {
                Ok(next) => next,
                Err(SolverError::NonFinite { t }) => {
                    return Err(it.fail(format!("damping step produced a non-finite state at t = {t}")))
                }
                Err(e) => return Err(it.fail(e.to_string())),
            };
            it.advance(next, step, StepKind::Stabilizing, 0);
        }
        if config.mode == DampingMode::Parabolic {
            // the ramp already reached its largest step; regulate from there
            k_accepted = plan.steps().iter().copied().fold(0.0, f64::max);
        }
        k_cap = f64::INFINITY;
    }

    // residual of the final interval, for the record
    if it.last_interval.is_some() {
        let f_end = problem.rhs(&it.u, it.t);
        it.interval_residual(&f_end);
    }

    let lambda_max = problem.spectral_hint().unwrap_or(it.max_rate);
    let cost = cost_report(
        &it.trajectory,
        t_end,
        it.evaluations,
        it.fp_iterations,
        it.rejected,
        it.max_rate,
        lambda_max,
    );
    Ok(AdaptiveSolution {
        trajectory: it.trajectory,
        cost,
    })
}
