//! Single-interval integrators and the residuals that drive adaptivity.
//!
//! The implicit step is cG(1) with midpoint quadrature,
//!
//! ```text
//! U^n = U^{n-1} + k_n f((U^{n-1} + U^n)/2),
//! ```
//!
//! solved by plain fixed-point iteration starting from `U^{n,0} = U^{n-1}`.
//! The discrete residual of iterate `l` obeys `r^l ≈ (k_n/2) J r^{l-1}`, so a
//! diverging iteration exposes the dominant unstable eigenvalue of the
//! Jacobian `J`, which the controller uses to size damping steps.
//!
//! All norms are max-norms.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type State = DVector<f64>;
pub type RhsFn = dyn Fn(&State, f64) -> State + Send + Sync;
pub type JacobianFn = dyn Fn(&State, f64) -> DMatrix<f64> + Send + Sync;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid step size {0}")]
    InvalidStep(f64),
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("residual history too short or degenerate to estimate a divergence rate")]
    DegenerateHistory,
}

/// `u' = f(u, t)` on `[0, T]` with `u(0) = u⁰`.
#[derive(Clone)]
pub struct OdeProblem {
    rhs: Arc<RhsFn>,
    jacobian: Option<Arc<JacobianFn>>,
    initial: State,
    t_end: f64,
    spectral_hint: Option<f64>,
    autonomous: bool,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("dim", &self.dim())
            .field("t_end", &self.t_end)
            .field("spectral_hint", &self.spectral_hint)
            .field("has_jacobian", &self.jacobian.is_some())
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl OdeProblem {
    /// An autonomous problem; call [`OdeProblem::time_dependent`] if `f`
    /// actually depends on `t`.
    pub fn new<F>(initial: State, t_end: f64, rhs: F) -> Result<Self, SolverError>
    where
        F: Fn(&State, f64) -> State + Send + Sync + 'static,
    {
        if initial.is_empty() {
            return Err(SolverError::InvalidProblem("dimension must be at least 1".into()));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(SolverError::InvalidProblem(format!(
                "final time {t_end} must be positive"
            )));
        }
        if initial.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::InvalidProblem("initial state is not finite".into()));
        }
        Ok(Self {
            rhs: Arc::new(rhs),
            jacobian: None,
            initial,
            t_end,
            spectral_hint: None,
            autonomous: true,
        })
    }

    /// `u' = -A u + g`.
    pub fn linear(
        matrix: DMatrix<f64>,
        forcing: Option<State>,
        initial: State,
        t_end: f64,
    ) -> Result<Self, SolverError> {
        let n = initial.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(SolverError::InvalidProblem(format!(
                "matrix is {}x{}, state has {n} entries",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if forcing.as_ref().is_some_and(|g| g.len() != n) {
            return Err(SolverError::InvalidProblem("forcing has wrong length".into()));
        }
        let neg = -matrix;
        let jac = neg.clone();
        let problem = Self::new(initial, t_end, move |u, _t| match &forcing {
            Some(g) => &neg * u + g,
            None => &neg * u,
        })?;
        Ok(problem.with_jacobian(move |_, _| jac.clone()))
    }

    pub fn with_jacobian<J>(mut self, jacobian: J) -> Self
    where
        J: Fn(&State, f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    /// Known magnitude of the dominant Jacobian eigenvalue.
    pub fn with_spectral_hint(mut self, lambda_max: f64) -> Self {
        self.spectral_hint = Some(lambda_max);
        self
    }

    pub fn time_dependent(mut self) -> Self {
        self.autonomous = false;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &State {
        &self.initial
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn spectral_hint(&self) -> Option<f64> {
        self.spectral_hint
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn has_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    pub fn rhs(&self, u: &State, t: f64) -> State {
        (self.rhs)(u, t)
    }

    pub fn jacobian(&self, u: &State, t: f64) -> Option<DMatrix<f64>> {
        self.jacobian.as_ref().map(|j| j(u, t))
    }
}

pub fn max_norm(v: &State) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

fn is_finite(v: &State) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// `U^n = U^{n-1} + k f(U^{n-1}, t)`.
pub fn explicit_euler_step(
    u: &State,
    t: f64,
    k: f64,
    problem: &OdeProblem,
) -> Result<State, SolverError> {
    let f = problem.rhs(u, t);
    euler_update(u, &f, t, k)
}

/// Euler step from an already evaluated `f(u, t)`.
pub(crate) fn euler_update(u: &State, f: &State, t: f64, k: f64) -> Result<State, SolverError> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(SolverError::InvalidStep(k));
    }
    let next = u + f * k;
    if is_finite(&next) {
        Ok(next)
    } else {
        Err(SolverError::NonFinite { t: t + k })
    }
}

/// Result of one fixed-point solve of the cG(1) equations.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOutcome {
    /// Last finite iterate; `U^{n-1}` if none was produced.
    pub final_state: State,
    /// `‖r^{nl}‖` for `l = 1, 2, ...`.
    pub residual_norms: Vec<f64>,
    /// `‖r^{n0}‖ = ‖f(U^{n-1})‖`, the residual of the starting guess.
    pub initial_residual_norm: f64,
    pub converged: bool,
    /// Stopped early because the residual kept growing or became non-finite.
    pub diverged: bool,
    pub iterations: usize,
    /// Right-hand side evaluations performed by this solve.
    pub evaluations: usize,
}

/// Stopping rules of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointIteration {
    pub tol: f64,
    pub max_iter: usize,
    /// Declare divergence after this many consecutive residual increases
    /// (the starting residual counts as the first reference). `None` runs to
    /// `max_iter`.
    pub growth_limit: Option<usize>,
}

impl FixedPointIteration {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            growth_limit: Some(2),
        }
    }

    /// Same stopping tolerance, but never stops early on growth.
    pub fn exhaustive(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            growth_limit: None,
        }
    }

    /// Solves on `(t_prev, t_prev + k)`. `f_start`, when given, must equal
    /// `f(U^{n-1}, t_prev + k/2)`; it saves one evaluation.
    pub fn solve(
        &self,
        problem: &OdeProblem,
        u_prev: &State,
        t_prev: f64,
        k: f64,
        f_start: Option<&State>,
    ) -> FixedPointOutcome {
        let t_mid = t_prev + 0.5 * k;
        let mut evaluations = 0;
        let mut f_mid = match f_start {
            Some(f) => f.clone(),
            None => {
                evaluations += 1;
                problem.rhs(u_prev, t_mid)
            }
        };
        let initial_residual_norm = max_norm(&f_mid);
        let mut outcome = FixedPointOutcome {
            final_state: u_prev.clone(),
            residual_norms: Vec::new(),
            initial_residual_norm,
            converged: false,
            diverged: false,
            iterations: 0,
            evaluations,
        };
        if !initial_residual_norm.is_finite() {
            outcome.diverged = true;
            return outcome;
        }

        let mut previous_norm = initial_residual_norm;
        let mut growth_streak = 0;
        for l in 1..=self.max_iter.max(1) {
            let iterate = u_prev + &f_mid * k;
            let f_next = problem.rhs(&((u_prev + &iterate) * 0.5), t_mid);
            outcome.evaluations += 1;
            outcome.iterations = l;
            // (U^l - U^{n-1})/k is exactly the previous midpoint slope
            let norm = max_norm(&(&f_mid - &f_next));
            if !norm.is_finite() || !is_finite(&iterate) {
                outcome.diverged = true;
                return outcome;
            }
            outcome.residual_norms.push(norm);
            outcome.final_state = iterate;
            if norm <= self.tol {
                outcome.converged = true;
                return outcome;
            }
            if norm > previous_norm {
                growth_streak += 1;
                if self.growth_limit.is_some_and(|limit| growth_streak >= limit) {
                    outcome.diverged = true;
                    return outcome;
                }
            } else {
                growth_streak = 0;
            }
            previous_norm = norm;
            f_mid = f_next;
        }
        outcome
    }
}

/// Fixed-point solve of the cG(1) step with early divergence detection.
pub fn cg1_fixed_point_step(
    u_prev: &State,
    t_prev: f64,
    k: f64,
    problem: &OdeProblem,
    tol: f64,
    max_iter: usize,
) -> FixedPointOutcome {
    FixedPointIteration::new(tol, max_iter).solve(problem, u_prev, t_prev, k, None)
}

/// `r = (U - U^{n-1})/k - f((U^{n-1} + U)/2)`.
pub fn discrete_residual(
    u_prev: &State,
    u_cand: &State,
    t_prev: f64,
    k: f64,
    problem: &OdeProblem,
) -> State {
    let mid = (u_prev + u_cand) * 0.5;
    (u_cand - u_prev) / k - problem.rhs(&mid, t_prev + 0.5 * k)
}

/// `‖(U^n - U^{n-1})/k - f(U^n, t_n)‖`: residual of the linear interpolant
/// at the right end of the interval.
pub fn continuous_residual(
    u_prev: &State,
    u_new: &State,
    t_new: f64,
    k: f64,
    problem: &OdeProblem,
) -> f64 {
    continuous_residual_from(u_prev, u_new, &problem.rhs(u_new, t_new), k)
}

/// [`continuous_residual`] with `f(U^n, t_n)` already evaluated.
pub fn continuous_residual_from(u_prev: &State, u_new: &State, f_new: &State, k: f64) -> f64 {
    max_norm(&((u_new - u_prev) / k - f_new))
}

/// `L = (2/k) ‖r^l‖/‖r^{l-1}‖`.
///
/// With four or more norms, when the last two ratios are both above one and
/// agree within a factor of two, their geometric mean is used.
pub fn divergence_rate(residual_norms: &[f64], k: f64) -> Result<f64, SolverError> {
    let n = residual_norms.len();
    if n < 2 || !(k > 0.0) {
        return Err(SolverError::DegenerateHistory);
    }
    let (last, prev) = (residual_norms[n - 1], residual_norms[n - 2]);
    if !(prev > 0.0) {
        return Err(SolverError::DegenerateHistory);
    }
    let ratio = last / prev;
    let earlier = if n >= 4 { residual_norms[n - 3] } else { 0.0 };
    let steady = earlier > 0.0 && ratio > 1.0 && prev > earlier && ratio * earlier <= 2.0 * prev
        && prev <= 2.0 * ratio * earlier;
    let ratio = if steady {
        (last / earlier).sqrt()
    } else {
        ratio
    };
    let rate = 2.0 / k * ratio;
    if rate.is_finite() {
        Ok(rate)
    } else {
        Err(SolverError::DegenerateHistory)
    }
}

/// Kind of a trajectory node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    /// The initial condition.
    Initial,
    /// An accepted cG(1) step.
    Regular,
    /// An explicit Euler damping step.
    Stabilizing,
}

impl StepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::Initial => "initial",
            StepKind::Regular => "regular",
            StepKind::Stabilizing => "stabilizing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "initial" => Some(StepKind::Initial),
            "regular" => Some(StepKind::Regular),
            "stabilizing" => Some(StepKind::Stabilizing),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryNode {
    pub t: f64,
    pub state: State,
    /// Step that ended at `t`; 0 for the initial node.
    pub step: f64,
    pub kind: StepKind,
    pub iterations: usize,
    /// Continuous residual of the interval ending at `t`.
    pub residual: f64,
}

/// Nodes `(t_n, U^n)` with strictly increasing `t_n`, starting at `(0, u⁰)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    nodes: Vec<TrajectoryNode>,
}

impl Trajectory {
    pub fn new(initial: State) -> Self {
        Self {
            nodes: vec![TrajectoryNode {
                t: 0.0,
                state: initial,
                step: 0.0,
                kind: StepKind::Initial,
                iterations: 0,
                residual: 0.0,
            }],
        }
    }

    pub(crate) fn push(&mut self, node: TrajectoryNode) {
        debug_assert!(node.t > self.last().t);
        self.nodes.push(node);
    }

    pub(crate) fn last_mut(&mut self) -> &mut TrajectoryNode {
        self.nodes.last_mut().expect("trajectory always holds the initial node")
    }

    pub fn nodes(&self) -> &[TrajectoryNode] {
        &self.nodes
    }

    pub fn last(&self) -> &TrajectoryNode {
        self.nodes.last().expect("trajectory always holds the initial node")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn count(&self, kind: StepKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    /// Piecewise-linear value at `t`, clamped to the covered interval.
    pub fn interpolate(&self, t: f64) -> State {
        let nodes = &self.nodes;
        if t <= nodes[0].t {
            return nodes[0].state.clone();
        }
        let idx = nodes.partition_point(|n| n.t < t);
        if idx >= nodes.len() {
            return self.last().state.clone();
        }
        let (a, b) = (&nodes[idx - 1], &nodes[idx]);
        let w = (t - a.t) / (b.t - a.t);
        &a.state * (1.0 - w) + &b.state * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn scalar(lambda: f64) -> OdeProblem {
        OdeProblem::linear(DMatrix::from_element(1, 1, lambda), None, dvector![1.0], 10.0).unwrap()
    }

    fn zero_rhs() -> OdeProblem {
        OdeProblem::new(dvector![0.3, -2.0], 1.0, |u, _| State::zeros(u.len())).unwrap()
    }

    #[test]
    fn problem_validation() {
        assert!(OdeProblem::new(State::zeros(0), 1.0, |u, _| u.clone()).is_err());
        assert!(OdeProblem::new(dvector![1.0], 0.0, |u, _| u.clone()).is_err());
        assert!(OdeProblem::new(dvector![f64::NAN], 1.0, |u, _| u.clone()).is_err());
        assert!(OdeProblem::linear(DMatrix::identity(2, 2), None, dvector![1.0], 1.0).is_err());
    }

    #[test]
    fn euler_examples() {
        let p = scalar(1000.0);
        let u = dvector![1.0];
        assert_eq!(explicit_euler_step(&u, 0.0, 0.001, &p).unwrap()[0], 0.0);
        assert_relative_eq!(explicit_euler_step(&u, 0.0, 0.0005, &p).unwrap()[0], 0.5);
        assert_eq!(explicit_euler_step(&u, 0.0, 0.0, &p).unwrap(), u);
        assert!(explicit_euler_step(&u, 0.0, -1.0, &p).is_err());
        let blow = OdeProblem::new(dvector![1.0], 1.0, |u, _| u * f64::MAX).unwrap();
        assert!(matches!(
            explicit_euler_step(&dvector![1e10], 0.0, 1.0, &blow),
            Err(SolverError::NonFinite { .. })
        ));
    }

    #[test]
    fn cg1_converges_to_midpoint_rule() {
        let p = scalar(1000.0);
        let out = cg1_fixed_point_step(&dvector![1.0], 0.0, 0.001, &p, 1e-9, 100);
        assert!(out.converged);
        assert_relative_eq!(out.final_state[0], 1.0 / 3.0, epsilon = 1e-11);
        assert_eq!(out.evaluations, out.iterations + 1);
    }

    #[test]
    fn cg1_diverges_with_growth_factor() {
        let p = scalar(1000.0);
        let out = FixedPointIteration::exhaustive(1e-12, 6).solve(&p, &dvector![1.0], 0.0, 0.01, None);
        assert!(!out.converged);
        assert_eq!(out.residual_norms.len(), 6);
        for w in out.residual_norms.windows(2) {
            assert_relative_eq!(w[1] / w[0], 5.0, max_relative = 1e-12);
        }
        assert_relative_eq!(out.residual_norms[0] / out.initial_residual_norm, 5.0, max_relative = 1e-12);

        let early = cg1_fixed_point_step(&dvector![1.0], 0.0, 0.01, &p, 1e-12, 10);
        assert!(early.diverged && !early.converged);
        assert_eq!(early.residual_norms.len(), 2);
    }

    #[test]
    fn cg1_zero_rhs_one_iteration() {
        let p = zero_rhs();
        let out = cg1_fixed_point_step(p.initial(), 0.0, 0.1, &p, 1e-12, 10);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert_eq!(out.residual_norms, vec![0.0]);
        assert_eq!(&out.final_state, p.initial());
    }

    #[test]
    fn cg1_nonfinite_is_diverged() {
        let p = OdeProblem::new(dvector![1.0], 1.0, |u, _| u.map(|x| x.exp() * 1e300)).unwrap();
        let out = cg1_fixed_point_step(&dvector![1.0], 0.0, 1.0, &p, 1e-6, 10);
        assert!(out.diverged);
        assert!(!out.converged);
        assert!(out.final_state.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn fixed_point_threshold() {
        let p = scalar(1.0);
        // kλ/2 = 0.9 contracts, 1.1 expands
        let conv = FixedPointIteration::new(1e-10, 1000).solve(&p, &dvector![1.0], 0.0, 1.8, None);
        assert!(conv.converged);
        let div = FixedPointIteration::new(1e-10, 1000).solve(&p, &dvector![1.0], 0.0, 2.2, None);
        assert!(div.diverged && !div.converged);
    }

    #[test]
    fn discrete_residual_examples() {
        let p = scalar(1000.0);
        let r = discrete_residual(&dvector![1.0], &dvector![1.0], 0.0, 0.001, &p);
        assert_relative_eq!(r[0], 1000.0);
        let exact = discrete_residual(&dvector![1.0], &dvector![1.0 / 3.0], 0.0, 0.001, &p);
        assert!(exact[0].abs() < 1e-9);
    }

    #[test]
    fn contraction_identity_on_linear_system() {
        let a = DMatrix::from_row_slice(2, 2, &[1000.0, -10000.0, 0.0, 100.0]);
        let p = OdeProblem::linear(a.clone(), None, dvector![1.0, 1.0], 1.0).unwrap();
        let k = 0.0005;
        let u0 = p.initial().clone();
        let mut iterate = u0.clone();
        let mut prev_r: Option<State> = None;
        for _ in 0..6 {
            let mid = (&u0 + &iterate) * 0.5;
            iterate = &u0 + p.rhs(&mid, 0.0) * k;
            let r = discrete_residual(&u0, &iterate, 0.0, k, &p);
            if let Some(prev) = prev_r {
                let predicted = -(&a * &prev) * (k / 2.0);
                let err = max_norm(&(&r - &predicted));
                assert!(err <= 1e-10 * max_norm(&r).max(1e-300), "{err}");
            }
            prev_r = Some(r);
        }
    }

    #[test]
    fn continuous_residual_examples() {
        // u' = const: the linear interpolant is exact
        let p = OdeProblem::new(dvector![0.0], 1.0, |_, _| dvector![2.0]).unwrap();
        assert_eq!(continuous_residual(&dvector![0.0], &dvector![0.2], 0.1, 0.1, &p), 0.0);
        let z = zero_rhs();
        assert_eq!(continuous_residual(z.initial(), z.initial(), 0.1, 0.1, &z), 0.0);

        // converged cG(1) step on the test equation: |λ (U^n - midpoint)|
        let lambda = 1000.0;
        let k = 0.001;
        let p = scalar(lambda);
        let u1 = (1.0 - k * lambda / 2.0) / (1.0 + k * lambda / 2.0);
        let r = continuous_residual(&dvector![1.0], &dvector![u1], k, k, &p);
        let mid = 0.5 * (1.0 + u1);
        assert_relative_eq!(r, (lambda * (u1 - mid)).abs(), max_relative = 1e-12);
        assert!(r > 0.0);
    }

    #[test]
    fn divergence_rate_examples() {
        assert_relative_eq!(divergence_rate(&[1.0, 5.0], 0.01).unwrap(), 1000.0, max_relative = 1e-12);
        assert_relative_eq!(divergence_rate(&[1.0, 1.0], 0.5).unwrap(), 4.0);
        assert_relative_eq!(
            divergence_rate(&[1.0, 2.0, 8.0, 32.0], 1.0).unwrap(),
            2.0 * 4.0,
            max_relative = 1e-12
        );
        assert!(divergence_rate(&[1.0], 0.01).is_err());
        assert!(divergence_rate(&[0.0, 1.0], 0.01).is_err());
    }

    #[test]
    fn divergence_rate_finds_dominant_mode() {
        let a = DMatrix::from_diagonal(&dvector![100.0, 1000.0]);
        let p = OdeProblem::linear(a, None, dvector![1.0, 1.0], 10.0).unwrap();
        let k = 0.01;
        let out = FixedPointIteration::exhaustive(1e-300, 12).solve(&p, p.initial(), 0.0, k, None);
        let l = divergence_rate(&out.residual_norms, k).unwrap();
        assert_relative_eq!(l, 1000.0, max_relative = 1e-6);
    }

    #[test]
    fn euler_local_error_is_second_order() {
        let p = OdeProblem::new(dvector![0.0, 1.0], 1.0, |u, _| dvector![5.0 * u[1], -u[0]]).unwrap();
        let w = 5f64.sqrt();
        let exact = |t: f64| dvector![w * (w * t).sin(), (w * t).cos()];
        let err = |k: f64| max_norm(&(explicit_euler_step(p.initial(), 0.0, k, &p).unwrap() - exact(k)));
        let ratio = err(0.01) / err(0.005);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn cg1_preserves_oscillator_invariant() {
        let p = OdeProblem::new(dvector![0.0, 1.0], 1.0, |u, _| dvector![5.0 * u[1], -u[0]]).unwrap();
        let invariant = |u: &State| u[0] * u[0] / 5.0 + u[1] * u[1];
        let drift = |k: f64| {
            let mut u = p.initial().clone();
            let steps = (1.0 / k).round() as usize;
            for n in 0..steps {
                u = cg1_fixed_point_step(&u, n as f64 * k, k, &p, 1e-14, 100).final_state;
            }
            (invariant(&u) - 1.0).abs()
        };
        let (coarse, fine) = (drift(0.01), drift(0.005));
        assert!(coarse < 1e-3, "{coarse}");
        assert!(fine <= coarse / 3.0 || fine < 1e-10, "{coarse} {fine}");
    }

    #[test]
    fn trajectory_interpolation() {
        let mut tr = Trajectory::new(dvector![0.0]);
        tr.push(TrajectoryNode {
            t: 1.0,
            state: dvector![2.0],
            step: 1.0,
            kind: StepKind::Regular,
            iterations: 1,
            residual: 0.0,
        });
        assert_relative_eq!(tr.interpolate(0.25)[0], 0.5);
        assert_eq!(tr.interpolate(5.0)[0], 2.0);
        assert_eq!(tr.count(StepKind::Regular), 1);
        assert_eq!(StepKind::parse("stabilizing"), Some(StepKind::Stabilizing));
    }
}
