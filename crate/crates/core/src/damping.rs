//! Stabilizing step-size sequences and their stability polynomials.
//!
//! Three families are provided:
//!
//! * **simple** damping: one large step `K` followed by `m` equal small steps
//!   `k`, with amplification `P(x) = (1 - θx)^m (1 - x)`, `θ = k/K`, `x = Kλ`;
//! * **Chebyshev** damping: steps placed at the zeros of the shifted Chebyshev
//!   polynomial `T_m(1 - 2x/(Kλ_N))`, bounded by one on `[0, Kλ_N]`;
//! * **dyadic** damping: `2^{q-i}` steps of size `2^i/λ_N` for `i = 0..=q`,
//!   then one step per level up to `2^p/λ_N`.
//!
//! Every function here is pure.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

/// Number of uniformly spaced points used by the `|P| <= 1` scans.
pub const SCAN_POINTS: usize = 10_000;

/// Slack on the `|P| <= 1` bound absorbing floating-point roundoff.
pub const SCAN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DampingError {
    #[error("damping constant c = {0} must lie in (0, 2)")]
    DampingConstant(f64),
    #[error("invalid damping parameter: {0}")]
    InvalidParameter(String),
}

/// Method tag of a [`DampingSequence`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DampingMethod {
    Simple,
    Dyadic,
    Chebyshev,
}

impl DampingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            DampingMethod::Simple => "simple",
            DampingMethod::Dyadic => "dyadic",
            DampingMethod::Chebyshev => "chebyshev",
        }
    }
}

/// One large step followed by `num_small` small steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleDampingParams {
    big_step: f64,
    small_step: f64,
    num_small: usize,
    damping_constant: f64,
}

impl SimpleDampingParams {
    pub fn new(
        big_step: f64,
        small_step: f64,
        num_small: usize,
        damping_constant: f64,
    ) -> Result<Self, DampingError> {
        if !(big_step > 0.0 && big_step.is_finite()) {
            return Err(DampingError::InvalidParameter(format!(
                "big step K = {big_step} must be positive"
            )));
        }
        if !(small_step > 0.0 && small_step < big_step) {
            return Err(DampingError::InvalidParameter(format!(
                "small step k = {small_step} must lie in (0, K = {big_step})"
            )));
        }
        if !(damping_constant > 0.0 && damping_constant < 2.0) {
            return Err(DampingError::DampingConstant(damping_constant));
        }
        Ok(Self {
            big_step,
            small_step,
            num_small,
            damping_constant,
        })
    }

    pub fn big_step(&self) -> f64 {
        self.big_step
    }

    pub fn small_step(&self) -> f64 {
        self.small_step
    }

    pub fn num_small(&self) -> usize {
        self.num_small
    }

    pub fn damping_constant(&self) -> f64 {
        self.damping_constant
    }

    /// Ratio `θ = k/K`.
    pub fn theta(&self) -> f64 {
        self.small_step / self.big_step
    }
}

/// Shifted Chebyshev damping of degree `m` for the spectral bound `λ_N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevParams {
    degree: usize,
    spectral_bound: f64,
    max_step: f64,
}

impl ChebyshevParams {
    /// `max_step` is the normalizing step `K`; it must not be smaller than
    /// the largest generated step `2/(λ_N(1 - s_1))`.
    pub fn new(degree: usize, spectral_bound: f64, max_step: f64) -> Result<Self, DampingError> {
        if degree == 0 {
            return Err(DampingError::InvalidParameter(
                "Chebyshev degree must be at least 1".into(),
            ));
        }
        if !(spectral_bound > 0.0 && spectral_bound.is_finite()) {
            return Err(DampingError::InvalidParameter(format!(
                "spectral bound {spectral_bound} must be positive"
            )));
        }
        let largest = chebyshev_step(spectral_bound, degree, degree);
        if !(max_step >= largest * (1.0 - 1e-12)) {
            return Err(DampingError::InvalidParameter(format!(
                "max step {max_step} is smaller than the largest Chebyshev step {largest}"
            )));
        }
        Ok(Self {
            degree,
            spectral_bound,
            max_step,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn spectral_bound(&self) -> f64 {
        self.spectral_bound
    }

    pub fn max_step(&self) -> f64 {
        self.max_step
    }

    /// `Kλ_N`, the right end of the stability interval in `x = Kλ`.
    pub fn interval_end(&self) -> f64 {
        self.max_step * self.spectral_bound
    }
}

/// Dyadic damping with `p` levels, the lowest `q + 1` of them repeated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicParams {
    levels: u32,
    multiple_levels: u32,
    spectral_bound: f64,
}

impl DyadicParams {
    pub fn new(levels: u32, multiple_levels: u32, spectral_bound: f64) -> Result<Self, DampingError> {
        if multiple_levels > levels {
            return Err(DampingError::InvalidParameter(format!(
                "q = {multiple_levels} exceeds p = {levels}"
            )));
        }
        if levels > 60 {
            return Err(DampingError::InvalidParameter(format!(
                "p = {levels} is out of range"
            )));
        }
        if !(spectral_bound > 0.0 && spectral_bound.is_finite()) {
            return Err(DampingError::InvalidParameter(format!(
                "spectral bound {spectral_bound} must be positive"
            )));
        }
        Ok(Self {
            levels,
            multiple_levels,
            spectral_bound,
        })
    }

    /// `p`
    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// `q`
    pub fn multiple_levels(&self) -> u32 {
        self.multiple_levels
    }

    pub fn spectral_bound(&self) -> f64 {
        self.spectral_bound
    }

    /// Smallest step `1/λ_N`.
    pub fn smallest_step(&self) -> f64 {
        1.0 / self.spectral_bound
    }

    /// Largest step `K = 2^p/λ_N`.
    pub fn max_step(&self) -> f64 {
        pow2(self.levels) / self.spectral_bound
    }

    /// Number of steps `(2^{q+1} - 1) + (p - q)`.
    pub fn step_count(&self) -> usize {
        let q = self.multiple_levels;
        ((1usize << (q + 1)) - 1) + (self.levels - q) as usize
    }

    /// `(multiplier, count)` pairs in ascending order: the step `multiplier/λ_N`
    /// is taken `count` times.
    fn levels_iter(&self) -> impl Iterator<Item = (f64, usize)> {
        let (p, q) = (self.levels, self.multiple_levels);
        (0..=q)
            .map(move |i| (pow2(i), 1usize << (q - i)))
            .chain((q + 1..=p).map(|j| (pow2(j), 1)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DampingParams {
    Simple(SimpleDampingParams),
    Chebyshev(ChebyshevParams),
    Dyadic(DyadicParams),
}

impl DampingParams {
    pub fn method(&self) -> DampingMethod {
        match self {
            DampingParams::Simple(_) => DampingMethod::Simple,
            DampingParams::Chebyshev(_) => DampingMethod::Chebyshev,
            DampingParams::Dyadic(_) => DampingMethod::Dyadic,
        }
    }
}

/// An ordered list of step sizes together with the parameters that produced it.
///
/// Steps are stored smallest first. A simple-damping sequence holds only the
/// `m` small steps; the large step belongs to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingSequence {
    steps: Vec<f64>,
    params: Option<DampingParams>,
}

impl DampingSequence {
    pub fn new(steps: Vec<f64>, params: DampingParams) -> Self {
        debug_assert!(steps.iter().all(|&k| k > 0.0));
        Self {
            steps,
            params: Some(params),
        }
    }

    /// The plan that takes no steps at all.
    pub fn empty() -> Self {
        Self {
            steps: Vec::new(),
            params: None,
        }
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn params(&self) -> Option<&DampingParams> {
        self.params.as_ref()
    }

    pub fn method(&self) -> Option<DampingMethod> {
        self.params.as_ref().map(DampingParams::method)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Total time `k_1 + ... + k_m` covered by the sequence.
    pub fn total_time(&self) -> f64 {
        self.steps.iter().sum()
    }

    /// Steps per unit time, `m / (k_1 + ... + k_m)`.
    pub fn cost(&self) -> f64 {
        self.steps.len() as f64 / self.total_time()
    }

    /// Amplification `∏ (1 - k_i λ)` of the mode with eigenvalue `-λ`.
    pub fn amplification(&self, lambda: f64) -> f64 {
        self.steps.iter().map(|k| 1.0 - k * lambda).product()
    }
}

fn pow2(e: u32) -> f64 {
    2f64.powi(e as i32)
}

/// Smallest number of small steps `m` with `|1 - c|^m (Kλ - 1) <= 1`.
///
/// Returns 0 when `Kλ <= 2`: the large step alone is already stable.
pub fn min_damping_steps(k_lambda: f64, c: f64) -> Result<usize, DampingError> {
    if !(c > 0.0 && c < 2.0) {
        return Err(DampingError::DampingConstant(c));
    }
    if !(k_lambda > 0.0) || k_lambda.is_nan() {
        return Err(DampingError::InvalidParameter(format!(
            "Kλ = {k_lambda} must be positive"
        )));
    }
    if k_lambda <= 2.0 {
        return Ok(0);
    }
    let contraction = (1.0 - c).abs();
    if contraction == 0.0 {
        return Ok(1);
    }
    let growth = k_lambda - 1.0;
    let satisfied = |m: usize| contraction.powi(m as i32) * growth <= 1.0;
    // log estimate, then fix up the integer boundary exactly
    let mut m = (growth.ln() / -contraction.ln()).ceil().max(0.0) as usize;
    while m > 0 && satisfied(m - 1) {
        m -= 1;
    }
    while !satisfied(m) {
        m += 1;
    }
    Ok(m)
}

/// `P(x) = (1 - θx)^m (1 - x)` with `θ = k/K`.
pub fn eval_simple_poly(x: f64, params: &SimpleDampingParams) -> f64 {
    (1.0 - params.theta() * x).powi(params.num_small as i32) * (1.0 - x)
}

/// The `i`-th zero (1-based) of `T_m`: `cos((2i - 1)π/(2m))`.
pub fn chebyshev_zero(i: usize, m: usize) -> f64 {
    ((2 * i - 1) as f64 * PI / (2 * m) as f64).cos()
}

/// `k_i = 2/(λ_N (1 - s_{m+1-i}))`, 1-based `i`.
fn chebyshev_step(spectral_bound: f64, m: usize, i: usize) -> f64 {
    2.0 / (spectral_bound * (1.0 - chebyshev_zero(m + 1 - i, m)))
}

/// Chebyshev damping steps `k_1 <= ... <= k_m` for the spectral bound `λ_N`.
pub fn chebyshev_sequence(spectral_bound: f64, m: usize) -> Result<DampingSequence, DampingError> {
    if m == 0 {
        return Err(DampingError::InvalidParameter(
            "Chebyshev degree must be at least 1".into(),
        ));
    }
    let steps: Vec<f64> = (1..=m)
        .map(|i| chebyshev_step(spectral_bound, m, i))
        .collect();
    let params = ChebyshevParams::new(m, spectral_bound, steps[m - 1])?;
    Ok(DampingSequence::new(steps, DampingParams::Chebyshev(params)))
}

/// Degree `round((π/4)√(Kλ_N))`, at least 1.
pub fn chebyshev_degree(k_lambda_n: f64) -> usize {
    ((PI / 4.0) * k_lambda_n.max(0.0).sqrt()).round().max(1.0) as usize
}

/// `T_m(s)` by the three-term recurrence; valid for any real `s`.
pub fn chebyshev_t(m: usize, s: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, s);
    if m == 0 {
        return prev;
    }
    for _ in 1..m {
        let next = 2.0 * s * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `P_c(x) = T_m(1 - 2x/(Kλ_N))`.
pub fn eval_chebyshev_poly(x: f64, params: &ChebyshevParams) -> f64 {
    chebyshev_t(params.degree, 1.0 - 2.0 * x / params.interval_end())
}

/// `P_d(x)` with `Kλ_N = 2^p`; empty products are 1.
pub fn eval_dyadic_poly(x: f64, params: &DyadicParams) -> f64 {
    let scale = pow2(params.levels);
    params
        .levels_iter()
        .map(|(mult, count)| (1.0 - mult * x / scale).powi(count as i32))
        .product()
}

/// `ln|P_d(x)|`, or `None` when `x` is a root. Avoids overflow of the high
/// multiplicity factors far from the origin.
fn dyadic_log_abs(x: f64, p: u32, q: u32) -> Option<f64> {
    let scale = pow2(p);
    let mut acc = 0.0;
    for i in 0..=p {
        let factor = (1.0 - pow2(i) * x / scale).abs();
        if factor == 0.0 {
            return None;
        }
        let count = if i <= q { pow2(q - i) } else { 1.0 };
        acc += count * factor.ln();
    }
    Some(acc)
}

/// Interior critical point of `P_d` between two consecutive roots.
///
/// `P'/P = -Σ m_i a_i/(1 - a_i x)` is strictly decreasing between poles, so
/// bisection on its sign finds the unique extremum.
fn dyadic_critical_point(lo: f64, hi: f64, p: u32, q: u32) -> f64 {
    let scale = pow2(p);
    let log_derivative = |x: f64| -> f64 {
        (0..=p)
            .map(|i| {
                let a = pow2(i) / scale;
                let count = if i <= q { pow2(q - i) } else { 1.0 };
                -count * a / (1.0 - a * x)
            })
            .sum()
    };
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if log_derivative(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Whether `|P_d| <= 1 + SCAN_TOLERANCE` on `[0, 2^p]`.
///
/// Checks a uniform grid of [`SCAN_POINTS`] points plus the exact extremum
/// between each pair of consecutive roots `2^{p-i}` and the right endpoint.
pub fn dyadic_is_stable(p: u32, q: u32) -> bool {
    let bound = (1.0 + SCAN_TOLERANCE).ln();
    let ok = |x: f64| dyadic_log_abs(x, p, q).is_none_or(|l| l <= bound);
    let end = pow2(p);
    let grid_ok = (0..SCAN_POINTS)
        .map(|j| end * j as f64 / (SCAN_POINTS - 1) as f64)
        .all(ok);
    if !grid_ok {
        return false;
    }
    // roots sit at 1, 2, 4, ..., 2^p
    (0..p).all(|e| ok(dyadic_critical_point(pow2(e), pow2(e + 1), p, q)))
}

/// Minimal `q <= p` such that `|P_d| <= 1` on `[0, 2^p]`.
pub fn min_q_for_p(p: u32) -> u32 {
    (0..=p)
        .find(|&q| dyadic_is_stable(p, q))
        .expect("q = p has only nonnegative factors bounded by one at the top level")
}

/// Dyadic steps `2^i/λ_N` (repeated `2^{q-i}` times for `i <= q`) up to `2^p/λ_N`.
pub fn dyadic_steps(params: &DyadicParams) -> Vec<f64> {
    let base = params.smallest_step();
    params
        .levels_iter()
        .flat_map(|(mult, count)| std::iter::repeat_n(mult * base, count))
        .collect()
}

/// The steps of [`dyadic_steps`] reordered so that each level is spread
/// evenly over the sequence, larger steps first among ties.
///
/// The product, and hence the polynomial, is unchanged. Executed in ascending
/// order, round-off left behind by the small steps is amplified by the tail
/// of large steps by up to `10^20` at `p = 9`; interleaved, the growth of any
/// intermediate perturbation stays near `10^2`.
pub fn dyadic_steps_interleaved(params: &DyadicParams) -> Vec<f64> {
    let base = params.smallest_step();
    let mut keyed: Vec<(f64, u32, f64)> = params
        .levels_iter()
        .zip(0u32..)
        .flat_map(|((mult, count), level)| {
            (0..count).map(move |j| ((j as f64 + 0.5) / count as f64, level, mult * base))
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    keyed.into_iter().map(|(_, _, step)| step).collect()
}

/// Dyadic ramp for spectral bound `λ_N` and maximum step `K`.
///
/// `p = round(log2(Kλ_N))`, so the largest step is `2^p/λ_N`, which equals
/// `K` when `Kλ_N` is a power of two.
pub fn dyadic_sequence(spectral_bound: f64, max_step: f64) -> Result<DampingSequence, DampingError> {
    let k_lambda = max_step * spectral_bound;
    if !(k_lambda >= 1.0 - 1e-12) {
        return Err(DampingError::InvalidParameter(format!(
            "Kλ_N = {k_lambda} must be at least 1"
        )));
    }
    let p = k_lambda.log2().round().max(0.0) as u32;
    let q = min_q_for_p(p);
    let params = DyadicParams::new(p, q, spectral_bound)?;
    Ok(DampingSequence::new(
        dyadic_steps(&params),
        DampingParams::Dyadic(params),
    ))
}

/// Stability polynomial in the complex variable `z = -K̄λ`, where `K̄` is the
/// total time covered by the sequence.
pub fn eval_region_poly(z: Complex64, params: &DampingParams) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    match params {
        DampingParams::Chebyshev(c) => {
            let m = c.degree;
            let m2 = (m * m) as f64;
            (1..=m)
                .map(|i| one + (z / m2) / (1.0 - chebyshev_zero(i, m)))
                .product()
        }
        DampingParams::Dyadic(d) => {
            let (p, q) = (d.levels as i32, d.multiple_levels as i32);
            let total = pow2(q as u32) * (q + 1) as f64 + 2f64.powi(p + 1) - 2f64.powi(q + 1);
            d.levels_iter()
                .map(|(mult, count)| (one + z * (mult / total)).powi(count as i32))
                .product()
        }
        DampingParams::Simple(s) => {
            let total = s.big_step + s.num_small as f64 * s.small_step;
            let big = one + z * (s.big_step / total);
            let small = one + z * (s.small_step / total);
            small.powi(s.num_small as i32) * big
        }
    }
}

/// `K̄/K`: converts a real-axis argument `x = Kλ` to `z = -x K̄/K`.
pub fn region_scale(params: &DampingParams) -> f64 {
    match params {
        DampingParams::Chebyshev(c) => {
            let m = c.degree;
            2.0 * (m * m) as f64 / c.spectral_bound / c.max_step
        }
        DampingParams::Dyadic(d) => {
            let (p, q) = (d.levels as i32, d.multiple_levels as i32);
            let total = pow2(q as u32) * (q + 1) as f64 + 2f64.powi(p + 1) - 2f64.powi(q + 1);
            total / pow2(d.levels)
        }
        DampingParams::Simple(s) => {
            (s.big_step + s.num_small as f64 * s.small_step) / s.big_step
        }
    }
}

/// Real-axis polynomial of `params` at `x = Kλ`.
pub fn eval_real_poly(x: f64, params: &DampingParams) -> f64 {
    match params {
        DampingParams::Simple(s) => eval_simple_poly(x, s),
        DampingParams::Chebyshev(c) => eval_chebyshev_poly(x, c),
        DampingParams::Dyadic(d) => eval_dyadic_poly(x, d),
    }
}

/// Largest `|P(x)|` over a uniform grid of `points` points on `[0, end]`.
pub fn max_abs_on_grid(f: impl Fn(f64) -> f64, end: f64, points: usize) -> f64 {
    let n = points.max(2);
    (0..n)
        .map(|j| f(end * j as f64 / (n - 1) as f64).abs())
        .fold(0.0, f64::max)
}
