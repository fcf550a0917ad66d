//! The eight benchmark problems, with analytic Jacobians and, where they
//! exist, analytic solutions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{dvector, DMatrix, DVector};

use crate::solver::{OdeProblem, State};

pub type AnalyticFn = dyn Fn(f64) -> State + Send + Sync;

/// CLI names of the benchmark problems, in reporting order.
pub const NAMES: [&str; 8] = [
    "test-eq", "test-sys", "nonnormal", "hires", "akzo", "vdp", "heat", "nonstiff",
];

#[derive(Clone)]
pub struct BenchmarkProblem {
    pub name: &'static str,
    pub problem: OdeProblem,
    pub analytic: Option<Arc<AnalyticFn>>,
    /// Published cost reduction factor `α/α₀`.
    pub published_ratio: Option<f64>,
    /// Whether the spectrum fills an interval rather than showing a gap.
    pub parabolic: bool,
}

impl fmt::Debug for BenchmarkProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BenchmarkProblem")
            .field("name", &self.name)
            .field("problem", &self.problem)
            .field("has_analytic", &self.analytic.is_some())
            .field("published_ratio", &self.published_ratio)
            .finish()
    }
}

impl BenchmarkProblem {
    fn new(name: &'static str, problem: OdeProblem, published_ratio: Option<f64>) -> Self {
        Self {
            name,
            problem,
            analytic: None,
            published_ratio,
            parabolic: false,
        }
    }

    fn with_analytic(mut self, f: impl Fn(f64) -> State + Send + Sync + 'static) -> Self {
        self.analytic = Some(Arc::new(f));
        self
    }

    pub fn t_end(&self) -> f64 {
        self.problem.t_end()
    }

    pub fn exact(&self, t: f64) -> Option<State> {
        self.analytic.as_ref().map(|f| f(t))
    }

    /// Stiff problems are the ones with a published ratio below one.
    pub fn is_stiff(&self) -> bool {
        self.published_ratio.is_some_and(|r| r < 1.0)
    }
}

/// Looks a problem up by its CLI name.
pub fn by_name(name: &str) -> Option<BenchmarkProblem> {
    Some(match name {
        "test-eq" => test_equation(),
        "test-sys" => test_system(),
        "nonnormal" => nonnormal_system(),
        "hires" => hires(),
        "akzo" => akzo_nobel(),
        "vdp" => van_der_pol(),
        "heat" => heat_equation(HEAT_SPACING).expect("the default spacing is valid"),
        "nonstiff" => nonstiff_oscillator(),
        _ => return None,
    })
}

pub fn all() -> Vec<BenchmarkProblem> {
    NAMES.iter().filter_map(|n| by_name(n)).collect()
}

/// `u' + 1000 u = 0`, `u(0) = 1` on `[0, 10]`.
pub fn test_equation() -> BenchmarkProblem {
    let lambda = 1000.0;
    let problem = OdeProblem::linear(DMatrix::from_element(1, 1, lambda), None, dvector![1.0], 10.0)
        .expect("valid")
        .with_spectral_hint(lambda);
    BenchmarkProblem::new("test-eq", problem, Some(1.0 / 310.0))
        .with_analytic(move |t| dvector![(-lambda * t).exp()])
}

/// `u' + diag(100, 1000) u = 0`, `u(0) = (1, 1)` on `[0, 10]`.
pub fn test_system() -> BenchmarkProblem {
    let a = DMatrix::from_diagonal(&dvector![100.0, 1000.0]);
    let problem = OdeProblem::linear(a, None, dvector![1.0, 1.0], 10.0)
        .expect("valid")
        .with_spectral_hint(1000.0);
    BenchmarkProblem::new("test-sys", problem, Some(1.0 / 104.0))
        .with_analytic(|t| dvector![(-100.0 * t).exp(), (-1000.0 * t).exp()])
}

/// `u' + A u = 0` with the upper-triangular `A = [[1000, -10000], [0, 100]]`.
pub fn nonnormal_system() -> BenchmarkProblem {
    let a = DMatrix::from_row_slice(2, 2, &[1000.0, -10000.0, 0.0, 100.0]);
    let problem = OdeProblem::linear(a, None, dvector![1.0, 1.0], 10.0)
        .expect("valid")
        .with_spectral_hint(1000.0);
    // u2 = e^{-100t}; u1 = C e^{-1000t} + D e^{-100t} with 900 D = 10000
    let d = 100.0 / 9.0;
    let c = 1.0 - d;
    BenchmarkProblem::new("nonnormal", problem, Some(1.0 / 180.0)).with_analytic(move |t| {
        let slow = (-100.0 * t).exp();
        dvector![c * (-1000.0 * t).exp() + d * slow, slow]
    })
}

/// High Irradiance RESponse, eight species, on `[0, 321.8122]`.
pub fn hires() -> BenchmarkProblem {
    let rhs = |u: &State, _t: f64| {
        let coupling = 280.0 * u[5] * u[7];
        dvector![
            -1.71 * u[0] + 0.43 * u[1] + 8.32 * u[2] + 0.0007,
            1.71 * u[0] - 8.75 * u[1],
            -10.03 * u[2] + 0.43 * u[3] + 0.035 * u[4],
            8.32 * u[1] + 1.71 * u[2] - 1.12 * u[3],
            -1.745 * u[4] + 0.43 * u[5] + 0.43 * u[6],
            -coupling + 0.69 * u[3] + 1.71 * u[4] - 0.43 * u[5] + 0.69 * u[6],
            coupling - 1.81 * u[6],
            -coupling + 1.81 * u[6]
        ]
    };
    let jacobian = |u: &State, _t: f64| {
        let mut j = DMatrix::zeros(8, 8);
        j[(0, 0)] = -1.71;
        j[(0, 1)] = 0.43;
        j[(0, 2)] = 8.32;
        j[(1, 0)] = 1.71;
        j[(1, 1)] = -8.75;
        j[(2, 2)] = -10.03;
        j[(2, 3)] = 0.43;
        j[(2, 4)] = 0.035;
        j[(3, 1)] = 8.32;
        j[(3, 2)] = 1.71;
        j[(3, 3)] = -1.12;
        j[(4, 4)] = -1.745;
        j[(4, 5)] = 0.43;
        j[(4, 6)] = 0.43;
        let (d6, d8) = (280.0 * u[7], 280.0 * u[5]);
        j[(5, 3)] = 0.69;
        j[(5, 4)] = 1.71;
        j[(5, 5)] = -d6 - 0.43;
        j[(5, 6)] = 0.69;
        j[(5, 7)] = -d8;
        j[(6, 5)] = d6;
        j[(6, 6)] = -1.81;
        j[(6, 7)] = d8;
        j[(7, 5)] = -d6;
        j[(7, 6)] = 1.81;
        j[(7, 7)] = -d8;
        j
    };
    let initial = dvector![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0057];
    let problem = OdeProblem::new(initial, 321.8122, rhs)
        .expect("valid")
        .with_jacobian(jacobian);
    BenchmarkProblem::new("hires", problem, Some(1.0 / 33.0))
}

/// Reaction rates `r_1..r_5` and inflow `F` of the Akzo-Nobel problem.
fn akzo_rates(u: &State) -> ([f64; 5], f64) {
    let sqrt_u2 = u[1].max(0.0).sqrt();
    let r = [
        18.7 * u[0].powi(4) * sqrt_u2,
        0.58 * u[2] * u[3],
        0.58 / 34.4 * u[0] * u[4],
        0.09 * u[0] * u[3] * u[3],
        0.42 * u[5] * u[5] * sqrt_u2,
    ];
    (r, 3.3 * (0.9 / 737.0 - u[1]))
}

/// Chemical Akzo-Nobel problem as an ODE in six species, on `[0, 180]`.
pub fn akzo_nobel() -> BenchmarkProblem {
    let rhs = |u: &State, _t: f64| {
        let ([r1, r2, r3, r4, r5], f) = akzo_rates(u);
        dvector![
            -2.0 * r1 + r2 - r3 - r4,
            -0.5 * r1 - r4 - 0.5 * r5 + f,
            r1 - r2 + r3,
            -r2 + r3 - 2.0 * r4,
            r2 - r3 + r5,
            -r5
        ]
    };
    let jacobian = |u: &State, _t: f64| {
        let s = u[1].max(0.0).sqrt();
        let ds = if u[1] > 0.0 { 0.5 / s } else { 0.0 };
        // gradients of r1..r5 with respect to u1..u6
        let mut dr = [[0.0; 6]; 5];
        dr[0][0] = 18.7 * 4.0 * u[0].powi(3) * s;
        dr[0][1] = 18.7 * u[0].powi(4) * ds;
        dr[1][2] = 0.58 * u[3];
        dr[1][3] = 0.58 * u[2];
        dr[2][0] = 0.58 / 34.4 * u[4];
        dr[2][4] = 0.58 / 34.4 * u[0];
        dr[3][0] = 0.09 * u[3] * u[3];
        dr[3][3] = 0.18 * u[0] * u[3];
        dr[4][1] = 0.42 * u[5] * u[5] * ds;
        dr[4][5] = 0.84 * u[5] * s;
        // stoichiometry: rows are species, columns r1..r5
        let stoich = [
            [-2.0, 1.0, -1.0, -1.0, 0.0],
            [-0.5, 0.0, 0.0, -1.0, -0.5],
            [1.0, -1.0, 1.0, 0.0, 0.0],
            [0.0, -1.0, 1.0, -2.0, 0.0],
            [0.0, 1.0, -1.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, 0.0, -1.0],
        ];
        let mut j = DMatrix::zeros(6, 6);
        for (row, coeffs) in stoich.iter().enumerate() {
            for col in 0..6 {
                j[(row, col)] = (0..5).map(|r| coeffs[r] * dr[r][col]).sum();
            }
        }
        j[(1, 1)] -= 3.3;
        j
    };
    let initial = dvector![0.437, 0.00123, 0.0, 0.0, 0.0, 0.367];
    let problem = OdeProblem::new(initial, 180.0, rhs)
        .expect("valid")
        .with_jacobian(jacobian);
    BenchmarkProblem::new("akzo", problem, Some(1.0 / 9.0))
}

/// Van der Pol with `μ = 1000`, `u(0) = (2, 0)` on `[0, 10]`.
pub fn van_der_pol() -> BenchmarkProblem {
    let mu = 1000.0;
    let rhs = move |u: &State, _t: f64| {
        dvector![u[1], -mu * (u[0] * u[0] - 1.0) * u[1] - u[0]]
    };
    let jacobian = move |u: &State, _t: f64| {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                0.0,
                1.0,
                -2.0 * mu * u[0] * u[1] - 1.0,
                -mu * (u[0] * u[0] - 1.0),
            ],
        )
    };
    let problem = OdeProblem::new(dvector![2.0, 0.0], 10.0, rhs)
        .expect("valid")
        .with_jacobian(jacobian);
    BenchmarkProblem::new("vdp", problem, Some(1.0 / 75.0))
}

/// Final time of the heat benchmark: ten decay times of the slowest mode.
pub const HEAT_T_END: f64 = 1.0;
/// Grid spacing of the registered heat benchmark.
pub const HEAT_SPACING: f64 = 0.01;

/// Eigenvalues `(4/h²) sin²(jπh/2)`, `j = 1..N`, of the stiffness matrix.
pub fn heat_eigenvalues(h: f64) -> Vec<f64> {
    let n = heat_nodes(h);
    (1..=n)
        .map(|j| 4.0 / (h * h) * (j as f64 * PI * h / 2.0).sin().powi(2))
        .collect()
}

fn heat_nodes(h: f64) -> usize {
    (1.0 / h).round() as usize - 1
}

/// Stiffness matrix `(1/h²) tridiag(-1, 2, -1)` on the interior nodes.
pub fn heat_stiffness(h: f64) -> DMatrix<f64> {
    let n = heat_nodes(h);
    let scale = 1.0 / (h * h);
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0 * scale,
        1 => -scale,
        _ => 0.0,
    })
}

/// Discrete Dirac delta at `x = 0.5`: `1/h` at the nearest interior node.
pub fn heat_forcing(h: f64) -> State {
    let n = heat_nodes(h);
    let mut f = DVector::zeros(n);
    // node i sits at x = (i + 1) h
    let mid = ((0.5 / h).round() as usize).clamp(1, n) - 1;
    f[mid] = 1.0 / h;
    f
}

/// Semi-discrete heat equation `u' + A u = f`, `u(0) = 0`.
///
/// `h` must split `[0, 1]` into at least three intervals.
pub fn heat_equation(h: f64) -> Result<BenchmarkProblem, String> {
    if !(h > 0.0) {
        return Err(format!("spatial step {h} must be positive"));
    }
    let intervals = 1.0 / h;
    if (intervals - intervals.round()).abs() > 1e-9 || intervals.round() < 3.0 {
        return Err(format!("h = {h} must divide [0, 1] into at least three intervals"));
    }
    let n = heat_nodes(h);
    let a = heat_stiffness(h);
    let f = heat_forcing(h);
    let eigenvalues = heat_eigenvalues(h);
    let lambda_max = eigenvalues[n - 1];
    let problem = OdeProblem::linear(a, Some(f.clone()), DVector::zeros(n), HEAT_T_END)
        .map_err(|e| e.to_string())?
        .with_spectral_hint(lambda_max);

    // expansion in the orthonormal sine modes v_j(i) = sqrt(2h) sin(jπx_i)
    let modes: Vec<DVector<f64>> = (1..=n)
        .map(|j| {
            DVector::from_fn(n, |i, _| {
                (2.0 * h).sqrt() * (j as f64 * PI * (i + 1) as f64 * h).sin()
            })
        })
        .collect();
    let coeffs: Vec<f64> = modes.iter().map(|v| v.dot(&f)).collect();
    let mut bench = BenchmarkProblem::new("heat", problem, Some(1.0 / 31.0)).with_analytic(
        move |t| {
            let mut u = DVector::zeros(n);
            for ((v, &c), &lam) in modes.iter().zip(&coeffs).zip(&eigenvalues) {
                u.axpy(c / lam * (1.0 - (-lam * t).exp()), v, 1.0);
            }
            u
        },
    );
    bench.parabolic = true;
    Ok(bench)
}

/// Steady state `A⁻¹ f` of the heat benchmark, by the Thomas algorithm.
pub fn heat_steady_state(h: f64) -> State {
    let n = heat_nodes(h);
    let scale = 1.0 / (h * h);
    let rhs = heat_forcing(h);
    let (lower, diag, upper) = (-scale, 2.0 * scale, -scale);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper / diag;
    d[0] = rhs[0] / diag;
    for i in 1..n {
        let denom = diag - lower * c[i - 1];
        c[i] = upper / denom;
        d[i] = (rhs[i] - lower * d[i - 1]) / denom;
    }
    let mut x = DVector::zeros(n);
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// `u1' = 5 u2`, `u2' = -u1`, `u(0) = (0, 1)`; solution `(√5 sin √5t, cos √5t)`.
pub fn nonstiff_oscillator() -> BenchmarkProblem {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, -5.0, 1.0, 0.0]);
    let problem = OdeProblem::linear(a, None, dvector![0.0, 1.0], 10.0)
        .expect("valid")
        .with_spectral_hint(5f64.sqrt());
    let w = 5f64.sqrt();
    BenchmarkProblem::new("nonstiff", problem, Some(1.0))
        .with_analytic(move |t| dvector![w * (w * t).sin(), (w * t).cos()])
}
