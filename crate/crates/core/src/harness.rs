//! Benchmark runs, cost comparison and the CSV/SVG artifacts behind them.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use thiserror::Error;

use crate::controller::{adaptive_solve, ControllerError, CostReport, DampingMode, SolverConfig};
use crate::damping::{self, DampingError, DampingParams, DyadicParams};
use crate::oracle::{self, OracleError, ReferenceMethod};
use crate::problems::{self, BenchmarkProblem};
use crate::solver::{StepKind, Trajectory};

/// A stiff run passes when its ratio is within this factor of the published one.
pub const ACCEPTANCE_FACTOR: f64 = 3.0;
/// ...and at most this large.
pub const ACCEPTANCE_MAX_RATIO: f64 = 0.2;
/// Sample count of the trajectory scan for `λ_max`.
pub const SPECTRUM_SAMPLES: usize = 2000;

/// Published minimal `q` for `p = 0..=16`.
pub const PUBLISHED_Q: [u32; 17] = [0, 0, 0, 1, 2, 3, 3, 4, 4, 5, 6, 7, 8, 8, 9, 10, 10];

pub const REGION_WIDTH: usize = 600;
pub const REGION_HEIGHT: usize = 400;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("{problem}: {source}")]
    Integration {
        problem: String,
        #[source]
        source: ControllerError,
    },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Damping(#[from] DampingError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed trajectory CSV: {0}")]
    Malformed(String),
}

impl HarnessError {
    pub fn partial_trajectory(&self) -> Option<&Trajectory> {
        match self {
            HarnessError::Integration { source, .. } => source.partial_trajectory(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOverrides {
    pub tol: Option<f64>,
    pub k_max: Option<f64>,
    pub damping_constant: Option<f64>,
    pub mode: Option<DampingMode>,
}

/// Per-problem defaults: `TOL = 1e-3` for the linear problems and `1e-2`
/// otherwise; `k_max = 1` for the nonlinear problems and `T` for the rest;
/// parabolic mode for the heat equation.
pub fn default_config(bench: &BenchmarkProblem) -> SolverConfig {
    let t_end = bench.t_end();
    let (tol, k_max) = match bench.name {
        "hires" | "akzo" | "vdp" => (1e-2, 1.0f64.min(t_end)),
        "heat" => (1e-2, t_end),
        _ => (1e-3, t_end),
    };
    let mut config = SolverConfig::new(tol, k_max, t_end);
    if bench.parabolic {
        config.mode = DampingMode::Parabolic;
    }
    config
}

pub fn configure(bench: &BenchmarkProblem, overrides: &RunOverrides) -> SolverConfig {
    let mut config = default_config(bench);
    if let Some(tol) = overrides.tol {
        config.tol = tol;
        config.discrete_tol = tol;
    }
    if let Some(k_max) = overrides.k_max {
        config.k_max = k_max;
        config.k_init = k_max.min(bench.t_end() / 1000.0);
    }
    if let Some(c) = overrides.damping_constant {
        config.damping_constant = c;
    }
    if let Some(mode) = overrides.mode {
        config.mode = mode;
    }
    config
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub problem: String,
    pub config: SolverConfig,
    /// Baseline from the oracle's `λ_max`.
    pub cost: CostReport,
    /// Max-norm error at `T`.
    pub error: f64,
    pub reference: ReferenceMethod,
    pub published_ratio: Option<f64>,
    pub wall_time: Duration,
    pub trajectory: Trajectory,
}

impl RunRecord {
    pub fn regular_nodes(&self) -> usize {
        self.trajectory.count(StepKind::Regular)
    }

    pub fn stabilizing_nodes(&self) -> usize {
        self.trajectory.count(StepKind::Stabilizing)
    }

    /// `max(ratio/published, published/ratio)`.
    pub fn within_factor(&self) -> Option<f64> {
        self.published_ratio.map(|p| factor_between(self.cost.ratio, p))
    }

    /// Stiff problems: ratio within [`ACCEPTANCE_FACTOR`] of the published
    /// value and at most [`ACCEPTANCE_MAX_RATIO`]. Otherwise: ratio 1 with no
    /// stabilizing steps.
    pub fn meets_threshold(&self) -> bool {
        match self.published_ratio {
            Some(p) if p < 1.0 => {
                factor_between(self.cost.ratio, p) <= ACCEPTANCE_FACTOR
                    && self.cost.ratio <= ACCEPTANCE_MAX_RATIO
            }
            _ => self.cost.ratio == 1.0 && self.stabilizing_nodes() == 0,
        }
    }
}

pub fn factor_between(a: f64, b: f64) -> f64 {
    (a / b).max(b / a)
}

pub fn run_benchmark(name: &str, overrides: &RunOverrides) -> Result<RunRecord, HarnessError> {
    let bench =
        problems::by_name(name).ok_or_else(|| HarnessError::UnknownProblem(name.to_string()))?;
    let config = configure(&bench, overrides);
    run_problem(&bench, config)
}

/// Solves, measures cost against the oracle's `λ_max` and the error at `T`.
pub fn run_problem(bench: &BenchmarkProblem, config: SolverConfig) -> Result<RunRecord, HarnessError> {
    let start = Instant::now();
    let solution =
        adaptive_solve(&bench.problem, &config).map_err(|source| HarnessError::Integration {
            problem: bench.name.to_string(),
            source,
        })?;
    let wall_time = start.elapsed();

    let t_end = bench.t_end();
    let reference = oracle::reference_solve(&bench.problem, bench.analytic.as_deref(), &[t_end])?;
    let exact = reference.last().expect("one sample requested");
    let error = oracle::max_error(exact, &solution.trajectory.last().state);
    let lambda_max = oracle::trajectory_lambda_max(&bench.problem, SPECTRUM_SAMPLES)?;

    Ok(RunRecord {
        problem: bench.name.to_string(),
        config,
        cost: solution.cost.with_lambda_max(lambda_max),
        error,
        reference: reference.method,
        published_ratio: bench.published_ratio,
        wall_time,
        trajectory: solution.trajectory,
    })
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// One line of the trajectory CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub k: f64,
    pub kind: StepKind,
    pub iterations: usize,
    pub residual: f64,
}

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "k", "kind", "iterations", "residual"];

pub fn trajectory_rows(trajectory: &Trajectory) -> Vec<TrajectoryRow> {
    trajectory
        .nodes()
        .iter()
        .map(|n| TrajectoryRow {
            t: n.t,
            k: n.step,
            kind: n.kind,
            iterations: n.iterations,
            residual: n.residual,
        })
        .collect()
}

pub fn write_trajectory_csv<W: Write>(rows: &[TrajectoryRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.write_record([
            format_float(r.t),
            format_float(r.k),
            r.kind.as_str().to_string(),
            r.iterations.to_string(),
            format_float(r.residual),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<TrajectoryRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(TRAJECTORY_HEADER) {
        return Err(HarnessError::Malformed("unexpected header".into()));
    }
    let float = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| HarnessError::Malformed(format!("`{s}`: {e}")))
    };
    r.records()
        .map(|rec| {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(HarnessError::Malformed(format!("{} fields", rec.len())));
            }
            Ok(TrajectoryRow {
                t: float(&rec[0])?,
                k: float(&rec[1])?,
                kind: StepKind::parse(&rec[2])
                    .ok_or_else(|| HarnessError::Malformed(format!("kind `{}`", &rec[2])))?,
                iterations: rec[3]
                    .parse()
                    .map_err(|e| HarnessError::Malformed(format!("`{}`: {e}", &rec[3])))?,
                residual: float(&rec[4])?,
            })
        })
        .collect()
}

pub fn emit_trajectory_csv(record: &RunRecord, path: &Path) -> Result<(), HarnessError> {
    let file = io::BufWriter::new(fs::File::create(path)?);
    write_trajectory_csv(&trajectory_rows(&record.trajectory), file)
}

pub const COMPARE_HEADER: [&str; 6] =
    ["problem", "alpha", "alpha0", "ratio", "paper_ratio", "within_factor"];

pub fn write_compare_table<W: Write>(records: &[RunRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARE_HEADER)?;
    for r in records {
        let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
        w.write_record([
            r.problem.clone(),
            format_float(r.cost.alpha),
            format_float(r.cost.alpha0),
            format_float(r.cost.ratio),
            opt(r.published_ratio),
            opt(r.within_factor()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn compare_table(records: &[RunRecord], path: &Path) -> Result<(), HarnessError> {
    write_compare_table(records, io::BufWriter::new(fs::File::create(path)?))
}

/// `(p, computed q, published q)` rows; the published column is empty past 16.
pub fn table_rows(ps: impl IntoIterator<Item = u32>) -> Vec<(u32, u32, Option<u32>)> {
    ps.into_iter()
        .map(|p| (p, damping::min_q_for_p(p), PUBLISHED_Q.get(p as usize).copied()))
        .collect()
}

pub fn format_table(rows: &[(u32, u32, Option<u32>)]) -> String {
    let mut s = String::from("  p   q  published\n");
    for &(p, q, published) in rows {
        let pub_col = published.map_or("-".to_string(), |v| v.to_string());
        let mark = match published {
            Some(v) if v != q => "  *",
            _ => "",
        };
        let _ = writeln!(s, "{p:3} {q:3} {pub_col:>10}{mark}");
    }
    s
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Panel {
    x0: f64,
    y0: f64,
    width: f64,
    height: f64,
    t_range: (f64, f64),
    v_range: (f64, f64),
}

impl Panel {
    fn x(&self, t: f64) -> f64 {
        let (a, b) = self.t_range;
        self.x0 + self.width * (t - a) / (b - a)
    }

    fn y(&self, v: f64) -> f64 {
        let (a, b) = self.v_range;
        self.y0 + self.height * (1.0 - (v - a) / (b - a))
    }

    fn path(&self, points: impl IntoIterator<Item = (f64, f64)>) -> String {
        let mut d = String::new();
        for (i, (t, v)) in points.into_iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{:.2} {:.2} ", self.x(t), self.y(v));
        }
        d.trim_end().to_string()
    }

    fn frame(&self, s: &mut String, title: &str, lo: &str, hi: &str) {
        let _ = writeln!(
            s,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.x0, self.y0, self.width, self.height
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="13">{title}</text>"#,
            self.x0,
            self.y0 - 6.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{hi}</text>"#,
            self.x0 - 4.0,
            self.y0 + 10.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" text-anchor="end">{lo}</text>"#,
            self.x0 - 4.0,
            self.y0 + self.height
        );
    }
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (-1.0, 1.0);
    }
    if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1.0) {
        (lo - 1.0, hi + 1.0)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Two stacked panels: solution components over `t`, then `log10 k` over `t`
/// with stabilizing steps marked.
pub fn solution_svg(record: &RunRecord) -> String {
    let nodes = record.trajectory.nodes();
    let t_end = nodes.last().map_or(1.0, |n| n.t).max(f64::MIN_POSITIVE);
    let (w, ph, margin) = (800.0, 300.0, 60.0);
    let height = 2.0 * ph + 3.0 * margin;

    let (lo, hi) = nodes
        .iter()
        .flat_map(|n| n.state.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let top = Panel {
        x0: margin,
        y0: margin,
        width: w - 1.5 * margin,
        height: ph,
        t_range: (0.0, t_end),
        v_range: padded_range(lo, hi),
    };

    let steps: Vec<(f64, f64, StepKind)> = nodes[1.min(nodes.len())..]
        .iter()
        .filter(|n| n.step > 0.0)
        .map(|n| (n.t, n.step.log10(), n.kind))
        .collect();
    let (klo, khi) = steps
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.1), b.max(s.1)));
    let bottom = Panel {
        x0: margin,
        y0: 2.0 * margin + ph,
        width: w - 1.5 * margin,
        height: ph,
        t_range: (0.0, t_end),
        v_range: padded_range(klo.floor(), khi.ceil()),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{height}" viewBox="0 0 {w} {height}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let _ = writeln!(s, r#"<g class="panel" id="solution">"#);
    top.frame(&mut s, &format!("{}: U(t)", record.problem), &format!("{:.3}", top.v_range.0), &format!("{:.3}", top.v_range.1));
    let dim = nodes.first().map_or(0, |n| n.state.len());
    for c in 0..dim {
        let d = top.path(nodes.iter().map(|n| (n.t, n.state[c])));
        let _ = writeln!(
            s,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1"/>"#,
            PALETTE[c % PALETTE.len()]
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="panel" id="steps">"#);
    bottom.frame(
        &mut s,
        "log10 k(t)",
        &format!("{}", bottom.v_range.0),
        &format!("{}", bottom.v_range.1),
    );
    if !steps.is_empty() {
        let d = bottom.path(steps.iter().map(|&(t, k, _)| (t, k)));
        let _ = writeln!(s, r##"<path d="{d}" fill="none" stroke="#1f77b4" stroke-width="1"/>"##);
        for &(t, k, kind) in &steps {
            if kind == StepKind::Stabilizing {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="1.5" fill="#d62728"/>"##,
                    bottom.x(t),
                    bottom.y(k)
                );
            }
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, "</svg>");
    s
}

pub fn emit_plots(record: &RunRecord, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, solution_svg(record))?;
    Ok(())
}

/// Parameters for a region plot: `m` for Chebyshev, `p,q` for dyadic.
pub fn region_params(method: &str, text: &str) -> Result<DampingParams, HarnessError> {
    let bad = |msg: String| HarnessError::Damping(DampingError::InvalidParameter(msg));
    let int = |s: &str| {
        s.trim()
            .parse::<u32>()
            .map_err(|e| bad(format!("`{s}`: {e}")))
    };
    match method {
        "chebyshev" => {
            let m = int(text)? as usize;
            let seq = damping::chebyshev_sequence(1.0, m)?;
            Ok(*seq.params().expect("sequence carries its parameters"))
        }
        "dyadic" => {
            let (p, q) = text
                .split_once(',')
                .ok_or_else(|| bad(format!("expected p,q, got `{text}`")))?;
            Ok(DampingParams::Dyadic(DyadicParams::new(int(p)?, int(q)?, 1.0)?))
        }
        other => Err(bad(format!("unknown method `{other}` (expected chebyshev|dyadic)"))),
    }
}

/// Length of the stable real interval `[-extent, 0]` in the normalized variable.
pub fn region_extent(params: &DampingParams) -> f64 {
    match params {
        DampingParams::Chebyshev(c) => 2.0 * (c.degree() * c.degree()) as f64,
        DampingParams::Dyadic(d) => {
            let (p, q) = (d.levels() as i32, d.multiple_levels() as i32);
            2f64.powi(q) * (q + 1) as f64 + 2f64.powi(p + 1) - 2f64.powi(q + 1)
        }
        DampingParams::Simple(s) => {
            (s.big_step() + s.num_small() as f64 * s.small_step()) / s.small_step()
        }
    }
}

/// `ln|P(z)|` sampled on a `(nx+1) × (ny+1)` node grid over
/// `[-extent-5, 1] × [-r, r]`.
#[derive(Debug, Clone)]
pub struct RegionGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// Row-major by imaginary index.
    pub log_modulus: Vec<f64>,
}

impl RegionGrid {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.log_modulus[j * self.re.len() + i]
    }

    pub fn is_stable(&self, i: usize, j: usize) -> bool {
        self.value(i, j) <= 0.0
    }
}

pub fn region_half_height(extent: f64) -> f64 {
    4.0 + 0.05 * extent
}

pub fn region_grid(params: &DampingParams, nx: usize, ny: usize) -> RegionGrid {
    let extent = region_extent(params);
    let (left, right) = (-extent - 5.0, 1.0);
    let r = region_half_height(extent);
    let re: Vec<f64> = (0..=nx).map(|i| left + (right - left) * i as f64 / nx as f64).collect();
    let im: Vec<f64> = (0..=ny).map(|j| -r + 2.0 * r * j as f64 / ny as f64).collect();
    let mut log_modulus = Vec::with_capacity(re.len() * im.len());
    for &y in &im {
        for &x in &re {
            let m = damping::eval_region_poly(Complex64::new(x, y), params).norm();
            let v = if m.is_nan() { 700.0 } else { m.ln().clamp(-700.0, 700.0) };
            log_modulus.push(v);
        }
    }
    RegionGrid {
        re,
        im,
        log_modulus,
    }
}

/// Line segments of the level set `ln|P| = 0` by marching squares.
pub fn region_contour(grid: &RegionGrid) -> Vec<[(f64, f64); 2]> {
    let (nx, ny) = (grid.re.len(), grid.im.len());
    let mut segments = Vec::new();
    let cross = |(x0, y0, v0): (f64, f64, f64), (x1, y1, v1): (f64, f64, f64)| {
        let s = v0 / (v0 - v1);
        (x0 + s * (x1 - x0), y0 + s * (y1 - y0))
    };
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let corner = |di: usize, dj: usize| {
                (grid.re[i + di], grid.im[j + dj], grid.value(i + di, j + dj))
            };
            // counter-clockwise corners starting bottom-left
            let c = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            let mut points = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if (a.2 > 0.0) != (b.2 > 0.0) {
                    points.push(cross(a, b));
                }
            }
            match points.len() {
                2 => segments.push([points[0], points[1]]),
                4 => {
                    let centre = c.iter().map(|p| p.2).sum::<f64>() / 4.0;
                    if (centre > 0.0) == (c[0].2 > 0.0) {
                        segments.push([points[0], points[3]]);
                        segments.push([points[1], points[2]]);
                    } else {
                        segments.push([points[0], points[1]]);
                        segments.push([points[2], points[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    segments
}

/// Contour `|P(z)| = 1` on a [`REGION_WIDTH`] × [`REGION_HEIGHT`] grid.
pub fn region_svg(params: &DampingParams) -> String {
    let grid = region_grid(params, REGION_WIDTH, REGION_HEIGHT);
    let (left, right) = (grid.re[0], *grid.re.last().expect("non-empty grid"));
    let (bottom, top) = (grid.im[0], *grid.im.last().expect("non-empty grid"));
    let (w, h) = (REGION_WIDTH as f64, REGION_HEIGHT as f64);
    let px = |x: f64| w * (x - left) / (right - left);
    let py = |y: f64| h * (top - y) / (top - bottom);

    let mut d = String::new();
    for [a, b] in region_contour(&grid) {
        let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}", px(a.0), py(a.1), px(b.0), py(b.1));
    }
    let label = match params {
        DampingParams::Chebyshev(c) => format!("chebyshev m={}", c.degree()),
        DampingParams::Dyadic(p) => format!("dyadic p={} q={}", p.levels(), p.multiple_levels()),
        DampingParams::Simple(s) => format!("simple m={}", s.num_small()),
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<line x1="0" y1="{:.2}" x2="{w}" y2="{:.2}" stroke="#999"/><line x1="{:.2}" y1="0" x2="{:.2}" y2="{h}" stroke="#999"/>"##,
        py(0.0),
        py(0.0),
        px(0.0),
        px(0.0)
    );
    let _ = writeln!(s, r##"<path class="contour" d="{d}" fill="none" stroke="#1f77b4" stroke-width="1"/>"##);
    let _ = writeln!(
        s,
        r#"<text x="8" y="16" font-size="12">{label}; re [{}, {}], im [{}, {}]</text>"#,
        format_float(left),
        format_float(right),
        format_float(bottom),
        format_float(top)
    );
    let _ = writeln!(s, "</svg>");
    s
}

pub fn emit_region(params: &DampingParams, path: &Path) -> Result<(), HarnessError> {
    fs::write(path, region_svg(params))?;
    Ok(())
}
