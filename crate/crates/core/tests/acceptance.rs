//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria that cannot hold under the definitions implemented here are still
//! evaluated in full and reported as FAIL. The run aborts only when a
//! criterion fails outside the expected set below, or an expected failure
//! changes shape.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use stabex::damping::{self, DampingParams, SimpleDampingParams};
use stabex::harness::{self, RunOverrides, RunRecord};
use stabex::problems;
use stabex::solver::{divergence_rate, FixedPointIteration, OdeProblem, StepKind};

use nalgebra::{dvector, DMatrix};

/// Entries of the published minimal-q row that disagree with the exact
/// stability condition.
const EXPECTED_TABLE_MISMATCHES: &[u32] = &[16];
/// Stiff benchmarks whose cost ratio cannot land within the window with the
/// `λ_max/2` baseline.
const EXPECTED_COST_MISSES: &[&str] = &["test-eq", "test-sys", "nonnormal", "akzo"];

const COST_WINDOW: f64 = 3.0;
const COST_CAP: f64 = 0.2;
const ACCURACY_FACTOR: f64 = 10.0;
const GROWTH_SLACK: f64 = 1e-12;

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    /// The failure is one of the analyzed, expected ones.
    expected_failure: bool,
    details: Vec<String>,
}

impl Verdict {
    fn new(id: u32, title: &'static str) -> Self {
        Self {
            id,
            title,
            pass: true,
            expected_failure: false,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        if !ok {
            self.pass = false;
        }
        self.details.push(format!("{} {detail}", if ok { "ok  " } else { "FAIL" }));
    }

    fn note(&mut self, detail: String) {
        self.details.push(format!("     {detail}"));
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn dyadic_row() -> Verdict {
    let mut v = Verdict::new(1, "dyadic minimal-q row for p = 0..16");
    let (rows, elapsed) = timed(|| harness::table_rows(0..=16));
    let mut mismatched = Vec::new();
    for &(p, q, published) in &rows {
        let published = published.expect("published row covers 0..=16");
        if q != published {
            mismatched.push(p);
            v.check(false, format!("p = {p}: computed q = {q}, published q = {published}"));
        }
    }
    v.check(
        elapsed < Duration::from_secs(5),
        format!("runtime {:.2} s (limit 5 s)", elapsed.as_secs_f64()),
    );
    if !v.pass && mismatched == EXPECTED_TABLE_MISMATCHES && elapsed < Duration::from_secs(5) {
        v.expected_failure = true;
        let p = 16;
        let published = harness::PUBLISHED_Q[p as usize];
        let peak = damping::max_abs_on_grid(
            |x| damping::eval_dyadic_poly(x, &damping::DyadicParams::new(p, published, 1.0).unwrap()),
            2f64.powi(p as i32),
            damping::SCAN_POINTS,
        );
        v.note(format!(
            "with the published q = {published} at p = {p}, max |P_d| on the 10^4 grid is {peak:.3} > 1"
        ));
    }
    v
}

fn damping_costs() -> Verdict {
    let mut v = Verdict::new(2, "damping costs at K·λ_N = 64");
    let k_lambda_n = 64.0;
    let m = damping::chebyshev_degree(k_lambda_n);
    v.check(m == 6, format!("Chebyshev degree {m} (expect 6)"));
    let cheb = damping::chebyshev_sequence(k_lambda_n, m).unwrap();
    let cheb_cost = cheb.cost();
    v.check(
        (cheb_cost - 6.0 / 1.125).abs() <= 0.01,
        format!("Chebyshev cost {cheb_cost:.6} (expect 5.333 ± 0.01)"),
    );
    let dy = damping::dyadic_sequence(k_lambda_n, 1.0).unwrap();
    let (p, q) = match dy.params() {
        Some(DampingParams::Dyadic(d)) => (d.levels(), d.multiple_levels()),
        _ => unreachable!("dyadic sequence carries dyadic parameters"),
    };
    v.check((p, q) == (6, 3), format!("dyadic (p, q) = ({p}, {q}) (expect (6, 3))"));
    let dy_cost = dy.cost();
    v.check(
        (dy_cost - 8.0).abs() <= 1e-12,
        format!("dyadic cost {dy_cost} (expect 8)"),
    );
    v
}

fn stability_sweep() -> Verdict {
    let mut v = Verdict::new(3, "damping stability sweep");
    let c = 0.5;
    let n = 50;
    let (lo, hi) = (2.1f64.ln(), 1e6f64.ln());
    let start = Instant::now();
    let (mut worst_simple, mut worst_cheb, mut worst_dyadic) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        let x = (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();

        let m = damping::min_damping_steps(x, c).unwrap();
        let simple = SimpleDampingParams::new(1.0, c / x, m, c).unwrap();
        let value = damping::eval_simple_poly(x, &simple).abs();
        worst_simple = worst_simple.max(value);
        if value > 1.0 {
            v.check(false, format!("simple damping at Kλ = {x:.4}: |P| = {value}"));
        }

        let cheb = damping::chebyshev_sequence(x, damping::chebyshev_degree(x)).unwrap();
        let cp = *cheb.params().unwrap();
        let end = match cp {
            DampingParams::Chebyshev(p) => p.interval_end(),
            _ => unreachable!(),
        };
        let peak = damping::max_abs_on_grid(|y| damping::eval_real_poly(y, &cp), end, 10_000);
        worst_cheb = worst_cheb.max(peak);
        if peak > 1.0 + 1e-9 {
            v.check(false, format!("Chebyshev at Kλ_N = {x:.4}: max |P_c| = {peak}"));
        }

        let dy = damping::dyadic_sequence(x, 1.0).unwrap();
        let dp = *dy.params().unwrap();
        let end = match dp {
            DampingParams::Dyadic(p) => 2f64.powi(p.levels() as i32),
            _ => unreachable!(),
        };
        let peak = damping::max_abs_on_grid(|y| damping::eval_real_poly(y, &dp), end, 10_000);
        worst_dyadic = worst_dyadic.max(peak);
        if peak > 1.0 + 1e-9 {
            v.check(false, format!("dyadic at Kλ_N = {x:.4}: max |P_d| = {peak}"));
        }
    }
    let elapsed = start.elapsed();
    v.check(
        true,
        format!("worst |P|: simple {worst_simple:.6}, Chebyshev {worst_cheb:.12}, dyadic {worst_dyadic:.12}"),
    );
    v.check(
        elapsed < Duration::from_secs(10),
        format!("runtime {:.2} s (limit 10 s)", elapsed.as_secs_f64()),
    );
    v
}

fn contraction_identity() -> Verdict {
    let mut v = Verdict::new(4, "contraction identity on diag(100, 1000)");
    let a = DMatrix::from_diagonal(&dvector![100.0, 1000.0]);
    let problem = OdeProblem::linear(a, None, dvector![1.0, 1.0], 1.0).unwrap();
    for k in [0.001, 0.004] {
        let expected = k * 1000.0 / 2.0;
        let out = FixedPointIteration::exhaustive(0.0, 14).solve(&problem, problem.initial(), 0.0, k, None);
        let norms = &out.residual_norms;
        let worst = norms
            .windows(2)
            .skip(2)
            .map(|w| ((w[1] / w[0]) / expected - 1.0).abs())
            .fold(0.0, f64::max);
        v.check(
            worst <= 1e-8,
            format!("k = {k}: residual ratio vs kλ/2 = {expected}, worst relative deviation {worst:.2e}"),
        );
        if expected > 1.0 {
            let rate = divergence_rate(norms, k).unwrap();
            v.check(
                (rate / 1000.0 - 1.0).abs() <= 0.01,
                format!("k = {k}: divergence rate {rate:.6} (expect 1000 ± 1%)"),
            );
            let early = FixedPointIteration::new(0.0, 10).solve(&problem, problem.initial(), 0.0, k, None);
            let rate = divergence_rate(&early.residual_norms, k).unwrap();
            v.check(
                early.diverged && (rate / 1000.0 - 1.0).abs() <= 0.01,
                format!(
                    "k = {k}: early stop after {} iterations, divergence rate {rate:.3}",
                    early.iterations
                ),
            );
        }
    }
    v
}

struct SuiteRun {
    records: BTreeMap<&'static str, RunRecord>,
    failures: Vec<String>,
    elapsed: Duration,
}

fn run_suite() -> SuiteRun {
    let start = Instant::now();
    let mut records = BTreeMap::new();
    let mut failures = Vec::new();
    for name in problems::NAMES {
        match harness::run_benchmark(name, &RunOverrides::default()) {
            Ok(r) => {
                records.insert(name, r);
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    }
    SuiteRun {
        records,
        failures,
        elapsed: start.elapsed(),
    }
}

fn cost_regression(suite: &SuiteRun) -> Verdict {
    let mut v = Verdict::new(5, "cost reduction within ×3 of published and ≤ 1/5");
    for f in &suite.failures {
        v.check(false, format!("integration failed: {f}"));
    }
    let mut missed = Vec::new();
    for name in problems::NAMES {
        let Some(r) = suite.records.get(name) else {
            continue;
        };
        let published = r.published_ratio.expect("every benchmark has a published ratio");
        let ratio = r.cost.ratio;
        if published < 1.0 {
            let factor = harness::factor_between(ratio, published);
            let ok = factor <= COST_WINDOW && ratio <= COST_CAP;
            if !ok {
                missed.push(name);
            }
            // what α₀ would have to be for the measured α to hit the published ratio
            let implied = r.cost.alpha / published;
            v.check(
                ok,
                format!(
                    "{name:9} α = {:8.3}  α₀ = {:9.3}  ratio 1/{:<7.1} published 1/{:<4.0} factor {factor:5.2}  (α₀ implied by published ratio: {implied:.0})",
                    r.cost.alpha,
                    r.cost.alpha0,
                    1.0 / ratio,
                    1.0 / published,
                ),
            );
        } else {
            let ok = ratio == 1.0 && r.stabilizing_nodes() == 0;
            if !ok {
                missed.push(name);
            }
            v.check(
                ok,
                format!("{name:9} ratio {ratio}, stabilizing steps {}", r.stabilizing_nodes()),
            );
        }
    }
    if let Some(akzo) = suite.records.get("akzo") {
        // every regular step costs at least two evaluations and spans at most k_max
        let t_end = akzo.trajectory.last().t;
        let damped: f64 = akzo
            .trajectory
            .nodes()
            .iter()
            .filter(|n| n.kind == StepKind::Stabilizing)
            .map(|n| n.step)
            .sum();
        let regular_evals = 2.0 * ((t_end - damped) / akzo.config.k_max).ceil();
        let burst_evals = akzo.stabilizing_nodes() as f64;
        let reject_evals = 2.0 * akzo.cost.rejected_attempts as f64;
        let floor = (regular_evals + burst_evals + reject_evals) / t_end;
        v.note(format!(
            "akzo: with k_max = {}, at least {regular_evals} evaluations for regular steps, {burst_evals} for damping and {reject_evals} for the {} rejected attempts give α ≥ {floor:.3}; the cap 1/5 needs α ≤ {:.3}",
            akzo.config.k_max,
            akzo.cost.rejected_attempts,
            COST_CAP * akzo.cost.alpha0
        ));
    }
    v.check(
        suite.elapsed < Duration::from_secs(120),
        format!("suite runtime {:.2} s (limit 120 s)", suite.elapsed.as_secs_f64()),
    );
    if !v.pass && suite.failures.is_empty() && missed == EXPECTED_COST_MISSES {
        v.expected_failure = true;
    }
    v
}

fn accuracy(suite: &SuiteRun) -> Verdict {
    let mut v = Verdict::new(6, "final-time accuracy ≤ 10·TOL");
    for f in &suite.failures {
        v.check(false, format!("integration failed: {f}"));
    }
    for name in problems::NAMES {
        let Some(r) = suite.records.get(name) else {
            continue;
        };
        let bound = ACCURACY_FACTOR * r.config.tol;
        v.check(
            r.error <= bound,
            format!("{name:9} error {:.3e} vs {:?} reference (bound {bound:.0e})", r.error, r.reference),
        );
    }
    if let Some(r) = suite.records.get("heat") {
        let steady = problems::heat_steady_state(problems::HEAT_SPACING);
        let gap = stabex::oracle::max_error(&steady, &r.trajectory.last().state);
        let bound = ACCURACY_FACTOR * r.config.tol;
        v.check(
            gap <= bound,
            format!("heat      distance to steady state A⁻¹f {gap:.3e} (bound {bound:.0e})"),
        );
    }
    v
}

fn regulator(suite: &SuiteRun) -> Verdict {
    let mut v = Verdict::new(7, "regulator growth k_n ≤ 2 k_{n-1}");
    for name in problems::NAMES {
        let Some(r) = suite.records.get(name) else {
            continue;
        };
        let nodes = r.trajectory.nodes();
        let mut pairs = 0;
        let mut worst = 0.0f64;
        for w in nodes.windows(2) {
            if w[0].kind == StepKind::Regular && w[1].kind == StepKind::Regular {
                pairs += 1;
                worst = worst.max(w[1].step / w[0].step);
                if w[1].step > 2.0 * w[0].step + GROWTH_SLACK {
                    v.check(false, format!("{name}: k = {} after {} at t = {}", w[1].step, w[0].step, w[1].t));
                }
            }
        }
        v.check(true, format!("{name:9} {pairs} consecutive regular pairs, largest growth {worst:.4}"));
    }
    v
}

fn threshold() -> Verdict {
    let mut v = Verdict::new(8, "fixed-point convergence threshold kλ = 2");
    let lambda = 1000.0;
    let problem =
        OdeProblem::linear(DMatrix::from_element(1, 1, lambda), None, dvector![1.0], 1.0).unwrap();
    for (k_lambda, should_converge) in [(1.8, true), (2.2, false)] {
        let k = k_lambda / lambda;
        let out = FixedPointIteration::new(1e-10, 500).solve(&problem, problem.initial(), 0.0, k, None);
        let ok = out.converged == should_converge && out.diverged != should_converge;
        v.check(
            ok,
            format!(
                "kλ = {k_lambda}: converged = {}, diverged = {}, iterations {}",
                out.converged, out.diverged, out.iterations
            ),
        );
    }
    v
}

fn read_all_csv(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, std::fs::read(&path).unwrap());
        }
    }
    files
}

fn determinism() -> Verdict {
    let mut v = Verdict::new(9, "bench-all CSV output is byte-identical across runs");
    let exe = env!("CARGO_BIN_EXE_stabex");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = Command::new(exe)
            .args(["bench-all", "--out"])
            .arg(d.path())
            .output()
            .unwrap();
        v.note(format!("bench-all exit code {:?}", status.status.code()));
    }
    let (a, b) = (read_all_csv(dirs[0].path()), read_all_csv(dirs[1].path()));
    v.check(a.len() == problems::NAMES.len() + 1, format!("{} CSV files", a.len()));
    v.check(a.keys().eq(b.keys()), "same file set".into());
    for (name, bytes) in &a {
        v.check(b.get(name) == Some(bytes), format!("{name} ({} bytes)", bytes.len()));
    }
    v
}

fn main() {
    let suite = run_suite();
    let verdicts = vec![
        dyadic_row(),
        damping_costs(),
        stability_sweep(),
        contraction_identity(),
        cost_regression(&suite),
        accuracy(&suite),
        regulator(&suite),
        threshold(),
        determinism(),
    ];

    let mut unexpected = 0;
    for v in &verdicts {
        let tag = match (v.pass, v.expected_failure) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected; see decisions ledger)",
            (false, false) => "FAIL",
        };
        println!("criterion {}: {tag}  {}", v.id, v.title);
        for d in &v.details {
            println!("    {d}");
        }
        if !v.pass && !v.expected_failure {
            unexpected += 1;
        }
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!(
        "acceptance: {passed}/{} criteria passed, {} expected failures, {unexpected} unexpected failures",
        verdicts.len(),
        verdicts.iter().filter(|v| !v.pass && v.expected_failure).count()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
