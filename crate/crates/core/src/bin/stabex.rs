use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use stabex::harness::{self, HarnessError, RunOverrides, RunRecord};
use stabex::problems;
use stabex::DampingMode;

const EXIT_FAILURE: u8 = 2;
const EXIT_THRESHOLD: u8 = 3;

#[derive(Parser)]
#[command(name = "stabex", version, about = "Stabilized explicit time stepping for stiff ODEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one benchmark problem.
    Run {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        kmax: Option<f64>,
        /// Damping constant.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<DampingMode>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Write `<problem>.svg`.
        #[arg(long)]
        plot: bool,
        /// Write `<problem>.csv`.
        #[arg(long)]
        csv: bool,
    },
    /// Run every benchmark with default settings and write all artifacts.
    BenchAll {
        #[arg(long, default_value = "bench")]
        out: PathBuf,
    },
    /// Plot the stability region of a damping polynomial.
    Region {
        #[arg(long, value_parser = ["chebyshev", "dyadic"])]
        method: String,
        /// `m` for chebyshev, `p,q` for dyadic.
        #[arg(long)]
        params: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the minimal q for each p of the dyadic ramp.
    Table {
        /// Inclusive range `a..b`.
        #[arg(long, default_value = "0..16", value_parser = parse_range)]
        p_range: (u32, u32),
    },
}

fn parse_mode(s: &str) -> Result<DampingMode, String> {
    s.parse()
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected a..b, got `{s}`"))?;
    let a: u32 = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|e| format!("`{b}`: {e}"))?;
    if a > b || b > 60 {
        return Err(format!("invalid range {a}..{b}"));
    }
    Ok((a, b))
}

fn summary(r: &RunRecord) -> String {
    let published = r
        .published_ratio
        .map_or("-".to_string(), |p| format!("1/{:.0}", 1.0 / p));
    format!(
        "{:9} alpha={:<10.4} alpha0={:<10.4} ratio=1/{:<8.1} published={:7} error={:.2e} regular={} stabilizing={} {}",
        r.problem,
        r.cost.alpha,
        r.cost.alpha0,
        1.0 / r.cost.ratio,
        published,
        r.error,
        r.regular_nodes(),
        r.stabilizing_nodes(),
        if r.meets_threshold() { "ok" } else { "MISS" }
    )
}

fn write_artifacts(r: &RunRecord, out: &Path, csv: bool, plot: bool) -> Result<(), HarnessError> {
    if csv {
        harness::emit_trajectory_csv(r, &out.join(format!("{}.csv", r.problem)))?;
    }
    if plot {
        harness::emit_plots(r, &out.join(format!("{}.svg", r.problem)))?;
    }
    Ok(())
}

fn save_partial(name: &str, err: &HarnessError, out: &Path) {
    if let Some(partial) = err.partial_trajectory() {
        let path = out.join(format!("{name}.partial.csv"));
        let written = std::fs::File::create(&path)
            .map_err(HarnessError::from)
            .and_then(|f| harness::write_trajectory_csv(&harness::trajectory_rows(partial), f));
        match written {
            Ok(()) => eprintln!("partial trajectory written to {}", path.display()),
            Err(e) => eprintln!("could not write partial trajectory: {e}"),
        }
    }
}

fn run(name: &str, overrides: RunOverrides, out: &Path, csv: bool, plot: bool) -> ExitCode {
    if let Err(e) = std::fs::create_dir_all(out) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    match harness::run_benchmark(name, &overrides) {
        Ok(r) => {
            println!("{}", summary(&r));
            if let Err(e) = write_artifacts(&r, out, csv, plot) {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
            if r.meets_threshold() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_THRESHOLD)
            }
        }
        Err(e @ HarnessError::Integration { .. }) => {
            eprintln!("error: {e}");
            save_partial(name, &e, out);
            ExitCode::from(EXIT_FAILURE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn bench_all(out: &Path) -> ExitCode {
    if let Err(e) = std::fs::create_dir_all(out) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    let results: Vec<(&str, Result<RunRecord, HarnessError>)> = problems::NAMES
        .par_iter()
        .map(|&name| (name, harness::run_benchmark(name, &RunOverrides::default())))
        .collect();

    let mut records = Vec::new();
    let mut failed = false;
    for (name, result) in results {
        match result {
            Ok(r) => {
                println!("{}", summary(&r));
                if let Err(e) = write_artifacts(&r, out, true, true) {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
                records.push(r);
            }
            Err(e) => {
                eprintln!("{name}: {e}");
                save_partial(name, &e, out);
                failed = true;
            }
        }
    }
    let table = out.join("compare.csv");
    if let Err(e) = harness::compare_table(&records, &table) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    println!("comparison written to {}", table.display());
    if failed {
        ExitCode::from(EXIT_FAILURE)
    } else if records.iter().all(RunRecord::meets_threshold) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_THRESHOLD)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            problem,
            tol,
            kmax,
            c,
            mode,
            out,
            plot,
            csv,
        } => {
            let overrides = RunOverrides {
                tol,
                k_max: kmax,
                damping_constant: c,
                mode,
            };
            run(&problem, overrides, &out, csv, plot)
        }
        Command::BenchAll { out } => bench_all(&out),
        Command::Region {
            method,
            params,
            out,
        } => match harness::region_params(&method, &params)
            .and_then(|p| harness::emit_region(&p, &out))
        {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Table { p_range: (a, b) } => {
            print!("{}", harness::format_table(&harness::table_rows(a..=b)));
            ExitCode::SUCCESS
        }
    }
}
