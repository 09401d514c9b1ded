use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use resbus::device::{Frame, GPrimeFormula};
use resbus::engine::convergence_check;
use resbus::io::{parse_config, scenario_to_toml, write_run, OutputFormat, RunManifest, OUTPUT_DIR_ENV};
use resbus::scenario::{
    builtin_scenario, builtin_scenarios, resolve_gprime_formula, run_scenario, sweep, BasisKind,
    Scenario, ScenarioResult,
};
use resbus::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_INTEGRATOR: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "resbus", version, about = "Bell-state generation on bus-coupled resonators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a built-in scenario or a config file and write its time series.
    Run(RunArgs),
    /// Run a scenario once per value of one parameter.
    Sweep(SweepArgs),
    /// List the built-in scenarios.
    ListScenarios,
    /// Convergence (dt vs dt/2), physicality and g' formula checks.
    Check(CheckArgs),
    /// Print a built-in scenario as a config file.
    ExportConfig { scenario: String },
}

#[derive(Args, Debug, Clone)]
struct ScenarioArgs {
    /// Built-in scenario name.
    scenario: Option<String>,
    /// TOML config file.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Manifest of an earlier run to reproduce.
    #[arg(long, conflicts_with_all = ["scenario", "config"])]
    manifest: Option<PathBuf>,
    #[arg(long)]
    dt_ns: Option<f64>,
    #[arg(long)]
    t_max_ns: Option<f64>,
    #[arg(long)]
    frame: Option<Frame>,
    #[arg(long)]
    gprime_formula: Option<GPrimeFormula>,
    #[arg(long)]
    basis: Option<BasisKind>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = "out")]
    output: PathBuf,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Parameter path, e.g. `kappa_inv_us` or `resonators[0].g_mhz`.
    #[arg(long)]
    param: String,
    /// Comma-separated values in configuration units.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    values: Vec<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
}

fn resolve_scenario(args: &ScenarioArgs) -> resbus::Result<Scenario> {
    let mut s = match (&args.scenario, &args.config, &args.manifest) {
        (Some(name), _, _) => builtin_scenario(name).ok_or_else(|| {
            let known: Vec<String> = builtin_scenarios().into_iter().map(|s| s.name).collect();
            Error::config("scenario", format!("unknown scenario `{name}` (known: {})", known.join(", ")))
        })?,
        (None, Some(path), _) => parse_config(path)?,
        (None, None, Some(path)) => RunManifest::load(path)?.scenario()?,
        (None, None, None) => {
            return Err(Error::config("scenario", "give a scenario name, --config or --manifest"))
        }
    };
    if let Some(dt) = args.dt_ns {
        s.set_parameter("sim.dt_ns", dt)?;
    }
    if let Some(t) = args.t_max_ns {
        s.set_parameter("sim.t_max_ns", t)?;
    }
    if let Some(f) = args.frame {
        s.frame = f;
    }
    if let Some(f) = args.gprime_formula {
        s.gprime_formula = f;
    }
    if let Some(b) = args.basis {
        s.basis = b;
    }
    s.validate()?;
    Ok(s)
}

fn print_summary(result: &ScenarioResult) {
    for line in result.summary_lines() {
        println!("{line}");
    }
}

fn persist(dir: &Path, scenario: &Scenario, result: &ScenarioResult, elapsed: std::time::Duration, format: OutputFormat) -> resbus::Result<()> {
    let mut manifest = RunManifest::new(scenario, result, elapsed);
    let (data, man) = write_run(dir, result, &mut manifest, format)?;
    println!("wrote {} and {}", data.display(), man.display());
    Ok(())
}

fn cmd_run(args: &RunArgs) -> resbus::Result<()> {
    let scenario = resolve_scenario(&args.scenario)?;
    let start = Instant::now();
    let result = run_scenario(&scenario)?;
    let elapsed = start.elapsed();
    print_summary(&result);
    persist(&args.output.output, &scenario, &result, elapsed, args.output.format)
}

fn cmd_sweep(args: &SweepArgs) -> resbus::Result<()> {
    let base = resolve_scenario(&args.scenario)?;
    let start = Instant::now();
    let results = sweep(&base, &args.param, &args.values)?;
    let elapsed = start.elapsed();
    for (value, result) in args.values.iter().zip(&results) {
        let mut s = base.clone();
        s.set_parameter(&args.param, *value)?;
        s.name = result.metadata.scenario.clone();
        print_summary(result);
        persist(&args.output.output, &s, result, elapsed, args.output.format)?;
    }
    Ok(())
}

/// Returns whether every check passed.
fn cmd_check(args: &CheckArgs) -> resbus::Result<bool> {
    let scenario = resolve_scenario(&args.scenario)?;
    let mut ok = true;

    let coarse = run_scenario(&scenario)?;
    let mut refined_scenario = scenario.clone();
    refined_scenario.integrator = scenario.integrator.halved();
    let fine = run_scenario(&refined_scenario)?;
    let report = convergence_check(&coarse.series, &fine.series);
    println!(
        "convergence: max deviation {:.3e} (tolerance {:.0e}) {}",
        report.max_deviation,
        report.tolerance,
        if report.passed { "PASS" } else { "FAIL" }
    );
    ok &= report.passed;
    for (a, b) in coarse.optima.iter().zip(&fine.optima) {
        let d = (a.optimum.value - b.optimum.value).abs();
        let pass = d < report.tolerance;
        println!("convergence: F_max[{}] changes by {d:.3e} {}", a.label, if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    }

    let diag = &coarse.diagnostics;
    let phys = diag.max_drift <= 1e-8 && diag.max_hermiticity_error <= 1e-10 && diag.min_eigenvalue >= -1e-9;
    println!(
        "physicality: trace drift {:.3e}, hermiticity {:.3e}, min eigenvalue {:.3e} {}",
        diag.max_drift,
        diag.max_hermiticity_error,
        diag.min_eigenvalue,
        if phys { "PASS" } else { "FAIL" }
    );
    ok &= phys;
    if let Some(n) = coarse.extra("N_total") {
        let monotone = n.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        println!("excitation: Tr(rho N) non-increasing {}", if monotone { "PASS" } else { "FAIL" });
        ok &= monotone;
    }

    if !scenario.pairs.is_empty() && scenario.frame != Frame::Effective {
        let t_star = coarse.best().optimum.t_star;
        match resolve_gprime_formula(&scenario, 200e-9, Some(t_star)) {
            Ok(res) => {
                println!("g' fit: |g'|/2pi = {:.4} MHz", res.fitted_g_prime / (2.0 * std::f64::consts::PI) / 1e6);
                for c in &res.candidates {
                    println!(
                        "g' fit: {} formula |g'|/2pi = {:.4} MHz, relative error {:.3} {}",
                        c.formula,
                        c.g_prime.abs() / (2.0 * std::f64::consts::PI) / 1e6,
                        c.relative_error,
                        if c.matches { "match" } else { "no match" }
                    );
                }
                match res.winner {
                    Some(w) => println!("g' fit: winner {w}"),
                    None => println!("g' fit: no unique winner"),
                }
            }
            Err(e) => println!("g' fit: skipped ({e})"),
        }
    }
    print_summary(&coarse);
    Ok(ok)
}

fn exit_code_for(e: &Error) -> u8 {
    if e.is_integrator_failure() {
        EXIT_INTEGRATOR
    } else {
        EXIT_VALIDATION
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args).map(|_| true),
        Command::Sweep(args) => cmd_sweep(args).map(|_| true),
        Command::ListScenarios => {
            for s in builtin_scenarios() {
                println!("{}", s.name);
            }
            Ok(true)
        }
        Command::Check(args) => cmd_check(args),
        Command::ExportConfig { scenario } => builtin_scenario(scenario)
            .ok_or_else(|| Error::config("scenario", format!("unknown scenario `{scenario}`")))
            .and_then(|s| scenario_to_toml(&s))
            .map(|text| {
                print!("{text}");
                true
            }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_INTEGRATOR),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use resbus::IntegratorFailure;

    #[test]
    fn integrator_failures_map_to_their_own_exit_code() {
        let failure: Error = IntegratorFailure::NonFinite { time: 1e-9 }.into();
        assert_eq!(exit_code_for(&failure), EXIT_INTEGRATOR);
        assert_eq!(exit_code_for(&Error::config("sim.dt_ns", "bad")), EXIT_VALIDATION);
    }
}
