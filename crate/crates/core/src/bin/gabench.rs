//! Command-line front end: validate datasets, inspect the frontier, and
//! run the benchmarking analysis with rendered reports.
//!
//! Exit codes: 0 success, 1 validation findings, 2 IO/schema errors,
//! 3 solver failures.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gabench::domain::Dataset;
use gabench::frontier::{classify_goal, extreme_efficient_set};
use gabench::gab::{run_analysis, GroupOutcome};
use gabench::oracle::{oracle_solve_group, OracleError};
use gabench::report::{build_report, load_dataset, render_report, LoadError, ReportFormat};
use gabench::settings::{EngineSettings, GroupingMode};
use gabench::solver::backend_by_id;

const EXIT_VALIDATION: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gabench",
    version,
    about = "Goal-adjusted DEA benchmarking for incentive plans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset and report every validation finding.
    Validate(CommonArgs),
    /// Print the extreme-efficient set and per-DMU goal classifications.
    Frontier(CommonArgs),
    /// Solve every group and render the payment report.
    Evaluate(CommonArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GroupingArg {
    PerFile,
    Singletons,
    SingleGroup,
}

#[derive(Args)]
struct CommonArgs {
    /// Dataset: a directory with dmus.csv/goals.csv/weights.csv, or one
    /// JSON file.
    #[arg(long, env = "GABENCH_DATA")]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "text", env = "GABENCH_FORMAT")]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long, env = "GABENCH_OUT")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "per-file", env = "GABENCH_GROUPING")]
    grouping: GroupingArg,
    #[arg(long, default_value = "microlp", env = "GABENCH_SOLVER")]
    solver: String,
    /// Solve time limit in seconds, per group.
    #[arg(long, env = "GABENCH_TIME_LIMIT")]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 1e-7, env = "GABENCH_TOL_FEAS")]
    tol_feas: f64,
    #[arg(long, default_value_t = 1e-6, env = "GABENCH_TOL_EFF")]
    tol_eff: f64,
    /// Use big-M facet linking instead of SOS1 sets.
    #[arg(long, env = "GABENCH_NO_SOS1")]
    no_sos1: bool,
    /// Cross-check every group against the brute-force oracle.
    #[arg(long, env = "GABENCH_ORACLE_CHECK")]
    oracle_check: bool,
    /// Dump each group's model in LP format into this directory.
    #[arg(long, env = "GABENCH_DUMP_LP")]
    dump_lp: Option<PathBuf>,
}

impl CommonArgs {
    fn settings(&self) -> EngineSettings {
        EngineSettings {
            feasibility_tol: self.tol_feas,
            efficiency_tol: self.tol_eff,
            solver: self.solver.clone(),
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            use_sos1: !self.no_sos1,
            grouping_mode: match self.grouping {
                GroupingArg::PerFile => GroupingMode::PerFile,
                GroupingArg::Singletons => GroupingMode::Singletons,
                GroupingArg::SingleGroup => GroupingMode::SingleGroup,
            },
            dump_lp: self.dump_lp.clone(),
            ..EngineSettings::default()
        }
    }

    fn report_format(&self) -> ReportFormat {
        match self.format {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Text => ReportFormat::Text,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Validate(args) => cmd_validate(&args),
        Command::Frontier(args) => cmd_frontier(&args),
        Command::Evaluate(args) => cmd_evaluate(&args),
    };
    ExitCode::from(code)
}

/// Load the dataset, mapping failures onto the exit-code contract.
fn load_or_exit(args: &CommonArgs) -> Result<Dataset, u8> {
    match load_dataset(&args.data) {
        Ok(ds) => Ok(ds),
        Err(LoadError::Validation(violations)) => {
            for v in &violations {
                eprintln!("violation [{}]: {}", v.rule, v.message);
            }
            Err(EXIT_VALIDATION)
        }
        Err(other) => {
            eprintln!("error: {other}");
            Err(EXIT_IO)
        }
    }
}

fn cmd_validate(args: &CommonArgs) -> u8 {
    match load_or_exit(args) {
        Ok(ds) => {
            println!(
                "ok: {} DMUs, {} indicators, {} groups",
                ds.dmus.len(),
                ds.indicator_count(),
                ds.grouping.groups.len()
            );
            0
        }
        Err(code) => code,
    }
}

fn cmd_frontier(args: &CommonArgs) -> u8 {
    let ds = match load_or_exit(args) {
        Ok(ds) => ds,
        Err(code) => return code,
    };
    let settings = args.settings();
    let backend = match backend_by_id(&settings.solver) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    let efficient = match extreme_efficient_set(&ds, backend.as_ref(), &settings) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    println!("E = {{{}}}", efficient.members.join(", "));
    for dmu in &ds.dmus {
        match classify_goal(&dmu.goals, &ds, backend.as_ref(), &settings) {
            Ok(class) => println!("{}: goals {:?}", dmu.id, class),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_SOLVER;
            }
        }
    }
    0
}

fn cmd_evaluate(args: &CommonArgs) -> u8 {
    let ds = match load_or_exit(args) {
        Ok(ds) => ds,
        Err(code) => return code,
    };
    let settings = args.settings();
    if let Err(msg) = settings.validate() {
        eprintln!("error: {msg}");
        return EXIT_IO;
    }
    let outcomes = match run_analysis(&ds, &settings) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    if outcomes.iter().any(|o| o.result.is_err()) {
        eprintln!("group status:");
        for o in &outcomes {
            match &o.result {
                Ok(sol) => eprintln!("  {}: {:?}", o.group_id, sol.solver_status),
                Err(e) => eprintln!("  {}: failed ({e})", o.group_id),
            }
        }
        return EXIT_SOLVER;
    }
    let solutions: Vec<_> = outcomes
        .into_iter()
        .map(|o: GroupOutcome| o.result.expect("checked above"))
        .collect();

    if args.oracle_check {
        if let Some(code) = run_oracle_check(&ds, &settings, &solutions) {
            return code;
        }
    }

    let report = match build_report(&solutions, &ds, &settings) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    let rendered = render_report(&report, args.report_format());
    match &args.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, rendered) {
                eprintln!("error: cannot write '{}': {e}", path.display());
                return EXIT_IO;
            }
        }
        None => print!("{rendered}"),
    }
    0
}

/// Compare each group's objective against the brute-force oracle. Returns
/// an exit code on mismatch or solver failure; groups beyond the oracle's
/// size guards are skipped with a notice.
fn run_oracle_check(
    ds: &Dataset,
    settings: &EngineSettings,
    solutions: &[gabench::gab::GroupSolution],
) -> Option<u8> {
    let backend = match backend_by_id(&settings.solver) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return Some(EXIT_SOLVER);
        }
    };
    let efficient = match extreme_efficient_set(ds, backend.as_ref(), settings) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return Some(EXIT_SOLVER);
        }
    };
    for sol in solutions {
        match oracle_solve_group(&sol.members, ds, &efficient, backend.as_ref()) {
            Ok((oracle_obj, _)) => {
                if (oracle_obj - sol.objective).abs() > 1e-6 {
                    eprintln!(
                        "oracle mismatch in group '{}': solver {} vs oracle {}",
                        sol.group_id, sol.objective, oracle_obj
                    );
                    return Some(EXIT_SOLVER);
                }
            }
            Err(OracleError::GuardExceeded(why)) => {
                eprintln!("oracle check skipped for group '{}': {why}", sol.group_id);
            }
            Err(e) => {
                eprintln!("error: oracle failed on group '{}': {e}", sol.group_id);
                return Some(EXIT_SOLVER);
            }
        }
    }
    None
}
