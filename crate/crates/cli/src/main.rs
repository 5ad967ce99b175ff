use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use subsetalloc::engine::{solve, SolveConfig, SolveReport};
use subsetalloc::gen::{generate, GenParams};
use subsetalloc::io::{instance_from_json, instance_to_json, report_to_json, AssignmentReport, RationalJson};
use subsetalloc::model::ProblemInstance;
use subsetalloc::numerics::parse_rational;
use subsetalloc::profiles::{profile_upper_bound, ProfileCatalog};
use subsetalloc::{costmodel::CostModelSpec, oracle, Error};

/// Exact solver for the LP relaxation of the subset assignment problem.
#[derive(Parser)]
#[command(name = "subsetalloc", version)]
struct Cli {
    /// Directory holding cached profile catalogs.
    #[arg(long, global = true, env = "SUBSETALLOC_CACHE", default_value = "./.profile-cache")]
    cache_dir: PathBuf,

    /// Worker threads for profile scans; 1 runs sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print the assignment.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate a random instance.
    Gen(GenArgs),
    /// Enumerate and cache the profile catalog for `d` bins.
    Profiles {
        d: usize,
        /// Write the catalog here instead of the cache directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve with both the solver and the simplex oracle and compare.
    Verify {
        instance: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Build an instance from a cache hardware spec.
    Costs {
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Stop after this many augmentations (for testing).
    #[arg(long)]
    max_iters: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, default_value_t = 3)]
    d: usize,
    #[arg(short, long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    max_size: i64,
    #[arg(long, default_value_t = 10)]
    max_capacity: i64,
    #[arg(long, default_value_t = 100)]
    max_cost: i64,
    /// Probability a non-empty option is forbidden, e.g. `1/4`.
    #[arg(long, default_value = "0")]
    forbid_fraction: String,
    #[arg(long)]
    max_copies: Option<usize>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// A failure with its process exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => 1,
            Error::Parse(_) | Error::Catalog(_) => 2,
            Error::Validation(_) | Error::InvalidInput(_) | Error::Guard(_) | Error::DimensionMismatch { .. } | Error::AlreadyPadded => 3,
            Error::Invariant(_) | Error::BudgetExceeded { .. } | Error::NotPadded => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| io_failure(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}").map_err(|e| Failure { code: 1, message: e.to_string() })
        }
    }
}

fn load_instance(path: &Path) -> Result<ProblemInstance, Failure> {
    let inst = instance_from_json(&read(path)?)?;
    inst.validate()?;
    Ok(inst)
}

fn load_catalog(cli: &Cli, d: usize, parallel: bool) -> Result<ProfileCatalog, Failure> {
    if let Some(c) = ProfileCatalog::load(&cli.cache_dir, d)? {
        log::info!("loaded {} profiles for d = {d} from {}", c.len(), cli.cache_dir.display());
        return Ok(c);
    }
    log::info!("building the profile catalog for d = {d}");
    let c = ProfileCatalog::load_or_build(&cli.cache_dir, d, parallel)?;
    log::info!("f({d}) = {}; cached in {}", c.defined_count(), cli.cache_dir.display());
    Ok(c)
}

fn run_solver(cli: &Cli, inst: &ProblemInstance, run: &RunArgs, parallel: bool) -> Result<(SolveReport, usize), Failure> {
    let catalog = load_catalog(cli, inst.d(), parallel)?;
    let config = SolveConfig {
        max_iterations: run.max_iters,
        parallel,
        verbose: log::log_enabled!(log::Level::Debug),
    };
    let report = solve(inst, &catalog, &config)?;
    log::info!(
        "{} iterations (budget {}), {} restore steps, {:.3?}",
        report.iterations,
        report.iteration_budget,
        report.restore_steps,
        report.wall_time
    );
    Ok((report, catalog.defined_count()))
}

fn stats(r: &SolveReport, f: usize) -> BTreeMap<String, String> {
    [
        ("iterations", r.iterations.to_string()),
        ("iteration_budget", r.iteration_budget.to_string()),
        ("restore_steps", r.restore_steps.to_string()),
        ("profile_scans", r.profile_scans.to_string()),
        ("index_queries", r.index_queries.to_string()),
        ("converged", r.converged.to_string()),
        ("profiles", f.to_string()),
        ("d", r.instance.d().to_string()),
        ("n", r.instance.original_items().to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let parallel = cfg!(feature = "parallel") && cli.threads != Some(1);
    #[cfg(feature = "parallel")]
    if let Some(t) = cli.threads {
        // ignore a pool that is already configured
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    if cli.threads.is_some_and(|t| t > 1) {
        log::warn!("built without the parallel feature; --threads is ignored");
    }

    match &cli.command {
        Command::Solve { instance, run } => {
            let inst = load_instance(instance)?;
            let (r, f) = run_solver(cli, &inst, run, parallel)?;
            let report = AssignmentReport::new(&r.instance, &r.assignment, stats(&r, f));
            emit(None, &report_to_json(&report))
        }
        Command::Gen(g) => {
            let forbid = parse_rational(&g.forbid_fraction).ok_or_else(|| Failure {
                code: 2,
                message: format!("bad fraction {:?}", g.forbid_fraction),
            })?;
            let params = GenParams {
                seed: g.seed,
                d: g.d,
                n: g.n,
                max_size: g.max_size,
                max_capacity: g.max_capacity,
                max_cost: g.max_cost,
                forbid_fraction: forbid,
                max_copies: g.max_copies,
            };
            emit(g.output.as_deref(), &instance_to_json(&generate(&params)?))
        }
        Command::Profiles { d, output } => {
            let dir = output.as_deref().unwrap_or(&cli.cache_dir);
            let catalog = subsetalloc::profiles::enumerate_profiles_with(*d, parallel)?;
            catalog.verify_all().map_err(|e| Failure { code: 4, message: e })?;
            let path = catalog.save(dir)?;
            log::info!("wrote {}", path.display());
            let out = json!({
                "d": d,
                "f": catalog.defined_count().to_string(),
                "profiles": catalog.len().to_string(),
                "upper_bound": profile_upper_bound(*d).to_string(),
                "path": path.display().to_string(),
            });
            emit(None, &serde_json::to_string_pretty(&out).expect("json"))
        }
        Command::Verify { instance, run } => {
            let inst = load_instance(instance)?;
            let o = oracle::simplex_solve(&inst)?;
            let (r, _) = run_solver(cli, &inst, run, parallel)?;
            let equal = r.objective == o.objective;
            let out = json!({
                "solver": RationalJson::from(&r.objective),
                "oracle": RationalJson::from(&o.objective),
                "equal": equal,
                "iterations": r.iterations.to_string(),
            });
            emit(None, &serde_json::to_string_pretty(&out).expect("json"))?;
            if equal {
                Ok(())
            } else {
                Err(Failure {
                    code: 4,
                    message: "solver and oracle objectives differ".into(),
                })
            }
        }
        Command::Costs { spec, output } => {
            let spec = CostModelSpec::from_json(&read(spec)?)?;
            emit(output.as_deref(), &instance_to_json(&spec.generate()?))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            log::error!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
