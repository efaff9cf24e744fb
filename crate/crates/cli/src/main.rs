//! `planspace`: count, query and sample the plans of a grounded STRIPS task
//! up to a length bound.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when the
//! compilation budget is exceeded, 3 when a plan is required but the plan
//! space is empty.

mod navigate;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use planspace_core::oracle::oracle_stats;
use planspace_core::{CompileOptions, LengthBound, PlanSpace, PlanningTask, Query, ReasoningError};

use crate::report::{
    Count, Emit, Enumerated, Exists, FacetList, OpSet, OracleReport, ProbabilityReport, Sampled, SignificanceReport,
    TopK, Validation,
};

#[derive(Debug, Parser)]
#[command(
    name = "planspace",
    version,
    about = "Count and reason over the bounded plans of a STRIPS task"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    format: Format,

    /// Write the DIMACS encoding to this file and its variable map to `<FILE>.vars`.
    #[arg(long, value_name = "FILE", global = true)]
    emit_cnf: Option<PathBuf>,

    /// Write the compiled d-DNNF to this file in NNF format.
    #[arg(long, value_name = "FILE", global = true)]
    emit_nnf: Option<PathBuf>,

    /// Node budget of the compiler.
    #[arg(long, env = "PLANSPACE_MAX_NODES", default_value_t = 10_000_000, global = true)]
    max_nodes: usize,

    /// Time budget of the compiler in seconds.
    #[arg(long, env = "PLANSPACE_TIMEOUT_SECS", default_value_t = 300, global = true)]
    timeout_secs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("bound").required(true).args(["length", "factor"]))]
struct TaskArgs {
    /// Task file in JSON.
    #[arg(long, value_name = "FILE")]
    task: PathBuf,

    /// Length bound.
    #[arg(long, value_name = "N")]
    length: Option<usize>,

    /// Length bound as a multiple of `--base`, rounded down.
    #[arg(long, value_name = "C", requires = "base")]
    factor: Option<f64>,

    /// Base length that `--factor` multiplies.
    #[arg(long, value_name = "N", requires = "factor")]
    base: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Number of plans.
    Count(TaskArgs),
    /// Whether at least one plan exists.
    Exists(TaskArgs),
    /// Whether at least K plans exist.
    Topk {
        k: BigUint,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Operators used by some plan.
    Brave(TaskArgs),
    /// Operators used by every plan.
    Cautious(TaskArgs),
    /// Operators used by some but not all plans.
    Facets(TaskArgs),
    /// Significance of every facet.
    Significance(TaskArgs),
    /// Fraction of plans satisfying a query such as `op:wake-up | op:sleep ; !op:get-ready`.
    Prob {
        query: String,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Lists plans from the compiled form.
    Enum {
        /// At most this many plans.
        #[arg(long, default_value_t = 1000)]
        limit: usize,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Draws N plans uniformly at random.
    Sample {
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Count and operator sets by explicit search, without compiling.
    Oracle(TaskArgs),
    /// Checks decomposability and determinism of the compiled form.
    ValidateDdnnf(TaskArgs),
    /// Line-oriented navigation session on standard input.
    Navigate {
        /// Plans sampled into every snapshot.
        #[arg(long, default_value_t = 3)]
        sample_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Runs the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Allowed CORS origin; any origin when unset.
        #[arg(long)]
        allow_origin: Option<String>,
    },
}

/// A failure together with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Budget(String),
    NoPlans(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Budget(_) => 2,
            CliError::NoPlans(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Budget(m) | CliError::NoPlans(m) => m,
        }
    }
}

impl From<ReasoningError> for CliError {
    fn from(e: ReasoningError) -> Self {
        if e.is_budget() {
            CliError::Budget(e.to_string())
        } else if matches!(e, ReasoningError::NoPlans) {
            CliError::NoPlans(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

impl Cli {
    fn compile_options(&self) -> CompileOptions {
        CompileOptions {
            max_nodes: self.max_nodes,
            timeout: Duration::from_secs(self.timeout_secs),
            ..CompileOptions::default()
        }
    }

    fn emit<R: Emit>(&self, report: &R) -> CliResult {
        let stdout = io::stdout();
        let mut out = stdout.lock();
        match self.format {
            Format::Json => {
                serde_json::to_writer(&mut out, report).map_err(|e| CliError::Usage(e.to_string()))?;
                writeln!(out)?;
            }
            Format::Human => report.human(&mut out)?,
        }
        Ok(out.flush()?)
    }

    /// Loads the task, resolves the bound and compiles, writing the
    /// requested sidecar files.
    fn space(&self, args: &TaskArgs) -> CliResult<PlanSpace> {
        let (task, bound) = load(args)?;
        if let Some(path) = &self.emit_cnf {
            let encoding = planspace_core::encode(&task, bound, true);
            write_file(path, |w| encoding.cnf.write_dimacs(w))?;
            let mut vars = path.clone().into_os_string();
            vars.push(".vars");
            write_file(Path::new(&vars), |w| encoding.write_varmap(&task, w))?;
        }
        let ps = PlanSpace::build(Arc::new(task), bound, &self.compile_options())?;
        if let Some(path) = &self.emit_nnf {
            write_file(path, |w| ps.ddnnf().write_nnf(w))?;
        }
        Ok(ps)
    }
}

fn load(args: &TaskArgs) -> CliResult<(PlanningTask, LengthBound)> {
    let text = std::fs::read_to_string(&args.task)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.task.display())))?;
    let task = PlanningTask::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", args.task.display())))?;
    let length = match (args.length, args.factor, args.base) {
        (Some(n), _, _) => n,
        (None, Some(c), Some(base)) => scaled_bound(c, base)?,
        _ => return Err(CliError::Usage("give either --length or --factor with --base".into())),
    };
    let bound = LengthBound::new(&task, length).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((task, bound))
}

/// `⌊c · base⌋`, tolerating the representation error of decimal factors
/// such as 1.1.
fn scaled_bound(c: f64, base: usize) -> CliResult<usize> {
    if !c.is_finite() || c < 0.0 {
        return Err(CliError::Usage(format!(
            "factor must be a non-negative number, got {c}"
        )));
    }
    Ok((c * base as f64 + 1e-9).floor() as usize)
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> CliResult {
    let file = File::create(path).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    Ok(w.flush()?)
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Count(args) => {
            let ps = cli.space(args)?;
            cli.emit(&Count::new(&ps))
        }
        Command::Exists(args) => {
            let ps = cli.space(args)?;
            cli.emit(&Exists {
                length: ps.bound().get(),
                exists: ps.root().exists(),
            })
        }
        Command::Topk { k, task } => {
            let ps = cli.space(task)?;
            cli.emit(&TopK {
                length: ps.bound().get(),
                k: k.clone(),
                holds: ps.root().top_k_exists(k),
                count: ps.count().clone(),
            })
        }
        Command::Brave(args) => {
            let ps = cli.space(args)?;
            let ops = ps.root().brave()?;
            cli.emit(&OpSet::brave(&ps, ops))
        }
        Command::Cautious(args) => {
            let ps = cli.space(args)?;
            let ops = ps.root().cautious()?;
            cli.emit(&OpSet::cautious(&ps, ops))
        }
        Command::Facets(args) => {
            let ps = cli.space(args)?;
            let ops = ps.root().facets()?;
            cli.emit(&FacetList::new(&ps, ops))
        }
        Command::Significance(args) => {
            let ps = cli.space(args)?;
            let table = ps.root().significance_table()?;
            cli.emit(&SignificanceReport::new(&ps, table))
        }
        Command::Prob { query, task } => {
            let ps = cli.space(task)?;
            let q = Query::parse(query, ps.task()).map_err(|e| CliError::Usage(e.to_string()))?;
            let p = ps.root().probability(&q)?;
            cli.emit(&ProbabilityReport(p))
        }
        Command::Enum { limit, task } => {
            let ps = cli.space(task)?;
            let (plans, truncated) = ps.root().enumerate_plans(*limit)?;
            cli.emit(&Enumerated::new(&ps, &plans, truncated))
        }
        Command::Sample { n, seed, task } => {
            let ps = cli.space(task)?;
            let plans = ps.root().sample_plans(*n, *seed)?;
            cli.emit(&Sampled::new(&ps, &plans, *seed))
        }
        Command::Oracle(args) => {
            let (task, bound) = load(args)?;
            let stats = oracle_stats(&task, bound);
            cli.emit(&OracleReport::new(&task, bound, stats))
        }
        Command::ValidateDdnnf(args) => {
            let ps = cli.space(args)?;
            let report = Validation::new(&ps);
            cli.emit(&report)?;
            if report.valid {
                Ok(())
            } else {
                Err(CliError::Usage(format!(
                    "the compiled form has {} violations",
                    report.violations.len()
                )))
            }
        }
        Command::Navigate { sample_k, seed, task } => {
            let ps = Arc::new(cli.space(task)?);
            navigate::run(ps, *sample_k, *seed, cli.format)
        }
        Command::Serve {
            port,
            host,
            allow_origin,
        } => serve(cli, host, *port, allow_origin.clone()),
    }
}

fn serve(cli: &Cli, host: &str, port: u16, allowed_origin: Option<String>) -> CliResult {
    tracing_subscriber::fmt().with_writer(io::stderr).init();
    let config = planspace_service::ServiceConfig {
        compile: cli.compile_options(),
        allowed_origin,
        ..planspace_service::ServiceConfig::default()
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {host}:{port}: {e}")))?;
        println!("listening on http://{}", listener.local_addr()?);
        Ok(planspace_service::serve(listener, config).await?)
    })
}
