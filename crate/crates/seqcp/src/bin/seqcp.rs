//! Command-line front end: critical-value simulation, scenario grids and
//! CSV analysis.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

use seqcp::critvals::{self, LimitFunctionalSpec};
use seqcp::error::Error;
use seqcp::pipeline::{self, AnalyzeConfig};
use seqcp::sim;
use seqcp::weights::Normalization;
use seqcp::{KernelKind, Scheme};

#[derive(Parser)]
#[command(
    name = "seqcp",
    version,
    about = "Streaming sequential change point detection based on two-sample U-statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate critical values for one limit functional
    Critvals(CritvalsArgs),
    /// Run a grid of size / power / delay experiments
    Simulate(SimulateArgs),
    /// Monitor a CSV time series with every (kernel, scheme) pair
    Analyze(AnalyzeArgs),
    /// Inspect or clear the critical-value cache
    Cache(CacheArgs),
}

#[derive(Args)]
struct CritvalsArgs {
    /// Monitoring scheme: cusum, mmosum or page
    #[arg(long)]
    scheme: String,
    /// Weight exponent in [0, 0.5)
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// mMOSUM discard fraction in (0, 1)
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    /// Normalization: homo or hetero
    #[arg(long, default_value = "homo")]
    norm: String,
    /// Grid points per Wiener path
    #[arg(long)]
    grid: Option<usize>,
    /// Number of simulated paths
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Use the quick desk-scale budget (grid 2000, reps 5000) unless
    /// --grid/--reps override it
    #[arg(long)]
    desk: bool,
    /// Output file (cache text format)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario grid file (key = value blocks separated by blank lines)
    #[arg(long)]
    config: PathBuf,
    /// Directory for report.tsv and per-cell delay histograms
    #[arg(long)]
    out_dir: PathBuf,
    /// Critical-value cache directory (default: SEQCP_CACHE_DIR or .seqcp-cache)
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV with a `date` column and the value column below
    #[arg(long)]
    csv: PathBuf,
    /// Header name of the value column
    #[arg(long)]
    column: String,
    /// Number of leading records treated as the change-free historic window
    #[arg(long)]
    historic: usize,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.4)]
    b: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated kernels (dom, wilcoxon, symmetric_sum)
    #[arg(long, default_value = "dom,wilcoxon")]
    kernels: String,
    /// Comma-separated schemes (cusum, mmosum, page)
    #[arg(long, default_value = "cusum,mmosum,page")]
    schemes: String,
    /// Seasonal period for deseasonalization
    #[arg(long, default_value_t = 12)]
    period: usize,
    /// Grid points for critical-value simulation on a cache miss
    #[arg(long, default_value_t = LimitFunctionalSpec::DESK_GRID)]
    grid: usize,
    /// Replications for critical-value simulation on a cache miss
    #[arg(long, default_value_t = LimitFunctionalSpec::DESK_REPS)]
    reps: usize,
    /// Seed for critical-value simulation on a cache miss
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Directory for trace files and the stopping-time summary
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CacheArgs {
    #[command(subcommand)]
    action: CacheAction,
}

#[derive(Subcommand)]
enum CacheAction {
    /// List cached critical-value tables
    Ls {
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Remove a cached table by file name, or everything with --all
    Rm {
        name: Option<String>,
        #[arg(long)]
        all: bool,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // bad flag values are usage errors; broken inputs are data errors
                Error::InvalidParameter(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> seqcp::Result<()> {
    match cli.command {
        Command::Critvals(args) => run_critvals(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Analyze(args) => run_analyze(args),
        Command::Cache(args) => run_cache(args),
    }
}

fn run_critvals(args: CritvalsArgs) -> seqcp::Result<()> {
    let (default_grid, default_reps) = if args.desk {
        (LimitFunctionalSpec::DESK_GRID, LimitFunctionalSpec::DESK_REPS)
    } else {
        (LimitFunctionalSpec::FULL_GRID, LimitFunctionalSpec::FULL_REPS)
    };
    let spec = LimitFunctionalSpec::new(
        Scheme::parse(&args.scheme)?,
        args.gamma,
        args.b,
        Normalization::parse(&args.norm)?,
        args.grid.unwrap_or(default_grid),
        args.reps.unwrap_or(default_reps),
        args.seed,
    )?;
    let table = critvals::simulate_limit(&spec)?;
    critvals::write_table(&table, &args.out)?;
    for (alpha, c) in &table.quantiles {
        println!("alpha = {alpha}: c = {c}");
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> seqcp::Result<()> {
    let cache_dir = args.cache_dir.unwrap_or_else(critvals::default_cache_dir);
    let text = fs::read_to_string(&args.config)?;
    let cells = sim::parse_scenario_grid(&text)?;
    fs::create_dir_all(&args.out_dir)?;
    let mut report = format!("{}\n{}\n", sim::REPORT_SCHEMA, sim::REPORT_COLUMNS);
    for cell in &cells {
        let result = sim::run_cell(cell, &cache_dir)?;
        report.push_str(&sim::render_report_row(&cell.name, &result));
        report.push('\n');
        let hist_path = args.out_dir.join(format!("delays_{}.tsv", cell.name));
        fs::write(&hist_path, sim::render_delay_histogram(&result))?;
        println!(
            "{}: rejection rate {:.4} (c = {:.4}{})",
            cell.name,
            result.rejection_rate,
            result.used_c_alpha,
            if result.size_corrected {
                ", size corrected"
            } else {
                ""
            }
        );
    }
    let report_path = args.out_dir.join("report.tsv");
    fs::write(&report_path, report)?;
    println!("wrote {}", report_path.display());
    Ok(())
}

fn parse_list<T>(input: &str, parse: impl Fn(&str) -> seqcp::Result<T>) -> seqcp::Result<Vec<T>> {
    input
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(parse)
        .collect()
}

fn run_analyze(args: AnalyzeArgs) -> seqcp::Result<()> {
    let cache_dir = args.cache_dir.unwrap_or_else(critvals::default_cache_dir);
    let loaded = pipeline::load_csv(&args.csv, &args.column)?;
    for (before, after) in &loaded.gaps {
        eprintln!("warning: gap between {before} and {after}");
    }
    let adjusted = pipeline::deseasonalize(&loaded.records, args.historic, args.period)?;
    let values: Vec<f64> = adjusted.iter().map(|r| r.value).collect();

    let kernels = parse_list(&args.kernels, KernelKind::parse)?;
    let schemes = parse_list(&args.schemes, Scheme::parse)?;
    if kernels.is_empty() || schemes.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one kernel and one scheme are required".into(),
        ));
    }
    let mut cfg = AnalyzeConfig::new(args.historic, cache_dir);
    cfg.kernels = kernels;
    cfg.schemes = schemes;
    cfg.gamma = args.gamma;
    cfg.b = args.b;
    cfg.alpha = args.alpha;
    cfg.cv_grid = args.grid;
    cfg.cv_reps = args.reps;
    cfg.cv_seed = args.seed;

    let output = pipeline::analyze(&values, &cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    for pair in &output.pairs {
        let path = args
            .out_dir
            .join(format!("trace_{}_{}.tsv", pair.kernel.name(), pair.scheme.name()));
        fs::write(&path, pipeline::render_trace(pair))?;
    }
    let summary = pipeline::render_stopping_summary(&output);
    let summary_path = args.out_dir.join("stopping_times.tsv");
    fs::write(&summary_path, &summary)?;
    print!("{summary}");
    println!("wrote {} files to {}", output.pairs.len() + 1, args.out_dir.display());
    Ok(())
}

fn run_cache(args: CacheArgs) -> seqcp::Result<()> {
    match args.action {
        CacheAction::Ls { cache_dir } => {
            let dir = cache_dir.unwrap_or_else(critvals::default_cache_dir);
            if !dir.exists() {
                println!("cache directory {} is empty", dir.display());
                return Ok(());
            }
            let mut names: Vec<String> = fs::read_dir(&dir)?
                .filter_map(|e| e.ok())
                .filter(|e| e.path().extension().is_some_and(|x| x == "txt"))
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .collect();
            names.sort();
            if names.is_empty() {
                println!("cache directory {} is empty", dir.display());
            }
            for name in names {
                println!("{name}");
            }
            Ok(())
        }
        CacheAction::Rm {
            name,
            all,
            cache_dir,
        } => {
            let dir = cache_dir.unwrap_or_else(critvals::default_cache_dir);
            if all {
                if dir.exists() {
                    for entry in fs::read_dir(&dir)? {
                        let path = entry?.path();
                        if path.extension().is_some_and(|x| x == "txt") {
                            fs::remove_file(&path)?;
                        }
                    }
                }
                println!("cleared {}", dir.display());
                return Ok(());
            }
            let Some(name) = name else {
                // mirror clap usage errors: missing operand is a usage problem
                let mut cmd = Cli::command();
                let _ = cmd.print_help();
                return Err(Error::InvalidParameter(
                    "cache rm requires a file name or --all".into(),
                ));
            };
            let file = if name.ends_with(".txt") {
                name
            } else {
                format!("{name}.txt")
            };
            let path = dir.join(&file);
            if !path.exists() {
                return Err(Error::InvalidParameter(format!(
                    "no cached table named '{file}' in {}",
                    dir.display()
                )));
            }
            fs::remove_file(&path)?;
            println!("removed {}", path.display());
            Ok(())
        }
    }
}
