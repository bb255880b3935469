use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use gw_core::estimators::{AgnosticVariant, HeydeVariant};
use gw_core::gibbs::{Imputation, DEFAULT_BURN_IN, DEFAULT_ITERATIONS, DEFAULT_K_TRUNC, DEFAULT_MAX_TRIES};
use gw_core::harness::{
    default_case_estimators, early_detection_report, load_case_series, run_scenario, scenario_by_name,
    scenario_catalog, EstimatorConfig, ExtinctionFamily, KChoice, DEFAULT_DATE_FORMAT,
};
use gw_core::process::{read_observations_csv, simulate_complete, write_counts_csv, write_series_csv, Observations};
use gw_core::{extinction_probability, GwError, OffspringDistribution, Result, SeedSpec};

#[derive(Parser)]
#[command(name = "gw", version, about = "Inference for Galton-Watson branching processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a process and write its data as CSV.
    Simulate(SimulateArgs),
    /// Extinction probability of an offspring law.
    Extinction {
        #[arg(long)]
        offspring: OffspringDistribution,
        #[arg(long, default_value_t = gw_core::extinction::DEFAULT_TOL)]
        tol: f64,
    },
    /// Estimate the offspring mean from a data file.
    Estimate(EstimateArgs),
    /// Run Monte Carlo benchmark scenarios.
    Bench(BenchArgs),
    /// Early-detection report for one epidemic wave.
    Covid(CovidArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    offspring: OffspringDistribution,
    #[arg(long, default_value_t = 1)]
    z0: u64,
    #[arg(long, default_value_t = 10)]
    generations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, conflicts_with = "incomplete")]
    complete: bool,
    /// Write generation totals only.
    #[arg(long)]
    incomplete: bool,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Mle,
    Heyde,
    Dirichlet,
    Dp,
    GibbsDir,
    GibbsDp,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Support bound for the Dirichlet prior, or `auto` for the sample maximum.
    #[arg(long, default_value = "auto")]
    k: String,
    #[arg(long, default_value = "A")]
    variant: AgnosticVariant,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value = "poisson:agnostic")]
    base: OffspringDistribution,
    /// Also estimate the offspring support size (dp only).
    #[arg(long)]
    support_size: bool,
    #[arg(long, default_value = "printed")]
    heyde_variant: HeydeVariant,
    /// Shorthand for `--heyde-variant cumulative`.
    #[arg(long)]
    heyde_cumulative: bool,
    #[arg(long, default_value_t = DEFAULT_K_TRUNC)]
    k_trunc: usize,
    #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
    iters: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burnin: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_TRIES)]
    max_tries: u64,
    /// Gibbs row imputation: accept-reject or exact.
    #[arg(long, default_value = "accept-reject")]
    imputation: Imputation,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario name or `all`.
    #[arg(long, default_value = "all")]
    scenario: String,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// JSON output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// List scenario names and exit.
    #[arg(long)]
    list: bool,
    /// Override Gibbs iterations for incomplete-data scenarios.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    /// Gibbs row imputation: accept-reject or exact.
    #[arg(long, default_value = "accept-reject")]
    imputation: Imputation,
}

#[derive(Args)]
struct CovidArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    wave_start: NaiveDate,
    #[arg(long, default_value_t = 10)]
    wave_days: usize,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10")]
    days: Vec<usize>,
    #[arg(long, default_value = "geometric")]
    offspring_family: ExtinctionFamily,
    #[arg(long, default_value = DEFAULT_DATE_FORMAT)]
    date_format: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gibbs row imputation: accept-reject or exact.
    #[arg(long, default_value = "accept-reject")]
    imputation: Imputation,
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
    Json,
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| GwError::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let counts = simulate_complete(&args.offspring, args.z0, args.generations, SeedSpec::new(args.seed, 0))?;
    let out = output(&args.out)?;
    if args.incomplete {
        write_series_csv(&counts.collapse()?, out)
    } else {
        write_counts_csv(&counts, out)
    }
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let file = File::open(&args.input).map_err(|e| GwError::Io(format!("{}: {e}", args.input.display())))?;
    let obs = read_observations_csv(file)?;
    let series = obs.series()?;
    let counts = match &obs {
        Observations::Complete(c) => Some(c),
        Observations::Incomplete(_) => None,
    };
    let k = match args.k.as_str() {
        "auto" => KChoice::SampleMax,
        s => KChoice::Known(
            s.parse().map_err(|_| GwError::InvalidParameter(format!("--k expects an integer or auto, got {s:?}")))?,
        ),
    };
    let heyde = if args.heyde_cumulative { HeydeVariant::Cumulative } else { args.heyde_variant };
    let config = match args.method {
        Method::Mle => EstimatorConfig::Mle,
        Method::Heyde => EstimatorConfig::Improper { variant: heyde },
        Method::Dirichlet => EstimatorConfig::Dirichlet { k, variant: args.variant },
        Method::Dp => EstimatorConfig::Dp {
            a: args.a,
            base: args.base,
            support_draws: args.support_size.then_some(gw_core::dp::DEFAULT_SUPPORT_DRAWS),
        },
        Method::GibbsDir => EstimatorConfig::GibbsDirichlet {
            k_trunc: args.k_trunc,
            variant: args.variant,
            iterations: args.iters,
            burn_in: args.burnin,
            max_tries: args.max_tries,
            imputation: args.imputation,
        },
        Method::GibbsDp => EstimatorConfig::GibbsDp {
            a: args.a,
            base: args.base,
            k_trunc: args.k_trunc,
            iterations: args.iters,
            burn_in: args.burnin,
            max_tries: args.max_tries,
            imputation: args.imputation,
        },
    };
    if config.needs_complete_data() && counts.is_none() {
        return Err(GwError::InvalidParameter(format!(
            "{} needs complete data (header generation,j0,...); use gibbs-dir or gibbs-dp for totals",
            config.name()
        )));
    }
    let out = config.estimate(&series, counts, SeedSpec::new(args.seed, 0))?;
    let s = out.summary;
    let mut stdout = io::stdout().lock();
    if args.json {
        let value = json!({
            "estimator": config.name(),
            "params": config.params_json(),
            "m_hat": s.m_hat,
            "m_var": if s.m_var.is_finite() { Some(s.m_var) } else { None },
            "p_supercritical": s.p_supercritical,
            "classification": s.classification,
            "support_size": out.support_size,
        });
        writeln!(stdout, "{}", serde_json::to_string_pretty(&value).expect("json"))?;
    } else {
        writeln!(stdout, "estimator       {}", config.name())?;
        writeln!(stdout, "m_hat           {:.6}", s.m_hat)?;
        if s.m_var.is_finite() && s.m_var > 0.0 {
            writeln!(stdout, "m_var           {:.6}", s.m_var)?;
        }
        if let Some(p) = s.p_supercritical {
            writeln!(stdout, "P(m>1)          {p:.6}")?;
        }
        writeln!(stdout, "classification  {:?}", s.classification)?;
        if let Some(k) = out.support_size {
            writeln!(stdout, "support_size    {k}")?;
        }
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    if args.list {
        for sc in scenario_catalog() {
            println!("{}", sc.name);
        }
        return Ok(());
    }
    let mut scenarios =
        if args.scenario == "all" { scenario_catalog() } else { vec![scenario_by_name(&args.scenario)?] };
    let mut results = Vec::new();
    for sc in scenarios.iter_mut() {
        if let Some(r) = args.reps {
            sc.replications = r;
        }
        for e in sc.estimators.iter_mut() {
            if let EstimatorConfig::GibbsDirichlet { iterations, burn_in, .. }
            | EstimatorConfig::GibbsDp { iterations, burn_in, .. } = e
            {
                *iterations = args.iters.unwrap_or(*iterations);
                *burn_in = args.burnin.unwrap_or(*burn_in);
            }
            *e = e.clone().with_imputation(args.imputation);
        }
        let res = run_scenario(sc, args.seed)?;
        eprintln!("{}", res.scenario);
        for e in &res.estimators {
            let support = e.support_correct.map_or(String::new(), |s| format!("  support {s:.3}"));
            eprintln!(
                "  {:<20} {:.3} ({:.3}){support}  failures {}",
                e.name, e.proportion_correct, e.se_mhat, e.failures
            );
        }
        results.push(res);
    }
    let mut out = output(&args.out)?;
    let text = if results.len() == 1 {
        serde_json::to_string_pretty(&results[0])
    } else {
        serde_json::to_string_pretty(&results)
    }
    .expect("json");
    writeln!(out, "{text}")?;
    Ok(())
}

fn covid(args: CovidArgs) -> Result<()> {
    let cs = load_case_series(&args.input, &args.date_format, &[args.wave_start], &[args.wave_days])?;
    let estimators: Vec<EstimatorConfig> =
        default_case_estimators().into_iter().map(|e| e.with_imputation(args.imputation)).collect();
    let report = early_detection_report(&cs, 0, &args.days, &estimators, args.offspring_family, args.seed)?;
    let mut out = output(&args.out)?;
    match args.format {
        ReportFormat::Text => write!(out, "{}", report.to_text())?,
        ReportFormat::Csv => report.write_csv(&mut out)?,
        ReportFormat::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("json"))?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Extinction { offspring, tol } => {
            let res = extinction_probability(&offspring, tol)?;
            println!("q         {:.12}", res.q);
            println!("residual  {:.3e}", res.residual);
            println!("method    {:?}", res.method);
            Ok(())
        }
        Command::Estimate(args) => estimate(args),
        Command::Bench(args) => bench(args),
        Command::Covid(args) => covid(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gw: {e}");
            ExitCode::FAILURE
        }
    }
}
