//! `hfdp`: fit, score, simulate, calibrate and summarize fair clusterings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hfdp::calibrate::{prior_balance_distribution, sym_kl_lifted_vs_bb};
use hfdp::io::report::{
    level_entries, read_trace, summarize_assignment, summarize_mcem, summarize_trace, write_trace, ConfigEcho,
    ReportedFairness, ResultDocument, RunInfo, TraceSummaryDocument,
};
use hfdp::io::{generate, load_csv, read_assignment, write_assignment, write_dataset, Design, GeneratorSpec};
use hfdp::metrics::{fairness_report, DEFAULT_CLUSTER_CAP};
use hfdp::sampler::{default_niw_priors, run_gibbs_with, run_mcem, AttributeBeliefs, GibbsOptions};
use hfdp::{ChainControls, Dataset, HfdpConfig, HfdpError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "hfdp", version, about = "Fair clustering with a hierarchical finite Dirichlet process")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sampler or the mode finder and write the result document.
    Fit(FitArgs),
    /// Report balance, divergence and fair-score of an assignment file.
    Score(ScoreArgs),
    /// Prior-predictive balance quantiles and the beta-binomial comparison.
    Calibrate(CalibrateArgs),
    /// Write a synthetic dataset and its true clustering.
    Simulate(SimulateArgs),
    /// Re-summarize a stored trace.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "design", required_unless_present = "design")]
    input: Option<PathBuf>,
    /// Comma-separated feature columns; defaults to every non-attribute column.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    /// Name of the protected-attribute column.
    #[arg(long, default_value = "attribute")]
    attribute: String,
    /// Generate the data from a synthetic design (A1, A2, A3, B, imperfect).
    #[arg(long)]
    design: Option<String>,
    /// Seed of the data generator; defaults to --seed.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Label accuracy: swap probability of the generator and belief of the sampler.
    #[arg(long)]
    p_acc: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Gibbs,
    Mcem,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Defaults to half of --iters.
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// Upper bound on the number of clusters.
    #[arg(long = "K", default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    g: f64,
    #[arg(long, default_value_t = 1e-7)]
    b: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "gibbs")]
    mode: Mode,
    /// Loop-walk steps per attribute and sweep; defaults to 50 N_a.
    #[arg(long)]
    wrla_steps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Assignment file with columns row,cluster.
    #[arg(long)]
    assignment: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_delimiter = ',', default_value = "10")]
    g: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
    b: Vec<f64>,
    #[arg(long = "K", value_delimiter = ',', default_value = "2")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    levels: usize,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, value_delimiter = ',', default_value = "20,50,100,200")]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5,10")]
    gamma: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    design: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    p_acc: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SummarizeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace written by `fit --mode gibbs`.
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long)]
    out: PathBuf,
}

struct Loaded {
    dataset: Dataset,
    level_names: Vec<String>,
    source: String,
}

fn load(data: &DataArgs, seed: u64) -> hfdp::Result<Loaded> {
    if let Some(path) = &data.input {
        let l = load_csv(path, &data.features, &data.attribute)?;
        return Ok(Loaded { dataset: l.dataset, level_names: l.level_names, source: path.display().to_string() });
    }
    let design: Design = data.design.as_deref().unwrap_or_default().parse()?;
    let mut spec = GeneratorSpec::new(design);
    if let Some(p) = data.p_acc {
        spec = spec.with_p_acc(p);
    }
    let data_seed = data.data_seed.unwrap_or(seed);
    let g = generate(&spec, &mut ChaCha8Rng::seed_from_u64(data_seed))?;
    let level_names = (0..g.dataset.levels()).map(|a| a.to_string()).collect();
    Ok(Loaded { dataset: g.dataset, level_names, source: format!("design {design:?} seed {data_seed}") })
}

fn create_dir(path: &Path) -> hfdp::Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn fit(args: &FitArgs) -> hfdp::Result<()> {
    let loaded = load(&args.data, args.seed)?;
    let ds = &loaded.dataset;
    let chain = ChainControls {
        iterations: args.iters,
        burn_in: args.burnin.unwrap_or(args.iters / 2),
        thin: args.thin,
        seed: args.seed,
        wrla_steps: args.wrla_steps,
        ..ChainControls::default()
    };
    let config =
        HfdpConfig { k: args.k, g: args.g, b: args.b, epsilon: args.epsilon, niw: default_niw_priors(ds)?, chain };
    config.validate()?;
    create_dir(&args.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let run = RunInfo {
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: match args.mode {
            Mode::Gibbs => "gibbs",
            Mode::Mcem => "mcem",
        }
        .to_string(),
        seed: args.seed,
        source: loaded.source.clone(),
    };
    let (assignment, summary, posterior, mcem) = match args.mode {
        Mode::Gibbs => {
            let beliefs = args.data.p_acc.map(|p| AttributeBeliefs::from_accuracy(ds.labels(), ds.levels(), p)).transpose()?;
            let options = GibbsOptions { beliefs, ..GibbsOptions::default() };
            let trace = run_gibbs_with(ds, &config, &options, &mut rng)?;
            write_trace(&args.out.join("trace.json"), &trace)?;
            let (posterior, summary, assignment) = summarize_trace(&trace, ds, args.epsilon)?;
            (assignment, summary, Some(posterior), None)
        }
        Mode::Mcem => {
            let result = run_mcem(ds, &config, &mut rng)?;
            let summary = summarize_assignment("mcem", None, &result.assignment, config.k, ds, args.epsilon)?;
            (result.assignment.clone(), summary, None, Some(summarize_mcem(&result)))
        }
    };
    write_assignment(&args.out.join("assignment.csv"), &assignment)?;
    let doc = ResultDocument {
        run,
        config: ConfigEcho::new(&config, args.data.p_acc),
        levels: level_entries(ds, &loaded.level_names),
        assignment: summary,
        posterior,
        mcem,
    };
    doc.write(&args.out.join("result.toml"))?;
    let modal = doc.posterior.as_ref().map_or(doc.assignment.effective_clusters, |p| p.modal_cluster_count);
    println!(
        "clusters {modal} balance {:.4} mi {:.4} fair_score {}",
        doc.assignment.fairness.balance, doc.assignment.fairness.mi, doc.assignment.fairness.fair_score
    );
    Ok(())
}

fn score(args: &ScoreArgs) -> hfdp::Result<()> {
    let loaded = load(&args.data, args.seed)?;
    let z = read_assignment(&args.assignment)?;
    let report: ReportedFairness = fairness_report(&z, &loaded.dataset, args.epsilon, DEFAULT_CLUSTER_CAP)?.into();
    let s = report.to_toml()?;
    match &args.out {
        Some(p) => std::fs::write(p, s)?,
        None => print!("{s}"),
    }
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> hfdp::Result<()> {
    create_dir(&args.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut prior = String::from("g,b,K,levels,draws,balance_q05,balance_q25,balance_q50,balance_q75,balance_q95,kl_q05,kl_q25,kl_q50,kl_q75,kl_q95\n");
    for &g in &args.g {
        for &b in &args.b {
            for &k in &args.k {
                let row = prior_balance_distribution(g, b, k, args.levels, args.draws, &mut rng)?;
                write!(prior, "{g},{b},{k},{},{}", args.levels, args.draws).unwrap();
                for q in row.balance.iter().chain(&row.kl) {
                    write!(prior, ",{q:e}").unwrap();
                }
                prior.push('\n');
            }
        }
    }
    std::fs::write(args.out.join("prior_balance.csv"), prior)?;
    let mut kl = String::from("n,gamma1,gamma2,sym_kl\n");
    for &g1 in &args.gamma {
        for &g2 in &args.gamma {
            for &n in &args.n {
                writeln!(kl, "{n},{g1},{g2},{:e}", sym_kl_lifted_vs_bb(n, g1, g2)?).unwrap();
            }
        }
    }
    std::fs::write(args.out.join("sym_kl.csv"), kl)?;
    Ok(())
}

fn simulate(args: &SimulateArgs) -> hfdp::Result<()> {
    let design: Design = args.design.parse()?;
    let mut spec = GeneratorSpec::new(design);
    if let Some(p) = args.p_acc {
        spec = spec.with_p_acc(p);
    }
    let g = generate(&spec, &mut ChaCha8Rng::seed_from_u64(args.seed))?;
    create_dir(&args.out)?;
    let features: Vec<String> = (1..=g.dataset.dim()).map(|j| format!("x{j}")).collect();
    let levels: Vec<String> = (0..g.dataset.levels()).map(|a| a.to_string()).collect();
    write_dataset(&args.out.join("data.csv"), &g.dataset, &features, "attribute", &levels)?;
    write_assignment(&args.out.join("truth.csv"), &g.truth)?;
    if g.true_attributes != g.dataset.labels() {
        write_assignment(&args.out.join("true_attributes.csv"), &g.true_attributes)?;
    }
    Ok(())
}

fn summarize(args: &SummarizeArgs) -> hfdp::Result<()> {
    let loaded = load(&args.data, args.seed)?;
    let trace = read_trace(&args.trace)?;
    let (posterior, assignment, z) = summarize_trace(&trace, &loaded.dataset, args.epsilon)?;
    create_dir(&args.out)?;
    write_assignment(&args.out.join("assignment.csv"), &z)?;
    let doc = TraceSummaryDocument {
        trace: args.trace.display().to_string(),
        levels: level_entries(&loaded.dataset, &loaded.level_names),
        assignment,
        posterior,
    };
    doc.write(&args.out.join("summary.toml"))
}

fn exit_code(e: &HfdpError) -> u8 {
    match e {
        HfdpError::InvalidInput(_) => EXIT_USAGE,
        HfdpError::Data { .. } | HfdpError::Io(_) | HfdpError::Capacity(_) => EXIT_DATA,
        HfdpError::NumericalDegeneracy(_) | HfdpError::Internal(_) => EXIT_NUMERICAL,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => fit(a),
        Command::Score(a) => score(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Simulate(a) => simulate(a),
        Command::Summarize(a) => summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
