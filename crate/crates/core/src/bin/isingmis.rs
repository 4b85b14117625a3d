use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use isingmis::diag::check_assumptions;
use isingmis::em::{em_update, select_candidates, EmOptions};
use isingmis::graph::{GraphSpec, NodeSet};
use isingmis::ising::{apply_misclassification, sample_ising, GibbsOptions, MisclassLaw, RngSeed, SampleMethod, SpinMatrix};
use isingmis::logreg::SolverOptions;
use isingmis::rwl::{rwl_path, Aggregation, RowWeights, RwlFit};
use isingmis::sim::{emit_outputs, run_scenario, OutputFormat, ScenarioConfig};
use isingmis::{Error, Result};

#[derive(Parser)]
#[command(name = "isingmis", version, about = "Ising structure learning with misclassified node states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Neighborhood selection at one λ or along a grid.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        /// Comma-separated grid; the output is then a JSON array of fits.
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
        #[arg(long, default_value = "and")]
        aggregation: Aggregation,
        /// Row weights as JSON.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// EM refinement of an initial fit.
    Em {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        init_fit: PathBuf,
        #[arg(long)]
        law: PathBuf,
        /// `0,3,7` or `auto:q` for every node whose mean flip rate exceeds q.
        #[arg(long)]
        candidates: String,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1)]
        iters: usize,
        #[arg(long)]
        audit_likelihood: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Misclassified score, information and assumption checks at the truth.
    Diagnose {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        law: PathBuf,
        #[arg(long)]
        n: usize,
        /// Defaults to the true graph's maximum degree.
        #[arg(long)]
        max_degree: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs a simulation scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, env = "ISINGMIS_THREADS")]
        threads: Option<usize>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Draws Ising samples to CSV.
    Sample {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
        #[arg(long, default_value_t = GibbsOptions::default().burn_in)]
        burn_in: usize,
        #[arg(long, default_value_t = GibbsOptions::default().thin)]
        thin: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Flips spins of a CSV according to a misclassification law.
    Perturb {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        law: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Gibbs,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(w.flush()?)
}

fn read_spins(path: &Path) -> Result<(SpinMatrix, Vec<String>)> {
    SpinMatrix::read_csv(BufReader::new(File::open(path)?))
}

fn parse_candidates(spec: &str, law: &MisclassLaw) -> Result<NodeSet> {
    if let Some(q) = spec.strip_prefix("auto:") {
        let q: f64 = q.parse().map_err(|_| Error::InvalidArgument(format!("bad threshold in {spec:?}")))?;
        return Ok(select_candidates(law, q));
    }
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad node id {s:?}"))))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { data, lambda, lambda_grid, aggregation, weights, out } => {
            let (x, _) = read_spins(&data)?;
            let weights: Option<RowWeights> = weights.as_deref().map(read_json).transpose()?;
            let opts = SolverOptions::default();
            match (lambda, lambda_grid) {
                (_, Some(mut grid)) => {
                    grid.sort_by(|a, b| b.total_cmp(a));
                    let fits = rwl_path(&x, &grid, aggregation, weights.as_ref(), &opts)?;
                    write_json(&out, &fits)
                }
                (Some(l), None) => {
                    let fit = rwl_path(&x, &[l], aggregation, weights.as_ref(), &opts)?.remove(0);
                    write_json(&out, &fit)
                }
                (None, None) => Err(Error::InvalidArgument("pass --lambda or --lambda-grid".into())),
            }
        }
        Command::Em { data, init_fit, law, candidates, lambda, iters, audit_likelihood, out } => {
            let (x, _) = read_spins(&data)?;
            let initial: RwlFit = read_json(&init_fit)?;
            let law: MisclassLaw = read_json(&law)?;
            let candidates = parse_candidates(&candidates, &law)?;
            let opts = EmOptions { audit: audit_likelihood, ..EmOptions::default() };
            let outcome = em_update(&initial, &x, &law, &candidates, lambda, iters, &opts)?;
            write_json(&out, &outcome)
        }
        Command::Diagnose { graph, law, n, max_degree, out } => {
            let graph: GraphSpec = read_json(&graph)?;
            let law: MisclassLaw = read_json(&law)?;
            write_json(&out, &check_assumptions(&graph, &law, n, max_degree)?)
        }
        Command::Simulate { config, out_dir, threads, format } => {
            let config: ScenarioConfig = read_json(&config)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let run = pool.install(|| run_scenario(&config))?;
            for f in &run.failures {
                eprintln!("replication {} (seed {}) failed: {}", f.replication, f.seed.0, f.message);
            }
            for path in emit_outputs(&run, format, &out_dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Sample { graph, n, seed, method, burn_in, thin, out } => {
            let graph: GraphSpec = read_json(&graph)?;
            let method = match method {
                Method::Exact => SampleMethod::Exact,
                Method::Gibbs => SampleMethod::Gibbs(GibbsOptions { burn_in, thin }),
            };
            let x = sample_ising(&graph, n, method, RngSeed(seed))?;
            x.write_csv(BufWriter::new(File::create(&out)?), &SpinMatrix::default_names(x.p()))
        }
        Command::Perturb { data, law, seed, out } => {
            let (x, names) = read_spins(&data)?;
            let law: MisclassLaw = read_json(&law)?;
            let y = apply_misclassification(&x, &law, RngSeed(seed))?;
            y.write_csv(BufWriter::new(File::create(&out)?), &names)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
