use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use curio::diffusion::{
    fit, hazard, installed_fraction, sales_rate, sample_arrivals, AdoptionSeries, BassParams,
    DiffusionError,
};
use curio::distance::{bc_discrete, bc_gaussian, Divergence};
use curio::distributions::{CategoricalDist, GaussianDist};
use curio::projection::{find_valid_map, verify, DEFAULT_MAX_RETRIES};
use curio::sim::{self, SimConfig, SimError};

/// Exit status 1 for bad input, 2 for failures while running.
enum Failure {
    Validation(String),
    Runtime(String),
}

type CliResult = Result<(), Failure>;

fn bad(e: impl std::fmt::Display) -> Failure {
    Failure::Validation(e.to_string())
}

fn failed(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "curio",
    version,
    about = "Curiosity-driven learning loop toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bass diffusion analytics
    #[command(subcommand)]
    Bass(BassCmd),
    /// Bhattacharyya coefficient and distance
    #[command(subcommand)]
    Dist(DistCmd),
    /// Random projection of a point set
    Project(ProjectArgs),
    /// Scenario simulation
    #[command(subcommand)]
    Sim(SimCmd),
}

#[derive(Args)]
struct BassArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    m: f64,
}

impl BassArgs {
    fn params(&self) -> Result<BassParams, Failure> {
        BassParams::new(self.p, self.q, self.m).map_err(bad)
    }
}

#[derive(Subcommand)]
enum BassCmd {
    /// Installed fraction, sales rate and hazard at time t
    Eval {
        #[command(flatten)]
        params: BassArgs,
        #[arg(long)]
        t: f64,
    },
    /// Stochastic arrival series
    Sample {
        #[command(flatten)]
        params: BassArgs,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        horizon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Least-squares fit of an arrival series
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
        /// Step width of the series
        #[arg(long, default_value_t = 1.0)]
        dt: f64,
    },
}

#[derive(Subcommand)]
enum DistCmd {
    /// Two categorical distributions given as comma-separated probabilities
    Discrete {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        q: Vec<f64>,
    },
    /// Two univariate normals
    Gaussian {
        #[arg(long, allow_hyphen_values = true)]
        mu1: f64,
        #[arg(long)]
        sigma1: f64,
        #[arg(long, allow_hyphen_values = true)]
        mu2: f64,
        #[arg(long)]
        sigma2: f64,
    },
}

#[derive(Args)]
struct ProjectArgs {
    /// Headerless CSV, one point per row
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_RETRIES)]
    max_retries: usize,
}

#[derive(Subcommand)]
enum SimCmd {
    /// Run a scenario
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory in the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a metrics table
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Nine significant digits.
fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..9).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        format!("{x:.8e}")
    }
}

fn print_divergence(d: Divergence) {
    println!("rho {}", sig9(d.rho()));
    println!("distance {}", sig9(d.distance()));
}

fn bass(cmd: BassCmd) -> CliResult {
    match cmd {
        BassCmd::Eval { params, t } => {
            let bp = params.params()?;
            let f = installed_fraction(&bp, t).map_err(bad)?;
            println!("installed_fraction {}", sig9(f));
            println!("sales_rate {}", sig9(sales_rate(&bp, t).map_err(bad)?));
            println!("hazard {}", sig9(hazard(&bp, f).map_err(bad)?));
            println!("peak_time {}", sig9(bp.peak_time()));
        }
        BassCmd::Sample {
            params,
            dt,
            horizon,
            seed,
            out,
        } => {
            let bp = params.params()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let series = sample_arrivals(&bp, dt, horizon, &mut rng).map_err(bad)?;
            for w in &series.warnings {
                eprintln!("warning: {w}");
            }
            match out {
                Some(path) => series
                    .write_csv(File::create(path).map_err(failed)?)
                    .map_err(failed)?,
                None => series.write_csv(io::stdout().lock()).map_err(failed)?,
            }
        }
        BassCmd::Fit { input, dt } => {
            let file = File::open(&input).map_err(|e| bad(format!("{}: {e}", input.display())))?;
            let series = AdoptionSeries::read_csv(file, dt).map_err(bad)?;
            match fit(&series, None) {
                Ok(f) => {
                    println!("p {}", sig9(f.params.p()));
                    println!("q {}", sig9(f.params.q()));
                    println!("m {}", sig9(f.params.m()));
                    println!("rss {}", sig9(f.rss));
                    println!("rmse {}", sig9(f.rmse));
                    println!("iterations {}", f.iterations);
                }
                Err(e @ DiffusionError::NotConverged { .. }) => return Err(failed(e)),
                Err(e) => return Err(bad(e)),
            }
        }
    }
    Ok(())
}

fn dist(cmd: DistCmd) -> CliResult {
    let d = match cmd {
        DistCmd::Discrete { p, q } => {
            let p = CategoricalDist::new(p).map_err(bad)?;
            let q = CategoricalDist::new(q).map_err(bad)?;
            bc_discrete(&p, &q).map_err(bad)?
        }
        DistCmd::Gaussian {
            mu1,
            sigma1,
            mu2,
            sigma2,
        } => {
            let a = GaussianDist::new(mu1, sigma1).map_err(bad)?;
            let b = GaussianDist::new(mu2, sigma2).map_err(bad)?;
            bc_gaussian(&a, &b).map_err(bad)?
        }
    };
    print_divergence(d);
    Ok(())
}

fn read_points(path: &Path) -> Result<DMatrix<f64>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(bad)?;
        let row = record
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(bad(format!("row {}: non-finite value", i + 1)));
        }
        rows.push(row);
    }
    let d = rows.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(bad("no points"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), d, &flat))
}

fn project(args: ProjectArgs) -> CliResult {
    let points = read_points(&args.input)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let (map, draws) =
        find_valid_map(&points, args.epsilon, args.max_retries, &mut rng).map_err(|e| match e {
            curio::projection::ProjectionError::RetriesExhausted { .. } => failed(e),
            other => bad(other),
        })?;
    let projected = map.apply_rows(&points).map_err(failed)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&args.out)
        .map_err(failed)?;
    for row in projected.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))
            .map_err(failed)?;
    }
    w.flush().map_err(failed)?;

    if let Some(path) = args.report {
        let check = verify(&map, &points).map_err(failed)?;
        let doc = serde_json::json!({
            "n": points.nrows(),
            "d": map.source_dim(),
            "k": map.target_dim(),
            "epsilon": map.epsilon(),
            "seed": args.seed,
            "draws": draws,
            "identity": map.is_identity(),
            "verify": check,
        });
        let text = serde_json::to_string_pretty(&doc).expect("report serializes");
        fs::write(path, text + "\n").map_err(failed)?;
    }
    Ok(())
}

fn sim_error(e: SimError) -> Failure {
    if e.is_validation() {
        bad(e)
    } else {
        failed(e)
    }
}

fn simulate(cmd: SimCmd) -> CliResult {
    match cmd {
        SimCmd::Run { config, seed, out } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| bad(format!("{}: {e}", config.display())))?;
            let mut cfg = SimConfig::from_toml(&text).map_err(bad)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let dir = cfg.output_dir.clone();
            let result = sim::run_to_dir(&cfg, &dir).map_err(sim_error)?;
            let mut stdout = io::stdout().lock();
            for agent in &result.agents {
                writeln!(
                    stdout,
                    "{}: adopted {} store {} confidence {}",
                    agent.name(),
                    agent.adopted_items(),
                    agent.store().len(),
                    sig9(agent.confidence())
                )
                .map_err(failed)?;
            }
        }
        SimCmd::Report { input, out } => {
            if !input.exists() {
                return Err(bad(format!("{}: no such file", input.display())));
            }
            sim::report(&input, &out).map_err(sim_error)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Bass(c) => bass(c),
        Command::Dist(c) => dist(c),
        Command::Project(a) => project(a),
        Command::Sim(c) => simulate(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
