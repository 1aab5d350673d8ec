use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qaoa_tsp::experiment::{
    self, generate_graphs, noise_sweep, run_experiment, skewness_study, uniform_graph, write_noise_sweep,
    write_skewness_study, ExperimentConfig, NOISE_LEVELS,
};
use qaoa_tsp::{
    brute_force_solve, estimate_resources, AnsatzSpec, Bitstring, Error, MixerKind, ResourceEstimate, TspGraph,
};

/// QAOA experiments on small traveling-salesman instances.
#[derive(Debug, Parser)]
#[command(name = "qaoa-tsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write random graph JSON files.
    Gen {
        #[arg(long)]
        cities: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 20)]
        max_weight: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "graphs")]
        out: PathBuf,
    },
    /// Brute-force a graph file and print its optimal tours.
    Solve {
        graph: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run an experiment configuration.
    Run { config: PathBuf },
    /// Run a noise sweep over single-qubit error rates.
    Noise {
        config: PathBuf,
        /// Comma-separated single-qubit error rates.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
    /// Relate final AR to edge-weight skewness.
    Skew {
        config: PathBuf,
        /// Also run a graph with all edge weights equal.
        #[arg(long)]
        uniform: bool,
    },
    /// Print logical gate counts per QAOA layer as CSV.
    Resources {
        #[arg(long, default_value_t = 3)]
        min_cities: usize,
        #[arg(long, default_value_t = 8)]
        max_cities: usize,
        #[arg(long)]
        json: bool,
    },
    /// Aggregate stored run reports into CSV.
    Report {
        dir: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidGraph(_) | Error::Noise(_) | Error::InvalidPenalty(_) => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::from_file(path).map_err(|e| Failure::Config(e.to_string()))
}

fn finish(errors: Vec<Error>) -> CliResult {
    if errors.is_empty() {
        return Ok(());
    }
    for e in &errors {
        eprintln!("error: {e}");
    }
    Err(Failure::Runtime(format!(
        "{} artifact(s) could not be written",
        errors.len()
    )))
}

fn write(path: &Path, contents: &str) -> CliResult {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Failure::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn gen(cities: usize, count: usize, max_weight: u32, seed: u64, out: &Path) -> CliResult {
    if count == 0 || max_weight == 0 {
        return Err(Failure::Config("count and max-weight must be >= 1".into()));
    }
    for (id, graph) in generate_graphs(cities, count, max_weight, seed)? {
        let path = out.join(format!("{id}.json"));
        let text = serde_json::to_string_pretty(&graph).expect("graphs serialize");
        write(&path, &(text + "\n"))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn solve(path: &Path, json: bool) -> CliResult {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let graph: TspGraph =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let solution = brute_force_solve(&graph)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&solution).expect("solutions serialize")
        );
        return Ok(());
    }
    println!("min cost: {}", solution.min_cost);
    for tour in &solution.optimal_tours {
        println!("{tour}  {}", Bitstring::from_tour(tour));
    }
    Ok(())
}

fn run(path: &Path) -> CliResult {
    let config = load_config(path)?;
    let (output, errors) = run_experiment(&config)?;
    for row in output.aggregate.rows.iter().filter(|r| r.step == "final") {
        println!(
            "{:>2}  AR {:.3} ({:.3})  true% {:.2} ({:.2})  rank {:.2} ({:.2})",
            row.mixer, row.ar_mean, row.ar_std, row.true_mean, row.true_std, row.rank_mean, row.rank_std
        );
    }
    println!("results in {}", config.out_dir.display());
    finish(errors)
}

fn noise(path: &Path, levels: Option<Vec<f64>>) -> CliResult {
    let config = load_config(path)?;
    let levels = levels.unwrap_or_else(|| NOISE_LEVELS.to_vec());
    let outputs = noise_sweep(&config, &levels)?;
    print!("{}", experiment::noise_sweep_csv(&outputs));
    finish(write_noise_sweep(&outputs, &config.out_dir))
}

fn skew(path: &Path, uniform: bool) -> CliResult {
    let config = load_config(path)?;
    let extra = if uniform {
        vec![(
            format!("n{}-uniform", config.cities),
            uniform_graph(config.cities, config.max_weight)?,
        )]
    } else {
        Vec::new()
    };
    let (output, rows) = skewness_study(&config, &extra)?;
    print!("{}", experiment::skew_csv(&rows));
    finish(write_skewness_study(&output, &rows, &config.out_dir))
}

fn resources(min: usize, max: usize, json: bool) -> CliResult {
    if min < 3 || max < min {
        return Err(Failure::Config(format!(
            "need 3 <= min-cities <= max-cities, got {min}..{max}"
        )));
    }
    let mut rows = Vec::new();
    for n in min..=max {
        for mixer in MixerKind::ALL {
            rows.push(estimate_resources(&AnsatzSpec::new(n, mixer, 1)?));
        }
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&rows).expect("estimates serialize"));
    } else {
        println!("{}", ResourceEstimate::CSV_HEADER);
        for r in &rows {
            println!("{}", r.csv_row());
        }
    }
    Ok(())
}

fn report(dir: &Path, out: Option<&Path>) -> CliResult {
    let runs = experiment::load_run_reports(dir)?;
    let csv = experiment::aggregate_runs(&runs)?.to_csv();
    match out {
        Some(path) => write(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen {
            cities,
            count,
            max_weight,
            seed,
            out,
        } => gen(cities, count, max_weight, seed, &out),
        Command::Solve { graph, json } => solve(&graph, json),
        Command::Run { config } => run(&config),
        Command::Noise { config, levels } => noise(&config, levels),
        Command::Skew { config, uniform } => skew(&config, uniform),
        Command::Resources {
            min_cities,
            max_cities,
            json,
        } => resources(min_cities, max_cities, json),
        Command::Report { dir, out } => report(&dir, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
