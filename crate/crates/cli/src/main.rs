use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use stigtrack::config::{Domain, WorldConfig, PRESETS};
use stigtrack::harness::{run_monte_carlo, run_sweep, write_outputs, AssignAlgo, ExperimentSpec, SearchAlgo, Summary, SweepGrid};

#[derive(Parser)]
#[command(name = "stigtrack", version, about = "Pheromone search and distributed target tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo runs of one configuration.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "pheromone")]
        search: SearchAlgo,
        /// Write pheromone maps of the first run as PGM files.
        #[arg(long)]
        dump_maps: bool,
    },
    /// Monte-Carlo batches over parameter grids.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grids to iterate: agents-targets, env-size, fov.
        #[arg(long, value_delimiter = ',', default_value = "agents-targets,env-size,fov")]
        grid: Vec<SweepGrid>,
        #[arg(long, value_delimiter = ',', default_value = "pheromone,levy")]
        search: Vec<SearchAlgo>,
    },
    /// Print a preset as a configuration file.
    Config {
        #[arg(long, default_value = "sim-2d")]
        preset: String,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file; overrides --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "sim-2d")]
    preset: String,
    #[arg(long, default_value = "greedy-distributed")]
    assign: AssignAlgo,
    #[arg(long, default_value_t = 60)]
    runs: usize,
    #[arg(long, default_value_t = 4000)]
    steps: u64,
    /// Base seed; runs use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    targets: Option<usize>,
    /// Side of a square domain, bl.
    #[arg(long)]
    size: Option<f64>,
    /// End each run once every target is tracked.
    #[arg(long)]
    stop_when_tracked: bool,
}

impl Common {
    fn world(&self) -> Result<WorldConfig> {
        let mut w = match &self.config {
            Some(path) => WorldConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => {
                if !PRESETS.contains(&self.preset.as_str()) {
                    bail!("unknown preset '{}', expected one of {}", self.preset, PRESETS.join(", "));
                }
                WorldConfig::preset(&self.preset)?
            }
        };
        if let Some(n) = self.agents {
            w.n_agents = n;
        }
        if let Some(n) = self.targets {
            w.n_targets = n;
        }
        if let Some(s) = self.size {
            w.domain = Domain::square(s);
        }
        w.validate()?;
        Ok(w)
    }

    fn spec(&self, search: SearchAlgo) -> Result<ExperimentSpec> {
        Ok(ExperimentSpec {
            runs: self.runs,
            max_steps: self.steps,
            base_seed: self.seed,
            stop_when_tracked: self.stop_when_tracked,
            ..ExperimentSpec::new(self.world()?, search, self.assign)
        })
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"))
}

fn print_summary(label: &str, s: &Summary) {
    println!(
        "{label}: {}/{} completed, mean {} median {} steps",
        s.completed,
        s.runs,
        fmt_opt(s.mean),
        fmt_opt(s.median)
    );
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { common, search, dump_maps } => {
            let spec = ExperimentSpec { dump_maps, ..common.spec(search)? };
            let result = run_monte_carlo(&spec)?;
            print_summary(&format!("{} / {}", spec.search, spec.assign), &result.summary);
            if let Some(dir) = &common.out {
                write_outputs(dir, &spec, &result)?;
                println!("wrote {}", dir.display());
            }
        }
        Command::Sweep { common, grid, search } => {
            let base = common.spec(SearchAlgo::Pheromone)?;
            for (label, spec, summary) in run_sweep(&base, &grid, &search, common.out.as_deref())? {
                print_summary(&format!("{label} {}", spec.search), &summary);
            }
        }
        Command::Config { preset } => print!("{}", WorldConfig::preset(&preset)?.to_toml()),
    }
    Ok(())
}
