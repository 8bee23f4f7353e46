use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lanesel::config::{DensityLevel, ScenarioConfig, SystemMode};
use lanesel::experiments::{read_rows, run_experiment, write_plot_data, ExperimentError, ExperimentId, ExperimentSpec};
use lanesel::sim::run_scenario;

const EXIT_INVALID: u8 = 1;
const EXIT_RUN_FAILURE: u8 = 2;

/// Lane-selection assistance simulator.
#[derive(Debug, Parser)]
#[command(name = "lanesel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its per-run CSV.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for `run_<mode>_<seed>.csv`; stdout when omitted.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run one of the experiment sweeps with matched Off runs.
    Experiment {
        /// congestion_effect, system_effect or oda_impact
        id: ExperimentId,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// First seed of the sweep.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of seeds per cell.
        #[arg(long, default_value_t = lanesel::experiments::DEFAULT_SEEDS)]
        seeds: u64,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Check a scenario config file.
    ValidateConfig { path: PathBuf },
    /// Turn a runs CSV into long-format rows for plotting.
    PlotData {
        input: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario TOML; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    oda_budget: Option<u8>,
    #[arg(long)]
    density: Option<DensityLevel>,
    #[arg(long)]
    mode: Option<SystemMode>,
    /// Radio range in metres (300 or 500).
    #[arg(long)]
    tx_range: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                ScenarioConfig::from_toml_str(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(b) = self.oda_budget {
            cfg.oda_budget = b;
        }
        if let Some(d) = self.density {
            cfg.density = d;
            cfg.vehicle_count = None;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(r) = self.tx_range {
            cfg.channel.tx_range_m = r;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

enum Failure {
    Invalid(String),
    Run(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn output(path: Option<&PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { scenario, seed, out_dir } => {
            let mut cfg = scenario.load().map_err(Failure::Invalid)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let m = run_scenario(&cfg).map_err(|e| Failure::Run(e.to_string()))?;
            let path = match &out_dir {
                Some(dir) => {
                    std::fs::create_dir_all(dir)?;
                    Some(dir.join(format!("run_{}_{}.csv", cfg.mode, cfg.seed)))
                }
                None => None,
            };
            m.write_csv(output(path.as_ref())?).map_err(|e| Failure::Run(e.to_string()))?;
            let mean = m.mean_travel_time_s.map_or("n/a".to_string(), |t| format!("{t:.2} s"));
            eprintln!(
                "{} vehicles, {} traversals, mean travel time {mean}, {} lane changes, {} ODAs",
                m.vehicle_count,
                m.traversals.len(),
                m.lane_changes(),
                m.odas_issued
            );
            if m.audit.total() > 0 {
                return Err(Failure::Run(format!("safety audit failed: {:?}", m.audit)));
            }
            Ok(())
        }
        Command::Experiment { id, scenario, seed, seeds, out_dir } => {
            let base = scenario.load().map_err(Failure::Invalid)?;
            let spec = ExperimentSpec::new(id, base, (seed..seed.saturating_add(seeds)).collect());
            let result = run_experiment(&spec).map_err(|e| match e {
                ExperimentError::InvalidSpec(msg) => Failure::Invalid(msg),
                other => Failure::Run(other.to_string()),
            })?;
            result.write_artifacts(&out_dir).map_err(|e| Failure::Run(e.to_string()))?;
            println!("{:<28} {:>4} {:>10} {:>8} {:>10} {:>10}", "cell", "n", "delta %", "se", "tt s", "off tt s");
            for s in &result.summaries {
                println!(
                    "{:<28} {:>4} {:>10.3} {:>8.3} {:>10.2} {:>10.2}",
                    s.cell.label, s.delta.n, s.delta.mean, s.delta.se, s.mean_travel_time_s, s.baseline_mean_travel_time_s
                );
            }
            eprintln!("wrote {}", out_dir.display());
            Ok(())
        }
        Command::ValidateConfig { path } => {
            let text = std::fs::read_to_string(&path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
            ScenarioConfig::from_toml_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
            println!("{}: ok", path.display());
            Ok(())
        }
        Command::PlotData { input, output: out } => {
            let file = File::open(&input).map_err(|e| Failure::Invalid(format!("{}: {e}", input.display())))?;
            let rows = read_rows(file).map_err(|e| Failure::Invalid(format!("{}: {e}", input.display())))?;
            write_plot_data(&rows, output(out.as_ref())?).map_err(|e| Failure::Run(e.to_string()))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUN_FAILURE)
        }
    }
}
