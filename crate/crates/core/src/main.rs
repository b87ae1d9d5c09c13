use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qarrow::commands;
use qarrow::config::RunConfig;
use qarrow::verify::VerifyScale;
use qarrow::Error;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "qarrow", version, about = "Arrow of time along simulated qubit measurement trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate unit-efficiency Q ensembles and their fluctuation statistics
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also export one measurement record at the configured efficiency
        #[arg(long)]
        export_record: bool,
    },
    /// Unravel a stored measurement record into pure-state trajectories
    Unravel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        record: PathBuf,
    },
    /// Run the acceptance checks and write a report
    Verify {
        #[command(flatten)]
        common: Common,
        /// Shrink every ensemble by this factor
        #[arg(long, value_name = "FACTOR")]
        reduce: Option<usize>,
    },
    /// Histogram and fluctuation-theorem statistics of an existing Q ensemble CSV
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "out")]
    out: Option<PathBuf>,
    #[arg(long)]
    n_traj: Option<usize>,
    /// driven | qnd
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    eta: Option<f64>,
    /// z | phi | split
    #[arg(long)]
    basis: Option<String>,
    /// Duration checkpoint in microseconds; repeat for several
    #[arg(long = "duration-us")]
    duration_us: Vec<f64>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    q_max: Option<f64>,
    #[arg(long)]
    min_bin_count: Option<u64>,
    #[arg(long)]
    ft_window: Option<f64>,
    /// z+ | z- | x+ | x- | mixed | "x, y, z"
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    n_samples: Option<usize>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    /// Defaults, then the config file, then flags.
    fn resolve(&self) -> qarrow::Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.n_traj {
            cfg.n_traj = v;
        }
        if let Some(v) = &self.mode {
            cfg.apply("mode", v)?;
        }
        if let Some(v) = self.eta {
            cfg.eta = v;
        }
        if let Some(v) = &self.basis {
            cfg.apply("basis", v)?;
        }
        if !self.duration_us.is_empty() {
            cfg.durations = self.duration_us.iter().map(|d| d * 1e-6).collect();
        }
        if let Some(v) = self.bin_width {
            cfg.bin_width = v;
        }
        if let Some(v) = self.q_max {
            cfg.q_max = v;
        }
        if let Some(v) = self.min_bin_count {
            cfg.min_bin_count = v;
        }
        if let Some(v) = self.ft_window {
            cfg.ft_window = v;
        }
        if let Some(v) = &self.initial {
            cfg.apply("initial_state", v)?;
        }
        if let Some(v) = self.n_samples {
            cfg.n_samples = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn init_threads(&self) -> qarrow::Result<()> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(Error::Config {
                    key: "threads".into(),
                    reason: "must be at least 1".into(),
                });
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Format(format!("thread pool: {e}")))?;
        }
        Ok(())
    }
}

fn execute(command: Command) -> qarrow::Result<bool> {
    match command {
        Command::Simulate { common, export_record } => {
            common.init_threads()?;
            let cfg = common.resolve()?;
            let m = commands::cmd_simulate(&cfg, export_record)?;
            println!("wrote {} files to {}", m.outputs.len(), cfg.output_dir.display());
            Ok(true)
        }
        Command::Unravel { common, record } => {
            common.init_threads()?;
            let cfg = common.resolve()?;
            let m = commands::cmd_unravel(&cfg, &record)?;
            println!("wrote {} files to {}", m.outputs.len(), cfg.output_dir.display());
            Ok(true)
        }
        Command::Analyze { common, input } => {
            common.init_threads()?;
            let cfg = common.resolve()?;
            let m = commands::cmd_analyze(&cfg, &input)?;
            println!("wrote {} files to {}", m.outputs.len(), cfg.output_dir.display());
            Ok(true)
        }
        Command::Verify { common, reduce } => {
            common.init_threads()?;
            let cfg = common.resolve()?;
            let mut scale = VerifyScale::default();
            if let Some(n) = common.n_traj {
                scale = scale.with_n_traj(n);
            }
            if let Some(f) = reduce {
                if f == 0 {
                    return Err(Error::Config {
                        key: "reduce".into(),
                        reason: "must be at least 1".into(),
                    });
                }
                scale = scale.reduced(f);
            }
            let (report, _) = commands::cmd_verify(&cfg, &scale)?;
            for c in &report.criteria {
                println!("{}", c.line());
            }
            let failed = report.failures();
            if !failed.is_empty() {
                let ids: Vec<&str> = failed.iter().map(|c| c.id.as_str()).collect();
                eprintln!("failed criteria: {}", ids.join(", "));
            }
            Ok(report.all_passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_ACCEPTANCE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}
