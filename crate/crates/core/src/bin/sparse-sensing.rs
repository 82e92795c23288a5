//! Command-line front end for dataset generation, sensor selection,
//! reconstruction and the benchmark sweeps.
//!
//! Exit codes: 0 success, 2 configuration or I/O error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparse_sensing::datasets::{self, write_masked_grid};
use sparse_sensing::harness::{
    emit_report, parse_list, parse_r2, parse_usize_list, run_error_sweep, run_r2_sweep, run_timing_sweep, DatasetSpec,
    ExperimentConfig, Method, Trial,
};
use sparse_sensing::{ErrorKind, Result, SensingError};

#[derive(Parser)]
#[command(
    name = "sparse-sensing",
    version,
    about = "Sparse sensor selection and reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset: a matrix file, or values.csv + mask.csv for grids.
    Gen {
        /// `random:NxM` or `grid:WxH:M[:X0,Y0,W,H]`.
        #[arg(long)]
        data: DatasetSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (`.bin` or `.csv`), or a directory for grid datasets.
        #[arg(long)]
        out: PathBuf,
    },
    /// Select sensors and print them, one line per method and p.
    Select(Common),
    /// Reconstruct every snapshot from a sensor set and report the error.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Comma-separated sensor indices; overrides running the selector.
        #[arg(long)]
        sensors: Option<String>,
    },
    /// Reconstruction error versus p.
    SweepError(Common),
    /// Selection time versus p (median after a discarded warm-up run).
    SweepTime(Common),
    /// Error and selection time for several noise tail ranks.
    SweepR2(Common),
}

#[derive(Args)]
struct Common {
    /// `random:NxM`, `grid:WxH:M[:X0,Y0,W,H]`, `file:PATH` or `masked:VALUES,MASK`.
    #[arg(long)]
    data: DatasetSpec,
    #[arg(long)]
    r1: usize,
    /// Tail rank(s): `full` or an integer; comma-separated for sweep-r2.
    #[arg(long, default_value = "full")]
    r2: String,
    /// Sensor counts, e.g. `1-20` or `5,10,20`.
    #[arg(long)]
    p: String,
    /// Comma-separated methods, e.g. `DG-LSE,BDG-BE`.
    #[arg(long, default_value = "BDG-BE")]
    methods: String,
    /// Seeds, e.g. `0-9`.
    #[arg(long, default_value = "0")]
    seeds: String,
    #[arg(long, default_value_t = 1e-3)]
    exclude_factor: f64,
    /// Subtract the training mean before the decomposition.
    #[arg(long)]
    center: bool,
    /// Fraction of snapshots used for training.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Output directory (or file for `reconstruct`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn config(&self, r2_list: bool) -> Result<ExperimentConfig> {
        let methods = self
            .methods
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<Method>>>()?;
        let mut cfg = ExperimentConfig::new(self.data.clone(), self.r1, parse_usize_list(&self.p)?, methods);
        let r2: Vec<Option<usize>> = self.r2.split(',').map(parse_r2).collect::<Result<_>>()?;
        if r2_list {
            cfg.r2_values = r2;
        } else if let [single] = r2[..] {
            cfg.r2 = single;
        } else {
            return Err(SensingError::InvalidConfig(
                "a single --r2 value is expected here".into(),
            ));
        }
        cfg.seeds = parse_list(&self.seeds)?;
        cfg.exclusion_factor = self.exclude_factor;
        cfg.centering = self.center;
        cfg.split = self.split;
        cfg.timing_reps = self.reps;
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&PathBuf> {
        self.out
            .as_ref()
            .ok_or_else(|| SensingError::InvalidConfig("--out is required".into()))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { data, seed, out } => {
            let (x, grid) = data.load(seed)?;
            match grid {
                Some(grid) => {
                    std::fs::create_dir_all(&out).map_err(|e| SensingError::Io {
                        path: out.clone(),
                        source: e,
                    })?;
                    write_masked_grid(out.join("values.csv"), out.join("mask.csv"), &grid, &x)?;
                }
                None => datasets::write_matrix(&out, x.values())?,
            }
            println!("wrote {} x {} snapshots to {}", x.n(), x.m(), out.display());
        }
        Command::Select(common) => {
            let cfg = common.config(false)?;
            let report = run_error_sweep(&cfg)?;
            for r in &report.records {
                let sensors: Vec<String> = r.sensors.iter().map(|i| i.to_string()).collect();
                println!("{} p={} seed={} sensors={}", r.method, r.p, r.seed, sensors.join(","));
            }
            if let Some(out) = &common.out {
                emit_report(&report, out)?;
            }
        }
        Command::Reconstruct { common, sensors } => {
            let cfg = common.config(false)?;
            let trial = Trial::prepare(&cfg, cfg.seeds[0])?;
            let p = *cfg.p_values.last().expect("validated");
            for &method in &cfg.methods {
                let chosen = match &sensors {
                    Some(list) => parse_usize_list(list)?,
                    None => trial.select(method, p)?,
                };
                let x_hat = trial.reconstruct(method, &chosen)?;
                let error = sparse_sensing::estimators::reconstruction_error(&trial.eval, &x_hat)?;
                println!(
                    "{method} p={} error={error:.6e} mean_error={:.6e}",
                    chosen.len(),
                    error / trial.eval.m() as f64
                );
                if let Some(out) = &common.out {
                    let path = if cfg.methods.len() == 1 {
                        out.clone()
                    } else {
                        out.join(format!("{method}.csv"))
                    };
                    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                        std::fs::create_dir_all(parent).map_err(|e| SensingError::Io {
                            path: parent.to_path_buf(),
                            source: e,
                        })?;
                    }
                    datasets::write_matrix(&path, &x_hat)?;
                }
            }
        }
        Command::SweepError(common) => emit_report(&run_error_sweep(&common.config(false)?)?, common.out_dir()?)?,
        Command::SweepTime(common) => emit_report(&run_timing_sweep(&common.config(false)?)?, common.out_dir()?)?,
        Command::SweepR2(common) => emit_report(&run_r2_sweep(&common.config(true)?)?, common.out_dir()?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Numerical => ExitCode::from(3),
                ErrorKind::Config | ErrorKind::Io => ExitCode::from(2),
            }
        }
    }
}
