use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hfsky::estimators::Algorithm;
use hfsky::grid::GridParams;
use hfsky::harness::{prediction_csv, run_experiment, run_prediction, write_csv, ExperimentConfig, Trial};
use hfsky::pilots::GroupingMode;
use hfsky::scenario::{generate_scenario, read_scenario, write_scenario, GeneratorConfig};
use hfsky::{Error, Result};

#[derive(Parser)]
#[command(name = "hfsky", version, about = "Triple-beam channel acquisition experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults to the built-in desk-scale setup.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a config key, e.g. `--set generator.num_uts=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a random scenario and write it as text.
    GenScenario {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Group terminals and print the pilot schedule.
    Group {
        #[command(flatten)]
        common: Common,
        /// Scenario file from `gen-scenario`; otherwise drawn from the seed.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        grouping: Option<GroupingMode>,
    },
    /// Run one estimation and report its NMSE.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long)]
        algo: Option<Algorithm>,
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Monte Carlo sweep written as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Per-symbol prediction vs. reuse over the current slot.
    PredictDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let base = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(GridParams::desk()),
    };
    let mut cfg = base.with_overrides(&common.set)?;
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    Ok(cfg)
}

fn seed_of(cfg: &ExperimentConfig) -> Result<u64> {
    cfg.seed.ok_or_else(|| Error::Config("--seed is required (or set `seed` in the config)".into()))
}

fn trial_for(cfg: &ExperimentConfig, scenario: Option<&PathBuf>, mode: GroupingMode) -> Result<Trial> {
    let seed = seed_of(cfg)?;
    let fine = cfg.fine_axis()[0];
    match scenario {
        Some(p) => {
            let grid = cfg.grid_for(fine)?;
            let sc = read_scenario(&grid, &std::fs::read_to_string(p)?)?;
            Trial::from_paths(cfg, grid, sc.uts, mode, sc.seed, 0)
        }
        None => Trial::prepare(cfg, fine, cfg.speed_axis()[0], mode, seed, 0),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::GenScenario { common, out } => {
            let cfg = load(&common)?;
            let grid = cfg.grid_for(cfg.fine_axis()[0])?;
            let gen = GeneratorConfig { speed_kmh: cfg.speed_axis()[0], ..cfg.generator.clone() };
            let text = write_scenario(&generate_scenario(&grid, &gen, seed_of(&cfg)?)?);
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
        }
        Cmd::Group { common, scenario, grouping } => {
            let cfg = load(&common)?;
            let t = trial_for(&cfg, scenario.as_ref(), grouping.unwrap_or(cfg.pilots.grouping))?;
            println!("group,shift,members");
            for (s, g) in t.plan.groups.iter().enumerate() {
                let members: Vec<String> = g.iter().map(|u| u.to_string()).collect();
                println!("{s},{},{}", t.plan.phi[g[0]], members.join(" "));
            }
        }
        Cmd::Estimate { common, snr_db, algo, scenario } => {
            let cfg = load(&common)?;
            let t = trial_for(&cfg, scenario.as_ref(), cfg.pilots.grouping)?;
            let sz = t.sigma_z(snr_db);
            let y = t.observation(sz);
            let algos = algo.map(|a| vec![a]).unwrap_or_else(|| cfg.estimator.algorithms.clone());
            println!("algo,snr_db,nmse_all_db,nmse_current_db,iterations,converged");
            for a in algos {
                let est = t.estimate(a, &y, sz, &cfg.estimator.cbfem)?;
                let rep = t.nmse(&est)?;
                println!(
                    "{},{snr_db},{:.3},{:.3},{},{}",
                    a.label(),
                    rep.all_db(),
                    rep.current_db(),
                    est.iterations,
                    est.converged
                );
            }
        }
        Cmd::Sweep { common, out, trials } => {
            if common.seed.is_none() {
                return Err(Error::Config("sweep requires --seed".into()));
            }
            let mut cfg = load(&common)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let rows = run_experiment(&cfg)?;
            let path = out.or_else(|| cfg.output.clone().map(PathBuf::from)).unwrap_or_else(|| format!("{}.csv", cfg.experiment_id).into());
            write_csv(&path, &rows)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        Cmd::PredictDemo { common, out, trials } => {
            let mut cfg = load(&common)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let rows = run_prediction(&cfg)?;
            println!("symbol,distance,nmse_predict_db,nmse_reuse_db");
            for r in &rows {
                println!("{},{},{:.3},{:.3}", r.symbol, r.distance, r.nmse_predict_db, r.nmse_reuse_db);
            }
            if let Some(p) = out {
                prediction_csv(&p, &rows)?;
            }
        }
    }
    Ok(())
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
