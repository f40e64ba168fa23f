use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hess_soc::sim::ProfileKind;
use hess_soc::ModelKind;
use hess_soc_cli::cmd::{compare, estimate, selftest, simulate, train};
use hess_soc_cli::{CliError, CliResult, Experiment, ExperimentSpec};

/// SOC estimation experiments for battery/supercapacitor packs.
///
/// Exit codes: 0 success, 1 selftest failure, 2 usage error, 3 data error,
/// 4 training failure.
#[derive(Parser)]
#[command(name = "hess-soc", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment spec file (TOML). Flags override its fields.
    #[arg(long, value_name = "FILE")]
    config: Vec<PathBuf>,
    /// Training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; relative input paths are resolved against it.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Shipped preset: battery_room, battery_hot, sc_25f, sc_1f_hot, udds_pack.
    #[arg(long)]
    preset: Option<String>,
    /// Current profile (cccv or udds); defaults to the preset's.
    #[arg(long, value_parser = parse_profile)]
    profile: Option<ProfileKind>,
    /// Estimator network (narx or ann).
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Initial SOC as a fraction in [0, 1].
    #[arg(long)]
    soc0: Option<f64>,
    /// Simulation time step in seconds.
    #[arg(long)]
    dt: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a preset and write its CSV datasets plus manifest.json.
    Simulate(Common),
    /// Fit an estimator to a CSV dataset with a soc column.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "CSV")]
        data: PathBuf,
    },
    /// Run a trained bundle over a CSV dataset.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "FILE", default_value = "bundle.json")]
        bundle: PathBuf,
        #[arg(long, value_name = "CSV")]
        data: PathBuf,
    },
    /// Train NARX and the feed-forward baseline on each spec and tabulate.
    Compare(Common),
    /// Run the invariant checks on the shipped presets.
    Selftest,
}

fn parse_profile(s: &str) -> Result<ProfileKind, String> {
    s.parse().map_err(|e: hess_soc::Error| e.to_string())
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: hess_soc::Error| e.to_string())
}

impl Common {
    fn flags(&self) -> ExperimentSpec {
        ExperimentSpec {
            preset: self.preset.clone(),
            profile: self.profile,
            model: self.model,
            seed: self.seed,
            dt: self.dt,
            soc0: self.soc0,
            out: self.out.clone(),
            ..ExperimentSpec::default()
        }
    }

    fn specs(&self) -> CliResult<Vec<ExperimentSpec>> {
        let flags = self.flags();
        if self.config.is_empty() {
            return Ok(vec![flags]);
        }
        self.config.iter().map(|p| Ok(ExperimentSpec::load(p)?.overlay(&flags))).collect()
    }

    fn spec(&self) -> CliResult<ExperimentSpec> {
        if self.config.len() > 1 {
            return Err(CliError::usage("only `compare` accepts more than one --config"));
        }
        Ok(self.specs()?.remove(0))
    }

    fn experiments(&self) -> CliResult<Vec<Experiment>> {
        self.specs()?.iter().map(ExperimentSpec::resolve).collect()
    }

    fn experiment(&self) -> CliResult<Experiment> {
        self.spec()?.resolve()
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Simulate(c) => {
            let exp = c.experiment()?;
            let (_, paths) = simulate::run(&exp)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Cmd::Train { common, data } => {
            let spec = common.spec()?;
            let (exp, file, summary) = train::run_spec(&spec, &data)?;
            println!(
                "{} {} bundle with {} network(s); test MAE {:.4}% RMSE {:.4}%",
                summary.device.as_str(),
                summary.model.as_str(),
                file.bundle.networks.count(),
                summary.holdout.mae_pct,
                summary.holdout.rmse_pct
            );
            println!("wrote {}", exp.out.join("bundle.json").display());
            println!("wrote {}", exp.out.join("train_report.json").display());
        }
        Cmd::Estimate { common, bundle, data } => {
            let exp = common.experiment()?;
            let bundle = hess_soc_cli::artifact::resolve(&exp.out, &bundle);
            let data = hess_soc_cli::artifact::resolve(&exp.out, &data);
            let outcome = estimate::run(&exp, &bundle, &data)?;
            println!("wrote {}", exp.out.join("estimate.csv").display());
            match outcome.metrics {
                Some(m) => {
                    println!("MAE {:.4}% RMSE {:.4}% over {} points", m.mae_pct, m.rmse_pct, m.n_points);
                    println!("wrote {}", exp.out.join("metrics.json").display());
                }
                None => eprintln!("notice: {} has no soc column; metrics.json not written", data.display()),
            }
        }
        Cmd::Compare(c) => {
            let exps = c.experiments()?;
            let out = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
            let table = compare::run(&exps, &out)?;
            print!("{}", table.render());
        }
        Cmd::Selftest => {
            selftest::run()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
