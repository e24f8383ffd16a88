use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod graphs;
mod output;

use config::Params;
use error::{CliError, CliResult};
use output::OutDir;

#[derive(Parser, Debug)]
#[command(
    name = "gossiplab",
    version,
    about = "Effective-neighborhood experiments for decentralized SGD"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// INI config; keys in the general section and in [<command>] apply.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default gossiplab-out/<command>).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads for sweeps and Monte-Carlo runs.
    #[arg(long, global = true, env = "GOSSIPLAB_THREADS", value_name = "N")]
    threads: Option<usize>,
}

/// Declares a flag struct whose every field overrides the config key of the same name.
macro_rules! overrides {
    ($(#[$doc:meta])* $name:ident { $($field:ident),* $(,)? }) => {
        $(#[$doc])*
        #[derive(Args, Debug)]
        struct $name {
            $(#[arg(long)] $field: Option<String>,)*
            /// Any config key, as KEY=VALUE.
            #[arg(long = "set", value_name = "KEY=VALUE")]
            set: Vec<String>,
        }

        impl $name {
            fn overrides(&self) -> CliResult<Vec<(String, String)>> {
                let mut v = Vec::new();
                for kv in &self.set {
                    let (k, val) = kv
                        .split_once('=')
                        .ok_or_else(|| CliError::config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
                    v.push((k.to_owned(), val.to_owned()));
                }
                $(if let Some(x) = &self.$field {
                    v.push((stringify!($field).to_owned(), x.clone()));
                })*
                Ok(v)
            }
        }
    };
}

overrides!(
    /// Gossip matrix and spectrum of one topology.
    TopologyArgs { kind, n, rows, scheme, lazy, edges }
);
overrides!(
    /// Effective number of neighbors over a decay grid.
    EffnnArgs { topologies, gammas, scheme, lazy, method, replicas, steps }
);
overrides!(
    /// Toy-model rates over a learning-rate grid.
    ToyrateArgs { topologies, zeta, etas, scheme, lazy, target, oracle, oracle_iters }
);
overrides!(
    /// D-SGD runs and descent checks on heterogeneous quadratics.
    DsgdArgs {
        topology, scheme, lazy, problem, problem_seed, d, hetero, noise, hessian_keep_prob,
        gamma, omega, eta, eta_scale, steps, runs, checks, covariance_steps, covariance_runs
    }
);
overrides!(
    /// Learning-rate sweeps, plans and rate comparison.
    LrplanArgs {
        topology, scheme, lazy, zeta, l, beta_mode, gammas, d_s, c_s, compare, horizon, mu, sigma2, delta2
    }
);
overrides!(
    /// Fits the decay of the neighborhood model to a covariance matrix.
    FitDecayArgs { covariance, gossip, topology, scheme, lazy }
);

#[derive(Subcommand, Debug)]
enum Command {
    Topology(TopologyArgs),
    Effnn(EffnnArgs),
    Toyrate(ToyrateArgs),
    Dsgd(DsgdArgs),
    Lrplan(LrplanArgs),
    FitDecay(FitDecayArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Topology(_) => "topology",
            Command::Effnn(_) => "effnn",
            Command::Toyrate(_) => "toyrate",
            Command::Dsgd(_) => "dsgd",
            Command::Lrplan(_) => "lrplan",
            Command::FitDecay(_) => "fit-decay",
        }
    }

    fn overrides(&self) -> CliResult<Vec<(String, String)>> {
        match self {
            Command::Topology(a) => a.overrides(),
            Command::Effnn(a) => a.overrides(),
            Command::Toyrate(a) => a.overrides(),
            Command::Dsgd(a) => a.overrides(),
            Command::Lrplan(a) => a.overrides(),
            Command::FitDecay(a) => a.overrides(),
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let name = cli.command.name();
    let params = Params::load(cli.common.config.as_deref(), name, cli.command.overrides()?)?;
    let seed = match cli.common.seed {
        Some(s) => s,
        None => params.get("seed", 0u64)?,
    };
    let threads = match cli.common.threads {
        Some(t) => Some(t),
        None => params.opt::<usize>("threads")?,
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::config("threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    let out_path = match cli.common.out {
        Some(p) => p,
        None => params
            .opt::<PathBuf>("out")?
            .unwrap_or_else(|| PathBuf::from("gossiplab-out").join(name)),
    };
    let out = OutDir::create(&out_path)?;

    let outcome = match &cli.command {
        Command::Topology(_) => commands::topology::run(&params, &out)?,
        Command::Effnn(_) => commands::effnn::run(&params, seed, &out)?,
        Command::Toyrate(_) => commands::toyrate::run(&params, &out)?,
        Command::Dsgd(_) => commands::dsgd::run(&params, seed, &out)?,
        Command::Lrplan(_) => commands::lrplan::run(&params, &out)?,
        Command::FitDecay(_) => commands::fit_decay::run(&params, &out)?,
    };
    out.write_manifest(name, seed, &params)?;
    for key in params.unused() {
        eprintln!("warning: config key {key:?} is not used by {name}");
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(outcome.failures.join("; ")))
    }
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
