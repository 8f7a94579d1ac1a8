mod commands;
mod scenario;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use commands::{CmdError, Outcome};
use scenario::{ConfigError, Overrides, Scenario};

/// Analyze, design and simulate reputation-based social norms for P2P sharing.
#[derive(Parser)]
#[command(name = "normforge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stationary distribution, utilities and incentive slacks of a norm.
    Analyze(Common),
    /// Equilibrium verdict and sustainability bounds of a norm.
    Check(Common),
    /// Search for the utility-maximizing sustainable norm.
    Solve(Common),
    /// Evaluate `analyze` or `solve` over a parameter grid.
    Sweep(Common),
    /// Run the agent-based simulator.
    Simulate(Common),
    /// Simulate the norm and the tit-for-tat baseline side by side.
    Compare(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    SocialNorm,
    Tft,
}

#[derive(Clone, Copy, ValueEnum)]
enum BehaviorArg {
    Compliant,
    Rational,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Osne,
    OsneVp,
    OsneVps,
    OsneAh,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON). Flags below override its values.
    scenario: Option<PathBuf>,
    /// Write the JSON result here (`-` for standard output).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write the CSV table here (`-` for standard output).
    #[arg(long)]
    csv: Option<PathBuf>,

    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "p-c")]
    p_c: Option<f64>,
    #[arg(long = "p-d")]
    p_d: Option<f64>,

    /// Maximum reputation; applies to the norm and to the design section.
    #[arg(long = "L")]
    l: Option<u32>,
    #[arg(long = "h-o")]
    h_o: Option<u32>,
    /// Client thresholds for servers at h_o..=L, comma separated.
    #[arg(long = "m-o", value_delimiter = ',')]
    m_o: Option<Vec<u32>>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    b: Option<u32>,

    #[arg(long, value_enum)]
    problem: Option<ProblemArg>,
    #[arg(long = "b-cap")]
    b_cap: Option<u32>,

    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "n-peers")]
    n_peers: Option<usize>,
    #[arg(long = "n-periods")]
    n_periods: Option<usize>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long, value_enum)]
    flavor: Option<FlavorArg>,
    #[arg(long, value_enum)]
    behavior: Option<BehaviorArg>,
    /// Append the distance between empirical and analytic reputations.
    #[arg(long)]
    compare: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides {
            json: self.json.clone(),
            csv: self.csv.clone(),
            l: self.l,
            ..Default::default()
        };
        for (k, v) in [
            ("r", self.r),
            ("c", self.c),
            ("eps", self.eps),
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("p_c", self.p_c),
            ("p_d", self.p_d),
        ] {
            if let Some(v) = v {
                o.env.push((k, v));
            }
        }
        if let Some(v) = self.h_o {
            o.params.push(("h_o", v.into()));
        }
        if let Some(v) = &self.m_o {
            o.params.push(("m_o", v.clone().into()));
        }
        if let Some(v) = self.beta {
            o.params.push(("beta", v.into()));
        }
        if let Some(v) = self.b {
            o.params.push(("b", v.into()));
        }
        if let Some(p) = self.problem {
            let name = match p {
                ProblemArg::Osne => "OSNE",
                ProblemArg::OsneVp => "OSNE_VP",
                ProblemArg::OsneVps => "OSNE_VPS",
                ProblemArg::OsneAh => "OSNE_AH",
            };
            o.design.push(("problem", name.into()));
        }
        if let Some(v) = self.b_cap {
            o.design.push(("b_cap", v.into()));
        }
        if let Some(v) = self.seed {
            o.sim.push(("seed", v.into()));
        }
        if let Some(v) = self.n_peers {
            o.sim.push(("n_peers", v.into()));
        }
        if let Some(v) = self.n_periods {
            o.sim.push(("n_periods", v.into()));
        }
        if let Some(v) = self.replicas {
            o.sim.push(("replicas", v.into()));
        }
        if let Some(f) = self.flavor {
            let name = match f {
                FlavorArg::SocialNorm => "SocialNorm",
                FlavorArg::Tft => "Tft",
            };
            o.sim.push(("flavor", name.into()));
        }
        if let Some(b) = self.behavior {
            let name = match b {
                BehaviorArg::Compliant => "Compliant",
                BehaviorArg::Rational => "Rational",
            };
            o.sim.push(("behavior", name.into()));
        }
        if self.compare {
            o.sim.push(("compare", Value::Bool(true)));
        }
        o
    }
}

/// Cap the worker pool with `NORMFORGE_THREADS`.
fn init_threads() -> Result<(), ConfigError> {
    let Ok(raw) = std::env::var("NORMFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::new("NORMFORGE_THREADS", format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::new("NORMFORGE_THREADS", e.to_string()))
}

fn run(cli: Cli) -> Result<Outcome, CmdError> {
    init_threads()?;
    let (common, f): (&Common, fn(&Scenario) -> Result<Outcome, CmdError>) = match &cli.command {
        Command::Analyze(c) => (c, commands::analyze),
        Command::Check(c) => (c, commands::check),
        Command::Solve(c) => (c, commands::solve),
        Command::Sweep(c) => (c, commands::sweep),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Compare(c) => (c, commands::compare),
    };
    let scenario = Scenario::load(common.scenario.as_deref(), &common.overrides())?;
    f(&scenario)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(3),
        Ok(Outcome::NotConverged) => ExitCode::from(4),
        Err(e) => {
            eprintln!("{}", commands::error_json(&e));
            ExitCode::from(match e {
                CmdError::Config(_) => 2,
                _ => 1,
            })
        }
    }
}
