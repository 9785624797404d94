use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;
mod run_config;

use run_config::Overrides;

#[derive(Parser, Debug)]
#[command(name = "collgate", version, about = "Collisional phase gate simulations for trapped atom pairs")]
struct Cli {
    /// Parameter file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base parameter set that the file and flags refine.
    #[arg(long, global = true, value_enum, default_value_t = Preset::PaperFig2)]
    preset: Preset,

    /// Output directory.
    #[arg(long, global = true, env = "COLLGATE_OUT", default_value = "collgate_out")]
    out: PathBuf,

    /// Worker threads for sweeps and thermal ensembles (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// ⁸⁷Rb at 17.23 kHz, 150 kHz transverse, ω₀ = 2ω, x0 = 5 a_x, a_s = 5.1 nm, 7 periods.
    PaperFig2,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Two |b⟩ atoms.
    Bb,
    /// An |a⟩,|b⟩ pair.
    Ab,
    /// Two |b⟩ atoms without interaction.
    Free,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    ABb,
    AAb,
    X0,
    Omega0,
    OmegaPerp,
    NPeriods,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Propagate one gate and write the trajectory and its summary.
    Simulate {
        #[arg(long, value_enum, default_value_t = Mode::Bb)]
        mode: Mode,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Zero- and finite-temperature gate fidelity.
    Fidelity {
        /// k_B T in units of ħω₀.
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
        temperatures: Vec<f64>,
        /// Highest excitation in the thermal sum.
        #[arg(long, default_value_t = 6)]
        n_cut: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the gate over a range of one parameter.
    Sweep(SweepArgs),
    /// Run the acceptance checks and report pass/fail per criterion.
    Validate {
        /// Subset of criteria to run.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u8>>,
        /// Perturb the inputs of one criterion, which should then fail.
        #[arg(long)]
        inject_fault: Option<u8>,
    },
    /// Magnetic mirror potential, minima and trap frequencies.
    Trapfield(commands::TrapfieldArgs),
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    #[arg(long, value_enum, default_value_t = Mode::Bb)]
    pub mode: Mode,
    /// First value (internal units: a_x, ω).
    #[arg(long)]
    pub from: f64,
    /// Last value.
    #[arg(long)]
    pub to: f64,
    /// Number of points, endpoints included; 0 gives an empty table.
    #[arg(long)]
    pub points: usize,
    #[command(flatten)]
    pub overrides: Overrides,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", serde_json::json!({ "kind": "usage", "message": first }));
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "kind": e.kind(), "message": e.to_string() }));
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> collgate::Result<ExitCode> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| collgate::Error::Config(format!("--jobs: {e}")))?;
    }
    let ctx = commands::Context { config: cli.config, preset: cli.preset, out: cli.out };
    match cli.command {
        Command::Simulate { mode, overrides } => commands::simulate(&ctx, mode, &overrides),
        Command::Fidelity { temperatures, n_cut, overrides } => commands::fidelity(&ctx, &temperatures, n_cut, &overrides),
        Command::Sweep(args) => commands::sweep(&ctx, &args),
        Command::Validate { criteria, inject_fault } => commands::validate(&ctx, criteria, inject_fault),
        Command::Trapfield(args) => commands::trapfield(&ctx, &args),
    }
}
