use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperspin::steady::SolverMethod;
use hyperspin_cli::config::{load_config, ClassicalOutput, ExperimentConfig, NegativityOutput, WignerOutput};
use hyperspin_cli::pipeline::run;
use hyperspin_cli::presets::{preset, presets, Scale};
use hyperspin_cli::CliError;

#[derive(Parser)]
#[command(name = "hyperspin", version, about = "Steady states of coupled degenerate OPO networks")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "HYPERSPIN_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve steady states and write density matrices.
    Steady(RunArgs),
    /// Steady states plus Wigner grids.
    Wigner(RunArgs),
    /// Negativity sweep over the configured pump values.
    Sweep(RunArgs),
    /// Mean-field fixed points only.
    Classical(RunArgs),
    /// Run a named experiment.
    Preset(PresetArgs),
}

#[derive(Args)]
struct Overrides {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n_max: Option<usize>,
    /// auto, nullspace_lu, shift_invert_arnoldi, dense_fallback or gmres.
    #[arg(long)]
    method: Option<SolverMethod>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset name, for example fig1b.
    name: Option<String>,
    /// Use the reduced truncation (N = 2: 12, N = 3: 8).
    #[arg(long)]
    desk: bool,
    /// List the presets and exit.
    #[arg(long)]
    list: bool,
    /// Print the configuration as TOML instead of running it.
    #[arg(long)]
    dump: bool,
    #[command(flatten)]
    overrides: Overrides,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(n) = self.n_max {
            cfg.n_max = n;
        }
        if let Some(m) = self.method {
            cfg.solver.method = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
    }
}

fn restrict(cfg: &mut ExperimentConfig, command: &Command) {
    let o = &mut cfg.outputs;
    match command {
        Command::Steady(_) => {
            o.steady = true;
            o.wigner = None;
            o.negativity = None;
            o.classical = None;
        }
        Command::Wigner(_) => {
            o.wigner.get_or_insert_with(WignerOutput::default);
            o.negativity = None;
        }
        Command::Sweep(_) => {
            o.negativity.get_or_insert_with(NegativityOutput::default);
            o.wigner = None;
            o.classical = None;
        }
        Command::Classical(_) => {
            o.steady = false;
            o.wigner = None;
            o.negativity = None;
            o.classical.get_or_insert_with(ClassicalOutput::default);
        }
        Command::Preset(_) => {}
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.command {
        Command::Steady(a) | Command::Wigner(a) | Command::Sweep(a) | Command::Classical(a) => {
            let mut cfg = load_config(&a.config)?;
            a.overrides.apply(&mut cfg);
            restrict(&mut cfg, &cli.command);
            cfg
        }
        Command::Preset(a) => {
            if a.list {
                for p in presets() {
                    println!("{:<6} N={} n_max={:<3} {}", p.name, p.modes(), p.n_max, p.summary);
                }
                return Ok(());
            }
            let name = a.name.as_deref().ok_or_else(|| CliError::Config("preset name required (see --list)".into()))?;
            let p = preset(name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?} (see --list)")))?;
            let mut cfg = p.config(if a.desk { Scale::Desk } else { Scale::Full });
            a.overrides.apply(&mut cfg);
            if a.dump {
                print!("{}", cfg.to_toml());
                return Ok(());
            }
            cfg
        }
    };
    cfg.validate()?;
    let summary = run(&cfg)?;
    let unsafe_points = summary.points.iter().filter(|p| !p.truncation_safe()).count();
    if unsafe_points > 0 {
        log::warn!(
            "{unsafe_points} of {} points have population at the truncation edge; rerun with a larger n_max",
            summary.points.len()
        );
    }
    println!("{}", summary.output_dir.display());
    for f in &summary.files {
        println!("  {f}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
