use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand};
use traffic_em::config::WORKERS_ENV;
use traffic_em::{commands, CliError, Profile, RunConfig};

static FIELDS: LazyLock<String> = LazyLock::new(|| {
    format!(
        "Configuration fields with their defaults (profile sliding-big). Any of them can be\n\
         set in the --config file or with --set section.field=value; {WORKERS_ENV}\n\
         overrides scheduler.workers.\n\n{}\n\
         Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime failure.",
        RunConfig::default().to_toml()
    )
});

#[derive(Parser)]
#[command(name = "traffic-em", version, about = "Link travel-time estimation from trajectory feeds")]
#[command(after_help = FIELDS.as_str())]
struct Cli {
    #[command(flatten)]
    common: Common,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

/// Accepted both before and after the subcommand; `--set` values from both
/// places apply, those after the subcommand last.
#[derive(Args, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Named preset applied before the configuration file.
    #[arg(long, short, value_enum)]
    profile: Option<Profile>,
    /// Override one field, e.g. --set em.num_samples=20.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic network, training feed, held-out pieces and truth.
    Simulate(Common),
    /// Estimate over the whole feed without the streaming engine.
    RunOffline(Common),
    /// Replay the feed through the streaming engine.
    RunStreaming(Common),
    /// Score held-out pieces against an estimate file.
    Evaluate(Common),
    /// Find the fastest replay rate without deadline misses.
    Bench(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::RunOffline(c)
            | Command::RunStreaming(c)
            | Command::Evaluate(c)
            | Command::Bench(c) => c,
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let none = Common::default();
    let sub = cli.command.as_ref().map_or(&none, Command::common);
    let top = &cli.common;
    let sets: Vec<String> = top.sets.iter().chain(&sub.sets).cloned().collect();
    let env = std::env::var(WORKERS_ENV).ok();
    let cfg = RunConfig::load(
        sub.config.as_deref().or(top.config.as_deref()),
        sub.profile.or(top.profile),
        env.as_deref(),
        &sets,
    )?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(CliError::Config("no command given; see --help".into()));
    };
    let summary = match command {
        Command::Simulate(_) => commands::simulate(&cfg)?,
        Command::RunOffline(_) => commands::run_offline(&cfg)?,
        Command::RunStreaming(_) => commands::run_streaming(&cfg)?,
        Command::Evaluate(_) => commands::evaluate(&cfg)?,
        Command::Bench(_) => commands::bench(&cfg)?,
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("traffic-em: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
