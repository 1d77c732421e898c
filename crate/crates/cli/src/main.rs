mod commands;
mod config;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_overrides, RunConfig};

/// Differentiable garment draping: batch commands.
///
/// Every config key can be overridden with `--section.key value`, e.g.
/// `--sim.dt 0.005 --optim.groups zeta,bend`. Exit codes: 0 ok, 1 numerical
/// failure, 2 usage or config error.
#[derive(Parser)]
#[command(name = "drapefit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Drape the pattern on the posed body; writes the final OBJ, an energy
    /// log and a mesh-quality report.
    Drape(RunArgs),
    /// Fit pattern, material and body to a target garment.
    Optimize(RunArgs),
    /// Adjoint gradients against central differences, per parameter group.
    Gradcheck(RunArgs),
    /// Drape with overridden true parameters and sample a target garment.
    SynthTarget(RunArgs),
    /// Write a bundled scene as pattern, sidecar and body files.
    ExportScene(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; overrides on the command line win.
    #[arg(short, long)]
    config: Option<std::path::PathBuf>,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0.., value_name = "--SECTION.KEY VALUE")]
    overrides: Vec<String>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut groups_key = "optim.groups";
    let (run, args): (fn(&mut RunConfig) -> Result<(), commands::CmdError>, RunArgs) = match cli.command {
        Command::Drape(a) => (commands::cmd_drape, a),
        Command::Optimize(a) => (commands::cmd_optimize, a),
        Command::Gradcheck(a) => {
            groups_key = "gradcheck.groups";
            (commands::cmd_gradcheck, a)
        }
        Command::SynthTarget(a) => (commands::cmd_synth_target, a),
        Command::ExportScene(a) => (commands::cmd_export_scene, a),
    };
    let loaded = parse_overrides(&args.overrides, groups_key)
        .and_then(|(c, pairs)| RunConfig::load(c.as_deref().or(args.config.as_deref()), &pairs));
    let code = match loaded.map_err(commands::CmdError::from).and_then(|mut cfg| run(&mut cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
