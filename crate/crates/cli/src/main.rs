use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use orbits_cli::job::{export_orbit, Status};
use orbits_cli::{run_job, Command, ExportFormat, OrbitFile};

#[derive(Parser)]
#[command(
    name = "orbits",
    version,
    about = "Regularized periodic orbits of planar Stark-Zeeman systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Job,
}

#[derive(clap::Args)]
struct JobArgs {
    /// Job configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Job {
    /// Find a critical loop from a seed and verify it.
    Solve(JobArgs),
    /// Re-verify an existing orbit file.
    Verify(JobArgs),
    /// Continue a solution along a one-parameter family of models.
    Continue(JobArgs),
    /// Apply the blow-up map to a z-loop file.
    Map(JobArgs),
    /// Export an orbit file as csv or svg-path.
    Export {
        #[arg(long)]
        orbit: PathBuf,
        /// `csv` or `svg-path`.
        #[arg(long)]
        format: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Uniform time nodes; defaults to twice the loop resolution.
        #[arg(long)]
        nodes: Option<usize>,
    },
}

fn export(orbit: PathBuf, format: &str, out: PathBuf, nodes: Option<usize>) -> Result<PathBuf, (Status, String)> {
    let format = match format {
        "csv" => ExportFormat::Csv,
        "svg" | "svg-path" => ExportFormat::SvgPath,
        other => return Err((Status::InvalidConfig, format!("unknown export format `{other}`"))),
    };
    let file = OrbitFile::read(&orbit).map_err(|e| (Status::InvalidConfig, format!("{e:#}")))?;
    let stem = orbit
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "orbit".into());
    let nodes = nodes.unwrap_or(2 * file.z.len());
    export_orbit(&file, format, nodes, &out, &stem).map_err(|e| (e.status, e.message))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = !e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if informational { 0 } else { Status::InvalidConfig.code() });
        }
    };
    let (command, args) = match cli.command {
        Job::Solve(a) => (Command::Solve, a),
        Job::Verify(a) => (Command::Verify, a),
        Job::Continue(a) => (Command::Continue, a),
        Job::Map(a) => (Command::Map, a),
        Job::Export {
            orbit,
            format,
            out,
            nodes,
        } => {
            return match export(orbit, &format, out, nodes) {
                Ok(path) => {
                    println!("{}", path.display());
                    ExitCode::SUCCESS
                }
                Err((status, message)) => {
                    eprintln!("error: {message}");
                    ExitCode::from(status.code())
                }
            };
        }
    };
    match run_job(command, &args.config, args.out.as_deref()) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.status == Status::Ok {
                eprintln!("{}", outcome.summary);
            } else {
                eprintln!("error: {}", outcome.summary);
            }
            ExitCode::from(outcome.status.code())
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.status.code())
        }
    }
}
