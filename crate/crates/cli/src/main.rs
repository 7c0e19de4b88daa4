//! Command-line experiment runner for the formflow library.

use clap::{Args, Parser, Subcommand};
use formflow::harness::{
    parse_config_file, run_experiment, CsvRow, ExperimentId, ExperimentSpec,
};
use formflow::schemes::SchemeKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "formflow", about = "Convection-diffusion studies for discrete differential forms", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in experiment sweep and write a CSV report.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment id: I, II, III or IV
    #[arg(long)]
    experiment: Option<String>,

    /// Scheme names (repeatable): sl-direct, sl-adjoint,
    /// eul-implicit-standard, eul-implicit-upwind, eul-semi-implicit-upwind
    #[arg(long = "scheme")]
    schemes: Vec<String>,

    /// CFL numbers (repeatable)
    #[arg(long = "cfl")]
    cfls: Vec<f64>,

    /// Comma-separated refinement ladder, e.g. 8,16,32
    #[arg(long)]
    refinements: Option<String>,

    /// Diffusion coefficient(s), repeatable
    #[arg(long = "epsilon")]
    epsilons: Vec<f64>,

    /// Final time
    #[arg(long)]
    t_end: Option<f64>,

    /// Output CSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Directory for VTK snapshots of final states
    #[arg(long)]
    vtk: Option<PathBuf>,

    /// Flat key=value configuration file applied before the flags
    #[arg(long)]
    config: Option<PathBuf>,
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec, formflow::Error> {
    // precedence: defaults of the experiment, then config file, then flags
    let id = match (&args.config, &args.experiment) {
        (_, Some(e)) => ExperimentId::parse(e)?,
        (Some(path), None) => {
            // peek at the file for the experiment id
            let text = std::fs::read_to_string(path)?;
            let mut probe = ExperimentSpec::defaults(ExperimentId::I);
            parse_config_file(&text, &mut probe)?;
            probe.id
        }
        (None, None) => {
            return Err(formflow::Error::InvalidArgument(
                "--experiment (or a config file naming one) is required".into(),
            ))
        }
    };
    let mut spec = ExperimentSpec::defaults(id);
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        parse_config_file(&text, &mut spec)?;
        spec.id = id;
    }
    if !args.schemes.is_empty() {
        spec.schemes = args
            .schemes
            .iter()
            .map(|s| SchemeKind::parse(s))
            .collect::<Result<_, _>>()?;
    }
    if !args.cfls.is_empty() {
        spec.cfls = args.cfls.clone();
    }
    if let Some(r) = &args.refinements {
        spec.refinements = r
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| formflow::Error::Parse(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
    }
    if !args.epsilons.is_empty() {
        spec.epsilons = args.epsilons.clone();
    }
    if let Some(t) = args.t_end {
        spec.t_end = t;
    }
    spec.out = args.out.clone();
    spec.vtk_dir = args.vtk.clone();
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let spec = match build_spec(&args) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match run_experiment(&spec) {
                Ok(report) => {
                    if spec.out.is_none() {
                        println!("{}", CsvRow::header());
                        for row in &report.rows {
                            println!("{}", row.to_csv());
                        }
                    } else {
                        eprintln!(
                            "wrote {} rows to {}",
                            report.rows.len(),
                            spec.out.as_ref().unwrap().display()
                        );
                    }
                    if report.all_completed {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("some cells failed; see the status column");
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
