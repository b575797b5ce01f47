//! `beltrami`: exponent bounds, extremal maps and residual checks from the
//! command line.
//!
//! Exit codes: 0 success, 2 invalid job, 3 ellipticity violation,
//! 4 verification failure, 1 anything else.

mod commands;
mod error;
mod job;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beltrami_core::estimator::WeightFamily;
use clap::Parser;

use crate::commands::Output;
use crate::error::CliError;
use crate::job::{
    read_coeff_file, read_config, CommandKind, Format, Job, JobSpec, Source, SweepGrid,
};

#[derive(Debug, Parser)]
#[command(
    name = "beltrami",
    version,
    about = "Hölder-exponent bounds for planar Beltrami equations"
)]
struct Args {
    /// What to run.
    #[arg(long, value_enum)]
    command: Option<CommandKind>,

    /// JSON job file; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Sharp-family M > 1. Comma-separated list for sweeps.
    #[arg(long = "M", value_delimiter = ',', num_args = 1..)]
    m: Vec<f64>,

    /// Sharp-family tau in [0, 1]. Comma-separated list for sweeps.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    tau: Vec<f64>,

    /// Radial-stretch exponent in (0, 1]. Comma-separated list for sweeps.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    alpha: Vec<f64>,

    /// JSON file `{"intervals": [{"start": θ, "mu0": .., "nu0": ..}, ..]}`.
    #[arg(long)]
    coeff_file: Option<PathBuf>,

    /// Off-center circles placed on the ring |x| = 0.3.
    #[arg(long)]
    circles: Option<usize>,

    /// Radii of the origin-centered circles.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    radii: Vec<f64>,

    /// Pieces of the piecewise-constant weight search.
    #[arg(long)]
    weight_pieces: Option<usize>,

    /// Angular nodes per circle.
    #[arg(long)]
    nodes: Option<usize>,

    /// Weight candidates: constant, remark, piecewise or all.
    #[arg(long)]
    family: Option<WeightFamily>,

    /// Optimizer multi-starts per circle.
    #[arg(long)]
    starts: Option<usize>,

    /// Seed for the optimizer's random restarts.
    #[arg(long)]
    seed: Option<u64>,

    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Largest accepted Beltrami residual.
    #[arg(long)]
    tolerance: Option<f64>,

    /// Negate μ before checking, as a negative control.
    #[arg(long)]
    flip_mu: bool,
}

fn single(name: &str, v: &[f64]) -> Result<f64, CliError> {
    match v {
        [x] => Ok(*x),
        _ => Err(CliError::spec(format!(
            "--{name} takes one value outside sweeps"
        ))),
    }
}

fn merge(args: Args) -> Result<JobSpec, CliError> {
    let mut spec = match &args.config {
        Some(p) => read_config(p)?,
        None => JobSpec::default(),
    };
    if args.command.is_some() {
        spec.command = args.command;
    }
    let sharp = !args.m.is_empty() || !args.tau.is_empty();
    let given = sharp as u8 + !args.alpha.is_empty() as u8 + args.coeff_file.is_some() as u8;
    if spec.command == Some(CommandKind::Sweep) {
        if args.coeff_file.is_some() {
            return Err(CliError::spec("sweep does not take --coeff-file"));
        }
        if given > 0 {
            spec.sweep = Some(SweepGrid {
                m: args.m,
                tau: args.tau,
                alpha: args.alpha,
            });
        }
    } else if given > 1 {
        return Err(CliError::spec(
            "give exactly one of --M/--tau, --alpha, --coeff-file",
        ));
    } else if sharp {
        if args.m.is_empty() || args.tau.is_empty() {
            return Err(CliError::spec("the sharp family needs both --M and --tau"));
        }
        spec.source = Some(Source::Sharp {
            m: single("M", &args.m)?,
            tau: single("tau", &args.tau)?,
        });
    } else if !args.alpha.is_empty() {
        spec.source = Some(Source::RadialStretch {
            alpha: single("alpha", &args.alpha)?,
        });
    } else if let Some(p) = &args.coeff_file {
        spec.source = Some(read_coeff_file(p)?);
    }
    let r = &mut spec.resolution;
    r.nodes = args.nodes.or(r.nodes);
    r.circles = args.circles.or(r.circles);
    if !args.radii.is_empty() {
        r.radii = Some(args.radii);
    }
    r.weight_pieces = args.weight_pieces.or(r.weight_pieces);
    r.family = args.family.or(r.family);
    r.starts = args.starts.or(r.starts);
    r.seed = args.seed.or(r.seed);
    r.tolerance = args.tolerance.or(r.tolerance);
    spec.format = args.format.or(spec.format);
    spec.out = args.out.or(spec.out);
    spec.flip_mu |= args.flip_mu;
    Ok(spec)
}

fn run(job: &Job) -> Result<Output, CliError> {
    match job.command {
        CommandKind::Estimate => commands::estimate(job),
        CommandKind::Sharp => commands::sharp(job),
        CommandKind::Verify => commands::verify(job),
        CommandKind::Sweep => commands::sweep(job),
    }
}

fn sink(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(out: &Output, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let write = || -> io::Result<()> {
        let mut w = sink(path)?;
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut w, &out.json)?;
                writeln!(w)?;
            }
            Format::Csv => out.table.write(&mut w)?,
        }
        w.flush()
    };
    match write() {
        // a closed pipe (`| head`) is not an error
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

/// Error report written to `--out` so that callers reading the file see
/// why there are no results.
fn emit_error(e: &CliError, path: Option<&Path>) {
    if let Some(p) = path {
        if let Ok(text) = serde_json::to_string_pretty(&e.to_json()) {
            let _ = std::fs::write(p, text + "\n");
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut out_path = args.out.clone();
    let result = merge(args).and_then(|spec| {
        out_path = spec.out.clone();
        spec.into_job()
    });
    let outcome = result.and_then(|job| {
        let out = run(&job)?;
        emit(&out, job.format, job.out.as_deref())?;
        match out.failure {
            Some(f) => Err(f),
            None => Ok(()),
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if !matches!(e, CliError::Verification(_)) {
                emit_error(&e, out_path.as_deref());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
