mod check;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use higa::experiments::{refine_demo, run_experiment, RunConfig};
use higa::fem::FemSpace;
use higa::hier::io::{mesh_svg, write_mesh_file};
use higa::hier::{AdmissibleKind, HierBasis};
use higa::{Error, Execution};

#[derive(Parser)]
#[command(name = "higa", version, about = "Adaptive isogeometric Galerkin solver on hierarchical splines")]
struct Cli {
    /// Run element loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an adaptive experiment and write its CSV history and mesh snapshots.
    Run(RunArgs),
    /// Repeatedly refine the corner element and report element counts.
    RefineDemo {
        #[arg(long, default_value = "T")]
        kind: AdmissibleKind,
        #[arg(long, default_value_t = 2)]
        mu: usize,
        #[arg(long, short, default_value_t = 1)]
        p: usize,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        /// Directory for the SVG sequence.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the deterministic self-checks.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run an experiment and write its final mesh (text and SVG) and,
    /// optionally, the stiffness matrix in coordinate format.
    DumpMesh {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file with `key = value` lines.
    config: Option<PathBuf>,
    /// Start from a preset (edge-singularity, approx-class, approx-class-nonaligned).
    #[arg(long)]
    preset: Option<String>,
    /// Override a configuration key, e.g. `--set p=4`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> higa::Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    msg: e.to_string(),
                })?;
                higa::experiments::parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        if let Some(p) = &self.preset {
            pairs.push(("preset".into(), p.clone()));
        }
        RunConfig::from_pairs(pairs)?.with_overrides(&self.overrides)
    }
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        return 3;
    }
    match err {
        Error::Config(_) | Error::Argument(_) | Error::Parse { .. } => 2,
        Error::AtIteration { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn run(cli: Cli) -> higa::Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let summary = run_experiment(&cfg, exec)?;
            let last = summary.outcome.records.last().expect("at least one iteration");
            println!(
                "{} iterations, {} elements, {} dofs, eta {:.4e}; history in {}",
                summary.outcome.records.len(),
                last.n_elements,
                last.n_dofs,
                last.eta,
                summary.csv.display()
            );
        }
        Command::RefineDemo { kind, mu, p, steps, svg } => {
            let (_, report) = refine_demo(kind, mu, p, steps, svg.as_deref())?;
            println!("step,marked_level,refined,n_elements");
            for s in report {
                println!("{},{},{},{}", s.step, s.marked.level(), s.refined.len(), s.n_elements);
            }
        }
        Command::Check { seed } => {
            let results = check::run_checks(seed);
            let mut failed = 0;
            for r in &results {
                match &r.outcome {
                    Ok(()) => println!("ok    {}", r.name),
                    Err(msg) => {
                        failed += 1;
                        println!("FAIL  {}: {msg}", r.name);
                    }
                }
            }
            if failed > 0 {
                return Err(Error::Numerical(format!("{failed} of {} checks failed", results.len())));
            }
        }
        Command::DumpMesh { run, mesh, svg, matrix } => {
            let mut cfg = run.load()?;
            cfg.snapshot_every = 0;
            let summary = run_experiment(&cfg, exec)?;
            let final_mesh = &summary.outcome.mesh;
            write_mesh_file(final_mesh, &mesh)?;
            if let Some(path) = svg {
                write_text(&path, &mesh_svg(final_mesh, 512.0))?;
            }
            if let Some(path) = matrix {
                let adapt = cfg.adapt_config(exec)?;
                let basis = HierBasis::new(final_mesh, cfg.flavor)?;
                let mut space = FemSpace::new(basis, adapt.geometry.clone(), exec);
                if let Some(points) = cfg.quadrature_points() {
                    space = space.with_quadrature(points)?;
                }
                let system = space.assemble(&adapt.problem, exec)?;
                system.matrix.write_coordinate_file(&path)?;
            }
            println!("{} elements written to {}", final_mesh.num_elements(), mesh.display());
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> higa::Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
