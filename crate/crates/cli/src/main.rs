//! `fitdae` command-line driver.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fitdae::bench::{builtin, load_scene, run_benchmark, BenchmarkScene, Overrides, BUILTIN_IDS};
use fitdae::linsolve::write_matrix_market;
use fitdae::{index_probe, Error, Formulation, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "fitdae", version, about = "FIT Maxwell grid equations as DAE systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scene and write the observable series as CSV.
    Simulate {
        /// Scene JSON file or built-in scene id.
        #[arg(long)]
        scene: String,
        /// Formulation tag overriding the scene default.
        #[arg(long)]
        formulation: Option<String>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Summary JSON destination. When absent the summary goes to standard output, or to
        /// standard error if the CSV already occupies standard output.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Skip the dense index probe in the summary.
        #[arg(long)]
        no_index: bool,
    },
    /// Run the index probe on the assembled pencil and print the report as JSON.
    AnalyzeIndex {
        #[arg(long)]
        scene: String,
        /// Formulation tags; every formulation the scene supports when absent.
        #[arg(long, value_delimiter = ',')]
        formulation: Vec<String>,
        #[arg(long)]
        rank_tol: Option<f64>,
    },
    /// Write the pencil matrices `M` and `K` of a formulation.
    ExportOperators {
        #[arg(long)]
        scene: String,
        #[arg(long)]
        formulation: Option<String>,
        #[arg(long, value_enum, default_value = "matrixmarket")]
        format: Format,
        /// Directory receiving `M.mtx` and `K.mtx`.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Built-in scene fixtures.
    Scene {
        #[command(subcommand)]
        action: SceneAction,
    },
}

#[derive(Subcommand)]
enum SceneAction {
    /// List the built-in scene ids.
    List,
    /// Write a built-in scene as JSON.
    Export {
        id: String,
        /// Destination file; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Matrixmarket,
}

fn formulation(tag: &Option<String>, scene: &BenchmarkScene) -> Result<Formulation> {
    tag.as_deref().map_or(Ok(scene.formulation), str::parse)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_text(path: Option<&Path>, text: &str, fallback: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => create(p)?.write_all(text.as_bytes())?,
        None => fallback.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scene, formulation: tag, dt, t_end, output, summary, no_index } => {
            let scene = load_scene(&scene)?;
            let overrides =
                Overrides { formulation: Some(formulation(&tag, &scene)?), dt, t_end, probe_index: Some(!no_index) };
            let run = run_benchmark(&scene, &overrides)?;
            match &output {
                Some(p) => {
                    let mut w = create(p)?;
                    run.series.write_csv(&mut w)?;
                    w.flush()?;
                }
                None => run.series.write_csv(io::stdout().lock())?,
            }
            let text = serde_json::to_string_pretty(&run.summary)? + "\n";
            if output.is_some() {
                write_text(summary.as_deref(), &text, &mut io::stdout())
            } else {
                write_text(summary.as_deref(), &text, &mut io::stderr())
            }
        }
        Command::AnalyzeIndex { scene, formulation: tags, rank_tol } => {
            let scene = load_scene(&scene)?;
            let problem = scene.problem()?;
            let wanted: Vec<Formulation> = if tags.is_empty() {
                Formulation::ALL.to_vec()
            } else {
                tags.iter().map(|t| t.parse()).collect::<Result<_>>()?
            };
            let mut reports = Vec::new();
            for f in wanted {
                let sys = match problem.assemble(f) {
                    Ok(sys) => sys,
                    Err(e) if !tags.is_empty() => return Err(e),
                    Err(e) => {
                        reports.push(json!({ "formulation": f, "skipped": e.to_string() }));
                        continue;
                    }
                };
                let report = index_probe(&sys.m, &sys.k, rank_tol)?;
                reports.push(json!({
                    "formulation": f,
                    "expected_index": sys.expected_index,
                    "report": report,
                }));
            }
            println!("{}", serde_json::to_string_pretty(&json!({ "scene": scene.id, "results": reports }))?);
            Ok(())
        }
        Command::ExportOperators { scene, formulation: tag, format: Format::Matrixmarket, out_dir } => {
            let scene = load_scene(&scene)?;
            let f = formulation(&tag, &scene)?;
            let sys = scene.problem()?.assemble(f)?;
            std::fs::create_dir_all(&out_dir)?;
            for (name, a) in [("M", &sys.m), ("K", &sys.k)] {
                let mut w = create(&out_dir.join(format!("{name}.mtx")))?;
                write_matrix_market(a, &mut w)?;
                w.flush()?;
            }
            println!("{}", json!({ "formulation": f, "dofs": sys.dim(), "dir": out_dir }));
            Ok(())
        }
        Command::Scene { action: SceneAction::List } => {
            BUILTIN_IDS.iter().for_each(|id| println!("{id}"));
            Ok(())
        }
        Command::Scene { action: SceneAction::Export { id, output } } => {
            let text = builtin(&id)?.to_json()? + "\n";
            write_text(output.as_deref(), &text, &mut io::stdout())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
