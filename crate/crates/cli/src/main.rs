use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use dirctl_core::config::RunConfig;
use dirctl_core::control::{solve_control, ControlSolution};
use dirctl_core::fem::FeSpace;
use dirctl_core::geometry::BuiltinDomain;
use dirctl_core::mesh::TriMesh;
use dirctl_core::solvers::set_thread_count;
use dirctl_core::study::run_study;
use dirctl_core::{Error, Result};

const PRESETS: [(&str, &str); 6] = [
    ("table1", include_str!("../presets/table1.json")),
    ("table2", include_str!("../presets/table2.json")),
    ("table3", include_str!("../presets/table3.json")),
    ("table3_mirrored", include_str!("../presets/table3_mirrored.json")),
    ("bvp_smooth", include_str!("../presets/bvp_smooth.json")),
    ("bvp_singular", include_str!("../presets/bvp_singular.json")),
];

/// Thread cap for sparse factorizations; unset means sequential.
const THREADS_ENV: &str = "DIRCTL_THREADS";

#[derive(Parser)]
#[command(name = "dirctl", version, about = "Energy-regularized Dirichlet boundary control on polygons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the builtin domains.
    Domains,
    /// Solve one control problem and write the discrete fields.
    SolveControl {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a convergence study and write CSV and Markdown tables.
    Study {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        "config" => 2,
        "input" => 3,
        "solver" => 4,
        _ => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error[{}]: {e}", e.category());
        return ExitCode::from(exit_code(&e));
    }
    let result = match cli.command {
        Command::Domains => domains(),
        Command::SolveControl { config, out } => read_config(&config).and_then(|c| solve(&c, &out)),
        Command::Study { preset, config, out } => {
            let cfg = match (preset, config) {
                (Some(name), _) => preset_config(&name),
                (None, Some(path)) => read_config(&path),
                (None, None) => unreachable!("clap requires one of --preset/--config"),
            };
            cfg.and_then(|c| study(&c, &out))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads() -> Result<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a nonnegative integer, got `{v}`")))?,
        Err(_) => 1,
    };
    set_thread_count(threads);
    Ok(())
}

fn read_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    RunConfig::from_json(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        e => e,
    })
}

fn preset_config(name: &str) -> Result<RunConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
        Error::Config(format!("unknown preset `{name}` (expected one of {})", names.join(", ")))
    })?;
    RunConfig::from_json(text)
}

fn domains() -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<10} {:>10} {:>10}  vertices", "name", "omega_max", "lambda_bar")?;
    for which in BuiltinDomain::ALL {
        let d = which.domain();
        let verts: Vec<String> = d.vertices().iter().map(|p| format!("({}, {})", p[0], p[1])).collect();
        writeln!(
            out,
            "{:<10} {:>10} {:>10.4}  {}",
            which.name(),
            format!("{:.4}π", d.max_angle() / std::f64::consts::PI),
            d.lambda_bar(),
            verts.join(" ")
        )?;
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn solve(config: &RunConfig, out: &Path) -> Result<()> {
    let level = config.solve_level()?;
    let problem = config.control_problem()?;
    let mesh = config.domain_choice()?.initial_mesh()?.refine_n(level);
    let space = FeSpace::with_settings(mesh, config.solver_settings())?;
    let start = Instant::now();
    let solution = solve_control(&problem, &space, &config.gmres())?;
    let seconds = start.elapsed().as_secs_f64();

    fs::create_dir_all(out)?;
    space.mesh().write_text(BufWriter::new(fs::File::create(out.join("mesh.txt"))?))?;
    write_fields(space.mesh(), &solution, BufWriter::new(fs::File::create(out.join("solution.txt"))?))?;
    let summary = json!({
        "domain": config.domain_choice()?.name(),
        "level": level,
        "nodes": space.num_nodes(),
        "boundary_nodes": space.num_boundary(),
        "objective": solution.objective,
        "gmres_iterations": solution.gmres_iterations,
        "gmres_residual": solution.gmres_residual,
        "optimality_residual": solution.optimality_residual,
        "seconds": seconds,
    });
    write_file(out, "summary.json", &serde_json::to_string_pretty(&summary).expect("json"))?;
    write_file(out, "config.json", &config.resolved().to_json())?;
    println!(
        "objective {:.10e}  gmres iterations {}  optimality residual {:.3e}",
        solution.objective, solution.gmres_iterations, solution.optimality_residual
    );
    Ok(())
}

/// Nodal values of `u` and `p`, then `z` on the boundary nodes.
fn write_fields<W: Write>(mesh: &TriMesh, s: &ControlSolution, mut w: W) -> Result<()> {
    writeln!(w, "dirctl-fields 1")?;
    writeln!(w, "nodes {} u p", s.u.len())?;
    for (u, p) in s.u.iter().zip(&s.p) {
        writeln!(w, "{u:?} {p:?}")?;
    }
    writeln!(w, "boundary {} node z", s.z.len())?;
    for (node, z) in mesh.boundary_nodes().iter().zip(&s.z) {
        writeln!(w, "{node} {z:?}")?;
    }
    w.flush()?;
    Ok(())
}

fn study(config: &RunConfig, out: &Path) -> Result<()> {
    let study = config.study_config()?;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let table = run_study(&study, &mut |msg| eprintln!("[{:7.1}s] {msg}", start.elapsed().as_secs_f64()))?;

    write_file(out, "table.csv", &table.to_csv())?;
    let markdown = table.to_markdown();
    write_file(out, "table.md", &markdown)?;
    write_file(out, "config.json", &config.resolved().to_json())?;
    let final_eoc: serde_json::Map<_, _> =
        table.metric_names.iter().map(|m| (m.clone(), json!(table.final_eoc(m)))).collect();
    let summary = json!({
        "domain": study.domain.name(),
        "lambda_bar": study.domain.domain().lambda_bar(),
        "metrics": table.metric_names,
        "theory": table.theory,
        "final_eoc": final_eoc,
        "levels": table.levels,
        "seconds": start.elapsed().as_secs_f64(),
    });
    write_file(out, "summary.json", &serde_json::to_string_pretty(&summary).expect("json"))?;
    print!("{markdown}");
    Ok(())
}
