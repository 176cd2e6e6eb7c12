use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use rigid_coverage::bearing::{rigidity_rank, Framework, DEFAULT_RANK_TOL};
use rigid_coverage::coverage::{centroids, coverage_cost, voronoi_partition, Point};
use rigid_coverage::error::{Error, Result};
use rigid_coverage::graph::{henneberg_generate, laman_check, Graph};
use rigid_coverage::recovery::{apply_repair, build_recovery_plan, closing_ranks};
use rigid_coverage::sim::{self, SimConfig};

#[derive(Parser)]
#[command(name = "rigid-coverage", version, about = "Rigidity-preserving multi-robot coverage control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Graph utilities.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Bearing rigidity of a framework.
    Rigidity {
        #[command(subcommand)]
        command: RigidityCommand,
    },
    /// Repair a graph after losing a vertex, or precompute all repairs.
    #[command(args_conflicts_with_subcommands = true)]
    Recover {
        #[command(subcommand)]
        command: Option<RecoverCommand>,
        /// Graph JSON ({"n": .., "edges": [[i, j], ..]}).
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Index of the lost vertex.
        #[arg(long)]
        lose: Option<usize>,
    },
    /// Coverage quantities for given robot positions.
    Coverage {
        #[command(subcommand)]
        command: CoverageCommand,
    },
    /// Run a closed-loop simulation and write its trace files.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configuration's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a simulation configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Random minimally rigid graph by Henneberg construction.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        split_prob: f64,
        /// Write the graph here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum RigidityCommand {
    /// Rank report for a framework JSON ({"n", "edges", "dim", "positions"}).
    Check {
        framework: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum RecoverCommand {
    /// Repairs for every possible single loss.
    Plan {
        #[arg(long)]
        graph: PathBuf,
        /// Write the plan here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CoverageCommand {
    /// Coverage cost and cell centroids. Region, density and quadrature
    /// come from a simulation config.
    Cost {
        #[arg(long)]
        config: PathBuf,
        /// JSON list of `[x, y]`; defaults to the config's robot positions.
        #[arg(long)]
        positions: Option<PathBuf>,
    },
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_or_print(value: &impl serde::Serialize, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            let text = serde_json::to_string_pretty(value)?;
            std::fs::write(&path, text + "\n").map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })
        }
        None => print(value),
    }
}

fn print(value: &impl serde::Serialize) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io { path: "<stdout>".into(), source: e }),
        _ => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Graph { command: GraphCommand::Gen { n, seed, split_prob, out } } => {
            let build = henneberg_generate(n, seed, split_prob)?;
            match out {
                Some(path) => write_or_print(&build.graph, Some(path)),
                None => print(&build),
            }
        }
        Command::Rigidity { command: RigidityCommand::Check { framework, tol } } => {
            let fw: Framework = read_json(&framework)?;
            let report = rigidity_rank(&fw, tol)?;
            let bound = fw.trivial_rank_bound();
            let ibr = report.rank == bound;
            // the singular value that has to be nonzero for rigidity
            let smallest = bound.checked_sub(1).and_then(|i| report.singular_values.get(i).copied());
            print(&json!({
                "rank": report.rank,
                "trivial_bound": bound,
                "ibr": ibr,
                "smallest_nontrivial_singular_value": smallest,
                "singular_values": report.singular_values,
            }))
        }
        Command::Recover { command: Some(RecoverCommand::Plan { graph, out }), .. } => {
            let g: Graph = read_json(&graph)?;
            write_or_print(&build_recovery_plan(&g)?, out)
        }
        Command::Recover { command: None, graph, lose } => {
            let (Some(graph), Some(lost)) = (graph, lose) else {
                return Err(Error::Config("recover needs --graph and --lose (or the `plan` subcommand)".into()));
            };
            let g: Graph = read_json(&graph)?;
            let repair = closing_ranks(&g, lost)?;
            let repaired = apply_repair(&g, lost, &repair.new_edges)?;
            let laman = laman_check(&repaired)?.is_laman;
            print(&json!({ "repair": repair, "graph": repaired, "laman": laman }))
        }
        Command::Coverage { command: CoverageCommand::Cost { config, positions } } => {
            let cfg = SimConfig::load(&config)?;
            cfg.density.validate()?;
            let raw: Vec<[f64; 2]> = match positions {
                Some(path) => read_json(&path)?,
                None => cfg.robots.iter().map(|r| r.position).collect(),
            };
            let p: Vec<Point> = raw.iter().map(|q| Point::new(q[0], q[1])).collect();
            let partition = voronoi_partition(&p, &cfg.region)?;
            let cost = coverage_cost(&p, &partition, &cfg.density, &cfg.quadrature)?;
            let c: Vec<[f64; 2]> = centroids(&partition, &cfg.density, &cfg.quadrature)?
                .iter()
                .map(|c| [c.x, c.y])
                .collect();
            print(&json!({ "cost": cost, "centroids": c }))
        }
        Command::Simulate { config, out, seed } => {
            let mut cfg = SimConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let trace = sim::run(&cfg)?;
            sim::export(&trace, &out)?;
            log::info!("wrote {} steps to {}", trace.records.len(), out.display());
            Ok(())
        }
        Command::Validate { config } => {
            SimConfig::load(&config)?.validate()?;
            eprintln!("{}: ok", config.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
