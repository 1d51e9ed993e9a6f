use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sparse_medoids::experiment::{k_table, loss_table, sweep_tsv};
use sparse_medoids::graph::default_candidates;
use sparse_medoids::matrix::read_penalties;
use sparse_medoids::{
    brute_force, central_points, run_experiment, sweep_max_cost, synth_grid, truncated_costs, Coverage, DynMode,
    ExperimentPlan, InitMethod, InstanceGraph, RunOptions, RunReport, SparseCostMatrix, SweepOptions,
};

/// Exit status for a run that ended infeasible in strict mode.
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "sparse-medoids",
    version,
    about = "Sparse k-medoids with a dynamic number of medoids"
)]
struct Cli {
    /// Worker threads (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a truncated shortest-path cost matrix from a graph
    BuildMatrix(BuildMatrixArgs),
    /// Initialize and refine medoids over several restarts
    Solve(SolveArgs),
    /// Exhaustive optimum for every k up to a limit (small candidate sets)
    Oracle(OracleArgs),
    /// Table of k, runtime, changes and success per init and swap variant
    Bench(BenchArgs),
    /// Sparsity and best k as the maximum cost grows
    Sweep(SweepArgs),
    /// Mean, per-axis median, geometric median and medoid of 2-D points
    CentralPoints(CentralPointsArgs),
}

#[derive(Args)]
struct GraphSource {
    /// Graph text file
    #[arg(long, conflicts_with = "grid")]
    graph: Option<PathBuf>,
    /// Synthetic grid WIDTHxHEIGHT instead of a graph file
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
    /// Fraction of grid nodes that carry demand
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    /// Seed of the synthetic grid
    #[arg(long, default_value_t = 0)]
    grid_seed: u64,
}

#[derive(Args)]
struct MatrixSource {
    /// Sparse matrix text file
    #[arg(long, conflicts_with_all = ["graph", "grid"])]
    matrix: Option<PathBuf>,
    /// Per-demand penalty file (default 1.0 each)
    #[arg(long, requires = "matrix")]
    penalties: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphSource,
    /// Maximum cost when building from a graph
    #[arg(long)]
    max_cost: Option<f64>,
    #[arg(long, default_value_t = 3)]
    candidate_min_degree: usize,
    /// Multiply path lengths by demand load
    #[arg(long)]
    load_weighted: bool,
}

#[derive(Args)]
struct BuildMatrixArgs {
    #[command(flatten)]
    graph: GraphSource,
    #[arg(long)]
    max_cost: f64,
    #[arg(long, default_value_t = 3)]
    candidate_min_degree: usize,
    #[arg(long)]
    load_weighted: bool,
    /// Matrix output (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write unit penalties here
    #[arg(long)]
    penalties_out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: MatrixSource,
    /// dynbuild, sparsepp, random:<percent> or random-k:<count>
    #[arg(long, default_value = "dynbuild")]
    init: InitMethod,
    /// Target k for the initialization
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Which dynamic steps the swap phase may take
    #[arg(long = "dyn", default_value = "down")]
    variant: DynMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
    /// Skip unreachable demands instead of failing
    #[arg(long)]
    lenient: bool,
    /// Cross-check incremental caches after every change (slow)
    #[arg(long)]
    verify: bool,
    /// JSON report (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    penalties: Option<PathBuf>,
    #[arg(long)]
    k_max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    source: MatrixSource,
    /// Initializations, comma separated
    #[arg(long, value_delimiter = ',', default_value = "dynbuild,sparsepp,random:5")]
    init: Vec<InitMethod>,
    /// Swap variants, comma separated
    #[arg(long = "dyn", value_delimiter = ',', default_value = "down,both")]
    variants: Vec<DynMode>,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
    #[arg(long)]
    lenient: bool,
    /// JSON with every report and summary
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    graph: GraphSource,
    /// Ascending maximum costs, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    thresholds: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    candidate_min_degree: usize,
    #[arg(long)]
    load_weighted: bool,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    max_sweeps: usize,
    /// TSV output (stdout if omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CentralPointsArgs {
    /// One `x y` pair per line
    #[arg(long)]
    points: PathBuf,
    /// JSON output; the table always goes to stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let w = w.parse().map_err(|_| format!("bad width {w:?}"))?;
    let h = h.parse().map_err(|_| format!("bad height {h:?}"))?;
    Ok((w, h))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let outcome = match cli.command {
        Command::BuildMatrix(a) => build_matrix(a),
        Command::Solve(a) => solve(a),
        Command::Oracle(a) => oracle(a),
        Command::Bench(a) => bench(a),
        Command::Sweep(a) => sweep(a),
        Command::CentralPoints(a) => points(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

impl GraphSource {
    fn load(&self) -> Result<Option<InstanceGraph>> {
        Ok(match (&self.graph, self.grid) {
            (Some(p), _) => Some(InstanceGraph::read_text(open(p)?).with_context(|| p.display().to_string())?),
            (None, Some((w, h))) => Some(synth_grid(w, h, self.density, self.grid_seed)?),
            (None, None) => None,
        })
    }
}

impl MatrixSource {
    fn load(&self) -> Result<SparseCostMatrix> {
        if let Some(path) = &self.matrix {
            let m = SparseCostMatrix::read_text(open(path)?, None).with_context(|| path.display().to_string())?;
            return match &self.penalties {
                Some(p) => {
                    let pi = read_penalties(open(p)?, m.n_demand()).with_context(|| p.display().to_string())?;
                    let entries: Vec<_> = m.entries().collect();
                    Ok(SparseCostMatrix::new(
                        m.n_demand(),
                        m.n_candidates(),
                        entries,
                        Some(pi),
                    )?)
                }
                None => Ok(m),
            };
        }
        let g = self
            .graph
            .load()?
            .ok_or_else(|| anyhow!("one of --matrix, --graph or --grid is required"))?;
        let max_cost = self
            .max_cost
            .ok_or_else(|| anyhow!("--max-cost is required with a graph"))?;
        let cands = default_candidates(&g, self.candidate_min_degree);
        Ok(truncated_costs(&g, &cands, max_cost, self.load_weighted)?)
    }
}

fn build_matrix(a: BuildMatrixArgs) -> Result<ExitCode> {
    let g = a
        .graph
        .load()?
        .ok_or_else(|| anyhow!("one of --graph or --grid is required"))?;
    let cands = default_candidates(&g, a.candidate_min_degree);
    let m = truncated_costs(&g, &cands, a.max_cost, a.load_weighted)?;
    log::info!(
        "{} demands, {} candidates, {} entries, sparsity {:.2}%",
        m.n_demand(),
        m.n_candidates(),
        m.nnz(),
        100.0 * m.sparsity()
    );
    let isolated = m.isolated_demands().len();
    if isolated > 0 {
        log::warn!("{isolated} demands have no candidate within {}", a.max_cost);
    }
    let mut w = output(a.out.as_deref())?;
    m.write_text(&mut w)?;
    w.flush()?;
    if let Some(p) = &a.penalties_out {
        let mut w = output(Some(p))?;
        m.write_penalties(&mut w)?;
        w.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Feasible first, then lowest loss, then fewest medoids.
fn best_report(reports: &[RunReport]) -> Option<&RunReport> {
    reports.iter().min_by(|a, b| {
        b.feasible
            .cmp(&a.feasible)
            .then(a.loss.compare(&b.loss))
            .then(a.k_after_swap.cmp(&b.k_after_swap))
    })
}

fn solve(a: SolveArgs) -> Result<ExitCode> {
    let m = a.source.load()?;
    let isolated = m.isolated_demands();
    if !isolated.is_empty() && !a.lenient {
        eprintln!(
            "infeasible: {} demands have no candidate (first: {}); use --lenient to skip them",
            isolated.len(),
            isolated[0]
        );
        return Ok(ExitCode::from(EXIT_INFEASIBLE));
    }
    if a.restarts == 0 {
        bail!("--restarts must be at least 1");
    }
    let plan = ExperimentPlan {
        inits: vec![a.init],
        variants: vec![a.variant],
        restarts: a.restarts,
        base_seed: a.seed,
        options: RunOptions {
            k: a.k,
            max_sweeps: a.max_sweeps,
            coverage: if a.lenient { Coverage::Lenient } else { Coverage::Strict },
            verify: a.verify,
        },
        threads: 0,
    };
    let res = run_experiment(&m, &plan)?;
    if let Some(f) = res.failures.first() {
        bail!("run with seed {} failed: {}", f.seed, f.error);
    }
    let best = best_report(&res.reports).cloned();
    write_json(
        a.out.as_deref(),
        &json!({
            "schema_version": res.schema_version,
            "best": best,
            "reports": res.reports,
            "summaries": res.summaries,
        }),
    )?;
    match best {
        Some(b) if !b.feasible && !a.lenient => {
            eprintln!("infeasible: best run leaves penalty {}", b.loss.penalty);
            Ok(ExitCode::from(EXIT_INFEASIBLE))
        }
        _ => Ok(ExitCode::SUCCESS),
    }
}

fn oracle(a: OracleArgs) -> Result<ExitCode> {
    let source = MatrixSource {
        matrix: Some(a.matrix),
        penalties: a.penalties,
        graph: GraphSource {
            graph: None,
            grid: None,
            density: 0.0,
            grid_seed: 0,
        },
        max_cost: None,
        candidate_min_degree: 0,
        load_weighted: false,
    };
    let m = source.load()?;
    let res = brute_force(&m, a.k_max)?;
    write_json(a.out.as_deref(), &serde_json::to_value(&res)?)?;
    Ok(ExitCode::SUCCESS)
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    let m = a.source.load()?;
    println!(
        "{} demands, {} candidates, {} entries, sparsity {:.2}%\n",
        m.n_demand(),
        m.n_candidates(),
        m.nnz(),
        100.0 * m.sparsity()
    );
    let plan = ExperimentPlan {
        inits: a.init,
        variants: a.variants,
        restarts: a.restarts,
        base_seed: a.seed,
        options: RunOptions {
            k: a.k,
            max_sweeps: a.max_sweeps,
            coverage: if a.lenient { Coverage::Lenient } else { Coverage::Strict },
            verify: false,
        },
        threads: 0,
    };
    let res = run_experiment(&m, &plan)?;
    print!("{}\n{}", k_table(&res.summaries), loss_table(&res.summaries));
    for f in &res.failures {
        log::warn!("{} / {} seed {}: {}", f.init, f.variant.name(), f.seed, f.error);
    }
    if let Some(p) = &a.out {
        write_json(Some(p), &serde_json::to_value(&res)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let g = a
        .graph
        .load()?
        .ok_or_else(|| anyhow!("one of --graph or --grid is required"))?;
    let rows = sweep_max_cost(
        &g,
        &a.thresholds,
        &SweepOptions {
            candidate_min_degree: a.candidate_min_degree,
            load_weighted: a.load_weighted,
            restarts: a.restarts,
            seed: a.seed,
            max_sweeps: a.max_sweeps,
        },
    )?;
    let mut w = output(a.out.as_deref())?;
    w.write_all(sweep_tsv(&rows).as_bytes())?;
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn read_points<R: BufRead>(reader: R) -> Result<Vec<[f64; 2]>> {
    let mut pts = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let f: Vec<&str> = body
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if f.len() != 2 {
            bail!("line {}: expected two coordinates", i + 1);
        }
        let x: f64 = f[0].parse().with_context(|| format!("line {}", i + 1))?;
        let y: f64 = f[1].parse().with_context(|| format!("line {}", i + 1))?;
        pts.push([x, y]);
    }
    Ok(pts)
}

fn points(a: CentralPointsArgs) -> Result<ExitCode> {
    let pts = read_points(open(&a.points)?)?;
    let c = central_points(&pts)?;
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<18} {:>10} {:>10} {:>8} {:>8} {:>8}",
        "center", "x", "y", "L2", "L2^2", "L1"
    )?;
    for (name, s) in [
        ("arithmetic mean", c.mean),
        ("per-axis median", c.median),
        ("geometric median", c.geometric_median),
        ("euclidean medoid", c.medoid),
    ] {
        writeln!(
            out,
            "{:<18} {:>10.6} {:>10.6} {:>8.3} {:>8.3} {:>8.3}",
            name, s.point[0], s.point[1], s.l2, s.l2_sq, s.l1
        )?;
    }
    if let Some(p) = &a.out {
        write_json(Some(p), &serde_json::to_value(c)?)?;
    }
    Ok(ExitCode::SUCCESS)
}
