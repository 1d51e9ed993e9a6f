//! Seeded restart experiments, aggregate tables, and max-cost sweeps.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{default_candidates, truncated_costs, InstanceGraph};
use crate::init::{dyn_build, random_init, sparse_pp, Coverage, RandomSize};
use crate::loss::LossPair;
use crate::matrix::SparseCostMatrix;
use crate::reference::{brute_force, BRUTE_FORCE_LIMIT};
use crate::swap::{dyn_swap, DynMode, SwapConfig};

/// Version of the JSON documents written by the harness.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "size")]
pub enum InitMethod {
    DynBuild,
    Random(RandomSize),
    SparsePP,
}

impl fmt::Display for InitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitMethod::DynBuild => write!(f, "dynbuild"),
            InitMethod::SparsePP => write!(f, "sparsepp"),
            InitMethod::Random(RandomSize::Fraction(p)) => write!(f, "random:{}", p * 100.0),
            InitMethod::Random(RandomSize::Count(c)) => write!(f, "random-k:{c}"),
        }
    }
}

impl FromStr for InitMethod {
    type Err = Error;

    /// `dynbuild`, `sparsepp`, `random:<percent>` or `random-k:<count>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown init method {s:?}"));
        match s {
            "dynbuild" => Ok(InitMethod::DynBuild),
            "sparsepp" => Ok(InitMethod::SparsePP),
            _ => {
                if let Some(p) = s.strip_prefix("random:") {
                    let p: f64 = p.trim_end_matches('%').parse().map_err(|_| bad())?;
                    if !(p > 0.0 && p <= 100.0) {
                        return Err(bad());
                    }
                    Ok(InitMethod::Random(RandomSize::Fraction(p / 100.0)))
                } else if let Some(c) = s.strip_prefix("random-k:") {
                    Ok(InitMethod::Random(RandomSize::Count(c.parse().map_err(|_| bad())?)))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

/// One restart: initialization followed by the swap phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub init: String,
    pub variant: DynMode,
    pub seed: u64,
    pub k_after_init: usize,
    pub k_after_swap: usize,
    pub loss_after_init: LossPair,
    pub loss: LossPair,
    pub medoid_changes: usize,
    pub swaps: usize,
    pub removals: usize,
    pub additions: usize,
    pub sweeps: usize,
    pub truncated: bool,
    pub init_time_ms: f64,
    pub swap_time_ms: f64,
    pub feasible: bool,
    pub medoids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Requested k for DynBUILD and Sparse++ (random inits carry their own size).
    pub k: usize,
    pub max_sweeps: usize,
    pub coverage: Coverage,
    pub verify: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            k: 1,
            max_sweeps: 100,
            coverage: Coverage::Strict,
            verify: false,
        }
    }
}

/// Run one initialization plus swap phase.
pub fn run_once(
    matrix: &SparseCostMatrix,
    init: InitMethod,
    variant: DynMode,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunReport> {
    let t0 = Instant::now();
    let initial = match init {
        InitMethod::DynBuild => dyn_build(matrix, opts.k, opts.coverage)?.medoids,
        InitMethod::Random(size) => random_init(matrix, size, seed)?,
        InitMethod::SparsePP => sparse_pp(matrix, opts.k, seed, opts.coverage)?,
    };
    let init_time_ms = t0.elapsed().as_secs_f64() * 1e3;
    let loss_after_init = matrix.evaluate_loss(&initial)?;

    let config = SwapConfig {
        allow_decrease: variant.allow_decrease(),
        allow_increase: variant.allow_increase(),
        seed,
        max_sweeps: opts.max_sweeps,
        verify: opts.verify,
    };
    let t1 = Instant::now();
    let result = dyn_swap(matrix, &initial, &config)?;
    let swap_time_ms = t1.elapsed().as_secs_f64() * 1e3;

    Ok(RunReport {
        init: init.to_string(),
        variant,
        seed,
        k_after_init: initial.len(),
        k_after_swap: result.medoids.len(),
        loss_after_init,
        loss: result.loss,
        medoid_changes: result.stats.medoid_changes(),
        swaps: result.stats.swaps,
        removals: result.stats.removals,
        additions: result.stats.additions,
        sweeps: result.stats.sweeps,
        truncated: result.stats.truncated,
        init_time_ms,
        swap_time_ms,
        feasible: result.loss.is_feasible(),
        medoids: result.medoids,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub inits: Vec<InitMethod>,
    pub variants: Vec<DynMode>,
    pub restarts: usize,
    /// Restart `r` uses seed `base_seed + r`.
    pub base_seed: u64,
    pub options: RunOptions,
    /// Worker threads; 0 uses the global pool.
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub init: String,
    pub variant: DynMode,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub avg: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64>) -> Stat {
        let mut n = 0usize;
        let mut s = Stat {
            avg: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        for v in values {
            n += 1;
            s.avg += v;
            s.min = s.min.min(v);
            s.max = s.max.max(v);
        }
        if n == 0 {
            return Stat {
                avg: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        // keep min <= avg <= max despite rounding of the sum
        s.avg = (s.avg / n as f64).clamp(s.min, s.max);
        s
    }
}

/// Aggregates of one (init, variant) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub init: String,
    pub variant: DynMode,
    pub runs: usize,
    pub failures: usize,
    pub k_after_init: Stat,
    pub k_after_swap: Stat,
    pub init_time_ms: Stat,
    pub swap_time_ms: Stat,
    pub medoid_changes: Stat,
    pub penalty: Stat,
    pub dist: Stat,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub reports: Vec<RunReport>,
    pub failures: Vec<CellFailure>,
    pub summaries: Vec<CellSummary>,
}

/// Run the cross product of inits, variants and restarts. Failing runs are
/// recorded and do not stop the sweep. Output order is by cell, then restart.
pub fn run_experiment(matrix: &SparseCostMatrix, plan: &ExperimentPlan) -> Result<ExperimentResult> {
    let mut jobs = Vec::new();
    for &init in &plan.inits {
        for &variant in &plan.variants {
            for r in 0..plan.restarts {
                jobs.push((init, variant, plan.base_seed + r as u64));
            }
        }
    }
    let run = || -> Vec<_> {
        jobs.par_iter()
            .map(|&(init, variant, seed)| {
                (
                    init,
                    variant,
                    seed,
                    run_once(matrix, init, variant, seed, &plan.options),
                )
            })
            .collect()
    };
    let outcomes = if plan.threads == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(plan.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run)
    };

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (init, variant, seed, outcome) in outcomes {
        match outcome {
            Ok(r) => reports.push(r),
            Err(e) => failures.push(CellFailure {
                init: init.to_string(),
                variant,
                seed,
                error: e.to_string(),
            }),
        }
    }
    let mut summaries = Vec::new();
    for &init in &plan.inits {
        for &variant in &plan.variants {
            let name = init.to_string();
            let cell: Vec<&RunReport> = reports
                .iter()
                .filter(|r| r.init == name && r.variant == variant)
                .collect();
            let n_fail = failures
                .iter()
                .filter(|f| f.init == name && f.variant == variant)
                .count();
            summaries.push(summarize(name, variant, &cell, n_fail));
        }
    }
    Ok(ExperimentResult {
        schema_version: SCHEMA_VERSION,
        reports,
        failures,
        summaries,
    })
}

fn summarize(init: String, variant: DynMode, cell: &[&RunReport], failures: usize) -> CellSummary {
    let stat = |f: fn(&RunReport) -> f64| Stat::of(cell.iter().map(|r| f(r)));
    let feasible = cell.iter().filter(|r| r.feasible).count();
    CellSummary {
        init,
        variant,
        runs: cell.len(),
        failures,
        k_after_init: stat(|r| r.k_after_init as f64),
        k_after_swap: stat(|r| r.k_after_swap as f64),
        init_time_ms: stat(|r| r.init_time_ms),
        swap_time_ms: stat(|r| r.swap_time_ms),
        medoid_changes: stat(|r| r.medoid_changes as f64),
        penalty: stat(|r| r.loss.penalty),
        dist: stat(|r| r.loss.dist),
        success_rate: if cell.is_empty() {
            0.0
        } else {
            feasible as f64 / cell.len() as f64
        },
    }
}

/// Aligned text table with k, runtime, medoid changes and success per cell.
pub fn k_table(summaries: &[CellSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<5} {:>8} {:>8} {:>11} {:>11} {:>9} {:>8}",
        "init", "dyn", "k init", "k swap", "init ms", "swap ms", "changes", "success"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<14} {:<5} {:>8.1} {:>8.1} {:>11.1} {:>11.1} {:>9.1} {:>7.0}%",
            s.init,
            s.variant.name(),
            s.k_after_init.avg,
            s.k_after_swap.avg,
            s.init_time_ms.avg,
            s.swap_time_ms.avg,
            s.medoid_changes.avg,
            s.success_rate * 100.0
        );
    }
    out
}

/// Aligned text table of the final loss (avg / min) per cell.
pub fn loss_table(summaries: &[CellSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<5} {:>14} {:>10} {:>14} {:>10}",
        "init", "dyn", "dist avg", "pen avg", "dist min", "pen min"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:<14} {:<5} {:>14.4e} {:>10.2} {:>14.4e} {:>10.2}",
            s.init,
            s.variant.name(),
            s.dist.avg,
            s.penalty.avg,
            s.dist.min,
            s.penalty.min
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub candidate_min_degree: usize,
    pub load_weighted: bool,
    /// Heuristic restarts per threshold when the oracle is not applicable.
    pub restarts: usize,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            candidate_min_degree: 3,
            load_weighted: false,
            restarts: 5,
            seed: 0,
            max_sweeps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub nnz: usize,
    /// Fraction of absent demand/candidate pairs.
    pub sparsity: f64,
    /// Smallest k with full coverage that was found; `None` if some demand
    /// is out of reach at this threshold.
    pub k: Option<usize>,
    /// True when `k` comes from exhaustive search.
    pub exact: bool,
}

/// For each ascending threshold, build the truncated matrix and record its
/// sparsity and the smallest feasible k found: exact when the candidate
/// count allows brute force, otherwise the best of seeded DynBUILD + swap
/// runs with k decrease, plus one run warm-started from the previous
/// threshold's best medoids (still feasible, as raising the threshold only
/// adds entries).
pub fn sweep_max_cost(graph: &InstanceGraph, thresholds: &[f64], opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    if thresholds.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
        return Err(Error::InvalidArgument("thresholds must be strictly ascending".into()));
    }
    let candidates = default_candidates(graph, opts.candidate_min_degree);
    let mut rows = Vec::new();
    let mut best_prev: Option<Vec<usize>> = None;
    for &t in thresholds {
        let matrix = truncated_costs(graph, &candidates, t, opts.load_weighted)?;
        let coverable = matrix.isolated_demands().is_empty() && matrix.n_candidates() > 0;
        let (k, exact) = if !coverable {
            (None, false)
        } else if matrix.n_candidates() <= BRUTE_FORCE_LIMIT {
            (brute_force(&matrix, 0)?.min_feasible_k, true)
        } else {
            let run_opts = RunOptions {
                k: 1,
                max_sweeps: opts.max_sweeps,
                ..RunOptions::default()
            };
            let mut best: Option<Vec<usize>> = None;
            let mut consider = |meds: Vec<usize>| {
                if best.as_ref().is_none_or(|b| meds.len() < b.len()) {
                    best = Some(meds);
                }
            };
            for r in 0..opts.restarts.max(1) {
                let report = run_once(
                    &matrix,
                    InitMethod::DynBuild,
                    DynMode::Down,
                    opts.seed + r as u64,
                    &run_opts,
                )?;
                if report.feasible {
                    consider(report.medoids);
                }
            }
            if let Some(prev) = &best_prev {
                let config = SwapConfig {
                    allow_decrease: true,
                    seed: opts.seed,
                    max_sweeps: opts.max_sweeps,
                    ..SwapConfig::default()
                };
                let warm = dyn_swap(&matrix, prev, &config)?;
                if warm.loss.is_feasible() {
                    consider(warm.medoids);
                }
            }
            best_prev = best.clone();
            (best.map(|b| b.len()), false)
        };
        rows.push(SweepRow {
            threshold: t,
            nnz: matrix.nnz(),
            sparsity: matrix.sparsity(),
            k,
            exact,
        });
    }
    Ok(rows)
}

/// Tab-separated sweep table for external plotting.
pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::from("threshold\tnnz\tsparsity\tk\texact\n");
    for r in rows {
        let k = r.k.map_or_else(|| "NA".to_string(), |k| k.to_string());
        let _ = writeln!(out, "{}\t{}\t{:.6}\t{}\t{}", r.threshold, r.nnz, r.sparsity, k, r.exact);
    }
    out
}
