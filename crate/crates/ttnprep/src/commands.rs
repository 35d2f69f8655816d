//! Subcommand implementations. Every command reads a [`RunConfig`], works
//! through its seeds (in parallel, results kept in seed order) and writes
//! JSON and CSV files into the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use ttnprep_core::fourier::FourierEvaluator;
use ttnprep_core::gaussian::{canonical_correlations, closed_form_bound, required_bond_corrs, Bipartition};
use ttnprep_core::pipeline::{coefficients, compile_from};
use ttnprep_core::sim::{verify_pipeline, MAX_QUBITS};
use ttnprep_core::structopt::optimize_structure;
use ttnprep_core::ttn::TreeTopology;

use crate::config::{GeneratorConfig, RunConfig};
use crate::error::{CliError, Result};
use crate::formats::{self, CostRow};
use crate::trials::{structure_trial, StructureTrial};

fn run_seeds<T: Send>(cfg: &RunConfig, jobs: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| cfg.seeds.par_iter().map(|&s| f(s)).collect())
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.output_dir)?;
    Ok(cfg.output_dir.clone())
}

fn evaluator(cfg: &RunConfig, seed: u64) -> Result<FourierEvaluator> {
    Ok(FourierEvaluator::new(cfg.grid()?, cfg.covariance(seed)?)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct CutRecord {
    pub seed: u64,
    pub edge: usize,
    pub left: Vec<usize>,
    pub correlations: Vec<f64>,
    /// Tail allowed at this cut: `epsilon^2 / (D - 1)`.
    pub tail: f64,
    pub required_bond: usize,
    pub closed_form_bound: f64,
}

/// Canonical correlations and required bonds for every cut of the path.
pub fn analyze(cfg: &RunConfig, jobs: usize) -> Result<Vec<CutRecord>> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let dims = (0..cfg.dim).map(|l| (l, 1 << cfg.m)).collect();
    let topo = TreeTopology::path(&cfg.path_order(), &dims)?;
    let tail = cfg.epsilon * cfg.epsilon / (cfg.dim.max(2) - 1) as f64;
    let per_seed = run_seeds(cfg, jobs, |seed| {
        let sigma = cfg.covariance(seed)?;
        let mut rows = Vec::new();
        for e in 0..topo.edge_count() {
            let (left, _) = topo.edge_split(e);
            let corrs = canonical_correlations(&sigma, &Bipartition::new(&left, cfg.dim)?)?;
            rows.push(CutRecord {
                seed,
                edge: e,
                left,
                correlations: corrs.values.clone(),
                tail,
                required_bond: required_bond_corrs(&corrs, tail)?,
                closed_form_bound: closed_form_bound(&corrs, cfg.dim, cfg.epsilon)?,
            });
        }
        Ok(rows)
    })?;
    let rows: Vec<CutRecord> = per_seed.into_iter().flatten().collect();
    formats::write_json(&dir.join("analyze.json"), &rows)?;
    #[derive(Serialize)]
    struct Row {
        seed: u64,
        edge: usize,
        left: String,
        correlations: String,
        required_bond: usize,
        closed_form_bound: f64,
    }
    let csv_rows: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            seed: r.seed,
            edge: r.edge,
            left: join(&r.left),
            correlations: r.correlations.iter().map(|c| format!("{c:.12e}")).collect::<Vec<_>>().join(";"),
            required_bond: r.required_bond,
            closed_form_bound: r.closed_form_bound,
        })
        .collect();
    formats::write_csv(&dir.join("analyze.csv"), &csv_rows)?;
    Ok(rows)
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildRecord {
    pub seed: u64,
    pub evaluations: usize,
    pub sweeps: usize,
    pub converged: bool,
    pub sweep_errors: Vec<f64>,
    pub bond_dims: Vec<usize>,
    pub file: String,
}

/// Cross-interpolates the coefficient network of every seed at `chi'`.
pub fn build(cfg: &RunConfig, jobs: usize) -> Result<Vec<BuildRecord>> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let rows = run_seeds(cfg, jobs, |seed| {
        let ev = evaluator(cfg, seed)?;
        let c = coefficients(&ev, &cfg.pipeline(seed))?;
        let file = format!("coeff_{seed}.ttn");
        formats::write_ttn(&dir.join(&file), &c.net)?;
        Ok(BuildRecord {
            seed,
            evaluations: c.tci.evaluations,
            sweeps: c.tci.sweeps,
            converged: c.tci.converged,
            sweep_errors: c.tci.sweep_errors.clone(),
            bond_dims: c.net.bond_dims(),
            file,
        })
    })?;
    formats::write_json(&dir.join("build.json"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconnectionLine {
    pub seed: u64,
    pub sweep: usize,
    pub edge: usize,
    pub entropies: [f64; 3],
    pub chosen: usize,
}

/// Loads `coeff_<seed>.ttn` (building it if absent) and runs reconnection
/// sweeps at `chi`; writes `optimized_<seed>.ttn` and `sweeps.jsonl`.
pub fn optimize(cfg: &RunConfig, jobs: usize) -> Result<Vec<ReconnectionLine>> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let per_seed = run_seeds(cfg, jobs, |seed| {
        let path = dir.join(format!("coeff_{seed}.ttn"));
        let mut net = if path.exists() {
            formats::read_ttn(&path)?
        } else {
            coefficients(&evaluator(cfg, seed)?, &cfg.pipeline(seed))?.net
        };
        let report = optimize_structure(&mut net, cfg.opt_sweeps, cfg.chi)?;
        formats::write_ttn(&dir.join(format!("optimized_{seed}.ttn")), &net)?;
        Ok(report
            .reconnections
            .iter()
            .map(|r| ReconnectionLine {
                seed,
                sweep: r.sweep,
                edge: r.choice.edge,
                entropies: r.choice.entropies,
                chosen: r.choice.chosen,
            })
            .collect::<Vec<_>>())
    })?;
    let lines: Vec<ReconnectionLine> = per_seed.into_iter().flatten().collect();
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("sweeps.jsonl"))?);
    for l in &lines {
        serde_json::to_writer(&mut f, l)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(lines)
}

/// Compiles every seed to `circuit_<seed>.json` and `cost.csv`.
pub fn compile(cfg: &RunConfig, jobs: usize) -> Result<Vec<CostRow>> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let rows = run_seeds(cfg, jobs, |seed| {
        let ev = evaluator(cfg, seed)?;
        let opts = cfg.pipeline(seed);
        let c = compile_from(&ev, coefficients(&ev, &opts)?, &opts)?;
        formats::write_circuit(&dir.join(format!("circuit_{seed}.json")), &c.circuit, &c.cost)?;
        Ok(CostRow {
            seed,
            placement_count: c.circuit.placements.len(),
            cnot: c.cost.cnot_count,
            depth: c.cost.depth,
            qft_cnot: c.cost.qft_cnots,
            qft_depth: c.cost.qft_depth,
            baseline_cnot: c.baseline.cnot_count,
            ledger_f: c.ledger.product(),
        })
    })?;
    formats::write_csv(&dir.join("cost.csv"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    #[serde(rename = "D")]
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub chi: usize,
    pub sigma_max: Option<f64>,
    /// Seed, or `mean` on the aggregate row.
    pub seed: String,
    pub ledger_f: f64,
    /// Empty when the register exceeds the simulator.
    pub sim_f: Option<f64>,
    pub cnot: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyRow {
    pub seed: u64,
    pub ledger_f: f64,
    pub sim_f: f64,
    pub fourier_f: f64,
    pub ttn_f: f64,
    pub synthesis_f: f64,
    pub cnot: u64,
    pub depth: u64,
    pub baseline_cnot: u64,
    pub violation: bool,
}

/// Simulates every seed; fails with a verification error if any instance
/// breaks the ledger tolerance.
pub fn verify(cfg: &RunConfig, jobs: usize) -> Result<Vec<VerifyRow>> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let rows = run_seeds(cfg, jobs, |seed| {
        let r = verify_pipeline(&cfg.covariance(seed)?, cfg.grid()?, &cfg.pipeline(seed))?;
        Ok(VerifyRow {
            seed,
            ledger_f: r.ledger_fidelity,
            sim_f: r.simulated_fidelity,
            fourier_f: r.fourier_truncation_fidelity,
            ttn_f: r.ttn_fidelity,
            synthesis_f: r.synthesis_fidelity,
            cnot: r.cost.cnot_count,
            depth: r.cost.depth,
            baseline_cnot: r.baseline.cnot_count,
            violation: r.violation,
        })
    })?;
    formats::write_json(&dir.join("verify.json"), &rows)?;
    formats::write_csv(&dir.join("verify.csv"), &rows)?;
    let bad: Vec<u64> = rows.iter().filter(|r| r.violation).map(|r| r.seed).collect();
    if !bad.is_empty() {
        return Err(CliError::Verification(format!("ledger and simulation disagree for seeds {bad:?}")));
    }
    Ok(rows)
}

/// Per-seed metrics plus a mean row, in `bench.csv`.
pub fn bench(cfg: &RunConfig, jobs: usize) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let dir = out_dir(cfg)?;
    let simulate = cfg.grid()?.qubits() <= MAX_QUBITS;
    let sigma_max = cfg.generator.sigma_max();
    let mut rows = run_seeds(cfg, jobs, |seed| {
        let (ledger, sim, cost) = if simulate {
            let r = verify_pipeline(&cfg.covariance(seed)?, cfg.grid()?, &cfg.pipeline(seed))?;
            (r.ledger_fidelity, Some(r.simulated_fidelity), r.cost)
        } else {
            let ev = evaluator(cfg, seed)?;
            let opts = cfg.pipeline(seed);
            let c = compile_from(&ev, coefficients(&ev, &opts)?, &opts)?;
            (c.ledger.product(), None, c.cost)
        };
        Ok(BenchRow {
            d: cfg.dim,
            n: cfg.n,
            m: cfg.m,
            chi: cfg.chi,
            sigma_max,
            seed: seed.to_string(),
            ledger_f: ledger,
            sim_f: sim,
            cnot: cost.cnot_count as f64,
            depth: cost.depth as f64,
        })
    })?;
    let k = rows.len() as f64;
    let mean = |f: &dyn Fn(&BenchRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
    let agg = BenchRow {
        seed: "mean".into(),
        ledger_f: mean(&|r| r.ledger_f),
        sim_f: if simulate { Some(mean(&|r| r.sim_f.unwrap_or(0.0))) } else { None },
        cnot: mean(&|r| r.cnot),
        depth: mean(&|r| r.depth),
        ..rows[0].clone()
    };
    rows.push(agg);
    formats::write_csv(&dir.join("bench.csv"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRow {
    #[serde(rename = "D")]
    pub d: usize,
    pub chi: usize,
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
}

/// Recovery rate of random tree structures for every `chi` in `chis`.
pub fn structure_trial_cmd(cfg: &RunConfig, jobs: usize) -> Result<Vec<TrialRow>> {
    cfg.validate()?;
    let sigma = match cfg.generator {
        GeneratorConfig::RandomTree { sigma } => sigma,
        _ => return Err(CliError::Config("structure-trial needs the random_tree generator".into())),
    };
    let dir = out_dir(cfg)?;
    let t = StructureTrial {
        dim: cfg.dim,
        sigma,
        m: cfg.m,
        a: cfg.a,
        chi_prime: cfg.chi_prime,
        max_sweeps: cfg.opt_sweeps,
    };
    let per_seed = run_seeds(cfg, jobs, |seed| structure_trial(&t, &cfg.chis, seed))?;
    let rows: Vec<TrialRow> = cfg
        .chis
        .iter()
        .enumerate()
        .map(|(i, &chi)| {
            let successes = per_seed.iter().filter(|r| r[i]).count();
            TrialRow {
                d: cfg.dim,
                chi,
                successes,
                trials: per_seed.len(),
                rate: successes as f64 / per_seed.len() as f64,
            }
        })
        .collect();
    formats::write_csv(&dir.join("structure_trial.csv"), &rows)?;
    Ok(rows)
}

/// Copies the effective configuration next to the outputs.
pub fn write_manifest(cfg: &RunConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    formats::write_json(&dir.join("config.json"), cfg)
}
