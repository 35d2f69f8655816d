//! End-to-end compilation: cross interpolation of the coefficients on a
//! chosen structure, truncation, and circuit synthesis.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::circuit::{
    compose_and_compress, fsl_baseline_cost, synthesize, synthesize_with_qft_gates, CostReport, QuantumCircuit,
};
use crate::fourier::FourierEvaluator;
use crate::structopt::{optimize_structure, SweepReport};
use crate::tci::{tci_build, TciOptions, TciReport, DEFAULT_CHI_PRIME};
use crate::tensor::Tensor;
use crate::ttn::{overlap_fidelity, FidelityLedger, TreeTensorNetwork, TreeTopology, Truncation};
use crate::{Error, Result};

/// Exhaustive search is refused above this dimension.
pub const EXHAUSTIVE_MAX_DIM: usize = 6;

/// Orderings are ranked by exact infidelity when the dense coefficient tensor
/// has at most this many qubits, else by the ledger.
const DENSE_RANKING_BITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QftMode {
    /// Inverse QFT grafted into the network and recompressed.
    QftTtn,
    /// Coefficient circuit followed by symbolic inverse-QFT placements.
    QftGates,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructurePolicy {
    /// Path in the given variable order.
    Fixed(Vec<usize>),
    /// Path in natural order, then entanglement-driven reconnection.
    AutoOptimize,
    /// Best path over all orderings up to reversal.
    ExhaustiveOptimal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub chi: usize,
    pub chi_prime: usize,
    pub tci_sweeps: usize,
    pub tci_tol: f64,
    pub opt_sweeps: usize,
    pub mode: QftMode,
    pub policy: StructurePolicy,
    pub seed: u64,
}

impl PipelineOptions {
    pub fn new(chi: usize) -> Self {
        PipelineOptions {
            chi,
            chi_prime: DEFAULT_CHI_PRIME,
            tci_sweeps: crate::tci::DEFAULT_SWEEPS,
            tci_tol: crate::tci::DEFAULT_TOL,
            opt_sweeps: 20,
            mode: QftMode::QftGates,
            policy: StructurePolicy::Fixed(Vec::new()),
            seed: 0,
        }
    }

    fn tci(&self) -> TciOptions {
        TciOptions { chi: self.chi_prime, sweeps: self.tci_sweeps, tol: self.tci_tol, seed: self.seed }
    }
}

/// Coefficient network at bond `chi'` plus how it was found.
#[derive(Debug, Clone)]
pub struct CoefficientNet {
    pub net: TreeTensorNetwork,
    pub tci: TciReport,
    pub structure: Option<SweepReport>,
}

#[derive(Debug, Clone)]
pub struct Compiled {
    /// Untruncated coefficient network, canonical.
    pub coefficients: CoefficientNet,
    /// Network that was synthesized: truncated coefficients (gates mode) or
    /// the compressed qubit network (ttn mode).
    pub compiled: TreeTensorNetwork,
    pub ledger: FidelityLedger,
    pub circuit: QuantumCircuit,
    pub cost: CostReport,
    pub baseline: CostReport,
}

fn coeff_dims(ev: &FourierEvaluator) -> BTreeMap<usize, usize> {
    (0..ev.grid().dim).map(|l| (l, ev.grid().modes())).collect()
}

/// Cross-interpolates the coefficients on a path in `order`.
pub fn coefficients_on_path(ev: &FourierEvaluator, order: &[usize], opts: &PipelineOptions) -> Result<CoefficientNet> {
    let topo = TreeTopology::path(order, &coeff_dims(ev))?;
    coefficients_on(ev, &topo, opts)
}

pub fn coefficients_on(ev: &FourierEvaluator, topo: &TreeTopology, opts: &PipelineOptions) -> Result<CoefficientNet> {
    let (net, tci) = tci_build(ev, topo, opts.tci())?;
    Ok(CoefficientNet { net, tci, structure: None })
}

/// Natural-order path, reconnection sweeps at bond `chi'`, then a fresh cross
/// interpolation on the topology that was found.
pub fn auto_structure(ev: &FourierEvaluator, opts: &PipelineOptions) -> Result<CoefficientNet> {
    let order: Vec<usize> = (0..ev.grid().dim).collect();
    let mut first = coefficients_on_path(ev, &order, opts)?;
    let report = optimize_structure(&mut first.net, opts.opt_sweeps, opts.chi_prime)?;
    let mut rebuilt = coefficients_on(ev, first.net.topology(), opts)?;
    rebuilt.structure = Some(report);
    Ok(rebuilt)
}

/// All orderings of `0..dim` with the first entry below the last.
pub fn path_orderings(dim: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..dim).collect();
    permute(&mut cur, 0, &mut out);
    out.retain(|o| dim < 2 || o[0] < o[dim - 1]);
    out
}

fn permute(cur: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == cur.len() {
        out.push(cur.clone());
        return;
    }
    for i in k..cur.len() {
        cur.swap(k, i);
        permute(cur, k + 1, out);
        cur.swap(k, i);
    }
}

/// `1 - |<net truncated to chi | dense>|^2`, both normalized.
pub fn coefficient_infidelity(net: &TreeTensorNetwork, chi: usize, dense: &Tensor) -> Result<f64> {
    let t = net.clone().truncated(Truncation::Bond(chi))?;
    let v = t.contract_to_vector()?;
    Ok((1.0 - overlap_fidelity(&v, dense.data())?).max(0.0))
}

/// Best path ordering for bond `chi`.
pub fn exhaustive_structure(ev: &FourierEvaluator, opts: &PipelineOptions) -> Result<CoefficientNet> {
    let dim = ev.grid().dim;
    if dim > EXHAUSTIVE_MAX_DIM {
        return Err(crate::error::param("exhaustive search is limited to D <= 6"));
    }
    let dense = if dim * ev.grid().m <= DENSE_RANKING_BITS { Some(ev.dense_coeff_tensor()?) } else { None };
    let mut best: Option<(f64, CoefficientNet)> = None;
    for order in path_orderings(dim) {
        let c = coefficients_on_path(ev, &order, opts)?;
        let loss = match &dense {
            Some(d) => coefficient_infidelity(&c.net, opts.chi, d)?,
            None => 1.0 - c.net.clone().truncated(Truncation::Bond(opts.chi))?.ledger().product(),
        };
        if best.as_ref().is_none_or(|(b, _)| loss < *b) {
            best = Some((loss, c));
        }
    }
    Ok(best.ok_or(Error::NoConvergence)?.1)
}

pub fn coefficients(ev: &FourierEvaluator, opts: &PipelineOptions) -> Result<CoefficientNet> {
    match &opts.policy {
        StructurePolicy::Fixed(order) if order.is_empty() => {
            let natural: Vec<usize> = (0..ev.grid().dim).collect();
            coefficients_on_path(ev, &natural, opts)
        }
        StructurePolicy::Fixed(order) => coefficients_on_path(ev, order, opts),
        StructurePolicy::AutoOptimize => auto_structure(ev, opts),
        StructurePolicy::ExhaustiveOptimal => exhaustive_structure(ev, opts),
    }
}

/// Truncates (or compresses with the inverse QFT) and synthesizes.
pub fn compile_from(ev: &FourierEvaluator, coefficients: CoefficientNet, opts: &PipelineOptions) -> Result<Compiled> {
    let g = *ev.grid();
    let (compiled, circuit, cost) = match opts.mode {
        QftMode::QftGates => {
            let mut t = coefficients.net.clone();
            t.truncate(Truncation::Bond(opts.chi))?;
            let (circ, cost) = synthesize_with_qft_gates(&t, g.n, g.m)?;
            (t, circ, cost)
        }
        QftMode::QftTtn => {
            let t = compose_and_compress(&coefficients.net, g.n, g.m, opts.chi)?;
            let (circ, cost) = synthesize(&t)?;
            (t, circ, cost)
        }
    };
    let ledger = compiled.ledger().clone();
    let baseline = fsl_baseline_cost(g.dim, g.n, g.m)?;
    Ok(Compiled { coefficients, compiled, ledger, circuit, cost, baseline })
}

pub fn compile(ev: &FourierEvaluator, opts: &PipelineOptions) -> Result<Compiled> {
    let c = coefficients(ev, opts)?;
    compile_from(ev, c, opts)
}
