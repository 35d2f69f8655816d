//! Seeded experiment drivers shared by the command line and the tests.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttnprep_core::fourier::{FourierEvaluator, GridSpec};
use ttnprep_core::gaussian::{make_covariance, random_binary_tree, GeneratorSpec};
use ttnprep_core::structopt::{optimize_structure, tree_splits};
use ttnprep_core::tci::{tci_build, TciOptions};
use ttnprep_core::ttn::{TreeTopology, Truncation};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureTrial {
    pub dim: usize,
    /// Decay length of `exp(-distance / sigma)`.
    pub sigma: f64,
    /// Fourier qubits per dimension (the grid uses `n = m`).
    pub m: usize,
    pub a: f64,
    pub chi_prime: usize,
    pub max_sweeps: usize,
}

/// One seeded trial: a random binary tree with hidden internal nodes, the
/// coefficients loaded into a shuffled path at `chi'`, then, for every
/// `chi`, truncation and reconnection sweeps at `chi`. Returns whether the
/// unrooted topology was recovered, per `chi`.
pub fn structure_trial(t: &StructureTrial, chis: &[usize], seed: u64) -> Result<Vec<bool>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = random_binary_tree(t.dim, &mut rng);
    let want = tree_splits(tree.node_count, &tree.edges, &tree.var_nodes);
    let sigma = make_covariance(&GeneratorSpec::Tree { tree, sigma: t.sigma }, t.dim, seed)?;
    let ev = FourierEvaluator::new(GridSpec::new(t.dim, t.m, t.a, t.m)?, sigma)?;
    let mut order: Vec<usize> = (0..t.dim).collect();
    order.shuffle(&mut rng);
    let dims = (0..t.dim).map(|l| (l, 1usize << t.m)).collect();
    let topo = TreeTopology::path(&order, &dims)?;
    let opts = TciOptions { chi: t.chi_prime, seed, ..TciOptions::new(t.chi_prime) };
    let (net, _) = tci_build(&ev, &topo, opts)?;
    let mut out = Vec::with_capacity(chis.len());
    for &chi in chis {
        let mut trial = net.clone();
        trial.truncate(Truncation::Bond(chi))?;
        optimize_structure(&mut trial, t.max_sweeps, chi)?;
        out.push(trial.topology().splits() == want);
    }
    Ok(out)
}
