//! Covariance generators, canonical correlations and Schmidt spectra of
//! square-root Gaussian amplitudes.

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)] // std links in its own float methods under `cargo test`
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::param;
use crate::linalg::{self, ksum, RMat};
use crate::ttn::TreeTopology;
use crate::{Error, Result};

/// Canonical correlations at or below this value are dropped.
pub const CORRELATION_CUTOFF: f64 = 1e-12;
/// Resampling budget of the `random` generator.
pub const PD_ATTEMPTS: usize = 1000;
/// Default stopping tail of [`pair_spectrum`].
pub const PAIR_TAIL_CUTOFF: f64 = 1e-16;
/// Smallest tail mass that [`required_bond`] will resolve.
pub const MIN_RESOLVABLE_TAIL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: RMat,
}

impl CovarianceMatrix {
    pub fn new(entries: RMat) -> Result<Self> {
        let d = entries.nrows();
        if d == 0 || entries.ncols() != d {
            return Err(param("covariance must be a nonempty square matrix"));
        }
        for i in 0..d {
            for j in 0..i {
                if (entries[(i, j)] - entries[(j, i)]).abs() > 1e-12 {
                    return Err(param("covariance is not symmetric"));
                }
            }
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(param("covariance has non-finite entries"));
        }
        if linalg::min_eigenvalue(&entries) <= 0.0 {
            return Err(param("covariance is not positive definite"));
        }
        Ok(CovarianceMatrix { entries })
    }

    pub fn from_row_major(dim: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != dim * dim {
            return Err(param("entry count does not match dim*dim"));
        }
        Self::new(RMat::from_row_slice(dim, dim, flat))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &RMat {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn row_major(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|k| self.entries[(k / d, k % d)]).collect()
    }

    fn block(&self, rows: &[usize], cols: &[usize]) -> RMat {
        RMat::from_fn(rows.len(), cols.len(), |i, j| self.entries[(rows[i], cols[j])])
    }

    /// Reorders variables: new variable `i` is old variable `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> CovarianceMatrix {
        CovarianceMatrix { entries: self.block(order, order) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl Bipartition {
    pub fn new(left: &[usize], dim: usize) -> Result<Self> {
        let mut l = left.to_vec();
        l.sort_unstable();
        l.dedup();
        if l.len() != left.len() || l.iter().any(|&i| i >= dim) {
            return Err(param("bipartition side has repeated or out-of-range indices"));
        }
        let right: Vec<usize> = (0..dim).filter(|i| l.binary_search(i).is_err()).collect();
        if l.is_empty() || right.is_empty() {
            return Err(param("bipartition sides must be nonempty"));
        }
        Ok(Bipartition { left: l, right })
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCorrelations {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    pub lambdas: Vec<f64>,
    pub truncated_tail: f64,
}

impl SchmidtSpectrum {
    /// Mass outside the `r` largest values.
    pub fn tail_after(&self, r: usize) -> f64 {
        if r >= self.lambdas.len() {
            return self.truncated_tail;
        }
        (self.truncated_tail + ksum(self.lambdas[r..].iter().copied())).max(0.0)
    }

    /// Mass of the `r` largest values.
    pub fn kept_mass(&self, r: usize) -> f64 {
        ksum(self.lambdas.iter().take(r).copied())
    }
}

/// Parameters of the pair problem for a canonical correlation `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairParams {
    pub k: f64,
    pub lambda0: f64,
    pub q: f64,
}

pub fn pair_params(rho: f64) -> Result<PairParams> {
    if !(rho.is_finite()) || rho < 0.0 {
        return Err(param("correlation must be in [0, 1)"));
    }
    if rho >= 1.0 {
        return Err(Error::Degenerate(rho));
    }
    let k = 1.0 / (1.0 - rho * rho).sqrt();
    Ok(PairParams { k, lambda0: 2.0 / (k + 1.0), q: (k - 1.0) / (k + 1.0) })
}

/// Geometric Schmidt spectrum of one correlated pair, stopped once the
/// remaining tail falls below `cutoff`.
pub fn pair_spectrum_with_cutoff(rho: f64, cutoff: f64) -> Result<SchmidtSpectrum> {
    let p = pair_params(rho)?;
    let mut lambdas = vec![p.lambda0];
    let mut tail = p.q;
    while tail >= cutoff && tail > 0.0 {
        lambdas.push(p.lambda0 * tail);
        tail *= p.q;
    }
    Ok(SchmidtSpectrum { lambdas, truncated_tail: tail })
}

pub fn pair_spectrum(rho: f64) -> Result<SchmidtSpectrum> {
    pair_spectrum_with_cutoff(rho, PAIR_TAIL_CUTOFF)
}

/// Canonical correlations of the two sides of `cut`, computed as singular
/// values of the whitened cross-covariance block.
pub fn canonical_correlations(sigma: &CovarianceMatrix, cut: &Bipartition) -> Result<CanonicalCorrelations> {
    if cut.left.iter().chain(&cut.right).any(|&i| i >= sigma.dim()) || cut.left.len() + cut.right.len() != sigma.dim() {
        return Err(param("bipartition does not match covariance dimension"));
    }
    let s11 = sigma.block(&cut.left, &cut.left);
    let s22 = sigma.block(&cut.right, &cut.right);
    let s12 = sigma.block(&cut.left, &cut.right);
    let w1 = linalg::inv_sqrt_spd(&s11)?;
    let w2 = linalg::inv_sqrt_spd(&s22)?;
    let white = w1 * s12 * w2;
    let values: Vec<f64> =
        linalg::real_singular_values(&white).into_iter().filter(|&r| r > CORRELATION_CUTOFF).collect();
    if let Some(&top) = values.first() {
        if top >= 1.0 - 1e-12 {
            return Err(Error::Degenerate(top));
        }
    }
    Ok(CanonicalCorrelations { values })
}

struct Entry {
    value: f64,
    modes: Vec<u32>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on value, lexicographically smaller modes first on ties
        self.value.total_cmp(&other.value).then_with(|| other.modes.cmp(&self.modes))
    }
}

/// The `max_terms` largest products of pair spectra, descending.
pub fn cut_spectrum(corrs: &CanonicalCorrelations, max_terms: usize) -> Result<SchmidtSpectrum> {
    if max_terms == 0 {
        return Err(param("max_terms must be at least 1"));
    }
    let params: Vec<PairParams> = corrs.values.iter().map(|&r| pair_params(r)).collect::<Result<_>>()?;
    let p = params.len();
    let value_of =
        |modes: &[u32]| -> f64 { params.iter().zip(modes).map(|(pp, &k)| pp.lambda0 * pp.q.powi(k as i32)).product() };
    let mut heap = BinaryHeap::new();
    let start = vec![0u32; p];
    heap.push(Entry { value: value_of(&start), modes: start });
    let mut lambdas = Vec::with_capacity(max_terms.min(1 << 16));
    while lambdas.len() < max_terms {
        let Some(top) = heap.pop() else { break };
        if top.value <= 0.0 {
            break;
        }
        lambdas.push(top.value);
        let last = top.modes.iter().rposition(|&k| k > 0).unwrap_or(0);
        for j in last..p {
            if params[j].q == 0.0 {
                continue;
            }
            let mut child = top.modes.clone();
            child[j] += 1;
            let v = value_of(&child);
            heap.push(Entry { value: v, modes: child });
        }
    }
    let truncated_tail = (1.0 - ksum(lambdas.iter().copied())).max(0.0);
    Ok(SchmidtSpectrum { lambdas, truncated_tail })
}

/// Smallest number of retained values whose discarded mass is at most `eps^2`.
pub fn required_bond(spectrum: &SchmidtSpectrum, eps: f64) -> Result<usize> {
    required_bond_for_tail(spectrum, eps * eps)
}

fn check_tail(tail: f64) -> Result<()> {
    if !(tail > 0.0 && tail < 1.0) {
        return Err(param("accuracy must satisfy 0 < eps < 1"));
    }
    if tail < MIN_RESOLVABLE_TAIL {
        return Err(Error::Precision("requested tail is below the resolvable floor".to_string()));
    }
    Ok(())
}

/// Smallest `r` with tail mass after `r` values at most `tail` (relative slack 1e-10).
pub fn required_bond_for_tail(spectrum: &SchmidtSpectrum, tail: f64) -> Result<usize> {
    check_tail(tail)?;
    let limit = tail * (1.0 + 1e-10);
    let mut sum = 0.0;
    let mut c = 0.0;
    if 1.0 <= limit {
        return Ok(1);
    }
    for (r, &l) in spectrum.lambdas.iter().enumerate() {
        let y = l - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
        let rest = if r + 1 == spectrum.lambdas.len() { spectrum.truncated_tail } else { 1.0 - sum };
        if rest <= limit {
            return Ok(r + 1);
        }
    }
    if spectrum.truncated_tail > limit {
        return Err(Error::Precision("spectrum was cut off before reaching the requested tail".to_string()));
    }
    Ok(spectrum.lambdas.len().max(1))
}

/// Required bond for the product spectrum of `corrs`, enumerating as many
/// terms as needed.
pub fn required_bond_corrs(corrs: &CanonicalCorrelations, tail: f64) -> Result<usize> {
    check_tail(tail)?;
    if corrs.values.is_empty() {
        return Ok(1);
    }
    if corrs.values.len() == 1 {
        let spec = pair_spectrum_with_cutoff(corrs.values[0], tail * 1e-3)?;
        return required_bond_for_tail(&spec, tail);
    }
    let mut terms = 64usize;
    loop {
        let spec = cut_spectrum(corrs, terms)?;
        if spec.lambdas.len() < terms || spec.truncated_tail <= tail * (1.0 + 1e-10) {
            return required_bond_for_tail(&spec, tail);
        }
        if terms >= 1 << 22 {
            return Err(Error::Capacity("Schmidt enumeration exceeded 2^22 terms".to_string()));
        }
        terms *= 4;
    }
}

/// Closed-form bound `r^l` with `r = ceil(2 log(l sqrt(D) / eps) / log(1/q_max))`.
pub fn closed_form_bound(corrs: &CanonicalCorrelations, dim: usize, eps: f64) -> Result<f64> {
    let l = corrs.values.len();
    if l == 0 {
        return Ok(1.0);
    }
    let q = corrs
        .values
        .iter()
        .map(|&r| pair_params(r).map(|p| p.q))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0f64, f64::max);
    let arg = (l as f64) * (dim as f64).sqrt() / eps;
    let r = (2.0 * arg.ln() / (1.0 / q).ln()).ceil().max(1.0);
    Ok(r.powi(l as i32))
}

/// Lower bound on the squared fidelity of a TTN of bond `chi` on `topology`:
/// product over bond edges of the retained Schmidt mass.
pub fn predict_ttn_fidelity(sigma: &CovarianceMatrix, topology: &TreeTopology, chi: usize) -> Result<f64> {
    if chi == 0 {
        return Err(param("chi must be at least 1"));
    }
    let mut f = 1.0;
    for e in 0..topology.edge_count() {
        let (side, _) = topology.edge_split(e);
        if side.is_empty() || side.len() == sigma.dim() {
            continue;
        }
        let cut = Bipartition::new(&side, sigma.dim())?;
        let corrs = canonical_correlations(sigma, &cut)?;
        if corrs.values.is_empty() {
            continue;
        }
        let spec = cut_spectrum(&corrs, chi)?;
        f *= 1.0 - spec.truncated_tail;
    }
    Ok(f)
}

/// Leaf-labelled tree used by the `tree` generator. Variables sit on
/// `var_nodes`; other nodes are hidden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTree {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub var_nodes: Vec<usize>,
}

impl LabeledTree {
    pub fn distances_from(&self, src: usize) -> Vec<usize> {
        let mut adj = vec![Vec::new(); self.node_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut dist = vec![usize::MAX; self.node_count];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    fn validate(&self) -> Result<()> {
        if self.node_count == 0 || self.edges.len() + 1 != self.node_count {
            return Err(param("tree must have node_count - 1 edges"));
        }
        if self.edges.iter().any(|&(a, b)| a >= self.node_count || b >= self.node_count || a == b) {
            return Err(param("tree edge out of range"));
        }
        if self.var_nodes.iter().any(|&v| v >= self.node_count) {
            return Err(param("variable node out of range"));
        }
        if self.distances_from(0).contains(&usize::MAX) {
            return Err(param("tree is not connected"));
        }
        Ok(())
    }
}

/// Random unrooted binary tree on `leaves` labelled leaves (nodes
/// `0..leaves`), grown by inserting each new leaf on a uniformly chosen edge.
pub fn random_binary_tree(leaves: usize, rng: &mut impl Rng) -> LabeledTree {
    let var_nodes: Vec<usize> = (0..leaves).collect();
    match leaves {
        0 | 1 => return LabeledTree { node_count: leaves.max(1), edges: Vec::new(), var_nodes },
        2 => return LabeledTree { node_count: 2, edges: vec![(0, 1)], var_nodes },
        _ => {}
    }
    let hub = leaves;
    let mut edges = vec![(0, hub), (1, hub), (2, hub)];
    let mut next = leaves + 1;
    for leaf in 3..leaves {
        let pick = rng.gen_range(0..edges.len());
        let (a, b) = edges[pick];
        let w = next;
        next += 1;
        edges[pick] = (a, w);
        edges.push((w, b));
        edges.push((w, leaf));
    }
    LabeledTree { node_count: next, edges, var_nodes }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    /// All off-diagonal entries equal `rho`.
    Uniform { rho: f64 },
    /// `rho^|i-j|`.
    Chain { rho: f64 },
    /// `exp(-distance/sigma)` over a supplied tree.
    Tree { tree: LabeledTree, sigma: f64 },
    /// `exp(-distance/sigma)` over a seeded random binary tree.
    RandomTree { sigma: f64 },
    /// `(sqrt(s_i s_j))^|i-j|` with `s_i ~ U[0, sigma_max]`.
    ExpDecayChain { sigma_max: f64 },
    /// Unit diagonal, off-diagonals `~ U[-sigma_max, sigma_max]`, resampled until PD.
    Random { sigma_max: f64 },
    /// Variables split into `rank` interleaved chains (variable `i` in chain
    /// `i mod rank`); within a chain the covariance is the product of link
    /// weights `~ U[0, sigma_max]`, so every contiguous cut has cross rank at
    /// most `rank`.
    Stacked { rank: usize, sigma_max: f64 },
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > -1.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(param("correlation must lie in (-1, 1)"))
    }
}

fn check_sigma_max(s: f64) -> Result<()> {
    if s.is_finite() && (0.0..1.0).contains(&s) {
        Ok(())
    } else {
        Err(param("sigma_max must lie in [0, 1)"))
    }
}

fn tree_covariance(tree: &LabeledTree, sigma: f64) -> Result<RMat> {
    tree.validate()?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(param("tree length scale must be positive"));
    }
    let d = tree.var_nodes.len();
    let mut m = RMat::zeros(d, d);
    for i in 0..d {
        let dist = tree.distances_from(tree.var_nodes[i]);
        for j in 0..d {
            m[(i, j)] = (-(dist[tree.var_nodes[j]] as f64) / sigma).exp();
        }
    }
    Ok(m)
}

/// Builds a covariance matrix of dimension `dim` from `spec`.
pub fn make_covariance(spec: &GeneratorSpec, dim: usize, seed: u64) -> Result<CovarianceMatrix> {
    if dim == 0 {
        return Err(param("dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = match spec {
        GeneratorSpec::Uniform { rho } => {
            check_rho(*rho)?;
            RMat::from_fn(dim, dim, |i, j| if i == j { 1.0 } else { *rho })
        }
        GeneratorSpec::Chain { rho } => {
            check_rho(*rho)?;
            RMat::from_fn(dim, dim, |i, j| rho.powi((i as i32 - j as i32).abs()))
        }
        GeneratorSpec::Tree { tree, sigma } => {
            if tree.var_nodes.len() != dim {
                return Err(param("tree must carry exactly dim variables"));
            }
            tree_covariance(tree, *sigma)?
        }
        GeneratorSpec::RandomTree { sigma } => {
            let tree = random_binary_tree(dim, &mut rng);
            tree_covariance(&tree, *sigma)?
        }
        GeneratorSpec::ExpDecayChain { sigma_max } => {
            check_sigma_max(*sigma_max)?;
            let s: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * sigma_max).collect();
            RMat::from_fn(dim, dim, |i, j| (s[i] * s[j]).sqrt().powi((i as i32 - j as i32).abs()))
        }
        GeneratorSpec::Random { sigma_max } => {
            check_sigma_max(*sigma_max)?;
            let mut found = None;
            for _ in 0..PD_ATTEMPTS {
                let mut m = RMat::identity(dim, dim);
                for i in 0..dim {
                    for j in (i + 1)..dim {
                        let v = (2.0 * rng.gen::<f64>() - 1.0) * sigma_max;
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                    }
                }
                if linalg::min_eigenvalue(&m) > 0.0 {
                    found = Some(m);
                    break;
                }
            }
            found.ok_or(Error::GenerationFailed(PD_ATTEMPTS))?
        }
        GeneratorSpec::Stacked { rank, sigma_max } => {
            check_sigma_max(*sigma_max)?;
            if *rank == 0 {
                return Err(param("rank must be at least 1"));
            }
            let mut m = RMat::identity(dim, dim);
            for g in 0..*rank {
                let members: Vec<usize> = (g..dim).step_by(*rank).collect();
                let links: Vec<f64> = (1..members.len()).map(|_| rng.gen::<f64>() * sigma_max).collect();
                for a in 0..members.len() {
                    let mut c = 1.0;
                    for b in (a + 1)..members.len() {
                        c *= links[b - 1];
                        m[(members[a], members[b])] = c;
                        m[(members[b], members[a])] = c;
                    }
                }
            }
            m
        }
    };
    CovarianceMatrix::new(entries).map_err(|e| match spec {
        GeneratorSpec::Uniform { .. } | GeneratorSpec::Chain { .. } => e,
        _ => Error::GenerationFailed(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn generator_examples() {
        let id = make_covariance(&GeneratorSpec::Uniform { rho: 0.0 }, 3, 0).unwrap();
        assert_eq!(id.entries(), &RMat::identity(3, 3));
        let ch = make_covariance(&GeneratorSpec::Chain { rho: 0.5 }, 3, 0).unwrap();
        assert_eq!(ch.row_major(), vec![1.0, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 1.0]);
        let r = make_covariance(&GeneratorSpec::Random { sigma_max: 0.2 }, 4, 7).unwrap();
        assert!(linalg::min_eigenvalue(r.entries()) > 0.0);
        for i in 0..4 {
            assert_eq!(r.get(i, i), 1.0);
            for j in 0..4 {
                assert_eq!(r.get(i, j), r.get(j, i));
                if i != j {
                    assert!(r.get(i, j).abs() <= 0.2);
                }
            }
        }
        assert!(make_covariance(&GeneratorSpec::Chain { rho: 1.0 }, 3, 0).is_err());
        assert_eq!(
            make_covariance(&GeneratorSpec::Random { sigma_max: 0.99 }, 40, 1),
            Err(Error::GenerationFailed(PD_ATTEMPTS))
        );
    }

    #[test]
    fn pair_correlation() {
        let s = CovarianceMatrix::from_row_major(2, &[1.0, -0.3, -0.3, 1.0]).unwrap();
        let c = canonical_correlations(&s, &Bipartition::new(&[0], 2).unwrap()).unwrap();
        assert_eq!(c.values.len(), 1);
        assert!(close(c.values[0], 0.3, 1e-12));
    }

    #[test]
    fn rank_one_examples() {
        let cut = Bipartition::new(&[0, 1], 4).unwrap();
        for spec in [GeneratorSpec::Uniform { rho: 0.3 }, GeneratorSpec::Chain { rho: 0.5 }] {
            let s = make_covariance(&spec, 4, 0).unwrap();
            assert_eq!(canonical_correlations(&s, &cut).unwrap().values.len(), 1);
        }
    }

    #[test]
    fn pair_spectrum_values() {
        let s = pair_spectrum(0.0).unwrap();
        assert_eq!(s.lambdas, vec![1.0]);
        assert_eq!(s.truncated_tail, 0.0);
        let p = pair_params(0.6).unwrap();
        assert!(close(p.k, 1.25, 1e-15));
        assert!(close(p.lambda0, 8.0 / 9.0, 1e-15));
        assert!(close(p.q, 1.0 / 9.0, 1e-15));
        let s = pair_spectrum(0.6).unwrap();
        assert!(close(s.lambdas[1], 8.0 / 81.0, 1e-15));
        for w in s.lambdas.windows(2) {
            assert!(close(w[1] / w[0], 1.0 / 9.0, 1e-12));
        }
        assert!(close(ksum(s.lambdas.iter().copied()) + s.truncated_tail, 1.0, 1e-12));
        assert!(matches!(pair_spectrum(1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn cut_spectrum_matches_brute_force() {
        let c = CanonicalCorrelations { values: vec![0.6, 0.6] };
        let s = cut_spectrum(&c, 4).unwrap();
        let a = 8.0 / 9.0;
        let b = 8.0 / 81.0;
        let expect = [a * a, a * b, a * b, b * b];
        for (x, y) in s.lambdas.iter().zip(expect) {
            assert!(close(*x, y, 1e-15));
        }
        let c = CanonicalCorrelations { values: vec![0.7, 0.4, 0.2] };
        let s = cut_spectrum(&c, 30).unwrap();
        let ps: Vec<_> = c.values.iter().map(|&r| pair_spectrum(r).unwrap()).collect();
        let mut all = Vec::new();
        for a in &ps[0].lambdas {
            for b in &ps[1].lambdas {
                for c in &ps[2].lambdas {
                    all.push(a * b * c);
                }
            }
        }
        all.sort_by(|a, b| b.total_cmp(a));
        for (x, y) in s.lambdas.iter().zip(&all) {
            assert!(close(*x, *y, 1e-15));
        }
        assert_eq!(cut_spectrum(&CanonicalCorrelations { values: vec![] }, 5).unwrap().lambdas, vec![1.0]);
    }

    #[test]
    fn required_bond_examples() {
        assert_eq!(required_bond(&pair_spectrum(0.0).unwrap(), 1e-3).unwrap(), 1);
        let s = pair_spectrum(0.6).unwrap();
        assert_eq!(required_bond(&s, 1.0 / 3.0).unwrap(), 1);
        assert_eq!(required_bond(&s, 1e-3).unwrap(), 7);
        assert_eq!((2.0 * 1000f64.ln() / 9f64.ln()).ceil() as usize, 7);
        assert!(matches!(required_bond(&s, 1e-9), Err(Error::Precision(_))));
        let c = CanonicalCorrelations { values: vec![0.6] };
        assert_eq!(required_bond_corrs(&c, 1e-6).unwrap(), 7);
    }

    #[test]
    fn closed_form_bound_dominates() {
        let c = CanonicalCorrelations { values: vec![0.5, 0.3] };
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let need = required_bond_corrs(&c, eps * eps / 8.0).unwrap() as f64;
            assert!(need <= closed_form_bound(&c, 8, eps).unwrap());
        }
    }
}
