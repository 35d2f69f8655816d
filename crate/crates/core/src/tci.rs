//! Tensor cross interpolation on trees and maxvol pivot selection.
//!
//! Each bond keeps a pair of pivot lists, one per side, of equal length.
//! Lists only grow, which keeps them nested: every pivot on the side of
//! node `u` is a physical value of `u` combined with pivots already held on
//! the far sides of `u`'s other bonds. New pivots are found by rook search
//! on the residual of the two-site cross matrix, so the number of
//! evaluations per bond is linear in the candidate set size.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

#[allow(unused_imports)] // std links in its own float methods under `cargo test`
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::param;
use crate::fourier::FourierEvaluator;
use crate::linalg::CMat;
use crate::tensor::Tensor;
use crate::ttn::{Leg, TreeTensorNetwork, TreeTopology};
use crate::{Error, Result, C64};

pub const DEFAULT_SWEEPS: usize = 8;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_CHI_PRIME: usize = 64;
const UNSET: u16 = u16::MAX;
const ROOK_STEPS: usize = 6;

/// A tensor known only through element evaluations. Indices are given per
/// label, labels in ascending order.
pub trait BlackBox {
    fn dims(&self) -> Vec<usize>;
    fn eval(&self, index: &[usize]) -> C64;
}

impl BlackBox for FourierEvaluator {
    fn dims(&self) -> Vec<usize> {
        vec![self.grid().modes(); self.grid().dim]
    }

    fn eval(&self, index: &[usize]) -> C64 {
        C64::new(self.coeff_at(index), 0.0)
    }
}

/// Any closure over a fixed shape.
pub struct FnTensor<F: Fn(&[usize]) -> C64> {
    pub dims: Vec<usize>,
    pub f: F,
}

impl<F: Fn(&[usize]) -> C64> BlackBox for FnTensor<F> {
    fn dims(&self) -> Vec<usize> {
        self.dims.clone()
    }

    fn eval(&self, index: &[usize]) -> C64 {
        (self.f)(index)
    }
}

/// Memoising wrapper that counts distinct evaluations.
pub struct CachedTensor<'a, B: BlackBox + ?Sized> {
    inner: &'a B,
    cache: RefCell<BTreeMap<Vec<u16>, C64>>,
    scratch: RefCell<Vec<usize>>,
}

impl<'a, B: BlackBox + ?Sized> CachedTensor<'a, B> {
    pub fn new(inner: &'a B) -> Self {
        CachedTensor { inner, cache: RefCell::new(BTreeMap::new()), scratch: RefCell::new(Vec::new()) }
    }

    pub fn get(&self, key: &[u16]) -> C64 {
        if let Some(v) = self.cache.borrow().get(key) {
            return *v;
        }
        let v = {
            let mut idx = self.scratch.borrow_mut();
            idx.clear();
            idx.extend(key.iter().map(|&x| x as usize));
            self.inner.eval(&idx)
        };
        self.cache.borrow_mut().insert(key.to_vec(), v);
        v
    }

    /// Number of distinct entries evaluated so far.
    pub fn unique_calls(&self) -> usize {
        self.cache.borrow().len()
    }
}

/// Pivot lists per bond: `sides[e][s]` lives on the side of `edges[e][s]`.
/// Entries are full-length index vectors with labels of the other side unset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotSets {
    pub sides: Vec<[Vec<Vec<u16>>; 2]>,
}

impl PivotSets {
    pub fn rank(&self, e: usize) -> usize {
        self.sides[e][0].len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TciReport {
    pub evaluations: usize,
    pub sweeps: usize,
    /// Largest residual accepted or rejected as a pivot, per sweep, relative
    /// to the largest evaluated magnitude.
    pub sweep_errors: Vec<f64>,
    pub converged: bool,
    pub pivots: PivotSets,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TciOptions {
    pub chi: usize,
    pub sweeps: usize,
    pub tol: f64,
    pub seed: u64,
}

impl TciOptions {
    pub fn new(chi: usize) -> Self {
        TciOptions { chi, sweeps: DEFAULT_SWEEPS, tol: DEFAULT_TOL, seed: 0 }
    }
}

struct Cross<'a, 'b, B: BlackBox + ?Sized> {
    topo: &'a TreeTopology,
    f: &'a CachedTensor<'b, B>,
    pos: BTreeMap<usize, usize>,
    sets: Vec<[Vec<Vec<u16>>; 2]>,
    max_abs: f64,
}

fn merge(a: &[u16], b: &[u16]) -> Vec<u16> {
    a.iter().zip(b).map(|(&x, &y)| if x == UNSET { y } else { x }).collect()
}

impl<'a, 'b, B: BlackBox + ?Sized> Cross<'a, 'b, B> {
    fn side_index(&self, e: usize, node: usize) -> usize {
        if self.topo.edge(e)[0] == node {
            0
        } else {
            1
        }
    }

    fn far_set(&self, e: usize, from: usize) -> &Vec<Vec<u16>> {
        let w = self.topo.other_end(e, from);
        &self.sets[e][self.side_index(e, w)]
    }

    /// Candidate index vectors at `node` over its legs in order, leaving out
    /// `skip`; the first leg varies slowest.
    fn candidates(&self, node: usize, skip: Option<usize>) -> Vec<Vec<u16>> {
        let width = self.pos.len();
        let mut out = vec![vec![UNSET; width]];
        for leg in self.topo.legs(node) {
            match *leg {
                Leg::Phys(l) => {
                    let p = self.pos[&l];
                    let d = self.topo.phys_dims()[&l];
                    let mut next = Vec::with_capacity(out.len() * d);
                    for base in &out {
                        for v in 0..d {
                            let mut x = base.clone();
                            x[p] = v as u16;
                            next.push(x);
                        }
                    }
                    out = next;
                }
                Leg::Bond(e) if Some(e) != skip => {
                    let far = self.far_set(e, node);
                    let mut next = Vec::with_capacity(out.len() * far.len());
                    for base in &out {
                        for f in far {
                            next.push(merge(base, f));
                        }
                    }
                    out = next;
                }
                Leg::Bond(_) => {}
            }
        }
        out
    }

    fn eval(&mut self, a: &[u16], b: &[u16]) -> C64 {
        let v = self.f.get(&merge(a, b));
        let m = v.norm();
        if m > self.max_abs {
            self.max_abs = m;
        }
        v
    }

    /// Grows the pivot lists of bond `e`. Returns the largest residual seen
    /// at the last search, relative to the running maximum.
    fn update(&mut self, e: usize, chi: usize, tol: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let [a, b] = self.topo.edge(e);
        let rows = self.candidates(a, Some(e));
        let cols = self.candidates(b, Some(e));
        let row_of: BTreeMap<&Vec<u16>, usize> = rows.iter().enumerate().map(|(i, r)| (r, i)).collect();
        let col_of: BTreeMap<&Vec<u16>, usize> = cols.iter().enumerate().map(|(i, c)| (c, i)).collect();
        let mut cf: Vec<Vec<C64>> = Vec::new();
        let mut rf: Vec<Vec<C64>> = Vec::new();
        let col_res = |me: &mut Self, cf: &Vec<Vec<C64>>, rf: &Vec<Vec<C64>>, j: usize| -> Vec<C64> {
            (0..rows.len())
                .map(|i| {
                    let mut v = me.eval(&rows[i], &cols[j]);
                    for (c, r) in cf.iter().zip(rf) {
                        v -= c[i] * r[j];
                    }
                    v
                })
                .collect()
        };
        let row_res = |me: &mut Self, cf: &Vec<Vec<C64>>, rf: &Vec<Vec<C64>>, i: usize| -> Vec<C64> {
            (0..cols.len())
                .map(|j| {
                    let mut v = me.eval(&rows[i], &cols[j]);
                    for (c, r) in cf.iter().zip(rf) {
                        v -= c[i] * r[j];
                    }
                    v
                })
                .collect()
        };
        // replay existing pivots
        let existing = self.sets[e][0].len();
        for k in 0..existing {
            let (Some(&i), Some(&j)) = (row_of.get(&self.sets[e][0][k]), col_of.get(&self.sets[e][1][k])) else {
                return Err(Error::PivotDegeneracy(format!("pivot {k} of bond {e} is not nested")));
            };
            let c = col_res(self, &cf, &rf, j);
            let r = row_res(self, &cf, &rf, i);
            let p = c[i];
            if p.norm() == 0.0 {
                return Err(Error::PivotDegeneracy(format!("bond {e} pivot {k} has zero residual")));
            }
            cf.push(c.into_iter().map(|x| x / p).collect());
            rf.push(r);
        }
        let limit = chi.min(rows.len()).min(cols.len());
        let full = rows.len().min(cols.len());
        let mut last = 0.0;
        // at the bond limit one more search still estimates the residual
        while cf.len() < full {
            let mut j = rng.gen_range(0..cols.len());
            let mut i;
            let mut col = col_res(self, &cf, &rf, j);
            let mut row;
            let mut steps = 0;
            loop {
                i = argmax(&col);
                row = row_res(self, &cf, &rf, i);
                let j2 = argmax(&row);
                steps += 1;
                if j2 == j || steps >= ROOK_STEPS {
                    if j2 != j && row[j2].norm() > col[i].norm() {
                        j = j2;
                        col = col_res(self, &cf, &rf, j);
                    }
                    break;
                }
                j = j2;
                col = col_res(self, &cf, &rf, j);
            }
            let p = col[i];
            last = p.norm() / self.max_abs.max(f64::MIN_POSITIVE);
            if cf.len() >= limit || p.norm() <= tol * self.max_abs || p.norm() == 0.0 {
                break;
            }
            cf.push(col.into_iter().map(|x| x / p).collect());
            rf.push(row);
            self.sets[e][0].push(rows[i].clone());
            self.sets[e][1].push(cols[j].clone());
        }
        Ok(last)
    }

    fn nested(&self) -> bool {
        for e in 0..self.topo.edge_count() {
            for s in 0..2 {
                let node = self.topo.edge(e)[s];
                let cand = self.candidates(node, Some(e));
                let set = &self.sets[e][s];
                let mut sorted = set.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != set.len() || set.iter().any(|x| !cand.contains(x)) {
                    return false;
                }
            }
        }
        true
    }

    fn assemble(&mut self) -> Result<TreeTensorNetwork> {
        let n = self.topo.node_count();
        let mut tensors = Vec::with_capacity(n);
        for v in 0..n {
            let shape: Vec<usize> = self
                .topo
                .legs(v)
                .iter()
                .map(|leg| match *leg {
                    Leg::Phys(l) => self.topo.phys_dims()[&l],
                    Leg::Bond(e) => self.far_set(e, v).len(),
                })
                .collect();
            let data = self.candidates(v, None).iter().map(|x| self.f.get(x)).collect();
            tensors.push(Tensor::from_vec(&shape, data)?);
        }
        let (_, parent) = self.topo.traversal(0);
        for e in 0..self.topo.edge_count() {
            let [a, b] = self.topo.edge(e);
            let r = self.sets[e][0].len();
            let p = CMat::from_fn(r, r, |k, l| self.f.get(&merge(&self.sets[e][0][k], &self.sets[e][1][l])));
            let lu = p.full_piv_lu();
            let child = if parent[b] == Some(e) { b } else { a };
            let ax = self.topo.axis_of(child, Leg::Bond(e)).expect("bond leg");
            let mat = tensors[child].matricize(&[ax]);
            let solved = if child == b { lu.solve(&mat) } else { p_transpose_solve(&self.sets, e, self.f, &mat) }
                .ok_or_else(|| Error::PivotDegeneracy(format!("cross matrix of bond {e} is singular")))?;
            let mut shape = vec![r];
            shape.extend((0..tensors[child].rank()).filter(|&x| x != ax).map(|x| tensors[child].shape()[x]));
            tensors[child] = Tensor::from_matrix(&solved, &shape)?.move_axis(0, ax);
        }
        TreeTensorNetwork::new(self.topo.clone(), tensors)
    }
}

fn p_transpose_solve<B: BlackBox + ?Sized>(
    sets: &[[Vec<Vec<u16>>; 2]],
    e: usize,
    f: &CachedTensor<'_, B>,
    rhs: &CMat,
) -> Option<CMat> {
    let r = sets[e][0].len();
    let pt = CMat::from_fn(r, r, |l, k| f.get(&merge(&sets[e][0][k], &sets[e][1][l])));
    pt.full_piv_lu().solve(rhs)
}

fn argmax(v: &[C64]) -> usize {
    let mut best = 0;
    let mut bv = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > bv {
            bv = m;
            best = i;
        }
    }
    best
}

/// Edge visiting order of one sweep: depth-first from node 0, then back.
fn sweep_order(topo: &TreeTopology) -> Vec<usize> {
    let (order, parent) = topo.traversal(0);
    let fwd: Vec<usize> = order.iter().filter_map(|&v| parent[v]).collect();
    let mut all = fwd.clone();
    all.extend(fwd.iter().rev());
    all
}

/// Leg-free nodes merged into neighbours until every node of `merged` has a
/// physical leg. A leg-free node only sees products of its neighbours'
/// pivots, so cross interpolation on it never grows past rank one.
struct Absorbed {
    merged: TreeTopology,
    /// Original nodes of each merged node, ascending.
    members: Vec<Vec<usize>>,
    /// Original edge of each merged edge.
    edge_of: Vec<usize>,
}

fn has_phys(topo: &TreeTopology, v: usize) -> bool {
    topo.legs(v).iter().any(|l| matches!(l, Leg::Phys(_)))
}

impl Absorbed {
    fn of(topo: &TreeTopology) -> Result<Option<Self>> {
        let n = topo.node_count();
        if topo.phys_dims().is_empty() || (0..n).all(|v| has_phys(topo, v)) {
            return Ok(None);
        }
        let mut group: Vec<usize> = (0..n).collect();
        while let Some(g) = (0..n).map(|v| group[v]).find(|&g| !(0..n).any(|v| group[v] == g && has_phys(topo, v))) {
            let e = (0..topo.edge_count())
                .find(|&e| {
                    let [a, b] = topo.edge(e);
                    (group[a] == g) != (group[b] == g)
                })
                .expect("tree is connected");
            let [a, b] = topo.edge(e);
            let h = if group[a] == g { group[b] } else { group[a] };
            for x in group.iter_mut() {
                if *x == h {
                    *x = g;
                }
            }
        }
        let mut ids = group.clone();
        ids.sort_unstable();
        ids.dedup();
        let members: Vec<Vec<usize>> = ids.iter().map(|&g| (0..n).filter(|&v| group[v] == g).collect()).collect();
        let gid = |v: usize| ids.binary_search(&group[v]).expect("group id");
        let mut new_id = BTreeMap::new();
        let mut edges = Vec::new();
        let mut edge_of = Vec::new();
        for e in 0..topo.edge_count() {
            let [a, b] = topo.edge(e);
            if group[a] != group[b] {
                new_id.insert(e, edges.len());
                edges.push([gid(a), gid(b)]);
                edge_of.push(e);
            }
        }
        let nodes = members
            .iter()
            .map(|m| {
                m.iter()
                    .flat_map(|&v| topo.legs(v).iter())
                    .filter_map(|&l| match l {
                        Leg::Phys(_) => Some(l),
                        Leg::Bond(e) => new_id.get(&e).map(|&k| Leg::Bond(k)),
                    })
                    .collect()
            })
            .collect();
        let merged = TreeTopology::new(nodes, edges, topo.phys_dims().clone())?;
        Ok(Some(Absorbed { merged, members, edge_of }))
    }

    /// Splits every merged tensor back onto `original` by SVDs, peeling off
    /// one member at a time. Singular values below `tol` relative to the
    /// largest are dropped.
    fn split(&self, net: &TreeTensorNetwork, original: &TreeTopology, tol: f64) -> Result<TreeTensorNetwork> {
        let mut tensors: Vec<Option<Tensor>> = vec![None; original.node_count()];
        for (g, members) in self.members.iter().enumerate() {
            let mut legs: Vec<Leg> = self
                .merged
                .legs(g)
                .iter()
                .map(|&l| match l {
                    Leg::Bond(k) => Leg::Bond(self.edge_of[k]),
                    p => p,
                })
                .collect();
            let mut t = net.tensor(g).clone();
            let mut rest = members.clone();
            while rest.len() > 1 {
                // a member joined to the others by exactly one bond
                let (x, e) = rest
                    .iter()
                    .find_map(|&x| {
                        let inner: Vec<usize> = original
                            .legs(x)
                            .iter()
                            .filter_map(|l| match *l {
                                Leg::Bond(e) if rest.contains(&original.other_end(e, x)) => Some(e),
                                _ => None,
                            })
                            .collect();
                        (inner.len() == 1).then(|| (x, inner[0]))
                    })
                    .expect("a subtree has a leaf");
                let own: Vec<usize> = (0..legs.len()).filter(|&i| original.legs(x).contains(&legs[i])).collect();
                let others: Vec<usize> = (0..legs.len()).filter(|i| !own.contains(i)).collect();
                let dec = crate::linalg::svd(&t.matricize(&own))?;
                let k = dec.s.iter().filter(|&&s| s > tol * dec.s[0]).count().max(1);
                let mut shape: Vec<usize> = own.iter().map(|&i| t.shape()[i]).collect();
                shape.push(k);
                let mut xlegs: Vec<Leg> = own.iter().map(|&i| legs[i]).collect();
                xlegs.push(Leg::Bond(e));
                let u = Tensor::from_matrix(&dec.u.columns(0, k).into_owned(), &shape)?;
                tensors[x] = Some(arrange(&u, &xlegs, original.legs(x)));
                let mut svt: CMat = dec.vt.rows(0, k).into_owned();
                for i in 0..k {
                    let f = C64::new(dec.s[i], 0.0);
                    for j in 0..svt.ncols() {
                        svt[(i, j)] *= f;
                    }
                }
                let mut rshape = vec![k];
                rshape.extend(others.iter().map(|&i| t.shape()[i]));
                t = Tensor::from_matrix(&svt, &rshape)?;
                let mut next = vec![Leg::Bond(e)];
                next.extend(others.iter().map(|&i| legs[i]));
                legs = next;
                rest.retain(|&y| y != x);
            }
            tensors[rest[0]] = Some(arrange(&t, &legs, original.legs(rest[0])));
        }
        TreeTensorNetwork::new(original.clone(), tensors.into_iter().map(|t| t.expect("every node split")).collect())
    }
}

fn arrange(t: &Tensor, have: &[Leg], want: &[Leg]) -> Tensor {
    let perm: Vec<usize> = want.iter().map(|l| have.iter().position(|h| h == l).expect("leg present")).collect();
    t.permute(&perm)
}

/// Builds a tree tensor network on `topology` interpolating `f` with at most
/// `opts.chi` pivots per bond. The result is canonical at node 0.
///
/// Nodes without a physical leg are absorbed into a neighbour for the
/// interpolation and split off again afterwards; the bonds this creates may
/// exceed `opts.chi`, and the reported pivots then refer to the merged tree.
pub fn tci_build<B: BlackBox + ?Sized>(
    f: &B,
    topology: &TreeTopology,
    opts: TciOptions,
) -> Result<(TreeTensorNetwork, TciReport)> {
    let cache = CachedTensor::new(f);
    let (mut net, report) = match Absorbed::of(topology)? {
        None => tci_build_cached(&cache, topology, opts)?,
        Some(abs) => {
            let (merged, report) = tci_build_cached(&cache, &abs.merged, opts)?;
            (abs.split(&merged, topology, opts.tol)?, report)
        }
    };
    net.canonicalize(0)?;
    Ok((net, report))
}

/// As [`tci_build`] but with a caller-owned cache and without
/// canonicalization, so interpolation can be checked on raw tensors. Every
/// node must carry a physical leg.
pub fn tci_build_cached<B: BlackBox + ?Sized>(
    f: &CachedTensor<'_, B>,
    topology: &TreeTopology,
    opts: TciOptions,
) -> Result<(TreeTensorNetwork, TciReport)> {
    if opts.chi == 0 {
        return Err(param("chi must be at least 1"));
    }
    if !topology.labels().is_empty() && (0..topology.node_count()).any(|v| !has_phys(topology, v)) {
        return Err(param("every node needs a physical leg; use tci_build"));
    }
    let dims = f.inner.dims();
    let labels = topology.labels();
    if dims.len() != labels.len() {
        return Err(Error::DimensionMismatch(dims.len(), labels.len()));
    }
    for (l, d) in labels.iter().zip(&dims) {
        if topology.phys_dims()[l] != *d {
            return Err(Error::Shape(format!("label {l} has dimension {d} in the black box")));
        }
        if *d > UNSET as usize {
            return Err(param("physical dimension too large"));
        }
    }
    let pos: BTreeMap<usize, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    // starting pivot: the all-zero index, else the first nonzero random probe
    let mut start = vec![0u16; dims.len()];
    let mut tries = 0;
    while f.get(&start).norm() == 0.0 {
        tries += 1;
        if tries > 1000 {
            return Err(Error::PivotDegeneracy("no nonzero entry found for the first pivot".into()));
        }
        for (s, &d) in start.iter_mut().zip(&dims) {
            *s = rng.gen_range(0..d) as u16;
        }
    }
    let mut sets = Vec::with_capacity(topology.edge_count());
    for e in 0..topology.edge_count() {
        let (l, r) = topology.edge_split(e);
        let mut left = vec![UNSET; dims.len()];
        for x in l {
            left[pos[&x]] = start[pos[&x]];
        }
        let mut right = vec![UNSET; dims.len()];
        for x in r {
            right[pos[&x]] = start[pos[&x]];
        }
        sets.push([vec![left], vec![right]]);
    }
    let mut cross = Cross { topo: topology, f, pos, sets, max_abs: f.get(&start).norm() };
    let order = sweep_order(topology);
    let mut sweep_errors = Vec::new();
    let mut converged = order.is_empty();
    let mut sweeps = 0;
    while sweeps < opts.sweeps && !converged {
        sweeps += 1;
        let before: Vec<usize> = (0..topology.edge_count()).map(|e| cross.sets[e][0].len()).collect();
        let mut worst = 0.0f64;
        for &e in &order {
            worst = worst.max(cross.update(e, opts.chi, opts.tol, &mut rng)?);
        }
        sweep_errors.push(worst);
        let grew = (0..topology.edge_count()).any(|e| cross.sets[e][0].len() != before[e]);
        converged = !grew;
    }
    debug_assert!(cross.nested());
    let net = cross.assemble()?;
    let report = TciReport {
        evaluations: f.unique_calls(),
        sweeps,
        sweep_errors,
        converged,
        pivots: PivotSets { sides: cross.sets },
    };
    Ok((net, report))
}

/// Checks the nesting condition of `pivots` on `topology`.
pub fn pivots_nested(topology: &TreeTopology, pivots: &PivotSets) -> bool {
    struct Zero;
    impl BlackBox for Zero {
        fn dims(&self) -> Vec<usize> {
            Vec::new()
        }
        fn eval(&self, _: &[usize]) -> C64 {
            C64::new(0.0, 0.0)
        }
    }
    let z = Zero;
    let cache = CachedTensor::new(&z);
    let pos = topology.labels().iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let cross = Cross { topo: topology, f: &cache, pos, sets: pivots.sides.clone(), max_abs: 0.0 };
    cross.nested()
}

/// Full index vectors of every pivot cross entry `(left_k, right_l)`.
pub fn cross_entries(pivots: &PivotSets) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for side in &pivots.sides {
        for a in &side[0] {
            for b in &side[1] {
                out.push(merge(a, b).into_iter().map(|x| x as usize).collect());
            }
        }
    }
    out
}

/// Rows of a tall `r x chi` matrix whose square submatrix is dominant: every
/// entry of `A * A_sub^-1` has magnitude at most `1 + delta`. `delta` is
/// floored at `1e-10` so round-off cannot make the swaps cycle.
pub fn maxvol(a: &CMat, delta: f64) -> Result<Vec<usize>> {
    let (r, chi) = a.shape();
    if chi == 0 || r < chi {
        return Err(Error::Shape(format!("maxvol needs a tall matrix, got {r}x{chi}")));
    }
    // greedy start from partial-pivot elimination
    let mut work = a.clone();
    let mut rows = Vec::with_capacity(chi);
    let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    for j in 0..chi {
        let mut best = None;
        let mut bv = 0.0;
        for i in 0..r {
            if rows.contains(&i) {
                continue;
            }
            let v = work[(i, j)].norm();
            if v > bv {
                bv = v;
                best = Some(i);
            }
        }
        let i = match best {
            Some(i) if bv > 1e-12 * scale => i,
            _ => return Err(Error::Rank),
        };
        let piv = work[(i, j)];
        let prow = work.row(i).into_owned();
        for k in 0..r {
            if k != i {
                let f = work[(k, j)] / piv;
                for c in j..chi {
                    work[(k, c)] -= f * prow[c];
                }
            }
        }
        rows.push(i);
    }
    let bound = 1.0 + delta.max(1e-10);
    for _ in 0..(100 * r) {
        let sub = CMat::from_fn(chi, chi, |i, j| a[(rows[i], j)]);
        let inv = sub.try_inverse().ok_or(Error::Rank)?;
        let coef = a * inv;
        let mut best = (0, 0);
        let mut bv = 0.0;
        for i in 0..r {
            for j in 0..chi {
                let v = coef[(i, j)].norm();
                if v > bv {
                    bv = v;
                    best = (i, j);
                }
            }
        }
        if bv <= bound {
            return Ok(rows);
        }
        rows[best.1] = best.0;
    }
    Err(Error::NoConvergence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::GridSpec;
    use crate::gaussian::{make_covariance, GeneratorSpec};
    use crate::ttn::overlap_fidelity;

    fn coeff_eval(spec: GeneratorSpec, d: usize, m: usize) -> FourierEvaluator {
        let sigma = make_covariance(&spec, d, 0).unwrap();
        FourierEvaluator::new(GridSpec::new(d, m.max(4), 20.0, m).unwrap(), sigma).unwrap()
    }

    #[test]
    fn separable_rank_one() {
        let f = FnTensor {
            dims: vec![5, 6],
            f: |i: &[usize]| C64::new((i[0] as f64 + 1.0).sin() + 2.0, 0.0) * C64::new(0.5, (i[1] as f64).cos()),
        };
        let dims = [(0, 5), (1, 6)].into_iter().collect();
        let topo = TreeTopology::path(&[0, 1], &dims).unwrap();
        let cache = CachedTensor::new(&f);
        let (net, rep) = tci_build_cached(&cache, &topo, TciOptions::new(1)).unwrap();
        assert_eq!(net.max_bond(), 1);
        assert!(rep.converged || rep.sweeps == DEFAULT_SWEEPS);
        for a in 0..5 {
            for b in 0..6 {
                assert!((net.evaluate(&[a, b]) - f.eval(&[a, b])).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn gaussian_pair_high_fidelity() {
        let ev = coeff_eval(GeneratorSpec::Chain { rho: 0.6 }, 2, 4);
        let topo = TreeTopology::uniform_path(2, 16).unwrap();
        let (net, _) = tci_build(&ev, &topo, TciOptions::new(8)).unwrap();
        let dense = ev.dense_coeff_tensor().unwrap();
        let f = overlap_fidelity(dense.data(), &net.contract_to_vector().unwrap()).unwrap();
        assert!(f >= 1.0 - 1e-6, "fidelity {f}");
    }

    #[test]
    fn interpolation_on_pivots_and_nesting() {
        let ev = coeff_eval(GeneratorSpec::Random { sigma_max: 0.4 }, 4, 3);
        let dims = (0..4).map(|l| (l, 8)).collect();
        let topo = TreeTopology::path(&[2, 0, 3, 1], &dims).unwrap();
        let cache = CachedTensor::new(&ev);
        let (net, rep) = tci_build_cached(&cache, &topo, TciOptions::new(4)).unwrap();
        assert!(pivots_nested(&topo, &rep.pivots));
        for idx in cross_entries(&rep.pivots) {
            assert!((net.evaluate(&idx) - ev.eval(&idx)).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_start_is_perturbed() {
        let f = FnTensor {
            dims: vec![3, 3],
            f: |i: &[usize]| if i[0] == 2 && i[1] == 1 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) },
        };
        let topo = TreeTopology::uniform_path(2, 3).unwrap();
        let (net, _) = tci_build(&f, &topo, TciOptions::new(2)).unwrap();
        assert!((net.evaluate(&[2, 1]).norm() - 1.0).abs() < 1e-12);
        let z = FnTensor { dims: vec![2, 2], f: |_: &[usize]| C64::new(0.0, 0.0) };
        assert!(matches!(tci_build(&z, &topo_2(), TciOptions::new(1)), Err(Error::PivotDegeneracy(_))));
    }

    #[test]
    fn leg_free_hub_is_absorbed() {
        // hub joined to {0}, {1, 2} and {3}, none of its own
        let ev = coeff_eval(GeneratorSpec::Random { sigma_max: 0.3 }, 4, 3);
        let dims: BTreeMap<usize, usize> = (0..4).map(|l| (l, 8)).collect();
        let nodes = vec![
            vec![Leg::Phys(0), Leg::Bond(0)],
            vec![Leg::Bond(1), Leg::Bond(0), Leg::Bond(2)],
            vec![Leg::Phys(1), Leg::Phys(2), Leg::Bond(1)],
            vec![Leg::Bond(2), Leg::Phys(3)],
        ];
        let topo = TreeTopology::new(nodes, vec![[0, 1], [1, 2], [1, 3]], dims).unwrap();
        let cache = CachedTensor::new(&ev);
        assert!(matches!(tci_build_cached(&cache, &topo, TciOptions::new(16)), Err(Error::Parameter(_))));
        let (net, _) = tci_build(&ev, &topo, TciOptions::new(16)).unwrap();
        assert_eq!(net.topology(), &topo);
        assert!(net.max_bond() > 1);
        let dense = ev.dense_coeff_tensor().unwrap();
        let f = overlap_fidelity(dense.data(), &net.contract_to_vector().unwrap()).unwrap();
        assert!(f >= 1.0 - 1e-8, "fidelity {f}");
    }

    fn topo_2() -> TreeTopology {
        TreeTopology::uniform_path(2, 2).unwrap()
    }

    #[test]
    fn maxvol_identity_rows() {
        let mut a = CMat::zeros(6, 3);
        for i in 0..3 {
            a[(i + 2, i)] = C64::new(1.0, 0.0);
        }
        let mut rows = maxvol(&a, 1e-2).unwrap();
        rows.sort();
        assert_eq!(rows, vec![2, 3, 4]);
        assert_eq!(maxvol(&CMat::zeros(4, 2), 1e-2), Err(Error::Rank));
    }

    #[test]
    fn maxvol_vandermonde() {
        let a = CMat::from_fn(8, 3, |i, j| C64::new((i as f64).powi(j as i32), 0.0));
        let rows = maxvol(&a, 1e-2).unwrap();
        let det = |r: &[usize]| CMat::from_fn(3, 3, |i, j| a[(r[i], j)]).determinant().norm();
        let best = det(&rows);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let mut r = [0usize; 3];
            loop {
                for x in r.iter_mut() {
                    *x = rng.gen_range(0..8);
                }
                if r[0] != r[1] && r[1] != r[2] && r[0] != r[2] {
                    break;
                }
            }
            assert!(best >= det(&r) - 1e-9);
        }
        let sub = CMat::from_fn(3, 3, |i, j| a[(rows[i], j)]);
        let coef = &a * sub.try_inverse().unwrap();
        assert!(coef.iter().all(|z| z.norm() <= 1.0 + 1e-2 + 1e-12));
    }
}
