//! Tree tensor networks: topology, canonical form, truncation with a
//! fidelity ledger, and dense contraction for verification.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std links in its own float methods under `cargo test`
use num_traits::Float;
use rand::Rng;

use crate::error::param;
use crate::linalg::{self, ksum, CMat};
use crate::tensor::Tensor;
use crate::{Error, Result, C64};

/// Largest dense vector [`TreeTensorNetwork::contract_to_vector`] will build.
pub const DENSE_CAP: usize = 1 << 24;
/// Singular values closer than this (relative to the largest) count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Leg {
    /// Physical index carrying the given label.
    Phys(usize),
    /// Virtual index on the given edge.
    Bond(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTopology {
    nodes: Vec<Vec<Leg>>,
    edges: Vec<[usize; 2]>,
    phys_dims: BTreeMap<usize, usize>,
}

impl TreeTopology {
    pub fn new(nodes: Vec<Vec<Leg>>, edges: Vec<[usize; 2]>, phys_dims: BTreeMap<usize, usize>) -> Result<Self> {
        let t = TreeTopology { nodes, edges, phys_dims };
        t.validate()?;
        Ok(t)
    }

    /// Path (MPS) over `order`, one physical leg per node.
    pub fn path(order: &[usize], dims: &BTreeMap<usize, usize>) -> Result<Self> {
        let n = order.len();
        let mut nodes = Vec::with_capacity(n);
        for (i, &label) in order.iter().enumerate() {
            let mut legs = Vec::new();
            if i > 0 {
                legs.push(Leg::Bond(i - 1));
            }
            legs.push(Leg::Phys(label));
            if i + 1 < n {
                legs.push(Leg::Bond(i));
            }
            nodes.push(legs);
        }
        let edges = (0..n.saturating_sub(1)).map(|i| [i, i + 1]).collect();
        Self::new(nodes, edges, dims.clone())
    }

    /// Path over labels `0..len` all of dimension `dim`.
    pub fn uniform_path(len: usize, dim: usize) -> Result<Self> {
        let dims = (0..len).map(|l| (l, dim)).collect();
        let order: Vec<usize> = (0..len).collect();
        Self::path(&order, &dims)
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(param("topology has no nodes"));
        }
        if self.edges.len() + 1 != n {
            return Err(param("a tree on n nodes has n - 1 edges"));
        }
        let mut seen_edge = vec![0usize; self.edges.len()];
        let mut seen_label = BTreeMap::new();
        for (v, legs) in self.nodes.iter().enumerate() {
            for leg in legs {
                match *leg {
                    Leg::Bond(e) => {
                        if e >= self.edges.len() || !self.edges[e].contains(&v) {
                            return Err(param(format!("node {v} lists edge {e} it is not on")));
                        }
                        seen_edge[e] += 1;
                    }
                    Leg::Phys(l) => {
                        if !self.phys_dims.contains_key(&l) {
                            return Err(param(format!("label {l} has no dimension")));
                        }
                        *seen_label.entry(l).or_insert(0usize) += 1;
                    }
                }
            }
        }
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if a >= n || b >= n || a == b || seen_edge[e] != 2 {
                return Err(param(format!("edge {e} is malformed")));
            }
        }
        if seen_label.len() != self.phys_dims.len() || seen_label.values().any(|&c| c != 1) {
            return Err(param("every label must appear on exactly one node"));
        }
        if self.phys_dims.values().any(|&d| d == 0) {
            return Err(param("physical dimensions must be positive"));
        }
        let (order, _) = self.traversal(0);
        if order.len() != n {
            return Err(param("topology is not connected"));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn legs(&self, node: usize) -> &[Leg] {
        &self.nodes[node]
    }

    pub fn nodes(&self) -> &[Vec<Leg>] {
        &self.nodes
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn phys_dims(&self) -> &BTreeMap<usize, usize> {
        &self.phys_dims
    }

    pub fn labels(&self) -> Vec<usize> {
        self.phys_dims.keys().copied().collect()
    }

    pub fn other_end(&self, e: usize, node: usize) -> usize {
        let [a, b] = self.edges[e];
        if a == node {
            b
        } else {
            a
        }
    }

    pub fn axis_of(&self, node: usize, leg: Leg) -> Option<usize> {
        self.nodes[node].iter().position(|&l| l == leg)
    }

    /// `(edge, neighbour)` pairs in leg order.
    pub fn neighbors(&self, node: usize) -> Vec<(usize, usize)> {
        self.nodes[node]
            .iter()
            .filter_map(|leg| match *leg {
                Leg::Bond(e) => Some((e, self.other_end(e, node))),
                Leg::Phys(_) => None,
            })
            .collect()
    }

    pub fn node_labels(&self, node: usize) -> Vec<usize> {
        self.nodes[node]
            .iter()
            .filter_map(|leg| match *leg {
                Leg::Phys(l) => Some(l),
                Leg::Bond(_) => None,
            })
            .collect()
    }

    pub fn node_of_label(&self, label: usize) -> Option<usize> {
        (0..self.nodes.len()).find(|&v| self.nodes[v].contains(&Leg::Phys(label)))
    }

    /// Preorder from `root` and the edge to each node's parent.
    pub fn traversal(&self, root: usize) -> (Vec<usize>, Vec<Option<usize>>) {
        let n = self.nodes.len();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(u) = stack.pop() {
            order.push(u);
            let nb = self.neighbors(u);
            for &(e, w) in nb.iter().rev() {
                if w < n && !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(e);
                    stack.push(w);
                }
            }
        }
        (order, parent)
    }

    /// Labels in the component of `edges[e][0]` and of `edges[e][1]` after
    /// removing edge `e`, both sorted.
    pub fn edge_split(&self, e: usize) -> (Vec<usize>, Vec<usize>) {
        let [a, _] = self.edges[e];
        let mut side = vec![false; self.nodes.len()];
        let mut stack = vec![a];
        side[a] = true;
        while let Some(u) = stack.pop() {
            for (f, w) in self.neighbors(u) {
                if f != e && !side[w] {
                    side[w] = true;
                    stack.push(w);
                }
            }
        }
        let mut left = Vec::new();
        let mut right = Vec::new();
        for v in 0..self.nodes.len() {
            for l in self.node_labels(v) {
                if side[v] {
                    left.push(l);
                } else {
                    right.push(l);
                }
            }
        }
        left.sort_unstable();
        right.sort_unstable();
        (left, right)
    }

    /// Labels on the side of `node` when edge `e` is removed.
    pub fn side_labels(&self, e: usize, node: usize) -> Vec<usize> {
        let (l, r) = self.edge_split(e);
        if self.edges[e][0] == node {
            l
        } else {
            r
        }
    }

    /// Nontrivial splits (both sides with at least two labels), each
    /// normalised to the side without the smallest label, sorted.
    pub fn splits(&self) -> Vec<Vec<usize>> {
        let first = self.phys_dims.keys().next().copied();
        let mut out: Vec<Vec<usize>> = (0..self.edges.len())
            .filter_map(|e| {
                let (l, r) = self.edge_split(e);
                if l.len() < 2 || r.len() < 2 {
                    return None;
                }
                Some(if Some(l[0]) == first { r } else { l })
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Node sequence from `a` to `b`.
    pub fn path_between(&self, a: usize, b: usize) -> Vec<usize> {
        let (_, parent) = self.traversal(a);
        let mut path = vec![b];
        let mut cur = b;
        while cur != a {
            let e = parent[cur].expect("tree is connected");
            cur = self.other_end(e, cur);
            path.push(cur);
        }
        path.reverse();
        path
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.neighbors(a).into_iter().find(|&(_, w)| w == b).map(|(e, _)| e)
    }

    pub(crate) fn set_node_legs(&mut self, node: usize, legs: Vec<Leg>) {
        self.nodes[node] = legs;
    }

    pub(crate) fn set_edge(&mut self, e: usize, ends: [usize; 2]) {
        self.edges[e] = ends;
    }

    /// Renames physical labels through `map` (old label -> new label).
    pub fn relabel(&mut self, map: &BTreeMap<usize, usize>) -> Result<()> {
        let mut dims = BTreeMap::new();
        for (&l, &d) in &self.phys_dims {
            let nl = *map.get(&l).unwrap_or(&l);
            if dims.insert(nl, d).is_some() {
                return Err(param("relabelling collides"));
            }
        }
        for legs in self.nodes.iter_mut() {
            for leg in legs.iter_mut() {
                if let Leg::Phys(l) = leg {
                    *l = *map.get(l).unwrap_or(l);
                }
            }
        }
        self.phys_dims = dims;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerStep {
    pub edge: usize,
    pub fidelity: f64,
    /// A singular value equal to the last kept one was discarded.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityLedger {
    steps: Vec<LedgerStep>,
    product: f64,
}

impl Default for FidelityLedger {
    fn default() -> Self {
        FidelityLedger { steps: Vec::new(), product: 1.0 }
    }
}

impl FidelityLedger {
    pub fn from_steps(steps: Vec<LedgerStep>) -> Self {
        let product = steps.iter().map(|s| s.fidelity).product();
        FidelityLedger { steps, product }
    }

    pub fn push(&mut self, step: LedgerStep) {
        self.product *= step.fidelity;
        self.steps.push(step);
    }

    pub fn steps(&self) -> &[LedgerStep] {
        &self.steps
    }

    pub fn product(&self) -> f64 {
        self.product
    }

    pub fn extend(&mut self, other: &FidelityLedger) {
        for s in &other.steps {
            self.push(*s);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Keep at most this many singular values per bond.
    Bond(usize),
    /// Keep the fewest values whose discarded weight is at most eps^2.
    Tail(f64),
    /// Both limits; the stricter wins.
    BondAndTail(usize, f64),
}

impl Truncation {
    fn check(&self) -> Result<()> {
        match *self {
            Truncation::Bond(0) | Truncation::BondAndTail(0, _) => Err(param("chi must be at least 1")),
            Truncation::Tail(e) | Truncation::BondAndTail(_, e) if !(0.0..1.0).contains(&e) => {
                Err(param("eps must lie in [0, 1)"))
            }
            _ => Ok(()),
        }
    }

    /// Number of values kept from a descending list.
    pub fn keep(&self, s: &[f64]) -> usize {
        let rank = linalg::numerical_rank(s).max(1);
        let total = ksum(s.iter().map(|x| x * x));
        let by_tail = |eps: f64| {
            let limit = eps * eps * total;
            let mut tail = total;
            for (r, x) in s.iter().enumerate() {
                if tail <= limit {
                    return r.max(1);
                }
                tail -= x * x;
            }
            s.len()
        };
        let k = match *self {
            Truncation::Bond(chi) => chi,
            Truncation::Tail(eps) => by_tail(eps),
            Truncation::BondAndTail(chi, eps) => chi.min(by_tail(eps)),
        };
        k.min(rank).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeTensorNetwork {
    topo: TreeTopology,
    tensors: Vec<Tensor>,
    center: Option<usize>,
    ledger: FidelityLedger,
}

impl TreeTensorNetwork {
    pub fn new(topo: TreeTopology, tensors: Vec<Tensor>) -> Result<Self> {
        Self::from_parts(topo, tensors, None, FidelityLedger::default())
    }

    pub fn from_parts(
        topo: TreeTopology,
        tensors: Vec<Tensor>,
        center: Option<usize>,
        ledger: FidelityLedger,
    ) -> Result<Self> {
        if tensors.len() != topo.node_count() {
            return Err(Error::Shape(format!("{} tensors for {} nodes", tensors.len(), topo.node_count())));
        }
        let mut bond = vec![None; topo.edge_count()];
        for (v, t) in tensors.iter().enumerate() {
            let legs = topo.legs(v);
            if t.rank() != legs.len() {
                return Err(Error::Shape(format!("node {v} has rank {} but {} legs", t.rank(), legs.len())));
            }
            for (ax, leg) in legs.iter().enumerate() {
                let d = t.shape()[ax];
                match *leg {
                    Leg::Phys(l) => {
                        if topo.phys_dims[&l] != d {
                            return Err(Error::Shape(format!("label {l} has dimension {d}")));
                        }
                    }
                    Leg::Bond(e) => match bond[e] {
                        None => bond[e] = Some(d),
                        Some(o) if o != d => {
                            return Err(Error::Shape(format!("edge {e} has dimensions {o} and {d}")));
                        }
                        _ => {}
                    },
                }
            }
        }
        if let Some(c) = center {
            if c >= topo.node_count() {
                return Err(Error::Index(format!("center {c}")));
            }
        }
        Ok(TreeTensorNetwork { topo, tensors, center, ledger })
    }

    /// Product state with the given single-site vectors.
    pub fn product_state(topo: TreeTopology, sites: &BTreeMap<usize, Vec<C64>>) -> Result<Self> {
        let mut tensors = Vec::with_capacity(topo.node_count());
        for v in 0..topo.node_count() {
            let legs = topo.legs(v).to_vec();
            let shape: Vec<usize> = legs
                .iter()
                .map(|leg| match *leg {
                    Leg::Phys(l) => topo.phys_dims()[&l],
                    Leg::Bond(_) => 1,
                })
                .collect();
            let mut bad = None;
            let t = Tensor::from_fn(&shape, |idx| {
                let mut x = C64::new(1.0, 0.0);
                for (leg, &i) in legs.iter().zip(idx) {
                    if let Leg::Phys(l) = *leg {
                        match sites.get(&l).and_then(|s| s.get(i)) {
                            Some(a) => x *= *a,
                            None => bad = Some(l),
                        }
                    }
                }
                x
            });
            if let Some(l) = bad {
                return Err(param(format!("missing site vector for label {l}")));
            }
            tensors.push(t);
        }
        Self::new(topo, tensors)
    }

    /// Random complex entries in the unit square with all bonds equal to `bond`.
    pub fn random(topo: TreeTopology, bond: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut tensors = Vec::with_capacity(topo.node_count());
        for v in 0..topo.node_count() {
            let shape: Vec<usize> = topo
                .legs(v)
                .iter()
                .map(|leg| match *leg {
                    Leg::Phys(l) => topo.phys_dims()[&l],
                    Leg::Bond(_) => bond,
                })
                .collect();
            tensors.push(Tensor::from_fn(&shape, |_| {
                C64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
            }));
        }
        Self::new(topo, tensors)
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topo
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensor(&self, node: usize) -> &Tensor {
        &self.tensors[node]
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    pub fn ledger(&self) -> &FidelityLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut FidelityLedger {
        &mut self.ledger
    }

    pub fn into_parts(self) -> (TreeTopology, Vec<Tensor>, Option<usize>, FidelityLedger) {
        (self.topo, self.tensors, self.center, self.ledger)
    }

    pub fn bond_dim(&self, e: usize) -> usize {
        let v = self.topo.edge(e)[0];
        let ax = self.topo.axis_of(v, Leg::Bond(e)).expect("edge leg");
        self.tensors[v].shape()[ax]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        (0..self.topo.edge_count()).map(|e| self.bond_dim(e)).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Total number of stored complex entries.
    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut TreeTopology, &mut Vec<Tensor>, &mut Option<usize>) {
        (&mut self.topo, &mut self.tensors, &mut self.center)
    }

    /// Deviation from the isometry condition of `node` with respect to the
    /// leg pointing along `edge`.
    pub fn isometry_defect(&self, node: usize, edge: usize) -> f64 {
        let ax = self.topo.axis_of(node, Leg::Bond(edge)).expect("edge on node");
        let rows: Vec<usize> = (0..self.tensors[node].rank()).filter(|&a| a != ax).collect();
        linalg::isometry_defect(&self.tensors[node].matricize(&rows))
    }

    /// Largest isometry defect over all non-center nodes.
    pub fn canonical_defect(&self) -> Option<f64> {
        let c = self.center?;
        let (order, parent) = self.topo.traversal(c);
        Some(order.iter().filter_map(|&v| parent[v].map(|e| self.isometry_defect(v, e))).fold(0.0, f64::max))
    }

    fn others(&self, node: usize, ax: usize) -> Vec<usize> {
        (0..self.tensors[node].rank()).filter(|&a| a != ax).collect()
    }

    /// Moves the orthogonality center across `e` from `u` with a QR step.
    fn qr_step(&mut self, e: usize, u: usize) -> Result<()> {
        let v = self.topo.other_end(e, u);
        let au = self.topo.axis_of(u, Leg::Bond(e)).expect("edge on node");
        let av = self.topo.axis_of(v, Leg::Bond(e)).expect("edge on node");
        let rows = self.others(u, au);
        let m = self.tensors[u].matricize(&rows);
        let (q, r) = linalg::qr(&m);
        let mut shape: Vec<usize> = rows.iter().map(|&a| self.tensors[u].shape()[a]).collect();
        shape.push(q.ncols());
        let t = Tensor::from_matrix(&q, &shape)?;
        self.tensors[u] = t.move_axis(shape.len() - 1, au);
        self.tensors[v] = self.tensors[v].apply_matrix(av, &r)?;
        self.center = Some(v);
        Ok(())
    }

    /// SVD step across `e` from the center `u`, keeping values according to
    /// `trunc`. The center moves to the other end and the state is
    /// renormalised. Returns the kept weight fraction and tie flag.
    pub(crate) fn svd_step(&mut self, e: usize, u: usize, trunc: Truncation) -> Result<LedgerStep> {
        let v = self.topo.other_end(e, u);
        let au = self.topo.axis_of(u, Leg::Bond(e)).expect("edge on node");
        let av = self.topo.axis_of(v, Leg::Bond(e)).expect("edge on node");
        let rows = self.others(u, au);
        let m = self.tensors[u].matricize(&rows);
        let dec = linalg::svd(&m)?;
        let total = ksum(dec.s.iter().map(|x| x * x));
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::DegenerateState);
        }
        let k = trunc.keep(&dec.s);
        let kept = ksum(dec.s[..k].iter().map(|x| x * x));
        let tie = k < dec.s.len() && (dec.s[k - 1] - dec.s[k]).abs() <= TIE_TOLERANCE * dec.s[0];
        let scale = 1.0 / kept.sqrt();
        let uk = dec.u.columns(0, k).into_owned();
        let mut svt = dec.vt.rows(0, k).into_owned();
        for i in 0..k {
            let f = C64::new(dec.s[i] * scale, 0.0);
            for j in 0..svt.ncols() {
                svt[(i, j)] *= f;
            }
        }
        let mut shape: Vec<usize> = rows.iter().map(|&a| self.tensors[u].shape()[a]).collect();
        shape.push(k);
        let t = Tensor::from_matrix(&uk, &shape)?;
        self.tensors[u] = t.move_axis(shape.len() - 1, au);
        self.tensors[v] = self.tensors[v].apply_matrix(av, &svt)?;
        self.center = Some(v);
        Ok(LedgerStep { edge: e, fidelity: (kept / total).min(1.0), tie })
    }

    fn orthogonalize(&mut self, center: usize) -> Result<f64> {
        if center >= self.topo.node_count() {
            return Err(Error::Index(format!("center {center}")));
        }
        let (order, parent) = self.topo.traversal(center);
        for &v in order.iter().rev() {
            if let Some(e) = parent[v] {
                self.qr_step(e, v)?;
            }
        }
        Ok(self.tensors[center].norm())
    }

    /// Brings the net into canonical form with the given center and unit norm.
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        let nrm = self.orthogonalize(center)?;
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::DegenerateState);
        }
        self.tensors[center].scale(C64::new(1.0 / nrm, 0.0));
        self.center = Some(center);
        Ok(())
    }

    pub fn canonicalized(mut self, center: usize) -> Result<Self> {
        self.canonicalize(center)?;
        Ok(self)
    }

    /// Moves the center to `target` along the tree path with QR steps,
    /// canonicalizing first if needed.
    pub fn move_center(&mut self, target: usize) -> Result<()> {
        let Some(c) = self.center else {
            return self.canonicalize(target);
        };
        let path = self.topo.path_between(c, target);
        for w in path.windows(2) {
            let e = self.topo.edge_between(w[0], w[1]).expect("adjacent");
            self.qr_step(e, w[0])?;
        }
        Ok(())
    }

    /// Truncates every bond in one depth-first sweep from the center,
    /// recording one ledger step per bond. The center is restored.
    pub fn truncate(&mut self, trunc: Truncation) -> Result<FidelityLedger> {
        trunc.check()?;
        let c = match self.center {
            Some(c) => c,
            None => {
                self.canonicalize(0)?;
                0
            }
        };
        let mut local = FidelityLedger::default();
        let (order, parent) = self.topo.traversal(c);
        let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.topo.node_count()];
        for &v in &order {
            if let Some(e) = parent[v] {
                children[self.topo.other_end(e, v)].push((e, v));
            }
        }
        let mut stack: Vec<(usize, usize)> = vec![(c, 0)];
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < children[u].len() {
                let (e, v) = children[u][*next];
                *next += 1;
                let step = self.svd_step(e, u, trunc)?;
                local.push(step);
                stack.push((v, 0));
            } else {
                stack.pop();
                if let Some(&(p, _)) = stack.last() {
                    let e = parent[u].expect("child has parent");
                    self.qr_step(e, u)?;
                    debug_assert_eq!(self.center, Some(p));
                }
            }
        }
        self.ledger.extend(&local);
        Ok(local)
    }

    pub fn truncated(mut self, trunc: Truncation) -> Result<Self> {
        self.truncate(trunc)?;
        Ok(self)
    }

    /// Normalised singular values across edge `e`; moves the center onto an
    /// end of `e`.
    pub fn bond_spectrum(&mut self, e: usize) -> Result<Vec<f64>> {
        let [a, b] = self.topo.edge(e);
        let u = match self.center {
            Some(c) if c == b => b,
            _ => {
                self.move_center(a)?;
                a
            }
        };
        let au = self.topo.axis_of(u, Leg::Bond(e)).expect("edge");
        let rows = self.others(u, au);
        let s = linalg::svd(&self.tensors[u].matricize(&rows))?.s;
        let nrm = ksum(s.iter().map(|x| x * x)).sqrt();
        Ok(s.into_iter().map(|x| x / nrm).collect())
    }

    /// Contracts the whole network. Axes follow ascending label order.
    pub fn contract_all(&self) -> Result<Tensor> {
        let total =
            self.topo.phys_dims().values().try_fold(1usize, |acc, &d| acc.checked_mul(d).filter(|&x| x <= DENSE_CAP));
        if total.is_none() {
            return Err(Error::Capacity("dense state larger than 2^24 entries".into()));
        }
        let (order, parent) = self.topo.traversal(0);
        let mut acc = self.tensors[order[0]].clone();
        let mut tags: Vec<Leg> = self.topo.legs(order[0]).to_vec();
        for &v in &order[1..] {
            let e = parent[v].expect("non-root");
            let a = tags.iter().position(|&l| l == Leg::Bond(e)).expect("parent absorbed");
            let b = self.topo.axis_of(v, Leg::Bond(e)).expect("edge");
            acc = acc.contract(a, &self.tensors[v], b)?;
            tags.remove(a);
            tags.extend(self.topo.legs(v).iter().filter(|&&l| l != Leg::Bond(e)));
        }
        let mut perm: Vec<usize> = (0..tags.len()).collect();
        perm.sort_by_key(|&i| tags[i]);
        Ok(acc.permute(&perm))
    }

    /// Dense amplitudes with the smallest label as the most significant digit.
    pub fn contract_to_vector(&self) -> Result<Vec<C64>> {
        Ok(self.contract_all()?.into_data())
    }

    /// Single amplitude; `index` maps label -> value in ascending label order.
    pub fn evaluate(&self, index: &[usize]) -> C64 {
        let labels = self.topo.labels();
        let value_of = |l: usize| index[labels.binary_search(&l).expect("known label")];
        let (order, parent) = self.topo.traversal(0);
        let mut msgs: Vec<Option<Tensor>> = vec![None; self.topo.node_count()];
        for &v in order.iter().rev() {
            let legs = self.topo.legs(v);
            let mut t = self.tensors[v].clone();
            let mut tags: Vec<Leg> = legs.to_vec();
            for ax in (0..legs.len()).rev() {
                if let Leg::Phys(l) = legs[ax] {
                    t = t.slice(ax, value_of(l));
                    tags.remove(ax);
                }
            }
            for (e, w) in self.topo.neighbors(v) {
                if parent[v] == Some(e) {
                    continue;
                }
                let m = msgs[w].take().expect("child processed");
                let ax = tags.iter().position(|&l| l == Leg::Bond(e)).expect("edge");
                t = t.contract(ax, &m, 0).expect("bond dims agree");
                tags.remove(ax);
            }
            msgs[v] = Some(t);
        }
        msgs[order[0]].take().expect("root").data()[0]
    }

    /// Norm of the represented state.
    pub fn norm(&self) -> Result<f64> {
        if let Some(c) = self.center {
            return Ok(self.tensors[c].norm());
        }
        self.clone().orthogonalize(0)
    }

    /// Joins `self` and `other` by turning label `a` of `self` and label `b`
    /// of `other` into one new bond. Remaining labels must be disjoint.
    pub fn join(self, a: usize, other: TreeTensorNetwork, b: usize) -> Result<TreeTensorNetwork> {
        let da = *self.topo.phys_dims.get(&a).ok_or_else(|| param("unknown label"))?;
        let db = *other.topo.phys_dims.get(&b).ok_or_else(|| param("unknown label"))?;
        if da != db {
            return Err(Error::DimensionMismatch(da, db));
        }
        let off_n = self.topo.node_count();
        let off_e = self.topo.edge_count();
        let new_e = off_e + other.topo.edge_count();
        let mut nodes = self.topo.nodes.clone();
        for legs in &other.topo.nodes {
            nodes.push(
                legs.iter()
                    .map(|&l| match l {
                        Leg::Bond(e) => Leg::Bond(e + off_e),
                        Leg::Phys(x) if x == b => Leg::Bond(new_e),
                        p => p,
                    })
                    .collect(),
            );
        }
        for legs in nodes.iter_mut().take(off_n) {
            for l in legs.iter_mut() {
                if *l == Leg::Phys(a) {
                    *l = Leg::Bond(new_e);
                }
            }
        }
        let na = self.topo.node_of_label(a).expect("label on a node");
        let nb = other.topo.node_of_label(b).expect("label on a node") + off_n;
        let mut edges = self.topo.edges.clone();
        edges.extend(other.topo.edges.iter().map(|&[x, y]| [x + off_n, y + off_n]));
        edges.push([na, nb]);
        let mut dims = self.topo.phys_dims.clone();
        dims.remove(&a);
        for (&l, &d) in &other.topo.phys_dims {
            if l != b && dims.insert(l, d).is_some() {
                return Err(param(format!("label {l} appears in both networks")));
            }
        }
        let topo = TreeTopology::new(nodes, edges, dims)?;
        let mut tensors = self.tensors;
        tensors.extend(other.tensors);
        let mut ledger = self.ledger;
        ledger.extend(&other.ledger);
        Self::from_parts(topo, tensors, None, ledger)
    }
}

/// `-sum s^2 ln s^2` of a normalised singular value list.
pub fn entanglement_entropy(singulars: &[f64]) -> Result<f64> {
    let total = ksum(singulars.iter().map(|s| s * s));
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Normalization(total));
    }
    Ok(ksum(singulars.iter().map(|s| {
        let p = s * s;
        if p > 0.0 {
            -p * p.ln()
        } else {
            0.0
        }
    })))
}

/// Distance between normalised states implied by a squared fidelity `f`.
pub fn frobenius_from_fidelity(f: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(param("fidelity must lie in [0, 1]"));
    }
    Ok((2.0 * (1.0 - f.sqrt())).max(0.0).sqrt())
}

/// Inverse of [`frobenius_from_fidelity`].
pub fn fidelity_from_frobenius(d: f64) -> Result<f64> {
    if !(0.0..=2f64.sqrt()).contains(&d) {
        return Err(param("distance must lie in [0, sqrt 2]"));
    }
    let r = 1.0 - d * d / 2.0;
    Ok(r * r)
}

/// `|<u|v>|^2` of two equally sized vectors.
pub fn overlap_fidelity(u: &[C64], v: &[C64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let ip: C64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    let nu = ksum(u.iter().map(|z| z.norm_sqr()));
    let nv = ksum(v.iter().map(|z| z.norm_sqr()));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateState);
    }
    Ok((ip.norm_sqr() / (nu * nv)).min(1.0))
}

/// Matrix of a node reshaped with `row_legs` as rows.
pub fn node_matrix(net: &TreeTensorNetwork, node: usize, row_legs: &[Leg]) -> CMat {
    let rows: Vec<usize> = row_legs.iter().map(|&l| net.topology().axis_of(node, l).expect("leg on node")).collect();
    net.tensor(node).matricize(&rows)
}
