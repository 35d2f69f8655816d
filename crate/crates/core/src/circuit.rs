//! Inverse-QFT networks, composition with coefficient networks, and
//! synthesis of canonical networks into isometry placements with costs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // std links in its own float methods under `cargo test`
use num_traits::Float;

use crate::fourier::{inverse_dft_matrix, wavenumber};
use crate::linalg::{self, CMat};
use crate::tensor::Tensor;
use crate::ttn::{Leg, TreeTensorNetwork, TreeTopology, Truncation};
use crate::{Error, Result, C64};

/// Offset that keeps coefficient labels clear of qubit labels while grafting.
const GRAFT_BASE: usize = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementKind {
    /// A tensor of the network turned into an isometry.
    Isometry,
    /// Symbolic inverse QFT on one dimension's register.
    InverseQft { dimension: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    /// Output qubits; the first `in_qubits` of them are also the inputs.
    pub targets: Vec<usize>,
    pub in_qubits: usize,
    /// `2^q x 2^p` isometry, rows and columns big-endian over the targets.
    pub matrix: CMat,
    pub kind: PlacementKind,
    /// Placement that produced this one's input qubits.
    pub parent: Option<usize>,
}

impl Placement {
    pub fn out_qubits(&self) -> usize {
        self.targets.len()
    }

    /// `2^(p+q)`, or 0 for symbolic placements.
    pub fn cnot_cost(&self) -> u64 {
        match self.kind {
            PlacementKind::Isometry => 1u64 << (self.in_qubits + self.out_qubits()),
            PlacementKind::InverseQft { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumCircuit {
    pub qubits: usize,
    pub placements: Vec<Placement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CostReport {
    /// Sum of `2^(p+q)` over isometry placements.
    pub cnot_count: u64,
    /// Largest root-to-leaf sum of `2^(p+q)`.
    pub depth: u64,
    pub per_placement: Vec<u64>,
    /// Inverse-QFT stage, kept apart so comparisons can exclude it.
    pub qft_cnots: u64,
    pub qft_depth: u64,
}

/// CNOT count of a `qubits`-qubit QFT in the standard construction.
pub fn qft_cnot_count(qubits: usize) -> u64 {
    let q = qubits as u64;
    q * q.saturating_sub(1) / 2
}

/// Recomputes the cost metrics of `circ` from its placements.
pub fn cost_report(circ: &QuantumCircuit) -> CostReport {
    let per: Vec<u64> = circ.placements.iter().map(|p| p.cnot_cost()).collect();
    let mut path = vec![0u64; per.len()];
    let mut depth = 0;
    for (i, p) in circ.placements.iter().enumerate() {
        path[i] = per[i] + p.parent.map_or(0, |j| path[j]);
        depth = depth.max(path[i]);
    }
    let qft: Vec<(usize, usize)> = circ
        .placements
        .iter()
        .filter_map(|p| match p.kind {
            PlacementKind::InverseQft { .. } => Some((p.in_qubits, p.out_qubits())),
            PlacementKind::Isometry => None,
        })
        .collect();
    let (qft_cnots, qft_depth) = if qft.is_empty() {
        (0, 0)
    } else {
        let fourier_qubits: usize = qft.iter().map(|q| q.0).sum();
        (qft_cnot_count(fourier_qubits), qft.iter().map(|q| q.1 as u64).max().unwrap_or(0))
    };
    CostReport { cnot_count: per.iter().sum(), depth, per_placement: per, qft_cnots, qft_depth }
}

/// Cost of loading all `2^(m D)` coefficients with one state preparation,
/// followed by per-dimension inverse QFTs.
pub fn fsl_baseline_cost(dim: usize, n: usize, m: usize) -> Result<CostReport> {
    if dim == 0 || n == 0 || m == 0 || m > n || m * dim >= 63 {
        return Err(crate::error::param("need positive D, 1 <= m <= n and m D < 63"));
    }
    let prep = 1u64 << (m * dim);
    Ok(CostReport {
        cnot_count: prep,
        depth: prep,
        per_placement: vec![prep],
        qft_cnots: qft_cnot_count(m * dim),
        qft_depth: n as u64,
    })
}

/// Label of the wavenumber input leg of [`build_qft_ttn`].
pub fn qft_input_label(n: usize) -> usize {
    n
}

/// Inverse QFT of one dimension as a tree: a chain of copy tensors over the
/// `2^m` wavenumbers feeding one phase tensor per output qubit,
/// `A_j[k][b] = exp(2 pi i k b / 2^(j+1)) / sqrt 2` with signed `k`. Qubit
/// `j` carries label `j` (qubit 0 most significant); the wavenumber input is
/// label `n`.
pub fn build_qft_ttn(n: usize, m: usize) -> Result<TreeTensorNetwork> {
    if m == 0 || m > n {
        return Err(crate::error::param("need 1 <= m <= n"));
    }
    let modes = 1usize << m;
    let input = qft_input_label(n);
    let mut dims: BTreeMap<usize, usize> = (0..n).map(|j| (j, 2)).collect();
    dims.insert(input, modes);
    let h = 1.0 / 2f64.sqrt();
    let phase = |j: usize| {
        Tensor::from_fn(&[modes, 2], move |ix| {
            if ix[1] == 0 {
                return C64::new(h, 0.0);
            }
            let period = 1i64 << (j + 1);
            let r = wavenumber(ix[0], modes).rem_euclid(period) as f64;
            let ang = 2.0 * PI * r / period as f64;
            C64::new(h * ang.cos(), h * ang.sin())
        })
    };
    if n == 1 {
        let topo = TreeTopology::new(vec![vec![Leg::Phys(input), Leg::Phys(0)]], vec![], dims)?;
        return TreeTensorNetwork::new(topo, vec![phase(0)]);
    }
    // nodes 0..n-1: copy tensors C_0..C_{n-2}; nodes n-1..2n-1: phase tensors A_j
    let copies = n - 1;
    let a_node = |j: usize| copies + j;
    let mut nodes: Vec<Vec<Leg>> = Vec::with_capacity(2 * n - 1);
    let mut edges: Vec<[usize; 2]> = Vec::new();
    // edge j (0..n): copy chain feeding A_j; edges n..: chain links
    for j in 0..n {
        let owner = if j + 1 < n { j } else { n - 2 };
        edges.push([owner, a_node(j)]);
    }
    for c in 0..copies.saturating_sub(1) {
        edges.push([c, c + 1]);
    }
    for c in 0..copies {
        let first = if c == 0 { Leg::Phys(input) } else { Leg::Bond(n + c - 1) };
        let last = if c + 1 < copies { Leg::Bond(n + c) } else { Leg::Bond(n - 1) };
        nodes.push(vec![first, Leg::Bond(c), last]);
    }
    let mut tensors: Vec<Tensor> = (0..copies)
        .map(|_| {
            Tensor::from_fn(&[modes, modes, modes], |ix| {
                if ix[0] == ix[1] && ix[1] == ix[2] {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    for j in 0..n {
        nodes.push(vec![Leg::Bond(j), Leg::Phys(j)]);
        tensors.push(phase(j));
    }
    let topo = TreeTopology::new(nodes, edges, dims)?;
    TreeTensorNetwork::new(topo, tensors)
}

/// Grafts an inverse-QFT network onto every coefficient leg (label `d`
/// becomes qubits `d n .. d n + n`), then canonicalizes and truncates every
/// bond to `chi`. The ledger gains one step per bond.
pub fn compose_and_compress(coeff: &TreeTensorNetwork, n: usize, m: usize, chi: usize) -> Result<TreeTensorNetwork> {
    let modes = 1usize << m;
    let labels = coeff.topology().labels();
    for &l in &labels {
        if coeff.topology().phys_dims()[&l] != modes {
            return Err(Error::Shape(format!("coefficient label {l} is not of dimension 2^{m}")));
        }
    }
    let mut net = coeff.clone();
    let shift: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, GRAFT_BASE + l)).collect();
    {
        let (topo, _, _) = net.parts_mut();
        topo.relabel(&shift)?;
    }
    for &d in &labels {
        let mut q = build_qft_ttn(n, m)?;
        let mut map: BTreeMap<usize, usize> = (0..n).map(|j| (j, d * n + j)).collect();
        map.insert(qft_input_label(n), GRAFT_BASE * 2 + d);
        {
            let (topo, _, _) = q.parts_mut();
            topo.relabel(&map)?;
        }
        net = net.join(GRAFT_BASE + d, q, GRAFT_BASE * 2 + d)?;
    }
    let center = coeff.center().unwrap_or(0);
    net.canonicalize(center)?;
    net.truncate(Truncation::Bond(chi))?;
    Ok(net)
}

fn ceil_log2(x: usize) -> usize {
    let mut p = 0;
    while (1usize << p) < x {
        p += 1;
    }
    p
}

/// Converts a canonical network into isometry placements, root first.
/// `qubits_of` maps each label to its qubits (most significant first); the
/// label's dimension must be `2^len`.
pub fn synthesize_with(
    net: &TreeTensorNetwork,
    qubits_of: &BTreeMap<usize, Vec<usize>>,
    total_qubits: usize,
) -> Result<QuantumCircuit> {
    let mut work;
    let net = if net.center().is_some() {
        net
    } else {
        work = net.clone();
        work.canonicalize(0)?;
        &work
    };
    let topo = net.topology();
    for (&l, &d) in topo.phys_dims() {
        let qs = qubits_of.get(&l).ok_or_else(|| Error::Shape(format!("label {l} has no qubits")))?;
        if d != 1usize << qs.len() {
            return Err(Error::Shape(format!("label {l} of dimension {d} is not {} qubits", qs.len())));
        }
        if qs.iter().any(|&q| q >= total_qubits) {
            return Err(Error::Shape(format!("label {l} maps outside the register")));
        }
    }
    let root = net.center().expect("canonical");
    let (order, parent) = topo.traversal(root);
    let nn = topo.node_count();
    let mut outputs: Vec<Vec<usize>> = vec![Vec::new(); nn];
    let mut bond_qubits: Vec<Vec<usize>> = vec![Vec::new(); topo.edge_count()];
    for &v in order.iter().rev() {
        let mut out: Vec<usize> = Vec::new();
        for l in topo.node_labels(v) {
            out.extend(&qubits_of[&l]);
        }
        for (e, _) in topo.neighbors(v) {
            if parent[v] != Some(e) {
                out.extend(&bond_qubits[e]);
            }
        }
        out.sort_unstable();
        if let Some(e) = parent[v] {
            let p = ceil_log2(net.bond_dim(e));
            if p > out.len() {
                return Err(Error::Shape(format!("bond {e} needs {p} qubits but node {v} outputs {}", out.len())));
            }
            bond_qubits[e] = out[..p].to_vec();
        }
        outputs[v] = out;
    }
    let mut placement_of = vec![usize::MAX; nn];
    let mut placements = Vec::with_capacity(nn);
    for &v in &order {
        let targets = outputs[v].clone();
        let q = targets.len();
        let slot: BTreeMap<usize, usize> = targets.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        let legs = topo.legs(v);
        let t = net.tensor(v);
        let (p, chi_in, in_axis) = match parent[v] {
            Some(e) => (ceil_log2(net.bond_dim(e)), net.bond_dim(e), topo.axis_of(v, Leg::Bond(e))),
            None => (0, 1, None),
        };
        // bit positions (within the row index) for each output digit of every leg
        let mut leg_bits: Vec<Vec<usize>> = Vec::with_capacity(legs.len());
        for leg in legs {
            let qs: Vec<usize> = match *leg {
                Leg::Phys(l) => qubits_of[&l].clone(),
                Leg::Bond(e) if parent[v] == Some(e) => Vec::new(),
                Leg::Bond(e) => bond_qubits[e].clone(),
            };
            leg_bits.push(qs.iter().map(|qb| q - 1 - slot[qb]).collect());
        }
        let mut mat = CMat::zeros(1 << q, chi_in);
        let shape = t.shape().to_vec();
        let mut idx = vec![0usize; shape.len()];
        for &val in t.data() {
            let mut row = 0usize;
            let mut col = 0usize;
            for (ax, &i) in idx.iter().enumerate() {
                if Some(ax) == in_axis {
                    col = i;
                    continue;
                }
                let bits = &leg_bits[ax];
                let w = bits.len();
                for (s, &pos) in bits.iter().enumerate() {
                    if (i >> (w - 1 - s)) & 1 == 1 {
                        row |= 1 << pos;
                    }
                }
            }
            mat[(row, col)] += val;
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        let defect = linalg::isometry_defect(&mat);
        if defect > 1e-8 {
            return Err(Error::CircuitValidity(format!("node {v} is not an isometry (defect {defect:.2e})")));
        }
        let matrix = if chi_in < (1 << p) { linalg::complete_isometry(&mat, 1 << p) } else { mat };
        placement_of[v] = placements.len();
        placements.push(Placement {
            targets,
            in_qubits: p,
            matrix,
            kind: PlacementKind::Isometry,
            parent: parent[v].map(|e| placement_of[topo.other_end(e, v)]),
        });
    }
    Ok(QuantumCircuit { qubits: total_qubits, placements })
}

/// Synthesizes a qubit-level network (every label of dimension 2; label =
/// qubit index).
pub fn synthesize(net: &TreeTensorNetwork) -> Result<(QuantumCircuit, CostReport)> {
    let labels = net.topology().labels();
    let map: BTreeMap<usize, Vec<usize>> = labels.iter().map(|&l| (l, vec![l])).collect();
    for (&l, &d) in net.topology().phys_dims() {
        if d != 2 {
            return Err(Error::Shape(format!("label {l} has dimension {d}, expected a qubit")));
        }
    }
    let total = labels.iter().max().map_or(0, |&l| l + 1);
    let circ = synthesize_with(net, &map, total)?;
    let cost = cost_report(&circ);
    Ok((circ, cost))
}

/// Synthesizes a coefficient network (label `d` of dimension `2^m`) on the
/// first `m` qubits of each dimension's register, then appends a symbolic
/// inverse QFT per dimension.
pub fn synthesize_with_qft_gates(
    coeff: &TreeTensorNetwork,
    n: usize,
    m: usize,
) -> Result<(QuantumCircuit, CostReport)> {
    let labels = coeff.topology().labels();
    let dim = labels.len();
    if labels.iter().enumerate().any(|(i, &l)| i != l) {
        return Err(Error::Shape("coefficient labels must be 0..D".into()));
    }
    let map: BTreeMap<usize, Vec<usize>> = labels.iter().map(|&d| (d, (d * n..d * n + m).collect())).collect();
    let mut circ = synthesize_with(coeff, &map, dim * n)?;
    let f = inverse_dft_matrix(n, m);
    for d in 0..dim {
        let owner =
            circ.placements.iter().rposition(|p| p.kind == PlacementKind::Isometry && p.targets.contains(&(d * n)));
        circ.placements.push(Placement {
            targets: (d * n..(d + 1) * n).collect(),
            in_qubits: m,
            matrix: f.clone(),
            kind: PlacementKind::InverseQft { dimension: d },
            parent: owner,
        });
    }
    let cost = cost_report(&circ);
    Ok((circ, cost))
}
