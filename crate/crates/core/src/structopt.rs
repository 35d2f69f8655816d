//! Entanglement-driven structure search: re-pair the four legs around a
//! bond whenever another pairing carries less entanglement.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std links in its own float methods under `cargo test`
use num_traits::Float;

use crate::linalg::{self, ksum, CMat};
use crate::tensor::Tensor;
use crate::ttn::{entanglement_entropy, LedgerStep, Leg, TreeTensorNetwork, Truncation};
use crate::{Error, Result, C64};

/// Entropy differences below this keep the current pairing.
pub const ENTROPY_TIE: f64 = 1e-10;

/// Leg pairings of `T_abcd`: `(ab|cd)` (current), `(ac|bd)`, `(ad|bc)`.
pub const PAIRINGS: [[usize; 4]; 3] = [[0, 1, 2, 3], [0, 2, 1, 3], [0, 3, 1, 2]];

#[derive(Debug, Clone, PartialEq)]
pub struct ReconnectionChoice {
    pub edge: usize,
    /// The four external legs `a, b` (first node) and `c, d` (second node).
    pub legs: [Leg; 4],
    pub entropies: [f64; 3],
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconnectionRecord {
    pub sweep: usize,
    pub choice: ReconnectionChoice,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub sweeps: usize,
    pub visits: usize,
    pub reconnections: Vec<ReconnectionRecord>,
}

fn truncated_entropy(s: &[f64], chi: usize) -> Result<f64> {
    let k = Truncation::Bond(chi).keep(s);
    let nrm = ksum(s[..k].iter().map(|x| x * x)).sqrt();
    if nrm == 0.0 {
        return Err(Error::DegenerateState);
    }
    let kept: Vec<f64> = s[..k].iter().map(|x| x / nrm).collect();
    entanglement_entropy(&kept)
}

/// Compares the three pairings of the legs around `edge` and re-splits the
/// bond along the one of least entanglement, keeping at most `chi` values.
/// The center moves onto the far endpoint. Returns `None` when either
/// endpoint does not have exactly three legs.
pub fn local_reconnect(net: &mut TreeTensorNetwork, edge: usize, chi: usize) -> Result<Option<ReconnectionChoice>> {
    if chi == 0 {
        return Err(crate::error::param("chi must be at least 1"));
    }
    let [a0, b0] = net.topology().edge(edge);
    let u = match net.center() {
        Some(c) if c == b0 => b0,
        _ => {
            net.move_center(a0)?;
            a0
        }
    };
    let v = net.topology().other_end(edge, u);
    let lu: Vec<Leg> = net.topology().legs(u).iter().copied().filter(|&l| l != Leg::Bond(edge)).collect();
    let lv: Vec<Leg> = net.topology().legs(v).iter().copied().filter(|&l| l != Leg::Bond(edge)).collect();
    if lu.len() != 2 || lv.len() != 2 {
        return Ok(None);
    }
    let au = net.topology().axis_of(u, Leg::Bond(edge)).expect("bond");
    let av = net.topology().axis_of(v, Leg::Bond(edge)).expect("bond");
    let t = net.tensor(u).contract(au, net.tensor(v), av)?;
    let legs = [lu[0], lu[1], lv[0], lv[1]];
    let mut entropies = [0.0; 3];
    for (p, pairing) in PAIRINGS.iter().enumerate() {
        let s = linalg::singular_values(&t.matricize(&pairing[..2]))?;
        entropies[p] = truncated_entropy(&s, chi)?;
    }
    let mut chosen = 0;
    for p in 1..3 {
        if entropies[p] < entropies[chosen] - ENTROPY_TIE {
            chosen = p;
        }
    }
    let pairing = PAIRINGS[chosen];
    let dec = linalg::svd(&t.matricize(&pairing[..2]))?;
    let total = ksum(dec.s.iter().map(|x| x * x));
    let k = Truncation::Bond(chi).keep(&dec.s);
    let kept = ksum(dec.s[..k].iter().map(|x| x * x));
    let tie = k < dec.s.len() && (dec.s[k - 1] - dec.s[k]).abs() <= crate::ttn::TIE_TOLERANCE * dec.s[0];
    let scale = 1.0 / kept.sqrt();
    let shape = t.shape().to_vec();
    let left: Vec<usize> = vec![shape[pairing[0]], shape[pairing[1]], k];
    let right: Vec<usize> = vec![k, shape[pairing[2]], shape[pairing[3]]];
    let uk: CMat = dec.u.columns(0, k).into_owned();
    let mut svt: CMat = dec.vt.rows(0, k).into_owned();
    for i in 0..k {
        let f = C64::new(dec.s[i] * scale, 0.0);
        for j in 0..svt.ncols() {
            svt[(i, j)] *= f;
        }
    }
    let tu = Tensor::from_matrix(&uk, &left)?;
    let tv = Tensor::from_matrix(&svt, &right)?;
    let new_u = vec![legs[pairing[0]], legs[pairing[1]], Leg::Bond(edge)];
    let new_v = vec![Leg::Bond(edge), legs[pairing[2]], legs[pairing[3]]];
    {
        let (topo, tensors, center) = net.parts_mut();
        for (node, node_legs) in [(u, &new_u), (v, &new_v)] {
            for leg in node_legs.iter() {
                if let Leg::Bond(f) = *leg {
                    if f != edge {
                        let [x, y] = topo.edge(f);
                        let other = if x == u || x == v { y } else { x };
                        topo.set_edge(f, [node, other]);
                    }
                }
            }
        }
        topo.set_node_legs(u, new_u);
        topo.set_node_legs(v, new_v);
        tensors[u] = tu;
        tensors[v] = tv;
        *center = Some(v);
    }
    net.ledger_mut().push(LedgerStep { edge, fidelity: (kept / total).min(1.0), tie });
    Ok(Some(ReconnectionChoice { edge, legs, entropies, chosen }))
}

/// Directed bond moves of an Euler tour from `root`: `(edge, from)` going
/// down, then the same edge from the child going back up.
fn euler_tour(net: &TreeTensorNetwork, root: usize) -> Vec<(usize, usize)> {
    let topo = net.topology();
    let (order, parent) = topo.traversal(root);
    let mut children = vec![Vec::new(); topo.node_count()];
    for &v in &order {
        if let Some(e) = parent[v] {
            children[topo.other_end(e, v)].push((e, v));
        }
    }
    let mut tour = Vec::new();
    let mut stack = vec![(root, 0usize)];
    while let Some(&mut (u, ref mut next)) = stack.last_mut() {
        if *next < children[u].len() {
            let (e, v) = children[u][*next];
            *next += 1;
            tour.push((e, u));
            stack.push((v, 0));
        } else {
            stack.pop();
            if let Some(e) = parent[u] {
                tour.push((e, u));
            }
        }
    }
    tour
}

/// Sweeps [`local_reconnect`] over the tree until a sweep changes nothing or
/// `max_sweeps` is reached.
pub fn optimize_structure(net: &mut TreeTensorNetwork, max_sweeps: usize, chi: usize) -> Result<SweepReport> {
    let mut report = SweepReport::default();
    if net.center().is_none() {
        net.canonicalize(0)?;
    }
    for sweep in 0..max_sweeps {
        report.sweeps = sweep + 1;
        let start = net.center().expect("canonical");
        let mut changed = 0;
        for (e, from) in euler_tour(net, start) {
            let [a, b] = net.topology().edge(e);
            let from = if from == a || from == b {
                from
            } else {
                let c = net.center().expect("canonical");
                if net.topology().path_between(c, a).len() <= net.topology().path_between(c, b).len() {
                    a
                } else {
                    b
                }
            };
            net.move_center(from)?;
            report.visits += 1;
            match local_reconnect(net, e, chi)? {
                Some(choice) => {
                    if choice.chosen != 0 {
                        changed += 1;
                        report.reconnections.push(ReconnectionRecord { sweep, choice });
                    }
                }
                None => net.move_center(net.topology().other_end(e, from))?,
            }
        }
        if changed == 0 {
            break;
        }
    }
    Ok(report)
}

/// Nontrivial splits of a leaf-labelled tree given by `edges`, with labels
/// on `var_nodes`; same normalisation as [`crate::ttn::TreeTopology::splits`].
pub fn tree_splits(node_count: usize, edges: &[(usize, usize)], var_nodes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let total = var_nodes.len();
    for (skip, &(a, _)) in edges.iter().enumerate() {
        let mut adj = vec![Vec::new(); node_count];
        for (i, &(x, y)) in edges.iter().enumerate() {
            if i != skip {
                adj[x].push(y);
                adj[y].push(x);
            }
        }
        let mut seen = vec![false; node_count];
        let mut stack = vec![a];
        seen[a] = true;
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        let side: Vec<usize> = (0..total).filter(|&l| seen[var_nodes[l]]).collect();
        if side.len() < 2 || total - side.len() < 2 {
            continue;
        }
        let side = if side.contains(&0) { (0..total).filter(|l| !side.contains(l)).collect() } else { side };
        out.push(side);
    }
    out.sort();
    out.dedup();
    out
}
