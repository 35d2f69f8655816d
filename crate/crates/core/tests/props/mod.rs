//! Randomised invariant suites. Each `pub fn` runs one proptest runner and
//! reports the first counterexample as an error string.

#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttnprep_core::circuit::{build_qft_ttn, cost_report, synthesize, PlacementKind};
use ttnprep_core::fourier::inverse_dft_matrix;
use ttnprep_core::linalg::CMat;
use ttnprep_core::tci::{cross_entries, maxvol, pivots_nested, tci_build_cached, CachedTensor, FnTensor, TciOptions};
use ttnprep_core::ttn::{
    fidelity_from_frobenius, frobenius_from_fidelity, overlap_fidelity, Leg, TreeTensorNetwork, TreeTopology,
    Truncation,
};
use ttnprep_core::C64;

type Outcome = Result<(), String>;

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Outcome {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn err<E: std::fmt::Debug>(e: E) -> TestCaseError {
    TestCaseError::fail(format!("{e:?}"))
}

/// Path or three-armed star with shuffled labels.
fn topology(len: usize, dim: usize, star: bool, seed: u64) -> TreeTopology {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut labels: Vec<usize> = (0..len).collect();
    labels.shuffle(&mut rng);
    let dims: BTreeMap<usize, usize> = (0..len).map(|l| (l, dim)).collect();
    if !star || len < 4 {
        return TreeTopology::path(&labels, &dims).unwrap();
    }
    // hub node 0 carries a label and three arms hang off it
    let mut nodes: Vec<Vec<Leg>> = vec![vec![Leg::Phys(labels[0])]];
    let mut edges = Vec::new();
    for (i, &l) in labels[1..].iter().enumerate() {
        let node = nodes.len();
        let parent = if i < 3 { 0 } else { node - 3 };
        let e = edges.len();
        edges.push([parent, node]);
        nodes[parent].push(Leg::Bond(e));
        nodes.push(vec![Leg::Bond(e), Leg::Phys(l)]);
    }
    TreeTopology::new(nodes, edges, dims).unwrap()
}

fn random_net(len: usize, dim: usize, bond: usize, star: bool, seed: u64) -> TreeTensorNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TreeTensorNetwork::random(topology(len, dim, star, seed), bond, &mut rng).unwrap()
}

fn normalized(v: Vec<C64>) -> Vec<C64> {
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Every non-center node is an isometry towards the center, and the state
/// is unchanged up to normalisation.
pub fn canonical_form() -> Outcome {
    let s = (2usize..7, 2usize..4, 1usize..5, any::<bool>(), any::<u64>(), 0usize..16);
    run(64, s, |(len, dim, bond, star, seed, c)| {
        let net = random_net(len, dim, bond, star, seed);
        let before = net.contract_to_vector().map_err(err)?;
        let center = c % net.topology().node_count();
        let canon = net.canonicalized(center).map_err(err)?;
        let defect = canon.canonical_defect().expect("center set");
        prop_assert!(defect < 1e-10, "defect {defect}");
        prop_assert_eq!(canon.center(), Some(center));
        let after = canon.contract_to_vector().map_err(err)?;
        let f = overlap_fidelity(&before, &after).map_err(err)?;
        prop_assert!(f > 1.0 - 1e-10, "fidelity {f}");
        Ok(())
    })
}

/// Inserting `G G^-1` on a bond changes neither the state nor any
/// canonical bond spectrum.
pub fn gauge_invariance() -> Outcome {
    let s = (2usize..6, 2usize..4, 1usize..4, any::<bool>(), any::<u64>(), 0usize..8);
    run(48, s, |(len, dim, bond, star, seed, pick)| {
        let net = random_net(len, dim, bond, star, seed);
        let e = pick % net.topology().edge_count();
        let [a, b] = net.topology().edge(e);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let g = CMat::from_fn(bond, bond, |i, j| {
            use rand::Rng;
            let d = if i == j { 3.0 } else { 0.0 };
            C64::new(d + rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let ginv = g.clone().try_inverse().ok_or_else(|| err("singular gauge"))?;
        let ax_a = net.topology().axis_of(a, Leg::Bond(e)).unwrap();
        let ax_b = net.topology().axis_of(b, Leg::Bond(e)).unwrap();
        let (topo, mut tensors, _, ledger) = net.clone().into_parts();
        tensors[a] = tensors[a].apply_matrix(ax_a, &g.transpose()).map_err(err)?;
        tensors[b] = tensors[b].apply_matrix(ax_b, &ginv).map_err(err)?;
        let gauged = TreeTensorNetwork::from_parts(topo, tensors, None, ledger).map_err(err)?;
        let u = net.contract_to_vector().map_err(err)?;
        let v = gauged.contract_to_vector().map_err(err)?;
        let scale = u.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let diff = u.iter().zip(&v).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()));
        prop_assert!(diff <= 1e-9 * scale, "state moved by {diff}");
        let mut p = net.canonicalized(0).map_err(err)?;
        let mut q = gauged.canonicalized(0).map_err(err)?;
        for f in 0..p.topology().edge_count() {
            let sp = p.bond_spectrum(f).map_err(err)?;
            let sq = q.bond_spectrum(f).map_err(err)?;
            for (x, y) in sp.iter().zip(&sq) {
                prop_assert!((x - y).abs() < 1e-9, "edge {f}: {x} vs {y}");
            }
        }
        Ok(())
    })
}

/// `1 - F <= sum_e eps_e^2`, where `eps_e^2` is the weight beyond the kept
/// values of the exact spectrum on edge `e`.
pub fn truncation_bound() -> Outcome {
    let s = (3usize..7, 2usize..4, 2usize..6, 1usize..4, any::<bool>(), any::<u64>());
    run(64, s, |(len, dim, bond, chi, star, seed)| {
        let mut exact = random_net(len, dim, bond, star, seed).canonicalized(0).map_err(err)?;
        let mut budget = 0.0;
        for e in 0..exact.topology().edge_count() {
            let s = exact.bond_spectrum(e).map_err(err)?;
            let total: f64 = s.iter().map(|x| x * x).sum();
            let kept: f64 = s.iter().take(chi).map(|x| x * x).sum();
            budget += 1.0 - kept / total;
        }
        let psi = exact.contract_to_vector().map_err(err)?;
        let approx = exact.clone().truncated(Truncation::Bond(chi)).map_err(err)?;
        prop_assert!(approx.max_bond() <= chi);
        for step in approx.ledger().steps() {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&step.fidelity));
        }
        let f = overlap_fidelity(&psi, &approx.contract_to_vector().map_err(err)?).map_err(err)?;
        prop_assert!(1.0 - f <= budget + 1e-10, "1 - F = {} > {budget}", 1.0 - f);
        Ok(())
    })
}

/// The raw interpolant reproduces the target on every pivot cross, and the
/// pivot lists are nested.
pub fn tci_pivots() -> Outcome {
    let s = (2usize..6, 2usize..4, 1usize..4, any::<bool>(), any::<u64>(), 1usize..6);
    run(40, s, |(len, dim, bond, star, seed, chi)| {
        let target = random_net(len, dim, bond, star, seed);
        let f = FnTensor { dims: vec![dim; len], f: |i: &[usize]| target.evaluate(i) };
        let cache = CachedTensor::new(&f);
        let opts = TciOptions { seed, ..TciOptions::new(chi) };
        let (net, report) = tci_build_cached(&cache, target.topology(), opts).map_err(err)?;
        prop_assert!(pivots_nested(net.topology(), &report.pivots));
        let scale = (0..report.pivots.sides.len()).map(|e| report.pivots.rank(e)).max().unwrap_or(1) as f64;
        for idx in cross_entries(&report.pivots) {
            let want = target.evaluate(&idx);
            let got = net.evaluate(&idx);
            prop_assert!((want - got).norm() <= 1e-9 * scale * (1.0 + want.norm()), "{idx:?}: {want} vs {got}");
        }
        Ok(())
    })
}

/// Every entry of `A A_sub^-1` is bounded by `1 + delta`.
pub fn maxvol_dominance() -> Outcome {
    let s = (1usize..8, 0usize..30, any::<u64>(), prop_oneof![Just(0.0), Just(0.01), Just(0.1)]);
    run(128, s, |(chi, extra, seed, delta)| {
        use rand::Rng;
        let r = chi + extra;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMat::from_fn(r, chi, |_, _| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let rows = maxvol(&a, delta).map_err(err)?;
        prop_assert_eq!(rows.len(), chi);
        let mut sorted = rows.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), chi);
        let sub = CMat::from_fn(chi, chi, |i, j| a[(rows[i], j)]);
        let coef = &a * sub.try_inverse().ok_or_else(|| err("singular submatrix"))?;
        let worst = coef.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        prop_assert!(worst <= 1.0 + delta.max(1e-10) + 1e-9, "max entry {worst}");
        Ok(())
    })
}

/// The contracted inverse-QFT network equals the dense inverse DFT on the
/// retained wavenumbers.
pub fn qft_matches_dft() -> Outcome {
    let s = (1usize..=10).prop_flat_map(|n| (Just(n), 1usize..=n.min(5)));
    run(40, s, |(n, m)| {
        let net = build_qft_ttn(n, m).map_err(err)?;
        let t = net.contract_all().map_err(err)?;
        let got = CMat::from_row_slice(1 << n, 1 << m, t.data());
        let gap = (got - inverse_dft_matrix(n, m)).camax();
        prop_assert!(gap < 1e-10, "n={n} m={m}: {gap}");
        Ok(())
    })
}

/// CNOT count and depth recomputed from the placements by an independent
/// walk over the placement forest.
pub fn cost_recomputation() -> Outcome {
    let s = (1usize..7, 1usize..5, any::<bool>(), any::<u64>());
    run(48, s, |(len, bond, star, seed)| {
        let net = random_net(len, 2, bond, star, seed);
        let (circ, cost) = synthesize(&net).map_err(err)?;
        prop_assert_eq!(&cost, &cost_report(&circ));
        let mut total = 0u64;
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); circ.placements.len()];
        let mut roots = Vec::new();
        for (i, p) in circ.placements.iter().enumerate() {
            prop_assert_eq!(p.kind, PlacementKind::Isometry);
            prop_assert_eq!(p.matrix.nrows(), 1usize << p.out_qubits());
            prop_assert_eq!(p.matrix.ncols(), 1usize << p.in_qubits);
            total += 1u64 << (p.in_qubits + p.out_qubits());
            match p.parent {
                Some(j) => children[j].push(i),
                None => roots.push(i),
            }
        }
        fn longest(i: usize, children: &[Vec<usize>], circ: &ttnprep_core::circuit::QuantumCircuit) -> u64 {
            let own = 1u64 << (circ.placements[i].in_qubits + circ.placements[i].out_qubits());
            own + children[i].iter().map(|&c| longest(c, children, circ)).max().unwrap_or(0)
        }
        let depth = roots.iter().map(|&r| longest(r, &children, &circ)).max().unwrap_or(0);
        prop_assert_eq!(cost.cnot_count, total);
        prop_assert_eq!(cost.depth, depth);
        prop_assert_eq!(circ.qubits, len);
        Ok(())
    })
}

/// `d = sqrt(2 (1 - sqrt F))` inverts, and equals the distance between
/// phase-aligned normalised states.
pub fn frobenius_round_trip() -> Outcome {
    let s = (0.0f64..=1.0, any::<u64>(), 1usize..40);
    run(256, s, |(f, seed, len)| {
        let d = frobenius_from_fidelity(f).map_err(err)?;
        prop_assert!((fidelity_from_frobenius(d).map_err(err)? - f).abs() < 1e-12);
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw =
            || normalized((0..len).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect());
        let (u, v) = (draw(), draw());
        let ip: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
        let phase = if ip.norm() > 0.0 { ip / ip.norm() } else { C64::new(1.0, 0.0) };
        let dist = u.iter().zip(&v).map(|(a, b)| (a * phase - b).norm_sqr()).sum::<f64>().sqrt();
        let fid = overlap_fidelity(&u, &v).map_err(err)?;
        // squares: d itself is ill-conditioned near F = 1
        let d = frobenius_from_fidelity(fid).map_err(err)?;
        prop_assert!((d * d - dist * dist).abs() < 1e-12, "{d} vs {dist}");
        Ok(())
    })
}

pub const SUITES: [(&str, fn() -> Outcome); 8] = [
    ("canonical-form isometry", canonical_form),
    ("gauge invariance", gauge_invariance),
    ("truncation bound", truncation_bound),
    ("TCI pivot exactness", tci_pivots),
    ("maxvol dominance", maxvol_dominance),
    ("QFT network vs inverse DFT", qft_matches_dft),
    ("cost recomputation", cost_recomputation),
    ("Frobenius round trip", frobenius_round_trip),
];
