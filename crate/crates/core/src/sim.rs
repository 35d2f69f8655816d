//! Dense statevector simulation of isometry circuits and end-to-end
//! verification of compiled instances.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std links in its own float methods under `cargo test`
use num_traits::Float;

use crate::circuit::{CostReport, Placement, QuantumCircuit};
use crate::fourier::{exact_target, load_amplitudes, truncation_fidelity, FourierEvaluator, GridSpec};
use crate::gaussian::CovarianceMatrix;
use crate::linalg::{self, ksum};
use crate::pipeline::{compile, PipelineOptions, QftMode};
use crate::ttn::overlap_fidelity;
use crate::{Error, Result, C64};

pub const MAX_QUBITS: usize = 24;

/// Isometry defect accepted by the simulator.
pub const ISOMETRY_TOLERANCE: f64 = 1e-10;

/// Default bound on `|ledger * fourier - simulated|`.
pub const REPORT_TOLERANCE: f64 = 1e-2;

/// Amplitudes over `qubits` qubits; qubit 0 is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zero(qubits: usize) -> Result<Self> {
        if qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!("{qubits} qubits exceeds the dense cap of {MAX_QUBITS}")));
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << qubits];
        amps[0] = C64::new(1.0, 0.0);
        Ok(StateVector { qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n = amps.len();
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::Shape(format!("{n} amplitudes is not a power of two")));
        }
        Ok(StateVector { qubits: n.trailing_zeros() as usize, amps })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        ksum(self.amps.iter().map(|a| a.norm_sqr())).sqrt()
    }

    /// Applies one placement. `touched[q]` marks qubits already written.
    fn apply(&mut self, p: &Placement, touched: &mut [bool]) -> Result<()> {
        let n = self.qubits;
        let q = p.targets.len();
        let inp = p.in_qubits;
        let mut seen = vec![false; n];
        for &t in &p.targets {
            if t >= n || seen[t] {
                return Err(Error::CircuitValidity(format!("target {t} collides or is out of range")));
            }
            seen[t] = true;
        }
        if inp > q {
            return Err(Error::CircuitValidity("more inputs than outputs".into()));
        }
        if p.matrix.nrows() != 1 << q || p.matrix.ncols() != 1 << inp {
            return Err(Error::CircuitValidity(format!(
                "matrix is {}x{}, expected {}x{}",
                p.matrix.nrows(),
                p.matrix.ncols(),
                1 << q,
                1 << inp
            )));
        }
        for (i, &t) in p.targets.iter().enumerate() {
            let fresh = i >= inp;
            if fresh && touched[t] {
                return Err(Error::CircuitValidity(format!("output qubit {t} was already in use")));
            }
        }
        let defect = linalg::isometry_defect(&p.matrix);
        if defect > ISOMETRY_TOLERANCE {
            return Err(Error::CircuitValidity(format!("placement is not an isometry (defect {defect:.2e})")));
        }
        let offs: Vec<usize> = (0..1usize << q)
            .map(|r| {
                let mut o = 0;
                for (i, &t) in p.targets.iter().enumerate() {
                    if (r >> (q - 1 - i)) & 1 == 1 {
                        o |= 1 << (n - 1 - t);
                    }
                }
                o
            })
            .collect();
        let mask = offs.iter().fold(0, |a, &o| a | o);
        // inputs occupy the leading targets, so input i sits at row i << (q - p)
        let shift = q - inp;
        let mut input = vec![C64::new(0.0, 0.0); 1 << inp];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            for (i, slot) in input.iter_mut().enumerate() {
                *slot = self.amps[base | offs[i << shift]];
            }
            for r in 0..1usize << q {
                let mut acc = C64::new(0.0, 0.0);
                for (i, x) in input.iter().enumerate() {
                    acc += p.matrix[(r, i)] * x;
                }
                self.amps[base | offs[r]] = acc;
            }
        }
        for &t in &p.targets {
            touched[t] = true;
        }
        Ok(())
    }
}

/// Applies every placement to `|0...0>`.
pub fn simulate(circ: &QuantumCircuit) -> Result<StateVector> {
    let mut s = StateVector::zero(circ.qubits)?;
    let mut touched = vec![false; circ.qubits];
    for p in &circ.placements {
        s.apply(p, &mut touched)?;
        let drift = (s.norm() - 1.0).abs();
        if drift > 1e-8 {
            return Err(Error::CircuitValidity(format!("norm drifted by {drift:.2e}")));
        }
    }
    Ok(s)
}

/// `|<u|v>|^2` of the normalized states.
pub fn fidelity(u: &StateVector, v: &StateVector) -> Result<f64> {
    overlap_fidelity(&u.amps, &v.amps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRecord {
    /// Product of the truncation ledger.
    pub ledger_fidelity: f64,
    /// Simulated circuit output against the sampled density.
    pub simulated_fidelity: f64,
    /// Kept Fourier modes against the sampled density.
    pub fourier_truncation_fidelity: f64,
    /// Compiled network against the untruncated loader state.
    pub ttn_fidelity: f64,
    /// Simulated circuit against the compiled network.
    pub synthesis_fidelity: f64,
    pub cost: CostReport,
    pub baseline: CostReport,
    /// `|ledger * fourier - simulated|` exceeded the tolerance.
    pub violation: bool,
}

/// Compiles, simulates and compares against the dense target.
pub fn verify_pipeline(sigma: &CovarianceMatrix, grid: GridSpec, opts: &PipelineOptions) -> Result<VerificationRecord> {
    verify_with_tolerance(sigma, grid, opts, REPORT_TOLERANCE)
}

pub fn verify_with_tolerance(
    sigma: &CovarianceMatrix,
    grid: GridSpec,
    opts: &PipelineOptions,
    tolerance: f64,
) -> Result<VerificationRecord> {
    if grid.qubits() > MAX_QUBITS {
        return Err(Error::Capacity(format!("{} qubits exceeds the dense cap", grid.qubits())));
    }
    let ev = FourierEvaluator::new(grid, sigma.clone())?;
    let fourier = truncation_fidelity(&ev)?;
    let target = exact_target(&grid, sigma)?;
    let compiled = compile(&ev, opts)?;
    let state = simulate(&compiled.circuit)?;
    let target_c: Vec<C64> = target.iter().map(|&x| C64::new(x, 0.0)).collect();
    let simulated = overlap_fidelity(state.amplitudes(), &target_c)?;
    let loader = load_amplitudes(&grid, &ev.dense_coeff_tensor()?)?;
    let network_state = match opts.mode {
        QftMode::QftGates => load_amplitudes(&grid, &compiled.compiled.contract_all()?)?,
        QftMode::QftTtn => compiled.compiled.contract_to_vector()?,
    };
    let ttn = overlap_fidelity(&network_state, &loader)?;
    let synthesis = overlap_fidelity(state.amplitudes(), &network_state)?;
    let ledger = compiled.ledger.product();
    let violation = (ledger * fourier - simulated).abs() > tolerance;
    Ok(VerificationRecord {
        ledger_fidelity: ledger,
        simulated_fidelity: simulated,
        fourier_truncation_fidelity: fourier,
        ttn_fidelity: ttn,
        synthesis_fidelity: synthesis,
        cost: compiled.cost,
        baseline: compiled.baseline,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::PlacementKind;
    use crate::gaussian::{make_covariance, pair_params, GeneratorSpec};
    use crate::linalg::CMat;

    fn place(targets: Vec<usize>, in_qubits: usize, matrix: CMat) -> Placement {
        Placement { targets, in_qubits, matrix, kind: PlacementKind::Isometry, parent: None }
    }

    #[test]
    fn empty_circuit_is_zero_state() {
        let s = simulate(&QuantumCircuit { qubits: 2, placements: vec![] }).unwrap();
        assert_eq!(s.amplitudes()[0], C64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn one_qubit_prep() {
        let h = 1.0 / 2f64.sqrt();
        let m = CMat::from_column_slice(2, 1, &[C64::new(h, 0.0), C64::new(h, 0.0)]);
        let s = simulate(&QuantumCircuit { qubits: 1, placements: vec![place(vec![0], 0, m)] }).unwrap();
        assert!((s.amplitudes()[0].re - h).abs() < 1e-15 && (s.amplitudes()[1].re - h).abs() < 1e-15);
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        let m = CMat::from_column_slice(2, 1, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let s = simulate(&QuantumCircuit { qubits: 3, placements: vec![place(vec![0], 0, m)] }).unwrap();
        assert_eq!(s.amplitudes()[4], C64::new(1.0, 0.0));
    }

    #[test]
    fn validity_errors() {
        let one = CMat::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let twice = QuantumCircuit {
            qubits: 1,
            placements: vec![place(vec![0], 0, one.clone()), place(vec![0], 0, one.clone())],
        };
        assert!(matches!(simulate(&twice), Err(Error::CircuitValidity(_))));
        let collide = QuantumCircuit { qubits: 2, placements: vec![place(vec![1, 1], 0, CMat::identity(4, 1))] };
        assert!(matches!(simulate(&collide), Err(Error::CircuitValidity(_))));
        let bad = CMat::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let not_iso = QuantumCircuit { qubits: 1, placements: vec![place(vec![0], 0, bad)] };
        assert!(matches!(simulate(&not_iso), Err(Error::CircuitValidity(_))));
        assert!(matches!(StateVector::zero(25), Err(Error::Capacity(_))));
    }

    #[test]
    fn fidelity_examples() {
        let e = |i: usize| {
            let mut v = vec![C64::new(0.0, 0.0); 4];
            v[i] = C64::new(1.0, 0.0);
            StateVector::from_amplitudes(v).unwrap()
        };
        assert!((fidelity(&e(1), &e(1)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&e(0), &e(3)).unwrap(), 0.0);
        let h = 1.0 / 2f64.sqrt();
        let mix = StateVector::from_amplitudes(vec![
            C64::new(h, 0.0),
            C64::new(h, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ])
        .unwrap();
        assert!((fidelity(&e(0), &mix).unwrap() - 0.5).abs() < 1e-15);
        let short = StateVector::from_amplitudes(vec![C64::new(1.0, 0.0); 2]).unwrap();
        assert!(fidelity(&e(0), &short).is_err());
    }

    #[test]
    fn diagonal_sigma_at_bond_one() {
        let sigma = make_covariance(&GeneratorSpec::Uniform { rho: 0.0 }, 2, 0).unwrap();
        let grid = GridSpec::new(2, 6, 20.0, 4).unwrap();
        // bond 1 between dimensions; a qubit-level bond of 1 would also cut
        // each one-dimensional profile, so only the gates mode applies
        let r = verify_pipeline(&sigma, grid, &PipelineOptions::new(1)).unwrap();
        assert!(r.simulated_fidelity >= 1.0 - 1e-4, "{}", r.simulated_fidelity);
        assert!(r.simulated_fidelity <= r.fourier_truncation_fidelity + 1e-10);
        // one isometry and one inverse QFT per dimension
        assert_eq!(r.cost.per_placement.iter().filter(|&&c| c > 0).count(), 2);
        assert_eq!(r.cost.per_placement.len(), 4);
    }

    #[test]
    fn pair_at_bond_two() {
        let p = pair_params(0.6).unwrap();
        let want = p.lambda0 * (1.0 + p.q);
        assert!((want - 0.9877).abs() < 1e-4);
        let sigma = make_covariance(&GeneratorSpec::Uniform { rho: 0.6 }, 2, 0).unwrap();
        let r = verify_pipeline(&sigma, GridSpec::new(2, 6, 20.0, 4).unwrap(), &PipelineOptions::new(2)).unwrap();
        assert!((r.simulated_fidelity - want).abs() < 2e-2, "{}", r.simulated_fidelity);
        assert!(!r.violation);
    }

    #[test]
    fn chain_regression() {
        let sigma = make_covariance(&GeneratorSpec::Chain { rho: 0.5 }, 3, 0).unwrap();
        let grid = GridSpec::new(3, 6, 20.0, 4).unwrap();
        for mode in [QftMode::QftGates, QftMode::QftTtn] {
            let mut opts = PipelineOptions::new(8);
            opts.mode = mode;
            let r = verify_pipeline(&sigma, grid, &opts).unwrap();
            assert!(1.0 - r.simulated_fidelity <= 1e-3, "{mode:?}: {}", r.simulated_fidelity);
            assert!(r.synthesis_fidelity > 1.0 - 1e-8);
            assert!(!r.violation);
        }
    }

    #[test]
    fn d1_gaussian_circuit() {
        let sigma = make_covariance(&GeneratorSpec::Uniform { rho: 0.0 }, 1, 0).unwrap();
        let grid = GridSpec::new(1, 6, 20.0, 4).unwrap();
        let mut opts = PipelineOptions::new(8);
        opts.mode = QftMode::QftTtn;
        let r = verify_pipeline(&sigma, grid, &opts).unwrap();
        assert!(r.simulated_fidelity >= 0.999);
    }
}
