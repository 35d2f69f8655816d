//! File formats: covariance JSON, circuit JSON, cost CSV, and the binary
//! tensor-network container with its JSON sidecar.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use ttnprep_core::circuit::{CostReport, PlacementKind, QuantumCircuit};
use ttnprep_core::gaussian::CovarianceMatrix;
use ttnprep_core::linalg::CMat;
use ttnprep_core::tensor::Tensor;
use ttnprep_core::ttn::{FidelityLedger, LedgerStep, Leg, TreeTensorNetwork, TreeTopology};
use ttnprep_core::C64;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceFile {
    pub dim: usize,
    pub entries: Vec<Vec<f64>>,
}

impl From<&CovarianceMatrix> for CovarianceFile {
    fn from(s: &CovarianceMatrix) -> Self {
        let d = s.dim();
        CovarianceFile { dim: d, entries: (0..d).map(|i| (0..d).map(|j| s.get(i, j)).collect()).collect() }
    }
}

impl TryFrom<CovarianceFile> for CovarianceMatrix {
    type Error = CliError;

    fn try_from(f: CovarianceFile) -> Result<Self> {
        if f.entries.len() != f.dim || f.entries.iter().any(|r| r.len() != f.dim) {
            return Err(CliError::Format(format!("covariance entries are not {0}x{0}", f.dim)));
        }
        let flat: Vec<f64> = f.entries.into_iter().flatten().collect();
        Ok(CovarianceMatrix::from_row_major(f.dim, &flat)?)
    }
}

pub fn read_covariance(path: &Path) -> Result<CovarianceMatrix> {
    let f: CovarianceFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    f.try_into()
}

pub fn write_covariance(path: &Path, sigma: &CovarianceMatrix) -> Result<()> {
    write_json(path, &CovarianceFile::from(sigma))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub targets: Vec<usize>,
    pub in_qubits: usize,
    /// `isometry` or `inverse_qft`.
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    pub parent: Option<usize>,
    /// `2^q x 2^p` entries as `[re, im]`, row-major.
    pub matrix: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub cnot_count: u64,
    pub depth: u64,
    pub per_placement: Vec<u64>,
    pub qft_cnots: u64,
    pub qft_depth: u64,
}

impl From<&CostReport> for Metrics {
    fn from(c: &CostReport) -> Self {
        Metrics {
            cnot_count: c.cnot_count,
            depth: c.depth,
            per_placement: c.per_placement.clone(),
            qft_cnots: c.qft_cnots,
            qft_depth: c.qft_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitFile {
    pub qubits: usize,
    pub placements: Vec<PlacementRecord>,
    pub metrics: Metrics,
}

impl CircuitFile {
    pub fn new(circ: &QuantumCircuit, cost: &CostReport) -> Self {
        let placements = circ
            .placements
            .iter()
            .map(|p| {
                let (kind, dimension) = match p.kind {
                    PlacementKind::Isometry => ("isometry", None),
                    PlacementKind::InverseQft { dimension } => ("inverse_qft", Some(dimension)),
                };
                let m = &p.matrix;
                let matrix =
                    (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| [m[(r, c)].re, m[(r, c)].im])).collect();
                PlacementRecord {
                    targets: p.targets.clone(),
                    in_qubits: p.in_qubits,
                    kind: kind.into(),
                    dimension,
                    parent: p.parent,
                    matrix,
                }
            })
            .collect();
        CircuitFile { qubits: circ.qubits, placements, metrics: cost.into() }
    }

    pub fn to_circuit(&self) -> Result<QuantumCircuit> {
        let mut placements = Vec::with_capacity(self.placements.len());
        for p in &self.placements {
            let rows = 1usize << p.targets.len();
            let cols = 1usize << p.in_qubits;
            if p.matrix.len() != rows * cols {
                return Err(CliError::Format(format!(
                    "placement matrix has {} entries, expected {}",
                    p.matrix.len(),
                    rows * cols
                )));
            }
            let kind = match (p.kind.as_str(), p.dimension) {
                ("isometry", _) => PlacementKind::Isometry,
                ("inverse_qft", Some(dimension)) => PlacementKind::InverseQft { dimension },
                (k, _) => return Err(CliError::Format(format!("unknown placement kind {k}"))),
            };
            let data: Vec<C64> = p.matrix.iter().map(|&[re, im]| C64::new(re, im)).collect();
            placements.push(ttnprep_core::circuit::Placement {
                targets: p.targets.clone(),
                in_qubits: p.in_qubits,
                matrix: CMat::from_row_slice(rows, cols, &data),
                kind,
                parent: p.parent,
            });
        }
        Ok(QuantumCircuit { qubits: self.qubits, placements })
    }
}

pub fn write_circuit(path: &Path, circ: &QuantumCircuit, cost: &CostReport) -> Result<()> {
    write_json(path, &CircuitFile::new(circ, cost))
}

pub fn read_circuit(path: &Path) -> Result<QuantumCircuit> {
    let f: CircuitFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    f.to_circuit()
}

/// One CSV row of cost metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub seed: u64,
    pub placement_count: usize,
    pub cnot: u64,
    pub depth: u64,
    pub qft_cnot: u64,
    pub qft_depth: u64,
    pub baseline_cnot: u64,
    pub ledger_f: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

const MAGIC: &[u8; 8] = b"TTNPREP1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegRecord {
    Phys(usize),
    Bond(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub edge: usize,
    pub fidelity: f64,
    pub tie: bool,
}

/// Sidecar describing the binary tensor payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtnSidecar {
    pub format: String,
    pub nodes: Vec<Vec<LegRecord>>,
    pub edges: Vec<[usize; 2]>,
    pub phys_dims: BTreeMap<usize, usize>,
    pub shapes: Vec<Vec<usize>>,
    pub center: Option<usize>,
    pub ledger: Vec<LedgerRecord>,
    pub ledger_product: f64,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes `path` (binary: magic, then every tensor's entries as
/// little-endian `re, im` pairs in node order) and `path.json`.
pub fn write_ttn(path: &Path, net: &TreeTensorNetwork) -> Result<()> {
    let topo = net.topology();
    let side = TtnSidecar {
        format: "ttnprep-ttn/1".into(),
        nodes: topo
            .nodes()
            .iter()
            .map(|legs| {
                legs.iter()
                    .map(|l| match *l {
                        Leg::Phys(x) => LegRecord::Phys(x),
                        Leg::Bond(e) => LegRecord::Bond(e),
                    })
                    .collect()
            })
            .collect(),
        edges: topo.edges().to_vec(),
        phys_dims: topo.phys_dims().clone(),
        shapes: net.tensors().iter().map(|t| t.shape().to_vec()).collect(),
        center: net.center(),
        ledger: net
            .ledger()
            .steps()
            .iter()
            .map(|s| LedgerRecord { edge: s.edge, fidelity: s.fidelity, tie: s.tie })
            .collect(),
        ledger_product: net.ledger().product(),
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    f.write_all(MAGIC)?;
    for t in net.tensors() {
        for z in t.data() {
            f.write_all(&z.re.to_le_bytes())?;
            f.write_all(&z.im.to_le_bytes())?;
        }
    }
    f.flush()?;
    write_json(&sidecar_path(path), &side)
}

pub fn read_ttn(path: &Path) -> Result<TreeTensorNetwork> {
    let side: TtnSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    if side.format != "ttnprep-ttn/1" {
        return Err(CliError::Format(format!("unknown container format {}", side.format)));
    }
    let bytes = fs::read(path)?;
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CliError::Format("missing container magic".into()));
    }
    let total: usize = side.shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    let body = &bytes[MAGIC.len()..];
    if body.len() != total * 16 {
        return Err(CliError::Format(format!("payload has {} bytes, expected {}", body.len(), total * 16)));
    }
    let mut vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut tensors = Vec::with_capacity(side.shapes.len());
    for shape in &side.shapes {
        let len: usize = shape.iter().product();
        let data: Vec<C64> = (0..len).map(|_| C64::new(vals.next().unwrap(), vals.next().unwrap())).collect();
        tensors.push(Tensor::from_vec(shape, data)?);
    }
    let nodes = side
        .nodes
        .iter()
        .map(|legs| {
            legs.iter()
                .map(|l| match *l {
                    LegRecord::Phys(x) => Leg::Phys(x),
                    LegRecord::Bond(e) => Leg::Bond(e),
                })
                .collect()
        })
        .collect();
    let topo = TreeTopology::new(nodes, side.edges.clone(), side.phys_dims.clone())?;
    let ledger = FidelityLedger::from_steps(
        side.ledger.iter().map(|s| LedgerStep { edge: s.edge, fidelity: s.fidelity, tie: s.tie }).collect(),
    );
    Ok(TreeTensorNetwork::from_parts(topo, tensors, side.center, ledger)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use ttnprep_core::circuit::synthesize;
    use ttnprep_core::gaussian::{make_covariance, GeneratorSpec};

    #[test]
    fn covariance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.json");
        let s = make_covariance(&GeneratorSpec::Chain { rho: 0.5 }, 3, 0).unwrap();
        write_covariance(&p, &s).unwrap();
        assert_eq!(read_covariance(&p).unwrap(), s);
        fs::write(&p, r#"{"dim": 2, "entries": [[1.0, 2.0], [2.0, 1.0]]}"#).unwrap();
        assert!(matches!(read_covariance(&p), Err(CliError::Numeric(_))));
        fs::write(&p, r#"{"dim": 2, "entries": [[1.0]]}"#).unwrap();
        assert!(matches!(read_covariance(&p), Err(CliError::Format(_))));
    }

    #[test]
    fn ttn_and_circuit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let net = TreeTensorNetwork::random(TreeTopology::uniform_path(4, 2).unwrap(), 2, &mut rng)
            .unwrap()
            .canonicalized(1)
            .unwrap();
        let p = dir.path().join("net.ttn");
        write_ttn(&p, &net).unwrap();
        assert_eq!(read_ttn(&p).unwrap(), net);
        let (circ, cost) = synthesize(&net).unwrap();
        let c = dir.path().join("c.json");
        write_circuit(&c, &circ, &cost).unwrap();
        assert_eq!(read_circuit(&c).unwrap(), circ);
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, bytes).unwrap();
        assert!(matches!(read_ttn(&p), Err(CliError::Format(_))));
    }
}
