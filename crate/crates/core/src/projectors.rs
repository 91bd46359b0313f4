//! Random projectors behind one interface: quantum (random circuit), SRHT and
//! PCA.
//!
//! A [`Projector`] is a `k × N` map acting from the left. QRP and SRHT carry
//! the `√(N/k)` scale so that `E‖Πv‖² = ‖v‖²`; PCA is a plain orthogonal
//! projection. QRP and SRHT are stored implicitly (circuit plus kept rows,
//! signs plus kept coordinates) and applied in `O(gates · N)` and
//! `O(N log N)`; [`Projector::to_dense`] materializes the matrix.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fwht_in_place, svd, to_complex, ComplexMatrix, RealMatrix};
use crate::rng::{mix64, rng_from_seed};
use crate::rqc::{build_rqc, AnsatzSpec, RowSelection};
use crate::simulator::{apply_circuit_in_place, circuit_unitary, project_qubit, Circuit, Statevector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectorKind {
    Qrp,
    /// Subsampled randomized Hadamard transform, the classical baseline.
    Srht,
    Pca,
}

impl ProjectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProjectorKind::Qrp => "qrp",
            ProjectorKind::Srht => "srht",
            ProjectorKind::Pca => "pca",
        }
    }

    /// Whether the map is random and rescaled by `√(N/k)`.
    pub fn is_random(self) -> bool {
        self != ProjectorKind::Pca
    }
}

impl fmt::Display for ProjectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProjectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qrp" => Ok(ProjectorKind::Qrp),
            "srht" | "crp" => Ok(ProjectorKind::Srht),
            "pca" => Ok(ProjectorKind::Pca),
            _ => Err(Error::invalid(format!(
                "unknown projector kind {s:?} (expected qrp, srht/crp or pca)"
            ))),
        }
    }
}

/// Where a projector came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Seed(u64),
    Ansatz(AnsatzSpec),
    Dataset { fingerprint: u64 },
    Imported { seed: u64 },
}

impl Provenance {
    pub fn seed(&self) -> u64 {
        match self {
            Provenance::Seed(s) | Provenance::Imported { seed: s } => *s,
            Provenance::Ansatz(spec) => spec.seed,
            Provenance::Dataset { fingerprint } => *fingerprint,
        }
    }
}

#[derive(Clone, Debug)]
enum Map {
    Real(RealMatrix),
    Complex(ComplexMatrix),
    Srht { signs: Vec<f64>, coords: Vec<usize> },
    Circuit { circuit: Circuit, rows: Vec<usize> },
}

#[derive(Clone, Debug)]
pub struct Projector {
    kind: ProjectorKind,
    dim: usize,
    k: usize,
    map: Map,
    provenance: Provenance,
}

fn check_dims(dim: usize, k: usize) -> Result<()> {
    if !dim.is_power_of_two() {
        return Err(Error::invalid(format!("N = {dim} is not a power of two")));
    }
    if k == 0 || k > dim {
        return Err(Error::invalid(format!("k = {k} must be in 1..={dim}")));
    }
    Ok(())
}

/// `Π = √(N/k)·Sᵀ·H·D`: random signs, normalized Walsh-Hadamard, then `k`
/// distinct coordinates in uniformly random order.
pub fn build_srht(dim: usize, k: usize, seed: u64) -> Result<Projector> {
    check_dims(dim, k)?;
    let mut rng = rng_from_seed(seed);
    let signs: Vec<f64> = (0..dim)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let mut all: Vec<usize> = (0..dim).collect();
    let (picked, _) = all.partial_shuffle(&mut rng, k);
    let coords = picked.to_vec();
    Ok(Projector {
        kind: ProjectorKind::Srht,
        dim,
        k,
        map: Map::Srht { signs, coords },
        provenance: Provenance::Seed(seed),
    })
}

/// SRHT from explicit signs and coordinates.
pub fn srht_from_parts(signs: Vec<f64>, coords: Vec<usize>) -> Result<Projector> {
    let dim = signs.len();
    check_dims(dim, coords.len())?;
    if signs.iter().any(|s| s.abs() != 1.0) {
        return Err(Error::invalid("SRHT signs must be ±1"));
    }
    let k = coords.len();
    RowSelection::Explicit(coords.clone()).resolve(dim, k)?;
    Ok(Projector {
        kind: ProjectorKind::Srht,
        dim,
        k,
        map: Map::Srht { signs, coords },
        provenance: Provenance::Seed(0),
    })
}

/// `Π = √(N/k)·P_k·U` with `U` the ansatz circuit and `P_k` the first `k` rows.
pub fn build_qrp(spec: &AnsatzSpec, k: usize) -> Result<Projector> {
    build_qrp_with(spec, k, &RowSelection::First)
}

pub fn build_qrp_with(spec: &AnsatzSpec, k: usize, selection: &RowSelection) -> Result<Projector> {
    let circuit = build_rqc(spec)?;
    let mut p = qrp_from_circuit(circuit, k, selection)?;
    p.provenance = Provenance::Ansatz(*spec);
    Ok(p)
}

pub fn qrp_from_circuit(circuit: Circuit, k: usize, selection: &RowSelection) -> Result<Projector> {
    let dim = circuit.dim();
    check_dims(dim, k)?;
    let rows = selection.resolve(dim, k)?;
    Ok(Projector {
        kind: ProjectorKind::Qrp,
        dim,
        k,
        map: Map::Circuit { circuit, rows },
        provenance: Provenance::Seed(0),
    })
}

/// Rows are the top-`k` right singular vectors of the data matrix whose rows
/// are the given vectors.
pub fn build_pca(data: &[Vec<f64>], k: usize) -> Result<Projector> {
    let first = data.first().ok_or_else(|| Error::invalid("PCA needs a nonempty dataset"))?;
    let dim = first.len();
    if k == 0 || k > dim {
        return Err(Error::invalid(format!("k = {k} must be in 1..={dim}")));
    }
    let available = dim.min(data.len());
    if k > available {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the {available} singular vectors of a {}×{dim} dataset",
            data.len()
        )));
    }
    let x = RealMatrix::from_rows(data)?;
    let s = svd(&x)?;
    let rows = RealMatrix::from_fn(k, dim, |i, j| s.v[(j, i)]);
    Ok(Projector {
        kind: ProjectorKind::Pca,
        dim,
        k,
        map: Map::Real(rows),
        provenance: Provenance::Dataset {
            fingerprint: fingerprint(data),
        },
    })
}

/// Order-sensitive hash of the exact bit patterns of a dataset.
pub fn fingerprint(data: &[Vec<f64>]) -> u64 {
    data.iter()
        .flatten()
        .fold(mix64(data.len() as u64), |h, x| mix64(h ^ x.to_bits()))
}

impl Projector {
    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }

    /// Input dimension `N`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Output dimension `k`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `√(N/k)` for random kinds, 1 for PCA.
    pub fn scale(&self) -> f64 {
        if self.kind.is_random() {
            (self.dim as f64 / self.k as f64).sqrt()
        } else {
            1.0
        }
    }

    /// Signs and kept coordinates of an SRHT.
    pub fn srht_parts(&self) -> Option<(&[f64], &[usize])> {
        match &self.map {
            Map::Srht { signs, coords } => Some((signs, coords)),
            _ => None,
        }
    }

    /// Circuit and kept rows of a QRP.
    pub fn circuit_parts(&self) -> Option<(&Circuit, &[usize])> {
        match &self.map {
            Map::Circuit { circuit, rows } => Some((circuit, rows)),
            _ => None,
        }
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: len,
            });
        }
        Ok(())
    }

    fn check_output(&self, len: usize) -> Result<()> {
        if len != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: len,
            });
        }
        Ok(())
    }

    /// `Π · v`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_input(v.len())?;
        let scale = self.scale();
        match &self.map {
            Map::Real(m) => Ok((0..self.k)
                .map(|i| m.row(i).iter().zip(v).map(|(&a, &b)| b * a).sum())
                .collect()),
            Map::Complex(m) => m.mul_vec(v),
            Map::Srht { signs, coords } => {
                let mut w: Vec<Complex64> = v.iter().zip(signs).map(|(&x, &s)| x * s).collect();
                fwht_in_place(&mut w)?;
                Ok(coords.iter().map(|&c| w[c] * scale).collect())
            }
            Map::Circuit { circuit, rows } => {
                let mut w = v.to_vec();
                apply_circuit_in_place(&mut w, circuit);
                Ok(rows.iter().map(|&r| w[r] * scale).collect())
            }
        }
    }

    /// `Π · v` for real input, using real arithmetic where the map allows.
    pub fn apply_real(&self, v: &[f64]) -> Result<Vec<Complex64>> {
        self.check_input(v.len())?;
        match &self.map {
            Map::Real(m) => Ok(m.mul_vec(v)?.into_iter().map(|x| Complex64::new(x, 0.0)).collect()),
            Map::Srht { signs, coords } => {
                let scale = self.scale();
                let mut w: Vec<f64> = v.iter().zip(signs).map(|(&x, &s)| x * s).collect();
                fwht_in_place(&mut w)?;
                Ok(coords.iter().map(|&c| Complex64::new(w[c] * scale, 0.0)).collect())
            }
            _ => self.apply(&to_complex(v)),
        }
    }

    /// Maps `reduced` back to `N` dimensions with `Π†`.
    ///
    /// For QRP this zero-pads into the kept rows and runs the inverse circuit.
    pub fn reconstruct(&self, reduced: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_output(reduced.len())?;
        let scale = self.scale();
        match &self.map {
            Map::Real(m) => {
                let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
                for (i, &y) in reduced.iter().enumerate() {
                    for (o, &a) in out.iter_mut().zip(m.row(i)) {
                        *o += y * a;
                    }
                }
                Ok(out)
            }
            Map::Complex(m) => m.adjoint_mul_vec(reduced),
            Map::Srht { signs, coords } => {
                let mut w = vec![Complex64::new(0.0, 0.0); self.dim];
                for (&c, &y) in coords.iter().zip(reduced) {
                    w[c] = y * scale;
                }
                fwht_in_place(&mut w)?;
                Ok(w.into_iter().zip(signs).map(|(x, &s)| x * s).collect())
            }
            Map::Circuit { circuit, rows } => {
                let mut w = vec![Complex64::new(0.0, 0.0); self.dim];
                for (&r, &y) in rows.iter().zip(reduced) {
                    w[r] = y * scale;
                }
                apply_circuit_in_place(&mut w, &circuit.inverse());
                Ok(w)
            }
        }
    }

    /// The projector keeping only the first `k` outputs (rescaled for random
    /// kinds). Agrees with [`Projector::truncate_output`].
    pub fn truncate(&self, k: usize) -> Result<Projector> {
        if k == 0 || k > self.k {
            return Err(Error::invalid(format!("cannot truncate k = {} to {k}", self.k)));
        }
        let ratio = (self.k as f64 / k as f64).sqrt();
        let map = match &self.map {
            Map::Real(m) => Map::Real(RealMatrix::from_fn(k, self.dim, |i, j| m[(i, j)])),
            Map::Complex(m) => {
                let r = if self.kind.is_random() { ratio } else { 1.0 };
                Map::Complex(ComplexMatrix::from_fn(k, self.dim, |i, j| m[(i, j)] * r))
            }
            Map::Srht { signs, coords } => Map::Srht {
                signs: signs.clone(),
                coords: coords[..k].to_vec(),
            },
            Map::Circuit { circuit, rows } => Map::Circuit {
                circuit: circuit.clone(),
                rows: rows[..k].to_vec(),
            },
        };
        Ok(Projector {
            kind: self.kind,
            dim: self.dim,
            k,
            map,
            provenance: self.provenance.clone(),
        })
    }

    /// Output of `truncate(k)` recovered from an output of `self`.
    pub fn truncate_output(&self, y: &[Complex64], k: usize) -> Result<Vec<Complex64>> {
        self.check_output(y.len())?;
        if k == 0 || k > self.k {
            return Err(Error::invalid(format!("cannot truncate k = {} to {k}", self.k)));
        }
        let r = if self.kind.is_random() {
            (self.k as f64 / k as f64).sqrt()
        } else {
            1.0
        };
        Ok(y[..k].iter().map(|&x| x * r).collect())
    }

    /// Explicit `k × N` matrix.
    pub fn to_dense(&self) -> Result<ComplexMatrix> {
        let scale = self.scale();
        match &self.map {
            Map::Real(m) => Ok(m.to_complex()),
            Map::Complex(m) => Ok(m.clone()),
            Map::Srht { .. } => {
                // Row i of Π is Π† e_i.
                let rows = (0..self.k)
                    .map(|i| {
                        let mut e = vec![Complex64::new(0.0, 0.0); self.k];
                        e[i] = Complex64::new(1.0, 0.0);
                        self.reconstruct(&e)
                    })
                    .collect::<Result<Vec<_>>>()?;
                ComplexMatrix::from_rows(&rows)
            }
            Map::Circuit { circuit, rows } => {
                let u = circuit_unitary(circuit)?;
                Ok(ComplexMatrix::from_fn(self.k, self.dim, |i, j| u[(rows[i], j)] * scale))
            }
        }
    }

    /// `Π · M` column by column.
    pub fn apply_columns(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check_input(m.rows())?;
        let cols = (0..m.cols())
            .map(|j| self.apply(&m.column(j)))
            .collect::<Result<Vec<_>>>()?;
        ComplexMatrix::from_columns(&cols)
    }

    /// Binary export: one text header line `kind N k seed dtype`, then the
    /// dense matrix row-major as little-endian `f64` (re, im pairs when
    /// `dtype` is `complex`).
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let complex = matches!(self.map, Map::Circuit { .. } | Map::Complex(_));
        let dtype = if complex { "complex" } else { "real" };
        writeln!(
            out,
            "{} {} {} {} {}",
            self.kind,
            self.dim,
            self.k,
            self.provenance.seed(),
            dtype
        )?;
        let dense = self.to_dense()?;
        let mut buf = Vec::with_capacity(dense.as_slice().len() * if complex { 16 } else { 8 });
        for z in dense.as_slice() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            if complex {
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Projector> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(0, "missing header line"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::parse(0, "header is not UTF-8"))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 5 {
            return Err(Error::parse(0, "header must be `kind N k seed dtype`"));
        }
        let kind: ProjectorKind = f[0].parse().map_err(|e: Error| Error::parse(0, e.to_string()))?;
        let num = |s: &str| -> Result<u64> { s.parse().map_err(|_| Error::parse(0, format!("bad number {s:?}"))) };
        let (dim, k, seed) = (num(f[1])? as usize, num(f[2])? as usize, num(f[3])?);
        let complex = match f[4] {
            "complex" => true,
            "real" => false,
            other => return Err(Error::parse(0, format!("unknown dtype {other:?}"))),
        };
        if k == 0 || k > dim {
            return Err(Error::parse(0, format!("k = {k} must be in 1..={dim}")));
        }
        let body = &bytes[nl + 1..];
        let width = if complex { 16 } else { 8 };
        let want = dim
            .checked_mul(k)
            .and_then(|n| n.checked_mul(width))
            .ok_or_else(|| Error::parse(0, "matrix size overflows"))?;
        if body.len() != want {
            return Err(Error::parse(
                (nl + 1 + body.len().min(want)) as u64,
                format!("expected {want} payload bytes, found {}", body.len()),
            ));
        }
        let read = |i: usize| f64::from_le_bytes(body[i * 8..i * 8 + 8].try_into().expect("8 bytes"));
        let map = if complex {
            Map::Complex(ComplexMatrix::from_fn(k, dim, |i, j| {
                let at = 2 * (i * dim + j);
                Complex64::new(read(at), read(at + 1))
            }))
        } else {
            Map::Real(RealMatrix::from_fn(k, dim, |i, j| read(i * dim + j)))
        };
        Ok(Projector {
            kind,
            dim,
            k,
            map,
            provenance: Provenance::Imported { seed },
        })
    }
}

/// Basis rows whose `qubits` all read `outcome`, ascending. Measuring those
/// qubits keeps exactly these amplitudes, in this order.
pub fn measurement_rows(n_qubits: usize, qubits: &[usize], outcome: u8) -> Result<Vec<usize>> {
    check_measured(n_qubits, qubits, outcome)?;
    let mask: usize = qubits.iter().map(|&q| 1usize << (n_qubits - 1 - q)).sum();
    let want = if outcome == 0 { 0 } else { mask };
    Ok((0..1usize << n_qubits).filter(|i| i & mask == want).collect())
}

fn check_measured(n_qubits: usize, qubits: &[usize], outcome: u8) -> Result<()> {
    if outcome > 1 {
        return Err(Error::invalid(format!("outcome must be 0 or 1, got {outcome}")));
    }
    if qubits.len() >= n_qubits {
        return Err(Error::invalid(format!(
            "cannot measure {} of {n_qubits} qubits",
            qubits.len()
        )));
    }
    let mut seen = vec![false; n_qubits];
    for &q in qubits {
        if q >= n_qubits {
            return Err(Error::invalid(format!("qubit {q} out of range 0..{n_qubits}")));
        }
        if std::mem::replace(&mut seen[q], true) {
            return Err(Error::invalid(format!("qubit {q} listed twice")));
        }
    }
    Ok(())
}

/// Runs the ansatz on `state` and post-selects each listed qubit on
/// `outcome`, renormalizing. The result lives on the unmeasured qubits in
/// their original order.
pub fn project_by_measurement(
    spec: &AnsatzSpec,
    state: &Statevector,
    qubits: &[usize],
    outcome: u8,
) -> Result<Statevector> {
    measure_after_circuit(&build_rqc(spec)?, state, qubits, outcome)
}

pub fn measure_after_circuit(
    circuit: &Circuit,
    state: &Statevector,
    qubits: &[usize],
    outcome: u8,
) -> Result<Statevector> {
    let n = circuit.n_qubits();
    if state.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: state.n_qubits(),
        });
    }
    check_measured(n, qubits, outcome)?;
    let mut amps = state.amplitudes().to_vec();
    apply_circuit_in_place(&mut amps, circuit);
    let mut current = Statevector::from_amplitudes(amps)?;
    for (i, &q) in qubits.iter().enumerate() {
        let shift = qubits[..i].iter().filter(|&&p| p < q).count();
        current = project_qubit(&current, q - shift, outcome).map_err(|e| match e {
            Error::MeasurementImpossible { outcome, .. } => Error::MeasurementImpossible { qubit: q, outcome },
            other => other,
        })?
        .0;
    }
    Ok(current)
}

/// `Π · M` for the measurement projector: every column of `M` goes through
/// the circuit, keeps the `outcome` branch of the measured qubits without
/// renormalizing, and is scaled by `√(N/k)`.
pub fn project_columns_by_measurement(
    circuit: &Circuit,
    m: &ComplexMatrix,
    qubits: &[usize],
    outcome: u8,
) -> Result<ComplexMatrix> {
    let rows = measurement_rows(circuit.n_qubits(), qubits, outcome)?;
    let p = qrp_from_circuit(circuit.clone(), rows.len(), &RowSelection::Explicit(rows))?;
    p.apply_columns(m)
}
