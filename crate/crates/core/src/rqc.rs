//! Local random circuit ansatz and its second-moment diagnostics.
//!
//! The ansatz is an optional layer of `RY(π/4)` on every qubit followed by `D`
//! blocks, each a random Pauli rotation per qubit and a nearest-neighbour CZ
//! ladder. Past a few hundred layers on ten qubits the ensemble is
//! indistinguishable from Haar at the level of second moments; the estimators
//! here measure exactly that.

use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{haar_unitary, to_complex, ComplexMatrix};
use crate::rng::{derive_seed, rng_from_seed};
use crate::simulator::{apply_circuit_in_place, circuit_unitary, Circuit, Gate, GateKind};
use crate::stats;

/// Depth at which the ansatz behaves as an exact 2-design for 10–11 qubits.
pub const EXACT_DESIGN_DEPTH: usize = 150;
/// Shallower, approximate-design regime.
pub const APPROX_DESIGN_DEPTH: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub depth: usize,
    pub seed: u64,
    /// Prepend the `RY(π/4)` layer.
    pub symmetrize: bool,
}

impl AnsatzSpec {
    pub fn new(n_qubits: usize, depth: usize, seed: u64) -> Self {
        AnsatzSpec {
            n_qubits,
            depth,
            seed,
            symmetrize: true,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        AnsatzSpec { seed, ..self }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn gate_count(&self) -> usize {
        let n = self.n_qubits;
        let head = if self.symmetrize { n } else { 0 };
        head + self.depth * (2 * n - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits < 2 {
            return Err(Error::invalid(format!(
                "ansatz needs at least 2 qubits, got {}",
                self.n_qubits
            )));
        }
        if self.n_qubits > 30 {
            return Err(Error::ResourceLimit(format!(
                "{} qubits is beyond statevector reach",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

pub fn build_rqc(spec: &AnsatzSpec) -> Result<Circuit> {
    spec.validate()?;
    let n = spec.n_qubits;
    let mut rng = rng_from_seed(spec.seed);
    let mut gates = Vec::with_capacity(spec.gate_count());
    if spec.symmetrize {
        gates.extend((0..n).map(|q| Gate::ry(q, FRAC_PI_4)));
    }
    for _ in 0..spec.depth {
        for q in 0..n {
            let angle = rng.random_range(0.0..TAU);
            gates.push(match rng.random_range(0..3u8) {
                0 => Gate::rx(q, angle),
                1 => Gate::ry(q, angle),
                _ => Gate::rz(q, angle),
            });
        }
        gates.extend((0..n - 1).map(|q| Gate::cz(q, q + 1)));
    }
    Circuit::from_gates(n, gates)
}

/// Which `k` computational-basis rows a projector keeps.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSelection {
    /// Rows `0..k`.
    #[default]
    First,
    /// `k` distinct rows drawn uniformly in random order.
    Random { seed: u64 },
    Explicit(Vec<usize>),
}

impl RowSelection {
    pub fn resolve(&self, dim: usize, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > dim {
            return Err(Error::invalid(format!("k = {k} must be in 1..={dim}")));
        }
        match self {
            RowSelection::First => Ok((0..k).collect()),
            RowSelection::Random { seed } => {
                let mut all: Vec<usize> = (0..dim).collect();
                let mut rng = rng_from_seed(*seed);
                let (picked, _) = all.partial_shuffle(&mut rng, k);
                Ok(picked.to_vec())
            }
            RowSelection::Explicit(rows) => {
                if rows.len() != k {
                    return Err(Error::invalid(format!(
                        "{} explicit rows given for k = {k}",
                        rows.len()
                    )));
                }
                let mut seen = vec![false; dim];
                for &r in rows {
                    if r >= dim {
                        return Err(Error::invalid(format!("row {r} out of range 0..{dim}")));
                    }
                    if std::mem::replace(&mut seen[r], true) {
                        return Err(Error::invalid(format!("row {r} selected twice")));
                    }
                }
                Ok(rows.clone())
            }
        }
    }
}

/// Selected rows of the circuit unitary, each scaled by `√(N/k)`.
pub fn qrp_rows(circuit: &Circuit, k: usize, selection: &RowSelection) -> Result<ComplexMatrix> {
    let dim = circuit.dim();
    let rows = selection.resolve(dim, k)?;
    let u = circuit_unitary(circuit)?;
    let scale = (dim as f64 / k as f64).sqrt();
    Ok(ComplexMatrix::from_fn(k, dim, |i, j| u[(rows[i], j)] * scale))
}

/// A distribution over unitaries that can be sampled by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ensemble {
    /// Random circuits; sample `i` uses seed `derive_seed(spec.seed, i)`.
    Circuit(AnsatzSpec),
    /// Haar unitaries of any dimension.
    Haar { dim: usize, seed: u64 },
}

impl Ensemble {
    pub fn dim(&self) -> usize {
        match self {
            Ensemble::Circuit(spec) => spec.dim(),
            Ensemble::Haar { dim, .. } => *dim,
        }
    }

    /// `U_i · v` for the `index`-th sample of the ensemble.
    pub fn sample_apply(&self, index: u64, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: v.len(),
            });
        }
        match self {
            Ensemble::Circuit(spec) => {
                let circuit = build_rqc(&spec.with_seed(derive_seed(spec.seed, index)))?;
                let mut out = v.to_vec();
                apply_circuit_in_place(&mut out, &circuit);
                Ok(out)
            }
            Ensemble::Haar { dim, seed } => {
                haar_unitary(*dim, derive_seed(*seed, index)).mul_vec(v)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub sample_count: usize,
}

impl MomentEstimate {
    /// `|a − b|` in units of the combined standard error.
    pub fn z_distance(&self, other: &MomentEstimate) -> f64 {
        let se = self.standard_error.hypot(other.standard_error);
        (self.value - other.value).abs() / se
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < 100 {
        return Err(Error::invalid(format!(
            "moment estimates need at least 100 samples, got {samples}"
        )));
    }
    Ok(())
}

fn check_unit(v: &[f64]) -> Result<()> {
    let n = crate::linalg::norm(v);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("probe vector has norm {n}, expected 1")));
    }
    Ok(())
}

/// `‖Πv‖² = (N/k) Σ_{i<k} |(U v)_i|²` for each of `samples` draws, in
/// sample order.
pub fn projected_norms(ensemble: &Ensemble, k: usize, v: &[f64], samples: usize) -> Result<Vec<f64>> {
    let dim = ensemble.dim();
    if k == 0 || k > dim {
        return Err(Error::invalid(format!("k = {k} must be in 1..={dim}")));
    }
    check_unit(v)?;
    let v = to_complex(v);
    let scale = dim as f64 / k as f64;
    (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let y = ensemble.sample_apply(i, &v)?;
            Ok(scale * y[..k].iter().map(Complex64::norm_sqr).sum::<f64>())
        })
        .collect()
}

pub fn estimate_projected_norm_mean(
    ensemble: &Ensemble,
    k: usize,
    v: &[f64],
    samples: usize,
) -> Result<MomentEstimate> {
    check_samples(samples)?;
    let xs = projected_norms(ensemble, k, v, samples)?;
    Ok(MomentEstimate {
        value: stats::mean(&xs),
        standard_error: stats::std_error(&xs),
        sample_count: samples,
    })
}

/// Sample variance of `‖Πv‖²`; Haar value is `(N−k)/(k(N−1))`.
pub fn estimate_projected_norm_variance(
    ensemble: &Ensemble,
    k: usize,
    v: &[f64],
    samples: usize,
) -> Result<MomentEstimate> {
    check_samples(samples)?;
    let xs = projected_norms(ensemble, k, v, samples)?;
    Ok(variance_estimate(&xs))
}

pub fn variance_estimate(xs: &[f64]) -> MomentEstimate {
    MomentEstimate {
        value: stats::variance(xs),
        standard_error: stats::variance_std_error(xs),
        sample_count: xs.len(),
    }
}

/// `E[Σ_i |y_i|⁴]` with `y = U v`; Haar value is `2/(N+1)`.
pub fn estimate_fourth_moment(ensemble: &Ensemble, v: &[f64], samples: usize) -> Result<MomentEstimate> {
    check_samples(samples)?;
    check_unit(v)?;
    let v = to_complex(v);
    let xs: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let y = ensemble.sample_apply(i, &v)?;
            Ok(y.iter().map(|a| a.norm_sqr().powi(2)).sum())
        })
        .collect::<Result<_>>()?;
    Ok(MomentEstimate {
        value: stats::mean(&xs),
        standard_error: stats::std_error(&xs),
        sample_count: samples,
    })
}

/// Variance of `‖Πv‖²` for a unit `v` derived with the large-`N` fourth
/// moment `2/N`: `(N−k)/(k(N−1))`.
pub fn haar_projected_norm_variance(dim: usize, k: usize) -> f64 {
    let (n, k) = (dim as f64, k as f64);
    (n - k) / (k * (n - 1.0))
}

/// Exact Haar variance of `‖Πv‖²`, using `Σ_i E|y_i|⁴ = 2/(N+1)`:
/// `(N−k)/(k(N+1))`.
pub fn haar_projected_norm_variance_exact(dim: usize, k: usize) -> f64 {
    let (n, k) = (dim as f64, k as f64);
    (n - k) / (k * (n + 1.0))
}

/// Exact Haar `Σ_i E|y_i|⁴ = 2/(N+1)`.
pub fn haar_fourth_moment(dim: usize) -> f64 {
    2.0 / (dim as f64 + 1.0)
}

/// Chebyshev bound on `P(|‖Πv‖ − 1| > ε)` for an `α`-approximate 2-design
/// (`α = 0` for Haar or exact designs): `(N−k)/(4kNε²) + α/(4ε²k)`.
pub fn jl_failure_bound(dim: usize, k: usize, eps: f64, alpha: f64) -> f64 {
    let (n, k) = (dim as f64, k as f64);
    (n - k) / (4.0 * k * n * eps * eps) + alpha / (4.0 * eps * eps * k)
}

/// Fraction of squared norms with `|√x − 1| > ε`, with its binomial
/// standard error.
pub fn jl_failure_fraction(norms_sq: &[f64], eps: f64) -> (f64, f64) {
    let n = norms_sq.len() as f64;
    let fails = norms_sq.iter().filter(|&&x| (x.sqrt() - 1.0).abs() > eps).count() as f64;
    let p = fails / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

/// Line-oriented header of the circuit text format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CircuitHeader {
    pub n_qubits: usize,
    pub depth: usize,
    pub seed: u64,
}

impl From<&AnsatzSpec> for CircuitHeader {
    fn from(spec: &AnsatzSpec) -> Self {
        CircuitHeader {
            n_qubits: spec.n_qubits,
            depth: spec.depth,
            seed: spec.seed,
        }
    }
}

/// `n_qubits D seed` then one `KIND angle target [control]` line per gate.
/// Angles use the shortest round-tripping decimal form.
pub fn write_circuit_text(circuit: &Circuit, header: CircuitHeader) -> String {
    let mut out = format!("{} {} {}\n", header.n_qubits, header.depth, header.seed);
    for g in circuit.gates() {
        let _ = write!(out, "{} {:?} {}", g.kind, g.angle, g.target);
        if let Some(c) = g.control {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_circuit_text(text: &str) -> Result<(CircuitHeader, Circuit)> {
    let mut offset = 0u64;
    let mut lines = text.split_inclusive('\n');
    let head = lines.next().ok_or_else(|| Error::parse(0, "empty circuit file"))?;
    let fields: Vec<&str> = head.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::parse(0, "header must be `n_qubits depth seed`"));
    }
    let num = |s: &str, what: &str| -> Result<u64> {
        s.parse().map_err(|_| Error::parse(0, format!("bad {what} {s:?}")))
    };
    let header = CircuitHeader {
        n_qubits: num(fields[0], "qubit count")? as usize,
        depth: num(fields[1], "depth")? as usize,
        seed: num(fields[2], "seed")?,
    };
    offset += head.len() as u64;
    let mut circuit = Circuit::new(header.n_qubits);
    for line in lines {
        let at = offset;
        offset += line.len() as u64;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        let kind: GateKind = f[0].parse().map_err(|e: Error| Error::parse(at, e.to_string()))?;
        let expected = if kind == GateKind::CPhase { 4 } else { 3 };
        if f.len() != expected {
            return Err(Error::parse(at, format!("{kind} takes {} fields", expected - 1)));
        }
        let angle: f64 = f[1]
            .parse()
            .map_err(|_| Error::parse(at, format!("bad angle {:?}", f[1])))?;
        let idx = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::parse(at, format!("bad qubit index {s:?}")))
        };
        let gate = Gate {
            kind,
            angle,
            target: idx(f[2])?,
            control: if expected == 4 { Some(idx(f[3])?) } else { None },
        };
        circuit
            .push(gate)
            .map_err(|e| Error::parse(at, e.to_string()))?;
    }
    Ok((header, circuit))
}

/// `|a|` for angles in `[0, 2π)`; helper for summaries.
pub fn is_cz(g: &Gate) -> bool {
    g.kind == GateKind::CPhase && g.angle == PI
}
