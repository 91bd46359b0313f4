//! Statevector simulation of rotation / controlled-phase circuits.
//!
//! Qubit 0 is the most significant bit of the amplitude index, so measuring
//! qubit 0 in `|0⟩` keeps the first half of the amplitudes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;

/// Largest register for which [`circuit_unitary`] will allocate a dense matrix.
pub const MAX_DENSE_QUBITS: usize = 14;

const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    CPhase,
}

impl GateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::CPhase => "CPHASE",
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RX" => Ok(GateKind::Rx),
            "RY" => Ok(GateKind::Ry),
            "RZ" => Ok(GateKind::Rz),
            "CPHASE" => Ok(GateKind::CPhase),
            other => Err(Error::invalid(format!("unknown gate kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub kind: GateKind,
    pub angle: f64,
    pub target: usize,
    /// Set for [`GateKind::CPhase`] only.
    pub control: Option<usize>,
}

impl Gate {
    pub fn rx(target: usize, angle: f64) -> Self {
        Gate {
            kind: GateKind::Rx,
            angle,
            target,
            control: None,
        }
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Gate {
            kind: GateKind::Ry,
            angle,
            target,
            control: None,
        }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Gate {
            kind: GateKind::Rz,
            angle,
            target,
            control: None,
        }
    }

    pub fn cphase(control: usize, target: usize, angle: f64) -> Self {
        Gate {
            kind: GateKind::CPhase,
            angle,
            target,
            control: Some(control),
        }
    }

    pub fn cz(control: usize, target: usize) -> Self {
        Self::cphase(control, target, PI)
    }

    pub fn inverse(&self) -> Self {
        Gate {
            angle: -self.angle,
            ..*self
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if !self.angle.is_finite() {
            return Err(Error::invalid(format!("non-finite gate angle {}", self.angle)));
        }
        if self.target >= n_qubits {
            return Err(Error::invalid(format!(
                "target qubit {} out of range for {n_qubits} qubits",
                self.target
            )));
        }
        match (self.kind, self.control) {
            (GateKind::CPhase, Some(c)) if c >= n_qubits => Err(Error::invalid(format!(
                "control qubit {c} out of range for {n_qubits} qubits"
            ))),
            (GateKind::CPhase, Some(c)) if c == self.target => {
                Err(Error::invalid("control equals target"))
            }
            (GateKind::CPhase, None) => Err(Error::invalid("CPHASE needs a control qubit")),
            (GateKind::CPhase, Some(_)) => Ok(()),
            (_, Some(_)) => Err(Error::invalid("single-qubit rotation has a control qubit")),
            (_, None) => Ok(()),
        }
    }

    /// 2×2 matrix `[[m00, m01], [m10, m11]]` of a single-qubit rotation.
    pub fn single_qubit_matrix(&self) -> Option<[Complex64; 4]> {
        let (s, c) = (self.angle / 2.0).sin_cos();
        let z = Complex64::new(0.0, 0.0);
        match self.kind {
            GateKind::Rx => Some([
                Complex64::new(c, 0.0),
                Complex64::new(0.0, -s),
                Complex64::new(0.0, -s),
                Complex64::new(c, 0.0),
            ]),
            GateKind::Ry => Some([
                Complex64::new(c, 0.0),
                Complex64::new(-s, 0.0),
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
            ]),
            GateKind::Rz => Some([Complex64::new(c, -s), z, z, Complex64::new(c, s)]),
            GateKind::CPhase => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.validate(n_qubits)?;
        }
        Ok(Circuit { n_qubits, gates })
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Reversed gate list with negated angles.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }
}

/// Normalized `n`-qubit pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Statevector {
            n_qubits,
            amplitudes,
        }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n_qubits = qubits_for_len(amplitudes.len())?;
        let norm2: f64 = amplitudes.iter().map(Complex64::norm_sqr).sum();
        if !norm2.is_finite() || (norm2 - 1.0).abs() > NORM_TOL {
            return Err(Error::invalid(format!(
                "state is not normalized: squared norm {norm2}"
            )));
        }
        Ok(Statevector {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    /// Probability of reading `outcome` on `qubit`.
    pub fn probability(&self, qubit: usize, outcome: u8) -> Result<f64> {
        check_qubit(qubit, self.n_qubits)?;
        let mask = bit_mask(self.n_qubits, qubit);
        let want = if outcome == 0 { 0 } else { mask };
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask == want)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }
}

fn qubits_for_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::invalid(format!(
            "amplitude count {len} is not a power of two"
        )));
    }
    Ok(len.trailing_zeros() as usize)
}

fn check_qubit(qubit: usize, n_qubits: usize) -> Result<()> {
    if qubit >= n_qubits {
        return Err(Error::invalid(format!(
            "qubit {qubit} out of range for {n_qubits} qubits"
        )));
    }
    Ok(())
}

#[inline]
fn bit_mask(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

/// Applies `gate` to a raw amplitude buffer of `2^n_qubits` entries.
///
/// No validation and no normalization requirement: this is the kernel behind
/// every state, projector and ansatz evaluation.
pub fn apply_gate_in_place(amps: &mut [Complex64], n_qubits: usize, gate: &Gate) {
    debug_assert_eq!(amps.len(), 1 << n_qubits);
    let t = bit_mask(n_qubits, gate.target);
    match gate.kind {
        GateKind::CPhase => {
            let c = bit_mask(n_qubits, gate.control.expect("validated CPHASE"));
            let (hi, lo) = (t.max(c), t.min(c));
            // Amplitudes with both bits set form contiguous runs of length `lo`.
            let runs = amps
                .chunks_exact_mut(2 * hi)
                .flat_map(|block| block[hi..].chunks_exact_mut(2 * lo).map(|sub| &mut sub[lo..]));
            if gate.angle == PI {
                runs.for_each(|run| run.iter_mut().for_each(|a| *a = -*a));
            } else {
                let phase = Complex64::from_polar(1.0, gate.angle);
                runs.for_each(|run| run.iter_mut().for_each(|a| *a *= phase));
            }
        }
        GateKind::Rz => {
            let (s, c) = (gate.angle / 2.0).sin_cos();
            let (p0, p1) = (Complex64::new(c, -s), Complex64::new(c, s));
            for block in amps.chunks_exact_mut(2 * t) {
                let (lo, hi) = block.split_at_mut(t);
                lo.iter_mut().for_each(|a| *a *= p0);
                hi.iter_mut().for_each(|a| *a *= p1);
            }
        }
        GateKind::Ry => {
            let (s, c) = (gate.angle / 2.0).sin_cos();
            for block in amps.chunks_exact_mut(2 * t) {
                let (lo, hi) = block.split_at_mut(t);
                for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a0, *a1);
                    *a0 = x * c - y * s;
                    *a1 = x * s + y * c;
                }
            }
        }
        GateKind::Rx => {
            let (s, c) = (gate.angle / 2.0).sin_cos();
            for block in amps.chunks_exact_mut(2 * t) {
                let (lo, hi) = block.split_at_mut(t);
                for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a0, *a1);
                    // -i s y  and  -i s x
                    *a0 = Complex64::new(c * x.re + s * y.im, c * x.im - s * y.re);
                    *a1 = Complex64::new(c * y.re + s * x.im, c * y.im - s * x.re);
                }
            }
        }
    }
}

pub fn apply_circuit_in_place(amps: &mut [Complex64], circuit: &Circuit) {
    for g in &circuit.gates {
        apply_gate_in_place(amps, circuit.n_qubits, g);
    }
}

pub fn apply_gate(state: &Statevector, gate: &Gate) -> Result<Statevector> {
    gate.validate(state.n_qubits)?;
    let mut out = state.clone();
    apply_gate_in_place(&mut out.amplitudes, out.n_qubits, gate);
    Ok(out)
}

pub fn apply_circuit(state: &Statevector, circuit: &Circuit) -> Result<Statevector> {
    if state.n_qubits != circuit.n_qubits {
        return Err(Error::invalid(format!(
            "circuit acts on {} qubits but the state has {}",
            circuit.n_qubits, state.n_qubits
        )));
    }
    let mut out = state.clone();
    apply_circuit_in_place(&mut out.amplitudes, circuit);
    Ok(out)
}

/// Dense matrix of the circuit; column `j` is the circuit applied to `|j⟩`.
pub fn circuit_unitary(circuit: &Circuit) -> Result<ComplexMatrix> {
    if circuit.n_qubits > MAX_DENSE_QUBITS {
        return Err(Error::ResourceLimit(format!(
            "dense unitary of {} qubits exceeds the {MAX_DENSE_QUBITS}-qubit limit",
            circuit.n_qubits
        )));
    }
    let dim = circuit.dim();
    let columns: Vec<Vec<Complex64>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut col = vec![Complex64::new(0.0, 0.0); dim];
            col[j] = Complex64::new(1.0, 0.0);
            apply_circuit_in_place(&mut col, circuit);
            col
        })
        .collect();
    ComplexMatrix::from_columns(&columns)
}

/// Branches below this probability count as impossible; they are rounding
/// residue of exact zeros.
pub const MIN_BRANCH_PROBABILITY: f64 = 1e-24;

/// Projects `qubit` onto `outcome` and drops it from the register.
///
/// Returns the renormalized `(n−1)`-qubit post-measurement state and the
/// outcome probability.
pub fn project_qubit(state: &Statevector, qubit: usize, outcome: u8) -> Result<(Statevector, f64)> {
    check_qubit(qubit, state.n_qubits)?;
    if outcome > 1 {
        return Err(Error::invalid(format!("outcome must be 0 or 1, got {outcome}")));
    }
    let (kept, prob) = restrict_to_outcome(&state.amplitudes, state.n_qubits, qubit, outcome);
    if !(prob > MIN_BRANCH_PROBABILITY) {
        return Err(Error::MeasurementImpossible { qubit, outcome });
    }
    let scale = 1.0 / prob.sqrt();
    Ok((
        Statevector {
            n_qubits: state.n_qubits - 1,
            amplitudes: kept.into_iter().map(|a| a * scale).collect(),
        },
        prob,
    ))
}

/// Amplitudes with `qubit = outcome` (qubit removed, order preserved) and
/// their total probability. Unnormalized.
pub fn restrict_to_outcome(
    amps: &[Complex64],
    n_qubits: usize,
    qubit: usize,
    outcome: u8,
) -> (Vec<Complex64>, f64) {
    let mask = bit_mask(n_qubits, qubit);
    let want = if outcome == 0 { 0 } else { mask };
    let kept: Vec<Complex64> = amps
        .iter()
        .enumerate()
        .filter(|(i, _)| i & mask == want)
        .map(|(_, &a)| a)
        .collect();
    let prob = kept.iter().map(Complex64::norm_sqr).sum();
    (kept, prob)
}

/// Loads a real unit vector of length `2^n` as amplitudes.
///
/// Vectors within `1e-6` of unit norm are renormalized; anything further off
/// is rejected.
pub fn amplitude_encode(v: &[f64]) -> Result<Statevector> {
    qubits_for_len(v.len())?;
    let nrm = crate::linalg::norm(v);
    if !nrm.is_finite() || nrm == 0.0 {
        return Err(Error::invalid("cannot encode a zero or non-finite vector"));
    }
    if (nrm - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "vector norm {nrm} is not within 1e-6 of 1"
        )));
    }
    Statevector::from_amplitudes(v.iter().map(|&x| Complex64::new(x / nrm, 0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ComplexMatrix;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn ry_quarter_turn_on_zero() {
        let s = apply_gate(&Statevector::zero(1), &Gate::ry(0, FRAC_PI_4)).unwrap();
        let a = s.amplitudes();
        assert!((a[0] - c((PI / 8.0).cos())).norm() < 1e-15);
        assert!((a[1] - c((PI / 8.0).sin())).norm() < 1e-15);
    }

    #[test]
    fn cz_flips_sign_of_11() {
        let s = apply_gate(&Statevector::basis(2, 3), &Gate::cz(0, 1)).unwrap();
        assert_eq!(s.amplitudes()[3], c(-1.0));
        let s = apply_gate(&Statevector::basis(2, 2), &Gate::cz(0, 1)).unwrap();
        assert_eq!(s.amplitudes()[2], c(1.0));
    }

    #[test]
    fn rz_keeps_basis_populations() {
        for idx in 0..4 {
            let s = apply_gate(&Statevector::basis(2, idx), &Gate::rz(1, 0.731)).unwrap();
            for (i, a) in s.amplitudes().iter().enumerate() {
                let want = if i == idx { 1.0 } else { 0.0 };
                assert!((a.norm_sqr() - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kernels_match_gate_matrices() {
        // Single qubit: kernel output equals the 2×2 matrix times the state.
        let psi = Statevector::from_amplitudes(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
        ])
        .unwrap();
        for g in [Gate::rx(0, 0.3), Gate::ry(0, -1.1), Gate::rz(0, 2.5)] {
            let m = g.single_qubit_matrix().unwrap();
            let a = psi.amplitudes();
            let want = [m[0] * a[0] + m[1] * a[1], m[2] * a[0] + m[3] * a[1]];
            let got = apply_gate(&psi, &g).unwrap();
            for i in 0..2 {
                assert!((got.amplitudes()[i] - want[i]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn qubit_zero_is_most_significant() {
        // RX(π) on qubit 0 of |00⟩ moves weight to index 2 (binary 10).
        let s = apply_gate(&Statevector::zero(2), &Gate::rx(0, PI)).unwrap();
        assert!((s.amplitudes()[2].norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn validation_errors() {
        let s = Statevector::zero(2);
        assert!(apply_gate(&s, &Gate::ry(2, 0.1)).is_err());
        assert!(apply_gate(&s, &Gate::cphase(1, 1, 0.1)).is_err());
        assert!(apply_gate(&s, &Gate::rz(0, f64::NAN)).is_err());
        let c3 = Circuit::new(3);
        assert!(apply_circuit(&s, &c3).is_err());
    }

    #[test]
    fn empty_circuit_is_identity() {
        let u = circuit_unitary(&Circuit::new(2)).unwrap();
        assert_eq!(u, ComplexMatrix::identity(4));
        let s = Statevector::basis(3, 5);
        assert_eq!(apply_circuit(&s, &Circuit::new(3)).unwrap(), s);
    }

    #[test]
    fn single_rotation_unitary() {
        let mut circ = Circuit::new(1);
        circ.push(Gate::ry(0, FRAC_PI_4)).unwrap();
        let u = circuit_unitary(&circ).unwrap();
        let (s, co) = (PI / 8.0).sin_cos();
        let want = ComplexMatrix::from_vec(2, 2, vec![c(co), c(-s), c(s), c(co)]).unwrap();
        assert!(u.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn dense_guard() {
        assert!(matches!(
            circuit_unitary(&Circuit::new(MAX_DENSE_QUBITS + 1)),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn measure_uniform_state() {
        let s = Statevector::from_amplitudes(vec![c(0.5); 4]).unwrap();
        let (post, p) = project_qubit(&s, 0, 0).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(post.amplitudes().iter().all(|a| (a - c(r)).norm() < 1e-15));
        assert_eq!(post.n_qubits(), 1);
    }

    #[test]
    fn measure_impossible_outcome() {
        let s = Statevector::basis(2, 2); // |10⟩
        assert!(matches!(
            project_qubit(&s, 0, 0),
            Err(Error::MeasurementImpossible { qubit: 0, outcome: 0 })
        ));
    }

    #[test]
    fn encode() {
        let s = amplitude_encode(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s, Statevector::zero(2));
        let u = amplitude_encode(&[0.5; 4]).unwrap();
        assert!(u.amplitudes().iter().all(|a| *a == c(0.5)));
        assert!(amplitude_encode(&[0.0; 4]).is_err());
        assert!(amplitude_encode(&[1.0, 0.0, 0.0]).is_err());
        assert!(amplitude_encode(&[2.0, 0.0]).is_err());
        // Slightly off-norm input is renormalized.
        let s = amplitude_encode(&[1.0 + 1e-8, 0.0]).unwrap();
        assert_eq!(s.amplitudes()[0], c(1.0));
    }
}
