//! Variational singular value decomposition with hardware-efficient ansätze.
//!
//! Two parameterized circuits `U(θ)` (on `log₂k` qubits) and `V(φ)` (on
//! `log₂N` qubits) are trained so that `m_j = Re⟨j|U†M̃V|j⟩` approach the
//! top singular values of a `k × N` matrix `M̃`, by minimizing
//! `L = −Σ_j q_j m_j` with strictly decreasing weights.
//!
//! Gradients come from shifted loss values. Each rotation enters `L`
//! linearly (as `a·cos(θ/2) + b·sin(θ/2)`), so a shift `s` gives the exact
//! derivative `(L(θ+s) − L(θ−s)) / (4·sin(s/2))`. Shifted values for every
//! parameter are computed in one backward sweep over cached states.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entropy_bench::Profile;
use crate::error::{Error, Result};
use crate::linalg::{dot, haar_isometry, svd, ComplexMatrix};
use crate::projectors::project_columns_by_measurement;
use crate::rng::{derive_seed, rng_from_seed};
use crate::rqc::{build_rqc, AnsatzSpec};
use crate::simulator::{apply_gate_in_place, Circuit, Gate, GateKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeaOp {
    Rot { kind: GateKind, qubit: usize, param: usize },
    Cz { control: usize, target: usize },
}

/// Layered ansatz: each layer is `RY` then `RZ` on every qubit followed by a
/// CZ ladder. A block is `depth` such layers and their mirror image (reversed
/// order, independent parameters).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hea {
    n_qubits: usize,
    depth: usize,
    blocks: usize,
    ops: Vec<HeaOp>,
    n_params: usize,
}

/// Ansatz plus initial parameters. With `identity_init` every mirror half
/// starts at the negated, reversed parameters of its forward half, so the
/// initial circuit is the identity.
pub fn build_hea(n_qubits: usize, depth: usize, blocks: usize, seed: u64, identity_init: bool) -> Result<(Hea, Vec<f64>)> {
    if n_qubits < 2 {
        return Err(Error::invalid(format!("ansatz needs at least 2 qubits, got {n_qubits}")));
    }
    if depth == 0 || blocks == 0 {
        return Err(Error::invalid("depth and block count must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let mut ops = Vec::new();
    let mut params = Vec::new();
    for _ in 0..blocks {
        let start = ops.len();
        for _ in 0..depth {
            for q in 0..n_qubits {
                for kind in [GateKind::Ry, GateKind::Rz] {
                    ops.push(HeaOp::Rot { kind, qubit: q, param: params.len() });
                    params.push(rng.random_range(0.0..TAU));
                }
            }
            ops.extend((0..n_qubits - 1).map(|q| HeaOp::Cz { control: q, target: q + 1 }));
        }
        let forward: Vec<HeaOp> = ops[start..].to_vec();
        for op in forward.into_iter().rev() {
            ops.push(match op {
                HeaOp::Rot { kind, qubit, param } => {
                    let value = if identity_init { -params[param] } else { rng.random_range(0.0..TAU) };
                    params.push(value);
                    HeaOp::Rot { kind, qubit, param: params.len() - 1 }
                }
                cz => cz,
            });
        }
    }
    let hea = Hea {
        n_qubits,
        depth,
        blocks,
        ops,
        n_params: params.len(),
    };
    Ok((hea, params))
}

impl Hea {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn ops(&self) -> &[HeaOp] {
        &self.ops
    }

    fn gate(op: &HeaOp, params: &[f64]) -> Gate {
        match *op {
            HeaOp::Rot { kind, qubit, param } => Gate {
                kind,
                angle: params[param],
                target: qubit,
                control: None,
            },
            HeaOp::Cz { control, target } => Gate::cz(control, target),
        }
    }

    fn check(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::DimensionMismatch {
                expected: self.n_params,
                actual: params.len(),
            });
        }
        Ok(())
    }

    pub fn circuit(&self, params: &[f64]) -> Result<Circuit> {
        self.check(params)?;
        Circuit::from_gates(self.n_qubits, self.ops.iter().map(|op| Self::gate(op, params)).collect())
    }

    pub fn apply_in_place(&self, params: &[f64], amps: &mut [Complex64]) {
        for op in &self.ops {
            apply_gate_in_place(amps, self.n_qubits, &Self::gate(op, params));
        }
    }

    /// Column `j` of the ansatz unitary.
    pub fn column(&self, params: &[f64], j: usize) -> Vec<Complex64> {
        let mut e = vec![Complex64::new(0.0, 0.0); self.dim()];
        e[j] = Complex64::new(1.0, 0.0);
        self.apply_in_place(params, &mut e);
        e
    }

    /// For every parameter `p` and shift `s`, the value of
    /// `f(θ) = −Σ_j q_j Re⟨λ_j, C(θ) e_j⟩` with `θ_p` moved by `s`.
    /// `out[p][i]` belongs to `shifts[i]`.
    fn shifted_values(&self, params: &[f64], lambdas: &[Vec<Complex64>], weights: &[f64], shifts: &[f64]) -> Vec<Vec<f64>> {
        let mut phis: Vec<Vec<Complex64>> = (0..lambdas.len()).map(|j| self.column(params, j)).collect();
        let mut lambdas = lambdas.to_vec();
        let mut out = vec![vec![0.0; shifts.len()]; self.n_params];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.dim()];
        for op in self.ops.iter().rev() {
            let inv = Self::gate(op, params).inverse();
            for phi in &mut phis {
                apply_gate_in_place(phi, self.n_qubits, &inv);
            }
            if let HeaOp::Rot { kind, qubit, param } = *op {
                for (slot, &s) in out[param].iter_mut().zip(shifts) {
                    let g = Gate {
                        kind,
                        angle: params[param] + s,
                        target: qubit,
                        control: None,
                    };
                    let mut total = 0.0;
                    for ((phi, lambda), &q) in phis.iter().zip(&lambdas).zip(weights) {
                        scratch.copy_from_slice(phi);
                        apply_gate_in_place(&mut scratch, self.n_qubits, &g);
                        total -= q * dot(lambda, &scratch).re;
                    }
                    *slot = total;
                }
            }
            for lambda in &mut lambdas {
                apply_gate_in_place(lambda, self.n_qubits, &inv);
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientScheme {
    /// Exact shifted-value rule with shifts `±π/2`.
    ParameterShift,
    CentralDifference { step: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqsvdConfig {
    /// Number of singular values sought, `T`.
    pub rank: usize,
    /// `q_1 > … > q_T > 0`; `None` means `q_j = T + 1 − j`.
    pub weights: Option<Vec<f64>>,
    pub depth: usize,
    pub blocks: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_iterations: usize,
    pub scheme: GradientScheme,
    pub seed: u64,
    pub identity_init: bool,
    /// Stop after `patience` consecutive steps with `|ΔL|` below this.
    pub tolerance: f64,
    pub patience: usize,
}

impl VqsvdConfig {
    pub fn new(rank: usize, seed: u64) -> Self {
        VqsvdConfig {
            rank,
            weights: None,
            depth: 4,
            blocks: 2,
            learning_rate: 0.05,
            momentum: 0.0,
            max_iterations: 2000,
            scheme: GradientScheme::ParameterShift,
            seed,
            identity_init: true,
            tolerance: 1e-9,
            patience: 50,
        }
    }

    pub fn weights(&self) -> Result<Vec<f64>> {
        let w = match &self.weights {
            Some(w) => w.clone(),
            None => (0..self.rank).map(|j| (self.rank - j) as f64).collect(),
        };
        if w.len() != self.rank || self.rank == 0 {
            return Err(Error::invalid(format!("need {} weights, got {}", self.rank, w.len())));
        }
        if w.iter().any(|&x| !(x > 0.0)) || w.windows(2).any(|p| p[0] <= p[1]) {
            return Err(Error::invalid("weights must be positive and strictly decreasing"));
        }
        Ok(w)
    }
}

/// The trained pair of ansätze with the matrix they act on.
#[derive(Clone, Debug)]
pub struct Problem<'a> {
    pub matrix: &'a ComplexMatrix,
    pub left: Hea,
    pub right: Hea,
    pub weights: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(matrix: &'a ComplexMatrix, left: Hea, right: Hea, weights: Vec<f64>) -> Result<Self> {
        if matrix.rows() != left.dim() {
            return Err(Error::DimensionMismatch {
                expected: left.dim(),
                actual: matrix.rows(),
            });
        }
        if matrix.cols() != right.dim() {
            return Err(Error::DimensionMismatch {
                expected: right.dim(),
                actual: matrix.cols(),
            });
        }
        if weights.len() > left.dim().min(right.dim()) {
            return Err(Error::invalid(format!("rank {} exceeds the matrix size", weights.len())));
        }
        if !matrix.is_finite() {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        Ok(Problem {
            matrix,
            left,
            right,
            weights,
        })
    }

    /// `m_j = Re⟨j|U†M̃V|j⟩` for `j < T`.
    pub fn readouts(&self, theta: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
        self.left.check(theta)?;
        self.right.check(phi)?;
        (0..self.weights.len())
            .map(|j| {
                let u = self.left.column(theta, j);
                let w = self.matrix.mul_vec(&self.right.column(phi, j))?;
                Ok(dot(&u, &w).re)
            })
            .collect()
    }

    pub fn loss(&self, theta: &[f64], phi: &[f64]) -> Result<f64> {
        Ok(-self.readouts(theta, phi)?.iter().zip(&self.weights).map(|(m, q)| m * q).sum::<f64>())
    }

    /// Loss with `θ_p` (left) or `φ_p` (right) shifted, for every `p`.
    fn shifted(&self, theta: &[f64], phi: &[f64], shifts: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let t = self.weights.len();
        let us: Vec<Vec<Complex64>> = (0..t).map(|j| self.left.column(theta, j)).collect();
        let vs: Vec<Vec<Complex64>> = (0..t).map(|j| self.right.column(phi, j)).collect();
        // Left: λ_j = M̃ V e_j. Right: λ_j = M̃† U e_j.
        let left_l = vs.iter().map(|v| self.matrix.mul_vec(v)).collect::<Result<Vec<_>>>()?;
        let right_l = us.iter().map(|u| self.matrix.adjoint_mul_vec(u)).collect::<Result<Vec<_>>>()?;
        Ok((
            self.left.shifted_values(theta, &left_l, &self.weights, shifts),
            self.right.shifted_values(phi, &right_l, &self.weights, shifts),
        ))
    }

    /// `(∂L/∂θ, ∂L/∂φ)`.
    pub fn gradient(&self, theta: &[f64], phi: &[f64], scheme: GradientScheme) -> Result<(Vec<f64>, Vec<f64>)> {
        self.left.check(theta)?;
        self.right.check(phi)?;
        let s = match scheme {
            GradientScheme::ParameterShift => FRAC_PI_2,
            GradientScheme::CentralDifference { step } => {
                if !(step > 0.0) {
                    return Err(Error::invalid(format!("difference step {step} must be positive")));
                }
                step
            }
        };
        let denom = match scheme {
            GradientScheme::ParameterShift => 4.0 * (s / 2.0).sin(),
            GradientScheme::CentralDifference { .. } => 2.0 * s,
        };
        let (l, r) = self.shifted(theta, phi, &[s, -s])?;
        let fold = |v: Vec<Vec<f64>>| v.into_iter().map(|p| (p[0] - p[1]) / denom).collect();
        Ok((fold(l), fold(r)))
    }

    /// Central differences by re-evaluating the full loss per parameter.
    pub fn gradient_brute_force(&self, theta: &[f64], phi: &[f64], step: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let diff = |which_left: bool, p: usize| -> Result<f64> {
            let (mut t, mut f) = (theta.to_vec(), phi.to_vec());
            let target = if which_left { &mut t } else { &mut f };
            target[p] += step;
            let up = self.loss(&t, &f)?;
            let target = if which_left { &mut t } else { &mut f };
            target[p] -= 2.0 * step;
            let down = self.loss(&t, &f)?;
            Ok((up - down) / (2.0 * step))
        };
        Ok((
            (0..theta.len()).map(|p| diff(true, p)).collect::<Result<_>>()?,
            (0..phi.len()).map(|p| diff(false, p)).collect::<Result<_>>()?,
        ))
    }
}

/// `−Σ_j q_j Re⟨j|U(θ)†M̃V(φ)|j⟩`.
pub fn vqsvd_loss(matrix: &ComplexMatrix, left: &Hea, theta: &[f64], right: &Hea, phi: &[f64], weights: &[f64]) -> Result<f64> {
    Problem::new(matrix, left.clone(), right.clone(), weights.to_vec())?.loss(theta, phi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Loss before each update.
    pub losses: Vec<f64>,
    /// `|m_j|` at the final parameters, sorted descending.
    pub estimates: Vec<f64>,
    /// `m_j` in basis order at the final parameters.
    pub readouts: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

impl TrainTrace {
    /// `iter,loss`.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("iter,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            let _ = writeln!(out, "{i},{l}");
        }
        out
    }
}

fn qubits_for(dim: usize, what: &str) -> Result<usize> {
    if !dim.is_power_of_two() || dim < 4 {
        return Err(Error::invalid(format!("{what} dimension {dim} must be 2^n with n ≥ 2")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Gradient descent from the configured initial point.
pub fn train(matrix: &ComplexMatrix, cfg: &VqsvdConfig) -> Result<TrainTrace> {
    let weights = cfg.weights()?;
    if !(cfg.learning_rate > 0.0) || !(0.0..1.0).contains(&cfg.momentum) {
        return Err(Error::invalid("learning rate must be positive and momentum in [0, 1)"));
    }
    let nl = qubits_for(matrix.rows(), "row")?;
    let nr = qubits_for(matrix.cols(), "column")?;
    let (left, mut theta) = build_hea(nl, cfg.depth, cfg.blocks, derive_seed(cfg.seed, 0), cfg.identity_init)?;
    let (right, mut phi) = build_hea(nr, cfg.depth, cfg.blocks, derive_seed(cfg.seed, 1), cfg.identity_init)?;
    let problem = Problem::new(matrix, left, right, weights)?;
    let (mut vt, mut vp) = (vec![0.0; theta.len()], vec![0.0; phi.len()]);
    let mut losses = Vec::new();
    let mut calm = 0;
    let mut converged = false;
    for it in 0..cfg.max_iterations {
        let loss = problem.loss(&theta, &phi)?;
        if !loss.is_finite() {
            let parameter = theta.iter().chain(&phi).position(|x| !x.is_finite()).unwrap_or(0);
            return Err(Error::NonFiniteLoss { iteration: it, parameter });
        }
        if let Some(&prev) = losses.last() {
            let change: f64 = loss - prev;
            calm = if change.abs() < cfg.tolerance { calm + 1 } else { 0 };
        }
        losses.push(loss);
        if calm >= cfg.patience {
            converged = true;
            break;
        }
        let (gt, gp) = problem.gradient(&theta, &phi, cfg.scheme)?;
        if let Some(parameter) = gt.iter().chain(&gp).position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { iteration: it, parameter });
        }
        // A stationary start (such as an already diagonal input) is done.
        if gt.iter().chain(&gp).all(|g| g.abs() < 1e-12) {
            converged = true;
            break;
        }
        for (x, (v, g)) in theta.iter_mut().zip(vt.iter_mut().zip(&gt)) {
            *v = cfg.momentum * *v - cfg.learning_rate * g;
            *x += *v;
        }
        for (x, (v, g)) in phi.iter_mut().zip(vp.iter_mut().zip(&gp)) {
            *v = cfg.momentum * *v - cfg.learning_rate * g;
            *x += *v;
        }
    }
    let readouts = problem.readouts(&theta, &phi)?;
    let mut estimates: Vec<f64> = readouts.iter().map(|m| m.abs()).collect();
    estimates.sort_by(|a, b| b.total_cmp(a));
    Ok(TrainTrace {
        iterations: losses.len(),
        losses,
        estimates,
        readouts,
        theta,
        phi,
        converged,
    })
}

/// Rank-`r` real `N × N` data matrix `A·diag(σ)·Bᵀ` with the given profile.
pub fn low_rank_matrix(dim: usize, rank: usize, profile: Profile, seed: u64) -> Result<(ComplexMatrix, Vec<f64>)> {
    if rank == 0 || rank > dim {
        return Err(Error::invalid(format!("rank {rank} must be in 1..={dim}")));
    }
    let sigma = profile.values(rank)?;
    let mut rng = rng_from_seed(seed);
    let a = haar_isometry(dim, rank, false, &mut rng);
    let b = haar_isometry(dim, rank, false, &mut rng);
    let m = ComplexMatrix::from_fn(dim, dim, |i, j| (0..rank).map(|c| a[(i, c)] * b[(j, c)] * sigma[c]).sum());
    Ok((m, sigma))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub n_qubits: usize,
    pub rank: usize,
    pub profile: Profile,
    /// Qubits measured (post-selected on 0) to shrink the row space.
    pub measured: Vec<usize>,
    /// Depth of the projection circuit.
    pub circuit_depth: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub j: usize,
    pub true_sigma: f64,
    /// Singular value of the projected matrix.
    pub projected_sigma: f64,
    pub estimated: f64,
    /// Relative to `true_sigma`, in percent.
    pub pct_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub trace: TrainTrace,
    pub rows: Vec<PipelineRow>,
    /// Which side carries which register.
    pub convention: String,
}

impl PipelineResult {
    /// `j,true_sigma,estimated,pct_error`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("j,true_sigma,estimated,pct_error\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.j, r.true_sigma, r.estimated, r.pct_error);
        }
        out
    }
}

/// The `k × N` matrix the pipeline trains on: the data matrix pushed through
/// the projection circuit with the listed qubits post-selected on 0 and
/// scaled by `√(N/k)`. With nothing measured it is the data matrix itself.
pub fn projected_matrix(m: &ComplexMatrix, spec: &PipelineSpec) -> Result<ComplexMatrix> {
    if spec.measured.is_empty() {
        return Ok(m.clone());
    }
    let circuit = build_rqc(&AnsatzSpec::new(spec.n_qubits, spec.circuit_depth, derive_seed(spec.seed, 1)))?;
    project_columns_by_measurement(&circuit, m, &spec.measured, 0)
}

/// Data matrix, measurement projection, training, and per-value errors.
pub fn pipeline_demo(spec: &PipelineSpec, cfg: &VqsvdConfig) -> Result<PipelineResult> {
    let dim = 1usize << spec.n_qubits;
    let (m, sigma) = low_rank_matrix(dim, spec.rank, spec.profile, derive_seed(spec.seed, 0))?;
    let projected = projected_matrix(&m, spec)?;
    let oracle = svd(&projected)?.singular_values;
    let trace = train(&projected, cfg)?;
    let rows = trace
        .estimates
        .iter()
        .enumerate()
        .map(|(j, &est)| {
            let true_sigma = sigma.get(j).copied().unwrap_or(0.0);
            PipelineRow {
                j: j + 1,
                true_sigma,
                projected_sigma: oracle[j],
                estimated: est,
                pct_error: if true_sigma > 0.0 { 100.0 * (est - true_sigma).abs() / true_sigma } else { f64::NAN },
            }
        })
        .collect();
    Ok(PipelineResult {
        trace,
        rows,
        convention: format!(
            "left ansatz on the {}-qubit measured register (rows), right ansatz on the {}-qubit data register (columns)",
            spec.n_qubits - spec.measured.len(),
            spec.n_qubits
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::circuit_unitary;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = rng_from_seed(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn identity_init_is_identity() {
        let (h, p) = build_hea(3, 2, 2, 5, true).unwrap();
        assert_eq!(h.n_params(), 2 * 2 * 2 * 2 * 3);
        let u = circuit_unitary(&h.circuit(&p).unwrap()).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(8)) < 1e-10);
        let mut bent = p.clone();
        let last = bent.len() - 1;
        bent[last] += 0.3;
        let u = circuit_unitary(&h.circuit(&bent).unwrap()).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(8)) > 1e-3);
    }

    #[test]
    fn identity_init_loss_reads_the_diagonal() {
        let m = random_matrix(4, 8, 11);
        let (l, t) = build_hea(2, 3, 2, 1, true).unwrap();
        let (r, f) = build_hea(3, 3, 2, 2, true).unwrap();
        let w = vec![3.0, 2.0, 1.0];
        let want: f64 = -(0..3).map(|j| w[j] * m[(j, j)].re).sum::<f64>();
        assert!((vqsvd_loss(&m, &l, &t, &r, &f, &w).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn hea_rejects_bad_shapes() {
        assert!(build_hea(1, 2, 2, 0, true).is_err());
        assert!(build_hea(2, 0, 2, 0, true).is_err());
    }

    #[test]
    fn diagonal_optimum_at_identity() {
        let sig = [0.9, 0.5, 0.3, 0.1];
        let m = ComplexMatrix::from_fn(4, 8, |i, j| if i == j { Complex64::new(sig[i], 0.0) } else { Complex64::new(0.0, 0.0) });
        let (l, t) = build_hea(2, 2, 2, 1, true).unwrap();
        let (r, f) = build_hea(3, 2, 2, 2, true).unwrap();
        let w = vec![3.0, 2.0, 1.0];
        let loss = vqsvd_loss(&m, &l, &t, &r, &f, &w).unwrap();
        assert!((loss + (3.0 * 0.9 + 2.0 * 0.5 + 0.3)).abs() < 1e-12);

        let mut cfg = VqsvdConfig::new(3, 4);
        cfg.depth = 2;
        let tr = train(&m, &cfg).unwrap();
        assert!(tr.converged && tr.iterations <= 10);
        for (e, s) in tr.estimates.iter().zip(&sig) {
            assert!((e - s).abs() < 1e-6);
        }
    }

    #[test]
    fn loss_respects_operator_norm() {
        let m = random_matrix(4, 8, 3);
        let s1 = svd(&m).unwrap().singular_values[0];
        let (l, _) = build_hea(2, 2, 2, 1, false).unwrap();
        let (r, _) = build_hea(3, 2, 2, 2, false).unwrap();
        let w = [3.0, 2.0, 1.0];
        for seed in 0..10 {
            let mut rng = rng_from_seed(seed);
            let t: Vec<f64> = (0..l.n_params()).map(|_| rng.random_range(0.0..TAU)).collect();
            let f: Vec<f64> = (0..r.n_params()).map(|_| rng.random_range(0.0..TAU)).collect();
            let loss = vqsvd_loss(&m, &l, &t, &r, &f, &w).unwrap();
            assert!(loss.abs() <= 6.0 * s1 + 1e-12);
        }
    }

    #[test]
    fn shift_rule_matches_finite_differences() {
        let m = random_matrix(4, 8, 7);
        let (l, t) = build_hea(2, 2, 2, 11, false).unwrap();
        let (r, f) = build_hea(3, 2, 2, 12, false).unwrap();
        let p = Problem::new(&m, l, r, vec![3.0, 2.0, 1.0]).unwrap();
        let (at, af) = p.gradient(&t, &f, GradientScheme::ParameterShift).unwrap();
        let (bt, bf) = p.gradient_brute_force(&t, &f, 1e-5).unwrap();
        let (ct, cf) = p.gradient(&t, &f, GradientScheme::CentralDifference { step: 1e-5 }).unwrap();
        for (a, (b, c)) in at.iter().chain(&af).zip(bt.iter().chain(&bf).zip(ct.iter().chain(&cf))) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{a} vs {b}");
            assert!((b - c).abs() <= 1e-8);
        }
    }

    #[test]
    fn readout_vectors_are_orthonormal() {
        let (h, p) = build_hea(4, 3, 2, 9, false).unwrap();
        let cols: Vec<Vec<Complex64>> = (0..5).map(|j| h.column(&p, j)).collect();
        for a in 0..5 {
            for b in 0..5 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot(&cols[a], &cols[b]) - Complex64::new(want, 0.0)).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = VqsvdConfig::new(3, 0);
        cfg.weights = Some(vec![1.0, 2.0, 0.5]);
        assert!(cfg.weights().is_err());
        cfg.weights = Some(vec![3.0, 2.0]);
        assert!(cfg.weights().is_err());
        let m = random_matrix(4, 6, 1);
        assert!(train(&m, &VqsvdConfig::new(2, 0)).is_err());
        let mut nan = random_matrix(4, 8, 1);
        nan[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(train(&nan, &VqsvdConfig::new(2, 0)).is_err());
    }

    #[test]
    fn unmeasured_pipeline_uses_the_data_matrix() {
        let spec = PipelineSpec {
            n_qubits: 3,
            rank: 2,
            profile: Profile::Linear,
            measured: vec![],
            circuit_depth: 5,
            seed: 3,
        };
        let (m, _) = low_rank_matrix(8, 2, Profile::Linear, derive_seed(3, 0)).unwrap();
        assert_eq!(projected_matrix(&m, &spec).unwrap().max_abs_diff(&m), 0.0);
        let measured = PipelineSpec { measured: vec![0], ..spec };
        let p = projected_matrix(&m, &measured).unwrap();
        assert_eq!((p.rows(), p.cols()), (4, 8));
    }
}
