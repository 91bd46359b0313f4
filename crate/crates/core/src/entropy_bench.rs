//! Von Neumann entropy of low-rank density matrices after random projection.
//!
//! For `ρ = W·diag(p)·W†` with `W` an `N × r` isometry, the singular values of
//! `M̃ = ρ·Πᵀ` equal those of the `k × r` matrix `Π·W̄·diag(p)`, so the
//! projector only ever touches `r` vectors and the SVD is `k × r`.

use std::fmt::{self, Write as _};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{haar_isometry, random_unit_vector, svd, ComplexMatrix};
use crate::projectors::{build_qrp, build_srht, Projector, ProjectorKind};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::rqc::{AnsatzSpec, EXACT_DESIGN_DEPTH};
use crate::stats;

/// Projected singular values at or below this are dropped from `S̃`.
pub const PROJECTED_FLOOR: f64 = 1e-12;
/// True singular values at or below this are dropped from `S`.
pub const TRUE_FLOOR: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `p_i ∝ r + 1 − i`.
    Linear,
    /// `p_i ∝ e^{−c(i−1)}`.
    Exponential { decay: f64 },
}

impl Profile {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Linear => "linear",
            Profile::Exponential { .. } => "exponential",
        }
    }

    /// The `r` nonzero singular values, descending and summing to 1.
    pub fn values(&self, rank: usize) -> Result<Vec<f64>> {
        if rank == 0 {
            return Err(Error::invalid("rank must be at least 1"));
        }
        let raw: Vec<f64> = match *self {
            Profile::Linear => (1..=rank).map(|i| (rank + 1 - i) as f64).collect(),
            Profile::Exponential { decay } => {
                if !(decay > 0.0 && decay.is_finite()) {
                    return Err(Error::invalid(format!("decay {decay} must be positive")));
                }
                (0..rank).map(|i| (-decay * i as f64).exp()).collect()
            }
        };
        let total = stats::pairwise_sum(&raw);
        Ok(raw.into_iter().map(|x| x / total).collect())
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowRankDensitySpec {
    pub dim: usize,
    pub rank: usize,
    pub profile: Profile,
    pub seed: u64,
    /// Complex unitary singular vectors instead of real orthogonal ones.
    pub complex: bool,
}

impl LowRankDensitySpec {
    pub fn new(dim: usize, rank: usize, profile: Profile, seed: u64) -> Self {
        LowRankDensitySpec {
            dim,
            rank,
            profile,
            seed,
            complex: false,
        }
    }
}

/// `ρ = W·diag(p)·W†`, kept in factored form.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    w: ComplexMatrix,
    p: Vec<f64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn rank(&self) -> usize {
        self.p.len()
    }

    /// `N × r` isometry of singular vectors.
    pub fn vectors(&self) -> &ComplexMatrix {
        &self.w
    }

    /// True singular values, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.p
    }

    /// Explicit `N × N` matrix.
    pub fn to_dense(&self) -> ComplexMatrix {
        let n = self.dim();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..self.rank())
                .map(|c| self.w[(i, c)] * self.w[(j, c)].conj() * self.p[c])
                .sum()
        })
    }
}

pub fn generate_density(spec: &LowRankDensitySpec) -> Result<DensityMatrix> {
    if spec.rank == 0 || spec.rank > spec.dim {
        return Err(Error::invalid(format!("rank {} must be in 1..={}", spec.rank, spec.dim)));
    }
    let p = spec.profile.values(spec.rank)?;
    let w = haar_isometry(spec.dim, spec.rank, spec.complex, &mut rng_from_seed(spec.seed));
    Ok(DensityMatrix { w, p })
}

/// `Σ p ln(1/p)` over `p > floor`.
pub fn entropy(p: &[f64], floor: f64) -> f64 {
    let terms: Vec<f64> = p.iter().filter(|&&x| x > floor).map(|&x| -x * x.ln()).collect();
    stats::pairwise_sum(&terms)
}

pub fn true_entropy(d: &DensityMatrix) -> f64 {
    entropy(&d.p, TRUE_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedEntropy {
    pub entropy: f64,
    /// Singular values of `ρ·Πᵀ`, descending, `min(k, r)` of them, before
    /// clamping.
    pub singular_values: Vec<f64>,
    /// How many exceeded 1 and were clamped.
    pub clamped: usize,
}

/// `S̃` from raw projected singular values: clamp to 1, drop `≤ 1e-12`.
pub fn entropy_from_projected(singular_values: Vec<f64>) -> ProjectedEntropy {
    let clamped = singular_values.iter().filter(|&&x| x > 1.0).count();
    let capped: Vec<f64> = singular_values.iter().map(|&x| x.min(1.0)).collect();
    ProjectedEntropy {
        entropy: entropy(&capped, PROJECTED_FLOOR),
        singular_values,
        clamped,
    }
}

/// `Π·W̄` (`k × r`): the projector applied to each conjugated singular vector.
pub fn project_vectors(d: &DensityMatrix, p: &Projector) -> Result<ComplexMatrix> {
    if p.dim() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            actual: p.dim(),
        });
    }
    let cols = (0..d.rank())
        .map(|c| {
            let col: Vec<Complex64> = d.w.column(c).iter().map(|z| z.conj()).collect();
            p.apply(&col)
        })
        .collect::<Result<Vec<_>>>()?;
    ComplexMatrix::from_columns(&cols)
}

/// Singular values of `ρ·Πᵀ` given `Π·W̄` (or a prefix-truncation of it).
pub fn projected_singular_values(projected: &ComplexMatrix, p: &[f64]) -> Result<Vec<f64>> {
    let scaled = ComplexMatrix::from_fn(projected.rows(), projected.cols(), |i, j| projected[(i, j)] * p[j]);
    Ok(svd(&scaled)?.singular_values)
}

pub fn projected_entropy_with(d: &DensityMatrix, p: &Projector) -> Result<ProjectedEntropy> {
    let pw = project_vectors(d, p)?;
    Ok(entropy_from_projected(projected_singular_values(&pw, &d.p)?))
}

/// Random projector of the given kind; PCA is not meaningful here.
pub fn random_projector(kind: ProjectorKind, dim: usize, k: usize, depth: usize, seed: u64) -> Result<Projector> {
    match kind {
        ProjectorKind::Srht => build_srht(dim, k, seed),
        ProjectorKind::Qrp => {
            if !dim.is_power_of_two() || dim < 4 {
                return Err(Error::invalid(format!("QRP needs N = 2^n ≥ 4, got {dim}")));
            }
            build_qrp(&AnsatzSpec::new(dim.trailing_zeros() as usize, depth, seed), k)
        }
        ProjectorKind::Pca => Err(Error::invalid("entropy estimation needs a random projector (qrp or srht)")),
    }
}

pub fn projected_entropy(
    d: &DensityMatrix,
    kind: ProjectorKind,
    k: usize,
    seed: u64,
    depth: usize,
) -> Result<ProjectedEntropy> {
    projected_entropy_with(d, &random_projector(kind, d.dim(), k, depth, seed)?)
}

/// `√(3ε)·S + √(9/2)·ε`.
pub fn theorem3_bound(eps: f64, s: f64) -> f64 {
    (3.0 * eps).sqrt() * s + 4.5f64.sqrt() * eps
}

/// Whether `|p_i² − p̃_i²| ≤ 3ε·p_i²` for every `i < r`.
pub fn within_envelope(p: &[f64], projected: &[f64], eps: f64) -> bool {
    p.iter().enumerate().all(|(i, &pi)| {
        let q = projected.get(i).copied().unwrap_or(0.0);
        (pi * pi - q * q).abs() <= 3.0 * eps * pi * pi
    })
}

/// Empirical `(1−δ)`-quantile of `|‖Πv‖² − 1|` over uniformly random real
/// unit vectors, each with a fresh projector.
pub fn calibrate_epsilon(
    kind: ProjectorKind,
    dim: usize,
    k: usize,
    delta: f64,
    samples: usize,
    seed: u64,
    depth: usize,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("δ = {delta} must be in (0, 1)")));
    }
    if samples < 10 {
        return Err(Error::invalid("calibration needs at least 10 samples"));
    }
    let devs: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let v = random_unit_vector(dim, &mut stream(seed, i));
            let p = random_projector(kind, dim, k, depth, derive_seed(seed, i))?;
            let y = p.apply_real(&v)?;
            Ok((y.iter().map(Complex64::norm_sqr).sum::<f64>() - 1.0).abs())
        })
        .collect::<Result<_>>()?;
    Ok(stats::quantile(&devs, 1.0 - delta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Outcome {
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    /// Fraction of trials with `|S̃ − S| ≤ √(3ε)S + √(9/2)ε`.
    pub rate: f64,
    pub rate_std_error: f64,
    /// Fraction within the per-singular-value envelope.
    pub envelope_rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Config {
    pub density: LowRankDensitySpec,
    pub kind: ProjectorKind,
    pub k: usize,
    pub delta: f64,
    pub trials: usize,
    /// `None` calibrates with `calibration_samples` draws.
    pub epsilon: Option<f64>,
    pub calibration_samples: usize,
    pub depth: usize,
}

impl Theorem3Config {
    pub fn new(density: LowRankDensitySpec, kind: ProjectorKind, k: usize, delta: f64, trials: usize) -> Self {
        Theorem3Config {
            density,
            kind,
            k,
            delta,
            trials,
            epsilon: None,
            calibration_samples: 2000,
            depth: EXACT_DESIGN_DEPTH,
        }
    }
}

/// Fresh density matrix and projector per trial; the seed of the density
/// spec is the master seed.
pub fn theorem3_check(cfg: &Theorem3Config) -> Result<Theorem3Outcome> {
    if !(cfg.delta > 0.0 && cfg.delta <= 0.5) {
        return Err(Error::invalid(format!("δ = {} must be in (0, 1/2]", cfg.delta)));
    }
    if cfg.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let seed = cfg.density.seed;
    let d = cfg.density.dim;
    let eps = match cfg.epsilon {
        Some(e) => e,
        None => calibrate_epsilon(cfg.kind, d, cfg.k, cfg.delta, cfg.calibration_samples, derive_seed(seed, 1), cfg.depth)?,
    };
    if !(eps >= 0.0 && eps <= 1.0 / 6.0) {
        return Err(Error::invalid(format!("ε = {eps} violates ε ≤ 1/6")));
    }
    let hits: Vec<(bool, bool)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ts = derive_seed(derive_seed(seed, 2), t);
            let rho = generate_density(&LowRankDensitySpec {
                seed: derive_seed(ts, 0),
                ..cfg.density
            })?;
            let p = random_projector(cfg.kind, d, cfg.k, cfg.depth, derive_seed(ts, 1))?;
            let pe = projected_entropy_with(&rho, &p)?;
            let s = true_entropy(&rho);
            Ok((
                (pe.entropy - s).abs() <= theorem3_bound(eps, s),
                within_envelope(&rho.p, &pe.singular_values, eps),
            ))
        })
        .collect::<Result<_>>()?;
    let n = hits.len() as f64;
    let rate = hits.iter().filter(|h| h.0).count() as f64 / n;
    Ok(Theorem3Outcome {
        epsilon: eps,
        delta: cfg.delta,
        trials: cfg.trials,
        rate,
        rate_std_error: (rate * (1.0 - rate) / n).sqrt(),
        envelope_rate: hits.iter().filter(|h| h.1).count() as f64 / n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub dim: usize,
    pub ranks: Vec<usize>,
    pub ks: Vec<usize>,
    /// Profiles share singular vectors and projectors trial by trial.
    pub profiles: Vec<Profile>,
    pub kind: ProjectorKind,
    pub trials: usize,
    pub seed: u64,
    pub depth: usize,
    pub complex: bool,
    /// `δ` for the envelope and bound checks.
    pub delta: f64,
    /// `None` calibrates per `k`.
    pub epsilon: Option<f64>,
    pub calibration_samples: usize,
}

impl EntropyConfig {
    pub fn new(dim: usize, ranks: Vec<usize>, ks: Vec<usize>, profiles: Vec<Profile>, kind: ProjectorKind, trials: usize, seed: u64) -> Self {
        EntropyConfig {
            dim,
            ranks,
            ks,
            profiles,
            kind,
            trials,
            seed,
            depth: EXACT_DESIGN_DEPTH,
            complex: false,
            delta: 0.1,
            epsilon: None,
            calibration_samples: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankStat {
    /// 1-based rank index.
    pub index: usize,
    pub mean_pct_error: f64,
    pub ci95: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyRow {
    pub profile: Profile,
    pub rank: usize,
    pub k: usize,
    pub mean_pct_error: f64,
    pub ci90: f64,
    pub trials: usize,
    pub epsilon: f64,
    /// Trials satisfying the entropy bound.
    pub bound_rate: f64,
    /// Trials with every singular value inside the `3ε` envelope.
    pub envelope_rate: f64,
    /// Projected singular values clamped at 1, over all trials.
    pub clamped: usize,
    pub per_singular_value: Vec<RankStat>,
    /// `|S̃ − S|/S × 100` per trial.
    pub samples: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub dim: usize,
    pub kind: ProjectorKind,
    pub seed: u64,
    pub rows: Vec<EntropyRow>,
}

impl EntropyReport {
    pub fn row(&self, profile: Profile, rank: usize, k: usize) -> Option<&EntropyRow> {
        self.rows.iter().find(|r| r.profile == profile && r.rank == rank && r.k == k)
    }

    /// `profile,r,N,k,kind,mean_pct_entropy_error,ci90,bound_rate,seed`.
    pub fn to_csv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("profile,r,N,k,kind,mean_pct_entropy_error,ci90,bound_rate,seed\n");
        }
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.profile, r.rank, self.dim, r.k, self.kind, r.mean_pct_error, r.ci90, r.bound_rate, self.seed
            );
        }
        out
    }

    /// `rank_index,mean_pct_error,ci95` for one `(profile, r, k)` cell.
    pub fn singular_value_csv(&self, profile: Profile, rank: usize, k: usize, header: bool) -> Option<String> {
        let row = self.row(profile, rank, k)?;
        let mut out = String::new();
        if header {
            out.push_str("rank_index,mean_pct_error,ci95\n");
        }
        for s in &row.per_singular_value {
            let _ = writeln!(out, "{},{},{}", s.index, s.mean_pct_error, s.ci95);
        }
        Some(out)
    }
}

struct Cell {
    pct: f64,
    bound_ok: bool,
    envelope_ok: bool,
    clamped: usize,
    per_value: Vec<f64>,
}

/// Entropy error over `trials` density matrices for every `(profile, r, k)`.
///
/// Trial `t` uses one projector built at the largest `k` (smaller `k` keep a
/// prefix of its output) and one fresh set of singular vectors per rank,
/// shared by all profiles so that profiles are compared on paired draws.
pub fn run_entropy(cfg: &EntropyConfig) -> Result<EntropyReport> {
    let mut problems = Vec::new();
    if cfg.ranks.is_empty() || cfg.ks.is_empty() || cfg.profiles.is_empty() {
        problems.push("profiles, ranks and ks must be nonempty".to_string());
    }
    if let Some(r) = cfg.ranks.iter().find(|&&r| r < 2 || r > cfg.dim) {
        problems.push(format!("rank {r} must be in 2..={} (rank 1 has zero entropy)", cfg.dim));
    }
    if let Some(k) = cfg.ks.iter().find(|&&k| k == 0 || k > cfg.dim) {
        problems.push(format!("k = {k} must be in 1..={}", cfg.dim));
    }
    if cfg.trials < 2 {
        problems.push(format!("trials = {} must be at least 2", cfg.trials));
    }
    for p in &cfg.profiles {
        if let Err(e) = p.values(2) {
            problems.push(e.to_string());
        }
    }
    if !problems.is_empty() {
        return Err(Error::invalid(problems.join("; ")));
    }

    let epsilons = cfg
        .ks
        .iter()
        .map(|&k| match cfg.epsilon {
            Some(e) => Ok(e),
            None => calibrate_epsilon(
                cfg.kind,
                cfg.dim,
                k,
                cfg.delta,
                cfg.calibration_samples,
                derive_seed(cfg.seed, k as u64),
                cfg.depth,
            ),
        })
        .collect::<Result<Vec<f64>>>()?;
    let k_max = *cfg.ks.iter().max().expect("nonempty ks");

    // cells[t][rank][profile][k]
    let cells: Vec<Vec<Vec<Vec<Cell>>>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ts = derive_seed(derive_seed(cfg.seed, u64::MAX), t);
            let proj = random_projector(cfg.kind, cfg.dim, k_max, cfg.depth, derive_seed(ts, u64::MAX))?;
            cfg.ranks
                .iter()
                .map(|&r| {
                    let w = haar_isometry(cfg.dim, r, cfg.complex, &mut rng_from_seed(derive_seed(ts, r as u64)));
                    let full = project_vectors(&DensityMatrix { w, p: vec![0.0; r] }, &proj)?;
                    cfg.profiles
                        .iter()
                        .map(|profile| {
                            let p = profile.values(r)?;
                            let s = entropy(&p, TRUE_FLOOR);
                            cfg.ks
                                .iter()
                                .zip(&epsilons)
                                .map(|(&k, &eps)| {
                                    let ratio = (k_max as f64 / k as f64).sqrt();
                                    let sub = ComplexMatrix::from_fn(k, r, |i, j| full[(i, j)] * ratio);
                                    let pe = entropy_from_projected(projected_singular_values(&sub, &p)?);
                                    let per_value = p
                                        .iter()
                                        .enumerate()
                                        .map(|(i, &pi)| {
                                            let q = pe.singular_values.get(i).copied().unwrap_or(0.0);
                                            100.0 * (q - pi).abs() / pi
                                        })
                                        .collect();
                                    Ok(Cell {
                                        pct: 100.0 * (pe.entropy - s).abs() / s,
                                        bound_ok: (pe.entropy - s).abs() <= theorem3_bound(eps, s),
                                        envelope_ok: within_envelope(&p, &pe.singular_values, eps),
                                        clamped: pe.clamped,
                                        per_value,
                                    })
                                })
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let n = cfg.trials as f64;
    let mut rows = Vec::new();
    for (pi, &profile) in cfg.profiles.iter().enumerate() {
        for (ri, &r) in cfg.ranks.iter().enumerate() {
            for (ki, &k) in cfg.ks.iter().enumerate() {
                let cell = |t: usize| &cells[t][ri][pi][ki];
                let samples: Vec<f64> = (0..cfg.trials).map(|t| cell(t).pct).collect();
                let per_singular_value = (0..r)
                    .map(|i| {
                        let xs: Vec<f64> = (0..cfg.trials).map(|t| cell(t).per_value[i]).collect();
                        RankStat {
                            index: i + 1,
                            mean_pct_error: stats::mean(&xs),
                            ci95: stats::ci_half_width(&xs, 0.95),
                        }
                    })
                    .collect();
                rows.push(EntropyRow {
                    profile,
                    rank: r,
                    k,
                    mean_pct_error: stats::mean(&samples),
                    ci90: stats::ci_half_width(&samples, 0.90),
                    trials: cfg.trials,
                    epsilon: epsilons[ki],
                    bound_rate: (0..cfg.trials).filter(|&t| cell(t).bound_ok).count() as f64 / n,
                    envelope_rate: (0..cfg.trials).filter(|&t| cell(t).envelope_ok).count() as f64 / n,
                    clamped: (0..cfg.trials).map(|t| cell(t).clamped).sum(),
                    per_singular_value,
                    samples,
                });
            }
        }
    }
    Ok(EntropyReport {
        dim: cfg.dim,
        kind: cfg.kind,
        seed: cfg.seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_rank_two() {
        let p = Profile::Linear.values(2).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let d = generate_density(&LowRankDensitySpec::new(8, 2, Profile::Linear, 1)).unwrap();
        let want = 3f64.ln() - 2.0 / 3.0 * 2f64.ln();
        assert!((true_entropy(&d) - want).abs() < 1e-12);
        assert!((want - 0.6365).abs() < 1e-4);
    }

    #[test]
    fn entropy_extremes() {
        let d = generate_density(&LowRankDensitySpec::new(8, 1, Profile::Linear, 1)).unwrap();
        assert_eq!(true_entropy(&d), 0.0);
        assert!((entropy(&[0.25; 4], TRUE_FLOOR) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn exponential_profile() {
        let p = Profile::Exponential { decay: 1.0 }.values(3).unwrap();
        let z = 1.0 + (-1f64).exp() + (-2f64).exp();
        assert!((p[1] - (-1f64).exp() / z).abs() < 1e-15);
        assert!(Profile::Exponential { decay: 0.0 }.values(3).is_err());
    }

    #[test]
    fn density_invariants() {
        for complex in [false, true] {
            let spec = LowRankDensitySpec {
                complex,
                ..LowRankDensitySpec::new(16, 5, Profile::Linear, 3)
            };
            let d = generate_density(&spec).unwrap();
            let rho = d.to_dense();
            let trace: Complex64 = (0..16).map(|i| rho[(i, i)]).sum();
            assert!((trace - Complex64::new(1.0, 0.0)).norm() < 1e-10);
            assert!(rho.max_abs_diff(&rho.adjoint()) < 1e-10);
            let s = svd(&rho).unwrap().singular_values;
            for (a, b) in s.iter().zip(d.singular_values()) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!(s[5..].iter().all(|&x| x < 1e-12));
        }
    }

    #[test]
    fn full_unitary_projection_is_exact() {
        let d = generate_density(&LowRankDensitySpec::new(16, 4, Profile::Linear, 9)).unwrap();
        let pe = projected_entropy(&d, ProjectorKind::Qrp, 16, 2, 10).unwrap();
        for (a, b) in pe.singular_values.iter().zip(d.singular_values()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((pe.entropy - true_entropy(&d)).abs() < 1e-9);
    }

    #[test]
    fn factored_path_matches_dense() {
        let d = generate_density(&LowRankDensitySpec {
            complex: true,
            ..LowRankDensitySpec::new(16, 3, Profile::Linear, 5)
        })
        .unwrap();
        for p in [
            random_projector(ProjectorKind::Qrp, 16, 8, 6, 1).unwrap(),
            random_projector(ProjectorKind::Srht, 16, 8, 0, 1).unwrap(),
        ] {
            let fast = projected_entropy_with(&d, &p).unwrap();
            let m = d.to_dense().matmul(&p.to_dense().unwrap().transpose()).unwrap();
            let dense = svd(&m).unwrap().singular_values;
            for (a, b) in fast.singular_values.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(dense[3..].iter().all(|&x| x < 1e-12));
        }
    }

    #[test]
    fn bound_arithmetic() {
        assert!((theorem3_bound(1.0 / 6.0, 1.0) - 1.0607).abs() < 1e-4);
        assert_eq!(theorem3_bound(0.1, 0.0), 4.5f64.sqrt() * 0.1);
    }

    #[test]
    fn clamp_is_counted() {
        let pe = entropy_from_projected(vec![1.2, 0.3, 1e-13]);
        assert_eq!(pe.clamped, 1);
        assert!((pe.entropy - (-0.3 * 0.3f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn pca_is_rejected() {
        let d = generate_density(&LowRankDensitySpec::new(8, 2, Profile::Linear, 1)).unwrap();
        assert!(projected_entropy(&d, ProjectorKind::Pca, 4, 0, 0).is_err());
    }

    #[test]
    fn run_entropy_shape_and_validation() {
        let exp = Profile::Exponential { decay: 1.0 };
        let mut cfg = EntropyConfig::new(32, vec![2, 4], vec![8, 16], vec![Profile::Linear, exp], ProjectorKind::Srht, 20, 7);
        cfg.calibration_samples = 200;
        let r = run_entropy(&cfg).unwrap();
        assert_eq!(r.rows.len(), 8);
        assert_eq!(r.row(exp, 4, 16).unwrap().per_singular_value.len(), 4);
        assert!(r.rows.iter().all(|row| (0.0..=1.0).contains(&row.bound_rate)));
        assert_eq!(r, run_entropy(&cfg).unwrap());
        let csv = r.to_csv(true);
        assert!(csv.lines().nth(1).unwrap().starts_with("linear,2,32,8,srht,"));
        assert!(r.singular_value_csv(Profile::Linear, 2, 8, true).unwrap().starts_with("rank_index,mean_pct_error,ci95\n1,"));
        cfg.ranks = vec![1];
        cfg.ks = vec![64];
        let msg = run_entropy(&cfg).unwrap_err().to_string();
        assert!(msg.contains("rank 1") && msg.contains("k = 64"));
    }
}
