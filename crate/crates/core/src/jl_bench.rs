//! Distance-distortion and reconstruction experiments over a dataset of unit
//! vectors.
//!
//! Distortion trials draw a random pair `(x₁, x₂)` and report
//! `100·|‖Π(x₁−x₂)‖ − ‖x₁−x₂‖| / ‖x₁−x₂‖`. Every trial derives its own seed from
//! `(master seed, trial index)`, so reports are identical across thread
//! counts. One projector built at the largest `k` serves every smaller `k`
//! by keeping a prefix of its output.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::projectors::{build_pca, build_qrp, build_srht, Projector, ProjectorKind};
use crate::rng::{derive_seed, stream};
use crate::rqc::{AnsatzSpec, EXACT_DESIGN_DEPTH};
use crate::stats;

/// Pairs closer than this are redrawn.
pub const DEGENERATE_PAIR_DISTANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectorMode {
    /// A new random projector for every trial.
    #[default]
    FreshPerTrial,
    /// One projector for the whole run.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionConfig {
    pub kind: ProjectorKind,
    pub ks: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub mode: ProjectorMode,
    /// Circuit depth for QRP.
    pub depth: usize,
}

impl DistortionConfig {
    pub fn new(kind: ProjectorKind, ks: Vec<usize>, trials: usize, seed: u64) -> Self {
        DistortionConfig {
            kind,
            ks,
            trials,
            seed,
            mode: ProjectorMode::FreshPerTrial,
            depth: EXACT_DESIGN_DEPTH,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Percentage distance distortion of random pairs.
    PercentDistortion,
    /// `‖x − Π†Πx‖` over dataset vectors.
    ReconstructionError,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KRow {
    pub k: usize,
    pub mean: f64,
    /// Normal-approximation half-width.
    pub ci95: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub kind: ProjectorKind,
    pub metric: Metric,
    pub rows: Vec<KRow>,
    pub seed: u64,
    /// Pairs redrawn for being closer than [`DEGENERATE_PAIR_DISTANCE`].
    pub degenerate_pairs: usize,
    /// `samples[i][t]`: the metric of sample `t` at `rows[i].k`.
    pub samples: Vec<Vec<f64>>,
    /// For distortion runs, `ratios[i][t] = ‖Πd‖/‖d‖`; empty otherwise.
    pub ratios: Vec<Vec<f64>>,
}

impl DistortionReport {
    pub fn row(&self, k: usize) -> Option<&KRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// Fraction of trials at `k` with `|‖Πd‖/‖d‖ − 1| > ε`, and its binomial
    /// standard error.
    pub fn failure_fraction(&self, k: usize, eps: f64) -> Option<(f64, f64)> {
        let i = self.rows.iter().position(|r| r.k == k)?;
        let r = self.ratios.get(i)?;
        if r.is_empty() {
            return None;
        }
        let n = r.len() as f64;
        let p = r.iter().filter(|&&x| (x - 1.0).abs() > eps).count() as f64 / n;
        Some((p, (p * (1.0 - p) / n).sqrt()))
    }

    /// `kind,k,trials,mean_pct_error,ci95,seed` rows (header included when
    /// `header` is set). Reconstruction reports use the same columns.
    pub fn to_csv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("kind,k,trials,mean_pct_error,ci95,seed\n");
        }
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", self.kind, r.k, r.count, r.mean, r.ci95, self.seed);
        }
        out
    }

    /// Per-sample audit dump `kind,k,trial,value`.
    pub fn samples_csv(&self, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("kind,k,trial,value\n");
        }
        for (row, xs) in self.rows.iter().zip(&self.samples) {
            for (t, x) in xs.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", self.kind, row.k, t, x);
            }
        }
        out
    }
}

/// The `ε` at which `(N−k)/(4kNε²) = δ`: distortions beyond it occur with
/// probability at most `δ` for an exact 2-design.
pub fn chebyshev_epsilon(dim: usize, k: usize, delta: f64) -> f64 {
    let (n, k) = (dim as f64, k as f64);
    ((n - k) / (4.0 * k * n * delta)).sqrt()
}

fn validate(data: &[Vec<f64>], ks: &[usize]) -> Result<usize> {
    let dim = data.first().map_or(0, Vec::len);
    if data.len() < 2 {
        return Err(Error::invalid("need at least two vectors"));
    }
    if data.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("vectors differ in length"));
    }
    if !dim.is_power_of_two() {
        return Err(Error::invalid(format!("N = {dim} is not a power of two")));
    }
    if ks.is_empty() {
        return Err(Error::invalid("no k values given"));
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > dim) {
        return Err(Error::invalid(format!("k = {k} must be in 1..={dim}")));
    }
    Ok(dim)
}

/// Builds a projector of the given kind at `k`, seeding random kinds with
/// `seed` and building PCA on `data`.
pub fn build_projector(
    kind: ProjectorKind,
    data: &[Vec<f64>],
    k: usize,
    depth: usize,
    seed: u64,
) -> Result<Projector> {
    let dim = data.first().map_or(0, Vec::len);
    match kind {
        ProjectorKind::Srht => build_srht(dim, k, seed),
        ProjectorKind::Qrp => {
            if !dim.is_power_of_two() || dim < 4 {
                return Err(Error::invalid(format!("QRP needs N = 2^n ≥ 4, got {dim}")));
            }
            build_qrp(&AnsatzSpec::new(dim.trailing_zeros() as usize, depth, seed), k)
        }
        ProjectorKind::Pca => build_pca(data, k),
    }
}

fn row(k: usize, xs: &[f64]) -> KRow {
    KRow {
        k,
        mean: stats::mean(xs),
        ci95: stats::ci_half_width(xs, 0.95),
        count: xs.len(),
    }
}

fn transpose(per_trial: Vec<Vec<f64>>, width: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(per_trial.len()); width];
    for t in per_trial {
        for (col, x) in out.iter_mut().zip(t) {
            col.push(x);
        }
    }
    out
}

pub fn run_distortion(data: &[Vec<f64>], cfg: &DistortionConfig) -> Result<DistortionReport> {
    validate(data, &cfg.ks)?;
    if cfg.trials < 2 {
        return Err(Error::invalid(format!("trials = {} must be at least 2", cfg.trials)));
    }
    let k_max = *cfg.ks.iter().max().expect("nonempty ks");
    let shared = if cfg.kind == ProjectorKind::Pca || cfg.mode == ProjectorMode::Fixed {
        Some(build_projector(cfg.kind, data, k_max, cfg.depth, derive_seed(cfg.seed, u64::MAX))?)
    } else {
        None
    };

    let per_trial: Vec<(Vec<f64>, usize)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(cfg.seed, t);
            let mut degenerate = 0;
            let (d, dist) = loop {
                let a = rng.random_range(0..data.len());
                let b = rng.random_range(0..data.len() - 1);
                let b = if b >= a { b + 1 } else { b };
                let d: Vec<f64> = data[a].iter().zip(&data[b]).map(|(x, y)| x - y).collect();
                let dist = norm(&d);
                if dist >= DEGENERATE_PAIR_DISTANCE {
                    break (d, dist);
                }
                degenerate += 1;
            };
            let fresh;
            let p = match &shared {
                Some(p) => p,
                None => {
                    fresh = build_projector(cfg.kind, data, k_max, cfg.depth, derive_seed(cfg.seed, t))?;
                    &fresh
                }
            };
            let y = p.apply_real(&d)?;
            let ratios = cfg
                .ks
                .iter()
                .map(|&k| Ok(norm(&p.truncate_output(&y, k)?) / dist))
                .collect::<Result<Vec<f64>>>()?;
            Ok((ratios, degenerate))
        })
        .collect::<Result<_>>()?;

    let degenerate_pairs = per_trial.iter().map(|(_, d)| d).sum();
    let ratios = transpose(per_trial.into_iter().map(|(r, _)| r).collect(), cfg.ks.len());
    let samples: Vec<Vec<f64>> = ratios
        .iter()
        .map(|r| r.iter().map(|x| 100.0 * (x - 1.0).abs()).collect())
        .collect();
    Ok(DistortionReport {
        kind: cfg.kind,
        metric: Metric::PercentDistortion,
        rows: cfg.ks.iter().zip(&samples).map(|(&k, xs)| row(k, xs)).collect(),
        seed: cfg.seed,
        degenerate_pairs,
        samples,
        ratios,
    })
}

/// Mean `‖x − Π†Πx‖` over every dataset vector, one fixed projector per run
/// (smaller `k` use prefixes of the largest).
pub fn run_reconstruction(
    data: &[Vec<f64>],
    kind: ProjectorKind,
    ks: &[usize],
    depth: usize,
    seed: u64,
) -> Result<DistortionReport> {
    validate(data, ks)?;
    let k_max = *ks.iter().max().expect("nonempty ks");
    let base = build_projector(kind, data, k_max, depth, derive_seed(seed, u64::MAX))?;
    let projectors = ks.iter().map(|&k| base.truncate(k)).collect::<Result<Vec<_>>>()?;
    let per_vector: Vec<Vec<f64>> = data
        .par_iter()
        .map(|x| {
            projectors
                .iter()
                .map(|p| {
                    let back = p.reconstruct(&p.apply_real(x)?)?;
                    Ok(back
                        .iter()
                        .zip(x)
                        .map(|(b, &v)| (b - Complex64::new(v, 0.0)).norm_sqr())
                        .sum::<f64>()
                        .sqrt())
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let samples = transpose(per_vector, ks.len());
    Ok(DistortionReport {
        kind,
        metric: Metric::ReconstructionError,
        rows: ks.iter().zip(&samples).map(|(&k, xs)| row(k, xs)).collect(),
        seed,
        degenerate_pairs: 0,
        samples,
        ratios: Vec::new(),
    })
}
