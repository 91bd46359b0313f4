//! Run configuration: TOML file (or a previous `manifest.json`) plus flag
//! overrides. Flags win.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use qrp_core::entropy_bench::Profile;
use qrp_core::ProjectorKind;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Jl,
    Entropy,
    Vqsvd,
    Diagnostics,
    ExportProjector,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Experiment::Jl => "jl",
            Experiment::Entropy => "entropy",
            Experiment::Vqsvd => "vqsvd",
            Experiment::Diagnostics => "diagnostics",
            Experiment::ExportProjector => "export-projector",
        };
        f.write_str(s)
    }
}

#[derive(Parser, Debug, Default)]
#[command(name = "qrp", version, about = "Random projection experiments with simulated quantum circuits")]
pub struct Args {
    #[arg(long, value_enum)]
    pub experiment: Option<Experiment>,
    /// TOML config, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// MNIST IDX (optionally gzipped), CIFAR-100 .bin, or a .qrpd intermediate.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Comma-separated: qrp, srht (or crp), pca.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Mnist,
    Cifar100,
    Intermediate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Inferred from the file name when absent.
    #[serde(default)]
    pub format: Option<DatasetFormat>,
    #[serde(default = "default_limit")]
    pub limit: usize,
    /// `first`, or `random` (seeded from the master seed).
    #[serde(default = "default_selection")]
    pub selection: String,
}

fn default_limit() -> usize {
    1000
}

fn default_selection() -> String {
    "first".into()
}

impl DatasetConfig {
    pub fn resolved_format(&self) -> DatasetFormat {
        self.format.unwrap_or_else(|| {
            let name = self.path.to_string_lossy().to_lowercase();
            if name.ends_with(".qrpd") {
                DatasetFormat::Intermediate
            } else if name.ends_with(".bin") || name.contains("cifar") {
                DatasetFormat::Cifar100
            } else {
                DatasetFormat::Mnist
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub count: usize,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JlSection {
    /// `fresh` (new projector per trial) or `fixed`.
    pub mode: String,
    pub reconstruction: bool,
    pub dump_samples: bool,
}

impl Default for JlSection {
    fn default() -> Self {
        JlSection {
            mode: "fresh".into(),
            reconstruction: true,
            dump_samples: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropySection {
    pub dim: usize,
    pub ranks: Vec<usize>,
    /// `linear` and/or `exponential`.
    pub profiles: Vec<String>,
    pub decay: f64,
    pub complex: bool,
    pub delta: f64,
    pub epsilon: Option<f64>,
    pub calibration_samples: usize,
}

impl Default for EntropySection {
    fn default() -> Self {
        EntropySection {
            dim: 1024,
            ranks: vec![10, 50, 100, 400],
            profiles: vec!["linear".into()],
            decay: 1.0,
            complex: false,
            delta: 0.1,
            epsilon: None,
            calibration_samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqsvdSection {
    pub n_qubits: usize,
    pub rank: usize,
    pub profile: String,
    pub decay: f64,
    pub ansatz_depth: usize,
    pub blocks: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_iterations: usize,
    /// `parameter-shift` or `central-difference`.
    pub scheme: String,
    pub step: f64,
    pub identity_init: bool,
}

impl Default for VqsvdSection {
    fn default() -> Self {
        VqsvdSection {
            n_qubits: 6,
            rank: 5,
            profile: "linear".into(),
            decay: 1.0,
            ansatz_depth: 12,
            blocks: 2,
            learning_rate: 0.05,
            momentum: 0.9,
            max_iterations: 20_000,
            scheme: "parameter-shift".into(),
            step: 1e-5,
            identity_init: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub n_qubits: usize,
    pub depths: Vec<usize>,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        DiagnosticsSection {
            n_qubits: 5,
            depths: vec![2, 50, 150],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportSection {
    /// Ambient dimension for random kinds; PCA takes it from the dataset.
    pub dim: usize,
}

impl Default for ExportSection {
    fn default() -> Self {
        ExportSection { dim: 1024 }
    }
}

/// Everything a run needs. Serialized verbatim into the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub trials: Option<usize>,
    pub depth: usize,
    pub kinds: Vec<String>,
    pub ks: Vec<usize>,
    pub threads: Option<usize>,
    pub out: PathBuf,
    pub dataset: Option<DatasetConfig>,
    pub synthetic: Option<SyntheticConfig>,
    pub jl: JlSection,
    pub entropy: EntropySection,
    pub vqsvd: VqsvdSection,
    pub diagnostics: DiagnosticsSection,
    pub export: ExportSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            seed: 1,
            trials: None,
            depth: qrp_core::rqc::EXACT_DESIGN_DEPTH,
            kinds: Vec::new(),
            ks: Vec::new(),
            threads: None,
            out: PathBuf::from("results"),
            dataset: None,
            synthetic: None,
            jl: JlSection::default(),
            entropy: EntropySection::default(),
            vqsvd: VqsvdSection::default(),
            diagnostics: DiagnosticsSection::default(),
            export: ExportSection::default(),
        }
    }
}

/// Problems found while assembling or validating a configuration.
#[derive(Debug)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.problems.join("; "))
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn one(msg: impl Into<String>) -> Self {
        ConfigError { problems: vec![msg.into()] }
    }
}

fn read_config_file(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::one(format!("cannot read config {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        #[derive(Deserialize)]
        struct Wrapped {
            config: RunConfig,
        }
        let w: Wrapped = serde_json::from_str(&text)
            .map_err(|e| ConfigError::one(format!("{}: not a run manifest: {e}", path.display())))?;
        return Ok(w.config);
    }
    toml::from_str(&text).map_err(|e| ConfigError::one(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// File config (if any) with flags applied on top.
    pub fn from_args(args: &Args) -> Result<Self, ConfigError> {
        let mut cfg = match &args.config {
            Some(p) => read_config_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(e) = args.experiment {
            cfg.experiment = Some(e);
        }
        if let Some(p) = &args.dataset {
            match &mut cfg.dataset {
                Some(d) => {
                    d.path = p.clone();
                    d.format = None;
                }
                None => {
                    cfg.dataset = Some(DatasetConfig {
                        path: p.clone(),
                        format: None,
                        limit: default_limit(),
                        selection: default_selection(),
                    })
                }
            }
        }
        if let Some(k) = &args.kinds {
            cfg.kinds = k.clone();
        }
        if let Some(k) = &args.ks {
            cfg.ks = k.clone();
        }
        if let Some(d) = args.depth {
            cfg.depth = d;
            cfg.diagnostics.depths = vec![d];
        }
        if let Some(t) = args.trials {
            cfg.trials = Some(t);
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(t) = args.threads {
            cfg.threads = Some(t);
        }
        if let Some(o) = &args.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }

    pub fn experiment(&self) -> Option<Experiment> {
        self.experiment
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(match self.experiment {
            Some(Experiment::Jl) => 10_000,
            Some(Experiment::Entropy) => 100,
            Some(Experiment::Diagnostics) => 2000,
            _ => 1,
        })
    }

    pub fn kinds(&self) -> Result<Vec<ProjectorKind>, Vec<String>> {
        let names: Vec<String> = if self.kinds.is_empty() {
            match self.experiment {
                Some(Experiment::Jl) => vec!["qrp".into(), "srht".into(), "pca".into()],
                _ => vec!["qrp".into()],
            }
        } else {
            self.kinds.clone()
        };
        let mut bad = Vec::new();
        let mut kinds = Vec::new();
        for n in names {
            match n.parse::<ProjectorKind>() {
                Ok(k) if !kinds.contains(&k) => kinds.push(k),
                Ok(_) => bad.push(format!("kinds: `{n}` listed twice")),
                Err(_) => bad.push(format!("kinds: unknown projector `{n}` (expected qrp, srht, crp or pca)")),
            }
        }
        if bad.is_empty() {
            Ok(kinds)
        } else {
            Err(bad)
        }
    }

    pub fn profiles(&self) -> Result<Vec<Profile>, Vec<String>> {
        let mut out = Vec::new();
        let mut bad = Vec::new();
        for p in &self.entropy.profiles {
            match parse_profile(p, self.entropy.decay) {
                Some(x) => out.push(x),
                None => bad.push(format!("entropy.profiles: unknown profile `{p}`")),
            }
        }
        if bad.is_empty() {
            Ok(out)
        } else {
            Err(bad)
        }
    }

    /// Every violated field, before any compute or I/O.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut p = Vec::new();
        let Some(experiment) = self.experiment else {
            return Err(ConfigError::one("experiment: required (jl, entropy, vqsvd, diagnostics, export-projector)"));
        };
        if self.threads == Some(0) {
            p.push("threads: must be at least 1".into());
        }
        if self.ks.contains(&0) {
            p.push("ks: every k must be at least 1".into());
        }
        let kinds = self.kinds().unwrap_or_else(|e| {
            p.extend(e);
            Vec::new()
        });
        let trials = self.trials();
        let needs_depth = kinds.contains(&ProjectorKind::Qrp) || matches!(experiment, Experiment::Vqsvd);
        if needs_depth && self.depth == 0 {
            p.push("depth: must be at least 1".into());
        }
        match experiment {
            Experiment::Jl => {
                if trials < 2 {
                    p.push(format!("trials: jl needs at least 2, got {trials}"));
                }
                if self.dataset.is_none() && self.synthetic.is_none() {
                    p.push("dataset: jl needs --dataset or a [synthetic] recipe".into());
                }
                if self.dataset.is_some() && self.synthetic.is_some() {
                    p.push("dataset: give either a dataset file or a [synthetic] recipe, not both".into());
                }
                if let Some(d) = &self.dataset {
                    if d.limit == 0 {
                        p.push("dataset.limit: must be at least 1".into());
                    }
                    if d.selection != "first" && d.selection != "random" {
                        p.push(format!("dataset.selection: `{}` is not first or random", d.selection));
                    }
                }
                if let Some(s) = &self.synthetic {
                    if !s.dim.is_power_of_two() || s.dim < 4 {
                        p.push(format!("synthetic.dim: {} must be a power of two ≥ 4", s.dim));
                    }
                    if s.rank == 0 || s.rank > s.dim.min(s.count) {
                        p.push(format!("synthetic.rank: {} must be in 1..=min(dim, count)", s.rank));
                    }
                    if s.count < 2 {
                        p.push("synthetic.count: need at least 2 vectors".into());
                    }
                }
                if self.jl.mode != "fresh" && self.jl.mode != "fixed" {
                    p.push(format!("jl.mode: `{}` is not fresh or fixed", self.jl.mode));
                }
            }
            Experiment::Entropy => {
                let e = &self.entropy;
                if kinds.contains(&ProjectorKind::Pca) {
                    p.push("kinds: entropy estimation needs random projectors (qrp or srht)".into());
                }
                if !e.dim.is_power_of_two() || e.dim < 4 {
                    p.push(format!("entropy.dim: {} must be a power of two ≥ 4", e.dim));
                }
                if e.ranks.is_empty() {
                    p.push("entropy.ranks: at least one rank".into());
                }
                for &r in &e.ranks {
                    if r < 2 || r > e.dim {
                        p.push(format!("entropy.ranks: {r} must be in 2..={}", e.dim));
                    }
                }
                for &k in &self.ks {
                    if k > e.dim {
                        p.push(format!("ks: {k} exceeds entropy.dim {}", e.dim));
                    }
                }
                if let Err(bad) = self.profiles() {
                    p.extend(bad);
                }
                if e.profiles.is_empty() {
                    p.push("entropy.profiles: at least one profile".into());
                }
                if !(e.decay > 0.0 && e.decay.is_finite()) {
                    p.push(format!("entropy.decay: {} must be positive", e.decay));
                }
                if !(e.delta > 0.0 && e.delta <= 0.5) {
                    p.push(format!("entropy.delta: {} must be in (0, 0.5]", e.delta));
                }
                if trials == 0 {
                    p.push("trials: must be at least 1".into());
                }
            }
            Experiment::Vqsvd => {
                let v = &self.vqsvd;
                if !(2..=12).contains(&v.n_qubits) {
                    p.push(format!("vqsvd.n_qubits: {} must be in 2..=12", v.n_qubits));
                }
                let dim = 1usize << v.n_qubits.min(30);
                for &k in &self.ks {
                    if !k.is_power_of_two() || k > dim || k < 4 {
                        p.push(format!("ks: {k} must be a power of two in 4..={dim}"));
                    } else if v.rank > k {
                        p.push(format!("vqsvd.rank: {} exceeds k = {k}", v.rank));
                    }
                }
                if v.rank == 0 || v.rank > dim {
                    p.push(format!("vqsvd.rank: {} must be in 1..={dim}", v.rank));
                }
                if parse_profile(&v.profile, v.decay).is_none() {
                    p.push(format!("vqsvd.profile: unknown profile `{}`", v.profile));
                }
                if v.ansatz_depth == 0 || v.blocks == 0 {
                    p.push("vqsvd.ansatz_depth and vqsvd.blocks: must be positive".into());
                }
                if !(v.learning_rate > 0.0) {
                    p.push(format!("vqsvd.learning_rate: {} must be positive", v.learning_rate));
                }
                if !(0.0..1.0).contains(&v.momentum) {
                    p.push(format!("vqsvd.momentum: {} must be in [0, 1)", v.momentum));
                }
                if v.scheme != "parameter-shift" && v.scheme != "central-difference" {
                    p.push(format!("vqsvd.scheme: `{}` is not parameter-shift or central-difference", v.scheme));
                }
                if !(v.step > 0.0) {
                    p.push(format!("vqsvd.step: {} must be positive", v.step));
                }
            }
            Experiment::Diagnostics => {
                let d = &self.diagnostics;
                if !(2..=14).contains(&d.n_qubits) {
                    p.push(format!("diagnostics.n_qubits: {} must be in 2..=14", d.n_qubits));
                }
                if d.depths.is_empty() || d.depths.contains(&0) {
                    p.push("diagnostics.depths: need at least one positive depth".into());
                }
                for &k in &self.ks {
                    if k > 1 << d.n_qubits.min(30) {
                        p.push(format!("ks: {k} exceeds 2^{}", d.n_qubits));
                    }
                }
                if trials < 100 {
                    p.push(format!("trials: diagnostics needs at least 100 samples, got {trials}"));
                }
            }
            Experiment::ExportProjector => {
                if kinds.len() > 1 {
                    p.push("kinds: export-projector takes a single kind".into());
                }
                if self.ks.len() > 1 {
                    p.push("ks: export-projector takes a single k".into());
                }
                if kinds.contains(&ProjectorKind::Pca) {
                    if self.dataset.is_none() && self.synthetic.is_none() {
                        p.push("dataset: a PCA export needs --dataset or a [synthetic] recipe".into());
                    }
                } else {
                    let dim = self.export.dim;
                    if !dim.is_power_of_two() || dim < 4 || dim > 1 << 14 {
                        p.push(format!("export.dim: {dim} must be a power of two in 4..=16384"));
                    }
                    if let Some(&k) = self.ks.first() {
                        if k > dim {
                            p.push(format!("ks: {k} exceeds export.dim {dim}"));
                        }
                    }
                }
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { problems: p })
        }
    }
}

pub fn parse_profile(name: &str, decay: f64) -> Option<Profile> {
    match name.to_ascii_lowercase().as_str() {
        "linear" => Some(Profile::Linear),
        "exponential" | "exp" => Some(Profile::Exponential { decay }),
        _ => None,
    }
}
