use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::BufReader;
use std::time::Instant;

use anyhow::Context;
use qrp_core::datasets::{load_cifar100_with, load_mnist_with, read_intermediate, synthesize_dataset, Selection};
use qrp_core::entropy_bench::{run_entropy, EntropyConfig};
use qrp_core::jl_bench::{run_distortion, run_reconstruction, DistortionConfig, DistortionReport, ProjectorMode};
use qrp_core::projectors::{build_pca, build_qrp, build_srht};
use qrp_core::rng::derive_seed;
use qrp_core::rqc::{
    estimate_fourth_moment, haar_fourth_moment, haar_projected_norm_variance, haar_projected_norm_variance_exact,
    projected_norms, variance_estimate, write_circuit_text, CircuitHeader, MomentEstimate,
};
use qrp_core::stats;
use qrp_core::vqsvd::{pipeline_demo, GradientScheme, PipelineSpec, VqsvdConfig};
use qrp_core::{AnsatzSpec, Ensemble, ImageDataset, ProjectorKind};
use serde_json::{json, Value};

use crate::config::{parse_profile, ConfigError, DatasetFormat, Experiment, RunConfig};

/// One output file, held in memory until the whole run has succeeded.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: impl Into<String>, body: String) -> Self {
        Artifact {
            name: name.into(),
            bytes: body.into_bytes(),
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Failed(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Failed(_) => 1,
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> Value {
        match self {
            RunError::Config(c) => json!({ "status": "error", "kind": "config", "problems": c.problems }),
            RunError::Failed(e) => json!({
                "status": "error",
                "kind": "runtime",
                "message": e.to_string(),
                "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            }),
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(c) => c.fmt(f),
            RunError::Failed(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Failed(e)
    }
}

impl From<qrp_core::Error> for RunError {
    fn from(e: qrp_core::Error) -> Self {
        RunError::Failed(e.into())
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Vec<String>,
    pub manifest: Value,
}

/// Fixed seed streams, so that adding a kind never changes another's draws.
fn stream_seed(cfg: &RunConfig, label: &str) -> u64 {
    let index = match label {
        "dataset" => 0,
        "qrp" => 1,
        "srht" => 2,
        "pca" => 3,
        "vqsvd-data" => 10,
        "vqsvd-train" => 11,
        "haar" => 20,
        _ => 100,
    };
    derive_seed(cfg.seed, index)
}

struct Plan {
    artifacts: Vec<Artifact>,
    seeds: BTreeMap<String, u64>,
    notes: Value,
}

impl Plan {
    fn new() -> Self {
        Plan {
            artifacts: Vec::new(),
            seeds: BTreeMap::new(),
            notes: Value::Null,
        }
    }

    fn seed(&mut self, cfg: &RunConfig, label: &str) -> u64 {
        let s = stream_seed(cfg, label);
        self.seeds.insert(label.to_string(), s);
        s
    }
}

/// Validates, computes every artifact, then writes them and `manifest.json`.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    cfg.validate()?;
    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building worker pool")?;
    let experiment = cfg.experiment().expect("validated");
    let start = Instant::now();
    let plan = pool.install(|| match experiment {
        Experiment::Jl => jl(cfg),
        Experiment::Entropy => entropy(cfg),
        Experiment::Vqsvd => vqsvd(cfg),
        Experiment::Diagnostics => diagnostics(cfg),
        Experiment::ExportProjector => export(cfg),
    })?;
    let wall = start.elapsed().as_secs_f64();

    let names: Vec<String> = plan.artifacts.iter().map(|a| a.name.clone()).collect();
    let manifest = json!({
        "tool": "qrp",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": qrp_core::VERSION,
        "experiment": experiment.to_string(),
        "config": cfg,
        "seeds": plan.seeds,
        "threads": threads,
        "wall_time_seconds": wall,
        "artifacts": names,
        "notes": plan.notes,
    });

    fs::create_dir_all(&cfg.out).with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    for a in &plan.artifacts {
        let path = cfg.out.join(&a.name);
        fs::write(&path, &a.bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    let path = cfg.out.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).context("serializing manifest")?;
    fs::write(&path, body + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(Outcome {
        artifacts: names,
        manifest,
    })
}

fn load_dataset(cfg: &RunConfig, plan: &mut Plan) -> Result<ImageDataset, RunError> {
    let seed = plan.seed(cfg, "dataset");
    if let Some(d) = &cfg.dataset {
        if !d.path.is_file() {
            return Err(anyhow::anyhow!("dataset file not found: {}", d.path.display()).into());
        }
        let selection = if d.selection == "random" {
            Selection::Random { seed }
        } else {
            Selection::First
        };
        let loaded = match d.resolved_format() {
            DatasetFormat::Mnist => load_mnist_with(&d.path, d.limit, selection),
            DatasetFormat::Cifar100 => load_cifar100_with(&d.path, d.limit, selection),
            DatasetFormat::Intermediate => File::open(&d.path)
                .map_err(qrp_core::Error::from)
                .and_then(|f| read_intermediate(BufReader::new(f))),
        };
        return Ok(loaded.with_context(|| format!("loading dataset {}", d.path.display()))?);
    }
    let s = cfg.synthetic.as_ref().expect("validated");
    Ok(synthesize_dataset(s.dim, s.count, s.rank, seed)?)
}

fn check_ks(ks: &[usize], kinds: &[ProjectorKind], data: &ImageDataset) -> Result<(), ConfigError> {
    let mut problems = Vec::new();
    for &k in ks {
        if k > data.dim() {
            problems.push(format!("ks: {k} exceeds the dataset dimension {}", data.dim()));
        } else if kinds.contains(&ProjectorKind::Pca) && k > data.len() {
            problems.push(format!("ks: PCA k = {k} exceeds the {} dataset vectors", data.len()));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(ConfigError { problems })
    }
}

fn jl(cfg: &RunConfig) -> Result<Plan, RunError> {
    let mut plan = Plan::new();
    let kinds = cfg.kinds().expect("validated");
    let data = load_dataset(cfg, &mut plan)?;
    let ks = if cfg.ks.is_empty() { vec![128, 256, 512] } else { cfg.ks.clone() };
    check_ks(&ks, &kinds, &data)?;
    let mode = if cfg.jl.mode == "fixed" { ProjectorMode::Fixed } else { ProjectorMode::FreshPerTrial };

    let (mut distortion, mut samples, mut recon) = (String::new(), String::new(), String::new());
    let mut degenerate = BTreeMap::new();
    for (i, &kind) in kinds.iter().enumerate() {
        let seed = plan.seed(cfg, kind.as_str());
        let dc = DistortionConfig {
            kind,
            ks: ks.clone(),
            trials: cfg.trials(),
            seed,
            mode,
            depth: cfg.depth,
        };
        let report = run_distortion(data.vectors(), &dc)?;
        degenerate.insert(kind.as_str(), report.degenerate_pairs);
        distortion.push_str(&report.to_csv(i == 0));
        if cfg.jl.dump_samples {
            samples.push_str(&report.samples_csv(i == 0));
        }
        if cfg.jl.reconstruction {
            let r = run_reconstruction(data.vectors(), kind, &ks, cfg.depth, seed)?;
            recon.push_str(&reconstruction_csv(&r, i == 0));
        }
    }
    plan.artifacts.push(Artifact::text("distortion.csv", distortion));
    if cfg.jl.dump_samples {
        plan.artifacts.push(Artifact::text("distortion_samples.csv", samples));
    }
    if cfg.jl.reconstruction {
        plan.artifacts.push(Artifact::text("reconstruction.csv", recon));
    }
    plan.notes = json!({
        "dataset": { "name": data.name(), "dim": data.dim(), "count": data.len(), "source_dims": data.source_dims() },
        "ks": ks,
        "degenerate_pairs_redrawn": degenerate,
    });
    Ok(plan)
}

fn reconstruction_csv(r: &DistortionReport, header: bool) -> String {
    let mut out = String::new();
    if header {
        out.push_str("kind,k,count,mean_error,ci95,seed\n");
    }
    for row in &r.rows {
        out.push_str(&format!("{},{},{},{},{},{}\n", r.kind, row.k, row.count, row.mean, row.ci95, r.seed));
    }
    out
}

fn entropy(cfg: &RunConfig) -> Result<Plan, RunError> {
    let mut plan = Plan::new();
    let e = &cfg.entropy;
    let profiles = cfg.profiles().expect("validated");
    let ks = if cfg.ks.is_empty() { vec![e.dim / 2] } else { cfg.ks.clone() };
    let mut table = String::new();
    let mut eps = BTreeMap::new();
    for (i, kind) in cfg.kinds().expect("validated").into_iter().enumerate() {
        let seed = plan.seed(cfg, kind.as_str());
        let mut ec = EntropyConfig::new(e.dim, e.ranks.clone(), ks.clone(), profiles.clone(), kind, cfg.trials(), seed);
        ec.depth = cfg.depth;
        ec.complex = e.complex;
        ec.delta = e.delta;
        ec.epsilon = e.epsilon;
        ec.calibration_samples = e.calibration_samples;
        let report = run_entropy(&ec)?;
        table.push_str(&report.to_csv(i == 0));
        for row in &report.rows {
            eps.insert(format!("{}-k{}", kind.as_str(), row.k), row.epsilon);
            let body = report
                .singular_value_csv(row.profile, row.rank, row.k, true)
                .expect("row exists");
            plan.artifacts.push(Artifact::text(
                format!("sv_{}_{}_r{}_k{}.csv", kind.as_str(), row.profile, row.rank, row.k),
                body,
            ));
        }
    }
    plan.artifacts.insert(0, Artifact::text("entropy.csv", table));
    plan.notes = json!({ "ks": ks, "epsilon": eps });
    Ok(plan)
}

fn vqsvd(cfg: &RunConfig) -> Result<Plan, RunError> {
    let mut plan = Plan::new();
    let v = &cfg.vqsvd;
    let dim = 1usize << v.n_qubits;
    let ks = if cfg.ks.is_empty() { vec![dim / 2] } else { cfg.ks.clone() };
    let data_seed = plan.seed(cfg, "vqsvd-data");
    let train_seed = plan.seed(cfg, "vqsvd-train");
    let mut train = VqsvdConfig::new(v.rank, train_seed);
    train.depth = v.ansatz_depth;
    train.blocks = v.blocks;
    train.learning_rate = v.learning_rate;
    train.momentum = v.momentum;
    train.max_iterations = v.max_iterations;
    train.identity_init = v.identity_init;
    train.scheme = if v.scheme == "central-difference" {
        GradientScheme::CentralDifference { step: v.step }
    } else {
        GradientScheme::ParameterShift
    };
    let mut notes = Vec::new();
    for &k in &ks {
        let measured: Vec<usize> = (0..(dim / k).trailing_zeros() as usize).collect();
        let spec = PipelineSpec {
            n_qubits: v.n_qubits,
            rank: v.rank,
            profile: parse_profile(&v.profile, v.decay).expect("validated"),
            measured: measured.clone(),
            circuit_depth: cfg.depth,
            seed: data_seed,
        };
        let result = pipeline_demo(&spec, &train)?;
        plan.artifacts.push(Artifact::text(format!("vqsvd_trace_k{k}.csv"), result.trace.loss_csv()));
        plan.artifacts.push(Artifact::text(format!("vqsvd_summary_k{k}.csv"), result.summary_csv()));
        notes.push(json!({
            "k": k,
            "measured_qubits": measured,
            "convention": result.convention,
            "iterations": result.trace.iterations,
            "converged": result.trace.converged,
            "projected_singular_values": result.rows.iter().map(|r| r.projected_sigma).collect::<Vec<_>>(),
        }));
    }
    plan.notes = Value::Array(notes);
    Ok(plan)
}

fn moment_row(out: &mut String, label: &str, depth: &str, k: usize, samples: usize, mean: (f64, f64), var: MomentEstimate, fourth: MomentEstimate) {
    out.push_str(&format!(
        "{label},{depth},{k},{samples},{},{},{},{},{},{}\n",
        mean.0, mean.1, var.value, var.standard_error, fourth.value, fourth.standard_error
    ));
}

fn diagnostics(cfg: &RunConfig) -> Result<Plan, RunError> {
    let mut plan = Plan::new();
    let d = &cfg.diagnostics;
    let dim = 1usize << d.n_qubits;
    let ks = if cfg.ks.is_empty() { vec![dim / 2] } else { cfg.ks.clone() };
    let samples = cfg.trials();
    let mut probe = vec![0.0; dim];
    probe[0] = 1.0;
    let haar_seed = plan.seed(cfg, "haar");
    let circuit_seed = plan.seed(cfg, "qrp");

    let mut out = String::from("ensemble,depth,k,samples,mean,mean_se,variance,variance_se,fourth_moment,fourth_moment_se\n");
    let exact = |v: f64| MomentEstimate {
        value: v,
        standard_error: 0.0,
        sample_count: 0,
    };
    for &k in &ks {
        let mut ensembles = vec![("haar".to_string(), String::new(), Ensemble::Haar { dim, seed: haar_seed })];
        for &depth in &d.depths {
            let spec = AnsatzSpec::new(d.n_qubits, depth, derive_seed(circuit_seed, depth as u64));
            ensembles.push(("circuit".into(), depth.to_string(), Ensemble::Circuit(spec)));
        }
        for (label, depth, ens) in &ensembles {
            let xs = projected_norms(ens, k, &probe, samples)?;
            let fourth = estimate_fourth_moment(ens, &probe, samples)?;
            moment_row(&mut out, label, depth, k, samples, (stats::mean(&xs), stats::std_error(&xs)), variance_estimate(&xs), fourth);
        }
        let exact_row = |label: &str, var: f64, fourth: f64, out: &mut String| {
            moment_row(out, label, "", k, 0, (1.0, 0.0), exact(var), exact(fourth));
        };
        exact_row("haar-exact", haar_projected_norm_variance_exact(dim, k), haar_fourth_moment(dim), &mut out);
        exact_row("haar-large-n", haar_projected_norm_variance(dim, k), 2.0 / dim as f64, &mut out);
    }
    plan.artifacts.push(Artifact::text("diagnostics.csv", out));
    plan.notes = json!({ "n_qubits": d.n_qubits, "ks": ks, "probe": "basis state |0…0⟩" });
    Ok(plan)
}

fn export(cfg: &RunConfig) -> Result<Plan, RunError> {
    let mut plan = Plan::new();
    let kind = cfg.kinds().expect("validated")[0];
    let seed = plan.seed(cfg, kind.as_str());
    let (projector, extra) = match kind {
        ProjectorKind::Pca => {
            let data = load_dataset(cfg, &mut plan)?;
            let k = cfg.ks.first().copied().unwrap_or(data.dim().min(data.len()) / 2);
            check_ks(&[k], &[kind], &data)?;
            (build_pca(data.vectors(), k)?, None)
        }
        ProjectorKind::Srht => {
            let dim = cfg.export.dim;
            (build_srht(dim, cfg.ks.first().copied().unwrap_or(dim / 2), seed)?, None)
        }
        ProjectorKind::Qrp => {
            let dim = cfg.export.dim;
            let spec = AnsatzSpec::new(dim.trailing_zeros() as usize, cfg.depth, seed);
            let p = build_qrp(&spec, cfg.ks.first().copied().unwrap_or(dim / 2))?;
            let (circuit, _) = p.circuit_parts().expect("qrp");
            let text = write_circuit_text(circuit, CircuitHeader::from(&spec));
            (p, Some(Artifact::text("circuit.txt", text)))
        }
    };
    let mut bytes = Vec::new();
    projector.write_binary(&mut bytes)?;
    let name = format!("projector_{}_N{}_k{}.bin", kind.as_str(), projector.dim(), projector.k());
    plan.artifacts.push(Artifact { name, bytes });
    plan.artifacts.extend(extra);
    plan.notes = json!({ "kind": kind.as_str(), "dim": projector.dim(), "k": projector.k() });
    Ok(plan)
}
