//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.
//!
//! Numeric arguments select a subset: `cargo test --test acceptance -- 5 12`.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use qrp_core::datasets::{load_mnist, ImageDataset};
use qrp_core::entropy_bench::{run_entropy, EntropyConfig, LowRankDensitySpec, Profile, Theorem3Config, theorem3_check};
use qrp_core::jl_bench::{run_distortion, run_reconstruction, DistortionConfig};
use qrp_core::linalg::{fwht, haar_isometry, norm, random_unit_vector, svd};
use qrp_core::projectors::{build_qrp, build_srht, project_by_measurement};
use qrp_core::rng::{derive_seed, rng_from_seed};
use qrp_core::rqc::{
    build_rqc, estimate_fourth_moment, estimate_projected_norm_mean, estimate_projected_norm_variance, haar_fourth_moment,
    haar_projected_norm_variance, haar_projected_norm_variance_exact, jl_failure_bound, jl_failure_fraction, projected_norms, EXACT_DESIGN_DEPTH,
};
use qrp_core::simulator::circuit_unitary;
use qrp_core::vqsvd::{build_hea, pipeline_demo, PipelineSpec, Problem, VqsvdConfig, GradientScheme};
use qrp_core::{AnsatzSpec, ComplexMatrix, Ensemble, ProjectorKind, Statevector};

type Outcome = qrp_core::Result<(bool, String)>;

const SEED: u64 = 20240917;

fn basis(dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = 1.0;
    v
}

fn mnist() -> ImageDataset {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/mnist-1k-images-idx3-ubyte.gz");
    load_mnist(path, 1000).expect("MNIST fixture")
}

fn haar_variance() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (dim, k) in [(16, 8), (32, 16)] {
        let v = random_unit_vector(dim, &mut rng_from_seed(SEED));
        let est = estimate_projected_norm_variance(&Ensemble::Haar { dim, seed: SEED + dim as u64 }, k, &v, 50_000)?;
        let want = haar_projected_norm_variance(dim, k);
        let exact = haar_projected_norm_variance_exact(dim, k);
        let rel = (est.value - want).abs() / want;
        ok &= rel <= 0.05;
        detail.push(format!(
            "N={dim} k={k}: {:.5} vs {want:.5} ({:.2}%; exact (N−k)/(k(N+1)) = {exact:.5}, {:.2}%)",
            est.value,
            100.0 * rel,
            100.0 * (est.value - exact).abs() / exact
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn fourth_moment() -> Outcome {
    let haar = estimate_fourth_moment(&Ensemble::Haar { dim: 32, seed: SEED }, &basis(32), 50_000)?;
    let want = haar_fourth_moment(32);
    let rel_haar = (haar.value - want).abs() / want;
    let deep = Ensemble::Circuit(AnsatzSpec::new(10, EXACT_DESIGN_DEPTH, SEED));
    let circ = estimate_fourth_moment(&deep, &basis(1024), 1000)?;
    let rel_circ = (circ.value - 2.0 / 1024.0).abs() / (2.0 / 1024.0);
    Ok((
        rel_haar <= 0.03 && rel_circ <= 0.10,
        format!(
            "Haar N=32: {:.5} vs {want:.5} ({:.2}%); circuits N=1024 D=150: {:.3e} vs 2/N ({:.2}%)",
            haar.value,
            100.0 * rel_haar,
            circ.value,
            100.0 * rel_circ
        ),
    ))
}

fn circuit_convergence() -> Outcome {
    let (n, k, samples) = (5, 16, 20_000);
    let v = basis(32);
    let haar = estimate_projected_norm_variance(&Ensemble::Haar { dim: 32, seed: SEED }, k, &v, samples)?;
    let deep = Ensemble::Circuit(AnsatzSpec::new(n, EXACT_DESIGN_DEPTH, SEED + 1));
    let mean = estimate_projected_norm_mean(&deep, k, &v, samples)?;
    let var = estimate_projected_norm_variance(&deep, k, &v, samples)?;
    let shallow = estimate_projected_norm_variance(&Ensemble::Circuit(AnsatzSpec::new(n, 2, SEED + 2)), k, &v, samples)?;
    let (z_deep, z_shallow) = (var.z_distance(&haar), shallow.z_distance(&haar));
    Ok((
        (mean.value - 1.0).abs() <= 0.02 && z_deep <= 3.0 && z_shallow > 3.0,
        format!(
            "D=150 mean {:.4}, variance {:.4} vs Haar {:.4} ({z_deep:.2}σ); D=2 variance {:.4} ({z_shallow:.1}σ)",
            mean.value, var.value, haar.value, shallow.value
        ),
    ))
}

fn chebyshev_coverage() -> Outcome {
    let (dim, k, eps, trials) = (32, 16, 0.5, 10_000);
    let v = random_unit_vector(dim, &mut rng_from_seed(SEED));
    let norms = projected_norms(&Ensemble::Circuit(AnsatzSpec::new(5, EXACT_DESIGN_DEPTH, SEED)), k, &v, trials)?;
    let (p, se) = jl_failure_fraction(&norms, eps);
    let bound = jl_failure_bound(dim, k, eps, 0.0);
    Ok((p <= bound + 3.0 * se, format!("failure fraction {p:.4} (se {se:.4}) vs bound {bound:.4}")))
}

fn jl_images(data: &ImageDataset) -> Outcome {
    let ks = vec![128, 256, 512, 640];
    let trials = 10_000;
    let qrp = run_distortion(data.vectors(), &DistortionConfig::new(ProjectorKind::Qrp, ks.clone(), trials, SEED))?;
    let srht = run_distortion(data.vectors(), &DistortionConfig::new(ProjectorKind::Srht, ks.clone(), trials, SEED + 1))?;
    let pca = run_distortion(data.vectors(), &DistortionConfig::new(ProjectorKind::Pca, vec![640], trials, SEED + 2))?;
    let means = |r: &qrp_core::jl_bench::DistortionReport| r.rows.iter().map(|x| x.mean).collect::<Vec<_>>();
    let (q, s) = (means(&qrp), means(&srht));
    let monotone = q[..3].windows(2).all(|w| w[1] <= w[0]) && s[..3].windows(2).all(|w| w[1] <= w[0]);
    let ratio_ok = (0..3).all(|i| (0.5..=1.5).contains(&(q[i] / s[i])));
    let pca_mean = pca.rows[0].mean;
    let positive = q[3] > 0.0 && s[3] > 0.0;
    Ok((
        monotone && ratio_ok && pca_mean < 1e-6 && positive,
        format!(
            "QRP % {:.3?}, SRHT % {:.3?} at k={ks:?}; PCA at k=640 (rank {}) {pca_mean:.2e}%",
            q,
            s,
            dataset_rank(data)?
        ),
    ))
}

fn dataset_rank(data: &ImageDataset) -> qrp_core::Result<usize> {
    static RANK: std::sync::OnceLock<usize> = std::sync::OnceLock::new();
    if let Some(&r) = RANK.get() {
        return Ok(r);
    }
    let m = qrp_core::RealMatrix::from_rows(data.vectors())?;
    let sv = svd(&m)?.singular_values;
    let r = sv.iter().filter(|&&x| x > 1e-10 * sv[0]).count();
    Ok(*RANK.get_or_init(|| r))
}

fn srht_exactness() -> Outcome {
    let full = build_srht(256, 256, SEED)?.to_dense()?;
    let gram = full.adjoint().matmul(&full)?;
    let ortho = gram.max_abs_diff(&ComplexMatrix::identity(256));

    // Dense reference: Sylvester Hadamard matrix, explicit signs and rows.
    let p = build_srht(256, 64, SEED + 1)?;
    let (signs, coords) = p.srht_parts().expect("srht");
    let h = |i: usize, j: usize| (if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 }) / 16.0;
    let scale = (256.0f64 / 64.0).sqrt();
    let mut worst: f64 = 0.0;
    for s in 0..20 {
        let v = random_unit_vector(256, &mut rng_from_seed(derive_seed(SEED, s)));
        let fast = p.apply_real(&v)?;
        for (r, &c) in coords.iter().enumerate() {
            let dense: f64 = (0..256).map(|j| scale * h(c, j) * signs[j] * v[j]).sum();
            worst = worst.max((fast[r] - Complex64::new(dense, 0.0)).norm());
        }
        let fw = fwht(&v)?;
        for (i, &x) in fw.iter().enumerate() {
            let dense: f64 = (0..256).map(|j| h(i, j) * v[j]).sum();
            worst = worst.max((x - dense).abs());
        }
    }
    Ok((ortho <= 1e-10 && worst <= 1e-10, format!("‖ΠᵀΠ − I‖max {ortho:.1e}; fast vs dense {worst:.1e}")))
}

fn measurement_paths() -> Outcome {
    let mut worst: f64 = 0.0;
    for (qubits, k) in [(vec![0], 128), (vec![0, 1], 64)] {
        let spec = AnsatzSpec::new(8, EXACT_DESIGN_DEPTH, SEED);
        let u = circuit_unitary(&build_rqc(&spec)?)?;
        let scale = (256.0 / k as f64).sqrt();
        let proj = build_qrp(&spec, k)?;
        for s in 0..100 {
            let mut rng = rng_from_seed(derive_seed(SEED, s));
            let amps = haar_isometry(256, 1, true, &mut rng).column(0);
            let state = Statevector::from_amplitudes(amps.clone())?;
            let measured = project_by_measurement(&spec, &state, &qubits, 0)?;
            let full = u.mul_vec(&amps)?;
            let dense: Vec<Complex64> = full[..k].iter().map(|a| a * scale).collect();
            let fast = proj.apply(&amps)?;
            let nd = norm(&dense);
            for ((m, d), f) in measured.amplitudes().iter().zip(&dense).zip(&fast) {
                worst = worst.max((m - d / nd).norm()).max((f - d).norm());
            }
        }
    }
    Ok((worst <= 1e-9, format!("max deviation {worst:.1e} over 200 states")))
}

fn entropy_experiment() -> Outcome {
    let exp = Profile::Exponential { decay: 1.0 };
    let cfg = EntropyConfig::new(1024, vec![10, 400], vec![512], vec![Profile::Linear, exp], ProjectorKind::Qrp, 100, SEED);
    let report = run_entropy(&cfg)?;
    let get = |p, r| report.row(p, r, 512).expect("row");
    let (l10, l400) = (get(Profile::Linear, 10), get(Profile::Linear, 400));
    let (e10, e400) = (get(exp, 10), get(exp, 400));
    let ordered = l10.mean_pct_error + l10.ci90 < l400.mean_pct_error - l400.ci90;
    let lin_spread = (l400.mean_pct_error - l10.mean_pct_error).abs();
    let exp_spread = (e400.mean_pct_error - e10.mean_pct_error).abs();
    Ok((
        ordered && exp_spread < lin_spread,
        format!(
            "linear r=10 {:.3}±{:.3}%, r=400 {:.3}±{:.3}%; exponential r=10 {:.3}%, r=400 {:.3}% (spread {exp_spread:.3} vs {lin_spread:.3})",
            l10.mean_pct_error, l10.ci90, l400.mean_pct_error, l400.ci90, e10.mean_pct_error, e400.mean_pct_error
        ),
    ))
}

fn theorem3() -> Outcome {
    let density = LowRankDensitySpec::new(256, 10, Profile::Linear, SEED);
    let out = theorem3_check(&Theorem3Config::new(density, ProjectorKind::Qrp, 128, 0.1, 200))?;
    Ok((
        out.rate >= 0.9 - 3.0 * out.rate_std_error && out.epsilon <= 1.0 / 6.0,
        format!("ε = {:.4}, bound satisfied in {:.3} (se {:.3}) of {} trials", out.epsilon, out.rate, out.rate_std_error, out.trials),
    ))
}

fn singular_value_envelope() -> Outcome {
    let density = LowRankDensitySpec::new(1024, 10, Profile::Linear, SEED + 3);
    let out = theorem3_check(&Theorem3Config::new(density, ProjectorKind::Qrp, 512, 0.05, 1000))?;
    Ok((
        out.envelope_rate >= 0.95,
        format!("ε = {:.4}, all p̃ᵢ inside the envelope in {:.3} of {} trials", out.epsilon, out.envelope_rate, out.trials),
    ))
}

fn vqsvd_demo() -> Outcome {
    let spec = PipelineSpec {
        n_qubits: 6,
        rank: 5,
        profile: Profile::Linear,
        measured: vec![0],
        circuit_depth: EXACT_DESIGN_DEPTH,
        seed: 7,
    };
    let mut cfg = VqsvdConfig::new(5, 11);
    cfg.depth = 12;
    cfg.momentum = 0.9;
    cfg.max_iterations = 20_000;
    let result = pipeline_demo(&spec, &cfg)?;
    let worst_err = result
        .rows
        .iter()
        .map(|r| (r.estimated - r.projected_sigma).abs() / r.projected_sigma)
        .fold(0.0, f64::max);
    let worst_rise = result.trace.losses.windows(2).map(|w| w[1] - w[0]).fold(f64::MIN, f64::max);

    // Shift rule against brute-force central differences at random points.
    let m = ComplexMatrix::from_fn(32, 64, |i, j| {
        let x = derive_seed(SEED, (i * 64 + j) as u64);
        Complex64::new((x % 1000) as f64 / 1000.0 - 0.5, ((x >> 20) % 1000) as f64 / 1000.0 - 0.5)
    });
    let mut worst_grad: f64 = 0.0;
    for point in 0..3 {
        let (left, theta) = build_hea(5, 2, 2, derive_seed(SEED, 100 + point), false)?;
        let (right, phi) = build_hea(6, 2, 2, derive_seed(SEED, 200 + point), false)?;
        let problem = Problem::new(&m, left, right, vec![5.0, 4.0, 3.0, 2.0, 1.0])?;
        let (at, af) = problem.gradient(&theta, &phi, GradientScheme::ParameterShift)?;
        let (bt, bf) = problem.gradient_brute_force(&theta, &phi, 1e-5)?;
        for (a, b) in at.iter().chain(&af).zip(bt.iter().chain(&bf)) {
            worst_grad = worst_grad.max((a - b).abs() / b.abs().max(1e-6));
        }
    }
    Ok((
        worst_err <= 0.15 && worst_rise <= 1e-6 && worst_grad <= 1e-4,
        format!(
            "worst σ error {:.2}% over {} iterations; largest loss rise {worst_rise:.1e}; shift vs central difference {worst_grad:.1e}",
            100.0 * worst_err,
            result.trace.iterations
        ),
    ))
}

fn reconstruction(data: &ImageDataset) -> Outcome {
    let q = run_reconstruction(data.vectors(), ProjectorKind::Qrp, &[512], EXACT_DESIGN_DEPTH, SEED)?.rows[0].mean;
    let s = run_reconstruction(data.vectors(), ProjectorKind::Srht, &[512], EXACT_DESIGN_DEPTH, SEED)?.rows[0].mean;
    let p = run_reconstruction(data.vectors(), ProjectorKind::Pca, &[640], EXACT_DESIGN_DEPTH, SEED)?.rows[0].mean;
    Ok((
        q < 1.414 && s < 1.414 && p < 1e-6,
        format!("mean ‖x − x̂‖ at k=512: QRP {q:.4}, SRHT {s:.4}; PCA at k=640 {p:.2e}"),
    ))
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wants = |i: usize| selected.is_empty() || selected.contains(&i);
    let data = if wants(5) || wants(12) { Some(mnist()) } else { None };
    let data = data.as_ref();

    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "Haar projected-norm variance", Box::new(haar_variance)),
        (2, "fourth-moment anticoncentration", Box::new(fourth_moment)),
        (3, "circuit-vs-Haar convergence", Box::new(circuit_convergence)),
        (4, "Chebyshev JL coverage", Box::new(chebyshev_coverage)),
        (5, "JL image distortion", Box::new(move || jl_images(data.expect("dataset")))),
        (6, "SRHT exactness", Box::new(srht_exactness)),
        (7, "dual-path measurement projection", Box::new(measurement_paths)),
        (8, "entropy experiment", Box::new(entropy_experiment)),
        (9, "entropy bound self-check", Box::new(theorem3)),
        (10, "per-singular-value envelope", Box::new(singular_value_envelope)),
        (11, "VQSVD desk scale", Box::new(vqsvd_demo)),
        (12, "reconstruction baseline", Box::new(move || reconstruction(data.expect("dataset")))),
    ];

    let mut failed = 0;
    for (i, name, run) in &criteria {
        if !wants(*i) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{i:>2}] {name}: {detail} ({:.1}s)",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}

