//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use excursion::config::ExperimentConfig;
use excursion::harness::{predict, run_validation, ValidationReport};
use excursion_core::densities::{
    curvature_density_aniso, curvature_density_iso, mc_total_flag_mass, SphereQuadrature,
};
use excursion_core::euler::{euler_char, euler_char_2d_oracle, BinaryGrid};
use excursion_core::grassmann::{eigen_expansion, lambda_bracket, sample_unit_vector, Subspace};
use excursion_core::special::f_kl;
use excursion_core::zonotope::{expected_euler_pkf_iso, expected_euler_zonotope, intrinsic_volumes_box};
use excursion_core::{CovarianceModel, ExcursionSpec, Zonotope};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_subspace(rng: &mut ChaCha8Rng, d: usize, j: usize) -> Subspace {
    if j == 0 {
        return Subspace::trivial(d);
    }
    let vs: Vec<DVector<f64>> = (0..j).map(|_| sample_unit_vector(rng, d)).collect();
    Subspace::span(d, &vs).expect("gaussian vectors")
}

fn lemma_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for d in 1..=5 {
        for j in 0..=d {
            for _ in 0..200 {
                let g = gaussian_matrix(&mut rng, d);
                let l = (&g + g.transpose()) * 0.5;
                let u = random_subspace(&mut rng, d, j);
                if u.dim() != j {
                    return Err(format!("sampled subspace of dimension {} instead of {j}", u.dim()));
                }
                let direct = lambda_bracket(&l, &u).map_err(|e| e.to_string())?;
                let expanded = eigen_expansion(&l, &u).map_err(|e| e.to_string())?;
                worst = worst.max((direct - expanded).abs() / direct.abs().max(1.0));
                cases += 1;
            }
        }
    }
    check(worst <= 1e-9, format!("{cases} cases, max relative gap {worst:.2e}"))
}

fn orthogonal_complement_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for d in 1..=5 {
        for _ in 0..100 {
            let g = gaussian_matrix(&mut rng, d);
            let l = &g * g.transpose() + DMatrix::identity(d, d) * 0.1;
            let u = sample_unit_vector(&mut rng, d);
            let lhs = lambda_bracket(&l, &Subspace::orthogonal_to(&u)).map_err(|e| e.to_string())?;
            let inv = l.clone().try_inverse().ok_or("singular draw")?;
            let rhs = l.determinant() * u.dot(&(&inv * &u));
            worst = worst.max((lhs - rhs).abs() / rhs.abs());
        }
    }
    check(worst <= 1e-9, format!("500 cases, max relative gap {worst:.2e}"))
}

fn cube_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 2..=4 {
        for side in [0.5, 1.0, 3.0] {
            for alpha in [-1.0, 0.0, 0.5, 2.0] {
                let spec = ExcursionSpec::new(CovarianceModel::isotropic(d, 1.0, 1.0).unwrap(), alpha).unwrap();
                let cube = Zonotope::cube(d, side).unwrap();
                let a = expected_euler_zonotope(&spec, &cube).map_err(|e| e.to_string())?;
                let vols = intrinsic_volumes_box(&vec![side; d]).unwrap();
                let b = expected_euler_pkf_iso(&spec, &vols).map_err(|e| e.to_string())?;
                worst = worst.max((a - b).abs() / b.abs());
            }
        }
    }
    check(worst <= 1e-10, format!("36 cases, max relative gap {worst:.2e}"))
}

fn normalization_arbitration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let quad = SphereQuadrature::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for d in [2, 3] {
        for alpha in [0.0, 0.7] {
            let spec = ExcursionSpec::new(CovarianceModel::isotropic(d, 1.3, 0.8).unwrap(), alpha).unwrap();
            for k in 0..d {
                let closed = curvature_density_iso(&spec, k).map_err(|e| e.to_string())?;
                let mc = mc_total_flag_mass(&spec, k, 100_000, &mut rng).map_err(|e| e.to_string())?;
                let q = curvature_density_aniso(&spec, k, &quad).map_err(|e| e.to_string())?;
                let mc_ok = (mc.mean - closed).abs() <= 4.0 * mc.std_error + 1e-12 * closed.abs().max(1e-300);
                let q_ok = (q.value - closed).abs() <= 1e-6 * closed.abs() + 1e-15;
                ok &= mc_ok && q_ok;
                if !(mc_ok && q_ok) {
                    lines.push(format!(
                        "d={d} a={alpha} k={k}: closed {closed:.6e} mc {:.6e}±{:.1e} quad {:.6e}",
                        mc.mean, mc.std_error, q.value
                    ));
                }
            }
        }
    }
    check(ok, if ok { "d in {2,3}, alpha in {0, 0.7}, all k".into() } else { lines.join("; ") })
}

fn anisotropic_cross_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let quad = SphereQuadrature::default();
    let mut worst: f64 = 0.0;
    for diag in [vec![1.0, 4.0], vec![1.0, 2.0, 5.0]] {
        let d = diag.len();
        let shape = DMatrix::from_diagonal(&DVector::from_vec(diag));
        let spec = ExcursionSpec::new(CovarianceModel::anisotropic(1.0, shape).unwrap(), 0.5).unwrap();
        for k in 0..d {
            let q = curvature_density_aniso(&spec, k, &quad).map_err(|e| e.to_string())?;
            let mc = mc_total_flag_mass(&spec, k, 100_000, &mut rng).map_err(|e| e.to_string())?;
            let gap = (q.value - mc.mean).abs();
            let allowed = 4.0 * mc.std_error + 1e-12 * q.value.abs();
            worst = worst.max(gap / allowed);
        }
    }
    check(worst <= 1.0, format!("5 densities, max gap / (4 SE) = {worst:.2}"))
}

fn validation_config(d: usize, alpha: f64, side: f64, n: usize, replications: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!(
        r#"
mode = "validate"
alpha = {alpha}
[model]
family = "squared_exponential_isotropic"
sigma2 = 1.0
ell = 1.0
dim = {d}
[window]
kind = "cube"
side = {side}
[grid]
n = {n}
h = 0.125
[mc]
replications = {replications}
seed = {seed}
"#
    ))
    .expect("valid config")
}

fn summarize(report: &ValidationReport) -> String {
    format!(
        "alpha={}: mean {:.3} ± {:.3} vs {:.4} (z = {:+.2}, tol {:.3})",
        report.config.alpha,
        report.mc_mean,
        report.mc_std_error,
        report.prediction,
        report.z_score.unwrap_or(0.0),
        report.tolerance
    )
}

fn end_to_end_2d() -> Outcome {
    // T = 8 ell, lambda = 1 / ell^2, alpha = 0: 2 T sqrt(lambda) / (2 pi) + 1/2.
    let reference = 16.0 / (2.0 * PI) + 0.5;
    let mut parts = Vec::new();
    let mut ok = true;
    for (alpha, seed) in [(0.0, 61), (1.0, 62)] {
        let config = validation_config(2, alpha, 8.0, 512, 200, seed);
        let report = run_validation(&config, None).map_err(|e| e.to_string())?;
        if alpha == 0.0 {
            let p = predict(&config).map_err(|e| e.to_string())?;
            ok &= (p - reference).abs() < 1e-12;
        }
        ok &= report.passed && report.window_points == 65;
        parts.push(summarize(&report));
    }
    check(ok, parts.join("; "))
}

fn smoke_3d() -> Outcome {
    let report = run_validation(&validation_config(3, 1.0, 6.0, 64, 100, 71), None).map_err(|e| e.to_string())?;
    check(report.passed && (report.margin - 0.07).abs() < 1e-15, summarize(&report))
}

fn euler_oracle() -> Outcome {
    let mut mismatches = 0;
    for seed in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = BinaryGrid::from_fn(vec![8, 8], 1.0, |_| rng.random_bool(0.5)).unwrap();
        if euler_char(&g) != euler_char_2d_oracle(&g).map_err(|e| e.to_string())? {
            mismatches += 1;
        }
    }
    let ring = BinaryGrid::from_fn(vec![3, 3], 1.0, |i| i != [1, 1]).unwrap();
    let ring_chi = euler_char(&ring);
    check(mismatches == 0 && ring_chi == 0, format!("{mismatches} mismatches in 1000 masks, annulus chi = {ring_chi}"))
}

/// `Gamma(n / 2)` for positive integers `n`.
fn gamma_half(n: usize) -> f64 {
    let (mut g, mut x) = if n.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while x < n as f64 / 2.0 - 1e-12 {
        g *= x;
        x += 1.0;
    }
    g
}

fn f_endpoints() -> Outcome {
    let mut worst_limit: f64 = 0.0;
    let mut pi_exact = true;
    for d in 2..=6 {
        for k in 0..d {
            for l in 0..d {
                if k + l < d {
                    continue;
                }
                pi_exact &= f_kl(PI, d, k, l).map_err(|e| e.to_string())? == 0.0;
                let (a, b) = (d - k, d - l);
                // B(a, b) = Gamma(a) Gamma(b) / Gamma(a + b); O_n = 2 pi^{(n+1)/2} / Gamma((n+1)/2).
                let beta = gamma_half(2 * a) * gamma_half(2 * b) / gamma_half(2 * (a + b));
                let n = 2 * d - k - l - 1;
                let sphere = 2.0 * PI.powf((n as f64 + 1.0) / 2.0) / gamma_half(n + 1);
                let limit = beta / sphere;
                for theta in [0.0, 1.0001e-4] {
                    let v = f_kl(theta, d, k, l).map_err(|e| e.to_string())?;
                    worst_limit = worst_limit.max((v - limit).abs());
                }
            }
        }
    }
    let quarter = f_kl(PI / 2.0, 2, 1, 1).map_err(|e| e.to_string())?;
    check(
        pi_exact && worst_limit <= 1e-8 && (quarter - 0.25).abs() <= 1e-10,
        format!("F(pi) exact: {pi_exact}; small-angle gap {worst_limit:.2e}; F_11(pi/2) = {quarter:.12}"),
    )
}

fn determinism() -> Outcome {
    let config = validation_config(2, 0.5, 8.0, 128, 60, 99);
    let reports: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&t| run_validation(&config, Some(t)).map(|r| r.to_json()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let identical = reports.windows(2).all(|w| w[0].as_bytes() == w[1].as_bytes());
    check(identical, format!("{} byte reports at 1, 4, 8 threads identical: {identical}", reports[0].len()))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "eigen expansion of Lambda[U]", budget: Duration::from_secs(10), run: lemma_identity },
        Criterion { id: 2, name: "L[u-perp] = det(L) u^T L^-1 u", budget: Duration::from_secs(10), run: orthogonal_complement_identity },
        Criterion { id: 3, name: "cube: zonotope formula = kinematic formula", budget: Duration::from_secs(1), run: cube_consistency },
        Criterion { id: 4, name: "isotropic flag mass and quadrature vs closed form", budget: Duration::from_secs(60), run: normalization_arbitration },
        Criterion { id: 5, name: "anisotropic quadrature vs flag-mass Monte Carlo", budget: Duration::from_secs(120), run: anisotropic_cross_oracle },
        Criterion { id: 6, name: "2D end-to-end Monte Carlo", budget: Duration::from_secs(180), run: end_to_end_2d },
        Criterion { id: 7, name: "3D smoke test", budget: Duration::from_secs(300), run: smoke_3d },
        Criterion { id: 8, name: "vertex-rule chi vs 2D oracle", budget: Duration::from_secs(60), run: euler_oracle },
        Criterion { id: 9, name: "F_kl endpoint values", budget: Duration::from_secs(10), run: f_endpoints },
        Criterion { id: 10, name: "byte-identical reports across thread counts", budget: Duration::from_secs(300), run: determinism },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (passed, detail) = match outcome {
            Ok(detail) if elapsed <= c.budget => (true, detail),
            Ok(detail) => (false, format!("{detail}; exceeded {:?} budget", c.budget)),
            Err(detail) => (false, detail),
        };
        failures += usize::from(!passed);
        println!(
            "{} [{:>2}] {} ({:.2}s): {}",
            if passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
