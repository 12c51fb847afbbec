use super::*;
use crate::bounds::{build_sensitivities, spectral_normalize, CertifyConfig};
use crate::networks::Dataset;
use crate::pacbayes::{choose_sigma2, kappa, optimal_posterior};
use crate::sensitivity::{build_diagonal, build_toeplitz, ToeplitzSymbol};
use rand::Rng;

fn approx(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
}

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = RngSeed(seed).rng();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_dense(dims: &[usize], seed: u64, scale: f64) -> Network {
    let mut rng = RngSeed(seed).rng();
    let layers: Vec<LayerParams> = dims
        .windows(2)
        .map(|w| {
            LayerParams::Weight(Matrix::from_fn(w[1], w[0], |_, _| {
                scale * rng.gen_range(-1.0..1.0)
            }))
        })
        .collect();
    Network::new(NetKind::Dense, dims[0], *dims.last().unwrap(), layers).unwrap()
}

fn blob(dim: usize, m: usize, seed: u64) -> Dataset {
    crate::cli::generate_blobs(dim, m, 3.0, 0.5, RngSeed(seed)).unwrap()
}

/// The full pipeline state for a dense diagonal certificate, reused across
/// the Monte Carlo tests.
fn diagonal_pipeline(
    seed: u64,
    gamma: f64,
) -> (Network, Dataset, Vec<SensitivityMatrix>, PosteriorSpec) {
    diagonal_pipeline_scaled(seed, gamma, 0.6)
}

/// Same pipeline with a chosen weight scale. Small scales put the posterior
/// in the mild-shrinkage regime (eta²·gain² of order one), where sigma²
/// tampering is actually visible; strong shrinkage absorbs it.
fn diagonal_pipeline_scaled(
    seed: u64,
    gamma: f64,
    scale: f64,
) -> (Network, Dataset, Vec<SensitivityMatrix>, PosteriorSpec) {
    let net = random_dense(&[4, 4, 2], seed, scale);
    let data = blob(4, 40, seed + 1);
    let normalized = spectral_normalize(&net, CircGain::Paper).unwrap();
    let sens = build_diagonal(&normalized.net, data.radius_b()).unwrap();
    // Fixed-point approximation at the true scale: the sandwich is exact.
    let approx_sens: Vec<SensitivityMatrix> = sens
        .iter()
        .map(|s| s.approximate(normalized.beta).unwrap())
        .collect();
    let sigma2 = choose_sigma2(&approx_sens, gamma).unwrap();
    let eta2 = 16.0 * kappa() * normalized.net.param_norm_sq() / (gamma * gamma);
    let posts: Vec<_> = sens
        .iter()
        .map(|s| optimal_posterior(s, eta2).unwrap())
        .collect();
    (
        normalized.net,
        data,
        sens,
        PosteriorSpec {
            sigma2,
            eta2,
            layers: posts,
        },
    )
}

// ---------------------------------------------------------------------------
// Spectral norm oracle
// ---------------------------------------------------------------------------

#[test]
fn bruteforce_spectral_norm_agrees_with_power_iteration() {
    for seed in 0..10 {
        let m = random_matrix(5 + seed as usize % 3, 4, 900 + seed);
        let brute = spectral_norm_bruteforce(&m).unwrap();
        let fast = m.spectral_norm_default().unwrap();
        approx(fast, brute, 1e-8 * (1.0 + brute));
    }
}

// ---------------------------------------------------------------------------
// Closed-form posterior oracle
// ---------------------------------------------------------------------------

#[test]
fn oracle_min_d_zero_sensitivity_converges_to_identity() {
    let a = Matrix::zeros(4, 4);
    let r = oracle_min_d(&a, 1.0, 20_000, 1e-10).unwrap();
    assert!(r.sub(&Matrix::identity(4)).unwrap().frobenius_norm() < 1e-8);
}

#[test]
fn oracle_min_d_matches_closed_form() {
    let a = random_matrix(5, 5, 81);
    let eta2 = 0.9;
    let oracle = oracle_min_d(&a, eta2, 50_000, 1e-10).unwrap();
    let closed = closed_form_min_d(&a, eta2).unwrap();
    assert!(
        oracle.sub(&closed).unwrap().frobenius_norm() < 1e-6,
        "oracle diverges from closed form by {}",
        oracle.sub(&closed).unwrap().frobenius_norm()
    );
}

#[test]
fn oracle_min_d_diagonal_sensitivity_gives_diagonal_minimizer() {
    let a = Matrix::from_rows(&[vec![2.0, 0.0, 0.0], vec![0.0, 0.5, 0.0], vec![0.0, 0.0, 1.0]])
        .unwrap();
    let r = oracle_min_d(&a, 1.0, 20_000, 1e-10).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                assert!(r.at(i, j).abs() < 1e-8, "off-diagonal {}", r.at(i, j));
            }
        }
    }
}

#[test]
fn closed_form_objective_no_worse_than_oracle() {
    for trial in 0..5u64 {
        let dim = 3 + trial as usize;
        let a = random_matrix(dim, dim, 90 + trial);
        let eta2 = 0.4 + 0.3 * trial as f64;
        let oracle = oracle_min_d(&a, eta2, 50_000, 1e-10).unwrap();
        let closed = closed_form_min_d(&a, eta2).unwrap();
        let d_closed = d_objective(&a, eta2, &closed).unwrap();
        let d_oracle = d_objective(&a, eta2, &oracle).unwrap();
        assert!(
            d_closed <= d_oracle + 1e-8,
            "closed-form objective {d_closed} worse than oracle {d_oracle}"
        );
    }
}

#[test]
fn closed_form_beats_random_pd_matrices() {
    // D(R*) <= D(R) for 100 random PD R (direct evaluation).
    let a = random_matrix(4, 4, 95);
    let eta2 = 1.2;
    let closed = closed_form_min_d(&a, eta2).unwrap();
    let d_star = d_objective(&a, eta2, &closed).unwrap();
    let mut rng = RngSeed(96).rng();
    for _ in 0..100 {
        let g = Matrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let mut r = g.transpose().matmul(&g).unwrap();
        for i in 0..4 {
            r.set(i, i, r.at(i, i) + 0.05);
        }
        let d_r = d_objective(&a, eta2, &r).unwrap();
        assert!(d_star <= d_r + 1e-10, "D(R*) = {d_star} > D(R) = {d_r}");
    }
}

// ---------------------------------------------------------------------------
// Finite-difference Jacobian
// ---------------------------------------------------------------------------

#[test]
fn finite_diff_matches_analytic_in_linear_regime() {
    // ReLU networks are piecewise multilinear in a single weight entry, so
    // away from kinks the central difference is exact to round-off.
    let net = random_dense(&[3, 4, 2], 101, 0.8);
    let x = [0.9, -0.3, 0.5];
    for l in 0..net.depth() {
        let analytic = net.layer_jacobian(&x, l).unwrap();
        let fd = finite_diff_jacobian(&net, &x, l, 1e-5).unwrap();
        assert!(
            analytic.sub(&fd).unwrap().max_abs() < 1e-6,
            "layer {l} mismatch"
        );
        // A different step size inside the same linear cell agrees just as
        // tightly.
        let fd2 = finite_diff_jacobian(&net, &x, l, 1e-4).unwrap();
        assert!(analytic.sub(&fd2).unwrap().max_abs() < 1e-6);
    }
}

#[test]
fn finite_diff_dead_layer_is_zero() {
    let net = Network::new(
        NetKind::Dense,
        2,
        2,
        vec![
            LayerParams::Weight(Matrix::identity(2)),
            LayerParams::Weight(Matrix::identity(2)),
        ],
    )
    .unwrap();
    // Negative inputs kill the first layer; derivatives with respect to
    // its weights vanish (for steps small enough not to flip the ReLU).
    let fd = finite_diff_jacobian(&net, &[-2.0, -3.0], 0, 1e-5).unwrap();
    assert!(fd.max_abs() == 0.0);
}

#[test]
fn finite_diff_rejects_bad_eps() {
    let net = random_dense(&[2, 2, 2], 102, 0.5);
    assert!(finite_diff_jacobian(&net, &[0.1, 0.2], 0, 1e-8).is_err());
    assert!(finite_diff_jacobian(&net, &[0.1, 0.2], 0, 1e-2).is_err());
}

#[test]
fn jacobian_median_relative_error_below_threshold() {
    // Median relative error over 50 kink-avoiding probes < 1e-5.
    let mut errs = Vec::new();
    let mut seed = 0u64;
    while errs.len() < 50 {
        seed += 1;
        let net = random_dense(&[3, 4, 2], 2000 + seed, 0.7);
        let mut rng = RngSeed(3000 + seed).rng();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if net.forward_trace(&x).unwrap().min_kink_distance() <= 1e-3 {
            continue;
        }
        for l in 0..net.depth() {
            let analytic = net.layer_jacobian(&x, l).unwrap();
            let fd = finite_diff_jacobian(&net, &x, l, 1e-5).unwrap();
            let denom = fd.frobenius_norm().max(1e-12);
            errs.push(analytic.sub(&fd).unwrap().frobenius_norm() / denom);
        }
    }
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = errs[errs.len() / 2];
    assert!(median < 1e-5, "median relative error {median}");
}

// ---------------------------------------------------------------------------
// Monte Carlo checks
// ---------------------------------------------------------------------------

#[test]
fn concentration_zero_sensitivity_never_exceeds() {
    let net = random_dense(&[3, 3, 2], 110, 0.5);
    let sens = build_diagonal(&net, 0.0).unwrap();
    let post = optimal_posterior(&sens[0], 1.0).unwrap();
    let r = mc_concentration(&sens[0], &post, 0.01, LN_2, 2000, RngSeed(7)).unwrap();
    assert_eq!(r.success_count, 0);
    assert!(r.pass);
}

#[test]
fn concentration_holds_at_several_t() {
    let (_, _, sens, spec) = diagonal_pipeline(120, 1.0);
    for (i, t) in [LN_2, 1.0, 2.0, 4.0].into_iter().enumerate() {
        for (l, (s, p)) in sens.iter().zip(&spec.layers).enumerate() {
            let r = mc_concentration(
                s,
                p,
                spec.sigma2,
                t,
                5000,
                RngSeed(400 + (i * 10 + l) as u64),
            )
            .unwrap();
            assert!(
                r.pass,
                "t={t} layer {l}: exceedance {} vs tail {}",
                r.frequency, r.threshold
            );
        }
    }
}

#[test]
fn perturbation_condition_small_sigma_always_holds() {
    let (net, data, sens, mut spec) = diagonal_pipeline(130, 1.0);
    spec.sigma2 *= 1e-8;
    let r = mc_perturbation_condition(&net, &data, &spec, &sens, 1.0, 1000, RngSeed(8)).unwrap();
    approx(r.frequency, 1.0, 0.0);
    approx(r.direct_frequency.unwrap(), 1.0, 0.0);
}

#[test]
fn perturbation_condition_huge_gamma_always_holds() {
    let (net, data, sens, spec) = diagonal_pipeline(131, 1.0);
    let r = mc_perturbation_condition(&net, &data, &spec, &sens, 1e9, 1000, RngSeed(9)).unwrap();
    approx(r.frequency, 1.0, 0.0);
}

#[test]
fn perturbation_condition_holds_at_pipeline_sigma() {
    let (net, data, sens, spec) = diagonal_pipeline(132, 1.0);
    let r = mc_perturbation_condition(&net, &data, &spec, &sens, 1.0, 2000, RngSeed(10)).unwrap();
    assert!(
        r.pass,
        "surrogate frequency {} below 0.5 - 3·stderr",
        r.frequency
    );
}

#[test]
fn perturbation_condition_breaks_under_tampered_sigma() {
    // Multiplying sigma² by 100 overturns the surrogate event; the direct
    // event usually survives (the chain carries ≥ e⁴·κ slack), which the
    // chain_slack flag records. Small weights keep the optimal posterior
    // near-isotropic so the tamper is not absorbed by shrinkage.
    let (net, data, sens, mut spec) = diagonal_pipeline_scaled(133, 1.0, 0.05);
    spec.sigma2 *= 100.0;
    let r = mc_perturbation_condition(&net, &data, &spec, &sens, 1.0, 2000, RngSeed(11)).unwrap();
    assert!(!r.pass, "tampered sigma² still passed: {}", r.frequency);
    assert_eq!(r.chain_slack, Some(true));
}

#[test]
fn perturbation_bound_diagonal_no_violations() {
    let (net, data, sens, _) = diagonal_pipeline(134, 1.0);
    let r = mc_perturbation_bound(
        &net,
        &data,
        &sens,
        StructureKind::Diagonal,
        200,
        RngSeed(12),
    )
    .unwrap();
    assert_eq!(r.violations, Some(0));
    assert!(r.pass);
}

#[test]
fn perturbation_bound_toeplitz_no_violations() {
    let mut rng = RngSeed(140).rng();
    let h = 6;
    let net = Network::new(
        NetKind::Toeplitz,
        h,
        2,
        (0..2)
            .map(|_| LayerParams::Kernel {
                kernel: (0..3).map(|_| rng.gen_range(0.2..0.9)).collect(),
                size: h,
            })
            .collect(),
    )
    .unwrap();
    let data = blob(h, 30, 141);
    let normalized = spectral_normalize(&net, CircGain::Paper).unwrap();
    let sens = build_toeplitz(
        &normalized.net,
        data.radius_b(),
        &ToeplitzSymbol::geometric(0.5).unwrap(),
    )
    .unwrap();
    let r = mc_perturbation_bound(
        &normalized.net,
        &data,
        &sens,
        StructureKind::Toeplitz,
        200,
        RngSeed(142),
    )
    .unwrap();
    assert_eq!(r.violations, Some(0));
}

#[test]
fn oversized_perturbation_can_violate_out_of_contract() {
    // A perturbation far outside the validity region may break the
    // inequality; that is out of contract, not a checker failure. Verify
    // the raw inequality flips for a manufactured oversized perturbation.
    let net = Network::new(
        NetKind::Dense,
        2,
        2,
        vec![
            LayerParams::Weight(Matrix::identity(2).scale(0.1)),
            LayerParams::Weight(Matrix::identity(2).scale(0.1)),
        ],
    )
    .unwrap();
    let data = Dataset::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1, 2], None).unwrap();
    let sens = build_diagonal(&net, 1.0).unwrap();
    // u = 100·W on both layers: ‖U‖ = 10 ≫ ‖W‖/d.
    let u: Vec<LayerPerturb> = net
        .layers()
        .iter()
        .map(|l| match l {
            LayerParams::Weight(w) => LayerPerturb::Weight(w.scale(100.0)),
            _ => unreachable!(),
        })
        .collect();
    let pert = net.perturb(&u).unwrap();
    let base = base_outputs(&net, &data).unwrap();
    let lhs = max_inf_diff(&base, &pert, &data).unwrap().powi(2);
    let mut rhs = 0.0;
    for (s, layer) in sens.iter().zip(net.layers()) {
        if let LayerParams::Weight(w) = layer {
            let flat: Vec<f64> = w.scale(100.0).as_slice().to_vec();
            rhs += s.apply_sq_norm(&flat).unwrap();
        }
    }
    // With these tiny weights the quadratic blow-up beats the linear
    // sensitivity budget.
    assert!(lhs > rhs, "expected an out-of-contract violation");
}

#[test]
fn neyshabur_bound_no_violations_on_random_nets() {
    for seed in 0..3u64 {
        let net = random_dense(&[4, 4, 2], 150 + seed, 0.7);
        let data = blob(4, 30, 160 + seed);
        let r = check_neyshabur_perturbation(&net, &data, 150, RngSeed(170 + seed)).unwrap();
        assert_eq!(r.violations, Some(0), "seed {seed}");
    }
}

#[test]
fn certificate_diagnostics_bundle_passes_for_all_structures() {
    let cfg = CertifyConfig {
        mc_samples: 1000,
        mc_bound_samples: 100,
        ..CertifyConfig::default()
    };
    let gamma = 1.0;

    // Dense (diagonal + low-rank), residual, circulant, toeplitz.
    let dense = random_dense(&[5, 5, 2], 200, 0.6);
    let data5 = blob(5, 30, 201);
    for structure in [StructureKind::Diagonal, StructureKind::LowRank] {
        let normalized = spectral_normalize(&dense, cfg.circ_gain).unwrap();
        let sens =
            build_sensitivities(&normalized.net, &data5, structure, data5.radius_b(), &cfg)
                .unwrap();
        let approx_sens: Vec<_> = sens
            .iter()
            .map(|s| s.approximate(normalized.beta).unwrap())
            .collect();
        let sigma2 = choose_sigma2(&approx_sens, gamma).unwrap();
        let eta2 = 16.0 * kappa() * normalized.net.param_norm_sq() / (gamma * gamma);
        let posts: Vec<_> = sens
            .iter()
            .map(|s| optimal_posterior(s, eta2).unwrap())
            .collect();
        let spec = PosteriorSpec {
            sigma2,
            eta2,
            layers: posts,
        };
        let diag = run_certificate_diagnostics(
            &normalized.net,
            &data5,
            &sens,
            &spec,
            gamma,
            structure,
            &cfg,
            RngSeed(202),
        )
        .unwrap();
        assert!(diag.all_pass, "{structure} diagnostics failed");
    }
}
