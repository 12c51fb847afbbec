use super::*;
use crate::linalg::RngSeed;
use crate::networks::{LayerParams, NetKind, Network};
use crate::sensitivity::{
    build_circulant, build_diagonal, build_lowrank, build_toeplitz, CircGain, ToeplitzSymbol,
};
use rand::Rng;

fn approx(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
}

#[test]
fn kappa_value() {
    // 1 + 2 ln 2 + sqrt(4 ln 2), evaluated independently:
    // 1 + 1.3862943611... + 1.6651092223... = 4.0514035834...
    approx(kappa(), 4.0514035834, 1e-9);
    assert!(kappa() > 4.0);
}

#[test]
fn gamma_functional_identity_matrix() {
    // M = I_n: Γ = n + √(4 ln 2)·√n + 2 ln 2.
    for n in [1usize, 4, 9] {
        let nf = n as f64;
        let expected = nf + (4.0 * LN_2).sqrt() * nf.sqrt() + 2.0 * LN_2;
        approx(
            gamma_functional(nf, nf.sqrt(), 1.0).unwrap(),
            expected,
            1e-12,
        );
    }
}

#[test]
fn gamma_functional_zero_matrix() {
    approx(gamma_functional(0.0, 0.0, 0.0).unwrap(), 0.0, 0.0);
}

#[test]
fn gamma_functional_rank_one_collapses_to_kappa_trace() {
    // Rank-1 PSD: all three norms coincide, so Γ = κ·Tr.
    for t in [0.5, 1.0, 7.0] {
        approx(gamma_functional(t, t, t).unwrap(), kappa() * t, 1e-12);
    }
}

#[test]
fn gamma_functional_rejects_bad_ordering() {
    assert!(gamma_functional(1.0, 2.0, 0.5).is_err());
    assert!(gamma_functional(1.0, 0.5, 0.8).is_err());
    assert!(gamma_functional(1.0, 0.5, -0.1).is_err());
}

#[test]
fn delta_fn_values() {
    approx(delta_fn(0.0), 0.0, 0.0);
    approx(delta_fn(1.0), LN_2 - 0.5, 1e-12);
    // 0 <= δ(x) <= x² on a dense grid.
    for i in 0..10_000 {
        let x = -5.0 + 10.0 * (i as f64) / 9_999.0;
        let d = delta_fn(x);
        assert!(d >= -1e-15, "δ({x}) = {d} negative");
        assert!(d <= x * x + 1e-15, "δ({x}) = {d} exceeds x²");
    }
}

#[test]
fn choose_sigma2_scalar_plug_in() {
    // Single scalar-identity layer with gain λ and dim q:
    // sigma² = γ²/(16 e² κ λ² q).
    let beta = 0.8;
    let net = Network::new(
        NetKind::Dense,
        2,
        2,
        vec![
            LayerParams::Weight(Matrix::identity(2).scale(beta)),
            LayerParams::Weight(Matrix::identity(2).scale(beta)),
        ],
    )
    .unwrap();
    let sens = build_diagonal(&net, 1.0).unwrap();
    let gamma = 0.5;
    let sigma2 = choose_sigma2(&sens, gamma).unwrap();
    let e2 = std::f64::consts::E.powi(2);
    let total: f64 = sens.iter().map(|s| s.gain().powi(2) * 4.0).sum();
    approx(sigma2, gamma * gamma / (16.0 * e2 * kappa() * total), 1e-15);
}

#[test]
fn choose_sigma2_scales_as_gamma_squared() {
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
    let sens = build_diagonal(&net, 1.0).unwrap();
    let s1 = choose_sigma2(&sens, 1.0).unwrap();
    let s2 = choose_sigma2(&sens, 2.0).unwrap();
    approx(s2 / s1, 4.0, 1e-12);
    // Doubling all gains divides sigma² by 4; gains scale with B here.
    let sens_big = build_diagonal(&net, 2.0).unwrap();
    let s_big = choose_sigma2(&sens_big, 1.0).unwrap();
    approx(s1 / s_big, 4.0, 1e-12);
}

#[test]
fn choose_sigma2_rejects_zero_trace() {
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
    let sens = build_diagonal(&net, 0.0).unwrap();
    assert!(choose_sigma2(&sens, 1.0).is_err());
}

#[test]
fn optimal_posterior_zero_sensitivity_is_identity() {
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
    let sens = build_diagonal(&net, 0.0).unwrap();
    let post = optimal_posterior(&sens[0], 3.0).unwrap();
    match post {
        PosteriorCov::ScaledIdentity { r, .. } => approx(r, 1.0, 0.0),
        _ => panic!("expected scaled identity"),
    }
}

#[test]
fn optimal_posterior_scalar_shrink() {
    // η²λ² = 3 gives R* = 0.25·I.
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
    let sens = build_diagonal(&net, 1.0).unwrap();
    let lambda2 = sens[0].gain().powi(2);
    let post = optimal_posterior(&sens[0], 3.0 / lambda2).unwrap();
    match post {
        PosteriorCov::ScaledIdentity { r, .. } => approx(r, 0.25, 1e-12),
        _ => panic!("expected scaled identity"),
    }
}

#[test]
fn kl_identity_posteriors_reduce_to_weight_term() {
    let posts = vec![
        PosteriorCov::ScaledIdentity { r: 1.0, dim: 6 },
        PosteriorCov::ScaledIdentity { r: 1.0, dim: 4 },
    ];
    let kl = kl_divergence(3.0, 0.5, &posts).unwrap();
    approx(kl.total, 3.0 / (2.0 * 0.5), 1e-12);
    // sigma² to infinity with R = I sends the KL to zero.
    let kl_inf = kl_divergence(3.0, 1e18, &posts).unwrap();
    assert!(kl_inf.total < 1e-15);
}

#[test]
fn kl_scalar_shrink_matches_delta_identity() {
    // The trace + logdet + dim terms of the optimally shrunk scalar
    // posterior sum to ½·dim·δ(x) with x² = η²λ².
    let x: f64 = 1.7;
    let dim = 9usize;
    let post = PosteriorCov::ScaledIdentity {
        r: 1.0 / (1.0 + x * x),
        dim,
    };
    let kl = kl_divergence(0.0, 1.0, &[post]).unwrap();
    approx(kl.total, 0.5 * dim as f64 * delta_fn(x), 1e-12);
}

#[test]
fn kl_circulant_modes_matches_delta_identity() {
    let x: f64 = 0.9;
    let post = PosteriorCov::CirculantModes {
        shrink: 1.0 / (1.0 + x * x),
        rank: 3,
        size: 8,
    };
    let kl = kl_divergence(0.0, 1.0, &[post]).unwrap();
    approx(kl.total, 0.5 * 3.0 * delta_fn(x), 1e-12);
}

#[test]
fn kl_rejects_bad_sigma() {
    assert!(kl_divergence(1.0, 0.0, &[]).is_err());
    assert!(kl_divergence(-1.0, 1.0, &[]).is_err());
}

#[test]
fn optimal_posterior_forms_match_dense_inverse() {
    // Every structured closed form equals (I + η² AᵀA)⁻¹ densified.
    let mut rng = RngSeed(51).rng();
    let dense = Network::new(
        NetKind::Dense,
        3,
        2,
        vec![
            LayerParams::Weight(Matrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0))),
            LayerParams::Weight(Matrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0))),
        ],
    )
    .unwrap();
    let x = [0.6, -0.2, 0.9];
    let eta2 = 0.8;
    let families = vec![
        build_diagonal(&dense, 1.1).unwrap(),
        build_lowrank(&dense, 1.1, &x).unwrap(),
        build_toeplitz(
            &Network::new(
                NetKind::Toeplitz,
                4,
                2,
                vec![
                    LayerParams::Kernel {
                        kernel: vec![0.7, 0.2],
                        size: 4,
                    },
                    LayerParams::Kernel {
                        kernel: vec![0.4, -0.1],
                        size: 4,
                    },
                ],
            )
            .unwrap(),
            1.1,
            &ToeplitzSymbol::geometric(0.3).unwrap(),
        )
        .unwrap(),
    ];
    for sens in &families {
        for s in sens {
            let post = optimal_posterior(s, eta2).unwrap();
            let dim = s.input_dim();
            let mut expected = s.ata_dense().unwrap().scale(eta2);
            for i in 0..dim {
                expected.set(i, i, expected.at(i, i) + 1.0);
            }
            let expected_inv = crate::linalg::spd_inverse(&expected).unwrap();
            let got = post.densify().unwrap();
            assert!(
                got.sub(&expected_inv).unwrap().frobenius_norm() < 1e-8,
                "form mismatch for {:?}",
                s.kind
            );
        }
    }
}

#[test]
fn circulant_posterior_trace_and_logdet_bookkeeping() {
    let post = PosteriorCov::CirculantModes {
        shrink: 0.25,
        rank: 3,
        size: 8,
    };
    approx(post.trace(), 3.0 * 0.25 + 5.0, 1e-12);
    approx(post.logdet().unwrap(), 3.0 * 0.25_f64.ln(), 1e-12);
    // The real symmetrized covariance that sampling uses has the same
    // trace and a log-det at least as large (so the bookkeeping KL is an
    // upper bound on the sampled KL).
    let dense = post.densify().unwrap();
    approx(dense.trace().unwrap(), post.trace(), 1e-9);
    let real_logdet = crate::linalg::spd_logdet(&dense).unwrap();
    assert!(real_logdet >= post.logdet().unwrap() - 1e-9);
}

#[test]
fn gamma_summary_matches_dense_computation() {
    // (Tr, Fro, Spec) of M = A R Aᵀ from the joint structure agree with a
    // dense evaluation through the real forms.
    let mut rng = RngSeed(61).rng();
    let dense = Network::new(
        NetKind::Dense,
        3,
        2,
        vec![
            LayerParams::Weight(Matrix::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0))),
            LayerParams::Weight(Matrix::from_fn(2, 3, |_, _| rng.gen_range(-1.0..1.0))),
        ],
    )
    .unwrap();
    let x = [0.2, 0.9, -0.4];
    let eta2 = 1.3;
    let toep_net = Network::new(
        NetKind::Toeplitz,
        4,
        2,
        vec![
            LayerParams::Kernel {
                kernel: vec![0.8, 0.3, -0.2],
                size: 4,
            },
            LayerParams::Kernel {
                kernel: vec![0.5, 0.1, 0.4],
                size: 4,
            },
        ],
    )
    .unwrap();
    let circ_net = Network::new(
        NetKind::Circulant,
        6,
        2,
        vec![
            LayerParams::Kernel {
                kernel: vec![0.9, 0.1, -0.3, 0.2, 0.05, -0.4],
                size: 6,
            },
            LayerParams::Kernel {
                kernel: vec![0.6, -0.2, 0.1, 0.3, -0.1, 0.2],
                size: 6,
            },
        ],
    )
    .unwrap();
    let families = vec![
        build_diagonal(&dense, 1.4).unwrap(),
        build_lowrank(&dense, 1.4, &x).unwrap(),
        build_circulant(&circ_net, 1.4, CircGain::Paper).unwrap(),
        build_toeplitz(&toep_net, 1.4, &ToeplitzSymbol::identity()).unwrap(),
    ];
    for sens in &families {
        for s in sens {
            let post = optimal_posterior(s, eta2).unwrap();
            let (tr, fro, spec) = gamma_summary(s, &post).unwrap();
            // Dense route: S_A = real AᵀA form, R = real covariance; the
            // nonzero spectrum of A R Aᵀ equals that of R^{1/2} S_A R^{1/2}.
            let sa = s.ata_dense().unwrap();
            let r = post.densify().unwrap();
            let l = crate::linalg::cholesky(&r).unwrap();
            let inner = l.transpose().matmul(&sa).unwrap().matmul(&l).unwrap();
            let (vals, _) = crate::linalg::symmetric_eigen(&inner).unwrap();
            let modes: Vec<f64> = vals.iter().map(|v| v.max(0.0)).collect();
            let tr_d: f64 = modes.iter().sum();
            let fro_d = modes.iter().map(|v| v * v).sum::<f64>().sqrt();
            let spec_d = modes.iter().fold(0.0_f64, |m, v| m.max(*v));
            approx(tr, tr_d, 1e-8 * (1.0 + tr_d));
            approx(fro, fro_d, 1e-8 * (1.0 + fro_d));
            approx(spec, spec_d, 1e-8 * (1.0 + spec_d));
            // And the PSD ordering for Γ holds.
            assert!(gamma_functional(tr, fro, spec).is_ok());
        }
    }
}

#[test]
fn block_diagonal_gamma_chain() {
    // Γ(blkdiag M) <= Σ Γ(M_l) <= κ Σ Tr(M_l) on random PSD blocks.
    let mut rng = RngSeed(71).rng();
    for _ in 0..50 {
        let blocks: Vec<Matrix> = (0..3)
            .map(|_| {
                let n = 2 + rng.gen_range(0..3) as usize;
                let g = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                g.transpose().matmul(&g).unwrap()
            })
            .collect();
        let mut tr_sum = 0.0;
        let mut gamma_sum = 0.0;
        let mut fro_sq_total = 0.0;
        let mut spec_total = 0.0_f64;
        let mut tr_total = 0.0;
        for b in &blocks {
            let tr = b.trace().unwrap();
            let fro = b.frobenius_norm();
            let spec = b.spectral_norm_default().unwrap();
            gamma_sum += gamma_functional(tr, fro, spec).unwrap();
            tr_sum += tr;
            fro_sq_total += fro * fro;
            spec_total = spec_total.max(spec);
            tr_total += tr;
        }
        let gamma_block =
            gamma_functional(tr_total, fro_sq_total.sqrt(), spec_total).unwrap();
        assert!(gamma_block <= gamma_sum * (1.0 + 1e-12));
        assert!(gamma_sum <= kappa() * tr_sum * (1.0 + 1e-12));
    }
}
