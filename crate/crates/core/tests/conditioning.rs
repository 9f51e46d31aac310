mod common;

use std::sync::Arc;

use common::{circulant, mean_se, rng, transfer_matrix_covariance, DirectSampler, SubspaceSampler};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use optpred::conditioning::{
    conditional_cubic, wick_moment, ConstrainedPrior, Field, GaussianMoments, Kernel, KernelRepr, KernelSet,
    MomentKind, StateIndex,
};
use optpred::mcmc::{run_constrained_chain, ChainConfig, ConstraintMode, ConstraintSystem, GaussianTarget};
use optpred::NumericalPolicy;

fn gaussian_weights(n: usize, center: usize, width: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|j| {
            let d = center.abs_diff(j).min(n - center.abs_diff(j)) as f64;
            (-(d * d) / (width * width)).exp()
        })
        .collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

fn kernels(n: usize, centers: &[usize], width: f64, components: usize) -> KernelSet {
    let mut ks = Vec::new();
    for component in 0..components {
        for &c in centers {
            ks.push(Kernel {
                component,
                center: c as f64,
                repr: KernelRepr::Grid(gaussian_weights(n, c, width)),
            });
        }
    }
    KernelSet::grid(ks, &NumericalPolicy::default()).unwrap()
}

/// n = 8 scalar prior with a nonzero mean and a smooth circulant covariance.
fn small_prior() -> GaussianMoments {
    let n = 8;
    let c: Vec<f64> = (0..n)
        .map(|r| {
            let d = r.min(n - r) as f64;
            (-(d * d) / 4.5).exp() + if r == 0 { 0.1 } else { 0.0 }
        })
        .collect();
    let mean = Field::new(vec![(0..n).map(|j| 0.1 * (j as f64 - 3.0)).collect()], 1.0).unwrap();
    GaussianMoments::new(mean, circulant(&c), &NumericalPolicy::default()).unwrap()
}

struct Setup {
    base: Arc<ConstrainedPrior>,
    oracle: SubspaceSampler,
    values: Vec<f64>,
}

fn small_setup() -> Setup {
    let prior = small_prior();
    let ks = kernels(8, &[1, 5], 1.5, 1);
    let g = ks.matrix(1).unwrap();
    let values = vec![0.7, -0.4];
    let oracle = SubspaceSampler::new(
        &prior.mean().flatten(),
        prior.covariance(),
        &g,
        &DVector::from_column_slice(&values),
    );
    let base = ConstrainedPrior::new(prior, ks).unwrap();
    Setup { base, oracle, values }
}

#[test]
fn precision_form_oracle_agrees_with_regression_formulas() {
    let s = small_setup();
    let cond = s.base.condition(&s.values).unwrap();
    let mean_err = (cond.mean().flatten() - s.oracle.mean()).amax();
    let cov_err = (cond.covariance() - s.oracle.covariance()).amax();
    assert!(mean_err < 1e-12, "{mean_err}");
    assert!(cov_err < 1e-12, "{cov_err}");
}

#[test]
fn conditional_mean_matches_penalty_sampled_draws() {
    let s = small_setup();
    let cond = s.base.condition(&s.values).unwrap();
    let prior = s.base.prior();
    let delta = 0.01;
    let g = s.base.kernel_matrix().clone();
    // The penalised law conditions on V observed with noise variance Δ²/2;
    // its mean differs from the exact one by a computable amount.
    let cov = prior.covariance();
    let noisy = &g * cov * g.transpose() + DMatrix::identity(2, 2) * (delta * delta / 2.0);
    let mu = prior.mean().flatten();
    let resid = DVector::from_column_slice(&s.values) - &g * &mu;
    let penalised_mean = &mu + cov * g.transpose() * noisy.cholesky().unwrap().solve(&resid);
    let bias = (&penalised_mean - cond.mean().flatten()).amax();

    let constraints = ConstraintSystem::new(
        g,
        DVector::from_column_slice(&s.values),
        ConstraintMode::Penalty { delta },
        &NumericalPolicy::default(),
    )
    .unwrap();
    let target = GaussianTarget::from_covariance(mu, cov).unwrap();
    let config = ChainConfig {
        samples: 1_000_000,
        burn_in: 20_000,
        thin: 1,
        proposal_width: 0.05,
        adapt: true,
        target_acceptance: 0.5,
        seed: 11,
    };
    let run = run_constrained_chain(target, &constraints, &config).unwrap();
    let est = run.samples.mean_estimates(100);
    let want = cond.mean().flatten();
    for (j, e) in est.iter().enumerate() {
        assert!(bias < 0.2 * e.std_error, "penalty bias {bias} not negligible");
        assert!(
            (e.mean - want[j]).abs() < 3.0 * e.std_error,
            "site {j}: {} ± {} vs {}",
            e.mean,
            e.std_error,
            want[j]
        );
    }
}

#[test]
fn conditional_covariance_matches_constrained_draws() {
    let s = small_setup();
    let cond = s.base.condition(&s.values).unwrap();
    let mean = cond.mean().flatten();
    let mut r = rng(5);
    let draws: Vec<DVector<f64>> = (0..200_000).map(|_| s.oracle.draw(&mut r)).collect();
    let want = cond.covariance();
    for i in 0..8 {
        for j in i..8 {
            let prods: Vec<f64> = draws.iter().map(|u| (u[i] - mean[i]) * (u[j] - mean[j])).collect();
            let (m, se) = mean_se(&prods);
            assert!(
                (m - want[(i, j)]).abs() < 3.0 * se.max(1e-15),
                "({i},{j}): {m} ± {se} vs {}",
                want[(i, j)]
            );
        }
    }
}

#[test]
fn conditional_cubic_matches_constrained_draws_on_the_lattice_prior() {
    let n = 16;
    let h = 1.0 / n as f64;
    let c = transfer_matrix_covariance(n, h, 0.0, 1.0, 2.0, 400);
    let block = circulant(&c);
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    cov.view_mut((0, 0), (n, n)).copy_from(&block);
    cov.view_mut((n, n), (n, n)).copy_from(&block);
    let policy = NumericalPolicy::default();
    let prior = GaussianMoments::zero_mean(2, n, h, cov.clone(), &policy).unwrap();
    let ks = kernels(n, &[0, 8], 4.0, 2);
    let g = ks.matrix(2).unwrap();
    let values = vec![0.45, -0.2, 0.1, 0.35];
    let oracle = SubspaceSampler::new(&DVector::zeros(2 * n), &cov, &g, &DVector::from_column_slice(&values));
    let base = ConstrainedPrior::new(prior, ks).unwrap();
    let cond = base.condition(&values).unwrap();

    let mut r = rng(9);
    let draws: Vec<DVector<f64>> = (0..200_000).map(|_| oracle.draw(&mut r)).collect();
    for component in 0..2 {
        for site in [0, 3, 8, 12] {
            let cubes: Vec<f64> = draws.iter().map(|u| u[component * n + site].powi(3)).collect();
            let (m, se) = mean_se(&cubes);
            let want = conditional_cubic(&cond, site, component);
            assert!((m - want).abs() < 3.0 * se, "({component},{site}): {m} ± {se} vs {want}");
        }
    }
}

#[test]
fn wick_moments_match_direct_draws() {
    let prior = small_prior();
    let cov = prior.covariance().clone();
    let zero = Field::zeros(1, 8, 1.0).unwrap();
    let sampler = DirectSampler::new(DVector::zeros(8), &cov);
    let mut r = rng(21);
    let draws: Vec<DVector<f64>> = (0..1_000_000).map(|_| sampler.draw(&mut r)).collect();
    let cases: [&[usize]; 6] = [
        &[0, 3],
        &[2, 2, 2, 2],
        &[0, 1, 4, 6],
        &[1, 1, 5, 5],
        &[0, 0, 0, 2, 4, 7],
        &[3, 3, 3, 3, 3, 3],
    ];
    for sites in cases {
        let idx: Vec<StateIndex> = sites.iter().map(|&s| StateIndex::new(0, s)).collect();
        let want = wick_moment(&cov, &zero, &idx, MomentKind::Central).unwrap();
        let prods: Vec<f64> = draws.iter().map(|u| sites.iter().map(|&s| u[s]).product()).collect();
        let (m, se) = mean_se(&prods);
        assert!((m - want).abs() < 4.0 * se, "{sites:?}: {m} ± {se} vs {want}");
    }
}

#[test]
fn constraint_reproduction_linearity_and_annihilation() {
    let s = small_setup();
    let g = s.base.kernel_matrix().clone();
    let mu = s.base.prior().mean().flatten();
    let v1 = [0.3, 1.2];
    let v2 = [-0.8, 0.05];
    let sum = [v1[0] + v2[0], v1[1] + v2[1]];
    let m1 = s.base.condition(&v1).unwrap().mean().flatten();
    let m2 = s.base.condition(&v2).unwrap().mean().flatten();
    let c12 = s.base.condition(&sum).unwrap();
    // Linearity: with a nonzero prior mean the unconditional values `G μ`
    // are subtracted once on the left and twice on the right.
    let lhs = c12.mean().flatten() - &mu;
    let rhs = (&m1 - &mu) + (&m2 - &mu);
    let shift = s.base.coefficient_matrix() * (&g * &mu);
    assert!((lhs - rhs - shift).amax() < 1e-12);
    for v in [&v1[..], &v2[..], &sum[..]] {
        let m = s.base.condition(v).unwrap().mean().flatten();
        let reproduced = &g * m;
        for (a, b) in reproduced.iter().zip(v) {
            assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
        }
    }
    let c_norm = s.base.prior().covariance().amax();
    assert!((&g * s.base.covariance()).amax() < 1e-10 * c_norm);
    let eig = SymmetricEigen::new(s.base.covariance().clone());
    assert!(eig.eigenvalues.min() > -1e-10 * c_norm);
}

#[test]
fn covariance_is_shared_between_values() {
    let s = small_setup();
    let a = s.base.condition(&[0.1, 0.2]).unwrap();
    let b = s.base.condition(&[-3.0, 7.0]).unwrap();
    assert!(std::ptr::eq(a.covariance(), b.covariance()));
}
