use nalgebra::{DMatrix, DVector};
use paleomem::noise::{covariance_matrix, Memory, NoiseKind, NoiseModel};
use paleomem::sampler::*;
use paleomem::synthetic::{generate, SyntheticSpec};
use paleomem::{stats, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const TOL: f64 = 1e-8;

fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

/// Gaussian conditioning `x_u | x_o` in covariance form.
fn condition(mean: &DVector<f64>, cov: &DMatrix<f64>, u: &[usize], o: &[usize], obs: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let s_uu = cov.select_rows(u).select_columns(u);
    let s_uo = cov.select_rows(u).select_columns(o);
    let s_oo = cov.select_rows(o).select_columns(o);
    let m_u = DVector::from_iterator(u.len(), u.iter().map(|&i| mean[i]));
    let m_o = DVector::from_iterator(o.len(), o.iter().map(|&i| mean[i]));
    let inv = s_oo.try_inverse().unwrap();
    (&m_u + &s_uo * &inv * (obs - m_o), &s_uu - &s_uo * &inv * s_uo.transpose())
}

fn error_cov(kind: NoiseKind, param: f64, n: usize) -> DMatrix<f64> {
    covariance_matrix(&NoiseModel::new(Memory::from_kind(kind, param).unwrap(), 1.0).unwrap(), n).unwrap()
}

/// Regression `y = X c + sqrt(s2) e`, `e ~ N(0, R)`, prior `N(m, v I)`,
/// conditioned through the joint law of `(c, y)`.
fn regression_oracle(x: &DMatrix<f64>, y: &[f64], r: &DMatrix<f64>, s2: f64, m: &[f64], v: f64) -> (DVector<f64>, DMatrix<f64>) {
    let (p, n) = (x.ncols(), x.nrows());
    let mut mean = DVector::zeros(p + n);
    let mut cov = DMatrix::zeros(p + n, p + n);
    let m = DVector::from_column_slice(m);
    mean.rows_mut(0, p).copy_from(&m);
    mean.rows_mut(p, n).copy_from(&(x * &m));
    cov.view_mut((0, 0), (p, p)).copy_from(&(DMatrix::identity(p, p) * v));
    cov.view_mut((0, p), (p, n)).copy_from(&(x.transpose() * v));
    cov.view_mut((p, 0), (n, p)).copy_from(&(x * v));
    cov.view_mut((p, p), (n, n)).copy_from(&(x * x.transpose() * v + r * s2));
    let u: Vec<usize> = (0..p).collect();
    let o: Vec<usize> = (p..p + n).collect();
    condition(&mean, &cov, &u, &o, &DVector::from_column_slice(y))
}

fn toy_regression(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, c| if c == 0 { 1.0 } else { rng.sample(StandardNormal) });
    let y = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    (x, y)
}

#[test]
fn alpha_conditional_matches_dense_oracle() {
    let (a, rp) = toy_regression(5, 2, 1);
    let g = regression_conditional(&a, &rp, &Precision::Identity(5), 0.3, &[0.0, 1.0], 1.0).unwrap();
    let (m, c) = regression_oracle(&a, &rp, &DMatrix::identity(5, 5), 0.3, &[0.0, 1.0], 1.0);
    assert!((&g.mean - m).amax() < TOL);
    assert!(max_abs(&g.covariance(), &c) < TOL);
}

#[test]
fn beta_conditional_matches_dense_oracle() {
    let (x, t) = toy_regression(5, 4, 2);
    let g = regression_conditional(&x, &t, &Precision::Identity(5), 0.7, &[0.0, 1.0, 1.0, 1.0], 1.0).unwrap();
    let (m, c) = regression_oracle(&x, &t, &DMatrix::identity(5, 5), 0.7, &[0.0, 1.0, 1.0, 1.0], 1.0);
    assert!((&g.mean - m).amax() < TOL);
    assert!(max_abs(&g.covariance(), &c) < TOL);
}

#[test]
fn regression_conditional_with_memory_matches_oracle() {
    for (kind, param) in [(NoiseKind::Fgn, 0.8), (NoiseKind::Ar1, -0.4)] {
        let (x, y) = toy_regression(12, 3, 3);
        let prec = Precision::from_memory(Memory::from_kind(kind, param).unwrap(), 12).unwrap();
        let g = regression_conditional(&x, &y, &prec, 0.5, &[0.2, 0.0, 1.0], 2.0).unwrap();
        let (m, c) = regression_oracle(&x, &y, &error_cov(kind, param, 12), 0.5, &[0.2, 0.0, 1.0], 2.0);
        assert!((&g.mean - m).amax() < TOL, "{kind}");
        assert!(max_abs(&g.covariance(), &c) < TOL, "{kind}");
    }
}

#[test]
fn variance_conditional_matches_conjugate_algebra() {
    let r = [0.3, -1.2, 0.8, 0.1, -0.4];
    let q: f64 = r.iter().map(|v| v * v).sum();
    let ig = variance_conditional(Precision::Identity(5).quad(&r), 5, 2.0, 0.1).unwrap();
    assert_eq!(ig.shape, 2.0 + 2.5);
    assert!((ig.rate - (0.1 + q / 2.0)).abs() < 1e-15);
    // unnormalized prior x likelihood against the inverse-gamma density
    let post = |s2: f64| -(2.0 + 1.0) * s2.ln() - 0.1 / s2 - 2.5 * s2.ln() - q / (2.0 * s2);
    let law = statrs::distribution::InverseGamma::new(ig.shape, ig.rate).unwrap();
    for (a, b) in [(0.2, 0.5), (0.5, 1.7), (0.05, 3.0)] {
        let lhs = post(a) - post(b);
        let rhs = law.ln_pdf(a) - law.ln_pdf(b);
        assert!((lhs - rhs).abs() < TOL);
    }
}

/// Joint Gaussian law of `(T, RP)` and the conditional of `T_u`.
fn latent_oracle(
    alpha: [f64; 2],
    s: (f64, f64),
    mem: ((NoiseKind, f64), (NoiseKind, f64)),
    mu: &[f64],
    rp: &[f64],
    known: &[usize],
    t_known: &[f64],
    unknown: &[usize],
) -> (DVector<f64>, DMatrix<f64>) {
    let n = mu.len();
    let (sp2, st2) = s;
    let c = error_cov(mem.1 .0, mem.1 .1, n) * st2;
    let h = error_cov(mem.0 .0, mem.0 .1, n) * sp2;
    let mut mean = DVector::zeros(2 * n);
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        mean[i] = mu[i];
        mean[n + i] = alpha[0] + alpha[1] * mu[i];
    }
    cov.view_mut((0, 0), (n, n)).copy_from(&c);
    cov.view_mut((0, n), (n, n)).copy_from(&(&c * alpha[1]));
    cov.view_mut((n, 0), (n, n)).copy_from(&(&c * alpha[1]));
    cov.view_mut((n, n), (n, n)).copy_from(&(&c * alpha[1] * alpha[1] + h));
    let o: Vec<usize> = known.iter().copied().chain(n..2 * n).collect();
    let obs = DVector::from_iterator(o.len(), t_known.iter().chain(rp).copied());
    condition(&mean, &cov, unknown, &o, &obs)
}

fn latent_case(n: usize, unknown: Vec<usize>, mem: ((NoiseKind, f64), (NoiseKind, f64)), seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let known: Vec<usize> = (0..n).filter(|i| !unknown.contains(i)).collect();
    let mu: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let rp: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let t_known: Vec<f64> = known.iter().map(|_| rng.sample(StandardNormal)).collect();
    let (alpha, s) = ([0.3, 0.9], (0.4, 0.25));
    let pp = Precision::from_memory(Memory::from_kind(mem.0 .0, mem.0 .1).unwrap(), n).unwrap();
    let pk = Precision::from_memory(Memory::from_kind(mem.1 .0, mem.1 .1).unwrap(), n).unwrap();
    let g = latent_conditional(&LatentInputs {
        proxy_precision: &pp,
        process_precision: &pk,
        sigma_p2: s.0,
        sigma_t2: s.1,
        alpha,
        process_mean: &mu,
        rp: &rp,
        known: &known,
        t_known: &t_known,
        unknown: &unknown,
    })
    .unwrap();
    let (m, c) = latent_oracle(alpha, s, mem, &mu, &rp, &known, &t_known, &unknown);
    assert!((&g.mean - m).amax() < TOL, "{mem:?}");
    assert!(max_abs(&g.covariance(), &c) < TOL, "{mem:?}");
}

const WHITE: (NoiseKind, f64) = (NoiseKind::White, 0.5);

#[test]
fn latent_conditional_matches_oracle_on_five_years() {
    latent_case(5, vec![0, 1, 2], (WHITE, WHITE), 4);
    latent_case(5, vec![1, 3], (WHITE, WHITE), 5);
}

#[test]
fn latent_conditional_matches_oracle_on_eight_year_window() {
    latent_case(14, (0..8).collect(), (WHITE, WHITE), 6);
}

#[test]
fn latent_conditional_with_memory_matches_oracle() {
    latent_case(14, (0..8).collect(), ((NoiseKind::Fgn, 0.75), (NoiseKind::Fgn, 0.6)), 7);
    latent_case(10, vec![0, 1, 2, 7], ((NoiseKind::Ar1, 0.5), (NoiseKind::Fgn, 0.85)), 8);
}

#[test]
fn alpha_concentrates_as_proxy_noise_vanishes() {
    let (a, _) = toy_regression(30, 2, 9);
    let rp: Vec<f64> = a.column(1).iter().map(|t| 0.4 + 1.3 * t).collect();
    let g = regression_conditional(&a, &rp, &Precision::Identity(30), 1e-12, &[0.0, 1.0], 1.0).unwrap();
    let d = g.sample(&mut ChaCha8Rng::seed_from_u64(1));
    assert!((d[0] - 0.4).abs() < 1e-3 && (d[1] - 1.3).abs() < 1e-3);
}

fn limit_inputs(n: usize, sp2: f64, st2: f64, a1: f64) -> (Vec<f64>, Vec<f64>, GaussianConditional) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mu: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let t: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let rp: Vec<f64> = t.iter().map(|v| 0.2 + a1 * v).collect();
    let known: Vec<usize> = (n / 2..n).collect();
    let unknown: Vec<usize> = (0..n / 2).collect();
    let t_known: Vec<f64> = known.iter().map(|&i| t[i]).collect();
    let pp = Precision::Identity(n);
    let g = latent_conditional(&LatentInputs {
        proxy_precision: &pp,
        process_precision: &pp,
        sigma_p2: sp2,
        sigma_t2: st2,
        alpha: [0.2, a1],
        process_mean: &mu,
        rp: &rp,
        known: &known,
        t_known: &t_known,
        unknown: &unknown,
    })
    .unwrap();
    (mu, rp, g)
}

#[test]
fn latent_follows_proxy_as_proxy_noise_vanishes() {
    let (_, rp, g) = limit_inputs(10, 1e-12, 1.0, 0.8);
    let d = g.sample(&mut ChaCha8Rng::seed_from_u64(2));
    for i in 0..5 {
        assert!((d[i] - (rp[i] - 0.2) / 0.8).abs() < 1e-3);
    }
}

#[test]
fn latent_follows_process_mean_as_process_noise_vanishes() {
    let (mu, _, g) = limit_inputs(10, 1.0, 1e-12, 0.0);
    let d = g.sample(&mut ChaCha8Rng::seed_from_u64(3));
    for i in 0..5 {
        assert!((d[i] - mu[i]).abs() < 1e-3);
    }
}

#[test]
fn empty_design_recovers_prior() {
    let x = DMatrix::<f64>::zeros(0, 2);
    let g = regression_conditional(&x, &[], &Precision::Identity(0), 1.0, &[0.0, 1.0], 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws: Vec<DVector<f64>> = (0..5000).map(|_| g.sample(&mut rng)).collect();
    for (j, m) in [0.0, 1.0].into_iter().enumerate() {
        let v: Vec<f64> = draws.iter().map(|d| d[j]).collect();
        let se = stats::sample_sd(&v) / (v.len() as f64).sqrt();
        assert!((stats::mean(&v) - m).abs() < 3.0 * se);
        assert!((stats::sample_variance(&v) - 1.0).abs() < 0.06);
    }
}

#[test]
fn inverse_gamma_prior_draws() {
    // IG(2, 0.1) has no finite variance, so its distribution function is checked
    let ig = variance_conditional(0.0, 0, 2.0, 0.1).unwrap();
    let law = statrs::distribution::InverseGamma::new(2.0, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 10_000;
    let draws: Vec<f64> = (0..n).map(|_| ig.sample(&mut rng)).collect();
    for x in [0.02, 0.05, 0.1, 0.3] {
        let p = law.cdf(x);
        let emp = draws.iter().filter(|&&d| d <= x).count() as f64 / n as f64;
        assert!((emp - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "x={x}: {emp} vs {p}");
    }
    // moments where they exist
    let ig = InverseGamma { shape: 9.0, rate: 2.0 };
    let draws: Vec<f64> = (0..n).map(|_| ig.sample(&mut rng)).collect();
    let se = (ig.variance() / n as f64).sqrt();
    assert!((stats::mean(&draws) - ig.mean()).abs() < 3.0 * se);
    assert!((ig.mean() - 0.25).abs() < 1e-15);
}

#[test]
fn variance_posterior_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let r: Vec<f64> = (0..2000).map(|_| 0.5f64.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
    let ig = variance_conditional(Precision::Identity(2000).quad(&r), 2000, 2.0, 0.1).unwrap();
    assert!((ig.mean() - 0.5).abs() < 0.05);
    assert!(matches!(variance_conditional(-1.0, 3, 2.0, 0.1), Err(Error::NumericalDegeneracy(_))));
}

#[test]
fn forcing_transforms() {
    let (v, c) = transform_forcings(&[1, 2, 3], &[0.0, -(std::f64::consts::E - 1.0), -0.5], &[1.0, 280.0, 1.0]).unwrap();
    assert_eq!(v[0], 0.0);
    assert!((v[1] - 1.0).abs() < 1e-15);
    assert_eq!(c[0], 0.0);
    let err = transform_forcings(&[1850, 1851], &[0.0, 0.0], &[280.0, 0.0]).unwrap_err();
    assert!(matches!(&err, Error::ParameterDomain(m) if m.contains("1851")), "{err}");
    assert!(transform_forcings(&[7], &[1.5], &[1.0]).is_err());
}

#[test]
fn same_point_proposal_has_unit_ratio() {
    let w = TruncatedWalk::new(0.0, 1.0, 0.02);
    assert_eq!(mh::log_acceptance(&w, 0.37, -12.5, 0.37, -12.5), 0.0);
}

/// Truncated-walk MH on a target that is 1 on `(0, 1/2)` and 3 on `[1/2, 1)`.
#[test]
fn mh_satisfies_detailed_balance_on_two_level_target() {
    let w = TruncatedWalk::new(0.0, 1.0, 0.3);
    let log_pi = |x: f64| Ok(if x < 0.5 { 0.0 } else { 3f64.ln() });
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let steps = 100_000;
    let mut x = 0.25;
    let mut lx = 0.0;
    let mut states = Vec::with_capacity(steps);
    for _ in 0..steps {
        let out = mh_step(&w, x, lx, log_pi, &mut rng).unwrap();
        x = out.value;
        lx = out.log_target;
        states.push(x);
    }

    // predicted low-to-high transition probability by quadrature
    let nrm = Normal::standard();
    let mass = |x: f64| nrm.cdf((1.0 - x) / 0.3) - nrm.cdf(-x / 0.3);
    let g = 400;
    let h = 0.5 / g as f64;
    let mut p12 = 0.0;
    for i in 0..g {
        let xi = (i as f64 + 0.5) * h;
        for j in 0..g {
            let yj = 0.5 + (j as f64 + 0.5) * h;
            let q = nrm.pdf((yj - xi) / 0.3) / (0.3 * mass(xi));
            let acc = (3.0 * mass(xi) / mass(yj)).min(1.0);
            p12 += q * acc * h * h / 0.5;
        }
    }

    // batch means for serially correlated indicators
    let batch = 1000;
    let batches = steps / batch;
    let (mut occ, mut flow) = (Vec::new(), Vec::new());
    for b in 0..batches {
        let s = &states[b * batch..(b + 1) * batch];
        occ.push(s.iter().filter(|&&v| v >= 0.5).count() as f64 / batch as f64);
        let low = s[..batch - 1].iter().filter(|&&v| v < 0.5).count() as f64;
        let up = s.windows(2).filter(|p| p[0] < 0.5 && p[1] >= 0.5).count() as f64;
        flow.push(up / low.max(1.0));
    }
    let check = |v: &[f64], target: f64, what: &str| {
        let se = stats::sample_sd(v) / (v.len() as f64).sqrt();
        let m = stats::mean(v);
        assert!((m - target).abs() < 3.0 * se, "{what}: {m} vs {target} (se {se})");
    };
    check(&occ, 0.75, "upper occupancy");
    check(&flow, p12, "low-to-high transition");
    // balance: pi_low P(low -> high) = pi_high P(high -> low)
    let down: f64 = states.windows(2).filter(|p| p[0] >= 0.5 && p[1] < 0.5).count() as f64;
    let high: f64 = states[..steps - 1].iter().filter(|&&v| v >= 0.5).count() as f64;
    let p21 = down / high;
    assert!((0.25 * p12 - 0.75 * p21).abs() < 0.01 * p12);
}

fn synthetic_data(spec: SyntheticSpec, forcings: bool) -> ModelData {
    generate(&spec).unwrap().model_data(forcings).unwrap()
}

fn small_spec(process: NoiseKind, proxy: NoiseKind, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        prediction_years: 60,
        calibration_years: 60,
        proxy_error: proxy,
        process_error: process,
        seed,
        ..SyntheticSpec::default()
    }
}

fn settings(iterations: usize, burn_in: usize, chains: usize, seed: u64) -> ChainSettings {
    ChainSettings { iterations, burn_in, chains, seed, ..ChainSettings::default() }
}

#[test]
fn runs_are_deterministic() {
    let data = synthetic_data(small_spec(NoiseKind::Fgn, NoiseKind::Fgn, 1), true);
    let cfg = ScenarioConfig::new(Scenario::A, settings(300, 100, 2, 7)).unwrap();
    let a = run_chain(&cfg, &data, &Priors::default()).unwrap();
    let b = run_chain(&cfg, &data, &Priors::default()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.chains[0].parameters, a.chains[1].parameters);
    assert_eq!(a.chains[0].parameters.nrows(), 200);
    assert_eq!(a.chains[0].latent.shape(), (200, 60));
}

#[test]
fn white_scenarios_never_evaluate_memory() {
    let data = synthetic_data(small_spec(NoiseKind::White, NoiseKind::White, 2), true);
    for label in [Scenario::E, Scenario::H] {
        let cfg = ScenarioConfig::new(label, settings(200, 50, 1, 3)).unwrap();
        let d = run_chain(&cfg, &data, &Priors::default()).unwrap();
        assert_eq!(d.chains[0].memory_evaluations, 0, "{label}");
        assert!(d.acceptance_rates().is_empty());
        for name in ["H", "K"] {
            assert!(d.parameter(name).unwrap().iter().all(|&v| v == WHITE_MEMORY));
        }
    }
}

#[test]
fn forcings_off_scenarios_drop_forcing_coefficients() {
    let data = synthetic_data(small_spec(NoiseKind::White, NoiseKind::White, 3), true);
    for label in [Scenario::F, Scenario::G, Scenario::H] {
        let cfg = ScenarioConfig::new(label, settings(120, 20, 1, 1)).unwrap();
        let d = run_chain(&cfg, &data, &Priors::default()).unwrap();
        assert_eq!(d.parameter_names.len(), 7);
        for b in ["beta1", "beta2", "beta3"] {
            assert!(d.column_index(b).is_err(), "{label} has {b}");
        }
        assert_eq!(d.chains[0].parameters.ncols(), 7);
    }
    let cfg = ScenarioConfig::new(Scenario::A, settings(120, 20, 1, 1)).unwrap();
    assert_eq!(cfg.parameter_names().len(), 10);
}

#[test]
fn kept_draws_satisfy_state_invariants() {
    for (label, kind) in [(Scenario::A, NoiseKind::Fgn), (Scenario::D, NoiseKind::Ar1)] {
        let data = synthetic_data(small_spec(kind, kind, 4), true);
        let cfg = ScenarioConfig::new(label, settings(250, 50, 1, 4)).unwrap();
        let d = run_chain(&cfg, &data, &Priors::default()).unwrap();
        let p = d.pooled_parameters();
        let names = &d.parameter_names;
        let n = names.len();
        for row in p.row_iter() {
            assert!(row[n - 4] > 0.0 && row[n - 3] > 0.0);
            let (lo, hi) = kind.param_bounds().unwrap();
            assert!(row[n - 2] > lo && row[n - 2] < hi && row[n - 1] > lo && row[n - 1] < hi);
        }
        for r in d.acceptance_rates().values() {
            assert!((0.0..=1.0).contains(r));
        }
    }
}

#[test]
fn configuration_errors_precede_sampling() {
    assert!(matches!(ScenarioConfig::new(Scenario::A, settings(10, 10, 1, 1)), Err(Error::Config(_))));
    assert!(matches!(ScenarioConfig::new(Scenario::A, settings(10, 5, 0, 1)), Err(Error::Config(_))));
    let mut cfg = ScenarioConfig::new(Scenario::E, settings(10, 5, 1, 1)).unwrap();
    cfg.proxy_error = NoiseKind::Fgn;
    let data = synthetic_data(small_spec(NoiseKind::White, NoiseKind::White, 5), false);
    assert!(matches!(run_chain(&cfg, &data, &Priors::default()), Err(Error::Config(_))));
    let cfg = ScenarioConfig::new(Scenario::E, settings(10, 5, 1, 1)).unwrap();
    assert!(matches!(run_chain(&cfg, &data, &Priors::default()), Err(Error::Config(_))));
    assert_eq!("g".parse::<Scenario>().unwrap(), Scenario::G);
    assert_eq!(Scenario::B.structure(), (NoiseKind::Fgn, NoiseKind::Ar1, true));
    assert_eq!(Scenario::D.structure(), (NoiseKind::Ar1, NoiseKind::Ar1, true));
    assert_eq!(Scenario::H.structure(), (NoiseKind::White, NoiseKind::White, false));
}

#[test]
fn adapted_steps_land_in_acceptance_band() {
    let spec = SyntheticSpec { prediction_years: 150, calibration_years: 150, seed: 8, ..SyntheticSpec::default() };
    let data = synthetic_data(spec, true);
    let chain = ChainSettings { adapt_steps: true, ..settings(2000, 1000, 1, 8) };
    let d = run_chain(&ScenarioConfig::new(Scenario::A, chain).unwrap(), &data, &Priors::default()).unwrap();
    for (name, r) in d.acceptance_rates() {
        assert!((0.1..=0.7).contains(&r), "{name}: {r}");
    }
}

#[test]
fn white_scenario_intervals_cover_truth() {
    let names = ["alpha0", "alpha1", "beta0", "beta1", "beta2", "beta3", "sigma_p2", "sigma_t2"];
    let mut hits = [0usize; 8];
    let reps = 20;
    for rep in 0..reps {
        let spec = SyntheticSpec {
            prediction_years: 100,
            calibration_years: 100,
            proxy_error: NoiseKind::White,
            process_error: NoiseKind::White,
            seed: 100 + rep,
            ..SyntheticSpec::default()
        };
        let truth = [
            spec.alpha[0],
            spec.alpha[1],
            spec.beta[0],
            spec.beta[1],
            spec.beta[2],
            spec.beta[3],
            spec.sigma_p * spec.sigma_p,
            spec.sigma_t * spec.sigma_t,
        ];
        let data = synthetic_data(spec, true);
        let cfg = ScenarioConfig::new(Scenario::E, settings(2000, 500, 1, rep)).unwrap();
        let d = run_chain(&cfg, &data, &Priors::default()).unwrap();
        for (j, name) in names.iter().enumerate() {
            let v = d.parameter(name).unwrap();
            let (lo, hi) = (stats::quantile(&v, 0.025), stats::quantile(&v, 0.975));
            hits[j] += usize::from(lo <= truth[j] && truth[j] <= hi);
        }
    }
    for (name, h) in names.iter().zip(hits) {
        assert!(h * 5 >= reps as usize * 4, "{name}: {h}/{reps}");
    }
}

#[test]
fn process_memory_is_recovered() {
    let spec = SyntheticSpec { k: 0.75, seed: 21, ..SyntheticSpec::default() };
    let data = synthetic_data(spec, true);
    let cfg = ScenarioConfig::new(Scenario::A, settings(3000, 1000, 1, 21)).unwrap();
    let d = run_chain(&cfg, &data, &Priors::default()).unwrap();
    let med = stats::quantile(&d.parameter("K").unwrap(), 0.5);
    assert!((med - 0.75).abs() < 0.1, "median K {med}");
}
