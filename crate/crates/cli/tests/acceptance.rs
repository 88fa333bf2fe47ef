//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use paleomem::memtest::{davies_harte_test, default_bandwidth, local_whittle, robinson_test};
use paleomem::noise::*;
use paleomem::sampler::*;
use paleomem::stats;
use paleomem::synthetic::{generate, SyntheticSpec};
use paleomem::validation::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn white(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn dense_loglik(x: &[f64], cov: &DMatrix<f64>) -> f64 {
    let chol = cov.clone().cholesky().expect("positive definite");
    let z = chol.l().solve_lower_triangular(&DVector::from_column_slice(x)).unwrap();
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    -0.5 * (x.len() as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared())
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for h in [0.55, 0.7, 0.9] {
        for n in 1..=64 {
            let cov = covariance_matrix(&NoiseModel::fgn(h, 1.0).unwrap(), n).unwrap();
            worst = worst.max((cov.iter().sum::<f64>() - (n as f64).powf(2.0 * h)).abs());
        }
    }
    let (paths, n, h) = (200, 512, 0.8);
    let emb = CirculantEmbedding::new(&Memory::Fgn { hurst: h }, n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut est = vec![Vec::new(); 6];
    for _ in 0..paths {
        let x = emb.sample(&mut rng);
        for (k, acc) in est.iter_mut().enumerate() {
            acc.push((0..n - k).map(|t| x[t] * x[t + k]).sum::<f64>() / (n - k) as f64);
        }
    }
    let mut max_z = 0.0f64;
    for (k, e) in est.iter().enumerate() {
        let se = stats::sample_sd(e) / (paths as f64).sqrt();
        max_z = max_z.max((stats::mean(e) - fgn_autocorrelation(h, k)).abs() / se);
    }
    outcome(
        worst < 1e-9 && max_z < 3.0,
        format!("partial-sum error {worst:.1e} (< 1e-9), acvf lags 0-5 max |z| {max_z:.2} (< 3)"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = rng.random_range(1..=256usize);
        let scale = rng.random_range(0.2..3.0);
        let model = match case % 3 {
            0 => NoiseModel::fgn(rng.random_range(0.05..0.95), scale).unwrap(),
            1 => NoiseModel::ar1(rng.random_range(-0.9..0.9), scale).unwrap(),
            _ => NoiseModel::white(scale).unwrap(),
        };
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = acvf(&model, n - 1).unwrap();
        let fast = loglik_durbin_levinson(&x, &g).unwrap();
        worst = worst.max((fast - dense_loglik(&x, &g.toeplitz(n))).abs());
    }
    outcome(worst < 1e-8, format!("max |DL - dense| {worst:.1e} over 100 cases (< 1e-8)"))
}

fn criterion_3() -> Outcome {
    let n = 2048;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut rob, mut dh) = (0, 0);
    for _ in 0..200 {
        let x = white(n, &mut rng);
        rob += usize::from(robinson_test(&x, default_bandwidth(n)).unwrap().p_value < 0.05);
        dh += usize::from(davies_harte_test(&x).unwrap().p_value < 0.05);
    }
    let mut power = 0;
    for r in 0..100 {
        let x = sample_fgn(0.8, 1000, 3000 + r).unwrap();
        power += usize::from(robinson_test(&x, default_bandwidth(1000)).unwrap().p_value < 0.05);
    }
    let size_ok = |k: usize| (4..=20).contains(&k);
    outcome(
        size_ok(rob) && size_ok(dh) && power >= 80,
        format!(
            "size robinson {:.1}%, davies-harte {:.1}% (in [2%, 10%]); power {power}% (>= 80%)",
            rob as f64 / 2.0,
            dh as f64 / 2.0
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut meds = Vec::new();
    let mut ok = true;
    for h in [0.6, 0.75, 0.9] {
        let est: Vec<f64> = (0..100)
            .map(|r| local_whittle(&sample_fgn(h, 2000, 4000 + r).unwrap(), default_bandwidth(2000)).unwrap())
            .collect();
        let med = stats::quantile(&est, 0.5);
        ok &= (med - h).abs() <= 0.08;
        meds.push(format!("{h}->{med:.3}"));
    }
    let mut worst = 0.0f64;
    for (seed, c) in [(1, 1e-3), (2, 0.5), (3, 7.0), (4, 1e4)] {
        let x = sample_fgn(0.7, 1000, seed).unwrap();
        let y: Vec<f64> = x.iter().map(|v| c * v).collect();
        let m = default_bandwidth(1000);
        worst = worst.max((local_whittle(&x, m).unwrap() - local_whittle(&y, m).unwrap()).abs());
    }
    ok &= worst <= 1e-12;
    outcome(ok, format!("medians {} (within 0.08); scale invariance {worst:.1e} (<= 1e-12)", meds.join(", ")))
}

fn condition(mean: &DVector<f64>, cov: &DMatrix<f64>, u: &[usize], o: &[usize], obs: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let s_uo = cov.select_rows(u).select_columns(o);
    let inv = cov.select_rows(o).select_columns(o).try_inverse().unwrap();
    let m_u = DVector::from_iterator(u.len(), u.iter().map(|&i| mean[i]));
    let m_o = DVector::from_iterator(o.len(), o.iter().map(|&i| mean[i]));
    (
        &m_u + &s_uo * &inv * (obs - m_o),
        cov.select_rows(u).select_columns(u) - &s_uo * &inv * s_uo.transpose(),
    )
}

fn regression_gap(x: &DMatrix<f64>, y: &[f64], s2: f64, m: &[f64]) -> f64 {
    let (p, n) = (x.ncols(), x.nrows());
    let g = regression_conditional(x, y, &Precision::Identity(n), s2, m, 1.0).unwrap();
    let mv = DVector::from_column_slice(m);
    let mut mean = DVector::zeros(p + n);
    mean.rows_mut(0, p).copy_from(&mv);
    mean.rows_mut(p, n).copy_from(&(x * &mv));
    let mut cov = DMatrix::zeros(p + n, p + n);
    cov.view_mut((0, 0), (p, p)).copy_from(&DMatrix::identity(p, p));
    cov.view_mut((0, p), (p, n)).copy_from(&x.transpose());
    cov.view_mut((p, 0), (n, p)).copy_from(x);
    cov.view_mut((p, p), (n, n)).copy_from(&(x * x.transpose() + DMatrix::identity(n, n) * s2));
    let (om, oc) = condition(&mean, &cov, &(0..p).collect::<Vec<_>>(), &(p..p + n).collect::<Vec<_>>(), &DVector::from_column_slice(y));
    (&g.mean - om).amax().max((g.covariance() - oc).amax())
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 5;
    let t = white(n, &mut rng);
    let rp: Vec<f64> = t.iter().map(|v| 0.2 + 0.8 * v + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    let a = DMatrix::from_fn(n, 2, |r, c| if c == 0 { 1.0 } else { t[r] });
    let alpha = regression_gap(&a, &rp, 0.09, &[0.0, 1.0]);
    let x = DMatrix::from_fn(n, 4, |_, c| if c == 0 { 1.0 } else { rng.sample(StandardNormal) });
    let beta = regression_gap(&x, &t, 0.04, &[0.0, 1.0, 1.0, 1.0]);

    let q: f64 = rp.iter().zip(&t).map(|(r, t)| (r - 0.2 - 0.8 * t).powi(2)).sum();
    let ig = variance_conditional(Precision::Identity(n).quad(&rp.iter().zip(&t).map(|(r, t)| r - 0.2 - 0.8 * t).collect::<Vec<_>>()), n, 2.0, 0.1).unwrap();
    let law = statrs::distribution::InverseGamma::new(2.0 + n as f64 / 2.0, 0.1 + q / 2.0).unwrap();
    let post = |s: f64| -(2.0 + 1.0 + n as f64 / 2.0) * s.ln() - (0.1 + q / 2.0) / s;
    let mut sigma = (ig.shape - law.shape()).abs().max((ig.rate - law.rate()).abs());
    for (u, v) in [(0.05, 0.4), (0.2, 2.0)] {
        sigma = sigma.max(((post(u) - post(v)) - (law.ln_pdf(u) - law.ln_pdf(v))).abs());
    }

    let (known, unknown) = (vec![3, 4], vec![0, 1, 2]);
    let mu = white(n, &mut rng);
    let t_known = vec![t[3], t[4]];
    let (a0, a1, sp2, st2) = (0.2, 0.8, 0.09, 0.04);
    let id = Precision::Identity(n);
    let g = latent_conditional(&LatentInputs {
        proxy_precision: &id,
        process_precision: &id,
        sigma_p2: sp2,
        sigma_t2: st2,
        alpha: [a0, a1],
        process_mean: &mu,
        rp: &rp,
        known: &known,
        t_known: &t_known,
        unknown: &unknown,
    })
    .unwrap();
    let mut mean = DVector::zeros(2 * n);
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        mean[i] = mu[i];
        mean[n + i] = a0 + a1 * mu[i];
        cov[(i, i)] = st2;
        cov[(i, n + i)] = a1 * st2;
        cov[(n + i, i)] = a1 * st2;
        cov[(n + i, n + i)] = a1 * a1 * st2 + sp2;
    }
    let o: Vec<usize> = known.iter().copied().chain(n..2 * n).collect();
    let obs = DVector::from_iterator(o.len(), t_known.iter().chain(&rp).copied());
    let (om, oc) = condition(&mean, &cov, &unknown, &o, &obs);
    let latent = (&g.mean - om).amax().max((g.covariance() - oc).amax());
    let worst = alpha.max(beta).max(sigma).max(latent);
    outcome(
        worst < 1e-8,
        format!("alpha {alpha:.1e}, beta {beta:.1e}, sigma2 {sigma:.1e}, T_u {latent:.1e} (< 1e-8)"),
    )
}

fn criterion_6() -> Outcome {
    let names = ["alpha1", "beta2", "beta3", "H", "K"];
    let reps: usize = 20;
    let mut cover = [0usize; 5];
    let mut above = [0usize; 2];
    let mut lowest = [f64::INFINITY; 2];
    for rep in 0..reps as u64 {
        let spec = SyntheticSpec { seed: 100 + rep, ..SyntheticSpec::default() };
        let truth = [spec.alpha[1], spec.beta[2], spec.beta[3], spec.h, spec.k];
        let data = generate(&spec).unwrap().model_data(true).unwrap();
        let cfg = ScenarioConfig::new(Scenario::A, ChainSettings { seed: 500 + rep, ..ChainSettings::default() }).unwrap();
        let draws = run_chain(&cfg, &data, &Priors::default()).unwrap();
        for (i, name) in names.iter().enumerate() {
            let s = stats::sorted(&draws.parameter(name).unwrap());
            let (lo, hi) = (stats::quantile_sorted(&s, 0.025), stats::quantile_sorted(&s, 0.975));
            cover[i] += usize::from(lo <= truth[i] && truth[i] <= hi);
            if i >= 3 {
                above[i - 3] += usize::from(lo > 0.5);
                lowest[i - 3] = lowest[i - 3].min(lo);
            }
        }
    }
    let need = (reps * 4).div_ceil(5);
    let pass = cover.iter().all(|&c| c >= need) && above.iter().all(|&a| a >= need);
    let cov: Vec<String> = names.iter().zip(cover).map(|(n, c)| format!("{n} {c}/{reps}")).collect();
    outcome(
        pass,
        format!(
            "coverage {} (>= {need}); 2.5% quantile > 0.5: H {}/{reps}, K {}/{reps} (>= {need}; lowest H {:.3}, K {:.3})",
            cov.join(", "),
            above[0],
            above[1],
            lowest[0],
            lowest[1]
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let iid: Vec<Vec<f64>> = (0..5).map(|_| white(4000, &mut rng)).collect();
    let shifted: Vec<Vec<f64>> = (0..5).map(|k| white(4000, &mut rng).iter().map(|v| v + k as f64).collect()).collect();
    let (a, b) = (psrf(&iid).unwrap(), psrf(&shifted).unwrap());
    outcome(
        (0.99..=1.05).contains(&a) && b > 1.2,
        format!("iid {a:.4} (in [0.99, 1.05]); shifted {b:.3} (> 1.2)"),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut identity = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..100);
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let p = point_metrics(&m, &y).unwrap();
        identity = identity.max((p.rmse * p.rmse - p.sq_bias - p.variance).abs());
    }
    let point = [(1.5, -2.0), (0.25, 0.25), (-3.0, 4.0)]
        .iter()
        .all(|&(x, y)| crps_sample(&[x; 5], y).unwrap() == (x - y).abs());
    let nrm = Normal::standard();
    let draws = white(100_000, &mut rng);
    let mut crps_gap = 0.0f64;
    for y in [0.0, 1.0, -2.0] {
        let exact = y * (2.0 * nrm.cdf(y) - 1.0) + 2.0 * nrm.pdf(y) - 1.0 / std::f64::consts::PI.sqrt();
        crps_gap = crps_gap.max((crps_sample(&draws, y).unwrap() - exact).abs());
    }
    let (reps, years) = (200, 50);
    let mut hits = 0.0;
    for _ in 0..reps {
        let d = DMatrix::from_fn(2000, years, |_, _| rng.sample::<f64, _>(StandardNormal));
        let obs = white(years, &mut rng);
        hits += ecp(&d, &obs, 0.95).unwrap() / 100.0;
    }
    let rate = hits / reps as f64;
    let se = (0.95 * 0.05 / (reps * years) as f64).sqrt();
    outcome(
        identity < 1e-9 && point && crps_gap < 1e-2 && (rate - 0.95).abs() < 3.0 * se,
        format!(
            "rmse identity {identity:.1e}; point mass exact {point}; Gaussian CRPS gap {crps_gap:.4}; ECP95 {:.2}% (3 SE {:.2}%)",
            100.0 * rate,
            300.0 * se
        ),
    )
}

fn ks(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (stats::sorted(a), stats::sorted(b));
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

fn criterion_9() -> Outcome {
    let log_c: Vec<f64> = (0..300).map(|i| (280.0 * (1.0 + 0.001 * i as f64)).ln()).collect();
    let m = log_c.iter().sum::<f64>() / log_c.len() as f64;
    let sd = (log_c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (log_c.len() - 1) as f64).sqrt();
    let want = 0.3 * std::f64::consts::LN_2 / sd;
    let single_gap = (tcr_transform(&[0.3], &log_c).unwrap()[0] - want).abs() / want;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let b: Vec<f64> = (0..1000).map(|_| 0.3 + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect();
    let base = tcr_transform(&b, &log_c).unwrap();
    let scaled = tcr_transform(&b.iter().map(|v| 2.5 * v).collect::<Vec<_>>(), &log_c).unwrap();
    let homog = base.iter().zip(&scaled).map(|(x, y)| (2.5 * x - y).abs()).fold(0.0, f64::max);
    let n = 100_000;
    let a: Vec<f64> = (0..n).map(|_| 0.3 + 0.05 * rng.sample::<f64, _>(StandardNormal)).collect();
    let c: Vec<f64> = (0..n).map(|_| 0.45 + 0.04 * rng.sample::<f64, _>(StandardNormal)).collect();
    let by: IndexMap<String, Vec<f64>> = [("A".to_string(), a.clone()), ("B".to_string(), c.clone())].into();
    let w: IndexMap<String, f64> = [("A".to_string(), 0.5), ("B".to_string(), 0.5)].into();
    let mix = tcr_density(&by, &w, &log_c, Some(n), 9).unwrap();
    let d = ks(&mix.draws, &tcr_transform(&[a, c].concat(), &log_c).unwrap());
    outcome(
        single_gap < 1e-14 && homog < 1e-12 && d < 0.01,
        format!("single draw relative error {single_gap:.1e} (< 1e-14); homogeneity {homog:.1e}; mix KS {d:.4} (< 0.01)"),
    )
}

fn cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_paleomem"))
        .args(args)
        .env("RUST_LOG", "warn")
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn run_pipeline(dir: &Path) -> bool {
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let cfg = dir.join("synth.toml");
    std::fs::write(&cfg, "[synthetic]\nprediction_years = 100\ncalibration_years = 100\nseed = 10\n").unwrap();
    let data = dir.join("data");
    let out = dir.join("run");
    cli(&["synth", "--config", &p(&cfg), "--out-dir", &p(&data)])
        && cli(&[
            "reconstruct",
            "--scenario",
            "A",
            "--config",
            &p(&data.join("reconstruct.toml")),
            "--iterations",
            "600",
            "--burn-in",
            "200",
            "--chains",
            "2",
            "--out-dir",
            &p(&out),
        ])
        && cli(&[
            "validate",
            "--draws",
            &p(&out.join("latent.csv")),
            "--observed",
            &p(&data.join("truth.csv")),
            "--out",
            &p(&out.join("validation.csv")),
        ])
}

fn criterion_10() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if !(run_pipeline(a.path()) && run_pipeline(b.path())) {
        return outcome(false, "pipeline did not exit 0");
    }
    let files = [
        "data/rp.csv",
        "data/temperature.csv",
        "data/forcings.csv",
        "data/truth.csv",
        "run/params.csv",
        "run/latent.csv",
        "run/summary.csv",
        "run/psrf.csv",
        "run/validation.csv",
    ];
    let differing: Vec<&str> = files
        .iter()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .copied()
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} output files byte-identical across two seeded runs", files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [(fn() -> Outcome, Duration); 10] = [
        (criterion_1, Duration::from_secs(30)),
        (criterion_2, Duration::from_secs(30)),
        (criterion_3, Duration::from_secs(300)),
        (criterion_4, Duration::MAX),
        (criterion_5, Duration::MAX),
        (criterion_6, Duration::from_secs(3600)),
        (criterion_7, Duration::MAX),
        (criterion_8, Duration::MAX),
        (criterion_9, Duration::MAX),
        (criterion_10, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (f, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let dt = t.elapsed();
        let pass = o.pass && dt <= *budget;
        failed += usize::from(!pass);
        let limit = if *budget == Duration::MAX { String::new() } else { format!(", limit {}s", budget.as_secs()) };
        println!(
            "criterion {}: {} {} [{:.1}s{limit}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            dt.as_secs_f64()
        );
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
