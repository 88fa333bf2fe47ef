use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;
use indexmap::IndexMap;
use nalgebra::DMatrix;
use paleomem::memtest::{beran_test, davies_harte_test, default_bandwidth, robinson_test, TestResult};
use paleomem::noise::NoiseKind;
use paleomem::reduction::{
    fit_reduced_proxy, screen_proxies, standardize_role, ColumnRole, ReducedProxy, ScreeningReport,
    TimeSeriesFrame, Transform, YearRange,
};
use paleomem::sampler::{run_chain, Forcings, ModelData, PosteriorDraws, ScenarioConfig, Scenario};
use paleomem::spectral::{multitaper, periodogram};
use paleomem::synthetic::{generate, SyntheticData};
use paleomem::validation::{psrf, psrf_multivariate, tcr_density, validate, ValidationReport, MIN_CHAIN_LENGTH};
use paleomem::{stats, Error};
use serde_json::json;

use crate::config::{parse_range, require_range, Loaded};
use crate::io::{append_line, csv_bytes, fmt, fmt_opt, write_atomic, Table};

fn year_rows(years: &[i32], cols: &[&[Option<f64>]]) -> Vec<Vec<String>> {
    years
        .iter()
        .enumerate()
        .map(|(i, y)| std::iter::once(y.to_string()).chain(cols.iter().map(|c| fmt_opt(c[i]))).collect())
        .collect()
}

fn dense(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().copied().map(Some).collect()
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub struct SynthArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let loaded = Loaded::from_path(args.config.as_deref())?;
    let mut spec = loaded.config.synthetic.clone();
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    let data = generate(&spec)?;
    let out = &args.out_dir;
    write_synthetic(&data, out)?;
    write_json(
        &out.join("truth.json"),
        &json!({
            "spec": spec,
            "calibration": data.calibration.to_string(),
            "prediction": data.prediction.to_string(),
        }),
    )?;
    let proxy_line = if data.panel.is_empty() {
        "reduced_proxy = \"rp.csv\"".to_string()
    } else {
        "proxies = \"proxies.csv\"".to_string()
    };
    let toml = format!(
        "[data]\n{proxy_line}\ntemperature = \"temperature.csv\"\nforcings = \"forcings.csv\"\n\n\
         [windows]\ncalibration = \"{}\"\nprediction = \"{}\"\n\n[chain]\nseed = {}\n",
        data.calibration, data.prediction, spec.seed
    );
    write_atomic(&out.join("reconstruct.toml"), toml.as_bytes())?;
    log::info!("wrote synthetic record of {} years to {}", data.years.len(), out.display());
    Ok(())
}

fn write_synthetic(data: &SyntheticData, out: &Path) -> Result<()> {
    let y = &data.years;
    write_atomic(&out.join("rp.csv"), &csv_bytes(&["year", "rp"], year_rows(y, &[&dense(&data.rp)]))?)?;
    if !data.panel.is_empty() {
        let header: Vec<&str> = std::iter::once("year").chain(data.panel.iter().map(|(n, _)| n.as_str())).collect();
        let cols: Vec<Vec<Option<f64>>> = data.panel.iter().map(|(_, v)| dense(v)).collect();
        let refs: Vec<&[Option<f64>]> = cols.iter().map(Vec::as_slice).collect();
        write_atomic(&out.join("proxies.csv"), &csv_bytes(&header, year_rows(y, &refs))?)?;
    }
    let cal: Vec<i32> = data.calibration.years().collect();
    let cal_t: Vec<Option<f64>> = cal.iter().map(|yr| data.temperature[(yr - y[0]) as usize]).collect();
    write_atomic(&out.join("temperature.csv"), &csv_bytes(&["year", "temperature"], year_rows(&cal, &[&cal_t]))?)?;
    let f = &data.forcings;
    write_atomic(
        &out.join("forcings.csv"),
        &csv_bytes(
            &["year", "solar", "volcanic", "co2"],
            year_rows(y, &[&dense(&f.solar), &dense(&f.volcanic), &dense(&f.co2)]),
        )?,
    )?;
    write_atomic(&out.join("truth.csv"), &csv_bytes(&["year", "temperature"], year_rows(y, &[&dense(&data.truth)]))?)?;
    Ok(())
}

/// Proxy panel and temperature on the union of their years.
fn load_panel(loaded: &Loaded) -> Result<(TimeSeriesFrame, String)> {
    let cfg = &loaded.config;
    let ppath = loaded.data_path(&cfg.data.proxies, "proxies")?;
    let tpath = loaded.data_path(&cfg.data.temperature, "temperature")?;
    let proxies = Table::read(&ppath)?;
    let temp = Table::read(&tpath)?;
    let mut years: Vec<i32> = proxies.years.iter().chain(&temp.years).copied().collect();
    years.sort_unstable();
    years.dedup();
    let mut frame = TimeSeriesFrame::new(years.clone())?;
    let rc = &cfg.reduction;
    for name in proxies.columns.keys() {
        if (!rc.include.is_empty() && !rc.include.contains(name)) || rc.exclude.contains(name) {
            continue;
        }
        frame.add_column(name.clone(), proxies.aligned(name, &years, &ppath)?, ColumnRole::Proxy)?;
    }
    for name in rc.include.iter().chain(&rc.log).chain(&rc.log_one_minus) {
        if !proxies.columns.contains_key(name) {
            return Err(Error::Config(format!("reduction names unknown proxy `{name}`")).into());
        }
    }
    for name in &rc.log {
        frame.set_transform(name, Transform::Log)?;
    }
    for name in &rc.log_one_minus {
        frame.set_transform(name, Transform::LogOneMinus)?;
    }
    let tcol = cfg.data.temperature_column.clone();
    frame.add_column(tcol.clone(), temp.aligned(&tcol, &years, &tpath)?, ColumnRole::Temperature)?;
    Ok((frame, tcol))
}

/// Transforms, standardization, optional screening and the OLS fit.
pub fn reduce_panel(loaded: &Loaded) -> Result<(ReducedProxy, Option<ScreeningReport>)> {
    let cfg = &loaded.config;
    let (mut frame, tcol) = load_panel(loaded)?;
    frame.apply_transforms()?;
    let std_window = match parse_range(&cfg.windows.standardization, "standardization")? {
        Some(w) => w,
        None => YearRange::new(frame.years()[0], *frame.years().last().expect("nonempty"))?,
    };
    let fit_window = match parse_range(&cfg.windows.fit, "fit")? {
        Some(w) => w,
        None => require_range(&cfg.windows.calibration, "calibration")?,
    };
    standardize_role(&mut frame, ColumnRole::Proxy, std_window)?;
    let mut report = None;
    if cfg.reduction.screen {
        let refs: IndexMap<String, String> = frame
            .names_with_role(ColumnRole::Proxy)
            .into_iter()
            .map(|p| {
                let r = cfg.reduction.local_reference.get(&p).cloned().unwrap_or_else(|| tcol.clone());
                (p, r)
            })
            .collect();
        let rep = screen_proxies(&frame, &refs, cfg.reduction.screening_level)?;
        for e in rep.entries.iter().filter(|e| !e.retained) {
            log::info!("screening drops `{}` (r = {:.3}, p = {:.3})", e.proxy, e.correlation, e.p_value);
            frame.remove_column(&e.proxy);
        }
        if rep.retained().is_empty() {
            return Err(Error::DegenerateInput("screening retained no proxies".into()).into());
        }
        report = Some(rep);
    }
    Ok((fit_reduced_proxy(&frame, &tcol, fit_window)?, report))
}

pub fn reduce(config: &Path, out_dir: &Path) -> Result<()> {
    let loaded = Loaded::from_path(Some(config))?;
    let (rp, report) = reduce_panel(&loaded)?;
    write_atomic(&out_dir.join("rp.csv"), &csv_bytes(&["year", "rp"], year_rows(&rp.years, &[&rp.series]))?)?;
    write_json(
        &out_dir.join("reduce.json"),
        &json!({
            "weights": rp.weights,
            "intercept": rp.intercept,
            "r_squared": rp.r_squared,
            "fit_window": rp.fit_window.to_string(),
            "fit_rows": rp.fit_rows,
            "standardization_window": loaded.config.windows.standardization,
            "screening": report,
        }),
    )?;
    log::info!("reduced {} proxies, R^2 = {:.4}", rp.weights.len(), rp.r_squared);
    Ok(())
}

fn read_series(input: &Path, column: Option<&str>) -> Result<(String, Vec<f64>)> {
    let t = Table::read(input)?;
    let (name, v) = t.pick(column, input)?;
    let x: Option<Vec<f64>> = v.into_iter().collect();
    let x = x.ok_or_else(|| Error::Data(format!("column `{name}` of {} has missing values", input.display())))?;
    Ok((name, x))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

pub fn spectrum(input: &Path, column: Option<&str>, method: &str, tapers: usize, out: Option<&Path>) -> Result<()> {
    let (_, x) = read_series(input, column)?;
    let est = match method {
        "periodogram" => periodogram(&x)?,
        "multitaper" => multitaper(&x, tapers)?,
        other => return Err(Error::Config(format!("unknown spectrum method `{other}`")).into()),
    };
    let m = est.method.as_str().to_string();
    let rows = est
        .frequencies
        .iter()
        .zip(&est.power)
        .map(|(f, p)| vec![fmt(*f), fmt(*p), m.clone()]);
    emit(out, &csv_bytes(&["freq", "power", "method"], rows)?)
}

pub fn memtest(
    input: &Path,
    column: Option<&str>,
    tests: &[String],
    nulls: &[NoiseKind],
    bandwidth: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let (_, x) = read_series(input, column)?;
    let m = bandwidth.unwrap_or_else(|| default_bandwidth(x.len()));
    let mut results: Vec<TestResult> = Vec::new();
    for t in tests {
        match t.as_str() {
            "robinson" => results.push(robinson_test(&x, m)?),
            "beran" => {
                for &null in nulls {
                    results.push(beran_test(&x, null)?);
                }
            }
            "davies-harte" => results.push(davies_harte_test(&x)?),
            other => return Err(Error::Config(format!("unknown test `{other}`")).into()),
        }
    }
    let rows = results.iter().map(|r| {
        vec![
            r.test.clone(),
            r.null_model.clone(),
            fmt(r.statistic),
            fmt(r.p_value),
            fmt_opt(r.estimate),
            r.bandwidth.map(|b| b.to_string()).unwrap_or_default(),
        ]
    });
    emit(out, &csv_bytes(&["test", "null", "statistic", "p_value", "estimate", "bandwidth"], rows)?)
}

pub struct ReconstructArgs {
    pub scenario: Scenario,
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub out_dir: PathBuf,
}

fn load_model_data(loaded: &Loaded, with_forcings: bool) -> Result<ModelData> {
    let cfg = &loaded.config;
    let calibration = require_range(&cfg.windows.calibration, "calibration")?;
    let prediction = require_range(&cfg.windows.prediction, "prediction")?;
    let (years, rp) = match &cfg.data.reduced_proxy {
        Some(p) => {
            let p = loaded.resolve(p);
            let t = Table::read(&p)?;
            (t.years.clone(), t.column(&cfg.data.reduced_proxy_column, &p)?.to_vec())
        }
        None => {
            let (r, _) = reduce_panel(loaded)?;
            (r.years, r.series)
        }
    };
    let tpath = loaded.data_path(&cfg.data.temperature, "temperature")?;
    let temperature = Table::read(&tpath)?.aligned(&cfg.data.temperature_column, &years, &tpath)?;
    let forcings = match (&cfg.data.forcings, with_forcings) {
        (Some(p), true) => {
            let p = loaded.resolve(p);
            let t = Table::read(&p)?;
            let col = |name: &str| -> Result<Vec<f64>> {
                t.aligned(name, &years, &p)?
                    .into_iter()
                    .zip(&years)
                    .map(|(v, y)| {
                        let inside = calibration.contains(*y) || prediction.contains(*y);
                        Ok(v.unwrap_or(if inside { f64::NAN } else { 0.0 }))
                    })
                    .collect()
            };
            let f = Forcings { solar: col("solar")?, volcanic: col("volcanic")?, co2: col("co2")? };
            for (name, v) in [("solar", &f.solar), ("volcanic", &f.volcanic), ("co2", &f.co2)] {
                if let Some(i) = v.iter().position(|x| x.is_nan()) {
                    return Err(Error::Data(format!("{name} forcing is missing in year {}", years[i])).into());
                }
            }
            Some(f)
        }
        (Some(_), false) => {
            log::warn!("forcings-off scenario: forcing file ignored");
            None
        }
        (None, true) => return Err(Error::Config("scenario needs `data.forcings`".into()).into()),
        (None, false) => None,
    };
    Ok(ModelData::new(&years, &rp, &temperature, forcings.as_ref(), calibration, prediction)?)
}

fn draws_csv(first: &[String], draws: &PosteriorDraws, latent: bool) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    for (c, chain) in draws.chains.iter().enumerate() {
        let m = if latent { &chain.latent } else { &chain.parameters };
        for i in 0..m.nrows() {
            let mut row = vec![i.to_string(), c.to_string()];
            row.extend(m.row(i).iter().map(|v| fmt(*v)));
            rows.push(row);
        }
    }
    csv_bytes(first, rows)
}

pub fn reconstruct(args: ReconstructArgs) -> Result<()> {
    let started = Instant::now();
    let loaded = Loaded::from_path(Some(&args.config))?;
    let mut chain = loaded.config.chain;
    if let Some(s) = args.seed {
        chain.seed = s;
    }
    if let Some(c) = args.chains {
        chain.chains = c;
    }
    if let Some(n) = args.iterations {
        chain.iterations = n;
    }
    if let Some(b) = args.burn_in {
        chain.burn_in = b;
    }
    let scenario = ScenarioConfig::new(args.scenario, chain)?;
    loaded.config.priors.validate()?;
    let data = load_model_data(&loaded, scenario.forcings_included)?;
    log::info!(
        "scenario {}: {} years ({} latent), {} chain(s) x {} iterations",
        scenario.label,
        data.len(),
        data.unknown.len(),
        chain.chains,
        chain.iterations
    );
    let draws = run_chain(&scenario, &data, &loaded.config.priors)?;
    let out = &args.out_dir;

    let mut header = vec!["iteration".to_string(), "chain".to_string()];
    header.extend(draws.parameter_names.iter().cloned());
    write_atomic(&out.join("params.csv"), &draws_csv(&header, &draws, false)?)?;

    let mut header = vec!["iteration".to_string(), "chain".to_string()];
    header.extend(draws.prediction_years.iter().map(i32::to_string));
    write_atomic(&out.join("latent.csv"), &draws_csv(&header, &draws, true)?)?;

    let latent = draws.pooled_latent();
    let rows = draws.prediction_years.iter().enumerate().map(|(j, y)| {
        let s = stats::sorted(latent.column(j).as_slice());
        vec![
            y.to_string(),
            fmt(stats::mean(&s)),
            fmt(stats::quantile_sorted(&s, 0.025)),
            fmt(stats::quantile_sorted(&s, 0.975)),
        ]
    });
    write_atomic(&out.join("summary.csv"), &csv_bytes(&["year", "mean", "q025", "q975"], rows)?)?;

    let psrf_written = chain.chains >= 2 && scenario.kept() >= MIN_CHAIN_LENGTH;
    if psrf_written {
        write_atomic(&out.join("psrf.csv"), &psrf_csv(&draws)?)?;
    }

    let manifest = json!({
        "command": "reconstruct",
        "config": args.config.display().to_string(),
        "config_hash": loaded.hash,
        "scenario": scenario.label.as_str(),
        "seed": chain.seed,
        "chains": chain.chains,
        "iterations": chain.iterations,
        "burn_in": chain.burn_in,
        "acceptance_rates": draws.acceptance_rates(),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "version": env!("CARGO_PKG_VERSION"),
        "psrf": psrf_written,
    });
    std::fs::create_dir_all(out)?;
    append_line(&out.join("manifests.jsonl"), &serde_json::to_string(&manifest)?)?;
    log::info!("wrote draws to {}", out.display());
    Ok(())
}

/// Per-parameter factors, skipping parameters held fixed, plus the
/// multivariate factor over the varying ones.
fn psrf_csv(draws: &PosteriorDraws) -> Result<Vec<u8>> {
    let mut rows = Vec::new();
    let mut varying = Vec::new();
    for (j, name) in draws.parameter_names.iter().enumerate() {
        let chains = draws.parameter_by_chain(name)?;
        if chains.iter().all(|c| stats::sample_variance(c) > 0.0) {
            rows.push(vec![name.clone(), fmt(psrf(&chains)?)]);
            varying.push(j);
        }
    }
    let mats: Vec<DMatrix<f64>> = draws
        .chains
        .iter()
        .map(|c| c.parameters.select_columns(&varying))
        .collect();
    rows.push(vec!["multivariate".into(), fmt(psrf_multivariate(&mats)?)]);
    csv_bytes(&["parameter", "psrf"], rows)
}

/// Latent draws CSV: `iteration,chain,<year>...` into a draws-by-year matrix.
pub fn read_latent(path: &Path) -> Result<(Vec<i32>, DMatrix<f64>)> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| Error::Data(format!("{}: {e}", path.display())))?.clone();
    if headers.get(0) != Some("iteration") || headers.get(1) != Some("chain") {
        return Err(Error::Data(format!("{}: expected `iteration,chain,<year>...`", path.display())).into());
    }
    let years: Vec<i32> = headers
        .iter()
        .skip(2)
        .map(|h| h.parse::<i32>().map_err(|_| Error::Data(format!("{}: bad year `{h}`", path.display()))))
        .collect::<std::result::Result<_, _>>()?;
    let mut values = Vec::new();
    let mut nrows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        for cell in rec.iter().skip(2) {
            values.push(cell.parse::<f64>().map_err(|_| Error::Data(format!("{}: bad value", path.display())))?);
        }
        nrows += 1;
    }
    Ok((years.clone(), DMatrix::from_row_slice(nrows, years.len(), &values)))
}

pub fn validate_cmd(draws: &Path, observed: &Path, column: &str, out: &Path) -> Result<ValidationReport> {
    let (years, latent) = read_latent(draws)?;
    let obs = Table::read(observed)?;
    let col = obs.aligned(column, &years, observed)?;
    let keep: Vec<usize> = (0..years.len()).filter(|&j| col[j].is_some()).collect();
    if keep.is_empty() {
        return Err(Error::Data("no overlapping years between draws and observations".into()).into());
    }
    let y: Vec<f64> = keep.iter().map(|&j| col[j].unwrap()).collect();
    let report = validate(&latent.select_columns(&keep), &y)?;
    let mut header = vec!["years"];
    header.extend(ValidationReport::COLUMNS);
    let mut row = vec![keep.len().to_string()];
    row.extend(report.values().iter().map(|v| fmt(*v)));
    write_atomic(out, &csv_bytes(&header, [row])?)?;
    log::info!("validated {} years: rmse {:.4}, ECP95 {:.1}%", keep.len(), report.rmse, report.ecp95);
    Ok(report)
}

pub struct TcrArgs {
    pub params: Vec<(String, PathBuf)>,
    pub weights: Vec<(String, f64)>,
    pub forcings: PathBuf,
    pub window: Option<String>,
    pub size: Option<usize>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn read_parameter(path: &Path, name: &str) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let j = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Data(format!("{} has no `{name}` column", path.display())))?;
    rdr.records()
        .map(|r| {
            let r = r.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            Ok(r.get(j).unwrap_or("").parse::<f64>().map_err(|_| Error::Data(format!("{}: bad value", path.display())))?)
        })
        .collect()
}

pub fn tcr(args: TcrArgs) -> Result<()> {
    if args.params.is_empty() {
        return Err(Error::Config("tcr needs at least one --params LABEL=PATH".into()).into());
    }
    let mut beta3 = IndexMap::new();
    for (label, path) in &args.params {
        beta3.insert(label.clone(), read_parameter(path, "beta3")?);
    }
    let weights: IndexMap<String, f64> = if args.weights.is_empty() {
        let w = 1.0 / beta3.len() as f64;
        beta3.keys().map(|k| (k.clone(), w)).collect()
    } else {
        args.weights.iter().cloned().collect()
    };
    let table = Table::read(&args.forcings)?;
    let window = parse_range(&args.window, "tcr")?;
    let co2 = table.column("co2", &args.forcings)?;
    let mut log_c = Vec::new();
    for (y, v) in table.years.iter().zip(co2) {
        if window.is_none_or(|w| w.contains(*y)) {
            let v = v.ok_or_else(|| Error::Data(format!("co2 missing in year {y}")))?;
            log_c.push(
                Transform::Log
                    .apply(v)
                    .ok_or_else(|| Error::ParameterDomain(format!("co2 value {v} in year {y} is not positive")))?,
            );
        }
    }
    let density = tcr_density(&beta3, &weights, &log_c, args.size, args.seed)?;
    let out = &args.out_dir;
    let rows = density.draws.iter().enumerate().map(|(i, v)| vec![i.to_string(), fmt(*v)]);
    write_atomic(&out.join("tcr_draws.csv"), &csv_bytes(&["draw", "tcr"], rows)?)?;
    write_json(
        &out.join("tcr_summary.json"),
        &json!({
            "median": density.median,
            "ci95": [density.ci95.0, density.ci95.1],
            "draws": density.draws.len(),
            "scenario_mix": density.scenario_mix,
            "sd_log_co2": stats::sample_sd(&log_c),
            "seed": args.seed,
        }),
    )?;
    log::info!("TCR median {:.3}, 95% [{:.3}, {:.3}]", density.median, density.ci95.0, density.ci95.1);
    Ok(())
}
