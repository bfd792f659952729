//! The experiment commands. Each returns the exit status; artifacts go to
//! the configured output directory.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use num_complex::Complex64;
use polaron_core::analysis::{run_comparison, Comparison, ForcingConstants};
use polaron_core::config::InitialData;
use polaron_core::polaron::{polaron_integrate_with, PolaronSample};
use polaron_core::{
    choquard::choquard_integrate_with, fit_slope, pekar_ground_state, ChoquardState, Error as CoreError,
    ExperimentConfig, LimitReference, SweepRecord, WaveField,
};
use rayon::prelude::*;

use crate::io::{
    fmt_f64, load_config, output_path, write_table, FieldData, Snapshot, COMPARE_HEADER, RUN_HEADER, SWEEP_HEADER,
};
use crate::{CommonArgs, Failure, Status};

type Outcome = Result<Status, Failure>;

fn load(common: &CommonArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = load_config(&common.config)?;
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    fs::create_dir_all(&config.output_dir)
        .with_context(|| format!("cannot create output directory {}", config.output_dir.display()))?;
    Ok(config)
}

fn pick_eps(config: &ExperimentConfig, eps: Option<f64>) -> Result<f64, Failure> {
    let eps = eps.unwrap_or(config.eps[0]);
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Failure::usage(anyhow!("eps must be positive and finite (got {eps})")));
    }
    Ok(eps)
}

fn write_report(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn run(common: &CommonArgs, eps: Option<f64>, snapshot: bool) -> Outcome {
    let config = load(common)?;
    let eps = pick_eps(&config, eps)?;
    let dir = &config.output_dir;
    let grid = config.build_grid()?;
    let u0 = config.limit_datum(&grid)?;
    let prepared = config.prepared(&u0, eps)?;
    let (stride, dt) = config.polaron_steps(eps);

    let mut samples: Vec<PolaronSample> = Vec::new();
    let mut last = None;
    let outcome = polaron_integrate_with(&prepared.to_state(), config.t_final, dt, stride, &config.solver_options(), |state| {
        samples.push(PolaronSample::of(state, config.s)?);
        last = Some(state.clone());
        Ok(())
    });
    let blowup = match outcome {
        Ok(()) => None,
        Err(CoreError::Blowup { t, reason, .. }) => Some((t, reason)),
        Err(e) => return Err(e.into()),
    };

    let rows = samples.iter().map(|s| {
        [s.t, s.mass, s.xs_norm_u, s.y_norm_v, s.y_norm_w, s.energy].iter().map(|&x| fmt_f64(x)).collect()
    });
    write_table(&output_path(dir, "run", Some(eps), "csv"), &RUN_HEADER, rows)?;

    let mut report = format!("eps = {eps}\ndt = {dt}\nsamples = {}\n", samples.len());
    if let (Some(first), Some(end)) = (samples.first(), samples.last()) {
        writeln!(report, "mass_drift = {:e}", ((end.mass - first.mass) / first.mass).abs()).unwrap();
        writeln!(report, "energy_drift = {:e}", ((end.energy - first.energy) / first.energy.abs().max(f64::MIN_POSITIVE)).abs())
            .unwrap();
    }
    match &blowup {
        Some((t, reason)) => writeln!(report, "status = blowup\nblowup_time = {t}\nreason = {reason}").unwrap(),
        None => report.push_str("status = completed\n"),
    }
    write_report(&output_path(dir, "run_report", Some(eps), "txt"), &report)?;

    if snapshot {
        if let Some(state) = &last {
            Snapshot {
                n: grid.n(),
                length: grid.length(),
                t: state.t,
                eps: Some(eps),
                fields: vec![
                    ("u".into(), FieldData::Complex(state.u.values().to_vec())),
                    ("v".into(), FieldData::Real(state.v.values().to_vec())),
                    ("w".into(), FieldData::Real(state.w.values().to_vec())),
                ],
            }
            .write(&output_path(dir, "snapshot", Some(eps), "bin"))?;
        }
    }
    Ok(match blowup {
        Some((t, reason)) => {
            eprintln!("blowup at t = {t}: {reason}");
            Status::Blowup
        }
        None => Status::Ok,
    })
}

const REFERENCE_MAGIC: &str = "polaron-reference";

/// Identifies the limit trajectory a cache file holds.
fn reference_key(config: &ExperimentConfig, dt: f64, stride: usize) -> String {
    format!(
        "n={} L={} s={} T={} h={} dt={} stride={} dealias={} initial={:?}",
        config.grid.n,
        fmt_f64(config.grid.length),
        fmt_f64(config.s),
        fmt_f64(config.t_final),
        fmt_f64(config.sample_interval),
        fmt_f64(dt),
        stride,
        config.dealias,
        config.initial
    )
}

fn save_reference(path: &Path, key: &str, states: &[ChoquardState]) -> anyhow::Result<()> {
    let mut out = Vec::new();
    writeln!(out, "{REFERENCE_MAGIC}\n{key}\nsamples={}", states.len())?;
    for s in states {
        out.extend_from_slice(&s.t.to_le_bytes());
        for z in s.u.values() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// `None` when the file is absent, unreadable or was made for another setup.
fn load_reference(path: &Path, key: &str, u0: &WaveField) -> Option<Vec<ChoquardState>> {
    let mut reader = BufReader::new(fs::File::open(path).ok()?);
    let mut lines = [String::new(), String::new(), String::new()];
    for line in &mut lines {
        reader.read_line(line).ok()?;
    }
    if lines[0].trim_end() != REFERENCE_MAGIC || lines[1].trim_end() != key {
        return None;
    }
    let count: usize = lines[2].trim_end().strip_prefix("samples=")?.parse().ok()?;
    let len = u0.grid().len();
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).ok()?;
    if bytes.len() != count * 8 * (1 + 2 * len) {
        return None;
    }
    let values: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    values
        .chunks_exact(1 + 2 * len)
        .map(|chunk| {
            let u: Vec<Complex64> = chunk[1..].chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            let u = WaveField::from_values(u0.grid(), u).ok()?;
            Some(ChoquardState { u, t: chunk[0] })
        })
        .collect()
}

/// The limit trajectory at the finest step any listed `ε` uses, read from
/// the output directory when a matching cache exists.
pub fn limit_reference(config: &ExperimentConfig, u0: &WaveField) -> anyhow::Result<LimitReference> {
    let (stride, dt) = config.reference_steps();
    let key = reference_key(config, dt, stride);
    let path = config.output_dir.join("choquard_reference.bin");
    if let Some(states) = load_reference(&path, &key, u0) {
        log::info!("using cached limit reference {}", path.display());
        return Ok(LimitReference::from_states(dt, stride, &states));
    }
    log::info!("computing limit reference (dt = {dt})");
    let mut states = Vec::new();
    choquard_integrate_with(u0, config.t_final, dt, stride, &config.solver_options(), |s| {
        states.push(s.clone());
        Ok(())
    })?;
    save_reference(&path, &key, &states)?;
    Ok(LimitReference::from_states(dt, stride, &states))
}

fn write_series(dir: &Path, c: &Comparison) -> anyhow::Result<()> {
    let s = &c.series;
    let rows = (0..s.len()).map(|i| {
        [s.times[i], s.ru[i], s.rv[i], s.rw[i], s.sup_total[i], s.composite(i)].iter().map(|&x| fmt_f64(x)).collect()
    });
    write_table(&output_path(dir, "compare", Some(c.record.eps), "csv"), &COMPARE_HEADER, rows)
}

fn record_summary(r: &SweepRecord) -> String {
    let mut text = format!(
        "eps = {}\ndt = {}\nsup_composite_error = {:e}\nfinal_composite_error = {:e}\nsup_S = {:e}\n",
        r.eps, r.dt, r.sup_composite, r.final_composite, r.sup_s
    );
    let ForcingConstants { c_u, c_v, .. } = r.forcing;
    writeln!(text, "forcing_c_u = {c_u:e}\nforcing_c_v = {c_v:e}").unwrap();
    writeln!(text, "deficits = {:?}", r.deficits).unwrap();
    match r.blowup_time {
        Some(t) => writeln!(text, "status = blowup\nblowup_time = {t}").unwrap(),
        None => text.push_str("status = completed\n"),
    }
    text
}

pub fn compare(common: &CommonArgs, eps: Option<f64>) -> Outcome {
    let mut config = load(common)?;
    let eps = pick_eps(&config, eps)?;
    if !config.eps.contains(&eps) {
        config.eps.push(eps);
        config.eps.sort_by(|a, b| b.total_cmp(a));
    }
    let grid = config.build_grid()?;
    let u0 = config.limit_datum(&grid)?;
    let reference = limit_reference(&config, &u0)?;
    let c = run_comparison(&config, &u0, &reference, eps)?;
    write_series(&config.output_dir, &c)?;
    write_report(&output_path(&config.output_dir, "compare_report", Some(eps), "txt"), &record_summary(&c.record))?;
    if let Some(t) = c.record.blowup_time {
        eprintln!("blowup at t = {t}");
        return Ok(Status::Blowup);
    }
    Ok(Status::Ok)
}

fn synthetic_records(config: &ExperimentConfig, pair: &str) -> Result<Vec<SweepRecord>, Failure> {
    let parsed: Vec<f64> = pair.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(Failure::usage)?;
    let [c, p] = parsed[..] else {
        return Err(Failure::usage(anyhow!("--synthetic expects C,P")));
    };
    Ok(config
        .eps
        .iter()
        .map(|&eps| SweepRecord {
            eps,
            sup_composite: c * eps.powf(p),
            final_composite: c * eps.powf(p),
            sup_s: c * eps.powf(p - 1.0),
            seconds: 0.0,
            dt: config.polaron_steps(eps).1,
            completed: true,
            blowup_time: None,
            forcing: ForcingConstants::default(),
            deficits: [0.0; 3],
        })
        .collect())
}

pub fn sweep(common: &CommonArgs, synthetic: Option<&str>) -> Outcome {
    let config = load(common)?;
    if config.eps.len() < 3 {
        return Err(Failure::usage(anyhow!("a sweep needs at least 3 eps values (got {})", config.eps.len())));
    }
    let dir = &config.output_dir;
    let records = match synthetic {
        Some(pair) => synthetic_records(&config, pair)?,
        None => {
            let grid = config.build_grid()?;
            let u0 = config.limit_datum(&grid)?;
            let reference = limit_reference(&config, &u0)?;
            let comparisons: Vec<Comparison> = config
                .eps
                .par_iter()
                .map(|&eps| run_comparison(&config, &u0, &reference, eps))
                .collect::<Result<_, _>>()?;
            for c in &comparisons {
                write_series(dir, c)?;
            }
            comparisons.into_iter().map(|c| c.record).collect()
        }
    };

    let rows = records.iter().map(|r| {
        vec![fmt_f64(r.eps), fmt_f64(r.sup_composite), fmt_f64(r.sup_s), r.completed.to_string(), fmt_f64(r.dt), fmt_f64(r.seconds)]
    });
    write_table(&dir.join("sweep.csv"), &SWEEP_HEADER, rows)?;

    let mut report = String::new();
    for r in &records {
        writeln!(report, "[eps {}]\n{}", r.eps, record_summary(r)).unwrap();
    }
    let status = match fit_slope(&records) {
        Ok(fit) => {
            let pass = fit.within(config.slope_window, config.max_residual);
            writeln!(
                report,
                "[fit]\nslope = {}\nintercept = {}\nresidual = {}\nwindow = [{}, {}]\nmax_residual = {}\nexcluded_eps = {:?}\nresult = {}",
                fit.slope,
                fit.intercept,
                fit.residual,
                config.slope_window[0],
                config.slope_window[1],
                config.max_residual,
                fit.excluded,
                if pass { "PASS" } else { "FAIL" }
            )
            .unwrap();
            println!(
                "slope {:.4} (residual {:.4}, window [{}, {}]): {}",
                fit.slope,
                fit.residual,
                config.slope_window[0],
                config.slope_window[1],
                if pass { "PASS" } else { "FAIL" }
            );
            if pass { Status::Ok } else { Status::CheckFailed }
        }
        Err(e) => {
            writeln!(report, "[fit]\nresult = FAIL\nreason = {e}").unwrap();
            eprintln!("no slope fit: {e}");
            if records.iter().any(|r| !r.completed) { Status::Blowup } else { Status::CheckFailed }
        }
    };
    write_report(&dir.join("sweep_report.txt"), &report)?;
    Ok(status)
}

pub fn groundstate(common: &CommonArgs) -> Outcome {
    let config = load(common)?;
    let InitialData::GroundState { mass, tol, max_iters } = config.initial else {
        return Err(Failure::usage(anyhow!("groundstate needs initial.kind = \"ground_state\"")));
    };
    let grid = config.build_grid()?;
    let gs = pekar_ground_state(&grid, mass, tol, max_iters)?;
    let dir = &config.output_dir;
    let rows = gs.energy_history.iter().enumerate().map(|(i, e)| vec![i.to_string(), fmt_f64(*e)]);
    write_table(&dir.join("ground_state.csv"), &["iteration", "energy"], rows)?;
    Snapshot {
        n: grid.n(),
        length: grid.length(),
        t: 0.0,
        eps: None,
        fields: vec![("u".into(), FieldData::Complex(gs.u.values().to_vec()))],
    }
    .write(&dir.join("ground_state.bin"))?;
    let report = format!(
        "mass = {}\nenergy = {}\nmu = {}\nresidual = {:e}\niterations = {}\n",
        gs.u.mass(),
        gs.energy,
        gs.mu,
        gs.residual,
        gs.iterations
    );
    write_report(&dir.join("ground_state_report.txt"), &report)?;
    print!("{report}");
    Ok(Status::Ok)
}

