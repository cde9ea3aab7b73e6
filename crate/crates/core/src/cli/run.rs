//! Sweep execution: one job per (N, grid point), checkpointed per job and
//! merged into `results.csv`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Analysis, KMax, RunConfig};
use crate::convergence::{auto_cutoff, auto_truncate};
use crate::dpt::{reconstruct_mixture, fidelity, ssb_analysis};
use crate::embedding::dimension_report_for;
use crate::error::{Error, Result};
use crate::heom::{assemble, HeomLiouvillian};
use crate::matrix::c64;
use crate::model::ModelInstance;
use crate::spectra::{check_properties, expectation, gap, steady_state, steady_state_sector, CheckMode, SolverOptions};
use crate::symmetry::{decompose, sector_leading_eigs, SectorDecomposition};

pub const RESULT_COLUMNS: [&str; 10] = [
    "run_id",
    "model",
    "N",
    "k_max",
    "sweep_param",
    "sweep_value",
    "analysis",
    "key",
    "re_value",
    "im_value",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub run_id: String,
    pub model: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub k_max: usize,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub analysis: String,
    pub key: String,
    pub re_value: f64,
    pub im_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub n: usize,
    pub sweep_value: f64,
    pub analysis: String,
    pub message: String,
}

#[derive(Clone, Debug, Default)]
pub struct RunSummary {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<Failure>,
    pub results_path: PathBuf,
    pub resumed_points: usize,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Job {
    n: usize,
    point: usize,
    value: f64,
}

struct JobOutput {
    rows: Vec<ResultRow>,
    failures: Vec<Failure>,
    resumed: bool,
}

/// Runs every job of `config` on a pool of `workers` threads and writes the
/// merged results under `out`.
pub fn run(config: &RunConfig, out: &Path, workers: usize) -> Result<RunSummary> {
    fs::create_dir_all(out)?;
    let hash = config.hash();
    let checkpoints = out.join("checkpoints").join(&hash[..16]);
    fs::create_dir_all(&checkpoints)?;
    if config.export_matrices {
        fs::create_dir_all(out.join("matrices"))?;
    }
    let jobs: Vec<Job> = config
        .sizes
        .iter()
        .flat_map(|&n| {
            config
                .sweep
                .values
                .iter()
                .enumerate()
                .map(move |(point, &value)| Job { n, point, value })
        })
        .collect();
    info!("{} jobs on {} workers", jobs.len(), workers.max(1));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;
    let outputs: Vec<JobOutput> = pool.install(|| {
        jobs.par_iter()
            .map(|job| run_job(config, &hash, job, &checkpoints, out))
            .collect()
    });

    let mut summary = RunSummary {
        results_path: out.join("results.csv"),
        ..RunSummary::default()
    };
    for o in outputs {
        summary.rows.extend(o.rows);
        summary.failures.extend(o.failures);
        summary.resumed_points += o.resumed as usize;
    }
    write_results(config, &hash, &summary.rows, &summary.results_path)?;
    let failures_path = out.join("failures.csv");
    if summary.failures.is_empty() {
        if failures_path.exists() {
            fs::remove_file(&failures_path)?;
        }
    } else {
        write_failures(&summary.failures, &failures_path)?;
        for f in &summary.failures {
            warn!("N = {}, {} = {}: {} failed: {}", f.n, config.sweep.param, f.sweep_value, f.analysis, f.message);
        }
    }
    Ok(summary)
}

fn checkpoint_path(dir: &Path, job: &Job) -> PathBuf {
    dir.join(format!("point-N{}-{}.csv", job.n, job.point))
}

fn run_job(config: &RunConfig, hash: &str, job: &Job, checkpoints: &Path, out: &Path) -> JobOutput {
    let path = checkpoint_path(checkpoints, job);
    if let Ok(rows) = read_rows(&path) {
        info!("N = {}, point {}: resumed from checkpoint", job.n, job.point);
        return JobOutput {
            rows,
            failures: Vec::new(),
            resumed: true,
        };
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let fail = |analysis: &str, e: &Error| Failure {
        n: job.n,
        sweep_value: job.value,
        analysis: analysis.to_string(),
        message: e.to_string(),
    };
    let prepared = prepare(config, job);
    let (model, k_max, l) = match prepared {
        Ok(p) => p,
        Err(e) => {
            failures.push(fail("setup", &e));
            return JobOutput {
                rows,
                failures,
                resumed: false,
            };
        }
    };
    if config.export_matrices {
        let file = out.join("matrices").join(format!("N{}-{}.txt", job.n, job.point));
        if let Err(e) = fs::File::create(&file).map_err(Error::from).and_then(|f| l.write_triplets(BufWriter::new(f))) {
            failures.push(fail("export", &e));
        }
    }
    let opts = config.solver.options();
    let mut decomposition: Option<Result<SectorDecomposition>> = None;
    for &analysis in &config.analyses {
        let decomp = |slot: &mut Option<Result<SectorDecomposition>>| -> Result<SectorDecomposition> {
            if slot.is_none() {
                let spec = model
                    .symmetry
                    .clone()
                    .ok_or_else(|| Error::InvalidArgument("model declares no symmetry".into()));
                *slot = Some(spec.and_then(|s| decompose(&l, &s)));
            }
            match slot.as_ref().expect("filled above") {
                Ok(d) => Ok(d.clone()),
                Err(e) => Err(Error::InvalidArgument(e.to_string())),
            }
        };
        let values = match analysis {
            Analysis::Sectors | Analysis::Decompose | Analysis::Ssb => {
                decomp(&mut decomposition).and_then(|d| sector_analysis(config, &model, &d, analysis, &opts))
            }
            _ => plain_analysis(config, &model, k_max, &l, analysis, &opts),
        };
        match values {
            Ok(values) => rows.extend(values.into_iter().map(|(key, z)| ResultRow {
                run_id: hash[..12].to_string(),
                model: model.name.clone(),
                n: job.n,
                k_max,
                sweep_param: config.sweep.param.clone(),
                sweep_value: job.value,
                analysis: analysis.token().to_string(),
                key,
                re_value: z.re,
                im_value: z.im,
            })),
            Err(e) => failures.push(fail(analysis.token(), &e)),
        }
    }
    if failures.is_empty() {
        if let Err(e) = write_rows(&rows, &path) {
            warn!("checkpoint {}: {e}", path.display());
        }
    }
    JobOutput {
        rows,
        failures,
        resumed: false,
    }
}

fn prepare(config: &RunConfig, job: &Job) -> Result<(ModelInstance, usize, HeomLiouvillian)> {
    let model = config.model_at(job.n, job.value)?;
    let k_max = match config.k_max {
        KMax::Fixed(k) => k,
        KMax::Auto(_) => {
            let o = config.observable(&config.observables[0], &model)?;
            let trace = auto_truncate(&model, &o, config.epsilon, config.k_start, config.k_limit, &config.solver.options())?;
            trace.selected.ok_or_else(|| {
                Error::NoConvergence(format!(
                    "no k_max in {}..={} reaches epsilon = {:e}",
                    config.k_start, config.k_limit, config.epsilon
                ))
            })?
        }
    };
    let l = assemble(&model, k_max)?;
    Ok((model, k_max, l))
}

fn real(x: f64) -> Complex64 {
    c64(x, 0.0)
}

fn plain_analysis(
    config: &RunConfig,
    model: &ModelInstance,
    k_max: usize,
    l: &HeomLiouvillian,
    analysis: Analysis,
    opts: &SolverOptions,
) -> Result<Vec<(String, Complex64)>> {
    let mut out = Vec::new();
    match analysis {
        Analysis::SteadyState => {
            let (phys, _) = match &model.symmetry {
                Some(spec) => steady_state_sector(&decompose(l, spec)?, opts)?,
                None => steady_state(l, opts)?,
            };
            for obs in &config.observables {
                let o = config.observable(obs, model)?;
                out.push((obs.label().to_string(), expectation(&phys, &o)?));
            }
        }
        Analysis::Gap => out.push(("lambda_1".into(), gap(l, opts)?)),
        Analysis::Converge => {
            let o = config.observable(&config.observables[0], model)?;
            let trace = auto_truncate(model, &o, config.epsilon, config.k_start, config.k_limit, opts)?;
            for p in &trace.points {
                out.push((format!("C[{}]", p.truncation), real(p.measure)));
            }
            out.push(("selected_k_max".into(), real(trace.selected.map_or(f64::NAN, |k| k as f64))));
        }
        Analysis::CompareMarkovian => {
            let obs = &config.observables[0];
            let o = config.observable(obs, model)?;
            let trace = auto_cutoff(model, &o, config.epsilon, 1, config.k_limit, opts)?;
            let nc = trace.selected.ok_or_else(|| {
                Error::NoConvergence(format!("no Fock cutoff up to {} reaches epsilon", config.k_limit))
            })?;
            let (phys, _) = match &model.symmetry {
                Some(spec) => steady_state_sector(&decompose(l, spec)?, opts)?,
                None => steady_state(l, opts)?,
            };
            let heom = expectation(&phys, &o)?.re;
            let (lm, _) = crate::convergence::lm_expectation(model, &o, nc, opts)?;
            let dims = dimension_report_for(model, k_max, &vec![nc; model.modes()])?;
            let label = obs.label();
            out.push((format!("{label}.heom"), real(heom)));
            out.push((format!("{label}.lm"), real(lm)));
            out.push((format!("{label}.diff"), real((heom - lm).abs())));
            out.push(("selected_cutoff".into(), real(nc as f64)));
            out.push(("dim_heom".into(), real(dims.dim_heom as f64)));
            out.push(("dim_lm".into(), real(dims.dim_lm as f64)));
            out.push(("dim_ratio".into(), real(dims.ratio)));
        }
        Analysis::Properties => {
            let r = check_properties(l, CheckMode::Full, opts)?;
            out.push(("conjugate_pairing".into(), real(r.conjugate_pairing)));
            out.push(("trace_covector".into(), real(r.trace_covector)));
            out.push(("min_abs_eigenvalue".into(), real(r.min_abs_eigenvalue)));
            out.push(("max_real".into(), real(r.max_real)));
            out.push(("max_physical_trace".into(), real(r.max_physical_trace)));
        }
        Analysis::Sectors | Analysis::Decompose | Analysis::Ssb => unreachable!("handled with the decomposition"),
    }
    Ok(out)
}

fn sector_analysis(
    config: &RunConfig,
    model: &ModelInstance,
    d: &SectorDecomposition,
    analysis: Analysis,
    opts: &SolverOptions,
) -> Result<Vec<(String, Complex64)>> {
    let mut out = Vec::new();
    match analysis {
        Analysis::Decompose => {
            for s in d.sectors() {
                out.push((format!("sector[{}].dim", s.charge), real(s.indices.len() as f64)));
            }
            out.push(("off_sector_residual".into(), real(d.off_sector_residual)));
        }
        Analysis::Sectors => {
            for s in d.sectors() {
                let dim = s.indices.len();
                let want = if s.charge == 0 { 2 } else { 1 };
                if dim < want {
                    continue;
                }
                let eig = sector_leading_eigs(d, s.charge, opts.count.max(want).min(dim), opts)?;
                out.push((format!("sector[{}].lambda_0", s.charge), eig.eigenvalues[0]));
                if s.charge == 0 {
                    out.push(("sector[0].lambda_1".into(), eig.eigenvalues[1]));
                }
            }
        }
        Analysis::Ssb => {
            let scale = model.param("omega").filter(|w| *w != 0.0).unwrap_or(1.0).abs();
            let (steady, lambda, pair) = ssb_analysis(d, opts, scale)?;
            let mix = reconstruct_mixture(&pair)?;
            out.push(("lambda_0_1".into(), lambda));
            out.push(("fidelity".into(), real(fidelity(&mix, &steady)?)));
            out.push(("overlap".into(), pair.overlap));
            for obs in &config.observables {
                let o = config.observable(obs, model)?;
                out.push((format!("{}.plus", obs.label()), expectation(&pair.rho_plus, &o)?));
                out.push((format!("{}.minus", obs.label()), expectation(&pair.rho_minus, &o)?));
            }
        }
        _ => unreachable!("not a sector analysis"),
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.into())
}

fn write_rows(rows: &[ResultRow], path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = csv::Writer::from_path(&tmp).map_err(csv_error)?;
        w.write_record(RESULT_COLUMNS).map_err(csv_error)?;
        for r in rows {
            w.write_record(row_fields(r)).map_err(csv_error)?;
        }
        w.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

fn row_fields(r: &ResultRow) -> [String; 10] {
    [
        r.run_id.clone(),
        r.model.clone(),
        r.n.to_string(),
        r.k_max.to_string(),
        r.sweep_param.clone(),
        format!("{:e}", r.sweep_value),
        r.analysis.clone(),
        r.key.clone(),
        format!("{:e}", r.re_value),
        format!("{:e}", r.im_value),
    ]
}

fn write_results(config: &RunConfig, hash: &str, rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    writeln!(f, "# heom-dpt results")?;
    writeln!(f, "# config_sha256: {hash}")?;
    writeln!(f, "# version: {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(
        f,
        "# solver: shift = {:e}{:+e}i, count = {}, tol = {:e}, epsilon = {:e}",
        config.solver.shift[0], config.solver.shift[1], config.solver.count, config.solver.tol, config.epsilon
    )?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(RESULT_COLUMNS).map_err(csv_error)?;
    for r in rows {
        w.write_record(row_fields(r)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn write_failures(failures: &[Failure], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(["N", "sweep_value", "analysis", "message"]).map_err(csv_error)?;
    for f in failures {
        w.write_record([f.n.to_string(), format!("{:e}", f.sweep_value), f.analysis.clone(), f.message.clone()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the data rows of a `results.csv`, skipping the comment header.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let text = fs::read_to_string(path)?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}
