//! Truncation control: differences of steady-state expectations and of
//! selected eigenvalues between consecutive truncations, and automatic
//! selection of `k_max` and of the Fock cutoff.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;

use crate::embedding::{lm_steady_state, EmbeddingSpec};
use crate::error::{Error, Result};
use crate::heom::assemble;
use crate::matrix::DenseMatrix;
use crate::model::ModelInstance;
use crate::spectra::{expectation, leading_eigs, steady_state, steady_state_sector, SolverOptions};
use crate::symmetry::{decompose, sector_leading_eigs};

/// Default tolerance on consecutive-truncation differences.
pub const DEFAULT_EPSILON: f64 = 1e-4;
/// Two pairing candidates closer than this in distance are ambiguous.
pub const PAIRING_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub truncation: usize,
    pub measure: f64,
    pub elapsed_seconds: f64,
    pub dimension: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTrace {
    pub points: Vec<TracePoint>,
    pub epsilon: f64,
    /// First truncation whose measure fell below `epsilon`; `None` when the
    /// scan ran out of truncations.
    pub selected: Option<usize>,
}

impl ConvergenceTrace {
    pub fn is_exhausted(&self) -> bool {
        self.selected.is_none()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(e.into());
        out.write_record(["truncation", "measure", "elapsed_seconds", "dimension"])
            .map_err(io)?;
        for p in &self.points {
            out.write_record([
                p.truncation.to_string(),
                format!("{:e}", p.measure),
                format!("{:.6}", p.elapsed_seconds),
                p.dimension.to_string(),
            ])
            .map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Index of the first measure strictly below `epsilon`.
pub fn first_below(measures: &[f64], epsilon: f64) -> Option<usize> {
    measures.iter().position(|&m| m < epsilon)
}

/// Steady-state expectation of `o` at truncation `k_max`, together with the
/// generator dimension. Uses the charge-0 sector when the model declares a
/// symmetry.
pub fn heom_expectation(model: &ModelInstance, o: &DenseMatrix, k_max: usize, opts: &SolverOptions) -> Result<(f64, u64)> {
    let l = assemble(model, k_max)?;
    let dim = l.dim() as u64;
    let (phys, _) = match &model.symmetry {
        Some(spec) => steady_state_sector(&decompose(&l, spec)?, opts)?,
        None => steady_state(&l, opts)?,
    };
    Ok((expectation(&phys, o)?.re, dim))
}

/// `C_k(O) = |⟨O⟩(k) − ⟨O⟩(k + 1)|`.
pub fn c_measure(model: &ModelInstance, o: &DenseMatrix, k_max: usize, opts: &SolverOptions) -> Result<f64> {
    let (a, _) = heom_expectation(model, o, k_max, opts)?;
    let (b, _) = heom_expectation(model, o, k_max + 1, opts)?;
    Ok((a - b).abs())
}

/// Which eigenvalue a spectral measure follows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigSelector {
    /// Position in the canonical order of the whole generator; `Full(1)` is
    /// the gap eigenvalue.
    Full(usize),
    /// Position in the canonical order of one symmetry sector.
    Sector { charge: i64, index: usize },
}

impl EigSelector {
    fn index(&self) -> usize {
        match *self {
            EigSelector::Full(i) => i,
            EigSelector::Sector { index, .. } => index,
        }
    }
}

/// Leading eigenvalues picked out by `selector`, in canonical order.
pub fn selected_spectrum(
    model: &ModelInstance,
    selector: EigSelector,
    k_max: usize,
    opts: &SolverOptions,
) -> Result<Vec<Complex64>> {
    let l = assemble(model, k_max)?;
    let count = opts.count.max(selector.index() + 2);
    let eig = match selector {
        EigSelector::Full(_) => leading_eigs(l.matrix(), count.min(l.dim()), opts)?,
        EigSelector::Sector { charge, .. } => {
            let spec = model
                .symmetry
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument(format!("model {} declares no symmetry", model.name)))?;
            let d = decompose(&l, spec)?;
            let dim = d.sector(charge)?.indices.len();
            sector_leading_eigs(&d, charge, count.min(dim), opts)?
        }
    };
    Ok(eig.eigenvalues)
}

/// Element of `candidates` nearest `target`; ambiguous when a distinct
/// candidate is equally near within [`PAIRING_TOL`].
pub fn nearest(target: Complex64, candidates: &[Complex64]) -> Result<Complex64> {
    let mut sorted: Vec<Complex64> = candidates.to_vec();
    sorted.sort_by(|a, b| (a - target).norm().total_cmp(&(b - target).norm()));
    let best = *sorted
        .first()
        .ok_or_else(|| Error::InvalidArgument("no candidates to pair with".into()))?;
    if let Some(&second) = sorted.get(1) {
        let tie = ((second - target).norm() - (best - target).norm()).abs() <= PAIRING_TOL;
        if tie && (second - best).norm() > PAIRING_TOL {
            return Err(Error::AmbiguousPairing(best, second));
        }
    }
    Ok(best)
}

/// `S_k(λ) = |λ(k) − λ(k + 1)|`, with `λ(k + 1)` the eigenvalue at `k + 1`
/// nearest `λ(k)`.
pub fn s_measure(model: &ModelInstance, selector: EigSelector, k_max: usize, opts: &SolverOptions) -> Result<f64> {
    let here = selected_spectrum(model, selector, k_max, opts)?;
    let next = selected_spectrum(model, selector, k_max + 1, opts)?;
    s_measure_from(&here, &next, selector.index())
}

/// The spectral measure from two precomputed canonical spectra.
pub fn s_measure_from(here: &[Complex64], next: &[Complex64], index: usize) -> Result<f64> {
    let lambda = *here
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("eigenvalue {index} not computed")))?;
    Ok((nearest(lambda, next)? - lambda).norm())
}

fn scan(
    epsilon: f64,
    start: usize,
    limit: usize,
    mut eval: impl FnMut(usize) -> Result<(f64, u64)>,
) -> Result<ConvergenceTrace> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    if start > limit {
        return Err(Error::InvalidArgument(format!("empty truncation range {start}..={limit}")));
    }
    let mut points = Vec::new();
    let clock = Instant::now();
    let (mut previous, mut dim) = eval(start)?;
    for k in start..=limit {
        let t0 = clock.elapsed().as_secs_f64();
        let (next, next_dim) = eval(k + 1)?;
        let measure = (previous - next).abs();
        points.push(TracePoint {
            truncation: k,
            measure,
            elapsed_seconds: clock.elapsed().as_secs_f64() - t0,
            dimension: dim,
        });
        if measure < epsilon {
            return Ok(ConvergenceTrace {
                points,
                epsilon,
                selected: Some(k),
            });
        }
        previous = next;
        dim = next_dim;
    }
    Ok(ConvergenceTrace {
        points,
        epsilon,
        selected: None,
    })
}

/// Smallest `k_max` in `[k_start, k_limit]` with `C_k(O) < epsilon`.
pub fn auto_truncate(
    model: &ModelInstance,
    o: &DenseMatrix,
    epsilon: f64,
    k_start: usize,
    k_limit: usize,
    opts: &SolverOptions,
) -> Result<ConvergenceTrace> {
    scan(epsilon, k_start, k_limit, |k| heom_expectation(model, o, k, opts))
}

/// Steady-state expectation of `o` in the embedding with uniform cutoff
/// `cutoff`, with the embedding generator dimension.
pub fn lm_expectation(model: &ModelInstance, o: &DenseMatrix, cutoff: usize, opts: &SolverOptions) -> Result<(f64, u64)> {
    let spec = EmbeddingSpec::uniform(model, cutoff)?;
    let dim = (spec.hilbert_dim() as u64).pow(2);
    let (phys, _) = lm_steady_state(&spec, opts)?;
    Ok((expectation(&phys, o)?.re, dim))
}

/// Smallest uniform Fock cutoff in `[start, limit]` whose consecutive
/// difference of `⟨O⟩` is below `epsilon`.
pub fn auto_cutoff(
    model: &ModelInstance,
    o: &DenseMatrix,
    epsilon: f64,
    start: usize,
    limit: usize,
    opts: &SolverOptions,
) -> Result<ConvergenceTrace> {
    if start < 1 {
        return Err(Error::InvalidArgument("Fock cutoffs start at 1".into()));
    }
    scan(epsilon, start, limit, |nc| lm_expectation(model, o, nc, opts))
}
