//! Ordered spectra, steady states, gaps and the spectral property checks of
//! the HEOM generator.

use std::cmp::Ordering;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::heom::{HeomLiouvillian, HeomState};
use crate::matrix::{
    c64, eig_dense, eig_hermitian, eig_targeted_with, DenseMatrix, EigResult, KrylovOptions, SparseMatrix,
    DENSE_THRESHOLD,
};
use crate::symmetry::SectorDecomposition;

/// Eigenvalues closer than this to zero count towards the null space.
pub const ZERO_MULTIPLICITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub shift: Complex64,
    pub count: usize,
    /// Residual bound `‖𝓛v − λv‖`.
    pub tol: f64,
    pub krylov: KrylovOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            shift: c64(0.0, 0.0),
            count: 6,
            tol: 1e-10,
            krylov: KrylovOptions::default(),
        }
    }
}

/// Ascending `|Re|`, then ascending `|Im|`, then `Im ≥ 0` first.
pub fn compare_eigenvalues(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.abs()
        .total_cmp(&b.re.abs())
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then((a.im < 0.0).cmp(&(b.im < 0.0)))
}

pub fn canonical_order(eigenvalues: &[Complex64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
    order.sort_by(|&i, &j| compare_eigenvalues(&eigenvalues[i], &eigenvalues[j]).then(i.cmp(&j)));
    order
}

/// Targeted eigenpairs nearest the shift in canonical order. A singular
/// factorization is retried once at the suggested perturbed shift.
pub fn leading_eigs(matrix: &SparseMatrix, count: usize, opts: &SolverOptions) -> Result<EigResult> {
    let count = count.min(matrix.rows());
    let eig = match eig_targeted_with(matrix, opts.shift, count, opts.tol, &opts.krylov) {
        Err(Error::SingularShift { shift, suggested }) => {
            log::debug!("retrying targeted solve at shift {}", shift + suggested);
            eig_targeted_with(matrix, shift + suggested, count, opts.tol, &opts.krylov)?
        }
        other => other?,
    };
    Ok(eig.select(&canonical_order(&eig.eigenvalues)))
}

#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub eigenvalues: Vec<Complex64>,
    pub vectors: Vec<HeomState>,
    pub residuals: Vec<f64>,
}

impl SpectralResult {
    pub fn gap(&self) -> Result<Complex64> {
        self.eigenvalues.get(1).copied().ok_or(Error::NoGap(self.eigenvalues.len()))
    }
}

/// The `opts.count` eigenpairs of the full generator nearest the shift.
pub fn spectrum(l: &HeomLiouvillian, opts: &SolverOptions) -> Result<SpectralResult> {
    let eig = leading_eigs(l.matrix(), opts.count, opts)?;
    let vectors = (0..eig.len())
        .map(|k| l.state_from_vector(eig.vector(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralResult {
        eigenvalues: eig.eigenvalues,
        vectors,
        residuals: eig.residual_norms,
    })
}

/// A physical-block matrix with its defect metrics.
#[derive(Clone, Debug)]
pub struct PhysicalState {
    pub matrix: DenseMatrix,
    pub hermiticity_defect: f64,
    pub trace: Complex64,
    pub min_eigenvalue: f64,
}

impl PhysicalState {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension("physical state must be square".into()));
        }
        let hermiticity_defect = matrix.hermiticity_defect();
        let (evals, _) = eig_hermitian(&matrix.hermitian_part())?;
        Ok(Self {
            trace: matrix.trace(),
            min_eigenvalue: evals.first().copied().unwrap_or(0.0),
            hermiticity_defect,
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

/// Rescales a null vector so that its physical block has unit trace, then
/// hermitizes that block.
pub fn physical_from_state(state: &HeomState) -> Result<(PhysicalState, HeomState)> {
    let raw = state.physical();
    let tr = raw.trace();
    let scale = raw.frobenius_norm().max(state.norm());
    if tr.norm() <= 1e-13 * scale || scale == 0.0 {
        return Err(Error::ZeroTrace);
    }
    let inv = tr.inv();
    let data: Vec<Complex64> = state.as_slice().iter().map(|z| z * inv).collect();
    let normalized = HeomState::from_parts(data, state.system_dim(), state.hierarchy().clone());
    let phys = normalized.physical();
    let defect = phys.hermiticity_defect();
    let herm = phys.hermitian_part();
    let herm = &herm * (1.0 / herm.trace().re);
    let mut out = PhysicalState::new(herm)?;
    out.hermiticity_defect = defect;
    Ok((out, normalized))
}

pub(crate) fn check_null_space(eig: &EigResult) -> Result<()> {
    let near: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|z| z.norm() <= ZERO_MULTIPLICITY_TOL)
        .collect();
    match near.len() {
        1 => Ok(()),
        0 => Err(Error::NoConvergence(format!(
            "no eigenvalue within {ZERO_MULTIPLICITY_TOL:e} of zero; nearest {:?}",
            eig.eigenvalues.first()
        ))),
        _ => Err(Error::DegenerateNullSpace(near)),
    }
}

fn null_eigs(matrix: &SparseMatrix, opts: &SolverOptions) -> Result<EigResult> {
    let zero_shift = SolverOptions {
        shift: c64(0.0, 0.0),
        ..opts.clone()
    };
    let eig = leading_eigs(matrix, 2, &zero_shift)?;
    check_null_space(&eig)?;
    Ok(eig)
}

pub fn steady_state(l: &HeomLiouvillian, opts: &SolverOptions) -> Result<(PhysicalState, HeomState)> {
    let eig = null_eigs(l.matrix(), opts)?;
    physical_from_state(&l.state_from_vector(eig.vector(0))?)
}

/// Steady state from the charge-0 sector only.
pub fn steady_state_sector(decomp: &SectorDecomposition, opts: &SolverOptions) -> Result<(PhysicalState, HeomState)> {
    let eig = null_eigs(&decomp.sector(0)?.matrix, opts)?;
    physical_from_state(&decomp.embed(0, &eig.vector(0))?)
}

/// `λ₁` of a matrix in canonical order.
pub fn gap_of(matrix: &SparseMatrix, opts: &SolverOptions) -> Result<Complex64> {
    if matrix.rows() < 2 {
        return Err(Error::NoGap(matrix.rows()));
    }
    let eig = leading_eigs(matrix, opts.count.max(2), opts)?;
    Ok(eig.eigenvalues[1])
}

pub fn gap(l: &HeomLiouvillian, opts: &SolverOptions) -> Result<Complex64> {
    gap_of(l.matrix(), opts)
}

/// `Tr[O ρ]`. For Hermitian `O` the imaginary part must stay below `1e-8`.
pub fn expectation(state: &PhysicalState, o: &DenseMatrix) -> Result<Complex64> {
    let d = state.dim();
    if o.rows() != d || o.cols() != d {
        return Err(Error::Dimension(format!(
            "observable is {}x{}, state is {d}x{d}",
            o.rows(),
            o.cols()
        )));
    }
    let mut acc = c64(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += o[(i, j)] * state.matrix[(j, i)];
        }
    }
    if o.hermiticity_defect() <= 1e-12 && acc.im.abs() > 1e-8 {
        return Err(Error::InvalidState(format!(
            "expectation of a Hermitian observable has imaginary part {:.3e}",
            acc.im
        )));
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    Full,
    Sampled,
}

#[derive(Clone, Debug)]
pub struct PropertyReport {
    pub mode: CheckMode,
    pub dimension: usize,
    pub eigenvalue_count: usize,
    /// (i) largest distance from an eigenvalue to the nearest conjugate.
    pub conjugate_pairing: f64,
    /// (ii) `‖⟨⟨1^(0⃗,0⃗)|𝓛‖_∞`.
    pub trace_covector: f64,
    /// (iii) smallest `|λ|`.
    pub min_abs_eigenvalue: f64,
    /// (iv) largest real part among eigenvalues other than the null one.
    pub max_real: f64,
    /// (v) largest `|Tr ρ_i^(0⃗,0⃗)|` over unit eigenvectors with `|Re λ_i| > 1e-8`.
    pub max_physical_trace: f64,
}

impl PropertyReport {
    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mode = match self.mode {
            CheckMode::Full => "full",
            CheckMode::Sampled => "sampled",
        };
        let _ = writeln!(s, "mode={mode}");
        let _ = writeln!(s, "dimension={}", self.dimension);
        let _ = writeln!(s, "eigenvalues={}", self.eigenvalue_count);
        let _ = writeln!(s, "conjugate_pairing={:e}", self.conjugate_pairing);
        let _ = writeln!(s, "trace_covector={:e}", self.trace_covector);
        let _ = writeln!(s, "min_abs_eigenvalue={:e}", self.min_abs_eigenvalue);
        let _ = writeln!(s, "max_real={:e}", self.max_real);
        let _ = writeln!(s, "max_physical_trace={:e}", self.max_physical_trace);
        s
    }
}

/// Runs the property suite. Full mode needs a dense solve and falls back to
/// sampled mode above [`DENSE_THRESHOLD`].
pub fn check_properties(l: &HeomLiouvillian, mode: CheckMode, opts: &SolverOptions) -> Result<PropertyReport> {
    let mode = if l.dim() > DENSE_THRESHOLD { CheckMode::Sampled } else { mode };
    let (values, vectors): (Vec<Complex64>, DenseMatrix) = match mode {
        CheckMode::Full => {
            let eig = eig_dense(&l.matrix().to_dense(), false)?;
            (eig.eigenvalues, eig.right_vectors)
        }
        CheckMode::Sampled => {
            let eig = leading_eigs(l.matrix(), opts.count.max(2), opts)?;
            (eig.eigenvalues, eig.right_vectors)
        }
    };
    // In sampled mode the partner of an eigenvalue on the edge of the sample
    // may be missing, so only the strict interior is tested.
    let radius = values.iter().map(|z| (z - opts.shift).norm()).fold(0.0, f64::max);
    let conjugate_pairing = values
        .iter()
        .filter(|z| mode == CheckMode::Full || (*z - opts.shift).norm() < radius - 1e-8)
        .map(|z| values.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let null = (0..values.len())
        .min_by(|&a, &b| values[a].norm().total_cmp(&values[b].norm()))
        .ok_or_else(|| Error::NoConvergence("empty spectrum".into()))?;
    let d = l.system_dim();
    let max_real = values
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != null)
        .map(|(_, z)| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_physical_trace = values
        .iter()
        .enumerate()
        .filter(|(_, z)| z.re.abs() > 1e-8)
        .map(|(k, _)| (0..d).map(|i| vectors[(i * d + i, k)]).sum::<Complex64>().norm())
        .fold(0.0, f64::max);
    Ok(PropertyReport {
        mode,
        dimension: l.dim(),
        eigenvalue_count: values.len(),
        conjugate_pairing,
        trace_covector: l.trace_residual(),
        min_abs_eigenvalue: values[null].norm(),
        max_real,
        max_physical_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heom::assemble;
    use crate::model::{custom, lmg, qubit_decay, BathSpec, BathTerm};
    use crate::operators::qubit_operators;
    use std::collections::BTreeMap;

    #[test]
    fn ordering_is_total_and_stable() {
        let vals = vec![c64(-1.0, 2.0), c64(-1.0, -2.0), c64(0.0, 0.0), c64(-0.5, 0.0), c64(-1.0, 0.5)];
        let order = canonical_order(&vals);
        assert_eq!(order, vec![2, 3, 4, 0, 1]);
        assert_eq!(canonical_order(&vals), order);
    }

    #[test]
    fn qubit_decay_steady_state_is_ground() {
        let model = qubit_decay(1.0, c64(0.2, 0.0), 0.5, 1.0).unwrap();
        let l = assemble(&model, 6).unwrap();
        let (phys, state) = steady_state(&l, &SolverOptions::default()).unwrap();
        assert!(phys.matrix.max_abs_diff(&DenseMatrix::from_real_diag(&[1.0, 0.0])) <= 1e-8);
        assert_eq!(phys.matrix.trace(), c64(1.0, 0.0));
        let residual = l.apply(&state).unwrap().norm();
        assert!(residual <= 1e-9 * l.matrix().norm_inf().max(1.0));
    }

    #[test]
    fn lmg_far_below_threshold_is_polarized() {
        let model = lmg(20, 0.05, 1.0, 1.0, 1.0).unwrap();
        let l = assemble(&model, 3).unwrap();
        let (phys, _) = steady_state(&l, &SolverOptions::default()).unwrap();
        let sz = expectation(&phys, &model.named_operator("Sz").unwrap()).unwrap();
        assert!((sz.re / 10.0 + 1.0).abs() <= 0.05);
    }

    #[test]
    fn decoupled_gap() {
        // One level only, so the hierarchy decouples into pure damping.
        let model = custom(
            "free",
            DenseMatrix::zeros(1, 1),
            vec![BathSpec::new(DenseMatrix::identity(1), vec![BathTerm::real(0.0, 0.0, 0.7).unwrap()]).unwrap()],
            BTreeMap::new(),
        )
        .unwrap();
        let l = assemble(&model, 3).unwrap();
        let g = gap(&l, &SolverOptions::default()).unwrap();
        assert!((g - c64(-0.7, 0.0)).norm() < 1e-10);
        let eig = leading_eigs(l.matrix(), 10, &SolverOptions::default()).unwrap();
        assert!(eig.eigenvalues.iter().any(|z| (z - c64(-1.4, 0.0)).norm() < 1e-10));
        assert!(matches!(gap_of(&SparseMatrix::zeros(1, 1), &SolverOptions::default()), Err(Error::NoGap(1))));
    }

    #[test]
    fn expectation_examples() {
        let mixed = PhysicalState::new(DenseMatrix::from_real_diag(&[0.5, 0.5])).unwrap();
        assert_eq!(expectation(&mixed, &DenseMatrix::identity(2)).unwrap(), c64(1.0, 0.0));
        let q = qubit_operators();
        assert_eq!(expectation(&mixed, &q.sigma_z).unwrap(), c64(0.0, 0.0));
        let rho = PhysicalState::new(DenseMatrix::from_real_diag(&[0.3, 0.7])).unwrap();
        let proj = DenseMatrix::from_real_diag(&[1.0, 0.0]);
        assert!((expectation(&rho, &proj).unwrap() - c64(0.3, 0.0)).norm() < 1e-16);
        assert!(expectation(&rho, &DenseMatrix::identity(3)).is_err());
    }

    #[test]
    fn degenerate_null_space_is_reported() {
        let q = qubit_operators();
        let model = custom(
            "free",
            &q.sigma_z * 0.5,
            vec![BathSpec::new(q.sigma_minus.clone(), vec![BathTerm::real(0.0, 0.0, 1.0).unwrap()]).unwrap()],
            BTreeMap::new(),
        )
        .unwrap();
        let l = assemble(&model, 2).unwrap();
        assert!(matches!(
            steady_state(&l, &SolverOptions::default()),
            Err(Error::DegenerateNullSpace(_))
        ));
    }

    #[test]
    fn property_report_on_small_model() {
        let model = qubit_decay(1.0, c64(0.3, 0.0), 0.2, 1.0).unwrap();
        let l = assemble(&model, 3).unwrap();
        let r = check_properties(&l, CheckMode::Full, &SolverOptions::default()).unwrap();
        assert!(r.conjugate_pairing <= 1e-10);
        assert!(r.trace_covector <= 1e-12);
        assert!(r.min_abs_eigenvalue <= 1e-10);
        let text = r.to_text();
        assert!(text.contains("mode=full"));
        assert!(text.lines().all(|line| line.contains('=')));
        let s = check_properties(&l, CheckMode::Sampled, &SolverOptions::default()).unwrap();
        assert_eq!(s.mode, CheckMode::Sampled);
        assert!(s.min_abs_eigenvalue <= 1e-10);
    }
}
