//! Signatures of dissipative phase transitions: splitting the slowest
//! eigenmatrix into phases, mixtures, Uhlmann fidelity, symmetry-broken pairs
//! and finite-size extrapolation.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::heom::HeomLiouvillian;
use crate::matrix::{c64, eig_hermitian, herm_sqrt, DenseMatrix};
use crate::spectra::{check_null_space, expectation, leading_eigs, physical_from_state, steady_state_sector, PhysicalState, SolverOptions};
use crate::symmetry::{sector_leading_eigs, SectorDecomposition};

/// Eigenvalues of a split matrix below this fraction of its spectral radius
/// belong to neither phase.
pub const SPLIT_DROP_TOL: f64 = 1e-10;
/// Realness gate on `Im λ / scale` for the symmetry-broken construction.
pub const REALNESS_GATE: f64 = 1e-8;
/// Allowed relative Hermiticity defect of a matrix handed to [`split_phases`].
pub const SPLIT_HERMITIAN_TOL: f64 = 1e-8;
/// Allowed relative trace of a matrix handed to [`split_phases`].
pub const SPLIT_TRACE_TOL: f64 = 1e-6;
/// Clip tolerance for square roots inside the fidelity.
pub const FIDELITY_CLIP: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct PhasePair {
    pub rho_plus: PhysicalState,
    pub rho_minus: PhysicalState,
    /// `Tr[ρ₊† ρ₋]`.
    pub overlap: Complex64,
}

impl PhasePair {
    fn new(plus: DenseMatrix, minus: DenseMatrix) -> Result<Self> {
        let overlap = trace_product(&plus.adjoint(), &minus);
        Ok(Self {
            rho_plus: PhysicalState::new(plus)?,
            rho_minus: PhysicalState::new(minus)?,
            overlap,
        })
    }

    pub fn swapped(self) -> Self {
        Self {
            rho_plus: self.rho_minus,
            rho_minus: self.rho_plus,
            overlap: self.overlap.conj(),
        }
    }

    /// Orders the pair so that `ρ₋` has the lower `Tr[ρ O]`.
    pub fn oriented_by(self, o: &DenseMatrix) -> Result<Self> {
        let plus = expectation(&self.rho_plus, o)?.re;
        let minus = expectation(&self.rho_minus, o)?.re;
        Ok(if minus > plus { self.swapped() } else { self })
    }
}

fn trace_product(a: &DenseMatrix, b: &DenseMatrix) -> Complex64 {
    let n = a.rows();
    let mut acc = c64(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Rotates the global phase of `m` so that it becomes as Hermitian as
/// possible. Returns the rotated matrix and its relative Hermiticity defect.
///
/// With `m = e^{-iθ} H`, `Σ m_ij m_ji = e^{-2iθ} ‖H‖²` fixes `θ` up to a sign.
pub fn hermitian_phase(m: &DenseMatrix) -> (DenseMatrix, f64) {
    let n = m.rows();
    let norm2 = m.frobenius_norm().powi(2);
    if norm2 == 0.0 {
        return (m.clone(), 0.0);
    }
    let mut z = c64(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            z += m[(i, j)] * m[(j, i)];
        }
    }
    // z / ‖m‖² = e^{-2iθ}; its modulus drops below 1 when no phase works.
    let phase = if z.norm() > 0.0 { (z / z.norm()).conj().sqrt() } else { c64(1.0, 0.0) };
    let rotated = m.scale(phase);
    let defect = rotated.hermiticity_defect() / m.max_abs();
    (rotated, defect)
}

/// Splits a traceless Hermitian matrix by the sign of its eigenvalues into
/// two orthogonal unit-trace states.
pub fn split_phases(rho1: &DenseMatrix) -> Result<PhasePair> {
    if !rho1.is_square() {
        return Err(Error::Dimension("split_phases needs a square matrix".into()));
    }
    let scale = rho1.max_abs();
    if scale == 0.0 {
        return Err(Error::Split("zero matrix".into()));
    }
    let defect = rho1.hermiticity_defect() / scale;
    if defect > SPLIT_HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let tr = rho1.trace().norm() / rho1.frobenius_norm();
    if tr > SPLIT_TRACE_TOL {
        return Err(Error::Split(format!("relative trace {tr:.3e} is not zero")));
    }
    let (values, u) = eig_hermitian(&rho1.hermitian_part())?;
    let radius = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let n = rho1.rows();
    let part = |positive: bool| -> Option<DenseMatrix> {
        let picked: Vec<(usize, f64)> = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v.abs() >= SPLIT_DROP_TOL * radius && (v > 0.0) == positive)
            .map(|(k, &v)| (k, v.abs()))
            .collect();
        let total: f64 = picked.iter().map(|p| p.1).sum();
        if picked.is_empty() {
            return None;
        }
        let m = DenseMatrix::from_fn(n, n, |i, j| {
            picked.iter().map(|&(k, w)| u[(i, k)] * u[(j, k)].conj() * (w / total)).sum()
        });
        Some(m.hermitian_part())
    };
    match (part(true), part(false)) {
        (Some(plus), Some(minus)) => PhasePair::new(plus, minus),
        _ => Err(Error::Split("all eigenvalues share one sign".into())),
    }
}

/// Equal-weight mixture `(ρ₊ + ρ₋)/2`.
pub fn reconstruct_mixture(pair: &PhasePair) -> Result<PhysicalState> {
    let sum = &pair.rho_plus.matrix + &pair.rho_minus.matrix;
    let mix = &sum * 0.5;
    let tr = mix.trace().re;
    PhysicalState::new(&mix * (1.0 / tr))
}

/// Uhlmann fidelity `Tr √(√ρ σ √ρ)`, clamped to `[0, 1]`.
pub fn fidelity(rho: &PhysicalState, sigma: &PhysicalState) -> Result<f64> {
    fidelity_of(&rho.matrix, &sigma.matrix)
}

pub fn fidelity_of(rho: &DenseMatrix, sigma: &DenseMatrix) -> Result<f64> {
    if rho.rows() != sigma.rows() || !rho.is_square() || !sigma.is_square() {
        return Err(Error::Dimension("fidelity operands differ in shape".into()));
    }
    let sqrt_rho = herm_sqrt(rho, FIDELITY_CLIP)?;
    // Validates σ against the same clip tolerance.
    herm_sqrt(sigma, FIDELITY_CLIP)?;
    let inner = sqrt_rho.matmul(sigma)?.matmul(&sqrt_rho)?.hermitian_part();
    let (values, _) = eig_hermitian(&inner)?;
    let f: f64 = values.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok(f.clamp(0.0, 1.0))
}

/// The slowest decaying eigenvalue `λ₁` of `l` and the phase pair obtained by
/// splitting the physical block of its eigenmatrix.
pub fn first_order_pair(l: &HeomLiouvillian, opts: &SolverOptions) -> Result<(Complex64, PhasePair)> {
    let eig = leading_eigs(l.matrix(), opts.count.max(2), opts)?;
    let lambda = eig.eigenvalues[1];
    let state = l.state_from_vector(eig.vector(1))?;
    let (rho1, _) = hermitian_phase(&state.physical());
    Ok((lambda, split_phases(&rho1)?))
}

/// Steady state, `λ₁⁽⁰⁾` and the phase pair of the sector holding the steady
/// state, all from one eigensolve at shift 0.
pub fn first_order_analysis(
    decomp: &SectorDecomposition,
    opts: &SolverOptions,
) -> Result<(PhysicalState, Complex64, PhasePair)> {
    let dim = decomp.sector(0)?.indices.len();
    let zero = SolverOptions {
        shift: c64(0.0, 0.0),
        ..opts.clone()
    };
    let eig = sector_leading_eigs(decomp, 0, opts.count.max(2).min(dim), &zero)?;
    check_null_space(&eig)?;
    let lambda = *eig.eigenvalues.get(1).ok_or(Error::NoGap(eig.eigenvalues.len()))?;
    let (steady, _) = physical_from_state(&decomp.embed(0, &eig.vector(0))?)?;
    let state = decomp.embed(0, &eig.vector(1))?;
    let (rho1, _) = hermitian_phase(&state.physical());
    Ok((steady, lambda, split_phases(&rho1)?))
}

/// The symmetry-broken pair of a two-sector decomposition, built from the
/// leading eigenmatrix of the charge-1 sector.
///
/// `gate_scale` sets the realness gate `|Im λ₀⁽¹⁾| / gate_scale < 1e-8`.
pub fn ssb_pair(decomp: &SectorDecomposition, opts: &SolverOptions, gate_scale: f64) -> Result<(Complex64, PhasePair)> {
    if decomp.spec().group_order != 2 {
        return Err(Error::InvalidArgument(format!(
            "symmetry-broken pair needs a two-element group, got order {}",
            decomp.spec().group_order
        )));
    }
    let eig = sector_leading_eigs(decomp, 1, opts.count.max(1), opts)?;
    let lambda = eig.eigenvalues[0];
    if lambda.im.abs() / gate_scale >= REALNESS_GATE {
        return Err(Error::Realness {
            eigenvalue: lambda,
            gate: REALNESS_GATE,
        });
    }
    let state = decomp.embed(1, &eig.vector(0))?;
    let (rho1, _) = hermitian_phase(&state.physical());
    Ok((lambda, split_phases(&rho1)?))
}

/// Steady state from the charge-0 sector together with [`ssb_pair`].
pub fn ssb_analysis(
    decomp: &SectorDecomposition,
    opts: &SolverOptions,
    gate_scale: f64,
) -> Result<(PhysicalState, Complex64, PhasePair)> {
    let (steady, _) = steady_state_sector(decomp, opts)?;
    let (lambda, pair) = ssb_pair(decomp, opts, gate_scale)?;
    Ok((steady, lambda, pair))
}

/// Acts with the parity of a two-element group on a system matrix:
/// entry `(i, j)` picks up `(-1)^{q_i - q_j}`.
pub fn parity_conjugate(system_charges: &[i64], rho: &DenseMatrix) -> Result<DenseMatrix> {
    if system_charges.len() != rho.rows() || !rho.is_square() {
        return Err(Error::Dimension("charges and matrix disagree".into()));
    }
    Ok(DenseMatrix::from_fn(rho.rows(), rho.cols(), |i, j| {
        if (system_charges[i] - system_charges[j]).rem_euclid(2) == 0 {
            rho[(i, j)]
        } else {
            -rho[(i, j)]
        }
    }))
}

/// Intercept at `1/N = 0` of the line through the two points with the largest
/// `N`.
pub fn extrapolate(values: &[(f64, f64)]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "extrapolation needs two points, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (n1, y1) = sorted[sorted.len() - 2];
    let (n2, y2) = sorted[sorted.len() - 1];
    if n1 == n2 || n1 == 0.0 || n2 == 0.0 {
        return Err(Error::InvalidArgument(format!("sizes {n1} and {n2} do not define a line in 1/N")));
    }
    let (x1, x2) = (1.0 / n1, 1.0 / n2);
    Ok((y2 * x1 - y1 * x2) / (x1 - x2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heom::assemble;
    use crate::model::z2_lmg;
    use crate::spectra::expectation;
    use crate::symmetry::decompose;
    use proptest::prelude::*;

    fn diag(v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_real_diag(v)
    }

    fn close(a: &DenseMatrix, b: &DenseMatrix, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn split_two_level() {
        let pair = split_phases(&diag(&[0.5, -0.5])).unwrap();
        assert!(close(&pair.rho_plus.matrix, &diag(&[1.0, 0.0]), 1e-14));
        assert!(close(&pair.rho_minus.matrix, &diag(&[0.0, 1.0]), 1e-14));
    }

    #[test]
    fn split_three_level() {
        let pair = split_phases(&diag(&[0.3, 0.1, -0.4])).unwrap();
        assert!(close(&pair.rho_plus.matrix, &diag(&[0.75, 0.25, 0.0]), 1e-14));
        assert!(close(&pair.rho_minus.matrix, &diag(&[0.0, 0.0, 1.0]), 1e-14));
    }

    #[test]
    fn split_rejects_bad_input() {
        assert!(matches!(split_phases(&diag(&[0.5, 0.5])), Err(Error::Split(_))));
        let mut m = diag(&[0.5, -0.5]);
        m[(0, 1)] = c64(0.1, 0.0);
        assert!(matches!(split_phases(&m), Err(Error::NotHermitian(_))));
        assert!(matches!(split_phases(&diag(&[0.0, 0.0])), Err(Error::Split(_))));
    }

    #[test]
    fn mixture_of_orthogonal_pair() {
        let pair = split_phases(&diag(&[0.5, -0.5])).unwrap();
        let mix = reconstruct_mixture(&pair).unwrap();
        assert!(close(&mix.matrix, &diag(&[0.5, 0.5]), 1e-15));
        assert_eq!(mix.trace.re, 1.0);
    }

    #[test]
    fn fidelity_examples() {
        let a = PhysicalState::new(diag(&[1.0, 0.0])).unwrap();
        let b = PhysicalState::new(diag(&[0.0, 1.0])).unwrap();
        let mixed = PhysicalState::new(diag(&[0.5, 0.5])).unwrap();
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!(fidelity(&a, &b).unwrap() < 1e-12);
        assert!((fidelity(&mixed, &a).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let p = [0.2f64, 0.3, 0.5];
        let q = [0.6, 0.1, 0.3];
        let closed: f64 = p.iter().zip(&q).map(|(x, y)| (x * y).sqrt()).sum();
        let f = fidelity_of(&diag(&p), &diag(&q)).unwrap();
        assert!((f - closed).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_examples() {
        let line: Vec<(f64, f64)> = [50.0, 100.0].iter().map(|&n| (n, 3.0 + 5.0 / n)).collect();
        assert!((extrapolate(&line).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(extrapolate(&[(4.0, 2.0), (8.0, 2.0), (6.0, 2.0)]).unwrap(), 2.0);
        let quad: Vec<(f64, f64)> = [50.0, 100.0].iter().map(|&n| (n, 1.0 / (n * n))).collect();
        // Line through (1/50, 1/2500) and (1/100, 1/10000): intercept -1/5000.
        assert!((extrapolate(&quad).unwrap() + 2e-4).abs() < 1e-15);
        assert!(extrapolate(&[(4.0, 1.0)]).is_err());
        assert!(extrapolate(&[(4.0, 1.0), (4.0, 2.0)]).is_err());
    }

    #[test]
    fn hermitian_phase_recovers_rotated_matrix() {
        let mut h = diag(&[0.4, -0.1, -0.3]);
        h[(0, 2)] = c64(0.2, 0.1);
        h[(2, 0)] = c64(0.2, -0.1);
        let rotated = h.scale(Complex64::from_polar(1.0, 0.7));
        let (fixed, defect) = hermitian_phase(&rotated);
        assert!(defect < 1e-14);
        assert!(close(&fixed, &h, 1e-14) || close(&fixed, &h.scale(c64(-1.0, 0.0)), 1e-14));
    }

    #[test]
    fn parity_swaps_broken_pair() {
        // Deep in the broken phase g = V/γ = -3.
        let model = z2_lmg(10, -1.5, 0.5, 1.0, 1.0, 0.5).unwrap();
        let l = assemble(&model, 4).unwrap();
        let spec = model.symmetry.clone().unwrap();
        let d = decompose(&l, &spec).unwrap();
        let opts = SolverOptions::default();
        let eig = sector_leading_eigs(&d, 1, 2, &opts).unwrap();
        let state = d.embed(1, &eig.vector(0)).unwrap();
        let (rho1, defect) = hermitian_phase(&state.physical());
        assert!(defect < 1e-8, "defect {defect}");
        let pair = split_phases(&rho1).unwrap();
        assert!(pair.overlap.norm() < 1e-8);
        let swapped = parity_conjugate(&spec.system_charges, &pair.rho_plus.matrix).unwrap();
        assert!(close(&swapped, &pair.rho_minus.matrix, 1e-8));
        let sx = model.named_operator("Sx").unwrap();
        let plus = expectation(&pair.rho_plus, &sx).unwrap().re;
        let minus = expectation(&pair.rho_minus, &sx).unwrap().re;
        assert!((plus + minus).abs() < 1e-8 && plus.abs() > 0.5, "{plus} {minus}");
        let (steady, lambda, pair) = ssb_analysis(&d, &opts, 1.0).unwrap();
        assert!(lambda.im.abs() < 1e-8);
        let mix = reconstruct_mixture(&pair).unwrap();
        // Finite-size value at N = 10; it approaches 1 with N.
        assert!(fidelity(&mix, &steady).unwrap() > 0.95);
    }

    #[test]
    fn first_order_analysis_matches_separate_solves() {
        let model = crate::model::lmg(8, 0.5, 1.0, 1.0, 1.0).unwrap();
        let l = assemble(&model, 3).unwrap();
        let d = decompose(&l, model.symmetry.as_ref().unwrap()).unwrap();
        let opts = SolverOptions::default();
        let (steady, lambda, pair) = first_order_analysis(&d, &opts).unwrap();
        let (direct, _) = steady_state_sector(&d, &opts).unwrap();
        assert!(close(&steady.matrix, &direct.matrix, 1e-9));
        let eig = sector_leading_eigs(&d, 0, 3, &opts).unwrap();
        assert!((eig.eigenvalues[1] - lambda).norm() < 1e-9);
        assert!(lambda.im.abs() < 1e-9);

        let sz = model.named_operator("Sz").unwrap();
        let oriented = pair.oriented_by(&sz).unwrap();
        let minus = expectation(&oriented.rho_minus, &sz).unwrap().re;
        let plus = expectation(&oriented.rho_plus, &sz).unwrap().re;
        assert!(minus < plus);
        let again = oriented.clone().swapped().oriented_by(&sz).unwrap();
        assert!(close(&again.rho_minus.matrix, &oriented.rho_minus.matrix, 0.0));
    }

    fn hermitian_traceless(n: usize, entries: &[f64]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                if i == j {
                    m[(i, i)] = c64(entries[k], 0.0);
                    k += 1;
                } else {
                    m[(i, j)] = c64(entries[k], entries[k + 1]);
                    m[(j, i)] = m[(i, j)].conj();
                    k += 2;
                }
            }
        }
        let shift = m.trace().re / n as f64;
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        m
    }

    proptest! {
        #[test]
        fn split_pair_is_orthogonal_and_recovers_input(entries in prop::collection::vec(-1.0f64..1.0, 16)) {
            let m = hermitian_traceless(4, &entries);
            prop_assume!(m.max_abs() > 1e-3);
            let pair = split_phases(&m).unwrap();
            prop_assert!(pair.overlap.norm() < 1e-12);
            prop_assert!((pair.rho_plus.trace.re - 1.0).abs() < 1e-12);
            // m = s (ρ₊ − ρ₋) with s the positive weight, since m is traceless.
            let diff = &pair.rho_plus.matrix - &pair.rho_minus.matrix;
            let (values, _) = eig_hermitian(&m).unwrap();
            let s: f64 = values.iter().filter(|&&v| v > 0.0).sum();
            prop_assert!(diff.scale(c64(s, 0.0)).max_abs_diff(&m) < 1e-10);
        }

        #[test]
        fn fidelity_is_symmetric_and_stable(a in prop::collection::vec(-1.0f64..1.0, 16),
                                            b in prop::collection::vec(-1.0f64..1.0, 16),
                                            eps in 0.0f64..0.05) {
            let to_state = |e: &[f64]| {
                let h = hermitian_traceless(4, e);
                let sq = h.matmul(&h).unwrap();
                let mut rho = &sq + &DenseMatrix::identity(4).scale(c64(0.01, 0.0));
                let t = rho.trace().re;
                rho = &rho * (1.0 / t);
                rho.hermitian_part()
            };
            let rho = to_state(&a);
            let sigma = to_state(&b);
            let f1 = fidelity_of(&rho, &sigma).unwrap();
            let f2 = fidelity_of(&sigma, &rho).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-10);
            let mixed = &(&rho * (1.0 - eps)) + &(&sigma * eps);
            prop_assert!(fidelity_of(&rho, &mixed).unwrap() >= 1.0 - eps - 1e-10);
        }
    }
}
