//! Eigensolvers: full dense decompositions backed by faer, and a shift-invert
//! Krylov-Schur iteration for the few eigenvalues of a large sparse matrix
//! closest to a target shift.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatMut, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{c64, DenseMatrix, SparseMatrix};

/// Largest dimension accepted by [`eig_dense`] (a complex dense work array of
/// roughly 576 MB).
pub const DENSE_THRESHOLD: usize = 6000;

#[derive(Clone, Debug)]
pub struct EigResult {
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm right eigenvectors stored as columns.
    pub right_vectors: DenseMatrix,
    /// Unit-norm left eigenvectors (`w^† A = λ w^†`) stored as columns.
    pub left_vectors: Option<DenseMatrix>,
    /// `‖A v − λ v‖` for each pair.
    pub residual_norms: Vec<f64>,
    /// Largest `|⟨v_i, v_j⟩|` over distinct right eigenvectors. Values close to
    /// one flag a (nearly) defective matrix.
    pub max_vector_overlap: f64,
}

impl EigResult {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vec<Complex64> {
        self.right_vectors.column(i)
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_norms.iter().copied().fold(0.0, f64::max)
    }

    /// Keeps the pairs at `order` (in that order).
    pub fn select(&self, order: &[usize]) -> EigResult {
        let n = self.right_vectors.rows();
        let right = DenseMatrix::from_fn(n, order.len(), |i, k| self.right_vectors[(i, order[k])]);
        let left = self
            .left_vectors
            .as_ref()
            .map(|l| DenseMatrix::from_fn(n, order.len(), |i, k| l[(i, order[k])]));
        let vectors: Vec<Vec<Complex64>> = (0..order.len()).map(|k| right.column(k)).collect();
        EigResult {
            eigenvalues: order.iter().map(|&k| self.eigenvalues[k]).collect(),
            right_vectors: right,
            left_vectors: left,
            residual_norms: order.iter().map(|&k| self.residual_norms[k]).collect(),
            max_vector_overlap: max_overlap(&vectors),
        }
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let nrm = norm(v);
    if nrm > 0.0 {
        v.iter_mut().for_each(|z| *z /= nrm);
    }
    nrm
}

fn max_overlap(vectors: &[Vec<Complex64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            worst = worst.max(dot(&vectors[i], &vectors[j]).norm());
        }
    }
    worst
}

fn residual(apply: impl Fn(&[Complex64]) -> Vec<Complex64>, lambda: Complex64, v: &[Complex64]) -> f64 {
    let av = apply(v);
    av.iter()
        .zip(v)
        .map(|(a, x)| (a - lambda * x).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Full eigendecomposition of a square dense matrix.
pub fn eig_dense(a: &DenseMatrix, want_left: bool) -> Result<EigResult> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n > DENSE_THRESHOLD {
        return Err(Error::Budget(format!(
            "dense eigensolve of dimension {n} exceeds {DENSE_THRESHOLD}"
        )));
    }
    let evd = a
        .to_faer()
        .eigen()
        .map_err(|e| Error::NoConvergence(format!("dense eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let eigenvalues: Vec<Complex64> = (0..n).map(|i| s[i]).collect();
    let mut vectors: Vec<Vec<Complex64>> = (0..n)
        .map(|j| (0..n).map(|i| u[(i, j)]).collect())
        .collect();
    for v in &mut vectors {
        normalize(v);
    }
    let residual_norms = eigenvalues
        .iter()
        .zip(&vectors)
        .map(|(&l, v)| residual(|x| a.matvec(x), l, v))
        .collect();
    let left_vectors = if want_left {
        // Rows of U^{-1} are the (unnormalized) conjugated left eigenvectors.
        let lu = u.partial_piv_lu();
        let inv = lu.solve(Mat::<Complex64>::identity(n, n));
        let mut left = DenseMatrix::zeros(n, n);
        for k in 0..n {
            let mut w: Vec<Complex64> = (0..n).map(|i| inv[(k, i)].conj()).collect();
            normalize(&mut w);
            for i in 0..n {
                left[(i, k)] = w[i];
            }
        }
        Some(left)
    } else {
        None
    };
    let right_vectors = DenseMatrix::from_fn(n, n, |i, j| vectors[j][i]);
    Ok(EigResult {
        eigenvalues,
        right_vectors,
        left_vectors,
        residual_norms,
        max_vector_overlap: max_overlap(&vectors),
    })
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
/// Only the lower triangle is read.
pub fn eig_hermitian(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    let evd = a
        .to_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::NoConvergence(format!("Hermitian eigensolver: {e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..a.rows()).map(|i| s[i].re).collect();
    Ok((values, DenseMatrix::from_faer(evd.U())))
}

/// Positive semidefinite square root of a Hermitian matrix. Eigenvalues in
/// `[-clip_tol, 0)` are clipped to zero.
pub fn herm_sqrt(a: &DenseMatrix, clip_tol: f64) -> Result<DenseMatrix> {
    let defect = a.hermiticity_defect();
    if defect > 1e-10 {
        return Err(Error::NotHermitian(defect));
    }
    let (values, u) = eig_hermitian(&a.hermitian_part())?;
    if let Some(&bad) = values.iter().find(|&&v| v < -clip_tol) {
        return Err(Error::NotPsd(bad));
    }
    let n = a.rows();
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let out = DenseMatrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| u[(i, k)] * roots[k] * u[(j, k)].conj()).sum()
    });
    Ok(out.hermitian_part())
}

/// Solves `A x = b` for a dense square `A`.
pub fn solve_dense(a: &DenseMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if !a.is_square() || a.rows() != b.len() {
        return Err(Error::Dimension("solve_dense operand shapes".into()));
    }
    let lu = a.to_faer().partial_piv_lu();
    let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    lu.solve_in_place(rhs.as_mut());
    let x: Vec<Complex64> = (0..b.len()).map(|i| rhs[(i, 0)]).collect();
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NoConvergence("singular dense system".into()));
    }
    Ok(x)
}

/// Tuning knobs of the shift-invert Krylov-Schur iteration.
#[derive(Clone, Debug)]
pub struct KrylovOptions {
    /// Subspace size; defaults to `max(2·count + 20, 40)`.
    pub krylov_dim: Option<usize>,
    pub max_restarts: usize,
    /// Matrices at or below this dimension are solved densely.
    pub dense_below: usize,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            krylov_dim: None,
            max_restarts: 300,
            dense_below: 400,
            seed: 0x5eed,
        }
    }
}

/// The `count` eigenvalues of `a` nearest `shift`, ordered by distance to the
/// shift, with residuals below `tol`.
pub fn eig_targeted(a: &SparseMatrix, shift: Complex64, count: usize, tol: f64) -> Result<EigResult> {
    eig_targeted_with(a, shift, count, tol, &KrylovOptions::default())
}

pub fn eig_targeted_with(
    a: &SparseMatrix,
    shift: Complex64,
    count: usize,
    tol: f64,
    opts: &KrylovOptions,
) -> Result<EigResult> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    if count == 0 || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "count = {count} and tol = {tol} must both be positive"
        )));
    }
    let n = a.rows();
    if count > n {
        return Err(Error::InvalidArgument(format!(
            "requested {count} eigenvalues of a {n}-dimensional matrix"
        )));
    }
    if n <= opts.dense_below || n <= count + 2 {
        return targeted_dense(a, shift, count, tol);
    }

    let scale = a.norm_inf().max(1.0);
    let singular = || Error::SingularShift {
        shift,
        suggested: c64(1e-8 * scale, 0.0),
    };
    let csc = a.to_faer_csc_shifted(shift)?;
    let lu = csc.sp_lu().map_err(|_| singular())?;
    // Locked pairs sitting on the shift: (right vector, left vector, ψᴴx).
    // Their component is removed obliquely before each solve; otherwise the
    // near-singular factorization turns roundoff along that direction into
    // O(1) errors everywhere else.
    let mut on_shift: Vec<(Vec<Complex64>, Vec<Complex64>, Complex64)> = Vec::new();
    let solve = |x: &[Complex64], on_shift: &[(Vec<Complex64>, Vec<Complex64>, Complex64)]| -> Result<Vec<Complex64>> {
        let mut y = x.to_vec();
        for (xr, psi, denom) in on_shift {
            let c = dot(psi, &y) / denom;
            y.iter_mut().zip(xr).for_each(|(yi, xi)| *yi -= c * xi);
        }
        lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut y, n, 1));
        if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(singular());
        }
        Ok(y)
    };

    let m = opts
        .krylov_dim
        .unwrap_or((2 * count + 20).max(40))
        .clamp(count + 2, n - 1);
    let keep = (count + (m - count) / 2).clamp(count, m - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vector = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
        (0..n)
            .map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    };

    // Converged Schur vectors. Every Krylov vector is kept orthogonal to them,
    // so the iteration runs on the deflated operator and a huge inverted
    // eigenvalue (a shift sitting on an eigenvalue) cannot swamp the rest.
    let mut locked: Vec<Vec<Complex64>> = Vec::new();
    let mut locked_values: Vec<Complex64> = Vec::new();

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m + 1);
    let mut v0 = random_vector(&mut rng);
    normalize(&mut v0);
    basis.push(v0);
    // Rayleigh quotient in Krylov form: op(V_m) = V_{m+1} h.
    let mut h = DenseMatrix::zeros(m + 1, m);
    let mut start = 0usize;
    let mut report = Vec::new();

    for _restart in 0..opts.max_restarts {
        for j in start..m {
            let mut w = solve(&basis[j], &on_shift)?;
            let w_norm = norm(&w);
            project_out(&mut w, &locked);
            let mut coeffs = vec![Complex64::default(); j + 1];
            for _pass in 0..2 {
                for (k, vk) in basis.iter().enumerate().take(j + 1) {
                    let c = dot(vk, &w);
                    coeffs[k] += c;
                    w.iter_mut().zip(vk).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            for (k, c) in coeffs.into_iter().enumerate() {
                h[(k, j)] = c;
            }
            let beta = norm(&w);
            if beta <= 1e-13 * w_norm.max(f64::MIN_POSITIVE) {
                // Invariant subspace: continue with a fresh orthogonal direction.
                let mut r = random_vector(&mut rng);
                project_out(&mut r, &locked);
                project_out(&mut r, &basis[..j + 1]);
                normalize(&mut r);
                h[(j + 1, j)] = Complex64::default();
                basis.push(r);
            } else {
                h[(j + 1, j)] = c64(beta, 0.0);
                w.iter_mut().for_each(|z| *z /= beta);
                basis.push(w);
            }
        }

        let hm = Mat::from_fn(m, m, |i, j| h[(i, j)]);
        let evd = hm
            .eigen()
            .map_err(|e| Error::NoConvergence(format!("projected eigenproblem: {e:?}")))?;
        let theta: Vec<Complex64> = (0..m).map(|i| evd.S().column_vector()[i]).collect();
        let y = evd.U();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| theta[j].norm().total_cmp(&theta[i].norm()).then(i.cmp(&j)));
        let ritz_vector = |idx: usize| -> Vec<Complex64> {
            let mut x = vec![Complex64::default(); n];
            for (k, bk) in basis.iter().enumerate().take(m) {
                let yk = y[(k, idx)];
                x.iter_mut().zip(bk).for_each(|(xi, vk)| *xi += yk * vk);
            }
            x
        };

        let wanted = count - locked.len();
        let mut converged = Vec::new();
        report.clear();
        for &idx in order.iter().take(wanted) {
            let mut x = ritz_vector(idx);
            project_out(&mut x, &locked);
            normalize(&mut x);
            let lambda = shift + theta[idx].inv();
            let mut r: Vec<Complex64> = a.matvec(&x).iter().zip(&x).map(|(ax, xi)| ax - lambda * xi).collect();
            project_out(&mut r, &locked);
            let res = norm(&r);
            report.push((lambda, res));
            if res <= tol {
                converged.push((idx, lambda, x));
            }
        }

        if !converged.is_empty() {
            for (_, lambda, mut x) in converged.iter().cloned() {
                project_out(&mut x, &locked);
                normalize(&mut x);
                if (lambda - shift).norm() <= 1e-6 * scale {
                    let mut psi = random_vector(&mut rng);
                    lu.solve_adjoint_in_place(MatMut::from_column_major_slice_mut(&mut psi, n, 1));
                    if psi.iter().all(|z| z.re.is_finite() && z.im.is_finite()) && normalize(&mut psi) > 0.0 {
                        // Left vector of the true eigenvector, which is not
                        // the deflated Schur vector once others are locked.
                        let xr = recover_eigenvectors(
                            a,
                            &[locked.clone(), vec![x.clone()]].concat(),
                            &[locked_values.clone(), vec![lambda]].concat(),
                        )
                        .pop()
                        .expect("one pair per Schur vector")
                        .1;
                        let denom = dot(&psi, &xr);
                        if denom.norm() > 1e-12 {
                            on_shift.push((xr, psi, denom));
                        }
                    }
                }
                locked.push(x);
                locked_values.push(lambda);
            }
            if locked.len() >= count {
                return Ok(finish_targeted(a, shift, recover_eigenvectors(a, &locked, &locked_values)));
            }
            // Restart from the unconverged leading Ritz directions.
            let mut v = vec![Complex64::default(); n];
            for &idx in order.iter().take(keep) {
                if converged.iter().all(|c| c.0 != idx) {
                    let x = ritz_vector(idx);
                    let w = 1.0 / norm(&x).max(f64::MIN_POSITIVE);
                    v.iter_mut().zip(&x).for_each(|(vi, xi)| *vi += xi * w);
                }
            }
            project_out(&mut v, &locked);
            if normalize(&mut v) <= 1e-8 {
                v = random_vector(&mut rng);
                project_out(&mut v, &locked);
                normalize(&mut v);
            }
            basis = vec![v];
            h = DenseMatrix::zeros(m + 1, m);
            start = 0;
            continue;
        }

        // Thick restart on the leading Ritz vectors.
        let ritz = Mat::from_fn(m, keep, |i, k| y[(i, order[k])]);
        let q = ritz.qr().compute_thin_Q();
        let hq = &hm * &q;
        let r_small = q.adjoint() * &hq;
        let mut new_basis = Vec::with_capacity(m + 1);
        for k in 0..keep {
            let mut v = vec![Complex64::default(); n];
            for i in 0..m {
                let qik = q[(i, k)];
                v.iter_mut().zip(&basis[i]).for_each(|(vi, bi)| *vi += qik * bi);
            }
            new_basis.push(v);
        }
        new_basis.push(basis.pop().expect("basis holds m + 1 vectors"));
        basis = new_basis;
        let mut h_new = DenseMatrix::zeros(m + 1, m);
        for i in 0..keep {
            for k in 0..keep {
                h_new[(i, k)] = r_small[(i, k)];
            }
        }
        for k in 0..keep {
            h_new[(keep, k)] = (0..m).map(|i| h[(m, i)] * q[(i, k)]).sum();
        }
        h = h_new;
        start = keep;
    }
    Err(Error::NoConvergence(format!(
        "shift-invert Krylov-Schur after {} restarts ({} locked); Ritz values and residuals: {:?}",
        opts.max_restarts,
        locked.len(),
        report
    )))
}

fn project_out(v: &mut [Complex64], against: &[Vec<Complex64>]) {
    for _pass in 0..2 {
        for u in against {
            let c = dot(u, v);
            v.iter_mut().zip(u).for_each(|(vi, ui)| *vi -= c * ui);
        }
    }
}

/// Eigenvectors from locked Schur vectors: `x_i = q_i + Σ_{j<i} c_j q_j` with
/// `(T_{<i,<i} - λ_i) c = -T_{<i,i}` and `T = Qᴴ A Q`.
fn recover_eigenvectors(
    a: &SparseMatrix,
    schur: &[Vec<Complex64>],
    values: &[Complex64],
) -> Vec<(Complex64, Vec<Complex64>, f64)> {
    let k = schur.len();
    let aq: Vec<Vec<Complex64>> = schur.iter().map(|q| a.matvec(q)).collect();
    let t = DenseMatrix::from_fn(k, k, |i, j| dot(&schur[i], &aq[j]));
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let lambda = values[i];
        let mut x = schur[i].clone();
        if i > 0 {
            let lhs = DenseMatrix::from_fn(i, i, |r, c| {
                if r > c {
                    Complex64::default()
                } else if r == c {
                    t[(r, c)] - lambda
                } else {
                    t[(r, c)]
                }
            });
            let rhs: Vec<Complex64> = (0..i).map(|r| -t[(r, i)]).collect();
            // A repeated eigenvalue leaves the locked block singular; the
            // Schur vector itself is then an eigenvector to working accuracy.
            if let Ok(c) = solve_dense(&lhs, &rhs) {
                for (cj, qj) in c.iter().zip(schur) {
                    x.iter_mut().zip(qj).for_each(|(xi, qi)| *xi += cj * qi);
                }
            }
        }
        normalize(&mut x);
        let r = residual(|v| a.matvec(v), lambda, &x);
        out.push((lambda, x, r));
    }
    out
}

fn finish_targeted(
    a: &SparseMatrix,
    shift: Complex64,
    mut pairs: Vec<(Complex64, Vec<Complex64>, f64)>,
) -> EigResult {
    pairs.sort_by(|x, y| (x.0 - shift).norm().total_cmp(&(y.0 - shift).norm()));
    let n = a.rows();
    let vectors: Vec<Vec<Complex64>> = pairs.iter().map(|p| p.1.clone()).collect();
    EigResult {
        eigenvalues: pairs.iter().map(|p| p.0).collect(),
        right_vectors: DenseMatrix::from_fn(n, pairs.len(), |i, k| vectors[k][i]),
        left_vectors: None,
        residual_norms: pairs.iter().map(|p| p.2).collect(),
        max_vector_overlap: max_overlap(&vectors),
    }
}

fn targeted_dense(a: &SparseMatrix, shift: Complex64, count: usize, tol: f64) -> Result<EigResult> {
    let full = eig_dense(&a.to_dense(), false)?;
    let mut order: Vec<usize> = (0..full.len()).collect();
    order.sort_by(|&i, &j| {
        (full.eigenvalues[i] - shift)
            .norm()
            .total_cmp(&(full.eigenvalues[j] - shift).norm())
            .then(i.cmp(&j))
    });
    order.truncate(count);
    let out = full.select(&order);
    if let Some(&worst) = out.residual_norms.iter().find(|&&r| r > tol) {
        return Err(Error::NoConvergence(format!(
            "dense fallback residual {worst:.3e} exceeds {tol:.3e}"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_spectrum() {
        let a = DenseMatrix::from_real_diag(&[1.0, 2.0, 3.0]);
        let mut eig: Vec<f64> = eig_dense(&a, false).unwrap().eigenvalues.iter().map(|z| z.re).collect();
        eig.sort_by(f64::total_cmp);
        assert_eq!(eig, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn jordan_block_flags_parallel_vectors() {
        let a = DenseMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let res = eig_dense(&a, false).unwrap();
        assert!(res.eigenvalues.iter().all(|z| z.norm() < 1e-8));
        assert!(res.max_vector_overlap > 1.0 - 1e-6, "{}", res.max_vector_overlap);
    }

    #[test]
    fn left_vectors_satisfy_left_equation() {
        let a = DenseMatrix::from_real(3, 3, &[1.0, 2.0, 0.0, 0.5, -1.0, 3.0, 0.0, 1.0, 2.0]).unwrap();
        let res = eig_dense(&a, true).unwrap();
        let left = res.left_vectors.as_ref().unwrap();
        let ah = a.adjoint();
        for k in 0..3 {
            let w = left.column(k);
            let r = residual(|x| ah.matvec(x), res.eigenvalues[k].conj(), &w);
            assert!(r < 1e-12, "{r}");
        }
    }

    #[test]
    fn herm_sqrt_of_diagonal() {
        let s = herm_sqrt(&DenseMatrix::from_real_diag(&[4.0, 9.0]), 1e-12).unwrap();
        assert!(s.max_abs_diff(&DenseMatrix::from_real_diag(&[2.0, 3.0])) < 1e-14);
        let i = herm_sqrt(&DenseMatrix::identity(3), 1e-12).unwrap();
        assert!(i.max_abs_diff(&DenseMatrix::identity(3)) < 1e-14);
    }

    #[test]
    fn herm_sqrt_clips_and_rejects() {
        let clipped = herm_sqrt(&DenseMatrix::from_real_diag(&[1.0, -1e-12]), 1e-10).unwrap();
        assert_eq!(clipped[(1, 1)], Complex64::default());
        let err = herm_sqrt(&DenseMatrix::from_real_diag(&[1.0, -1e-3]), 1e-10).unwrap_err();
        assert!(matches!(err, Error::NotPsd(v) if (v + 1e-3).abs() < 1e-12));
    }

    #[test]
    fn targeted_diagonal() {
        let a = SparseMatrix::from_dense(&DenseMatrix::from_diag(&[
            c64(0.0, 0.0),
            c64(-1.0, 0.0),
            c64(-2.0, 3.0),
        ]));
        let res = eig_targeted(&a, Complex64::default(), 1, 1e-12).unwrap();
        assert!(res.eigenvalues[0].norm() < 1e-14);
    }

    #[test]
    fn targeted_rejects_bad_arguments() {
        let a = SparseMatrix::identity(3);
        assert!(eig_targeted(&a, Complex64::default(), 0, 1e-10).is_err());
        assert!(eig_targeted(&a, Complex64::default(), 1, 0.0).is_err());
        assert!(eig_targeted(&a, Complex64::default(), 4, 1e-10).is_err());
    }

    #[test]
    fn krylov_path_on_large_diagonal() {
        let n = 1000;
        let diag: Vec<Complex64> = (0..n).map(|i| c64(-(i as f64) * 0.01, (i % 7) as f64)).collect();
        let a = SparseMatrix::from_dense(&DenseMatrix::from_diag(&diag));
        let res = eig_targeted(&a, c64(0.013, 0.0), 3, 1e-10).unwrap();
        assert!((res.eigenvalues[0] - c64(0.0, 0.0)).norm() < 1e-10);
        assert_eq!(res.len(), 3);
        assert!(res.max_residual() <= 1e-10);
    }

    fn random_sparse(n: usize, per_row: usize, seed: u64) -> SparseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c64(-(i as f64) / n as f64 * 5.0, rng.gen_range(-1.0..1.0))));
            for _ in 0..per_row {
                let j = rng.gen_range(0..n);
                t.push((i, j, c64(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))));
            }
        }
        SparseMatrix::from_triplets(n, n, t).unwrap()
    }

    fn krylov_only() -> KrylovOptions {
        KrylovOptions {
            dense_below: 0,
            ..KrylovOptions::default()
        }
    }

    #[test]
    fn krylov_agrees_with_dense_on_random_sparse() {
        let a = random_sparse(200, 3, 7);
        let shift = c64(0.1, 0.2);
        let krylov = eig_targeted_with(&a, shift, 6, 1e-10, &krylov_only()).unwrap();
        let dense = targeted_dense(&a, shift, 6, 1e-8).unwrap();
        for (k, d) in krylov.eigenvalues.iter().zip(&dense.eigenvalues) {
            assert!((k - d).norm() < 1e-9, "{k} vs {d}");
        }
        assert!(krylov.max_residual() <= 1e-10);
    }

    #[test]
    fn krylov_handles_shift_on_an_eigenvalue() {
        let base = random_sparse(300, 3, 11).to_dense();
        let n = base.rows();
        let ones = vec![c64(1.0, 0.0); n];
        let col_sums: Vec<Complex64> = (0..n).map(|j| (0..n).map(|i| base[(i, j)]).sum()).collect();
        // A' = A - e_0 (1ᵀA): every column sums to zero, so 1ᵀA' = 0.
        let a = DenseMatrix::from_fn(n, n, |i, j| if i == 0 { base[(i, j)] - col_sums[j] } else { base[(i, j)] });
        let a = SparseMatrix::from_dense(&a);
        assert!(a.left_matvec(&ones).iter().all(|z| z.norm() < 1e-12));
        let krylov = eig_targeted_with(&a, Complex64::default(), 4, 1e-10, &krylov_only()).unwrap();
        let dense = targeted_dense(&a, Complex64::default(), 4, 1e-8).unwrap();
        assert!(krylov.eigenvalues[0].norm() < 1e-10);
        for (k, d) in krylov.eigenvalues.iter().zip(&dense.eigenvalues).skip(1) {
            assert!((k - d).norm() < 1e-9, "{k} vs {d}");
        }
    }
}
