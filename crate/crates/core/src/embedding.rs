//! Markovian embedding: the system plus one damped bosonic mode per bath
//! term, truncated in Fock space. Used as an independent oracle for the
//! hierarchy.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::heom::{integrate, HeomState, PROPAGATE_ATOL, PROPAGATE_RTOL};
use crate::hierarchy::{self, MultiIndex, DEFAULT_MAX_STATES};
use crate::matrix::{c64, devectorize, kron, sandwich, vectorize, DenseMatrix, SparseMatrix};
use crate::model::ModelInstance;
use crate::spectra::{leading_eigs, PhysicalState, SolverOptions, ZERO_MULTIPLICITY_TOL};

#[derive(Clone, Debug)]
pub struct BosonOps {
    pub a: DenseMatrix,
    pub a_dagger: DenseMatrix,
    pub number: DenseMatrix,
}

/// Ladder operators on Fock states `0..=cutoff`.
pub fn boson_ops(cutoff: usize) -> Result<BosonOps> {
    if cutoff < 1 {
        return Err(Error::InvalidArgument("Fock cutoff must be at least 1".into()));
    }
    let d = cutoff + 1;
    let a = DenseMatrix::from_fn(d, d, |i, j| if j == i + 1 { c64((j as f64).sqrt(), 0.0) } else { c64(0.0, 0.0) });
    let a_dagger = a.adjoint();
    let number = &a_dagger * &a;
    Ok(BosonOps { a, a_dagger, number })
}

#[derive(Clone, Debug)]
pub struct EmbeddingSpec {
    model: ModelInstance,
    cutoffs: Vec<usize>,
}

impl EmbeddingSpec {
    /// One cutoff per pseudomode, in slot order.
    pub fn new(model: &ModelInstance, cutoffs: Vec<usize>) -> Result<Self> {
        Self::with_budget(model, cutoffs, DEFAULT_MAX_STATES)
    }

    pub fn with_budget(model: &ModelInstance, cutoffs: Vec<usize>, max_states: u64) -> Result<Self> {
        if cutoffs.len() != model.modes() {
            return Err(Error::Dimension(format!(
                "{} cutoffs for {} pseudomodes",
                cutoffs.len(),
                model.modes()
            )));
        }
        if cutoffs.iter().any(|&c| c < 1) {
            return Err(Error::InvalidArgument("Fock cutoffs must be at least 1".into()));
        }
        for slot in model.slots() {
            let g = model.term(slot).amplitude;
            if g.im != 0.0 || g.re < 0.0 {
                return Err(Error::EmbeddingUnsupported(format!(
                    "amplitude {g} of bath {} term {} is not real and nonnegative",
                    slot.bath, slot.term
                )));
            }
        }
        let hilbert = hilbert_dim(model.system_dim(), &cutoffs)?;
        let dim = hilbert
            .checked_mul(hilbert)
            .ok_or_else(|| Error::Size("embedding dimension".into()))?;
        if dim > max_states {
            return Err(Error::Budget(format!("embedding dimension {dim} (limit {max_states})")));
        }
        Ok(Self {
            model: model.clone(),
            cutoffs,
        })
    }

    /// Uniform cutoff for every pseudomode.
    pub fn uniform(model: &ModelInstance, cutoff: usize) -> Result<Self> {
        Self::new(model, vec![cutoff; model.modes()])
    }

    pub fn model(&self) -> &ModelInstance {
        &self.model
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    /// Product of the pseudomode Fock dimensions.
    pub fn bath_dim(&self) -> usize {
        self.cutoffs.iter().map(|c| c + 1).product()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.model.system_dim() * self.bath_dim()
    }

    /// Lifts a system operator to the enlarged space.
    pub fn system_operator(&self, op: &DenseMatrix) -> Result<SparseMatrix> {
        kron(&SparseMatrix::from_dense(op), &SparseMatrix::identity(self.bath_dim()))
    }

    /// Lifts a single-mode operator acting on pseudomode `mode`.
    pub fn mode_operator(&self, mode: usize, op: &DenseMatrix) -> Result<SparseMatrix> {
        let mut acc = SparseMatrix::identity(self.model.system_dim());
        for (k, &c) in self.cutoffs.iter().enumerate() {
            let factor = if k == mode {
                SparseMatrix::from_dense(op)
            } else {
                SparseMatrix::identity(c + 1)
            };
            acc = kron(&acc, &factor)?;
        }
        Ok(acc)
    }
}

fn hilbert_dim(system_dim: usize, cutoffs: &[usize]) -> Result<u64> {
    cutoffs.iter().try_fold(system_dim as u64, |acc, &c| {
        acc.checked_mul(c as u64 + 1)
            .ok_or_else(|| Error::Size("embedding Hilbert dimension".into()))
    })
}

/// Total Hamiltonian `H_S + Σ ω a†a + √G (a†L + L†a)` on the enlarged space.
pub fn total_hamiltonian(spec: &EmbeddingSpec) -> Result<SparseMatrix> {
    let model = &spec.model;
    let mut h = spec.system_operator(model.hamiltonian())?;
    for (mode, slot) in model.slots().into_iter().enumerate() {
        let ops = boson_ops(spec.cutoffs[mode])?;
        let term = model.term(slot);
        let l = spec.system_operator(model.baths()[slot.bath].coupling())?;
        let a = spec.mode_operator(mode, &ops.a)?;
        let ad = spec.mode_operator(mode, &ops.a_dagger)?;
        let n = spec.mode_operator(mode, &ops.number)?;
        let root = c64(term.amplitude.re.sqrt(), 0.0);
        let exchange = ad.matmul(&l)?.add(&l.adjoint().matmul(&a)?)?;
        h = h.add(&n.scale(c64(term.frequency, 0.0)))?.add(&exchange.scale(root))?;
    }
    Ok(h)
}

/// Vectorized Lindblad generator of the embedding.
pub fn build_lm(spec: &EmbeddingSpec) -> Result<SparseMatrix> {
    let d = spec.hilbert_dim();
    let one = SparseMatrix::identity(d);
    let h = total_hamiltonian(spec)?;
    let mut lm = sandwich(&h, &one)?.sub(&sandwich(&one, &h)?)?.scale(c64(0.0, -1.0));
    for (mode, slot) in spec.model.slots().into_iter().enumerate() {
        let kappa = spec.model.term(slot).decay;
        let ops = boson_ops(spec.cutoffs[mode])?;
        let a = spec.mode_operator(mode, &ops.a)?;
        let ad = spec.mode_operator(mode, &ops.a_dagger)?;
        let n = spec.mode_operator(mode, &ops.number)?;
        let jump = sandwich(&a, &ad)?.scale(c64(2.0, 0.0));
        let anti = sandwich(&n, &one)?.add(&sandwich(&one, &n)?)?;
        lm = lm.add(&jump.sub(&anti)?.scale(c64(kappa, 0.0)))?;
    }
    Ok(lm)
}

/// A state of the enlarged system with its reduced system block.
#[derive(Clone, Debug)]
pub struct EmbeddedState {
    pub full: DenseMatrix,
    pub reduced: DenseMatrix,
}

/// Traces out the pseudomodes.
pub fn reduce(spec: &EmbeddingSpec, full: &DenseMatrix) -> Result<DenseMatrix> {
    let b = spec.bath_dim();
    let d = spec.model.system_dim();
    if full.rows() != d * b || !full.is_square() {
        return Err(Error::Dimension("state does not match the embedding".into()));
    }
    Ok(DenseMatrix::from_fn(d, d, |i, j| (0..b).map(|k| full[(i * b + k, j * b + k)]).sum()))
}

/// Unique steady state of the embedding, unit trace and hermitized.
pub fn lm_steady_state(spec: &EmbeddingSpec, opts: &SolverOptions) -> Result<(PhysicalState, EmbeddedState)> {
    lm_steady_state_of(spec, &build_lm(spec)?, opts)
}

pub fn lm_steady_state_of(
    spec: &EmbeddingSpec,
    lm: &SparseMatrix,
    opts: &SolverOptions,
) -> Result<(PhysicalState, EmbeddedState)> {
    let zero = SolverOptions {
        shift: c64(0.0, 0.0),
        ..opts.clone()
    };
    let eig = leading_eigs(lm, 2, &zero)?;
    let near: Vec<Complex64> = eig
        .eigenvalues
        .iter()
        .copied()
        .filter(|z| z.norm() <= ZERO_MULTIPLICITY_TOL)
        .collect();
    if near.len() > 1 {
        return Err(Error::DegenerateNullSpace(near));
    }
    if near.is_empty() {
        return Err(Error::NoConvergence(format!(
            "no eigenvalue of the embedding within {ZERO_MULTIPLICITY_TOL:e} of zero"
        )));
    }
    let d = spec.hilbert_dim();
    let raw = devectorize(&eig.vector(0), d, d)?;
    let tr = raw.trace();
    if tr.norm() <= 1e-13 * raw.frobenius_norm() {
        return Err(Error::ZeroTrace);
    }
    let full = raw.scale(tr.inv()).hermitian_part();
    let reduced = reduce(spec, &full)?;
    let phys = PhysicalState::new(reduced.clone())?;
    Ok((phys, EmbeddedState { full, reduced }))
}

/// Product state `ρ_S ⊗ |0⟩⟨0|` evolved under the embedding; reduced states at
/// each grid time.
pub fn lm_propagate(spec: &EmbeddingSpec, rho_s: &DenseMatrix, t_grid: &[f64]) -> Result<Vec<DenseMatrix>> {
    let lm = build_lm(spec)?;
    let b = spec.bath_dim();
    let d = spec.model.system_dim();
    if rho_s.rows() != d || !rho_s.is_square() {
        return Err(Error::Dimension("initial system state".into()));
    }
    let full0 = DenseMatrix::from_fn(d * b, d * b, |i, j| {
        if i % b == 0 && j % b == 0 {
            rho_s[(i / b, j / b)]
        } else {
            c64(0.0, 0.0)
        }
    });
    let traj = integrate(&lm, &vectorize(&full0), t_grid, PROPAGATE_RTOL, PROPAGATE_ATOL)?;
    traj.iter()
        .map(|v| reduce(spec, &devectorize(v, d * b, d * b)?))
        .collect()
}

/// `⟨(a†)^m a^n⟩` of pseudomode `mode` in an embedded state.
pub fn mode_moment(spec: &EmbeddingSpec, state: &EmbeddedState, mode: usize, n: u32, m: u32) -> Result<Complex64> {
    let ops = boson_ops(spec.cutoffs[mode])?;
    let mut op = DenseMatrix::identity(spec.cutoffs[mode] + 1);
    for _ in 0..m {
        op = op.matmul(&ops.a_dagger)?;
    }
    for _ in 0..n {
        op = op.matmul(&ops.a)?;
    }
    let lifted = spec.mode_operator(mode, &op)?;
    let full = &state.full;
    Ok(lifted.iter().map(|(i, j, v)| v * full[(j, i)]).sum())
}

/// `|⟨(a†)^m a^n⟩ − Tr ρ^(n,m) / ((i√G)^n (−i√G)^m)|` for a single pseudomode.
///
/// When `G = 0` the auxiliary traces vanish identically and the residual is
/// the embedding moment alone.
pub fn correlation_check(
    spec: &EmbeddingSpec,
    heom_steady: &HeomState,
    lm_steady: &EmbeddedState,
    n: u32,
    m: u32,
) -> Result<f64> {
    if spec.model.modes() != 1 {
        return Err(Error::InvalidArgument(format!(
            "correlation identity is checked for one pseudomode, model has {}",
            spec.model.modes()
        )));
    }
    let idx = MultiIndex::new(&[n], &[m])?;
    let block = heom_steady.block(&idx).map_err(|_| {
        Error::InvalidArgument(format!("({n}, {m}) lies outside the truncation"))
    })?;
    if (n.max(m)) as usize > spec.cutoffs[0] {
        return Err(Error::InvalidArgument(format!("({n}, {m}) exceeds the Fock cutoff")));
    }
    let lhs = mode_moment(spec, lm_steady, 0, n, m)?;
    let g = spec.model.term(spec.model.slots()[0]).amplitude.re;
    let tr = block.trace();
    if g == 0.0 {
        return Ok(if n == 0 && m == 0 { (lhs - tr).norm() } else { lhs.norm().max(tr.norm()) });
    }
    let root = g.sqrt();
    let denom = c64(0.0, root).powu(n) * c64(0.0, -root).powu(m);
    Ok((lhs - tr / denom).norm())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionReport {
    pub dim_heom: u64,
    pub dim_lm: u64,
    pub ratio: f64,
}

/// The rule used when no cutoff is given: `N_c = k_max`.
pub fn default_cutoff(k_max: usize) -> usize {
    k_max
}

/// Generator dimensions of the hierarchy at `k_max` and of the embedding at
/// `cutoff(k_max)` on every mode. The embedding counts the full superoperator
/// space `d_S² Π (N_c + 1)²`.
pub fn dimension_report(model: &ModelInstance, k_max: usize, cutoff: impl Fn(usize) -> usize) -> Result<DimensionReport> {
    let nc = cutoff(k_max);
    let cutoffs = vec![nc; model.modes()];
    dimension_report_for(model, k_max, &cutoffs)
}

pub fn dimension_report_for(model: &ModelInstance, k_max: usize, cutoffs: &[usize]) -> Result<DimensionReport> {
    let d2 = (model.system_dim() as u64).pow(2);
    let dim_heom = hierarchy::count(model.modes(), k_max)?
        .checked_mul(d2)
        .ok_or_else(|| Error::Size("hierarchy dimension".into()))?;
    let h = hilbert_dim(model.system_dim(), cutoffs)?;
    let dim_lm = h.checked_mul(h).ok_or_else(|| Error::Size("embedding dimension".into()))?;
    Ok(DimensionReport {
        dim_heom,
        dim_lm,
        ratio: dim_heom as f64 / dim_lm as f64,
    })
}
