//! Assembly and time propagation of the HEOM generator.
//!
//! The stacked state holds one vectorized `d×d` block per hierarchy member,
//! in hierarchy rank order. Block `(n⃗, m⃗)` obeys
//!
//! ```text
//! dρ/dt = -i[H, ρ] - Σ((n-m)iω + (n+m)κ) ρ
//!         + Σ_slots { G n L ρ^(n-e) + G* m ρ^(m-e) L† + [ρ^(n+e), L†] + [L, ρ^(m+e)] }
//! ```

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hierarchy::{HierarchySpace, MultiIndex, Side, DEFAULT_MAX_STATES};
use crate::matrix::{c64, eig_dense, kron_dense, DenseMatrix, SparseMatrix, DENSE_THRESHOLD};
use crate::model::{ModelInstance, Slot};

/// Superoperator blocks for one pseudomode.
#[derive(Clone, Debug)]
pub struct BlockTemplates {
    /// `G L ⊗ 1`; the coupling to `n⃗ - e⃗` is `n · a`.
    pub a: SparseMatrix,
    /// `G* 1 ⊗ L*`; the coupling to `m⃗ - e⃗` is `m · b`.
    pub b: SparseMatrix,
    /// `1 ⊗ L* - L† ⊗ 1`, coupling to `n⃗ + e⃗`.
    pub c: SparseMatrix,
    /// `-C† = L ⊗ 1 - 1 ⊗ Lᵀ`, coupling to `m⃗ + e⃗`.
    pub c_dagger_neg: SparseMatrix,
    /// `w = κ + iω`.
    pub rate: Complex64,
}

impl BlockTemplates {
    pub fn a_n(&self, n: u32) -> SparseMatrix {
        self.a.scale(c64(n as f64, 0.0))
    }

    pub fn b_m(&self, m: u32) -> SparseMatrix {
        self.b.scale(c64(m as f64, 0.0))
    }
}

pub fn block_templates(model: &ModelInstance, slot: Slot) -> Result<BlockTemplates> {
    if slot.bath >= model.baths().len() || slot.term >= model.baths()[slot.bath].terms().len() {
        return Err(Error::InvalidArgument(format!("no pseudomode {slot:?}")));
    }
    let l = model.baths()[slot.bath].coupling();
    let term = model.term(slot);
    let id = DenseMatrix::identity(l.rows());
    let l_id = kron_dense(l, &id)?;
    let id_lconj = kron_dense(&id, &l.conj())?;
    let c = id_lconj.sub(&kron_dense(&l.adjoint(), &id)?)?;
    let c_dagger_neg = l_id.sub(&kron_dense(&id, &l.transpose())?)?;
    Ok(BlockTemplates {
        a: l_id.scale(term.amplitude),
        b: id_lconj.scale(term.amplitude.conj()),
        c,
        c_dagger_neg,
        rate: term.rate(),
    })
}

/// `-i(H ⊗ 1 - 1 ⊗ Hᵀ)`.
pub fn coherent_part(h: &DenseMatrix) -> Result<SparseMatrix> {
    let id = DenseMatrix::identity(h.rows());
    Ok(kron_dense(h, &id)?
        .sub(&kron_dense(&id, &h.transpose())?)?
        .scale(c64(0.0, -1.0)))
}

/// `Σ_slots ((n-m)iω + (n+m)κ)`, the damping subtracted on block `(n⃗, m⃗)`.
pub fn damping(rates: &[Complex64], idx: &MultiIndex) -> Complex64 {
    idx.n()
        .iter()
        .zip(idx.m())
        .zip(rates)
        .map(|((&n, &m), w)| c64((n + m) as f64 * w.re, (n as f64 - m as f64) * w.im))
        .sum()
}

/// `D_{n⃗m⃗}` of one hierarchy member.
pub fn diagonal_block(model: &ModelInstance, idx: &MultiIndex) -> Result<SparseMatrix> {
    let rates: Vec<Complex64> = model.slots().iter().map(|&s| model.term(s).rate()).collect();
    if idx.modes() != rates.len() {
        return Err(Error::Dimension(format!(
            "multi-index has {} modes, model has {}",
            idx.modes(),
            rates.len()
        )));
    }
    let d2 = model.system_dim().pow(2);
    coherent_part(model.hamiltonian())?.sub(&SparseMatrix::identity(d2).scale(damping(&rates, idx)))
}

#[derive(Clone, Debug)]
pub struct HeomLiouvillian {
    matrix: SparseMatrix,
    hierarchy: Arc<HierarchySpace>,
    system_dim: usize,
    rates: Vec<Complex64>,
    slots: Vec<Slot>,
    model: ModelInstance,
}

pub fn assemble(model: &ModelInstance, k_max: usize) -> Result<HeomLiouvillian> {
    assemble_with_budget(model, k_max, DEFAULT_MAX_STATES)
}

pub fn assemble_with_budget(model: &ModelInstance, k_max: usize, max_states: u64) -> Result<HeomLiouvillian> {
    let d = model.system_dim();
    for (i, bath) in model.baths().iter().enumerate() {
        if bath.coupling().rows() != d {
            return Err(Error::Dimension(format!("bath {i} does not act on the system space")));
        }
    }
    let slots = model.slots();
    let hierarchy = Arc::new(HierarchySpace::enumerate_with_budget(slots.len(), k_max, max_states)?);
    let d2 = d * d;
    let dim = hierarchy
        .len()
        .checked_mul(d2)
        .ok_or_else(|| Error::Size(format!("{} blocks of size {d2}", hierarchy.len())))?;
    let templates = slots
        .iter()
        .map(|&s| block_templates(model, s))
        .collect::<Result<Vec<_>>>()?;
    let rates: Vec<Complex64> = templates.iter().map(|t| t.rate).collect();
    let coherent: Vec<(usize, usize, Complex64)> = coherent_part(model.hamiltonian())?.iter().collect();

    let push = |out: &mut Vec<(usize, usize, Complex64)>, m: &SparseMatrix, row: usize, col: usize, s: f64| {
        out.extend(m.iter().map(|(i, j, v)| (row * d2 + i, col * d2 + j, v * s)));
    };
    let triplets: Vec<(usize, usize, Complex64)> = (0..hierarchy.len())
        .into_par_iter()
        .flat_map_iter(|r| {
            let idx = hierarchy.unrank(r).expect("rank in range");
            let mut out = Vec::new();
            out.extend(coherent.iter().map(|&(i, j, v)| (r * d2 + i, r * d2 + j, v)));
            let damp = damping(&rates, idx);
            out.extend((0..d2).map(|i| (r * d2 + i, r * d2 + i, -damp)));
            for (s, t) in templates.iter().enumerate() {
                let (n, m) = (idx.n()[s], idx.m()[s]);
                if let Some(col) = hierarchy.neighbor(idx, s, Side::N, -1) {
                    push(&mut out, &t.a, r, col, n as f64);
                }
                if let Some(col) = hierarchy.neighbor(idx, s, Side::M, -1) {
                    push(&mut out, &t.b, r, col, m as f64);
                }
                if let Some(col) = hierarchy.neighbor(idx, s, Side::N, 1) {
                    push(&mut out, &t.c, r, col, 1.0);
                }
                if let Some(col) = hierarchy.neighbor(idx, s, Side::M, 1) {
                    push(&mut out, &t.c_dagger_neg, r, col, 1.0);
                }
            }
            out
        })
        .collect();
    let matrix = SparseMatrix::from_triplets(dim, dim, triplets)?;
    log::debug!(
        "assembled {} generator: K = {}, D = {dim}, nnz = {}",
        model.name,
        hierarchy.len(),
        matrix.nnz()
    );
    Ok(HeomLiouvillian {
        matrix,
        hierarchy,
        system_dim: d,
        rates,
        slots,
        model: model.clone(),
    })
}

impl HeomLiouvillian {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn hierarchy(&self) -> &Arc<HierarchySpace> {
        &self.hierarchy
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn k_max(&self) -> usize {
        self.hierarchy.k_max()
    }

    pub fn rates(&self) -> &[Complex64] {
        &self.rates
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn model(&self) -> &ModelInstance {
        &self.model
    }

    /// Covector `⟨⟨1^(0⃗,0⃗)|`: ones on the diagonal of the physical block.
    pub fn trace_covector(&self) -> Vec<Complex64> {
        let d = self.system_dim;
        let mut v = vec![c64(0.0, 0.0); self.dim()];
        for i in 0..d {
            v[i * d + i] = c64(1.0, 0.0);
        }
        v
    }

    /// `‖⟨⟨1^(0⃗,0⃗)| 𝓛‖_∞`.
    pub fn trace_residual(&self) -> f64 {
        self.matrix
            .left_matvec(&self.trace_covector())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Number of nonzero `d²×d²` blocks.
    pub fn nonzero_blocks(&self) -> usize {
        let d2 = self.system_dim * self.system_dim;
        let mut blocks: Vec<(usize, usize)> = self.matrix.iter().map(|(i, j, _)| (i / d2, j / d2)).collect();
        blocks.sort_unstable();
        blocks.dedup();
        blocks.len()
    }

    /// Largest real part of the full spectrum, when it is small enough for a
    /// dense solve.
    pub fn max_real_eigenvalue(&self) -> Option<f64> {
        if self.dim() > DENSE_THRESHOLD {
            return None;
        }
        let eig = eig_dense(&self.matrix.to_dense(), false).ok()?;
        eig.eigenvalues.iter().map(|z| z.re).reduce(f64::max)
    }

    pub fn apply(&self, state: &HeomState) -> Result<HeomState> {
        self.check_state(state)?;
        Ok(HeomState {
            data: self.matrix.matvec(&state.data),
            system_dim: self.system_dim,
            hierarchy: self.hierarchy.clone(),
        })
    }

    pub fn state_from_vector(&self, data: Vec<Complex64>) -> Result<HeomState> {
        if data.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "vector of length {} for a generator of dimension {}",
                data.len(),
                self.dim()
            )));
        }
        Ok(HeomState {
            data,
            system_dim: self.system_dim,
            hierarchy: self.hierarchy.clone(),
        })
    }

    pub fn initial_state(&self, rho: &DenseMatrix) -> Result<HeomState> {
        initial_state(rho, &self.hierarchy)
    }

    pub fn write_triplets<W: Write>(&self, w: W) -> Result<()> {
        self.matrix.write_triplets(w)
    }

    fn check_state(&self, state: &HeomState) -> Result<()> {
        if state.data.len() != self.dim() || state.system_dim != self.system_dim {
            return Err(Error::Dimension(format!(
                "state of length {} does not match generator dimension {}",
                state.data.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Stacked hierarchy vector.
#[derive(Clone, Debug)]
pub struct HeomState {
    data: Vec<Complex64>,
    system_dim: usize,
    hierarchy: Arc<HierarchySpace>,
}

impl HeomState {
    pub(crate) fn from_parts(data: Vec<Complex64>, system_dim: usize, hierarchy: Arc<HierarchySpace>) -> Self {
        Self {
            data,
            system_dim,
            hierarchy,
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn hierarchy(&self) -> &Arc<HierarchySpace> {
        &self.hierarchy
    }

    pub fn block_at(&self, rank: usize) -> Result<DenseMatrix> {
        let d2 = self.system_dim * self.system_dim;
        if rank >= self.hierarchy.len() {
            return Err(Error::InvalidArgument(format!("no hierarchy member of rank {rank}")));
        }
        DenseMatrix::new(
            self.system_dim,
            self.system_dim,
            self.data[rank * d2..(rank + 1) * d2].to_vec(),
        )
    }

    pub fn block(&self, idx: &MultiIndex) -> Result<DenseMatrix> {
        let rank = self
            .hierarchy
            .rank(idx)
            .ok_or_else(|| Error::InvalidArgument(format!("{idx:?} is outside the truncation")))?;
        self.block_at(rank)
    }

    /// The physical block `ρ^(0⃗,0⃗)`.
    pub fn physical(&self) -> DenseMatrix {
        self.block_at(0).expect("hierarchy always holds the root")
    }

    /// Member-wise `ρ^(n⃗,m⃗) ↦ (ρ^(m⃗,n⃗))†`.
    pub fn dagger(&self) -> HeomState {
        let d = self.system_dim;
        let d2 = d * d;
        let mut data = vec![c64(0.0, 0.0); self.data.len()];
        for (r, idx) in self.hierarchy.indices().iter().enumerate() {
            let swapped = MultiIndex::new(idx.m(), idx.n()).expect("same halves");
            let src = self.hierarchy.rank(&swapped).expect("truncation is swap invariant");
            for i in 0..d {
                for j in 0..d {
                    data[r * d2 + i * d + j] = self.data[src * d2 + j * d + i].conj();
                }
            }
        }
        HeomState {
            data,
            system_dim: d,
            hierarchy: self.hierarchy.clone(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn initial_state(rho: &DenseMatrix, hierarchy: &Arc<HierarchySpace>) -> Result<HeomState> {
    validate_density(rho, 1e-10)?;
    let d = rho.rows();
    let mut data = vec![c64(0.0, 0.0); hierarchy.len() * d * d];
    data[..d * d].copy_from_slice(rho.as_slice());
    Ok(HeomState {
        data,
        system_dim: d,
        hierarchy: hierarchy.clone(),
    })
}

pub(crate) fn validate_density(rho: &DenseMatrix, tol: f64) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::InvalidState("density matrix must be square".into()));
    }
    let defect = rho.hermiticity_defect();
    if defect > tol {
        return Err(Error::InvalidState(format!("hermiticity defect {defect:.3e}")));
    }
    let tr = rho.trace();
    if (tr - c64(1.0, 0.0)).norm() > tol {
        return Err(Error::InvalidState(format!("trace {tr}")));
    }
    let (evals, _) = crate::matrix::eig_hermitian(&rho.hermitian_part())?;
    if let Some(&min) = evals.first() {
        if min < -tol {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
    }
    Ok(())
}

pub const PROPAGATE_RTOL: f64 = 1e-9;
pub const PROPAGATE_ATOL: f64 = 1e-11;

/// Integrates `dρ/dt = 𝓛ρ` and returns the state at every grid time.
pub fn propagate(l: &HeomLiouvillian, state0: &HeomState, t_grid: &[f64]) -> Result<Vec<HeomState>> {
    l.check_state(state0)?;
    let traj = integrate(l.matrix(), state0.as_slice(), t_grid, PROPAGATE_RTOL, PROPAGATE_ATOL)?;
    Ok(traj
        .into_iter()
        .map(|data| HeomState {
            data,
            system_dim: l.system_dim,
            hierarchy: l.hierarchy.clone(),
        })
        .collect())
}

// Dormand-Prince 5(4) tableau. The system is autonomous, so the nodes are unused.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of a linear autonomous system.
pub fn integrate(
    a: &SparseMatrix,
    y0: &[Complex64],
    t_grid: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<Vec<Complex64>>> {
    if !a.is_square() || a.rows() != y0.len() {
        return Err(Error::Dimension("state length does not match the generator".into()));
    }
    if t_grid.is_empty() || t_grid[0] != 0.0 || t_grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidArgument("time grid must be ascending from 0".into()));
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    let scale = a.norm_inf().max(1e-300);
    let mut h = 0.01 / scale;
    let mut k: Vec<Vec<Complex64>> = vec![vec![c64(0.0, 0.0); n]; 7];
    a.matvec_into(&y, &mut k[0]);
    let mut stage = vec![c64(0.0, 0.0); n];
    let mut y5 = vec![c64(0.0, 0.0); n];

    for &target in t_grid {
        while t < target {
            let last = target - t <= h;
            let step = if last { target - t } else { h };
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = c64(0.0, 0.0);
                    for (j, kj) in k.iter().enumerate().take(s) {
                        if A[s][j] != 0.0 {
                            acc += kj[i] * A[s][j];
                        }
                    }
                    stage[i] = y[i] + acc * step;
                }
                a.matvec_into(&stage, &mut k[s]);
            }
            let mut err = 0.0f64;
            for i in 0..n {
                let mut hi = c64(0.0, 0.0);
                let mut lo = c64(0.0, 0.0);
                for s in 0..7 {
                    hi += k[s][i] * B5[s];
                    lo += k[s][i] * B4[s];
                }
                y5[i] = y[i] + hi * step;
                let sc = atol + rtol * y[i].norm().max(y5[i].norm());
                err = err.max(((hi - lo) * step).norm() / sc);
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                std::mem::swap(&mut y, &mut y5);
                // First-same-as-last: the seventh stage is f(y_new).
                k.swap(0, 6);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 && last {
                h = h.max(step * factor.min(1.0));
            } else {
                h = step * factor;
            }
            if h < 1e-14 * t.abs().max(1.0 / scale) {
                return Err(Error::Stiff { t, step: h });
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{custom, qubit_decay, BathSpec, BathTerm};
    use crate::operators::qubit_operators;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn random_qubit_model(seed: u64) -> ModelInstance {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut r = || rng.gen_range(-1.0..1.0);
        let h = DenseMatrix::from_fn(2, 2, |_, _| c64(0.0, 0.0));
        let (a, b, c, dr, di) = (r(), r(), r(), r(), r());
        let mut h = h;
        h[(0, 0)] = c64(a, 0.0);
        h[(1, 1)] = c64(b, 0.0);
        h[(0, 1)] = c64(dr, di);
        h[(1, 0)] = c64(dr, -di);
        let l = DenseMatrix::from_fn(2, 2, |i, j| c64(((i * 2 + j) as f64 + c).sin(), ((i + 3 * j) as f64 * c).cos()));
        let term = BathTerm::new(c64(r(), r()), r(), 0.5 + r().abs()).unwrap();
        custom("random", h, vec![BathSpec::new(l, vec![term]).unwrap()], BTreeMap::new()).unwrap()
    }

    fn dense_blocks(model: &ModelInstance) -> (Vec<DenseMatrix>, DenseMatrix, DenseMatrix, DenseMatrix, DenseMatrix) {
        // Blocks written out from the vectorized equation with plain Kronecker products.
        let d = model.system_dim();
        let id = DenseMatrix::identity(d);
        let h = model.hamiltonian();
        let l = model.baths()[0].coupling();
        let t = model.baths()[0].terms()[0];
        let kr = |a: &DenseMatrix, b: &DenseMatrix| kron_dense(a, b).unwrap().to_dense();
        let comm = (&kr(h, &id) - &kr(&id, &h.transpose())).scale(c64(0.0, -1.0));
        let d_nm = |n: f64, m: f64| {
            let damp = c64((n + m) * t.decay, (n - m) * t.frequency);
            &comm - &DenseMatrix::identity(d * d).scale(damp)
        };
        let a1 = kr(l, &id).scale(t.amplitude);
        let b1 = kr(&id, &l.conj()).scale(t.amplitude.conj());
        let c = &kr(&id, &l.conj()) - &kr(&l.adjoint(), &id);
        let ds = vec![d_nm(0.0, 0.0), d_nm(0.0, 1.0), d_nm(0.0, 2.0), d_nm(1.0, 0.0), d_nm(1.0, 1.0), d_nm(2.0, 0.0)];
        (ds, a1, b1, c.clone(), c.adjoint())
    }

    fn block_matrix(layout: &[Vec<Option<DenseMatrix>>], b: usize) -> DenseMatrix {
        let k = layout.len();
        let mut out = DenseMatrix::zeros(k * b, k * b);
        for (bi, row) in layout.iter().enumerate() {
            for (bj, blk) in row.iter().enumerate() {
                if let Some(m) = blk {
                    for i in 0..b {
                        for j in 0..b {
                            out[(bi * b + i, bj * b + j)] = m[(i, j)];
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn golden_first_order() {
        for seed in 0..5 {
            let model = random_qubit_model(seed);
            let (ds, a1, b1, c, cd) = dense_blocks(&model);
            let neg_cd = &cd * -1.0;
            let layout = vec![
                vec![Some(ds[0].clone()), Some(neg_cd.clone()), Some(c.clone())],
                vec![Some(b1.clone()), Some(ds[1].clone()), None],
                vec![Some(a1.clone()), None, Some(ds[3].clone())],
            ];
            let expected = block_matrix(&layout, 4);
            let got = assemble(&model, 1).unwrap().matrix().to_dense();
            assert_eq!(got.rows(), 12);
            assert!(got.max_abs_diff(&expected) <= 1e-14);
        }
    }

    #[test]
    fn golden_second_order() {
        for seed in 10..15 {
            let model = random_qubit_model(seed);
            let (ds, a1, b1, c, cd) = dense_blocks(&model);
            let neg_cd = Some(&cd * -1.0);
            let a2 = Some(&a1 * 2.0);
            let b2 = Some(&b1 * 2.0);
            let (a1, b1, c) = (Some(a1), Some(b1), Some(c));
            let z = None;
            let d = |i: usize| Some(ds[i].clone());
            let layout = vec![
                vec![d(0), neg_cd.clone(), z.clone(), c.clone(), z.clone(), z.clone()],
                vec![b1.clone(), d(1), neg_cd.clone(), z.clone(), c.clone(), z.clone()],
                vec![z.clone(), b2, d(2), z.clone(), z.clone(), z.clone()],
                vec![a1.clone(), z.clone(), z.clone(), d(3), neg_cd.clone(), c.clone()],
                vec![z.clone(), a1.clone(), z.clone(), b1.clone(), d(4), z.clone()],
                vec![z.clone(), z.clone(), z.clone(), a2, z.clone(), d(5)],
            ];
            let expected = block_matrix(&layout, 4);
            let got = assemble(&model, 2).unwrap().matrix().to_dense();
            assert_eq!(got.rows(), 24);
            assert!(got.max_abs_diff(&expected) <= 1e-14);
        }
    }

    #[test]
    fn templates_for_decay() {
        let model = qubit_decay(1.0, c64(0.2, 0.0), 0.0, 1.0).unwrap();
        let t = block_templates(&model, Slot { bath: 0, term: 0 }).unwrap();
        let q = qubit_operators();
        let id = DenseMatrix::identity(2);
        let c = &kron_dense(&id, &q.sigma_minus.conj()).unwrap().to_dense()
            - &kron_dense(&q.sigma_minus.adjoint(), &id).unwrap().to_dense();
        assert_eq!(t.c.to_dense(), c);
        assert_eq!(t.a_n(0).nnz(), 0);
        assert!(block_templates(&model, Slot { bath: 1, term: 0 }).is_err());

        let free = custom(
            "free",
            DenseMatrix::zeros(2, 2),
            vec![BathSpec::new(q.sigma_minus.clone(), vec![BathTerm::real(0.0, 0.3, 0.7).unwrap()]).unwrap()],
            BTreeMap::new(),
        )
        .unwrap();
        let idx = MultiIndex::new(&[1], &[1]).unwrap();
        let d11 = diagonal_block(&free, &idx).unwrap();
        assert!(d11.to_dense().max_abs_diff(&(&DenseMatrix::identity(4) * -1.4)) < 1e-15);
    }

    #[test]
    fn damping_sign_convention() {
        // A block with only n excited rotates like Tr[a ρ]: e^{-(κ + iω)t}.
        let idx = MultiIndex::new(&[1], &[0]).unwrap();
        assert_eq!(damping(&[c64(0.5, 2.0)], &idx), c64(0.5, 2.0));
        let idx = MultiIndex::new(&[0], &[1]).unwrap();
        assert_eq!(damping(&[c64(0.5, 2.0)], &idx), c64(0.5, -2.0));
    }

    #[test]
    fn structural_invariants() {
        let models = [
            random_qubit_model(3),
            crate::model::lmg(3, 0.4, 1.0, 1.0, 1.0).unwrap(),
            crate::model::two_mode_dicke(2, 1.0, 1.0, 5.0, 5.0).unwrap(),
        ];
        for model in &models {
            for k in 1..=3 {
                let l = assemble(model, k).unwrap();
                assert!(l.trace_residual() <= 1e-12);
                let bound = l.hierarchy().len() * (1 + 4 * l.slots().len());
                assert!(l.nonzero_blocks() <= bound);
            }
        }
    }

    #[test]
    fn hermiticity_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for model in [random_qubit_model(21), crate::model::two_mode_dicke(2, 0.7, 1.0, 2.0, 1.5).unwrap()] {
            let l = assemble(&model, 3).unwrap();
            let data = (0..l.dim()).map(|_| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let rho = l.state_from_vector(data).unwrap();
            let lhs = l.apply(&rho.dagger()).unwrap();
            let rhs = l.apply(&rho).unwrap().dagger();
            let diff = lhs
                .as_slice()
                .iter()
                .zip(rhs.as_slice())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(diff <= 1e-12);
        }
    }

    #[test]
    fn conjugate_symmetric_spectrum_with_zero() {
        let l = assemble(&random_qubit_model(5), 3).unwrap();
        let eig = eig_dense(&l.matrix().to_dense(), false).unwrap();
        for z in &eig.eigenvalues {
            let best = eig.eigenvalues.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-10);
        }
        let min = eig.eigenvalues.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        assert!(min <= 1e-10);
    }

    #[test]
    fn decoupled_spectrum() {
        let h = DenseMatrix::from_real_diag(&[-0.3, 0.9]);
        let q = qubit_operators();
        let (w, kappa) = (0.8, 0.45);
        let model = custom(
            "free",
            h,
            vec![BathSpec::new(q.sigma_x.clone(), vec![BathTerm::real(0.0, w, kappa).unwrap()]).unwrap()],
            BTreeMap::new(),
        )
        .unwrap();
        let l = assemble(&model, 3).unwrap();
        let mut expected = Vec::new();
        for idx in l.hierarchy().indices() {
            let (n, m) = (idx.n()[0] as f64, idx.m()[0] as f64);
            for a in [-0.3, 0.9] {
                for b in [-0.3, 0.9] {
                    expected.push(c64(-((n + m) * kappa), -(a - b) - (n - m) * w));
                }
            }
        }
        let eig = eig_dense(&l.matrix().to_dense(), false).unwrap();
        for z in &eig.eigenvalues {
            let best = expected.iter().map(|e| (e - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(best <= 1e-10, "{z}");
        }
        assert_eq!(eig.len(), expected.len());
    }

    #[test]
    fn initial_state_layout() {
        let l = assemble(&qubit_decay(1.0, c64(0.1, 0.0), 0.0, 1.0).unwrap(), 2).unwrap();
        let pure = l.initial_state(&DenseMatrix::from_real_diag(&[1.0, 0.0])).unwrap();
        let nz: Vec<usize> = (0..l.dim()).filter(|&i| pure.as_slice()[i].norm() > 0.0).collect();
        assert_eq!(nz, vec![0]);
        let mixed = l.initial_state(&DenseMatrix::from_real_diag(&[0.5, 0.5])).unwrap();
        assert_eq!(mixed.as_slice().iter().filter(|z| **z == c64(0.5, 0.0)).count(), 2);
        assert_eq!(mixed.physical().trace(), c64(1.0, 0.0));
        assert!(l.initial_state(&DenseMatrix::from_real_diag(&[0.7, 0.7])).is_err());
        assert!(l.initial_state(&DenseMatrix::from_real_diag(&[1.5, -0.5])).is_err());
    }

    #[test]
    fn free_qubit_coherence_rotates() {
        let wq = 1.3;
        let q = qubit_operators();
        let model = custom(
            "free",
            &q.sigma_z * (wq / 2.0),
            vec![BathSpec::new(q.sigma_minus.clone(), vec![BathTerm::real(0.0, 0.5, 1.0).unwrap()]).unwrap()],
            BTreeMap::new(),
        )
        .unwrap();
        let l = assemble(&model, 2).unwrap();
        let rho0 = DenseMatrix::from_real(2, 2, &[0.5, 0.5, 0.5, 0.5]).unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let traj = propagate(&l, &l.initial_state(&rho0).unwrap(), &grid).unwrap();
        for (t, s) in grid.iter().zip(&traj) {
            // ⟨e|ρ|g⟩ rotates as e^{-iω_q t} with |e⟩ the second basis state.
            let expected = c64(0.0, -wq * t).exp() * 0.5;
            assert!((s.physical()[(1, 0)] - expected).norm() <= 1e-8);
        }
    }

    #[test]
    fn zero_generator_keeps_state() {
        let a = SparseMatrix::zeros(3, 3);
        let y0 = vec![c64(1.0, 0.0), c64(0.0, 2.0), c64(-1.0, 1.0)];
        let traj = integrate(&a, &y0, &[0.0, 1.0, 5.0], 1e-9, 1e-11).unwrap();
        assert!(traj.iter().all(|y| *y == y0));
        assert!(integrate(&a, &y0, &[1.0, 0.5], 1e-9, 1e-11).is_err());
    }
}
