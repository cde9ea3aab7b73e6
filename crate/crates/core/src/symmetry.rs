//! Weak symmetries declared as integer charges, and the sector split of the
//! generator they induce.
//!
//! A vectorized basis element `|i⟩⟨j|` of block `(n⃗, m⃗)` carries charge
//! `q_i - q_j + Σ_s c_s (n_s - m_s)`, reduced modulo the group order when it
//! is finite. `c_s` is the charge of pseudomode `s`, which is minus the charge
//! of its coupling operator: `[Q, L] = -c L`.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::heom::{HeomLiouvillian, HeomState};
use crate::hierarchy::{HierarchySpace, MultiIndex};
use crate::matrix::{c64, EigResult, SparseMatrix};
use crate::model::ModelInstance;
use crate::spectra::{self, SolverOptions};

/// Largest matrix entry allowed to couple different charges.
pub const OFF_SECTOR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetrySpec {
    pub system_charges: Vec<i64>,
    /// Pseudomode charge per bath.
    pub bath_charges: Vec<i64>,
    /// 0 for U(1).
    pub group_order: u32,
}

impl SymmetrySpec {
    pub fn new(system_charges: Vec<i64>, bath_charges: Vec<i64>, group_order: u32) -> Self {
        Self {
            system_charges,
            bath_charges,
            group_order,
        }
    }

    /// The symmetry with every charge zero.
    pub fn trivial(system_dim: usize, baths: usize) -> Self {
        Self::new(vec![0; system_dim], vec![0; baths], 1)
    }

    pub fn reduce(&self, q: i64) -> i64 {
        if self.group_order > 0 {
            q.rem_euclid(self.group_order as i64)
        } else {
            q
        }
    }

    /// Checks that `H` conserves the charge and that every coupling operator
    /// lowers it by its pseudomode charge.
    pub fn validate(&self, model: &ModelInstance) -> Result<()> {
        let d = model.system_dim();
        if self.system_charges.len() != d || self.bath_charges.len() != model.baths().len() {
            return Err(Error::Dimension(format!(
                "symmetry declares {} system and {} bath charges for a model with d = {d} and {} baths",
                self.system_charges.len(),
                self.bath_charges.len(),
                model.baths().len()
            )));
        }
        let check = |m: &crate::matrix::DenseMatrix, shift: i64| -> Result<()> {
            for i in 0..d {
                for j in 0..d {
                    let v = m[(i, j)].norm();
                    if v > OFF_SECTOR_TOL
                        && self.reduce(self.system_charges[i] - self.system_charges[j] - shift) != 0
                    {
                        return Err(Error::SymmetryViolation {
                            row: i,
                            col: j,
                            magnitude: v,
                            from: self.reduce(self.system_charges[j]),
                            to: self.reduce(self.system_charges[i]),
                        });
                    }
                }
            }
            Ok(())
        };
        check(model.hamiltonian(), 0)?;
        for (bath, &c) in model.baths().iter().zip(&self.bath_charges) {
            check(bath.coupling(), -c)?;
        }
        Ok(())
    }
}

/// Charge of `|i⟩⟨j|` in hierarchy member `idx`; `slot_baths[s]` is the bath
/// of pseudomode `s`.
pub fn basis_charge(spec: &SymmetrySpec, i: usize, j: usize, idx: &MultiIndex, slot_baths: &[usize]) -> i64 {
    let bath: i64 = idx
        .n()
        .iter()
        .zip(idx.m())
        .zip(slot_baths)
        .map(|((&n, &m), &b)| spec.bath_charges[b] * (n as i64 - m as i64))
        .sum();
    spec.reduce(spec.system_charges[i] - spec.system_charges[j] + bath)
}

#[derive(Clone, Debug)]
pub struct Sector {
    pub charge: i64,
    /// Global ranks of the basis elements, ascending.
    pub indices: Vec<usize>,
    pub matrix: SparseMatrix,
}

#[derive(Clone, Debug)]
pub struct SectorDecomposition {
    sectors: BTreeMap<i64, Sector>,
    dim: usize,
    system_dim: usize,
    hierarchy: Arc<HierarchySpace>,
    spec: SymmetrySpec,
    /// Largest entry of the generator between different charges.
    pub off_sector_residual: f64,
}

pub fn decompose(l: &HeomLiouvillian, spec: &SymmetrySpec) -> Result<SectorDecomposition> {
    let d = l.system_dim();
    if spec.system_charges.len() != d || spec.bath_charges.len() != l.model().baths().len() {
        return Err(Error::Dimension("symmetry charges do not match the model".into()));
    }
    let slot_baths: Vec<usize> = l.slots().iter().map(|s| s.bath).collect();
    let d2 = d * d;
    let mut charges = Vec::with_capacity(l.dim());
    for idx in l.hierarchy().indices() {
        for i in 0..d {
            for j in 0..d {
                charges.push(basis_charge(spec, i, j, idx, &slot_baths));
            }
        }
    }
    debug_assert_eq!(charges.len(), l.hierarchy().len() * d2);

    let mut worst: Option<(usize, usize, f64)> = None;
    for (r, c, v) in l.matrix().iter() {
        if charges[r] != charges[c] && worst.is_none_or(|w| v.norm() > w.2) {
            worst = Some((r, c, v.norm()));
        }
    }
    let off_sector_residual = worst.map_or(0.0, |w| w.2);
    if let Some((row, col, magnitude)) = worst {
        if magnitude > OFF_SECTOR_TOL {
            return Err(Error::SymmetryViolation {
                row,
                col,
                magnitude,
                from: charges[col],
                to: charges[row],
            });
        }
    }

    let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (k, &q) in charges.iter().enumerate() {
        groups.entry(q).or_default().push(k);
    }
    let sectors = groups
        .into_iter()
        .map(|(q, indices)| {
            let matrix = l.matrix().submatrix(&indices);
            (
                q,
                Sector {
                    charge: q,
                    indices,
                    matrix,
                },
            )
        })
        .collect();
    let decomp = SectorDecomposition {
        sectors,
        dim: l.dim(),
        system_dim: d,
        hierarchy: l.hierarchy().clone(),
        spec: spec.clone(),
        off_sector_residual,
    };
    // The physical trace functional lives in sector 0 and must stay a left
    // null vector there.
    let zero = decomp.sector(0)?;
    let cov: Vec<Complex64> = zero
        .indices
        .iter()
        .map(|&g| if g < d2 && g / d == g % d { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
        .collect();
    let res = zero.matrix.left_matvec(&cov).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if res > OFF_SECTOR_TOL {
        return Err(Error::SymmetryViolation {
            row: 0,
            col: 0,
            magnitude: res,
            from: 0,
            to: 0,
        });
    }
    Ok(decomp)
}

impl SectorDecomposition {
    pub fn charges(&self) -> Vec<i64> {
        self.sectors.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.sectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty()
    }

    pub fn sector(&self, charge: i64) -> Result<&Sector> {
        self.sectors
            .get(&self.spec.reduce(charge))
            .ok_or(Error::MissingSector(charge))
    }

    pub fn sectors(&self) -> impl Iterator<Item = &Sector> {
        self.sectors.values()
    }

    pub fn spec(&self) -> &SymmetrySpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn hierarchy(&self) -> &Arc<HierarchySpace> {
        &self.hierarchy
    }

    /// Charge of the conjugate sector.
    pub fn conjugate_charge(&self, charge: i64) -> i64 {
        self.spec.reduce(-charge)
    }

    /// Scatters a sector vector into the full stacked space.
    pub fn embed(&self, charge: i64, v: &[Complex64]) -> Result<HeomState> {
        let sector = self.sector(charge)?;
        if v.len() != sector.indices.len() {
            return Err(Error::Dimension(format!(
                "vector of length {} for sector {charge} of dimension {}",
                v.len(),
                sector.indices.len()
            )));
        }
        let mut data = vec![c64(0.0, 0.0); self.dim];
        for (&g, &z) in sector.indices.iter().zip(v) {
            data[g] = z;
        }
        Ok(HeomState::from_parts(data, self.system_dim, self.hierarchy.clone()))
    }
}

/// The `count` eigenvalues of sector `charge` nearest the shift, in the
/// canonical order of [`spectra::canonical_order`].
pub fn sector_leading_eigs(
    decomp: &SectorDecomposition,
    charge: i64,
    count: usize,
    opts: &SolverOptions,
) -> Result<EigResult> {
    let sector = decomp.sector(charge)?;
    spectra::leading_eigs(&sector.matrix, count, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heom::assemble;
    use crate::matrix::eig_dense;
    use crate::model::{lmg, two_mode_dicke, z2_lmg};

    #[test]
    fn trivial_spec_single_sector() {
        let model = lmg(2, 0.3, 1.0, 1.0, 1.0).unwrap();
        let l = assemble(&model, 2).unwrap();
        let d = decompose(&l, &SymmetrySpec::trivial(3, 1)).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.sector(0).unwrap().indices.len(), l.dim());
    }

    #[test]
    fn charge_examples() {
        let z2 = SymmetrySpec::new(vec![0, 1, 2], vec![1], 2);
        let idx = MultiIndex::new(&[1], &[0]).unwrap();
        assert_eq!(basis_charge(&z2, 1, 1, &idx, &[0]), 1);
        let u1 = SymmetrySpec::new(vec![0, 1, 2], vec![1, -1], 0);
        let root = MultiIndex::zero(2);
        assert_eq!(basis_charge(&u1, 2, 1, &root, &[0, 1]), 1);
        assert_eq!(basis_charge(&SymmetrySpec::trivial(3, 1), 2, 0, &idx, &[0]), 0);
    }

    #[test]
    fn z2_has_two_sectors() {
        let model = z2_lmg(4, 0.5, 1.0, 2.0, 2.0, 1.0).unwrap();
        let l = assemble(&model, 2).unwrap();
        let d = decompose(&l, model.symmetry.as_ref().unwrap()).unwrap();
        assert_eq!(d.charges(), vec![0, 1]);
        assert!(d.off_sector_residual <= 1e-12);
    }

    #[test]
    fn wrong_sign_is_reported() {
        let model = two_mode_dicke(2, 1.0, 1.0, 5.0, 5.0).unwrap();
        let l = assemble(&model, 2).unwrap();
        let flipped = SymmetrySpec::new(vec![0, 1, 2], vec![-1, 1], 0);
        assert!(matches!(decompose(&l, &flipped), Err(Error::SymmetryViolation { .. })));
        assert!(flipped.validate(&model).is_err());
    }

    #[test]
    fn dicke_sectors_match_brute_force() {
        let model = two_mode_dicke(2, 1.0, 1.0, 5.0, 5.0).unwrap();
        let l = assemble(&model, 2).unwrap();
        let d = decompose(&l, model.symmetry.as_ref().unwrap()).unwrap();
        // Sz index difference plus (n_a - m_a) - (n_b - m_b), recomputed directly.
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for idx in l.hierarchy().indices() {
            let v = &idx.n().iter().chain(idx.m()).map(|&x| x as i64).collect::<Vec<_>>();
            for i in 0..3i64 {
                for j in 0..3i64 {
                    *counts.entry(i - j + (v[0] - v[2]) - (v[1] - v[3])).or_default() += 1;
                }
            }
        }
        let got: BTreeMap<i64, usize> = d.sectors().map(|s| (s.charge, s.indices.len())).collect();
        assert_eq!(got, counts);
        assert_eq!(got.values().sum::<usize>(), l.dim());
    }

    #[test]
    fn sector_spectra_union_and_conjugation() {
        let model = z2_lmg(2, 0.5, 1.0, 2.0, 2.0, 1.0).unwrap();
        let l = assemble(&model, 2).unwrap();
        let d = decompose(&l, model.symmetry.as_ref().unwrap()).unwrap();
        let full = eig_dense(&l.matrix().to_dense(), false).unwrap().eigenvalues;
        let mut union = Vec::new();
        for s in d.sectors() {
            union.extend(eig_dense(&s.matrix.to_dense(), false).unwrap().eigenvalues);
        }
        assert_eq!(union.len(), full.len());
        for z in &union {
            let best = full.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-9);
        }
    }
}
