//! Collective-spin operators on the symmetric subspace and single-qubit
//! operators.
//!
//! Every basis in this crate is ordered with the lowest `S_z` eigenvalue
//! first: spin states run `m = -j, …, +j` and the qubit basis is
//! `(|g⟩, |e⟩)`.

use crate::error::{Error, Result};
use crate::matrix::{c64, DenseMatrix};

/// Symmetric (Dicke) subspace of `N` spin-½ particles: `j = N/2`, `d = N + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinSpace {
    particles: usize,
}

impl SpinSpace {
    pub fn new(particles: usize) -> Result<Self> {
        if particles == 0 {
            return Err(Error::InvalidArgument("spin space needs N >= 1".into()));
        }
        Ok(Self { particles })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn j(&self) -> f64 {
        self.particles as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.particles + 1
    }

    /// `m` value of basis state `i`.
    pub fn m(&self, i: usize) -> f64 {
        i as f64 - self.j()
    }
}

#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub sz: DenseMatrix,
    pub sp: DenseMatrix,
    pub sm: DenseMatrix,
    pub sx: DenseMatrix,
    pub sy: DenseMatrix,
}

pub fn spin_operators(space: SpinSpace) -> SpinOperators {
    let d = space.dim();
    let j = space.j();
    let sz = DenseMatrix::from_real_diag(&(0..d).map(|i| space.m(i)).collect::<Vec<_>>());
    let mut sp = DenseMatrix::zeros(d, d);
    for i in 0..d - 1 {
        let m = space.m(i);
        sp[(i + 1, i)] = c64((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let sm = sp.adjoint();
    let sx = &(&sp + &sm) * 0.5;
    // (S+ - S-)/(2i)
    let sy = (&sp - &sm).scale(c64(0.0, -0.5));
    SpinOperators { sz, sp, sm, sx, sy }
}

#[derive(Clone, Debug)]
pub struct QubitOperators {
    pub sigma_x: DenseMatrix,
    pub sigma_y: DenseMatrix,
    pub sigma_z: DenseMatrix,
    /// `|g⟩⟨e|`
    pub sigma_minus: DenseMatrix,
}

/// Pauli operators in the `(|g⟩, |e⟩)` basis, i.e. `σ_z = diag(-1, 1)` and
/// `σ_y = 2 S_y` of the spin-½ space.
pub fn qubit_operators() -> QubitOperators {
    let spin = spin_operators(SpinSpace { particles: 1 });
    QubitOperators {
        sigma_x: &spin.sx * 2.0,
        sigma_y: &spin.sy * 2.0,
        sigma_z: &spin.sz * 2.0,
        sigma_minus: spin.sm,
    }
}
