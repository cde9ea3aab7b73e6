//! Bath decompositions and the benchmark models.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::{c64, DenseMatrix};
use crate::operators::{spin_operators, SpinOperators, SpinSpace};
use crate::symmetry::SymmetrySpec;

/// Hermiticity tolerance for user-supplied Hamiltonians.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// One exponential `G e^{-iωτ - κ|τ|}` of a bath correlation function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathTerm {
    pub amplitude: Complex64,
    pub frequency: f64,
    pub decay: f64,
}

impl BathTerm {
    pub fn new(amplitude: Complex64, frequency: f64, decay: f64) -> Result<Self> {
        if !(amplitude.re.is_finite() && amplitude.im.is_finite() && frequency.is_finite()) {
            return Err(Error::InvalidArgument("bath term has non-finite parameters".into()));
        }
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bath decay rate must be positive, got {decay}"
            )));
        }
        Ok(Self {
            amplitude,
            frequency,
            decay,
        })
    }

    pub fn real(amplitude: f64, frequency: f64, decay: f64) -> Result<Self> {
        Self::new(c64(amplitude, 0.0), frequency, decay)
    }

    /// `w = κ + iω`.
    pub fn rate(&self) -> Complex64 {
        c64(self.decay, self.frequency)
    }
}

#[derive(Clone, Debug)]
pub struct BathSpec {
    coupling: DenseMatrix,
    terms: Vec<BathTerm>,
}

impl BathSpec {
    pub fn new(coupling: DenseMatrix, terms: Vec<BathTerm>) -> Result<Self> {
        if !coupling.is_square() {
            return Err(Error::Dimension("bath coupling operator must be square".into()));
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("bath needs at least one exponential term".into()));
        }
        Ok(Self { coupling, terms })
    }

    pub fn coupling(&self) -> &DenseMatrix {
        &self.coupling
    }

    pub fn terms(&self) -> &[BathTerm] {
        &self.terms
    }
}

/// `α(τ) = Σ_j G_j e^{-iω_j τ - κ_j |τ|}`.
pub fn correlation(bath: &BathSpec, tau: f64) -> Complex64 {
    bath.terms
        .iter()
        .map(|t| t.amplitude * c64(-t.decay * tau.abs(), -t.frequency * tau).exp())
        .sum()
}

/// A pseudomode: one term of one bath.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub bath: usize,
    pub term: usize,
}

#[derive(Clone, Debug)]
pub struct ModelInstance {
    pub name: String,
    hamiltonian: DenseMatrix,
    baths: Vec<BathSpec>,
    /// Particle number for collective-spin models.
    pub size: Option<usize>,
    pub params: BTreeMap<String, f64>,
    pub symmetry: Option<SymmetrySpec>,
    pub critical: BTreeMap<String, f64>,
}

impl ModelInstance {
    pub fn hamiltonian(&self) -> &DenseMatrix {
        &self.hamiltonian
    }

    pub fn baths(&self) -> &[BathSpec] {
        &self.baths
    }

    pub fn system_dim(&self) -> usize {
        self.hamiltonian.rows()
    }

    /// Pseudomodes in bath-major order.
    pub fn slots(&self) -> Vec<Slot> {
        self.baths
            .iter()
            .enumerate()
            .flat_map(|(b, bath)| (0..bath.terms.len()).map(move |t| Slot { bath: b, term: t }))
            .collect()
    }

    pub fn modes(&self) -> usize {
        self.baths.iter().map(|b| b.terms.len()).sum()
    }

    pub fn term(&self, slot: Slot) -> &BathTerm {
        &self.baths[slot.bath].terms[slot.term]
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    pub fn with_symmetry(mut self, spec: SymmetrySpec) -> Result<Self> {
        spec.validate(&self)?;
        self.symmetry = Some(spec);
        Ok(self)
    }

    /// Collective-spin operators of a spin model.
    pub fn spin(&self) -> Result<SpinOperators> {
        let n = self
            .size
            .ok_or_else(|| Error::InvalidArgument(format!("model '{}' has no spin size", self.name)))?;
        Ok(spin_operators(SpinSpace::new(n)?))
    }

    /// Resolve `Sx`, `Sy`, `Sz`, `Sp`, `Sm` (spin models) or `I`.
    pub fn named_operator(&self, name: &str) -> Result<DenseMatrix> {
        if name == "I" {
            return Ok(DenseMatrix::identity(self.system_dim()));
        }
        let ops = self.spin()?;
        match name {
            "Sx" => Ok(ops.sx),
            "Sy" => Ok(ops.sy),
            "Sz" => Ok(ops.sz),
            "Sp" => Ok(ops.sp),
            "Sm" => Ok(ops.sm),
            _ => Err(Error::InvalidArgument(format!("unknown operator '{name}'"))),
        }
    }
}

pub fn custom(
    name: &str,
    hamiltonian: DenseMatrix,
    baths: Vec<BathSpec>,
    params: BTreeMap<String, f64>,
) -> Result<ModelInstance> {
    if !hamiltonian.is_square() {
        return Err(Error::Dimension("Hamiltonian must be square".into()));
    }
    let defect = hamiltonian.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    if baths.is_empty() {
        return Err(Error::InvalidArgument("model needs at least one bath".into()));
    }
    let d = hamiltonian.rows();
    for (i, bath) in baths.iter().enumerate() {
        if bath.coupling.rows() != d {
            return Err(Error::Dimension(format!(
                "bath {i} acts on dimension {} but the system has dimension {d}",
                bath.coupling.rows()
            )));
        }
    }
    Ok(ModelInstance {
        name: name.to_string(),
        hamiltonian,
        baths,
        size: None,
        params,
        symmetry: None,
        critical: BTreeMap::new(),
    })
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {value}")))
    }
}

fn squeeze_hamiltonian(ops: &SpinOperators, n: usize, v: f64) -> DenseMatrix {
    let sp2 = &ops.sp * &ops.sp;
    let sm2 = &ops.sm * &ops.sm;
    &(&sp2 + &sm2) * (v / (2.0 * n as f64))
}

/// Parity of `S_z + a†a`: system charge `i mod 2`, odd coupling.
fn parity(n: usize) -> SymmetrySpec {
    SymmetrySpec::new((0..=n as i64).collect(), vec![1], 2)
}

/// Dissipative LMG model: `H = (V/2N)(S₊² + S₋²)`, `L = S₋`,
/// `α(τ) = (γκ/2N) e^{-κ|τ| - iωτ}`. Control parameter `g = V/γ`.
pub fn lmg(n: usize, v: f64, gamma: f64, kappa: f64, omega: f64) -> Result<ModelInstance> {
    positive("gamma", gamma)?;
    positive("kappa", kappa)?;
    let ops = spin_operators(SpinSpace::new(n)?);
    let g_amp = gamma * kappa / (2.0 * n as f64);
    let bath = BathSpec::new(ops.sm.clone(), vec![BathTerm::real(g_amp, omega, kappa)?])?;
    let params = BTreeMap::from([
        ("V".to_string(), v),
        ("gamma".to_string(), gamma),
        ("kappa".to_string(), kappa),
        ("omega".to_string(), omega),
        ("g".to_string(), v / gamma),
    ]);
    let mut model = custom("lmg", squeeze_hamiltonian(&ops, n, v), vec![bath], params)?;
    model.size = Some(n);
    model.critical.insert("g_c_markov".into(), 0.5);
    model.with_symmetry(parity(n))
}

/// LMG variant with `L = S_x` and a field `h S_z`.
pub fn z2_lmg(n: usize, v: f64, gamma: f64, kappa: f64, omega: f64, h: f64) -> Result<ModelInstance> {
    positive("gamma", gamma)?;
    positive("kappa", kappa)?;
    if !(v.is_finite() && h.is_finite() && omega.is_finite()) {
        return Err(Error::InvalidArgument("non-finite model parameter".into()));
    }
    let ops = spin_operators(SpinSpace::new(n)?);
    let g_amp = gamma * kappa / (2.0 * n as f64);
    let bath = BathSpec::new(ops.sx.clone(), vec![BathTerm::real(g_amp, omega, kappa)?])?;
    let hamiltonian = &squeeze_hamiltonian(&ops, n, v) + &(&ops.sz * h);
    let params = BTreeMap::from([
        ("V".to_string(), v),
        ("gamma".to_string(), gamma),
        ("kappa".to_string(), kappa),
        ("omega".to_string(), omega),
        ("h".to_string(), h),
        ("g".to_string(), v / gamma),
    ]);
    let mut model = custom("z2_lmg", hamiltonian, vec![bath], params)?;
    model.size = Some(n);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if close(omega, kappa) && close(kappa, 2.0 * gamma) && close(gamma, h) {
        model.critical.insert("g_c1".into(), -0.75);
        model.critical.insert("g_c2".into(), 1.0);
    }
    model.with_symmetry(parity(n))
}

/// `g_c = √(ω₀(ω² + κ²)/(2ω))`.
pub fn dicke_critical(omega0: f64, omega: f64, kappa: f64) -> f64 {
    (omega0 * (omega * omega + kappa * kappa) / (2.0 * omega)).sqrt()
}

/// Two-mode Dicke model: `H = ω₀ S_z`, `L₁ = S₋`, `L₂ = S₊`,
/// `α₁ = α₂ = (g²/N) e^{-κ|τ| - iωτ}`.
pub fn two_mode_dicke(n: usize, g: f64, omega0: f64, omega: f64, kappa: f64) -> Result<ModelInstance> {
    positive("kappa", kappa)?;
    if !(g.is_finite() && omega0.is_finite() && omega.is_finite()) {
        return Err(Error::InvalidArgument("non-finite model parameter".into()));
    }
    let ops = spin_operators(SpinSpace::new(n)?);
    let term = BathTerm::real(g * g / n as f64, omega, kappa)?;
    let baths = vec![
        BathSpec::new(ops.sm.clone(), vec![term])?,
        BathSpec::new(ops.sp.clone(), vec![term])?,
    ];
    let params = BTreeMap::from([
        ("g".to_string(), g),
        ("omega0".to_string(), omega0),
        ("omega".to_string(), omega),
        ("kappa".to_string(), kappa),
    ]);
    let mut model = custom("two_mode_dicke", &ops.sz * omega0, baths, params)?;
    model.size = Some(n);
    if omega != 0.0 && omega0 * omega > 0.0 {
        model
            .critical
            .insert("g_c".into(), dicke_critical(omega0, omega, kappa));
    }
    // U(1) generated by S_z + a†a − b†b.
    model.with_symmetry(SymmetrySpec::new((0..=n as i64).collect(), vec![1, -1], 0))
}

/// Qubit with `H = (ω_q/2)σ_z`, `L = σ₋` and one pseudomode.
pub fn qubit_decay(omega_q: f64, g: Complex64, omega: f64, kappa: f64) -> Result<ModelInstance> {
    let q = crate::operators::qubit_operators();
    let bath = BathSpec::new(q.sigma_minus.clone(), vec![BathTerm::new(g, omega, kappa)?])?;
    let params = BTreeMap::from([
        ("omega_q".to_string(), omega_q),
        ("G".to_string(), g.re),
        ("omega".to_string(), omega),
        ("kappa".to_string(), kappa),
    ]);
    let model = custom("qubit", &q.sigma_z * (omega_q / 2.0), vec![bath], params)?;
    // Excitation number: σ₋ lowers it, the pseudomode carries it.
    model.with_symmetry(SymmetrySpec::new(vec![0, 1], vec![1], 0))
}
