//! JSON run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::convergence::DEFAULT_EPSILON;
use crate::error::{Error, Result};
use crate::matrix::{c64, DenseMatrix, SparseMatrix};
use crate::model::{self, ModelInstance};
use crate::spectra::SolverOptions;

/// Named operators accepted in `observables`.
pub const NAMED_OBSERVABLES: [&str; 6] = ["I", "Sx", "Sy", "Sz", "Sp", "Sm"];
pub const MODEL_NAMES: [&str; 4] = ["lmg", "z2_lmg", "two_mode_dicke", "qubit"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    SteadyState,
    Gap,
    Sectors,
    Decompose,
    Ssb,
    Converge,
    CompareMarkovian,
    Properties,
}

impl Analysis {
    pub fn token(self) -> &'static str {
        match self {
            Analysis::SteadyState => "steady_state",
            Analysis::Gap => "gap",
            Analysis::Sectors => "sectors",
            Analysis::Decompose => "decompose",
            Analysis::Ssb => "ssb",
            Analysis::Converge => "converge",
            Analysis::CompareMarkovian => "compare_markovian",
            Analysis::Properties => "properties",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KMax {
    Fixed(usize),
    Auto(AutoToken),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoToken {
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Named(String),
    /// Matrix read from a triplet file, path relative to the config file.
    File { name: String, file: PathBuf },
}

impl ObservableSpec {
    pub fn label(&self) -> &str {
        match self {
            ObservableSpec::Named(n) => n,
            ObservableSpec::File { name, .. } => name,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// `[re, im]`.
    #[serde(default)]
    pub shift: [f64; 2],
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_count() -> usize {
    6
}

fn default_tol() -> f64 {
    1e-10
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_k_limit() -> usize {
    12
}

fn default_k_start() -> usize {
    1
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            shift: [0.0, 0.0],
            count: default_count(),
            tol: default_tol(),
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            shift: c64(self.shift[0], self.shift[1]),
            count: self.count,
            tol: self.tol,
            ..SolverOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Spin sizes `N`; ignored by the qubit model.
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    pub k_max: KMax,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_k_start")]
    pub k_start: usize,
    #[serde(default = "default_k_limit")]
    pub k_limit: usize,
    pub sweep: Sweep,
    pub analyses: Vec<Analysis>,
    #[serde(default = "default_observables")]
    pub observables: Vec<ObservableSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
    /// Write each assembled generator in triplet format.
    #[serde(default)]
    pub export_matrices: bool,
    /// Directory of the config file; relative observable paths resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_sizes() -> Vec<usize> {
    vec![1]
}

fn default_observables() -> Vec<ObservableSpec> {
    vec![ObservableSpec::Named("Sz".into())]
}

fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Reads, deserializes and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let file = fs::File::open(path).map_err(|e| invalid("", format!("{}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_reader(BufReader::new(file));
    let mut config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    config.validate()?;
    Ok(config)
}

/// Parses a configuration from a JSON string; relative paths resolve against
/// `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let mut config: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    config.base_dir = base_dir.to_path_buf();
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !MODEL_NAMES.contains(&self.model.name.as_str()) {
            return Err(invalid(
                "model.name",
                format!("unknown model '{}', expected one of {MODEL_NAMES:?}", self.model.name),
            ));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(invalid("sizes", "need at least one positive size"));
        }
        if self.sweep.values.is_empty() {
            return Err(invalid("sweep.values", "grid is empty"));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sweep.values", "grid values must be finite"));
        }
        if self.analyses.is_empty() {
            return Err(invalid("analyses", "no analyses requested"));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        if self.k_start > self.k_limit {
            return Err(invalid("k_start", "exceeds k_limit"));
        }
        if self.solver.count == 0 || !(self.solver.tol > 0.0) {
            return Err(invalid("solver", "count and tol must be positive"));
        }
        if self.observables.is_empty() {
            return Err(invalid("observables", "no observables"));
        }
        for (i, obs) in self.observables.iter().enumerate() {
            match obs {
                ObservableSpec::Named(name) => {
                    if !NAMED_OBSERVABLES.contains(&name.as_str()) {
                        return Err(invalid(
                            &format!("observables[{i}]"),
                            format!("unknown operator '{name}', expected one of {NAMED_OBSERVABLES:?} or {{name, file}}"),
                        ));
                    }
                }
                ObservableSpec::File { .. } => {
                    let m = self.load_observable_file(obs).map_err(|e| invalid(&format!("observables[{i}]"), e.to_string()))?;
                    let defect = m.hermiticity_defect();
                    if defect > 1e-12 {
                        return Err(invalid(
                            &format!("observables[{i}]"),
                            format!("custom observable is not Hermitian (defect {defect:.3e})"),
                        ));
                    }
                }
            }
        }
        // Building one model catches bad parameter names and values early.
        let first = self.model_at(self.sizes[0], self.sweep.values[0]).map_err(|e| match e {
            Error::Config { .. } => e,
            other => invalid("model.params", other.to_string()),
        })?;
        for analysis in &self.analyses {
            if matches!(analysis, Analysis::Sectors | Analysis::Decompose | Analysis::Ssb) && first.symmetry.is_none() {
                return Err(invalid("analyses", format!("'{}' needs a model with a symmetry", analysis.token())));
            }
            if *analysis == Analysis::Ssb && first.symmetry.as_ref().map_or(true, |s| s.group_order != 2) {
                return Err(invalid("analyses", "'ssb' needs a model with a Z2 symmetry".to_string()));
            }
        }
        Ok(())
    }

    fn load_observable_file(&self, obs: &ObservableSpec) -> Result<DenseMatrix> {
        let ObservableSpec::File { file, .. } = obs else {
            return Err(Error::InvalidArgument("not a file observable".into()));
        };
        let path = self.base_dir.join(file);
        let f = fs::File::open(&path)?;
        Ok(SparseMatrix::read_triplets(BufReader::new(f))?.to_dense())
    }

    /// Resolves an observable for a model instance.
    pub fn observable(&self, obs: &ObservableSpec, model: &ModelInstance) -> Result<DenseMatrix> {
        let m = match obs {
            ObservableSpec::Named(name) => model.named_operator(name)?,
            ObservableSpec::File { .. } => self.load_observable_file(obs)?,
        };
        if m.rows() != model.system_dim() || !m.is_square() {
            return Err(Error::Dimension(format!(
                "observable '{}' is {}x{}, system dimension is {}",
                obs.label(),
                m.rows(),
                m.cols(),
                model.system_dim()
            )));
        }
        Ok(m)
    }

    /// Model with the sweep parameter set to `value`.
    pub fn model_at(&self, n: usize, value: f64) -> Result<ModelInstance> {
        let mut params = self.model.params.clone();
        params.insert(self.sweep.param.clone(), value);
        build_model(&self.model.name, n, &params)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

fn take(params: &BTreeMap<String, f64>, key: &str, default: Option<f64>) -> Result<f64> {
    params
        .get(key)
        .copied()
        .or(default)
        .ok_or_else(|| invalid(&format!("model.params.{key}"), "missing parameter"))
}

fn check_known(params: &BTreeMap<String, f64>, known: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !known.contains(&key.as_str()) {
            return Err(invalid(
                &format!("model.params.{key}"),
                format!("unknown parameter, expected one of {known:?}"),
            ));
        }
    }
    Ok(())
}

/// Builds a preset from flat parameters.
///
/// * `lmg`: `gamma`, `kappa`, `omega` and either `V` or `g = V/γ`.
/// * `z2_lmg`: as `lmg` plus `h`.
/// * `two_mode_dicke`: `omega0`, `omega`, `kappa` and either `g` or
///   `g_ratio = g/g_c`.
/// * `qubit`: `omega_q`, `G`, `omega`, `kappa`; `N` is ignored.
pub fn build_model(name: &str, n: usize, params: &BTreeMap<String, f64>) -> Result<ModelInstance> {
    match name {
        "lmg" | "z2_lmg" => {
            let mut known = vec!["V", "g", "gamma", "kappa", "omega"];
            if name == "z2_lmg" {
                known.push("h");
            }
            check_known(params, &known)?;
            let gamma = take(params, "gamma", None)?;
            let kappa = take(params, "kappa", None)?;
            let omega = take(params, "omega", None)?;
            let v = match (params.get("V"), params.get("g")) {
                (Some(_), Some(_)) => return Err(invalid("model.params", "give either V or g, not both")),
                (Some(&v), None) => v,
                (None, Some(&g)) => g * gamma,
                (None, None) => return Err(invalid("model.params.g", "missing parameter")),
            };
            if name == "lmg" {
                model::lmg(n, v, gamma, kappa, omega)
            } else {
                model::z2_lmg(n, v, gamma, kappa, omega, take(params, "h", None)?)
            }
        }
        "two_mode_dicke" => {
            check_known(params, &["g", "g_ratio", "omega0", "omega", "kappa"])?;
            let omega0 = take(params, "omega0", None)?;
            let omega = take(params, "omega", None)?;
            let kappa = take(params, "kappa", None)?;
            let g = match (params.get("g"), params.get("g_ratio")) {
                (Some(_), Some(_)) => return Err(invalid("model.params", "give either g or g_ratio, not both")),
                (Some(&g), None) => g,
                (None, Some(&r)) => r * model::dicke_critical(omega0, omega, kappa),
                (None, None) => return Err(invalid("model.params.g", "missing parameter")),
            };
            model::two_mode_dicke(n, g, omega0, omega, kappa)
        }
        "qubit" => {
            check_known(params, &["omega_q", "G", "omega", "kappa"])?;
            model::qubit_decay(
                take(params, "omega_q", None)?,
                Complex64::new(take(params, "G", None)?, 0.0),
                take(params, "omega", None)?,
                take(params, "kappa", None)?,
            )
        }
        other => Err(invalid("model.name", format!("unknown model '{other}'"))),
    }
}
