//! Run configuration and the separate plant file.
//!
//! The plant file is only ever opened by the commands that simulate the true
//! system (`collect`, `verify`, `demo-spacecraft`). Synthesis works from the
//! data bundle and the sections of the run config that do not mention it.

use std::fs;
use std::path::{Path, PathBuf};

use deltaiss::plant::{CollectOptions, DerivativeSource, ExcitationSpec, PolySystem};
use deltaiss::polyalg::MonomialDictionary;
use deltaiss::sdp::SolveOptions;
use deltaiss::synthesis::SynthesisConfig;
use deltaiss::verify::{InitialRange, ReferenceSignal, VerifyOptions};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Path to the plant file, relative to the config file.
    pub plant: Option<PathBuf>,
    pub dictionary: DictionarySpec,
    #[serde(default)]
    pub data: DataSpec,
    pub synthesis: SynthesisSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    /// Run directory used when `--out` is not given.
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum DictionarySpec {
    Enumerated { nvars: usize, min_degree: u32, max_degree: u32 },
    Explicit { nvars: usize, exponents: Vec<Vec<u32>> },
}

impl DictionarySpec {
    pub fn build(&self) -> Result<MonomialDictionary, CliError> {
        let d = match self {
            DictionarySpec::Enumerated { nvars, min_degree, max_degree } => {
                MonomialDictionary::enumerate(*nvars, *min_degree, *max_degree)
            }
            DictionarySpec::Explicit { nvars, exponents } => MonomialDictionary::from_exponents(*nvars, exponents.clone()),
        };
        d.map_err(|e| CliError::Config(format!("dictionary: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    pub samples: usize,
    pub tau: f64,
    pub t0: f64,
    pub substeps: usize,
    pub derivative_source: DerivativeSource,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
    pub x0_tilde: Option<Vec<f64>>,
    /// Defaults to a unit-amplitude multisine seeded with `seed`.
    pub excitation: Option<ExcitationSpec>,
}

impl Default for DataSpec {
    fn default() -> Self {
        let c = CollectOptions::default();
        DataSpec {
            samples: c.samples,
            tau: c.tau,
            t0: c.t0,
            substeps: c.substeps,
            derivative_source: c.source,
            seed: 0,
            x0: None,
            x0_tilde: None,
            excitation: None,
        }
    }
}

impl DataSpec {
    pub fn collect_options(&self) -> CollectOptions {
        CollectOptions {
            samples: self.samples,
            tau: self.tau,
            t0: self.t0,
            source: self.derivative_source,
            substeps: self.substeps,
        }
    }

    pub fn excitation(&self, m: usize) -> ExcitationSpec {
        let mut e = self.excitation.clone().unwrap_or_else(|| ExcitationSpec::multisine(vec![1.0; m], self.seed));
        e.seed = self.seed;
        e
    }

    pub fn initial_states(&self, n: usize) -> Result<(DVector<f64>, DVector<f64>), CliError> {
        let get = |v: &Option<Vec<f64>>, what: &str| -> Result<DVector<f64>, CliError> {
            let v = v.as_ref().ok_or_else(|| CliError::Config(format!("data.{what} is required")))?;
            if v.len() != n {
                return Err(CliError::Config(format!("data.{what} has {} entries, plant has {n} states", v.len())));
            }
            Ok(DVector::from_column_slice(v))
        };
        Ok((get(&self.x0, "x0")?, get(&self.x0_tilde, "x0_tilde")?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    pub epsilon: f64,
    pub vartheta: f64,
    pub y_degree: Option<u32>,
    #[serde(default = "default_psd_floor")]
    pub psd_floor: f64,
    /// Upper bound on `Theta`; 0 disables it.
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    /// Bound on the normalized closed-loop matrix; 0 disables it.
    #[serde(default = "default_gain_bound")]
    pub gain_bound: f64,
    pub rank_tol: Option<f64>,
    #[serde(default = "default_verify_tol")]
    pub verify_tol: f64,
    #[serde(default)]
    pub solver: SolverSpec,
    /// Extra `[epsilon, vartheta]` pairs tried in order after the main one fails.
    #[serde(default)]
    pub retry: Vec<[f64; 2]>,
}

fn default_psd_floor() -> f64 {
    1e-6
}
fn default_theta_max() -> f64 {
    10.0
}
fn default_gain_bound() -> f64 {
    20.0
}
fn default_verify_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub max_iter: usize,
    pub tol_feas: f64,
    pub tol_gap: f64,
    pub margin_cap: f64,
    pub variable_bound: f64,
    pub rank_tol: f64,
    pub consistency_tol: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let s = SolveOptions::default();
        SolverSpec {
            max_iter: s.max_iter,
            tol_feas: s.tol_feas,
            tol_gap: s.tol_gap,
            margin_cap: s.margin_cap,
            variable_bound: s.variable_bound,
            rank_tol: s.rank_tol,
            consistency_tol: s.consistency_tol,
        }
    }
}

impl SynthesisSpec {
    pub fn to_config(&self, dict: MonomialDictionary) -> Result<SynthesisConfig, CliError> {
        let mut c = SynthesisConfig::new(dict, self.epsilon, self.vartheta);
        c.y_degree = self.y_degree;
        c.psd_floor = self.psd_floor;
        c.theta_max = (self.theta_max > 0.0).then_some(self.theta_max);
        c.gain_bound = (self.gain_bound > 0.0).then_some(self.gain_bound);
        c.rank_tol = self.rank_tol;
        c.verify_tol = self.verify_tol;
        let s = &self.solver;
        c.solver = SolveOptions {
            max_iter: s.max_iter,
            tol_feas: s.tol_feas,
            tol_gap: s.tol_gap,
            margin_cap: s.margin_cap,
            variable_bound: s.variable_bound,
            rank_tol: s.rank_tol,
            consistency_tol: s.consistency_tol,
        };
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeKind {
    Box,
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub pairs: usize,
    pub horizon: f64,
    pub step: f64,
    pub range: RangeKind,
    pub half_width: f64,
    pub seed: u64,
    pub slack: f64,
    pub signal: ReferenceSignal,
    pub signal_tilde: ReferenceSignal,
    pub b_norm_bound: Option<f64>,
    pub convergence_ratio: f64,
    pub decay_share: f64,
    /// Condition tolerance for the recheck that precedes simulation.
    pub recheck_tol: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        let v = VerifyOptions::default();
        let half_width = match v.range {
            InitialRange::Box { half_width } => half_width,
            InitialRange::Split => 10.0,
        };
        VerifySpec {
            pairs: v.pairs,
            horizon: v.horizon,
            step: v.step,
            range: RangeKind::Box,
            half_width,
            seed: v.seed,
            slack: v.slack,
            signal: v.signal,
            signal_tilde: v.signal_tilde,
            b_norm_bound: None,
            convergence_ratio: v.convergence_ratio,
            decay_share: v.decay_share,
            recheck_tol: 1e-6,
        }
    }
}

impl VerifySpec {
    pub fn to_options(&self, vartheta: f64) -> Result<VerifyOptions, CliError> {
        if self.pairs == 0 || !(self.horizon > 0.0) || !(self.step > 0.0) || self.step > self.horizon {
            return Err(CliError::Config("verify needs pairs >= 1 and 0 < step <= horizon".into()));
        }
        if !(self.slack >= 0.0) || !(self.half_width > 0.0) {
            return Err(CliError::Config("verify.slack must be >= 0 and verify.half_width > 0".into()));
        }
        if let Some(b) = self.b_norm_bound {
            if !(b >= 0.0) || !b.is_finite() {
                return Err(CliError::Config("B-norm bound must be a finite non-negative number".into()));
            }
        }
        if self.signal != self.signal_tilde && self.b_norm_bound.is_none() {
            return Err(CliError::Config(
                "the two reference inputs differ, so the decay bound has an input term rho * |du|^2 with \
                 rho = ||B||^2 / vartheta; B is unknown to the tool, supply --B-norm-bound"
                    .into(),
            ));
        }
        Ok(VerifyOptions {
            pairs: self.pairs,
            horizon: self.horizon,
            step: self.step,
            range: match self.range {
                RangeKind::Box => InitialRange::Box {
                    half_width: self.half_width,
                },
                RangeKind::Split => InitialRange::Split,
            },
            seed: self.seed,
            slack: self.slack,
            signal: self.signal.clone(),
            signal_tilde: self.signal_tilde.clone(),
            rho_bound: self.b_norm_bound.map(|b| b * b / vartheta),
            convergence_ratio: self.convergence_ratio,
            decay_share: self.decay_share,
        })
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut c: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        c.base_dir = base_dir.to_path_buf();
        c.validate_without_files()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::from_toml(&text, &base)?, text))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.validate_without_files()?;
        if let Some(p) = &self.plant {
            let full = self.base_dir.join(p);
            if !full.is_file() {
                return Err(CliError::Config(format!("plant file {} does not exist", full.display())));
            }
        }
        Ok(())
    }

    /// Numeric and structural checks only.
    pub fn validate_without_files(&self) -> Result<(), CliError> {
        let d = &self.data;
        if d.samples < 1 {
            return Err(CliError::Config("data.samples must be at least 1".into()));
        }
        if !(d.tau > 0.0) || d.substeps == 0 {
            return Err(CliError::Config("data.tau and data.substeps must be positive".into()));
        }
        let s = &self.synthesis;
        if !(s.epsilon > 0.0) || !(s.vartheta > 0.0) {
            return Err(CliError::Config("synthesis.epsilon and synthesis.vartheta must be positive".into()));
        }
        if s.retry.iter().any(|[e, v]| !(*e > 0.0) || !(*v > 0.0)) {
            return Err(CliError::Config("synthesis.retry entries must be positive".into()));
        }
        self.dictionary.build()?;
        Ok(())
    }

    pub fn plant_path(&self) -> Result<PathBuf, CliError> {
        self.plant
            .as_ref()
            .map(|p| self.base_dir.join(p))
            .ok_or_else(|| CliError::Config("this command needs `plant = \"...\"` in the config".into()))
    }
}

/// The true system, kept in its own file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, untagged)]
pub enum PlantFile {
    Builtin {
        builtin: String,
        inertia: Option<[f64; 3]>,
    },
    Matrices {
        nvars: usize,
        /// Row-major `n x N`.
        a: Vec<Vec<f64>>,
        /// Row-major `n x m`.
        b: Vec<Vec<f64>>,
        dictionary: Vec<Vec<u32>>,
    },
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let c = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || c == 0 || rows.iter().any(|r| r.len() != c) {
        return Err(CliError::Config(format!("plant {what} must be a non-empty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

impl PlantFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("plant file: {e}")))
    }

    pub fn system(&self) -> Result<PolySystem, CliError> {
        match self {
            PlantFile::Builtin { builtin, inertia } => match builtin.as_str() {
                "spacecraft" => Ok(match inertia {
                    Some([j1, j2, j3]) => {
                        if [j1, j2, j3].iter().any(|j| !(**j > 0.0)) {
                            return Err(CliError::Config("inertias must be positive".into()));
                        }
                        PolySystem::spacecraft(*j1, *j2, *j3)
                    }
                    None => PolySystem::builtin_spacecraft(),
                }),
                other => Err(CliError::Config(format!("unknown builtin plant {other:?}"))),
            },
            PlantFile::Matrices { nvars, a, b, dictionary } => {
                let dict = MonomialDictionary::from_exponents(*nvars, dictionary.clone())
                    .map_err(|e| CliError::Config(format!("plant dictionary: {e}")))?;
                PolySystem::new(matrix(a, "A")?, matrix(b, "B")?, dict).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }
}
