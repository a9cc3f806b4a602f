//! Controller and incremental Lyapunov certificate synthesis from a batch pair.
//!
//! The program searches for `Theta = P^-1`, `Sigma` and coefficient matrices
//! `Y_alpha` of a polynomial `Y(x)` such that
//!
//! ```text
//! J0 Y(x) = aleph(x) Theta      J0~ Y(x) = aleph(x) Theta
//! X1 Y(x) = Sigma               X1~ Y(x) = Sigma
//! Sigma + Sigma' + vartheta I + epsilon Theta <= 0,   Theta >= delta I
//! ```
//!
//! and returns the feedback `u = K(x) x + u_hat` with `K(x) = U0 Y(x) P`.
//! Two extra LMIs, `Theta <= theta_max I` and a bound on `Sigma Theta^-1`,
//! keep the search away from degenerate scalings; both can be switched off.

mod assemble;
mod certificate;
mod residuals;

pub use assemble::{assemble_program, y_name, Assembly, SIGMA, THETA};
pub use certificate::{Certificate, SolverSummary};
pub use residuals::{condition_residuals, ConditionReport, INVERSE_TOL};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{lift_states, richness_check, BatchPair, PlantError, RichnessReport};
use crate::polyalg::{factorize_dictionary, MonomialDictionary, PolyError, PolyMatrix};
use crate::sdp::{check_solution, solve, SdpError, SdpSolution, SolveOptions, SolveStatus};

/// Recorded in every certificate.
pub const SOLVER_VERSION: &str = concat!("deltaiss-", env!("CARGO_PKG_VERSION"), "/barrier");

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid synthesis configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "lifted data is not rich enough: ranks {:?} but the dictionary needs {}{}",
        .0.ranks, .0.required_rank, .0.note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default()
    )]
    RankPreconditionViolated(RichnessReport),
    #[error("degree of Y(x) is {y_degree} but the transformation matrix has degree {required}")]
    DegreeTooLow { y_degree: u32, required: u32 },
    #[error("no certificate: best LMI margin {margin:.3e}, most violated family '{worst_family}'")]
    SdpInfeasible { margin: f64, worst_family: String },
    #[error("solver failed: {0}")]
    NumericalFailure(String),
    #[error("solver reported a point that failed the independent check: {0}")]
    VerificationFailed(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

#[derive(Debug, Clone)]
pub struct SynthesisConfig {
    pub epsilon: f64,
    pub vartheta: f64,
    /// Defaults to the dictionary's maximum degree minus one.
    pub y_degree: Option<u32>,
    pub dict: MonomialDictionary,
    /// `Theta >= psd_floor I`.
    pub psd_floor: f64,
    pub theta_max: Option<f64>,
    /// Bound `kappa` with `|| Theta^-1/2 Sigma Theta^-1/2 || <= kappa`.
    pub gain_bound: Option<f64>,
    /// Relative singular-value threshold for the richness check.
    pub rank_tol: Option<f64>,
    pub verify_tol: f64,
    pub solver: SolveOptions,
}

impl SynthesisConfig {
    pub fn new(dict: MonomialDictionary, epsilon: f64, vartheta: f64) -> Self {
        SynthesisConfig {
            epsilon,
            vartheta,
            y_degree: None,
            dict,
            psd_floor: 1e-6,
            theta_max: Some(10.0),
            gain_bound: Some(20.0),
            rank_tol: None,
            verify_tol: 1e-6,
            solver: SolveOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |m: String| Err(SynthesisError::InvalidConfig(m));
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.vartheta > 0.0) || !self.vartheta.is_finite() {
            return bad(format!("vartheta must be positive, got {}", self.vartheta));
        }
        if !(self.psd_floor >= 0.0) {
            return bad(format!("psd floor must be non-negative, got {}", self.psd_floor));
        }
        if let Some(c) = self.theta_max {
            if !(c > self.psd_floor) {
                return bad(format!("theta_max {c} must exceed the psd floor {}", self.psd_floor));
            }
        }
        if let Some(k) = self.gain_bound {
            if !(k > 0.0) {
                return bad(format!("gain bound must be positive, got {k}"));
            }
        }
        if !(self.verify_tol > 0.0) {
            return bad("verification tolerance must be positive".into());
        }
        Ok(())
    }
}

fn lifted_pair(pair: &BatchPair, cfg: &SynthesisConfig) -> Result<(DMatrix<f64>, DMatrix<f64>), SynthesisError> {
    if pair.batch().n() != cfg.dict.nvars() {
        return Err(SynthesisError::InvalidConfig(format!(
            "data has {} states but the dictionary has {} variables",
            pair.batch().n(),
            cfg.dict.nvars()
        )));
    }
    let report = richness_check(pair, &cfg.dict, cfg.rank_tol);
    if !report.rank_ok {
        return Err(SynthesisError::RankPreconditionViolated(report));
    }
    Ok((
        lift_states(&pair.batch().x0, &cfg.dict)?,
        lift_states(&pair.sibling().x0, &cfg.dict)?,
    ))
}

fn status_error(sol: &SdpSolution) -> Option<SynthesisError> {
    match sol.status {
        SolveStatus::Feasible => None,
        SolveStatus::Infeasible => Some(SynthesisError::SdpInfeasible {
            margin: sol.stats.margin,
            worst_family: sol.stats.worst_block.clone().unwrap_or_else(|| "none".into()),
        }),
        SolveStatus::NumericalFailure => Some(SynthesisError::NumericalFailure(format!(
            "{} after {} iterations, margin {:.3e}, equality residual {:.3e}",
            sol.stats.message, sol.stats.iterations, sol.stats.margin, sol.stats.max_equality_residual
        ))),
    }
}

/// Full pipeline: richness check, assembly, solve, independent checks, extraction.
pub fn synthesize(pair: &BatchPair, cfg: &SynthesisConfig) -> Result<Certificate, SynthesisError> {
    cfg.validate()?;
    let (j0, j0_tilde) = lifted_pair(pair, cfg)?;
    let aleph = factorize_dictionary(&cfg.dict)?;
    let asm = assemble_program(pair, &j0, &j0_tilde, &aleph, cfg)?;
    let sol = solve(&asm.problem, &cfg.solver)?;
    if let Some(e) = status_error(&sol) {
        return Err(e);
    }
    let check = check_solution(&asm.problem, &sol, cfg.verify_tol)?;
    if !check.pass {
        return Err(SynthesisError::VerificationFailed(format!(
            "equality residual {:.3e}, worst LMI eigenvalue {:.3e}",
            check.max_equality_residual,
            check.max_lmi_eig()
        )));
    }

    let n = cfg.dict.nvars();
    let theta = sol.assignment[THETA].clone();
    let sigma = sol.assignment[SIGMA].clone();
    let chol = Cholesky::new(theta.clone())
        .ok_or_else(|| SynthesisError::VerificationFailed("Theta is not positive definite".into()))?;
    let p_raw = chol.inverse();
    let p = (&p_raw + p_raw.transpose()) * 0.5;
    let mut y = PolyMatrix::zeros(n, pair.samples(), n);
    for (alpha, name) in asm.basis.iter().zip(&asm.y_names) {
        y.add_term(alpha.clone(), &sol.assignment[name])?;
    }
    let k = y.left_mul(pair.u0())?.right_mul(&p)?;
    let eig = nalgebra::SymmetricEigen::new(p.clone()).eigenvalues;

    let mut cert = Certificate {
        theta,
        p,
        sigma,
        y,
        k,
        epsilon: cfg.epsilon,
        vartheta: cfg.vartheta,
        alpha_lower: eig.min(),
        alpha_upper: eig.max(),
        rho_bound: None,
        dictionary: cfg.dict.clone(),
        residual_report: None,
        data_fingerprint: pair.fingerprint(),
        solver: SolverSummary {
            version: SOLVER_VERSION.to_string(),
            margin: sol.stats.margin,
            iterations: sol.stats.iterations,
            original_unknowns: sol.stats.original_unknowns,
            reduced_unknowns: sol.stats.reduced_unknowns,
            theta_max: cfg.theta_max,
            gain_bound: cfg.gain_bound,
            psd_floor: cfg.psd_floor,
        },
    };
    let report = condition_residuals(&cert, pair, cfg.verify_tol)?;
    if !report.pass {
        return Err(SynthesisError::VerificationFailed(format!(
            "condition residuals on raw data: equality {:.3e}, decay eigenvalue {:.3e}",
            report.worst_equality(),
            report.decay_max_eig
        )));
    }
    cert.residual_report = Some(report);
    Ok(cert)
}

/// `u = K(x) x + u_hat`.
pub fn controller_evaluate(cert: &Certificate, x: &DVector<f64>, u_hat: &DVector<f64>) -> Result<DVector<f64>, SynthesisError> {
    let (m, n) = cert.k.shape();
    if x.len() != n || u_hat.len() != m {
        return Err(SynthesisError::Poly(PolyError::DimensionMismatch {
            context: "controller input",
            expected: if x.len() != n { n } else { m },
            found: if x.len() != n { x.len() } else { u_hat.len() },
        }));
    }
    let k = cert.k.evaluate(x.as_slice())?;
    Ok(k * x + u_hat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub epsilon: f64,
    pub vartheta: f64,
    pub margin: Option<f64>,
    pub outcome: String,
}

/// Tries the configured `(epsilon, vartheta)` first, then each grid point, stopping at the first certificate.
///
/// Only infeasibility moves on to the next point; any other error is returned at once.
pub fn synthesize_with_retry(
    pair: &BatchPair,
    cfg: &SynthesisConfig,
    grid: &[(f64, f64)],
) -> (Result<Certificate, SynthesisError>, Vec<Attempt>) {
    let mut attempts = Vec::new();
    let points = std::iter::once((cfg.epsilon, cfg.vartheta)).chain(grid.iter().copied());
    let mut last = None;
    for (epsilon, vartheta) in points {
        let mut c = cfg.clone();
        c.epsilon = epsilon;
        c.vartheta = vartheta;
        match synthesize(pair, &c) {
            Ok(cert) => {
                attempts.push(Attempt {
                    epsilon,
                    vartheta,
                    margin: Some(cert.solver.margin),
                    outcome: "feasible".into(),
                });
                return (Ok(cert), attempts);
            }
            Err(SynthesisError::SdpInfeasible { margin, worst_family }) => {
                attempts.push(Attempt {
                    epsilon,
                    vartheta,
                    margin: Some(margin),
                    outcome: format!("infeasible ({worst_family})"),
                });
                last = Some(SynthesisError::SdpInfeasible { margin, worst_family });
            }
            Err(e) => {
                attempts.push(Attempt {
                    epsilon,
                    vartheta,
                    margin: None,
                    outcome: e.to_string(),
                });
                return (Err(e), attempts);
            }
        }
    }
    (Err(last.expect("at least one attempt")), attempts)
}

/// Margins of the shared-`Y` program and of the relaxation with separate maps per batch.
///
/// Diagnostic only; the two-map relaxation does not define a single controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoMapDiagnostic {
    pub shared_margin: f64,
    pub shared_status: SolveStatus,
    pub two_map_margin: f64,
    pub two_map_status: SolveStatus,
}

pub fn two_map_diagnostic(pair: &BatchPair, cfg: &SynthesisConfig) -> Result<TwoMapDiagnostic, SynthesisError> {
    cfg.validate()?;
    let (j0, j0_tilde) = lifted_pair(pair, cfg)?;
    let aleph = factorize_dictionary(&cfg.dict)?;
    let shared = solve(&assemble::build(pair, &j0, &j0_tilde, &aleph, cfg, false)?.problem, &cfg.solver)?;
    let split = solve(&assemble::build(pair, &j0, &j0_tilde, &aleph, cfg, true)?.problem, &cfg.solver)?;
    Ok(TwoMapDiagnostic {
        shared_margin: shared.stats.margin,
        shared_status: shared.status,
        two_map_margin: split.stats.margin,
        two_map_status: split.status,
    })
}

#[cfg(test)]
mod tests;
