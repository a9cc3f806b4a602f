use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::residuals::ConditionReport;
use super::SynthesisError;
use crate::polyalg::{MonomialDictionary, PolyMatrix, PolyMatrixSerial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub version: String,
    pub margin: f64,
    pub iterations: usize,
    pub original_unknowns: usize,
    pub reduced_unknowns: usize,
    pub theta_max: Option<f64>,
    pub gain_bound: Option<f64>,
    pub psd_floor: f64,
}

/// Quadratic incremental Lyapunov certificate `V = (x - x~)' P (x - x~)` and its feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub theta: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    /// `T x n`.
    pub y: PolyMatrix,
    /// `m x n`; the control is `K(x) x + u_hat`.
    pub k: PolyMatrix,
    pub epsilon: f64,
    pub vartheta: f64,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    /// `||B||^2 / vartheta`, known only when a bound on `||B||` is supplied.
    pub rho_bound: Option<f64>,
    pub dictionary: MonomialDictionary,
    pub residual_report: Option<ConditionReport>,
    pub data_fingerprint: String,
    pub solver: SolverSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    fn from(m: &DMatrix<f64>) -> Self {
        Dense {
            rows: m.nrows(),
            cols: m.ncols(),
            data: crate::polyalg::row_major(m),
        }
    }

    fn to_matrix(&self, what: &str) -> Result<DMatrix<f64>, SynthesisError> {
        if self.data.len() != self.rows * self.cols {
            return Err(SynthesisError::InvalidConfig(format!("certificate field {what} has a ragged matrix")));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateFile {
    theta: Dense,
    p: Dense,
    sigma: Dense,
    y: PolyMatrixSerial,
    k: PolyMatrixSerial,
    epsilon: f64,
    vartheta: f64,
    alpha_lower: f64,
    alpha_upper: f64,
    rho_bound: Option<f64>,
    dictionary: Vec<Vec<u32>>,
    residual_report: Option<ConditionReport>,
    data_fingerprint: String,
    solver: SolverSummary,
}

impl Certificate {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn m(&self) -> usize {
        self.k.rows()
    }

    /// `V(x, x~)`.
    pub fn lyapunov(&self, x: &DVector<f64>, x_tilde: &DVector<f64>) -> f64 {
        let e = x - x_tilde;
        (e.transpose() * &self.p * &e)[(0, 0)]
    }

    pub fn with_b_norm_bound(mut self, b_norm: f64) -> Self {
        self.rho_bound = Some(b_norm * b_norm / self.vartheta);
        self
    }

    pub fn to_json(&self) -> String {
        let f = CertificateFile {
            theta: Dense::from(&self.theta),
            p: Dense::from(&self.p),
            sigma: Dense::from(&self.sigma),
            y: self.y.to_serial(),
            k: self.k.to_serial(),
            epsilon: self.epsilon,
            vartheta: self.vartheta,
            alpha_lower: self.alpha_lower,
            alpha_upper: self.alpha_upper,
            rho_bound: self.rho_bound,
            dictionary: self.dictionary.to_exponents(),
            residual_report: self.residual_report.clone(),
            data_fingerprint: self.data_fingerprint.clone(),
            solver: self.solver.clone(),
        };
        serde_json::to_string_pretty(&f).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SynthesisError> {
        let f: CertificateFile =
            serde_json::from_str(text).map_err(|e| SynthesisError::InvalidConfig(format!("certificate file: {e}")))?;
        let n = f.theta.rows;
        let dictionary = MonomialDictionary::from_exponents(n, f.dictionary)?;
        let cert = Certificate {
            theta: f.theta.to_matrix("theta")?,
            p: f.p.to_matrix("p")?,
            sigma: f.sigma.to_matrix("sigma")?,
            y: PolyMatrix::from_serial(&f.y)?,
            k: PolyMatrix::from_serial(&f.k)?,
            epsilon: f.epsilon,
            vartheta: f.vartheta,
            alpha_lower: f.alpha_lower,
            alpha_upper: f.alpha_upper,
            rho_bound: f.rho_bound,
            dictionary,
            residual_report: f.residual_report,
            data_fingerprint: f.data_fingerprint,
            solver: f.solver,
        };
        for (what, m) in [("theta", &cert.theta), ("p", &cert.p), ("sigma", &cert.sigma)] {
            if m.shape() != (n, n) {
                return Err(SynthesisError::InvalidConfig(format!("certificate field {what} is not {n}x{n}")));
            }
        }
        if cert.y.cols() != n || cert.k.cols() != n || cert.y.nvars() != n || cert.k.nvars() != n {
            return Err(SynthesisError::InvalidConfig("certificate polynomial shapes disagree".into()));
        }
        Ok(cert)
    }
}
