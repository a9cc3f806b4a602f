use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{Certificate, SynthesisError};
use crate::plant::{lift_states, BatchPair};
use crate::polyalg::{factorize_dictionary, poly_residual, PolyMatrix};

/// Tolerance on `P Theta = I`, separate from the condition tolerance.
pub const INVERSE_TOL: f64 = 1e-8;

/// The certificate conditions restated as numbers, recomputed from raw data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub tol: f64,
    /// Max coefficient gap of `J0 Y(x)` against `aleph(x) Theta`, for both batches.
    pub theta_match: [f64; 2],
    /// Max coefficient gap of `X1 Y(x)` against the constant `Sigma`, for both batches.
    pub sigma_match: [f64; 2],
    /// `lambda_max(Sigma + Sigma' + vartheta I + epsilon Theta)`.
    pub decay_max_eig: f64,
    pub theta_min_eig: f64,
    pub inverse_defect: f64,
    /// `K(x)` against `U0 Y(x) P`, relative to the largest gain coefficient.
    pub gain_defect: f64,
    /// Gap between stored and recomputed `lambda_min(P)`, `lambda_max(P)`.
    pub alpha_defect: f64,
    pub fingerprint_match: bool,
    pub pass: bool,
}

impl ConditionReport {
    pub fn worst_equality(&self) -> f64 {
        self.theta_match.iter().chain(&self.sigma_match).cloned().fold(0.0, f64::max)
    }

    /// Largest absolute difference over every numeric field.
    pub fn distance(&self, other: &ConditionReport) -> f64 {
        let a = self.numbers();
        let b = other.numbers();
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn numbers(&self) -> [f64; 9] {
        [
            self.theta_match[0],
            self.theta_match[1],
            self.sigma_match[0],
            self.sigma_match[1],
            self.decay_max_eig,
            self.theta_min_eig,
            self.inverse_defect,
            self.gain_defect,
            self.alpha_defect,
        ]
    }
}

fn extreme_eigs(m: &DMatrix<f64>) -> (f64, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym).eigenvalues;
    (e.min(), e.max())
}

/// Recomputes every certificate condition from the certificate and the raw batches.
pub fn condition_residuals(cert: &Certificate, pair: &BatchPair, tol: f64) -> Result<ConditionReport, SynthesisError> {
    let n = cert.dictionary.nvars();
    let aleph = factorize_dictionary(&cert.dictionary)?;
    let target = aleph.right_mul(&cert.theta)?;
    let sigma = PolyMatrix::constant(n, cert.sigma.clone());
    let mut theta_match = [0.0; 2];
    let mut sigma_match = [0.0; 2];
    for (k, b) in [pair.batch(), pair.sibling()].into_iter().enumerate() {
        let j0 = lift_states(&b.x0, &cert.dictionary)?;
        theta_match[k] = poly_residual(&cert.y.left_mul(&j0)?, &target)?;
        sigma_match[k] = poly_residual(&cert.y.left_mul(&b.x1)?, &sigma)?;
    }
    let decay = &cert.sigma + cert.sigma.transpose() + DMatrix::identity(n, n) * cert.vartheta + &cert.theta * cert.epsilon;
    let (_, decay_max_eig) = extreme_eigs(&decay);
    let (theta_min_eig, _) = extreme_eigs(&cert.theta);
    let inverse_defect = (&cert.p * &cert.theta - DMatrix::<f64>::identity(n, n)).amax();
    let rebuilt = cert.y.left_mul(pair.u0())?.right_mul(&cert.p)?;
    let scale = rebuilt.terms().map(|(_, c)| c.amax()).fold(1.0, f64::max);
    let gain_defect = if cert.k.shape() == rebuilt.shape() && cert.k.nvars() == rebuilt.nvars() {
        poly_residual(&cert.k, &rebuilt)? / scale
    } else {
        f64::INFINITY
    };
    let (pl, pu) = extreme_eigs(&cert.p);
    let alpha_defect = (pl - cert.alpha_lower).abs().max((pu - cert.alpha_upper).abs());
    let fingerprint_match = pair.fingerprint() == cert.data_fingerprint;
    let values = [theta_match[0], theta_match[1], sigma_match[0], sigma_match[1], decay_max_eig];
    let pass = values.iter().all(|v| v.is_finite())
        && theta_match.iter().chain(&sigma_match).all(|&r| r <= tol)
        && decay_max_eig <= tol
        && theta_min_eig > 0.0
        && inverse_defect <= INVERSE_TOL
        && gain_defect <= tol
        && alpha_defect <= tol;
    Ok(ConditionReport {
        tol,
        theta_match,
        sigma_match,
        decay_max_eig,
        theta_min_eig,
        inverse_defect,
        gain_defect,
        alpha_defect,
        fingerprint_match,
        pass,
    })
}
