//! A-posteriori checks of a certificate: residuals against raw data and
//! closed-loop behaviour of the true plant under the synthesized feedback.

mod export;
mod signals;
mod trace;

pub use export::{trace_csv_header, write_convergence_long_csv, write_trace_csv};
pub use signals::{RealizedSignal, ReferenceSignal};
pub use trace::{
    convergence_report, decay_fraction, gronwall_check, simulate_closed_loop_pair, ConvergenceEntry, ConvergenceReport,
    GronwallResult, PairTrace, MONOTONE_BAND,
};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{BatchPair, PlantError, PolySystem};
use crate::synthesis::{condition_residuals, Certificate, ConditionReport, SynthesisError};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("reference inputs differ, so the decay check needs a bound on ||B|| (rho = ||B||^2 / vartheta)")]
    MissingRhoBound,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Recomputes every certificate condition from the raw batches.
///
/// A fingerprint mismatch is reported in the result but does not fail it.
pub fn recheck_certificate(cert: &Certificate, pair: &BatchPair, tol: f64) -> Result<ConditionReport, VerifyError> {
    Ok(condition_residuals(cert, pair, tol)?)
}

/// Where verification initial states are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialRange {
    /// Both states uniform in `[-half_width, half_width]^n`.
    Box { half_width: f64 },
    /// `x0` in `[0, 2e4]^n`, `x0~` in `[-2e4, 0)^n`.
    Split,
}

impl InitialRange {
    fn draw(&self, rng: &mut ChaCha8Rng, n: usize) -> (DVector<f64>, DVector<f64>) {
        match *self {
            InitialRange::Box { half_width } => (
                DVector::from_fn(n, |_, _| rng.random_range(-half_width..=half_width)),
                DVector::from_fn(n, |_, _| rng.random_range(-half_width..=half_width)),
            ),
            InitialRange::Split => (
                DVector::from_fn(n, |_, _| rng.random_range(0.0..=2e4)),
                DVector::from_fn(n, |_, _| rng.random_range(-2e4..0.0)),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub pairs: usize,
    pub horizon: f64,
    pub step: f64,
    pub range: InitialRange,
    pub seed: u64,
    pub slack: f64,
    pub signal: ReferenceSignal,
    pub signal_tilde: ReferenceSignal,
    pub rho_bound: Option<f64>,
    /// Required `terminal / initial` distance ratio when the inputs agree.
    pub convergence_ratio: f64,
    /// Required share of samples obeying the sampled decay inequality.
    pub decay_share: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            pairs: 20,
            horizon: 20.0,
            step: 0.01,
            range: InitialRange::Box { half_width: 10.0 },
            seed: 0,
            slack: 0.05,
            signal: ReferenceSignal::Trig,
            signal_tilde: ReferenceSignal::Trig,
            rho_bound: None,
            convergence_ratio: 1e-3,
            decay_share: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub pair: usize,
    pub x0: Vec<f64>,
    pub x0_tilde: Vec<f64>,
    pub gronwall: GronwallResult,
    pub decay_fraction: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub options: VerifyOptions,
    pub outcomes: Vec<PairOutcome>,
    pub convergence: ConvergenceReport,
    pub same_inputs: bool,
    pub pass: bool,
}

/// Simulates `opts.pairs` closed-loop pairs in parallel and aggregates in pair order.
pub fn verify_pairs(
    sys: &PolySystem,
    cert: &Certificate,
    opts: &VerifyOptions,
) -> Result<(VerificationSummary, Vec<PairTrace>), VerifyError> {
    let m = sys.m();
    let u = opts.signal.realize(m, opts.horizon)?;
    let ut = opts.signal_tilde.realize(m, opts.horizon)?;
    let same_inputs = opts.signal == opts.signal_tilde;
    if !same_inputs && opts.rho_bound.is_none() {
        return Err(VerifyError::MissingRhoBound);
    }
    let results: Vec<_> = (0..opts.pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
            let (x0, xt) = opts.range.draw(&mut rng, sys.n());
            let tr = simulate_closed_loop_pair(sys, cert, &x0, &xt, |t| u.eval(t), |t| ut.eval(t), opts.horizon, opts.step);
            (i, x0, xt, tr)
        })
        .collect();

    let mut outcomes = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    let mut pass = true;
    for (i, x0, xt, tr) in results {
        match tr {
            Ok(tr) => {
                let g = gronwall_check(&tr, cert.epsilon, opts.rho_bound, opts.slack)?;
                let tol_num = 1e-6 * tr.v_series[0] + 1e-12;
                let frac = decay_fraction(&tr, cert.epsilon, tol_num);
                pass &= g.pass;
                if same_inputs {
                    pass &= frac >= opts.decay_share;
                }
                outcomes.push(PairOutcome {
                    pair: i,
                    x0: x0.iter().copied().collect(),
                    x0_tilde: xt.iter().copied().collect(),
                    gronwall: g,
                    decay_fraction: frac,
                    error: None,
                });
                traces.push(tr);
            }
            Err(e) => {
                pass = false;
                outcomes.push(PairOutcome {
                    pair: i,
                    x0: x0.iter().copied().collect(),
                    x0_tilde: xt.iter().copied().collect(),
                    gronwall: GronwallResult {
                        pass: false,
                        worst_margin: f64::NEG_INFINITY,
                        worst_time: f64::NAN,
                    },
                    decay_fraction: 0.0,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let convergence = convergence_report(&traces);
    if same_inputs {
        pass &= convergence.worst_ratio <= opts.convergence_ratio;
    }
    Ok((
        VerificationSummary {
            options: opts.clone(),
            outcomes,
            convergence,
            same_inputs,
            pass,
        },
        traces,
    ))
}
