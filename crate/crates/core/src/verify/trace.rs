use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::VerifyError;
use crate::plant::{rk4, step_count, PolySystem};
use crate::synthesis::Certificate;

/// Two closed-loop runs of the same plant and controller from different initial states.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTrace {
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub x_tilde: Vec<DVector<f64>>,
    pub u_hat: Vec<DVector<f64>>,
    pub u_hat_tilde: Vec<DVector<f64>>,
    pub v_series: Vec<f64>,
    pub diff_norm_series: Vec<f64>,
    /// Centered differences of `v_series`; one-sided at the ends.
    pub lie_series: Vec<f64>,
}

impl PairTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest `|u_hat(t) - u_hat~(t)|` over the recorded samples.
    pub fn input_gap(&self) -> f64 {
        self.u_hat
            .iter()
            .zip(&self.u_hat_tilde)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Assembles a trace from states; `V`, norms and the Lie estimate are derived here.
    pub fn from_states(
        cert: &Certificate,
        times: Vec<f64>,
        x: Vec<DVector<f64>>,
        x_tilde: Vec<DVector<f64>>,
        u_hat: Vec<DVector<f64>>,
        u_hat_tilde: Vec<DVector<f64>>,
    ) -> Self {
        let v_series: Vec<f64> = x.iter().zip(&x_tilde).map(|(a, b)| cert.lyapunov(a, b)).collect();
        let diff_norm_series = x.iter().zip(&x_tilde).map(|(a, b)| (a - b).norm()).collect();
        let lie_series = centered_difference(&times, &v_series);
        PairTrace {
            times,
            x,
            x_tilde,
            u_hat,
            u_hat_tilde,
            v_series,
            diff_norm_series,
            lie_series,
        }
    }
}

pub(crate) fn centered_difference(t: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|k| {
            let (a, b) = if k == 0 {
                (0, 1)
            } else if k == n - 1 {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            (v[b] - v[a]) / (t[b] - t[a])
        })
        .collect()
}

/// Integrates `xdot = A F(x) + B (K(x) x + u_hat(t))` for both initial states.
#[allow(clippy::too_many_arguments)]
pub fn simulate_closed_loop_pair<U, W>(
    sys: &PolySystem,
    cert: &Certificate,
    x0: &DVector<f64>,
    x0_tilde: &DVector<f64>,
    u_hat: U,
    u_hat_tilde: W,
    horizon: f64,
    step: f64,
) -> Result<PairTrace, VerifyError>
where
    U: Fn(f64) -> DVector<f64>,
    W: Fn(f64) -> DVector<f64>,
{
    let n = sys.n();
    if cert.n() != n || cert.m() != sys.m() || x0.len() != n || x0_tilde.len() != n {
        return Err(VerifyError::Dimension(format!(
            "plant is {}x{}, certificate {}x{}, initial states {} and {}",
            n,
            sys.m(),
            cert.n(),
            cert.m(),
            x0.len(),
            x0_tilde.len()
        )));
    }
    let steps = step_count(horizon, step)?;
    let run = |start: &DVector<f64>, input: &dyn Fn(f64) -> DVector<f64>| {
        rk4(
            |t, x| {
                let k = cert.k.evaluate(x.as_slice()).expect("certificate arity checked");
                sys.vector_field(x, &(k * x + input(t)))
            },
            start,
            0.0,
            horizon / steps as f64,
            steps,
        )
    };
    let (times, x) = run(x0, &u_hat)?;
    let (_, x_tilde) = run(x0_tilde, &u_hat_tilde)?;
    let uh = times.iter().map(|&t| u_hat(t)).collect();
    let uht = times.iter().map(|&t| u_hat_tilde(t)).collect();
    Ok(PairTrace::from_states(cert, times, x, x_tilde, uh, uht))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallResult {
    pub pass: bool,
    /// Smallest `bound(t) - V(t)`; negative where the bound is violated.
    pub worst_margin: f64,
    pub worst_time: f64,
}

/// Checks `V(t) <= [V(0) e^{-eps t} + (rho/eps) sup|du|^2 (1 - e^{-eps t})] (1 + slack)`.
///
/// The input term is only used, and `rho_bound` only required, when the two
/// reference inputs differ somewhere on the trace.
pub fn gronwall_check(trace: &PairTrace, epsilon: f64, rho_bound: Option<f64>, slack: f64) -> Result<GronwallResult, VerifyError> {
    let gap = trace.input_gap();
    let input_term = if gap > 0.0 {
        let rho = rho_bound.ok_or(VerifyError::MissingRhoBound)?;
        rho / epsilon * gap * gap
    } else {
        0.0
    };
    let v0 = trace.v_series.first().copied().unwrap_or(0.0);
    let t0 = trace.times.first().copied().unwrap_or(0.0);
    let mut worst = (f64::INFINITY, t0);
    for (&t, &v) in trace.times.iter().zip(&trace.v_series) {
        let e = (-epsilon * (t - t0)).exp();
        let bound = (v0 * e + input_term * (1.0 - e)) * (1.0 + slack);
        let margin = bound - v;
        if margin < worst.0 || margin.is_nan() {
            worst = (margin, t);
        }
    }
    if trace.is_empty() {
        worst.0 = 0.0;
    }
    Ok(GronwallResult {
        pass: worst.0 >= 0.0,
        worst_margin: worst.0,
        worst_time: worst.1,
    })
}

/// Share of interior samples with `dV/dt <= -eps V + tol_num`.
pub fn decay_fraction(trace: &PairTrace, epsilon: f64, tol_num: f64) -> f64 {
    let n = trace.len();
    if n < 3 {
        return 1.0;
    }
    let ok = (1..n - 1)
        .filter(|&k| trace.lie_series[k] <= -epsilon * trace.v_series[k] + tol_num)
        .count();
    ok as f64 / (n - 2) as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub pair: usize,
    pub initial_norm: f64,
    pub terminal_norm: f64,
    /// `terminal_norm / initial_norm`, or 0 for a coincident pair.
    pub ratio: f64,
    /// First time after which `|x - x~|` never grows beyond the tolerance band.
    pub monotone_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub band: f64,
    pub entries: Vec<ConvergenceEntry>,
    pub worst_ratio: f64,
}

/// Relative growth allowed between consecutive samples before the series counts as increasing.
pub const MONOTONE_BAND: f64 = 1e-9;

pub fn convergence_report(traces: &[PairTrace]) -> ConvergenceReport {
    let entries: Vec<ConvergenceEntry> = traces
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            let s = &tr.diff_norm_series;
            let initial = s.first().copied().unwrap_or(0.0);
            let terminal = s.last().copied().unwrap_or(0.0);
            let mut after = tr.times.first().copied().unwrap_or(0.0);
            for k in (0..s.len().saturating_sub(1)).rev() {
                if s[k + 1] > s[k] * (1.0 + MONOTONE_BAND) + f64::MIN_POSITIVE {
                    after = tr.times[k + 1];
                    break;
                }
            }
            ConvergenceEntry {
                pair: i,
                initial_norm: initial,
                terminal_norm: terminal,
                ratio: if initial > 0.0 { terminal / initial } else { 0.0 },
                monotone_after: after,
            }
        })
        .collect();
    let worst_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    ConvergenceReport {
        band: MONOTONE_BAND,
        entries,
        worst_ratio,
    }
}
