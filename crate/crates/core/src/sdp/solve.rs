//! Margin-maximizing log-barrier method on the reduced problem.
//!
//! maximize t  s.t.  B_i(w) + t I <= 0,  t <= margin_cap,  |w_j| <= variable_bound.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::presolve::{presolve_eliminate, ReducedBlock, ReducedProblem};
use super::problem::{SdpProblem, VariableKind};
use super::SdpError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Cap on Newton steps over all barrier stages.
    pub max_iter: usize,
    pub tol_feas: f64,
    /// Stop once the barrier bound on `t* - t` falls below this.
    pub tol_gap: f64,
    pub margin_cap: f64,
    pub variable_bound: f64,
    pub rank_tol: f64,
    pub consistency_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 2000,
            tol_feas: 1e-8,
            tol_gap: 1e-9,
            margin_cap: 1.0,
            variable_bound: 1e6,
            rank_tol: 1e-11,
            consistency_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    /// Best achieved `t`; positive means strictly feasible.
    pub margin: f64,
    pub gap_bound: f64,
    pub worst_block: Option<String>,
    pub worst_block_eig: f64,
    pub original_unknowns: usize,
    pub reduced_unknowns: usize,
    pub max_equality_residual: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub assignment: BTreeMap<String, DMatrix<f64>>,
    pub status: SolveStatus,
    pub stats: SolverStats,
}

#[derive(Serialize, Deserialize)]
struct SerialMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SerialSolution {
    assignment: BTreeMap<String, SerialMatrix>,
    status: SolveStatus,
    stats: SolverStats,
}

impl SdpSolution {
    pub fn to_json(&self) -> String {
        let s = SerialSolution {
            assignment: self
                .assignment
                .iter()
                .map(|(k, m)| {
                    (
                        k.clone(),
                        SerialMatrix {
                            rows: m.nrows(),
                            cols: m.ncols(),
                            data: crate::polyalg::row_major(m),
                        },
                    )
                })
                .collect(),
            status: self.status,
            stats: self.stats.clone(),
        };
        serde_json::to_string_pretty(&s).expect("solution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SdpError> {
        let s: SerialSolution = serde_json::from_str(text)?;
        let mut assignment = BTreeMap::new();
        for (k, m) in s.assignment {
            if m.data.len() != m.rows * m.cols {
                return Err(SdpError::DimensionMismatch(format!("assignment {k} has wrong entry count")));
            }
            assignment.insert(k, DMatrix::from_row_slice(m.rows, m.cols, &m.data));
        }
        Ok(SdpSolution {
            assignment,
            status: s.status,
            stats: s.stats,
        })
    }
}

struct Barrier<'a> {
    blocks: &'a [ReducedBlock],
    k: usize,
    cap: f64,
    bound: f64,
}

struct Local {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Barrier<'_> {
    /// Slack matrices `-(B_i(w) + t I)`.
    fn slacks(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let w = y.rows(0, self.k).into_owned();
        let t = y[self.k];
        self.blocks
            .iter()
            .map(|b| {
                let d = b.constant.nrows();
                -(b.eval(&w) + DMatrix::identity(d, d) * t)
            })
            .collect()
    }

    fn interior(&self, y: &DVector<f64>) -> Option<Vec<Cholesky<f64, Dyn>>> {
        let t = y[self.k];
        if !(t < self.cap) || y.rows(0, self.k).iter().any(|v| !(v.abs() < self.bound)) {
            return None;
        }
        self.slacks(y).into_iter().map(Cholesky::new).collect()
    }

    fn phi(&self, y: &DVector<f64>, chols: &[Cholesky<f64, Dyn>]) -> f64 {
        let mut v = -(self.cap - y[self.k]).ln();
        for j in 0..self.k {
            v -= (self.bound - y[j]).ln() + (self.bound + y[j]).ln();
        }
        for c in chols {
            v -= 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        v
    }

    fn local(&self, y: &DVector<f64>, chols: &[Cholesky<f64, Dyn>]) -> Local {
        let k = self.k;
        let mut grad = DVector::zeros(k + 1);
        let mut hess = DMatrix::zeros(k + 1, k + 1);
        let gap = self.cap - y[k];
        grad[k] += 1.0 / gap;
        hess[(k, k)] += 1.0 / (gap * gap);
        for j in 0..k {
            let (a, b) = (self.bound - y[j], self.bound + y[j]);
            grad[j] += 1.0 / a - 1.0 / b;
            hess[(j, j)] += 1.0 / (a * a) + 1.0 / (b * b);
        }
        for (blk, c) in self.blocks.iter().zip(chols) {
            let s_inv = c.inverse();
            // dS/dw_j = -A_j, dS/dt = -I; grad = tr(S^-1 A), hess = tr(S^-1 A S^-1 A').
            let mut m: Vec<DMatrix<f64>> = blk.coefficients.iter().map(|a| &s_inv * a).collect();
            m.push(s_inv.clone());
            for i in 0..=k {
                grad[i] += m[i].trace();
                for j in 0..=i {
                    let h = m[i].component_mul(&m[j].transpose()).sum();
                    hess[(i, j)] += h;
                    if i != j {
                        hess[(j, i)] += h;
                    }
                }
            }
        }
        Local {
            value: self.phi(y, chols),
            grad,
            hess,
        }
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let n = hess.nrows();
    let scale = hess.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let h = hess + DMatrix::identity(n, n) * (reg * scale);
        if let Some(ch) = Cholesky::new(h) {
            let d = -ch.solve(grad);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    None
}

struct Outcome {
    w: DVector<f64>,
    t: f64,
    iterations: usize,
    gap_bound: f64,
    converged: bool,
    message: String,
}

fn maximize_margin(red: &ReducedProblem, opts: &SolveOptions) -> Outcome {
    let k = red.dim;
    let bar = Barrier {
        blocks: &red.blocks,
        k,
        cap: opts.margin_cap,
        bound: opts.variable_bound,
    };
    let worst0 = red
        .blocks
        .iter()
        .map(|b| SymmetricEigen::new(b.constant.clone()).eigenvalues.max())
        .fold(f64::NEG_INFINITY, f64::max);
    let t0 = if worst0.is_finite() {
        (-worst0 - 1.0).min(opts.margin_cap - 1.0)
    } else {
        opts.margin_cap - 1.0
    };
    let mut y = DVector::zeros(k + 1);
    y[k] = t0;

    let nu = red.blocks.iter().map(|b| b.constant.nrows()).sum::<usize>() as f64 + 1.0 + 2.0 * k as f64;
    let mut s = 1.0 / (1.0 + t0.abs());
    let mut iterations = 0;
    let mut message = String::from("converged");
    let mut converged = false;

    'outer: loop {
        for _ in 0..200 {
            if iterations >= opts.max_iter {
                message = format!("iteration limit {} reached", opts.max_iter);
                break 'outer;
            }
            let Some(chols) = bar.interior(&y) else {
                message = "left the interior".into();
                break 'outer;
            };
            let loc = bar.local(&y, &chols);
            let mut grad = loc.grad;
            grad[k] -= s;
            let Some(dir) = newton_direction(&loc.hess, &grad) else {
                message = "singular Newton system".into();
                break 'outer;
            };
            iterations += 1;
            let decrement = -grad.dot(&dir);
            if decrement < 1e-10 {
                break;
            }
            let f0 = -s * y[k] + loc.value;
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let cand = &y + &dir * alpha;
                if let Some(c) = bar.interior(&cand) {
                    let f1 = -s * cand[k] + bar.phi(&cand, &c);
                    if f1 <= f0 - 0.25 * alpha * decrement {
                        y = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                // Line search stalls only at the numerical floor; accept the stage.
                break;
            }
        }
        let gap = nu / s;
        if gap < opts.tol_gap {
            converged = true;
            break;
        }
        s *= 8.0;
    }

    Outcome {
        w: y.rows(0, k).into_owned(),
        t: y[k],
        iterations,
        gap_bound: nu / s,
        converged,
        message,
    }
}

fn assemble_assignment(problem: &SdpProblem, z: &DVector<f64>) -> BTreeMap<String, DMatrix<f64>> {
    let mut out = BTreeMap::new();
    let mut off = 0;
    for v in &problem.variables {
        let (r, c) = v.kind.shape();
        let m = match v.kind {
            VariableKind::Symmetric { .. } => DMatrix::from_fn(r, c, |i, j| z[off + v.kind.local_index(i, j)]),
            VariableKind::Free { .. } => DMatrix::from_fn(r, c, |i, j| z[off + i * c + j]),
        };
        off += v.kind.unknowns();
        out.insert(v.name.clone(), m);
    }
    out
}

fn equality_residual(problem: &SdpProblem, z: &DVector<f64>) -> f64 {
    let layout = problem.layout();
    problem
        .equalities
        .iter()
        .map(|e| {
            let lhs: f64 = e.terms.iter().map(|t| t.coefficient * z[layout.index(problem, &t.variable, t.row, t.col)]).sum();
            (lhs - e.rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Eliminates equalities, maximizes the LMI margin and maps the result back.
pub fn solve(problem: &SdpProblem, opts: &SolveOptions) -> Result<SdpSolution, SdpError> {
    let red = presolve_eliminate(problem, opts.rank_tol, opts.consistency_tol)?;
    let out = maximize_margin(&red, opts);
    let z = red.recovery.recover(&out.w, None);
    let max_eq = equality_residual(problem, &z);

    let (worst_block, worst_eig) = red
        .blocks
        .iter()
        .map(|b| (b.label.clone(), SymmetricEigen::new(b.eval(&out.w)).eigenvalues.max()))
        .fold((None, f64::NEG_INFINITY), |acc, (l, e)| if e > acc.1 { (Some(l), e) } else { acc });

    let finite = z.iter().all(|v| v.is_finite()) && out.t.is_finite();
    let status = if !finite {
        SolveStatus::NumericalFailure
    } else if out.t > 0.0 {
        if max_eq <= opts.tol_feas.max(opts.consistency_tol * 10.0) {
            SolveStatus::Feasible
        } else {
            SolveStatus::NumericalFailure
        }
    } else if out.converged || out.t + out.gap_bound < 0.0 {
        SolveStatus::Infeasible
    } else {
        SolveStatus::NumericalFailure
    };

    Ok(SdpSolution {
        assignment: assemble_assignment(problem, &z),
        status,
        stats: SolverStats {
            iterations: out.iterations,
            margin: out.t,
            gap_bound: out.gap_bound,
            worst_block,
            worst_block_eig: worst_eig,
            original_unknowns: red.original_unknowns,
            reduced_unknowns: red.reduced_unknowns(),
            max_equality_residual: max_eq,
            message: out.message,
        },
    })
}
