//! Independent verification of a claimed assignment against the original problem.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::problem::{SdpProblem, VariableKind};
use super::solve::SdpSolution;
use super::SdpError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiResidual {
    pub label: String,
    pub max_eig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorResidual {
    pub variable: String,
    pub min_eig: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub tol: f64,
    pub equality_residuals: Vec<f64>,
    pub max_equality_residual: f64,
    pub lmi: Vec<LmiResidual>,
    pub floors: Vec<FloorResidual>,
    /// Largest deviation from symmetry among symmetric variables.
    pub symmetry_defect: f64,
    pub pass: bool,
}

impl ResidualReport {
    pub fn max_lmi_eig(&self) -> f64 {
        self.lmi.iter().map(|l| l.max_eig).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn entry(assign: &DMatrix<f64>, kind: &VariableKind, row: usize, col: usize) -> f64 {
    match kind {
        // Read the upper triangle so a lower-triangle reference agrees with the solver's view.
        VariableKind::Symmetric { .. } => assign[(row.min(col), row.max(col))],
        VariableKind::Free { .. } => assign[(row, col)],
    }
}

/// Recomputes every residual from the assignment alone.
pub fn check_solution(problem: &SdpProblem, solution: &SdpSolution, tol: f64) -> Result<ResidualReport, SdpError> {
    for v in &problem.variables {
        let m = solution
            .assignment
            .get(&v.name)
            .ok_or_else(|| SdpError::MissingAssignment(v.name.clone()))?;
        if m.shape() != v.kind.shape() {
            return Err(SdpError::DimensionMismatch(format!(
                "assignment {} has shape {:?}, declared {:?}",
                v.name,
                m.shape(),
                v.kind.shape()
            )));
        }
    }
    let lookup = |name: &str| {
        let v = problem.variable(name).unwrap();
        (&solution.assignment[name], &v.kind)
    };

    let equality_residuals: Vec<f64> = problem
        .equalities
        .iter()
        .map(|e| {
            let lhs: f64 = e
                .terms
                .iter()
                .map(|t| {
                    let (m, k) = lookup(&t.variable);
                    t.coefficient * entry(m, k, t.row, t.col)
                })
                .sum();
            (lhs - e.rhs).abs()
        })
        .collect();
    let max_equality_residual = equality_residuals.iter().cloned().fold(0.0, f64::max);

    let lmi: Vec<LmiResidual> = problem
        .lmi_blocks
        .iter()
        .map(|b| {
            let mut m = DMatrix::from_row_slice(b.dim, b.dim, &b.constant);
            for t in &b.terms {
                let (a, k) = lookup(&t.variable);
                let v = t.coefficient * entry(a, k, t.row, t.col);
                m[(t.block_row, t.block_col)] += v;
                if t.block_row != t.block_col {
                    m[(t.block_col, t.block_row)] += v;
                }
            }
            LmiResidual {
                label: b.label.clone(),
                max_eig: SymmetricEigen::new(m).eigenvalues.max(),
            }
        })
        .collect();

    let floors: Vec<FloorResidual> = problem
        .psd_floors
        .iter()
        .map(|f| {
            let m = &solution.assignment[&f.variable];
            let sym = (m + m.transpose()) * 0.5;
            FloorResidual {
                variable: f.variable.clone(),
                min_eig: SymmetricEigen::new(sym).eigenvalues.min(),
                margin: f.margin,
            }
        })
        .collect();

    let symmetry_defect = problem
        .variables
        .iter()
        .filter(|v| matches!(v.kind, VariableKind::Symmetric { .. }))
        .map(|v| {
            let m = &solution.assignment[&v.name];
            (m - m.transpose()).amax()
        })
        .fold(0.0, f64::max);

    let all_finite = equality_residuals.iter().all(|r| r.is_finite())
        && lmi.iter().all(|l| l.max_eig.is_finite())
        && floors.iter().all(|f| f.min_eig.is_finite());
    let pass = all_finite
        && max_equality_residual <= tol
        && lmi.iter().all(|l| l.max_eig <= tol)
        && floors.iter().all(|f| f.min_eig >= f.margin - tol)
        && symmetry_defect <= tol;

    Ok(ResidualReport {
        tol,
        equality_residuals,
        max_equality_residual,
        lmi,
        floors,
        symmetry_defect,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::sdp::{solve, LmiBlock, SolveOptions, SolveStatus, SolverStats, Triplet};

    fn scalar() -> SdpProblem {
        let mut p = SdpProblem::new();
        p.declare_symmetric("theta", 1).unwrap();
        p.declare_free("sigma", 1, 1).unwrap();
        p.add_equality(vec![Triplet::new("sigma", 0, 0, 1.0)], -1.0).unwrap();
        p.add_lmi(
            LmiBlock::new("decay", 1)
                .with_constant(&DMatrix::from_element(1, 1, 0.1))
                .term("sigma", 0, 0, 0, 0, 2.0)
                .term("theta", 0, 0, 0, 0, 0.5),
        )
        .unwrap();
        p.add_psd_floor("theta", 1e-6).unwrap();
        p
    }

    fn point(theta: f64, sigma: f64) -> SdpSolution {
        let mut assignment = BTreeMap::new();
        assignment.insert("theta".to_string(), DMatrix::from_element(1, 1, theta));
        assignment.insert("sigma".to_string(), DMatrix::from_element(1, 1, sigma));
        SdpSolution {
            assignment,
            status: SolveStatus::Feasible,
            stats: SolverStats {
                iterations: 0,
                margin: 0.0,
                gap_bound: 0.0,
                worst_block: None,
                worst_block_eig: 0.0,
                original_unknowns: 2,
                reduced_unknowns: 0,
                max_equality_residual: 0.0,
                message: String::new(),
            },
        }
    }

    #[test]
    fn hand_built_point_passes() {
        let r = check_solution(&scalar(), &point(1.0, -1.0), 1e-6).unwrap();
        assert!(r.pass);
        assert!((r.lmi[0].max_eig + 1.4).abs() < 1e-14);
        assert!((r.floors[0].min_eig - 1.0).abs() < 1e-14);
    }

    #[test]
    fn perturbed_point_fails_equality() {
        let r = check_solution(&scalar(), &point(1.0, -0.9), 1e-6).unwrap();
        assert!(!r.pass);
        assert!((r.max_equality_residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn solver_output_passes_at_ten_times_tol() {
        let opts = SolveOptions::default();
        let sol = solve(&scalar(), &opts).unwrap();
        let r = check_solution(&scalar(), &sol, 10.0 * opts.tol_feas).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn missing_assignment() {
        let mut s = point(1.0, -1.0);
        s.assignment.remove("sigma");
        assert!(matches!(check_solution(&scalar(), &s, 1e-6), Err(SdpError::MissingAssignment(_))));
    }

    #[test]
    fn report_serializes() {
        let r = check_solution(&scalar(), &point(1.0, -1.0), 1e-6).unwrap();
        let back: ResidualReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
