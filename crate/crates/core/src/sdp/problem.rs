use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::SdpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum VariableKind {
    /// `dim x dim` symmetric; only the upper triangle is unknown.
    Symmetric { dim: usize },
    Free { rows: usize, cols: usize },
}

impl VariableKind {
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            VariableKind::Symmetric { dim } => (dim, dim),
            VariableKind::Free { rows, cols } => (rows, cols),
        }
    }

    pub fn unknowns(&self) -> usize {
        match *self {
            VariableKind::Symmetric { dim } => dim * (dim + 1) / 2,
            VariableKind::Free { rows, cols } => rows * cols,
        }
    }

    /// Offset of entry `(row, col)` within this variable's unknowns.
    pub fn local_index(&self, row: usize, col: usize) -> usize {
        match *self {
            VariableKind::Symmetric { dim } => {
                let (i, j) = if row <= col { (row, col) } else { (col, row) };
                i * (2 * dim + 1 - i) / 2 + (j - i)
            }
            VariableKind::Free { cols, .. } => row * cols + col,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(flatten)]
    pub kind: VariableKind,
}

/// `coefficient * variable[row, col]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub variable: String,
    pub row: usize,
    pub col: usize,
    pub coefficient: f64,
}

impl Triplet {
    pub fn new(variable: &str, row: usize, col: usize, coefficient: f64) -> Self {
        Triplet {
            variable: variable.to_string(),
            row,
            col,
            coefficient,
        }
    }
}

/// `sum(terms) = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearEquality {
    pub terms: Vec<Triplet>,
    pub rhs: f64,
}

/// Places `coefficient * variable[row, col]` at `(block_row, block_col)` and its mirror.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiTerm {
    pub variable: String,
    pub row: usize,
    pub col: usize,
    pub block_row: usize,
    pub block_col: usize,
    pub coefficient: f64,
}

/// Affine symmetric matrix expression required to be negative semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiBlock {
    pub label: String,
    pub dim: usize,
    /// Row-major `dim x dim` symmetric constant.
    pub constant: Vec<f64>,
    pub terms: Vec<LmiTerm>,
}

impl LmiBlock {
    pub fn new(label: &str, dim: usize) -> Self {
        LmiBlock {
            label: label.to_string(),
            dim,
            constant: vec![0.0; dim * dim],
            terms: Vec::new(),
        }
    }

    pub fn with_constant(mut self, c: &DMatrix<f64>) -> Self {
        self.constant = crate::polyalg::row_major(c);
        self
    }

    pub fn term(mut self, variable: &str, row: usize, col: usize, block_row: usize, block_col: usize, coefficient: f64) -> Self {
        self.terms.push(LmiTerm {
            variable: variable.to_string(),
            row,
            col,
            block_row,
            block_col,
            coefficient,
        });
        self
    }

    pub fn constant_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.constant)
    }
}

/// `variable - margin * I` must be positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdFloor {
    pub variable: String,
    pub margin: f64,
}

/// Semidefinite feasibility problem over named matrix variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub variables: Vec<Variable>,
    pub equalities: Vec<LinearEquality>,
    pub lmi_blocks: Vec<LmiBlock>,
    pub psd_floors: Vec<PsdFloor>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_symmetric(&mut self, name: &str, dim: usize) -> Result<(), SdpError> {
        self.declare(name, VariableKind::Symmetric { dim })
    }

    pub fn declare_free(&mut self, name: &str, rows: usize, cols: usize) -> Result<(), SdpError> {
        self.declare(name, VariableKind::Free { rows, cols })
    }

    fn declare(&mut self, name: &str, kind: VariableKind) -> Result<(), SdpError> {
        if self.variables.iter().any(|v| v.name == name) {
            return Err(SdpError::DuplicateName(name.to_string()));
        }
        if kind.unknowns() == 0 {
            return Err(SdpError::DimensionMismatch(format!("variable {name} has no entries")));
        }
        self.variables.push(Variable {
            name: name.to_string(),
            kind,
        });
        Ok(())
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    fn check_entry(&self, name: &str, row: usize, col: usize) -> Result<&Variable, SdpError> {
        let v = self
            .variable(name)
            .ok_or_else(|| SdpError::UndeclaredVariable(name.to_string()))?;
        let (r, c) = v.kind.shape();
        if row >= r || col >= c {
            return Err(SdpError::DimensionMismatch(format!(
                "entry ({row}, {col}) outside {name} of shape {r}x{c}"
            )));
        }
        Ok(v)
    }

    pub fn add_equality(&mut self, terms: Vec<Triplet>, rhs: f64) -> Result<(), SdpError> {
        for t in &terms {
            self.check_entry(&t.variable, t.row, t.col)?;
        }
        self.equalities.push(LinearEquality { terms, rhs });
        Ok(())
    }

    pub fn add_lmi(&mut self, block: LmiBlock) -> Result<(), SdpError> {
        if block.dim == 0 || block.constant.len() != block.dim * block.dim {
            return Err(SdpError::DimensionMismatch(format!(
                "LMI {} declares dim {} but carries {} constant entries",
                block.label,
                block.dim,
                block.constant.len()
            )));
        }
        let c = block.constant_matrix();
        if (&c - c.transpose()).amax() > 0.0 {
            return Err(SdpError::DimensionMismatch(format!("LMI {} constant is not symmetric", block.label)));
        }
        for t in &block.terms {
            self.check_entry(&t.variable, t.row, t.col)?;
            if t.block_row >= block.dim || t.block_col >= block.dim {
                return Err(SdpError::DimensionMismatch(format!(
                    "LMI {} term at ({}, {}) outside dim {}",
                    block.label, t.block_row, t.block_col, block.dim
                )));
            }
        }
        self.lmi_blocks.push(block);
        Ok(())
    }

    pub fn add_psd_floor(&mut self, name: &str, margin: f64) -> Result<(), SdpError> {
        let v = self
            .variable(name)
            .ok_or_else(|| SdpError::UndeclaredVariable(name.to_string()))?;
        if !matches!(v.kind, VariableKind::Symmetric { .. }) {
            return Err(SdpError::DimensionMismatch(format!("PSD floor on non-symmetric variable {name}")));
        }
        if !(margin >= 0.0) {
            return Err(SdpError::DimensionMismatch(format!("PSD floor margin must be >= 0, got {margin}")));
        }
        self.psd_floors.push(PsdFloor {
            variable: name.to_string(),
            margin,
        });
        Ok(())
    }

    /// Global unknown offsets per variable, in declaration order.
    pub(crate) fn layout(&self) -> Layout {
        let mut offsets = BTreeMap::new();
        let mut total = 0;
        for (i, v) in self.variables.iter().enumerate() {
            offsets.insert(v.name.clone(), (i, total));
            total += v.kind.unknowns();
        }
        Layout { offsets, total }
    }

    pub fn num_unknowns(&self) -> usize {
        self.variables.iter().map(|v| v.kind.unknowns()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SdpError> {
        let p: SdpProblem = serde_json::from_str(s)?;
        // Re-run builder validation on everything that was read.
        let mut checked = SdpProblem::new();
        for v in &p.variables {
            checked.declare(&v.name, v.kind)?;
        }
        for e in p.equalities {
            checked.add_equality(e.terms, e.rhs)?;
        }
        for b in p.lmi_blocks {
            checked.add_lmi(b)?;
        }
        for f in p.psd_floors {
            checked.add_psd_floor(&f.variable, f.margin)?;
        }
        Ok(checked)
    }
}

pub(crate) struct Layout {
    offsets: BTreeMap<String, (usize, usize)>,
    pub total: usize,
}

impl Layout {
    pub fn index(&self, problem: &SdpProblem, name: &str, row: usize, col: usize) -> usize {
        let (vi, off) = self.offsets[name];
        off + problem.variables[vi].kind.local_index(row, col)
    }

    pub fn offset(&self, name: &str) -> usize {
        self.offsets[name].1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_index_is_upper_triangle_row_major() {
        let k = VariableKind::Symmetric { dim: 3 };
        let got: Vec<usize> = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
            .iter()
            .map(|&(i, j)| k.local_index(i, j))
            .collect();
        assert_eq!(got, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(k.local_index(2, 1), 4);
        assert_eq!(k.unknowns(), 6);
        let k4 = VariableKind::Symmetric { dim: 4 };
        let mut all: Vec<usize> = (0..4).flat_map(|i| (i..4).map(move |j| (i, j))).map(|(i, j)| k4.local_index(i, j)).collect();
        all.dedup();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn builder_accepts_well_formed_problem() {
        let mut p = SdpProblem::new();
        p.declare_symmetric("Theta", 3).unwrap();
        p.add_psd_floor("Theta", 1e-6).unwrap();
        assert_eq!(p.psd_floors.len(), 1);
        assert_eq!(p.num_unknowns(), 6);
    }

    #[test]
    fn builder_errors() {
        let mut p = SdpProblem::new();
        p.declare_symmetric("Theta", 2).unwrap();
        assert!(matches!(p.declare_free("Theta", 1, 1), Err(SdpError::DuplicateName(_))));
        assert!(matches!(
            p.add_equality(vec![Triplet::new("Sigma", 0, 0, 1.0)], 0.0),
            Err(SdpError::UndeclaredVariable(_))
        ));
        let odd = LmiBlock {
            label: "odd".into(),
            dim: 3,
            constant: vec![0.0; 4],
            terms: vec![],
        };
        assert!(matches!(p.add_lmi(odd), Err(SdpError::DimensionMismatch(_))));
        let outside = LmiBlock::new("outside", 2).term("Theta", 0, 0, 2, 0, 1.0);
        assert!(matches!(p.add_lmi(outside), Err(SdpError::DimensionMismatch(_))));
        assert!(matches!(
            p.add_equality(vec![Triplet::new("Theta", 2, 0, 1.0)], 0.0),
            Err(SdpError::DimensionMismatch(_))
        ));
        p.declare_free("S", 2, 2).unwrap();
        assert!(p.add_psd_floor("S", 0.0).is_err());
    }

    #[test]
    fn json_round_trip_revalidates() {
        let mut p = SdpProblem::new();
        p.declare_symmetric("t", 1).unwrap();
        p.declare_free("s", 1, 1).unwrap();
        p.add_equality(vec![Triplet::new("s", 0, 0, 1.0)], -1.0).unwrap();
        p.add_lmi(
            LmiBlock::new("decay", 1)
                .with_constant(&DMatrix::from_element(1, 1, 0.1))
                .term("s", 0, 0, 0, 0, 2.0)
                .term("t", 0, 0, 0, 0, 0.5),
        )
        .unwrap();
        p.add_psd_floor("t", 1e-6).unwrap();
        let back = SdpProblem::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
        let broken = p.to_json().replace("\"variable\": \"s\"", "\"variable\": \"nope\"");
        assert!(SdpProblem::from_json(&broken).is_err());
    }
}
