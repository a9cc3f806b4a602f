use nalgebra::{DMatrix, DVector};

use super::PlantError;
use crate::polyalg::MonomialDictionary;

/// Input-affine polynomial plant `xdot = A F(x) + B u`.
///
/// Used as a ground-truth oracle for data generation and closed-loop
/// verification. Synthesis never sees it.
#[derive(Debug, Clone)]
pub struct PolySystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    dict: MonomialDictionary,
}

impl PolySystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, dict: MonomialDictionary) -> Result<Self, PlantError> {
        let n = dict.nvars();
        if a.nrows() != n || a.ncols() != dict.len() {
            return Err(PlantError::Shape {
                what: "A",
                expected: (n, dict.len()),
                found: a.shape(),
            });
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(PlantError::Shape {
                what: "B",
                expected: (n, b.ncols().max(1)),
                found: b.shape(),
            });
        }
        Ok(PolySystem { a, b, dict })
    }

    /// Rigid spacecraft angular velocity dynamics with principal inertias `j`.
    pub fn spacecraft(j1: f64, j2: f64, j3: f64) -> Self {
        let dict = MonomialDictionary::from_exponents(
            3,
            vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]],
        )
        .expect("static dictionary");
        // Canonical order is [x1x2, x1x3, x2x3]; place each inertia term accordingly.
        let idx_x2x3 = dict.index_of(&crate::polyalg::Monomial::new(vec![0, 1, 1])).unwrap();
        let idx_x1x3 = dict.index_of(&crate::polyalg::Monomial::new(vec![1, 0, 1])).unwrap();
        let idx_x1x2 = dict.index_of(&crate::polyalg::Monomial::new(vec![1, 1, 0])).unwrap();
        let mut a = DMatrix::zeros(3, 3);
        a[(0, idx_x2x3)] = (j2 - j3) / j1;
        a[(1, idx_x1x3)] = (j3 - j1) / j2;
        a[(2, idx_x1x2)] = (j1 - j2) / j3;
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / j1, 1.0 / j2, 1.0 / j3]));
        PolySystem::new(a, b, dict).expect("consistent shapes")
    }

    /// The case-study spacecraft with inertias 200, 200, 300.
    pub fn builtin_spacecraft() -> Self {
        Self::spacecraft(200.0, 200.0, 300.0)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn dictionary(&self) -> &MonomialDictionary {
        &self.dict
    }

    pub fn n(&self) -> usize {
        self.dict.nvars()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let f = self.dict.evaluate(x.as_slice()).expect("state dimension checked by caller");
        &self.a * f
    }

    pub fn vector_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.drift(x) + &self.b * u
    }

    /// Re-expresses `A` over a larger dictionary that contains the true one.
    pub fn a_over(&self, dict: &MonomialDictionary) -> Result<DMatrix<f64>, PlantError> {
        let mut out = DMatrix::zeros(self.n(), dict.len());
        for (k, m) in self.dict.entries().iter().enumerate() {
            let j = dict
                .index_of(m)
                .ok_or_else(|| PlantError::MissingMonomial(m.to_string()))?;
            out.set_column(j, &self.a.column(k));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacecraft_matrices() {
        let s = PolySystem::builtin_spacecraft();
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let f = s.drift(&x);
        // (J2-J3)/J1 x2x3 = -0.5*6, (J3-J1)/J2 x1x3 = 0.5*3, 0
        assert!((f[0] + 3.0).abs() < 1e-15);
        assert!((f[1] - 1.5).abs() < 1e-15);
        assert_eq!(f[2], 0.0);
        let diag: Vec<f64> = s.b().diagonal().iter().copied().collect();
        assert_eq!(diag, vec![0.005, 0.005, 1.0 / 300.0]);
        let mut coeffs: Vec<f64> = s.a().iter().copied().filter(|v| *v != 0.0).collect();
        coeffs.sort_by(f64::total_cmp);
        assert_eq!(coeffs, vec![-0.5, 0.5]);
    }

    #[test]
    fn shape_validation() {
        let d = MonomialDictionary::enumerate(2, 1, 1).unwrap();
        assert!(PolySystem::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 1), d.clone()).is_err());
        assert!(PolySystem::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 1), d).is_err());
    }

    #[test]
    fn embedding_into_exaggerated_dictionary() {
        let s = PolySystem::builtin_spacecraft();
        let big = MonomialDictionary::enumerate(3, 1, 2).unwrap();
        let a = s.a_over(&big).unwrap();
        let x = [0.3, -1.2, 2.0];
        let lhs = &a * big.evaluate(&x).unwrap();
        let rhs = s.drift(&DVector::from_row_slice(&x));
        assert!((lhs - rhs).amax() < 1e-15);
        let small = MonomialDictionary::enumerate(3, 1, 1).unwrap();
        assert!(s.a_over(&small).is_err());
    }
}
