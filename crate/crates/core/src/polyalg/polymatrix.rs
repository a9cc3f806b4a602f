use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Monomial, MonomialDictionary, PolyError};

/// Matrix-valued polynomial `sum_alpha C_alpha x^alpha` with dense coefficients.
///
/// Canonical form: every stored coefficient matrix has the declared shape and
/// at least one nonzero entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix {
    nvars: usize,
    rows: usize,
    cols: usize,
    terms: BTreeMap<Monomial, DMatrix<f64>>,
}

impl PolyMatrix {
    pub fn zeros(nvars: usize, rows: usize, cols: usize) -> Self {
        PolyMatrix {
            nvars,
            rows,
            cols,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, m: DMatrix<f64>) -> Self {
        let mut p = PolyMatrix::zeros(nvars, m.nrows(), m.ncols());
        p.insert_canonical(Monomial::constant(nvars), m);
        p
    }

    /// The column vector `x = (x_1, ..., x_n)`.
    pub fn state_vector(n: usize) -> Self {
        let mut p = PolyMatrix::zeros(n, n, 1);
        for i in 0..n {
            let mut c = DMatrix::zeros(n, 1);
            c[(i, 0)] = 1.0;
            p.terms.insert(Monomial::variable(n, i), c);
        }
        p
    }

    /// The column vector `F(x)` of a dictionary.
    pub fn dictionary_vector(dict: &MonomialDictionary) -> Self {
        let n = dict.nvars();
        let mut p = PolyMatrix::zeros(n, dict.len(), 1);
        for (k, m) in dict.entries().iter().enumerate() {
            let mut c = DMatrix::zeros(dict.len(), 1);
            c[(k, 0)] = 1.0;
            p.terms.insert(m.clone(), c);
        }
        p
    }

    pub fn from_terms<I>(nvars: usize, rows: usize, cols: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Monomial, DMatrix<f64>)>,
    {
        let mut p = PolyMatrix::zeros(nvars, rows, cols);
        for (m, c) in terms {
            p.add_term(m, &c)?;
        }
        Ok(p)
    }

    /// Adds `c * m` to the polynomial, collecting like terms.
    pub fn add_term(&mut self, m: Monomial, c: &DMatrix<f64>) -> Result<(), PolyError> {
        if m.nvars() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                context: "term variable count",
                expected: self.nvars,
                found: m.nvars(),
            });
        }
        if c.shape() != (self.rows, self.cols) {
            return Err(PolyError::ShapeMismatch {
                context: "term coefficient",
                expected: (self.rows, self.cols),
                found: c.shape(),
            });
        }
        let merged = match self.terms.remove(&m) {
            Some(existing) => existing + c,
            None => c.clone(),
        };
        self.insert_canonical(m, merged);
        Ok(())
    }

    fn insert_canonical(&mut self, m: Monomial, c: DMatrix<f64>) {
        if c.iter().any(|&v| v != 0.0) {
            self.terms.insert(m, c);
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &DMatrix<f64>)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Option<&DMatrix<f64>> {
        self.terms.get(m)
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<DMatrix<f64>, PolyError> {
        if point.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                context: "evaluation point",
                expected: self.nvars,
                found: point.len(),
            });
        }
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (m, c) in &self.terms {
            out += c * m.eval(point);
        }
        Ok(out)
    }

    /// Exact product `self * other`; term degrees add.
    pub fn multiply(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::DimensionMismatch {
                context: "product variable count",
                expected: self.nvars,
                found: other.nvars,
            });
        }
        if self.cols != other.rows {
            return Err(PolyError::DimensionMismatch {
                context: "product inner dimension",
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut acc: BTreeMap<Monomial, DMatrix<f64>> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let prod = ca * cb;
                acc.entry(ma.mul(mb))
                    .and_modify(|e| *e += &prod)
                    .or_insert(prod);
            }
        }
        let mut out = PolyMatrix::zeros(self.nvars, self.rows, other.cols);
        for (m, c) in acc {
            out.insert_canonical(m, c);
        }
        Ok(out)
    }

    /// `m * self` for a constant matrix `m`.
    pub fn left_mul(&self, m: &DMatrix<f64>) -> Result<PolyMatrix, PolyError> {
        PolyMatrix::constant(self.nvars, m.clone()).multiply(self)
    }

    /// `self * m` for a constant matrix `m`.
    pub fn right_mul(&self, m: &DMatrix<f64>) -> Result<PolyMatrix, PolyError> {
        self.multiply(&PolyMatrix::constant(self.nvars, m.clone()))
    }

    pub fn add(&self, other: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c)?;
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &PolyMatrix) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::DimensionMismatch {
                context: "variable count",
                expected: self.nvars,
                found: other.nvars,
            });
        }
        if self.shape() != other.shape() {
            return Err(PolyError::ShapeMismatch {
                context: "polynomial matrix",
                expected: self.shape(),
                found: other.shape(),
            });
        }
        Ok(())
    }

    pub fn to_serial(&self) -> PolyMatrixSerial {
        PolyMatrixSerial {
            nvars: self.nvars,
            rows: self.rows,
            cols: self.cols,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| SerialTerm {
                    exponents: m.exponents().to_vec(),
                    coefficients: row_major(c),
                })
                .collect(),
        }
    }

    pub fn from_serial(s: &PolyMatrixSerial) -> Result<Self, PolyError> {
        let mut p = PolyMatrix::zeros(s.nvars, s.rows, s.cols);
        for t in &s.terms {
            if t.coefficients.len() != s.rows * s.cols {
                return Err(PolyError::ShapeMismatch {
                    context: "serialized coefficient",
                    expected: (s.rows, s.cols),
                    found: (t.coefficients.len(), 1),
                });
            }
            let c = DMatrix::from_row_slice(s.rows, s.cols, &t.coefficients);
            p.add_term(Monomial::new(t.exponents.clone()), &c)?;
        }
        Ok(p)
    }
}

/// Maximum absolute coefficient difference over the union of both term sets.
pub fn poly_residual(a: &PolyMatrix, b: &PolyMatrix) -> Result<f64, PolyError> {
    a.check_same_shape(b)?;
    let mut worst = 0.0f64;
    for (m, ca) in &a.terms {
        let d = match b.terms.get(m) {
            Some(cb) => (ca - cb).amax(),
            None => ca.amax(),
        };
        worst = worst.max(d);
    }
    for (m, cb) in &b.terms {
        if !a.terms.contains_key(m) {
            worst = worst.max(cb.amax());
        }
    }
    Ok(worst)
}

pub fn poly_multiply(a: &PolyMatrix, b: &PolyMatrix) -> Result<PolyMatrix, PolyError> {
    a.multiply(b)
}

/// Transformation matrix `aleph(x)` with `F(x) = aleph(x) x`.
///
/// Each dictionary row factors out its lowest-index variable with a positive
/// exponent; the quotient monomial lands in that variable's column.
pub fn factorize_dictionary(dict: &MonomialDictionary) -> Result<PolyMatrix, PolyError> {
    let n = dict.nvars();
    let rows = dict.len();
    let mut aleph = PolyMatrix::zeros(n, rows, n);
    for (k, m) in dict.entries().iter().enumerate() {
        let var = m.leading_variable().ok_or(PolyError::ZeroDegreeEntry { index: k })?;
        let mut q = m.exponents().to_vec();
        q[var] -= 1;
        let mut c = DMatrix::zeros(rows, n);
        c[(k, var)] = 1.0;
        aleph.add_term(Monomial::new(q), &c)?;
    }
    Ok(aleph)
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerialTerm {
    pub exponents: Vec<u32>,
    pub coefficients: Vec<f64>,
}

/// JSON form of a [`PolyMatrix`]: row-major coefficient blocks per monomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyMatrixSerial {
    pub nvars: usize,
    pub rows: usize,
    pub cols: usize,
    pub terms: Vec<SerialTerm>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spacecraft_dict() -> MonomialDictionary {
        MonomialDictionary::from_exponents(
            3,
            vec![
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![0, 0, 1],
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_factorization_for_single_variable() {
        let d = MonomialDictionary::enumerate(1, 1, 1).unwrap();
        let a = factorize_dictionary(&d).unwrap();
        assert_eq!(a.num_terms(), 1);
        assert_eq!(a.coefficient(&Monomial::constant(1)).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn bilinear_factorization() {
        let d = MonomialDictionary::from_exponents(2, vec![vec![1, 1]]).unwrap();
        let a = factorize_dictionary(&d).unwrap();
        // aleph = [x2 0]
        let c = a.coefficient(&Monomial::new(vec![0, 1])).unwrap();
        assert_eq!(c, &DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
        let fx = a.multiply(&PolyMatrix::state_vector(2)).unwrap();
        assert_eq!(poly_residual(&fx, &PolyMatrix::dictionary_vector(&d)).unwrap(), 0.0);
    }

    #[test]
    fn spacecraft_factorization_structure() {
        let d = spacecraft_dict();
        let a = factorize_dictionary(&d).unwrap();
        let eye = a.coefficient(&Monomial::constant(3)).unwrap();
        assert_eq!(eye.rows(0, 3).into_owned(), DMatrix::identity(3, 3));
        // x1^2, x1x2, x1x3 factor by x1; x2x3 factors by x2 leaving x3.
        let x1 = a.coefficient(&Monomial::variable(3, 0)).unwrap();
        assert_eq!(x1[(3, 0)], 1.0);
        let x2 = a.coefficient(&Monomial::variable(3, 1)).unwrap();
        assert_eq!(x2[(4, 0)], 1.0);
        let x3 = a.coefficient(&Monomial::variable(3, 2)).unwrap();
        assert_eq!(x3[(5, 0)], 1.0);
        assert_eq!(x3[(6, 1)], 1.0);
        let fx = a.multiply(&PolyMatrix::state_vector(3)).unwrap();
        assert_eq!(poly_residual(&fx, &PolyMatrix::dictionary_vector(&d)).unwrap(), 0.0);
    }

    #[test]
    fn each_aleph_row_has_exactly_one_nonzero() {
        let d = MonomialDictionary::enumerate(3, 1, 3).unwrap();
        let a = factorize_dictionary(&d).unwrap();
        for k in 0..d.len() {
            let nz: usize = a
                .terms()
                .map(|(_, c)| c.row(k).iter().filter(|&&v| v != 0.0).count())
                .sum();
            assert_eq!(nz, 1, "row {k}");
        }
    }

    #[test]
    fn aleph_times_constant_keeps_term_set() {
        let d = spacecraft_dict();
        let a = factorize_dictionary(&d).unwrap();
        let theta = DMatrix::from_row_slice(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.3, 0.0, 0.3, 4.0]);
        let p = a.right_mul(&theta).unwrap();
        assert_eq!(p.shape(), (7, 3));
        let ka: Vec<_> = a.terms().map(|(m, _)| m.clone()).collect();
        let kp: Vec<_> = p.terms().map(|(m, _)| m.clone()).collect();
        assert_eq!(ka, kp);
    }

    #[test]
    fn constant_product_is_matrix_product() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 1, &[5.0, 6.0]);
        let p = PolyMatrix::constant(2, a.clone())
            .multiply(&PolyMatrix::constant(2, b.clone()))
            .unwrap();
        assert_eq!(p.coefficient(&Monomial::constant(2)).unwrap(), &(a * b));
    }

    #[test]
    fn product_dimension_mismatch() {
        let a = PolyMatrix::constant(2, DMatrix::identity(2, 3));
        let b = PolyMatrix::constant(2, DMatrix::identity(2, 2));
        assert!(matches!(a.multiply(&b), Err(PolyError::DimensionMismatch { .. })));
    }

    #[test]
    fn residual_cases() {
        let d = MonomialDictionary::enumerate(2, 1, 3).unwrap();
        let f = PolyMatrix::dictionary_vector(&d);
        assert_eq!(poly_residual(&f, &f).unwrap(), 0.0);
        let mut g = f.clone();
        let mut bump = DMatrix::zeros(d.len(), 1);
        bump[(4, 0)] = 1e-3;
        g.add_term(d.entries()[4].clone(), &bump).unwrap();
        assert!((poly_residual(&f, &g).unwrap() - 1e-3).abs() < 1e-15);
        // Terms missing on one side count against the other.
        let h = PolyMatrix::zeros(2, d.len(), 1);
        assert_eq!(poly_residual(&f, &h).unwrap(), 1.0);
        assert!(poly_residual(&f, &PolyMatrix::zeros(2, 1, 1)).is_err());
    }

    #[test]
    fn zero_coefficients_are_dropped() {
        let mut p = PolyMatrix::zeros(1, 1, 1);
        p.add_term(Monomial::variable(1, 0), &DMatrix::from_element(1, 1, 2.0)).unwrap();
        p.add_term(Monomial::variable(1, 0), &DMatrix::from_element(1, 1, -2.0)).unwrap();
        assert_eq!(p.num_terms(), 0);
    }

    #[test]
    fn serial_round_trip() {
        let d = spacecraft_dict();
        let a = factorize_dictionary(&d).unwrap();
        let s = a.to_serial();
        assert_eq!(PolyMatrix::from_serial(&s).unwrap(), a);
    }
}
