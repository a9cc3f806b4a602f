use std::cmp::Ordering;
use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::PolyError;

/// A monomial `x_1^e_1 ... x_n^e_n` stored as its exponent vector.
///
/// The all-zero exponent vector is the constant basis element. Ordering is
/// graded lexicographic: lower total degree first, then larger exponent on
/// the lower-index variable first (`x1^2 < x1*x2 < x1*x3 < x2^2 ...`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn constant(n: usize) -> Self {
        Monomial(vec![0; n])
    }

    /// The monomial `x_i` in `n` variables.
    pub fn variable(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// Product of two monomials (exponents add).
    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.nvars(), other.nvars());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(point)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &x)| x.powi(e as i32))
            .product()
    }

    /// Lowest-index variable with a positive exponent.
    pub fn leading_variable(&self) -> Option<usize> {
        self.0.iter().position(|&e| e > 0)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `n` variables with total degree in `d_min..=d_max`, graded-lex.
pub(crate) fn monomials_in_degree_range(n: usize, d_min: u32, d_max: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in d_min..=d_max {
        let mut current = vec![0u32; n];
        push_degree(n, d, 0, &mut current, &mut out);
    }
    out
}

// Emits exponent vectors of exact degree `remaining` in lexicographically
// descending order, which is graded-lex order within one degree.
fn push_degree(n: usize, remaining: u32, idx: usize, current: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if idx + 1 == n {
        current[idx] = remaining;
        out.push(Monomial(current.clone()));
        current[idx] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[idx] = e;
        push_degree(n, remaining - e, idx + 1, current, out);
    }
    current[idx] = 0;
}

/// Ordered monomial vector `F(x)` with `F(0) = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialDictionary {
    n: usize,
    entries: Vec<Monomial>,
}

impl MonomialDictionary {
    /// Every monomial of total degree `d_min..=d_max` in `n` variables.
    pub fn enumerate(n: usize, d_min: u32, d_max: u32) -> Result<Self, PolyError> {
        if n == 0 {
            return Err(PolyError::InvalidDimension(n));
        }
        if d_min < 1 || d_min > d_max {
            return Err(PolyError::InvalidDegreeRange { d_min, d_max });
        }
        Ok(MonomialDictionary {
            n,
            entries: monomials_in_degree_range(n, d_min, d_max),
        })
    }

    /// Builds a dictionary from an explicit list of exponent vectors.
    ///
    /// The list is put into canonical graded-lex order.
    pub fn from_exponents(n: usize, exponents: Vec<Vec<u32>>) -> Result<Self, PolyError> {
        if n == 0 {
            return Err(PolyError::InvalidDimension(n));
        }
        if exponents.is_empty() {
            return Err(PolyError::EmptyDictionary);
        }
        let mut entries = Vec::with_capacity(exponents.len());
        for (index, e) in exponents.into_iter().enumerate() {
            if e.len() != n {
                return Err(PolyError::DimensionMismatch {
                    context: "dictionary entry",
                    expected: n,
                    found: e.len(),
                });
            }
            let m = Monomial(e);
            if m.degree() == 0 {
                return Err(PolyError::ZeroDegreeEntry { index });
            }
            entries.push(m);
        }
        entries.sort();
        if let Some(w) = entries.windows(2).find(|w| w[0] == w[1]) {
            return Err(PolyError::DuplicateMonomial(w[0].to_string()));
        }
        Ok(MonomialDictionary { n, entries })
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Monomial] {
        &self.entries
    }

    pub fn max_degree(&self) -> u32 {
        self.entries.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn index_of(&self, m: &Monomial) -> Option<usize> {
        self.entries.binary_search(m).ok()
    }

    /// `F(point)`.
    pub fn evaluate(&self, point: &[f64]) -> Result<DVector<f64>, PolyError> {
        if point.len() != self.n {
            return Err(PolyError::DimensionMismatch {
                context: "evaluation point",
                expected: self.n,
                found: point.len(),
            });
        }
        Ok(DVector::from_iterator(
            self.entries.len(),
            self.entries.iter().map(|m| m.eval(point)),
        ))
    }

    pub fn to_exponents(&self) -> Vec<Vec<u32>> {
        self.entries.iter().map(|m| m.0.clone()).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_exponents()).expect("exponent vectors serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, PolyError> {
        let exps: Vec<Vec<u32>> = serde_json::from_str(s)?;
        let n = exps.first().map(Vec::len).ok_or(PolyError::EmptyDictionary)?;
        Self::from_exponents(n, exps)
    }
}

impl fmt::Display for MonomialDictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(ToString::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }

    #[test]
    fn enumerate_three_vars_degree_two() {
        let d = MonomialDictionary::enumerate(3, 1, 2).unwrap();
        let got: Vec<String> = d.entries().iter().map(ToString::to_string).collect();
        assert_eq!(
            got,
            ["x1", "x2", "x3", "x1^2", "x1*x2", "x1*x3", "x2^2", "x2*x3", "x3^2"]
        );
        assert_eq!(d.len() as u64, binom(3, 1) + binom(4, 2));
    }

    #[test]
    fn enumerate_counts_match_stars_and_bars() {
        for n in 1..5usize {
            for d_max in 1..5u32 {
                let d = MonomialDictionary::enumerate(n, 1, d_max).unwrap();
                let expected: u64 = (1..=d_max as u64).map(|k| binom(n as u64 + k - 1, k)).sum();
                assert_eq!(d.len() as u64, expected, "n={n} d_max={d_max}");
            }
        }
    }

    #[test]
    fn single_variable_dictionary() {
        let d = MonomialDictionary::enumerate(1, 1, 1).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.evaluate(&[-2.0]).unwrap()[0], -2.0);
    }

    #[test]
    fn invalid_degree_ranges() {
        assert!(matches!(
            MonomialDictionary::enumerate(2, 0, 2),
            Err(PolyError::InvalidDegreeRange { .. })
        ));
        assert!(matches!(
            MonomialDictionary::enumerate(2, 3, 2),
            Err(PolyError::InvalidDegreeRange { .. })
        ));
    }

    #[test]
    fn explicit_spacecraft_dictionary() {
        let d = MonomialDictionary::from_exponents(
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
        .unwrap();
        assert_eq!(d.len(), 7);
        let v = d.evaluate(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 6.0]);
        assert!(d.evaluate(&[0.0; 3]).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn explicit_list_is_canonicalized_and_validated() {
        let d = MonomialDictionary::from_exponents(2, vec![vec![1, 1], vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(d.to_exponents(), vec![vec![1, 0], vec![0, 1], vec![1, 1]]);
        assert!(matches!(
            MonomialDictionary::from_exponents(2, vec![vec![1, 0], vec![1, 0]]),
            Err(PolyError::DuplicateMonomial(_))
        ));
        assert!(matches!(
            MonomialDictionary::from_exponents(2, vec![vec![0, 0]]),
            Err(PolyError::ZeroDegreeEntry { index: 0 })
        ));
        assert!(matches!(
            MonomialDictionary::from_exponents(2, vec![vec![1, 0, 0]]),
            Err(PolyError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn evaluate_rejects_wrong_length() {
        let d = MonomialDictionary::enumerate(2, 1, 2).unwrap();
        assert!(d.evaluate(&[1.0]).is_err());
    }

    #[test]
    fn json_round_trip_is_stable() {
        let d = MonomialDictionary::enumerate(3, 1, 2).unwrap();
        let s = d.to_json();
        assert!(s.starts_with("[[1,0,0],[0,1,0],[0,0,1],[2,0,0]"));
        let back = MonomialDictionary::from_json(&s).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_json(), s);
    }
}
