use nalgebra::DMatrix;

use super::{SynthesisConfig, SynthesisError};
use crate::plant::BatchPair;
use crate::polyalg::{monomials_in_degree_range, Monomial, PolyMatrix};
use crate::sdp::{LmiBlock, SdpProblem, Triplet};

pub const THETA: &str = "Theta";
pub const SIGMA: &str = "Sigma";

pub fn y_name(prefix: &str, alpha: &Monomial) -> String {
    format!("{prefix}[{alpha}]")
}

/// The assembled program plus the naming needed to read a solution back.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub problem: SdpProblem,
    pub basis: Vec<Monomial>,
    pub y_names: Vec<String>,
    /// Present only for the two-map relaxation.
    pub y_tilde_names: Option<Vec<String>>,
}

/// `D * Y[:, j] - M * target[:, j] = 0` for each row of `D`.
fn match_rows(
    problem: &mut SdpProblem,
    data: &DMatrix<f64>,
    y: &str,
    j: usize,
    rhs: Option<(&str, &DMatrix<f64>)>,
) -> Result<(), SynthesisError> {
    for i in 0..data.nrows() {
        let mut terms: Vec<Triplet> = (0..data.ncols())
            .filter(|&k| data[(i, k)] != 0.0)
            .map(|k| Triplet::new(y, k, j, data[(i, k)]))
            .collect();
        if let Some((var, m)) = rhs {
            for l in 0..m.ncols() {
                if m[(i, l)] != 0.0 {
                    terms.push(Triplet::new(var, l, j, -m[(i, l)]));
                }
            }
        }
        problem.add_equality(terms, 0.0)?;
    }
    Ok(())
}

pub(crate) fn required_y_degree(aleph: &PolyMatrix) -> u32 {
    aleph.max_degree()
}

pub(crate) fn build(
    pair: &BatchPair,
    j0: &DMatrix<f64>,
    j0_tilde: &DMatrix<f64>,
    aleph: &PolyMatrix,
    cfg: &SynthesisConfig,
    two_map: bool,
) -> Result<Assembly, SynthesisError> {
    cfg.validate()?;
    let n = cfg.dict.nvars();
    let nn = cfg.dict.len();
    let t = pair.samples();
    if j0.shape() != (nn, t) || j0_tilde.shape() != (nn, t) {
        return Err(SynthesisError::InvalidConfig(format!(
            "lifted data must be {nn}x{t}, got {:?} and {:?}",
            j0.shape(),
            j0_tilde.shape()
        )));
    }
    if aleph.shape() != (nn, n) {
        return Err(SynthesisError::InvalidConfig("transformation matrix does not match the dictionary".into()));
    }
    let required = required_y_degree(aleph);
    let y_degree = cfg.y_degree.unwrap_or(cfg.dict.max_degree() - 1);
    if y_degree < required {
        return Err(SynthesisError::DegreeTooLow { y_degree, required });
    }

    let basis = monomials_in_degree_range(n, 0, y_degree);
    let mut p = SdpProblem::new();
    p.declare_symmetric(THETA, n)?;
    p.declare_free(SIGMA, n, n)?;
    let y_names: Vec<String> = basis.iter().map(|a| y_name("Y", a)).collect();
    for name in &y_names {
        p.declare_free(name, t, n)?;
    }
    let y_tilde_names = if two_map {
        let names: Vec<String> = basis.iter().map(|a| y_name("Yt", a)).collect();
        for name in &names {
            p.declare_free(name, t, n)?;
        }
        Some(names)
    } else {
        None
    };

    let zero = DMatrix::zeros(nn, n);
    let identity = DMatrix::identity(n, n);
    let (x1, x1_tilde) = (&pair.batch().x1, &pair.sibling().x1);
    for (q, alpha) in basis.iter().enumerate() {
        let aleph_alpha = aleph.coefficient(alpha).unwrap_or(&zero);
        let y = &y_names[q];
        let yt = y_tilde_names.as_ref().map_or(y, |v| &v[q]);
        for j in 0..n {
            match_rows(&mut p, j0, y, j, Some((THETA, aleph_alpha)))?;
            match_rows(&mut p, j0_tilde, yt, j, Some((THETA, aleph_alpha)))?;
            let sigma = alpha.is_constant().then_some((SIGMA, &identity));
            match_rows(&mut p, x1, y, j, sigma)?;
            match_rows(&mut p, x1_tilde, yt, j, sigma)?;
        }
    }

    // Sigma + Sigma' + vartheta I + epsilon Theta <= 0
    let mut decay = LmiBlock::new("decay", n).with_constant(&(DMatrix::identity(n, n) * cfg.vartheta));
    for i in 0..n {
        for j in 0..n {
            decay = decay.term(SIGMA, i, j, i, j, if i == j { 2.0 } else { 1.0 });
        }
        for j in i..n {
            decay = decay.term(THETA, i, j, i, j, cfg.epsilon);
        }
    }
    p.add_lmi(decay)?;

    if let Some(theta_max) = cfg.theta_max {
        let mut cap = LmiBlock::new("theta-cap", n).with_constant(&(DMatrix::identity(n, n) * -theta_max));
        for i in 0..n {
            for j in i..n {
                cap = cap.term(THETA, i, j, i, j, 1.0);
            }
        }
        p.add_lmi(cap)?;
    }

    // [[-k Theta, Sigma'], [Sigma, -k Theta]] <= 0 bounds the closed-loop matrix Sigma Theta^-1.
    if let Some(kappa) = cfg.gain_bound {
        let mut gain = LmiBlock::new("gain", 2 * n);
        for i in 0..n {
            for j in i..n {
                gain = gain.term(THETA, i, j, i, j, -kappa).term(THETA, i, j, n + i, n + j, -kappa);
            }
            for j in 0..n {
                gain = gain.term(SIGMA, i, j, n + i, j, 1.0);
            }
        }
        p.add_lmi(gain)?;
    }

    p.add_psd_floor(THETA, cfg.psd_floor)?;
    Ok(Assembly {
        problem: p,
        basis,
        y_names,
        y_tilde_names,
    })
}

/// Emits the feasibility program with one shared coefficient set `Y_alpha`.
pub fn assemble_program(
    pair: &BatchPair,
    j0: &DMatrix<f64>,
    j0_tilde: &DMatrix<f64>,
    aleph: &PolyMatrix,
    cfg: &SynthesisConfig,
) -> Result<Assembly, SynthesisError> {
    build(pair, j0, j0_tilde, aleph, cfg, false)
}
