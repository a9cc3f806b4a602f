use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::excitation::ExcitationSpec;
use super::ode::simulate_from;
use super::{PlantError, PolySystem};
use crate::polyalg::MonomialDictionary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeSource {
    Exact,
    ForwardDifference,
}

/// Sampled input-state data: `U0` (m x T), `X0` (n x T), `X1` (n x T).
#[derive(Debug, Clone, PartialEq)]
pub struct DataBatch {
    pub u0: DMatrix<f64>,
    pub x0: DMatrix<f64>,
    pub x1: DMatrix<f64>,
    pub tau: f64,
    pub t0: f64,
    pub derivative_source: DerivativeSource,
}

impl DataBatch {
    pub fn new(
        u0: DMatrix<f64>,
        x0: DMatrix<f64>,
        x1: DMatrix<f64>,
        tau: f64,
        t0: f64,
        derivative_source: DerivativeSource,
    ) -> Result<Self, PlantError> {
        let t = x0.ncols();
        if u0.ncols() != t || x1.ncols() != t {
            return Err(PlantError::InvalidParameter(format!(
                "sample counts differ: U0 {} X0 {} X1 {}",
                u0.ncols(),
                t,
                x1.ncols()
            )));
        }
        if x1.nrows() != x0.nrows() {
            return Err(PlantError::Shape {
                what: "X1",
                expected: (x0.nrows(), t),
                found: x1.shape(),
            });
        }
        if !(tau > 0.0) {
            return Err(PlantError::InvalidParameter(format!("sampling period must be positive, got {tau}")));
        }
        Ok(DataBatch {
            u0,
            x0,
            x1,
            tau,
            t0,
            derivative_source,
        })
    }

    pub fn samples(&self) -> usize {
        self.x0.ncols()
    }

    pub fn n(&self) -> usize {
        self.x0.nrows()
    }

    pub fn m(&self) -> usize {
        self.u0.nrows()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.samples()).map(|k| self.t0 + k as f64 * self.tau).collect()
    }
}

/// Two batches driven by the same input from distinct initial states.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchPair {
    batch: DataBatch,
    sibling: DataBatch,
}

impl BatchPair {
    pub fn new(batch: DataBatch, sibling: DataBatch) -> Result<Self, PlantError> {
        if batch.u0 != sibling.u0 {
            return Err(PlantError::InvalidParameter("sibling batch must share U0".into()));
        }
        if batch.x0.shape() != sibling.x0.shape() {
            return Err(PlantError::Shape {
                what: "sibling X0",
                expected: batch.x0.shape(),
                found: sibling.x0.shape(),
            });
        }
        if batch.tau != sibling.tau || batch.t0 != sibling.t0 {
            return Err(PlantError::InvalidParameter("batches must share sampling grid".into()));
        }
        if batch.samples() > 0 && batch.x0.column(0) == sibling.x0.column(0) {
            return Err(PlantError::IdenticalInitialConditions);
        }
        Ok(BatchPair { batch, sibling })
    }

    pub fn batch(&self) -> &DataBatch {
        &self.batch
    }

    pub fn sibling(&self) -> &DataBatch {
        &self.sibling
    }

    pub fn u0(&self) -> &DMatrix<f64> {
        &self.batch.u0
    }

    pub fn samples(&self) -> usize {
        self.batch.samples()
    }

    /// SHA-256 over the sampling grid and every matrix entry's bit pattern.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.samples() as u64).to_le_bytes());
        h.update(self.batch.tau.to_bits().to_le_bytes());
        h.update(self.batch.t0.to_bits().to_le_bytes());
        for m in [
            &self.batch.u0,
            &self.batch.x0,
            &self.batch.x1,
            &self.sibling.x0,
            &self.sibling.x1,
        ] {
            h.update((m.nrows() as u64).to_le_bytes());
            for v in m.iter() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectOptions {
    pub samples: usize,
    pub tau: f64,
    pub t0: f64,
    pub source: DerivativeSource,
    /// RK4 steps per sampling period.
    pub substeps: usize,
}

impl Default for CollectOptions {
    fn default() -> Self {
        CollectOptions {
            samples: 300,
            tau: 0.1,
            t0: 0.0,
            source: DerivativeSource::Exact,
            substeps: 100,
        }
    }
}

fn collect_batch(
    sys: &PolySystem,
    input: &super::Excitation,
    x0: &DVector<f64>,
    opts: &CollectOptions,
) -> Result<DataBatch, PlantError> {
    let extra = usize::from(opts.source == DerivativeSource::ForwardDifference);
    let intervals = opts.samples - 1 + extra;
    let (n, m, t) = (sys.n(), sys.m(), opts.samples);
    let mut u0 = DMatrix::zeros(m, t);
    let mut xs = DMatrix::zeros(n, t);
    let mut x1 = DMatrix::zeros(n, t);
    if intervals == 0 {
        let u = input.eval(opts.t0);
        u0.set_column(0, &u);
        xs.set_column(0, x0);
        x1.set_column(0, &sys.vector_field(x0, &u));
        return DataBatch::new(u0, xs, x1, opts.tau, opts.t0, opts.source);
    }
    let step = opts.tau / opts.substeps as f64;
    let horizon = intervals as f64 * opts.tau;
    let tr = simulate_from(sys, |s| input.eval(s), x0, opts.t0, horizon, step)?;
    let sample_state = |k: usize| &tr.states[k * opts.substeps];
    for k in 0..t {
        let tk = opts.t0 + k as f64 * opts.tau;
        let u = input.eval(tk);
        let x = sample_state(k);
        u0.set_column(k, &u);
        xs.set_column(k, x);
        let d = match opts.source {
            DerivativeSource::Exact => sys.vector_field(x, &u),
            DerivativeSource::ForwardDifference => (sample_state(k + 1) - x) / opts.tau,
        };
        x1.set_column(k, &d);
    }
    DataBatch::new(u0, xs, x1, opts.tau, opts.t0, opts.source)
}

/// Runs the plant twice under one realized input and samples both runs.
pub fn collect_pair(
    sys: &PolySystem,
    exc: &ExcitationSpec,
    x0: &DVector<f64>,
    x0_tilde: &DVector<f64>,
    opts: &CollectOptions,
) -> Result<BatchPair, PlantError> {
    if opts.samples == 0 {
        return Err(PlantError::InvalidParameter("sample count T must be at least 1".into()));
    }
    if !(opts.tau > 0.0) || opts.substeps == 0 {
        return Err(PlantError::InvalidParameter("sampling period and substeps must be positive".into()));
    }
    for (what, v) in [("x0", x0), ("x0_tilde", x0_tilde)] {
        if v.len() != sys.n() {
            return Err(PlantError::Dimension {
                what,
                expected: sys.n(),
                found: v.len(),
            });
        }
    }
    if x0 == x0_tilde {
        return Err(PlantError::IdenticalInitialConditions);
    }
    let horizon = opts.t0 + opts.samples as f64 * opts.tau;
    let input = exc.realize(sys.m(), horizon)?;
    let batch = collect_batch(sys, &input, x0, opts)?;
    let sibling = collect_batch(sys, &input, x0_tilde, opts)?;
    BatchPair::new(batch, sibling)
}

/// Lifted state data `J0 = [F(x(t0)) ... F(x(t0 + (T-1) tau))]` with rank diagnostics.
#[derive(Debug, Clone)]
pub struct LiftedData {
    pub j0: DMatrix<f64>,
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub condition_number: f64,
}

pub fn lift_states(x0: &DMatrix<f64>, dict: &MonomialDictionary) -> Result<DMatrix<f64>, PlantError> {
    if x0.nrows() != dict.nvars() {
        return Err(PlantError::Dimension {
            what: "dictionary variables",
            expected: x0.nrows(),
            found: dict.nvars(),
        });
    }
    let mut j0 = DMatrix::zeros(dict.len(), x0.ncols());
    for k in 0..x0.ncols() {
        let col: Vec<f64> = x0.column(k).iter().copied().collect();
        j0.set_column(k, &dict.evaluate(&col)?);
    }
    Ok(j0)
}

/// Singular values counted when `sigma > max(rows, cols) * eps * sigma_max`
/// unless `rel_tol` overrides the relative threshold.
pub fn numeric_rank(singular_values: &[f64], rows: usize, cols: usize, rel_tol: Option<f64>) -> usize {
    let smax = singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    let rel = rel_tol.unwrap_or(rows.max(cols) as f64 * f64::EPSILON);
    singular_values.iter().filter(|&&s| s > rel * smax).count()
}

pub fn lift(batch: &DataBatch, dict: &MonomialDictionary, rank_tol: Option<f64>) -> Result<LiftedData, PlantError> {
    let j0 = lift_states(&batch.x0, dict)?;
    let mut singular_values: Vec<f64> = SVD::new(j0.clone(), false, false).singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let rank = numeric_rank(&singular_values, j0.nrows(), j0.ncols(), rank_tol);
    let condition_number = if singular_values.len() < j0.nrows() || rank < j0.nrows() {
        f64::INFINITY
    } else {
        singular_values[0] / singular_values[j0.nrows() - 1]
    };
    Ok(LiftedData {
        j0,
        rank,
        singular_values,
        condition_number,
    })
}

/// Data-richness diagnostics for both lifted matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichnessReport {
    pub rank_ok: bool,
    pub required_rank: usize,
    pub ranks: [usize; 2],
    pub condition_numbers: [f64; 2],
    pub note: Option<String>,
}

/// Never fails: malformed input yields `rank_ok = false` with a note.
pub fn richness_check(pair: &BatchPair, dict: &MonomialDictionary, rank_tol: Option<f64>) -> RichnessReport {
    let required_rank = dict.len();
    match (lift(pair.batch(), dict, rank_tol), lift(pair.sibling(), dict, rank_tol)) {
        (Ok(a), Ok(b)) => RichnessReport {
            rank_ok: a.rank == required_rank && b.rank == required_rank,
            required_rank,
            ranks: [a.rank, b.rank],
            condition_numbers: [a.condition_number, b.condition_number],
            note: (pair.samples() < required_rank)
                .then(|| format!("T = {} is below the dictionary size N = {}", pair.samples(), required_rank)),
        },
        (Err(e), _) | (_, Err(e)) => RichnessReport {
            rank_ok: false,
            required_rank,
            ranks: [0, 0],
            condition_numbers: [f64::INFINITY; 2],
            note: Some(e.to_string()),
        },
    }
}

/// Per-row equation weights for lifted data and derivative rows.
///
/// Weights multiply whole equations, so decision variables are unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataScaling {
    pub j0_rows: Vec<f64>,
    pub x1_rows: Vec<f64>,
}

impl DataScaling {
    pub fn from_pair(pair: &BatchPair, dict: &MonomialDictionary) -> Result<Self, PlantError> {
        let j = lift_states(&pair.batch().x0, dict)?;
        let jt = lift_states(&pair.sibling().x0, dict)?;
        let inv_row_max = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> Vec<f64> {
            (0..a.nrows())
                .map(|r| {
                    let m = a.row(r).amax().max(b.row(r).amax());
                    if m > 0.0 {
                        1.0 / m
                    } else {
                        1.0
                    }
                })
                .collect()
        };
        Ok(DataScaling {
            j0_rows: inv_row_max(&j, &jt),
            x1_rows: inv_row_max(&pair.batch().x1, &pair.sibling().x1),
        })
    }
}
