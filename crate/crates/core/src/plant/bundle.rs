//! On-disk form of a [`BatchPair`]: `batch.csv`, `sibling.csv`, `meta.json`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::data::{BatchPair, DataBatch, DataScaling, DerivativeSource};
use super::PlantError;

pub const BATCH_FILE: &str = "batch.csv";
pub const SIBLING_FILE: &str = "sibling.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub tau: f64,
    pub samples: usize,
    pub t0: f64,
    pub n: usize,
    pub m: usize,
    pub seed: Option<u64>,
    pub derivative_source: DerivativeSource,
    pub scaling: Option<DataScaling>,
    pub fingerprint: String,
}

pub fn batch_header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=m).map(|i| format!("u_{i}")));
    h.extend((1..=n).map(|i| format!("x_{i}")));
    h.extend((1..=n).map(|i| format!("xdot_{i}")));
    h
}

pub fn write_batch_csv(path: &Path, batch: &DataBatch) -> Result<(), PlantError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(batch_header(batch.n(), batch.m()))?;
    for (k, t) in batch.times().into_iter().enumerate() {
        let mut rec = vec![format!("{t:?}")];
        rec.extend(batch.u0.column(k).iter().map(|v| format!("{v:?}")));
        rec.extend(batch.x0.column(k).iter().map(|v| format!("{v:?}")));
        rec.extend(batch.x1.column(k).iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_batch_csv(path: &Path, meta: &BundleMeta) -> Result<DataBatch, PlantError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header != batch_header(meta.n, meta.m) {
        return Err(PlantError::Format(format!("{}: unexpected header {:?}", path.display(), header)));
    }
    let (n, m) = (meta.n, meta.m);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| PlantError::Format(format!("{}: {e}", path.display())))?;
        if vals.len() != 1 + m + 2 * n {
            return Err(PlantError::Format(format!("{}: ragged row", path.display())));
        }
        rows.push(vals);
    }
    if rows.len() != meta.samples {
        return Err(PlantError::Format(format!(
            "{}: {} rows but meta declares T = {}",
            path.display(),
            rows.len(),
            meta.samples
        )));
    }
    let t = rows.len();
    let u0 = DMatrix::from_fn(m, t, |i, k| rows[k][1 + i]);
    let x0 = DMatrix::from_fn(n, t, |i, k| rows[k][1 + m + i]);
    let x1 = DMatrix::from_fn(n, t, |i, k| rows[k][1 + m + n + i]);
    DataBatch::new(u0, x0, x1, meta.tau, meta.t0, meta.derivative_source)
}

pub fn write_bundle(
    dir: &Path,
    pair: &BatchPair,
    seed: Option<u64>,
    scaling: Option<DataScaling>,
) -> Result<BundleMeta, PlantError> {
    fs::create_dir_all(dir)?;
    write_batch_csv(&dir.join(BATCH_FILE), pair.batch())?;
    write_batch_csv(&dir.join(SIBLING_FILE), pair.sibling())?;
    let b = pair.batch();
    let meta = BundleMeta {
        tau: b.tau,
        samples: b.samples(),
        t0: b.t0,
        n: b.n(),
        m: b.m(),
        seed,
        derivative_source: b.derivative_source,
        scaling,
        fingerprint: pair.fingerprint(),
    };
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
    Ok(meta)
}

pub fn read_bundle(dir: &Path) -> Result<(BatchPair, BundleMeta), PlantError> {
    let meta: BundleMeta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE))?)?;
    let batch = read_batch_csv(&dir.join(BATCH_FILE), &meta)?;
    let sibling = read_batch_csv(&dir.join(SIBLING_FILE), &meta)?;
    let pair = BatchPair::new(batch, sibling)?;
    Ok((pair, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{collect_pair, CollectOptions, ExcitationSpec, PolySystem};
    use nalgebra::DVector;

    #[test]
    fn bundle_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join(format!("deltaiss-bundle-{}", std::process::id()));
        let sys = PolySystem::builtin_spacecraft();
        let exc = ExcitationSpec::multisine(vec![10.0; 3], 2);
        let opts = CollectOptions {
            samples: 20,
            ..Default::default()
        };
        let pair = collect_pair(
            &sys,
            &exc,
            &DVector::from_vec(vec![0.1, 0.2, 0.3]),
            &DVector::from_vec(vec![-0.1, 0.4, 0.0]),
            &opts,
        )
        .unwrap();
        let meta = write_bundle(&dir, &pair, Some(2), None).unwrap();
        let (back, meta_back) = read_bundle(&dir).unwrap();
        assert_eq!(back, pair);
        assert_eq!(meta_back, meta);
        assert_eq!(back.fingerprint(), meta.fingerprint);
        let text = fs::read_to_string(dir.join(BATCH_FILE)).unwrap();
        assert!(text.starts_with("t,u_1,u_2,u_3,x_1,x_2,x_3,xdot_1,xdot_2,xdot_3\n"));
        fs::remove_dir_all(&dir).unwrap();
    }
}
