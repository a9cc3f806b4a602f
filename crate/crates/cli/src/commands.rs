use std::fs;
use std::path::{Path, PathBuf};

use deltaiss::plant::bundle::{read_bundle, write_bundle};
use deltaiss::plant::{collect_pair, richness_check, BatchPair, DataScaling, PolySystem};
use deltaiss::synthesis::{synthesize_with_retry, Attempt, Certificate};
use deltaiss::verify::{
    recheck_certificate, verify_pairs, write_convergence_long_csv, write_trace_csv, VerificationSummary,
};
use serde::Serialize;

use crate::config::{DictionarySpec, PlantFile, RangeKind, RunConfig, SynthesisSpec, VerifySpec};
use crate::manifest::{self, sha256_hex, RunRecord};
use crate::{CliError, Common};

pub const DATA_DIR: &str = "data";
pub const CERTIFICATE_FILE: &str = "certificate.json";
pub const RESIDUAL_FILE: &str = "residual_report.json";
pub const ATTEMPTS_FILE: &str = "synthesis_attempts.json";
pub const VERIFY_DIR: &str = "verify";

fn load_config(common: &Common) -> Result<(RunConfig, String), CliError> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    RunConfig::load(path)
}

fn out_dir(common: &Common, cfg: &RunConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("run"))
}

fn guard(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::Config(format!(
            "{} already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report types serialize") + "\n"
}

pub fn load_plant(cfg: &RunConfig) -> Result<PolySystem, CliError> {
    PlantFile::load(&cfg.plant_path()?)?.system()
}

/// Collects a pair into `<out>/data`.
pub fn collect_into(cfg: &RunConfig, plant: &PolySystem, out: &Path, force: bool) -> Result<BatchPair, CliError> {
    let data_dir = out.join(DATA_DIR);
    guard(&data_dir, force)?;
    let (x0, xt) = cfg.data.initial_states(plant.n())?;
    let exc = cfg.data.excitation(plant.m());
    let pair = collect_pair(plant, &exc, &x0, &xt, &cfg.data.collect_options())?;
    let dict = cfg.dictionary.build()?;
    let scaling = DataScaling::from_pair(&pair, &dict).ok();
    if data_dir.exists() {
        fs::remove_dir_all(&data_dir)?;
    }
    write_bundle(&data_dir, &pair, Some(cfg.data.seed), scaling)?;
    Ok(pair)
}

pub fn collect(common: &Common, seed: Option<u64>, samples: Option<usize>) -> Result<String, CliError> {
    let (mut cfg, text) = load_config(common)?;
    if let Some(s) = seed {
        cfg.data.seed = s;
    }
    if let Some(t) = samples {
        cfg.data.samples = t;
        cfg.validate()?;
    }
    let plant = load_plant(&cfg)?;
    let out = out_dir(common, &cfg);
    let pair = collect_into(&cfg, &plant, &out, common.force)?;
    manifest::append(
        &out,
        RunRecord {
            command: "collect".into(),
            seeds: [("excitation".to_string(), cfg.data.seed)].into(),
            config_sha256: Some(sha256_hex(text.as_bytes())),
            data_fingerprint: Some(pair.fingerprint()),
            ..Default::default()
        },
        &["data/batch.csv", "data/sibling.csv", "data/meta.json"],
    )?;
    Ok(format!(
        "collected T = {} samples of a {}-state, {}-input plant into {}",
        pair.samples(),
        plant.n(),
        plant.m(),
        out.join(DATA_DIR).display()
    ))
}

/// The data, the synthesis result and every attempt made.
pub type BundleSynthesis = (BatchPair, Result<Certificate, CliError>, Vec<Attempt>);

/// Synthesis from the bundle alone. The signature has no way to reach the plant.
pub fn synthesize_from_bundle(dictionary: &DictionarySpec, spec: &SynthesisSpec, data_dir: &Path) -> Result<BundleSynthesis, CliError> {
    let (pair, _) = read_bundle(data_dir)?;
    let dict = dictionary.build()?;
    if dict.nvars() != pair.batch().n() {
        return Err(CliError::Config(format!(
            "dictionary has {} variables but the data have {} states",
            dict.nvars(),
            pair.batch().n()
        )));
    }
    let cfg = spec.to_config(dict.clone())?;
    let rich = richness_check(&pair, &dict, cfg.rank_tol);
    if !rich.rank_ok {
        return Err(deltaiss::synthesis::SynthesisError::RankPreconditionViolated(rich).into());
    }
    let grid: Vec<(f64, f64)> = spec.retry.iter().map(|[e, v]| (*e, *v)).collect();
    let (result, attempts) = synthesize_with_retry(&pair, &cfg, &grid);
    Ok((pair, result.map_err(CliError::from), attempts))
}

pub fn synthesize_into(
    dictionary: &DictionarySpec,
    spec: &SynthesisSpec,
    data_dir: &Path,
    out: &Path,
    force: bool,
) -> Result<(Certificate, Vec<Attempt>), CliError> {
    guard(&out.join(CERTIFICATE_FILE), force)?;
    let (_, result, attempts) = synthesize_from_bundle(dictionary, spec, data_dir)?;
    fs::create_dir_all(out)?;
    fs::write(out.join(ATTEMPTS_FILE), to_json(&attempts))?;
    let cert = result?;
    fs::write(out.join(CERTIFICATE_FILE), cert.to_json() + "\n")?;
    fs::write(out.join(RESIDUAL_FILE), to_json(&cert.residual_report))?;
    Ok((cert, attempts))
}

pub fn synthesize(common: &Common, data: Option<PathBuf>) -> Result<String, CliError> {
    let (cfg, text) = load_config(common)?;
    let out = out_dir(common, &cfg);
    let data_dir = data.unwrap_or_else(|| out.join(DATA_DIR));
    let (cert, attempts) = synthesize_into(&cfg.dictionary, &cfg.synthesis, &data_dir, &out, common.force)?;
    manifest::append(
        &out,
        RunRecord {
            command: "synthesize".into(),
            config_sha256: Some(sha256_hex(text.as_bytes())),
            data_fingerprint: Some(cert.data_fingerprint.clone()),
            ..Default::default()
        },
        &[CERTIFICATE_FILE, RESIDUAL_FILE, ATTEMPTS_FILE],
    )?;
    Ok(format!(
        "certificate written to {} (epsilon {}, vartheta {}, margin {:.3e}, {} attempt(s))",
        out.join(CERTIFICATE_FILE).display(),
        cert.epsilon,
        cert.vartheta,
        cert.solver.margin,
        attempts.len()
    ))
}

fn read_certificate(path: &Path) -> Result<Certificate, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    // A file that no longer parses is treated like any other altered certificate.
    Certificate::from_json(&text).map_err(|e| CliError::Verification(format!("{}: {e}", path.display())))
}

pub struct VerifyArgs {
    pub certificate: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub seed: Option<u64>,
    pub split_range: bool,
    pub b_norm_bound: Option<f64>,
    pub pairs: Option<usize>,
}

impl VerifyArgs {
    pub fn apply(&self, spec: &mut VerifySpec) {
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if self.split_range {
            spec.range = RangeKind::Split;
        }
        if self.b_norm_bound.is_some() {
            spec.b_norm_bound = self.b_norm_bound;
        }
        if let Some(p) = self.pairs {
            spec.pairs = p;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub recheck: deltaiss::synthesis::ConditionReport,
    pub summary: VerificationSummary,
}

/// Recheck against data, then closed-loop simulation into `<out>/verify`.
pub fn verify_into(
    plant: &PolySystem,
    cert_path: &Path,
    data_dir: &Path,
    spec: &VerifySpec,
    out: &Path,
    force: bool,
) -> Result<VerifyOutcome, CliError> {
    let vdir = out.join(VERIFY_DIR);
    guard(&vdir, force)?;
    let cert = read_certificate(cert_path)?;
    let opts = spec.to_options(cert.vartheta)?;
    let (pair, _) = read_bundle(data_dir)?;
    let recheck = recheck_certificate(&cert, &pair, spec.recheck_tol)?;
    if vdir.exists() {
        fs::remove_dir_all(&vdir)?;
    }
    fs::create_dir_all(&vdir)?;
    fs::write(vdir.join("recheck.json"), to_json(&recheck))?;
    if !recheck.fingerprint_match {
        eprintln!("warning: data fingerprint differs from the one recorded in the certificate");
    }
    if !recheck.pass {
        return Err(CliError::Verification(format!(
            "certificate conditions do not hold on the data (worst equality {:.3e}, decay eigenvalue {:.3e}, gain defect {:.3e})",
            recheck.worst_equality(),
            recheck.decay_max_eig,
            recheck.gain_defect
        )));
    }
    let (summary, traces) = verify_pairs(plant, &cert, &opts)?;
    let width = traces.len().max(1).to_string().len();
    for (i, tr) in traces.iter().enumerate() {
        let f = fs::File::create(vdir.join(format!("pair_{i:0width$}.csv")))?;
        write_trace_csv(tr, f)?;
    }
    write_convergence_long_csv(&traces, fs::File::create(vdir.join("convergence_long.csv"))?)?;
    fs::write(vdir.join("convergence.json"), to_json(&summary.convergence))?;
    fs::write(vdir.join("verification.json"), to_json(&summary))?;
    let outcome = VerifyOutcome { recheck, summary };
    if !outcome.summary.pass {
        let bad = outcome.summary.outcomes.iter().filter(|o| !o.gronwall.pass).count();
        return Err(CliError::Verification(format!(
            "{bad} of {} pairs violate the decay bound; worst distance ratio {:.3e}",
            outcome.summary.outcomes.len(),
            outcome.summary.convergence.worst_ratio
        )));
    }
    Ok(outcome)
}

pub fn verify(common: &Common, args: &VerifyArgs) -> Result<String, CliError> {
    let (mut cfg, text) = load_config(common)?;
    args.apply(&mut cfg.verify);
    let out = out_dir(common, &cfg);
    let plant = load_plant(&cfg)?;
    let cert_path = args.certificate.clone().unwrap_or_else(|| out.join(CERTIFICATE_FILE));
    let data_dir = args.data.clone().unwrap_or_else(|| out.join(DATA_DIR));
    let result = verify_into(&plant, &cert_path, &data_dir, &cfg.verify, &out, common.force);
    let record = RunRecord {
        command: "verify".into(),
        seeds: [("initial-states".to_string(), cfg.verify.seed)].into(),
        config_sha256: Some(sha256_hex(text.as_bytes())),
        ..Default::default()
    };
    let artifacts: &[&str] = if out.join(VERIFY_DIR).join("verification.json").exists() {
        &["verify/recheck.json", "verify/verification.json", "verify/convergence.json", "verify/convergence_long.csv"]
    } else if out.join(VERIFY_DIR).join("recheck.json").exists() {
        &["verify/recheck.json"]
    } else {
        &[]
    };
    if !artifacts.is_empty() {
        manifest::append(&out, record, artifacts)?;
    }
    let o = result?;
    Ok(format!(
        "{} pairs verified: decay bound holds, worst distance ratio {:.3e}",
        o.summary.outcomes.len(),
        o.summary.convergence.worst_ratio
    ))
}

pub fn recheck(certificate: &Path, data: &Path, tol: f64) -> Result<String, CliError> {
    let cert = read_certificate(certificate)?;
    let (pair, _) = read_bundle(data)?;
    let report = recheck_certificate(&cert, &pair, tol)?;
    let text = to_json(&report);
    if !report.fingerprint_match {
        eprintln!("warning: data fingerprint differs from the one recorded in the certificate");
    }
    if !report.pass {
        return Err(CliError::Verification(format!("recheck failed:\n{text}")));
    }
    Ok(text)
}
