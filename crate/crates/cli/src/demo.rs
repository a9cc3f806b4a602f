//! The rigid-spacecraft case study run end to end at desk scale.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use deltaiss::plant::{ExcitationSpec, PolySystem};
use deltaiss::synthesis::Certificate;
use nalgebra::DMatrix;
use serde::Serialize;

use crate::commands::{collect_into, synthesize_into, verify_into, CERTIFICATE_FILE, DATA_DIR};
use crate::config::{DataSpec, DictionarySpec, PlantFile, RangeKind, RunConfig, SynthesisSpec, VerifySpec};
use crate::manifest::{self, sha256_hex, RunRecord};
use crate::CliError;

pub const DEMO_SEED: u64 = 7;

pub struct DemoArgs {
    pub out: PathBuf,
    pub force: bool,
    pub seed: Option<u64>,
    pub samples: usize,
    pub split_range: bool,
    pub pairs: Option<usize>,
}

/// `{x1, x2, x3, x1^2, x1x2, x1x3, x2x3}`: the true terms plus irrelevant ones,
/// without `x2^2` and `x3^2`.
pub fn demo_dictionary() -> DictionarySpec {
    DictionarySpec::Explicit {
        nvars: 3,
        exponents: vec![
            vec![1, 0, 0],
            vec![0, 1, 0],
            vec![0, 0, 1],
            vec![2, 0, 0],
            vec![1, 1, 0],
            vec![1, 0, 1],
            vec![0, 1, 1],
        ],
    }
}

pub fn demo_config(samples: usize, seed: u64) -> RunConfig {
    RunConfig {
        plant: Some(PathBuf::from("plant.toml")),
        dictionary: demo_dictionary(),
        data: DataSpec {
            samples,
            tau: 0.1,
            seed,
            x0: Some(vec![0.4, -0.3, 0.2]),
            x0_tilde: Some(vec![-0.2, 0.5, -0.4]),
            excitation: Some(ExcitationSpec::multisine(vec![50.0; 3], seed)),
            ..DataSpec::default()
        },
        synthesis: SynthesisSpec {
            epsilon: 0.9,
            vartheta: 0.44,
            y_degree: None,
            psd_floor: 1e-6,
            theta_max: 10.0,
            gain_bound: 20.0,
            rank_tol: None,
            verify_tol: 1e-6,
            solver: Default::default(),
            retry: Vec::new(),
        },
        verify: VerifySpec::default(),
        output: None,
        base_dir: PathBuf::new(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub reported: String,
    pub achieved: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoSummary {
    pub samples: usize,
    pub epsilon: f64,
    pub vartheta: f64,
    pub a_entries: [f64; 3],
    pub b_entries: [f64; 3],
    pub margin: f64,
    pub alpha_lower: f64,
    pub alpha_upper: f64,
    pub p: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub pairs: usize,
    pub worst_gronwall_margin: f64,
    pub worst_distance_ratio: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub seconds: f64,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl DemoSummary {
    pub fn render(&self) -> String {
        let mut s = format!(
            "spacecraft demo: T = {}, epsilon = {}, vartheta = {} ({:.1} s)\n",
            self.samples, self.epsilon, self.vartheta, self.seconds
        );
        for c in &self.checks {
            s += &format!(
                "  [{}] {}: reported {}, achieved {}\n",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.reported,
                c.achieved
            );
        }
        s += &format!("artifacts in {}", self.out.display());
        s
    }

    fn markdown(&self) -> String {
        let mut s = String::from("# Spacecraft demo\n\n| check | reported | achieved | status |\n|---|---|---|---|\n");
        for c in &self.checks {
            s += &format!(
                "| {} | {} | {} | {} |\n",
                c.name,
                c.reported,
                c.achieved,
                if c.pass { "ok" } else { "FAIL" }
            );
        }
        s
    }
}

fn plant_entries(sys: &PolySystem) -> ([f64; 3], [f64; 3]) {
    // One nonzero per row of A; B is diagonal.
    let a = sys.a();
    let pick = |i: usize| a.row(i).iter().copied().find(|v| *v != 0.0).unwrap_or(0.0);
    ([pick(0), pick(1), pick(2)], [sys.b()[(0, 0)], sys.b()[(1, 1)], sys.b()[(2, 2)]])
}

fn write_inputs(out: &Path, cfg: &RunConfig, force: bool) -> Result<String, CliError> {
    fs::create_dir_all(out)?;
    let plant = PlantFile::Builtin {
        builtin: "spacecraft".into(),
        inertia: Some([200.0, 200.0, 300.0]),
    };
    let cfg_text = toml::to_string(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let plant_text = toml::to_string(&plant).map_err(|e| CliError::Config(e.to_string()))?;
    for (name, text) in [("config.toml", &cfg_text), ("plant.toml", &plant_text)] {
        let p = out.join(name);
        if p.exists() && !force && fs::read_to_string(&p)? != *text {
            return Err(CliError::Config(format!("{} differs; pass --force to overwrite", p.display())));
        }
        fs::write(p, text)?;
    }
    Ok(cfg_text)
}

pub fn run(args: &DemoArgs) -> Result<DemoSummary, CliError> {
    let start = Instant::now();
    let seed = args.seed.unwrap_or(DEMO_SEED);
    let mut cfg = demo_config(args.samples, seed);
    if args.split_range {
        cfg.verify.range = RangeKind::Split;
    }
    if let Some(p) = args.pairs {
        cfg.verify.pairs = p;
    }
    cfg.validate_without_files()?;
    let out = &args.out;
    let cfg_text = write_inputs(out, &cfg, args.force)?;
    let sys = PolySystem::builtin_spacecraft();

    let pair = collect_into(&cfg, &sys, out, args.force)?;
    let (cert, _) = synthesize_into(&cfg.dictionary, &cfg.synthesis, &out.join(DATA_DIR), out, args.force)?;
    let verified = verify_into(&sys, &out.join(CERTIFICATE_FILE), &out.join(DATA_DIR), &cfg.verify, out, args.force)?;

    let (a_entries, b_entries) = plant_entries(&sys);
    let s = &verified.summary;
    let worst_gronwall_margin = s
        .outcomes
        .iter()
        .map(|o| o.gronwall.worst_margin)
        .fold(f64::INFINITY, f64::min);
    let checks = checks(&cert, &verified, a_entries, b_entries, args.samples);
    let pass = checks.iter().all(|c| c.pass);
    let summary = DemoSummary {
        samples: pair.samples(),
        epsilon: cert.epsilon,
        vartheta: cert.vartheta,
        a_entries,
        b_entries,
        margin: cert.solver.margin,
        alpha_lower: cert.alpha_lower,
        alpha_upper: cert.alpha_upper,
        p: rows(&cert.p),
        sigma: rows(&cert.sigma),
        pairs: s.outcomes.len(),
        worst_gronwall_margin,
        worst_distance_ratio: s.convergence.worst_ratio,
        checks,
        pass,
        out: out.clone(),
        seconds: start.elapsed().as_secs_f64(),
    };
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))? + "\n",
    )?;
    fs::write(out.join("summary.md"), summary.markdown())?;
    manifest::append(
        out,
        RunRecord {
            command: "demo-spacecraft".into(),
            seeds: [("excitation".to_string(), seed), ("initial-states".to_string(), cfg.verify.seed)].into(),
            config_sha256: Some(sha256_hex(cfg_text.as_bytes())),
            data_fingerprint: Some(pair.fingerprint()),
            ..Default::default()
        },
        &[
            "config.toml",
            "plant.toml",
            "data/batch.csv",
            "data/sibling.csv",
            "data/meta.json",
            CERTIFICATE_FILE,
            "verify/verification.json",
            "summary.json",
        ],
    )?;
    if !pass {
        return Err(CliError::Verification(summary.render()));
    }
    Ok(summary)
}

fn checks(
    cert: &Certificate,
    v: &crate::commands::VerifyOutcome,
    a: [f64; 3],
    b: [f64; 3],
    samples: usize,
) -> Vec<Check> {
    let close = |x: [f64; 3], y: [f64; 3]| x.iter().zip(&y).all(|(p, q)| (p - q).abs() <= 1e-12);
    let s = &v.summary;
    let all_gronwall = s.outcomes.iter().all(|o| o.gronwall.pass);
    vec![
        Check {
            name: "A entries".into(),
            reported: "(-0.5, 0.5, 0)".into(),
            achieved: format!("({}, {}, {})", a[0], a[1], a[2]),
            pass: close(a, [-0.5, 0.5, 0.0]),
        },
        Check {
            name: "B entries".into(),
            reported: "(1/200, 1/200, 1/300)".into(),
            achieved: format!("({:.6}, {:.6}, {:.6})", b[0], b[1], b[2]),
            pass: close(b, [1.0 / 200.0, 1.0 / 200.0, 1.0 / 300.0]),
        },
        Check {
            name: "feasible certificate".into(),
            reported: "yes at T = 300, epsilon = 0.9, vartheta = 0.44".into(),
            achieved: format!("yes at T = {samples}, margin {:.3e}", cert.solver.margin),
            pass: cert.solver.margin > 0.0,
        },
        Check {
            name: "certificate conditions on data".into(),
            reported: "hold".into(),
            achieved: format!(
                "worst equality {:.2e}, decay eigenvalue {:.3e}",
                v.recheck.worst_equality(),
                v.recheck.decay_max_eig
            ),
            pass: v.recheck.pass,
        },
        Check {
            name: "decay bound along trajectories".into(),
            reported: "all pairs".into(),
            achieved: format!(
                "{}/{} pairs within 5% slack",
                s.outcomes.iter().filter(|o| o.gronwall.pass).count(),
                s.outcomes.len()
            ),
            pass: all_gronwall,
        },
        Check {
            name: "trajectories converge to one another".into(),
            reported: "all pairs".into(),
            achieved: format!("worst terminal/initial distance {:.2e}", s.convergence.worst_ratio),
            pass: s.convergence.worst_ratio <= s.options.convergence_ratio,
        },
    ]
}
