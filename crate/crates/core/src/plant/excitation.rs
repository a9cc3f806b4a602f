use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PlantError;

/// Square roots of the first eight primes scaled by 0.8 rad/s; pairwise incommensurate.
pub const DEFAULT_MULTISINE_FREQUENCIES: [f64; 8] = [
    1.131_370_849_898_476,
    1.385_640_646_055_102,
    1.788_854_381_999_832,
    2.116_601_048_851_673,
    2.653_299_832_284_319,
    2.884_441_020_371_192,
    3.298_484_500_494_129,
    3.487_119_154_832_539,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExcitationKind {
    /// Sum of sinusoids with seeded random phases per channel.
    Multisine {
        #[serde(default = "default_frequencies")]
        frequencies: Vec<f64>,
    },
    /// Uniform random levels held for `hold_period`.
    PiecewiseConstantRandom { hold_period: f64 },
    /// A fixed input vector; not exciting, used for negative controls.
    Constant { value: Vec<f64> },
}

fn default_frequencies() -> Vec<f64> {
    DEFAULT_MULTISINE_FREQUENCIES.to_vec()
}

/// Input excitation used during data collection; deterministic given `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    #[serde(flatten)]
    pub kind: ExcitationKind,
    /// Per-channel bound on `|u_c(t)|`.
    pub amplitude: Vec<f64>,
    pub seed: u64,
}

impl ExcitationSpec {
    pub fn multisine(amplitude: Vec<f64>, seed: u64) -> Self {
        ExcitationSpec {
            kind: ExcitationKind::Multisine {
                frequencies: default_frequencies(),
            },
            amplitude,
            seed,
        }
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let amplitude = value.iter().map(|v| v.abs().max(1.0)).collect();
        ExcitationSpec {
            kind: ExcitationKind::Constant { value },
            amplitude,
            seed: 0,
        }
    }

    pub fn validate(&self, m: usize) -> Result<(), PlantError> {
        if self.amplitude.len() != m {
            return Err(PlantError::Dimension {
                what: "excitation amplitude",
                expected: m,
                found: self.amplitude.len(),
            });
        }
        if self.amplitude.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(PlantError::InvalidParameter("excitation amplitude must be positive".into()));
        }
        match &self.kind {
            ExcitationKind::Multisine { frequencies } => {
                if frequencies.is_empty() || frequencies.iter().any(|f| !f.is_finite()) {
                    return Err(PlantError::InvalidParameter("multisine needs finite frequencies".into()));
                }
            }
            ExcitationKind::PiecewiseConstantRandom { hold_period } => {
                if !(*hold_period > 0.0) {
                    return Err(PlantError::InvalidParameter("hold period must be positive".into()));
                }
            }
            ExcitationKind::Constant { value } => {
                if value.len() != m {
                    return Err(PlantError::Dimension {
                        what: "constant input",
                        expected: m,
                        found: value.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Draws the random parts of the signal for `m` channels over `[0, horizon]`.
    pub fn realize(&self, m: usize, horizon: f64) -> Result<Excitation, PlantError> {
        self.validate(m)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let channels = (0..m)
            .map(|c| {
                let amp = self.amplitude[c];
                match &self.kind {
                    ExcitationKind::Multisine { frequencies } => {
                        let phases = frequencies
                            .iter()
                            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                            .collect();
                        Channel::Multisine {
                            scale: amp / frequencies.len() as f64,
                            frequencies: frequencies.clone(),
                            phases,
                        }
                    }
                    ExcitationKind::PiecewiseConstantRandom { hold_period } => {
                        let count = (horizon.max(0.0) / hold_period).ceil() as usize + 2;
                        let levels = (0..count).map(|_| rng.random_range(-amp..=amp)).collect();
                        Channel::Held {
                            hold_period: *hold_period,
                            levels,
                        }
                    }
                    ExcitationKind::Constant { value } => Channel::Constant(value[c]),
                }
            })
            .collect();
        Ok(Excitation { channels })
    }
}

#[derive(Debug, Clone)]
enum Channel {
    Multisine {
        scale: f64,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
    },
    Held {
        hold_period: f64,
        levels: Vec<f64>,
    },
    Constant(f64),
}

impl Channel {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Channel::Multisine {
                scale,
                frequencies,
                phases,
            } => scale * frequencies.iter().zip(phases).map(|(w, p)| (w * t + p).sin()).sum::<f64>(),
            Channel::Held { hold_period, levels } => {
                let k = ((t / hold_period).floor().max(0.0) as usize).min(levels.len() - 1);
                levels[k]
            }
            Channel::Constant(v) => *v,
        }
    }
}

/// A realized excitation signal.
#[derive(Debug, Clone)]
pub struct Excitation {
    channels: Vec<Channel>,
}

impl Excitation {
    pub fn dim(&self) -> usize {
        self.channels.len()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(self.channels.len(), self.channels.iter().map(|c| c.eval(t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multisine_is_bounded_and_deterministic() {
        let spec = ExcitationSpec::multisine(vec![2.0, 0.5], 11);
        let a = spec.realize(2, 10.0).unwrap();
        let b = spec.realize(2, 10.0).unwrap();
        for k in 0..1000 {
            let t = k as f64 * 0.01;
            let (ua, ub) = (a.eval(t), b.eval(t));
            assert_eq!(ua, ub);
            assert!(ua[0].abs() <= 2.0 && ua[1].abs() <= 0.5);
        }
        let other = ExcitationSpec::multisine(vec![2.0, 0.5], 12).realize(2, 10.0).unwrap();
        assert_ne!(a.eval(1.0), other.eval(1.0));
    }

    #[test]
    fn held_levels_step_at_period_boundaries() {
        let spec = ExcitationSpec {
            kind: ExcitationKind::PiecewiseConstantRandom { hold_period: 0.5 },
            amplitude: vec![1.0],
            seed: 3,
        };
        let e = spec.realize(1, 5.0).unwrap();
        assert_eq!(e.eval(0.1), e.eval(0.4));
        assert!(e.eval(0.0)[0].abs() <= 1.0);
        assert_eq!(e.eval(100.0), e.eval(100.0));
    }

    #[test]
    fn validation() {
        assert!(ExcitationSpec::multisine(vec![0.0], 1).validate(1).is_err());
        assert!(ExcitationSpec::multisine(vec![1.0], 1).validate(2).is_err());
        assert!(ExcitationSpec::constant(vec![0.0, 0.0]).validate(2).is_ok());
    }

    #[test]
    fn serde_shape() {
        let spec = ExcitationSpec::multisine(vec![1.0], 5);
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"kind\":\"multisine\""));
        let back: ExcitationSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
        let held: ExcitationSpec =
            serde_json::from_str(r#"{"kind":"piecewise-constant-random","hold_period":0.3,"amplitude":[1.0],"seed":1}"#)
                .unwrap();
        assert!(matches!(held.kind, ExcitationKind::PiecewiseConstantRandom { .. }));
    }
}
