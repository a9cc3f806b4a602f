use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::plant::{Excitation, ExcitationSpec, PlantError};

/// Reference inputs `u_hat(t)` applied on top of the feedback.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceSignal {
    /// `(sin 3t, cos 2t, sin^2 t)`, repeated cyclically when `m != 3`.
    #[default]
    Trig,
    Zero,
    Constant { value: Vec<f64> },
    Excitation { spec: ExcitationSpec },
}

/// A reference signal bound to an input dimension.
#[derive(Debug, Clone)]
pub enum RealizedSignal {
    Trig(usize),
    Constant(DVector<f64>),
    Excitation(Excitation),
}

impl RealizedSignal {
    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            RealizedSignal::Trig(m) => DVector::from_fn(*m, |c, _| match c % 3 {
                0 => (3.0 * t).sin(),
                1 => (2.0 * t).cos(),
                _ => t.sin().powi(2),
            }),
            RealizedSignal::Constant(v) => v.clone(),
            RealizedSignal::Excitation(e) => e.eval(t),
        }
    }
}

impl ReferenceSignal {
    pub fn realize(&self, m: usize, horizon: f64) -> Result<RealizedSignal, PlantError> {
        Ok(match self {
            ReferenceSignal::Trig => RealizedSignal::Trig(m),
            ReferenceSignal::Zero => RealizedSignal::Constant(DVector::zeros(m)),
            ReferenceSignal::Constant { value } => {
                if value.len() != m {
                    return Err(PlantError::Dimension {
                        what: "constant reference",
                        expected: m,
                        found: value.len(),
                    });
                }
                RealizedSignal::Constant(DVector::from_vec(value.clone()))
            }
            ReferenceSignal::Excitation { spec } => RealizedSignal::Excitation(spec.realize(m, horizon)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_signal_values() {
        let s = ReferenceSignal::Trig.realize(3, 1.0).unwrap();
        let t = 0.7f64;
        let u = s.eval(t);
        assert_eq!(u.as_slice(), &[(3.0 * t).sin(), (2.0 * t).cos(), t.sin() * t.sin()]);
        assert_eq!(s.eval(0.0).as_slice(), &[0.0, 1.0, 0.0]);
        assert_eq!(ReferenceSignal::Trig.realize(1, 1.0).unwrap().eval(t).len(), 1);
    }

    #[test]
    fn constant_dimension_checked() {
        let c = ReferenceSignal::Constant { value: vec![1.0, 2.0] };
        assert!(c.realize(3, 1.0).is_err());
        assert_eq!(c.realize(2, 1.0).unwrap().eval(5.0).as_slice(), &[1.0, 2.0]);
    }

    #[test]
    fn serde_tags() {
        let s: ReferenceSignal = serde_json::from_str(r#"{"kind":"trig"}"#).unwrap();
        assert_eq!(s, ReferenceSignal::Trig);
        let z: ReferenceSignal = serde_json::from_str(r#"{"kind":"zero"}"#).unwrap();
        assert_eq!(z, ReferenceSignal::Zero);
    }
}
