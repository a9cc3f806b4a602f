use nalgebra::DVector;

use super::{PlantError, PolySystem};

/// Dense trajectory: states and vector-field values at every integrator node.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub derivatives: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// Classical fixed-step RK4. Returns node times and states (including `x0`).
pub fn rk4<F>(field: F, x0: &DVector<f64>, t0: f64, step: f64, steps: usize) -> Result<(Vec<f64>, Vec<DVector<f64>>), PlantError>
where
    F: Fn(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    times.push(t0);
    states.push(x.clone());
    let h = step;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let k1 = field(t, &x);
        let k2 = field(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = field(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = field(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let t_next = t0 + (k + 1) as f64 * h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::NonFiniteState { time: t_next });
        }
        times.push(t_next);
        states.push(x.clone());
    }
    Ok((times, states))
}

pub(crate) fn step_count(horizon: f64, step: f64) -> Result<usize, PlantError> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(PlantError::InvalidParameter(format!("integration step must be positive, got {step}")));
    }
    if !(horizon >= step) {
        return Err(PlantError::InvalidParameter(format!(
            "horizon {horizon} must be at least one step ({step})"
        )));
    }
    Ok((horizon / step).round() as usize)
}

/// Open-loop simulation from `t = 0`.
pub fn simulate<U>(sys: &PolySystem, input: U, x0: &DVector<f64>, horizon: f64, step: f64) -> Result<Trajectory, PlantError>
where
    U: Fn(f64) -> DVector<f64>,
{
    simulate_from(sys, input, x0, 0.0, horizon, step)
}

/// Open-loop simulation starting at `t0`; derivatives are the exact vector field.
pub fn simulate_from<U>(
    sys: &PolySystem,
    input: U,
    x0: &DVector<f64>,
    t0: f64,
    horizon: f64,
    step: f64,
) -> Result<Trajectory, PlantError>
where
    U: Fn(f64) -> DVector<f64>,
{
    if x0.len() != sys.n() {
        return Err(PlantError::Dimension {
            what: "initial state",
            expected: sys.n(),
            found: x0.len(),
        });
    }
    let u_probe = input(t0);
    if u_probe.len() != sys.m() {
        return Err(PlantError::Dimension {
            what: "input",
            expected: sys.m(),
            found: u_probe.len(),
        });
    }
    let steps = step_count(horizon, step)?;
    let (times, states) = rk4(|t, x| sys.vector_field(x, &input(t)), x0, t0, step, steps)?;
    let derivatives = times
        .iter()
        .zip(&states)
        .map(|(&t, x)| sys.vector_field(x, &input(t)))
        .collect();
    Ok(Trajectory {
        times,
        states,
        derivatives,
    })
}
