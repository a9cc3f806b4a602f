//! Closed-loop data identity on randomly drawn plants.

use deltaiss::plant::{collect_pair, BatchPair, CollectOptions, ExcitationSpec, PolySystem};
use deltaiss::polyalg::{poly_residual, MonomialDictionary, PolyMatrix};
use deltaiss::synthesis::{synthesize, SynthesisConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Plant whose nonlinear columns lie in the range of `B`, so a constant closed loop exists.
fn random_plant(rng: &mut ChaCha8Rng) -> (PolySystem, BatchPair) {
    loop {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=2usize.min(n));
        let degree = rng.random_range(1..=3u32);
        let dict = MonomialDictionary::enumerate(n, 1, degree).unwrap();
        let big_n = dict.len();
        let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let c = DMatrix::from_fn(m, big_n - n, |_, _| rng.random_range(-0.1..0.1));
        // Nearly skew, so trajectories neither blow up nor contract onto each other.
        let r = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let lin = (&r - r.transpose()) + DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.1..0.1));
        let nonlin = &b * c;
        let a = DMatrix::from_fn(n, big_n, |i, j| if j < n { lin[(i, j)] } else { nonlin[(i, j - n)] });
        let sys = PolySystem::new(a, b, dict).unwrap();
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-0.8..0.8));
        let xt = DVector::from_fn(n, |_, _| rng.random_range(-0.8..0.8));
        let opts = CollectOptions {
            samples: 150,
            tau: 0.1,
            substeps: 20,
            ..Default::default()
        };
        let exc = ExcitationSpec::multisine(vec![2.0; m], rng.random());
        match collect_pair(&sys, &exc, &x0, &xt, &opts) {
            Ok(pair) if pair.batch().x0.iter().chain(pair.sibling().x0.iter()).all(|v| v.abs() < 50.0) => {
                return (sys, pair)
            }
            _ => continue,
        }
    }
}

#[test]
fn closed_loop_identity_on_random_plants() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for k in 0..25 {
        let (sys, pair) = random_plant(&mut rng);
        let dict = sys.dictionary().clone();
        let cfg = SynthesisConfig::new(dict.clone(), 0.5, 0.1);
        let cert = match synthesize(&pair, &cfg) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("plant {k} (n={}, m={}, N={}): {e}", sys.n(), sys.m(), dict.len()));
                continue;
            }
        };
        let n = sys.n();
        let gx = cert.y.right_mul(&cert.p).unwrap().multiply(&PolyMatrix::state_vector(n)).unwrap();
        let lhs = PolyMatrix::dictionary_vector(&dict)
            .left_mul(sys.a())
            .unwrap()
            .add(&gx.left_mul(pair.u0()).unwrap().left_mul(sys.b()).unwrap())
            .unwrap();
        let rhs = gx.left_mul(&pair.batch().x1).unwrap();
        worst = worst.max(poly_residual(&lhs, &rhs).unwrap());
    }
    assert!(failures.is_empty(), "{failures:#?}");
    assert!(worst <= 1e-8, "worst residual {worst}");
}
