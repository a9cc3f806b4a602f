use nalgebra::{DMatrix, DVector};

use super::*;
use crate::plant::{collect_pair, CollectOptions, ExcitationSpec, PolySystem};
use crate::polyalg::{poly_residual, Monomial};

fn scalar_pair(samples: usize) -> (PolySystem, BatchPair) {
    let dict = MonomialDictionary::enumerate(1, 1, 1).unwrap();
    let sys = PolySystem::new(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0), dict).unwrap();
    let opts = CollectOptions {
        samples,
        tau: 0.05,
        ..Default::default()
    };
    let pair = collect_pair(
        &sys,
        &ExcitationSpec::multisine(vec![1.0], 4),
        &DVector::from_element(1, 0.5),
        &DVector::from_element(1, -0.5),
        &opts,
    )
    .unwrap();
    (sys, pair)
}

fn spacecraft_pair(samples: usize) -> BatchPair {
    let sys = PolySystem::builtin_spacecraft();
    let opts = CollectOptions {
        samples,
        ..Default::default()
    };
    collect_pair(
        &sys,
        &ExcitationSpec::multisine(vec![50.0; 3], 7),
        &DVector::from_vec(vec![0.4, -0.3, 0.2]),
        &DVector::from_vec(vec![-0.2, 0.5, -0.4]),
        &opts,
    )
    .unwrap()
}

fn seven_term() -> MonomialDictionary {
    MonomialDictionary::from_exponents(
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
    .unwrap()
}

#[test]
fn scalar_program_has_hand_instantiated_shape() {
    let (_, pair) = scalar_pair(12);
    let cfg = SynthesisConfig::new(MonomialDictionary::enumerate(1, 1, 1).unwrap(), 0.5, 0.1);
    let j0 = pair.batch().x0.clone();
    let jt = pair.sibling().x0.clone();
    let aleph = factorize_dictionary(&cfg.dict).unwrap();
    let asm = assemble_program(&pair, &j0, &jt, &aleph, &cfg).unwrap();
    assert_eq!(asm.basis, vec![Monomial::constant(1)]);
    assert_eq!(asm.problem.num_unknowns(), 1 + 1 + 12);
    assert_eq!(asm.problem.equalities.len(), 4);
    // J0 Y - Theta = 0
    let first = &asm.problem.equalities[0];
    assert_eq!(first.terms.len(), 13);
    assert_eq!(first.terms.last().unwrap().variable, THETA);
    assert_eq!(first.terms.last().unwrap().coefficient, -1.0);
    let decay = &asm.problem.lmi_blocks[0];
    assert_eq!(decay.constant, vec![0.1]);
}

#[test]
fn scalar_certificate_matches_hand_derivation() {
    let (_, pair) = scalar_pair(30);
    let cfg = SynthesisConfig::new(MonomialDictionary::enumerate(1, 1, 1).unwrap(), 0.5, 0.1);
    let cert = synthesize(&pair, &cfg).unwrap();
    let theta = cert.theta[(0, 0)];
    let sigma = cert.sigma[(0, 0)];
    assert!(theta > 0.0);
    assert!(2.0 * sigma + 0.1 + 0.5 * theta <= 1e-9);
    let gain = cert.k.evaluate(&[0.0]).unwrap()[(0, 0)];
    assert_eq!(cert.k.max_degree(), 0);
    // a + K = Sigma / Theta for exact data
    assert!((1.0 + gain - sigma / theta).abs() < 1e-8);
    assert!(1.0 + gain <= -(0.1 + 0.5 * theta) / (2.0 * theta) + 1e-9);
    let report = cert.residual_report.as_ref().unwrap();
    assert!(report.pass);
}

#[test]
fn controller_evaluation() {
    let (_, pair) = scalar_pair(30);
    let cfg = SynthesisConfig::new(MonomialDictionary::enumerate(1, 1, 1).unwrap(), 0.5, 0.1);
    let mut cert = synthesize(&pair, &cfg).unwrap();
    let u_hat = DVector::from_element(1, 0.3);
    assert_eq!(controller_evaluate(&cert, &DVector::zeros(1), &u_hat).unwrap(), u_hat);
    cert.k = PolyMatrix::constant(1, DMatrix::from_element(1, 1, -2.0));
    let u = controller_evaluate(&cert, &DVector::from_element(1, 3.0), &DVector::zeros(1)).unwrap();
    assert_eq!(u[0], -6.0);
    assert!(controller_evaluate(&cert, &DVector::zeros(2), &u_hat).is_err());
}

#[test]
fn spacecraft_unknown_count() {
    let pair = spacecraft_pair(300);
    let cfg = SynthesisConfig::new(seven_term(), 0.9, 0.44);
    let j0 = lift_states(&pair.batch().x0, &cfg.dict).unwrap();
    let jt = lift_states(&pair.sibling().x0, &cfg.dict).unwrap();
    let aleph = factorize_dictionary(&cfg.dict).unwrap();
    let asm = assemble_program(&pair, &j0, &jt, &aleph, &cfg).unwrap();
    assert_eq!(asm.basis.len(), 4);
    assert_eq!(asm.problem.num_unknowns(), 3600 + 6 + 9);
}

#[test]
fn constant_y_is_too_low_for_quadratic_dictionary() {
    let pair = spacecraft_pair(40);
    let mut cfg = SynthesisConfig::new(seven_term(), 0.9, 0.44);
    cfg.y_degree = Some(0);
    assert!(matches!(
        synthesize(&pair, &cfg),
        Err(SynthesisError::DegreeTooLow { y_degree: 0, required: 1 })
    ));
}

#[test]
fn constant_input_fails_richness() {
    let sys = PolySystem::builtin_spacecraft();
    let pair = collect_pair(
        &sys,
        &ExcitationSpec::constant(vec![0.0; 3]),
        &DVector::zeros(3),
        &DVector::from_vec(vec![0.0, 0.0, 1e-3]),
        &CollectOptions {
            samples: 60,
            ..Default::default()
        },
    )
    .unwrap();
    let cfg = SynthesisConfig::new(seven_term(), 0.9, 0.44);
    assert!(matches!(synthesize(&pair, &cfg), Err(SynthesisError::RankPreconditionViolated(_))));
}

#[test]
fn huge_epsilon_is_infeasible() {
    let (_, pair) = scalar_pair(30);
    let cfg = SynthesisConfig::new(MonomialDictionary::enumerate(1, 1, 1).unwrap(), 1e6, 0.1);
    match synthesize(&pair, &cfg) {
        Err(SynthesisError::SdpInfeasible { margin, .. }) => assert!(margin < 0.0),
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn retry_grid_recovers_from_infeasible_point() {
    let (_, pair) = scalar_pair(30);
    let cfg = SynthesisConfig::new(MonomialDictionary::enumerate(1, 1, 1).unwrap(), 1e6, 0.1);
    let (res, attempts) = synthesize_with_retry(&pair, &cfg, &[(1e5, 0.1), (0.5, 0.1)]);
    let cert = res.unwrap();
    assert_eq!(cert.epsilon, 0.5);
    assert_eq!(attempts.len(), 3);
    assert!(attempts[..2].iter().all(|a| a.outcome.starts_with("infeasible")));
}

#[test]
fn spacecraft_certificate_is_verified() {
    let pair = spacecraft_pair(120);
    let cfg = SynthesisConfig::new(seven_term(), 0.9, 0.44);
    let cert = synthesize(&pair, &cfg).unwrap();
    let r = cert.residual_report.as_ref().unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.decay_max_eig < 0.0);
    assert!(cert.alpha_lower > 0.0 && cert.alpha_lower <= cert.alpha_upper);

    // u at a point against a term-by-term expansion of U0 Y(x) P x.
    let x = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    let u = controller_evaluate(&cert, &x, &DVector::zeros(3)).unwrap();
    let mut naive = DVector::zeros(3);
    for (alpha, c) in cert.y.terms() {
        naive += pair.u0() * c * &cert.p * &x * alpha.eval(x.as_slice());
    }
    assert!((u - naive).amax() < 1e-9);

    let back = Certificate::from_json(&cert.to_json()).unwrap();
    assert_eq!(back, cert);
    assert_eq!(back.to_json(), cert.to_json());
    let again = condition_residuals(&back, &pair, cfg.verify_tol).unwrap();
    assert!(again.distance(r) <= 1e-10);
}

#[test]
fn closed_loop_identity_holds_for_known_plant() {
    let pair = spacecraft_pair(120);
    let sys = PolySystem::builtin_spacecraft();
    let dict = seven_term();
    let cfg = SynthesisConfig::new(dict.clone(), 0.9, 0.44);
    let cert = synthesize(&pair, &cfg).unwrap();
    let g = cert.y.right_mul(&cert.p).unwrap();
    let gx = g.multiply(&PolyMatrix::state_vector(3)).unwrap();
    let a = sys.a_over(&dict).unwrap();
    let lhs = PolyMatrix::dictionary_vector(&dict)
        .left_mul(&a)
        .unwrap()
        .add(&gx.left_mul(pair.u0()).unwrap().left_mul(sys.b()).unwrap())
        .unwrap();
    let rhs = gx.left_mul(&pair.batch().x1).unwrap();
    assert!(poly_residual(&lhs, &rhs).unwrap() < 1e-8);
}

#[test]
fn conserved_difference_blocks_shared_map() {
    // With J1 = J2, x3 - x3~ is constant, so rows x3, x3^2 of both lifts are
    // linearly dependent and a shared Y forces a zero row in Theta.
    let pair = spacecraft_pair(80);
    let cfg = SynthesisConfig::new(MonomialDictionary::enumerate(3, 1, 2).unwrap(), 0.9, 0.44);
    let d = two_map_diagnostic(&pair, &cfg).unwrap();
    assert_eq!(d.shared_status, SolveStatus::Infeasible);
    assert_eq!(d.two_map_status, SolveStatus::Feasible);
    assert!(d.two_map_margin > 0.0 && d.shared_margin < 0.0);

    let d7 = two_map_diagnostic(&pair, &SynthesisConfig::new(seven_term(), 0.9, 0.44)).unwrap();
    assert_eq!(d7.shared_status, SolveStatus::Feasible);
    assert!(d7.two_map_margin >= d7.shared_margin - 1e-6);
}

#[test]
fn invalid_parameters_rejected() {
    let (_, pair) = scalar_pair(10);
    let dict = MonomialDictionary::enumerate(1, 1, 1).unwrap();
    for (e, v) in [(0.0, 0.1), (0.5, -1.0), (f64::NAN, 0.1)] {
        assert!(matches!(
            synthesize(&pair, &SynthesisConfig::new(dict.clone(), e, v)),
            Err(SynthesisError::InvalidConfig(_))
        ));
    }
}
