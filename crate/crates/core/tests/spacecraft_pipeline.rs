//! Collect, synthesize, recheck and verify on the builtin spacecraft.

use deltaiss::plant::{collect_pair, CollectOptions, ExcitationSpec, PolySystem};
use deltaiss::polyalg::MonomialDictionary;
use deltaiss::synthesis::{synthesize, Certificate, SynthesisConfig};
use deltaiss::verify::{recheck_certificate, verify_pairs, VerifyOptions};
use nalgebra::DVector;

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
fn spacecraft_certificate_verifies_in_closed_loop() {
    let sys = PolySystem::builtin_spacecraft();
    let pair = collect_pair(
        &sys,
        &ExcitationSpec::multisine(vec![50.0; 3], 7),
        &DVector::from_vec(vec![0.4, -0.3, 0.2]),
        &DVector::from_vec(vec![-0.2, 0.5, -0.4]),
        &CollectOptions {
            samples: 100,
            ..Default::default()
        },
    )
    .unwrap();
    let cert = synthesize(&pair, &SynthesisConfig::new(seven_term(), 0.9, 0.44)).unwrap();
    let report = recheck_certificate(&cert, &pair, 1e-6).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(report.fingerprint_match);

    let back = Certificate::from_json(&cert.to_json()).unwrap();
    assert_eq!(back, cert);

    let (summary, traces) = verify_pairs(&sys, &cert, &VerifyOptions::default()).unwrap();
    assert!(summary.pass, "{:#?}", summary.outcomes);
    assert_eq!(traces.len(), 20);
    assert!(summary.convergence.worst_ratio <= 1e-3);
    for tr in &traces {
        assert!(tr.v_series.iter().all(|&v| v >= -1e-12));
        for (x, xt) in tr.x.iter().zip(&tr.x_tilde) {
            let e2 = (x - xt).norm_squared();
            let v = cert.lyapunov(x, xt);
            assert!(cert.alpha_lower * e2 <= v * (1.0 + 1e-12) + 1e-300);
            assert!(v <= cert.alpha_upper * e2 * (1.0 + 1e-12) + 1e-300);
        }
    }
}

#[test]
fn tampered_sigma_fails_recheck() {
    let sys = PolySystem::builtin_spacecraft();
    let pair = collect_pair(
        &sys,
        &ExcitationSpec::multisine(vec![50.0; 3], 3),
        &DVector::from_vec(vec![0.1, 0.2, 0.3]),
        &DVector::from_vec(vec![-0.3, 0.1, -0.1]),
        &CollectOptions {
            samples: 60,
            ..Default::default()
        },
    )
    .unwrap();
    let mut cert = synthesize(&pair, &SynthesisConfig::new(seven_term(), 0.9, 0.44)).unwrap();
    cert.sigma[(1, 2)] += 0.1;
    let r = recheck_certificate(&cert, &pair, 1e-6).unwrap();
    assert!(!r.pass);
    assert!((r.sigma_match[0] - 0.1).abs() < 1e-6 && (r.sigma_match[1] - 0.1).abs() < 1e-6);
}
