use deltaiss::plant::{collect_pair, lift_states, CollectOptions, DerivativeSource, ExcitationSpec, PolySystem};
use deltaiss::polyalg::{factorize_dictionary, poly_residual, Monomial, MonomialDictionary, PolyMatrix};
use deltaiss::sdp::{check_solution, presolve_eliminate, solve, LmiBlock, SdpProblem, SolveOptions, SolveStatus, Triplet};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_poly(rng: &mut ChaCha8Rng, n: usize, rows: usize, cols: usize, degree: u32) -> PolyMatrix {
    let dict = MonomialDictionary::enumerate(n, 1, degree).unwrap();
    let mut terms = Vec::new();
    for m in std::iter::once(&Monomial::constant(n)).chain(dict.entries()) {
        if rng.random_bool(0.6) {
            terms.push((m.clone(), DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))));
        }
    }
    PolyMatrix::from_terms(n, rows, cols, terms).unwrap()
}

/// Decay-like program `Sigma + Sigma' + eps Theta + I <= 0`, with `|Sigma| <= 10`, tied to an eliminated free block
/// through random equalities that hold at a known point.
fn random_program(seed: u64, eqs: usize) -> SdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = SdpProblem::new();
    p.declare_symmetric("theta", 2).unwrap();
    p.declare_free("sigma", 2, 2).unwrap();
    p.declare_free("y", 3, 4).unwrap();
    let y: DMatrix<f64> = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-1.0..1.0));
    let theta = DMatrix::<f64>::identity(2, 2);
    let sigma = DMatrix::<f64>::identity(2, 2) * -2.0;
    for _ in 0..eqs {
        let mut terms = Vec::new();
        let mut rhs = 0.0;
        for i in 0..3 {
            for j in 0..4 {
                if rng.random_bool(0.5) {
                    let c = rng.random_range(-1.0..1.0);
                    terms.push(Triplet::new("y", i, j, c));
                    rhs += c * y[(i, j)];
                }
            }
        }
        let (i, j) = (rng.random_range(0..2), rng.random_range(0..2));
        let c = rng.random_range(-1.0..1.0);
        if rng.random_bool(0.5) {
            terms.push(Triplet::new("sigma", i, j, c));
            rhs += c * sigma[(i, j)];
        } else {
            terms.push(Triplet::new("theta", i.min(j), i.max(j), c));
            rhs += c * theta[(i, j)];
        }
        if !terms.is_empty() {
            p.add_equality(terms, rhs).unwrap();
        }
    }
    let mut b = LmiBlock::new("decay", 2).with_constant(&DMatrix::identity(2, 2));
    for i in 0..2 {
        for j in 0..2 {
            b = b.term("sigma", i, j, i, j, 1.0).term("sigma", i, j, j, i, 1.0);
        }
        for j in i..2 {
            b = b.term("theta", i, j, i, j, 0.5);
        }
    }
    p.add_lmi(b).unwrap();
    p.add_lmi(
        LmiBlock::new("cap", 2)
            .with_constant(&(DMatrix::identity(2, 2) * -5.0))
            .term("theta", 0, 0, 0, 0, 1.0)
            .term("theta", 0, 1, 0, 1, 1.0)
            .term("theta", 1, 1, 1, 1, 1.0),
    )
    .unwrap();
    let mut gain = LmiBlock::new("gain", 4).with_constant(&(DMatrix::identity(4, 4) * -10.0));
    for i in 0..2 {
        for j in 0..2 {
            gain = gain.term("sigma", i, j, 2 + i, j, 1.0);
        }
    }
    p.add_lmi(gain).unwrap();
    p.add_psd_floor("theta", 1e-6).unwrap();
    p
}

fn equality_matrix(p: &SdpProblem) -> (DMatrix<f64>, DVector<f64>) {
    // Layout: theta upper triangle (3), sigma row-major (4), y row-major (12).
    let index = |t: &Triplet| match t.variable.as_str() {
        "theta" => [[0, 1], [1, 2]][t.row][t.col],
        "sigma" => 3 + 2 * t.row + t.col,
        _ => 7 + 4 * t.row + t.col,
    };
    let mut e = DMatrix::zeros(p.equalities.len(), 19);
    let mut g = DVector::zeros(p.equalities.len());
    for (r, eq) in p.equalities.iter().enumerate() {
        for t in &eq.terms {
            e[(r, index(t))] += t.coefficient;
        }
        g[r] = eq.rhs;
    }
    (e, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dictionary_factors_through_state(n in 1usize..4, lo in 1u32..3, extra in 0u32..2, x in proptest::collection::vec(-3.0f64..3.0, 3)) {
        let dict = MonomialDictionary::enumerate(n, lo, lo + extra).unwrap();
        let aleph = factorize_dictionary(&dict).unwrap();
        let product = aleph.multiply(&PolyMatrix::state_vector(n)).unwrap();
        prop_assert_eq!(poly_residual(&product, &PolyMatrix::dictionary_vector(&dict)).unwrap(), 0.0);
        let at = aleph.evaluate(&x[..n]).unwrap() * DVector::from_column_slice(&x[..n]);
        let direct = dict.evaluate(&x[..n]).unwrap();
        prop_assert!((&at - &direct).amax() <= 1e-12 * (1.0 + direct.amax()));
    }

    #[test]
    fn evaluation_commutes_with_products(seed in any::<u64>(), n in 1usize..4, x in proptest::collection::vec(-1.5f64..1.5, 3)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_poly(&mut rng, n, 2, 3, 2);
        let b = random_poly(&mut rng, n, 3, 2, 2);
        let pt = &x[..n];
        let lhs = a.multiply(&b).unwrap().evaluate(pt).unwrap();
        let rhs = a.evaluate(pt).unwrap() * b.evaluate(pt).unwrap();
        prop_assert!((lhs - rhs).amax() <= 1e-12 * 50.0);
    }

    #[test]
    fn exact_derivatives_match_plant(seed in any::<u64>(), samples in 5usize..30) {
        let sys = PolySystem::builtin_spacecraft();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let xt = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let opts = CollectOptions { samples, substeps: 10, ..Default::default() };
        let pair = collect_pair(&sys, &ExcitationSpec::multisine(vec![20.0; 3], seed), &x0, &xt, &opts).unwrap();
        for b in [pair.batch(), pair.sibling()] {
            let j0 = lift_states(&b.x0, sys.dictionary()).unwrap();
            let model = sys.a() * j0 + sys.b() * &b.u0;
            prop_assert!((&b.x1 - model).amax() <= 1e-10);
        }
    }

    #[test]
    fn elimination_is_sound(seed in any::<u64>(), eqs in 1usize..14) {
        let p = random_program(seed, eqs);
        let sol = solve(&p, &SolveOptions::default()).unwrap();
        prop_assert_eq!(sol.status, SolveStatus::Feasible);
        prop_assert!(sol.stats.max_equality_residual <= 1e-9);
        let th = &sol.assignment["theta"];
        prop_assert_eq!(th[(0, 1)], th[(1, 0)]);
        let report = check_solution(&p, &sol, 1e-8).unwrap();
        prop_assert!(report.pass);

        // Independent recomputation of the equality residual.
        let (e, g) = equality_matrix(&p);
        let s = &sol.assignment["sigma"];
        let y = &sol.assignment["y"];
        let mut z = DVector::zeros(19);
        z[0] = th[(0, 0)];
        z[1] = th[(0, 1)];
        z[2] = th[(1, 1)];
        for i in 0..2 { for j in 0..2 { z[3 + 2 * i + j] = s[(i, j)]; } }
        for i in 0..3 { for j in 0..4 { z[7 + 4 * i + j] = y[(i, j)]; } }
        prop_assert!((e * z - g).amax() <= 1e-9);
    }

    #[test]
    fn reduced_dimension_is_the_nullity(seed in any::<u64>(), eqs in 1usize..14) {
        let p = random_program(seed, eqs);
        let red = presolve_eliminate(&p, 1e-11, 1e-9).unwrap();
        let (e, _) = equality_matrix(&p);
        let sv = e.singular_values();
        let rank = sv.iter().filter(|&&s| s > 1e-9 * sv.max()).count();
        prop_assert_eq!(red.reduced_unknowns(), 19 - rank);
    }

    #[test]
    fn corrupted_solution_is_rejected(seed in any::<u64>(), eqs in 1usize..14, bump in 1e-4f64..1.0) {
        let p = random_program(seed, eqs);
        let mut sol = solve(&p, &SolveOptions::default()).unwrap();
        // Every equality touches y or, failing that, sigma/theta; bump one used unknown.
        let t = p.equalities[0].terms[0].clone();
        let m = sol.assignment.get_mut(&t.variable).unwrap();
        m[(t.row, t.col)] += bump;
        if t.variable == "theta" && t.row != t.col {
            m[(t.col, t.row)] += bump;
        }
        let coef: f64 = p.equalities[0].terms.iter().filter(|s| s.variable == t.variable && s.row == t.row && s.col == t.col).map(|s| s.coefficient).sum();
        prop_assume!(coef.abs() * bump > 1e-6);
        prop_assert!(!check_solution(&p, &sol, 1e-8).unwrap().pass);
    }

    #[test]
    fn monomial_products_add_exponents(a in proptest::collection::vec(0u32..4, 3), b in proptest::collection::vec(0u32..4, 3), x in proptest::collection::vec(-2.0f64..2.0, 3)) {
        let (ma, mb) = (Monomial::new(a), Monomial::new(b));
        let prod = ma.mul(&mb);
        prop_assert_eq!(prod.degree(), ma.degree() + mb.degree());
        let lhs = prod.eval(&x);
        let rhs = ma.eval(&x) * mb.eval(&x);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn forward_difference_is_first_order(a in -1.5f64..1.5, tau in 0.02f64..0.2, x0 in 0.5f64..2.0) {
        prop_assume!(a.abs() > 0.1);
        let dict = MonomialDictionary::enumerate(1, 1, 1).unwrap();
        let sys = PolySystem::new(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, 1.0), dict).unwrap();
        let err = |tau: f64| {
            let opts = CollectOptions { samples: 2, tau, source: DerivativeSource::ForwardDifference, substeps: 200, ..Default::default() };
            let pair = collect_pair(&sys, &ExcitationSpec::constant(vec![0.0]), &DVector::from_element(1, x0), &DVector::from_element(1, 0.0), &opts).unwrap();
            (pair.batch().x1[(0, 0)] - a * x0).abs()
        };
        let ratio = err(tau) / err(tau / 2.0);
        prop_assert!((1.7..=2.3).contains(&ratio), "ratio {}", ratio);
    }
}
