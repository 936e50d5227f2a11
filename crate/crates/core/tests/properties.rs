use calibset::constructions::{
    build_book, build_prism_cone, build_sigma, build_sigma_prime, build_two_edge, complex_structure,
};
use calibset::criterion::{check_edge, feasible_edge_signs, induced_signs, Configuration};
use calibset::deform::{random_diffeo, BoundaryGuard, BumpField, Diffeo, BOUNDARY_SAMPLES};
use calibset::exterior::{
    comass, comass_2form_r4_oracle, evaluate, pushforward_isometry, wedge, ConstantForm, KFrame, LinearIsometry,
    MultiIndex,
};
use calibset::scene::{parse_scene, Scene};
use calibset::surfaces::{boundary_contains, calibration_residual, EDGE_TOLERANCE};
use calibset::{Matrix, Vector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn form_from(n: usize, k: usize, coeffs: &[f64]) -> ConstantForm {
    ConstantForm::new(n, k, MultiIndex::all(n, k).into_iter().zip(coeffs.iter().copied())).unwrap()
}

fn form(n: usize, k: usize) -> impl Strategy<Value = ConstantForm> {
    prop::collection::vec(-2.0..2.0f64, binomial(n, k)).prop_map(move |c| form_from(n, k, &c))
}

fn vector(n: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-1.5..1.5f64, n).prop_map(Vector::from_vec)
}

fn frame(n: usize, k: usize) -> impl Strategy<Value = Vec<Vector>> {
    prop::collection::vec(vector(n), k)
}

/// Orthogonal factor of a random well-conditioned matrix.
fn rotation(n: usize) -> impl Strategy<Value = LinearIsometry> {
    prop::collection::vec(-1.0..1.0f64, n * n).prop_filter_map("singular sample", move |entries| {
        let m = Matrix::from_vec(n, n, entries);
        if m.determinant().abs() < 1e-3 {
            return None;
        }
        let q = m.qr().q();
        LinearIsometry::new(q).ok()
    })
}

fn ev(form: &ConstantForm, vectors: &[Vector]) -> f64 {
    evaluate(form, &KFrame::new(vectors.to_vec())).unwrap()
}

fn max_coeff_diff(a: &ConstantForm, b: &ConstantForm) -> f64 {
    MultiIndex::all(a.dim(), a.degree())
        .iter()
        .map(|i| (a.coefficient(i) - b.coefficient(i)).abs())
        .fold(0.0, f64::max)
}

fn dim_degree() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=5).prop_flat_map(|n| (Just(n), 1..=n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn evaluate_is_alternating(
        (f, vs, i, j) in dim_degree()
            .prop_filter("need two slots", |(_, k)| *k >= 2)
            .prop_flat_map(|(n, k)| (form(n, k), frame(n, k), 0..k, 0..k))
            .prop_filter("distinct slots", |(_, _, i, j)| i != j)
    ) {
        let base = ev(&f, &vs);
        let mut swapped = vs.clone();
        swapped.swap(i, j);
        prop_assert!((ev(&f, &swapped) + base).abs() <= 1e-9 * (1.0 + base.abs()));
        let mut repeated = vs.clone();
        repeated[j] = repeated[i].clone();
        prop_assert!(ev(&f, &repeated).abs() <= 1e-9);
    }

    #[test]
    fn evaluate_is_multilinear(
        (f, vs, w, slot) in dim_degree().prop_flat_map(|(n, k)| (form(n, k), frame(n, k), vector(n), 0..k)),
        a in -2.0..2.0f64,
        b in -2.0..2.0f64,
    ) {
        let mut mixed = vs.clone();
        mixed[slot] = &vs[slot] * a + &w * b;
        let mut with_w = vs.clone();
        with_w[slot] = w;
        let lhs = ev(&f, &mixed);
        let rhs = a * ev(&f, &vs) + b * ev(&f, &with_w);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn wedge_is_graded_commutative(
        (a, b) in (2usize..=5)
            .prop_flat_map(|n| (Just(n), 1..n))
            .prop_flat_map(|(n, k)| (Just(n), Just(k), 1..=n - k))
            .prop_flat_map(|(n, k, l)| (form(n, k), form(n, l)))
    ) {
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        let sign = if (a.degree() * b.degree()) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(max_coeff_diff(&ab, &ba.scaled(sign)) <= 1e-12);
    }

    #[test]
    fn wedge_of_covectors_matches_determinant(
        (a, b, u, v) in (2usize..=5).prop_flat_map(|n| (vector(n), vector(n), vector(n), vector(n)))
    ) {
        let alpha = ConstantForm::covector(&a);
        let beta = ConstantForm::covector(&b);
        let w = wedge(&alpha, &beta).unwrap();
        let oracle = a.dot(&u) * b.dot(&v) - a.dot(&v) * b.dot(&u);
        prop_assert!((ev(&w, &[u, v]) - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
    }

    #[test]
    fn pushforward_identity_and_composition(
        (f, r1, r2, vs) in dim_degree()
            .prop_flat_map(|(n, k)| (form(n, k), rotation(n), rotation(n), frame(n, k)))
    ) {
        let n = f.dim();
        let same = pushforward_isometry(&f, &LinearIsometry::identity(n)).unwrap();
        prop_assert!(max_coeff_diff(&same, &f) <= 1e-15);

        let twice = pushforward_isometry(&pushforward_isometry(&f, &r1).unwrap(), &r2).unwrap();
        let once = pushforward_isometry(&f, &r2.compose(&r1)).unwrap();
        prop_assert!(max_coeff_diff(&twice, &once) <= 1e-12);

        // (R#ω)(Rv₁, …, Rv_k) = ω(v₁, …, v_k)
        let moved: Vec<Vector> = vs.iter().map(|v| r1.apply(v)).collect();
        let lhs = ev(&pushforward_isometry(&f, &r1).unwrap(), &moved);
        let rhs = ev(&f, &vs);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn complex_structures_square_to_minus_one(theta in -10.0..10.0f64) {
        let j = complex_structure(theta);
        let m = j.matrix();
        prop_assert!((m * m + Matrix::identity(4, 4)).amax() <= 1e-14);
        prop_assert!((m.transpose() * m - Matrix::identity(4, 4)).amax() <= 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn comass_is_homogeneous_and_isometry_invariant(
        (f, r) in (2usize..=4)
            .prop_flat_map(|n| (Just(n), 1..n))
            .prop_flat_map(|(n, k)| (form(n, k), rotation(n))),
        c in -3.0..3.0f64,
    ) {
        let base = comass(&f, 8, 1).unwrap();
        let scaled = comass(&f.scaled(c), 8, 1).unwrap();
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-6 * (1.0 + scaled));
        let rotated = comass(&pushforward_isometry(&f, &r).unwrap(), 8, 1).unwrap();
        prop_assert!((rotated - base).abs() <= 1e-6 * (1.0 + base));
    }

    #[test]
    fn comass_bounds_every_unit_frame(f in form(4, 2), vs in frame(4, 2)) {
        let Some(unit) = KFrame::new(vs).orthonormalized() else { return Ok(()) };
        let value = evaluate(&f, &unit).unwrap().abs();
        let oracle = comass_2form_r4_oracle(&f).unwrap();
        prop_assert!(value <= oracle + 1e-12);
        prop_assert!(comass(&f, 8, 2).unwrap() >= value - 1e-9);
    }
}

/// Books of 3 to 5 sheets with well-separated azimuths in [0°, 350°).
fn book_azimuths() -> impl Strategy<Value = Vec<f64>> {
    (3usize..=5).prop_flat_map(|k| {
        prop::collection::vec(10.0..100.0f64, k).prop_map(|gaps| {
            let total: f64 = gaps.iter().sum();
            let mut acc = 0.0;
            gaps.iter()
                .map(|g| {
                    let a = acc;
                    acc += g * 350.0 / total;
                    a.to_radians()
                })
                .collect()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn feasible_signs_are_plus_minus_induced(azimuths in book_azimuths(), rot in 0usize..5) {
        let config = build_book(&azimuths).unwrap();
        let induced = induced_signs(&config, 0, 8).unwrap();
        let feasible = feasible_edge_signs(&config, 0, 8).unwrap();
        let negated: Vec<i8> = induced.iter().map(|s| -s).collect();
        let mut expected = vec![induced.clone(), negated];
        expected.sort();
        let mut got = feasible.clone();
        got.sort();
        prop_assert_eq!(&got, &expected);

        // Relabeling: a cyclic shift of the sheets shifts every feasible vector.
        let k = azimuths.len();
        let shift = rot % k;
        let mut shifted_azimuths = azimuths.clone();
        shifted_azimuths.rotate_left(shift);
        let shifted = build_book(&shifted_azimuths).unwrap();
        let mut relabeled: Vec<Vec<i8>> = feasible
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.rotate_left(shift);
                s
            })
            .collect();
        relabeled.sort();
        let mut direct = feasible_edge_signs(&shifted, 0, 8).unwrap();
        direct.sort();
        prop_assert_eq!(relabeled, direct);
    }

    #[test]
    fn check_edge_ignores_reversed_faces(azimuths in book_azimuths(), which in 0usize..5) {
        let config = build_book(&azimuths).unwrap();
        let base = check_edge(&config, 0, 1e-10, 8).unwrap();
        let target = which % azimuths.len();
        let faces: Vec<_> = config
            .faces()
            .iter()
            .enumerate()
            .map(|(i, f)| if i == target { f.reversed() } else { f.clone() })
            .collect();
        let names = faces.iter().map(|f| f.name.clone()).collect();
        let edge = config.edges()[0].edge.clone();
        let reversed = Configuration::new(faces, vec![(edge, names)]).unwrap();
        let other = check_edge(&reversed, 0, 1e-10, 8).unwrap();
        prop_assert!((base.residual - other.residual).abs() <= 1e-14);
        prop_assert_eq!(base.pass, other.pass);
    }
}

fn builder_configs() -> impl Strategy<Value = Configuration> {
    prop_oneof![
        (2usize..=6).prop_map(|n| build_sigma(n).unwrap()),
        (2usize..=4, 2usize..=4).prop_map(|(n, m)| build_sigma_prime(n, m).unwrap()),
        (2usize..=4, 2usize..=4).prop_map(|(n, m)| build_two_edge(n, m).unwrap()),
        book_azimuths().prop_map(|a| build_book(&a).unwrap()),
        (3usize..=6, 0.5..2.0f64, 0.5..2.0f64).prop_map(|(p, r, h)| build_prism_cone(p, r, h, None).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn builders_produce_calibrated_faces_and_boundary_edges(config in builder_configs()) {
        for face in config.faces() {
            let r = calibration_residual(face, &face.calibration, 64, 5).unwrap();
            prop_assert!(r <= 1e-9, "{}: {}", face.name, r);
        }
        for inc in config.edges() {
            for &f in &inc.faces {
                let face = &config.faces()[f];
                prop_assert!(
                    boundary_contains(face, &inc.edge, EDGE_TOLERANCE, 64).is_some(),
                    "{} not on the boundary of {}", inc.edge.name, face.name
                );
            }
        }
    }

    #[test]
    fn random_diffeos_fix_the_boundary(seed in any::<u64>(), which in 0usize..2) {
        let config = if which == 0 { build_sigma(3).unwrap() } else { build_book(&[0.0, 2.0, 4.0]).unwrap() };
        let guard = BoundaryGuard::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_diffeo(&config, &guard, &mut rng).unwrap();
        for x in config.boundary_samples(BOUNDARY_SAMPLES) {
            prop_assert_eq!(phi.apply(&x, 1.0), x);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences(
        center in vector(4),
        direction in vector(4).prop_filter("nonzero", |d| d.norm() > 0.1),
        radius in 0.2..1.0f64,
        fraction in -1.0..1.0f64,
        offset in vector(4),
        t in 0.0..=1.0f64,
    ) {
        let amplitude = fraction * BumpField::max_amplitude(radius);
        let bump = BumpField::new(center.clone(), radius, direction, amplitude).unwrap();
        let phi = Diffeo::unanchored(4, vec![bump]).unwrap();
        let x = &center + offset * (radius / 1.5 / 2.0);
        let jac = phi.jacobian(&x, t);
        let h = 1e-6;
        for j in 0..4 {
            let mut e = Vector::zeros(4);
            e[j] = h;
            let fd = (phi.apply(&(&x + &e), t) - phi.apply(&(&x - &e), t)) / (2.0 * h);
            for i in 0..4 {
                prop_assert!((jac[(i, j)] - fd[i]).abs() <= 1e-6, "({i},{j}): {} vs {}", jac[(i, j)], fd[i]);
            }
        }
    }

    #[test]
    fn scenes_round_trip(
        tol in 1e-14..1e-2f64,
        coeffs in prop::collection::vec(-5.0..5.0f64, 6),
        seed in any::<u64>(),
        sectors in (20.0..170.0f64, 20.0..170.0f64),
    ) {
        let third = 360.0 - sectors.0 - sectors.1;
        let terms: Vec<String> = MultiIndex::all(4, 2).iter().zip(&coeffs).map(|(i, c)| format!("{i}={c:?}")).collect();
        let text = format!(
            "[settings]\ntol_sum = {tol:?}\nseed = {seed}\n\n[form name=w]\ndim = 4\ncoeff {}\n\n[generate name=b kind=book]\nsectors = {:?} {:?} {:?}\n",
            terms.join(" "), sectors.0, sectors.1, third
        );
        let parsed = match parse_scene(&text) {
            Ok(s) => s,
            // rounding can push the sector sum outside the full-turn tolerance
            Err(_) => return Ok(()),
        };
        let again: Scene = parse_scene(&parsed.serialize()).unwrap();
        prop_assert_eq!(&parsed, &again);
        prop_assert_eq!(parsed.serialize(), again.serialize());
    }
}
