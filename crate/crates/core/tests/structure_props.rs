use gfol_core::linalg::{self, max_abs};
use gfol_core::structures::{
    check_axioms, check_metric_compat, check_weak_almost_contact, compatible_metric_from_frame,
    perturb_structure, random_commuting_perturbation, ClassFlags, FramedStructure, StructureClass,
    StructureKind,
};
use gfol_core::{builtin, classify, LieFoliationModel};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn classical(name: &str, params: &[f64]) -> (LieFoliationModel, FramedStructure) {
    let m = builtin(name, params).unwrap();
    let s = FramedStructure::canonical(&m, gfol_core::structures::default_kind(&m)).unwrap();
    assert!(s.is_classical());
    (m, s)
}

/// The identities derived from the composition law, each recomputed directly.
fn derived_identities(s: &FramedStructure, model: &LieFoliationModel) -> (f64, usize) {
    let phi = s.phi();
    let mut worst = max_abs(&(&s.q * phi - phi * &s.q));
    for (x, e) in s.xis.iter().zip(&s.etas) {
        worst = worst
            .max((phi * x).amax())
            .max((e.transpose() * phi).amax());
        worst = worst.max((&s.q * x - x).amax());
    }
    let rank = linalg::rank(phi);
    assert_eq!(model.horizontal().len() % 2, 0);
    (worst, rank)
}

fn any_flags() -> impl Strategy<Value = ClassFlags> {
    prop::array::uniform6(any::<bool>()).prop_map(|b| ClassFlags {
        axioms: b[0],
        metric: b[1],
        contact: b[2],
        closed: b[3],
        df: b[4],
        normal: b[5],
    })
}

fn any_kind() -> impl Strategy<Value = StructureKind> {
    prop_oneof![
        Just(StructureKind::Contact),
        Just(StructureKind::PContact),
        Just(StructureKind::FStructure),
        Just(StructureKind::ParaPhi),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn perturbed_heisenberg_keeps_all_identities(seed in any::<u64>(), scale in 0.01f64..0.45) {
        let (m, s) = classical("heisenberg", &[1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dphi = random_commuting_perturbation(&m, &s, scale, true, &mut rng).unwrap();
        let w = perturb_structure(&s, &dphi, &m).unwrap();
        prop_assert!(check_weak_almost_contact(&w, &m).unwrap().passes());
        prop_assert!(check_metric_compat(&w, &m).passes());
        let (res, rank) = derived_identities(&w, &m);
        prop_assert!(res <= 1e-10);
        prop_assert_eq!(rank, 2);
        // Q is self-adjoint and φ skew for the identity metric.
        prop_assert!(linalg::asymmetry(&w.q) <= 1e-12);
        prop_assert!(linalg::skew_residual(w.phi()) <= 1e-12);
    }

    #[test]
    fn unitary_perturbations_in_higher_dimension(seed in any::<u64>(), scale in 0.01f64..0.3) {
        let (m, s) = classical("heisenberg", &[1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dphi = random_commuting_perturbation(&m, &s, scale, true, &mut rng).unwrap();
        let w = perturb_structure(&s, &dphi, &m).unwrap();
        prop_assert!(check_weak_almost_contact(&w, &m).unwrap().passes());
        prop_assert!(check_metric_compat(&w, &m).passes());
        let (res, rank) = derived_identities(&w, &m);
        prop_assert!(res <= 1e-10);
        prop_assert_eq!(rank, 6);
        for &v in m.vertical() {
            prop_assert_eq!(w.q[(v, v)], 1.0);
        }
    }

    #[test]
    fn non_skew_commuting_perturbations_keep_the_axioms(seed in any::<u64>(), scale in 0.01f64..0.3) {
        let (m, s) = classical("s_model", &[2.0, 2.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dphi = random_commuting_perturbation(&m, &s, scale, false, &mut rng).unwrap();
        let w = perturb_structure(&s, &dphi, &m).unwrap();
        prop_assert!(check_axioms(&w, &m).passes());
        for &v in m.vertical() {
            prop_assert_eq!(w.q[(v, v)], 1.0);
        }
    }

    #[test]
    fn classification_is_monotone(kind in any_kind(), flags in any_flags(), which in 0usize..6) {
        let before = StructureClass::from_flags(kind, flags);
        let mut weaker = flags;
        match which {
            0 => weaker.axioms = false,
            1 => weaker.metric = false,
            2 => weaker.contact = false,
            3 => weaker.closed = false,
            4 => weaker.df = false,
            _ => weaker.normal = false,
        }
        let after = StructureClass::from_flags(kind, weaker);
        prop_assert!(after.rank() <= before.rank(), "{:?} -> {:?}", before, after);
    }

    #[test]
    fn conjugated_complex_structures_get_a_compatible_metric(
        d in prop::collection::vec(0.2f64..3.0, 4),
        off in -0.9f64..0.9,
    ) {
        let j = DMatrix::from_row_slice(4, 4, &[
            0.0, -1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, -1.0,
            0.0, 0.0, 1.0, 0.0,
        ]);
        let mut frame = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        frame[(0, 2)] = off;
        let phi = &frame * &j * frame.clone().try_inverse().unwrap();
        let g = compatible_metric_from_frame(&phi, &frame).unwrap();
        let gram = frame.transpose() * &g * &frame;
        prop_assert!(max_abs(&(gram - DMatrix::identity(4, 4))) <= 1e-10);
        let q = -(&phi * &phi);
        prop_assert!(max_abs(&(phi.transpose() * &g * &phi - &g * q)) <= 1e-9);
        prop_assert!(linalg::skew_residual(&(&g * &phi)) <= 1e-9);
    }
}

#[test]
fn q_is_identity_on_the_vertical_distribution_for_every_builtin() {
    for (name, params) in [
        ("heisenberg", vec![2.0, 3.0]),
        ("quat_heisenberg", vec![2.0]),
        ("s_model", vec![2.0, 3.0, 1.5]),
        ("para_model", vec![2.0, 2.0, 0.7]),
        ("su2", vec![]),
    ] {
        let m = builtin(name, &params).unwrap();
        let s = FramedStructure::canonical(&m, gfol_core::structures::default_kind(&m)).unwrap();
        for &v in m.vertical() {
            for &u in m.vertical() {
                assert_eq!(s.q[(v, u)], if u == v { 1.0 } else { 0.0 }, "{name}");
            }
        }
        // Compatible structures: Q self-adjoint and φ skew, asserted on matrices.
        let g = m.metric();
        assert!(check_metric_compat(&s, &m).passes(), "{name}");
        assert!(linalg::asymmetry(&(g * &s.q)) <= 1e-12, "{name}");
        for phi in &s.phis {
            assert!(linalg::skew_residual(&(g * phi)) <= 1e-12, "{name}");
        }
    }
}

#[test]
fn builtin_labels() {
    let expect = [
        ("heisenberg", vec![1.0], "Sasakian (classical)"),
        (
            "heisenberg",
            vec![2.0, 3.0],
            "weak contact metric, non-normal",
        ),
        (
            "s_model",
            vec![1.0, 2.0, 1.0],
            "metric S-structure (classical)",
        ),
        ("s_model", vec![1.0, 2.0, 3.0], "weak almost S"),
        (
            "quat_heisenberg",
            vec![1.0],
            "almost p-contact metric (classical)",
        ),
        ("quat_heisenberg", vec![2.0], "not a weak structure"),
        ("para_model", vec![1.0, 1.0], "para-S (classical)"),
        ("para_model", vec![1.0, 1.0, 2.0], "weak almost para-S"),
    ];
    for (name, params, label) in expect {
        let m = builtin(name, &params).unwrap();
        let s = FramedStructure::canonical(&m, gfol_core::structures::default_kind(&m)).unwrap();
        assert_eq!(classify(&s, &m).label, label, "{name} {params:?}");
    }
}
