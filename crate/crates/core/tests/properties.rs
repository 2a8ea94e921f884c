use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use osclab::instance::ProblemInstance;
use osclab::kernel::{
    classify_region, eval_i, kernel_eval, kernel_packets, scales, stationary_samples, BumpFamilySpec, PacketTerm, QuadPolicy, Region,
    TestFunction, TestFunctionFamily, FamilyKind,
};
use osclab::tiling::build_tiling;
use osclab::window::Window;

fn even() -> &'static ProblemInstance {
    static I: OnceLock<ProblemInstance> = OnceLock::new();
    I.get_or_init(|| ProblemInstance::builtin("paper-even-d2").unwrap())
}

fn window() -> &'static Arc<Window> {
    static W: OnceLock<Arc<Window>> = OnceLock::new();
    W.get_or_init(|| Arc::new(Window::default_window().unwrap()))
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn scales_never_exceed_lambda_scale(lambda in 1.0f64..1e6, xi in prop::collection::vec(-1e7f64..1e7, 4)) {
        let s = scales(lambda, &xi);
        for r in &s.r {
            prop_assert!(*r <= lambda.powf(-0.5) * (1.0 + 1e-15));
        }
        prop_assert!(s.r_min <= s.r_max);
        prop_assert!(s.r_tilde <= s.r_min);
    }

    #[test]
    fn region_split_is_exhaustive(lambda in 1.0f64..1e5, xi in prop::collection::vec(-1e6f64..1e6, 4), c in 0.01f64..0.99) {
        let s = scales(lambda, &xi);
        let region = classify_region(lambda, &xi, c).unwrap();
        prop_assert_eq!(region == Region::Xi1, s.r_min <= c * s.r_max);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn functional_is_homogeneous_in_each_slot(seed in 0u64..1000, slot in 0usize..4, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let inst = even();
        let spec = BumpFamilySpec::random(inst, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let policy = QuadPolicy { min_points: 16, ..Default::default() };
        let fam = spec.at(30.0);
        let base = eval_i(inst, &fam, 30.0, &policy).unwrap().value;
        let alpha = Complex64::new(re, im);
        let mut scaled = fam.clone();
        scaled.funcs[slot].scale *= alpha;
        let v = eval_i(inst, &scaled, 30.0, &policy).unwrap().value;
        prop_assert!(rel(v, alpha * base) < 1e-12);
    }

    #[test]
    fn conjugation_reverses_lambda(seed in 0u64..1000) {
        let inst = even();
        let spec = BumpFamilySpec::random(inst, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let policy = QuadPolicy { min_points: 16, ..Default::default() };
        let fam = spec.at(40.0);
        let v = eval_i(inst, &fam, 40.0, &policy).unwrap().value;
        let w = eval_i(inst, &fam.conj(), -40.0, &policy).unwrap().value;
        prop_assert!(rel(w, v.conj()) < 1e-12);
    }

    #[test]
    fn kernel_is_the_functional_of_packets(seed in 0u64..1000) {
        let inst = even();
        let lambda = 100.0;
        let t = build_tiling(lambda, 8.0 * lambda).unwrap();
        let s = &stationary_samples(inst, &t, lambda, 1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()[0];
        let policy = QuadPolicy::default();
        let k = kernel_eval(inst, window(), &t, &s.y, &s.xi, lambda, &policy).unwrap().value;
        let funcs = kernel_packets(&t, &s.xi)
            .unwrap()
            .iter()
            .zip(&s.y)
            .map(|(p, &y)| TestFunction::packets(vec![PacketTerm { coeff: Complex64::new(1.0, 0.0), shift: y, cell: p.cell }], window().clone()))
            .collect();
        let fam = TestFunctionFamily::new(FamilyKind::User, funcs);
        let i = eval_i(inst, &fam, lambda, &QuadPolicy { min_points: 16, ..policy }).unwrap().value;
        prop_assert!(rel(i, k) < 1e-3, "kernel {k} functional {i}");
    }
}
