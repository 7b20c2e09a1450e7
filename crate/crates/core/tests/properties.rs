//! Property tests for the structural invariants of the toolkit.

use std::f64::consts::PI;

use muskat_core::lab::{check_hardy, contraction_gap, RatioReport};
use muskat_core::muskat::{apply_t, check_decomposition, AlphaQuadrature, Fault, QuadSpec};
use muskat_core::solver::step;
use muskat_core::spectral::{self, cutoff, hilbert};
use muskat_core::weights::{validate_kappa, Kappa, KappaSamples};
use muskat_core::{Field, Grid};
use proptest::prelude::*;

const N: usize = 32;

fn grid() -> Grid {
    Grid::new(PI, N).unwrap()
}

/// Trigonometric polynomial with modes `1..=max` from the coefficient list.
fn field_from(coeffs: &[(f64, f64)], mean: f64) -> Field {
    Field::from_fn(grid(), |x| {
        mean + coeffs
            .iter()
            .enumerate()
            .map(|(j, (a, b))| {
                let k = (j + 1) as f64;
                a * (k * x).cos() + b * (k * x).sin()
            })
            .sum::<f64>()
    })
}

fn coeffs(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..=max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cutoff_is_an_orthogonal_projection(c in coeffs(15), d in coeffs(15), n in 0.0..16.0f64) {
        let (f, g) = (field_from(&c, 0.3), field_from(&d, -0.2));
        let jf = cutoff(&f, n).unwrap();
        let jjf = cutoff(&jf, n).unwrap();
        prop_assert!(jf.sub(&jjf).max_abs() < 1e-12);
        let jg = cutoff(&g, n).unwrap();
        prop_assert!((jf.inner(&g) - f.inner(&jg)).abs() < 1e-12);
    }

    #[test]
    fn hilbert_is_an_isometry_on_mean_free_fields(c in coeffs(15)) {
        let f = field_from(&c, 0.0);
        let hf = hilbert(&f);
        prop_assert!((hf.l2_norm() - f.l2_norm()).abs() < 1e-12 * (1.0 + f.l2_norm()));
        prop_assert!(hilbert(&hf).add(&f).max_abs() < 1e-12);
    }

    #[test]
    fn t_is_linear_in_its_second_argument(c in coeffs(8), d in coeffs(8), e in coeffs(8), s in -2.0..2.0f64) {
        let q = AlphaQuadrature::new(&grid(), &QuadSpec::default()).unwrap();
        let (f, g, h) = (field_from(&c, 0.0).scale(0.3), field_from(&d, 0.0), field_from(&e, 0.1));
        let lhs = apply_t(&f, &g.add(&h.scale(s)), &q).unwrap();
        let rhs = apply_t(&f, &g, &q).unwrap().add(&apply_t(&f, &h, &q).unwrap().scale(s));
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-11 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn t_commutes_with_grid_translations(c in coeffs(8), d in coeffs(8), m in 0usize..N) {
        let q = AlphaQuadrature::new(&grid(), &QuadSpec::default()).unwrap();
        let (f, g) = (field_from(&c, 0.0).scale(0.4), field_from(&d, 0.0));
        let h = m as f64 * grid().spacing();
        let moved = apply_t(&spectral::shift(&f, h), &spectral::shift(&g, h), &q).unwrap();
        let want = spectral::shift(&apply_t(&f, &g, &q).unwrap(), h);
        prop_assert!(moved.sub(&want).max_abs() < 1e-10 * (1.0 + want.max_abs()));
    }

    #[test]
    fn paralinearization_is_exact(c in coeffs(10), d in coeffs(10), amp in 0.01..2.0f64) {
        let q = AlphaQuadrature::new(&grid(), &QuadSpec::default()).unwrap();
        let (f, g) = (field_from(&c, 0.0).scale(amp), field_from(&d, 0.5));
        let r = check_decomposition(&f, &g, &q, Fault::None).unwrap();
        prop_assert!(r.residual <= 1e-9 * (1.0 + r.scale));
    }

    #[test]
    fn steps_stay_in_the_band(c in coeffs(10), n in 2.0..10.0f64, dt in 0.01..0.3f64) {
        let q = AlphaQuadrature::new(&grid(), &QuadSpec::default()).unwrap();
        let f = cutoff(&field_from(&c, 0.0).scale(0.2), n).unwrap();
        let next = step(&f, dt, n, &q).unwrap();
        prop_assert!(next.sub(&cutoff(&next, n).unwrap()).l2_norm() <= 1e-13);
    }

    #[test]
    fn contraction_lemma_holds(x in -1e3..1e3f64, y in -1e3..1e3f64, z in -1e3..1e3f64) {
        prop_assert!(contraction_gap(x, y, z) >= -1e-12 * (1.0 + x.abs() + y.abs() + z.abs()));
        prop_assert!(contraction_gap(x, x + 1e-7 * y, x + 1e-7 * z) >= -1e-12);
    }

    #[test]
    fn hardy_ratio_is_at_most_one(heights in prop::collection::vec(0.0..3.0f64, 1..6)) {
        let h = heights.clone();
        let u = move |a: f64| h[(a.floor() as usize).min(h.len() - 1)];
        let breaks: Vec<f64> = (1..heights.len()).map(|i| i as f64).collect();
        let r = check_hardy(&u, heights.len() as f64, &breaks).unwrap();
        if let Some(ratio) = r.ratio {
            prop_assert!(ratio <= 1.0 + 1e-6);
        } else {
            prop_assert!(heights.iter().all(|h| *h == 0.0));
        }
    }

    #[test]
    fn power_log_weights_are_admissible(a in 0.05..1.0f64) {
        let k = Kappa::power_log(a).unwrap();
        let samples = KappaSamples { per_decade: 4, ..KappaSamples::default() };
        prop_assert!(validate_kappa(&k, &samples).admissible());
    }

    #[test]
    fn reports_account_for_every_sample(sides in prop::collection::vec((0.0..5.0f64, prop::sample::select(vec![0.0, 0.5, 2.0])), 0..40)) {
        let r = RatioReport::from_sides("p", None, sides.clone());
        prop_assert_eq!(r.samples.len() + r.excluded, sides.len());
        prop_assert!(r.samples.iter().all(|s| s.rhs > 0.0 && s.ratio <= r.max_ratio));
    }
}
