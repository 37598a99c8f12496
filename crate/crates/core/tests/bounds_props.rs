use isoquad::bounds::{delta_n, dm, evaluate, lower_margin, transfer_lower_margin, uniform_deviation_bound, BoundParams, EVALUATORS};
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dm_algebraic_rewrite(m in 2.01f64..40.0, c_m in 0.05f64..5.0) {
        let direct = dm(m, c_m).unwrap();
        let rewritten = 2.0 * c_m * (m - 1.0) / (m - 2.0) * (2.0 * c_m).powf(1.0 / (m - 1.0));
        prop_assert!(close(direct, rewritten, 1e-12), "{direct} vs {rewritten}");
    }

    #[test]
    fn delta_n_decreases_when_n_doubles(sx in 0.01f64..5.0, kx in 0.01f64..5.0, p in 1.0f64..1e4, n in 1.0f64..1e6) {
        prop_assert!(delta_n(sx, kx, p, 2.0 * n) < delta_n(sx, kx, p, n));
    }

    #[test]
    fn lower_margin_monotone(m in 2.1f64..12.0, c_m in 0.2f64..3.0, radius in 1.0f64..10.0, dn in 0.0f64..1.0,
                             t in 0.01f64..10.0, n in 10.0f64..1e5, bump in 1.01f64..3.0) {
        let base = lower_margin(m, c_m, radius, dn, t, n).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!(lower_margin(m, c_m, radius * bump, dn, t, n).unwrap() >= base);
        prop_assert!(lower_margin(m, c_m, radius, dn * bump, t, n).unwrap() >= base);
        prop_assert!(lower_margin(m, c_m, radius, dn, t * bump, n).unwrap() >= base);
    }

    #[test]
    fn transfer_margin_increasing_in_radius(m in 2.1f64..12.0, c_m in 0.2f64..3.0, radius in 1.0f64..10.0,
                                            t in 0.01f64..10.0, n in 10.0f64..1e5, p in 2.0f64..1e4) {
        let a = transfer_lower_margin(m, c_m, radius, t, n, p).unwrap();
        let b = transfer_lower_margin(m, c_m, radius * 1.5, t, n, p).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn shared_kernel(m in 2.1f64..12.0, c_m in 0.2f64..3.0, radius in 1.0f64..10.0, t in 0.01f64..10.0, n in 10.0f64..1e5) {
        // with log p = 0 the transfer margin is the plain margin at delta_n = 1 / sqrt(n)
        let a = transfer_lower_margin(m, c_m, radius, t, n, 1.0).unwrap();
        let b = lower_margin(m, c_m, radius, 1.0 / n.sqrt(), t, n).unwrap();
        prop_assert!(close(a, b, 1e-12), "{a} vs {b}");
    }

    #[test]
    fn uniform_deviation_decreases_in_n(radius in 1.0f64..4.0, c in 0.5f64..2.0, ctilde in 0.5f64..2.0, m in 2.5f64..8.0,
                                        p in 2.0f64..500.0, n in 8.0f64..1e5, t in 0.1f64..5.0) {
        let a = uniform_deviation_bound(1.0, radius, c, ctilde, m, p, n, t).unwrap();
        let b = uniform_deviation_bound(1.0, radius, c, ctilde, m, p, n * 1.25, t).unwrap();
        prop_assert!(b < a, "{a} -> {b}");
    }

    #[test]
    fn evaluators_are_deterministic_and_nonnegative(t in 0.1f64..6.0, n in 50.0f64..1e4, p in 3.0f64..200.0) {
        let mut params = BoundParams::default();
        params.t = t;
        params.n = n;
        params.p = p;
        for name in EVALUATORS {
            let (Ok(a), Ok(b)) = (evaluate(name, &params), evaluate(name, &params)) else { continue };
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            // floors are signed lower bounds, not margins
            let signed = ["transfer_floor", "transfer_composite", "normalized_floor"];
            if !a.value.is_nan() && !signed.contains(name) {
                prop_assert!(a.value >= 0.0, "{name} = {}", a.value);
            }
        }
    }

    #[test]
    fn margins_monotone_in_t(t in 0.05f64..6.0, bump in 1.01f64..2.0) {
        let mut lo = BoundParams::default();
        lo.t = t;
        let mut hi = lo.clone();
        hi.t = t * bump;
        for name in ["lower_margin", "lower_margin_p", "transfer_lower_margin", "sigma_tail_gauss"] {
            let a = evaluate(name, &lo).unwrap().value;
            let b = evaluate(name, &hi).unwrap().value;
            prop_assert!(b >= a, "{name}: {a} -> {b}");
        }
    }
}
