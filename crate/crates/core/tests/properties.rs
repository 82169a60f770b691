use dualdiv::dividend::DividendSolution;
use dualdiv::injection::optimal_barrier_b;
use dualdiv::{Error, LevyModel, PhaseType, ScaleFunction};
use num_complex::Complex64;
use proptest::prelude::*;

const Q: f64 = 0.05;

fn phase_type() -> impl Strategy<Value = PhaseType> {
    (1usize..=3)
        .prop_flat_map(|m| {
            (
                prop::collection::vec(0.05f64..1.0, m),
                prop::collection::vec(0.3f64..5.0, m),
                prop::collection::vec(0.0f64..1.0, m * m),
            )
        })
        .prop_map(|(alpha, rates, mix)| {
            let m = alpha.len();
            let total: f64 = alpha.iter().sum();
            let alpha: Vec<f64> = alpha.iter().map(|a| a / total).collect();
            let t = (0..m)
                .map(|i| {
                    let row_mass: f64 = (0..m).filter(|&j| j != i).map(|j| mix[i * m + j]).sum();
                    (0..m)
                        .map(|j| {
                            if i == j {
                                -rates[i]
                            } else {
                                // at most 80% of the outflow stays inside the chain
                                0.8 * rates[i] * mix[i * m + j] / row_mass.max(1.0)
                            }
                        })
                        .collect()
                })
                .collect();
            PhaseType::normalized(alpha, t).unwrap()
        })
}

fn model() -> impl Strategy<Value = LevyModel> {
    (phase_type(), 0.3f64..4.0, prop_oneof![Just(0.0), 0.2f64..2.0], 0.2f64..4.0)
        .prop_map(|(pt, d, sigma, lambda)| LevyModel::new(d, sigma, lambda, pt).unwrap())
}

fn build(m: &LevyModel) -> Option<ScaleFunction> {
    match ScaleFunction::build(m, Q) {
        Ok(sf) => Some(sf),
        Err(Error::MultipleRootDetected { .. }) => None,
        Err(e) => panic!("unexpected failure: {e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exponent_vanishes_at_zero_and_is_convex(m in model()) {
        prop_assert!(m.psi(0.0).unwrap().abs() < 1e-14);
        let h = 0.05;
        for i in 1..60 {
            let s = i as f64 * h;
            let second = m.psi(s + h).unwrap() - 2.0 * m.psi(s).unwrap() + m.psi(s - h).unwrap();
            prop_assert!(second >= -1e-12);
        }
        prop_assert!((m.psi_prime(0.0).unwrap() + m.drift_mu()).abs() < 1e-10);
    }

    #[test]
    fn root_structure(m in model()) {
        let Some(sf) = build(&m) else { return Ok(()) };
        let phases = m.jumps().phases();
        let expected = if m.sigma() > 0.0 { phases + 2 } else { phases + 1 };
        prop_assert_eq!(sf.roots().len(), expected);
        prop_assert_eq!(sf.roots().iter().filter(|s| s.re > 0.0).count(), 1);
        prop_assert_eq!(sf.roots()[0], Complex64::new(sf.phi(), 0.0));
        for s in sf.roots() {
            prop_assert!((m.laplace_exponent(*s).unwrap() - Q).norm() < 1e-9 * (1.0 + Q));
            if s.im != 0.0 {
                prop_assert!(sf.roots().iter().any(|r| (r - s.conj()).norm() < 1e-10 * (1.0 + s.norm())));
            }
        }
    }

    #[test]
    fn scale_function_shape(m in model()) {
        let Some(sf) = build(&m) else { return Ok(()) };
        let w0 = if m.sigma() > 0.0 { 0.0 } else { 1.0 / m.drift_d() };
        prop_assert!((sf.w(0.0) - w0).abs() < 1e-9);
        let mut prev = (sf.w(0.0), sf.z(0.0), sf.zbar(0.0));
        for i in 1..=100 {
            let x = 0.1 * i as f64;
            let w = sf.w_complex(x);
            prop_assert!(w.im.abs() <= 1e-10 * w.re.abs().max(1e-300));
            let cur = (w.re, sf.z(x), sf.zbar(x));
            prop_assert!(cur.0 > prev.0 && cur.1 > prev.1 && cur.2 > prev.2);
            prev = cur;
        }
    }

    #[test]
    fn partial_fractions_invert_the_exponent(m in model(), shift in 0.1f64..10.0) {
        let Some(sf) = build(&m) else { return Ok(()) };
        let s = sf.phi() + shift;
        let direct = 1.0 / (m.psi(s).unwrap() - Q);
        let lt = sf.laplace_transform(Complex64::new(s, 0.0));
        prop_assert!((lt.re - direct).abs() < 1e-8 * direct.abs());
    }

    #[test]
    fn dividend_barrier_and_dominance(m in model()) {
        let Some(sf) = build(&m) else { return Ok(()) };
        let sol = DividendSolution::from_scale(sf).unwrap();
        prop_assert_eq!(sol.a_star > 0.0, sol.mu > 0.0);
        prop_assert!(sol.value_opt(0.0).abs() < 1e-9 * (1.0 + sol.mu.abs() / Q));
        if sol.a_star > 0.0 && sol.a_star < 200.0 {
            prop_assert!((sol.sf.zbar(sol.a_star) - sol.mu / Q).abs() < 1e-9 * (1.0 + sol.mu / Q));
            let a = sol.a_star;
            for f in [0.5, 2.0] {
                for i in 0..=20 {
                    let x = 3.0 * a * i as f64 / 20.0;
                    let scale = 1.0 + sol.value_opt(x).abs();
                    prop_assert!(sol.value_opt(x) >= sol.value(f * a, x) - 1e-9 * scale);
                }
            }
        }
    }

    #[test]
    fn injection_barrier_increases_with_cost(m in model(), c1 in 1.01f64..3.0, dc in 0.1f64..3.0) {
        let Some(sf) = build(&m) else { return Ok(()) };
        let lo = optimal_barrier_b(&sf, c1).unwrap();
        let hi = optimal_barrier_b(&sf, c1 + dc).unwrap();
        prop_assert!(lo.b_star > 0.0 && hi.b_star > lo.b_star);
        prop_assert!((sf.z(lo.b_star) - c1).abs() < 1e-9 * c1);
        let x = 0.5 * lo.b_star;
        prop_assert!(hi.value_opt(x) <= lo.value_opt(x));
    }
}
