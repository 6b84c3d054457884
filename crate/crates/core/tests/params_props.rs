use ehdwaves_core::params::{discriminant, first_inadmissible_mode, quadratic_scale};
use ehdwaves_core::*;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = WaveParams> {
    (0.1f64..5.0, 0.0f64..2.0, -3.0f64..3.0, 0.1f64..2.0, -1.5f64..1.5)
        .prop_filter_map("valid", |(g, s, gm, e, e0)| WaveParams::new(g, s, gm, e, e0).ok())
}

proptest! {
    #[test]
    fn roots_annihilate_symbol(p in params(), k in 1usize..12) {
        if let Ok(Some(s)) = bifurcation_speeds(mode(k), &p) {
            for lam in [s.plus, s.minus] {
                let monic = dispersion(mode(k), lam, &p) * tk(mode(k)) / 2.0;
                prop_assert!(monic.abs() <= 1e-12 * quadratic_scale(mode(k), &p));
            }
        }
    }

    #[test]
    fn vieta_relations(p in params(), k in 1usize..12) {
        if let Ok(Some(s)) = bifurcation_speeds(mode(k), &p) {
            let t = tk(mode(k));
            let sc = quadratic_scale(mode(k), &p);
            prop_assert!((s.plus + s.minus - p.gamma * t).abs() <= 1e-12 * sc.sqrt());
            prop_assert!((s.plus * s.minus - (p.field_energy() - p.restoring(mode(k)) * 1.0)).abs() <= 1e-12 * sc);
            prop_assert!(s.plus > s.minus);
        }
    }

    #[test]
    fn admissibility_means_real_roots(p in params(), kmax in 1usize..20) {
        if admissible_field(&p, kmax) {
            for k in 1..=kmax {
                prop_assert!(discriminant(mode(k), &p) > 0.0);
            }
        } else {
            let k = first_inadmissible_mode(&p, kmax).unwrap();
            prop_assert!(p.restoring(mode(k)) <= p.field_energy());
        }
    }

    #[test]
    fn resonance_field_is_symmetric_and_coincides(gamma in 1.0f64..4.0, k in 1usize..5, l in 1usize..5) {
        prop_assume!(k != l);
        let base = WaveParams::new(1.0, 1.0, gamma, 1.0, 0.0).unwrap();
        let a = resonance_field(mode(k), mode(l), &base).unwrap();
        let b = resonance_field(mode(l), mode(k), &base).unwrap();
        prop_assert_eq!(a.is_some(), b.is_some());
        if let (Some(a), Some(b)) = (a, b) {
            prop_assert_eq!(a, b);
            let p = base.with_e0(a.sqrt());
            if admissible_field(&p, 8) {
                let shared = shared_speed(mode(k), mode(l), &p).unwrap();
                prop_assert!(shared.is_some());
                let (_, lam) = shared.unwrap();
                // no third mode shares the speed
                for m in (1..=30).filter(|m| *m != k && *m != l) {
                    if let Ok(Some(s)) = bifurcation_speeds(mode(m), &p) {
                        prop_assert!((s.plus - lam).abs() >= 1e-6 && (s.minus - lam).abs() >= 1e-6);
                    }
                }
            }
        }
    }
}

#[test]
fn weak_vorticity_never_resonates() {
    // condition needs gamma^2 large enough
    for k in 1..6 {
        for l in (1..6).filter(|l| *l != k) {
            let p = WaveParams::new(1.0, 1.0, 1e-3, 1.0, 0.0).unwrap();
            assert!(!resonance_condition_holds(mode(k), mode(l), &p));
        }
    }
}
