use emato::dynamics::KinState;
use emato::polytraj::{select_index, Quintic, ReferenceLine};
use emato::powertrain::fit::synthesize_samples;
use emato::powertrain::{fit_fuel_model, FuelCoeffs};
use proptest::prelude::*;

fn state() -> impl Strategy<Value = KinState<f64>> {
    (-200.0..200.0f64, 0.0..30.0f64, -3.0..3.0f64).prop_map(|(l, v, a)| KinState::new(l, v, a))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quintic_meets_both_boundaries(x0 in state(), x1 in state(), dur in 0.5..12.0f64) {
        let q = Quintic::fit(x0, x1, dur).unwrap();
        for (t, x) in [(0.0, x0), (dur, x1)] {
            prop_assert!(close(q.pos(t), x.l, 1e-9));
            prop_assert!(close(q.vel(t), x.v, 1e-9));
            prop_assert!(close(q.acc(t), x.a, 1e-9));
        }
    }

    #[test]
    fn quintic_derivatives_agree_with_differences(x0 in state(), x1 in state(), dur in 1.0..10.0f64, u in 0.05..0.95f64) {
        let q = Quintic::fit(x0, x1, dur).unwrap();
        let (t, h) = (u * dur, 1e-5);
        let dv = (q.pos(t + h) - q.pos(t - h)) / (2.0 * h);
        let da = (q.vel(t + h) - q.vel(t - h)) / (2.0 * h);
        prop_assert!(close(dv, q.vel(t), 1e-5));
        prop_assert!(close(da, q.acc(t), 1e-5));
    }

    #[test]
    fn frenet_round_trip_on_a_curved_road(s_frac in 0.05..0.95f64, d in -4.0..4.0f64, bend in -0.002..0.002f64) {
        // Arc of curvature `bend`, radius well above the lateral offsets.
        let pts: Vec<[f64; 2]> = (0..=40)
            .map(|i| {
                let s = i as f64 * 10.0;
                if bend.abs() < 1e-9 {
                    [s, 0.0]
                } else {
                    [(s * bend).sin() / bend, (1.0 - (s * bend).cos()) / bend]
                }
            })
            .collect();
        let road = ReferenceLine::from_waypoints(&pts, vec![-3.5, 0.0, 3.5]).unwrap();
        let s = s_frac * road.length();
        let p = road.to_global(s, d).unwrap();
        let (s2, d2) = road.project(p);
        prop_assert!((s2 - s).abs() < 1e-6, "s {} -> {}", s, s2);
        prop_assert!((d2 - d).abs() < 1e-6, "d {} -> {}", d, d2);
    }

    #[test]
    fn selection_ignores_candidate_order(
        costs in prop::collection::vec(prop::option::of(0.0..100.0f64), 1..20),
        seed in any::<u64>(),
    ) {
        let mut shuffled = costs.clone();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let pick = |c: &[Option<f64>]| select_index(c).ok().map(|i| c[i].unwrap());
        prop_assert_eq!(pick(&costs), pick(&shuffled));
        if let Some(best) = pick(&costs) {
            prop_assert!(costs.iter().flatten().all(|&c| c >= best));
        }
    }

    #[test]
    fn noise_free_samples_recover_random_coefficients(
        o in prop::array::uniform5(0.01..2.0f64),
        c in prop::array::uniform3(0.01..2.0f64),
    ) {
        // Scaled into the magnitude range of real vehicles.
        let o = [o[0] * 0.1, o[1] * 1e-2, o[2] * 1e-4, o[3] * 1e-5, o[4] * 1e-7];
        let c = [c[0] * 0.1, c[1] * 1e-2, c[2] * 1e-4];
        let truth = FuelCoeffs::new(o, c);
        let v: Vec<f64> = (0..=25).map(f64::from).collect();
        let a: Vec<f64> = (0..=20).map(|i| i as f64 * 0.15).collect();
        let fit = fit_fuel_model(&synthesize_samples(&truth, &v, &a), truth.rho_g).unwrap();
        for (g, w) in fit.coeffs.o.iter().chain(&fit.coeffs.c).zip(o.iter().chain(&c)) {
            prop_assert!((g - w).abs() <= 1e-6 * w.abs(), "{} vs {}", g, w);
        }
    }
}
