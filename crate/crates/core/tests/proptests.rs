//! Property-based invariants.

use std::path::Path;

use num_complex::Complex64;
use otfs_noma::equalizers::{superposed_sinr, PowerAllocation};
use otfs_noma::grid_channel::make_grid;
use otfs_noma::harness::csv::{parse_csv_str, to_csv_string};
use otfs_noma::harness::CurvePoint;
use otfs_noma::scheduling::{greedy_schedule, per_subchannel_schedule, UserPool};
use otfs_noma::transforms::{isfft, sfft, Domain, Frame};
use otfs_noma::uplink::{closed_form_outage, error_floor, floor_approx};
use proptest::prelude::*;

fn gains_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..6, 1usize..6)
        .prop_flat_map(|(k, m)| prop::collection::vec(prop::collection::vec(1e-3f64..10.0, m), k))
}

proptest! {
    #[test]
    fn sinr_increases_with_snr(noise in 1e-3f64..100.0, g0 in 0.5f64..1.0, rho in 1e-2f64..1e5, factor in 1.0001f64..100.0) {
        let power = PowerAllocation::new(g0, 1.0 - g0).unwrap();
        let lo = superposed_sinr(noise, rho, &power);
        let hi = superposed_sinr(noise, rho * factor, &power);
        prop_assert!(hi > lo);
        prop_assert!(hi < g0 / (1.0 - g0) + 1e-12);
    }

    #[test]
    fn schedulers_ignore_common_scaling(gains in gains_strategy(), scale in 1e-3f64..1e3) {
        let pool = UserPool::new(gains.clone()).unwrap();
        let scaled = UserPool::new(gains.iter().map(|g| g.iter().map(|v| v * scale).collect()).collect()).unwrap();
        prop_assert_eq!(greedy_schedule(&pool), greedy_schedule(&scaled));
        prop_assert_eq!(per_subchannel_schedule(&pool), per_subchannel_schedule(&scaled));
    }

    #[test]
    fn closed_form_is_a_monotone_probability(k in 1usize..=32, eps in 1e-3f64..10.0, rho in 1e-1f64..1e6) {
        let p = closed_form_outage(k, eps, rho).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(closed_form_outage(k, eps, rho * 2.0).unwrap() <= p + 1e-12);
        prop_assert!(closed_form_outage(k, eps * 1.5, rho).unwrap() >= p - 1e-12);
        prop_assert!(p >= error_floor(k, eps).unwrap() - 1e-12);
    }

    #[test]
    fn floor_approximation_brackets(k in 1usize..=16, eps in 1e-4f64..0.05) {
        prop_assume!((k + 1) as f64 * eps < 1.0);
        let floor = error_floor(k, eps).unwrap();
        let approx = floor_approx(k, eps).unwrap();
        prop_assert!(floor <= approx);
        prop_assert!(approx * (1.0 - k as f64 * (k + 1) as f64 * eps / 2.0) <= floor * (1.0 + 1e-12));
    }

    #[test]
    fn transforms_round_trip(n in 1usize..9, m in 1usize..9, seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = make_grid(n, m, 1.0).unwrap();
        let values: Vec<Complex64> = (0..n * m)
            .map(|_| otfs_noma::grid_channel::complex_gaussian(&mut rng, 1.0))
            .collect();
        let dd = Frame::new(g, values.clone(), Domain::DelayDoppler).unwrap();
        let tf = isfft(&dd).unwrap();
        prop_assert!((tf.norm_sqr() - dd.norm_sqr()).abs() < 1e-9 * dd.norm_sqr().max(1.0));
        let back = sfft(&tf).unwrap();
        for (a, b) in back.values().iter().zip(&values) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn csv_round_trips_bit_exact(
        rows in prop::collection::vec((-50.0f64..80.0, "[a-z_0-9]{1,12}", any::<f64>(), 0.0f64..1.0, 1u64..u64::MAX), 0..20)
    ) {
        let points: Vec<CurvePoint> = rows
            .into_iter()
            .filter(|r| r.2.is_finite())
            .map(|(snr_db, metric, value, ci_halfwidth, trials)| CurvePoint { snr_db, metric, value, ci_halfwidth, trials })
            .collect();
        let text = to_csv_string(&points);
        let back = parse_csv_str(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(to_csv_string(&back), text);
        for p in &back {
            prop_assert!(points.iter().any(|q| q.snr_db.to_bits() == p.snr_db.to_bits() && q.value.to_bits() == p.value.to_bits()));
        }
    }
}
