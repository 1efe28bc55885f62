mod common;

use markmle::maxint::ObservedSet;
use markmle::plmle::{fit_imputed, product_limit_weights};
use markmle::{
    brute_force_maximal_intersections, empirical_processes, fit, height_at, impute_right_endpoints,
    maximal_intersections, observed_sets, order_dataset, Bound, Observation, Region,
};
use num_rational::Ratio;
use proptest::prelude::*;

fn sorted_regions(mut r: Vec<Region>) -> Vec<Region> {
    r.sort_by(|a, b| {
        let (ka, kb) = (a.sort_key(), b.sort_key());
        ka.0.cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
    });
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn fast_intersections_match_height_map(seed in any::<u64>(), n in 1usize..=500, k in 1usize..=3) {
        let data = common::random_dataset(&mut common::rng(seed), n, k, 12);
        let ord = order_dataset(&data).unwrap();
        let fast = maximal_intersections(&ord);
        let sets = observed_sets(&ord);
        let brute = brute_force_maximal_intersections(&sets);
        let fr = sorted_regions(fast.iter().map(|m| m.region).collect());
        let br = sorted_regions(brute.iter().map(|m| m.region).collect());
        prop_assert_eq!(fr, br);
        // each intersection sits on a local maximum of the height map
        for mi in &fast {
            if let Region::Segment { d, r, mark } = mi.region {
                let h = height_at(&sets, (r, mark));
                prop_assert_eq!(h, height_at(&sets, (0.5 * (d + r), mark)));
                prop_assert!(mi.member_ranks.iter().all(|&i| mi.region.is_within(&sets[i])));
            }
        }
    }

    #[test]
    fn no_censoring_gives_exact_uniform_weights(n in 1usize..=20) {
        let (w, tail) = product_limit_weights::<Ratio<i128>>(&vec![true; n]);
        let expected = Ratio::new(1, n as i128);
        prop_assert!(w.iter().all(|x| *x == expected));
        prop_assert_eq!(tail, Ratio::from_integer(0));
        let data: Vec<Observation> = (0..n)
            .map(|i| Observation::current_status(1.0 + i as f64, Some(i as f64)).unwrap())
            .collect();
        let m = fit(&order_dataset(&data).unwrap()).unwrap();
        prop_assert!(m.masses().iter().all(|(_, p)| (p - 1.0 / n as f64).abs() <= 1e-15));
    }

    #[test]
    fn weights_are_kaplan_meier(events in proptest::collection::vec(any::<bool>(), 1..=20)) {
        let (w, tail) = product_limit_weights::<Ratio<i128>>(&events);
        // KM written as prod (1 - d_i / n_i) with one record per rank
        let n = events.len() as i128;
        let mut surv = Ratio::from_integer(1);
        for (i, &e) in events.iter().enumerate() {
            let at_risk = n - i as i128;
            let before = surv;
            if e {
                surv *= Ratio::new(at_risk - 1, at_risk);
            }
            prop_assert_eq!(w[i], before - surv);
        }
        prop_assert_eq!(tail, surv);
        let total: Ratio<i128> = w.iter().copied().sum::<Ratio<i128>>() + tail;
        prop_assert_eq!(total, Ratio::from_integer(1));
    }

    #[test]
    fn bounds_are_ordered_and_monotone(seed in any::<u64>(), n in 1usize..=60, k in 1usize..=3) {
        let data = common::random_dataset(&mut common::rng(seed), n, k, 10);
        let m = fit(&order_dataset(&data).unwrap()).unwrap();
        prop_assert!((m.total() - 1.0).abs() < 1e-12);
        let xs: Vec<f64> = (0..=24).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = (0..=12).map(|i| i as f64 * 2.0).chain([f64::INFINITY]).collect();
        let lo = m.eval_f_grid(&xs, &ys, Bound::Lower);
        let hi = m.eval_f_grid(&xs, &ys, Bound::Upper);
        for i in 0..xs.len() {
            for j in 0..ys.len() {
                prop_assert!(lo[i][j] <= hi[i][j] + 1e-15);
                if i > 0 {
                    prop_assert!(lo[i - 1][j] <= lo[i][j] + 1e-15 && hi[i - 1][j] <= hi[i][j] + 1e-15);
                }
                if j > 0 {
                    prop_assert!(lo[i][j - 1] <= lo[i][j] + 1e-15 && hi[i][j - 1] <= hi[i][j] + 1e-15);
                }
            }
            prop_assert!((lo[i][ys.len() - 1] - m.eval_fx(xs[i], Bound::Lower)).abs() < 1e-12);
        }
    }

    #[test]
    fn survival_is_the_product_integral(seed in any::<u64>(), n in 1usize..=80, k in 1usize..=3) {
        let data = common::random_dataset(&mut common::rng(seed), n, k, 10);
        let ord = order_dataset(&data).unwrap();
        let m = fit(&ord).unwrap();
        let p = empirical_processes(&ord);
        for i in 0..=24 {
            let x = i as f64 * 0.25;
            prop_assert!((1.0 - m.eval_fx(x, Bound::Lower) - p.product_integral(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn imputed_refit_reproduces_masses(seed in any::<u64>(), n in 1usize..=80, k in 1usize..=3) {
        let data = common::random_dataset(&mut common::rng(seed), n, k, 10);
        let ord = order_dataset(&data).unwrap();
        let m = fit(&ord).unwrap();
        let imp = impute_right_endpoints(&ord);
        let no_segments = imp.sets().iter().all(|s| !matches!(s, ObservedSet::Segment { .. }));
        prop_assert!(no_segments);
        let refit = fit_imputed(&imp);
        let mut direct: Vec<(f64, f64, f64)> = m
            .masses()
            .iter()
            .filter_map(|(mi, p)| match mi.region {
                Region::Segment { r, mark, .. } => Some((r, mark, *p)),
                Region::HalfPlane { .. } => None,
            })
            .collect();
        let mut points = refit.points.clone();
        let key = |a: &(f64, f64, f64), b: &(f64, f64, f64)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1));
        direct.sort_by(key);
        points.sort_by(key);
        prop_assert_eq!(direct, points);
        prop_assert_eq!(m.censored_tail(), refit.censored_tail);
    }
}
