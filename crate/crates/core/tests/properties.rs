//! Randomized invariants of the model, the power allocator, the position
//! search and the alternating loop.

use pinch_ee::antenna::{
    antenna_objective, exhaustive_search, grid_maximize, initialize_antenna, pso_maximize,
    pso_optimize, PositionObjective, PsoConfig,
};
use pinch_ee::model::{descending_order, energy_efficiency, per_user_rates, sum_rate_noma};
use pinch_ee::power::{allocate_power, DinkelbachConfig};
use pinch_ee::tdma::{allocate_power_tdma, tdma_energy_efficiency};
use pinch_ee::{
    alternating_optimize, solve_scheme, AntennaPosition, AoConfig, ChannelGains, PowerAllocation,
    Scenario, SchemeKind, UserSet,
};
use proptest::prelude::*;

fn scenario(fixed_power_dbm: f64) -> Scenario {
    Scenario {
        fixed_power_w: 10f64.powf((fixed_power_dbm - 30.0) / 10.0),
        ..Scenario::evaluation_defaults()
    }
}

fn gains_from(raw: Vec<f64>) -> ChannelGains {
    ChannelGains::from_raw(raw, AntennaPosition::clamped(0.0, 1.0)).unwrap()
}

/// Channel gains spanning weak to strong links relative to -90 dBm noise.
fn gain() -> impl Strategy<Value = f64> {
    (-11.0f64..-6.0).prop_map(|e| 10f64.powf(e))
}

fn cap() -> impl Strategy<Value = f64> {
    (-10.0f64..20.0).prop_map(|dbm| 10f64.powf((dbm - 30.0) / 10.0))
}

/// `(gains, caps, fixed power dBm)` with `1..=max_users` users.
fn instance(max_users: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1..=max_users).prop_flat_map(|n| {
        (
            prop::collection::vec(gain(), n),
            prop::collection::vec(cap(), n),
            0.0f64..20.0,
        )
    })
}

fn users_in(s: &Scenario, max_users: usize) -> impl Strategy<Value = UserSet> {
    let (ax, ay) = (s.area_x_m, s.area_y_m / 2.0);
    prop::collection::vec((0.0..=ax, -ay..=ay), 1..=max_users)
        .prop_map(|pos| UserSet::with_uniform_cap(pos, 0.01).unwrap())
}

fn solve(gains: &[f64], caps: &[f64], s: &Scenario) -> (PowerAllocation, f64) {
    let g = gains_from(gains.to_vec());
    let r = allocate_power(&g, caps, s, &DinkelbachConfig::default()).unwrap();
    (r.allocation, r.ee)
}

fn ee_of(gains: &[f64], powers: &[f64], s: &Scenario) -> f64 {
    let g = gains_from(gains.to_vec());
    energy_efficiency(
        &g,
        &PowerAllocation::from_powers(powers.to_vec()).unwrap(),
        s,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn per_user_rates_telescope_to_sum_rate(
        (gains, caps, pf) in instance(8),
        fractions in prop::collection::vec(0.0f64..=1.0, 8),
    ) {
        let s = scenario(pf);
        let powers: Vec<f64> = caps.iter().zip(&fractions).map(|(c, f)| c * f).collect();
        let g = gains_from(gains);
        let alloc = PowerAllocation::from_powers(powers).unwrap();
        let total: f64 = per_user_rates(&g, &alloc, &s).unwrap().iter().sum();
        prop_assert!((total - sum_rate_noma(&g, &alloc, &s)).abs() < 1e-9);
    }

    #[test]
    fn allocation_is_feasible_and_reports_its_ee((gains, caps, pf) in instance(8)) {
        let s = scenario(pf);
        let (alloc, ee) = solve(&gains, &caps, &s);
        for (&p, &c) in alloc.powers_w().iter().zip(&caps) {
            prop_assert!((0.0..=c).contains(&p));
        }
        let direct = ee_of(&gains, alloc.powers_w(), &s);
        prop_assert!((ee - direct).abs() <= 1e-12 * direct.max(1.0));
    }

    #[test]
    fn stronger_users_saturate_before_weaker_ones_transmit((gains, caps, pf) in instance(8)) {
        let s = scenario(pf);
        let (alloc, _) = solve(&gains, &caps, &s);
        let p = alloc.powers_w();
        let order = descending_order(&gains);
        for (k, &weak) in order.iter().enumerate() {
            if p[weak] > 0.0 {
                for &strong in &order[..k] {
                    prop_assert_eq!(p[strong], caps[strong]);
                }
            }
        }
    }

    #[test]
    fn no_feasible_perturbation_improves_ee(
        (gains, caps, pf) in instance(6),
        moves in prop::collection::vec((0usize..6, -1.0f64..1.0), 1..20),
    ) {
        let s = scenario(pf);
        let (alloc, ee) = solve(&gains, &caps, &s);
        let n = gains.len();
        for (i, step) in moves {
            let i = i % n;
            let mut p = alloc.powers_w().to_vec();
            p[i] = (p[i] + step * 1e-3 * caps[i]).clamp(0.0, caps[i]);
            prop_assert!(ee_of(&gains, &p, &s) <= ee * (1.0 + 1e-9));
        }
    }

    #[test]
    fn optimum_beats_corner_allocations((gains, caps, pf) in instance(8)) {
        let s = scenario(pf);
        let (_, ee) = solve(&gains, &caps, &s);
        prop_assert!(ee >= ee_of(&gains, &caps, &s) * (1.0 - 1e-12));
        prop_assert!(ee >= ee_of(&gains, &vec![0.0; gains.len()], &s));
        prop_assert!(ee > 0.0);
    }

    #[test]
    fn relabeling_users_permutes_the_allocation(
        (gains, caps, pf) in instance(8),
        shift in 0usize..8,
    ) {
        let s = scenario(pf);
        let n = gains.len();
        let rotate = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| v[(i + shift) % n]).collect() };
        let (a, ee_a) = solve(&gains, &caps, &s);
        let (b, ee_b) = solve(&rotate(&gains), &rotate(&caps), &s);
        prop_assert!((ee_a - ee_b).abs() <= 1e-12 * ee_a);
        // Ties in gain may be broken differently; compare totals then.
        prop_assert!((a.total_w() - b.total_w()).abs() <= 1e-9 * a.total_w().max(1e-12));
    }

    #[test]
    fn larger_caps_never_hurt(
        (gains, caps, pf) in instance(6),
        boost in 1.0f64..10.0,
    ) {
        let s = scenario(pf);
        let (_, ee) = solve(&gains, &caps, &s);
        let bigger: Vec<f64> = caps.iter().map(|c| c * boost).collect();
        let (_, ee_big) = solve(&gains, &bigger, &s);
        prop_assert!(ee_big >= ee * (1.0 - 1e-9));
    }

    #[test]
    fn more_circuit_power_lowers_ee((gains, caps, pf) in instance(6), extra in 0.5f64..10.0) {
        let (_, low) = solve(&gains, &caps, &scenario(pf));
        let (_, high) = solve(&gains, &caps, &scenario(pf + extra));
        prop_assert!(high < low);
    }

    #[test]
    fn resolving_is_idempotent((gains, caps, pf) in instance(8)) {
        let s = scenario(pf);
        let (a, ee_a) = solve(&gains, &caps, &s);
        let (b, ee_b) = solve(&gains, &caps, &s);
        prop_assert_eq!(a, b);
        prop_assert_eq!(ee_a.to_bits(), ee_b.to_bits());
    }

    #[test]
    fn warm_start_agrees_with_cold_start((gains, caps, pf) in instance(8)) {
        let s = scenario(pf);
        let g = gains_from(gains);
        let cold = allocate_power(&g, &caps, &s, &DinkelbachConfig::default()).unwrap();
        let warm_cfg = DinkelbachConfig { warm_start: true, ..DinkelbachConfig::default() };
        let warm = allocate_power(&g, &caps, &s, &warm_cfg).unwrap();
        prop_assert!((cold.ee - warm.ee).abs() <= 1e-6 * cold.ee);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pso_stays_feasible_and_keeps_books(
        users in users_in(&Scenario::evaluation_defaults(), 6),
        fractions in prop::collection::vec(0.0f64..=1.0, 6),
        seed in any::<u64>(),
    ) {
        let s = Scenario::evaluation_defaults();
        let powers: Vec<f64> = fractions[..users.len()].iter().map(|f| f * 0.01).collect();
        let alloc = PowerAllocation::new(powers, &users).unwrap();
        let obj = PositionObjective::new(&users, &alloc, &s).unwrap();
        let cfg = PsoConfig { rng_seed: seed, ..PsoConfig::default() };
        let out = pso_optimize(&obj, s.waveguide_length_m, &cfg, None);

        prop_assert!((0.0..=s.waveguide_length_m).contains(&out.x));
        prop_assert_eq!(out.value, antenna_objective(out.x, &obj));
        prop_assert!(out.iterations <= cfg.max_iterations);
        prop_assert_eq!(out.history.len(), out.iterations + 1);
        prop_assert!(out.history.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(*out.history.last().unwrap(), out.value);
    }

    #[test]
    fn pso_never_loses_its_seeds(
        seeds in prop::collection::vec(0.0f64..=120.0, 1..10),
        peak in 0.0f64..=120.0,
        seed in any::<u64>(),
    ) {
        let f = |x: f64| -((x - peak).powi(2)) + (x / 7.0).sin();
        let cfg = PsoConfig { rng_seed: seed, ..PsoConfig::default() };
        let out = pso_maximize(f, 120.0, &seeds, &cfg);
        for &x in &seeds {
            prop_assert!(out.value >= f(x));
        }
    }

    #[test]
    fn halving_the_grid_step_never_hurts(
        users in users_in(&Scenario::evaluation_defaults(), 6),
        step in 0.05f64..5.0,
    ) {
        let s = Scenario::evaluation_defaults();
        let alloc = PowerAllocation::at_caps(&users);
        let obj = PositionObjective::new(&users, &alloc, &s).unwrap();
        let coarse = exhaustive_search(&obj, s.waveguide_length_m, step);
        let fine = exhaustive_search(&obj, s.waveguide_length_m, step / 2.0);
        prop_assert!(fine.value >= coarse.value);
    }

    #[test]
    fn ao_trace_is_monotone_and_bounded(users in users_in(&Scenario::evaluation_defaults(), 5), seed in any::<u64>()) {
        let s = Scenario::evaluation_defaults();
        let cfg = AoConfig::default().with_seed(seed);
        let sol = alternating_optimize(&s, &users, &cfg).unwrap();
        prop_assert!(!sol.flagged);
        prop_assert!(!sol.trace.is_empty());
        prop_assert!(sol.trace.len() <= cfg.max_outer_iterations + 1);
        prop_assert!(sol.trace.windows(2).all(|w| w[1].ee >= w[0].ee));
        prop_assert_eq!(sol.trace.last().unwrap().ee, sol.ee_bits_per_joule);
    }

    #[test]
    fn ao_improves_on_its_starting_point(users in users_in(&Scenario::evaluation_defaults(), 5)) {
        let s = Scenario::evaluation_defaults();
        let cfg = AoConfig::default();
        let sol = alternating_optimize(&s, &users, &cfg).unwrap();
        let start = initialize_antenna(&users, s.waveguide_length_m);
        let gains = ChannelGains::compute(&users, start, &s);
        let at_start = allocate_power(&gains, users.power_caps_w(), &s, &cfg.dinkelbach).unwrap();
        prop_assert!(sol.ee_bits_per_joule >= at_start.ee);
    }

    #[test]
    fn every_scheme_reports_consistent_figures(users in users_in(&Scenario::evaluation_defaults(), 5)) {
        let s = Scenario::evaluation_defaults();
        for kind in SchemeKind::ALL {
            let sol = solve_scheme(kind, &s, &users, &AoConfig::default()).unwrap();
            prop_assert!((0.0..=s.waveguide_length_m).contains(&sol.antenna.x_m()));
            for (&p, &c) in sol.allocation.powers_w().iter().zip(users.power_caps_w()) {
                prop_assert!((0.0..=c).contains(&p));
            }
            let expected = sol.sum_rate_bits_per_s_hz / sol.total_power_w;
            prop_assert!((sol.ee_bits_per_joule - expected).abs() <= 1e-9 * expected);
        }
    }
}

/// Cyclic coordinate ascent with a golden-section line search per user.
fn tdma_coordinate_oracle(gains: &[f64], caps: &[f64], s: &Scenario) -> f64 {
    let ee = |p: &[f64]| {
        let g = gains_from(gains.to_vec());
        tdma_energy_efficiency(&g, &PowerAllocation::from_powers(p.to_vec()).unwrap(), s)
    };
    let mut p = caps.to_vec();
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        for i in 0..p.len() {
            let at = |v: f64, p: &mut Vec<f64>| {
                p[i] = v;
                ee(p)
            };
            let (mut lo, mut hi) = (0.0, caps[i]);
            for _ in 0..80 {
                let a = hi - phi * (hi - lo);
                let b = lo + phi * (hi - lo);
                if at(a, &mut p) < at(b, &mut p) {
                    lo = a;
                } else {
                    hi = b;
                }
            }
            let mid = 0.5 * (lo + hi);
            let best = [0.0, mid, caps[i]]
                .into_iter()
                .max_by(|&x, &y| at(x, &mut p).total_cmp(&at(y, &mut p)))
                .unwrap();
            p[i] = best;
        }
    }
    ee(&p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tdma_power_matches_coordinate_ascent((gains, caps, pf) in instance(4)) {
        let s = scenario(pf);
        let g = gains_from(gains.clone());
        let solved = allocate_power_tdma(&g, &caps, &s, &DinkelbachConfig::default()).unwrap();
        let oracle = tdma_coordinate_oracle(&gains, &caps, &s);
        prop_assert!(solved.converged);
        prop_assert!(
            (solved.ee - oracle).abs() <= 1e-3 * oracle,
            "solver {} oracle {}", solved.ee, oracle
        );
    }
}

#[test]
fn grid_search_hits_an_exact_peak() {
    let out = grid_maximize(|x| -(x - 37.25).abs(), 120.0, 0.25);
    assert_eq!(out.x, 37.25);
    assert_eq!(out.value, 0.0);
}
