//! Randomized invariants that cut across modules.

use ndarray::Array2;
use proptest::prelude::*;

use crate::game::station_loads;
use crate::selection::{is_selection_nash, SelectionProfile};
use crate::sharing::{kkt_residual, DEFAULT_EPSILON};
use crate::{
    draw_channels, graph_distance, max_ne_bound, params_from_snr, potential,
    run_selection_dynamics, run_sharing_dynamics, utilities, utility, water_fill, ChannelMatrix,
    NetworkParams, PowerProfile, ProfileIndex, ProfileSpace, RngSeed, Schedule,
};

/// (params, gains) for K <= 5, S <= 3, random bandwidths and SNR.
fn network() -> impl Strategy<Value = (NetworkParams, ChannelMatrix)> {
    (1usize..=5, 1usize..=3, any::<u64>(), -5.0f64..20.0)
        .prop_flat_map(|(k, s, seed, snr)| {
            (
                Just(k),
                prop::collection::vec(0.05f64..1.0, s),
                Just(seed),
                Just(snr),
            )
        })
        .prop_map(|(k, raw, seed, snr)| {
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let params = params_from_snr(k, w.len(), &w, snr).unwrap();
            let gains = draw_channels(&params, RngSeed(seed));
            (params, gains)
        })
}

fn power_matrix(params: &NetworkParams, raw: &[f64]) -> Array2<f64> {
    let (k, s) = (params.num_players(), params.num_stations());
    let mut p = Array2::zeros((k, s));
    for j in 0..k {
        let row = &raw[j * (s + 1)..(j + 1) * (s + 1)];
        let total: f64 = row[..s].iter().sum::<f64>() + 1e-9;
        for x in 0..s {
            // row[s] decides how much of the budget is left unspent.
            p[[j, x]] = row[x] / total * row[s] * params.p_max() * (1.0 - 1e-12);
        }
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn profile_index_roundtrip(k in 1usize..=7, s in 1usize..=4, pick in any::<u64>()) {
        let space = ProfileSpace::new(k, s).unwrap();
        let i = ProfileIndex(pick % space.len());
        let profile = space.profile(i);
        prop_assert_eq!(space.index_of(&profile), i);

        // Player 0 is the least significant digit.
        let mut expect = 0u64;
        for (kk, &a) in profile.assignment().iter().enumerate() {
            expect += a as u64 * (s as u64).pow(kk as u32);
        }
        prop_assert_eq!(expect, i.0);

        let neighbors: Vec<_> = space.neighbors(i).collect();
        prop_assert_eq!(neighbors.len(), k * (s - 1));
        for n in neighbors {
            prop_assert_eq!(graph_distance(&space, i, n), 1);
        }
    }

    #[test]
    fn ne_bound_is_a_power(k in 1usize..=10, s in 1usize..=6) {
        prop_assert_eq!(max_ne_bound(k, s).unwrap(), (s as u64).pow(k as u32 - 1));
    }

    #[test]
    fn selection_deviation_matches_potential(
        (params, gains) in network(),
        picks in prop::collection::vec(any::<usize>(), 7),
    ) {
        let (k, s) = (params.num_players(), params.num_stations());
        let mut a: Vec<usize> = (0..k).map(|j| picks[j] % s).collect();
        let player = picks[5] % k;
        let before = PowerProfile::from_assignment(&a, &params);
        a[player] = picks[6] % s;
        let after = PowerProfile::from_assignment(&a, &params);
        let du = utility(&after, &gains, &params, player) - utility(&before, &gains, &params, player);
        let dphi = potential(&after, &gains, &params) - potential(&before, &gains, &params);
        prop_assert!((du - dphi).abs() <= 1e-9, "du={du} dphi={dphi}");
    }

    #[test]
    fn sharing_deviation_matches_potential(
        (params, gains) in network(),
        raw in prop::collection::vec(0.0f64..1.0, 24),
        new_row in prop::collection::vec(0.0f64..1.0, 4),
        player in any::<usize>(),
    ) {
        let s = params.num_stations();
        let before = PowerProfile::new(power_matrix(&params, &raw), &params).unwrap();
        let k = player % params.num_players();
        let row = power_matrix(&params.with_players(1).unwrap(), &new_row[..s + 1].to_vec());
        let after = before.with_row(k, row.row(0).as_slice().unwrap(), &params).unwrap();
        let du = utility(&after, &gains, &params, k) - utility(&before, &gains, &params, k);
        let dphi = potential(&after, &gains, &params) - potential(&before, &gains, &params);
        prop_assert!((du - dphi).abs() <= 1e-9, "du={du} dphi={dphi}");
    }

    #[test]
    fn rescaling_keeps_utilities_and_potential_differences(
        (params, gains) in network(),
        raw in prop::collection::vec(0.0f64..1.0, 24),
        factor in 1e-3f64..1e3,
        player in any::<usize>(),
    ) {
        let scaled = params.rescaled(factor).unwrap();
        let p = power_matrix(&params, &raw);
        let before = PowerProfile::new(p.clone(), &params).unwrap();
        let before_scaled = PowerProfile::new(&p * factor, &scaled).unwrap();
        let u = utilities(&before, &gains, &params);
        let u_scaled = utilities(&before_scaled, &gains, &scaled);
        for (a, b) in u.0.iter().zip(&u_scaled.0) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }

        let k = player % params.num_players();
        let after = before.with_row(k, &vec![0.0; params.num_stations()], &params).unwrap();
        let after_scaled = before_scaled.with_row(k, &vec![0.0; params.num_stations()], &scaled).unwrap();
        let d = potential(&after, &gains, &params) - potential(&before, &gains, &params);
        let d_scaled = potential(&after_scaled, &gains, &scaled) - potential(&before_scaled, &gains, &scaled);
        prop_assert!((d - d_scaled).abs() <= 1e-9, "{d} vs {d_scaled}");
    }

    #[test]
    fn water_fill_spends_budget_on_one_level(
        w_raw in prop::collection::vec(0.01f64..1.0, 1..6),
        c_raw in prop::collection::vec(1e-3f64..1e3, 6),
        budget in 1e-3f64..1e3,
    ) {
        let total: f64 = w_raw.iter().sum();
        let w: Vec<f64> = w_raw.iter().map(|x| x / total).collect();
        let c = &c_raw[..w.len()];
        let sol = water_fill(&w, c, budget).unwrap();
        let spent: f64 = sol.powers.iter().sum();
        prop_assert!((spent - budget).abs() <= 1e-9 * budget.max(1.0));
        let beta = sol.water_level_param;
        for s in 0..w.len() {
            let p = sol.powers[s];
            prop_assert!(p >= 0.0);
            let marginal = w[s] / (p + c[s]);
            if sol.active_set.contains(&s) {
                prop_assert!((marginal - beta).abs() <= 1e-9 * beta.max(1.0), "s={s}");
            } else {
                prop_assert_eq!(p, 0.0);
                prop_assert!(marginal <= beta * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn selection_walks_end_in_equilibrium((params, gains) in network(), seed in any::<u64>(), random in any::<bool>()) {
        let seed = RngSeed(seed);
        let start = SelectionProfile::uniform_random(&params, &mut seed.rng(0));
        let schedule = if random { Schedule::Random(seed) } else { Schedule::RoundRobin };
        let (end, traj) = run_selection_dynamics(&gains, &params, &start, schedule, 100_000).unwrap();
        prop_assert!(is_selection_nash(&gains, &params, &end));
        let mut last = traj.start_potential;
        for step in &traj.steps {
            prop_assert!(step.potential >= last);
            last = step.potential;
        }
    }

    #[test]
    fn sharing_potential_never_drops((params, gains) in network(), seed in any::<u64>()) {
        let start = PowerProfile::uniform(&params);
        let (end, traj) = run_sharing_dynamics(
            &gains, &params, &start, Schedule::Random(RngSeed(seed)), DEFAULT_EPSILON, 1_000_000,
        ).unwrap();
        let mut last = traj.start_potential;
        for step in &traj.steps {
            prop_assert!(step.potential >= last - 1e-12, "{} < {}", step.potential, last);
            last = step.potential;
        }
        prop_assert!(kkt_residual(&end, &gains, &params) <= 1e-6);
        let loads = station_loads(&end, &gains);
        prop_assert!(loads.iter().all(|l| l.is_finite() && *l >= 0.0));
    }
}
