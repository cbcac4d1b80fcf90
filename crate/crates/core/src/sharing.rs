//! The base-station sharing game: every player may split its power budget
//! over all stations. A player's best response against fixed interference is
//! a water-filling allocation, and sequential (Gauss-Seidel) best responses
//! converge to the unique equilibrium.

use rand::seq::SliceRandom;

use crate::channel::{stream, ChannelMatrix, NetworkParams};
use crate::error::{Error, Result};
use crate::game::{potential, station_loads, PowerProfile, Schedule};

pub const DEFAULT_EPSILON: f64 = 1e-9;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
/// KKT residual accepted for a converged sharing profile.
pub const KKT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct WaterFillingSolution {
    pub powers: Vec<f64>,
    /// `beta` in `p_s = max(0, w_s / beta - c_s)`.
    pub water_level_param: f64,
    /// Stations receiving positive power, ascending.
    pub active_set: Vec<usize>,
}

/// Maximizes `sum_s w_s log(p_s + c_s)` subject to `sum_s p_s = budget`,
/// `p_s >= 0`.
///
/// `costs[s]` is the noise-plus-interference to gain ratio of station `s`;
/// `f64::INFINITY` marks a channel with zero gain, which never gets power.
/// The active set is found by sorting the breakpoints `w_s / c_s`; the water
/// parameter then has the closed form `sum_A w / (budget + sum_A c)`.
pub fn water_fill(weights: &[f64], costs: &[f64], budget: f64) -> Result<WaterFillingSolution> {
    if weights.len() != costs.len() {
        return Err(Error::Dimension(
            "weights and costs differ in length".into(),
        ));
    }
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::InvalidParams("budget must be finite and > 0".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParams(
            "weights must be finite and > 0".into(),
        ));
    }
    if costs.iter().any(|c| c.is_nan() || *c <= 0.0) {
        return Err(Error::InvalidParams("costs must be > 0".into()));
    }

    let mut order: Vec<usize> = (0..costs.len()).filter(|&s| costs[s].is_finite()).collect();
    if order.is_empty() {
        return Err(Error::NoUsableChannel);
    }
    let level = |s: usize| weights[s] / costs[s];
    order.sort_by(|&a, &b| level(b).total_cmp(&level(a)).then(a.cmp(&b)));

    let (mut sum_w, mut sum_c) = (0.0, 0.0);
    let mut beta = 0.0;
    let mut active_len = order.len();
    for (m, &s) in order.iter().enumerate() {
        sum_w += weights[s];
        sum_c += costs[s];
        beta = sum_w / (budget + sum_c);
        let next_inactive = order.get(m + 1).is_none_or(|&n| level(n) <= beta);
        if next_inactive {
            active_len = m + 1;
            break;
        }
    }

    let mut powers = vec![0.0; costs.len()];
    let mut active_set: Vec<usize> = order[..active_len].to_vec();
    for &s in &active_set {
        powers[s] = (weights[s] / beta - costs[s]).max(0.0);
    }
    active_set.sort_unstable();
    Ok(WaterFillingSolution {
        powers,
        water_level_param: beta,
        active_set,
    })
}

fn player_costs(
    profile: &PowerProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    loads: &[f64],
    k: usize,
) -> Vec<f64> {
    (0..params.num_stations())
        .map(|s| {
            let g = gains.gain(k, s);
            if g > 0.0 {
                let zeta = params.sigma2(s) + loads[s] - profile.power(k, s) * g;
                zeta / g
            } else {
                f64::INFINITY
            }
        })
        .collect()
}

/// Water-filling reply of player `k` to the other players' current powers.
pub fn best_response_sharing(
    profile: &PowerProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    k: usize,
) -> Result<WaterFillingSolution> {
    let loads = station_loads(profile, gains);
    let costs = player_costs(profile, gains, params, loads.as_slice().unwrap(), k);
    water_fill(params.bandwidth_fractions(), &costs, params.p_max())
}

/// Largest violation of player `k`'s optimality conditions against fixed
/// opponents: stationarity on the active set, dual feasibility off it, the
/// budget, and complementary slackness. The multiplier is read off the
/// station where the player puts the most power.
pub fn kkt_residual_player(
    profile: &PowerProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    k: usize,
) -> f64 {
    let loads = station_loads(profile, gains);
    let s_count = params.num_stations();
    let marginal: Vec<f64> = (0..s_count)
        .map(|s| {
            let g = gains.gain(k, s);
            let received = params.sigma2(s) + loads[s];
            params.bandwidth_fraction(s) * g / (received * std::f64::consts::LN_2)
        })
        .collect();
    let spent: f64 = profile.row(k).sum();
    let budget_gap = (spent - params.p_max()).abs();

    let loaded = (0..s_count)
        .filter(|&s| profile.power(k, s) > 0.0)
        .max_by(|&a, &b| profile.power(k, a).total_cmp(&profile.power(k, b)));
    let Some(loaded) = loaded else {
        return budget_gap;
    };
    let beta = marginal[loaded];
    let mut residual = budget_gap.max(beta * budget_gap);
    for s in 0..s_count {
        let violation = if profile.power(k, s) > 0.0 {
            (marginal[s] - beta).abs()
        } else {
            (marginal[s] - beta).max(0.0)
        };
        residual = residual.max(violation);
    }
    residual
}

pub fn kkt_residual(profile: &PowerProfile, gains: &ChannelMatrix, params: &NetworkParams) -> f64 {
    (0..params.num_players())
        .map(|k| kkt_residual_player(profile, gains, params, k))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SharingStep {
    pub update: usize,
    pub sweep: usize,
    pub player: usize,
    pub potential: f64,
    /// Max-norm change of the updated row.
    pub change: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SharingTrajectory {
    pub start_potential: f64,
    pub steps: Vec<SharingStep>,
    pub sweeps: usize,
    pub final_kkt_residual: f64,
}

/// Gauss-Seidel water-filling dynamics.
///
/// A sweep offers every player one update, in index order for
/// [`Schedule::RoundRobin`] or in a fresh random permutation for
/// [`Schedule::Random`]. The run stops after the first sweep whose largest
/// row change is below `epsilon`.
pub fn run_sharing_dynamics(
    gains: &ChannelMatrix,
    params: &NetworkParams,
    start: &PowerProfile,
    schedule: Schedule,
    epsilon: f64,
    max_sweeps: usize,
) -> Result<(PowerProfile, SharingTrajectory)> {
    gains.check_against(params)?;
    if start.powers().dim() != gains.gains().dim() {
        return Err(Error::Dimension(
            "start profile shape differs from channel".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams("epsilon must be > 0".into()));
    }
    if max_sweeps == 0 {
        return Err(Error::InvalidParams("max_sweeps must be at least 1".into()));
    }
    let k_count = params.num_players();
    let mut profile = start.clone();
    let mut loads = station_loads(&profile, gains).to_vec();
    let mut rng = match schedule {
        Schedule::Random(seed) => Some(seed.rng(stream::SCHEDULE)),
        Schedule::RoundRobin => None,
    };
    let mut order: Vec<usize> = (0..k_count).collect();
    let mut trajectory = SharingTrajectory {
        start_potential: potential(&profile, gains, params),
        steps: Vec::new(),
        sweeps: 0,
        final_kkt_residual: f64::NAN,
    };

    for sweep in 1..=max_sweeps {
        if let Some(r) = rng.as_mut() {
            order.shuffle(r);
        }
        let mut sweep_change = 0.0f64;
        for &k in &order {
            let costs = player_costs(&profile, gains, params, &loads, k);
            let reply = water_fill(params.bandwidth_fractions(), &costs, params.p_max())?;
            let change = profile
                .row(k)
                .iter()
                .zip(&reply.powers)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            profile.set_row_unchecked(k, &reply.powers);
            loads = station_loads(&profile, gains).to_vec();
            sweep_change = sweep_change.max(change);
            trajectory.steps.push(SharingStep {
                update: trajectory.steps.len() + 1,
                sweep,
                player: k,
                potential: crate::game::potential_from_loads(&loads, params),
                change,
            });
        }
        trajectory.sweeps = sweep;
        if sweep_change < epsilon {
            trajectory.final_kkt_residual = kkt_residual(&profile, gains, params);
            return Ok((profile, trajectory));
        }
    }
    trajectory.final_kkt_residual = kkt_residual(&profile, gains, params);
    Err(Error::SharingNotConverged {
        max_sweeps,
        trajectory: Box::new(trajectory),
    })
}
