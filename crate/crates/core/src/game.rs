//! SINR, spectral-efficiency utilities and the exact potential shared by the
//! selection and sharing games.

use ndarray::{Array1, Array2, ArrayView1};

use crate::channel::{ChannelMatrix, NetworkParams};
use crate::error::{Error, Result};

const BUDGET_TOL: f64 = 1e-12;

/// Order in which players are offered updates by the best-response dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    RoundRobin,
    /// Players drawn from the schedule stream of this seed.
    Random(crate::channel::RngSeed),
}

/// Per-player, per-station transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    p: Array2<f64>,
}

impl PowerProfile {
    pub fn new(p: Array2<f64>, params: &NetworkParams) -> Result<Self> {
        if p.dim() != (params.num_players(), params.num_stations()) {
            return Err(Error::Dimension(format!(
                "power profile is {:?}, expected {}x{}",
                p.dim(),
                params.num_players(),
                params.num_stations()
            )));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParams(
                "powers must be finite and nonnegative".into(),
            ));
        }
        for (k, row) in p.rows().into_iter().enumerate() {
            let total = row.sum();
            if total > params.p_max() + BUDGET_TOL {
                return Err(Error::InvalidParams(format!(
                    "player {k} spends {total} above p_max = {}",
                    params.p_max()
                )));
            }
        }
        Ok(PowerProfile { p })
    }

    pub fn zeros(params: &NetworkParams) -> Self {
        PowerProfile {
            p: Array2::zeros((params.num_players(), params.num_stations())),
        }
    }

    /// Every player splits `p_max` evenly over all stations.
    pub fn uniform(params: &NetworkParams) -> Self {
        let share = params.p_max() / params.num_stations() as f64;
        PowerProfile {
            p: Array2::from_elem((params.num_players(), params.num_stations()), share),
        }
    }

    /// Full power on one station per player.
    pub fn from_assignment(assignment: &[usize], params: &NetworkParams) -> Self {
        let mut p = Array2::zeros((params.num_players(), params.num_stations()));
        for (k, &s) in assignment.iter().enumerate() {
            p[[k, s]] = params.p_max();
        }
        PowerProfile { p }
    }

    pub fn powers(&self) -> &Array2<f64> {
        &self.p
    }

    #[inline]
    pub fn power(&self, k: usize, s: usize) -> f64 {
        self.p[[k, s]]
    }

    pub fn row(&self, k: usize) -> ArrayView1<'_, f64> {
        self.p.row(k)
    }

    pub fn num_players(&self) -> usize {
        self.p.nrows()
    }

    /// Replaces player `k`'s allocation, checking the budget.
    pub fn with_row(&self, k: usize, row: &[f64], params: &NetworkParams) -> Result<Self> {
        let mut p = self.p.clone();
        if row.len() != p.ncols() {
            return Err(Error::Dimension(
                "row length differs from station count".into(),
            ));
        }
        p.row_mut(k).assign(&ArrayView1::from(row));
        PowerProfile::new(p, params)
    }

    pub(crate) fn set_row_unchecked(&mut self, k: usize, row: &[f64]) {
        self.p.row_mut(k).assign(&ArrayView1::from(row));
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &PowerProfile) -> f64 {
        self.p
            .iter()
            .zip(other.p.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct UtilityVector(pub Vec<f64>);

impl UtilityVector {
    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Noise plus interference `zeta_{k,s}` seen by player `k` at station `s`.
pub fn mai(
    profile: &PowerProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    k: usize,
    s: usize,
) -> f64 {
    let interference: f64 = (0..profile.num_players())
        .filter(|&j| j != k)
        .map(|j| profile.power(j, s) * gains.gain(j, s))
        .sum();
    params.sigma2(s) + interference
}

pub fn sinr(
    profile: &PowerProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    k: usize,
    s: usize,
) -> f64 {
    profile.power(k, s) * gains.gain(k, s) / mai(profile, gains, params, k, s)
}

/// Spectral efficiency of player `k` in bit/s/Hz.
pub fn utility(
    profile: &PowerProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    k: usize,
) -> f64 {
    (0..params.num_stations())
        .map(|s| params.bandwidth_fraction(s) * sinr(profile, gains, params, k, s).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

pub fn utilities(
    profile: &PowerProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
) -> UtilityVector {
    let loads = station_loads(profile, gains);
    let u = (0..params.num_players())
        .map(|k| {
            (0..params.num_stations())
                .map(|s| {
                    let own = profile.power(k, s) * gains.gain(k, s);
                    let zeta = params.sigma2(s) + loads[s] - own;
                    params.bandwidth_fraction(s) * (own / zeta).ln_1p()
                })
                .sum::<f64>()
                / std::f64::consts::LN_2
        })
        .collect();
    UtilityVector(u)
}

/// Received power `sum_k p_{k,s} g_{k,s}` at each station.
pub fn station_loads(profile: &PowerProfile, gains: &ChannelMatrix) -> Array1<f64> {
    (profile.powers() * gains.gains()).sum_axis(ndarray::Axis(0))
}

/// Exact potential `sum_s w_s log2(sigma_s^2 + sum_k p_{k,s} g_{k,s})`.
pub fn potential(profile: &PowerProfile, gains: &ChannelMatrix, params: &NetworkParams) -> f64 {
    potential_from_loads(station_loads(profile, gains).as_slice().unwrap(), params)
}

pub(crate) fn potential_from_loads(loads: &[f64], params: &NetworkParams) -> f64 {
    loads
        .iter()
        .enumerate()
        .map(|(s, l)| params.bandwidth_fraction(s) * (params.sigma2(s) + l).log2())
        .sum()
}

/// `|delta u_k - delta phi|` for a unilateral deviation of player `k`.
pub fn check_exact_potential(
    profile: &PowerProfile,
    deviated: &PowerProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    k: usize,
) -> Result<f64> {
    if profile.powers().dim() != deviated.powers().dim() {
        return Err(Error::Dimension("profiles have different shapes".into()));
    }
    let others_differ = (0..profile.num_players())
        .filter(|&j| j != k)
        .any(|j| profile.row(j) != deviated.row(j));
    if others_differ {
        return Err(Error::NotUnilateral);
    }
    let du = utility(profile, gains, params, k) - utility(deviated, gains, params, k);
    let dphi = potential(profile, gains, params) - potential(deviated, gains, params);
    Ok((du - dphi).abs())
}
