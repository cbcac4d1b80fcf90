//! The atomic base-station selection game.
//!
//! Each player transmits at full power to exactly one station, so the
//! strategy space is the finite set `{0..S}^K`. Profiles are indexed in mixed
//! radix with player 0 as the least significant digit:
//! `index = sum_k a_k * S^k`. Reports and CSV files show one-based indices
//! (`index + 1`).
//!
//! Two graphs live on this space. The undirected graph joins profiles that
//! differ in one player's station; the oriented graph keeps an edge `i -> j`
//! only when the move raises the potential. Sinks of the oriented graph are
//! exactly the pure Nash equilibria.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{ChannelMatrix, NetworkParams};
use crate::error::{Error, Result};
use crate::game::{potential_from_loads, PowerProfile, Schedule, UtilityVector};

/// Smallest utility (or potential) gain treated as an improvement.
pub const IMPROVEMENT_TOL: f64 = 1e-12;
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;
pub const DEFAULT_MATRIX_CAP: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SelectionProfile {
    assignment: Vec<usize>,
}

impl SelectionProfile {
    pub fn new(assignment: Vec<usize>, params: &NetworkParams) -> Result<Self> {
        if assignment.len() != params.num_players() {
            return Err(Error::Dimension(format!(
                "{} assignments for {} players",
                assignment.len(),
                params.num_players()
            )));
        }
        if let Some(&s) = assignment.iter().find(|&&s| s >= params.num_stations()) {
            return Err(Error::InvalidParams(format!(
                "station {s} out of range for {} stations",
                params.num_stations()
            )));
        }
        Ok(SelectionProfile { assignment })
    }

    pub fn uniform_random<R: Rng + ?Sized>(params: &NetworkParams, rng: &mut R) -> Self {
        SelectionProfile {
            assignment: (0..params.num_players())
                .map(|_| rng.random_range(0..params.num_stations()))
                .collect(),
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn station(&self, k: usize) -> usize {
        self.assignment[k]
    }

    /// Players attached to station `s`.
    pub fn members(&self, s: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&k| self.assignment[k] == s)
            .collect()
    }

    pub fn to_power_profile(&self, params: &NetworkParams) -> PowerProfile {
        PowerProfile::from_assignment(&self.assignment, params)
    }

    fn with_station(&self, k: usize, s: usize) -> Self {
        let mut next = self.clone();
        next.assignment[k] = s;
        next
    }
}

/// Zero-based position of a profile in the mixed-radix ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct ProfileIndex(pub u64);

impl ProfileIndex {
    pub fn one_based(self) -> u64 {
        self.0 + 1
    }
}

/// The finite strategy space `{0..S}^K` together with its index bijection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProfileSpace {
    players: usize,
    stations: usize,
    len: u64,
}

impl ProfileSpace {
    pub fn new(players: usize, stations: usize) -> Result<Self> {
        if players == 0 || stations == 0 {
            return Err(Error::InvalidParams("empty strategy space".into()));
        }
        let len = u32::try_from(players)
            .ok()
            .and_then(|k| (stations as u64).checked_pow(k))
            .ok_or(Error::Overflow("S^K"))?;
        Ok(ProfileSpace {
            players,
            stations,
            len,
        })
    }

    pub fn of(params: &NetworkParams) -> Result<Self> {
        Self::new(params.num_players(), params.num_stations())
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn stations(&self) -> usize {
        self.stations
    }

    pub fn index_of(&self, profile: &SelectionProfile) -> ProfileIndex {
        let s = self.stations as u64;
        let idx = profile
            .assignment
            .iter()
            .rev()
            .fold(0u64, |acc, &a| acc * s + a as u64);
        ProfileIndex(idx)
    }

    pub fn profile(&self, index: ProfileIndex) -> SelectionProfile {
        let mut rest = index.0;
        let s = self.stations as u64;
        let assignment = (0..self.players)
            .map(|_| {
                let a = (rest % s) as usize;
                rest /= s;
                a
            })
            .collect();
        SelectionProfile { assignment }
    }

    fn stride(&self, k: usize) -> u64 {
        (self.stations as u64).pow(k as u32)
    }

    /// Station chosen by player `k` in profile `index`.
    pub fn station_of(&self, index: ProfileIndex, k: usize) -> usize {
        ((index.0 / self.stride(k)) % self.stations as u64) as usize
    }

    /// The `K(S-1)` profiles reachable by one player changing station.
    pub fn neighbors(&self, index: ProfileIndex) -> impl Iterator<Item = ProfileIndex> + '_ {
        (0..self.players).flat_map(move |k| {
            let stride = self.stride(k);
            let cur = self.station_of(index, k);
            let base = index.0 - cur as u64 * stride;
            (0..self.stations)
                .filter(move |&s| s != cur)
                .map(move |s| ProfileIndex(base + s as u64 * stride))
        })
    }
}

/// Number of players whose station differs between the two profiles.
pub fn graph_distance(space: &ProfileSpace, i: ProfileIndex, j: ProfileIndex) -> usize {
    (0..space.players)
        .filter(|&k| space.station_of(i, k) != space.station_of(j, k))
        .count()
}

/// Upper bound `S^(K-1)` on the number of pure equilibria of a generic game.
pub fn max_ne_bound(players: usize, stations: usize) -> Result<u64> {
    if players == 0 || stations == 0 {
        return Err(Error::InvalidParams("K and S must be at least 1".into()));
    }
    u32::try_from(players - 1)
        .ok()
        .and_then(|e| (stations as u64).checked_pow(e))
        .ok_or(Error::Overflow("S^(K-1)"))
}

fn profile_potential(
    space: &ProfileSpace,
    index: ProfileIndex,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    loads: &mut [f64],
) -> f64 {
    loads.iter_mut().for_each(|l| *l = 0.0);
    let mut rest = index.0;
    let s_count = space.stations as u64;
    for k in 0..space.players {
        let s = (rest % s_count) as usize;
        rest /= s_count;
        loads[s] += params.p_max() * gains.gain(k, s);
    }
    potential_from_loads(loads, params)
}

/// Potential-oriented strategy-profile graph with the potential of every vertex
/// precomputed; adjacency is answered on demand.
#[derive(Debug, Clone)]
pub struct OrientedGraph {
    space: ProfileSpace,
    potentials: Vec<f64>,
}

impl OrientedGraph {
    pub fn build(gains: &ChannelMatrix, params: &NetworkParams, cap: u64) -> Result<Self> {
        gains.check_against(params)?;
        let space = ProfileSpace::of(params).map_err(|e| match e {
            Error::Overflow(_) => Error::EnumerationCap {
                profiles: (params.num_stations() as u128)
                    .saturating_pow(params.num_players() as u32),
                cap,
            },
            other => other,
        })?;
        if space.len() > cap {
            return Err(Error::EnumerationCap {
                profiles: space.len() as u128,
                cap,
            });
        }
        let potentials = (0..space.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; space.stations],
                |loads, i| profile_potential(&space, ProfileIndex(i), gains, params, loads),
            )
            .collect();
        Ok(OrientedGraph { space, potentials })
    }

    pub fn space(&self) -> &ProfileSpace {
        &self.space
    }

    pub fn vertex_count(&self) -> u64 {
        self.space.len()
    }

    pub fn potential(&self, i: ProfileIndex) -> f64 {
        self.potentials[i.0 as usize]
    }

    /// Potential of every profile, in index order.
    pub fn potentials(&self) -> &[f64] {
        &self.potentials
    }

    /// Oriented edge `i -> j`: a one-player move that strictly raises the potential.
    pub fn has_edge(&self, i: ProfileIndex, j: ProfileIndex) -> bool {
        graph_distance(&self.space, i, j) == 1 && self.improves(i, j)
    }

    fn improves(&self, i: ProfileIndex, j: ProfileIndex) -> bool {
        self.potential(j) > self.potential(i) + IMPROVEMENT_TOL
    }

    pub fn out_neighbors(&self, i: ProfileIndex) -> impl Iterator<Item = ProfileIndex> + '_ {
        self.space
            .neighbors(i)
            .filter(move |&j| self.improves(i, j))
    }

    pub fn out_degree(&self, i: ProfileIndex) -> usize {
        self.out_neighbors(i).count()
    }

    pub fn is_sink(&self, i: ProfileIndex) -> bool {
        self.out_neighbors(i).next().is_none()
    }

    pub fn sinks(&self) -> Vec<ProfileIndex> {
        (0..self.vertex_count())
            .into_par_iter()
            .map(ProfileIndex)
            .filter(|&i| self.is_sink(i))
            .collect()
    }

    /// True when all potentials are pairwise distinct at `IMPROVEMENT_TOL`.
    pub fn potentials_distinct(&self) -> bool {
        let mut sorted = self.potentials.clone();
        sorted.par_sort_unstable_by(|a, b| a.total_cmp(b));
        sorted.windows(2).all(|w| w[1] - w[0] > IMPROVEMENT_TOL)
    }

    pub fn argmax(&self) -> ProfileIndex {
        let (i, _) =
            self.potentials
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                });
        ProfileIndex(i as u64)
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct NeEntry {
    pub index: ProfileIndex,
    pub assignment: Vec<usize>,
    pub potential: f64,
    pub utilities: UtilityVector,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct NeReport {
    /// Sorted by potential, highest first.
    pub equilibria: Vec<NeEntry>,
    pub is_unique_potential: bool,
}

impl NeReport {
    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    pub fn indices(&self) -> Vec<ProfileIndex> {
        self.equilibria.iter().map(|e| e.index).collect()
    }
}

pub fn enumerate_ne(gains: &ChannelMatrix, params: &NetworkParams) -> Result<NeReport> {
    enumerate_ne_with_cap(gains, params, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_ne_with_cap(
    gains: &ChannelMatrix,
    params: &NetworkParams,
    cap: u64,
) -> Result<NeReport> {
    let graph = OrientedGraph::build(gains, params, cap)?;
    Ok(ne_report(&graph, gains, params))
}

/// Collects the sinks of an already built graph.
pub fn ne_report(graph: &OrientedGraph, gains: &ChannelMatrix, params: &NetworkParams) -> NeReport {
    let mut equilibria: Vec<NeEntry> = graph
        .sinks()
        .into_iter()
        .map(|index| {
            let profile = graph.space().profile(index);
            let utilities =
                crate::game::utilities(&profile.to_power_profile(params), gains, params);
            NeEntry {
                index,
                assignment: profile.assignment,
                potential: graph.potential(index),
                utilities,
            }
        })
        .collect();
    equilibria.sort_by(|a, b| {
        b.potential
            .total_cmp(&a.potential)
            .then(a.index.cmp(&b.index))
    });
    NeReport {
        equilibria,
        is_unique_potential: graph.potentials_distinct(),
    }
}

/// Dense adjacency matrices of the undirected graph (`A`) and of its
/// potential-oriented version (`A_hat`).
pub fn adjacency_matrices(
    gains: &ChannelMatrix,
    params: &NetworkParams,
) -> Result<(Array2<u8>, Array2<u8>)> {
    let space = ProfileSpace::of(params)?;
    if space.len() > DEFAULT_MATRIX_CAP {
        return Err(Error::MatrixCap {
            profiles: space.len() as u128,
            cap: DEFAULT_MATRIX_CAP,
        });
    }
    let graph = OrientedGraph::build(gains, params, DEFAULT_MATRIX_CAP)?;
    let n = space.len() as usize;
    let mut a = Array2::zeros((n, n));
    let mut a_hat = Array2::zeros((n, n));
    for i in 0..n {
        let vi = ProfileIndex(i as u64);
        for vj in space.neighbors(vi) {
            let j = vj.0 as usize;
            a[[i, j]] = 1;
            if graph.improves(vi, vj) {
                a_hat[[i, j]] = 1;
            }
        }
    }
    Ok((a, a_hat))
}

/// Utility of player `k` if it moved to station `s` at full power, given the
/// per-station received power `loads` of the current profile.
#[inline]
fn station_utility(
    gains: &ChannelMatrix,
    params: &NetworkParams,
    loads: &[f64],
    current: usize,
    k: usize,
    s: usize,
) -> f64 {
    let own = params.p_max() * gains.gain(k, s);
    let mut zeta = params.sigma2(s) + loads[s];
    if s == current {
        zeta -= own;
    }
    params.bandwidth_fraction(s) * (own / zeta).ln_1p() / std::f64::consts::LN_2
}

fn best_station(
    gains: &ChannelMatrix,
    params: &NetworkParams,
    loads: &[f64],
    current: usize,
    k: usize,
) -> usize {
    let stay = station_utility(gains, params, loads, current, k, current);
    let mut best = current;
    let mut best_u = stay + IMPROVEMENT_TOL;
    for s in 0..params.num_stations() {
        if s == current {
            continue;
        }
        let u = station_utility(gains, params, loads, current, k, s);
        if u > best_u {
            best = s;
            best_u = u;
        }
    }
    best
}

fn selection_loads(
    gains: &ChannelMatrix,
    params: &NetworkParams,
    profile: &SelectionProfile,
) -> Vec<f64> {
    let mut loads = vec![0.0; params.num_stations()];
    for (k, &s) in profile.assignment.iter().enumerate() {
        loads[s] += params.p_max() * gains.gain(k, s);
    }
    loads
}

/// Player `k` switches to the station maximizing its own spectral efficiency.
///
/// The current station is kept unless another one is strictly better; among
/// strictly better stations the lowest index wins ties.
pub fn best_response_selection(
    gains: &ChannelMatrix,
    params: &NetworkParams,
    profile: &SelectionProfile,
    k: usize,
) -> SelectionProfile {
    let loads = selection_loads(gains, params, profile);
    let s = best_station(gains, params, &loads, profile.station(k), k);
    profile.with_station(k, s)
}

/// Def. 1 check: no player can raise its utility by switching station.
pub fn is_selection_nash(
    gains: &ChannelMatrix,
    params: &NetworkParams,
    profile: &SelectionProfile,
) -> bool {
    let loads = selection_loads(gains, params, profile);
    (0..params.num_players())
        .all(|k| best_station(gains, params, &loads, profile.station(k), k) == profile.station(k))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SelectionStep {
    pub step: usize,
    pub player: usize,
    /// `None` when `S^K` does not fit in `u64`.
    pub profile_index: Option<ProfileIndex>,
    pub potential: f64,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SelectionTrajectory {
    pub start_index: Option<ProfileIndex>,
    pub start_potential: f64,
    pub steps: Vec<SelectionStep>,
}

impl SelectionTrajectory {
    pub fn change_count(&self) -> usize {
        self.steps.iter().filter(|s| s.changed).count()
    }
}

/// Asynchronous best-response dynamics: one player moves at a time.
///
/// Stops once every player has been offered an update since the last
/// change and none of them moved, i.e. a full pass without change.
pub fn run_selection_dynamics(
    gains: &ChannelMatrix,
    params: &NetworkParams,
    start: &SelectionProfile,
    schedule: Schedule,
    max_steps: usize,
) -> Result<(SelectionProfile, SelectionTrajectory)> {
    gains.check_against(params)?;
    if max_steps == 0 {
        return Err(Error::InvalidParams("max_steps must be at least 1".into()));
    }
    let k_count = params.num_players();
    let space = ProfileSpace::of(params).ok();
    let index_of = |p: &SelectionProfile| space.map(|sp| sp.index_of(p));

    let mut profile = start.clone();
    let mut loads = selection_loads(gains, params, &profile);
    let mut trajectory = SelectionTrajectory {
        start_index: index_of(&profile),
        start_potential: potential_from_loads(&loads, params),
        steps: Vec::new(),
    };
    let mut rng = match schedule {
        Schedule::Random(seed) => Some(seed.rng(crate::channel::stream::SCHEDULE)),
        Schedule::RoundRobin => None,
    };
    let mut settled = vec![false; k_count];
    let mut settled_count = 0;

    for step in 0..max_steps {
        let k = match rng.as_mut() {
            Some(r) => r.random_range(0..k_count),
            None => step % k_count,
        };
        let current = profile.station(k);
        let next = best_station(gains, params, &loads, current, k);
        let changed = next != current;
        if changed {
            profile.assignment[k] = next;
            loads = selection_loads(gains, params, &profile);
            settled.iter_mut().for_each(|v| *v = false);
            settled_count = 0;
        }
        if !settled[k] {
            settled[k] = true;
            settled_count += 1;
        }
        trajectory.steps.push(SelectionStep {
            step: step + 1,
            player: k,
            profile_index: index_of(&profile),
            potential: potential_from_loads(&loads, params),
            changed,
        });
        if settled_count == k_count {
            return Ok((profile, trajectory));
        }
    }
    Err(Error::SelectionNotConverged {
        max_steps,
        trajectory: Box::new(trajectory),
    })
}
