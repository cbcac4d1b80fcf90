//! Efficiency of equilibria and the Monte Carlo sweeps built on top of the
//! two games.
//!
//! Every trial draws its own channel from `seed.trial(K).trial(t)`; within a
//! trial all consumers (start profile, schedule, both arms of the Braess
//! comparison) share that trial seed, on separate streams.

use std::io::Write;

use rayon::prelude::*;

use crate::channel::{
    draw_channels, params_from_snr, stream, ChannelMatrix, NetworkParams, RngSeed,
};
use crate::error::{Error, Result};
use crate::game::{utilities, PowerProfile, Schedule};
use crate::limits::selection_step_budget;
use crate::selection::{
    ne_report, run_selection_dynamics, OrientedGraph, ProfileIndex, SelectionProfile,
    DEFAULT_ENUMERATION_CAP,
};
use crate::sharing::{run_sharing_dynamics, DEFAULT_EPSILON};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EfficiencyReport {
    pub optimum_sum: f64,
    pub worst_ne_sum: f64,
    pub best_ne_sum: f64,
    pub poa: f64,
    pub pos: f64,
    pub ne_count: usize,
}

/// Network spectral efficiency: the sum of all players' utilities.
pub fn network_se(profile: &PowerProfile, gains: &ChannelMatrix, params: &NetworkParams) -> f64 {
    utilities(profile, gains, params).sum()
}

/// Price of anarchy and stability of the selection game, by enumeration.
pub fn efficiency_selection(
    gains: &ChannelMatrix,
    params: &NetworkParams,
) -> Result<EfficiencyReport> {
    let graph = OrientedGraph::build(gains, params, DEFAULT_ENUMERATION_CAP)?;
    let space = *graph.space();
    let welfare: Vec<f64> = (0..space.len())
        .into_par_iter()
        .map(|i| {
            let profile = space.profile(ProfileIndex(i));
            network_se(&profile.to_power_profile(params), gains, params)
        })
        .collect();
    let optimum_sum = welfare.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let report = ne_report(&graph, gains, params);
    if report.is_empty() {
        return Err(Error::Invariant(
            "selection game without pure equilibrium".into(),
        ));
    }
    let ne_sums: Vec<f64> = report
        .indices()
        .iter()
        .map(|i| welfare[i.0 as usize])
        .collect();
    let worst_ne_sum = ne_sums.iter().copied().fold(f64::INFINITY, f64::min);
    let best_ne_sum = ne_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(EfficiencyReport {
        optimum_sum,
        worst_ne_sum,
        best_ne_sum,
        poa: optimum_sum / worst_ne_sum,
        pos: optimum_sum / best_ne_sum,
        ne_count: report.len(),
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std_err: f64,
    pub min: f64,
    pub max: f64,
}

impl MetricSummary {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_err = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        MetricSummary {
            mean,
            std_err,
            min: samples.iter().copied().fold(f64::INFINITY, f64::min),
            max: samples.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Per-trial samples of every metric at one axis value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub players: usize,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub metrics: Vec<&'static str>,
    pub points: Vec<SweepPoint>,
    pub trials: usize,
    pub seed: RngSeed,
}

#[derive(serde::Serialize)]
struct SweepRow<'a> {
    players: usize,
    metrics: Vec<(&'a str, MetricSummary)>,
}

impl SweepResult {
    pub fn samples(&self, players: usize, metric: &str) -> Option<&[f64]> {
        let m = self.metrics.iter().position(|&n| n == metric)?;
        let point = self.points.iter().find(|p| p.players == players)?;
        Some(&point.samples[m])
    }

    pub fn summary(&self, players: usize, metric: &str) -> Option<MetricSummary> {
        self.samples(players, metric).map(MetricSummary::of)
    }

    /// Header `K,<metric>_mean,<metric>_se,...,trials`; one row per axis value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["K".to_string()];
        for m in &self.metrics {
            header.push(format!("{m}_mean"));
            header.push(format!("{m}_se"));
        }
        header.push("trials".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut rec = vec![p.players.to_string()];
            for s in &p.samples {
                let sum = MetricSummary::of(s);
                rec.push(sum.mean.to_string());
                rec.push(sum.std_err.to_string());
            }
            rec.push(self.trials.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        let rows: Vec<SweepRow> = self
            .points
            .iter()
            .map(|p| SweepRow {
                players: p.players,
                metrics: self
                    .metrics
                    .iter()
                    .zip(&p.samples)
                    .map(|(m, s)| (*m, MetricSummary::of(s)))
                    .collect(),
            })
            .collect();
        serde_json::to_writer_pretty(
            out,
            &serde_json::json!({
                "seed": self.seed.0,
                "trials": self.trials,
                "points": rows,
            }),
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub bandwidth_fractions: Vec<f64>,
    pub players: Vec<usize>,
    pub trials: usize,
    pub snr_db: f64,
    pub seed: RngSeed,
}

impl SweepConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        if self.players.is_empty() || self.players.contains(&0) {
            return Err(Error::InvalidParams(
                "player counts must be positive".into(),
            ));
        }
        Ok(())
    }

    fn params(&self, players: usize) -> Result<NetworkParams> {
        params_from_snr(
            players,
            self.bandwidth_fractions.len(),
            &self.bandwidth_fractions,
            self.snr_db,
        )
    }
}

fn sweep<F>(config: &SweepConfig, metrics: Vec<&'static str>, trial: F) -> Result<SweepResult>
where
    F: Fn(&NetworkParams, RngSeed) -> Result<Vec<f64>> + Sync,
{
    config.validate()?;
    let mut points = Vec::with_capacity(config.players.len());
    for &k in &config.players {
        let params = config.params(k)?;
        let point_seed = config.seed.trial(k as u64);
        let rows: Vec<Vec<f64>> = (0..config.trials as u64)
            .into_par_iter()
            .map(|t| trial(&params, point_seed.trial(t)))
            .collect::<Result<_>>()?;
        let samples = (0..metrics.len())
            .map(|m| rows.iter().map(|r| r[m]).collect())
            .collect();
        points.push(SweepPoint {
            players: k,
            samples,
        });
    }
    Ok(SweepResult {
        metrics,
        points,
        trials: config.trials,
        seed: config.seed,
    })
}

/// Mean price of anarchy and stability of the selection game per player count.
///
/// Metrics: `poa`, `pos`, `ne_count`, and `multi_ne` (1 when the worst and
/// best equilibria differ in welfare, else 0).
pub fn sweep_poa_pos(config: &SweepConfig) -> Result<SweepResult> {
    sweep(
        config,
        vec!["poa", "pos", "ne_count", "multi_ne"],
        |params, seed| {
            let gains = draw_channels(params, seed);
            let r = efficiency_selection(&gains, params)?;
            Ok(vec![
                r.poa,
                r.pos,
                r.ne_count as f64,
                if r.pos < r.poa { 1.0 } else { 0.0 },
            ])
        },
    )
}

/// Sweep budget of the sharing arm. Players with nearly proportional gain rows
/// make the equilibrium ill-conditioned, and Gauss-Seidel then needs a few
/// tens of thousands of sweeps (one K=7 draw in a few hundred needs ~35k).
const BRAESS_MAX_SWEEPS: usize = 1_000_000;

/// Network spectral efficiency reached by the selection dynamics and by the
/// sharing dynamics on the same channel draws.
///
/// The selection arm starts from a random profile under a random schedule;
/// the sharing arm starts from an even power split under round robin.
/// Metrics: `selection`, `sharing`.
pub fn braess_compare(config: &SweepConfig) -> Result<SweepResult> {
    sweep(config, vec!["selection", "sharing"], |params, seed| {
        let gains = draw_channels(params, seed);
        let start = SelectionProfile::uniform_random(params, &mut seed.rng(stream::START_PROFILE));
        let (sel, _) = run_selection_dynamics(
            &gains,
            params,
            &start,
            Schedule::Random(seed),
            selection_step_budget(params),
        )?;
        let (shared, _) = run_sharing_dynamics(
            &gains,
            params,
            &PowerProfile::uniform(params),
            Schedule::RoundRobin,
            DEFAULT_EPSILON,
            BRAESS_MAX_SWEEPS,
        )?;
        Ok(vec![
            network_se(&sel.to_power_profile(params), &gains, params),
            network_se(&shared, &gains, params),
        ])
    })
}
