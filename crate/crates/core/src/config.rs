//! Plain-text network configuration.
//!
//! The file is a flat list of `key = value` lines (TOML syntax):
//!
//! ```text
//! K = 5
//! S = 3
//! w = [0.14, 0.40, 0.46]
//! snr_db = 10
//! seed = 7
//! ```
//!
//! `w` defaults to equal bandwidths. Sweep subcommands read `k_values` (or
//! `k_min`/`k_max`) and `trials`; dynamics read `schedule`, `max_steps`,
//! `epsilon` and `max_sweeps`.

use std::path::Path;

use serde::Deserialize;

use crate::channel::{params_from_snr, uniform_fractions, NetworkParams, RngSeed};
use crate::error::{Error, Result};
use crate::game::Schedule;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Optional for sweeps that list their own player counts.
    #[serde(rename = "K", default)]
    pub players: Option<usize>,
    #[serde(rename = "S")]
    pub stations: usize,
    #[serde(default)]
    pub w: Option<Vec<f64>>,
    #[serde(default = "default_snr")]
    pub snr_db: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub k_values: Option<Vec<usize>>,
    #[serde(default)]
    pub k_min: Option<usize>,
    #[serde(default)]
    pub k_max: Option<usize>,
    #[serde(default)]
    pub schedule: Option<ScheduleKind>,
    #[serde(default)]
    pub max_steps: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub max_sweeps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Random,
    RoundRobin,
}

impl ScheduleKind {
    pub fn with_seed(self, seed: RngSeed) -> Schedule {
        match self {
            ScheduleKind::Random => Schedule::Random(seed),
            ScheduleKind::RoundRobin => Schedule::RoundRobin,
        }
    }
}

fn default_snr() -> f64 {
    10.0
}

impl NetworkConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn bandwidth_fractions(&self) -> Vec<f64> {
        self.w
            .clone()
            .unwrap_or_else(|| uniform_fractions(self.stations.max(1)))
    }

    pub fn params(&self) -> Result<NetworkParams> {
        let players = self
            .players
            .ok_or_else(|| Error::Config("missing key `K`".into()))?;
        params_from_snr(
            players,
            self.stations,
            &self.bandwidth_fractions(),
            self.snr_db,
        )
    }

    /// Player counts for sweeps: `k_values`, else `k_min..=k_max`, else `K` alone.
    pub fn player_counts(&self) -> Result<Vec<usize>> {
        if let Some(v) = &self.k_values {
            return Ok(v.clone());
        }
        match (self.k_min, self.k_max) {
            (Some(lo), Some(hi)) if lo <= hi => Ok((lo..=hi).collect()),
            (None, None) => self
                .players
                .map(|k| vec![k])
                .ok_or_else(|| Error::Config("set `K`, `k_values` or `k_min`/`k_max`".into())),
            _ => Err(Error::Config(
                "k_min and k_max must both be set, k_min <= k_max".into(),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_values() {
        let c = NetworkConfig::parse(
            "K = 5\nS = 3\nw = [0.14, 0.40, 0.46]\nsnr_db = 10\nseed = 7\nschedule = \"round_robin\"\n",
        )
        .unwrap();
        assert_eq!(c.players, Some(5));
        assert_eq!(c.seed, 7);
        assert_eq!(c.schedule, Some(ScheduleKind::RoundRobin));
        let p = c.params().unwrap();
        assert_eq!(p.bandwidth_fractions(), &[0.14, 0.40, 0.46]);
        assert_eq!(c.player_counts().unwrap(), vec![5]);
    }

    #[test]
    fn defaults_and_ranges() {
        let c = NetworkConfig::parse("K = 2\nS = 4\nk_min = 2\nk_max = 5\n").unwrap();
        assert_eq!(c.bandwidth_fractions(), vec![0.25; 4]);
        assert_eq!(c.snr_db, 10.0);
        assert_eq!(c.player_counts().unwrap(), vec![2, 3, 4, 5]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(NetworkConfig::parse("K = 2\nS = 2\nbogus = 1\n").is_err());
        let c = NetworkConfig::parse("K = 2\nS = 2\nw = [0.7, 0.7]\n").unwrap();
        assert!(c.params().is_err());
        let c = NetworkConfig::parse("K = 2\nS = 2\nk_min = 3\n").unwrap();
        assert!(c.player_counts().is_err());
        let c = NetworkConfig::parse("S = 2\n").unwrap();
        assert!(c.params().is_err());
        assert!(c.player_counts().is_err());
        let c = NetworkConfig::parse("S = 2\nk_values = [1, 40]\n").unwrap();
        assert_eq!(c.player_counts().unwrap(), vec![1, 40]);
    }
}
