//! Network parameters and channel realizations.
//!
//! Every physical-layer scalar lives in [`NetworkParams`]. The usual
//! construction goes through [`params_from_snr`], which normalizes the total
//! bandwidth and the noise density to one so that the SNR only sets `p_max`.
//!
//! Random streams are derived from a single [`RngSeed`]:
//!
//! * trial `t` of an experiment uses `seed.trial(t)` (a SplitMix64 mix of the
//!   base seed and `t`);
//! * within one seed, the gains of player `k` come from a ChaCha8 generator
//!   seeded with the seed value and switched to stream `k`;
//! * the other consumers (random starts, update schedules) use the reserved
//!   streams in [`stream`], so they never overlap with channel draws.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;

/// Reserved ChaCha stream ids for non-channel randomness.
pub mod stream {
    pub const COMPLEX_CHANNELS: u64 = 1 << 62;
    pub const START_PROFILE: u64 = 1 << 63;
    pub const SCHEDULE: u64 = (1 << 63) + 1;
    pub const DEVIATIONS: u64 = (1 << 63) + 2;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Seed of the `trial`-th independent Monte Carlo trial.
    pub fn trial(self, trial: u64) -> RngSeed {
        RngSeed(splitmix64(
            self.0 ^ splitmix64(trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        ))
    }

    /// Generator positioned on one ChaCha stream of this seed.
    pub fn rng(self, stream_id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NetworkParams {
    num_players: usize,
    num_stations: usize,
    bandwidth_fractions: Vec<f64>,
    total_bandwidth: f64,
    noise_density: f64,
    p_max: f64,
    snr_db: f64,
}

impl NetworkParams {
    pub fn new(
        num_players: usize,
        bandwidth_fractions: Vec<f64>,
        total_bandwidth: f64,
        noise_density: f64,
        p_max: f64,
    ) -> Result<Self> {
        if num_players == 0 {
            return Err(Error::InvalidParams("need at least one player".into()));
        }
        validate_simplex(&bandwidth_fractions, "bandwidth fractions")?;
        if bandwidth_fractions.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidParams(
                "every bandwidth fraction must be positive".into(),
            ));
        }
        for (name, v) in [
            ("total_bandwidth", total_bandwidth),
            ("noise_density", noise_density),
            ("p_max", p_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and > 0"
                )));
            }
        }
        let snr_db = 10.0 * (p_max / (noise_density * total_bandwidth)).log10();
        Ok(NetworkParams {
            num_players,
            num_stations: bandwidth_fractions.len(),
            bandwidth_fractions,
            total_bandwidth,
            noise_density,
            p_max,
            snr_db,
        })
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_stations(&self) -> usize {
        self.num_stations
    }

    /// `B_s / B` for every station.
    pub fn bandwidth_fractions(&self) -> &[f64] {
        &self.bandwidth_fractions
    }

    pub fn bandwidth_fraction(&self, s: usize) -> f64 {
        self.bandwidth_fractions[s]
    }

    pub fn total_bandwidth(&self) -> f64 {
        self.total_bandwidth
    }

    pub fn noise_density(&self) -> f64 {
        self.noise_density
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    /// Noise power `N0 * B_s` at station `s`.
    pub fn sigma2(&self, s: usize) -> f64 {
        self.noise_density * self.total_bandwidth * self.bandwidth_fractions[s]
    }

    pub fn sigma2_all(&self) -> Vec<f64> {
        (0..self.num_stations).map(|s| self.sigma2(s)).collect()
    }

    /// Same network with a different number of players.
    pub fn with_players(&self, num_players: usize) -> Result<Self> {
        if num_players == 0 {
            return Err(Error::InvalidParams("need at least one player".into()));
        }
        Ok(NetworkParams {
            num_players,
            ..self.clone()
        })
    }

    /// Multiplies both `p_max` and the noise density by `factor`; SINRs are unchanged.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        NetworkParams::new(
            self.num_players,
            self.bandwidth_fractions.clone(),
            self.total_bandwidth,
            self.noise_density * factor,
            self.p_max * factor,
        )
    }
}

/// Builds parameters with `B = 1`, `N0 = 1` and `p_max = 10^(snr_db / 10)`.
pub fn params_from_snr(
    num_players: usize,
    num_stations: usize,
    bandwidth_fractions: &[f64],
    snr_db: f64,
) -> Result<NetworkParams> {
    if bandwidth_fractions.len() != num_stations {
        return Err(Error::InvalidParams(format!(
            "{} bandwidth fractions given for {} stations",
            bandwidth_fractions.len(),
            num_stations
        )));
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidParams("snr_db must be finite".into()));
    }
    NetworkParams::new(
        num_players,
        bandwidth_fractions.to_vec(),
        1.0,
        1.0,
        10f64.powf(snr_db / 10.0),
    )
}

pub fn uniform_fractions(num_stations: usize) -> Vec<f64> {
    vec![1.0 / num_stations as f64; num_stations]
}

pub(crate) fn validate_simplex(x: &[f64], what: &str) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidParams(format!("{what}: empty vector")));
    }
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParams(format!(
            "{what}: entries must be finite and nonnegative"
        )));
    }
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidParams(format!(
            "{what}: entries sum to {sum}, not 1"
        )));
    }
    Ok(())
}

/// K x S matrix of channel power gains `g = |h|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    gains: Array2<f64>,
    coeffs: Option<Array2<Complex64>>,
}

impl ChannelMatrix {
    pub fn from_gains(gains: Array2<f64>) -> Result<Self> {
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidParams(
                "channel gains must be finite and nonnegative".into(),
            ));
        }
        if gains.nrows() == 0 || gains.ncols() == 0 {
            return Err(Error::InvalidParams("empty channel matrix".into()));
        }
        Ok(ChannelMatrix {
            gains,
            coeffs: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("ragged channel rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let gains = Array2::from_shape_vec((rows.len(), ncols), flat)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::from_gains(gains)
    }

    pub fn from_coefficients(coeffs: Array2<Complex64>) -> Result<Self> {
        let gains = coeffs.mapv(|h| h.norm_sqr());
        let mut m = Self::from_gains(gains)?;
        m.coeffs = Some(coeffs);
        Ok(m)
    }

    pub fn gains(&self) -> &Array2<f64> {
        &self.gains
    }

    pub fn coefficients(&self) -> Option<&Array2<Complex64>> {
        self.coeffs.as_ref()
    }

    #[inline]
    pub fn gain(&self, k: usize, s: usize) -> f64 {
        self.gains[[k, s]]
    }

    pub fn num_players(&self) -> usize {
        self.gains.nrows()
    }

    pub fn num_stations(&self) -> usize {
        self.gains.ncols()
    }

    pub(crate) fn check_against(&self, params: &NetworkParams) -> Result<()> {
        if self.num_players() != params.num_players()
            || self.num_stations() != params.num_stations()
        {
            return Err(Error::Dimension(format!(
                "channel matrix is {}x{} but params describe {}x{}",
                self.num_players(),
                self.num_stations(),
                params.num_players(),
                params.num_stations()
            )));
        }
        Ok(())
    }

    /// One row per player, one column per station.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["player".to_string()];
        header.extend((1..=self.num_stations()).map(|s| format!("bs{s}")));
        w.write_record(&header)?;
        for (k, row) in self.gains.rows().into_iter().enumerate() {
            let mut rec = vec![(k + 1).to_string()];
            rec.extend(row.iter().map(|g| g.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws i.i.d. unit-mean exponential gains (Rayleigh fading power).
pub fn draw_channels(params: &NetworkParams, seed: RngSeed) -> ChannelMatrix {
    let (k_count, s_count) = (params.num_players(), params.num_stations());
    let mut gains = Array2::zeros((k_count, s_count));
    for k in 0..k_count {
        let mut rng = seed.rng(k as u64);
        for s in 0..s_count {
            let g: f64 = Exp1.sample(&mut rng);
            gains[[k, s]] = g;
        }
    }
    ChannelMatrix {
        gains,
        coeffs: None,
    }
}

/// Draws circularly symmetric unit-variance complex Gaussian coefficients and
/// keeps both `h` and `g = |h|^2`.
pub fn draw_complex_channels(params: &NetworkParams, seed: RngSeed) -> ChannelMatrix {
    let (k_count, s_count) = (params.num_players(), params.num_stations());
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut coeffs = Array2::from_elem((k_count, s_count), Complex64::new(0.0, 0.0));
    for k in 0..k_count {
        let mut rng = seed.rng(stream::COMPLEX_CHANNELS + k as u64);
        for s in 0..s_count {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            coeffs[[k, s]] = Complex64::new(re * scale, im * scale);
        }
    }
    let gains = coeffs.mapv(|h| h.norm_sqr());
    ChannelMatrix {
        gains,
        coeffs: Some(coeffs),
    }
}
