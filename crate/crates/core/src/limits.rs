//! Limits of the selection game: the non-atomic (many players) version,
//! described by the fraction of players per station, and the mixed-strategy
//! extension with exact expected utilities and potential.

use ndarray::Array2;
use rayon::prelude::*;

use crate::channel::{
    draw_channels, stream, validate_simplex, ChannelMatrix, NetworkParams, RngSeed,
};
use crate::error::{Error, Result};
use crate::game::{potential_from_loads, Schedule};
use crate::selection::{
    run_selection_dynamics, ProfileIndex, ProfileSpace, SelectionProfile, DEFAULT_ENUMERATION_CAP,
};

/// Fraction of players per station, with the per-player bandwidths
/// `alpha = B / K` and `alpha_s = B_s / K` of the instance it was computed for.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FractionVector {
    pub fractions: Vec<f64>,
    pub alpha: f64,
    pub alpha_per_station: Vec<f64>,
}

impl FractionVector {
    pub fn new(fractions: Vec<f64>, params: &NetworkParams) -> Result<Self> {
        if fractions.len() != params.num_stations() {
            return Err(Error::Dimension("one fraction per station expected".into()));
        }
        validate_simplex(&fractions, "fractions")?;
        let k = params.num_players() as f64;
        Ok(FractionVector {
            fractions,
            alpha: params.total_bandwidth() / k,
            alpha_per_station: params
                .bandwidth_fractions()
                .iter()
                .map(|w| w * params.total_bandwidth() / k)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NonAtomicEquilibrium {
    pub fractions: FractionVector,
    /// Objective value of the fraction problem at the equilibrium.
    pub value: f64,
}

/// Non-atomic potential `sum_s w_s log2(N0 alpha_s + x_s p_max omega)`,
/// where `omega` is the mean channel gain.
pub fn nonatomic_potential(x: &FractionVector, params: &NetworkParams, omega: f64) -> f64 {
    x.fractions
        .iter()
        .zip(&x.alpha_per_station)
        .map(|(xs, a_s)| {
            let w = a_s / x.alpha;
            w * (params.noise_density() * a_s + xs * params.p_max() * omega).log2()
        })
        .sum()
}

/// Partial derivatives of [`nonatomic_potential`] with respect to each fraction.
pub fn nonatomic_gradient(x: &FractionVector, params: &NetworkParams, omega: f64) -> Vec<f64> {
    x.fractions
        .iter()
        .zip(&x.alpha_per_station)
        .map(|(xs, a_s)| {
            let w = a_s / x.alpha;
            w * params.p_max() * omega
                / ((params.noise_density() * a_s + xs * params.p_max() * omega)
                    * std::f64::consts::LN_2)
        })
        .collect()
}

/// The unique maximizer of the non-atomic potential: `x_s = B_s / B`.
pub fn nonatomic_equilibrium_fractions(
    params: &NetworkParams,
    omega: f64,
) -> Result<NonAtomicEquilibrium> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::InvalidParams("omega must be finite and > 0".into()));
    }
    let fractions = FractionVector::new(params.bandwidth_fractions().to_vec(), params)?;
    let value = nonatomic_potential(&fractions, params, omega);
    Ok(NonAtomicEquilibrium { fractions, value })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct EmpiricalFractions {
    pub mean: FractionVector,
    pub std_err: Vec<f64>,
    pub trials: usize,
}

/// Step budget for one selection-dynamics run on `params`.
pub fn selection_step_budget(params: &NetworkParams) -> usize {
    let k = params.num_players();
    // Every change raises the potential, and each player settles in well under
    // 100 visits even on K = 100 networks; this bounds runaway loops only.
    1000 * k * params.num_stations() + 10_000
}

/// Station of every player at the equilibrium reached by random-schedule
/// dynamics from a random start, one run per trial.
pub fn empirical_fractions(
    params: &NetworkParams,
    seed: RngSeed,
    trials: usize,
) -> Result<EmpiricalFractions> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let s_count = params.num_stations();
    let k = params.num_players() as f64;
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed.trial(t);
            let gains = draw_channels(params, trial_seed);
            let start = SelectionProfile::uniform_random(
                params,
                &mut trial_seed.rng(stream::START_PROFILE),
            );
            let (end, _) = run_selection_dynamics(
                &gains,
                params,
                &start,
                Schedule::Random(trial_seed),
                selection_step_budget(params),
            )?;
            let mut x = vec![0.0; s_count];
            for &s in end.assignment() {
                x[s] += 1.0 / k;
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;

    let n = trials as f64;
    let mut mean = vec![0.0; s_count];
    for x in &per_trial {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let std_err = (0..s_count)
        .map(|s| {
            if trials < 2 {
                return 0.0;
            }
            let var = per_trial
                .iter()
                .map(|x| (x[s] - mean[s]).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            (var / n).sqrt()
        })
        .collect();
    // Renormalize so that rounding in the per-trial sums cannot break the simplex check.
    let total: f64 = mean.iter().sum();
    mean.iter_mut().for_each(|m| *m /= total);
    Ok(EmpiricalFractions {
        mean: FractionVector::new(mean, params)?,
        std_err,
        trials,
    })
}

/// One probability vector over stations per player.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProfile {
    q: Array2<f64>,
}

impl MixedProfile {
    pub fn new(q: Array2<f64>, params: &NetworkParams) -> Result<Self> {
        if q.dim() != (params.num_players(), params.num_stations()) {
            return Err(Error::Dimension(format!(
                "mixed profile is {:?}, expected {}x{}",
                q.dim(),
                params.num_players(),
                params.num_stations()
            )));
        }
        for row in q.rows() {
            validate_simplex(row.as_slice().unwrap_or(&row.to_vec()), "mixed strategy")?;
        }
        Ok(MixedProfile { q })
    }

    pub fn degenerate(profile: &SelectionProfile, params: &NetworkParams) -> Self {
        let mut q = Array2::zeros((params.num_players(), params.num_stations()));
        for (k, &s) in profile.assignment().iter().enumerate() {
            q[[k, s]] = 1.0;
        }
        MixedProfile { q }
    }

    pub fn uniform(params: &NetworkParams) -> Self {
        MixedProfile {
            q: Array2::from_elem(
                (params.num_players(), params.num_stations()),
                1.0 / params.num_stations() as f64,
            ),
        }
    }

    pub fn probabilities(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn with_row(&self, k: usize, row: &[f64], params: &NetworkParams) -> Result<Self> {
        let mut q = self.q.clone();
        q.row_mut(k).assign(&ndarray::ArrayView1::from(row));
        MixedProfile::new(q, params)
    }
}

fn checked_space(params: &NetworkParams) -> Result<ProfileSpace> {
    let space = ProfileSpace::of(params).map_err(|_| Error::EnumerationCap {
        profiles: (params.num_stations() as u128).saturating_pow(params.num_players() as u32),
        cap: DEFAULT_ENUMERATION_CAP,
    })?;
    if space.len() > DEFAULT_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            profiles: space.len() as u128,
            cap: DEFAULT_ENUMERATION_CAP,
        });
    }
    Ok(space)
}

/// Exact expectation over all pure profiles of `f(assignment, loads)`
/// weighted by the product of the players' probabilities.
fn mixed_expectation<F>(
    q: &MixedProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    f: F,
) -> Result<f64>
where
    F: Fn(&[usize], &[f64]) -> f64 + Sync,
{
    gains.check_against(params)?;
    let space = checked_space(params)?;
    let probs = q.probabilities();
    let total = (0..space.len())
        .into_par_iter()
        .map(|i| {
            let profile = space.profile(ProfileIndex(i));
            let a = profile.assignment();
            let weight: f64 = a.iter().enumerate().map(|(k, &s)| probs[[k, s]]).product();
            if weight == 0.0 {
                return 0.0;
            }
            let mut loads = vec![0.0; params.num_stations()];
            for (k, &s) in a.iter().enumerate() {
                loads[s] += params.p_max() * gains.gain(k, s);
            }
            weight * f(a, &loads)
        })
        // Fixed-order reduction keeps results bit-identical across thread counts.
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(total)
}

/// Expected utility of player `k` under independent mixed strategies.
pub fn mixed_utility(
    q: &MixedProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
    k: usize,
) -> Result<f64> {
    if k >= params.num_players() {
        return Err(Error::InvalidParams(format!("player {k} out of range")));
    }
    mixed_expectation(q, gains, params, |a, loads| {
        let s = a[k];
        let own = params.p_max() * gains.gain(k, s);
        let zeta = params.sigma2(s) + loads[s] - own;
        params.bandwidth_fraction(s) * (own / zeta).ln_1p() / std::f64::consts::LN_2
    })
}

/// Expected potential under independent mixed strategies.
pub fn mixed_potential(
    q: &MixedProfile,
    gains: &ChannelMatrix,
    params: &NetworkParams,
) -> Result<f64> {
    mixed_expectation(q, gains, params, |_, loads| {
        potential_from_loads(loads, params)
    })
}

/// For two players and two stations: true when some player has a station
/// that is at least as good when shared as the other station is when alone,
/// so that station strictly beats every fully mixed strategy and no fully
/// mixed equilibrium exists.
///
/// The comparison is made on bandwidth-weighted rates. With equal bandwidths
/// it reduces to `g_{k,-s} / g_{k,s} <= sigma_{-s}^2 / (sigma_s^2 + p_max g_{-k,s})`.
pub fn no_fully_mixed_ne_2x2(gains: &ChannelMatrix, params: &NetworkParams) -> Result<bool> {
    if params.num_players() != 2 || params.num_stations() != 2 {
        return Err(Error::InvalidParams(
            "fully mixed test is defined for two players and two stations".into(),
        ));
    }
    gains.check_against(params)?;
    let p = params.p_max();
    let rate = |s: usize, snr: f64| params.bandwidth_fraction(s) * snr.ln_1p();
    for k in 0..2 {
        let other = 1 - k;
        for s in 0..2 {
            let alt = 1 - s;
            let shared = rate(
                s,
                p * gains.gain(k, s) / (params.sigma2(s) + p * gains.gain(other, s)),
            );
            let alone_elsewhere = rate(alt, p * gains.gain(k, alt) / params.sigma2(alt));
            if alone_elsewhere <= shared {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{params_from_snr, uniform_fractions};
    use crate::game::{potential, utility};
    use crate::selection::enumerate_ne;

    fn six_station_params(k: usize) -> NetworkParams {
        params_from_snr(k, 6, &[0.25, 0.11, 0.20, 0.05, 0.25, 0.14], 10.0).unwrap()
    }

    #[test]
    fn equilibrium_is_bandwidth_split() {
        let p = six_station_params(100);
        let eq = nonatomic_equilibrium_fractions(&p, 1.0).unwrap();
        assert_eq!(eq.fractions.fractions, p.bandwidth_fractions());

        let p = params_from_snr(10, 4, &uniform_fractions(4), 10.0).unwrap();
        let eq = nonatomic_equilibrium_fractions(&p, 1.0).unwrap();
        assert!(eq.fractions.fractions.iter().all(|x| *x == 0.25));

        let p = params_from_snr(10, 1, &[1.0], 10.0).unwrap();
        let eq = nonatomic_equilibrium_fractions(&p, 1.0).unwrap();
        assert_eq!(eq.fractions.fractions, vec![1.0]);
        let expected = (p.noise_density() * eq.fractions.alpha + p.p_max()).log2();
        assert!((eq.value - expected).abs() < 1e-14);
    }

    #[test]
    fn gradient_equalized_at_equilibrium() {
        let p = six_station_params(100);
        let eq = nonatomic_equilibrium_fractions(&p, 1.0).unwrap();
        let grad = nonatomic_gradient(&eq.fractions, &p, 1.0);
        for g in &grad {
            assert!((g - grad[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_search_agrees() {
        let p = params_from_snr(20, 3, &[0.2, 0.5, 0.3], 10.0).unwrap();
        let eq = nonatomic_equilibrium_fractions(&p, 1.0).unwrap();
        let n = 1000;
        let mut best = (f64::NEG_INFINITY, vec![]);
        for i in 0..=n {
            for j in 0..=(n - i) {
                let x = vec![
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    (n - i - j) as f64 / n as f64,
                ];
                let fv = FractionVector {
                    fractions: x.clone(),
                    ..eq.fractions.clone()
                };
                let v = nonatomic_potential(&fv, &p, 1.0);
                if v > best.0 {
                    best = (v, x);
                }
            }
        }
        assert!(eq.value >= best.0 - 1e-12);
        for (a, b) in best.1.iter().zip(p.bandwidth_fractions()) {
            assert!((a - b).abs() <= 1e-3 + 1e-12);
        }
    }

    #[test]
    fn concave_along_segments() {
        let p = params_from_snr(30, 3, &[0.2, 0.5, 0.3], 10.0).unwrap();
        let mut rng = RngSeed(5).rng(0);
        use rand::Rng;
        let point = |rng: &mut rand_chacha::ChaCha8Rng| {
            let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
            let t: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / t).collect::<Vec<f64>>()
        };
        let base = nonatomic_equilibrium_fractions(&p, 1.0).unwrap().fractions;
        for _ in 0..200 {
            let (a, b) = (point(&mut rng), point(&mut rng));
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let f = |x: Vec<f64>| {
                nonatomic_potential(
                    &FractionVector {
                        fractions: x,
                        ..base.clone()
                    },
                    &p,
                    1.0,
                )
            };
            assert!(f(mid) >= 0.5 * (f(a) + f(b)) - 1e-12);
        }
    }

    #[test]
    fn single_player_fractions_are_basis_vectors() {
        let p = params_from_snr(1, 3, &[0.2, 0.5, 0.3], 10.0).unwrap();
        let r = empirical_fractions(&p, RngSeed(1), 1).unwrap();
        assert!(r.mean.fractions.iter().filter(|&&x| x == 1.0).count() == 1);
    }

    #[test]
    fn degenerate_mixture_is_pure() {
        let p = params_from_snr(3, 2, &[0.3, 0.7], 10.0).unwrap();
        let g = draw_channels(&p, RngSeed(6));
        let prof = SelectionProfile::new(vec![1, 0, 1], &p).unwrap();
        let q = MixedProfile::degenerate(&prof, &p);
        let pp = prof.to_power_profile(&p);
        for k in 0..3 {
            assert!(
                (mixed_utility(&q, &g, &p, k).unwrap() - utility(&pp, &g, &p, k)).abs() < 1e-12
            );
        }
        assert!((mixed_potential(&q, &g, &p).unwrap() - potential(&pp, &g, &p)).abs() < 1e-12);
    }

    #[test]
    fn uniform_mixture_is_mean() {
        let p = params_from_snr(2, 2, &[0.4, 0.6], 10.0).unwrap();
        let g = draw_channels(&p, RngSeed(7));
        let q = MixedProfile::uniform(&p);
        let mean = [[0, 0], [0, 1], [1, 0], [1, 1]]
            .iter()
            .map(|a| {
                utility(
                    &SelectionProfile::new(a.to_vec(), &p)
                        .unwrap()
                        .to_power_profile(&p),
                    &g,
                    &p,
                    0,
                )
            })
            .sum::<f64>()
            / 4.0;
        assert!((mixed_utility(&q, &g, &p, 0).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn mixed_utility_matches_sampling() {
        use rand::Rng;
        let p = params_from_snr(3, 2, &[0.3, 0.7], 10.0).unwrap();
        let g = draw_channels(&p, RngSeed(8));
        let q = MixedProfile::new(ndarray::array![[0.2, 0.8], [0.6, 0.4], [0.5, 0.5]], &p).unwrap();
        let exact = mixed_utility(&q, &g, &p, 0).unwrap();
        let mut rng = RngSeed(9).rng(0);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let a: Vec<usize> = (0..3)
                    .map(|k| usize::from(rng.random::<f64>() >= q.probabilities()[[k, 0]]))
                    .collect();
                utility(
                    &SelectionProfile::new(a, &p).unwrap().to_power_profile(&p),
                    &g,
                    &p,
                    0,
                )
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * se,
            "{mean} vs {exact} (se {se})"
        );
    }

    #[test]
    fn mixed_potential_is_exact_and_multilinear() {
        let p = params_from_snr(2, 2, &[0.5, 0.5], 10.0).unwrap();
        let g = draw_channels(&p, RngSeed(10));
        let q = MixedProfile::new(ndarray::array![[0.3, 0.7], [0.9, 0.1]], &p).unwrap();
        let q2 = q.with_row(0, &[0.8, 0.2], &p).unwrap();
        let du = mixed_utility(&q, &g, &p, 0).unwrap() - mixed_utility(&q2, &g, &p, 0).unwrap();
        let dphi = mixed_potential(&q, &g, &p).unwrap() - mixed_potential(&q2, &g, &p).unwrap();
        assert!((du - dphi).abs() < 1e-9);

        // Collinearity along row 1 with row 0 fixed.
        let f =
            |t: f64| mixed_potential(&q.with_row(1, &[t, 1.0 - t], &p).unwrap(), &g, &p).unwrap();
        let (a, b, c) = (f(0.1), f(0.4), f(0.7));
        assert!(((b - a) - (c - b)).abs() < 1e-12);
    }

    #[test]
    fn pure_equilibria_are_mixed_equilibria() {
        let p = params_from_snr(3, 2, &[0.4, 0.6], 10.0).unwrap();
        let g = draw_channels(&p, RngSeed(12));
        let rep = enumerate_ne(&g, &p).unwrap();
        let space = ProfileSpace::of(&p).unwrap();
        for e in &rep.equilibria {
            let q = MixedProfile::degenerate(&space.profile(e.index), &p);
            for k in 0..3 {
                let here = mixed_utility(&q, &g, &p, k).unwrap();
                for s in 0..2 {
                    let mut row = vec![0.0; 2];
                    row[s] = 1.0;
                    let dev = q.with_row(k, &row, &p).unwrap();
                    assert!(mixed_utility(&dev, &g, &p, k).unwrap() <= here + 1e-12);
                }
            }
        }
    }

    #[test]
    fn fully_mixed_examples() {
        // sigma^2 = (1, 1) needs B = 2 with w = (0.5, 0.5).
        let p = NetworkParams::new(2, vec![0.5, 0.5], 2.0, 1.0, 9.0).unwrap();
        // Player 0: g_{0,1} / g_{0,0} = 0.1 against 1 / (1 + 9 * 1) = 0.1.
        let g = ChannelMatrix::from_rows(&[vec![1.0, 0.1], vec![1.0, 1.0]]).unwrap();
        assert!(no_fully_mixed_ne_2x2(&g, &p).unwrap());

        let p = NetworkParams::new(2, vec![0.5, 0.5], 2.0, 1.0, 0.1).unwrap();
        let g = ChannelMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(!no_fully_mixed_ne_2x2(&g, &p).unwrap());

        let p3 = params_from_snr(3, 2, &[0.5, 0.5], 10.0).unwrap();
        let g3 = draw_channels(&p3, RngSeed(0));
        assert!(no_fully_mixed_ne_2x2(&g3, &p3).is_err());
    }

    #[test]
    fn mixed_cap_enforced() {
        let p = params_from_snr(12, 4, &uniform_fractions(4), 10.0).unwrap();
        let g = draw_channels(&p, RngSeed(0));
        assert!(matches!(
            mixed_potential(&MixedProfile::uniform(&p), &g, &p),
            Err(Error::EnumerationCap { .. })
        ));
    }
}
