//! Monte Carlo estimators for scheme bias, the H curve and both players'
//! losses.
//!
//! All estimators fix `θ = 0`. Replicate `k` draws from
//! `mc.replicate_stream(k)` and per-replicate values are collected in index
//! order before a pairwise reduction, so results are bit-identical for any
//! thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::game::{best_response_shift, draw_into, GameConfig, TargetingScheme};
use crate::stream::McParams;

const PAIRWISE_BLOCK: usize = 64;

// Substream tags for the two-pass protocols.
const BIAS_PASS: u64 = 1;
const LOSS_PASS: u64 = 2;

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// A Monte Carlo point estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub replicates: usize,
}

impl Estimate {
    /// A closed-form value with zero standard error.
    pub fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
            replicates: 0,
        }
    }

    /// Sample mean with standard error `s / √N`.
    pub fn mean_of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1 {
            pairwise_sum(&dev) / (n - 1) as f64
        } else {
            0.0
        };
        Estimate {
            value: mean,
            std_error: (var / n as f64).sqrt(),
            replicates: n,
        }
    }

    /// Unbiased sample variance; its standard error is that of the mean of
    /// squared deviations.
    pub fn variance_of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let sq_mean = Estimate::mean_of(&sq);
        let correction = n as f64 / (n as f64 - 1.0);
        Estimate {
            value: sq_mean.value * correction,
            std_error: sq_mean.std_error * correction,
            replicates: n,
        }
    }

    pub fn combined_std_error(&self, other: &Estimate) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// `|value - target| <= k · std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    /// `|self - other| <= k · combined std error`.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.combined_std_error(other)
    }
}

/// Sender's loss split into information loss and persuasion temptation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Variance of the sent anecdote.
    pub info_loss: Estimate,
    /// `[(M_R − M_S) + (β_actual − β_perceived)]²`.
    pub persuasion_term: Estimate,
    /// Mean of `(action − θ − M_S)²`.
    pub total: Estimate,
}

impl LossBreakdown {
    /// `total − info_loss − persuasion_term` and its combined standard error.
    pub fn decomposition_gap(&self) -> (f64, f64) {
        let gap = self.total.value - self.info_loss.value - self.persuasion_term.value;
        let se = (self.total.std_error.powi(2)
            + self.info_loss.std_error.powi(2)
            + self.persuasion_term.std_error.powi(2))
        .sqrt();
        (gap, se)
    }
}

/// Evaluates `f(anecdotes, posterior_mean)` on every replicate at `θ = 0`.
pub(crate) fn replicate_values<F>(config: &GameConfig, mc: &McParams, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], f64) -> f64 + Sync,
{
    config.validate()?;
    mc.validate()?;
    (0..mc.replicates as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(config.n),
            |buf, k| {
                let mut rng = mc.replicate_stream(k);
                let pm = draw_into(config, 0.0, &mut rng, buf)?;
                Ok(f(buf, pm))
            },
        )
        .collect()
}

/// Sent anecdote for each replicate (equal to `sent − θ` at `θ = 0`).
pub fn sent_values(
    scheme: &TargetingScheme,
    config: &GameConfig,
    mc: &McParams,
) -> Result<Vec<f64>> {
    replicate_values(config, mc, |xs, pm| scheme.select(xs, pm).1)
}

/// Bias `E[π(x, y) − θ]` of a scheme.
pub fn estimate_bias(
    scheme: &TargetingScheme,
    config: &GameConfig,
    mc: &McParams,
) -> Result<Estimate> {
    Ok(Estimate::mean_of(&sent_values(scheme, config, mc)?))
}

/// `H(r)`: mean signed gap from the target `θ_S + r` to the anecdote sent by
/// `targeting(r)`.
pub fn estimate_h(r: f64, config: &GameConfig, mc: &McParams) -> Result<Estimate> {
    let scheme = TargetingScheme::targeting(r);
    let z = replicate_values(config, mc, |xs, pm| scheme.select(xs, pm).1 - pm - r)?;
    Ok(Estimate::mean_of(&z))
}

/// Variance of the sent anecdote.
pub fn estimate_anecdote_variance(
    scheme: &TargetingScheme,
    config: &GameConfig,
    mc: &McParams,
) -> Result<Estimate> {
    Ok(Estimate::variance_of(&sent_values(scheme, config, mc)?))
}

/// Receiver's loss when best-responding to the scheme.
///
/// The scheme's bias is estimated first on its own substream; the loss
/// `(action − θ − M_R)²` is then averaged over a disjoint substream.
pub fn estimate_receiver_loss(
    scheme: &TargetingScheme,
    config: &GameConfig,
    mc: &McParams,
) -> Result<Estimate> {
    let bias = estimate_bias(scheme, config, &mc.substream(BIAS_PASS))?;
    let shift = best_response_shift(config, bias.value);
    receiver_loss_with_shift(scheme, config, &mc.substream(LOSS_PASS), shift)
}

/// Mean of `(sent + shift − M_R)²` at `θ = 0`.
pub fn receiver_loss_with_shift(
    scheme: &TargetingScheme,
    config: &GameConfig,
    mc: &McParams,
    shift: f64,
) -> Result<Estimate> {
    let target = config.m_receiver;
    let loss = replicate_values(config, mc, |xs, pm| {
        let gap = scheme.select(xs, pm).1 + shift - target;
        gap * gap
    })?;
    Ok(Estimate::mean_of(&loss))
}

/// Sender's loss when the receiver believes the bias is `bias_perceived`
/// but the sender actually plays `scheme_actual`.
///
/// The identity `total = info_loss + persuasion_term` holds exactly in
/// expectation in both modes, because `info_loss` is measured about `θ` rather
/// than the sender's posterior mean.
pub fn estimate_sender_loss(
    scheme_actual: &TargetingScheme,
    bias_perceived: f64,
    config: &GameConfig,
    mc: &McParams,
) -> Result<LossBreakdown> {
    let bias_actual = estimate_bias(scheme_actual, config, &mc.substream(BIAS_PASS))?;
    let sent = sent_values(scheme_actual, config, &mc.substream(LOSS_PASS))?;
    let shift = config.m_receiver - bias_perceived;
    let sender_target = config.m_sender;
    let losses: Vec<f64> = sent
        .iter()
        .map(|x| {
            let gap = x + shift - sender_target;
            gap * gap
        })
        .collect();
    let bracket = (config.m_receiver - config.m_sender) + (bias_actual.value - bias_perceived);
    Ok(LossBreakdown {
        info_loss: Estimate::variance_of(&sent),
        persuasion_term: Estimate {
            value: bracket * bracket,
            // delta method through the bias estimate
            std_error: 2.0 * bracket.abs() * bias_actual.std_error,
            replicates: bias_actual.replicates,
        },
        total: Estimate::mean_of(&losses),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseDistribution, PosteriorMode};

    fn gauss(n: usize, mode: PosteriorMode) -> GameConfig {
        GameConfig::aligned(n, NoiseDistribution::gaussian(1.0).unwrap(), mode).unwrap()
    }

    fn mc(reps: usize, seed: u64) -> McParams {
        McParams::new(reps, seed).unwrap()
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let xs = vec![0.1; 1_000_000];
        assert!((pairwise_sum(&xs) - 100_000.0).abs() < 1e-8);
    }

    #[test]
    fn estimate_statistics() {
        let e = Estimate::mean_of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.value, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((e.std_error - sd / 2.0).abs() < 1e-15);
        let v = Estimate::variance_of(&[1.0, 2.0, 3.0, 4.0]);
        assert!((v.value - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bias_of_symmetric_and_single_anecdote_games() {
        for d in [
            NoiseDistribution::gaussian(1.0).unwrap(),
            NoiseDistribution::laplace(1.0).unwrap(),
            NoiseDistribution::uniform(0.5).unwrap(),
        ] {
            let c = GameConfig::aligned(4, d, PosteriorMode::Foresight).unwrap();
            let b = estimate_bias(&TargetingScheme::targeting(0.0), &c, &mc(20_000, 1)).unwrap();
            assert!(b.within(0.0, 3.0), "{d}: {b:?}");
            let c1 = c.with_n(1);
            for s in [TargetingScheme::targeting(2.0), TargetingScheme::Maximum] {
                let b = estimate_bias(&s, &c1, &mc(20_000, 2)).unwrap();
                assert!(b.within(0.0, 3.0), "{d}: {b:?}");
            }
        }
    }

    /// E[min(X1, X2)] for iid Laplace(0, 1) by 2-D quadrature:
    /// E[min] = ∫∫ min(x, y) f(x) f(y) dx dy = 2 ∫ x f(x) (1 − F(x)) dx.
    #[test]
    fn minimum_of_two_laplace_bias() {
        let l = NoiseDistribution::laplace(1.0).unwrap();
        let oracle = 2.0
            * crate::quadrature::integrate(
                |x| x * l.pdf(x) * (1.0 - l.cdf(x)),
                -60.0,
                60.0,
                &[0.0],
                1e-13,
            )
            .unwrap();
        assert!((oracle + 0.75).abs() < 1e-9, "{oracle}");
        let c = GameConfig::aligned(2, l, PosteriorMode::Foresight).unwrap();
        let b = estimate_bias(&TargetingScheme::Minimum, &c, &mc(100_000, 3)).unwrap();
        assert!(b.within(oracle, 3.0), "{b:?}");
    }

    #[test]
    fn h_examples() {
        let c = gauss(3, PosteriorMode::Foresight);
        let h = estimate_h(0.0, &c, &mc(50_000, 4)).unwrap();
        assert!(h.within(0.0, 3.0));

        let c1 = gauss(1, PosteriorMode::Foresight);
        let h = estimate_h(0.7, &c1, &mc(50_000, 5)).unwrap();
        assert!(h.within(-0.7, 3.0), "{h:?}");

        // E[max of two standard normals] = 1/√π by quadrature
        let g = NoiseDistribution::gaussian(1.0).unwrap();
        let emax = 2.0
            * crate::quadrature::integrate(|x| x * g.pdf(x) * g.cdf(x), -40.0, 40.0, &[], 1e-13)
                .unwrap();
        assert!((emax - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-10);
        let h = estimate_h(10.0, &gauss(2, PosteriorMode::Foresight), &mc(50_000, 6)).unwrap();
        assert!(h.within(emax - 10.0, 3.0), "{h:?}");
    }

    #[test]
    fn anecdote_variance_examples() {
        let v = estimate_anecdote_variance(
            &TargetingScheme::targeting(0.0),
            &gauss(1, PosteriorMode::Foresight),
            &mc(100_000, 7),
        )
        .unwrap();
        assert!(v.within(1.0, 3.0), "{v:?}");

        let lap = GameConfig::aligned(
            2,
            NoiseDistribution::laplace(1.0).unwrap(),
            PosteriorMode::Foresight,
        )
        .unwrap();
        let v = estimate_anecdote_variance(&TargetingScheme::targeting(0.0), &lap, &mc(100_000, 8))
            .unwrap();
        assert!(v.within(0.5, 3.0), "{v:?}");

        let uni = GameConfig::aligned(
            3,
            NoiseDistribution::uniform(0.5).unwrap(),
            PosteriorMode::NoForesight,
        )
        .unwrap();
        let v = estimate_anecdote_variance(&TargetingScheme::targeting(0.0), &uni, &mc(100_000, 9))
            .unwrap();
        assert!(v.within(0.05, 3.0), "{v:?}");
    }

    #[test]
    fn receiver_loss_examples() {
        let s0 = TargetingScheme::targeting(0.0);
        let l = estimate_receiver_loss(&s0, &gauss(1, PosteriorMode::Foresight), &mc(100_000, 10))
            .unwrap();
        assert!(l.within(1.0, 3.0), "{l:?}");

        let lap = GameConfig::new(
            2,
            0.4,
            0.3,
            NoiseDistribution::laplace(1.0).unwrap(),
            PosteriorMode::Foresight,
        )
        .unwrap();
        let m = mc(100_000, 11);
        let l = estimate_receiver_loss(&s0, &lap, &m).unwrap();
        assert!(l.within(0.5, 3.0), "{l:?}");
        let v = estimate_anecdote_variance(&s0, &lap, &m.substream(99)).unwrap();
        assert!(l.agrees_with(&v, 3.0));
    }

    #[test]
    fn sender_loss_examples() {
        let c = gauss(1, PosteriorMode::Foresight);
        let m = mc(100_000, 12);
        let s = TargetingScheme::targeting(0.0);
        let l = estimate_sender_loss(&s, 0.0, &c, &m).unwrap();
        assert!(l.info_loss.within(1.0, 3.0));
        assert!(l.persuasion_term.value < 1e-4);
        assert!(l.total.within(1.0, 3.0));

        // matched biases collapse the bracket to Δ²
        let c = c.with_delta(0.5);
        let actual = estimate_bias(&s, &c, &m.substream(BIAS_PASS)).unwrap().value;
        let l = estimate_sender_loss(&s, actual, &c, &m).unwrap();
        assert!((l.persuasion_term.value - 0.25).abs() < 1e-12);
        // bracket cancels when β_actual − β_perceived = Δ
        let l = estimate_sender_loss(&s, actual - 0.5, &c, &m).unwrap();
        assert!(l.persuasion_term.value < 1e-20);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let c = GameConfig::aligned(
            3,
            NoiseDistribution::laplace(1.0).unwrap(),
            PosteriorMode::NoForesight,
        )
        .unwrap();
        let m = mc(5_000, 13);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| estimate_h(0.3, &c, &m).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }
}
