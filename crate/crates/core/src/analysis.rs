//! Closed-form and semi-closed-form results: three uniform anecdotes,
//! commitment scans, the asymptotic commitment loss, extreme-value constants,
//! and the choice between an aligned and an expert sender.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{estimate_anecdote_variance, estimate_receiver_loss, Estimate};
use crate::game::{GameConfig, TargetingScheme};
use crate::noise::{NoiseDistribution, PosteriorMode};
use crate::quadrature;
use crate::stream::McParams;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const APPENDIX_REL_TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Three anecdotes uniform on [0, 1] (θ = 1/2), no foresight.

/// `Pr[x* < w]` where `x*` is the anecdote sent by `targeting(r)`.
///
/// With sorted anecdotes `x1 ≤ x2 ≤ x3` the target `(x1 + x3)/2 + r` picks
/// `x2` when `x2 > x1 + 2r` and `x3` otherwise. At `r = 0` this is the CDF of
/// the middle order statistic, `w³ + 3w²(1 − w)`.
pub fn three_uniform_sent_cdf(w: f64, r: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if w >= 1.0 {
        return 1.0;
    }
    // two uniforms on [0, w] at least 2r apart
    let apart = if w > 2.0 * r {
        let q = (w - 2.0 * r) / w;
        q * q
    } else {
        0.0
    };
    w * w * w + 3.0 * w * w * (1.0 - w) * apart
}

/// `Pr[d > z]` for `d = |x* − (1/2 + r)|`.
pub fn three_uniform_tail(z: f64, r: f64) -> f64 {
    let c = 0.5 + r;
    if z < 0.5 - r {
        three_uniform_sent_cdf(c - z, r) + 1.0 - three_uniform_sent_cdf(c + z, r)
    } else if z < 0.5 + r {
        three_uniform_sent_cdf(c - z, r)
    } else {
        0.0
    }
}

/// `E[d²] = ∫ Pr[d² > z] dz` for the receiver shifting `x*` by `r`.
pub fn three_uniform_targeted_loss(r: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&r) {
        return Err(Error::Domain(format!("offset must lie in [0, 1/2], got {r}")));
    }
    let inner = (0.5 - r) * (0.5 - r);
    let outer = (0.5 + r) * (0.5 + r);
    quadrature::integrate(
        |z| three_uniform_tail(z.sqrt(), r),
        0.0,
        outer,
        &[inner],
        APPENDIX_REL_TOL,
    )
}

/// Loss of sending the middle anecdote, which is what the unbiased
/// nearest-to-posterior-mean scheme does with three uniform anecdotes.
pub fn three_uniform_unbiased_loss() -> f64 {
    three_uniform_targeted_loss(0.0).expect("r = 0 is in range and the integrand is polynomial")
}

/// `(r, loss)` rows for a grid of offsets.
pub fn three_uniform_loss_table(r_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    r_grid
        .iter()
        .map(|&r| Ok((r, three_uniform_targeted_loss(r)?)))
        .collect()
}

// ---------------------------------------------------------------------------
// Commitment

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommitmentResult {
    pub grid: Vec<f64>,
    pub variance_at: Vec<Estimate>,
    pub argmin_offset: f64,
    pub min_variance: Estimate,
}

/// Sent-anecdote variance of `targeting(r)` across a grid of offsets. The
/// committed sender's optimum is the smallest.
pub fn commitment_scan(
    config: &GameConfig,
    r_grid: &[f64],
    mc: &McParams,
) -> Result<CommitmentResult> {
    if r_grid.is_empty() {
        return Err(Error::Domain("commitment scan needs a nonempty grid".into()));
    }
    let variance_at = r_grid
        .par_iter()
        .enumerate()
        .map(|(i, &r)| {
            estimate_anecdote_variance(
                &TargetingScheme::targeting(r),
                config,
                &mc.substream(i as u64),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let best = variance_at
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(CommitmentResult {
        grid: r_grid.to_vec(),
        argmin_offset: r_grid[best],
        min_variance: variance_at[best],
        variance_at,
    })
}

/// Leading term `1 / (2 n² f(δ)²)` of the committed sender's loss.
pub fn asymptotic_commit_loss(dist: &NoiseDistribution, n: usize, delta: f64) -> Result<f64> {
    let f = dist.pdf(delta);
    if !(f > 0.0) {
        return Err(Error::Domain(format!("{dist} has zero density at {delta}")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let n = n as f64;
    Ok(1.0 / (2.0 * n * n * f * f))
}

// ---------------------------------------------------------------------------
// Extreme values

/// Gumbel norming constants for the maximum of `n` draws (the minimum is its
/// mirror image), with the moments of the limiting law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremeValueStats {
    pub a_n: f64,
    pub b_n: f64,
    pub gumbel_mean: f64,
    pub gumbel_variance: f64,
}

impl ExtremeValueStats {
    fn from_norming(a_n: f64, b_n: f64) -> Self {
        ExtremeValueStats {
            a_n,
            b_n,
            gumbel_mean: b_n + EULER_GAMMA / a_n,
            gumbel_variance: PI * PI / (6.0 * a_n * a_n),
        }
    }
}

pub fn extreme_value_params(dist: &NoiseDistribution, n: usize) -> Result<ExtremeValueStats> {
    if n < 2 {
        return Err(Error::Domain(format!("extreme values need n >= 2, got {n}")));
    }
    norming_constants(dist, n as f64)
}

/// Norming constants at a real-valued sample size.
pub(crate) fn norming_constants(dist: &NoiseDistribution, nf: f64) -> Result<ExtremeValueStats> {
    match *dist {
        NoiseDistribution::Laplace { scale } => Ok(ExtremeValueStats::from_norming(
            1.0 / scale,
            scale * (nf / 2.0).ln(),
        )),
        NoiseDistribution::Gaussian { scale } => {
            let root = (2.0 * nf.ln()).sqrt();
            let b = root - (nf.ln().ln() + (4.0 * PI).ln()) / (2.0 * root);
            Ok(ExtremeValueStats::from_norming(root / scale, scale * b))
        }
        NoiseDistribution::Uniform { .. } => Err(Error::Domain(
            "uniform noise has no Gumbel extreme-value limit".into(),
        )),
    }
}

/// Variance of the anecdote closest to `θ` among `n`.
///
/// For Laplace noise `|x_i|` is exponential, so the closest distance is
/// exponential with rate `n/s` and the variance is exactly `2s²/n²`.
pub fn closest_of_n_variance(
    dist: &NoiseDistribution,
    n: usize,
    mc: &McParams,
) -> Result<Estimate> {
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    match *dist {
        NoiseDistribution::Laplace { scale } => {
            let nf = n as f64;
            Ok(Estimate::exact(2.0 * scale * scale / (nf * nf)))
        }
        _ => {
            let config = GameConfig::aligned(n, *dist, PosteriorMode::Foresight)?;
            estimate_anecdote_variance(&TargetingScheme::targeting(0.0), &config, mc)
        }
    }
}

// ---------------------------------------------------------------------------
// Choosing between senders

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preference {
    Aligned,
    Expert,
    Tie,
}

impl Preference {
    pub fn name(&self) -> &'static str {
        match self {
            Preference::Aligned => "aligned",
            Preference::Expert => "expert",
            Preference::Tie => "tie",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub loss_aligned: Estimate,
    pub loss_expert: Estimate,
    pub preferred: Preference,
}

/// Compares the receiver's debiased loss from an aligned sender playing the
/// unbiased scheme with that from an expert playing `expert_scheme`.
///
/// Both sides share `mc`, so identical inputs give identical losses. A side
/// is preferred only when the gap exceeds three combined standard errors.
pub fn expert_compare(
    aligned: &GameConfig,
    expert: &GameConfig,
    mc: &McParams,
    expert_scheme: &TargetingScheme,
) -> Result<ComparisonResult> {
    if aligned.delta() != 0.0 {
        return Err(Error::Domain(format!(
            "aligned sender must have delta = 0, got {}",
            aligned.delta()
        )));
    }
    let loss_aligned = estimate_receiver_loss(&TargetingScheme::targeting(0.0), aligned, mc)?;
    let loss_expert = estimate_receiver_loss(expert_scheme, expert, mc)?;
    let gap = loss_aligned.value - loss_expert.value;
    let band = 3.0 * loss_aligned.combined_std_error(&loss_expert);
    let preferred = if gap.abs() <= band {
        Preference::Tie
    } else if gap < 0.0 {
        Preference::Aligned
    } else {
        Preference::Expert
    };
    Ok(ComparisonResult {
        loss_aligned,
        loss_expert,
        preferred,
    })
}
