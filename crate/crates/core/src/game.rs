//! One round of the anecdote game: nature draws anecdotes, the sender picks
//! one, the receiver acts on it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{posterior_mean, NoiseDistribution, PosteriorMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n: usize,
    pub m_sender: f64,
    pub m_receiver: f64,
    pub noise: NoiseDistribution,
    pub mode: PosteriorMode,
}

impl GameConfig {
    pub fn new(
        n: usize,
        m_sender: f64,
        m_receiver: f64,
        noise: NoiseDistribution,
        mode: PosteriorMode,
    ) -> Result<Self> {
        let config = GameConfig {
            n,
            m_sender,
            m_receiver,
            noise,
            mode,
        };
        config.validate()?;
        Ok(config)
    }

    /// Aligned players (`M_S = M_R = 0`).
    pub fn aligned(n: usize, noise: NoiseDistribution, mode: PosteriorMode) -> Result<Self> {
        Self::new(n, 0.0, 0.0, noise, mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        if !self.m_sender.is_finite() || !self.m_receiver.is_finite() {
            return Err(Error::Domain("personal preferences must be finite".into()));
        }
        Ok(())
    }

    /// Preference misalignment `M_S - M_R`.
    pub fn delta(&self) -> f64 {
        self.m_sender - self.m_receiver
    }

    /// Same game with `M_S` moved so that `delta() == delta`.
    pub fn with_delta(self, delta: f64) -> Self {
        GameConfig {
            m_sender: self.m_receiver + delta,
            ..self
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        GameConfig { n, ..self }
    }
}

/// Which anecdote the sender reveals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TargetingScheme {
    /// The anecdote closest to `θ_S + offset`.
    Targeting { offset: f64 },
    Minimum,
    Maximum,
}

impl TargetingScheme {
    pub fn targeting(offset: f64) -> Self {
        TargetingScheme::Targeting { offset }
    }

    /// Selects from raw anecdotes given the sender's posterior mean.
    ///
    /// Ties at equal distance go to the smaller anecdote; repeated extreme
    /// values resolve to the first index.
    pub fn select(&self, anecdotes: &[f64], posterior_mean: f64) -> (usize, f64) {
        debug_assert!(!anecdotes.is_empty());
        match *self {
            TargetingScheme::Targeting { offset } => {
                let target = posterior_mean + offset;
                let mut best = (0, anecdotes[0]);
                let mut best_dist = (anecdotes[0] - target).abs();
                for (i, &x) in anecdotes.iter().enumerate().skip(1) {
                    let dist = (x - target).abs();
                    if dist < best_dist || (dist == best_dist && x < best.1) {
                        best = (i, x);
                        best_dist = dist;
                    }
                }
                best
            }
            TargetingScheme::Minimum => anecdotes
                .iter()
                .copied()
                .enumerate()
                .fold((0, anecdotes[0]), |b, (i, x)| if x < b.1 { (i, x) } else { b }),
            TargetingScheme::Maximum => anecdotes
                .iter()
                .copied()
                .enumerate()
                .fold((0, anecdotes[0]), |b, (i, x)| if x > b.1 { (i, x) } else { b }),
        }
    }
}

/// Receiver strategy `a(x) = x + shift`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRule {
    pub shift: f64,
}

impl ActionRule {
    pub fn new(shift: f64) -> Self {
        ActionRule { shift }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundDraw {
    pub theta: f64,
    pub anecdotes: Vec<f64>,
    /// Side signal; `Some(theta)` under foresight, `None` otherwise.
    pub y: Option<f64>,
    pub posterior_mean: f64,
}

/// Fills `buf` with `theta + ε_i` and returns the posterior mean. Shared by
/// [`draw_round`] and the estimators so both consume the stream identically.
pub(crate) fn draw_into<R: Rng + ?Sized>(
    config: &GameConfig,
    theta: f64,
    rng: &mut R,
    buf: &mut Vec<f64>,
) -> Result<f64> {
    buf.clear();
    buf.extend((0..config.n).map(|_| theta + config.noise.sample(rng)));
    posterior_mean(&config.noise, buf, config.mode, theta)
}

/// A round at `θ = 0`.
pub fn draw_round<R: Rng + ?Sized>(config: &GameConfig, rng: &mut R) -> Result<RoundDraw> {
    draw_round_at(config, 0.0, rng)
}

/// A round at an arbitrary state; only equivariance checks need `theta != 0`.
pub fn draw_round_at<R: Rng + ?Sized>(
    config: &GameConfig,
    theta: f64,
    rng: &mut R,
) -> Result<RoundDraw> {
    let mut anecdotes = Vec::with_capacity(config.n);
    let posterior_mean = draw_into(config, theta, rng, &mut anecdotes)?;
    let y = match config.mode {
        PosteriorMode::Foresight => Some(theta),
        PosteriorMode::NoForesight => None,
    };
    Ok(RoundDraw {
        theta,
        anecdotes,
        y,
        posterior_mean,
    })
}

pub fn select_anecdote(scheme: &TargetingScheme, round: &RoundDraw) -> (usize, f64) {
    scheme.select(&round.anecdotes, round.posterior_mean)
}

pub fn receiver_action(rule: &ActionRule, sent: f64) -> f64 {
    sent + rule.shift
}

pub fn quadratic_utility(action: f64, theta: f64, preference: f64) -> f64 {
    let gap = action - (theta + preference);
    -(gap * gap)
}

/// Receiver's optimal translation against a scheme with the given bias.
pub fn best_response_shift(config: &GameConfig, scheme_bias: f64) -> f64 {
    config.m_receiver - scheme_bias
}

/// Sender's best anecdote against `rule`, by exhaustive search.
///
/// Expected utility is evaluated at the sender's posterior mean; the
/// posterior variance is common to every choice and drops out.
pub fn sender_best_response(round: &RoundDraw, rule: &ActionRule, m_sender: f64) -> (usize, f64) {
    let mut best = (0, round.anecdotes[0]);
    let mut best_u = f64::NEG_INFINITY;
    for (i, &x) in round.anecdotes.iter().enumerate() {
        let u = quadratic_utility(receiver_action(rule, x), round.posterior_mean, m_sender);
        if u > best_u || (u == best_u && x < best.1) {
            best = (i, x);
            best_u = u;
        }
    }
    best
}
