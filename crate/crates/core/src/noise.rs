//! Anecdote noise laws and the sender's posterior mean under a flat prior.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use rand::Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Relative tolerance for the Laplace posterior-mean integrals.
pub const POSTERIOR_REL_TOL: f64 = 1e-8;
/// Extra margin (in scale units) around the anecdote spread for the Laplace
/// posterior integration window.
const POSTERIOR_MARGIN: f64 = 10.0;

/// Zero-centred, symmetric noise law for `x_i = θ + ε_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseDistribution {
    Gaussian { scale: f64 },
    Laplace { scale: f64 },
    Uniform { halfwidth: f64 },
}

fn check_positive(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Domain(format!("{what} must be positive and finite, got {v}")))
    }
}

impl NoiseDistribution {
    pub fn gaussian(scale: f64) -> Result<Self> {
        Ok(NoiseDistribution::Gaussian {
            scale: check_positive("gaussian scale", scale)?,
        })
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        Ok(NoiseDistribution::Laplace {
            scale: check_positive("laplace scale", scale)?,
        })
    }

    pub fn uniform(halfwidth: f64) -> Result<Self> {
        Ok(NoiseDistribution::Uniform {
            halfwidth: check_positive("uniform halfwidth", halfwidth)?,
        })
    }

    /// Builds a law from its name (`gaussian`, `laplace`, `uniform`).
    pub fn from_name(name: &str, scale: f64) -> Result<Self> {
        match name {
            "gaussian" | "normal" => Self::gaussian(scale),
            "laplace" => Self::laplace(scale),
            "uniform" => Self::uniform(scale),
            other => Err(Error::Domain(format!("unsupported noise distribution '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseDistribution::Gaussian { .. } => "gaussian",
            NoiseDistribution::Laplace { .. } => "laplace",
            NoiseDistribution::Uniform { .. } => "uniform",
        }
    }

    /// Scale parameter, or the halfwidth for the uniform law.
    pub fn scale(&self) -> f64 {
        match *self {
            NoiseDistribution::Gaussian { scale } | NoiseDistribution::Laplace { scale } => scale,
            NoiseDistribution::Uniform { halfwidth } => halfwidth,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseDistribution::Gaussian { scale } => scale * scale,
            NoiseDistribution::Laplace { scale } => 2.0 * scale * scale,
            NoiseDistribution::Uniform { halfwidth } => halfwidth * halfwidth / 3.0,
        }
    }

    /// Gaussian and Laplace densities strictly decrease away from zero.
    pub fn is_single_peaked(&self) -> bool {
        !matches!(self, NoiseDistribution::Uniform { .. })
    }

    /// Support `[lo, hi]`, infinite for unbounded laws.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            NoiseDistribution::Uniform { halfwidth } => (-halfwidth, halfwidth),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            NoiseDistribution::Gaussian { scale } => {
                let z = x / scale;
                (-0.5 * z * z).exp() / (scale * (2.0 * PI).sqrt())
            }
            NoiseDistribution::Laplace { scale } => (-(x.abs()) / scale).exp() / (2.0 * scale),
            NoiseDistribution::Uniform { halfwidth } => {
                if x.abs() <= halfwidth {
                    0.5 / halfwidth
                } else {
                    0.0
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            NoiseDistribution::Gaussian { scale } => 0.5 * libm::erfc(-x / (scale * SQRT_2)),
            NoiseDistribution::Laplace { scale } => {
                let tail = 0.5 * (-(x.abs()) / scale).exp();
                if x >= 0.0 {
                    1.0 - tail
                } else {
                    tail
                }
            }
            NoiseDistribution::Uniform { halfwidth } => {
                ((x + halfwidth) / (2.0 * halfwidth)).clamp(0.0, 1.0)
            }
        }
    }

    /// One draw. Laplace and uniform use inverse transform on an open-interval
    /// uniform; the Gaussian uses the ziggurat sampler.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseDistribution::Gaussian { scale } => {
                let z: f64 = rng.sample(StandardNormal);
                scale * z
            }
            NoiseDistribution::Laplace { scale } => {
                let u: f64 = rng.sample(Open01);
                let v = u - 0.5;
                -scale * v.signum() * (1.0 - 2.0 * v.abs()).ln()
            }
            NoiseDistribution::Uniform { halfwidth } => {
                let u: f64 = rng.sample(Open01);
                halfwidth * (2.0 * u - 1.0)
            }
        }
    }
}

impl fmt::Display for NoiseDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.scale())
    }
}

/// What the sender knows beyond the anecdotes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorMode {
    /// The side signal reveals θ exactly.
    Foresight,
    /// The side signal is uninformative; the sender learns only from anecdotes.
    NoForesight,
}

impl PosteriorMode {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "foresight" => Ok(PosteriorMode::Foresight),
            "no_foresight" | "no-foresight" => Ok(PosteriorMode::NoForesight),
            other => Err(Error::Domain(format!("unknown posterior mode '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PosteriorMode::Foresight => "foresight",
            PosteriorMode::NoForesight => "no_foresight",
        }
    }
}

/// Sender's posterior mean of θ under a flat prior.
///
/// In foresight mode this is `y`. Otherwise it is
/// `∫θ ∏f(x_i−θ)dθ / ∫∏f(x_i−θ)dθ`: the sample mean for Gaussian noise, the
/// mid-range for uniform noise, and a numerical integral for Laplace noise.
pub fn posterior_mean(
    dist: &NoiseDistribution,
    anecdotes: &[f64],
    mode: PosteriorMode,
    y: f64,
) -> Result<f64> {
    if anecdotes.is_empty() {
        return Err(Error::Domain("posterior mean needs at least one anecdote".into()));
    }
    if mode == PosteriorMode::Foresight {
        return Ok(y);
    }
    match *dist {
        NoiseDistribution::Gaussian { .. } => Ok(mean(anecdotes)),
        NoiseDistribution::Uniform { halfwidth } => {
            let (lo, hi) = min_max(anecdotes);
            let spread = hi - lo;
            // posterior is uniform on [hi - w, lo + w]
            if spread > 2.0 * halfwidth * (1.0 + 1e-12) {
                return Err(Error::EmptyPosterior {
                    spread,
                    width: 2.0 * halfwidth,
                });
            }
            Ok(0.5 * (lo + hi))
        }
        NoiseDistribution::Laplace { scale } => laplace_posterior_mean(anecdotes, scale),
    }
}

fn mean(xs: &[f64]) -> f64 {
    crate::estimate::pairwise_sum(xs) / xs.len() as f64
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Laplace likelihood `exp(-Σ|x_i - θ|/s)` is exponential-linear between
/// consecutive sorted anecdotes, so each gap is integrated as its own piece
/// with the exponent evaluated from prefix sums.
fn laplace_posterior_mean(anecdotes: &[f64], scale: f64) -> Result<f64> {
    let mut sorted = anecdotes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 1 {
        return Ok(sorted[0]);
    }
    let center = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let spread = sorted[n - 1] - sorted[0];
    let half = spread + POSTERIOR_MARGIN * scale;

    // Work relative to the centre for conditioning.
    let rel: Vec<f64> = sorted.iter().map(|x| x - center).collect();
    let total: f64 = rel.iter().sum();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &x in &rel {
        prefix.push(prefix.last().unwrap() + x);
    }
    let log_lik_at = |below: usize, t: f64| {
        // Σ|x_i - t| with `below` anecdotes at or below t
        let k = below as f64;
        let left = k * t - prefix[below];
        let right = (total - prefix[below]) - (n as f64 - k) * t;
        -(left + right) / scale
    };
    let peak = log_lik_at(n / 2, 0.0);

    let mut breaks = Vec::with_capacity(n + 2);
    breaks.push(-half);
    breaks.extend_from_slice(&rel);
    breaks.push(half);

    let integral = quadrature::integrate_piecewise(
        |piece, t| {
            let w = (log_lik_at(piece, t) - peak).exp();
            [w, t * w]
        },
        &breaks,
        POSTERIOR_REL_TOL,
    )?;
    let [mass, first] = integral.values;
    if !(mass > 0.0) {
        return Err(Error::Quadrature {
            lo: center - half,
            hi: center + half,
            estimate: mass,
            change: f64::NAN,
            levels: integral.levels,
            evaluations: integral.evaluations,
        });
    }
    Ok(center + first / mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::seeded;
    use proptest::prelude::*;

    fn all() -> [NoiseDistribution; 3] {
        [
            NoiseDistribution::gaussian(1.3).unwrap(),
            NoiseDistribution::laplace(0.7).unwrap(),
            NoiseDistribution::uniform(0.5).unwrap(),
        ]
    }

    #[test]
    fn pdf_values() {
        let g = NoiseDistribution::gaussian(1.0).unwrap();
        assert!((g.pdf(0.0) - 0.398_942_280_4).abs() < 1e-10);
        let l = NoiseDistribution::laplace(1.0).unwrap();
        assert_eq!(l.pdf(0.0), 0.5);
        let u = NoiseDistribution::uniform(0.5).unwrap();
        assert_eq!(u.pdf(0.6), 0.0);
        assert_eq!(u.pdf(0.2), 1.0);
    }

    #[test]
    fn cdf_values() {
        let l = NoiseDistribution::laplace(1.0).unwrap();
        assert_eq!(l.cdf(0.0), 0.5);
        assert!((l.cdf(2f64.ln()) - 0.75).abs() < 1e-15);
        let u = NoiseDistribution::uniform(0.5).unwrap();
        assert!((u.cdf(0.25) - 0.75).abs() < 1e-15);
        for d in all() {
            assert!((d.cdf(0.0) - 0.5).abs() < 1e-15, "{d}");
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(NoiseDistribution::gaussian(0.0).is_err());
        assert!(NoiseDistribution::laplace(-1.0).is_err());
        assert!(NoiseDistribution::uniform(f64::NAN).is_err());
        assert!(NoiseDistribution::from_name("cauchy", 1.0).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        for d in all() {
            let (lo, hi) = match d.support() {
                (lo, hi) if lo.is_finite() => (lo, hi),
                _ => (-60.0 * d.scale(), 60.0 * d.scale()),
            };
            let mass = quadrature::integrate(|x| d.pdf(x), lo, hi, &[0.0], 1e-13).unwrap();
            assert!((mass - 1.0).abs() < 1e-9, "{d}: {mass}");
        }
    }

    #[test]
    fn symmetric_and_single_peaked() {
        for d in all() {
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let x = 0.013 * i as f64 + 0.001;
                assert_eq!(d.pdf(x), d.pdf(-x));
                assert!((d.cdf(x) + d.cdf(-x) - 1.0).abs() < 1e-14);
                if d.is_single_peaked() {
                    assert!(d.pdf(x) < prev, "{d} at {x}");
                }
                prev = d.pdf(x);
            }
        }
    }

    #[test]
    fn cdf_derivative_matches_pdf() {
        let h = 1e-5;
        for d in all() {
            for i in -40..=40 {
                let x = 0.0371 * i as f64;
                if let NoiseDistribution::Uniform { halfwidth } = d {
                    if (x.abs() - halfwidth).abs() < 2.0 * h {
                        continue;
                    }
                }
                let deriv = (d.cdf(x + h) - d.cdf(x - h)) / (2.0 * h);
                assert!((deriv - d.pdf(x)).abs() < 1e-5, "{d} at {x}");
            }
        }
    }

    #[test]
    fn sample_moments() {
        let g = NoiseDistribution::gaussian(1.0).unwrap();
        let mut rng = seeded(11);
        let n = 1_000_000;
        let m = (0..n).map(|_| g.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(m.abs() < 0.004, "{m}");

        // ∫x² e^{-|x|}/2 dx by quadrature = 2
        let l = NoiseDistribution::laplace(1.0).unwrap();
        let oracle =
            quadrature::integrate(|x| x * x * l.pdf(x), -80.0, 80.0, &[0.0], 1e-13).unwrap();
        assert!((oracle - 2.0).abs() < 1e-9);
        let mut rng = seeded(12);
        let xs: Vec<f64> = (0..n).map(|_| l.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - oracle).abs() < 0.02, "{var}");
    }

    #[test]
    fn same_seed_same_sequence() {
        for d in all() {
            let a: Vec<f64> = {
                let mut r = seeded(5);
                (0..32).map(|_| d.sample(&mut r)).collect()
            };
            let b: Vec<f64> = {
                let mut r = seeded(5);
                (0..32).map(|_| d.sample(&mut r)).collect()
            };
            assert_eq!(a, b);
        }
    }

    #[test]
    fn uniform_samples_stay_in_support() {
        let u = NoiseDistribution::uniform(0.5).unwrap();
        let mut r = seeded(3);
        assert!((0..10_000).all(|_| u.sample(&mut r).abs() < 0.5));
    }

    #[test]
    fn posterior_mean_examples() {
        let u = NoiseDistribution::uniform(0.5).unwrap();
        let pm = posterior_mean(&u, &[0.2, 0.5, 0.9], PosteriorMode::NoForesight, 0.0).unwrap();
        assert!((pm - 0.55).abs() < 1e-15);
        let g = NoiseDistribution::gaussian(1.0).unwrap();
        let pm = posterior_mean(&g, &[1.0, 2.0, 3.0], PosteriorMode::NoForesight, 0.0).unwrap();
        assert_eq!(pm, 2.0);
        let l = NoiseDistribution::laplace(1.0).unwrap();
        let pm = posterior_mean(&l, &[-1.0, 1.0], PosteriorMode::NoForesight, 0.0).unwrap();
        assert!(pm.abs() < 1e-12, "{pm}");
        let pm = posterior_mean(&l, &[-1.0, 1.0, 7.0], PosteriorMode::Foresight, 0.3).unwrap();
        assert_eq!(pm, 0.3);
    }

    #[test]
    fn empty_inputs_and_impossible_uniform_data() {
        let u = NoiseDistribution::uniform(0.5).unwrap();
        assert!(posterior_mean(&u, &[], PosteriorMode::NoForesight, 0.0).is_err());
        let err = posterior_mean(&u, &[0.0, 1.5], PosteriorMode::NoForesight, 0.0).unwrap_err();
        assert!(matches!(err, Error::EmptyPosterior { .. }));
    }

    /// Exact Laplace posterior mean: the likelihood is exp(a + b·θ) on each gap
    /// between sorted anecdotes, integrated in closed form over the whole line.
    fn laplace_exact(xs: &[f64], s: f64) -> f64 {
        let mut v = xs.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let c = v[n / 2];
        let v: Vec<f64> = v.iter().map(|x| x - c).collect();
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend_from_slice(&v);
        edges.push(f64::INFINITY);
        let (mut m0, mut m1) = (0.0, 0.0);
        for k in 0..=n {
            // -Σ|x_i - t|/s = (Σ_{i<k} x_i - Σ_{i>=k} x_i)/s + (n - 2k) t / s
            let a: f64 = (v[..k].iter().sum::<f64>() - v[k..].iter().sum::<f64>()) / s;
            let b = (n as f64 - 2.0 * k as f64) / s;
            let (lo, hi) = (edges[k], edges[k + 1]);
            if b == 0.0 {
                m0 += a.exp() * (hi - lo);
                m1 += a.exp() * (hi * hi - lo * lo) / 2.0;
            } else {
                let prim0 = |t: f64| if t.is_infinite() { 0.0 } else { (a + b * t).exp() / b };
                let prim1 = |t: f64| {
                    if t.is_infinite() {
                        0.0
                    } else {
                        (a + b * t).exp() * (t / b - 1.0 / (b * b))
                    }
                };
                m0 += prim0(hi) - prim0(lo);
                m1 += prim1(hi) - prim1(lo);
            }
        }
        c + m1 / m0
    }

    #[test]
    fn laplace_posterior_matches_closed_form() {
        let l = NoiseDistribution::laplace(1.0).unwrap();
        let mut rng = seeded(99);
        for n in [2usize, 3, 4, 5, 8] {
            for _ in 0..20 {
                let xs: Vec<f64> = (0..n).map(|_| l.sample(&mut rng)).collect();
                let got = posterior_mean(&l, &xs, PosteriorMode::NoForesight, 0.0).unwrap();
                let want = laplace_exact(&xs, 1.0);
                assert!((got - want).abs() < 1e-7, "n={n}: {got} vs {want}");
            }
        }
        let l2 = NoiseDistribution::laplace(2.5).unwrap();
        let xs = [0.3, -1.1, 4.0, 2.2];
        let got = posterior_mean(&l2, &xs, PosteriorMode::NoForesight, 0.0).unwrap();
        assert!((got - laplace_exact(&xs, 2.5)).abs() < 1e-7);
    }

    #[test]
    fn posterior_mean_unbiased_at_zero() {
        let n = 3;
        let reps = 100_000;
        for d in all() {
            let mut rng = seeded(2024);
            let mut buf = vec![0.0; n];
            let vals: Vec<f64> = (0..reps)
                .map(|_| {
                    buf.iter_mut().for_each(|x| *x = d.sample(&mut rng));
                    posterior_mean(&d, &buf, PosteriorMode::NoForesight, 0.0).unwrap()
                })
                .collect();
            let m = vals.iter().sum::<f64>() / reps as f64;
            let sd = (vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
            assert!(m.abs() <= 3.0 * sd / (reps as f64).sqrt(), "{d}: {m}");
        }
    }

    fn dist_strategy() -> impl Strategy<Value = NoiseDistribution> {
        prop_oneof![
            (0.2f64..3.0).prop_map(|s| NoiseDistribution::gaussian(s).unwrap()),
            (0.2f64..3.0).prop_map(|s| NoiseDistribution::laplace(s).unwrap()),
            (0.2f64..3.0).prop_map(|s| NoiseDistribution::uniform(s).unwrap()),
        ]
    }

    proptest! {
        #[test]
        fn translation_equivariance(
            d in dist_strategy(),
            seed in any::<u64>(),
            n in 1usize..7,
            c in -10.0f64..10.0,
            foresight in any::<bool>(),
        ) {
            let mode = if foresight { PosteriorMode::Foresight } else { PosteriorMode::NoForesight };
            let mut rng = seeded(seed);
            let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let base = posterior_mean(&d, &xs, mode, 0.0).unwrap();
            let moved = posterior_mean(&d, &shifted, mode, c).unwrap();
            prop_assert!((moved - (base + c)).abs() < 1e-7);
        }

        #[test]
        fn reflection(d in dist_strategy(), seed in any::<u64>(), n in 1usize..7) {
            let mut rng = seeded(seed);
            let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
            let a = posterior_mean(&d, &xs, PosteriorMode::NoForesight, 0.0).unwrap();
            let b = posterior_mean(&d, &neg, PosteriorMode::NoForesight, 0.0).unwrap();
            prop_assert!((a + b).abs() < 1e-7);
        }
    }
}
