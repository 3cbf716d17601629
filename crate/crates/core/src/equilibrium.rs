//! Translation-invariant equilibrium: find the offset `r*` with
//! `H(r*) = −Δ`, then read off the bias `δ* = r* + H(r*)` and the receiver's
//! shift `M_R − δ*`.
//!
//! `H` is only available through Monte Carlo, so the root is bracketed and
//! bisected. Each bisection step uses a fresh substream, and the replicate
//! budget grows by 1.5× per step so the last steps run at the terminal budget.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{
    estimate_h, estimate_receiver_loss, estimate_sender_loss, Estimate, LossBreakdown,
};
use crate::game::{GameConfig, TargetingScheme};
use crate::stream::McParams;

const BUDGET_GROWTH: f64 = 1.5;
const MIN_STEP_REPLICATES: usize = 1_000;
const RECHECK_SIGMAS: f64 = 2.0;
const MAX_REPAIRS: u64 = 3;
const MAX_EXPANSIONS: u32 = 10;
const DIAGNOSTIC_POINTS: usize = 21;

const TAG_BRACKET: u64 = 0x100;
const TAG_STEP: u64 = 0x1000;
const TAG_RECHECK: u64 = 0x2000;
const TAG_REPAIR: u64 = 0x3000;
const TAG_FINAL: u64 = 0x2;
const TAG_LOSSES: u64 = 0x3;
const TAG_DIAGNOSTIC: u64 = 0x4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Initial bracket for `r`; `None` anchors a default bracket at `Δ`.
    pub bracket: Option<(f64, f64)>,
    pub tol_r: f64,
    pub max_iter: usize,
    /// Terminal evaluation budget and stream namespace.
    pub mc: McParams,
}

impl SolverParams {
    pub fn new(mc: McParams) -> Self {
        SolverParams {
            bracket: None,
            tol_r: 1e-3,
            max_iter: 60,
            mc,
        }
    }

    pub fn with_bracket(self, lo: f64, hi: f64) -> Self {
        SolverParams {
            bracket: Some((lo, hi)),
            ..self
        }
    }

    pub fn with_tol(self, tol_r: f64) -> Self {
        SolverParams { tol_r, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.bracket {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Domain(format!(
                    "bracket must satisfy lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        if !(self.tol_r > 0.0) {
            return Err(Error::Domain(format!("tol_r must be positive, got {}", self.tol_r)));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be at least 1".into()));
        }
        self.mc.validate()
    }

    /// `[Δ − w, Δ + w]` with `w = 5·scale·(1 + ln n)`.
    pub fn default_bracket(config: &GameConfig) -> (f64, f64) {
        let w = 5.0 * config.noise.scale() * (1.0 + (config.n as f64).ln());
        (config.delta() - w, config.delta() + w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasCurve {
    pub points: Vec<(f64, Estimate)>,
}

impl BiasCurve {
    pub fn offsets(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    /// Misalignment `M_S − M_R` this equilibrium was solved for.
    pub delta: f64,
    pub offset_r: f64,
    /// `r* + Ĥ(r*)`.
    pub bias_delta: f64,
    pub bias_std_error: f64,
    pub receiver_shift: f64,
    /// `Ĥ(r*) + Δ`.
    pub residual: f64,
    pub residual_std_error: f64,
    pub sender_loss: LossBreakdown,
    pub receiver_loss: Estimate,
    pub iterations: usize,
    /// Final bracket width.
    pub bracket_width: f64,
}

/// `Ĥ(r)` at every grid point, each on its own substream.
pub fn scan_h(config: &GameConfig, r_grid: &[f64], mc: &McParams) -> Result<BiasCurve> {
    if r_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("r grid must be strictly increasing".into()));
    }
    let points = r_grid
        .par_iter()
        .enumerate()
        .map(|(i, &r)| Ok((r, estimate_h(r, config, &mc.substream(i as u64))?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BiasCurve { points })
}

fn evenly_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

pub fn solve_equilibrium(config: &GameConfig, params: &SolverParams) -> Result<EquilibriumResult> {
    config.validate()?;
    params.validate()?;
    let delta = config.delta();
    let terminal = params.mc.replicates;
    let start_budget = terminal.min(MIN_STEP_REPLICATES.max(terminal / 64));
    let g = |r: f64, reps: usize, mc: McParams| -> Result<Estimate> {
        let h = estimate_h(r, config, &mc.with_replicates(reps.max(2)))?;
        Ok(Estimate {
            value: h.value + delta,
            ..h
        })
    };

    // Bracket with g(lo) > 0 > g(hi), expanding geometrically if needed.
    let (lo0, hi0) = params
        .bracket
        .unwrap_or_else(|| SolverParams::default_bracket(config));
    let width0 = hi0 - lo0;
    let bracket_mc = params.mc.substream(TAG_BRACKET);
    let mut lo = lo0;
    let mut hi = hi0;
    let mut g_lo = g(lo, start_budget, bracket_mc.substream(0))?;
    let mut g_hi = g(hi, start_budget, bracket_mc.substream(1))?;

    if g_lo.value < -3.0 * g_lo.std_error && g_hi.value > 3.0 * g_hi.std_error {
        let grid = evenly_spaced(lo, hi, DIAGNOSTIC_POINTS);
        let curve = scan_h(
            config,
            &grid,
            &params.mc.substream(TAG_DIAGNOSTIC).with_replicates(start_budget),
        )?;
        return Err(Error::NonMonotone { lo, hi, curve });
    }

    let mut expansions = 0;
    while g_lo.value <= 0.0 || g_hi.value >= 0.0 {
        if expansions == MAX_EXPANSIONS {
            return Err(Error::Bracket {
                lo,
                hi,
                value_lo: g_lo.value,
                value_hi: g_hi.value,
                expansions,
            });
        }
        expansions += 1;
        let grow = width0 * f64::from((1u32 << expansions) - (1u32 << (expansions - 1)));
        let tag = 2 * u64::from(expansions);
        if g_lo.value <= 0.0 {
            lo -= grow;
            g_lo = g(lo, start_budget, bracket_mc.substream(tag))?;
        }
        if g_hi.value >= 0.0 {
            hi += grow;
            g_hi = g(hi, start_budget, bracket_mc.substream(tag + 1))?;
        }
    }

    let steps = ((hi - lo) / params.tol_r).log2().ceil().max(0.0) as usize;
    let planned = steps.min(params.max_iter);
    let mut iterations = 0;
    while hi - lo > params.tol_r && iterations < params.max_iter {
        let remaining = planned.saturating_sub(iterations + 1) as i32;
        let reps = ((terminal as f64) / BUDGET_GROWTH.powi(remaining)).ceil() as usize;
        let reps = reps.clamp(start_budget, terminal);
        let mid = 0.5 * (lo + hi);
        let mut g_mid = g(mid, reps, params.mc.substream(TAG_STEP + iterations as u64))?;
        // a wrong side can never be undone, so ambiguous steps get the full budget
        if reps < terminal && g_mid.value.abs() <= RECHECK_SIGMAS * g_mid.std_error {
            g_mid = g(mid, terminal, params.mc.substream(TAG_RECHECK + iterations as u64))?;
        }
        if g_mid.value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }

    let mut offset_r = 0.5 * (lo + hi);
    let mut g_final = g(offset_r, terminal, params.mc.substream(TAG_FINAL))?;

    // The final evaluation must agree with the bracket. When it lands beyond
    // 3σ it also says which side the root is on: step out from r until the
    // sign flips and bisect that bracket at full budget.
    let mut repairs = 0;
    while g_final.value.abs() > 3.0 * g_final.std_error && repairs < MAX_REPAIRS {
        repairs += 1;
        let repair_mc = params.mc.substream(TAG_REPAIR + repairs);
        let direction = g_final.value.signum();
        let mut step = 2.0 * params.tol_r;
        let mut near = offset_r;
        let mut far = offset_r + direction * step;
        let mut probe = 0;
        while g(far, terminal, repair_mc.substream(probe))?.value * direction > 0.0 {
            probe += 1;
            if probe > MAX_EXPANSIONS.into() {
                break;
            }
            near = far;
            step *= 2.0;
            far = offset_r + direction * step;
        }
        let (mut a, mut b) = if direction > 0.0 { (near, far) } else { (far, near) };
        let mut k = 0;
        while b - a > params.tol_r && k < params.max_iter {
            let mid = 0.5 * (a + b);
            if g(mid, terminal, repair_mc.substream(0x100 + k as u64))?.value > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            k += 1;
        }
        iterations += k;
        (lo, hi) = (a, b);
        offset_r = 0.5 * (lo + hi);
        g_final = g(offset_r, terminal, repair_mc.substream(0x200))?;
    }
    let h_final = Estimate {
        value: g_final.value - delta,
        ..g_final
    };
    let bias_delta = offset_r + h_final.value;
    let losses_mc = params.mc.substream(TAG_LOSSES);
    let scheme = TargetingScheme::targeting(offset_r);
    let sender_loss = estimate_sender_loss(&scheme, bias_delta, config, &losses_mc)?;
    let receiver_loss = estimate_receiver_loss(&scheme, config, &losses_mc.substream(1))?;

    Ok(EquilibriumResult {
        delta,
        offset_r,
        bias_delta,
        bias_std_error: h_final.std_error,
        receiver_shift: config.m_receiver - bias_delta,
        residual: h_final.value + delta,
        residual_std_error: h_final.std_error,
        sender_loss,
        receiver_loss,
        iterations,
        bracket_width: hi - lo,
    })
}

/// Solves one equilibrium per misalignment, holding `M_R` fixed.
///
/// Results are sorted by `Δ`; a failed point keeps its error without
/// discarding the others.
pub fn equilibrium_scan(
    config_base: &GameConfig,
    delta_grid: &[f64],
    params: &SolverParams,
) -> Vec<(f64, Result<EquilibriumResult>)> {
    let mut grid: Vec<f64> = delta_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.par_iter()
        .enumerate()
        .map(|(i, &delta)| {
            if !delta.is_finite() {
                return (delta, Err(Error::Domain(format!("non-finite delta {delta}"))));
            }
            let config = config_base.with_delta(delta);
            let point = SolverParams {
                mc: params.mc.substream(i as u64),
                ..*params
            };
            (delta, solve_equilibrium(&config, &point))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{NoiseDistribution, PosteriorMode};

    fn gauss(n: usize, delta: f64) -> GameConfig {
        GameConfig::aligned(n, NoiseDistribution::gaussian(1.0).unwrap(), PosteriorMode::Foresight)
            .unwrap()
            .with_delta(delta)
    }

    #[test]
    fn scan_h_single_anecdote_is_minus_r() {
        let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let curve = scan_h(&gauss(1, 0.0), &grid, &McParams::new(20_000, 1).unwrap()).unwrap();
        for (r, h) in &curve.points {
            assert!(h.within(-r, 3.0), "{r}: {h:?}");
        }
    }

    #[test]
    fn scan_h_is_antisymmetric() {
        let grid = [-1.5, -0.5, 0.5, 1.5];
        let curve = scan_h(&gauss(4, 0.0), &grid, &McParams::new(40_000, 2).unwrap()).unwrap();
        for i in 0..2 {
            let (a, b) = (curve.points[i].1, curve.points[3 - i].1);
            assert!((a.value + b.value).abs() <= 3.0 * a.combined_std_error(&b));
        }
    }

    #[test]
    fn scan_h_rejects_unsorted_grid() {
        let mc = McParams::new(10, 1).unwrap();
        assert!(scan_h(&gauss(2, 0.0), &[0.0, 0.0], &mc).is_err());
        assert!(scan_h(&gauss(2, 0.0), &[1.0, 0.0], &mc).is_err());
    }

    #[test]
    fn single_anecdote_equilibrium() {
        let params = SolverParams::new(McParams::new(200_000, 3).unwrap()).with_tol(1e-3);
        let res = solve_equilibrium(&gauss(1, 0.8), &params).unwrap();
        // H(r) = −r up to noise ~ 1/√N
        assert!((res.offset_r - 0.8).abs() < 0.01, "{res:?}");
        assert!(res.bias_delta.abs() <= 3.0 * res.bias_std_error + 1e-3, "{res:?}");
        assert_eq!(res.receiver_shift, -res.bias_delta);
    }

    #[test]
    fn inverted_bracket_is_rejected() {
        let params = SolverParams::new(McParams::new(100, 3).unwrap()).with_bracket(1.0, -1.0);
        assert!(matches!(
            solve_equilibrium(&gauss(2, 0.0), &params),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn bracket_expands_to_reach_root() {
        // root near Δ = 3 lies far outside [−1, 0]
        let params = SolverParams::new(McParams::new(20_000, 4).unwrap())
            .with_bracket(-1.0, 0.0)
            .with_tol(1e-2);
        let res = solve_equilibrium(&gauss(1, 3.0), &params).unwrap();
        assert!((res.offset_r - 3.0).abs() < 0.05, "{res:?}");
    }

    #[test]
    fn bracket_failure_is_reported() {
        // H(r) + Δ cannot change sign within 2^10 widths of this bracket
        let params = SolverParams::new(McParams::new(100, 5).unwrap())
            .with_bracket(-1e-3, 0.0)
            .with_tol(1e-4);
        let err = solve_equilibrium(&gauss(1, 50.0), &params).unwrap_err();
        assert!(matches!(err, Error::Bracket { expansions: 10, .. }), "{err}");
    }

    #[test]
    fn scan_keeps_partial_results() {
        let params = SolverParams::new(McParams::new(2_000, 6).unwrap()).with_tol(1e-2);
        let out = equilibrium_scan(&gauss(1, 0.0), &[0.5, f64::NAN, -0.5], &params);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].0, -0.5);
        assert!(out[0].1.is_ok() && out[1].1.is_ok());
        assert!(out[2].1.is_err());
    }
}
