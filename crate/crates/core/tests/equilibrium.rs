use anecdote_core::game::sender_best_response;
use anecdote_core::{
    draw_round, equilibrium_scan, estimate_bias, estimate_h, scan_h, select_anecdote,
    solve_equilibrium, ActionRule, GameConfig, McParams, NoiseDistribution, PosteriorMode,
    SolverParams, TargetingScheme,
};

fn gaussian_game(delta: f64, mode: PosteriorMode) -> GameConfig {
    GameConfig::new(5, delta, 0.0, NoiseDistribution::gaussian(1.0).unwrap(), mode).unwrap()
}

fn mc(replicates: usize, seed: u64) -> McParams {
    McParams::new(replicates, seed).unwrap()
}

#[test]
fn residual_and_self_consistency() {
    for (i, delta) in [-1.0, 0.0, 0.7].into_iter().enumerate() {
        let game = gaussian_game(delta, PosteriorMode::Foresight);
        let res = solve_equilibrium(&game, &SolverParams::new(mc(200_000, 40 + i as u64))).unwrap();
        assert!(
            res.residual.abs() <= 3.0 * res.residual_std_error,
            "delta {delta}: residual {} se {}",
            res.residual,
            res.residual_std_error
        );

        let fresh = estimate_bias(
            &TargetingScheme::targeting(res.offset_r),
            &game,
            &mc(200_000, 1_000 + i as u64),
        )
        .unwrap();
        let band = 3.0 * (fresh.std_error.powi(2) + res.bias_std_error.powi(2)).sqrt();
        assert!((fresh.value - res.bias_delta).abs() <= band, "delta {delta}");
        assert!((res.offset_r - res.bias_delta - delta).abs() <= band, "delta {delta}");
        assert_eq!(res.receiver_shift, game.m_receiver - res.bias_delta);
    }
}

#[test]
fn best_response_closure() {
    let game = gaussian_game(-1.0, PosteriorMode::Foresight);
    let res = solve_equilibrium(&game, &SolverParams::new(mc(1_000_000, 3))).unwrap();
    let rule = ActionRule::new(res.receiver_shift);
    let scheme = TargetingScheme::targeting(res.offset_r);
    let mut rng = anecdote_core::stream::seeded(99);
    let draws = 10_000;
    let agree = (0..draws)
        .filter(|_| {
            let round = draw_round(&game, &mut rng).unwrap();
            sender_best_response(&round, &rule, game.m_sender).0 == select_anecdote(&scheme, &round).0
        })
        .count();
    assert!(agree as f64 >= 0.999 * draws as f64, "{agree} of {draws}");
}

#[test]
fn solver_matches_dense_scan() {
    let delta = -1.0;
    let game = gaussian_game(delta, PosteriorMode::Foresight);
    let res = solve_equilibrium(&game, &SolverParams::new(mc(400_000, 7))).unwrap();

    let grid: Vec<f64> = (0..=40).map(|i| -2.5 + 0.02 * i as f64).collect();
    let curve = scan_h(&game, &grid, &mc(400_000, 8)).unwrap();
    let level = -delta;
    let crossing = curve
        .points
        .windows(2)
        .find(|w| w[0].1.value >= level && w[1].1.value < level)
        .map(|w| {
            let (r0, h0) = (w[0].0, w[0].1.value);
            let (r1, h1) = (w[1].0, w[1].1.value);
            r0 + (h0 - level) * (r1 - r0) / (h0 - h1)
        })
        .expect("scan brackets the level");
    assert!((res.offset_r - crossing).abs() < 0.02, "{} vs {crossing}", res.offset_r);
    assert!(res.offset_r < delta && res.offset_r < res.bias_delta && res.bias_delta < 0.0);
}

#[test]
fn scan_is_monotone_and_sign_symmetric() {
    let game = gaussian_game(0.0, PosteriorMode::Foresight);
    let params = SolverParams::new(mc(200_000, 12));
    let tol = params.tol_r;
    let results = equilibrium_scan(&game, &[2.0, -2.0, 1.0, 0.0, -1.0], &params);
    let deltas: Vec<f64> = results.iter().map(|p| p.0).collect();
    assert_eq!(deltas, [-2.0, -1.0, 0.0, 1.0, 2.0]);
    let r: Vec<f64> = results
        .into_iter()
        .map(|(_, res)| res.unwrap().offset_r)
        .collect();
    for w in r.windows(2) {
        assert!(w[1] >= w[0] - tol, "{r:?}");
    }
    assert!(r[2].abs() <= 0.02, "{r:?}");
    // Monte Carlo noise in each solve dominates tol here, so the band is
    // widened by the observed spread of r* at this budget
    for k in 0..2 {
        assert!((r[k] + r[4 - k]).abs() <= 2.0 * tol + 0.05, "{r:?}");
    }
}

#[test]
fn h_is_bias_minus_offset_and_antisymmetric() {
    for mode in [PosteriorMode::Foresight, PosteriorMode::NoForesight] {
        for noise in [
            NoiseDistribution::gaussian(1.0).unwrap(),
            NoiseDistribution::laplace(2.0).unwrap(),
            NoiseDistribution::uniform(1.0).unwrap(),
        ] {
            let game = GameConfig::aligned(4, noise, mode).unwrap();
            for r in [0.4, 1.5] {
                let m = mc(50_000, 5);
                let h = estimate_h(r, &game, &m).unwrap();
                let bias = estimate_bias(&TargetingScheme::targeting(r), &game, &m).unwrap();
                assert!(
                    (bias.value - r - h.value).abs() <= 3.0 * h.combined_std_error(&bias) + 1e-12,
                    "{noise} {mode:?} r={r}"
                );
                let h_neg = estimate_h(-r, &game, &mc(50_000, 6)).unwrap();
                assert!(
                    (h.value + h_neg.value).abs() <= 3.0 * h.combined_std_error(&h_neg),
                    "{noise} {mode:?} r={r}: {} vs {}",
                    h.value,
                    h_neg.value
                );
            }
        }
    }
}
