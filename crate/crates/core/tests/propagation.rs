mod common;

use common::*;
use fdjrc::harness::ExperimentKind;
use fdjrc::propagation::{
    free_space_gain, generate_scenario, radar_reflection_magnitude, ula_response, SPEED_OF_LIGHT,
};

#[test]
fn path_draws_respect_configured_ranges() {
    let cfg = desk_config(ExperimentKind::SeVsPower, 8).scenario;
    let lambda = cfg.wavelength();
    let los_mag = free_space_gain(lambda, cfg.ms_distance_m);
    let (mut los_sum, mut offsets) = (0.0, Vec::new());
    let trials = 2000;
    for seed in 0..trials {
        let sc = generate_scenario(&cfg, seed).unwrap();
        assert_eq!(sc.paths.len(), cfg.n_paths);
        let los = sc.paths[0];
        let deg = los.aoa.to_degrees();
        assert!((-60.0..=60.0).contains(&deg));
        assert_eq!(los.aoa, los.aod);
        assert!((los.gain.norm() - los_mag).abs() < 1e-15);
        los_sum += deg;
        for p in &sc.paths[1..] {
            let off = -20.0 * (p.gain.norm() / los_mag).log10();
            assert!((5.0 - 1e-9..=15.0 + 1e-9).contains(&off));
            offsets.push(off);
            for a in [p.aoa, p.aod] {
                assert!(a.abs() <= std::f64::consts::FRAC_PI_2);
            }
            assert!(p.delay >= los.delay && p.delay <= los.delay + cfg.max_excess_delay_s);
        }
    }
    // Uniform draws: means near the interval centers.
    let los_mean = los_sum / trials as f64;
    assert!(los_mean.abs() < 2.0, "LoS mean {los_mean}");
    let off_mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
    assert!((off_mean - 10.0).abs() < 0.2, "offset mean {off_mean}");
}

#[test]
fn target_terms_follow_radar_physics() {
    let mut cfg = desk_config(ExperimentKind::RadarMaps, 8);
    cfg.scenario.targets = vec![target(40.0, 10.0, 45.0), target(80.0, -5.0, -30.0)];
    let (sc, ch) = scenario(&cfg, 3);
    let lambda = sc.wavelength;
    for (t, term) in sc.targets.iter().zip(&ch.targets) {
        assert!((t.round_trip - 2.0 * t.range / SPEED_OF_LIGHT).abs() < 1e-18);
        assert!((t.doppler - 2.0 * t.velocity / lambda).abs() < 1e-9);
        assert!((t.reflection.norm() - radar_reflection_magnitude(lambda, 10.0, t.range)).abs() < 1e-20);
        assert!((&term.steering - ula_response(&sc.bs_tx, t.angle)).norm() < 1e-12);
    }
    // Doubling the range costs 12 dB of echo amplitude squared.
    let ratio = sc.targets[0].reflection.norm() / sc.targets[1].reflection.norm();
    assert!((ratio - 4.0).abs() < 1e-12);
}

#[test]
fn dense_target_channel_matches_apply() {
    let mut cfg = desk_config(ExperimentKind::RadarMaps, 4);
    cfg.scenario.targets = vec![target(30.0, 3.0, 10.0), target(55.0, -8.0, -15.0)];
    let (_, ch) = scenario(&cfg, 9);
    let mut r = rng(4);
    let x = gaussian_vec(&mut r, ch.n_bs);
    for (m, n) in [(0, 0), (3, 13), (1, 7)] {
        let dense = ch.target(m, n) * &x;
        assert!((dense - ch.target_apply(m, n, &x)).norm() < 1e-20);
    }
}
