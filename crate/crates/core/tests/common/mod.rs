#![allow(dead_code)]

use fdjrc::harness::{ExperimentConfig, ExperimentKind};
use fdjrc::numkernels::{cis, CMat, CVec};
use fdjrc::propagation::{build_channels, generate_scenario, ChannelSet, Scenario, TargetConfig};
use fdjrc::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) / 2f64.sqrt()
    })
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    gaussian(rng, n, 1).column(0).into_owned()
}

/// `B Bᴴ + shift·I` with `B` of the given inner dimension.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, inner: usize, shift: f64) -> CMat {
    let b = gaussian(rng, n, inner);
    let mut p = &b * b.adjoint();
    p = (&p + p.adjoint()).scale(0.5);
    for i in 0..n {
        p[(i, i)] += Complex64::new(shift, 0.0);
    }
    p
}

pub fn unit_modulus(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| cis(rng.random_range(0.0..std::f64::consts::TAU)))
}

/// Default geometry with a reduced subcarrier count.
pub fn desk_config(kind: ExperimentKind, n_subcarriers: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.system.n_subcarriers = n_subcarriers;
    cfg
}

pub fn scenario(cfg: &ExperimentConfig, seed: u64) -> (Scenario, ChannelSet) {
    let sc = generate_scenario(&cfg.scenario, seed).unwrap();
    let ch = build_channels(&sc, cfg.system.grid()).unwrap();
    (sc, ch)
}

pub fn target(range_m: f64, velocity_mps: f64, angle_deg: f64) -> TargetConfig {
    TargetConfig {
        range_m,
        velocity_mps,
        angle_deg,
        rcs_m2: 10.0,
    }
}

pub fn workspace_file(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}
