//! Array geometry, downlink / target / self-interference channels and seeded
//! scenario generation.
//!
//! Angles are radians from broadside internally. Configuration structs carry
//! degrees, meters and hertz.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernels::{cis, CMat, CVec};
use crate::Complex64;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Uniform linear array: element `k` sits at `origin + k·element_spacing·axis`.
#[derive(Debug, Clone, PartialEq)]
pub struct UlaSpec {
    pub n_ant: usize,
    pub element_spacing: f64,
    pub wavelength: f64,
    pub origin: [f64; 3],
    pub axis: [f64; 3],
}

impl UlaSpec {
    pub fn new(n_ant: usize, element_spacing: f64, wavelength: f64, origin: [f64; 3], axis: [f64; 3]) -> Result<Self> {
        if n_ant == 0 {
            return Err(Error::Geometry("array needs at least one element".into()));
        }
        if !(element_spacing > 0.0) || !(wavelength > 0.0) {
            return Err(Error::Geometry(format!(
                "element spacing ({element_spacing}) and wavelength ({wavelength}) must be positive"
            )));
        }
        let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Geometry(format!("array axis must be unit norm, got {norm}")));
        }
        Ok(Self {
            n_ant,
            element_spacing,
            wavelength,
            origin,
            axis,
        })
    }

    /// Half-wavelength array along x starting at `origin`.
    pub fn half_wavelength_x(n_ant: usize, wavelength: f64, origin: [f64; 3]) -> Result<Self> {
        Self::new(n_ant, wavelength / 2.0, wavelength, origin, [1.0, 0.0, 0.0])
    }

    pub fn element_position(&self, k: usize) -> [f64; 3] {
        let off = k as f64 * self.element_spacing;
        [
            self.origin[0] + off * self.axis[0],
            self.origin[1] + off * self.axis[1],
            self.origin[2] + off * self.axis[2],
        ]
    }
}

/// Array response `[a(θ)]_k = exp(j2π (d/λ) k sin θ)`.
pub fn ula_response(spec: &UlaSpec, angle: f64) -> CVec {
    let phase = 2.0 * PI * spec.element_spacing / spec.wavelength * angle.sin();
    CVec::from_fn(spec.n_ant, |k, _| cis(phase * k as f64))
}

/// One downlink propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub gain: Complex64,
    /// Seconds.
    pub delay: f64,
    /// Arrival angle at the mobile, radians.
    pub aoa: f64,
    /// Departure angle at the base station, radians.
    pub aod: f64,
}

/// How a physical radial velocity maps to a Doppler shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DopplerConvention {
    /// Two-way radar shift `f_D = 2v/λ`.
    #[default]
    Monostatic,
    /// One-way shift `f_D = v/λ`.
    OneWay,
}

impl DopplerConvention {
    fn factor(self) -> f64 {
        match self {
            DopplerConvention::Monostatic => 2.0,
            DopplerConvention::OneWay => 1.0,
        }
    }

    pub fn doppler_from_velocity(self, velocity: f64, wavelength: f64) -> f64 {
        self.factor() * velocity / wavelength
    }

    pub fn velocity_from_doppler(self, doppler: f64, wavelength: f64) -> f64 {
        doppler * wavelength / self.factor()
    }
}

/// Point target seen by the collocated arrays (angle of arrival = departure).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetSpec {
    pub reflection: Complex64,
    /// Hz.
    pub doppler: f64,
    /// Seconds.
    pub round_trip: f64,
    /// Radians.
    pub angle: f64,
    pub range: f64,
    pub velocity: f64,
    pub rcs: f64,
}

/// Radar-equation reflection magnitude `√(λ²σ / ((4π)³ d⁴))`.
pub fn radar_reflection_magnitude(wavelength: f64, rcs: f64, range: f64) -> f64 {
    (wavelength * wavelength * rcs / ((4.0 * PI).powi(3) * range.powi(4))).sqrt()
}

/// Free-space amplitude loss `λ / (4πd)`.
pub fn free_space_gain(wavelength: f64, distance: f64) -> f64 {
    wavelength / (4.0 * PI * distance)
}

impl TargetSpec {
    /// Builds a target from its physical description using the monostatic
    /// Doppler convention.
    pub fn from_physical(range: f64, velocity: f64, angle: f64, rcs: f64, wavelength: f64, phase: f64) -> Result<Self> {
        if !(range > 0.0) || !(rcs >= 0.0) {
            return Err(Error::Config(format!(
                "target range must be > 0 and rcs ≥ 0 (range {range}, rcs {rcs})"
            )));
        }
        if angle.abs() > PI / 2.0 {
            return Err(Error::Config(format!("target angle {angle} rad outside ±π/2")));
        }
        Ok(Self {
            reflection: Complex64::from_polar(radar_reflection_magnitude(wavelength, rcs, range), phase),
            doppler: DopplerConvention::Monostatic.doppler_from_velocity(velocity, wavelength),
            round_trip: 2.0 * range / SPEED_OF_LIGHT,
            angle,
            range,
            velocity,
            rcs,
        })
    }
}

/// Near-field line-of-sight channel between the transmit and receive arrays,
/// `[H]_{pq} = (γ/d_pq)·exp(−j2π d_pq/λ)`, scaled so that `‖H‖_F² = N²`.
pub fn si_channel(tx: &UlaSpec, rx: &UlaSpec) -> Result<CMat> {
    if tx.n_ant != rx.n_ant {
        return Err(Error::Geometry(format!(
            "transmit ({}) and receive ({}) arrays differ in size",
            tx.n_ant, rx.n_ant
        )));
    }
    let n = tx.n_ant;
    let mut h = CMat::zeros(n, n);
    for p in 0..n {
        let rp = rx.element_position(p);
        for q in 0..n {
            let tq = tx.element_position(q);
            let d = rp
                .iter()
                .zip(tq.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d <= 0.0 {
                return Err(Error::Geometry(format!(
                    "receive element {p} coincides with transmit element {q}"
                )));
            }
            h[(p, q)] = cis(-2.0 * PI * d / rx.wavelength) / d;
        }
    }
    let gamma = n as f64 / h.norm();
    Ok(h.scale(gamma))
}

/// Per-subcarrier downlink matrices
/// `H_m = Σ_l α_l e^{−j2π m τ_l Δf} a_MS(φ_l) a_BSᴴ(θ_l)`.
pub fn downlink_channels(
    paths: &[PathSpec],
    bs: &UlaSpec,
    ms: &UlaSpec,
    n_subcarriers: usize,
    subcarrier_spacing: f64,
) -> Result<Vec<CMat>> {
    if paths.is_empty() {
        return Err(Error::Contract("downlink channel needs at least one path".into()));
    }
    if n_subcarriers == 0 {
        return Err(Error::Contract("need at least one subcarrier".into()));
    }
    let outers: Vec<CMat> = paths
        .iter()
        .map(|p| ula_response(ms, p.aoa) * ula_response(bs, p.aod).adjoint())
        .collect();
    Ok((0..n_subcarriers)
        .map(|m| {
            let mut h = CMat::zeros(ms.n_ant, bs.n_ant);
            for (p, outer) in paths.iter().zip(&outers) {
                let coef = p.gain * cis(-2.0 * PI * m as f64 * p.delay * subcarrier_spacing);
                h += outer.map(|v| v * coef);
            }
            h
        })
        .collect())
}

/// Target channel for subcarrier `m` and symbol `n`:
/// `Σ_k α_k exp(j2π(n T f_D,k − m τ_k Δf)) a(θ_k) aᴴ(θ_k)`.
pub fn target_channel(
    targets: &[TargetSpec],
    bs: &UlaSpec,
    m: usize,
    n: usize,
    subcarrier_spacing: f64,
    symbol_duration: f64,
) -> CMat {
    let mut h = CMat::zeros(bs.n_ant, bs.n_ant);
    for t in targets {
        let a = ula_response(bs, t.angle);
        let coef = t.reflection
            * cis(2.0 * PI * (n as f64 * symbol_duration * t.doppler - m as f64 * t.round_trip * subcarrier_spacing));
        h += (&a * a.adjoint()).map(|v| v * coef);
    }
    h
}

/// Precomputed rank-one term of the target channel.
#[derive(Debug, Clone)]
pub struct TargetTerm {
    pub spec: TargetSpec,
    pub steering: CVec,
}

/// OFDM numerology of one radar frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmGrid {
    pub n_subcarriers: usize,
    pub n_symbols: usize,
    /// Hz.
    pub subcarrier_spacing: f64,
    /// Seconds.
    pub symbol_duration: f64,
}

/// All channels for one frame of one scenario.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    pub downlink: Vec<CMat>,
    pub targets: Vec<TargetTerm>,
    pub si: CMat,
    pub grid: OfdmGrid,
    pub n_bs: usize,
}

impl ChannelSet {
    /// Scalar factor `α_k exp(j2π(n T f_D − m τ Δf))` of target `k`.
    pub fn target_coefficient(&self, k: usize, m: usize, n: usize) -> Complex64 {
        let t = &self.targets[k].spec;
        t.reflection
            * cis(2.0
                * PI
                * (n as f64 * self.grid.symbol_duration * t.doppler
                    - m as f64 * t.round_trip * self.grid.subcarrier_spacing))
    }

    /// Dense target channel `H_t(m, n)`.
    pub fn target(&self, m: usize, n: usize) -> CMat {
        let mut h = CMat::zeros(self.n_bs, self.n_bs);
        for (k, term) in self.targets.iter().enumerate() {
            let coef = self.target_coefficient(k, m, n);
            h += (&term.steering * term.steering.adjoint()).map(|v| v * coef);
        }
        h
    }

    /// `H_t(m, n)·x` without forming the matrix.
    pub fn target_apply(&self, m: usize, n: usize, x: &CVec) -> CVec {
        let mut out = CVec::zeros(self.n_bs);
        for (k, term) in self.targets.iter().enumerate() {
            let proj = term.steering.dotc(x);
            out += &term.steering * (self.target_coefficient(k, m, n) * proj);
        }
        out
    }

    /// Same channels with a different target list (e.g. one target per frame).
    pub fn with_targets(&self, targets: Vec<TargetTerm>) -> Self {
        Self {
            targets,
            ..self.clone()
        }
    }
}

/// Physical target description used in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub angle_deg: f64,
    pub rcs_m2: f64,
}

/// Parameters of the random scenario generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub carrier_freq_hz: f64,
    pub n_bs: usize,
    pub n_ms: usize,
    pub element_spacing_wavelengths: f64,
    /// Offset between the transmit and receive arrays along z.
    pub array_separation_wavelengths: f64,
    pub ms_distance_m: f64,
    /// Fixed line-of-sight angle; drawn from `los_angle_range_deg` when absent.
    pub los_angle_deg: Option<f64>,
    pub los_angle_range_deg: [f64; 2],
    pub nlos_angle_range_deg: [f64; 2],
    pub n_paths: usize,
    /// Non-line-of-sight paths are this many dB weaker than the LoS path.
    pub nlos_offset_db: [f64; 2],
    /// NLoS delays are the LoS delay plus a uniform excess in `[0, max]`.
    pub max_excess_delay_s: f64,
    pub targets: Vec<TargetConfig>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            carrier_freq_hz: 28e9,
            n_bs: 32,
            n_ms: 16,
            element_spacing_wavelengths: 0.5,
            array_separation_wavelengths: 6.0,
            ms_distance_m: 50.0,
            los_angle_deg: None,
            los_angle_range_deg: [-60.0, 60.0],
            nlos_angle_range_deg: [-90.0, 90.0],
            n_paths: 5,
            nlos_offset_db: [5.0, 15.0],
            max_excess_delay_s: 100e-9,
            targets: vec![TargetConfig {
                range_m: 40.0,
                velocity_mps: 10.0,
                angle_deg: 45.0,
                rcs_m2: 10.0,
            }],
        }
    }
}

impl ScenarioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.carrier_freq_hz > 0.0) {
            return bad(format!("carrier_freq_hz must be > 0, got {}", self.carrier_freq_hz));
        }
        if self.n_bs == 0 || self.n_ms == 0 {
            return bad("array sizes must be ≥ 1".into());
        }
        if !(self.element_spacing_wavelengths > 0.0) || !(self.array_separation_wavelengths > 0.0) {
            return bad("element spacing and array separation must be > 0".into());
        }
        if !(self.ms_distance_m > 0.0) {
            return bad(format!("ms_distance_m must be > 0, got {}", self.ms_distance_m));
        }
        if self.n_paths == 0 {
            return bad("n_paths must be ≥ 1".into());
        }
        for (name, r) in [
            ("los_angle_range_deg", self.los_angle_range_deg),
            ("nlos_angle_range_deg", self.nlos_angle_range_deg),
        ] {
            if !(r[0] <= r[1]) || r[0] < -90.0 || r[1] > 90.0 {
                return bad(format!("{name} must be an ordered range within [-90, 90], got {r:?}"));
            }
        }
        if let Some(a) = self.los_angle_deg {
            if a.abs() > 90.0 {
                return bad(format!("los_angle_deg {a} outside [-90, 90]"));
            }
        }
        if !(self.nlos_offset_db[0] <= self.nlos_offset_db[1]) || self.nlos_offset_db[0] < 0.0 {
            return bad(format!(
                "nlos_offset_db must be an ordered non-negative range, got {:?}",
                self.nlos_offset_db
            ));
        }
        if !(self.max_excess_delay_s >= 0.0) {
            return bad("max_excess_delay_s must be ≥ 0".into());
        }
        for t in &self.targets {
            if !(t.range_m > 0.0) || !(t.rcs_m2 >= 0.0) || t.angle_deg.abs() > 90.0 {
                return bad(format!("invalid target {t:?}"));
            }
        }
        Ok(())
    }
}

/// Complete physical description of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bs_tx: UlaSpec,
    pub bs_rx: UlaSpec,
    pub ms: UlaSpec,
    pub paths: Vec<PathSpec>,
    pub targets: Vec<TargetSpec>,
    pub wavelength: f64,
    pub seed: u64,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws one realization. Deterministic in `(cfg, seed)`.
pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    cfg.validate()?;
    let lambda = cfg.wavelength();
    let spacing = cfg.element_spacing_wavelengths * lambda;
    let x = [1.0, 0.0, 0.0];
    let bs_tx = UlaSpec::new(cfg.n_bs, spacing, lambda, [0.0; 3], x)?;
    let bs_rx = UlaSpec::new(
        cfg.n_bs,
        spacing,
        lambda,
        [0.0, 0.0, cfg.array_separation_wavelengths * lambda],
        x,
    )?;
    let ms = UlaSpec::new(cfg.n_ms, spacing, lambda, [0.0, cfg.ms_distance_m, 0.0], x)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let los_angle = match cfg.los_angle_deg {
        Some(a) => a.to_radians(),
        None => uniform(&mut rng, cfg.los_angle_range_deg[0], cfg.los_angle_range_deg[1]).to_radians(),
    };
    let los_mag = free_space_gain(lambda, cfg.ms_distance_m);
    let los_delay = cfg.ms_distance_m / SPEED_OF_LIGHT;
    let mut paths = vec![PathSpec {
        gain: Complex64::from_polar(los_mag, uniform(&mut rng, 0.0, 2.0 * PI)),
        delay: los_delay,
        aoa: los_angle,
        aod: los_angle,
    }];
    for _ in 1..cfg.n_paths {
        let offset_db = uniform(&mut rng, cfg.nlos_offset_db[0], cfg.nlos_offset_db[1]);
        let mag = los_mag * 10f64.powf(-offset_db / 20.0);
        let phase = uniform(&mut rng, 0.0, 2.0 * PI);
        let aoa = uniform(&mut rng, cfg.nlos_angle_range_deg[0], cfg.nlos_angle_range_deg[1]).to_radians();
        let aod = uniform(&mut rng, cfg.nlos_angle_range_deg[0], cfg.nlos_angle_range_deg[1]).to_radians();
        let excess = uniform(&mut rng, 0.0, cfg.max_excess_delay_s);
        paths.push(PathSpec {
            gain: Complex64::from_polar(mag, phase),
            delay: los_delay + excess,
            aoa,
            aod,
        });
    }
    let targets = cfg
        .targets
        .iter()
        .map(|t| {
            let phase = uniform(&mut rng, 0.0, 2.0 * PI);
            TargetSpec::from_physical(
                t.range_m,
                t.velocity_mps,
                t.angle_deg.to_radians(),
                t.rcs_m2,
                lambda,
                phase,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Scenario {
        bs_tx,
        bs_rx,
        ms,
        paths,
        targets,
        wavelength: lambda,
        seed,
    })
}

/// Materializes every channel of `scenario` on the given OFDM grid.
pub fn build_channels(scenario: &Scenario, grid: OfdmGrid) -> Result<ChannelSet> {
    if grid.n_subcarriers == 0 || grid.n_symbols == 0 {
        return Err(Error::Contract(
            "OFDM grid must have at least one subcarrier and symbol".into(),
        ));
    }
    let downlink = downlink_channels(
        &scenario.paths,
        &scenario.bs_tx,
        &scenario.ms,
        grid.n_subcarriers,
        grid.subcarrier_spacing,
    )?;
    let targets = scenario
        .targets
        .iter()
        .map(|t| TargetTerm {
            spec: *t,
            steering: ula_response(&scenario.bs_tx, t.angle),
        })
        .collect();
    Ok(ChannelSet {
        downlink,
        targets,
        si: si_channel(&scenario.bs_tx, &scenario.bs_rx)?,
        grid,
        n_bs: scenario.bs_tx.n_ant,
    })
}
