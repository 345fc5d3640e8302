use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::{OfdmGrid, ScenarioConfig};
use crate::txdesign::{GainSemantics, PrecoderMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Mean downlink spectral efficiency against transmit power.
    SeVsPower,
    /// Radar SINR against the SI-to-noise ratio.
    SinrVsSi,
    /// Per-target range/velocity estimates, plus maps from the `radar` command.
    RadarMaps,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::SeVsPower => "se_vs_power",
            ExperimentKind::SinrVsSi => "sinr_vs_si",
            ExperimentKind::RadarMaps => "radar_maps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerKind {
    /// Unit-modulus combiner from block coordinate descent.
    Bcd,
    /// Fully digital null-space projection.
    Nsp,
    /// Every RF chain steered at the target, no SI awareness.
    Steering,
}

impl CombinerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CombinerKind::Bcd => "bcd",
            CombinerKind::Nsp => "nsp",
            CombinerKind::Steering => "steering",
        }
    }
}

/// One beamforming pipeline to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub label: String,
    pub precoder: PrecoderMethod,
    #[serde(default = "default_combiner")]
    pub combiner: CombinerKind,
    /// Overrides `design.tau_t_fraction`.
    #[serde(default)]
    pub tau_t_fraction: Option<f64>,
    /// Factor the digital precoders (and MS combiners) into analog × digital.
    #[serde(default = "default_true")]
    pub hybrid: bool,
}

fn default_combiner() -> CombinerKind {
    CombinerKind::Steering
}

fn default_true() -> bool {
    true
}

impl MethodConfig {
    pub fn new(label: &str, precoder: PrecoderMethod, combiner: CombinerKind) -> Self {
        Self {
            label: label.into(),
            precoder,
            combiner,
            tau_t_fraction: None,
            hybrid: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub n_rf: usize,
    pub n_streams: usize,
    pub n_subcarriers: usize,
    pub n_symbols: usize,
    pub subcarrier_spacing_hz: f64,
    pub symbol_duration_s: f64,
    pub noise_dbm: f64,
    /// Used when transmit power is not the swept quantity.
    pub tx_power_dbm: f64,
    /// Used when the SI-to-noise ratio is not the swept quantity.
    pub si_to_noise_db: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_rf: 4,
            n_streams: 4,
            n_subcarriers: 792,
            n_symbols: 14,
            subcarrier_spacing_hz: 120e3,
            symbol_duration_s: 8.92e-6,
            noise_dbm: -93.8,
            tx_power_dbm: 20.0,
            si_to_noise_db: 60.0,
        }
    }
}

impl SystemConfig {
    pub fn grid(&self) -> OfdmGrid {
        OfdmGrid {
            n_subcarriers: self.n_subcarriers,
            n_symbols: self.n_symbols,
            subcarrier_spacing: self.subcarrier_spacing_hz,
            symbol_duration: self.symbol_duration_s,
        }
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.n_subcarriers as f64 * self.subcarrier_spacing_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub tau_t_fraction: f64,
    pub tau_r_fraction: f64,
    pub gain_semantics: GainSemantics,
    pub eps1: f64,
    pub eps2: f64,
    /// `None` uses the trace-relative default ridge.
    pub ridge: Option<f64>,
    /// κ bisection tolerance on the gain, as a fraction of `N_BS`.
    pub combine_tol_fraction: f64,
    pub block_fraction: f64,
    pub bcd_outer_iters: usize,
    pub bcd_inner_max_iter: usize,
    pub bcd_inner_tol: f64,
    pub altmin_max_iter: usize,
    pub altmin_tol: f64,
    pub nsp_energy_threshold: f64,
    /// `M̄ = mbar_factor·M`.
    pub mbar_factor: usize,
    /// `N̄ = nbar_factor·N`.
    pub nbar_factor: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        Self {
            tau_t_fraction: 0.3,
            tau_r_fraction: 0.7,
            gain_semantics: GainSemantics::Power,
            eps1: 0.1,
            eps2: 0.3,
            ridge: None,
            combine_tol_fraction: 1e-4,
            block_fraction: 0.25,
            bcd_outer_iters: 200,
            bcd_inner_max_iter: 500,
            bcd_inner_tol: 1e-6,
            altmin_max_iter: 200,
            altmin_tol: 1e-6,
            nsp_energy_threshold: 1.0 - 1e-10,
            mbar_factor: 10,
            nbar_factor: 200,
        }
    }
}

/// Look angles of the angle-range map and the crop of exported maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadarConfig {
    pub angle_start_deg: f64,
    pub angle_stop_deg: f64,
    pub angle_step_deg: f64,
    pub max_range_m: f64,
    pub max_speed_mps: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            angle_start_deg: -90.0,
            angle_stop_deg: 90.0,
            angle_step_deg: 1.0,
            max_range_m: 100.0,
            max_speed_mps: 30.0,
        }
    }
}

impl RadarConfig {
    /// Grid in radians, inclusive of the stop angle when it lies on the grid.
    pub fn angle_grid(&self) -> Vec<f64> {
        let count = ((self.angle_stop_deg - self.angle_start_deg) / self.angle_step_deg + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| (self.angle_start_deg + k as f64 * self.angle_step_deg).to_radians())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub design: DesignConfig,
    /// Transmit powers in dBm (`se_vs_power`) or SI-to-noise ratios in dB
    /// (`sinr_vs_si`). Empty selects the experiment default.
    #[serde(default)]
    pub sweep: Vec<f64>,
    #[serde(default)]
    pub radar: RadarConfig,
    /// Empty selects the experiment default.
    #[serde(default)]
    pub methods: Vec<MethodConfig>,
}

fn default_trials() -> usize {
    1
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            trials: 1,
            base_seed: 0,
            system: SystemConfig::default(),
            scenario: ScenarioConfig::default(),
            design: DesignConfig::default(),
            sweep: vec![],
            radar: RadarConfig::default(),
            methods: vec![],
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sweep_values(&self) -> Vec<f64> {
        if !self.sweep.is_empty() {
            return self.sweep.clone();
        }
        match self.experiment {
            ExperimentKind::SeVsPower => (0..=8).map(|k| -10.0 + 5.0 * k as f64).collect(),
            ExperimentKind::SinrVsSi => (0..=8).map(|k| 10.0 * k as f64).collect(),
            ExperimentKind::RadarMaps => vec![],
        }
    }

    pub fn method_list(&self) -> Vec<MethodConfig> {
        if !self.methods.is_empty() {
            return self.methods.clone();
        }
        use CombinerKind::*;
        use PrecoderMethod::*;
        match self.experiment {
            ExperimentKind::SeVsPower => vec![
                MethodConfig::new("optimal_svd", OptimalSvd, Steering),
                MethodConfig::new("coherent_eigenvector", CoherentEigenvector, Steering),
                MethodConfig::new("proposed", Proposed, Steering),
            ],
            ExperimentKind::SinrVsSi => vec![
                MethodConfig::new("proposed_bcd", Proposed, Bcd),
                MethodConfig::new("proposed_nsp", Proposed, Nsp),
                MethodConfig::new("proposed_steering", Proposed, Steering),
                MethodConfig::new("coherent_steering", CoherentEigenvector, Steering),
            ],
            ExperimentKind::RadarMaps => vec![MethodConfig::new("proposed_bcd", Proposed, Bcd)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        self.scenario.validate()?;
        let s = &self.system;
        if s.n_rf == 0 || s.n_streams == 0 || s.n_streams > s.n_rf {
            return bad(format!("need 1 ≤ n_streams ≤ n_rf, got {} and {}", s.n_streams, s.n_rf));
        }
        if s.n_rf > self.scenario.n_bs || s.n_rf > self.scenario.n_ms {
            return bad("n_rf exceeds an array size".into());
        }
        if s.n_subcarriers == 0 || s.n_symbols == 0 {
            return bad("n_subcarriers and n_symbols must be ≥ 1".into());
        }
        if !(s.subcarrier_spacing_hz > 0.0 && s.symbol_duration_s > 0.0) {
            return bad("subcarrier spacing and symbol duration must be > 0".into());
        }
        if self.trials == 0 {
            return bad("trials must be ≥ 1".into());
        }
        let d = &self.design;
        for (name, v) in [
            ("tau_t_fraction", d.tau_t_fraction),
            ("tau_r_fraction", d.tau_r_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        for m in &self.methods {
            if let Some(t) = m.tau_t_fraction {
                if !(0.0..=1.0).contains(&t) {
                    return bad(format!(
                        "method {}: tau_t_fraction must lie in [0, 1], got {t}",
                        m.label
                    ));
                }
            }
        }
        let mut labels: Vec<&str> = self.methods.iter().map(|m| m.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("method labels must be unique".into());
        }
        if d.mbar_factor == 0 || d.nbar_factor == 0 {
            return bad("mbar_factor and nbar_factor must be ≥ 1".into());
        }
        if d.altmin_max_iter == 0 || d.bcd_inner_max_iter == 0 {
            return bad("iteration caps must be ≥ 1".into());
        }
        if !(d.block_fraction > 0.0 && d.block_fraction <= 1.0) {
            return bad(format!("block_fraction must lie in (0, 1], got {}", d.block_fraction));
        }
        if !(d.eps1 > 0.0 && d.eps2 > 0.0) {
            return bad("eps1 and eps2 must be > 0".into());
        }
        if !(d.nsp_energy_threshold > 0.0 && d.nsp_energy_threshold <= 1.0) {
            return bad("nsp_energy_threshold must lie in (0, 1]".into());
        }
        let r = &self.radar;
        if !(r.angle_step_deg > 0.0) || r.angle_stop_deg < r.angle_start_deg {
            return bad("radar angle grid must have a positive step and stop ≥ start".into());
        }
        if self.experiment != ExperimentKind::RadarMaps && self.scenario.targets.is_empty() {
            return bad("at least one target is required for the design angle".into());
        }
        Ok(())
    }
}
