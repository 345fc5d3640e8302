//! Configuration, seeded Monte Carlo runner and result files.
//!
//! Trial `t` draws its scenario from seed `base_seed + t`, and every method
//! sees the same realization within a trial. Beamformers do not depend on the
//! swept power or SI level, so each method is designed once per trial and then
//! evaluated across the sweep.

mod config;
mod pipeline;
mod records;

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;

pub use config::{
    CombinerKind, DesignConfig, ExperimentConfig, ExperimentKind, MethodConfig, RadarConfig, SystemConfig,
};
pub use pipeline::{design_bs, mean_spectral_efficiency, ms_combiners, sub_seed, BsDesign};
pub use records::{emit_csv, quantize, read_csv, ResultRecord, Trial, CSV_HEADER};

use crate::error::{Error, Result};
use crate::metrics::{linear_to_db, radar_sinr_mean, rx_radar_gain, si_leakage, tx_radar_gain, LinkBudget};
use crate::numkernels::CMat;
use crate::propagation::{build_channels, generate_scenario, ChannelSet, Scenario};
use crate::radarproc::{
    angle_range_map, process_frame, write_angle_range_csv, write_range_velocity_csv, RadarBeams, RadarFrameConfig,
};
use pipeline::{STREAM_NOISE, STREAM_PILOTS};

struct Trial0 {
    seed: u64,
    scenario: Scenario,
    channels: ChannelSet,
}

fn draw_trial(cfg: &ExperimentConfig, t: usize) -> Result<Trial0> {
    let seed = cfg.base_seed.wrapping_add(t as u64);
    let scenario = generate_scenario(&cfg.scenario, seed)?;
    let channels = build_channels(&scenario, cfg.system.grid())?;
    Ok(Trial0 {
        seed,
        scenario,
        channels,
    })
}

fn budget(cfg: &ExperimentConfig, tx_power_dbm: f64, si_to_noise_db: f64) -> Result<LinkBudget> {
    LinkBudget::from_db(tx_power_dbm, cfg.system.noise_dbm, si_to_noise_db, cfg.system.n_streams)
}

fn min_of(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

fn min_tx_gain(design: &BsDesign) -> f64 {
    min_of(design.precoders.iter().flat_map(|f| tx_radar_gain(f, &design.steering)))
}

/// Lazily computed MS combiners, digital and hybrid.
struct MsCache<'a> {
    channels: &'a ChannelSet,
    cfg: &'a ExperimentConfig,
    digital: Option<Vec<CMat>>,
    hybrid: Option<Vec<CMat>>,
}

impl MsCache<'_> {
    fn get(&mut self, hybrid: bool) -> Result<&[CMat]> {
        let slot = if hybrid { &mut self.hybrid } else { &mut self.digital };
        if slot.is_none() {
            *slot = Some(ms_combiners(self.channels, self.cfg, hybrid)?);
        }
        Ok(slot.as_deref().unwrap_or_default())
    }
}

/// Collects per-trial records and appends trial means.
struct Collector {
    experiment: &'static str,
    base_seed: u64,
    rows: Vec<(usize, ResultRecord)>,
}

impl Collector {
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, sweep_idx: usize, method: &str, sweep: f64, trial: usize, seed: u64, metric: &str, value: f64) {
        self.rows.push((
            sweep_idx,
            ResultRecord::new(self.experiment, method, sweep, Trial::Index(trial), metric, value, seed),
        ));
    }

    fn finish(mut self) -> Vec<ResultRecord> {
        let mut groups: BTreeMap<(usize, usize, usize), (ResultRecord, f64, usize)> = BTreeMap::new();
        let mut method_order: Vec<String> = Vec::new();
        let mut metric_order: Vec<String> = Vec::new();
        let position = |list: &mut Vec<String>, s: &str| {
            list.iter().position(|x| x == s).unwrap_or_else(|| {
                list.push(s.to_string());
                list.len() - 1
            })
        };
        for (idx, r) in &self.rows {
            let key = (
                *idx,
                position(&mut method_order, &r.method),
                position(&mut metric_order, &r.metric),
            );
            let entry = groups.entry(key).or_insert_with(|| (r.clone(), 0.0, 0));
            entry.1 += r.value;
            entry.2 += 1;
        }
        for ((idx, _, _), (template, sum, count)) in groups {
            let mut r = template;
            r.trial = Trial::Mean;
            r.value = quantize(sum / count as f64);
            r.seed = self.base_seed;
            self.rows.push((idx, r));
        }
        // Stable: within one (sweep, trial) the insertion order (method, metric) is kept.
        self.rows.sort_by_key(|(idx, r)| (*idx, r.trial));
        self.rows.into_iter().map(|(_, r)| r).collect()
    }
}

/// Runs the configured experiment and returns per-trial records followed, for
/// every (sweep, method, metric), by the mean over trials.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let methods = cfg.method_list();
    let sweep = cfg.sweep_values();
    let mut out = Collector {
        experiment: cfg.experiment.as_str(),
        base_seed: cfg.base_seed,
        rows: Vec::new(),
    };
    for t in 0..cfg.trials {
        let trial = draw_trial(cfg, t)?;
        log::info!(
            "{} trial {}/{} (seed {})",
            cfg.experiment.as_str(),
            t + 1,
            cfg.trials,
            trial.seed
        );
        match cfg.experiment {
            ExperimentKind::SeVsPower => se_trial(cfg, &methods, &sweep, t, &trial, &mut out)?,
            ExperimentKind::SinrVsSi => sinr_trial(cfg, &methods, &sweep, t, &trial, &mut out)?,
            ExperimentKind::RadarMaps => {
                for m in &methods {
                    radar_estimates(cfg, m, t, &trial, &mut out, None)?;
                }
            }
        }
    }
    Ok(out.finish())
}

fn se_trial(
    cfg: &ExperimentConfig,
    methods: &[MethodConfig],
    sweep: &[f64],
    t: usize,
    trial: &Trial0,
    out: &mut Collector,
) -> Result<()> {
    let angle = trial.scenario.targets[0].angle;
    let mut ms = MsCache {
        channels: &trial.channels,
        cfg,
        digital: None,
        hybrid: None,
    };
    for m in methods {
        let d = design_bs(&trial.channels, &trial.scenario.bs_tx, angle, m, cfg, trial.seed)?;
        let w_ms = ms.get(m.hybrid)?;
        let gain = min_tx_gain(&d);
        for (i, &p) in sweep.iter().enumerate() {
            let b = budget(cfg, p, cfg.system.si_to_noise_db)?;
            let se = mean_spectral_efficiency(&trial.channels, &d.precoders, w_ms, &b)?;
            out.push(i, &m.label, p, t, trial.seed, "spectral_efficiency", se);
            out.push(i, &m.label, p, t, trial.seed, "tx_gain_min", gain);
        }
    }
    Ok(())
}

fn sinr_trial(
    cfg: &ExperimentConfig,
    methods: &[MethodConfig],
    sweep: &[f64],
    t: usize,
    trial: &Trial0,
    out: &mut Collector,
) -> Result<()> {
    let angle = trial.scenario.targets[0].angle;
    let si = &trial.channels.si;
    for m in methods {
        let d = design_bs(&trial.channels, &trial.scenario.bs_tx, angle, m, cfg, trial.seed)?;
        let leak_digital = si_leakage(&d.initial_combiner, si, &d.digital.matrices);
        let leak_hybrid = si_leakage(&d.initial_combiner, si, &d.precoders);
        let leak_final = si_leakage(&d.combiner, si, &d.precoders);
        let rx_gain = min_of(rx_radar_gain(&d.combiner, &d.steering));
        for (i, &rho) in sweep.iter().enumerate() {
            let b = budget(cfg, cfg.system.tx_power_dbm, rho)?;
            let sinr = radar_sinr_mean(&d.combiner, &trial.channels, &d.precoders, &b, 0)?;
            let push = |out: &mut Collector, metric: &str, v: f64| out.push(i, &m.label, rho, t, trial.seed, metric, v);
            push(out, "radar_sinr_db", linear_to_db(sinr));
            push(out, "si_leakage_digital", leak_digital);
            push(out, "si_leakage_hybrid", leak_hybrid);
            push(out, "si_leakage", leak_final);
            push(out, "rx_gain_min", rx_gain);
        }
    }
    Ok(())
}

fn frame_config(cfg: &ExperimentConfig, seed: u64) -> Result<RadarFrameConfig> {
    Ok(RadarFrameConfig {
        budget: budget(cfg, cfg.system.tx_power_dbm, cfg.system.si_to_noise_db)?,
        pilot_seed: sub_seed(seed, STREAM_PILOTS),
        noise_seed: sub_seed(seed, STREAM_NOISE),
        mbar: cfg.design.mbar_factor * cfg.system.n_subcarriers,
        nbar: cfg.design.nbar_factor * cfg.system.n_symbols,
    })
}

/// Per-target protocol: one frame per target with the beams designed for its
/// angle. Optionally accumulates the element-wise maximum of the maps.
fn radar_estimates(
    cfg: &ExperimentConfig,
    method: &MethodConfig,
    t: usize,
    trial: &Trial0,
    out: &mut Collector,
    mut accumulate: Option<&mut DMatrix<f64>>,
) -> Result<()> {
    let frame = frame_config(cfg, trial.seed)?;
    let grid = cfg.system.grid();
    for (k, target) in trial.scenario.targets.iter().enumerate() {
        let d = design_bs(
            &trial.channels,
            &trial.scenario.bs_tx,
            target.angle,
            method,
            cfg,
            trial.seed,
        )?;
        let beams = RadarBeams {
            combiner: d.combiner,
            precoders: d.precoders,
        };
        let map = process_frame(&trial.channels, &trial.scenario.bs_tx, target.angle, &beams, &frame)?;
        let (mi, ni) = map.peak;
        let true_m = target.round_trip * grid.subcarrier_spacing * frame.mbar as f64;
        let true_n = (target.doppler * grid.symbol_duration * frame.nbar as f64).rem_euclid(frame.nbar as f64);
        let dn = (ni as f64 - true_n).abs();
        let push =
            |out: &mut Collector, metric: &str, v: f64| out.push(k, &method.label, k as f64, t, trial.seed, metric, v);
        push(out, "range_true_m", target.range);
        push(out, "range_est_m", map.peak_range());
        push(out, "range_err_bins", (mi as f64 - true_m).abs());
        push(out, "velocity_true_mps", target.velocity);
        push(out, "velocity_est_mps", map.peak_physical_velocity());
        push(out, "velocity_printed_mps", map.peak_printed_velocity());
        push(out, "velocity_err_bins", dn.min(frame.nbar as f64 - dn));
        if let Some(acc) = accumulate.as_deref_mut() {
            if acc.shape() != map.magnitudes.shape() {
                *acc = DMatrix::zeros(frame.mbar, frame.nbar);
            }
            acc.zip_apply(&map.magnitudes, |a, b| *a = a.max(b));
        }
    }
    Ok(())
}

/// Paths written by [`run_radar`].
pub fn radar_output_paths(prefix: &Path) -> [std::path::PathBuf; 3] {
    let p = prefix.to_string_lossy();
    [
        format!("{p}_estimates.csv").into(),
        format!("{p}_angle_range.csv").into(),
        format!("{p}_range_velocity.csv").into(),
    ]
}

/// Radar maps of trial 0 with the first configured method: per-target
/// estimates, the angle-range image over the configured grid and the combined
/// range-velocity map.
pub fn run_radar(cfg: &ExperimentConfig, prefix: &Path) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let method = cfg
        .method_list()
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config("no method".into()))?;
    let trial = draw_trial(cfg, 0)?;
    let mut out = Collector {
        experiment: ExperimentKind::RadarMaps.as_str(),
        base_seed: cfg.base_seed,
        rows: Vec::new(),
    };
    let mut rv = DMatrix::zeros(0, 0);
    radar_estimates(cfg, &method, 0, &trial, &mut out, Some(&mut rv))?;
    let records = out.finish();

    let frame = frame_config(cfg, trial.seed)?;
    let mut design = |angle: f64| -> Result<RadarBeams> {
        let d = design_bs(&trial.channels, &trial.scenario.bs_tx, angle, &method, cfg, trial.seed)?;
        Ok(RadarBeams {
            combiner: d.combiner,
            precoders: d.precoders,
        })
    };
    let image = angle_range_map(
        &trial.channels,
        &trial.scenario.bs_tx,
        &cfg.radar.angle_grid(),
        &frame,
        &mut design,
    )?;

    let [est, ar, rvp] = radar_output_paths(prefix);
    emit_csv(&records, &est)?;
    write_angle_range_csv(&image, cfg.radar.max_range_m, &ar)?;
    if rv.nrows() > 0 {
        let grid = cfg.system.grid();
        let map = crate::radarproc::RangeDopplerMap {
            magnitudes: rv,
            range_bin: crate::propagation::SPEED_OF_LIGHT / (2.0 * frame.mbar as f64 * grid.subcarrier_spacing),
            velocity_bin: trial.scenario.wavelength / (frame.nbar as f64 * grid.symbol_duration),
            peak: (0, 0),
        };
        write_range_velocity_csv(&map, cfg.radar.max_range_m, cfg.radar.max_speed_mps, &rvp)?;
    }
    Ok(records)
}

/// One-shot design toward `angle_deg` for every method on trial 0, with the
/// configured transmit power and SI level.
pub fn run_design(cfg: &ExperimentConfig, angle_deg: f64) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    if angle_deg.abs() > 90.0 {
        return Err(Error::Config(format!("angle {angle_deg} outside [-90, 90]")));
    }
    let trial = draw_trial(cfg, 0)?;
    let b = budget(cfg, cfg.system.tx_power_dbm, cfg.system.si_to_noise_db)?;
    let mut ms = MsCache {
        channels: &trial.channels,
        cfg,
        digital: None,
        hybrid: None,
    };
    let mut out = Vec::new();
    for m in cfg.method_list() {
        let d = design_bs(
            &trial.channels,
            &trial.scenario.bs_tx,
            angle_deg.to_radians(),
            &m,
            cfg,
            trial.seed,
        )?;
        let se = mean_spectral_efficiency(&trial.channels, &d.precoders, ms.get(m.hybrid)?, &b)?;
        let sinr = if trial.channels.targets.is_empty() {
            0.0
        } else {
            radar_sinr_mean(&d.combiner, &trial.channels, &d.precoders, &b, 0)?
        };
        let rec = |metric: &str, v: f64| {
            ResultRecord::new("design", &m.label, angle_deg, Trial::Index(0), metric, v, trial.seed)
        };
        out.push(rec("spectral_efficiency", se));
        out.push(rec("radar_sinr_db", linear_to_db(sinr)));
        out.push(rec("tx_gain_min", min_tx_gain(&d)));
        out.push(rec("rx_gain_min", min_of(rx_radar_gain(&d.combiner, &d.steering))));
        out.push(rec(
            "si_leakage",
            si_leakage(&d.combiner, &trial.channels.si, &d.precoders),
        ));
        out.push(rec("kappa_mean", d.digital.mean_kappa()));
        out.push(rec("tx_infeasible_subcarriers", d.digital.infeasible as f64));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::txdesign::PrecoderMethod;

    fn tiny(kind: ExperimentKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(kind);
        cfg.scenario.n_bs = 8;
        cfg.scenario.n_ms = 4;
        cfg.system.n_rf = 2;
        cfg.system.n_streams = 2;
        cfg.system.n_subcarriers = 4;
        cfg.system.n_symbols = 2;
        cfg.design.altmin_max_iter = 20;
        cfg.design.bcd_outer_iters = 3;
        cfg.design.mbar_factor = 4;
        cfg.design.nbar_factor = 4;
        cfg.trials = 2;
        cfg
    }

    #[test]
    fn se_records_are_ordered_and_deterministic() {
        let mut cfg = tiny(ExperimentKind::SeVsPower);
        cfg.sweep = vec![0.0, 10.0];
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a, run_experiment(&cfg).unwrap());
        // 2 sweeps × (2 trials + mean) × 3 methods × 2 metrics
        assert_eq!(a.len(), 2 * 3 * 3 * 2);
        assert_eq!(a[0].sweep, 0.0);
        assert_eq!(a[0].trial, Trial::Index(0));
        assert_eq!(a.last().unwrap().trial, Trial::Mean);
        let mut keys: Vec<_> = a
            .iter()
            .map(|r| (r.method.clone(), r.sweep.to_bits(), r.trial, r.metric.clone()))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), a.len());
    }

    #[test]
    fn mean_rows_average_trials() {
        let mut cfg = tiny(ExperimentKind::SinrVsSi);
        cfg.sweep = vec![30.0];
        cfg.methods = vec![MethodConfig::new("p", PrecoderMethod::Proposed, CombinerKind::Bcd)];
        let recs = run_experiment(&cfg).unwrap();
        let pick = |trial: Trial| {
            recs.iter()
                .find(|r| r.trial == trial && r.metric == "radar_sinr_db")
                .unwrap()
                .value
        };
        let mean = (pick(Trial::Index(0)) + pick(Trial::Index(1))) / 2.0;
        assert!((pick(Trial::Mean) - mean).abs() <= 1e-8 * mean.abs().max(1.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = tiny(ExperimentKind::SeVsPower);
        cfg.system.n_streams = 3;
        assert!(run_experiment(&cfg).unwrap_err().is_config());
        let mut cfg = tiny(ExperimentKind::SeVsPower);
        cfg.methods = vec![
            MethodConfig::new("a", PrecoderMethod::Proposed, CombinerKind::Bcd),
            MethodConfig::new("a", PrecoderMethod::OptimalSvd, CombinerKind::Bcd),
        ];
        assert!(run_experiment(&cfg).unwrap_err().is_config());
        let bad = r#"{"experiment": "se_vs_power", "trails": 3}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "fig5"}"#).unwrap_err();
        assert!(err.to_string().contains("se_vs_power"));
    }

    #[test]
    fn radar_writes_three_files() {
        let mut cfg = tiny(ExperimentKind::RadarMaps);
        cfg.trials = 1;
        cfg.radar.angle_start_deg = -30.0;
        cfg.radar.angle_stop_deg = 30.0;
        cfg.radar.angle_step_deg = 30.0;
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("maps");
        let recs = run_radar(&cfg, &prefix).unwrap();
        assert!(recs.iter().any(|r| r.metric == "range_est_m"));
        for p in radar_output_paths(&prefix) {
            assert!(p.exists(), "{}", p.display());
        }
        assert_eq!(cfg.radar.angle_grid().len(), 3);
    }

    #[test]
    fn design_reports_every_method() {
        let cfg = tiny(ExperimentKind::SeVsPower);
        let recs = run_design(&cfg, 20.0).unwrap();
        assert_eq!(recs.len(), 3 * 7);
        assert!(run_design(&cfg, 120.0).unwrap_err().is_config());
    }
}
