//! Fully digital precoder design at the base station and combiner design at
//! the mobile.
//!
//! The proposed precoder is built per subcarrier from two generalized
//! eigenproblems that share the SI covariance as their metric: one maximizes
//! downlink channel energy, the other the gain toward the target. The two are
//! mixed with a weight κ picked so that every stream keeps the requested
//! transmit radar gain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernels::{default_ridge, gev_top_k, svd_truncated, CMat, CVec};
use crate::propagation::ChannelSet;
use crate::Complex64;

/// How a threshold fraction maps to an absolute gain amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GainSemantics {
    /// Amplitude threshold `fraction·N_BS` on `|fᴴa|`.
    Amplitude,
    /// Power threshold `|fᴴa|² ≥ fraction·N_BS` for a unit-power column,
    /// i.e. amplitude `√(fraction·N_BS)`.
    #[default]
    Power,
}

impl GainSemantics {
    /// Absolute amplitude threshold on the transmit gain of a column whose
    /// power is `‖F‖_F²/N_s = 1`.
    pub fn tx_threshold(self, fraction: f64, n_bs: usize) -> f64 {
        match self {
            GainSemantics::Amplitude => fraction * n_bs as f64,
            GainSemantics::Power => (fraction * n_bs as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderMethod {
    /// SI-aware generalized eigen design with coherent target combining.
    Proposed,
    /// Same pipeline with the SI covariance replaced by zero.
    CoherentEigenvector,
    /// Dominant right singular vectors of each downlink channel.
    OptimalSvd,
}

impl PrecoderMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PrecoderMethod::Proposed => "proposed",
            PrecoderMethod::CoherentEigenvector => "coherent_eigenvector",
            PrecoderMethod::OptimalSvd => "optimal_svd",
        }
    }
}

/// Per-subcarrier precoders, each with `‖F_m‖_F² = N_s`.
#[derive(Debug, Clone)]
pub struct PrecoderSet {
    pub matrices: Vec<CMat>,
    /// Mixing weight chosen on each subcarrier (1 for `OptimalSvd`).
    pub kappa: Vec<f64>,
    pub method: PrecoderMethod,
    /// Subcarriers on which the gain threshold was out of reach.
    pub infeasible: usize,
}

impl PrecoderSet {
    pub fn mean_kappa(&self) -> f64 {
        self.kappa.iter().sum::<f64>() / self.kappa.len().max(1) as f64
    }
}

/// `C = H_SIᴴ W Wᴴ H_SI`.
pub fn si_covariance(si: &CMat, w: &CMat) -> CMat {
    let x = w.adjoint() * si;
    let c = x.adjoint() * x;
    (&c + c.adjoint()).scale(0.5)
}

fn resolve_ridge(c: &CMat, ridge: Option<f64>) -> f64 {
    ridge.unwrap_or_else(|| default_ridge(c))
}

/// Top-`N_s` generalized eigenvectors of `(HᴴH, C + ridge·I)`.
pub fn gev_precoder(h: &CMat, c: &CMat, n_streams: usize, ridge: Option<f64>) -> Result<CMat> {
    if h.ncols() != c.nrows() {
        return Err(Error::Contract(format!(
            "channel has {} columns but SI covariance is {}x{}",
            h.ncols(),
            c.nrows(),
            c.ncols()
        )));
    }
    let a = h.adjoint() * h;
    let a = (&a + a.adjoint()).scale(0.5);
    Ok(gev_top_k(&a, c, n_streams, resolve_ridge(c, ridge))?.vectors)
}

/// Beam maximizing `|fᴴa|² / fᴴ(C + ridge·I)f`, scaled so `fᴴ(C + ridge·I)f = 1`.
pub fn target_beam(steering: &CVec, c: &CMat, ridge: Option<f64>) -> Result<CVec> {
    if steering.len() != c.nrows() {
        return Err(Error::Contract("steering vector and SI covariance sizes differ".into()));
    }
    let b = steering * steering.adjoint();
    let g = gev_top_k(&b, c, 1, resolve_ridge(c, ridge))?;
    Ok(g.vectors.column(0).into_owned())
}

/// Output of [`coherent_combine`].
#[derive(Debug, Clone)]
pub struct Combination {
    pub precoder: CMat,
    pub kappa: f64,
    /// False when even `κ = 0` misses the threshold.
    pub achievable: bool,
}

fn unit(v: &CVec) -> CVec {
    let n = v.norm();
    if n > 0.0 {
        v.unscale(n)
    } else {
        v.clone()
    }
}

/// Mixes every communication column with the target beam,
/// `κ·g_s + (1 − κ)·e^{jψ_s}·f`, then rescales to `‖F‖_F² = N_s`.
///
/// Columns of `f_gev` and `f` are unit-normalized first; `ψ_s` makes
/// `(e^{jψ_s}f)ᴴ g_s` real-positive. κ is the largest value in `[0, 1]` whose
/// smallest column gain `|F[:,s]ᴴa|` is at least `tau_t − tol`.
pub fn coherent_combine(f_gev: &CMat, f: &CVec, steering: &CVec, tau_t: f64, tol: f64) -> Result<Combination> {
    if !(tau_t >= 0.0) || !(tol > 0.0) {
        return Err(Error::Contract(format!(
            "need tau_t ≥ 0 and tol > 0 (got {tau_t}, {tol})"
        )));
    }
    if f_gev.nrows() != f.len() || f.len() != steering.len() {
        return Err(Error::Contract(
            "precoder, target beam and steering sizes differ".into(),
        ));
    }
    let ns = f_gev.ncols();
    let f = unit(f);
    let comm: Vec<CVec> = f_gev.column_iter().map(|c| unit(&c.into_owned())).collect();
    let aligned: Vec<CVec> = comm
        .iter()
        .map(|g| {
            let inner = f.dotc(g);
            let phase = if inner.norm() > 0.0 {
                inner / inner.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            &f * phase
        })
        .collect();

    let build = |kappa: f64| -> CMat {
        let cols: Vec<CVec> = comm
            .iter()
            .zip(&aligned)
            .map(|(g, t)| g.scale(kappa) + t.scale(1.0 - kappa))
            .collect();
        let mut m = CMat::from_columns(&cols);
        let norm = m.norm();
        if norm > 0.0 {
            m.scale_mut((ns as f64).sqrt() / norm);
        }
        m
    };
    let min_gain = |m: &CMat| -> f64 {
        m.column_iter()
            .map(|c| c.dotc(steering).norm())
            .fold(f64::INFINITY, f64::min)
    };

    let target = tau_t - tol;
    let full = build(1.0);
    if min_gain(&full) >= target {
        return Ok(Combination {
            precoder: full,
            kappa: 1.0,
            achievable: true,
        });
    }
    let beam_only = build(0.0);
    if min_gain(&beam_only) < target {
        return Ok(Combination {
            precoder: beam_only,
            kappa: 0.0,
            achievable: false,
        });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if min_gain(&build(mid)) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(Combination {
        precoder: build(lo),
        kappa: lo,
        achievable: true,
    })
}

/// Knobs of the digital precoder stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxDesignConfig {
    pub n_streams: usize,
    /// Absolute amplitude threshold on `|F[:,s]ᴴa|`.
    pub tau_t: f64,
    /// Bisection tolerance on the gain.
    pub tol: f64,
    /// `None` selects [`default_ridge`].
    pub ridge: Option<f64>,
}

fn normalize_power(m: CMat, n_streams: usize) -> CMat {
    let norm = m.norm();
    if norm > 0.0 {
        m.scale((n_streams as f64).sqrt() / norm)
    } else {
        m
    }
}

/// Designs one precoder per subcarrier with the selected method, treating the
/// receive combiner `w_bs` as fixed. Subcarriers are independent.
pub fn design_precoders(
    channels: &ChannelSet,
    w_bs: &CMat,
    steering: &CVec,
    cfg: &TxDesignConfig,
    method: PrecoderMethod,
) -> Result<PrecoderSet> {
    let n_bs = channels.n_bs;
    if w_bs.nrows() != n_bs || steering.len() != n_bs {
        return Err(Error::Contract("combiner / steering vector size mismatch".into()));
    }
    let ns = cfg.n_streams;
    let mut matrices = Vec::with_capacity(channels.downlink.len());
    let mut kappa = Vec::with_capacity(channels.downlink.len());
    let mut infeasible = 0;
    match method {
        PrecoderMethod::OptimalSvd => {
            for h in &channels.downlink {
                let svd = svd_truncated(h, ns)?;
                matrices.push(normalize_power(svd.v, ns));
                kappa.push(1.0);
            }
        }
        PrecoderMethod::Proposed | PrecoderMethod::CoherentEigenvector => {
            let c = if method == PrecoderMethod::Proposed {
                si_covariance(&channels.si, w_bs)
            } else {
                CMat::zeros(n_bs, n_bs)
            };
            let beam = target_beam(steering, &c, cfg.ridge)?;
            for h in &channels.downlink {
                let gev = gev_precoder(h, &c, ns, cfg.ridge)?;
                let comb = coherent_combine(&gev, &beam, steering, cfg.tau_t, cfg.tol)?;
                if !comb.achievable {
                    infeasible += 1;
                }
                matrices.push(comb.precoder);
                kappa.push(comb.kappa);
            }
        }
    }
    if infeasible > 0 {
        log::warn!(
            "{}: transmit gain threshold {:.4} unreachable on {infeasible} subcarriers",
            method.as_str(),
            cfg.tau_t
        );
    }
    Ok(PrecoderSet {
        matrices,
        kappa,
        method,
        infeasible,
    })
}

/// Dominant `N_s` left singular vectors of the downlink channel.
pub fn ms_combiner(h: &CMat, n_streams: usize) -> Result<CMat> {
    Ok(svd_truncated(h, n_streams)?.u)
}
