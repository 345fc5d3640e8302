//! One complete base-station design: digital precoders, optional hybrid
//! factorization, and the receive combiner.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{CombinerKind, ExperimentConfig, MethodConfig};
use crate::error::Result;
use crate::hybridize::{pe_altmin, HybridFactorization};
use crate::metrics::{spectral_efficiency, LinkBudget};
use crate::numkernels::{CMat, CVec};
use crate::propagation::{ula_response, ChannelSet, UlaSpec};
use crate::rxcombiner::{bcd_combiner, nsp_combiner, steering_combiner, BcdConfig, BcdOutcome};
use crate::txdesign::{design_precoders, ms_combiner, PrecoderSet, TxDesignConfig};

/// Independent seed for a named random stream of one trial.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

pub const STREAM_BCD: u64 = 1;
pub const STREAM_PILOTS: u64 = 2;
pub const STREAM_NOISE: u64 = 3;

#[derive(Debug, Clone)]
pub struct BsDesign {
    pub steering: CVec,
    /// Steering combiner the precoders were designed against.
    pub initial_combiner: CMat,
    pub digital: PrecoderSet,
    pub hybrid: Option<HybridFactorization>,
    /// Precoders actually transmitted (hybrid product or digital).
    pub precoders: Vec<CMat>,
    pub combiner: CMat,
    pub bcd: Option<BcdOutcome>,
}

/// Designs the transmit and receive beamformers of `method` toward `angle`.
pub fn design_bs(
    channels: &ChannelSet,
    array: &UlaSpec,
    angle: f64,
    method: &MethodConfig,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<BsDesign> {
    let d = &cfg.design;
    let n_bs = channels.n_bs;
    let n_rf = cfg.system.n_rf;
    let steering = ula_response(array, angle);
    let initial_combiner = steering_combiner(&steering, n_rf);
    let tx = TxDesignConfig {
        n_streams: cfg.system.n_streams,
        tau_t: d
            .gain_semantics
            .tx_threshold(method.tau_t_fraction.unwrap_or(d.tau_t_fraction), n_bs),
        tol: d.combine_tol_fraction * n_bs as f64,
        ridge: d.ridge,
    };
    let digital = design_precoders(channels, &initial_combiner, &steering, &tx, method.precoder)?;
    let (hybrid, precoders) = if method.hybrid {
        let fact = pe_altmin(&digital.matrices, n_rf, d.altmin_max_iter, d.altmin_tol)?;
        let eff = fact.effective();
        (Some(fact), eff)
    } else {
        (None, digital.matrices.clone())
    };
    let tau_r = d.tau_r_fraction * n_bs as f64;
    let (combiner, bcd) = match method.combiner {
        CombinerKind::Steering => (initial_combiner.clone(), None),
        CombinerKind::Nsp => (
            nsp_combiner(&channels.si, &precoders, &steering, n_rf, d.nsp_energy_threshold)?,
            None,
        ),
        CombinerKind::Bcd => {
            let bcfg = BcdConfig {
                tau_r,
                eps1: d.eps1,
                eps2: d.eps2,
                block_fraction: d.block_fraction,
                outer_iters: d.bcd_outer_iters,
                inner_max_iter: d.bcd_inner_max_iter,
                inner_tol: d.bcd_inner_tol,
                feasibility_slack: 1e-3,
                seed: sub_seed(seed, STREAM_BCD),
            };
            let out = bcd_combiner(&channels.si, &precoders, &steering, n_rf, &bcfg)?;
            (out.combiner.clone(), Some(out))
        }
    };
    Ok(BsDesign {
        steering,
        initial_combiner,
        digital,
        hybrid,
        precoders,
        combiner,
        bcd,
    })
}

/// Per-subcarrier MS combiners, hybridized with `n_rf` chains when asked.
pub fn ms_combiners(channels: &ChannelSet, cfg: &ExperimentConfig, hybrid: bool) -> Result<Vec<CMat>> {
    let digital = channels
        .downlink
        .iter()
        .map(|h| ms_combiner(h, cfg.system.n_streams))
        .collect::<Result<Vec<_>>>()?;
    if !hybrid {
        return Ok(digital);
    }
    let fact = pe_altmin(
        &digital,
        cfg.system.n_rf,
        cfg.design.altmin_max_iter,
        cfg.design.altmin_tol,
    )?;
    Ok(fact.effective())
}

/// Spectral efficiency averaged over subcarriers.
pub fn mean_spectral_efficiency(
    channels: &ChannelSet,
    precoders: &[CMat],
    combiners: &[CMat],
    budget: &LinkBudget,
) -> Result<f64> {
    let mut acc = 0.0;
    for ((h, f), w) in channels.downlink.iter().zip(precoders).zip(combiners) {
        acc += spectral_efficiency(h, f, w, budget)?;
    }
    Ok(acc / channels.downlink.len() as f64)
}
