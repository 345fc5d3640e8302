//! Communication and sensing figures of merit: spectral efficiency, transmit
//! and receive radar gains, and radar SINR.

use crate::error::{Error, Result};
use crate::numkernels::{numerical_rank, pinv, CMat, CVec};
use crate::propagation::ChannelSet;
use crate::Complex64;

/// Power levels in Watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power: f64,
    pub noise_ms: f64,
    pub noise_bs: f64,
    /// Linear self-interference power ρ.
    pub si_power: f64,
    pub n_streams: usize,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl LinkBudget {
    /// Budget from interface units; ρ is given as an SI-to-noise ratio at the BS.
    pub fn from_db(tx_power_dbm: f64, noise_dbm: f64, si_to_noise_db: f64, n_streams: usize) -> Result<Self> {
        let noise = dbm_to_watts(noise_dbm);
        let b = Self {
            tx_power: dbm_to_watts(tx_power_dbm),
            noise_ms: noise,
            noise_bs: noise,
            si_power: db_to_linear(si_to_noise_db) * noise,
            n_streams,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tx_power > 0.0 && self.noise_ms > 0.0 && self.noise_bs > 0.0 && self.si_power >= 0.0) {
            return Err(Error::Config(format!("link budget powers must be positive: {self:?}")));
        }
        if self.n_streams == 0 {
            return Err(Error::Config("n_streams must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Per-stream symbol power `P_t / N_s`.
    pub fn stream_power(&self) -> f64 {
        self.tx_power / self.n_streams as f64
    }
}

/// Downlink spectral efficiency on one subcarrier, in bits/s/Hz:
/// `log₂|I + P_t/(σ² N_s)·W† H F Fᴴ Hᴴ W|`.
pub fn spectral_efficiency(h: &CMat, f: &CMat, w: &CMat, budget: &LinkBudget) -> Result<f64> {
    if h.nrows() != w.nrows() || h.ncols() != f.nrows() {
        return Err(Error::Contract(format!(
            "spectral efficiency shapes: H {}x{}, F {}x{}, W {}x{}",
            h.nrows(),
            h.ncols(),
            f.nrows(),
            f.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let rank = numerical_rank(w)?;
    if rank < w.ncols() {
        return Err(Error::RankDeficient {
            name: "MS combiner".into(),
            rank,
            cols: w.ncols(),
        });
    }
    let hf = h * f;
    let snr = budget.tx_power / (budget.noise_ms * budget.n_streams as f64);
    let mut m = pinv(w)? * &hf * hf.adjoint() * w;
    m.scale_mut(snr);
    for i in 0..m.nrows() {
        m[(i, i)] += Complex64::new(1.0, 0.0);
    }
    // det(I + W†GW) = det(I + P_W G) is real and ≥ 1.
    let det = m.determinant();
    Ok(det.norm().log2())
}

/// `|F[:, s]ᴴ a|` for every column.
pub fn tx_radar_gain(f: &CMat, steering: &CVec) -> Vec<f64> {
    f.column_iter().map(|c| c.dotc(steering).norm()).collect()
}

/// `|W[:, r]ᴴ a|` for every RF chain.
pub fn rx_radar_gain(w: &CMat, steering: &CVec) -> Vec<f64> {
    tx_radar_gain(w, steering)
}

/// Radar SINR of one RF chain, aggregated over subcarriers and also reported
/// per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    pub aggregate: f64,
    pub per_subcarrier: Vec<f64>,
    pub signal: f64,
    pub interference: f64,
    pub noise: f64,
}

/// Echo energy over residual SI plus noise at RF chain `chain`, for OFDM
/// symbol `symbol`. Numerator and denominator energies are summed over
/// subcarriers before the ratio is taken.
pub fn radar_sinr(
    w: &CMat,
    channels: &ChannelSet,
    precoders: &[CMat],
    budget: &LinkBudget,
    chain: usize,
    symbol: usize,
) -> Result<SinrReport> {
    if chain >= w.ncols() {
        return Err(Error::Contract(format!(
            "RF chain {chain} out of range ({} chains)",
            w.ncols()
        )));
    }
    if precoders.len() != channels.grid.n_subcarriers {
        return Err(Error::Contract(format!(
            "{} precoders for {} subcarriers",
            precoders.len(),
            channels.grid.n_subcarriers
        )));
    }
    let wc: CVec = w.column(chain).into_owned();
    let p = budget.stream_power();
    // wᴴH_SI, reused across subcarriers.
    let w_si = wc.adjoint() * &channels.si;
    let gains: Vec<Complex64> = channels.targets.iter().map(|t| wc.dotc(&t.steering)).collect();
    let noise = budget.noise_bs * wc.norm_squared();

    let mut per_subcarrier = Vec::with_capacity(precoders.len());
    let (mut sig_tot, mut int_tot) = (0.0, 0.0);
    for (m, f) in precoders.iter().enumerate() {
        let mut row = nalgebra::RowDVector::<Complex64>::zeros(f.ncols());
        for (k, t) in channels.targets.iter().enumerate() {
            let coef = channels.target_coefficient(k, m, symbol) * gains[k];
            row += (t.steering.adjoint() * f).map(|v| v * coef);
        }
        let sig = p * row.norm_squared();
        let int = p * budget.si_power * (&w_si * f).norm_squared();
        per_subcarrier.push(sig / (int + noise));
        sig_tot += sig;
        int_tot += int;
    }
    let noise_tot = noise * precoders.len() as f64;
    Ok(SinrReport {
        aggregate: sig_tot / (int_tot + noise_tot),
        per_subcarrier,
        signal: sig_tot,
        interference: int_tot,
        noise: noise_tot,
    })
}

/// Mean (linear) aggregate SINR over all RF chains.
pub fn radar_sinr_mean(
    w: &CMat,
    channels: &ChannelSet,
    precoders: &[CMat],
    budget: &LinkBudget,
    symbol: usize,
) -> Result<f64> {
    let mut acc = 0.0;
    for chain in 0..w.ncols() {
        acc += radar_sinr(w, channels, precoders, budget, chain, symbol)?.aggregate;
    }
    Ok(acc / w.ncols() as f64)
}

/// Residual self-interference energy `Σ_m ‖Wᴴ H_SI F_m‖_F²`.
pub fn si_leakage(w: &CMat, si: &CMat, precoders: &[CMat]) -> f64 {
    let w_si = w.adjoint() * si;
    precoders.iter().map(|f| (&w_si * f).norm_squared()).sum()
}
