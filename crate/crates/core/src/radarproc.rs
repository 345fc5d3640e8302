//! Subcarrier-domain OFDM radar processing.
//!
//! The known transmit symbols are divided out of the received samples so that
//! each target leaves a pure two-dimensional complex exponential in the
//! subcarrier × symbol matrix `Z`. A zero-padded 2-D transform then turns every
//! target into a peak whose bin indices give range and velocity.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::metrics::LinkBudget;
use crate::numkernels::{dft_padded_2d_magnitude, CMat, CVec};
use crate::propagation::{ula_response, ChannelSet, DopplerConvention, UlaSpec, SPEED_OF_LIGHT};
use crate::Complex64;

/// Known per-stream symbols of one frame: `symbols[m]` is `N_s × N`, column
/// `n` holding `s_{m,n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotFrame {
    pub symbols: Vec<CMat>,
}

impl PilotFrame {
    fn rms(&self) -> f64 {
        let (mut acc, mut count) = (0.0, 0usize);
        for s in &self.symbols {
            acc += s.norm_squared();
            count += s.len();
        }
        if count == 0 {
            0.0
        } else {
            (acc / count as f64).sqrt()
        }
    }
}

/// Seeded QPSK symbols with per-stream power `stream_power`.
pub fn qpsk_pilots(
    n_subcarriers: usize,
    n_symbols: usize,
    n_streams: usize,
    stream_power: f64,
    seed: u64,
) -> PilotFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = (stream_power / 2.0).sqrt();
    let symbols = (0..n_subcarriers)
        .map(|_| {
            CMat::from_fn(n_streams, n_symbols, |_, _| {
                let re = if rng.random::<bool>() { amp } else { -amp };
                let im = if rng.random::<bool>() { amp } else { -amp };
                Complex64::new(re, im)
            })
        })
        .collect();
    PilotFrame { symbols }
}

/// Received samples after the analog combiner: `samples[m]` is `N_RF × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RxFrame {
    pub samples: Vec<CMat>,
}

fn check_frame(channels: &ChannelSet, w: &CMat, precoders: &[CMat], pilots: &PilotFrame) -> Result<()> {
    let m = channels.grid.n_subcarriers;
    if precoders.len() != m || pilots.symbols.len() != m {
        return Err(Error::Contract(format!(
            "{} precoders and {} pilot blocks for {m} subcarriers",
            precoders.len(),
            pilots.symbols.len()
        )));
    }
    if w.nrows() != channels.n_bs {
        return Err(Error::Contract("combiner row count must equal N_BS".into()));
    }
    for (f, s) in precoders.iter().zip(&pilots.symbols) {
        if f.nrows() != channels.n_bs || f.ncols() != s.nrows() || s.ncols() != channels.grid.n_symbols {
            return Err(Error::Contract("precoder / pilot dimensions disagree".into()));
        }
    }
    Ok(())
}

/// `y = Wᴴ(H_t F s + √ρ H_SI F s + n)` for every subcarrier and symbol, with
/// `n ~ CN(0, σ²_BS I)` drawn from `noise_seed`.
pub fn rx_frame(
    channels: &ChannelSet,
    w: &CMat,
    precoders: &[CMat],
    pilots: &PilotFrame,
    budget: &LinkBudget,
    noise_seed: u64,
) -> Result<RxFrame> {
    check_frame(channels, w, precoders, pilots)?;
    let n_sym = channels.grid.n_symbols;
    let wh = w.adjoint();
    let wh_si = (&wh * &channels.si).scale(budget.si_power.sqrt());
    let noise_std = (budget.noise_bs / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);

    let mut samples = Vec::with_capacity(precoders.len());
    for (m, (f, s)) in precoders.iter().zip(&pilots.symbols).enumerate() {
        let x = f * s; // N_BS × N transmit samples
        let mut y = &wh_si * &x;
        for n in 0..n_sym {
            let xn: CVec = x.column(n).into_owned();
            let mut echo = channels.target_apply(m, n, &xn);
            if noise_std > 0.0 {
                for v in echo.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *v += Complex64::new(re, im) * noise_std;
                }
            }
            let col = &wh * echo;
            let mut dst = y.column_mut(n);
            dst += col;
        }
        samples.push(y);
    }
    Ok(RxFrame { samples })
}

/// Matched subcarrier × symbol matrix:
/// `Z[m, n] = Σ_c y_c[m, n] / ((w_cᴴa)(aᴴ F_m s_{m,n}))`.
///
/// Fails with a degenerate-beam error when any denominator magnitude is at or
/// below `1e-12·N_BS·rms(s)`.
pub fn build_z(frame: &RxFrame, w: &CMat, precoders: &[CMat], pilots: &PilotFrame, steering: &CVec) -> Result<CMat> {
    let m_count = frame.samples.len();
    if precoders.len() != m_count || pilots.symbols.len() != m_count {
        return Err(Error::Contract("frame, precoder and pilot lengths disagree".into()));
    }
    if m_count == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let n_sym = frame.samples[0].ncols();
    let n_rf = w.ncols();
    let guard = 1e-12 * steering.len() as f64 * pilots.rms();
    let rx_gain: Vec<Complex64> = w.column_iter().map(|c| c.dotc(steering)).collect();

    let mut z = CMat::zeros(m_count, n_sym);
    for m in 0..m_count {
        let a_f = steering.adjoint() * &precoders[m];
        let tx = &a_f * &pilots.symbols[m]; // 1 × N
        let y = &frame.samples[m];
        if y.nrows() != n_rf || y.ncols() != n_sym {
            return Err(Error::Contract("received block shape mismatch".into()));
        }
        for n in 0..n_sym {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, g) in rx_gain.iter().enumerate() {
                let d = g * tx[n];
                if d.norm() <= guard {
                    return Err(Error::DegenerateBeam {
                        chain: c,
                        magnitude: d.norm(),
                        guard,
                    });
                }
                acc += y[(c, n)] / d;
            }
            z[(m, n)] = acc;
        }
    }
    Ok(z)
}

/// Magnitude of the padded range-Doppler image with its axis scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub magnitudes: DMatrix<f64>,
    /// Meters per range bin, `c/(2 M̄ Δf)`.
    pub range_bin: f64,
    /// Velocity per Doppler bin as printed, `λ/(N̄ T)`.
    pub velocity_bin: f64,
    pub peak: (usize, usize),
}

impl RangeDopplerMap {
    pub fn mbar(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn nbar(&self) -> usize {
        self.magnitudes.ncols()
    }

    /// `m̄·c/(2 M̄ Δf)`.
    pub fn range_of(&self, mbar_idx: usize) -> f64 {
        mbar_idx as f64 * self.range_bin
    }

    /// `n̄·λ/(N̄ T)`, exactly the printed recovery formula (equals `f_D·λ`).
    pub fn printed_velocity_of(&self, nbar_idx: usize) -> f64 {
        nbar_idx as f64 * self.velocity_bin
    }

    /// Radial velocity under the two-way Doppler convention, with bins above
    /// `N̄/2` mapped to negative velocities.
    pub fn physical_velocity_of(&self, nbar_idx: usize) -> f64 {
        let nbar = self.nbar() as i64;
        let mut k = nbar_idx as i64;
        if k > nbar / 2 {
            k -= nbar;
        }
        let printed = k as f64 * self.velocity_bin;
        // printed = f_D·λ; two-way Doppler has f_D = 2v/λ.
        DopplerConvention::Monostatic.velocity_from_doppler(printed, 1.0)
    }

    pub fn peak_range(&self) -> f64 {
        self.range_of(self.peak.0)
    }

    pub fn peak_printed_velocity(&self) -> f64 {
        self.printed_velocity_of(self.peak.1)
    }

    pub fn peak_physical_velocity(&self) -> f64 {
        self.physical_velocity_of(self.peak.1)
    }
}

fn argmax_lex(mag: &DMatrix<f64>) -> (usize, usize) {
    let mut best = (0, 0);
    let mut best_v = f64::NEG_INFINITY;
    for n in 0..mag.ncols() {
        for m in 0..mag.nrows() {
            let v = mag[(m, n)];
            if v > best_v || (v == best_v && m < best.0) {
                best_v = v;
                best = (m, n);
            }
        }
    }
    best
}

/// Padded inverse DFT over subcarriers and DFT over symbols, peak search and
/// axis scaling.
pub fn range_doppler(
    z: &CMat,
    mbar: usize,
    nbar: usize,
    subcarrier_spacing: f64,
    symbol_duration: f64,
    wavelength: f64,
) -> Result<RangeDopplerMap> {
    let magnitudes = dft_padded_2d_magnitude(z, mbar, nbar)?;
    let peak = argmax_lex(&magnitudes);
    Ok(RangeDopplerMap {
        magnitudes,
        range_bin: SPEED_OF_LIGHT / (2.0 * mbar as f64 * subcarrier_spacing),
        velocity_bin: wavelength / (nbar as f64 * symbol_duration),
        peak,
    })
}

/// Beamformers used for one radar frame.
#[derive(Debug, Clone)]
pub struct RadarBeams {
    pub combiner: CMat,
    pub precoders: Vec<CMat>,
}

/// Frame-level radar settings shared by every look direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarFrameConfig {
    pub budget: LinkBudget,
    pub pilot_seed: u64,
    pub noise_seed: u64,
    pub mbar: usize,
    pub nbar: usize,
}

/// One complete frame toward `angle`: transmit, receive, match and transform.
pub fn process_frame(
    channels: &ChannelSet,
    array: &UlaSpec,
    angle: f64,
    beams: &RadarBeams,
    cfg: &RadarFrameConfig,
) -> Result<RangeDopplerMap> {
    let grid = channels.grid;
    let ns = beams.precoders.first().map_or(0, |f| f.ncols());
    let pilots = qpsk_pilots(
        grid.n_subcarriers,
        grid.n_symbols,
        ns,
        cfg.budget.stream_power(),
        cfg.pilot_seed,
    );
    let frame = rx_frame(
        channels,
        &beams.combiner,
        &beams.precoders,
        &pilots,
        &cfg.budget,
        cfg.noise_seed,
    )?;
    let steering = ula_response(array, angle);
    let z = build_z(&frame, &beams.combiner, &beams.precoders, &pilots, &steering)?;
    range_doppler(
        &z,
        cfg.mbar,
        cfg.nbar,
        grid.subcarrier_spacing,
        grid.symbol_duration,
        array.wavelength,
    )
}

/// Range profiles stacked over look angles.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleRangeImage {
    /// Radians.
    pub angles: Vec<f64>,
    pub range_bin: f64,
    /// `angles.len() × M̄`.
    pub magnitudes: DMatrix<f64>,
}

impl AngleRangeImage {
    /// Global maximum as (angle index, range bin), ties broken lexicographically.
    pub fn peak(&self) -> (usize, usize) {
        argmax_lex(&self.magnitudes)
    }
}

/// Redesigns the beams for every grid angle via `design`, runs one frame and
/// keeps the range profile `max over Doppler bins` of the resulting map.
pub fn angle_range_map(
    channels: &ChannelSet,
    array: &UlaSpec,
    angle_grid: &[f64],
    cfg: &RadarFrameConfig,
    design: &mut dyn FnMut(f64) -> Result<RadarBeams>,
) -> Result<AngleRangeImage> {
    if angle_grid.is_empty() {
        return Err(Error::Contract("angle grid must not be empty".into()));
    }
    let mut magnitudes = DMatrix::<f64>::zeros(angle_grid.len(), cfg.mbar);
    let mut range_bin = 0.0;
    for (i, &angle) in angle_grid.iter().enumerate() {
        let beams = design(angle)?;
        let map = process_frame(channels, array, angle, &beams, cfg)?;
        range_bin = map.range_bin;
        for m in 0..cfg.mbar {
            magnitudes[(i, m)] = map.magnitudes.row(m).max();
        }
        log::debug!("angle-range map: {}/{} angles", i + 1, angle_grid.len());
    }
    Ok(AngleRangeImage {
        angles: angle_grid.to_vec(),
        range_bin,
        magnitudes,
    })
}

fn magnitude_db(v: f64) -> f64 {
    if v > 0.0 {
        20.0 * v.log10()
    } else {
        -300.0
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(std::io::BufWriter::new(file))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `angle_deg,range_m,magnitude_db` rows up to `max_range` meters.
pub fn write_angle_range_csv(image: &AngleRangeImage, max_range: f64, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let err = io_err(path);
    writeln!(out, "angle_deg,range_m,magnitude_db").map_err(&err)?;
    for (i, angle) in image.angles.iter().enumerate() {
        for m in 0..image.magnitudes.ncols() {
            let r = m as f64 * image.range_bin;
            if r > max_range {
                break;
            }
            writeln!(
                out,
                "{:.8e},{:.8e},{:.8e}",
                angle.to_degrees(),
                r,
                magnitude_db(image.magnitudes[(i, m)])
            )
            .map_err(&err)?;
        }
    }
    out.flush().map_err(&err)
}

/// Writes `range_m,velocity_mps,magnitude_db` rows of the bins with range up
/// to `max_range` and physical speed up to `max_speed`, velocity in the
/// two-way convention.
pub fn write_range_velocity_csv(map: &RangeDopplerMap, max_range: f64, max_speed: f64, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let err = io_err(path);
    writeln!(out, "range_m,velocity_mps,magnitude_db").map_err(&err)?;
    let mut cols: Vec<(f64, usize)> = (0..map.nbar())
        .map(|n| (map.physical_velocity_of(n), n))
        .filter(|(v, _)| v.abs() <= max_speed)
        .collect();
    cols.sort_by(|a, b| a.0.total_cmp(&b.0));
    for m in 0..map.mbar() {
        let r = map.range_of(m);
        if r > max_range {
            break;
        }
        for &(v, n) in &cols {
            writeln!(out, "{:.8e},{:.8e},{:.8e}", r, v, magnitude_db(map.magnitudes[(m, n)])).map_err(&err)?;
        }
    }
    out.flush().map_err(&err)
}
