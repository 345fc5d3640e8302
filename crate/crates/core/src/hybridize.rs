//! Frequency-flat analog / per-subcarrier digital factorization of fully
//! digital beamformers by phase-extraction alternating minimization.

use crate::error::{Error, Result};
use crate::numkernels::{herm_eig, pinv, svd_thin, CMat};
use crate::Complex64;

/// `F_m ≈ analog · digital[m]` with unit-modulus analog entries.
#[derive(Debug, Clone)]
pub struct HybridFactorization {
    pub analog: CMat,
    pub digital: Vec<CMat>,
    /// Objective `Σ_m ‖T_m − A D_m‖_F²` after each least-squares digital step,
    /// before the final power rescaling.
    pub residuals: Vec<f64>,
    /// Analog entries whose phase was undefined (zero magnitude) and set to 0.
    pub phase_fallbacks: usize,
}

impl HybridFactorization {
    /// `analog · digital[m]`.
    pub fn apply(&self, m: usize) -> Result<CMat> {
        let d = self
            .digital
            .get(m)
            .ok_or_else(|| Error::Contract(format!("subcarrier {m} out of range ({} stored)", self.digital.len())))?;
        Ok(&self.analog * d)
    }

    /// Effective matrices for every subcarrier.
    pub fn effective(&self) -> Vec<CMat> {
        self.digital.iter().map(|d| &self.analog * d).collect()
    }

    /// Final objective relative to `Σ_m ‖T_m‖_F²`.
    pub fn relative_residual(&self, targets: &[CMat]) -> f64 {
        let energy: f64 = targets.iter().map(|t| t.norm_squared()).sum();
        self.residuals.last().copied().unwrap_or(0.0) / energy.max(f64::MIN_POSITIVE)
    }
}

/// Materializes `F_RF · F_BB,m`.
pub fn apply_hybrid(fact: &HybridFactorization, m: usize) -> Result<CMat> {
    fact.apply(m)
}

fn unit_phase(z: Complex64, fallbacks: &mut usize) -> Complex64 {
    let r = z.norm();
    if r > 0.0 && r.is_finite() {
        z / r
    } else {
        *fallbacks += 1;
        Complex64::new(1.0, 0.0)
    }
}

fn least_squares_digital(analog: &CMat, targets: &[CMat]) -> Result<Vec<CMat>> {
    let p = pinv(analog)?;
    Ok(targets.iter().map(|t| &p * t).collect())
}

fn objective(analog: &CMat, digital: &[CMat], targets: &[CMat]) -> f64 {
    targets
        .iter()
        .zip(digital)
        .map(|(t, d)| (t - analog * d).norm_squared())
        .sum()
}

/// Initial analog matrix: phases of the dominant left singular vectors of
/// `[T_0, …, T_{M−1}]`, completed with DFT columns when the stack has fewer
/// singular vectors than RF chains.
fn initial_analog(targets: &[CMat], n_rf: usize, fallbacks: &mut usize) -> Result<CMat> {
    let n_ant = targets[0].nrows();
    let total_cols: usize = targets.iter().map(|t| t.ncols()).sum();
    let mut stacked = CMat::zeros(n_ant, total_cols);
    let mut at = 0;
    for t in targets {
        stacked.columns_mut(at, t.ncols()).copy_from(t);
        at += t.ncols();
    }
    let u = svd_thin(&stacked)?.u;
    let mut analog = CMat::zeros(n_ant, n_rf);
    for j in 0..n_rf {
        for i in 0..n_ant {
            analog[(i, j)] = if j < u.ncols() {
                unit_phase(u[(i, j)], fallbacks)
            } else {
                Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (i * j) as f64 / n_ant as f64)
            };
        }
    }
    Ok(analog)
}

/// Factors `targets[m] ≈ A·D_m` with `|A_ij| = 1`, then rescales every `D_m`
/// so that `‖A D_m‖_F² = N_s`.
///
/// Alternates least-squares digital updates `D_m = A⁺T_m` with phase
/// extraction `A = exp(j·arg(Σ_m T_m D_mᴴ + A(λI − G)))`, where
/// `G = Σ_m D_m D_mᴴ` and `λ = λ_max(G)`. For `G ∝ I` this is the plain
/// `exp(j·arg Σ_m T_m D_mᴴ)` update. An analog update that does not lower the
/// objective ends the iteration; otherwise the loop stops once the relative
/// decrease falls under `tol` or after `max_iter` analog updates.
pub fn pe_altmin(targets: &[CMat], n_rf: usize, max_iter: usize, tol: f64) -> Result<HybridFactorization> {
    let first = targets
        .first()
        .ok_or_else(|| Error::Contract("hybrid decomposition needs at least one target matrix".into()))?;
    let (n_ant, ns) = (first.nrows(), first.ncols());
    if targets.iter().any(|t| t.nrows() != n_ant || t.ncols() != ns) {
        return Err(Error::Contract("target matrices differ in shape".into()));
    }
    if !(ns <= n_rf && n_rf <= n_ant) {
        return Err(Error::Contract(format!(
            "need N_s ≤ N_RF ≤ N_ant, got {ns}, {n_rf}, {n_ant}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::Contract("max_iter must be ≥ 1".into()));
    }

    let mut fallbacks = 0;
    let mut analog = initial_analog(targets, n_rf, &mut fallbacks)?;
    let mut digital = least_squares_digital(&analog, targets)?;
    let mut obj = objective(&analog, &digital, targets);
    let mut residuals = vec![obj];

    for _ in 0..max_iter {
        if obj <= f64::MIN_POSITIVE {
            break;
        }
        let mut corr = CMat::zeros(n_ant, n_rf);
        let mut gram = CMat::zeros(n_rf, n_rf);
        for (t, d) in targets.iter().zip(&digital) {
            corr += t * d.adjoint();
            gram += d * d.adjoint();
        }
        // Majorize tr(A G Aᴴ) by λ_max(G)·‖A‖² (constant on the unit-modulus
        // set) so that the phase step cannot increase the objective.
        let lambda = herm_eig(&(&gram + gram.adjoint()).scale(0.5))?.values[0];
        let mut shift = gram.scale(-1.0);
        for i in 0..n_rf {
            shift[(i, i)] += Complex64::new(lambda, 0.0);
        }
        corr += &analog * shift;
        let mut step_fallbacks = 0;
        let cand = corr.map(|z| unit_phase(z, &mut step_fallbacks));
        let cand_digital = least_squares_digital(&cand, targets)?;
        let cand_obj = objective(&cand, &cand_digital, targets);
        if cand_obj > obj {
            break;
        }
        fallbacks += step_fallbacks;
        let rel = (obj - cand_obj) / obj;
        analog = cand;
        digital = cand_digital;
        obj = cand_obj;
        residuals.push(obj);
        if rel < tol {
            break;
        }
    }
    if fallbacks > 0 {
        log::debug!("phase extraction: {fallbacks} zero-magnitude entries set to phase 0");
    }

    let target_norm = (ns as f64).sqrt();
    for d in digital.iter_mut() {
        let norm = (&analog * &*d).norm();
        if norm > 0.0 {
            d.scale_mut(target_norm / norm);
        }
    }
    Ok(HybridFactorization {
        analog,
        digital,
        residuals,
        phase_fallbacks: fallbacks,
    })
}
