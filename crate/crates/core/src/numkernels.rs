//! Dense complex linear algebra and padded Fourier transforms.
//!
//! Everything here is a pure function over `nalgebra` matrices. The
//! Hermitian eigensolver and SVD are thin wrappers that fix ordering and
//! shape conventions; the generalized eigensolver whitens the metric with a
//! Cholesky factor so that singular (ridge-regularized) metrics stay stable.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, SVD};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub values: Vec<f64>,
    /// Column `k` is paired with `values[k]`.
    pub vectors: CMat,
}

/// Truncated singular value decomposition `H ≈ U diag(s) Vᴴ`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

fn require_square(a: &CMat, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Contract(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn require_hermitian(a: &CMat, what: &str) -> Result<()> {
    require_square(a, what)?;
    let scale = a.norm();
    let skew = (a - a.adjoint()).norm();
    if skew > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Contract(format!(
            "{what} is not Hermitian (‖A − Aᴴ‖ = {skew:.3e}, ‖A‖ = {scale:.3e})"
        )));
    }
    Ok(())
}

fn require_finite(a: &CMat, what: &str) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Contract(format!("{what} has non-finite entries")))
    }
}

/// Eigen-decomposition of a Hermitian matrix.
pub fn herm_eig(a: &CMat) -> Result<EigPair> {
    require_hermitian(a, "herm_eig input")?;
    require_finite(a, "herm_eig input")?;
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(EigPair { values, vectors })
}

/// Solution of the generalized problem `A F = (C + ridge·I) F Λ` restricted to
/// its `k` largest eigenvalues.
#[derive(Debug, Clone)]
pub struct GenEig {
    pub values: Vec<f64>,
    /// `n×k`, normalized so that `Fᴴ (C + ridge·I) F = I`.
    pub vectors: CMat,
}

/// Scale-aware default ridge: `1e-8·tr(C)/n`, or `1e-8` for a zero metric.
pub fn default_ridge(c: &CMat) -> f64 {
    let n = c.nrows().max(1) as f64;
    let tr: f64 = c.diagonal().iter().map(|z| z.re).sum::<f64>() / n;
    if tr > 0.0 {
        1e-8 * tr
    } else {
        1e-8
    }
}

/// Top-`k` generalized eigenvectors of the pencil `(A, C + ridge·I)`.
///
/// The metric is factored as `L Lᴴ`, the whitened matrix `L⁻¹ A L⁻ᴴ` is
/// eigendecomposed, and the eigenvectors are mapped back through `L⁻ᴴ`.
pub fn gev_top_k(a: &CMat, c: &CMat, k: usize, ridge: f64) -> Result<GenEig> {
    require_hermitian(a, "GEV numerator")?;
    require_hermitian(c, "GEV metric")?;
    let n = a.nrows();
    if c.nrows() != n {
        return Err(Error::Contract(format!(
            "GEV pencil sizes differ: {n} vs {}",
            c.nrows()
        )));
    }
    if k > n {
        return Err(Error::Contract(format!(
            "requested {k} eigenvectors of a {n}x{n} pencil"
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Contract(format!("ridge must be finite and ≥ 0, got {ridge}")));
    }

    let mut metric = (c + c.adjoint()).scale(0.5);
    for i in 0..n {
        metric[(i, i)] += Complex64::new(ridge, 0.0);
    }
    let spectrum = herm_eig(&metric)?;
    let max_eig = spectrum.values.first().copied().unwrap_or(0.0);
    let min_eig = spectrum.values.last().copied().unwrap_or(0.0);
    if !(min_eig >= 1e-14 * max_eig) || max_eig <= 0.0 {
        return Err(Error::Regularization { min_eig, max_eig });
    }

    let chol = Cholesky::new(metric.clone()).ok_or(Error::Regularization { min_eig, max_eig })?;
    let l = chol.l();
    let sym_a = (a + a.adjoint()).scale(0.5);
    let half = l
        .solve_lower_triangular(&sym_a)
        .ok_or(Error::Regularization { min_eig, max_eig })?;
    let whitened = l
        .solve_lower_triangular(&half.adjoint())
        .ok_or(Error::Regularization { min_eig, max_eig })?;
    let whitened = (&whitened + whitened.adjoint()).scale(0.5);
    let eig = herm_eig(&whitened)?;
    let top = eig.vectors.columns(0, k).into_owned();
    let vectors = l
        .adjoint()
        .solve_upper_triangular(&top)
        .ok_or(Error::Regularization { min_eig, max_eig })?;
    Ok(GenEig {
        values: eig.values[..k].to_vec(),
        vectors,
    })
}

/// Leading `k` singular triplets, singular values descending.
pub fn svd_truncated(h: &CMat, k: usize) -> Result<TruncatedSvd> {
    let r = h.nrows().min(h.ncols());
    if k > r {
        return Err(Error::Contract(format!(
            "requested {k} singular triplets of a {}x{} matrix",
            h.nrows(),
            h.ncols()
        )));
    }
    require_finite(h, "SVD input")?;
    let svd = SVD::new(h.clone(), true, true);
    let u_full = svd.u.expect("left singular vectors requested");
    let vt_full = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let order = &order[..k];
    let u = CMat::from_fn(h.nrows(), k, |row, c| u_full[(row, order[c])]);
    let v = CMat::from_fn(h.ncols(), k, |row, c| vt_full[(order[c], row)].conj());
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok(TruncatedSvd { u, s, v })
}

/// Full thin SVD (`k = min(rows, cols)`).
pub fn svd_thin(h: &CMat) -> Result<TruncatedSvd> {
    svd_truncated(h, h.nrows().min(h.ncols()))
}

/// Rank tolerance used by [`pinv`] and [`numerical_rank`].
fn rank_tol(s: &[f64], rows: usize, cols: usize) -> f64 {
    let smax = s.first().copied().unwrap_or(0.0);
    smax * rows.max(cols) as f64 * f64::EPSILON
}

pub fn numerical_rank(a: &CMat) -> Result<usize> {
    if a.is_empty() {
        return Ok(0);
    }
    let svd = svd_thin(a)?;
    let tol = rank_tol(&svd.s, a.nrows(), a.ncols());
    Ok(svd.s.iter().filter(|&&s| s > tol).count())
}

/// Moore–Penrose pseudoinverse.
pub fn pinv(a: &CMat) -> Result<CMat> {
    if a.is_empty() {
        return Ok(CMat::zeros(a.ncols(), a.nrows()));
    }
    let svd = svd_thin(a)?;
    let tol = rank_tol(&svd.s, a.nrows(), a.ncols());
    let mut out = CMat::zeros(a.ncols(), a.nrows());
    for (i, &s) in svd.s.iter().enumerate() {
        if s > tol {
            let vi = svd.v.column(i);
            let ui = svd.u.column(i);
            out += (vi * ui.adjoint()).unscale(s);
        }
    }
    Ok(out)
}

fn check_padding(z: &CMat, mbar: usize, nbar: usize) -> Result<()> {
    if mbar < z.nrows() || nbar < z.ncols() {
        return Err(Error::Contract(format!(
            "padded sizes {mbar}x{nbar} smaller than input {}x{}",
            z.nrows(),
            z.ncols()
        )));
    }
    Ok(())
}

/// Forward transform along the symbol axis (columns `n`), zero-padded to `nbar`.
fn symbol_axis_transform(z: &CMat, nbar: usize, planner: &mut FftPlanner<f64>) -> CMat {
    let fft = planner.plan_fft_forward(nbar);
    let mut out = CMat::zeros(z.nrows(), nbar);
    let mut buf = vec![Complex64::new(0.0, 0.0); nbar];
    for m in 0..z.nrows() {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for n in 0..z.ncols() {
            buf[n] = z[(m, n)];
        }
        fft.process(&mut buf);
        for (nb, v) in buf.iter().enumerate() {
            out[(m, nb)] = *v;
        }
    }
    out
}

/// Padded 2-D transform:
/// `out[m̄, n̄] = Σ Z[m, n]·exp(+j2π m m̄/M̄)·exp(−j2π n n̄/N̄)`.
///
/// Unnormalized inverse DFT over the subcarrier axis (rows), forward DFT over
/// the symbol axis (columns).
pub fn dft_padded_2d(z: &CMat, mbar: usize, nbar: usize) -> Result<CMat> {
    check_padding(z, mbar, nbar)?;
    let mut planner = FftPlanner::new();
    let stage = symbol_axis_transform(z, nbar, &mut planner);
    let ifft = planner.plan_fft_inverse(mbar);
    let mut out = CMat::zeros(mbar, nbar);
    let mut buf = vec![Complex64::new(0.0, 0.0); mbar];
    for nb in 0..nbar {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for m in 0..z.nrows() {
            buf[m] = stage[(m, nb)];
        }
        ifft.process(&mut buf);
        out.column_mut(nb).copy_from_slice(&buf);
    }
    Ok(out)
}

/// Magnitude of [`dft_padded_2d`], computed one column at a time so that the
/// complex `M̄×N̄` image is never materialized.
pub fn dft_padded_2d_magnitude(z: &CMat, mbar: usize, nbar: usize) -> Result<DMatrix<f64>> {
    check_padding(z, mbar, nbar)?;
    let mut planner = FftPlanner::new();
    let stage = symbol_axis_transform(z, nbar, &mut planner);
    let ifft = planner.plan_fft_inverse(mbar);
    let mut out = DMatrix::<f64>::zeros(mbar, nbar);
    let mut buf = vec![Complex64::new(0.0, 0.0); mbar];
    for nb in 0..nbar {
        buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
        for m in 0..z.nrows() {
            buf[m] = stage[(m, nb)];
        }
        ifft.process(&mut buf);
        for (dst, v) in out.column_mut(nb).iter_mut().zip(buf.iter()) {
            *dst = v.norm();
        }
    }
    Ok(out)
}

/// `‖P_A − P_B‖_F / √2` between the column spans of two matrices with the
/// same column count. Zero iff the spans coincide.
pub fn subspace_distance(a: &CMat, b: &CMat) -> Result<f64> {
    let pa = orthonormal_basis(a)?;
    let pb = orthonormal_basis(b)?;
    let proj_a = &pa * pa.adjoint();
    let proj_b = &pb * pb.adjoint();
    Ok((proj_a - proj_b).norm() / 2f64.sqrt())
}

/// Orthonormal basis of the column span (from the thin SVD).
pub fn orthonormal_basis(a: &CMat) -> Result<CMat> {
    let svd = svd_thin(a)?;
    let tol = rank_tol(&svd.s, a.nrows(), a.ncols());
    let r = svd.s.iter().filter(|&&s| s > tol).count();
    Ok(svd.u.columns(0, r).into_owned())
}

/// Complex exponential `e^{jθ}`.
#[inline]
pub fn cis(theta: f64) -> Complex64 {
    Complex64::from_polar(1.0, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn rand_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMat {
        let g = rand_cmat(rng, n, rank);
        &g * g.adjoint()
    }

    #[test]
    fn herm_eig_identity_and_diagonal() {
        let e = herm_eig(&CMat::identity(3, 3)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0, 1.0]);
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!((gram - CMat::identity(3, 3)).norm() < 1e-12);

        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::new(3.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
        ]));
        let e = herm_eig(&d).unwrap();
        for (got, want) in e.values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn herm_eig_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = rand_cmat(&mut rng, 8, 8);
        let a = &g + g.adjoint();
        let e = herm_eig(&a).unwrap();
        let lam = CMat::from_diagonal(&CVec::from_iterator(
            8,
            e.values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        let rec = &e.vectors * lam * e.vectors.adjoint();
        assert!((rec - &a).norm() <= 1e-8 * a.norm());
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        for k in 0..8 {
            let v = e.vectors.column(k);
            let resid = &a * v - v * Complex64::new(e.values[k], 0.0);
            assert!(resid.norm() <= 1e-8 * a.norm());
        }
    }

    #[test]
    fn herm_eig_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(herm_eig(&rand_cmat(&mut rng, 3, 4)), Err(Error::Contract(_))));
        assert!(matches!(herm_eig(&rand_cmat(&mut rng, 4, 4)), Err(Error::Contract(_))));
    }

    #[test]
    fn gev_identity_metric_reduces_to_eigenvectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = rand_psd(&mut rng, 6, 6);
        let g = gev_top_k(&a, &CMat::identity(6, 6), 2, 0.0).unwrap();
        let plain = herm_eig(&a).unwrap();
        assert!(subspace_distance(&g.vectors, &plain.vectors.columns(0, 2).into_owned()).unwrap() < 1e-9);
        for (x, y) in g.values.iter().zip(&plain.values) {
            assert!((x - y).abs() < 1e-10 * plain.values[0]);
        }
    }

    #[test]
    fn gev_rank_one_numerator_is_steered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let av = rand_cmat(&mut rng, 5, 1);
        let a = &av * av.adjoint();
        let g = gev_top_k(&a, &CMat::identity(5, 5), 1, 0.0).unwrap();
        assert!(subspace_distance(&g.vectors, &av).unwrap() < 1e-10);
    }

    #[test]
    fn gev_metric_normalization_and_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = rand_psd(&mut rng, 8, 8);
        let c = rand_psd(&mut rng, 8, 3);
        let scale = default_ridge(&c) * 1e8;
        // The gram check is limited by eps·cond(C + ridge·I); at ridge 1e-6·tr/n
        // that stays well under 1e-8, at the default ridge it scales with cond.
        for (ridge, tol) in [(1e-6 * scale, 1e-8), (default_ridge(&c), 1e-6)] {
            let g = gev_top_k(&a, &c, 4, ridge).unwrap();
            let mut metric = c.clone();
            for i in 0..8 {
                metric[(i, i)] += Complex64::new(ridge, 0.0);
            }
            let gram = g.vectors.adjoint() * &metric * &g.vectors;
            assert!((gram - CMat::identity(4, 4)).norm() < tol, "ridge {ridge:e}");
            for k in 0..4 {
                let f = g.vectors.column(k);
                let lhs = &a * f;
                let rhs = &metric * f * Complex64::new(g.values[k], 0.0);
                let rel = (&lhs - &rhs).norm() / lhs.norm().max(rhs.norm());
                assert!(rel <= tol, "ridge {ridge:e} rel {rel:e}");
            }
        }
    }

    #[test]
    fn gev_singular_metric_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = rand_psd(&mut rng, 6, 6);
        let c = rand_psd(&mut rng, 6, 2);
        assert!(matches!(gev_top_k(&a, &c, 1, 0.0), Err(Error::Regularization { .. })));
        assert!(matches!(gev_top_k(&a, &c, 7, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn default_ridge_scales_with_trace() {
        assert_eq!(default_ridge(&CMat::zeros(4, 4)), 1e-8);
        let c = CMat::identity(4, 4).scale(5.0);
        assert!((default_ridge(&c) - 5e-8).abs() < 1e-20);
    }

    #[test]
    fn svd_simple_cases() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]));
        let s = svd_truncated(&d, 2).unwrap();
        assert!((s.s[0] - 2.0).abs() < 1e-14 && (s.s[1] - 1.0).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = rand_cmat(&mut rng, 5, 1);
        let v = rand_cmat(&mut rng, 3, 1);
        let u = u.normalize();
        let v = v.normalize();
        let h = (&u * v.adjoint()).scale(4.0);
        let s = svd_truncated(&h, 3).unwrap();
        assert!((s.s[0] - 4.0).abs() < 1e-12);
        assert!(s.s[1] < 1e-12 && s.s[2] < 1e-12);
        assert!(matches!(svd_truncated(&h, 4), Err(Error::Contract(_))));
    }

    #[test]
    fn svd_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = rand_cmat(&mut rng, 16, 32);
        let s = svd_truncated(&h, 16).unwrap();
        let sig = CMat::from_diagonal(&CVec::from_iterator(16, s.s.iter().map(|&x| Complex64::new(x, 0.0))));
        let rec = &s.u * sig * s.v.adjoint();
        assert!((rec - &h).norm() <= 1e-8 * h.norm());
        for i in 0..16 {
            let lhs = &h * s.v.column(i);
            let rhs = s.u.column(i) * Complex64::new(s.s[i], 0.0);
            assert!((lhs - rhs).norm() < 1e-8 * s.s[0]);
        }
        assert!((s.u.adjoint() * &s.u - CMat::identity(16, 16)).norm() < 1e-10);
        assert!((s.v.adjoint() * &s.v - CMat::identity(16, 16)).norm() < 1e-10);
    }

    #[test]
    fn pinv_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = rand_cmat(&mut rng, 7, 3);
        let p = pinv(&a).unwrap();
        assert!((&p * &a - CMat::identity(3, 3)).norm() < 1e-10);
        assert!((&a * &p * &a - &a).norm() < 1e-10);
        let rank1 = a.columns(0, 1) * a.columns(0, 1).adjoint();
        assert_eq!(numerical_rank(&rank1).unwrap(), 1);
    }

    #[test]
    fn dft_zero_and_padding_contract() {
        let z = CMat::zeros(4, 3);
        let out = dft_padded_2d(&z, 8, 6).unwrap();
        assert!(out.iter().all(|v| v.norm() == 0.0));
        assert!(matches!(dft_padded_2d(&z, 3, 6), Err(Error::Contract(_))));
        assert!(matches!(dft_padded_2d(&z, 8, 2), Err(Error::Contract(_))));
    }

    #[test]
    fn dft_single_tone_peak() {
        let (m, n, mbar, nbar, k, l) = (8usize, 4usize, 16usize, 12usize, 5usize, 7usize);
        let z = CMat::from_fn(m, n, |mi, ni| {
            cis(-2.0 * std::f64::consts::PI * (mi * k) as f64 / mbar as f64)
                * cis(2.0 * std::f64::consts::PI * (ni * l) as f64 / nbar as f64)
        });
        let out = dft_padded_2d(&z, mbar, nbar).unwrap();
        let (mut best, mut at) = (0.0, (0, 0));
        for i in 0..mbar {
            for j in 0..nbar {
                if out[(i, j)].norm() > best {
                    best = out[(i, j)].norm();
                    at = (i, j);
                }
            }
        }
        assert_eq!(at, (k, l));
        assert!((best - (m * n) as f64).abs() < 1e-9);
        let mag = dft_padded_2d_magnitude(&z, mbar, nbar).unwrap();
        assert!((mag[(k, l)] - (m * n) as f64).abs() < 1e-9);
    }

    #[test]
    fn dft_matches_direct_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = rand_cmat(&mut rng, 8, 4);
        let (mbar, nbar) = (16, 8);
        let out = dft_padded_2d(&z, mbar, nbar).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        for mb in 0..mbar {
            for nb in 0..nbar {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..8 {
                    for n in 0..4 {
                        acc += z[(m, n)]
                            * cis(tau * (m * mb) as f64 / mbar as f64)
                            * cis(-tau * (n * nb) as f64 / nbar as f64);
                    }
                }
                assert!((acc - out[(mb, nb)]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn dft_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let z1 = rand_cmat(&mut rng, 6, 5);
        let z2 = rand_cmat(&mut rng, 6, 5);
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.5));
        let lhs = dft_padded_2d(&(z1.map(|v| v * a) + z2.map(|v| v * b)), 12, 10).unwrap();
        let rhs =
            dft_padded_2d(&z1, 12, 10).unwrap().map(|v| v * a) + dft_padded_2d(&z2, 12, 10).unwrap().map(|v| v * b);
        assert!((lhs - rhs).norm() < 1e-9);
    }
}
