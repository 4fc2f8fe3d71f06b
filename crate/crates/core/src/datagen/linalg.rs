use nalgebra::DMatrix;
use ndarray::{s, Array2};

/// Block companion matrix of a VAR(q): first block row `[A_1 … A_q]`,
/// identity blocks on the sub-diagonal.
pub fn companion(coeffs: &[Array2<f64>]) -> Array2<f64> {
    let q = coeffs.len();
    let h = coeffs[0].nrows();
    let mut b = Array2::zeros((q * h, q * h));
    for (k, a) in coeffs.iter().enumerate() {
        b.slice_mut(s![0..h, k * h..(k + 1) * h]).assign(a);
    }
    for k in 1..q {
        for i in 0..h {
            b[[k * h + i, (k - 1) * h + i]] = 1.0;
        }
    }
    b
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let dm = DMatrix::from_fn(n, n, |i, j| m[[i, j]]);
    dm.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Scale VAR coefficients so the companion spectral radius equals `target`
/// (exact: multiplying `A_k` by `s^k` multiplies every eigenvalue by `s`).
pub(crate) fn rescale_to_radius(coeffs: &mut [Array2<f64>], target: f64) -> f64 {
    let radius = spectral_radius(&companion(coeffs));
    if radius > 0.0 && radius.is_finite() {
        let s = target / radius;
        for (k, a) in coeffs.iter_mut().enumerate() {
            *a *= s.powi(k as i32 + 1);
        }
    }
    radius
}
