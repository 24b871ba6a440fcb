//! Orthonormal cosine transform over the chunk horizon.
//!
//! Forward: `X_k = s_k * sum_n x_n * cos(pi * (2n+1) * k / (2N))` with
//! `s_0 = sqrt(1/N)`, `s_k = sqrt(2/N)` otherwise. The basis is orthonormal,
//! so the inverse is the transpose and both directions preserve the l2 norm;
//! the quantization error bound in [`super::vocab`] leans on exactly that
//! property. Horizons here are tiny, so the direct O(N^2) form is fine.

/// Forward transform of one length-N signal; `out.len() == n_keep <= N`.
pub fn dct_forward(x: &[f64], n_keep: usize) -> Vec<f64> {
    let n = x.len();
    debug_assert!(n_keep <= n && n > 0);
    let mut out = Vec::with_capacity(n_keep);
    for k in 0..n_keep {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            acc += xi * ((std::f64::consts::PI * (2 * i + 1) as f64 * k as f64)
                / (2.0 * n as f64))
                .cos();
        }
        out.push(scale * acc);
    }
    out
}

/// Inverse transform: reconstruct a length-`n` signal from leading
/// coefficients (missing trailing coefficients are treated as zero).
pub fn dct_inverse(coeffs: &[f64], n: usize) -> Vec<f64> {
    debug_assert!(coeffs.len() <= n && n > 0);
    let mut out = vec![0.0; n];
    for (k, &c) in coeffs.iter().enumerate() {
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for (i, o) in out.iter_mut().enumerate() {
            *o += scale
                * c
                * ((std::f64::consts::PI * (2 * i + 1) as f64 * k as f64) / (2.0 * n as f64))
                    .cos();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn full_round_trip_is_identity_to_machine_precision() {
        let mut rng = crate::seeding::rng(21, &[0]);
        for n in [1usize, 2, 5, 8, 16] {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let c = dct_forward(&x, n);
            let back = dct_inverse(&c, n);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).abs() < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn constant_signal_is_pure_dc() {
        let x = vec![0.75; 8];
        let c = dct_forward(&x, 8);
        assert!((c[0] - 0.75 * 8.0f64.sqrt()).abs() < 1e-12);
        for &v in &c[1..] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn transform_preserves_l2_norm() {
        let mut rng = crate::seeding::rng(21, &[1]);
        let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let c = dct_forward(&x, 8);
        let nx: f64 = x.iter().map(|v| v * v).sum();
        let nc: f64 = c.iter().map(|v| v * v).sum();
        assert!((nx - nc).abs() < 1e-10);
    }

    #[test]
    fn basis_is_orthonormal() {
        // Explicit Gram-matrix check of the rows used by the forward map.
        let n = 8;
        let mut basis = Vec::new();
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            basis.push(dct_inverse(&e, n));
        }
        for a in 0..n {
            for b in 0..n {
                let dot: f64 = basis[a].iter().zip(&basis[b]).map(|(x, y)| x * y).sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }
}
