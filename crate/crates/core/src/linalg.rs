//! Dense kernels not covered by nalgebra's convenience methods.

use nalgebra::{Cholesky, DMatrix, Dyn};

/// `AᵀA` through a cache-blocked GEMM.
pub fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = a.shape();
    let mut c = DMatrix::<f64>::zeros(p, p);
    if n == 0 || p == 0 {
        return c;
    }
    // column-major storage: A(i, j) at i + j n, so Aᵀ has row stride n and column stride 1
    unsafe {
        matrixmultiply::dgemm(
            p,
            n,
            p,
            1.0,
            a.as_ptr(),
            n as isize,
            1,
            a.as_ptr(),
            1,
            n as isize,
            0.0,
            c.as_mut_ptr(),
            1,
            p as isize,
        );
    }
    // symmetrize against rounding differences between the two triangles
    for j in 0..p {
        for i in 0..j {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// `AᵀWA` for a nonnegative diagonal weight vector.
pub fn weighted_gram(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (i, wi) in w.iter().enumerate() {
        let s = wi.max(0.0).sqrt();
        scaled.row_mut(i).scale_mut(s);
    }
    gram(&scaled)
}

/// Diagonal of `M⁻¹` from the Cholesky factor of `M`: squared column norms of `L⁻¹`.
pub fn inverse_diagonal(chol: &Cholesky<f64, Dyn>) -> Vec<f64> {
    let l = chol.l();
    let p = l.nrows();
    let mut linv = DMatrix::<f64>::identity(p, p);
    let _ = l.solve_lower_triangular_mut(&mut linv);
    linv.column_iter().map(|c| c.norm_squared()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_matches_naive() {
        let a = DMatrix::from_fn(37, 11, |i, j| ((i * 13 + j * 7) % 17) as f64 / 3.0 - 2.0);
        let g = gram(&a);
        let naive = a.transpose() * &a;
        assert!((g - naive).abs().max() < 1e-10);
    }

    #[test]
    fn weighted_gram_matches_naive() {
        let a = DMatrix::from_fn(20, 5, |i, j| ((i * 3 + j * 5) % 7) as f64 - 3.0);
        let w: Vec<f64> = (0..20).map(|i| 0.1 + i as f64 / 10.0).collect();
        let naive = a.transpose() * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(w.clone())) * &a;
        assert!((weighted_gram(&a, &w) - naive).abs().max() < 1e-10);
    }

    #[test]
    fn inverse_diagonal_matches_inverse() {
        let a = DMatrix::from_fn(30, 6, |i, j| ((i * 11 + j * 5) % 13) as f64 - 6.0);
        let m = gram(&a);
        let inv = m.clone().try_inverse().unwrap();
        let d = inverse_diagonal(&Cholesky::new(m).unwrap());
        for j in 0..6 {
            assert!((d[j] - inv[(j, j)]).abs() < 1e-12 * inv[(j, j)].abs().max(1.0));
        }
    }
}
