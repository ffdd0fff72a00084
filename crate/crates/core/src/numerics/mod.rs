//! Dense linear-algebra and clustering primitives used by every other
//! module. Factorizations are delegated to LAPACK; this module fixes the
//! conventions (truncation thresholds, eigenvalue ordering, eigenvector
//! phase) that the rest of the crate relies on for reproducibility.

mod kmeans;

pub use kmeans::{kmeans, KmeansResult};

use ndarray::prelude::*;
use ndarray_linalg::{Eig, FactorizeC, JobSvd, SolveC, SVDDC, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;

/// Dense real matrix, row-major logical indexing.
pub type RealMatrix = Array2<f64>;
/// Dense complex matrix.
pub type ComplexMatrix = Array2<Complex64>;

/// Default relative cutoff for singular-value truncation. Protects the
/// rank-deficient Gram matrices produced by correlated dictionaries.
pub const DEFAULT_SVD_RTOL: f64 = 1e-10;

/// Derive an independent RNG seed for sub-stream `index` (per-trajectory
/// sampling, k-means restarts, per-window scans). SplitMix64 finalizer.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn all_finite(m: &ArrayView2<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Frobenius norm.
pub fn fro_norm(m: &ArrayView2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Frobenius norm of a complex matrix.
pub fn fro_norm_c(m: &ArrayView2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Moore-Penrose pseudo-inverse via SVD. Singular values below
/// `rel_tol * sigma_max` are treated as zero.
pub fn pseudo_inverse(m: &RealMatrix, rel_tol: f64) -> Result<RealMatrix> {
    if m.is_empty() {
        return Err(Error::invalid("pseudo_inverse: empty matrix"));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid(format!(
            "pseudo_inverse: rel_tol must be in (0,1), got {rel_tol}"
        )));
    }
    if !all_finite(&m.view()) {
        return Err(Error::invalid("pseudo_inverse: non-finite entries"));
    }
    let (u, s, vt) = m.svddc(JobSvd::Some)?;
    let u = u.expect("JobSvd::Some returns U");
    let vt = vt.expect("JobSvd::Some returns V^T");
    let cutoff = rel_tol * s.iter().cloned().fold(0.0, f64::max);
    // pinv = V * diag(1/s) * U^T, truncated
    let sinv = s.mapv(|x| if x > cutoff { 1.0 / x } else { 0.0 });
    let mut vt_scaled = vt;
    for (i, w) in sinv.iter().enumerate() {
        vt_scaled.row_mut(i).mapv_inplace(|x| x * w);
    }
    Ok(vt_scaled.t().dot(&u.t()))
}

/// Complex pseudo-inverse with the same truncation rule.
pub fn pseudo_inverse_complex(m: &ComplexMatrix, rel_tol: f64) -> Result<ComplexMatrix> {
    if m.is_empty() {
        return Err(Error::invalid("pseudo_inverse_complex: empty matrix"));
    }
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::invalid(format!(
            "pseudo_inverse_complex: rel_tol must be in (0,1), got {rel_tol}"
        )));
    }
    let (u, s, vt) = m.svddc(JobSvd::Some)?;
    let u = u.expect("JobSvd::Some returns U");
    let vt = vt.expect("JobSvd::Some returns V^H");
    let cutoff = rel_tol * s.iter().cloned().fold(0.0, f64::max);
    let sinv = s.mapv(|x| if x > cutoff { 1.0 / x } else { 0.0 });
    // pinv = V * diag(1/s) * U^H
    let mut v = vt.mapv(|z| z.conj()).reversed_axes().as_standard_layout().to_owned();
    for (j, w) in sinv.iter().enumerate() {
        v.column_mut(j).mapv_inplace(|z| z * w);
    }
    let uh = u.mapv(|z| z.conj()).reversed_axes().as_standard_layout().to_owned();
    Ok(v.dot(&uh))
}

/// Eigendecomposition of a general (non-symmetric) real matrix.
///
/// Returns `(eigenvalues, right_eigenvectors)` with `K V = V diag(lambda)`.
/// The output is canonicalized so repeated runs and regression files match:
/// eigenvalues sorted by descending modulus, ties by descending real part
/// then descending imaginary part; each eigenvector has unit 2-norm and is
/// phase-rotated so its first non-negligible component is real positive.
pub fn eigendecompose(k: &RealMatrix) -> Result<(Array1<Complex64>, ComplexMatrix)> {
    if k.nrows() != k.ncols() {
        return Err(Error::invalid(format!(
            "eigendecompose: matrix must be square, got {}x{}",
            k.nrows(),
            k.ncols()
        )));
    }
    if k.is_empty() {
        return Err(Error::invalid("eigendecompose: empty matrix"));
    }
    if !all_finite(&k.view()) {
        return Err(Error::invalid("eigendecompose: non-finite entries"));
    }
    let (vals, vecs) = k.eig()?;
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ka = (vals[a].norm(), vals[a].re, vals[a].im);
        let kb = (vals[b].norm(), vals[b].re, vals[b].im);
        kb.0.total_cmp(&ka.0)
            .then(kb.1.total_cmp(&ka.1))
            .then(kb.2.total_cmp(&ka.2))
    });
    let mut lambda = Array1::<Complex64>::zeros(n);
    let mut v = ComplexMatrix::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        lambda[dst] = vals[src];
        let mut col = vecs.column(src).to_owned();
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            col.mapv_inplace(|z| z / norm);
        }
        // phase convention: first non-negligible component real positive
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-12) {
            let phase = lead / lead.norm();
            let rot = phase.conj();
            col.mapv_inplace(|z| z * rot);
        }
        v.column_mut(dst).assign(&col);
    }
    Ok((lambda, v))
}

/// Solve `m x = rhs` for Hermitian positive-definite `m` (Cholesky), with
/// one factorization shared across all right-hand-side columns.
pub fn hermitian_pd_solve(m: &ComplexMatrix, rhs: &ComplexMatrix) -> Result<ComplexMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("hermitian_pd_solve: matrix must be square"));
    }
    if m.nrows() != rhs.nrows() {
        return Err(Error::invalid(format!(
            "hermitian_pd_solve: dimension mismatch {}x{} vs rhs {}x{}",
            m.nrows(),
            m.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    let factor = m
        .factorizec(UPLO::Lower)
        .map_err(|e| Error::numerical(format!("Cholesky factorization failed (matrix not positive-definite?): {e}")))?;
    let cols: Vec<Array1<Complex64>> = {
        let results = par::map_indexed(rhs.ncols(), |j| {
            factor
                .solvec(&rhs.column(j).to_owned())
                .map_err(|e| Error::numerical(format!("Cholesky solve failed: {e}")))
        });
        results.into_iter().collect::<Result<_>>()?
    };
    let mut x = ComplexMatrix::zeros(rhs.dim());
    for (j, col) in cols.iter().enumerate() {
        x.column_mut(j).assign(col);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
    }

    fn max_abs(m: &RealMatrix) -> f64 {
        m.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    #[test]
    fn pinv_identity() {
        let eye = Array2::<f64>::eye(3);
        let p = pseudo_inverse(&eye, 1e-10).unwrap();
        assert!(max_abs(&(&p - &eye)) < 1e-12);
    }

    #[test]
    fn pinv_rank_deficient_diagonal() {
        let m = array![[2.0, 0.0], [0.0, 0.0]];
        let p = pseudo_inverse(&m, 1e-10).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(p[(1, 1)], 0.0, epsilon = 1e-12);
        assert_relative_eq!(p[(0, 1)], 0.0, epsilon = 1e-12);
    }

    /// All four Penrose identities on a random rectangular matrix.
    fn check_penrose(m: &RealMatrix, tol: f64) {
        let p = pseudo_inverse(m, 1e-10).unwrap();
        let scale = fro_norm(&m.view()).max(1.0);
        let mpm = m.dot(&p).dot(m);
        assert!(fro_norm(&(&mpm - m).view()) < tol * scale, "M P M = M");
        let pmp = p.dot(m).dot(&p);
        assert!(fro_norm(&(&pmp - &p).view()) < tol * fro_norm(&p.view()).max(1.0), "P M P = P");
        let mp = m.dot(&p);
        assert!(fro_norm(&(&mp.t().to_owned() - &mp).view()) < tol * scale, "(MP)^T = MP");
        let pm = p.dot(m);
        assert!(fro_norm(&(&pm.t().to_owned() - &pm).view()) < tol * scale, "(PM)^T = PM");
    }

    #[test]
    fn pinv_penrose_conditions_random() {
        check_penrose(&random_matrix(4, 2, 11), 1e-10);
        check_penrose(&random_matrix(7, 13, 12), 1e-10);
        check_penrose(&random_matrix(200, 150, 13), 1e-8);
        check_penrose(&random_matrix(200, 200, 14), 1e-8);
    }

    #[test]
    fn pinv_rejects_nonfinite() {
        let mut m = random_matrix(3, 3, 1);
        m[(1, 1)] = f64::NAN;
        assert!(matches!(pseudo_inverse(&m, 1e-10), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn pinv_rejects_bad_tol() {
        let m = random_matrix(3, 3, 1);
        assert!(pseudo_inverse(&m, 0.0).is_err());
        assert!(pseudo_inverse(&m, 1.5).is_err());
    }

    #[test]
    fn pinv_complex_penrose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m: ComplexMatrix = Array2::from_shape_fn((6, 4), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let p = pseudo_inverse_complex(&m, 1e-10).unwrap();
        let mpm = m.dot(&p).dot(&m);
        assert!(fro_norm_c(&(&mpm - &m).view()) < 1e-10);
    }

    #[test]
    fn eig_diagonal() {
        let m = array![[1.0, 0.0], [0.0, 0.5]];
        let (vals, _) = eigendecompose(&m).unwrap();
        assert_relative_eq!(vals[0].re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1].re, 0.5, epsilon = 1e-12);
        assert!(vals[0].im.abs() < 1e-12 && vals[1].im.abs() < 1e-12);
    }

    #[test]
    fn eig_rotation() {
        // 90-degree rotation: spectrum {+i, -i}
        let m = array![[0.0, -1.0], [1.0, 0.0]];
        let (vals, _) = eigendecompose(&m).unwrap();
        assert_relative_eq!(vals[0].im, 1.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1].im, -1.0, epsilon = 1e-12);
        assert!(vals[0].re.abs() < 1e-12);
    }

    #[test]
    fn eig_companion_cube_roots_of_unity() {
        // companion matrix of z^3 - 1; oracle: roots exp(2 pi i k / 3)
        let m = array![[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let (vals, _) = eigendecompose(&m).unwrap();
        let mut expected: Vec<Complex64> = (0..3)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 3.0))
            .collect();
        for v in vals.iter() {
            let (idx, d) = expected
                .iter()
                .enumerate()
                .map(|(i, e)| (i, (v - e).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d < 1e-10, "eigenvalue {v} not a cube root of unity");
            expected.remove(idx);
        }
    }

    #[test]
    fn eig_residual_random_large() {
        for (n, seed) in [(50usize, 21u64), (750, 22)] {
            let k = random_matrix(n, n, seed);
            let (vals, vecs) = eigendecompose(&k).unwrap();
            let kc = k.mapv(|x| Complex64::new(x, 0.0));
            let kv = kc.dot(&vecs);
            let mut vl = vecs.clone();
            for (j, lam) in vals.iter().enumerate() {
                vl.column_mut(j).mapv_inplace(|z| z * lam);
            }
            let resid = fro_norm_c(&(&kv - &vl).view());
            assert!(
                resid <= 1e-8 * fro_norm(&k.view()),
                "residual {resid} too large for n={n}"
            );
        }
    }

    #[test]
    fn eig_deterministic_phase() {
        let k = random_matrix(20, 20, 33);
        let (v1, w1) = eigendecompose(&k).unwrap();
        let (v2, w2) = eigendecompose(&k).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(w1, w2);
    }

    #[test]
    fn eig_rejects_nonsquare() {
        let m = random_matrix(3, 4, 2);
        assert!(matches!(eigendecompose(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hermitian_solve_identity() {
        let eye: ComplexMatrix = Array2::eye(3).mapv(|x: f64| Complex64::new(x, 0.0));
        let b = Array2::from_shape_fn((3, 2), |(i, j)| Complex64::new(i as f64, j as f64));
        let x = hermitian_pd_solve(&eye, &b).unwrap();
        assert!(fro_norm_c(&(&x - &b).view()) < 1e-14);
    }

    #[test]
    fn hermitian_solve_diagonal() {
        let m: ComplexMatrix = Array2::from_diag(&array![
            Complex64::new(2.0, 0.0),
            Complex64::new(4.0, 0.0)
        ]);
        let b = array![[Complex64::new(2.0, 0.0)], [Complex64::new(4.0, 0.0)]];
        let x = hermitian_pd_solve(&m, &b).unwrap();
        assert_relative_eq!(x[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(x[(1, 0)].re, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn hermitian_solve_random_psd_toeplitz() {
        // M = T^H T + I is Hermitian PD; check residual of the solve.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 40;
        let first: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let t = Array2::from_shape_fn((n, n), |(i, j)| {
            if i >= j { first[i - j] } else { first[j - i].conj() }
        });
        let th = t.mapv(|z| z.conj()).reversed_axes().to_owned();
        let mut m = th.dot(&t);
        for i in 0..n {
            m[(i, i)] += Complex64::new(1.0, 0.0);
        }
        let b = Array2::from_shape_fn((n, 3), |(i, j)| {
            Complex64::new((i + j) as f64 / n as f64, (i as f64 - j as f64) / n as f64)
        });
        let x = hermitian_pd_solve(&m, &b).unwrap();
        let resid = fro_norm_c(&(&m.dot(&x) - &b).view());
        assert!(resid <= 1e-10 * fro_norm_c(&b.view()).max(1.0), "residual {resid}");
    }

    #[test]
    fn hermitian_solve_rejects_non_pd() {
        let m: ComplexMatrix = Array2::from_diag(&array![
            Complex64::new(-1.0, 0.0),
            Complex64::new(1.0, 0.0)
        ]);
        let b = Array2::from_elem((2, 1), Complex64::new(1.0, 0.0));
        assert!(matches!(hermitian_pd_solve(&m, &b), Err(Error::Numerical(_))));
    }

    #[test]
    fn derive_seed_spreads() {
        let a = derive_seed(42, 0);
        let b = derive_seed(42, 1);
        let c = derive_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(42, 0));
    }
}
