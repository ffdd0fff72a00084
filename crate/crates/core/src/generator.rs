//! Infinitesimal-generator extraction: the matrix logarithm of a fitted
//! operator, `L = V (ln Lambda / dt) V^+`, evaluated through the principal
//! branch. Applying the log-spectrum to the coordinate modes recovers the
//! continuous vector field that the discrete algorithm approximates:
//!
//! `v(x) = Re( (ln Lambda / dt) . phi(x) C )`
//!
//! Eigenvalues too small or too strongly damped to carry information are
//! zeroed: `|lambda| < 1e-12`, or `Re(ln lambda) < -2/dt`.

use ndarray::prelude::*;
use num_complex::Complex64;

use crate::dictionary::Dictionary;
use crate::edmd::KoopmanModel;
use crate::error::{Error, Result};
use crate::numerics::{pseudo_inverse_complex, DEFAULT_SVD_RTOL};

/// Cutoff below which an eigenvalue is treated as numerically zero.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

/// The generator spectrum and everything needed to evaluate the
/// reconstructed vector field.
#[derive(Debug, Clone)]
pub struct GeneratorModel {
    log_eigenvalues: Array1<Complex64>,
    eigenvectors: Array2<Complex64>,
    eigenvectors_pinv: Array2<Complex64>,
    modes: Array2<Complex64>,
    dictionary: Dictionary,
    dt: f64,
}

/// Extract the generator from a fitted model with `dt > 0`.
pub fn generator_matrix(model: &KoopmanModel) -> Result<GeneratorModel> {
    let dt = model.dt();
    if !(dt > 0.0) {
        return Err(Error::invalid(format!(
            "generator_matrix: model step size must be positive, got {dt}"
        )));
    }
    let cutoff = -2.0 / dt;
    let log_eigenvalues = model.eigenvalues().mapv(|lam| {
        // canonical +0 imaginary part so negative reals log to +i pi
        let lam = Complex64::new(lam.re, if lam.im == 0.0 { 0.0 } else { lam.im });
        if lam.norm() < EIGENVALUE_FLOOR {
            return Complex64::new(0.0, 0.0);
        }
        let l = lam.ln();
        if l.re < cutoff {
            Complex64::new(0.0, 0.0)
        } else {
            l / dt
        }
    });
    let eigenvectors = model.eigenvectors().clone();
    let eigenvectors_pinv = pseudo_inverse_complex(&eigenvectors, DEFAULT_SVD_RTOL)?;
    Ok(GeneratorModel {
        log_eigenvalues,
        eigenvectors,
        eigenvectors_pinv,
        modes: model.modes().clone(),
        dictionary: model.dictionary().clone(),
        dt,
    })
}

impl GeneratorModel {
    /// Filtered `ln(lambda)/dt`, aligned with the model's eigenvalue order.
    pub fn log_eigenvalues(&self) -> &Array1<Complex64> {
        &self.log_eigenvalues
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// The generator as a dense matrix `V diag(ln Lambda / dt) V^+`.
    pub fn matrix(&self) -> Array2<Complex64> {
        let mut vl = self.eigenvectors.clone();
        for (j, l) in self.log_eigenvalues.iter().enumerate() {
            vl.column_mut(j).mapv_inplace(|z| z * l);
        }
        vl.dot(&self.eigenvectors_pinv)
    }

    /// Approximate vector field at `x`: the generator applied to the
    /// coordinate functions.
    pub fn reconstruct_vector_field(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let dvals = self.dictionary.evaluate(x);
        let dc = dvals.mapv(|v| Complex64::new(v, 0.0));
        let d = self.modes.ncols();
        let mut phi_scaled = Array1::<Complex64>::zeros(self.eigenvectors.ncols());
        for (j, col) in self.eigenvectors.columns().into_iter().enumerate() {
            let phi_j: Complex64 = dc.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
            phi_scaled[j] = phi_j * self.log_eigenvalues[j];
        }
        Array1::from_shape_fn(d, |c| {
            phi_scaled
                .iter()
                .zip(self.modes.column(c).iter())
                .map(|(p, m)| p * m)
                .sum::<Complex64>()
                .re
        })
    }

    /// Export the generator spectrum as `generator_eigs.csv` (re, im).
    pub fn save_spectrum(&self, path: &std::path::Path) -> Result<()> {
        let rows: Vec<Vec<f64>> = self
            .log_eigenvalues
            .iter()
            .map(|z| vec![z.re, z.im])
            .collect();
        crate::ioformats::write_csv(path, &["re".to_string(), "im".to_string()], &rows)
    }
}
