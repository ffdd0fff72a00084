//! Finite-dimensional Koopman approximation from snapshot pairs.
//!
//! Given pairs `(x_i, y_i = F(x_i))` and a dictionary `D`, the observable
//! matrices are `G = D(X)` and `A = D(Y)`. The operator matrix solves the
//! least-squares problem `G K ~ A`:
//!
//! `K = (G^T G)^+ (G^T A)`
//!
//! An alternative "gram-quotient" transcription
//! `K = (G^T G)^+ (A^T A) / N_D^2` is retained behind [`FitMode`] for
//! fidelity comparisons; it does not solve the least-squares problem and is
//! not the default.
//!
//! Eigenfunction samples are `Phi(x) = D(x)^T V`; the modes `C` regress the
//! coordinate functions onto the eigenfunction samples, so states are
//! predicted as `x_m = Re(Phi(x_0) Lambda^m C)`.

use std::fmt;
use std::path::Path;

use ndarray::prelude::*;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::ioformats;
use crate::numerics::{
    eigendecompose, fro_norm, fro_norm_c, pseudo_inverse, pseudo_inverse_complex, DEFAULT_SVD_RTOL,
};
use crate::systems::SnapshotPairSet;

/// Which operator formula the fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Least-squares operator `K = (G^T G)^+ (G^T A)`.
    #[default]
    Standard,
    /// Literal normalized quotient `K = (G^T G)^+ (A^T A) / N_D^2`, kept
    /// for comparison experiments (CLI spelling: `paper`).
    #[serde(alias = "paper")]
    GramQuotient,
}

impl fmt::Display for FitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitMode::Standard => write!(f, "standard"),
            FitMode::GramQuotient => write!(f, "gram-quotient"),
        }
    }
}

impl std::str::FromStr for FitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(FitMode::Standard),
            "paper" | "gram-quotient" | "gram_quotient" => Ok(FitMode::GramQuotient),
            other => Err(Error::Config(format!(
                "unknown fit mode {other:?} (expected standard|paper)"
            ))),
        }
    }
}

/// Residuals recorded at fit time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `||G K - A||_F / ||A||_F` on the fit rows.
    pub lsq_residual: f64,
    /// `||Re(Phi C) - X||_F / ||X||_F`: how well the modes reconstruct the
    /// coordinate functions.
    pub recon_residual: f64,
    /// `||Im(Phi C)||_F / ||X||_F`: size of the discarded imaginary part.
    pub recon_imag_norm: f64,
    /// Mean one-step state error over the fit rows.
    pub mean_step_error_train: f64,
    /// Mean one-step state error over the held-out rows (last 10% of the
    /// pairs, excluded from the regression), if any were held out.
    pub mean_step_error_holdout: Option<f64>,
    /// `||K V - V Lambda||_F`.
    pub eig_residual: f64,
    pub n_fit: usize,
    pub n_holdout: usize,
}

/// A fitted Koopman operator: spectrum, eigenfunction coefficients, modes,
/// and the dictionary they live on.
#[derive(Debug, Clone)]
pub struct KoopmanModel {
    k: Option<Array2<f64>>,
    eigenvalues: Array1<Complex64>,
    eigenvectors: Array2<Complex64>,
    modes: Array2<Complex64>,
    dictionary: Dictionary,
    dt: f64,
    fit_mode: FitMode,
    system: String,
    diagnostics: FitDiagnostics,
}

fn complexify(m: &ArrayView2<f64>) -> Array2<Complex64> {
    m.mapv(|x| Complex64::new(x, 0.0))
}

/// Fit the operator on the first 90% of the pairs; the last 10% is held
/// out for the one-step residual report.
pub fn fit(pairs: &SnapshotPairSet, dictionary: Dictionary, fit_mode: FitMode) -> Result<KoopmanModel> {
    if dictionary.dim() != pairs.dim() {
        return Err(Error::Fit(format!(
            "dictionary dimension {} does not match data dimension {}",
            dictionary.dim(),
            pairs.dim()
        )));
    }
    let nd = dictionary.len();
    if nd == 0 {
        return Err(Error::Fit("empty dictionary".into()));
    }
    let n = pairs.len();
    let n_holdout = n / 10;
    let n_fit = n - n_holdout;

    let x_fit = pairs.x.slice(s![..n_fit, ..]);
    let y_fit = pairs.y.slice(s![..n_fit, ..]);
    let g = dictionary.evaluate_matrix(x_fit);
    let a = dictionary.evaluate_matrix(y_fit);
    for j in 0..nd {
        if g.column(j).iter().all(|&v| v == 0.0) {
            return Err(Error::Fit(format!(
                "degenerate dictionary: observable {j} vanishes on all data"
            )));
        }
    }

    let gram = g.t().dot(&g);
    let gram_pinv = pseudo_inverse(&gram, DEFAULT_SVD_RTOL)?;
    let k = match fit_mode {
        FitMode::Standard => gram_pinv.dot(&g.t().dot(&a)),
        FitMode::GramQuotient => {
            let scale = 1.0 / (nd as f64 * nd as f64);
            gram_pinv.dot(&a.t().dot(&a)) * scale
        }
    };

    let (eigenvalues, eigenvectors) = eigendecompose(&k)?;
    let kc = complexify(&k.view());
    let kv = kc.dot(&eigenvectors);
    let mut vl = eigenvectors.clone();
    for (j, lam) in eigenvalues.iter().enumerate() {
        vl.column_mut(j).mapv_inplace(|z| z * lam);
    }
    let eig_residual = fro_norm_c(&(&kv - &vl).view());
    let k_norm = fro_norm(&k.view());
    if eig_residual > 1e-6 * k_norm.max(1.0) {
        return Err(Error::numerical(format!(
            "eigendecomposition residual {eig_residual:.3e} exceeds 1e-6 * ||K||"
        )));
    }

    // eigenfunction samples and Koopman modes for the coordinate functions
    let phi = complexify(&g.view()).dot(&eigenvectors);
    let x_c = complexify(&x_fit);
    let modes = pseudo_inverse_complex(&phi, DEFAULT_SVD_RTOL)?.dot(&x_c);

    let x_norm = fro_norm(&x_fit);
    let recon = phi.dot(&modes);
    let recon_err = {
        let re = recon.mapv(|z| z.re);
        fro_norm(&(&re - &x_fit).view()) / x_norm.max(1e-300)
    };
    let imag_norm = {
        let im = recon.mapv(|z| z.im);
        fro_norm(&im.view()) / x_norm.max(1e-300)
    };

    let lsq_residual = fro_norm(&(&g.dot(&k) - &a).view()) / fro_norm(&a.view()).max(1e-300);

    // one-step state error: xhat_1 = Re(Phi diag(Lambda) C)
    let step_error = |phi_rows: &Array2<Complex64>, truth: &ArrayView2<f64>| -> f64 {
        let mut scaled = phi_rows.clone();
        for (j, lam) in eigenvalues.iter().enumerate() {
            scaled.column_mut(j).mapv_inplace(|z| z * lam);
        }
        let pred = scaled.dot(&modes).mapv(|z| z.re);
        let diff = &pred - truth;
        let total: f64 = diff
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum();
        total / truth.nrows() as f64
    };
    let mean_step_error_train = step_error(&phi, &y_fit);
    let mean_step_error_holdout = if n_holdout > 0 {
        let x_h = pairs.x.slice(s![n_fit.., ..]);
        let y_h = pairs.y.slice(s![n_fit.., ..]);
        let g_h = dictionary.evaluate_matrix(x_h);
        let phi_h = complexify(&g_h.view()).dot(&eigenvectors);
        Some(step_error(&phi_h, &y_h))
    } else {
        None
    };

    Ok(KoopmanModel {
        k: Some(k),
        eigenvalues,
        eigenvectors,
        modes,
        dictionary,
        dt: pairs.step_size,
        fit_mode,
        system: pairs.system.clone(),
        diagnostics: FitDiagnostics {
            lsq_residual,
            recon_residual: recon_err,
            recon_imag_norm: imag_norm,
            mean_step_error_train,
            mean_step_error_holdout,
            eig_residual,
            n_fit,
            n_holdout,
        },
    })
}

impl KoopmanModel {
    /// Eigenvalues, sorted by descending modulus.
    pub fn eigenvalues(&self) -> &Array1<Complex64> {
        &self.eigenvalues
    }

    /// Right eigenvectors of the operator matrix, one per column.
    pub fn eigenvectors(&self) -> &Array2<Complex64> {
        &self.eigenvectors
    }

    /// Koopman modes of the coordinate functions (N_D x d).
    pub fn modes(&self) -> &Array2<Complex64> {
        &self.modes
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }

    /// Operator matrix; absent on models loaded from disk.
    pub fn matrix(&self) -> Option<&Array2<f64>> {
        self.k.as_ref()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn fit_mode(&self) -> FitMode {
        self.fit_mode
    }

    pub fn system(&self) -> &str {
        &self.system
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    pub fn state_dim(&self) -> usize {
        self.modes.ncols()
    }

    /// Row of eigenfunction values `phi(x) = D(x)^T V`.
    pub fn eigenfunction_eval(&self, x: ArrayView1<f64>) -> Array1<Complex64> {
        let d = self.dictionary.evaluate(x);
        let dc = d.mapv(|v| Complex64::new(v, 0.0));
        // row vector times V
        let mut out = Array1::<Complex64>::zeros(self.eigenvectors.ncols());
        for (j, col) in self.eigenvectors.columns().into_iter().enumerate() {
            out[j] = dc.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Predicted trajectory `[x_0, ..., x_n]` where
    /// `x_m = Re(phi(x0) Lambda^m C)`. The first entry is the model's
    /// reconstruction of `x0`, not `x0` itself.
    pub fn predict(&self, x0: ArrayView1<f64>, n: usize) -> Vec<Array1<f64>> {
        let mut phi = self.eigenfunction_eval(x0);
        let mut out = Vec::with_capacity(n + 1);
        for _ in 0..=n {
            let state = Array1::from_shape_fn(self.state_dim(), |c| {
                phi.iter()
                    .zip(self.modes.column(c).iter())
                    .map(|(p, m)| p * m)
                    .sum::<Complex64>()
                    .re
            });
            out.push(state);
            for (p, lam) in phi.iter_mut().zip(self.eigenvalues.iter()) {
                *p *= lam;
            }
        }
        out
    }

    /// Spectral radius of the fitted operator.
    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Persist to a directory: `eigenvalues.csv`, `eigvecs.csv`,
    /// `modes.csv`, `dictionary.json` (+ `centers.csv`), `meta.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let eig_rows: Vec<Vec<f64>> = self.eigenvalues.iter().map(|z| vec![z.re, z.im]).collect();
        ioformats::write_csv(
            &dir.join("eigenvalues.csv"),
            &["re".to_string(), "im".to_string()],
            &eig_rows,
        )?;
        let complex_header = |cols: usize, stem: &str| -> Vec<String> {
            (0..cols)
                .flat_map(|c| [format!("re_{stem}{c}"), format!("im_{stem}{c}")])
                .collect()
        };
        let flatten = |m: &Array2<Complex64>| -> Vec<Vec<f64>> {
            m.rows()
                .into_iter()
                .map(|r| r.iter().flat_map(|z| [z.re, z.im]).collect())
                .collect()
        };
        ioformats::write_csv(
            &dir.join("eigvecs.csv"),
            &complex_header(self.eigenvectors.ncols(), "v"),
            &flatten(&self.eigenvectors),
        )?;
        ioformats::write_csv(
            &dir.join("modes.csv"),
            &complex_header(self.modes.ncols(), "c"),
            &flatten(&self.modes),
        )?;
        self.dictionary.save(dir)?;
        let meta = serde_json::json!({
            "fit_mode": self.fit_mode.to_string(),
            "dt": self.dt,
            "system": self.system,
            "n_observables": self.dictionary.len(),
            "state_dim": self.state_dim(),
            "diagnostics": self.diagnostics,
        });
        std::fs::write(
            dir.join("meta.json"),
            serde_json::to_string_pretty(&meta)? + "\n",
        )?;
        Ok(())
    }

    /// Load a persisted model. The operator matrix itself is not stored, so
    /// [`KoopmanModel::matrix`] returns `None` on loaded models; prediction
    /// and eigenfunction evaluation are fully functional.
    pub fn load(dir: &Path) -> Result<Self> {
        let dictionary = Dictionary::load(dir)?;
        let (_, eig) = ioformats::read_matrix_csv(&dir.join("eigenvalues.csv"))?;
        let eigenvalues =
            Array1::from_shape_fn(eig.nrows(), |i| Complex64::new(eig[(i, 0)], eig[(i, 1)]));
        let unflatten = |m: &Array2<f64>| -> Array2<Complex64> {
            Array2::from_shape_fn((m.nrows(), m.ncols() / 2), |(i, j)| {
                Complex64::new(m[(i, 2 * j)], m[(i, 2 * j + 1)])
            })
        };
        let (_, ev) = ioformats::read_matrix_csv(&dir.join("eigvecs.csv"))?;
        let eigenvectors = unflatten(&ev);
        let (_, md) = ioformats::read_matrix_csv(&dir.join("modes.csv"))?;
        let modes = unflatten(&md);
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)?;
        let dt = meta["dt"].as_f64().unwrap_or(1.0);
        let fit_mode: FitMode = meta["fit_mode"]
            .as_str()
            .unwrap_or("standard")
            .parse()
            .unwrap_or_default();
        let system = meta["system"].as_str().unwrap_or("").to_string();
        let diagnostics: FitDiagnostics = serde_json::from_value(meta["diagnostics"].clone())?;
        Ok(KoopmanModel {
            k: None,
            eigenvalues,
            eigenvectors,
            modes,
            dictionary,
            dt,
            fit_mode,
            system,
            diagnostics,
        })
    }
}
