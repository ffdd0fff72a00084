//! Iterative algorithms as steppable discrete dynamical systems.
//!
//! Each system is an immutable map `x -> step(x)` on a fixed-dimension
//! state space. Optimization algorithms are driven by a [`Potential`];
//! root finding acts on complex polynomials stored as real 2-vectors.

mod potentials;
mod sampling;

pub use potentials::{
    DoubleWellQuartic, EmbeddedMuellerBrown, Himmelblau, IsotropicQuadratic, MuellerBrown,
    Potential, Quadratic,
};
pub use sampling::{sample_pairs, InitialSampler, SnapshotPairSet};

use ndarray::prelude::*;
use ndarray_linalg::Solve;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A deterministic one-step map on `R^state_dim`.
pub trait DiscreteSystem: Sync + Send {
    fn name(&self) -> &str;
    fn state_dim(&self) -> usize;
    /// The step-size constant of the scheme (1.0 for parameter-free maps
    /// such as Newton-Raphson).
    fn step_size(&self) -> f64;
    fn step(&self, x: ArrayView1<f64>) -> Result<Array1<f64>>;
}

fn check_dim(sys: &dyn DiscreteSystem, x: &ArrayView1<f64>) -> Result<()> {
    if x.len() != sys.state_dim() {
        return Err(Error::invalid(format!(
            "{}: state has dim {}, expected {}",
            sys.name(),
            x.len(),
            sys.state_dim()
        )));
    }
    Ok(())
}

/// Forward Euler applied to `dx/dt = -a x`: the linear contraction
/// `x -> (1 - a dt) x`.
#[derive(Debug, Clone, Copy)]
pub struct EulerLinear {
    pub a: f64,
    pub dt: f64,
}

impl DiscreteSystem for EulerLinear {
    fn name(&self) -> &str {
        "euler-linear"
    }
    fn state_dim(&self) -> usize {
        1
    }
    fn step_size(&self) -> f64 {
        self.dt
    }
    fn step(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self, &x)?;
        Ok(array![(1.0 - self.a * self.dt) * x[0]])
    }
}

/// Gradient descent `x -> x - h grad f(x)`.
#[derive(Debug, Clone)]
pub struct GradientDescent<P: Potential> {
    pub potential: P,
    pub h: f64,
    name: String,
}

impl<P: Potential> GradientDescent<P> {
    pub fn new(potential: P, h: f64) -> Self {
        let name = format!("gd-{}", potential.name());
        GradientDescent { potential, h, name }
    }
}

impl<P: Potential> DiscreteSystem for GradientDescent<P> {
    fn name(&self) -> &str {
        &self.name
    }
    fn state_dim(&self) -> usize {
        self.potential.dim()
    }
    fn step_size(&self) -> f64 {
        self.h
    }
    fn step(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self, &x)?;
        let g = self.potential.gradient(x);
        Ok(&x - &(&g * self.h))
    }
}

/// Newton-Raphson optimization `x -> x - (H_x f)^{-1} grad f(x)`.
#[derive(Debug, Clone)]
pub struct NewtonOptimization<P: Potential> {
    pub potential: P,
    name: String,
}

impl<P: Potential> NewtonOptimization<P> {
    pub fn new(potential: P) -> Self {
        let name = format!("newton-opt-{}", potential.name());
        NewtonOptimization { potential, name }
    }
}

impl<P: Potential> DiscreteSystem for NewtonOptimization<P> {
    fn name(&self) -> &str {
        &self.name
    }
    fn state_dim(&self) -> usize {
        self.potential.dim()
    }
    fn step_size(&self) -> f64 {
        1.0
    }
    fn step(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self, &x)?;
        let g = self.potential.gradient(x);
        let h = self.potential.hessian(x);
        let dx = h.solve(&g).map_err(|_| Error::Singular {
            state: x.to_vec(),
            reason: "singular Hessian".into(),
        })?;
        if !dx.iter().all(|v| v.is_finite()) {
            return Err(Error::Singular {
                state: x.to_vec(),
                reason: "non-finite Newton step".into(),
            });
        }
        Ok(&x - &dx)
    }
}

/// Newton-Raphson root finding for a complex polynomial, on the state
/// (Re z, Im z): `z -> z - p(z) / p'(z)`.
#[derive(Debug, Clone)]
pub struct PolynomialNewtonRoot {
    /// Coefficients in ascending degree order.
    pub coeffs: Vec<Complex64>,
}

impl PolynomialNewtonRoot {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        PolynomialNewtonRoot { coeffs }
    }

    fn eval(&self, z: Complex64) -> (Complex64, Complex64) {
        // Horner for p and p'
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }
}

impl DiscreteSystem for PolynomialNewtonRoot {
    fn name(&self) -> &str {
        "newton-root"
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn step_size(&self) -> f64 {
        1.0
    }
    fn step(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self, &x)?;
        let z = Complex64::new(x[0], x[1]);
        let (p, dp) = self.eval(z);
        if dp.norm() == 0.0 {
            return Err(Error::Singular {
                state: x.to_vec(),
                reason: "zero derivative".into(),
            });
        }
        let zn = z - p / dp;
        if !zn.re.is_finite() || !zn.im.is_finite() {
            return Err(Error::Singular {
                state: x.to_vec(),
                reason: "non-finite Newton step".into(),
            });
        }
        Ok(array![zn.re, zn.im])
    }
}

/// Accelerated gradient descent on the augmented state `(x, v, t)` with
/// `v = (x_n - x_{n-1}) / h` and `t = n h`.
///
/// One step advances the classic two-line scheme
/// `x_{n+1} = y_n - s grad f(y_n)`,
/// `y_{n+1} = x_{n+1} + n/(n+3) (x_{n+1} - x_n)`
/// with gradient step `s = h^2`, so that `t` is the time variable of the
/// second-order limiting flow `x'' + (3/t) x' + grad f(x) = 0` and `v`
/// approximates `x'` on that time axis. `t` advances by `h` per step.
#[derive(Debug, Clone)]
pub struct Nesterov<P: Potential> {
    pub potential: P,
    /// Time increment per iteration (the EDMD sampling interval). The
    /// gradient step of the underlying scheme is `h^2`.
    pub h: f64,
    name: String,
}

impl<P: Potential> Nesterov<P> {
    pub fn new(potential: P, h: f64) -> Self {
        let name = format!("nesterov-{}", potential.name());
        Nesterov { potential, h, name }
    }

    /// Dimension of the underlying optimization variable.
    pub fn base_dim(&self) -> usize {
        self.potential.dim()
    }

    /// Augmented state for iteration counter `n = 0` at position `x0`
    /// (at rest: `v = 0`, `t = 0`).
    pub fn initial_state(&self, x0: ArrayView1<f64>) -> Array1<f64> {
        let d = self.potential.dim();
        let mut z = Array1::<f64>::zeros(2 * d + 1);
        z.slice_mut(s![..d]).assign(&x0);
        z
    }
}

impl<P: Potential> DiscreteSystem for Nesterov<P> {
    fn name(&self) -> &str {
        &self.name
    }
    fn state_dim(&self) -> usize {
        2 * self.potential.dim() + 1
    }
    fn step_size(&self) -> f64 {
        self.h
    }
    fn step(&self, z: ArrayView1<f64>) -> Result<Array1<f64>> {
        check_dim(self, &z)?;
        let d = self.potential.dim();
        let x = z.slice(s![..d]);
        let v = z.slice(s![d..2 * d]);
        let t = z[2 * d];
        let n = t / self.h;
        // momentum factor (n-1)/(n+2): the "n/(n+3)" weight of the previous
        // iteration, which produced the current x from the stored velocity
        let mu = (n - 1.0) / (n + 2.0);
        let y = &x + &(&v * (mu * self.h));
        let g = self.potential.gradient(y.view());
        let x_next = &y - &(&g * (self.h * self.h));
        let v_next = (&x_next - &x) / self.h;
        let mut out = Array1::<f64>::zeros(2 * d + 1);
        out.slice_mut(s![..d]).assign(&x_next);
        out.slice_mut(s![d..2 * d]).assign(&v_next);
        out[2 * d] = t + self.h;
        Ok(out)
    }
}
