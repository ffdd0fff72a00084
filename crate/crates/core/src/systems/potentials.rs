//! Objective functions driving the optimization systems. Each potential
//! carries its analytic gradient; a finite-difference Hessian is provided
//! as a fallback for Newton steps where no closed form is implemented.

use ndarray::prelude::*;
use ndarray_linalg::QR;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A differentiable scalar objective on `R^dim`.
pub trait Potential: Sync + Send {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn value(&self, x: ArrayView1<f64>) -> f64;
    /// Analytic gradient. Must match central finite differences of
    /// [`Potential::value`].
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64>;
    /// Hessian; the default is a central difference of the gradient.
    fn hessian(&self, x: ArrayView1<f64>) -> Array2<f64> {
        let d = self.dim();
        let mut h = Array2::<f64>::zeros((d, d));
        let step = 1e-6;
        let mut xp = x.to_owned();
        for j in 0..d {
            xp[j] = x[j] + step;
            let gp = self.gradient(xp.view());
            xp[j] = x[j] - step;
            let gm = self.gradient(xp.view());
            xp[j] = x[j];
            let col = (&gp - &gm) / (2.0 * step);
            h.column_mut(j).assign(&col);
        }
        // symmetrize
        let ht = h.t().to_owned();
        (h + ht) * 0.5
    }
}

/// f(x1, x2) = (x1^2 + x2 - 11)^2 + (x1 + x2^2 - 7)^2, the standard
/// four-minimum optimization test function.
#[derive(Debug, Clone, Copy, Default)]
pub struct Himmelblau;

impl Potential for Himmelblau {
    fn name(&self) -> &str {
        "himmelblau"
    }
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let (a, b) = (x[0] * x[0] + x[1] - 11.0, x[0] + x[1] * x[1] - 7.0);
        a * a + b * b
    }
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let (a, b) = (x[0] * x[0] + x[1] - 11.0, x[0] + x[1] * x[1] - 7.0);
        array![4.0 * x[0] * a + 2.0 * b, 2.0 * a + 4.0 * x[1] * b]
    }
    fn hessian(&self, x: ArrayView1<f64>) -> Array2<f64> {
        let fxx = 12.0 * x[0] * x[0] + 4.0 * x[1] - 42.0;
        let fyy = 4.0 * x[0] + 12.0 * x[1] * x[1] - 26.0;
        let fxy = 4.0 * (x[0] + x[1]);
        array![[fxx, fxy], [fxy, fyy]]
    }
}

impl Himmelblau {
    /// The four local minima, refined by Newton iteration from coarse
    /// starting guesses; used as reference attractors by basin oracles.
    pub fn minima() -> [Array1<f64>; 4] {
        let seeds = [[3.0, 2.0], [-2.8, 3.1], [-3.8, -3.3], [3.6, -1.8]];
        seeds.map(|s| {
            let mut x = array![s[0], s[1]];
            for _ in 0..60 {
                let g = Himmelblau.gradient(x.view());
                let h = Himmelblau.hessian(x.view());
                let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
                let dx = array![
                    (h[(1, 1)] * g[0] - h[(0, 1)] * g[1]) / det,
                    (h[(0, 0)] * g[1] - h[(1, 0)] * g[0]) / det
                ];
                x = &x - &dx;
            }
            x
        })
    }
}

/// f(x1, x2) = x1^4 - x1^2 + x1/4 + x2^2: two minima separated by a saddle,
/// used for the partial-domain window scans.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleWellQuartic;

impl Potential for DoubleWellQuartic {
    fn name(&self) -> &str {
        "double-well-quartic"
    }
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        x[0].powi(4) - x[0] * x[0] + x[0] / 4.0 + x[1] * x[1]
    }
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        array![4.0 * x[0].powi(3) - 2.0 * x[0] + 0.25, 2.0 * x[1]]
    }
    fn hessian(&self, x: ArrayView1<f64>) -> Array2<f64> {
        array![[12.0 * x[0] * x[0] - 2.0, 0.0], [0.0, 2.0]]
    }
}

impl DoubleWellQuartic {
    /// x-coordinates of (left minimum, saddle, right minimum) of the
    /// one-dimensional quartic section, refined by bisection on f'.
    pub fn critical_xs() -> (f64, f64, f64) {
        let dfdx = |x: f64| 4.0 * x.powi(3) - 2.0 * x + 0.25;
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if dfdx(lo) * dfdx(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        };
        (bisect(-1.0, -0.3), bisect(0.0, 0.3), bisect(0.3, 1.0))
    }
}

const MB_A: [f64; 4] = [-200.0, -100.0, -170.0, 15.0];
const MB_SMALL_A: [f64; 4] = [-1.0, -1.0, -6.5, 0.7];
const MB_B: [f64; 4] = [0.0, 0.0, 11.0, 0.6];
const MB_C: [f64; 4] = [-10.0, -10.0, -6.5, 0.7];
const MB_X0: [f64; 4] = [1.0, 0.0, -0.5, -1.0];
const MB_Y0: [f64; 4] = [0.0, 0.5, 1.5, 1.0];

fn mb_value(x: f64, y: f64) -> f64 {
    (0..4)
        .map(|k| {
            let dx = x - MB_X0[k];
            let dy = y - MB_Y0[k];
            MB_A[k] * (MB_SMALL_A[k] * dx * dx + MB_B[k] * dx * dy + MB_C[k] * dy * dy).exp()
        })
        .sum()
}

fn mb_gradient(x: f64, y: f64) -> (f64, f64) {
    let mut gx = 0.0;
    let mut gy = 0.0;
    for k in 0..4 {
        let dx = x - MB_X0[k];
        let dy = y - MB_Y0[k];
        let e = MB_A[k] * (MB_SMALL_A[k] * dx * dx + MB_B[k] * dx * dy + MB_C[k] * dy * dy).exp();
        gx += e * (2.0 * MB_SMALL_A[k] * dx + MB_B[k] * dy);
        gy += e * (MB_B[k] * dx + 2.0 * MB_C[k] * dy);
    }
    (gx, gy)
}

/// The four-term exponential surface with three minima and two saddles,
/// a classic stiff test landscape.
#[derive(Debug, Clone, Copy, Default)]
pub struct MuellerBrown;

impl Potential for MuellerBrown {
    fn name(&self) -> &str {
        "mueller-brown"
    }
    fn dim(&self) -> usize {
        2
    }
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        mb_value(x[0], x[1])
    }
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let (gx, gy) = mb_gradient(x[0], x[1]);
        array![gx, gy]
    }
}

/// The 2-d surface embedded in `R^dim` through a seeded random orthogonal
/// matrix U: the cost is `V([Ux]_1, [Ux]_2)` plus a unit quadratic
/// confinement on the remaining `dim - 2` rotated coordinates, so gradient
/// descent contracts the ambient space onto a two-dimensional manifold
/// whose orientation is unknown to the observer.
#[derive(Debug, Clone)]
pub struct EmbeddedMuellerBrown {
    u: Array2<f64>,
    dim: usize,
    name: String,
}

impl EmbeddedMuellerBrown {
    /// Build the embedding for a given ambient dimension (>= 3) and U seed.
    pub fn new(dim: usize, u_seed: u64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::invalid("EmbeddedMuellerBrown: dim must be >= 3"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(u_seed);
        let g = Array2::from_shape_fn((dim, dim), |_| rng.sample::<f64, _>(StandardNormal));
        let (mut q, r) = g.qr()?;
        // canonical sign: positive diagonal of R
        for j in 0..dim {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).mapv_inplace(|v| -v);
            }
        }
        // rows of U rotate x into the hidden frame
        let u = q.reversed_axes().as_standard_layout().to_owned();
        Ok(EmbeddedMuellerBrown {
            u,
            dim,
            name: format!("embedded-mueller-brown-{dim}d"),
        })
    }

    /// The hidden rotation (rows map ambient coordinates to the frame whose
    /// first two axes carry the surface).
    pub fn rotation(&self) -> &Array2<f64> {
        &self.u
    }
}

impl Potential for EmbeddedMuellerBrown {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let u = self.u.dot(&x);
        let transverse: f64 = u.iter().skip(2).map(|v| v * v).sum();
        mb_value(u[0], u[1]) + transverse
    }
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let u = self.u.dot(&x);
        let (gx, gy) = mb_gradient(u[0], u[1]);
        let mut gu = &u * 2.0;
        gu[0] = gx;
        gu[1] = gy;
        self.u.t().dot(&gu)
    }
}

/// f(x) = 0.5 ||x||^2.
#[derive(Debug, Clone, Copy)]
pub struct IsotropicQuadratic {
    pub dim: usize,
}

impl Potential for IsotropicQuadratic {
    fn name(&self) -> &str {
        "isotropic-quadratic"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        x.to_owned()
    }
    fn hessian(&self, _x: ArrayView1<f64>) -> Array2<f64> {
        Array2::eye(self.dim)
    }
}

/// f(x) = 0.5 x^T A x for a symmetric matrix A.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub a: Array2<f64>,
}

impl Potential for Quadratic {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn value(&self, x: ArrayView1<f64>) -> f64 {
        0.5 * x.dot(&self.a.dot(&x))
    }
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.a.dot(&x)
    }
    fn hessian(&self, _x: ArrayView1<f64>) -> Array2<f64> {
        self.a.clone()
    }
}
