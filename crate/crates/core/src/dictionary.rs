//! Observable dictionaries: the finite function basis the operator is
//! projected onto. The workhorse is a thin-plate radial basis set with
//! data-adapted centers, optionally extended with the coordinate functions
//! and the constant function. A monomial dictionary is available for
//! one-dimensional linear maps where the spectrum is known in closed form.
//!
//! Observable order is fixed as [rbf_1..rbf_n, x_1..x_d, 1] so mode
//! indices stay stable across runs.

use std::path::Path;

use ndarray::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ioformats;
use crate::numerics::kmeans;
use crate::par;

/// Default smoothing constant of the thin-plate log term.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Thin-plate radial basis function `||x - y||^2 ln(||x - y|| + delta)`
/// centered at `center`.
pub fn thin_plate_eval(center: ArrayView1<f64>, delta: f64, y: ArrayView1<f64>) -> f64 {
    let r2: f64 = center
        .iter()
        .zip(y.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let r = r2.sqrt();
    r2 * (r + delta).ln()
}

#[derive(Debug, Clone)]
enum Kind {
    ThinPlate {
        centers: Array2<f64>,
        delta: f64,
        seed: u64,
        include_coords: bool,
        include_const: bool,
    },
    Monomial {
        /// Exponent tuples, graded order, constant first.
        exponents: Vec<Vec<u32>>,
    },
}

/// An ordered, immutable set of observables evaluable at any state.
#[derive(Debug, Clone)]
pub struct Dictionary {
    dim: usize,
    kind: Kind,
}

/// Serializable description of a dictionary (centers are persisted
/// separately as CSV).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionaryConfig {
    ThinPlate {
        dim: usize,
        n_rbf: usize,
        delta: f64,
        seed: u64,
        include_coords: bool,
        include_const: bool,
    },
    Monomial {
        dim: usize,
        degree: u32,
    },
}

fn monomial_exponents(dim: usize, degree: u32) -> Vec<Vec<u32>> {
    // graded order: total degree ascending, first coordinate's power
    // descending within a grade
    fn fill(dim: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim - 1 {
            let mut e = prefix.clone();
            e.push(remaining);
            out.push(e);
            return;
        }
        for v in (0..=remaining).rev() {
            prefix.push(v);
            fill(dim, remaining - v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=degree {
        fill(dim, total, &mut Vec::new(), &mut out);
    }
    out
}

impl Dictionary {
    /// Thin-plate dictionary with explicit centers.
    pub fn thin_plate_from_centers(
        centers: Array2<f64>,
        delta: f64,
        seed: u64,
        include_coords: bool,
        include_const: bool,
    ) -> Result<Self> {
        if delta <= 0.0 {
            return Err(Error::invalid("Dictionary: delta must be > 0"));
        }
        if centers.ncols() == 0 {
            return Err(Error::invalid("Dictionary: zero-dimensional centers"));
        }
        Ok(Dictionary {
            dim: centers.ncols(),
            kind: Kind::ThinPlate {
                centers,
                delta,
                seed,
                include_coords,
                include_const,
            },
        })
    }

    /// Monomials of total degree `<= degree` (the constant is the first
    /// observable, the coordinates follow as the degree-1 grade).
    pub fn monomial(dim: usize, degree: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("Dictionary: dim must be >= 1"));
        }
        Ok(Dictionary {
            dim,
            kind: Kind::Monomial {
                exponents: monomial_exponents(dim, degree),
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of observables N_D.
    pub fn len(&self) -> usize {
        match &self.kind {
            Kind::ThinPlate {
                centers,
                include_coords,
                include_const,
                ..
            } => {
                centers.nrows()
                    + if *include_coords { self.dim } else { 0 }
                    + if *include_const { 1 } else { 0 }
            }
            Kind::Monomial { exponents } => exponents.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn centers(&self) -> Option<ArrayView2<f64>> {
        match &self.kind {
            Kind::ThinPlate { centers, .. } => Some(centers.view()),
            Kind::Monomial { .. } => None,
        }
    }

    /// Column indices of the coordinate functions inside the observable
    /// vector, if the dictionary contains them.
    pub fn coordinate_indices(&self) -> Option<Vec<usize>> {
        match &self.kind {
            Kind::ThinPlate {
                centers,
                include_coords,
                ..
            } => include_coords.then(|| {
                let base = centers.nrows();
                (base..base + self.dim).collect()
            }),
            Kind::Monomial { exponents } => {
                let mut idx = vec![usize::MAX; self.dim];
                for (j, e) in exponents.iter().enumerate() {
                    if e.iter().sum::<u32>() == 1 {
                        let coord = e.iter().position(|&v| v == 1).unwrap();
                        idx[coord] = j;
                    }
                }
                idx.iter().all(|&v| v != usize::MAX).then_some(idx)
            }
        }
    }

    pub fn eval_into(&self, x: ArrayView1<f64>, out: &mut ArrayViewMut1<f64>) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.len());
        match &self.kind {
            Kind::ThinPlate {
                centers,
                delta,
                include_coords,
                include_const,
                ..
            } => {
                let n_rbf = centers.nrows();
                for (j, c) in centers.rows().into_iter().enumerate() {
                    out[j] = thin_plate_eval(c, *delta, x);
                }
                let mut k = n_rbf;
                if *include_coords {
                    for v in x.iter() {
                        out[k] = *v;
                        k += 1;
                    }
                }
                if *include_const {
                    out[k] = 1.0;
                }
            }
            Kind::Monomial { exponents } => {
                for (j, e) in exponents.iter().enumerate() {
                    let mut v = 1.0;
                    for (xi, &p) in x.iter().zip(e.iter()) {
                        v *= xi.powi(p as i32);
                    }
                    out[j] = v;
                }
            }
        }
    }

    pub fn evaluate(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::<f64>::zeros(self.len());
        self.eval_into(x, &mut out.view_mut());
        out
    }

    /// Observable matrix of shape (n_points, N_D); row i is the dictionary
    /// evaluated at point i.
    pub fn evaluate_matrix(&self, points: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((points.nrows(), self.len()));
        par::fill_rows(&mut out, |i, row| {
            self.eval_into(points.row(i), row);
        });
        out
    }

    pub fn config(&self) -> DictionaryConfig {
        match &self.kind {
            Kind::ThinPlate {
                centers,
                delta,
                seed,
                include_coords,
                include_const,
            } => DictionaryConfig::ThinPlate {
                dim: self.dim,
                n_rbf: centers.nrows(),
                delta: *delta,
                seed: *seed,
                include_coords: *include_coords,
                include_const: *include_const,
            },
            Kind::Monomial { exponents } => DictionaryConfig::Monomial {
                dim: self.dim,
                degree: exponents
                    .iter()
                    .map(|e| e.iter().sum::<u32>())
                    .max()
                    .unwrap_or(0),
            },
        }
    }

    /// Persist as `dictionary.json` (+ `centers.csv` for RBF dictionaries).
    pub fn save(&self, dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.config())?;
        std::fs::write(dir.join("dictionary.json"), json + "\n")?;
        if let Some(centers) = self.centers() {
            let header: Vec<String> = (0..self.dim).map(|i| format!("x_{i}")).collect();
            ioformats::write_matrix_csv(&dir.join("centers.csv"), &header, &centers)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let cfg: DictionaryConfig =
            serde_json::from_str(&std::fs::read_to_string(dir.join("dictionary.json"))?)?;
        match cfg {
            DictionaryConfig::ThinPlate {
                dim,
                n_rbf,
                delta,
                seed,
                include_coords,
                include_const,
            } => {
                let (_, centers) = ioformats::read_matrix_csv(&dir.join("centers.csv"))?;
                if centers.dim() != (n_rbf, dim) {
                    return Err(Error::invalid(format!(
                        "centers.csv shape {:?} does not match dictionary.json ({n_rbf}, {dim})",
                        centers.dim()
                    )));
                }
                Dictionary::thin_plate_from_centers(
                    centers,
                    delta,
                    seed,
                    include_coords,
                    include_const,
                )
            }
            DictionaryConfig::Monomial { dim, degree } => Dictionary::monomial(dim, degree),
        }
    }
}

/// Cluster the data into `n_rbf` groups and center one thin-plate basis
/// function on each cluster center.
pub fn build_dictionary(
    data: ArrayView2<f64>,
    n_rbf: usize,
    delta: f64,
    seed: u64,
    include_coords: bool,
    include_const: bool,
) -> Result<Dictionary> {
    let clustering = kmeans(data, n_rbf, seed)?;
    Dictionary::thin_plate_from_centers(
        clustering.centers,
        delta,
        seed,
        include_coords,
        include_const,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn thin_plate_zero_at_center() {
        let c = array![1.0, -2.0];
        assert_eq!(thin_plate_eval(c.view(), 1e-3, c.view()), 0.0);
    }

    #[test]
    fn thin_plate_unit_distance() {
        let c = array![0.0];
        let y = array![1.0];
        // 1^2 * ln(1 + 1e-3)
        assert_relative_eq!(
            thin_plate_eval(c.view(), 1e-3, y.view()),
            9.995003330835332e-4,
            epsilon = 1e-18
        );
    }

    #[test]
    fn thin_plate_log_term_one() {
        // r + delta = e makes the log factor exactly 1
        let delta = 1e-3;
        let r = std::f64::consts::E - delta;
        let c = array![0.0];
        let y = array![r];
        assert_relative_eq!(
            thin_plate_eval(c.view(), delta, y.view()),
            r * r,
            max_relative = 1e-14
        );
        assert_relative_eq!(r * r, 7.3836, max_relative = 1e-4);
    }

    #[test]
    fn rigid_motion_leaves_rbf_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let theta: f64 = 0.7;
        let rot = array![[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]];
        let shift = array![2.5, -1.0];
        for _ in 0..50 {
            let c = array![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let y = array![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let cm = rot.dot(&c) + &shift;
            let ym = rot.dot(&y) + &shift;
            assert_relative_eq!(
                thin_plate_eval(c.view(), 1e-3, y.view()),
                thin_plate_eval(cm.view(), 1e-3, ym.view()),
                max_relative = 1e-9,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn const_only_dictionary() {
        let centers = Array2::<f64>::zeros((0, 2));
        let d = Dictionary::thin_plate_from_centers(centers, 1e-3, 0, false, true).unwrap();
        assert_eq!(d.len(), 1);
        let pts = array![[0.1, 0.2], [3.0, -1.0], [5.0, 5.0]];
        let g = d.evaluate_matrix(pts.view());
        assert_eq!(g.dim(), (3, 1));
        assert!(g.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn coords_only_dictionary_is_identity_on_basis() {
        let centers = Array2::<f64>::zeros((0, 2));
        let d = Dictionary::thin_plate_from_centers(centers, 1e-3, 0, true, false).unwrap();
        assert_eq!(d.len(), 2);
        let pts = array![[1.0, 0.0], [0.0, 1.0]];
        let g = d.evaluate_matrix(pts.view());
        assert_relative_eq!(g[(0, 0)], 1.0);
        assert_relative_eq!(g[(0, 1)], 0.0);
        assert_relative_eq!(g[(1, 0)], 0.0);
        assert_relative_eq!(g[(1, 1)], 1.0);
    }

    #[test]
    fn built_sizes_match_rbf_plus_coords_plus_const() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // 2-d data, 500 centers -> 503 observables
        let data2 = Array2::from_shape_fn((700, 2), |_| rng.random_range(-4.0..4.0));
        let d2 = build_dictionary(data2.view(), 500, 1e-3, 1, true, true).unwrap();
        assert_eq!(d2.len(), 503);
        // 3-d data, 125 centers -> 129
        let data3 = Array2::from_shape_fn((400, 3), |_| rng.random_range(-1.0..1.0));
        let d3 = build_dictionary(data3.view(), 125, 1e-3, 1, true, true).unwrap();
        assert_eq!(d3.len(), 129);
        // 100-d data, 625 centers -> 726
        let data100 = Array2::from_shape_fn((700, 100), |_| rng.random_range(-1.0..1.0));
        let d100 = build_dictionary(data100.view(), 625, 1e-3, 1, true, true).unwrap();
        assert_eq!(d100.len(), 726);
    }

    #[test]
    fn rbf_columns_match_pointwise_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data = Array2::from_shape_fn((60, 2), |_| rng.random_range(-4.0..4.0));
        let d = build_dictionary(data.view(), 20, 1e-3, 3, true, true).unwrap();
        let pts = Array2::from_shape_fn((10, 2), |_| rng.random_range(-4.0..4.0));
        let g = d.evaluate_matrix(pts.view());
        assert_eq!(g.dim(), (10, 23));
        let centers = d.centers().unwrap().to_owned();
        for i in 0..10 {
            for j in 0..20 {
                assert_eq!(
                    g[(i, j)],
                    thin_plate_eval(centers.row(j), 1e-3, pts.row(i))
                );
            }
            assert_eq!(g[(i, 20)], pts[(i, 0)]);
            assert_eq!(g[(i, 21)], pts[(i, 1)]);
            assert_eq!(g[(i, 22)], 1.0);
        }
    }

    #[test]
    fn evaluate_matrix_rows_equal_single_eval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data = Array2::from_shape_fn((80, 3), |_| rng.random_range(-2.0..2.0));
        let d = build_dictionary(data.view(), 15, 1e-3, 9, true, true).unwrap();
        let pts = Array2::from_shape_fn((100, 3), |_| rng.random_range(-2.0..2.0));
        let g = d.evaluate_matrix(pts.view());
        for i in 0..100 {
            let row = d.evaluate(pts.row(i));
            assert_eq!(g.row(i).to_owned(), row);
        }
    }

    #[test]
    fn monomial_matches_direct_powers() {
        let d = Dictionary::monomial(1, 3).unwrap();
        assert_eq!(d.len(), 4);
        let v = d.evaluate(array![1.7].view());
        assert_relative_eq!(v[0], 1.0);
        assert_relative_eq!(v[1], 1.7);
        assert_relative_eq!(v[2], 1.7 * 1.7);
        assert_relative_eq!(v[3], 1.7 * 1.7 * 1.7, max_relative = 1e-15);
    }

    #[test]
    fn monomial_2d_graded_order() {
        let d = Dictionary::monomial(2, 2).unwrap();
        assert_eq!(d.len(), 6); // 1, x, y, x^2, xy, y^2
        let v = d.evaluate(array![2.0, 3.0].view());
        assert_eq!(v.to_vec(), vec![1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
        assert_eq!(d.coordinate_indices(), Some(vec![1, 2]));
    }

    #[test]
    fn save_load_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let data = Array2::from_shape_fn((40, 2), |_| rng.random_range(-1.0..1.0));
        let d = build_dictionary(data.view(), 10, 1e-3, 4, true, false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        d.save(dir.path()).unwrap();
        let back = Dictionary::load(dir.path()).unwrap();
        assert_eq!(back.len(), d.len());
        assert_eq!(back.centers().unwrap(), d.centers().unwrap());
        let x = array![0.3, -0.4];
        assert_eq!(back.evaluate(x.view()), d.evaluate(x.view()));
    }

    #[test]
    fn build_rejects_too_many_centers() {
        let data = array![[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(build_dictionary(data.view(), 3, 1e-3, 0, true, true).is_err());
    }
}
