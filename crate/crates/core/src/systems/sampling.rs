//! Snapshot-pair generation: seeded initial-state draws, optional burn-in,
//! one recorded step per trajectory. Trajectories are independent, so the
//! loop parallelizes with a per-index derived seed and stays reproducible.

use std::path::Path;

use ndarray::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ioformats;
use crate::numerics::derive_seed;
use crate::par;
use crate::systems::DiscreteSystem;

/// Distribution of initial states.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSampler {
    /// Uniform on an axis-aligned box.
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Standard normal, independent per coordinate.
    Gaussian { dim: usize },
}

impl InitialSampler {
    pub fn dim(&self) -> usize {
        match self {
            InitialSampler::UniformBox { lo, .. } => lo.len(),
            InitialSampler::Gaussian { dim } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            InitialSampler::UniformBox { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() {
                    return Err(Error::invalid("UniformBox: lo/hi length mismatch"));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(Error::invalid("UniformBox: requires lo <= hi"));
                }
                Ok(())
            }
            InitialSampler::Gaussian { dim } => {
                if *dim == 0 {
                    return Err(Error::invalid("Gaussian: dim must be >= 1"));
                }
                Ok(())
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Array1<f64> {
        match self {
            InitialSampler::UniformBox { lo, hi } => Array1::from_shape_fn(lo.len(), |i| {
                if hi[i] > lo[i] {
                    rng.random_range(lo[i]..hi[i])
                } else {
                    lo[i]
                }
            }),
            InitialSampler::Gaussian { dim } => {
                Array1::from_shape_fn(*dim, |_| rng.sample::<f64, _>(StandardNormal))
            }
        }
    }
}

/// Matched one-step samples `(x_i, y_i = step(x_i))` with step metadata;
/// the raw material for operator fitting.
#[derive(Debug, Clone)]
pub struct SnapshotPairSet {
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub step_size: f64,
    pub system: String,
    /// Trajectories discarded because a step hit a singularity.
    pub dropped: usize,
}

impl SnapshotPairSet {
    pub fn new(x: Array2<f64>, y: Array2<f64>, step_size: f64, system: String) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::invalid("SnapshotPairSet: x/y shape mismatch"));
        }
        if x.nrows() == 0 {
            return Err(Error::invalid("SnapshotPairSet: empty"));
        }
        Ok(SnapshotPairSet {
            x,
            y,
            step_size,
            system,
            dropped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// CSV layout: a metadata header (`dim,step_size,system` names, then the
    /// values), followed by one `x_1..x_d,y_1..y_d` row per pair.
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        if self.system.contains(',') || self.system.contains('\n') {
            return Err(Error::invalid("SnapshotPairSet: system name must not contain ',' or newline"));
        }
        writeln!(w, "dim,step_size,system")?;
        writeln!(
            w,
            "{},{},{}",
            self.dim(),
            ioformats::format_f64(self.step_size),
            self.system
        )?;
        for i in 0..self.len() {
            let mut fields = Vec::with_capacity(2 * self.dim());
            fields.extend(self.x.row(i).iter().map(|v| ioformats::format_f64(*v)));
            fields.extend(self.y.row(i).iter().map(|v| ioformats::format_f64(*v)));
            writeln!(w, "{}", fields.join(","))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        use std::io::BufRead;
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut lines = reader.lines().enumerate();
        let perr = |line: usize, msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let (_, header) = lines
            .next()
            .ok_or_else(|| perr(1, "empty file".into()))?;
        let header = header?;
        if header.trim() != "dim,step_size,system" {
            return Err(perr(1, format!("unexpected header {header:?}")));
        }
        let (_, meta) = lines
            .next()
            .ok_or_else(|| perr(2, "missing metadata row".into()))?;
        let meta = meta?;
        let fields: Vec<&str> = meta.split(',').collect();
        if fields.len() != 3 {
            return Err(perr(2, "metadata row must have 3 fields".into()));
        }
        let dim: usize = fields[0]
            .trim()
            .parse()
            .map_err(|e| perr(2, format!("bad dim: {e}")))?;
        let step_size: f64 = fields[1]
            .trim()
            .parse()
            .map_err(|e| perr(2, format!("bad step_size: {e}")))?;
        let system = fields[2].trim().to_string();
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for (idx, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let vals: Vec<&str> = line.split(',').collect();
            if vals.len() != 2 * dim {
                return Err(perr(
                    idx + 1,
                    format!("expected {} fields, got {}", 2 * dim, vals.len()),
                ));
            }
            for (j, v) in vals.iter().enumerate() {
                let parsed: f64 = v
                    .trim()
                    .parse()
                    .map_err(|e| perr(idx + 1, format!("bad numeral {v:?}: {e}")))?;
                if j < dim {
                    xs.push(parsed);
                } else {
                    ys.push(parsed);
                }
            }
            n += 1;
        }
        let x = Array2::from_shape_vec((n, dim), xs)
            .map_err(|e| Error::invalid(format!("reshape: {e}")))?;
        let y = Array2::from_shape_vec((n, dim), ys)
            .map_err(|e| Error::invalid(format!("reshape: {e}")))?;
        SnapshotPairSet::new(x, y, step_size, system)
    }
}

/// Draw `n` seeded initial states, advance each by `burn_in` steps, and
/// record the pair `(x, step(x))`. Trajectories that hit a singular step
/// are dropped (and counted); it is an error for all of them to drop.
pub fn sample_pairs(
    system: &dyn DiscreteSystem,
    sampler: &InitialSampler,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<SnapshotPairSet> {
    if n == 0 {
        return Err(Error::invalid("sample_pairs: n must be >= 1"));
    }
    sampler.validate()?;
    if sampler.dim() != system.state_dim() {
        return Err(Error::invalid(format!(
            "sample_pairs: sampler dim {} != system dim {}",
            sampler.dim(),
            system.state_dim()
        )));
    }
    let results: Vec<Option<(Array1<f64>, Array1<f64>)>> = par::map_indexed(n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let mut state = sampler.draw(&mut rng);
        for _ in 0..burn_in {
            match system.step(state.view()) {
                Ok(next) => state = next,
                Err(_) => return None,
            }
        }
        match system.step(state.view()) {
            Ok(next) => Some((state, next)),
            Err(_) => None,
        }
    });
    let kept: Vec<&(Array1<f64>, Array1<f64>)> = results.iter().flatten().collect();
    let dropped = n - kept.len();
    if kept.is_empty() {
        return Err(Error::Numerical(format!(
            "sample_pairs: all {n} trajectories hit singular steps"
        )));
    }
    let d = system.state_dim();
    let mut x = Array2::<f64>::zeros((kept.len(), d));
    let mut y = Array2::<f64>::zeros((kept.len(), d));
    for (row, (xi, yi)) in kept.iter().enumerate() {
        x.row_mut(row).assign(xi);
        y.row_mut(row).assign(yi);
    }
    let mut pairs = SnapshotPairSet::new(x, y, system.step_size(), system.name().to_string())?;
    pairs.dropped = dropped;
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{EulerLinear, GradientDescent, Himmelblau, IsotropicQuadratic};
    use approx::assert_relative_eq;

    #[test]
    fn single_pair_matches_step() {
        let sys = EulerLinear { a: 1.0, dt: 0.5 };
        let sampler = InitialSampler::UniformBox {
            lo: vec![-1.0],
            hi: vec![1.0],
        };
        let pairs = sample_pairs(&sys, &sampler, 1, 0, 3).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_relative_eq!(pairs.y[(0, 0)], 0.5 * pairs.x[(0, 0)], epsilon = 1e-15);
    }

    #[test]
    fn deterministic_per_seed() {
        let sys = GradientDescent::new(Himmelblau, 0.001);
        let sampler = InitialSampler::UniformBox {
            lo: vec![-4.0, -4.0],
            hi: vec![4.0, 4.0],
        };
        let a = sample_pairs(&sys, &sampler, 100, 0, 7).unwrap();
        let b = sample_pairs(&sys, &sampler, 100, 0, 7).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
        let c = sample_pairs(&sys, &sampler, 100, 0, 8).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn burn_in_contracts_gaussian_cloud() {
        // burn-in steps of a linear contraction shrink the state norm by
        // exactly (1 - h)^burn_in
        let h = 0.05;
        let sys = GradientDescent::new(IsotropicQuadratic { dim: 3 }, h);
        let sampler = InitialSampler::Gaussian { dim: 3 };
        let raw = sample_pairs(&sys, &sampler, 200, 0, 11).unwrap();
        let burned = sample_pairs(&sys, &sampler, 200, 5, 11).unwrap();
        let factor = (1.0f64 - h).powi(5);
        for i in 0..200 {
            for j in 0..3 {
                assert_relative_eq!(
                    burned.x[(i, j)],
                    raw.x[(i, j)] * factor,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn csv_roundtrip_bitwise() {
        let sys = GradientDescent::new(Himmelblau, 0.001);
        let sampler = InitialSampler::UniformBox {
            lo: vec![-4.0, -4.0],
            hi: vec![4.0, 4.0],
        };
        let pairs = sample_pairs(&sys, &sampler, 50, 0, 21).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("pairs.csv");
        let p2 = dir.path().join("pairs2.csv");
        pairs.to_csv(&p1).unwrap();
        let back = SnapshotPairSet::from_csv(&p1).unwrap();
        back.to_csv(&p2).unwrap();
        assert_eq!(
            crate::ioformats::sha256_file(&p1).unwrap(),
            crate::ioformats::sha256_file(&p2).unwrap()
        );
        assert_eq!(back.x, pairs.x);
        assert_eq!(back.step_size, pairs.step_size);
        assert_eq!(back.system, pairs.system);
    }

    #[test]
    fn all_singular_is_error() {
        // Newton on z^2 + 1 starting exactly at the only singular point
        let sys = crate::systems::PolynomialNewtonRoot::new(vec![
            num_complex::Complex64::new(1.0, 0.0),
            num_complex::Complex64::new(0.0, 0.0),
            num_complex::Complex64::new(1.0, 0.0),
        ]);
        let sampler = InitialSampler::UniformBox {
            lo: vec![0.0, 0.0],
            hi: vec![0.0, 0.0],
        };
        assert!(matches!(
            sample_pairs(&sys, &sampler, 5, 0, 1),
            Err(Error::Numerical(_))
        ));
    }
}
