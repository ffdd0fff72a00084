//! Lloyd's algorithm with k-means++ seeding. Fully deterministic for a
//! fixed (points, k, seed) triple: the seeding draws come from a seeded
//! ChaCha stream with an explicit cumulative-weight scan, and all
//! reductions run in fixed order.

use ndarray::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

const MAX_ITERS: usize = 300;
const REL_OBJECTIVE_TOL: f64 = 1e-9;

/// Output of [`kmeans`].
#[derive(Debug, Clone)]
pub struct KmeansResult {
    /// Cluster centers, one per row.
    pub centers: Array2<f64>,
    /// Index of the nearest center for each input point.
    pub labels: Vec<usize>,
    /// Final sum of squared distances to assigned centers.
    pub objective: f64,
    /// Objective after each Lloyd iteration (non-increasing).
    pub objective_trace: Vec<f64>,
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct(points: &ArrayView2<f64>) -> usize {
    let mut rows: Vec<Vec<f64>> = points.rows().into_iter().map(|r| r.to_vec()).collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| x == y));
    rows.len()
}

/// k-means++ seeding: first center uniform, subsequent centers drawn with
/// probability proportional to squared distance from the chosen set.
fn seed_centers(points: &ArrayView2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let d = points.ncols();
    let mut centers = Array2::<f64>::zeros((k, d));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&points.row(first));

    let mut dist2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centers.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = dist2.iter().sum();
        let chosen = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, w) in dist2.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining mass on duplicates of chosen centers
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&points.row(chosen));
        for i in 0..n {
            let dd = sq_dist(points.row(i), centers.row(c));
            if dd < dist2[i] {
                dist2[i] = dd;
            }
        }
    }
    centers
}

fn assign(points: &ArrayView2<f64>, centers: &Array2<f64>) -> (Vec<usize>, f64) {
    let labeled: Vec<(usize, f64)> = par::map_indexed(points.nrows(), |i| {
        let p = points.row(i);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.rows().into_iter().enumerate() {
            let d = sq_dist(p, center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        (best, best_d)
    });
    let labels = labeled.iter().map(|(l, _)| *l).collect();
    let objective = labeled.iter().map(|(_, d)| d).sum();
    (labels, objective)
}

/// Seeded k-means clustering.
///
/// Requires `1 <= k <=` number of distinct points. Runs Lloyd iterations
/// until the relative objective improvement drops below 1e-9 or 300
/// iterations, whichever first. Empty clusters are re-seeded with the point
/// farthest from its assigned center.
pub fn kmeans(points: ArrayView2<f64>, k: usize, seed: u64) -> Result<KmeansResult> {
    let n = points.nrows();
    let d = points.ncols();
    if k == 0 {
        return Err(Error::invalid("kmeans: k must be >= 1"));
    }
    if n == 0 {
        return Err(Error::invalid("kmeans: no points"));
    }
    if !points.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("kmeans: non-finite coordinates"));
    }
    if k > 1 {
        let distinct = count_distinct(&points);
        if k > distinct {
            return Err(Error::invalid(format!(
                "kmeans: k={k} exceeds {distinct} distinct points"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(&points, k, &mut rng);
    let mut labels;
    let mut objective = f64::INFINITY;
    let mut trace = Vec::new();

    loop {
        let (new_labels, new_objective) = assign(&points, &centers);
        labels = new_labels;
        trace.push(new_objective);

        let rel_gain = (objective - new_objective) / objective.max(f64::MIN_POSITIVE);
        objective = new_objective;
        if trace.len() >= MAX_ITERS || (trace.len() > 1 && rel_gain.abs() < REL_OBJECTIVE_TOL) {
            break;
        }

        // recompute centers
        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            let p = points.row(i);
            let mut s = sums.row_mut(l);
            s += &p;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centers.row_mut(c).assign(&(&sums.row(c) * inv));
            }
        }
        // re-seed empty clusters with the worst-fit point
        for c in 0..k {
            if counts[c] == 0 {
                let (worst, _) = labels
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| (i, sq_dist(points.row(i), centers.row(l))))
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("nonempty points");
                centers.row_mut(c).assign(&points.row(worst));
            }
        }
    }

    Ok(KmeansResult {
        centers,
        labels,
        objective,
        objective_trace: trace,
    })
}
