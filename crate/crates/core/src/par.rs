//! Data-parallel inner loops, compiled with rayon under the `parallel`
//! feature (default) and as plain sequential iteration without it. Every
//! loop here is an independent per-index map, so both builds produce
//! bit-identical results.

/// Map `f` over `0..n` and collect in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Fill the rows of a matrix, one call per row index.
#[cfg(feature = "parallel")]
pub(crate) fn fill_rows<F>(out: &mut ndarray::Array2<f64>, f: F)
where
    F: Fn(usize, &mut ndarray::ArrayViewMut1<f64>) + Sync + Send,
{
    use ndarray::parallel::prelude::*;
    use ndarray::Axis;
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| f(i, &mut row));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn fill_rows<F>(out: &mut ndarray::Array2<f64>, f: F)
where
    F: Fn(usize, &mut ndarray::ArrayViewMut1<f64>) + Sync + Send,
{
    use ndarray::Axis;
    for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
        f(i, &mut row);
    }
}
