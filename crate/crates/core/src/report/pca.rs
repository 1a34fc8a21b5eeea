use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Projects rows onto the top two principal components of the centred set.
///
/// Components are ordered by decreasing variance and signed so that their
/// largest-magnitude entry is positive. A set without spread maps to the
/// origin.
pub fn pca_project(blocks: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (rows, dim) = blocks.dim();
    if rows == 0 || dim == 0 {
        return Err(Error::Shape(format!("cannot project a {rows}x{dim} set")));
    }
    let mean = blocks.mean_axis(ndarray::Axis(0)).expect("nonempty");
    let centred = &blocks - &mean;
    let data = DMatrix::from_fn(rows, dim, |i, j| centred[[i, j]]);
    let covariance = data.transpose() * &data / rows as f64;
    let eigen = SymmetricEigen::new(covariance);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let scale = eigen.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut out = Array2::zeros((rows, 2));
    for (axis, &index) in order.iter().take(2).enumerate() {
        if eigen.eigenvalues[index] <= 1e-12 * scale || scale == 0.0 {
            continue;
        }
        let mut v: Vec<f64> = eigen.eigenvectors.column(index).iter().copied().collect();
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for r in 0..rows {
            out[[r, axis]] = centred.row(r).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
    }
    Ok(out)
}
