//! Two-dimensional PCA projection of representation vectors.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::corpus::StanceLabel;
use crate::error::{Error, Result};

/// Projects rows onto their two leading principal components. Each axis is
/// signed so its largest-magnitude loading is positive.
pub fn pca_2d(rows: &[Vec<f32>]) -> Result<Vec<[f64; 2]>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid("nothing to project"));
    }
    let d = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: r.len(),
        });
    }
    let x = DMatrix::from_fn(n, d, |i, j| f64::from(rows[i][j]));
    let mu = x.row_mean();
    let centred = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mu[j]);
    let cov = centred.transpose() * &centred / n.max(1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let axes: Vec<Vec<f64>> = order
        .iter()
        .take(2)
        .map(|&c| {
            let v: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            let big = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v.iter().map(|x| -x).collect()
            } else {
                v
            }
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            let mut p = [0.0; 2];
            for (a, axis) in axes.iter().enumerate() {
                p[a] = (0..d).map(|j| centred[(i, j)] * axis[j]).sum();
            }
            p
        })
        .collect())
}

/// `id,label,x,y` rows.
pub fn write_projection_csv(
    path: &Path,
    ids: &[String],
    labels: &[StanceLabel],
    coords: &[[f64; 2]],
) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut body = String::from("id,label,x,y\n");
    for ((id, l), p) in ids.iter().zip(labels).zip(coords) {
        body.push_str(&format!("{id},{l},{},{}\n", p[0], p[1]));
    }
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}
