use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// Top two principal directions of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// Projections of the centred rows, `n x 2`.
    pub coords: Array2<f64>,
    /// Covariance eigenvalues of the two components, largest first.
    pub explained_variance: [f64; 2],
    /// Unit loadings, `2 x d`; each row's largest-magnitude entry is positive.
    pub components: Array2<f64>,
    pub mean: Array1<f64>,
}

/// Eigendecomposition of the sample covariance. Fewer than two features give a zero second component.
pub fn pca_2d(x: &Array2<f64>) -> Result<Pca> {
    let (n, d) = x.dim();
    if n < 3 {
        return Err(Error::Structure(format!(
            "PCA needs at least 3 rows, got {n}"
        )));
    }
    let mean = x.mean_axis(Axis(0)).unwrap();
    let centred = x - &mean;
    let cov = centred.t().dot(&centred) / (n as f64 - 1.0);
    if cov.diag().iter().all(|&v| v == 0.0) || !cov.iter().all(|v| v.is_finite()) {
        return Err(Error::Structure("PCA input has rank zero".into()));
    }
    let eig = SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| cov[[i, j]]));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut components = Array2::zeros((2, d));
    let mut explained_variance = [0.0; 2];
    for (k, &idx) in order.iter().take(2).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let lead = (0..d).fold(
            0,
            |best, i| if v[i].abs() > v[best].abs() { i } else { best },
        );
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components[[k, i]] = sign * v[i];
        }
        explained_variance[k] = eig.eigenvalues[idx].max(0.0);
    }
    let coords = centred.dot(&components.t());
    Ok(Pca {
        coords,
        explained_variance,
        components,
        mean,
    })
}
