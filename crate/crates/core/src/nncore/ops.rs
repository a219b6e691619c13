use ndarray::{Array1, Array2, Axis, Zip};

/// Rows with a norm below this are mapped to zero instead of being normalized.
pub const NORM_GUARD: f64 = 1e-12;

pub fn l2_normalize(x: &Array2<f64>) -> Array2<f64> {
    l2_normalize_with_norms(x).0
}

/// Row-wise unit vectors plus the original norms, as needed by the reverse pass.
pub fn l2_normalize_with_norms(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let norms: Array1<f64> = x.map_axis(Axis(1), |row| row.dot(&row).sqrt());
    let mut out = x.clone();
    for (mut row, &n) in out.outer_iter_mut().zip(norms.iter()) {
        if n < NORM_GUARD {
            row.fill(0.0);
        } else {
            row.mapv_inplace(|v| v / n);
        }
    }
    (out, norms)
}

/// `dx = (dy - y (y . dy)) / |x|` per row; zero for guarded rows.
pub fn l2_normalize_backward(
    y: &Array2<f64>,
    norms: &Array1<f64>,
    dy: &Array2<f64>,
) -> Array2<f64> {
    let mut dx = Array2::zeros(y.raw_dim());
    Zip::from(dx.rows_mut())
        .and(y.rows())
        .and(dy.rows())
        .and(norms)
        .for_each(|mut dx, y, dy, &n| {
            if n >= NORM_GUARD {
                let proj = y.dot(&dy);
                Zip::from(&mut dx)
                    .and(&y)
                    .and(&dy)
                    .for_each(|d, &yv, &g| *d = (g - yv * proj) / n);
            }
        });
    dx
}
