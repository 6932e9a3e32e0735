//! Functional similarity of two networks from their outputs on a shared
//! probe set (rows are examples, columns are output units).

use crate::error::{Error, Result};
use crate::tensor::Tensor;

fn check(a: &Tensor, b: &Tensor) -> Result<(usize, usize)> {
    if a.shape().len() != 2 || a.shape() != b.shape() {
        return Err(Error::Shape(format!("probe outputs {:?} vs {:?}", a.shape(), b.shape())));
    }
    let (rows, cols) = (a.shape()[0], a.shape()[1]);
    if rows < 2 {
        return Err(Error::Domain(format!("need at least 2 probe examples, got {rows}")));
    }
    Ok((rows, cols))
}

/// Frobenius norm of the difference, divided by the number of probe examples.
pub fn l2_distance(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (rows, _) = check(a, b)?;
    let sq: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(sq.sqrt() / rows as f64)
}

fn centered(t: &Tensor, rows: usize, cols: usize) -> Vec<f64> {
    let d = t.data();
    let mut out = d.to_vec();
    for c in 0..cols {
        let mean = (0..rows).map(|r| d[r * cols + c]).sum::<f64>() / rows as f64;
        for r in 0..rows {
            out[r * cols + c] -= mean;
        }
    }
    out
}

/// Squared Frobenius norm of `xᵀy` for row-major `rows × cols` matrices.
fn cross_norm_sq(x: &[f64], y: &[f64], rows: usize, cols: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..cols {
        for j in 0..cols {
            let dot: f64 = (0..rows).map(|r| x[r * cols + i] * y[r * cols + j]).sum();
            total += dot * dot;
        }
    }
    total
}

/// Linear centered kernel alignment, `‖YᵀX‖² / (‖XᵀX‖·‖YᵀY‖)` on
/// column-centered outputs.
pub fn linear_cka(a: &Tensor, b: &Tensor) -> Result<f64> {
    let (rows, cols) = check(a, b)?;
    let x = centered(a, rows, cols);
    let y = centered(b, rows, cols);
    let xx = cross_norm_sq(&x, &x, rows, cols).sqrt();
    let yy = cross_norm_sq(&y, &y, rows, cols).sqrt();
    if xx < 1e-300 || yy < 1e-300 {
        return Err(Error::Degenerate("probe outputs have zero variance".into()));
    }
    Ok((cross_norm_sq(&x, &y, rows, cols) / (xx * yy)).clamp(0.0, 1.0))
}
