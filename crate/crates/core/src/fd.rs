//! Central finite differences with a relative step `1e-5 * max(1, |v|)`.

use nalgebra::{DMatrix, DVector};

pub const RELATIVE_STEP: f64 = 1e-5;

#[inline]
pub fn step_for(v: f64) -> f64 {
    RELATIVE_STEP * v.abs().max(1.0)
}

/// Jacobian with `J[(row, col)] = d f_row / d z^col`.
pub fn jacobian<F>(f: F, z: &DVector<f64>) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = z.len();
    let mut cols = Vec::with_capacity(n);
    let mut zp = z.clone();
    for c in 0..n {
        let h = step_for(z[c]);
        zp[c] = z[c] + h;
        let fp = f(&zp);
        zp[c] = z[c] - h;
        let fm = f(&zp);
        zp[c] = z[c];
        cols.push((fp - fm) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(rows, n, |r, c| cols[c][r])
}

pub fn gradient<F>(f: F, z: &DVector<f64>) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut zp = z.clone();
    DVector::from_fn(z.len(), |c, _| {
        let h = step_for(z[c]);
        zp[c] = z[c] + h;
        let fp = f(&zp);
        zp[c] = z[c] - h;
        let fm = f(&zp);
        zp[c] = z[c];
        (fp - fm) / (2.0 * h)
    })
}

/// Derivative of a vector-valued function of one scalar.
pub fn vector_derivative<F>(f: F, s: f64) -> DVector<f64>
where
    F: Fn(f64) -> DVector<f64>,
{
    let h = step_for(s);
    (f(s + h) - f(s - h)) / (2.0 * h)
}

/// Derivative of a matrix-valued function of one scalar.
pub fn matrix_derivative<F>(f: F, s: f64) -> DMatrix<f64>
where
    F: Fn(f64) -> DMatrix<f64>,
{
    let h = step_for(s);
    (f(s + h) - f(s - h)) / (2.0 * h)
}

/// `d A / d z^tau` for every `tau`, for a matrix-valued `A(z)`.
pub fn matrix_z_derivatives<F>(f: F, z: &DVector<f64>) -> Vec<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    let mut zp = z.clone();
    (0..z.len())
        .map(|tau| {
            let h = step_for(z[tau]);
            zp[tau] = z[tau] + h;
            let ap = f(&zp);
            zp[tau] = z[tau] - h;
            let am = f(&zp);
            zp[tau] = z[tau];
            (ap - am) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_quadratic_map() {
        let f = |z: &DVector<f64>| DVector::from_vec(vec![z[0] * z[1], z[1] * z[1] + 3.0 * z[0]]);
        let z = DVector::from_vec(vec![2.0, -1.5]);
        let j = jacobian(f, &z);
        let expected = DMatrix::from_row_slice(2, 2, &[-1.5, 2.0, 3.0, -3.0]);
        assert!((j - expected).amax() < 1e-9);
    }

    #[test]
    fn gradient_and_scalar_derivatives() {
        let g = gradient(|z: &DVector<f64>| z[0].powi(3) + z[1], &DVector::from_vec(vec![1.0, 4.0]));
        assert!((g[0] - 3.0).abs() < 1e-9 && (g[1] - 1.0).abs() < 1e-9);
        let d = vector_derivative(|s| DVector::from_vec(vec![s.exp()]), 0.5);
        assert!((d[0] - 0.5_f64.exp()).abs() < 1e-9);
    }
}
