use nalgebra::{DMatrix, SymmetricEigen};

/// Builds a symmetric matrix from the upper triangle of a row-major `p x p`
/// buffer, scaling by `scale`. The lower triangle is a bit-exact mirror.
pub(crate) fn symmetric_from_upper(acc: &[f64], p: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = acc[i * p + j] * scale;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Copies the upper triangle onto the lower one.
pub(crate) fn mirror_upper(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in i + 1..p {
            m[(j, i)] = m[(i, j)];
        }
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue modulus of a general square matrix.
pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// `S += d d^T` on the upper triangle of a row-major `p x p` buffer.
#[inline]
pub(crate) fn add_outer_upper(acc: &mut [f64], d: &[f64]) {
    let p = d.len();
    for i in 0..p {
        let di = d[i];
        let row = &mut acc[i * p + i..(i + 1) * p];
        for (a, &dj) in row.iter_mut().zip(&d[i..]) {
            *a += di * dj;
        }
    }
}
