//! Small dense linear-algebra and finite-difference helpers shared by the
//! solvers and diagnostics.

use nalgebra::{DMatrix, DVector};

/// Central finite-difference step used for gradients and Jacobians.
pub const FD_STEP: f64 = 1e-6;

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F>(f: F, x: &DVector<f64>, step: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + step;
        let fp = f(&xp);
        xp[i] = xi - step;
        let fm = f(&xp);
        xp[i] = xi;
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

/// Central-difference Jacobian of a vector function; column `j` is the
/// derivative along coordinate `j`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut xp = x.clone();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let xj = x[j];
        let h = step * xj.abs().max(1.0);
        xp[j] = xj + h;
        let fp = f(&xp);
        xp[j] = xj - h;
        let fm = f(&xp);
        xp[j] = xj;
        cols.push((fp - fm) / (2.0 * h));
    }
    if cols.is_empty() {
        return DMatrix::zeros(f(x).len(), 0);
    }
    DMatrix::from_columns(&cols)
}

/// Singular values and a full right-singular basis of `m`, sorted by
/// decreasing singular value. Wide matrices are padded with zero rows so the
/// null space is available.
pub fn full_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(cols, order.len());
    for (k, &i) in order.iter().enumerate() {
        v.set_column(k, &v_t.row(i).transpose());
    }
    (values, v)
}

/// Numerical rank and null-space basis of `m`. A singular value counts
/// toward the rank when it exceeds `rel_tol * max(1, sigma_max)`.
pub struct KernelSplit {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub kernel: DMatrix<f64>,
    pub threshold: f64,
}

pub fn kernel(m: &DMatrix<f64>, rel_tol: f64) -> KernelSplit {
    let cols = m.ncols();
    let (values, v) = full_svd(m);
    let sigma_max = values.first().copied().unwrap_or(0.0);
    let threshold = rel_tol * sigma_max.max(1.0);
    let rank = values.iter().filter(|&&s| s > threshold).count();
    let kernel = if cols == 0 {
        DMatrix::zeros(0, 0)
    } else {
        v.columns(rank, cols - rank).into_owned()
    };
    KernelSplit {
        singular_values: values.into_iter().take(m.nrows().min(cols)).collect(),
        rank,
        kernel,
        threshold,
    }
}

/// Orthonormal basis of the column space of `m`.
pub fn range_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let sigma_max = svd.singular_values.max();
    let threshold = rel_tol * sigma_max.max(1.0);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > threshold)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Least-squares solution of `a x = b` through the SVD, discarding singular
/// values below `rel_tol * sigma_max`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let eps = rel_tol * svd.singular_values.max();
    svd.solve(b, eps).expect("U and V^T were computed")
}

pub fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = kernel(&m, 1e-12);
        assert_eq!(k.rank, 1);
        assert_eq!(k.kernel.ncols(), 2);
        let prod = &m * &k.kernel;
        assert!(prod.norm() < 1e-14);
    }

    #[test]
    fn fd_gradient_of_quadratic() {
        let f = |x: &DVector<f64>| x[0] * x[0] + 3.0 * x[0] * x[1];
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let g = fd_gradient(f, &x, 1e-6);
        assert!((g[0] - 8.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn range_basis_drops_dependent_columns() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
        assert_eq!(range_basis(&m, 1e-12).ncols(), 1);
    }
}
