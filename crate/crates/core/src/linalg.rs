//! Small dense helpers for 3-row matrices.

use nalgebra::{Matrix3, Matrix3xX, SymmetricEigen, Vector3};

/// Eigen-decomposition of a symmetric 3×3 matrix with eigenvalues in
/// nonincreasing order. Eigenvectors are the columns of the returned matrix.
pub fn sym_eigen_desc(m: &Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    let eig = SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = Vector3::from_fn(|i, _| eig.eigenvalues[order[i]]);
    let vectors = Matrix3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    (values, vectors)
}

/// `M·Mᵀ` for a 3×K matrix.
pub fn gram(m: &Matrix3xX<f64>) -> Matrix3<f64> {
    let mut g = Matrix3::zeros();
    for col in m.column_iter() {
        let (x, y, z) = (col[0], col[1], col[2]);
        g[(0, 0)] += x * x;
        g[(0, 1)] += x * y;
        g[(0, 2)] += x * z;
        g[(1, 1)] += y * y;
        g[(1, 2)] += y * z;
        g[(2, 2)] += z * z;
    }
    g[(1, 0)] = g[(0, 1)];
    g[(2, 0)] = g[(0, 2)];
    g[(2, 1)] = g[(1, 2)];
    g
}
