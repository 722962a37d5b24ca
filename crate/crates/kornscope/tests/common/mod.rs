//! Dense linear-algebra oracles shared by the integration suites.
//!
//! Everything here recomputes spectra with nalgebra on explicitly
//! materialized matrices, independently of the crate's sparse iterative
//! solvers, so agreement between the two routes is meaningful evidence.

#![allow(dead_code)]

use kornscope::sparse::Csr;
use nalgebra::DMatrix;

/// Materialize a sparse matrix densely.
pub fn dense(m: &Csr) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows, m.ncols);
    for r in 0..m.nrows {
        for k in m.indptr[r]..m.indptr[r + 1] {
            out[(r, m.indices[k] as usize)] += m.data[k];
        }
    }
    out
}

/// Orthonormal basis of the orthogonal complement of `constraints` in
/// R^n, built by Gram-Schmidt completion of the identity. Constraint
/// vectors may be dependent; near-zero residuals are dropped.
pub fn complement_basis(constraints: &[Vec<f64>], n: usize) -> Vec<Vec<f64>> {
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    let project_out = |v: &mut Vec<f64>, ortho: &[Vec<f64>]| {
        for _ in 0..2 {
            for q in ortho {
                let c: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
    };
    for c in constraints {
        assert_eq!(c.len(), n, "constraint length mismatch");
        let mut v = c.clone();
        project_out(&mut v, &ortho);
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-10 {
            v.iter_mut().for_each(|x| *x /= nv);
            ortho.push(v);
        }
    }
    let k = ortho.len();
    for j in 0..n {
        if ortho.len() == n {
            break;
        }
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        project_out(&mut v, &ortho);
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            ortho.push(v);
        }
    }
    assert_eq!(ortho.len(), n, "Gram-Schmidt completion fell short");
    ortho.split_off(k)
}

/// The restriction N^T M N of a dense matrix to the span of `basis`.
pub fn restrict(m: &DMatrix<f64>, basis: &[Vec<f64>]) -> DMatrix<f64> {
    let n = m.nrows();
    let w = basis.len();
    let nb = DMatrix::from_fn(n, w, |i, j| basis[j][i]);
    nb.transpose() * m * nb
}

/// Smallest eigenvalue of the symmetric pencil (A, B) restricted to
/// `basis`, by Cholesky reduction to a standard symmetric problem. B must
/// be positive definite on the span.
pub fn smallest_pencil_eig(a: &DMatrix<f64>, b: &DMatrix<f64>, basis: &[Vec<f64>]) -> f64 {
    let an = restrict(a, basis);
    let bn = restrict(b, basis);
    let chol = bn.cholesky().expect("restricted B is not positive definite");
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&an)
        .expect("singular Cholesky factor");
    let m = l
        .solve_lower_triangular(&y.transpose())
        .expect("singular Cholesky factor");
    // m = L^-1 A L^-T up to the symmetrization below.
    let sym = 0.5 * (&m + m.transpose());
    let eig = nalgebra::linalg::SymmetricEigen::new(sym);
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Symmetric inverse square root via eigendecomposition. All eigenvalues
/// must be strictly positive.
pub fn inv_sqrt(h: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = nalgebra::linalg::SymmetricEigen::new(h.clone());
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min > 0.0, "matrix is not positive definite: min eigenvalue {min}");
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Singular values in ascending order.
pub fn sv_ascending(m: &DMatrix<f64>) -> Vec<f64> {
    let svd = nalgebra::linalg::SVD::new(m.clone(), false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sv
}

/// Relative difference against the larger magnitude.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
