//! Dense symmetric helpers shared by the SDP solver and the certifier.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn max_asymmetry(k: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((k[(i, j)] - k[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn check_symmetric(k: &DMatrix<f64>, tol: f64) -> Result<()> {
    if k.nrows() != k.ncols() {
        return Err(Error::DimensionMismatch {
            expected: k.nrows(),
            got: k.ncols(),
        });
    }
    let asym = max_asymmetry(k);
    let scale = 1.0 + k.amax();
    if asym > tol * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

pub(crate) fn symmetrize(k: &mut DMatrix<f64>) {
    let n = k.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
}

/// Eigenvalues in ascending order together with matching eigenvector columns.
pub fn sorted_eigen(k: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = k.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(k.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub fn min_eigenvalue(k: &DMatrix<f64>) -> f64 {
    k.clone().symmetric_eigen().eigenvalues.min()
}

/// `Σ max(0, lambda_i) v_i v_iᵀ` for a matrix already known to be symmetric.
pub(crate) fn clamp_psd(k: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = k.clone().symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    let mut any = false;
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 0.0 {
            any = true;
            scaled.column_mut(c).scale_mut(l);
        } else {
            scaled.column_mut(c).fill(0.0);
        }
    }
    if !any {
        return DMatrix::zeros(k.nrows(), k.ncols());
    }
    let mut out = scaled * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    out
}

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix; eigenvalues below
/// `rel_cutoff * max eigenvalue` are dropped.
pub(crate) fn psd_pinv(k: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let eig = k.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = rel_cutoff * top;
    let mut scaled = eig.eigenvectors.clone();
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        if l.abs() > cut && top > 0.0 {
            scaled.column_mut(c).scale_mut(1.0 / l);
        } else {
            scaled.column_mut(c).fill(0.0);
        }
    }
    let mut out = scaled * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    out
}
