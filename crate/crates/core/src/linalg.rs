//! Small dense linear-algebra helpers on top of nalgebra.
//!
//! Everything in the crate works on dynamically sized `f64` matrices;
//! frequency-domain code uses their `Complex64` counterparts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Error;
use crate::Result;

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex64>;
pub type Vec64 = DVector<f64>;

/// Symmetrize in place: (A + A^T)/2.
pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

pub fn eye(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn ceye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn to_complex(a: &Mat) -> CMat {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Complex eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(a: &Mat) -> Result<Vec<Complex64>> {
    if a.is_empty() {
        return Ok(vec![]);
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 100_000).ok_or(
        Error::NonConvergence {
            context: "schur eigenvalue iteration".into(),
            residual: f64::NAN,
        },
    )?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_radius(a: &Mat) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max))
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &Mat) -> Vec<f64> {
    if a.is_empty() {
        return vec![];
    }
    let mut ev: Vec<f64> = sym(a).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

pub fn min_sym_eig(a: &Mat) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(0.0)
}

/// Lower Cholesky factor L with R = L L^T.
pub fn chol_lower(r: &Mat, context: &str) -> Result<Mat> {
    nalgebra::linalg::Cholesky::new(sym(r))
        .map(|c| c.l())
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: context.to_string(),
            min_eig: min_sym_eig(r),
        })
}

/// Upper factor U with R = U^T U (transpose of the lower Cholesky factor).
pub fn chol_upper(r: &Mat, context: &str) -> Result<Mat> {
    Ok(chol_lower(r, context)?.transpose())
}

/// Solve A X = B for real square A.
pub fn solve(a: &Mat, b: &Mat) -> Result<Mat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::NoSolution("singular matrix in linear solve".into()))
}

/// Solve A X = B for complex square A.
pub fn csolve(a: &CMat, b: &CMat) -> Result<CMat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::NoSolution("singular complex matrix in linear solve".into()))
}

pub fn cinv(a: &CMat) -> Result<CMat> {
    csolve(a, &ceye(a.nrows()))
}

pub fn inv(a: &Mat) -> Result<Mat> {
    solve(a, &eye(a.nrows()))
}

/// (zI - A)^{-1} B evaluated with a complex LU solve.
pub fn resolvent_times(z: Complex64, a: &Mat, b: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let zi = ceye(n) * z - to_complex(a);
    csolve(&zi, b)
}

/// Largest eigenvalue of a Hermitian matrix, computed through the real
/// symmetric embedding [[Re, -Im], [Im, Re]] (its spectrum repeats each
/// eigenvalue of the Hermitian matrix twice).
pub fn hermitian_eig_max(g: &CMat) -> f64 {
    let k = g.nrows();
    if k == 0 {
        return 0.0;
    }
    let mut e = Mat::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let v = g[(i, j)];
            e[(i, j)] = v.re;
            e[(i, j + k)] = -v.im;
            e[(i + k, j)] = v.im;
            e[(i + k, j + k)] = v.re;
        }
    }
    sym_eigenvalues(&e).last().copied().unwrap_or(0.0)
}

/// Largest singular value of a complex matrix.
pub fn sigma_max(t: &CMat) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    let g = t.adjoint() * t;
    hermitian_eig_max(&g).max(0.0).sqrt()
}

pub fn fro(a: &Mat) -> f64 {
    a.norm()
}

/// Stack a grid of equally sized blocks into one matrix. `blocks[i][j]`
/// becomes the (i, j) block of the result.
pub fn block_matrix(blocks: &[Vec<Mat>]) -> Mat {
    let row_heights: Vec<usize> = blocks.iter().map(|r| r[0].nrows()).collect();
    let col_widths: Vec<usize> = blocks[0].iter().map(|b| b.ncols()).collect();
    let total_r: usize = row_heights.iter().sum();
    let total_c: usize = col_widths.iter().sum();
    let mut out = Mat::zeros(total_r, total_c);
    let mut r0 = 0;
    for (bi, row) in blocks.iter().enumerate() {
        let mut c0 = 0;
        for (bj, blk) in row.iter().enumerate() {
            assert_eq!(blk.nrows(), row_heights[bi], "ragged block row");
            assert_eq!(blk.ncols(), col_widths[bj], "ragged block column");
            out.view_mut((r0, c0), (blk.nrows(), blk.ncols())).copy_from(blk);
            c0 += blk.ncols();
        }
        r0 += row_heights[bi];
    }
    out
}

/// Horizontal concatenation.
pub fn hcat(parts: &[&Mat]) -> Mat {
    let rows = parts[0].nrows();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut c0 = 0;
    for p in parts {
        assert_eq!(p.nrows(), rows);
        out.view_mut((0, c0), (rows, p.ncols())).copy_from(p);
        c0 += p.ncols();
    }
    out
}

/// Vertical concatenation.
pub fn vcat(parts: &[&Mat]) -> Mat {
    let cols = parts[0].ncols();
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut r0 = 0;
    for p in parts {
        assert_eq!(p.ncols(), cols);
        out.view_mut((r0, 0), (p.nrows(), cols)).copy_from(p);
        r0 += p.nrows();
    }
    out
}

/// Complex block 2x2 assembly.
pub fn cblock2x2(a: &CMat, b: &CMat, c: &CMat, d: &CMat) -> CMat {
    let (r1, r2) = (a.nrows(), c.nrows());
    let (c1, c2) = (a.ncols(), b.ncols());
    let mut out = CMat::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_radius_of_diagonal() {
        let a = Mat::from_diagonal(&Vec64::from_vec(vec![0.5, -0.9, 0.1]));
        assert!((spectral_radius(&a).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn cholesky_orientations() {
        let r = Mat::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let l = chol_lower(&r, "test").unwrap();
        assert!(((&l * l.transpose()) - &r).norm() < 1e-12);
        let u = chol_upper(&r, "test").unwrap();
        assert!(((u.transpose() * &u) - &r).norm() < 1e-12);
        assert!(u[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn hermitian_embedding_matches_sigma() {
        let t = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 2.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(3.0, 0.5),
                Complex64::new(-1.0, 1.0),
            ],
        );
        let g = t.adjoint() * &t;
        let lm = hermitian_eig_max(&g);
        let sv = t.clone().svd(false, false).singular_values;
        let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
        assert!((lm.sqrt() - smax).abs() < 1e-10);
    }

    #[test]
    fn block_assembly() {
        let a = eye(2);
        let b = Mat::zeros(2, 1);
        let c = Mat::zeros(1, 2);
        let d = eye(1);
        let m = block_matrix(&[vec![a, b], vec![c, d]]);
        assert_eq!(m.nrows(), 3);
        assert!((m - eye(3)).norm() < 1e-15);
    }
}
