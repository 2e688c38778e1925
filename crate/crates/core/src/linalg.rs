//! Small dense helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Pivots below this fraction of the largest diagonal entry count as singular.
const PIVOT_TOLERANCE: f64 = 1e-14;

pub fn cholesky(m: &Matrix, what: &str) -> Result<Cholesky<f64, Dyn>> {
    let fail = || Error::Numerical(format!("{what} is not positive definite"));
    let scale = m.diagonal().amax();
    let chol = Cholesky::new(m.clone()).ok_or_else(fail)?;
    let l = chol.l_dirty();
    if (0..m.nrows()).any(|i| !(l[(i, i)] * l[(i, i)] > PIVOT_TOLERANCE * scale)) {
        return Err(fail());
    }
    Ok(chol)
}

/// `(A + Aᵀ)/2`, used to scrub round-off asymmetry.
pub fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `xᵀ A^{-1} x` from the Cholesky factor `A = L Lᵀ`: one triangular solve.
pub fn inverse_quad_form(chol: &Cholesky<f64, Dyn>, x: &Vector) -> f64 {
    let l = chol.l_dirty();
    let z = l
        .solve_lower_triangular(x)
        .expect("Cholesky factor has a nonzero diagonal");
    z.norm_squared()
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).amax()
}
