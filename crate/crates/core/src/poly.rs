//! Real polynomials in ascending-power coefficient form, and spectra.
//!
//! Roots come from companion-matrix eigenvalues, the same route used for the
//! zero-dynamics block, so zeros and the `A4` spectrum agree by construction.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Drops trailing (highest-power) coefficients with magnitude `<= tol * max|c|`.
pub fn trim(coeffs: &[f64], tol: f64) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut out = coeffs.to_vec();
    while out.len() > 1 && out.last().is_some_and(|c| c.abs() <= tol * scale) {
        out.pop();
    }
    out
}

/// Horner evaluation at a real point.
pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub fn eval_complex(coeffs: &[f64], z: Complex<f64>) -> Complex<f64> {
    coeffs
        .iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, c| acc * z + Complex::new(*c, 0.0))
}

/// Companion matrix with unit superdiagonal and last row `-c_i / c_d`.
///
/// Its characteristic polynomial is `p(s) / c_d`. Degree-0 input gives a 0×0 matrix.
pub fn companion(coeffs: &[f64]) -> Result<DMatrix<f64>> {
    let deg = coeffs.len().saturating_sub(1);
    let lead = *coeffs.last().ok_or_else(|| Error::Domain("empty polynomial".into()))?;
    if lead == 0.0 {
        return Err(Error::Domain("leading coefficient is zero".into()));
    }
    let mut m = DMatrix::zeros(deg, deg);
    for i in 0..deg.saturating_sub(1) {
        m[(i, i + 1)] = 1.0;
    }
    if deg > 0 {
        for j in 0..deg {
            m[(deg - 1, j)] = -coeffs[j] / lead;
        }
    }
    Ok(m)
}

/// Eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000).ok_or(Error::SpectralFailure)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Roots of the polynomial, sorted by real part then imaginary part.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex<f64>>> {
    let mut r = eigenvalues(&companion(coeffs)?)?;
    r.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(r)
}

/// Largest real part over the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re)))
}
