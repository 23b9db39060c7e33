//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn, Schur};

use crate::error::{Error, Result};

/// Stationary distribution of a row-stochastic matrix, via a minimum-norm
/// least-squares solve of the augmented system [Tᵀ − I; 1ᵀ] π = [0; 1].
///
/// Chains with a nonunique stationary law (e.g. T = I) resolve to the
/// minimum-norm choice, which is uniform over the unconstrained directions.
pub fn stationary_distribution(transition: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = transition.nrows();
    if k == 0 || transition.ncols() != k {
        return Err(Error::ShapeMismatch("transition matrix must be square".into()));
    }
    let mut system = DMatrix::zeros(k + 1, k);
    for i in 0..k {
        for j in 0..k {
            system[(i, j)] = transition[(j, i)];
        }
        system[(i, i)] -= 1.0;
        system[(k, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs[k] = 1.0;

    let svd = system
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolve("svd of stationary system did not converge".into()))?;
    let cutoff = svd.singular_values.max() * k as f64 * f64::EPSILON;
    let mut pi = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::Eigensolve(format!("stationary solve failed: {e}")))?
        .column(0)
        .into_owned();

    for v in pi.iter_mut() {
        if *v < -1e-12 {
            return Err(Error::Eigensolve(format!(
                "stationary distribution has negative mass {v}"
            )));
        }
        *v = v.max(0.0);
    }
    let total: f64 = pi.sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::Eigensolve("stationary distribution has zero mass".into()));
    }
    pi /= total;
    Ok(pi)
}

/// All eigenvalues of a real square matrix, sorted by descending real part,
/// ties broken by descending imaginary magnitude.
pub fn eigenvalues_by_real_part(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let k = m.nrows();
    if k == 0 || m.ncols() != k {
        return Err(Error::ShapeMismatch("eigenvalue input must be square".into()));
    }
    let schur: Schur<f64, Dyn> = Schur::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigensolve("schur decomposition did not converge".into()))?;
    let mut eigs: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| {
        b.re.total_cmp(&a.re)
            .then_with(|| b.im.abs().total_cmp(&a.im.abs()))
    });
    Ok(eigs)
}

/// Real part of the second-largest eigenvalue (by real part).
pub fn second_eigenvalue_real(m: &DMatrix<f64>) -> Result<f64> {
    let eigs = eigenvalues_by_real_part(m)?;
    if eigs.len() < 2 {
        return Err(Error::InvalidInput("need at least a 2×2 matrix".into()));
    }
    Ok(eigs[1].re)
}

/// Cholesky factorization of a symmetric positive-definite matrix.
pub fn spd_cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::Eigensolve("matrix is not positive definite".into()))
}

/// log det of a symmetric positive-definite matrix via Cholesky.
pub fn spd_log_determinant(m: &DMatrix<f64>) -> Result<f64> {
    let chol = spd_cholesky(m)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Pseudoinverse of a symmetric matrix with the spectral cutoff
/// `max|λ| · dim · ε_machine`; eigenvalues below the cutoff are dropped.
pub fn symmetric_pseudoinverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(Error::ShapeMismatch("pseudoinverse input must be square".into()));
    }
    let eig = m.clone().symmetric_eigen();
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cutoff = max_abs * d as f64 * f64::EPSILON;
    let inv_diag = DVector::from_iterator(
        d,
        eig.eigenvalues
            .iter()
            .map(|&l| if l.abs() > cutoff { 1.0 / l } else { 0.0 }),
    );
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for j in 0..d {
        scaled.column_mut(j).scale_mut(inv_diag[j]);
    }
    let mut pinv = scaled * v.transpose();
    // kill rounding skew so quadratic forms stay exactly symmetric
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (pinv[(i, j)] + pinv[(j, i)]);
            pinv[(i, j)] = s;
            pinv[(j, i)] = s;
        }
    }
    Ok(pinv)
}

/// Symmetric square root of a PSD matrix; eigenvalues in [−1e−10, 0) are
/// clipped to zero, more negative values are an error.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    if m.ncols() != d {
        return Err(Error::ShapeMismatch("sqrt input must be square".into()));
    }
    let eig = m.clone().symmetric_eigen();
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l < -1e-10) {
        return Err(Error::InvalidInput(format!(
            "matrix is not positive semidefinite (eigenvalue {bad})"
        )));
    }
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for j in 0..d {
        scaled.column_mut(j).scale_mut(eig.eigenvalues[j].max(0.0).sqrt());
    }
    Ok(scaled * v.transpose())
}

/// Check symmetry within an absolute tolerance.
pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return false;
            }
        }
    }
    true
}

/// ‖A − B‖∞→∞, the maximum absolute row sum of the difference.
pub fn max_row_sum_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch("matrix difference".into()));
    }
    Ok((0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| (a[(i, j)] - b[(i, j)]).abs()).sum())
        .fold(0.0, f64::max))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic, well-mixed sub-seed for stream `index` of a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}
