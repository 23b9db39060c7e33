//! Closed-form population formulas for the balanced Gaussian snapshot model:
//! kernel affinities, the coarse class-transition chain, stationary leakage,
//! homogeneous spectra, tilted local moments, and the unequal-covariance
//! affinity extension.
//!
//! All quadratic forms go through symmetric positive-definite solves and the
//! log-determinant through a Cholesky factorization; matrices are never
//! inverted explicitly.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Balanced Gaussian class-conditional model: K class means with one shared
/// covariance. The unequal-covariance extension is exposed through
/// [`unequal_covariance_affinity`], which takes per-class covariances
/// directly.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    means: DMatrix<f64>,      // K×d
    covariance: DMatrix<f64>, // d×d, symmetric PSD
}

fn validate_covariance(cov: &DMatrix<f64>, dim: usize) -> Result<()> {
    if cov.nrows() != dim || cov.ncols() != dim {
        return Err(Error::ShapeMismatch(format!(
            "covariance is {}×{}, expected {dim}×{dim}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if !linalg::is_symmetric(cov, 1e-12) {
        return Err(Error::InvalidInput("covariance must be symmetric".into()));
    }
    let eigs = cov.clone().symmetric_eigen().eigenvalues;
    if let Some(&bad) = eigs.iter().find(|&&l| l < -1e-10) {
        return Err(Error::InvalidInput(format!(
            "covariance has negative eigenvalue {bad}"
        )));
    }
    Ok(())
}

impl GaussianModel {
    pub fn new(means: DMatrix<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if means.nrows() == 0 || means.ncols() == 0 {
            return Err(Error::InvalidInput("model needs at least one mean".into()));
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("class mean".into()));
        }
        validate_covariance(&covariance, means.ncols())?;
        Ok(Self { means, covariance })
    }

    pub fn num_classes(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn mean(&self, a: usize) -> DVector<f64> {
        self.means.row(a).transpose()
    }

    /// Δ^{(a,b)} = μ_b − μ_a.
    pub fn mean_difference(&self, a: usize, b: usize) -> DVector<f64> {
        self.mean(b) - self.mean(a)
    }

    fn check_class(&self, a: usize) -> Result<()> {
        if a >= self.num_classes() {
            return Err(Error::InvalidInput(format!(
                "class {a} out of range for {} classes",
                self.num_classes()
            )));
        }
        Ok(())
    }
}

fn check_bandwidth(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive and finite, got {epsilon}"
        )));
    }
    Ok(())
}

/// Cholesky of εI + Σ.
fn regularized_cholesky(model: &GaussianModel, epsilon: f64) -> Result<Cholesky<f64, Dyn>> {
    let mut m = model.covariance.clone();
    for i in 0..model.dim() {
        m[(i, i)] += epsilon;
    }
    linalg::spd_cholesky(&m)
}

/// Regularized Mahalanobis separation matrix
/// c_ab = ¼ (μ_a−μ_b)ᵀ (εI+Σ)⁻¹ (μ_a−μ_b), with a zero diagonal.
pub fn population_separation(model: &GaussianModel, epsilon: f64) -> Result<DMatrix<f64>> {
    check_bandwidth(epsilon)?;
    let chol = regularized_cholesky(model, epsilon)?;
    let k = model.num_classes();
    let mut c = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let delta = model.mean_difference(a, b);
            let solved = chol.solve(&delta);
            let v = 0.25 * delta.dot(&solved);
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    Ok(c)
}

/// Population kernel affinities: α_ab = α₀ e^{−c_ab} with
/// α₀ = det(I + Σ/ε)^{−1/2}. Returns (α₀, α matrix); the diagonal is α₀.
pub fn population_affinity(model: &GaussianModel, epsilon: f64) -> Result<(f64, DMatrix<f64>)> {
    check_bandwidth(epsilon)?;
    let d = model.dim();
    let mut m = &model.covariance / epsilon;
    for i in 0..d {
        m[(i, i)] += 1.0;
    }
    let alpha0 = (-0.5 * linalg::spd_log_determinant(&m)?).exp();
    let c = population_separation(model, epsilon)?;
    let alpha = c.map(|v| alpha0 * (-v).exp());
    Ok((alpha0, alpha))
}

/// Coarse population chain with its stationary law and stationary leakage.
#[derive(Debug, Clone)]
pub struct PopulationChain {
    pub transition: DMatrix<f64>,
    pub stationary: DVector<f64>,
    pub leakage: f64,
}

/// Row-normalize a symmetric positive affinity matrix into the kernel-overlap
/// chain T_ab = α_ab / Σ_r α_ar. The chain is reversible with stationary law
/// π_a ∝ Σ_r α_ar; leakage is its stationary off-diagonal mass. Scaling all
/// affinities by a common constant leaves the chain unchanged.
pub fn kernel_overlap_chain(affinities: &DMatrix<f64>) -> Result<PopulationChain> {
    let k = affinities.nrows();
    if k == 0 || affinities.ncols() != k {
        return Err(Error::ShapeMismatch("affinity matrix must be square".into()));
    }
    if !linalg::is_symmetric(affinities, 1e-9) {
        return Err(Error::InvalidInput("affinity matrix must be symmetric".into()));
    }
    if affinities.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "affinities must be strictly positive and finite".into(),
        ));
    }
    let row_mass: DVector<f64> = DVector::from_iterator(k, (0..k).map(|a| affinities.row(a).sum()));
    let total: f64 = row_mass.sum();
    let mut transition = affinities.clone();
    for a in 0..k {
        transition.row_mut(a).scale_mut(1.0 / row_mass[a]);
    }
    let stationary = &row_mass / total;
    let off_diag: f64 = (0..k)
        .map(|a| {
            (0..k)
                .filter(|&b| b != a)
                .map(|b| affinities[(a, b)])
                .sum::<f64>()
        })
        .sum();
    let leakage = off_diag / total;
    Ok(PopulationChain {
        transition,
        stationary,
        leakage,
    })
}

/// Coarse population chain from a separation matrix: w_ab = e^{−c_ab},
/// T_ab = w_ab / Σ_r w_ar, π_a ∝ Σ_r w_ar, and stationary leakage
/// Σ_{a≠b} w_ab / (K + Σ_{a≠b} w_ab).
pub fn population_coarse_chain(c: &DMatrix<f64>) -> Result<PopulationChain> {
    let k = c.nrows();
    if k == 0 || c.ncols() != k {
        return Err(Error::ShapeMismatch("separation matrix must be square".into()));
    }
    if !linalg::is_symmetric(c, 1e-9) {
        return Err(Error::InvalidInput("separation matrix must be symmetric".into()));
    }
    if (0..k).any(|a| c[(a, a)] != 0.0) {
        return Err(Error::InvalidInput("separation diagonal must be zero".into()));
    }
    if c.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput("separations must be nonnegative".into()));
    }
    kernel_overlap_chain(&c.map(|v| (-v).exp()))
}

/// Closed forms for the homogeneous case c_ab = c for all a ≠ b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomogeneousPrediction {
    pub leakage: f64,
    pub lambda2: f64,
    pub gap: f64,
}

/// Homogeneous-separation closed forms:
/// leakage = (K−1)e^{−c} / (1+(K−1)e^{−c}), λ₂ = (1−e^{−c}) / (1+(K−1)e^{−c}),
/// gap = K / (e^c + K − 1).
pub fn homogeneous_predictions(c: f64, num_classes: usize) -> Result<HomogeneousPrediction> {
    if num_classes < 2 {
        return Err(Error::InvalidInput("need at least two classes".into()));
    }
    if c < 0.0 || !c.is_finite() {
        return Err(Error::InvalidInput(format!(
            "homogeneous separation must be nonnegative, got {c}"
        )));
    }
    let k = num_classes as f64;
    let w = (-c).exp();
    let denom = 1.0 + (k - 1.0) * w;
    Ok(HomogeneousPrediction {
        leakage: (k - 1.0) * w / denom,
        lambda2: (1.0 - w) / denom,
        gap: k / (c.exp() + k - 1.0),
    })
}

/// Mean and covariance of the kernel-tilted displacement law from class `a`
/// to class `b`: δ ~ N(Δ, 2Σ) reweighted by e^{−‖δ‖²/4ε} is Gaussian with
/// m = (I+Σ/ε)⁻¹Δ and V = 2Σ(I+Σ/ε)⁻¹.
pub fn tilted_moments(
    model: &GaussianModel,
    epsilon: f64,
    a: usize,
    b: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_bandwidth(epsilon)?;
    model.check_class(a)?;
    model.check_class(b)?;
    let d = model.dim();
    let mut base = &model.covariance / epsilon;
    for i in 0..d {
        base[(i, i)] += 1.0;
    }
    let chol = linalg::spd_cholesky(&base)?;
    let m = chol.solve(&model.mean_difference(a, b));
    let mut v = chol.solve(&model.covariance) * 2.0;
    // (I+Σ/ε)⁻¹ and Σ commute, so V is symmetric up to rounding
    for i in 0..d {
        for j in (i + 1)..d {
            let s = 0.5 * (v[(i, j)] + v[(j, i)]);
            v[(i, j)] = s;
            v[(j, i)] = s;
        }
    }
    Ok((m, v))
}

/// Mean-field coordinate Γ-Gram matrix for a point of class `a`:
/// G_a = (1/ε) Σ(I+Σ/ε)⁻¹ + (1/2ε) Σ_b P̄_ab m_ab m_abᵀ, summing over all b
/// (the b = a term has m = 0).
pub fn meanfield_gamma_gram(model: &GaussianModel, epsilon: f64, a: usize) -> Result<DMatrix<f64>> {
    check_bandwidth(epsilon)?;
    model.check_class(a)?;
    let k = model.num_classes();
    let (_, v) = tilted_moments(model, epsilon, a, a)?;
    let mut gram = v / (2.0 * epsilon);
    if k >= 2 {
        let chain = population_coarse_chain(&population_separation(model, epsilon)?)?;
        for b in 0..k {
            if b == a {
                continue;
            }
            let (m, _) = tilted_moments(model, epsilon, a, b)?;
            gram.ger(chain.transition[(a, b)] / (2.0 * epsilon), &m, &m, 1.0);
        }
    }
    Ok(gram)
}

/// Mean-field squared soft diffusion radius for class `a`:
/// E[ρ²] = 2 tr(Σ(I+Σ/ε)⁻¹) + Σ_b P̄_ab ‖(I+Σ/ε)⁻¹Δ^{(a,b)}‖².
pub fn meanfield_soft_radius(model: &GaussianModel, epsilon: f64, a: usize) -> Result<f64> {
    check_bandwidth(epsilon)?;
    model.check_class(a)?;
    let k = model.num_classes();
    let (_, v) = tilted_moments(model, epsilon, a, a)?;
    let mut radius = v.trace();
    if k >= 2 {
        let chain = population_coarse_chain(&population_separation(model, epsilon)?)?;
        for b in 0..k {
            if b == a {
                continue;
            }
            let (m, _) = tilted_moments(model, epsilon, a, b)?;
            radius += chain.transition[(a, b)] * m.norm_squared();
        }
    }
    Ok(radius)
}

/// Kernel affinity between classes with unequal covariances:
/// α = det(I + (Σ_a+Σ_b)/2ε)^{−1/2}
///     · exp(−(1/4ε) Δᵀ (I + (Σ_a+Σ_b)/2ε)⁻¹ Δ).
/// Reduces exactly to the shared-covariance affinity when Σ_a = Σ_b.
pub fn unequal_covariance_affinity(
    means: &DMatrix<f64>,
    covariances: &[DMatrix<f64>],
    epsilon: f64,
    a: usize,
    b: usize,
) -> Result<f64> {
    check_bandwidth(epsilon)?;
    let k = means.nrows();
    let d = means.ncols();
    if covariances.len() != k {
        return Err(Error::ShapeMismatch(format!(
            "{} covariances for {k} classes",
            covariances.len()
        )));
    }
    if a >= k || b >= k {
        return Err(Error::InvalidInput(format!("class pair ({a},{b}) out of range")));
    }
    for cov in [&covariances[a], &covariances[b]] {
        validate_covariance(cov, d)?;
    }
    let mut m = (&covariances[a] + &covariances[b]) / (2.0 * epsilon);
    for i in 0..d {
        m[(i, i)] += 1.0;
    }
    let chol = linalg::spd_cholesky(&m)?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let delta = (means.row(b) - means.row(a)).transpose();
    let quad = delta.dot(&chol.solve(&delta));
    Ok((-0.5 * log_det - quad / (4.0 * epsilon)).exp())
}

/// Full population prediction for one (model, ε): separations, affinities,
/// coarse chain, stationary leakage, and the homogeneous closed forms when
/// all off-diagonal separations agree within 1e−9.
#[derive(Debug, Clone)]
pub struct PopulationPrediction {
    pub c_matrix: DMatrix<f64>,
    pub alpha0: f64,
    pub transition: DMatrix<f64>,
    pub stationary: DVector<f64>,
    pub stationary_leakage: f64,
    pub homogeneous: Option<HomogeneousPrediction>,
}

pub fn evaluate_population(model: &GaussianModel, epsilon: f64) -> Result<PopulationPrediction> {
    let c = population_separation(model, epsilon)?;
    let (alpha0, _) = population_affinity(model, epsilon)?;
    let chain = population_coarse_chain(&c)?;
    let k = model.num_classes();
    let homogeneous = if k >= 2 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut total = 0.0;
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    lo = lo.min(c[(a, b)]);
                    hi = hi.max(c[(a, b)]);
                    total += c[(a, b)];
                }
            }
        }
        if hi - lo <= 1e-9 {
            Some(homogeneous_predictions(total / (k * (k - 1)) as f64, k)?)
        } else {
            None
        }
    } else {
        None
    };
    Ok(PopulationPrediction {
        c_matrix: c,
        alpha0,
        transition: chain.transition,
        stationary: chain.stationary,
        stationary_leakage: chain.leakage,
        homogeneous,
    })
}
