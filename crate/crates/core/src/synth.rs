//! Synthetic balanced Gaussian snapshots and the bridge-validation
//! experiment: sample simplex-mean mixtures over a (separation × bandwidth ×
//! trial) grid and compare empirical operator observables against the
//! population predictions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{population_coarse_chain, population_separation, GaussianModel};
use crate::data::{FeatureCloud, LabelVector};
use crate::error::{Error, Result};
use crate::linalg;
use crate::observables::{coarse_chain, empirical_separation, DEFAULT_RIDGE};
use crate::operator::{build_operator, remove_self_loops, DEFAULT_MASS_FLOOR};

/// Configuration of the synthetic bridge-validation grid. Each
/// (separation, bandwidth, trial) cell samples a fresh snapshot from its own
/// RNG stream, so cells are independently reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub separations: Vec<f64>,
    pub sigma2: f64,
    pub spike: f64,
    pub bandwidths: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// The reference grid: K=4 classes in dimension 16, σ² = 1, spike 0.5,
    /// 250 samples per class, separations {0.8, 1.4, 2.0, 2.8, 3.8},
    /// bandwidths {0.5, 1, 2, 4}, three trials per configuration.
    pub fn paper_grid(seed: u64) -> Self {
        Self {
            classes: 4,
            dim: 16,
            samples_per_class: 250,
            separations: vec![0.8, 1.4, 2.0, 2.8, 3.8],
            sigma2: 1.0,
            spike: 0.5,
            bandwidths: vec![0.5, 1.0, 2.0, 4.0],
            trials: 3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidInput("need at least two classes".into()));
        }
        if self.classes > self.dim + 1 {
            return Err(Error::InvalidInput(format!(
                "{} classes do not fit a simplex in dimension {}",
                self.classes, self.dim
            )));
        }
        if self.samples_per_class < 1 || self.trials < 1 {
            return Err(Error::InvalidInput("counts must be at least 1".into()));
        }
        if self.separations.is_empty() || self.bandwidths.is_empty() {
            return Err(Error::InvalidInput("empty separation or bandwidth grid".into()));
        }
        if self.separations.iter().any(|&s| s < 0.0 || !s.is_finite()) {
            return Err(Error::InvalidInput("separations must be nonnegative".into()));
        }
        if self.bandwidths.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidInput("bandwidths must be positive".into()));
        }
        if self.sigma2 < 0.0 || self.spike < 0.0 {
            return Err(Error::InvalidInput("variances must be nonnegative".into()));
        }
        Ok(())
    }

    fn cell_stream(&self, sep_index: usize, bandwidth_index: usize, trial: usize) -> u64 {
        ((sep_index * self.bandwidths.len() + bandwidth_index) * self.trials + trial) as u64 + 1
    }
}

/// K vertices of a regular simplex centered at the origin, embedded in the
/// first K−1 coordinates of R^d and scaled so every pairwise distance equals
/// `separation`. Coordinates come from the Helmert basis of the hyperplane
/// orthogonal to 1, which keeps the construction exact and deterministic.
pub fn simplex_means(classes: usize, dim: usize, separation: f64) -> Result<DMatrix<f64>> {
    if classes < 1 {
        return Err(Error::InvalidInput("need at least one class".into()));
    }
    if classes > dim + 1 {
        return Err(Error::InvalidInput(format!(
            "{classes} classes do not fit a simplex in dimension {dim}"
        )));
    }
    if separation < 0.0 || !separation.is_finite() {
        return Err(Error::InvalidInput("separation must be nonnegative".into()));
    }
    let mut means = DMatrix::zeros(classes, dim);
    // unit vertices e_a in R^K have pairwise distance √2 and project to the
    // hyperplane orthogonal to 1 without changing differences
    let scale = separation / 2f64.sqrt();
    for r in 1..classes {
        let norm = (r as f64 * (r + 1) as f64).sqrt();
        for a in 0..classes {
            // Helmert row r applied to e_a
            let h = if a < r {
                1.0 / norm
            } else if a == r {
                -(r as f64) / norm
            } else {
                0.0
            };
            means[(a, r - 1)] = scale * h;
        }
    }
    Ok(means)
}

/// Shared covariance σ²I + spike·e₁e₁ᵀ.
pub fn spiked_covariance(dim: usize, sigma2: f64, spike: f64) -> DMatrix<f64> {
    let mut cov = DMatrix::identity(dim, dim) * sigma2;
    cov[(0, 0)] += spike;
    cov
}

/// The population model for one separation of the grid.
pub fn gaussian_model(config: &SynthConfig, separation: f64) -> Result<GaussianModel> {
    let means = simplex_means(config.classes, config.dim, separation)?;
    GaussianModel::new(means, spiked_covariance(config.dim, config.sigma2, config.spike))
}

/// Draw one balanced snapshot from `model`: class blocks in order, points
/// sampled as μ_a + A ξ with A the symmetric square root of Σ.
pub fn sample_cloud(
    model: &GaussianModel,
    samples_per_class: usize,
    rng: &mut impl Rng,
) -> Result<(FeatureCloud, LabelVector)> {
    let k = model.num_classes();
    let d = model.dim();
    let factor = linalg::symmetric_sqrt(model.covariance())?;
    let n = k * samples_per_class;
    let mut points = DMatrix::zeros(n, d);
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for a in 0..k {
        let mean = model.mean(a);
        for _ in 0..samples_per_class {
            let noise = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let point = &mean + &factor * noise;
            for j in 0..d {
                points[(row, j)] = point[j];
            }
            labels.push(a);
            row += 1;
        }
    }
    Ok((FeatureCloud::new(points)?, LabelVector::new(labels, k)?))
}

/// Sample the snapshot of one grid cell, deterministically in
/// (seed, separation index, bandwidth index, trial).
pub fn sample_gaussian_snapshot(
    config: &SynthConfig,
    sep_index: usize,
    bandwidth_index: usize,
    trial: usize,
) -> Result<(FeatureCloud, LabelVector, GaussianModel)> {
    config.validate()?;
    if sep_index >= config.separations.len()
        || bandwidth_index >= config.bandwidths.len()
        || trial >= config.trials
    {
        return Err(Error::InvalidInput("grid cell out of range".into()));
    }
    let model = gaussian_model(config, config.separations[sep_index])?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.cell_stream(sep_index, bandwidth_index, trial));
    let (cloud, labels) = sample_cloud(&model, config.samples_per_class, &mut rng)?;
    Ok((cloud, labels, model))
}

/// One grid cell of the validation experiment: empirical observables from a
/// sampled snapshot next to the population predictions of the true model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgeValidationRow {
    pub separation: f64,
    pub bandwidth: f64,
    pub trial: usize,
    pub empirical_mean_separation: f64,
    pub empirical_leakage: f64,
    pub empirical_gap: f64,
    pub theory_mean_separation: f64,
    pub theory_leakage: f64,
    pub theory_gap: f64,
}

fn mean_offdiagonal(m: &DMatrix<f64>) -> f64 {
    let k = m.nrows();
    if k < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for a in 0..k {
        for b in 0..k {
            if a != b {
                total += m[(a, b)];
            }
        }
    }
    total / (k * (k - 1)) as f64
}

fn run_cell(
    config: &SynthConfig,
    sep_index: usize,
    bandwidth_index: usize,
    trial: usize,
) -> Result<BridgeValidationRow> {
    let separation = config.separations[sep_index];
    let bandwidth = config.bandwidths[bandwidth_index];
    let (cloud, labels, model) =
        sample_gaussian_snapshot(config, sep_index, bandwidth_index, trial)?;

    let op = build_operator(&cloud, bandwidth)?;
    let chain = coarse_chain(&remove_self_loops(&op, DEFAULT_MASS_FLOOR), &labels)?;
    let separation_matrix = empirical_separation(&cloud, &labels, bandwidth, DEFAULT_RIDGE)?;

    let theory_c = population_separation(&model, bandwidth)?;
    let theory_chain = population_coarse_chain(&theory_c)?;
    let theory_gap = 1.0 - linalg::second_eigenvalue_real(&theory_chain.transition)?;

    let row = BridgeValidationRow {
        separation,
        bandwidth,
        trial,
        empirical_mean_separation: separation_matrix.mean_separation(),
        empirical_leakage: chain.stationary_leakage(),
        empirical_gap: chain.coarse_gap()?,
        theory_mean_separation: mean_offdiagonal(&theory_c),
        theory_leakage: theory_chain.leakage,
        theory_gap,
    };
    let fields = [
        row.empirical_mean_separation,
        row.empirical_leakage,
        row.empirical_gap,
        row.theory_mean_separation,
        row.theory_leakage,
        row.theory_gap,
    ];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "validation row (sep {separation}, ε {bandwidth}, trial {trial})"
        )));
    }
    Ok(row)
}

/// Run the full grid in deterministic order (separations outer, then
/// bandwidths, then trials). Cells are independent and run in parallel.
pub fn run_bridge_validation(config: &SynthConfig) -> Result<Vec<BridgeValidationRow>> {
    config.validate()?;
    let mut cells = Vec::new();
    for si in 0..config.separations.len() {
        for bi in 0..config.bandwidths.len() {
            for trial in 0..config.trials {
                cells.push((si, bi, trial));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(si, bi, trial)| run_cell(config, si, bi, trial))
        .collect()
}

/// CSV rendering of the validation table (header plus one line per row).
pub fn validation_table_csv(rows: &[BridgeValidationRow]) -> String {
    let mut out = String::from(
        "separation,bandwidth,trial,empirical_mean_separation,empirical_leakage,empirical_gap,theory_mean_separation,theory_leakage,theory_gap\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.separation,
            r.bandwidth,
            r.trial,
            r.empirical_mean_separation,
            r.empirical_leakage,
            r.empirical_gap,
            r.theory_mean_separation,
            r.theory_leakage,
            r.theory_gap
        ));
    }
    out
}
