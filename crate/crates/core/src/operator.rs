//! Diffusion Markov operator of a feature cloud.
//!
//! For a bandwidth ε > 0 the kernel is W_ij = exp(−‖z_i−z_j‖²/(4ε)), the
//! degrees are D_i = Σ_j W_ij, and the operator is the row-stochastic
//! P = D⁻¹W with generator L = (P − I)/ε. Kernel entries are never
//! thresholded to zero: the stability bounds rely on strictly positive
//! entries. Dense n×n storage; practical ceiling around n ≈ 10,000.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::FeatureCloud;
use crate::error::{Error, Result};

/// Points used for the median-bandwidth estimate when the snapshot is larger.
pub const DEFAULT_SUBSAMPLE_CAP: usize = 2000;

/// Minimum off-diagonal row mass for a valid self-loop-removed row. Only
/// numerically isolated points fall below this.
pub const DEFAULT_MASS_FLOOR: f64 = 1e-12;

/// Full pairwise squared-distance matrix, evaluated as
/// ‖z_i‖² + ‖z_j‖² − 2⟨z_i,z_j⟩ via one Gram product, clamped at 0 to kill
/// negative rounding. Exactly symmetric with a zero diagonal.
pub fn squared_distance_matrix(cloud: &FeatureCloud) -> DMatrix<f64> {
    let n = cloud.n();
    let pts = cloud.points();
    let mut gram = pts * pts.transpose();
    let sq: Vec<f64> = (0..n).map(|i| gram[(i, i)]).collect();
    for i in 0..n {
        gram[(i, i)] = 0.0;
        for j in (i + 1)..n {
            let d2 = (sq[i] + sq[j] - 2.0 * gram[(i, j)]).max(0.0);
            gram[(i, j)] = d2;
            gram[(j, i)] = d2;
        }
    }
    gram
}

/// Median-heuristic bandwidth: ε = ¼ · median over distinct pairs i<j of
/// ‖z_i−z_j‖². Snapshots larger than `subsample_cap` points use a seeded
/// uniform subsample of that size; the median of an even count is the mean
/// of the two middle values.
pub fn median_bandwidth(cloud: &FeatureCloud, subsample_cap: usize, seed: u64) -> Result<f64> {
    if cloud.n() < 2 {
        return Err(Error::InvalidInput(
            "median bandwidth needs at least two points".into(),
        ));
    }
    if subsample_cap < 2 {
        return Err(Error::InvalidInput("subsample cap must be at least 2".into()));
    }
    let pts = cloud.points();
    let indices: Vec<usize> = if cloud.n() > subsample_cap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, cloud.n(), subsample_cap).into_vec()
    } else {
        (0..cloud.n()).collect()
    };

    let m = indices.len();
    let mut d2: Vec<f64> = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..m {
        for b in (a + 1)..m {
            d2.push((pts.row(indices[a]) - pts.row(indices[b])).norm_squared());
        }
    }
    d2.sort_by(f64::total_cmp);
    let mid = d2.len() / 2;
    let median = if d2.len() % 2 == 1 {
        d2[mid]
    } else {
        0.5 * (d2[mid - 1] + d2[mid])
    };
    if median <= 0.0 {
        return Err(Error::DegenerateBandwidth);
    }
    Ok(0.25 * median)
}

/// Row-stochastic Gaussian-kernel diffusion operator of one snapshot.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    kernel: DMatrix<f64>,
    degrees: DVector<f64>,
    transition: DMatrix<f64>,
    bandwidth: f64,
}

impl DiffusionOperator {
    pub fn n(&self) -> usize {
        self.transition.nrows()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Symmetric kernel W with unit diagonal.
    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// Degree vector D_i = Σ_j W_ij.
    pub fn degrees(&self) -> &DVector<f64> {
        &self.degrees
    }

    /// Row-stochastic transition matrix P = D⁻¹W.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// Generator L = (P − I)/ε; every row sums to zero.
    pub fn generator(&self) -> DMatrix<f64> {
        let mut l = self.transition.clone();
        for i in 0..self.n() {
            l[(i, i)] -= 1.0;
        }
        l / self.bandwidth
    }

    /// Symmetric conjugate H = D^{−1/2} W D^{−1/2}; shares P's spectrum.
    pub fn symmetric_conjugate(&self) -> DMatrix<f64> {
        let n = self.n();
        let inv_sqrt: Vec<f64> = self.degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = self.kernel[(i, i)] * inv_sqrt[i] * inv_sqrt[i];
            for j in (i + 1)..n {
                let v = self.kernel[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        h
    }

    #[cfg(test)]
    pub(crate) fn from_parts(
        kernel: DMatrix<f64>,
        degrees: DVector<f64>,
        transition: DMatrix<f64>,
        bandwidth: f64,
    ) -> Self {
        Self {
            kernel,
            degrees,
            transition,
            bandwidth,
        }
    }
}

/// Build the diffusion operator of `cloud` at bandwidth `epsilon`.
pub fn build_operator(cloud: &FeatureCloud, epsilon: f64) -> Result<DiffusionOperator> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive and finite, got {epsilon}"
        )));
    }
    let n = cloud.n();
    let mut kernel = squared_distance_matrix(cloud);
    let scale = -1.0 / (4.0 * epsilon);
    kernel.apply(|v| *v = (*v * scale).exp());

    let mut degrees = DVector::zeros(n);
    for i in 0..n {
        degrees[i] = kernel.row(i).sum();
    }
    let mut transition = kernel.clone();
    for i in 0..n {
        let inv = 1.0 / degrees[i];
        transition.row_mut(i).scale_mut(inv);
    }
    Ok(DiffusionOperator {
        kernel,
        degrees,
        transition,
        bandwidth: epsilon,
    })
}

/// Self-loop-removed transport operator Q: Q_ii = 0 and rows renormalized by
/// their off-diagonal mass. Rows whose off-diagonal mass falls below the
/// floor are flagged invalid and left all-zero.
#[derive(Debug, Clone)]
pub struct SelfLoopFreeOperator {
    transition: DMatrix<f64>,
    valid_rows: Vec<bool>,
    mass_floor: f64,
}

impl SelfLoopFreeOperator {
    pub fn n(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn valid_rows(&self) -> &[bool] {
        &self.valid_rows
    }

    pub fn mass_floor(&self) -> f64 {
        self.mass_floor
    }

    pub fn invalid_rows(&self) -> Vec<usize> {
        self.valid_rows
            .iter()
            .enumerate()
            .filter_map(|(i, &ok)| (!ok).then_some(i))
            .collect()
    }

    pub fn all_rows_valid(&self) -> bool {
        self.valid_rows.iter().all(|&ok| ok)
    }
}

/// Remove diagonal self-loops from `op` and renormalize each row.
pub fn remove_self_loops(op: &DiffusionOperator, mass_floor: f64) -> SelfLoopFreeOperator {
    let n = op.n();
    let p = op.transition();
    let mut q = DMatrix::zeros(n, n);
    let mut valid = vec![false; n];
    for i in 0..n {
        let mut off_mass = 0.0;
        for j in 0..n {
            if j != i {
                off_mass += p[(i, j)];
            }
        }
        if off_mass >= mass_floor {
            valid[i] = true;
            let inv = 1.0 / off_mass;
            for j in 0..n {
                if j != i {
                    q[(i, j)] = p[(i, j)] * inv;
                }
            }
        }
    }
    SelfLoopFreeOperator {
        transition: q,
        valid_rows: valid,
        mass_floor,
    }
}
