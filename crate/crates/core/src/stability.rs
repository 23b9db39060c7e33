//! Perturbation experiments contrasting operator and hard-graph observables,
//! plus numeric checks of the operator Lipschitz bound
//! ‖P(Z)−P(Z̃)‖∞→∞ ≤ (4R/ε)·exp(R²/ε)·‖Z−Z̃‖∞ and its ingredient lemmas.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{FeatureCloud, LabelVector};
use crate::error::{Error, Result};
use crate::hardgraph::{
    build_mutual_knn, graph_label_disagreement, graph_leakage, graph_local_radius,
};
use crate::linalg;
use crate::observables::{coarse_chain, label_boundary_energy, soft_radius};
use crate::operator::{
    build_operator, remove_self_loops, squared_distance_matrix, DEFAULT_MASS_FLOOR,
};

/// Protocol of one stability run. The bandwidth is fixed from the
/// unperturbed snapshot by the caller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationConfig {
    pub sigma: f64,
    pub num_perturbations: usize,
    pub seed: u64,
    pub k: usize,
    pub epsilon: f64,
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidInput("sigma must be positive".into()));
        }
        if self.num_perturbations < 2 {
            return Err(Error::InvalidInput(
                "need at least two perturbations for a standard deviation".into(),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("bandwidth must be positive".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Baseline, mean, and spread of one observable across perturbations.
/// `relative_std` is std/|mean|, reported as the absolute std when |mean|
/// is below 1e−12.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservableStability {
    pub name: &'static str,
    pub baseline: f64,
    pub mean: f64,
    pub std: f64,
    pub relative_std: f64,
}

/// Stability of the three operator observables and their three hard-graph
/// counterparts, in fixed order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub observables: Vec<ObservableStability>,
}

pub const OBSERVABLE_NAMES: [&str; 6] = [
    "operator_leakage",
    "label_boundary_energy",
    "soft_radius_rms",
    "graph_leakage",
    "graph_label_disagreement",
    "graph_local_radius",
];

/// Additive Gaussian perturbation z̃ = z + σξ with ξ ~ N(0, I), deterministic
/// in the seed.
pub fn perturb_cloud(cloud: &FeatureCloud, sigma: f64, seed: u64) -> Result<FeatureCloud> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput("sigma must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = cloud.points().clone();
    for i in 0..points.nrows() {
        for j in 0..points.ncols() {
            let noise: f64 = StandardNormal.sample(&mut rng);
            points[(i, j)] += sigma * noise;
        }
    }
    FeatureCloud::new(points)
}

/// The six observables of one snapshot under the stability protocol:
/// stationary operator leakage, one-hot boundary energy, soft radius rms,
/// then graph leakage, label disagreement, and local radius at `k`.
fn observable_vector(
    cloud: &FeatureCloud,
    labels: &LabelVector,
    epsilon: f64,
    k: usize,
) -> Result<[f64; 6]> {
    let op = build_operator(cloud, epsilon)?;
    let chain = coarse_chain(&remove_self_loops(&op, DEFAULT_MASS_FLOOR), labels)?;
    let energy = label_boundary_energy(&op, labels)?;
    let (_, rms) = soft_radius(&op, cloud)?;
    let graph = build_mutual_knn(cloud, k)?;
    Ok([
        chain.stationary_leakage(),
        energy,
        rms,
        graph_leakage(&graph, labels)?,
        graph_label_disagreement(&graph, labels)?,
        graph_local_radius(&graph, cloud)?.1,
    ])
}

/// Perturb the snapshot `num_perturbations` times, recompute the six
/// observables per replica at the fixed bandwidth, and aggregate
/// baseline/mean/std/relative-std per observable. Degenerate self-loop rows
/// in any replica abort with the replica index in the error.
pub fn run_stability_experiment(
    cloud: &FeatureCloud,
    labels: &LabelVector,
    config: &PerturbationConfig,
) -> Result<StabilityReport> {
    config.validate()?;
    if labels.len() != cloud.n() {
        return Err(Error::ShapeMismatch("labels vs points".into()));
    }
    if config.k >= cloud.n() {
        return Err(Error::InvalidInput(format!(
            "k={} too large for n={}",
            config.k,
            cloud.n()
        )));
    }
    let baseline = observable_vector(cloud, labels, config.epsilon, config.k)?;

    let replicas: Vec<[f64; 6]> = (0..config.num_perturbations)
        .into_par_iter()
        .map(|r| {
            let seed = linalg::derive_seed(config.seed, r as u64);
            let perturbed = perturb_cloud(cloud, config.sigma, seed)?;
            observable_vector(&perturbed, labels, config.epsilon, config.k).map_err(|e| {
                Error::InvalidInput(format!("perturbation {r}: {e}"))
            })
        })
        .collect::<Result<_>>()?;

    let reps = config.num_perturbations as f64;
    let observables = (0..6)
        .map(|idx| {
            let values: Vec<f64> = replicas.iter().map(|v| v[idx]).collect();
            let mean = values.iter().sum::<f64>() / reps;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1.0);
            let std = var.sqrt();
            let relative_std = if mean.abs() < 1e-12 { std } else { std / mean.abs() };
            ObservableStability {
                name: OBSERVABLE_NAMES[idx],
                baseline: baseline[idx],
                mean,
                std,
                relative_std,
            }
        })
        .collect();
    Ok(StabilityReport { observables })
}

/// One evaluation of the operator Lipschitz bound on a cloud pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzCheck {
    /// ‖P(Z) − P(Z̃)‖∞→∞.
    pub lhs: f64,
    /// (4R/ε)·exp(R²/ε)·‖Z−Z̃‖∞ with R from the union of both clouds.
    pub rhs: f64,
    pub radius: f64,
    pub displacement: f64,
    pub satisfied: bool,
}

pub fn lipschitz_bound_check(
    cloud: &FeatureCloud,
    perturbed: &FeatureCloud,
    epsilon: f64,
) -> Result<LipschitzCheck> {
    let displacement = cloud.max_displacement(perturbed)?;
    let radius = cloud.max_norm().max(perturbed.max_norm());
    let p = build_operator(cloud, epsilon)?;
    let p_tilde = build_operator(perturbed, epsilon)?;
    let lhs = linalg::max_row_sum_diff(p.transition(), p_tilde.transition())?;
    let rhs = (4.0 * radius / epsilon) * (radius * radius / epsilon).exp() * displacement;
    Ok(LipschitzCheck {
        lhs,
        rhs,
        radius,
        displacement,
        satisfied: lhs <= rhs * (1.0 + 1e-9),
    })
}

/// Entrywise checks of the squared-distance (8R) and kernel (2R/ε)
/// perturbation lemmas.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub distance_lhs_max: f64,
    pub distance_rhs: f64,
    pub distance_ok: bool,
    pub kernel_lhs_max: f64,
    pub kernel_rhs: f64,
    pub kernel_ok: bool,
}

pub fn lemma_bounds_check(
    cloud: &FeatureCloud,
    perturbed: &FeatureCloud,
    epsilon: f64,
) -> Result<LemmaCheck> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("bandwidth must be positive".into()));
    }
    let displacement = cloud.max_displacement(perturbed)?;
    let radius = cloud.max_norm().max(perturbed.max_norm());
    let n = cloud.n();
    let d2 = squared_distance_matrix(cloud);
    let d2_tilde = squared_distance_matrix(perturbed);
    let scale = -1.0 / (4.0 * epsilon);

    let mut distance_lhs_max = 0.0f64;
    let mut kernel_lhs_max = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let dd = (d2[(i, j)] - d2_tilde[(i, j)]).abs();
            distance_lhs_max = distance_lhs_max.max(dd);
            let kw = ((d2[(i, j)] * scale).exp() - (d2_tilde[(i, j)] * scale).exp()).abs();
            kernel_lhs_max = kernel_lhs_max.max(kw);
        }
    }
    let distance_rhs = 8.0 * radius * displacement;
    let kernel_rhs = 2.0 * radius / epsilon * displacement;
    let slack = 1.0 + 1e-9;
    Ok(LemmaCheck {
        distance_lhs_max,
        distance_rhs,
        distance_ok: distance_lhs_max <= distance_rhs * slack,
        kernel_lhs_max,
        kernel_rhs,
        kernel_ok: kernel_lhs_max <= kernel_rhs * slack,
    })
}

/// With-self-loop coarse class transition (1/n_a)·Σ_{i∈C_a}Σ_{j∈C_b} P_ij,
/// the form whose entries the observable-stability corollary bounds by the
/// operator Lipschitz constant.
pub fn coarse_transition_with_loops(
    transition: &DMatrix<f64>,
    labels: &LabelVector,
) -> Result<DMatrix<f64>> {
    let n = transition.nrows();
    if labels.len() != n {
        return Err(Error::ShapeMismatch("labels vs operator".into()));
    }
    labels.require_class_size(1)?;
    let k = labels.num_classes();
    let mut t = DMatrix::zeros(k, k);
    let counts = labels.class_counts();
    for i in 0..n {
        for j in 0..n {
            t[(labels.label(i), labels.label(j))] += transition[(i, j)];
        }
    }
    for a in 0..k {
        t.row_mut(a).scale_mut(1.0 / counts[a] as f64);
    }
    Ok(t)
}
