//! Empirical observables of a labeled diffusion operator: carré du champ,
//! label-boundary energy, leakage, coarse class transport, spectral gap,
//! separation matrices, and soft diffusion radii.

use nalgebra::{DMatrix, DVector};

use crate::data::{matrix_rows, FeatureCloud, LabelVector, ObservableReport};
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{
    build_operator, remove_self_loops, squared_distance_matrix, DiffusionOperator,
    SelfLoopFreeOperator,
};

/// Default ridge τ for the empirical separation matrix.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Discrete carré du champ: Γ(f,h)(i) = (1/2ε) Σ_j P_ij (f_j−f_i)(h_j−h_i).
pub fn gamma(op: &DiffusionOperator, f: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>> {
    let n = op.n();
    if f.len() != n || h.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "gamma inputs of length {} and {} for an operator on {n} points",
            f.len(),
            h.len()
        )));
    }
    let p = op.transition();
    let scale = 1.0 / (2.0 * op.bandwidth());
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += p[(i, j)] * (f[j] - f[i]) * (h[j] - h[i]);
        }
        out[i] = scale * acc;
    }
    Ok(out)
}

fn check_labels(op_n: usize, labels: &LabelVector) -> Result<()> {
    if labels.len() != op_n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {op_n} points",
            labels.len()
        )));
    }
    Ok(())
}

/// Cross-class transition mass Σ_i Σ_{y_j≠y_i} P_ij.
fn cross_class_mass(op: &DiffusionOperator, labels: &LabelVector) -> f64 {
    let p = op.transition();
    let n = op.n();
    let mut mass = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels.label(j) != labels.label(i) {
                mass += p[(i, j)];
            }
        }
    }
    mass
}

/// Node-averaged one-hot label-boundary Dirichlet energy,
/// (1/εn) Σ_i Σ_{y_j≠y_i} P_ij. Equals Σ_a mean Γ(g_a) for one-hot g_a.
pub fn label_boundary_energy(op: &DiffusionOperator, labels: &LabelVector) -> Result<f64> {
    check_labels(op.n(), labels)?;
    Ok(cross_class_mass(op, labels) / (op.bandwidth() * op.n() as f64))
}

/// Raw node-average cross-class leakage, (1/n) Σ_i Σ_{y_j≠y_i} P_ij.
pub fn raw_leakage(op: &DiffusionOperator, labels: &LabelVector) -> Result<f64> {
    check_labels(op.n(), labels)?;
    Ok(cross_class_mass(op, labels) / op.n() as f64)
}

/// K×K row-stochastic class-transition chain with its stationary law.
#[derive(Debug, Clone)]
pub struct CoarseChain {
    transition: DMatrix<f64>,
    stationary: DVector<f64>,
}

impl CoarseChain {
    /// Wrap a row-stochastic matrix, computing and checking the stationary
    /// distribution.
    pub fn from_transition(transition: DMatrix<f64>) -> Result<Self> {
        let k = transition.nrows();
        if k == 0 || transition.ncols() != k {
            return Err(Error::ShapeMismatch("coarse chain must be square".into()));
        }
        for i in 0..k {
            let row_sum: f64 = transition.row(i).sum();
            if (row_sum - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidInput(format!(
                    "coarse chain row {i} sums to {row_sum}"
                )));
            }
        }
        let stationary = linalg::stationary_distribution(&transition)?;
        let residual = (transition.transpose() * &stationary - &stationary).abs().sum();
        if residual > 1e-8 {
            return Err(Error::Eigensolve(format!(
                "stationary residual {residual} exceeds 1e-8"
            )));
        }
        Ok(Self {
            transition,
            stationary,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    /// Stationary cross-class leakage Σ_a π_a (1 − T_aa).
    pub fn stationary_leakage(&self) -> f64 {
        (0..self.num_classes())
            .map(|a| self.stationary[a] * (1.0 - self.transition[(a, a)]))
            .sum()
    }

    /// Coarse mixing gap 1 − Re λ₂, with eigenvalues ordered by descending
    /// real part (ties by descending imaginary magnitude).
    pub fn coarse_gap(&self) -> Result<f64> {
        if self.num_classes() == 1 {
            return Err(Error::InvalidInput(
                "coarse gap needs at least two classes".into(),
            ));
        }
        Ok(1.0 - linalg::second_eigenvalue_real(&self.transition)?)
    }
}

/// Class-averaged transport of the self-loop-removed operator:
/// T_ab = (1/n_a) Σ_{i∈C_a} Σ_{j∈C_b} Q_ij. Errors if any row of `slf` is
/// degenerate or any class is empty.
pub fn coarse_chain(slf: &SelfLoopFreeOperator, labels: &LabelVector) -> Result<CoarseChain> {
    check_labels(slf.n(), labels)?;
    let invalid = slf.invalid_rows();
    if !invalid.is_empty() {
        return Err(Error::DegenerateRows(invalid));
    }
    labels.require_class_size(1)?;

    let k = labels.num_classes();
    let q = slf.transition();
    let members = labels.class_members();
    let mut t = DMatrix::zeros(k, k);
    for (a, rows) in members.iter().enumerate() {
        let inv = 1.0 / rows.len() as f64;
        for &i in rows {
            for j in 0..slf.n() {
                t[(a, labels.label(j))] += q[(i, j)];
            }
        }
        t.row_mut(a).scale_mut(inv);
    }
    CoarseChain::from_transition(t)
}

/// K×K pairwise separation matrix at one bandwidth.
#[derive(Debug, Clone)]
pub struct SeparationMatrix {
    matrix: DMatrix<f64>,
    bandwidth: f64,
    ridge: f64,
}

impl SeparationMatrix {
    pub fn num_classes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Ridge τ used for the regularized Mahalanobis form; 0 for the
    /// operator-native estimator, which has none.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Mean over off-diagonal entries, c̄ = (1/(K(K−1))) Σ_{a≠b} c_ab.
    pub fn mean_separation(&self) -> f64 {
        let k = self.num_classes();
        if k < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    total += self.matrix[(a, b)];
                }
            }
        }
        total / (k * (k - 1)) as f64
    }
}

/// Empirical class means and the unbiased pooled within-class covariance
/// (scatter divided by n − K; zero matrix when every class is a singleton).
fn class_means_and_pooled_covariance(
    cloud: &FeatureCloud,
    labels: &LabelVector,
) -> (Vec<DVector<f64>>, DMatrix<f64>) {
    let d = cloud.dim();
    let members = labels.class_members();
    let means: Vec<DVector<f64>> = members
        .iter()
        .map(|rows| {
            let mut m = DVector::zeros(d);
            for &i in rows {
                m += cloud.point(i);
            }
            m / rows.len() as f64
        })
        .collect();

    let mut scatter = DMatrix::zeros(d, d);
    for (a, rows) in members.iter().enumerate() {
        for &i in rows {
            let dev = cloud.point(i) - &means[a];
            scatter.ger(1.0, &dev, &dev, 1.0);
        }
    }
    let dof = cloud.n().saturating_sub(labels.num_classes());
    let pooled = if dof == 0 {
        DMatrix::zeros(d, d)
    } else {
        scatter / dof as f64
    };
    (means, pooled)
}

/// Empirical regularized Mahalanobis separation matrix,
/// ĉ_ab = ¼ (μ̂_a−μ̂_b)ᵀ (Σ̂_pool + (ε+τ)I)† (μ̂_a−μ̂_b).
pub fn empirical_separation(
    cloud: &FeatureCloud,
    labels: &LabelVector,
    epsilon: f64,
    ridge: f64,
) -> Result<SeparationMatrix> {
    check_labels(cloud.n(), labels)?;
    labels.require_class_size(1)?;
    if !(epsilon > 0.0) || !(ridge > 0.0) {
        return Err(Error::InvalidInput(
            "bandwidth and ridge must be positive".into(),
        ));
    }
    let (means, mut pooled) = class_means_and_pooled_covariance(cloud, labels);
    for i in 0..cloud.dim() {
        pooled[(i, i)] += epsilon + ridge;
    }
    let pinv = linalg::symmetric_pseudoinverse(&pooled)?;

    let k = labels.num_classes();
    let mut c = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let delta = &means[a] - &means[b];
            let v = 0.25 * (delta.transpose() * &pinv * &delta)[(0, 0)];
            // quadratic form in a PSD pseudoinverse; clamp rounding noise
            let v = v.max(0.0);
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    Ok(SeparationMatrix {
        matrix: c,
        bandwidth: epsilon,
        ridge,
    })
}

/// Operator-native separation c̃_ab = −log(α̂_ab / √(α̂_aa α̂_bb)), where
/// α̂ are mean kernel values over class-pair point pairs (within-class pairs
/// exclude i = j). Entries may be negative empirically; they are reported
/// as-is.
pub fn operator_native_separation(
    cloud: &FeatureCloud,
    labels: &LabelVector,
    epsilon: f64,
) -> Result<SeparationMatrix> {
    check_labels(cloud.n(), labels)?;
    labels.require_class_size(2)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput("bandwidth must be positive".into()));
    }
    let mut kernel = squared_distance_matrix(cloud);
    let scale = -1.0 / (4.0 * epsilon);
    kernel.apply(|v| *v = (*v * scale).exp());

    let members = labels.class_members();
    let k = labels.num_classes();
    let mut alpha = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let mut total = 0.0;
            let count: usize;
            if a == b {
                let rows = &members[a];
                for (ii, &i) in rows.iter().enumerate() {
                    for &j in rows.iter().skip(ii + 1) {
                        total += kernel[(i, j)];
                    }
                }
                count = rows.len() * (rows.len() - 1) / 2;
            } else {
                for &i in &members[a] {
                    for &j in &members[b] {
                        total += kernel[(i, j)];
                    }
                }
                count = members[a].len() * members[b].len();
            }
            let mean = total / count as f64;
            alpha[(a, b)] = mean;
            alpha[(b, a)] = mean;
        }
    }

    let mut c = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in (a + 1)..k {
            let v = -(alpha[(a, b)] / (alpha[(a, a)] * alpha[(b, b)]).sqrt()).ln();
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    Ok(SeparationMatrix {
        matrix: c,
        bandwidth: epsilon,
        ridge: 0.0,
    })
}

/// Soft diffusion radius: per-point ρ²(i) = Σ_j P_ij ‖z_j−z_i‖² (self-loops
/// included) and the root-mean-square aggregate √(mean ρ²).
pub fn soft_radius(op: &DiffusionOperator, cloud: &FeatureCloud) -> Result<(DVector<f64>, f64)> {
    if cloud.n() != op.n() {
        return Err(Error::ShapeMismatch("cloud vs operator size".into()));
    }
    let d2 = squared_distance_matrix(cloud);
    let p = op.transition();
    let n = op.n();
    let mut radii = DVector::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += p[(i, j)] * d2[(i, j)];
        }
        radii[i] = acc;
    }
    let rms = (radii.sum() / n as f64).sqrt();
    Ok((radii, rms))
}

/// Compute the full observable report of one snapshot at one bandwidth:
/// build the operator, remove self-loops for the coarse chain, and collect
/// all scalar and matrix observables.
pub fn snapshot_report(
    cloud: &FeatureCloud,
    labels: &LabelVector,
    epsilon: f64,
    ridge: f64,
    mass_floor: f64,
) -> Result<ObservableReport> {
    let op = build_operator(cloud, epsilon)?;
    let slf = remove_self_loops(&op, mass_floor);
    let chain = coarse_chain(&slf, labels)?;
    let separation = empirical_separation(cloud, labels, epsilon, ridge)?;
    let (_, rms) = soft_radius(&op, cloud)?;
    let report = ObservableReport {
        bandwidth: epsilon,
        mean_separation: separation.mean_separation(),
        separation_matrix: matrix_rows(separation.matrix()),
        leakage_stationary: chain.stationary_leakage(),
        leakage_raw: raw_leakage(&op, labels)?,
        coarse_gap: chain.coarse_gap()?,
        label_boundary_energy: label_boundary_energy(&op, labels)?,
        soft_radius_rms: rms,
        coarse_chain: matrix_rows(chain.transition()),
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::DEFAULT_MASS_FLOOR;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, d: usize, seed: u64) -> FeatureCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect())
            .collect();
        FeatureCloud::from_rows(&rows).unwrap()
    }

    fn random_labels(n: usize, k: usize, seed: u64) -> LabelVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        for i in 0..n {
            let j = rng.random_range(0..n);
            labels.swap(i, j);
        }
        LabelVector::new(labels, k).unwrap()
    }

    #[test]
    fn gamma_of_constant_is_zero() {
        let cloud = random_cloud(8, 2, 1);
        let op = build_operator(&cloud, 0.5).unwrap();
        let f = DVector::from_element(8, 3.25);
        let g = gamma(&op, &f, &f).unwrap();
        assert!(g.abs().max() <= 1e-15);
    }

    #[test]
    fn gamma_two_identical_points() {
        let cloud = FeatureCloud::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        let op = build_operator(&cloud, 1.0).unwrap();
        let f = DVector::from_vec(vec![0.0, 1.0]);
        let g = gamma(&op, &f, &f).unwrap();
        assert_abs_diff_eq!(g[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn gamma_polarization_identity() {
        let cloud = random_cloud(12, 3, 2);
        let op = build_operator(&cloud, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = DVector::from_fn(12, |_, _| rng.random::<f64>());
        let h = DVector::from_fn(12, |_, _| rng.random::<f64>());
        let lhs = gamma(&op, &f, &h).unwrap();
        let sum = &f + &h;
        let rhs = (gamma(&op, &sum, &sum).unwrap()
            - gamma(&op, &f, &f).unwrap()
            - gamma(&op, &h, &h).unwrap())
            / 2.0;
        assert!((lhs - rhs).abs().max() <= 1e-12);
    }

    #[test]
    fn gamma_rejects_length_mismatch() {
        let cloud = random_cloud(5, 2, 4);
        let op = build_operator(&cloud, 1.0).unwrap();
        let f = DVector::zeros(4);
        assert!(gamma(&op, &f, &f).is_err());
    }

    #[test]
    fn boundary_energy_single_class_is_zero() {
        let cloud = random_cloud(6, 2, 5);
        let labels = LabelVector::new(vec![0; 6], 1).unwrap();
        let op = build_operator(&cloud, 1.0).unwrap();
        assert_eq!(label_boundary_energy(&op, &labels).unwrap(), 0.0);
        assert_eq!(raw_leakage(&op, &labels).unwrap(), 0.0);
    }

    #[test]
    fn boundary_energy_two_points() {
        let cloud = FeatureCloud::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let labels = LabelVector::from_labels(vec![0, 1]).unwrap();
        let op = build_operator(&cloud, 1.0).unwrap();
        let expected = (-1.0f64).exp() / (1.0 + (-1.0f64).exp());
        assert_abs_diff_eq!(
            label_boundary_energy(&op, &labels).unwrap(),
            expected,
            epsilon = 1e-12
        );
        // raw leakage = ε · energy with ε = 1
        assert_abs_diff_eq!(raw_leakage(&op, &labels).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn energy_identity_with_one_hot_gamma_route() {
        let cloud = random_cloud(20, 3, 6);
        let labels = random_labels(20, 3, 7);
        let op = build_operator(&cloud, 0.6).unwrap();
        let direct = label_boundary_energy(&op, &labels).unwrap();

        let mut via_gamma = 0.0;
        for a in 0..labels.num_classes() {
            let g_a = DVector::from_fn(20, |i, _| if labels.label(i) == a { 1.0 } else { 0.0 });
            via_gamma += gamma(&op, &g_a, &g_a).unwrap().sum() / 20.0;
        }
        assert!((direct - via_gamma).abs() <= 1e-12);

        let raw = raw_leakage(&op, &labels).unwrap();
        assert!((raw - 0.6 * direct).abs() <= 1e-12);
    }

    #[test]
    fn coarse_chain_of_singleton_classes_is_q() {
        let s = 3f64.sqrt() / 2.0;
        let cloud =
            FeatureCloud::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, s]]).unwrap();
        let labels = LabelVector::from_labels(vec![0, 1, 2]).unwrap();
        let op = build_operator(&cloud, 1.0).unwrap();
        let slf = remove_self_loops(&op, DEFAULT_MASS_FLOOR);
        let chain = coarse_chain(&slf, &labels).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let expected = if a == b { 0.0 } else { 0.5 };
                assert_abs_diff_eq!(chain.transition()[(a, b)], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn coarse_chain_of_tight_clusters_is_nearly_diagonal() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            rows.push(vec![0.01 * i as f64, 0.0]);
            labels.push(0);
            rows.push(vec![10.0 + 0.01 * i as f64, 0.0]);
            labels.push(1);
        }
        let cloud = FeatureCloud::from_rows(&rows).unwrap();
        let labels = LabelVector::from_labels(labels).unwrap();
        // within-cluster scale bandwidth
        let op = build_operator(&cloud, 0.01).unwrap();
        let chain = coarse_chain(&remove_self_loops(&op, DEFAULT_MASS_FLOOR), &labels).unwrap();
        assert!(chain.transition()[(0, 0)] >= 0.99);
        assert!(chain.transition()[(1, 1)] >= 0.99);
        for a in 0..2 {
            assert_abs_diff_eq!(chain.transition().row(a).sum(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn coarse_chain_rejects_degenerate_rows_and_empty_classes() {
        let cloud = FeatureCloud::from_rows(&[vec![0.0]]).unwrap();
        let op = build_operator(&cloud, 1.0).unwrap();
        let slf = remove_self_loops(&op, DEFAULT_MASS_FLOOR);
        let labels = LabelVector::new(vec![0], 1).unwrap();
        assert!(matches!(
            coarse_chain(&slf, &labels),
            Err(Error::DegenerateRows(_))
        ));

        let cloud = random_cloud(4, 2, 8);
        let op = build_operator(&cloud, 1.0).unwrap();
        let slf = remove_self_loops(&op, DEFAULT_MASS_FLOOR);
        let labels = LabelVector::new(vec![0, 0, 0, 0], 2).unwrap();
        assert!(matches!(
            coarse_chain(&slf, &labels),
            Err(Error::ClassTooSmall(1, 1))
        ));
    }

    #[test]
    fn stationary_leakage_examples() {
        let identity = CoarseChain::from_transition(DMatrix::identity(3, 3)).unwrap();
        assert_abs_diff_eq!(identity.stationary_leakage(), 0.0, epsilon = 1e-14);

        let symmetric =
            CoarseChain::from_transition(DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]))
                .unwrap();
        assert_abs_diff_eq!(symmetric.stationary_leakage(), 0.25, epsilon = 1e-12);

        let uniform =
            CoarseChain::from_transition(DMatrix::from_element(4, 4, 0.25)).unwrap();
        assert_abs_diff_eq!(uniform.stationary_leakage(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn coarse_gap_examples() {
        let identity = CoarseChain::from_transition(DMatrix::identity(3, 3)).unwrap();
        assert_abs_diff_eq!(identity.coarse_gap().unwrap(), 0.0, epsilon = 1e-12);

        let uniform = CoarseChain::from_transition(DMatrix::from_element(4, 4, 0.25)).unwrap();
        assert_abs_diff_eq!(uniform.coarse_gap().unwrap(), 1.0, epsilon = 1e-12);

        let symmetric =
            CoarseChain::from_transition(DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]))
                .unwrap();
        assert_abs_diff_eq!(symmetric.coarse_gap().unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn separation_zero_for_identical_means() {
        // both classes hold the same point pair, so the class means coincide
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![-1.0, 0.0],
        ];
        let cloud = FeatureCloud::from_rows(&rows).unwrap();
        let labels = LabelVector::new(vec![0, 1, 0, 1], 2).unwrap();
        let sep = empirical_separation(&cloud, &labels, 1.0, DEFAULT_RIDGE).unwrap();
        assert_abs_diff_eq!(sep.matrix()[(0, 1)], 0.0, epsilon = 1e-14);
        assert_eq!(sep.matrix()[(0, 0)], 0.0);
        assert_eq!(sep.matrix()[(0, 1)], sep.matrix()[(1, 0)]);
    }

    #[test]
    fn separation_of_two_singletons() {
        let cloud = FeatureCloud::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let labels = LabelVector::from_labels(vec![0, 1]).unwrap();
        let sep = empirical_separation(&cloud, &labels, 1.0, DEFAULT_RIDGE).unwrap();
        let expected = 1.0 / (1.0 + DEFAULT_RIDGE);
        assert_abs_diff_eq!(sep.matrix()[(0, 1)], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(sep.mean_separation(), expected, epsilon = 1e-12);
    }

    #[test]
    fn separation_with_exactly_known_pooled_covariance() {
        // two classes of two points each, deviations ±(1,0) within class:
        // scatter = 4·diag(1,0), pooled = scatter/(n−K) = diag(2,0)
        let cloud = FeatureCloud::from_rows(&[
            vec![-1.0, 0.0],
            vec![1.0, 0.0],
            vec![2.0, 3.0],
            vec![4.0, 3.0],
        ])
        .unwrap();
        let labels = LabelVector::new(vec![0, 0, 1, 1], 2).unwrap();
        let eps = 0.5;
        let tau = 1e-8;
        let sep = empirical_separation(&cloud, &labels, eps, tau).unwrap();
        // Δ = (3,3); ridged pooled = diag(2+ε+τ, ε+τ)
        let expected = 0.25 * (9.0 / (2.0 + eps + tau) + 9.0 / (eps + tau));
        assert_abs_diff_eq!(sep.matrix()[(0, 1)], expected, epsilon = 1e-9);
    }

    #[test]
    fn operator_native_zero_for_coincident_clusters() {
        // all points identical: every kernel value is 1, so c̃ = 0
        let labels = LabelVector::new(vec![0, 0, 0, 1, 1, 1], 2).unwrap();
        let tight = FeatureCloud::from_rows(&vec![vec![0.0]; 6]).unwrap();
        let sep_tight = operator_native_separation(&tight, &labels, 1.0).unwrap();
        assert_abs_diff_eq!(sep_tight.matrix()[(0, 1)], 0.0, epsilon = 1e-14);

        let cloud = random_cloud(6, 2, 40);
        let sep = operator_native_separation(&cloud, &labels, 1.0).unwrap();
        assert_eq!(sep.matrix()[(0, 1)], sep.matrix()[(1, 0)]);
        assert_eq!(sep.matrix()[(0, 0)], 0.0);
    }

    #[test]
    fn operator_native_is_order_invariant() {
        let cloud = random_cloud(12, 2, 9);
        let labels = random_labels(12, 2, 10);
        let sep = operator_native_separation(&cloud, &labels, 0.8).unwrap();

        let perm: Vec<usize> = vec![7, 2, 11, 0, 5, 9, 1, 10, 3, 8, 4, 6];
        let rows: Vec<Vec<f64>> = perm
            .iter()
            .map(|&i| (0..2).map(|j| cloud.points()[(i, j)]).collect())
            .collect();
        let relabeled: Vec<usize> = perm.iter().map(|&i| labels.label(i)).collect();
        let cloud2 = FeatureCloud::from_rows(&rows).unwrap();
        let labels2 = LabelVector::new(relabeled, 2).unwrap();
        let sep2 = operator_native_separation(&cloud2, &labels2, 0.8).unwrap();
        assert!((sep.matrix() - sep2.matrix()).abs().max() <= 1e-12);
    }

    #[test]
    fn operator_native_requires_two_per_class() {
        let cloud = random_cloud(3, 2, 11);
        let labels = LabelVector::new(vec![0, 0, 1], 2).unwrap();
        assert!(matches!(
            operator_native_separation(&cloud, &labels, 1.0),
            Err(Error::ClassTooSmall(1, 2))
        ));
    }

    #[test]
    fn soft_radius_identical_points() {
        let cloud = FeatureCloud::from_rows(&vec![vec![2.0]; 5]).unwrap();
        let op = build_operator(&cloud, 1.0).unwrap();
        let (radii, rms) = soft_radius(&op, &cloud).unwrap();
        assert_eq!(radii.abs().max(), 0.0);
        assert_eq!(rms, 0.0);
    }

    #[test]
    fn soft_radius_two_points() {
        let cloud = FeatureCloud::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        let op = build_operator(&cloud, 1.0).unwrap();
        let (radii, rms) = soft_radius(&op, &cloud).unwrap();
        let expected = 4.0 * (-1.0f64).exp() / (1.0 + (-1.0f64).exp());
        assert_abs_diff_eq!(radii[0], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(radii[1], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(rms, expected.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn soft_radius_continuous_under_scaling() {
        let cloud = random_cloud(10, 2, 12);
        let op = build_operator(&cloud, 1.0).unwrap();
        let (_, rms) = soft_radius(&op, &cloud).unwrap();
        let scaled_rows: Vec<Vec<f64>> = (0..10)
            .map(|i| {
                (0..2)
                    .map(|j| cloud.points()[(i, j)] * (1.0 + 1e-9))
                    .collect()
            })
            .collect();
        let scaled = FeatureCloud::from_rows(&scaled_rows).unwrap();
        let op2 = build_operator(&scaled, 1.0).unwrap();
        let (_, rms2) = soft_radius(&op2, &scaled).unwrap();
        assert!((rms - rms2).abs() < 1e-6);
    }

    #[test]
    fn snapshot_report_is_valid_and_deterministic() {
        let cloud = random_cloud(30, 3, 13);
        let labels = random_labels(30, 3, 14);
        let r1 = snapshot_report(&cloud, &labels, 0.9, DEFAULT_RIDGE, DEFAULT_MASS_FLOOR).unwrap();
        let r2 = snapshot_report(&cloud, &labels, 0.9, DEFAULT_RIDGE, DEFAULT_MASS_FLOOR).unwrap();
        assert_eq!(r1, r2);
        r1.validate().unwrap();
        assert!((r1.leakage_raw - 0.9 * r1.label_boundary_energy).abs() <= 1e-12);
    }
}
