//! Hard mutual k-nearest-neighbor baselines and the tie-configuration
//! discontinuity witness. Directed neighbor sets break distance ties by
//! ascending point index; an undirected edge survives only when both
//! endpoints select each other.

use nalgebra::DVector;

use crate::data::{FeatureCloud, LabelVector};
use crate::error::{Error, Result};
use crate::operator::squared_distance_matrix;

/// Symmetric mutual k-NN adjacency with per-node degrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutualKnnGraph {
    n: usize,
    k: usize,
    adjacency: Vec<bool>, // row-major n×n
    degrees: Vec<usize>,
}

impl MutualKnnGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.degrees.iter().sum::<usize>() / 2
    }

    /// Number of differing adjacency entries (ordered pairs).
    pub fn hamming_distance(&self, other: &MutualKnnGraph) -> Result<usize> {
        if self.n != other.n {
            return Err(Error::ShapeMismatch("graphs of different size".into()));
        }
        Ok(self
            .adjacency
            .iter()
            .zip(other.adjacency.iter())
            .filter(|(a, b)| a != b)
            .count())
    }

    #[cfg(test)]
    fn from_edges(n: usize, k: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![false; n * n];
        let mut degrees = vec![0usize; n];
        for &(i, j) in edges {
            adjacency[i * n + j] = true;
            adjacency[j * n + i] = true;
        }
        for i in 0..n {
            degrees[i] = (0..n).filter(|&j| adjacency[i * n + j]).count();
        }
        Self {
            n,
            k,
            adjacency,
            degrees,
        }
    }
}

/// Build the mutual k-NN graph of `cloud`: directed k-NN sets with ties in
/// distance broken by ascending index, then an edge wherever both directions
/// are present.
pub fn build_mutual_knn(cloud: &FeatureCloud, k: usize) -> Result<MutualKnnGraph> {
    let n = cloud.n();
    if k < 1 || k >= n {
        return Err(Error::InvalidInput(format!(
            "neighbor count k={k} must satisfy 1 ≤ k < n={n}"
        )));
    }
    let d2 = squared_distance_matrix(cloud);
    let mut directed: Vec<Vec<bool>> = vec![vec![false; n]; n];
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        candidates.clear();
        for j in 0..n {
            if j != i {
                candidates.push((d2[(i, j)], j));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        for &(_, j) in candidates.iter().take(k) {
            directed[i][j] = true;
        }
    }

    let mut adjacency = vec![false; n * n];
    let mut degrees = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if directed[i][j] && directed[j][i] {
                adjacency[i * n + j] = true;
                adjacency[j * n + i] = true;
                degrees[i] += 1;
                degrees[j] += 1;
            }
        }
    }
    Ok(MutualKnnGraph {
        n,
        k,
        adjacency,
        degrees,
    })
}

fn check_labels(graph: &MutualKnnGraph, labels: &LabelVector) -> Result<()> {
    if labels.len() != graph.n() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for a graph on {} nodes",
            labels.len(),
            graph.n()
        )));
    }
    Ok(())
}

/// Node-averaged fraction of mutual neighbors with a different label.
/// Nodes with zero mutual degree contribute zero.
pub fn graph_leakage(graph: &MutualKnnGraph, labels: &LabelVector) -> Result<f64> {
    check_labels(graph, labels)?;
    let n = graph.n();
    let mut total = 0.0;
    for i in 0..n {
        if graph.degrees()[i] == 0 {
            continue;
        }
        let cross = (0..n)
            .filter(|&j| graph.has_edge(i, j) && labels.label(j) != labels.label(i))
            .count();
        total += cross as f64 / graph.degrees()[i] as f64;
    }
    Ok(total / n as f64)
}

/// Fraction of mutual edges whose endpoints disagree in label; zero when the
/// edge set is empty. This is the hard-graph analogue of the operator
/// boundary energy, without the 1/ε scaling.
pub fn graph_label_disagreement(graph: &MutualKnnGraph, labels: &LabelVector) -> Result<f64> {
    check_labels(graph, labels)?;
    let n = graph.n();
    let mut edges = 0usize;
    let mut crossing = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if graph.has_edge(i, j) {
                edges += 1;
                if labels.label(i) != labels.label(j) {
                    crossing += 1;
                }
            }
        }
    }
    if edges == 0 {
        return Ok(0.0);
    }
    Ok(crossing as f64 / edges as f64)
}

/// Per-node RMS edge length over mutual neighbors (zero-degree nodes
/// contribute zero) and the node-mean aggregate of those per-node values.
pub fn graph_local_radius(
    graph: &MutualKnnGraph,
    cloud: &FeatureCloud,
) -> Result<(DVector<f64>, f64)> {
    if cloud.n() != graph.n() {
        return Err(Error::ShapeMismatch("cloud vs graph size".into()));
    }
    let n = graph.n();
    let d2 = squared_distance_matrix(cloud);
    let mut radii = DVector::zeros(n);
    for i in 0..n {
        if graph.degrees()[i] == 0 {
            continue;
        }
        let sum: f64 = (0..n)
            .filter(|&j| graph.has_edge(i, j))
            .map(|j| d2[(i, j)])
            .sum();
        radii[i] = (sum / graph.degrees()[i] as f64).sqrt();
    }
    let aggregate = radii.sum() / n as f64;
    Ok((radii, aggregate))
}

/// The canonical neighbor-tie configuration and its two resolutions.
///
/// `base` has points 0, +1, −1 on a line, so the 1st and 2nd nearest
/// neighbors of the center are tied. `plus` moves the right point inward by
/// the perturbation, `minus` the left one; their mutual 1-NN adjacencies
/// differ however small the perturbation is.
#[derive(Debug, Clone)]
pub struct DiscontinuityWitness {
    pub base: FeatureCloud,
    pub plus: FeatureCloud,
    pub minus: FeatureCloud,
    pub adjacency_diff: usize,
}

/// Witness neighbor count.
pub const WITNESS_K: usize = 1;

pub fn discontinuity_witness(perturbation: f64) -> Result<DiscontinuityWitness> {
    if !(perturbation > 0.0) || !perturbation.is_finite() {
        return Err(Error::InvalidInput("perturbation must be positive".into()));
    }
    if perturbation >= 1.0 {
        return Err(Error::InvalidInput(
            "perturbation must be smaller than the tie distance 1".into(),
        ));
    }
    let base = FeatureCloud::from_rows(&[vec![0.0], vec![1.0], vec![-1.0]])?;
    let plus = FeatureCloud::from_rows(&[vec![0.0], vec![1.0 - perturbation], vec![-1.0]])?;
    let minus = FeatureCloud::from_rows(&[vec![0.0], vec![1.0], vec![-1.0 + perturbation]])?;
    let graph_plus = build_mutual_knn(&plus, WITNESS_K)?;
    let graph_minus = build_mutual_knn(&minus, WITNESS_K)?;
    let adjacency_diff = graph_plus.hamming_distance(&graph_minus)?;
    Ok(DiscontinuityWitness {
        base,
        plus,
        minus,
        adjacency_diff,
    })
}
