//! Signed topological features of a (masked) connectivity graph: strength,
//! clustering coefficient and eigenvector centrality.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::connectivity::ConnectivityMatrix;
use crate::error::{Error, Result};
use crate::signal::TrialMeta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Strength,
    Clustering,
    Eigencentrality,
}

impl FeatureKind {
    /// Per-band feature dimension for an `n`-vertex graph.
    pub fn dim(self, n: usize) -> usize {
        match self {
            FeatureKind::Strength | FeatureKind::Clustering => 2 * n + 2,
            FeatureKind::Eigencentrality => n,
        }
    }
}

/// How all-negative triangles contribute to the negative clustering coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeTriangles {
    /// Real cube root of the (negative) product, so `c_i− ≤ 0`.
    #[default]
    Signed,
    /// Cube root of the product's magnitude, so `c_i− ≥ 0`.
    Magnitude,
}

/// Undirected signed weighted graph; zero entries are non-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedGraph {
    adjacency: DMatrix<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl SignedGraph {
    pub fn new(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::param("adjacency matrix must be square"));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::data(format!("nonzero diagonal at vertex {i}")));
            }
            for j in i + 1..n {
                let (a, b) = (adjacency[(i, j)], adjacency[(j, i)]);
                if !a.is_finite() || a != b {
                    return Err(Error::data(format!("adjacency not symmetric/finite at ({i}, {j})")));
                }
            }
        }
        let neighbors = (0..n).map(|i| (0..n).filter(|&j| adjacency[(i, j)] != 0.0).collect()).collect();
        Ok(Self { adjacency, neighbors })
    }

    pub fn from_matrix(matrix: &ConnectivityMatrix) -> Result<Self> {
        Self::new(matrix.weights.clone())
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }
}

fn with_totals(pos: Vec<f64>, neg: Vec<f64>) -> Vec<f64> {
    let sp: f64 = pos.iter().sum();
    let sn: f64 = neg.iter().sum();
    let mut out = pos;
    out.extend(neg);
    out.push(sp);
    out.push(sn);
    out
}

/// `[s_1+..s_N+, s_1−..s_N−, Σ s_i+, Σ s_i−]`.
pub fn strength_feature(graph: &SignedGraph) -> Vec<f64> {
    let n = graph.n();
    let mut pos = vec![0.0; n];
    let mut neg = vec![0.0; n];
    for i in 0..n {
        for &j in &graph.neighbors[i] {
            let w = graph.weight(i, j);
            if w > 0.0 {
                pos[i] += w;
            } else {
                neg[i] += w;
            }
        }
    }
    with_totals(pos, neg)
}

/// `[c_1+..c_N+, c_1−..c_N−, Σ c_i+, Σ c_i−]` with `c_i± = 2 t_i± / (k_i (k_i − 1))`,
/// where `t_i±` sums the geometric means of same-signed triangles around `i`.
pub fn clustering_feature(graph: &SignedGraph, mode: NegativeTriangles) -> Vec<f64> {
    let n = graph.n();
    let mut pos = vec![0.0; n];
    let mut neg = vec![0.0; n];
    for i in 0..n {
        let nb = &graph.neighbors[i];
        let k = nb.len();
        if k < 2 {
            continue;
        }
        let (mut tp, mut tn) = (0.0, 0.0);
        for (x, &j) in nb.iter().enumerate() {
            for &h in &nb[x + 1..] {
                let (a, b, c) = (graph.weight(i, j), graph.weight(i, h), graph.weight(j, h));
                if a > 0.0 && b > 0.0 && c > 0.0 {
                    tp += (a * b * c).cbrt();
                } else if a < 0.0 && b < 0.0 && c < 0.0 {
                    tn += match mode {
                        NegativeTriangles::Signed => (a * b * c).cbrt(),
                        NegativeTriangles::Magnitude => (a * b * c).abs().cbrt(),
                    };
                }
            }
        }
        let denom = (k * (k - 1)) as f64;
        pos[i] = 2.0 * tp / denom;
        neg[i] = 2.0 * tn / denom;
    }
    with_totals(pos, neg)
}

/// Power-iteration settings for eigenvector centrality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

/// Leading eigenvector of `|A|` (unit norm, largest-magnitude entry positive).
/// Graphs without edges give the uniform vector `1/√N`.
pub fn eigencentrality_feature(graph: &SignedGraph, solver: PowerIteration) -> Result<Vec<f64>> {
    let n = graph.n();
    if n == 0 {
        return Ok(Vec::new());
    }
    let abs = graph.adjacency.abs();
    if abs.iter().all(|&v| v == 0.0) {
        return Ok(vec![1.0 / (n as f64).sqrt(); n]);
    }
    // Shifting by the Gershgorin bound makes the spectrum nonnegative, so the
    // dominant eigenvalue is the largest algebraic one even for bipartite graphs.
    let shift = abs.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    let mut x = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut converged = false;
    for _ in 0..solver.max_iter {
        let mut y = &abs * &x + &x * shift;
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::numerical("power iteration collapsed to a zero vector"));
        }
        y /= norm;
        let diff = (&y - &x).amax();
        x = y;
        if diff < solver.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numerical(format!(
            "eigenvector centrality did not converge in {} iterations",
            solver.max_iter
        )));
    }
    let imax = x.iamax();
    if x[imax] < 0.0 {
        x = -x;
    }
    Ok(x.iter().copied().collect())
}

/// A feature vector for one window, possibly spanning several bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub values: Vec<f64>,
    pub kind: FeatureKind,
    pub bands: Vec<String>,
    pub window_index: usize,
    pub meta: TrialMeta,
}

impl FeatureRecord {
    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Extract one feature kind from a (masked) connectivity matrix.
pub fn extract(
    matrix: &ConnectivityMatrix,
    kind: FeatureKind,
    mode: NegativeTriangles,
    solver: PowerIteration,
) -> Result<FeatureRecord> {
    let graph = SignedGraph::from_matrix(matrix)?;
    let values = match kind {
        FeatureKind::Strength => strength_feature(&graph),
        FeatureKind::Clustering => clustering_feature(&graph, mode),
        FeatureKind::Eigencentrality => eigencentrality_feature(&graph, solver)?,
    };
    Ok(FeatureRecord {
        values,
        kind,
        bands: matrix.band.iter().map(|b| b.name.clone()).collect(),
        window_index: matrix.window_index,
        meta: matrix.meta.clone(),
    })
}

/// Concatenate single-band records in `band_order`. Every band must be present exactly once.
pub fn concat_bands(records: &[FeatureRecord], band_order: &[String]) -> Result<FeatureRecord> {
    let first = records.first().ok_or_else(|| Error::data("no band records to concatenate"))?;
    for r in records {
        if r.kind != first.kind || r.window_index != first.window_index || r.meta != first.meta {
            return Err(Error::data("band records disagree on feature kind or window"));
        }
    }
    let mut values = Vec::new();
    for band in band_order {
        let matches: Vec<_> = records.iter().filter(|r| r.bands.len() == 1 && &r.bands[0] == band).collect();
        match matches.as_slice() {
            [one] => values.extend_from_slice(&one.values),
            [] => return Err(Error::data(format!("missing band {band}"))),
            _ => return Err(Error::data(format!("band {band} appears more than once"))),
        }
    }
    Ok(FeatureRecord {
        values,
        kind: first.kind,
        bands: band_order.to_vec(),
        window_index: first.window_index,
        meta: first.meta.clone(),
    })
}
