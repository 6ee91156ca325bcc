//! Emotion-relevant critical subnetwork selection.
//!
//! For one band: average the training matrices of each emotion, keep the
//! `floor(t · N(N−1)/2)` strongest edges (by absolute weight) of every class
//! average, and take the union over classes. Matrices are then masked so that
//! only edges of the union keep their weight.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::connectivity::ConnectivityMatrix;
use crate::error::{Error, Result};
use crate::signal::BandSpec;

/// Unordered vertex pairs stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeSet {
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert an edge; order of the endpoints does not matter. Self-loops are rejected.
    pub fn insert(&mut self, a: usize, b: usize) -> Result<bool> {
        if a == b {
            return Err(Error::param(format!("self-loop ({a}, {a}) is not an edge")));
        }
        Ok(self.edges.insert((a.min(b), a.max(b))))
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn union_with(&mut self, other: &EdgeSet) {
        self.edges.extend(other.edges.iter().copied());
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self { edges }
    }

    pub fn max_vertex(&self) -> Option<usize> {
        self.edges.iter().map(|&(_, j)| j).max()
    }
}

impl FromIterator<(usize, usize)> for EdgeSet {
    fn from_iter<T: IntoIterator<Item = (usize, usize)>>(iter: T) -> Self {
        let mut s = EdgeSet::new();
        for (a, b) in iter {
            if a != b {
                s.edges.insert((a.min(b), a.max(b)));
            }
        }
        s
    }
}

/// Union of per-emotion critical edges for one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSubnetwork {
    pub vertices: Vec<String>,
    pub edges: EdgeSet,
    pub band: Option<BandSpec>,
    pub threshold: f64,
    /// Edge set of each emotion class before merging.
    pub per_class: BTreeMap<usize, EdgeSet>,
}

impl CriticalSubnetwork {
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    /// Classes whose critical edges contain `(i, j)`.
    pub fn classes_with_edge(&self, i: usize, j: usize) -> Vec<usize> {
        self.per_class.iter().filter(|(_, e)| e.contains(i, j)).map(|(&c, _)| c).collect()
    }
}

/// Number of edges kept per class: `floor(t · N(N−1)/2)`.
pub fn edge_quota(n: usize, t: f64) -> usize {
    let total = n * n.saturating_sub(1) / 2;
    // Guard against products such as 0.29 · 100 = 28.999999999999996.
    ((t * total as f64) + 1e-9).floor().clamp(0.0, total as f64) as usize
}

/// Element-wise mean of the matrices of each class in `label_set`.
pub fn average_by_emotion(
    matrices: &[ConnectivityMatrix],
    labels: &[usize],
    label_set: &[usize],
) -> Result<BTreeMap<usize, DMatrix<f64>>> {
    if matrices.len() != labels.len() {
        return Err(Error::param(format!("{} matrices but {} labels", matrices.len(), labels.len())));
    }
    if let Some(first) = matrices.first() {
        for m in matrices {
            if m.n() != first.n() || m.metric != first.metric || m.band != first.band {
                return Err(Error::data("matrices differ in size, metric or band"));
            }
        }
    }
    let n = matrices.first().map_or(0, ConnectivityMatrix::n);
    let mut out = BTreeMap::new();
    for &class in label_set {
        let mut sum = DMatrix::zeros(n, n);
        let mut count = 0usize;
        for (m, &y) in matrices.iter().zip(labels) {
            if y == class {
                sum += &m.weights;
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::data(format!("emotion class {class} has no training matrices")));
        }
        out.insert(class, sum / count as f64);
    }
    Ok(out)
}

/// The `floor(t · N(N−1)/2)` upper-triangle edges of largest absolute weight.
/// Ties go to the lexicographically smaller `(i, j)`.
pub fn threshold_edges(mean_matrix: &DMatrix<f64>, t: f64) -> Result<EdgeSet> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param(format!("threshold must lie in [0, 1], got {t}")));
    }
    let n = mean_matrix.nrows();
    let mut ranked: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            ranked.push((mean_matrix[(i, j)].abs(), i, j));
        }
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    Ok(ranked.into_iter().take(edge_quota(n, t)).map(|(_, i, j)| (i, j)).collect())
}

/// Averaging, thresholding and merging over the training matrices of one band.
pub fn select_critical_subnetwork(
    train_matrices: &[ConnectivityMatrix],
    labels: &[usize],
    label_set: &[usize],
    t: f64,
) -> Result<CriticalSubnetwork> {
    let first = train_matrices
        .first()
        .ok_or_else(|| Error::data("no training matrices for subnetwork selection"))?;
    let means = average_by_emotion(train_matrices, labels, label_set)?;
    let mut edges = EdgeSet::new();
    let mut per_class = BTreeMap::new();
    for (&class, mean) in &means {
        let e = threshold_edges(mean, t)?;
        edges.union_with(&e);
        per_class.insert(class, e);
    }
    Ok(CriticalSubnetwork {
        vertices: first.channels.clone(),
        edges,
        band: first.band.clone(),
        threshold: t,
        per_class,
    })
}

/// Keep weights on subnetwork edges, zero everything else.
pub fn apply_mask(matrix: &ConnectivityMatrix, subnetwork: &CriticalSubnetwork) -> Result<ConnectivityMatrix> {
    if matrix.n() != subnetwork.n() {
        return Err(Error::param(format!("matrix has {} vertices, subnetwork {}", matrix.n(), subnetwork.n())));
    }
    if matrix.band != subnetwork.band {
        return Err(Error::param(format!(
            "band mismatch: matrix {:?}, subnetwork {:?}",
            matrix.band.as_ref().map(|b| &b.name),
            subnetwork.band.as_ref().map(|b| &b.name)
        )));
    }
    let n = matrix.n();
    let mut weights = DMatrix::zeros(n, n);
    for (i, j) in subnetwork.edges.iter() {
        weights[(i, j)] = matrix.weights[(i, j)];
        weights[(j, i)] = matrix.weights[(j, i)];
    }
    Ok(ConnectivityMatrix { weights, ..matrix.clone() })
}

/// Plain-text edge list: `band,i,j,emotions` with emotions separated by `;`.
pub fn write_edge_list<W: Write>(subnetwork: &CriticalSubnetwork, mut w: W) -> Result<()> {
    let band = subnetwork.band.as_ref().map_or("none", |b| b.name.as_str());
    writeln!(w, "band,i,j,emotions")?;
    for (i, j) in subnetwork.edges.iter() {
        let classes: Vec<String> = subnetwork.classes_with_edge(i, j).iter().map(|c| c.to_string()).collect();
        writeln!(w, "{band},{i},{j},{}", classes.join(";"))?;
    }
    Ok(())
}

/// Parse an edge list written by [`write_edge_list`] back into an edge set.
pub fn read_edge_list(text: &str) -> Result<EdgeSet> {
    let mut set = EdgeSet::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::format(format!("edge list line {}: expected 4 fields", k + 1)));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::format(format!("edge list line {}: bad index {s:?}", k + 1)));
        set.insert(parse(fields[1])?, parse(fields[2])?)?;
    }
    Ok(set)
}
