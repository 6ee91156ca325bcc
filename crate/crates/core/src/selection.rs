//! Supervised feature selection: 3-bin discretization and greedy
//! minimal-redundancy maximal-relevance (difference form).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension z-score statistics fit on training rows; values map to bins
/// `0` (z < −0.5), `1` (|z| ≤ 0.5) and `2` (z > 0.5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Discretizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::data("cannot fit a discretizer on zero rows"))?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(Error::data("rows differ in dimension"));
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Ok(Self { mean, std })
    }

    pub fn bin(&self, dim: usize, value: f64) -> usize {
        let s = self.std[dim];
        if !(s > 0.0) {
            return 1;
        }
        let z = (value - self.mean[dim]) / s;
        if z < -0.5 {
            0
        } else if z > 0.5 {
            2
        } else {
            1
        }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
        rows.iter()
            .map(|r| {
                if r.len() != self.mean.len() {
                    return Err(Error::param(format!("row has {} values, discretizer expects {}", r.len(), self.mean.len())));
                }
                Ok(r.iter().enumerate().map(|(d, &v)| self.bin(d, v)).collect())
            })
            .collect()
    }
}

/// Plug-in mutual information (nats) between two discrete sequences.
pub fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pa: HashMap<usize, usize> = HashMap::new();
    let mut pb: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *pa.entry(x).or_default() += 1;
        *pb.entry(y).or_default() += 1;
    }
    let mut cells: Vec<_> = joint.into_iter().collect();
    cells.sort_unstable();
    cells
        .into_iter()
        .map(|((x, y), c)| {
            let pxy = c as f64 / n;
            pxy * (pxy * n * n / (pa[&x] as f64 * pb[&y] as f64)).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected feature indices in pick order.
    pub indices: Vec<usize>,
    /// `I(f; y)` of each pick.
    pub relevance: Vec<f64>,
    /// Mean `I(f; s)` over previously picked `s` at the time of each pick.
    pub redundancy: Vec<f64>,
}

impl SelectionResult {
    /// Project rows onto the selected columns.
    pub fn project(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.indices.iter().map(|&i| r[i]).collect()).collect()
    }
}

/// Greedy mRMR: each step maximizes `I(f; y) − mean_{s∈S} I(f; s)`; ties go to the lower index.
pub fn mrmr_select(features: &[Vec<usize>], labels: &[usize], k: usize) -> Result<SelectionResult> {
    if features.len() != labels.len() {
        return Err(Error::param(format!("{} rows but {} labels", features.len(), labels.len())));
    }
    let dim = features.first().map_or(0, Vec::len);
    if k > dim {
        return Err(Error::param(format!("cannot select {k} of {dim} features")));
    }
    let columns: Vec<Vec<usize>> = (0..dim).map(|d| features.iter().map(|r| r[d]).collect()).collect();
    let relevance: Vec<f64> = columns.iter().map(|c| mutual_information(c, labels)).collect();

    let mut chosen = vec![false; dim];
    let mut redundancy_sum = vec![0.0; dim];
    let mut out = SelectionResult { indices: Vec::with_capacity(k), relevance: Vec::new(), redundancy: Vec::new() };
    for step in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for d in (0..dim).filter(|&d| !chosen[d]) {
            let red = if step == 0 { 0.0 } else { redundancy_sum[d] / step as f64 };
            let score = relevance[d] - red;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((d, score));
            }
        }
        let (pick, _) = best.expect("k <= dim leaves a candidate");
        chosen[pick] = true;
        out.indices.push(pick);
        out.relevance.push(relevance[pick]);
        out.redundancy.push(if step == 0 { 0.0 } else { redundancy_sum[pick] / step as f64 });
        for d in (0..dim).filter(|&d| !chosen[d]) {
            redundancy_sum[d] += mutual_information(&columns[d], &columns[pick]);
        }
    }
    Ok(out)
}

/// Persist selected indices, one per line, after a checksum line identifying the training fold.
pub fn write_selection(indices: &[usize], fold_checksum: &str) -> String {
    let mut s = format!("# fold-sha256 {fold_checksum}\n");
    for i in indices {
        s.push_str(&format!("{i}\n"));
    }
    s
}

/// Read indices back, refusing a file written for a different training fold.
pub fn read_selection(text: &str, expected_checksum: &str) -> Result<Vec<usize>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    let found = header.strip_prefix("# fold-sha256 ").ok_or_else(|| Error::format("missing fold checksum line"))?;
    if found.trim() != expected_checksum {
        return Err(Error::data(format!(
            "selection was fit on fold {found}, not {expected_checksum}; refusing to reuse it"
        )));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse().map_err(|_| Error::format(format!("bad index {l:?}"))))
        .collect()
}
