//! Sparse graph storage and the handful of kernels the models need.
//!
//! Adjacency is kept in canonical CSR form: column indices strictly increasing
//! within each row, no explicit zeros from duplicate collapsing, and no
//! diagonal entries. Self contributions come from the zeroth power of the
//! adjacency in the path series, so a stored self-loop would be counted twice.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, PanError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    num_rows: usize,
    num_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, checking the canonical-form invariants.
    pub fn from_raw(
        num_rows: usize,
        num_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != num_rows + 1 || row_ptr[0] != 0 {
            return Err(PanError::Format("row_ptr has wrong length or start".into()));
        }
        if *row_ptr.last().unwrap() != col_idx.len() || col_idx.len() != values.len() {
            return Err(PanError::Format("row_ptr end does not match nnz".into()));
        }
        for r in 0..num_rows {
            let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
            if lo > hi {
                return Err(PanError::Format("row_ptr decreasing".into()));
            }
            for k in lo..hi {
                if col_idx[k] >= num_cols {
                    return Err(PanError::IndexOutOfRange {
                        index: col_idx[k],
                        num_nodes: num_cols,
                    });
                }
                if k > lo && col_idx[k] <= col_idx[k - 1] {
                    return Err(PanError::Format(format!("row {r} not strictly increasing")));
                }
            }
        }
        Ok(Self {
            num_rows,
            num_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            num_rows: n,
            num_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            num_rows: n,
            num_cols: n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn is_square(&self) -> bool {
        self.num_rows == self.num_cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.num_rows).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v && self.has(c, r)))
    }

    fn has(&self, r: usize, c: usize) -> bool {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[lo..hi].binary_search(&c).is_ok()
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.num_rows.min(self.num_cols)).any(|r| self.has(r, r))
    }

    /// Every stored entry as `(row, col, value)`, row-major.
    pub fn to_edge_list(&self) -> Vec<(usize, usize, f64)> {
        (0..self.num_rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_rows, self.num_cols));
        for r in 0..self.num_rows {
            for (c, v) in self.row(r) {
                out[[r, c]] = v;
            }
        }
        out
    }

    pub fn is_unweighted(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }
}

/// Canonical CSR from an edge list. Duplicates are summed and self-loops dropped.
pub fn csr_from_edges(edges: &[(usize, usize, f64)], num_nodes: usize, symmetrize: bool) -> Result<CsrMatrix> {
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(edges.len() * if symmetrize { 2 } else { 1 });
    for &(i, j, w) in edges {
        for idx in [i, j] {
            if idx >= num_nodes {
                return Err(PanError::IndexOutOfRange { index: idx, num_nodes });
            }
        }
        if i == j {
            continue;
        }
        entries.push((i, j, w));
        if symmetrize {
            entries.push((j, i, w));
        }
    }
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let mut row_ptr = vec![0usize; num_nodes + 1];
    let mut col_idx = Vec::with_capacity(entries.len());
    let mut values: Vec<f64> = Vec::with_capacity(entries.len());
    let mut last: Option<(usize, usize)> = None;
    for (i, j, w) in entries {
        if last == Some((i, j)) {
            *values.last_mut().unwrap() += w;
            continue;
        }
        last = Some((i, j));
        row_ptr[i + 1] += 1;
        col_idx.push(j);
        values.push(w);
    }
    for r in 0..num_nodes {
        row_ptr[r + 1] += row_ptr[r];
    }
    Ok(CsrMatrix {
        num_rows: num_nodes,
        num_cols: num_nodes,
        row_ptr,
        col_idx,
        values,
    })
}

/// Unweighted adjacency: repeated pairs (in either direction when symmetrizing) give a single unit entry.
pub fn csr_from_pairs(edges: &[(usize, usize)], num_nodes: usize, symmetrize: bool) -> Result<CsrMatrix> {
    let mut pairs: Vec<(usize, usize)> = edges
        .iter()
        .map(|&(i, j)| if symmetrize { (i.min(j), i.max(j)) } else { (i, j) })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let weighted: Vec<_> = pairs.into_iter().map(|(i, j)| (i, j, 1.0)).collect();
    csr_from_edges(&weighted, num_nodes, symmetrize)
}

/// Sparse times dense.
pub fn spmm(a: &CsrMatrix, x: &Array2<f64>) -> Result<Array2<f64>> {
    if a.num_cols != x.nrows() {
        return Err(shape_err("spmm", format!("{} rows", a.num_cols), format!("{} rows", x.nrows())));
    }
    let d = x.ncols();
    let mut out = Array2::zeros((a.num_rows, d));
    spmm_into(a, x, &mut out);
    Ok(out)
}

pub(crate) fn spmm_into(a: &CsrMatrix, x: &Array2<f64>, out: &mut Array2<f64>) {
    for r in 0..a.num_rows {
        let mut orow = out.row_mut(r);
        for (c, v) in a.row(r) {
            orow.scaled_add(v, &x.row(c));
        }
    }
}

/// A graph sample: symmetric adjacency without self-loops, node features, and a target.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrGraph {
    adj: CsrMatrix,
    features: Array2<f64>,
    label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Label {
    Class(usize),
    Value(f64),
}

impl Label {
    pub fn class(&self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(*c),
            Label::Value(_) => None,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Label::Class(c) => *c as f64,
            Label::Value(v) => *v,
        }
    }
}

impl CsrGraph {
    pub fn new(adj: CsrMatrix, features: Array2<f64>, label: Label) -> Result<Self> {
        if !adj.is_square() {
            return Err(shape_err("CsrGraph::new", "square adjacency", format!("{}x{}", adj.num_rows, adj.num_cols)));
        }
        if features.nrows() != adj.num_rows {
            return Err(shape_err(
                "CsrGraph::new",
                format!("{} feature rows", adj.num_rows),
                features.nrows(),
            ));
        }
        if adj.has_self_loops() {
            return Err(PanError::InvalidArgument("adjacency contains self-loops".into()));
        }
        if !adj.is_symmetric() {
            return Err(PanError::InvalidArgument("adjacency is not symmetric".into()));
        }
        Ok(Self { adj, features, label })
    }

    /// Undirected graph from unit-weight pairs, with all-ones scalar features.
    pub fn from_pairs(edges: &[(usize, usize)], num_nodes: usize) -> Result<Self> {
        let adj = csr_from_pairs(edges, num_nodes, true)?;
        Self::new(adj, Array2::ones((num_nodes, 1)), Label::Class(0))
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.node_count() {
            return Err(shape_err("with_features", self.node_count(), features.nrows()));
        }
        self.features = features;
        Ok(self)
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn adj(&self) -> &CsrMatrix {
        &self.adj
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn node_count(&self) -> usize {
        self.adj.num_rows
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.adj.nnz() / 2
    }
}

/// Unweighted neighbor counts.
pub fn degrees(g: &CsrGraph) -> Vec<usize> {
    let rp = g.adj.row_ptr();
    rp.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Restricts `g` to the sorted node list `kept`, relabeling to `0..kept.len()`.
pub fn induced_subgraph(g: &CsrGraph, kept: &[usize]) -> Result<CsrGraph> {
    let n = g.node_count();
    let mut new_index = vec![usize::MAX; n];
    for (k, &i) in kept.iter().enumerate() {
        if i >= n {
            return Err(PanError::IndexOutOfRange { index: i, num_nodes: n });
        }
        if k > 0 && i <= kept[k - 1] {
            return Err(PanError::InvalidArgument("kept indices must be strictly increasing".into()));
        }
        new_index[i] = k;
    }
    let mut row_ptr = Vec::with_capacity(kept.len() + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    for &i in kept {
        // old columns are increasing and relabeling is monotone, so rows stay canonical
        for (c, v) in g.adj.row(i) {
            let nc = new_index[c];
            if nc != usize::MAX {
                col_idx.push(nc);
                values.push(v);
            }
        }
        row_ptr.push(col_idx.len());
    }
    let adj = CsrMatrix {
        num_rows: kept.len(),
        num_cols: kept.len(),
        row_ptr,
        col_idx,
        values,
    };
    let features = g.features.select(ndarray::Axis(0), kept);
    Ok(CsrGraph {
        adj,
        features,
        label: g.label,
    })
}

/// Several graphs stacked into one block-diagonal system.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchedGraph {
    pub adj: CsrMatrix,
    pub features: Array2<f64>,
    pub node_to_graph: Vec<usize>,
    /// `graph_offsets[g]..graph_offsets[g + 1]` are the nodes of graph `g`.
    pub graph_offsets: Vec<usize>,
    pub labels: Vec<Label>,
}

impl BatchedGraph {
    pub fn num_graphs(&self) -> usize {
        self.graph_offsets.len() - 1
    }

    /// Recovers graph `g` from the batch.
    pub fn extract(&self, g: usize) -> Result<CsrGraph> {
        let (lo, hi) = (self.graph_offsets[g], self.graph_offsets[g + 1]);
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in lo..hi {
            for (c, v) in self.adj.row(r) {
                col_idx.push(c - lo);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        let adj = CsrMatrix::from_raw(hi - lo, hi - lo, row_ptr, col_idx, values)?;
        let features = self.features.slice(ndarray::s![lo..hi, ..]).to_owned();
        CsrGraph::new(adj, features, self.labels[g])
    }
}

pub fn batch_graphs(graphs: &[&CsrGraph]) -> Result<BatchedGraph> {
    let first = graphs
        .first()
        .ok_or_else(|| PanError::InvalidArgument("cannot batch an empty graph list".into()))?;
    let d = first.feature_dim();
    let total: usize = graphs.iter().map(|g| g.node_count()).sum();
    let mut row_ptr = Vec::with_capacity(total + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut features = Array2::zeros((total, d));
    let mut node_to_graph = Vec::with_capacity(total);
    let mut graph_offsets = vec![0];
    let mut offset = 0;
    for (gi, g) in graphs.iter().enumerate() {
        if g.feature_dim() != d {
            return Err(shape_err("batch_graphs", format!("feature dim {d}"), g.feature_dim()));
        }
        let n = g.node_count();
        for r in 0..n {
            for (c, v) in g.adj.row(r) {
                col_idx.push(c + offset);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        features.slice_mut(ndarray::s![offset..offset + n, ..]).assign(&g.features);
        node_to_graph.extend(std::iter::repeat(gi).take(n));
        offset += n;
        graph_offsets.push(offset);
    }
    Ok(BatchedGraph {
        adj: CsrMatrix {
            num_rows: total,
            num_cols: total,
            row_ptr,
            col_idx,
            values,
        },
        features,
        node_to_graph,
        graph_offsets,
        labels: graphs.iter().map(|g| g.label).collect(),
    })
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn p3() -> CsrGraph {
        CsrGraph::from_pairs(&[(0, 1), (1, 2)], 3).unwrap()
    }

    pub fn k3() -> CsrGraph {
        CsrGraph::from_pairs(&[(0, 1), (1, 2), (0, 2)], 3).unwrap()
    }

    pub fn star3() -> CsrGraph {
        CsrGraph::from_pairs(&[(0, 1), (0, 2), (0, 3)], 4).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use ndarray::array;

    #[test]
    fn path_graph_has_four_entries() {
        let a = csr_from_pairs(&[(0, 1), (1, 2)], 3, true).unwrap();
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.row_ptr(), &[0, 1, 3, 4]);
        assert_eq!(a.col_idx(), &[1, 0, 2, 1]);
    }

    #[test]
    fn edgeless() {
        let a = csr_from_pairs(&[], 2, true).unwrap();
        assert_eq!(a.row_ptr(), &[0, 0, 0]);
        assert_eq!(a.nnz(), 0);
    }

    #[test]
    fn duplicates_are_summed() {
        let a = csr_from_edges(&[(0, 1, 1.0), (0, 1, 1.0)], 2, true).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(1, 0), 2.0);
    }

    #[test]
    fn repeated_pairs_stay_unweighted() {
        let a = csr_from_pairs(&[(0, 1), (1, 0), (0, 1)], 2, true).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 1), 1.0);
    }

    #[test]
    fn self_loops_dropped_and_range_checked() {
        let a = csr_from_pairs(&[(0, 0), (0, 1)], 2, true).unwrap();
        assert!(!a.has_self_loops());
        assert!(matches!(
            csr_from_pairs(&[(0, 5)], 2, true),
            Err(PanError::IndexOutOfRange { index: 5, .. })
        ));
    }

    #[test]
    fn spmm_examples() {
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        assert_eq!(spmm(&CsrMatrix::identity(3), &x).unwrap(), x);
        let ones = Array2::ones((3, 1));
        assert_eq!(spmm(p3().adj(), &ones).unwrap(), array![[1.0], [2.0], [1.0]]);
        let col = array![[1.0], [2.0], [3.0]];
        assert_eq!(spmm(k3().adj(), &col).unwrap(), array![[5.0], [4.0], [3.0]]);
        assert!(spmm(k3().adj(), &Array2::zeros((2, 1))).is_err());
    }

    #[test]
    fn batching() {
        let (p, k) = (p3(), k3());
        let b = batch_graphs(&[&p, &k]).unwrap();
        assert_eq!(b.node_to_graph, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(b.graph_offsets, vec![0, 3, 6]);
        let single = batch_graphs(&[&p]).unwrap();
        assert_eq!(single.adj, *p.adj());
        assert_eq!(single.extract(0).unwrap(), p);

        let kk = batch_graphs(&[&k, &k]).unwrap();
        assert_eq!(kk.adj.nnz(), 12);
        for (r, c, _) in kk.adj.to_edge_list() {
            assert_eq!(r / 3, c / 3);
        }
        assert!(batch_graphs(&[]).is_err());
        let wide = k.clone().with_features(Array2::ones((3, 2))).unwrap();
        assert!(batch_graphs(&[&p, &wide]).is_err());
    }

    #[test]
    fn induced_subgraph_examples() {
        let g = p3();
        let s = induced_subgraph(&g, &[0, 1]).unwrap();
        assert_eq!(s.node_count(), 2);
        assert_eq!(s.edge_count(), 1);
        assert_eq!(induced_subgraph(&g, &[0, 1, 2]).unwrap(), g);
        let s = induced_subgraph(&g, &[0, 2]).unwrap();
        assert_eq!(s.edge_count(), 0);
        assert!(induced_subgraph(&g, &[1, 0]).is_err());
        assert!(induced_subgraph(&g, &[1, 1]).is_err());
        assert!(induced_subgraph(&g, &[3]).is_err());
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degrees(&k3()), vec![2, 2, 2]);
        assert_eq!(degrees(&p3()), vec![1, 2, 1]);
        assert_eq!(degrees(&star3()), vec![3, 1, 1, 1]);
    }
}
