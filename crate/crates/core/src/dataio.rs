//! Dataset container, TU text-format parser, the PANDS1 binary format and splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PanError, Result};
use crate::graph::{csr_from_pairs, CsrGraph, CsrMatrix, Label};
use crate::pointpattern::{PatternKind, PointPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classify(usize),
    Regress,
}

impl Task {
    pub fn num_outputs(self) -> usize {
        match self {
            Task::Classify(c) => c,
            Task::Regress => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<CsrGraph>,
    pub task: Task,
    pub feature_dim: usize,
    /// Point coordinates per graph, present for generated point-pattern sets.
    pub positions: Option<Vec<PointPattern>>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, graphs: Vec<CsrGraph>, task: Task) -> Result<Self> {
        let feature_dim = graphs.first().map_or(0, |g| g.feature_dim());
        let ds = Self {
            name: name.into(),
            graphs,
            task,
            feature_dim,
            positions: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_positions(mut self, positions: Vec<PointPattern>) -> Result<Self> {
        if positions.len() != self.graphs.len()
            || positions.iter().zip(&self.graphs).any(|(p, g)| p.points.len() != g.node_count())
        {
            return Err(PanError::InvalidArgument("positions do not match graphs".into()));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    fn validate(&self) -> Result<()> {
        for (i, g) in self.graphs.iter().enumerate() {
            if g.feature_dim() != self.feature_dim {
                return Err(PanError::Format(format!(
                    "graph {i} has feature dim {}, expected {}",
                    g.feature_dim(),
                    self.feature_dim
                )));
            }
            match (self.task, g.label()) {
                (Task::Classify(c), Label::Class(k)) if k < c => {}
                (Task::Regress, Label::Value(_)) => {}
                (_, l) => return Err(PanError::Format(format!("graph {i} label {l:?} invalid for task {:?}", self.task))),
            }
        }
        Ok(())
    }

    pub fn avg_nodes(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(|g| g.node_count() as f64).sum::<f64>() / self.len() as f64
    }

    pub fn avg_edges(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.graphs.iter().map(|g| g.edge_count() as f64).sum::<f64>() / self.len() as f64
    }

    pub fn subset(&self, idx: &[usize]) -> Vec<&CsrGraph> {
        idx.iter().map(|&i| &self.graphs[i]).collect()
    }
}

// ---------------------------------------------------------------------------
// TU format

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    if !path.exists() {
        return Err(PanError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> PanError {
    PanError::Parse {
        file: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_ints(path: &Path) -> Result<Vec<(usize, Vec<i64>)>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| {
            let vals = fields(&l)
                .map(|f| f.parse::<i64>().map_err(|_| parse_err(path, n, format!("not an integer: '{f}'"))))
                .collect::<Result<Vec<_>>>()?;
            Ok((n, vals))
        })
        .collect()
}

fn parse_reals(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, l)| {
            let vals = fields(&l)
                .map(|f| f.parse::<f64>().map_err(|_| parse_err(path, n, format!("not a number: '{f}'"))))
                .collect::<Result<Vec<_>>>()?;
            Ok((n, vals))
        })
        .collect()
}

fn single_column(path: &Path, rows: Vec<(usize, Vec<i64>)>) -> Result<Vec<i64>> {
    rows.into_iter()
        .map(|(n, v)| match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(parse_err(path, n, format!("expected one value, got {}", v.len()))),
        })
        .collect()
}

/// Options for [`parse_tu_dataset_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TuOptions {
    /// Standardize each continuous attribute column to zero mean, unit variance.
    pub standardize_attributes: bool,
}

pub fn parse_tu_dataset(dir: &Path, name: &str) -> Result<Dataset> {
    parse_tu_dataset_with(dir, name, TuOptions::default())
}

/// Reads `{name}_A.txt`, `{name}_graph_indicator.txt`, `{name}_graph_labels.txt` and the optional
/// node label / attribute files from `dir`.
///
/// Nodes without labels or attributes get a single constant feature.
pub fn parse_tu_dataset_with(dir: &Path, name: &str, opts: TuOptions) -> Result<Dataset> {
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}_{suffix}.txt")) };

    let ind_path = file("graph_indicator");
    let indicator = single_column(&ind_path, parse_ints(&ind_path)?)?;
    let lab_path = file("graph_labels");
    let raw_labels = single_column(&lab_path, parse_ints(&lab_path)?)?;
    let a_path = file("A");
    let edges = parse_ints(&a_path)?;

    let num_graphs = raw_labels.len();
    let num_nodes = indicator.len();
    // graph of each node, 0-based, and the node range of each graph
    let mut node_graph = Vec::with_capacity(num_nodes);
    for (k, &g) in indicator.iter().enumerate() {
        if g < 1 || g as usize > num_graphs {
            return Err(parse_err(&ind_path, k + 1, format!("graph id {g} outside 1..={num_graphs}")));
        }
        node_graph.push(g as usize - 1);
    }
    if node_graph.windows(2).any(|w| w[1] < w[0]) {
        return Err(PanError::Format(format!("{}: nodes are not grouped by graph", ind_path.display())));
    }
    let mut offsets = vec![0usize; num_graphs + 1];
    for &g in &node_graph {
        offsets[g + 1] += 1;
    }
    for g in 0..num_graphs {
        offsets[g + 1] += offsets[g];
    }

    let mut per_graph: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); num_graphs];
    for (line, v) in edges {
        let (a, b) = match v.as_slice() {
            [a, b] => (*a, *b),
            _ => return Err(parse_err(&a_path, line, "expected two node ids")),
        };
        for x in [a, b] {
            if x < 1 || x as usize > num_nodes {
                return Err(parse_err(&a_path, line, format!("node {x} outside 1..={num_nodes}")));
            }
        }
        let (a, b) = (a as usize - 1, b as usize - 1);
        let g = node_graph[a];
        if node_graph[b] != g {
            return Err(parse_err(
                &a_path,
                line,
                format!("edge ({}, {}) joins graphs {} and {}", a + 1, b + 1, g + 1, node_graph[b] + 1),
            ));
        }
        if a != b {
            let base = offsets[g];
            per_graph[g].insert(((a.min(b)) - base, a.max(b) - base));
        }
    }

    // optional node labels, one-hot over the sorted distinct values
    let nl_path = file("node_labels");
    let node_labels = if nl_path.exists() {
        let rows = parse_ints(&nl_path)?;
        if rows.len() != num_nodes {
            return Err(PanError::Format(format!(
                "{} has {} rows for {num_nodes} nodes",
                nl_path.display(),
                rows.len()
            )));
        }
        // multi-column node labels: only the first column is used
        Some(
            rows.into_iter()
                .map(|(n, v)| v.first().copied().ok_or_else(|| parse_err(&nl_path, n, "empty row")))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let at_path = file("node_attributes");
    let attributes = if at_path.exists() {
        let rows = parse_reals(&at_path)?;
        if rows.len() != num_nodes {
            return Err(PanError::Format(format!(
                "{} has {} rows for {num_nodes} nodes",
                at_path.display(),
                rows.len()
            )));
        }
        let width = rows[0].1.len();
        if let Some((n, _)) = rows.iter().find(|(_, v)| v.len() != width) {
            return Err(parse_err(&at_path, *n, format!("expected {width} attributes")));
        }
        let mut m = Array2::zeros((num_nodes, width));
        for (i, (_, v)) in rows.iter().enumerate() {
            for (j, &x) in v.iter().enumerate() {
                m[[i, j]] = x;
            }
        }
        if opts.standardize_attributes {
            standardize_columns(&mut m);
        }
        Some(m)
    } else {
        None
    };

    let label_index: BTreeMap<i64, usize> = node_labels
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();
    let one_hot_width = label_index.len();
    let attr_width = attributes.as_ref().map_or(0, |a| a.ncols());
    let feature_dim = if one_hot_width + attr_width == 0 { 1 } else { one_hot_width + attr_width };

    let class_index: BTreeMap<i64, usize> = raw_labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, i))
        .collect();

    let mut graphs = Vec::with_capacity(num_graphs);
    for g in 0..num_graphs {
        let (lo, hi) = (offsets[g], offsets[g + 1]);
        let n = hi - lo;
        let pairs: Vec<_> = per_graph[g].iter().copied().collect();
        let adj = csr_from_pairs(&pairs, n, true)?;
        let mut x = Array2::zeros((n, feature_dim));
        if feature_dim == 1 && one_hot_width + attr_width == 0 {
            x.fill(1.0);
        }
        for i in 0..n {
            if let Some(nl) = &node_labels {
                x[[i, label_index[&nl[lo + i]]]] = 1.0;
            }
            if let Some(at) = &attributes {
                for j in 0..attr_width {
                    x[[i, one_hot_width + j]] = at[[lo + i, j]];
                }
            }
        }
        graphs.push(CsrGraph::new(adj, x, Label::Class(class_index[&raw_labels[g]]))?);
    }
    Dataset::new(name, graphs, Task::Classify(class_index.len()))
}

/// Writes `A`, `graph_indicator`, `graph_labels` and `node_attributes` (the feature matrix) files.
///
/// Classification labels are written as class indices, so a parse of the output reproduces `ds`.
pub fn write_tu_dataset(ds: &Dataset, dir: &Path, name: &str) -> Result<()> {
    use std::fmt::Write as _;
    let (mut a, mut ind, mut lab, mut attr) = (String::new(), String::new(), String::new(), String::new());
    let mut base = 0usize;
    for (gi, g) in ds.graphs.iter().enumerate() {
        for (i, j, _) in g.adj().to_edge_list() {
            let _ = writeln!(a, "{}, {}", base + i + 1, base + j + 1);
        }
        for row in g.features().rows() {
            let _ = writeln!(ind, "{}", gi + 1);
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(attr, "{}", cells.join(", "));
        }
        match g.label() {
            Label::Class(c) => writeln!(lab, "{c}"),
            Label::Value(v) => writeln!(lab, "{v}"),
        }
        .expect("write to string");
        base += g.node_count();
    }
    fs::create_dir_all(dir)?;
    for (suffix, body) in [("A", a), ("graph_indicator", ind), ("graph_labels", lab), ("node_attributes", attr)] {
        fs::write(dir.join(format!("{name}_{suffix}.txt")), body)?;
    }
    Ok(())
}

fn standardize_columns(m: &mut Array2<f64>) {
    for mut col in m.columns_mut() {
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        col.mapv_inplace(|x| (x - mean) / sd);
    }
}

// ---------------------------------------------------------------------------
// PANDS1 binary format
//
// header:   "PANDS1" | name_len u32 | name utf8 | task u8 (0 classify, 1 regress) | num_classes u32
//           | feature_dim u64 | num_graphs u64 | has_positions u8
// graph:    n u64 | nnz u64 | row_ptr (n+1)*u64 | col_idx nnz*u64 | values nnz*f64
//           | features n*d f64 (row-major) | label tag u8 + (u64 class | f64 value)
// positions (if flagged), per graph: kind u8 | box f64 | radius f64 | n*(x f64, y f64)
// trailer:  CRC32 (IEEE) of every preceding byte, u32
// All integers and floats little-endian.

pub const DATASET_MAGIC: &[u8; 6] = b"PANDS1";

pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new(magic: &[u8]) -> Self {
        Self { buf: magic.to_vec() }
    }
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }
    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic and CRC trailer, returning a reader positioned after the magic.
    pub fn open(data: &'a [u8], magic: &[u8], what: &str) -> Result<Self> {
        if data.len() < magic.len() || &data[..magic.len()] != magic {
            let found = String::from_utf8_lossy(&data[..data.len().min(magic.len())]).into_owned();
            return Err(PanError::Format(format!(
                "not a {what} file: expected magic {:?}, found {found:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        if data.len() < magic.len() + 4 {
            return Err(PanError::Format(format!("truncated {what} file")));
        }
        let (body, trailer) = data.split_at(data.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        let actual = crc32fast::hash(body);
        if stored != actual {
            return Err(PanError::Format(format!(
                "{what} checksum mismatch (stored {stored:08x}, computed {actual:08x}); file corrupted or truncated"
            )));
        }
        Ok(Self {
            data: body,
            pos: magic.len(),
        })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(PanError::Format("unexpected end of data".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| PanError::Format("length overflows usize".into()))
    }
    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| PanError::Format("invalid utf-8 string".into()))
    }
    /// Guards allocation against corrupt lengths: `count * elem` must fit in what remains.
    pub fn check_len(&self, count: usize, elem: usize) -> Result<()> {
        match count.checked_mul(elem) {
            Some(b) if b <= self.data.len() - self.pos => Ok(()),
            _ => Err(PanError::Format("declared length exceeds file size".into())),
        }
    }
    pub fn done(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(PanError::Format(format!("{} trailing bytes", self.data.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn dataset_to_bytes(ds: &Dataset) -> Vec<u8> {
    let mut w = Writer::new(DATASET_MAGIC);
    w.str(&ds.name);
    match ds.task {
        Task::Classify(c) => {
            w.u8(0);
            w.u32(c as u32);
        }
        Task::Regress => {
            w.u8(1);
            w.u32(0);
        }
    }
    w.u64(ds.feature_dim as u64);
    w.u64(ds.graphs.len() as u64);
    w.u8(ds.positions.is_some() as u8);
    for g in &ds.graphs {
        let a = g.adj();
        w.u64(g.node_count() as u64);
        w.u64(a.nnz() as u64);
        a.row_ptr().iter().for_each(|&v| w.u64(v as u64));
        a.col_idx().iter().for_each(|&v| w.u64(v as u64));
        a.values().iter().for_each(|&v| w.f64(v));
        g.features().iter().for_each(|&v| w.f64(v));
        match g.label() {
            Label::Class(c) => {
                w.u8(0);
                w.u64(c as u64);
            }
            Label::Value(v) => {
                w.u8(1);
                w.f64(v);
            }
        }
    }
    if let Some(pos) = &ds.positions {
        for p in pos {
            w.u8(p.kind.label() as u8);
            w.f64(p.box_len);
            w.f64(p.radius);
            for q in &p.points {
                w.f64(q[0]);
                w.f64(q[1]);
            }
        }
    }
    w.finish()
}

pub fn dataset_from_bytes(data: &[u8]) -> Result<Dataset> {
    let mut r = Reader::open(data, DATASET_MAGIC, "PANDS1 dataset")?;
    let name = r.str()?;
    let task = match (r.u8()?, r.u32()?) {
        (0, c) => Task::Classify(c as usize),
        (1, _) => Task::Regress,
        (t, _) => return Err(PanError::Format(format!("unknown task tag {t}"))),
    };
    let feature_dim = r.usize()?;
    let num_graphs = r.usize()?;
    let has_positions = r.u8()? != 0;
    r.check_len(num_graphs, 16)?;
    let mut graphs = Vec::with_capacity(num_graphs);
    for _ in 0..num_graphs {
        let n = r.usize()?;
        let nnz = r.usize()?;
        r.check_len(n + 1, 8)?;
        let row_ptr = (0..=n).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        r.check_len(nnz, 16)?;
        let col_idx = (0..nnz).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let values = (0..nnz).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let adj = CsrMatrix::from_raw(n, n, row_ptr, col_idx, values)?;
        r.check_len(n, feature_dim.saturating_mul(8))?;
        let feats = (0..n * feature_dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let x = Array2::from_shape_vec((n, feature_dim), feats).map_err(|e| PanError::Format(e.to_string()))?;
        let label = match r.u8()? {
            0 => Label::Class(r.usize()?),
            1 => Label::Value(r.f64()?),
            t => return Err(PanError::Format(format!("unknown label tag {t}"))),
        };
        graphs.push(CsrGraph::new(adj, x, label)?);
    }
    let positions = if has_positions {
        let mut out = Vec::with_capacity(num_graphs);
        for g in &graphs {
            let kind = match r.u8()? {
                0 => PatternKind::HardDisks,
                1 => PatternKind::Poisson,
                2 => PatternKind::Rsa,
                k => return Err(PanError::Format(format!("unknown pattern kind {k}"))),
            };
            let box_len = r.f64()?;
            let radius = r.f64()?;
            let points = (0..g.node_count())
                .map(|_| Ok([r.f64()?, r.f64()?]))
                .collect::<Result<Vec<_>>>()?;
            out.push(PointPattern {
                points,
                box_len,
                radius,
                kind,
            });
        }
        Some(out)
    } else {
        None
    };
    r.done()?;
    let ds = Dataset {
        name,
        graphs,
        task,
        feature_dim,
        positions,
    };
    ds.validate()?;
    Ok(ds)
}

/// Writes a PANDS1 file, creating missing parent directories.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, dataset_to_bytes(ds))?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(PanError::MissingFile(path.to_path_buf()));
    }
    dataset_from_bytes(&fs::read(path)?)
}

// ---------------------------------------------------------------------------
// Splits

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: (f64, f64, f64),
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let s = Self {
            fractions: (train, val, test),
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, c) = self.fractions;
        if [a, b, c].iter().any(|f| !(*f >= 0.0)) || ((a + b + c) - 1.0).abs() > 1e-9 {
            return Err(PanError::InvalidArgument(format!(
                "split fractions must be non-negative and sum to 1, got ({a}, {b}, {c})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded shuffle of `0..n`, then val and test take `floor(frac * n)` each and train the rest.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let count = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
    let n_val = count(spec.fractions.1);
    let n_test = count(spec.fractions.2).min(n - n_val);
    let n_train = n - n_val - n_test;
    Ok(Split {
        train: idx[..n_train].to_vec(),
        val: idx[n_train..n_train + n_val].to_vec(),
        test: idx[n_train + n_val..].to_vec(),
        seed: spec.seed,
    })
}

pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    split_indices(ds.len(), spec)
}

impl Split {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::p3;

    fn write_tu(dir: &Path, name: &str, files: &[(&str, &str)]) {
        for (suffix, body) in files {
            fs::write(dir.join(format!("{name}_{suffix}.txt")), body).unwrap();
        }
    }

    #[test]
    fn tu_single_p3() {
        let d = tempfile::tempdir().unwrap();
        write_tu(
            d.path(),
            "T",
            &[("A", "1, 2\n2, 1\n2, 3\n3, 2\n"), ("graph_indicator", "1\n1\n1\n"), ("graph_labels", "1\n")],
        );
        let ds = parse_tu_dataset(d.path(), "T").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.graphs[0].adj(), p3().adj());
        assert_eq!(ds.graphs[0].label(), Label::Class(0));
        assert_eq!(ds.task, Task::Classify(1));
        assert_eq!(ds.feature_dim, 1);
    }

    #[test]
    fn tu_two_graphs_and_label_remap() {
        let d = tempfile::tempdir().unwrap();
        write_tu(
            d.path(),
            "T",
            &[
                ("A", "1 2\n2 1\n3 4\n4 3\n"),
                ("graph_indicator", "1\n1\n2\n2\n"),
                ("graph_labels", "-1\n1\n"),
                ("node_labels", "5\n7\n5\n5\n"),
                ("node_attributes", "0.5, 1\n1.5, 2\n2.5, 3\n3.5, 4\n"),
            ],
        );
        let ds = parse_tu_dataset(d.path(), "T").unwrap();
        assert_eq!(ds.len(), 2);
        assert!(ds.graphs.iter().all(|g| g.edge_count() == 1 && g.node_count() == 2));
        assert_eq!(ds.graphs[0].label(), Label::Class(0));
        assert_eq!(ds.graphs[1].label(), Label::Class(1));
        assert_eq!(ds.feature_dim, 4);
        assert_eq!(ds.graphs[0].features().row(1).to_vec(), vec![0.0, 1.0, 1.5, 2.0]);
        assert_eq!(ds.graphs[1].features().row(0).to_vec(), vec![1.0, 0.0, 2.5, 3.0]);
    }

    #[test]
    fn tu_errors() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(parse_tu_dataset(d.path(), "T"), Err(PanError::MissingFile(_))));
        write_tu(
            d.path(),
            "T",
            &[("A", "1, 3\n"), ("graph_indicator", "1\n1\n2\n"), ("graph_labels", "0\n1\n")],
        );
        assert!(matches!(parse_tu_dataset(d.path(), "T"), Err(PanError::Parse { line: 1, .. })));
        write_tu(d.path(), "T", &[("A", "1, x\n")]);
        assert!(matches!(parse_tu_dataset(d.path(), "T"), Err(PanError::Parse { .. })));
    }

    fn sample() -> Dataset {
        let g0 = p3().with_label(Label::Class(1));
        let g1 = CsrGraph::from_pairs(&[(0, 1)], 2).unwrap().with_label(Label::Class(0));
        Dataset::new("s", vec![g0, g1], Task::Classify(2)).unwrap()
    }

    #[test]
    fn pands_round_trip() {
        let ds = sample();
        let bytes = dataset_to_bytes(&ds);
        assert_eq!(dataset_from_bytes(&bytes).unwrap(), ds);

        let empty = Dataset::new("e", vec![], Task::Regress).unwrap();
        assert_eq!(dataset_from_bytes(&dataset_to_bytes(&empty)).unwrap(), empty);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(dataset_from_bytes(&bad), Err(PanError::Format(m)) if m.contains("magic")));

        let mut flipped = bytes.clone();
        flipped[20] ^= 0xff;
        assert!(matches!(dataset_from_bytes(&flipped), Err(PanError::Format(m)) if m.contains("checksum")));

        assert!(dataset_from_bytes(&bytes[..bytes.len() - 9]).is_err());
    }

    #[test]
    fn splits() {
        let s = split_indices(10, &SplitSpec::new(0.8, 0.1, 0.1, 3).unwrap()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (8, 1, 1));
        assert_eq!(s, split_indices(10, &SplitSpec::new(0.8, 0.1, 0.1, 3).unwrap()).unwrap());
        let mut all: Vec<_> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());

        let big = split_indices(15000, &SplitSpec::new(0.8, 0.1, 0.1, 0).unwrap()).unwrap();
        assert_eq!((big.train.len(), big.val.len(), big.test.len()), (12000, 1500, 1500));
        assert!(SplitSpec::new(0.5, 0.1, 0.1, 0).is_err());
        assert!(s.to_json().unwrap().starts_with("{\"train\":["));
    }
}
