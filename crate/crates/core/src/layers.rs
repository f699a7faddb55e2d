//! PANConv, PANPool and its variants, top-k selection, readout and losses.
//!
//! Each operation comes in two forms: a plain numeric function over
//! [`MetMatrix`] (inspection, centrality, tests) and a tape form used for
//! training, where the MET matrix is assembled from differentiable pieces so
//! that gradients reach the series log-weights.

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use crate::autograd::{Tape, Tensor, Var};
use crate::error::{shape_err, PanError, Result};
use crate::graph::{induced_subgraph, CsrGraph};
use crate::met::{adjacency_powers, MetMatrix, NormMode};

/// Node scoring rule used by a pooling layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoolVariant {
    /// `Xp + beta * diag(M)`
    #[default]
    Hybrid,
    /// `diag(S)`, the unnormalized series diagonal.
    Um,
    /// `Xp + beta * diag(S)`
    Xum,
    /// Row norms of `M X`.
    M,
    /// `Xp * diag(M)`, elementwise.
    Xhm,
    /// `Xp` alone.
    TopkOnly,
}

impl PoolVariant {
    pub const ALL: [PoolVariant; 6] = [
        PoolVariant::Hybrid,
        PoolVariant::Um,
        PoolVariant::Xum,
        PoolVariant::M,
        PoolVariant::Xhm,
        PoolVariant::TopkOnly,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hybrid" => Ok(Self::Hybrid),
            "um" => Ok(Self::Um),
            "xum" => Ok(Self::Xum),
            "m" => Ok(Self::M),
            "xhm" => Ok(Self::Xhm),
            "topk_only" | "topk" => Ok(Self::TopkOnly),
            other => Err(PanError::InvalidArgument(format!("unknown pooling variant '{other}'"))),
        }
    }

    pub fn uses_projection(self) -> bool {
        matches!(self, Self::Hybrid | Self::Xum | Self::Xhm | Self::TopkOnly)
    }

    pub fn uses_beta(self) -> bool {
        matches!(self, Self::Hybrid | Self::Xum)
    }
}

/// Parameters of one convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PanConvLayer {
    /// Log series weights, `(L+1) x 1`.
    pub theta: Tensor,
    /// `d_in x d_out`.
    pub weight: Tensor,
    pub mode: NormMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanPoolLayer {
    /// Projection, `d x 1`.
    pub p: Tensor,
    pub beta: f64,
    pub ratio: f64,
    pub variant: PoolVariant,
}

impl PanPoolLayer {
    pub fn new(p: Tensor, beta: f64, ratio: f64, variant: PoolVariant) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(PanError::InvalidArgument(format!("pooling ratio must be in (0, 1], got {ratio}")));
        }
        if p.ncols() != 1 {
            return Err(shape_err("PanPoolLayer::new", "d x 1 projection", format!("{:?}", p.dim())));
        }
        let beta = if variant == PoolVariant::TopkOnly { 0.0 } else { beta };
        Ok(Self { p, beta, ratio, variant })
    }
}

#[derive(Debug, Clone)]
pub struct PoolResult {
    pub pooled_features: Tensor,
    pub kept_indices: Vec<usize>,
    pub pooled_graph: CsrGraph,
    pub scores: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    #[default]
    Mean,
    Max,
}

/// `M x W` with `M` built from the layer's weights; returns the MET matrix for pooling.
pub fn panconv_forward(x: &Tensor, g: &CsrGraph, layer: &PanConvLayer) -> Result<(Tensor, MetMatrix)> {
    if x.nrows() != g.node_count() {
        return Err(shape_err("panconv_forward", g.node_count(), x.nrows()));
    }
    if x.ncols() != layer.weight.nrows() {
        return Err(shape_err("panconv_forward", layer.weight.nrows(), x.ncols()));
    }
    let w = crate::met::SeriesWeights::from_theta(layer.theta.column(0).to_vec())?;
    let met = crate::met::met_matrix(g.adj(), &w, layer.mode)?;
    let out = met.m.dot(x).dot(&layer.weight);
    Ok((out, met))
}

/// Node scores for `layer.variant`.
pub fn pool_score(x: &Tensor, met: &MetMatrix, layer: &PanPoolLayer) -> Result<Array1<f64>> {
    if x.nrows() != met.size() {
        return Err(shape_err("pool_score", met.size(), x.nrows()));
    }
    let proj = || -> Result<Array1<f64>> {
        if layer.p.nrows() != x.ncols() {
            return Err(shape_err("pool_score", format!("projection of length {}", x.ncols()), layer.p.nrows()));
        }
        Ok(x.dot(&layer.p).column(0).to_owned())
    };
    Ok(match layer.variant {
        PoolVariant::Hybrid => proj()? + &(&met.diag * layer.beta),
        PoolVariant::Um => met.series_diag.clone(),
        PoolVariant::Xum => proj()? + &(&met.series_diag * layer.beta),
        PoolVariant::M => met
            .m
            .dot(x)
            .map_axis(Axis(1), |row| row.dot(&row).sqrt()),
        PoolVariant::Xhm => proj()? * &met.diag,
        PoolVariant::TopkOnly => proj()?,
    })
}

/// `ceil(ratio * n)`, at least one.
pub fn kept_count(ratio: f64, n: usize) -> usize {
    (((ratio * n as f64) - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Top `ceil(ratio * N_g)` nodes of every graph, ties to the lower index, sorted.
pub fn topk_select(score: &[f64], node_to_graph: &[usize], ratio: f64) -> Result<Vec<usize>> {
    if score.len() != node_to_graph.len() {
        return Err(shape_err("topk_select", node_to_graph.len(), score.len()));
    }
    if score.iter().any(|s| s.is_nan()) {
        return Err(PanError::NonFinite("NaN pooling score".into()));
    }
    let mut kept = Vec::new();
    let mut start = 0;
    while start < score.len() {
        let gid = node_to_graph[start];
        let end = start + node_to_graph[start..].iter().take_while(|&&g| g == gid).count();
        let mut order: Vec<usize> = (start..end).collect();
        order.sort_by(|&a, &b| score[b].total_cmp(&score[a]).then(a.cmp(&b)));
        let mut chosen = order[..kept_count(ratio, end - start)].to_vec();
        chosen.sort_unstable();
        kept.extend(chosen);
        start = end;
    }
    Ok(kept)
}

/// Gathers the kept rows, gates them by `tanh(score)`, and restricts the graph.
pub fn pool_apply(x: &Tensor, g: &CsrGraph, kept: &[usize], score: &Array1<f64>) -> Result<PoolResult> {
    let mut pooled = x.select(Axis(0), kept);
    for (k, &i) in kept.iter().enumerate() {
        let gate = score[i].tanh();
        pooled.row_mut(k).mapv_inplace(|v| v * gate);
    }
    let pooled_graph = induced_subgraph(g, kept)?.with_features(pooled.clone())?;
    Ok(PoolResult {
        pooled_features: pooled,
        kept_indices: kept.to_vec(),
        pooled_graph,
        scores: score.clone(),
    })
}

/// Segment mean or max of `x` rows by graph.
pub fn global_readout(x: &Tensor, node_to_graph: &[usize], num_graphs: usize, mode: Readout) -> Result<Tensor> {
    let tape = Tape::new();
    let v = readout_on_tape(tape.constant(x.clone()), node_to_graph, num_graphs, mode)?;
    let out = v.value().clone();
    Ok(out)
}

/// Mean over graphs of `-log softmax(logits)[label]`.
pub fn cross_entropy_loss(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let tape = Tape::new();
    Ok(cross_entropy_on_tape(tape.constant(logits.clone()), labels)?.item())
}

/// `(mse, mae)`.
pub fn regression_losses(pred: &[f64], target: &[f64]) -> Result<(f64, f64)> {
    if pred.len() != target.len() {
        return Err(shape_err("regression_losses", target.len(), pred.len()));
    }
    if pred.is_empty() {
        return Ok((0.0, 0.0));
    }
    let n = pred.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        let r = p - t;
        se += r * r;
        ae += r.abs();
    }
    Ok((se / n, ae / n))
}

// ---------------------------------------------------------------------------
// tape forms

/// MET matrix assembled on the tape.
pub struct TapeMet<'t> {
    pub series: Var<'t>,
    pub m: Var<'t>,
    pub z: Var<'t>,
}

impl<'t> TapeMet<'t> {
    pub fn diag(&self) -> Result<Var<'t>> {
        self.m.diag()
    }

    pub fn series_diag(&self) -> Result<Var<'t>> {
        self.series.diag()
    }
}

/// Builds `S = sum exp(theta[n]) A^n`, `Z`, and `M` from elementary tape operations.
pub fn met_on_tape<'t>(tape: &'t Tape, g: &CsrGraph, theta: Var<'t>, mode: NormMode) -> Result<TapeMet<'t>> {
    let (terms, cols) = theta.shape();
    if cols != 1 || terms == 0 {
        return Err(shape_err("met_on_tape", "(L+1) x 1 theta", format!("{:?}", theta.shape())));
    }
    let powers = adjacency_powers(g.adj(), terms - 1)?;
    let w = theta.exp();
    let mut series: Option<Var<'t>> = None;
    for (n, p) in powers.into_iter().enumerate() {
        let term = tape.constant(p).scale(w.gather_rows(&[n])?)?;
        series = Some(match series {
            None => term,
            Some(acc) => acc.add(term)?,
        });
    }
    let series = series.expect("at least one term");
    let z = series.row_sum();
    let m = match mode {
        NormMode::Unnormalized => series,
        NormMode::Symmetric => {
            let r = z.rsqrt();
            series.diag_scale_rows(r)?.diag_scale_cols(r)?
        }
        NormMode::RandomWalk => {
            let r = z.rsqrt();
            series.diag_scale_rows(r.mul(r)?)?
        }
        NormMode::Sender => {
            let r = z.rsqrt();
            series.diag_scale_cols(r.mul(r)?)?
        }
    };
    Ok(TapeMet { series, m, z })
}

/// `M X W` on the tape. Multiplication order follows the cheaper side.
pub fn panconv_on_tape<'t>(
    tape: &'t Tape,
    x: Var<'t>,
    g: &CsrGraph,
    theta: Var<'t>,
    weight: Var<'t>,
    mode: NormMode,
) -> Result<(Var<'t>, TapeMet<'t>)> {
    if x.shape().0 != g.node_count() {
        return Err(shape_err("panconv", g.node_count(), x.shape().0));
    }
    let met = met_on_tape(tape, g, theta, mode)?;
    let (d_in, d_out) = weight.shape();
    let out = if d_in <= d_out {
        met.m.matmul(x)?.matmul(weight)?
    } else {
        met.m.matmul(x.matmul(weight)?)?
    };
    Ok((out, met))
}

/// Pool parameters as tape variables. Unused ones may be `None`.
pub struct PoolVars<'t> {
    pub p: Option<Var<'t>>,
    pub beta: Option<Var<'t>>,
}

pub fn pool_score_on_tape<'t>(
    x: Var<'t>,
    met: &TapeMet<'t>,
    vars: &PoolVars<'t>,
    variant: PoolVariant,
) -> Result<Var<'t>> {
    let need = |v: Option<Var<'t>>, what: &str| {
        v.ok_or_else(|| PanError::InvalidArgument(format!("{variant:?} pooling needs {what}")))
    };
    let proj = || -> Result<Var<'t>> { x.matmul(need(vars.p, "a projection")?) };
    match variant {
        PoolVariant::Hybrid => proj()?.add(met.diag()?.scale(need(vars.beta, "beta")?)?),
        PoolVariant::Um => met.series_diag(),
        PoolVariant::Xum => proj()?.add(met.series_diag()?.scale(need(vars.beta, "beta")?)?),
        PoolVariant::M => {
            let mx = met.m.matmul(x)?;
            Ok(mx.mul(mx)?.row_sum().sqrt())
        }
        PoolVariant::Xhm => proj()?.mul(met.diag()?),
        PoolVariant::TopkOnly => proj(),
    }
}

/// Scores, selects and gates one graph's nodes on the tape.
pub fn pool_on_tape<'t>(
    x: Var<'t>,
    g: &CsrGraph,
    met: &TapeMet<'t>,
    vars: &PoolVars<'t>,
    variant: PoolVariant,
    ratio: f64,
) -> Result<(Var<'t>, CsrGraph, Vec<usize>)> {
    let score = pool_score_on_tape(x, met, vars, variant)?;
    let values: Vec<f64> = score.value().column(0).to_vec();
    let kept = topk_select(&values, &vec![0; g.node_count()], ratio)?;
    let pooled = x.topk_mask_mul(score.tanh(), &kept)?;
    let pooled_graph = induced_subgraph(g, &kept)?;
    Ok((pooled, pooled_graph, kept))
}

pub fn readout_on_tape<'t>(x: Var<'t>, node_to_graph: &[usize], num_graphs: usize, mode: Readout) -> Result<Var<'t>> {
    match mode {
        Readout::Mean => x.segment_mean(node_to_graph, num_graphs),
        Readout::Max => x.segment_max(node_to_graph, num_graphs),
    }
}

pub fn cross_entropy_on_tape<'t>(logits: Var<'t>, labels: &[usize]) -> Result<Var<'t>> {
    logits.log_softmax_rows().nll_loss(labels)
}
