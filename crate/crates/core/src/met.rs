//! Maximal entropy transition (MET) matrices.
//!
//! For adjacency `A`, cutoff `L` and positive weights `w`, the path series is
//! `S = sum_{n=0}^{L} w[n] A^n`. Row sums of `S` form the partition vector `Z`,
//! and the MET matrix is `S` normalized on the left, right, or both sides by `Z`.
//!
//! This is the plain numeric route, used for inspection and centrality. The
//! trainable layers build the same matrix on the autodiff tape.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, PanError, Result};
use crate::graph::{spmm_into, CsrMatrix};

/// Learnable path-length weights, stored as log-weights so that `w[n] = exp(theta[n]) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesWeights {
    theta: Vec<f64>,
}

impl SeriesWeights {
    /// Uniform unit weights for cutoff `cutoff`.
    pub fn uniform(cutoff: usize) -> Self {
        Self {
            theta: vec![0.0; cutoff + 1],
        }
    }

    pub fn from_theta(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(PanError::InvalidArgument("series weights need at least one term".into()));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(PanError::NonFinite("theta".into()));
        }
        Ok(Self { theta })
    }

    /// From strictly positive weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        if let Some(bad) = w.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return Err(PanError::InvalidArgument(format!("series weights must be positive, got {bad}")));
        }
        Self::from_theta(w.iter().map(|x| x.ln()).collect())
    }

    pub fn cutoff(&self) -> usize {
        self.theta.len() - 1
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn weights(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.exp()).collect()
    }
}

/// How the path series is normalized by the partition vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// `Z^-1 S`, rows sum to one.
    RandomWalk,
    /// `Z^-1/2 S Z^-1/2`.
    #[default]
    Symmetric,
    /// `S Z^-1`, columns sum to one.
    Sender,
    /// `S` itself.
    Unnormalized,
}

impl NormMode {
    pub const ALL: [NormMode; 4] = [
        NormMode::RandomWalk,
        NormMode::Symmetric,
        NormMode::Sender,
        NormMode::Unnormalized,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rw" | "random_walk" => Ok(NormMode::RandomWalk),
            "sym" | "symmetric" => Ok(NormMode::Symmetric),
            "sender" => Ok(NormMode::Sender),
            "unnorm" | "unnormalized" => Ok(NormMode::Unnormalized),
            other => Err(PanError::InvalidArgument(format!("unknown normalization mode '{other}'"))),
        }
    }

    /// Exponents `(left, right)` applied to `Z`.
    pub fn exponents(self) -> (f64, f64) {
        match self {
            NormMode::RandomWalk => (1.0, 0.0),
            NormMode::Symmetric => (0.5, 0.5),
            NormMode::Sender => (0.0, 1.0),
            NormMode::Unnormalized => (0.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetMatrix {
    pub m: Array2<f64>,
    pub z: Array1<f64>,
    pub diag: Array1<f64>,
    /// Diagonal of the unnormalized series `S`.
    pub series_diag: Array1<f64>,
    pub mode: NormMode,
    pub cutoff: usize,
}

impl MetMatrix {
    pub fn size(&self) -> usize {
        self.m.nrows()
    }
}

/// Dense powers `A^0 .. A^cutoff`, each computed as `A * P_{n-1}`.
pub fn adjacency_powers(a: &CsrMatrix, cutoff: usize) -> Result<Vec<Array2<f64>>> {
    if !a.is_square() {
        return Err(shape_err("adjacency_powers", "square matrix", format!("{}x{}", a.num_rows(), a.num_cols())));
    }
    let n = a.num_rows();
    let mut powers = Vec::with_capacity(cutoff + 1);
    powers.push(Array2::eye(n));
    for k in 1..=cutoff {
        let mut next = Array2::zeros((n, n));
        spmm_into(a, &powers[k - 1], &mut next);
        powers.push(next);
    }
    Ok(powers)
}

/// `S = sum_n w[n] A^n`.
pub fn weighted_power_series(a: &CsrMatrix, w: &SeriesWeights) -> Result<Array2<f64>> {
    if !a.is_square() {
        return Err(shape_err(
            "weighted_power_series",
            "square matrix",
            format!("{}x{}", a.num_rows(), a.num_cols()),
        ));
    }
    let n = a.num_rows();
    let weights = w.weights();
    let mut s = Array2::<f64>::eye(n) * weights[0];
    let mut p = Array2::<f64>::eye(n);
    let mut next = Array2::<f64>::zeros((n, n));
    for &wk in &weights[1..] {
        next.fill(0.0);
        spmm_into(a, &p, &mut next);
        std::mem::swap(&mut p, &mut next);
        s.scaled_add(wk, &p);
    }
    Ok(s)
}

/// Row sums of the series.
pub fn partition_vector(s: &Array2<f64>) -> Array1<f64> {
    s.sum_axis(ndarray::Axis(1))
}

/// Applies `Z^-left S Z^-right` for the given mode.
pub fn normalize(s: &Array2<f64>, z: &Array1<f64>, mode: NormMode) -> Array2<f64> {
    let (left, right) = mode.exponents();
    let lscale: Vec<f64> = z.iter().map(|v| v.powf(-left)).collect();
    let rscale: Vec<f64> = z.iter().map(|v| v.powf(-right)).collect();
    let mut m = s.clone();
    for ((i, j), v) in m.indexed_iter_mut() {
        *v *= lscale[i] * rscale[j];
    }
    m
}

pub fn met_matrix(a: &CsrMatrix, w: &SeriesWeights, mode: NormMode) -> Result<MetMatrix> {
    let s = weighted_power_series(a, w)?;
    let z = partition_vector(&s);
    let series_diag = s.diag().to_owned();
    let m = match mode {
        NormMode::Unnormalized => s,
        _ => normalize(&s, &z, mode),
    };
    Ok(MetMatrix {
        diag: m.diag().to_owned(),
        m,
        z,
        series_diag,
        mode,
        cutoff: w.cutoff(),
    })
}

/// Number of length-`n` walks from `i` to `j`, i.e. `(A^n)_ij` for an unweighted `A`.
pub fn path_count(a: &CsrMatrix, i: usize, j: usize, n: usize) -> Result<u64> {
    let size = a.num_rows();
    for idx in [i, j] {
        if idx >= size {
            return Err(PanError::IndexOutOfRange { index: idx, num_nodes: size });
        }
    }
    // propagate a single row vector: counts[k] = walks i -> k of the current length
    let mut counts = vec![0u64; size];
    counts[i] = 1;
    for _ in 0..n {
        let mut next = vec![0u64; size];
        for (r, &cr) in counts.iter().enumerate() {
            if cr == 0 {
                continue;
            }
            for (c, v) in a.row(r) {
                next[c] += cr * v as u64;
            }
        }
        counts = next;
    }
    Ok(counts[j])
}
