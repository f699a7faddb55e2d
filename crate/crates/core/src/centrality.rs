//! Node importance measures: degree, eigenvector, subgraph centrality, and the
//! MET-diagonal scores used for pooling.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{PanError, Result};
use crate::graph::{degrees, spmm_into, CsrGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Degree,
    Eigenvector,
    SubgraphSeries,
    SubgraphExact,
    MetDiag,
    MetDiagUnnorm,
    HybridScore,
}

impl Measure {
    /// Short names used on the command line.
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "dc" | "degree" => Self::Degree,
            "ec" | "eigenvector" => Self::Eigenvector,
            "sc" | "subgraph" => Self::SubgraphSeries,
            "sc-exact" | "subgraph-exact" => Self::SubgraphExact,
            "metdiag" => Self::MetDiag,
            "metdiag-unnorm" => Self::MetDiagUnnorm,
            "hybrid" => Self::HybridScore,
            other => return Err(PanError::InvalidArgument(format!("unknown centrality measure '{other}'"))),
        })
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Self::Degree => "dc",
            Self::Eigenvector => "ec",
            Self::SubgraphSeries => "sc",
            Self::SubgraphExact => "sc-exact",
            Self::MetDiag => "metdiag",
            Self::MetDiagUnnorm => "metdiag-unnorm",
            Self::HybridScore => "hybrid",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityScores {
    pub measure: Measure,
    pub values: Array1<f64>,
}

pub fn degree_centrality(g: &CsrGraph) -> CentralityScores {
    CentralityScores {
        measure: Measure::Degree,
        values: degrees(g).into_iter().map(|d| d as f64).collect(),
    }
}

/// Perron vector of `A` by power iteration on `A + I`.
///
/// The shift leaves eigenvectors unchanged and moves the spectrum to `[1 - |lambda|, 1 + lambda_1]`,
/// so bipartite graphs converge instead of oscillating.
pub fn eigenvector_centrality(g: &CsrGraph, tol: f64, max_iter: usize) -> Result<CentralityScores> {
    let n = g.node_count();
    if n == 0 {
        return Ok(CentralityScores {
            measure: Measure::Eigenvector,
            values: Array1::zeros(0),
        });
    }
    let mut v = Array2::from_elem((n, 1), 1.0 / (n as f64).sqrt());
    let mut next = Array2::zeros((n, 1));
    for _ in 0..max_iter {
        next.assign(&v);
        spmm_into(g.adj(), &v, &mut next);
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        next /= norm;
        let diff = (&next - &v).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        std::mem::swap(&mut v, &mut next);
        if diff < tol {
            return Ok(CentralityScores {
                measure: Measure::Eigenvector,
                values: v.column(0).mapv(|x| x.max(0.0)),
            });
        }
    }
    Err(PanError::NoConvergence {
        what: "eigenvector centrality",
        iterations: max_iter,
    })
}

/// `sum_{k=0}^{K} (A^k)_ii / k!`.
pub fn subgraph_centrality_series(g: &CsrGraph, terms: usize) -> CentralityScores {
    let n = g.node_count();
    let mut power = Array2::<f64>::eye(n);
    let mut next = Array2::<f64>::zeros((n, n));
    let mut values = Array1::<f64>::ones(n);
    let mut factorial = 1.0;
    for k in 1..=terms {
        next.fill(0.0);
        spmm_into(g.adj(), &power, &mut next);
        std::mem::swap(&mut power, &mut next);
        factorial *= k as f64;
        values.scaled_add(1.0 / factorial, &power.diag());
    }
    CentralityScores {
        measure: Measure::SubgraphSeries,
        values,
    }
}

/// `sum_j v_j(i)^2 exp(lambda_j)` from a full eigendecomposition of `A`.
pub fn subgraph_centrality_exact(g: &CsrGraph) -> Result<CentralityScores> {
    let (evals, evecs) = symmetric_eigen(&g.adj().to_dense(), 1e-14, 100)?;
    let weights = evals.mapv(f64::exp);
    let values = evecs.mapv(|x| x * x).dot(&weights);
    Ok(CentralityScores {
        measure: Measure::SubgraphExact,
        values,
    })
}

/// Eigen-decomposition of a dense symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues and a matrix whose columns are the matching orthonormal eigenvectors.
pub fn symmetric_eigen(a: &Array2<f64>, tol: f64, max_sweeps: usize) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(PanError::InvalidArgument("symmetric_eigen needs a square matrix".into()));
    }
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum::<f64>()
            .sqrt();
        if off <= tol * scale {
            return Ok((m.diag().to_owned(), v));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(PanError::NoConvergence {
        what: "Jacobi eigensolver",
        iterations: max_sweeps,
    })
}

/// Diagonal of `A^n`, renormalized by its max-norm after every multiplication.
///
/// Only the ordering is meaningful; the scale is arbitrary.
pub fn closed_walk_profile(g: &CsrGraph, n: usize) -> Array1<f64> {
    let size = g.node_count();
    let mut power = Array2::<f64>::eye(size);
    let mut next = Array2::<f64>::zeros((size, size));
    for _ in 0..n {
        next.fill(0.0);
        spmm_into(g.adj(), &power, &mut next);
        let m = next.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if m > 0.0 {
            next /= m;
        }
        std::mem::swap(&mut power, &mut next);
    }
    power.diag().to_owned()
}

/// `ceil(frac * N)` highest values, ties to the lower index, returned sorted.
pub fn top_fraction(values: &[f64], frac: f64) -> Result<Vec<usize>> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(PanError::InvalidArgument(format!("fraction must be in (0, 1], got {frac}")));
    }
    crate::layers::topk_select(values, &vec![0; values.len()], frac)
}

/// Node order by decreasing value, ties to the lower index.
pub fn ranking(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{k3, p3, star3};
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn p2() -> CsrGraph {
        CsrGraph::from_pairs(&[(0, 1)], 2).unwrap()
    }

    fn edgeless(n: usize) -> CsrGraph {
        CsrGraph::from_pairs(&[], n).unwrap()
    }

    #[test]
    fn degree_examples() {
        let s = degree_centrality(&star3());
        assert_eq!(s.values, array![3.0, 1.0, 1.0, 1.0]);
        assert_eq!(ranking(s.values.as_slice().unwrap())[0], 0);
        assert_eq!(degree_centrality(&k3()).values, array![2.0, 2.0, 2.0]);
        assert_eq!(degree_centrality(&p3()).values, array![1.0, 2.0, 1.0]);
    }

    #[test]
    fn eigenvector_examples() {
        let k = eigenvector_centrality(&k3(), 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(k.values, Array1::from_elem(3, 1.0 / 3f64.sqrt()), epsilon = 1e-10);

        let s = eigenvector_centrality(&star3(), 1e-12, 1000).unwrap();
        assert!(s.values.iter().skip(1).all(|&v| s.values[0] > v));

        let p = eigenvector_centrality(&p2(), 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(p.values, array![1.0, 1.0] / 2f64.sqrt(), epsilon = 1e-12);

        assert!(eigenvector_centrality(&star3(), 1e-15, 2).is_err());
    }

    #[test]
    fn eigenvector_residual() {
        let g = star3();
        let tol = 1e-10;
        let v = eigenvector_centrality(&g, tol, 10_000).unwrap().values;
        let av = g.adj().to_dense().dot(&v);
        let lambda = v.dot(&av);
        let resid = (&av - &(&v * lambda)).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(resid < 10.0 * tol, "residual {resid}");
        assert_abs_diff_eq!(lambda, 3f64.sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn subgraph_examples() {
        let expected_k3 = (2f64.exp() + 2.0 * (-1f64).exp()) / 3.0;
        let s = subgraph_centrality_series(&k3(), 30);
        assert_abs_diff_eq!(s.values, Array1::from_elem(3, expected_k3), epsilon = 1e-12);
        assert_abs_diff_eq!(expected_k3, 2.708272, epsilon = 1e-6);
        let e = subgraph_centrality_exact(&k3()).unwrap();
        assert_abs_diff_eq!(e.values, Array1::from_elem(3, expected_k3), epsilon = 1e-12);

        assert_eq!(subgraph_centrality_series(&edgeless(4), 30).values, Array1::<f64>::ones(4));
        assert_abs_diff_eq!(subgraph_centrality_exact(&edgeless(4)).unwrap().values, Array1::ones(4), epsilon = 1e-15);

        let c = 1f64.cosh();
        assert_abs_diff_eq!(subgraph_centrality_series(&p2(), 30).values, array![c, c], epsilon = 1e-12);
        assert_abs_diff_eq!(subgraph_centrality_exact(&p2()).unwrap().values, array![c, c], epsilon = 1e-12);
    }

    #[test]
    fn top_fraction_examples() {
        assert_eq!(top_fraction(&[3.0, 1.0, 1.0, 1.0], 0.25).unwrap(), vec![0]);
        assert_eq!(top_fraction(&[1.0; 4], 0.5).unwrap(), vec![0, 1]);
        assert_eq!(top_fraction(&[0.5, 0.6, 0.5], 2.0 / 3.0).unwrap(), vec![0, 1]);
        assert!(top_fraction(&[1.0], 0.0).is_err());
    }

    #[test]
    fn jacobi_reconstructs() {
        let a = array![[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let (e, v) = symmetric_eigen(&a, 1e-15, 100).unwrap();
        let back = v.dot(&Array2::from_diag(&e)).dot(&v.t());
        assert_abs_diff_eq!(back, a, epsilon = 1e-12);
        assert_abs_diff_eq!(v.t().dot(&v), Array2::eye(3), epsilon = 1e-12);
    }
}
