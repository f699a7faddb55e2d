//! Hard disks, Poisson and RSA point patterns in a periodic square box, and
//! their conversion to threshold graphs.
//!
//! The hard-core test uses the periodic (minimum image) metric. Graph edges use
//! the plain Euclidean metric, so no edge crosses the box boundary.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PanError, Result};
use crate::graph::{csr_from_pairs, CsrGraph, Label};

/// Densest fraction random sequential adsorption can reach in 2D.
pub const RSA_JAMMING_LIMIT: f64 = 0.547;
pub const HD_VOLUME_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    #[serde(rename = "hd")]
    HardDisks,
    Poisson,
    #[serde(rename = "rsa")]
    Rsa,
}

impl PatternKind {
    pub fn label(self) -> usize {
        match self {
            PatternKind::HardDisks => 0,
            PatternKind::Poisson => 1,
            PatternKind::Rsa => 2,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hd" => Ok(Self::HardDisks),
            "poisson" => Ok(Self::Poisson),
            "rsa" => Ok(Self::Rsa),
            other => Err(PanError::InvalidArgument(format!("unknown point pattern class '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    pub points: Vec<[f64; 2]>,
    pub box_len: f64,
    pub radius: f64,
    pub kind: PatternKind,
}

impl PointPattern {
    pub fn volume_fraction(&self) -> f64 {
        self.points.len() as f64 * PI * self.radius * self.radius / (self.box_len * self.box_len)
    }

    /// Smallest minimum-image distance over all pairs (infinity for fewer than two points).
    pub fn min_periodic_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                best = best.min(periodic_dist2(self.points[i], self.points[j], self.box_len).sqrt());
            }
        }
        best
    }

    /// Pairs closer than `2r` under the periodic metric, allowing `slack`.
    pub fn overlap_count(&self, slack: f64) -> usize {
        let limit = 2.0 * self.radius - slack;
        let mut count = 0;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                if periodic_dist2(self.points[i], self.points[j], self.box_len).sqrt() < limit {
                    count += 1;
                }
            }
        }
        count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPatternConfig {
    pub kind: PatternKind,
    pub n_points: usize,
    /// Volume fraction; ignored for Poisson, fixed at 0.5 for hard disks.
    pub phi: f64,
    pub mc_sweeps: usize,
    pub seed: u64,
    pub max_rsa_attempts: u64,
}

impl PointPatternConfig {
    pub fn new(kind: PatternKind, n_points: usize, phi: f64, seed: u64) -> Self {
        Self {
            kind,
            n_points,
            phi: match kind {
                PatternKind::HardDisks => HD_VOLUME_FRACTION,
                PatternKind::Poisson => 0.0,
                PatternKind::Rsa => phi,
            },
            mc_sweeps: 10_000,
            seed,
            max_rsa_attempts: 10_000_000,
        }
    }

    pub fn simulate(&self) -> Result<PointPattern> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        simulate_with(self, &mut rng)
    }
}

fn simulate_with(cfg: &PointPatternConfig, rng: &mut ChaCha8Rng) -> Result<PointPattern> {
    match cfg.kind {
        PatternKind::Poisson => Ok(poisson_pattern(cfg.n_points, 1.0, rng)),
        PatternKind::Rsa => rsa_pattern(cfg.n_points, cfg.phi, 1.0, rng, cfg.max_rsa_attempts),
        PatternKind::HardDisks => hd_pattern(cfg.n_points, cfg.phi, cfg.mc_sweeps, None, 1.0, rng, cfg.max_rsa_attempts),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "cap")]
pub enum FeatureMode {
    #[default]
    ScalarDegree,
    /// One-hot of `min(degree, cap)`, width `cap + 1`.
    OneHotDegree(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGraphConfig {
    /// Edge threshold in units of the hard-disk radius at `phi = 0.5`.
    pub threshold_factor: f64,
    pub feature_mode: FeatureMode,
}

impl Default for ThresholdGraphConfig {
    fn default() -> Self {
        Self {
            threshold_factor: 4.0,
            feature_mode: FeatureMode::ScalarDegree,
        }
    }
}

/// Radius of `n` disks covering `phi` of a `box_len` square.
pub fn radius_for(n: usize, phi: f64, box_len: f64) -> f64 {
    box_len * (phi / (n as f64 * PI)).sqrt()
}

/// Hard-disk radius at volume fraction 0.5 for the same number density.
pub fn reference_radius(n: usize, box_len: f64) -> f64 {
    radius_for(n, HD_VOLUME_FRACTION, box_len)
}

fn wrap(x: f64, box_len: f64) -> f64 {
    let w = x.rem_euclid(box_len);
    // rem_euclid can round up to box_len for tiny negative inputs
    if w >= box_len {
        0.0
    } else {
        w
    }
}

fn periodic_dist2(a: [f64; 2], b: [f64; 2], box_len: f64) -> f64 {
    let mut d2 = 0.0;
    for k in 0..2 {
        let mut d = a[k] - b[k];
        d -= box_len * (d / box_len).round();
        d2 += d * d;
    }
    d2
}

pub fn poisson_pattern(n: usize, box_len: f64, rng: &mut impl Rng) -> PointPattern {
    let points = (0..n)
        .map(|_| [rng.gen::<f64>() * box_len, rng.gen::<f64>() * box_len])
        .collect();
    PointPattern {
        points,
        box_len,
        radius: 0.0,
        kind: PatternKind::Poisson,
    }
}

/// Uniform grid of cells with side at least `min_cell`, periodic in both directions.
struct CellGrid {
    cells_per_side: usize,
    cell_len: f64,
    cells: Vec<Vec<usize>>,
    periodic: bool,
}

impl CellGrid {
    fn new(box_len: f64, min_cell: f64, periodic: bool) -> Self {
        let cells_per_side = if min_cell > 0.0 {
            ((box_len / min_cell).floor() as usize).clamp(1, 4096)
        } else {
            1
        };
        Self {
            cells_per_side,
            cell_len: box_len / cells_per_side as f64,
            cells: vec![Vec::new(); cells_per_side * cells_per_side],
            periodic,
        }
    }

    fn coord(&self, x: f64) -> usize {
        ((x / self.cell_len) as usize).min(self.cells_per_side - 1)
    }

    fn cell_of(&self, p: [f64; 2]) -> usize {
        self.coord(p[1]) * self.cells_per_side + self.coord(p[0])
    }

    fn insert(&mut self, p: [f64; 2], id: usize) {
        let c = self.cell_of(p);
        self.cells[c].push(id);
    }

    fn remove(&mut self, p: [f64; 2], id: usize) {
        let c = self.cell_of(p);
        let slot = self.cells[c].iter().position(|&x| x == id).expect("particle registered in its cell");
        self.cells[c].swap_remove(slot);
    }

    /// Calls `f` for every particle in the 3x3 block around `p`, each cell visited once.
    fn for_neighbors(&self, p: [f64; 2], mut f: impl FnMut(usize) -> bool) -> bool {
        let n = self.cells_per_side as isize;
        let (cx, cy) = (self.coord(p[0]) as isize, self.coord(p[1]) as isize);
        let span: &[isize] = if n >= 3 { &[-1, 0, 1] } else { &[0] };
        let all = n < 3;
        for &dy in span {
            for &dx in span {
                let cells: Vec<usize> = if all {
                    (0..self.cells.len()).collect()
                } else {
                    let (mut x, mut y) = (cx + dx, cy + dy);
                    if self.periodic {
                        x = x.rem_euclid(n);
                        y = y.rem_euclid(n);
                    } else if x < 0 || y < 0 || x >= n || y >= n {
                        continue;
                    }
                    vec![(y * n + x) as usize]
                };
                for c in cells {
                    for &id in &self.cells[c] {
                        if !f(id) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Random sequential adsorption of `n` disks at volume fraction `phi`.
pub fn rsa_pattern(n: usize, phi: f64, box_len: f64, rng: &mut impl Rng, max_attempts: u64) -> Result<PointPattern> {
    if !(0.0..RSA_JAMMING_LIMIT).contains(&phi) {
        return Err(PanError::InvalidArgument(format!(
            "RSA volume fraction must be in [0, {RSA_JAMMING_LIMIT}), got {phi}"
        )));
    }
    let radius = radius_for(n, phi, box_len);
    if radius == 0.0 {
        let mut p = poisson_pattern(n, box_len, rng);
        p.kind = PatternKind::Rsa;
        return Ok(p);
    }
    let diameter2 = 4.0 * radius * radius;
    let mut grid = CellGrid::new(box_len, 2.0 * radius, true);
    let mut points: Vec<[f64; 2]> = Vec::with_capacity(n);
    let mut attempts = 0u64;
    while points.len() < n {
        if attempts >= max_attempts {
            return Err(PanError::Simulation(format!(
                "RSA placed {} of {n} disks at phi={phi} within {max_attempts} attempts",
                points.len()
            )));
        }
        attempts += 1;
        let cand = [rng.gen::<f64>() * box_len, rng.gen::<f64>() * box_len];
        let free = grid.for_neighbors(cand, |j| periodic_dist2(cand, points[j], box_len) >= diameter2);
        if free {
            grid.insert(cand, points.len());
            points.push(cand);
        }
    }
    Ok(PointPattern {
        points,
        box_len,
        radius,
        kind: PatternKind::Rsa,
    })
}

/// Statistics from a hard-disk Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl McStats {
    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Metropolis displacement moves on a hard-disk configuration, in place.
///
/// Each sweep proposes one move per particle, in index order, uniform in a square of
/// half-width `displacement`.
pub fn hd_sweeps(pattern: &mut PointPattern, sweeps: usize, displacement: f64, rng: &mut impl Rng) -> McStats {
    let box_len = pattern.box_len;
    let diameter2 = 4.0 * pattern.radius * pattern.radius;
    let mut grid = CellGrid::new(box_len, 2.0 * pattern.radius, true);
    for (i, &p) in pattern.points.iter().enumerate() {
        grid.insert(p, i);
    }
    let mut stats = McStats { proposed: 0, accepted: 0 };
    let points = &mut pattern.points;
    for _ in 0..sweeps {
        for i in 0..points.len() {
            let old = points[i];
            let dx = (rng.gen::<f64>() * 2.0 - 1.0) * displacement;
            let dy = (rng.gen::<f64>() * 2.0 - 1.0) * displacement;
            let cand = [wrap(old[0] + dx, box_len), wrap(old[1] + dy, box_len)];
            stats.proposed += 1;
            let free = grid.for_neighbors(cand, |j| j == i || periodic_dist2(cand, points[j], box_len) >= diameter2);
            if free {
                stats.accepted += 1;
                if grid.cell_of(old) != grid.cell_of(cand) {
                    grid.remove(old, i);
                    grid.insert(cand, i);
                }
                points[i] = cand;
            }
        }
    }
    stats
}

/// Equilibrium hard disks: RSA initial condition followed by `sweeps` Monte Carlo sweeps.
///
/// RSA near `phi = 0.5` can stall; initialization is retried up to ten times on a
/// continued random stream. `displacement` defaults to half the disk radius.
pub fn hd_pattern(
    n: usize,
    phi: f64,
    sweeps: usize,
    displacement: Option<f64>,
    box_len: f64,
    rng: &mut impl Rng,
    max_rsa_attempts: u64,
) -> Result<PointPattern> {
    let mut last_err = None;
    for _ in 0..10 {
        match rsa_pattern(n, phi, box_len, rng, max_rsa_attempts) {
            Ok(mut p) => {
                p.kind = PatternKind::HardDisks;
                let step = displacement.unwrap_or(0.25 * 2.0 * p.radius);
                hd_sweeps(&mut p, sweeps, step, rng);
                return Ok(p);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(PanError::Simulation(format!(
        "hard-disk initialization failed after 10 RSA attempts: {}",
        last_err.expect("at least one attempt")
    )))
}

/// Threshold graph: edge iff the non-periodic distance is below `factor * R`.
pub fn pattern_to_graph(p: &PointPattern, cfg: &ThresholdGraphConfig) -> Result<CsrGraph> {
    if !(cfg.threshold_factor > 0.0) {
        return Err(PanError::InvalidArgument("threshold factor must be positive".into()));
    }
    let n = p.points.len();
    let threshold = cfg.threshold_factor * reference_radius(n.max(1), p.box_len);
    let t2 = threshold * threshold;
    let mut grid = CellGrid::new(p.box_len, threshold, false);
    for (i, &pt) in p.points.iter().enumerate() {
        grid.insert(pt, i);
    }
    let mut edges = Vec::new();
    for (i, &a) in p.points.iter().enumerate() {
        grid.for_neighbors(a, |j| {
            if j > i {
                let b = p.points[j];
                let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
                if d2 < t2 {
                    edges.push((i, j));
                }
            }
            true
        });
    }
    let adj = csr_from_pairs(&edges, n, true)?;
    let deg: Vec<usize> = adj.row_ptr().windows(2).map(|w| w[1] - w[0]).collect();
    let features = match cfg.feature_mode {
        FeatureMode::ScalarDegree => Array2::from_shape_fn((n, 1), |(i, _)| deg[i] as f64),
        FeatureMode::OneHotDegree(cap) => {
            let mut f = Array2::zeros((n, cap + 1));
            for (i, &d) in deg.iter().enumerate() {
                f[[i, d.min(cap)]] = 1.0;
            }
            f
        }
    };
    CsrGraph::new(adj, features, Label::Class(p.kind.label()))
}

/// How graph sizes are drawn from the node range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SizeDistribution {
    /// Node count uniform on `[min, max]`.
    #[default]
    Uniform,
    /// Box side uniform at fixed density, so `sqrt(N)` is uniform on `[sqrt(min), sqrt(max)]`.
    SideUniform,
}

impl SizeDistribution {
    pub fn sample(self, min: usize, max: usize, rng: &mut impl Rng) -> usize {
        match self {
            SizeDistribution::Uniform => rng.gen_range(min..=max),
            SizeDistribution::SideUniform => {
                let (a, b) = ((min as f64).sqrt(), (max as f64).sqrt());
                let s = a + (b - a) * rng.gen::<f64>();
                ((s * s).round() as usize).clamp(min, max)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub classes: Vec<PatternKind>,
    pub phi_rsa: f64,
    pub graphs_per_class: usize,
    pub node_range: (usize, usize),
    pub seed: u64,
    pub mc_sweeps: usize,
    pub size_distribution: SizeDistribution,
    pub graph: ThresholdGraphConfig,
    pub max_rsa_attempts: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            classes: vec![PatternKind::HardDisks, PatternKind::Poisson, PatternKind::Rsa],
            phi_rsa: 0.3,
            graphs_per_class: 10,
            node_range: (100, 1000),
            seed: 0,
            mc_sweeps: 10_000,
            size_distribution: SizeDistribution::Uniform,
            graph: ThresholdGraphConfig::default(),
            max_rsa_attempts: 10_000_000,
        }
    }
}

/// One simulated, labeled sample.
#[derive(Debug, Clone)]
pub struct PatternSample {
    pub graph: CsrGraph,
    pub pattern: PointPattern,
}

/// Random stream for graph `index` of a dataset seeded with `seed`.
pub fn graph_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Simulates `graphs_per_class` patterns per class, class-major, labels `0:HD, 1:Poisson, 2:RSA`.
pub fn generate_dataset(cfg: &GenerateConfig) -> Result<Vec<PatternSample>> {
    let (lo, hi) = cfg.node_range;
    if lo < 2 || hi < lo {
        return Err(PanError::InvalidArgument(format!("invalid node range {lo}..{hi}")));
    }
    let mut out = Vec::with_capacity(cfg.classes.len() * cfg.graphs_per_class);
    for &kind in &cfg.classes {
        for _ in 0..cfg.graphs_per_class {
            let mut rng = graph_rng(cfg.seed, out.len() as u64);
            let n = cfg.size_distribution.sample(lo, hi, &mut rng);
            let pattern = match kind {
                PatternKind::Poisson => poisson_pattern(n, 1.0, &mut rng),
                PatternKind::Rsa => rsa_pattern(n, cfg.phi_rsa, 1.0, &mut rng, cfg.max_rsa_attempts)?,
                PatternKind::HardDisks => hd_pattern(
                    n,
                    HD_VOLUME_FRACTION,
                    cfg.mc_sweeps,
                    None,
                    1.0,
                    &mut rng,
                    cfg.max_rsa_attempts,
                )?,
            };
            let graph = pattern_to_graph(&pattern, &cfg.graph)?;
            out.push(PatternSample { graph, pattern });
        }
    }
    Ok(out)
}
