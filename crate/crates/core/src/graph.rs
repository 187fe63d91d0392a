//! Communication graphs and the mixing matrices built on them.
//!
//! A [`GossipMatrix`] is always symmetric and doubly stochastic. Plain
//! gossip matrices (hop order 1) respect the sparsity pattern of their
//! graph; powers and Chebyshev polynomials of a gossip matrix are K-hop
//! matrices and need K rounds of neighbor exchange to apply.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, SymSpectrum, SNAP_TOL};

/// Undirected, connected, simple graph over agents `0..m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    m: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate edges, out-of-range
    /// endpoints and disconnected topologies.
    pub fn new(m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGraph("graph needs at least one agent".into()));
        }
        let mut seen = BTreeSet::new();
        let mut neighbors = vec![Vec::new(); m];
        for (i, j) in edges {
            if i >= m || j >= m {
                return Err(Error::InvalidGraph(format!(
                    "edge {{{i}, {j}}} out of range for m = {m}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at {i}")));
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge {{{}, {}}}",
                    key.0, key.1
                )));
            }
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let graph = Graph {
            m,
            edges: seen.into_iter().collect(),
            neighbors,
        };
        let components = graph.component_count();
        if components != 1 {
            return Err(Error::Disconnected { components });
        }
        Ok(graph)
    }

    pub fn ring(m: usize) -> Result<Self> {
        match m {
            0 => Graph::new(0, []),
            1 => Graph::new(1, []),
            2 => Graph::new(2, [(0, 1)]),
            _ => Graph::new(m, (0..m).map(|i| (i, (i + 1) % m))),
        }
    }

    pub fn path(m: usize) -> Result<Self> {
        Graph::new(m, (1..m).map(|i| (i - 1, i)))
    }

    pub fn complete(m: usize) -> Result<Self> {
        Graph::new(m, (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))))
    }

    /// Random geometric graph on the unit square: agents closer than
    /// `radius` are linked. Draws are repeated (up to 1000 times) until the
    /// result is connected.
    pub fn random_geometric(m: usize, radius: f64, seed: u64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut last = 0;
        for _ in 0..1000 {
            let pts: Vec<(f64, f64)> = (0..m).map(|_| (rng.random(), rng.random())).collect();
            let mut edges = Vec::new();
            for i in 0..m {
                for j in i + 1..m {
                    let (dx, dy) = (pts[i].0 - pts[j].0, pts[i].1 - pts[j].1);
                    if (dx * dx + dy * dy).sqrt() <= radius {
                        edges.push((i, j));
                    }
                }
            }
            match Graph::new(m, edges) {
                Ok(g) => return Ok(g),
                Err(Error::Disconnected { components }) => last = components,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Disconnected { components: last })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    fn component_count(&self) -> usize {
        let mut label = vec![usize::MAX; self.m];
        let mut count = 0;
        for start in 0..self.m {
            if label[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            label[start] = count;
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if label[w] == usize::MAX {
                        label[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        count
    }

    /// Parses the edge-list format: first line `m`, then one `i j` per line.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let m: usize = header
            .parse()
            .map_err(|_| Error::Parse(format!("bad agent count {header:?}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| Error::Parse(format!("bad edge line {line:?}")))?
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad edge line {line:?}")))
            };
            let (i, j) = (next()?, next()?);
            if parts.next().is_some() {
                return Err(Error::Parse(format!("bad edge line {line:?}")));
            }
            edges.push((i, j));
        }
        Graph::new(m, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.m);
        for (i, j) in &self.edges {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Graph::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

/// Symmetric, doubly stochastic mixing matrix tied to a graph.
#[derive(Debug, Clone)]
pub struct GossipMatrix {
    entries: Mat,
    graph: Arc<Graph>,
    hop_order: usize,
}

/// Tolerance on row/column sums and symmetry of gossip matrices.
const STOCHASTIC_TOL: f64 = 1e-12;

/// `J + (I−J) P (I−J)`, symmetrized. Restores `P1 = 1` to working
/// precision after a long chain of products.
fn recenter(p: &Mat) -> Mat {
    let m = p.nrows();
    let j = linalg::averaging(m);
    let proj = Mat::identity(m, m) - &j;
    linalg::symmetrize(&(&proj * p * &proj + j))
}

impl GossipMatrix {
    /// Metropolis weights: `W_ij = 1/(1 + max(deg_i, deg_j))` on edges and
    /// the remaining mass on the diagonal.
    pub fn metropolis(graph: Arc<Graph>) -> Self {
        let m = graph.m();
        let mut w = Mat::zeros(m, m);
        for &(i, j) in graph.edges() {
            let v = 1.0 / (1.0 + graph.degree(i).max(graph.degree(j)) as f64);
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        for i in 0..m {
            let off: f64 = graph.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
            w[(i, i)] = 1.0 - off;
        }
        GossipMatrix {
            entries: w,
            graph,
            hop_order: 1,
        }
    }

    /// Wraps explicit one-hop weights after checking symmetry, stochasticity
    /// and the graph's sparsity pattern.
    pub fn from_entries(graph: Arc<Graph>, entries: Mat) -> Result<Self> {
        let m = graph.m();
        if entries.shape() != (m, m) {
            return Err(Error::Dimension {
                expected: format!("{m}x{m}"),
                got: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        for i in 0..m {
            for j in 0..m {
                if i != j && !graph.has_edge(i, j) && entries[(i, j)] != 0.0 {
                    return Err(Error::InvalidGossip(format!(
                        "entry ({i}, {j}) is nonzero but {{{i}, {j}}} is not an edge"
                    )));
                }
            }
        }
        check_stochastic(&entries)?;
        Ok(GossipMatrix {
            entries,
            graph,
            hop_order: 1,
        })
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn hop_order(&self) -> usize {
        self.hop_order
    }

    pub fn m(&self) -> usize {
        self.graph.m()
    }

    /// `(I + W)/2`.
    pub fn lazy(&self) -> Self {
        let m = self.m();
        GossipMatrix {
            entries: (Mat::identity(m, m) + &self.entries) * 0.5,
            graph: self.graph.clone(),
            hop_order: self.hop_order,
        }
    }

    /// `W^k`, a k-hop gossip matrix.
    pub fn k_hop_power(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("hop count must be at least 1".into()));
        }
        Ok(GossipMatrix {
            entries: if k == 1 {
                self.entries.clone()
            } else {
                recenter(&linalg::matrix_power(&self.entries, k))
            },
            graph: self.graph.clone(),
            hop_order: self.hop_order * k,
        })
    }

    /// Chebyshev-accelerated mixing `P_K(W) = T_K(W/ρ) / T_K(1/ρ)`, where
    /// `ρ` is the mixing radius of `W`. Runs the three-term recursion on
    /// matrices, one multiplication by `W` per round.
    pub fn chebyshev(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("polynomial order must be at least 1".into()));
        }
        let rho = self.spectral_info().mixing_radius;
        if rho <= SNAP_TOL {
            return Err(Error::ChebyshevUndefined);
        }
        let m = self.m();
        let scaled = &self.entries / rho;
        let (mut prev, mut cur) = (Mat::identity(m, m), scaled.clone());
        let (mut prev_s, mut cur_s) = (1.0, 1.0 / rho);
        for _ in 1..k {
            let next = &scaled * &cur * 2.0 - &prev;
            let next_s = 2.0 * cur_s / rho - prev_s;
            prev = std::mem::replace(&mut cur, next);
            prev_s = std::mem::replace(&mut cur_s, next_s);
        }
        Ok(GossipMatrix {
            entries: recenter(&(cur / cur_s)),
            graph: self.graph.clone(),
            hop_order: self.hop_order * k,
        })
    }

    pub fn spectral_info(&self) -> SpectralInfo {
        SpectralInfo::of(&self.entries)
    }
}

fn check_stochastic(w: &Mat) -> Result<()> {
    let m = w.nrows();
    if !linalg::is_symmetric(w, STOCHASTIC_TOL) {
        return Err(Error::InvalidGossip("matrix is not symmetric".into()));
    }
    let rows = linalg::row_sums(w);
    for i in 0..m {
        if (rows[i] - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidGossip(format!(
                "row {i} sums to {} instead of 1",
                rows[i]
            )));
        }
    }
    Ok(())
}

/// Spectral summary of a gossip matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpectralInfo {
    /// `λ_max(W - J)`.
    pub rho_com: f64,
    /// `max_i |λ_i(W - J)|`; equals `rho_com` when the spectrum of `W`
    /// away from the consensus direction is dominated by its positive end.
    pub mixing_radius: f64,
    /// Spectrum of `W`, increasing.
    pub eigenvalues: Vec<f64>,
    /// `λ₂(I - W)`, the algebraic connectivity of the consensus matrix
    /// `C = I - W`.
    pub lambda2_of_c: f64,
}

impl SpectralInfo {
    pub fn of(w: &Mat) -> Self {
        let m = w.nrows();
        let eigenvalues: Vec<f64> = SymSpectrum::of(w)
            .values
            .into_iter()
            .map(|v| linalg::snap(linalg::snap(v, 1.0), -1.0))
            .collect();
        let centered = SymSpectrum::of(&(w - linalg::averaging(m)));
        let rho_com = linalg::snap(centered.max(), 0.0);
        let mixing_radius = linalg::snap(centered.max().max(-centered.min()), 0.0);
        let second = if m >= 2 { eigenvalues[m - 2] } else { f64::NAN };
        SpectralInfo {
            rho_com,
            mixing_radius,
            lambda2_of_c: 1.0 - second,
            eigenvalues,
        }
    }

    /// Eigenvalue 1 is simple and all eigenvalues lie in `(-1, 1]`.
    pub fn is_valid(&self) -> bool {
        let m = self.eigenvalues.len();
        m >= 2
            && self.eigenvalues[0] > -1.0
            && self.eigenvalues[m - 1] <= 1.0
            && self.eigenvalues[m - 2] < 1.0 - SNAP_TOL
            && self.rho_com < 1.0
    }
}
