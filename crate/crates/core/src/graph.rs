//! Communication graphs and the matrices built from them.
//!
//! Edges are unordered pairs stored as `(i, j)` with `i < j`. That
//! orientation is global: the incidence column of edge `(i, j)` carries
//! `+mu` on row `i` and `-mu` on row `j`, and every edge-space quantity in
//! the crate uses the same sign.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::spectral;

/// Tolerance on `sum(p) == 1`.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Rejection-sampling cap for connected Erdős–Rényi graphs.
pub const ER_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopologyKind {
    Ring,
    Grid2d,
    Complete,
    ErdosRenyi { prob: f64, seed: u64 },
    Star,
    Path,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    mu: Vec<f64>,
    p: Vec<f64>,
    tau: Vec<f64>,
    delta_comp: Vec<f64>,
    incident: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from explicit per-edge and per-node attributes.
    ///
    /// Pairs are reoriented to `i < j`. Fails on self-loops, duplicates,
    /// non-positive weights or probabilities, probabilities that do not sum
    /// to one, negative times, or a disconnected edge set.
    pub fn new(
        n: usize,
        edges: Vec<(usize, usize)>,
        mu: Vec<f64>,
        p: Vec<f64>,
        tau: Vec<f64>,
        delta_comp: Vec<f64>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewVertices(n));
        }
        let m = edges.len();
        for (name, len) in [("mu", mu.len()), ("p", p.len()), ("tau", tau.len())] {
            if len != m {
                return Err(Error::InvalidGraph(format!(
                    "{name} has {len} entries for {m} edges"
                )));
            }
        }
        if delta_comp.len() != n {
            return Err(Error::InvalidGraph(format!(
                "delta has {} entries for {n} nodes",
                delta_comp.len()
            )));
        }
        let mut seen = HashSet::with_capacity(m);
        let mut oriented = Vec::with_capacity(m);
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidGraph(format!("duplicate edge {e:?}")));
            }
            oriented.push(e);
        }
        if let Some(k) = mu.iter().position(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::InvalidGraph(format!("mu[{k}] = {} is not positive", mu[k])));
        }
        if let Some(k) = p.iter().position(|&w| !(w.is_finite() && w > 0.0)) {
            return Err(Error::InvalidGraph(format!("p[{k}] = {} is not positive", p[k])));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::InvalidGraph(format!("edge probabilities sum to {total}")));
        }
        if tau.iter().chain(&delta_comp).any(|&t| !(t.is_finite() && t >= 0.0)) {
            return Err(Error::InvalidGraph("negative or non-finite time".into()));
        }
        let mut incident = vec![Vec::new(); n];
        for (k, &(i, j)) in oriented.iter().enumerate() {
            incident[i].push(k);
            incident[j].push(k);
        }
        let g = Self {
            n,
            edges: oriented,
            mu,
            p,
            tau,
            delta_comp,
            incident,
        };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    /// Graph with the default attributes: uniform `p = 1/E`, `mu = 1`,
    /// `tau = 1`, `delta = 0`.
    pub fn with_defaults(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let m = edges.len();
        if m == 0 {
            return Err(Error::InvalidGraph("no edges".into()));
        }
        Self::new(
            n,
            edges,
            vec![1.0; m],
            vec![1.0 / m as f64; m],
            vec![1.0; m],
            vec![0.0; n],
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, k: usize) -> (usize, usize) {
        self.edges[k]
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn delta_comp(&self) -> &[f64] {
        &self.delta_comp
    }

    /// Indices of the edges touching node `i`.
    pub fn incident(&self, i: usize) -> &[usize] {
        &self.incident[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.incident[i].len()
    }

    /// `p_i = sum_j p_ij`: the probability that node `i` is active.
    pub fn node_probabilities(&self) -> Vec<f64> {
        self.incident
            .iter()
            .map(|es| es.iter().map(|&k| self.p[k]).sum())
            .collect()
    }

    pub fn tau_max(&self) -> f64 {
        self.tau.iter().cloned().fold(0.0, f64::max)
    }

    pub fn with_mu(mut self, mu: Vec<f64>) -> Result<Self> {
        self.mu = mu;
        self.revalidate()
    }

    pub fn with_uniform_mu(self, value: f64) -> Result<Self> {
        let m = self.num_edges();
        self.with_mu(vec![value; m])
    }

    pub fn with_probabilities(mut self, p: Vec<f64>) -> Result<Self> {
        self.p = p;
        self.revalidate()
    }

    pub fn with_delays(mut self, tau: Vec<f64>) -> Result<Self> {
        self.tau = tau;
        self.revalidate()
    }

    pub fn with_compute_times(mut self, delta_comp: Vec<f64>) -> Result<Self> {
        self.delta_comp = delta_comp;
        self.revalidate()
    }

    /// Draws one exponential delay per edge; delays stay fixed for the run.
    pub fn with_exponential_delays(self, rate: f64, seed: u64) -> Result<Self> {
        let exp = Exp::new(rate)
            .map_err(|e| Error::InvalidGraph(format!("exponential rate {rate}: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = (0..self.num_edges()).map(|_| exp.sample(&mut rng)).collect();
        self.with_delays(tau)
    }

    fn revalidate(self) -> Result<Self> {
        Self::new(self.n, self.edges, self.mu, self.p, self.tau, self.delta_comp)
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &k in &self.incident[u] {
                let (a, b) = self.edges[k];
                let w = if a == u { b } else { a };
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n
    }

    /// Structured text form: `n E`, one `i j mu p tau` line per edge, then
    /// one `i delta` line per node. Reals use 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.num_edges());
        for (k, &(i, j)) in self.edges.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i} {j} {:.16e} {:.16e} {:.16e}",
                self.mu[k], self.p[k], self.tau[k]
            );
        }
        for (i, d) in self.delta_comp.iter().enumerate() {
            let _ = writeln!(out, "{i} {d:.16e}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (line, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "empty graph file".into(),
        })?;
        let head = fields(line, header, 2)?;
        let n: usize = parse(line, head[0])?;
        let m: usize = parse(line, head[1])?;

        let mut edges = Vec::with_capacity(m);
        let (mut mu, mut p, mut tau) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..m {
            let (line, l) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("expected {m} edge lines"),
            })?;
            let f = fields(line, l, 5)?;
            edges.push((parse(line, f[0])?, parse(line, f[1])?));
            mu.push(parse(line, f[2])?);
            p.push(parse(line, f[3])?);
            tau.push(parse(line, f[4])?);
        }
        let mut delta = vec![None; n];
        for _ in 0..n {
            let (line, l) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("expected {n} node lines"),
            })?;
            let f = fields(line, l, 2)?;
            let i: usize = parse(line, f[0])?;
            if i >= n || delta[i].is_some() {
                return Err(Error::Parse {
                    line,
                    msg: format!("bad or repeated node index {i}"),
                });
            }
            delta[i] = Some(parse(line, f[1])?);
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::Parse {
                line,
                msg: "trailing content".into(),
            });
        }
        let delta = delta.into_iter().map(|d| d.unwrap_or(0.0)).collect();
        Self::new(n, edges, mu, p, tau, delta)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn fields(line: usize, text: &str, want: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = text.split_whitespace().collect();
    if f.len() != want {
        return Err(Error::Parse {
            line,
            msg: format!("expected {want} fields, found {}", f.len()),
        });
    }
    Ok(f)
}

fn parse<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {s:?}"),
    })
}

/// Builds one of the standard topologies with default attributes.
pub fn build_topology(kind: TopologyKind, n: usize) -> Result<Graph> {
    if n < 2 {
        return Err(Error::TooFewVertices(n));
    }
    let edges = match kind {
        TopologyKind::Ring if n == 2 => vec![(0, 1)],
        TopologyKind::Ring => {
            let mut e: Vec<_> = (0..n - 1).map(|k| (k, k + 1)).collect();
            e.push((0, n - 1));
            e
        }
        TopologyKind::Path => (0..n - 1).map(|k| (k, k + 1)).collect(),
        TopologyKind::Star => (1..n).map(|k| (0, k)).collect(),
        TopologyKind::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        TopologyKind::Grid2d => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(Error::NotSquare(n));
            }
            let mut e = Vec::with_capacity(2 * side * (side - 1));
            for r in 0..side {
                for c in 0..side {
                    let u = r * side + c;
                    if c + 1 < side {
                        e.push((u, u + 1));
                    }
                    if r + 1 < side {
                        e.push((u, u + side));
                    }
                }
            }
            e
        }
        TopologyKind::ErdosRenyi { prob, seed } => return erdos_renyi(n, prob, seed),
    };
    Graph::with_defaults(n, edges)
}

fn erdos_renyi(n: usize, prob: f64, seed: u64) -> Result<Graph> {
    if !(prob > 0.0 && prob <= 1.0) {
        return Err(Error::InvalidGraph(format!("edge probability {prob} not in (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ER_MAX_ATTEMPTS {
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|_| rng.random::<f64>() < prob)
            .collect();
        if edges.is_empty() {
            continue;
        }
        match Graph::with_defaults(n, edges) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::SamplingExhausted(ER_MAX_ATTEMPTS))
}

/// Dense `n x E` incidence matrix with column `mu_ij (e_i - e_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    pub matrix: DMatrix<f64>,
}

impl IncidenceMatrix {
    /// `A A^T`, a weighted Laplacian with edge weights `mu_ij^2`.
    pub fn gram_nodes(&self) -> DMatrix<f64> {
        &self.matrix * self.matrix.transpose()
    }

    /// `A^T A`, the `E x E` edge-space Gram matrix.
    pub fn gram_edges(&self) -> DMatrix<f64> {
        self.matrix.transpose() * &self.matrix
    }
}

pub fn incidence(g: &Graph) -> IncidenceMatrix {
    let mut a = DMatrix::zeros(g.n(), g.num_edges());
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        a[(i, k)] = g.mu()[k];
        a[(j, k)] = -g.mu()[k];
    }
    IncidenceMatrix { matrix: a }
}

/// Unit-weight combinatorial Laplacian `D - Adj`.
pub fn laplacian(g: &Graph) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(g.n(), g.n());
    for &(i, j) in g.edges() {
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
    }
    l
}

/// Smallest constants for which the quasi-regularity and projector-balance
/// conditions hold on this instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    /// `max(p_max / p_min, d_max / d_min)`.
    pub c_regularity: f64,
    /// `max_ij e_ij^T A^+ A e_ij * E / n`, with unit weights.
    pub c_projector: f64,
}

pub fn check_assumptions(g: &Graph) -> Result<AssumptionReport> {
    let p_max = g.p().iter().cloned().fold(f64::MIN, f64::max);
    let p_min = g.p().iter().cloned().fold(f64::MAX, f64::min);
    let degrees: Vec<usize> = (0..g.n()).map(|i| g.degree(i)).collect();
    let d_max = *degrees.iter().max().unwrap_or(&1) as f64;
    let d_min = *degrees.iter().min().unwrap_or(&1) as f64;
    let c_regularity = (p_max / p_min).max(d_max / d_min);

    let unit = incidence(&g.clone().with_uniform_mu(1.0)?);
    let diag = spectral::projector_diagonals(&unit)?;
    let max_diag = diag.iter().cloned().fold(0.0, f64::max);
    let c_projector = max_diag * g.num_edges() as f64 / g.n() as f64;
    Ok(AssumptionReport {
        c_regularity,
        c_projector,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ring_four() {
        let g = build_topology(TopologyKind::Ring, 4).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        assert!(g.p().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn complete_five() {
        let g = build_topology(TopologyKind::Complete, 5).unwrap();
        assert_eq!(g.num_edges(), 10);
        assert!(g.p().iter().all(|&p| p == 0.1));
    }

    #[test]
    fn grid_three_by_three_edge_count() {
        // enumerate lattice neighbours directly
        let mut count = 0;
        for a in 0..9usize {
            for b in a + 1..9usize {
                let (ra, ca, rb, cb) = (a / 3, a % 3, b / 3, b % 3);
                if ra.abs_diff(rb) + ca.abs_diff(cb) == 1 {
                    count += 1;
                }
            }
        }
        let g = build_topology(TopologyKind::Grid2d, 9).unwrap();
        assert_eq!(g.num_edges(), count);
        assert_eq!(count, 12);
    }

    #[test]
    fn topology_errors() {
        assert!(matches!(
            build_topology(TopologyKind::Grid2d, 10),
            Err(Error::NotSquare(10))
        ));
        assert!(matches!(
            build_topology(TopologyKind::Ring, 1),
            Err(Error::TooFewVertices(1))
        ));
    }

    #[test]
    fn erdos_renyi_is_connected_and_deterministic() {
        let kind = TopologyKind::ErdosRenyi { prob: 0.2, seed: 7 };
        let a = build_topology(kind, 25).unwrap();
        let b = build_topology(kind, 25).unwrap();
        assert_eq!(a, b);
        assert!(a.is_connected());
    }

    #[test]
    fn rejects_malformed_graphs() {
        let bad = |edges: Vec<(usize, usize)>| Graph::with_defaults(3, edges);
        assert!(bad(vec![(0, 0), (1, 2)]).is_err());
        assert!(bad(vec![(0, 1), (1, 0), (1, 2)]).is_err());
        assert!(matches!(bad(vec![(0, 1)]), Err(Error::Disconnected)));
        let g = build_topology(TopologyKind::Path, 3).unwrap();
        assert!(g.clone().with_probabilities(vec![0.5, 0.6]).is_err());
        assert!(g.with_mu(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn single_edge_incidence_column() {
        let g = build_topology(TopologyKind::Path, 2).unwrap();
        let a = incidence(&g);
        assert_eq!(a.matrix.column(0).as_slice(), &[1.0, -1.0]);
    }

    #[test]
    fn incidence_columns_sum_to_zero() {
        let g =build_topology(TopologyKind::ErdosRenyi { prob: 0.3, seed: 3 }, 12).unwrap();
        let m = g.num_edges();
        let g = g
            .with_mu((0..m).map(|k| 0.3 + 0.17 * k as f64).collect())
            .unwrap();
        let a = incidence(&g);
        for col in a.matrix.column_iter() {
            assert!(col.sum().abs() <= 1e-14);
        }
    }

    #[test]
    fn complete_three_half_weights_gives_half_laplacian() {
        let g = build_topology(TopologyKind::Complete, 3)
            .unwrap()
            .with_uniform_mu(0.5f64.sqrt())
            .unwrap();
        let aat = incidence(&g).gram_nodes();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, -0.5, -0.5, -0.5, 1.0, -0.5, -0.5, -0.5, 1.0]);
        assert_abs_diff_eq!(aat, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(aat, laplacian(&g) * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn laplacian_examples() {
        let tri = laplacian(&build_topology(TopologyKind::Ring, 3).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(tri[(i, j)], if i == j { 2.0 } else { -1.0 });
            }
        }
        let grid = laplacian(&build_topology(TopologyKind::Grid2d, 9).unwrap());
        assert_eq!(grid[(0, 0)], 2.0);
        assert_eq!(grid[(4, 4)], 4.0);
        for row in grid.row_iter() {
            assert_eq!(row.sum(), 0.0);
        }
    }

    #[test]
    fn unit_weight_laplacian_is_aat() {
        let g = build_topology(TopologyKind::Grid2d, 16).unwrap();
        assert_eq!(incidence(&g).gram_nodes(), laplacian(&g));
    }

    #[test]
    fn assumption_constants() {
        let complete = check_assumptions(&build_topology(TopologyKind::Complete, 6).unwrap()).unwrap();
        assert_eq!(complete.c_regularity, 1.0);
        let ring = check_assumptions(&build_topology(TopologyKind::Ring, 8).unwrap()).unwrap();
        assert_eq!(ring.c_regularity, 1.0);
        assert_abs_diff_eq!(ring.c_projector, 7.0 / 8.0, epsilon = 1e-12);
        let star = check_assumptions(&build_topology(TopologyKind::Star, 10).unwrap()).unwrap();
        assert_eq!(star.c_regularity, 9.0);
        // tree: every edge is a cut edge, so the projector diagonal is 1
        assert_abs_diff_eq!(star.c_projector, 9.0 / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let g = build_topology(TopologyKind::Complete, 7)
            .unwrap()
            .with_exponential_delays(1.0, 11)
            .unwrap()
            .with_compute_times((0..7).map(|i| 0.1 / (i as f64 + 3.0)).collect())
            .unwrap();
        let back = Graph::from_text(&g.to_text()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Graph::from_text("2 1\n0 1 1.0 1.0\n0 0\n1 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
