//! Shared domain types: physical parameters, coupling graphs, the polaritonic
//! qubit and its dual-rail state, measurement schedules and transfer records.
//!
//! Sites are 0-based throughout the library API. File formats and the CLI use
//! 1-based node labels; the conversion happens in [`GraphFile`].

use std::collections::{HashSet, VecDeque};
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Input normalization tolerance; anything further off is rejected.
pub const INPUT_NORM_TOL: f64 = 1e-9;
/// Allowed numerical drift of a squared norm above one.
pub const DRIFT_TOL: f64 = 1e-10;

/// Physical parameters of a Jaynes-Cummings-Hubbard array, in rate units.
///
/// The detuning is derived from `omega_0 - omega_d` on demand and never
/// stored, so it cannot go stale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct JchParams {
    omega_d: f64,
    omega_0: f64,
    g: f64,
    hopping: f64,
    kappa: f64,
    gamma: f64,
    n_max: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    omega_d: f64,
    omega_0: f64,
    g: f64,
    hopping: f64,
    #[serde(default)]
    kappa: f64,
    #[serde(default)]
    gamma: f64,
    n_max: usize,
}

impl TryFrom<RawParams> for JchParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        JchParams::new(r.omega_d, r.omega_0, r.g, r.hopping, r.kappa, r.gamma, r.n_max)
    }
}

impl From<JchParams> for RawParams {
    fn from(p: JchParams) -> Self {
        RawParams {
            omega_d: p.omega_d,
            omega_0: p.omega_0,
            g: p.g,
            hopping: p.hopping,
            kappa: p.kappa,
            gamma: p.gamma,
            n_max: p.n_max,
        }
    }
}

impl JchParams {
    pub fn new(
        omega_d: f64,
        omega_0: f64,
        g: f64,
        hopping: f64,
        kappa: f64,
        gamma: f64,
        n_max: usize,
    ) -> Result<Self> {
        let finite = [omega_d, omega_0, g, hopping, kappa, gamma]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        if g <= 0.0 {
            return Err(Error::InvalidParameter(format!("g must be > 0, got {g}")));
        }
        if hopping < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "hopping must be >= 0, got {hopping}"
            )));
        }
        if kappa < 0.0 || gamma < 0.0 {
            return Err(Error::InvalidParameter("decay rates must be >= 0".into()));
        }
        if n_max < 1 {
            return Err(Error::InvalidParameter("n_max must be >= 1".into()));
        }
        Ok(Self { omega_d, omega_0, g, hopping, kappa, gamma, n_max })
    }

    /// Resonant, lossless parameters with `omega_d = omega_0 = 1e4 g`.
    pub fn resonant(g: f64, hopping: f64, n_max: usize) -> Result<Self> {
        Self::new(1e4 * g, 1e4 * g, g, hopping, 0.0, 0.0, n_max)
    }

    pub fn omega_d(&self) -> f64 {
        self.omega_d
    }
    pub fn omega_0(&self) -> f64 {
        self.omega_0
    }
    pub fn g(&self) -> f64 {
        self.g
    }
    /// Photon hopping rate between coupled cavities.
    pub fn hopping(&self) -> f64 {
        self.hopping
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn n_max(&self) -> usize {
        self.n_max
    }
    pub fn delta(&self) -> f64 {
        self.omega_0 - self.omega_d
    }

    pub fn is_resonant(&self) -> bool {
        self.delta().abs() <= 1e-12 * self.omega_d.abs().max(self.g)
    }

    /// Polariton decay rate for equal photonic and atomic content.
    pub fn polariton_decay(&self) -> f64 {
        0.5 * (self.kappa + self.gamma)
    }

    pub fn with_hopping(&self, hopping: f64) -> Result<Self> {
        Self::new(self.omega_d, self.omega_0, self.g, hopping, self.kappa, self.gamma, self.n_max)
    }

    pub fn with_n_max(&self, n_max: usize) -> Result<Self> {
        Self::new(self.omega_d, self.omega_0, self.g, self.hopping, self.kappa, self.gamma, n_max)
    }

    pub fn with_losses(&self, kappa: f64, gamma: f64) -> Result<Self> {
        Self::new(self.omega_d, self.omega_0, self.g, self.hopping, kappa, gamma, self.n_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Weighted, undirected coupling topology with a designated sender and
/// receiver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct CouplingGraph {
    nodes: usize,
    edges: Vec<Edge>,
    sender: usize,
    receiver: usize,
}

/// On-disk topology: 1-based node labels, edges as `[i, j, weight]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub sender: usize,
    pub receiver: usize,
}

impl TryFrom<GraphFile> for CouplingGraph {
    type Error = Error;
    fn try_from(f: GraphFile) -> Result<Self> {
        let to_zero = |label: usize, what: &str| {
            if label == 0 || label > f.nodes {
                Err(Error::InvalidTopology(format!(
                    "{what} {label} outside 1..={}",
                    f.nodes
                )))
            } else {
                Ok(label - 1)
            }
        };
        let mut edges = Vec::with_capacity(f.edges.len());
        for &(i, j, w) in &f.edges {
            edges.push((to_zero(i, "edge node")?, to_zero(j, "edge node")?, w));
        }
        build_graph(
            f.nodes,
            &edges,
            to_zero(f.sender, "sender")?,
            to_zero(f.receiver, "receiver")?,
        )
    }
}

impl From<CouplingGraph> for GraphFile {
    fn from(g: CouplingGraph) -> Self {
        GraphFile {
            nodes: g.nodes,
            edges: g.edges.iter().map(|e| (e.a + 1, e.b + 1, e.weight)).collect(),
            sender: g.sender + 1,
            receiver: g.receiver + 1,
        }
    }
}

/// Path graph `0 - 1 - ... - (n-1)` with uniform hopping `j`, sender at the
/// first site and receiver at the last.
pub fn build_chain(n: usize, j: f64) -> Result<CouplingGraph> {
    if n < 1 {
        return Err(Error::InvalidParameter("chain needs at least one site".into()));
    }
    if !(j > 0.0 && j.is_finite()) {
        return Err(Error::InvalidParameter(format!("hopping must be > 0, got {j}")));
    }
    let edges: Vec<_> = (0..n - 1).map(|k| (k, k + 1, j)).collect();
    build_graph(n, &edges, 0, n - 1)
}

/// Validates and builds an arbitrary coupling graph. Connectivity between
/// sender and receiver is not required here; query it with
/// [`CouplingGraph::endpoints_connected`].
pub fn build_graph(
    nodes: usize,
    edges: &[(usize, usize, f64)],
    sender: usize,
    receiver: usize,
) -> Result<CouplingGraph> {
    if nodes < 1 {
        return Err(Error::InvalidTopology("graph needs at least one node".into()));
    }
    if sender >= nodes || receiver >= nodes {
        return Err(Error::InvalidTopology(format!(
            "sender {sender} / receiver {receiver} out of range for {nodes} nodes"
        )));
    }
    if nodes > 1 && sender == receiver {
        return Err(Error::InvalidTopology("sender and receiver must differ".into()));
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(edges.len());
    for &(a, b, weight) in edges {
        if a >= nodes || b >= nodes {
            return Err(Error::InvalidTopology(format!("edge ({a}, {b}) out of range")));
        }
        if a == b {
            return Err(Error::InvalidTopology(format!("self-loop at node {a}")));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::InvalidTopology(format!(
                "edge ({a}, {b}) has non-positive weight {weight}"
            )));
        }
        if !seen.insert((a.min(b), a.max(b))) {
            return Err(Error::InvalidTopology(format!("duplicate edge ({a}, {b})")));
        }
        out.push(Edge { a, b, weight });
    }
    Ok(CouplingGraph { nodes, edges: out, sender, receiver })
}

impl CouplingGraph {
    pub fn node_count(&self) -> usize {
        self.nodes
    }
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
    pub fn sender(&self) -> usize {
        self.sender
    }
    pub fn receiver(&self) -> usize {
        self.receiver
    }

    /// Same topology with different endpoints.
    pub fn with_endpoints(&self, sender: usize, receiver: usize) -> Result<Self> {
        let edges: Vec<_> = self.edges.iter().map(|e| (e.a, e.b, e.weight)).collect();
        build_graph(self.nodes, &edges, sender, receiver)
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(0.0, f64::max)
    }

    pub fn min_weight(&self) -> Option<f64> {
        self.edges.iter().map(|e| e.weight).reduce(f64::min)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        adj
    }

    /// Connected-component label of every node.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.nodes];
        let mut next = 0;
        for start in 0..self.nodes {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn connected(&self, a: usize, b: usize) -> bool {
        let c = self.components();
        c[a] == c[b]
    }

    pub fn endpoints_connected(&self) -> bool {
        self.connected(self.sender, self.receiver)
    }

    /// Uniform hopping `J` if this is a path graph whose two ends are the
    /// sender and the receiver (in either labelling).
    pub fn as_uniform_chain(&self) -> Option<f64> {
        if self.nodes == 1 {
            return None;
        }
        if self.edges.len() != self.nodes - 1 {
            return None;
        }
        let j = self.edges[0].weight;
        if self.edges.iter().any(|e| e.weight != j) {
            return None;
        }
        let adj = self.adjacency();
        if adj.iter().any(|n| n.len() > 2) {
            return None;
        }
        if adj[self.sender].len() != 1 || adj[self.receiver].len() != 1 {
            return None;
        }
        // n-1 edges, max degree 2 and connected => path
        if self.components().iter().any(|&c| c != 0) {
            return None;
        }
        Some(j)
    }
}

/// Polaritonic qubit `alpha |1+> + beta |1->`; `alpha` rides on rail I (the
/// `+` species), `beta` on rail II (the `-` species).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolaritonQubit {
    pub alpha: C64,
    pub beta: C64,
}

impl PolaritonQubit {
    pub fn new(alpha: C64, beta: C64) -> Result<Self> {
        let norm_sqr = alpha.norm_sqr() + beta.norm_sqr();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > INPUT_NORM_TOL {
            return Err(Error::Normalization { norm_sqr });
        }
        Ok(Self { alpha, beta })
    }

    pub fn plus() -> Self {
        Self { alpha: C64::new(1.0, 0.0), beta: C64::new(0.0, 0.0) }
    }

    pub fn minus() -> Self {
        Self { alpha: C64::new(0.0, 0.0), beta: C64::new(1.0, 0.0) }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.alpha.norm_sqr() + self.beta.norm_sqr()
    }

    /// `|<self|other>|^2` for normalized qubits.
    pub fn fidelity(&self, other: &PolaritonQubit) -> f64 {
        let overlap = self.alpha.conj() * other.alpha + self.beta.conj() * other.beta;
        overlap.norm_sqr() / (self.norm_sqr() * other.norm_sqr())
    }
}

/// Single-excitation spatial amplitudes, possibly sub-normalized after failed
/// heralding measurements or loss.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleExcitationState {
    amplitudes: Vec<C64>,
}

impl SingleExcitationState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() || norm_sqr > 1.0 + DRIFT_TOL {
            return Err(Error::InvalidParameter(format!(
                "squared norm {norm_sqr} exceeds one"
            )));
        }
        Ok(Self { amplitudes })
    }

    pub fn localized(n: usize, site: usize) -> Result<Self> {
        if site >= n {
            return Err(Error::DimensionMismatch { expected: n, got: site + 1 });
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); n];
        amplitudes[site] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn from_raw(amplitudes: Vec<C64>) -> Self {
        debug_assert!(amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() <= 1.0 + DRIFT_TOL);
        Self { amplitudes }
    }

    pub(crate) fn into_raw(self) -> Vec<C64> {
        self.amplitudes
    }
}

/// `alpha |0>_I |f>_II + beta |f>_I |0>_II`, stored factorized: both rails
/// share the spatial vector `f` because the two polariton species hop
/// identically and independently.
#[derive(Clone, Debug, PartialEq)]
pub struct DualRailState {
    pub qubit: PolaritonQubit,
    pub spatial: SingleExcitationState,
}

/// Places the qubit on the sender cavity.
pub fn encode_polariton_qubit(
    alpha: C64,
    beta: C64,
    graph: &CouplingGraph,
) -> Result<DualRailState> {
    let qubit = PolaritonQubit::new(alpha, beta)?;
    Ok(DualRailState {
        qubit,
        spatial: SingleExcitationState::localized(graph.node_count(), graph.sender())?,
    })
}

/// Coefficients of `a |e,0> + b |g,1>` in the polariton basis
/// `|1+-> = (|g,1> +- |e,0>)/sqrt(2)`.
pub fn bare_to_polariton(a: C64, b: C64) -> Result<(C64, C64)> {
    check_unit(a, b)?;
    Ok(((a + b) * FRAC_1_SQRT_2, (b - a) * FRAC_1_SQRT_2))
}

/// Inverse of [`bare_to_polariton`].
pub fn polariton_to_bare(alpha: C64, beta: C64) -> Result<(C64, C64)> {
    check_unit(alpha, beta)?;
    Ok(((alpha - beta) * FRAC_1_SQRT_2, (alpha + beta) * FRAC_1_SQRT_2))
}

fn check_unit(a: C64, b: C64) -> Result<()> {
    let norm_sqr = a.norm_sqr() + b.norm_sqr();
    if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > INPUT_NORM_TOL {
        return Err(Error::Normalization { norm_sqr });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelEnergy {
    /// `|g,0>`, energy zero by convention.
    Ground,
    Polariton(f64),
}

impl LevelEnergy {
    pub fn value(self) -> f64 {
        match self {
            LevelEnergy::Ground => 0.0,
            LevelEnergy::Polariton(e) => e,
        }
    }
}

/// `E = n omega_d +- g sqrt(n)`, valid on resonance only.
pub fn polariton_energy(n: usize, branch: Branch, params: &JchParams) -> Result<LevelEnergy> {
    if !params.is_resonant() {
        return Err(Error::UnsupportedClosedForm(format!(
            "detuning {} != 0; diagonalize the full model instead",
            params.delta()
        )));
    }
    if n == 0 {
        return Ok(LevelEnergy::Ground);
    }
    let n = n as f64;
    Ok(LevelEnergy::Polariton(n * params.omega_d() + branch.sign() * params.g() * n.sqrt()))
}

/// When and how the receiver is interrogated. Times are in units of the
/// inverse reference hopping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasurementSchedule {
    SnapshotList { times: Vec<f64> },
    Regular { t0: f64, tau: f64, max_rounds: usize },
    GreedyOptimized { window: f64, grid_step: f64, max_rounds: usize },
    Continuous { rate: f64, duration: f64, dt: f64 },
}

impl MeasurementSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            MeasurementSchedule::SnapshotList { times } => {
                if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
                    return bad("snapshot times must be finite and >= 0".into());
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("snapshot times must be strictly increasing".into());
                }
            }
            MeasurementSchedule::Regular { t0, tau, .. } => {
                if !(t0.is_finite() && *t0 >= 0.0) {
                    return bad(format!("t0 must be >= 0, got {t0}"));
                }
                if !(tau.is_finite() && *tau > 0.0) {
                    return bad(format!("tau must be > 0, got {tau}"));
                }
            }
            MeasurementSchedule::GreedyOptimized { window, grid_step, .. } => {
                if !(window.is_finite() && *window > 0.0) {
                    return bad(format!("window must be > 0, got {window}"));
                }
                if !(grid_step.is_finite() && *grid_step > 0.0 && grid_step <= window) {
                    return bad(format!("grid step must be in (0, window], got {grid_step}"));
                }
            }
            MeasurementSchedule::Continuous { rate, duration, dt } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return bad(format!("detection rate must be > 0, got {rate}"));
                }
                if !(duration.is_finite() && *duration >= 0.0) {
                    return bad(format!("duration must be >= 0, got {duration}"));
                }
                if !(dt.is_finite() && *dt > 0.0) {
                    return bad(format!("dt must be > 0, got {dt}"));
                }
            }
        }
        Ok(())
    }

    /// Measurement times for the explicit schedule kinds.
    pub fn times(&self) -> Option<Vec<f64>> {
        match self {
            MeasurementSchedule::SnapshotList { times } => Some(times.clone()),
            MeasurementSchedule::Regular { t0, tau, max_rounds } => {
                Some((0..*max_rounds).map(|k| t0 + k as f64 * tau).collect())
            }
            _ => None,
        }
    }
}

/// One heralding round.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub time: f64,
    /// Success probability conditioned on every earlier round failing (and,
    /// in lossy runs, on survival).
    pub conditional: f64,
    pub absolute: f64,
    pub cumulative: f64,
    /// Squared norm left in the failure branch after this round.
    pub remaining: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub rounds: Vec<RoundRecord>,
    /// Worst fidelity of the received qubit over all rounds with a nonzero
    /// chance of heralding. `None` when no round could herald.
    pub conditional_fidelity: Option<f64>,
    pub elapsed: f64,
    pub converged: bool,
    pub target: f64,
    /// Upper bound on cumulative success for this sender/receiver pair.
    pub ceiling: f64,
    pub remaining_norm: f64,
    pub decayed: f64,
    pub diagnostic: Option<String>,
}

impl TransferRecord {
    pub fn cumulative_success(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cumulative)
    }

    /// `cumulative + remaining + decayed - 1`; zero up to rounding.
    pub fn norm_defect(&self) -> f64 {
        self.cumulative_success() + self.remaining_norm + self.decayed - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn chain_construction() {
        let g = build_chain(2, 1.0).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges(), &[Edge { a: 0, b: 1, weight: 1.0 }]);
        assert_eq!((g.sender(), g.receiver()), (0, 1));

        let g = build_chain(1, 1.0).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!((g.sender(), g.receiver()), (0, 0));

        let g = build_chain(5, 0.5).unwrap();
        assert_eq!(g.edges().len(), 4);
        assert!(g.edges().iter().all(|e| e.weight == 0.5));
        assert_eq!(g.as_uniform_chain(), Some(0.5));
    }

    #[test]
    fn chain_rejects_bad_parameters() {
        assert!(matches!(build_chain(0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_chain(3, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(build_chain(3, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn star_ring_and_disconnected_graphs() {
        let star = build_graph(5, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (0, 4, 1.0)], 1, 2)
            .unwrap();
        assert!(star.endpoints_connected());
        assert_eq!(star.as_uniform_chain(), None);

        let split = build_graph(4, &[(0, 1, 1.0), (2, 3, 1.0)], 0, 2).unwrap();
        assert!(!split.endpoints_connected());

        let ring: Vec<_> = (0..6).map(|k| (k, (k + 1) % 6, 1.0)).collect();
        let ring = build_graph(6, &ring, 0, 3).unwrap();
        assert!(ring.endpoints_connected());
        assert_eq!(ring.as_uniform_chain(), None);
    }

    #[test]
    fn topology_errors() {
        let err = |e: Result<CouplingGraph>| matches!(e, Err(Error::InvalidTopology(_)));
        assert!(err(build_graph(3, &[(1, 1, 1.0)], 0, 2)));
        assert!(err(build_graph(3, &[(0, 1, 1.0), (1, 0, 2.0)], 0, 2)));
        assert!(err(build_graph(3, &[(0, 1, 0.0)], 0, 2)));
        assert!(err(build_graph(3, &[(0, 3, 1.0)], 0, 2)));
        assert!(err(build_graph(3, &[(0, 1, 1.0)], 0, 3)));
        assert!(err(build_graph(3, &[(0, 1, 1.0)], 1, 1)));
    }

    #[test]
    fn relabelled_chain_is_still_a_chain() {
        let g = build_graph(3, &[(2, 0, 1.0), (0, 1, 1.0)], 2, 1).unwrap();
        assert_eq!(g.as_uniform_chain(), Some(1.0));
        let g = build_graph(3, &[(2, 0, 1.0), (0, 1, 1.0)], 0, 1).unwrap();
        assert_eq!(g.as_uniform_chain(), None);
    }

    #[test]
    fn graph_file_is_one_based() {
        let g = build_chain(3, 1.0).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        assert_eq!(
            json,
            r#"{"nodes":3,"edges":[[1,2,1.0],[2,3,1.0]],"sender":1,"receiver":3}"#
        );
        let back: CouplingGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        let bad = r#"{"nodes":3,"edges":[[0,1,1.0]],"sender":1,"receiver":3}"#;
        assert!(serde_json::from_str::<CouplingGraph>(bad).is_err());
    }

    #[test]
    fn encoding_places_qubit_on_sender() {
        let g = build_chain(4, 1.0).unwrap();
        let s = encode_polariton_qubit(c(1.0, 0.0), c(0.0, 0.0), &g).unwrap();
        assert_eq!(s.qubit, PolaritonQubit::plus());
        assert_eq!(s.spatial.amplitudes()[0], c(1.0, 0.0));
        assert_eq!(s.spatial.norm_sqr(), 1.0);

        let s = encode_polariton_qubit(c(0.0, 0.0), c(1.0, 0.0), &g).unwrap();
        assert_eq!(s.qubit, PolaritonQubit::minus());

        let h = FRAC_1_SQRT_2;
        let s = encode_polariton_qubit(c(h, 0.0), c(0.0, h), &g).unwrap();
        assert_eq!(s.qubit.alpha, c(h, 0.0));
        assert_eq!(s.qubit.beta, c(0.0, h));
        assert_eq!(s.spatial.norm_sqr(), 1.0);

        assert!(matches!(
            encode_polariton_qubit(c(1.0, 0.0), c(1.0, 0.0), &g),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn bare_polariton_transform() {
        let h = FRAC_1_SQRT_2;
        let (a, b) = bare_to_polariton(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(a.re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(b.re, -h, epsilon = 1e-15);
        let (a, b) = bare_to_polariton(c(0.0, 0.0), c(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(a.re, h, epsilon = 1e-15);
        assert_abs_diff_eq!(b.re, h, epsilon = 1e-15);

        // oracle: the 2x2 matrix [[1, 1], [-1, 1]] / sqrt(2) applied to (a, b)
        let (x, y) = (c(h, 0.0), c(h, 0.0));
        let m = [[h, h], [-h, h]];
        let expected = (x * m[0][0] + y * m[0][1], x * m[1][0] + y * m[1][1]);
        let (a, b) = bare_to_polariton(x, y).unwrap();
        assert_abs_diff_eq!((a - expected.0).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((b - expected.1).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.norm(), 0.0, epsilon = 1e-15);

        assert!(bare_to_polariton(c(2.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn polariton_energies() {
        let p = JchParams::resonant(1.0, 0.01, 2).unwrap();
        assert_eq!(p.omega_d(), 1e4);
        assert_eq!(polariton_energy(1, Branch::Plus, &p).unwrap().value(), 1e4 + 1.0);
        assert_eq!(polariton_energy(1, Branch::Minus, &p).unwrap().value(), 1e4 - 1.0);
        let p0 = JchParams::new(0.0, 0.0, 1.0, 0.01, 0.0, 0.0, 4).unwrap();
        assert_eq!(polariton_energy(4, Branch::Plus, &p0).unwrap().value(), 2.0);
        assert_eq!(polariton_energy(0, Branch::Plus, &p0).unwrap(), LevelEnergy::Ground);

        let detuned = JchParams::new(1.0, 1.5, 1.0, 0.01, 0.0, 0.0, 2).unwrap();
        assert_eq!(detuned.delta(), 0.5);
        assert!(matches!(
            polariton_energy(1, Branch::Plus, &detuned),
            Err(Error::UnsupportedClosedForm(_))
        ));
    }

    #[test]
    fn params_validation() {
        assert!(JchParams::new(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1).is_err());
        assert!(JchParams::new(1.0, 1.0, 1.0, 1.0, -1.0, 0.0, 1).is_err());
        assert!(JchParams::new(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0).is_err());
        let p = JchParams::new(1.0, 1.25, 1.0, 1.0, 0.1, 0.3, 2).unwrap();
        assert_eq!(p.polariton_decay(), 0.2);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<JchParams>(&json).unwrap(), p);
    }

    #[test]
    fn schedule_validation() {
        let s = MeasurementSchedule::SnapshotList { times: vec![1.0, 1.0] };
        assert!(s.validate().is_err());
        let s = MeasurementSchedule::Regular { t0: 1.0, tau: 0.0, max_rounds: 3 };
        assert!(s.validate().is_err());
        let s = MeasurementSchedule::Regular { t0: 1.0, tau: 0.5, max_rounds: 3 };
        assert_eq!(s.times().unwrap(), vec![1.0, 1.5, 2.0]);
        let s = MeasurementSchedule::Continuous { rate: 0.0, duration: 1.0, dt: 0.1 };
        assert!(s.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = CouplingGraph> {
            (2usize..12).prop_flat_map(|n| {
                let pairs: Vec<(usize, usize)> =
                    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
                (
                    Just(n),
                    proptest::sample::subsequence(pairs.clone(), 0..=pairs.len()),
                    proptest::collection::vec(1e-3f64..1e3, pairs.len()),
                    0..n,
                    1..n,
                )
                    .prop_map(|(n, chosen, weights, s, shift)| {
                        let edges: Vec<_> = chosen
                            .iter()
                            .zip(weights)
                            .map(|(&(a, b), w)| (a, b, w))
                            .collect();
                        build_graph(n, &edges, s, (s + shift) % n).unwrap()
                    })
            })
        }

        proptest! {
            #[test]
            fn graph_serialization_round_trips_exactly(g in arb_graph()) {
                let json = serde_json::to_string(&g).unwrap();
                let back: CouplingGraph = serde_json::from_str(&json).unwrap();
                prop_assert_eq!(back, g);
            }

            #[test]
            fn bare_to_polariton_is_unitary(
                ar in -1.0f64..1.0, ai in -1.0f64..1.0, br in -1.0f64..1.0, bi in -1.0f64..1.0,
            ) {
                let norm = (ar * ar + ai * ai + br * br + bi * bi).sqrt();
                prop_assume!(norm > 1e-3);
                let (a, b) = (C64::new(ar, ai) / norm, C64::new(br, bi) / norm);
                let (x, y) = bare_to_polariton(a, b).unwrap();
                prop_assert!((x.norm_sqr() + y.norm_sqr() - (a.norm_sqr() + b.norm_sqr())).abs() < 1e-14);
                let (a2, b2) = polariton_to_bare(x, y).unwrap();
                prop_assert!((a2 - a).norm() < 1e-14 && (b2 - b).norm() < 1e-14);
            }

            #[test]
            fn polariton_splitting_is_two_g_sqrt_n(n in 1usize..64, g in 1e-3f64..1e3) {
                let p = JchParams::resonant(g, 0.01, 4).unwrap();
                let plus = polariton_energy(n, Branch::Plus, &p).unwrap().value();
                let minus = polariton_energy(n, Branch::Minus, &p).unwrap().value();
                let split = 2.0 * g * (n as f64).sqrt();
                prop_assert!((plus - minus - split).abs() <= 1e-9 * (plus.abs() + split));
            }
        }
    }
}
