//! Single-excitation hopping dynamics on a coupling graph.
//!
//! Each polariton species sees the weighted adjacency matrix of the graph as
//! its single-excitation Hamiltonian. Hermitian evolution goes through a full
//! spectral decomposition; lossy or continuously monitored evolution uses
//! sub-stepped dense matrix exponentials of the non-Hermitian generator.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{CouplingGraph, SingleExcitationState, C64, DRIFT_TOL};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `H[a][b] = J_ab` on edges, zero elsewhere.
pub fn hamiltonian_matrix(graph: &CouplingGraph) -> DMatrix<f64> {
    let n = graph.node_count();
    let mut h = DMatrix::zeros(n, n);
    for e in graph.edges() {
        h[(e.a, e.b)] = e.weight;
        h[(e.b, e.a)] = e.weight;
    }
    h
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending,
/// eigenvectors as columns with their first non-negligible entry positive.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn of_graph(graph: &CouplingGraph) -> Result<Self> {
        Self::of_matrix(&hamiltonian_matrix(graph))
    }

    /// Decomposes each connected block of the sparsity pattern on its own, so
    /// amplitudes never leak between blocks that are exactly uncoupled.
    pub fn of_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.ncols() });
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("matrix has non-finite entries".into()));
        }

        let mut values = Vec::with_capacity(n);
        let mut columns: Vec<(f64, Vec<(usize, f64)>)> = Vec::with_capacity(n);
        for block in coupled_blocks(m) {
            let d = block.len();
            let sub = DMatrix::from_fn(d, d, |i, j| m[(block[i], block[j])]);
            let eig = SymmetricEigen::try_new(sub.clone(), f64::EPSILON, 0).ok_or_else(|| {
                Error::Numerical(format!(
                    "symmetric eigensolver did not converge on a {d}x{d} block (Frobenius norm {:.3e})",
                    sub.norm()
                ))
            })?;
            for k in 0..d {
                let col: Vec<(usize, f64)> =
                    (0..d).map(|i| (block[i], eig.eigenvectors[(i, k)])).collect();
                columns.push((eig.eigenvalues[k], col));
            }
        }
        // stable sort keeps block order for exact ties
        columns.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut vectors = DMatrix::zeros(n, n);
        for (k, (value, col)) in columns.into_iter().enumerate() {
            values.push(value);
            let scale = col.iter().map(|(_, x)| x.abs()).fold(0.0, f64::max);
            let sign = col
                .iter()
                .map(|&(row, x)| (row, x))
                .filter(|(_, x)| x.abs() > 1e-12 * scale)
                .min_by_key(|&(row, _)| row)
                .map_or(1.0, |(_, x)| x.signum());
            for (row, x) in col {
                vectors[(row, k)] = sign * x;
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigenvalues are not finite".into()));
        }
        Ok(Self { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.values));
        &self.vectors * d * self.vectors.transpose()
    }

    pub fn to_eigenbasis(&self, amps: &[C64]) -> Vec<C64> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                (0..n).fold(ZERO, |acc, i| acc + amps[i] * self.vectors[(i, k)])
            })
            .collect()
    }

    pub fn from_eigenbasis(&self, coeffs: &[C64]) -> Vec<C64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                (0..n).fold(ZERO, |acc, k| acc + coeffs[k] * self.vectors[(i, k)])
            })
            .collect()
    }

    /// `exp(-i H t) psi`.
    pub fn propagate(&self, amps: &[C64], t: f64) -> Vec<C64> {
        let mut c = self.to_eigenbasis(amps);
        for (ck, &lam) in c.iter_mut().zip(&self.values) {
            *ck *= C64::from_polar(1.0, -lam * t);
        }
        self.from_eigenbasis(&c)
    }

    /// `<to| exp(-i H t) |from>`.
    pub fn amplitude(&self, from: usize, to: usize, t: f64) -> C64 {
        (0..self.dim()).fold(ZERO, |acc, k| {
            acc + C64::from_polar(
                self.vectors[(to, k)] * self.vectors[(from, k)],
                -self.values[k] * t,
            )
        })
    }
}

/// Connected components of the off-diagonal sparsity pattern.
fn coupled_blocks(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut seen = vec![false; n];
    let mut blocks = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut block = vec![start];
        let mut cursor = 0;
        while cursor < block.len() {
            let u = block[cursor];
            cursor += 1;
            for v in 0..n {
                if !seen[v] && (m[(u, v)] != 0.0 || m[(v, u)] != 0.0) {
                    seen[v] = true;
                    block.push(v);
                }
            }
        }
        block.sort_unstable();
        blocks.push(block);
    }
    blocks
}

pub fn spectral_decompose(graph: &CouplingGraph) -> Result<SpectralDecomposition> {
    SpectralDecomposition::of_graph(graph)
}

pub fn transition_amplitude(
    graph: &CouplingGraph,
    from: usize,
    to: usize,
    t: f64,
) -> Result<C64> {
    let n = graph.node_count();
    if from >= n || to >= n {
        return Err(Error::DimensionMismatch { expected: n, got: from.max(to) + 1 });
    }
    Ok(SpectralDecomposition::of_graph(graph)?.amplitude(from, to, t))
}

pub fn evolve(
    state: &SingleExcitationState,
    graph: &CouplingGraph,
    t: f64,
) -> Result<SingleExcitationState> {
    check_len(state.len(), graph)?;
    let decomposition = SpectralDecomposition::of_graph(graph)?;
    Ok(SingleExcitationState::from_raw(decomposition.propagate(state.amplitudes(), t)))
}

fn check_len(len: usize, graph: &CouplingGraph) -> Result<()> {
    if len != graph.node_count() {
        return Err(Error::DimensionMismatch { expected: graph.node_count(), got: len });
    }
    Ok(())
}

/// `f_{1j}(t)` on a uniform open chain from the sine-mode expansion of its
/// spectrum. `to` is the 0-based destination site.
pub fn chain_amplitude_oracle(n: usize, j: f64, to: usize, t: f64) -> C64 {
    let m = (n + 1) as f64;
    let site = (to + 1) as f64;
    (1..=n).fold(ZERO, |acc, k| {
        let q = k as f64 * PI / m;
        acc + C64::from_polar(
            (2.0 / m) * q.sin() * (q * site).sin(),
            -2.0 * j * t * q.cos(),
        )
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArrivalEstimate {
    pub time: f64,
    /// Set when the graph is not a uniform sender-to-receiver chain and the
    /// `N / (2 J_min)` fallback was used.
    pub heuristic: bool,
}

/// Front arrival time `(N - 1) / (2J)` for the maximal group velocity `2J`
/// of a uniform chain. This undershoots the amplitude peak and is meant as a
/// first measurement time, not a prediction of the optimum.
pub fn arrival_time_estimate(graph: &CouplingGraph) -> ArrivalEstimate {
    let n = graph.node_count();
    if n == 1 {
        return ArrivalEstimate { time: 0.0, heuristic: false };
    }
    match graph.as_uniform_chain() {
        Some(j) => ArrivalEstimate { time: (n - 1) as f64 / (2.0 * j), heuristic: false },
        None => {
            let j_min = graph.min_weight().unwrap_or(1.0);
            ArrivalEstimate { time: n as f64 / (2.0 * j_min), heuristic: true }
        }
    }
}

/// Per-site decay rates, entering the generator as `-(i/2) sum_k d_k |k><k|`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayProfile {
    rates: Vec<f64>,
}

impl DecayProfile {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidParameter("decay rates must be finite and >= 0".into()));
        }
        Ok(Self { rates })
    }

    pub fn none(n: usize) -> Self {
        Self { rates: vec![0.0; n] }
    }

    pub fn uniform(n: usize, rate: f64) -> Result<Self> {
        Self::new(vec![rate; n])
    }

    pub fn at_site(n: usize, site: usize, rate: f64) -> Result<Self> {
        if site >= n {
            return Err(Error::DimensionMismatch { expected: n, got: site + 1 });
        }
        let mut rates = vec![0.0; n];
        rates[site] = rate;
        Self::new(rates)
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// Adds another profile site by site.
    pub fn plus(&self, other: &DecayProfile) -> Result<Self> {
        if self.rates.len() != other.rates.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rates.len(),
                got: other.rates.len(),
            });
        }
        Self::new(self.rates.iter().zip(&other.rates).map(|(a, b)| a + b).collect())
    }
}

/// `H - (i/2) diag(d)`.
pub fn effective_hamiltonian(graph: &CouplingGraph, decay: &DecayProfile) -> Result<DMatrix<C64>> {
    check_len(decay.rates().len(), graph)?;
    let h = hamiltonian_matrix(graph);
    Ok(DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| {
        let damping = if i == j { -0.5 * decay.rates()[i] } else { 0.0 };
        C64::new(h[(i, j)], damping)
    }))
}

/// One-step propagator `exp(-i H_eff h)` for a fixed step `h`.
#[derive(Clone, Debug)]
pub struct NonHermitianPropagator {
    step: f64,
    generator: DMatrix<C64>,
    unitary: DMatrix<C64>,
}

impl NonHermitianPropagator {
    pub fn new(graph: &CouplingGraph, decay: &DecayProfile, step: f64) -> Result<Self> {
        let generator = effective_hamiltonian(graph, decay)?;
        Self::from_generator(generator, step)
    }

    fn from_generator(generator: DMatrix<C64>, step: f64) -> Result<Self> {
        if !(step.is_finite() && step >= 0.0) {
            return Err(Error::InvalidParameter(format!("step must be >= 0, got {step}")));
        }
        let unitary = (&generator * C64::new(0.0, -step)).exp();
        if unitary.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("matrix exponential overflowed".into()));
        }
        Ok(Self { step, generator, unitary })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn with_step(&self, step: f64) -> Result<Self> {
        Self::from_generator(self.generator.clone(), step)
    }

    pub fn apply(&self, amps: &[C64]) -> Vec<C64> {
        let n = amps.len();
        (0..n)
            .map(|i| (0..n).fold(ZERO, |acc, j| acc + self.unitary[(i, j)] * amps[j]))
            .collect()
    }

    /// Advances `steps` times, failing if the squared norm ever grows.
    pub fn apply_steps(&self, amps: &[C64], steps: usize) -> Result<Vec<C64>> {
        let mut psi = amps.to_vec();
        let mut norm = norm_sqr(&psi);
        for _ in 0..steps {
            psi = self.apply(&psi);
            let next = norm_sqr(&psi);
            if next > norm + DRIFT_TOL {
                return Err(Error::StepSize(format!(
                    "squared norm grew from {norm} to {next} over a step of {}",
                    self.step
                )));
            }
            norm = next;
        }
        Ok(psi)
    }
}

pub(crate) fn norm_sqr(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

const MAX_HALVINGS: usize = 12;

/// Propagates under `H - (i/2) diag(d)` for total time `t` in steps no
/// longer than `dt`, halving the step until the squared norm is monotone.
pub fn evolve_nonhermitian(
    state: &SingleExcitationState,
    graph: &CouplingGraph,
    decay: &DecayProfile,
    t: f64,
    dt: f64,
) -> Result<SingleExcitationState> {
    check_len(state.len(), graph)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    let mut steps = (t / dt).ceil().max(1.0) as usize;
    let generator = effective_hamiltonian(graph, decay)?;
    let mut last_err = None;
    for _ in 0..=MAX_HALVINGS {
        let propagator = NonHermitianPropagator::from_generator(generator.clone(), t / steps as f64)?;
        match propagator.apply_steps(state.amplitudes(), steps) {
            Ok(psi) => return Ok(SingleExcitationState::from_raw(psi)),
            Err(e) => {
                last_err = Some(e);
                steps *= 2;
            }
        }
    }
    Err(last_err.unwrap_or_else(|| Error::StepSize("no admissible step".into())))
}
