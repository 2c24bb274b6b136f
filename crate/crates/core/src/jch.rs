//! Exact diagonalization of the Jaynes-Cummings-Hubbard Hamiltonian on small
//! arrays, used to check the effective polariton hopping model.
//!
//! Each cavity holds up to `n_max` photons and a two-level atom. Matrices are
//! real and dense; within a fixed excitation sector `m` the constant
//! `omega_d * m` is removed from the diagonal so that resonant runs never
//! carry the optical frequency through time stepping.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::SpectralDecomposition;
use crate::error::{Error, Result};
use crate::model::{build_graph, CouplingGraph, JchParams, PolaritonQubit, C64};

pub const MAX_SITES: usize = 4;
pub const MAX_PHOTONS: usize = 4;
pub const MAX_DIMENSION: usize = 2500;

/// Photon number and atomic excitation of one cavity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteState {
    pub photons: u8,
    pub excited: bool,
}

impl SiteState {
    pub fn excitations(self) -> usize {
        self.photons as usize + self.excited as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FockAtomBasis {
    sites: usize,
    n_max: usize,
    sector: Option<usize>,
    configs: Vec<Vec<SiteState>>,
    index: HashMap<Vec<SiteState>, usize>,
}

fn site_states(n_max: usize) -> Vec<SiteState> {
    (0..=n_max as u8)
        .flat_map(|photons| [false, true].map(|excited| SiteState { photons, excited }))
        .collect()
}

/// Configurations in lexicographic order of `(photons, excited)` per site,
/// site 1 most significant, optionally restricted to `m` total excitations.
pub fn enumerate_basis(sites: usize, n_max: usize, sector: Option<usize>) -> Result<FockAtomBasis> {
    if sites == 0 || n_max == 0 {
        return Err(Error::InvalidParameter("need at least one site and n_max >= 1".into()));
    }
    let full = (2 * (n_max + 1)) as f64;
    let estimate = full.powi(sites as i32);
    if sites > MAX_SITES || n_max > MAX_PHOTONS {
        return Err(Error::Capacity(format!(
            "exact diagonalization is limited to N <= {MAX_SITES}, n_max <= {MAX_PHOTONS}; \
             requested N = {sites}, n_max = {n_max} (full dimension {estimate:.0})"
        )));
    }
    let local = site_states(n_max);
    let mut configs: Vec<Vec<SiteState>> = vec![Vec::new()];
    for _ in 0..sites {
        configs = configs
            .into_iter()
            .flat_map(|prefix| {
                local.iter().map(move |s| {
                    let mut next = prefix.clone();
                    next.push(*s);
                    next
                })
            })
            .filter(|c| sector.is_none_or(|m| c.iter().map(|s| s.excitations()).sum::<usize>() <= m))
            .collect();
    }
    if let Some(m) = sector {
        configs.retain(|c| c.iter().map(|s| s.excitations()).sum::<usize>() == m);
    }
    if configs.len() > MAX_DIMENSION {
        return Err(Error::Capacity(format!(
            "basis dimension {} exceeds the dense limit {MAX_DIMENSION}",
            configs.len()
        )));
    }
    let index = configs.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    Ok(FockAtomBasis { sites, n_max, sector, configs, index })
}

impl FockAtomBasis {
    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn sector(&self) -> Option<usize> {
        self.sector
    }

    pub fn configs(&self) -> &[Vec<SiteState>] {
        &self.configs
    }

    pub fn index_of(&self, config: &[SiteState]) -> Option<usize> {
        self.index.get(config).copied()
    }

    /// Basis vector with site `site` in `local` and every other site empty.
    pub fn single_site(&self, site: usize, local: SiteState) -> Option<usize> {
        let mut config = vec![SiteState { photons: 0, excited: false }; self.sites];
        *config.get_mut(site)? = local;
        self.index_of(&config)
    }
}

pub struct JchMatrix {
    basis: FockAtomBasis,
    params: JchParams,
    graph: CouplingGraph,
    matrix: DMatrix<f64>,
    offset: f64,
    spectrum: OnceLock<std::result::Result<SpectralDecomposition, Error>>,
}

impl std::fmt::Debug for JchMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JchMatrix")
            .field("dim", &self.basis.dim())
            .field("sector", &self.basis.sector)
            .field("offset", &self.offset)
            .finish()
    }
}

/// Assembles `H_free + H_int + H_hop`. Graph edge weights multiply the
/// hopping rate `A` of `params`.
pub fn build_jch(params: &JchParams, graph: &CouplingGraph, basis: &FockAtomBasis) -> Result<JchMatrix> {
    if graph.node_count() != basis.sites() {
        return Err(Error::DimensionMismatch { expected: basis.sites(), got: graph.node_count() });
    }
    if params.n_max() != basis.n_max() {
        return Err(Error::InvalidParameter(format!(
            "basis cutoff {} differs from parameter cutoff {}",
            basis.n_max(),
            params.n_max()
        )));
    }
    let d = basis.dim();
    let offset = basis.sector().map_or(0.0, |m| params.omega_d() * m as f64);
    let mut h = DMatrix::zeros(d, d);
    for (i, config) in basis.configs().iter().enumerate() {
        let photons: usize = config.iter().map(|s| s.photons as usize).sum();
        let atoms = config.iter().filter(|s| s.excited).count();
        h[(i, i)] = match basis.sector() {
            Some(_) => params.delta() * atoms as f64,
            None => params.omega_d() * photons as f64 + params.omega_0() * atoms as f64,
        };
        // |g, n> -> |e, n - 1> and its conjugate
        for (k, s) in config.iter().enumerate() {
            if !s.excited && s.photons > 0 {
                let mut to = config.clone();
                to[k] = SiteState { photons: s.photons - 1, excited: true };
                if let Some(j) = basis.index_of(&to) {
                    let v = params.g() * (s.photons as f64).sqrt();
                    h[(i, j)] += v;
                    h[(j, i)] += v;
                }
            }
        }
        // a_a^dag a_b and a_b^dag a_a on every edge
        for e in graph.edges() {
            for (to_site, from_site) in [(e.a, e.b), (e.b, e.a)] {
                let from = config[from_site];
                let dest = config[to_site];
                if from.photons == 0 || dest.photons as usize >= basis.n_max() {
                    continue;
                }
                let mut to = config.clone();
                to[from_site].photons -= 1;
                to[to_site].photons += 1;
                if let Some(j) = basis.index_of(&to) {
                    let v = params.hopping()
                        * e.weight
                        * (from.photons as f64).sqrt()
                        * (dest.photons as f64 + 1.0).sqrt();
                    h[(j, i)] += v;
                }
            }
        }
    }
    Ok(JchMatrix {
        basis: basis.clone(),
        params: params.clone(),
        graph: graph.clone(),
        matrix: h,
        offset,
        spectrum: OnceLock::new(),
    })
}

impl JchMatrix {
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn basis(&self) -> &FockAtomBasis {
        &self.basis
    }

    pub fn params(&self) -> &JchParams {
        &self.params
    }

    pub fn graph(&self) -> &CouplingGraph {
        &self.graph
    }

    /// Matrix with the sector offset removed.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn spectrum(&self) -> Result<&SpectralDecomposition> {
        self.spectrum
            .get_or_init(|| SpectralDecomposition::of_matrix(&self.matrix))
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Eigenvalues including the offset, ascending.
    pub fn energies(&self) -> Result<Vec<f64>> {
        Ok(self.spectrum()?.eigenvalues().iter().map(|e| e + self.offset).collect())
    }

    /// Probability on configurations that saturate the photon cutoff.
    pub fn boundary_weight(&self, state: &[C64]) -> f64 {
        self.basis
            .configs()
            .iter()
            .zip(state)
            .filter(|(c, _)| c.iter().any(|s| s.photons as usize == self.basis.n_max()))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

/// Spectral propagation in the offset frame; the dropped offset is a global
/// phase.
pub fn exact_evolve(state: &[C64], h: &JchMatrix, t: f64) -> Result<Vec<C64>> {
    if state.len() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: state.len() });
    }
    Ok(h.spectrum()?.propagate(state, t))
}

fn require_resonant(params: &JchParams, what: &str) -> Result<()> {
    if !params.is_resonant() {
        return Err(Error::UnsupportedClosedForm(format!(
            "{what} uses the resonant polariton basis; detuning is {}",
            params.delta()
        )));
    }
    Ok(())
}

fn require_sites(graph: &CouplingGraph, max: usize, what: &str) -> Result<()> {
    if graph.node_count() > max {
        return Err(Error::Capacity(format!(
            "{what} is limited to N <= {max}, got {}",
            graph.node_count()
        )));
    }
    Ok(())
}

/// Single-excitation sector rotated into the polariton basis: index `2k` is
/// `|1+>` on site `k`, index `2k + 1` is `|1->`. At resonance the free and
/// interaction parts are `+g` and `-g` on the diagonal, so the interaction
/// picture is a pair of phases per site.
pub struct PolaritonFrame {
    sites: usize,
    g: f64,
    spectrum: SpectralDecomposition,
    matrix: DMatrix<f64>,
}

impl PolaritonFrame {
    pub fn new(params: &JchParams, graph: &CouplingGraph) -> Result<Self> {
        require_resonant(params, "the polariton frame")?;
        let n = graph.node_count();
        let basis = enumerate_basis(n, params.n_max(), Some(1))?;
        let h = build_jch(params, graph, &basis)?;
        let d = basis.dim();
        let mut u = DMatrix::zeros(d, 2 * n);
        for k in 0..n {
            let photon = basis
                .single_site(k, SiteState { photons: 1, excited: false })
                .ok_or_else(|| Error::Numerical("missing |g,1> state".into()))?;
            let atom = basis
                .single_site(k, SiteState { photons: 0, excited: true })
                .ok_or_else(|| Error::Numerical("missing |e,0> state".into()))?;
            u[(photon, 2 * k)] = FRAC_1_SQRT_2;
            u[(atom, 2 * k)] = FRAC_1_SQRT_2;
            u[(photon, 2 * k + 1)] = FRAC_1_SQRT_2;
            u[(atom, 2 * k + 1)] = -FRAC_1_SQRT_2;
        }
        let mut matrix = u.transpose() * h.matrix() * &u;
        // entries that vanish analytically come out at rounding level
        let scale = matrix.amax();
        matrix.iter_mut().filter(|x| x.abs() < 1e-15 * scale).for_each(|x| *x = 0.0);
        let spectrum = SpectralDecomposition::of_matrix(&matrix)?;
        Ok(Self { sites: n, g: params.g(), spectrum, matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    /// Interaction-picture state at time `t`.
    pub fn evolve_interaction(&self, initial: &[C64], t: f64) -> Vec<C64> {
        let mut psi = self.spectrum.propagate(initial, t);
        let (plus, minus) = (C64::from_polar(1.0, self.g * t), C64::from_polar(1.0, -self.g * t));
        for k in 0..self.sites {
            psi[2 * k] *= plus;
            psi[2 * k + 1] *= minus;
        }
        psi
    }

    pub fn localized(&self, site: usize, plus: C64, minus: C64) -> Vec<C64> {
        let mut psi = vec![C64::new(0.0, 0.0); 2 * self.sites];
        psi[2 * site] = plus;
        psi[2 * site + 1] = minus;
        psi
    }
}

fn sample_times(t_max: f64, g: f64, hopping: f64) -> Vec<f64> {
    if t_max <= 0.0 {
        return vec![0.0];
    }
    // resolve both the 2g interconversion beat and the hopping
    let fastest = (2.0 * g).max(hopping).max(1e-12);
    let step = (PI / (8.0 * fastest)).min(t_max / 200.0);
    let count = (t_max / step).ceil() as usize;
    (0..=count).map(|k| (k as f64 * step).min(t_max)).collect()
}

/// Largest population of the `+` manifold reached from `|1->` on the
/// sender within `t_max`.
pub fn interconversion_leakage(params: &JchParams, graph: &CouplingGraph, t_max: f64) -> Result<f64> {
    require_sites(graph, 3, "interconversion leakage")?;
    let frame = PolaritonFrame::new(params, graph)?;
    let start = frame.localized(graph.sender(), C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let d = frame.spectrum();
    let mut worst: f64 = 0.0;
    for t in sample_times(t_max, params.g(), params.hopping()) {
        let psi = d.propagate(&start, t);
        let plus: f64 = (0..graph.node_count()).map(|k| psi[2 * k].norm_sqr()).sum();
        worst = worst.max(plus);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub j_plus: f64,
    pub j_minus: f64,
    /// Mean of the two rates divided by `A`.
    pub ratio: f64,
    /// Half the splitting of the corresponding eigenvalue pair.
    pub splitting_plus: f64,
    pub splitting_minus: f64,
    pub crossings: usize,
}

impl Calibration {
    pub fn j_eff(&self) -> f64 {
        0.5 * (self.j_plus + self.j_minus)
    }

    pub fn species_asymmetry(&self) -> f64 {
        (self.j_plus - self.j_minus).abs() / self.j_plus
    }
}

/// Effective hopping of each polariton species on two coupled cavities,
/// fitted from the times at which the population of the second site crosses
/// one half.
pub fn calibrate_j_eff(params: &JchParams) -> Result<Calibration> {
    require_resonant(params, "calibration")?;
    let a = params.hopping();
    if a <= 0.0 {
        return Err(Error::Calibration("no hopping, population never oscillates".into()));
    }
    let graph = crate::model::build_chain(2, 1.0)?;
    let frame = PolaritonFrame::new(params, &graph)?;
    let (j_plus, crossings_plus) = fit_species(&frame, 0, a)?;
    let (j_minus, crossings_minus) = fit_species(&frame, 1, a)?;
    let values = frame.spectrum().eigenvalues();
    // the + pair is on top, the - pair at the bottom
    let splitting_minus = 0.5 * (values[1] - values[0]);
    let splitting_plus = 0.5 * (values[3] - values[2]);
    Ok(Calibration {
        j_plus,
        j_minus,
        ratio: 0.5 * (j_plus + j_minus) / a,
        splitting_plus,
        splitting_minus,
        crossings: crossings_plus.min(crossings_minus),
    })
}

fn fit_species(frame: &PolaritonFrame, species: usize, a: f64) -> Result<(f64, usize)> {
    let mut start = vec![C64::new(0.0, 0.0); 4];
    start[species] = C64::new(1.0, 0.0);
    let d = frame.spectrum();
    let target = 2 + species;
    let excess = |t: f64| d.propagate(&start, t)[target].norm_sqr() - 0.5;

    let t_max = 24.0 / a;
    let step = 0.02 / a;
    let mut crossings = Vec::new();
    let mut prev_t = 0.0;
    let mut prev = excess(0.0);
    let mut t = step;
    while t <= t_max {
        let cur = excess(t);
        if prev.signum() != cur.signum() && cur != 0.0 {
            let (mut lo, mut hi, lo_sign) = (prev_t, t, prev.signum());
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if excess(mid).signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            crossings.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev = cur;
        t += step;
    }
    if crossings.len() < 3 {
        return Err(Error::Calibration(format!(
            "only {} half-population crossings within {t_max}; signal is not oscillatory",
            crossings.len()
        )));
    }
    // crossings of sin^2(J t) = 1/2 sit at J t = pi/4 + k pi/2
    let k: Vec<f64> = (0..crossings.len()).map(|i| i as f64).collect();
    let slope = crate::analysis::least_squares_line(&k, &crossings)
        .map_err(|e| Error::Calibration(e.to_string()))?
        .slope;
    if slope <= 0.0 {
        return Err(Error::Calibration("crossing times are not increasing".into()));
    }
    Ok((PI / (2.0 * slope), crossings.len()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockadeReport {
    pub max_double: f64,
    /// Same quantity with the photon cutoff raised by one.
    pub max_double_refined: f64,
    pub relative_shift: f64,
    pub warnings: Vec<String>,
}

fn is_double(config: &[SiteState]) -> bool {
    config.iter().any(|s| s.photons >= 2 || s.excitations() >= 2)
}

fn max_double_occupancy(
    params: &JchParams,
    graph: &CouplingGraph,
    sites: (usize, usize),
    t_max: f64,
) -> Result<(f64, f64)> {
    let basis = enumerate_basis(graph.node_count(), params.n_max(), Some(2))?;
    let h = build_jch(params, graph, &basis)?;
    // |1->_a |1->_b = (|g,1> - |e,0>)_a (|g,1> - |e,0>)_b / 2
    let photon = SiteState { photons: 1, excited: false };
    let atom = SiteState { photons: 0, excited: true };
    let mut psi = vec![C64::new(0.0, 0.0); basis.dim()];
    for (sa, ca) in [(photon, 1.0), (atom, -1.0)] {
        for (sb, cb) in [(photon, 1.0), (atom, -1.0)] {
            let mut config = vec![SiteState { photons: 0, excited: false }; graph.node_count()];
            config[sites.0] = sa;
            config[sites.1] = sb;
            let i = basis
                .index_of(&config)
                .ok_or_else(|| Error::Numerical("two-polariton state outside the basis".into()))?;
            psi[i] = C64::new(0.5 * ca * cb, 0.0);
        }
    }
    let doubles: Vec<usize> = (0..basis.dim()).filter(|&i| is_double(&basis.configs()[i])).collect();
    let mut worst: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    for t in sample_times(t_max, params.g(), params.hopping()) {
        let out = exact_evolve(&psi, &h, t)?;
        worst = worst.max(doubles.iter().map(|&i| out[i].norm_sqr()).sum());
        boundary = boundary.max(h.boundary_weight(&out));
    }
    Ok((worst, boundary))
}

/// Largest probability of a doubly occupied cavity starting from `|1->` on
/// two distinct sites in the two-excitation sector.
pub fn blockade_check(
    params: &JchParams,
    graph: &CouplingGraph,
    sites: (usize, usize),
    t_max: f64,
) -> Result<BlockadeReport> {
    require_sites(graph, MAX_SITES, "the blockade check")?;
    if params.n_max() < 2 {
        return Err(Error::InvalidParameter("the blockade check needs n_max >= 2".into()));
    }
    let n = graph.node_count();
    if sites.0 == sites.1 || sites.0 >= n || sites.1 >= n {
        return Err(Error::InvalidParameter(format!(
            "initial sites must be distinct and below {n}, got {sites:?}"
        )));
    }
    let (max_double, boundary) = max_double_occupancy(params, graph, sites, t_max)?;
    let refined_params = params.with_n_max(params.n_max() + 1)?;
    let (max_double_refined, _) = max_double_occupancy(&refined_params, graph, sites, t_max)?;
    let relative_shift = if max_double_refined > 0.0 {
        (max_double - max_double_refined).abs() / max_double_refined
    } else {
        (max_double - max_double_refined).abs()
    };
    let mut warnings = Vec::new();
    if relative_shift > 0.1 {
        warnings.push(format!(
            "cutoff-sensitive: result shifts by {:.1}% from n_max = {} to {}",
            100.0 * relative_shift,
            params.n_max(),
            params.n_max() + 1
        ));
    }
    if boundary > 1e-6 {
        warnings.push(format!("truncation: up to {boundary:.3e} of the state sits at the photon cutoff"));
    }
    Ok(BlockadeReport { max_double, max_double_refined, relative_shift, warnings })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub worst: f64,
    pub worst_time: f64,
    pub j_eff: f64,
    pub series: Vec<(f64, f64)>,
}

/// Worst overlap between the exact interaction-picture state and the
/// effective two-species hopping model with the calibrated rate.
pub fn effective_vs_exact_overlap(
    params: &JchParams,
    graph: &CouplingGraph,
    qubit: &PolaritonQubit,
    t_max: f64,
) -> Result<OverlapReport> {
    require_sites(graph, 3, "the overlap check")?;
    let calibration = calibrate_j_eff(params)?;
    let j_eff = calibration.j_eff();
    let frame = PolaritonFrame::new(params, graph)?;
    let s = graph.sender();
    let start = frame.localized(s, qubit.alpha, qubit.beta);
    let scaled: Vec<(usize, usize, f64)> =
        graph.edges().iter().map(|e| (e.a, e.b, e.weight * j_eff)).collect();
    let effective = SpectralDecomposition::of_graph(&build_graph(
        graph.node_count(),
        &scaled,
        s,
        graph.receiver(),
    )?)?;

    let mut report = OverlapReport { worst: 1.0, worst_time: 0.0, j_eff, series: Vec::new() };
    for t in sample_times(t_max, params.g(), params.hopping()) {
        let exact = frame.evolve_interaction(&start, t);
        let overlap = (0..graph.node_count())
            .fold(C64::new(0.0, 0.0), |acc, k| {
                let f = effective.amplitude(s, k, t);
                acc + (qubit.alpha * f).conj() * exact[2 * k] + (qubit.beta * f).conj() * exact[2 * k + 1]
            })
            .norm_sqr();
        report.series.push((t, overlap));
        if overlap < report.worst {
            report.worst = overlap;
            report.worst_time = t;
        }
    }
    Ok(report)
}
