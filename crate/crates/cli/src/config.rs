//! Run configuration. TOML by default, JSON when the file ends in `.json`.
//! Every section rejects unknown keys.

use std::fs;
use std::path::{Path, PathBuf};

use polariton_transfer::analysis::SchedulePolicy;
use polariton_transfer::model::GraphFile;
use polariton_transfer::{build_chain, CouplingGraph, Execution, JchParams, MeasurementSchedule, PolaritonQubit, C64};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub graph: Option<GraphSpec>,
    pub qubit: Option<QubitSpec>,
    pub schedule: Option<MeasurementSchedule>,
    #[serde(default)]
    pub protocol: ProtocolSpec,
    pub units: Option<Units>,
    pub sweep: Option<SweepSpec>,
    pub validate: Option<ValidateSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(skip)]
    base: PathBuf,
}

/// Exactly one of `chain`, `nodes` or `file`. Node labels are 1-based.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub chain: Option<usize>,
    #[serde(default = "one")]
    pub hopping: f64,
    pub nodes: Option<usize>,
    #[serde(default)]
    pub edges: Vec<(usize, usize, f64)>,
    pub sender: Option<usize>,
    pub receiver: Option<usize>,
    pub file: Option<PathBuf>,
}

/// Amplitudes of `|1+>` and `|1->` as `[re, im]`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitSpec {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    #[serde(default = "default_target")]
    pub target: f64,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        ProtocolSpec { target: default_target(), max_rounds: default_rounds() }
    }
}

/// Physical rates in units of the effective hopping `J`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    pub g: f64,
    pub omega_d: Option<f64>,
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub gamma: f64,
    /// Bare photon hopping `A`.
    #[serde(default = "default_photon_hopping")]
    pub photon_hopping: f64,
    #[serde(default = "one_usize")]
    pub n_max: usize,
}

impl Units {
    pub fn params(&self) -> Result<JchParams, CliError> {
        let omega_d = self.omega_d.unwrap_or(1e4 * self.g);
        Ok(JchParams::new(
            omega_d,
            omega_d + self.delta,
            self.g,
            self.photon_hopping,
            self.kappa,
            self.gamma,
            self.n_max,
        )?)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Name(String),
    Full(SchedulePolicy),
}

impl PolicySpec {
    pub fn resolve(&self) -> Result<SchedulePolicy, CliError> {
        match self {
            PolicySpec::Full(p) => Ok(*p),
            PolicySpec::Name(n) if n == "regular" => Ok(SchedulePolicy::regular()),
            PolicySpec::Name(n) if n == "optimized" => Ok(SchedulePolicy::optimized()),
            PolicySpec::Name(n) => Err(CliError::config(format!("unknown policy '{n}' (regular, optimized)"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default = "default_fs")]
    pub f: Vec<f64>,
    #[serde(default = "default_policies")]
    pub policies: Vec<PolicySpec>,
    #[serde(default = "one")]
    pub hopping: f64,
    #[serde(default)]
    pub execution: Execution,
    /// Policy whose rows are fitted; the first one by default.
    pub fit_policy: Option<String>,
}

/// Exact-model checks. `t_max` is in units of `1 / A`; `g_scan` lists extra
/// `g / A` values for the overlap curve.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSpec {
    #[serde(default = "default_validate_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "one")]
    pub hopping: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "two_usize")]
    pub n_max: usize,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default)]
    pub g_scan: Vec<f64>,
}

impl Default for ValidateSpec {
    fn default() -> Self {
        ValidateSpec {
            sizes: default_validate_sizes(),
            g: default_g(),
            hopping: 1.0,
            delta: 0.0,
            n_max: 2,
            t_max: default_t_max(),
            g_scan: Vec::new(),
        }
    }
}

impl ValidateSpec {
    pub fn params(&self, g: f64, n_max: usize) -> polariton_transfer::Result<JchParams> {
        let omega_d = 1e4 * g;
        JchParams::new(omega_d, omega_d + self.delta, g, self.hopping, 0.0, 0.0, n_max)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: default_dir() }
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn two_usize() -> usize {
    2
}
fn default_target() -> f64 {
    0.99
}
fn default_rounds() -> usize {
    4000
}
fn default_photon_hopping() -> f64 {
    2.0
}
fn default_fs() -> Vec<f64> {
    vec![0.99]
}
fn default_policies() -> Vec<PolicySpec> {
    vec![PolicySpec::Name("regular".into())]
}
fn default_validate_sizes() -> Vec<usize> {
    vec![2, 3]
}
fn default_g() -> f64 {
    100.0
}
fn default_t_max() -> f64 {
    10.0
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T, CliError> {
    let json = path.extension().is_some_and(|e| e == "json");
    let parsed = if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::config(format!("{}: {}", path.display(), e.replace('\n', " "))))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let mut config: Config = parse(path, &read(path)?)?;
        config.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.check()?;
        Ok(config)
    }

    /// Validation that does not depend on the subcommand.
    fn check(&self) -> Result<(), CliError> {
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        if let Some(q) = &self.qubit {
            q.qubit()?;
        }
        if let Some(u) = &self.units {
            u.params()?;
        }
        if let Some(s) = &self.sweep {
            for p in &s.policies {
                p.resolve()?;
            }
        }
        let t = self.protocol.target;
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::config(format!("protocol.target must lie in (0, 1), got {t}")));
        }
        Ok(())
    }

    pub fn graph(&self) -> Result<CouplingGraph, CliError> {
        let spec = self.graph.as_ref().ok_or_else(|| CliError::config("missing [graph] section"))?;
        let given = [spec.chain.is_some(), spec.nodes.is_some(), spec.file.is_some()];
        if given.iter().filter(|&&b| b).count() != 1 {
            return Err(CliError::config("[graph] needs exactly one of chain, nodes or file"));
        }
        if let Some(n) = spec.chain {
            return Ok(build_chain(n, spec.hopping)?);
        }
        let file = match &spec.file {
            Some(f) => {
                let path = self.base.join(f);
                parse::<GraphFile>(&path, &read(&path)?)?
            }
            None => GraphFile {
                nodes: spec.nodes.unwrap_or_default(),
                edges: spec.edges.clone(),
                sender: spec.sender.ok_or_else(|| CliError::config("[graph] needs sender"))?,
                receiver: spec.receiver.ok_or_else(|| CliError::config("[graph] needs receiver"))?,
            },
        };
        Ok(CouplingGraph::try_from(file)?)
    }

    pub fn qubit(&self) -> Result<PolaritonQubit, CliError> {
        self.qubit.as_ref().map_or(Ok(PolaritonQubit::plus()), QubitSpec::qubit)
    }

    pub fn validate_spec(&self) -> ValidateSpec {
        self.validate.clone().unwrap_or_default()
    }
}

impl QubitSpec {
    pub fn qubit(&self) -> Result<PolaritonQubit, CliError> {
        Ok(PolaritonQubit::new(
            C64::new(self.alpha[0], self.alpha[1]),
            C64::new(self.beta[0], self.beta[1]),
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_toml(text: &str) -> Result<Config, CliError> {
        let config: Config = parse(Path::new("test.toml"), text)?;
        config.check()?;
        Ok(config)
    }

    #[test]
    fn defaults() {
        let c = from_toml("[graph]\nchain = 4\n").unwrap();
        assert_eq!(c.protocol.target, 0.99);
        assert_eq!(c.graph().unwrap().node_count(), 4);
        assert_eq!(c.qubit().unwrap(), PolaritonQubit::plus());
        assert_eq!(c.validate_spec().sizes, vec![2, 3]);
    }

    #[test]
    fn graph_needs_one_source() {
        let c = from_toml("[graph]\nchain = 4\nnodes = 4\n").unwrap();
        assert_eq!(c.graph().unwrap_err().kind, "config");
        let c = from_toml("[graph]\nnodes = 3\nedges = [[1, 2, 1.0], [2, 3, 1.0]]\nsender = 1\n").unwrap();
        assert!(c.graph().is_err());
    }

    #[test]
    fn inline_labels_are_one_based() {
        let c = from_toml("[graph]\nnodes = 3\nedges = [[1, 2, 1.0], [2, 3, 0.5]]\nsender = 3\nreceiver = 1\n").unwrap();
        let g = c.graph().unwrap();
        assert_eq!((g.sender(), g.receiver()), (2, 0));
        let c = from_toml("[graph]\nnodes = 3\nedges = [[0, 1, 1.0]]\nsender = 1\nreceiver = 2\n").unwrap();
        assert_eq!(c.graph().unwrap_err().kind, "invalid-topology");
    }

    #[test]
    fn policies_by_name_or_table() {
        let c = from_toml(
            "[sweep]\nsizes = [4]\npolicies = [\"optimized\", { kind = \"regular\", tau_scale = 0.5, max_rounds = 10 }]\n",
        )
        .unwrap();
        let p: Vec<_> = c.sweep.unwrap().policies.iter().map(|p| p.resolve().unwrap()).collect();
        assert_eq!(p[0], SchedulePolicy::optimized());
        assert_eq!(p[1], SchedulePolicy::Regular { tau_scale: 0.5, max_rounds: 10 });
        assert!(from_toml("[sweep]\npolicies = [\"fastest\"]\n").is_err());
    }

    #[test]
    fn strict_schema() {
        assert!(from_toml("[units]\ng = 100.0\nkappa = 0.1\nomega = 3.0\n").is_err());
        assert!(from_toml("[schedule]\nkind = \"regular\"\nt0 = 1.0\ntau = -1.0\nmax_rounds = 3\n").is_err());
        assert!(from_toml("[units]\ng = -1.0\n").is_err());
    }
}
