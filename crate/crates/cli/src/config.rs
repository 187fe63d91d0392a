use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use unified_prox::linalg::Mat;
use unified_prox::problem::{GeneratorParams, ProblemSource, Spectrum};
use unified_prox::splitting::DEFAULT_TRIALS;
use unified_prox::{GossipMatrix, Graph, NonsmoothTerm, Preset, ProblemDocument, WeightTriple};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    /// Edge list, resolved relative to the config file.
    File { path: PathBuf },
    Ring { m: usize },
    Path { m: usize },
    Complete { m: usize },
    RandomGeometric {
        m: usize,
        radius: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

impl GraphSpec {
    pub fn build(&self, base: &Path, seed: Option<u64>) -> Result<Graph, CliError> {
        let g = match self {
            GraphSpec::File { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::Io(format!("{}: {e}", full.display())))?;
                Graph::parse_edge_list(&text)?
            }
            GraphSpec::Ring { m } => Graph::ring(*m)?,
            GraphSpec::Path { m } => Graph::path(*m)?,
            GraphSpec::Complete { m } => Graph::complete(*m)?,
            GraphSpec::RandomGeometric { m, radius, seed: own } => {
                Graph::random_geometric(*m, *radius, seed.or(*own).unwrap_or(0))?
            }
        };
        Ok(g)
    }

    pub fn label(&self) -> String {
        match self {
            GraphSpec::File { path } => format!("file:{}", path.display()),
            GraphSpec::Ring { m } => format!("ring{m}"),
            GraphSpec::Path { m } => format!("path{m}"),
            GraphSpec::Complete { m } => format!("complete{m}"),
            GraphSpec::RandomGeometric { m, radius, .. } => format!("geometric{m}(r={radius})"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    #[default]
    Metropolis,
    /// `(I + W)/2`.
    Lazy,
}

impl Mixing {
    pub fn gossip(self, g: Graph) -> GossipMatrix {
        let w = GossipMatrix::metropolis(Arc::new(g));
        match self {
            Mixing::Metropolis => w,
            Mixing::Lazy => w.lazy(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaPolicy {
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Gamma {
    Policy(GammaPolicy),
    Value(f64),
}

impl Default for Gamma {
    fn default() -> Self {
        Gamma::Policy(GammaPolicy::Star)
    }
}

impl Gamma {
    pub fn explicit(self) -> Option<f64> {
        match self {
            Gamma::Policy(_) => None,
            Gamma::Value(v) => Some(v),
        }
    }
}

/// Hand-written weight matrices, row-major.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitTriple {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<Vec<f64>>,
    #[serde(default = "custom_label")]
    pub label: String,
}

fn custom_label() -> String {
    "custom".into()
}

fn to_mat(rows: &[Vec<f64>], m: usize, name: &str) -> Result<Mat, CliError> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::Config(format!("matrix {name} must be {m}x{m}")));
    }
    Ok(Mat::from_fn(m, m, |i, j| rows[i][j]))
}

impl ExplicitTriple {
    pub fn build(&self, m: usize) -> Result<WeightTriple, CliError> {
        Ok(WeightTriple::new(
            to_mat(&self.a, m, "a")?,
            to_mat(&self.b, m, "b")?,
            to_mat(&self.c, m, "c")?,
            to_mat(&self.d, m, "d")?,
            self.label.clone(),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: GraphSpec,
    #[serde(default)]
    pub mixing: Mixing,
    pub problem: ProblemDocument,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub triple: Option<ExplicitTriple>,
    #[serde(default)]
    pub gamma: Gamma,
    pub iters: usize,
    /// Replaces the generator and graph seeds when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub kkt_tol: Option<f64>,
}

impl RunConfig {
    pub fn problem_document(&self, seed: Option<u64>) -> ProblemDocument {
        let mut doc = self.problem.clone();
        if let (Some(s), ProblemSource::Generated(params)) = (seed, &mut doc.source) {
            params.seed = s;
        }
        doc
    }

    pub fn weights(&self, gossip: &GossipMatrix) -> Result<WeightTriple, CliError> {
        match (&self.preset, &self.triple) {
            (Some(p), None) => Ok(p.build(gossip)?),
            (None, Some(t)) => t.build(gossip.m()),
            _ => Err(CliError::Config("exactly one of `preset` and `triple` is required".into())),
        }
    }
}

fn default_verify_graphs() -> Vec<GraphSpec> {
    vec![GraphSpec::Ring { m: 3 }, GraphSpec::Ring { m: 10 }]
}

fn lazy() -> Mixing {
    Mixing::Lazy
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn default_d() -> usize {
    3
}

/// Problem shape shared by every graph of a verifier sweep; `m` comes from
/// the graph.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemTemplate {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(rename = "L", default = "two")]
    pub l: f64,
    #[serde(default)]
    pub spectrum: Spectrum,
    #[serde(default = "zero_term")]
    pub nonsmooth: NonsmoothTerm,
}

fn zero_term() -> NonsmoothTerm {
    NonsmoothTerm::Zero
}

impl Default for ProblemTemplate {
    fn default() -> Self {
        ProblemTemplate {
            d: default_d(),
            mu: 1.0,
            l: 2.0,
            spectrum: Spectrum::default(),
            nonsmooth: NonsmoothTerm::Zero,
        }
    }
}

impl ProblemTemplate {
    pub fn document(&self, m: usize, seed: u64) -> ProblemDocument {
        ProblemDocument {
            m,
            d: self.d,
            nonsmooth: self.nonsmooth.clone(),
            source: ProblemSource::Generated(GeneratorParams {
                seed,
                mu: self.mu,
                l: self.l,
                spectrum: self.spectrum,
                b_scale: 1.0,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_verify_graphs")]
    pub graphs: Vec<GraphSpec>,
    /// Lazy by default so that every preset of the table applies.
    #[serde(default = "lazy")]
    pub mixing: Mixing,
    #[serde(default)]
    pub problem: ProblemTemplate,
    /// Every preset of the table when absent.
    #[serde(default)]
    pub presets: Option<Vec<Preset>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Multiplies the predicted rate before the chain check.
    #[serde(default = "one")]
    pub lambda_scale: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            graphs: default_verify_graphs(),
            mixing: Mixing::Lazy,
            problem: ProblemTemplate::default(),
            presets: None,
            trials: DEFAULT_TRIALS,
            seed: 0,
            lambda_scale: 1.0,
        }
    }
}

fn default_e2e_graph() -> GraphSpec {
    GraphSpec::Ring { m: 20 }
}

fn default_e2e_iters() -> usize {
    300
}

fn default_e2e_d() -> usize {
    5
}

/// Settings for the distributed runs behind the rate-match check.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndToEnd {
    #[serde(default = "default_e2e_graph")]
    pub graph: GraphSpec,
    #[serde(default)]
    pub mixing: Mixing,
    #[serde(default = "default_e2e_d")]
    pub d: usize,
    #[serde(default = "default_e2e_iters")]
    pub iters: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    3
}

impl Default for EndToEnd {
    fn default() -> Self {
        EndToEnd {
            graph: default_e2e_graph(),
            mixing: Mixing::default(),
            d: default_e2e_d(),
            iters: default_e2e_iters(),
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffConfig {
    /// The default grid `{0.05, …, 0.95}` when absent.
    #[serde(default)]
    pub rho_com: Option<Vec<f64>>,
    #[serde(default)]
    pub rho_opt: Option<Vec<f64>>,
    #[serde(default)]
    pub end_to_end: Option<EndToEnd>,
    #[serde(default)]
    pub seed: u64,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_accepts_policy_or_number() {
        let g: Gamma = serde_json::from_str("\"star\"").unwrap();
        assert_eq!(g.explicit(), None);
        let g: Gamma = serde_json::from_str("0.25").unwrap();
        assert_eq!(g.explicit(), Some(0.25));
        assert!(serde_json::from_str::<Gamma>("\"fast\"").is_err());
    }

    #[test]
    fn run_config_parses() {
        let text = r#"{
            "graph": {"kind": "ring", "m": 6},
            "problem": {"m": 6, "d": 2, "generated": {"seed": 1, "mu": 1, "L": 4}},
            "preset": {"name": "nids"},
            "iters": 10
        }"#;
        let cfg: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.preset, Some(Preset::Nids));
        assert_eq!(cfg.gamma, Gamma::Policy(GammaPolicy::Star));
        assert_eq!(cfg.mixing, Mixing::Metropolis);
        let doc = cfg.problem_document(Some(9));
        match doc.source {
            ProblemSource::Generated(p) => assert_eq!(p.seed, 9),
            _ => panic!("expected generated"),
        }
    }

    #[test]
    fn seed_overrides_geometric_graph() {
        let spec = GraphSpec::RandomGeometric { m: 8, radius: 0.7, seed: Some(1) };
        let a = spec.build(Path::new("."), None).unwrap();
        let b = spec.build(Path::new("."), Some(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn verify_defaults() {
        let cfg: VerifyConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, VerifyConfig::default());
        assert_eq!(cfg.trials, DEFAULT_TRIALS);
    }
}
