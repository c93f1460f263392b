use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rieszlab::convergence::{
    ConvergenceKind, ConvergenceStructure, LimsupKind, LimsupOperator,
};
use rieszlab::lattice::{LatticeElement, OSequence};
use rieszlab::quadrature::QuadratureRule;

use crate::error::{CliError, CliResult};

/// One experiment run, as read from a TOML file. Unknown keys are
/// rejected at every level.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registry id, see `rieszlab list-fixtures` and [`crate::experiments::REGISTRY`].
    pub experiment: String,
    /// Optional module target; must match the experiment's module.
    #[serde(default)]
    pub module: Option<String>,
    /// Subset of the experiment's fixtures; empty means all of them.
    #[serde(default)]
    pub fixtures: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub stochastic: StochasticConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// `ordinary`, `order`, `cesaro`, `almost` or `density`.
    pub kind: String,
    pub tol: Option<f64>,
    /// Exceptional density for `density`.
    pub eta: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            kind: "ordinary".into(),
            tol: None,
            eta: 0.01,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    /// Largest `n`; each experiment has its own default.
    pub horizon: Option<usize>,
    /// Tail radii; for Mellin kernels these are ratios `δ > 1`.
    pub deltas: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// `gauss-legendre` (16-point panels) or `midpoint`.
    pub rule: String,
    /// Nodes per integration segment.
    pub resolution: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rule: "gauss-legendre".into(),
            resolution: 64,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StochasticConfig {
    pub paths: usize,
    pub steps: usize,
    pub t_end: f64,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            steps: 512,
            t_end: 1.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// File stem; defaults to the experiment id.
    pub name: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            name: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    pub horizon: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.resolution {
            self.quadrature.resolution = r;
        }
        if let Some(h) = o.horizon {
            self.kernel.horizon = Some(h);
        }
        if let Some(d) = &o.out_dir {
            self.output.dir = d.clone();
        }
        self.validate()
    }

    /// Range and enum checks that the TOML schema cannot express.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |path: &str, msg: String| Err(CliError::Config(format!("{path}: {msg}")));
        if !matches!(self.convergence.kind.as_str(), "ordinary" | "order" | "cesaro" | "almost" | "density") {
            return bad(
                "convergence.kind",
                format!("unknown structure {:?}, expected ordinary, order, cesaro, almost or density", self.convergence.kind),
            );
        }
        if let Some(t) = self.convergence.tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad("convergence.tol", format!("must be positive, got {t}"));
            }
        }
        if !(self.convergence.eta > 0.0 && self.convergence.eta < 0.5) {
            return bad("convergence.eta", format!("must lie in (0, 1/2), got {}", self.convergence.eta));
        }
        if self.kernel.horizon == Some(0) {
            return bad("kernel.horizon", "must be at least 1".into());
        }
        if let Some(d) = self.kernel.deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return bad("kernel.deltas", format!("radii must be positive, got {d}"));
        }
        if !matches!(self.quadrature.rule.as_str(), "gauss-legendre" | "midpoint") {
            return bad("quadrature.rule", format!("unknown rule {:?}", self.quadrature.rule));
        }
        let min = if self.quadrature.rule == "midpoint" { 2 } else { 16 };
        if self.quadrature.resolution < min {
            return bad("quadrature.resolution", format!("must be at least {min}, got {}", self.quadrature.resolution));
        }
        if self.stochastic.paths < 2 || self.stochastic.steps == 0 || !(self.stochastic.t_end > 0.0) {
            return bad("stochastic", "needs paths ≥ 2, steps ≥ 1 and t_end > 0".into());
        }
        if let Some(n) = &self.output.name {
            if n.is_empty() || n.contains(['/', '\\']) {
                return bad("output.name", format!("{n:?} is not a plain file stem"));
            }
        }
        Ok(())
    }

    pub fn rule(&self) -> QuadratureRule {
        let r = self.quadrature.resolution;
        match self.quadrature.rule.as_str() {
            "midpoint" => QuadratureRule::Midpoint { nodes: r },
            _ => QuadratureRule::GaussLegendre { panels: (r / 16).max(1), order: 16 },
        }
    }

    pub fn rule_label(&self) -> String {
        match self.rule() {
            QuadratureRule::Midpoint { nodes } => format!("midpoint, {nodes} nodes"),
            QuadratureRule::GaussLegendre { panels, order } => format!("gauss-legendre, {panels}×{order} nodes"),
        }
    }

    pub fn tol(&self, default: f64) -> f64 {
        self.convergence.tol.unwrap_or(default)
    }

    /// The configured structure with its companion limsup, for sequences
    /// with values in `ℝ^dim`. The order regulator is `e/l` cut at
    /// `l = ⌈1/tol⌉`, so its last term plays the part of the tolerance.
    pub fn structure(&self, default_tol: f64, dim: usize) -> (ConvergenceStructure, LimsupOperator) {
        let tol = self.tol(default_tol);
        let eta = self.convergence.eta;
        match self.convergence.kind.as_str() {
            "order" => (
                ConvergenceStructure::new(
                    ConvergenceKind::Order {
                        regulator: OSequence::harmonic(LatticeElement::ones(dim), (1.0 / tol).ceil() as usize),
                    },
                    tol,
                ),
                LimsupOperator::order(),
            ),
            "cesaro" => (ConvergenceStructure::cesaro(tol), LimsupOperator::new(LimsupKind::Cesaro)),
            "almost" => (
                ConvergenceStructure::almost(tol),
                LimsupOperator::new(LimsupKind::Almost { offsets: None }),
            ),
            "density" => (ConvergenceStructure::density(eta, tol), LimsupOperator::density(eta)),
            _ => (ConvergenceStructure::ordinary(tol), LimsupOperator::order()),
        }
    }

    pub fn stem(&self) -> &str {
        self.output.name.as_deref().unwrap_or(&self.experiment)
    }
}
