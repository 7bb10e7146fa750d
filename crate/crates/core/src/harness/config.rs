use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bsde::{Driver, DriverKind, TerminalCondition, TerminalKind};
use crate::error::{Error, Result};
use crate::regression::Basis;
use crate::sublinear::{min_eigenvalue, Diffusion, Drift, GeneratorSet, LinearGenerator};
use crate::value::ParabolicProblem;

/// One constant or affine generator: `a`, drift `b + b_linear x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub b_linear: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    #[serde(default)]
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdSpec {
    /// Nodes per dimension; by default `dx` is about 0.05 in 1D, 0.2 in 2D.
    #[serde(default)]
    pub nodes: Option<usize>,
    /// Half-width of the truncated domain around the origin; by default the
    /// truncation rule `|x_probe| + 5 sqrt(abar T) + 1`.
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Time steps; by default 10% above the CFL minimum.
    #[serde(default)]
    pub n_steps: Option<usize>,
}

fn default_paths() -> usize {
    10_000
}
fn default_steps() -> usize {
    50
}
fn default_blocks() -> usize {
    4
}
fn default_bins() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default = "default_bins")]
    pub state_bins: usize,
    #[serde(default)]
    pub basis: Basis,
    #[serde(default)]
    pub fd: Option<FdSpec>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            paths: default_paths(),
            n_steps: default_steps(),
            blocks: default_blocks(),
            state_bins: default_bins(),
            basis: Basis::default(),
            fd: None,
        }
    }
}

/// Closed-form expectations checked in addition to the oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    /// `u` at the first probe.
    #[serde(default)]
    pub value: Option<f64>,
    /// Generator index every search must select everywhere.
    #[serde(default)]
    pub control: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// Intermediate time of the dynamic programming check at the first
    /// probe; no check when absent.
    #[serde(default)]
    pub dpp_s: Option<f64>,
    /// Run the regularity diagnostics around the first probe.
    #[serde(default)]
    pub regularity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "default_ell")]
    pub ell: f64,
    pub generators: Vec<GeneratorSpec>,
    pub driver: DriverKind,
    pub terminal: TerminalKind,
    pub probes: Vec<Probe>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub expected: Option<Expected>,
    #[serde(default)]
    pub checks: Option<Checks>,
}

fn default_ell() -> f64 {
    1.0
}

fn matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Config(format!("{what} must be a {n}x{n} matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn dim(&self) -> usize {
        self.generators.first().map_or(0, |g| g.a.len())
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.generators.is_empty() {
            return Err(Error::Config("generators: at least one generator is required".into()));
        }
        if n == 0 {
            return Err(Error::Config("generators.a must be non-empty".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("T must be positive and finite, got {}", self.horizon)));
        }
        if self.probes.is_empty() {
            return Err(Error::Config("probes: at least one probe point is required".into()));
        }
        for (i, p) in self.probes.iter().enumerate() {
            if p.x.len() != n {
                return Err(Error::Config(format!("probes[{i}].x must have {n} entries")));
            }
            if !(p.t >= 0.0 && p.t < self.horizon) {
                return Err(Error::Config(format!("probes[{i}].t must lie in [0, T)")));
            }
        }
        let num = &self.numerics;
        if num.paths < 2 {
            return Err(Error::Config("numerics.paths must be at least 2".into()));
        }
        if num.n_steps == 0 {
            return Err(Error::Config("numerics.n_steps must be at least 1".into()));
        }
        if num.blocks == 0 || num.blocks > num.n_steps {
            return Err(Error::Config("numerics.blocks must lie in 1..=n_steps".into()));
        }
        if num.state_bins == 0 {
            return Err(Error::Config("numerics.state_bins must be at least 1".into()));
        }
        if n > 2 && num.fd.is_some() {
            return Err(Error::Config("numerics.fd: finite differences need dimension 1 or 2".into()));
        }
        if let Some(s) = self.checks.as_ref().and_then(|c| c.dpp_s) {
            let t = self.probes[0].t;
            if !(s > t && s <= self.horizon) {
                return Err(Error::Config(format!("checks.dpp_s must lie in ({t}, T]")));
            }
        }
        Ok(())
    }

    pub fn generator_set(&self) -> Result<GeneratorSet> {
        let n = self.dim();
        let mut gens = Vec::with_capacity(self.generators.len());
        let mut floor = f64::INFINITY;
        for (i, spec) in self.generators.iter().enumerate() {
            let a = matrix(&spec.a, n, &format!("generators[{i}].a"))?;
            floor = floor.min(min_eigenvalue(&a));
            let b = match &spec.b {
                Some(b) if b.len() != n => {
                    return Err(Error::Config(format!("generators[{i}].b must have {n} entries")))
                }
                Some(b) => DVector::from_column_slice(b),
                None => DVector::zeros(n),
            };
            let drift = match &spec.b_linear {
                Some(rows) => Drift::Affine {
                    offset: b,
                    linear: matrix(rows, n, &format!("generators[{i}].b_linear"))?,
                },
                None => Drift::Constant(b),
            };
            let diffusion = Diffusion::constant(a).map_err(|e| Error::Config(format!("generators[{i}].a: {e}")))?;
            gens.push(LinearGenerator::new(n, drift, diffusion)?);
        }
        let lambda = self.lambda.unwrap_or(floor / 2.0);
        GeneratorSet::new(gens, lambda, self.ell).map_err(|e| Error::Config(format!("generators: {e}")))
    }

    pub fn problem(&self) -> Result<ParabolicProblem> {
        let n = self.dim();
        let f = Driver::from_kind(self.driver, n).map_err(|e| Error::Config(format!("driver: {e}")))?;
        let g = TerminalCondition::from_kind(&self.terminal, n).map_err(|e| Error::Config(format!("terminal: {e}")))?;
        Ok(ParabolicProblem::new(self.generator_set()?, f, g, self.horizon)
            .map_err(|e| Error::Config(e.to_string()))?
            .with_steps(self.numerics.n_steps)
            .with_basis(self.numerics.basis))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIN: &str = r#"
name = "m"
T = 1.0
generators = [{ a = [[0.25]] }, { a = [[1.0]] }]
driver = { kind = "zero" }
terminal = { kind = "square" }
probes = [{ x = [0.0] }]
"#;

    #[test]
    fn defaults_fill_in() {
        let s = Scenario::parse(MIN).unwrap();
        assert_eq!(s.numerics, Numerics::default());
        assert_eq!(s.seed, 0);
        let set = s.generator_set().unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.lambda(), 0.125);
        assert_eq!(s.problem().unwrap().n_steps, 50);
    }

    #[test]
    fn missing_horizon_names_the_field() {
        let err = Scenario::parse(&MIN.replace("T = 1.0\n", "")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("`T`"), "{err}");
    }

    #[test]
    fn shape_errors_are_reported() {
        let bad = MIN.replace("probes = [{ x = [0.0] }]", "probes = [{ x = [0.0, 1.0] }]");
        assert!(Scenario::parse(&bad).unwrap_err().to_string().contains("probes[0].x"));
        let bad = MIN.replace("{ a = [[1.0]] }", "{ a = [[1.0, 0.0]] }");
        assert!(Scenario::parse(&bad).unwrap().generator_set().is_err());
        let bad = MIN.replace("kind = \"square\"", "kind = \"cubic\"");
        assert!(Scenario::parse(&bad).is_err());
        let bad = format!("{MIN}\n[checks]\ndpp_s = 2.0\n");
        assert!(Scenario::parse(&bad).unwrap_err().to_string().contains("dpp_s"));
    }

    #[test]
    fn shipped_scenarios_parse() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
        let mut n = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let s = Scenario::load(&entry.unwrap().path()).unwrap();
            s.problem().unwrap();
            n += 1;
        }
        assert_eq!(n, 6);
    }
}
