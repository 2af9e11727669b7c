use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use breather_core::solver::Scheme;
use breather_core::verify::AssumptionOptions;
use breather_core::{
    snapshot, DualProblem, OperatorSpec, Potential, ProblemParams, SolverConfig, SymmetryClass,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub operator: OperatorSection,
    pub potential: PotentialSection,
    pub solver: SolverSection,
    pub verify: VerifySection,
    pub bench: BenchSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    /// Symmetry class index `s` in `1..=5`.
    pub symmetry: u8,
    pub period: f64,
    pub cutoff: usize,
    pub half_width: f64,
    pub points: usize,
    pub epsilon: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            dim: 2,
            p: 3.0,
            q: 8.0,
            symmetry: 3,
            period: 2.0 * PI,
            cutoff: 7,
            half_width: 16.0,
            points: 128,
            epsilon: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSection {
    /// `fractional_laplacian` or `klein_gordon`.
    pub kind: String,
    pub gamma: f64,
    pub mass: f64,
}

impl Default for OperatorSection {
    fn default() -> Self {
        Self {
            kind: "fractional_laplacian".into(),
            gamma: 1.0,
            mass: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialSection {
    /// `gaussian` or `file`.
    pub kind: String,
    pub amplitude: f64,
    pub width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            kind: "gaussian".into(),
            amplitude: 1.0,
            width: 2.0,
            path: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub scheme: String,
    pub max_iter: usize,
    pub tol: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub memory: usize,
    pub stagnation: f64,
    pub noise: f64,
    pub angle_threshold: f64,
    /// Number of solutions (first plus deflated ones).
    pub solutions: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            scheme: d.scheme.name().into(),
            max_iter: d.max_iter,
            tol: d.tol,
            armijo: d.armijo,
            backtrack: d.backtrack,
            memory: d.memory,
            stagnation: d.stagnation,
            noise: d.noise,
            angle_threshold: d.angle_threshold,
            solutions: d.solutions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub tol: f64,
    pub test_functions: usize,
    pub test_seed: u64,
    pub decay_modes: i64,
    pub trials: usize,
    pub slope_slack: f64,
    /// Random starts and power steps of the operator-norm estimate.
    pub norm_trials: usize,
    pub norm_steps: usize,
    /// Skip the assumption checks and the mountain-pass level check.
    pub quick: bool,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            test_functions: 20,
            test_seed: 3,
            decay_modes: 15,
            trials: 16,
            slope_slack: 0.15,
            norm_trials: 4,
            norm_steps: 20,
            quick: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub max_mode: i64,
    pub trials: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            max_mode: 15,
            trials: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// `epsilon`, `k_cutoff`, `box` or `p`.
    pub axis: String,
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: "epsilon".into(),
            values: vec![4e-3, 2e-3, 1e-3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads; 0 keeps the thread pool default.
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            threads: 1,
        }
    }
}

/// Parses `key=value`; the value is read as a TOML literal, else as a bare string.
pub fn parse_override(raw: &str) -> Result<(String, toml::Value), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{raw}' is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::Config(format!("override '{raw}' has an empty key")));
    }
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    Ok((key.to_string(), parsed))
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("nonempty key");
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override key '{key}': '{part}' is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> Result<Self, CliError> {
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    /// Reads the file and applies the overrides in order.
    pub fn load(path: &Path, overrides: &[(String, toml::Value)]) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut table: toml::Table = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        for (key, value) in overrides {
            set_dotted(&mut table, key, value.clone())?;
        }
        Self::from_table(table)
    }

    pub fn params(&self) -> Result<ProblemParams, CliError> {
        let p = &self.problem;
        let symmetry = SymmetryClass::from_index(p.symmetry)?;
        Ok(ProblemParams {
            dim: p.dim,
            p: p.p,
            q: p.q,
            symmetry,
            period: p.period,
            cutoff: p.cutoff,
            half_width: p.half_width,
            points: p.points,
            epsilon: p.epsilon,
        })
    }

    pub fn spec(&self) -> Result<OperatorSpec, CliError> {
        let op = &self.operator;
        let spec = match op.kind.as_str() {
            "fractional_laplacian" | "laplacian" => OperatorSpec::FractionalLaplacian { gamma: op.gamma },
            "klein_gordon" => OperatorSpec::KleinGordon { mass: op.mass },
            other => {
                return Err(CliError::Config(format!(
                    "unknown operator.kind '{other}' (expected fractional_laplacian or klein_gordon)"
                )))
            }
        };
        spec.validate(self.problem.dim)?;
        Ok(spec)
    }

    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let s = &self.solver;
        let config = SolverConfig {
            scheme: Scheme::parse(&s.scheme)?,
            max_iter: s.max_iter,
            tol: s.tol,
            armijo: s.armijo,
            backtrack: s.backtrack,
            memory: s.memory,
            stagnation: s.stagnation,
            seed: self.run.seed,
            solutions: s.solutions,
            noise: s.noise,
            angle_threshold: s.angle_threshold,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn assumption_options(&self) -> AssumptionOptions {
        AssumptionOptions {
            decay_modes: self.verify.decay_modes,
            trials: self.verify.trials,
            seed: self.run.seed,
            slope_slack: self.verify.slope_slack,
        }
    }

    /// Validates everything that can be checked before any compute.
    pub fn validate(&self) -> Result<(), CliError> {
        let params = self.params()?;
        let spec = self.spec()?;
        params.validate(&spec)?;
        self.solver()?;
        if !(self.verify.tol > 0.0) {
            return Err(CliError::Config(format!(
                "verify.tol must be positive, got {}",
                self.verify.tol
            )));
        }
        match self.potential.kind.as_str() {
            "gaussian" => {
                if !(self.potential.amplitude > 0.0 && self.potential.width > 0.0) {
                    return Err(CliError::Config(
                        "gaussian potential needs positive amplitude and width".into(),
                    ));
                }
            }
            "file" => {
                if self.potential.path.is_none() {
                    return Err(CliError::Config("potential.kind = file needs potential.path".into()));
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown potential.kind '{other}' (expected gaussian or file)"
                )))
            }
        }
        Ok(())
    }

    pub fn potential(&self, params: &ProblemParams) -> Result<Potential, CliError> {
        let grid = params.grid()?;
        match self.potential.kind.as_str() {
            "file" => {
                let path = self.potential.path.as_ref().expect("validated");
                let (file_grid, values) = snapshot::read_potential(path)?;
                if file_grid.dim() != grid.dim()
                    || file_grid.points() != grid.points()
                    || file_grid.half_width() != grid.half_width()
                {
                    return Err(CliError::Config(format!(
                        "potential file {} does not match the problem grid",
                        path.display()
                    )));
                }
                Ok(Potential::new(&grid, values, params.p, params.q)?)
            }
            _ => Ok(Potential::gaussian(
                &grid,
                self.potential.amplitude,
                self.potential.width,
                params.p,
                params.q,
            )?),
        }
    }

    pub fn problem(&self) -> Result<DualProblem, CliError> {
        self.validate()?;
        let params = self.params()?;
        let potential = self.potential(&params)?;
        Ok(DualProblem::new(params, self.spec()?, potential)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_benchmark() {
        let c = RunConfig::default();
        assert_eq!(c.params().unwrap(), ProblemParams::benchmark());
        assert_eq!(c.solver().unwrap().tol, 1e-8);
    }

    #[test]
    fn flat_dotted_keys_parse() {
        let table: toml::Table = toml::from_str("problem.p = 4\nsolver.scheme = \"mountain_pass_descent\"\n").unwrap();
        let c = RunConfig::from_table(table).unwrap();
        assert_eq!(c.problem.p, 4.0);
        assert_eq!(c.solver().unwrap().scheme, Scheme::MountainPassDescent);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let table: toml::Table = toml::from_str("problem.pp = 4\n").unwrap();
        let err = RunConfig::from_table(table).unwrap_err();
        assert!(err.to_string().contains("pp"), "{err}");
        let table: toml::Table = toml::from_str("extra.x = 1\n").unwrap();
        assert!(RunConfig::from_table(table).is_err());
    }

    #[test]
    fn overrides_parse_literals_and_strings() {
        let (k, v) = parse_override("problem.epsilon=2e-3").unwrap();
        assert_eq!(k, "problem.epsilon");
        assert_eq!(v.as_float(), Some(2e-3));
        let (_, v) = parse_override("solver.scheme=mountain_pass_descent").unwrap();
        assert_eq!(v.as_str(), Some("mountain_pass_descent"));
        let (_, v) = parse_override("sweep.values=[1, 2.5]").unwrap();
        assert_eq!(v.as_array().map(|a| a.len()), Some(2));
        assert!(parse_override("novalue").is_err());
        assert!(parse_override("a..b=1").is_err());
    }

    #[test]
    fn override_applies_on_top_of_file() {
        let mut table: toml::Table = toml::from_str("problem.p = 4\n").unwrap();
        let (k, v) = parse_override("problem.p=5").unwrap();
        set_dotted(&mut table, &k, v).unwrap();
        let (k, v) = parse_override("run.seed=9").unwrap();
        set_dotted(&mut table, &k, v).unwrap();
        let c = RunConfig::from_table(table).unwrap();
        assert_eq!(c.problem.p, 5.0);
        assert_eq!(c.run.seed, 9);
    }

    #[test]
    fn resolved_config_round_trips() {
        let mut c = RunConfig::default();
        c.potential.path = Some("q.field".into());
        let back = RunConfig::from_table(toml::from_str(&toml::to_string(&c).unwrap()).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn p_two_is_rejected_before_compute() {
        let mut c = RunConfig::default();
        c.problem.p = 2.0;
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("2 < p"), "{err}");
    }

    #[test]
    fn zero_mode_of_the_laplacian_is_rejected() {
        let mut c = RunConfig::default();
        c.problem.symmetry = 1;
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("s = 3 or s = 5"), "{err}");
    }
}
