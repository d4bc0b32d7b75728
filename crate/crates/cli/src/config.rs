//! JSON scenario files. Complex entries are `[re, im]` pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use zeno_core::operator::{c, hermiticity_residual, ComplexMatrix, OrthonormalBasis};
use zeno_core::{GeneratorSpec, LzParams};

use crate::CliError;

/// Row-major matrix of `(re, im)` pairs.
pub type MatrixConfig = Vec<Vec<(f64, f64)>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dimension: usize,
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub measurement: MeasurementConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    /// Initial populations in the measurement basis; defaults to the first
    /// basis state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_populations: Option<Vec<f64>>,
    /// `gamma^2 tau` held fixed in stroboscopic sweeps.
    #[serde(default = "default_strength")]
    pub strength: f64,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

fn default_strength() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorConfig {
    Matrix {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hamiltonian: Option<MatrixConfig>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        jumps: Vec<JumpConfig>,
    },
    Lz {
        delta: f64,
        eps: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub operator: MatrixConfig,
    pub rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasurementConfig {
    #[default]
    Computational,
    InstantaneousEigenbasis,
    /// Basis vectors, each a list of `(re, im)` components.
    Fixed { vectors: Vec<Vec<(f64, f64)>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleConfig {
    Times { times: Vec<f64> },
    Uniform { n: usize },
    Adapted { n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub tol: f64,
    pub truncation_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let lz = zeno_core::LzOptions::default();
        Self {
            tol: lz.tol,
            truncation_tol: lz.truncation_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
}

impl ScenarioConfig {
    /// Parses and validates; errors name the offending field and position.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Usage(format!("config field '{path}': {}", e.into_inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let d = self.dimension;
        if d < 2 {
            return Err(CliError::Usage(format!("field 'dimension': must be at least 2, got {d}")));
        }
        match &self.generator {
            GeneratorConfig::Matrix { hamiltonian, jumps } => {
                if let Some(h) = hamiltonian {
                    let m = matrix(h, d, "generator.hamiltonian")?;
                    let residual = hermiticity_residual(&m);
                    if residual > zeno_core::generator::HERMITIAN_TOLERANCE {
                        return Err(CliError::Usage(format!(
                            "field 'generator.hamiltonian': not Hermitian (residual {residual:.3e})"
                        )));
                    }
                }
                for (k, j) in jumps.iter().enumerate() {
                    matrix(&j.operator, d, &format!("generator.jumps[{k}].operator"))?;
                    if !(j.rate >= 0.0 && j.rate.is_finite()) {
                        return Err(CliError::Usage(format!(
                            "field 'generator.jumps[{k}].rate': must be non-negative, got {}",
                            j.rate
                        )));
                    }
                }
            }
            GeneratorConfig::Lz { delta, eps } => {
                if d != 2 {
                    return Err(CliError::Usage("field 'dimension': the lz generator is two-dimensional".into()));
                }
                LzParams::new(*delta, *eps).map_err(|e| CliError::Usage(format!("field 'generator': {e}")))?;
            }
        }
        self.basis()?;
        if let Some(p) = &self.initial_populations {
            let sum: f64 = p.iter().sum();
            if p.len() != d || p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-10 {
                return Err(CliError::Usage(format!(
                    "field 'initial_populations': need {d} non-negative entries summing to 1"
                )));
            }
        }
        if let Some(ScheduleConfig::Times { times }) = &self.schedule {
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(CliError::Usage("field 'schedule.times': must be strictly increasing".into()));
            }
        }
        if !(self.strength > 0.0 && self.strength.is_finite()) {
            return Err(CliError::Usage(format!("field 'strength': must be positive, got {}", self.strength)));
        }
        let t = &self.tolerances;
        if !(t.tol > 0.0) || !(t.truncation_tol > 0.0) {
            return Err(CliError::Usage("field 'tolerances': tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Fixed measurement basis, or `None` for the instantaneous eigenbasis.
    pub fn basis(&self) -> Result<Option<OrthonormalBasis>, CliError> {
        let d = self.dimension;
        match &self.measurement {
            MeasurementConfig::Computational => Ok(Some(OrthonormalBasis::computational(d))),
            MeasurementConfig::InstantaneousEigenbasis => Ok(None),
            MeasurementConfig::Fixed { vectors } => {
                if vectors.len() != d || vectors.iter().any(|v| v.len() != d) {
                    return Err(CliError::Usage(format!(
                        "field 'measurement.vectors': need {d} vectors of length {d}"
                    )));
                }
                let m = ComplexMatrix::from_fn(d, d, |i, j| c(vectors[j][i].0, vectors[j][i].1));
                OrthonormalBasis::new(m)
                    .map(Some)
                    .map_err(|e| CliError::Usage(format!("field 'measurement.vectors': {e}")))
            }
        }
    }

    pub fn hamiltonian(&self) -> Option<ComplexMatrix> {
        match &self.generator {
            GeneratorConfig::Matrix { hamiltonian, .. } => {
                hamiltonian.as_ref().map(|h| matrix(h, self.dimension, "").expect("validated"))
            }
            GeneratorConfig::Lz { .. } => None,
        }
    }

    pub fn jumps(&self) -> Vec<(ComplexMatrix, f64)> {
        match &self.generator {
            GeneratorConfig::Matrix { jumps, .. } => jumps
                .iter()
                .map(|j| (matrix(&j.operator, self.dimension, "").expect("validated"), j.rate))
                .collect(),
            GeneratorConfig::Lz { .. } => Vec::new(),
        }
    }

    /// The configured generator with its Hamiltonian scaled by
    /// `hamiltonian_scale`.
    pub fn generator_spec(&self, hamiltonian_scale: f64) -> Result<GeneratorSpec, CliError> {
        if let GeneratorConfig::Lz { delta, eps } = &self.generator {
            let p = LzParams::new(*delta, *eps).map_err(|e| CliError::Usage(e.to_string()))?;
            return Ok(p.generator().scaled(hamiltonian_scale));
        }
        let mut spec = match self.hamiltonian() {
            Some(h) => GeneratorSpec::constant_hamiltonian(h.scale(hamiltonian_scale)),
            None => GeneratorSpec::zero(self.dimension),
        };
        for (a, rate) in self.jumps() {
            spec = spec
                .plus(&GeneratorSpec::constant_dissipator(a, rate))
                .map_err(|e| CliError::Usage(e.to_string()))?;
        }
        Ok(spec)
    }

    pub fn initial(&self) -> Vec<f64> {
        self.initial_populations.clone().unwrap_or_else(|| {
            let mut p = vec![0.0; self.dimension];
            p[0] = 1.0;
            p
        })
    }
}

fn matrix(rows: &MatrixConfig, d: usize, field: &str) -> Result<ComplexMatrix, CliError> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Usage(format!("field '{field}': expected a {d}x{d} matrix")));
    }
    Ok(ComplexMatrix::from_fn(d, d, |i, j| c(rows[i][j].0, rows[i][j].1)))
}
