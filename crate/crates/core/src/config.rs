//! TOML run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{BoundarySpec, MaterialTable, PhaseMap, SampleSpec};
use crate::error::{Error, Result};
use crate::loss::EnergyForm;
use crate::network::{NetworkShape, Problem, Variant};
use crate::ode::SweepConfig;
use crate::optimizer::TrainConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Elastic,
    Thermal,
    Ode,
}

impl ProblemKind {
    pub fn field_problem(self) -> Option<Problem> {
        match self {
            ProblemKind::Elastic => Some(Problem::Elastic),
            ProblemKind::Thermal => Some(Problem::Thermal),
            ProblemKind::Ode => None,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Elastic => "elastic",
            ProblemKind::Thermal => "thermal",
            ProblemKind::Ode => "ode",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousDomain {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub phase: u32,
}

/// Either a homogeneous block or a phase map given by bundled name or
/// file path (relative paths resolve against the config file).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub map: String,
    pub homogeneous: Option<HomogeneousDomain>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            map: "square_inclusion".into(),
            homogeneous: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    /// Extra points placed near phase interfaces (0 disables refinement).
    pub points: usize,
    pub radius: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        RefinementConfig { points: 0, radius: 0.05 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub nx: usize,
    pub ny: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { nx: 100, ny: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemConfig {
    /// Elements per pixel along each axis.
    pub refine: usize,
}

impl Default for FemConfig {
    fn default() -> Self {
        FemConfig { refine: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub energy_form: EnergyForm,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub materials: MaterialTable,
    /// Defaults to the tension test (elastic) or a unit temperature drop
    /// from left to right (thermal).
    #[serde(default)]
    pub boundary: Option<BoundarySpec>,
    #[serde(default)]
    pub sampling: SampleSpec,
    #[serde(default)]
    pub refinement: RefinementConfig,
    #[serde(default)]
    pub network: NetworkShape,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub fem: FemConfig,
    #[serde(default)]
    pub ode: SweepConfig,
}

fn default_variant() -> Variant {
    Variant::E
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

impl FromStr for RunConfig {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn new(problem: ProblemKind) -> Self {
        RunConfig {
            problem,
            variant: default_variant(),
            energy_form: EnergyForm::default(),
            seeds: default_seeds(),
            domain: DomainConfig::default(),
            materials: MaterialTable::default(),
            boundary: None,
            sampling: SampleSpec::default(),
            refinement: RefinementConfig::default(),
            network: NetworkShape::default(),
            training: TrainConfig::default(),
            eval: EvalConfig::default(),
            fem: FemConfig::default(),
            ode: SweepConfig::default(),
        }
    }

    /// Parses the file and rewrites a relative map path to an absolute one
    /// so the resolved config can be replayed from anywhere.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = text.parse().map_err(|e| match e {
            Error::Config(m) => Error::parse(path, m),
            other => other,
        })?;
        if cfg.domain.homogeneous.is_none() && PhaseMap::bundled(&cfg.domain.map).is_none() {
            let p = PathBuf::from(&cfg.domain.map);
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                let joined = base.join(p);
                let abs = std::fs::canonicalize(&joined).unwrap_or(joined);
                cfg.domain.map = abs.to_string_lossy().into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        self.materials.validate()?;
        self.training.adam.validate()?;
        if self.network.hidden_layers == 0 || self.network.neurons == 0 {
            return Err(Error::config("network needs at least one hidden neuron"));
        }
        if self.eval.nx < 2 || self.eval.ny < 2 {
            return Err(Error::config("evaluation grid needs at least 2 points per axis"));
        }
        if self.fem.refine == 0 {
            return Err(Error::config("fem.refine must be at least 1"));
        }
        if self.refinement.points > 0 && !(self.refinement.radius > 0.0) {
            return Err(Error::config("refinement radius must be positive"));
        }
        match self.problem.field_problem() {
            Some(p) => self.boundary().validate(components(p))?,
            None => self.ode.validate()?,
        }
        Ok(())
    }

    pub fn boundary(&self) -> BoundarySpec {
        match (&self.boundary, self.problem) {
            (Some(b), _) => b.clone(),
            (None, ProblemKind::Thermal) => BoundarySpec::thermal(1.0, 0.0),
            (None, _) => BoundarySpec::tension(0.05),
        }
    }

    pub fn phase_map(&self) -> Result<PhaseMap> {
        if let Some(h) = self.domain.homogeneous {
            return PhaseMap::homogeneous(h.nx, h.ny, h.lx, h.ly, h.phase);
        }
        match PhaseMap::bundled(&self.domain.map) {
            Some(m) => Ok(m),
            None => PhaseMap::read(Path::new(&self.domain.map)),
        }
    }

    /// Fully expanded config (defaults filled in) as TOML.
    pub fn to_toml(&self) -> Result<String> {
        let mut resolved = self.clone();
        resolved.boundary = Some(self.boundary());
        toml::to_string(&resolved).map_err(|e| Error::config(e.to_string()))
    }
}

fn components(p: Problem) -> usize {
    match p {
        Problem::Elastic => 2,
        Problem::Thermal => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: RunConfig = "problem = \"thermal\"".parse().unwrap();
        assert_eq!(cfg.variant, Variant::E);
        assert_eq!(cfg.boundary(), BoundarySpec::thermal(1.0, 0.0));
        assert_eq!(cfg.phase_map().unwrap(), PhaseMap::square_inclusion());
    }

    #[test]
    fn resolved_round_trip() {
        let mut cfg = RunConfig::new(ProblemKind::Elastic);
        cfg.variant = Variant::C;
        cfg.seeds = vec![4, 5];
        cfg.domain.homogeneous = Some(HomogeneousDomain { nx: 1, ny: 1, lx: 1.0, ly: 1.0, phase: 1 });
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = text.parse().unwrap();
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(back.materials, cfg.materials);
        assert_eq!(back.boundary(), BoundarySpec::tension(0.05));
    }

    #[test]
    fn rejects_bad_input() {
        assert!("problem = \"thermal\"\nbogus = 1".parse::<RunConfig>().is_err());
        assert!("problem = \"plasma\"".parse::<RunConfig>().is_err());
        assert!("problem = \"thermal\"\nseeds = []".parse::<RunConfig>().is_err());
        let wrong_bc = "problem = \"elastic\"\n[boundary]\nleft = [{dirichlet = 0.0}]\nright = []\nbottom = []\ntop = []";
        assert!(wrong_bc.parse::<RunConfig>().is_err());
    }
}
