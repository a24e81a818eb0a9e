//! Experiment configuration: one TOML document with optional sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CollisionCase, Equilibrium, Kernel, ModelSpec, RadialProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    Certify,
    ModeDecay,
    Torus,
    Wholespace,
    Improved,
    NashEntropy,
    GreenValidate,
    Duhamel,
    DiffusionLadder,
    Structure,
    All,
}

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Certify => "certify",
            Self::ModeDecay => "mode-decay",
            Self::Torus => "torus",
            Self::Wholespace => "wholespace",
            Self::Improved => "improved",
            Self::NashEntropy => "nash-entropy",
            Self::GreenValidate => "green-validate",
            Self::Duhamel => "duhamel",
            Self::DiffusionLadder => "diffusion-ladder",
            Self::Structure => "structure",
            Self::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseName {
    A,
    B,
}

impl CaseName {
    pub fn case(self) -> CollisionCase {
        match self {
            Self::A => CollisionCase::FokkerPlanck,
            Self::B => CollisionCase::Scattering,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelBlock {
    /// Omitted: experiments run both cases where the criterion asks for it.
    pub case: Option<CaseName>,
    pub d: usize,
    /// `gaussian` or a radial profile name.
    pub equilibrium: String,
    /// Case (b) kernel: `constant-one`, `sin-product`, `half-indicator`, `gaussian-bump`.
    pub kernel: String,
    pub kernel_amplitude: f64,
}

impl Default for ModelBlock {
    fn default() -> Self {
        Self { case: None, d: 1, equilibrium: "gaussian".into(), kernel: "constant-one".into(), kernel_amplitude: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisName {
    Hermite,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisBlock {
    /// Omitted: Hermite for the Gaussian equilibrium, grid otherwise.
    pub kind: Option<BasisName>,
    pub n: usize,
    pub v_max: Option<f64>,
}

impl Default for BasisBlock {
    fn default() -> Self {
        Self { kind: None, n: 64, v_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryBlock {
    pub xi_max: f64,
    /// Whole-space `ξ` nodes per dimension (omitted: 2049 in d = 1, 129 in d = 2).
    pub count: Option<usize>,
    pub max_mode: i64,
    /// Frequencies `|ξ|` for mode-wise checks.
    pub xi: Vec<f64>,
}

impl Default for GeometryBlock {
    fn default() -> Self {
        Self { xi_max: 16.0, count: None, max_mode: 4, xi: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatumBlock {
    /// Random data per frequency in mode-decay runs.
    pub random: usize,
    /// Cancellation orders for the improved-rate runs.
    pub ell: Vec<usize>,
}

impl Default for DatumBlock {
    fn default() -> Self {
        Self { random: 10, ell: vec![1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingBlock {
    pub epsilons: Vec<f64>,
    pub xi: f64,
    pub order: usize,
    pub times: Vec<f64>,
    pub strength: f64,
    pub radius: f64,
    pub weight_order: f64,
}

impl Default for ScalingBlock {
    fn default() -> Self {
        Self {
            epsilons: vec![1.0, 0.5, 0.25, 0.125],
            xi: 1.0,
            order: 32,
            times: vec![0.5, 1.0, 2.0],
            strength: 10.0,
            radius: 4.0,
            weight_order: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenBlock {
    pub half_width: f64,
    pub points: usize,
    pub times: Vec<f64>,
    pub lp_horizon: f64,
}

impl Default for GreenBlock {
    fn default() -> Self {
        Self { half_width: 20.0, points: 512, times: vec![0.1, 0.5, 1.0, 2.0], lp_horizon: 50.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default)]
    pub model: ModelBlock,
    #[serde(default)]
    pub basis: BasisBlock,
    #[serde(default)]
    pub geometry: GeometryBlock,
    #[serde(default)]
    pub datum: DatumBlock,
    #[serde(default)]
    pub scaling: ScalingBlock,
    #[serde(default)]
    pub green: GreenBlock,
    /// Overrides the experiment's default horizon.
    pub horizon: Option<f64>,
    pub out: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    20240607
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentName) -> Self {
        Self {
            experiment,
            model: ModelBlock::default(),
            basis: BasisBlock::default(),
            geometry: GeometryBlock::default(),
            datum: DatumBlock::default(),
            scaling: ScalingBlock::default(),
            green: GreenBlock::default(),
            horizon: None,
            out: None,
            seed: default_seed(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=2).contains(&self.model.d) {
            return bad(format!("model.d = {} (supported: 1, 2)", self.model.d));
        }
        if self.model.equilibrium != "gaussian" && RadialProfile::named(&self.model.equilibrium).is_none() {
            return bad(format!("unknown equilibrium profile `{}`", self.model.equilibrium));
        }
        if Kernel::named(&self.model.kernel, self.model.kernel_amplitude).is_none() {
            return bad(format!("unknown kernel `{}`", self.model.kernel));
        }
        if self.basis.n < 8 {
            return bad(format!("basis.n = {} (need at least 8)", self.basis.n));
        }
        if let Some(v) = self.basis.v_max {
            if !(v > 0.0) {
                return bad(format!("basis.v_max = {v}"));
            }
        }
        if !(self.geometry.xi_max > 0.0) || self.geometry.max_mode < 1 {
            return bad("geometry.xi_max must be positive and geometry.max_mode at least 1".into());
        }
        if let Some(c) = self.geometry.count {
            if c < 3 || c % 2 == 0 {
                return bad(format!("geometry.count = {c} (need an odd count ≥ 3 so that ξ = 0 is a node)"));
            }
        }
        if self.geometry.xi.iter().any(|x| !(*x >= 0.0)) {
            return bad("geometry.xi entries must be nonnegative".into());
        }
        if self.datum.ell.iter().any(|l| *l > 2) {
            return bad("datum.ell entries must be at most 2".into());
        }
        if self.scaling.epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return bad("scaling.epsilons must lie in (0, 1]".into());
        }
        if self.scaling.order < 2 || self.scaling.times.iter().any(|t| !(*t >= 0.0)) {
            return bad("scaling.order ≥ 2 and nonnegative scaling.times required".into());
        }
        if self.scaling.weight_order <= self.model.d as f64 {
            return bad(format!("scaling.weight_order = {} must exceed d", self.scaling.weight_order));
        }
        if self.green.points < 16 || !(self.green.half_width > 0.0) || !(self.green.lp_horizon > 0.0) {
            return bad("green block needs points ≥ 16 and positive half_width, lp_horizon".into());
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return bad(format!("horizon = {h}"));
            }
        }
        Ok(())
    }

    /// Cases to run: the configured one, or `default` when omitted.
    pub fn cases(&self, default: &[CaseName]) -> Vec<CaseName> {
        self.model.case.map_or_else(|| default.to_vec(), |c| vec![c])
    }

    pub fn model_spec(&self, case: CaseName) -> ModelSpec {
        let d = self.model.d;
        let mut spec = match case {
            CaseName::A => ModelSpec::fokker_planck(d),
            CaseName::B => ModelSpec::bgk(d),
        };
        if self.model.equilibrium != "gaussian" {
            let profile = RadialProfile::named(&self.model.equilibrium).expect("validated profile");
            spec = spec.with_equilibrium(Equilibrium::CustomRadial { profile, c1: 1.0, c2: 1.0 });
        }
        if case == CaseName::B {
            spec = spec.with_kernel(Kernel::named(&self.model.kernel, self.model.kernel_amplitude).expect("validated kernel"));
        }
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::parse("experiment = \"certify\"").unwrap();
        assert_eq!(c.model.d, 1);
        assert_eq!(c.basis.n, 64);
        assert_eq!(c.cases(&[CaseName::A, CaseName::B]).len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ExperimentConfig::parse("experiment = \"certify\"\nbogus = 1"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("experiment = \"nope\""), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::parse("experiment = \"certify\"\n[model]\nd = 4"), Err(Error::Config(_))));
    }
}
