//! Run configuration: TOML schema, validation, and construction of the
//! library-level configs.

use bsvgd::branching::{IntegerLaw, OffspringLaws};
use bsvgd::chain::PrecisionRule;
use bsvgd::kernels::GaussianKernel;
use bsvgd::svgd::{StepSchedule, SvgdConfig};
use bsvgd::targets::{presets, BananaComponent, BananaTMixture, GaussianMixture, Target};
use serde::{Deserialize, Serialize};

/// Errors carry the offending key path so messages point at the config.
pub type ConfigResult<T> = Result<T, String>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Svgd,
    Bsvgd,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Svgd => "svgd",
            Algorithm::Bsvgd => "bsvgd",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub target: TargetSection,
    #[serde(default)]
    pub kernel: KernelSection,
    pub svgd: SvgdSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branching: Option<BranchingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bsvgd: Option<BsvgdSection>,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Tail degrees of freedom for t-tailed targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dof: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locations: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearities: Option<Vec<f64>>,
}

impl TargetSection {
    pub fn build(&self) -> ConfigResult<Target> {
        if let Some(preset) = &self.preset {
            if self.kind.is_some()
                || self.means.is_some()
                || self.variance.is_some()
                || self.weights.is_some()
                || self.locations.is_some()
                || self.nonlinearities.is_some()
            {
                return Err(
                    "target: a preset cannot be combined with inline fields (only `dof`)".into(),
                );
            }
            return match preset.as_str() {
                presets::GAUSS25 => {
                    if self.dof.is_some() {
                        return Err("target: `dof` only applies to t-tailed targets".into());
                    }
                    Ok(Target::Gaussian(presets::gauss25()))
                }
                presets::BANANA3 => {
                    let dof = self.dof.unwrap_or(presets::DEFAULT_BANANA_DOF);
                    presets::banana3(dof)
                        .map(Target::Banana)
                        .map_err(|e| format!("target: {e}"))
                }
                other => Err(format!(
                    "target: unknown preset {other:?} (available: {}, {})",
                    presets::GAUSS25,
                    presets::BANANA3
                )),
            };
        }
        match self.kind.as_deref() {
            Some("gaussian_mixture") => {
                let means = self
                    .means
                    .clone()
                    .ok_or("target: gaussian_mixture needs `means`")?;
                let variance = self
                    .variance
                    .ok_or("target: gaussian_mixture needs `variance`")?;
                let weights = self
                    .weights
                    .clone()
                    .ok_or("target: gaussian_mixture needs `weights`")?;
                GaussianMixture::new(means, variance, weights)
                    .map(Target::Gaussian)
                    .map_err(|e| format!("target: {e}"))
            }
            Some("banana_t_mixture") => {
                let locations = self
                    .locations
                    .clone()
                    .ok_or("target: banana_t_mixture needs `locations`")?;
                let nonlinearities = self
                    .nonlinearities
                    .clone()
                    .ok_or("target: banana_t_mixture needs `nonlinearities`")?;
                let weights = self
                    .weights
                    .clone()
                    .ok_or("target: banana_t_mixture needs `weights`")?;
                if locations.len() != nonlinearities.len() {
                    return Err(format!(
                        "target: {} locations but {} nonlinearities",
                        locations.len(),
                        nonlinearities.len()
                    ));
                }
                let dof = self.dof.unwrap_or(presets::DEFAULT_BANANA_DOF);
                let components = locations
                    .into_iter()
                    .zip(nonlinearities)
                    .map(|(location, b)| BananaComponent::new(location, dof, b))
                    .collect::<bsvgd::Result<Vec<_>>>()
                    .map_err(|e| format!("target: {e}"))?;
                BananaTMixture::new(components, weights)
                    .map(Target::Banana)
                    .map_err(|e| format!("target: {e}"))
            }
            Some(other) => Err(format!(
                "target: unknown type {other:?} (gaussian_mixture | banana_t_mixture)"
            )),
            None => Err("target: set `preset` or `type`".into()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(rename = "type", default = "default_kernel_type")]
    pub kind: String,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
}

fn default_kernel_type() -> String {
    "gaussian".into()
}

fn default_bandwidth() -> f64 {
    GaussianKernel::DEFAULT_BANDWIDTH
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            kind: default_kernel_type(),
            bandwidth: default_bandwidth(),
        }
    }
}

impl KernelSection {
    pub fn build(&self, dim: usize) -> ConfigResult<GaussianKernel> {
        if self.kind != "gaussian" {
            return Err(format!(
                "kernel: unknown type {:?} (only \"gaussian\")",
                self.kind
            ));
        }
        GaussianKernel::new(self.bandwidth, dim).map_err(|e| format!("kernel: {e}"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvgdSection {
    pub max_iterations: usize,
    pub threshold: f64,
    pub schedule: ScheduleSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
}

impl SvgdSection {
    pub fn build(&self, kernel: GaussianKernel) -> ConfigResult<SvgdConfig> {
        let schedule = match self.schedule.kind.as_str() {
            "sigmoid" => {
                let e_start = self
                    .schedule
                    .e_start
                    .ok_or("svgd.schedule: sigmoid needs `e_start`")?;
                let e_end = self
                    .schedule
                    .e_end
                    .ok_or("svgd.schedule: sigmoid needs `e_end`")?;
                StepSchedule::sigmoid(e_start, e_end, self.max_iterations)
            }
            "constant" => {
                let step = self
                    .schedule
                    .step
                    .ok_or("svgd.schedule: constant needs `step`")?;
                StepSchedule::constant(step)
            }
            other => {
                return Err(format!(
                    "svgd.schedule: unknown kind {other:?} (sigmoid | constant)"
                ))
            }
        }
        .map_err(|e| format!("svgd.schedule: {e}"))?;
        SvgdConfig::new(schedule, self.max_iterations, self.threshold, kernel)
            .map_err(|e| format!("svgd: {e}"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub count: usize,
    pub std: f64,
}

impl InitSection {
    pub fn validate(&self, context: &str) -> ConfigResult<()> {
        if self.count == 0 {
            return Err(format!("{context}: `count` must be >= 1"));
        }
        if !self.std.is_finite() || self.std <= 0.0 {
            return Err(format!("{context}: `std` must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawEntry {
    pub value: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingSection {
    #[serde(rename = "q_E")]
    pub q_explorer: Vec<LawEntry>,
    #[serde(rename = "q_S")]
    pub q_spine: Vec<LawEntry>,
    pub proposal_std: f64,
}

fn build_law(entries: &[LawEntry], context: &str) -> ConfigResult<IntegerLaw> {
    let pairs: Vec<(usize, f64)> = entries.iter().map(|e| (e.value, e.probability)).collect();
    IntegerLaw::new(&pairs).map_err(|e| format!("{context}: {e}"))
}

impl BranchingSection {
    pub fn build(&self) -> ConfigResult<OffspringLaws> {
        OffspringLaws::with_defaults_for_optimizer(
            build_law(&self.q_explorer, "branching.q_E")?,
            build_law(&self.q_spine, "branching.q_S")?,
            self.proposal_std,
        )
        .map_err(|e| format!("branching: {e}"))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrecisionSpec {
    Named(String),
    Fixed(f64),
}

impl PrecisionSpec {
    pub fn build(&self) -> ConfigResult<PrecisionRule> {
        match self {
            PrecisionSpec::Named(name) if name == "one_over_ell" => Ok(PrecisionRule::OneOverEll),
            PrecisionSpec::Named(other) => Err(format!(
                "bsvgd.precision: unknown rule {other:?} (\"one_over_ell\" or a positive number)"
            )),
            PrecisionSpec::Fixed(eta) => {
                if !eta.is_finite() || *eta <= 0.0 {
                    return Err(format!("bsvgd.precision: must be positive, got {eta}"));
                }
                Ok(PrecisionRule::Fixed(*eta))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsvgdSection {
    pub max_population: usize,
    pub precision: PrecisionSpec,
    pub initial: InitSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

fn default_true() -> bool {
    true
}

fn default_replicates() -> usize {
    10
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            enabled: true,
            replicates: default_replicates(),
        }
    }
}

impl RunConfig {
    /// Cross-section validation beyond what serde enforces.
    pub fn validate(&self) -> ConfigResult<()> {
        let target = self.target.build()?;
        match self.algorithm {
            Algorithm::Svgd => {
                let init = self.init.as_ref().ok_or("svgd runs need an [init] section")?;
                init.validate("init")?;
            }
            Algorithm::Bsvgd => {
                let section = self
                    .bsvgd
                    .as_ref()
                    .ok_or("bsvgd runs need a [bsvgd] section")?;
                self.branching
                    .as_ref()
                    .ok_or("bsvgd runs need a [branching] section")?
                    .build()?;
                section.precision.build()?;
                section.initial.validate("bsvgd.initial")?;
                if section.max_population < section.initial.count {
                    return Err(format!(
                        "bsvgd: max_population {} is below initial.count {}",
                        section.max_population, section.initial.count
                    ));
                }
            }
        }
        if self.metrics.enabled && self.metrics.replicates == 0 {
            return Err("metrics: `replicates` must be >= 1 when enabled".into());
        }
        let kernel = self
            .kernel
            .build(bsvgd::targets::ScoreModel::dimension(&target))?;
        self.svgd.build(kernel)?;
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    let config: RunConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    config.validate()?;
    Ok(config)
}

/// Canonical serialization of the resolved config, used for hashing and
/// for `run.json`.
pub fn canonical_toml(config: &RunConfig) -> String {
    toml::to_string(config).expect("config serializes")
}
