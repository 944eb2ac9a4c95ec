//! Flat TOML experiment configuration.
//!
//! ```toml
//! algorithm = "po_known"        # po_known | po_unknown | uniform_baseline | oracle_u_mwu
//! episodes = 16384
//! seeds = [0, 1, 2]
//! output = "results/run.csv"
//! delta = 0.05
//! log_factor = false            # include sqrt(ln(HSAK/δ)) in the default η
//! # eta = 1e-3                  # omitted: 1 / (H sqrt(SAK) + H^2 sqrt(K))
//! # gamma = 2e-3                # omitted: 2 η H
//! recompute_period = 1
//!
//! mdp = "lower_bound"           # inline | file | lower_bound | random
//! num_states = 3
//! num_actions = 2
//! horizon = 3
//! epsilon = "auto"              # or a number in [0, 1/4]
//! instance_seed = 0
//! # mdp_file = "mdp.json"       # mdp = "file"
//! # initial_state = 0           # mdp = "inline"
//! # transitions = [...]         # mdp = "inline", row-major [H, S, A, S]
//!
//! adversary = "lower_bound"     # fixed_sequence | iid_uniform | switching | lower_bound
//! # switch_period = 100
//! # loss_file = "losses.json"
//! ```
//!
//! Relative paths are resolved against the directory of the config file.
//! When neither the file nor the command line lists seeds, `AGG_BANDIT_SEED`
//! supplies a single one.

use std::fmt;
use std::path::{Path, PathBuf};

use aggbandit_core::env::{make_lower_bound_instance, AdversarySpec, Gap};
use aggbandit_core::format::{read_mdp, MdpDocument};
use aggbandit_core::known::theorem_learning_rate;
use aggbandit_core::mdp::{Dims, TabularMdp};
use aggbandit_core::rng::{purpose, RandomStream};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, Error, Result};

pub const SEED_ENV: &str = "AGG_BANDIT_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    PoKnown,
    PoUnknown,
    UniformBaseline,
    /// Exponential weights on the exact U-function; debugging aid.
    OracleUMwu,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::PoKnown,
        Algorithm::PoUnknown,
        Algorithm::UniformBaseline,
        Algorithm::OracleUMwu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::PoKnown => "po_known",
            Algorithm::PoUnknown => "po_unknown",
            Algorithm::UniformBaseline => "uniform_baseline",
            Algorithm::OracleUMwu => "oracle_u_mwu",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpSource {
    Inline,
    File,
    LowerBound,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryKind {
    FixedSequence,
    IidUniform,
    Switching,
    LowerBound,
}

/// `"auto"` or a fixed gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon(pub Gap);

impl Serialize for Epsilon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Gap::Auto => s.serialize_str("auto"),
            Gap::Fixed(eps) => s.serialize_f64(eps),
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(eps) => Ok(Epsilon(Gap::Fixed(eps))),
            Raw::Word(w) if w == "auto" => Ok(Epsilon(Gap::Auto)),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "epsilon must be \"auto\" or a number, got \"{w}\""
            ))),
        }
    }
}

fn default_delta() -> f64 {
    0.05
}

fn default_period() -> usize {
    1
}

fn default_mdp() -> MdpSource {
    MdpSource::LowerBound
}

fn default_epsilon() -> Epsilon {
    Epsilon(Gap::Auto)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub episodes: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub log_factor: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "default_period")]
    pub recompute_period: usize,

    #[serde(default = "default_mdp")]
    pub mdp: MdpSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_actions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: Epsilon,
    #[serde(default)]
    pub instance_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp_file: Option<PathBuf>,
    #[serde(default)]
    pub initial_state: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<f64>>,

    /// Defaults to `lower_bound` for the lower-bound MDP and `iid_uniform`
    /// otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub switch_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_file: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    pub episodes: Option<usize>,
    pub algorithm: Option<Algorithm>,
}

impl ExperimentConfig {
    /// Minimal config; everything else at its default.
    pub fn new(algorithm: Algorithm, episodes: usize) -> Self {
        Self {
            algorithm,
            episodes,
            seeds: Vec::new(),
            output: None,
            delta: default_delta(),
            log_factor: false,
            eta: None,
            gamma: None,
            recompute_period: default_period(),
            mdp: default_mdp(),
            num_states: None,
            num_actions: None,
            horizon: None,
            epsilon: default_epsilon(),
            instance_seed: 0,
            mdp_file: None,
            initial_state: 0,
            transitions: None,
            adversary: None,
            switch_period: None,
            loss_file: None,
        }
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads a config file; relative paths inside it become relative to its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let mut config = Self::from_toml_str(&text).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.mdp_file, &mut config.loss_file, &mut config.output]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if !overrides.seeds.is_empty() {
            self.seeds = overrides.seeds.clone();
        }
        if let Some(out) = &overrides.output {
            self.output = Some(out.clone());
        }
        if let Some(k) = overrides.episodes {
            self.episodes = k;
        }
        if let Some(a) = overrides.algorithm {
            self.algorithm = a;
        }
    }

    /// Fills `seeds` from `AGG_BANDIT_SEED` when nothing else set them.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if !self.seeds.is_empty() {
            return Ok(());
        }
        if let Ok(raw) = std::env::var(SEED_ENV) {
            let seed = raw
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}={raw} is not an unsigned integer")))?;
            self.seeds = vec![seed];
        }
        Ok(())
    }

    pub fn adversary_kind(&self) -> AdversaryKind {
        self.adversary.unwrap_or(match self.mdp {
            MdpSource::LowerBound => AdversaryKind::LowerBound,
            _ => AdversaryKind::IidUniform,
        })
    }

    fn shape(&self) -> Result<(usize, usize, usize)> {
        match (self.num_states, self.num_actions, self.horizon) {
            (Some(s), Some(a), Some(h)) => Ok((s, a, h)),
            _ => Err(Error::Config(format!(
                "mdp = \"{}\" needs num_states, num_actions and horizon",
                serde_plain(&self.mdp)
            ))),
        }
    }

    fn check_scalars(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.episodes == 0 {
            return bad("episodes must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad(format!("no seeds: set `seeds`, pass --seed or set {SEED_ENV}"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return bad(format!("eta = {eta} must be a finite nonnegative number"));
            }
        }
        if let Some(gamma) = self.gamma {
            if !(gamma > 0.0 && gamma.is_finite()) {
                return bad(format!("gamma = {gamma} must be positive"));
            }
        }
        if self.recompute_period == 0 {
            return bad("recompute_period must be at least 1".into());
        }
        Ok(())
    }

    /// Validates the config and builds the instance and adversary.
    pub fn resolve(&self) -> Result<Experiment> {
        self.check_scalars()?;
        let mut lower_bound = None;
        let mdp = match self.mdp {
            MdpSource::Inline => {
                let (s, a, h) = self.shape()?;
                let transitions = self
                    .transitions
                    .clone()
                    .ok_or_else(|| Error::Config("mdp = \"inline\" needs `transitions`".into()))?;
                MdpDocument {
                    num_states: s,
                    num_actions: a,
                    horizon: h,
                    initial_state: self.initial_state,
                    transitions,
                }
                .into_mdp()?
            }
            MdpSource::File => {
                let path = self
                    .mdp_file
                    .as_ref()
                    .ok_or_else(|| Error::Config("mdp = \"file\" needs `mdp_file`".into()))?;
                read_mdp(path)?
            }
            MdpSource::Random => {
                let (s, a, h) = self.shape()?;
                let mut rng = RandomStream::for_purpose(self.instance_seed, purpose::INSTANCE);
                TabularMdp::random(s, a, h, &mut rng)?
            }
            MdpSource::LowerBound => {
                let (s, a, h) = self.shape()?;
                let mut rng = RandomStream::for_purpose(self.instance_seed, purpose::INSTANCE);
                let instance = make_lower_bound_instance(s, a, h, self.episodes, self.epsilon.0, &mut rng)?;
                let mdp = instance.mdp.clone();
                lower_bound = Some(instance);
                mdp
            }
        };
        let adversary = match self.adversary_kind() {
            AdversaryKind::IidUniform => AdversarySpec::IidUniform,
            AdversaryKind::Switching => {
                let period = self
                    .switch_period
                    .ok_or_else(|| Error::Config("adversary = \"switching\" needs `switch_period`".into()))?;
                if period == 0 {
                    return Err(Error::Config("switch_period must be at least 1".into()));
                }
                AdversarySpec::Switching { period }
            }
            AdversaryKind::FixedSequence => {
                let path = self.loss_file.clone().ok_or_else(|| {
                    Error::Config("adversary = \"fixed_sequence\" needs `loss_file`".into())
                })?;
                AdversarySpec::FixedSequence { path }
            }
            AdversaryKind::LowerBound => match &lower_bound {
                Some(instance) => AdversarySpec::lower_bound(instance),
                None => {
                    return Err(Error::Config(
                        "adversary = \"lower_bound\" requires mdp = \"lower_bound\"".into(),
                    ))
                }
            },
        };
        let dims = mdp.dims();
        let eta = self.eta.unwrap_or_else(|| {
            theorem_learning_rate(
                dims.horizon,
                dims.num_states,
                dims.num_actions,
                self.episodes,
                self.delta,
                self.log_factor,
            )
        });
        let gamma = self.gamma.unwrap_or(2.0 * eta * dims.horizon as f64);
        if !(gamma > 0.0) {
            return Err(Error::Config(format!("gamma = {gamma} must be positive")));
        }
        let epsilon = lower_bound.as_ref().map(|i| i.epsilon);
        Ok(Experiment {
            config: self.clone(),
            mdp,
            adversary,
            eta,
            gamma,
            epsilon,
        })
    }
}

fn serde_plain<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// A validated config with its instance built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub mdp: TabularMdp,
    pub adversary: AdversarySpec,
    pub eta: f64,
    pub gamma: f64,
    /// Gap of the lower-bound instance, when that is the MDP.
    pub epsilon: Option<f64>,
}

impl Experiment {
    pub fn dims(&self) -> Dims {
        self.mdp.dims()
    }
}
