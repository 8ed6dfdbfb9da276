//! Experiment configuration: a TOML file with one table per concern.
//!
//! Every field has a concrete default, so serialising a parsed config gives
//! the fully resolved parameter set that a run actually used. Unknown keys are
//! rejected. Any key can be overridden from the environment as
//! `TEMPERING__<TABLE>__<KEY>=<toml value>`, e.g. `TEMPERING__DYNAMICS__DT=0.01`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::adapt::{AdaptSettings, Interval};
use crate::dynamics::{Dynamics, IntegratorParams, Observable, SwitchingRate};
use crate::error::{Error, Result};
use crate::potential::{DimerInSolvent, DoubleWell, Harmonic, Model};

/// Prefix of environment overrides; path segments are separated by `__`.
pub const ENV_PREFIX: &str = "TEMPERING__";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub ladder: LadderConfig,
    pub dynamics: DynamicsConfig,
    pub adapt: AdaptConfig,
    pub estimator: EstimatorConfig,
    pub ldp: LdpConfig,
    pub reference: ReferenceConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    DoubleWell,
    Harmonic,
    WcaDimer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub name: ModelName,
    /// Coordinates of the double well or harmonic model.
    pub dimension: usize,
    /// Per-coordinate stiffness of the double well's harmonic directions
    /// (length `dimension - 1`, empty for all ones), or the single
    /// harmonic stiffness.
    pub stiffness: Vec<f64>,
    pub n_particles: usize,
    pub box_length: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub h: f64,
    pub omega: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let d = DimerInSolvent::reference();
        Self {
            name: ModelName::DoubleWell,
            dimension: 1,
            stiffness: Vec::new(),
            n_particles: d.n_particles,
            box_length: d.box_len,
            sigma: d.sigma,
            epsilon: d.epsilon,
            h: d.h,
            omega: d.omega,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model> {
        let model = match self.name {
            ModelName::DoubleWell => {
                if self.stiffness.is_empty() {
                    Model::DoubleWell(DoubleWell::new(self.dimension)?)
                } else {
                    if self.stiffness.len() + 1 != self.dimension {
                        return Err(Error::config(
                            "model.stiffness",
                            format!("expected {} entries for dimension {}", self.dimension - 1, self.dimension),
                        ));
                    }
                    Model::DoubleWell(DoubleWell::with_stiffness(self.stiffness.clone())?)
                }
            }
            ModelName::Harmonic => {
                let k = match self.stiffness.as_slice() {
                    [] => 1.0,
                    [k] => *k,
                    _ => return Err(Error::config("model.stiffness", "harmonic takes a single stiffness")),
                };
                Model::Harmonic(Harmonic::new(self.dimension, k)?)
            }
            ModelName::WcaDimer => Model::Dimer(DimerInSolvent::new(
                self.n_particles,
                self.box_length,
                self.sigma,
                self.epsilon,
                self.h,
                self.omega,
            )?),
        };
        Ok(model)
    }
}

/// How the ladder weights `n_k` are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    /// `ln n_k` given in `log_n`.
    Explicit,
    /// `n_k = 1` for every temperature.
    Uniform,
    /// `n_k = 1/Z_k` from quadrature (1D-reducible models only).
    Oracle,
    /// Estimated by the adaptive loop from `adapt.initial_z`.
    Adaptive,
    /// Read from a ladder file written by `adapt` or `reference`.
    File,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    /// Strictly decreasing; the first entry is the physical temperature.
    pub betas: Vec<f64>,
    pub weights: WeightSource,
    pub log_n: Vec<f64>,
    pub file: Option<PathBuf>,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            betas: (0..6).map(|k| 25.0 * 0.5f64.powi(k)).collect(),
            weights: WeightSource::Oracle,
            log_n: Vec::new(),
            file: None,
        }
    }
}

fn serialize_rate<S: Serializer>(nu: &SwitchingRate, s: S) -> std::result::Result<S::Ok, S::Error> {
    match nu {
        SwitchingRate::Infinite => s.serialize_str("inf"),
        SwitchingRate::Finite(v) => s.serialize_f64(*v),
    }
}

fn deserialize_rate<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<SwitchingRate, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Int(i64),
        Text(String),
    }
    let text = match Raw::deserialize(d)? {
        Raw::Number(v) => v.to_string(),
        Raw::Int(v) => v.to_string(),
        Raw::Text(s) => s,
    };
    text.parse().map_err(serde::de::Error::custom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub kind: Dynamics,
    pub dt: f64,
    #[serde(serialize_with = "serialize_rate", deserialize_with = "deserialize_rate")]
    pub nu: SwitchingRate,
    pub gamma: f64,
    pub mass: f64,
    pub n_steps: u64,
    pub record_stride: u64,
    pub seed: u64,
    /// Use `paper_n_steps` instead of `n_steps`.
    pub paper_scale: bool,
    pub paper_n_steps: u64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            kind: Dynamics::Overdamped,
            dt: 0.025,
            nu: SwitchingRate::Infinite,
            gamma: 1.0,
            mass: 1.0,
            n_steps: 10_000_000,
            record_stride: 100,
            seed: 0,
            paper_scale: false,
            paper_n_steps: 100_000_000,
        }
    }
}

impl DynamicsConfig {
    pub fn steps(&self) -> u64 {
        if self.paper_scale {
            self.paper_n_steps
        } else {
            self.n_steps
        }
    }

    pub fn params(&self) -> IntegratorParams {
        IntegratorParams {
            dt: self.dt,
            nu: self.nu,
            gamma: self.gamma,
            mass: self.mass,
            rng_seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptConfig {
    /// Initial partition-function guesses `Z_k` (not logarithms).
    pub initial_z: Vec<f64>,
    pub l_max: usize,
    pub steps_per_iter: u64,
    pub paper_steps_per_iter: u64,
    pub interval: [f64; 2],
    pub tolerance: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        let s = AdaptSettings::default();
        Self {
            initial_z: Vec::new(),
            l_max: s.l_max,
            steps_per_iter: 1_000_000,
            paper_steps_per_iter: s.steps_per_iter,
            interval: [s.interval.lo, s.interval.hi],
            tolerance: s.tolerance,
        }
    }
}

impl AdaptConfig {
    pub fn settings(&self, paper_scale: bool) -> Result<AdaptSettings> {
        Ok(AdaptSettings {
            l_max: self.l_max,
            steps_per_iter: if paper_scale {
                self.paper_steps_per_iter
            } else {
                self.steps_per_iter
            },
            interval: Interval::new(self.interval[0], self.interval[1])
                .map_err(|e| Error::config("adapt.interval", e.to_string()))?,
            tolerance: self.tolerance,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// `energy`, `x<i>`, `r<i>_<j>` or `bond`.
    pub observables: Vec<String>,
    pub window_sizes: Vec<usize>,
    pub histogram_observable: String,
    pub histogram_bins: usize,
    pub histogram_range: [f64; 2],
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            observables: vec!["energy".into(), "x0".into()],
            window_sizes: vec![100, 1_000, 10_000, 100_000],
            histogram_observable: "x0".into(),
            histogram_bins: 200,
            histogram_range: [-3.0, 3.0],
        }
    }
}

impl EstimatorConfig {
    pub fn parsed_observables(&self) -> Result<Vec<Observable>> {
        self.observables
            .iter()
            .map(|s| s.parse().map_err(|e: Error| Error::config("estimator.observables", e.to_string())))
            .collect()
    }

    pub fn parsed_histogram_observable(&self) -> Result<Observable> {
        self.histogram_observable
            .parse()
            .map_err(|e: Error| Error::config("estimator.histogram_observable", e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LdpConfig {
    pub nus: Vec<f64>,
    pub grid: [f64; 2],
    pub grid_points: usize,
    /// Amplitudes of `θ = 1 + α sin(k x)` applied to the hot temperature.
    pub alphas: Vec<f64>,
    pub wavenumbers: Vec<f64>,
    /// Optional `x,k,value` density file evaluated in addition.
    pub density_file: Option<PathBuf>,
}

impl Default for LdpConfig {
    fn default() -> Self {
        Self {
            nus: vec![0.1, 1.0, 10.0, 100.0],
            grid: [-4.0, 4.0],
            grid_points: 4001,
            alphas: vec![0.05, 0.1, 0.2],
            wavenumbers: vec![1.0],
            density_file: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub points: usize,
    /// Nodes of the exported mixture density on `[-half_width, half_width]`.
    pub density_points: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            points: crate::estimators::quadrature::POINTS,
            density_points: 801,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

impl ExperimentConfig {
    /// Parses TOML text and validates it.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_error(&e))?;
        Self::from_table(table)
    }

    /// Reads `path`, applies `overrides` (`TEMPERING__TABLE__KEY`, value),
    /// resolves relative file paths against the config's directory, and
    /// validates.
    pub fn load<I, K, V>(path: impl AsRef<Path>, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_error(&e))?;
        apply_overrides(&mut table, overrides)?;
        let mut cfg = Self::from_table(table)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for file in [&mut cfg.ladder.file, &mut cfg.ldp.density_file].into_iter().flatten() {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Ok(cfg)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| parse_error(&e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Range checks on every numeric field, run before any simulation.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        match m.name {
            ModelName::DoubleWell | ModelName::Harmonic if m.dimension == 0 => {
                return Err(Error::config("model.dimension", "must be >= 1"))
            }
            _ => {}
        }
        if m.stiffness.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::config("model.stiffness", "entries must be positive"));
        }
        self.model.build().map_err(|e| match e {
            Error::Config { .. } => e,
            other => Error::config("model", other.to_string()),
        })?;

        let l = &self.ladder;
        if l.betas.is_empty() {
            return Err(Error::config("ladder.betas", "at least one temperature is required"));
        }
        if l.betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::config("ladder.betas", "entries must be positive and finite"));
        }
        if l.betas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("ladder.betas", "must be strictly decreasing"));
        }
        match l.weights {
            WeightSource::Explicit => {
                if l.log_n.len() != l.betas.len() || l.log_n.iter().any(|v| !v.is_finite()) {
                    return Err(Error::config("ladder.log_n", "one finite entry per temperature is required"));
                }
            }
            WeightSource::File if l.file.is_none() => {
                return Err(Error::config("ladder.file", "required when weights = \"file\""));
            }
            WeightSource::Adaptive if self.adapt.initial_z.len() != l.betas.len() => {
                return Err(Error::config("adapt.initial_z", "one guess per temperature is required"));
            }
            _ => {}
        }

        let d = &self.dynamics;
        d.params().validate().map_err(|e| Error::config("dynamics", e.to_string()))?;
        if d.record_stride == 0 {
            return Err(Error::config("dynamics.record_stride", "must be >= 1"));
        }
        if d.kind == Dynamics::Overdamped && d.mass != 1.0 {
            log::debug!("dynamics.mass is ignored by overdamped dynamics");
        }

        let a = &self.adapt;
        if a.initial_z.iter().any(|z| !(*z > 0.0 && z.is_finite())) {
            return Err(Error::config("adapt.initial_z", "entries must be positive and finite"));
        }
        if a.l_max == 0 {
            return Err(Error::config("adapt.l_max", "must be >= 1"));
        }
        if a.steps_per_iter == 0 || a.paper_steps_per_iter == 0 {
            return Err(Error::config("adapt.steps_per_iter", "must be >= 1"));
        }
        if !(a.tolerance > 0.0) {
            return Err(Error::config("adapt.tolerance", "must be positive"));
        }
        a.settings(false)?;

        let e = &self.estimator;
        let model = self.model.build()?;
        for obs in e.parsed_observables()? {
            obs.check(&model)
                .map_err(|err| Error::config("estimator.observables", err.to_string()))?;
        }
        e.parsed_histogram_observable()?
            .check(&model)
            .map_err(|err| Error::config("estimator.histogram_observable", err.to_string()))?;
        if e.window_sizes.is_empty() || e.window_sizes.contains(&0) {
            return Err(Error::config("estimator.window_sizes", "need at least one positive window size"));
        }
        if e.histogram_bins == 0 {
            return Err(Error::config("estimator.histogram_bins", "must be >= 1"));
        }
        if !(e.histogram_range[0] < e.histogram_range[1]) {
            return Err(Error::config("estimator.histogram_range", "lower bound must be below upper"));
        }

        let p = &self.ldp;
        if p.nus.iter().any(|nu| !(*nu >= 0.0 && nu.is_finite())) {
            return Err(Error::config("ldp.nus", "entries must be finite and >= 0"));
        }
        if !(p.grid[0] < p.grid[1]) || p.grid_points < 3 {
            return Err(Error::config("ldp.grid", "need an increasing interval and >= 3 points"));
        }
        if p.alphas.iter().any(|a| !(a.abs() < 1.0)) {
            return Err(Error::config("ldp.alphas", "|α| must be below 1 to keep θ positive"));
        }
        if p.wavenumbers.iter().any(|k| !k.is_finite()) {
            return Err(Error::config("ldp.wavenumbers", "entries must be finite"));
        }

        let r = &self.reference;
        if r.points < 5 || !(r.points - 1).is_multiple_of(4) {
            return Err(Error::config("reference.points", "must be of the form 4m + 1"));
        }
        if r.density_points < 2 {
            return Err(Error::config("reference.density_points", "must be >= 2"));
        }
        Ok(())
    }
}

fn parse_error(e: &toml::de::Error) -> Error {
    let msg = e.message().to_string();
    // serde reports the offending key inside backticks
    let field = msg
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<config>".into());
    Error::config(field, msg)
}

/// Merges `TEMPERING__A__B=value` pairs into `table`. The value is parsed as
/// a TOML value, falling back to a plain string. Non-matching keys are ignored.
pub fn apply_overrides<I, K, V>(table: &mut toml::Table, overrides: I) -> Result<()>
where
    I: IntoIterator<Item = (K, V)>,
    K: AsRef<str>,
    V: AsRef<str>,
{
    for (key, value) in overrides {
        let Some(path) = key.as_ref().strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let segments: Vec<String> = path.split("__").map(|s| s.to_ascii_lowercase()).collect();
        if segments.iter().any(String::is_empty) {
            return Err(Error::config(key.as_ref(), "empty path segment"));
        }
        let value = parse_value(value.as_ref());
        let (last, parents) = segments.split_last().expect("non-empty");
        let mut cur = &mut *table;
        for seg in parents {
            let entry = cur
                .entry(seg.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| Error::config(segments.join("."), "override path crosses a non-table value"))?;
        }
        cur.insert(last.clone(), value);
    }
    Ok(())
}

fn parse_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}
