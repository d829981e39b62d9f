//! Run configuration: one JSON document per invocation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use coral_core::classes::ClassSet;
use coral_core::instances::Instance;
use coral_core::solvers::GdaConfig;

use crate::error::{CliError, CliResult};
use crate::experiments::{Algorithm, AlgorithmParams, InstanceSpec, Regime, Regularizer};
use crate::io::{self, ClassFile, InstanceFile, ModelFile, MuFile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Sizes>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataPaths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentSpec>,
    /// Record wall-clock times in reports; off keeps reruns byte-identical.
    #[serde(default)]
    pub timing: bool,
}

/// Either a named builder or files. `mu` and `classes` override the
/// builder's defaults and are required alongside `model`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<InstanceSpec>,
    /// Single document holding model, data law and classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub id: Algorithm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularizer: Option<Regularizer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl AlgorithmConfig {
    pub fn params(&self) -> AlgorithmParams {
        AlgorithmParams {
            alpha: self.alpha,
            regularizer: self.regularizer,
            b_w: self.b_w,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    #[default]
    Finite,
    Gda,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub mode: SolverMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gda: Option<GdaSettings>,
}

/// Gradient-mode settings; unset fields take the solver defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdaSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size_primal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size_dual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<usize>,
}

impl GdaSettings {
    pub fn resolve(&self) -> GdaConfig {
        let d = GdaConfig::default();
        GdaConfig {
            steps: self.steps.unwrap_or(d.steps),
            step_size_primal: self.step_size_primal.unwrap_or(d.step_size_primal),
            step_size_dual: self.step_size_dual.unwrap_or(d.step_size_dual),
            averaging: self.averaging.unwrap_or(d.averaging),
            tol: self.tol.unwrap_or(d.tol),
            probe_levels: self.probe_levels.unwrap_or(d.probe_levels),
            checkpoints: self.checkpoints.unwrap_or(d.checkpoints),
        }
    }
}

/// Dataset sizes; `n0` and `nm` default to `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nm: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub offline: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
}

fn default_gamma() -> f64 {
    0.9
}
fn default_fig_alpha() -> f64 {
    0.01
}
fn default_prop1_n() -> usize {
    100
}
fn default_prop1_trials() -> usize {
    10_000
}
fn default_large_alpha() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    Figure1 {
        #[serde(default = "default_gamma")]
        gamma: f64,
        #[serde(default = "default_fig_alpha")]
        alpha: f64,
    },
    Prop1 {
        #[serde(default = "default_prop1_n")]
        n: usize,
        #[serde(default = "default_prop1_trials")]
        trials: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alm_n: Option<usize>,
    },
    Prop2Feasible {
        instance: InstanceSpec,
        n_grid: Vec<usize>,
        trials: usize,
    },
    Prop3 {
        regime: Regime,
        #[serde(default = "default_large_alpha")]
        alpha: f64,
        n_grid: Vec<usize>,
        trials: usize,
    },
    Rate {
        algorithm: AlgorithmConfig,
        instance: InstanceSpec,
        n_grid: Vec<usize>,
        trials: usize,
    },
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        io::parse_json(text, origin)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        io::read_json(path)
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn sizes(&self) -> CliResult<Sizes> {
        let s = self.sizes.ok_or_else(|| CliError::config("sizes", "missing dataset sizes"))?;
        if s.n == 0 {
            return Err(CliError::config("sizes.n", "must be at least 1"));
        }
        if s.n0 == Some(0) {
            return Err(CliError::config("sizes.n0", "must be at least 1"));
        }
        if s.nm == Some(0) {
            return Err(CliError::config("sizes.nm", "must be at least 1"));
        }
        Ok(s)
    }

    pub fn algorithm(&self) -> CliResult<&AlgorithmConfig> {
        self.algorithm
            .as_ref()
            .ok_or_else(|| CliError::config("algorithm", "missing algorithm"))
    }

    /// Resolves the instance; builders that depend on the sample size use
    /// `sizes.n` when present.
    pub fn resolve_instance(&self) -> CliResult<Instance> {
        let ic = self
            .instance
            .as_ref()
            .ok_or_else(|| CliError::config("instance", "missing instance"))?;
        let sources = [ic.builtin.is_some(), ic.file.is_some(), ic.model.is_some()];
        if sources.iter().filter(|&&b| b).count() != 1 {
            return Err(CliError::config(
                "instance",
                "exactly one of builtin, file or model must be given",
            ));
        }
        let mut inst = if let Some(spec) = &ic.builtin {
            let n = self.sizes.map_or(1000, |s| s.n);
            spec.build(n).map_err(|e| CliError::from_core("instance.builtin", e))?
        } else if let Some(path) = &ic.file {
            check_exists("instance.file", path)?;
            let f: InstanceFile = io::read_json(path)?;
            instance_from_parts(&f.name, &f.model, &f.mu, &f.classes, "instance.file")?
        } else {
            let model_path = ic.model.as_ref().expect("counted above");
            let mu_path = ic
                .mu
                .as_ref()
                .ok_or_else(|| CliError::config("instance.mu", "required with instance.model"))?;
            let classes_path = ic
                .classes
                .as_ref()
                .ok_or_else(|| CliError::config("instance.classes", "required with instance.model"))?;
            for (field, p) in [("instance.model", model_path), ("instance.mu", mu_path), ("instance.classes", classes_path)] {
                check_exists(field, p)?;
            }
            let m: ModelFile = io::read_json(model_path)?;
            let mu: MuFile = io::read_json(mu_path)?;
            let c: ClassFile = io::read_json(classes_path)?;
            return instance_from_parts("file", &m, &mu, &c, "instance");
        };
        if let Some(p) = &ic.mu {
            check_exists("instance.mu", p)?;
            let mu: MuFile = io::read_json(p)?;
            inst.mu = mu.to_mu().map_err(|e| CliError::from_core("instance.mu", e))?;
        }
        if let Some(p) = &ic.classes {
            check_exists("instance.classes", p)?;
            let c: ClassFile = io::read_json(p)?;
            inst.classes = c
                .to_classes(inst.model.n_states(), inst.model.n_actions())
                .map_err(|e| CliError::from_core("instance.classes", e))?;
        }
        if inst.mu.n_states() != inst.model.n_states() || inst.mu.n_actions() != inst.model.n_actions() {
            return Err(CliError::config("instance.mu", "shape does not match the model"));
        }
        Ok(inst)
    }

    /// Checks that the algorithm can run on the instance and its classes.
    pub fn check_compatibility(&self, inst: &Instance) -> CliResult<()> {
        let alg = self.algorithm()?;
        check_algorithm(alg, "algorithm", inst)
    }

    pub fn gda(&self) -> GdaConfig {
        self.solver.gda.clone().unwrap_or_default().resolve()
    }
}

pub fn check_exists(field: &str, path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::config(field, format!("file {} does not exist", path.display())))
    }
}

fn instance_from_parts(name: &str, m: &ModelFile, mu: &MuFile, c: &ClassFile, field: &str) -> CliResult<Instance> {
    let model = m.to_model().map_err(|e| CliError::from_core(format!("{field}.model"), e))?;
    let mu = mu.to_mu().map_err(|e| CliError::from_core(format!("{field}.mu"), e))?;
    let classes: ClassSet = c
        .to_classes(model.n_states(), model.n_actions())
        .map_err(|e| CliError::from_core(format!("{field}.classes"), e))?;
    if mu.n_states() != model.n_states() || mu.n_actions() != model.n_actions() {
        return Err(CliError::config(format!("{field}.mu"), "shape does not match the model"));
    }
    Ok(Instance {
        name: name.to_string(),
        model,
        mu,
        classes,
        regularizer: None,
        alpha: None,
    })
}

/// Algorithm-versus-instance checks shared by solve and rate sweeps.
pub fn check_algorithm(alg: &AlgorithmConfig, field: &str, inst: &Instance) -> CliResult<()> {
    let id = alg.id;
    if let Some(a) = alg.alpha {
        if !(a >= 0.0) || !a.is_finite() {
            return Err(CliError::config(format!("{field}.alpha"), "must be a finite nonnegative number"));
        }
    }
    if let Some(b) = alg.b_w {
        if !(b > 0.0) || !b.is_finite() {
            return Err(CliError::config(format!("{field}.b_w"), "must be positive"));
        }
    }
    if let Some(d) = alg.delta {
        if !(d > 0.0 && d < 1.0) {
            return Err(CliError::config(format!("{field}.delta"), "must lie in (0, 1)"));
        }
    }
    let (ns, gamma) = (inst.model.n_states(), inst.model.discount());
    match id {
        Algorithm::ProMab | Algorithm::AlmMab if ns != 1 => Err(CliError::config(
            format!("{field}.id"),
            format!("{} needs a single-state instance, got {ns} states", id.as_str()),
        )),
        Algorithm::ProCb | Algorithm::AlmCb if gamma != 0.0 => Err(CliError::config(
            format!("{field}.id"),
            format!("{} needs a contextual bandit (discount 0), got {gamma}", id.as_str()),
        )),
        Algorithm::CoralMb | Algorithm::CoralMf if inst.classes.u.is_none() => Err(CliError::config(
            format!("{field}.id"),
            format!("{} needs an auxiliary class U", id.as_str()),
        )),
        Algorithm::CoralMf if inst.classes.z.is_none() => Err(CliError::config(
            format!("{field}.id"),
            "coral_mf needs a slope class Z",
        )),
        _ => Ok(()),
    }
}
