//! JSON and JSON-Lines file formats.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use coral_core::classes::{Bounds, ClassSet, FiniteClass, ModelClass};
use coral_core::data::{DataDistribution, InitialDataset, ModelDataset, ModelRecord, OfflineDataset, Transition};
use coral_core::model::{RewardKind, TabularModel};
use coral_core::solvers::{Diagnostics, SaddleSolution};
use coral_core::table::SaTable;

use crate::error::{CliError, CliResult};

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::config(path.display().to_string(), e))
}

/// Parses a JSON document, reporting the failing field path.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { origin.to_string() } else { format!("{origin}:{path}") };
        CliError::config(path, e.into_inner())
    })
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    parse_json(&read_text(path)?, &path.display().to_string())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let display = path.display().to_string();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::data(&display, e))?;
        }
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(&display, e))?;
    fs::write(path, text + "\n").map_err(|e| CliError::data(&display, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKindFile {
    Deterministic,
    Bernoulli,
}

impl From<RewardKind> for RewardKindFile {
    fn from(k: RewardKind) -> Self {
        match k {
            RewardKind::Deterministic => Self::Deterministic,
            RewardKind::Bernoulli => Self::Bernoulli,
        }
    }
}

impl From<RewardKindFile> for RewardKind {
    fn from(k: RewardKindFile) -> Self {
        match k {
            RewardKindFile::Deterministic => Self::Deterministic,
            RewardKindFile::Bernoulli => Self::Bernoulli,
        }
    }
}

/// Tabular model; `transitions` is indexed `[(s * A + a) * S + s']`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    pub initial: Vec<f64>,
    pub transitions: Vec<f64>,
    pub reward_means: Vec<f64>,
    pub reward_kinds: Vec<RewardKindFile>,
}

impl ModelFile {
    pub fn from_model(m: &TabularModel) -> Self {
        Self {
            n_states: m.n_states(),
            n_actions: m.n_actions(),
            discount: m.discount(),
            initial: m.initial().to_vec(),
            transitions: m.transitions().to_vec(),
            reward_means: m.reward_means().to_vec(),
            reward_kinds: m.reward_kinds().iter().map(|&k| k.into()).collect(),
        }
    }

    pub fn to_model(&self) -> coral_core::Result<TabularModel> {
        TabularModel::new(
            self.n_states,
            self.n_actions,
            self.transitions.clone(),
            self.reward_means.clone(),
            self.reward_kinds.iter().map(|&k| k.into()).collect(),
            self.initial.clone(),
            self.discount,
        )
    }
}

/// Data distribution as a row-major joint table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub joint: Vec<f64>,
}

impl MuFile {
    pub fn from_mu(mu: &DataDistribution) -> Self {
        Self {
            n_states: mu.n_states(),
            n_actions: mu.n_actions(),
            joint: mu.joint().values.clone(),
        }
    }

    pub fn to_mu(&self) -> coral_core::Result<DataDistribution> {
        DataDistribution::new(SaTable::new(self.n_states, self.n_actions, self.joint.clone())?)
    }
}

/// Finite class: shared box plus flattened members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteClassFile {
    pub lower: f64,
    pub upper: f64,
    pub members: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelClassFile {
    Tabular,
    Finite { members: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassFile {
    pub w: FiniteClassFile,
    pub v: FiniteClassFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<FiniteClassFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<FiniteClassFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<ModelClassFile>,
}

fn table_class_file(c: &FiniteClass<SaTable>) -> FiniteClassFile {
    FiniteClassFile {
        lower: c.bounds().lower,
        upper: c.bounds().upper,
        members: c.members().iter().map(|m| m.values.clone()).collect(),
    }
}

fn table_class(
    name: &'static str,
    f: &FiniteClassFile,
    ns: usize,
    na: usize,
) -> coral_core::Result<FiniteClass<SaTable>> {
    let members = f
        .members
        .iter()
        .map(|m| SaTable::new(ns, na, m.clone()))
        .collect::<coral_core::Result<Vec<_>>>()?;
    FiniteClass::new(name, members, Bounds::new(f.lower, f.upper)?)
}

impl ClassFile {
    pub fn from_classes(c: &ClassSet) -> Self {
        Self {
            w: table_class_file(&c.w),
            v: FiniteClassFile {
                lower: c.v.bounds().lower,
                upper: c.v.bounds().upper,
                members: c.v.members().to_vec(),
            },
            u: c.u.as_ref().map(table_class_file),
            z: c.z.as_ref().map(table_class_file),
            p: c.p.as_ref().map(|p| match p {
                ModelClass::Tabular => ModelClassFile::Tabular,
                ModelClass::Finite(m) => ModelClassFile::Finite { members: m.clone() },
            }),
        }
    }

    pub fn to_classes(&self, ns: usize, na: usize) -> coral_core::Result<ClassSet> {
        let v = FiniteClass::new("V", self.v.members.clone(), Bounds::new(self.v.lower, self.v.upper)?)?;
        let mut set = ClassSet::new(table_class("W", &self.w, ns, na)?, v);
        set.u = self.u.as_ref().map(|f| table_class("U", f, ns, na)).transpose()?;
        set.z = self.z.as_ref().map(|f| table_class("Z", f, ns, na)).transpose()?;
        set.p = self.p.as_ref().map(|p| match p {
            ModelClassFile::Tabular => ModelClass::Tabular,
            ModelClassFile::Finite { members } => ModelClass::Finite(members.clone()),
        });
        set.check_shape(ns, na)?;
        Ok(set)
    }
}

/// Model, data law and classes in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub name: String,
    pub model: ModelFile,
    pub mu: MuFile,
    pub classes: ClassFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Offline,
    Initial,
    Model,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Offline => "offline",
            DatasetKind::Initial => "initial",
            DatasetKind::Model => "model",
        }
    }
}

/// First line of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub kind: DatasetKind,
    pub seed: u64,
    pub n: usize,
    /// Hex SHA-256 of the record lines, each terminated by `\n`.
    pub digest: String,
    /// Hash of the generating model and data law (offline data only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionLine {
    s: usize,
    a: usize,
    r: f64,
    sn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelLine {
    s: usize,
    a: usize,
    sn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialLine {
    s: usize,
}

pub fn digest_lines(lines: &[String]) -> String {
    let mut h = Sha256::new();
    for l in lines {
        h.update(l.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

fn render(header: DatasetHeader, lines: Vec<String>) -> String {
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

fn encode<T: Serialize>(
    kind: DatasetKind,
    seed: u64,
    source: Option<u64>,
    records: impl Iterator<Item = T>,
) -> CliResult<String> {
    let lines: Vec<String> = records
        .map(|r| serde_json::to_string(&r).map_err(|e| CliError::data(kind.as_str(), e)))
        .collect::<CliResult<_>>()?;
    let header = DatasetHeader {
        kind,
        seed,
        n: lines.len(),
        digest: digest_lines(&lines),
        source,
    };
    Ok(render(header, lines))
}

pub fn encode_offline(d: &OfflineDataset) -> CliResult<String> {
    encode(
        DatasetKind::Offline,
        d.seed,
        Some(d.source_hash),
        d.records.iter().map(|t| TransitionLine {
            s: t.s,
            a: t.a,
            r: t.r,
            sn: t.sn,
        }),
    )
}

pub fn encode_initial(d: &InitialDataset) -> CliResult<String> {
    encode(DatasetKind::Initial, d.seed, None, d.states.iter().map(|&s| InitialLine { s }))
}

pub fn encode_model(d: &ModelDataset) -> CliResult<String> {
    encode(
        DatasetKind::Model,
        d.seed,
        None,
        d.records.iter().map(|m| ModelLine { s: m.s, a: m.a, sn: m.sn }),
    )
}

/// Splits a dataset file into its header and record lines, checking the
/// kind, the record count and the digest.
fn decode<T: for<'de> Deserialize<'de>>(
    text: &str,
    origin: &str,
    kind: DatasetKind,
) -> CliResult<(DatasetHeader, Vec<T>)> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| CliError::data(format!("{origin}:1"), "missing header line"))?;
    let header: DatasetHeader =
        serde_json::from_str(first).map_err(|e| CliError::data(format!("{origin}:1"), format!("bad header: {e}")))?;
    if header.kind != kind {
        return Err(CliError::data(
            format!("{origin}:1"),
            format!("expected a {} dataset, found {}", kind.as_str(), header.kind.as_str()),
        ));
    }
    let mut raw = Vec::new();
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let rec: T = serde_json::from_str(line)
            .map_err(|e| CliError::data(format!("{origin}:{}", i + 2), format!("malformed record: {e}")))?;
        records.push(rec);
        raw.push(line.to_string());
    }
    if records.len() != header.n {
        return Err(CliError::data(
            origin,
            format!("header declares {} records, found {}", header.n, records.len()),
        ));
    }
    if digest_lines(&raw) != header.digest {
        return Err(CliError::data(origin, "content digest mismatch"));
    }
    Ok((header, records))
}

pub fn decode_offline(text: &str, origin: &str) -> CliResult<OfflineDataset> {
    let (h, recs) = decode::<TransitionLine>(text, origin, DatasetKind::Offline)?;
    for (i, r) in recs.iter().enumerate() {
        if !(0.0..=1.0).contains(&r.r) {
            return Err(CliError::data(format!("{origin}:{}", i + 2), format!("reward {} outside [0, 1]", r.r)));
        }
    }
    Ok(OfflineDataset {
        records: recs
            .into_iter()
            .map(|r| Transition {
                s: r.s,
                a: r.a,
                r: r.r,
                sn: r.sn,
            })
            .collect(),
        seed: h.seed,
        source_hash: h.source.unwrap_or(0),
    })
}

pub fn decode_initial(text: &str, origin: &str) -> CliResult<InitialDataset> {
    let (h, recs) = decode::<InitialLine>(text, origin, DatasetKind::Initial)?;
    Ok(InitialDataset {
        states: recs.into_iter().map(|r| r.s).collect(),
        seed: h.seed,
    })
}

pub fn decode_model(text: &str, origin: &str) -> CliResult<ModelDataset> {
    let (h, recs) = decode::<ModelLine>(text, origin, DatasetKind::Model)?;
    Ok(ModelDataset {
        records: recs
            .into_iter()
            .map(|r| ModelRecord { s: r.s, a: r.a, sn: r.sn })
            .collect(),
        seed: h.seed,
    })
}

fn read_dataset(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::data(path.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let display = path.display().to_string();
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::data(&display, e))?;
        }
    }
    fs::write(path, text).map_err(|e| CliError::data(&display, e))
}

pub fn save_offline(d: &OfflineDataset, path: &Path) -> CliResult<()> {
    write_text(path, &encode_offline(d)?)
}

pub fn load_offline(path: &Path) -> CliResult<OfflineDataset> {
    decode_offline(&read_dataset(path)?, &path.display().to_string())
}

pub fn save_initial(d: &InitialDataset, path: &Path) -> CliResult<()> {
    write_text(path, &encode_initial(d)?)
}

pub fn load_initial(path: &Path) -> CliResult<InitialDataset> {
    decode_initial(&read_dataset(path)?, &path.display().to_string())
}

pub fn save_model_data(d: &ModelDataset, path: &Path) -> CliResult<()> {
    write_text(path, &encode_model(d)?)
}

pub fn load_model_data(path: &Path) -> CliResult<ModelDataset> {
    decode_model(&read_dataset(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicesFile {
    pub w: usize,
    pub v: usize,
    pub u: usize,
    pub z: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub transitions: Vec<f64>,
    pub index: Option<usize>,
    pub log_likelihood: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracePointFile {
    pub step: usize,
    pub value: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiagnosticsFile {
    Finite {
        member_values: Vec<f64>,
    },
    Gradient {
        steps_run: usize,
        gap: f64,
        converged: bool,
        trace: Vec<TracePointFile>,
    },
}

/// Saddle solution with the induced policy table and the run's config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub algorithm: String,
    pub n_states: usize,
    pub n_actions: usize,
    pub objective_value: f64,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(default)]
    pub u: Option<Vec<f64>>,
    #[serde(default)]
    pub zeta: Option<Vec<f64>>,
    #[serde(default)]
    pub indices: Option<IndicesFile>,
    /// Row-major `pi(a | s)`.
    pub policy: Vec<Vec<f64>>,
    #[serde(default)]
    pub p_hat: Option<FitFile>,
    pub diagnostics: DiagnosticsFile,
    pub master_seed: u64,
    pub config: serde_json::Value,
}

impl SolutionFile {
    pub fn from_solution(algorithm: &str, sol: &SaddleSolution, master_seed: u64, config: serde_json::Value) -> Self {
        let (ns, na) = (sol.policy.n_states(), sol.policy.n_actions());
        Self {
            algorithm: algorithm.to_string(),
            n_states: ns,
            n_actions: na,
            objective_value: sol.objective_value,
            w: sol.w.values.clone(),
            v: sol.v.clone(),
            u: sol.u.as_ref().map(|t| t.values.clone()),
            zeta: sol.zeta.as_ref().map(|t| t.values.clone()),
            indices: sol.indices.map(|c| IndicesFile {
                w: c.w,
                v: c.v,
                u: c.u,
                z: c.z,
            }),
            policy: (0..ns).map(|s| sol.policy.row(s).to_vec()).collect(),
            p_hat: sol.p_hat.as_ref().map(|f| FitFile {
                transitions: f.transitions.clone(),
                index: f.index,
                log_likelihood: f.log_likelihood,
            }),
            diagnostics: match &sol.diagnostics {
                Diagnostics::Finite { member_values } => DiagnosticsFile::Finite {
                    member_values: member_values.clone(),
                },
                Diagnostics::Gradient {
                    steps_run,
                    gap,
                    converged,
                    trace,
                } => DiagnosticsFile::Gradient {
                    steps_run: *steps_run,
                    gap: *gap,
                    converged: *converged,
                    trace: trace
                        .iter()
                        .map(|t| TracePointFile {
                            step: t.step,
                            value: t.value,
                            gap: t.gap,
                        })
                        .collect(),
                },
            },
            master_seed,
            config,
        }
    }

    pub fn policy(&self) -> coral_core::Result<coral_core::model::Policy> {
        coral_core::model::Policy::new(self.n_states, self.n_actions, self.policy.concat())
    }
}

/// Result of scoring a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub subopt: f64,
    pub j_star: f64,
    pub j_policy: f64,
    pub master_seed: u64,
    pub config: serde_json::Value,
}
