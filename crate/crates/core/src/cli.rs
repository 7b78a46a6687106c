//! Command-line pipeline: configuration, subcommands, artifacts and
//! manifests. The `hpi` binary is a thin wrapper around [`run`].
//!
//! Every command reads a TOML [`RunConfig`], writes its outputs under the
//! configured output directory and finishes with a manifest listing the
//! config hash, seed, timestamps and the SHA-256 of each input and output.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{self, DbscanParams};
use crate::cv::{self, Dataset, FittedEntry, GridSpec, ModelKind, NestedCvOptions, Pipeline};
use crate::data::{self, ColumnMap, Metal, SampleTable, Standardiser, StandardsTable};
use crate::error::{Error, Result};
use crate::hpi;
use crate::metrics::{self, KsReference, MetricsReport};
use crate::rank;
use crate::spatial::{self, GridField, GridGeometry, Polygon, RfSpec};
use crate::synth;
use crate::transform::{FittedTransform, TransformKind};

pub const ENV_PREFIX: &str = "HPI_";

pub const EXIT_GENERIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_HASH: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridChoice {
    #[default]
    Reference,
    Quick,
}

impl GridChoice {
    pub fn spec(self) -> GridSpec {
        match self {
            GridChoice::Reference => GridSpec::default(),
            GridChoice::Quick => GridSpec::quick(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    pub eps: f64,
    pub min_samples: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        let d = DbscanParams::default();
        ClusterConfig {
            eps: d.eps,
            min_samples: d.min_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub polygon: Option<PathBuf>,
    pub nx: usize,
    pub ny: usize,
    pub n_trees: usize,
    pub cv_folds: usize,
    /// Samples with known HPI used to score the maps.
    pub holdout: Option<PathBuf>,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            polygon: None,
            nx: 400,
            ny: 400,
            n_trees: RfSpec::default().n_trees,
            cv_folds: 5,
            holdout: None,
        }
    }
}

/// Run configuration. Relative paths are resolved against the directory of
/// the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: PathBuf,
    /// Standards TOML; WHO guideline values when absent.
    pub standards: Option<PathBuf>,
    pub out: PathBuf,
    pub transform: TransformKind,
    pub models: Vec<ModelKind>,
    pub seed: u64,
    pub k_out: usize,
    pub k_in: usize,
    /// Permutations for the Spearman test.
    pub permutations: usize,
    pub grid: GridChoice,
    /// Samples scored by `evaluate`; defaults to `map.holdout`, then `input`.
    pub evaluate_input: Option<PathBuf>,
    pub cluster: ClusterConfig,
    pub map: MapConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut models = vec![ModelKind::Mean];
        models.extend(ModelKind::REPORTED);
        RunConfig {
            input: "samples.csv".into(),
            standards: None,
            out: "out".into(),
            transform: TransformKind::Copula,
            models,
            seed: 42,
            k_out: 5,
            k_in: 5,
            permutations: 10_000,
            grid: GridChoice::Reference,
            evaluate_input: None,
            cluster: ClusterConfig::default(),
            map: MapConfig::default(),
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Hash of the configuration as written, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        sha256_hex(&serde_json::to_vec(&c).expect("config serialises"))
    }
}

/// Loaded configuration with paths resolved.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub hash: String,
    base: PathBuf,
}

impl Resolved {
    pub fn new(config: RunConfig, base: impl Into<PathBuf>) -> Result<Self> {
        let r = Resolved {
            hash: config.hash(),
            config,
            base: base.into(),
        };
        r.validate()?;
        Ok(r)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::from_toml_str(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })?;
        overrides.apply(&mut config);
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Resolved::new(config, base)
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path(&self.config.out)
    }

    fn validate(&self) -> Result<()> {
        let c = &self.config;
        let mut paths = vec![
            ("input", Some(&c.input)),
            ("standards", c.standards.as_ref()),
        ];
        paths.push(("map.polygon", c.map.polygon.as_ref()));
        paths.push(("map.holdout", c.map.holdout.as_ref()));
        paths.push(("evaluate_input", c.evaluate_input.as_ref()));
        for (name, p) in paths {
            if let Some(p) = p {
                if !self.path(p).is_file() {
                    return Err(Error::InvalidArgument(format!(
                        "{name}: file {} not found",
                        self.path(p).display()
                    )));
                }
            }
        }
        if c.models.is_empty() {
            return Err(Error::InvalidArgument(
                "models: at least one model is required".into(),
            ));
        }
        if c.k_out < 2 || c.k_in < 2 {
            return Err(Error::InvalidArgument("k_out and k_in must be >= 2".into()));
        }
        if c.map.nx == 0 || c.map.ny == 0 || c.map.n_trees == 0 || c.map.cv_folds < 2 {
            return Err(Error::InvalidArgument(
                "map: nx, ny and n_trees must be > 0 and cv_folds >= 2".into(),
            ));
        }
        Ok(())
    }

    fn samples(&self) -> Result<SampleTable> {
        data::load_samples(self.path(&self.config.input), &ColumnMap::default())
    }

    fn standards(&self) -> Result<StandardsTable> {
        match &self.config.standards {
            Some(p) => StandardsTable::load(self.path(p)),
            None => Ok(StandardsTable::who_default()),
        }
    }

    fn input_paths(&self) -> Vec<PathBuf> {
        let mut v = vec![self.path(&self.config.input)];
        v.extend(self.config.standards.as_ref().map(|p| self.path(p)));
        v
    }
}

/// Values from command-line flags or `HPI_*` environment variables that
/// replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub transform: Option<TransformKind>,
}

impl Overrides {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = &self.out {
            c.out = o.clone();
        }
        if let Some(t) = self.transform {
            c.transform = t;
        }
    }
}

// ---------------------------------------------------------------------------
// Artifacts and manifests

/// A JSON artifact stamped with the config hash it was produced under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub config_hash: String,
    pub seed: u64,
    pub payload: T,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub transform: TransformKind,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub inputs: Vec<FileHash>,
    pub artifacts: Vec<FileHash>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&text)?)
    }

    /// Re-hashes every listed input and artifact.
    pub fn verify(&self) -> Result<()> {
        for f in self.inputs.iter().chain(&self.artifacts) {
            if !f.path.is_file() {
                return Err(Error::MissingArtifact(f.path.clone()));
            }
            if file_sha256(&f.path)? != f.sha256 {
                return Err(Error::HashMismatch(format!(
                    "{} changed since it was recorded",
                    f.path.display()
                )));
            }
        }
        Ok(())
    }
}

fn now_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// Collects output files for one command run.
struct Run<'a> {
    cfg: &'a Resolved,
    command: String,
    started: u128,
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    artifacts: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn start(cfg: &'a Resolved, command: &str) -> Result<Self> {
        let dir = cfg.out_dir();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Run {
            cfg,
            command: command.to_string(),
            started: now_ms(),
            dir,
            inputs: cfg.input_paths(),
            artifacts: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<fs::File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.artifacts.push(path);
        Ok(BufWriter::new(f))
    }

    fn json<T: Serialize>(&mut self, name: &str, payload: &T) -> Result<()> {
        let art = Artifact {
            config_hash: self.cfg.hash.clone(),
            seed: self.cfg.config.seed,
            payload,
        };
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &art)?;
        w.write_all(b"\n").map_err(|e| Error::io(name, e))?;
        w.flush().map_err(|e| Error::io(name, e))
    }

    fn finish(self) -> Result<PathBuf> {
        let hash_all = |v: &[PathBuf]| -> Result<Vec<FileHash>> {
            v.iter()
                .map(|p| {
                    Ok(FileHash {
                        path: p.clone(),
                        sha256: file_sha256(p)?,
                    })
                })
                .collect()
        };
        let m = Manifest {
            command: self.command.clone(),
            config_hash: self.cfg.hash.clone(),
            seed: self.cfg.config.seed,
            transform: self.cfg.config.transform,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            inputs: hash_all(&self.inputs)?,
            artifacts: hash_all(&self.artifacts)?,
        };
        let path = self.dir.join(format!("manifest_{}.json", self.command));
        let text = serde_json::to_vec_pretty(&m)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Reads a JSON artifact and checks it was produced under `hash`.
pub fn read_artifact<T: DeserializeOwned>(path: &Path, hash: &str) -> Result<Artifact<T>> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let art: Artifact<T> = serde_json::from_slice(&bytes)?;
    if art.config_hash != hash {
        return Err(Error::HashMismatch(format!(
            "{} was produced under config {} but the current config is {}",
            path.display(),
            art.config_hash,
            hash
        )));
    }
    Ok(art)
}

// ---------------------------------------------------------------------------
// describe

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1).
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

/// Quantile by linear interpolation between order statistics at position
/// `p (n − 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarise(values: &[f64]) -> Result<ColumnSummary> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Empty("no values to summarise".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let mean = s.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(ColumnSummary {
        count: n,
        mean,
        std,
        min: s[0],
        q25: quantile(&s, 0.25),
        q50: quantile(&s, 0.5),
        q75: quantile(&s, 0.75),
        max: s[n - 1],
    })
}

pub fn describe(table: &SampleTable) -> Result<BTreeMap<Metal, ColumnSummary>> {
    Metal::ALL
        .iter()
        .map(|&m| {
            Ok((
                m,
                summarise(table.column(m).as_slice().expect("owned column"))?,
            ))
        })
        .collect()
}

pub fn write_describe_csv<W: Write>(summary: &BTreeMap<Metal, ColumnSummary>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["statistic".to_string()];
    header.extend(summary.keys().map(|m| m.to_string()));
    out.write_record(&header)?;
    type Row = (&'static str, fn(&ColumnSummary) -> f64);
    let rows: [Row; 8] = [
        ("count", |s| s.count as f64),
        ("mean", |s| s.mean),
        ("std", |s| s.std),
        ("min", |s| s.min),
        ("25%", |s| s.q25),
        ("50%", |s| s.q50),
        ("75%", |s| s.q75),
        ("max", |s| s.max),
    ];
    for (name, get) in rows {
        let mut rec = vec![name.to_string()];
        rec.extend(summary.values().map(|s| get(s).to_string()));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<describe csv>", e))
}

pub fn cmd_describe(cfg: &Resolved) -> Result<PathBuf> {
    let mut run = Run::start(cfg, "describe")?;
    let summary = describe(&cfg.samples()?)?;
    let w = run.create("describe.csv")?;
    write_describe_csv(&summary, w)?;
    run.json("describe.json", &summary)?;
    run.finish()
}

// ---------------------------------------------------------------------------
// correlate, hpi, cluster

pub fn cmd_correlate(cfg: &Resolved) -> Result<PathBuf> {
    let mut run = Run::start(cfg, "correlate")?;
    let report =
        rank::correlation_matrix(&cfg.samples()?, cfg.config.permutations, cfg.config.seed)?;
    run.json("correlation.json", &report)?;
    let mut out = csv::Writer::from_writer(run.create("correlation_rho.csv")?);
    let mut header = vec!["metal".to_string()];
    header.extend(report.metals.iter().map(|m| m.to_string()));
    out.write_record(&header)?;
    for (i, m) in report.metals.iter().enumerate() {
        let mut rec = vec![m.to_string()];
        rec.extend(report.rho[i].iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()
        .map_err(|e| Error::io("correlation_rho.csv", e))?;
    drop(out);
    run.finish()
}

pub fn cmd_hpi(cfg: &Resolved) -> Result<PathBuf> {
    let mut run = Run::start(cfg, "hpi")?;
    let table = cfg.samples()?;
    let values = hpi::hpi_column(&table, &cfg.standards()?)?;
    let w = run.create("hpi.csv")?;
    hpi::write_hpi_csv(&table, &values, w)?;
    run.finish()
}

pub fn cmd_cluster(cfg: &Resolved) -> Result<PathBuf> {
    let mut run = Run::start(cfg, "cluster")?;
    let table = cfg.samples()?;
    let params = DbscanParams {
        eps: cfg.config.cluster.eps,
        min_samples: cfg.config.cluster.min_samples,
    };
    let res = cluster::dominance(&table, params, None)?;
    run.json("cluster.json", &res)?;
    let w = run.create("cluster_labels.csv")?;
    res.write_labels_csv(&table.ids, w)?;
    let w = run.create("cluster_centroids.csv")?;
    res.write_centroids_csv(w)?;
    run.finish()
}

// ---------------------------------------------------------------------------
// train, evaluate

/// Deployable models sharing one standardiser; the response transform is
/// stored as a separate artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeployedModels {
    pub transform: TransformKind,
    pub standardiser: Standardiser,
    pub entries: Vec<FittedEntry>,
}

impl DeployedModels {
    pub fn pipelines(&self, transform: &FittedTransform) -> Result<Vec<(ModelKind, Pipeline)>> {
        if transform.kind() != self.transform {
            return Err(Error::HashMismatch(format!(
                "models expect a {} transform, got {}",
                self.transform,
                transform.kind()
            )));
        }
        Ok(self
            .entries
            .iter()
            .map(|e| {
                (
                    e.kind,
                    Pipeline {
                        standardiser: self.standardiser.clone(),
                        transform: transform.clone(),
                        model: e.model.clone(),
                    },
                )
            })
            .collect())
    }
}

pub fn models_file(t: TransformKind) -> String {
    format!("models_{t}.json")
}

pub fn transform_file(t: TransformKind) -> String {
    format!("transform_{t}.json")
}

fn hpi_dataset(table: &SampleTable, standards: &StandardsTable) -> Result<Dataset> {
    let y = hpi::hpi_column(table, standards)?;
    Dataset::new(table.metals.clone(), y, data::metal_names())
}

fn metrics_table(rows: Vec<(String, MetricsReport)>, run: &mut Run<'_>, name: &str) -> Result<()> {
    let w = run.create(name)?;
    metrics::write_metrics_csv(&rows, w)
}

pub fn cmd_train(cfg: &Resolved) -> Result<PathBuf> {
    let c = &cfg.config;
    let t = c.transform;
    let mut run = Run::start(cfg, &format!("train_{t}"))?;
    let ds = hpi_dataset(&cfg.samples()?, &cfg.standards()?)?;
    let plan = cv::make_folds(ds.len(), c.k_out, c.k_in, c.seed)?;
    let opts = NestedCvOptions::new(t, &c.models, c.grid.spec());
    let report = cv::nested_cv(&ds, &plan, &opts, None)?;
    run.json(&format!("cv_{t}.json"), &report)?;
    let name = |m: &cv::ModelCvResult| m.model.name().to_string();
    metrics_table(
        report
            .models
            .iter()
            .map(|m| (name(m), m.pooled.clone()))
            .collect(),
        &mut run,
        &format!("metrics_{t}.csv"),
    )?;
    metrics_table(
        report
            .models
            .iter()
            .map(|m| (name(m), m.pooled_transformed.clone()))
            .collect(),
        &mut run,
        &format!("metrics_{t}_transformed.csv"),
    )?;
    metrics_table(
        report
            .models
            .iter()
            .map(|m| (name(m), m.fold_averaged.clone()))
            .collect(),
        &mut run,
        &format!("metrics_{t}_fold_averaged.csv"),
    )?;
    let set = cv::fit_final(&ds, &opts, c.k_in, c.seed, None)?;
    run.json(
        &models_file(t),
        &DeployedModels {
            transform: t,
            standardiser: set.standardiser,
            entries: set.entries,
        },
    )?;
    run.json(&transform_file(t), &set.transform)?;
    run.finish()
}

/// Named pipelines plus the artifact paths they were read from.
pub type LoadedPipelines = (Vec<(ModelKind, Pipeline)>, Vec<PathBuf>);

/// Loads the deployable models and transform for the configured transform,
/// refusing artifacts from another configuration.
pub fn load_pipelines(cfg: &Resolved) -> Result<LoadedPipelines> {
    let t = cfg.config.transform;
    let dir = cfg.out_dir();
    let mp = dir.join(models_file(t));
    let tp = dir.join(transform_file(t));
    let models: Artifact<DeployedModels> = read_artifact(&mp, &cfg.hash)?;
    let transform: Artifact<FittedTransform> = read_artifact(&tp, &cfg.hash)?;
    Ok((models.payload.pipelines(&transform.payload)?, vec![mp, tp]))
}

pub fn cmd_evaluate(cfg: &Resolved) -> Result<PathBuf> {
    let c = &cfg.config;
    let t = c.transform;
    let mut run = Run::start(cfg, &format!("evaluate_{t}"))?;
    let (pipes, used) = load_pipelines(cfg)?;
    run.inputs.extend(used);
    let path = c
        .evaluate_input
        .as_ref()
        .or(c.map.holdout.as_ref())
        .unwrap_or(&c.input);
    let path = cfg.path(path);
    run.inputs.push(path.clone());
    let table = data::load_samples(&path, &ColumnMap::default())?;
    let y = hpi::hpi_column(&table, &cfg.standards()?)?;
    let mut rows = Vec::new();
    let mut preds = BTreeMap::new();
    for (kind, pipe) in &pipes {
        let yhat = pipe.predict(table.metals.view())?;
        let k = pipe.model.effective_params();
        rows.push((
            kind.name().to_string(),
            metrics::full_report(&y, &yhat, data::METAL_COUNT, k, KsReference::Fitted)?,
        ));
        preds.insert(kind.name().to_string(), yhat);
    }
    run.json(&format!("evaluation_{t}.json"), &(&rows, &preds))?;
    metrics_table(rows, &mut run, &format!("evaluation_{t}.csv"))?;
    run.finish()
}

// ---------------------------------------------------------------------------
// map

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSummary {
    pub geometry: GridGeometry,
    pub cells_in_mask: usize,
    pub metal_grids: Vec<PathBuf>,
    pub hpi_grids: BTreeMap<String, PathBuf>,
    /// Grid RMSE per model against held-out samples, when configured.
    pub rmse: BTreeMap<String, spatial::GridRmse>,
}

pub fn metal_grid_file(m: Metal) -> String {
    format!("grids/metal_{m}.asc")
}

pub fn hpi_grid_file(t: TransformKind, kind: ModelKind) -> String {
    format!("grids/hpi_{t}_{}.asc", kind.name())
}

pub fn cmd_map(cfg: &Resolved) -> Result<PathBuf> {
    let c = &cfg.config;
    let t = c.transform;
    let mut run = Run::start(cfg, &format!("map_{t}"))?;
    let (pipes, used) = load_pipelines(cfg)?;
    run.inputs.extend(used);
    let poly_path = c
        .map
        .polygon
        .as_ref()
        .map(|p| cfg.path(p))
        .ok_or_else(|| Error::InvalidArgument("map.polygon is not configured".into()))?;
    run.inputs.push(poly_path.clone());
    let polygon = Polygon::load(&poly_path)?;
    let geometry = GridGeometry::covering(polygon.bbox(), c.map.nx, c.map.ny)?;
    let mask = geometry.mask(&polygon);
    let table = cfg.samples()?;
    let rf = RfSpec {
        n_trees: c.map.n_trees,
        max_features: None,
        seed: c.seed,
    };
    let mut grids = Vec::new();
    let mut metal_grids = Vec::new();
    for m in Metal::ALL {
        let g = spatial::interpolate_metal(&table, m, &rf, geometry, mask.clone())?;
        let name = metal_grid_file(m);
        g.write_ascii(run.create(&name)?)?;
        metal_grids.push(PathBuf::from(name));
        grids.push(g);
    }
    let interp = spatial::interpolation_report(&table, &rf, c.map.cv_folds, c.seed)?;
    run.json("interpolation.json", &interp)?;

    let holdout = match &c.map.holdout {
        Some(p) => {
            let p = cfg.path(p);
            run.inputs.push(p.clone());
            let h = data::load_samples(&p, &ColumnMap::default())?;
            let y = hpi::hpi_column(&h, &cfg.standards()?)?;
            Some((h.coords, y))
        }
        None => None,
    };
    let mut hpi_grids = BTreeMap::new();
    let mut rmse = BTreeMap::new();
    for (kind, pipe) in &pipes {
        let g = spatial::predict_hpi_grid(&grids, pipe)?;
        let name = hpi_grid_file(t, *kind);
        g.write_ascii(run.create(&name)?)?;
        hpi_grids.insert(kind.name().to_string(), PathBuf::from(name));
        if let Some((pts, y)) = &holdout {
            rmse.insert(kind.name().to_string(), spatial::grid_rmse(&g, pts, y)?);
        }
    }
    let summary = MapSummary {
        geometry,
        cells_in_mask: mask.iter().filter(|m| **m).count(),
        metal_grids,
        hpi_grids,
        rmse,
    };
    run.json(&format!("map_{t}.json"), &summary)?;
    run.finish()
}

/// Loads an ASCII grid written by `map`.
pub fn load_grid(path: &Path) -> Result<GridField> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    GridField::read_ascii(std::io::BufReader::new(f))
}

// ---------------------------------------------------------------------------
// synth

/// Writes the synthetic basin bundle: samples, held-out samples, polygon,
/// standards and a config pointing at them.
pub fn write_synthetic_bundle(dir: &Path, seed: u64, n: usize, holdout: usize) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let basin = synth::Basin::new(seed);
    let write = |name: &str, bytes: &[u8]| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))
    };
    let mut buf = Vec::new();
    data::write_samples(&basin.sample(n, 0, "GW")?, &mut buf)?;
    write("samples.csv", &buf)?;
    buf.clear();
    data::write_samples(&basin.sample(holdout, 1, "HO")?, &mut buf)?;
    write("holdout.csv", &buf)?;
    write("basin.poly", basin.polygon.to_text().as_bytes())?;
    write(
        "standards.toml",
        StandardsTable::who_default().to_toml_string().as_bytes(),
    )?;
    let config = RunConfig {
        input: "samples.csv".into(),
        standards: Some("standards.toml".into()),
        seed,
        map: MapConfig {
            polygon: Some("basin.poly".into()),
            holdout: Some("holdout.csv".into()),
            ..MapConfig::default()
        },
        ..RunConfig::default()
    };
    write("config.toml", config.to_toml_string().as_bytes())?;
    Ok(dir.join("config.toml"))
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch

#[derive(Debug, Parser)]
#[command(name = "hpi", version, about = "Heavy metal pollution index pipeline")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "HPI_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, env = "HPI_SEED")]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, env = "HPI_OUT")]
    pub out: Option<PathBuf>,
    /// Overrides the configured response transform: raw, log or copula.
    #[arg(long, global = true, env = "HPI_TRANSFORM")]
    pub transform: Option<TransformKind>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Summary statistics per metal.
    Describe,
    /// Spearman correlation matrix with t and permutation p-values.
    Correlate,
    /// Deterministic HPI per sample.
    Hpi,
    /// DBSCAN clusters and dominant metals.
    Cluster,
    /// Nested cross validation plus deployable models.
    Train,
    /// Scores trained models on a sample file.
    Evaluate,
    /// Interpolated metal grids and HPI maps from trained models.
    Map,
    /// Writes a synthetic dataset bundle into `--out`.
    Synth {
        #[arg(long, default_value_t = 96)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        holdout: usize,
    },
}

#[derive(Debug, Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MissingArtifact(_) => EXIT_MISSING,
        Error::HashMismatch(_) => EXIT_HASH,
        _ => EXIT_GENERIC,
    }
}

fn report(e: &Error, code: i32) -> i32 {
    let rec = ErrorRecord {
        error: e.kind(),
        message: e.to_string(),
        exit_code: code,
    };
    eprintln!(
        "{}",
        serde_json::to_string(&rec).expect("error record serialises")
    );
    code
}

/// Runs one parsed command; returns the manifest path.
pub fn execute(cli: &Cli) -> std::result::Result<PathBuf, (Error, i32)> {
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        transform: cli.transform,
    };
    if let Command::Synth { n, holdout } = cli.command {
        let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("data"));
        return write_synthetic_bundle(&dir, cli.seed.unwrap_or(42), n, holdout).map_err(|e| {
            let c = exit_code(&e);
            (e, c)
        });
    }
    let Some(path) = &cli.config else {
        return Err((
            Error::InvalidArgument("--config is required".into()),
            EXIT_USAGE,
        ));
    };
    let cfg = Resolved::load(path, &overrides).map_err(|e| (e, EXIT_USAGE))?;
    let result = match cli.command {
        Command::Describe => cmd_describe(&cfg),
        Command::Correlate => cmd_correlate(&cfg),
        Command::Hpi => cmd_hpi(&cfg),
        Command::Cluster => cmd_cluster(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Evaluate => cmd_evaluate(&cfg),
        Command::Map => cmd_map(&cfg),
        Command::Synth { .. } => unreachable!("handled above"),
    };
    result.map_err(|e| {
        let c = exit_code(&e);
        (e, c)
    })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            0
        }
        Err((e, code)) => report(&e, code),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let s = [1.0, 2.0, 4.0, 8.0];
        // positions 0.75, 1.5, 2.25
        assert_eq!(quantile(&s, 0.25), 1.75);
        assert_eq!(quantile(&s, 0.5), 3.0);
        assert_eq!(quantile(&s, 0.75), 5.0);
        assert_eq!(quantile(&s, 0.0), 1.0);
        assert_eq!(quantile(&s, 1.0), 8.0);
    }

    #[test]
    fn constant_column_has_zero_std() {
        let s = summarise(&[0.001; 5]).unwrap();
        assert_eq!(s.std, 0.0);
        assert_eq!(s.q50, 0.001);
        assert!(summarise(&[]).is_err());
    }

    #[test]
    fn config_round_trip_and_hash() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        let mut other = c.clone();
        other.out = "elsewhere".into();
        assert_eq!(other.hash(), c.hash());
        other.seed += 1;
        assert_ne!(other.hash(), c.hash());
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut c = RunConfig::default();
        Overrides {
            seed: Some(7),
            out: None,
            transform: Some(TransformKind::Log),
        }
        .apply(&mut c);
        assert_eq!((c.seed, c.transform), (7, TransformKind::Log));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::MissingArtifact("x".into())), EXIT_MISSING);
        assert_eq!(exit_code(&Error::HashMismatch("x".into())), EXIT_HASH);
        assert_eq!(exit_code(&Error::Empty("x".into())), EXIT_GENERIC);
        assert_eq!(run(["hpi", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["hpi", "describe"]), EXIT_USAGE);
    }
}
