//! End-to-end runs: ingest once, then per cohort features, clustering, shape
//! summaries, disparity tests, relative risks, relevance and projection.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::cluster::{
    adjusted_rand_index, elbow_select, elbow_seed, fit_model, pca_project, standardize_matrix, AssignmentRow,
    ClusterMethod, ClusterModel, ElbowResult, ModelReport, ProjectionRow, StandardizedMatrix,
};
use crate::error::{Error, Result};
use crate::features::{extract_with_cutoffs, BmiCutoffs, FeatureRow};
use crate::ingest::synth::read_truth_csv;
use crate::ingest::{
    build_cohort, build_trajectories, parse_statics, parse_visits, Cohort, CohortTarget, Disease, IngestReport,
    PatientStatic, Trajectory, VisitRecord, VisitSchema,
};
use crate::matrix::Matrix;
use crate::relevance::{cross_validate, tune, BoostParams, CvReport};
use crate::rng::substream;
use crate::shapes::{shape_summaries, ShapeOptions, ShapeSummary};
use crate::stats::{cluster_disparity_report, cluster_relative_risks, render_star_grid, ClusterRisk, DisparityReport, Variable};

/// Number of clusters: fixed, or chosen by the elbow scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KChoice {
    #[default]
    Auto,
    Fixed(usize),
}

impl fmt::Display for KChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KChoice::Auto => f.write_str("auto"),
            KChoice::Fixed(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for KChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KChoice::Auto);
        }
        s.parse()
            .map(KChoice::Fixed)
            .map_err(|_| Error::InvalidArgument(format!("k must be an integer or \"auto\", got {s:?}")))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KRepr {
    Fixed(usize),
    Text(String),
}

impl Serialize for KChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            KChoice::Auto => KRepr::Text("auto".into()),
            KChoice::Fixed(k) => KRepr::Fixed(*k),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match KRepr::deserialize(d)? {
            KRepr::Fixed(k) => Ok(KChoice::Fixed(k)),
            KRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `"all"` or an explicit list of disease codes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DiseaseSelection {
    #[default]
    All,
    List(Vec<Disease>),
}

impl DiseaseSelection {
    pub fn diseases(&self) -> Vec<Disease> {
        match self {
            DiseaseSelection::All => Disease::ALL.to_vec(),
            DiseaseSelection::List(v) => v.clone(),
        }
    }
}

impl FromStr for DiseaseSelection {
    type Err = Error;

    /// `all` or a comma-separated list of codes.
    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(DiseaseSelection::All);
        }
        let list = s
            .split(',')
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Disease>>>()?;
        Ok(DiseaseSelection::List(list))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SelectionRepr {
    List(Vec<Disease>),
    Text(String),
}

impl Serialize for DiseaseSelection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DiseaseSelection::All => SelectionRepr::Text("all".into()),
            DiseaseSelection::List(v) => SelectionRepr::List(v.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiseaseSelection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match SelectionRepr::deserialize(d)? {
            SelectionRepr::List(v) => Ok(DiseaseSelection::List(v)),
            SelectionRepr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn yes() -> bool {
    true
}
fn two() -> usize {
    2
}
fn ten() -> usize {
    10
}
fn five() -> usize {
    5
}
fn kmeans() -> ClusterMethod {
    ClusterMethod::KMeans
}
fn bmi_normal() -> f64 {
    18.5
}
fn bmi_overweight() -> f64 {
    25.0
}
fn bmi_obese() -> f64 {
    30.0
}
fn n_rounds() -> usize {
    BoostParams::default().n_rounds
}
fn learning_rate() -> f64 {
    BoostParams::default().learning_rate
}
fn max_depth() -> usize {
    BoostParams::default().max_depth
}
fn lambda() -> f64 {
    BoostParams::default().lambda
}
fn dba_max_iter() -> usize {
    crate::shapes::DBA_MAX_ITER
}

/// Run configuration. The JSON form is a flat object with these keys; any
/// key may be omitted except `visits`, `statics`, `seed` and `out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub visits: PathBuf,
    pub statics: PathBuf,
    /// Optional `patient_id,archetype` file; adds ARI against it per cohort.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub diseases: DiseaseSelection,
    /// Also run the combined cohort of patients with any of the diseases.
    #[serde(default = "yes")]
    pub any_disease: bool,
    pub seed: u64,
    #[serde(default)]
    pub k: KChoice,
    #[serde(default = "two")]
    pub k_min: usize,
    #[serde(default = "ten")]
    pub k_max: usize,
    #[serde(default = "kmeans")]
    pub method: ClusterMethod,
    #[serde(default = "bmi_normal")]
    pub bmi_normal: f64,
    #[serde(default = "bmi_overweight")]
    pub bmi_overweight: f64,
    #[serde(default = "bmi_obese")]
    pub bmi_obese: f64,
    #[serde(default = "n_rounds")]
    pub n_rounds: usize,
    #[serde(default = "learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "max_depth")]
    pub max_depth: usize,
    #[serde(default = "lambda")]
    pub lambda: f64,
    #[serde(default = "five")]
    pub folds: usize,
    /// Search the depth / learning-rate grid instead of using the fixed values.
    #[serde(default)]
    pub tune: bool,
    /// Yates continuity correction for 2x2 chi-squared tables.
    #[serde(default)]
    pub yates: bool,
    #[serde(default)]
    pub shape_target_len: Option<usize>,
    /// Weight length-group shapes by member count when averaging.
    #[serde(default = "yes")]
    pub shape_weight_by_group: bool,
    #[serde(default = "dba_max_iter")]
    pub shape_max_iter: usize,
    pub out: PathBuf,
    /// Cohorts processed concurrently; defaults to the number of CPUs.
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn new(visits: impl Into<PathBuf>, statics: impl Into<PathBuf>, out: impl Into<PathBuf>, seed: u64) -> Self {
        RunConfig {
            visits: visits.into(),
            statics: statics.into(),
            truth: None,
            diseases: DiseaseSelection::All,
            any_disease: true,
            seed,
            k: KChoice::Auto,
            k_min: 2,
            k_max: 10,
            method: ClusterMethod::KMeans,
            bmi_normal: bmi_normal(),
            bmi_overweight: bmi_overweight(),
            bmi_obese: bmi_obese(),
            n_rounds: n_rounds(),
            learning_rate: learning_rate(),
            max_depth: max_depth(),
            lambda: lambda(),
            folds: 5,
            tune: false,
            yates: false,
            shape_target_len: None,
            shape_weight_by_group: true,
            shape_max_iter: dba_max_iter(),
            out: out.into(),
            jobs: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn cutoffs(&self) -> BmiCutoffs<f64> {
        BmiCutoffs {
            normal: self.bmi_normal,
            overweight: self.bmi_overweight,
            obese: self.bmi_obese,
        }
    }

    pub fn boost_params(&self) -> BoostParams {
        BoostParams {
            n_rounds: self.n_rounds,
            learning_rate: self.learning_rate,
            max_depth: self.max_depth,
            lambda: self.lambda,
            ..BoostParams::default()
        }
    }

    pub fn shape_options(&self) -> ShapeOptions {
        ShapeOptions {
            target_len: self.shape_target_len,
            weight_by_group_size: self.shape_weight_by_group,
            max_iter: self.shape_max_iter,
        }
    }

    /// Cohorts in run order: the selected diseases, then the combined one.
    pub fn targets(&self) -> Vec<CohortTarget> {
        let mut t: Vec<CohortTarget> = self.diseases.diseases().into_iter().map(CohortTarget::Disease).collect();
        t.dedup();
        if self.any_disease {
            t.push(CohortTarget::AnyDisease);
        }
        t
    }

    /// Checks that do not touch the filesystem.
    pub fn validate(&self) -> Result<()> {
        self.cutoffs().validate()?;
        if let KChoice::Fixed(k) = self.k {
            if k < 2 {
                return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
            }
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return Err(Error::InvalidArgument(format!(
                "k range [{}, {}] must satisfy 2 <= k_min <= k_max",
                self.k_min, self.k_max
            )));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument("folds must be >= 2".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be > 0 and lambda >= 0".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidArgument("jobs must be >= 1".into()));
        }
        if self.targets().is_empty() {
            return Err(Error::InvalidArgument("no cohorts selected".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of every field except `out` and `jobs`,
    /// which do not affect results.
    pub fn semantic_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out");
            obj.remove("jobs");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}

/// Inputs shared by every cohort.
pub struct Inputs {
    pub visits: Vec<VisitRecord<f64>>,
    pub statics: Vec<PatientStatic>,
    pub trajectories: Vec<Trajectory<f64>>,
    pub truth: Option<BTreeMap<String, usize>>,
    pub report: IngestReport,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let visits = parse_visits::<f64>(&cfg.visits, &VisitSchema::default())?;
    let statics = parse_statics(&cfg.statics)?;
    let set = build_trajectories(&visits.records);
    let truth = match &cfg.truth {
        None => None,
        Some(p) => Some(read_truth_csv(p)?.into_iter().map(|r| (r.patient_id, r.archetype)).collect()),
    };
    Ok(Inputs {
        report: IngestReport {
            rows_read: visits.rows_read,
            rows_dropped_missing: visits.rows_dropped_missing,
            patients_excluded_single_visit: set.patients_excluded_single_visit,
        },
        visits: visits.records,
        statics: statics.records,
        trajectories: set.trajectories,
        truth,
    })
}

pub fn stage_features(cohort: &Cohort<f64>, cutoffs: &BmiCutoffs<f64>) -> Result<Vec<FeatureRow<f64>>> {
    cohort
        .members
        .iter()
        .map(|m| {
            Ok(FeatureRow {
                patient_id: m.patient_id.clone(),
                features: extract_with_cutoffs(&m.trajectory, cutoffs)?,
                label: m.label,
            })
        })
        .collect()
}

pub fn feature_rows_matrix(rows: &[FeatureRow<f64>]) -> Matrix<f64> {
    let arrays: Vec<_> = rows.iter().map(|r| r.features.to_array()).collect();
    Matrix::from_rows(&arrays).expect("fixed width")
}

pub struct ClusterStage {
    pub standardized: StandardizedMatrix<f64>,
    pub model: ClusterModel<f64>,
    pub report: ModelReport<f64>,
    pub assignments: Vec<AssignmentRow>,
    pub projection: Vec<ProjectionRow<f64>>,
}

/// Standardize, choose k, fit, and build the model report, assignment rows
/// and 2-D projection. With an automatic k the fit at the chosen k reuses the
/// seed of the elbow scan at that k.
pub fn stage_cluster(
    rows: &[FeatureRow<f64>],
    k: KChoice,
    k_min: usize,
    k_max: usize,
    method: ClusterMethod,
    seed: u64,
) -> Result<ClusterStage> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("clustering needs at least 3 patients, got {n}")));
    }
    let standardized = standardize_matrix(&feature_rows_matrix(rows))?;
    let x = &standardized.data;
    let (k, elbow): (usize, Option<ElbowResult<f64>>) = match k {
        KChoice::Fixed(k) => (k, None),
        KChoice::Auto => {
            let hi = k_max.min(n - 1);
            if hi < k_min {
                return Err(Error::InsufficientData(format!(
                    "{n} patients are too few for an elbow scan from k = {k_min}"
                )));
            }
            let e = elbow_select(x, k_min, hi, seed)?;
            (e.k, Some(e))
        }
    };
    if k >= n {
        return Err(Error::InsufficientData(format!("k = {k} needs more than {n} patients")));
    }
    let model = fit_model(x, k, method, elbow_seed(seed, k))?;
    let report = ModelReport::new(&model, &standardized.scaler, elbow);
    let assignments = rows
        .iter()
        .zip(&model.assignments)
        .map(|(r, &c)| AssignmentRow {
            patient_id: r.patient_id.clone(),
            cluster_id: c,
            label: r.label,
        })
        .collect();
    let pca = pca_project(x)?;
    let projection = rows
        .iter()
        .zip(&pca.coords)
        .zip(&model.assignments)
        .map(|((r, c), &a)| ProjectionRow {
            patient_id: r.patient_id.clone(),
            pc1: c[0],
            pc2: c[1],
            cluster_id: a,
            label: r.label,
        })
        .collect();
    Ok(ClusterStage {
        standardized,
        model,
        report,
        assignments,
        projection,
    })
}

pub fn stage_shapes(
    cohort: &Cohort<f64>,
    assignments: &[usize],
    k: usize,
    opts: &ShapeOptions,
) -> Result<Vec<ShapeSummary<f64>>> {
    let trajs: Vec<&Trajectory<f64>> = cohort.members.iter().map(|m| &m.trajectory).collect();
    shape_summaries(&trajs, assignments, k, opts)
}

pub fn stage_stats(
    cohort: &Cohort<f64>,
    assignments: &[usize],
    k: usize,
    yates: bool,
) -> Result<(DisparityReport<f64>, Vec<ClusterRisk<f64>>)> {
    let disparity = cluster_disparity_report(cohort, assignments, k, &Variable::ALL, yates)?;
    let risks = cluster_relative_risks(&cohort.labels(), assignments, k)?;
    Ok((disparity, risks))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    #[serde(flatten)]
    pub cv: CvReport,
    /// `(max_depth, learning_rate, auc_mean)` per grid point when tuned.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tuning_grid: Option<Vec<(usize, f64, f64)>>,
}

/// Cross-validated prediction of the cohort label from the standardized
/// features.
pub fn stage_relevance(
    rows: &[FeatureRow<f64>],
    params: &BoostParams,
    folds: usize,
    tune_grid: bool,
    seed: u64,
) -> Result<RelevanceReport> {
    let x = standardize_matrix(&feature_rows_matrix(rows))?.data;
    let y: Vec<u8> = rows.iter().map(|r| r.label).collect();
    if tune_grid {
        let t = tune(&x, &y, folds, params, seed)?;
        Ok(RelevanceReport {
            cv: t.best,
            tuning_grid: Some(t.grid),
        })
    } else {
        Ok(RelevanceReport {
            cv: cross_validate(&x, &y, folds, params, seed)?,
            tuning_grid: None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CohortStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortOutcome {
    pub cohort: String,
    pub status: CohortStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_members: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_positive: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub balanced: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub silhouette: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auc_mean: Option<f64>,
    /// Adjusted Rand index against the truth file, over members found in it.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ari_vs_truth: Option<f64>,
    pub outputs: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl CohortOutcome {
    fn failed(cohort: &str, error: String, timings_ms: BTreeMap<String, f64>) -> Self {
        CohortOutcome {
            cohort: cohort.to_string(),
            status: CohortStatus::Failed,
            error: Some(error),
            n_members: None,
            n_positive: None,
            balanced: None,
            k: None,
            silhouette: None,
            auc_mean: None,
            ari_vs_truth: None,
            outputs: Vec::new(),
            timings_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    /// SHA-256 of each input file that could be read.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ingest: Option<IngestReport>,
    pub cohorts: Vec<CohortOutcome>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn n_ok(&self) -> usize {
        self.cohorts.iter().filter(|c| c.status == CohortStatus::Ok).count()
    }

    /// 0 when every cohort succeeded, 2 when some failed, 1 when all failed.
    pub fn exit_code(&self) -> i32 {
        match self.n_ok() {
            0 => 1,
            n if n == self.cohorts.len() => 0,
            _ => 2,
        }
    }
}

fn ms(start: Instant) -> f64 {
    (start.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn file_sha256(path: &Path) -> Option<String> {
    fs::read(path).ok().map(|b| hex::encode(Sha256::digest(&b)))
}

/// Seed for one stage of one cohort.
pub fn stage_seed(seed: u64, target: CohortTarget, stage: &str) -> u64 {
    substream(substream(seed, &format!("cohort:{}", target.code())), stage)
}

struct CohortArtifacts {
    outcome: CohortOutcome,
    disparity: Option<DisparityReport<f64>>,
}

fn run_cohort(cfg: &RunConfig, inputs: &Inputs, target: CohortTarget, hash: &str) -> CohortArtifacts {
    let code = target.code();
    let mut timings = BTreeMap::new();
    let mut disparity_out = None;
    let result = (|| -> Result<CohortOutcome> {
        let dir = cfg.out.join(code);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut outputs = Vec::new();
        let mut record = |name: &str| outputs.push(format!("{code}/{name}"));

        let t = Instant::now();
        let cohort = build_cohort(
            &inputs.trajectories,
            &inputs.statics,
            &inputs.visits,
            target,
            stage_seed(cfg.seed, target, "sample"),
        );
        if cohort.n_positive() == 0 {
            return Err(Error::InsufficientData(format!("no positive patients for {code}")));
        }
        timings.insert("cohort".to_string(), ms(t));

        let t = Instant::now();
        let rows = stage_features(&cohort, &cfg.cutoffs())?;
        crate::features::write_features_csv(&rows, create_file(&dir.join("features.csv"))?)?;
        record("features.csv");
        timings.insert("features".to_string(), ms(t));

        let t = Instant::now();
        let cl = stage_cluster(
            &rows,
            cfg.k,
            cfg.k_min,
            cfg.k_max,
            cfg.method,
            stage_seed(cfg.seed, target, "cluster"),
        )?;
        let k = cl.model.k;
        let assign = &cl.model.assignments;
        crate::cluster::write_assignments_csv(&cl.assignments, create_file(&dir.join("assignments.csv"))?)?;
        record("assignments.csv");
        write_json(&dir.join("model.json"), &cl.report)?;
        record("model.json");
        timings.insert("cluster".to_string(), ms(t));

        let t = Instant::now();
        let shapes = stage_shapes(&cohort, assign, k, &cfg.shape_options())?;
        write_json(&dir.join("shapes.json"), &shapes)?;
        record("shapes.json");
        timings.insert("shapes".to_string(), ms(t));

        let t = Instant::now();
        let (disparity, risks) = stage_stats(&cohort, assign, k, cfg.yates)?;
        write_json(&dir.join("disparity.json"), &disparity)?;
        record("disparity.json");
        let grid = render_star_grid(&[(code.to_string(), &disparity)]);
        fs::write(dir.join("disparity.txt"), grid).map_err(|e| Error::io(dir.join("disparity.txt"), e))?;
        record("disparity.txt");
        write_json(&dir.join("relative_risk.json"), &risks)?;
        record("relative_risk.json");
        timings.insert("stats".to_string(), ms(t));

        let t = Instant::now();
        let relevance = stage_relevance(
            &rows,
            &cfg.boost_params(),
            cfg.folds,
            cfg.tune,
            stage_seed(cfg.seed, target, "relevance"),
        )?;
        write_json(&dir.join("relevance.json"), &relevance)?;
        record("relevance.json");
        timings.insert("relevance".to_string(), ms(t));

        let t = Instant::now();
        crate::cluster::write_projection_csv(&cl.projection, create_file(&dir.join("projection.csv"))?)?;
        record("projection.csv");
        timings.insert("projection".to_string(), ms(t));

        let ari_vs_truth = inputs.truth.as_ref().and_then(|truth| {
            let (pred, want): (Vec<usize>, Vec<usize>) = cohort
                .members
                .iter()
                .zip(assign)
                .filter_map(|(m, &a)| truth.get(&m.patient_id).map(|&t| (a, t)))
                .unzip();
            (!pred.is_empty()).then(|| adjusted_rand_index(&pred, &want))
        });
        disparity_out = Some(disparity);
        record("manifest.json");
        let silhouette = cl.model.silhouette;
        Ok(CohortOutcome {
            cohort: code.to_string(),
            status: CohortStatus::Ok,
            error: None,
            n_members: Some(cohort.members.len()),
            n_positive: Some(cohort.n_positive()),
            balanced: Some(cohort.balanced),
            k: Some(k),
            silhouette: silhouette.is_finite().then_some(silhouette),
            auc_mean: Some(relevance.cv.auc_mean),
            ari_vs_truth,
            outputs,
            timings_ms: BTreeMap::new(),
        })
    })();
    let mut outcome = match result {
        Ok(o) => o,
        Err(e) => CohortOutcome::failed(code, e.to_string(), BTreeMap::new()),
    };
    outcome.timings_ms = timings;
    let dir = cfg.out.join(code);
    let cohort_manifest = serde_json::json!({
        "config_hash": hash,
        "seed": cfg.seed,
        "outcome": &outcome,
    });
    if fs::create_dir_all(&dir).is_ok() {
        if let Err(e) = write_json(&dir.join("manifest.json"), &cohort_manifest) {
            outcome.status = CohortStatus::Failed;
            outcome.error = Some(e.to_string());
        }
    }
    CohortArtifacts {
        outcome,
        disparity: disparity_out,
    }
}

/// Run every selected cohort and write the run manifest to
/// `<out>/manifest.json`. Input problems are recorded as failures of every
/// cohort rather than returned; only an invalid configuration or an
/// unwritable output directory is an error.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunManifest> {
    let start = Instant::now();
    cfg.validate()?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    let hash = cfg.semantic_hash();
    let targets = cfg.targets();

    let mut inputs_sha = BTreeMap::new();
    let mut missing = Vec::new();
    let mut paths: Vec<(&str, &Path)> = vec![("visits", &cfg.visits), ("statics", &cfg.statics)];
    if let Some(t) = &cfg.truth {
        paths.push(("truth", t));
    }
    for (name, p) in paths {
        match file_sha256(p) {
            Some(h) => {
                inputs_sha.insert(name.to_string(), h);
            }
            None => missing.push(format!("{name} file {} is missing or unreadable", p.display())),
        }
    }

    let mut timings = BTreeMap::new();
    let t = Instant::now();
    let loaded = if missing.is_empty() {
        load_inputs(cfg).map_err(|e| e.to_string())
    } else {
        Err(missing.join("; "))
    };
    timings.insert("ingest".to_string(), ms(t));

    let (cohorts, disparities, ingest) = match &loaded {
        Err(msg) => (
            targets
                .iter()
                .map(|t| CohortOutcome::failed(t.code(), msg.clone(), BTreeMap::new()))
                .collect::<Vec<_>>(),
            Vec::new(),
            None,
        ),
        Ok(inputs) => {
            write_json(&cfg.out.join("ingest.json"), &inputs.report)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.jobs.unwrap_or(0))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            let arts: Vec<CohortArtifacts> =
                pool.install(|| targets.par_iter().map(|&t| run_cohort(cfg, inputs, t, &hash)).collect());
            let mut outcomes = Vec::new();
            let mut grids = Vec::new();
            for a in arts {
                if let Some(d) = a.disparity {
                    grids.push((a.outcome.cohort.clone(), d));
                }
                outcomes.push(a.outcome);
            }
            (outcomes, grids, Some(inputs.report))
        }
    };

    if !disparities.is_empty() {
        let cols: Vec<(String, &DisparityReport<f64>)> = disparities.iter().map(|(c, d)| (c.clone(), d)).collect();
        let path = cfg.out.join("disparity_grid.txt");
        fs::write(&path, render_star_grid(&cols)).map_err(|e| Error::io(&path, e))?;
    }
    timings.insert("total".to_string(), ms(start));
    let manifest = RunManifest {
        config_hash: hash,
        seed: cfg.seed,
        config: cfg.clone(),
        inputs: inputs_sha,
        ingest,
        cohorts,
        timings_ms: timings,
    };
    write_json(&cfg.out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
