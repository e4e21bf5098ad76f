use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bmi_subtype::cluster::{read_assignments_csv, write_assignments_csv, write_projection_csv, ClusterMethod};
use bmi_subtype::features::{read_features_csv, write_features_csv, BmiCutoffs};
use bmi_subtype::ingest::synth::{disease_archetypes, read_archetypes, synth_generate, three_archetypes, write_truth_csv};
use bmi_subtype::ingest::{build_cohort, write_statics_csv, write_visits_csv, Cohort};
use bmi_subtype::pipeline::{
    load_inputs, run_pipeline, stage_cluster, stage_features, stage_relevance, stage_seed, stage_shapes, stage_stats,
    write_json, DiseaseSelection, KChoice, RunConfig,
};
use bmi_subtype::relevance::BoostParams;
use bmi_subtype::shapes::{ShapeOptions, DBA_MAX_ITER};
use bmi_subtype::stats::render_star_grid;

#[derive(Parser)]
#[command(name = "bmi-subtype", version, about = "Subtype patients by their BMI trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic visits, statics and ground-truth files
    Synth(SynthArgs),
    /// Parse inputs and write one cohort file per disease
    Ingest(IngestArgs),
    /// Extract trajectory features from a cohort file
    Features(FeaturesArgs),
    /// Standardize features, choose k and cluster
    Cluster(ClusterArgs),
    /// Representative BMI shape per cluster
    Shapes(ShapesArgs),
    /// Disparity tests and relative risks per cluster
    Stats(StatsArgs),
    /// Cross-validated boosted-tree prediction of the cohort label
    Relevance(RelevanceArgs),
    /// Run every stage for every selected cohort
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Three,
    Diseases,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 600)]
    n: usize,
    /// Built-in archetype set
    #[arg(long, value_enum, default_value = "three", conflicts_with = "archetypes")]
    preset: Preset,
    /// JSON list of archetypes instead of a preset
    #[arg(long)]
    archetypes: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    visits: PathBuf,
    #[arg(long)]
    statics: PathBuf,
    /// `all` or comma-separated disease codes
    #[arg(long, default_value = "all")]
    diseases: DiseaseSelection,
    /// Skip the combined any-disease cohort
    #[arg(long)]
    no_any_disease: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct CutoffArgs {
    #[arg(long, default_value_t = 18.5)]
    bmi_normal: f64,
    #[arg(long, default_value_t = 25.0)]
    bmi_overweight: f64,
    #[arg(long, default_value_t = 30.0)]
    bmi_obese: f64,
}

impl From<CutoffArgs> for BmiCutoffs<f64> {
    fn from(a: CutoffArgs) -> Self {
        BmiCutoffs {
            normal: a.bmi_normal,
            overweight: a.bmi_overweight,
            obese: a.bmi_obese,
        }
    }
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[command(flatten)]
    cutoffs: CutoffArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Number of clusters, or `auto` for the elbow scan
    #[arg(long, default_value = "auto")]
    k: KChoice,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 10)]
    k_max: usize,
    /// kmeans, single, complete, average or ward
    #[arg(long, default_value = "kmeans")]
    method: ClusterMethod,
    /// Directory for assignments.csv, model.json and projection.csv
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ShapesArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    assignments: PathBuf,
    #[arg(long)]
    target_len: Option<usize>,
    /// Average length-group shapes without weighting by member count
    #[arg(long)]
    unweighted: bool,
    #[arg(long, default_value_t = DBA_MAX_ITER)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    assignments: PathBuf,
    /// Continuity correction for 2x2 tables
    #[arg(long)]
    yates: bool,
    /// Directory for disparity.json, disparity.txt and relative_risk.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BoostArgs {
    #[arg(long)]
    n_rounds: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct RelevanceArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Search the depth / learning-rate grid
    #[arg(long)]
    tune: bool,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON run configuration; flags below override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    visits: Option<PathBuf>,
    #[arg(long)]
    statics: Option<PathBuf>,
    /// patient_id,archetype file for scoring recovered clusters
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    diseases: Option<DiseaseSelection>,
    #[arg(long)]
    no_any_disease: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<KChoice>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    method: Option<ClusterMethod>,
    #[arg(long)]
    bmi_normal: Option<f64>,
    #[arg(long)]
    bmi_overweight: Option<f64>,
    #[arg(long)]
    bmi_obese: Option<f64>,
    #[command(flatten)]
    boost: BoostArgs,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    tune: bool,
    #[arg(long)]
    yates: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Print the effective configuration as JSON and exit
    #[arg(long)]
    print_config: bool,
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("creating {}", path.display()))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn read_cohort(path: &Path) -> Result<Cohort<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing cohort {}", path.display()))
}

/// Cluster ids in cohort member order, matched by patient id.
fn assignments_for(cohort: &Cohort<f64>, path: &Path) -> Result<(Vec<usize>, usize)> {
    let rows = read_assignments_csv(path)?;
    let by_id: BTreeMap<&str, usize> = rows.iter().map(|r| (r.patient_id.as_str(), r.cluster_id)).collect();
    let ids = cohort
        .members
        .iter()
        .map(|m| {
            by_id
                .get(m.patient_id.as_str())
                .copied()
                .with_context(|| format!("patient {} has no assignment in {}", m.patient_id, path.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = ids.iter().max().map_or(0, |m| m + 1);
    Ok((ids, k))
}

fn synth(a: SynthArgs) -> Result<()> {
    let archetypes = match &a.archetypes {
        Some(p) => read_archetypes(p)?,
        None => match a.preset {
            Preset::Three => three_archetypes(),
            Preset::Diseases => disease_archetypes(),
        },
    };
    let out = synth_generate::<f64>(&archetypes, a.n, a.seed)?;
    mkdir(&a.out)?;
    write_visits_csv(&out.visits, create(&a.out.join("visits.csv"))?)?;
    write_statics_csv(&out.statics, create(&a.out.join("statics.csv"))?)?;
    write_truth_csv(&out.truth, create(&a.out.join("truth.csv"))?)?;
    eprintln!("wrote {} patients, {} visits to {}", out.statics.len(), out.visits.len(), a.out.display());
    Ok(())
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mut cfg = RunConfig::new(&a.visits, &a.statics, &a.out, a.seed);
    cfg.diseases = a.diseases;
    cfg.any_disease = !a.no_any_disease;
    let inputs = load_inputs(&cfg)?;
    mkdir(&a.out)?;
    write_json(&a.out.join("ingest.json"), &inputs.report)?;
    for target in cfg.targets() {
        let cohort = build_cohort(
            &inputs.trajectories,
            &inputs.statics,
            &inputs.visits,
            target,
            stage_seed(a.seed, target, "sample"),
        );
        let dir = a.out.join(target.code());
        mkdir(&dir)?;
        write_json(&dir.join("cohort.json"), &cohort)?;
        eprintln!(
            "{}: {} positive, {} controls{}",
            target.code(),
            cohort.n_positive(),
            cohort.n_negative(),
            if cohort.balanced { "" } else { " (unbalanced)" }
        );
    }
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let cohort = read_cohort(&a.cohort)?;
    let cutoffs: BmiCutoffs<f64> = a.cutoffs.into();
    cutoffs.validate()?;
    let rows = stage_features(&cohort, &cutoffs)?;
    write_features_csv(&rows, create(&a.out)?)?;
    Ok(())
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let rows = read_features_csv::<f64>(&a.features)?;
    let st = stage_cluster(&rows, a.k, a.k_min, a.k_max, a.method, a.seed)?;
    mkdir(&a.out)?;
    write_assignments_csv(&st.assignments, create(&a.out.join("assignments.csv"))?)?;
    write_json(&a.out.join("model.json"), &st.report)?;
    write_projection_csv(&st.projection, create(&a.out.join("projection.csv"))?)?;
    eprintln!("k = {}, silhouette {:.3}", st.model.k, st.model.silhouette);
    Ok(())
}

fn shapes(a: ShapesArgs) -> Result<()> {
    let cohort = read_cohort(&a.cohort)?;
    let (ids, k) = assignments_for(&cohort, &a.assignments)?;
    let opts = ShapeOptions {
        target_len: a.target_len,
        weight_by_group_size: !a.unweighted,
        max_iter: a.max_iter,
    };
    write_json(&a.out, &stage_shapes(&cohort, &ids, k, &opts)?)?;
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let cohort = read_cohort(&a.cohort)?;
    let (ids, k) = assignments_for(&cohort, &a.assignments)?;
    let (disparity, risks) = stage_stats(&cohort, &ids, k, a.yates)?;
    mkdir(&a.out)?;
    write_json(&a.out.join("disparity.json"), &disparity)?;
    let grid = render_star_grid(&[(cohort.target.code().to_string(), &disparity)]);
    fs::write(a.out.join("disparity.txt"), &grid)?;
    write_json(&a.out.join("relative_risk.json"), &risks)?;
    print!("{grid}");
    Ok(())
}

fn boost_params(b: &BoostArgs) -> BoostParams {
    let d = BoostParams::default();
    BoostParams {
        n_rounds: b.n_rounds.unwrap_or(d.n_rounds),
        learning_rate: b.learning_rate.unwrap_or(d.learning_rate),
        max_depth: b.max_depth.unwrap_or(d.max_depth),
        lambda: b.lambda.unwrap_or(d.lambda),
        ..d
    }
}

fn relevance(a: RelevanceArgs) -> Result<()> {
    let rows = read_features_csv::<f64>(&a.features)?;
    let report = stage_relevance(&rows, &boost_params(&a.boost), a.folds, a.tune, a.seed)?;
    write_json(&a.out, &report)?;
    eprintln!(
        "accuracy {:.3} +/- {:.3}, AUC {:.3} +/- {:.3}",
        report.cv.accuracy_mean, report.cv.accuracy_ci, report.cv.auc_mean, report.cv.auc_ci
    );
    Ok(())
}

/// Start from the config file (if any) and apply every flag that was given.
fn pipeline_config(a: &PipelineArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::read(p)?,
        None => {
            let (Some(visits), Some(statics), Some(out), Some(seed)) = (&a.visits, &a.statics, &a.out, a.seed) else {
                bail!("without --config, --visits, --statics, --out and --seed are required");
            };
            RunConfig::new(visits, statics, out, seed)
        }
    };
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = a.$field.clone() { cfg.$field = v; })*
        };
    }
    set!(visits, statics, out, seed, diseases, k, k_min, k_max, method, bmi_normal, bmi_overweight, bmi_obese, folds);
    if let Some(t) = &a.truth {
        cfg.truth = Some(t.clone());
    }
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    if a.no_any_disease {
        cfg.any_disease = false;
    }
    if a.tune {
        cfg.tune = true;
    }
    if a.yates {
        cfg.yates = true;
    }
    let b = &a.boost;
    if let Some(v) = b.n_rounds {
        cfg.n_rounds = v;
    }
    if let Some(v) = b.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = b.max_depth {
        cfg.max_depth = v;
    }
    if let Some(v) = b.lambda {
        cfg.lambda = v;
    }
    Ok(cfg)
}

fn pipeline(a: PipelineArgs) -> Result<ExitCode> {
    let cfg = pipeline_config(&a)?;
    if a.print_config {
        println!("{}", cfg.to_json());
        return Ok(ExitCode::SUCCESS);
    }
    let manifest = run_pipeline(&cfg)?;
    for c in &manifest.cohorts {
        match &c.error {
            None => eprintln!(
                "{:<26} ok      n={:<5} k={} auc={:.3}",
                c.cohort,
                c.n_members.unwrap_or(0),
                c.k.unwrap_or(0),
                c.auc_mean.unwrap_or(f64::NAN)
            ),
            Some(e) => eprintln!("{:<26} FAILED  {e}", c.cohort),
        }
    }
    eprintln!("{}/{} cohorts ok; manifest at {}", manifest.n_ok(), manifest.cohorts.len(), cfg.out.join("manifest.json").display());
    Ok(ExitCode::from(manifest.exit_code() as u8))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a).map(|_| ExitCode::SUCCESS),
        Command::Ingest(a) => ingest(a).map(|_| ExitCode::SUCCESS),
        Command::Features(a) => features(a).map(|_| ExitCode::SUCCESS),
        Command::Cluster(a) => cluster(a).map(|_| ExitCode::SUCCESS),
        Command::Shapes(a) => shapes(a).map(|_| ExitCode::SUCCESS),
        Command::Stats(a) => stats(a).map(|_| ExitCode::SUCCESS),
        Command::Relevance(a) => relevance(a).map(|_| ExitCode::SUCCESS),
        Command::Pipeline(a) => pipeline(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
