//! Benchmark runner: expands configuration grids into jobs, executes them on
//! a worker pool, and streams results to a CSV file that survives
//! interruption and resumes without recomputing finished jobs.
//!
//! Every job is identified by the 17 leading CSV columns (dataset through
//! seed). Seeds derive from the global seed and the job identity, so a grid
//! re-run under any parallelism produces the same rows; `finalize` sorts rows
//! by identity so completed result files are byte-identical across runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::seq::SliceRandom;

use crate::corpus::{tfidf_weight, Corpus};
use crate::error::{Error, Result};
use crate::models::{
    distance_matrix, fit_representation, pairwise_distances, DistanceMatrix,
    DocumentRepresentation, TmKind, TmParams,
};
use crate::models::{LdaParams, NmfParams};
use crate::projection::{
    linear_combination_layout, project, DrKind, DrParams, Layout, MdsParams, ProjectionInput,
    SomParams, TsneParams, UmapParams,
};
use crate::quality::{evaluate_layout, MetricVector, PairBudget, DEFAULT_NEIGHBORS};
use crate::seeding;

/// Results CSV header. The first 17 columns form the job identity.
pub const RESULTS_HEADER: &str = "dataset,tm,tfidf,K,dr,lincomb,reference_space,perplexity,n_iter,learning_rate,min_dist,n_neighbors,grid_m,grid_n,max_iter,epochs,seed,trust,cont,shepard,nh,dsc,silhouette,ch_raw,db_raw,runtime_s,status";

const IDENTITY_COLUMNS: usize = 17;
const TOTAL_COLUMNS: usize = 27;

/// Three-state switch: on, off, or structurally not applicable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Toggle {
    On,
    Off,
    NotApplicable,
}

impl Toggle {
    pub fn letter(self) -> &'static str {
        match self {
            Toggle::On => "+",
            Toggle::Off => "-",
            Toggle::NotApplicable => "X",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "+" => Ok(Toggle::On),
            "-" => Ok(Toggle::Off),
            "X" => Ok(Toggle::NotApplicable),
            _ => Err(Error::invalid(format!("unknown toggle '{s}'"))),
        }
    }

    pub fn is_on(self) -> bool {
        matches!(self, Toggle::On)
    }
}

/// Which space the quality metrics compare the layout against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReferenceSpace {
    /// The fitted model's own document space (default).
    TmSpace,
    /// Cosine distances over the raw count matrix.
    Vsm,
}

impl ReferenceSpace {
    pub fn name(self) -> &'static str {
        match self {
            ReferenceSpace::TmSpace => "tm-space",
            ReferenceSpace::Vsm => "vsm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tm-space" => Ok(ReferenceSpace::TmSpace),
            "vsm" => Ok(ReferenceSpace::Vsm),
            _ => Err(Error::invalid(format!("unknown reference space '{s}'"))),
        }
    }
}

/// One fully specified layout job.
#[derive(Debug, Clone)]
pub struct LayoutConfig {
    pub dataset: String,
    pub tm: TmKind,
    pub tfidf: Toggle,
    pub k_topics: Option<usize>,
    pub dr: DrKind,
    pub lincomb: Toggle,
    pub reference_space: ReferenceSpace,
    pub dr_params: DrParams,
    pub seed: u64,
}

impl LayoutConfig {
    /// The 17 identity columns, in CSV order.
    pub fn identity_fields(&self) -> Vec<String> {
        let mut f = vec![
            self.dataset.clone(),
            self.tm.name().to_string(),
            self.tfidf.letter().to_string(),
            self.k_topics.map(|k| k.to_string()).unwrap_or_default(),
            self.dr.name().to_string(),
            self.lincomb.letter().to_string(),
            self.reference_space.name().to_string(),
        ];
        let mut hp = vec![String::new(); 9];
        match &self.dr_params {
            DrParams::Tsne(p) => {
                hp[0] = fmt_f64(p.perplexity);
                hp[1] = p.n_iter.to_string();
                hp[2] = fmt_f64(p.learning_rate);
            }
            DrParams::Umap(p) => {
                hp[3] = fmt_f64(p.min_dist);
                hp[4] = p.n_neighbors.to_string();
                hp[8] = p.n_epochs.to_string();
            }
            DrParams::Som(p) => {
                hp[5] = p.grid_m.to_string();
                hp[6] = p.grid_n.to_string();
                hp[8] = p.epochs.to_string();
            }
            DrParams::Mds(p) => {
                hp[7] = p.max_iter.to_string();
            }
        }
        f.extend(hp);
        f.push(self.seed.to_string());
        f
    }
}

/// Compact identity of a configuration family: model, weighting, projection
/// and whether documents are placed by topic combination, e.g.
/// `(LSI,+,t-SNE,-)`.
pub fn encode_config_id(cfg: &LayoutConfig) -> String {
    format!(
        "({},{},{},{})",
        cfg.tm.name(),
        cfg.tfidf.letter(),
        cfg.dr.name(),
        cfg.lincomb.letter()
    )
}

/// One result row: the configuration plus its metric values (absent when the
/// job failed), the wall-clock runtime in whole seconds, and a status that is
/// either `ok` or `failed:<reason>`.
#[derive(Debug, Clone)]
pub struct QualityRecord {
    pub config: LayoutConfig,
    pub metrics: Option<MetricVector>,
    pub runtime_s: u64,
    pub status: String,
}

impl QualityRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn to_csv_row(&self) -> String {
        let mut fields = self.config.identity_fields();
        match &self.metrics {
            Some(mv) => fields.extend([
                fmt_f64(mv.trust),
                fmt_f64(mv.cont),
                fmt_f64(mv.shepard),
                fmt_f64(mv.nh),
                fmt_f64(mv.dsc),
                fmt_f64(mv.silhouette),
                fmt_f64(mv.ch_raw),
                fmt_f64(mv.db_raw),
            ]),
            None => fields.extend(std::iter::repeat_n(String::new(), 8)),
        }
        fields.push(self.runtime_s.to_string());
        fields.push(self.status.clone());
        fields.join(",")
    }
}

/// Shortest decimal form that parses back to the same f64; infinities print
/// as `inf`/`-inf`.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse::<T>()
        .map_err(|_| Error::invalid(format!("bad {what} value '{s}'")))
}

/// Parses one results row (no header) back into a record.
pub fn parse_csv_row(line: &str) -> Result<QualityRecord> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != TOTAL_COLUMNS {
        return Err(Error::invalid(format!(
            "expected {TOTAL_COLUMNS} columns, found {}",
            f.len()
        )));
    }
    let tm = TmKind::parse(f[1])?;
    let dr = DrKind::parse(f[4])?;
    let dr_params = match dr {
        DrKind::Tsne => DrParams::Tsne(TsneParams {
            perplexity: parse_field(f[7], "perplexity")?,
            n_iter: parse_field(f[8], "n_iter")?,
            learning_rate: parse_field(f[9], "learning_rate")?,
        }),
        DrKind::Umap => DrParams::Umap(UmapParams {
            min_dist: parse_field(f[10], "min_dist")?,
            n_neighbors: parse_field(f[11], "n_neighbors")?,
            n_epochs: parse_field(f[15], "epochs")?,
        }),
        DrKind::Som => DrParams::Som(SomParams {
            grid_m: parse_field(f[12], "grid_m")?,
            grid_n: parse_field(f[13], "grid_n")?,
            epochs: parse_field(f[15], "epochs")?,
        }),
        DrKind::Mds => DrParams::Mds(MdsParams {
            max_iter: parse_field(f[14], "max_iter")?,
        }),
    };
    let config = LayoutConfig {
        dataset: f[0].to_string(),
        tm,
        tfidf: Toggle::parse(f[2])?,
        k_topics: if f[3].is_empty() {
            None
        } else {
            Some(parse_field(f[3], "K")?)
        },
        dr,
        lincomb: Toggle::parse(f[5])?,
        reference_space: ReferenceSpace::parse(f[6])?,
        dr_params,
        seed: parse_field(f[16], "seed")?,
    };
    let metrics = if f[17].is_empty() {
        None
    } else {
        Some(MetricVector {
            trust: parse_field(f[17], "trust")?,
            cont: parse_field(f[18], "cont")?,
            shepard: parse_field(f[19], "shepard")?,
            nh: parse_field(f[20], "nh")?,
            dsc: parse_field(f[21], "dsc")?,
            silhouette: parse_field(f[22], "silhouette")?,
            ch_raw: parse_field(f[23], "ch_raw")?,
            db_raw: parse_field(f[24], "db_raw")?,
            k_neighbors: DEFAULT_NEIGHBORS,
        })
    };
    Ok(QualityRecord {
        config,
        metrics,
        runtime_s: parse_field(f[25], "runtime_s")?,
        status: f[26].to_string(),
    })
}

/// Reads a complete results file.
pub fn read_results_csv(path: &Path) -> Result<Vec<QualityRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h == RESULTS_HEADER => {}
        Some((_, Ok(h))) => {
            return Err(Error::parse(path, 1, format!("unexpected header '{h}'")));
        }
        Some((_, Err(e))) => return Err(Error::io(path, e)),
        None => return Err(Error::parse(path, 1, "empty results file")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let rec = parse_csv_row(&line).map_err(|e| Error::parse(path, i + 1, format!("{e}")))?;
        out.push(rec);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// grid expansion

/// Hyperparameter sweep for one projection method.
///
/// t-SNE crosses 5 learning rates, 10 log-spaced iteration budgets and 10
/// perplexities (500 cells); UMAP crosses 11 min_dist values with 12 neighbor
/// counts (132); SOM sweeps both grid edges from 10 to 20 (121); MDS sweeps
/// the iteration cap from 300 to 900 in steps of 20 (31).
pub fn dr_param_grid(dr: DrKind) -> Vec<DrParams> {
    let mut out = Vec::new();
    match dr {
        DrKind::Tsne => {
            for &lr in &[250.0, 1000.0, 2000.0, 4000.0, 10000.0] {
                for &n_iter in &[10, 17, 28, 46, 77, 129, 215, 359, 599, 1000] {
                    for p in 1..=10 {
                        out.push(DrParams::Tsne(TsneParams {
                            perplexity: (5 * p) as f64,
                            n_iter,
                            learning_rate: lr,
                        }));
                    }
                }
            }
        }
        DrKind::Umap => {
            let mut neighbors = vec![2];
            neighbors.extend(10..=20);
            for d in 0..=10 {
                for &n in &neighbors {
                    out.push(DrParams::Umap(UmapParams {
                        min_dist: d as f64 / 10.0,
                        n_neighbors: n,
                        n_epochs: UmapParams::default().n_epochs,
                    }));
                }
            }
        }
        DrKind::Som => {
            for gm in 10..=20 {
                for gn in 10..=20 {
                    out.push(DrParams::Som(SomParams {
                        grid_m: gm,
                        grid_n: gn,
                        epochs: SomParams::default().epochs,
                    }));
                }
            }
        }
        DrKind::Mds => {
            for max_iter in (300..=900).step_by(20) {
                out.push(DrParams::Mds(MdsParams { max_iter }));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GridSpec {
    pub datasets: Vec<String>,
    pub tms: Vec<TmKind>,
    /// Topic counts swept for models that have topics; ignored by VSM/EXT.
    pub topics: Vec<usize>,
    pub drs: Vec<DrKind>,
    pub reference_space: ReferenceSpace,
    pub global_seed: u64,
}

/// Expands a grid spec into the full shuffled job list.
///
/// tf-idf weighting toggles only for models fitted on term matrices (VSM,
/// LSI, NMF); topic-combination placement toggles only for models with
/// topics (LSI, NMF, LDA). Everything else is marked not-applicable. Job
/// seeds derive from the global seed and the job identity; the order is a
/// seeded shuffle so long homogeneous stretches don't pile onto one worker.
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<LayoutConfig>> {
    for name in &spec.datasets {
        if name.is_empty() || name.contains([',', '"', '\n']) {
            return Err(Error::invalid(format!(
                "dataset name '{name}' not usable in CSV"
            )));
        }
    }
    let mut jobs = Vec::new();
    for dataset in &spec.datasets {
        for &tm in &spec.tms {
            let tfidf_options: &[Toggle] = if tm.supports_tfidf() {
                &[Toggle::Off, Toggle::On]
            } else {
                &[Toggle::NotApplicable]
            };
            let k_options: Vec<Option<usize>> = if tm.has_topics() {
                if spec.topics.is_empty() {
                    return Err(Error::invalid(format!(
                        "{} needs at least one topic count",
                        tm.name()
                    )));
                }
                spec.topics.iter().map(|&k| Some(k)).collect()
            } else {
                vec![None]
            };
            let lincomb_options: &[Toggle] = if tm.has_topics() {
                &[Toggle::Off, Toggle::On]
            } else {
                &[Toggle::NotApplicable]
            };
            for &tfidf in tfidf_options {
                for &k_topics in &k_options {
                    for &dr in &spec.drs {
                        for &lincomb in lincomb_options {
                            for dr_params in dr_param_grid(dr) {
                                let mut cfg = LayoutConfig {
                                    dataset: dataset.clone(),
                                    tm,
                                    tfidf,
                                    k_topics,
                                    dr,
                                    lincomb,
                                    reference_space: spec.reference_space,
                                    dr_params,
                                    seed: 0,
                                };
                                cfg.seed = job_seed(spec.global_seed, &cfg);
                                jobs.push(cfg);
                            }
                        }
                    }
                }
            }
        }
    }
    let mut rng = seeding::rng_from(seeding::derive_seed(spec.global_seed, &["shuffle"]));
    jobs.shuffle(&mut rng);
    Ok(jobs)
}

/// Seed for one job, derived from the identity columns (minus the seed
/// column itself).
fn job_seed(global: u64, cfg: &LayoutConfig) -> u64 {
    let fields = cfg.identity_fields();
    let mut parts: Vec<&str> = vec!["job"];
    parts.extend(fields[..IDENTITY_COLUMNS - 1].iter().map(|s| s.as_str()));
    seeding::derive_seed(global, &parts)
}

// ---------------------------------------------------------------------------
// fitting and layout construction

/// One dataset as the runner consumes it.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub corpus: Corpus,
    /// Path of a pre-computed document embedding, used by the EXT model.
    pub ext_embedding: Option<PathBuf>,
}

/// A fitted model together with its document-space distance matrix.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub rep: DocumentRepresentation,
    pub doc_distances: DistanceMatrix,
}

fn tm_params(tm: TmKind, k_topics: Option<usize>, bundle: &DatasetBundle) -> Result<TmParams> {
    let need_k =
        || k_topics.ok_or_else(|| Error::invalid(format!("{} needs a topic count", tm.name())));
    Ok(match tm {
        TmKind::Vsm => TmParams::Vsm,
        TmKind::Lsi => TmParams::Lsi { k: need_k()? },
        TmKind::Nmf => TmParams::Nmf(NmfParams {
            k: need_k()?,
            ..NmfParams::default()
        }),
        TmKind::Lda => TmParams::Lda(LdaParams {
            k: need_k()?,
            ..LdaParams::default()
        }),
        TmKind::Ext => TmParams::Ext {
            path: bundle
                .ext_embedding
                .clone()
                .ok_or_else(|| Error::MissingExtEmbedding {
                    name: bundle.corpus.name.clone(),
                })?,
        },
    })
}

/// Fits the model a family of jobs shares. The fit seed depends only on the
/// dataset, model, weighting and topic count, so every job over the same fit
/// sees identical coordinates.
pub fn fit_for_config(
    bundle: &DatasetBundle,
    tm: TmKind,
    tfidf: Toggle,
    k_topics: Option<usize>,
    global_seed: u64,
) -> Result<FitResult> {
    let params = tm_params(tm, k_topics, bundle)?;
    let weighted;
    let matrix = if tfidf.is_on() {
        weighted = tfidf_weight(&bundle.corpus)?;
        &weighted
    } else {
        &bundle.corpus.dtm
    };
    let k_str = k_topics.map(|k| k.to_string()).unwrap_or_default();
    let fit_seed = seeding::derive_seed(
        global_seed,
        &[
            "fit",
            &bundle.corpus.name,
            tm.name(),
            tfidf.letter(),
            &k_str,
        ],
    );
    let rep = fit_representation(matrix, tfidf.is_on(), &params, fit_seed)?;
    let doc_distances = pairwise_distances(&rep)?;
    Ok(FitResult { rep, doc_distances })
}

/// Keeps projection hyperparameters feasible when projecting K topic points
/// instead of m documents.
fn clamp_for_topic_path(params: &DrParams, k: usize) -> DrParams {
    match params {
        DrParams::Tsne(p) => {
            let cap = ((k.saturating_sub(1)) / 3).max(2) as f64;
            DrParams::Tsne(TsneParams {
                perplexity: p.perplexity.min(cap).max(2.0),
                ..*p
            })
        }
        DrParams::Umap(p) => {
            let n = p.n_neighbors.min(k.saturating_sub(1)).max(2);
            DrParams::Umap(UmapParams {
                n_neighbors: n,
                ..*p
            })
        }
        other => *other,
    }
}

/// Produces the document layout for one configuration from its fitted model.
///
/// With topic combination off, documents are projected directly (from their
/// pairwise distances, or from their coordinates for SOM). With it on, the K
/// topics are projected instead and each document lands at the
/// topic-weight-averaged position of the topic points; negative document
/// loadings (possible under LSI) are clamped to zero before weighting.
pub fn build_layout(fit: &FitResult, cfg: &LayoutConfig) -> Result<Layout> {
    let rep = &fit.rep;
    let mut layout = if cfg.lincomb.is_on() {
        let topics = rep
            .topic_term
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{} has no topics", cfg.tm.name())))?;
        let k = topics.nrows();
        let params = clamp_for_topic_path(&cfg.dr_params, k);
        let topic_layout = if matches!(params, DrParams::Som(_)) {
            let topic_rep = DocumentRepresentation {
                matrix: topics.clone(),
                metric: rep.metric,
                topic_term: None,
                model_tag: rep.model_tag.clone(),
                tfidf: rep.tfidf,
            };
            project(
                ProjectionInput::Representation(&topic_rep),
                &params,
                cfg.seed,
            )?
        } else {
            let topic_distances = distance_matrix(topics, rep.metric)?;
            project(
                ProjectionInput::Distances(&topic_distances),
                &params,
                cfg.seed,
            )?
        };
        let theta = rep.matrix.mapv(|v| v.max(0.0));
        linear_combination_layout(&topic_layout.positions, &theta)?
    } else if matches!(cfg.dr_params, DrParams::Som(_)) {
        project(
            ProjectionInput::Representation(rep),
            &cfg.dr_params,
            cfg.seed,
        )?
    } else {
        project(
            ProjectionInput::Distances(&fit.doc_distances),
            &cfg.dr_params,
            cfg.seed,
        )?
    };
    layout.config_ref = encode_config_id(cfg);
    Ok(layout)
}

// ---------------------------------------------------------------------------
// execution

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub parallelism: usize,
    /// Keep rows already present in the output file and only run the rest.
    pub resume: bool,
    /// Stop after this many jobs (the file is left unfinalized), simulating
    /// an interrupted run.
    pub max_jobs: Option<usize>,
    /// Per-job wall-clock budget, checked at stage boundaries.
    pub job_timeout: Option<Duration>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            parallelism: 1,
            resume: false,
            max_jobs: None,
            job_timeout: None,
        }
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub total_jobs: usize,
    pub skipped: usize,
    pub ran: usize,
    pub ok: usize,
    pub failed: usize,
    /// True when every job is present and the file was rewritten in sorted
    /// order.
    pub finalized: bool,
}

type FitKey = (String, TmKind, Toggle, Option<usize>);

struct Prepared<'a> {
    bundles: &'a BTreeMap<String, DatasetBundle>,
    fits: BTreeMap<FitKey, std::result::Result<FitResult, String>>,
    vsm_refs: BTreeMap<String, std::result::Result<DistanceMatrix, String>>,
}

impl Prepared<'_> {
    fn fit_for(&self, cfg: &LayoutConfig) -> std::result::Result<&FitResult, String> {
        let key = (cfg.dataset.clone(), cfg.tm, cfg.tfidf, cfg.k_topics);
        self.fits
            .get(&key)
            .expect("fit prepared for every pending job")
            .as_ref()
            .map_err(|slug| slug.clone())
    }

    fn reference_for(&self, cfg: &LayoutConfig) -> std::result::Result<&DistanceMatrix, String> {
        match cfg.reference_space {
            ReferenceSpace::TmSpace => self.fit_for(cfg).map(|f| &f.doc_distances),
            ReferenceSpace::Vsm => self
                .vsm_refs
                .get(&cfg.dataset)
                .expect("reference prepared for every pending job")
                .as_ref()
                .map_err(|slug| slug.clone()),
        }
    }
}

fn prepare<'a>(
    bundles: &'a BTreeMap<String, DatasetBundle>,
    jobs: &[&LayoutConfig],
    global_seed: u64,
) -> Result<Prepared<'a>> {
    for cfg in jobs {
        if !bundles.contains_key(&cfg.dataset) {
            return Err(Error::UnknownDataset {
                name: cfg.dataset.clone(),
            });
        }
    }
    let mut prepared = Prepared {
        bundles,
        fits: BTreeMap::new(),
        vsm_refs: BTreeMap::new(),
    };
    for cfg in jobs {
        let key = (cfg.dataset.clone(), cfg.tm, cfg.tfidf, cfg.k_topics);
        if let std::collections::btree_map::Entry::Vacant(slot) = prepared.fits.entry(key) {
            let bundle = &bundles[&cfg.dataset];
            let fit = fit_for_config(bundle, cfg.tm, cfg.tfidf, cfg.k_topics, global_seed)
                .map_err(|e| e.status_slug().to_string());
            slot.insert(fit);
        }
        if cfg.reference_space == ReferenceSpace::Vsm
            && !prepared.vsm_refs.contains_key(&cfg.dataset)
        {
            let dense = bundles[&cfg.dataset].corpus.dtm.to_dense();
            let d = distance_matrix(&dense, crate::models::Metric::Cosine)
                .map_err(|e| e.status_slug().to_string());
            prepared.vsm_refs.insert(cfg.dataset.clone(), d);
        }
    }
    Ok(prepared)
}

fn over_deadline(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() > d)
}

/// Runs one job to a record; every failure becomes a `failed:<reason>`
/// status instead of an error.
fn execute_job(
    cfg: &LayoutConfig,
    prepared: &Prepared,
    timeout: Option<Duration>,
) -> QualityRecord {
    let start = Instant::now();
    let deadline = timeout.map(|t| start + t);
    let outcome: std::result::Result<MetricVector, String> = (|| {
        let fit = prepared.fit_for(cfg)?;
        let layout = build_layout(fit, cfg).map_err(|e| e.status_slug().to_string())?;
        if over_deadline(deadline) {
            return Err("timeout".to_string());
        }
        let reference = prepared.reference_for(cfg)?;
        let labels = &prepared.bundles[&cfg.dataset].corpus.labels;
        let shepard_seed = seeding::derive_seed(cfg.seed, &["shepard"]);
        let mv = evaluate_layout(
            reference,
            &layout,
            labels,
            DEFAULT_NEIGHBORS,
            PairBudget::default_for(layout.n_points()),
            shepard_seed,
        )
        .map_err(|e| e.status_slug().to_string())?;
        if over_deadline(deadline) {
            return Err("timeout".to_string());
        }
        Ok(mv)
    })();
    let runtime_s = start.elapsed().as_secs();
    match outcome {
        Ok(mv) => QualityRecord {
            config: cfg.clone(),
            metrics: Some(mv),
            runtime_s,
            status: "ok".to_string(),
        },
        Err(slug) => QualityRecord {
            config: cfg.clone(),
            metrics: None,
            runtime_s,
            status: format!("failed:{slug}"),
        },
    }
}

fn read_existing_rows(path: &Path) -> Result<Vec<(Vec<String>, String)>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line != RESULTS_HEADER {
                return Err(Error::parse(path, 1, format!("unexpected header '{line}'")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != TOTAL_COLUMNS {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {TOTAL_COLUMNS} columns, found {}", fields.len()),
            ));
        }
        let identity: Vec<String> = fields[..IDENTITY_COLUMNS]
            .iter()
            .map(|s| s.to_string())
            .collect();
        out.push((identity, line));
    }
    Ok(out)
}

/// Executes the job list against the datasets, appending one CSV row per job
/// to `out_path` as results arrive.
///
/// With `resume`, rows already in the file are kept and their jobs skipped.
/// Once every job is present the file is rewritten sorted by identity, so two
/// complete runs of the same grid are byte-identical regardless of
/// parallelism or interruptions.
pub fn run_benchmark(
    bundles: &BTreeMap<String, DatasetBundle>,
    jobs: &[LayoutConfig],
    out_path: &Path,
    global_seed: u64,
    opts: &RunOptions,
) -> Result<RunSummary> {
    let existing = if opts.resume && out_path.exists() {
        read_existing_rows(out_path)?
    } else {
        Vec::new()
    };
    let done: BTreeSet<&Vec<String>> = existing.iter().map(|(id, _)| id).collect();

    let pending: Vec<&LayoutConfig> = jobs
        .iter()
        .filter(|cfg| !done.contains(&cfg.identity_fields()))
        .collect();
    let limit = pending.len().min(opts.max_jobs.unwrap_or(usize::MAX));

    let prepared = prepare(bundles, &pending[..limit], global_seed)?;

    let file = if existing.is_empty() {
        let mut f = fs::File::create(out_path).map_err(|e| Error::io(out_path, e))?;
        writeln!(f, "{RESULTS_HEADER}").map_err(|e| Error::io(out_path, e))?;
        f
    } else {
        fs::OpenOptions::new()
            .append(true)
            .open(out_path)
            .map_err(|e| Error::io(out_path, e))?
    };
    let mut writer = BufWriter::new(file);

    let cursor = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(Vec<String>, String, bool)>();
    let workers = opts.parallelism.max(1);
    let timeout = opts.job_timeout;

    let mut new_rows: Vec<(Vec<String>, String)> = Vec::with_capacity(limit);
    let mut ok = 0usize;
    let mut failed = 0usize;
    let mut write_error: Option<Error> = None;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let cursor = &cursor;
            let pending = &pending;
            let prepared = &prepared;
            scope.spawn(move || loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= limit {
                    break;
                }
                let cfg = pending[i];
                let rec = execute_job(cfg, prepared, timeout);
                let line = rec.to_csv_row();
                // a dropped receiver just means the run is aborting
                if tx.send((cfg.identity_fields(), line, rec.is_ok())).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (identity, line, job_ok) in rx {
            if write_error.is_none() {
                let r = writeln!(writer, "{line}").and_then(|_| writer.flush());
                if let Err(e) = r {
                    write_error = Some(Error::io(out_path, e));
                }
            }
            if job_ok {
                ok += 1;
            } else {
                failed += 1;
            }
            new_rows.push((identity, line));
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    drop(writer);

    let complete = limit == pending.len();
    if complete {
        finalize(out_path, existing.into_iter().chain(new_rows).collect())?;
    }
    Ok(RunSummary {
        total_jobs: jobs.len(),
        skipped: jobs.len() - pending.len(),
        ran: limit,
        ok,
        failed,
        finalized: complete,
    })
}

/// Rewrites the results file with rows sorted by identity (atomic rename).
fn finalize(out_path: &Path, mut rows: Vec<(Vec<String>, String)>) -> Result<()> {
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let tmp = out_path.with_extension("csv.tmp");
    {
        let f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "{RESULTS_HEADER}").map_err(|e| Error::io(&tmp, e))?;
        for (_, line) in &rows {
            writeln!(w, "{line}").map_err(|e| Error::io(&tmp, e))?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, out_path).map_err(|e| Error::io(out_path, e))
}

// ---------------------------------------------------------------------------
// layout export

/// Writes a layout as `doc_id,x,y,label` rows with full-precision
/// coordinates.
pub fn write_layout_csv(
    layout: &Layout,
    doc_ids: &[String],
    labels: &[String],
    path: &Path,
) -> Result<()> {
    let m = layout.n_points();
    if doc_ids.len() != m || labels.len() != m {
        return Err(Error::dim(format!(
            "{m} points, {} ids, {} labels",
            doc_ids.len(),
            labels.len()
        )));
    }
    for s in doc_ids.iter().chain(labels) {
        if s.contains([',', '"', '\n']) {
            return Err(Error::invalid(format!("'{s}' not usable in CSV")));
        }
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    writeln!(w, "doc_id,x,y,label").map_err(|e| Error::io(path, e))?;
    for i in 0..m {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{}",
            doc_ids[i],
            layout.positions[[i, 0]],
            layout.positions[[i, 1]],
            labels[i]
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a layout written by [`write_layout_csv`].
pub fn read_layout_csv(path: &Path) -> Result<(Layout, Vec<String>, Vec<String>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut doc_ids = Vec::new();
    let mut labels = Vec::new();
    let mut coords: Vec<[f64; 2]> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line != "doc_id,x,y,label" {
                return Err(Error::parse(path, 1, format!("unexpected header '{line}'")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected 4 columns, found {}", f.len()),
            ));
        }
        let x: f64 = f[1]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad x '{}'", f[1])))?;
        let y: f64 = f[2]
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("bad y '{}'", f[2])))?;
        doc_ids.push(f[0].to_string());
        coords.push([x, y]);
        labels.push(f[3].to_string());
    }
    let mut positions = Array2::zeros((coords.len(), 2));
    for (i, c) in coords.iter().enumerate() {
        positions[[i, 0]] = c[0];
        positions[[i, 1]] = c[1];
    }
    Ok((Layout::from_positions(positions), doc_ids, labels))
}
