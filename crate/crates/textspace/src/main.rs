use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use textspace::analysis::{
    svg::export_layout_svg, write_analysis, AnalysisOptions, CorrMethod, METRIC_COLUMNS,
};
use textspace::corpus::{
    generate_synthetic_corpus, load_corpus, read_dtm_dir, write_dtm_dir, CorpusFormat,
    PreprocessConfig,
};
use textspace::models::{pairwise_distances, Metric, TmKind};
use textspace::projection::{DrKind, DrParams, MdsParams, SomParams, TsneParams, UmapParams};
use textspace::quality::{evaluate_layout, PairBudget, DEFAULT_NEIGHBORS};
use textspace::runner::{
    build_layout, expand_grid, fit_for_config, read_layout_csv, read_results_csv, run_benchmark,
    write_layout_csv, DatasetBundle, GridSpec, LayoutConfig, ReferenceSpace, RunOptions, Toggle,
};
use textspace::seeding;
use textspace::{Error, Result};

#[derive(Parser)]
#[command(
    name = "textspace",
    version,
    about = "Benchmark harness for planar layouts of labeled text corpora"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a directory of per-class text files into the on-disk matrix
    /// format used everywhere else.
    Ingest(IngestArgs),
    /// Generate a synthetic labeled corpus with planted class vocabulary.
    Synth(SynthArgs),
    /// Compute one layout, score it, and write its coordinates.
    Layout(LayoutArgs),
    /// Run a full configuration grid into a results CSV.
    Grid(GridArgs),
    /// Analyze a results CSV into report tables.
    Analyze(AnalyzeArgs),
    /// Render a layout CSV as an SVG scatter plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Directory whose subdirectories are class labels holding text files.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for the matrix files.
    #[arg(long)]
    out: PathBuf,
    /// Corpus name recorded in the output.
    #[arg(long)]
    name: String,
    /// Newline-separated stopword list.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Drop terms appearing in fewer documents than this.
    #[arg(long, default_value_t = 1)]
    min_df: usize,
    /// Drop terms appearing in more than this fraction of documents.
    #[arg(long, default_value_t = 1.0)]
    max_df: f64,
    /// Strip common English suffixes from tokens.
    #[arg(long)]
    strip_suffixes: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 50)]
    docs_per_class: usize,
    #[arg(long, default_value_t = 20)]
    terms_per_class: usize,
    /// Fraction of each document drawn from the shared noise vocabulary.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// Topic model: VSM, LSI, NMF, LDA or EXT.
    #[arg(long, default_value = "VSM")]
    tm: String,
    /// Weight the matrix by tf-idf before fitting (VSM/LSI/NMF only).
    #[arg(long)]
    tfidf: bool,
    /// Topic count for LSI/NMF/LDA.
    #[arg(long)]
    topics: Option<usize>,
    /// External embedding file for the EXT model.
    #[arg(long)]
    ext_embedding: Option<PathBuf>,
}

#[derive(Args)]
struct DrArgs {
    /// Projection: t-SNE, UMAP, MDS or SOM.
    #[arg(long, default_value = "MDS")]
    dr: String,
    /// Place documents at topic-weighted positions instead of projecting
    /// them directly (topic models only).
    #[arg(long)]
    lincomb: bool,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    min_dist: Option<f64>,
    #[arg(long)]
    n_neighbors: Option<usize>,
    #[arg(long)]
    grid_m: Option<usize>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
}

#[derive(Args)]
struct LayoutArgs {
    /// Dataset directory in the on-disk matrix format.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    dr: DrArgs,
    /// Score the layout against raw-count cosine distances instead of the
    /// fitted model's space.
    #[arg(long)]
    vsm_reference: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV of document coordinates.
    #[arg(long)]
    out: PathBuf,
    /// Also render the layout to this SVG file.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Datasets as name=dir pairs; repeatable.
    #[arg(long = "data", required = true)]
    data: Vec<String>,
    /// External embeddings as name=file pairs for the EXT model.
    #[arg(long = "ext-embedding")]
    ext_embeddings: Vec<String>,
    /// Comma-separated topic models.
    #[arg(long, default_value = "VSM", value_delimiter = ',')]
    tms: Vec<String>,
    /// Comma-separated projections.
    #[arg(long, default_value = "MDS", value_delimiter = ',')]
    drs: Vec<String>,
    /// Comma-separated topic counts for topic models.
    #[arg(long, value_delimiter = ',')]
    topics: Vec<usize>,
    /// Score against raw-count cosine distances instead of each model's own
    /// space.
    #[arg(long)]
    vsm_reference: bool,
    #[arg(long, default_value_t = 42)]
    global_seed: u64,
    #[arg(long, default_value_t = 1)]
    parallelism: usize,
    /// Keep existing rows in the output and run only the missing jobs.
    #[arg(long)]
    resume: bool,
    /// Stop after this many jobs (leaves the file unfinalized).
    #[arg(long)]
    max_jobs: Option<usize>,
    /// Per-job time budget in seconds, checked between pipeline stages.
    #[arg(long)]
    timeout_s: Option<u64>,
    /// Results CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Results CSV produced by `grid`.
    #[arg(long)]
    results: PathBuf,
    /// Directory for the report tables.
    #[arg(long)]
    out: PathBuf,
    /// Rank-correlate metrics instead of Pearson.
    #[arg(long)]
    spearman: bool,
    /// Correlation at or above this groups metrics together.
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Document counts as name=m pairs, for size-dependent defaults.
    #[arg(long = "dataset-size")]
    dataset_sizes: Vec<String>,
}

#[derive(Args)]
struct PlotArgs {
    /// Layout CSV produced by `layout`.
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Caption drawn under the plot.
    #[arg(long, default_value = "")]
    caption: String,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth(a),
        Command::Layout(a) => layout(a),
        Command::Grid(a) => grid(a),
        Command::Analyze(a) => analyze(a),
        Command::Plot(a) => plot(a),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let stopwords = match &a.stopwords {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::io(path, e))?
            .lines()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect(),
        None => std::collections::BTreeSet::new(),
    };
    let config = PreprocessConfig {
        stopwords,
        min_df: a.min_df,
        max_df_fraction: a.max_df,
        strip_suffixes: a.strip_suffixes,
    };
    let mut corpus = load_corpus(&a.input, CorpusFormat::LabelDirectories(config))?;
    corpus.name = a.name;
    write_dtm_dir(&corpus, &a.out)?;
    println!(
        "ingested {}: {} documents, {} terms, {} classes -> {}",
        corpus.name,
        corpus.n_docs(),
        corpus.n_terms(),
        corpus.classes().len(),
        a.out.display()
    );
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let corpus = generate_synthetic_corpus(
        a.classes,
        a.docs_per_class,
        a.terms_per_class,
        a.noise,
        a.seed,
    )?;
    write_dtm_dir(&corpus, &a.out)?;
    println!(
        "generated {} documents over {} classes ({} terms) -> {}",
        corpus.n_docs(),
        a.classes,
        corpus.n_terms(),
        a.out.display()
    );
    Ok(())
}

fn resolve_toggles(tm: TmKind, tfidf_flag: bool, lincomb_flag: bool) -> Result<(Toggle, Toggle)> {
    let tfidf = if tm.supports_tfidf() {
        if tfidf_flag {
            Toggle::On
        } else {
            Toggle::Off
        }
    } else {
        if tfidf_flag {
            return Err(Error::invalid(format!(
                "--tfidf does not apply to {}",
                tm.name()
            )));
        }
        Toggle::NotApplicable
    };
    let lincomb = if tm.has_topics() {
        if lincomb_flag {
            Toggle::On
        } else {
            Toggle::Off
        }
    } else {
        if lincomb_flag {
            return Err(Error::invalid(format!(
                "--lincomb does not apply to {}",
                tm.name()
            )));
        }
        Toggle::NotApplicable
    };
    Ok((tfidf, lincomb))
}

fn resolve_dr_params(dr: DrKind, a: &DrArgs) -> DrParams {
    match dr {
        DrKind::Tsne => {
            let d = TsneParams::default();
            DrParams::Tsne(TsneParams {
                perplexity: a.perplexity.unwrap_or(d.perplexity),
                n_iter: a.n_iter.unwrap_or(d.n_iter),
                learning_rate: a.learning_rate.unwrap_or(d.learning_rate),
            })
        }
        DrKind::Umap => {
            let d = UmapParams::default();
            DrParams::Umap(UmapParams {
                min_dist: a.min_dist.unwrap_or(d.min_dist),
                n_neighbors: a.n_neighbors.unwrap_or(d.n_neighbors),
                n_epochs: a.epochs.unwrap_or(d.n_epochs),
            })
        }
        DrKind::Mds => {
            let d = MdsParams::default();
            DrParams::Mds(MdsParams {
                max_iter: a.max_iter.unwrap_or(d.max_iter),
            })
        }
        DrKind::Som => {
            let d = SomParams::default();
            DrParams::Som(SomParams {
                grid_m: a.grid_m.unwrap_or(d.grid_m),
                grid_n: a.grid_n.unwrap_or(d.grid_n),
                epochs: a.epochs.unwrap_or(d.epochs),
            })
        }
    }
}

fn layout(a: LayoutArgs) -> Result<()> {
    let corpus = read_dtm_dir(&a.data)?;
    let tm = TmKind::parse(&a.model.tm)?;
    let dr = DrKind::parse(&a.dr.dr)?;
    let (tfidf, lincomb) = resolve_toggles(tm, a.model.tfidf, a.dr.lincomb)?;
    let reference_space = if a.vsm_reference {
        ReferenceSpace::Vsm
    } else {
        ReferenceSpace::TmSpace
    };
    let bundle = DatasetBundle {
        corpus,
        ext_embedding: a.model.ext_embedding.clone(),
    };
    let cfg = LayoutConfig {
        dataset: bundle.corpus.name.clone(),
        tm,
        tfidf,
        k_topics: a.model.topics,
        dr,
        lincomb,
        reference_space,
        dr_params: resolve_dr_params(dr, &a.dr),
        seed: a.seed,
    };

    let fit = fit_for_config(&bundle, tm, tfidf, cfg.k_topics, a.seed)?;
    let layout = build_layout(&fit, &cfg)?;
    write_layout_csv(
        &layout,
        &bundle.corpus.doc_ids,
        &bundle.corpus.labels,
        &a.out,
    )?;
    println!("{} -> {}", layout.config_ref, a.out.display());

    let reference = match reference_space {
        ReferenceSpace::TmSpace => fit.doc_distances.clone(),
        ReferenceSpace::Vsm => {
            let rep = textspace::models::DocumentRepresentation {
                matrix: bundle.corpus.dtm.to_dense(),
                metric: Metric::Cosine,
                topic_term: None,
                model_tag: "VSM".into(),
                tfidf: false,
            };
            pairwise_distances(&rep)?
        }
    };
    match evaluate_layout(
        &reference,
        &layout,
        &bundle.corpus.labels,
        DEFAULT_NEIGHBORS,
        PairBudget::default_for(layout.n_points()),
        seeding::derive_seed(a.seed, &["shepard"]),
    ) {
        Ok(mv) => {
            println!(
                "trust={:.4} cont={:.4} shepard={:.4} nh={:.4}",
                mv.trust, mv.cont, mv.shepard, mv.nh
            );
            println!(
                "dsc={:.4} silhouette={:.4} ch={:.4} db={:.4}",
                mv.dsc, mv.silhouette, mv.ch_raw, mv.db_raw
            );
        }
        Err(e) => println!("layout written; metrics unavailable: {e}"),
    }
    if let Some(svg_path) = &a.svg {
        export_layout_svg(&layout, &bundle.corpus.labels, &layout.config_ref, svg_path)?;
        println!("plot -> {}", svg_path.display());
    }
    Ok(())
}

fn parse_pairs(pairs: &[String], what: &str) -> Result<Vec<(String, String)>> {
    pairs
        .iter()
        .map(|p| {
            p.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::invalid(format!("{what} '{p}' is not name=value")))
        })
        .collect()
}

fn grid(a: GridArgs) -> Result<()> {
    let ext: BTreeMap<String, PathBuf> = parse_pairs(&a.ext_embeddings, "--ext-embedding")?
        .into_iter()
        .map(|(k, v)| (k, PathBuf::from(v)))
        .collect();
    let mut bundles = BTreeMap::new();
    for (name, dir) in parse_pairs(&a.data, "--data")? {
        let mut corpus = read_dtm_dir(Path::new(&dir))?;
        corpus.name = name.clone();
        bundles.insert(
            name.clone(),
            DatasetBundle {
                corpus,
                ext_embedding: ext.get(&name).cloned(),
            },
        );
    }
    let spec = GridSpec {
        datasets: bundles.keys().cloned().collect(),
        tms: a
            .tms
            .iter()
            .map(|s| TmKind::parse(s))
            .collect::<Result<Vec<_>>>()?,
        topics: a.topics.clone(),
        drs: a
            .drs
            .iter()
            .map(|s| DrKind::parse(s))
            .collect::<Result<Vec<_>>>()?,
        reference_space: if a.vsm_reference {
            ReferenceSpace::Vsm
        } else {
            ReferenceSpace::TmSpace
        },
        global_seed: a.global_seed,
    };
    let jobs = expand_grid(&spec)?;
    println!("{} jobs over {} datasets", jobs.len(), bundles.len());
    let opts = RunOptions {
        parallelism: a.parallelism,
        resume: a.resume,
        max_jobs: a.max_jobs,
        job_timeout: a.timeout_s.map(Duration::from_secs),
    };
    let summary = run_benchmark(&bundles, &jobs, &a.out, a.global_seed, &opts)?;
    println!(
        "ran {} (ok {}, failed {}), skipped {} already done; {}",
        summary.ran,
        summary.ok,
        summary.failed,
        summary.skipped,
        if summary.finalized {
            "finalized"
        } else {
            "left unfinalized (incomplete)"
        }
    );
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let records = read_results_csv(&a.results)?;
    let mut sizes = BTreeMap::new();
    for (name, m) in parse_pairs(&a.dataset_sizes, "--dataset-size")? {
        let m: usize = m
            .parse()
            .map_err(|_| Error::invalid(format!("--dataset-size {name}={m} is not a count")))?;
        sizes.insert(name, m);
    }
    let opts = AnalysisOptions {
        method: if a.spearman {
            CorrMethod::Spearman
        } else {
            CorrMethod::Pearson
        },
        threshold: a.threshold,
        dataset_sizes: sizes,
    };
    let report = write_analysis(&records, &a.out, &opts)?;
    println!(
        "analyzed {} rows ({} successful) -> {}",
        report.n_records,
        report.n_aggregated,
        a.out.display()
    );
    println!(
        "metric groups at {} >= {}:",
        report.correlations.method.name(),
        report.correlations.threshold
    );
    for (i, comp) in report.correlations.components.iter().enumerate() {
        println!("  {}: {}", i + 1, comp.join(", "));
    }
    let grouped: Vec<&str> = report
        .correlations
        .components
        .iter()
        .flatten()
        .map(|s| s.as_str())
        .collect();
    for name in METRIC_COLUMNS {
        if !grouped.contains(&name) {
            println!("  (constant, ungrouped: {name})");
        }
    }
    for (toggle, measure, t) in &report.sign_tests {
        println!(
            "{} on {}: {}/{} improved, p={:.3e}, 99% lower bound {:.4}",
            toggle.name(),
            measure.name(),
            t.k,
            t.n,
            t.p_value,
            t.lower_99
        );
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let (layout, _ids, labels) = read_layout_csv(&a.layout)?;
    export_layout_svg(&layout, &labels, &a.caption, &a.out)?;
    println!("{} points -> {}", layout.n_points(), a.out.display());
    Ok(())
}
