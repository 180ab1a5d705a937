//! Corpus loading, preprocessing, term weighting and synthetic fixtures.
//!
//! Two on-disk formats are understood: a label-directory tree (one
//! subdirectory per class, one UTF-8 text file per document) and the sparse
//! DTM triple (`matrix.txt`, `vocab.txt`, `labels.txt`).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding;
use crate::sparse::SparseMatrix;

/// A labeled corpus in document-term form.
///
/// Invariants: `dtm` is m x n with non-negative entries, `labels` and
/// `doc_ids` have length m, `vocabulary` has length n and is
/// lexicographically sorted with no duplicates, `doc_ids` are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub dtm: SparseMatrix,
    pub vocabulary: Vec<String>,
    pub labels: Vec<String>,
    pub doc_ids: Vec<String>,
}

impl Corpus {
    pub fn new(
        name: String,
        dtm: SparseMatrix,
        vocabulary: Vec<String>,
        labels: Vec<String>,
        doc_ids: Vec<String>,
    ) -> Result<Self> {
        let m = dtm.n_rows();
        let n = dtm.n_cols();
        if m == 0 {
            return Err(Error::EmptyCorpus);
        }
        if labels.len() != m || doc_ids.len() != m {
            return Err(Error::dim(format!(
                "matrix has {m} rows but {} labels / {} doc ids",
                labels.len(),
                doc_ids.len()
            )));
        }
        if vocabulary.len() != n {
            return Err(Error::dim(format!(
                "matrix has {n} columns but vocabulary has {} terms",
                vocabulary.len()
            )));
        }
        if vocabulary.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "vocabulary must be sorted and free of duplicates",
            ));
        }
        let mut seen = BTreeSet::new();
        for id in &doc_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate doc id '{id}'")));
            }
        }
        if dtm.iter().any(|(_, _, v)| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid(
                "term counts must be finite and non-negative",
            ));
        }
        Ok(Corpus {
            name,
            dtm,
            vocabulary,
            labels,
            doc_ids,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.dtm.n_rows()
    }

    pub fn n_terms(&self) -> usize {
        self.dtm.n_cols()
    }

    /// Distinct labels in first-appearance order.
    pub fn classes(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for l in &self.labels {
            if seen.insert(l.as_str()) {
                out.push(l.clone());
            }
        }
        out
    }

    /// Documents whose rows are all zero.
    pub fn empty_doc_ids(&self) -> Vec<String> {
        (0..self.n_docs())
            .filter(|&r| self.dtm.is_row_empty(r))
            .map(|r| self.doc_ids[r].clone())
            .collect()
    }
}

/// Raw documents before tokenization, as loaded from a label-directory tree.
#[derive(Debug, Clone)]
pub struct RawCorpus {
    pub name: String,
    /// (doc_id, label, text), sorted by doc_id.
    pub docs: Vec<(String, String, String)>,
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: BTreeSet<String>,
    /// Keep a term only if it occurs in at least this many documents.
    pub min_df: usize,
    /// Keep a term only if it occurs in at most this fraction of documents.
    pub max_df_fraction: f64,
    /// Strip a small set of inflectional suffixes (s, es, ed, ing, ly) when a
    /// stem of at least three characters remains.
    pub strip_suffixes: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: BTreeSet::new(),
            min_df: 1,
            max_df_fraction: 1.0,
            strip_suffixes: false,
        }
    }
}

/// Result of `preprocess`: the corpus plus the ids of documents whose rows
/// came out all zero (they are retained in the corpus).
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub corpus: Corpus,
    pub empty_doc_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum CorpusFormat {
    LabelDirectories(PreprocessConfig),
    DtmFiles,
}

/// Tokens are maximal runs of alphabetic characters after lowercasing.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}

const SUFFIXES: [&str; 5] = ["ing", "es", "ed", "ly", "s"];

fn strip_suffix(token: &str) -> &str {
    for suf in SUFFIXES {
        if let Some(stem) = token.strip_suffix(suf) {
            if stem.chars().count() >= 3 {
                return stem;
            }
        }
    }
    token
}

fn sanitize_id(s: &str) -> String {
    s.replace(['\t', '\n', '\r', ','], "_")
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    match format {
        CorpusFormat::DtmFiles => read_dtm_dir(path),
        CorpusFormat::LabelDirectories(config) => {
            let raw = load_label_directories(path)?;
            Ok(preprocess(&raw, &config)?.corpus)
        }
    }
}

/// Reads a directory whose subdirectories are class labels and whose files
/// are UTF-8 documents. Documents are ordered by (label, filename).
pub fn load_label_directories(path: &Path) -> Result<RawCorpus> {
    let name = dir_name(path);
    let mut labels: Vec<String> = Vec::new();
    for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        if entry.path().is_dir() {
            labels.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    labels.sort();
    if labels.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut docs = Vec::new();
    for label in &labels {
        let dir = path.join(label);
        let mut files: Vec<String> = Vec::new();
        for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if entry.path().is_file() {
                files.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        files.sort();
        for file in files {
            let fp = dir.join(&file);
            let text = fs::read_to_string(&fp).map_err(|e| Error::io(&fp, e))?;
            docs.push((sanitize_id(&format!("{label}/{file}")), label.clone(), text));
        }
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(RawCorpus { name, docs })
}

/// Tokenizes, filters and counts. The vocabulary is every surviving term,
/// sorted lexicographically; documents that end up with no surviving tokens
/// keep their all-zero rows and are listed in the report.
pub fn preprocess(raw: &RawCorpus, config: &PreprocessConfig) -> Result<Preprocessed> {
    if raw.docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.min_df < 1 {
        return Err(Error::invalid("min_df must be at least 1"));
    }
    if !(config.max_df_fraction > 0.0 && config.max_df_fraction <= 1.0) {
        return Err(Error::invalid("max_df_fraction must be in (0, 1]"));
    }
    let m = raw.docs.len();

    let mut doc_counts: Vec<BTreeMap<String, f64>> = Vec::with_capacity(m);
    for (_, _, text) in &raw.docs {
        let mut counts = BTreeMap::new();
        for tok in tokenize(text) {
            let tok = if config.strip_suffixes {
                strip_suffix(&tok).to_owned()
            } else {
                tok
            };
            if config.stopwords.contains(&tok) {
                continue;
            }
            *counts.entry(tok).or_insert(0.0) += 1.0;
        }
        doc_counts.push(counts);
    }

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for counts in &doc_counts {
        for term in counts.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let max_df = config.max_df_fraction * m as f64;
    let vocabulary: Vec<String> = df
        .iter()
        .filter(|&(_, &d)| d >= config.min_df && d as f64 <= max_df)
        .map(|(&t, _)| t.to_owned())
        .collect();
    if vocabulary.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let index: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();

    let mut triplets = Vec::new();
    for (r, counts) in doc_counts.iter().enumerate() {
        for (term, &count) in counts {
            if let Some(&c) = index.get(term.as_str()) {
                triplets.push((r, c, count));
            }
        }
    }
    let dtm = SparseMatrix::from_triplets(m, vocabulary.len(), triplets)?;
    let labels = raw.docs.iter().map(|(_, l, _)| l.clone()).collect();
    let doc_ids: Vec<String> = raw.docs.iter().map(|(id, _, _)| id.clone()).collect();
    let corpus = Corpus::new(raw.name.clone(), dtm, vocabulary, labels, doc_ids)?;
    let empty = corpus.empty_doc_ids();
    Ok(Preprocessed {
        corpus,
        empty_doc_ids: empty,
    })
}

/// Term weighting: count normalized by the term's corpus-wide total, times
/// the natural-log inverse document frequency ln(m / df).
///
/// Terms present in every document get weight zero everywhere (idf = 0);
/// terms present in no document are an error.
pub fn tfidf_weight(corpus: &Corpus) -> Result<SparseMatrix> {
    let m = corpus.n_docs() as f64;
    let col_sums = corpus.dtm.col_sums();
    let df = corpus.dtm.doc_frequencies();
    for (c, &d) in df.iter().enumerate() {
        if d == 0 {
            return Err(Error::ZeroColumn {
                term: corpus.vocabulary[c].clone(),
                col: c,
            });
        }
    }
    let mut weighted = corpus.dtm.clone();
    weighted.map_entries(|_, c, v| (v / col_sums[c]) * (m / df[c] as f64).ln());
    Ok(weighted)
}

/// Tokens drawn per synthetic document.
const TOKENS_PER_DOC: usize = 100;

/// Block-structured corpus: k classes, each owning `terms_per_class`
/// consecutive vocabulary terms. Each document draws round(noise * 100) of
/// its 100 tokens uniformly from the whole vocabulary and the rest uniformly
/// from its class block.
pub fn generate_synthetic_corpus(
    k: usize,
    docs_per_class: usize,
    terms_per_class: usize,
    noise: f64,
    seed: u64,
) -> Result<Corpus> {
    if k == 0 || docs_per_class == 0 || terms_per_class == 0 {
        return Err(Error::invalid(
            "k, docs_per_class and terms_per_class must be positive",
        ));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::invalid("noise must lie in [0, 1]"));
    }
    let n = k * terms_per_class;
    let m = k * docs_per_class;
    let vocabulary: Vec<String> = (0..k)
        .flat_map(|ci| (0..terms_per_class).map(move |ti| format!("c{ci:03}w{ti:04}")))
        .collect();
    debug_assert!(vocabulary.windows(2).all(|w| w[0] < w[1]));

    let mut rng = seeding::rng_from(seed);
    let n_noise = (noise * TOKENS_PER_DOC as f64).round() as usize;
    let n_block = TOKENS_PER_DOC - n_noise;

    let mut triplets = Vec::new();
    let mut labels = Vec::with_capacity(m);
    let mut doc_ids = Vec::with_capacity(m);
    for ci in 0..k {
        let block = ci * terms_per_class..(ci + 1) * terms_per_class;
        for di in 0..docs_per_class {
            let r = ci * docs_per_class + di;
            let mut counts = vec![0.0; n];
            for _ in 0..n_block {
                counts[rng.random_range(block.clone())] += 1.0;
            }
            for _ in 0..n_noise {
                counts[rng.random_range(0..n)] += 1.0;
            }
            for (c, &v) in counts.iter().enumerate() {
                if v > 0.0 {
                    triplets.push((r, c, v));
                }
            }
            labels.push(format!("class{ci}"));
            doc_ids.push(format!("class{ci}-doc{di:04}"));
        }
    }
    let dtm = SparseMatrix::from_triplets(m, n, triplets)?;
    Corpus::new(
        format!("synth-k{k}-n{noise}"),
        dtm,
        vocabulary,
        labels,
        doc_ids,
    )
}

fn dir_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into())
}

// --- DTM triple on disk -----------------------------------------------------

fn fmt_count(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub fn write_dtm_dir(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut matrix = String::new();
    matrix.push_str(&format!(
        "{} {} {}\n",
        corpus.n_docs(),
        corpus.n_terms(),
        corpus.dtm.nnz()
    ));
    for (r, c, v) in corpus.dtm.iter() {
        matrix.push_str(&format!("{r} {c} {}\n", fmt_count(v)));
    }
    let mp = dir.join("matrix.txt");
    fs::write(&mp, matrix).map_err(|e| Error::io(&mp, e))?;

    let vp = dir.join("vocab.txt");
    let mut vocab = corpus.vocabulary.join("\n");
    vocab.push('\n');
    fs::write(&vp, vocab).map_err(|e| Error::io(&vp, e))?;

    let lp = dir.join("labels.txt");
    let mut labels = String::new();
    for (id, label) in corpus.doc_ids.iter().zip(&corpus.labels) {
        labels.push_str(&format!("{id}\t{label}\n"));
    }
    fs::write(&lp, labels).map_err(|e| Error::io(&lp, e))?;
    Ok(())
}

pub fn read_dtm_dir(dir: &Path) -> Result<Corpus> {
    let mp = dir.join("matrix.txt");
    let matrix_text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let mut lines = matrix_text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&mp, 1, "missing header line"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(&mp, 1, format!("bad header: {e}")))?;
    let [m, n, nnz] = dims[..] else {
        return Err(Error::parse(&mp, 1, "header must be 'm n nnz'"));
    };
    let mut triplets = Vec::with_capacity(nnz);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [r, c, v] = parts[..] else {
            return Err(Error::parse(&mp, i + 1, "entry must be 'row col count'"));
        };
        let r: usize = r
            .parse()
            .map_err(|e| Error::parse(&mp, i + 1, format!("bad row: {e}")))?;
        let c: usize = c
            .parse()
            .map_err(|e| Error::parse(&mp, i + 1, format!("bad col: {e}")))?;
        let v: f64 = v
            .parse()
            .map_err(|e| Error::parse(&mp, i + 1, format!("bad count: {e}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::parse(
                &mp,
                i + 1,
                "counts must be finite and non-negative",
            ));
        }
        if r >= m || c >= n {
            return Err(Error::parse(
                &mp,
                i + 1,
                format!("entry ({r}, {c}) outside {m}x{n}"),
            ));
        }
        triplets.push((r, c, v));
    }
    if triplets.len() != nnz {
        return Err(Error::parse(
            &mp,
            1,
            format!("header promises {nnz} entries, found {}", triplets.len()),
        ));
    }
    let dtm = SparseMatrix::from_triplets(m, n, triplets)?;

    let vp = dir.join("vocab.txt");
    let vocab_text = fs::read_to_string(&vp).map_err(|e| Error::io(&vp, e))?;
    let vocabulary: Vec<String> = vocab_text.lines().map(str::to_owned).collect();
    if vocabulary.len() != n {
        return Err(Error::parse(
            &vp,
            vocabulary.len(),
            format!("expected {n} terms, found {}", vocabulary.len()),
        ));
    }

    let lp = dir.join("labels.txt");
    let labels_text = fs::read_to_string(&lp).map_err(|e| Error::io(&lp, e))?;
    let mut doc_ids = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for (i, line) in labels_text.lines().enumerate() {
        let Some((id, label)) = line.split_once('\t') else {
            return Err(Error::parse(&lp, i + 1, "line must be 'doc_id<TAB>label'"));
        };
        doc_ids.push(id.to_owned());
        labels.push(label.to_owned());
    }
    if doc_ids.len() != m {
        return Err(Error::parse(
            &lp,
            doc_ids.len(),
            format!("expected {m} labels, found {}", doc_ids.len()),
        ));
    }
    Corpus::new(dir_name(dir), dtm, vocabulary, labels, doc_ids)
}
