//! Topic models and document representations.
//!
//! `fit_representation` turns a (possibly weighted) document-term matrix into
//! a dense per-document representation plus, where the model has one, a
//! topic-term matrix. Each representation carries the metric its space is
//! compared under: cosine everywhere except LDA, whose rows are probability
//! distributions and compare under Jensen-Shannon distance.

pub mod lda;
pub mod lsi;
pub mod nmf;

pub use lda::LdaParams;
pub use nmf::NmfParams;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Cosine,
    JensenShannon,
    Euclidean,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::JensenShannon => "jensen-shannon",
            Metric::Euclidean => "euclidean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TmKind {
    Vsm,
    Lsi,
    Nmf,
    Lda,
    Ext,
}

impl TmKind {
    pub fn name(self) -> &'static str {
        match self {
            TmKind::Vsm => "VSM",
            TmKind::Lsi => "LSI",
            TmKind::Nmf => "NMF",
            TmKind::Lda => "LDA",
            TmKind::Ext => "EXT",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "VSM" => Ok(TmKind::Vsm),
            "LSI" => Ok(TmKind::Lsi),
            "NMF" => Ok(TmKind::Nmf),
            "LDA" => Ok(TmKind::Lda),
            "EXT" => Ok(TmKind::Ext),
            _ => Err(Error::invalid(format!("unknown topic model '{s}'"))),
        }
    }

    /// Whether the tf-idf toggle applies to this model. LDA consumes raw
    /// counts only; EXT bypasses the matrix entirely.
    pub fn supports_tfidf(self) -> bool {
        !matches!(self, TmKind::Lda | TmKind::Ext)
    }

    /// Whether the model yields topic vectors that a linear-combination
    /// layout can place.
    pub fn has_topics(self) -> bool {
        matches!(self, TmKind::Lsi | TmKind::Nmf | TmKind::Lda)
    }
}

#[derive(Debug, Clone)]
pub enum TmParams {
    Vsm,
    Lsi { k: usize },
    Nmf(NmfParams),
    Lda(LdaParams),
    Ext { path: PathBuf },
}

impl TmParams {
    pub fn kind(&self) -> TmKind {
        match self {
            TmParams::Vsm => TmKind::Vsm,
            TmParams::Lsi { .. } => TmKind::Lsi,
            TmParams::Nmf(_) => TmKind::Nmf,
            TmParams::Lda(_) => TmKind::Lda,
            TmParams::Ext { .. } => TmKind::Ext,
        }
    }
}

/// Dense per-document representation produced by a topic model.
#[derive(Debug, Clone)]
pub struct DocumentRepresentation {
    /// m x d document coordinates (d = vocabulary size for VSM, K otherwise).
    pub matrix: Array2<f64>,
    /// Metric the representation's space is compared under.
    pub metric: Metric,
    /// K x n topic-term matrix, for models that have one.
    pub topic_term: Option<Array2<f64>>,
    /// Model and hyperparameters that produced this, e.g. "LSI(K=6)".
    pub model_tag: String,
    /// Whether the input matrix was tf-idf weighted.
    pub tfidf: bool,
}

/// Symmetric pairwise distance matrix with zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub values: Array2<f64>,
    pub metric: Metric,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// Fits a representation. `weighted` records whether `matrix` carries tf-idf
/// weights rather than raw counts; LDA rejects weighted input.
pub fn fit_representation(
    matrix: &SparseMatrix,
    weighted: bool,
    params: &TmParams,
    seed: u64,
) -> Result<DocumentRepresentation> {
    let m = matrix.n_rows();
    let n = matrix.n_cols();
    if m == 0 || n == 0 {
        return Err(Error::EmptyCorpus);
    }
    match params {
        TmParams::Vsm => Ok(DocumentRepresentation {
            matrix: matrix.to_dense(),
            metric: Metric::Cosine,
            topic_term: None,
            model_tag: "VSM".into(),
            tfidf: weighted,
        }),
        TmParams::Lsi { k } => {
            check_k(*k, m, n)?;
            let (docs, topics) = lsi::factorize(&matrix.to_dense(), *k)?;
            Ok(DocumentRepresentation {
                matrix: docs,
                metric: Metric::Cosine,
                topic_term: Some(topics),
                model_tag: format!("LSI(K={k})"),
                tfidf: weighted,
            })
        }
        TmParams::Nmf(p) => {
            check_k(p.k, m, n)?;
            let fit = nmf::factorize(&matrix.to_dense(), p, seed)?;
            Ok(DocumentRepresentation {
                matrix: fit.w,
                metric: Metric::Cosine,
                topic_term: Some(fit.h),
                model_tag: format!("NMF(K={})", p.k),
                tfidf: weighted,
            })
        }
        TmParams::Lda(p) => {
            if weighted {
                return Err(Error::WeightedInputRejected);
            }
            let fit = lda::gibbs(matrix, p, seed)?;
            Ok(DocumentRepresentation {
                matrix: fit.theta,
                metric: Metric::JensenShannon,
                topic_term: Some(fit.phi),
                model_tag: format!("LDA(K={})", p.k),
                tfidf: false,
            })
        }
        TmParams::Ext { path } => {
            let emb = read_ext_embedding(path)?;
            if emb.nrows() != m {
                return Err(Error::dim(format!(
                    "external embedding has {} rows, corpus has {m} documents",
                    emb.nrows()
                )));
            }
            Ok(DocumentRepresentation {
                matrix: emb,
                metric: Metric::Cosine,
                topic_term: None,
                model_tag: "EXT".into(),
                tfidf: weighted,
            })
        }
    }
}

fn check_k(k: usize, m: usize, n: usize) -> Result<()> {
    if k < 1 || k > m.min(n) {
        return Err(Error::TopicCountOutOfRange { k, m, n });
    }
    Ok(())
}

/// Reads an m x K embedding file: a `m K` header line, then m rows of K
/// whitespace-separated floats.
pub fn read_ext_embedding(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::parse(path, 1, format!("bad header: {e}")))?;
    let [m, k] = dims[..] else {
        return Err(Error::parse(path, 1, "header must be 'm K'"));
    };
    if m == 0 || k == 0 {
        return Err(Error::parse(path, 1, "embedding must be non-empty"));
    }
    let mut out = Array2::zeros((m, k));
    let mut row = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if row >= m {
            return Err(Error::parse(path, i + 1, format!("more than {m} rows")));
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(path, i + 1, format!("bad value: {e}")))?;
        if vals.len() != k {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {k} values, found {}", vals.len()),
            ));
        }
        for (c, v) in vals.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::parse(path, i + 1, "values must be finite"));
            }
            out[[row, c]] = v;
        }
        row += 1;
    }
    if row != m {
        return Err(Error::parse(
            path,
            row + 1,
            format!("expected {m} rows, found {row}"),
        ));
    }
    Ok(out)
}

pub fn write_ext_embedding(matrix: &Array2<f64>, path: &Path) -> Result<()> {
    let mut text = format!("{} {}\n", matrix.nrows(), matrix.ncols());
    for row in matrix.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        text.push_str(&cells.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Distances between a representation's documents under its own metric.
pub fn pairwise_distances(rep: &DocumentRepresentation) -> Result<DistanceMatrix> {
    distance_matrix(&rep.matrix, rep.metric)
}

/// Symmetric distance matrix over the rows of `points`.
pub fn distance_matrix(points: &Array2<f64>, metric: Metric) -> Result<DistanceMatrix> {
    let m = points.nrows();
    let mut values = Array2::zeros((m, m));
    match metric {
        Metric::Cosine => {
            let mut norms = Vec::with_capacity(m);
            for (r, row) in points.rows().into_iter().enumerate() {
                let n = row.dot(&row).sqrt();
                if n == 0.0 {
                    return Err(Error::ZeroNormRow { row: r });
                }
                norms.push(n);
            }
            for i in 0..m {
                let ri = points.row(i);
                for j in (i + 1)..m {
                    let sim = ri.dot(&points.row(j)) / (norms[i] * norms[j]);
                    let d = (1.0 - sim).max(0.0);
                    values[[i, j]] = d;
                    values[[j, i]] = d;
                }
            }
        }
        Metric::JensenShannon => {
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|i| validate_distribution(points, i))
                .collect::<Result<_>>()?;
            for i in 0..m {
                for j in (i + 1)..m {
                    let d = js_distance(&rows[i], &rows[j]);
                    values[[i, j]] = d;
                    values[[j, i]] = d;
                }
            }
        }
        Metric::Euclidean => {
            for i in 0..m {
                let ri = points.row(i);
                for j in (i + 1)..m {
                    let mut s = 0.0;
                    for (a, b) in ri.iter().zip(points.row(j).iter()) {
                        let diff = a - b;
                        s += diff * diff;
                    }
                    let d = s.sqrt();
                    values[[i, j]] = d;
                    values[[j, i]] = d;
                }
            }
        }
    }
    Ok(DistanceMatrix { values, metric })
}

/// Rows must be probability vectors up to rounding; they are renormalized
/// exactly before use.
fn validate_distribution(points: &Array2<f64>, row: usize) -> Result<Vec<f64>> {
    let r = points.row(row);
    let mut sum = 0.0;
    for &v in r.iter() {
        if v < -1e-9 || !v.is_finite() {
            return Err(Error::NotADistribution { row });
        }
        sum += v.max(0.0);
    }
    if (sum - 1.0).abs() > 1e-6 || sum <= 0.0 {
        return Err(Error::NotADistribution { row });
    }
    Ok(r.iter().map(|&v| v.max(0.0) / sum).collect())
}

fn entropy_base2(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// Square root of the base-2 Jensen-Shannon divergence; lands in [0, 1].
fn js_distance(p: &[f64], q: &[f64]) -> f64 {
    let mid: Vec<f64> = p.iter().zip(q).map(|(&a, &b)| 0.5 * (a + b)).collect();
    let jsd = entropy_base2(&mid) - 0.5 * (entropy_base2(p) + entropy_base2(q));
    jsd.clamp(0.0, 1.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    use crate::corpus::generate_synthetic_corpus;
    use crate::seeding;

    #[test]
    fn vsm_is_a_passthrough() {
        let m = SparseMatrix::from_triplets(2, 3, [(0, 0, 2.0), (1, 2, 1.0)]).unwrap();
        let rep = fit_representation(&m, false, &TmParams::Vsm, 0).unwrap();
        assert_eq!(rep.matrix, m.to_dense());
        assert_eq!(rep.metric, Metric::Cosine);
        assert!(rep.topic_term.is_none());
    }

    #[test]
    fn cosine_distance_basics() {
        let pts = array![[1.0, 0.0], [0.0, 2.0], [3.0, 0.0]];
        let d = distance_matrix(&pts, Metric::Cosine).unwrap();
        assert_eq!(d.values[[0, 1]], 1.0);
        assert!(d.values[[0, 2]].abs() < 1e-15);
        assert_eq!(d.values[[0, 0]], 0.0);
        assert_eq!(d.values[[1, 0]], d.values[[0, 1]]);
    }

    #[test]
    fn cosine_rejects_zero_rows() {
        let pts = array![[1.0, 0.0], [0.0, 0.0]];
        match distance_matrix(&pts, Metric::Cosine) {
            Err(Error::ZeroNormRow { row }) => assert_eq!(row, 1),
            other => panic!("expected zero-norm error, got {other:?}"),
        }
    }

    #[test]
    fn js_distance_bounds() {
        let pts = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
        let d = distance_matrix(&pts, Metric::JensenShannon).unwrap();
        // disjoint supports hit the upper bound exactly
        assert!((d.values[[0, 1]] - 1.0).abs() < 1e-12);
        assert!(d.values[[0, 2]] > 0.0 && d.values[[0, 2]] < 1.0);
        assert_eq!(d.values[[2, 0]], d.values[[0, 2]]);
    }

    #[test]
    fn js_rejects_non_distributions() {
        let pts = array![[0.5, 0.2]];
        assert!(matches!(
            distance_matrix(&pts, Metric::JensenShannon),
            Err(Error::NotADistribution { row: 0 })
        ));
    }

    #[test]
    fn euclidean_is_the_usual_one() {
        let pts = array![[0.0, 0.0], [3.0, 4.0]];
        let d = distance_matrix(&pts, Metric::Euclidean).unwrap();
        assert!((d.values[[0, 1]] - 5.0).abs() < 1e-15);
    }

    #[test]
    fn distances_commute_with_permutation() {
        let mut rng = seeding::rng_from(31);
        for metric in [Metric::Cosine, Metric::Euclidean] {
            let pts = Array2::from_shape_fn((8, 4), |_| rng.random::<f64>() + 0.1);
            let d = distance_matrix(&pts, metric).unwrap();
            let perm = [3usize, 0, 7, 1, 5, 2, 6, 4];
            let mut permuted = Array2::zeros((8, 4));
            for (new_i, &old_i) in perm.iter().enumerate() {
                permuted.row_mut(new_i).assign(&pts.row(old_i));
            }
            let dp = distance_matrix(&permuted, metric).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    let expect = d.values[[perm[i], perm[j]]];
                    assert!((dp.values[[i, j]] - expect).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn lsi_identity_matrix_gives_orthogonal_docs() {
        let m = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let rep = fit_representation(&m, false, &TmParams::Lsi { k: 2 }, 0).unwrap();
        let d = pairwise_distances(&rep).unwrap();
        assert!((d.values[[0, 1]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lsi_full_rank_preserves_cosine() {
        let mut rng = seeding::rng_from(17);
        let dense = Array2::from_shape_fn((7, 5), |_| rng.random_range(0..6) as f64);
        let sparse =
            SparseMatrix::from_triplets(7, 5, dense.indexed_iter().map(|((r, c), &v)| (r, c, v)))
                .unwrap();
        let base = distance_matrix(&dense, Metric::Cosine).unwrap();
        let rep = fit_representation(&sparse, false, &TmParams::Lsi { k: 5 }, 0).unwrap();
        let proj = pairwise_distances(&rep).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert!(
                    (base.values[[i, j]] - proj.values[[i, j]]).abs() < 1e-8,
                    "({i},{j}): {} vs {}",
                    base.values[[i, j]],
                    proj.values[[i, j]]
                );
            }
        }
    }

    #[test]
    fn lsi_sign_convention_and_k_checks() {
        let mut rng = seeding::rng_from(4);
        let entries: Vec<(usize, usize, f64)> = (0..6)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .map(|(r, c)| (r, c, rng.random_range(0..5) as f64))
            .collect();
        let sparse = SparseMatrix::from_triplets(6, 4, entries).unwrap();
        let rep = fit_representation(&sparse, false, &TmParams::Lsi { k: 3 }, 0).unwrap();
        let topics = rep.topic_term.as_ref().unwrap();
        assert_eq!(topics.nrows(), 3);
        assert_eq!(topics.ncols(), 4);
        for row in topics.rows() {
            let mut best = 0;
            for (i, v) in row.iter().enumerate() {
                if v.abs() > row[best].abs() {
                    best = i;
                }
            }
            assert!(row[best] > 0.0, "dominant loading must be positive");
        }
        assert!(matches!(
            fit_representation(&sparse, false, &TmParams::Lsi { k: 5 }, 0),
            Err(Error::TopicCountOutOfRange { .. })
        ));
    }

    #[test]
    fn nmf_shapes_and_monotone_objective() {
        let corpus = generate_synthetic_corpus(3, 8, 6, 0.2, 21).unwrap();
        let params = NmfParams {
            k: 3,
            ..NmfParams::default()
        };
        let fit = nmf::factorize(&corpus.dtm.to_dense(), &params, 77).unwrap();
        assert_eq!(fit.w.nrows(), 24);
        assert_eq!(fit.w.ncols(), 3);
        assert_eq!(fit.h.nrows(), 3);
        assert_eq!(fit.h.ncols(), 18);
        assert!(fit.w.iter().all(|&v| v >= 0.0));
        assert!(fit.h.iter().all(|&v| v >= 0.0));
        assert!(fit.objective_trace.len() >= 2);
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn nmf_is_deterministic_per_seed() {
        let corpus = generate_synthetic_corpus(2, 6, 5, 0.1, 3).unwrap();
        let p = TmParams::Nmf(NmfParams {
            k: 2,
            ..NmfParams::default()
        });
        let a = fit_representation(&corpus.dtm, false, &p, 5).unwrap();
        let b = fit_representation(&corpus.dtm, false, &p, 5).unwrap();
        assert_eq!(a.matrix, b.matrix);
        let c = fit_representation(&corpus.dtm, false, &p, 6).unwrap();
        assert_ne!(a.matrix, c.matrix);
    }

    #[test]
    fn lda_rows_are_distributions() {
        let corpus = generate_synthetic_corpus(2, 10, 8, 0.1, 13).unwrap();
        let p = LdaParams {
            k: 2,
            gibbs_iters: 60,
            ..LdaParams::default()
        };
        let rep = fit_representation(&corpus.dtm, false, &TmParams::Lda(p), 42).unwrap();
        assert_eq!(rep.metric, Metric::JensenShannon);
        for row in rep.matrix.rows() {
            let s: f64 = row.sum();
            assert!((s - 1.0).abs() < 1e-9, "theta row sums to {s}");
            assert!(row.iter().all(|&v| v > 0.0));
        }
        for row in rep.topic_term.as_ref().unwrap().rows() {
            let s: f64 = row.sum();
            assert!((s - 1.0).abs() < 1e-9, "phi row sums to {s}");
        }
    }

    #[test]
    fn lda_separates_clean_classes() {
        let corpus = generate_synthetic_corpus(2, 12, 10, 0.0, 8).unwrap();
        let p = LdaParams {
            k: 2,
            gibbs_iters: 200,
            ..LdaParams::default()
        };
        let rep = fit_representation(&corpus.dtm, false, &TmParams::Lda(p), 9).unwrap();
        let d = pairwise_distances(&rep).unwrap();
        let mut within = (0.0, 0usize);
        let mut across = (0.0, 0usize);
        for i in 0..24 {
            for j in (i + 1)..24 {
                if corpus.labels[i] == corpus.labels[j] {
                    within = (within.0 + d.values[[i, j]], within.1 + 1);
                } else {
                    across = (across.0 + d.values[[i, j]], across.1 + 1);
                }
            }
        }
        let within = within.0 / within.1 as f64;
        let across = across.0 / across.1 as f64;
        assert!(within < across, "within {within} not below across {across}");
    }

    #[test]
    fn lda_rejects_weighted_and_fractional_input() {
        let corpus = generate_synthetic_corpus(2, 4, 4, 0.0, 2).unwrap();
        let p = TmParams::Lda(LdaParams {
            k: 2,
            gibbs_iters: 5,
            ..LdaParams::default()
        });
        assert!(matches!(
            fit_representation(&corpus.dtm, true, &p, 0),
            Err(Error::WeightedInputRejected)
        ));
        let frac = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.5), (1, 1, 1.0)]).unwrap();
        assert!(matches!(
            fit_representation(&frac, false, &p, 0),
            Err(Error::NonIntegerCounts { row: 0, col: 0 })
        ));
    }

    #[test]
    fn ext_embedding_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        let m = array![[1.0, -2.5], [0.25, 1e-7], [3.0, 4.0]];
        write_ext_embedding(&m, &path).unwrap();
        let back = read_ext_embedding(&path).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        let sparse = SparseMatrix::from_triplets(3, 2, [(0, 0, 1.0)]).unwrap();
        let rep =
            fit_representation(&sparse, false, &TmParams::Ext { path: path.clone() }, 0).unwrap();
        assert_eq!(rep.matrix.nrows(), 3);
        let wrong = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0)]).unwrap();
        assert!(fit_representation(&wrong, false, &TmParams::Ext { path }, 0).is_err());
    }

    #[test]
    fn ext_embedding_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        std::fs::write(&path, "2 2\n1.0 2.0\n3.0 oops\n").unwrap();
        assert!(matches!(
            read_ext_embedding(&path),
            Err(Error::Parse { .. })
        ));
        std::fs::write(&path, "3 2\n1.0 2.0\n3.0 4.0\n").unwrap();
        assert!(matches!(
            read_ext_embedding(&path),
            Err(Error::Parse { .. })
        ));
    }
}
