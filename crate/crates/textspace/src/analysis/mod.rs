//! Statistical analysis of benchmark results: metric aggregation,
//! correlation structure, paired sign tests for the pipeline toggles,
//! per-dataset bests, distribution summaries, and the rank of default
//! hyperparameters inside their sweeps.

pub mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::Path;

use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::quality::{average_ranks, pearson, MetricVector};
use crate::runner::{encode_config_id, LayoutConfig, QualityRecord, Toggle};

/// A successful result row with its group-normalized and aggregate scores.
#[derive(Debug, Clone)]
pub struct AggregatedRecord {
    pub config: LayoutConfig,
    pub metrics: MetricVector,
    /// ch_raw divided by the largest finite ch_raw of its
    /// (dataset, model, weighting) group; infinite values map to 1.
    pub beta_ch: f64,
    /// db_raw normalized the same way.
    pub beta_db: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Layout-accuracy aggregate: equal parts neighborhood hit and the mean of
/// the three rank-preservation scores (with Shepard shifted from [-1, 1]
/// into [0, 1]).
pub fn aggregate_alpha(trust: f64, cont: f64, shepard: f64, nh: f64) -> f64 {
    0.5 * nh + 0.5 * ((trust + cont + 0.5 * (shepard + 1.0)) / 3.0)
}

/// Cluster-separation aggregate over the normalized Davies-Bouldin (flipped
/// so higher is better), normalized Calinski-Harabasz, and the mean of the
/// shifted silhouette and the distance consistency.
pub fn aggregate_beta(beta_db: f64, beta_ch: f64, silhouette: f64, dsc: f64) -> f64 {
    (1.0 - beta_db) / 3.0 + beta_ch / 3.0 + (0.5 * (silhouette + 1.0) + dsc) / 2.0 / 3.0
}

fn group_key(cfg: &LayoutConfig) -> (String, &'static str, &'static str) {
    (cfg.dataset.clone(), cfg.tm.name(), cfg.tfidf.letter())
}

/// Normalizes the two unbounded metrics within (dataset, model, weighting)
/// groups and attaches the two aggregate scores. Failed rows are dropped.
///
/// Within a group, finite values divide by the group's largest finite value
/// and infinities map to 1. A group whose values are all infinite has no
/// usable scale and is an error; a group whose largest finite value is zero
/// normalizes its finite values to zero.
pub fn aggregate(records: &[QualityRecord]) -> Result<Vec<AggregatedRecord>> {
    let ok: Vec<&QualityRecord> = records
        .iter()
        .filter(|r| r.is_ok() && r.metrics.is_some())
        .collect();

    let mut ch_max: BTreeMap<_, f64> = BTreeMap::new();
    let mut db_max: BTreeMap<_, f64> = BTreeMap::new();
    for r in &ok {
        let key = group_key(&r.config);
        let mv = r.metrics.as_ref().unwrap();
        for (max, v) in [(&mut ch_max, mv.ch_raw), (&mut db_max, mv.db_raw)] {
            let e = max.entry(key.clone()).or_insert(f64::NEG_INFINITY);
            if v.is_finite() && v > *e {
                *e = v;
            }
        }
    }

    let normalize = |v: f64, max: f64, key: &(String, &'static str, &'static str)| -> Result<f64> {
        if max == f64::NEG_INFINITY {
            return Err(Error::NoFiniteInGroup {
                key: format!("({},{},{})", key.0, key.1, key.2),
            });
        }
        if v.is_infinite() {
            return Ok(1.0);
        }
        Ok(if max > 0.0 { v / max } else { 0.0 })
    };

    let mut out = Vec::with_capacity(ok.len());
    for r in ok {
        let key = group_key(&r.config);
        let mv = *r.metrics.as_ref().unwrap();
        let beta_ch = normalize(mv.ch_raw, ch_max[&key], &key)?;
        let beta_db = normalize(mv.db_raw, db_max[&key], &key)?;
        out.push(AggregatedRecord {
            config: r.config.clone(),
            metrics: mv,
            beta_ch,
            beta_db,
            alpha: aggregate_alpha(mv.trust, mv.cont, mv.shepard, mv.nh),
            beta: aggregate_beta(beta_db, beta_ch, mv.silhouette, mv.dsc),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// metric correlations

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrMethod {
    Pearson,
    Spearman,
}

impl CorrMethod {
    pub fn name(self) -> &'static str {
        match self {
            CorrMethod::Pearson => "pearson",
            CorrMethod::Spearman => "spearman",
        }
    }
}

pub const METRIC_COLUMNS: [&str; 8] = [
    "trust",
    "cont",
    "shepard",
    "nh",
    "dsc",
    "silhouette",
    "beta_ch",
    "1-beta_db",
];

#[derive(Debug, Clone)]
pub struct CorrelationReport {
    pub method: CorrMethod,
    pub threshold: f64,
    /// Correlations between the eight metric columns; NaN where a column is
    /// constant.
    pub matrix: [[f64; 8]; 8],
    /// Groups of metrics connected by pairwise correlation >= threshold.
    /// Constant columns are excluded entirely.
    pub components: Vec<Vec<String>>,
}

fn metric_columns(records: &[AggregatedRecord]) -> [Vec<f64>; 8] {
    let mut cols: [Vec<f64>; 8] = Default::default();
    for r in records {
        cols[0].push(r.metrics.trust);
        cols[1].push(r.metrics.cont);
        cols[2].push(r.metrics.shepard);
        cols[3].push(r.metrics.nh);
        cols[4].push(r.metrics.dsc);
        cols[5].push(r.metrics.silhouette);
        cols[6].push(r.beta_ch);
        cols[7].push(1.0 - r.beta_db);
    }
    cols
}

/// Correlates the eight (all higher-is-better) metric columns and groups
/// them into connected components at the threshold.
pub fn metric_correlations(
    records: &[AggregatedRecord],
    method: CorrMethod,
    threshold: f64,
) -> Result<CorrelationReport> {
    if records.len() < 3 {
        return Err(Error::NoPairs {
            what: "metric correlation".to_string(),
        });
    }
    let raw = metric_columns(records);
    let cols: Vec<Vec<f64>> = match method {
        CorrMethod::Pearson => raw.to_vec(),
        CorrMethod::Spearman => raw.iter().map(|c| average_ranks(c)).collect(),
    };
    let constant: Vec<bool> = cols.iter().map(|c| c.iter().all(|&v| v == c[0])).collect();

    let mut matrix = [[f64::NAN; 8]; 8];
    for i in 0..8 {
        if constant[i] {
            continue;
        }
        matrix[i][i] = 1.0;
        for j in (i + 1)..8 {
            if constant[j] {
                continue;
            }
            let c = pearson(&cols[i], &cols[j]).unwrap_or(f64::NAN);
            matrix[i][j] = c;
            matrix[j][i] = c;
        }
    }

    // connected components over the non-constant columns
    let mut component_of = [usize::MAX; 8];
    let mut next = 0usize;
    for start in 0..8 {
        if constant[start] || component_of[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component_of[start] = next;
        while let Some(i) = stack.pop() {
            for j in 0..8 {
                if !constant[j] && component_of[j] == usize::MAX && matrix[i][j] >= threshold {
                    component_of[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    let mut components = vec![Vec::new(); next];
    for i in 0..8 {
        if component_of[i] != usize::MAX {
            components[component_of[i]].push(METRIC_COLUMNS[i].to_string());
        }
    }

    Ok(CorrelationReport {
        method,
        threshold,
        matrix,
        components,
    })
}

// ---------------------------------------------------------------------------
// paired sign tests

#[derive(Debug, Clone, Copy)]
pub struct SignTest {
    /// Pairs with a strict difference (ties are uninformative and dropped).
    pub n: usize,
    /// Pairs where the toggled-on row is strictly better.
    pub k: usize,
    /// One-sided p-value for "on is no better than off".
    pub p_value: f64,
    /// One-sided 0.99 lower confidence bound on the improvement probability.
    pub lower_99: f64,
    pub upper: f64,
}

/// Exact sign test for k improvements out of n informative pairs.
pub fn sign_test(k: usize, n: usize) -> Result<SignTest> {
    if n == 0 || k > n {
        return Err(Error::NoPairs {
            what: format!("sign test with k={k}, n={n}"),
        });
    }
    // P[X >= k] under Binomial(n, 1/2) via the regularized incomplete beta
    let p_value = if k == 0 {
        1.0
    } else if k == n {
        0.5f64.powi(n as i32)
    } else {
        beta_reg(k as f64, (n - k + 1) as f64, 0.5)
    };
    let lower_99 = if k == 0 {
        0.0
    } else {
        Beta::new(k as f64, (n - k + 1) as f64)
            .map_err(|e| Error::invalid(format!("beta distribution: {e}")))?
            .inverse_cdf(0.01)
    };
    Ok(SignTest {
        n,
        k,
        p_value,
        lower_99,
        upper: 1.0,
    })
}

/// Which aggregate a comparison ranks records by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Alpha,
    Beta,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::Alpha => "alpha",
            Measure::Beta => "beta",
        }
    }

    fn of(self, r: &AggregatedRecord) -> f64 {
        match self {
            Measure::Alpha => r.alpha,
            Measure::Beta => r.beta,
        }
    }
}

/// Which pipeline switch a paired comparison flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairedToggle {
    Tfidf,
    Lincomb,
}

impl PairedToggle {
    pub fn name(self) -> &'static str {
        match self {
            PairedToggle::Tfidf => "tfidf",
            PairedToggle::Lincomb => "lincomb",
        }
    }

    fn of(self, cfg: &LayoutConfig) -> Toggle {
        match self {
            PairedToggle::Tfidf => cfg.tfidf,
            PairedToggle::Lincomb => cfg.lincomb,
        }
    }
}

/// Pairs rows that differ only in the given switch (the derived seed aside)
/// and sign-tests how often switching it on strictly improves the measure.
pub fn paired_toggle_test(
    records: &[AggregatedRecord],
    toggle: PairedToggle,
    measure: Measure,
) -> Result<SignTest> {
    // identity minus the toggled column (index 2 or 5) and the seed (16)
    let skip = match toggle {
        PairedToggle::Tfidf => 2,
        PairedToggle::Lincomb => 5,
    };
    let mut on: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    let mut off: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    for r in records {
        let side = match toggle.of(&r.config) {
            Toggle::On => &mut on,
            Toggle::Off => &mut off,
            Toggle::NotApplicable => continue,
        };
        let mut key = r.config.identity_fields();
        key.remove(16);
        key.remove(skip);
        side.insert(key, measure.of(r));
    }
    let mut n = 0usize;
    let mut k = 0usize;
    for (key, &v_on) in &on {
        if let Some(&v_off) = off.get(key) {
            if v_on > v_off {
                n += 1;
                k += 1;
            } else if v_off > v_on {
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::NoPairs {
            what: format!("{} toggle on {}", toggle.name(), measure.name()),
        });
    }
    sign_test(k, n)
}

// ---------------------------------------------------------------------------
// bests, summaries, default percentile

#[derive(Debug, Clone)]
pub struct BestResult {
    pub dataset: String,
    pub measure: &'static str,
    /// Best score after rounding to two decimals.
    pub value: f64,
    /// Configuration families attaining the best rounded score, sorted.
    pub configs: Vec<String>,
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// The best configuration families per dataset and measure, with scores
/// rounded to two decimals so near-identical runs tie rather than hiding
/// behind noise.
pub fn best_results(records: &[AggregatedRecord]) -> Vec<BestResult> {
    let mut out = Vec::new();
    let datasets: BTreeSet<&str> = records.iter().map(|r| r.config.dataset.as_str()).collect();
    for dataset in datasets {
        for measure in [Measure::Alpha, Measure::Beta] {
            let mut best = f64::NEG_INFINITY;
            let mut configs = BTreeSet::new();
            for r in records.iter().filter(|r| r.config.dataset == dataset) {
                let v = round2(measure.of(r));
                if v > best {
                    best = v;
                    configs.clear();
                }
                if v == best {
                    configs.insert(encode_config_id(&r.config));
                }
            }
            if best > f64::NEG_INFINITY {
                out.push(BestResult {
                    dataset: dataset.to_string(),
                    measure: measure.name(),
                    value: best,
                    configs: configs.into_iter().collect(),
                });
            }
        }
    }
    out
}

/// Minimum, quartiles and maximum with linear interpolation between order
/// statistics (the quartile of a position p falls at rank p * (n - 1)).
pub fn five_number_summary(values: &[f64]) -> Result<[f64; 5]> {
    if values.is_empty() {
        return Err(Error::NoPairs {
            what: "five-number summary of nothing".to_string(),
        });
    }
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| -> f64 {
        let h = p * (v.len() - 1) as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if lo + 1 < v.len() {
            v[lo] + frac * (v[lo + 1] - v[lo])
        } else {
            v[lo]
        }
    };
    Ok([v[0], q(0.25), q(0.5), q(0.75), v[v.len() - 1]])
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub dataset: String,
    pub config: String,
    pub measure: &'static str,
    pub count: usize,
    pub summary: [f64; 5],
}

/// Five-number summaries of both aggregates per dataset and configuration
/// family.
pub fn summaries(records: &[AggregatedRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), Vec<&AggregatedRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.config.dataset.clone(), encode_config_id(&r.config)))
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for ((dataset, config), rows) in groups {
        for measure in [Measure::Alpha, Measure::Beta] {
            let values: Vec<f64> = rows.iter().map(|r| measure.of(r)).collect();
            let summary = five_number_summary(&values).expect("group is non-empty");
            out.push(SummaryRow {
                dataset: dataset.clone(),
                config: config.clone(),
                measure: measure.name(),
                count: values.len(),
                summary,
            });
        }
    }
    out
}

/// Default hyperparameters a sweep is compared against. The t-SNE learning
/// rate default scales with the dataset size m as max(m / 48, 50).
fn is_default_row(cfg: &LayoutConfig, m: usize) -> bool {
    match &cfg.dr_params {
        crate::projection::DrParams::Tsne(p) => {
            p.perplexity == 30.0
                && p.n_iter == 1000
                && p.learning_rate == (m as f64 / 48.0).max(50.0)
        }
        crate::projection::DrParams::Umap(p) => p.min_dist == 0.1 && p.n_neighbors == 15,
        crate::projection::DrParams::Mds(p) => p.max_iter == 300,
        crate::projection::DrParams::Som(_) => false,
    }
}

#[derive(Debug, Clone)]
pub struct DefaultPercentile {
    pub tm: &'static str,
    pub tfidf: &'static str,
    pub k_topics: Option<usize>,
    pub lincomb: &'static str,
    pub dr: &'static str,
    /// Mean over datasets of the fraction of the sweep the default row
    /// strictly beats (the default row itself counts in the denominator).
    pub percentile: f64,
    pub n_datasets: usize,
}

#[derive(Debug, Clone)]
pub struct DefaultPercentiles {
    pub rows: Vec<DefaultPercentile>,
    /// Sweep groups with no default row in any dataset (e.g. SOM, which has
    /// no single default grid, or t-SNE sweeps that never ran the
    /// size-dependent default learning rate).
    pub skipped: Vec<String>,
}

/// Where the default projection hyperparameters rank inside each swept
/// configuration family, by the alpha aggregate.
pub fn default_percentiles(
    records: &[AggregatedRecord],
    dataset_sizes: &BTreeMap<String, usize>,
) -> DefaultPercentiles {
    type GroupKey = (
        &'static str,
        &'static str,
        Option<usize>,
        &'static str,
        &'static str,
    );
    let mut sweeps: BTreeMap<(GroupKey, String), Vec<&AggregatedRecord>> = BTreeMap::new();
    for r in records {
        let key = (
            r.config.tm.name(),
            r.config.tfidf.letter(),
            r.config.k_topics,
            r.config.lincomb.letter(),
            r.config.dr.name(),
        );
        sweeps
            .entry((key, r.config.dataset.clone()))
            .or_default()
            .push(r);
    }

    let mut fractions: BTreeMap<GroupKey, Vec<f64>> = BTreeMap::new();
    let mut seen: BTreeSet<GroupKey> = BTreeSet::new();
    for ((group, dataset), rows) in &sweeps {
        seen.insert(*group);
        let Some(&m) = dataset_sizes.get(dataset) else {
            continue;
        };
        let Some(default_row) = rows.iter().find(|r| is_default_row(&r.config, m)) else {
            continue;
        };
        let d_alpha = default_row.alpha;
        let beaten = rows.iter().filter(|r| r.alpha < d_alpha).count();
        fractions
            .entry(*group)
            .or_default()
            .push(beaten as f64 / rows.len() as f64);
    }

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for group in seen {
        match fractions.get(&group) {
            Some(f) => rows.push(DefaultPercentile {
                tm: group.0,
                tfidf: group.1,
                k_topics: group.2,
                lincomb: group.3,
                dr: group.4,
                percentile: f.iter().sum::<f64>() / f.len() as f64,
                n_datasets: f.len(),
            }),
            None => skipped.push(format!(
                "({},{},{},{},{})",
                group.0,
                group.1,
                group.2.map(|k| k.to_string()).unwrap_or_default(),
                group.3,
                group.4
            )),
        }
    }
    DefaultPercentiles { rows, skipped }
}

// ---------------------------------------------------------------------------
// report files

/// Quotes a CSV field when it contains a comma, quote or newline.
pub fn quote_csv(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub method: CorrMethod,
    pub threshold: f64,
    /// Document counts per dataset, for size-dependent defaults.
    pub dataset_sizes: BTreeMap<String, usize>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            method: CorrMethod::Pearson,
            threshold: 0.8,
            dataset_sizes: BTreeMap::new(),
        }
    }
}

#[derive(Debug)]
pub struct AnalysisReport {
    pub n_records: usize,
    pub n_aggregated: usize,
    pub correlations: CorrelationReport,
    pub sign_tests: Vec<(PairedToggle, Measure, SignTest)>,
    pub best: Vec<BestResult>,
    pub summaries: Vec<SummaryRow>,
    pub defaults: DefaultPercentiles,
    /// Analyses that could not run on this data (with the reason).
    pub notes: Vec<String>,
}

/// Runs every analysis over a result set and writes the five report CSVs
/// into `out_dir`.
pub fn write_analysis(
    records: &[QualityRecord],
    out_dir: &Path,
    opts: &AnalysisOptions,
) -> Result<AnalysisReport> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let aggregated = aggregate(records)?;
    if aggregated.is_empty() {
        return Err(Error::NoPairs {
            what: "analysis without successful rows".to_string(),
        });
    }
    let mut notes = Vec::new();

    let correlations = metric_correlations(&aggregated, opts.method, opts.threshold)?;
    let mut corr_csv = String::new();
    writeln!(corr_csv, "metric,{},component", METRIC_COLUMNS.join(",")).unwrap();
    for (name, row) in METRIC_COLUMNS.iter().zip(&correlations.matrix) {
        let comp = correlations
            .components
            .iter()
            .position(|c| c.contains(&name.to_string()))
            .map(|p| (p + 1).to_string())
            .unwrap_or_default();
        let cells: Vec<String> = row
            .iter()
            .map(|&v| {
                if v.is_nan() {
                    String::new()
                } else {
                    fmt_f64(v)
                }
            })
            .collect();
        writeln!(corr_csv, "{},{},{comp}", quote_csv(name), cells.join(",")).unwrap();
    }
    write_file(&out_dir.join("correlations.csv"), &corr_csv)?;

    let mut sign_tests = Vec::new();
    let mut sign_csv = String::from("toggle,measure,n_pairs,wins,p_value,lower_99,upper\n");
    for toggle in [PairedToggle::Tfidf, PairedToggle::Lincomb] {
        for measure in [Measure::Alpha, Measure::Beta] {
            match paired_toggle_test(&aggregated, toggle, measure) {
                Ok(t) => {
                    writeln!(
                        sign_csv,
                        "{},{},{},{},{},{},{}",
                        toggle.name(),
                        measure.name(),
                        t.n,
                        t.k,
                        fmt_f64(t.p_value),
                        fmt_f64(t.lower_99),
                        fmt_f64(t.upper)
                    )
                    .unwrap();
                    sign_tests.push((toggle, measure, t));
                }
                Err(e) => notes.push(format!("sign test skipped: {e}")),
            }
        }
    }
    write_file(&out_dir.join("sign_tests.csv"), &sign_csv)?;

    let best = best_results(&aggregated);
    let mut best_csv = String::from("dataset,measure,value,config\n");
    for b in &best {
        for config in &b.configs {
            writeln!(
                best_csv,
                "{},{},{},{}",
                quote_csv(&b.dataset),
                b.measure,
                fmt_f64(b.value),
                quote_csv(config)
            )
            .unwrap();
        }
    }
    write_file(&out_dir.join("best.csv"), &best_csv)?;

    let summary_rows = summaries(&aggregated);
    let mut sum_csv = String::from("dataset,config,measure,count,min,q1,median,q3,max\n");
    for s in &summary_rows {
        writeln!(
            sum_csv,
            "{},{},{},{},{}",
            quote_csv(&s.dataset),
            quote_csv(&s.config),
            s.measure,
            s.count,
            s.summary.map(fmt_f64).join(",")
        )
        .unwrap();
    }
    write_file(&out_dir.join("summaries.csv"), &sum_csv)?;

    let defaults = default_percentiles(&aggregated, &opts.dataset_sizes);
    let mut def_csv = String::from("tm,tfidf,K,lincomb,dr,datasets,percentile\n");
    for d in &defaults.rows {
        writeln!(
            def_csv,
            "{},{},{},{},{},{},{}",
            d.tm,
            d.tfidf,
            d.k_topics.map(|k| k.to_string()).unwrap_or_default(),
            d.lincomb,
            d.dr,
            d.n_datasets,
            fmt_f64(d.percentile)
        )
        .unwrap();
    }
    write_file(&out_dir.join("default_percentiles.csv"), &def_csv)?;
    for s in &defaults.skipped {
        notes.push(format!("no default row ran for sweep {s}"));
    }

    Ok(AnalysisReport {
        n_records: records.len(),
        n_aggregated: aggregated.len(),
        correlations,
        sign_tests,
        best,
        summaries: summary_rows,
        defaults,
        notes,
    })
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TmKind;
    use crate::projection::{DrKind, DrParams, MdsParams, TsneParams};
    use crate::runner::ReferenceSpace;

    fn record(
        dataset: &str,
        tm: TmKind,
        tfidf: Toggle,
        lincomb: Toggle,
        seed: u64,
        mv: MetricVector,
    ) -> QualityRecord {
        QualityRecord {
            config: LayoutConfig {
                dataset: dataset.to_string(),
                tm,
                tfidf,
                k_topics: if tm.has_topics() { Some(4) } else { None },
                dr: DrKind::Mds,
                lincomb,
                reference_space: ReferenceSpace::TmSpace,
                dr_params: DrParams::Mds(MdsParams {
                    max_iter: 300 + 20 * (seed as usize % 5),
                }),
                seed,
            },
            metrics: Some(mv),
            runtime_s: 0,
            status: "ok".to_string(),
        }
    }

    fn mv(trust: f64, ch: f64, db: f64) -> MetricVector {
        MetricVector {
            trust,
            cont: 0.9,
            shepard: 0.5,
            nh: 0.8,
            dsc: 0.7,
            silhouette: 0.4,
            ch_raw: ch,
            db_raw: db,
            k_neighbors: 7,
        }
    }

    #[test]
    fn aggregate_extremes() {
        assert_eq!(aggregate_alpha(1.0, 1.0, 1.0, 0.0), 0.5);
        assert_eq!(aggregate_beta(0.0, 1.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn normalization_is_per_group_with_infinities_to_one() {
        let records = vec![
            record(
                "d",
                TmKind::Vsm,
                Toggle::Off,
                Toggle::NotApplicable,
                0,
                mv(0.9, 10.0, 2.0),
            ),
            record(
                "d",
                TmKind::Vsm,
                Toggle::Off,
                Toggle::NotApplicable,
                1,
                mv(0.8, 40.0, 4.0),
            ),
            record(
                "d",
                TmKind::Vsm,
                Toggle::Off,
                Toggle::NotApplicable,
                2,
                mv(0.7, f64::INFINITY, 1.0),
            ),
            // different weighting -> its own scale
            record(
                "d",
                TmKind::Vsm,
                Toggle::On,
                Toggle::NotApplicable,
                3,
                mv(0.9, 5.0, 8.0),
            ),
        ];
        let agg = aggregate(&records).unwrap();
        assert_eq!(agg[0].beta_ch, 0.25);
        assert_eq!(agg[1].beta_ch, 1.0);
        assert_eq!(agg[2].beta_ch, 1.0); // infinite -> 1
        assert_eq!(agg[3].beta_ch, 1.0); // own group's max
        assert_eq!(agg[0].beta_db, 0.5);
        assert_eq!(agg[3].beta_db, 1.0);
    }

    #[test]
    fn all_infinite_group_is_an_error() {
        let records = vec![record(
            "d",
            TmKind::Vsm,
            Toggle::Off,
            Toggle::NotApplicable,
            0,
            mv(0.9, f64::INFINITY, 1.0),
        )];
        assert!(matches!(
            aggregate(&records),
            Err(Error::NoFiniteInGroup { .. })
        ));
    }

    #[test]
    fn sign_test_reference_values() {
        let t = sign_test(10936, 14172).unwrap();
        assert!(t.p_value < 1e-9);
        assert!((t.lower_99 - 0.76).abs() < 0.005, "lower {}", t.lower_99);
        let t = sign_test(11073, 17675).unwrap();
        assert!((t.lower_99 - 0.62).abs() < 0.005, "lower {}", t.lower_99);
        assert_eq!(t.upper, 1.0);
    }

    #[test]
    fn sign_test_boundaries() {
        let t = sign_test(0, 10).unwrap();
        assert_eq!(t.p_value, 1.0);
        assert_eq!(t.lower_99, 0.0);
        let t = sign_test(10, 10).unwrap();
        assert!((t.p_value - 0.5f64.powi(10)).abs() < 1e-15);
        // half wins on an even split
        let t = sign_test(5, 10).unwrap();
        assert!((t.p_value - 0.623046875).abs() < 1e-12); // sum_{i>=5} C(10,i)/2^10
    }

    #[test]
    fn paired_test_matches_on_everything_but_the_toggle() {
        let mut records = Vec::new();
        // 6 matched pairs over max_iter values: tfidf on wins 5, loses 1
        for i in 0..6u64 {
            let win = i > 0;
            let mut on = record(
                "d",
                TmKind::Vsm,
                Toggle::On,
                Toggle::NotApplicable,
                i,
                mv(if win { 0.95 } else { 0.5 }, 1.0, 1.0),
            );
            let mut off = record(
                "d",
                TmKind::Vsm,
                Toggle::Off,
                Toggle::NotApplicable,
                i,
                mv(0.7, 1.0, 1.0),
            );
            // matched rows share all identity fields except tfidf and seed
            on.config.dr_params = DrParams::Mds(MdsParams {
                max_iter: 300 + 20 * i as usize,
            });
            off.config.dr_params = DrParams::Mds(MdsParams {
                max_iter: 300 + 20 * i as usize,
            });
            on.config.seed = 100 + i;
            off.config.seed = 200 + i;
            records.push(on);
            records.push(off);
        }
        let agg = aggregate(&records).unwrap();
        let t = paired_toggle_test(&agg, PairedToggle::Tfidf, Measure::Alpha).unwrap();
        assert_eq!((t.n, t.k), (6, 5));
        // lincomb never applies to VSM
        assert!(paired_toggle_test(&agg, PairedToggle::Lincomb, Measure::Alpha).is_err());
    }

    #[test]
    fn five_number_summary_interpolates() {
        let s = five_number_summary(&[4.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(s, [1.0, 1.75, 2.5, 3.25, 4.0]);
        let s = five_number_summary(&[5.0]).unwrap();
        assert_eq!(s, [5.0, 5.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn best_results_round_and_tie() {
        // alpha = 0.4 + (trust + 1.65) / 6 here, so trust 0.91 and 0.93 give
        // 0.8267 and 0.83, which agree after rounding to two decimals
        let records = vec![
            record(
                "d",
                TmKind::Vsm,
                Toggle::Off,
                Toggle::NotApplicable,
                0,
                mv(0.91, 1.0, 1.0),
            ),
            record(
                "d",
                TmKind::Vsm,
                Toggle::On,
                Toggle::NotApplicable,
                1,
                mv(0.93, 1.0, 1.0),
            ),
            record(
                "d",
                TmKind::Lsi,
                Toggle::Off,
                Toggle::Off,
                2,
                mv(0.30, 1.0, 1.0),
            ),
        ];
        let agg = aggregate(&records).unwrap();
        let best = best_results(&agg);
        let alpha_best = best.iter().find(|b| b.measure == "alpha").unwrap();
        assert_eq!(alpha_best.value, 0.83);
        assert_eq!(alpha_best.configs.len(), 2);
        assert!(alpha_best.configs.contains(&"(VSM,-,MDS,X)".to_string()));
        assert!(alpha_best.configs.contains(&"(VSM,+,MDS,X)".to_string()));
    }

    #[test]
    fn correlations_group_correlated_metrics() {
        // trust tracks cont exactly; shepard anti-tracks them; nh is noise
        let mut records = Vec::new();
        let vals = [0.1, 0.3, 0.5, 0.7, 0.9, 0.2, 0.6, 0.8];
        for (i, &v) in vals.iter().enumerate() {
            let m = MetricVector {
                trust: v,
                cont: v * 0.5 + 0.2,
                shepard: -v,
                nh: [0.4, 0.9, 0.1, 0.6, 0.3, 0.8, 0.2, 0.7][i],
                dsc: 0.5,
                silhouette: 0.5,
                ch_raw: 1.0 + i as f64,
                db_raw: 1.0,
                k_neighbors: 7,
            };
            records.push(record(
                "d",
                TmKind::Vsm,
                Toggle::Off,
                Toggle::NotApplicable,
                i as u64,
                m,
            ));
        }
        let agg = aggregate(&records).unwrap();
        let rep = metric_correlations(&agg, CorrMethod::Pearson, 0.8).unwrap();
        assert!((rep.matrix[0][1] - 1.0).abs() < 1e-12);
        let trust_comp = rep
            .components
            .iter()
            .find(|c| c.contains(&"trust".to_string()))
            .unwrap();
        assert!(trust_comp.contains(&"cont".to_string()));
        assert!(
            !trust_comp.contains(&"shepard".to_string()),
            "negative correlation is no link"
        );
        // dsc and silhouette are constant -> excluded everywhere
        assert!(rep.matrix[4][4].is_nan());
        assert!(rep
            .components
            .iter()
            .all(|c| !c.contains(&"dsc".to_string())));
    }

    #[test]
    fn spearman_handles_monotone_nonlinear() {
        let mut records = Vec::new();
        for i in 0..10u64 {
            let v = (i as f64 + 1.0) / 10.0;
            let m = MetricVector {
                trust: v,
                cont: v.powi(5), // monotone in trust but far from linear
                shepard: 0.0,
                nh: 0.5,
                dsc: 0.5,
                silhouette: 0.5,
                ch_raw: 1.0,
                db_raw: 1.0,
                k_neighbors: 7,
            };
            records.push(record(
                "d",
                TmKind::Vsm,
                Toggle::Off,
                Toggle::NotApplicable,
                i,
                m,
            ));
        }
        let agg = aggregate(&records).unwrap();
        let rep = metric_correlations(&agg, CorrMethod::Spearman, 0.8).unwrap();
        assert!((rep.matrix[0][1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_percentile_finds_the_default_row() {
        let mut records = Vec::new();
        // a 4-point MDS sweep; max_iter 300 is the default
        for (i, (max_iter, trust)) in [(300usize, 0.8), (320, 0.6), (340, 0.9), (360, 0.7)]
            .iter()
            .enumerate()
        {
            let mut r = record(
                "d",
                TmKind::Vsm,
                Toggle::Off,
                Toggle::NotApplicable,
                i as u64,
                mv(*trust, 1.0, 1.0),
            );
            r.config.dr_params = DrParams::Mds(MdsParams {
                max_iter: *max_iter,
            });
            records.push(r);
        }
        // a t-SNE row that never matches a default learning rate
        let mut t = record(
            "d",
            TmKind::Vsm,
            Toggle::Off,
            Toggle::NotApplicable,
            9,
            mv(0.5, 1.0, 1.0),
        );
        t.config.dr = DrKind::Tsne;
        t.config.dr_params = DrParams::Tsne(TsneParams {
            perplexity: 30.0,
            n_iter: 1000,
            learning_rate: 75.0,
        });
        records.push(t);

        let agg = aggregate(&records).unwrap();
        let sizes = BTreeMap::from([("d".to_string(), 100usize)]);
        let dp = default_percentiles(&agg, &sizes);
        assert_eq!(dp.rows.len(), 1);
        let row = &dp.rows[0];
        assert_eq!(row.dr, "MDS");
        // default (trust 0.8) strictly beats 2 of the 4 sweep rows
        assert_eq!(row.percentile, 0.5);
        assert_eq!(dp.skipped.len(), 1);
        assert!(dp.skipped[0].contains("t-SNE"));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(quote_csv("plain"), "plain");
        assert_eq!(quote_csv("(VSM,+,MDS,X)"), "\"(VSM,+,MDS,X)\"");
        assert_eq!(quote_csv("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn write_analysis_produces_all_reports() {
        let mut records = Vec::new();
        for i in 0..8u64 {
            let mut on = record(
                "d",
                TmKind::Vsm,
                Toggle::On,
                Toggle::NotApplicable,
                i,
                mv(0.6 + 0.04 * i as f64, 1.0 + i as f64, 1.0),
            );
            let mut off = record(
                "d",
                TmKind::Vsm,
                Toggle::Off,
                Toggle::NotApplicable,
                i,
                mv(0.5 + 0.03 * i as f64, 2.0, 2.0),
            );
            on.config.dr_params = DrParams::Mds(MdsParams {
                max_iter: 300 + 20 * i as usize,
            });
            off.config.dr_params = DrParams::Mds(MdsParams {
                max_iter: 300 + 20 * i as usize,
            });
            records.push(on);
            records.push(off);
        }
        // one failed row to prove it is dropped
        let mut failed = record(
            "d",
            TmKind::Vsm,
            Toggle::Off,
            Toggle::NotApplicable,
            99,
            mv(0.0, 1.0, 1.0),
        );
        failed.status = "failed:diverged".to_string();
        failed.metrics = None;
        records.push(failed);

        let dir = tempfile::tempdir().unwrap();
        let opts = AnalysisOptions {
            dataset_sizes: BTreeMap::from([("d".to_string(), 100usize)]),
            ..AnalysisOptions::default()
        };
        let report = write_analysis(&records, dir.path(), &opts).unwrap();
        assert_eq!(report.n_aggregated, 16);
        assert!(!report.sign_tests.is_empty());
        for f in [
            "correlations.csv",
            "sign_tests.csv",
            "best.csv",
            "summaries.csv",
            "default_percentiles.csv",
        ] {
            let content = fs::read_to_string(dir.path().join(f)).unwrap();
            assert!(content.lines().count() >= 1, "{f} should not be empty");
        }
        let best = fs::read_to_string(dir.path().join("best.csv")).unwrap();
        assert!(best.contains("\"(VSM,+,MDS,X)\"") || best.contains("\"(VSM,-,MDS,X)\""));
    }
}
