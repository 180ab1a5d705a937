//! Layout quality metrics.
//!
//! Four rank/neighborhood metrics score how well the plane preserves the
//! high-dimensional reference (trustworthiness, continuity, Shepard rank
//! correlation, neighborhood hit) and four cluster-separation metrics score
//! the layout against the labels (distance consistency, silhouette,
//! Calinski-Harabasz, Davies-Bouldin). Neighbor ranks break ties by ascending
//! point index, which keeps every metric well-defined on layouts with
//! coincident points.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::index::sample as sample_indices;

use crate::error::{Error, Result};
use crate::models::DistanceMatrix;
use crate::projection::Layout;
use crate::seeding;

pub const DEFAULT_NEIGHBORS: usize = 7;

/// The eight raw metric values for one layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricVector {
    pub trust: f64,
    pub cont: f64,
    pub shepard: f64,
    pub nh: f64,
    pub dsc: f64,
    pub silhouette: f64,
    /// May be +inf when the within-cluster scatter is exactly zero.
    pub ch_raw: f64,
    /// May be +inf when two class centroids coincide.
    pub db_raw: f64,
    pub k_neighbors: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ClusterMetrics {
    pub dsc: f64,
    pub silhouette: f64,
    pub ch_raw: f64,
    pub db_raw: f64,
}

/// How many layout/reference distance pairs the Shepard correlation may use.
#[derive(Debug, Clone, Copy)]
pub enum PairBudget {
    All,
    AtMost(usize),
}

impl PairBudget {
    /// All pairs up to 2000 points, then a 2,000,000-pair sample.
    pub fn default_for(m: usize) -> Self {
        if m <= 2000 {
            PairBudget::All
        } else {
            PairBudget::AtMost(2_000_000)
        }
    }
}

pub fn layout_distances(layout: &Layout) -> Array2<f64> {
    let pos = &layout.positions;
    let m = pos.nrows();
    let mut d = Array2::zeros((m, m));
    for i in 0..m {
        for j in (i + 1)..m {
            let dx = pos[[i, 0]] - pos[[j, 0]];
            let dy = pos[[i, 1]] - pos[[j, 1]];
            let v = (dx * dx + dy * dy).sqrt();
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Neighbor order of point `i`: every other point sorted by distance, ties by
/// ascending index. The k-th nearest neighbor is `order[k - 1]`.
fn neighbor_order(d: &Array2<f64>, i: usize) -> Vec<usize> {
    let m = d.nrows();
    let mut idx: Vec<usize> = (0..m).filter(|&j| j != i).collect();
    idx.sort_by(|&a, &b| d[[i, a]].partial_cmp(&d[[i, b]]).unwrap().then(a.cmp(&b)));
    idx
}

fn check_k(m: usize, k: usize) -> Result<()> {
    if k < 1 || k >= m {
        return Err(Error::NeighborhoodTooLarge { k, m });
    }
    // the trust/continuity normalizer m*k*(2m - 3k - 1) must stay positive
    if 2 * m < 3 * k + 2 {
        return Err(Error::NeighborhoodTooLarge { k, m });
    }
    Ok(())
}

/// Trustworthiness and continuity at neighborhood size k.
///
/// Trustworthiness penalizes points that enter the layout k-neighborhood
/// without being high-dimensional k-neighbors, weighted by how far down the
/// high-dimensional ranking they sit; continuity is the same with the two
/// spaces exchanged.
pub fn rank_based_metrics(
    d_high: &DistanceMatrix,
    layout: &Layout,
    k: usize,
) -> Result<(f64, f64)> {
    let m = d_high.n();
    if layout.n_points() != m {
        return Err(Error::dim(format!(
            "distance matrix has {m} points, layout has {}",
            layout.n_points()
        )));
    }
    check_k(m, k)?;
    let d_low = layout_distances(layout);
    let trust = penalty_sum(&d_high.values, &d_low, k, m);
    let cont = penalty_sum(&d_low, &d_high.values, k, m);
    let norm = 2.0 / (m as f64 * k as f64 * (2 * m - 3 * k - 1) as f64);
    Ok((1.0 - norm * trust, 1.0 - norm * cont))
}

/// Sum over points of sum of (source-space rank - k) for points inside the
/// target-space k-neighborhood but outside the source-space one.
fn penalty_sum(d_source: &Array2<f64>, d_target: &Array2<f64>, k: usize, m: usize) -> f64 {
    let mut total = 0.0;
    let mut source_rank = vec![0usize; m];
    let mut in_source_top = vec![false; m];
    for i in 0..m {
        let source_order = neighbor_order(d_source, i);
        for (pos, &j) in source_order.iter().enumerate() {
            source_rank[j] = pos + 1;
            in_source_top[j] = pos < k;
        }
        let target_order = neighbor_order(d_target, i);
        for &j in &target_order[..k] {
            if !in_source_top[j] {
                total += (source_rank[j] - k) as f64;
            }
        }
        for &j in &source_order {
            in_source_top[j] = false;
        }
    }
    total
}

/// Mean fraction of each point's k nearest layout neighbors that carry the
/// point's own label.
pub fn neighborhood_hit(layout: &Layout, labels: &[String], k: usize) -> Result<f64> {
    let m = layout.n_points();
    if labels.len() != m {
        return Err(Error::dim(format!(
            "{m} points but {} labels",
            labels.len()
        )));
    }
    if k < 1 || k >= m {
        return Err(Error::NeighborhoodTooLarge { k, m });
    }
    let d = layout_distances(layout);
    let mut total = 0.0;
    for i in 0..m {
        let order = neighbor_order(&d, i);
        let hits = order[..k]
            .iter()
            .filter(|&&j| labels[j] == labels[i])
            .count();
        total += hits as f64 / k as f64;
    }
    Ok(total / m as f64)
}

/// Spearman rank correlation between high-dimensional and layout distances
/// over point pairs. Ties receive average ranks. When the pair count exceeds
/// the budget, a seeded uniform sample of pairs is used instead.
pub fn shepard_correlation(
    d_high: &DistanceMatrix,
    layout: &Layout,
    budget: PairBudget,
    seed: u64,
) -> Result<f64> {
    let m = d_high.n();
    if layout.n_points() != m {
        return Err(Error::dim(format!(
            "distance matrix has {m} points, layout has {}",
            layout.n_points()
        )));
    }
    if m < 3 {
        return Err(Error::TooFewPoints {
            method: "Shepard",
            m,
            min: 3,
        });
    }
    let d_low = layout_distances(layout);
    let n_pairs = m * (m - 1) / 2;
    let take = match budget {
        PairBudget::All => n_pairs,
        PairBudget::AtMost(b) => b.min(n_pairs),
    };

    let mut high = Vec::with_capacity(take);
    let mut low = Vec::with_capacity(take);
    if take == n_pairs {
        for i in 0..m {
            for j in (i + 1)..m {
                high.push(d_high.values[[i, j]]);
                low.push(d_low[[i, j]]);
            }
        }
    } else {
        let mut rng = seeding::rng_from(seed);
        let picked = sample_indices(&mut rng, n_pairs, take);
        for t in picked.iter() {
            let (i, j) = decode_pair(t, m);
            high.push(d_high.values[[i, j]]);
            low.push(d_low[[i, j]]);
        }
    }

    let rh = average_ranks(&high);
    let rl = average_ranks(&low);
    pearson(&rh, &rl)
}

/// Pair index t in [0, m(m-1)/2) -> (i, j) with i < j, row-major over the
/// upper triangle.
fn decode_pair(t: usize, m: usize) -> (usize, usize) {
    let mut i = 0;
    let mut remaining = t;
    let mut row_len = m - 1;
    while remaining >= row_len {
        remaining -= row_len;
        i += 1;
        row_len -= 1;
    }
    (i, i + 1 + remaining)
}

pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // ranks are 1-based; tied values share the mean of their positions
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

pub(crate) fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return Err(Error::ConstantDistances);
    }
    Ok(cov / (vx * vy).sqrt())
}

/// Distance consistency, silhouette, Calinski-Harabasz and Davies-Bouldin of
/// the labeled layout.
///
/// Degenerate geometry maps to sentinels rather than errors: zero
/// within-cluster scatter sends ch_raw to +inf (or 0 when the between-cluster
/// scatter is zero too), coinciding centroids send db_raw to +inf.
pub fn cluster_separation_metrics(layout: &Layout, labels: &[String]) -> Result<ClusterMetrics> {
    let m = layout.n_points();
    if labels.len() != m {
        return Err(Error::dim(format!(
            "{m} points but {} labels",
            labels.len()
        )));
    }
    let mut class_of = Vec::with_capacity(m);
    let mut classes: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        let next = classes.len();
        let c = *classes.entry(l.as_str()).or_insert(next);
        class_of.push(c);
    }
    let k = classes.len();
    if k < 2 {
        return Err(Error::TooFewClasses { found: k, min: 2 });
    }
    if m < k + 1 {
        return Err(Error::TooFewPoints {
            method: "cluster separation",
            m,
            min: k + 1,
        });
    }
    let pos = &layout.positions;

    let mut counts = vec![0usize; k];
    let mut centroids = vec![[0.0f64; 2]; k];
    for i in 0..m {
        let c = class_of[i];
        counts[c] += 1;
        centroids[c][0] += pos[[i, 0]];
        centroids[c][1] += pos[[i, 1]];
    }
    for c in 0..k {
        centroids[c][0] /= counts[c] as f64;
        centroids[c][1] /= counts[c] as f64;
    }

    // distance consistency: own centroid at least as near as any other
    let mut dsc_hits = 0usize;
    for i in 0..m {
        let own = dist2(pos[[i, 0]], pos[[i, 1]], centroids[class_of[i]]);
        let ok = (0..k)
            .all(|c| c == class_of[i] || own <= dist2(pos[[i, 0]], pos[[i, 1]], centroids[c]));
        if ok {
            dsc_hits += 1;
        }
    }
    let dsc = dsc_hits as f64 / m as f64;

    // silhouette with singleton classes contributing zero
    let d = layout_distances(layout);
    let mut sil_total = 0.0;
    for i in 0..m {
        if counts[class_of[i]] < 2 {
            continue;
        }
        let mut sums = vec![0.0f64; k];
        for j in 0..m {
            if j != i {
                sums[class_of[j]] += d[[i, j]];
            }
        }
        let a = sums[class_of[i]] / (counts[class_of[i]] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != class_of[i] {
                b = b.min(sums[c] / counts[c] as f64);
            }
        }
        let denom = a.max(b);
        if denom > 0.0 {
            sil_total += (b - a) / denom;
        }
    }
    let silhouette = sil_total / m as f64;

    // Calinski-Harabasz
    let grand = {
        let mut g = [0.0f64; 2];
        for i in 0..m {
            g[0] += pos[[i, 0]];
            g[1] += pos[[i, 1]];
        }
        [g[0] / m as f64, g[1] / m as f64]
    };
    let mut between = 0.0;
    for c in 0..k {
        between += counts[c] as f64 * dist2(centroids[c][0], centroids[c][1], grand);
    }
    let mut within = 0.0;
    for i in 0..m {
        within += dist2(pos[[i, 0]], pos[[i, 1]], centroids[class_of[i]]);
    }
    let ch_raw = if within > 0.0 {
        (between / (k - 1) as f64) / (within / (m - k) as f64)
    } else if between > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };

    // Davies-Bouldin
    let mut spread = vec![0.0f64; k];
    for i in 0..m {
        spread[class_of[i]] += dist2(pos[[i, 0]], pos[[i, 1]], centroids[class_of[i]]).sqrt();
    }
    for c in 0..k {
        spread[c] /= counts[c] as f64;
    }
    let mut db_total = 0.0;
    let mut db = 0.0;
    'outer: for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let cd = dist2(centroids[i][0], centroids[i][1], centroids[j]).sqrt();
            if cd == 0.0 {
                db = f64::INFINITY;
                break 'outer;
            }
            worst = worst.max((spread[i] + spread[j]) / cd);
        }
        db_total += worst;
    }
    let db_raw = if db.is_infinite() {
        db
    } else {
        db_total / k as f64
    };

    Ok(ClusterMetrics {
        dsc,
        silhouette,
        ch_raw,
        db_raw,
    })
}

fn dist2(x: f64, y: f64, c: [f64; 2]) -> f64 {
    let dx = x - c[0];
    let dy = y - c[1];
    dx * dx + dy * dy
}

/// All eight metrics of one layout against its high-dimensional reference.
pub fn evaluate_layout(
    d_high: &DistanceMatrix,
    layout: &Layout,
    labels: &[String],
    k: usize,
    budget: PairBudget,
    shepard_seed: u64,
) -> Result<MetricVector> {
    let (trust, cont) = rank_based_metrics(d_high, layout, k)?;
    let nh = neighborhood_hit(layout, labels, k)?;
    let shepard = shepard_correlation(d_high, layout, budget, shepard_seed)?;
    let cs = cluster_separation_metrics(layout, labels)?;
    Ok(MetricVector {
        trust,
        cont,
        shepard,
        nh,
        dsc: cs.dsc,
        silhouette: cs.silhouette,
        ch_raw: cs.ch_raw,
        db_raw: cs.db_raw,
        k_neighbors: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    use crate::models::{distance_matrix, Metric};

    fn layout_of(positions: Array2<f64>) -> Layout {
        Layout::from_positions(positions)
    }

    fn strings(labels: &[&str]) -> Vec<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identity_layout_scores_perfectly() {
        let mut rng = seeding::rng_from(2);
        let pts = Array2::from_shape_fn((20, 2), |_| rng.random::<f64>() * 10.0);
        let d = distance_matrix(&pts, Metric::Euclidean).unwrap();
        let layout = layout_of(pts);
        let (t, c) = rank_based_metrics(&d, &layout, 5).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!((c - 1.0).abs() < 1e-12);
        let s = shepard_correlation(&d, &layout, PairBudget::All, 0).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alternating_line_has_zero_neighborhood_hit() {
        let layout = layout_of(array![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]);
        let nh = neighborhood_hit(&layout, &strings(&["a", "b", "a", "b"]), 1).unwrap();
        assert_eq!(nh, 0.0);
    }

    #[test]
    fn single_class_has_full_neighborhood_hit() {
        let layout = layout_of(array![[0.0, 0.0], [1.0, 0.0], [5.0, 2.0], [3.0, 1.0]]);
        let nh = neighborhood_hit(&layout, &strings(&["a", "a", "a", "a"]), 2).unwrap();
        assert_eq!(nh, 1.0);
    }

    #[test]
    fn shepard_signs() {
        // layout distances scale the reference -> monotone -> +1
        let high = array![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [7.0, 0.0]];
        let d = distance_matrix(&high, Metric::Euclidean).unwrap();
        let scaled = layout_of(array![[0.0, 0.0], [2.0, 0.0], [6.0, 0.0], [14.0, 0.0]]);
        let s = shepard_correlation(&d, &scaled, PairBudget::All, 0).unwrap();
        assert!((s - 1.0).abs() < 1e-12);

        // reversing the geometry flips the sign
        let reversed = layout_of(array![[0.0, 0.0], [7.0, 0.0], [1.0, 0.0], [3.3, 0.0]]);
        let d_rev = distance_matrix(&reversed.positions, Metric::Euclidean).unwrap();
        let anti = shepard_correlation(&d_rev, &scaled, PairBudget::All, 0).unwrap();
        assert!(anti < 0.0);
    }

    #[test]
    fn shepard_rejects_constant_vectors() {
        let high = array![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]];
        let d = distance_matrix(&high, Metric::Euclidean).unwrap();
        let collapsed = layout_of(Array2::zeros((4, 2)));
        assert!(matches!(
            shepard_correlation(&d, &collapsed, PairBudget::All, 0),
            Err(Error::ConstantDistances)
        ));
    }

    #[test]
    fn sampled_shepard_is_deterministic_and_close() {
        let mut rng = seeding::rng_from(8);
        let pts = Array2::from_shape_fn((60, 3), |_| rng.random::<f64>());
        let d = distance_matrix(&pts, Metric::Euclidean).unwrap();
        let lay = layout_of(Array2::from_shape_fn((60, 2), |_| rng.random::<f64>()));
        let full = shepard_correlation(&d, &lay, PairBudget::All, 0).unwrap();
        let a = shepard_correlation(&d, &lay, PairBudget::AtMost(600), 5).unwrap();
        let b = shepard_correlation(&d, &lay, PairBudget::AtMost(600), 5).unwrap();
        assert_eq!(a, b);
        assert!(
            (a - full).abs() < 0.2,
            "sampled {a} too far from full {full}"
        );
    }

    #[test]
    fn collapsed_classes_are_perfectly_consistent() {
        // two classes collapsed to two distinct points
        let layout = layout_of(array![
            [0.0, 0.0],
            [0.0, 0.0],
            [0.0, 0.0],
            [5.0, 0.0],
            [5.0, 0.0],
            [5.0, 0.0],
        ]);
        let labels = strings(&["a", "a", "a", "b", "b", "b"]);
        let cs = cluster_separation_metrics(&layout, &labels).unwrap();
        assert_eq!(cs.dsc, 1.0);
        assert_eq!(cs.silhouette, 1.0);
        assert_eq!(cs.db_raw, 0.0);
        assert!(cs.ch_raw.is_infinite() && cs.ch_raw > 0.0);
    }

    #[test]
    fn coinciding_centroids_give_infinite_db() {
        // classes interleaved so both centroids land at the origin
        let layout = layout_of(array![[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0],]);
        let labels = strings(&["a", "a", "b", "b"]);
        let cs = cluster_separation_metrics(&layout, &labels).unwrap();
        assert!(cs.db_raw.is_infinite());
        assert!(cs.dsc <= 1.0); // defined despite the tie geometry
    }

    #[test]
    fn singleton_classes_contribute_zero_silhouette() {
        let layout = layout_of(array![[0.0, 0.0], [0.1, 0.0], [9.0, 9.0]]);
        let labels = strings(&["a", "a", "b"]);
        let cs = cluster_separation_metrics(&layout, &labels).unwrap();
        // the two "a" points have s ~ 1, the singleton adds 0
        assert!(
            cs.silhouette > 0.6 && cs.silhouette < 0.67,
            "{}",
            cs.silhouette
        );
    }

    #[test]
    fn one_class_is_rejected() {
        let layout = layout_of(array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]);
        assert!(matches!(
            cluster_separation_metrics(&layout, &strings(&["a", "a", "a"])),
            Err(Error::TooFewClasses { .. })
        ));
    }

    #[test]
    fn oversized_neighborhoods_are_rejected() {
        let layout = layout_of(array![[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [1.0, 3.0]]);
        let d = distance_matrix(&layout.positions, Metric::Euclidean).unwrap();
        assert!(matches!(
            rank_based_metrics(&d, &layout, 4),
            Err(Error::NeighborhoodTooLarge { .. })
        ));
        // k = 3 with m = 4 breaks the 2m - 3k - 1 > 0 requirement too
        assert!(matches!(
            rank_based_metrics(&d, &layout, 3),
            Err(Error::NeighborhoodTooLarge { .. })
        ));
    }

    #[test]
    fn trust_and_continuity_swap_under_space_exchange() {
        let mut rng = seeding::rng_from(12);
        for _ in 0..5 {
            let a_pts = Array2::from_shape_fn((15, 2), |_| rng.random::<f64>());
            let b_pts = Array2::from_shape_fn((15, 2), |_| rng.random::<f64>());
            let da = distance_matrix(&a_pts, Metric::Euclidean).unwrap();
            let la = layout_of(a_pts);
            let db = distance_matrix(&b_pts, Metric::Euclidean).unwrap();
            let lb = layout_of(b_pts);
            let (t_ab, c_ab) = rank_based_metrics(&da, &lb, 4).unwrap();
            let (t_ba, c_ba) = rank_based_metrics(&db, &la, 4).unwrap();
            assert!((t_ab - c_ba).abs() < 1e-12);
            assert!((c_ab - t_ba).abs() < 1e-12);
        }
    }

    #[test]
    fn coincident_points_do_not_break_rank_metrics() {
        let pts = array![
            [0.0, 0.0],
            [0.0, 0.0],
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 0.0],
            [2.0, 2.0]
        ];
        let d = distance_matrix(&pts, Metric::Euclidean).unwrap();
        let layout = layout_of(pts.clone());
        let (t, c) = rank_based_metrics(&d, &layout, 2).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!((c - 1.0).abs() < 1e-12);
        let nh = neighborhood_hit(&layout, &strings(&["a", "a", "a", "b", "b", "c"]), 2).unwrap();
        assert!(nh > 0.0);
    }

    #[test]
    fn pair_decoding_is_bijective() {
        let m = 9;
        let mut seen = std::collections::BTreeSet::new();
        for t in 0..m * (m - 1) / 2 {
            let (i, j) = decode_pair(t, m);
            assert!(i < j && j < m);
            assert!(seen.insert((i, j)));
        }
        assert_eq!(seen.len(), 36);
    }

    #[test]
    fn average_ranks_handle_ties() {
        let r = average_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
    }
}
